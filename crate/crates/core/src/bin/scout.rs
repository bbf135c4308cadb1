fn main() {
    std::process::exit(scout_core::cli::run_command(std::env::args_os()));
}
