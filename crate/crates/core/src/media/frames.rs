//! Frame sampling through an external command, for endpoints that do not
//! take whole video files.
//!
//! The command is a whitespace-separated template with `{input}`, `{time}`
//! and `{output}` placeholders, e.g.
//! `ffmpeg -loglevel error -ss {time} -i {input} -frames:v 1 -y {output}`.

use std::path::Path;
use std::process::Command;

use super::image::prepare_image;
use super::{MediaAttachment, MediaError};

/// Expand the template for one frame.
pub fn frame_argv(template: &str, input: &Path, time_s: f64, output: &Path) -> Vec<String> {
    template
        .split_whitespace()
        .map(|tok| {
            tok.replace("{input}", &input.to_string_lossy())
                .replace("{time}", &format!("{time_s:.3}"))
                .replace("{output}", &output.to_string_lossy())
        })
        .collect()
}

/// Extract one JPEG per timestamp into `scratch` and prepare each as an
/// image attachment. `scratch` must lie outside the evidence root.
pub fn sample_frames(
    template: &str,
    input: &Path,
    times: &[f64],
    scratch: &Path,
    max_dim: u32,
) -> Result<Vec<MediaAttachment>, MediaError> {
    std::fs::create_dir_all(scratch).map_err(|e| MediaError::Io(e.to_string()))?;
    let mut out = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let frame = scratch.join(format!("frame_{i:03}.jpg"));
        let argv = frame_argv(template, input, t, &frame);
        let (prog, args) = argv.split_first().ok_or_else(|| MediaError::FrameSampling("empty frame command".into()))?;
        let status = Command::new(prog)
            .args(args)
            .status()
            .map_err(|e| MediaError::FrameSampling(format!("{prog}: {e}")))?;
        if !status.success() {
            return Err(MediaError::FrameSampling(format!("{prog} exited with {status} at {t:.3}s")));
        }
        let mut att = prepare_image(&frame, max_dim)?;
        att.duration_s = Some(t);
        out.push(att);
        let _ = std::fs::remove_file(&frame);
    }
    Ok(out)
}
