//! Shared helpers for the integration and acceptance targets: a local mock
//! chat/ASR endpoint, evidence file builders and read-only snapshots.

#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::SystemTime;

// ---------------------------------------------------------------- mock endpoint

#[derive(Debug, Clone)]
pub enum Mode {
    /// Relevance derived from a hash of the request body: deterministic per
    /// request, varied across requests.
    Hashed,
    /// Same relevance for every request.
    Uniform(u8),
    /// Every chat request answered with this HTTP status.
    Status(u16),
    /// Free prose with no structured block.
    Prose(String),
}

pub struct MockEndpoint {
    pub base: String,
    pub hits: Arc<AtomicUsize>,
    pub bodies: Arc<Mutex<Vec<String>>>,
    server: Arc<tiny_http::Server>,
    handle: Option<JoinHandle<()>>,
}

pub fn hashed_relevance(body: &[u8]) -> u8 {
    Sha256::digest(body)[0] % 11
}

fn verdict_content(relevance: u8) -> String {
    let flags = if relevance >= 7 {
        r#"[{"label":"keyword-hit","severity":"medium","rationale":"mock rationale"}]"#
    } else {
        "[]"
    };
    format!(
        "Assessment follows.\n```json\n{{\"relevance\": {relevance}, \"flags\": {flags}, \"summary\": \"mock verdict {relevance}\"}}\n```\n"
    )
}

fn completion(content: &str) -> String {
    serde_json::json!({
        "id": "mock",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
        "usage": {"prompt_tokens": 10, "completion_tokens": 5, "total_tokens": 15}
    })
    .to_string()
}

const TRANSCRIPT: &str = r#"{"text":"Meet at the north dock at nine. Bring the ledger.","language":"en","segments":[{"start":0.0,"end":2.5,"text":"Meet at the north dock at nine."},{"start":2.5,"end":4.0,"text":"Bring the ledger."}]}"#;

impl MockEndpoint {
    pub fn start(mode: Mode) -> Self {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").expect("bind mock"));
        let port = server.server_addr().to_ip().expect("ip listener").port();
        let hits = Arc::new(AtomicUsize::new(0));
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let handle = {
            let (server, hits, bodies) = (server.clone(), hits.clone(), bodies.clone());
            std::thread::spawn(move || {
                for mut req in server.incoming_requests() {
                    let mut body = Vec::new();
                    let _ = req.as_reader().read_to_end(&mut body);
                    let json = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
                    if req.url().ends_with("/audio/transcriptions") {
                        let _ = req.respond(tiny_http::Response::from_string(TRANSCRIPT).with_header(json));
                        continue;
                    }
                    hits.fetch_add(1, Ordering::SeqCst);
                    bodies.lock().unwrap().push(String::from_utf8_lossy(&body).into_owned());
                    let resp = match &mode {
                        Mode::Hashed => completion(&verdict_content(hashed_relevance(&body))),
                        Mode::Uniform(r) => completion(&verdict_content(*r)),
                        Mode::Prose(p) => completion(p),
                        Mode::Status(s) => {
                            let _ = req.respond(tiny_http::Response::from_string("mock failure").with_status_code(*s));
                            continue;
                        }
                    };
                    let _ = req.respond(tiny_http::Response::from_string(resp).with_header(json));
                }
            })
        };
        Self { base: format!("http://127.0.0.1:{port}"), hits, bodies, server, handle: Some(handle) }
    }

    pub fn chat_url(&self) -> String {
        format!("{}/v1/chat/completions", self.base)
    }

    pub fn asr_url(&self) -> String {
        format!("{}/v1/audio/transcriptions", self.base)
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for MockEndpoint {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// A URL nothing listens on.
pub fn dead_url() -> String {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = l.local_addr().unwrap().port();
    drop(l);
    format!("http://127.0.0.1:{port}/v1/chat/completions")
}

/// Workspace config pointing both profiles (and ASR) at `chat_url`.
pub fn config_toml(chat_url: &str, asr_url: Option<&str>) -> String {
    let mut s = format!(
        r#"[gateway]
max_concurrent = 4
backoff_base_ms = 1

[profiles.mock-text]
endpoint_url = "{chat_url}"
model_id = "mock-text-1"
modality = "text"
timeout_s = 10
max_retries = 1

[profiles.mock-vision]
endpoint_url = "{chat_url}"
model_id = "mock-vision-1"
modality = "vision"
timeout_s = 10
max_retries = 1
"#
    );
    if let Some(a) = asr_url {
        s.push_str(&format!("\n[asr]\nurl = \"{a}\"\nmodel = \"mock-asr\"\ntimeout_s = 10\n"));
    }
    s
}

pub const CASE_TOML: &str = r#"runs_per_chunk = 1

[case]
id = "case-0042"
background = "Suspected exfiltration of vendor pricing data by an insider."
keywords = ["slashdot", "invoice", "Admin"]
"#;

// ---------------------------------------------------------------- CLI driver

pub fn scout(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = scout_core::cli::run_with(std::iter::once("scout").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into_owned(), String::from_utf8_lossy(&err).into_owned())
}

/// Evidence dir, workspace dir, case and config files in one temp tree.
pub struct Case {
    pub tmp: tempfile::TempDir,
    pub evidence: PathBuf,
    pub workspace: PathBuf,
    pub case_file: PathBuf,
    pub config_file: PathBuf,
}

impl Case {
    pub fn new(config: &str) -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let evidence = tmp.path().join("evidence");
        let workspace = tmp.path().join("workspace");
        std::fs::create_dir_all(&evidence).unwrap();
        let case_file = tmp.path().join("case.toml");
        let config_file = tmp.path().join("scout.toml");
        std::fs::write(&case_file, CASE_TOML).unwrap();
        std::fs::write(&config_file, config).unwrap();
        Self { tmp, evidence, workspace, case_file, config_file }
    }

    pub fn put(&self, rel: &str, bytes: &[u8]) {
        let p = self.evidence.join(rel);
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(p, bytes).unwrap();
    }

    pub fn ws(&self) -> &str {
        self.workspace.to_str().unwrap()
    }

    pub fn scan(&self) -> (i32, String, String) {
        scout(&[
            "scan",
            self.evidence.to_str().unwrap(),
            "--workspace",
            self.ws(),
            "--case",
            self.case_file.to_str().unwrap(),
            "--config",
            self.config_file.to_str().unwrap(),
        ])
    }

    pub fn run(&self, sub: &[&str]) -> (i32, String, String) {
        let mut args: Vec<&str> = sub.to_vec();
        args.extend(["--workspace", self.ws()]);
        scout(&args)
    }

    pub fn report_json(&self) -> serde_json::Value {
        serde_json::from_slice(&std::fs::read(self.workspace.join("report.json")).unwrap()).unwrap()
    }
}

// ---------------------------------------------------------------- snapshots

pub type Snapshot = BTreeMap<PathBuf, (String, SystemTime)>;

pub fn snapshot(root: &Path) -> Snapshot {
    fn walk(dir: &Path, out: &mut Snapshot) {
        for e in std::fs::read_dir(dir).unwrap() {
            let e = e.unwrap();
            let ft = e.file_type().unwrap();
            if ft.is_dir() {
                walk(&e.path(), out);
            } else if ft.is_file() {
                let bytes = std::fs::read(e.path()).unwrap();
                let mtime = e.metadata().unwrap().modified().unwrap();
                out.insert(e.path(), (hex::encode(Sha256::digest(&bytes)), mtime));
            }
        }
    }
    let mut out = Snapshot::new();
    walk(root, &mut out);
    out
}

// ---------------------------------------------------------------- pcap

pub fn pcap_file(records: &[(u32, u32, Vec<u8>)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&0xa1b2c3d4u32.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    out.extend_from_slice(&[0; 8]);
    out.extend_from_slice(&65535u32.to_le_bytes());
    out.extend_from_slice(&1u32.to_le_bytes());
    for (sec, usec, data) in records {
        out.extend_from_slice(&sec.to_le_bytes());
        out.extend_from_slice(&usec.to_le_bytes());
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(data);
    }
    out
}

fn ethernet(payload: &[u8]) -> Vec<u8> {
    let mut f = vec![0x00, 0x11, 0x22, 0x33, 0x44, 0x55, 0x66, 0x77, 0x88, 0x99, 0xaa, 0xbb, 0x08, 0x00];
    f.extend_from_slice(payload);
    f
}

fn ipv4(src: [u8; 4], dst: [u8; 4], protocol: u8, payload: &[u8]) -> Vec<u8> {
    let total = (20 + payload.len()) as u16;
    let mut h = vec![0x45, 0];
    h.extend_from_slice(&total.to_be_bytes());
    h.extend_from_slice(&[0, 1, 0, 0, 64, protocol, 0, 0]);
    h.extend_from_slice(&src);
    h.extend_from_slice(&dst);
    h.extend_from_slice(payload);
    h
}

pub fn udp_frame(src: [u8; 4], dst: [u8; 4], sport: u16, dport: u16, payload: &[u8]) -> Vec<u8> {
    let mut u = sport.to_be_bytes().to_vec();
    u.extend_from_slice(&dport.to_be_bytes());
    u.extend_from_slice(&((8 + payload.len()) as u16).to_be_bytes());
    u.extend_from_slice(&[0, 0]);
    u.extend_from_slice(payload);
    ethernet(&ipv4(src, dst, 17, &u))
}

/// ICMP error quoting an original UDP datagram header.
pub fn icmp_frame(src: [u8; 4], dst: [u8; 4], icmp_type: u8, code: u8) -> Vec<u8> {
    let mut m = vec![icmp_type, code, 0, 0, 0, 0, 0, 0];
    m.extend_from_slice(&ipv4(dst, src, 17, &[0x0b, 0xc1, 0x00, 0x35, 0, 8, 0, 0]));
    ethernet(&ipv4(src, dst, 1, &m))
}

fn dns_name(name: &str) -> Vec<u8> {
    let mut out = Vec::new();
    for label in name.split('.') {
        out.push(label.len() as u8);
        out.extend_from_slice(label.as_bytes());
    }
    out.push(0);
    out
}

pub fn dns_query(id: u16, name: &str) -> Vec<u8> {
    let mut m = id.to_be_bytes().to_vec();
    m.extend_from_slice(&[0x01, 0x00, 0, 1, 0, 0, 0, 0, 0, 0]);
    m.extend(dns_name(name));
    m.extend_from_slice(&[0, 1, 0, 1]);
    m
}

/// Response whose answers point back at the question name (offset 12).
pub fn dns_a_response(id: u16, name: &str, addrs: &[[u8; 4]]) -> Vec<u8> {
    let mut m = id.to_be_bytes().to_vec();
    m.extend_from_slice(&[0x81, 0x80, 0, 1]);
    m.extend_from_slice(&(addrs.len() as u16).to_be_bytes());
    m.extend_from_slice(&[0, 0, 0, 0]);
    m.extend(dns_name(name));
    m.extend_from_slice(&[0, 1, 0, 1]);
    for a in addrs {
        m.extend_from_slice(&[0xc0, 0x0c, 0, 1, 0, 1, 0, 0, 0x0e, 0x10, 0, 4]);
        m.extend_from_slice(a);
    }
    m
}

/// Capture modelled on the slashdot DNS exchange: repeated lookups of
/// `land.vendors.slashdot.org`, one of `apache.slashdot.org`, and ICMP
/// destination-unreachable errors.
pub fn slashdot_pcap() -> Vec<u8> {
    let host = [192, 168, 1, 10];
    let resolver = [192, 168, 1, 1];
    let mut recs = Vec::new();
    let mut t = 0u32;
    let mut push = |data: Vec<u8>| {
        recs.push((1_272_000_000 + t / 4, (t % 4) * 250_000, data));
        t += 1;
    };
    for id in 0..3u16 {
        push(udp_frame(host, resolver, 3009 + id, 53, &dns_query(0x100 + id, "land.vendors.slashdot.org")));
        push(udp_frame(
            resolver,
            host,
            53,
            3009 + id,
            &dns_a_response(0x100 + id, "land.vendors.slashdot.org", &[[216, 34, 181, 47]]),
        ));
    }
    push(udp_frame(host, resolver, 3020, 53, &dns_query(0x200, "apache.slashdot.org")));
    push(udp_frame(resolver, host, 53, 3020, &dns_a_response(0x200, "apache.slashdot.org", &[[216, 34, 181, 48]])));
    push(icmp_frame(resolver, host, 3, 3));
    push(icmp_frame(resolver, host, 3, 1));
    pcap_file(&recs)
}

// ---------------------------------------------------------------- documents

pub fn core_xml(created: &str, modified: &str, last_by: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\
         <cp:coreProperties xmlns:cp=\"http://schemas.openxmlformats.org/package/2006/metadata/core-properties\" \
         xmlns:dc=\"http://purl.org/dc/elements/1.1/\" xmlns:dcterms=\"http://purl.org/dc/terms/\" \
         xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\">\
         <dc:title>Vendor price list</dc:title><dc:creator>j.doe</dc:creator>\
         <cp:lastModifiedBy>{last_by}</cp:lastModifiedBy>\
         <dcterms:created xsi:type=\"dcterms:W3CDTF\">{created}</dcterms:created>\
         <dcterms:modified xsi:type=\"dcterms:W3CDTF\">{modified}</dcterms:modified>\
         </cp:coreProperties>"
    )
}

pub fn docx(core: &str, paragraphs: &[&str]) -> Vec<u8> {
    let body: String = paragraphs.iter().map(|p| format!("<w:p><w:r><w:t>{p}</w:t></w:r></w:p>")).collect();
    let document = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\
         <w:document xmlns:w=\"http://schemas.openxmlformats.org/wordprocessingml/2006/main\"><w:body>{body}</w:body></w:document>"
    );
    let content_types = "<?xml version=\"1.0\"?><Types xmlns=\"http://schemas.openxmlformats.org/package/2006/content-types\"/>";
    let mut zip = zip::ZipWriter::new(Cursor::new(Vec::new()));
    let opts = zip::write::SimpleFileOptions::default();
    for (name, content) in [("[Content_Types].xml", content_types), ("word/document.xml", &document), ("docProps/core.xml", core)]
    {
        zip.start_file(name, opts).unwrap();
        zip.write_all(content.as_bytes()).unwrap();
    }
    zip.finish().unwrap().into_inner()
}

pub const PRICE_LIST: &[&str] = &["Vendor price list, Q4.", "Unit cost 14.20, margin 31%."];

/// Created after it was last modified, and last saved by "Admin".
pub fn tampered_docx() -> Vec<u8> {
    docx(&core_xml("2024-12-26T07:10:00Z", "2024-12-24T09:17:00Z", "Admin"), PRICE_LIST)
}

pub fn clean_docx() -> Vec<u8> {
    docx(&core_xml("2024-12-20T07:10:00Z", "2024-12-24T09:17:00Z", "j.doe"), PRICE_LIST)
}

pub struct MboxOracle {
    pub bytes: Vec<u8>,
    /// (Message-ID, Subject) in store order.
    pub manifest: Vec<(String, String)>,
}

/// `n` messages with varied bodies: quoted-printable, base64, multipart,
/// folded subjects, and body lines that start with "From ".
pub fn mbox(n: usize, seed: u64) -> MboxOracle {
    let mut rng = StdRng::seed_from_u64(seed);
    let words = ["invoice", "ledger", "pricing", "north", "dock", "meeting", "vendor", "wire", "transfer", "lunch"];
    let mut bytes = Vec::new();
    let mut manifest = Vec::new();
    for i in 0..n {
        let id = format!("<{i}.{:08x}@mail.example.org>", rng.gen::<u32>());
        let subject_words: Vec<&str> = (0..rng.gen_range(1..8)).map(|_| words[rng.gen_range(0..words.len())]).collect();
        let subject = format!("{} #{i}", subject_words.join(" "));
        let folded = rng.gen_bool(0.25) && subject_words.len() > 1;
        let subject_header = if folded {
            // Fold at the first space; unfolding restores one space.
            subject.replacen(' ', "\r\n ", 1)
        } else {
            subject.clone()
        };
        let body_line = format!("Please review the {} by Friday.", words[rng.gen_range(0..words.len())]);
        let (headers, body) = match rng.gen_range(0..4) {
            0 => (String::new(), format!("{body_line}\r\n>From the desk of accounts.\r\n")),
            1 => (
                "Content-Type: text/plain; charset=utf-8\r\nContent-Transfer-Encoding: quoted-printable\r\n".to_string(),
                format!("{body_line} Caf=C3=A9 =3D meeting=\r\n point.\r\n"),
            ),
            2 => {
                use base64::Engine;
                (
                    "Content-Type: text/plain; charset=utf-8\r\nContent-Transfer-Encoding: base64\r\n".to_string(),
                    base64::engine::general_purpose::STANDARD.encode(body_line.as_bytes()) + "\r\n",
                )
            }
            _ => (
                "MIME-Version: 1.0\r\nContent-Type: multipart/mixed; boundary=\"b0\"\r\n".to_string(),
                format!(
                    "--b0\r\nContent-Type: text/plain\r\n\r\n{body_line}\r\n--b0\r\nContent-Type: application/pdf\r\n\
                     Content-Disposition: attachment; filename=\"q4.pdf\"\r\nContent-Transfer-Encoding: base64\r\n\r\nJVBERi0=\r\n--b0--\r\n"
                ),
            ),
        };
        write!(
            bytes,
            "From sender{i}@example.org Mon Jan  6 09:{:02}:00 2025\r\nFrom: sender{i}@example.org\r\nTo: desk@example.org\r\n\
             Subject: {subject_header}\r\nMessage-ID: {id}\r\nDate: Mon, 6 Jan 2025 09:{:02}:00 +0000\r\n{headers}\r\n{body}\r\n",
            i % 60,
            i % 60
        )
        .unwrap();
        manifest.push((id, subject));
    }
    MboxOracle { bytes, manifest }
}

pub fn eml(subject: &str, body: &str) -> Vec<u8> {
    format!(
        "From: a@example.org\r\nTo: b@example.org\r\nSubject: {subject}\r\nMessage-ID: <x@example.org>\r\n\
         Date: Tue, 7 Jan 2025 10:00:00 +0000\r\n\r\n{body}\r\n"
    )
    .into_bytes()
}

// ---------------------------------------------------------------- media

pub fn png(width: u32, height: u32) -> Vec<u8> {
    let img = image::RgbImage::from_fn(width, height, |x, y| image::Rgb([(x * 7 % 256) as u8, (y * 3 % 256) as u8, 128]));
    let mut out = Cursor::new(Vec::new());
    image::DynamicImage::ImageRgb8(img).write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

fn mp4_box(kind: &[u8; 4], body: &[u8]) -> Vec<u8> {
    let mut b = ((body.len() + 8) as u32).to_be_bytes().to_vec();
    b.extend_from_slice(kind);
    b.extend_from_slice(body);
    b
}

/// Minimal MP4 container: ftyp, mdat filler, moov/mvhd with the duration.
pub fn mp4(duration_s: u32) -> Vec<u8> {
    let timescale = 1000u32;
    let mut mvhd = vec![0u8; 100];
    mvhd[12..16].copy_from_slice(&timescale.to_be_bytes());
    mvhd[16..20].copy_from_slice(&(duration_s * timescale).to_be_bytes());
    let mut out = mp4_box(b"ftyp", b"isom\x00\x00\x02\x00isomiso2mp41");
    out.extend(mp4_box(b"mdat", &[0u8; 256]));
    out.extend(mp4_box(b"moov", &mp4_box(b"mvhd", &mvhd)));
    out
}

/// One second of 8 kHz mono silence.
pub fn wav() -> Vec<u8> {
    let data = vec![0u8; 16000];
    let mut w = b"RIFF".to_vec();
    w.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
    w.extend_from_slice(b"WAVEfmt ");
    w.extend_from_slice(&16u32.to_le_bytes());
    w.extend_from_slice(&1u16.to_le_bytes());
    w.extend_from_slice(&1u16.to_le_bytes());
    w.extend_from_slice(&8000u32.to_le_bytes());
    w.extend_from_slice(&16000u32.to_le_bytes());
    w.extend_from_slice(&2u16.to_le_bytes());
    w.extend_from_slice(&16u16.to_le_bytes());
    w.extend_from_slice(b"data");
    w.extend_from_slice(&(data.len() as u32).to_le_bytes());
    w.extend_from_slice(&data);
    w
}

/// Populate `case` with `n` files cycling through every supported kind,
/// spread over nested directories. Returns the relative paths.
pub fn mixed_corpus(case: &Case, n: usize, seed: u64) -> Vec<String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut paths = Vec::with_capacity(n);
    for i in 0..n {
        let dir = format!("custodian{}/set{}", i % 4, i % 7);
        let (name, bytes): (String, Vec<u8>) = match i % 11 {
            0 => (format!("capture{i}.pcap"), slashdot_pcap()),
            1 => (format!("store{i}.mbox"), mbox(3, seed ^ i as u64).bytes),
            2 => (format!("msg{i}.eml"), eml(&format!("invoice {i}"), "Wire the balance today.")),
            3 => (format!("memo{i}.docx"), if i % 2 == 0 { tampered_docx() } else { clean_docx() }),
            4 => (format!("page{i}.html"), format!("<html><body><p>Order {i}</p><script>x()</script></body></html>").into_bytes()),
            5 => (format!("notes{i}.txt"), format!("note {i}: {}\n", rng.gen::<u64>()).into_bytes()),
            6 => (format!("photo{i}.png"), png(8 + (i % 5) as u32, 6)),
            7 => (format!("clip{i}.mp4"), mp4(30 + i as u32)),
            8 => (format!("call{i}.wav"), wav()),
            9 => (format!("blob{i}.bin"), (0..64).map(|_| rng.gen::<u8>() | 0x80).chain([0u8]).collect()),
            _ => (format!("dup{i}.txt"), b"identical content shared by several files\n".to_vec()),
        };
        let rel = format!("{dir}/{name}");
        case.put(&rel, &bytes);
        paths.push(rel);
    }
    paths
}
