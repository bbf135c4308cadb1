//! mbox and RFC 5322/MIME messages.
//!
//! MIME decoding (transfer encodings, charsets, multipart trees) is delegated
//! to `mailparse`; this module decides which part is the body, what counts
//! as an attachment, and how messages are framed for model input.

use mailparse::{DispositionType, ParsedMail};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::html::strip_html;
use crate::gateway::tokens::{hard_split, pack_pieces, Piece, TextChunk, TokenBudget};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttachmentMeta {
    pub filename: String,
    pub content_type: String,
    pub size_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmailMessage {
    pub index: usize,
    /// In original order, values unfolded but otherwise verbatim.
    pub headers: Vec<(String, String)>,
    pub body_text: String,
    pub attachments_meta: Vec<AttachmentMeta>,
}

impl EmailMessage {
    /// First header named `name` (case-insensitive).
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum MboxError {
    #[error("not an mbox store: no leading \"From \" separator")]
    NotMbox,
}

/// Replace each line break plus continuation whitespace with one space.
pub fn unfold(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\r' || c == '\n' {
            if c == '\r' && chars.peek() == Some(&'\n') {
                chars.next();
            }
            let mut folded = false;
            while matches!(chars.peek(), Some(' ') | Some('\t')) {
                chars.next();
                folded = true;
            }
            if folded {
                out.push(' ');
            }
            continue;
        }
        out.push(c);
    }
    out.trim().to_string()
}

fn is_attachment(part: &ParsedMail) -> bool {
    let disp = part.get_content_disposition();
    if disp.disposition == DispositionType::Attachment {
        return true;
    }
    if disp.params.contains_key("filename") || part.ctype.params.contains_key("name") {
        return true;
    }
    !part.ctype.mimetype.starts_with("text/")
}

fn attachment_meta(part: &ParsedMail) -> AttachmentMeta {
    let disp = part.get_content_disposition();
    let filename = disp
        .params
        .get("filename")
        .or_else(|| part.ctype.params.get("name"))
        .cloned()
        .unwrap_or_else(|| "(unnamed)".to_string());
    AttachmentMeta {
        filename,
        content_type: part.ctype.mimetype.clone(),
        size_bytes: part.get_body_raw().map(|b| b.len() as u64).unwrap_or(0),
    }
}

#[derive(Default)]
struct Walk<'a> {
    plain: Option<&'a ParsedMail<'a>>,
    html: Option<&'a ParsedMail<'a>>,
    attachments: Vec<AttachmentMeta>,
}

fn walk<'a>(part: &'a ParsedMail<'a>, w: &mut Walk<'a>) {
    if part.ctype.mimetype.starts_with("multipart/") {
        for sub in &part.subparts {
            walk(sub, w);
        }
        return;
    }
    if is_attachment(part) {
        w.attachments.push(attachment_meta(part));
        return;
    }
    match part.ctype.mimetype.as_str() {
        "text/plain" if w.plain.is_none() => w.plain = Some(part),
        "text/html" if w.html.is_none() => w.html = Some(part),
        _ => {}
    }
}

/// Parse one message. Never fails; malformed input degrades to whatever
/// headers and body can be recovered.
pub fn parse_eml(bytes: &[u8]) -> EmailMessage {
    let mail = match mailparse::parse_mail(bytes) {
        Ok(m) => m,
        Err(_) => return parse_fallback(bytes),
    };
    let headers = mail
        .headers
        .iter()
        .map(|h| (h.get_key(), unfold(&String::from_utf8_lossy(h.get_value_raw()))))
        .collect();
    let mut w = Walk::default();
    walk(&mail, &mut w);
    let body_text = match (w.plain, w.html) {
        (Some(p), _) => p.get_body().unwrap_or_default(),
        (None, Some(h)) => strip_html(&h.get_body().unwrap_or_default()),
        (None, None) => String::new(),
    };
    EmailMessage { index: 0, headers, body_text, attachments_meta: w.attachments }
}

fn parse_fallback(bytes: &[u8]) -> EmailMessage {
    let text = String::from_utf8_lossy(bytes);
    let (head, body) = match text.find("\r\n\r\n").map(|i| (i, 4)).or_else(|| text.find("\n\n").map(|i| (i, 2))) {
        Some((i, n)) => (&text[..i], &text[i + n..]),
        None => (&text[..], ""),
    };
    let mut headers: Vec<(String, String)> = Vec::new();
    for line in head.lines() {
        if line.starts_with([' ', '\t']) {
            if let Some(last) = headers.last_mut() {
                last.1.push(' ');
                last.1.push_str(line.trim());
            }
        } else if let Some((k, v)) = line.split_once(':') {
            headers.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    EmailMessage { index: 0, headers, body_text: body.to_string(), attachments_meta: Vec::new() }
}

fn is_blank(line: &[u8]) -> bool {
    line == b"\n" || line == b"\r\n"
}

/// Split an mbox store on `From ` lines that start the file or follow a
/// blank line. `>From ` quoting (any depth) loses one `>`.
pub fn parse_mbox(bytes: &[u8]) -> Result<Vec<EmailMessage>, MboxError> {
    if !bytes.starts_with(b"From ") {
        return Err(MboxError::NotMbox);
    }
    let mut raw_messages: Vec<Vec<u8>> = Vec::new();
    let mut prev_blank = true;
    for line in bytes.split_inclusive(|&b| b == b'\n') {
        if prev_blank && line.starts_with(b"From ") {
            // The blank line before a separator is framing, not content.
            if let Some(last) = raw_messages.last_mut() {
                strip_trailing_blank(last);
            }
            raw_messages.push(Vec::new());
            prev_blank = false;
            continue;
        }
        prev_blank = is_blank(line);
        let current = raw_messages.last_mut().expect("first line is a separator");
        let gts = line.iter().take_while(|&&b| b == b'>').count();
        if gts > 0 && line[gts..].starts_with(b"From ") {
            current.extend_from_slice(&line[1..]);
        } else {
            current.extend_from_slice(line);
        }
    }
    Ok(raw_messages
        .iter()
        .enumerate()
        .map(|(index, raw)| EmailMessage { index, ..parse_eml(raw) })
        .collect())
}

fn strip_trailing_blank(msg: &mut Vec<u8>) {
    if msg.ends_with(b"\r\n\r\n") {
        msg.truncate(msg.len() - 2);
    } else if msg.ends_with(b"\n\n") {
        msg.truncate(msg.len() - 1);
    }
}

pub fn email_delimiter(index: usize) -> String {
    format!("--- email {index} ---")
}

fn continued_delimiter(index: usize) -> String {
    format!("--- email {index} (continued) ---\n")
}

/// The framed text for one message.
pub fn render_email(m: &EmailMessage) -> String {
    let mut s = email_delimiter(m.index);
    s.push('\n');
    for key in ["From", "To", "Cc", "Date", "Subject"] {
        if let Some(v) = m.header(key) {
            s.push_str(&format!("{key}: {v}\n"));
        }
    }
    if !m.attachments_meta.is_empty() {
        let list: Vec<String> = m
            .attachments_meta
            .iter()
            .map(|a| format!("{} ({}, {} bytes)", a.filename, a.content_type, a.size_bytes))
            .collect();
        s.push_str(&format!("Attachments: {}\n", list.join(", ")));
    }
    s.push('\n');
    s.push_str(&m.body_text);
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

/// Break an oversized rendered message at paragraph boundaries; each
/// continuation starts with a `(continued)` marker.
fn split_message(index: usize, rendered: &str, max_bytes: usize) -> Vec<String> {
    let marker = continued_delimiter(index);
    if max_bytes < marker.len() + 4 {
        return hard_split(rendered, max_bytes).into_iter().map(String::from).collect();
    }
    let room = max_bytes - marker.len();
    let mut parts: Vec<String> = Vec::new();
    let mut current = String::new();
    for para in rendered.split_inclusive("\n\n") {
        for piece in hard_split(para, room) {
            if current.len() + piece.len() > max_bytes {
                parts.push(std::mem::replace(&mut current, marker.clone()));
            }
            current.push_str(piece);
        }
    }
    if !current.is_empty() {
        parts.push(current);
    }
    parts
}

/// Frame messages and pack them into chunks within `budget`, in order.
pub fn batch_emails(messages: &[EmailMessage], budget: TokenBudget) -> Vec<TextChunk> {
    let max = budget.max_bytes();
    let pieces = messages.iter().flat_map(|m| {
        let rendered = render_email(m);
        let parts = if rendered.len() <= max { vec![rendered] } else { split_message(m.index, &rendered, max) };
        parts.into_iter().map(move |text| Piece { unit: m.index, text })
    });
    pack_pieces(pieces, budget, "emails")
}
