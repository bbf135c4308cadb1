use serde::{Deserialize, Serialize};
use std::fmt;

/// Number of leading bytes inspected by [`detect_kind`].
pub const SNIFF_LEN: usize = 512;

/// Evidence file kinds; the dispatch key for extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    Pcap,
    Mbox,
    Eml,
    Docx,
    Html,
    PlainText,
    Audio,
    Image,
    Video,
    Unknown,
}

impl EvidenceKind {
    pub const ALL: [EvidenceKind; 10] = [
        EvidenceKind::Pcap,
        EvidenceKind::Mbox,
        EvidenceKind::Eml,
        EvidenceKind::Docx,
        EvidenceKind::Html,
        EvidenceKind::PlainText,
        EvidenceKind::Audio,
        EvidenceKind::Image,
        EvidenceKind::Video,
        EvidenceKind::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EvidenceKind::Pcap => "pcap",
            EvidenceKind::Mbox => "mbox",
            EvidenceKind::Eml => "eml",
            EvidenceKind::Docx => "docx",
            EvidenceKind::Html => "html",
            EvidenceKind::PlainText => "plain_text",
            EvidenceKind::Audio => "audio",
            EvidenceKind::Image => "image",
            EvidenceKind::Video => "video",
            EvidenceKind::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Kinds whose model input is an attachment rather than text.
    pub fn is_visual(self) -> bool {
        matches!(self, EvidenceKind::Image | EvidenceKind::Video)
    }
}

impl fmt::Display for EvidenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

const PCAP_MAGICS: [[u8; 4]; 4] = [
    [0xa1, 0xb2, 0xc3, 0xd4],
    [0xd4, 0xc3, 0xb2, 0xa1],
    [0xa1, 0xb2, 0x3c, 0x4d],
    [0x4d, 0x3c, 0xb2, 0xa1],
];

/// Classify a file from its leading bytes and name.
///
/// Magic numbers win; the extension only disambiguates text-like content.
/// An empty prefix carries no signal and is always `Unknown`.
pub fn detect_kind(prefix: &[u8], filename: &str) -> EvidenceKind {
    let prefix = &prefix[..prefix.len().min(SNIFF_LEN)];
    if prefix.is_empty() {
        return EvidenceKind::Unknown;
    }
    if let Some(kind) = magic_kind(prefix, filename) {
        return kind;
    }
    if !looks_like_text(prefix) {
        return EvidenceKind::Unknown;
    }
    let ext = extension(filename);
    match ext.as_deref() {
        Some("eml") | Some("msg822") => EvidenceKind::Eml,
        Some("mbox") | Some("mbx") => EvidenceKind::Mbox,
        Some("html") | Some("htm") | Some("xhtml") => EvidenceKind::Html,
        _ => EvidenceKind::PlainText,
    }
}

fn magic_kind(p: &[u8], filename: &str) -> Option<EvidenceKind> {
    if p.len() >= 4 && PCAP_MAGICS.iter().any(|m| p[..4] == *m) {
        return Some(EvidenceKind::Pcap);
    }
    if p.starts_with(b"PK\x03\x04") {
        return filename
            .to_ascii_lowercase()
            .ends_with(".docx")
            .then_some(EvidenceKind::Docx);
    }
    if p.starts_with(b"From ") {
        return Some(EvidenceKind::Mbox);
    }
    if p.starts_with(b"RIFF") || p.starts_with(b"ID3") || p.starts_with(b"fLaC") || p.starts_with(b"OggS")
    {
        return Some(EvidenceKind::Audio);
    }
    if p.starts_with(&[0xff, 0xd8, 0xff])
        || p.starts_with(b"\x89PNG\r\n\x1a\n")
        || p.starts_with(b"GIF87a")
        || p.starts_with(b"GIF89a")
    {
        return Some(EvidenceKind::Image);
    }
    if p.len() >= 12 && &p[4..8] == b"ftyp" {
        // M4A shares the ISO container with MP4 video.
        if &p[8..12] == b"M4A " {
            return Some(EvidenceKind::Audio);
        }
        return Some(EvidenceKind::Video);
    }
    if is_html_start(p) {
        return Some(EvidenceKind::Html);
    }
    None
}

fn is_html_start(p: &[u8]) -> bool {
    let p = p.strip_prefix(b"\xef\xbb\xbf").unwrap_or(p);
    let start = p.iter().position(|b| !b.is_ascii_whitespace()).unwrap_or(p.len());
    let rest = &p[start..];
    let starts_ci = |needle: &[u8]| rest.len() >= needle.len() && rest[..needle.len()].eq_ignore_ascii_case(needle);
    starts_ci(b"<!doctype html") || starts_ci(b"<html")
}

/// Valid UTF-8 (allowing a multi-byte sequence cut at the sniff boundary) with no NUL.
fn looks_like_text(p: &[u8]) -> bool {
    if p.contains(&0) {
        return false;
    }
    match std::str::from_utf8(p) {
        Ok(_) => true,
        Err(e) => e.error_len().is_none() && p.len() == SNIFF_LEN,
    }
}

fn extension(filename: &str) -> Option<String> {
    std::path::Path::new(filename)
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pcap_magics_win_over_extension() {
        assert_eq!(detect_kind(&[0xd4, 0xc3, 0xb2, 0xa1, 2, 0], "x.bin"), EvidenceKind::Pcap);
        assert_eq!(detect_kind(&[0xa1, 0xb2, 0xc3, 0xd4], "x.txt"), EvidenceKind::Pcap);
        assert_eq!(detect_kind(&[0xa1, 0xb2, 0x3c, 0x4d], "x"), EvidenceKind::Pcap);
        assert_eq!(detect_kind(&[0x4d, 0x3c, 0xb2, 0xa1], "x"), EvidenceKind::Pcap);
    }

    #[test]
    fn empty_prefix_is_unknown() {
        assert_eq!(detect_kind(b"", "notes.txt"), EvidenceKind::Unknown);
    }

    #[test]
    fn mbox_separator() {
        assert_eq!(
            detect_kind(b"From alice@example.com Mon Jan  1 00:00:00 2001\nSubject: x\n", "dump"),
            EvidenceKind::Mbox
        );
    }

    #[test]
    fn zip_needs_docx_name() {
        assert_eq!(detect_kind(b"PK\x03\x04\x14\x00", "report.DOCX"), EvidenceKind::Docx);
        assert_eq!(detect_kind(b"PK\x03\x04\x14\x00", "archive.zip"), EvidenceKind::Unknown);
    }

    #[test]
    fn media_magics() {
        assert_eq!(detect_kind(b"RIFF\x24\x00\x00\x00WAVE", "a"), EvidenceKind::Audio);
        assert_eq!(detect_kind(b"ID3\x04", "a"), EvidenceKind::Audio);
        assert_eq!(detect_kind(b"fLaC", "a"), EvidenceKind::Audio);
        assert_eq!(detect_kind(b"OggS\x00", "a"), EvidenceKind::Audio);
        assert_eq!(detect_kind(&[0xff, 0xd8, 0xff, 0xe0], "a"), EvidenceKind::Image);
        assert_eq!(detect_kind(b"\x89PNG\r\n\x1a\n\x00", "a"), EvidenceKind::Image);
        assert_eq!(detect_kind(b"GIF89a", "a"), EvidenceKind::Image);
        assert_eq!(detect_kind(b"\x00\x00\x00\x18ftypmp42", "a"), EvidenceKind::Video);
        assert_eq!(detect_kind(b"\x00\x00\x00\x18ftypM4A ", "a"), EvidenceKind::Audio);
    }

    #[test]
    fn html_after_whitespace_any_case() {
        assert_eq!(detect_kind(b"  \n<!DOCTYPE html><html>", "x"), EvidenceKind::Html);
        assert_eq!(detect_kind(b"<HTML><body>", "x"), EvidenceKind::Html);
        assert_eq!(detect_kind(b"<p>fragment</p>", "page.htm"), EvidenceKind::Html);
    }

    #[test]
    fn text_uses_extension_tiebreak() {
        assert_eq!(detect_kind(b"Subject: hi\r\n\r\nbody", "msg.eml"), EvidenceKind::Eml);
        assert_eq!(detect_kind(b"just words", "notes.txt"), EvidenceKind::PlainText);
        assert_eq!(detect_kind(b"just words", "noext"), EvidenceKind::PlainText);
        assert_eq!(detect_kind(b"bin\x00ary", "notes.txt"), EvidenceKind::Unknown);
        assert_eq!(detect_kind(&[0xc3, 0x28], "x.txt"), EvidenceKind::Unknown);
    }

    #[test]
    fn pcapng_is_unknown() {
        assert_eq!(detect_kind(&[0x0a, 0x0d, 0x0d, 0x0a, 0x1c, 0, 0, 0], "cap.pcapng"), EvidenceKind::Unknown);
    }

    proptest! {
        #[test]
        fn deterministic_and_total(bytes in proptest::collection::vec(any::<u8>(), 0..600), name in "[a-z]{0,8}(\\.[a-z]{1,4})?") {
            let a = detect_kind(&bytes, &name);
            let b = detect_kind(&bytes, &name);
            prop_assert_eq!(a, b);
        }
    }
}
