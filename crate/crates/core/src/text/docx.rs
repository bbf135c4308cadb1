//! Word (OOXML) documents: body text from `word/document.xml`, metadata
//! from `docProps/core.xml`.

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use std::io::{Cursor, Read};
use thiserror::Error;

const DOCUMENT_PART: &str = "word/document.xml";
const CORE_PART: &str = "docProps/core.xml";
const W_NS: &str = "http://schemas.openxmlformats.org/wordprocessingml/2006/main";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocMetadata {
    pub created: Option<DateTime<Utc>>,
    pub modified: Option<DateTime<Utc>>,
    pub last_modified_by: Option<String>,
    pub author: Option<String>,
    pub title: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocContent {
    pub text: String,
    pub metadata: DocMetadata,
    /// Which extractor produced the text.
    pub format_note: String,
}

#[derive(Debug, Error)]
pub enum DocxError {
    #[error("not a zip archive")]
    NotZip,
    #[error("corrupt archive: {0}")]
    CorruptArchive(String),
}

/// W3CDTF timestamp as used in core properties. Values without a zone are
/// taken as UTC; anything unparseable is absent rather than defaulted.
pub fn parse_w3c_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|n| n.and_utc())
}

fn read_part(archive: &mut zip::ZipArchive<Cursor<&[u8]>>, name: &str) -> Option<String> {
    let mut file = archive.by_name(name).ok()?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf).ok()?;
    Some(String::from_utf8_lossy(&buf).into_owned())
}

fn element_text(doc: &roxmltree::Document, local: &str) -> Option<String> {
    doc.descendants()
        .find(|n| n.is_element() && n.tag_name().name() == local)
        .and_then(|n| n.text())
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
}

pub fn parse_core_properties(xml: &str) -> DocMetadata {
    let Ok(doc) = roxmltree::Document::parse(xml) else {
        return DocMetadata::default();
    };
    DocMetadata {
        created: element_text(&doc, "created").as_deref().and_then(parse_w3c_timestamp),
        modified: element_text(&doc, "modified").as_deref().and_then(parse_w3c_timestamp),
        last_modified_by: element_text(&doc, "lastModifiedBy"),
        author: element_text(&doc, "creator"),
        title: element_text(&doc, "title"),
    }
}

/// Concatenate text runs; paragraphs end with a line break.
pub fn document_text(xml: &str) -> String {
    let Ok(doc) = roxmltree::Document::parse(xml) else {
        return String::new();
    };
    let mut out = String::new();
    let Some(body) = doc.descendants().find(|n| n.has_tag_name((W_NS, "body"))) else {
        return out;
    };
    for para in body.descendants().filter(|n| n.has_tag_name((W_NS, "p"))) {
        // Nested paragraphs (text boxes) are visited on their own.
        for node in para.descendants() {
            if node != para && node.has_tag_name((W_NS, "p")) {
                break;
            }
            if node.has_tag_name((W_NS, "t")) {
                out.push_str(node.text().unwrap_or(""));
            } else if node.has_tag_name((W_NS, "tab")) {
                out.push('\t');
            } else if node.has_tag_name((W_NS, "br")) || node.has_tag_name((W_NS, "cr")) {
                out.push('\n');
            }
        }
        out.push('\n');
    }
    while out.ends_with('\n') {
        out.pop();
    }
    out
}

/// Read body text and core properties. Missing parts give empty text or
/// absent metadata; only an unreadable central directory is an error.
pub fn extract_docx(bytes: &[u8]) -> Result<DocContent, DocxError> {
    if !bytes.starts_with(b"PK") {
        return Err(DocxError::NotZip);
    }
    let mut archive =
        zip::ZipArchive::new(Cursor::new(bytes)).map_err(|e| DocxError::CorruptArchive(e.to_string()))?;
    let text = read_part(&mut archive, DOCUMENT_PART).map(|x| document_text(&x)).unwrap_or_default();
    let metadata = read_part(&mut archive, CORE_PART).map(|x| parse_core_properties(&x)).unwrap_or_default();
    Ok(DocContent { text, metadata, format_note: "docx (built-in OOXML reader)".into() })
}
