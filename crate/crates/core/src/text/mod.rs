//! Text-bearing evidence: email stores, office documents, HTML.

pub mod docx;
pub mod email;
pub mod html;
pub mod rules;

pub use docx::{extract_docx, DocContent, DocMetadata, DocxError};
pub use email::{batch_emails, parse_eml, parse_mbox, EmailMessage, MboxError};
pub use html::strip_html;
pub use rules::{metadata_rule_flags, RuleConfig, RuleFlag, Severity};
