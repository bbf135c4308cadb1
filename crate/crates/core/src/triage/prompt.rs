//! Per-kind prompt templates.

use crate::gateway::{ChatMessage, ContentPart, Role};
use crate::ingest::EvidenceKind;
use crate::media::MediaAttachment;

use super::context::CaseContext;

/// Bumped whenever template wording changes; stored with every run.
pub const TEMPLATE_VERSION: &str = "scout-prompt/1";

const PREAMBLE: &str = "You are assisting an authorized forensic examination conducted under lawful process. \
The material below was lawfully seized and the examiner is permitted to review it. \
Your task is triage: judge how likely this material is to matter to the investigation so the examiner knows what to read first. \
Report only what the material supports; say so when it shows nothing of interest.";

const OUTPUT_CONTRACT: &str = "End your reply with a fenced code block labeled json containing exactly \
{\"relevance\": <0-10 integer>, \"flags\": [{\"label\": <string>, \"severity\": \"low\"|\"medium\"|\"high\", \"rationale\": <string>}], \"summary\": <string>}.";

/// Marker naming the template, e.g. `[template pcap v1]`.
pub fn template_marker(kind: EvidenceKind) -> String {
    format!("[template {} {TEMPLATE_VERSION}]", kind.as_str())
}

fn kind_guidance(kind: EvidenceKind) -> &'static str {
    match kind {
        EvidenceKind::Pcap => "The evidence is a network capture rendered one packet per line as \
            `#index timestamp source->destination protocol summary`. Look for repeated or unusual DNS lookups, \
            failed connections, ICMP errors, scanning and contact with unexpected hosts.",
        EvidenceKind::Mbox | EvidenceKind::Eml => "The evidence is a batch of email messages, each introduced by a \
            `--- email N ---` line. Look for links between people, requests to hide or destroy information, \
            unusual financial arrangements and anything matching the case keywords.",
        EvidenceKind::Docx | EvidenceKind::Html | EvidenceKind::PlainText | EvidenceKind::Unknown => {
            "The evidence is a document, given as metadata followed by its text. Look for inconsistent metadata, \
            signs of editing or backdating, and content matching the case background or keywords."
        }
        EvidenceKind::Audio => "The evidence is an automatic transcript of an audio recording. Transcription \
            errors are possible. Look for threats, instructions, plans and anything matching the case keywords.",
        EvidenceKind::Image => "The evidence is an image. Describe what it shows that bears on the case: people, \
            objects, documents, screens, locations, weapons, drugs or anything matching the case keywords.",
        EvidenceKind::Video => "The evidence is a video or frames sampled from it. Describe events that bear on \
            the case: people, actions, objects, locations and anything matching the case keywords.",
    }
}

/// Fixed system message for one evidence kind and case.
pub fn system_prompt(kind: EvidenceKind, ctx: &CaseContext) -> String {
    let mut s = String::new();
    s.push_str(&template_marker(kind));
    s.push('\n');
    s.push_str(PREAMBLE);
    s.push_str("\n\nCase: ");
    s.push_str(&ctx.case_id);
    s.push_str("\nBackground: ");
    s.push_str(if ctx.background.is_empty() { "(none given)" } else { &ctx.background });
    s.push_str("\nKeywords: ");
    s.push_str(&if ctx.keywords.is_empty() { "(none given)".to_string() } else { ctx.keywords.join(", ") });
    if let Some(extra) = &ctx.extra_instructions {
        s.push_str("\nExaminer instructions: ");
        s.push_str(extra);
    }
    s.push_str("\n\n");
    s.push_str(kind_guidance(kind));
    s.push_str("\n\n");
    s.push_str(OUTPUT_CONTRACT);
    s
}

/// What the user message carries.
#[derive(Debug, Clone, Copy)]
pub enum PromptInput<'a> {
    Text { label: &'a str, text: &'a str },
    Media { caption: &'a str, attachments: &'a [MediaAttachment] },
}

pub fn build_prompt(kind: EvidenceKind, ctx: &CaseContext, input: PromptInput<'_>) -> Vec<ChatMessage> {
    let system = ChatMessage::system(system_prompt(kind, ctx));
    let user = match input {
        PromptInput::Text { text, .. } => ChatMessage::user(text),
        PromptInput::Media { caption, attachments } => {
            let mut content: Vec<ContentPart> =
                attachments.iter().map(|a| ContentPart::Media { attachment: a.clone() }).collect();
            content.push(ContentPart::Text { text: caption.to_string() });
            ChatMessage { role: Role::User, content }
        }
    };
    vec![system, user]
}
