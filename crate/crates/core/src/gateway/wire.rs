//! Request model and its chat-completions JSON encoding.
//!
//! Two encodings exist. The wire body inlines attachment bytes as data URLs.
//! The canonical form replaces each attachment payload by its SHA-256, so
//! the digest is cheap to recompute and identical across processes.

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::media::{MediaAttachment, MediaKind, MediaPayload};
use crate::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentPart {
    Text { text: String },
    Media { attachment: MediaAttachment },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: Vec<ContentPart>,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        Self { role: Role::System, content: vec![ContentPart::Text { text: text.into() }] }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self { role: Role::User, content: vec![ContentPart::Text { text: text.into() }] }
    }

    pub fn has_media(&self) -> bool {
        self.content.iter().any(|p| matches!(p, ContentPart::Media { .. }))
    }

    /// Plain string when the message is a single text part, parts array
    /// otherwise.
    fn encode(&self, inline: &mut dyn FnMut(&MediaAttachment) -> std::io::Result<String>) -> std::io::Result<Value> {
        let role = match self.role {
            Role::System => "system",
            Role::User => "user",
        };
        if let [ContentPart::Text { text }] = self.content.as_slice() {
            return Ok(json!({ "role": role, "content": text }));
        }
        let mut parts = Vec::with_capacity(self.content.len());
        for part in &self.content {
            parts.push(match part {
                ContentPart::Text { text } => json!({ "type": "text", "text": text }),
                ContentPart::Media { attachment } => {
                    let url = inline(attachment)?;
                    match attachment.media_kind {
                        MediaKind::Image => json!({ "type": "image_url", "image_url": { "url": url } }),
                        MediaKind::Video => json!({ "type": "video_url", "video_url": { "url": url } }),
                    }
                }
            });
        }
        Ok(json!({ "role": role, "content": parts }))
    }
}

/// One logical request, addressed to a profile by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub profile: String,
    pub messages: Vec<ChatMessage>,
}

/// Media-fragment suffix restricting a video reference to one segment.
fn segment_fragment(a: &MediaAttachment) -> String {
    a.segment.as_ref().map(|s| format!("#t={:.3},{:.3}", s.start_s, s.end_s)).unwrap_or_default()
}

fn data_url(a: &MediaAttachment) -> std::io::Result<String> {
    let b64 = match &a.payload {
        MediaPayload::Base64(b) => b.clone(),
        MediaPayload::File(p) => base64::engine::general_purpose::STANDARD.encode(std::fs::read(p)?),
    };
    Ok(format!("data:{};base64,{}{}", a.mime, b64, segment_fragment(a)))
}

impl ChatRequest {
    pub fn has_user_message(&self) -> bool {
        self.messages.iter().any(|m| m.role == Role::User)
    }

    pub fn has_media(&self) -> bool {
        self.messages.iter().any(ChatMessage::has_media)
    }

    fn body(
        &self,
        model_id: &str,
        temperature: f64,
        inline: &mut dyn FnMut(&MediaAttachment) -> std::io::Result<String>,
    ) -> std::io::Result<Value> {
        let messages = self.messages.iter().map(|m| m.encode(inline)).collect::<std::io::Result<Vec<_>>>()?;
        Ok(json!({ "model": model_id, "temperature": temperature, "messages": messages }))
    }

    /// Bytes POSTed to the endpoint. File-backed attachments are read here.
    pub fn wire_body(&self, model_id: &str, temperature: f64) -> std::io::Result<Vec<u8>> {
        let v = self.body(model_id, temperature, &mut |a| data_url(a))?;
        Ok(serde_json::to_vec(&v).expect("json values serialize"))
    }

    /// Wire body with every attachment replaced by `sha256:<hex>`. Object
    /// keys are sorted by `serde_json`'s map, so the text is canonical.
    pub fn canonical_json(&self, model_id: &str, temperature: f64) -> String {
        let v = self
            .body(model_id, temperature, &mut |a| Ok(format!("sha256:{}{}", a.sha256, segment_fragment(a))))
            .expect("canonical encoding does no i/o");
        serde_json::to_string(&v).expect("json values serialize")
    }

    pub fn digest(&self, model_id: &str, temperature: f64) -> String {
        sha256_hex(self.canonical_json(model_id, temperature).as_bytes())
    }
}
