//! Audio, image and video preparation.

pub mod asr;
pub mod frames;
pub mod image;
pub mod video;

use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

pub use self::image::{prepare_image, prepare_image_bytes};
pub use asr::{transcribe_audio, AsrEndpoint, Transcript, TranscriptSegment};
pub use video::{prepare_video, PreparedVideo};

/// Default longest side for images sent to a model.
pub const DEFAULT_IMAGE_MAX_DIM: u32 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaKind {
    Image,
    Video,
}

/// Inline bytes or a reference to a file read at send time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaPayload {
    Base64(String),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSegment {
    pub index: usize,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediaAttachment {
    pub media_kind: MediaKind,
    pub mime: String,
    /// Hash of the bytes that will be sent.
    pub sha256: String,
    pub payload: MediaPayload,
    pub width: Option<u32>,
    pub height: Option<u32>,
    pub duration_s: Option<f64>,
    pub downscaled: bool,
    pub segment: Option<VideoSegment>,
}

impl MediaAttachment {
    /// Short caption for the user message, e.g. `image 1024x512 (downscaled)`.
    pub fn caption(&self) -> String {
        let mut s = match self.media_kind {
            MediaKind::Image => "image".to_string(),
            MediaKind::Video => "video".to_string(),
        };
        if let (Some(w), Some(h)) = (self.width, self.height) {
            s.push_str(&format!(" {w}x{h}"));
        }
        if let Some(seg) = &self.segment {
            s.push_str(&format!(" segment {} [{:.1}s, {:.1}s)", seg.index + 1, seg.start_s, seg.end_s));
        } else if let Some(d) = self.duration_s {
            s.push_str(&format!(" {d:.1}s"));
        }
        if self.downscaled {
            s.push_str(" (downscaled)");
        }
        s
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MediaError {
    #[error("undecodable image: {0}")]
    UndecodableImage(String),
    #[error("unreadable video container")]
    UnreadableContainer,
    #[error("frame sampling failed: {0}")]
    FrameSampling(String),
    #[error("i/o: {0}")]
    Io(String),
}
