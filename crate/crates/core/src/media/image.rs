use base64::Engine as _;
use image::{imageops::FilterType, ImageFormat};
use std::io::Cursor;

use super::{MediaAttachment, MediaError, MediaKind, MediaPayload};
use crate::sha256_hex;

/// Longest side after downscaling, preserving aspect ratio.
pub fn scaled_dims(width: u32, height: u32, max_dim: u32) -> (u32, u32) {
    if width.max(height) <= max_dim {
        return (width, height);
    }
    let scale = |short: u32, long: u32| (((short as u64 * max_dim as u64) as f64 / long as f64).round() as u32).max(1);
    if width >= height {
        (max_dim, scale(height, width))
    } else {
        (scale(width, height), max_dim)
    }
}

fn mime_for(format: ImageFormat) -> Option<&'static str> {
    match format {
        ImageFormat::Jpeg => Some("image/jpeg"),
        ImageFormat::Png => Some("image/png"),
        ImageFormat::Gif => Some("image/gif"),
        _ => None,
    }
}

/// Downscale if the longest side exceeds `max_dim`, re-encoding in the
/// source format. Images already within the cap pass through byte-for-byte.
pub fn prepare_image_bytes(bytes: &[u8], max_dim: u32) -> Result<MediaAttachment, MediaError> {
    let undecodable = |e: &dyn std::fmt::Display| MediaError::UndecodableImage(e.to_string());
    let format = image::guess_format(bytes).map_err(|e| undecodable(&e))?;
    let mime = mime_for(format).ok_or_else(|| MediaError::UndecodableImage(format!("unsupported format {format:?}")))?;
    let reader = image::ImageReader::with_format(Cursor::new(bytes), format);
    let (w, h) = reader.into_dimensions().map_err(|e| undecodable(&e))?;
    let (nw, nh) = scaled_dims(w, h, max_dim);
    let (data, downscaled) = if (nw, nh) == (w, h) {
        (bytes.to_vec(), false)
    } else {
        // GIF decodes to its first frame.
        let img = image::load_from_memory_with_format(bytes, format).map_err(|e| undecodable(&e))?;
        let resized = img.resize_exact(nw, nh, FilterType::Triangle);
        let mut out = Cursor::new(Vec::new());
        let resized = if format == ImageFormat::Jpeg { image::DynamicImage::ImageRgb8(resized.to_rgb8()) } else { resized };
        resized.write_to(&mut out, format).map_err(|e| undecodable(&e))?;
        (out.into_inner(), true)
    };
    Ok(MediaAttachment {
        media_kind: MediaKind::Image,
        mime: mime.to_string(),
        sha256: sha256_hex(&data),
        payload: MediaPayload::Base64(base64::engine::general_purpose::STANDARD.encode(&data)),
        width: Some(nw),
        height: Some(nh),
        duration_s: None,
        downscaled,
        segment: None,
    })
}

pub fn prepare_image(path: &std::path::Path, max_dim: u32) -> Result<MediaAttachment, MediaError> {
    let bytes = std::fs::read(path).map_err(|e| MediaError::Io(e.to_string()))?;
    prepare_image_bytes(&bytes, max_dim)
}
