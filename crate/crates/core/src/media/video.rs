//! ISO base media (MP4/QuickTime) duration probing and segmentation.

use std::fs::File;
use std::io::{Read, Seek, SeekFrom};
use std::path::Path;

use super::{MediaAttachment, MediaError, MediaKind, MediaPayload, VideoSegment};

/// Default per-request duration cap in seconds.
pub const DEFAULT_MAX_DURATION_S: f64 = 1500.0;
/// Frame sampling interval for endpoints without native video input.
pub const FRAME_INTERVAL_S: f64 = 2.0;
pub const MAX_FRAMES_PER_REQUEST: usize = 64;

const MAX_MOOV_BYTES: u64 = 64 * 1024 * 1024;

fn be32(b: &[u8]) -> u32 {
    u32::from_be_bytes([b[0], b[1], b[2], b[3]])
}

fn be64(b: &[u8]) -> u64 {
    u64::from_be_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]])
}

/// Duration from a `mvhd` box body (after the 8-byte box header).
fn mvhd_duration(body: &[u8]) -> Option<f64> {
    let version = *body.first()?;
    let (timescale, duration) = match version {
        0 => (be32(body.get(12..16)?), be32(body.get(16..20)?) as u64),
        1 => (be32(body.get(20..24)?), be64(body.get(24..32)?)),
        _ => return None,
    };
    (timescale > 0).then(|| duration as f64 / timescale as f64)
}

/// Find `mvhd` inside a `moov` body.
fn find_mvhd(moov: &[u8]) -> Option<f64> {
    let mut pos = 0usize;
    while pos + 8 <= moov.len() {
        let size = be32(&moov[pos..]) as usize;
        let kind = &moov[pos + 4..pos + 8];
        let (header, size) = match size {
            1 => (16, be64(moov.get(pos + 8..pos + 16)?) as usize),
            0 => (8, moov.len() - pos),
            n => (8, n),
        };
        if size < header || pos + size > moov.len() {
            return None;
        }
        if kind == b"mvhd" {
            return mvhd_duration(&moov[pos + header..pos + size]);
        }
        pos += size;
    }
    None
}

/// Read the movie duration by walking top-level boxes; only `moov` is
/// loaded into memory.
pub fn mp4_duration<R: Read + Seek>(reader: &mut R) -> Option<f64> {
    let end = reader.seek(SeekFrom::End(0)).ok()?;
    let mut pos = 0u64;
    let mut saw_ftyp = false;
    while pos + 8 <= end {
        reader.seek(SeekFrom::Start(pos)).ok()?;
        let mut hdr = [0u8; 16];
        reader.read_exact(&mut hdr[..8]).ok()?;
        let kind: [u8; 4] = hdr[4..8].try_into().unwrap();
        let (header, size) = match be32(&hdr) {
            1 => {
                reader.read_exact(&mut hdr[8..16]).ok()?;
                (16u64, be64(&hdr[8..16]))
            }
            0 => (8, end - pos),
            n => (8, n as u64),
        };
        if size < header || pos.checked_add(size)? > end {
            return None;
        }
        if pos == 0 {
            saw_ftyp = &kind == b"ftyp";
        }
        if &kind == b"moov" {
            if !saw_ftyp || size - header > MAX_MOOV_BYTES {
                return None;
            }
            let mut body = vec![0u8; (size - header) as usize];
            reader.read_exact(&mut body).ok()?;
            return find_mvhd(&body);
        }
        pos += size;
    }
    None
}

/// Sequential `[start, end)` windows of at most `cap` seconds covering
/// `[0, duration)` with no gap or overlap.
pub fn segment_bounds(duration: f64, cap: f64) -> Vec<(f64, f64)> {
    if duration <= 0.0 || cap <= 0.0 {
        return Vec::new();
    }
    let n = (duration / cap).ceil() as usize;
    (0..n)
        .map(|i| (i as f64 * cap, ((i + 1) as f64 * cap).min(duration)))
        .collect()
}

/// Sample times for frame-based analysis: one frame every
/// [`FRAME_INTERVAL_S`], spread wider if that would exceed
/// [`MAX_FRAMES_PER_REQUEST`].
pub fn frame_times(start: f64, end: f64) -> Vec<f64> {
    let span = end - start;
    if span <= 0.0 {
        return Vec::new();
    }
    let natural = (span / FRAME_INTERVAL_S).ceil() as usize;
    let count = natural.clamp(1, MAX_FRAMES_PER_REQUEST);
    let step = span / count as f64;
    (0..count).map(|i| start + i as f64 * step).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum PreparedVideo {
    Whole(MediaAttachment),
    Segments(Vec<MediaAttachment>),
}

impl PreparedVideo {
    pub fn into_attachments(self) -> Vec<MediaAttachment> {
        match self {
            PreparedVideo::Whole(a) => vec![a],
            PreparedVideo::Segments(v) => v,
        }
    }
}

/// Probe duration and package the file by reference, split into
/// `max_duration_s` segments when longer than that.
pub fn prepare_video(path: &Path, sha256: &str, max_duration_s: f64) -> Result<PreparedVideo, MediaError> {
    let mut f = File::open(path).map_err(|e| MediaError::Io(e.to_string()))?;
    let duration = mp4_duration(&mut f).ok_or(MediaError::UnreadableContainer)?;
    let base = MediaAttachment {
        media_kind: MediaKind::Video,
        mime: "video/mp4".into(),
        sha256: sha256.to_string(),
        payload: MediaPayload::File(path.to_path_buf()),
        width: None,
        height: None,
        duration_s: Some(duration),
        downscaled: false,
        segment: None,
    };
    if duration <= max_duration_s {
        return Ok(PreparedVideo::Whole(base));
    }
    let segments = segment_bounds(duration, max_duration_s)
        .into_iter()
        .enumerate()
        .map(|(index, (start_s, end_s))| MediaAttachment {
            duration_s: Some(end_s - start_s),
            segment: Some(VideoSegment { index, start_s, end_s }),
            ..base.clone()
        })
        .collect();
    Ok(PreparedVideo::Segments(segments))
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    #[test]
    fn probes_duration() {
        assert_eq!(mp4_duration(&mut Cursor::new(mp4(60, 1000))), Some(60.0));
        assert_eq!(mp4_duration(&mut Cursor::new(mp4_v1(3000, 90_000))), Some(3000.0));
        assert_eq!(mp4_duration(&mut Cursor::new(b"\x00\x00\x00\x08ftyp".to_vec())), None);
        assert_eq!(mp4_duration(&mut Cursor::new(b"garbage".to_vec())), None);
        let mut bad = mp4(60, 1000);
        bad[3] = 0xff; // ftyp size past end of file
        assert_eq!(mp4_duration(&mut Cursor::new(bad)), None);
    }

    #[test]
    fn short_clip_is_whole() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("clip.mp4");
        std::fs::write(&p, mp4(60, 600)).unwrap();
        match prepare_video(&p, &"a".repeat(64), DEFAULT_MAX_DURATION_S).unwrap() {
            PreparedVideo::Whole(a) => assert_eq!(a.duration_s, Some(60.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn long_video_splits() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("long.mp4");
        std::fs::write(&p, mp4(3000, 1000)).unwrap();
        let PreparedVideo::Segments(segs) = prepare_video(&p, &"a".repeat(64), 1500.0).unwrap() else {
            panic!("expected segments")
        };
        let bounds: Vec<(f64, f64)> = segs.iter().map(|s| s.segment.as_ref().map(|g| (g.start_s, g.end_s)).unwrap()).collect();
        assert_eq!(bounds, [(0.0, 1500.0), (1500.0, 3000.0)]);
    }

    #[test]
    fn unreadable_container() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.mp4");
        std::fs::write(&p, b"\x00\x00\x00\x18ftypmp42 but truncated").unwrap();
        assert!(matches!(prepare_video(&p, "x", 1500.0), Err(MediaError::UnreadableContainer)));
    }

    #[test]
    fn default_cap() {
        assert_eq!(DEFAULT_MAX_DURATION_S, 1500.0);
    }

    #[test]
    fn frame_sampling() {
        assert_eq!(frame_times(0.0, 10.0), [0.0, 2.0, 4.0, 6.0, 8.0]);
        let many = frame_times(0.0, 1500.0);
        assert_eq!(many.len(), MAX_FRAMES_PER_REQUEST);
        assert!(many.iter().all(|t| (0.0..1500.0).contains(t)));
        assert!(frame_times(5.0, 5.0).is_empty());
    }

    proptest! {
        #[test]
        fn segments_tile_duration(duration in 0.1f64..100_000.0, cap in 1.0f64..5_000.0) {
            let segs = segment_bounds(duration, cap);
            prop_assert!(!segs.is_empty());
            prop_assert_eq!(segs[0].0, 0.0);
            prop_assert_eq!(segs.last().unwrap().1, duration);
            for w in segs.windows(2) {
                prop_assert_eq!(w[0].1, w[1].0);
            }
            for (s, e) in &segs {
                prop_assert!(e > s && e - s <= cap + 1e-9);
            }
        }
    }
}
