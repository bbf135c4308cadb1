//! Classic libpcap savefile parsing.
//!
//! Packets are decoded into layers as they are read and rendered one line
//! per packet for model input (see [`render`]). pcapng is not handled here;
//! such files classify as unknown at intake.

pub mod decode;
pub mod dns;
pub mod render;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use decode::{decode_packet, DecodedLayers, TransportKind};
pub use dns::{decode_dns, DnsMessage};
pub use render::{render_packet_line, render_packets};

const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ByteOrder {
    LE,
    BE,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TsResolution {
    Micro,
    Nano,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcapPacket {
    /// 1-based position in the file.
    pub index: usize,
    pub ts_sec: u32,
    pub ts_frac: u32,
    pub captured_len: u32,
    pub original_len: u32,
    pub layers: DecodedLayers,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcapFile {
    pub byte_order: ByteOrder,
    pub ts_resolution: TsResolution,
    pub version: (u16, u16),
    pub snaplen: u32,
    pub link_type: u32,
    pub packets: Vec<PcapPacket>,
    /// Set when the file ends inside a packet record.
    pub truncation_note: Option<String>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PcapError {
    #[error("not a classic pcap file (magic {0:02x?})")]
    BadMagic([u8; 4]),
    #[error("unsupported pcap version {0}.{1}")]
    UnsupportedVersion(u16, u16),
    #[error("pcap global header truncated at {0} bytes")]
    TruncatedGlobalHeader(usize),
}

struct Fields {
    order: ByteOrder,
}

impl Fields {
    fn u16(&self, b: &[u8]) -> u16 {
        let a = [b[0], b[1]];
        match self.order {
            ByteOrder::LE => u16::from_le_bytes(a),
            ByteOrder::BE => u16::from_be_bytes(a),
        }
    }

    fn u32(&self, b: &[u8]) -> u32 {
        let a = [b[0], b[1], b[2], b[3]];
        match self.order {
            ByteOrder::LE => u32::from_le_bytes(a),
            ByteOrder::BE => u32::from_be_bytes(a),
        }
    }
}

/// Parse a complete capture held in memory.
///
/// A record that runs past end of file ends parsing; complete packets
/// before it are kept and `truncation_note` says what was dropped.
pub fn parse_pcap(bytes: &[u8]) -> Result<PcapFile, PcapError> {
    if bytes.len() < 4 {
        let mut m = [0u8; 4];
        m[..bytes.len()].copy_from_slice(bytes);
        return Err(PcapError::BadMagic(m));
    }
    let magic = [bytes[0], bytes[1], bytes[2], bytes[3]];
    let (order, ts_resolution) = match magic {
        [0xd4, 0xc3, 0xb2, 0xa1] => (ByteOrder::LE, TsResolution::Micro),
        [0xa1, 0xb2, 0xc3, 0xd4] => (ByteOrder::BE, TsResolution::Micro),
        [0x4d, 0x3c, 0xb2, 0xa1] => (ByteOrder::LE, TsResolution::Nano),
        [0xa1, 0xb2, 0x3c, 0x4d] => (ByteOrder::BE, TsResolution::Nano),
        _ => return Err(PcapError::BadMagic(magic)),
    };
    if bytes.len() < GLOBAL_HEADER_LEN {
        return Err(PcapError::TruncatedGlobalHeader(bytes.len()));
    }
    let f = Fields { order };
    let version = (f.u16(&bytes[4..6]), f.u16(&bytes[6..8]));
    if version != (2, 4) {
        return Err(PcapError::UnsupportedVersion(version.0, version.1));
    }
    let snaplen = f.u32(&bytes[16..20]);
    let link_type = f.u32(&bytes[20..24]);

    let mut packets = Vec::new();
    let mut truncation_note = None;
    let mut pos = GLOBAL_HEADER_LEN;
    while pos < bytes.len() {
        let index = packets.len() + 1;
        let remaining = bytes.len() - pos;
        if remaining < RECORD_HEADER_LEN {
            truncation_note = Some(format!("record #{index}: header truncated ({remaining} of 16 bytes)"));
            break;
        }
        let h = &bytes[pos..pos + RECORD_HEADER_LEN];
        let ts_sec = f.u32(&h[0..4]);
        let ts_frac = f.u32(&h[4..8]);
        let captured_len = f.u32(&h[8..12]);
        let original_len = f.u32(&h[12..16]);
        let start = pos + RECORD_HEADER_LEN;
        let available = bytes.len() - start;
        if captured_len as usize > available {
            truncation_note = Some(format!(
                "record #{index}: payload truncated ({available} of {captured_len} bytes present)"
            ));
            break;
        }
        let payload = &bytes[start..start + captured_len as usize];
        packets.push(PcapPacket {
            index,
            ts_sec,
            ts_frac,
            captured_len,
            original_len,
            layers: decode_packet(link_type, payload),
        });
        pos = start + captured_len as usize;
    }
    Ok(PcapFile { byte_order: order, ts_resolution, version, snaplen, link_type, packets, truncation_note })
}
