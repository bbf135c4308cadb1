use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use super::dns::{decode_dns, DnsMessage};

pub const LINKTYPE_ETHERNET: u32 = 1;
const HEX_PREVIEW: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EthernetLayer {
    pub src_mac: String,
    pub dst_mac: String,
    pub ethertype: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IpLayer {
    pub version: u8,
    pub src_addr: IpAddr,
    pub dst_addr: IpAddr,
    pub protocol: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TransportKind {
    Tcp,
    Udp,
    Icmp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportLayer {
    pub kind: TransportKind,
    pub src_port: Option<u16>,
    pub dst_port: Option<u16>,
    pub icmp_type: Option<u8>,
    pub icmp_code: Option<u8>,
    pub tcp_flags: Option<u8>,
    pub payload_len: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodedLayers {
    pub eth: Option<EthernetLayer>,
    pub ip: Option<IpLayer>,
    pub transport: Option<TransportLayer>,
    pub dns: Option<DnsMessage>,
    pub raw_note: Option<String>,
}

impl DecodedLayers {
    /// Deeper layers only exist when the shallower ones do.
    pub fn is_consistent(&self, link_type: u32) -> bool {
        let ip_ok = self.ip.is_none() || (link_type == LINKTYPE_ETHERNET && self.eth.is_some());
        let tr_ok = self.transport.is_none() || self.ip.is_some();
        let dns_ok = match (&self.dns, &self.transport) {
            (None, _) => true,
            (Some(_), Some(t)) => t.kind == TransportKind::Udp && (t.src_port == Some(53) || t.dst_port == Some(53)),
            (Some(_), None) => false,
        };
        ip_ok && tr_ok && dns_ok
    }
}

pub fn raw_note(bytes: &[u8], context: &str) -> String {
    let mut s = format!("undecoded: {} bytes", bytes.len());
    if !context.is_empty() {
        let _ = write!(s, " ({context})");
    }
    if !bytes.is_empty() {
        s.push_str(", hex preview ");
        for b in bytes.iter().take(HEX_PREVIEW) {
            let _ = write!(s, "{b:02x}");
        }
        if bytes.len() > HEX_PREVIEW {
            s.push('…');
        }
    }
    s
}

fn mac(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect::<Vec<_>>().join(":")
}

fn be16(b: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([b[at], b[at + 1]])
}

/// Layered best-effort decode. Never fails: any layer that does not parse
/// leaves deeper layers absent and records a `raw_note`.
pub fn decode_packet(link_type: u32, payload: &[u8]) -> DecodedLayers {
    let mut out = DecodedLayers::default();
    if link_type != LINKTYPE_ETHERNET {
        out.raw_note = Some(raw_note(payload, &format!("link type {link_type}")));
        return out;
    }
    if payload.len() < 14 {
        out.raw_note = Some(raw_note(payload, "short ethernet frame"));
        return out;
    }
    let mut ethertype = be16(payload, 12);
    let mut offset = 14;
    // One 802.1Q tag.
    if ethertype == 0x8100 && payload.len() >= 18 {
        ethertype = be16(payload, 16);
        offset = 18;
    }
    out.eth = Some(EthernetLayer { dst_mac: mac(&payload[0..6]), src_mac: mac(&payload[6..12]), ethertype });
    let l3 = &payload[offset..];
    let parsed = match ethertype {
        0x0800 => ipv4(l3),
        0x86dd => ipv6(l3),
        other => {
            out.raw_note = Some(raw_note(l3, &format!("ethertype 0x{other:04x}")));
            return out;
        }
    };
    let Some((ip, l4)) = parsed else {
        out.raw_note = Some(raw_note(l3, "malformed ip header"));
        return out;
    };
    let protocol = ip.protocol;
    out.ip = Some(ip);
    let Some(l4) = l4 else {
        out.raw_note = Some(raw_note(&[], "ip fragment"));
        return out;
    };
    match transport(protocol, l4) {
        Some((t, data)) => {
            if t.kind == TransportKind::Udp && (t.src_port == Some(53) || t.dst_port == Some(53)) {
                out.dns = decode_dns(data);
            }
            out.transport = Some(t);
        }
        None => out.raw_note = Some(raw_note(l4, &format!("ip protocol {protocol}"))),
    }
    out
}

/// Returns the IP layer and its payload (None for non-first fragments).
fn ipv4(b: &[u8]) -> Option<(IpLayer, Option<&[u8]>)> {
    if b.len() < 20 || b[0] >> 4 != 4 {
        return None;
    }
    let ihl = (b[0] & 0x0f) as usize * 4;
    let total = be16(b, 2) as usize;
    if ihl < 20 || b.len() < ihl {
        return None;
    }
    let end = if total >= ihl { total.min(b.len()) } else { b.len() };
    let frag_offset = be16(b, 6) & 0x1fff;
    let layer = IpLayer {
        version: 4,
        src_addr: IpAddr::V4(Ipv4Addr::new(b[12], b[13], b[14], b[15])),
        dst_addr: IpAddr::V4(Ipv4Addr::new(b[16], b[17], b[18], b[19])),
        protocol: b[9],
    };
    Some((layer, (frag_offset == 0).then(|| &b[ihl..end])))
}

fn ipv6(b: &[u8]) -> Option<(IpLayer, Option<&[u8]>)> {
    if b.len() < 40 || b[0] >> 4 != 6 {
        return None;
    }
    let plen = be16(b, 4) as usize;
    let mut src = [0u8; 16];
    let mut dst = [0u8; 16];
    src.copy_from_slice(&b[8..24]);
    dst.copy_from_slice(&b[24..40]);
    let layer = IpLayer {
        version: 6,
        src_addr: IpAddr::V6(Ipv6Addr::from(src)),
        dst_addr: IpAddr::V6(Ipv6Addr::from(dst)),
        protocol: b[6],
    };
    let end = (40 + plen).min(b.len());
    Some((layer, Some(&b[40..end])))
}

fn transport(protocol: u8, b: &[u8]) -> Option<(TransportLayer, &[u8])> {
    match protocol {
        6 if b.len() >= 20 => {
            let data_off = (b[12] >> 4) as usize * 4;
            if data_off < 20 || data_off > b.len() {
                return None;
            }
            Some((
                TransportLayer {
                    kind: TransportKind::Tcp,
                    src_port: Some(be16(b, 0)),
                    dst_port: Some(be16(b, 2)),
                    icmp_type: None,
                    icmp_code: None,
                    tcp_flags: Some(b[13]),
                    payload_len: b.len() - data_off,
                },
                &b[data_off..],
            ))
        }
        17 if b.len() >= 8 => {
            let ulen = be16(b, 4) as usize;
            let end = if (8..=b.len()).contains(&ulen) { ulen } else { b.len() };
            Some((
                TransportLayer {
                    kind: TransportKind::Udp,
                    src_port: Some(be16(b, 0)),
                    dst_port: Some(be16(b, 2)),
                    icmp_type: None,
                    icmp_code: None,
                    tcp_flags: None,
                    payload_len: end - 8,
                },
                &b[8..end],
            ))
        }
        1 | 58 if b.len() >= 4 => Some((
            TransportLayer {
                kind: TransportKind::Icmp,
                src_port: None,
                dst_port: None,
                icmp_type: Some(b[0]),
                icmp_code: Some(b[1]),
                tcp_flags: None,
                payload_len: b.len() - 4,
            },
            &b[4..],
        )),
        _ => None,
    }
}
