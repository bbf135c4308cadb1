//! One-line-per-packet text rendering for model input.
//!
//! `#<index> <timestamp> <src>-><dst> <proto> <summary>`

use chrono::DateTime;
use std::fmt::Write as _;
use std::net::IpAddr;

use super::decode::{DecodedLayers, TransportKind};
use super::dns::type_name;
use super::{PcapFile, PcapPacket, TsResolution};
use crate::gateway::tokens::{pack_pieces, Piece, TextChunk, TokenBudget};

/// ICMPv4 type/code names for the common diagnostic messages.
pub fn icmp_name(icmp_type: u8, code: u8) -> String {
    let ty = match icmp_type {
        0 => "echo-reply",
        3 => "dest-unreachable",
        5 => "redirect",
        8 => "echo-request",
        11 => "time-exceeded",
        _ => return format!("type {icmp_type} code {code}"),
    };
    let code_name = match (icmp_type, code) {
        (3, 0) => Some("net-unreachable"),
        (3, 1) => Some("host-unreachable"),
        (3, 2) => Some("protocol-unreachable"),
        (3, 3) => Some("port-unreachable"),
        (3, 4) => Some("fragmentation-needed"),
        (3, 5) => Some("source-route-failed"),
        (3, 9) | (3, 10) | (3, 13) => Some("administratively-prohibited"),
        (5, 0) => Some("network"),
        (5, 1) => Some("host"),
        (11, 0) => Some("ttl-exceeded"),
        (11, 1) => Some("reassembly-exceeded"),
        _ => None,
    };
    match code_name {
        Some(c) => format!("{ty} {c} (type {icmp_type} code {code})"),
        None => format!("{ty} (type {icmp_type} code {code})"),
    }
}

fn timestamp(p: &PcapPacket, res: TsResolution) -> String {
    let nanos = match res {
        TsResolution::Micro => p.ts_frac.checked_mul(1000).filter(|n| *n < 1_000_000_000),
        TsResolution::Nano => Some(p.ts_frac).filter(|n| *n < 1_000_000_000),
    };
    let dt = nanos.and_then(|n| DateTime::from_timestamp(p.ts_sec as i64, n));
    match (dt, res) {
        (Some(dt), TsResolution::Micro) => dt.format("%Y-%m-%dT%H:%M:%S%.6fZ").to_string(),
        (Some(dt), TsResolution::Nano) => dt.format("%Y-%m-%dT%H:%M:%S%.9fZ").to_string(),
        (None, _) => format!("ts={}.{}", p.ts_sec, p.ts_frac),
    }
}

fn endpoint(addr: IpAddr, port: Option<u16>) -> String {
    match (addr, port) {
        (IpAddr::V4(a), Some(p)) => format!("{a}:{p}"),
        (IpAddr::V6(a), Some(p)) => format!("[{a}]:{p}"),
        (a, None) => a.to_string(),
    }
}

fn tcp_flags(f: u8) -> String {
    const NAMES: [(u8, &str); 8] =
        [(0x02, "SYN"), (0x10, "ACK"), (0x01, "FIN"), (0x04, "RST"), (0x08, "PSH"), (0x20, "URG"), (0x40, "ECE"), (0x80, "CWR")];
    let set: Vec<&str> = NAMES.iter().filter(|(bit, _)| f & bit != 0).map(|(_, n)| *n).collect();
    if set.is_empty() {
        "none".into()
    } else {
        set.join(",")
    }
}

fn addresses(l: &DecodedLayers) -> String {
    let (sp, dp) = l.transport.as_ref().map_or((None, None), |t| (t.src_port, t.dst_port));
    match (&l.ip, &l.eth) {
        (Some(ip), _) => format!("{}->{}", endpoint(ip.src_addr, sp), endpoint(ip.dst_addr, dp)),
        (None, Some(eth)) => format!("{}->{}", eth.src_mac, eth.dst_mac),
        (None, None) => "?->?".into(),
    }
}

fn proto_and_summary(l: &DecodedLayers) -> (String, String) {
    if let Some(dns) = &l.dns {
        let qs: Vec<String> = dns.questions.iter().map(|q| format!("{} {}", type_name(q.qtype), q.name)).collect();
        let mut s = format!(
            "{} id=0x{:04x} {}",
            if dns.is_response { "response" } else { "query" },
            dns.id,
            if qs.is_empty() { "(no question)".to_string() } else { qs.join(", ") }
        );
        if dns.is_response {
            let answers: Vec<String> = dns
                .answers
                .iter()
                .map(|a| format!("{} {} {}", a.name, type_name(a.rtype), a.rdata_text))
                .collect();
            let _ = write!(s, " answers: {}", if answers.is_empty() { "none".into() } else { answers.join("; ") });
        }
        return ("DNS".into(), s);
    }
    if let Some(t) = &l.transport {
        return match t.kind {
            TransportKind::Icmp => (
                if l.ip.as_ref().is_some_and(|ip| ip.version == 6) { "ICMPv6" } else { "ICMP" }.into(),
                match (t.icmp_type, t.icmp_code, l.ip.as_ref().map(|ip| ip.version)) {
                    (Some(ty), Some(c), Some(4)) => icmp_name(ty, c),
                    (Some(ty), Some(c), _) => format!("type {ty} code {c}"),
                    _ => String::new(),
                },
            ),
            TransportKind::Tcp => ("TCP".into(), format!("flags={} len={}", tcp_flags(t.tcp_flags.unwrap_or(0)), t.payload_len)),
            TransportKind::Udp => ("UDP".into(), format!("len={}", t.payload_len)),
        };
    }
    if let Some(ip) = &l.ip {
        return (format!("IPv{}", ip.version), format!("protocol {}", ip.protocol));
    }
    if let Some(eth) = &l.eth {
        return ("ETH".into(), format!("ethertype 0x{:04x}", eth.ethertype));
    }
    ("RAW".into(), String::new())
}

/// Render one packet as a single line (no trailing newline).
pub fn render_packet_line(p: &PcapPacket, res: TsResolution) -> String {
    let (proto, summary) = proto_and_summary(&p.layers);
    let mut line = format!("#{} {} {} {}", p.index, timestamp(p, res), addresses(&p.layers), proto);
    if !summary.is_empty() {
        line.push(' ');
        line.push_str(&summary);
    }
    if let Some(note) = &p.layers.raw_note {
        let _ = write!(line, " [{note}]");
    }
    if p.captured_len < p.original_len {
        let _ = write!(line, " (captured {} of {} bytes)", p.captured_len, p.original_len);
    }
    line
}

/// Full per-packet rendering, one `\n`-terminated line per packet.
pub fn render_lines(pcap: &PcapFile) -> Vec<String> {
    pcap.packets
        .iter()
        .map(|p| {
            let mut l = render_packet_line(p, pcap.ts_resolution);
            l.push('\n');
            l
        })
        .collect()
}

/// Group packet lines greedily into chunks within `budget`. Packet order is
/// preserved and each chunk's label carries its packet index range.
pub fn render_packets(pcap: &PcapFile, budget: TokenBudget) -> Vec<TextChunk> {
    let pieces = pcap
        .packets
        .iter()
        .zip(render_lines(pcap))
        .map(|(p, text)| Piece { unit: p.index, text });
    pack_pieces(pieces, budget, "packets")
}
