//! Minimal DNS message decoder: header, questions and answers.
//!
//! Names are decompressed with a visited-offset set; a pointer that revisits
//! an offset or points outside the message makes the whole message `None`.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::net::{Ipv4Addr, Ipv6Addr};

const HEADER_LEN: usize = 12;
const MAX_NAME_LEN: usize = 255;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DnsQuestion {
    pub name: String,
    pub qtype: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DnsAnswer {
    pub name: String,
    pub rtype: u16,
    pub rdata_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DnsMessage {
    pub id: u16,
    pub is_response: bool,
    pub questions: Vec<DnsQuestion>,
    pub answers: Vec<DnsAnswer>,
}

pub fn type_name(t: u16) -> String {
    match t {
        1 => "A".into(),
        2 => "NS".into(),
        5 => "CNAME".into(),
        6 => "SOA".into(),
        12 => "PTR".into(),
        15 => "MX".into(),
        16 => "TXT".into(),
        28 => "AAAA".into(),
        33 => "SRV".into(),
        65 => "HTTPS".into(),
        255 => "ANY".into(),
        n => format!("TYPE{n}"),
    }
}

struct Reader<'a> {
    msg: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn u16(&mut self) -> Option<u16> {
        let b = self.msg.get(self.pos..self.pos + 2)?;
        self.pos += 2;
        Some(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Option<u32> {
        let b = self.msg.get(self.pos..self.pos + 4)?;
        self.pos += 4;
        Some(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn bytes(&mut self, n: usize) -> Option<&'a [u8]> {
        let b = self.msg.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(b)
    }

    fn name(&mut self) -> Option<String> {
        let (name, next) = read_name(self.msg, self.pos)?;
        self.pos = next;
        Some(name)
    }
}

/// Decode the name at `start`; returns the name and the offset just past it
/// in the original (uncompressed) position.
pub fn read_name(msg: &[u8], start: usize) -> Option<(String, usize)> {
    let mut labels: Vec<String> = Vec::new();
    let mut visited = HashSet::new();
    let mut pos = start;
    let mut resume: Option<usize> = None;
    let mut total = 0usize;
    loop {
        if !visited.insert(pos) {
            return None;
        }
        let len = *msg.get(pos)? as usize;
        match len & 0xc0 {
            0x00 => {
                if len == 0 {
                    let end = resume.unwrap_or(pos + 1);
                    return Some((labels.join("."), end));
                }
                let label = msg.get(pos + 1..pos + 1 + len)?;
                total += len + 1;
                if total > MAX_NAME_LEN {
                    return None;
                }
                labels.push(String::from_utf8_lossy(label).to_ascii_lowercase());
                pos += 1 + len;
            }
            0xc0 => {
                let lo = *msg.get(pos + 1)? as usize;
                let target = ((len & 0x3f) << 8) | lo;
                if target >= msg.len() {
                    return None;
                }
                if resume.is_none() {
                    resume = Some(pos + 2);
                }
                pos = target;
            }
            // 0x40 / 0x80 label types are reserved or obsolete.
            _ => return None,
        }
    }
}

fn rdata_text(msg: &[u8], rtype: u16, rdata_start: usize, rdata: &[u8]) -> Option<String> {
    Some(match (rtype, rdata.len()) {
        (1, 4) => Ipv4Addr::new(rdata[0], rdata[1], rdata[2], rdata[3]).to_string(),
        (28, 16) => {
            let mut o = [0u8; 16];
            o.copy_from_slice(rdata);
            Ipv6Addr::from(o).to_string()
        }
        (5, _) | (2, _) | (12, _) => {
            let (name, end) = read_name(msg, rdata_start)?;
            if end > rdata_start + rdata.len() {
                return None;
            }
            name
        }
        (t, len) => format!("rtype {t}, {len} bytes"),
    })
}

/// Parse a UDP payload as DNS. `None` means "not DNS".
pub fn decode_dns(payload: &[u8]) -> Option<DnsMessage> {
    if payload.len() < HEADER_LEN {
        return None;
    }
    let mut r = Reader { msg: payload, pos: 0 };
    let id = r.u16()?;
    let flags = r.u16()?;
    let qdcount = r.u16()? as usize;
    let ancount = r.u16()? as usize;
    let _nscount = r.u16()?;
    let _arcount = r.u16()?;
    // Opcodes above 6 are unassigned.
    if (flags >> 11) & 0x0f > 6 {
        return None;
    }
    let mut questions = Vec::with_capacity(qdcount.min(32));
    for _ in 0..qdcount {
        let name = r.name()?;
        let qtype = r.u16()?;
        let _qclass = r.u16()?;
        questions.push(DnsQuestion { name, qtype });
    }
    let mut answers = Vec::with_capacity(ancount.min(64));
    for _ in 0..ancount {
        let name = r.name()?;
        let rtype = r.u16()?;
        let _class = r.u16()?;
        let _ttl = r.u32()?;
        let rdlen = r.u16()? as usize;
        let start = r.pos;
        let rdata = r.bytes(rdlen)?;
        answers.push(DnsAnswer { name, rtype, rdata_text: rdata_text(payload, rtype, start, rdata)? });
    }
    Some(DnsMessage { id, is_response: flags & 0x8000 != 0, questions, answers })
}
