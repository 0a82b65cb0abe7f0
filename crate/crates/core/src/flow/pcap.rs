//! Classic-pcap parser: little- or big-endian magic, Ethernet link type,
//! IPv4 over Ethernet, TCP or UDP transport. Everything else is skipped and
//! counted, never silently dropped.

use std::net::Ipv4Addr;

use thiserror::Error;

use super::{Endpoint, RawPacket, TransportProtocol};

const PCAP_MAGIC: u32 = 0xa1b2_c3d4;
const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;
const LINKTYPE_ETHERNET: u32 = 1;
const ETHERTYPE_IPV4: u16 = 0x0800;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PcapError {
    #[error("capture too short for pcap global header ({len} bytes, need {GLOBAL_HEADER_LEN})")]
    TooShort { len: usize },
    #[error("bad pcap magic 0x{0:08x} (expected 0xa1b2c3d4 or byte-swapped)")]
    BadMagic(u32),
    #[error("unsupported link type {0} (only Ethernet, link type 1)")]
    UnsupportedLinkType(u32),
    #[error("truncated packet record at index {index}")]
    TruncatedRecord { index: usize },
}

/// Result of parsing a capture: decoded packets in file order plus the count
/// of frames skipped for being non-IPv4, non-TCP/UDP, fragmented, or too
/// short to decode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedCapture {
    pub packets: Vec<RawPacket>,
    pub skipped: usize,
}

#[derive(Clone, Copy)]
enum ByteOrder {
    Little,
    Big,
}

impl ByteOrder {
    fn read_u32(self, bytes: &[u8]) -> u32 {
        let b: [u8; 4] = bytes[..4].try_into().unwrap();
        match self {
            ByteOrder::Little => u32::from_le_bytes(b),
            ByteOrder::Big => u32::from_be_bytes(b),
        }
    }
}

/// Parse a classic pcap byte stream into transport packets.
pub fn parse_capture(data: &[u8]) -> Result<ParsedCapture, PcapError> {
    if data.len() < GLOBAL_HEADER_LEN {
        return Err(PcapError::TooShort { len: data.len() });
    }
    let magic_le = u32::from_le_bytes(data[..4].try_into().unwrap());
    let order = if magic_le == PCAP_MAGIC {
        ByteOrder::Little
    } else if u32::from_be_bytes(data[..4].try_into().unwrap()) == PCAP_MAGIC {
        ByteOrder::Big
    } else {
        return Err(PcapError::BadMagic(magic_le));
    };
    let link_type = order.read_u32(&data[20..24]);
    if link_type != LINKTYPE_ETHERNET {
        return Err(PcapError::UnsupportedLinkType(link_type));
    }

    let mut packets = Vec::new();
    let mut skipped = 0usize;
    let mut pos = GLOBAL_HEADER_LEN;
    let mut index = 0usize;
    while pos < data.len() {
        if data.len() - pos < RECORD_HEADER_LEN {
            return Err(PcapError::TruncatedRecord { index });
        }
        let ts_sec = order.read_u32(&data[pos..]);
        let ts_usec = order.read_u32(&data[pos + 4..]);
        let incl_len = order.read_u32(&data[pos + 8..]) as usize;
        pos += RECORD_HEADER_LEN;
        if data.len() - pos < incl_len {
            return Err(PcapError::TruncatedRecord { index });
        }
        let frame = &data[pos..pos + incl_len];
        pos += incl_len;
        index += 1;

        match decode_frame(frame, (ts_sec, ts_usec)) {
            Some(packet) => packets.push(packet),
            None => skipped += 1,
        }
    }

    Ok(ParsedCapture { packets, skipped })
}

/// Decode Ethernet → IPv4 → TCP/UDP. Returns `None` for any frame outside
/// the supported shape (counted as skipped by the caller).
fn decode_frame(frame: &[u8], timestamp: (u32, u32)) -> Option<RawPacket> {
    if frame.len() < 14 {
        return None;
    }
    let ethertype = u16::from_be_bytes([frame[12], frame[13]]);
    if ethertype != ETHERTYPE_IPV4 {
        return None; // ARP, IPv6, VLAN-tagged, ... all skipped
    }
    let ip = &frame[14..];
    if ip.len() < 20 || ip[0] >> 4 != 4 {
        return None;
    }
    let header_len = usize::from(ip[0] & 0x0f) * 4;
    if header_len < 20 || ip.len() < header_len {
        return None;
    }
    let total_len = usize::from(u16::from_be_bytes([ip[2], ip[3]]));
    if total_len < header_len {
        return None;
    }
    let flags_fragment = u16::from_be_bytes([ip[6], ip[7]]);
    if flags_fragment & 0x2000 != 0 || flags_fragment & 0x1fff != 0 {
        return None; // IP fragments unsupported
    }
    let protocol = match ip[9] {
        6 => TransportProtocol::Tcp,
        17 => TransportProtocol::Udp,
        _ => return None,
    };
    let src_ip = Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]);
    let dst_ip = Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]);

    // The IPv4 total length governs where the datagram ends; Ethernet frames
    // are often padded past it. A snaplen-truncated frame clamps instead.
    let datagram = &ip[header_len..total_len.min(ip.len())];
    let (src_port, dst_port, payload) = match protocol {
        TransportProtocol::Tcp => {
            if datagram.len() < 20 {
                return None;
            }
            let data_offset = usize::from(datagram[12] >> 4) * 4;
            if data_offset < 20 || datagram.len() < data_offset {
                return None;
            }
            (
                u16::from_be_bytes([datagram[0], datagram[1]]),
                u16::from_be_bytes([datagram[2], datagram[3]]),
                datagram[data_offset..].to_vec(),
            )
        }
        TransportProtocol::Udp => {
            if datagram.len() < 8 {
                return None;
            }
            (
                u16::from_be_bytes([datagram[0], datagram[1]]),
                u16::from_be_bytes([datagram[2], datagram[3]]),
                datagram[8..].to_vec(),
            )
        }
    };

    Some(RawPacket {
        timestamp,
        src: Endpoint {
            ip: src_ip,
            port: src_port,
        },
        dst: Endpoint {
            ip: dst_ip,
            port: dst_port,
        },
        protocol,
        payload,
    })
}
