//! Flow ingestion: parse packet captures, assemble bidirectional flows by
//! five-tuple, and produce the fixed-length 784-byte feature vectors.

mod dataset;
mod pcap;

pub use dataset::{
    read_dataset, read_dataset_file, write_dataset, write_dataset_csv, write_dataset_file,
    DatasetError, LabeledSample,
};
pub use pcap::{parse_capture, ParsedCapture, PcapError};

use std::collections::HashMap;
use std::net::Ipv4Addr;

use crate::types::{ByteVector, Label};

/// Transport protocol of a flow. Only TCP and UDP produce flows; everything
/// else is skipped at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransportProtocol {
    Tcp,
    Udp,
}

impl std::fmt::Display for TransportProtocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransportProtocol::Tcp => write!(f, "tcp"),
            TransportProtocol::Udp => write!(f, "udp"),
        }
    }
}

/// One side of a flow: IPv4 address plus transport port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Endpoint {
    pub ip: Ipv4Addr,
    pub port: u16,
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.ip, self.port)
    }
}

/// Canonical bidirectional flow key: the endpoint pair is sorted so a packet
/// and its reply map to the same key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlowKey {
    endpoint_a: Endpoint,
    endpoint_b: Endpoint,
    protocol: TransportProtocol,
}

impl FlowKey {
    /// Build the canonical key from the two endpoints in either order.
    pub fn new(x: Endpoint, y: Endpoint, protocol: TransportProtocol) -> Self {
        let (endpoint_a, endpoint_b) = if x <= y { (x, y) } else { (y, x) };
        FlowKey {
            endpoint_a,
            endpoint_b,
            protocol,
        }
    }

    /// The lexicographically smaller endpoint.
    pub fn endpoint_a(&self) -> Endpoint {
        self.endpoint_a
    }

    /// The lexicographically larger endpoint.
    pub fn endpoint_b(&self) -> Endpoint {
        self.endpoint_b
    }

    pub fn protocol(&self) -> TransportProtocol {
        self.protocol
    }
}

impl std::fmt::Display for FlowKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}<->{}/{}",
            self.endpoint_a, self.endpoint_b, self.protocol
        )
    }
}

/// A single captured packet after link/network/transport decapsulation.
/// `payload` holds transport payload only; header bytes are stripped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPacket {
    /// Capture timestamp as (seconds, microseconds).
    pub timestamp: (u32, u32),
    pub src: Endpoint,
    pub dst: Endpoint,
    pub protocol: TransportProtocol,
    pub payload: Vec<u8>,
}

impl RawPacket {
    pub fn flow_key(&self) -> FlowKey {
        FlowKey::new(self.src, self.dst, self.protocol)
    }
}

/// An assembled bidirectional flow: canonical key plus the payload bytes of
/// every packet of that key concatenated in capture order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowRecord {
    pub key: FlowKey,
    pub bytes: Vec<u8>,
    pub label: Option<Label>,
}

/// Group packets by canonical five-tuple. One [`FlowRecord`] per key, bytes
/// concatenated in capture order, flows emitted in order of first appearance.
pub fn assemble_flows(packets: &[RawPacket]) -> Vec<FlowRecord> {
    let mut index: HashMap<FlowKey, usize> = HashMap::new();
    let mut flows: Vec<FlowRecord> = Vec::new();
    for packet in packets {
        let key = packet.flow_key();
        let slot = *index.entry(key).or_insert_with(|| {
            flows.push(FlowRecord {
                key,
                bytes: Vec::new(),
                label: None,
            });
            flows.len() - 1
        });
        flows[slot].bytes.extend_from_slice(&packet.payload);
    }
    flows
}

/// Turn a flow into the model input: first `min(len, 784)` bytes divided by
/// 255, zero-padded to length 784.
pub fn featurize(flow: &FlowRecord) -> ByteVector {
    ByteVector::from_bytes(&flow.bytes)
}
