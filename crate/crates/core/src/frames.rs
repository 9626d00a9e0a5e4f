//! Wire formats the bridge manipulates: Ethernet II with optional 802.1Q
//! tag, gPTP Sync/Follow_Up bodies, the UDP/IPv4-style core datagram, the
//! GTP-U tunnel header with its QFI extension, and the residence header
//! prepended to wrapped gPTP frames.
//!
//! Every codec is a pure function over immutable inputs with roundtrip
//! identity (`decode(encode(x)) == x`) and never reads past the supplied
//! length. Construction rejects out-of-range fields so encode cannot fail.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simkernel::SimTime;

/// Ethertype identifying a gPTP payload.
pub const ETHERTYPE_GPTP: u16 = 0x88F7;
/// Tag protocol identifier preceding an 802.1Q tag.
pub const TPID_VLAN: u16 = 0x8100;
/// UDP destination port carrying wrapped gPTP frames through the 5GS.
pub const GPTP_UDP_PORT: u16 = 30001;
/// Serialized length of a [`GptpResidenceHeader`].
pub const RESIDENCE_HEADER_LEN: usize = 10;

/// gPTP peer-delay multicast destination.
pub const GPTP_MULTICAST_MAC: MacAddr = MacAddr([0x01, 0x80, 0xC2, 0x00, 0x00, 0x0E]);

const GPTP_SYNC_LEN: usize = 44;
const GPTP_FOLLOW_UP_LEN: usize = 76;
const IPV4_HEADER_LEN: usize = 20;
const UDP_HEADER_LEN: usize = 8;
const GTPU_HEADER_LEN: usize = 16;

const IP_PROTO_UDP: u8 = 17;
const IP_PROTO_RAW: u8 = 253;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("malformed frame: needed data at offset {offset} ({what})")]
    Malformed { offset: usize, what: &'static str },
    #[error("unsupported gPTP message type nibble 0x{nibble:X}")]
    UnsupportedMessage { nibble: u8 },
    #[error("unsupported IP protocol {0}")]
    UnsupportedProtocol(u8),
    #[error("field {field} out of range: {value}")]
    FieldRange { field: &'static str, value: u64 },
    #[error("correction field arithmetic overflow")]
    CorrectionOverflow,
}

type Result<T> = std::result::Result<T, FrameError>;

/// Byte cursor that reports the offset of the first missing byte.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(FrameError::Malformed {
                offset: self.pos,
                what,
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_be_bytes(b.try_into().unwrap()))
    }

    fn rest(&mut self) -> &'a [u8] {
        let slice = &self.bytes[self.pos..];
        self.pos = self.bytes.len();
        slice
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MacAddr(pub [u8; 6]);

impl MacAddr {
    /// Locally administered unicast address derived from a small node id.
    pub fn local(id: u8) -> MacAddr {
        MacAddr([0x02, 0x00, 0x00, 0x00, 0x00, id])
    }
}

impl std::fmt::Display for MacAddr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let b = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[0], b[1], b[2], b[3], b[4], b[5]
        )
    }
}

/// 802.1Q tag: 3-bit PCP, drop-eligible bit, 12-bit VLAN id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VlanTag {
    pcp: u8,
    dei: bool,
    vid: u16,
}

impl VlanTag {
    pub fn new(pcp: u8, dei: bool, vid: u16) -> Result<Self> {
        if pcp > 7 {
            return Err(FrameError::FieldRange {
                field: "pcp",
                value: u64::from(pcp),
            });
        }
        if vid > 0x0FFF {
            return Err(FrameError::FieldRange {
                field: "vid",
                value: u64::from(vid),
            });
        }
        Ok(VlanTag { pcp, dei, vid })
    }

    pub fn pcp(&self) -> u8 {
        self.pcp
    }

    pub fn dei(&self) -> bool {
        self.dei
    }

    pub fn vid(&self) -> u16 {
        self.vid
    }

    fn tci(&self) -> u16 {
        (u16::from(self.pcp) << 13) | (u16::from(self.dei) << 12) | self.vid
    }

    fn from_tci(tci: u16) -> Self {
        VlanTag {
            pcp: (tci >> 13) as u8,
            dei: (tci >> 12) & 1 == 1,
            vid: tci & 0x0FFF,
        }
    }
}

/// Ethernet II frame, optionally 802.1Q tagged. No FCS: simulated links are
/// error-signaled, not bit-corrupted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EthernetFrame {
    pub dst_mac: MacAddr,
    pub src_mac: MacAddr,
    pub vlan: Option<VlanTag>,
    ethertype: u16,
    pub payload: Vec<u8>,
}

impl EthernetFrame {
    pub fn new(
        dst_mac: MacAddr,
        src_mac: MacAddr,
        vlan: Option<VlanTag>,
        ethertype: u16,
        payload: Vec<u8>,
    ) -> Result<Self> {
        // 0x8100 as the inner ethertype would be indistinguishable from a tag.
        if ethertype == TPID_VLAN {
            return Err(FrameError::FieldRange {
                field: "ethertype",
                value: u64::from(ethertype),
            });
        }
        Ok(EthernetFrame {
            dst_mac,
            src_mac,
            vlan,
            ethertype,
            payload,
        })
    }

    pub fn ethertype(&self) -> u16 {
        self.ethertype
    }

    pub fn is_gptp(&self) -> bool {
        self.ethertype == ETHERTYPE_GPTP
    }

    pub fn encoded_len(&self) -> usize {
        14 + if self.vlan.is_some() { 4 } else { 0 } + self.payload.len()
    }
}

pub fn encode_frame(frame: &EthernetFrame) -> Vec<u8> {
    let mut out = Vec::with_capacity(frame.encoded_len());
    out.extend_from_slice(&frame.dst_mac.0);
    out.extend_from_slice(&frame.src_mac.0);
    if let Some(tag) = &frame.vlan {
        out.extend_from_slice(&TPID_VLAN.to_be_bytes());
        out.extend_from_slice(&tag.tci().to_be_bytes());
    }
    out.extend_from_slice(&frame.ethertype.to_be_bytes());
    out.extend_from_slice(&frame.payload);
    out
}

pub fn decode_frame(bytes: &[u8]) -> Result<EthernetFrame> {
    let mut cur = Cursor::new(bytes);
    let dst = MacAddr(cur.take(6, "dst_mac")?.try_into().unwrap());
    let src = MacAddr(cur.take(6, "src_mac")?.try_into().unwrap());
    let mut ethertype = cur.u16("ethertype")?;
    let vlan = if ethertype == TPID_VLAN {
        let tci = cur.u16("vlan tci")?;
        ethertype = cur.u16("inner ethertype")?;
        Some(VlanTag::from_tci(tci))
    } else {
        None
    };
    let payload = cur.rest().to_vec();
    EthernetFrame::new(dst, src, vlan, ethertype, payload)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GptpMessageType {
    Sync,
    FollowUp,
}

impl GptpMessageType {
    /// IEEE 802.1AS message-type nibble.
    pub fn nibble(self) -> u8 {
        match self {
            GptpMessageType::Sync => 0x0,
            GptpMessageType::FollowUp => 0x8,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            GptpMessageType::Sync => "sync",
            GptpMessageType::FollowUp => "follow_up",
        }
    }
}

/// Two-step gPTP message carrying the fields the bridge exercises. Reserved
/// 802.1AS fields are zero-filled on encode to keep standard body lengths
/// (Sync 44 bytes, Follow_Up 76 bytes).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GptpMessage {
    pub message_type: GptpMessageType,
    pub sequence_id: u16,
    /// Signed, in units of 2^-16 ns per IEEE 802.1AS.
    pub correction_field: i64,
    pub origin_timestamp: SimTime,
    pub domain_number: u8,
}

impl GptpMessage {
    /// Add a whole-nanosecond residence time to the correction field.
    /// Nanoseconds convert exactly by a left shift of 16; the addition is
    /// overflow-checked.
    pub fn add_correction_ns(&mut self, residence_ns: u64) -> Result<()> {
        let scaled = i64::try_from(residence_ns)
            .ok()
            .and_then(|ns| ns.checked_shl(16).filter(|s| (s >> 16) == ns))
            .ok_or(FrameError::CorrectionOverflow)?;
        self.correction_field = self
            .correction_field
            .checked_add(scaled)
            .ok_or(FrameError::CorrectionOverflow)?;
        Ok(())
    }

    fn body_len(&self) -> usize {
        match self.message_type {
            GptpMessageType::Sync => GPTP_SYNC_LEN,
            GptpMessageType::FollowUp => GPTP_FOLLOW_UP_LEN,
        }
    }
}

pub fn encode_gptp(msg: &GptpMessage) -> Vec<u8> {
    let len = msg.body_len();
    let mut out = vec![0u8; len];
    // transportSpecific = 1 (802.1AS), messageType nibble low.
    out[0] = 0x10 | msg.message_type.nibble();
    out[1] = 0x02; // PTP version 2
    out[2..4].copy_from_slice(&(len as u16).to_be_bytes());
    out[4] = msg.domain_number;
    // flags: twoStep set on Sync
    if msg.message_type == GptpMessageType::Sync {
        out[6] = 0x02;
    }
    out[8..16].copy_from_slice(&msg.correction_field.to_be_bytes());
    out[30..32].copy_from_slice(&msg.sequence_id.to_be_bytes());
    out[32] = match msg.message_type {
        GptpMessageType::Sync => 0x00,
        GptpMessageType::FollowUp => 0x02,
    };
    out[33] = 0xFD; // logMessageInterval -3 (125 ms)
    let secs = msg.origin_timestamp.ns() / 1_000_000_000;
    let nanos = (msg.origin_timestamp.ns() % 1_000_000_000) as u32;
    out[34..40].copy_from_slice(&secs.to_be_bytes()[2..8]);
    out[40..44].copy_from_slice(&nanos.to_be_bytes());
    // Follow_Up information TLV (bytes 44..76) stays zero-filled.
    out
}

pub fn decode_gptp(bytes: &[u8]) -> Result<GptpMessage> {
    let mut cur = Cursor::new(bytes);
    let first = cur.u8("type/transport")?;
    let message_type = match first & 0x0F {
        0x0 => GptpMessageType::Sync,
        0x8 => GptpMessageType::FollowUp,
        nibble => return Err(FrameError::UnsupportedMessage { nibble }),
    };
    let _version = cur.u8("version")?;
    let msg_len = cur.u16("message length")? as usize;
    if msg_len != bytes.len() {
        return Err(FrameError::Malformed {
            offset: 2,
            what: "message length mismatch",
        });
    }
    let domain_number = cur.u8("domain")?;
    cur.take(3, "reserved/flags")?;
    let correction_field = cur.u64("correction field")? as i64;
    cur.take(14, "reserved/source port identity")?;
    let sequence_id = cur.u16("sequence id")?;
    cur.take(2, "control/log interval")?;
    let ts = cur.take(10, "origin timestamp")?;
    let mut secs = [0u8; 8];
    secs[2..8].copy_from_slice(&ts[0..6]);
    let secs = u64::from_be_bytes(secs);
    let nanos = u32::from_be_bytes(ts[6..10].try_into().unwrap());
    let expected = match message_type {
        GptpMessageType::Sync => GPTP_SYNC_LEN,
        GptpMessageType::FollowUp => GPTP_FOLLOW_UP_LEN,
    };
    if bytes.len() != expected {
        return Err(FrameError::Malformed {
            offset: cur.pos,
            what: "unexpected body length for message type",
        });
    }
    Ok(GptpMessage {
        message_type,
        sequence_id,
        correction_field,
        origin_timestamp: SimTime::from_ns(secs * 1_000_000_000 + u64::from(nanos)),
        domain_number,
    })
}

/// Transport selector for the core datagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoreProtocol {
    Udp { src_port: u16, dst_port: u16 },
    Raw,
}

/// Semantic IPv4/UDP datagram with a defined byte layout. No fragmentation
/// and no checksums: the bridge never fragments at these payload sizes, and
/// length checks are the only structural validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreDatagram {
    pub src_addr: u32,
    pub dst_addr: u32,
    dscp: u8,
    pub protocol: CoreProtocol,
    pub payload: Vec<u8>,
}

impl CoreDatagram {
    pub fn new(
        src_addr: u32,
        dst_addr: u32,
        dscp: u8,
        protocol: CoreProtocol,
        payload: Vec<u8>,
    ) -> Result<Self> {
        if dscp > 63 {
            return Err(FrameError::FieldRange {
                field: "dscp",
                value: u64::from(dscp),
            });
        }
        Ok(CoreDatagram {
            src_addr,
            dst_addr,
            dscp,
            protocol,
            payload,
        })
    }

    pub fn dscp(&self) -> u8 {
        self.dscp
    }

    pub fn udp_dst_port(&self) -> Option<u16> {
        match self.protocol {
            CoreProtocol::Udp { dst_port, .. } => Some(dst_port),
            CoreProtocol::Raw => None,
        }
    }

    pub fn is_gptp_transport(&self) -> bool {
        self.udp_dst_port() == Some(GPTP_UDP_PORT)
    }

    pub fn encoded_len(&self) -> usize {
        let udp = match self.protocol {
            CoreProtocol::Udp { .. } => UDP_HEADER_LEN,
            CoreProtocol::Raw => 0,
        };
        IPV4_HEADER_LEN + udp + self.payload.len()
    }
}

pub fn encode_datagram(dgram: &CoreDatagram) -> Vec<u8> {
    let total = dgram.encoded_len();
    let mut out = Vec::with_capacity(total);
    out.push(0x45);
    out.push(dgram.dscp << 2);
    out.extend_from_slice(&(total as u16).to_be_bytes());
    out.extend_from_slice(&[0, 0, 0, 0]); // identification, flags/fragment
    out.push(64); // ttl
    out.push(match dgram.protocol {
        CoreProtocol::Udp { .. } => IP_PROTO_UDP,
        CoreProtocol::Raw => IP_PROTO_RAW,
    });
    out.extend_from_slice(&[0, 0]); // header checksum unused
    out.extend_from_slice(&dgram.src_addr.to_be_bytes());
    out.extend_from_slice(&dgram.dst_addr.to_be_bytes());
    if let CoreProtocol::Udp { src_port, dst_port } = dgram.protocol {
        out.extend_from_slice(&src_port.to_be_bytes());
        out.extend_from_slice(&dst_port.to_be_bytes());
        out.extend_from_slice(&((UDP_HEADER_LEN + dgram.payload.len()) as u16).to_be_bytes());
        out.extend_from_slice(&[0, 0]); // udp checksum unused
    }
    out.extend_from_slice(&dgram.payload);
    out
}

pub fn decode_datagram(bytes: &[u8]) -> Result<CoreDatagram> {
    let mut cur = Cursor::new(bytes);
    let vihl = cur.u8("version/ihl")?;
    if vihl != 0x45 {
        return Err(FrameError::Malformed {
            offset: 0,
            what: "unsupported version/ihl",
        });
    }
    let tos = cur.u8("dscp")?;
    let total_len = cur.u16("total length")? as usize;
    if total_len != bytes.len() {
        return Err(FrameError::Malformed {
            offset: 2,
            what: "total length mismatch",
        });
    }
    cur.take(5, "id/flags/ttl")?;
    let proto = cur.u8("protocol")?;
    cur.take(2, "checksum")?;
    let src_addr = cur.u32("src addr")?;
    let dst_addr = cur.u32("dst addr")?;
    let protocol = match proto {
        IP_PROTO_UDP => {
            let src_port = cur.u16("udp src port")?;
            let dst_port = cur.u16("udp dst port")?;
            let udp_len = cur.u16("udp length")? as usize;
            cur.take(2, "udp checksum")?;
            if udp_len != UDP_HEADER_LEN + cur.remaining() {
                return Err(FrameError::Malformed {
                    offset: IPV4_HEADER_LEN + 4,
                    what: "udp length mismatch",
                });
            }
            CoreProtocol::Udp { src_port, dst_port }
        }
        IP_PROTO_RAW => CoreProtocol::Raw,
        other => return Err(FrameError::UnsupportedProtocol(other)),
    };
    CoreDatagram::new(src_addr, dst_addr, tos >> 2, protocol, cur.rest().to_vec())
}

/// GTP-U tunnel selector: endpoint id plus the QoS flow identifier carried
/// in a PDU session container extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GtpuHeader {
    pub teid: u32,
    qfi: u8,
}

impl GtpuHeader {
    pub fn new(teid: u32, qfi: u8) -> Result<Self> {
        if qfi > 63 {
            return Err(FrameError::FieldRange {
                field: "qfi",
                value: u64::from(qfi),
            });
        }
        Ok(GtpuHeader { teid, qfi })
    }

    pub fn qfi(&self) -> u8 {
        self.qfi
    }
}

pub fn encode_tunnel(header: &GtpuHeader, inner: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(GTPU_HEADER_LEN + inner.len());
    out.push(0x34); // version 1, PT=1, E=1
    out.push(0xFF); // G-PDU
    out.extend_from_slice(&((8 + inner.len()) as u16).to_be_bytes());
    out.extend_from_slice(&header.teid.to_be_bytes());
    out.extend_from_slice(&[0, 0, 0]); // sequence, n-pdu (unused)
    out.push(0x85); // PDU session container extension
    out.push(0x01); // extension length in 4-byte units
    out.push(0x00); // DL PDU session information
    out.push(header.qfi & 0x3F);
    out.push(0x00); // no further extensions
    out.extend_from_slice(inner);
    out
}

pub fn decode_tunnel(bytes: &[u8]) -> Result<(GtpuHeader, &[u8])> {
    let mut cur = Cursor::new(bytes);
    let flags = cur.u8("gtpu flags")?;
    if flags != 0x34 {
        return Err(FrameError::Malformed {
            offset: 0,
            what: "unsupported gtpu flags",
        });
    }
    let msg_type = cur.u8("gtpu message type")?;
    if msg_type != 0xFF {
        return Err(FrameError::Malformed {
            offset: 1,
            what: "not a g-pdu",
        });
    }
    let length = cur.u16("gtpu length")? as usize;
    let teid = cur.u32("teid")?;
    if length != cur.remaining() {
        return Err(FrameError::Malformed {
            offset: 2,
            what: "gtpu length mismatch",
        });
    }
    cur.take(3, "sequence/n-pdu")?;
    let next_ext = cur.u8("next extension")?;
    if next_ext != 0x85 {
        return Err(FrameError::Malformed {
            offset: 11,
            what: "missing pdu session container",
        });
    }
    let ext_len = cur.u8("extension length")?;
    if ext_len != 0x01 {
        return Err(FrameError::Malformed {
            offset: 12,
            what: "unsupported extension length",
        });
    }
    cur.u8("pdu type")?;
    let qfi = cur.u8("qfi")? & 0x3F;
    let terminator = cur.u8("extension terminator")?;
    if terminator != 0x00 {
        return Err(FrameError::Malformed {
            offset: 15,
            what: "unexpected further extension",
        });
    }
    Ok((GtpuHeader { teid, qfi }, cur.rest()))
}

/// Header prepended to a wrapped gPTP frame at NW-TT ingress: 8-byte
/// big-endian nanosecond ingress timestamp plus a 2-byte origin port id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GptpResidenceHeader {
    pub ingress_timestamp: SimTime,
    pub origin_port_id: u16,
}

/// Prepend the residence header to a complete gPTP Ethernet frame.
/// Callers must pass a frame whose ethertype is 0x88F7.
pub fn wrap_residence(gptp_frame_bytes: &[u8], ingress: SimTime, port: u16) -> Vec<u8> {
    let mut out = Vec::with_capacity(RESIDENCE_HEADER_LEN + gptp_frame_bytes.len());
    out.extend_from_slice(&ingress.ns().to_be_bytes());
    out.extend_from_slice(&port.to_be_bytes());
    out.extend_from_slice(gptp_frame_bytes);
    out
}

pub fn unwrap_residence(bytes: &[u8]) -> Result<(GptpResidenceHeader, &[u8])> {
    let mut cur = Cursor::new(bytes);
    let ts = cur.u64("ingress timestamp")?;
    let port = cur.u16("origin port id")?;
    Ok((
        GptpResidenceHeader {
            ingress_timestamp: SimTime::from_ns(ts),
            origin_port_id: port,
        },
        cur.rest(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_frame() -> EthernetFrame {
        EthernetFrame::new(
            MacAddr::local(2),
            MacAddr::local(1),
            Some(VlanTag::new(6, false, 100).unwrap()),
            0x88B5,
            vec![0xAA; 16],
        )
        .unwrap()
    }

    #[test]
    fn vlan_tag_bit_layout() {
        // Oracle: TCI = pcp<<13 | dei<<12 | vid = 0xC064 for (6, 0, 100).
        let frame = sample_frame();
        let bytes = encode_frame(&frame);
        assert_eq!(&bytes[12..16], &[0x81, 0x00, 0xC0, 0x64]);
    }

    #[test]
    fn untagged_gptp_ethertype_position() {
        let frame = EthernetFrame::new(
            GPTP_MULTICAST_MAC,
            MacAddr::local(1),
            None,
            ETHERTYPE_GPTP,
            vec![0; 4],
        )
        .unwrap();
        let bytes = encode_frame(&frame);
        assert_eq!(&bytes[12..14], &[0x88, 0xF7]);
    }

    #[test]
    fn frame_roundtrip() {
        let frame = sample_frame();
        assert_eq!(decode_frame(&encode_frame(&frame)).unwrap(), frame);
    }

    #[test]
    fn thirteen_byte_input_is_malformed() {
        let err = decode_frame(&[0u8; 13]).unwrap_err();
        assert!(matches!(err, FrameError::Malformed { offset: 12, .. }));
    }

    #[test]
    fn decode_recognizes_tpid_and_tci() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&[0u8; 12]);
        bytes.extend_from_slice(&[0x81, 0x00, 0xC0, 0x64, 0x08, 0x00]);
        let frame = decode_frame(&bytes).unwrap();
        let tag = frame.vlan.unwrap();
        assert_eq!((tag.pcp(), tag.dei(), tag.vid()), (6, false, 100));
        assert_eq!(frame.ethertype(), 0x0800);
    }

    #[test]
    fn gptp_sync_roundtrip_and_length() {
        let msg = GptpMessage {
            message_type: GptpMessageType::Sync,
            sequence_id: 7,
            correction_field: 0,
            origin_timestamp: SimTime::from_ms(125),
            domain_number: 0,
        };
        let bytes = encode_gptp(&msg);
        assert_eq!(bytes.len(), 44);
        assert_eq!(decode_gptp(&bytes).unwrap(), msg);
    }

    #[test]
    fn gptp_follow_up_preserves_exact_correction() {
        let msg = GptpMessage {
            message_type: GptpMessageType::FollowUp,
            sequence_id: 42,
            correction_field: 2_499_852i64 << 16,
            origin_timestamp: SimTime::from_secs(1),
            domain_number: 0,
        };
        let bytes = encode_gptp(&msg);
        assert_eq!(bytes.len(), 76);
        assert_eq!(
            decode_gptp(&bytes).unwrap().correction_field,
            2_499_852i64 << 16
        );
    }

    #[test]
    fn pdelay_req_nibble_rejected() {
        let msg = GptpMessage {
            message_type: GptpMessageType::Sync,
            sequence_id: 0,
            correction_field: 0,
            origin_timestamp: SimTime::ZERO,
            domain_number: 0,
        };
        let mut bytes = encode_gptp(&msg);
        bytes[0] = 0x12; // PdelayReq nibble
        assert_eq!(
            decode_gptp(&bytes).unwrap_err(),
            FrameError::UnsupportedMessage { nibble: 2 }
        );
    }

    #[test]
    fn correction_add_is_exact_and_checked() {
        let mut msg = GptpMessage {
            message_type: GptpMessageType::FollowUp,
            sequence_id: 0,
            correction_field: 5,
            origin_timestamp: SimTime::ZERO,
            domain_number: 0,
        };
        msg.add_correction_ns(2_499_852).unwrap();
        assert_eq!(msg.correction_field, 5 + (2_499_852i64 << 16));

        msg.correction_field = i64::MAX - 1;
        assert_eq!(
            msg.add_correction_ns(1).unwrap_err(),
            FrameError::CorrectionOverflow
        );
        assert_eq!(
            msg.add_correction_ns(u64::MAX).unwrap_err(),
            FrameError::CorrectionOverflow
        );
    }

    #[test]
    fn datagram_roundtrip_preserves_dscp() {
        let dgram = CoreDatagram::new(
            0x0A000002,
            0x0A000101,
            45,
            CoreProtocol::Udp {
                src_port: 30001,
                dst_port: GPTP_UDP_PORT,
            },
            vec![1, 2, 3],
        )
        .unwrap();
        let decoded = decode_datagram(&encode_datagram(&dgram)).unwrap();
        assert_eq!(decoded, dgram);
        assert_eq!(decoded.dscp(), 45);
    }

    #[test]
    fn raw_datagram_roundtrip() {
        let dgram = CoreDatagram::new(1, 2, 6, CoreProtocol::Raw, vec![9; 100]).unwrap();
        assert_eq!(decode_datagram(&encode_datagram(&dgram)).unwrap(), dgram);
        assert_eq!(dgram.encoded_len(), 120);
    }

    #[test]
    fn tunnel_roundtrip_preserves_qfi() {
        let hdr = GtpuHeader::new(2049, 6).unwrap();
        let inner = vec![7u8; 33];
        let bytes = encode_tunnel(&hdr, &inner);
        let (decoded, body) = decode_tunnel(&bytes).unwrap();
        assert_eq!(decoded, hdr);
        assert_eq!(body, &inner[..]);
    }

    #[test]
    fn residence_wrap_roundtrip() {
        let frame = EthernetFrame::new(
            GPTP_MULTICAST_MAC,
            MacAddr::local(1),
            None,
            ETHERTYPE_GPTP,
            encode_gptp(&GptpMessage {
                message_type: GptpMessageType::Sync,
                sequence_id: 1,
                correction_field: 0,
                origin_timestamp: SimTime::ZERO,
                domain_number: 0,
            }),
        )
        .unwrap();
        let frame_bytes = encode_frame(&frame);
        let wrapped = wrap_residence(&frame_bytes, SimTime::from_ns(1_000_000), 1);
        let (hdr, inner) = unwrap_residence(&wrapped).unwrap();
        assert_eq!(hdr.ingress_timestamp, SimTime::from_ns(1_000_000));
        assert_eq!(hdr.origin_port_id, 1);
        assert_eq!(inner, &frame_bytes[..]);
    }

    #[test]
    fn residence_wrap_at_zero_starts_with_eight_zero_bytes() {
        let wrapped = wrap_residence(&[0xFF; 20], SimTime::ZERO, 3);
        assert_eq!(&wrapped[..8], &[0u8; 8]);
    }

    #[test]
    fn unwrap_nine_bytes_is_malformed() {
        let err = unwrap_residence(&[0u8; 9]).unwrap_err();
        assert!(matches!(err, FrameError::Malformed { offset: 8, .. }));
    }

    #[test]
    fn field_ranges_rejected_at_construction() {
        assert!(VlanTag::new(8, false, 0).is_err());
        assert!(VlanTag::new(0, false, 4096).is_err());
        assert!(CoreDatagram::new(0, 0, 64, CoreProtocol::Raw, vec![]).is_err());
        assert!(GtpuHeader::new(0, 64).is_err());
        assert!(
            EthernetFrame::new(MacAddr::local(0), MacAddr::local(1), None, 0x8100, vec![]).is_err()
        );
    }
}
