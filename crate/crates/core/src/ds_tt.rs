//! Device-side TSN Translator. Forward path: unwraps gPTP-in-UDP (computing
//! residence time and updating the correction field per message type) or
//! rebuilds tagged data frames from the DSCP. Reverse path: forwards frames
//! from the downstream TSN device toward the UE.

use serde::Serialize;
use thiserror::Error;

use crate::frames::{
    decode_frame, decode_gptp, encode_gptp, unwrap_residence, CoreDatagram, CoreProtocol,
    EthernetFrame, FrameError, GptpMessageType, MacAddr, VlanTag,
};
use crate::qos::QosProfile;
use crate::simkernel::SimTime;

/// Residence measurement for one forwarded gPTP message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ResidenceRecord {
    pub message_type: GptpMessageType,
    pub sequence_id: u16,
    pub ingress: SimTime,
    pub egress: SimTime,
    pub residence_ns: u64,
    /// Correction delta applied to this message, in 2^-16 ns units.
    pub correction_delta: i64,
}

/// Exact aggregate over a residence log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ResidenceStats {
    pub count: u64,
    pub min_ns: u64,
    pub max_ns: u64,
    pub sum_ns: u128,
}

impl ResidenceStats {
    pub fn mean_ns(&self) -> f64 {
        self.sum_ns as f64 / self.count as f64
    }

    pub fn spread_ns(&self) -> u64 {
        self.max_ns - self.min_ns
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DsTtCounters {
    pub gptp_forwarded: u64,
    pub data_forwarded_high: u64,
    pub data_forwarded_be: u64,
    pub reverse_forwarded: u64,
    pub reverse_gptp_as_data: u64,
    pub dropped_malformed: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DsTtError {
    #[error("malformed wrapped gptp payload: {0}")]
    MalformedGptp(FrameError),
}

pub struct DsTt {
    pub endpoint_id: usize,
    profile: QosProfile,
    device_b_mac: MacAddr,
    rebuilt_src_mac: MacAddr,
    downstream_addr: u32,
    upstream_addr: u32,
    default_vid: u16,
    pub counters: DsTtCounters,
    pub residence_log: Vec<ResidenceRecord>,
}

impl DsTt {
    pub fn new(
        endpoint_id: usize,
        profile: QosProfile,
        device_b_mac: MacAddr,
        rebuilt_src_mac: MacAddr,
        downstream_addr: u32,
        upstream_addr: u32,
        default_vid: u16,
    ) -> Self {
        DsTt {
            endpoint_id,
            profile,
            device_b_mac,
            rebuilt_src_mac,
            downstream_addr,
            upstream_addr,
            default_vid,
            counters: DsTtCounters::default(),
            residence_log: Vec::new(),
        }
    }

    /// UE → TSN device. Wrapped gPTP (UDP dst 30001) is unwrapped, its
    /// residence added to the correction field, and the original frame
    /// re-emitted; anything else is rebuilt as a tagged data frame.
    pub fn on_ue_ingress(
        &mut self,
        packet: &CoreDatagram,
        now: SimTime,
    ) -> Result<EthernetFrame, DsTtError> {
        if packet.is_gptp_transport() {
            match self.forward_gptp(packet, now) {
                Ok(frame) => Ok(frame),
                Err(err) => {
                    self.counters.dropped_malformed += 1;
                    log::warn!("ds-tt[{}]: dropping gptp packet: {err}", self.endpoint_id);
                    Err(DsTtError::MalformedGptp(err))
                }
            }
        } else {
            let pcp = self.profile.map_dscp_to_pcp(packet.dscp());
            if pcp > 0 {
                self.counters.data_forwarded_high += 1;
            } else {
                self.counters.data_forwarded_be += 1;
            }
            Ok(EthernetFrame::new(
                self.device_b_mac,
                self.rebuilt_src_mac,
                Some(VlanTag::new(pcp, false, self.default_vid).expect("valid rebuilt tag")),
                crate::DATA_ETHERTYPE,
                packet.payload.clone(),
            )
            .expect("valid rebuilt frame"))
        }
    }

    fn forward_gptp(
        &mut self,
        packet: &CoreDatagram,
        now: SimTime,
    ) -> Result<EthernetFrame, FrameError> {
        let (header, inner_bytes) = unwrap_residence(&packet.payload)?;
        let frame = decode_frame(inner_bytes)?;
        let mut msg = decode_gptp(&frame.payload)?;

        assert!(
            now >= header.ingress_timestamp,
            "negative residence: now={} ingress={}",
            now,
            header.ingress_timestamp
        );
        let residence_ns = now.since(header.ingress_timestamp);
        let before = msg.correction_field;
        // Identical arithmetic for Sync and Follow_Up; the codec paths are
        // already type-specific.
        msg.add_correction_ns(residence_ns)?;

        let out = EthernetFrame::new(
            frame.dst_mac,
            frame.src_mac,
            frame.vlan,
            frame.ethertype(),
            encode_gptp(&msg),
        )
        .expect("rebuilt gptp frame is valid");

        self.residence_log.push(ResidenceRecord {
            message_type: msg.message_type,
            sequence_id: msg.sequence_id,
            ingress: header.ingress_timestamp,
            egress: now,
            residence_ns,
            correction_delta: msg.correction_field - before,
        });
        self.counters.gptp_forwarded += 1;
        Ok(out)
    }

    /// TSN device → UE (reverse path). Reverse gPTP is not generated in the
    /// validated topology; if it shows up it is forwarded as plain data
    /// with a diagnostic.
    pub fn on_tsn_ingress(&mut self, frame: &EthernetFrame) -> CoreDatagram {
        if frame.is_gptp() {
            self.counters.reverse_gptp_as_data += 1;
            log::warn!(
                "ds-tt[{}]: reverse gptp frame forwarded as plain data",
                self.endpoint_id
            );
        }
        let pcp = frame.vlan.map(|tag| tag.pcp()).unwrap_or(0);
        let dscp = self.profile.map_pcp_to_dscp(pcp);
        self.counters.reverse_forwarded += 1;
        CoreDatagram::new(
            self.downstream_addr,
            self.upstream_addr,
            dscp,
            CoreProtocol::Raw,
            frame.payload.clone(),
        )
        .expect("pcp-derived dscp is in range")
    }

    /// Exact min/max/mean/spread over the residence log; `None` while empty.
    pub fn residence_stats(&self) -> Option<ResidenceStats> {
        if self.residence_log.is_empty() {
            return None;
        }
        let mut min = u64::MAX;
        let mut max = 0u64;
        let mut sum = 0u128;
        for rec in &self.residence_log {
            min = min.min(rec.residence_ns);
            max = max.max(rec.residence_ns);
            sum += u128::from(rec.residence_ns);
        }
        Some(ResidenceStats {
            count: self.residence_log.len() as u64,
            min_ns: min,
            max_ns: max,
            sum_ns: sum,
        })
    }

    /// Population variance in ns^2. The report also emits stddev and range
    /// since jitter summaries variously mean any of the three.
    pub fn residence_variance_ns2(&self) -> Option<f64> {
        let stats = self.residence_stats()?;
        let mean = stats.mean_ns();
        let sum_sq: f64 = self
            .residence_log
            .iter()
            .map(|r| {
                let d = r.residence_ns as f64 - mean;
                d * d
            })
            .sum();
        Some(sum_sq / stats.count as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{
        encode_frame, wrap_residence, GptpMessage, GPTP_MULTICAST_MAC, GPTP_UDP_PORT,
    };

    fn test_dstt() -> DsTt {
        DsTt::new(
            0,
            QosProfile::default(),
            MacAddr::local(21),
            MacAddr::local(1),
            0x0A000101,
            0x0A000001,
            100,
        )
    }

    fn wrapped_gptp(
        message_type: GptpMessageType,
        correction: i64,
        ingress: SimTime,
    ) -> (CoreDatagram, Vec<u8>) {
        let msg = GptpMessage {
            message_type,
            sequence_id: 5,
            correction_field: correction,
            origin_timestamp: SimTime::ZERO,
            domain_number: 0,
        };
        let frame = EthernetFrame::new(
            GPTP_MULTICAST_MAC,
            MacAddr::local(1),
            None,
            crate::frames::ETHERTYPE_GPTP,
            encode_gptp(&msg),
        )
        .unwrap();
        let frame_bytes = encode_frame(&frame);
        let wrapped = wrap_residence(&frame_bytes, ingress, 1);
        (
            CoreDatagram::new(
                2,
                0x0A000101,
                0,
                CoreProtocol::Udp {
                    src_port: GPTP_UDP_PORT,
                    dst_port: GPTP_UDP_PORT,
                },
                wrapped,
            )
            .unwrap(),
            frame_bytes,
        )
    }

    #[test]
    fn sync_residence_updates_correction_field() {
        let mut dstt = test_dstt();
        let (packet, _) = wrapped_gptp(GptpMessageType::Sync, 0, SimTime::from_ns(1_000_000));
        let now = SimTime::from_ns(3_499_852);
        let out = dstt.on_ue_ingress(&packet, now).unwrap();
        let msg = decode_gptp(&out.payload).unwrap();
        assert_eq!(msg.correction_field, 2_499_852i64 << 16);
        let rec = dstt.residence_log[0];
        assert_eq!(rec.residence_ns, 2_499_852);
        assert_eq!(rec.correction_delta, 2_499_852i64 << 16);
        assert_eq!(rec.message_type, GptpMessageType::Sync);
    }

    #[test]
    fn follow_up_accumulates_prior_correction() {
        let mut dstt = test_dstt();
        let prior = 7_777i64 << 16;
        let (packet, _) = wrapped_gptp(GptpMessageType::FollowUp, prior, SimTime::from_ms(1));
        let now = SimTime::from_ms(3);
        let out = dstt.on_ue_ingress(&packet, now).unwrap();
        let msg = decode_gptp(&out.payload).unwrap();
        assert_eq!(msg.correction_field, prior + (2_000_000i64 << 16));
        assert_eq!(msg.message_type, GptpMessageType::FollowUp);
    }

    #[test]
    fn reemitted_frame_differs_only_in_correction_field() {
        let mut dstt = test_dstt();
        let ingress = SimTime::from_ms(125);
        let (packet, original_bytes) = wrapped_gptp(GptpMessageType::Sync, 0, ingress);
        let out = dstt
            .on_ue_ingress(&packet, ingress.plus_ns(2_499_852))
            .unwrap();
        let out_bytes = encode_frame(&out);
        assert_eq!(out_bytes.len(), original_bytes.len());
        let diff: Vec<usize> = (0..out_bytes.len())
            .filter(|&i| out_bytes[i] != original_bytes[i])
            .collect();
        // correction field occupies bytes 8..16 of the gptp body, which
        // starts after the 14-byte untagged ethernet header
        assert!(!diff.is_empty());
        assert!(
            diff.iter().all(|&i| (14 + 8..14 + 16).contains(&i)),
            "{diff:?}"
        );
    }

    #[test]
    fn data_packet_rebuilds_tagged_frame() {
        let mut dstt = test_dstt();
        let packet = CoreDatagram::new(2, 0x0A000101, 6, CoreProtocol::Raw, vec![3; 100]).unwrap();
        let frame = dstt.on_ue_ingress(&packet, SimTime::from_ms(2)).unwrap();
        assert_eq!(frame.vlan.unwrap().pcp(), 6);
        assert_eq!(frame.dst_mac, MacAddr::local(21));
        assert_eq!(dstt.counters.data_forwarded_high, 1);
        assert_eq!(dstt.counters.gptp_forwarded, 0);
    }

    #[test]
    fn malformed_residence_header_is_counted_drop() {
        let mut dstt = test_dstt();
        let packet = CoreDatagram::new(
            2,
            3,
            0,
            CoreProtocol::Udp {
                src_port: GPTP_UDP_PORT,
                dst_port: GPTP_UDP_PORT,
            },
            vec![0; 9],
        )
        .unwrap();
        assert!(dstt.on_ue_ingress(&packet, SimTime::ZERO).is_err());
        assert_eq!(dstt.counters.dropped_malformed, 1);
        assert!(dstt.residence_log.is_empty());
    }

    #[test]
    fn reverse_frame_maps_pcp_to_dscp() {
        let mut dstt = test_dstt();
        for (pcp, expected_dscp) in [(0u8, 0u8), (6, 6)] {
            let frame = EthernetFrame::new(
                MacAddr::local(1),
                MacAddr::local(21),
                Some(VlanTag::new(pcp, false, 100).unwrap()),
                crate::DATA_ETHERTYPE,
                vec![0; 100],
            )
            .unwrap();
            let dgram = dstt.on_tsn_ingress(&frame);
            assert_eq!(dgram.dscp(), expected_dscp);
            assert_eq!(dgram.dst_addr, 0x0A000001);
        }
        assert_eq!(dstt.counters.reverse_forwarded, 2);
    }

    #[test]
    fn eight_hundred_reverse_frames_count() {
        let mut dstt = test_dstt();
        let frame = EthernetFrame::new(
            MacAddr::local(1),
            MacAddr::local(21),
            Some(VlanTag::new(0, false, 100).unwrap()),
            crate::DATA_ETHERTYPE,
            vec![0; 100],
        )
        .unwrap();
        for _ in 0..800 {
            dstt.on_tsn_ingress(&frame);
        }
        assert_eq!(dstt.counters.reverse_forwarded, 800);
    }

    #[test]
    fn residence_stats_track_min_max_spread() {
        let mut dstt = test_dstt();
        for (i, r) in [2_499_756u64, 2_499_948, 2_499_852].iter().enumerate() {
            let (packet, _) = wrapped_gptp(
                GptpMessageType::Sync,
                0,
                SimTime::from_ms(125 * (i as u64 + 1)),
            );
            dstt.on_ue_ingress(&packet, SimTime::from_ms(125 * (i as u64 + 1)).plus_ns(*r))
                .unwrap();
        }
        let stats = dstt.residence_stats().unwrap();
        assert_eq!(stats.min_ns, 2_499_756);
        assert_eq!(stats.max_ns, 2_499_948);
        assert_eq!(stats.spread_ns(), 192);
        assert_eq!(stats.count, 3);
        assert_eq!(stats.mean_ns(), 2_499_852.0);
        assert_eq!(
            dstt.counters.gptp_forwarded,
            dstt.residence_log.len() as u64
        );
    }

    #[test]
    fn single_record_collapses_stats() {
        let mut dstt = test_dstt();
        let (packet, _) = wrapped_gptp(GptpMessageType::Sync, 0, SimTime::from_ms(125));
        dstt.on_ue_ingress(&packet, SimTime::from_ms(125).plus_ns(42))
            .unwrap();
        let stats = dstt.residence_stats().unwrap();
        assert_eq!((stats.min_ns, stats.max_ns), (42, 42));
        assert_eq!(stats.mean_ns(), 42.0);
    }

    #[test]
    fn empty_log_has_no_stats() {
        assert!(test_dstt().residence_stats().is_none());
        assert!(test_dstt().residence_variance_ns2().is_none());
    }
}
