//! Modeled 5G user plane: UPF traffic-flow filter and GTP-U tunneling, gNB
//! SDAP bearer selection, a per-DRB queued MAC scheduler over slotted
//! resource blocks, and the channel model (ideal or fading with HARQ).
//!
//! The radio is a calibrated slotted abstraction, not a protocol stack:
//! jobs queue per (UE, DRB), each slot distributes `num_rbs` resource
//! blocks across backlogged queues according to the configured discipline,
//! and a job completes at `slot_end + pipeline_delay` once its cumulative
//! served bytes cover the payload.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{CoreDatagram, GtpuHeader};
use crate::qos::{DrbConfig, QosProfile};
use crate::simkernel::{RngStream, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    MaxCi,
    Pf,
    Rr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RanConfig {
    pub num_rbs: u32,
    pub slot_duration_ns: u64,
    pub bytes_per_rb_per_slot: u32,
    pub scheduler: SchedulerKind,
    /// Fixed processing + propagation component added to every completed
    /// transport, calibrated so the ideal-channel 5GS residence lands just
    /// under 2.5 ms.
    pub pipeline_delay_ns: u64,
    /// Downlink packets reaching RAN ingress before this are discarded.
    pub attach_time_ns: u64,
}

impl RanConfig {
    pub fn slot_containing(&self, t: SimTime) -> u64 {
        t.ns() / self.slot_duration_ns
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelMode {
    Ideal,
    Fading,
}

/// Channel abstraction: ideal mode is fully deterministic; fading applies a
/// per-(UE, slot) multiplicative MCS-efficiency draw to the RB capacity and
/// an independent Bernoulli HARQ block failure with a fixed retransmission
/// round trip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelModel {
    pub mode: ChannelMode,
    /// Log-normal sigma of the per-slot efficiency draw (median 1.0).
    pub mcs_sigma: f64,
    pub harq_bler: f64,
    pub harq_rtt_slots: u32,
    pub max_retx: u32,
}

impl ChannelModel {
    pub fn ideal() -> Self {
        ChannelModel {
            mode: ChannelMode::Ideal,
            mcs_sigma: 0.0,
            harq_bler: 0.0,
            harq_rtt_slots: 4,
            max_retx: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransmissionOutcome {
    Success,
    RetransmitAfter(u32),
}

impl ChannelModel {
    /// Per-grant HARQ decision. After `max_retx` failures the block goes
    /// through regardless, so HARQ delays but never discards.
    pub fn apply(&self, rng: &mut RngStream, attempts: u32) -> TransmissionOutcome {
        match self.mode {
            ChannelMode::Ideal => TransmissionOutcome::Success,
            ChannelMode::Fading => {
                if attempts < self.max_retx && rng.draw_bernoulli(self.harq_bler) {
                    TransmissionOutcome::RetransmitAfter(self.harq_rtt_slots)
                } else {
                    TransmissionOutcome::Success
                }
            }
        }
    }

    /// Per-(UE, slot) capacity multiplier.
    pub fn efficiency(&self, rng: &mut RngStream) -> f64 {
        match self.mode {
            ChannelMode::Ideal => 1.0,
            ChannelMode::Fading => rng.draw_efficiency(self.mcs_sigma),
        }
    }
}

/// One unit of transport work: a datagram queued at a (UE, DRB).
#[derive(Debug, Clone)]
pub struct TransportJob {
    pub datagram: CoreDatagram,
    pub payload_bytes: u64,
    pub enqueue_time: SimTime,
    pub lineage: Option<u64>,
    served_bytes: u64,
    queue_seq: u64,
}

#[derive(Debug, Default)]
struct DrbQueue {
    jobs: VecDeque<TransportJob>,
    blocked_until: SimTime,
    harq_attempts: u32,
    next_seq: u64,
    next_deliver_seq: u64,
    pf_avg_rate: f64,
}

impl DrbQueue {
    fn backlog_bytes(&self) -> u64 {
        self.jobs
            .iter()
            .map(|j| j.payload_bytes - j.served_bytes)
            .sum()
    }
}

/// RB allocation issued to one queue in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grant {
    pub slot_start: SimTime,
    pub ue: u16,
    pub drb: u8,
    pub rbs: u32,
    pub bytes_served: u64,
    pub jobs_completed: u32,
    pub harq_failed: bool,
}

/// A finished transport, to be handed to the UE (downlink) or the gNB core
/// side (uplink) at `completion_time`.
#[derive(Debug, Clone)]
pub struct Completion {
    pub ue: u16,
    pub drb: u8,
    pub completion_time: SimTime,
    pub job: TransportJob,
}

/// PF exponential smoothing factor per slot.
const PF_SMOOTHING: f64 = 0.01;

/// Slotted MAC scheduler over one RB pool. The uplink direction instantiates
/// a second, identical pool.
pub struct Mac {
    ran: RanConfig,
    channel: ChannelModel,
    queues: BTreeMap<(u16, u8), DrbQueue>,
    ue_ids: Vec<u16>,
    fading_rng: BTreeMap<u16, RngStream>,
    harq_rng: BTreeMap<u16, RngStream>,
    rr_next: usize,
    pub fifo_violations: u64,
    pub work_conservation_violations: u64,
    pub grant_trace: Option<Vec<Grant>>,
}

impl Mac {
    pub fn new(
        ran: RanConfig,
        channel: ChannelModel,
        ue_ids: &[u16],
        seed: u64,
        direction_label: &str,
        record_grants: bool,
    ) -> Self {
        assert!(ran.num_rbs > 0 && ran.slot_duration_ns > 0 && ran.bytes_per_rb_per_slot > 0);
        let fading_rng = ue_ids
            .iter()
            .map(|&ue| {
                (
                    ue,
                    RngStream::new(seed, &format!("fading/{direction_label}/ue{ue}")),
                )
            })
            .collect();
        let harq_rng = ue_ids
            .iter()
            .map(|&ue| {
                (
                    ue,
                    RngStream::new(seed, &format!("harq/{direction_label}/ue{ue}")),
                )
            })
            .collect();
        Mac {
            ran,
            channel,
            queues: BTreeMap::new(),
            ue_ids: ue_ids.to_vec(),
            fading_rng,
            harq_rng,
            rr_next: 0,
            fifo_violations: 0,
            work_conservation_violations: 0,
            grant_trace: record_grants.then(Vec::new),
        }
    }

    /// Append a job to the (ue, drb) queue; FIFO order is never reordered.
    pub fn enqueue(&mut self, ue: u16, drb: u8, mut job: TransportJob) {
        let queue = self.queues.entry((ue, drb)).or_default();
        job.queue_seq = queue.next_seq;
        queue.next_seq += 1;
        job.served_bytes = 0;
        queue.jobs.push_back(job);
    }

    pub fn total_backlog_jobs(&self) -> usize {
        self.queues.values().map(|q| q.jobs.len()).sum()
    }

    fn effective_bytes_per_rb(&mut self, ue: u16) -> u64 {
        let rng = self
            .fading_rng
            .get_mut(&ue)
            .expect("rng stream for registered ue");
        let eff = self.channel.efficiency(rng);
        ((f64::from(self.ran.bytes_per_rb_per_slot) * eff).floor() as u64).max(1)
    }

    /// Allocate this slot's RBs and return the transports completing at
    /// `slot_end + pipeline_delay`. Must be invoked exactly once per slot
    /// boundary per direction.
    pub fn schedule_slot(&mut self, slot_start: SimTime) -> Vec<Completion> {
        let slot_end = slot_start.plus_ns(self.ran.slot_duration_ns);
        let completion_time = slot_end.plus_ns(self.ran.pipeline_delay_ns);

        // Per-(UE, slot) channel quality, drawn for every attached UE so the
        // efficiency sequence does not depend on traffic.
        let mut eff: BTreeMap<u16, u64> = BTreeMap::new();
        for ue in self.ue_ids.clone() {
            eff.insert(ue, self.effective_bytes_per_rb(ue));
        }

        let candidates: Vec<(u16, u8)> = self
            .queues
            .iter()
            .filter(|(_, q)| !q.jobs.is_empty() && q.blocked_until <= slot_start)
            .map(|(&key, _)| key)
            .collect();

        let ordered = self.discipline_order(&candidates, &eff);

        let mut rbs_left = self.ran.num_rbs;
        let mut completions = Vec::new();
        let mut first_served: Option<(u16, u8)> = None;

        for &(ue, drb) in &ordered {
            if rbs_left == 0 {
                break;
            }
            let bytes_per_rb = eff[&ue];
            let queue = self.queues.get_mut(&(ue, drb)).unwrap();
            let backlog = queue.backlog_bytes();
            let rbs_needed = backlog.div_ceil(bytes_per_rb) as u32;
            let rbs_granted = rbs_needed.min(rbs_left);
            if rbs_granted == 0 {
                continue;
            }
            rbs_left -= rbs_granted;
            first_served.get_or_insert((ue, drb));

            let attempts = queue.harq_attempts;
            let outcome = {
                let harq = self.harq_rng.get_mut(&ue).unwrap();
                self.channel.apply(harq, attempts)
            };
            let queue = self.queues.get_mut(&(ue, drb)).unwrap();
            let mut grant = Grant {
                slot_start,
                ue,
                drb,
                rbs: rbs_granted,
                bytes_served: 0,
                jobs_completed: 0,
                harq_failed: false,
            };
            match outcome {
                TransmissionOutcome::RetransmitAfter(rtt_slots) => {
                    // Transport block lost: no progress, block re-enqueued at
                    // queue head, retransmission after the HARQ round trip.
                    queue.harq_attempts += 1;
                    queue.blocked_until =
                        slot_start.plus_ns(u64::from(rtt_slots) * self.ran.slot_duration_ns);
                    grant.harq_failed = true;
                }
                TransmissionOutcome::Success => {
                    queue.harq_attempts = 0;
                    let mut capacity = u64::from(rbs_granted) * bytes_per_rb;
                    while capacity > 0 {
                        let Some(job) = queue.jobs.front_mut() else {
                            break;
                        };
                        let need = job.payload_bytes - job.served_bytes;
                        let served = need.min(capacity);
                        job.served_bytes += served;
                        capacity -= served;
                        grant.bytes_served += served;
                        if job.served_bytes == job.payload_bytes {
                            let job = queue.jobs.pop_front().unwrap();
                            if job.queue_seq != queue.next_deliver_seq {
                                self.fifo_violations += 1;
                            }
                            queue.next_deliver_seq = job.queue_seq + 1;
                            grant.jobs_completed += 1;
                            completions.push(Completion {
                                ue,
                                drb,
                                completion_time,
                                job,
                            });
                        }
                    }
                }
            }
            if let Some(trace) = &mut self.grant_trace {
                trace.push(grant);
            }
        }

        if let Some(first) = first_served {
            if self.ran.scheduler == SchedulerKind::Rr {
                let all: Vec<(u16, u8)> = self.queues.keys().copied().collect();
                if let Some(idx) = all.iter().position(|&k| k == first) {
                    self.rr_next = (idx + 1) % all.len();
                }
            }
        }

        // Work conservation: leftover RBs are only legal when no unblocked
        // queue still has backlog.
        if rbs_left > 0 {
            let starved = self
                .queues
                .values()
                .any(|q| !q.jobs.is_empty() && q.blocked_until <= slot_start);
            if starved {
                self.work_conservation_violations += 1;
            }
        }

        // PF served-rate smoothing, updated for every queue every slot.
        let num_rbs = self.ran.num_rbs;
        for (&(ue, _), queue) in self.queues.iter_mut() {
            let served: u64 = completions
                .iter()
                .filter(|c| c.ue == ue)
                .map(|c| c.job.payload_bytes)
                .sum();
            let normalized = served as f64 / (f64::from(num_rbs) * eff[&ue] as f64);
            queue.pf_avg_rate =
                (1.0 - PF_SMOOTHING) * queue.pf_avg_rate + PF_SMOOTHING * normalized;
        }

        completions
    }

    fn discipline_order(
        &self,
        candidates: &[(u16, u8)],
        eff: &BTreeMap<u16, u64>,
    ) -> Vec<(u16, u8)> {
        let mut ordered = candidates.to_vec();
        match self.ran.scheduler {
            // Strict priority: higher DRB first, then better instantaneous
            // channel, then lowest ue id.
            SchedulerKind::MaxCi => ordered.sort_by(|a, b| {
                b.1.cmp(&a.1)
                    .then(eff[&b.0].cmp(&eff[&a.0]))
                    .then(a.0.cmp(&b.0))
                    .then(a.1.cmp(&b.1))
            }),
            SchedulerKind::Pf => {
                let metric = |key: &(u16, u8)| {
                    let avg = self.queues[key].pf_avg_rate.max(1e-9);
                    eff[&key.0] as f64 / avg
                };
                ordered.sort_by(|a, b| {
                    metric(b)
                        .total_cmp(&metric(a))
                        .then(a.0.cmp(&b.0))
                        .then(a.1.cmp(&b.1))
                });
            }
            SchedulerKind::Rr => {
                let all: Vec<(u16, u8)> = self.queues.keys().copied().collect();
                if !all.is_empty() {
                    let start = all[self.rr_next.min(all.len() - 1)];
                    ordered.sort_by_key(|&key| (key < start, key));
                }
            }
        }
        ordered
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UpfError {
    #[error("no tunnel bound for destination {0:#010x}")]
    Unbound(u32),
}

/// UPF traffic-flow filter: DSCP → QFI classification plus tunnel selection
/// by destination address.
pub struct Upf {
    profile: QosProfile,
    tunnels: BTreeMap<u32, (u32, u16)>,
    pub classified_drops: u64,
}

impl Upf {
    pub fn new(profile: QosProfile) -> Self {
        Upf {
            profile,
            tunnels: BTreeMap::new(),
            classified_drops: 0,
        }
    }

    pub fn bind_tunnel(&mut self, downstream_addr: u32, teid: u32, ue: u16) {
        self.tunnels.insert(downstream_addr, (teid, ue));
    }

    /// qfi = map_dscp_to_qfi(dscp); teid selects the target UE's tunnel.
    pub fn classify_and_tunnel(
        &mut self,
        datagram: &CoreDatagram,
    ) -> Result<(GtpuHeader, u16), UpfError> {
        let Some(&(teid, ue)) = self.tunnels.get(&datagram.dst_addr) else {
            self.classified_drops += 1;
            log::warn!("upf: unbound destination {:#010x}", datagram.dst_addr);
            return Err(UpfError::Unbound(datagram.dst_addr));
        };
        let qfi = self.profile.map_dscp_to_qfi(datagram.dscp());
        Ok((GtpuHeader::new(teid, qfi).expect("qfi in range"), ue))
    }
}

/// gNB SDAP layer: per-UE QFI → DRB selection, with an optional override
/// bearer for wrapped gPTP transport.
pub struct Sdap {
    drb_configs: BTreeMap<u16, DrbConfig>,
    gptp_drb_override: Option<u8>,
}

impl Sdap {
    pub fn new(drb_configs: BTreeMap<u16, DrbConfig>, gptp_drb_override: Option<u8>) -> Self {
        Sdap {
            drb_configs,
            gptp_drb_override,
        }
    }

    pub fn select_drb(&self, ue: u16, qfi: u8, is_gptp_transport: bool) -> u8 {
        if is_gptp_transport {
            if let Some(drb) = self.gptp_drb_override {
                return drb;
            }
        }
        self.drb_configs
            .get(&ue)
            .map(|cfg| cfg.map_qfi_to_drb(qfi))
            .unwrap_or(0)
    }

    pub fn enqueue(
        &self,
        mac: &mut Mac,
        ue: u16,
        header: &GtpuHeader,
        is_gptp_transport: bool,
        job: TransportJob,
    ) -> u8 {
        let drb = self.select_drb(ue, header.qfi(), is_gptp_transport);
        mac.enqueue(ue, drb, job);
        drb
    }
}

pub fn job_from_datagram(
    datagram: CoreDatagram,
    enqueue_time: SimTime,
    lineage: Option<u64>,
) -> TransportJob {
    let payload_bytes = datagram.encoded_len() as u64;
    TransportJob {
        datagram,
        payload_bytes,
        enqueue_time,
        lineage,
        served_bytes: 0,
        queue_seq: 0,
    }
}
