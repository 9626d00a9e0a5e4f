//! Traffic sources (CBR and exponential inter-arrival), per-packet lineage
//! tracking, and end-of-run metric computation with warmup filtering.

use serde::{Deserialize, Serialize};

use crate::simkernel::{RngStream, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Downlink,
    Uplink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Arrival {
    Cbr { period_ns: u64 },
    Exponential { mean_ns: u64 },
}

/// One concrete flow instance bound to a single endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlowSpec {
    pub name: String,
    pub direction: Direction,
    pub endpoint: usize,
    pub payload_bytes: usize,
    pub arrival: Arrival,
    pub pcp: u8,
    pub start_ns: u64,
    pub stop_ns: u64,
}

impl FlowSpec {
    /// Stable RNG stream label so channel-model toggles cannot perturb
    /// arrival sequences.
    pub fn stream_label(&self) -> String {
        format!("traffic/{}/{}", self.name, self.endpoint)
    }
}

/// Send schedule for one flow: CBR fires at start, start+p, ... < stop;
/// exponential gaps are drawn i.i.d. from the flow's own stream.
pub fn generate(flow: &FlowSpec, rng: &mut RngStream) -> Vec<SimTime> {
    let mut out = Vec::new();
    match flow.arrival {
        Arrival::Cbr { period_ns } => {
            assert!(period_ns > 0, "cbr period must be > 0");
            let mut t = flow.start_ns;
            while t < flow.stop_ns {
                out.push(SimTime::from_ns(t));
                t += period_ns;
            }
        }
        Arrival::Exponential { mean_ns } => {
            let mut t = flow.start_ns + rng.draw_exponential(mean_ns);
            while t < flow.stop_ns {
                out.push(SimTime::from_ns(t));
                t += rng.draw_exponential(mean_ns);
            }
        }
    }
    out
}

/// Where a tracked packet ended up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketFate {
    InFlight,
    Delivered,
    RadioAttachLoss,
    Dropped,
}

/// Per-packet record enabling delivery and delay accounting.
#[derive(Debug, Clone)]
pub struct PacketLineage {
    pub lineage_id: u64,
    pub flow_index: usize,
    pub sent_time: SimTime,
    pub delivered_time: Option<SimTime>,
    /// When the packet entered the bridge (NW-TT ingress downlink, DS-TT
    /// ingress uplink); simulation metadata, not wire data.
    pub bridge_ingress: Option<SimTime>,
    /// When the packet left the bridge on the far side.
    pub bridge_egress: Option<SimTime>,
    pub pcp_at_source: u8,
    pub pcp_at_sink: Option<u8>,
    pub fate: PacketFate,
}

/// Delay statistics over one observation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct DelayStats {
    pub samples: u64,
    pub mean_ns: f64,
    pub p99_ns: u64,
    pub max_ns: u64,
}

impl DelayStats {
    /// Nearest-rank P99 over the given delays; `None` when empty.
    fn from_delays(mut delays: Vec<u64>) -> Option<DelayStats> {
        if delays.is_empty() {
            return None;
        }
        delays.sort_unstable();
        let n = delays.len();
        let sum: u128 = delays.iter().map(|&d| u128::from(d)).sum();
        let rank = ((n as f64) * 0.99).ceil() as usize; // 1-based nearest rank
        Some(DelayStats {
            samples: n as u64,
            mean_ns: sum as f64 / n as f64,
            p99_ns: delays[rank.clamp(1, n) - 1],
            max_ns: delays[n - 1],
        })
    }
}

/// Per-flow end-of-run metrics. Delivery counters cover the full run;
/// delay statistics are reported both for the full run and for packets
/// sent at or after the warmup boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMetrics {
    pub name: String,
    pub endpoint: usize,
    pub sent: u64,
    pub delivered: u64,
    pub radio_attach_loss: u64,
    pub dropped: u64,
    /// Still traversing the bridge when the run horizon was reached.
    pub in_flight_at_end: u64,
    /// Mean arrivals the flow spec predicts over its window (None for CBR,
    /// whose count is exact).
    pub expected_arrivals: Option<f64>,
    /// Sent count deviates more than 3 sigma from the expectation.
    pub count_outlier: bool,
    pub delay_all: Option<DelayStats>,
    pub delay_post_warmup: Option<DelayStats>,
    pub pcp_preserved: bool,
}

/// Compute metrics for one flow from the packets it sent.
pub fn compute_metrics(
    flow: &FlowSpec,
    flow_index: usize,
    lineages: &[PacketLineage],
    warmup_ns: u64,
) -> FlowMetrics {
    let mut sent = 0u64;
    let mut delivered = 0u64;
    let mut attach = 0u64;
    let mut dropped = 0u64;
    let mut in_flight = 0u64;
    let mut pcp_preserved = true;
    let mut delays_all = Vec::new();
    let mut delays_warm = Vec::new();

    for p in lineages.iter().filter(|p| p.flow_index == flow_index) {
        sent += 1;
        match p.fate {
            PacketFate::Delivered => {
                delivered += 1;
                let delay = p
                    .delivered_time
                    .expect("delivered packet has a delivery time")
                    .since(p.sent_time);
                delays_all.push(delay);
                if p.sent_time.ns() >= warmup_ns {
                    delays_warm.push(delay);
                }
                if p.pcp_at_sink != Some(p.pcp_at_source) {
                    pcp_preserved = false;
                }
            }
            PacketFate::RadioAttachLoss => attach += 1,
            PacketFate::Dropped => dropped += 1,
            PacketFate::InFlight => in_flight += 1,
        }
    }

    let expected_arrivals = match flow.arrival {
        Arrival::Exponential { mean_ns } => {
            Some((flow.stop_ns - flow.start_ns) as f64 / mean_ns as f64)
        }
        Arrival::Cbr { .. } => None,
    };
    let count_outlier = expected_arrivals
        .map(|exp| (sent as f64 - exp).abs() > 3.0 * exp.sqrt())
        .unwrap_or(false);

    FlowMetrics {
        name: flow.name.clone(),
        endpoint: flow.endpoint,
        sent,
        delivered,
        radio_attach_loss: attach,
        dropped,
        in_flight_at_end: in_flight,
        expected_arrivals,
        count_outlier,
        delay_all: DelayStats::from_delays(delays_all),
        delay_post_warmup: DelayStats::from_delays(delays_warm),
        pcp_preserved,
    }
}

impl FlowMetrics {
    /// Conservation: every sent packet is accounted for by exactly one fate.
    pub fn conserved(&self) -> bool {
        self.sent == self.delivered + self.radio_attach_loss + self.dropped + self.in_flight_at_end
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simkernel::{NANOS_PER_MILLI, NANOS_PER_SEC};

    fn flow(arrival: Arrival, start_ns: u64, stop_ns: u64) -> FlowSpec {
        FlowSpec {
            name: "t".into(),
            direction: Direction::Downlink,
            endpoint: 0,
            payload_bytes: 100,
            arrival,
            pcp: 6,
            start_ns,
            stop_ns,
        }
    }

    #[test]
    fn cbr_1ms_over_10s_sends_10000() {
        let f = flow(
            Arrival::Cbr {
                period_ns: NANOS_PER_MILLI,
            },
            0,
            10 * NANOS_PER_SEC,
        );
        let mut rng = RngStream::new(1, &f.stream_label());
        let sends = generate(&f, &mut rng);
        assert_eq!(sends.len(), 10_000);
        assert_eq!(sends[0], SimTime::ZERO);
        assert_eq!(sends[9999], SimTime::from_ms(9999));
    }

    #[test]
    fn reverse_cbr_window_sends_800() {
        let f = flow(
            Arrival::Cbr {
                period_ns: 10 * NANOS_PER_MILLI,
            },
            NANOS_PER_SEC,
            9 * NANOS_PER_SEC,
        );
        let mut rng = RngStream::new(1, &f.stream_label());
        assert_eq!(generate(&f, &mut rng).len(), 800);
    }

    #[test]
    fn exponential_count_near_expectation() {
        let f = flow(
            Arrival::Exponential {
                mean_ns: 2 * NANOS_PER_MILLI,
            },
            0,
            10 * NANOS_PER_SEC,
        );
        let mut rng = RngStream::new(1, &f.stream_label());
        let n = generate(&f, &mut rng).len() as f64;
        // 3 sigma around the expected 5000 arrivals
        assert!((n - 5000.0).abs() < 3.0 * 5000f64.sqrt(), "n = {n}");
    }

    #[test]
    fn exponential_sends_are_strictly_increasing_and_in_window() {
        let f = flow(
            Arrival::Exponential {
                mean_ns: NANOS_PER_MILLI,
            },
            5 * NANOS_PER_SEC,
            6 * NANOS_PER_SEC,
        );
        let mut rng = RngStream::new(3, &f.stream_label());
        let sends = generate(&f, &mut rng);
        for pair in sends.windows(2) {
            assert!(pair[0] < pair[1]);
        }
        assert!(sends
            .iter()
            .all(|t| t.ns() >= f.start_ns && t.ns() < f.stop_ns));
    }

    fn lineage(id: u64, sent_ms: u64, delay_ns: Option<u64>) -> PacketLineage {
        let sent = SimTime::from_ms(sent_ms);
        PacketLineage {
            lineage_id: id,
            flow_index: 0,
            sent_time: sent,
            delivered_time: delay_ns.map(|d| sent.plus_ns(d)),
            bridge_ingress: None,
            bridge_egress: None,
            pcp_at_source: 6,
            pcp_at_sink: delay_ns.map(|_| 6),
            fate: if delay_ns.is_some() {
                PacketFate::Delivered
            } else {
                PacketFate::RadioAttachLoss
            },
        }
    }

    #[test]
    fn constant_delay_collapses_stats() {
        let f = flow(Arrival::Cbr { period_ns: 1 }, 0, 2);
        let lineages: Vec<_> = (0..10).map(|i| lineage(i, i, Some(1_000_000))).collect();
        let m = compute_metrics(&f, 0, &lineages, 0);
        let d = m.delay_all.unwrap();
        assert_eq!(d.mean_ns, 1_000_000.0);
        assert_eq!(d.p99_ns, 1_000_000);
        assert_eq!(d.max_ns, 1_000_000);
        assert!(m.conserved());
    }

    #[test]
    fn p99_nearest_rank_on_1_to_100() {
        let f = flow(Arrival::Cbr { period_ns: 1 }, 0, 2);
        let lineages: Vec<_> = (1..=100)
            .map(|i| lineage(i, 0, Some(i * NANOS_PER_MILLI)))
            .collect();
        let m = compute_metrics(&f, 0, &lineages, 0);
        assert_eq!(m.delay_all.unwrap().p99_ns, 99 * NANOS_PER_MILLI);
    }

    #[test]
    fn warmup_filter_applies_to_delay_not_counts() {
        let f = flow(Arrival::Cbr { period_ns: 1 }, 0, 2);
        let mut lineages: Vec<_> = (0..10).map(|i| lineage(i, 100 * i, Some(1000))).collect();
        lineages.push(lineage(99, 5, None)); // attach loss
        let m = compute_metrics(&f, 0, &lineages, 500 * NANOS_PER_MILLI);
        assert_eq!(m.sent, 11);
        assert_eq!(m.delivered, 10);
        assert_eq!(m.radio_attach_loss, 1);
        assert_eq!(m.delay_all.unwrap().samples, 10);
        assert_eq!(m.delay_post_warmup.unwrap().samples, 5);
        assert!(m.conserved());
    }

    #[test]
    fn no_deliveries_mark_delay_stats_empty() {
        let f = flow(Arrival::Cbr { period_ns: 1 }, 0, 2);
        let m = compute_metrics(&f, 0, &[lineage(0, 0, None)], 0);
        assert!(m.delay_all.is_none());
        assert!(m.delay_post_warmup.is_none());
    }
}
