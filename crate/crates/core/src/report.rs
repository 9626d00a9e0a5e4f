//! Run report assembly, aligned text tables, report comparison, and the
//! CSV exports. The JSON form is a deterministic function of the scenario:
//! equal configs and seeds serialize to identical bytes.

use serde::{Deserialize, Serialize};

use crate::core5g::{Grant, Mac, Upf};
use crate::ds_tt::{DsTt, ResidenceRecord};
use crate::gptp::{HierarchyValidation, SlaveRecorder};
use crate::nw_tt::NwTt;
use crate::scenario::ScenarioConfig;
use crate::simkernel::{RunSummary, SimTime};
use crate::traffic::{self, FlowSpec, PacketFate, PacketLineage};
use crate::tsn_af::{TsnAf, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSummary {
    pub event_count: u64,
    pub final_time_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidenceReport {
    pub count: u64,
    pub min_ns: u64,
    pub max_ns: u64,
    pub mean_ns: f64,
    pub spread_ns: u64,
    /// Timing-jitter summaries variously mean variance, standard deviation
    /// or range by "variance", so all three are reported.
    pub variance_ns2: f64,
    pub stddev_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointReport {
    pub endpoint: usize,
    pub ue_id: u16,
    pub gptp_forwarded: u64,
    pub data_forwarded_high: u64,
    pub data_forwarded_be: u64,
    pub reverse_forwarded: u64,
    pub dropped_malformed: u64,
    pub residence: Option<ResidenceReport>,
    pub slave_received: u64,
    pub slave_samples: u64,
    pub slave_orphans: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GptpReport {
    pub emitted_pairs: u64,
    pub emitted_messages: u64,
    pub forwarded_per_endpoint: Vec<u64>,
    pub forwarded_total: u64,
    pub attach_loss: u64,
    /// Slave-observed correction equals the DS-TT residence record for
    /// every delivered message.
    pub correction_bitexact: bool,
    pub correction_mismatches: u64,
    pub two_step_order_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfReport {
    pub per_endpoint: Vec<Option<ResidenceSummary>>,
    pub total: Option<ResidenceSummary>,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidenceSummary {
    pub min_ns: u64,
    pub max_ns: u64,
    pub mean_ns: f64,
    pub sample_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgeCounters {
    pub nwtt_frames_in: u64,
    pub nwtt_gptp_wrapped: u64,
    pub nwtt_data_translated: u64,
    pub nwtt_egress_rebuilt: u64,
    pub nwtt_dropped_unroutable: u64,
    pub nwtt_routing_errors: u64,
    pub upf_classified_drops: u64,
    pub dstt_dropped_malformed: u64,
    pub mac_dl_fifo_violations: u64,
    pub mac_ul_fifo_violations: u64,
    pub mac_dl_work_conservation_violations: u64,
    pub mac_ul_work_conservation_violations: u64,
    /// Sum of every bridge-internal drop counter plus per-flow drops.
    pub total_dropped: u64,
}

/// Ties the end-to-end delay table to the residence-time table: the mean
/// wired delay outside the bridge plus the mean bridge span must equal the
/// high-priority end-to-end mean (the three segments partition the path).
/// `residence_minus_span_ns` reports how far the gPTP-measured residence
/// sits from the high-prio bridge span (slot-phase difference).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub e2e_high_prio_mean_ns: Option<f64>,
    pub wired_before_bridge_mean_ns: Option<f64>,
    pub bridge_span_mean_ns: Option<f64>,
    pub wired_after_bridge_mean_ns: Option<f64>,
    pub delta_ns: Option<f64>,
    pub residence_mean_ns: Option<f64>,
    pub residence_minus_span_ns: Option<f64>,
}

/// Per-traffic-class aggregate (pooled across endpoints, warmup-filtered
/// delays), mirroring the per-class latency table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub sent: u64,
    pub delivered: u64,
    pub delay_post_warmup: Option<traffic::DelayStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub summary: KernelSummary,
    pub hierarchy_validation: HierarchyValidation,
    pub flows: Vec<traffic::FlowMetrics>,
    pub classes: Vec<ClassMetrics>,
    pub endpoints: Vec<EndpointReport>,
    pub gptp: GptpReport,
    pub af: AfReport,
    pub bridge: BridgeCounters,
    pub consistency: ConsistencyReport,
    pub config: ScenarioConfig,
}

fn residence_report(dstt: &DsTt) -> Option<ResidenceReport> {
    let stats = dstt.residence_stats()?;
    let variance = dstt.residence_variance_ns2()?;
    Some(ResidenceReport {
        count: stats.count,
        min_ns: stats.min_ns,
        max_ns: stats.max_ns,
        mean_ns: stats.mean_ns(),
        spread_ns: stats.spread_ns(),
        variance_ns2: variance,
        stddev_ns: variance.sqrt(),
    })
}

fn class_metrics(
    flows: &[FlowSpec],
    lineages: &[PacketLineage],
    warmup_ns: u64,
) -> Vec<ClassMetrics> {
    let mut names: Vec<String> = Vec::new();
    for flow in flows {
        if !names.contains(&flow.name) {
            names.push(flow.name.clone());
        }
    }
    names
        .into_iter()
        .map(|name| {
            let mut sent = 0;
            let mut delivered = 0;
            let mut delays = Vec::new();
            for p in lineages {
                if flows[p.flow_index].name != name {
                    continue;
                }
                sent += 1;
                if p.fate == PacketFate::Delivered {
                    delivered += 1;
                    if p.sent_time.ns() >= warmup_ns {
                        delays.push(p.delivered_time.unwrap().since(p.sent_time));
                    }
                }
            }
            ClassMetrics {
                name,
                sent,
                delivered,
                delay_post_warmup: pooled_stats(delays),
            }
        })
        .collect()
}

fn pooled_stats(mut delays: Vec<u64>) -> Option<traffic::DelayStats> {
    if delays.is_empty() {
        return None;
    }
    delays.sort_unstable();
    let n = delays.len();
    let sum: u128 = delays.iter().map(|&d| u128::from(d)).sum();
    let rank = ((n as f64) * 0.99).ceil() as usize;
    Some(traffic::DelayStats {
        samples: n as u64,
        mean_ns: sum as f64 / n as f64,
        p99_ns: delays[rank.clamp(1, n) - 1],
        max_ns: delays[n - 1],
    })
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble(
    config: &ScenarioConfig,
    summary: RunSummary,
    hierarchy_validation: HierarchyValidation,
    flows: &[FlowSpec],
    lineages: &[PacketLineage],
    nw_tt: &NwTt,
    ds_tts: &[DsTt],
    upf: &Upf,
    mac_dl: &Mac,
    mac_ul: &Mac,
    af: &TsnAf,
    slaves: &[SlaveRecorder],
    emitted_pairs: usize,
    gptp_attach_loss: u64,
) -> RunReport {
    let flow_metrics: Vec<traffic::FlowMetrics> = flows
        .iter()
        .enumerate()
        .map(|(i, flow)| traffic::compute_metrics(flow, i, lineages, config.warmup_ns))
        .collect();

    // Bit-exact correction check: every slave-observed correction must equal
    // the DS-TT's logged delta for that (endpoint, type, sequence).
    let mut mismatches = 0u64;
    for slave in slaves {
        let log = &ds_tts[slave.endpoint_id].residence_log;
        for &(msg_type, seq, correction) in &slave.messages {
            let matched = log
                .iter()
                .find(|r| r.message_type == msg_type && r.sequence_id == seq);
            match matched {
                Some(record) if record.correction_delta == correction => {}
                _ => mismatches += 1,
            }
        }
    }

    let endpoints: Vec<EndpointReport> = ds_tts
        .iter()
        .enumerate()
        .map(|(i, dstt)| EndpointReport {
            endpoint: i,
            ue_id: crate::topology::nr_node_id(i),
            gptp_forwarded: dstt.counters.gptp_forwarded,
            data_forwarded_high: dstt.counters.data_forwarded_high,
            data_forwarded_be: dstt.counters.data_forwarded_be,
            reverse_forwarded: dstt.counters.reverse_forwarded,
            dropped_malformed: dstt.counters.dropped_malformed,
            residence: residence_report(dstt),
            slave_received: slaves[i].received_total(),
            slave_samples: slaves[i].samples.len() as u64,
            slave_orphans: slaves[i].orphan_follow_ups,
        })
        .collect();

    let forwarded_per_endpoint: Vec<u64> = endpoints.iter().map(|e| e.gptp_forwarded).collect();
    let forwarded_total = forwarded_per_endpoint.iter().sum();

    let flow_dropped: u64 = flow_metrics.iter().map(|m| m.dropped).sum();
    let c = nw_tt.counters;
    let bridge = BridgeCounters {
        nwtt_frames_in: c.frames_in,
        nwtt_gptp_wrapped: c.gptp_wrapped,
        nwtt_data_translated: c.data_translated,
        nwtt_egress_rebuilt: c.egress_rebuilt,
        nwtt_dropped_unroutable: c.dropped_unroutable,
        nwtt_routing_errors: c.routing_errors,
        upf_classified_drops: upf.classified_drops,
        dstt_dropped_malformed: ds_tts.iter().map(|d| d.counters.dropped_malformed).sum(),
        mac_dl_fifo_violations: mac_dl.fifo_violations,
        mac_ul_fifo_violations: mac_ul.fifo_violations,
        mac_dl_work_conservation_violations: mac_dl.work_conservation_violations,
        mac_ul_work_conservation_violations: mac_ul.work_conservation_violations,
        total_dropped: c.dropped_unroutable
            + c.routing_errors
            + upf.classified_drops
            + ds_tts
                .iter()
                .map(|d| d.counters.dropped_malformed)
                .sum::<u64>()
            + flow_dropped,
    };

    let classes = class_metrics(flows, lineages, config.warmup_ns);

    // Consistency check over the first high-priority downlink class: mean
    // per-packet segments (wired-before, bridge span, wired-after) must sum
    // to the end-to-end mean.
    let hp_flow = flows
        .iter()
        .find(|f| f.direction == traffic::Direction::Downlink && f.pcp > 0);
    let mut seg_before = Vec::new();
    let mut seg_span = Vec::new();
    let mut seg_after = Vec::new();
    if let Some(hp) = hp_flow {
        for p in lineages {
            if flows[p.flow_index].name != hp.name
                || p.fate != PacketFate::Delivered
                || p.sent_time.ns() < config.warmup_ns
            {
                continue;
            }
            if let (Some(ingress), Some(egress), Some(delivered)) =
                (p.bridge_ingress, p.bridge_egress, p.delivered_time)
            {
                seg_before.push(ingress.since(p.sent_time));
                seg_span.push(egress.since(ingress));
                seg_after.push(delivered.since(egress));
            }
        }
    }
    let mean_of = |v: &[u64]| {
        (!v.is_empty())
            .then(|| v.iter().map(|&x| u128::from(x)).sum::<u128>() as f64 / v.len() as f64)
    };
    let e2e_mean = hp_flow.and_then(|hp| {
        classes
            .iter()
            .find(|c| c.name == hp.name)
            .and_then(|c| c.delay_post_warmup)
            .map(|d| d.mean_ns)
    });
    let before_mean = mean_of(&seg_before);
    let span_mean = mean_of(&seg_span);
    let after_mean = mean_of(&seg_after);
    let residence_mean = {
        let total: Option<crate::tsn_af::BridgeDelayStats> =
            (af.total.sample_count > 0).then_some(af.total);
        total.and_then(|t| t.mean_ns())
    };
    let consistency = ConsistencyReport {
        e2e_high_prio_mean_ns: e2e_mean,
        wired_before_bridge_mean_ns: before_mean,
        bridge_span_mean_ns: span_mean,
        wired_after_bridge_mean_ns: after_mean,
        delta_ns: match (e2e_mean, before_mean, span_mean, after_mean) {
            (Some(e2e), Some(b), Some(s), Some(a)) => Some(e2e - (b + s + a)),
            _ => None,
        },
        residence_mean_ns: residence_mean,
        residence_minus_span_ns: match (residence_mean, span_mean) {
            (Some(r), Some(s)) => Some(r - s),
            _ => None,
        },
    };

    let summarize = |s: &crate::tsn_af::BridgeDelayStats| {
        (s.sample_count > 0).then(|| ResidenceSummary {
            min_ns: s.min_ns,
            max_ns: s.max_ns,
            mean_ns: s.mean_ns().unwrap_or(0.0),
            sample_count: s.sample_count,
        })
    };

    RunReport {
        seed: config.seed,
        summary: KernelSummary {
            event_count: summary.event_count,
            final_time_ns: summary.final_time.ns(),
        },
        hierarchy_validation,
        flows: flow_metrics,
        classes,
        endpoints,
        gptp: GptpReport {
            emitted_pairs: emitted_pairs as u64,
            emitted_messages: emitted_pairs as u64 * 2,
            forwarded_per_endpoint,
            forwarded_total,
            attach_loss: gptp_attach_loss,
            correction_bitexact: mismatches == 0,
            correction_mismatches: mismatches,
            two_step_order_ok: slaves.iter().all(|s| s.orphan_follow_ups == 0),
        },
        af: AfReport {
            per_endpoint: (0..ds_tts.len())
                .map(|i| summarize(af.endpoint_stats(i)))
                .collect(),
            total: summarize(&af.total),
            violations: af.violations.clone(),
        },
        bridge,
        consistency,
        config: config.clone(),
    }
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned-text result tables.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let eps = self.endpoints.len();
        let channel = format!("{:?}", self.config.channel.mode).to_lowercase();

        out.push_str(&format!(
            "Run: seed {} | {} endpoint(s) | channel {} | scheduler {:?} | horizon {} ms\n\n",
            self.seed,
            eps,
            channel,
            self.config.ran.scheduler,
            self.config.horizon_ns / 1_000_000
        ));

        out.push_str("Per-Endpoint Packet Delivery\n");
        out.push_str(&format!("{:<28}", "Metric"));
        for i in 0..eps {
            out.push_str(&format!("{:>10}", format!("EP {i}")));
        }
        out.push('\n');
        let per_flow_row = |out: &mut String, label: &str, name: &str| {
            out.push_str(&format!("{label:<28}"));
            for i in 0..eps {
                let v = self
                    .flows
                    .iter()
                    .find(|f| f.name == name && f.endpoint == i)
                    .map(|f| f.delivered)
                    .unwrap_or(0);
                out.push_str(&format!("{v:>10}"));
            }
            out.push('\n');
        };
        per_flow_row(&mut out, "High priority delivered", "high-prio");
        per_flow_row(&mut out, "Best effort delivered", "best-effort");
        per_flow_row(&mut out, "Reverse to Device A", "reverse");
        out.push_str(&format!("{:<28}", "gPTP forwarded"));
        for e in &self.endpoints {
            out.push_str(&format!("{:>10}", e.gptp_forwarded));
        }
        out.push('\n');
        let reverse_total: u64 = self
            .flows
            .iter()
            .filter(|f| f.name == "reverse")
            .map(|f| f.delivered)
            .sum();
        out.push_str(&format!(
            "Device A reverse total      {reverse_total:>10}\n"
        ));
        out.push_str(&format!(
            "Packets dropped             {:>10}\n",
            self.bridge.total_dropped
        ));
        for f in &self.flows {
            if f.count_outlier {
                out.push_str(&format!(
                    "  outlier: {}/ep{} sent {} vs expected {:.0} (>3 sigma)\n",
                    f.name,
                    f.endpoint,
                    f.sent,
                    f.expected_arrivals.unwrap_or(0.0)
                ));
            }
        }
        out.push('\n');

        out.push_str("End-to-End Delay per Traffic Class (post-warmup)\n");
        out.push_str(&format!(
            "{:<20}{:>12}{:>12}{:>12}{:>10}\n",
            "Class", "Mean ms", "P99 ms", "Max ms", "Samples"
        ));
        for class in &self.classes {
            if let Some(d) = class.delay_post_warmup {
                out.push_str(&format!(
                    "{:<20}{:>12.4}{:>12.4}{:>12.4}{:>10}\n",
                    class.name,
                    d.mean_ns / 1e6,
                    d.p99_ns as f64 / 1e6,
                    d.max_ns as f64 / 1e6,
                    d.samples
                ));
            }
        }
        out.push('\n');

        out.push_str("5GS Residence Time per Endpoint\n");
        out.push_str(&format!(
            "{:<6}{:>14}{:>14}{:>14}{:>12}{:>14}{:>12}\n",
            "EP", "Min us", "Max us", "Avg us", "Spread us", "Var us^2", "Stddev us"
        ));
        for e in &self.endpoints {
            if let Some(r) = e.residence {
                out.push_str(&format!(
                    "{:<6}{:>14.3}{:>14.3}{:>14.3}{:>12.3}{:>14.6}{:>12.3}\n",
                    e.endpoint,
                    r.min_ns as f64 / 1e3,
                    r.max_ns as f64 / 1e3,
                    r.mean_ns / 1e3,
                    r.spread_ns as f64 / 1e3,
                    r.variance_ns2 / 1e6,
                    r.stddev_ns / 1e3,
                ));
            }
        }
        out.push('\n');

        out.push_str("gPTP Transparent Clock\n");
        out.push_str(&format!(
            "  emitted {} pairs ({} messages); forwarded per endpoint {:?} (total {})\n",
            self.gptp.emitted_pairs,
            self.gptp.emitted_messages,
            self.gptp.forwarded_per_endpoint,
            self.gptp.forwarded_total
        ));
        out.push_str(&format!(
            "  correction bit-exact: {} ({} mismatches); two-step order ok: {}\n\n",
            self.gptp.correction_bitexact,
            self.gptp.correction_mismatches,
            self.gptp.two_step_order_ok
        ));

        out.push_str("TSN AF\n");
        if let Some(total) = &self.af.total {
            out.push_str(&format!(
                "  bridge delay min {:.3} us / max {:.3} us / avg {:.3} us over {} samples\n",
                total.min_ns as f64 / 1e3,
                total.max_ns as f64 / 1e3,
                total.mean_ns / 1e3,
                total.sample_count
            ));
        } else {
            out.push_str("  no residence samples\n");
        }
        out.push_str(&format!("  violations: {}\n\n", self.af.violations.len()));

        out.push_str(&format!(
            "BMCA validation: {} ({} errors); transparent clocks {:?}\n",
            if self.hierarchy_validation.is_valid() {
                "ok"
            } else {
                "FAILED"
            },
            self.hierarchy_validation.errors.len(),
            self.hierarchy_validation.registered_transparent_clocks
        ));
        if let Some(delta) = self.consistency.delta_ns {
            out.push_str(&format!(
                "Consistency: wired + bridge-span vs e2e high-prio delta {delta:.0} ns"
            ));
            if let Some(gap) = self.consistency.residence_minus_span_ns {
                out.push_str(&format!(
                    " (gPTP residence sits {:.1} us from the high-prio span)",
                    gap / 1e3
                ));
            }
            out.push('\n');
        }
        out
    }

    pub fn flow(&self, name: &str, endpoint: usize) -> Option<&traffic::FlowMetrics> {
        self.flows
            .iter()
            .find(|f| f.name == name && f.endpoint == endpoint)
    }

    pub fn class(&self, name: &str) -> Option<&ClassMetrics> {
        self.classes.iter().find(|c| c.name == name)
    }

    /// Pooled residence spread across endpoints (max of maxes minus min of
    /// mins); `None` without samples.
    pub fn residence_spread_ns(&self) -> Option<u64> {
        let total = self.af.total.as_ref()?;
        Some(total.max_ns - total.min_ns)
    }
}

/// Side-by-side comparison of two run reports.
pub fn compare(a: &RunReport, b: &RunReport) -> String {
    let mut out = String::new();
    let mut warnings = Vec::new();

    out.push_str(&format!(
        "{:<34}{:>16}{:>16}{:>16}\n",
        "Metric", "A", "B", "delta (B-A)"
    ));

    let mut shared = Vec::new();
    for class in &a.classes {
        if b.class(&class.name).is_some() {
            shared.push(class.name.clone());
        } else {
            warnings.push(format!("class {:?} only in report A", class.name));
        }
    }
    for class in &b.classes {
        if a.class(&class.name).is_none() {
            warnings.push(format!("class {:?} only in report B", class.name));
        }
    }

    for name in &shared {
        let (ca, cb) = (a.class(name).unwrap(), b.class(name).unwrap());
        out.push_str(&format!(
            "{:<34}{:>16}{:>16}{:>16}\n",
            format!("{name}: delivered"),
            ca.delivered,
            cb.delivered,
            cb.delivered as i64 - ca.delivered as i64
        ));
        if let (Some(da), Some(db)) = (ca.delay_post_warmup, cb.delay_post_warmup) {
            out.push_str(&format!(
                "{:<34}{:>16.4}{:>16.4}{:>16.4}\n",
                format!("{name}: mean delay ms"),
                da.mean_ns / 1e6,
                db.mean_ns / 1e6,
                (db.mean_ns - da.mean_ns) / 1e6
            ));
        }
    }

    match (&a.af.total, &b.af.total) {
        (Some(ra), Some(rb)) => {
            out.push_str(&format!(
                "{:<34}{:>16.3}{:>16.3}{:>16.3}\n",
                "residence mean us",
                ra.mean_ns / 1e3,
                rb.mean_ns / 1e3,
                (rb.mean_ns - ra.mean_ns) / 1e3
            ));
            let sa = (ra.max_ns - ra.min_ns) as f64;
            let sb = (rb.max_ns - rb.min_ns) as f64;
            out.push_str(&format!(
                "{:<34}{:>16.3}{:>16.3}{:>16.3}\n",
                "residence spread us",
                sa / 1e3,
                sb / 1e3,
                (sb - sa) / 1e3
            ));
            if sa > 0.0 {
                out.push_str(&format!(
                    "{:<34}{:>16}{:>16}{:>16.1}\n",
                    "residence spread ratio (B/A)",
                    "",
                    "",
                    sb / sa
                ));
            }
        }
        _ => warnings.push("residence stats missing in one report".to_string()),
    }

    out.push_str(&format!(
        "{:<34}{:>16}{:>16}{:>16}\n",
        "dropped",
        a.bridge.total_dropped,
        b.bridge.total_dropped,
        b.bridge.total_dropped as i64 - a.bridge.total_dropped as i64
    ));
    out.push_str(&format!(
        "{:<34}{:>16}{:>16}{:>16}\n",
        "af violations",
        a.af.violations.len(),
        b.af.violations.len(),
        b.af.violations.len() as i64 - a.af.violations.len() as i64
    ));

    for warning in &warnings {
        out.push_str(&format!("warning: {warning}\n"));
    }
    out
}

pub fn residence_csv(log: &[ResidenceRecord]) -> String {
    let mut out = String::from("seq,type,ingress_ns,egress_ns,residence_ns\n");
    for r in log {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.sequence_id,
            r.message_type.label(),
            r.ingress.ns(),
            r.egress.ns(),
            r.residence_ns
        ));
    }
    out
}

pub fn grants_csv(grants: &[Grant]) -> String {
    let mut out =
        String::from("slot_start_ns,ue,drb,rbs,bytes_served,jobs_completed,harq_failed\n");
    for g in grants {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            g.slot_start.ns(),
            g.ue,
            g.drb,
            g.rbs,
            g.bytes_served,
            g.jobs_completed,
            g.harq_failed
        ));
    }
    out
}

pub fn lineage_csv(lineages: &[PacketLineage], flows: &[FlowSpec]) -> String {
    let mut out =
        String::from("lineage_id,flow,endpoint,sent_ns,delivered_ns,fate,pcp_source,pcp_sink\n");
    for p in lineages {
        let flow = &flows[p.flow_index];
        out.push_str(&format!(
            "{},{},{},{},{},{:?},{},{}\n",
            p.lineage_id,
            flow.name,
            flow.endpoint,
            p.sent_time.ns(),
            p.delivered_time.map(SimTime::ns).unwrap_or(0),
            p.fate,
            p.pcp_at_source,
            p.pcp_at_sink.map(|v| v.to_string()).unwrap_or_default()
        ));
    }
    out
}
