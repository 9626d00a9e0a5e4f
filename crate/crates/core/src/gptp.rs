//! gPTP grandmaster source (two-step Sync + Follow_Up), endpoint slave
//! recorders, and the static clock-hierarchy validator that registers the
//! 5G system as a transparent clock.
//!
//! Slaves are recorders, not servo clocks: they pair Sync/Follow_Up by
//! sequence id and log the accumulated correction, which is what the
//! transparent-clock validation compares against the DS-TT residence log.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::frames::{GptpMessage, GptpMessageType};
use crate::simkernel::SimTime;

/// One scheduled two-step emission: a Sync followed immediately by its
/// Follow_Up carrying the origin timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmissionPair {
    pub emit_time: SimTime,
    pub sync: GptpMessage,
    pub follow_up: GptpMessage,
}

/// Emission schedule for t = start + k*interval while t < horizon.
pub fn grandmaster_emit(
    interval_ns: u64,
    start: SimTime,
    horizon: SimTime,
    domain_number: u8,
) -> Vec<EmissionPair> {
    assert!(interval_ns > 0, "sync interval must be > 0");
    let mut out = Vec::new();
    let mut t = start;
    let mut seq: u16 = 0;
    while t < horizon {
        out.push(EmissionPair {
            emit_time: t,
            sync: GptpMessage {
                message_type: GptpMessageType::Sync,
                sequence_id: seq,
                correction_field: 0,
                origin_timestamp: t,
                domain_number,
            },
            follow_up: GptpMessage {
                message_type: GptpMessageType::FollowUp,
                sequence_id: seq,
                correction_field: 0,
                origin_timestamp: t,
                domain_number,
            },
        });
        t = t.plus_ns(interval_ns);
        seq = seq.wrapping_add(1);
    }
    out
}

/// Completed Sync/Follow_Up pair as observed by one endpoint slave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SyncSample {
    pub endpoint_id: usize,
    pub sequence_id: u16,
    pub sync_rx_time: SimTime,
    pub followup_rx_time: SimTime,
    /// Accumulated correction in 2^-16 ns units, taken from the Follow_Up.
    pub correction_total: i64,
    pub origin_timestamp: SimTime,
}

impl SyncSample {
    /// Wired-hop residual: receive delay minus origin minus the correction
    /// accumulated by transparent clocks along the path.
    pub fn implied_path_delay_ns(&self) -> i128 {
        i128::from(self.followup_rx_time.ns())
            - i128::from(self.origin_timestamp.ns())
            - (i128::from(self.correction_total) >> 16)
    }
}

/// Per-endpoint recorder pairing Sync and Follow_Up messages.
#[derive(Debug, Default)]
pub struct SlaveRecorder {
    pub endpoint_id: usize,
    pending_sync: BTreeMap<u16, SimTime>,
    pub samples: Vec<SyncSample>,
    /// Every received message as (type, sequence, correction), in arrival
    /// order; compared bit-exactly against the DS-TT residence log.
    pub messages: Vec<(GptpMessageType, u16, i64)>,
    pub orphan_follow_ups: u64,
    pub sync_count: u64,
    pub follow_up_count: u64,
}

impl SlaveRecorder {
    pub fn new(endpoint_id: usize) -> Self {
        SlaveRecorder {
            endpoint_id,
            ..Default::default()
        }
    }

    pub fn record(&mut self, msg: &GptpMessage, rx_time: SimTime) {
        self.messages
            .push((msg.message_type, msg.sequence_id, msg.correction_field));
        match msg.message_type {
            GptpMessageType::Sync => {
                self.sync_count += 1;
                self.pending_sync.insert(msg.sequence_id, rx_time);
            }
            GptpMessageType::FollowUp => {
                self.follow_up_count += 1;
                match self.pending_sync.remove(&msg.sequence_id) {
                    Some(sync_rx_time) => self.samples.push(SyncSample {
                        endpoint_id: self.endpoint_id,
                        sequence_id: msg.sequence_id,
                        sync_rx_time,
                        followup_rx_time: rx_time,
                        correction_total: msg.correction_field,
                        origin_timestamp: msg.origin_timestamp,
                    }),
                    None => self.orphan_follow_ups += 1,
                }
            }
        }
    }

    pub fn received_total(&self) -> u64 {
        self.sync_count + self.follow_up_count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockRole {
    GrandMaster,
    Bridge,
    Slave,
    TransparentClock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockNode {
    pub name: String,
    /// Unset role is a configuration error the validator reports.
    pub role: Option<ClockRole>,
}

/// Static gPTP clock hierarchy: nodes plus parent→child sync paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockHierarchy {
    pub nodes: Vec<ClockNode>,
    pub edges: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HierarchyError {
    NoGrandMaster,
    DuplicateGrandMaster { names: Vec<String> },
    MissingRole { node: String },
    Unreachable { node: String },
    UnknownEdgeNode { node: String },
}

impl std::fmt::Display for HierarchyError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HierarchyError::NoGrandMaster => write!(f, "no grandmaster in hierarchy"),
            HierarchyError::DuplicateGrandMaster { names } => {
                write!(f, "more than one grandmaster: {}", names.join(", "))
            }
            HierarchyError::MissingRole { node } => write!(f, "node {node} has no role"),
            HierarchyError::Unreachable { node } => {
                write!(f, "node {node} not reachable from the grandmaster")
            }
            HierarchyError::UnknownEdgeNode { node } => {
                write!(f, "edge references unknown node {node}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyValidation {
    pub errors: Vec<HierarchyError>,
    pub registered_transparent_clocks: Vec<String>,
}

impl HierarchyValidation {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Validate the static hierarchy: exactly one grandmaster, every node has a
/// role, and every node is reachable from the grandmaster along sync paths.
/// Transparent-clock nodes are listed as registered.
pub fn validate_hierarchy(h: &ClockHierarchy) -> HierarchyValidation {
    let mut errors = Vec::new();

    let known: BTreeSet<&str> = h.nodes.iter().map(|n| n.name.as_str()).collect();
    for (a, b) in &h.edges {
        for node in [a, b] {
            if !known.contains(node.as_str()) {
                errors.push(HierarchyError::UnknownEdgeNode { node: node.clone() });
            }
        }
    }

    let masters: Vec<&ClockNode> = h
        .nodes
        .iter()
        .filter(|n| n.role == Some(ClockRole::GrandMaster))
        .collect();
    match masters.len() {
        0 => errors.push(HierarchyError::NoGrandMaster),
        1 => {}
        _ => errors.push(HierarchyError::DuplicateGrandMaster {
            names: masters.iter().map(|n| n.name.clone()).collect(),
        }),
    }

    for node in &h.nodes {
        if node.role.is_none() {
            errors.push(HierarchyError::MissingRole {
                node: node.name.clone(),
            });
        }
    }

    // Reachability from the grandmaster set (union, so a dual-grandmaster
    // mutation reports only the duplicate error, not spurious unreachables).
    let mut reached: BTreeSet<&str> = masters.iter().map(|n| n.name.as_str()).collect();
    let mut queue: VecDeque<&str> = reached.iter().copied().collect();
    while let Some(cur) = queue.pop_front() {
        for (a, b) in &h.edges {
            if a == cur && reached.insert(b.as_str()) {
                queue.push_back(b.as_str());
            }
        }
    }
    if !masters.is_empty() {
        for node in &h.nodes {
            if !reached.contains(node.name.as_str()) {
                errors.push(HierarchyError::Unreachable {
                    node: node.name.clone(),
                });
            }
        }
    }

    let registered_transparent_clocks = h
        .nodes
        .iter()
        .filter(|n| n.role == Some(ClockRole::TransparentClock))
        .map(|n| n.name.clone())
        .collect();

    HierarchyValidation {
        errors,
        registered_transparent_clocks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simkernel::NANOS_PER_MILLI;

    fn factory_hierarchy() -> ClockHierarchy {
        let node = |name: &str, role: ClockRole| ClockNode {
            name: name.to_string(),
            role: Some(role),
        };
        ClockHierarchy {
            nodes: vec![
                node("device_a", ClockRole::GrandMaster),
                node("tsn_switch", ClockRole::Bridge),
                node("bridge_5gs", ClockRole::TransparentClock),
                node("device_b0", ClockRole::Slave),
                node("device_b1", ClockRole::Slave),
                node("device_b2", ClockRole::Slave),
            ],
            edges: vec![
                ("device_a".into(), "tsn_switch".into()),
                ("tsn_switch".into(), "bridge_5gs".into()),
                ("bridge_5gs".into(), "device_b0".into()),
                ("bridge_5gs".into(), "device_b1".into()),
                ("bridge_5gs".into(), "device_b2".into()),
            ],
        }
    }

    #[test]
    fn emission_schedule_matches_count_formula() {
        // floor((10_000 - 125) / 125) + 1 = 79 pairs = 158 messages.
        let pairs = grandmaster_emit(
            125 * NANOS_PER_MILLI,
            SimTime::from_ms(125),
            SimTime::from_secs(10),
            0,
        );
        assert_eq!(pairs.len(), 79);
        assert_eq!(pairs.len() * 2, 158);
        assert_eq!(pairs[0].emit_time, SimTime::from_ms(125));
        assert_eq!(pairs[0].sync.sequence_id, 0);
        assert_eq!(pairs[78].emit_time, SimTime::from_ms(9875));
        // 3 endpoints x 158 = 474 total forwarded.
        assert_eq!(3 * pairs.len() * 2, 474);
    }

    #[test]
    fn zero_horizon_gives_empty_schedule() {
        let pairs = grandmaster_emit(125 * NANOS_PER_MILLI, SimTime::ZERO, SimTime::ZERO, 0);
        assert!(pairs.is_empty());
    }

    #[test]
    fn slave_pairs_sync_and_follow_up() {
        let mut slave = SlaveRecorder::new(0);
        let pairs = grandmaster_emit(
            125 * NANOS_PER_MILLI,
            SimTime::from_ms(125),
            SimTime::from_ms(751),
            0,
        );
        for pair in &pairs {
            slave.record(&pair.sync, pair.emit_time.plus_ns(1000));
            slave.record(&pair.follow_up, pair.emit_time.plus_ns(2000));
        }
        assert_eq!(slave.samples.len(), pairs.len());
        assert_eq!(slave.orphan_follow_ups, 0);
        assert!(slave
            .samples
            .iter()
            .all(|s| s.followup_rx_time >= s.sync_rx_time));
    }

    #[test]
    fn follow_up_without_sync_counts_orphan() {
        let mut slave = SlaveRecorder::new(0);
        let follow_up = GptpMessage {
            message_type: GptpMessageType::FollowUp,
            sequence_id: 9,
            correction_field: 0,
            origin_timestamp: SimTime::ZERO,
            domain_number: 0,
        };
        slave.record(&follow_up, SimTime::from_ms(1));
        assert_eq!(slave.orphan_follow_ups, 1);
        assert!(slave.samples.is_empty());
    }

    #[test]
    fn implied_path_delay_excludes_correction() {
        let sample = SyncSample {
            endpoint_id: 0,
            sequence_id: 0,
            sync_rx_time: SimTime::from_ns(2_502_780),
            followup_rx_time: SimTime::from_ns(2_503_756),
            correction_total: 2_499_852i64 << 16,
            origin_timestamp: SimTime::ZERO,
        };
        assert_eq!(sample.implied_path_delay_ns(), 2_503_756 - 2_499_852);
    }

    #[test]
    fn six_node_factory_topology_validates_clean() {
        let report = validate_hierarchy(&factory_hierarchy());
        assert!(report.is_valid(), "{:?}", report.errors);
        assert_eq!(report.registered_transparent_clocks, vec!["bridge_5gs"]);
    }

    #[test]
    fn dual_grandmaster_yields_exactly_that_error() {
        let mut h = factory_hierarchy();
        h.nodes[1].role = Some(ClockRole::GrandMaster);
        let report = validate_hierarchy(&h);
        assert_eq!(report.errors.len(), 1);
        assert!(matches!(
            report.errors[0],
            HierarchyError::DuplicateGrandMaster { .. }
        ));
    }

    #[test]
    fn missing_role_yields_exactly_that_error() {
        let mut h = factory_hierarchy();
        h.nodes[3].role = None;
        let report = validate_hierarchy(&h);
        assert_eq!(
            report.errors,
            vec![HierarchyError::MissingRole {
                node: "device_b0".into()
            }]
        );
    }

    #[test]
    fn unreachable_node_yields_exactly_that_error() {
        let mut h = factory_hierarchy();
        h.edges.retain(|(_, b)| b != "device_b2");
        let report = validate_hierarchy(&h);
        assert_eq!(
            report.errors,
            vec![HierarchyError::Unreachable {
                node: "device_b2".into()
            }]
        );
    }
}
