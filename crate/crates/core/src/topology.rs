//! Static network plan and the wired-link delay model.
//!
//! The validated chain is Device A ↔ switch ↔ NW-TT ↔ UPF ↔ gNB ↔
//! {UE_i ↔ DS-TT_i ↔ Device B_i}. Wired hops are FIFO store-and-forward
//! links with propagation plus serialization delay; the switch relays with
//! zero processing delay.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::frames::MacAddr;
use crate::nw_tt::NR_NODE_ID_FLOOR;
use crate::simkernel::{SimTime, NANOS_PER_SEC};

/// Unidirectional FIFO link. Serialization starts when both the packet has
/// arrived and the previous transmission finished, so per-link ordering is
/// preserved under all loads.
#[derive(Debug, Clone)]
pub struct WiredLink {
    pub propagation_ns: u64,
    pub rate_bps: u64,
    busy_until: SimTime,
}

impl WiredLink {
    pub fn new(propagation_ns: u64, rate_bps: u64) -> Self {
        assert!(rate_bps > 0);
        WiredLink {
            propagation_ns,
            rate_bps,
            busy_until: SimTime::ZERO,
        }
    }

    pub fn serialization_ns(&self, payload_bytes: usize) -> u64 {
        (payload_bytes as u64 * 8).saturating_mul(NANOS_PER_SEC) / self.rate_bps
    }

    /// Arrival time of a packet handed to the link at `depart`.
    pub fn transit(&mut self, payload_bytes: usize, depart: SimTime) -> SimTime {
        let start = depart.max(self.busy_until);
        let end_of_tx = start.plus_ns(self.serialization_ns(payload_bytes));
        self.busy_until = end_of_tx;
        end_of_tx.plus_ns(self.propagation_ns)
    }
}

/// Fixed address plan for the desk-scale topology.
pub const DEVICE_A_ADDR: u32 = 0x0A00_0001; // 10.0.0.1
pub const NW_TT_ADDR: u32 = 0x0A00_0002; // 10.0.0.2

pub fn endpoint_addr(index: usize) -> u32 {
    0x0A00_0100 + 1 + index as u32 // 10.0.1.{i+1}
}

pub const DEVICE_A_MAC: MacAddr = MacAddr([0x02, 0, 0, 0, 0, 1]);
pub const NW_TT_MAC: MacAddr = MacAddr([0x02, 0, 0, 0, 0, 10]);

pub fn device_b_mac(index: usize) -> MacAddr {
    MacAddr([0x02, 0, 0, 0, 1, index as u8])
}

pub fn ue_name(index: usize) -> String {
    format!("ue{index}")
}

pub fn nr_node_id(index: usize) -> u16 {
    NR_NODE_ID_FLOOR + index as u16
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("endpoint_count must be >= 1")]
    NoEndpoints,
}

/// Node registry plus per-hop link parameters, computed from the scenario.
#[derive(Debug, Clone)]
pub struct Topology {
    pub endpoint_count: usize,
    /// UE name -> NR node identifier, assigned sequentially from 2049.
    pub registry: BTreeMap<String, u16>,
    pub link_rate_bps: u64,
    pub propagation_ns: u64,
}

impl Topology {
    pub fn build(
        endpoint_count: usize,
        link_rate_bps: u64,
        propagation_ns: u64,
    ) -> Result<Self, TopologyError> {
        if endpoint_count == 0 {
            return Err(TopologyError::NoEndpoints);
        }
        let registry = (0..endpoint_count)
            .map(|i| (ue_name(i), nr_node_id(i)))
            .collect();
        Ok(Topology {
            endpoint_count,
            registry,
            link_rate_bps,
            propagation_ns,
        })
    }

    pub fn link(&self) -> WiredLink {
        WiredLink::new(self.propagation_ns, self.link_rate_bps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serialization_plus_propagation() {
        // 100 B at 1 Gbps with 1 us propagation: 800 ns + 1000 ns.
        let mut link = WiredLink::new(1_000, 1_000_000_000);
        let arrival = link.transit(100, SimTime::ZERO);
        assert_eq!(arrival, SimTime::from_ns(1_800));
    }

    #[test]
    fn zero_size_zero_propagation_is_instant() {
        let mut link = WiredLink::new(0, 1_000_000_000);
        assert_eq!(link.transit(0, SimTime::from_ns(5)), SimTime::from_ns(5));
    }

    #[test]
    fn fifo_order_preserved() {
        let mut link = WiredLink::new(1_000, 1_000_000_000);
        let first = link.transit(1000, SimTime::ZERO); // tx 8 us
        let second = link.transit(100, SimTime::from_ns(10)); // queued behind
        assert_eq!(first, SimTime::from_ns(9_000));
        assert_eq!(second, SimTime::from_ns(8_000 + 800 + 1_000));
        assert!(second > first);
    }

    #[test]
    fn registry_assigns_sequential_nr_ids() {
        let topo = Topology::build(3, 1_000_000_000, 1_000).unwrap();
        assert_eq!(topo.registry["ue0"], 2049);
        assert_eq!(topo.registry["ue1"], 2050);
        assert_eq!(topo.registry["ue2"], 2051);
    }

    #[test]
    fn zero_endpoints_is_a_config_error() {
        assert_eq!(
            Topology::build(0, 1, 1).unwrap_err(),
            TopologyError::NoEndpoints
        );
    }
}
