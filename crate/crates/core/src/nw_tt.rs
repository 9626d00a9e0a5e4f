//! Network-side TSN Translator: classifies TSN-ingress frames, strips the
//! VLAN tag and maps PCP to DSCP for data traffic, wraps and replicates
//! gPTP frames toward every registered endpoint, and rebuilds Ethernet
//! frames on the egress (5GS → TSN) path.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::frames::{
    encode_frame, wrap_residence, CoreDatagram, CoreProtocol, EthernetFrame, MacAddr, VlanTag,
    GPTP_UDP_PORT,
};
use crate::qos::QosProfile;
use crate::simkernel::SimTime;

/// Lowest NR node identifier; anything below is an LTE id or invalid.
pub const NR_NODE_ID_FLOOR: u16 = 2049;

/// Downstream TSN device address bound to the UE serving it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EndpointBinding {
    pub downstream_addr: u32,
    pub ue_id: u16,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BindingError {
    #[error("no endpoints registered")]
    Empty,
    #[error("unknown ue name {0:?}")]
    UnknownUe(String),
    #[error("ue id {0} outside the NR range (>= {NR_NODE_ID_FLOOR})")]
    UeIdOutOfNrRange(u16),
    #[error("duplicate downstream address {0:#010x}")]
    DuplicateAddress(u32),
}

/// Resolve {address, ue-name} pairs against the node registry into
/// validated bindings.
pub fn register_endpoints(
    pairs: &[(u32, String)],
    registry: &BTreeMap<String, u16>,
) -> Result<Vec<EndpointBinding>, BindingError> {
    if pairs.is_empty() {
        return Err(BindingError::Empty);
    }
    let mut bindings = Vec::with_capacity(pairs.len());
    for (addr, ue_name) in pairs {
        let ue_id = *registry
            .get(ue_name)
            .ok_or_else(|| BindingError::UnknownUe(ue_name.clone()))?;
        if ue_id < NR_NODE_ID_FLOOR {
            return Err(BindingError::UeIdOutOfNrRange(ue_id));
        }
        if bindings
            .iter()
            .any(|b: &EndpointBinding| b.downstream_addr == *addr)
        {
            return Err(BindingError::DuplicateAddress(*addr));
        }
        bindings.push(EndpointBinding {
            downstream_addr: *addr,
            ue_id,
        });
    }
    Ok(bindings)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NwTtCounters {
    pub frames_in: u64,
    pub gptp_wrapped: u64,
    pub data_translated: u64,
    pub egress_rebuilt: u64,
    pub dropped_unroutable: u64,
    pub routing_errors: u64,
    pub gptp_on_egress_rejected: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NwTtError {
    #[error("no route for destination mac {0}")]
    UnroutableMac(MacAddr),
    #[error("no mac table entry for address {0:#010x}")]
    UnknownEgressAddress(u32),
    #[error("gptp frame on the 5GS->TSN egress path is not supported")]
    GptpOnEgress,
}

pub struct NwTt {
    bindings: Vec<EndpointBinding>,
    profile: QosProfile,
    port_id: u16,
    addr: u32,
    mac: MacAddr,
    /// DSCP assigned to wrapped gPTP datagrams (untagged frames map to
    /// best effort unless overridden in config).
    gptp_dscp: u8,
    default_vid: u16,
    /// Static data-plane routing: destination MAC -> downstream address.
    addr_by_mac: BTreeMap<MacAddr, u32>,
    /// Static egress table: address -> MAC for rebuilt frames.
    mac_by_addr: BTreeMap<u32, MacAddr>,
    pub counters: NwTtCounters,
}

/// Result of translating one TSN-ingress frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TsnIngress {
    /// One wrapped copy per binding, all sharing the same ingress stamp.
    Gptp(Vec<CoreDatagram>),
    Data(CoreDatagram),
}

impl NwTt {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        bindings: Vec<EndpointBinding>,
        profile: QosProfile,
        port_id: u16,
        addr: u32,
        mac: MacAddr,
        gptp_dscp: u8,
        default_vid: u16,
    ) -> Self {
        NwTt {
            bindings,
            profile,
            port_id,
            addr,
            mac,
            gptp_dscp,
            default_vid,
            addr_by_mac: BTreeMap::new(),
            mac_by_addr: BTreeMap::new(),
            counters: NwTtCounters::default(),
        }
    }

    pub fn bindings(&self) -> &[EndpointBinding] {
        &self.bindings
    }

    pub fn port_id(&self) -> u16 {
        self.port_id
    }

    /// Install a static address-table entry (both directions).
    pub fn add_route(&mut self, mac: MacAddr, addr: u32) {
        self.addr_by_mac.insert(mac, addr);
        self.mac_by_addr.insert(addr, mac);
    }

    /// TSN → 5GS. gPTP frames are wrapped with the current time as ingress
    /// stamp and replicated to every binding; data frames lose their VLAN
    /// tag and carry `map_pcp_to_dscp(pcp)` instead. Untagged data frames
    /// are treated as PCP 0.
    pub fn on_tsn_ingress(
        &mut self,
        frame: &EthernetFrame,
        now: SimTime,
    ) -> Result<TsnIngress, NwTtError> {
        self.counters.frames_in += 1;
        if frame.is_gptp() {
            let wrapped = wrap_residence(&encode_frame(frame), now, self.port_id);
            let copies: Vec<CoreDatagram> = self
                .bindings
                .iter()
                .map(|binding| {
                    CoreDatagram::new(
                        self.addr,
                        binding.downstream_addr,
                        self.gptp_dscp,
                        CoreProtocol::Udp {
                            src_port: GPTP_UDP_PORT,
                            dst_port: GPTP_UDP_PORT,
                        },
                        wrapped.clone(),
                    )
                    .expect("validated gptp dscp")
                })
                .collect();
            self.counters.gptp_wrapped += copies.len() as u64;
            Ok(TsnIngress::Gptp(copies))
        } else {
            let pcp = frame.vlan.map(|tag| tag.pcp()).unwrap_or(0);
            let dscp = self.profile.map_pcp_to_dscp(pcp);
            let dst_addr = match self.addr_by_mac.get(&frame.dst_mac) {
                Some(addr) => *addr,
                None => {
                    self.counters.dropped_unroutable += 1;
                    log::warn!("nw-tt: dropping frame to unknown mac {}", frame.dst_mac);
                    return Err(NwTtError::UnroutableMac(frame.dst_mac));
                }
            };
            self.counters.data_translated += 1;
            Ok(TsnIngress::Data(
                CoreDatagram::new(
                    self.addr,
                    dst_addr,
                    dscp,
                    CoreProtocol::Raw,
                    frame.payload.clone(),
                )
                .expect("pcp-derived dscp is in range"),
            ))
        }
    }

    /// 5GS → TSN. Rebuild an Ethernet frame for reverse traffic, resolving
    /// the destination MAC from the static table and restoring the VLAN
    /// priority from the DSCP.
    pub fn on_core_egress(&mut self, datagram: &CoreDatagram) -> Result<EthernetFrame, NwTtError> {
        if datagram.is_gptp_transport() {
            // No such flow exists in the validated topology; reject loudly
            // rather than guess.
            self.counters.gptp_on_egress_rejected += 1;
            return Err(NwTtError::GptpOnEgress);
        }
        let dst_mac = match self.mac_by_addr.get(&datagram.dst_addr) {
            Some(mac) => *mac,
            None => {
                self.counters.routing_errors += 1;
                log::warn!(
                    "nw-tt: egress datagram to unknown address {:#010x}",
                    datagram.dst_addr
                );
                return Err(NwTtError::UnknownEgressAddress(datagram.dst_addr));
            }
        };
        let pcp = self.profile.map_dscp_to_pcp(datagram.dscp());
        let frame = EthernetFrame::new(
            dst_mac,
            self.mac,
            Some(VlanTag::new(pcp, false, self.default_vid).expect("valid rebuilt tag")),
            crate::DATA_ETHERTYPE,
            datagram.payload.clone(),
        )
        .expect("valid rebuilt frame");
        self.counters.egress_rebuilt += 1;
        Ok(frame)
    }
}
