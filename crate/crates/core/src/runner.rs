//! Simulation driver: builds the component graph from a scenario, runs the
//! event loop to the horizon, and assembles the run report.
//!
//! Packet handoffs between components are explicit events; wired hops add
//! FIFO serialization + propagation delay, the radio adds slotted MAC
//! scheduling plus the calibrated pipeline delay.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::core5g::{job_from_datagram, Completion, Grant, Mac, Sdap, Upf};
use crate::ds_tt::DsTt;
use crate::frames::{
    decode_datagram, decode_gptp, decode_tunnel, encode_datagram, encode_gptp, encode_tunnel,
    CoreDatagram, EthernetFrame, MacAddr, VlanTag,
};
use crate::gptp::{grandmaster_emit, validate_hierarchy, EmissionPair, SlaveRecorder};
use crate::nw_tt::{register_endpoints, NwTt, TsnIngress};
use crate::report::{self, RunReport};
use crate::scenario::ScenarioConfig;
use crate::simkernel::{Kernel, SimTime};
use crate::topology::{self, Topology, WiredLink};
use crate::traffic::{Direction, FlowSpec, PacketFate, PacketLineage};
use crate::tsn_af::TsnAf;

/// VLAN id used for every tagged frame in the desk-scale topology.
pub const DEFAULT_VID: u16 = 100;
/// NW-TT TSN-facing port id stamped into residence headers.
pub const NW_TT_PORT_ID: u16 = 1;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("clock hierarchy validation failed: {0:?}")]
    HierarchyInvalid(Vec<String>),
    #[error(transparent)]
    Config(#[from] crate::scenario::ConfigError),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Proceed even when the clock hierarchy fails validation.
    pub force: bool,
    /// Record per-slot grants for scheduler debugging.
    pub grant_trace: bool,
}

/// Report plus the bulky per-run artifacts the CLI may dump to files.
pub struct RunOutput {
    pub report: RunReport,
    pub residence_logs: Vec<Vec<crate::ds_tt::ResidenceRecord>>,
    pub grants_dl: Option<Vec<Grant>>,
    pub grants_ul: Option<Vec<Grant>>,
    pub lineages: Vec<PacketLineage>,
    pub flows: Vec<FlowSpec>,
}

enum Event {
    SlotBoundary,
    DeviceASend {
        flow_idx: usize,
        lineage: u64,
    },
    DeviceBSend {
        flow_idx: usize,
        lineage: u64,
    },
    GptpEmit {
        pair_idx: usize,
    },
    ArriveSwitchDl {
        frame: EthernetFrame,
    },
    ArriveNwTtDl {
        frame: EthernetFrame,
    },
    ArriveUpfDl {
        datagram: CoreDatagram,
    },
    ArriveGnbDl {
        bytes: Vec<u8>,
    },
    UeDeliver {
        ue_index: usize,
        completion: Box<Completion>,
    },
    ArriveDeviceB {
        endpoint: usize,
        frame: EthernetFrame,
    },
    ArriveDsTtReverse {
        endpoint: usize,
        frame: EthernetFrame,
    },
    GnbUplinkArrive {
        completion: Box<Completion>,
    },
    ArriveUpfUl {
        bytes: Vec<u8>,
    },
    ArriveNwTtUl {
        datagram: CoreDatagram,
    },
    ArriveSwitchUl {
        frame: EthernetFrame,
    },
    ArriveDeviceA {
        frame: EthernetFrame,
    },
}

struct World {
    config: ScenarioConfig,
    profile: crate::qos::QosProfile,
    flows: Vec<FlowSpec>,
    lineages: Vec<PacketLineage>,
    nw_tt: NwTt,
    ds_tts: Vec<DsTt>,
    upf: Upf,
    sdap: Sdap,
    mac_dl: Mac,
    mac_ul: Mac,
    af: TsnAf,
    slaves: Vec<SlaveRecorder>,
    emissions: Vec<EmissionPair>,
    ue_index_by_nr_id: BTreeMap<u16, usize>,
    // Downlink wired chain.
    link_a_to_switch: WiredLink,
    link_switch_to_nwtt: WiredLink,
    link_nwtt_to_upf: WiredLink,
    link_upf_to_gnb: WiredLink,
    link_dstt_to_devb: Vec<WiredLink>,
    // Uplink wired chain.
    link_devb_to_dstt: Vec<WiredLink>,
    link_gnb_to_upf: WiredLink,
    link_upf_to_nwtt: WiredLink,
    link_nwtt_to_switch: WiredLink,
    link_switch_to_a: WiredLink,
    gptp_attach_loss: u64,
}

impl World {
    fn lineage_payload(lineage: u64, payload_bytes: usize) -> Vec<u8> {
        let mut payload = vec![0u8; payload_bytes];
        payload[..8].copy_from_slice(&lineage.to_be_bytes());
        payload
    }

    fn lineage_from_payload(payload: &[u8]) -> Option<u64> {
        payload
            .get(..8)
            .map(|b| u64::from_be_bytes(b.try_into().unwrap()))
    }

    fn mark_fate(&mut self, lineage: Option<u64>, fate: PacketFate, time: Option<SimTime>) {
        if let Some(id) = lineage {
            if let Some(entry) = self.lineages.get_mut(id as usize) {
                entry.fate = fate;
                if fate == PacketFate::Delivered {
                    entry.delivered_time = time;
                }
            }
        }
    }

    fn mark_bridge_ingress(&mut self, lineage: Option<u64>, time: SimTime) {
        if let Some(entry) = lineage.and_then(|id| self.lineages.get_mut(id as usize)) {
            entry.bridge_ingress = Some(time);
        }
    }

    fn mark_bridge_egress(&mut self, lineage: Option<u64>, time: SimTime) {
        if let Some(entry) = lineage.and_then(|id| self.lineages.get_mut(id as usize)) {
            entry.bridge_egress = Some(time);
        }
    }

    fn handle(&mut self, now: SimTime, event: Event, kernel: &mut Kernel<Event>) {
        match event {
            Event::SlotBoundary => {
                let next = now.plus_ns(self.config.ran.slot_duration_ns);
                if next.ns() <= self.config.horizon_ns {
                    kernel.schedule(next, Event::SlotBoundary);
                }
                for completion in self.mac_dl.schedule_slot(now) {
                    let ue_index = self.ue_index_by_nr_id[&completion.ue];
                    kernel.schedule(
                        completion.completion_time,
                        Event::UeDeliver {
                            ue_index,
                            completion: Box::new(completion),
                        },
                    );
                }
                for completion in self.mac_ul.schedule_slot(now) {
                    kernel.schedule(
                        completion.completion_time,
                        Event::GnbUplinkArrive {
                            completion: Box::new(completion),
                        },
                    );
                }
            }

            Event::DeviceASend { flow_idx, lineage } => {
                let flow = &self.flows[flow_idx];
                let frame = EthernetFrame::new(
                    topology::device_b_mac(flow.endpoint),
                    topology::DEVICE_A_MAC,
                    Some(VlanTag::new(flow.pcp, false, DEFAULT_VID).expect("validated pcp")),
                    crate::DATA_ETHERTYPE,
                    Self::lineage_payload(lineage, flow.payload_bytes),
                )
                .expect("validated flow frame");
                let arrival = self.link_a_to_switch.transit(frame.encoded_len(), now);
                kernel.schedule(arrival, Event::ArriveSwitchDl { frame });
            }

            Event::GptpEmit { pair_idx } => {
                let pair = self.emissions[pair_idx];
                for msg in [pair.sync, pair.follow_up] {
                    let frame = EthernetFrame::new(
                        crate::frames::GPTP_MULTICAST_MAC,
                        topology::DEVICE_A_MAC,
                        None,
                        crate::frames::ETHERTYPE_GPTP,
                        encode_gptp(&msg),
                    )
                    .expect("valid gptp frame");
                    let arrival = self.link_a_to_switch.transit(frame.encoded_len(), now);
                    kernel.schedule(arrival, Event::ArriveSwitchDl { frame });
                }
            }

            Event::ArriveSwitchDl { frame } => {
                // Transparent store-and-forward relay, zero processing delay.
                let arrival = self.link_switch_to_nwtt.transit(frame.encoded_len(), now);
                kernel.schedule(arrival, Event::ArriveNwTtDl { frame });
            }

            Event::ArriveNwTtDl { frame } => match self.nw_tt.on_tsn_ingress(&frame, now) {
                Ok(TsnIngress::Gptp(copies)) => {
                    for datagram in copies {
                        let arrival = self.link_nwtt_to_upf.transit(datagram.encoded_len(), now);
                        kernel.schedule(arrival, Event::ArriveUpfDl { datagram });
                    }
                }
                Ok(TsnIngress::Data(datagram)) => {
                    self.mark_bridge_ingress(Self::lineage_from_payload(&datagram.payload), now);
                    let arrival = self.link_nwtt_to_upf.transit(datagram.encoded_len(), now);
                    kernel.schedule(arrival, Event::ArriveUpfDl { datagram });
                }
                Err(_) => {
                    let lineage = Self::lineage_from_payload(&frame.payload);
                    self.mark_fate(lineage, PacketFate::Dropped, None);
                }
            },

            Event::ArriveUpfDl { datagram } => match self.upf.classify_and_tunnel(&datagram) {
                Ok((header, _ue)) => {
                    let bytes = encode_tunnel(&header, &encode_datagram(&datagram));
                    let arrival = self.link_upf_to_gnb.transit(bytes.len(), now);
                    kernel.schedule(arrival, Event::ArriveGnbDl { bytes });
                }
                Err(_) => {
                    let lineage = if datagram.is_gptp_transport() {
                        None
                    } else {
                        Self::lineage_from_payload(&datagram.payload)
                    };
                    self.mark_fate(lineage, PacketFate::Dropped, None);
                }
            },

            Event::ArriveGnbDl { bytes } => {
                let (header, inner) = decode_tunnel(&bytes).expect("gnb receives what upf sent");
                let datagram = decode_datagram(inner).expect("tunneled datagram intact");
                let is_gptp = datagram.is_gptp_transport();
                let lineage = if is_gptp {
                    None
                } else {
                    Self::lineage_from_payload(&datagram.payload)
                };
                // RAN ingress attach gate: downlink packets before the UE's
                // radio link is established are discarded.
                if now.ns() < self.config.ran.attach_time_ns {
                    if is_gptp {
                        self.gptp_attach_loss += 1;
                    }
                    self.mark_fate(lineage, PacketFate::RadioAttachLoss, None);
                    return;
                }
                let job = job_from_datagram(datagram, now, lineage);
                self.sdap
                    .enqueue(&mut self.mac_dl, header.teid as u16, &header, is_gptp, job);
            }

            Event::UeDeliver {
                ue_index,
                completion,
            } => {
                let datagram = completion.job.datagram;
                let was_gptp = datagram.is_gptp_transport();
                match self.ds_tts[ue_index].on_ue_ingress(&datagram, now) {
                    Ok(frame) => {
                        if was_gptp {
                            let record = *self.ds_tts[ue_index]
                                .residence_log
                                .last()
                                .expect("gptp forward appends a record");
                            self.af
                                .observe_residence(ue_index, record.residence_ns, now);
                        } else {
                            self.mark_bridge_egress(
                                Self::lineage_from_payload(&frame.payload),
                                now,
                            );
                        }
                        let arrival =
                            self.link_dstt_to_devb[ue_index].transit(frame.encoded_len(), now);
                        kernel.schedule(
                            arrival,
                            Event::ArriveDeviceB {
                                endpoint: ue_index,
                                frame,
                            },
                        );
                    }
                    Err(_) => {
                        self.mark_fate(completion.job.lineage, PacketFate::Dropped, None);
                    }
                }
            }

            Event::ArriveDeviceB { endpoint, frame } => {
                if frame.is_gptp() {
                    match decode_gptp(&frame.payload) {
                        Ok(msg) => self.slaves[endpoint].record(&msg, now),
                        Err(err) => log::warn!("device_b[{endpoint}]: bad gptp frame: {err}"),
                    }
                } else {
                    let lineage = Self::lineage_from_payload(&frame.payload);
                    if let Some(id) = lineage {
                        if let Some(entry) = self.lineages.get_mut(id as usize) {
                            entry.pcp_at_sink = frame.vlan.map(|tag| tag.pcp());
                        }
                    }
                    self.mark_fate(lineage, PacketFate::Delivered, Some(now));
                }
            }

            Event::DeviceBSend { flow_idx, lineage } => {
                let flow = &self.flows[flow_idx];
                let frame = EthernetFrame::new(
                    topology::DEVICE_A_MAC,
                    topology::device_b_mac(flow.endpoint),
                    Some(VlanTag::new(flow.pcp, false, DEFAULT_VID).expect("validated pcp")),
                    crate::DATA_ETHERTYPE,
                    Self::lineage_payload(lineage, flow.payload_bytes),
                )
                .expect("validated flow frame");
                let arrival =
                    self.link_devb_to_dstt[flow.endpoint].transit(frame.encoded_len(), now);
                kernel.schedule(
                    arrival,
                    Event::ArriveDsTtReverse {
                        endpoint: flow.endpoint,
                        frame,
                    },
                );
            }

            Event::ArriveDsTtReverse { endpoint, frame } => {
                let datagram = self.ds_tts[endpoint].on_tsn_ingress(&frame);
                let lineage = Self::lineage_from_payload(&datagram.payload);
                self.mark_bridge_ingress(lineage, now);
                let nr_id = topology::nr_node_id(endpoint);
                let qfi = self.profile.map_dscp_to_qfi(datagram.dscp());
                let drb = self.sdap.select_drb(nr_id, qfi, false);
                let job = job_from_datagram(datagram, now, lineage);
                self.mac_ul.enqueue(nr_id, drb, job);
            }

            Event::GnbUplinkArrive { completion } => {
                let datagram = completion.job.datagram;
                let qfi = self.profile.map_dscp_to_qfi(datagram.dscp());
                let header = crate::frames::GtpuHeader::new(u32::from(completion.ue), qfi)
                    .expect("qfi in range");
                let bytes = encode_tunnel(&header, &encode_datagram(&datagram));
                let arrival = self.link_gnb_to_upf.transit(bytes.len(), now);
                kernel.schedule(arrival, Event::ArriveUpfUl { bytes });
            }

            Event::ArriveUpfUl { bytes } => {
                let (_header, inner) = decode_tunnel(&bytes).expect("upf receives what gnb sent");
                let datagram = decode_datagram(inner).expect("tunneled datagram intact");
                let arrival = self.link_upf_to_nwtt.transit(datagram.encoded_len(), now);
                kernel.schedule(arrival, Event::ArriveNwTtUl { datagram });
            }

            Event::ArriveNwTtUl { datagram } => {
                let lineage = Self::lineage_from_payload(&datagram.payload);
                match self.nw_tt.on_core_egress(&datagram) {
                    Ok(frame) => {
                        self.mark_bridge_egress(lineage, now);
                        let arrival = self.link_nwtt_to_switch.transit(frame.encoded_len(), now);
                        kernel.schedule(arrival, Event::ArriveSwitchUl { frame });
                    }
                    Err(_) => self.mark_fate(lineage, PacketFate::Dropped, None),
                }
            }

            Event::ArriveSwitchUl { frame } => {
                let arrival = self.link_switch_to_a.transit(frame.encoded_len(), now);
                kernel.schedule(arrival, Event::ArriveDeviceA { frame });
            }

            Event::ArriveDeviceA { frame } => {
                let lineage = Self::lineage_from_payload(&frame.payload);
                if let Some(id) = lineage {
                    if let Some(entry) = self.lineages.get_mut(id as usize) {
                        entry.pcp_at_sink = frame.vlan.map(|tag| tag.pcp());
                    }
                }
                self.mark_fate(lineage, PacketFate::Delivered, Some(now));
            }
        }
    }
}

/// Run one scenario to its horizon and assemble the report.
pub fn run(config: &ScenarioConfig, options: &RunOptions) -> Result<RunOutput, RunError> {
    config.validate()?;
    let config = config.clone();

    let hierarchy = config.resolved_hierarchy();
    let hierarchy_validation = validate_hierarchy(&hierarchy);
    if !hierarchy_validation.is_valid() && !options.force {
        return Err(RunError::HierarchyInvalid(
            hierarchy_validation
                .errors
                .iter()
                .map(|e| e.to_string())
                .collect(),
        ));
    }

    let topo = config.build_topology()?;
    let profile = config.qos.profile();

    let bindings = register_endpoints(&config.resolved_bindings()?, &topo.registry)
        .map_err(|e| crate::scenario::ConfigError::Invalid(vec![e.to_string()]))?;

    let mut nw_tt = NwTt::new(
        bindings.clone(),
        profile.clone(),
        NW_TT_PORT_ID,
        topology::NW_TT_ADDR,
        topology::NW_TT_MAC,
        0,
        DEFAULT_VID,
    );
    nw_tt.add_route(topology::DEVICE_A_MAC, topology::DEVICE_A_ADDR);
    for i in 0..topo.endpoint_count {
        nw_tt.add_route(topology::device_b_mac(i), topology::endpoint_addr(i));
    }

    let mut upf = Upf::new(profile.clone());
    let mut drb_configs = BTreeMap::new();
    let mut ue_index_by_nr_id = BTreeMap::new();
    let mut nr_ids = Vec::new();
    for (i, binding) in bindings.iter().enumerate() {
        upf.bind_tunnel(
            binding.downstream_addr,
            u32::from(binding.ue_id),
            binding.ue_id,
        );
        drb_configs.insert(binding.ue_id, config.drb_config_for(binding.ue_id));
        ue_index_by_nr_id.insert(binding.ue_id, i);
        nr_ids.push(binding.ue_id);
    }
    let sdap = Sdap::new(drb_configs, config.gptp.drb_override);

    let mac_dl = Mac::new(
        config.ran,
        config.channel,
        &nr_ids,
        config.seed,
        "dl",
        options.grant_trace,
    );
    let mac_ul = Mac::new(
        config.ran,
        config.channel,
        &nr_ids,
        config.seed,
        "ul",
        options.grant_trace,
    );

    let ds_tts: Vec<DsTt> = (0..topo.endpoint_count)
        .map(|i| {
            DsTt::new(
                i,
                profile.clone(),
                topology::device_b_mac(i),
                topology::DEVICE_A_MAC,
                topology::endpoint_addr(i),
                topology::DEVICE_A_ADDR,
                DEFAULT_VID,
            )
        })
        .collect();

    let slaves: Vec<SlaveRecorder> = (0..topo.endpoint_count).map(SlaveRecorder::new).collect();
    let af = TsnAf::new(
        config.reservations.clone(),
        config.af.violation_mode,
        topo.endpoint_count,
    );

    let flows = config.expanded_flows();
    let emissions = grandmaster_emit(
        config.gptp.interval_ns,
        SimTime::from_ns(config.gptp.start_ns),
        SimTime::from_ns(config.horizon_ns),
        config.gptp.domain,
    );

    let link = |topo: &Topology| topo.link();
    let mut world = World {
        flows: flows.clone(),
        lineages: Vec::new(),
        nw_tt,
        ds_tts,
        upf,
        sdap,
        mac_dl,
        mac_ul,
        af,
        slaves,
        emissions: emissions.clone(),
        ue_index_by_nr_id,
        link_a_to_switch: link(&topo),
        link_switch_to_nwtt: link(&topo),
        link_nwtt_to_upf: link(&topo),
        link_upf_to_gnb: link(&topo),
        link_dstt_to_devb: (0..topo.endpoint_count).map(|_| link(&topo)).collect(),
        link_devb_to_dstt: (0..topo.endpoint_count).map(|_| link(&topo)).collect(),
        link_gnb_to_upf: link(&topo),
        link_upf_to_nwtt: link(&topo),
        link_nwtt_to_switch: link(&topo),
        link_switch_to_a: link(&topo),
        gptp_attach_loss: 0,
        profile,
        config: config.clone(),
    };

    let mut kernel: Kernel<Event> = Kernel::new();
    kernel.schedule(SimTime::ZERO, Event::SlotBoundary);
    for (pair_idx, pair) in emissions.iter().enumerate() {
        kernel.schedule(pair.emit_time, Event::GptpEmit { pair_idx });
    }
    for (flow_idx, flow) in flows.iter().enumerate() {
        let mut rng = crate::simkernel::RngStream::new(config.seed, &flow.stream_label());
        for send_time in crate::traffic::generate(flow, &mut rng) {
            let lineage = world.lineages.len() as u64;
            world.lineages.push(PacketLineage {
                lineage_id: lineage,
                flow_index: flow_idx,
                sent_time: send_time,
                delivered_time: None,
                bridge_ingress: None,
                bridge_egress: None,
                pcp_at_source: flow.pcp,
                pcp_at_sink: None,
                fate: PacketFate::InFlight,
            });
            let event = match flow.direction {
                Direction::Downlink => Event::DeviceASend { flow_idx, lineage },
                Direction::Uplink => Event::DeviceBSend { flow_idx, lineage },
            };
            kernel.schedule(send_time, event);
        }
    }

    let summary = kernel.run_until(SimTime::from_ns(config.horizon_ns), |now, event, kernel| {
        world.handle(now, event, kernel)
    });

    let report = report::assemble(
        &config,
        summary,
        hierarchy_validation,
        &flows,
        &world.lineages,
        &world.nw_tt,
        &world.ds_tts,
        &world.upf,
        &world.mac_dl,
        &world.mac_ul,
        &world.af,
        &world.slaves,
        emissions.len(),
        world.gptp_attach_loss,
    );

    let residence_logs = world
        .ds_tts
        .iter()
        .map(|d| d.residence_log.clone())
        .collect();

    Ok(RunOutput {
        report,
        residence_logs,
        grants_dl: world.mac_dl.grant_trace.take(),
        grants_ul: world.mac_ul.grant_trace.take(),
        lineages: world.lineages,
        flows,
    })
}

/// Convenience wrapper discarding artifacts.
pub fn run_report(config: &ScenarioConfig, options: &RunOptions) -> Result<RunReport, RunError> {
    run(config, options).map(|out| out.report)
}

// Used by tests and the CLI to locate a mac address for assertions.
pub fn device_b_mac(index: usize) -> MacAddr {
    topology::device_b_mac(index)
}
