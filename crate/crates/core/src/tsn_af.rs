//! TSN Application Function: subscribes to DS-TT residence samples, keeps
//! live min/max/avg bridge delay, and checks stream reservations for
//! latency-bound violations.

use serde::{Deserialize, Serialize};

use crate::simkernel::SimTime;

/// One CNC stream reservation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamReservation {
    pub stream_id: String,
    pub bandwidth_bps: u64,
    pub max_latency_ns: u64,
}

/// Which measurement a reservation bound is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationMode {
    /// Every individual residence sample (stricter, default).
    #[default]
    PerSample,
    /// The running mean at the time of the sample.
    RunningAverage,
}

/// Incrementally maintained bridge delay statistics. The mean is kept exact
/// as an integer sum plus count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BridgeDelayStats {
    pub min_ns: u64,
    pub max_ns: u64,
    sum_ns: u128,
    pub sample_count: u64,
}

impl BridgeDelayStats {
    pub fn observe(&mut self, sample_ns: u64) {
        if self.sample_count == 0 {
            self.min_ns = sample_ns;
            self.max_ns = sample_ns;
        } else {
            self.min_ns = self.min_ns.min(sample_ns);
            self.max_ns = self.max_ns.max(sample_ns);
        }
        self.sum_ns += u128::from(sample_ns);
        self.sample_count += 1;
    }

    pub fn mean_ns(&self) -> Option<f64> {
        (self.sample_count > 0).then(|| self.sum_ns as f64 / self.sample_count as f64)
    }

    pub fn sum_ns(&self) -> u128 {
        self.sum_ns
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub stream_id: String,
    pub endpoint_id: usize,
    pub measured_ns: u64,
    pub bound_ns: u64,
    pub time: SimTime,
}

/// The AF itself: per-endpoint stats plus the violation log.
#[derive(Debug, Default)]
pub struct TsnAf {
    reservations: Vec<StreamReservation>,
    mode: ViolationMode,
    per_endpoint: Vec<BridgeDelayStats>,
    pub total: BridgeDelayStats,
    pub violations: Vec<Violation>,
}

impl TsnAf {
    pub fn new(
        reservations: Vec<StreamReservation>,
        mode: ViolationMode,
        endpoint_count: usize,
    ) -> Self {
        TsnAf {
            reservations,
            mode,
            per_endpoint: vec![BridgeDelayStats::default(); endpoint_count],
            total: BridgeDelayStats::default(),
            violations: Vec::new(),
        }
    }

    /// Feed one residence sample from endpoint `endpoint_id` observed at
    /// `time`. Every sample exceeding a stream bound is logged.
    pub fn observe_residence(&mut self, endpoint_id: usize, sample_ns: u64, time: SimTime) {
        self.per_endpoint[endpoint_id].observe(sample_ns);
        self.total.observe(sample_ns);
        let measured = match self.mode {
            ViolationMode::PerSample => sample_ns,
            ViolationMode::RunningAverage => {
                self.total.mean_ns().map(|m| m.round() as u64).unwrap_or(0)
            }
        };
        for res in &self.reservations {
            if measured > res.max_latency_ns {
                self.violations.push(Violation {
                    stream_id: res.stream_id.clone(),
                    endpoint_id,
                    measured_ns: measured,
                    bound_ns: res.max_latency_ns,
                    time,
                });
            }
        }
    }

    pub fn endpoint_stats(&self, endpoint_id: usize) -> &BridgeDelayStats {
        &self.per_endpoint[endpoint_id]
    }

    pub fn reservations(&self) -> &[StreamReservation] {
        &self.reservations
    }
}

/// Standalone reservation-file loader with field semantics identical to the
/// entries embedded in the scenario config.
pub fn load_reservations_file(text: &str) -> Result<Vec<StreamReservation>, toml::de::Error> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct File {
        #[serde(default)]
        reservations: Vec<StreamReservation>,
    }
    toml::from_str::<File>(text).map(|f| f.reservations)
}
