//! Deterministic discrete-event kernel: simulated time, event scheduling,
//! and seeded randomness.
//!
//! Time is a count of whole nanoseconds since run start. Events with equal
//! fire time are delivered in insertion order, which makes every run a pure
//! function of its inputs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

/// Simulated time in nanoseconds since run start.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

pub const NANOS_PER_MICRO: u64 = 1_000;
pub const NANOS_PER_MILLI: u64 = 1_000_000;
pub const NANOS_PER_SEC: u64 = 1_000_000_000;

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_ns(ns: u64) -> Self {
        SimTime(ns)
    }

    pub fn from_ms(ms: u64) -> Self {
        SimTime(ms * NANOS_PER_MILLI)
    }

    pub fn from_secs(s: u64) -> Self {
        SimTime(s * NANOS_PER_SEC)
    }

    pub fn ns(self) -> u64 {
        self.0
    }

    /// Elapsed nanoseconds since `earlier`. Panics if `earlier` is in the
    /// future; callers rely on kernel monotonicity to uphold that.
    pub fn since(self, earlier: SimTime) -> u64 {
        self.0
            .checked_sub(earlier.0)
            .expect("time arithmetic underflow: `earlier` is in the future")
    }

    pub fn plus_ns(self, ns: u64) -> SimTime {
        SimTime(self.0 + ns)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.0)
    }
}

/// Result of driving the event loop to a horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSummary {
    pub event_count: u64,
    pub final_time: SimTime,
}

struct Queued<T> {
    fire: SimTime,
    seq: u64,
    payload: T,
}

impl<T> PartialEq for Queued<T> {
    fn eq(&self, other: &Self) -> bool {
        self.fire == other.fire && self.seq == other.seq
    }
}
impl<T> Eq for Queued<T> {}

impl<T> PartialOrd for Queued<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so the BinaryHeap pops the smallest (fire, seq) first.
impl<T> Ord for Queued<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.fire, other.seq).cmp(&(self.fire, self.seq))
    }
}

/// Single-threaded event queue. A simulation run owns one kernel; all
/// timestamps in the system derive from its clock.
pub struct Kernel<T> {
    heap: BinaryHeap<Queued<T>>,
    next_seq: u64,
    now: SimTime,
    delivered: u64,
}

impl<T> Default for Kernel<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> Kernel<T> {
    pub fn new() -> Self {
        Kernel {
            heap: BinaryHeap::new(),
            next_seq: 0,
            now: SimTime::ZERO,
            delivered: 0,
        }
    }

    /// Current simulation time.
    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Queue `payload` for delivery at `at`. Scheduling in the past is a
    /// logic bug, not a recoverable condition.
    pub fn schedule(&mut self, at: SimTime, payload: T) {
        assert!(
            at >= self.now,
            "event scheduled in the past: at={} now={}",
            at,
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Queued {
            fire: at,
            seq,
            payload,
        });
    }

    /// Pop the next event with fire time <= `horizon`, advancing the clock
    /// to its fire time.
    pub fn pop_due(&mut self, horizon: SimTime) -> Option<(SimTime, T)> {
        match self.heap.peek() {
            Some(q) if q.fire <= horizon => {
                let q = self.heap.pop().unwrap();
                debug_assert!(q.fire >= self.now);
                self.now = q.fire;
                self.delivered += 1;
                Some((q.fire, q.payload))
            }
            _ => None,
        }
    }

    /// Deliver every event with fire time <= `horizon` in (fire, insertion)
    /// order, then advance the clock to the horizon. Events scheduled past
    /// the horizon stay queued and are never delivered.
    pub fn run_until<F>(&mut self, horizon: SimTime, mut handler: F) -> RunSummary
    where
        F: FnMut(SimTime, T, &mut Kernel<T>),
    {
        while let Some((t, ev)) = self.pop_due(horizon) {
            handler(t, ev, self);
        }
        self.now = horizon;
        RunSummary {
            event_count: self.delivered,
            final_time: horizon,
        }
    }

    pub fn pending(&self) -> usize {
        self.heap.len()
    }
}

/// FNV-1a over the stream label; stable across platforms so that
/// (seed, stream_id) always yields the same draw sequence.
fn fnv1a(label: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    hash
}

/// Seeded random stream scoped to one (component, purpose) label.
///
/// Separate labels draw from independent sequences, so e.g. toggling the
/// channel model does not perturb traffic arrival times.
pub struct RngStream {
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: &str) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&fnv1a(stream_id).to_le_bytes());
        key[16..24].copy_from_slice(&seed.rotate_left(17).to_le_bytes());
        key[24..32].copy_from_slice(&fnv1a(stream_id).rotate_left(31).to_le_bytes());
        RngStream {
            rng: ChaCha12Rng::from_seed(key),
        }
    }

    /// Exponentially distributed duration with the given mean, rounded to
    /// whole nanoseconds and clamped to at least 1 ns so every draw is
    /// strictly positive.
    pub fn draw_exponential(&mut self, mean_ns: u64) -> u64 {
        assert!(mean_ns > 0, "exponential mean must be > 0");
        let exp = Exp::new(1.0 / mean_ns as f64).expect("valid rate");
        let sample = exp.sample(&mut self.rng);
        (sample.round() as u64).max(1)
    }

    /// Log-normal multiplier with median 1.0 and the given sigma, truncated
    /// to [0.25, 4.0]. Used as the per-slot MCS efficiency draw.
    pub fn draw_efficiency(&mut self, sigma: f64) -> f64 {
        if sigma <= 0.0 {
            return 1.0;
        }
        let dist = LogNormal::new(0.0, sigma).expect("valid sigma");
        dist.sample(&mut self.rng).clamp(0.25, 4.0)
    }

    pub fn draw_bernoulli(&mut self, p: f64) -> bool {
        self.rng.gen::<f64>() < p
    }

    pub fn draw_u64(&mut self) -> u64 {
        self.rng.gen()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_tie_break_at_same_time() {
        let mut k: Kernel<&str> = Kernel::new();
        k.schedule(SimTime::from_ns(125_000_000), "a");
        k.schedule(SimTime::from_ns(125_000_000), "b");
        let mut order = Vec::new();
        k.run_until(SimTime::from_secs(1), |_, ev, _| order.push(ev));
        assert_eq!(order, vec!["a", "b"]);
    }

    #[test]
    fn schedule_at_now_runs_after_queued_now_events() {
        let mut k: Kernel<u32> = Kernel::new();
        k.schedule(SimTime::ZERO, 1);
        let mut order = Vec::new();
        k.run_until(SimTime::from_secs(1), |t, ev, k| {
            order.push(ev);
            if ev == 1 {
                // scheduled from t=0 at t=0: delivered after already-queued t=0 events
                k.schedule(t, 3);
                k.schedule(t, 4);
            }
        });
        assert_eq!(order, vec![1, 3, 4]);
    }

    #[test]
    fn events_past_horizon_never_delivered() {
        // Hand-traced 3-event schedule: 1ns, 10s, 10s+1ns with horizon 10s.
        let mut k: Kernel<u32> = Kernel::new();
        let horizon = SimTime::from_secs(10);
        k.schedule(SimTime::from_ns(1), 1);
        k.schedule(horizon, 2);
        k.schedule(horizon.plus_ns(1), 3);
        let mut seen = Vec::new();
        let summary = k.run_until(horizon, |_, ev, _| seen.push(ev));
        assert_eq!(seen, vec![1, 2]);
        assert_eq!(summary.event_count, 2);
        assert_eq!(summary.final_time, horizon);
        assert_eq!(k.pending(), 1);
    }

    #[test]
    fn empty_queue_advances_to_horizon() {
        let mut k: Kernel<u32> = Kernel::new();
        let summary = k.run_until(SimTime::from_secs(10), |_, _, _| {});
        assert_eq!(summary.event_count, 0);
        assert_eq!(summary.final_time, SimTime::from_secs(10));
        assert_eq!(k.now(), SimTime::from_secs(10));
    }

    #[test]
    fn three_events_horizon_cuts_at_two() {
        let mut k: Kernel<u32> = Kernel::new();
        k.schedule(SimTime::from_secs(1), 1);
        k.schedule(SimTime::from_secs(2), 2);
        k.schedule(SimTime::from_secs(3), 3);
        let summary = k.run_until(SimTime::from_secs(2), |_, _, _| {});
        assert_eq!(summary.event_count, 2);
    }

    #[test]
    #[should_panic(expected = "scheduled in the past")]
    fn scheduling_in_the_past_panics() {
        let mut k: Kernel<u32> = Kernel::new();
        k.schedule(SimTime::from_secs(1), 1);
        k.run_until(SimTime::from_secs(2), |_, _, k| {
            k.schedule(SimTime::ZERO, 9);
        });
    }

    #[test]
    fn now_never_decreases() {
        let mut k: Kernel<u64> = Kernel::new();
        let mut stream = RngStream::new(7, "kernel-test");
        for i in 0..1000 {
            k.schedule(SimTime::from_ns(stream.draw_u64() % 1_000_000), i);
        }
        let mut last = SimTime::ZERO;
        k.run_until(SimTime::from_ms(2), |t, _, _| {
            assert!(t >= last);
            last = t;
        });
    }

    #[test]
    fn exponential_mean_within_two_percent() {
        let mut stream = RngStream::new(42, "traffic-test");
        let mean_ns = 2 * NANOS_PER_MILLI;
        let n = 100_000u64;
        let total: u128 = (0..n)
            .map(|_| u128::from(stream.draw_exponential(mean_ns)))
            .sum();
        let observed = total as f64 / n as f64;
        let err = (observed - mean_ns as f64).abs() / mean_ns as f64;
        assert!(err < 0.02, "sample mean {observed} off by {err}");
    }

    #[test]
    fn exponential_draws_strictly_positive_and_reproducible() {
        let mut a = RngStream::new(9, "flow/x");
        let mut b = RngStream::new(9, "flow/x");
        for _ in 0..10_000 {
            let da = a.draw_exponential(2 * NANOS_PER_MILLI);
            assert!(da > 0);
            assert_eq!(da, b.draw_exponential(2 * NANOS_PER_MILLI));
        }
    }

    #[test]
    fn distinct_stream_labels_are_independent() {
        let mut a = RngStream::new(9, "flow/x");
        let mut b = RngStream::new(9, "flow/y");
        let same = (0..100).filter(|_| a.draw_u64() == b.draw_u64()).count();
        assert_eq!(same, 0);
    }
}
