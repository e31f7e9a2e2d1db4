//! Link impairment: delay, jitter and telemetry loss.
//!
//! Every delay is drawn from a generator keyed by the link seed and the
//! frame's identity (kind and sequence number) rather than by arrival order.
//! Two links with the same model therefore treat the same frame identically,
//! whatever else they carry.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::protocol::{Frame, FrameKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpairmentModel {
    pub base_delay_ms: f64,
    /// Half-width of the uniform jitter added to the base delay.
    pub jitter_ms: f64,
    /// Drop probability for telemetry frames only.
    pub telemetry_drop_prob: f64,
    pub seed: u64,
}

impl Default for ImpairmentModel {
    fn default() -> Self {
        Self::none()
    }
}

impl ImpairmentModel {
    pub fn none() -> Self {
        ImpairmentModel {
            base_delay_ms: 0.0,
            jitter_ms: 0.0,
            telemetry_drop_prob: 0.0,
            seed: 0,
        }
    }

    pub fn lan() -> Self {
        ImpairmentModel {
            base_delay_ms: 0.5,
            jitter_ms: 0.2,
            telemetry_drop_prob: 0.0,
            seed: 0,
        }
    }

    pub fn five_g() -> Self {
        ImpairmentModel {
            base_delay_ms: 20.0,
            jitter_ms: 10.0,
            telemetry_drop_prob: 0.001,
            seed: 0,
        }
    }

    /// Looks up a named preset: `none`, `lan` or `5g`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "none" => Some(Self::none()),
            "lan" => Some(Self::lan()),
            "5g" => Some(Self::five_g()),
            _ => None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.base_delay_ms == 0.0 && self.jitter_ms == 0.0 && self.telemetry_drop_prob == 0.0
    }

    /// Largest one-way delay the model can produce.
    pub fn max_delay_ms(&self) -> f64 {
        self.base_delay_ms + self.jitter_ms
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.base_delay_ms.is_finite() && self.base_delay_ms >= 0.0) {
            return Err("base_delay_ms must be a non-negative number");
        }
        if !(self.jitter_ms.is_finite() && self.jitter_ms >= 0.0) {
            return Err("jitter_ms must be a non-negative number");
        }
        if !(0.0..1.0).contains(&self.telemetry_drop_prob) {
            return Err("telemetry_drop_prob must be in [0, 1)");
        }
        Ok(())
    }
}

/// One direction of an impaired link. Dispatch times never go backwards, so
/// frames leave in the order they entered.
#[derive(Debug, Clone)]
pub struct DelayLine {
    model: ImpairmentModel,
    salt: u64,
    last_dispatch_us: u64,
    unsequenced: [u64; 2],
    forwarded: u64,
    dropped: u64,
}

impl DelayLine {
    /// `salt` separates the two directions of a link that share one model.
    pub fn new(model: ImpairmentModel, salt: u64) -> Self {
        DelayLine {
            model,
            salt,
            last_dispatch_us: 0,
            unsequenced: [0; 2],
            forwarded: 0,
            dropped: 0,
        }
    }

    pub fn model(&self) -> &ImpairmentModel {
        &self.model
    }

    /// Dispatch time for a frame offered at `now_us`, or `None` if it is
    /// dropped.
    pub fn schedule(&mut self, now_us: u64, frame: &Frame) -> Option<u64> {
        let kind = frame.kind();
        let ordinal = match frame.seq() {
            Some(seq) => seq,
            None => {
                let slot = usize::from(kind == FrameKind::Error);
                self.unsequenced[slot] += 1;
                self.unsequenced[slot]
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(frame_key(self.model.seed, self.salt, kind, ordinal));
        let jitter_unit: f64 = rng.random::<f64>() * 2.0 - 1.0;
        let drop_draw: f64 = rng.random::<f64>();

        if kind == FrameKind::Imu && drop_draw < self.model.telemetry_drop_prob {
            self.dropped += 1;
            return None;
        }
        let delay_ms = (self.model.base_delay_ms + self.model.jitter_ms * jitter_unit).max(0.0);
        let scheduled = now_us + libm::round(delay_ms * 1000.0) as u64;
        let dispatch = scheduled.max(self.last_dispatch_us);
        self.last_dispatch_us = dispatch;
        self.forwarded += 1;
        Some(dispatch)
    }

    pub fn forwarded(&self) -> u64 {
        self.forwarded
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a list of integers into one well-spread seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5EED, |k, &p| splitmix64(k ^ splitmix64(p)))
}

fn frame_key(seed: u64, salt: u64, kind: FrameKind, ordinal: u64) -> u64 {
    let k = splitmix64(seed ^ splitmix64(salt));
    let k = splitmix64(k ^ kind as u64);
    splitmix64(k ^ ordinal)
}

/// Per-link counters and round-trip samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkStats {
    pub frames_forwarded: u64,
    pub frames_dropped: u64,
    pub rtt_ms: Vec<f64>,
    pub rtt_lost: u64,
}

impl LinkStats {
    pub fn median_rtt_ms(&self) -> Option<f64> {
        crate::stats::median(&self.rtt_ms)
    }
}

pub const RTT_TIMEOUT_US: u64 = 3_000_000;

/// Pairs heartbeats with their acks. Unanswered heartbeats older than the
/// timeout count as lost samples.
#[derive(Debug, Clone, Default)]
pub struct RttTracker {
    outstanding: BTreeMap<u64, u64>,
}

impl RttTracker {
    pub fn sent(&mut self, seq: u64, now_us: u64) {
        self.outstanding.insert(seq, now_us);
    }

    /// Records the sample for `ack_seq`, returning it in milliseconds.
    pub fn acked(&mut self, ack_seq: u64, now_us: u64, stats: &mut LinkStats) -> Option<f64> {
        let sent = self.outstanding.remove(&ack_seq)?;
        let rtt = now_us.saturating_sub(sent) as f64 / 1000.0;
        stats.rtt_ms.push(rtt);
        Some(rtt)
    }

    pub fn expire(&mut self, now_us: u64, stats: &mut LinkStats) {
        let before = self.outstanding.len();
        self.outstanding.retain(|_, &mut sent| now_us < sent + RTT_TIMEOUT_US);
        stats.rtt_lost += (before - self.outstanding.len()) as u64;
    }

    pub fn outstanding(&self) -> usize {
        self.outstanding.len()
    }
}
