//! Tip IMU emulation: true pose plus Gaussian noise, quantised.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::probe::TipPose;

/// Noise and resolution of the emulated sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuModel {
    pub sigma_deg: f64,
    pub quantum_deg: f64,
}

impl Default for ImuModel {
    /// 3σ stays under the sensor's rated 0.1° accuracy.
    fn default() -> Self {
        ImuModel {
            sigma_deg: 0.03,
            quantum_deg: 0.01,
        }
    }
}

impl ImuModel {
    pub fn noiseless() -> Self {
        ImuModel {
            sigma_deg: 0.0,
            quantum_deg: 0.01,
        }
    }

    pub fn quantize(&self, deg: f64) -> f64 {
        if self.quantum_deg > 0.0 {
            libm::round(deg / self.quantum_deg) * self.quantum_deg
        } else {
            deg
        }
    }
}

/// One IMU sample. Field order matches the wire format.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ImuReading {
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    pub seq: u64,
    pub ts_ms: u64,
}

/// Seeded sampler; sequence numbers start at 1 and increase by one.
#[derive(Debug, Clone)]
pub struct ImuSampler {
    model: ImuModel,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
    seq: u64,
}

impl ImuSampler {
    pub fn new(model: ImuModel, seed: u64) -> Self {
        let noise = (model.sigma_deg > 0.0)
            .then(|| Normal::new(0.0, model.sigma_deg).expect("finite positive sigma"));
        ImuSampler {
            model,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seq: 0,
        }
    }

    pub fn model(&self) -> ImuModel {
        self.model
    }

    pub fn sample(&mut self, pose: &TipPose, ts_ms: u64) -> ImuReading {
        let mut angle = |true_deg: f64| {
            let noisy = match &self.noise {
                Some(n) => true_deg + n.sample(&mut self.rng),
                None => true_deg,
            };
            self.model.quantize(noisy)
        };
        let roll_deg = angle(pose.roll_deg);
        let pitch_deg = angle(pose.pitch_deg);
        let yaw_deg = angle(pose.yaw_deg);
        self.seq += 1;
        ImuReading {
            roll_deg,
            pitch_deg,
            yaw_deg,
            seq: self.seq,
            ts_ms,
        }
    }
}
