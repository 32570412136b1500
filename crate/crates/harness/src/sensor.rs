//! Rigid force-sensor wall: samples the contact normal force at its own
//! rate, adds noise, quantizes, and low-passes online.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::analysis::Butterworth;
use crate::config::SensorSection;
use crate::HarnessError;

const STREAM: u64 = 0x7365_6e73;

#[derive(Debug, Clone)]
pub struct ForceSensor {
    period: f64,
    resolution: f64,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
    filter: Butterworth,
    samples: u64,
    raw: f64,
    filtered: f64,
}

impl ForceSensor {
    pub fn new(cfg: &SensorSection, seed: u64) -> Result<Self, HarnessError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(STREAM);
        let noise = if cfg.noise_std > 0.0 {
            Some(Normal::new(0.0, cfg.noise_std).map_err(|e| HarnessError::Config(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            period: 1.0 / cfg.rate_hz,
            resolution: cfg.resolution,
            noise,
            rng,
            filter: Butterworth::lowpass(cfg.filter_order, cfg.filter_cutoff_hz, cfg.rate_hz)?,
            samples: 0,
            raw: 0.0,
            filtered: 0.0,
        })
    }

    /// Time of the next sample.
    pub fn next_sample_time(&self) -> f64 {
        self.samples as f64 * self.period
    }

    /// Takes every sample due up to `time` with the force `f` held.
    pub fn sample_until(&mut self, time: f64, f: f64) {
        while self.next_sample_time() <= time + 1e-12 {
            let noisy = f + self.noise.map_or(0.0, |n| n.sample(&mut self.rng));
            self.raw = quantize(noisy, self.resolution);
            self.filtered = self.filter.process(self.raw);
            self.samples += 1;
        }
    }

    /// Latest quantized sample [N].
    pub fn raw(&self) -> f64 {
        self.raw
    }

    /// Latest filtered sample [N].
    pub fn filtered(&self) -> f64 {
        self.filtered
    }
}

pub fn quantize(x: f64, resolution: f64) -> f64 {
    if resolution > 0.0 {
        (x / resolution).round() * resolution
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn quantizes_to_resolution() {
        assert_abs_diff_eq!(quantize(1.234, 0.1), 1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(quantize(1.26, 0.1), 1.3, epsilon = 1e-12);
        assert_eq!(quantize(1.26, 0.0), 1.26);
    }

    #[test]
    fn samples_at_its_own_rate() {
        let cfg = SensorSection { noise_std: 0.0, ..SensorSection::default() };
        let mut s = ForceSensor::new(&cfg, 0).unwrap();
        s.sample_until(1.0, 1.8);
        assert_eq!(s.samples, 801);
        assert_abs_diff_eq!(s.raw(), 1.8, epsilon = 1e-12);
        s.sample_until(10.0, 1.8);
        assert_abs_diff_eq!(s.filtered(), 1.8, epsilon = 1e-6);
    }
}
