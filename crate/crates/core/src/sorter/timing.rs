use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::SorterError;
use crate::seed::derive_seed;

/// Per-droplet inference latency in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatencyModel {
    Constant(f64),
    Uniform {
        min: f64,
        max: f64,
    },
    /// Normal, truncated at zero.
    Normal {
        mean: f64,
        sd: f64,
    },
}

impl LatencyModel {
    pub fn validate(&self) -> Result<(), SorterError> {
        let ok = match *self {
            LatencyModel::Constant(c) => c >= 0.0 && c.is_finite(),
            LatencyModel::Uniform { min, max } => min >= 0.0 && max >= min && max.is_finite(),
            LatencyModel::Normal { mean, sd } => mean.is_finite() && sd >= 0.0 && sd.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(SorterError::Config(format!("latency model {self:?}")))
        }
    }

    /// Latency for droplet `id`; depends only on `(seed, id)`.
    pub fn sample(&self, seed: u64, id: u64) -> f64 {
        match *self {
            LatencyModel::Constant(c) => c,
            LatencyModel::Uniform { min, max } => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, id));
                min + (max - min) * rng.gen::<f64>()
            }
            LatencyModel::Normal { mean, sd } => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, id));
                Normal::new(mean, sd).expect("validated").sample(&mut rng).max(0.0)
            }
        }
    }
}

impl std::fmt::Display for LatencyModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LatencyModel::Constant(c) => write!(f, "{c}"),
            LatencyModel::Uniform { min, max } => write!(f, "uniform:{min}:{max}"),
            LatencyModel::Normal { mean, sd } => write!(f, "normal:{mean}:{sd}"),
        }
    }
}

impl std::str::FromStr for LatencyModel {
    type Err = SorterError;

    /// `5`, `uniform:MIN:MAX` or `normal:MEAN:SD`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || {
            SorterError::Config(format!(
                "latency `{s}`: expected NUMBER, uniform:MIN:MAX or normal:MEAN:SD"
            ))
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let parts: Vec<&str> = s.split(':').collect();
        let m = match parts.as_slice() {
            [c] => LatencyModel::Constant(num(c)?),
            ["uniform", a, b] => LatencyModel::Uniform {
                min: num(a)?,
                max: num(b)?,
            },
            ["normal", a, b] => LatencyModel::Normal {
                mean: num(a)?,
                sd: num(b)?,
            },
            _ => return Err(bad()),
        };
        m.validate()?;
        Ok(m)
    }
}

/// Timing budget of the sort loop. All durations in milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingModel {
    pub grab_ms: f64,
    pub infer: LatencyModel,
    pub latency_seed: u64,
    pub deadline_ms: f64,
    pub pulse_ms: f64,
    /// Carrier frequency of the deflection pulse; reported only.
    pub pulse_freq_hz: f64,
    pub imaging_to_junction_um: f64,
    /// `None` picks the speed at which the junction headroom equals `deadline_ms`.
    pub droplet_speed_um_per_ms: Option<f64>,
    /// Frame save time at 478 x 478 px; scales with pixel count.
    pub save_ms: f64,
    /// Saving blocks the classifier after each on-time decision.
    pub save_in_loop: bool,
}

impl Default for TimingModel {
    fn default() -> Self {
        Self {
            grab_ms: 1.0,
            infer: LatencyModel::Constant(5.0),
            latency_seed: 0,
            deadline_ms: 12.0,
            pulse_ms: 15.0,
            pulse_freq_hz: 10_000.0,
            imaging_to_junction_um: 450.0,
            droplet_speed_um_per_ms: None,
            save_ms: 22.0,
            save_in_loop: false,
        }
    }
}

impl TimingModel {
    pub const SAVE_REFERENCE_PX: usize = 478;

    pub fn validate(&self) -> Result<(), SorterError> {
        self.infer.validate()?;
        let bad = |m: &str| Err(SorterError::Config(m.to_string()));
        if !(self.deadline_ms > 0.0) {
            return bad("deadline_ms must be > 0");
        }
        if !(self.grab_ms >= 0.0 && self.pulse_ms >= 0.0 && self.save_ms >= 0.0) {
            return bad("durations must be >= 0");
        }
        if !(self.imaging_to_junction_um >= 0.0) {
            return bad("imaging_to_junction_um must be >= 0");
        }
        if let Some(v) = self.droplet_speed_um_per_ms {
            if !(v > 0.0) {
                return bad("droplet speed must be > 0");
            }
        }
        Ok(())
    }

    pub fn droplet_speed_um_per_ms(&self) -> f64 {
        self.droplet_speed_um_per_ms
            .unwrap_or(self.imaging_to_junction_um / self.deadline_ms)
    }

    /// Travel time from the imaging point to the sorting junction.
    pub fn junction_headroom_ms(&self) -> f64 {
        let v = self.droplet_speed_um_per_ms();
        if self.imaging_to_junction_um == 0.0 || !v.is_finite() || v == 0.0 {
            return self.deadline_ms;
        }
        self.imaging_to_junction_um / v
    }

    /// A decision later than this (measured from the trigger) is a timeout.
    pub fn effective_deadline_ms(&self) -> f64 {
        self.deadline_ms.min(self.junction_headroom_ms())
    }

    pub fn save_ms_for(&self, image_px: usize) -> f64 {
        let r = image_px as f64 / Self::SAVE_REFERENCE_PX as f64;
        self.save_ms * r * r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_headroom_equals_deadline() {
        let t = TimingModel::default();
        assert_eq!(t.droplet_speed_um_per_ms(), 37.5);
        assert_eq!(t.junction_headroom_ms(), 12.0);
        assert_eq!(t.effective_deadline_ms(), 12.0);
        let slow = TimingModel {
            droplet_speed_um_per_ms: Some(90.0),
            ..TimingModel::default()
        };
        assert_eq!(slow.effective_deadline_ms(), 5.0);
        assert!((t.save_ms_for(239) - 5.5).abs() < 1e-12);
    }

    #[test]
    fn latency_parse_and_sample() {
        assert_eq!("7.5".parse::<LatencyModel>().unwrap(), LatencyModel::Constant(7.5));
        let u: LatencyModel = "uniform:2:8".parse().unwrap();
        for id in 0..100 {
            let v = u.sample(3, id);
            assert!((2.0..8.0).contains(&v));
            assert_eq!(v, u.sample(3, id));
        }
        let n: LatencyModel = "normal:1:5".parse().unwrap();
        assert!((0..500).all(|id| n.sample(1, id) >= 0.0));
        assert!("uniform:5:1".parse::<LatencyModel>().is_err());
        assert!("gamma:1:1".parse::<LatencyModel>().is_err());
        assert_eq!(u.to_string().parse::<LatencyModel>().unwrap(), u);
    }

    #[test]
    fn rejects_zero_deadline() {
        let t = TimingModel {
            deadline_ms: 0.0,
            ..TimingModel::default()
        };
        assert!(t.validate().is_err());
    }
}
