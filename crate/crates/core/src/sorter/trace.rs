use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::SorterError;

/// Sampled photodetector voltage.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotodetectorTrace {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
    pub t0_ms: f64,
}

impl PhotodetectorTrace {
    pub fn validate(&self) -> Result<(), SorterError> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(SorterError::Config(format!("sample rate {}", self.sample_rate)));
        }
        if let Some(i) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(SorterError::Config(format!("non-finite sample at index {i}")));
        }
        Ok(())
    }

    pub fn time_ms(&self, index: usize) -> f64 {
        self.t0_ms + index as f64 * 1000.0 / self.sample_rate
    }

    pub fn duration_ms(&self) -> f64 {
        self.samples.len() as f64 * 1000.0 / self.sample_rate
    }
}

/// Shape of one droplet transit: a plateau `width_ms` long with linear edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceShape {
    pub width_ms: f64,
    pub edge_ms: f64,
    pub amplitude: f64,
    pub baseline: f64,
    pub noise_sigma: f64,
    pub sample_rate: f64,
}

impl Default for TraceShape {
    fn default() -> Self {
        Self {
            width_ms: 2.0,
            edge_ms: 0.2,
            amplitude: 1.0,
            baseline: 0.0,
            noise_sigma: 0.02,
            sample_rate: 20_000.0,
        }
    }
}

/// Trace covering `[0, duration_ms)` with one excursion starting at every pass
/// time. Returns warnings for excursions that run into each other.
pub fn synthesize_trace(
    pass_times_ms: &[f64],
    shape: &TraceShape,
    duration_ms: f64,
    seed: u64,
) -> Result<(PhotodetectorTrace, Vec<String>), SorterError> {
    if !(shape.sample_rate > 0.0) || shape.width_ms < 0.0 || shape.edge_ms < 0.0 || shape.noise_sigma < 0.0 {
        return Err(SorterError::Config(format!("bad trace shape {shape:?}")));
    }
    if pass_times_ms.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SorterError::Config("pass times must be strictly increasing".into()));
    }
    let mut warnings = Vec::new();
    let span = shape.width_ms + 2.0 * shape.edge_ms;
    for w in pass_times_ms.windows(2) {
        if w[1] - w[0] < span {
            warnings.push(format!(
                "excursions at {:.3} ms and {:.3} ms overlap ({:.3} ms apart, each {:.3} ms wide)",
                w[0],
                w[1],
                w[1] - w[0],
                span
            ));
        }
    }

    let n = (duration_ms.max(0.0) * shape.sample_rate / 1000.0).round() as usize;
    let mut samples = vec![shape.baseline; n];
    let dt = 1000.0 / shape.sample_rate;
    for &t in pass_times_ms {
        let first = ((t / dt).floor().max(0.0)) as usize;
        let last = (((t + span) / dt).ceil() as usize).min(n);
        for (i, s) in samples.iter_mut().enumerate().take(last).skip(first) {
            let u = i as f64 * dt - t;
            let level = if u < 0.0 || u > span {
                0.0
            } else if u < shape.edge_ms {
                u / shape.edge_ms
            } else if u <= shape.edge_ms + shape.width_ms {
                1.0
            } else {
                (span - u) / shape.edge_ms
            };
            *s = s.max(shape.baseline + shape.amplitude * level);
        }
    }
    if shape.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, shape.noise_sigma).expect("sigma checked");
        for s in samples.iter_mut() {
            *s += noise.sample(&mut rng);
        }
    }
    Ok((
        PhotodetectorTrace {
            sample_rate: shape.sample_rate,
            samples,
            t0_ms: 0.0,
        },
        warnings,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerConfig {
    pub threshold: f64,
    pub refractory_ms: f64,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            refractory_ms: 5.0,
        }
    }
}

/// Times of rising threshold crossings, ignoring any crossing within
/// `refractory_ms` of the last accepted trigger.
pub fn detect_triggers(trace: &PhotodetectorTrace, cfg: &TriggerConfig) -> Result<Vec<f64>, SorterError> {
    trace.validate()?;
    if !(cfg.refractory_ms >= 0.0) {
        return Err(SorterError::Config(format!("refractory {} ms", cfg.refractory_ms)));
    }
    let mut out: Vec<f64> = Vec::new();
    for (i, w) in trace.samples.windows(2).enumerate() {
        if w[0] < cfg.threshold && w[1] >= cfg.threshold {
            let t = trace.time_ms(i + 1);
            if out.last().is_none_or(|&last| t - last >= cfg.refractory_ms) {
                out.push(t);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_schedule_is_baseline_noise() {
        let shape = TraceShape {
            baseline: 0.3,
            ..Default::default()
        };
        let (tr, warn) = synthesize_trace(&[], &shape, 100.0, 1).unwrap();
        assert!(warn.is_empty());
        assert_eq!(tr.samples.len(), 2000);
        let mean = tr.samples.iter().sum::<f64>() / tr.samples.len() as f64;
        assert!((mean - 0.3).abs() < 0.005);
        assert!(detect_triggers(&tr, &TriggerConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn clean_excursion_triggers_once_at_rising_edge() {
        let shape = TraceShape {
            noise_sigma: 0.0,
            edge_ms: 0.0,
            ..Default::default()
        };
        let (tr, _) = synthesize_trace(&[10.0], &shape, 30.0, 0).unwrap();
        assert_eq!(detect_triggers(&tr, &TriggerConfig::default()).unwrap(), vec![10.0]);
    }

    #[test]
    fn forty_hz_train() {
        let times: Vec<f64> = (0..40).map(|i| 3.0 + 25.0 * i as f64).collect();
        let (tr, warn) = synthesize_trace(&times, &TraceShape::default(), 1000.0, 9).unwrap();
        assert!(warn.is_empty());
        let trig = detect_triggers(&tr, &TriggerConfig::default()).unwrap();
        assert_eq!(trig.len(), 40);
        for w in trig.windows(2) {
            assert!((w[1] - w[0] - 25.0).abs() <= 1.0);
        }
    }

    #[test]
    fn weak_excursions_never_trigger() {
        let shape = TraceShape {
            amplitude: 0.3,
            ..Default::default()
        };
        let times: Vec<f64> = (0..10).map(|i| 25.0 * i as f64).collect();
        let (tr, _) = synthesize_trace(&times, &shape, 300.0, 2).unwrap();
        assert!(detect_triggers(&tr, &TriggerConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn refractory_suppresses_noisy_edges() {
        // noise comparable to the threshold margin chatters around the edge
        let shape = TraceShape {
            noise_sigma: 0.2,
            ..Default::default()
        };
        let (tr, _) = synthesize_trace(&[5.0, 30.0], &shape, 60.0, 4).unwrap();
        let trig = detect_triggers(&tr, &TriggerConfig::default()).unwrap();
        for w in trig.windows(2) {
            assert!(w[1] - w[0] >= 5.0);
        }
        let none = TriggerConfig {
            refractory_ms: 0.0,
            ..Default::default()
        };
        assert!(detect_triggers(&tr, &none).unwrap().len() >= trig.len());
    }

    #[test]
    fn overlaps_warn_and_bad_input_errors() {
        let (_, warn) = synthesize_trace(&[0.0, 1.0], &TraceShape::default(), 10.0, 0).unwrap();
        assert_eq!(warn.len(), 1);
        assert!(synthesize_trace(&[2.0, 1.0], &TraceShape::default(), 10.0, 0).is_err());
        let bad = PhotodetectorTrace {
            sample_rate: 0.0,
            samples: vec![],
            t0_ms: 0.0,
        };
        assert!(detect_triggers(&bad, &TriggerConfig::default()).is_err());
    }

    #[test]
    fn seeded() {
        let a = synthesize_trace(&[1.0], &TraceShape::default(), 10.0, 5).unwrap().0;
        let b = synthesize_trace(&[1.0], &TraceShape::default(), 10.0, 5).unwrap().0;
        assert_eq!(a, b);
    }
}
