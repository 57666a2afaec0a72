use std::path::Path;

use super::network::{ForwardCache, Network};
use super::{CnnError, Real};
use crate::imgproc::pgm::save_pgm;
use crate::imgproc::{Frame, NormalizedFrame};

/// Post-ReLU output of one filter.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMap {
    pub side: usize,
    pub values: Vec<f64>,
}

impl ActivationMap {
    /// Min-max scaled to `0..=255`; a constant map becomes all zeros.
    pub fn to_frame(&self) -> Frame {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let px = self
            .values
            .iter()
            .map(|&v| {
                if span > 0.0 {
                    ((v - lo) / span * 255.0).round()
                } else {
                    0.0
                }
            })
            .collect();
        Frame::new(self.side, self.side, px, 1.0).expect("side^2 values")
    }
}

/// One map per filter of conv stage `stage` (1-based: stage 2 is the second ReLU).
pub fn export_activations<T: Real>(
    net: &Network<T>,
    image: &NormalizedFrame,
    stage: usize,
) -> Result<Vec<ActivationMap>, CnnError> {
    let n = net.shapes().len();
    if stage == 0 || stage > n {
        return Err(CnnError::Stage { stage, depth: n });
    }
    let input = net.input_from(image)?;
    let mut cache = ForwardCache::default();
    net.forward(&input, None, &mut cache);
    let s = net.shapes()[stage - 1];
    let p = s.conv_px * s.conv_px;
    Ok(cache
        .stage_activations(stage - 1)
        .chunks_exact(p)
        .map(|c| ActivationMap {
            side: s.conv_px,
            values: c.iter().map(|v| v.as_f64()).collect(),
        })
        .collect())
}

/// Writes `stage{s}_filter{i}.pgm` files into `dir`; returns the paths.
pub fn write_activation_maps(
    maps: &[ActivationMap],
    stage: usize,
    dir: &Path,
) -> std::io::Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    maps.iter()
        .enumerate()
        .map(|(i, m)| {
            let path = dir.join(format!("stage{stage}_filter{i:02}.pgm"));
            save_pgm(&path, &m.to_frame())?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::{NetworkConfig, Params};

    fn image(side: usize) -> NormalizedFrame {
        NormalizedFrame {
            width: side,
            height: side,
            pixels: (0..side * side).map(|i| ((i * 7919) % 13) as f32 / 6.0 - 1.0).collect(),
        }
    }

    #[test]
    fn maps_match_trace_and_filter_counts() {
        let cfg = NetworkConfig::default();
        let net = Network::new(cfg.clone(), Params::<f32>::init(&cfg, 2).unwrap()).unwrap();
        let trace = cfg.spatial_trace().unwrap();
        for stage in 1..=3 {
            let maps = export_activations(&net, &image(128), stage).unwrap();
            assert_eq!(maps.len(), cfg.conv_layers[stage - 1].filters);
            for m in &maps {
                assert_eq!(m.side, trace[2 * (stage - 1)]);
                assert!(m.values.iter().all(|&v| v >= 0.0));
            }
        }
        assert!(matches!(
            export_activations(&net, &image(128), 0),
            Err(CnnError::Stage { .. })
        ));
        assert!(matches!(
            export_activations(&net, &image(128), 4),
            Err(CnnError::Stage { .. })
        ));
    }

    #[test]
    fn zero_network_maps_are_constant() {
        let cfg = NetworkConfig::default();
        let net = Network::new(cfg.clone(), Params::<f32>::zeros(&cfg).unwrap()).unwrap();
        let maps = export_activations(&net, &image(128), 2).unwrap();
        for m in &maps {
            assert!(m.values.iter().all(|&v| v == m.values[0]));
            assert!(m.to_frame().pixels().iter().all(|&p| p == 0.0));
        }
        let dir = tempfile::tempdir().unwrap();
        let paths = write_activation_maps(&maps, 2, dir.path()).unwrap();
        assert_eq!(paths.len(), 16);
        assert!(paths[0].exists());
    }
}
