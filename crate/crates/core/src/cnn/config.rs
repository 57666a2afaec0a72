use std::fmt;
use std::str::FromStr;

use super::CnnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub kernel_px: usize,
    pub filters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolSpec {
    pub window: usize,
    pub stride: usize,
}

/// Layer stack: `conv_layers` x [Conv -> ReLU -> MaxPool], then
/// Dense(`dense_units`) -> ReLU -> Dropout -> Dense(`n_classes`) -> softmax.
/// Convolutions use no padding.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub input_px: usize,
    pub conv_layers: Vec<ConvSpec>,
    pub pool: PoolSpec,
    pub dense_units: usize,
    pub dropout_rate: f64,
    pub n_classes: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::with_filters(128, 15, &[8, 16, 32])
    }
}

/// Spatial side lengths of one Conv -> ReLU -> MaxPool stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageShape {
    pub in_px: usize,
    pub in_channels: usize,
    pub conv_px: usize,
    pub pool_px: usize,
    pub filters: usize,
    pub kernel_px: usize,
}

impl NetworkConfig {
    pub fn with_filters(input_px: usize, kernel_px: usize, filters: &[usize]) -> Self {
        Self {
            input_px,
            conv_layers: filters.iter().map(|&f| ConvSpec { kernel_px, filters: f }).collect(),
            pool: PoolSpec { window: 2, stride: 2 },
            dense_units: 128,
            dropout_rate: 0.4,
            n_classes: 3,
        }
    }

    /// Per-stage shapes, or an error if any spatial size drops below 1.
    pub fn trace(&self) -> Result<Vec<StageShape>, CnnError> {
        let bad = |m: String| Err(CnnError::Config(m));
        if self.conv_layers.is_empty() {
            return bad("at least one conv stage is required".into());
        }
        if self.pool.window == 0 || self.pool.stride == 0 {
            return bad("pool window and stride must be >= 1".into());
        }
        if self.dense_units == 0 || self.n_classes < 2 {
            return bad(format!(
                "dense_units must be >= 1 and n_classes >= 2 (got {}, {})",
                self.dense_units, self.n_classes
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate {} not in [0, 1)", self.dropout_rate));
        }
        let mut px = self.input_px;
        let mut ch = 1;
        let mut out = Vec::with_capacity(self.conv_layers.len());
        for (i, c) in self.conv_layers.iter().enumerate() {
            if c.kernel_px == 0 || c.filters == 0 {
                return bad(format!("stage {}: kernel and filters must be >= 1", i + 1));
            }
            if px < c.kernel_px {
                return bad(format!(
                    "stage {}: {px} px input is smaller than kernel {}",
                    i + 1,
                    c.kernel_px
                ));
            }
            let conv_px = px - c.kernel_px + 1;
            if conv_px < self.pool.window {
                return bad(format!(
                    "stage {}: {conv_px} px conv output is smaller than pool window {}",
                    i + 1,
                    self.pool.window
                ));
            }
            let pool_px = (conv_px - self.pool.window) / self.pool.stride + 1;
            out.push(StageShape {
                in_px: px,
                in_channels: ch,
                conv_px,
                pool_px,
                filters: c.filters,
                kernel_px: c.kernel_px,
            });
            px = pool_px;
            ch = c.filters;
        }
        Ok(out)
    }

    /// Alternating conv/pool side lengths, e.g. `[114, 57, 43, 21, 7, 3]`.
    pub fn spatial_trace(&self) -> Result<Vec<usize>, CnnError> {
        Ok(self.trace()?.iter().flat_map(|s| [s.conv_px, s.pool_px]).collect())
    }

    pub fn flat_len(&self) -> Result<usize, CnnError> {
        let last = *self.trace()?.last().expect("non-empty");
        Ok(last.pool_px * last.pool_px * last.filters)
    }

    /// `(weight_shape, bias_len)` per parameter layer, in storage order.
    pub fn layer_shapes(&self) -> Result<Vec<(Vec<usize>, usize)>, CnnError> {
        let mut shapes: Vec<(Vec<usize>, usize)> = self
            .trace()?
            .iter()
            .map(|s| (vec![s.filters, s.in_channels, s.kernel_px, s.kernel_px], s.filters))
            .collect();
        let flat = self.flat_len()?;
        shapes.push((vec![self.dense_units, flat], self.dense_units));
        shapes.push((vec![self.n_classes, self.dense_units], self.n_classes));
        Ok(shapes)
    }

    pub fn layer_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.conv_layers.len()).map(|i| format!("conv{i}")).collect();
        names.push("dense".into());
        names.push("output".into());
        names
    }

    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let conv = self
            .conv_layers
            .iter()
            .map(|c| format!("{}x{}", c.kernel_px, c.filters))
            .collect::<Vec<_>>()
            .join(",");
        vec![
            ("input_px".into(), self.input_px.to_string()),
            ("conv".into(), conv),
            ("pool".into(), format!("{}/{}", self.pool.window, self.pool.stride)),
            ("dense_units".into(), self.dense_units.to_string()),
            ("dropout_rate".into(), self.dropout_rate.to_string()),
            ("n_classes".into(), self.n_classes.to_string()),
        ]
    }

    pub fn from_key_values<'a, I>(pairs: I) -> Result<Self, CnnError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut cfg = NetworkConfig::default();
        let bad = |k: &str, v: &str| CnnError::Config(format!("bad value `{v}` for `{k}`"));
        for (k, v) in pairs {
            match k {
                "input_px" => cfg.input_px = v.parse().map_err(|_| bad(k, v))?,
                "conv" => {
                    cfg.conv_layers = v
                        .split(',')
                        .map(|s| {
                            let (kp, f) = s.split_once('x').ok_or_else(|| bad(k, v))?;
                            Ok(ConvSpec {
                                kernel_px: kp.trim().parse().map_err(|_| bad(k, v))?,
                                filters: f.trim().parse().map_err(|_| bad(k, v))?,
                            })
                        })
                        .collect::<Result<_, CnnError>>()?
                }
                "pool" => {
                    let (w, s) = v.split_once('/').ok_or_else(|| bad(k, v))?;
                    cfg.pool = PoolSpec {
                        window: w.parse().map_err(|_| bad(k, v))?,
                        stride: s.parse().map_err(|_| bad(k, v))?,
                    };
                }
                "dense_units" => cfg.dense_units = v.parse().map_err(|_| bad(k, v))?,
                "dropout_rate" => cfg.dropout_rate = v.parse().map_err(|_| bad(k, v))?,
                "n_classes" => cfg.n_classes = v.parse().map_err(|_| bad(k, v))?,
                other => return Err(CnnError::Config(format!("unknown network key `{other}`"))),
            }
        }
        cfg.trace()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Sgd,
    Adam,
}

impl FromStr for Optimizer {
    type Err = CnnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            _ => Err(CnnError::Config(format!("unknown optimizer `{s}`"))),
        }
    }
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sgd => "sgd",
            Self::Adam => "adam",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Fixed for the whole run.
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            learning_rate: 1e-3,
            batch_size: 8,
            seed: 0,
            shuffle: true,
            optimizer: Optimizer::Sgd,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), CnnError> {
        if self.epochs == 0 || !(self.learning_rate > 0.0) || self.batch_size == 0 {
            return Err(CnnError::Config(format!(
                "need epochs >= 1, learning_rate > 0, batch_size >= 1 (got {}, {}, {})",
                self.epochs, self.learning_rate, self.batch_size
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_shape_traces() {
        let full = NetworkConfig::with_filters(478, 15, &[8, 16, 32]);
        assert_eq!(full.spatial_trace().unwrap(), vec![464, 232, 218, 109, 95, 47]);
        let desk = NetworkConfig::default();
        assert_eq!(desk.spatial_trace().unwrap(), vec![114, 57, 43, 21, 7, 3]);
        assert_eq!(desk.flat_len().unwrap(), 3 * 3 * 32);
    }

    #[test]
    fn collapsing_configs_are_rejected() {
        assert!(NetworkConfig::with_filters(64, 15, &[8, 16, 32]).trace().is_err());
        assert!(NetworkConfig::with_filters(8, 3, &[2, 2, 2]).trace().is_err());
        let mut tiny = NetworkConfig::with_filters(8, 3, &[2, 2, 2]);
        tiny.pool = PoolSpec { window: 1, stride: 1 };
        assert_eq!(tiny.spatial_trace().unwrap(), vec![6, 6, 4, 4, 2, 2]);
        for bad in [
            NetworkConfig {
                dropout_rate: 1.0,
                ..NetworkConfig::default()
            },
            NetworkConfig {
                n_classes: 1,
                ..NetworkConfig::default()
            },
        ] {
            assert!(bad.trace().is_err());
        }
    }

    #[test]
    fn key_values_roundtrip() {
        let mut cfg = NetworkConfig::with_filters(100, 5, &[3, 4]);
        cfg.n_classes = 2;
        cfg.dropout_rate = 0.25;
        let kv = cfg.to_key_values();
        let back = NetworkConfig::from_key_values(kv.iter().map(|(k, v)| (k.as_str(), v.as_str()))).unwrap();
        assert_eq!(back, cfg);
        assert!(NetworkConfig::from_key_values([("depth", "3")]).is_err());
    }
}
