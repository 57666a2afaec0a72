//! Forward and backward passes of the Conv-ReLU-MaxPool stack.
//!
//! Convolutions are lowered to GEMM through an im2col buffer that is kept in
//! the forward cache and reused by the weight-gradient product.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CnnError, NetworkConfig, Real, StageShape, Tensor};
use crate::imgproc::NormalizedFrame;

/// Weights and bias of one parameter layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
}

/// All trainable parameters, conv stages first, then the dense and output layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub layers: Vec<Layer<T>>,
    pub seed: u64,
}

impl<T: Real> Params<T> {
    /// Uniform initialization scaled by fan-in: `U(-sqrt(6/fan_in), +)` for
    /// layers followed by ReLU, `U(-sqrt(3/fan_in), +)` for the output layer.
    /// Biases start at zero.
    pub fn init(cfg: &NetworkConfig, seed: u64) -> Result<Self, CnnError> {
        let shapes = cfg.layer_shapes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = shapes.len() - 1;
        let layers = shapes
            .into_iter()
            .enumerate()
            .map(|(i, (dims, nb))| {
                let fan_in: usize = dims[1..].iter().product();
                let gain = if i == last { 3.0 } else { 6.0 };
                let bound = (gain / fan_in as f64).sqrt();
                let mut w = Tensor::zeros(&dims);
                for v in w.data_mut() {
                    *v = T::of(rng.gen_range(-bound..bound));
                }
                Layer {
                    weight: w,
                    bias: vec![T::zero(); nb],
                }
            })
            .collect();
        Ok(Self { layers, seed })
    }

    pub fn zeros(cfg: &NetworkConfig) -> Result<Self, CnnError> {
        Ok(Self {
            layers: cfg
                .layer_shapes()?
                .into_iter()
                .map(|(dims, nb)| Layer {
                    weight: Tensor::zeros(&dims),
                    bias: vec![T::zero(); nb],
                })
                .collect(),
            seed: 0,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Tensor::zeros(l.weight.dims()),
                    bias: vec![T::zero(); l.bias.len()],
                })
                .collect(),
            seed: self.seed,
        }
    }

    /// Weight and bias buffers in storage order.
    pub fn blocks(&self) -> impl Iterator<Item = &[T]> {
        self.layers.iter().flat_map(|l| [l.weight.data(), l.bias.as_slice()])
    }

    pub fn blocks_mut(&mut self) -> impl Iterator<Item = &mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.data_mut(), l.bias.as_mut_slice()])
    }

    pub fn count(&self) -> usize {
        self.blocks().map(|b| b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn scale(&mut self, s: T) {
        for b in self.blocks_mut() {
            for v in b {
                *v *= s;
            }
        }
    }

    pub fn fill_zero(&mut self) {
        for b in self.blocks_mut() {
            b.fill(T::zero());
        }
    }

    pub fn cast<U: Real>(&self) -> Params<U> {
        Params {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: l.weight.map(|v| U::of(v.as_f64())),
                    bias: l.bias.iter().map(|&v| U::of(v.as_f64())).collect(),
                })
                .collect(),
            seed: self.seed,
        }
    }

    fn matches(&self, cfg: &NetworkConfig) -> Result<(), CnnError> {
        let shapes = cfg.layer_shapes()?;
        let ok = shapes.len() == self.layers.len()
            && shapes
                .iter()
                .zip(&self.layers)
                .all(|((dims, nb), l)| l.weight.dims() == dims.as_slice() && l.bias.len() == *nb);
        if ok {
            Ok(())
        } else {
            Err(CnnError::Config(
                "parameter shapes do not match the network config".into(),
            ))
        }
    }
}

/// Class probabilities with the winning class and its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: Vec<f64>,
    pub class: usize,
    pub confidence: f64,
}

impl Prediction {
    /// Ties resolve to the lowest class index.
    pub fn from_probs(probs: Vec<f64>) -> Self {
        let (class, confidence) =
            probs.iter().copied().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |best, (i, p)| if p > best.1 { (i, p) } else { best },
            );
        Self {
            probs,
            class,
            confidence,
        }
    }
}

/// Softmax cross-entropy of one prediction, with the probability floored at 1e-12.
pub fn loss(pred: &Prediction, label: usize) -> f64 {
    -pred.probs[label].max(1e-12).ln()
}

#[derive(Debug, Clone, Default)]
struct StageCache<T> {
    col: Vec<T>,
    /// Post-ReLU convolution output, `filters x conv_px^2`.
    act: Vec<T>,
    pooled: Vec<T>,
    argmax: Vec<u32>,
}

/// Intermediate values of one forward pass, reusable across calls.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache<T> {
    input: Vec<T>,
    stages: Vec<StageCache<T>>,
    hidden: Vec<T>,
    mask: Vec<T>,
    dropped: Vec<T>,
    logits: Vec<T>,
    probs: Vec<T>,
}

impl<T: Real> ForwardCache<T> {
    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn prediction(&self) -> Prediction {
        Prediction::from_probs(self.probs.iter().map(|p| p.as_f64()).collect())
    }

    /// Post-ReLU activations of stage `i` (0-based), `filters x conv_px^2`.
    pub(crate) fn stage_activations(&self, i: usize) -> &[T] {
        &self.stages[i].act
    }
}

/// Reusable gradient scratch buffers.
#[derive(Debug, Clone, Default)]
pub struct BackwardScratch<T> {
    d_act: Vec<T>,
    d_col: Vec<T>,
    d_in: Vec<T>,
    d_pooled: Vec<T>,
}

fn resize<T: Real>(v: &mut Vec<T>, n: usize) {
    v.clear();
    v.resize(n, T::zero());
}

fn im2col<T: Real>(input: &[T], s: &StageShape, col: &mut Vec<T>) {
    let (h, k, oh) = (s.in_px, s.kernel_px, s.conv_px);
    let p = oh * oh;
    resize(col, s.in_channels * k * k * p);
    let mut r = 0;
    for c in 0..s.in_channels {
        let plane = &input[c * h * h..(c + 1) * h * h];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut col[r * p..(r + 1) * p];
                for y in 0..oh {
                    let src = (y + ky) * h + kx;
                    row[y * oh..(y + 1) * oh].copy_from_slice(&plane[src..src + oh]);
                }
                r += 1;
            }
        }
    }
}

fn col2im<T: Real>(col: &[T], s: &StageShape, out: &mut Vec<T>) {
    let (h, k, oh) = (s.in_px, s.kernel_px, s.conv_px);
    let p = oh * oh;
    resize(out, s.in_channels * h * h);
    let mut r = 0;
    for c in 0..s.in_channels {
        let plane = &mut out[c * h * h..(c + 1) * h * h];
        for ky in 0..k {
            for kx in 0..k {
                let row = &col[r * p..(r + 1) * p];
                for y in 0..oh {
                    let dst = (y + ky) * h + kx;
                    for (d, &v) in plane[dst..dst + oh].iter_mut().zip(&row[y * oh..(y + 1) * oh]) {
                        *d += v;
                    }
                }
                r += 1;
            }
        }
    }
}

/// A network configuration bound to parameters of matching shape.
#[derive(Debug, Clone)]
pub struct Network<T> {
    cfg: NetworkConfig,
    shapes: Vec<StageShape>,
    params: Params<T>,
}

impl<T: Real> Network<T> {
    pub fn new(cfg: NetworkConfig, params: Params<T>) -> Result<Self, CnnError> {
        let shapes = cfg.trace()?;
        params.matches(&cfg)?;
        Ok(Self { cfg, shapes, params })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn shapes(&self) -> &[StageShape] {
        &self.shapes
    }

    pub fn params(&self) -> &Params<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params<T> {
        &mut self.params
    }

    pub fn into_params(self) -> Params<T> {
        self.params
    }

    pub fn input_len(&self) -> usize {
        self.cfg.input_px * self.cfg.input_px
    }

    /// Converts a normalized frame to the network's scalar type, checking its size.
    pub fn input_from(&self, image: &NormalizedFrame) -> Result<Vec<T>, CnnError> {
        if image.width != self.cfg.input_px || image.height != self.cfg.input_px {
            return Err(CnnError::Shape {
                expected: self.cfg.input_px,
                width: image.width,
                height: image.height,
            });
        }
        Ok(image.pixels.iter().map(|&p| T::of(p as f64)).collect())
    }

    /// Inference-mode prediction; never touches the parameters.
    pub fn predict(&self, image: &NormalizedFrame) -> Result<Prediction, CnnError> {
        let input = self.input_from(image)?;
        let mut cache = ForwardCache::default();
        self.forward(&input, None, &mut cache);
        Ok(cache.prediction())
    }

    /// Inverted-dropout multipliers for one training sample: `0` with
    /// probability `dropout_rate`, otherwise `1 / (1 - dropout_rate)`.
    pub fn sample_dropout_mask<R: Rng>(&self, rng: &mut R) -> Vec<T> {
        let rate = self.cfg.dropout_rate;
        let keep = T::of(1.0 / (1.0 - rate));
        (0..self.cfg.dense_units)
            .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
            .collect()
    }

    /// Forward pass. `dropout_mask = None` is inference mode.
    pub fn forward(&self, input: &[T], dropout_mask: Option<&[T]>, cache: &mut ForwardCache<T>) {
        assert_eq!(input.len(), self.input_len(), "input size");
        cache.input.clear();
        cache.input.extend_from_slice(input);
        cache.stages.resize_with(self.shapes.len(), StageCache::default);

        for (i, s) in self.shapes.iter().enumerate() {
            let mut st = std::mem::take(&mut cache.stages[i]);
            {
                let x: &[T] = if i == 0 {
                    &cache.input
                } else {
                    &cache.stages[i - 1].pooled
                };
                im2col(x, s, &mut st.col);
            }
            let layer = &self.params.layers[i];
            let kk = s.in_channels * s.kernel_px * s.kernel_px;
            let p = s.conv_px * s.conv_px;
            resize(&mut st.act, s.filters * p);
            T::gemm(
                s.filters,
                kk,
                p,
                T::one(),
                layer.weight.data(),
                (kk, 1),
                &st.col,
                (p, 1),
                T::zero(),
                &mut st.act,
                (p, 1),
            );
            for (f, row) in st.act.chunks_exact_mut(p).enumerate() {
                let b = layer.bias[f];
                for v in row {
                    *v = (*v + b).max(T::zero());
                }
            }
            max_pool(
                &st.act,
                s,
                self.cfg.pool.window,
                self.cfg.pool.stride,
                &mut st.pooled,
                &mut st.argmax,
            );
            cache.stages[i] = st;
        }

        let flat = &cache.stages.last().expect("at least one stage").pooled;
        let n_conv = self.shapes.len();
        let dense = &self.params.layers[n_conv];
        let units = self.cfg.dense_units;
        cache.hidden.clear();
        cache.hidden.extend_from_slice(&dense.bias);
        T::gemm(
            units,
            flat.len(),
            1,
            T::one(),
            dense.weight.data(),
            (flat.len(), 1),
            flat,
            (1, 1),
            T::one(),
            &mut cache.hidden,
            (1, 1),
        );
        for v in cache.hidden.iter_mut() {
            *v = v.max(T::zero());
        }
        cache.mask.clear();
        match dropout_mask {
            Some(m) => {
                assert_eq!(m.len(), units, "dropout mask size");
                cache.mask.extend_from_slice(m);
            }
            None => cache.mask.resize(units, T::one()),
        }
        cache.dropped.clear();
        cache
            .dropped
            .extend(cache.hidden.iter().zip(&cache.mask).map(|(&h, &m)| h * m));

        let out = &self.params.layers[n_conv + 1];
        cache.logits.clear();
        cache.logits.extend_from_slice(&out.bias);
        for (c, row) in out.weight.data().chunks_exact(units).enumerate() {
            cache.logits[c] += row.iter().zip(&cache.dropped).map(|(&w, &h)| w * h).sum::<T>();
        }
        softmax(&cache.logits, &mut cache.probs);
    }

    /// Adds the gradient of the cross-entropy loss for `label` to `grads`,
    /// using the intermediates of the most recent `forward` into `cache`.
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        label: usize,
        grads: &mut Params<T>,
        scratch: &mut BackwardScratch<T>,
    ) {
        let n_conv = self.shapes.len();
        let units = self.cfg.dense_units;

        let d_logits: Vec<T> = cache
            .probs
            .iter()
            .enumerate()
            .map(|(c, &p)| if c == label { p - T::one() } else { p })
            .collect();

        // output layer
        let out = &self.params.layers[n_conv + 1];
        let g_out = &mut grads.layers[n_conv + 1];
        let mut d_hidden = vec![T::zero(); units];
        for (c, &dl) in d_logits.iter().enumerate() {
            g_out.bias[c] += dl;
            let gw = &mut g_out.weight.data_mut()[c * units..(c + 1) * units];
            let w = &out.weight.data()[c * units..(c + 1) * units];
            for u in 0..units {
                gw[u] += dl * cache.dropped[u];
                d_hidden[u] += w[u] * dl;
            }
        }
        for ((d, &h), &m) in d_hidden.iter_mut().zip(&cache.hidden).zip(&cache.mask) {
            *d = if h > T::zero() { *d * m } else { T::zero() };
        }

        // dense layer
        let flat = &cache.stages[n_conv - 1].pooled;
        let nf = flat.len();
        let dense = &self.params.layers[n_conv];
        let g_dense = &mut grads.layers[n_conv];
        for (b, &d) in g_dense.bias.iter_mut().zip(&d_hidden) {
            *b += d;
        }
        T::gemm(
            units,
            1,
            nf,
            T::one(),
            &d_hidden,
            (1, 1),
            flat,
            (nf, 1),
            T::one(),
            g_dense.weight.data_mut(),
            (nf, 1),
        );
        resize(&mut scratch.d_pooled, nf);
        T::gemm(
            nf,
            units,
            1,
            T::one(),
            dense.weight.data(),
            (1, nf),
            &d_hidden,
            (1, 1),
            T::zero(),
            &mut scratch.d_pooled,
            (1, 1),
        );

        // conv stages, last to first
        for i in (0..n_conv).rev() {
            let s = &self.shapes[i];
            let st = &cache.stages[i];
            let p = s.conv_px * s.conv_px;
            let kk = s.in_channels * s.kernel_px * s.kernel_px;
            resize(&mut scratch.d_act, s.filters * p);
            for (&idx, &g) in st.argmax.iter().zip(&scratch.d_pooled) {
                scratch.d_act[idx as usize] += g;
            }
            for (d, &a) in scratch.d_act.iter_mut().zip(&st.act) {
                if a <= T::zero() {
                    *d = T::zero();
                }
            }
            let g = &mut grads.layers[i];
            for (f, row) in scratch.d_act.chunks_exact(p).enumerate() {
                g.bias[f] += row.iter().copied().sum::<T>();
            }
            T::gemm(
                s.filters,
                p,
                kk,
                T::one(),
                &scratch.d_act,
                (p, 1),
                &st.col,
                (1, p),
                T::one(),
                g.weight.data_mut(),
                (kk, 1),
            );
            if i > 0 {
                resize(&mut scratch.d_col, kk * p);
                T::gemm(
                    kk,
                    s.filters,
                    p,
                    T::one(),
                    self.params.layers[i].weight.data(),
                    (1, kk),
                    &scratch.d_act,
                    (p, 1),
                    T::zero(),
                    &mut scratch.d_col,
                    (p, 1),
                );
                col2im(&scratch.d_col, s, &mut scratch.d_in);
                std::mem::swap(&mut scratch.d_pooled, &mut scratch.d_in);
            }
        }
    }

    /// Mean loss and mean gradient over a batch. `masks[i]` is the dropout mask
    /// for sample `i` (`None` disables dropout for that sample).
    pub fn batch_gradient(&self, batch: &[(&[T], usize)], masks: &[Option<Vec<T>>]) -> (f64, Params<T>) {
        assert_eq!(batch.len(), masks.len());
        let mut grads = self.params.zeros_like();
        let mut cache = ForwardCache::default();
        let mut scratch = BackwardScratch::default();
        let mut total = 0.0;
        for ((input, label), mask) in batch.iter().zip(masks) {
            self.forward(input, mask.as_deref(), &mut cache);
            total += loss(&cache.prediction(), *label);
            self.backward(&cache, *label, &mut grads, &mut scratch);
        }
        let n = batch.len().max(1);
        grads.scale(T::of(1.0 / n as f64));
        (total / n as f64, grads)
    }
}

fn max_pool<T: Real>(act: &[T], s: &StageShape, window: usize, stride: usize, out: &mut Vec<T>, argmax: &mut Vec<u32>) {
    let (cp, pp) = (s.conv_px, s.pool_px);
    out.clear();
    argmax.clear();
    for f in 0..s.filters {
        let base = f * cp * cp;
        for py in 0..pp {
            for px in 0..pp {
                let mut best = T::neg_infinity();
                let mut at = 0usize;
                for dy in 0..window {
                    let row = base + (py * stride + dy) * cp + px * stride;
                    for dx in 0..window {
                        let v = act[row + dx];
                        if v > best {
                            best = v;
                            at = row + dx;
                        }
                    }
                }
                out.push(best);
                argmax.push(at as u32);
            }
        }
    }
}

fn softmax<T: Real>(logits: &[T], out: &mut Vec<T>) {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    out.clear();
    out.extend(logits.iter().map(|&z| (z - m).exp()));
    let s: T = out.iter().copied().sum();
    for v in out.iter_mut() {
        *v = *v / s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::PoolSpec;
    use proptest::prelude::*;

    fn tiny_cfg() -> NetworkConfig {
        let mut cfg = NetworkConfig::with_filters(8, 3, &[2, 2, 2]);
        cfg.pool = PoolSpec { window: 1, stride: 1 };
        cfg.dense_units = 8;
        cfg
    }

    fn input(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect()
    }

    #[test]
    fn zero_network_is_uniform() {
        let cfg = NetworkConfig::default();
        let net = Network::new(cfg.clone(), Params::<f32>::zeros(&cfg).unwrap()).unwrap();
        let img = NormalizedFrame {
            width: 128,
            height: 128,
            pixels: input(128 * 128, 1).iter().map(|&v| v as f32).collect(),
        };
        let p = net.predict(&img).unwrap();
        for q in &p.probs {
            assert!((q - 1.0 / 3.0).abs() < 1e-7);
        }
        assert!((loss(&p, 2) - 3f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn loss_examples() {
        let p = Prediction::from_probs(vec![1.0, 0.0, 0.0]);
        assert_eq!(loss(&p, 0), 0.0);
        assert!((loss(&p, 1) - 1e-12f64.ln().abs()).abs() < 1e-9);
        let p = Prediction::from_probs(vec![0.5, 0.25, 0.25]);
        assert!((loss(&p, 0) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let cfg = NetworkConfig::default();
        let net = Network::new(cfg.clone(), Params::<f32>::zeros(&cfg).unwrap()).unwrap();
        let img = NormalizedFrame {
            width: 100,
            height: 100,
            pixels: vec![0.0; 10_000],
        };
        assert!(matches!(net.predict(&img), Err(CnnError::Shape { .. })));
        let other = NetworkConfig::with_filters(128, 15, &[4, 4, 4]);
        assert!(Network::new(other, Params::<f32>::zeros(&cfg).unwrap()).is_err());
    }

    #[test]
    fn inference_is_pure_and_repeatable() {
        let cfg = tiny_cfg();
        let net = Network::new(cfg.clone(), Params::<f64>::init(&cfg, 3).unwrap()).unwrap();
        let before = net.params().clone();
        let img = NormalizedFrame {
            width: 8,
            height: 8,
            pixels: input(64, 2).iter().map(|&v| v as f32).collect(),
        };
        let a = net.predict(&img).unwrap();
        let b = net.predict(&img).unwrap();
        assert_eq!(a, b);
        assert_eq!(net.params(), &before);
    }

    #[test]
    fn perfect_fit_has_zero_output_gradient() {
        let cfg = tiny_cfg();
        let mut params = Params::<f64>::init(&cfg, 4).unwrap();
        // force an overwhelming logit for class 1
        let n = params.layers.len();
        params.layers[n - 1].bias = vec![-1e3, 1e3, -1e3];
        let net = Network::new(cfg, params).unwrap();
        let x = input(64, 5);
        let (l, g) = net.batch_gradient(&[(&x, 1)], &[None]);
        assert_eq!(l, 0.0);
        assert!(g.layers[n - 1].weight.data().iter().all(|&v| v == 0.0));
        assert!(g.layers[n - 1].bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batch_gradient_is_mean_of_sample_gradients() {
        let cfg = tiny_cfg();
        let net = Network::new(cfg.clone(), Params::<f64>::init(&cfg, 6).unwrap()).unwrap();
        let xs: Vec<Vec<f64>> = (0..4).map(|i| input(64, 10 + i)).collect();
        let batch: Vec<(&[f64], usize)> = xs.iter().enumerate().map(|(i, x)| (x.as_slice(), i % 3)).collect();
        let (_, mean) = net.batch_gradient(&batch, &vec![None; 4]);
        let mut summed = net.params().zeros_like();
        for b in &batch {
            let (_, g) = net.batch_gradient(std::slice::from_ref(b), &[None]);
            for (acc, gi) in summed.blocks_mut().zip(g.blocks()) {
                for (a, v) in acc.iter_mut().zip(gi) {
                    *a += v / 4.0;
                }
            }
        }
        for (a, b) in mean.blocks().zip(summed.blocks()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn init_is_seeded_and_finite() {
        let cfg = NetworkConfig::default();
        let a = Params::<f32>::init(&cfg, 1).unwrap();
        assert_eq!(a, Params::<f32>::init(&cfg, 1).unwrap());
        assert_ne!(a, Params::<f32>::init(&cfg, 2).unwrap());
        assert!(a.is_finite());
        let bound = (6.0f32 / 225.0).sqrt();
        assert!(a.layers[0].weight.data().iter().all(|v| v.abs() <= bound));
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution_and_shift_invariant(
            logits in proptest::collection::vec(-30.0f64..30.0, 2..6),
            shift in -100.0f64..100.0,
        ) {
            let mut a = Vec::new();
            let mut b = Vec::new();
            softmax(&logits, &mut a);
            let shifted: Vec<f64> = logits.iter().map(|z| z + shift).collect();
            softmax(&shifted, &mut b);
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((0.0..=1.0).contains(x));
                prop_assert!((x - y).abs() < 1e-6);
            }
        }
    }
}
