use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{loss, Network, Params, Prediction};
use super::{CnnError, NetworkConfig, Optimizer, Real, TrainConfig};
use crate::imgproc::NormalizedFrame;
use crate::seed::derive_seed;

/// One labeled, already normalized training example.
pub type Sample = (NormalizedFrame, usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    /// NaN when no validation set was given.
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Parameters from the epoch with the lowest validation loss.
    pub params: Params<T>,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch the parameters were taken from.
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub n: usize,
    pub accuracy: f64,
    pub mean_loss: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl Evaluation {
    pub fn recall(&self, class: usize) -> f64 {
        let row: usize = self.confusion[class].iter().sum();
        if row == 0 {
            f64::NAN
        } else {
            self.confusion[class][class] as f64 / row as f64
        }
    }
}

/// Score any predictor on a labeled set.
pub fn evaluate_with<F>(dataset: &[Sample], n_classes: usize, mut predict: F) -> Result<Evaluation, CnnError>
where
    F: FnMut(&NormalizedFrame) -> Result<Prediction, CnnError>,
{
    if dataset.is_empty() {
        return Err(CnnError::EmptyDataset);
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    let mut total_loss = 0.0;
    for (img, label) in dataset {
        check_label(*label, n_classes)?;
        let p = predict(img)?;
        total_loss += loss(&p, *label);
        confusion[*label][p.class] += 1;
    }
    let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
    Ok(Evaluation {
        n: dataset.len(),
        accuracy: correct as f64 / dataset.len() as f64,
        mean_loss: total_loss / dataset.len() as f64,
        confusion,
    })
}

pub fn evaluate<T: Real>(net: &Network<T>, dataset: &[Sample]) -> Result<Evaluation, CnnError> {
    evaluate_with(dataset, net.config().n_classes, |img| net.predict(img))
}

fn check_label(label: usize, n_classes: usize) -> Result<(), CnnError> {
    if label < n_classes {
        Ok(())
    } else {
        Err(CnnError::Label { label, n_classes })
    }
}

struct OptimizerState<T> {
    kind: Optimizer,
    lr: T,
    step: i32,
    m: Params<T>,
    v: Params<T>,
}

impl<T: Real> OptimizerState<T> {
    fn new(kind: Optimizer, lr: f64, like: &Params<T>) -> Self {
        Self {
            kind,
            lr: T::of(lr),
            step: 0,
            m: like.zeros_like(),
            v: like.zeros_like(),
        }
    }

    fn apply(&mut self, params: &mut Params<T>, grads: &Params<T>) {
        match self.kind {
            Optimizer::Sgd => {
                for (p, g) in params.blocks_mut().zip(grads.blocks()) {
                    for (w, &d) in p.iter_mut().zip(g) {
                        *w -= self.lr * d;
                    }
                }
            }
            Optimizer::Adam => {
                let (b1, b2, eps) = (T::of(0.9), T::of(0.999), T::of(1e-7));
                self.step += 1;
                let c1 = T::one() - b1.powi(self.step);
                let c2 = T::one() - b2.powi(self.step);
                let blocks = params
                    .blocks_mut()
                    .zip(grads.blocks())
                    .zip(self.m.blocks_mut().zip(self.v.blocks_mut()));
                for ((p, g), (m, v)) in blocks {
                    for i in 0..p.len() {
                        let d = g[i];
                        m[i] = b1 * m[i] + (T::one() - b1) * d;
                        v[i] = b2 * v[i] + (T::one() - b2) * d * d;
                        let mh = m[i] / c1;
                        let vh = v[i] / c2;
                        p[i] -= self.lr * mh / (vh.sqrt() + eps);
                    }
                }
            }
        }
    }
}

/// Mini-batch training with a fixed learning rate. Deterministic for a fixed
/// `tcfg.seed` and data order; keeps the epoch with the lowest validation loss
/// (the last epoch when `val_set` is empty).
pub fn train<T: Real>(
    cfg: &NetworkConfig,
    tcfg: &TrainConfig,
    train_set: &[Sample],
    val_set: &[Sample],
) -> Result<TrainOutcome<T>, CnnError> {
    tcfg.validate()?;
    if train_set.is_empty() {
        return Err(CnnError::EmptyDataset);
    }
    let params = Params::<T>::init(cfg, derive_seed(tcfg.seed, 0))?;
    let mut net = Network::new(cfg.clone(), params)?;
    let inputs: Vec<Vec<T>> = train_set
        .iter()
        .map(|(img, label)| {
            check_label(*label, cfg.n_classes)?;
            net.input_from(img)
        })
        .collect::<Result<_, _>>()?;
    for (_, label) in val_set {
        check_label(*label, cfg.n_classes)?;
    }

    let mut order_rng = ChaCha8Rng::seed_from_u64(derive_seed(tcfg.seed, 1));
    let mut drop_rng = ChaCha8Rng::seed_from_u64(derive_seed(tcfg.seed, 2));
    let mut opt = OptimizerState::new(tcfg.optimizer, tcfg.learning_rate, net.params());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(tcfg.epochs);
    let mut best: Option<(f64, usize, Params<T>)> = None;

    for epoch in 1..=tcfg.epochs {
        if tcfg.shuffle {
            order.shuffle(&mut order_rng);
        }
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(tcfg.batch_size) {
            let batch: Vec<(&[T], usize)> = chunk.iter().map(|&i| (inputs[i].as_slice(), train_set[i].1)).collect();
            let masks: Vec<Option<Vec<T>>> = chunk
                .iter()
                .map(|_| (cfg.dropout_rate > 0.0).then(|| net.sample_dropout_mask(&mut drop_rng)))
                .collect();
            let (l, grads, hits) = batch_step(&net, &batch, &masks);
            loss_sum += l * chunk.len() as f64;
            correct += hits;
            opt.apply(net.params_mut(), &grads);
        }
        if !net.params().is_finite() {
            return Err(CnnError::Diverged(epoch));
        }
        let (val_loss, val_accuracy) = if val_set.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let e = evaluate(&net, val_set)?;
            (e.mean_loss, e.accuracy)
        };
        let rec = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            val_loss,
            val_accuracy,
        };
        log::info!(
            "epoch {epoch}: train loss {:.4} acc {:.3} | val loss {:.4} acc {:.3}",
            rec.train_loss,
            rec.train_accuracy,
            rec.val_loss,
            rec.val_accuracy
        );
        history.push(rec);
        let better = match &best {
            None => true,
            Some((bl, _, _)) => val_set.is_empty() || val_loss < *bl,
        };
        if better {
            best = Some((val_loss, epoch, net.params().clone()));
        }
    }
    let (_, best_epoch, params) = best.expect("epochs >= 1");
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
    })
}

/// Mean loss, mean gradient and number of correct train-mode predictions.
fn batch_step<T: Real>(net: &Network<T>, batch: &[(&[T], usize)], masks: &[Option<Vec<T>>]) -> (f64, Params<T>, usize) {
    use super::network::{BackwardScratch, ForwardCache};
    let mut grads = net.params().zeros_like();
    let mut cache = ForwardCache::default();
    let mut scratch = BackwardScratch::default();
    let mut total = 0.0;
    let mut hits = 0;
    for ((input, label), mask) in batch.iter().zip(masks) {
        net.forward(input, mask.as_deref(), &mut cache);
        let p = cache.prediction();
        total += loss(&p, *label);
        hits += usize::from(p.class == *label);
        net.backward(&cache, *label, &mut grads, &mut scratch);
    }
    grads.scale(T::of(1.0 / batch.len() as f64));
    (total / batch.len() as f64, grads, hits)
}

/// Retrain from scratch on `base` plus `correction`. Returns the outcome and
/// any warnings about classes absent from a non-empty correction set.
pub fn incremental_retrain<T: Real>(
    cfg: &NetworkConfig,
    tcfg: &TrainConfig,
    base: &[Sample],
    correction: &[Sample],
    val_set: &[Sample],
) -> Result<(TrainOutcome<T>, Vec<String>), CnnError> {
    let mut warnings = Vec::new();
    if !correction.is_empty() {
        for class in 0..cfg.n_classes {
            if !correction.iter().any(|(_, l)| *l == class) {
                let msg = format!("correction set has no images of class {class}; the combined set is imbalanced");
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }
    let combined: Vec<Sample> = base.iter().chain(correction).cloned().collect();
    Ok((train(cfg, tcfg, &combined, val_set)?, warnings))
}
