use dropsort::cnn::{Network, NetworkConfig, Params};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-4;
pub const FD_TOLERANCE: f64 = 1e-3;

fn random(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

pub struct GradCheck {
    pub n_params: usize,
    pub n_live: usize,
    /// (parameter index, backprop, numeric, relative error) of the worst entry.
    pub worst: (usize, f64, f64, f64),
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.worst.3 < FD_TOLERANCE && self.n_live * 2 > self.n_params
    }
}

/// Backprop gradients of the mean batch loss against central differences
/// for every parameter.
pub fn gradient_check(cfg: NetworkConfig, seed: u64, mask: Option<Vec<f64>>) -> GradCheck {
    let params = Params::<f64>::init(&cfg, seed).unwrap();
    let mut net = Network::new(cfg.clone(), params).unwrap();
    let n = cfg.input_px * cfg.input_px;
    let inputs: Vec<Vec<f64>> = (0..3).map(|i| random(n, seed * 10 + i)).collect();
    let batch: Vec<(&[f64], usize)> = inputs
        .iter()
        .enumerate()
        .map(|(i, x)| (x.as_slice(), i % cfg.n_classes))
        .collect();
    let masks = vec![mask; batch.len()];

    let (_, analytic) = net.batch_gradient(&batch, &masks);
    let analytic: Vec<f64> = analytic.blocks().flatten().copied().collect();
    let n_params = analytic.len();
    let n_live = analytic.iter().filter(|g| g.abs() > 1e-6).count();

    let mut worst = (0, 0.0, 0.0, 0.0);
    for (idx, &a) in analytic.iter().enumerate() {
        let mut eval = |delta: f64| {
            let p = net
                .params_mut()
                .blocks_mut()
                .flat_map(|b| b.iter_mut())
                .nth(idx)
                .unwrap();
            *p += delta;
            let (l, _) = net.batch_gradient(&batch, &masks);
            let p = net
                .params_mut()
                .blocks_mut()
                .flat_map(|b| b.iter_mut())
                .nth(idx)
                .unwrap();
            *p -= delta;
            l
        };
        let fd = (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP);
        let e = rel_err(a, fd);
        if e >= worst.3 {
            worst = (idx, a, fd, e);
        }
    }
    GradCheck {
        n_params,
        n_live,
        worst,
    }
}
