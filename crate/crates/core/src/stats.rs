//! Poisson encapsulation statistics and the analytic model of a sort outcome.
//!
//! Everything here is a pure function of its arguments. The sorter's
//! Monte-Carlo runs are checked against [`expected_post_sort`].

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("{name} must be a finite value >= 0, got {value}")]
    NegativeParameter { name: &'static str, value: f64 },
    #[error("{name} must lie in [0, 1], got {value}")]
    NotAProbability { name: &'static str, value: f64 },
    #[error("accept fraction is zero, post-sort purity is undefined")]
    UndefinedPurity,
    #[error("purity before sorting must be > 0, got {0}")]
    ZeroBaseline(f64),
}

fn non_negative(name: &'static str, value: f64) -> Result<f64, StatsError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(StatsError::NegativeParameter { name, value })
    }
}

fn probability(name: &'static str, value: f64) -> Result<f64, StatsError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(StatsError::NotAProbability { name, value })
    }
}

/// Mean number of objects of one kind per droplet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancyModel {
    lambda: f64,
}

impl OccupancyModel {
    pub fn new(lambda: f64) -> Result<Self, StatsError> {
        Ok(Self {
            lambda: non_negative("lambda", lambda)?,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn pmf(&self, k: u64) -> f64 {
        pmf_unchecked(k, self.lambda)
    }

    /// `1 - sum_{k=0..=max_k} pmf(k)`, the probability mass not covered by the first terms.
    pub fn tail_residual(&self, max_k: u64) -> f64 {
        let covered: f64 = (0..=max_k).map(|k| self.pmf(k)).sum();
        (1.0 - covered).max(0.0)
    }
}

/// Two independently loaded object types.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointOccupancy {
    pub a: OccupancyModel,
    pub b: OccupancyModel,
}

impl JointOccupancy {
    pub fn new(lambda_a: f64, lambda_b: f64) -> Result<Self, StatsError> {
        Ok(Self {
            a: OccupancyModel::new(lambda_a)?,
            b: OccupancyModel::new(lambda_b)?,
        })
    }

    pub fn pmf(&self, ka: u64, kb: u64) -> f64 {
        self.a.pmf(ka) * self.b.pmf(kb)
    }
}

fn pmf_unchecked(k: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let kf = k as f64;
    (-lambda + kf * lambda.ln() - ln_gamma(kf + 1.0)).exp()
}

/// `P(X = k)` for `X ~ Poisson(lambda)`, evaluated in log space.
///
/// Negative counts are unrepresentable; a negative or non-finite `lambda`
/// is a domain error.
pub fn poisson_pmf(k: u64, lambda: f64) -> Result<f64, StatsError> {
    non_negative("lambda", lambda)?;
    Ok(pmf_unchecked(k, lambda))
}

/// Probability that a droplet holds exactly one object of each type.
pub fn joint_single_probability(j: &JointOccupancy) -> f64 {
    j.pmf(1, 1)
}

/// Rate of useful droplets given the physical droplet rate.
pub fn effective_throughput(physical_rate_hz: f64, target_prob: f64) -> Result<f64, StatsError> {
    non_negative("physical_rate_hz", physical_rate_hz)?;
    probability("target_prob", target_prob)?;
    Ok(physical_rate_hz * target_prob)
}

/// Prevalence of the target class and the per-class accept probabilities of a sorter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SortOutcomeModel {
    pub prevalence: f64,
    pub sensitivity: f64,
    pub false_accept: f64,
}

impl SortOutcomeModel {
    pub fn new(prevalence: f64, sensitivity: f64, false_accept: f64) -> Result<Self, StatsError> {
        Ok(Self {
            prevalence: probability("prevalence", prevalence)?,
            sensitivity: probability("sensitivity", sensitivity)?,
            false_accept: probability("false_accept", false_accept)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnrichmentReport {
    pub purity_before: f64,
    pub purity_after: f64,
    /// `purity_after / purity_before`; NaN when the baseline purity is zero.
    pub factor: f64,
    pub accept_fraction: f64,
    pub fp_of_sorted: f64,
    /// Missed targets as a fraction of all screened droplets.
    pub fn_of_screened: f64,
}

pub fn expected_post_sort(model: &SortOutcomeModel) -> Result<EnrichmentReport, StatsError> {
    let SortOutcomeModel {
        prevalence: p,
        sensitivity: s,
        false_accept: f,
    } = *model;
    let true_accept = p * s;
    let accept_fraction = true_accept + (1.0 - p) * f;
    if accept_fraction <= 0.0 {
        return Err(StatsError::UndefinedPurity);
    }
    let purity_after = true_accept / accept_fraction;
    let factor = if p > 0.0 { purity_after / p } else { f64::NAN };
    Ok(EnrichmentReport {
        purity_before: p,
        purity_after,
        factor,
        accept_fraction,
        fp_of_sorted: 1.0 - purity_after,
        fn_of_screened: p * (1.0 - s),
    })
}

pub fn enrichment_factor(before: f64, after: f64) -> Result<f64, StatsError> {
    probability("after", after)?;
    if !(before > 0.0 && before <= 1.0) {
        return Err(StatsError::ZeroBaseline(before));
    }
    Ok(after / before)
}

/// Standard error of a binomial proportion estimate.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: direct product form e^-l * l^k / k!, no logs.
    fn pmf_direct(k: u64, lambda: f64) -> f64 {
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        (-lambda).exp() * lambda.powi(k as i32) / fact
    }

    #[test]
    fn pmf_examples() {
        assert_eq!(poisson_pmf(0, 0.0).unwrap(), 1.0);
        assert_eq!(poisson_pmf(3, 0.0).unwrap(), 0.0);
        assert!((poisson_pmf(1, 1.0).unwrap() - 0.367_879_441_171_442_3).abs() < 1e-12);
        assert!((poisson_pmf(2, 1.0).unwrap() - 0.183_939_720_585_721_2).abs() < 1e-12);
        assert!(poisson_pmf(1, -0.5).is_err());
        assert!(poisson_pmf(1, f64::NAN).is_err());
    }

    #[test]
    fn log_space_matches_direct_product() {
        for &lambda in &[0.1, 0.5, 1.0, 2.5, 7.0] {
            for k in 0..30 {
                let a = poisson_pmf(k, lambda).unwrap();
                let b = pmf_direct(k, lambda);
                assert!((a - b).abs() <= 1e-12 * b.max(1e-300) + 1e-300, "k={k} l={lambda}");
            }
        }
        // large k stays finite where the direct product would overflow
        let p = poisson_pmf(500, 450.0).unwrap();
        assert!(p.is_finite() && p > 0.0 && p < 1.0);
    }

    #[test]
    fn mass_sums_to_one() {
        for &lambda in &[0.0, 0.3, 1.0, 2.0, 5.0] {
            let m = OccupancyModel::new(lambda).unwrap();
            assert!(m.tail_residual(50) < 1e-12, "lambda={lambda}");
        }
    }

    #[test]
    fn mode_is_floor_lambda() {
        for &lambda in &[0.5f64, 1.0, 1.5, 3.0] {
            let m = OccupancyModel::new(lambda).unwrap();
            let best = m.pmf(lambda.floor() as u64);
            for k in 0..40 {
                assert!(m.pmf(k) <= best + 1e-15, "lambda={lambda} k={k}");
            }
        }
    }

    #[test]
    fn joint_single_examples() {
        let j = JointOccupancy::new(1.0, 1.0).unwrap();
        assert!((joint_single_probability(&j) - (-2.0f64).exp()).abs() < 1e-12);
        assert!((joint_single_probability(&j) - 0.1353).abs() < 5e-5);
        let j = JointOccupancy::new(0.0, 1.0).unwrap();
        assert_eq!(joint_single_probability(&j), 0.0);
        let j = JointOccupancy::new(0.5, 0.5).unwrap();
        let oracle = (0.5 * (-0.5f64).exp()).powi(2);
        assert!((joint_single_probability(&j) - oracle).abs() < 1e-12);
        assert!((oracle - 0.0920).abs() < 5e-5);
    }

    #[test]
    fn throughput_examples() {
        let single = poisson_pmf(1, 1.0).unwrap();
        let eff = effective_throughput(30.0, single).unwrap();
        assert!((eff - 30.0 * (-1.0f64).exp()).abs() < 1e-12);
        assert!((eff - 11.04).abs() < 0.005);
        assert_eq!(effective_throughput(123.0, 0.0).unwrap(), 0.0);
        let fold = 30.0 / eff;
        assert!((fold - std::f64::consts::E).abs() < 1e-12);
        assert!(effective_throughput(-1.0, 0.5).is_err());
    }

    #[test]
    fn post_sort_examples() {
        let r = expected_post_sort(&SortOutcomeModel::new(0.2, 0.97, 0.0).unwrap()).unwrap();
        assert_eq!(r.purity_after, 1.0);
        assert!((r.factor - 5.0).abs() < 1e-12);

        let r = expected_post_sort(&SortOutcomeModel::new(0.2, 0.97, 0.03).unwrap()).unwrap();
        // 0.194 / (0.194 + 0.8 * 0.03)
        assert!((r.purity_after - 0.194 / 0.218).abs() < 1e-12);
        assert!((r.purity_after - 0.8899).abs() < 5e-5);
        assert!((r.fp_of_sorted - 0.110).abs() < 5e-4);

        let r = expected_post_sort(&SortOutcomeModel::new(0.2, 0.97, 0.0331).unwrap()).unwrap();
        assert!((r.fp_of_sorted - 0.12).abs() < 0.005);
        assert!((r.factor - 4.4).abs() < 0.05);
        assert!((r.fn_of_screened - 0.006).abs() < 1e-12);

        let none = SortOutcomeModel::new(0.2, 0.0, 0.0).unwrap();
        assert_eq!(expected_post_sort(&none), Err(StatsError::UndefinedPurity));
        assert!(SortOutcomeModel::new(1.2, 0.5, 0.5).is_err());
    }

    #[test]
    fn factor_times_prevalence_is_purity() {
        for &(p, s, f) in &[(0.2, 0.97, 0.0331), (0.5, 0.5, 0.5), (0.01, 0.9, 0.2)] {
            let r = expected_post_sort(&SortOutcomeModel::new(p, s, f).unwrap()).unwrap();
            assert!((r.factor * p - r.purity_after).abs() <= 1e-15);
            let via = enrichment_factor(r.purity_before, r.purity_after).unwrap();
            assert_eq!(via, r.factor);
        }
    }

    #[test]
    fn enrichment_examples() {
        assert!((enrichment_factor(0.20, 0.80).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(enrichment_factor(0.37, 0.37).unwrap(), 1.0);
        assert!((enrichment_factor(0.25, 0.75).unwrap() - 3.0).abs() < 1e-12);
        assert!(enrichment_factor(0.0, 0.5).is_err());
    }
}
