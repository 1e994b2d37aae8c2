//! Statistical verification of reduction outputs.
//!
//! Checks the claims a finished reduction makes about its artifacts:
//! that a labeled sample is realized by an explicit network (to a pre-clip
//! tolerance), that a scattered sample's labels look like fair coins
//! independent of the inputs, that pushed weight columns follow the
//! declared distribution family, how often sampled transforms fall below
//! a singular-value floor, and whether a budgeted learner can tell a
//! realizable sample from a scattered one by its mean squared loss.
//!
//! Every check returns [`StatReport`] rows; `render_table` formats them
//! and `exit_code` folds them into the 0/1/2 (pass/fail/inconclusive)
//! convention used by the command-line tools.

pub mod learners;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gadget::LabeledSample;
use crate::neural::NetworkWeights;
use crate::rng::{derive_rng, derive_seed, rng_for};
use crate::stats;
use crate::transform::{sample_fc_transform, sphere_vector, DistributionSpec, IidLaw};
use learners::{ExampleOracle, Learner};

/// Pre-clip slack allowed when certifying realizability.
pub const REALIZABILITY_TOL: f64 = 1e-6;
/// Significance level for the scattered-sample tests.
pub const SCATTERED_ALPHA: f64 = 1e-3;
/// Significance level for the weight-distribution tests.
pub const DISTRIBUTION_ALPHA: f64 = 1e-2;
/// Mean-squared-loss boundary between the two distinguisher verdicts.
pub const DISTINGUISH_LOSS_BOUND: f64 = 0.1;
/// Fewer points than this makes the scattered tests inconclusive.
pub const MIN_SCATTERED_POINTS: usize = 100;
/// Floor on Monte Carlo trials for tail estimates.
pub const MIN_TAIL_TRIALS: usize = 100;
/// Allowed deviation, in standard errors, for empirical raw moments.
pub const MOMENT_Z_BOUND: f64 = 6.0;
/// Absolute slack on quantities that should be exact up to roundoff.
pub const EXACTNESS_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "FAIL",
            Outcome::Inconclusive => "inconclusive",
        }
    }
}

/// One statistical check: what ran, what it measured, and how it ended.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StatReport {
    pub test: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub outcome: Outcome,
    pub sample_size: usize,
    pub threshold: f64,
    pub note: String,
}

impl StatReport {
    fn decided(
        test: &str,
        statistic: f64,
        p_value: Option<f64>,
        pass: bool,
        sample_size: usize,
        threshold: f64,
        note: String,
    ) -> Self {
        StatReport {
            test: test.to_string(),
            statistic,
            p_value,
            outcome: if pass { Outcome::Pass } else { Outcome::Fail },
            sample_size,
            threshold,
            note,
        }
    }

    fn inconclusive(test: &str, statistic: f64, sample_size: usize, threshold: f64, note: String) -> Self {
        StatReport {
            test: test.to_string(),
            statistic,
            p_value: None,
            outcome: Outcome::Inconclusive,
            sample_size,
            threshold,
            note,
        }
    }
}

/// Fixed-width table, one row per report.
pub fn render_table(reports: &[StatReport]) -> String {
    let name_w = reports
        .iter()
        .map(|r| r.test.len())
        .chain(std::iter::once("test".len()))
        .max()
        .unwrap();
    let mut out = format!(
        "{:<name_w$}  {:<12}  {:>12}  {:>10}  {:>8}  {:>12}  note\n",
        "test", "outcome", "statistic", "p-value", "n", "threshold"
    );
    for r in reports {
        let p = r
            .p_value
            .map_or_else(|| "-".to_string(), |p| format!("{p:.3e}"));
        out.push_str(&format!(
            "{:<name_w$}  {:<12}  {:>12.5e}  {:>10}  {:>8}  {:>12.5e}  {}\n",
            r.test,
            r.outcome.label(),
            r.statistic,
            p,
            r.sample_size,
            r.threshold,
            r.note
        ));
    }
    out
}

/// 0 when every check passed, 1 when any failed, 2 otherwise.
pub fn exit_code(reports: &[StatReport]) -> i32 {
    if reports.iter().any(|r| r.outcome == Outcome::Fail) {
        1
    } else if reports.is_empty() || reports.iter().any(|r| r.outcome == Outcome::Inconclusive) {
        2
    } else {
        0
    }
}

// ─── realizability ───

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RealizabilityCheck {
    /// Every pre-clip sum lands within `tol` of its label's side.
    pub realizable: bool,
    /// Worst pre-clip shortfall: max over points of 1 - pre (label 1,
    /// floored at 0) or pre (label 0).
    pub residual: f64,
    /// Clipped outputs equal the labels bitwise, with no tolerance.
    pub labels_exact: bool,
}

/// Certify that `weights` reproduces every label in `sample`.
pub fn check_realizable(
    sample: &LabeledSample,
    weights: &NetworkWeights,
    tol: f64,
) -> Result<RealizabilityCheck> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "realizability tolerance must be finite and nonnegative, got {tol}"
        )));
    }
    if !weights.input_dim_compatible(sample.dim()) {
        return Err(Error::DimensionMismatch(format!(
            "weights do not accept inputs of dimension {}",
            sample.dim()
        )));
    }
    let mut residual = 0.0f64;
    let mut labels_exact = true;
    for p in sample.points() {
        let pre = weights.pre_clip(&p.x)?;
        if pre.clamp(0.0, 1.0) != f64::from(p.y) {
            labels_exact = false;
        }
        let r = if p.y == 1 {
            (1.0 - pre).max(0.0)
        } else {
            pre.max(0.0)
        };
        residual = residual.max(r);
    }
    Ok(RealizabilityCheck {
        realizable: residual <= tol,
        residual,
        labels_exact,
    })
}

// ─── scatteredness ───

/// Test that labels are balanced fair coins independent of every coordinate.
///
/// Needs at least [`MIN_SCATTERED_POINTS`] points; below that the single
/// returned row is inconclusive. Balance is an exact two-sided binomial
/// test, independence a per-coordinate point-biserial correlation with
/// Bonferroni correction, both at [`SCATTERED_ALPHA`].
pub fn test_scattered(sample: &LabeledSample) -> Result<Vec<StatReport>> {
    let m = sample.len();
    if m < MIN_SCATTERED_POINTS {
        return Ok(vec![StatReport::inconclusive(
            "scattered-precondition",
            m as f64,
            m,
            MIN_SCATTERED_POINTS as f64,
            format!("needs at least {MIN_SCATTERED_POINTS} points"),
        )]);
    }
    let mut reports = Vec::with_capacity(2);

    let ones = sample.points().iter().filter(|p| p.y == 1).count();
    let p_bin = stats::binomial_two_sided(ones as u64, m as u64, 0.5)?;
    reports.push(StatReport::decided(
        "label-balance",
        ones as f64,
        Some(p_bin),
        p_bin >= SCATTERED_ALPHA,
        m,
        SCATTERED_ALPHA,
        format!("{ones} of {m} labels are 1, exact binomial"),
    ));

    let labels: Vec<u8> = sample.points().iter().map(|p| p.y).collect();
    let dim = sample.dim();
    let mut min_p_adj = 1.0f64;
    let mut worst_r = 0.0f64;
    let mut worst_coord = 0usize;
    for d in 0..dim {
        let xs: Vec<f64> = sample.points().iter().map(|p| p.x[d]).collect();
        let (r, p) = stats::point_biserial(&xs, &labels)?;
        let p_adj = (p * dim as f64).min(1.0);
        if p_adj < min_p_adj {
            min_p_adj = p_adj;
            worst_r = r.abs();
            worst_coord = d;
        }
    }
    reports.push(StatReport::decided(
        "label-independence",
        worst_r,
        Some(min_p_adj),
        min_p_adj >= SCATTERED_ALPHA,
        m,
        SCATTERED_ALPHA,
        format!("worst of {dim} point-biserial tests (coordinate {worst_coord}), Bonferroni-corrected"),
    ));
    Ok(reports)
}

// ─── weight distribution ───

/// Test that weight columns follow the declared family.
///
/// `columns` are full weight vectors (fully connected columns or
/// convolutional filters), pooled across however many transforms the
/// caller sampled. The battery per family:
///
/// * iid: two-sample KS of all entries against fresh draws seeded by
///   `reference_seed`, raw moments 1-4 against their closed forms
///   (within [`MOMENT_Z_BOUND`] standard errors), and for signed coins an
///   exact magnitude check;
/// * sphere: per-column norm exactness plus KS of a fixed random 1-D
///   projection against freshly drawn sphere points;
/// * correlated Gaussian: entrywise empirical covariance against the
///   model (Bonferroni z-bound) plus per-coordinate KS against the
///   matching marginal.
pub fn test_distribution(
    columns: &[Vec<f64>],
    spec: &DistributionSpec,
    reference_seed: u64,
) -> Result<Vec<StatReport>> {
    spec.validate()?;
    if columns.is_empty() || columns[0].is_empty() {
        return Err(Error::InvalidParameter(
            "distribution test needs at least one nonempty column".into(),
        ));
    }
    let dim = columns[0].len();
    for (j, c) in columns.iter().enumerate() {
        if c.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "column {j} has length {}, expected {dim}",
                c.len()
            )));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "column {j} contains a non-finite value"
            )));
        }
    }
    let n_cols = columns.len();

    match spec {
        DistributionSpec::IidSymmetric(law) => {
            let pooled: Vec<f64> = columns.iter().flatten().copied().collect();
            let n = pooled.len();
            let mut reports = Vec::new();

            let mut rng = rng_for(reference_seed, "dist-ref");
            let fresh: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
            let (d_stat, p) = stats::ks_two_sample(&pooled, &fresh)?;
            reports.push(StatReport::decided(
                "ks-pooled",
                d_stat,
                Some(p),
                p >= DISTRIBUTION_ALPHA,
                n,
                DISTRIBUTION_ALPHA,
                format!("all entries vs {n} fresh draws"),
            ));

            let analytic = match *law {
                IidLaw::Normal { sigma } => [0.0, sigma * sigma, 0.0, 3.0 * sigma.powi(4)],
                IidLaw::Uniform { radius } => {
                    [0.0, radius * radius / 3.0, 0.0, radius.powi(4) / 5.0]
                }
                IidLaw::Bernoulli { radius } => [0.0, radius * radius, 0.0, radius.powi(4)],
            };
            let mut worst_z = 0.0f64;
            let mut worst_order = 1u32;
            for k in 1..=4u32 {
                let m_hat = stats::raw_moment(&pooled, k);
                let var = pooled
                    .iter()
                    .map(|v| {
                        let d = v.powi(k as i32) - m_hat;
                        d * d
                    })
                    .sum::<f64>()
                    / (n as f64 - 1.0);
                let se = (var / n as f64).sqrt();
                let dev = (m_hat - analytic[(k - 1) as usize]).abs();
                // Degenerate powers (signed coins) leave both the deviation
                // and the standard error at summation-roundoff scale, where
                // z is meaningless; agreement within roundoff passes first.
                let z = if dev <= analytic[(k - 1) as usize].abs() * 1e-9 + 1e-12 {
                    0.0
                } else if se > 0.0 {
                    dev / se
                } else {
                    f64::INFINITY
                };
                if z > worst_z {
                    worst_z = z;
                    worst_order = k;
                }
            }
            reports.push(StatReport::decided(
                "moments",
                worst_z,
                None,
                worst_z <= MOMENT_Z_BOUND,
                n,
                MOMENT_Z_BOUND,
                format!("raw moments 1-4 vs law, worst order {worst_order}, standard-error units"),
            ));

            if let IidLaw::Bernoulli { radius } = law {
                let bad = pooled.iter().filter(|v| v.abs() != *radius).count();
                reports.push(StatReport::decided(
                    "sign-magnitude",
                    bad as f64,
                    None,
                    bad == 0,
                    n,
                    0.0,
                    format!("entries off the two-point support {{-{radius}, {radius}}}"),
                ));
            }
            Ok(reports)
        }

        DistributionSpec::SphereCols { radius } => {
            let mut reports = Vec::new();
            let max_dev = columns
                .iter()
                .map(|c| (c.iter().map(|v| v * v).sum::<f64>().sqrt() - radius).abs())
                .fold(0.0, f64::max);
            reports.push(StatReport::decided(
                "column-norms",
                max_dev,
                None,
                max_dev <= EXACTNESS_TOL,
                n_cols,
                EXACTNESS_TOL,
                "per-column euclidean norm vs radius".to_string(),
            ));

            let mut prng = rng_for(reference_seed, "dist-proj");
            let u = sphere_vector(dim, 1.0, &mut prng);
            let proj: Vec<f64> = columns
                .iter()
                .map(|c| c.iter().zip(&u).map(|(a, b)| a * b).sum())
                .collect();
            let mut rng = rng_for(reference_seed, "dist-ref");
            let fresh: Vec<f64> = (0..n_cols)
                .map(|_| {
                    let v = sphere_vector(dim, *radius, &mut rng);
                    v.iter().zip(&u).map(|(a, b)| a * b).sum()
                })
                .collect();
            let (d_stat, p) = stats::ks_two_sample(&proj, &fresh)?;
            reports.push(StatReport::decided(
                "ks-projection",
                d_stat,
                Some(p),
                p >= DISTRIBUTION_ALPHA,
                n_cols,
                DISTRIBUTION_ALPHA,
                "columns vs fresh sphere points along a fixed random direction".to_string(),
            ));
            Ok(reports)
        }

        DistributionSpec::GaussianCols { cov } => {
            let sigma = cov.materialize(dim)?;
            let mut reports = Vec::new();

            let stacked = DMatrix::from_fn(dim, n_cols, |i, j| columns[j][i]);
            let chat = &stacked * stacked.transpose() / n_cols as f64;
            let zstar =
                stats::normal_quantile(1.0 - DISTRIBUTION_ALPHA / (2.0 * (dim * dim) as f64))?;
            let mut worst_z = 0.0f64;
            let mut worst_pair = (0usize, 0usize);
            for i in 0..dim {
                for j in 0..=i {
                    let sd = (sigma[(i, i)] * sigma[(j, j)] + sigma[(i, j)] * sigma[(i, j)])
                        .sqrt();
                    let z = (chat[(i, j)] - sigma[(i, j)]).abs() * (n_cols as f64).sqrt() / sd;
                    if z > worst_z {
                        worst_z = z;
                        worst_pair = (i, j);
                    }
                }
            }
            reports.push(StatReport::decided(
                "covariance",
                worst_z,
                None,
                worst_z <= zstar,
                n_cols,
                zstar,
                format!(
                    "max entrywise z-score (at {:?}) vs model, Bonferroni over {} entries",
                    worst_pair,
                    dim * dim
                ),
            ));

            let mut min_p_adj = 1.0f64;
            let mut worst_d = 0.0f64;
            let mut worst_coord = 0usize;
            for i in 0..dim {
                let xs: Vec<f64> = columns.iter().map(|c| c[i]).collect();
                let sd_i = sigma[(i, i)].sqrt();
                let mut rng = derive_rng(reference_seed, "dist-coord", i as u64);
                let fresh: Vec<f64> = (0..n_cols)
                    .map(|_| {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        sd_i * g
                    })
                    .collect();
                let (d_stat, p) = stats::ks_two_sample(&xs, &fresh)?;
                let p_adj = (p * dim as f64).min(1.0);
                if p_adj < min_p_adj {
                    min_p_adj = p_adj;
                    worst_d = d_stat;
                    worst_coord = i;
                }
            }
            reports.push(StatReport::decided(
                "ks-coordinates",
                worst_d,
                Some(min_p_adj),
                min_p_adj >= DISTRIBUTION_ALPHA,
                n_cols,
                DISTRIBUTION_ALPHA,
                format!(
                    "worst of {dim} marginal KS tests (coordinate {worst_coord}), Bonferroni-corrected"
                ),
            ));
            Ok(reports)
        }
    }
}

// ─── singular-value tail ───

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SminTail {
    pub trials: usize,
    pub below: usize,
    pub exceedance: f64,
    pub threshold: f64,
}

/// Smallest singular values of freshly sampled fully connected transforms,
/// one per trial, each on its own derived stream. Exactly singular draws
/// report 0. Correlated-Gaussian columns factor through a standard-normal
/// block stage and a fixed correlator, so their random spectrum is
/// estimated on the standard-normal stage.
pub fn mc_smin_values(
    spec: &DistributionSpec,
    n_prime: usize,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let effective = match spec {
        DistributionSpec::GaussianCols { .. } => {
            DistributionSpec::IidSymmetric(IidLaw::Normal { sigma: 1.0 })
        }
        other => other.clone(),
    };
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = derive_seed(seed, "smin-trial", t as u64);
            match sample_fc_transform(&effective, n_prime, k, s) {
                Ok(bt) => Ok(bt.smin_blockwise()),
                Err(Error::SingularTransform(_)) => Ok(0.0),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Monte Carlo estimate of how often the smallest singular value falls
/// below `threshold`. Requires at least [`MIN_TAIL_TRIALS`] trials.
pub fn mc_smin_tail(
    spec: &DistributionSpec,
    n_prime: usize,
    k: usize,
    trials: usize,
    threshold: f64,
    seed: u64,
) -> Result<SminTail> {
    if trials < MIN_TAIL_TRIALS {
        return Err(Error::InvalidParameter(format!(
            "tail estimate needs at least {MIN_TAIL_TRIALS} trials, got {trials}"
        )));
    }
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must be finite and nonnegative, got {threshold}"
        )));
    }
    let values = mc_smin_values(spec, n_prime, k, trials, seed)?;
    let below = values.iter().filter(|v| **v < threshold).count();
    Ok(SminTail {
        trials,
        below,
        exceedance: below as f64 / trials as f64,
        threshold,
    })
}

// ─── distinguishing game ───

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Realizable,
    Scattered,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistinguishReport {
    pub verdict: Verdict,
    /// Mean squared loss of the fitted predictor over the whole sample.
    pub loss: f64,
    pub draws_used: usize,
    pub budget: usize,
    pub sample_size: usize,
    pub loss_bound: f64,
    pub learner: String,
}

/// Run the distinguishing game: fit under a draw budget of `budget`
/// examples, score on the whole sample, call it realizable when the mean
/// squared loss is at most [`DISTINGUISH_LOSS_BOUND`].
///
/// The sample must hold at least `9 * budget + dim` points so the verdict
/// is dominated by unseen examples.
pub fn distinguish_with_learner(
    learner: &mut dyn Learner,
    sample: &LabeledSample,
    budget: usize,
    seed: u64,
) -> Result<DistinguishReport> {
    if budget == 0 {
        return Err(Error::InvalidParameter("budget must be positive".into()));
    }
    let need = 9 * budget + sample.dim();
    if sample.len() < need {
        return Err(Error::InvalidParameter(format!(
            "distinguisher needs at least 9*budget + dim = {need} points, got {}",
            sample.len()
        )));
    }
    let mut oracle = ExampleOracle::new(sample, budget, seed);
    let predictor = learner.fit(&mut oracle)?;
    let draws_used = oracle.draws_used();
    let mut loss = 0.0f64;
    for p in sample.points() {
        let d = predictor(&p.x) - f64::from(p.y);
        loss += d * d;
    }
    loss /= sample.len() as f64;
    Ok(DistinguishReport {
        verdict: if loss <= DISTINGUISH_LOSS_BOUND {
            Verdict::Realizable
        } else {
            Verdict::Scattered
        },
        loss,
        draws_used,
        budget,
        sample_size: sample.len(),
        loss_bound: DISTINGUISH_LOSS_BOUND,
        learner: learner.name().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::learners::{CheatingLearner, ConstantLearner, MemorizingLearner, Predictor};
    use super::*;
    use crate::csp::{sample_planted_mixed, sample_random_mixed};
    use crate::gadget::{encode_formula, realizing_weights, LabeledSample, Provenance, SamplePoint};
    use crate::neural::CnnFilter;
    use crate::transform::{gaussian_correlator, smin_threshold, CovModel};
    use rand::Rng;

    fn planted_sample(seed: u64) -> (LabeledSample, NetworkWeights) {
        let f = sample_planted_mixed(7, 60, 2, 2, seed).unwrap();
        let sample = encode_formula(&f).unwrap();
        let w = NetworkWeights::Cnn(realizing_weights(f.planted().unwrap()));
        (sample, w)
    }

    fn with_labels(sample: &LabeledSample, labels: impl Fn(usize, u8) -> u8) -> LabeledSample {
        let points = sample
            .points()
            .iter()
            .enumerate()
            .map(|(i, p)| SamplePoint {
                x: p.x.clone(),
                y: labels(i, p.y),
            })
            .collect();
        LabeledSample::new(
            sample.dim(),
            points,
            Provenance::Unknown,
            sample.norm_bound(),
            sample.shape(),
        )
        .unwrap()
    }

    #[test]
    fn realizing_network_certifies_exactly() {
        let (sample, w) = planted_sample(11);
        let chk = check_realizable(&sample, &w, REALIZABILITY_TOL).unwrap();
        assert!(chk.realizable);
        assert_eq!(chk.residual, 0.0);
        assert!(chk.labels_exact);
    }

    #[test]
    fn flipped_label_breaks_realizability() {
        let (sample, w) = planted_sample(12);
        let broken = with_labels(&sample, |i, y| if i == 0 { 1 - y } else { y });
        let chk = check_realizable(&broken, &w, REALIZABILITY_TOL).unwrap();
        assert!(!chk.realizable);
        assert!(!chk.labels_exact);
        assert!(chk.residual >= 0.9, "residual {}", chk.residual);
    }

    #[test]
    fn realizability_rejects_wrong_dimension() {
        let (sample, _) = planted_sample(13);
        let w = NetworkWeights::Cnn(CnnFilter::new(vec![1.0; 3]).unwrap());
        assert!(matches!(
            check_realizable(&sample, &w, REALIZABILITY_TOL),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn scattered_sample_passes_both_tests() {
        let f = sample_random_mixed(10, 400, 3, 2, 21).unwrap();
        let sample = encode_formula(&f).unwrap();
        let reports = test_scattered(&sample).unwrap();
        assert_eq!(reports.len(), 2);
        for r in &reports {
            assert_eq!(r.outcome, Outcome::Pass, "{}: p={:?}", r.test, r.p_value);
        }
        assert_eq!(exit_code(&reports), 0);
    }

    #[test]
    fn constant_labels_fail_balance() {
        let f = sample_random_mixed(10, 300, 3, 2, 22).unwrap();
        let sample = with_labels(&encode_formula(&f).unwrap(), |_, _| 1);
        let reports = test_scattered(&sample).unwrap();
        let balance = reports.iter().find(|r| r.test == "label-balance").unwrap();
        assert_eq!(balance.outcome, Outcome::Fail);
        assert_eq!(exit_code(&reports), 1);
    }

    #[test]
    fn coordinate_dependent_labels_fail_independence() {
        let mut rng = rng_for(77, "dep-test");
        let points: Vec<SamplePoint> = (0..300)
            .map(|_| {
                let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let y = u8::from(x[0] > 0.0);
                SamplePoint { x, y }
            })
            .collect();
        let sample = LabeledSample::new(3, points, Provenance::Unknown, 2.0, None).unwrap();
        let reports = test_scattered(&sample).unwrap();
        let indep = reports
            .iter()
            .find(|r| r.test == "label-independence")
            .unwrap();
        assert_eq!(indep.outcome, Outcome::Fail);
        assert!(indep.note.contains("coordinate 0"));
    }

    #[test]
    fn undersized_sample_is_inconclusive() {
        let f = sample_random_mixed(8, 50, 2, 2, 23).unwrap();
        let sample = encode_formula(&f).unwrap();
        let reports = test_scattered(&sample).unwrap();
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].outcome, Outcome::Inconclusive);
        assert_eq!(exit_code(&reports), 2);
    }

    fn direct_columns(law: &IidLaw, n_cols: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng_for(seed, "direct-cols");
        (0..n_cols)
            .map(|_| (0..dim).map(|_| law.sample(&mut rng)).collect())
            .collect()
    }

    #[test]
    fn iid_families_match_their_own_law() {
        for (law, seed) in [
            (IidLaw::Normal { sigma: 2.0 }, 31u64),
            (IidLaw::Uniform { radius: 1.5 }, 32),
            (IidLaw::Bernoulli { radius: 0.7 }, 33),
        ] {
            let cols = direct_columns(&law, 40, 100, seed);
            let spec = DistributionSpec::IidSymmetric(law);
            let reports = test_distribution(&cols, &spec, 1000 + seed).unwrap();
            for r in &reports {
                assert_eq!(r.outcome, Outcome::Pass, "{}: {:?}", r.test, r);
            }
        }
    }

    #[test]
    fn wrong_scale_fails_ks() {
        let cols = direct_columns(&IidLaw::Normal { sigma: 1.0 }, 40, 100, 41);
        let spec = DistributionSpec::IidSymmetric(IidLaw::Normal { sigma: 2.0 });
        let reports = test_distribution(&cols, &spec, 99).unwrap();
        assert_eq!(exit_code(&reports), 1);
    }

    #[test]
    fn bernoulli_magnitude_check_is_exact() {
        let mut cols = direct_columns(&IidLaw::Bernoulli { radius: 0.5 }, 10, 50, 51);
        let spec = DistributionSpec::IidSymmetric(IidLaw::Bernoulli { radius: 0.5 });
        let clean = test_distribution(&cols, &spec, 52).unwrap();
        let mag = clean.iter().find(|r| r.test == "sign-magnitude").unwrap();
        assert_eq!(mag.outcome, Outcome::Pass);
        cols[3][7] = 0.5000001;
        let dirty = test_distribution(&cols, &spec, 52).unwrap();
        let mag = dirty.iter().find(|r| r.test == "sign-magnitude").unwrap();
        assert_eq!(mag.outcome, Outcome::Fail);
        assert_eq!(mag.statistic, 1.0);
    }

    #[test]
    fn sphere_columns_pass_and_offsphere_fail() {
        let mut rng = rng_for(61, "sphere-cols");
        let cols: Vec<Vec<f64>> = (0..300).map(|_| sphere_vector(16, 2.0, &mut rng)).collect();
        let spec = DistributionSpec::SphereCols { radius: 2.0 };
        let reports = test_distribution(&cols, &spec, 62).unwrap();
        for r in &reports {
            assert_eq!(r.outcome, Outcome::Pass, "{}: {:?}", r.test, r);
        }
        let mut bad = cols;
        for c in bad.iter_mut() {
            for v in c.iter_mut() {
                *v *= 1.01;
            }
        }
        let reports = test_distribution(&bad, &spec, 62).unwrap();
        let norms = reports.iter().find(|r| r.test == "column-norms").unwrap();
        assert_eq!(norms.outcome, Outcome::Fail);
    }

    #[test]
    fn correlated_gaussian_columns_match_model() {
        let cov = CovModel::Ar1 { rho: 0.6 };
        let sigma = cov.materialize(5).unwrap();
        let corr = gaussian_correlator(&sigma).unwrap();
        let mut rng = rng_for(71, "gauss-cols");
        let cols: Vec<Vec<f64>> = (0..3000)
            .map(|_| {
                let g: Vec<f64> = (0..5).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                corr.push_vec(&g).unwrap()
            })
            .collect();
        let spec = DistributionSpec::GaussianCols { cov };
        let reports = test_distribution(&cols, &spec, 72).unwrap();
        for r in &reports {
            assert_eq!(r.outcome, Outcome::Pass, "{}: {:?}", r.test, r);
        }
        // The same draws against an independence model must trip the
        // covariance check.
        let spec_id = DistributionSpec::GaussianCols {
            cov: CovModel::Identity,
        };
        let reports = test_distribution(&cols, &spec_id, 72).unwrap();
        let covr = reports.iter().find(|r| r.test == "covariance").unwrap();
        assert_eq!(covr.outcome, Outcome::Fail);
    }

    #[test]
    fn smin_tail_bounds_and_floor() {
        let spec = DistributionSpec::IidSymmetric(IidLaw::Normal { sigma: 1.0 });
        let tail = mc_smin_tail(&spec, 6, 4, 120, 0.0, 5).unwrap();
        assert_eq!(tail.below, 0);
        let tail = mc_smin_tail(&spec, 6, 4, 120, 1e9, 5).unwrap();
        assert_eq!(tail.below, 120);
        assert!(matches!(
            mc_smin_tail(&spec, 6, 4, 99, 0.1, 5),
            Err(Error::InvalidParameter(_))
        ));
    }

    // Thresholds scale linearly in sigma and powers of two scale floats
    // exactly, so the tail estimate must be literally scale-free.
    #[test]
    fn smin_tail_is_scale_free() {
        let spec1 = DistributionSpec::IidSymmetric(IidLaw::Normal { sigma: 1.0 });
        let spec4 = DistributionSpec::IidSymmetric(IidLaw::Normal { sigma: 4.0 });
        let t1 = smin_threshold(&spec1, 6).unwrap();
        let t4 = smin_threshold(&spec4, 6).unwrap();
        let a = mc_smin_tail(&spec1, 6, 3, 150, t1, 9).unwrap();
        let b = mc_smin_tail(&spec4, 6, 3, 150, t4, 9).unwrap();
        assert_eq!(a.below, b.below);
    }

    #[test]
    fn gaussian_tail_uses_standard_normal_stage() {
        let spec = DistributionSpec::GaussianCols {
            cov: CovModel::Ar1 { rho: 0.3 },
        };
        let normal = DistributionSpec::IidSymmetric(IidLaw::Normal { sigma: 1.0 });
        let a = mc_smin_values(&spec, 5, 3, 8, 17).unwrap();
        let b = mc_smin_values(&normal, 5, 3, 8, 17).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cheater_wins_constant_loses() {
        let (sample, w) = planted_sample(81);
        assert!(sample.len() >= 9 * 3 + sample.dim());
        let mut cheat = CheatingLearner { weights: w };
        let rep = distinguish_with_learner(&mut cheat, &sample, 3, 82).unwrap();
        assert_eq!(rep.verdict, Verdict::Realizable);
        assert_eq!(rep.loss, 0.0);
        assert_eq!(rep.draws_used, 0);

        let mut constant = ConstantLearner;
        let rep = distinguish_with_learner(&mut constant, &sample, 3, 82).unwrap();
        assert_eq!(rep.verdict, Verdict::Scattered);
        assert!((rep.loss - 0.25).abs() < 1e-15);
    }

    #[test]
    fn memorizer_cannot_cover_a_scattered_sample() {
        let f = sample_random_mixed(9, 200, 2, 2, 83).unwrap();
        let sample = encode_formula(&f).unwrap();
        assert!(sample.len() >= 9 * 10 + sample.dim());
        let mut mem = MemorizingLearner;
        let rep = distinguish_with_learner(&mut mem, &sample, 10, 84).unwrap();
        assert_eq!(rep.verdict, Verdict::Scattered);
        assert_eq!(rep.draws_used, 10);
        assert!(rep.loss > DISTINGUISH_LOSS_BOUND, "loss {}", rep.loss);
    }

    #[test]
    fn overdrawing_learner_is_rejected() {
        struct Greedy;
        impl Learner for Greedy {
            fn name(&self) -> &'static str {
                "greedy"
            }
            fn fit(&mut self, oracle: &mut ExampleOracle<'_>) -> Result<Predictor> {
                loop {
                    oracle.draw()?;
                }
            }
        }
        let (sample, _) = planted_sample(85);
        let mut g = Greedy;
        assert!(matches!(
            distinguish_with_learner(&mut g, &sample, 2, 86),
            Err(Error::BudgetExceeded { draws: 3, budget: 2 })
        ));
    }

    #[test]
    fn undersized_distinguisher_sample_is_rejected() {
        let (sample, _) = planted_sample(87);
        let mut c = ConstantLearner;
        let budget = sample.len();
        assert!(matches!(
            distinguish_with_learner(&mut c, &sample, budget, 88),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn table_and_exit_codes() {
        let reports = vec![
            StatReport::decided("alpha", 1.5, Some(0.3), true, 10, 0.01, "ok".into()),
            StatReport::inconclusive("beta-long-name", 0.0, 2, 100.0, "tiny".into()),
        ];
        let table = render_table(&reports);
        assert!(table.contains("alpha"));
        assert!(table.contains("beta-long-name"));
        assert!(table.contains("inconclusive"));
        assert_eq!(table.lines().count(), 3);
        assert_eq!(exit_code(&reports), 2);
        assert_eq!(exit_code(&reports[..1]), 0);
        assert_eq!(exit_code(&[]), 2);
    }
}
