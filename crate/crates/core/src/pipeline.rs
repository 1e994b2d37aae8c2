//! End-to-end reductions: K-SAT to conjunction formulas to mixed formulas
//! to gadget samples to samples realized by randomly weighted networks.
//!
//! The two `reduce_to_random_*` functions take a labeled sample and rewrite
//! its points through a freshly sampled weight transform, retrying draws the
//! rejection policy refuses; labels are never touched. `end_to_end` composes
//! the whole chain from a formula draw onward and records what happened at
//! every stage in a serializable [`ReductionReport`], returning `Ok` with a
//! failed stage in the report when a probabilistic step (greedy grouping, a
//! planted assignment broken by mixing, transform rejection) falls through —
//! only parameter errors become `Err`.

use serde::{Deserialize, Serialize};

use crate::csp::{
    flip_to_mixed, reduce_sat_to_t, sample_planted_ksat, sample_random_ksat, Formula, Polarity,
    ReduceOutcome,
};
use crate::error::{Error, Result};
use crate::gadget::{encode_formula, realizing_weights, LabeledSample, Provenance, SamplePoint};
use crate::harness::{check_realizable, REALIZABILITY_TOL};
use crate::manifest::RunManifest;
use crate::neural::{CnnFilter, FcWeights, NetworkWeights};
use crate::rng::{derive_seed, rng_for};
use crate::transform::{
    cnn_norm_threshold, cnn_smin_threshold, fc_norm_threshold, gaussian_correlator,
    sample_cnn_transform, sample_fc_transform, smin_threshold, DistributionSpec, IidLaw,
    TransformChain,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    Fc,
    Cnn,
}

impl Architecture {
    pub fn label(&self) -> &'static str {
        match self {
            Architecture::Fc => "fc",
            Architecture::Cnn => "cnn",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Random,
    Planted,
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::Random => "random",
            Mode::Planted => "planted",
        }
    }
}

/// When to refuse a sampled transform and draw again.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RejectionPolicy {
    /// Attempts before giving up.
    pub retry_cap: usize,
    /// Reject when smin < singular_ratio * smax.
    pub singular_ratio: f64,
    /// Optional hard cap on the chain's condition number.
    pub max_cond: Option<f64>,
}

impl Default for RejectionPolicy {
    fn default() -> Self {
        RejectionPolicy {
            retry_cap: 16,
            singular_ratio: 1e-12,
            max_cond: None,
        }
    }
}

impl RejectionPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.retry_cap == 0 {
            return Err(Error::InvalidParameter("retry cap must be positive".into()));
        }
        if !(self.singular_ratio.is_finite() && self.singular_ratio >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "singular ratio must be finite and nonnegative, got {}",
                self.singular_ratio
            )));
        }
        if let Some(mc) = self.max_cond {
            if !(mc.is_finite() && mc >= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "condition cap must be finite and at least 1, got {mc}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum StageStatus {
    Completed,
    Skipped { reason: String },
    Failed { reason: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub status: StageStatus,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FormulaStats {
    pub kind: String,
    pub n_vars: usize,
    pub n_constraints: usize,
    pub clause_size: usize,
    pub clauses_per_constraint: usize,
    pub planted: bool,
    pub negated_constraints: usize,
    /// How many negated constraints the planted assignment satisfies;
    /// absent without a plant.
    pub negated_satisfied: Option<usize>,
    pub content_id: String,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GroupingStats {
    pub source_clauses: usize,
    pub groups_requested: usize,
    pub groups_built: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleStats {
    pub dim: usize,
    pub points: usize,
    pub max_norm: f64,
    pub norm_bound: f64,
    pub provenance: String,
    pub content_id: String,
}

/// What the transform stage drew and how it measured up. `smin`/`smax`
/// describe the random stage (the one the singular-value floor applies
/// to); `condition_number` covers the whole chain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransformStats {
    pub architecture: String,
    pub family: String,
    pub description: String,
    pub attempts: usize,
    pub smin: f64,
    pub smax: f64,
    pub condition_number: f64,
    pub smin_threshold: f64,
    pub smin_event_held: bool,
    pub norm_threshold: f64,
    pub output_max_norm: f64,
    pub norm_within_threshold: bool,
    /// The norm ceiling is only claimed when the singular-value event
    /// holds, so compliance is norm_within_threshold or a failed event.
    pub norm_compliant: bool,
    pub content_id: String,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RealizabilityStats {
    pub tolerance: f64,
    pub residual: f64,
    pub realizable: bool,
    pub labels_exact: bool,
}

/// Norm summary of the pushed network weights: one filter for a
/// convolutional target, per-column extremes for a fully connected one.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightStats {
    pub form: String,
    pub dim: usize,
    pub units: usize,
    pub min_norm: f64,
    pub max_norm: f64,
}

pub fn weight_stats(w: &NetworkWeights) -> WeightStats {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    match w {
        NetworkWeights::Fc(fc) => {
            let norms: Vec<f64> = fc.columns().iter().map(|c| norm(c)).collect();
            WeightStats {
                form: "fc".to_string(),
                dim: fc.n(),
                units: fc.m(),
                min_norm: norms.iter().copied().fold(f64::INFINITY, f64::min),
                max_norm: norms.iter().copied().fold(0.0, f64::max),
            }
        }
        NetworkWeights::Cnn(f) => WeightStats {
            form: "cnn".to_string(),
            dim: f.t(),
            units: 1,
            min_norm: f.norm(),
            max_norm: f.norm(),
        },
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ReductionReport {
    pub mode: String,
    pub architecture: String,
    pub family: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
    pub sat_formula: Option<FormulaStats>,
    pub grouping: Option<GroupingStats>,
    pub mixed_formula: Option<FormulaStats>,
    pub gadget_sample: Option<SampleStats>,
    pub transform: Option<TransformStats>,
    pub output_sample: Option<SampleStats>,
    pub pushed_weights: Option<WeightStats>,
    pub realizability: Option<RealizabilityStats>,
    pub manifest: Option<RunManifest>,
}

impl ReductionReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(Error::from)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(Error::from)
    }

    /// No stage failed mechanically.
    pub fn mechanical_ok(&self) -> bool {
        !self
            .stages
            .iter()
            .any(|s| matches!(s.status, StageStatus::Failed { .. }))
    }

    /// Mechanical success and, when a realizability check ran, a
    /// realizable verdict.
    pub fn verdict_ok(&self) -> bool {
        self.mechanical_ok() && self.realizability.is_none_or(|r| r.realizable)
    }
}

fn formula_stats(f: &Formula) -> FormulaStats {
    let negated: Vec<_> = f
        .constraints()
        .iter()
        .filter(|c| c.polarity == Polarity::Negated)
        .collect();
    let negated_satisfied = f
        .planted()
        .map(|psi| negated.iter().filter(|c| c.evaluate(psi)).count());
    FormulaStats {
        kind: f.kind().label().to_string(),
        n_vars: f.n_vars(),
        n_constraints: f.constraints().len(),
        clause_size: f.clause_size(),
        clauses_per_constraint: f.clauses_per_constraint(),
        planted: f.planted().is_some(),
        negated_constraints: negated.len(),
        negated_satisfied,
        content_id: f.content_id(),
    }
}

fn sample_stats(s: &LabeledSample) -> SampleStats {
    SampleStats {
        dim: s.dim(),
        points: s.len(),
        max_norm: s.max_norm(),
        norm_bound: s.norm_bound(),
        provenance: s.provenance().label().to_string(),
        content_id: s.content_id(),
    }
}

/// A transformed sample together with the transform that produced it and,
/// when a realizing filter was supplied, the pushed network weights.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub sample: LabeledSample,
    pub weights: Option<NetworkWeights>,
    pub chain: TransformChain,
    pub stats: TransformStats,
}

fn patch_dim(sample: &LabeledSample, filter: Option<&CnnFilter>) -> Result<usize> {
    let s = match (filter, sample.shape()) {
        (Some(f), Some(shape)) => {
            if f.t() != shape.block_dim() {
                return Err(Error::DimensionMismatch(format!(
                    "filter has {} weights but the sample's blocks have dimension {}",
                    f.t(),
                    shape.block_dim()
                )));
            }
            f.t()
        }
        (Some(f), None) => f.t(),
        (None, Some(shape)) => shape.block_dim(),
        (None, None) => {
            return Err(Error::InvalidParameter(
                "cannot infer the patch dimension: pass a filter or a shaped sample".into(),
            ))
        }
    };
    if s < 2 {
        return Err(Error::InvalidParameter(
            "patch dimension must be at least 2".into(),
        ));
    }
    if sample.dim() % s != 0 {
        return Err(Error::DimensionMismatch(format!(
            "sample dimension {} is not a multiple of patch dimension {s}",
            sample.dim()
        )));
    }
    Ok(s)
}

fn transformed_sample(sample: &LabeledSample, chain: &TransformChain) -> Result<LabeledSample> {
    let mut points = Vec::with_capacity(sample.len());
    for p in sample.points() {
        points.push(SamplePoint {
            x: chain.pull_point(&p.x)?,
            y: p.y,
        });
    }
    let max_norm = points
        .iter()
        .map(|p| p.x.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    LabeledSample::new(
        sample.dim(),
        points,
        Provenance::Transformed {
            parent: Box::new(sample.provenance().clone()),
            transform: chain.describe(),
        },
        max_norm,
        sample.shape(),
    )
}

/// Rewrite `sample` through a fully connected diagonal-blocks transform
/// drawn from `spec` (plus a fixed correlator stage for correlated-Gaussian
/// columns), retrying under `policy`. When `filter` is given, the pushed
/// weight matrix comes back too.
pub fn reduce_to_random_fc(
    sample: &LabeledSample,
    filter: Option<&CnnFilter>,
    spec: &DistributionSpec,
    seed: u64,
    policy: &RejectionPolicy,
) -> Result<Reduction> {
    spec.validate()?;
    policy.validate()?;
    if sample.is_empty() {
        return Err(Error::InvalidParameter("empty sample".into()));
    }
    let s = patch_dim(sample, filter)?;
    let n_prime = s - 1;
    let k = sample.dim() / s;

    let dense = match spec {
        DistributionSpec::GaussianCols { cov } => Some(gaussian_correlator(
            &cov.materialize(sample.dim())?,
        )?),
        _ => None,
    };
    let dense_cond = dense.as_ref().map_or(1.0, |d| d.condition_number());
    let block_spec = match spec {
        DistributionSpec::GaussianCols { .. } => {
            DistributionSpec::IidSymmetric(IidLaw::Normal { sigma: 1.0 })
        }
        other => other.clone(),
    };

    let mut attempts = 0usize;
    let block = loop {
        if attempts >= policy.retry_cap {
            return Err(Error::SingularTransform(format!(
                "no acceptable block transform in {attempts} attempts"
            )));
        }
        let attempt_seed = derive_seed(seed, "fc-reduce-attempt", attempts as u64);
        attempts += 1;
        match sample_fc_transform(&block_spec, n_prime, k, attempt_seed) {
            Ok(bt) => {
                if bt.smin_blockwise() < policy.singular_ratio * bt.smax() {
                    continue;
                }
                if let Some(mc) = policy.max_cond {
                    if !(bt.condition_number() * dense_cond <= mc) {
                        continue;
                    }
                }
                break bt;
            }
            Err(Error::SingularTransform(_)) => continue,
            Err(e) => return Err(e),
        }
    };

    let (bsmin, bsmax, bcond) = (block.smin_blockwise(), block.smax(), block.condition_number());
    let chain = TransformChain::Fc { block, dense };
    let out = transformed_sample(sample, &chain)?;
    let smin_thr = smin_threshold(spec, n_prime)?;
    let norm_thr = fc_norm_threshold(spec, sample.dim())?;
    let smin_event_held = bsmin >= smin_thr;
    let norm_within = out.max_norm() <= norm_thr;
    let stats = TransformStats {
        architecture: "fc".to_string(),
        family: spec.label().to_string(),
        description: chain.describe(),
        attempts,
        smin: bsmin,
        smax: bsmax,
        condition_number: bcond * dense_cond,
        smin_threshold: smin_thr,
        smin_event_held,
        norm_threshold: norm_thr,
        output_max_norm: out.max_norm(),
        norm_within_threshold: norm_within,
        norm_compliant: norm_within || !smin_event_held,
        content_id: chain.content_id(),
    };
    let weights = filter.map(|f| chain.push_weights(f)).transpose()?;
    Ok(Reduction {
        sample: out,
        weights,
        chain,
        stats,
    })
}

/// Rewrite `sample` patchwise through a convolutional transform drawn from
/// `spec`, retrying under `policy`. The first chain stage carries the
/// randomness; the singular-value floor applies to it.
pub fn reduce_to_random_cnn(
    sample: &LabeledSample,
    filter: Option<&CnnFilter>,
    spec: &DistributionSpec,
    seed: u64,
    policy: &RejectionPolicy,
) -> Result<Reduction> {
    spec.validate()?;
    policy.validate()?;
    if sample.is_empty() {
        return Err(Error::InvalidParameter("empty sample".into()));
    }
    let s = patch_dim(sample, filter)?;
    let n_prime = s - 1;

    let mut attempts = 0usize;
    let stages = loop {
        if attempts >= policy.retry_cap {
            return Err(Error::SingularTransform(format!(
                "no acceptable patch transform in {attempts} attempts"
            )));
        }
        let attempt_seed = derive_seed(seed, "cnn-reduce-attempt", attempts as u64);
        attempts += 1;
        match sample_cnn_transform(spec, n_prime, attempt_seed) {
            Ok(st) => {
                let smin: f64 = st.iter().map(|t| t.smin()).product();
                let smax: f64 = st.iter().map(|t| t.smax()).product();
                if smin < policy.singular_ratio * smax {
                    continue;
                }
                if let Some(mc) = policy.max_cond {
                    let cond: f64 = st.iter().map(|t| t.condition_number()).product();
                    if !(cond <= mc) {
                        continue;
                    }
                }
                break st;
            }
            Err(Error::SingularTransform(_)) => continue,
            Err(e) => return Err(e),
        }
    };

    let (rsmin, rsmax) = (stages[0].smin(), stages[0].smax());
    let cond: f64 = stages.iter().map(|t| t.condition_number()).product();
    let chain = TransformChain::Cnn { stages };
    let out = transformed_sample(sample, &chain)?;
    let smin_thr = cnn_smin_threshold(spec, n_prime)?;
    let norm_thr = cnn_norm_threshold(spec, n_prime, sample.dim())?;
    let smin_event_held = rsmin >= smin_thr;
    let norm_within = out.max_norm() <= norm_thr;
    let stats = TransformStats {
        architecture: "cnn".to_string(),
        family: spec.label().to_string(),
        description: chain.describe(),
        attempts,
        smin: rsmin,
        smax: rsmax,
        condition_number: cond,
        smin_threshold: smin_thr,
        smin_event_held,
        norm_threshold: norm_thr,
        output_max_norm: out.max_norm(),
        norm_within_threshold: norm_within,
        norm_compliant: norm_within || !smin_event_held,
        content_id: chain.content_id(),
    };
    let weights = filter.map(|f| chain.push_weights(f)).transpose()?;
    Ok(Reduction {
        sample: out,
        weights,
        chain,
        stats,
    })
}

/// Zero-pad every point to `target_dim`. Norms and labels are untouched;
/// the block shape no longer applies and is dropped.
pub fn pad_sample(sample: &LabeledSample, target_dim: usize) -> Result<LabeledSample> {
    if target_dim < sample.dim() {
        return Err(Error::InvalidParameter(format!(
            "target dimension {target_dim} is below the sample dimension {}",
            sample.dim()
        )));
    }
    if target_dim == sample.dim() {
        return Ok(sample.clone());
    }
    let points = sample
        .points()
        .iter()
        .map(|p| {
            let mut x = p.x.clone();
            x.resize(target_dim, 0.0);
            SamplePoint { x, y: p.y }
        })
        .collect();
    LabeledSample::new(
        target_dim,
        points,
        Provenance::Transformed {
            parent: Box::new(sample.provenance().clone()),
            transform: "zero-pad".to_string(),
        },
        sample.norm_bound(),
        None,
    )
}

/// Extend fully connected weight columns to `target_dim` with fresh iid
/// entries. Padded inputs are zero there, so every pre-clip sum is
/// unchanged while the columns keep their entry law.
pub fn extend_fc_weights(
    w: &FcWeights,
    target_dim: usize,
    law: &IidLaw,
    seed: u64,
) -> Result<FcWeights> {
    law.validate()?;
    if target_dim < w.n() {
        return Err(Error::InvalidParameter(format!(
            "target dimension {target_dim} is below the weight dimension {}",
            w.n()
        )));
    }
    let mut rng = rng_for(seed, "pad-weights");
    let cols = w
        .columns()
        .iter()
        .map(|c| {
            let mut col = c.clone();
            col.extend((col.len()..target_dim).map(|_| law.sample(&mut rng)));
            col
        })
        .collect();
    FcWeights::new(cols, target_dim)
}

// ─── end to end ───

/// Clauses per constraint as a function of the variable count.
pub fn clauses_per_group(n_prime: usize) -> Result<usize> {
    if n_prime < 2 {
        return Err(Error::InvalidParameter(
            "end-to-end reduction needs n' >= 2".into(),
        ));
    }
    Ok((n_prime as f64).ln().powi(2).ceil() as usize)
}

fn choose(n: usize, k: usize) -> f64 {
    let mut v = 1.0;
    for i in 0..k {
        v *= (n - i) as f64 / (i + 1) as f64;
    }
    v
}

/// Heuristic SAT clause count: expected clauses the greedy grouping scans
/// to fill each variable-disjoint group, times the group count, with 50%
/// slack.
pub fn default_sat_clauses(n_prime: usize, k: usize, q: usize, n_groups: usize) -> usize {
    let mut expected = 0.0;
    for j in 0..q {
        expected += choose(n_prime, k) / choose(n_prime - j * k, k);
    }
    (n_groups as f64 * expected * 1.5).ceil() as usize
}

#[derive(Clone, Debug)]
pub struct EndToEndOptions {
    pub mode: Mode,
    pub architecture: Architecture,
    pub n_prime: usize,
    pub clause_size: usize,
    pub n_groups: usize,
    /// SAT clause count; default is [`default_sat_clauses`].
    pub sat_clauses: Option<usize>,
    pub spec: DistributionSpec,
    pub policy: RejectionPolicy,
    pub seed: u64,
}

#[derive(Debug)]
pub struct EndToEndOutcome {
    pub sat: Option<Formula>,
    pub mixed: Option<Formula>,
    pub gadget: Option<LabeledSample>,
    pub sample: Option<LabeledSample>,
    pub weights: Option<NetworkWeights>,
    pub chain: Option<TransformChain>,
    pub report: ReductionReport,
}

fn completed(stage: &str) -> StageRecord {
    StageRecord {
        stage: stage.to_string(),
        status: StageStatus::Completed,
    }
}

fn failed(stage: &str, reason: String) -> StageRecord {
    StageRecord {
        stage: stage.to_string(),
        status: StageStatus::Failed { reason },
    }
}

fn skipped(stage: &str, reason: &str) -> StageRecord {
    StageRecord {
        stage: stage.to_string(),
        status: StageStatus::Skipped {
            reason: reason.to_string(),
        },
    }
}

/// Run the whole reduction. Probabilistic shortfalls land in the report's
/// stage records; parameter errors come back as `Err`.
pub fn end_to_end(opts: &EndToEndOptions) -> Result<EndToEndOutcome> {
    opts.spec.validate()?;
    opts.policy.validate()?;
    let q = clauses_per_group(opts.n_prime)?;
    if opts.clause_size == 0 || opts.n_groups == 0 {
        return Err(Error::InvalidParameter(
            "clause size and group count must be positive".into(),
        ));
    }
    if opts.clause_size * q > opts.n_prime {
        return Err(Error::InvalidParameter(format!(
            "groups of {q} disjoint {}-clauses need at least {} variables, got {}",
            opts.clause_size,
            opts.clause_size * q,
            opts.n_prime
        )));
    }

    let mut report = ReductionReport {
        mode: opts.mode.label().to_string(),
        architecture: opts.architecture.label().to_string(),
        family: opts.spec.label().to_string(),
        seed: opts.seed,
        ..ReductionReport::default()
    };
    let mut outcome = EndToEndOutcome {
        sat: None,
        mixed: None,
        gadget: None,
        sample: None,
        weights: None,
        chain: None,
        report: ReductionReport::default(),
    };

    let m_sat = opts
        .sat_clauses
        .unwrap_or_else(|| default_sat_clauses(opts.n_prime, opts.clause_size, q, opts.n_groups));
    let sat_seed = derive_seed(opts.seed, "sat", 0);
    let sat = match opts.mode {
        Mode::Random => sample_random_ksat(opts.n_prime, m_sat, opts.clause_size, sat_seed)?,
        Mode::Planted => sample_planted_ksat(opts.n_prime, m_sat, opts.clause_size, sat_seed)?,
    };
    report.sat_formula = Some(formula_stats(&sat));
    report.stages.push(completed("sat"));

    let t = match reduce_sat_to_t(&sat, q, opts.n_groups)? {
        ReduceOutcome::Reduced(t) => {
            report.grouping = Some(GroupingStats {
                source_clauses: m_sat,
                groups_requested: opts.n_groups,
                groups_built: opts.n_groups,
            });
            report.stages.push(completed("group"));
            t
        }
        ReduceOutcome::Fail { groups_built } => {
            report.grouping = Some(GroupingStats {
                source_clauses: m_sat,
                groups_requested: opts.n_groups,
                groups_built,
            });
            report.stages.push(failed(
                "group",
                format!(
                    "filled only {groups_built} of {} variable-disjoint groups",
                    opts.n_groups
                ),
            ));
            outcome.sat = Some(sat);
            outcome.report = report;
            return Ok(outcome);
        }
    };

    let mixed = flip_to_mixed(&t, derive_seed(opts.seed, "mix", 0))?;
    report.mixed_formula = Some(formula_stats(&mixed));
    report.stages.push(completed("mix"));

    let gadget = encode_formula(&mixed)?;
    report.gadget_sample = Some(sample_stats(&gadget));
    report.stages.push(completed("encode"));

    let filter = mixed.planted().map(realizing_weights);
    let transform_seed = derive_seed(opts.seed, "transform", 0);
    let reduction = match opts.architecture {
        Architecture::Fc => {
            reduce_to_random_fc(&gadget, filter.as_ref(), &opts.spec, transform_seed, &opts.policy)
        }
        Architecture::Cnn => {
            reduce_to_random_cnn(&gadget, filter.as_ref(), &opts.spec, transform_seed, &opts.policy)
        }
    };
    let reduction = match reduction {
        Ok(r) => r,
        Err(Error::SingularTransform(reason)) => {
            report.stages.push(failed("transform", reason));
            outcome.sat = Some(sat);
            outcome.mixed = Some(mixed);
            outcome.gadget = Some(gadget);
            outcome.report = report;
            return Ok(outcome);
        }
        Err(e) => return Err(e),
    };
    report.transform = Some(reduction.stats.clone());
    report.output_sample = Some(sample_stats(&reduction.sample));
    report.pushed_weights = reduction.weights.as_ref().map(weight_stats);
    report.stages.push(completed("transform"));

    match &reduction.weights {
        Some(w) => {
            let chk = check_realizable(&reduction.sample, w, REALIZABILITY_TOL)?;
            report.realizability = Some(RealizabilityStats {
                tolerance: REALIZABILITY_TOL,
                residual: chk.residual,
                realizable: chk.realizable,
                labels_exact: chk.labels_exact,
            });
            report.stages.push(completed("verify"));
        }
        None => {
            report
                .stages
                .push(skipped("verify", "no planted assignment, nothing to certify"));
        }
    }

    outcome.sat = Some(sat);
    outcome.mixed = Some(mixed);
    outcome.gadget = Some(gadget);
    outcome.sample = Some(reduction.sample);
    outcome.weights = reduction.weights;
    outcome.chain = Some(reduction.chain);
    outcome.report = report;
    Ok(outcome)
}
