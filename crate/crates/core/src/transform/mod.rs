//! Weight-space transforms that turn the realizing filter of an encoded
//! sample into a draw from a target weight distribution while preserving all
//! inner products: weights are pushed through a matrix M and inputs through
//! (M^T)^{-1}.
//!
//! The fully connected construction uses a diagonal-blocks matrix: with block
//! dimension s and k blocks, coordinate i = b*s + r couples only to
//! coordinates with the same in-block position r, through a k x k matrix
//! z_r. M is permutation-similar to blockdiag(z_0..z_{s-1}), so its extreme
//! singular values are the extremes over blocks and inversion splits into
//! k x k solves. Convolutional targets transform each patch independently.
//! Correlated-Gaussian targets factor as an iid stage followed by a dense
//! correlator M = U L^{1/2} built from the covariance eigendecomposition.

pub mod io;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::neural::{CnnFilter, FcWeights};
use crate::rng::rng_for;

// ─── target distributions ───

/// Symmetric scalar law for iid-entry weight matrices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum IidLaw {
    Normal { sigma: f64 },
    Uniform { radius: f64 },
    Bernoulli { radius: f64 },
}

impl IidLaw {
    pub fn scale(&self) -> f64 {
        match *self {
            IidLaw::Normal { sigma } => sigma,
            IidLaw::Uniform { radius } | IidLaw::Bernoulli { radius } => radius,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            IidLaw::Normal { .. } => "normal",
            IidLaw::Uniform { .. } => "uniform",
            IidLaw::Bernoulli { .. } => "bernoulli",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.scale();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "law scale must be finite and positive, got {s}"
            )));
        }
        Ok(())
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            IidLaw::Normal { sigma } => {
                let g: f64 = StandardNormal.sample(rng);
                sigma * g
            }
            IidLaw::Uniform { radius } => rng.gen_range(-radius..=radius),
            IidLaw::Bernoulli { radius } => {
                if rng.gen_bool(0.5) {
                    radius
                } else {
                    -radius
                }
            }
        }
    }
}

/// Covariance model for correlated-Gaussian weight columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CovModel {
    Identity,
    /// Diagonal covariance, `values` cycled along the diagonal.
    DiagCycle { values: Vec<f64> },
    /// Sigma_ij = rho^|i-j|.
    Ar1 { rho: f64 },
    /// Sigma = (1-c) I + c J.
    Equicorrelated { c: f64 },
}

impl CovModel {
    pub fn label(&self) -> &'static str {
        match self {
            CovModel::Identity => "identity",
            CovModel::DiagCycle { .. } => "diag",
            CovModel::Ar1 { .. } => "ar1",
            CovModel::Equicorrelated { .. } => "equi",
        }
    }

    pub fn materialize(&self, t: usize) -> Result<DMatrix<f64>> {
        if t == 0 {
            return Err(Error::InvalidParameter("covariance dimension must be > 0".into()));
        }
        match self {
            CovModel::Identity => Ok(DMatrix::identity(t, t)),
            CovModel::DiagCycle { values } => {
                if values.is_empty() {
                    return Err(Error::InvalidParameter("empty diagonal value list".into()));
                }
                if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::InvalidParameter(
                        "diagonal covariance values must be finite and positive".into(),
                    ));
                }
                Ok(DMatrix::from_fn(t, t, |i, j| {
                    if i == j {
                        values[i % values.len()]
                    } else {
                        0.0
                    }
                }))
            }
            CovModel::Ar1 { rho } => {
                if !(rho.is_finite() && rho.abs() < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "AR(1) correlation must satisfy |rho| < 1, got {rho}"
                    )));
                }
                Ok(DMatrix::from_fn(t, t, |i, j| {
                    rho.powi((i as i64 - j as i64).unsigned_abs() as i32)
                }))
            }
            CovModel::Equicorrelated { c } => {
                if !(c.is_finite() && (0.0..1.0).contains(c)) {
                    return Err(Error::InvalidParameter(format!(
                        "equicorrelation must satisfy 0 <= c < 1, got {c}"
                    )));
                }
                Ok(DMatrix::from_fn(
                    t,
                    t,
                    |i, j| if i == j { 1.0 } else { *c },
                ))
            }
        }
    }
}

/// Target distribution of the transformed weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DistributionSpec {
    /// Every matrix entry iid from a symmetric law.
    IidSymmetric(IidLaw),
    /// Columns iid N(0, Sigma).
    GaussianCols { cov: CovModel },
    /// Columns iid uniform on the radius sphere.
    SphereCols { radius: f64 },
}

impl DistributionSpec {
    pub fn label(&self) -> &'static str {
        match self {
            DistributionSpec::IidSymmetric(law) => law.label(),
            DistributionSpec::GaussianCols { .. } => "gaussian",
            DistributionSpec::SphereCols { .. } => "sphere",
        }
    }

    pub fn scale(&self) -> f64 {
        match self {
            DistributionSpec::IidSymmetric(law) => law.scale(),
            DistributionSpec::GaussianCols { .. } => 1.0,
            DistributionSpec::SphereCols { radius } => *radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::IidSymmetric(law) => law.validate(),
            DistributionSpec::GaussianCols { .. } => Ok(()),
            DistributionSpec::SphereCols { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "sphere radius must be finite and positive, got {radius}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Smallest-singular-value floor below which a sampled transform counts as
/// degenerate for its target family (natural logs throughout).
pub fn smin_threshold(spec: &DistributionSpec, n_prime: usize) -> Result<f64> {
    if n_prime < 2 {
        return Err(Error::InvalidParameter(
            "singular-value threshold needs n' >= 2".into(),
        ));
    }
    let t = n_prime as f64;
    let ln = t.ln();
    Ok(match spec {
        DistributionSpec::IidSymmetric(law) => law.scale() / (t * ln * ln),
        DistributionSpec::GaussianCols { .. } => 1.0 / (t * ln * ln),
        DistributionSpec::SphereCols { radius } => radius / (t * t.sqrt() * ln.powi(5)),
    })
}

/// Norm ceiling claimed for inputs after a fully connected transform.
pub fn fc_norm_threshold(spec: &DistributionSpec, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter("norm threshold needs n >= 2".into()));
    }
    let nf = n as f64;
    let ln = nf.ln();
    match spec {
        DistributionSpec::IidSymmetric(law) => Ok(nf * ln * ln / law.scale()),
        DistributionSpec::SphereCols { radius } => Ok(nf * nf.sqrt() * ln.powi(4) / radius),
        DistributionSpec::GaussianCols { cov } => {
            let sigma = cov.materialize(n)?;
            let lmin = sym_min_eigenvalue(&sigma)?;
            Ok(nf * ln * ln / lmin.sqrt())
        }
    }
}

/// Smallest-singular-value floor for the per-patch convolutional transform.
///
/// For the iid families this is the entry-magnitude floor on the random
/// diagonal; signs of magnitude exactly `radius` meet it by construction.
/// The orthogonal (sphere) stage has all singular values equal to
/// radius/sqrt(n'+1), so its floor is that exact value.
pub fn cnn_smin_threshold(spec: &DistributionSpec, n_prime: usize) -> Result<f64> {
    if n_prime < 2 {
        return Err(Error::InvalidParameter(
            "singular-value threshold needs n' >= 2".into(),
        ));
    }
    let t = n_prime as f64;
    let ln = t.ln();
    Ok(match spec {
        DistributionSpec::IidSymmetric(IidLaw::Normal { sigma }) => sigma / (t * ln),
        DistributionSpec::IidSymmetric(IidLaw::Uniform { radius }) => radius / (t * ln),
        DistributionSpec::IidSymmetric(IidLaw::Bernoulli { radius }) => *radius,
        DistributionSpec::GaussianCols { .. } => 1.0 / (t * ln),
        DistributionSpec::SphereCols { radius } => radius / ((n_prime as f64) + 1.0).sqrt(),
    })
}

/// Norm ceiling claimed for inputs after a convolutional transform.
///
/// The iid ceilings are log^2(n') over the entry-magnitude floor; the
/// correlated-Gaussian and sphere ceilings are stated in the full input
/// dimension n.
pub fn cnn_norm_threshold(spec: &DistributionSpec, n_prime: usize, n: usize) -> Result<f64> {
    if n_prime < 2 || n < 2 {
        return Err(Error::InvalidParameter(
            "norm threshold needs n' >= 2 and n >= 2".into(),
        ));
    }
    let t = n_prime as f64;
    let lt = t.ln();
    let nf = n as f64;
    let ln = nf.ln();
    match spec {
        DistributionSpec::IidSymmetric(IidLaw::Normal { sigma }) => Ok(lt * lt * t * lt / sigma),
        DistributionSpec::IidSymmetric(IidLaw::Uniform { radius }) => {
            Ok(lt * lt * t * lt / radius)
        }
        DistributionSpec::IidSymmetric(IidLaw::Bernoulli { radius }) => Ok(lt * lt / radius),
        DistributionSpec::GaussianCols { cov } => {
            let sigma = cov.materialize(n_prime + 1)?;
            let lmin = sym_min_eigenvalue(&sigma)?;
            if lmin <= 0.0 {
                return Err(Error::InvalidParameter(
                    "patch covariance must be positive definite".into(),
                ));
            }
            Ok(nf * ln / lmin.sqrt())
        }
        DistributionSpec::SphereCols { radius } => Ok(nf.sqrt() * ln / radius),
    }
}

pub fn sym_min_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("eigenvalues need a square matrix".into()));
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    eig.eigenvalues
        .iter()
        .copied()
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.min(v)))
        })
        .ok_or_else(|| Error::InvalidParameter("empty matrix".into()))
}

// ─── diagonal-blocks transform ───

/// The diagonal-blocks matrix: k blocks of dimension s; in-block position r
/// couples across blocks through the k x k matrix `diagonals[r]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockTransform {
    k: usize,
    s: usize,
    diagonals: Vec<DMatrix<f64>>,
    inv_ts: Vec<DMatrix<f64>>,
    block_svals: Vec<(f64, f64)>,
}

impl BlockTransform {
    pub fn new(k: usize, s: usize, diagonals: Vec<DMatrix<f64>>) -> Result<Self> {
        if k == 0 || s == 0 {
            return Err(Error::InvalidParameter(
                "block transform needs k >= 1 and s >= 1".into(),
            ));
        }
        if diagonals.len() != s {
            return Err(Error::DimensionMismatch(format!(
                "expected {s} position matrices, got {}",
                diagonals.len()
            )));
        }
        let mut inv_ts = Vec::with_capacity(s);
        let mut block_svals = Vec::with_capacity(s);
        for (r, z) in diagonals.iter().enumerate() {
            if z.nrows() != k || z.ncols() != k {
                return Err(Error::DimensionMismatch(format!(
                    "position matrix {r} is {}x{}, expected {k}x{k}",
                    z.nrows(),
                    z.ncols()
                )));
            }
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "position matrix {r} contains a non-finite entry"
                )));
            }
            let svals = z.clone().svd(false, false).singular_values;
            let smin = svals.iter().copied().fold(f64::INFINITY, f64::min);
            let smax = svals.iter().copied().fold(0.0, f64::max);
            let inv_t = z.transpose().try_inverse().ok_or_else(|| {
                Error::SingularTransform(format!("position matrix {r} is singular"))
            })?;
            inv_ts.push(inv_t);
            block_svals.push((smin, smax));
        }
        Ok(BlockTransform {
            k,
            s,
            diagonals,
            inv_ts,
            block_svals,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn n(&self) -> usize {
        self.k * self.s
    }

    pub fn diagonals(&self) -> &[DMatrix<f64>] {
        &self.diagonals
    }

    /// Exact smallest singular value of the assembled matrix.
    pub fn smin_blockwise(&self) -> f64 {
        self.block_svals
            .iter()
            .map(|&(lo, _)| lo)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn smax(&self) -> f64 {
        self.block_svals
            .iter()
            .map(|&(_, hi)| hi)
            .fold(0.0, f64::max)
    }

    pub fn condition_number(&self) -> f64 {
        let lo = self.smin_blockwise();
        if lo == 0.0 {
            f64::INFINITY
        } else {
            self.smax() / lo
        }
    }

    pub fn assemble_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for r in 0..self.s {
            let z = &self.diagonals[r];
            for b in 0..self.k {
                for b2 in 0..self.k {
                    m[(b * self.s + r, b2 * self.s + r)] = z[(b, b2)];
                }
            }
        }
        m
    }

    /// x -> (M^T)^{-1} x via the per-position k x k inverses.
    pub fn apply_inverse_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "input has dimension {}, transform expects {}",
                x.len(),
                self.n()
            )));
        }
        let mut out = vec![0.0; x.len()];
        for r in 0..self.s {
            let v = DVector::from_fn(self.k, |b, _| x[b * self.s + r]);
            let y = &self.inv_ts[r] * v;
            for b in 0..self.k {
                out[b * self.s + r] = y[b];
            }
        }
        Ok(out)
    }

    /// M * (filter replicated per block): column j at coordinate b*s + r is
    /// diagonals[r][(b, j)] * w_r.
    pub fn push_weights(&self, filter: &CnnFilter) -> Result<FcWeights> {
        if filter.t() != self.s {
            return Err(Error::DimensionMismatch(format!(
                "filter has {} weights, block dimension is {}",
                filter.t(),
                self.s
            )));
        }
        let n = self.n();
        let w = filter.weights();
        let cols = (0..self.k)
            .map(|j| {
                let mut col = vec![0.0; n];
                for b in 0..self.k {
                    for r in 0..self.s {
                        col[b * self.s + r] = self.diagonals[r][(b, j)] * w[r];
                    }
                }
                col
            })
            .collect();
        FcWeights::new(cols, n)
    }

    pub fn content_id(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.k as u64).to_le_bytes());
        hasher.update((self.s as u64).to_le_bytes());
        for z in &self.diagonals {
            for v in z.iter() {
                hasher.update(v.to_le_bytes());
            }
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

// ─── dense correlator ───

/// M = U L^{1/2} for a covariance Sigma = U L U^T; pushes weights by M and
/// pulls inputs by (M^T)^{-1} = U L^{-1/2}.
#[derive(Clone, Debug, PartialEq)]
pub struct Correlator {
    m: DMatrix<f64>,
    inv_t: DMatrix<f64>,
    smin: f64,
    smax: f64,
}

impl Correlator {
    pub(crate) fn from_parts(m: DMatrix<f64>, inv_t: DMatrix<f64>, smin: f64, smax: f64) -> Self {
        Correlator {
            m,
            inv_t,
            smin,
            smax,
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn inverse_transpose(&self) -> &DMatrix<f64> {
        &self.inv_t
    }

    pub fn smin(&self) -> f64 {
        self.smin
    }

    pub fn smax(&self) -> f64 {
        self.smax
    }

    pub fn condition_number(&self) -> f64 {
        if self.smin == 0.0 {
            f64::INFINITY
        } else {
            self.smax / self.smin
        }
    }

    pub fn push_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.mul(&self.m, v)
    }

    pub fn pull_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.mul(&self.inv_t, x)
    }

    pub fn push_fc(&self, w: &FcWeights) -> Result<FcWeights> {
        let cols = w
            .columns()
            .iter()
            .map(|c| self.push_vec(c))
            .collect::<Result<Vec<_>>>()?;
        FcWeights::new(cols, w.n())
    }

    fn mul(&self, m: &DMatrix<f64>, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "vector has dimension {}, correlator expects {}",
                v.len(),
                m.ncols()
            )));
        }
        let out = m * DVector::from_column_slice(v);
        Ok(out.iter().copied().collect())
    }

    pub fn content_id(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.dim() as u64).to_le_bytes());
        for v in self.m.iter() {
            hasher.update(v.to_le_bytes());
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn gaussian_correlator(sigma: &DMatrix<f64>) -> Result<Correlator> {
    if !sigma.is_square() {
        return Err(Error::DimensionMismatch("covariance must be square".into()));
    }
    let t = sigma.nrows();
    if t == 0 {
        return Err(Error::InvalidParameter("empty covariance".into()));
    }
    let max_abs = sigma.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !max_abs.is_finite() {
        return Err(Error::InvalidParameter("covariance has non-finite entries".into()));
    }
    for i in 0..t {
        for j in (i + 1)..t {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 * (1.0 + max_abs) {
                return Err(Error::InvalidParameter(
                    "covariance is not symmetric".into(),
                ));
            }
        }
    }
    let eig = nalgebra::SymmetricEigen::new(sigma.clone());
    let lmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let lmax = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    if lmin <= 0.0 {
        return Err(Error::SingularTransform(format!(
            "covariance is not positive definite (min eigenvalue {lmin:e})"
        )));
    }
    let sqrt_l = DMatrix::from_fn(t, t, |i, j| {
        if i == j {
            eig.eigenvalues[i].sqrt()
        } else {
            0.0
        }
    });
    let inv_sqrt_l = DMatrix::from_fn(t, t, |i, j| {
        if i == j {
            1.0 / eig.eigenvalues[i].sqrt()
        } else {
            0.0
        }
    });
    let m = &eig.eigenvectors * sqrt_l;
    let inv_t = &eig.eigenvectors * inv_sqrt_l;
    let recon = &m * m.transpose();
    let err = (&recon - sigma)
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    if err > 1e-9 * (1.0 + max_abs) {
        return Err(Error::SingularTransform(format!(
            "covariance factorization error {err:e} exceeds tolerance"
        )));
    }
    Ok(Correlator::from_parts(m, inv_t, lmin.sqrt(), lmax.sqrt()))
}

// ─── convolutional transforms ───

/// Patch-level transform applied uniformly across patches.
#[derive(Clone, Debug, PartialEq)]
pub enum CnnTransform {
    /// w_i -> z_i w_i on weights, x_i -> x_i / z_i on patches.
    Diagonal { z: Vec<f64> },
    /// Correlated-Gaussian stage on the patch space.
    Dense(Correlator),
    /// w -> (r/sqrt(t)) Q w, x -> (sqrt(t)/r) Q x for Haar orthogonal Q.
    ScaledOrthogonal { q: DMatrix<f64>, radius: f64 },
}

impl CnnTransform {
    pub fn t(&self) -> usize {
        match self {
            CnnTransform::Diagonal { z } => z.len(),
            CnnTransform::Dense(c) => c.dim(),
            CnnTransform::ScaledOrthogonal { q, .. } => q.nrows(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CnnTransform::Diagonal { .. } => "diagonal",
            CnnTransform::Dense(_) => "dense",
            CnnTransform::ScaledOrthogonal { .. } => "orthogonal",
        }
    }

    pub fn map_filter(&self, w: &CnnFilter) -> Result<CnnFilter> {
        if w.t() != self.t() {
            return Err(Error::DimensionMismatch(format!(
                "filter has {} weights, transform expects {}",
                w.t(),
                self.t()
            )));
        }
        match self {
            CnnTransform::Diagonal { z } => {
                CnnFilter::new(w.weights().iter().zip(z).map(|(a, b)| a * b).collect())
            }
            CnnTransform::Dense(c) => CnnFilter::new(c.push_vec(w.weights())?),
            CnnTransform::ScaledOrthogonal { q, radius } => {
                let t = q.nrows() as f64;
                let v = q * DVector::from_column_slice(w.weights());
                CnnFilter::new(v.iter().map(|x| x * radius / t.sqrt()).collect())
            }
        }
    }

    pub fn map_patch(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.t() {
            return Err(Error::DimensionMismatch(format!(
                "patch has dimension {}, transform expects {}",
                x.len(),
                self.t()
            )));
        }
        match self {
            CnnTransform::Diagonal { z } => Ok(x.iter().zip(z).map(|(a, b)| a / b).collect()),
            CnnTransform::Dense(c) => c.pull_vec(x),
            CnnTransform::ScaledOrthogonal { q, radius } => {
                let t = q.nrows() as f64;
                let v = q * DVector::from_column_slice(x);
                Ok(v.iter().map(|y| y * t.sqrt() / radius).collect())
            }
        }
    }

    pub fn smin(&self) -> f64 {
        match self {
            CnnTransform::Diagonal { z } => z.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min),
            CnnTransform::Dense(c) => c.smin(),
            CnnTransform::ScaledOrthogonal { q, radius } => radius / (q.nrows() as f64).sqrt(),
        }
    }

    pub fn smax(&self) -> f64 {
        match self {
            CnnTransform::Diagonal { z } => z.iter().map(|v| v.abs()).fold(0.0, f64::max),
            CnnTransform::Dense(c) => c.smax(),
            CnnTransform::ScaledOrthogonal { q, radius } => radius / (q.nrows() as f64).sqrt(),
        }
    }

    pub fn condition_number(&self) -> f64 {
        let lo = self.smin();
        if lo == 0.0 {
            f64::INFINITY
        } else {
            self.smax() / lo
        }
    }
}

// ─── transform chains ───

/// The full weight/input transform of one reduction: either a fully
/// connected diagonal-blocks stage (optionally followed by a dense
/// correlator) or a sequence of patch transforms.
#[derive(Clone, Debug, PartialEq)]
pub enum TransformChain {
    Fc {
        block: BlockTransform,
        dense: Option<Correlator>,
    },
    Cnn {
        stages: Vec<CnnTransform>,
    },
}

impl TransformChain {
    /// Dimension of the vectors the chain consumes: full input dimension for
    /// the FC form, patch dimension for the CNN form.
    pub fn unit_dim(&self) -> usize {
        match self {
            TransformChain::Fc { block, .. } => block.n(),
            TransformChain::Cnn { stages } => stages.first().map_or(0, |s| s.t()),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            TransformChain::Fc { dense: None, .. } => "fc-block".into(),
            TransformChain::Fc { dense: Some(_), .. } => "fc-block+dense".into(),
            TransformChain::Cnn { stages } => {
                let names: Vec<&str> = stages.iter().map(|s| s.label()).collect();
                format!("cnn-{}", names.join("+"))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TransformChain::Fc { block, dense } => {
                if let Some(d) = dense {
                    if d.dim() != block.n() {
                        return Err(Error::DimensionMismatch(format!(
                            "dense stage has dimension {}, block stage produces {}",
                            d.dim(),
                            block.n()
                        )));
                    }
                }
                Ok(())
            }
            TransformChain::Cnn { stages } => {
                if stages.is_empty() {
                    return Err(Error::InvalidParameter("empty transform chain".into()));
                }
                let t = stages[0].t();
                if stages.iter().any(|s| s.t() != t) {
                    return Err(Error::DimensionMismatch(
                        "patch transforms disagree on patch dimension".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Push the realizing filter forward into target-distributed weights.
    pub fn push_weights(&self, filter: &CnnFilter) -> Result<crate::neural::NetworkWeights> {
        match self {
            TransformChain::Fc { block, dense } => {
                let mut w = block.push_weights(filter)?;
                if let Some(d) = dense {
                    w = d.push_fc(&w)?;
                }
                Ok(crate::neural::NetworkWeights::Fc(w))
            }
            TransformChain::Cnn { stages } => {
                let mut w = filter.clone();
                for s in stages {
                    w = s.map_filter(&w)?;
                }
                Ok(crate::neural::NetworkWeights::Cnn(w))
            }
        }
    }

    /// Pull one input point through (M^T)^{-1} stage by stage.
    pub fn pull_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            TransformChain::Fc { block, dense } => {
                let mut y = block.apply_inverse_transpose(x)?;
                if let Some(d) = dense {
                    y = d.pull_vec(&y)?;
                }
                Ok(y)
            }
            TransformChain::Cnn { stages } => {
                let t = self.unit_dim();
                if t == 0 || x.is_empty() || x.len() % t != 0 {
                    return Err(Error::DimensionMismatch(format!(
                        "input dimension {} is not a positive multiple of patch size {t}",
                        x.len()
                    )));
                }
                let mut out = Vec::with_capacity(x.len());
                for patch in x.chunks_exact(t) {
                    let mut p = patch.to_vec();
                    for s in stages {
                        p = s.map_patch(&p)?;
                    }
                    out.extend(p);
                }
                Ok(out)
            }
        }
    }

    /// Upper bound on the chain's condition number (exact for one stage).
    pub fn condition_number(&self) -> f64 {
        match self {
            TransformChain::Fc { block, dense } => {
                let mut c = block.condition_number();
                if let Some(d) = dense {
                    c *= d.condition_number();
                }
                c
            }
            TransformChain::Cnn { stages } => {
                stages.iter().map(|s| s.condition_number()).product()
            }
        }
    }

    pub fn content_id(&self) -> String {
        let mut hasher = Sha256::new();
        match self {
            TransformChain::Fc { block, dense } => {
                hasher.update(b"fc");
                hasher.update(block.content_id().as_bytes());
                if let Some(d) = dense {
                    hasher.update(d.content_id().as_bytes());
                }
            }
            TransformChain::Cnn { stages } => {
                hasher.update(b"cnn");
                for s in stages {
                    hasher.update(s.label().as_bytes());
                    match s {
                        CnnTransform::Diagonal { z } => {
                            for v in z {
                                hasher.update(v.to_le_bytes());
                            }
                        }
                        CnnTransform::Dense(c) => hasher.update(c.content_id().as_bytes()),
                        CnnTransform::ScaledOrthogonal { q, radius } => {
                            hasher.update(radius.to_le_bytes());
                            for v in q.iter() {
                                hasher.update(v.to_le_bytes());
                            }
                        }
                    }
                }
            }
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

// ─── sampling ───

/// Uniform point on the radius-`radius` sphere (normalized Gaussian).
pub fn sphere_vector(dim: usize, radius: f64, rng: &mut ChaCha12Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.iter().map(|x| x * radius / norm).collect();
        }
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// R-diagonal sign fix.
pub fn haar_orthogonal(t: usize, rng: &mut ChaCha12Rng) -> DMatrix<f64> {
    let g: DMatrix<f64> = DMatrix::from_fn(t, t, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let r: DMatrix<f64> = qr.r();
    let mut q: DMatrix<f64> = qr.q();
    for i in 0..t {
        if r[(i, i)] < 0.0 {
            for b in 0..t {
                q[(b, i)] = -q[(b, i)];
            }
        }
    }
    q
}

/// Draw the diagonal-blocks stage for a fully connected target. The
/// correlated-Gaussian family is built in two stages by the caller: an iid
/// standard-normal block stage composed with a dense correlator.
pub fn sample_fc_transform(
    spec: &DistributionSpec,
    n_prime: usize,
    k: usize,
    seed: u64,
) -> Result<BlockTransform> {
    spec.validate()?;
    if n_prime == 0 || k == 0 {
        return Err(Error::InvalidParameter(
            "fc transform needs n' >= 1 and k >= 1".into(),
        ));
    }
    let s = n_prime + 1;
    let mut rng = rng_for(seed, "fc-transform");
    match spec {
        DistributionSpec::IidSymmetric(law) => {
            let diagonals = (0..s)
                .map(|_| DMatrix::from_fn(k, k, |_, _| law.sample(&mut rng)))
                .collect();
            BlockTransform::new(k, s, diagonals)
        }
        DistributionSpec::SphereCols { radius } => {
            let n = s * k;
            let mut diagonals = vec![DMatrix::zeros(k, k); s];
            for j in 0..k {
                let v = sphere_vector(n, *radius, &mut rng);
                for b in 0..k {
                    for r in 0..s {
                        diagonals[r][(b, j)] = v[b * s + r];
                    }
                }
            }
            BlockTransform::new(k, s, diagonals)
        }
        DistributionSpec::GaussianCols { .. } => Err(Error::UnsupportedFamily(
            "correlated-Gaussian columns need the two-stage construction".into(),
        )),
    }
}

/// Draw the patch transform stages for a convolutional target.
pub fn sample_cnn_transform(
    spec: &DistributionSpec,
    n_prime: usize,
    seed: u64,
) -> Result<Vec<CnnTransform>> {
    spec.validate()?;
    if n_prime == 0 {
        return Err(Error::InvalidParameter("cnn transform needs n' >= 1".into()));
    }
    let t = n_prime + 1;
    let mut rng = rng_for(seed, "cnn-transform");
    match spec {
        DistributionSpec::IidSymmetric(law) => {
            let z = draw_nonzero(t, &mut rng, |rng| law.sample(rng));
            Ok(vec![CnnTransform::Diagonal { z }])
        }
        DistributionSpec::SphereCols { radius } => {
            let q = haar_orthogonal(t, &mut rng);
            Ok(vec![CnnTransform::ScaledOrthogonal { q, radius: *radius }])
        }
        DistributionSpec::GaussianCols { cov } => {
            let z = draw_nonzero(t, &mut rng, |rng| {
                let g: f64 = StandardNormal.sample(rng);
                g
            });
            let c = gaussian_correlator(&cov.materialize(t)?)?;
            Ok(vec![CnnTransform::Diagonal { z }, CnnTransform::Dense(c)])
        }
    }
}

fn draw_nonzero<F>(count: usize, rng: &mut ChaCha12Rng, mut draw: F) -> Vec<f64>
where
    F: FnMut(&mut ChaCha12Rng) -> f64,
{
    (0..count)
        .map(|_| loop {
            let v = draw(rng);
            if v != 0.0 {
                break v;
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::cnn_to_matrix;

    fn filter_pm(seed: u64, s: usize) -> CnnFilter {
        let mut rng = rng_for(seed, "transform-test");
        CnnFilter::new(
            (0..s)
                .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn dense_assembly_matches_block_layout() {
        let bt = sample_fc_transform(
            &DistributionSpec::IidSymmetric(IidLaw::Normal { sigma: 1.0 }),
            3,
            2,
            17,
        )
        .unwrap();
        let m = bt.assemble_dense();
        let (k, s) = (bt.k(), bt.s());
        for i in 0..k * s {
            for j in 0..k * s {
                let (b, r) = (i / s, i % s);
                let (b2, r2) = (j / s, j % s);
                if r == r2 {
                    assert_eq!(m[(i, j)], bt.diagonals()[r][(b, b2)]);
                } else {
                    assert_eq!(m[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn blockwise_extremes_match_dense_svd() {
        for seed in 0..5u64 {
            let bt = sample_fc_transform(
                &DistributionSpec::IidSymmetric(IidLaw::Uniform { radius: 2.0 }),
                4,
                3,
                seed,
            )
            .unwrap();
            let svals = bt.assemble_dense().svd(false, false).singular_values;
            let lo = svals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = svals.iter().copied().fold(0.0f64, f64::max);
            assert!((bt.smin_blockwise() - lo).abs() <= 1e-10 * hi.max(1.0));
            assert!((bt.smax() - hi).abs() <= 1e-10 * hi.max(1.0));
        }
    }

    #[test]
    fn push_weights_matches_dense_product() {
        let bt = sample_fc_transform(
            &DistributionSpec::IidSymmetric(IidLaw::Normal { sigma: 0.7 }),
            4,
            3,
            23,
        )
        .unwrap();
        let f = filter_pm(1, bt.s());
        let pushed = bt.push_weights(&f).unwrap();
        let dense = bt.assemble_dense();
        let expanded = cnn_to_matrix(&f, bt.k()).unwrap();
        for j in 0..bt.k() {
            let col = &dense * DVector::from_column_slice(expanded.column(j));
            for (a, b) in pushed.column(j).iter().zip(col.iter()) {
                assert!((a - b).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn inverse_transpose_preserves_inner_products() {
        let mut rng = rng_for(31, "transform-test");
        let bt = sample_fc_transform(
            &DistributionSpec::IidSymmetric(IidLaw::Normal { sigma: 1.0 }),
            5,
            4,
            31,
        )
        .unwrap();
        let f = filter_pm(2, bt.s());
        let pushed = bt.push_weights(&f).unwrap();
        let expanded = cnn_to_matrix(&f, bt.k()).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..bt.n()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let xt = bt.apply_inverse_transpose(&x).unwrap();
            for j in 0..bt.k() {
                let before: f64 = expanded.column(j).iter().zip(&x).map(|(a, b)| a * b).sum();
                let after: f64 = pushed.column(j).iter().zip(&xt).map(|(a, b)| a * b).sum();
                let scale = 1.0 + before.abs();
                assert!(
                    (before - after).abs() <= 1e-9 * scale * bt.condition_number(),
                    "inner product drifted: {before} vs {after}"
                );
            }
        }
    }

    #[test]
    fn sphere_columns_have_exact_radius() {
        let radius = 2.5;
        let bt = sample_fc_transform(&DistributionSpec::SphereCols { radius }, 5, 4, 7).unwrap();
        for j in 0..bt.k() {
            let mut sq = 0.0;
            for r in 0..bt.s() {
                for b in 0..bt.k() {
                    sq += bt.diagonals()[r][(b, j)].powi(2);
                }
            }
            assert!((sq.sqrt() - radius).abs() <= 1e-9);
        }
    }

    #[test]
    fn correlator_reconstructs_covariance() {
        let sigma = CovModel::Ar1 { rho: 0.6 }.materialize(12).unwrap();
        let c = gaussian_correlator(&sigma).unwrap();
        let recon = c.matrix() * c.matrix().transpose();
        for (a, b) in recon.iter().zip(sigma.iter()) {
            assert!((a - b).abs() <= 1e-9);
        }
        // pull is the inverse transpose of push
        let prod = c.matrix().transpose() * c.inverse_transpose();
        for i in 0..12 {
            for j in 0..12 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - want).abs() <= 1e-9);
            }
        }
        assert!(c.condition_number() >= 1.0);
    }

    #[test]
    fn haar_matrix_is_orthogonal() {
        let mut rng = rng_for(3, "transform-test");
        let q = haar_orthogonal(9, &mut rng);
        let prod = q.transpose() * &q;
        for i in 0..9 {
            for j in 0..9 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - want).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn scaled_orthogonal_identities() {
        let stages = sample_cnn_transform(&DistributionSpec::SphereCols { radius: 3.0 }, 7, 5)
            .unwrap();
        assert_eq!(stages.len(), 1);
        let f = filter_pm(4, 8);
        let w = stages[0].map_filter(&f).unwrap();
        assert!((w.norm() - 3.0).abs() <= 1e-12 * 3.0);
        let mut rng = rng_for(40, "transform-test");
        let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let xt = stages[0].map_patch(&x).unwrap();
        let sq_before: f64 = x.iter().map(|v| v * v).sum();
        let sq_after: f64 = xt.iter().map(|v| v * v).sum();
        assert!((sq_after - sq_before * 8.0 / 9.0).abs() <= 1e-12 * sq_before.max(1.0));
        let ip_before: f64 = f.weights().iter().zip(&x).map(|(a, b)| a * b).sum();
        let ip_after: f64 = w.weights().iter().zip(&xt).map(|(a, b)| a * b).sum();
        assert!((ip_before - ip_after).abs() <= 1e-12 * (1.0 + ip_before.abs()));
        assert!((stages[0].condition_number() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn diagonal_transform_round_trips_inner_products() {
        let stages = sample_cnn_transform(
            &DistributionSpec::IidSymmetric(IidLaw::Normal { sigma: 2.0 }),
            5,
            9,
        )
        .unwrap();
        let f = filter_pm(5, 6);
        let w = stages[0].map_filter(&f).unwrap();
        let mut rng = rng_for(41, "transform-test");
        let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let xt = stages[0].map_patch(&x).unwrap();
        let before: f64 = f.weights().iter().zip(&x).map(|(a, b)| a * b).sum();
        let after: f64 = w.weights().iter().zip(&xt).map(|(a, b)| a * b).sum();
        assert!((before - after).abs() <= 1e-12 * (1.0 + before.abs()));
    }

    #[test]
    fn gaussian_cnn_is_two_stages() {
        let spec = DistributionSpec::GaussianCols {
            cov: CovModel::Ar1 { rho: 0.4 },
        };
        let stages = sample_cnn_transform(&spec, 5, 11).unwrap();
        assert_eq!(stages.len(), 2);
        assert_eq!(stages[0].label(), "diagonal");
        assert_eq!(stages[1].label(), "dense");
        let chain = TransformChain::Cnn { stages };
        chain.validate().unwrap();
        let f = filter_pm(6, 6);
        let w = match chain.push_weights(&f).unwrap() {
            crate::neural::NetworkWeights::Cnn(w) => w,
            _ => unreachable!(),
        };
        let mut rng = rng_for(42, "transform-test");
        let x: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let xt = chain.pull_point(&x).unwrap();
        for (patch_w, (px, pxt)) in std::iter::repeat(w.weights())
            .zip(x.chunks(6).zip(xt.chunks(6)))
            .take(2)
        {
            let before: f64 = f.weights().iter().zip(px).map(|(a, b)| a * b).sum();
            let after: f64 = patch_w.iter().zip(pxt).map(|(a, b)| a * b).sum();
            assert!((before - after).abs() <= 1e-9 * (1.0 + before.abs()));
        }
    }

    #[test]
    fn frozen_threshold_values() {
        let iid = DistributionSpec::IidSymmetric(IidLaw::Normal { sigma: 1.0 });
        let th = smin_threshold(&iid, 63).unwrap();
        assert!((th - 9.247e-4).abs() < 1e-6, "iid threshold {th}");
        let sphere = DistributionSpec::SphereCols { radius: 1.0 };
        let th = smin_threshold(&sphere, 63).unwrap();
        assert!((th - 1.638e-6).abs() < 1e-9, "sphere threshold {th}");
        let norm = fc_norm_threshold(&iid, 1152).unwrap();
        let expect = 1152.0 * (1152.0f64).ln() * (1152.0f64).ln();
        assert!((norm - expect).abs() <= 1e-9 * expect);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(BlockTransform::new(2, 1, vec![DMatrix::zeros(2, 2)]).is_err());
        assert!(CovModel::Ar1 { rho: 1.0 }.materialize(4).is_err());
        assert!(CovModel::DiagCycle { values: vec![0.0] }.materialize(3).is_err());
        let not_spd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(gaussian_correlator(&not_spd).is_err());
        assert!(sample_fc_transform(
            &DistributionSpec::GaussianCols { cov: CovModel::Identity },
            4,
            2,
            0
        )
        .is_err());
        assert!(
            DistributionSpec::SphereCols { radius: -1.0 }.validate().is_err()
        );
    }
}
