//! Depth-2 ReLU networks with a clipped sum readout:
//! h_W(x) = clip_[0,1]( Σ_i relu(⟨w_i, x⟩) ) for a fully connected weight
//! matrix, and the convolutional variant that slides one filter over
//! non-overlapping patches. The pre-clip sum is exposed everywhere because
//! realizability checks reason about it directly.

pub mod io;

use crate::error::{Error, Result};

/// Fully connected first layer: m weight columns, each of length n, m ≤ n.
#[derive(Clone, Debug, PartialEq)]
pub struct FcWeights {
    n: usize,
    cols: Vec<Vec<f64>>,
}

impl FcWeights {
    pub fn new(cols: Vec<Vec<f64>>, n: usize) -> Result<Self> {
        if n == 0 || cols.is_empty() {
            return Err(Error::InvalidParameter(
                "FC weights need n > 0 and at least one column".into(),
            ));
        }
        if cols.len() > n {
            return Err(Error::InvalidParameter(format!(
                "hidden width {} exceeds input dimension {n}",
                cols.len()
            )));
        }
        for (j, col) in cols.iter().enumerate() {
            if col.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "column {j} has length {}, expected {n}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "column {j} contains a non-finite value"
                )));
            }
        }
        Ok(FcWeights { n, cols })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.cols.len()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.cols
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j]
    }
}

/// One convolutional filter; patch size is its length.
#[derive(Clone, Debug, PartialEq)]
pub struct CnnFilter {
    weights: Vec<f64>,
}

impl CnnFilter {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("empty CNN filter".into()));
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "CNN filter contains a non-finite value".into(),
            ));
        }
        Ok(CnnFilter { weights })
    }

    pub fn t(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn norm(&self) -> f64 {
        self.weights.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NetworkWeights {
    Fc(FcWeights),
    Cnn(CnnFilter),
}

impl NetworkWeights {
    pub fn pre_clip(&self, x: &[f64]) -> Result<f64> {
        match self {
            NetworkWeights::Fc(w) => pre_clip_fc(w, x),
            NetworkWeights::Cnn(f) => pre_clip_cnn(f, x),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self.pre_clip(x)?.clamp(0.0, 1.0))
    }

    pub fn input_dim_compatible(&self, dim: usize) -> bool {
        match self {
            NetworkWeights::Fc(w) => w.n() == dim,
            NetworkWeights::Cnn(f) => dim % f.t() == 0,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Sum of ReLU unit outputs before the clip.
pub fn pre_clip_fc(w: &FcWeights, x: &[f64]) -> Result<f64> {
    if x.len() != w.n() {
        return Err(Error::DimensionMismatch(format!(
            "input has dimension {}, weights expect {}",
            x.len(),
            w.n()
        )));
    }
    let mut acc = 0.0;
    for col in w.columns() {
        acc += dot(col, x).max(0.0);
    }
    Ok(acc)
}

/// Network output: pre-clip sum clipped to [0, 1].
pub fn eval_fc(w: &FcWeights, x: &[f64]) -> Result<f64> {
    Ok(pre_clip_fc(w, x)?.clamp(0.0, 1.0))
}

/// Convolutional pre-clip sum over non-overlapping patches.
pub fn pre_clip_cnn(f: &CnnFilter, x: &[f64]) -> Result<f64> {
    let t = f.t();
    if x.is_empty() || x.len() % t != 0 {
        return Err(Error::DimensionMismatch(format!(
            "input dimension {} is not a positive multiple of patch size {t}",
            x.len()
        )));
    }
    let mut acc = 0.0;
    for patch in x.chunks_exact(t) {
        acc += dot(f.weights(), patch).max(0.0);
    }
    Ok(acc)
}

pub fn eval_cnn(f: &CnnFilter, x: &[f64]) -> Result<f64> {
    Ok(pre_clip_cnn(f, x)?.clamp(0.0, 1.0))
}

/// Expand a filter into the equivalent FC matrix over k patches: column i
/// carries the filter in the block of coordinates belonging to patch i.
pub fn cnn_to_matrix(f: &CnnFilter, k: usize) -> Result<FcWeights> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "cnn_to_matrix needs at least one patch".into(),
        ));
    }
    let t = f.t();
    let n = t * k;
    let cols = (0..k)
        .map(|i| {
            let mut col = vec![0.0; n];
            col[i * t..(i + 1) * t].copy_from_slice(f.weights());
            col
        })
        .collect();
    FcWeights::new(cols, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;
    use rand::Rng;

    #[test]
    fn zero_input_gives_zero() {
        let w = FcWeights::new(vec![vec![1.0, -2.0], vec![0.5, 3.0]], 2).unwrap();
        assert_eq!(eval_fc(&w, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn single_unit_clip_cases() {
        let w = FcWeights::new(vec![vec![1.0, 0.0]], 2).unwrap();
        assert_eq!(eval_fc(&w, &[0.5, 9.0]).unwrap(), 0.5);
        assert_eq!(eval_fc(&w, &[-2.0, 0.0]).unwrap(), 0.0);
        assert_eq!(pre_clip_fc(&w, &[3.0, 0.0]).unwrap(), 3.0);
        assert_eq!(eval_fc(&w, &[3.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn cnn_patch_sums() {
        // patch dots: 1, 0, 2 -> pre-clip 3, output 1
        let f = CnnFilter::new(vec![1.0, -1.0]).unwrap();
        let x = [1.0, 0.0, 2.0, 2.0, 3.0, 1.0];
        assert_eq!(pre_clip_cnn(&f, &x).unwrap(), 3.0);
        assert_eq!(eval_cnn(&f, &x).unwrap(), 1.0);
    }

    #[test]
    fn cnn_to_matrix_layout() {
        let f = CnnFilter::new(vec![3.0, 4.0]).unwrap();
        let w = cnn_to_matrix(&f, 2).unwrap();
        assert_eq!(w.n(), 4);
        assert_eq!(w.m(), 2);
        assert_eq!(w.column(0), &[3.0, 4.0, 0.0, 0.0]);
        assert_eq!(w.column(1), &[0.0, 0.0, 3.0, 4.0]);
    }

    #[test]
    fn cnn_equals_expanded_fc() {
        let mut rng = rng_for(5, "neural-test");
        let f = CnnFilter::new((0..7).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let w = cnn_to_matrix(&f, 5).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..35).map(|_| rng.gen_range(-3.0..3.0)).collect();
            assert_eq!(
                pre_clip_cnn(&f, &x).unwrap(),
                pre_clip_fc(&w, &x).unwrap()
            );
        }
    }

    #[test]
    fn pre_clip_scales_exactly_by_powers_of_two() {
        let mut rng = rng_for(6, "neural-test");
        let f = CnnFilter::new((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..12).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let doubled: Vec<f64> = x.iter().map(|v| v * 2.0).collect();
            assert_eq!(
                pre_clip_cnn(&f, &doubled).unwrap(),
                2.0 * pre_clip_cnn(&f, &x).unwrap()
            );
        }
    }

    #[test]
    fn shape_errors() {
        let w = FcWeights::new(vec![vec![1.0, 0.0]], 2).unwrap();
        assert!(pre_clip_fc(&w, &[1.0]).is_err());
        let f = CnnFilter::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(pre_clip_cnn(&f, &[1.0, 2.0]).is_err());
        assert!(pre_clip_cnn(&f, &[]).is_err());
        // more hidden units than inputs is rejected
        assert!(FcWeights::new(vec![vec![1.0], vec![2.0]], 1).is_err());
        assert!(CnnFilter::new(vec![f64::NAN]).is_err());
    }
}
