//! Statistical primitives used by the verification harness: two-sample
//! Kolmogorov–Smirnov, chi-square goodness of fit, exact two-sided binomial,
//! point-biserial correlation, and moment utilities.

use crate::error::{Error, Result};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete, Normal, StudentsT};

/// Kolmogorov–Smirnov statistic and asymptotic p-value for two samples.
///
/// p uses the classical series Q(λ) = 2 Σ (−1)^{j−1} e^{−2 j² λ²} with the
/// small-sample correction λ = (√ne + 0.12 + 0.11/√ne)·D, ne = n1·n2/(n1+n2).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParameter(
            "ks_two_sample: empty sample".into(),
        ));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n1, n2) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let x = xs[i].min(ys[j]);
        while i < n1 && xs[i] <= x {
            i += 1;
        }
        while j < n2 && ys[j] <= x {
            j += 1;
        }
        let diff = (i as f64 / n1 as f64 - j as f64 / n2 as f64).abs();
        if diff > d {
            d = diff;
        }
    }
    let ne = (n1 as f64 * n2 as f64) / (n1 as f64 + n2 as f64);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok((d, ks_q(lambda)))
}

/// Tail function of the Kolmogorov distribution, clamped to [0, 1].
fn ks_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Chi-square goodness-of-fit statistic and p-value.
/// Degrees of freedom default to cells − 1 unless given.
pub fn chi_square_gof(observed: &[f64], expected: &[f64], df: Option<usize>) -> Result<(f64, f64)> {
    if observed.len() != expected.len() || observed.is_empty() {
        return Err(Error::InvalidParameter(
            "chi_square_gof: mismatched or empty cell lists".into(),
        ));
    }
    let mut stat = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        if e <= 0.0 {
            return Err(Error::InvalidParameter(
                "chi_square_gof: nonpositive expected count".into(),
            ));
        }
        stat += (o - e) * (o - e) / e;
    }
    let df = df.unwrap_or(observed.len() - 1);
    if df == 0 {
        return Err(Error::InvalidParameter("chi_square_gof: zero df".into()));
    }
    let dist = ChiSquared::new(df as f64)
        .map_err(|e| Error::InvalidParameter(format!("chi_square_gof: {e}")))?;
    Ok((stat, 1.0 - dist.cdf(stat)))
}

/// Exact two-sided binomial test (minimum-likelihood method): the p-value is
/// the total probability of all outcomes no more likely than the observed one.
pub fn binomial_two_sided(k: u64, n: u64, p: f64) -> Result<f64> {
    if n == 0 || !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(
            "binomial_two_sided: need n > 0 and p in [0,1]".into(),
        ));
    }
    if k > n {
        return Err(Error::InvalidParameter(
            "binomial_two_sided: k > n".into(),
        ));
    }
    let dist =
        Binomial::new(p, n).map_err(|e| Error::InvalidParameter(format!("binomial: {e}")))?;
    let p_obs = dist.pmf(k);
    let cutoff = p_obs * (1.0 + 1e-7);
    let mut total = 0.0;
    for i in 0..=n {
        let pi = dist.pmf(i);
        if pi <= cutoff {
            total += pi;
        }
    }
    Ok(total.min(1.0))
}

/// Point-biserial correlation between a numeric feature and binary labels,
/// with the two-sided p-value from the exact t equivalence.
/// Returns (r, p). A constant feature or single-class labels give r = 0, p = 1.
pub fn point_biserial(x: &[f64], y: &[u8]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InvalidParameter(
            "point_biserial: need matched samples of length >= 3".into(),
        ));
    }
    let n = x.len() as f64;
    let n1 = y.iter().filter(|&&v| v == 1).count() as f64;
    let n0 = n - n1;
    if n1 == 0.0 || n0 == 0.0 {
        return Ok((0.0, 1.0));
    }
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var <= 0.0 {
        return Ok((0.0, 1.0));
    }
    let m1 = x
        .iter()
        .zip(y)
        .filter(|(_, &l)| l == 1)
        .map(|(v, _)| *v)
        .sum::<f64>()
        / n1;
    let m0 = x
        .iter()
        .zip(y)
        .filter(|(_, &l)| l == 0)
        .map(|(v, _)| *v)
        .sum::<f64>()
        / n0;
    let r = ((m1 - m0) / var.sqrt()) * (n1 * n0 / (n * n)).sqrt();
    let r = r.clamp(-1.0, 1.0);
    let df = n - 2.0;
    if r.abs() >= 1.0 {
        return Ok((r, 0.0));
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::InvalidParameter(format!("point_biserial: {e}")))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok((r, p.clamp(0.0, 1.0)))
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) || p == 0.0 {
        return Err(Error::InvalidParameter(
            "normal_quantile: p must be in (0,1)".into(),
        ));
    }
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    Ok(n.inverse_cdf(p))
}

/// Raw sample moment of the given order.
pub fn raw_moment(xs: &[f64], order: u32) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().map(|&v| v.powi(order as i32)).sum::<f64>() / xs.len() as f64
}
