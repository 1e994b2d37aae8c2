//! Gadget encoding: mixed formulas over n' variables become labeled points
//! in R^((n'+1)q). Each clause occupies one block of n'+1 coordinates —
//! literal signs at the variable positions and -(K-1) in the bias slot — so
//! that against a ±1 assignment extended by 1 the block margin is exactly
//! 1 - 2u, where u counts falsified literals. Negated constraints encode
//! their stored DNF terms as-is with label 1; direct constraints encode each
//! clause sign-flipped with label 0. A planted assignment that satisfies the
//! formula then realizes every label through the filter (assignment, 1).

pub mod io;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::csp::{Assignment, Constraint, Formula, FormulaKind, Polarity, SignedTuple};
use crate::error::{Error, Result};
use crate::neural::CnnFilter;

/// Where a sample's labels came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// Encoded without a planted assignment.
    Scattered,
    /// Encoded from a formula its planted assignment satisfies.
    Realizable { formula_id: String },
    /// Produced by a transform applied to another sample.
    Transformed {
        parent: Box<Provenance>,
        transform: String,
    },
    /// Planted, but the assignment does not satisfy every constraint.
    Unknown,
}

impl Provenance {
    pub fn label(&self) -> &'static str {
        match self {
            Provenance::Scattered => "scattered",
            Provenance::Realizable { .. } => "realizable",
            Provenance::Transformed { .. } => "transformed",
            Provenance::Unknown => "unknown",
        }
    }

    /// Innermost provenance, unwrapping transform layers.
    pub fn root(&self) -> &Provenance {
        match self {
            Provenance::Transformed { parent, .. } => parent.root(),
            other => other,
        }
    }
}

/// Block geometry of an encoded sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GadgetShape {
    pub n_prime: usize,
    pub q: usize,
    pub clause_size: usize,
}

impl GadgetShape {
    pub fn block_dim(&self) -> usize {
        self.n_prime + 1
    }

    pub fn dim(&self) -> usize {
        (self.n_prime + 1) * self.q
    }

    /// Every encoded point has squared norm exactly q(K + (K-1)^2).
    pub fn norm_bound(&self) -> f64 {
        let k = self.clause_size as f64;
        (self.q as f64 * (k + (k - 1.0) * (k - 1.0))).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplePoint {
    pub x: Vec<f64>,
    pub y: u8,
}

/// A labeled sample with its provenance and the norm bound its points obey.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    dim: usize,
    points: Vec<SamplePoint>,
    provenance: Provenance,
    norm_bound: f64,
    shape: Option<GadgetShape>,
}

impl LabeledSample {
    pub fn new(
        dim: usize,
        points: Vec<SamplePoint>,
        provenance: Provenance,
        norm_bound: f64,
        shape: Option<GadgetShape>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("sample dimension must be > 0".into()));
        }
        if !(norm_bound.is_finite() && norm_bound > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "norm bound must be finite and positive, got {norm_bound}"
            )));
        }
        if let Some(s) = shape {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "shape implies dimension {}, sample claims {dim}",
                    s.dim()
                )));
            }
        }
        for (i, p) in points.iter().enumerate() {
            if p.x.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.x.len()
                )));
            }
            if p.y > 1 {
                return Err(Error::InvalidParameter(format!(
                    "point {i} has label {}, expected 0 or 1",
                    p.y
                )));
            }
            if p.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "point {i} contains a non-finite coordinate"
                )));
            }
        }
        Ok(LabeledSample {
            dim,
            points,
            provenance,
            norm_bound,
            shape,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[SamplePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn shape(&self) -> Option<GadgetShape> {
        self.shape
    }

    pub fn max_norm(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.x.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Short content hash over dimensions, labels, coordinates, provenance.
    pub fn content_id(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.dim as u64).to_le_bytes());
        hasher.update((self.points.len() as u64).to_le_bytes());
        hasher.update(self.norm_bound.to_le_bytes());
        for p in &self.points {
            hasher.update([p.y]);
            for v in &p.x {
                hasher.update(v.to_le_bytes());
            }
        }
        hasher.update(serde_json::to_string(&self.provenance).unwrap().as_bytes());
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One clause as a gadget block of dimension n'+1.
pub fn encode_clause(clause: &SignedTuple, n_prime: usize) -> Result<Vec<f64>> {
    let mut z = vec![0.0; n_prime + 1];
    for lit in clause.literals() {
        if lit.var >= n_prime {
            return Err(Error::DimensionMismatch(format!(
                "clause variable {} out of range for {n_prime} variables",
                lit.var
            )));
        }
        z[lit.var] = lit.sign as f64;
    }
    z[n_prime] = -((clause.width() - 1) as f64);
    Ok(z)
}

/// One constraint as a labeled point: blocks concatenated clause by clause.
pub fn encode_constraint(c: &Constraint, n_prime: usize) -> Result<SamplePoint> {
    if c.clauses.is_empty() {
        return Err(Error::InvalidParameter("constraint has no clauses".into()));
    }
    let mut x = Vec::with_capacity((n_prime + 1) * c.clauses.len());
    let y = match c.polarity {
        Polarity::Direct => {
            for clause in &c.clauses {
                x.extend(encode_clause(&clause.flip_signs(), n_prime)?);
            }
            0
        }
        Polarity::Negated => {
            for clause in &c.clauses {
                x.extend(encode_clause(clause, n_prime)?);
            }
            1
        }
    };
    Ok(SamplePoint { x, y })
}

/// Encode a whole mixed formula. Provenance is Realizable only when a
/// planted assignment is present and satisfies every constraint.
pub fn encode_formula(f: &Formula) -> Result<LabeledSample> {
    if f.kind() != FormulaKind::Mixed {
        return Err(Error::UnsupportedFamily(format!(
            "gadget encoding expects a mixed formula, got kind '{}'",
            f.kind().label()
        )));
    }
    let shape = GadgetShape {
        n_prime: f.n_vars(),
        q: f.clauses_per_constraint(),
        clause_size: f.clause_size(),
    };
    let points = f
        .constraints()
        .iter()
        .map(|c| encode_constraint(c, shape.n_prime))
        .collect::<Result<Vec<_>>>()?;
    let provenance = match f.planted() {
        None => Provenance::Scattered,
        Some(a) => {
            if f.evaluate(a) {
                Provenance::Realizable {
                    formula_id: f.content_id(),
                }
            } else {
                Provenance::Unknown
            }
        }
    };
    LabeledSample::new(
        shape.dim(),
        points,
        provenance,
        shape.norm_bound(),
        Some(shape),
    )
}

/// The filter (assignment, 1) that realizes a satisfied encoded formula.
pub fn realizing_weights(a: &Assignment) -> CnnFilter {
    let mut w: Vec<f64> = a.values().iter().map(|&s| s as f64).collect();
    w.push(1.0);
    CnnFilter::new(w).expect("assignment entries are finite")
}
