//! Constraint-satisfaction formulas over signed Boolean variables: K-SAT,
//! conjunctive T-formulas (each constraint a conjunction of q variable-disjoint
//! K-clauses), and mixed formulas whose constraints carry a polarity bit.
//!
//! Polarity convention: a `Direct` constraint is the conjunction of its
//! clauses, each read as a disjunction (OR of literals). A `Negated`
//! constraint is the negation of such a conjunction, stored in DNF form:
//! its tuples are the terms of the DNF (each read as an AND of literals),
//! and the conjunction it negates is recovered by flipping every sign.
//! With this storage the encoder consumes Negated tuples as-is.

pub mod io;

use crate::error::{Error, Result};
use crate::rng::rng_for;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

// ─── literals, tuples, assignments ───

/// A signed variable occurrence; `sign` is +1 or -1, `var` is 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub sign: i8,
    pub var: usize,
}

impl Literal {
    pub fn new(sign: i8, var: usize) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return Err(Error::InvalidParameter(format!(
                "literal sign must be +1 or -1, got {sign}"
            )));
        }
        Ok(Literal { sign, var })
    }

    pub fn pos(var: usize) -> Self {
        Literal { sign: 1, var }
    }

    pub fn neg(var: usize) -> Self {
        Literal { sign: -1, var }
    }

    pub fn flipped(self) -> Self {
        Literal {
            sign: -self.sign,
            var: self.var,
        }
    }

    pub fn satisfied_by(self, a: &Assignment) -> bool {
        a.value(self.var) == self.sign
    }
}

/// A signed K-tuple: K literals over pairwise-distinct variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedTuple {
    literals: Vec<Literal>,
}

impl SignedTuple {
    pub fn new(literals: Vec<Literal>, n_vars: usize) -> Result<Self> {
        if literals.is_empty() {
            return Err(Error::InvalidParameter("empty signed tuple".into()));
        }
        if literals.len() > n_vars {
            return Err(Error::InvalidParameter(format!(
                "tuple width {} exceeds variable count {n_vars}",
                literals.len()
            )));
        }
        let mut seen = vec![false; n_vars];
        for lit in &literals {
            if lit.sign != 1 && lit.sign != -1 {
                return Err(Error::InvalidParameter(format!(
                    "literal sign must be +1 or -1, got {}",
                    lit.sign
                )));
            }
            if lit.var >= n_vars {
                return Err(Error::InvalidParameter(format!(
                    "variable {} out of range (n_vars = {n_vars})",
                    lit.var
                )));
            }
            if seen[lit.var] {
                return Err(Error::InvalidParameter(format!(
                    "variable {} repeated within a tuple",
                    lit.var
                )));
            }
            seen[lit.var] = true;
        }
        Ok(SignedTuple { literals })
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn width(&self) -> usize {
        self.literals.len()
    }

    /// OR reading: at least one literal satisfied.
    pub fn satisfied_or(&self, a: &Assignment) -> bool {
        self.literals.iter().any(|l| l.satisfied_by(a))
    }

    /// AND reading: every literal satisfied.
    pub fn satisfied_and(&self, a: &Assignment) -> bool {
        self.literals.iter().all(|l| l.satisfied_by(a))
    }

    /// Number of falsified literals under the assignment.
    pub fn falsified_count(&self, a: &Assignment) -> usize {
        self.literals
            .iter()
            .filter(|l| !l.satisfied_by(a))
            .count()
    }

    pub fn flip_signs(&self) -> SignedTuple {
        SignedTuple {
            literals: self.literals.iter().map(|l| l.flipped()).collect(),
        }
    }
}

/// A full ±1 assignment to the variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    values: Vec<i8>,
}

impl Assignment {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty assignment".into()));
        }
        if values.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::InvalidParameter(
                "assignment values must be +1 or -1".into(),
            ));
        }
        Ok(Assignment { values })
    }

    pub fn uniform(n_vars: usize, rng: &mut ChaCha12Rng) -> Self {
        let values = (0..n_vars)
            .map(|_| if rng.gen_bool(0.5) { 1i8 } else { -1i8 })
            .collect();
        Assignment { values }
    }

    pub fn n_vars(&self) -> usize {
        self.values.len()
    }

    pub fn value(&self, var: usize) -> i8 {
        self.values[var]
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }
}

// ─── constraints and formulas ───

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarity {
    /// Conjunction of OR-clauses.
    Direct,
    /// Negation of a conjunction, stored as the terms of its DNF.
    Negated,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub clauses: Vec<SignedTuple>,
    pub polarity: Polarity,
}

impl Constraint {
    pub fn direct(clauses: Vec<SignedTuple>) -> Self {
        Constraint {
            clauses,
            polarity: Polarity::Direct,
        }
    }

    /// The negation of a Direct constraint, in stored-DNF form (signs flipped).
    pub fn negation_of(direct: &Constraint) -> Self {
        Constraint {
            clauses: direct.clauses.iter().map(|c| c.flip_signs()).collect(),
            polarity: Polarity::Negated,
        }
    }

    /// Truth value under the polarity convention described at module level.
    pub fn evaluate(&self, a: &Assignment) -> bool {
        match self.polarity {
            Polarity::Direct => self.clauses.iter().all(|c| c.satisfied_or(a)),
            Polarity::Negated => self.clauses.iter().any(|c| c.satisfied_and(a)),
        }
    }

    /// Variables are pairwise distinct across all clauses of the constraint.
    fn vars_distinct(&self, n_vars: usize) -> bool {
        let mut seen = vec![false; n_vars];
        for clause in &self.clauses {
            for lit in clause.literals() {
                if seen[lit.var] {
                    return false;
                }
                seen[lit.var] = true;
            }
        }
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormulaKind {
    /// One K-clause per constraint.
    SatK,
    /// Conjunction of q variable-disjoint K-clauses per constraint.
    TConj,
    /// TConj shape with per-constraint polarity.
    Mixed,
}

impl FormulaKind {
    pub fn label(self) -> &'static str {
        match self {
            FormulaKind::SatK => "sat",
            FormulaKind::TConj => "t",
            FormulaKind::Mixed => "mixed",
        }
    }
}

/// A formula: constraints of uniform shape over n_vars variables, with an
/// optional planted assignment carried alongside.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Formula {
    n_vars: usize,
    clause_size: usize,
    clauses_per_constraint: usize,
    kind: FormulaKind,
    constraints: Vec<Constraint>,
    planted: Option<Assignment>,
}

impl Formula {
    pub fn new(
        kind: FormulaKind,
        n_vars: usize,
        clause_size: usize,
        clauses_per_constraint: usize,
        constraints: Vec<Constraint>,
        planted: Option<Assignment>,
    ) -> Result<Self> {
        if n_vars == 0 {
            return Err(Error::InvalidParameter("n_vars must be positive".into()));
        }
        if clause_size == 0 || clause_size > n_vars {
            return Err(Error::InvalidParameter(format!(
                "clause size {clause_size} must be in 1..={n_vars}"
            )));
        }
        match kind {
            FormulaKind::SatK => {
                if clauses_per_constraint != 1 {
                    return Err(Error::InvalidParameter(
                        "SAT formulas have one clause per constraint".into(),
                    ));
                }
            }
            FormulaKind::TConj | FormulaKind::Mixed => {
                if clauses_per_constraint == 0 {
                    return Err(Error::InvalidParameter(
                        "clauses_per_constraint must be positive".into(),
                    ));
                }
                if clause_size * clauses_per_constraint > n_vars {
                    return Err(Error::InvalidParameter(format!(
                        "constraint width {} exceeds variable count {n_vars}",
                        clause_size * clauses_per_constraint
                    )));
                }
            }
        }
        for (i, c) in constraints.iter().enumerate() {
            if c.clauses.len() != clauses_per_constraint {
                return Err(Error::InvalidParameter(format!(
                    "constraint {i} has {} clauses, expected {clauses_per_constraint}",
                    c.clauses.len()
                )));
            }
            for clause in &c.clauses {
                if clause.width() != clause_size {
                    return Err(Error::InvalidParameter(format!(
                        "constraint {i} has a clause of width {}, expected {clause_size}",
                        clause.width()
                    )));
                }
                for lit in clause.literals() {
                    if lit.var >= n_vars {
                        return Err(Error::InvalidParameter(format!(
                            "constraint {i} references variable {} out of range",
                            lit.var
                        )));
                    }
                }
            }
            if kind != FormulaKind::SatK && !c.vars_distinct(n_vars) {
                return Err(Error::InvalidParameter(format!(
                    "constraint {i} repeats a variable across clauses"
                )));
            }
            if kind != FormulaKind::Mixed && c.polarity != Polarity::Direct {
                return Err(Error::InvalidParameter(format!(
                    "constraint {i} is negated in a non-mixed formula"
                )));
            }
        }
        if let Some(a) = &planted {
            if a.n_vars() != n_vars {
                return Err(Error::DimensionMismatch(format!(
                    "planted assignment covers {} variables, formula has {n_vars}",
                    a.n_vars()
                )));
            }
        }
        Ok(Formula {
            n_vars,
            clause_size,
            clauses_per_constraint,
            kind,
            constraints,
            planted,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn clause_size(&self) -> usize {
        self.clause_size
    }

    pub fn clauses_per_constraint(&self) -> usize {
        self.clauses_per_constraint
    }

    pub fn kind(&self) -> FormulaKind {
        self.kind
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn planted(&self) -> Option<&Assignment> {
        self.planted.as_ref()
    }

    /// Evaluate the whole formula: conjunction over constraints.
    pub fn evaluate(&self, a: &Assignment) -> bool {
        self.constraints.iter().all(|c| c.evaluate(a))
    }

    /// Indices of constraints not satisfied by the assignment.
    pub fn unsatisfied_indices(&self, a: &Assignment) -> Vec<usize> {
        self.constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.evaluate(a))
            .map(|(i, _)| i)
            .collect()
    }

    /// Content hash usable as a provenance id: stable across runs and platforms.
    pub fn content_id(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.kind.label().as_bytes());
        h.update(self.n_vars.to_le_bytes());
        h.update(self.clause_size.to_le_bytes());
        h.update(self.clauses_per_constraint.to_le_bytes());
        for c in &self.constraints {
            h.update([matches!(c.polarity, Polarity::Negated) as u8]);
            for clause in &c.clauses {
                for lit in clause.literals() {
                    h.update((lit.var as u64).to_le_bytes());
                    h.update([(lit.sign == 1) as u8]);
                }
            }
        }
        if let Some(a) = &self.planted {
            h.update([1u8]);
            for &v in a.values() {
                h.update([(v == 1) as u8]);
            }
        } else {
            h.update([0u8]);
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

// ─── sampling helpers ───

/// Partial Fisher–Yates sampler of distinct indices with O(k) cost per draw
/// after a one-time O(n) setup; order of the drawn sequence is uniform.
struct DistinctSampler {
    scratch: Vec<usize>,
}

impl DistinctSampler {
    fn new(n: usize) -> Self {
        DistinctSampler {
            scratch: (0..n).collect(),
        }
    }

    fn draw(&mut self, k: usize, rng: &mut ChaCha12Rng) -> Vec<usize> {
        let n = self.scratch.len();
        let mut swaps = Vec::with_capacity(k);
        for i in 0..k {
            let j = rng.gen_range(i..n);
            self.scratch.swap(i, j);
            swaps.push((i, j));
        }
        let out = self.scratch[..k].to_vec();
        for &(i, j) in swaps.iter().rev() {
            self.scratch.swap(i, j);
        }
        out
    }
}

fn random_clause(
    sampler: &mut DistinctSampler,
    k: usize,
    n_vars: usize,
    rng: &mut ChaCha12Rng,
) -> SignedTuple {
    let vars = sampler.draw(k, rng);
    let literals = vars
        .into_iter()
        .map(|v| Literal {
            sign: if rng.gen_bool(0.5) { 1 } else { -1 },
            var: v,
        })
        .collect();
    SignedTuple::new(literals, n_vars).expect("sampler produces valid tuples")
}

/// A uniform Direct T-constraint: q·K distinct variables, independent signs,
/// chunked into q clauses of width K.
fn random_t_constraint(
    sampler: &mut DistinctSampler,
    k: usize,
    q: usize,
    n_vars: usize,
    rng: &mut ChaCha12Rng,
) -> Constraint {
    let vars = sampler.draw(k * q, rng);
    let clauses = vars
        .chunks(k)
        .map(|chunk| {
            let literals = chunk
                .iter()
                .map(|&v| Literal {
                    sign: if rng.gen_bool(0.5) { 1 } else { -1 },
                    var: v,
                })
                .collect();
            SignedTuple::new(literals, n_vars).expect("sampler produces valid tuples")
        })
        .collect();
    Constraint::direct(clauses)
}

/// Resample the signs of one clause until the given predicate holds.
/// Sign symmetry makes the result uniform conditioned on the predicate.
fn condition_clause_signs<F>(clause: &mut SignedTuple, rng: &mut ChaCha12Rng, pred: F)
where
    F: Fn(&SignedTuple) -> bool,
{
    loop {
        if pred(clause) {
            return;
        }
        for lit in clause.literals.iter_mut() {
            lit.sign = if rng.gen_bool(0.5) { 1 } else { -1 };
        }
    }
}

// ─── generation operations ───

/// Uniform random K-SAT: each clause an independent uniform signed K-tuple.
pub fn sample_random_ksat(
    n_vars: usize,
    n_constraints: usize,
    k: usize,
    seed: u64,
) -> Result<Formula> {
    check_shape(n_vars, k, 1)?;
    let mut rng = rng_for(seed, "ksat-random");
    let mut sampler = DistinctSampler::new(n_vars);
    let constraints = (0..n_constraints)
        .map(|_| Constraint::direct(vec![random_clause(&mut sampler, k, n_vars, &mut rng)]))
        .collect();
    Formula::new(FormulaKind::SatK, n_vars, k, 1, constraints, None)
}

/// Planted K-SAT: a uniform assignment ψ, then each clause resampled whole
/// until ψ satisfies it (uniform over satisfying clauses).
pub fn sample_planted_ksat(
    n_vars: usize,
    n_constraints: usize,
    k: usize,
    seed: u64,
) -> Result<Formula> {
    check_shape(n_vars, k, 1)?;
    let mut rng = rng_for(seed, "ksat-planted");
    let psi = Assignment::uniform(n_vars, &mut rng);
    let mut sampler = DistinctSampler::new(n_vars);
    let constraints = (0..n_constraints)
        .map(|_| {
            let clause = loop {
                let c = random_clause(&mut sampler, k, n_vars, &mut rng);
                if c.satisfied_or(&psi) {
                    break c;
                }
            };
            Constraint::direct(vec![clause])
        })
        .collect();
    Formula::new(FormulaKind::SatK, n_vars, k, 1, constraints, Some(psi))
}

/// Uniform random T-formula: each constraint an independent uniform
/// signed (qK)-tuple chunked into q clauses.
pub fn sample_random_t(
    n_vars: usize,
    n_constraints: usize,
    k: usize,
    q: usize,
    seed: u64,
) -> Result<Formula> {
    check_shape(n_vars, k, q)?;
    let mut rng = rng_for(seed, "t-random");
    let mut sampler = DistinctSampler::new(n_vars);
    let constraints = (0..n_constraints)
        .map(|_| random_t_constraint(&mut sampler, k, q, n_vars, &mut rng))
        .collect();
    Formula::new(FormulaKind::TConj, n_vars, k, q, constraints, None)
}

/// Planted T-formula: uniform ψ; per constraint, variables drawn once and each
/// clause's signs resampled until ψ satisfies it, giving the uniform
/// distribution conditioned on every clause holding.
pub fn sample_planted_t(
    n_vars: usize,
    n_constraints: usize,
    k: usize,
    q: usize,
    seed: u64,
) -> Result<Formula> {
    check_shape(n_vars, k, q)?;
    let mut rng = rng_for(seed, "t-planted");
    let psi = Assignment::uniform(n_vars, &mut rng);
    let mut sampler = DistinctSampler::new(n_vars);
    let constraints = (0..n_constraints)
        .map(|_| {
            let mut c = random_t_constraint(&mut sampler, k, q, n_vars, &mut rng);
            for clause in c.clauses.iter_mut() {
                condition_clause_signs(clause, &mut rng, |cl| cl.satisfied_or(&psi));
            }
            c
        })
        .collect();
    Formula::new(FormulaKind::TConj, n_vars, k, q, constraints, Some(psi))
}

/// Uniform random mixed formula: fair-coin polarity per constraint, tuples
/// uniform; Negated constraints are stored directly in DNF-term form.
pub fn sample_random_mixed(
    n_vars: usize,
    n_constraints: usize,
    k: usize,
    q: usize,
    seed: u64,
) -> Result<Formula> {
    check_shape(n_vars, k, q)?;
    let mut rng = rng_for(seed, "mixed-random");
    let mut sampler = DistinctSampler::new(n_vars);
    let constraints = (0..n_constraints)
        .map(|_| {
            let mut c = random_t_constraint(&mut sampler, k, q, n_vars, &mut rng);
            if rng.gen_bool(0.5) {
                c.polarity = Polarity::Negated;
            }
            c
        })
        .collect();
    Formula::new(FormulaKind::Mixed, n_vars, k, q, constraints, None)
}

/// Planted mixed formula: uniform ψ, fair-coin polarity, and each constraint
/// conditioned (by sign resampling) on being satisfied by ψ. Every constraint
/// of the output evaluates to true under ψ, so the gadget encoding of the
/// result is exactly realizable.
pub fn sample_planted_mixed(
    n_vars: usize,
    n_constraints: usize,
    k: usize,
    q: usize,
    seed: u64,
) -> Result<Formula> {
    check_shape(n_vars, k, q)?;
    let mut rng = rng_for(seed, "mixed-planted");
    let psi = Assignment::uniform(n_vars, &mut rng);
    let mut sampler = DistinctSampler::new(n_vars);
    let constraints = (0..n_constraints)
        .map(|_| {
            let mut c = random_t_constraint(&mut sampler, k, q, n_vars, &mut rng);
            if rng.gen_bool(0.5) {
                c.polarity = Polarity::Negated;
                // DNF reading: satisfied when some term holds in full.
                loop {
                    if c.clauses.iter().any(|cl| cl.satisfied_and(&psi)) {
                        break;
                    }
                    for clause in c.clauses.iter_mut() {
                        for lit in clause.literals.iter_mut() {
                            lit.sign = if rng.gen_bool(0.5) { 1 } else { -1 };
                        }
                    }
                }
            } else {
                for clause in c.clauses.iter_mut() {
                    condition_clause_signs(clause, &mut rng, |cl| cl.satisfied_or(&psi));
                }
            }
            c
        })
        .collect();
    Formula::new(FormulaKind::Mixed, n_vars, k, q, constraints, Some(psi))
}

fn check_shape(n_vars: usize, k: usize, q: usize) -> Result<()> {
    if n_vars == 0 || k == 0 || q == 0 {
        return Err(Error::InvalidParameter(
            "n_vars, clause size, and clauses per constraint must be positive".into(),
        ));
    }
    if k * q > n_vars {
        return Err(Error::InvalidParameter(format!(
            "constraint width {} exceeds variable count {n_vars}",
            k * q
        )));
    }
    Ok(())
}

// ─── reduction operations ───

/// Outcome of the greedy grouping; failing to fill a group is a value,
/// not an error.
#[derive(Clone, Debug)]
pub enum ReduceOutcome {
    Reduced(Formula),
    Fail { groups_built: usize },
}

/// Greedily pack SAT clauses into `n_groups` variable-disjoint groups of q.
///
/// Clauses are scanned in input order; a clause joins the current group iff
/// it shares no variable with the clauses already in it. Groups are disjoint
/// subsets of the input, so a carried planted assignment keeps satisfying
/// every output constraint.
pub fn reduce_sat_to_t(formula: &Formula, q: usize, n_groups: usize) -> Result<ReduceOutcome> {
    if formula.kind() != FormulaKind::SatK {
        return Err(Error::InvalidParameter(
            "reduce_sat_to_t expects a SAT formula".into(),
        ));
    }
    if q == 0 || n_groups == 0 {
        return Err(Error::InvalidParameter(
            "q and n_groups must be positive".into(),
        ));
    }
    let k = formula.clause_size();
    if k * q > formula.n_vars() {
        return Err(Error::InvalidParameter(format!(
            "group width {} exceeds variable count {}",
            k * q,
            formula.n_vars()
        )));
    }
    let clauses: Vec<&SignedTuple> = formula
        .constraints()
        .iter()
        .map(|c| &c.clauses[0])
        .collect();
    let mut used = vec![false; clauses.len()];
    let mut groups: Vec<Constraint> = Vec::with_capacity(n_groups);
    let mut in_group = vec![false; formula.n_vars()];
    for built in 0..n_groups {
        in_group.iter_mut().for_each(|v| *v = false);
        let mut members: Vec<usize> = Vec::with_capacity(q);
        for (idx, clause) in clauses.iter().enumerate() {
            if used[idx] {
                continue;
            }
            if clause.literals().iter().any(|l| in_group[l.var]) {
                continue;
            }
            members.push(idx);
            for l in clause.literals() {
                in_group[l.var] = true;
            }
            if members.len() == q {
                break;
            }
        }
        if members.len() < q {
            return Ok(ReduceOutcome::Fail {
                groups_built: built,
            });
        }
        for &idx in &members {
            used[idx] = true;
        }
        groups.push(Constraint::direct(
            members.iter().map(|&idx| clauses[idx].clone()).collect(),
        ));
    }
    let reduced = Formula::new(
        FormulaKind::TConj,
        formula.n_vars(),
        k,
        q,
        groups,
        formula.planted.clone(),
    )?;
    Ok(ReduceOutcome::Reduced(reduced))
}

/// Coin-flip each T-constraint: with probability 1/2 keep it Direct, else
/// replace it with a fresh uniform Negated constraint (independent of the
/// original). A planted assignment is carried along unchanged; it may fail
/// some Negated constraints, which callers count via `unsatisfied_indices`.
pub fn flip_to_mixed(formula: &Formula, seed: u64) -> Result<Formula> {
    if formula.kind() != FormulaKind::TConj {
        return Err(Error::InvalidParameter(
            "flip_to_mixed expects a T-formula".into(),
        ));
    }
    let mut rng = rng_for(seed, "flip");
    let k = formula.clause_size();
    let q = formula.clauses_per_constraint();
    let mut sampler = DistinctSampler::new(formula.n_vars());
    let constraints = formula
        .constraints()
        .iter()
        .map(|c| {
            if rng.gen_bool(0.5) {
                let mut fresh = random_t_constraint(&mut sampler, k, q, formula.n_vars(), &mut rng);
                fresh.polarity = Polarity::Negated;
                fresh
            } else {
                c.clone()
            }
        })
        .collect();
    Formula::new(
        FormulaKind::Mixed,
        formula.n_vars(),
        k,
        q,
        constraints,
        formula.planted.clone(),
    )
}
