//! Text formats for formulas.
//!
//! SAT formulas use DIMACS CNF (`p cnf <n_vars> <n_clauses>`, clauses as
//! 1-based signed integers terminated by 0). T and mixed formulas use an
//! extended header `t <n_vars> <n_constraints> <K> <q>`; each constraint is
//! one line with a polarity prefix (`+` direct, `-` negated) and clauses
//! separated by `|`. A planted assignment rides along as a
//! `c planted <±1 list>` comment, and CLI runs embed their manifest as a
//! `c manifest <json>` comment. Both formats round-trip exactly.

use super::{Assignment, Constraint, Formula, FormulaKind, Literal, Polarity, SignedTuple};
use crate::error::{Error, Result};
use crate::manifest::RunManifest;
use std::fmt::Write as _;
use std::path::Path;

/// Render a formula in its kind's text format.
pub fn write_formula(f: &Formula, manifest: Option<&RunManifest>) -> String {
    let mut out = String::new();
    if let Some(m) = manifest {
        let json = serde_json::to_string(m).expect("manifest serializes");
        writeln!(out, "c manifest {json}").unwrap();
    }
    if let Some(a) = f.planted() {
        let vals: Vec<String> = a.values().iter().map(|v| v.to_string()).collect();
        writeln!(out, "c planted {}", vals.join(" ")).unwrap();
    }
    match f.kind() {
        FormulaKind::SatK => {
            writeln!(out, "p cnf {} {}", f.n_vars(), f.n_constraints()).unwrap();
            for c in f.constraints() {
                let lits: Vec<String> = c.clauses[0]
                    .literals()
                    .iter()
                    .map(|l| encode_literal(*l))
                    .collect();
                writeln!(out, "{} 0", lits.join(" ")).unwrap();
            }
        }
        FormulaKind::TConj | FormulaKind::Mixed => {
            writeln!(out, "c kind {}", f.kind().label()).unwrap();
            writeln!(
                out,
                "t {} {} {} {}",
                f.n_vars(),
                f.n_constraints(),
                f.clause_size(),
                f.clauses_per_constraint()
            )
            .unwrap();
            for c in f.constraints() {
                let prefix = match c.polarity {
                    Polarity::Direct => '+',
                    Polarity::Negated => '-',
                };
                let clauses: Vec<String> = c
                    .clauses
                    .iter()
                    .map(|cl| {
                        cl.literals()
                            .iter()
                            .map(|l| encode_literal(*l))
                            .collect::<Vec<_>>()
                            .join(" ")
                    })
                    .collect();
                writeln!(out, "{prefix} {}", clauses.join(" | ")).unwrap();
            }
        }
    }
    out
}

/// Parse either format, detected from the header line.
pub fn read_formula(text: &str) -> Result<Formula> {
    let mut planted: Option<Vec<i8>> = None;
    let mut kind_comment: Option<String> = None;
    let mut header: Option<(bool, Vec<usize>)> = None; // (is_sat, numbers)
    let mut body: Vec<&str> = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("c ") {
            if let Some(vals) = rest.strip_prefix("planted ") {
                let parsed: Result<Vec<i8>> = vals
                    .split_whitespace()
                    .map(|tok| {
                        tok.parse::<i8>()
                            .map_err(|_| Error::Parse(format!("bad planted value '{tok}'")))
                    })
                    .collect();
                planted = Some(parsed?);
            } else if let Some(k) = rest.strip_prefix("kind ") {
                kind_comment = Some(k.trim().to_string());
            }
            continue;
        }
        if line == "c" {
            continue;
        }
        if header.is_none() {
            if let Some(rest) = line.strip_prefix("p cnf ") {
                header = Some((true, parse_usizes(rest, 2)?));
                continue;
            }
            if let Some(rest) = line.strip_prefix("t ") {
                header = Some((false, parse_usizes(rest, 4)?));
                continue;
            }
            return Err(Error::Parse(format!("unrecognized header line '{line}'")));
        }
        body.push(line);
    }
    let (is_sat, nums) = header.ok_or_else(|| Error::Parse("missing header line".into()))?;
    if is_sat {
        parse_sat_body(&nums, &body, planted)
    } else {
        parse_t_body(&nums, &body, planted, kind_comment)
    }
}

pub fn write_formula_file(
    path: &Path,
    f: &Formula,
    manifest: Option<&RunManifest>,
) -> Result<()> {
    std::fs::write(path, write_formula(f, manifest))?;
    Ok(())
}

pub fn read_formula_file(path: &Path) -> Result<Formula> {
    let text = std::fs::read_to_string(path)?;
    read_formula(&text)
}

fn encode_literal(l: Literal) -> String {
    let signed = (l.var as i64 + 1) * l.sign as i64;
    signed.to_string()
}

fn decode_literal(tok: &str, n_vars: usize) -> Result<Literal> {
    let v: i64 = tok
        .parse()
        .map_err(|_| Error::Parse(format!("bad literal '{tok}'")))?;
    if v == 0 {
        return Err(Error::Parse("literal 0 inside a clause".into()));
    }
    let var = v.unsigned_abs() as usize - 1;
    if var >= n_vars {
        return Err(Error::Parse(format!(
            "literal '{tok}' out of range for {n_vars} variables"
        )));
    }
    Ok(Literal {
        sign: if v > 0 { 1 } else { -1 },
        var,
    })
}

fn parse_usizes(s: &str, want: usize) -> Result<Vec<usize>> {
    let nums: Result<Vec<usize>> = s
        .split_whitespace()
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad header number '{tok}'")))
        })
        .collect();
    let nums = nums?;
    if nums.len() != want {
        return Err(Error::Parse(format!(
            "header needs {want} numbers, found {}",
            nums.len()
        )));
    }
    Ok(nums)
}

fn build_planted(raw: Option<Vec<i8>>, n_vars: usize) -> Result<Option<Assignment>> {
    match raw {
        None => Ok(None),
        Some(vals) => {
            if vals.len() != n_vars {
                return Err(Error::Parse(format!(
                    "planted assignment has {} values, formula has {n_vars} variables",
                    vals.len()
                )));
            }
            Ok(Some(Assignment::new(vals).map_err(|e| {
                Error::Parse(format!("bad planted assignment: {e}"))
            })?))
        }
    }
}

fn parse_sat_body(nums: &[usize], body: &[&str], planted: Option<Vec<i8>>) -> Result<Formula> {
    let (n_vars, n_clauses) = (nums[0], nums[1]);
    if body.len() != n_clauses {
        return Err(Error::Parse(format!(
            "expected {n_clauses} clause lines, found {}",
            body.len()
        )));
    }
    let mut clause_size: Option<usize> = None;
    let mut constraints = Vec::with_capacity(n_clauses);
    for line in body {
        let mut toks: Vec<&str> = line.split_whitespace().collect();
        if toks.pop() != Some("0") {
            return Err(Error::Parse(format!("clause line '{line}' not 0-terminated")));
        }
        let lits: Result<Vec<Literal>> =
            toks.iter().map(|t| decode_literal(t, n_vars)).collect();
        let lits = lits?;
        let width = lits.len();
        match clause_size {
            None => clause_size = Some(width),
            Some(k) if k != width => {
                return Err(Error::Parse(format!(
                    "clause width {width} differs from earlier width {k}"
                )))
            }
            _ => {}
        }
        let tuple = SignedTuple::new(lits, n_vars)
            .map_err(|e| Error::Parse(format!("bad clause '{line}': {e}")))?;
        constraints.push(Constraint::direct(vec![tuple]));
    }
    let k = clause_size.ok_or_else(|| Error::Parse("SAT formula with no clauses; width unknown".into()))?;
    let planted = build_planted(planted, n_vars)?;
    Formula::new(FormulaKind::SatK, n_vars, k, 1, constraints, planted)
        .map_err(|e| Error::Parse(format!("invalid formula: {e}")))
}

fn parse_t_body(
    nums: &[usize],
    body: &[&str],
    planted: Option<Vec<i8>>,
    kind_comment: Option<String>,
) -> Result<Formula> {
    let (n_vars, n_constraints, k, q) = (nums[0], nums[1], nums[2], nums[3]);
    if body.len() != n_constraints {
        return Err(Error::Parse(format!(
            "expected {n_constraints} constraint lines, found {}",
            body.len()
        )));
    }
    let mut any_negated = false;
    let mut constraints = Vec::with_capacity(n_constraints);
    for line in body {
        let (prefix, rest) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::Parse(format!("constraint line '{line}' too short")))?;
        let polarity = match prefix {
            "+" => Polarity::Direct,
            "-" => {
                any_negated = true;
                Polarity::Negated
            }
            _ => {
                return Err(Error::Parse(format!(
                    "constraint line must start with '+' or '-', found '{prefix}'"
                )))
            }
        };
        let mut clauses = Vec::with_capacity(q);
        for part in rest.split('|') {
            let lits: Result<Vec<Literal>> = part
                .split_whitespace()
                .map(|t| decode_literal(t, n_vars))
                .collect();
            let lits = lits?;
            if lits.len() != k {
                return Err(Error::Parse(format!(
                    "clause '{}' has width {}, expected {k}",
                    part.trim(),
                    lits.len()
                )));
            }
            clauses.push(
                SignedTuple::new(lits, n_vars)
                    .map_err(|e| Error::Parse(format!("bad clause '{}': {e}", part.trim())))?,
            );
        }
        if clauses.len() != q {
            return Err(Error::Parse(format!(
                "constraint has {} clauses, expected {q}",
                clauses.len()
            )));
        }
        constraints.push(Constraint { clauses, polarity });
    }
    let kind = match kind_comment.as_deref() {
        Some("t") => FormulaKind::TConj,
        Some("mixed") => FormulaKind::Mixed,
        Some(other) => return Err(Error::Parse(format!("unknown kind comment '{other}'"))),
        None => {
            if any_negated {
                FormulaKind::Mixed
            } else {
                FormulaKind::TConj
            }
        }
    };
    if kind == FormulaKind::TConj && any_negated {
        return Err(Error::Parse(
            "negated constraint in a formula declared as kind t".into(),
        ));
    }
    let planted = build_planted(planted, n_vars)?;
    Formula::new(kind, n_vars, k, q, constraints, planted)
        .map_err(|e| Error::Parse(format!("invalid formula: {e}")))
}
