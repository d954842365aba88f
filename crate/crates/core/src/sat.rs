//! Reduction from 3-SAT to positivity of a box-density likelihood.
//!
//! Clause `l` (numbered from 1) becomes the sample `y_l` with coordinate
//! `y_l[j] = l` when variable `j` occurs in the clause and `0` otherwise, plus
//! seven gadget boxes, one per satisfying assignment of the clause's three
//! variables. A translate `theta` puts every `y_l - theta` inside the support
//! exactly when the formula is satisfiable.

use crate::error::{Error, Result};
use crate::geometry::{BoxDensity, Hyperrectangle, Instance, SampleSet, WeightedBox};
use rand::Rng;
use rayon::prelude::*;
use std::fmt::Write as _;

/// Half-width of the gadget intervals.
pub const GADGET_EPSILON: f64 = 1.0 / 80.0;

/// Largest variable count accepted by the enumerating deciders.
pub const MAX_ENUM_VARS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Literal {
    /// Zero-based variable index.
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    pub fn eval(&self, assignment: &[bool]) -> bool {
        assignment[self.var] == self.positive
    }

    fn to_dimacs(self) -> i64 {
        let v = self.var as i64 + 1;
        if self.positive {
            v
        } else {
            -v
        }
    }
}

/// A 3-CNF formula in which every clause has three distinct variables and
/// every variable occurs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<[Literal; 3]>,
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<[Literal; 3]>) -> Result<Self> {
        if clauses.is_empty() {
            return Err(Error::InvalidCnf("formula has no clauses".into()));
        }
        let mut seen = vec![false; num_vars];
        for (i, c) in clauses.iter().enumerate() {
            for lit in c {
                if lit.var >= num_vars {
                    return Err(Error::InvalidCnf(format!(
                        "clause {} uses variable {} but only {num_vars} are declared",
                        i + 1,
                        lit.var + 1
                    )));
                }
                seen[lit.var] = true;
            }
            if c[0].var == c[1].var || c[0].var == c[2].var || c[1].var == c[2].var {
                return Err(Error::InvalidCnf(format!(
                    "clause {} repeats a variable",
                    i + 1
                )));
            }
        }
        if let Some(v) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidCnf(format!("variable {} never occurs", v + 1)));
        }
        Ok(Self { num_vars, clauses })
    }

    /// Builds a formula from signed one-based literals, DIMACS style.
    pub fn from_signed(num_vars: usize, clauses: &[[i64; 3]]) -> Result<Self> {
        let mut out = Vec::with_capacity(clauses.len());
        for c in clauses {
            let mut lits = [Literal {
                var: 0,
                positive: true,
            }; 3];
            for (slot, &v) in lits.iter_mut().zip(c) {
                if v == 0 {
                    return Err(Error::InvalidCnf("literal 0 inside a clause".into()));
                }
                *slot = Literal {
                    var: v.unsigned_abs() as usize - 1,
                    positive: v > 0,
                };
            }
            out.push(lits);
        }
        Self::new(num_vars, out)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[[Literal; 3]] {
        &self.clauses
    }

    pub fn is_satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses
            .iter()
            .all(|c| c.iter().any(|lit| lit.eval(assignment)))
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            let _ = writeln!(
                s,
                "{} {} {} 0",
                c[0].to_dimacs(),
                c[1].to_dimacs(),
                c[2].to_dimacs()
            );
        }
        s
    }
}

/// Parses DIMACS CNF. Clauses may span lines; `c` lines are comments and a
/// lone `%` ends the clause list.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Vec<i64>> = Vec::new();
    let mut current: Vec<i64> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if header.is_some() || parts.len() != 4 || parts[1] != "cnf" {
                return Err(Error::InvalidCnf(format!("bad header on line {}", lineno + 1)));
            }
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::InvalidCnf(format!("bad header on line {}", lineno + 1)))
            };
            header = Some((parse(parts[2])?, parse(parts[3])?));
            continue;
        }
        if header.is_none() {
            return Err(Error::InvalidCnf("clause before `p cnf` header".into()));
        }
        for tok in line.split_whitespace() {
            let v: i64 = tok.parse().map_err(|_| {
                Error::InvalidCnf(format!("bad literal `{tok}` on line {}", lineno + 1))
            })?;
            if v == 0 {
                clauses.push(std::mem::take(&mut current));
            } else {
                current.push(v);
            }
        }
    }
    if !current.is_empty() {
        clauses.push(current);
    }
    let (num_vars, num_clauses) =
        header.ok_or_else(|| Error::InvalidCnf("missing `p cnf` header".into()))?;
    if clauses.len() != num_clauses {
        return Err(Error::InvalidCnf(format!(
            "header declares {num_clauses} clauses, found {}",
            clauses.len()
        )));
    }
    let mut triples = Vec::with_capacity(clauses.len());
    for (i, c) in clauses.iter().enumerate() {
        if c.len() != 3 {
            return Err(Error::InvalidCnf(format!(
                "clause {} has {} literals, expected 3",
                i + 1,
                c.len()
            )));
        }
        if c.iter().any(|v| v.unsigned_abs() as usize > num_vars) {
            return Err(Error::InvalidCnf(format!(
                "clause {} uses a variable above {num_vars}",
                i + 1
            )));
        }
        triples.push([c[0], c[1], c[2]]);
    }
    CnfFormula::from_signed(num_vars, &triples)
}

/// Samples and gadget density produced from a formula.
#[derive(Debug, Clone)]
pub struct ReductionOutput {
    pub samples: SampleSet,
    pub density: BoxDensity,
    pub gamma: f64,
    pub epsilon_gadget: f64,
}

impl ReductionOutput {
    pub fn instance(&self) -> Instance {
        Instance::new(self.density.clone(), self.samples.clone()).expect("dimensions agree")
    }

    pub fn num_boxes(&self) -> usize {
        self.density.len()
    }
}

/// `gamma = (7 n 0.5^(l-3) (2 eps)^3)^-1`.
pub fn gadget_gamma(num_vars: usize, num_clauses: usize) -> f64 {
    let e = GADGET_EPSILON;
    1.0 / (7.0 * num_clauses as f64 * 0.5f64.powi(num_vars as i32 - 3) * (2.0 * e).powi(3))
}

pub fn reduce_3sat(cnf: &CnfFormula) -> Result<ReductionOutput> {
    let l = cnf.num_vars();
    let e = GADGET_EPSILON;
    let gamma = gadget_gamma(l, cnf.clauses().len());
    let mut points = Vec::with_capacity(cnf.clauses().len());
    let mut boxes = Vec::with_capacity(7 * cnf.clauses().len());
    for (idx, clause) in cnf.clauses().iter().enumerate() {
        let ell = (idx + 1) as f64;
        let mut y = vec![0.0; l];
        for lit in clause {
            y[lit.var] = ell;
        }
        points.push(y);

        let mut lits = *clause;
        lits.sort_by_key(|lit| lit.var);
        for row in 0..8u8 {
            // First (smallest) variable is the most significant bit.
            let values = [row & 4 != 0, row & 2 != 0, row & 1 != 0];
            if lits.iter().zip(values).all(|(lit, v)| v != lit.positive) {
                continue;
            }
            let mut lo = vec![0.0; l];
            let mut hi = vec![0.5; l];
            for (lit, v) in lits.iter().zip(values) {
                let c = if v { ell + 0.5 } else { ell };
                lo[lit.var] = c - e;
                hi[lit.var] = c + e;
            }
            boxes.push(WeightedBox {
                region: Hyperrectangle::new(lo, hi)?,
                weight: gamma,
            });
        }
    }
    Ok(ReductionOutput {
        samples: SampleSet::uniform(points)?,
        density: BoxDensity::new(l, boxes)?,
        gamma,
        epsilon_gadget: e,
    })
}

/// Checks box count, pairwise disjointness of the closed boxes and unit mass.
pub fn check_reduction(red: &ReductionOutput, tol: f64) -> Result<()> {
    let n = red.samples.len();
    if red.num_boxes() != 7 * n {
        return Err(Error::InvalidInput(format!(
            "expected {} gadget boxes, found {}",
            7 * n,
            red.num_boxes()
        )));
    }
    let boxes = red.density.boxes();
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            let (a, b) = (&boxes[i].region, &boxes[j].region);
            let touch = (0..a.dim()).all(|d| a.lo()[d] <= b.hi()[d] && b.lo()[d] <= a.hi()[d]);
            if touch {
                return Err(Error::OverlappingBoxes {
                    first: i,
                    second: j,
                });
            }
        }
    }
    let mass: f64 = boxes.iter().map(|b| red.gamma * b.region.volume()).sum();
    if (mass - 1.0).abs() > tol {
        return Err(Error::NotNormalized {
            what: "gadget mass",
            sum: mass,
        });
    }
    Ok(())
}

/// Whether `[0, 0.5]`, `[x + 0.5 - eps, x + 0.5 + eps]` and `[y - eps, y + eps]`
/// are pairwise disjoint for all integers `1 <= x, y <= max_clause`.
pub fn gadget_intervals_disjoint(max_clause: usize) -> bool {
    let e = GADGET_EPSILON;
    let mut intervals = vec![(0.0, 0.5)];
    for x in 1..=max_clause {
        let x = x as f64;
        intervals.push((x + 0.5 - e, x + 0.5 + e));
        intervals.push((x - e, x + e));
    }
    for i in 0..intervals.len() {
        for j in i + 1..intervals.len() {
            let (a, b) = (intervals[i], intervals[j]);
            if a.0 <= b.1 && b.0 <= a.1 {
                return false;
            }
        }
    }
    true
}

/// `-0.5` for true, `0` for false.
pub fn assignment_to_theta(assignment: &[bool]) -> Vec<f64> {
    assignment
        .iter()
        .map(|&v| if v { -0.5 } else { 0.0 })
        .collect()
}

/// Whether every translated sample `y_l - theta` lies in the support.
pub fn likelihood_positive(red: &ReductionOutput, theta: &[f64]) -> Result<bool> {
    crate::geometry::check_dim(red.density.dim(), theta.len())?;
    let mut x = vec![0.0; theta.len()];
    for y in red.samples.points() {
        for ((xi, yi), ti) in x.iter_mut().zip(y).zip(theta) {
            *xi = yi - ti;
        }
        if !red.density.boxes().iter().any(|b| b.region.contains(&x)) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn check_enum(cnf: &CnfFormula) -> Result<()> {
    if cnf.num_vars() > MAX_ENUM_VARS {
        return Err(Error::TooLarge(format!(
            "{} variables exceed the enumeration limit of {MAX_ENUM_VARS}",
            cnf.num_vars()
        )));
    }
    Ok(())
}

fn assignment_from_mask(mask: u64, l: usize) -> Vec<bool> {
    (0..l).map(|j| mask >> j & 1 == 1).collect()
}

/// Searches the `2^l` canonical translates for a positive likelihood.
pub fn decide_positive_likelihood(cnf: &CnfFormula) -> Result<bool> {
    check_enum(cnf)?;
    let red = reduce_3sat(cnf)?;
    let l = cnf.num_vars();
    Ok((0..1u64 << l).into_par_iter().any(|mask| {
        let theta = assignment_to_theta(&assignment_from_mask(mask, l));
        likelihood_positive(&red, &theta).unwrap_or(false)
    }))
}

/// Truth-table satisfiability check.
pub fn brute_force_sat(cnf: &CnfFormula) -> Result<bool> {
    Ok(!satisfying_assignments(cnf)?.is_empty())
}

pub fn satisfying_assignments(cnf: &CnfFormula) -> Result<Vec<Vec<bool>>> {
    check_enum(cnf)?;
    let l = cnf.num_vars();
    Ok((0..1u64 << l)
        .map(|mask| assignment_from_mask(mask, l))
        .filter(|a| cnf.is_satisfied_by(a))
        .collect())
}

/// The eight clauses over variables 1..3 with every polarity pattern.
pub fn polarity_clauses() -> Vec<[i64; 3]> {
    (0..8)
        .map(|p| {
            let s = |bit: i64, v: i64| if p >> bit & 1 == 1 { -v } else { v };
            [s(2, 1), s(1, 2), s(0, 3)]
        })
        .collect()
}

/// Random formula with `num_vars` variables and `num_clauses` clauses in
/// which every variable occurs. Requires `3 <= num_vars <= 3 * num_clauses`.
pub fn random_cnf<R: Rng + ?Sized>(rng: &mut R, num_vars: usize, num_clauses: usize) -> CnfFormula {
    assert!((3..=3 * num_clauses).contains(&num_vars));
    loop {
        let mut clauses = Vec::with_capacity(num_clauses);
        for _ in 0..num_clauses {
            let vars = rand::seq::index::sample(rng, num_vars, 3);
            let mut lits = [Literal {
                var: 0,
                positive: true,
            }; 3];
            for (slot, v) in lits.iter_mut().zip(vars.iter()) {
                *slot = Literal {
                    var: v,
                    positive: rng.gen(),
                };
            }
            clauses.push(lits);
        }
        if let Ok(f) = CnfFormula::new(num_vars, clauses) {
            return f;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn single() -> CnfFormula {
        CnfFormula::from_signed(3, &[[1, 2, 3]]).unwrap()
    }

    #[test]
    fn reduction_examples() {
        let red = reduce_3sat(&single()).unwrap();
        assert_eq!(red.samples.points(), &[vec![1.0, 1.0, 1.0]]);
        assert_eq!(red.num_boxes(), 7);
        assert_relative_eq!(red.gamma, 64000.0 / 7.0, max_relative = 1e-12);

        let f = CnfFormula::from_signed(4, &[[1, 2, 3], [-1, 2, 4]]).unwrap();
        let red = reduce_3sat(&f).unwrap();
        assert_eq!(
            red.samples.points(),
            &[vec![1.0, 1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0, 2.0]]
        );
        assert_eq!(red.num_boxes(), 14);
        check_reduction(&red, 1e-9).unwrap();
    }

    #[test]
    fn gadget_order_skips_falsifying_row() {
        let red = reduce_3sat(&single()).unwrap();
        let first = &red.density.boxes()[0].region;
        // FFT is the first satisfying row of (a1 or a2 or a3).
        let e = GADGET_EPSILON;
        assert_eq!(first.lo(), &[1.0 - e, 1.0 - e, 1.5 - e]);
        let last = &red.density.boxes()[6].region;
        assert_eq!(last.lo(), &[1.5 - e, 1.5 - e, 1.5 - e]);
    }

    #[test]
    fn theta_examples() {
        assert_eq!(assignment_to_theta(&[true; 3]), vec![-0.5; 3]);
        assert_eq!(assignment_to_theta(&[false; 3]), vec![0.0; 3]);
        assert_eq!(assignment_to_theta(&[true, false, true]), vec![-0.5, 0.0, -0.5]);
    }

    #[test]
    fn likelihood_examples() {
        let red = reduce_3sat(&single()).unwrap();
        assert!(likelihood_positive(&red, &[-0.5, -0.5, -0.5]).unwrap());
        assert!(!likelihood_positive(&red, &[10.0, 10.0, 10.0]).unwrap());
        assert!(!likelihood_positive(&red, &[0.0, 0.0, 0.0]).unwrap());
    }

    #[test]
    fn decision_examples() {
        assert!(decide_positive_likelihood(&single()).unwrap());
        let all8 = CnfFormula::from_signed(3, &polarity_clauses()).unwrap();
        assert!(!decide_positive_likelihood(&all8).unwrap());
        assert!(!brute_force_sat(&all8).unwrap());
        let two = CnfFormula::from_signed(3, &[[1, 2, 3], [-1, -2, -3]]).unwrap();
        assert!(decide_positive_likelihood(&two).unwrap());
        assert!(brute_force_sat(&two).unwrap());
    }

    #[test]
    fn malformed_formulas_rejected() {
        assert!(CnfFormula::from_signed(3, &[[1, 1, 2]]).is_err());
        assert!(CnfFormula::from_signed(4, &[[1, 2, 3]]).is_err());
        assert!(CnfFormula::from_signed(2, &[[1, 2, 3]]).is_err());
        assert!(parse_dimacs("p cnf 3 1\n1 2 0\n").is_err());
        assert!(parse_dimacs("1 2 3 0\n").is_err());
        assert!(parse_dimacs("p cnf 3 2\n1 2 3 0\n").is_err());
    }

    #[test]
    fn dimacs_round_trip() {
        let text = "c example\np cnf 4 2\n1 -2\n 3 0 -1 2 4 0\n";
        let f = parse_dimacs(text).unwrap();
        assert_eq!(f.clauses().len(), 2);
        assert_eq!(parse_dimacs(&f.to_dimacs()).unwrap(), f);
    }

    #[test]
    fn interval_family_disjoint() {
        assert!(gadget_intervals_disjoint(64));
    }

    #[test]
    fn enumeration_guard() {
        let clauses: Vec<[i64; 3]> = (0..7).map(|i| [3 * i + 1, 3 * i + 2, 3 * i + 3]).collect();
        let f = CnfFormula::from_signed(21, &clauses).unwrap();
        assert!(matches!(brute_force_sat(&f), Err(Error::TooLarge(_))));
        assert!(matches!(decide_positive_likelihood(&f), Err(Error::TooLarge(_))));
    }
}
