//! Sound decision services over boxes: unsatisfiability proofs, model
//! finding, exact witness certification and interpolant checking.
//!
//! Every conjunct of the formula's disjunctive normal form is simplified
//! symbolically (see `presolve`) and then searched by interval
//! branch-and-prune. `Proved` means every box was discarded by outward
//! rounded interval evaluation or by an exact symbolic rule; any reported
//! model is re-checked on the original formula with exact rational
//! arithmetic.

mod bnp;
mod presolve;
mod taylor;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::formula::{Atom, EvalError, Formula, Interval, Problem, Rel};
use crate::Rational;

use bnp::{search, SearchLimits};
use presolve::{Conjunct, PresolveOptions};

/// Larger disjunctive normal forms are searched as formula trees instead.
const DNF_CAP: usize = 64;

/// Per-conjunct box budget of the first pass in `prove_unsat`.
const FIRST_PASS_BOXES: usize = 4_000;

/// Random points tried per conjunct and requested model before falling back
/// to branch-and-prune descent.
const SAMPLES_PER_MODEL: usize = 400;

/// Box budget of the descent fallback in `find_model`.
const DESCENT_BOXES: usize = 40_000;

/// Sample coordinates are rounded to multiples of this.
const SAMPLE_GRID: f64 = 1.0 / 65_536.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub min_width: f64,
    pub max_boxes: usize,
    pub eq_relax: f64,
    pub seed: u64,
    pub deterministic: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { min_width: 1e-4, max_boxes: 2_000_000, eq_relax: 1e-9, seed: 0, deterministic: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    Proved,
    /// A model; `certificate` holds the certified truth value of each atom
    /// (in `Formula::atoms` order), `None` where undecidable at the point.
    Refuted { witness: Vec<Rational>, certificate: Vec<Option<bool>> },
    Unknown(String),
}

impl Verdict {
    pub fn is_proved(&self) -> bool {
        matches!(self, Verdict::Proved)
    }
}

/// Truth of an atom at an exact point: rational evaluation when possible,
/// otherwise a point-interval enclosure that must decide the sign. `None`
/// when undecidable. Equalities only hold under exact evaluation.
pub fn certify_atom(a: &Atom, point: &[Rational]) -> Option<bool> {
    match a.lhs.eval_rational(point) {
        Ok(v) => Some(a.rel.holds(&v)),
        Err(EvalError::TranscendentalPresent) => {
            let bx: Vec<Interval> = point.iter().map(Interval::from_rational).collect();
            let (iv, clipped) = match a.lhs.eval_interval_checked(&bx) {
                Ok(r) => r,
                Err(_) => return Some(false),
            };
            if clipped {
                return None;
            }
            let decided = |t: bool, f: bool| if t { Some(true) } else if f { Some(false) } else { None };
            match a.rel {
                Rel::Lt => decided(iv.hi < 0.0, iv.lo >= 0.0),
                Rel::Le => decided(iv.hi <= 0.0, iv.lo > 0.0),
                Rel::Gt => decided(iv.lo > 0.0, iv.hi <= 0.0),
                Rel::Ge => decided(iv.lo >= 0.0, iv.hi < 0.0),
                Rel::Eq => decided(false, iv.lo > 0.0 || iv.hi < 0.0),
            }
        }
        Err(EvalError::Domain(_)) => Some(false),
    }
}

fn certify_tri(f: &Formula, point: &[Rational]) -> Option<bool> {
    match f {
        Formula::Atom(a) => certify_atom(a, point),
        Formula::And(a, b) => match (certify_tri(a, point), certify_tri(b, point)) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        },
        Formula::Or(a, b) => match (certify_tri(a, point), certify_tri(b, point)) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        },
        Formula::Not(a) => certify_tri(a, point).map(|t| !t),
    }
}

/// True only when `point` provably satisfies `f`.
pub fn certify_point(f: &Formula, point: &[Rational]) -> bool {
    certify_tri(f, point) == Some(true)
}

fn certificate(f: &Formula, point: &[Rational]) -> Vec<Option<bool>> {
    f.atoms().into_iter().map(|a| certify_atom(a, point)).collect()
}

/// Disjunctive normal form of an NNF formula as lists of atoms, or `None`
/// past `cap` conjuncts.
pub fn dnf(f: &Formula, cap: usize) -> Option<Vec<Vec<Atom>>> {
    match f {
        Formula::Atom(a) => Some(vec![vec![a.clone()]]),
        Formula::Or(a, b) => {
            let mut l = dnf(a, cap)?;
            l.extend(dnf(b, cap)?);
            (l.len() <= cap).then_some(l)
        }
        Formula::And(a, b) => {
            let (l, r) = (dnf(a, cap)?, dnf(b, cap)?);
            if l.len() * r.len() > cap {
                return None;
            }
            let mut out = Vec::with_capacity(l.len() * r.len());
            for x in &l {
                for y in &r {
                    out.push(x.iter().chain(y).cloned().collect());
                }
            }
            Some(out)
        }
        Formula::Not(a) => dnf(&a.to_nnf(true), cap),
    }
}

fn conjunction(atoms: &[Atom]) -> Option<Formula> {
    atoms
        .iter()
        .cloned()
        .map(Formula::Atom)
        .reduce(Formula::and)
}

/// A point inside the box: 0 where allowed, else the midpoint.
fn base_point(bx: &[Interval]) -> Vec<Rational> {
    bx.iter()
        .map(|iv| {
            let v = if iv.contains(0.0) { 0.0 } else { iv.mid() };
            Rational::from_float(v).expect("finite")
        })
        .collect()
}

fn check_box(f: &Formula, bx: &[Interval]) {
    let need = f.free_vars().into_iter().next_back().map_or(0, |v| v + 1);
    assert!(bx.len() >= need, "box has {} dimensions, formula needs {need}", bx.len());
    assert!(bx.iter().all(|iv| iv.lo.is_finite() && iv.hi.is_finite()), "boxes must be bounded");
}

/// A simplified conjunct ready for search, or `None` if presolve refuted it.
struct Prepared {
    conj: Conjunct,
    residual: Option<Formula>,
    active: Vec<usize>,
}

fn prepare(atoms: &[Atom], bx: &[Interval], opts: &PresolveOptions) -> Option<Prepared> {
    let mut conj = Conjunct::new(atoms, bx.len());
    if !conj.presolve(bx, opts) {
        return None;
    }
    let residual = conjunction(&conj.atoms_as_formula_atoms());
    let active: Vec<usize> = conj.free_vars().into_iter().collect();
    Some(Prepared { conj, residual, active })
}

/// Proves that `f` has no model in `bx`, or finds a certified one.
pub fn prove_unsat(f: &Formula, bx: &[Interval], cfg: &SolverConfig) -> Verdict {
    check_box(f, bx);
    let nnf = f.to_nnf(false);
    let base = base_point(bx);
    let mut budget = cfg.max_boxes;
    let mut unknown: Option<String> = None;

    let run = |residual: &Formula,
                   active: &[usize],
                   budget: &mut usize,
                   rebuild: &dyn Fn(&mut Vec<Rational>) -> bool|
     -> Result<Option<Vec<Rational>>, String> {
        let mut found = None;
        let limits = SearchLimits { min_width: cfg.min_width, max_boxes: *budget, want: 1 };
        let report = search(residual, bx, active, &base, &limits, &mut |p| {
            let mut full = p.to_vec();
            if rebuild(&mut full) && certify_point(f, &full) {
                found = Some(full);
                return true;
            }
            false
        });
        *budget = budget.saturating_sub(report.boxes);
        if found.is_some() {
            return Ok(found);
        }
        if !report.exhausted_queue {
            return Err(format!("box budget exhausted after {} boxes", report.boxes));
        }
        if report.tiny > 0 {
            return Err(format!("{} boxes below the width floor stayed undecided", report.tiny));
        }
        Ok(None)
    };

    match dnf(&nnf, DNF_CAP) {
        Some(conjuncts) => {
            let opts = PresolveOptions { protected: BTreeSet::new(), project: true };
            // Conjuncts still needing a search after the first pass.
            let mut open: Vec<Prepared> = Vec::new();
            for atoms in &conjuncts {
                let Some(prep) = prepare(atoms, bx, &opts) else { continue };
                if prep.residual.is_none() {
                    // Nothing left to satisfy: any rebuilt point is a model.
                    let mut p = base.clone();
                    if prep.conj.rebuild(&mut p, None) && certify_point(f, &p) {
                        return refuted(f, p);
                    }
                    unknown.get_or_insert_with(|| "could not rebuild a model of a trivial conjunct".into());
                    continue;
                }
                open.push(prep);
            }
            // A cheap pass over every conjunct first, so that an easy model in
            // a later disjunct is not starved by a hard earlier one.
            let mut hard = Vec::new();
            for prep in open {
                let residual = prep.residual.as_ref().expect("filtered above");
                let mut slice = budget.min(FIRST_PASS_BOXES);
                let spent_before = slice;
                let r = run(residual, &prep.active, &mut slice, &|p| prep.conj.rebuild(p, None));
                budget -= spent_before - slice;
                match r {
                    Ok(Some(w)) => return refuted(f, w),
                    Ok(None) => {}
                    Err(_) if slice == 0 && budget > 0 => hard.push(prep),
                    Err(reason) => {
                        unknown.get_or_insert(reason);
                    }
                }
            }
            for prep in hard {
                let residual = prep.residual.as_ref().expect("filtered above");
                match run(residual, &prep.active, &mut budget, &|p| prep.conj.rebuild(p, None)) {
                    Ok(Some(w)) => return refuted(f, w),
                    Ok(None) => {}
                    Err(reason) => {
                        unknown.get_or_insert(reason);
                    }
                }
            }
        }
        None => {
            let active: Vec<usize> = nnf.free_vars().into_iter().collect();
            match run(&nnf, &active, &mut budget, &|_| true) {
                Ok(Some(w)) => return refuted(f, w),
                Ok(None) => {}
                Err(reason) => unknown = Some(reason),
            }
        }
    }
    match unknown {
        None => Verdict::Proved,
        Some(reason) => Verdict::Unknown(reason),
    }
}

fn refuted(f: &Formula, witness: Vec<Rational>) -> Verdict {
    let certificate = certificate(f, &witness);
    Verdict::Refuted { witness, certificate }
}

fn quantized(rng: &mut ChaCha8Rng, iv: Interval) -> f64 {
    let x: f64 = rng.gen_range(iv.lo..=iv.hi);
    ((x / SAMPLE_GRID).round() * SAMPLE_GRID).clamp(iv.lo, iv.hi)
}

/// Up to `count` pairwise distinct certified models of `f` in `bx`.
///
/// Random points are drawn per conjunct in the space left after symbolic
/// elimination (so equality-constrained sets are sampled on their
/// solution manifold), then branch-and-prune descent fills any shortfall.
pub fn find_model(f: &Formula, bx: &[Interval], count: usize, cfg: &SolverConfig) -> Vec<Vec<Rational>> {
    find_model_with(f, bx, count, cfg, &BTreeSet::new())
}

/// As [`find_model`], keeping the `protected` variables free when a choice
/// of variable to eliminate exists.
pub fn find_model_with(
    f: &Formula,
    bx: &[Interval],
    count: usize,
    cfg: &SolverConfig,
    protected: &BTreeSet<usize>,
) -> Vec<Vec<Rational>> {
    check_box(f, bx);
    if count == 0 {
        return Vec::new();
    }
    let nnf = f.to_nnf(false);
    let base = base_point(bx);
    let opts = PresolveOptions { protected: protected.clone(), project: true };
    let mut found: Vec<Vec<Rational>> = Vec::new();
    let push = |p: Vec<Rational>, found: &mut Vec<Vec<Rational>>| {
        if !found.contains(&p) && certify_point(f, &p) {
            found.push(p);
        }
    };

    let prepared: Vec<Prepared> = match dnf(&nnf, DNF_CAP) {
        Some(conjuncts) => conjuncts.iter().filter_map(|a| prepare(a, bx, &opts)).collect(),
        None => Vec::new(),
    };
    let tree_active: Vec<usize> = nnf.free_vars().into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Random sampling, round-robin over conjuncts so every disjunct gets a
    // share.
    let rounds = SAMPLES_PER_MODEL * count;
    let batch = 16;
    let mut tried = 0;
    while found.len() < count && tried < rounds {
        tried += batch;
        if prepared.is_empty() {
            for _ in 0..batch {
                let mut p = base.clone();
                for &d in &tree_active {
                    p[d] = Rational::from_float(quantized(&mut rng, bx[d])).expect("finite");
                }
                push(p, &mut found);
            }
            continue;
        }
        for prep in &prepared {
            for _ in 0..batch {
                if found.len() >= count {
                    break;
                }
                let mut fp: Vec<f64> = base.iter().map(|q| num_traits::ToPrimitive::to_f64(q).unwrap_or(0.0)).collect();
                for &d in &prep.active {
                    fp[d] = quantized(&mut rng, bx[d]);
                }
                if let Some(r) = &prep.residual {
                    if r.holds_float(&fp) != Some(true) {
                        continue;
                    }
                }
                let mut p: Vec<Rational> = base.clone();
                for &d in &prep.active {
                    p[d] = Rational::from_float(fp[d]).expect("finite");
                }
                if prep.conj.rebuild(&mut p, Some(&mut rng)) {
                    push(p, &mut found);
                }
            }
        }
    }

    // Descent fallback for thin or small regions.
    if found.len() < count {
        let limits = |want| SearchLimits { min_width: cfg.min_width, max_boxes: cfg.max_boxes.min(DESCENT_BOXES), want };
        if prepared.is_empty() {
            let want = count - found.len();
            search(&nnf, bx, &tree_active, &base, &limits(want), &mut |p| {
                let before = found.len();
                push(p.to_vec(), &mut found);
                found.len() > before
            });
        } else {
            for prep in &prepared {
                if found.len() >= count {
                    break;
                }
                let want = count - found.len();
                match &prep.residual {
                    None => {
                        for _ in 0..want {
                            let mut p = base.clone();
                            if prep.conj.rebuild(&mut p, Some(&mut rng)) {
                                push(p, &mut found);
                            }
                        }
                    }
                    Some(residual) => {
                        search(residual, bx, &prep.active, &base, &limits(want), &mut |p| {
                            let mut full = p.to_vec();
                            if !prep.conj.rebuild(&mut full, None) {
                                return false;
                            }
                            let before = found.len();
                            push(full, &mut found);
                            found.len() > before
                        });
                    }
                }
            }
        }
    }
    found.truncate(count);
    found
}

/// Result of checking a candidate interpolant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InterpolantCheck {
    Valid,
    /// Certified counterexamples projected onto the common variables:
    /// `pos` satisfy φ but violate the candidate, `neg` satisfy the candidate
    /// and ψ. At least one list is non-empty.
    Counterexamples { pos: Vec<Vec<Rational>>, neg: Vec<Vec<Rational>> },
    Unknown(String),
}

/// The outcome for one side of an interpolant check.
#[derive(Debug, Clone, PartialEq)]
pub enum SideCheck {
    Proved,
    /// Full-dimensional certified models.
    Models(Vec<Vec<Rational>>),
    Unknown(String),
}

/// Proves `f` unsatisfiable in `bx` or collects up to `count` models.
pub fn check_side(f: &Formula, bx: &[Interval], count: usize, cfg: &SolverConfig, protected: &BTreeSet<usize>) -> SideCheck {
    match prove_unsat(f, bx, cfg) {
        Verdict::Proved => SideCheck::Proved,
        Verdict::Refuted { witness, .. } => {
            let mut models = vec![witness];
            for m in find_model_with(f, bx, count, cfg, protected) {
                if models.len() >= count.max(1) {
                    break;
                }
                if !models.contains(&m) {
                    models.push(m);
                }
            }
            SideCheck::Models(models)
        }
        Verdict::Unknown(reason) => {
            let models = find_model_with(f, bx, count, cfg, protected);
            if models.is_empty() {
                SideCheck::Unknown(reason)
            } else {
                SideCheck::Models(models)
            }
        }
    }
}

/// Projects full points onto the common variables.
pub fn project(problem: &Problem, points: &[Vec<Rational>]) -> Vec<Vec<Rational>> {
    points
        .iter()
        .map(|p| problem.common.iter().map(|&v| p[v].clone()).collect())
        .collect()
}

/// Checks `φ ⊨ I` and `I ∧ ψ ⊨ ⊥` on `bx` (a box over all problem
/// variables). `interpolant` ranges over the problem's variable indices.
pub fn check_interpolant(
    problem: &Problem,
    interpolant: &Formula,
    bx: &[Interval],
    cfg: &SolverConfig,
    cex_count: usize,
) -> InterpolantCheck {
    let pos = Formula::and(problem.phi.clone(), interpolant.to_nnf(true));
    let neg = Formula::and(interpolant.clone(), problem.psi.clone());
    check_pair(problem, &pos, &neg, bx, cfg, cex_count)
}

/// Shared driver: `pos` and `neg` must both be unsatisfiable.
pub fn check_pair(
    problem: &Problem,
    pos: &Formula,
    neg: &Formula,
    bx: &[Interval],
    cfg: &SolverConfig,
    cex_count: usize,
) -> InterpolantCheck {
    let protected: BTreeSet<usize> = problem.common.iter().copied().collect();
    let p = check_side(pos, bx, cex_count, cfg, &protected);
    let n = check_side(neg, bx, cex_count, cfg, &protected);
    match (p, n) {
        (SideCheck::Proved, SideCheck::Proved) => InterpolantCheck::Valid,
        (SideCheck::Unknown(r), SideCheck::Proved) | (SideCheck::Proved, SideCheck::Unknown(r)) => {
            InterpolantCheck::Unknown(r)
        }
        (SideCheck::Unknown(a), SideCheck::Unknown(b)) => InterpolantCheck::Unknown(format!("{a}; {b}")),
        (p, n) => {
            let take = |s: SideCheck| match s {
                SideCheck::Models(m) => project(problem, &m),
                _ => Vec::new(),
            };
            InterpolantCheck::Counterexamples { pos: take(p), neg: take(n) }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse_formula, parse_problem};
    use num_traits::{ToPrimitive, Zero};

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn b10(n: usize) -> Vec<Interval> {
        vec![Interval::new(-10.0, 10.0); n]
    }

    #[test]
    fn dummy_premise_is_unsat() {
        let f = parse_formula("x + 1 < 0 && x - 1 >= 0", &names(&["x"])).unwrap();
        assert_eq!(prove_unsat(&f, &b10(1), &SolverConfig::default()), Verdict::Proved);
    }

    #[test]
    fn necklace_premise_is_unsat() {
        let f = parse_formula("y - x^2 - 1 = 0 && y + x^2 + 1 = 0", &names(&["x", "y"])).unwrap();
        assert_eq!(prove_unsat(&f, &b10(2), &SolverConfig::default()), Verdict::Proved);
    }

    #[test]
    fn open_interval_is_refuted() {
        let f = parse_formula("x > 0 && x < 2", &names(&["x"])).unwrap();
        match prove_unsat(&f, &b10(1), &SolverConfig::default()) {
            Verdict::Refuted { witness, certificate } => {
                assert!(certify_point(&f, &witness));
                assert_eq!(certificate, vec![Some(true), Some(true)]);
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn boundary_only_model_found() {
        let f = parse_formula("x >= 0 && x <= 0", &names(&["x"])).unwrap();
        match prove_unsat(&f, &b10(1), &SolverConfig::default()) {
            Verdict::Refuted { witness, .. } => assert!(witness[0].is_zero()),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn certify_examples() {
        let v = names(&["x", "y"]);
        let f = parse_formula("15*x^2 < 4 + 20*y", &v).unwrap();
        assert!(certify_point(&f, &[q(0, 1), q(0, 1)]));
        let g = parse_formula("y + cos(x) - 4/5 <= 0", &v).unwrap();
        assert!(certify_point(&g, &[q(0, 1), q(-1, 1)]));
        let h = parse_formula("x = 0", &v).unwrap();
        let tiny = Rational::new(1.into(), num_bigint::BigInt::from(10).pow(30));
        assert!(!certify_point(&h, &[tiny, q(0, 1)]));
    }

    #[test]
    fn models_examples() {
        let v = names(&["x", "y"]);
        let cfg = SolverConfig::default();
        let f = parse_formula("y >= x^2", &v).unwrap();
        let m = find_model(&f, &b10(2), 1, &cfg);
        assert_eq!(m.len(), 1);
        assert!(certify_point(&f, &m[0]));

        let g = parse_formula("x + 1 < 0 && x - 1 >= 0", &v).unwrap();
        assert!(find_model(&g, &b10(2), 3, &cfg).is_empty());

        let h = parse_formula("x = 0", &v).unwrap();
        let m = find_model(&h, &b10(2), 1, &cfg);
        assert!(m[0][0].is_zero());
    }

    #[test]
    fn models_on_a_line_are_distinct() {
        let v = names(&["x", "y"]);
        let f = parse_formula("x + y = 0", &v).unwrap();
        let m = find_model(&f, &b10(2), 5, &SolverConfig::default());
        assert_eq!(m.len(), 5);
        for p in &m {
            assert_eq!(&p[0] + &p[1], q(0, 1));
        }
    }

    #[test]
    fn dummy_interpolant_checks() {
        let p = parse_problem("vars x; phi: x < -1; psi: x >= 1;").unwrap();
        let cfg = SolverConfig::default();
        let good = parse_formula("x < 0", &p.vars).unwrap();
        assert_eq!(check_interpolant(&p, &good, &b10(1), &cfg, 4), InterpolantCheck::Valid);
        let bad = parse_formula("x < -2", &p.vars).unwrap();
        match check_interpolant(&p, &bad, &b10(1), &cfg, 4) {
            InterpolantCheck::Counterexamples { pos, neg } => {
                assert!(neg.is_empty());
                assert!(!pos.is_empty());
                for c in pos {
                    let x = c[0].to_f64().unwrap();
                    assert!((-2.0..-1.0).contains(&x), "{x}");
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic_verdicts() {
        let f = parse_formula("x^2 + y^2 < 1 && x*y > 0.3", &names(&["x", "y"])).unwrap();
        let cfg = SolverConfig { seed: 9, ..SolverConfig::default() };
        assert_eq!(prove_unsat(&f, &b10(2), &cfg), prove_unsat(&f, &b10(2), &cfg));
        assert_eq!(find_model(&f, &b10(2), 4, &cfg), find_model(&f, &b10(2), 4, &cfg));
    }
}
