//! The counterexample-guided synthesis loop: sample both sides, train a
//! polynomial-kernel SVM on the projections to the common variables, round
//! the classifier to rational candidates and verify them; counterexamples
//! to the finest candidate are fed back as new samples.
//!
//! Three drivers share the loop: [`nil_core`] (exact checks only),
//! [`nil_delta`] (counterexamples must clear a margin `δ·s`) and
//! [`nil_star`] (halving `δ` and doubling the box between rounds).

use std::collections::BTreeSet;

use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::formula::{Expr, Formula, Interval, Problem, Rel};
use crate::polynomial::{poly_to_formula, Orientation, RatPoly};
use crate::rounding::{round_ladder, PrecisionLadder};
use crate::svm::{train, KernelParams, SvmConfig, SvmError, TrainingSet};
use crate::verify::{
    certify_point, check_interpolant, check_pair, find_model_with, prove_unsat, InterpolantCheck, SolverConfig,
    Verdict,
};
use crate::Rational;

/// Uniform samples are snapped to multiples of this, which keeps their
/// rational forms small.
const SAMPLE_GRID: f64 = 1.0 / 1024.0;

/// Uniform draws per requested sample before falling back to model search.
const DRAWS_PER_SAMPLE: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct NilConfig {
    pub init_samples_per_side: usize,
    pub cex_per_round: usize,
    pub max_iterations: usize,
    pub delta: f64,
    /// Half-width of the initial box, applied to every variable.
    pub box_radius: f64,
    pub ladder: PrecisionLadder,
    /// Outer rounds of [`nil_star`].
    pub star_cutoff: usize,
    pub seed: u64,
    /// Kernel scale, 1 by default; `None` picks `1/R²` with `R` the largest
    /// sample norm (at least 1).
    pub beta: Option<f64>,
    pub theta: f64,
    pub svm: SvmConfig,
    pub solver: SolverConfig,
}

impl Default for NilConfig {
    fn default() -> Self {
        NilConfig {
            init_samples_per_side: 20,
            cex_per_round: 4,
            max_iterations: 50,
            delta: 0.0,
            box_radius: 10.0,
            ladder: PrecisionLadder::default(),
            star_cutoff: 6,
            seed: 42,
            beta: Some(1.0),
            theta: 1.0,
            svm: SvmConfig::default(),
            solver: SolverConfig { max_boxes: 200_000, ..SolverConfig::default() },
        }
    }
}

impl NilConfig {
    fn validate(&self) -> Result<(), NilError> {
        let bad = |what: &str| Err(NilError::Config(what.to_string()));
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if self.cex_per_round == 0 {
            return bad("cex_per_round must be at least 1");
        }
        if self.init_samples_per_side == 0 {
            return bad("init_samples_per_side must be at least 1");
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad("delta must be finite and non-negative");
        }
        if !(self.box_radius > 0.0 && self.box_radius.is_finite()) {
            return bad("box radius must be positive");
        }
        if self.star_cutoff == 0 {
            return bad("star_cutoff must be at least 1");
        }
        if self.beta.is_some_and(|b| !(b > 0.0)) {
            return bad("beta must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Phi,
    Psi,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Phi => "phi",
            Side::Psi => "psi",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NilError {
    #[error("no certified model of {0} found in the box")]
    EmptySide(Side),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("the problem has no common variables")]
    NoCommonVariables,
    #[error(transparent)]
    Svm(SvmError),
}

/// A rounded classifier over the common variables; the φ side is
/// `poly > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateInterpolant {
    pub poly: RatPoly,
    /// Ladder tolerance the candidate was recovered at.
    pub tol: f64,
    /// Iteration (within its round) that produced it.
    pub iteration: usize,
}

impl CandidateInterpolant {
    /// `poly > 0` over the problem's variable indices.
    pub fn formula(&self, problem: &Problem) -> Formula {
        poly_to_formula(&self.poly, Orientation::Positive, &|i| problem.common[i])
    }

    /// Canonical printing: primitive polynomial with positive leading
    /// coefficient, compared against zero.
    pub fn display(&self, problem: &Problem) -> String {
        canonical_string(&self.poly, problem)
    }
}

/// `p > 0` printed as `q > 0` or `q < 0` with `q` normalized.
pub fn canonical_string(p: &RatPoly, problem: &Problem) -> String {
    let names = problem.common_names();
    match p.normalize() {
        Ok((q, flipped)) => format!("{} {} 0", q.display(&names), if flipped { "<" } else { ">" }),
        Err(_) => "0 > 0".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RungVerdict {
    Valid,
    Counterexamples { pos: usize, neg: usize },
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RungLog {
    pub tol: f64,
    pub candidate: RatPoly,
    pub verdict: RungVerdict,
}

/// Everything one iteration did, enough to replay it.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    /// Outer round (always 1 outside [`nil_star`]).
    pub round: usize,
    pub iteration: usize,
    pub delta: f64,
    pub box_radius: f64,
    pub samples_pos: usize,
    pub samples_neg: usize,
    pub beta: f64,
    pub support_vectors: usize,
    /// Indices of the support vectors, positives first then negatives, in
    /// the order the samples were collected.
    pub support_indices: Vec<usize>,
    pub margin: f64,
    pub rungs: Vec<RungLog>,
    /// The candidate counterexamples were generated against, with the
    /// margin they clear: positives satisfy `p ≤ −threshold`, negatives
    /// `p ≥ threshold`.
    pub cex_candidate: Option<RatPoly>,
    pub cex_threshold: Rational,
    pub cex_pos: Vec<Vec<Rational>>,
    pub cex_neg: Vec<Vec<Rational>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NilOutcome {
    Interpolant {
        candidate: CandidateInterpolant,
        formula: Formula,
        /// Validity is certified on `[-box_radius, box_radius]^n`.
        box_radius: f64,
        iterations: usize,
    },
    /// A certified model of φ ∧ ψ over all variables.
    NotDisjoint { witness: Vec<Rational> },
    /// The SVM could not separate the samples with a degree-`degree`
    /// polynomial.
    NoPolynomialInterpolant { degree: u32 },
    BudgetExhausted { best: Option<CandidateInterpolant>, reason: String },
}

impl NilOutcome {
    pub fn kind(&self) -> &'static str {
        match self {
            NilOutcome::Interpolant { .. } => "Interpolant",
            NilOutcome::NotDisjoint { .. } => "NotDisjoint",
            NilOutcome::NoPolynomialInterpolant { .. } => "NoPolynomialInterpolant",
            NilOutcome::BudgetExhausted { .. } => "BudgetExhausted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NilRun {
    pub outcome: NilOutcome,
    pub history: Vec<IterationLog>,
    /// Final sample sets over the common variables.
    pub positives: Vec<Vec<Rational>>,
    pub negatives: Vec<Vec<Rational>>,
}

/// Projected sample sets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Samples {
    pub positives: Vec<Vec<Rational>>,
    pub negatives: Vec<Vec<Rational>>,
}

impl Samples {
    /// Appends the points not already present; returns how many were new.
    fn extend(&mut self, side: Side, points: &[Vec<Rational>]) -> usize {
        let set = match side {
            Side::Phi => &mut self.positives,
            Side::Psi => &mut self.negatives,
        };
        let mut added = 0;
        for p in points {
            if !set.contains(p) {
                set.push(p.clone());
                added += 1;
            }
        }
        added
    }
}

/// `[-r, r]` for every problem variable.
pub fn symmetric_box(problem: &Problem, r: f64) -> Vec<Interval> {
    vec![Interval::new(-r, r); problem.vars.len()]
}

fn project(problem: &Problem, p: &[Rational]) -> Vec<Rational> {
    problem.common.iter().map(|&v| p[v].clone()).collect()
}

fn snapped(rng: &mut ChaCha8Rng, iv: Interval) -> Rational {
    let x: f64 = rng.gen_range(iv.lo..=iv.hi);
    let x = ((x / SAMPLE_GRID).round() * SAMPLE_GRID).clamp(iv.lo, iv.hi);
    Rational::from_float(x).expect("finite")
}

/// Up to `k` certified models per side, projected to the common variables
/// and deduplicated. Uniform sampling in `bx` first; model search fills in
/// when fewer than `max(1, k/4)` points turned up.
pub fn sample_initial(
    problem: &Problem,
    bx: &[Interval],
    k: usize,
    cfg: &NilConfig,
) -> Result<Samples, NilError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let protected: BTreeSet<usize> = problem.common.iter().copied().collect();
    let mut samples = Samples::default();
    for (side, f) in [(Side::Phi, &problem.phi), (Side::Psi, &problem.psi)] {
        let vars = f.free_vars();
        let mut found: Vec<Vec<Rational>> = Vec::new();
        for _ in 0..DRAWS_PER_SAMPLE * k {
            if found.len() >= k {
                break;
            }
            let p: Vec<Rational> = (0..problem.vars.len())
                .map(|v| if vars.contains(&v) { snapped(&mut rng, bx[v]) } else { Rational::zero() })
                .collect();
            if certify_point(f, &p) {
                let q = project(problem, &p);
                if !found.contains(&q) {
                    found.push(q);
                }
            }
        }
        if found.len() < (k / 4).max(1) {
            let solver = SolverConfig { seed: rng.gen(), ..cfg.solver.clone() };
            for m in find_model_with(f, bx, k - found.len(), &solver, &protected) {
                let q = project(problem, &m);
                if !found.contains(&q) {
                    found.push(q);
                }
            }
        }
        if found.is_empty() {
            return Err(NilError::EmptySide(side));
        }
        samples.extend(side, &found);
    }
    Ok(samples)
}

fn to_f64(points: &[Vec<Rational>]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| p.iter().map(|q| q.to_f64().unwrap_or(f64::NAN)).collect())
        .collect()
}

fn auto_beta(ts: &TrainingSet) -> f64 {
    let r = ts
        .positives
        .iter()
        .chain(&ts.negatives)
        .map(|p| p.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(1.0, f64::max);
    1.0 / (r * r)
}

/// `p + c rel 0` over the problem's variables.
fn shifted(problem: &Problem, p: &RatPoly, c: &Rational, rel: Rel) -> Formula {
    let shifted = p.add(&RatPoly::constant(p.nvars(), c.clone()));
    Formula::atom(shifted.to_expr(&|i| problem.common[i]), rel)
}

enum Round {
    Done(NilOutcome),
    /// The loop ended without an interpolant; `best` is the last finest
    /// candidate.
    Exhausted { best: Option<CandidateInterpolant>, reason: String },
}

/// One run of the loop with tolerance `delta` on `[-radius, radius]^n`,
/// extending `samples` in place.
fn run_round(
    problem: &Problem,
    cfg: &NilConfig,
    delta: f64,
    radius: f64,
    round: usize,
    samples: &mut Samples,
    history: &mut Vec<IterationLog>,
) -> Result<Round, NilError> {
    let bx = symmetric_box(problem, radius);
    let solver = cfg.solver.clone();
    let both = Formula::and(problem.phi.clone(), problem.psi.clone());
    if let Verdict::Refuted { witness, .. } = prove_unsat(&both, &bx, &solver) {
        return Ok(Round::Done(NilOutcome::NotDisjoint { witness }));
    }
    if samples.positives.is_empty() || samples.negatives.is_empty() {
        let init = sample_initial(problem, &bx, cfg.init_samples_per_side, cfg)?;
        samples.extend(Side::Phi, &init.positives);
        samples.extend(Side::Psi, &init.negatives);
    }

    let m = problem.degree;
    let mut best: Option<CandidateInterpolant> = None;
    for iteration in 1..=cfg.max_iterations {
        let ts = TrainingSet::balanced(to_f64(&samples.positives), to_f64(&samples.negatives));
        let beta = cfg.beta.unwrap_or_else(|| auto_beta(&ts));
        let kernel = KernelParams { beta, theta: cfg.theta, m };
        let sol = match train(&ts, &kernel, &cfg.svm) {
            Ok(sol) => sol,
            Err(SvmError::Failed { .. }) => return Ok(Round::Done(NilOutcome::NoPolynomialInterpolant { degree: m })),
            Err(e) => return Err(NilError::Svm(e)),
        };
        let mut log = IterationLog {
            round,
            iteration,
            delta,
            box_radius: radius,
            samples_pos: samples.positives.len(),
            samples_neg: samples.negatives.len(),
            beta,
            support_vectors: sol.support_indices.len(),
            support_indices: sol.support_indices.clone(),
            margin: sol.functional_margin,
            rungs: Vec::new(),
            cex_candidate: None,
            cex_threshold: Rational::zero(),
            cex_pos: Vec::new(),
            cex_neg: Vec::new(),
        };
        let float_poly = sol.expand(&ts, &kernel);
        let rungs = match round_ladder(&float_poly, &cfg.ladder) {
            Ok(r) if !r.is_empty() => r,
            _ => {
                history.push(log);
                return Ok(Round::Exhausted { best, reason: "the classifier rounds to the zero polynomial".into() });
            }
        };

        // Coarse to fine; the last rung is the one counterexamples are drawn
        // against.
        let mut last_check = None;
        for (poly, tol) in &rungs {
            let cand = CandidateInterpolant { poly: poly.clone(), tol: *tol, iteration };
            let formula = cand.formula(problem);
            let check = check_interpolant(problem, &formula, &bx, &solver, cfg.cex_per_round);
            let verdict = match &check {
                InterpolantCheck::Valid => RungVerdict::Valid,
                InterpolantCheck::Counterexamples { pos, neg } => {
                    RungVerdict::Counterexamples { pos: pos.len(), neg: neg.len() }
                }
                InterpolantCheck::Unknown(r) => RungVerdict::Unknown(r.clone()),
            };
            log.rungs.push(RungLog { tol: *tol, candidate: poly.clone(), verdict });
            if check == InterpolantCheck::Valid {
                history.push(log);
                return Ok(Round::Done(NilOutcome::Interpolant {
                    candidate: cand,
                    formula,
                    box_radius: radius,
                    iterations: iteration,
                }));
            }
            last_check = Some((cand, check));
        }
        let (finest, exact) = last_check.expect("at least one rung");
        best = Some(finest.clone());

        // Counterexamples against the finest candidate, clearing δ·s.
        let threshold = if delta > 0.0 {
            Rational::from_float(delta).expect("finite") * finest.poly.max_abs_coeff()
        } else {
            Rational::zero()
        };
        let cex = if threshold.is_positive() {
            let pos = Formula::and(problem.phi.clone(), shifted(problem, &finest.poly, &threshold, Rel::Le));
            let neg = Formula::and(shifted(problem, &finest.poly, &-threshold.clone(), Rel::Ge), problem.psi.clone());
            check_pair(problem, &pos, &neg, &bx, &solver, cfg.cex_per_round)
        } else {
            exact
        };
        log.cex_candidate = Some(finest.poly.clone());
        log.cex_threshold = threshold;
        let reason = match cex {
            InterpolantCheck::Counterexamples { pos, neg } => {
                let added = samples.extend(Side::Phi, &pos) + samples.extend(Side::Psi, &neg);
                log.cex_pos = pos;
                log.cex_neg = neg;
                if added > 0 {
                    history.push(log);
                    continue;
                }
                "every counterexample was already a sample".to_string()
            }
            InterpolantCheck::Valid => format!("no counterexample clears the margin {delta}"),
            InterpolantCheck::Unknown(r) => format!("verification undecided: {r}"),
        };
        history.push(log);
        return Ok(Round::Exhausted { best, reason });
    }
    Ok(Round::Exhausted { best, reason: format!("no valid candidate after {} iterations", cfg.max_iterations) })
}

fn finish(outcome: NilOutcome, history: Vec<IterationLog>, samples: Samples) -> NilRun {
    NilRun { outcome, history, positives: samples.positives, negatives: samples.negatives }
}

fn precheck(problem: &Problem, cfg: &NilConfig) -> Result<(), NilError> {
    cfg.validate()?;
    if problem.common.is_empty() {
        return Err(NilError::NoCommonVariables);
    }
    Ok(())
}

/// The basic loop: candidates and counterexamples are checked exactly.
pub fn nil_core(problem: &Problem, cfg: &NilConfig) -> Result<NilRun, NilError> {
    nil_delta(problem, 0.0, cfg)
}

/// The loop with counterexamples required to clear `δ·s`, where `s` is the
/// largest absolute coefficient of the candidate. `delta = 0` is
/// [`nil_core`].
pub fn nil_delta(problem: &Problem, delta: f64, cfg: &NilConfig) -> Result<NilRun, NilError> {
    let cfg = NilConfig { delta, ..cfg.clone() };
    precheck(problem, &cfg)?;
    let mut samples = Samples::default();
    let mut history = Vec::new();
    let outcome = match run_round(problem, &cfg, delta, cfg.box_radius, 1, &mut samples, &mut history)? {
        Round::Done(o) => o,
        Round::Exhausted { best, reason } => NilOutcome::BudgetExhausted { best, reason },
    };
    Ok(finish(outcome, history, samples))
}

/// Rounds `i = 1..=star_cutoff` of [`nil_delta`] with `δ0 / 2^(i-1)` on a
/// box of radius `B0 · 2^(i-1)`; samples carry over between rounds.
pub fn nil_star(problem: &Problem, delta0: f64, cfg: &NilConfig) -> Result<NilRun, NilError> {
    let cfg = NilConfig { delta: delta0, ..cfg.clone() };
    precheck(problem, &cfg)?;
    if !(delta0 > 0.0) {
        return Err(NilError::Config("nil_star needs delta > 0".into()));
    }
    let mut samples = Samples::default();
    let mut history = Vec::new();
    let mut last = (None, String::new());
    for round in 1..=cfg.star_cutoff {
        let scale = 2f64.powi(round as i32 - 1);
        let (delta, radius) = (delta0 / scale, cfg.box_radius * scale);
        match run_round(problem, &cfg, delta, radius, round, &mut samples, &mut history)? {
            Round::Done(o) => return Ok(finish(o, history, samples)),
            Round::Exhausted { best, reason } => last = (best, format!("round {round}: {reason}")),
        }
    }
    let (best, reason) = last;
    Ok(finish(NilOutcome::BudgetExhausted { best, reason }, history, samples))
}

/// Whether `x` lies strictly on the side of `p` it was added for.
pub fn misclassified(p: &RatPoly, x: &[Rational], positive: bool, threshold: &Rational) -> bool {
    let v = p.eval(x);
    if positive {
        v <= -threshold.clone()
    } else {
        v >= *threshold
    }
}

/// `e = 0`-free helper used by tests and reports: the interpolant's
/// left-hand side over the problem variables.
pub fn candidate_expr(problem: &Problem, p: &RatPoly) -> Expr {
    p.to_expr(&|i| problem.common[i])
}
