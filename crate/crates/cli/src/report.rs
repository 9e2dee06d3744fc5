//! Running a problem and the JSON report of the run.

use std::time::Instant;

use nil_core::formula::Problem;
use nil_core::nil::{canonical_string, nil_core, nil_delta, nil_star, IterationLog, NilError, NilOutcome, NilRun, RungVerdict};
use nil_core::Rational;
use serde::{Deserialize, Serialize};

use crate::config::{Mode, RunSettings};

pub const EXIT_INTERPOLANT: i32 = 0;
pub const EXIT_NOT_DISJOINT: i32 = 1;
pub const EXIT_NO_INTERPOLANT: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// `problem` at the settings' degree, run with the settings' driver.
pub fn execute(problem: &Problem, s: &RunSettings) -> Result<NilRun, NilError> {
    let problem = Problem { degree: s.degree, ..problem.clone() };
    match s.mode {
        Mode::Core => nil_core(&problem, &s.cfg),
        Mode::Delta => nil_delta(&problem, s.delta, &s.cfg),
        Mode::Star => nil_star(&problem, s.delta, &s.cfg),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungEntry {
    pub tol: f64,
    pub candidate: String,
    /// `valid`, `counterexamples` or `unknown`.
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub round: usize,
    pub iteration: usize,
    pub delta: f64,
    pub box_radius: f64,
    pub samples_pos: usize,
    pub samples_neg: usize,
    pub beta: f64,
    pub support_vectors: usize,
    pub support_indices: Vec<usize>,
    pub margin: f64,
    pub rungs: Vec<RungEntry>,
    pub cex_candidate: Option<String>,
    /// Exact rational, e.g. `3/200`.
    pub cex_threshold: String,
    pub cex_pos: Vec<Vec<String>>,
    pub cex_neg: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: String,
    /// `Interpolant`, `NotDisjoint`, `NoPolynomialInterpolant` or
    /// `BudgetExhausted`.
    pub outcome: String,
    pub interpolant: Option<String>,
    /// Half-width of the box the interpolant is certified on.
    pub certification_box: Option<f64>,
    pub degree: u32,
    pub mode: Mode,
    pub delta: f64,
    pub iterations: usize,
    pub wall_time_ms: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub history: Vec<HistoryEntry>,
}

fn points(ps: &[Vec<Rational>]) -> Vec<Vec<String>> {
    ps.iter().map(|p| p.iter().map(Rational::to_string).collect()).collect()
}

fn history_entry(problem: &Problem, log: &IterationLog) -> HistoryEntry {
    HistoryEntry {
        round: log.round,
        iteration: log.iteration,
        delta: log.delta,
        box_radius: log.box_radius,
        samples_pos: log.samples_pos,
        samples_neg: log.samples_neg,
        beta: log.beta,
        support_vectors: log.support_vectors,
        support_indices: log.support_indices.clone(),
        margin: log.margin,
        rungs: log
            .rungs
            .iter()
            .map(|r| {
                let (verdict, detail) = match &r.verdict {
                    RungVerdict::Valid => ("valid", None),
                    RungVerdict::Counterexamples { pos, neg } => {
                        ("counterexamples", Some(format!("{pos} positive, {neg} negative")))
                    }
                    RungVerdict::Unknown(why) => ("unknown", Some(why.clone())),
                };
                RungEntry {
                    tol: r.tol,
                    candidate: canonical_string(&r.candidate, problem),
                    verdict: verdict.to_string(),
                    detail,
                }
            })
            .collect(),
        cex_candidate: log.cex_candidate.as_ref().map(|p| canonical_string(p, problem)),
        cex_threshold: log.cex_threshold.to_string(),
        cex_pos: points(&log.cex_pos),
        cex_neg: points(&log.cex_neg),
    }
}

impl RunReport {
    pub fn new(name: &str, problem: &Problem, s: &RunSettings, run: &NilRun, wall_time_ms: u64) -> RunReport {
        let (interpolant, certification_box, witness, reason) = match &run.outcome {
            NilOutcome::Interpolant { candidate, box_radius, .. } => {
                (Some(candidate.display(problem)), Some(*box_radius), None, None)
            }
            NilOutcome::NotDisjoint { witness } => (None, None, Some(witness.iter().map(Rational::to_string).collect()), None),
            NilOutcome::NoPolynomialInterpolant { degree } => {
                (None, None, None, Some(format!("the SVM cannot separate the samples at degree {degree}")))
            }
            NilOutcome::BudgetExhausted { reason, .. } => (None, None, None, Some(reason.clone())),
        };
        RunReport {
            problem: name.to_string(),
            outcome: run.outcome.kind().to_string(),
            interpolant,
            certification_box,
            degree: s.degree,
            mode: s.mode,
            delta: s.delta,
            iterations: run.history.len(),
            wall_time_ms,
            seed: s.cfg.seed,
            witness,
            reason,
            history: run.history.iter().map(|l| history_entry(problem, l)).collect(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.outcome.as_str() {
            "Interpolant" => EXIT_INTERPOLANT,
            "NotDisjoint" => EXIT_NOT_DISJOINT,
            "NoPolynomialInterpolant" => EXIT_NO_INTERPOLANT,
            _ => EXIT_BUDGET,
        }
    }

    /// One human-readable line.
    pub fn summary(&self) -> String {
        let what = match (&self.interpolant, &self.reason) {
            (Some(i), _) => format!("{i}  (certified on ±{})", self.certification_box.unwrap_or(0.0)),
            (None, Some(r)) => r.clone(),
            (None, None) => match &self.witness {
                Some(w) => format!("common model ({})", w.join(", ")),
                None => String::new(),
            },
        };
        format!(
            "{}: {} at degree {} after {} iteration(s), {} ms: {}",
            self.problem, self.outcome, self.degree, self.iterations, self.wall_time_ms, what
        )
    }
}

/// Machine-readable error object for runs that never started.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub error: String,
    pub message: String,
}

/// Runs `problem` and reports it, timing the run.
pub fn run_and_report(name: &str, problem: &Problem, s: &RunSettings) -> Result<(NilRun, RunReport), NilError> {
    let start = Instant::now();
    let run = execute(problem, s)?;
    let ms = start.elapsed().as_millis() as u64;
    let problem = Problem { degree: s.degree, ..problem.clone() };
    let report = RunReport::new(name, &problem, s, &run, ms);
    Ok((run, report))
}

/// Tries degrees `lo..=hi` in order until one gives an interpolant or a
/// common model; the last run is returned.
pub fn sweep(
    name: &str,
    problem: &Problem,
    s: &RunSettings,
    (lo, hi): (u32, u32),
) -> Result<(NilRun, RunReport), NilError> {
    let mut last = None;
    for degree in lo..=hi {
        let s = RunSettings { degree, ..s.clone() };
        let (run, report) = run_and_report(name, problem, &s)?;
        let done = matches!(run.outcome, NilOutcome::Interpolant { .. } | NilOutcome::NotDisjoint { .. });
        last = Some((run, report));
        if done {
            break;
        }
    }
    Ok(last.expect("non-empty degree range"))
}
