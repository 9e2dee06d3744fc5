//! The embedded benchmark suite and its judge.

use std::time::Instant;

use nil_core::formula::{parse_formula, parse_problem, Formula, Problem, Rel};
use nil_core::nil::{symmetric_box, NilOutcome, NilRun};
use nil_core::polynomial::RatPoly;
use nil_core::verify::{check_interpolant, InterpolantCheck};
use serde::Serialize;

use crate::config::{settings, Overrides};
use crate::report::execute;

/// How a case is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    /// Must return an interpolant whose normalized form equals this one.
    Exact(&'static str),
    /// Must return an interpolant that re-verifies; any form.
    Valid,
    /// Must return `NoPolynomialInterpolant` for every degree in the range.
    NoInterpolant { min_degree: u32, max_degree: u32 },
}

#[derive(Debug, Clone, Copy)]
pub struct Case {
    pub name: &'static str,
    pub source: &'static str,
    pub expect: Expect,
    /// Gating cases; the rest are stretch goals.
    pub required: bool,
}

macro_rules! case {
    ($name:literal, $file:literal, $expect:expr, $required:literal) => {
        Case {
            name: $name,
            source: include_str!(concat!("../benchmarks/", $file, ".nil")),
            expect: $expect,
            required: $required,
        }
    };
}

pub const CASES: &[Case] = &[
    case!("Dummy", "dummy", Expect::Exact("x < 0"), true),
    case!("Necklace", "necklace", Expect::Valid, true),
    case!("Face", "face", Expect::Valid, true),
    case!("Twisted", "twisted", Expect::Valid, false),
    case!("Ultimate", "ultimate", Expect::Valid, false),
    case!("IJCAR16-1", "ijcar16-1", Expect::Valid, true),
    case!("CAV13-1", "cav13-1", Expect::Valid, true),
    case!("CAV13-2", "cav13-2", Expect::Valid, false),
    case!("CAV13-3", "cav13-3", Expect::Valid, true),
    case!("Parallel parabola", "parallel-parabola", Expect::Valid, true),
    case!("Parallel halfplane", "parallel-halfplane", Expect::Exact("x < y"), true),
    case!("Sharper-1", "sharper-1", Expect::Valid, true),
    case!("Sharper-2", "sharper-2", Expect::Exact("y > 0"), true),
    case!("Coincident", "coincident", Expect::Exact("(x + y)^2 > 0"), true),
    case!("Adjacent", "adjacent", Expect::Exact("x^2 < y"), true),
    case!("IJCAR16-2", "ijcar16-2", Expect::Exact("x1 < x2"), true),
    case!("CAV13-4", "cav13-4", Expect::Valid, true),
    case!("TACAS16", "tacas16", Expect::Valid, true),
    case!(
        "Transcendental",
        "transcendental",
        Expect::NoInterpolant { min_degree: 1, max_degree: 4 },
        true
    ),
    case!("Unbalanced", "unbalanced", Expect::Exact("x^2 > 0"), true),
];

/// Case lookup ignoring ASCII case and treating spaces and dashes alike.
pub fn find(name: &str) -> Option<&'static Case> {
    let key = |s: &str| s.to_ascii_lowercase().replace([' ', '_'], "-");
    CASES.iter().find(|c| key(c.name) == key(name))
}

/// Whether `p > 0` is `expected` up to a positive factor. `expected` is a
/// single strict comparison over the problem's variable names.
pub fn same_form(problem: &Problem, p: &RatPoly, expected: &str) -> bool {
    let Ok(Formula::Atom(a)) = parse_formula(expected, &problem.vars) else { return false };
    let Some(q) = RatPoly::from_expr(&a.lhs, problem.vars.len()) else { return false };
    if (0..problem.vars.len()).any(|v| !problem.is_common(v) && q.uses_var(v)) {
        return false;
    }
    let at = |v: usize| problem.common.iter().position(|&c| c == v).expect("common variable");
    let q = q.remap(problem.common.len(), at);
    let q = match a.rel {
        Rel::Gt => q,
        Rel::Lt => q.neg(),
        _ => return false,
    };
    matches!((p.normalize(), q.normalize()), (Ok(x), Ok(y)) if x == y)
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseResult {
    pub name: String,
    pub required: bool,
    /// Outcome kinds, one per degree tried.
    pub outcomes: Vec<String>,
    pub degree: u32,
    pub interpolant: Option<String>,
    /// Fresh re-verification of the interpolant with twice the budget.
    pub verified: Option<bool>,
    pub passed: bool,
    pub detail: String,
    pub time_ms: u64,
    #[serde(skip)]
    pub runs: Vec<(Problem, NilRun)>,
}

/// Runs `case` on its default settings (with `seed` if given) and judges
/// the result.
pub fn run_case(case: &Case, seed: Option<u64>) -> CaseResult {
    let start = Instant::now();
    let problem = parse_problem(case.source).expect("embedded cases parse");
    let degrees = match case.expect {
        Expect::NoInterpolant { min_degree, max_degree } => min_degree..=max_degree,
        _ => problem.degree..=problem.degree,
    };
    let mut result = CaseResult {
        name: case.name.to_string(),
        required: case.required,
        outcomes: Vec::new(),
        degree: problem.degree,
        interpolant: None,
        verified: None,
        passed: true,
        detail: String::new(),
        time_ms: 0,
        runs: Vec::new(),
    };
    for degree in degrees {
        let flags = Overrides { degree: Some(degree), seed, ..Overrides::default() };
        let s = settings(&problem, &flags).expect("embedded cases have valid options");
        let p = Problem { degree, ..problem.clone() };
        let run = match execute(&p, &s) {
            Ok(run) => run,
            Err(e) => {
                result.passed = false;
                result.detail = format!("degree {degree}: {e}");
                break;
            }
        };
        result.degree = degree;
        result.outcomes.push(run.outcome.kind().to_string());
        judge(case, &p, &s.cfg.solver, &run, &mut result);
        result.runs.push((p, run));
    }
    result.time_ms = start.elapsed().as_millis() as u64;
    result
}

fn judge(case: &Case, p: &Problem, solver: &nil_core::verify::SolverConfig, run: &NilRun, r: &mut CaseResult) {
    // Every interpolant is re-verified, whatever the case expects.
    if let NilOutcome::Interpolant { candidate, formula, box_radius, .. } = &run.outcome {
        r.interpolant = Some(candidate.display(p));
        let doubled = nil_core::verify::SolverConfig { max_boxes: solver.max_boxes * 2, ..solver.clone() };
        let fresh = check_interpolant(p, formula, &symmetric_box(p, *box_radius), &doubled, 1);
        let valid = fresh == InterpolantCheck::Valid;
        r.verified = Some(r.verified.unwrap_or(true) && valid);
        if !valid {
            r.passed = false;
            r.detail = format!("re-verification gave {fresh:?}");
            return;
        }
    }
    match (&run.outcome, case.expect) {
        (NilOutcome::Interpolant { candidate, .. }, Expect::Exact(_) | Expect::Valid) => {
            if candidate.poly.degree() > p.degree {
                r.passed = false;
                r.detail = format!("degree {} exceeds {}", candidate.poly.degree(), p.degree);
            } else if let Expect::Exact(want) = case.expect {
                if !same_form(p, &candidate.poly, want) {
                    r.passed = false;
                    r.detail = format!("expected {want}");
                }
            }
        }
        (NilOutcome::NoPolynomialInterpolant { .. }, Expect::NoInterpolant { .. }) => {}
        (other, _) => {
            r.passed = false;
            r.detail = match other {
                NilOutcome::BudgetExhausted { reason, .. } => format!("degree {}: {reason}", p.degree),
                o => format!("degree {}: unexpected {}", p.degree, o.kind()),
            };
        }
    }
}
