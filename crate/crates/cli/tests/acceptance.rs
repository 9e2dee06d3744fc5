//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Runs the embedded benchmark suite on the default seed and on 100
//! random seeds, then audits the runs and the rounding and verifier oracles.

use std::process::ExitCode;
use std::time::Instant;

use nil_cli::bench::{run_case, CaseResult, Expect, CASES};
use nil_cli::config::{settings, Overrides};
use nil_core::formula::{parse_formula, parse_problem, Formula, Interval, Problem};
use nil_core::nil::{nil_star, NilConfig, NilOutcome, NilRun};
use nil_core::rounding::recover_rational;
use nil_core::svm::{train, KernelParams, TrainingSet};
use nil_core::verify::{certify_point, prove_unsat, SolverConfig, Verdict};
use nil_core::Rational;
use num_traits::{Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RANDOM_RUNS: usize = 100;

struct Verdicts(Vec<(usize, bool, String)>);

impl Verdicts {
    fn record(&mut self, n: usize, ok: bool, detail: String) {
        println!("criterion {n}: {} — {detail}", if ok { "PASS" } else { "FAIL" });
        self.0.push((n, ok, detail));
    }
}

fn required() -> impl Iterator<Item = &'static nil_cli::bench::Case> {
    CASES.iter().filter(|c| c.required)
}

fn failures(results: &[&CaseResult]) -> Vec<String> {
    results.iter().filter(|r| !r.passed).map(|r| format!("{}: {}", r.name, r.detail)).collect()
}

fn over_budget(results: &[&CaseResult], secs: u64) -> Vec<String> {
    results
        .iter()
        .filter(|r| r.time_ms > secs * 1000)
        .map(|r| format!("{} took {:.1} s", r.name, r.time_ms as f64 / 1000.0))
        .collect()
}

fn summary(problems: Vec<String>, ok_text: String) -> (bool, String) {
    if problems.is_empty() {
        (true, ok_text)
    } else {
        (false, problems.join("; "))
    }
}

// --- audits over suite runs -------------------------------------------------

#[derive(Default)]
struct SvmAudit {
    trainings: usize,
    problems: Vec<String>,
}

fn to_f64(ps: &[Vec<Rational>]) -> Vec<Vec<f64>> {
    ps.iter().map(|p| p.iter().map(|q| q.to_f64().expect("finite")).collect()).collect()
}

/// Retrains every logged training set (sample prefixes of the final sets)
/// and checks perfect classification, the equality constraint and
/// byte-identical repeats.
fn audit_svm(name: &str, problem: &Problem, cfg: &NilConfig, run: &NilRun, out: &mut SvmAudit) {
    for log in &run.history {
        let ts = TrainingSet::balanced(
            to_f64(&run.positives[..log.samples_pos]),
            to_f64(&run.negatives[..log.samples_neg]),
        );
        let k = KernelParams { beta: log.beta, theta: cfg.theta, m: problem.degree };
        let sol = match train(&ts, &k, &cfg.svm) {
            Ok(s) => s,
            Err(e) => {
                out.problems.push(format!("{name} it {}: logged training set fails to retrain: {e}", log.iteration));
                continue;
            }
        };
        out.trainings += 1;
        let wrong = (0..ts.len()).filter(|&i| !(ts.label(i) * sol.decision(&ts, &k, ts.point(i)) > 0.0)).count();
        if wrong > 0 {
            out.problems.push(format!("{name} it {}: {wrong} training points misclassified", log.iteration));
        }
        let sum_a: f64 = sol.alphas.iter().sum();
        let sum_ay: f64 = sol.alphas.iter().enumerate().map(|(i, a)| a * ts.label(i)).sum();
        if sum_ay.abs() > 1e-6 * sum_a {
            out.problems.push(format!("{name} it {}: |Σαy| = {sum_ay:e} vs Σα = {sum_a:e}", log.iteration));
        }
        if sol.support_indices != log.support_indices {
            out.problems.push(format!("{name} it {}: support vectors differ from the log", log.iteration));
        }
        let again = train(&ts, &k, &cfg.svm).expect("trained once already");
        if serde_json::to_vec(&sol).unwrap() != serde_json::to_vec(&again).unwrap() {
            out.problems.push(format!("{name} it {}: repeated training differs", log.iteration));
        }
    }
}

/// Each counterexample must be on the wrong side of the candidate it was
/// drawn against, by at least the logged threshold; checked by exact
/// evaluation.
fn audit_counterexamples(name: &str, run: &NilRun, checked: &mut usize, problems: &mut Vec<String>) {
    for log in &run.history {
        if log.cex_pos.is_empty() && log.cex_neg.is_empty() {
            continue;
        }
        let Some(cand) = &log.cex_candidate else {
            problems.push(format!("{name} it {}: counterexamples without a candidate", log.iteration));
            continue;
        };
        let t = &log.cex_threshold;
        for x in &log.cex_pos {
            *checked += 1;
            if !(cand.eval(x) <= -t.clone()) {
                problems.push(format!("{name} it {}: positive counterexample is classified correctly", log.iteration));
            }
        }
        for x in &log.cex_neg {
            *checked += 1;
            if !(cand.eval(x) >= *t) {
                problems.push(format!("{name} it {}: negative counterexample is classified correctly", log.iteration));
            }
        }
    }
}

struct SuiteAudit {
    svm: SvmAudit,
    cex_checked: usize,
    cex_problems: Vec<String>,
    interpolants: usize,
    unsound: Vec<String>,
}

fn audit_suite(results: &[CaseResult], seed: Option<u64>, a: &mut SuiteAudit) {
    for r in results {
        let case = CASES.iter().find(|c| c.name == r.name).expect("suite case");
        let base = parse_problem(case.source).expect("embedded cases parse");
        for (p, run) in &r.runs {
            let flags = Overrides { degree: Some(p.degree), seed, ..Overrides::default() };
            let s = settings(&base, &flags).expect("embedded options are valid");
            let tag = format!("{} (seed {}, m={})", r.name, s.cfg.seed, p.degree);
            audit_svm(&tag, p, &s.cfg, run, &mut a.svm);
            audit_counterexamples(&tag, run, &mut a.cex_checked, &mut a.cex_problems);
            if matches!(run.outcome, NilOutcome::Interpolant { .. }) {
                a.interpolants += 1;
            }
        }
        if r.verified == Some(false) {
            a.unsound.push(format!("{} (seed {:?}): {}", r.name, seed, r.detail));
        }
    }
}

// --- rounding oracle ----------------------------------------------------------

/// Whether some p/d lies within `tol` of `f`, decided exactly.
fn fits_denominator(f: f64, tol: f64, d: i64) -> bool {
    let x = Rational::from_float(f).unwrap();
    let t = Rational::from_float(tol).unwrap();
    let d = Rational::from_integer(d.into());
    ((&x - &t) * &d).ceil() <= ((&x + &t) * &d).floor()
}

fn rounding_oracle() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut problems = Vec::new();
    for _ in 0..1000 {
        let q: i64 = rng.gen_range(1..=50);
        let p: i64 = rng.gen_range(-500..=500);
        let exact = Rational::new(p.into(), q.into());
        let noise = if rng.gen_bool(0.5) { 1e-9 } else { -1e-9 };
        let f = p as f64 / q as f64 + noise;
        let got = recover_rational(f, 1e-6);
        if got != exact {
            problems.push(format!("{p}/{q}: recovered {got}"));
            continue;
        }
        let q_reduced = exact.denom().to_i64().unwrap();
        if let Some(d) = (1..q_reduced).find(|&d| fits_denominator(f, 1e-6, d)) {
            problems.push(format!("{p}/{q}: denominator {d} also fits"));
        }
    }
    summary(problems, "1000/1000 recovered exactly, none beaten by a smaller denominator".into())
}

// --- verifier oracle ------------------------------------------------------------

const NAMES: [&str; 3] = ["x", "y", "z"];

fn random_poly(rng: &mut ChaCha8Rng, n: usize) -> String {
    let terms = rng.gen_range(1..=4);
    let mut out = Vec::new();
    for _ in 0..terms {
        let c = [-4, -3, -2, -1, 1, 2, 3, 4][rng.gen_range(0..8)];
        let mut mono = vec![format!("{c}")];
        for _ in 0..rng.gen_range(0..=3) {
            mono.push(NAMES[rng.gen_range(0..n)].to_string());
        }
        out.push(mono.join("*"));
    }
    format!("({})", out.join(" + "))
}

fn random_rel(rng: &mut ChaCha8Rng) -> &'static str {
    ["<", "<=", ">", ">=", "="][rng.gen_range(0..5)]
}

fn random_formula(rng: &mut ChaCha8Rng) -> (String, usize) {
    let n = rng.gen_range(1..=3);
    let text = match rng.gen_range(0..3) {
        0 => format!("{} {} 0 && {} {} 0", random_poly(rng, n), random_rel(rng), random_poly(rng, n), random_rel(rng)),
        1 => {
            let p = random_poly(rng, n);
            format!("{p} > {} && {p} < {}", rng.gen_range(-3..=3), rng.gen_range(-3..=3))
        }
        _ => format!(
            "{} {} 0 || ({} {} 0 && {} {} 0)",
            random_poly(rng, n),
            random_rel(rng),
            random_poly(rng, n),
            random_rel(rng),
            random_poly(rng, n),
            random_rel(rng)
        ),
    };
    (text, n)
}

fn sampled_model(f: &Formula, n: usize, rng: &mut ChaCha8Rng) -> Option<Vec<Rational>> {
    for _ in 0..100_000 {
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..=5.0)).collect();
        if f.holds_float(&p) == Some(true) {
            let q: Vec<Rational> = p.iter().map(|v| Rational::from_float(*v).unwrap()).collect();
            if certify_point(f, &q) {
                return Some(q);
            }
        }
    }
    None
}

fn verifier_oracle() -> (bool, String) {
    let mut gen = ChaCha8Rng::seed_from_u64(1001);
    let mut oracle = ChaCha8Rng::seed_from_u64(1002);
    let cfg = SolverConfig { max_boxes: 50_000, ..SolverConfig::default() };
    let five = Rational::from_integer(5.into());
    let (mut proved, mut refuted, mut unknown) = (0, 0, 0);
    let mut problems = Vec::new();
    for _ in 0..200 {
        let (text, n) = random_formula(&mut gen);
        let vars: Vec<String> = NAMES[..n].iter().map(|s| s.to_string()).collect();
        let f = parse_formula(&text, &vars).expect("generated formulas parse");
        match prove_unsat(&f, &vec![Interval::new(-5.0, 5.0); n], &cfg) {
            Verdict::Proved => {
                proved += 1;
                if let Some(m) = sampled_model(&f, n, &mut oracle) {
                    let m: Vec<String> = m.iter().map(Rational::to_string).collect();
                    problems.push(format!("`{text}` proved empty but sampling found ({})", m.join(", ")));
                }
            }
            Verdict::Refuted { witness, .. } => {
                refuted += 1;
                if !certify_point(&f, &witness) || witness.iter().any(|q| q.abs() > five) {
                    problems.push(format!("`{text}`: witness does not re-certify in the box"));
                }
            }
            Verdict::Unknown(_) => unknown += 1,
        }
    }
    summary(problems, format!("{proved} proved (none contradicted), {refuted} refuted (all re-certify), {unknown} unknown"))
}

// --- main -------------------------------------------------------------------------

fn main() -> ExitCode {
    let start = Instant::now();
    let mut v = Verdicts(Vec::new());

    let base: Vec<CaseResult> = required().map(|c| run_case(c, None)).collect();
    let pick = |f: &dyn Fn(&Expect) -> bool| -> Vec<&CaseResult> {
        base.iter().filter(|r| f(&CASES.iter().find(|c| c.name == r.name).unwrap().expect)).collect()
    };

    let exact = pick(&|e| matches!(e, Expect::Exact(_)));
    let mut problems = failures(&exact);
    problems.extend(over_budget(&exact, 60));
    let (ok, d) = summary(problems, format!("{} cases in their expected form", exact.len()));
    v.record(1, ok, d);

    let valid = pick(&|e| *e == Expect::Valid);
    let mut problems = failures(&valid);
    problems.extend(over_budget(&valid, 300));
    let (ok, d) = summary(problems, format!("{} cases re-verify Valid within their degree", valid.len()));
    v.record(2, ok, d);

    let neg = pick(&|e| matches!(e, Expect::NoInterpolant { .. }));
    let mut problems = failures(&neg);
    problems.extend(over_budget(&neg, 120));
    for r in &neg {
        if r.outcomes.len() != 4 {
            problems.push(format!("{}: only {} degrees ran", r.name, r.outcomes.len()));
        }
    }
    let (ok, d) = summary(problems, "Transcendental: NoPolynomialInterpolant for m = 1..4".into());
    v.record(3, ok, d);

    let same = parse_problem("vars x; phi: x > 0; psi: x > 0; degree: 1;").unwrap();
    let (ok, d) = match nil_star(&same, 0.01, &NilConfig::default()) {
        Ok(NilRun { outcome: NilOutcome::NotDisjoint { witness }, .. }) => {
            let both = Formula::and(same.phi.clone(), same.psi.clone());
            let w: Vec<String> = witness.iter().map(Rational::to_string).collect();
            (certify_point(&both, &witness), format!("NotDisjoint, witness x = {} certifies φ ∧ ψ", w.join(", ")))
        }
        Ok(run) => (false, format!("got {}", run.outcome.kind())),
        Err(e) => (false, e.to_string()),
    };
    v.record(4, ok, d);

    let mut audit = SuiteAudit {
        svm: SvmAudit::default(),
        cex_checked: 0,
        cex_problems: Vec::new(),
        interpolants: 0,
        unsound: Vec::new(),
    };
    audit_suite(&base, None, &mut audit);
    let mut seeds = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut other_failures = 0;
    for _ in 0..RANDOM_RUNS {
        let seed: u64 = seeds.gen();
        let results: Vec<CaseResult> = required().map(|c| run_case(c, Some(seed))).collect();
        other_failures += results.iter().filter(|r| !r.passed && r.verified != Some(false)).count();
        audit_suite(&results, Some(seed), &mut audit);
    }
    let (ok, d) = summary(
        audit.unsound.clone(),
        format!(
            "{} interpolants over {} suite runs, all re-verify ({} non-gating misses: other form or no interpolant)",
            audit.interpolants,
            RANDOM_RUNS + 1,
            other_failures
        ),
    );
    v.record(5, ok, d);

    let (ok, d) = summary(
        audit.svm.problems.clone(),
        format!("{} logged training sets retrained: separated, Σαy ≈ 0, byte-identical repeats", audit.svm.trainings),
    );
    v.record(6, ok, d);

    let (ok, d) = rounding_oracle();
    v.record(7, ok, d);

    let (ok, d) = verifier_oracle();
    v.record(8, ok, d);

    let (ok, d) = summary(
        audit.cex_problems.clone(),
        format!("{} counterexamples, each misclassified by its candidate", audit.cex_checked),
    );
    v.record(9, ok, d);

    let failed: Vec<usize> = v.0.iter().filter(|(_, ok, _)| !ok).map(|(n, _, _)| *n).collect();
    println!("acceptance: {}/{} criteria pass in {:.0} s", v.0.len() - failed.len(), v.0.len(), start.elapsed().as_secs_f64());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
