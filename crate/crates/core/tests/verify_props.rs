//! Verifier soundness against an independent sampling oracle, plus the
//! touching-boundary interpolant cases that need exact symbolic handling.

use nil_core::formula::{parse_formula, parse_problem, Formula, Interval};
use nil_core::verify::{certify_point, check_interpolant, prove_unsat, InterpolantCheck, SolverConfig, Verdict};
use nil_core::Rational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NAMES: [&str; 3] = ["x", "y", "z"];

fn names(n: usize) -> Vec<String> {
    NAMES[..n].iter().map(|s| s.to_string()).collect()
}

fn random_poly(rng: &mut ChaCha8Rng, n: usize) -> String {
    let terms = rng.gen_range(1..=4);
    let mut out = Vec::new();
    for _ in 0..terms {
        let c: i32 = loop {
            let c = rng.gen_range(-5..=5);
            if c != 0 {
                break c;
            }
        };
        let deg = rng.gen_range(0..=3);
        let mut mono = vec![format!("{c}")];
        for _ in 0..deg {
            mono.push(NAMES[rng.gen_range(0..n)].to_string());
        }
        out.push(mono.join("*"));
    }
    format!("({})", out.join(" + "))
}

fn rel(rng: &mut ChaCha8Rng) -> &'static str {
    ["<", "<=", ">", ">=", "<", ">", "="][rng.gen_range(0..7)]
}

/// Small formulas of mixed shape; roughly half are unsatisfiable on ±5.
fn random_formula(rng: &mut ChaCha8Rng) -> (String, usize) {
    let n = rng.gen_range(1..=3);
    let text = match rng.gen_range(0..4) {
        0 => format!("{} {} 0 && {} {} 0", random_poly(rng, n), rel(rng), random_poly(rng, n), rel(rng)),
        1 => {
            // p above a and below b; empty when b <= a.
            let p = random_poly(rng, n);
            let (a, b) = (rng.gen_range(-3..=3), rng.gen_range(-3..=3));
            format!("{p} > {a} && {p} {} {b}", if rng.gen_bool(0.5) { "<" } else { "<=" })
        }
        2 => {
            let p = random_poly(rng, n);
            let v = NAMES[rng.gen_range(0..n)];
            let k = rng.gen_range(-2..=2);
            format!("{p}^2 + {v}^2 {} {k}", if rng.gen_bool(0.5) { "<" } else { "<=" })
        }
        _ => format!(
            "({} {} 0 && {} {} 0) || {} {} 0",
            random_poly(rng, n),
            rel(rng),
            random_poly(rng, n),
            rel(rng),
            random_poly(rng, n),
            rel(rng)
        ),
    };
    (text, n)
}

fn to_rat(v: &[f64]) -> Vec<Rational> {
    v.iter().map(|x| Rational::from_float(*x).unwrap()).collect()
}

/// Exact witness search by uniform sampling; floats only pre-filter.
fn sampled_model(f: &Formula, n: usize, samples: usize, rng: &mut ChaCha8Rng) -> Option<Vec<Rational>> {
    for _ in 0..samples {
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..=5.0)).collect();
        if f.holds_float(&p) == Some(true) {
            let q = to_rat(&p);
            if certify_point(f, &q) {
                return Some(q);
            }
        }
    }
    None
}

fn in_box(w: &[Rational], bx: &[Interval]) -> bool {
    w.iter().zip(bx).all(|(q, iv)| {
        let lo = Rational::from_float(iv.lo).unwrap();
        let hi = Rational::from_float(iv.hi).unwrap();
        lo <= *q && *q <= hi
    })
}

#[test]
fn random_corpus_agrees_with_sampling_oracle() {
    let mut gen = ChaCha8Rng::seed_from_u64(8);
    let mut oracle = ChaCha8Rng::seed_from_u64(80);
    let cfg = SolverConfig { max_boxes: 50_000, ..SolverConfig::default() };
    let (mut proved, mut refuted, mut unknown) = (0, 0, 0);
    for _ in 0..200 {
        let (text, n) = random_formula(&mut gen);
        let f = parse_formula(&text, &names(n)).unwrap();
        let bx = vec![Interval::new(-5.0, 5.0); n];
        match prove_unsat(&f, &bx, &cfg) {
            Verdict::Proved => {
                proved += 1;
                assert_eq!(sampled_model(&f, n, 100_000, &mut oracle), None, "{text} proved but has a model");
            }
            Verdict::Refuted { witness, .. } => {
                refuted += 1;
                assert!(certify_point(&f, &witness), "{text}: witness does not certify");
                assert!(in_box(&witness, &bx), "{text}: witness outside the box");
            }
            Verdict::Unknown(_) => unknown += 1,
        }
    }
    println!("{proved} proved, {refuted} refuted, {unknown} unknown");
    assert!(proved >= 40 && refuted >= 40 && unknown <= 10);
}

#[test]
fn proofs_survive_on_sub_boxes_and_repeat() {
    let mut gen = ChaCha8Rng::seed_from_u64(9);
    let cfg = SolverConfig { max_boxes: 100_000, ..SolverConfig::default() };
    for _ in 0..30 {
        let (text, n) = random_formula(&mut gen);
        let f = parse_formula(&text, &names(n)).unwrap();
        let bx = vec![Interval::new(-5.0, 5.0); n];
        let v = prove_unsat(&f, &bx, &cfg);
        assert_eq!(v, prove_unsat(&f, &bx, &cfg), "{text}: verdict not deterministic");
        if v.is_proved() {
            let sub = vec![Interval::new(-1.0, 2.0); n];
            assert!(
                !matches!(prove_unsat(&f, &sub, &cfg), Verdict::Refuted { .. }),
                "{text}: refuted on a sub-box of a proved box"
            );
        }
    }
}

fn check(problem: &str, candidate: &str) -> InterpolantCheck {
    let p = parse_problem(problem).unwrap();
    let i = parse_formula(candidate, &p.vars).unwrap();
    let bx = vec![Interval::new(-10.0, 10.0); p.vars.len()];
    check_interpolant(&p, &i, &bx, &SolverConfig::default(), 4)
}

#[test]
fn transcendental_touching_interpolant_is_valid() {
    let problem = "vars x, y; phi: y - x^2 >= 0; psi: y + cos(x) - 0.8 <= 0; degree: 2;";
    assert_eq!(check(problem, "15*x^2 < 4 + 20*y"), InterpolantCheck::Valid);
    match check(problem, "y > 0") {
        InterpolantCheck::Counterexamples { pos, .. } => assert!(!pos.is_empty()),
        other => panic!("{other:?}"),
    }
}

#[test]
fn touching_boundaries_are_decided_exactly() {
    let adjacent = "vars x, y; phi: y - x^2 >= 0; psi: y - x^2 < 0; degree: 2;";
    assert_eq!(check(adjacent, "x^2 - y <= 0"), InterpolantCheck::Valid);
    let coincident = "vars x, y; phi: (x + y)^2 > 0; psi: (x + y)^2 <= 0; degree: 2;";
    assert_eq!(check(coincident, "(x + y)^2 > 0"), InterpolantCheck::Valid);
}
