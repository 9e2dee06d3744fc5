//! Run settings from defaults, `option` lines in the problem file and
//! command-line flags, in increasing precedence.

use clap::ValueEnum;
use nil_core::formula::Problem;
use nil_core::nil::NilConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which driver runs the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Exact counterexamples, one box.
    Core,
    /// Counterexamples must clear a margin δ, one box.
    Delta,
    /// Halve δ and double the box each round.
    Star,
}

/// δ used by `delta` and `star` when nothing else sets one.
pub const DEFAULT_DELTA: f64 = 0.01;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub degree: Option<u32>,
    pub delta: Option<f64>,
    pub box_radius: Option<f64>,
    pub mode: Option<Mode>,
    pub max_iters: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub mode: Mode,
    pub delta: f64,
    pub degree: u32,
    pub cfg: NilConfig,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("unknown option `{0}`")]
    Unknown(String),
    #[error("option `{key}`: cannot parse `{value}`")]
    Value { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .trim()
        .parse()
        .map_err(|_| ConfigError::Value { key: key.to_string(), value: value.to_string() })
}

pub fn settings(problem: &Problem, flags: &Overrides) -> Result<RunSettings, ConfigError> {
    let mut cfg = NilConfig::default();
    let mut mode = Mode::Star;
    let mut delta = None;
    for (key, value) in &problem.options {
        match key.as_str() {
            "box" => cfg.box_radius = parse(key, value)?,
            "delta" => delta = Some(parse(key, value)?),
            "mode" => {
                mode = Mode::from_str(value.trim(), true)
                    .map_err(|_| ConfigError::Value { key: key.clone(), value: value.clone() })?
            }
            "max_iters" => cfg.max_iterations = parse(key, value)?,
            "seed" => cfg.seed = parse(key, value)?,
            "cex_per_round" => cfg.cex_per_round = parse(key, value)?,
            "init_samples" => cfg.init_samples_per_side = parse(key, value)?,
            "star_cutoff" => cfg.star_cutoff = parse(key, value)?,
            "beta" if value.trim() == "auto" => cfg.beta = None,
            "beta" => cfg.beta = Some(parse(key, value)?),
            "theta" => cfg.theta = parse(key, value)?,
            "svm_c" => cfg.svm.c = parse(key, value)?,
            "kkt_tol" => cfg.svm.kkt_tol = parse(key, value)?,
            "min_width" => cfg.solver.min_width = parse(key, value)?,
            "max_boxes" => cfg.solver.max_boxes = parse(key, value)?,
            _ => return Err(ConfigError::Unknown(key.clone())),
        }
    }
    let degree = flags.degree.unwrap_or(problem.degree);
    if degree == 0 {
        return Err(ConfigError::Invalid("degree must be at least 1".into()));
    }
    mode = flags.mode.unwrap_or(mode);
    if let Some(r) = flags.box_radius {
        cfg.box_radius = r;
    }
    if let Some(n) = flags.max_iters {
        cfg.max_iterations = n;
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    let delta = match mode {
        Mode::Core => 0.0,
        Mode::Delta | Mode::Star => flags.delta.or(delta).unwrap_or(DEFAULT_DELTA),
    };
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(ConfigError::Invalid("delta must be finite and non-negative".into()));
    }
    if mode == Mode::Star && delta == 0.0 {
        return Err(ConfigError::Invalid("star mode needs delta > 0".into()));
    }
    if !(cfg.box_radius.is_finite() && cfg.box_radius > 0.0) {
        return Err(ConfigError::Invalid("box must be positive".into()));
    }
    if cfg.max_iterations == 0 {
        return Err(ConfigError::Invalid("max-iters must be at least 1".into()));
    }
    Ok(RunSettings { mode, delta, degree, cfg })
}

/// `LO..HI` (inclusive) for degree sweeps.
pub fn parse_range(s: &str) -> Result<(u32, u32), ConfigError> {
    let bad = || ConfigError::Invalid(format!("expected LO..HI, got `{s}`"));
    let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
    let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u32 = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
    if lo == 0 || hi < lo {
        return Err(bad());
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nil_core::formula::parse_problem;

    fn problem(extra: &str) -> Problem {
        parse_problem(&format!("vars x; phi: x < -1; psi: x >= 1; degree: 1; {extra}")).unwrap()
    }

    #[test]
    fn precedence_is_default_then_file_then_flag() {
        let p = problem("option box = 20; option delta = 0.5;");
        let s = settings(&p, &Overrides::default()).unwrap();
        assert_eq!((s.mode, s.delta, s.cfg.box_radius, s.cfg.seed), (Mode::Star, 0.5, 20.0, 42));
        let flags = Overrides { box_radius: Some(3.0), delta: Some(0.1), seed: Some(7), ..Overrides::default() };
        let s = settings(&p, &flags).unwrap();
        assert_eq!((s.delta, s.cfg.box_radius, s.cfg.seed), (0.1, 3.0, 7));
    }

    #[test]
    fn bad_settings_are_rejected() {
        let p = problem("");
        let zero = Overrides { degree: Some(0), ..Overrides::default() };
        assert!(matches!(settings(&p, &zero), Err(ConfigError::Invalid(_))));
        let star0 = Overrides { delta: Some(0.0), ..Overrides::default() };
        assert!(settings(&p, &star0).is_err());
        assert_eq!(settings(&problem("option colour = 3;"), &Overrides::default()), Err(ConfigError::Unknown("colour".into())));
        assert!(matches!(settings(&problem("option box = wide;"), &Overrides::default()), Err(ConfigError::Value { .. })));
    }

    #[test]
    fn core_mode_ignores_delta() {
        let flags = Overrides { mode: Some(Mode::Core), delta: Some(0.3), ..Overrides::default() };
        assert_eq!(settings(&problem(""), &flags).unwrap().delta, 0.0);
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("1..4"), Ok((1, 4)));
        assert_eq!(parse_range("2..=3"), Ok((2, 3)));
        assert!(parse_range("0..2").is_err());
        assert!(parse_range("3..1").is_err());
        assert!(parse_range("3").is_err());
    }
}
