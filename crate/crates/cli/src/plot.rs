//! SVG pictures of two-dimensional runs: the regions of φ, ψ and the
//! interpolant sampled on a grid, the samples, and the support vectors.

use std::fmt::Write as _;

use nil_core::formula::{Formula, Problem};
use nil_core::nil::{NilOutcome, NilRun};
use nil_core::Rational;
use num_traits::ToPrimitive;
use thiserror::Error;

pub const PHI: u8 = 1;
pub const PSI: u8 = 2;
pub const INTERPOLANT: u8 = 4;

/// Grid cells per side.
pub const GRID: usize = 200;
const CELL_PX: f64 = 3.0;
const MARGIN_PX: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlotError {
    #[error("plots need exactly 2 common variables, the problem has {0}")]
    Dimension(usize),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

/// Region membership of grid-cell centres over `[-radius, radius]²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub n: usize,
    pub radius: f64,
    /// Row-major from the top row, bits [`PHI`], [`PSI`], [`INTERPOLANT`].
    pub cells: Vec<u8>,
    /// Which layers could be evaluated; a formula over variables that are
    /// not common has no picture in the common plane.
    pub layers: u8,
}

impl Raster {
    /// Centre of column `i`, row `j` (row 0 at the top).
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        let step = 2.0 * self.radius / self.n as f64;
        (-self.radius + (i as f64 + 0.5) * step, self.radius - (j as f64 + 0.5) * step)
    }

    pub fn at(&self, i: usize, j: usize) -> u8 {
        self.cells[j * self.n + i]
    }
}

fn in_plane(problem: &Problem, f: &Formula) -> bool {
    f.free_vars().iter().all(|v| problem.is_common(*v))
}

/// `f` at the common-plane point `(a, b)`, other variables at 0.
fn holds(problem: &Problem, f: &Formula, (a, b): (f64, f64)) -> bool {
    let mut p = vec![0.0; problem.vars.len()];
    p[problem.common[0]] = a;
    p[problem.common[1]] = b;
    f.holds_float(&p) == Some(true)
}

pub fn raster(problem: &Problem, interpolant: Option<&Formula>, radius: f64, n: usize) -> Result<Raster, PlotError> {
    if problem.common.len() != 2 {
        return Err(PlotError::Dimension(problem.common.len()));
    }
    let mut layers = 0;
    let mut formulas: Vec<(u8, &Formula)> = Vec::new();
    for (bit, f) in [(PHI, Some(&problem.phi)), (PSI, Some(&problem.psi)), (INTERPOLANT, interpolant)] {
        if let Some(f) = f.filter(|f| in_plane(problem, f)) {
            layers |= bit;
            formulas.push((bit, f));
        }
    }
    let mut r = Raster { n, radius, cells: vec![0; n * n], layers };
    for j in 0..n {
        for i in 0..n {
            let c = r.center(i, j);
            r.cells[j * n + i] = formulas.iter().filter(|(_, f)| holds(problem, f, c)).fold(0, |acc, (bit, _)| acc | bit);
        }
    }
    Ok(r)
}

fn to_px(v: f64, radius: f64, flip: bool) -> f64 {
    let side = GRID as f64 * CELL_PX;
    let t = (v + radius) / (2.0 * radius);
    MARGIN_PX + side * if flip { 1.0 - t } else { t }
}

fn point_xy(p: &[Rational]) -> (f64, f64) {
    (p[0].to_f64().unwrap_or(f64::NAN), p[1].to_f64().unwrap_or(f64::NAN))
}

/// The picture of `run` over the box the outcome was decided on.
pub fn render(problem: &Problem, run: &NilRun) -> Result<String, PlotError> {
    let (interpolant, radius) = match &run.outcome {
        NilOutcome::Interpolant { formula, box_radius, .. } => (Some(formula), *box_radius),
        _ => (None, run.history.last().map_or(10.0, |h| h.box_radius)),
    };
    let r = raster(problem, interpolant, radius, GRID)?;
    let side = GRID as f64 * CELL_PX;
    let total = side + 2.0 * MARGIN_PX;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (bit, class, colour) in [(PHI, "phi", "#888888"), (PSI, "psi", "#3b6fd6"), (INTERPOLANT, "interpolant", "#f4a6c8")] {
        if r.layers & bit == 0 {
            continue;
        }
        // One rectangle per horizontal run of member cells.
        let mut d = String::new();
        for j in 0..r.n {
            let mut i = 0;
            while i < r.n {
                if r.at(i, j) & bit == 0 {
                    i += 1;
                    continue;
                }
                let start = i;
                while i < r.n && r.at(i, j) & bit != 0 {
                    i += 1;
                }
                let x = MARGIN_PX + start as f64 * CELL_PX;
                let y = MARGIN_PX + j as f64 * CELL_PX;
                let _ = write!(d, "M{x} {y}h{}v{CELL_PX}h-{}z", (i - start) as f64 * CELL_PX, (i - start) as f64 * CELL_PX);
            }
        }
        let _ = writeln!(svg, r#"<path class="{class}" fill="{colour}" fill-opacity="0.45" d="{d}"/>"#);
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_PX}" y="{MARGIN_PX}" width="{side}" height="{side}" fill="none" stroke="black"/>"#
    );

    let inside = |(x, y): (f64, f64)| x.abs() <= radius && y.abs() <= radius;
    for (points, class, colour) in [(&run.positives, "positive", "#d62728"), (&run.negatives, "negative", "#1f4fd6")] {
        for p in points.iter().map(|p| point_xy(p)).filter(|p| inside(*p)) {
            let _ = writeln!(
                svg,
                r#"<circle class="{class}" cx="{:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#,
                to_px(p.0, radius, false),
                to_px(p.1, radius, true)
            );
        }
    }
    if let Some(last) = run.history.last() {
        for &k in &last.support_indices {
            let p = if k < last.samples_pos { run.positives.get(k) } else { run.negatives.get(k - last.samples_pos) };
            if let Some(p) = p.map(|p| point_xy(p)).filter(|p| inside(*p)) {
                let _ = writeln!(
                    svg,
                    r#"<circle class="support" cx="{:.2}" cy="{:.2}" r="6" fill="none" stroke="black"/>"#,
                    to_px(p.0, radius, false),
                    to_px(p.1, radius, true)
                );
            }
        }
    }

    let names = problem.common_names();
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
        total / 2.0,
        total - 12.0,
        names[0]
    );
    let _ = writeln!(svg, r#"<text x="12" y="{}" font-size="14">{}</text>"#, total / 2.0, names[1]);
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN_PX}" y="26" font-size="12">±{radius}: phi gray, psi blue, interpolant pink; samples red/blue, support vectors circled</text>"#
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write(problem: &Problem, run: &NilRun, path: &str) -> Result<(), PlotError> {
    let svg = render(problem, run)?;
    std::fs::write(path, svg).map_err(|e| PlotError::Io { path: path.to_string(), message: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nil_core::formula::{parse_formula, parse_problem};

    #[test]
    fn membership_follows_the_formulas() {
        let p = parse_problem("vars x, y; phi: y - x^2 >= 0; psi: y + cos(x) - 0.8 <= 0; degree: 2;").unwrap();
        let i = parse_formula("15*x^2 < 4 + 20*y", &p.vars).unwrap();
        let r = raster(&p, Some(&i), 10.0, 20).unwrap();
        assert_eq!(r.layers, PHI | PSI | INTERPOLANT);
        // Cell centres are at odd multiples of 0.5.
        let (ci, cj) = (10, 9);
        assert_eq!(r.center(ci, cj), (0.5, 0.5));
        assert_eq!(r.at(ci, cj), PHI | INTERPOLANT);
        for j in 0..r.n {
            for i in 0..r.n {
                let (x, y) = r.center(i, j);
                assert_eq!(r.at(i, j) & INTERPOLANT != 0, 15.0 * x * x < 4.0 + 20.0 * y);
            }
        }
    }

    #[test]
    fn one_common_variable_is_a_dimension_error() {
        let p = parse_problem("vars x; phi: x < -1; psi: x >= 1; degree: 1;").unwrap();
        assert_eq!(raster(&p, None, 10.0, 10), Err(PlotError::Dimension(1)));
    }

    #[test]
    fn private_variables_hide_their_layer() {
        let p = parse_problem("vars x, y, z; phi: x + z > 0 && z < y; psi: x + y < -3; degree: 1;").unwrap();
        assert_eq!(p.common.len(), 2);
        assert_eq!(raster(&p, None, 5.0, 4).unwrap().layers, PSI);
    }
}
