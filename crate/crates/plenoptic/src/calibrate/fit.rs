//! Projective grid fit by Levenberg–Marquardt.

use nalgebra::{Matrix3, SMatrix, SVector};

use crate::error::{Error, Result};

use super::model::CalibModel;
use super::{row_shifted, CentroidGrid, Packing};

/// Micro-image size divider of the regularizer gate.
const SIZE_DIVIDER: f64 = 20.0;
const FREE_PARAMS: usize = 8;

/// Tuning knobs of [`fit_grid_with`].
#[derive(Clone, Debug)]
pub struct FitOptions {
    /// Weight of the vignetting regularizer; zero disables it.
    pub beta: f64,
    pub max_iterations: usize,
    /// Stop once the relative cost change of an accepted step drops below this.
    pub tolerance: f64,
    pub initial_damping: f64,
    /// Consecutive damping escalations with a growing cost tolerated before giving up.
    pub max_escalations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            beta: 0.0,
            max_iterations: 100,
            tolerance: 1e-9,
            initial_damping: 1e-3,
            max_escalations: 10,
        }
    }
}

/// Final state of the optimizer.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFitState {
    /// Row-major homography entries, last one fixed to 1.
    pub params: [f64; 9],
    /// Per-lens cost `‖c̄ − ĉ‖ + β·R`, row-major.
    pub residuals: Vec<f64>,
    pub beta: f64,
    pub damping: f64,
    pub iterations: usize,
    /// Sum of squared residual components.
    pub cost: f64,
    /// Cost after every accepted step, starting with the initial estimate.
    pub cost_history: Vec<f64>,
    pub converged: bool,
}

/// Position of lens `(j, h)` on the unit-pitch grid centred at the origin.
///
/// Hexagonal rows are spaced `√3/2` apart and shifted rows carry an extra
/// half-pitch offset; the whole hexagonal grid is moved left by a quarter pitch
/// so that it stays centred.
pub fn canonical_point(j: usize, h: usize, rows: usize, cols: usize, packing: Packing, phase: u8) -> [f64; 2] {
    let jc = j as f64 - (rows as f64 - 1.0) / 2.0;
    let hc = h as f64 - (cols as f64 - 1.0) / 2.0;
    match packing {
        Packing::Rectangular => [jc, hc],
        Packing::Hexagonal => {
            let shift = if row_shifted(packing, phase, j) { 0.5 } else { 0.0 };
            [jc * 3f64.sqrt() / 2.0, hc + shift - 0.25]
        }
    }
}

/// Row-major canonical grid for the given geometry.
pub fn canonical_grid(rows: usize, cols: usize, packing: Packing, phase: u8) -> Vec<[f64; 2]> {
    (0..rows)
        .flat_map(|j| (0..cols).map(move |h| canonical_point(j, h, rows, cols, packing, phase)))
        .collect()
}

/// Applies the homography `p` (row-major, 9 entries) to a canonical point.
pub fn project(p: &[f64; 9], g: [f64; 2]) -> [f64; 2] {
    let z = p[6] * g[0] + p[7] * g[1] + p[8];
    [
        (p[0] * g[0] + p[1] * g[1] + p[2]) / z,
        (p[3] * g[0] + p[4] * g[1] + p[5]) / z,
    ]
}

fn regularizer(measured: [f64; 2], predicted: [f64; 2], p: &[f64; 9], pitch: f64) -> f64 {
    let centre = [p[2], p[5]];
    let gate = pitch / SIZE_DIVIDER;
    (0..2)
        .map(|i| {
            let d = (measured[i] - centre[i]).abs() - (predicted[i] - centre[i]).abs();
            if d + gate < 0.0 {
                0.0
            } else {
                d.max(0.0)
            }
        })
        .sum()
}

struct Problem<'a> {
    measured: &'a [[f64; 2]],
    canonical: Vec<[f64; 2]>,
    pitch: f64,
    beta: f64,
}

impl Problem<'_> {
    fn full(x: &SVector<f64, FREE_PARAMS>) -> [f64; 9] {
        let mut p = [1.0; 9];
        p[..FREE_PARAMS].copy_from_slice(x.as_slice());
        p
    }

    /// Residual vector: both coordinate errors per lens, then the weighted
    /// regularizer per lens when enabled.
    fn residuals(&self, x: &SVector<f64, FREE_PARAMS>, out: &mut Vec<f64>) {
        let p = Self::full(x);
        out.clear();
        for (m, g) in self.measured.iter().zip(&self.canonical) {
            let c = project(&p, *g);
            out.push(m[0] - c[0]);
            out.push(m[1] - c[1]);
        }
        if self.beta > 0.0 {
            for (m, g) in self.measured.iter().zip(&self.canonical) {
                out.push(self.beta * regularizer(*m, project(&p, *g), &p, self.pitch));
            }
        }
    }

    fn per_lens(&self, p: &[f64; 9]) -> Vec<f64> {
        self.measured
            .iter()
            .zip(&self.canonical)
            .map(|(m, g)| {
                let c = project(p, *g);
                let d = ((m[0] - c[0]).powi(2) + (m[1] - c[1]).powi(2)).sqrt();
                d + self.beta * regularizer(*m, c, p, self.pitch)
            })
            .collect()
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Least-squares affine map from canonical to measured positions.
fn affine_estimate(measured: &[[f64; 2]], canonical: &[[f64; 2]]) -> Result<SVector<f64, FREE_PARAMS>> {
    let mut ata = Matrix3::<f64>::zeros();
    let mut atk = nalgebra::Vector3::<f64>::zeros();
    let mut atl = nalgebra::Vector3::<f64>::zeros();
    for (m, g) in measured.iter().zip(canonical) {
        let a = nalgebra::Vector3::new(g[0], g[1], 1.0);
        ata += a * a.transpose();
        atk += a * m[0];
        atl += a * m[1];
    }
    let inv = ata
        .try_inverse()
        .ok_or_else(|| Error::Singular("canonical grid is degenerate (needs 2 rows and 2 columns)".into()))?;
    let (rk, rl) = (inv * atk, inv * atl);
    Ok(SVector::<f64, FREE_PARAMS>::from_column_slice(&[
        rk[0], rk[1], rk[2], rl[0], rl[1], rl[2], 0.0, 0.0,
    ]))
}

/// Fits a homography from the canonical grid to the measured centroids with
/// default options and regularizer weight `beta`.
pub fn fit_grid(grid: &CentroidGrid, pitch: usize, beta: f64) -> Result<(CalibModel, GridFitState)> {
    fit_grid_with(
        grid,
        pitch,
        &FitOptions {
            beta,
            ..FitOptions::default()
        },
    )
}

/// Fits a homography from the canonical grid to the measured centroids.
///
/// Starts from the affine least-squares solution and refines all eight free
/// entries with Marquardt-damped Gauss–Newton steps on a central-difference
/// Jacobian.
pub fn fit_grid_with(grid: &CentroidGrid, pitch: usize, opts: &FitOptions) -> Result<(CalibModel, GridFitState)> {
    if opts.beta < 0.0 || !opts.beta.is_finite() {
        return Err(Error::InvalidInput(format!("beta must be non-negative, got {}", opts.beta)));
    }
    if grid.entries().iter().any(|c| !c[0].is_finite() || !c[1].is_finite()) {
        return Err(Error::NonFinite("centroid grid".into()));
    }
    let problem = Problem {
        measured: grid.entries(),
        canonical: canonical_grid(grid.rows(), grid.cols(), grid.packing(), grid.hex_row_phase()),
        pitch: pitch as f64,
        beta: opts.beta,
    };

    let mut x = affine_estimate(problem.measured, &problem.canonical)?;
    let mut f = Vec::new();
    problem.residuals(&x, &mut f);
    let mut cost = sum_sq(&f);
    let mut history = vec![cost];
    let mut mu = opts.initial_damping;
    let mut escalations = 0;
    let mut converged = cost == 0.0;
    let mut iterations = 0;
    let (mut fp, mut fm, mut trial) = (Vec::new(), Vec::new(), Vec::new());

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        // central-difference Jacobian, accumulated straight into JᵀJ and Jᵀf
        let n = f.len();
        let mut jac = vec![[0.0; FREE_PARAMS]; n];
        for c in 0..FREE_PARAMS {
            let step = 1e-6 * x[c].abs().max(1.0);
            let mut xp = x;
            let mut xm = x;
            xp[c] += step;
            xm[c] -= step;
            problem.residuals(&xp, &mut fp);
            problem.residuals(&xm, &mut fm);
            for r in 0..n {
                jac[r][c] = (fp[r] - fm[r]) / (2.0 * step);
            }
        }
        let mut jtj = SMatrix::<f64, FREE_PARAMS, FREE_PARAMS>::zeros();
        let mut jtf = SVector::<f64, FREE_PARAMS>::zeros();
        for (row, fr) in jac.iter().zip(&f) {
            for a in 0..FREE_PARAMS {
                jtf[a] += row[a] * fr;
                for b in a..FREE_PARAMS {
                    jtj[(a, b)] += row[a] * row[b];
                }
            }
        }
        for a in 0..FREE_PARAMS {
            for b in 0..a {
                jtj[(a, b)] = jtj[(b, a)];
            }
        }

        loop {
            let mut lhs = jtj;
            for a in 0..FREE_PARAMS {
                lhs[(a, a)] += mu * jtj[(a, a)].max(1e-300);
            }
            let step = lhs.cholesky().map(|ch| ch.solve(&jtf));
            let accepted = match step {
                Some(delta) => {
                    let xn = x - delta;
                    problem.residuals(&xn, &mut trial);
                    let cn = sum_sq(&trial);
                    if !cn.is_finite() {
                        return Err(Error::NonFinite("grid fit cost".into()));
                    }
                    if cn < cost {
                        let rel = (cost - cn) / cost.max(f64::MIN_POSITIVE);
                        x = xn;
                        std::mem::swap(&mut f, &mut trial);
                        cost = cn;
                        history.push(cost);
                        mu = (mu / 10.0).max(1e-15);
                        escalations = 0;
                        if rel < opts.tolerance || cost < 1e-24 {
                            converged = true;
                        }
                        true
                    } else if cn <= cost * (1.0 + opts.tolerance) {
                        // no significant change available: at a minimum
                        converged = true;
                        true
                    } else {
                        false
                    }
                }
                None => false,
            };
            if accepted {
                break;
            }
            mu *= 10.0;
            escalations += 1;
            if escalations >= opts.max_escalations {
                return Err(Error::Divergence {
                    iterations,
                    cost,
                    params: Problem::full(&x),
                });
            }
        }
    }

    let params = Problem::full(&x);
    let fitted = grid.map_indexed(|j, h| project(&params, canonical_point(j, h, grid.rows(), grid.cols(), grid.packing(), grid.hex_row_phase())));
    let fit_residual = grid
        .entries()
        .iter()
        .zip(fitted.entries())
        .map(|(m, c)| ((m[0] - c[0]).powi(2) + (m[1] - c[1]).powi(2)).sqrt())
        .fold(0.0, f64::max);
    let rotation_rad = crate::align::estimate_rotation(&fitted)?;
    let state = GridFitState {
        residuals: problem.per_lens(&params),
        params,
        beta: opts.beta,
        damping: mu,
        iterations,
        cost,
        cost_history: history,
        converged,
    };
    let model = CalibModel::new(grid.clone(), pitch, params, rotation_rad, fit_residual)?;
    Ok((model, state))
}
