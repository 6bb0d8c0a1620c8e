//! Searching for and certifying `H`-loops.
//!
//! [`find_critical`] works on the dilation fibers `s ↦ E_H(s·v)`. Non-constant
//! critical points satisfy `dE_H(u)u = 0`, so they sit at fiber peaks; the
//! solver minimizes the peak value `Φ(v) = max_s E_H(s·v)` by L-BFGS with an
//! H¹ preconditioner, using `∇Φ(v) ∝ ∇E_H(s*v)`. When the starting fiber has no peak
//! below `L_max`, there is no critical point to aim for along it and the
//! solver falls back to plain preconditioned descent on `E_H`, which ends in
//! a collapse or a divergence.

use std::collections::VecDeque;
use std::f64::consts::TAU;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::area::winding_number;
use crate::curve::{apply_multiplier, mean_dot, rot90, Loop};
use crate::energy::{energy_value, gradient};
use crate::error::{Error, Result};
use crate::field::CurvatureField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    ConvergedLoop,
    CollapsedToConstant,
    Diverged,
    MaxIters,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub l_max: f64,
    /// Estimate of `N_H`, used for the initial step `1/(1 + N)`.
    pub n_estimate: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iters: 4000, l_max: 1e3, n_estimate: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    pub outcome: Outcome,
    #[serde(skip)]
    pub final_loop: Loop,
    pub residual: f64,
    pub energy: f64,
    pub iterations: usize,
    pub energy_trace: Vec<f64>,
    pub l_trace: Vec<f64>,
    /// `|ū|` per accepted step; a growing trace signals escape to infinity.
    pub mean_trace: Vec<f64>,
    /// `j_u(ū)` of the final loop when determinate.
    pub final_degree: Option<i64>,
}

const COLLAPSE_L: f64 = 1e-6;
const COLLAPSE_STEPS: usize = 10;

/// `‖u'' - L(u)H(u)iu'‖_rms / max(1, L²)`.
pub fn residual(field: &CurvatureField, u: &Loop) -> f64 {
    let l = u.seminorm_l();
    let d1 = u.derivative();
    let d2 = u.second_derivative();
    let diff: Vec<Complex64> = u
        .points()
        .iter()
        .zip(&d1)
        .zip(&d2)
        .map(|((&z, &v), &a)| a - rot90(v) * (l * field.eval(z)))
        .collect();
    mean_dot(&diff, &diff).sqrt() / (l * l).max(1.0)
}

/// Divide Fourier mode `k` by `1 + k²`.
fn precondition(g: &[Complex64]) -> Vec<Complex64> {
    apply_multiplier(g, |k| match k {
        Some(k) => Complex64::new(1.0 / (1.0 + k * k), 0.0),
        None => Complex64::new(0.0, 0.0),
    })
}

/// `s ↦ dE(s·v)v`.
fn fiber_slope(field: &CurvatureField, v: &Loop, s: f64) -> Result<f64> {
    let u = v.scale(Complex64::new(s, 0.0));
    Ok(mean_dot(&gradient(field, &u)?, v.points()))
}

/// Dilation factor of the first peak of `s ↦ E(s·v)` reachable from `s = 1`,
/// or `None` if the fiber keeps rising until `L = l_max`.
pub fn fiber_peak(field: &CurvatureField, v: &Loop, l_max: f64) -> Result<Option<f64>> {
    let lv = v.seminorm_l();
    let s_cap = l_max / lv;
    let mut s = 1.0f64.min(s_cap);
    let mut slope = fiber_slope(field, v, s)?;
    let (mut lo, mut hi, mut f_lo, mut f_hi);
    if slope > 0.0 {
        loop {
            let next = (s * 1.25).min(s_cap);
            let ns = fiber_slope(field, v, next)?;
            if ns <= 0.0 {
                (lo, hi, f_lo, f_hi) = (s, next, slope, ns);
                break;
            }
            if next >= s_cap {
                return Ok(None);
            }
            s = next;
            slope = ns;
        }
    } else {
        loop {
            let next = s / 1.25;
            if next * lv < 1e-12 {
                return Ok(None);
            }
            let ns = fiber_slope(field, v, next)?;
            if ns > 0.0 {
                (lo, hi, f_lo, f_hi) = (next, s, ns, slope);
                break;
            }
            s = next;
            slope = ns;
        }
    }
    // Illinois regula falsi on the slope
    let mut side = 0i8;
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let m = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let m = if m > lo && m < hi { m } else { 0.5 * (lo + hi) };
        let fm = fiber_slope(field, v, m)?;
        if fm == 0.0 {
            return Ok(Some(m));
        }
        if fm > 0.0 {
            lo = m;
            f_lo = fm;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = m;
            f_hi = fm;
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        }
    }
    Ok(Some(if f_lo.abs() < f_hi.abs() { lo } else { hi }))
}

struct Trace {
    energy: Vec<f64>,
    l: Vec<f64>,
    mean: Vec<f64>,
}

impl Trace {
    fn push(&mut self, e: f64, u: &Loop) {
        self.energy.push(e);
        self.l.push(u.seminorm_l());
        self.mean.push(u.mean().norm());
    }
}

fn finish(field: &CurvatureField, outcome: Outcome, u: Loop, iterations: usize, trace: Trace) -> SolverReport {
    let constant = u.is_constant();
    let residual = if constant { 0.0 } else { residual(field, &u) };
    let final_degree = if constant { None } else { winding_number(&u, u.mean()).ok() };
    SolverReport {
        outcome,
        residual,
        energy: energy_value(field, &u),
        iterations,
        energy_trace: trace.energy,
        l_trace: trace.l,
        mean_trace: trace.mean,
        final_degree,
        final_loop: u,
    }
}

/// Search for a non-constant critical point of `E_H` starting at `init`.
pub fn find_critical(field: &CurvatureField, init: &Loop, opts: &SolverOptions) -> Result<SolverReport> {
    if init.is_constant() {
        return Err(Error::ConstantLoop(init.seminorm_l()));
    }
    let mut trace = Trace { energy: vec![], l: vec![], mean: vec![] };
    match fiber_peak(field, init, opts.l_max)? {
        Some(s) => minimax(field, init.scale(Complex64::new(s, 0.0)), opts, trace),
        None => {
            trace.push(energy_value(field, init), init);
            descend(field, init.clone(), opts, trace)
        }
    }
}

/// Two-loop L-BFGS direction with the H¹ preconditioner as initial metric.
fn lbfgs_direction(g: &[Complex64], pairs: &VecDeque<(Vec<Complex64>, Vec<Complex64>)>) -> Vec<Complex64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y) in pairs.iter().rev() {
        let rho = 1.0 / mean_dot(y, s);
        let a = rho * mean_dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= yi * a);
        alphas.push((a, rho));
    }
    let mut r = precondition(&q);
    if let Some((s, y)) = pairs.back() {
        let py = precondition(y);
        let gamma = mean_dot(s, y) / mean_dot(y, &py);
        r.iter_mut().for_each(|ri| *ri *= gamma);
    }
    for ((s, y), (a, rho)) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = rho * mean_dot(y, &r);
        r.iter_mut().zip(s).for_each(|(ri, si)| *ri += si * (a - b));
    }
    r
}

fn minimax(field: &CurvatureField, mut u: Loop, opts: &SolverOptions, mut trace: Trace) -> Result<SolverReport> {
    const MEMORY: usize = 8;
    let mut e = energy_value(field, &u);
    trace.push(e, &u);
    let first_step = 1.0 / (1.0 + opts.n_estimate.max(0.0));
    let mut pairs: VecDeque<(Vec<Complex64>, Vec<Complex64>)> = VecDeque::new();
    let mut g = gradient(field, &u)?;
    for it in 0..opts.max_iters {
        if residual(field, &u) < opts.tol {
            return Ok(finish(field, Outcome::ConvergedLoop, u, it, trace));
        }
        let mut d = lbfgs_direction(&g, &pairs);
        let mut slope = mean_dot(&g, &d);
        if !(slope > 0.0) {
            pairs.clear();
            d = precondition(&g);
            slope = mean_dot(&g, &d);
        }
        if !(slope > 0.0) {
            return Ok(finish(field, Outcome::MaxIters, u, it, trace));
        }
        let mut step = if pairs.is_empty() { first_step } else { 1.0 };
        let start = step;
        let accepted = loop {
            let trial = u.add_scaled(&d, -step);
            if !trial.is_constant() {
                if let Some(s) = fiber_peak(field, &trial, opts.l_max)? {
                    let cand = trial.scale(Complex64::new(s, 0.0));
                    let ce = energy_value(field, &cand);
                    // the second clause admits steps whose change is below rounding
                    if ce <= e - 1e-4 * step * slope || (ce - e).abs() <= 1e-14 * e.abs().max(1.0) {
                        break Some((cand, ce));
                    }
                } else if step < 1e-3 * start {
                    // the fiber lost its peak even for tiny steps
                    return Ok(finish(field, Outcome::Diverged, u, it, trace));
                }
            }
            step *= 0.5;
            if step < 1e-14 * start {
                break None;
            }
        };
        let Some((cand, ce)) = accepted else {
            if !pairs.is_empty() {
                pairs.clear();
                continue;
            }
            let outcome = if residual(field, &u) < opts.tol { Outcome::ConvergedLoop } else { Outcome::MaxIters };
            return Ok(finish(field, outcome, u, it, trace));
        };
        let g_new = gradient(field, &cand)?;
        let s_vec: Vec<Complex64> = cand.points().iter().zip(u.points()).map(|(a, b)| a - b).collect();
        let y_vec: Vec<Complex64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        if mean_dot(&s_vec, &y_vec) > 1e-300 {
            if pairs.len() == MEMORY {
                pairs.pop_front();
            }
            pairs.push_back((s_vec, y_vec));
        }
        u = cand;
        e = ce;
        g = g_new;
        trace.push(e, &u);
    }
    let outcome = if residual(field, &u) < opts.tol { Outcome::ConvergedLoop } else { Outcome::MaxIters };
    Ok(finish(field, outcome, u, opts.max_iters, trace))
}

fn descend(field: &CurvatureField, mut u: Loop, opts: &SolverOptions, mut trace: Trace) -> Result<SolverReport> {
    let mut e = energy_value(field, &u);
    let mut small = 0usize;
    let mut alpha = u.seminorm_l() / (1.0 + opts.n_estimate.max(0.0));
    for it in 0..opts.max_iters {
        let l = u.seminorm_l();
        if l > opts.l_max {
            return Ok(finish(field, Outcome::Diverged, u, it, trace));
        }
        if l < COLLAPSE_L {
            small += 1;
            // below the constant threshold the gradient is undefined, so stop early
            if small >= COLLAPSE_STEPS || l < crate::curve::CONSTANT_THRESHOLD {
                return Ok(finish(field, Outcome::CollapsedToConstant, u, it, trace));
            }
        } else {
            small = 0;
            if residual(field, &u) < opts.tol {
                return Ok(finish(field, Outcome::ConvergedLoop, u, it, trace));
            }
        }
        let g = gradient(field, &u)?;
        let pg = precondition(&g);
        let slope = mean_dot(&g, &pg);
        let mut step = alpha;
        let accepted = loop {
            let trial = u.add_scaled(&pg, -step);
            let te = energy_value(field, &trial);
            if trial.seminorm_l() > 0.0 && te <= e - 1e-4 * step * slope {
                break Some((trial, te));
            }
            step *= 0.5;
            if step < 1e-300 {
                break None;
            }
        };
        let Some((trial, te)) = accepted else {
            return Ok(finish(field, Outcome::MaxIters, u, it, trace));
        };
        u = trial;
        e = te;
        trace.push(e, &u);
        alpha = step * 2.0;
    }
    Ok(finish(field, Outcome::MaxIters, u, opts.max_iters, trace))
}

/// Radii `r` with `r·H(r) = 1`: the circles about the origin that solve the
/// curvature equation for a radial field.
pub fn circle_radius_oracle(field: &CurvatureField) -> Result<Vec<f64>> {
    if !field.is_radial() {
        return Err(Error::NotRadial);
    }
    let f = |r: f64| r * field.eval_radial(r) - 1.0;
    let mut grid: Vec<f64> = (0..=1200).map(|k| 10f64.powf(-6.0 + k as f64 / 100.0) * field.scale()).collect();
    grid.extend(field.breakpoints());
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut roots = Vec::new();
    for w in grid.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (mut fa, fb) = (f(a), f(b));
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if fa * fb >= 0.0 {
            continue;
        }
        while b - a > 1e-12 {
            let m = 0.5 * (a + b);
            let fm = f(m);
            if fm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if fa * fm < 0.0 {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
        }
        roots.push(0.5 * (a + b));
    }
    if let Some(&last) = grid.last() {
        if f(last) == 0.0 {
            roots.push(last);
        }
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-10);
    Ok(roots)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShootReport {
    /// `|u(T) - u(0)| + |u'(T) - u'(0)|` from the finer integration.
    pub defect: f64,
    /// Difference between the step-halved and full-step defects.
    pub error_estimate: f64,
    pub end_point: [f64; 2],
}

fn rk4_shoot(field: &CurvatureField, z0: Complex64, theta0: f64, c: f64, t_end: f64, steps: usize) -> Result<(Complex64, f64)> {
    let rhs = |z: Complex64, th: f64| (Complex64::from_polar(c, th), c * field.eval(z));
    let dt = t_end / steps as f64;
    let (mut z, mut th) = (z0, theta0);
    for _ in 0..steps {
        let (k1z, k1t) = rhs(z, th);
        let (k2z, k2t) = rhs(z + k1z * (0.5 * dt), th + 0.5 * dt * k1t);
        let (k3z, k3t) = rhs(z + k2z * (0.5 * dt), th + 0.5 * dt * k2t);
        let (k4z, k4t) = rhs(z + k3z * dt, th + dt * k3t);
        z += (k1z + k2z * 2.0 + k3z * 2.0 + k4z) * (dt / 6.0);
        th += dt / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
        if !(z.re.is_finite() && z.im.is_finite() && th.is_finite()) {
            return Err(Error::Integration("non-finite state".into()));
        }
    }
    Ok((z, th))
}

/// Integrate `z' = c·e^{iθ}`, `θ' = c·H(z)` over `T = 2π·period_hint` and
/// measure how far the trajectory is from closing up.
pub fn shoot(field: &CurvatureField, z0: Complex64, v0: Complex64, c: f64, period_hint: f64) -> Result<ShootReport> {
    if !(c > 0.0) || !(period_hint > 0.0) {
        return Err(Error::Config("speed and period must be positive".into()));
    }
    if v0.norm() == 0.0 {
        return Err(Error::Config("initial direction must be nonzero".into()));
    }
    let theta0 = v0.arg();
    let t_end = TAU * period_hint;
    let steps = (4096.0 * period_hint).ceil() as usize;
    let defect = |(z, th): (Complex64, f64)| {
        (z - z0).norm() + (Complex64::from_polar(c, th) - Complex64::from_polar(c, theta0)).norm()
    };
    let coarse = rk4_shoot(field, z0, theta0, c, t_end, steps)?;
    let fine = rk4_shoot(field, z0, theta0, c, t_end, 2 * steps)?;
    let (d0, d1) = (defect(coarse), defect(fine));
    Ok(ShootReport { defect: d1, error_estimate: (d1 - d0).abs(), end_point: [fine.0.re, fine.0.im] })
}

/// Shoot from the first sample of a loop with its own speed `L(u)`.
pub fn shoot_loop(field: &CurvatureField, u: &Loop) -> Result<ShootReport> {
    let d = u.derivative();
    shoot(field, u.points()[0], d[0], u.seminorm_l(), 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn residual_examples() {
        let u = Loop::circle(c(0.0, 0.0), 1.0, 1, 128).unwrap();
        assert!(residual(&CurvatureField::constant(1.0), &u) < 1e-12);
        assert!((residual(&CurvatureField::constant(2.0), &u) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_roots() {
        assert_eq!(circle_radius_oracle(&CurvatureField::constant(1.0)).unwrap().len(), 1);
        let r = circle_radius_oracle(&CurvatureField::beta_t(2.0, 0.5).unwrap()).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0].powi(3) - 4.0 * r[0] + 2.0).abs() < 1e-10);
        let bump = CurvatureField::constant(1.0).with_bump(c(0.0, 0.0), 1.0, 0.1).unwrap();
        assert!(matches!(circle_radius_oracle(&bump), Err(Error::NotRadial)));
    }

    #[test]
    fn unit_field_from_large_circle() {
        let h = CurvatureField::constant(1.0);
        let init = Loop::circle(c(0.0, 0.0), 1.3, 1, 64).unwrap();
        let rep = find_critical(&h, &init, &SolverOptions::default()).unwrap();
        assert_eq!(rep.outcome, Outcome::ConvergedLoop);
        assert!((rep.final_loop.seminorm_l() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn beta_t_circle_matches_oracle() {
        let h = CurvatureField::beta_t(2.0, 0.5).unwrap();
        let init = Loop::circle(c(0.0, 0.0), 0.6, 1, 64).unwrap();
        let rep = find_critical(&h, &init, &SolverOptions::default()).unwrap();
        assert_eq!(rep.outcome, Outcome::ConvergedLoop, "{:?}", rep.residual);
        let r = circle_radius_oracle(&h).unwrap()[0];
        assert!((rep.final_loop.max_deviation_from_mean() - r).abs() < 1e-6);
    }

    #[test]
    fn shooting_circles() {
        let one = CurvatureField::constant(1.0);
        assert!(shoot(&one, c(1.0, 0.0), c(0.0, 1.0), 1.0, 1.0).unwrap().defect < 1e-10);
        assert!(shoot(&one, c(1.0, 0.0), c(0.0, 1.0), 1.0, 2.0).unwrap().defect < 1e-10);
        let h = CurvatureField::beta_t(2.0, 0.5).unwrap();
        let r = circle_radius_oracle(&h).unwrap()[0];
        assert!(shoot(&h, c(r, 0.0), c(0.0, 1.0), r, 1.0).unwrap().defect < 1e-8);
        assert!(shoot(&one, c(1.0, 0.0), c(0.0, 1.0), 0.0, 1.0).is_err());
    }

    #[test]
    fn faint_bump_collapses() {
        let h = CurvatureField::constant(0.0).with_bump(c(0.5, 0.0), 1.0, 0.2).unwrap();
        let init = Loop::random_fourier(3, 3, 2.0, 64).unwrap();
        let rep = find_critical(&h, &init, &SolverOptions::default()).unwrap();
        assert!(matches!(rep.outcome, Outcome::CollapsedToConstant | Outcome::Diverged), "{:?}", rep.outcome);
    }
}
