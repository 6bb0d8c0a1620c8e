//! Weighted area functionals and winding numbers.
//!
//! Two independent routes to `A_K(u)`:
//!
//! * line route: `A_K(u) = ⨍ Q(u)·iu'` with a vector potential `div Q = K`;
//! * grid route: `A_K(u) = (1/2π)∫ K j_u`, with `j_u` rasterized.
//!
//! Sign convention: `j_u(z) = ⨍ (u-z)/|u-z|²·iu'`, which is minus the usual
//! counterclockwise winding number. A counterclockwise circle has `j = -1`
//! inside and `A_1 = -πR²/(2π) = -R²/2`.

use std::collections::VecDeque;
use std::f64::consts::{PI, TAU};
use std::path::Path;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::curve::{mean_dot, rot90, Loop};
use crate::error::{Error, Result};
use crate::field::CurvatureField;
use crate::quad;

/// A weight `K : ℝ² → ℝ` together with a vector potential `Q`, `div Q = K`.
pub trait Weight: Sync {
    fn value(&self, z: Complex64) -> f64;
    fn potential(&self, z: Complex64) -> Result<Complex64>;
}

impl Weight for CurvatureField {
    fn value(&self, z: Complex64) -> f64 {
        self.eval(z)
    }

    fn potential(&self, z: Complex64) -> Result<Complex64> {
        Ok(CurvatureField::potential(self, z).0)
    }
}

/// `K ≡ c`.
#[derive(Debug, Clone, Copy)]
pub struct Uniform(pub f64);

impl Weight for Uniform {
    fn value(&self, _: Complex64) -> f64 {
        self.0
    }

    fn potential(&self, z: Complex64) -> Result<Complex64> {
        Ok(z * (0.5 * self.0))
    }
}

/// `K = H - c`.
#[derive(Debug, Clone, Copy)]
pub struct Shifted<'a>(pub &'a CurvatureField, pub f64);

impl Weight for Shifted<'_> {
    fn value(&self, z: Complex64) -> f64 {
        self.0.eval(z) - self.1
    }

    fn potential(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.0.potential(z).0 - z * (0.5 * self.1))
    }
}

/// `K = dl H = ∇H·z`, with potential `Q = zH - 2Q_H` (since
/// `div(zH) = 2H + ∇H·z`).
#[derive(Debug, Clone, Copy)]
pub struct RadialDerivativeWeight<'a>(pub &'a CurvatureField);

impl Weight for RadialDerivativeWeight<'_> {
    fn value(&self, z: Complex64) -> f64 {
        self.0.dl_at(z)
    }

    fn potential(&self, z: Complex64) -> Result<Complex64> {
        Ok(z * self.0.eval(z) - self.0.potential(z).0 * 2.0)
    }
}

/// Arbitrary continuous weight; the potential `Q(z) = z∫₀¹K(sz)s ds` is
/// computed by adaptive quadrature along the ray from the origin.
pub struct FnWeight<F: Fn(Complex64) -> f64 + Sync> {
    pub f: F,
    pub tol: f64,
}

impl<F: Fn(Complex64) -> f64 + Sync> Weight for FnWeight<F> {
    fn value(&self, z: Complex64) -> f64 {
        (self.f)(z)
    }

    fn potential(&self, z: Complex64) -> Result<Complex64> {
        let r = quad::integrate(|s| (self.f)(z * s) * s, 0.0, 1.0, self.tol, 0.0);
        if !r.converged {
            return Err(Error::Quadrature { index: 0 });
        }
        Ok(z * r.value)
    }
}

/// `A_1(u) = ½⨍ u·iu'`.
pub fn area_a1(u: &Loop) -> f64 {
    let d: Vec<Complex64> = u.derivative().into_iter().map(rot90).collect();
    0.5 * mean_dot(u.points(), &d)
}

/// Line route `A_K(u) = ⨍ Q(u)·iu'`.
pub fn area_ak_line(u: &Loop, k: &dyn Weight) -> Result<f64> {
    let iu: Vec<Complex64> = u.derivative().into_iter().map(rot90).collect();
    let q = u
        .points()
        .par_iter()
        .enumerate()
        .map(|(i, &z)| k.potential(z).map_err(|e| match e {
            Error::Quadrature { .. } => Error::Quadrature { index: i },
            e => e,
        }))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_dot(&q, &iu))
}

fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn distance_to_polyline(u: &Loop, z: Complex64) -> f64 {
    let pts = u.points();
    let n = pts.len();
    (0..n).map(|k| point_segment_distance(z, pts[k], pts[(k + 1) % n])).fold(f64::INFINITY, f64::min)
}

/// Default indeterminacy threshold: half the longest chord of the sampled
/// polygon.
pub fn default_threshold(u: &Loop) -> f64 {
    let pts = u.points();
    let n = pts.len();
    0.5 * (0..n).map(|k| (pts[(k + 1) % n] - pts[k]).norm()).fold(0.0, f64::max)
}

/// `j_u(z)` from the sum of signed angle increments of `u_k - z`.
pub fn winding_number(u: &Loop, z: Complex64) -> Result<i64> {
    winding_number_with_threshold(u, z, default_threshold(u))
}

pub fn winding_number_with_threshold(u: &Loop, z: Complex64, threshold: f64) -> Result<i64> {
    if distance_to_polyline(u, z) <= threshold {
        return Err(Error::Indeterminate { x: z.re, y: z.im, threshold });
    }
    let pts = u.points();
    let n = pts.len();
    let turns: f64 = (0..n).map(|k| ((pts[(k + 1) % n] - z) / (pts[k] - z)).arg()).sum::<f64>() / TAU;
    let rounded = turns.round();
    if (turns - rounded).abs() >= 0.1 {
        return Err(Error::WindingRounding(turns));
    }
    // counterclockwise turns count negatively in j_u
    Ok(-(rounded as i64))
}

/// Integer raster of `j_u` over a box containing `D_{ρ_u}(ū)`.
#[derive(Debug, Clone, Serialize)]
pub struct WindingGrid {
    /// Center of cell `(0, 0)`.
    pub origin: [f64; 2],
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major values, `values[j * nx + i]`.
    pub values: Vec<i32>,
    /// Cells whose center lies within `2h` of the curve.
    pub indeterminate: Vec<bool>,
}

impl WindingGrid {
    pub fn empty(spacing: f64) -> Self {
        Self { origin: [0.0, 0.0], spacing, nx: 0, ny: 0, values: vec![], indeterminate: vec![] }
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.origin[0] + i as f64 * self.spacing, self.origin[1] + j as f64 * self.spacing)
    }

    pub fn get(&self, i: usize, j: usize) -> i32 {
        self.values[j * self.nx + i]
    }

    /// `‖j_u‖₂ = h·(Σ j²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.spacing * (self.values.iter().map(|&v| (v as f64).powi(2)).sum::<f64>()).sqrt()
    }

    /// Grid route `A_K(u) = (1/2π) h² Σ K(cell) j(cell)`.
    pub fn weighted_area(&self, k: &dyn Weight) -> f64 {
        let h2 = self.spacing * self.spacing;
        let sum: f64 = (0..self.ny)
            .into_par_iter()
            .map(|j| {
                (0..self.nx)
                    .filter(|&i| self.get(i, j) != 0)
                    .map(|i| k.value(self.cell_center(i, j)) * self.get(i, j) as f64)
                    .sum::<f64>()
            })
            .sum();
        sum * h2 / TAU
    }

    /// True when every cell of the outer ring is zero.
    pub fn boundary_is_zero(&self) -> bool {
        (0..self.nx).all(|i| self.get(i, 0) == 0 && self.get(i, self.ny - 1) == 0)
            && (0..self.ny).all(|j| self.get(0, j) == 0 && self.get(self.nx - 1, j) == 0)
    }

    /// CSV export with header `i,j,x,y,value,indeterminate`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["i", "j", "x", "y", "value", "indeterminate"])?;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let c = self.cell_center(i, j);
                let idx = j * self.nx + i;
                w.write_record([
                    i.to_string(),
                    j.to_string(),
                    c.re.to_string(),
                    c.im.to_string(),
                    self.values[idx].to_string(),
                    (self.indeterminate[idx] as u8).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Rasterize `j_u` with cell size `h` (requires `h ≤ ρ_u/64`).
///
/// Values come from signed crossings of each row with the sampled polygon,
/// which is exact at every cell center off the polygon. Centers lying on the
/// polygon take the value of their nearest resolved neighbor. The `2h` band
/// around the curve is reported in `indeterminate` but its values are kept.
pub fn winding_grid(u: &Loop, h: f64) -> Result<WindingGrid> {
    if u.is_constant() {
        return Ok(WindingGrid::empty(h));
    }
    let rho = u.rho();
    if !(h > 0.0) || h > rho / 64.0 {
        return Err(Error::Config(format!("grid spacing {h} must lie in (0, ρ_u/64 = {}]", rho / 64.0)));
    }
    // spectral upsampling brings the polygon close to the trigonometric curve
    let fine = u.resample(u.len().max(2048))?;
    let pts = fine.points();
    let m = pts.len();
    // j_u vanishes outside the bounding box of the curve, which lies in D_{ρ_u}(ū)
    let (lo, hi) = bounding_box(pts);
    let margin = 3.0 * h;
    let nx = ((hi.re - lo.re + 2.0 * margin) / h).ceil() as usize + 1;
    let ny = ((hi.im - lo.im + 2.0 * margin) / h).ceil() as usize + 1;
    let mid = (lo + hi) * 0.5;
    let origin = [mid.re - 0.5 * (nx - 1) as f64 * h, mid.im - 0.5 * (ny - 1) as f64 * h];

    let tie = 1e-9 * h;
    let (mut values, unresolved): (Vec<i32>, Vec<bool>) = (0..ny)
        .into_par_iter()
        .flat_map_iter(|j| {
            let y = origin[1] + j as f64 * h;
            let mut crossings: Vec<(f64, i32)> = Vec::new();
            for k in 0..m {
                let (a, b) = (pts[k], pts[(k + 1) % m]);
                if (a.im <= y) != (b.im <= y) {
                    let x = a.re + (y - a.im) * (b.re - a.re) / (b.im - a.im);
                    let sign = if b.im > a.im { 1 } else { -1 };
                    crossings.push((x, sign));
                }
            }
            crossings.sort_by(|p, q| p.0.total_cmp(&q.0));
            let mut row = vec![(0i32, false); nx];
            let mut acc = 0i32;
            let mut c = crossings.len();
            for i in (0..nx).rev() {
                let x = origin[0] + i as f64 * h;
                while c > 0 && crossings[c - 1].0 > x {
                    acc += crossings[c - 1].1;
                    c -= 1;
                }
                let on_curve = (c > 0 && x - crossings[c - 1].0 <= tie)
                    || (c < crossings.len() && crossings[c].0 - x <= tie);
                row[i] = (-acc, on_curve);
            }
            row
        })
        .unzip();

    let mut mask = vec![false; nx * ny];
    let band = 2.0 * h;
    for k in 0..m {
        let (a, b) = (pts[k], pts[(k + 1) % m]);
        let lo_x = ((a.re.min(b.re) - band - origin[0]) / h).floor().max(0.0) as usize;
        let hi_x = (((a.re.max(b.re) + band - origin[0]) / h).ceil() as usize).min(nx - 1);
        let lo_y = ((a.im.min(b.im) - band - origin[1]) / h).floor().max(0.0) as usize;
        let hi_y = (((a.im.max(b.im) + band - origin[1]) / h).ceil() as usize).min(ny - 1);
        for j in lo_y..=hi_y {
            for i in lo_x..=hi_x {
                let c = Complex64::new(origin[0] + i as f64 * h, origin[1] + j as f64 * h);
                if point_segment_distance(c, a, b) < band {
                    mask[j * nx + i] = true;
                }
            }
        }
    }

    // multi-source BFS from resolved cells into the few centers lying on the polygon
    let mut filled = unresolved.iter().map(|&b| !b).collect::<Vec<_>>();
    let mut queue: VecDeque<usize> = (0..nx * ny).filter(|&c| filled[c]).collect();
    while let Some(c) = queue.pop_front() {
        let (i, j) = (c % nx, c / nx);
        let nbrs = [
            (i > 0).then(|| c - 1),
            (i + 1 < nx).then(|| c + 1),
            (j > 0).then(|| c - nx),
            (j + 1 < ny).then(|| c + nx),
        ];
        for d in nbrs.into_iter().flatten() {
            if !filled[d] {
                filled[d] = true;
                values[d] = values[c];
                queue.push_back(d);
            }
        }
    }

    Ok(WindingGrid { origin, spacing: h, nx, ny, values, indeterminate: mask })
}

fn bounding_box(pts: &[Complex64]) -> (Complex64, Complex64) {
    pts.iter().fold(
        (Complex64::new(f64::INFINITY, f64::INFINITY), Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
        |(lo, hi), z| (Complex64::new(lo.re.min(z.re), lo.im.min(z.im)), Complex64::new(hi.re.max(z.re), hi.im.max(z.im))),
    )
}

/// Default grid spacing: `ρ_u/256`, refined so the curve's bounding box spans
/// at least 1024 cells.
pub fn default_spacing(u: &Loop) -> f64 {
    let (lo, hi) = bounding_box(u.points());
    let extent = (hi.re - lo.re).max(hi.im - lo.im);
    (u.rho() / 256.0).min(extent / 1024.0)
}

/// Grid route with the default spacing `ρ_u/256`.
pub fn area_ak_grid(u: &Loop, k: &dyn Weight, h: Option<f64>) -> Result<f64> {
    if u.is_constant() {
        return Ok(0.0);
    }
    let grid = winding_grid(u, h.unwrap_or_else(|| default_spacing(u)))?;
    Ok(grid.weighted_area(k))
}

/// Left/right sides of one inequality.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InequalityPair {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityPair {
    pub fn new(lhs: f64, rhs: f64, slack: f64) -> Self {
        Self { lhs, rhs, holds: lhs <= rhs + slack }
    }
}

/// The three area bounds for `K = H - 1`:
/// global `√4π|A_K| ≤ ‖K‖₂L`, localized to `D_{ρ_u}(ū)`, and
/// `|A_{H-1}| < N_H L`.
#[derive(Debug, Clone, Serialize)]
pub struct IsoperimetricReport {
    pub area: f64,
    pub global: InequalityPair,
    pub localized: InequalityPair,
    pub hardy: InequalityPair,
}

impl IsoperimetricReport {
    pub fn all_hold(&self) -> bool {
        self.global.holds && self.localized.holds && self.hardy.holds
    }
}

pub fn isoperimetric_check(u: &Loop, field: &CurvatureField, n_h: f64) -> Result<IsoperimetricReport> {
    const SLACK: f64 = 1e-9;
    let k = Shifted(field, 1.0);
    let area = area_ak_line(u, &k)?;
    let l = u.seminorm_l();
    let lhs = (4.0 * PI).sqrt() * area.abs();
    let global_norm = l2_norm_minus_one(field);
    let local_norm = disc_l2_minus_one(field, u.mean(), u.rho());
    Ok(IsoperimetricReport {
        area,
        global: InequalityPair::new(lhs, global_norm * l, SLACK),
        localized: InequalityPair::new(lhs, local_norm * l, SLACK),
        hardy: InequalityPair::new(area.abs(), n_h * l, SLACK),
    })
}

/// `‖H - 1‖₂` over the plane (infinite when `H ↛ 1`).
pub fn l2_norm_minus_one(field: &CurvatureField) -> f64 {
    if (field.asymptote() - 1.0).abs() > 1e-15 {
        return f64::INFINITY;
    }
    let radial_sq = radial_l2_sq(field);
    match field.bump() {
        None => radial_sq.sqrt(),
        Some(b) => {
            // ‖R + B‖² = ‖R‖² + ∫_{supp B}(2R·B + B²)
            let s = field.scale();
            let center = b.center * s;
            let radius = b.radius * s;
            let cross = disc_integral(
                |z| {
                    let bz = field.eval(z) - field.eval_radial(z.norm());
                    let rz = field.eval_radial(z.norm()) - 1.0;
                    2.0 * rz * bz + bz * bz
                },
                center,
                radius,
            );
            (radial_sq + cross).max(0.0).sqrt()
        }
    }
}

/// `∫|H_radial - 1|²` by radial quadrature with an algebraic tail.
pub fn radial_l2_sq(field: &CurvatureField) -> f64 {
    let f = |r: f64| (field.eval_radial(r) - 1.0).powi(2) * r;
    let breaks = field.breakpoints();
    let outer = 2.0 * breaks.last().copied().unwrap_or(field.scale());
    let body = quad::integrate_pieces(f, 0.0, outer, &breaks, 1e-13);
    let tail = quad::integrate(|x: f64| if x == 0.0 { 0.0 } else { f(1.0 / x) / (x * x) }, 0.0, 1.0 / outer, 1e-13, 0.0);
    if !body.converged || !tail.converged {
        return f64::INFINITY;
    }
    TAU * (body.value + tail.value)
}

/// `(∫_{D_ρ(c)} |H - 1|²)^{1/2}` by polar Gauss–Legendre quadrature.
pub fn disc_l2_minus_one(field: &CurvatureField, center: Complex64, radius: f64) -> f64 {
    disc_integral(|z| (field.eval(z) - 1.0).powi(2), center, radius).max(0.0).sqrt()
}

fn disc_integral(f: impl Fn(Complex64) -> f64 + Sync, center: Complex64, radius: f64) -> f64 {
    const PANELS: usize = 64;
    const ANGLES: usize = 512;
    let (x, w) = quad::gauss_legendre(12);
    let dr = radius / PANELS as f64;
    (0..PANELS)
        .into_par_iter()
        .map(|p| {
            let mut acc = 0.0;
            for (xi, wi) in x.iter().zip(&w) {
                let r = (p as f64 + 0.5 + 0.5 * xi) * dr;
                let mut ring = 0.0;
                for a in 0..ANGLES {
                    ring += f(center + Complex64::from_polar(r, TAU * a as f64 / ANGLES as f64));
                }
                acc += 0.5 * dr * wi * r * ring * TAU / ANGLES as f64;
            }
            acc
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn unit_circle_winding_and_area() {
        let u = Loop::circle(c(0.0, 0.0), 1.0, 1, 256).unwrap();
        assert_eq!(winding_number(&u, c(0.0, 0.0)).unwrap(), -1);
        assert!((area_a1(&u) + 0.5).abs() < 1e-14);
        assert!(winding_number(&u, c(1.0, 0.0)).is_err());
        let far = c(0.0, 1.5 * u.rho());
        assert_eq!(winding_number(&u, far).unwrap(), 0);
    }

    #[test]
    fn degree_n_circle_winds_n_times() {
        for n in [2, 3] {
            let u = Loop::circle(c(0.3, 0.1), 1.0, n, 256).unwrap();
            assert_eq!(winding_number(&u, c(0.3, 0.1)).unwrap(), -(n as i64));
        }
        let cw = Loop::circle(c(0.0, 0.0), 1.0, -1, 256).unwrap();
        assert_eq!(winding_number(&cw, c(0.0, 0.0)).unwrap(), 1);
    }

    #[test]
    fn constant_loop_has_no_area() {
        let u = Loop::constant(c(1.0, 2.0), 64).unwrap();
        assert_eq!(area_a1(&u), 0.0);
        let h = CurvatureField::beta_t(2.0, 0.5).unwrap();
        assert_eq!(area_ak_line(&u, &h).unwrap(), 0.0);
        assert_eq!(area_ak_grid(&u, &h, None).unwrap(), 0.0);
        assert!(winding_grid(&u, 0.1).unwrap().values.is_empty());
    }

    #[test]
    fn translated_circle_area() {
        let (r, p) = (1.7, c(-3.0, 2.0));
        let u = Loop::circle(p, r, 1, 256).unwrap();
        assert!((area_a1(&u) + 0.5 * r * r).abs() < 1e-12);
        assert!((area_ak_line(&u, &Uniform(1.0)).unwrap() + 0.5 * r * r).abs() < 1e-12);
    }

    #[test]
    fn grid_spacing_precondition() {
        let u = Loop::circle(c(0.0, 0.0), 1.0, 1, 64).unwrap();
        assert!(winding_grid(&u, u.rho() / 10.0).is_err());
    }

    #[test]
    fn disjoint_support_gives_zero_grid_area() {
        let u = Loop::circle(c(0.0, 0.0), 0.5, 1, 128).unwrap();
        let far = CurvatureField::constant(0.0).with_bump(c(20.0, 0.0), 1.0, 1.0).unwrap();
        assert_eq!(area_ak_grid(&u, &far, None).unwrap(), 0.0);
    }

    #[test]
    fn fn_weight_matches_closed_potential() {
        let h = CurvatureField::beta_t(3.0, 0.2).unwrap();
        let generic = FnWeight { f: |z: Complex64| h.eval(z), tol: 1e-12 };
        let u = Loop::random_fourier(4, 5, 2.0, 128).unwrap();
        let a = area_ak_line(&u, &h).unwrap();
        let b = area_ak_line(&u, &generic).unwrap();
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}
