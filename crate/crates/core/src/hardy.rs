//! Grid calculus for `dl K = ∇K·z` and `dl*K = -div(Kz)`, the mollification
//! identity, and numerical Hardy ratios `‖K‖₂²/‖dl K‖₂²`.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::CurvatureField;
use crate::quad;

/// Node values on `[-S, S]²` with spacing `h`; node `(i, j)` sits at
/// `(-S + ih, -S + jh)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    half_side: f64,
    spacing: f64,
    n: usize,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridHeader {
    pub half_side: f64,
    pub spacing: f64,
    pub nodes_per_side: usize,
}

impl ScalarGrid {
    pub fn zeros(half_side: f64, spacing: f64) -> Result<Self> {
        if !(half_side > 0.0 && spacing > 0.0) {
            return Err(Error::Config("grid side and spacing must be positive".into()));
        }
        let cells = (2.0 * half_side / spacing).round();
        if (cells * spacing - 2.0 * half_side).abs() > 1e-9 * half_side || cells < 8.0 {
            return Err(Error::Config(format!("spacing {spacing} does not divide side {}", 2.0 * half_side)));
        }
        let n = cells as usize + 1;
        Ok(Self { half_side, spacing, n, values: vec![0.0; n * n] })
    }

    pub fn from_fn(half_side: f64, spacing: f64, f: impl Fn(f64, f64) -> f64 + Sync) -> Result<Self> {
        let mut g = Self::zeros(half_side, spacing)?;
        let n = g.n;
        let (s, h) = (half_side, spacing);
        g.values.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
            let y = -s + j as f64 * h;
            for (i, v) in row.iter_mut().enumerate() {
                *v = f(-s + i as f64 * h, y);
            }
        });
        Ok(g)
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self { half_side: self.half_side, spacing: self.spacing, n: self.n, values }
    }

    pub fn half_side(&self) -> f64 {
        self.half_side
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nodes_per_side(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n + i]
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_side + i as f64 * self.spacing
    }

    /// `h·(Σ v²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.spacing * self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &ScalarGrid) -> ScalarGrid {
        self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }

    /// Whether the outer two rings of nodes vanish (relative to the peak).
    pub fn is_compactly_supported(&self) -> bool {
        let tol = 1e-12 * self.max_abs();
        let n = self.n;
        (0..n).all(|j| {
            (0..n).all(|i| {
                let ring = i < 2 || j < 2 || i + 2 >= n || j + 2 >= n;
                !ring || self.get(i, j).abs() <= tol
            })
        })
    }

    fn require_support(&self) -> Result<()> {
        if self.is_compactly_supported() {
            Ok(())
        } else {
            Err(Error::DomainTooSmall)
        }
    }

    pub fn header(&self) -> GridHeader {
        GridHeader { half_side: self.half_side, spacing: self.spacing, nodes_per_side: self.n }
    }

    /// Writes `<stem>.csv` (`i,j,value`) and `<stem>.json` (header).
    pub fn write(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
        w.write_record(["i", "j", "value"])?;
        for j in 0..self.n {
            for i in 0..self.n {
                w.write_record([i.to_string(), j.to_string(), format!("{:e}", self.get(i, j))])?;
            }
        }
        w.flush()?;
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&self.header())?)?;
        Ok(())
    }

    pub fn read(dir: impl AsRef<Path>, stem: &str) -> Result<Self> {
        let dir = dir.as_ref();
        let header: GridHeader = serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
        let mut g = Self::zeros(header.half_side, header.spacing)?;
        if g.n != header.nodes_per_side {
            return Err(Error::Config("grid header is inconsistent".into()));
        }
        let mut r = csv::Reader::from_path(dir.join(format!("{stem}.csv")))?;
        for rec in r.records() {
            let rec = rec?;
            let parse = |k: usize| -> Result<&str> { rec.get(k).ok_or_else(|| Error::Config("short grid record".into())) };
            let i: usize = parse(0)?.parse().map_err(|_| Error::Config("bad grid index".into()))?;
            let j: usize = parse(1)?.parse().map_err(|_| Error::Config("bad grid index".into()))?;
            let v: f64 = parse(2)?.parse().map_err(|_| Error::Config("bad grid value".into()))?;
            if i >= g.n || j >= g.n {
                return Err(Error::Config("grid index out of range".into()));
            }
            g.values[j * g.n + i] = v;
        }
        Ok(g)
    }
}

/// Centered-difference stencil applied over interior nodes; the outer ring
/// is left at zero.
fn interior_map(k: &ScalarGrid, f: impl Fn(usize, usize, f64, f64) -> f64 + Sync) -> ScalarGrid {
    let n = k.n;
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
        if j == 0 || j + 1 == n {
            return;
        }
        let y = k.coord(j);
        for (i, v) in row.iter_mut().enumerate().take(n - 1).skip(1) {
            *v = f(i, j, k.coord(i), y);
        }
    });
    k.with_values(out)
}

fn dl_unchecked(k: &ScalarGrid) -> ScalarGrid {
    let inv = 0.5 / k.spacing;
    interior_map(k, |i, j, x, y| {
        let dx = (k.get(i + 1, j) - k.get(i - 1, j)) * inv;
        let dy = (k.get(i, j + 1) - k.get(i, j - 1)) * inv;
        dx * x + dy * y
    })
}

/// `dl K = ∇K·z` by centered differences.
pub fn dl_grid(k: &ScalarGrid) -> Result<ScalarGrid> {
    k.require_support()?;
    Ok(dl_unchecked(k))
}

/// `dl*K = -div(Kz)` by centered differences.
pub fn dlstar_grid(k: &ScalarGrid) -> Result<ScalarGrid> {
    k.require_support()?;
    let inv = 0.5 / k.spacing;
    Ok(interior_map(k, |i, j, _, _| {
        let (xp, xm) = (k.coord(i + 1), k.coord(i - 1));
        let (yp, ym) = (k.coord(j + 1), k.coord(j - 1));
        -((k.get(i + 1, j) * xp - k.get(i - 1, j) * xm) + (k.get(i, j + 1) * yp - k.get(i, j - 1) * ym)) * inv
    }))
}

/// `‖K‖₂²/‖dl K‖₂²`.
pub fn hardy_ratio(k: &ScalarGrid) -> Result<f64> {
    let kn = k.l2_norm();
    if kn == 0.0 {
        return Err(Error::Config("Hardy ratio of the zero function".into()));
    }
    let dn = dl_grid(k)?.l2_norm();
    if dn == 0.0 {
        return Err(Error::Config("dl K vanishes for a nonzero K".into()));
    }
    Ok((kn / dn).powi(2))
}

/// Standard bump `exp(-1/(1-|z|²))` scaled to radius `eps`, sampled on a
/// `(2m+1)²` stencil with spacing `h` and normalized to unit discrete mass.
#[derive(Debug, Clone)]
pub struct Mollifier {
    pub eps: f64,
    pub spacing: f64,
    pub half_width: usize,
    pub values: Vec<f64>,
}

impl Mollifier {
    pub fn new(eps: f64, h: f64) -> Result<Self> {
        if eps < 4.0 * h * (1.0 - 1e-12) {
            return Err(Error::Resolution { eps, min: 4.0 * h });
        }
        let m = (eps / h).ceil() as usize;
        let w = 2 * m + 1;
        let mut values = vec![0.0; w * w];
        for j in 0..w {
            for i in 0..w {
                let x = (i as f64 - m as f64) * h / eps;
                let y = (j as f64 - m as f64) * h / eps;
                let r2 = x * x + y * y;
                if r2 < 1.0 {
                    values[j * w + i] = (-1.0 / (1.0 - r2)).exp();
                }
            }
        }
        let mass: f64 = values.iter().sum::<f64>() * h * h;
        values.iter_mut().for_each(|v| *v /= mass);
        Ok(Self { eps, spacing: h, half_width: m, values })
    }

    fn width(&self) -> usize {
        2 * self.half_width + 1
    }

    /// `dl ρ_ε` on the same stencil (centered differences, zero outside).
    pub fn dl(&self) -> Vec<f64> {
        let w = self.width();
        let m = self.half_width as f64;
        let at = |i: isize, j: isize| -> f64 {
            if i < 0 || j < 0 || i >= w as isize || j >= w as isize {
                0.0
            } else {
                self.values[j as usize * w + i as usize]
            }
        };
        let inv = 0.5 / self.spacing;
        let mut out = vec![0.0; w * w];
        for j in 0..w {
            for i in 0..w {
                let (ii, jj) = (i as isize, j as isize);
                let x = (i as f64 - m) * self.spacing;
                let y = (j as f64 - m) * self.spacing;
                out[j * w + i] = x * (at(ii + 1, jj) - at(ii - 1, jj)) * inv + y * (at(ii, jj + 1) - at(ii, jj - 1)) * inv;
            }
        }
        out
    }

    /// `-½ h² Σ dl ρ_ε`.
    pub fn dl_mass(&self) -> f64 {
        -0.5 * self.dl().iter().sum::<f64>() * self.spacing * self.spacing
    }
}

/// Discrete convolution `h² Σ_w K(z - w) k(w)` with a centered stencil.
fn convolve(k: &ScalarGrid, kernel: &[f64], half_width: usize) -> ScalarGrid {
    let n = k.n as isize;
    let m = half_width as isize;
    let w = 2 * half_width + 1;
    let h2 = k.spacing * k.spacing;
    let mut out = vec![0.0; k.n * k.n];
    out.par_chunks_mut(k.n).enumerate().for_each(|(j, row)| {
        for (i, v) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for b in -m..=m {
                let jj = j as isize - b;
                if jj < 0 || jj >= n {
                    continue;
                }
                for a in -m..=m {
                    let ii = i as isize - a;
                    if ii < 0 || ii >= n {
                        continue;
                    }
                    acc += k.values[(jj * n + ii) as usize] * kernel[((b + m) as usize) * w + (a + m) as usize];
                }
            }
            *v = acc * h2;
        }
    });
    k.with_values(out)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MollifyReport {
    /// `‖dl(K*ρ_ε) - (dl K + 2K)*ρ_ε - K*(dl ρ_ε)‖₂`, i.e. the identity with
    /// `-dl*K` replaced by the pointwise expression `dl K + 2K`.
    pub residual: f64,
    /// Same identity with `dl*K` from its own divergence stencil; the
    /// centered stencils commute with the discrete convolution, so this one
    /// is at rounding level.
    pub stencil_residual: f64,
    pub dl_norm: f64,
    /// `-½∫dl ρ_ε`.
    pub mass: f64,
}

/// Check `dl(K*ρ_ε) = -(dl*K)*ρ_ε + K*(dl ρ_ε)` on the grid.
pub fn mollify_check(k: &ScalarGrid, eps: f64) -> Result<MollifyReport> {
    k.require_support()?;
    let rho = Mollifier::new(eps, k.spacing)?;
    let m = rho.half_width;
    if 2 * (m + 2) >= k.n {
        return Err(Error::DomainTooSmall);
    }
    let lhs = dl_unchecked(&convolve(k, &rho.values, m));
    let dlk = dl_unchecked(k);
    let pointwise = k.with_values(dlk.values.iter().zip(&k.values).map(|(d, v)| -d - 2.0 * v).collect());
    let t1 = convolve(&pointwise, &rho.values, m);
    let t1s = convolve(&dlstar_grid(k)?, &rho.values, m);
    let t2 = convolve(k, &rho.dl(), m);
    let defect = |t1: &ScalarGrid| {
        let diff = lhs.values.iter().zip(&t1.values).zip(&t2.values).map(|((l, a), b)| l + a - b).collect();
        k.with_values(diff).l2_norm()
    };
    Ok(MollifyReport { residual: defect(&t1), stencil_residual: defect(&t1s), dl_norm: dlk.l2_norm(), mass: rho.dl_mass() })
}

/// `C^∞` step: 0 for `x ≤ 0`, 1 for `x ≥ 1`, and its derivative.
fn smooth_step(x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0);
    }
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    let s = a / (a + b);
    let da = a / (x * x);
    let db = -b / ((1.0 - x) * (1.0 - x));
    (s, (da * b - a * db) / ((a + b) * (a + b)))
}

/// Near-optimizers of the Hardy inequality:
/// `K(r) = r^{-1+δ}·χ(log r)`, where `χ` rises smoothly on
/// `[log a, log a + w]` and falls on `[log b - w, log b]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NearOptimizer {
    pub delta: f64,
    pub log_a: f64,
    pub log_b: f64,
    pub ramp: f64,
}

impl NearOptimizer {
    fn cutoff(&self, t: f64) -> (f64, f64) {
        let (s1, d1) = smooth_step((t - self.log_a) / self.ramp);
        let (s2, d2) = smooth_step((self.log_b - t) / self.ramp);
        (s1 * s2, (d1 * s2 - s1 * d2) / self.ramp)
    }

    pub fn value(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let t = r.ln();
        r.powf(self.delta - 1.0) * self.cutoff(t).0
    }

    /// Hardy ratio by quadrature in `t = log r`. With `g = r·K`,
    /// `‖K‖² = 2π∫g² dt` and `‖dl K‖² = 2π∫(g' - g)² dt`.
    pub fn ratio_1d(&self) -> f64 {
        let g = |t: f64| {
            let (c, dc) = self.cutoff(t);
            let e = (self.delta * t).exp();
            (e * c, e * (self.delta * c + dc))
        };
        let breaks = [self.log_a + self.ramp, self.log_b - self.ramp];
        let num = quad::integrate_pieces(|t| g(t).0.powi(2), self.log_a, self.log_b, &breaks, 1e-12);
        let den = quad::integrate_pieces(
            |t| {
                let (v, d) = g(t);
                (d - v).powi(2)
            },
            self.log_a,
            self.log_b,
            &breaks,
            1e-12,
        );
        num.value / den.value
    }

    pub fn grid(&self, half_side: f64, spacing: f64) -> Result<ScalarGrid> {
        ScalarGrid::from_fn(half_side, spacing, |x, y| self.value((x * x + y * y).sqrt()))
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridNReport {
    /// Richardson-extrapolated `N_H`.
    pub n: f64,
    pub n_coarse: f64,
    pub n_fine: f64,
    /// `|n_fine - n_coarse|`.
    pub tolerance: f64,
}

/// `N_H²·4π` contribution from the nodes of one grid plus the radial tail
/// outside the covered square.
fn grid_n_squared(field: &CurvatureField, s: f64, h: f64) -> Result<f64> {
    let lam = field.asymptote();
    let grid = ScalarGrid::from_fn(s, h, |x, y| field.eval(Complex64::new(x, y)) - lam)?;
    let core = dl_unchecked(&grid).l2_norm().powi(2);
    let covered = s - 0.5 * h;
    let tail = radial_tail(field, covered)?;
    Ok(core + tail)
}

/// `∫ |dl H|²` over the complement of `[-s, s]²`, for the radial part.
fn radial_tail(field: &CurvatureField, s: f64) -> Result<f64> {
    let f = |r: f64| {
        let d = field.dl_at(Complex64::new(r, 0.0));
        d * d * r
    };
    let diag = s * std::f64::consts::SQRT_2;
    let breaks = field.breakpoints();
    let corner = quad::integrate_pieces(|r| f(r) * (4.0 / PI) * (s / r).min(1.0).acos(), s, diag, &breaks, 1e-12);
    let outer = 2.0 * diag.max(breaks.last().copied().unwrap_or(0.0));
    let mid = quad::integrate_pieces(f, diag, outer, &breaks, 1e-12);
    let far = quad::integrate(|x: f64| if x == 0.0 { 0.0 } else { f(1.0 / x) / (x * x) }, 0.0, 1.0 / outer, 1e-12, 0.0);
    if !corner.converged || !mid.converged || !far.converged || !far.value.is_finite() {
        return Ok(f64::INFINITY);
    }
    Ok(TAU * (corner.value + mid.value + far.value))
}

/// `N_H` for any field by grid differences of `H - λ∞` on `[-S, S]²` at
/// spacings `h` and `h/2`, with the radial tail added analytically.
pub fn grid_n(field: &CurvatureField, s: f64, h: f64) -> Result<GridNReport> {
    if let Some(b) = field.bump() {
        let c = b.center * field.scale();
        let r = b.radius * field.scale();
        if c.re.abs() + r > 0.5 * s || c.im.abs() + r > 0.5 * s {
            return Err(Error::DomainTooSmall);
        }
    }
    let coarse = grid_n_squared(field, s, h)?;
    let fine = grid_n_squared(field, s, 0.5 * h)?;
    let to_n = |q: f64| (q / (4.0 * PI)).max(0.0).sqrt();
    if !coarse.is_finite() || !fine.is_finite() {
        return Ok(GridNReport { n: f64::INFINITY, n_coarse: f64::INFINITY, n_fine: f64::INFINITY, tolerance: f64::INFINITY });
    }
    let extrapolated = (4.0 * fine - coarse) / 3.0;
    let (n_coarse, n_fine) = (to_n(coarse), to_n(fine));
    Ok(GridNReport { n: to_n(extrapolated), n_coarse, n_fine, tolerance: (n_fine - n_coarse).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(s: f64, h: f64) -> ScalarGrid {
        ScalarGrid::from_fn(s, h, |x, y| (-(x * x + y * y)).exp()).unwrap()
    }

    #[test]
    fn dl_of_gaussian_matches_analytic() {
        let mut errs = vec![];
        for h in [0.1, 0.05] {
            let k = gaussian(6.0, h);
            let d = dl_grid(&k).unwrap();
            let exact = ScalarGrid::from_fn(6.0, h, |x, y| {
                let r2 = x * x + y * y;
                -2.0 * r2 * (-r2).exp()
            })
            .unwrap();
            let n = k.nodes_per_side();
            let mut err: f64 = 0.0;
            for j in 1..n - 1 {
                for i in 1..n - 1 {
                    err = err.max((d.get(i, j) - exact.get(i, j)).abs());
                }
            }
            errs.push(err);
        }
        assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn adjoint_identity_and_norms() {
        let k = gaussian(6.0, 6.0 / 256.0);
        let d = dl_grid(&k).unwrap();
        let ds = dlstar_grid(&k).unwrap();
        let max_defect = d.values().iter().zip(ds.values()).zip(k.values()).map(|((a, b), c)| (a + b + 2.0 * c).abs()).fold(0.0, f64::max);
        assert!(max_defect < 3.0 * k.spacing().powi(2));
        let ratio = d.l2_norm() / ds.l2_norm();
        assert!((ratio - 1.0).abs() < 0.02);
        assert!(hardy_ratio(&k).unwrap() < 1.0 - 1e-6);
    }

    #[test]
    fn zero_grid_and_support() {
        let z = ScalarGrid::zeros(2.0, 0.1).unwrap();
        assert_eq!(dl_grid(&z).unwrap().max_abs(), 0.0);
        assert!(hardy_ratio(&z).is_err());
        let wide = ScalarGrid::from_fn(2.0, 0.1, |_, _| 1.0).unwrap();
        assert!(matches!(dl_grid(&wide), Err(Error::DomainTooSmall)));
    }

    #[test]
    fn mollifier_mass_and_resolution() {
        let m = Mollifier::new(0.4, 0.05).unwrap();
        assert!((m.dl_mass() - 1.0).abs() < 1e-12);
        assert!(matches!(Mollifier::new(0.1, 0.05), Err(Error::Resolution { .. })));
        let z = ScalarGrid::zeros(2.0, 0.05).unwrap();
        assert_eq!(mollify_check(&z, 0.4).unwrap().residual, 0.0);
    }

    #[test]
    fn near_optimizer_ratio() {
        let k = NearOptimizer { delta: 0.01, log_a: -40.0, log_b: 40.0, ramp: 10.0 };
        assert!(k.ratio_1d() >= 0.99);
        // moderate cutoff: grid and 1-D routes agree
        let m = NearOptimizer { delta: 0.0, log_a: (0.2f64).ln(), log_b: (4.0f64).ln(), ramp: 1.0 };
        let g = m.grid(6.0, 6.0 / 512.0).unwrap();
        let (a, b) = (hardy_ratio(&g).unwrap(), m.ratio_1d());
        assert!((a - b).abs() < 0.01, "{a} vs {b}");
    }

    #[test]
    fn grid_n_matches_closed_form() {
        let h = CurvatureField::beta_t(3.0, 0.2).unwrap();
        let rep = grid_n(&h, 8.0, 8.0 / 256.0).unwrap();
        let exact = h.compute_n().unwrap();
        assert!((rep.n - exact).abs() < 1e-3, "{} vs {exact}", rep.n);
        assert_eq!(grid_n(&CurvatureField::constant(1.0), 4.0, 0.1).unwrap().n, 0.0);
    }
}
