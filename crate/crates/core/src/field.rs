//! Curvature fields `H : ℝ² → ℝ` and their scalar invariants.
//!
//! Fields are declarative: a radial profile given by closed-form pieces, an
//! optional compactly supported bump, and a global rescaling
//! `H_λ(z) = H(z/λ)/λ`. Closed forms are what let the invariants `N_H`, `M_H`
//! and `C_H` be computed to quadrature accuracy.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Radial profile in unscaled coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Constant(f64),
    /// `1 + t r^{-β}` for `r ≥ 1`, `1 + t(2 - r^β)` for `r < 1`.
    BetaT { beta: f64, t: f64 },
    /// `1 + 6/(3-ε²)·ψ_ε(r)` with the logarithmic plateau profile `ψ_ε`.
    Eps { eps: f64 },
}

impl Profile {
    fn eps_scale(eps: f64) -> f64 {
        6.0 / (3.0 - eps * eps)
    }

    fn psi(eps: f64, r: f64) -> f64 {
        if r <= eps {
            1.0 + eps.ln().abs() - r / eps
        } else if r <= 1.0 {
            r.ln().abs()
        } else {
            0.0
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match *self {
            Profile::Constant(c) => c,
            Profile::BetaT { beta, t } => {
                if r >= 1.0 {
                    1.0 + t * r.powf(-beta)
                } else {
                    1.0 + t * (2.0 - r.powf(beta))
                }
            }
            Profile::Eps { eps } => 1.0 + Self::eps_scale(eps) * Self::psi(eps, r),
        }
    }

    /// `r·H'(r)`; at a breakpoint this is the right limit.
    pub fn dl(&self, r: f64) -> f64 {
        match *self {
            Profile::Constant(_) => 0.0,
            Profile::BetaT { beta, t } => {
                if r >= 1.0 {
                    -beta * t * r.powf(-beta)
                } else {
                    -beta * t * r.powf(beta)
                }
            }
            Profile::Eps { eps } => {
                let s = Self::eps_scale(eps);
                if r < eps {
                    -s * r / eps
                } else if r < 1.0 {
                    -s
                } else {
                    0.0
                }
            }
        }
    }

    /// Left limit of `r·H'(r)`.
    pub fn dl_left(&self, r: f64) -> f64 {
        match *self {
            Profile::BetaT { beta, t } if r <= 1.0 => -beta * t * r.powf(beta),
            Profile::BetaT { .. } => self.dl(r),
            Profile::Eps { eps } => {
                let s = Self::eps_scale(eps);
                if r <= eps {
                    -s * r / eps
                } else if r <= 1.0 {
                    -s
                } else {
                    0.0
                }
            }
            Profile::Constant(_) => 0.0,
        }
    }

    /// `∫₀^r H(ρ) ρ dρ`.
    pub fn moment(&self, r: f64) -> f64 {
        match *self {
            Profile::Constant(c) => 0.5 * c * r * r,
            Profile::BetaT { beta, t } => {
                let inner = |r: f64| 0.5 * (1.0 + 2.0 * t) * r * r - t * r.powf(beta + 2.0) / (beta + 2.0);
                if r <= 1.0 {
                    inner(r)
                } else {
                    let tail = if (beta - 2.0).abs() < 1e-14 {
                        t * r.ln()
                    } else {
                        t * (r.powf(2.0 - beta) - 1.0) / (2.0 - beta)
                    };
                    inner(1.0) + 0.5 * (r * r - 1.0) + tail
                }
            }
            Profile::Eps { eps } => {
                let s = Self::eps_scale(eps);
                let le = eps.ln().abs();
                let inner = |r: f64| (1.0 + le) * r * r / 2.0 - r * r * r / (3.0 * eps);
                let mid = |r: f64| -0.5 * r * r * r.ln() + 0.25 * r * r;
                let psi_moment = if r <= eps {
                    inner(r)
                } else if r <= 1.0 {
                    inner(eps) + mid(r) - mid(eps)
                } else {
                    inner(eps) + mid(1.0) - mid(eps)
                };
                0.5 * r * r + s * psi_moment
            }
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Profile::Constant(_) => vec![],
            Profile::BetaT { .. } => vec![1.0],
            Profile::Eps { eps } => vec![eps, 1.0],
        }
    }

    pub fn asymptote(&self) -> f64 {
        match *self {
            Profile::Constant(c) => c,
            _ => 1.0,
        }
    }

    /// Radius beyond which `r H'(r)` vanishes identically, if any.
    fn dl_support(&self) -> Option<f64> {
        match *self {
            Profile::Constant(_) => Some(0.0),
            Profile::BetaT { .. } => None,
            Profile::Eps { .. } => Some(1.0),
        }
    }
}

/// `amplitude·exp(1 - 1/(1-ρ²))` with `ρ = |z - center|/radius`; peak value
/// equals `amplitude`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: Complex64,
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn value(&self, z: Complex64) -> f64 {
        let rho2 = (z - self.center).norm_sqr() / (self.radius * self.radius);
        if rho2 >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - 1.0 / (1.0 - rho2)).exp()
        }
    }

    pub fn gradient(&self, z: Complex64) -> Complex64 {
        let w = z - self.center;
        let r2 = self.radius * self.radius;
        let rho2 = w.norm_sqr() / r2;
        if rho2 >= 1.0 {
            return Complex64::new(0.0, 0.0);
        }
        let q = 1.0 - rho2;
        let b = self.amplitude * (1.0 - 1.0 / q).exp();
        w * (-2.0 * b / (r2 * q * q))
    }

    /// Parameter interval `[s0, s1] ⊂ [0, 1]` where the ray `s ↦ sz` meets
    /// the support disc.
    fn ray_window(&self, z: Complex64) -> Option<(f64, f64)> {
        let a = z.norm_sqr();
        if a == 0.0 {
            return None;
        }
        let b = z.re * self.center.re + z.im * self.center.im;
        let c = self.center.norm_sqr() - self.radius * self.radius;
        let disc = b * b - a * c;
        if disc <= 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        let s0 = ((b - sq) / a).max(0.0);
        let s1 = ((b + sq) / a).min(1.0);
        (s1 > s0).then_some((s0, s1))
    }

    /// `(∫₀¹ B(sz) s ds, ∫₀¹ s² ∇B(sz) ds)` by composite Gauss–Legendre on the
    /// exact support window; smooth in `z`.
    fn ray_integrals(&self, z: Complex64) -> (f64, Complex64) {
        let Some((s0, s1)) = self.ray_window(z) else {
            return (0.0, Complex64::new(0.0, 0.0));
        };
        let (x, w) = gl_rule();
        const PANELS: usize = 6;
        let h = (s1 - s0) / PANELS as f64;
        let mut i0 = 0.0;
        let mut i1 = Complex64::new(0.0, 0.0);
        for p in 0..PANELS {
            let c = s0 + (p as f64 + 0.5) * h;
            for (xi, wi) in x.iter().zip(w) {
                let s = c + 0.5 * h * xi;
                let wt = 0.5 * h * wi;
                let pt = z * s;
                i0 += wt * self.value(pt) * s;
                i1 += self.gradient(pt) * (wt * s * s);
            }
        }
        (i0, i1)
    }
}

fn gl_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: std::sync::OnceLock<(Vec<f64>, Vec<f64>)> = std::sync::OnceLock::new();
    RULE.get_or_init(|| quad::gauss_legendre(24))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Constant,
    RadialProfile,
    RadialPlusBump,
}

/// A curvature field `H(z) = base(z/λ)/λ` with `base = profile + bump`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureField {
    profile: Profile,
    bump: Option<Bump>,
    scale: f64,
}

/// Value of `r·H'(r)` at a radius, flagged when the radius is a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialDerivative {
    pub value: f64,
    pub at_breakpoint: bool,
}

impl CurvatureField {
    pub fn constant(value: f64) -> Self {
        Self { profile: Profile::Constant(value), bump: None, scale: 1.0 }
    }

    pub fn beta_t(beta: f64, t: f64) -> Result<Self> {
        Self::from_parts(Profile::BetaT { beta, t }, None, 1.0)
    }

    pub fn eps(eps: f64) -> Result<Self> {
        Self::from_parts(Profile::Eps { eps }, None, 1.0)
    }

    pub fn with_bump(self, center: Complex64, radius: f64, amplitude: f64) -> Result<Self> {
        // bump parameters are given in the field's own coordinates
        let s = self.scale;
        let bump = Bump { center: center / s, radius: radius / s, amplitude: amplitude * s };
        Self::from_parts(self.profile, Some(bump), s)
    }

    pub fn from_parts(profile: Profile, bump: Option<Bump>, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("scale must be positive, got {scale}")));
        }
        match profile {
            Profile::Constant(c) if !c.is_finite() => {
                return Err(Error::Config("constant field must be finite".into()))
            }
            Profile::BetaT { beta, t } if !(beta > 0.0 && beta.is_finite() && t.is_finite()) => {
                return Err(Error::Config(format!("beta_t needs beta > 0 and finite t, got ({beta}, {t})")))
            }
            Profile::Eps { eps } if !(eps > 0.0 && eps < 1.0) => {
                return Err(Error::Config(format!("eps must lie in (0, 1), got {eps}")))
            }
            _ => {}
        }
        if let Some(b) = bump {
            if !(b.radius > 0.0 && b.radius.is_finite() && b.amplitude.is_finite()) {
                return Err(Error::Config("bump needs positive radius and finite amplitude".into()));
            }
        }
        let field = Self { profile, bump, scale };
        for &bp in &profile.breakpoints() {
            let below = profile.value(bp * (1.0 - 1e-12));
            let above = profile.value(bp);
            if (below - above).abs() > 1e-9 {
                return Err(Error::Config(format!("profile discontinuous at r = {bp}")));
            }
        }
        Ok(field)
    }

    pub fn kind(&self) -> FieldKind {
        match (self.profile, self.bump) {
            (_, Some(_)) => FieldKind::RadialPlusBump,
            (Profile::Constant(_), None) => FieldKind::Constant,
            _ => FieldKind::RadialProfile,
        }
    }

    pub fn is_radial(&self) -> bool {
        self.bump.is_none()
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn bump(&self) -> Option<Bump> {
        self.bump
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `λ∞`, the value `H` tends to at infinity.
    pub fn asymptote(&self) -> f64 {
        self.profile.asymptote() / self.scale
    }

    /// Breakpoints of the radial part, in field coordinates.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.profile.breakpoints().into_iter().map(|b| b * self.scale).collect()
    }

    pub fn eval(&self, z: Complex64) -> f64 {
        let w = z / self.scale;
        let mut v = self.profile.value(w.norm());
        if let Some(b) = &self.bump {
            v += b.value(w);
        }
        v / self.scale
    }

    /// Radial part only, `H(r)` along any ray.
    pub fn eval_radial(&self, r: f64) -> f64 {
        self.profile.value(r / self.scale) / self.scale
    }

    /// `∇H(z)·z` from the closed forms (right limits at breakpoints).
    pub fn dl_at(&self, z: Complex64) -> f64 {
        let w = z / self.scale;
        let mut v = self.profile.dl(w.norm());
        if let Some(b) = &self.bump {
            let g = b.gradient(w);
            v += g.re * w.re + g.im * w.im;
        }
        v / self.scale
    }

    /// `r·H'(r)` of a radial field.
    pub fn radial_dl(&self, r: f64) -> Result<RadialDerivative> {
        if !self.is_radial() {
            return Err(Error::NotRadial);
        }
        let w = r / self.scale;
        let at_breakpoint = self.profile.breakpoints().contains(&w);
        Ok(RadialDerivative { value: self.profile.dl(w) / self.scale, at_breakpoint })
    }

    fn radial_dl_left(&self, r: f64) -> f64 {
        self.profile.dl_left(r / self.scale) / self.scale
    }

    /// `∫₀^r H_radial(ρ) ρ dρ` in field coordinates.
    pub fn radial_moment(&self, r: f64) -> f64 {
        self.scale * self.profile.moment(r / self.scale)
    }

    /// Vector potential `Q(z) = z∫₀¹ H(sz) s ds` with `div Q = H`, and its
    /// Jacobian as `(Q, [∂Q/∂x, ∂Q/∂y])`.
    pub fn potential(&self, z: Complex64) -> (Complex64, [Complex64; 2]) {
        let w = z / self.scale;
        let r2 = w.norm_sqr();
        let (q_coef, dq_coef) = if r2 < 1e-24 {
            (0.5 * self.profile.value(0.0), 0.0)
        } else {
            let r = r2.sqrt();
            let m = self.profile.moment(r);
            let k = self.profile.value(r);
            // Q = w·m/r², ∇(m/r²) = (k/r² - 2m/r⁴)·w
            (m / r2, k / r2 - 2.0 * m / (r2 * r2))
        };
        let mut q = w * q_coef;
        let mut dx = Complex64::new(q_coef, 0.0) + w * (dq_coef * w.re);
        let mut dy = Complex64::new(0.0, q_coef) + w * (dq_coef * w.im);
        if let Some(b) = &self.bump {
            let (i0, gi) = b.ray_integrals(w);
            q += w * i0;
            dx += Complex64::new(i0, 0.0) + w * gi.re;
            dy += Complex64::new(0.0, i0) + w * gi.im;
        }
        let s = self.scale;
        (q, [dx / s, dy / s])
    }

    /// `H_λ(z) = H(z/λ)/λ` for `λ > 0`.
    pub fn rescale(&self, lambda: f64) -> Result<Self> {
        if lambda == 0.0 {
            return Err(Error::Config("rescale factor must be nonzero".into()));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Config("negative rescale factors are not supported; reverse the loop orientation instead".into()));
        }
        if let (Profile::Constant(c), None) = (self.profile, self.bump) {
            return Ok(Self::constant(c / (self.scale * lambda)));
        }
        Self::from_parts(self.profile, self.bump, self.scale * lambda)
    }

    /// Whether `(H - λ∞)·r → 0` along a test grid of radii (hypothesis (H₂)
    /// with asymptote `λ∞`).
    pub fn decays(&self) -> bool {
        let probe = |r: f64| (self.eval_radial(r) - self.asymptote()).abs() * r;
        let far = probe(1e8 * self.scale);
        let near = probe(1e4 * self.scale);
        far < 1e-6 && far <= near + 1e-15
    }

    /// `N_H = (4π)^{-1/2}‖∇H·z‖₂`; for radial fields
    /// `N² = ½∫₀^∞ (rH'(r))² r dr`. Returns `f64::INFINITY` when the tail does
    /// not converge.
    pub fn compute_n(&self) -> Result<f64> {
        if !self.is_radial() {
            return Err(Error::NotRadial);
        }
        let breaks = self.breakpoints();
        let f = |r: f64| {
            let d = self.profile.dl(r / self.scale) / self.scale;
            d * d * r
        };
        let support = self.profile.dl_support().map(|s| s * self.scale);
        let outer = support.unwrap_or_else(|| 2.0 * breaks.last().copied().unwrap_or(self.scale));
        if outer == 0.0 {
            return Ok(0.0);
        }
        let body = quad::integrate_pieces(f, 0.0, outer, &breaks, 1e-13);
        if !body.converged {
            return Ok(f64::INFINITY);
        }
        let mut total = body.value;
        if support.is_none() {
            // s = 1/r on (outer, ∞)
            let tail = quad::integrate(
                |x: f64| if x == 0.0 { 0.0 } else { f(1.0 / x) / (x * x) },
                0.0,
                1.0 / outer,
                1e-13,
                0.0,
            );
            if !tail.converged || !tail.value.is_finite() {
                return Ok(f64::INFINITY);
            }
            total += tail.value;
        }
        Ok((0.5 * total).sqrt())
    }

    /// `M_H = sup |(∇H·z) z|`, i.e. `sup_r r·|rH'(r)|` for radial fields.
    pub fn compute_m(&self) -> Result<f64> {
        if !self.is_radial() {
            return Err(Error::NotRadial);
        }
        Ok(radial_sup(
            |r| r * self.radial_dl(r).map(|d| d.value).unwrap_or(0.0).abs(),
            |r| r * self.radial_dl_left(r).abs(),
            &self.breakpoints(),
            self.scale,
        ))
    }

    /// `C_H = sup |(H(z) - 1) z|`. Radial fields use a refined radial grid;
    /// bump fields a refined polar sampling.
    pub fn compute_c(&self) -> f64 {
        if self.is_radial() {
            let f = |r: f64| r * (self.eval_radial(r) - 1.0).abs();
            return radial_sup(f, |r| f(r * (1.0 - 1e-15)), &self.breakpoints(), self.scale);
        }
        polar_sup(|z| z.norm() * (self.eval(z) - 1.0).abs(), self.scale)
    }

    /// Checks hypothesis (H₃): `min H ≥ 1` on `D_{2(1+N)}(p̃)`, sampled.
    pub fn check_h3(&self, center: Complex64, n_h: f64, samples: usize) -> H3Report {
        let radius = 2.0 * (1.0 + n_h);
        let mut min_value = f64::INFINITY;
        let m = samples.max(8);
        for i in 0..=m {
            for j in 0..=m {
                let x = -radius + 2.0 * radius * i as f64 / m as f64;
                let y = -radius + 2.0 * radius * j as f64 / m as f64;
                if x * x + y * y < radius * radius {
                    min_value = min_value.min(self.eval(center + Complex64::new(x, y)));
                }
            }
        }
        H3Report { center: [center.re, center.im], radius, min_value, holds: min_value >= 1.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct H3Report {
    pub center: [f64; 2],
    pub radius: f64,
    pub min_value: f64,
    pub holds: bool,
}

/// Supremum of `f` over `r > 0` on a logarithmic grid with breakpoints
/// (and their left limits), refined by golden-section search. Reports
/// infinity if the values still grow across the last decade.
fn radial_sup(f: impl Fn(f64) -> f64, f_left: impl Fn(f64) -> f64, breaks: &[f64], scale: f64) -> f64 {
    const DECADES: i32 = 8;
    const PER_DECADE: usize = 400;
    let n = 2 * DECADES as usize * PER_DECADE;
    let grid: Vec<f64> = (0..=n)
        .map(|i| scale * 10f64.powf(-(DECADES as f64) + i as f64 / PER_DECADE as f64))
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&r| f(r)).collect();
    let last = vals[n];
    let prev = vals[n - PER_DECADE];
    if last > prev * (1.0 + 1e-3) && last > 1e-12 {
        return f64::INFINITY;
    }
    let mut best = vals.iter().copied().fold(0.0, f64::max);
    for &b in breaks {
        best = best.max(f(b)).max(f_left(b));
    }
    // refine around interior grid maxima
    for i in 1..n {
        if vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1] && vals[i] > 0.0 {
            best = best.max(golden_max(&f, grid[i - 1], grid[i + 1]));
        }
    }
    best
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-14 * b.abs().max(1e-300) {
            break;
        }
    }
    fc.max(fd)
}

fn polar_sup(f: impl Fn(Complex64) -> f64, scale: f64) -> f64 {
    const ANGLES: usize = 128;
    const RADII: usize = 1200;
    let radius = |i: usize| scale * 10f64.powf(-4.0 + 10.0 * i as f64 / RADII as f64);
    let angle = |j: usize| 2.0 * PI * j as f64 / ANGLES as f64;
    let mut best = (0.0, 0, 0);
    for i in 0..=RADII {
        for j in 0..ANGLES {
            let v = f(Complex64::from_polar(radius(i), angle(j)));
            if v > best.0 {
                best = (v, i, j);
            }
        }
    }
    if best.1 == RADII {
        return f64::INFINITY;
    }
    // coordinate refinement in (log r, angle)
    let (mut lr, mut th) = (radius(best.1).ln(), angle(best.2));
    let (mut dr, mut dth) = (10f64.ln() * 10.0 / RADII as f64, 2.0 * PI / ANGLES as f64);
    let mut val = best.0;
    for _ in 0..6 {
        let fr = |x: f64| f(Complex64::from_polar(x.exp(), th));
        let (x, v) = golden_argmax(&fr, lr - dr, lr + dr);
        if v > val {
            lr = x;
            val = v;
        }
        let ft = |x: f64| f(Complex64::from_polar(lr.exp(), x));
        let (x, v) = golden_argmax(&ft, th - dth, th + dth);
        if v > val {
            th = x;
            val = v;
        }
        dr *= 0.5;
        dth *= 0.5;
    }
    val
}

fn golden_argmax(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// JSON field specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    RadialBetaT {
        beta: f64,
        t: f64,
        #[serde(default = "unit", skip_serializing_if = "is_unit")]
        scale: f64,
    },
    RadialEps {
        eps: f64,
        #[serde(default = "unit", skip_serializing_if = "is_unit")]
        scale: f64,
    },
    /// `base + bump`, where the bump is given in the base field's coordinates.
    RadialPlusBump {
        base: Box<FieldSpec>,
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
    },
}

fn unit() -> f64 {
    1.0
}

fn is_unit(x: &f64) -> bool {
    *x == 1.0
}

impl TryFrom<&FieldSpec> for CurvatureField {
    type Error = Error;

    fn try_from(spec: &FieldSpec) -> Result<Self> {
        match spec {
            FieldSpec::Constant { value } => CurvatureField::from_parts(Profile::Constant(*value), None, 1.0),
            FieldSpec::RadialBetaT { beta, t, scale } => {
                CurvatureField::from_parts(Profile::BetaT { beta: *beta, t: *t }, None, *scale)
            }
            FieldSpec::RadialEps { eps, scale } => CurvatureField::from_parts(Profile::Eps { eps: *eps }, None, *scale),
            FieldSpec::RadialPlusBump { base, center, radius, amplitude } => {
                let base = CurvatureField::try_from(base.as_ref())?;
                if base.bump.is_some() {
                    return Err(Error::Config("radial_plus_bump base must be radial".into()));
                }
                base.with_bump(Complex64::new(center[0], center[1]), *radius, *amplitude)
            }
        }
    }
}

impl From<&CurvatureField> for FieldSpec {
    fn from(f: &CurvatureField) -> Self {
        let base = match f.profile {
            Profile::Constant(c) => FieldSpec::Constant { value: c / f.scale },
            Profile::BetaT { beta, t } => FieldSpec::RadialBetaT { beta, t, scale: f.scale },
            Profile::Eps { eps } => FieldSpec::RadialEps { eps, scale: f.scale },
        };
        match f.bump {
            None => base,
            Some(b) => FieldSpec::RadialPlusBump {
                base: Box::new(base),
                center: [b.center.re * f.scale, b.center.im * f.scale],
                radius: b.radius * f.scale,
                amplitude: b.amplitude / f.scale,
            },
        }
    }
}

impl CurvatureField {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: FieldSpec = serde_json::from_str(text)?;
        Self::try_from(&spec)
    }

    pub fn to_spec(&self) -> FieldSpec {
        FieldSpec::from(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn beta_t_continuous_at_unit_circle() {
        let h = CurvatureField::beta_t(2.0, 0.5).unwrap();
        assert!((h.eval(c(1.0, 0.0)) - 1.5).abs() < 1e-15);
        assert!((h.eval_radial(1.0 - 1e-13) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn eps_field_is_one_outside_unit_disc() {
        let h = CurvatureField::eps(0.5).unwrap();
        assert_eq!(h.eval(c(1.2, 0.3)), 1.0);
        assert_eq!(h.eval(c(0.0, 1.0)), 1.0);
        assert_eq!(CurvatureField::constant(1.0).eval(c(3.0, 4.0)), 1.0);
    }

    #[test]
    fn radial_derivative_values() {
        let h = CurvatureField::beta_t(2.0, 0.5).unwrap();
        let left = h.radial_dl(1.0 - 1e-12).unwrap();
        assert!((left.value + 1.0).abs() < 1e-10);
        let at = h.radial_dl(1.0).unwrap();
        assert!(at.at_breakpoint);
        assert!((at.value + 1.0).abs() < 1e-15);
        assert_eq!(CurvatureField::constant(2.0).radial_dl(0.4).unwrap().value, 0.0);
        let e = CurvatureField::eps(0.5).unwrap();
        assert!((e.radial_dl(0.7).unwrap().value + 6.0 / 2.75).abs() < 1e-14);
    }

    #[test]
    fn bump_fields_refuse_radial_quantities() {
        let h = CurvatureField::constant(1.0).with_bump(c(0.2, 0.0), 1.0, 0.3).unwrap();
        assert_eq!(h.kind(), FieldKind::RadialPlusBump);
        assert!(matches!(h.compute_n(), Err(Error::NotRadial)));
        assert!(matches!(h.radial_dl(0.5), Err(Error::NotRadial)));
    }

    #[test]
    fn moment_matches_quadrature() {
        for h in [
            CurvatureField::beta_t(2.0, 0.5).unwrap(),
            CurvatureField::beta_t(3.0, 0.2).unwrap(),
            CurvatureField::eps(0.25).unwrap(),
            CurvatureField::beta_t(1.5, 0.3).unwrap().rescale(2.0).unwrap(),
        ] {
            for r in [0.1, 0.5, 0.999, 1.7, 4.0] {
                let oracle = quad::integrate_pieces(|x| h.eval_radial(x) * x, 0.0, r, &h.breakpoints(), 1e-14);
                assert!((h.radial_moment(r) - oracle.value).abs() < 1e-11, "{h:?} r={r}");
            }
        }
    }

    #[test]
    fn potential_divergence_is_field() {
        let h = CurvatureField::beta_t(3.0, 0.2).unwrap().with_bump(c(0.3, -0.2), 0.8, 0.4).unwrap();
        for z in [c(0.1, 0.2), c(0.5, -0.4), c(1.3, 0.7), c(-0.2, -0.9)] {
            let (_, [dx, dy]) = h.potential(z);
            let div = dx.re + dy.im;
            assert!((div - h.eval(z)).abs() < 1e-9, "z={z} div={div} H={}", h.eval(z));
            // Jacobian against central differences
            let e = 1e-6;
            let fdx = (h.potential(z + e).0 - h.potential(z - e).0) / (2.0 * e);
            let fdy = (h.potential(z + c(0.0, e)).0 - h.potential(z - c(0.0, e)).0) / (2.0 * e);
            assert!((fdx - dx).norm() < 1e-7 && (fdy - dy).norm() < 1e-7);
        }
    }

    #[test]
    fn json_specs() {
        let h = CurvatureField::from_json(r#"{"kind": "radial_beta_t", "beta": 3.0, "t": 0.2}"#).unwrap();
        assert_eq!(h, CurvatureField::beta_t(3.0, 0.2).unwrap());
        let h = CurvatureField::from_json(r#"{"kind": "radial_eps", "eps": 0.5}"#).unwrap();
        assert_eq!(h.kind(), FieldKind::RadialProfile);
        let h = CurvatureField::from_json(r#"{"kind": "constant", "value": 1.0}"#).unwrap();
        assert_eq!(h.kind(), FieldKind::Constant);
        let text = r#"{"kind": "radial_plus_bump", "base": {"kind": "constant", "value": 1.0},
                       "center": [0.5, 0.0], "radius": 2.0, "amplitude": 0.3}"#;
        let h = CurvatureField::from_json(text).unwrap();
        assert!((h.eval(c(0.5, 0.0)) - 1.3).abs() < 1e-15);
        assert!(CurvatureField::from_json(r#"{"kind": "constant", "value": 1.0, "bogus": 2}"#).is_err());
        assert!(CurvatureField::from_json(r#"{"kind": "radial_eps", "eps": 1.5}"#).is_err());
    }

    #[test]
    fn spec_round_trip_through_rescale() {
        let h = CurvatureField::beta_t(2.0, 0.5).unwrap().with_bump(c(1.0, 1.0), 0.5, 0.2).unwrap();
        let g = h.rescale(2.0).unwrap();
        let back = CurvatureField::try_from(&g.to_spec()).unwrap();
        for z in [c(0.3, 0.1), c(2.0, 2.1), c(-1.0, 0.5)] {
            assert!((back.eval(z) - g.eval(z)).abs() < 1e-14);
        }
    }

    #[test]
    fn rescale_rules() {
        assert_eq!(CurvatureField::constant(1.0).rescale(2.0).unwrap(), CurvatureField::constant(0.5));
        let h = CurvatureField::beta_t(2.0, 0.5).unwrap();
        assert_eq!(h.rescale(1.0).unwrap(), h);
        assert!(h.rescale(0.0).is_err());
        assert!(h.rescale(-1.0).is_err());
        let g = h.rescale(2.0).unwrap();
        assert!((g.eval(c(1.0, 0.0)) - 0.5 * h.eval(c(0.5, 0.0))).abs() < 1e-15);
    }

    #[test]
    fn decay_flag() {
        assert!(CurvatureField::beta_t(2.0, 0.5).unwrap().decays());
        assert!(CurvatureField::eps(0.5).unwrap().decays());
        assert!(!CurvatureField::beta_t(0.5, 0.5).unwrap().decays());
    }

    #[test]
    fn divergent_n_and_m_are_infinite() {
        let h = CurvatureField::beta_t(0.8, 0.3).unwrap();
        assert_eq!(h.compute_n().unwrap(), f64::INFINITY);
        assert_eq!(h.compute_m().unwrap(), f64::INFINITY);
        assert_eq!(CurvatureField::constant(2.0).compute_c(), f64::INFINITY);
    }

    #[test]
    fn h3_checker() {
        let h = CurvatureField::beta_t(3.0, 0.2).unwrap();
        let n = h.compute_n().unwrap();
        assert!(h.check_h3(c(0.0, 0.0), n, 64).holds);
        let well = CurvatureField::constant(0.9).with_bump(c(0.0, 0.0), 1.0, 0.5).unwrap();
        assert!(!well.check_h3(c(0.0, 0.0), 0.1, 64).holds);
    }
}
