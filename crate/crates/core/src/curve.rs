//! Uniformly sampled closed planar curves.
//!
//! A [`Loop`] holds `N` positions at `θ_k = 2πk/N`; periodicity is carried by
//! index arithmetic, so there is no duplicated endpoint. Points use complex
//! notation (`x + iy`), which makes the rotation `iz = (-y, x)` a plain
//! multiplication by `i`.
//!
//! Derivatives are spectral: one forward FFT, multiplication of mode `k` by
//! `ik` (Nyquist mode dropped), one inverse FFT. They are exact for
//! trigonometric polynomials of degree `< N/2`, and all integrals over the
//! circle are uniform-grid means.

use std::cell::RefCell;
use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Loops with `L(u)` below this are treated as constants.
pub const CONSTANT_THRESHOLD: f64 = 1e-10;

/// Default sample count.
pub const DEFAULT_SAMPLES: usize = 256;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn fft(buf: &mut [Complex64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

pub(crate) fn ifft(buf: &mut [Complex64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|z| *z *= scale);
}

/// Signed frequency of FFT bin `j`; the Nyquist bin reports `None`.
pub(crate) fn wavenumber(j: usize, n: usize) -> Option<f64> {
    if 2 * j == n {
        None
    } else if 2 * j < n {
        Some(j as f64)
    } else {
        Some(j as f64 - n as f64)
    }
}

/// Apply a Fourier multiplier `m(k)` to a sampled periodic field.
pub(crate) fn apply_multiplier(field: &[Complex64], m: impl Fn(Option<f64>) -> Complex64) -> Vec<Complex64> {
    let n = field.len();
    let mut buf = field.to_vec();
    fft(&mut buf);
    for (j, c) in buf.iter_mut().enumerate() {
        *c *= m(wavenumber(j, n));
    }
    ifft(&mut buf);
    buf
}

/// Spectral derivative of a sampled periodic field.
pub fn spectral_derivative(field: &[Complex64]) -> Vec<Complex64> {
    apply_multiplier(field, |k| match k {
        Some(k) => Complex64::new(0.0, k),
        None => Complex64::new(0.0, 0.0),
    })
}

/// Mean of the real dot products `a_k · b_k`.
pub fn mean_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p.re * q.re + p.im * q.im).sum::<f64>() / a.len() as f64
}

pub(crate) fn rot90(z: Complex64) -> Complex64 {
    Complex64::new(-z.im, z.re)
}

/// Closed curve sampled at `N` equispaced parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct Loop {
    points: Vec<Complex64>,
}

impl Loop {
    pub fn new(points: Vec<Complex64>) -> Result<Self> {
        let n = points.len();
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Config(format!("sample count {n} must be a power of two >= 16")));
        }
        if points.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Config("loop samples must be finite".into()));
        }
        Ok(Self { points })
    }

    pub fn constant(p: Complex64, n: usize) -> Result<Self> {
        Self::new(vec![p; n])
    }

    /// `θ ↦ center + radius·e^{i·degree·θ}`.
    pub fn circle(center: Complex64, radius: f64, degree: i32, n: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Config(format!("circle radius must be positive, got {radius}")));
        }
        if degree == 0 {
            return Err(Error::Config("circle degree must be nonzero".into()));
        }
        let points = (0..n)
            .map(|k| center + Complex64::from_polar(radius, degree as f64 * theta(k, n)))
            .collect();
        Self::new(points)
    }

    /// Random trigonometric polynomial with Gaussian coefficients of size
    /// `|k|^{-decay}` for `1 ≤ |k| ≤ max_mode`, plus a random mean in the unit
    /// square. Deterministic for a fixed seed.
    pub fn random_fourier(seed: u64, max_mode: usize, decay: f64, n: usize) -> Result<Self> {
        if max_mode == 0 || 2 * max_mode >= n {
            return Err(Error::Config(format!("max_mode {max_mode} must lie in [1, N/2)")));
        }
        if !(decay > 1.0) {
            return Err(Error::Config(format!("decay must exceed 1, got {decay}")));
        }
        let coeffs = random_coefficients(seed, max_mode, decay);
        let points = (0..n)
            .map(|k| {
                let t = theta(k, n);
                coeffs.iter().map(|&(m, c)| c * Complex64::from_polar(1.0, m as f64 * t)).sum()
            })
            .collect();
        Self::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Complex64> {
        self.points
    }

    pub fn theta(&self, k: usize) -> f64 {
        theta(k, self.len())
    }

    /// `ū`, the mean over the circle.
    pub fn mean(&self) -> Complex64 {
        self.points.iter().sum::<Complex64>() / self.len() as f64
    }

    pub fn derivative(&self) -> Vec<Complex64> {
        spectral_derivative(&self.points)
    }

    /// Second derivative as the square of the first-derivative operator, so
    /// that the Nyquist convention matches [`Loop::derivative`].
    pub fn second_derivative(&self) -> Vec<Complex64> {
        apply_multiplier(&self.points, |k| match k {
            Some(k) => Complex64::new(-k * k, 0.0),
            None => Complex64::new(0.0, 0.0),
        })
    }

    /// `L(u) = (⨍|u'|²)^{1/2}`.
    pub fn seminorm_l(&self) -> f64 {
        let d = self.derivative();
        mean_dot(&d, &d).sqrt()
    }

    /// `ρ_u = 2πL(u)`, the radius of the enclosing disc about `ū`.
    pub fn rho(&self) -> f64 {
        TAU * self.seminorm_l()
    }

    pub fn is_constant(&self) -> bool {
        self.seminorm_l() < CONSTANT_THRESHOLD
    }

    /// `⨍|u'|`.
    pub fn mean_speed(&self) -> f64 {
        let d = self.derivative();
        d.iter().map(|z| z.norm()).sum::<f64>() / d.len() as f64
    }

    pub fn max_deviation_from_mean(&self) -> f64 {
        let m = self.mean();
        self.points.iter().map(|z| (z - m).norm()).fold(0.0, f64::max)
    }

    pub fn translate(&self, p: Complex64) -> Self {
        Self { points: self.points.iter().map(|z| z + p).collect() }
    }

    /// Multiply every sample by the complex factor `w` (rotation and scaling
    /// about the origin).
    pub fn scale(&self, w: Complex64) -> Self {
        Self { points: self.points.iter().map(|z| z * w).collect() }
    }

    /// `ū + s(u - ū)`.
    pub fn dilate_about_mean(&self, s: f64) -> Self {
        let m = self.mean();
        Self { points: self.points.iter().map(|z| m + (z - m) * s).collect() }
    }

    /// `u + s·φ` for a sampled field `φ`.
    pub fn add_scaled(&self, field: &[Complex64], s: f64) -> Self {
        Self { points: self.points.iter().zip(field).map(|(z, f)| z + f * s).collect() }
    }

    /// Fourier resampling to `n` points (truncating modes when shrinking).
    pub fn resample(&self, n: usize) -> Result<Self> {
        let m = self.len();
        let mut spec = self.points.clone();
        fft(&mut spec);
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        let keep = (m.min(n) / 2) as i64;
        for (j, c) in spec.iter().enumerate() {
            let Some(k) = wavenumber(j, m) else { continue };
            let k = k as i64;
            if k.abs() < keep {
                let dst = k.rem_euclid(n as i64) as usize;
                out[dst] = *c * (n as f64 / m as f64);
            }
        }
        ifft(&mut out);
        Self::new(out)
    }

    /// H¹ distance with the norm `‖v‖² = L(v)² + |v̄|²`.
    pub fn h1_distance(&self, other: &Loop) -> f64 {
        let diff: Vec<Complex64> = self.points.iter().zip(&other.points).map(|(a, b)| a - b).collect();
        let d = spectral_derivative(&diff);
        let mean = diff.iter().sum::<Complex64>() / diff.len() as f64;
        (mean_dot(&d, &d) + mean.norm_sqr()).sqrt()
    }

    /// Linear interpolation `(1-s)·self + s·other`.
    pub fn lerp(&self, other: &Loop, s: f64) -> Self {
        Self { points: self.points.iter().zip(&other.points).map(|(a, b)| a * (1.0 - s) + b * s).collect() }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        self.write_csv_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_to<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        for (k, z) in self.points.iter().enumerate() {
            w.serialize(LoopRow { theta: self.theta(k), x: z.re, y: z.im })?;
        }
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv_from(std::fs::File::open(path)?)
    }

    pub fn read_csv_from<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["theta", "x", "y"] {
            return Err(Error::Config(format!("loop CSV header must be theta,x,y, got {headers:?}")));
        }
        let mut points = Vec::new();
        for (k, row) in rd.deserialize::<LoopRow>().enumerate() {
            let row = row?;
            if !(0.0..TAU).contains(&row.theta) {
                return Err(Error::Config(format!("row {k}: theta {} outside [0, 2π)", row.theta)));
            }
            points.push(Complex64::new(row.x, row.y));
        }
        Self::new(points)
    }
}

#[derive(Serialize, Deserialize)]
struct LoopRow {
    theta: f64,
    x: f64,
    y: f64,
}

fn theta(k: usize, n: usize) -> f64 {
    TAU * k as f64 / n as f64
}

/// Coefficients `(mode, c_mode)` used by [`Loop::random_fourier`]; mode 0 is
/// the mean.
pub fn random_coefficients(seed: u64, max_mode: usize, decay: f64) -> Vec<(i64, Complex64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![(0, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))];
    for m in 1..=max_mode as i64 {
        for k in [m, -m] {
            let amp = (m as f64).powf(-decay);
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            out.push((k, Complex64::new(re, im) * amp));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn rejects_bad_sample_counts() {
        assert!(Loop::new(vec![c(0.0, 0.0); 8]).is_err());
        assert!(Loop::new(vec![c(0.0, 0.0); 48]).is_err());
        assert!(Loop::circle(c(0.0, 0.0), -1.0, 1, 64).is_err());
        assert!(Loop::circle(c(0.0, 0.0), 1.0, 0, 64).is_err());
    }

    #[test]
    fn circle_length_and_mean() {
        for n in [1, 2, 3] {
            let u = Loop::circle(c(0.0, 0.0), 1.0, n, 256).unwrap();
            assert!((u.seminorm_l() - n as f64).abs() < 1e-12);
        }
        let p = c(0.7, -2.0);
        let u = Loop::circle(p, 2.5, 1, 256).unwrap();
        assert!((u.seminorm_l() - 2.5).abs() < 1e-12);
        assert!((u.mean() - p).norm() < 1e-12);
    }

    #[test]
    fn derivative_of_modes() {
        let cst = Loop::constant(c(3.0, 1.0), 64).unwrap();
        assert!(cst.derivative().iter().all(|z| z.norm() < 1e-14));
        assert_eq!(cst.seminorm_l(), 0.0);
        assert!(cst.is_constant());
        for m in [1, 3] {
            let u = Loop::circle(c(0.0, 0.0), 1.0, m, 128).unwrap();
            let d = u.derivative();
            for (k, z) in d.iter().enumerate() {
                let exact = c(0.0, m as f64) * Complex64::from_polar(1.0, m as f64 * u.theta(k));
                assert!((z - exact).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn random_loop_matches_parseval() {
        let (seed, modes, decay) = (11, 8, 2.0);
        let u = Loop::random_fourier(seed, modes, decay, 256).unwrap();
        let parseval: f64 = random_coefficients(seed, modes, decay)
            .iter()
            .map(|&(k, c)| (k * k) as f64 * c.norm_sqr())
            .sum();
        assert!((u.seminorm_l() - parseval.sqrt()).abs() < 1e-12);
        assert_eq!(u, Loop::random_fourier(seed, modes, decay, 256).unwrap());
        assert!(u.seminorm_l() > 0.0);
    }

    #[test]
    fn doubling_resolution_keeps_length() {
        let u = Loop::random_fourier(5, 10, 1.5, 64).unwrap();
        let v = u.resample(128).unwrap();
        assert!((u.seminorm_l() - v.seminorm_l()).abs() < 1e-12);
        let w = Loop::random_fourier(5, 10, 1.5, 128).unwrap();
        assert!((v.seminorm_l() - w.seminorm_l()).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let u = Loop::random_fourier(3, 4, 2.0, 32).unwrap();
        let mut w = csv::Writer::from_writer(vec![]);
        u.write_csv_to(&mut w).unwrap();
        let bytes = w.into_inner().unwrap();
        assert!(bytes.starts_with(b"theta,x,y\n"));
        let v = Loop::read_csv_from(&bytes[..]).unwrap();
        assert_eq!(u, v);
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let text = "t,x,y\n0,1,0\n";
        assert!(Loop::read_csv_from(text.as_bytes()).is_err());
    }
}
