//! The energy `E_H = L + A_H` and its gradient.
//!
//! The gradient is the exact derivative of the discrete energy under the
//! mean pairing `⟨a, b⟩ = ⨍ a·b`, so `⟨∇E(u), φ⟩` agrees with difference
//! quotients of [`energy`] up to rounding.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::area::{area_a1, area_ak_line, Shifted, Weight};
use crate::curve::{mean_dot, rot90, spectral_derivative, Loop, CONSTANT_THRESHOLD};
use crate::error::{Error, Result};
use crate::field::CurvatureField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub l_part: f64,
    pub a1_part: f64,
    pub ah_minus_1_part: f64,
    pub total: f64,
}

/// `E_H(u)`, split as `L + A_1 + A_{H-1}`.
pub fn energy(field: &CurvatureField, u: &Loop) -> EnergyBreakdown {
    if u.is_constant() {
        return EnergyBreakdown { l_part: 0.0, a1_part: 0.0, ah_minus_1_part: 0.0, total: 0.0 };
    }
    let l_part = u.seminorm_l();
    let a1_part = area_a1(u);
    let ah_minus_1_part = area_ak_line(u, &Shifted(field, 1.0)).expect("closed-form potential");
    EnergyBreakdown { l_part, a1_part, ah_minus_1_part, total: l_part + a1_part + ah_minus_1_part }
}

/// Total energy only.
pub fn energy_value(field: &CurvatureField, u: &Loop) -> f64 {
    energy(field, u).total
}

/// Gradient of `A_H` under the mean pairing:
/// `dQ(u)ᵀ iu' + i(Q(u))'`.
pub fn area_gradient(field: &CurvatureField, u: &Loop) -> Vec<Complex64> {
    let iu: Vec<Complex64> = u.derivative().into_iter().map(rot90).collect();
    let pq: Vec<(Complex64, [Complex64; 2])> = u.points().par_iter().map(|&z| field.potential(z)).collect();
    let q: Vec<Complex64> = pq.iter().map(|p| p.0).collect();
    let dq = spectral_derivative(&q);
    pq.iter()
        .zip(&iu)
        .zip(&dq)
        .map(|(((_, jac), w), d)| {
            let dot = |a: Complex64| a.re * w.re + a.im * w.im;
            Complex64::new(dot(jac[0]), dot(jac[1])) + rot90(*d)
        })
        .collect()
}

/// Gradient of `E_H` under the mean pairing: `-u''/L + ∇A_H`.
pub fn gradient(field: &CurvatureField, u: &Loop) -> Result<Vec<Complex64>> {
    let l = u.seminorm_l();
    if l < CONSTANT_THRESHOLD {
        return Err(Error::ConstantLoop(l));
    }
    let d2 = u.second_derivative();
    Ok(area_gradient(field, u).into_iter().zip(d2).map(|(a, s)| a - s / l).collect())
}

/// `dE_H(u)φ = ⟨∇E_H(u), φ⟩`.
pub fn differential(field: &CurvatureField, u: &Loop, phi: &[Complex64]) -> Result<f64> {
    Ok(mean_dot(&gradient(field, u)?, phi))
}

/// Gap `2E_H(u) - dE_H(u)u` and its lower bound `(1 - N_H)L(u)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MagicGap {
    pub gap: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn magic_gap(field: &CurvatureField, u: &Loop, n_h: f64) -> Result<MagicGap> {
    let g = gradient(field, u)?;
    let gap = 2.0 * energy_value(field, u) - mean_dot(&g, u.points());
    let bound = (1.0 - n_h) * u.seminorm_l();
    Ok(MagicGap { gap, bound, holds: gap >= bound - 1e-8 })
}

/// `dA_H(u)u - 2A_H(u)`; for radial `H` this equals `A_{dl H}(u)`.
pub fn scaling_defect(field: &CurvatureField, u: &Loop) -> f64 {
    let da = mean_dot(&area_gradient(field, u), u.points());
    let a = area_ak_line(u, field as &dyn Weight).expect("closed-form potential");
    da - 2.0 * a
}

/// RMS of the gradient, used as a stationarity measure.
pub fn gradient_norm(g: &[Complex64]) -> f64 {
    mean_dot(g, g).sqrt()
}
