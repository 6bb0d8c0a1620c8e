//! Mountain-pass paths from a constant loop to a large circle.
//!
//! A path starts at the constant loop `p`, grows circles about `p` up to the
//! radius `R̃ = 2(1 + N_H)` and then translates that circle back to the
//! origin. The minimax level `c_mp = inf_γ max_t E_H(γ(t))` is estimated by
//! relaxing the growth half with a string method and taking the best of a
//! few anchors `p`.

use std::path::Path;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::curve::{apply_multiplier, Loop};
use crate::energy::{energy_value, gradient};
use crate::error::{Error, Result};
use crate::field::CurvatureField;
use crate::hardy::grid_n;
use crate::solver::{find_critical, residual, Outcome, SolverOptions, SolverReport};

#[derive(Debug, Clone)]
pub struct PathOfLoops {
    pub nodes: Vec<Loop>,
    pub anchor: Complex64,
    pub r_tilde: f64,
}

impl PathOfLoops {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the node where growth ends and translation begins.
    pub fn junction(&self) -> usize {
        (self.nodes.len() - 1) / 2
    }

    /// Node 0 constant and the last node a circle with `L = R̃`.
    pub fn endpoints_valid(&self) -> bool {
        let (Some(first), Some(last)) = (self.nodes.first(), self.nodes.last()) else {
            return false;
        };
        first.seminorm_l() < 1e-10 && (last.seminorm_l() - self.r_tilde).abs() < 1e-9
    }

    pub fn energies(&self, field: &CurvatureField) -> Vec<f64> {
        self.nodes.par_iter().map(|u| energy_value(field, u)).collect()
    }

    /// Writes `node_XXX.csv` per node, `energy.csv` and `manifest.json`.
    pub fn export(&self, field: &CurvatureField, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let energies = self.energies(field);
        let m = self.nodes.len();
        let mut entries = Vec::with_capacity(m);
        let mut w = csv::Writer::from_path(dir.join("energy.csv"))?;
        w.write_record(["index", "t", "energy", "L"])?;
        for (k, (u, e)) in self.nodes.iter().zip(&energies).enumerate() {
            let file = format!("node_{k:03}.csv");
            u.write_csv(dir.join(&file))?;
            let t = k as f64 / (m - 1) as f64;
            let l = u.seminorm_l();
            w.write_record([k.to_string(), t.to_string(), e.to_string(), l.to_string()])?;
            entries.push(ManifestNode { index: k, file, energy: *e, l });
        }
        w.flush()?;
        let manifest = Manifest { anchor: [self.anchor.re, self.anchor.im], r_tilde: self.r_tilde, nodes: entries };
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}

#[derive(Serialize)]
struct ManifestNode {
    index: usize,
    file: String,
    energy: f64,
    #[serde(rename = "L")]
    l: f64,
}

#[derive(Serialize)]
struct Manifest {
    anchor: [f64; 2],
    r_tilde: f64,
    nodes: Vec<ManifestNode>,
}

/// Circles `2tR̃e^{iθ} + p` for `t ≤ 1/2`, then `R̃e^{iθ} + 2(1-t)p`.
pub fn initial_path(anchor: Complex64, r_tilde: f64, m: usize, samples: usize) -> Result<PathOfLoops> {
    if m < 9 || m.is_multiple_of(2) {
        return Err(Error::Config(format!("path needs an odd node count >= 9, got {m}")));
    }
    if !(r_tilde > 0.0) {
        return Err(Error::Config("R̃ must be positive".into()));
    }
    let nodes = (0..m)
        .map(|k| {
            let t = k as f64 / (m - 1) as f64;
            if t <= 0.5 {
                if k == 0 {
                    Loop::constant(anchor, samples)
                } else {
                    Loop::circle(anchor, 2.0 * t * r_tilde, 1, samples)
                }
            } else {
                Loop::circle(anchor * (2.0 * (1.0 - t)), r_tilde, 1, samples)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathOfLoops { nodes, anchor, r_tilde })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PathMax {
    pub index: usize,
    /// Node maximum refined by the parabola through the neighbors.
    pub value: f64,
    pub node_value: f64,
    pub endpoints_valid: bool,
}

fn refine_max(energies: &[f64]) -> (usize, f64, f64) {
    let (k, &e) = energies.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty path");
    if k == 0 || k + 1 == energies.len() {
        return (k, e, e);
    }
    let (a, c) = (energies[k - 1], energies[k + 1]);
    let curv = 2.0 * e - a - c;
    let value = if curv > 0.0 { e + (c - a).powi(2) / (8.0 * curv) } else { e };
    (k, value, e)
}

pub fn path_max_energy(field: &CurvatureField, path: &PathOfLoops) -> PathMax {
    let (index, value, node_value) = refine_max(&path.energies(field));
    PathMax { index, value, node_value, endpoints_valid: path.endpoints_valid() }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RelaxOptions {
    pub max_sweeps: usize,
    pub step: f64,
    /// Stop once the path maximum moves less than this over a sweep.
    pub tol: f64,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self { max_sweeps: 300, step: 0.2, tol: 1e-9 }
    }
}

fn precondition(g: &[Complex64]) -> Vec<Complex64> {
    apply_multiplier(g, |k| match k {
        Some(k) => Complex64::new(1.0 / (1.0 + k * k), 0.0),
        None => Complex64::new(0.0, 0.0),
    })
}

/// Re-space nodes `0..=last` to equal H¹ arc length by piecewise-linear
/// interpolation.
fn equidistribute(nodes: &[Loop]) -> Vec<Loop> {
    let mut cum = vec![0.0];
    for w in nodes.windows(2) {
        cum.push(cum.last().copied().unwrap_or(0.0) + w[0].h1_distance(&w[1]));
    }
    let total = *cum.last().unwrap_or(&0.0);
    let m = nodes.len();
    if total == 0.0 {
        return nodes.to_vec();
    }
    let mut out = Vec::with_capacity(m);
    let mut seg = 0;
    for k in 0..m {
        if k == 0 || k + 1 == m {
            out.push(nodes[k].clone());
            continue;
        }
        let target = total * k as f64 / (m - 1) as f64;
        while seg + 2 < m && cum[seg + 1] < target {
            seg += 1;
        }
        let span = cum[seg + 1] - cum[seg];
        let s = if span > 0.0 { (target - cum[seg]) / span } else { 0.0 };
        out.push(nodes[seg].lerp(&nodes[seg + 1], s));
    }
    out
}

/// String-method relaxation of the growth half. Interior nodes take
/// preconditioned gradient steps, then the half is re-equidistributed in
/// H¹. Sweeps that raise the path maximum are rejected and the step halved.
pub fn relax_path(field: &CurvatureField, path: &PathOfLoops, opts: &RelaxOptions) -> Result<PathOfLoops> {
    let mut path = path.clone();
    let junction = path.junction();
    let mut best = refine_max(&path.energies(field)).1;
    let mut step = opts.step;
    let mut quiet = 0;
    for _ in 0..opts.max_sweeps {
        let moved: Vec<Loop> = path.nodes[1..junction]
            .par_iter()
            .map(|u| -> Result<Loop> {
                if u.is_constant() {
                    return Ok(u.clone());
                }
                let g = gradient(field, u)?;
                Ok(u.add_scaled(&precondition(&g), -step))
            })
            .collect::<Result<_>>()?;
        let mut growth = Vec::with_capacity(junction + 1);
        growth.push(path.nodes[0].clone());
        growth.extend(moved);
        growth.push(path.nodes[junction].clone());
        let growth = equidistribute(&growth);
        let mut trial = path.clone();
        for (k, u) in growth.into_iter().enumerate() {
            trial.nodes[k] = u;
        }
        let trial_energies = trial.energies(field);
        let (k, value, _) = refine_max(&trial_energies);
        if value <= best + 1e-10 {
            if trial.nodes[k].seminorm_l() < 1e-6 && k > 0 {
                return Err(Error::Relaxation(format!("node {k} collapsed while carrying the maximum")));
            }
            let change = best - value;
            path = trial;
            best = value;
            step = (step * 1.2).min(opts.step * 4.0);
            if change.abs() < opts.tol {
                quiet += 1;
                if quiet >= 3 {
                    break;
                }
            } else {
                quiet = 0;
            }
        } else {
            step *= 0.5;
            if step < 1e-8 {
                break;
            }
        }
    }
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct AnchorResult {
    pub anchor: [f64; 2],
    pub initial_max: f64,
    pub relaxed_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CmpReport {
    pub value: f64,
    pub n_h: f64,
    pub r_tilde: f64,
    pub anchors: Vec<AnchorResult>,
    pub best_anchor: usize,
    /// Argmax node of the best relaxed path.
    #[serde(skip)]
    pub saddle: Loop,
    pub saddle_residual: f64,
    /// Solver polish started from the saddle node.
    pub polish: Option<SolverReport>,
    /// Residual of the unit circle about `p̃`, reported when the level is at
    /// least `1/2 - tol`.
    pub circle_certificate: Option<f64>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub witness: PathOfLoops,
}

#[derive(Debug, Clone, Serialize)]
pub struct CmpOptions {
    pub nodes: usize,
    pub samples: usize,
    pub tol: f64,
    /// `p̃`, the center of the disc where `H ≥ 1`.
    pub well_center: Option<[f64; 2]>,
    /// Overrides the computed `N_H`.
    pub n_h: Option<f64>,
    pub relax: RelaxOptions,
    pub polish: bool,
}

impl Default for CmpOptions {
    fn default() -> Self {
        Self { nodes: 33, samples: 128, tol: 1e-3, well_center: None, n_h: None, relax: RelaxOptions::default(), polish: true }
    }
}

/// `N_H` from the closed radial formula, or from grid differences when the
/// field carries a bump.
pub fn field_n(field: &CurvatureField) -> Result<f64> {
    if field.is_radial() {
        return field.compute_n();
    }
    let b = field.bump().ok_or(Error::NotRadial)?;
    let reach = (b.center * field.scale()).norm() + b.radius * field.scale();
    let s = (2.2 * reach).max(8.0);
    Ok(grid_n(field, s, s / 256.0)?.n)
}

/// Best relaxed path maximum over the anchors `{0, p̃, (4C_H R̃²/tol, 0)}`.
pub fn estimate_cmp(field: &CurvatureField, opts: &CmpOptions) -> Result<CmpReport> {
    let mut warnings = Vec::new();
    let n_h = match opts.n_h {
        Some(n) => n,
        None => field_n(field)?,
    };
    if !(n_h < 1.0) {
        warnings.push(format!("N_H = {n_h:.6} is not below 1"));
    }
    if !field.decays() {
        warnings.push("H - λ∞ does not decay like o(1/|z|)".into());
    }
    let r_tilde = 2.0 * (1.0 + if n_h.is_finite() { n_h } else { 0.0 });
    let c_h = field.compute_c();
    let mut anchors = vec![Complex64::new(0.0, 0.0)];
    if let Some([x, y]) = opts.well_center {
        anchors.push(Complex64::new(x, y));
    }
    if c_h.is_finite() && c_h > 0.0 {
        anchors.push(Complex64::new(4.0 * c_h * r_tilde * r_tilde / opts.tol, 0.0));
    }
    anchors.dedup();

    let mut results = Vec::new();
    let mut best: Option<(usize, PathOfLoops, PathMax)> = None;
    for (i, &p) in anchors.iter().enumerate() {
        let init = initial_path(p, r_tilde, opts.nodes, opts.samples)?;
        let initial_max = path_max_energy(field, &init).value;
        let relaxed = relax_path(field, &init, &opts.relax)?;
        let pm = path_max_energy(field, &relaxed);
        results.push(AnchorResult { anchor: [p.re, p.im], initial_max, relaxed_max: pm.value });
        if best.as_ref().is_none_or(|b| pm.value < b.2.value) {
            best = Some((i, relaxed, pm));
        }
    }
    let (best_anchor, witness, pm) = best.expect("at least one anchor");
    let saddle = witness.nodes[pm.index].clone();
    let saddle_residual = if saddle.is_constant() { f64::INFINITY } else { residual(field, &saddle) };
    let polish = if opts.polish && !saddle.is_constant() {
        let sopts = SolverOptions { tol: 1e-9, n_estimate: n_h.min(1e3), ..SolverOptions::default() };
        Some(find_critical(field, &saddle, &sopts)?)
    } else {
        None
    };
    let circle_certificate = if pm.value >= 0.5 - opts.tol {
        let center = opts.well_center.map(|[x, y]| Complex64::new(x, y)).unwrap_or_default();
        Some(residual(field, &Loop::circle(center, 1.0, 1, opts.samples)?))
    } else {
        None
    };
    if let Some(p) = &polish {
        if p.outcome != Outcome::ConvergedLoop {
            warnings.push(format!("saddle polish ended with {:?}", p.outcome));
        }
    }
    Ok(CmpReport {
        value: pm.value,
        n_h,
        r_tilde,
        anchors: results,
        best_anchor,
        saddle,
        saddle_residual,
        polish,
        circle_certificate,
        warnings,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_initial_path_max_is_half() {
        let one = CurvatureField::constant(1.0);
        let path = initial_path(Complex64::new(0.0, 0.0), 2.0, 33, 64).unwrap();
        assert!(path.endpoints_valid());
        let pm = path_max_energy(&one, &path);
        assert!((pm.value - 0.5).abs() < 1e-9);
        assert!(initial_path(Complex64::new(0.0, 0.0), 2.0, 10, 64).is_err());
    }

    #[test]
    fn constant_path_is_flagged() {
        let nodes = (0..9).map(|_| Loop::constant(Complex64::new(1.0, 0.0), 32).unwrap()).collect();
        let path = PathOfLoops { nodes, anchor: Complex64::new(1.0, 0.0), r_tilde: 2.0 };
        let pm = path_max_energy(&CurvatureField::constant(1.0), &path);
        assert_eq!(pm.value, 0.0);
        assert!(!pm.endpoints_valid);
    }

    #[test]
    fn equidistribution_keeps_endpoints() {
        let nodes: Vec<Loop> = [0.0, 0.1, 0.9, 1.0]
            .iter()
            .map(|&r| if r == 0.0 { Loop::constant(Complex64::new(0.0, 0.0), 32).unwrap() } else { Loop::circle(Complex64::new(0.0, 0.0), r, 1, 32).unwrap() })
            .collect();
        let out = equidistribute(&nodes);
        let d: Vec<f64> = out.windows(2).map(|w| w[0].h1_distance(&w[1])).collect();
        assert!(d.iter().all(|x| (x - d[0]).abs() < 1e-12), "{d:?}");
        assert_eq!(out[3], nodes[3]);
    }
}
