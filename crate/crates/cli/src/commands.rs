use std::f64::consts::PI;

use hloop::area::{area_a1, default_spacing, isoperimetric_check, winding_grid};
use hloop::energy::{energy, gradient, gradient_norm, magic_gap, scaling_defect};
use hloop::hardy::{dl_grid, dlstar_grid, grid_n, hardy_ratio, mollify_check, NearOptimizer, ScalarGrid};
use hloop::mountain_pass::{estimate_cmp, field_n, CmpOptions};
use hloop::solver::{circle_radius_oracle, find_critical, shoot, shoot_loop, SolverOptions};
use hloop::{Complex64, CurvatureField, FieldSpec, Loop};
use serde::Serialize;
use serde_json::json;

use crate::config::{Init, RunConfig};
use crate::report::{write_json, write_svg, Suite};
use crate::CliError;

const DEFAULT_SEED: u64 = 1;

fn beta_t_default() -> FieldSpec {
    FieldSpec::RadialBetaT { beta: 3.0, t: 0.2, scale: 1.0 }
}

fn unit_field() -> FieldSpec {
    FieldSpec::Constant { value: 1.0 }
}

fn finish(suite: &Suite, out: &std::path::Path, report: serde_json::Value) -> Result<bool, CliError> {
    suite.print();
    write_json(&out.join("report.json"), &report)?;
    Ok(suite.all_passed())
}

/// Scale a random loop so that `L` sits in a spread of sizes.
fn test_loop(seed: u64, k: usize, samples: usize) -> Result<Loop, CliError> {
    let u = Loop::random_fourier(seed.wrapping_add(k as u64), 5, 1.5, samples)?;
    let target = 0.3 * 10f64.powf((k % 5) as f64 / 4.0);
    Ok(u.scale(Complex64::new(target / u.seminorm_l(), 0.0)))
}

pub fn invariants(cfg: &RunConfig) -> Result<bool, CliError> {
    let field = cfg.field_or(beta_t_default())?;
    let out = cfg.out_dir()?;
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let slack = cfg.tol.unwrap_or(1e-8);
    let loops = cfg.loops.unwrap_or(20);
    let samples = cfg.grid.unwrap_or(128);
    let n_h = field_n(&field)?;

    let mut suite = Suite::default();
    suite.advise("N_H < 1", n_h < 1.0, format!("N_H = {n_h:.6}"));

    let mut worst = Worst::default();
    for k in 0..loops {
        let u = test_loop(seed, k, samples)?;
        let l = u.seminorm_l();
        let iso = isoperimetric_check(&u, &field, n_h)?;
        worst.global = worst.global.max(iso.global.lhs - iso.global.rhs);
        worst.localized = worst.localized.max(iso.localized.lhs - iso.localized.rhs);
        worst.hardy_area = worst.hardy_area.max(iso.hardy.lhs - iso.hardy.rhs);
        worst.flat = worst.flat.max(2.0 * area_a1(&u).abs() - l * l);
        let gap = magic_gap(&field, &u, n_h)?;
        worst.gap = worst.gap.max(gap.bound - gap.gap);
        worst.defect = worst.defect.max(scaling_defect(&field, &u).abs() - n_h * l);
        let j = winding_grid(&u, default_spacing(&u))?;
        worst.winding = worst.winding.max(j.l2_norm() / (PI.sqrt() * u.mean_speed()));
    }
    let line = |v: f64| format!("max (lhs - rhs) = {v:.3e} over {loops} loops");
    suite.check("flat isoperimetric 2|A_1| ≤ L²", worst.flat <= slack, line(worst.flat));
    suite.check("weighted isoperimetric (global)", worst.global <= slack, line(worst.global));
    suite.check("weighted isoperimetric (localized)", worst.localized <= slack, line(worst.localized));
    suite.check("weighted isoperimetric (Hardy form)", worst.hardy_area <= slack, line(worst.hardy_area));
    suite.check("coercivity gap 2E - dE(u)u ≥ (1 - N)L", worst.gap <= slack, line(worst.gap));
    suite.check("scaling defect |dA(u)u - 2A| ≤ N L", worst.defect <= slack, line(worst.defect));
    suite.check(
        "winding bound ‖j‖ ≤ √π ⨍|u'|",
        worst.winding <= 1.02,
        format!("max ratio {:.4} over {loops} loops", worst.winding),
    );

    let h = 6.0 / 256.0;
    let mut max_ratio: f64 = 0.0;
    for w in [0.5, 0.8, 1.0] {
        let g = ScalarGrid::from_fn(6.0, h, |x, y| (-(x * x + y * y) / (w * w)).exp())?;
        max_ratio = max_ratio.max(hardy_ratio(&g)?);
    }
    suite.check("Hardy ‖K‖ < ‖dl K‖", max_ratio < 1.0, format!("max ratio {max_ratio:.4}"));

    let report = json!({
        "command": "invariants",
        "seed": seed,
        "field": field.to_spec(),
        "n_h": n_h,
        "loops": loops,
        "checks": suite.checks,
    });
    finish(&suite, &out, report)
}

struct Worst {
    flat: f64,
    global: f64,
    localized: f64,
    hardy_area: f64,
    gap: f64,
    defect: f64,
    winding: f64,
}

impl Default for Worst {
    fn default() -> Self {
        let m = f64::NEG_INFINITY;
        Self { flat: m, global: m, localized: m, hardy_area: m, gap: m, defect: m, winding: 0.0 }
    }
}

#[derive(Serialize)]
struct RegimeRow {
    beta: f64,
    t: f64,
    n: f64,
    m: f64,
    n_closed: f64,
    regime: &'static str,
}

fn regime(n: f64, m: f64) -> &'static str {
    if n < 1.0 && 1.0 <= m {
        "N<1<=M"
    } else if m < 1.0 && 1.0 <= n {
        "M<1<=N"
    } else if n < 1.0 && m < 1.0 {
        "both<1"
    } else {
        "both>=1"
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(a) * f(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

pub fn appendix(cfg: &RunConfig) -> Result<bool, CliError> {
    let out = cfg.out_dir()?;
    let tol = cfg.tol.unwrap_or(1e-6);
    let mut suite = Suite::default();

    let mut rows = Vec::new();
    let mut worst_n: f64 = 0.0;
    let mut mismatches = 0;
    for beta in [1.1, 1.5, 2.0, 3.0, 6.0] {
        for t in [0.1, 0.3, 0.5, 0.7] {
            let h = CurvatureField::beta_t(beta, t)?;
            let (n, m) = (h.compute_n()?, h.compute_m()?);
            let n_closed = beta * t * (beta / (2.0 * (beta * beta - 1.0))).sqrt();
            worst_n = worst_n.max((n - n_closed).abs());
            if regime(n, m) != regime(n_closed, beta * t) {
                mismatches += 1;
            }
            rows.push(RegimeRow { beta, t, n, m, n_closed, regime: regime(n, m) });
        }
    }
    suite.check("power-law family N", worst_n < tol, format!("max error {worst_n:.2e}"));
    for want in ["N<1<=M", "M<1<=N"] {
        let hits = rows.iter().filter(|r| r.regime == want).count();
        suite.check(&format!("regime {want} witnessed"), hits > 0, format!("{hits} pairs"));
    }
    suite.check("regimes match closed form", mismatches == 0, format!("{mismatches} mismatches"));

    let mut worst_eps: f64 = 0.0;
    for eps in [0.25, 0.5, 0.75] {
        let n = CurvatureField::eps(eps)?.compute_n()?;
        let e2 = eps * eps;
        worst_eps = worst_eps.max((n * n - 4.5 * (2.0 - e2) / ((3.0 - e2) * (3.0 - e2))).abs());
    }
    suite.check("logarithmic family N²", worst_eps < tol, format!("max error {worst_eps:.2e}"));

    let h = CurvatureField::eps(0.5)?;
    let (mut e_max, mut g_max, mut l_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for n in 1..=5 {
        let u = Loop::circle(Complex64::new(0.0, 0.0), 1.0, n, 256)?;
        e_max = e_max.max(energy(&h, &u).total.abs());
        g_max = g_max.max(gradient_norm(&gradient(&h, &u)?));
        l_err = l_err.max((u.seminorm_l() - n as f64).abs());
    }
    suite.check(
        "degree-n unit circles have zero energy",
        e_max < 1e-8 && g_max < 1e-8 && l_err < 1e-12,
        format!("max |E| {e_max:.1e}, max |∇E| {g_max:.1e}, max |L - n| {l_err:.1e}"),
    );

    let roots = circle_radius_oracle(&CurvatureField::beta_t(2.0, 0.5)?)?;
    let r_star = bisect(|r| r * r * r - 4.0 * r + 2.0, 0.0, 1.0);
    let hit = roots.iter().map(|r| (r - r_star).abs()).fold(f64::INFINITY, f64::min);
    suite.check("critical circle radius for (2, 0.5)", hit < 1e-4, format!("r* = {r_star:.6}, oracle roots {roots:?}"));

    let report = json!({ "command": "appendix", "regimes": rows, "circle_roots": roots, "checks": suite.checks });
    finish(&suite, &out, report)
}

type TestFn = Box<dyn Fn(f64, f64) -> f64 + Sync>;

pub fn hardy(cfg: &RunConfig) -> Result<bool, CliError> {
    let out = cfg.out_dir()?;
    let s = 6.0;
    let n = cfg.grid.unwrap_or(256);
    let h = s / n as f64;
    let mut suite = Suite::default();

    let suite_fns: Vec<(&str, TestFn)> = vec![
        ("gaussian", Box::new(|x: f64, y: f64| (-(x * x + y * y)).exp())),
        ("shifted gaussian", Box::new(|x: f64, y: f64| (-((x - 0.5).powi(2) + (y + 0.3).powi(2)) / 0.49).exp())),
        ("anisotropic", Box::new(|x: f64, y: f64| (-(x * x / 1.2 + 2.0 * y * y)).exp())),
        ("bump", Box::new(|x: f64, y: f64| {
            let q = (x * x + y * y) / 4.0;
            if q < 1.0 { (-1.0 / (1.0 - q)).exp() } else { 0.0 }
        })),
        ("dipole", Box::new(|x: f64, y: f64| x * (-(x * x + y * y)).exp())),
    ];
    let (mut max_ratio, mut max_dev): (f64, f64) = (0.0, 0.0);
    for (i, (_, f)) in suite_fns.iter().enumerate() {
        let k = ScalarGrid::from_fn(s, h, f)?;
        max_ratio = max_ratio.max(hardy_ratio(&k)?);
        let dl = dl_grid(&k)?;
        max_dev = max_dev.max((dl.l2_norm() / dlstar_grid(&k)?.l2_norm() - 1.0).abs());
        if i == 0 {
            k.write(&out, "k")?;
            dl.write(&out, "dl_k")?;
        }
    }
    suite.check("Hardy ratio < 1", max_ratio < 1.0 - 1e-6, format!("max {max_ratio:.5} over {} grids", suite_fns.len()));
    suite.check("‖dl K‖ ≈ ‖dl* K‖", max_dev <= 0.02, format!("max deviation {max_dev:.2e}"));

    let near = NearOptimizer { delta: 0.01, log_a: -40.0, log_b: 40.0, ramp: 10.0 };
    let r = near.ratio_1d();
    suite.check("near-optimizer ratio", r >= 0.99, format!("{r:.5}"));

    let gauss = ScalarGrid::from_fn(s, h, |x, y| (-(x * x + y * y)).exp())?;
    let m = mollify_check(&gauss, 8.0 * h)?;
    let rel = m.residual / m.dl_norm;
    suite.check("mollification identity", rel < 1e-3, format!("relative residual {rel:.2e}"));
    suite.check("mollifier mass", (m.mass - 1.0).abs() < 1e-6, format!("{:.12}", m.mass));

    let mut grid_report = None;
    if let Some(spec) = &cfg.field {
        let field = CurvatureField::try_from(spec)?;
        if let Some(b) = field.bump() {
            let reach = (b.center * field.scale()).norm() + b.radius * field.scale();
            let side = (2.2 * reach).max(8.0);
            let g = grid_n(&field, side, side / n as f64)?;
            suite.advise("N_H < 1", g.n < 1.0, format!("grid N_H = {:.6} (± {:.1e})", g.n, g.tolerance));
            grid_report = Some(g);
        } else {
            let n_h = field.compute_n()?;
            suite.advise("N_H < 1", n_h < 1.0, format!("N_H = {n_h:.6}"));
        }
    }

    let report = json!({
        "command": "hardy",
        "half_side": s,
        "spacing": h,
        "mollify": m,
        "grid_n": grid_report,
        "checks": suite.checks,
    });
    finish(&suite, &out, report)
}

fn initial_loop(cfg: &RunConfig, samples: usize, seed: u64) -> Result<(Init, Loop), CliError> {
    let init: Init = cfg.init.as_deref().unwrap_or("circle:1").parse()?;
    let u = match init {
        Init::Circle { radius, center } => Loop::circle(Complex64::new(center[0], center[1]), radius, 1, samples)?,
        Init::Random => Loop::random_fourier(seed, 4, 2.0, samples)?,
    };
    Ok((init, u))
}

fn trace_csv(path: &std::path::Path, rep: &hloop::solver::SolverReport) -> Result<(), CliError> {
    let mut s = String::from("iteration,energy,L,mean\n");
    for (k, ((e, l), m)) in rep.energy_trace.iter().zip(&rep.l_trace).zip(&rep.mean_trace).enumerate() {
        s.push_str(&format!("{k},{e},{l},{m}\n"));
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn solve(cfg: &RunConfig) -> Result<bool, CliError> {
    let field = cfg.field_or(unit_field())?;
    let out = cfg.out_dir()?;
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let (init, u0) = initial_loop(cfg, cfg.grid.unwrap_or(128), seed)?;
    let defaults = SolverOptions::default();
    let opts = SolverOptions {
        tol: cfg.tol.unwrap_or(defaults.tol),
        max_iters: cfg.max_iters.unwrap_or(defaults.max_iters),
        l_max: cfg.l_max.unwrap_or(defaults.l_max),
        n_estimate: field_n(&field).unwrap_or(0.0),
    };
    let rep = find_critical(&field, &u0, &opts)?;
    rep.final_loop.write_csv(out.join("loop.csv"))?;
    trace_csv(&out.join("trace.csv"), &rep)?;
    let shooting = if rep.final_loop.is_constant() { None } else { shoot_loop(&field, &rep.final_loop).ok() };
    if !rep.final_loop.is_constant() {
        write_svg(&out.join("loop.svg"), &[&rep.final_loop])?;
    }
    println!(
        "{:?} after {} iterations: E = {:.10}, residual = {:.2e}, L = {:.8}",
        rep.outcome,
        rep.iterations,
        rep.energy,
        rep.residual,
        rep.final_loop.seminorm_l()
    );
    if let Some(s) = &shooting {
        println!("shooting defect {:.2e}", s.defect);
    }
    let report = json!({
        "command": "solve",
        "seed": seed,
        "field": field.to_spec(),
        "init": format!("{init:?}"),
        "options": opts,
        "report": rep,
        "shooting": shooting,
    });
    write_json(&out.join("report.json"), &report)?;
    Ok(true)
}

pub fn mountain_pass(cfg: &RunConfig) -> Result<bool, CliError> {
    let field = cfg.field_or(unit_field())?;
    let out = cfg.out_dir()?;
    let defaults = CmpOptions::default();
    let opts = CmpOptions {
        nodes: cfg.nodes.unwrap_or(defaults.nodes),
        samples: cfg.grid.unwrap_or(defaults.samples),
        tol: cfg.tol.unwrap_or(defaults.tol),
        well_center: cfg.well_center,
        ..defaults
    };
    let rep = estimate_cmp(&field, &opts)?;
    rep.witness.export(&field, out.join("path"))?;
    rep.saddle.write_csv(out.join("saddle.csv"))?;
    write_svg(&out.join("saddle.svg"), &[&rep.saddle])?;
    let nodes: Vec<&Loop> = rep.witness.nodes.iter().filter(|u| !u.is_constant()).collect();
    write_svg(&out.join("path.svg"), &nodes)?;
    if let Some(p) = &rep.polish {
        p.final_loop.write_csv(out.join("polished.csv"))?;
    }
    println!("mountain-pass level ≈ {:.8} (N_H = {:.6}, R̃ = {:.4})", rep.value, rep.n_h, rep.r_tilde);
    println!("saddle node residual {:.2e}", rep.saddle_residual);
    if let Some(p) = &rep.polish {
        println!("polish: {:?}, residual {:.2e}, E = {:.8}", p.outcome, p.residual, p.energy);
    }
    for w in &rep.warnings {
        println!("warning: {w}");
    }
    let report = json!({ "command": "mountain-pass", "field": field.to_spec(), "options": opts, "report": rep });
    write_json(&out.join("report.json"), &report)?;
    Ok(true)
}

pub fn shoot_cmd(cfg: &RunConfig) -> Result<bool, CliError> {
    let field = cfg.field_or(unit_field())?;
    let out = cfg.out_dir()?;
    let c = cfg.c.unwrap_or(1.0);
    let period = cfg.period.unwrap_or(1.0);
    let init: Init = cfg.init.as_deref().unwrap_or("circle:1").parse()?;
    let Init::Circle { radius, center } = init else {
        return Err(CliError::Config("shoot needs a circle:r init".into()));
    };
    // start on the circle at angle 0, heading counterclockwise
    let z0 = Complex64::new(center[0] + radius, center[1]);
    let rep = shoot(&field, z0, Complex64::new(0.0, 1.0), c, period)?;
    println!("closing defect {:.3e} (error estimate {:.1e})", rep.defect, rep.error_estimate);
    let report = json!({
        "command": "shoot",
        "field": field.to_spec(),
        "start": [z0.re, z0.im],
        "c": c,
        "period": period,
        "report": rep,
    });
    write_json(&out.join("report.json"), &report)?;
    Ok(true)
}
