use std::fmt::Write as _;
use std::path::Path;

use hloop::Loop;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Advisories are reported but never change the exit status.
    pub advisory: bool,
    pub detail: String,
}

#[derive(Debug, Default, Serialize)]
pub struct Suite {
    pub checks: Vec<Check>,
}

impl Suite {
    pub fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.into(), passed, advisory: false, detail });
    }

    pub fn advise(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.into(), passed, advisory: true, detail });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.advisory)
    }

    pub fn print(&self) {
        for c in &self.checks {
            let tag = match (c.passed, c.advisory) {
                (true, _) => "PASS",
                (false, false) => "FAIL",
                (false, true) => "NOTE",
            };
            println!("{tag} {}: {}", c.name, c.detail);
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Run(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Polylines through the samples of each loop, fitted to a square canvas.
pub fn write_svg(path: &Path, loops: &[&Loop]) -> Result<(), CliError> {
    const SIZE: f64 = 512.0;
    const PAD: f64 = 16.0;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for z in loops.iter().flat_map(|u| u.points()) {
        x0 = x0.min(z.re);
        x1 = x1.max(z.re);
        y0 = y0.min(z.im);
        y1 = y1.max(z.im);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let k = (SIZE - 2.0 * PAD) / span;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#);
    for u in loops {
        let mut pts = String::new();
        for z in u.points().iter().chain(u.points().first()) {
            // y axis points up in the plane, down in SVG
            let _ = write!(pts, "{:.3},{:.3} ", PAD + (z.re - x0) * k, SIZE - PAD - (z.im - y0) * k);
        }
        let _ = writeln!(s, r#"  <polyline fill="none" stroke="black" stroke-width="1" points="{}"/>"#, pts.trim_end());
    }
    s.push_str("</svg>\n");
    std::fs::write(path, s)?;
    Ok(())
}
