use std::path::{Path, PathBuf};

use hloop::{CurvatureField, FieldSpec};
use serde::Deserialize;

use crate::CliError;

/// Options that can come from a `--config` file; command-line flags win.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub field: Option<FieldSpec>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub grid: Option<usize>,
    pub init: Option<String>,
    pub c: Option<f64>,
    pub max_iters: Option<usize>,
    pub l_max: Option<f64>,
    pub loops: Option<usize>,
    pub nodes: Option<usize>,
    pub well_center: Option<[f64; 2]>,
    pub period: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = read(path)?;
        let cfg: RunConfig = parse_json(path, &text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fill unset entries from `other`.
    pub fn or(self, other: RunConfig) -> RunConfig {
        RunConfig {
            field: self.field.or(other.field),
            out: self.out.or(other.out),
            seed: self.seed.or(other.seed),
            tol: self.tol.or(other.tol),
            grid: self.grid.or(other.grid),
            init: self.init.or(other.init),
            c: self.c.or(other.c),
            max_iters: self.max_iters.or(other.max_iters),
            l_max: self.l_max.or(other.l_max),
            loops: self.loops.or(other.loops),
            nodes: self.nodes.or(other.nodes),
            well_center: self.well_center.or(other.well_center),
            period: self.period.or(other.period),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        for (name, v) in [("tol", self.tol), ("c", self.c), ("l_max", self.l_max), ("period", self.period)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(CliError::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if self.grid == Some(0) || self.loops == Some(0) {
            return Err(CliError::Config("grid and loops must be positive".into()));
        }
        Ok(())
    }

    pub fn field_or(&self, default: FieldSpec) -> Result<CurvatureField, CliError> {
        let spec = self.field.clone().unwrap_or(default);
        CurvatureField::try_from(&spec).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("hloop-out"));
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }
}

pub fn load_field(path: &Path) -> Result<FieldSpec, CliError> {
    let text = read(path)?;
    let spec: FieldSpec = parse_json(path, &text)?;
    CurvatureField::try_from(&spec).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(spec)
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| {
        let line = text.lines().nth(e.line().saturating_sub(1)).unwrap_or("");
        CliError::Parse { file: path.display().to_string(), message: e.to_string(), line: line.to_string() }
    })
}

/// Initial loop description: `circle:r`, `circle:r@x,y` or `random`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Circle { radius: f64, center: [f64; 2] },
    Random,
}

impl std::str::FromStr for Init {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Config(format!("bad init '{s}', expected circle:r, circle:r@x,y or random"));
        if s == "random" {
            return Ok(Init::Random);
        }
        let rest = s.strip_prefix("circle:").ok_or_else(bad)?;
        let (r, center) = match rest.split_once('@') {
            Some((r, c)) => {
                let (x, y) = c.split_once(',').ok_or_else(bad)?;
                (r, [x.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?])
            }
            None => (rest, [0.0, 0.0]),
        };
        let radius: f64 = r.trim().parse().map_err(|_| bad())?;
        if radius.is_nan() || radius <= 0.0 {
            return Err(bad());
        }
        Ok(Init::Circle { radius, center })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_parsing() {
        assert_eq!("circle:0.6".parse::<Init>().unwrap(), Init::Circle { radius: 0.6, center: [0.0, 0.0] });
        assert_eq!("circle:2@1,-0.5".parse::<Init>().unwrap(), Init::Circle { radius: 2.0, center: [1.0, -0.5] });
        assert_eq!("random".parse::<Init>().unwrap(), Init::Random);
        assert!("circle:-1".parse::<Init>().is_err());
        assert!("square:1".parse::<Init>().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_json::<RunConfig>(Path::new("x.json"), "{\n  \"seed\": 1,\n  \"colour\": 2\n}").unwrap_err();
        match err {
            CliError::Parse { line, .. } => assert!(line.contains("colour")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nonpositive_tolerance_is_rejected() {
        let cfg = RunConfig { tol: Some(0.0), ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
