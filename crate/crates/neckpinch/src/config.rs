//! Run configuration: a flat `key = value` text format with `[sections]`,
//! plus the golden-constants table for the condition suites.

use crate::error::{Error, Result};
use crate::initial::{HigherMode, PerturbationSpec};
use crate::solver::SolverConfig;
use std::collections::BTreeMap;
use std::path::PathBuf;

/// Frozen absolute constants for the "≲"-style bounds of the condition and
/// assumption suites. Calibrated once on the first converged benchmark and
/// kept fixed thereafter; `get` falls back to 1 for any unlisted name.
#[derive(Debug, Clone)]
pub struct GoldenConstants {
    values: BTreeMap<String, f64>,
}

impl Default for GoldenConstants {
    fn default() -> Self {
        let mut values = BTreeMap::new();
        for (k, v) in [
            // smallness scales
            ("c0_small", 0.05),
            ("eps0", 0.5),
            // assumption-suite constants
            ("a1_lip", 1.0),
            ("a1_c_star", 0.9),
            ("a1_pm", 1.0),
            ("a1_pm_decay", 2.5),
            ("a1_theta5", 2.0),
            ("a3", 1.0),
            ("a5_mixed", 3.0),
            ("a5_grad", 2.5),
            ("a6", 1000.0),
            // condition-suite constants
            ("c1_dy", 1.0),
            ("c1_dth_scaled", 1.0),
            ("c1_dth", 1.0),
            ("c2_dyy", 1.0),
            ("c2_dydth_scaled", 1.0),
            ("c2_dydth", 1.0),
            ("c2_dthth", 1.0),
            ("c3_dyyy", 1.0),
            ("c3_mixed", 1.0),
            ("c3_smallness", 1.0),
            ("cr_delta", 0.1),
            ("c_star", 6.0),
            ("c1i_dy", 1.0),
            ("c1i_dth", 1.0),
            ("c2i", 5.0),
            // output-suite constants
            ("out_growth", 2.0),
            ("out_dy_scaled", 1.0),
            ("out_dth", 1.0),
            ("out_dth_kappa", 1.0),
            ("out_second", 1.0),
            ("out_second_small", 1.0),
            ("out_third", 1.0),
        ] {
            values.insert(k.to_string(), v);
        }
        Self { values }
    }
}

impl GoldenConstants {
    pub fn get(&self, name: &str) -> f64 {
        self.values.get(name).copied().unwrap_or(1.0)
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.values.insert(name.to_string(), value);
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# golden constants for condition margins\n");
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut out = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
                what: "golden constants",
                detail: format!("line {}: expected key = value", lineno + 1),
            })?;
            let value: f64 = v.trim().parse().map_err(|_| Error::Format {
                what: "golden constants",
                detail: format!("line {}: bad number {v:?}", lineno + 1),
            })?;
            out.values.insert(k.trim().to_string(), value);
        }
        Ok(out)
    }
}

/// Full batch-run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub perturbation: PerturbationSpec,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Refuse to run when an initial-data assumption margin exceeds 1.
    pub enforce_assumptions: bool,
    /// Path to a golden-constants file (empty = built-in defaults).
    pub constants_path: Option<PathBuf>,
    /// Trial count for the propagator experiments.
    pub propagator_trials: usize,
    /// Oscillator rate for the propagator experiments.
    pub propagator_alpha: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            perturbation: PerturbationSpec::default(),
            output_dir: PathBuf::from("out"),
            seed: 42,
            enforce_assumptions: true,
            constants_path: None,
            propagator_trials: 64,
            propagator_alpha: 0.5,
        }
    }
}

impl RunConfig {
    pub fn golden_constants(&self) -> Result<GoldenConstants> {
        match &self.constants_path {
            None => Ok(GoldenConstants::default()),
            Some(p) => GoldenConstants::from_text(&std::fs::read_to_string(p)?),
        }
    }

    /// Canonical text form (sections in fixed order, one key per line).
    pub fn to_text(&self) -> String {
        let s = &self.solver;
        let p = &self.perturbation;
        let mut out = String::new();
        out.push_str("[solver]\n");
        out.push_str(&format!("y_max = {}\n", s.y_max));
        out.push_str(&format!("n_y = {}\n", s.n_y));
        out.push_str(&format!("n_theta = {}\n", s.n_theta));
        out.push_str(&format!("cfl = {}\n", s.cfl));
        out.push_str(&format!("refit_interval = {}\n", s.refit_interval));
        out.push_str(&format!("optimal_every = {}\n", s.optimal_every));
        out.push_str(&format!("sample_interval = {}\n", s.sample_interval));
        out.push_str(&format!("snapshot_interval = {}\n", s.snapshot_interval));
        out.push_str(&format!("lambda_min = {}\n", s.lambda_min));
        out.push_str(&format!("v_min = {}\n", s.v_min));
        out.push_str(&format!("tau_max = {}\n", s.tau_max));
        out.push_str("\n[perturbation]\n");
        out.push_str(&format!("a0 = {}\n", p.a0));
        out.push_str(&format!("b0 = {}\n", p.b0));
        for (k, e) in p.eps.iter().enumerate() {
            out.push_str(&format!("eps{k} = {e}\n"));
        }
        for hm in &p.higher {
            out.push_str(&format!(
                "higher_mode = {} {} {}\n",
                hm.k, hm.amplitude, hm.width
            ));
        }
        out.push_str("\n[output]\n");
        out.push_str(&format!("dir = {}\n", self.output_dir.display()));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str("\n[diagnostics]\n");
        out.push_str(&format!("enforce_assumptions = {}\n", self.enforce_assumptions));
        if let Some(p) = &self.constants_path {
            out.push_str(&format!("constants = {}\n", p.display()));
        }
        out.push_str(&format!("propagator_trials = {}\n", self.propagator_trials));
        out.push_str(&format!("propagator_alpha = {}\n", self.propagator_alpha));
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        let bad = |lineno: usize, msg: String| Error::Format {
            what: "run config",
            detail: format!("line {}: {msg}", lineno + 1),
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(lineno, "expected key = value".into()))?;
            let key = k.trim();
            let val = v.trim();
            let f = || -> Result<f64> {
                val.parse()
                    .map_err(|_| bad(lineno, format!("bad number {val:?}")))
            };
            let u = || -> Result<usize> {
                val.parse()
                    .map_err(|_| bad(lineno, format!("bad integer {val:?}")))
            };
            match (section.as_str(), key) {
                ("solver", "y_max") => cfg.solver.y_max = f()?,
                ("solver", "n_y") => cfg.solver.n_y = u()?,
                ("solver", "n_theta") => cfg.solver.n_theta = u()?,
                ("solver", "cfl") => cfg.solver.cfl = f()?,
                ("solver", "refit_interval") => cfg.solver.refit_interval = f()?,
                ("solver", "optimal_every") => cfg.solver.optimal_every = u()?,
                ("solver", "sample_interval") => cfg.solver.sample_interval = f()?,
                ("solver", "snapshot_interval") => cfg.solver.snapshot_interval = f()?,
                ("solver", "lambda_min") => cfg.solver.lambda_min = f()?,
                ("solver", "v_min") => cfg.solver.v_min = f()?,
                ("solver", "tau_max") => cfg.solver.tau_max = f()?,
                ("perturbation", "a0") => cfg.perturbation.a0 = f()?,
                ("perturbation", "b0") => cfg.perturbation.b0 = f()?,
                ("perturbation", "eps0") => cfg.perturbation.eps[0] = f()?,
                ("perturbation", "eps1") => cfg.perturbation.eps[1] = f()?,
                ("perturbation", "eps2") => cfg.perturbation.eps[2] = f()?,
                ("perturbation", "eps3") => cfg.perturbation.eps[3] = f()?,
                ("perturbation", "eps4") => cfg.perturbation.eps[4] = f()?,
                ("perturbation", "higher_mode") => {
                    let parts: Vec<&str> = val.split_whitespace().collect();
                    if parts.len() != 3 {
                        return Err(bad(lineno, "higher_mode wants: k amplitude width".into()));
                    }
                    cfg.perturbation.higher.push(HigherMode {
                        k: parts[0]
                            .parse()
                            .map_err(|_| bad(lineno, "bad mode index".into()))?,
                        amplitude: parts[1]
                            .parse()
                            .map_err(|_| bad(lineno, "bad amplitude".into()))?,
                        width: parts[2]
                            .parse()
                            .map_err(|_| bad(lineno, "bad width".into()))?,
                    });
                }
                ("output", "dir") => cfg.output_dir = PathBuf::from(val),
                ("output", "seed") => {
                    cfg.seed = val
                        .parse()
                        .map_err(|_| bad(lineno, format!("bad seed {val:?}")))?
                }
                ("diagnostics", "enforce_assumptions") => {
                    cfg.enforce_assumptions = val
                        .parse()
                        .map_err(|_| bad(lineno, format!("bad bool {val:?}")))?
                }
                ("diagnostics", "constants") => cfg.constants_path = Some(PathBuf::from(val)),
                ("diagnostics", "propagator_trials") => cfg.propagator_trials = u()?,
                ("diagnostics", "propagator_alpha") => cfg.propagator_alpha = f()?,
                (sec, key) => {
                    return Err(bad(lineno, format!("unknown key {key:?} in section [{sec}]")))
                }
            }
        }
        cfg.solver.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}
