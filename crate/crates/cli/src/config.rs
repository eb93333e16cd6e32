//! JSON experiment configuration with per-experiment defaults.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use heatctl_core::mesh::build_regions;
use heatctl_core::{Interval, Mesh1D, Regularization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Hardy,
    Spectrum,
    Blowup,
    Stabilize,
    Weights,
    Carleman,
    Control,
    Observability,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Hardy,
        Experiment::Spectrum,
        Experiment::Blowup,
        Experiment::Stabilize,
        Experiment::Weights,
        Experiment::Carleman,
        Experiment::Control,
        Experiment::Observability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Hardy => "hardy",
            Experiment::Spectrum => "spectrum",
            Experiment::Blowup => "blowup",
            Experiment::Stabilize => "stabilize",
            Experiment::Weights => "weights",
            Experiment::Carleman => "carleman",
            Experiment::Control => "control",
            Experiment::Observability => "observability",
        }
    }

    fn default_n(self) -> usize {
        match self {
            Experiment::Hardy => 500,
            Experiment::Spectrum => 2000,
            Experiment::Blowup | Experiment::Stabilize | Experiment::Weights => 1000,
            Experiment::Carleman | Experiment::Control | Experiment::Observability => 200,
        }
    }

    fn default_mu(self) -> f64 {
        match self {
            Experiment::Hardy | Experiment::Spectrum | Experiment::Weights => 0.0,
            Experiment::Blowup | Experiment::Stabilize => 0.5,
            Experiment::Carleman | Experiment::Control => 0.25,
            Experiment::Observability => 0.3,
        }
    }

    fn default_nt(self) -> usize {
        match self {
            Experiment::Stabilize | Experiment::Carleman => 200,
            _ => 400,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            ConfigError(format!(
                "unknown experiment '{s}'; expected one of {}",
                Experiment::ALL.map(|e| e.name()).join(", ")
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegMode {
    None,
    Shift,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Every recognized key. Unset optional keys take per-experiment defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub mesh_n: Option<usize>,
    pub nt: Option<usize>,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub mu: Option<f64>,
    pub mu_list: Vec<f64>,
    pub gamma: f64,
    pub gamma_list: Option<Vec<f64>>,
    pub reg_mode: Option<RegMode>,
    pub reg_param: Option<f64>,
    pub eps: f64,
    pub eps_list: Vec<f64>,
    pub betas: Vec<f64>,
    pub omega: [f64; 2],
    pub omega0: [f64; 2],
    pub r0: f64,
    pub lambda: f64,
    pub lambda_grid: Vec<f64>,
    pub varpi: Option<f64>,
    pub varpi0_target: f64,
    pub theta_k: f64,
    pub carleman_r: Option<f64>,
    pub samples: usize,
    pub runs: usize,
    pub penalty: f64,
    pub target_ratio: f64,
    pub cg_tol: Option<f64>,
    pub cg_max_iter: Option<usize>,
    pub shift_list: Vec<f64>,
    pub ct_iters: usize,
    pub seed: u64,
    pub out_dir: Option<String>,
    pub dump_trajectory: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: None,
            mesh_n: None,
            nt: None,
            t_final: 0.5,
            mu: None,
            mu_list: vec![0.0, 0.25, 0.3, 0.5],
            gamma: 1.5,
            gamma_list: None,
            reg_mode: None,
            reg_param: None,
            eps: 0.05,
            eps_list: vec![0.1, 0.05, 0.025, 0.0125],
            betas: vec![0.2],
            omega: [0.3, 0.7],
            omega0: [0.4, 0.6],
            r0: 0.1,
            lambda: 2.0,
            lambda_grid: vec![2.0, 5.0, 10.0, 20.0, 50.0],
            varpi: None,
            varpi0_target: 1.0,
            theta_k: 3.0,
            carleman_r: None,
            samples: 100_000,
            runs: 20,
            penalty: 1e-8,
            target_ratio: 1e-3,
            cg_tol: None,
            cg_max_iter: None,
            shift_list: vec![10.0, 20.0, 40.0, 80.0],
            ct_iters: 30,
            seed: 0,
            out_dir: None,
            dump_trajectory: false,
        }
    }
}

fn known_keys() -> Vec<String> {
    match serde_json::to_value(ExperimentConfig::default()) {
        Ok(Value::Object(m)) => m.keys().cloned().collect(),
        _ => unreachable!("config serializes to an object"),
    }
}

/// `--set key=value`: the value is parsed as JSON, falling back to a string.
pub fn parse_override(s: &str) -> Result<(String, Value), ConfigError> {
    let (k, v) =
        s.split_once('=').ok_or_else(|| ConfigError(format!("override '{s}' is not of the form key=value")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

/// Merge overrides into a JSON object and build the validated config.
pub fn from_map(mut map: Map<String, Value>, overrides: &[(String, Value)]) -> Result<ExperimentConfig, ConfigError> {
    for (k, v) in overrides {
        map.insert(k.clone(), v.clone());
    }
    let known = known_keys();
    let mut unknown: Vec<&String> = map.keys().filter(|k| !known.contains(k)).collect();
    if !unknown.is_empty() {
        unknown.sort();
        return Err(ConfigError(format!(
            "unknown config keys: {}",
            unknown.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    if let Some(Value::String(e)) = map.get("experiment") {
        e.parse::<Experiment>()?;
    }
    let cfg: ExperimentConfig =
        serde_json::from_value(Value::Object(map)).map_err(|e| ConfigError(format!("invalid config: {e}")))?;
    Ok(cfg)
}

pub fn load_config(path: &Path, overrides: &[(String, Value)]) -> Result<ExperimentConfig, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("{} is not valid JSON: {e}", path.display())))?;
    match value {
        Value::Object(map) => from_map(map, overrides),
        _ => Err(ConfigError(format!("{} must hold a JSON object", path.display()))),
    }
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError(msg()))
    }
}

impl ExperimentConfig {
    pub fn experiment(&self) -> Experiment {
        self.experiment.unwrap_or(Experiment::Hardy)
    }

    pub fn n(&self) -> usize {
        self.mesh_n.unwrap_or_else(|| self.experiment().default_n())
    }

    pub fn nt(&self) -> usize {
        self.nt.unwrap_or_else(|| self.experiment().default_nt())
    }

    pub fn mu(&self) -> f64 {
        self.mu.unwrap_or_else(|| self.experiment().default_mu())
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.gamma_list.clone().unwrap_or_else(|| vec![self.gamma])
    }

    pub fn omega_iv(&self) -> Interval {
        Interval::new(self.omega[0], self.omega[1])
    }

    pub fn omega0_iv(&self) -> Interval {
        Interval::new(self.omega0[0], self.omega0[1])
    }

    /// Regularization for the time-dependent experiments; `shift` defaults to `m = n + 1`.
    pub fn regularization(&self) -> Regularization {
        let mode = self.reg_mode.unwrap_or(match self.experiment() {
            Experiment::Carleman => RegMode::None,
            _ => RegMode::Shift,
        });
        match mode {
            RegMode::None => Regularization::None,
            RegMode::Shift => Regularization::Shift(self.reg_param.unwrap_or((self.n() + 1) as f64)),
            RegMode::Quadratic => Regularization::Quadratic(self.reg_param.unwrap_or(self.eps)),
        }
    }

    /// Precondition checks of every module the experiment touches.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let exp = self.experiment();
        let n = self.n();
        let mesh = Mesh1D::new(n).map_err(|e| ConfigError(format!("mesh_n: {e}")))?;
        require(self.nt() >= 2, || format!("nt must be at least 2, got {}", self.nt()))?;
        require(self.t_final > 0.0, || format!("T must be positive, got {}", self.t_final))?;
        build_regions(&mesh, self.omega_iv(), self.omega0_iv(), self.r0).map_err(|e| ConfigError(e.to_string()))?;
        require(self.penalty >= 0.0, || format!("penalty must be nonnegative, got {}", self.penalty))?;
        let eps_ok = self.eps_list.iter().all(|&e| e > 0.0) && self.eps_list.windows(2).all(|w| w[1] < w[0]);
        match exp {
            Experiment::Hardy => {
                require(!self.mu_list.is_empty(), || "mu_list must not be empty".into())?;
                for g in self.gammas() {
                    require(g > 0.0 && g < 2.0, || format!("gamma must lie in (0, 2), got {g}"))?;
                }
            }
            Experiment::Spectrum => require(self.eps > 0.0, || format!("eps must be positive, got {}", self.eps))?,
            Experiment::Blowup => {
                require(eps_ok && !self.eps_list.is_empty(), || {
                    "eps_list must be positive and strictly decreasing".into()
                })?;
                let eps_min = *self.eps_list.last().unwrap_or(&1.0);
                require(mesh.h <= eps_min / 10.0, || {
                    format!("mesh too coarse: h = {} exceeds eps_min/10 = {}", mesh.h, eps_min / 10.0)
                })?;
            }
            Experiment::Stabilize => require(eps_ok && !self.eps_list.is_empty(), || {
                "eps_list must be positive and strictly decreasing".into()
            })?,
            Experiment::Weights | Experiment::Carleman => {
                require(self.gamma > 1.0 && self.gamma < 2.0, || {
                    format!("gamma must lie in (1, 2), got {}", self.gamma)
                })?;
                require(self.lambda > 1.0, || format!("lambda must exceed 1, got {}", self.lambda))?;
                require(self.lambda_grid.windows(2).all(|w| w[1] > w[0]), || "lambda_grid must be increasing".into())?;
                require(self.varpi0_target > 0.0 && self.varpi0_target <= 1.0, || {
                    format!("varpi0_target must lie in (0, 1], got {}", self.varpi0_target)
                })?;
                require(self.varpi.is_none_or(|v| v >= 1.0), || "varpi must be at least 1".into())?;
                require(self.theta_k > 0.0, || "theta_k must be positive".into())?;
                require(self.samples > 0 && self.runs > 0, || "samples and runs must be positive".into())?;
                require(self.carleman_r.is_none_or(|r| r > 0.0), || "carleman_r must be positive".into())?;
            }
            Experiment::Control | Experiment::Observability => {
                if exp == Experiment::Observability {
                    require(!self.shift_list.is_empty() && self.shift_list.iter().all(|&m| m > 0.0), || {
                        "shift_list must hold positive values".into()
                    })?;
                    require(self.ct_iters >= 10, || "ct_iters must be at least 10".into())?;
                }
            }
        }
        if let Regularization::Shift(m) | Regularization::Quadratic(m) = self.regularization() {
            require(m > 0.0, || format!("reg_param must be positive, got {m}"))?;
        }
        Ok(())
    }
}
