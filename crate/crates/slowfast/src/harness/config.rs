//! Experiment configuration: flat `key = value` files with dotted sections
//! (JSON accepted as an alternative), every key defaulted, unknown keys
//! rejected by name.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use crate::ergodic::{AbarMethod, ErgodicParams};
use crate::error::{Result, SimError};
use crate::model::JumpOuParams;

/// Which experiment cells to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ExperimentKind {
    Check,
    Abar,
    Mixing,
    WeakRate,
    StrongRate,
    Expansion,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Check,
        ExperimentKind::Abar,
        ExperimentKind::Mixing,
        ExperimentKind::WeakRate,
        ExperimentKind::StrongRate,
        ExperimentKind::Expansion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Check => "check",
            ExperimentKind::Abar => "abar",
            ExperimentKind::Mixing => "mixing",
            ExperimentKind::WeakRate => "weak-rate",
            ExperimentKind::StrongRate => "strong-rate",
            ExperimentKind::Expansion => "expansion",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "check" => Some(ExperimentKind::Check),
            "abar" => Some(ExperimentKind::Abar),
            "mixing" => Some(ExperimentKind::Mixing),
            "weak-rate" | "weak_rate" => Some(ExperimentKind::WeakRate),
            "strong-rate" | "strong_rate" => Some(ExperimentKind::StrongRate),
            "expansion" => Some(ExperimentKind::Expansion),
            _ => None,
        }
    }
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ExperimentConfig {
    pub model_name: String,
    pub model: JumpOuParams,
    pub seed: u64,
    pub x0: f64,
    pub y0: f64,
    pub epsilons: Vec<f64>,
    pub t_end: f64,
    pub dt_factor: f64,
    /// Explicit step override; otherwise `dt_factor * min(epsilons)`.
    pub dt: Option<f64>,
    pub observable: String,
    pub n0: usize,
    pub coupled: bool,
    pub strong_n: usize,
    pub ergodic: ErgodicParams,
    pub abar_method: AbarMethod,
    pub abar_xs: Vec<f64>,
    pub quantum: f64,
    pub mixing_horizon: f64,
    pub mixing_n_paths: usize,
    pub mixing_dt: f64,
    pub mixing_y1: f64,
    pub mixing_y2: f64,
    pub expansion_epsilons: Vec<f64>,
    pub expansion_n0: usize,
    pub s_trunc: f64,
    pub u1_n: usize,
    pub u1_dt: f64,
    pub deriv_n: usize,
    pub deriv_dt: f64,
    pub experiments: Vec<ExperimentKind>,
    pub out_dir: PathBuf,
    pub threads: usize,
    pub dump_paths: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model_name: "jump_ou".into(),
            model: JumpOuParams::default(),
            seed: 2024,
            x0: 0.0,
            y0: 0.5,
            epsilons: (3..=8).map(|k| 2.0_f64.powi(-k)).collect(),
            t_end: 1.0,
            dt_factor: 0.1,
            dt: None,
            observable: "tanh_sum".into(),
            n0: 100_000,
            coupled: true,
            strong_n: 100_000,
            ergodic: ErgodicParams {
                burn_in: 10.0,
                horizon: 100.0,
                n_paths: 10_000,
                dt: 0.01,
            },
            abar_method: AbarMethod::TimeAverage,
            abar_xs: vec![0.0, 1.0],
            quantum: 1e-3,
            mixing_horizon: 4.0,
            mixing_n_paths: 64,
            mixing_dt: 0.005,
            mixing_y1: 3.0,
            mixing_y2: -1.0,
            expansion_epsilons: (3..=6).map(|k| 2.0_f64.powi(-k)).collect(),
            expansion_n0: 50_000,
            s_trunc: 12.0,
            u1_n: 20_000,
            u1_dt: 0.01,
            deriv_n: 20_000,
            deriv_dt: 0.005,
            experiments: ExperimentKind::ALL.to_vec(),
            out_dir: PathBuf::from("out"),
            threads: 0,
            dump_paths: 0,
        }
    }
}

fn config_err(field: &str, message: impl Into<String>) -> SimError {
    SimError::Config {
        field: field.into(),
        message: message.into(),
    }
}

/// Parse one numeric token, allowing the `2^-k` shorthand common in
/// epsilon grids.
fn parse_number(field: &str, tok: &str) -> Result<f64> {
    if let Some(exp) = tok.strip_prefix("2^") {
        let e: i32 = exp
            .parse()
            .map_err(|_| config_err(field, format!("bad exponent in `{tok}`")))?;
        return Ok(2.0_f64.powi(e));
    }
    tok.parse()
        .map_err(|_| config_err(field, format!("`{tok}` is not a number")))
}

fn parse_list(field: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split([',', ' '])
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_number(field, t.trim()))
        .collect()
}

impl ExperimentConfig {
    /// Load a config file; JSON when the content starts with `{`, flat
    /// `key = value` lines otherwise.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_auto(&text)
    }

    pub fn from_str_auto(text: &str) -> Result<Self> {
        let kv = if text.trim_start().starts_with('{') {
            json_to_kv(text)?
        } else {
            flat_to_kv(text)?
        };
        Self::from_kv(&kv)
    }

    /// Build from a dotted key-value map; unknown keys are errors.
    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen: BTreeSet<&str> = BTreeSet::new();

        for (key, value) in kv {
            seen.insert(key.as_str());
            let v = value.trim();
            match key.as_str() {
                "model.name" => cfg.model_name = v.into(),
                "model.gamma" => cfg.model.gamma = parse_number(key, v)?,
                "model.sigma" => cfg.model.sigma = parse_number(key, v)?,
                "model.kappa" => cfg.model.kappa = parse_number(key, v)?,
                "model.lambda2" => cfg.model.lambda2 = parse_number(key, v)?,
                "model.sigma_b" => cfg.model.sigma_b = parse_number(key, v)?,
                "model.c0" => cfg.model.c0 = parse_number(key, v)?,
                "model.lambda1" => cfg.model.lambda1 = parse_number(key, v)?,
                "model.bounded_read" => {
                    cfg.model.bounded_read = parse_bool(key, v)?;
                }
                "seed" => {
                    cfg.seed = v
                        .parse()
                        .map_err(|_| config_err(key, "seed must be a u64"))?
                }
                "x0" => cfg.x0 = parse_number(key, v)?,
                "y0" => cfg.y0 = parse_number(key, v)?,
                "scale.epsilons" | "epsilons" => cfg.epsilons = parse_list("epsilons", v)?,
                "scale.t" => cfg.t_end = parse_number(key, v)?,
                "scale.dt_factor" => cfg.dt_factor = parse_number(key, v)?,
                "scale.dt" => cfg.dt = Some(parse_number(key, v)?),
                "observable" => cfg.observable = v.into(),
                "estimator.n0" => cfg.n0 = parse_usize(key, v)?,
                "estimator.coupled" => cfg.coupled = parse_bool(key, v)?,
                "estimator.strong_n" => cfg.strong_n = parse_usize(key, v)?,
                "ergodic.burn_in" => cfg.ergodic.burn_in = parse_number(key, v)?,
                "ergodic.horizon" => cfg.ergodic.horizon = parse_number(key, v)?,
                "ergodic.n_paths" => cfg.ergodic.n_paths = parse_usize(key, v)?,
                "ergodic.dt" => cfg.ergodic.dt = parse_number(key, v)?,
                "ergodic.quantum" => cfg.quantum = parse_number(key, v)?,
                "abar.method" => {
                    cfg.abar_method = match v {
                        "time_average" => AbarMethod::TimeAverage,
                        "ensemble" => AbarMethod::Ensemble,
                        _ => {
                            return Err(config_err(
                                key,
                                "expected `time_average` or `ensemble`",
                            ))
                        }
                    }
                }
                "abar.xs" => cfg.abar_xs = parse_list(key, v)?,
                "mixing.horizon" => cfg.mixing_horizon = parse_number(key, v)?,
                "mixing.n_paths" => cfg.mixing_n_paths = parse_usize(key, v)?,
                "mixing.dt" => cfg.mixing_dt = parse_number(key, v)?,
                "mixing.y1" => cfg.mixing_y1 = parse_number(key, v)?,
                "mixing.y2" => cfg.mixing_y2 = parse_number(key, v)?,
                "expansion.epsilons" => cfg.expansion_epsilons = parse_list(key, v)?,
                "expansion.n0" => cfg.expansion_n0 = parse_usize(key, v)?,
                "expansion.s_trunc" => cfg.s_trunc = parse_number(key, v)?,
                "expansion.n" => cfg.u1_n = parse_usize(key, v)?,
                "expansion.dt" => cfg.u1_dt = parse_number(key, v)?,
                "expansion.deriv_n" => cfg.deriv_n = parse_usize(key, v)?,
                "expansion.deriv_dt" => cfg.deriv_dt = parse_number(key, v)?,
                "experiments" => {
                    let mut kinds = Vec::new();
                    for tok in v.split([',', ' ']).filter(|t| !t.trim().is_empty()) {
                        let kind = ExperimentKind::parse(tok.trim())
                            .ok_or_else(|| config_err(key, format!("unknown experiment `{tok}`")))?;
                        kinds.push(kind);
                    }
                    cfg.experiments = kinds;
                }
                "out" => cfg.out_dir = PathBuf::from(v),
                "threads" => cfg.threads = parse_usize(key, v)?,
                "paths.dump" => cfg.dump_paths = parse_usize(key, v)?,
                other => return Err(config_err(other, "unknown configuration key")),
            }
        }
        Ok(cfg)
    }

    /// The effective step for the rate experiments.
    pub fn effective_dt(&self) -> f64 {
        self.dt.unwrap_or_else(|| {
            let eps_min = self.epsilons.iter().cloned().fold(f64::INFINITY, f64::min);
            self.dt_factor * eps_min
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.model_name != "jump_ou" {
            return Err(config_err(
                "model.name",
                format!("unknown model `{}` (built-in: jump_ou)", self.model_name),
            ));
        }
        if self.epsilons.is_empty() {
            return Err(config_err("epsilons", "need at least one epsilon"));
        }
        let mut sorted = self.epsilons.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(config_err("epsilons", "epsilons must be distinct"));
            }
        }
        for &e in &self.epsilons {
            if !(e > 0.0 && e <= 1.0) {
                return Err(config_err(
                    "epsilons",
                    format!("epsilon {e} outside (0, 1]"),
                ));
            }
        }
        if !(self.t_end > 0.0) {
            return Err(config_err("scale.t", "horizon must be positive"));
        }
        if !(self.effective_dt() > 0.0) {
            return Err(config_err("scale.dt", "step must be positive"));
        }
        if self.n0 < 2 || self.strong_n < 2 {
            return Err(config_err("estimator.n0", "need at least 2 samples"));
        }
        if crate::weakerror::Observable::by_name(&self.observable).is_none() {
            return Err(config_err(
                "observable",
                format!("unknown observable `{}`", self.observable),
            ));
        }
        self.ergodic
            .validate()
            .map_err(|e| config_err("ergodic", e.to_string()))?;
        if self.mixing_y1 == self.mixing_y2 {
            return Err(config_err("mixing.y1", "mixing starts must differ"));
        }
        Ok(())
    }

    /// Flat echo of every resolved setting, for the manifest.
    pub fn resolved_kv(&self) -> BTreeMap<String, String> {
        let mut kv = BTreeMap::new();
        let fmt_list = |xs: &[f64]| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        kv.insert("model.name".into(), self.model_name.clone());
        kv.insert("model.gamma".into(), self.model.gamma.to_string());
        kv.insert("model.sigma".into(), self.model.sigma.to_string());
        kv.insert("model.kappa".into(), self.model.kappa.to_string());
        kv.insert("model.lambda2".into(), self.model.lambda2.to_string());
        kv.insert("model.sigma_b".into(), self.model.sigma_b.to_string());
        kv.insert("model.c0".into(), self.model.c0.to_string());
        kv.insert("model.lambda1".into(), self.model.lambda1.to_string());
        kv.insert(
            "model.bounded_read".into(),
            self.model.bounded_read.to_string(),
        );
        kv.insert("seed".into(), self.seed.to_string());
        kv.insert("x0".into(), self.x0.to_string());
        kv.insert("y0".into(), self.y0.to_string());
        kv.insert("scale.epsilons".into(), fmt_list(&self.epsilons));
        kv.insert("scale.t".into(), self.t_end.to_string());
        kv.insert("scale.dt_factor".into(), self.dt_factor.to_string());
        kv.insert("scale.dt".into(), self.effective_dt().to_string());
        kv.insert("observable".into(), self.observable.clone());
        kv.insert("estimator.n0".into(), self.n0.to_string());
        kv.insert("estimator.coupled".into(), self.coupled.to_string());
        kv.insert("estimator.strong_n".into(), self.strong_n.to_string());
        kv.insert("ergodic.burn_in".into(), self.ergodic.burn_in.to_string());
        kv.insert("ergodic.horizon".into(), self.ergodic.horizon.to_string());
        kv.insert("ergodic.n_paths".into(), self.ergodic.n_paths.to_string());
        kv.insert("ergodic.dt".into(), self.ergodic.dt.to_string());
        kv.insert("ergodic.quantum".into(), self.quantum.to_string());
        kv.insert(
            "abar.method".into(),
            match self.abar_method {
                AbarMethod::TimeAverage => "time_average".into(),
                AbarMethod::Ensemble => "ensemble".to_string(),
            },
        );
        kv.insert("abar.xs".into(), fmt_list(&self.abar_xs));
        kv.insert("mixing.horizon".into(), self.mixing_horizon.to_string());
        kv.insert("mixing.n_paths".into(), self.mixing_n_paths.to_string());
        kv.insert("mixing.dt".into(), self.mixing_dt.to_string());
        kv.insert("mixing.y1".into(), self.mixing_y1.to_string());
        kv.insert("mixing.y2".into(), self.mixing_y2.to_string());
        kv.insert(
            "expansion.epsilons".into(),
            fmt_list(&self.expansion_epsilons),
        );
        kv.insert("expansion.n0".into(), self.expansion_n0.to_string());
        kv.insert("expansion.s_trunc".into(), self.s_trunc.to_string());
        kv.insert("expansion.n".into(), self.u1_n.to_string());
        kv.insert("expansion.dt".into(), self.u1_dt.to_string());
        kv.insert("expansion.deriv_n".into(), self.deriv_n.to_string());
        kv.insert("expansion.deriv_dt".into(), self.deriv_dt.to_string());
        kv.insert(
            "experiments".into(),
            self.experiments
                .iter()
                .map(|e| e.name())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv.insert("out".into(), self.out_dir.display().to_string());
        kv.insert("threads".into(), self.threads.to_string());
        kv.insert("paths.dump".into(), self.dump_paths.to_string());
        kv
    }
}

fn parse_bool(field: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(config_err(field, format!("`{v}` is not a boolean"))),
    }
}

fn parse_usize(field: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| config_err(field, format!("`{v}` is not a non-negative integer")))
}

/// Parse `key = value` lines; `#` starts a comment.
fn flat_to_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut kv = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            config_err(
                "config",
                format!("line {}: expected `key = value`", lineno + 1),
            )
        })?;
        kv.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(kv)
}

/// Flatten a JSON object into dotted keys; arrays become comma-joined
/// scalars.
fn json_to_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| config_err("config", format!("invalid JSON: {e}")))?;
    let mut kv = BTreeMap::new();
    flatten_json("", &value, &mut kv)?;
    Ok(kv)
}

fn flatten_json(
    prefix: &str,
    value: &serde_json::Value,
    kv: &mut BTreeMap<String, String>,
) -> Result<()> {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten_json(&key, v, kv)?;
            }
            Ok(())
        }
        Value::Array(items) => {
            let toks: Vec<String> = items
                .iter()
                .map(|v| match v {
                    Value::Number(n) => Ok(n.to_string()),
                    Value::String(s) => Ok(s.clone()),
                    _ => Err(config_err(prefix, "arrays may hold numbers or strings")),
                })
                .collect::<Result<_>>()?;
            kv.insert(prefix.to_string(), toks.join(","));
            Ok(())
        }
        Value::String(s) => {
            kv.insert(prefix.to_string(), s.clone());
            Ok(())
        }
        Value::Number(n) => {
            kv.insert(prefix.to_string(), n.to_string());
            Ok(())
        }
        Value::Bool(b) => {
            kv.insert(prefix.to_string(), b.to_string());
            Ok(())
        }
        Value::Null => Ok(()),
    }
}
