//! Experiment configuration: flat `key = value` text files with `#`
//! comments, overridable from the command line key by key.

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::engine::{NoiseKind, RegretConvention};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Which graph to build; custom topologies point at an edge-list file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopologySpec {
    Complete,
    Cycle,
    Path,
    KRegular(usize),
    CustomFile(PathBuf),
}

impl TopologySpec {
    pub fn parse(value: &str) -> Result<Self, String> {
        let v = value.trim();
        if let Some(path) = v.strip_prefix("custom:") {
            if path.is_empty() {
                return Err("custom topology needs a file path, e.g. custom:edges.txt".into());
            }
            return Ok(TopologySpec::CustomFile(PathBuf::from(path)));
        }
        match v {
            "complete" => Ok(TopologySpec::Complete),
            "cycle" => Ok(TopologySpec::Cycle),
            "path" => Ok(TopologySpec::Path),
            _ => {
                // Accept both "k-regular:8" and "8-regular".
                let k = v
                    .strip_prefix("k-regular:")
                    .or_else(|| v.strip_suffix("-regular"))
                    .and_then(|k| k.parse::<usize>().ok());
                k.map(TopologySpec::KRegular).ok_or_else(|| {
                    format!(
                        "unknown topology {v:?} (expected complete, cycle, path, \
                         k-regular:<k>, <k>-regular, or custom:<file>)"
                    )
                })
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            TopologySpec::Complete => "complete".into(),
            TopologySpec::Cycle => "cycle".into(),
            TopologySpec::Path => "path".into(),
            TopologySpec::KRegular(k) => format!("{k}-regular"),
            TopologySpec::CustomFile(p) => format!("custom:{}", p.display()),
        }
    }
}

impl fmt::Display for TopologySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Action-set choices; finite sets load one whitespace-separated vector per
/// line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionSpec {
    Hypercube,
    FiniteFile(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    Rounds,
    Episodes,
}

/// All knobs of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_agents: usize,
    pub horizon: usize,
    pub dimension: usize,
    pub topology: TopologySpec,
    pub self_loops: bool,
    /// Ridge regularizer; the default `4 = max(1, L^2)` matches the
    /// hypercube action bound `L = 2` at dimension 4.
    pub ridge: f64,
    /// `None` means the horizon-coupled default `1 / (4 T)`.
    pub delta: Option<f64>,
    pub noise_scale: f64,
    pub param_bound: f64,
    pub actions: ActionSpec,
    pub seed: u64,
    pub repetitions: usize,
    pub convention: RegretConvention,
    pub normalize: bool,
    pub noise_kind: NoiseKind,
    pub x_axis: XAxis,
    pub trace_consensus: bool,
}

impl ExperimentConfig {
    /// Defaults for a given network size and horizon: dimension 4, the
    /// hypercube `[-1, 1]^4`, noise scale 0.1, ridge 4, delta `1/(4T)`,
    /// 100 repetitions.
    pub fn defaults_for(n_agents: usize, horizon: usize) -> Self {
        ExperimentConfig {
            n_agents,
            horizon,
            dimension: 4,
            topology: TopologySpec::Complete,
            self_loops: true,
            ridge: 4.0,
            delta: None,
            noise_scale: 0.1,
            param_bound: 1.0,
            actions: ActionSpec::Hypercube,
            seed: 1,
            repetitions: 100,
            convention: RegretConvention::ZeroRewardDuringComm,
            normalize: true,
            noise_kind: NoiseKind::Gaussian,
            x_axis: XAxis::Rounds,
            trace_consensus: false,
        }
    }

    pub fn effective_delta(&self) -> f64 {
        self.delta.unwrap_or(1.0 / (4.0 * self.horizon as f64))
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_str_relative(&text, path.parent())
    }

    pub fn from_config_str(text: &str) -> Result<Self, ConfigError> {
        Self::from_str_relative(text, None)
    }

    /// Relative paths inside a config file resolve against the file's
    /// directory.
    fn from_str_relative(text: &str, base: Option<&Path>) -> Result<Self, ConfigError> {
        let mut n_agents: Option<usize> = None;
        let mut horizon: Option<usize> = None;
        let mut pending: Vec<(usize, String, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Parse {
                line,
                msg: format!("expected `key = value`, got {content:?}"),
            })?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().to_string();
            match key.as_str() {
                "n_agents" => n_agents = Some(parse_num(line, &key, &value)?),
                "horizon" => horizon = Some(parse_num(line, &key, &value)?),
                _ => pending.push((line, key, value)),
            }
        }
        let mut cfg = ExperimentConfig::defaults_for(
            n_agents.ok_or(ConfigError::MissingKey("n_agents"))?,
            horizon.ok_or(ConfigError::MissingKey("horizon"))?,
        );
        for (line, key, value) in pending {
            cfg.set(&key, &value)
                .map_err(|msg| ConfigError::Parse { line, msg })?;
        }
        if let Some(base) = base {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let TopologySpec::CustomFile(p) = &self.topology {
            if p.is_relative() {
                self.topology = TopologySpec::CustomFile(base.join(p));
            }
        }
        if let ActionSpec::FiniteFile(p) = &self.actions {
            if p.is_relative() {
                self.actions = ActionSpec::FiniteFile(base.join(p));
            }
        }
    }

    /// Sets one key from its textual form; used for both file parsing and
    /// CLI overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "n_agents" => self.n_agents = parse_plain(key, value)?,
            "horizon" => self.horizon = parse_plain(key, value)?,
            "dimension" => self.dimension = parse_plain(key, value)?,
            "topology" => self.topology = TopologySpec::parse(value)?,
            "self_loops" => self.self_loops = parse_bool(key, value)?,
            "lambda" | "ridge" => self.ridge = parse_plain(key, value)?,
            "delta" => {
                self.delta = if value.eq_ignore_ascii_case("auto") {
                    None
                } else {
                    Some(parse_plain(key, value)?)
                }
            }
            "noise_scale" => self.noise_scale = parse_plain(key, value)?,
            "param_bound" => self.param_bound = parse_plain(key, value)?,
            "action_set" => {
                self.actions = if value == "hypercube" {
                    ActionSpec::Hypercube
                } else if let Some(path) = value.strip_prefix("finite:") {
                    ActionSpec::FiniteFile(PathBuf::from(path))
                } else {
                    return Err(format!(
                        "unknown action_set {value:?} (expected hypercube or finite:<file>)"
                    ));
                }
            }
            "seed" => self.seed = parse_plain(key, value)?,
            "repetitions" => self.repetitions = parse_plain(key, value)?,
            "regret_convention" => {
                self.convention = match value {
                    "zero-reward" => RegretConvention::ZeroRewardDuringComm,
                    "hold-last-action" => RegretConvention::HoldLastAction,
                    _ => {
                        return Err(format!(
                            "unknown regret_convention {value:?} \
                             (expected zero-reward or hold-last-action)"
                        ))
                    }
                }
            }
            "normalize" => self.normalize = parse_bool(key, value)?,
            "noise" => {
                self.noise_kind = match value {
                    "gaussian" => NoiseKind::Gaussian,
                    "uniform" => NoiseKind::UniformBounded,
                    _ => return Err(format!("unknown noise {value:?} (gaussian or uniform)")),
                }
            }
            "x_axis" => {
                self.x_axis = match value {
                    "rounds" => XAxis::Rounds,
                    "episodes" => XAxis::Episodes,
                    _ => return Err(format!("unknown x_axis {value:?} (rounds or episodes)")),
                }
            }
            "trace_consensus" => self.trace_consensus = parse_bool(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        if self.n_agents == 0 {
            problems.push("n_agents must be at least 1".to_string());
        }
        if self.horizon == 0 {
            problems.push("horizon must be at least 1".to_string());
        }
        if self.dimension == 0 {
            problems.push("dimension must be at least 1".to_string());
        }
        if self.repetitions == 0 {
            problems.push("repetitions must be at least 1".to_string());
        }
        if self.ridge <= 0.0 {
            problems.push(format!("lambda must be positive, got {}", self.ridge));
        }
        if self.noise_scale < 0.0 {
            problems.push(format!(
                "noise_scale must be nonnegative, got {}",
                self.noise_scale
            ));
        }
        if self.param_bound <= 0.0 {
            problems.push(format!(
                "param_bound must be positive, got {}",
                self.param_bound
            ));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 1.0) {
                problems.push(format!("delta must lie in (0, 1), got {d}"));
            }
        }
        if let TopologySpec::KRegular(k) = self.topology {
            if k % 2 != 0 || k >= self.n_agents {
                problems.push(format!(
                    "k-regular topology requires even k < n_agents (k={k}, n={})",
                    self.n_agents
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems.join("; ")))
        }
    }

    /// Short label used in CSV rows and plot legends.
    pub fn config_id(&self) -> String {
        format!("{}-n{}", self.topology.label(), self.n_agents)
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Parse {
        line,
        msg: format!("invalid value {value:?} for `{key}`"),
    })
}

fn parse_plain<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value {value:?} for `{key}`"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("invalid boolean {value:?} for `{key}`")),
    }
}
