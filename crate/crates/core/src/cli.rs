//! Command-line front end: TOML run configuration, sweep execution and
//! CSV/JSON output.
//!
//! A configuration file has a handful of top-level keys and optional
//! sections; every key may be omitted.
//!
//! ```toml
//! games = ["mf_power", "mmse_power", "mmse_beam_power", "sic_power"]
//! K = [2, 4, 6, 8, 10]
//! n_rx = [4, 8]
//! trials = 100
//! seed = 2008
//! threads = 4
//!
//! [system]
//! n_tx = 4
//! noise_psd = 1e-9
//! rate = 1e5
//! packet_len = 120
//! info_len = 120
//! p_max_dbw = -25.0        # or p_max_w, not both
//!
//! [channel]
//! model = "rayleigh_entries"
//! placement = "uniform_distance"   # or "fixed" with distances = [...]
//! d_min = 10.0
//! d_max = 1000.0
//!
//! [solver]
//! tol = 1e-6
//!
//! [output]
//! dir = "out"
//! formats = ["csv", "json"]
//!
//! [single]
//! trial = 0
//! nash_deltas = [0.01, 0.05, 0.1]
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::efficiency::{from_db, to_db};
use crate::games::{solve_game, verify_nash, GameError, GameKind, NashCheck, SolverOptions};
use crate::model::{
    default_params, sample_scenario, ChannelModel, ModelError, Placement, RngHandle, SystemParams,
    DEFAULT_D_MAX, DEFAULT_D_MIN, RNG_ALGORITHM,
};
use crate::montecarlo::{run_sweep, ParamOverrides, SweepError, SweepSpec, SweepSummary};
use crate::numerics::Vector;

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_SEED: u64 = 2008;
pub const DEFAULT_K_VALUES: [usize; 5] = [2, 4, 6, 8, 10];
pub const DEFAULT_N_RX_VALUES: [usize; 2] = [4, 8];
pub const CSV_FILE: &str = "summary.csv";
pub const JSON_FILE: &str = "summary.json";
pub const METADATA_FILE: &str = "metadata.json";
pub const SINGLE_FILE: &str = "single.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("serialization: {0}")]
    Serialize(String),
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PlacementMode {
    UniformDistance,
    Fixed,
}

/// Reference system parameters with every value filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_tx: usize,
    pub noise_psd: f64,
    pub rate: f64,
    pub packet_len: u32,
    pub info_len: u32,
    pub p_max_w: f64,
    pub channel_model: ChannelModel,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let p = default_params(1, 1).expect("reference parameters are valid");
        SystemConfig {
            n_tx: p.n_tx,
            noise_psd: p.noise_psd,
            rate: p.rate,
            packet_len: p.packet_len,
            info_len: p.info_len,
            p_max_w: p.p_max,
            channel_model: p.channel_model,
        }
    }
}

impl SystemConfig {
    pub fn overrides(&self) -> ParamOverrides {
        ParamOverrides {
            n_tx: Some(self.n_tx),
            noise_psd: Some(self.noise_psd),
            rate: Some(self.rate),
            packet_len: Some(self.packet_len),
            info_len: Some(self.info_len),
            p_max: Some(self.p_max_w),
            channel_model: Some(self.channel_model),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
        }
    }
}

/// Settings for the single-scenario report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleConfig {
    /// Stream index of the scenario, matching trial `trial` of a sweep.
    pub trial: u64,
    pub nash_deltas: Vec<f64>,
}

impl Default for SingleConfig {
    fn default() -> Self {
        SingleConfig {
            trial: 0,
            nash_deltas: vec![0.01, 0.05, 0.1],
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub games: Vec<GameKind>,
    pub k_values: Vec<usize>,
    pub n_rx_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub system: SystemConfig,
    pub placement: Placement,
    pub solver: SolverOptions,
    pub output: OutputConfig,
    pub single: SingleConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            games: GameKind::ALL.to_vec(),
            k_values: DEFAULT_K_VALUES.to_vec(),
            n_rx_values: DEFAULT_N_RX_VALUES.to_vec(),
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            threads: None,
            system: SystemConfig::default(),
            placement: Placement::default(),
            solver: SolverOptions::default(),
            output: OutputConfig::default(),
            single: SingleConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            games: self.games.clone(),
            k_values: self.k_values.clone(),
            n_rx_values: self.n_rx_values.clone(),
            trials: self.trials,
            base_seed: self.seed,
            overrides: self.system.overrides(),
            placement: self.placement.clone(),
            solver: self.solver.clone(),
            threads: self.threads,
        }
    }

    /// Serializes back to the file format; `parse_config` of the result
    /// yields an equal config.
    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(&ConfigFile::from_resolved(self)?)
            .map_err(|e| CliError::Serialize(e.to_string()))
    }

    /// Applies command-line overrides on top of the file values.
    pub fn apply_args(&mut self, args: &Args) -> Result<(), CliError> {
        if let Some(dir) = &args.out {
            self.output.dir = dir.clone();
        }
        if let Some(seed) = args.seed {
            self.seed = seed;
        }
        if let Some(t) = args.trials {
            self.trials = positive_usize("trials", t as i64)?;
        }
        if let Some(games) = &args.games {
            self.games = games
                .iter()
                .map(|g| {
                    g.parse()
                        .map_err(|e: String| config_err(format!("--games: {e}")))
                })
                .collect::<Result<_, _>>()?;
            non_empty("games", &self.games)?;
        }
        if let Some(ks) = &args.k {
            self.k_values = positive_list("K", ks.iter().map(|&k| k as i64))?;
        }
        if let Some(ns) = &args.nrx {
            self.n_rx_values = positive_list("n_rx", ns.iter().map(|&k| k as i64))?;
        }
        if let Some(t) = args.threads {
            self.threads = Some(positive_usize("threads", t as i64)?);
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// file schema

#[derive(Debug, Default, Serialize, Deserialize)]
struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    games: Option<Vec<GameKind>>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    k: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_rx: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threads: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    system: Option<SystemSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    channel: Option<ChannelSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solver: Option<SolverSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<OutputSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    single: Option<SingleSection>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct SystemSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    n_tx: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_psd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    packet_len: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    info_len: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_max_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_max_dbw: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct ChannelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<ChannelModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    placement: Option<PlacementMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    distances: Option<Vec<f64>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct SolverSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_power_rounds: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_joint_rounds: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beam_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beam_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    power_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    step_shrink: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    step_floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stall_window: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cold_start_fraction: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    formats: Option<Vec<OutputFormat>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct SingleSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    trial: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nash_deltas: Option<Vec<f64>>,
}

fn positive_usize(key: &str, v: i64) -> Result<usize, CliError> {
    if v >= 1 {
        Ok(v as usize)
    } else {
        Err(config_err(format!(
            "`{key}` must be a positive integer, got {v}"
        )))
    }
}

fn non_negative_u64(key: &str, v: i64) -> Result<u64, CliError> {
    u64::try_from(v).map_err(|_| config_err(format!("`{key}` must be nonnegative, got {v}")))
}

fn positive_f64(key: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(config_err(format!(
            "`{key}` must be positive and finite, got {v}"
        )))
    }
}

fn unit_interval(key: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(config_err(format!("`{key}` must lie in (0, 1], got {v}")))
    }
}

fn positive_list(key: &str, vs: impl Iterator<Item = i64>) -> Result<Vec<usize>, CliError> {
    let out = vs
        .enumerate()
        .map(|(i, v)| positive_usize(&format!("{key}[{i}]"), v))
        .collect::<Result<Vec<_>, _>>()?;
    non_empty(key, &out)?;
    Ok(out)
}

fn non_empty<T>(key: &str, vs: &[T]) -> Result<(), CliError> {
    if vs.is_empty() {
        Err(config_err(format!("`{key}` must not be empty")))
    } else {
        Ok(())
    }
}

fn to_i64(key: &str, v: u64) -> Result<i64, CliError> {
    i64::try_from(v)
        .map_err(|_| CliError::Serialize(format!("`{key}` = {v} does not fit a TOML integer")))
}

impl ConfigFile {
    fn resolve(self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(g) = self.games {
            non_empty("games", &g)?;
            cfg.games = g;
        }
        if let Some(k) = self.k {
            cfg.k_values = positive_list("K", k.into_iter())?;
        }
        if let Some(n) = self.n_rx {
            cfg.n_rx_values = positive_list("n_rx", n.into_iter())?;
        }
        if let Some(t) = self.trials {
            cfg.trials = positive_usize("trials", t)?;
        }
        if let Some(s) = self.seed {
            cfg.seed = non_negative_u64("seed", s)?;
        }
        if let Some(t) = self.threads {
            cfg.threads = Some(positive_usize("threads", t)?);
        }

        let sys = self.system.unwrap_or_default();
        let s = &mut cfg.system;
        if let Some(v) = sys.n_tx {
            s.n_tx = positive_usize("system.n_tx", v)?;
        }
        if let Some(v) = sys.noise_psd {
            s.noise_psd = positive_f64("system.noise_psd", v)?;
        }
        if let Some(v) = sys.rate {
            s.rate = positive_f64("system.rate", v)?;
        }
        if let Some(v) = sys.packet_len {
            if !(2..=u32::MAX as i64).contains(&v) {
                return Err(config_err(format!(
                    "`system.packet_len` must be at least 2, got {v}"
                )));
            }
            s.packet_len = v as u32;
            s.info_len = v as u32;
        }
        if let Some(v) = sys.info_len {
            let v = positive_usize("system.info_len", v)?;
            s.info_len = u32::try_from(v)
                .map_err(|_| config_err(format!("`system.info_len` too large: {v}")))?;
        }
        match (sys.p_max_w, sys.p_max_dbw) {
            (Some(_), Some(_)) => {
                return Err(config_err(
                    "`system.p_max_w` and `system.p_max_dbw` are mutually exclusive",
                ))
            }
            (Some(w), None) => s.p_max_w = positive_f64("system.p_max_w", w)?,
            (None, Some(db)) => {
                if !db.is_finite() {
                    return Err(config_err(format!(
                        "`system.p_max_dbw` must be finite, got {db}"
                    )));
                }
                s.p_max_w = from_db(db);
            }
            (None, None) => {}
        }

        let ch = self.channel.unwrap_or_default();
        if let Some(m) = ch.model {
            cfg.system.channel_model = m;
        }
        let mode = ch.placement.unwrap_or(if ch.distances.is_some() {
            PlacementMode::Fixed
        } else {
            PlacementMode::UniformDistance
        });
        cfg.placement = match mode {
            PlacementMode::UniformDistance => {
                if ch.distances.is_some() {
                    return Err(config_err(
                        "`channel.distances` requires `channel.placement = \"fixed\"`",
                    ));
                }
                let d_min = positive_f64("channel.d_min", ch.d_min.unwrap_or(DEFAULT_D_MIN))?;
                let d_max = positive_f64("channel.d_max", ch.d_max.unwrap_or(DEFAULT_D_MAX))?;
                if d_max < d_min {
                    return Err(config_err(format!(
                        "`channel.d_max` ({d_max}) must not be below `channel.d_min` ({d_min})"
                    )));
                }
                Placement::UniformDistance { d_min, d_max }
            }
            PlacementMode::Fixed => {
                if ch.d_min.is_some() || ch.d_max.is_some() {
                    return Err(config_err(
                        "`channel.d_min`/`channel.d_max` apply only to uniform_distance placement",
                    ));
                }
                let distances = ch
                    .distances
                    .ok_or_else(|| config_err("fixed placement needs `channel.distances`"))?;
                for (i, d) in distances.iter().enumerate() {
                    positive_f64(&format!("channel.distances[{i}]"), *d)?;
                }
                if cfg.k_values.iter().any(|&k| k != distances.len()) {
                    return Err(config_err(format!(
                        "`channel.distances` has {} entries but `K` = {:?}",
                        distances.len(),
                        cfg.k_values
                    )));
                }
                let p = Placement::Fixed { distances };
                p.validate(cfg.k_values[0])
                    .map_err(|e| config_err(format!("`channel.distances`: {e}")))?;
                p
            }
        };

        let sv = self.solver.unwrap_or_default();
        let o = &mut cfg.solver;
        if let Some(v) = sv.tol {
            o.tol = positive_f64("solver.tol", v)?;
        }
        if let Some(v) = sv.max_power_rounds {
            o.max_power_rounds = positive_usize("solver.max_power_rounds", v)?;
        }
        if let Some(v) = sv.max_joint_rounds {
            o.max_joint_rounds = positive_usize("solver.max_joint_rounds", v)?;
        }
        if let Some(v) = sv.beam_tol {
            o.beam_tol = positive_f64("solver.beam_tol", v)?;
        }
        if let Some(v) = sv.beam_step {
            o.beam_step = unit_interval("solver.beam_step", v)?;
        }
        if let Some(v) = sv.power_step {
            o.power_step = unit_interval("solver.power_step", v)?;
        }
        if let Some(v) = sv.step_shrink {
            o.step_shrink = unit_interval("solver.step_shrink", v)?;
        }
        if let Some(v) = sv.step_floor {
            o.step_floor = unit_interval("solver.step_floor", v)?;
        }
        if let Some(v) = sv.stall_window {
            o.stall_window = positive_usize("solver.stall_window", v)?;
        }
        if let Some(v) = sv.cold_start_fraction {
            o.cold_start_fraction = unit_interval("solver.cold_start_fraction", v)?;
        }

        let out = self.output.unwrap_or_default();
        if let Some(d) = out.dir {
            cfg.output.dir = d;
        }
        if let Some(f) = out.formats {
            cfg.output.formats = f;
        }

        let single = self.single.unwrap_or_default();
        if let Some(t) = single.trial {
            cfg.single.trial = non_negative_u64("single.trial", t)?;
        }
        if let Some(d) = single.nash_deltas {
            non_empty("single.nash_deltas", &d)?;
            for (i, v) in d.iter().enumerate() {
                if !(*v > 0.0 && *v < 1.0) {
                    return Err(config_err(format!(
                        "`single.nash_deltas[{i}]` must lie in (0, 1), got {v}"
                    )));
                }
            }
            cfg.single.nash_deltas = d;
        }

        // surfaces anything the parameter layer would reject, with its own message
        cfg.system
            .overrides()
            .build(cfg.k_values[0], cfg.n_rx_values[0])?;
        Ok(cfg)
    }

    fn from_resolved(c: &RunConfig) -> Result<Self, CliError> {
        let (placement, d_min, d_max, distances) = match &c.placement {
            Placement::UniformDistance { d_min, d_max } => (
                PlacementMode::UniformDistance,
                Some(*d_min),
                Some(*d_max),
                None,
            ),
            Placement::Fixed { distances } => {
                (PlacementMode::Fixed, None, None, Some(distances.clone()))
            }
        };
        let s = &c.solver;
        Ok(ConfigFile {
            games: Some(c.games.clone()),
            k: Some(c.k_values.iter().map(|&k| k as i64).collect()),
            n_rx: Some(c.n_rx_values.iter().map(|&k| k as i64).collect()),
            trials: Some(c.trials as i64),
            seed: Some(to_i64("seed", c.seed)?),
            threads: c.threads.map(|t| t as i64),
            system: Some(SystemSection {
                n_tx: Some(c.system.n_tx as i64),
                noise_psd: Some(c.system.noise_psd),
                rate: Some(c.system.rate),
                packet_len: Some(c.system.packet_len as i64),
                info_len: Some(c.system.info_len as i64),
                p_max_w: Some(c.system.p_max_w),
                p_max_dbw: None,
            }),
            channel: Some(ChannelSection {
                model: Some(c.system.channel_model),
                placement: Some(placement),
                d_min,
                d_max,
                distances,
            }),
            solver: Some(SolverSection {
                tol: Some(s.tol),
                max_power_rounds: Some(s.max_power_rounds as i64),
                max_joint_rounds: Some(s.max_joint_rounds as i64),
                beam_tol: Some(s.beam_tol),
                beam_step: Some(s.beam_step),
                power_step: Some(s.power_step),
                step_shrink: Some(s.step_shrink),
                step_floor: Some(s.step_floor),
                stall_window: Some(s.stall_window as i64),
                cold_start_fraction: Some(s.cold_start_fraction),
            }),
            output: Some(OutputSection {
                dir: Some(c.output.dir.clone()),
                formats: Some(c.output.formats.clone()),
            }),
            single: Some(SingleSection {
                trial: Some(to_i64("single.trial", c.single.trial)?),
                nash_deltas: Some(c.single.nash_deltas.clone()),
            }),
        })
    }
}

/// Parses and validates a TOML run configuration. Omitted keys take the
/// reference defaults. Unknown keys are all reported together.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let de = toml::Deserializer::parse(text).map_err(|e| config_err(e.to_string()))?;
    let mut unknown = Vec::new();
    // optional sections show up as `?` segments
    let mut record = |path: serde_ignored::Path<'_>| {
        unknown.push(
            path.to_string()
                .split('.')
                .filter(|s| *s != "?")
                .collect::<Vec<_>>()
                .join("."),
        )
    };
    let file: ConfigFile =
        serde_path_to_error::deserialize(serde_ignored::Deserializer::new(de, &mut record))
            .map_err(|e| {
                let path = e.path().to_string();
                config_err(format!("`{path}`: {}", e.into_inner().message()))
            })?;
    if !unknown.is_empty() {
        let list = unknown
            .iter()
            .map(|k| format!("`{k}`"))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(config_err(format!("unknown key(s): {list}")));
    }
    file.resolve()
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text)
}

// ---------------------------------------------------------------------------
// sweep output

#[derive(Debug, Serialize)]
struct CsvRow {
    game: GameKind,
    #[serde(rename = "K")]
    k: usize,
    n_rx: usize,
    mean_utility_bits_per_joule: Option<f64>,
    mean_power_w: Option<f64>,
    mean_power_dbw: Option<f64>,
    mean_sinr: Option<f64>,
    mean_sinr_db: Option<f64>,
    convergence_rate: f64,
    trials: usize,
    se_utility: Option<f64>,
    se_power: Option<f64>,
    se_sinr: Option<f64>,
}

/// One CSV row per cell; missing statistics are empty fields.
pub fn summary_csv(summary: &SweepSummary) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in &summary.cells {
        w.serialize(CsvRow {
            game: c.game,
            k: c.k,
            n_rx: c.n_rx,
            mean_utility_bits_per_joule: c.mean_utility_bits_per_joule,
            mean_power_w: c.mean_power_w,
            mean_power_dbw: c.mean_power_dbw,
            mean_sinr: c.mean_sinr,
            mean_sinr_db: c.mean_sinr_db,
            convergence_rate: c.convergence_rate,
            trials: c.trials,
            se_utility: c.se_utility,
            se_power: c.se_power,
            se_sinr: c.se_sinr,
        })
        .map_err(|e| CliError::Serialize(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Serialize(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Serialize(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellNonConvergence {
    pub game: GameKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub n_rx: usize,
    pub not_converged: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub sweep_seconds: f64,
}

/// Everything needed to re-run a sweep and get the same summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub artifact_version: String,
    pub rng_algorithm: String,
    pub base_seed: u64,
    pub target_sinr: f64,
    pub target_sinr_db: f64,
    /// Re-parsable TOML of the resolved configuration.
    pub config_toml: String,
    pub config: RunConfig,
    /// Resolved parameters for every `(K, N_R)` cell.
    pub cell_params: Vec<SystemParams>,
    pub timings: Timings,
    pub non_convergence: Vec<CellNonConvergence>,
}

/// What a run wrote.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summary: Option<SweepSummary>,
}

fn write_file(
    dir: &Path,
    name: &str,
    contents: &str,
    files: &mut Vec<PathBuf>,
) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io_err(&path))?;
    files.push(path);
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Serialize(e.to_string()))
}

/// Runs the configured sweep and writes the summary files plus metadata into
/// the output directory.
pub fn run(config: &RunConfig) -> Result<RunOutcome, CliError> {
    let start = Instant::now();
    let dir = &config.output.dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let spec = config.sweep_spec();
    let mut cell_params = Vec::new();
    for &k in &config.k_values {
        for &n_rx in &config.n_rx_values {
            cell_params.push(spec.overrides.build(k, n_rx)?);
        }
    }
    let sweep_start = Instant::now();
    let summary = run_sweep(&spec)?;
    let sweep_seconds = sweep_start.elapsed().as_secs_f64();

    let mut files = Vec::new();
    if config.output.formats.contains(&OutputFormat::Csv) {
        write_file(dir, CSV_FILE, &summary_csv(&summary)?, &mut files)?;
    }
    if config.output.formats.contains(&OutputFormat::Json) {
        write_file(dir, JSON_FILE, &to_json(&summary)?, &mut files)?;
    }
    let metadata = RunMetadata {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        rng_algorithm: RNG_ALGORITHM.to_string(),
        base_seed: config.seed,
        target_sinr: summary.target_sinr,
        target_sinr_db: to_db(summary.target_sinr),
        config_toml: config.to_toml()?,
        config: config.clone(),
        cell_params,
        timings: Timings {
            total_seconds: start.elapsed().as_secs_f64(),
            sweep_seconds,
        },
        non_convergence: summary
            .cells
            .iter()
            .map(|c| CellNonConvergence {
                game: c.game,
                k: c.k,
                n_rx: c.n_rx,
                not_converged: c.trials - c.converged - c.failed,
                failed: c.failed,
            })
            .collect(),
    };
    write_file(dir, METADATA_FILE, &to_json(&metadata)?, &mut files)?;
    Ok(RunOutcome {
        files,
        summary: Some(summary),
    })
}

// ---------------------------------------------------------------------------
// single-scenario report

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserReport {
    pub user: usize,
    pub distance_m: f64,
    pub power_w: f64,
    pub power_dbw: f64,
    pub sinr: f64,
    pub sinr_db: f64,
    pub utility_bits_per_joule: f64,
    pub at_target: bool,
    pub at_p_max: bool,
    pub filter: Vector,
    pub beamformer: Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    pub game: GameKind,
    pub converged: bool,
    pub outer_iterations: usize,
    pub power_rounds: usize,
    pub power_residual: f64,
    pub users: Vec<UserReport>,
    pub capacity_trace: Vec<Vec<f64>>,
    /// Whether no probed unilateral deviation improved any user's utility.
    pub verify_nash: bool,
    pub nash_diagnostics: NashCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleReport {
    pub artifact_version: String,
    pub rng_algorithm: String,
    pub seed: u64,
    pub stream: u64,
    pub params: SystemParams,
    pub target_sinr_db: f64,
    pub placement: Placement,
    pub games: Vec<GameReport>,
}

/// Solves every configured game on one scenario and collects per-user
/// detail. Needs exactly one value of `K` and of `n_rx`.
pub fn single_report(config: &RunConfig) -> Result<SingleReport, CliError> {
    let [k] = config.k_values[..] else {
        return Err(config_err(format!(
            "single mode needs exactly one `K`, got {:?}",
            config.k_values
        )));
    };
    let [n_rx] = config.n_rx_values[..] else {
        return Err(config_err(format!(
            "single mode needs exactly one `n_rx`, got {:?}",
            config.n_rx_values
        )));
    };
    let params = config.system.overrides().build(k, n_rx)?;
    let handle = RngHandle::new(config.seed, config.single.trial);
    let scenario = sample_scenario(&params, &config.placement, handle)?;
    let mut games = Vec::new();
    for &kind in &config.games {
        let r = solve_game(&scenario, &params, kind, &config.solver)?;
        let check = verify_nash(&scenario, &params, &r, &config.single.nash_deltas)?;
        let violations = r.structure_violations(&params);
        let users = (0..k)
            .map(|u| {
                let p = r.state.powers[u];
                UserReport {
                    user: u,
                    distance_m: scenario.distances[u],
                    power_w: p,
                    power_dbw: to_db(p),
                    sinr: r.sinr[u],
                    sinr_db: to_db(r.sinr[u]),
                    utility_bits_per_joule: r.utility[u],
                    at_target: !violations.contains(&u) && p < params.p_max_for(u),
                    at_p_max: p == params.p_max_for(u),
                    filter: r.state.filters[u].clone(),
                    beamformer: r.state.beamformers[u].clone(),
                }
            })
            .collect();
        games.push(GameReport {
            game: kind,
            converged: r.converged,
            outer_iterations: r.outer_iterations,
            power_rounds: r.power_rounds,
            power_residual: r.power_residual,
            users,
            capacity_trace: r.capacity_trace,
            verify_nash: check.passed,
            nash_diagnostics: check,
        });
    }
    Ok(SingleReport {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        rng_algorithm: RNG_ALGORITHM.to_string(),
        seed: config.seed,
        stream: config.single.trial,
        target_sinr_db: to_db(params.target_sinr),
        params,
        placement: config.placement.clone(),
        games,
    })
}

/// Writes [`single_report`] as JSON into the output directory.
pub fn emit_single(config: &RunConfig) -> Result<RunOutcome, CliError> {
    let report = single_report(config)?;
    let dir = &config.output.dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = Vec::new();
    write_file(dir, SINGLE_FILE, &to_json(&report)?, &mut files)?;
    Ok(RunOutcome {
        files,
        summary: None,
    })
}

// ---------------------------------------------------------------------------
// command line

/// Energy-efficiency game sweeps for the multiuser MIMO uplink.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "mimo-ee", version)]
pub struct Args {
    /// TOML run configuration; flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Comma-separated game kinds.
    #[arg(long, value_delimiter = ',')]
    pub games: Option<Vec<String>>,
    /// Comma-separated user counts.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<u32>>,
    /// Comma-separated receive antenna counts.
    #[arg(long, value_delimiter = ',')]
    pub nrx: Option<Vec<u32>>,
    #[arg(long)]
    pub threads: Option<u64>,
    /// Solve one scenario and write a per-user report instead of a sweep.
    #[arg(long)]
    pub single: bool,
}

/// Loads the config (if any), applies the flags and runs.
pub fn execute(args: &Args) -> Result<RunOutcome, CliError> {
    let mut config = match &args.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    config.apply_args(args)?;
    if args.single {
        emit_single(&config)
    } else {
        run(&config)
    }
}
