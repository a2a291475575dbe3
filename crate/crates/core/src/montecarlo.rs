//! Paired-trial Monte Carlo sweeps over game kind, user count and receive
//! antenna count.
//!
//! Trial `t` of every cell draws its scenario from stream `t` of the base
//! seed, so all game kinds see the same users and channels, and the `N_R = 4`
//! channels are the leading rows of the `N_R = 8` ones. Trials run in
//! parallel; results are collected by trial index and reduced in a fixed
//! order, so the summary does not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::efficiency::to_db;
use crate::games::{solve_game, GameKind, SolverOptions};
use crate::model::{
    default_params, sample_scenario, ChannelModel, ModelError, Placement, RngHandle, SystemParams,
};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("no cell for {kind} at K = {k}, N_R = {n_rx}")]
    MissingCell {
        kind: GameKind,
        k: usize,
        n_rx: usize,
    },
    #[error("cell for {kind} at K = {k}, N_R = {n_rx} has no converged trials")]
    EmptyCell {
        kind: GameKind,
        k: usize,
        n_rx: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Optional replacements for the reference system parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamOverrides {
    pub n_tx: Option<usize>,
    pub noise_psd: Option<f64>,
    pub rate: Option<f64>,
    pub packet_len: Option<u32>,
    pub info_len: Option<u32>,
    pub p_max: Option<f64>,
    pub channel_model: Option<ChannelModel>,
}

impl ParamOverrides {
    pub fn build(&self, n_users: usize, n_rx: usize) -> Result<SystemParams, ModelError> {
        let mut p = default_params(n_users, n_rx)?;
        if let Some(v) = self.n_tx {
            p.n_tx = v;
        }
        if let Some(v) = self.noise_psd {
            p.noise_psd = v;
        }
        if let Some(v) = self.rate {
            p.rate = v;
        }
        if let Some(v) = self.packet_len {
            p.packet_len = v;
            // keep L = M unless L is given explicitly
            p.info_len = v;
        }
        if let Some(v) = self.info_len {
            p.info_len = v;
        }
        if let Some(v) = self.p_max {
            p.p_max = v;
        }
        if let Some(v) = self.channel_model {
            p.channel_model = v;
        }
        p.resolve()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub games: Vec<GameKind>,
    pub k_values: Vec<usize>,
    pub n_rx_values: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
    pub overrides: ParamOverrides,
    pub placement: Placement,
    pub solver: SolverOptions,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl SweepSpec {
    pub fn new(
        games: Vec<GameKind>,
        k_values: Vec<usize>,
        n_rx_values: Vec<usize>,
        trials: usize,
        base_seed: u64,
    ) -> Self {
        SweepSpec {
            games,
            k_values,
            n_rx_values,
            trials,
            base_seed,
            overrides: ParamOverrides::default(),
            placement: Placement::default(),
            solver: SolverOptions::default(),
            threads: None,
        }
    }

    fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: &str| Err(SweepError::InvalidSpec(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.games.is_empty() || self.k_values.is_empty() || self.n_rx_values.is_empty() {
            return bad("games, K values and N_R values must be non-empty");
        }
        if self.k_values.contains(&0) || self.n_rx_values.contains(&0) {
            return bad("K and N_R values must be at least 1");
        }
        Ok(())
    }
}

/// Per-user averages of one game on one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub mean_utility: f64,
    pub mean_power: f64,
    pub mean_sinr: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub k: usize,
    pub n_rx: usize,
    /// One entry per game of the sweep, in sweep order; `Err` holds the message.
    pub games: Vec<(GameKind, Result<TrialStats, String>)>,
}

impl TrialOutcome {
    pub fn stats(&self, kind: GameKind) -> Option<&TrialStats> {
        self.games
            .iter()
            .find(|(k, _)| *k == kind)
            .and_then(|(_, r)| r.as_ref().ok())
    }
}

/// Statistics of one `(game, K, N_R)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub game: GameKind,
    pub k: usize,
    pub n_rx: usize,
    pub mean_utility_bits_per_joule: Option<f64>,
    pub mean_power_w: Option<f64>,
    pub mean_power_dbw: Option<f64>,
    pub mean_sinr: Option<f64>,
    pub mean_sinr_db: Option<f64>,
    pub convergence_rate: f64,
    pub trials: usize,
    pub converged: usize,
    /// Trials that ended in an error rather than a report.
    pub failed: usize,
    pub se_utility: Option<f64>,
    pub se_power: Option<f64>,
    pub se_sinr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub target_sinr: f64,
    pub cells: Vec<CellSummary>,
}

impl SweepSummary {
    pub fn cell(&self, kind: GameKind, k: usize, n_rx: usize) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.game == kind && c.k == k && c.n_rx == n_rx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub summary: SweepSummary,
    pub trials: Vec<TrialOutcome>,
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepSummary, SweepError> {
    Ok(run_sweep_detailed(spec)?.summary)
}

/// Like [`run_sweep`], also returning every trial's per-game averages.
pub fn run_sweep_detailed(spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    spec.validate()?;
    match spec.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| SweepError::ThreadPool(e.to_string()))?
            .install(|| sweep_inner(spec)),
        None => sweep_inner(spec),
    }
}

fn sweep_inner(spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    let mut all_trials = Vec::new();
    let mut cells = Vec::new();
    let mut target_sinr = f64::NAN;
    for &k in &spec.k_values {
        for &n_rx in &spec.n_rx_values {
            let params = spec.overrides.build(k, n_rx)?;
            target_sinr = params.target_sinr;
            let outcomes: Vec<TrialOutcome> = (0..spec.trials)
                .into_par_iter()
                .map(|t| run_trial(spec, &params, t))
                .collect();
            for &kind in &spec.games {
                cells.push(summarize(kind, k, n_rx, &outcomes));
            }
            all_trials.extend(outcomes);
        }
    }
    let rank = |g: GameKind| {
        spec.games
            .iter()
            .position(|x| *x == g)
            .unwrap_or(usize::MAX)
    };
    cells.sort_by_key(|c| {
        (
            rank(c.game),
            spec.k_values.iter().position(|x| *x == c.k),
            spec.n_rx_values.iter().position(|x| *x == c.n_rx),
        )
    });
    Ok(SweepResult {
        summary: SweepSummary { target_sinr, cells },
        trials: all_trials,
    })
}

fn run_trial(spec: &SweepSpec, params: &SystemParams, trial: usize) -> TrialOutcome {
    let handle = RngHandle::new(spec.base_seed, trial as u64);
    let scenario = sample_scenario(params, &spec.placement, handle);
    let games = spec
        .games
        .iter()
        .map(|&kind| {
            let result = match &scenario {
                Ok(sc) => solve_game(sc, params, kind, &spec.solver)
                    .map(|r| TrialStats {
                        mean_utility: r.mean_utility(),
                        mean_power: r.mean_power(),
                        mean_sinr: r.mean_sinr(),
                        converged: r.converged,
                    })
                    .map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            };
            (kind, result)
        })
        .collect();
    TrialOutcome {
        trial,
        k: params.n_users,
        n_rx: params.n_rx,
        games,
    }
}

/// Mean and standard error over trial-level means, summed in trial order.
/// With a fixed user count per cell the mean equals the per-user pooled mean.
fn mean_se(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (Some(mean), None);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some((var / n).sqrt()))
}

fn summarize(kind: GameKind, k: usize, n_rx: usize, outcomes: &[TrialOutcome]) -> CellSummary {
    let mut failed = 0;
    let mut conv: Vec<TrialStats> = Vec::new();
    for o in outcomes {
        match o.games.iter().find(|(g, _)| *g == kind).map(|(_, r)| r) {
            Some(Ok(s)) if s.converged => conv.push(*s),
            Some(Ok(_)) => {}
            Some(Err(_)) | None => failed += 1,
        }
    }
    let (mu, se_u) = mean_se(&conv.iter().map(|s| s.mean_utility).collect::<Vec<_>>());
    let (mp, se_p) = mean_se(&conv.iter().map(|s| s.mean_power).collect::<Vec<_>>());
    let (ms, se_s) = mean_se(&conv.iter().map(|s| s.mean_sinr).collect::<Vec<_>>());
    CellSummary {
        game: kind,
        k,
        n_rx,
        mean_utility_bits_per_joule: mu,
        mean_power_w: mp,
        mean_power_dbw: mp.map(to_db),
        mean_sinr: ms,
        mean_sinr_db: ms.map(to_db),
        convergence_rate: conv.len() as f64 / outcomes.len() as f64,
        trials: outcomes.len(),
        converged: conv.len(),
        failed,
        se_utility: se_u,
        se_power: se_p,
        se_sinr: se_s,
    }
}

/// Ratio of mean utilities `kind_a / kind_b` in one `(K, N_R)` cell.
pub fn paired_ratio(
    summary: &SweepSummary,
    kind_a: GameKind,
    kind_b: GameKind,
    k: usize,
    n_rx: usize,
) -> Result<f64, SweepError> {
    let get = |kind| {
        let cell = summary
            .cell(kind, k, n_rx)
            .ok_or(SweepError::MissingCell { kind, k, n_rx })?;
        cell.mean_utility_bits_per_joule
            .ok_or(SweepError::EmptyCell { kind, k, n_rx })
    };
    Ok(get(kind_a)? / get(kind_b)?)
}
