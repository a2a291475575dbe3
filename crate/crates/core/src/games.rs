//! Best-response dynamics for the four energy-efficiency games.
//!
//! Every game shares the same power stage: each user scales its power by
//! `γ̄/γ_k` and clips at its cap. Because `γ_k` is linear in `p_k` once the
//! filter and the other users are fixed, this is the standard
//! interference-function iteration and it converges from any positive start
//! to `p_k* = min(p̄_k, p_max)`. The games differ in what else a user
//! optimizes between power rounds:
//!
//! | kind              | filter                    | beamformer                        |
//! |-------------------|---------------------------|-----------------------------------|
//! | `mf_power`        | matched, `H_k a_k`        | fixed at dominant eigvec of HᵀH   |
//! | `mmse_power`      | MMSE, recomputed per round| fixed                             |
//! | `mmse_beam_power` | MMSE                      | dominant eigvec of `H_kᵀM_k⁻¹H_k` |
//! | `sic_power`       | SIC-MMSE in signature order| fixed                            |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::efficiency::{utility, EfficiencyError};
use crate::model::{ModelError, Scenario, SystemParams};
use crate::numerics::{dominant_eigenpair, log_det_spd, Cholesky, NumericsError, Vector};
use crate::receivers::{
    covariance_from, filters_from, order_from, signatures, sinr_quotient, sinrs_from,
    AllocationState, ReceiverError, ReceiverKind,
};

/// Relative SINR tolerance for a user to count as sitting at the target.
pub const TARGET_SINR_REL_TOL: f64 = 1e-4;
/// Largest relative utility gain a deviation may show before the point is
/// rejected as a Nash equilibrium.
pub const NASH_GAIN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("user {user} has a degenerate channel (zero effective signature)")]
    DegenerateChannel { user: usize },
    #[error(transparent)]
    Receiver(ReceiverError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Efficiency(#[from] EfficiencyError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

impl From<ReceiverError> for GameError {
    fn from(e: ReceiverError) -> Self {
        match e {
            ReceiverError::ZeroFilter { user } => GameError::DegenerateChannel { user },
            other => GameError::Receiver(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameKind {
    /// Power only, matched-filter reception.
    MfPower,
    /// Power and linear receiver.
    MmsePower,
    /// Power, beamformer and linear receiver.
    MmseBeamPower,
    /// Power and SIC receiver.
    SicPower,
}

impl GameKind {
    pub const ALL: [GameKind; 4] = [
        GameKind::MfPower,
        GameKind::MmsePower,
        GameKind::MmseBeamPower,
        GameKind::SicPower,
    ];

    pub fn receiver(self) -> ReceiverKind {
        match self {
            GameKind::MfPower => ReceiverKind::Matched,
            GameKind::MmsePower | GameKind::MmseBeamPower => ReceiverKind::Mmse,
            GameKind::SicPower => ReceiverKind::SicMmse,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GameKind::MfPower => "mf_power",
            GameKind::MmsePower => "mmse_power",
            GameKind::MmseBeamPower => "mmse_beam_power",
            GameKind::SicPower => "sic_power",
        }
    }

    fn optimizes_receiver(self) -> bool {
        self != GameKind::MfPower
    }
}

impl fmt::Display for GameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GameKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        GameKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown game `{s}` (expected one of mf_power, mmse_power, mmse_beam_power, sic_power)"))
    }
}

/// Iteration controls for [`solve_game`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Stop when `max_k |Δp_k|/p_k` falls below this.
    pub tol: f64,
    pub max_power_rounds: usize,
    /// Round cap for the beamforming game (one beam sweep plus one power
    /// update per round).
    pub max_joint_rounds: usize,
    /// Converged once no best-response beam is further than this from the
    /// current one.
    pub beam_tol: f64,
    /// Initial fraction of the way each beam moves toward its best response.
    pub beam_step: f64,
    /// Initial exponent of the power update `p (γ̄/γ)^step`.
    pub power_step: f64,
    /// Both steps shrink by this factor when a window of rounds fails to halve
    /// the residual, down to `step_floor`.
    pub step_shrink: f64,
    pub step_floor: f64,
    pub stall_window: usize,
    /// Starting power as a fraction of each user's cap.
    pub cold_start_fraction: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            max_power_rounds: 1000,
            max_joint_rounds: 2000,
            beam_tol: 1e-8,
            beam_step: 1.0,
            power_step: 0.5,
            step_shrink: 0.7,
            step_floor: 0.1,
            stall_window: 40,
            cold_start_fraction: 0.01,
        }
    }
}

/// Outcome of best-response dynamics for one game on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub kind: GameKind,
    pub state: AllocationState,
    pub sinr: Vec<f64>,
    /// Bits per joule.
    pub utility: Vec<f64>,
    pub converged: bool,
    pub outer_iterations: usize,
    pub power_rounds: usize,
    /// Last max relative power change.
    pub power_residual: f64,
    /// Sum capacity before and after each beamformer sweep, one segment per
    /// round (beamforming game only). Powers are constant within a segment
    /// and change between segments.
    pub capacity_trace: Vec<Vec<f64>>,
}

impl EquilibriumReport {
    pub fn mean_utility(&self) -> f64 {
        mean(&self.utility)
    }

    pub fn mean_power(&self) -> f64 {
        mean(&self.state.powers)
    }

    pub fn mean_sinr(&self) -> f64 {
        mean(&self.sinr)
    }

    /// Users that are neither at the target SINR nor pinned at their cap
    /// below it.
    pub fn structure_violations(&self, params: &SystemParams) -> Vec<usize> {
        let target = params.target_sinr;
        (0..self.sinr.len())
            .filter(|&k| {
                let g = self.sinr[k];
                let at_target = (g - target).abs() <= TARGET_SINR_REL_TOL * target;
                let pinned = self.state.powers[k] == params.p_max_for(k) && g < target;
                !(at_target || pinned)
            })
            .collect()
    }

    /// True when every capacity segment is non-decreasing within `rel_slack`.
    pub fn capacity_monotone(&self, rel_slack: f64) -> bool {
        self.capacity_trace.iter().all(|seg| {
            seg.windows(2)
                .all(|w| w[1] >= w[0] - rel_slack * w[0].abs().max(1.0))
        })
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// One standard power-control step for user `k`: `min(p_max, p_k γ̄/γ_k)`.
pub fn power_best_response(
    scenario: &Scenario,
    state: &AllocationState,
    noise_var: f64,
    k: usize,
    target_sinr: f64,
    p_max: f64,
) -> Result<f64, GameError> {
    let g = crate::receivers::sinr(scenario, state, noise_var, k)?;
    scaled_power(state.powers[k], g, target_sinr, p_max, k)
}

fn scaled_power(power: f64, sinr: f64, target: f64, cap: f64, k: usize) -> Result<f64, GameError> {
    if sinr.is_nan() || sinr <= 0.0 {
        return Err(GameError::DegenerateChannel { user: k });
    }
    Ok((power * target / sinr).min(cap))
}

/// `½ (log det M − N_R log(N₀/2))`.
pub fn sum_capacity(
    scenario: &Scenario,
    state: &AllocationState,
    noise_var: f64,
) -> Result<f64, GameError> {
    capacity_from(&signatures(scenario, state), &state.powers, noise_var)
}

fn capacity_from(sigs: &[Vector], powers: &[f64], noise_var: f64) -> Result<f64, GameError> {
    let m = covariance_from(sigs, powers, noise_var, None);
    Ok(0.5 * (log_det_spd(&m)? - m.rows() as f64 * noise_var.ln()))
}

/// Dominant eigenvector of `H_kᵀ M_k⁻¹ H_k`, sign-normalized.
pub fn beamformer_best_response(
    scenario: &Scenario,
    state: &AllocationState,
    noise_var: f64,
    k: usize,
) -> Result<Vector, GameError> {
    beam_response_from(
        scenario,
        &signatures(scenario, state),
        &state.powers,
        noise_var,
        k,
    )
}

fn beam_response_from(
    scenario: &Scenario,
    sigs: &[Vector],
    powers: &[f64],
    noise_var: f64,
    k: usize,
) -> Result<Vector, GameError> {
    let h = &scenario.channels[k];
    let mk = covariance_from(sigs, powers, noise_var, Some(k));
    let x = Cholesky::new(&mk)?.solve_matrix(h);
    let mut b = h.transpose().mul(&x);
    b.symmetrize();
    Ok(dominant_eigenpair(&b)?.vector)
}

struct PowerPhase {
    rounds: usize,
    last_residual: f64,
    converged: bool,
}

/// Synchronous power rounds with the receiver re-optimized before each round.
fn power_phase(
    sigs: &[Vector],
    powers: &mut [f64],
    caps: &[f64],
    noise_var: f64,
    target: f64,
    receiver: ReceiverKind,
    opts: &SolverOptions,
) -> Result<PowerPhase, GameError> {
    let mut phase = PowerPhase {
        rounds: 0,
        last_residual: f64::INFINITY,
        converged: false,
    };
    while phase.rounds < opts.max_power_rounds {
        let filters = filters_from(sigs, powers, noise_var, receiver)?;
        let sinrs = sinrs_from(sigs, powers, &filters, noise_var, receiver)?;
        let mut residual = 0.0_f64;
        for k in 0..powers.len() {
            let next = scaled_power(powers[k], sinrs[k], target, caps[k], k)?;
            residual = residual.max((next - powers[k]).abs() / powers[k].max(1e-12));
            powers[k] = next;
        }
        phase.rounds += 1;
        phase.last_residual = residual;
        if residual < opts.tol {
            phase.converged = true;
            break;
        }
    }
    Ok(phase)
}

/// Runs best-response dynamics for `kind` from the cold start.
///
/// The power-only games run synchronous power rounds with the receiver
/// re-optimized before each round. The beamforming game alternates one
/// cyclic beam sweep with one power round. Beams move part of the way toward
/// their best response and powers take a geometric step toward theirs; both
/// step sizes start at the options' values and shrink whenever a window of
/// rounds fails to halve the residual. Convergence is declared only when
/// every beam is within `beam_tol` of its exact best response and the full
/// power step is below `tol`.
pub fn solve_game(
    scenario: &Scenario,
    params: &SystemParams,
    kind: GameKind,
    opts: &SolverOptions,
) -> Result<EquilibriumReport, GameError> {
    scenario.check_dims(params)?;
    let noise_var = params.noise_var();
    let target = params.target_sinr;
    let caps: Vec<f64> = (0..params.n_users).map(|k| params.p_max_for(k)).collect();
    let mut state =
        AllocationState::initial(scenario, params, kind.receiver(), opts.cold_start_fraction)?;
    let mut sigs = signatures(scenario, &state);
    if let Some(user) = sigs.iter().position(|h| h.norm_sq() == 0.0) {
        return Err(GameError::DegenerateChannel { user });
    }

    let mut capacity_trace = Vec::new();
    let mut power_rounds = 0;
    let mut outer_iterations = 0;
    let mut residual;
    let converged;

    if kind == GameKind::MmseBeamPower {
        let mut beam_step = opts.beam_step;
        let mut power_step = opts.power_step;
        let (mut best_prev, mut best_cur) = (f64::INFINITY, f64::INFINITY);
        let mut done = false;
        residual = f64::INFINITY;
        while outer_iterations < opts.max_joint_rounds {
            outer_iterations += 1;
            let before = capacity_from(&sigs, &state.powers, noise_var)?;
            let mut beam_change = 0.0_f64;
            for k in 0..params.n_users {
                let old = &state.beamformers[k];
                let mut best = beam_response_from(scenario, &sigs, &state.powers, noise_var, k)?;
                if best.dot(old) < 0.0 {
                    best = best.scaled(-1.0);
                }
                beam_change = beam_change.max(best.sub(old).norm());
                // moving along the arc toward the top eigenvector never lowers the Rayleigh quotient
                let mut next = old.scaled(1.0 - beam_step);
                next.axpy(beam_step, &best);
                let next = next
                    .normalized()
                    .expect("beam step between unit vectors with positive overlap")
                    .sign_normalized();
                sigs[k] = scenario.channels[k].mul_vec(&next);
                state.beamformers[k] = next;
            }
            capacity_trace.push(vec![
                before,
                capacity_from(&sigs, &state.powers, noise_var)?,
            ]);

            let filters = filters_from(&sigs, &state.powers, noise_var, ReceiverKind::Mmse)?;
            let sinrs = sinrs_from(
                &sigs,
                &state.powers,
                &filters,
                noise_var,
                ReceiverKind::Mmse,
            )?;
            let mut power_change = 0.0_f64;
            for k in 0..params.n_users {
                let full = scaled_power(state.powers[k], sinrs[k], target, caps[k], k)?;
                let next = if power_step == 1.0 {
                    full
                } else {
                    (state.powers[k] * (target / sinrs[k]).powf(power_step)).min(caps[k])
                };
                power_change =
                    power_change.max((full - state.powers[k]).abs() / state.powers[k].max(1e-12));
                state.powers[k] = next;
            }
            power_rounds += 1;
            residual = power_change;
            if beam_change < opts.beam_tol && power_change < opts.tol {
                done = true;
                break;
            }
            let score = (beam_change / opts.beam_tol).max(power_change / opts.tol);
            best_cur = best_cur.min(score);
            if outer_iterations % opts.stall_window == 0 {
                if best_cur > 0.5 * best_prev {
                    beam_step = (beam_step * opts.step_shrink).max(opts.step_floor);
                    power_step = (power_step * opts.step_shrink).max(opts.step_floor);
                }
                best_prev = best_prev.min(best_cur);
                best_cur = f64::INFINITY;
            }
        }
        converged = done;
    } else {
        outer_iterations = 1;
        let phase = power_phase(
            &sigs,
            &mut state.powers,
            &caps,
            noise_var,
            target,
            kind.receiver(),
            opts,
        )?;
        power_rounds = phase.rounds;
        residual = phase.last_residual;
        converged = phase.converged;
    }

    state.filters = filters_from(&sigs, &state.powers, noise_var, state.receiver)?;
    let sinr = sinrs_from(
        &sigs,
        &state.powers,
        &state.filters,
        noise_var,
        state.receiver,
    )?;
    let utility = sinr
        .iter()
        .zip(&state.powers)
        .map(|(g, p)| utility(*g, *p, params))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EquilibriumReport {
        kind,
        state,
        sinr,
        utility,
        converged,
        outer_iterations,
        power_rounds,
        power_residual: residual,
        capacity_trace,
    })
}

/// One unilateral power deviation tried by [`verify_nash`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub user: usize,
    /// Signed fraction: the trial power is `p_k (1 + delta)`, clipped to the box.
    pub delta: f64,
    pub power: f64,
    pub utility: f64,
    /// `(u' − u)/u` relative to the equilibrium utility.
    pub relative_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashCheck {
    pub passed: bool,
    pub worst_gain: f64,
    pub deviations: Vec<Deviation>,
}

/// Probes each user with power deviations `p_k (1 ± δ)` while everyone else
/// stays put. Games with receiver choice let the deviating user re-derive
/// its filter (and, in the beamforming game, its beamformer).
pub fn verify_nash(
    scenario: &Scenario,
    params: &SystemParams,
    report: &EquilibriumReport,
    grid: &[f64],
) -> Result<NashCheck, GameError> {
    let noise_var = params.noise_var();
    let base = &report.state;
    let mut deviations = Vec::new();
    let mut worst_gain = f64::NEG_INFINITY;
    for k in 0..base.n_users() {
        let cap = params.p_max_for(k);
        let p = base.powers[k];
        let (base_sinr, _) = deviated_sinr(scenario, base, report.kind, noise_var, k, p)?;
        let base_u = utility(base_sinr, p, params)?;
        for &delta in grid {
            for signed in [delta, -delta] {
                let trial = (p * (1.0 + signed)).clamp(0.0, cap);
                if trial == p {
                    continue;
                }
                let u = if trial == 0.0 {
                    0.0
                } else {
                    let (g, _) = deviated_sinr(scenario, base, report.kind, noise_var, k, trial)?;
                    utility(g, trial, params)?
                };
                let gain = if base_u > 0.0 {
                    (u - base_u) / base_u
                } else if u > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                worst_gain = worst_gain.max(gain);
                deviations.push(Deviation {
                    user: k,
                    delta: signed,
                    power: trial,
                    utility: u,
                    relative_gain: gain,
                });
            }
        }
    }
    Ok(NashCheck {
        passed: worst_gain <= NASH_GAIN_TOL,
        worst_gain,
        deviations,
    })
}

/// SINR of user `k` after it alone moves to `power` and best-responds with
/// whatever else its game lets it choose.
fn deviated_sinr(
    scenario: &Scenario,
    base: &AllocationState,
    kind: GameKind,
    noise_var: f64,
    k: usize,
    power: f64,
) -> Result<(f64, Vector), GameError> {
    let mut powers = base.powers.clone();
    powers[k] = power;
    let mut sigs = signatures(scenario, base);
    if kind == GameKind::MmseBeamPower {
        let a = beam_response_from(scenario, &sigs, &powers, noise_var, k)?;
        sigs[k] = scenario.channels[k].mul_vec(&a);
    }
    let filter = if kind.optimizes_receiver() {
        user_filter(&sigs, &powers, noise_var, kind.receiver(), k)?
    } else {
        base.filters[k].clone()
    };
    let g = match kind.receiver() {
        ReceiverKind::SicMmse => {
            let order = order_from(&sigs);
            sinr_quotient(
                &sigs,
                &powers,
                &filter,
                noise_var,
                k,
                order.later(k).iter().copied(),
            )?
        }
        _ => sinr_quotient(
            &sigs,
            &powers,
            &filter,
            noise_var,
            k,
            (0..sigs.len()).filter(|&i| i != k),
        )?,
    };
    Ok((g, filter))
}

fn user_filter(
    sigs: &[Vector],
    powers: &[f64],
    noise_var: f64,
    receiver: ReceiverKind,
    k: usize,
) -> Result<Vector, GameError> {
    let cov = match receiver {
        ReceiverKind::Matched => return Ok(sigs[k].clone()),
        ReceiverKind::Mmse => covariance_from(sigs, powers, noise_var, None),
        ReceiverKind::SicMmse => {
            let order = order_from(sigs);
            let mut keep = vec![0.0; powers.len()];
            for &i in std::iter::once(&k).chain(order.later(k)) {
                keep[i] = powers[i];
            }
            covariance_from(sigs, &keep, noise_var, None)
        }
    };
    // the √p_k factor is irrelevant to SINR; use unit weight so p_k = 0 still yields a filter
    Ok(Cholesky::new(&cov)?.solve(&sigs[k]))
}
