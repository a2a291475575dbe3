//! System parameters and random uplink scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::efficiency::{from_db, solve_target_sinr, EfficiencyError, EfficiencyFn};
use crate::numerics::{dominant_eigenpair, Matrix, NumericsError, Vector};

/// Generator behind every [`RngHandle`]; recorded in run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9; seed_from_u64 + set_stream)";

pub const DEFAULT_N_TX: usize = 4;
pub const DEFAULT_PACKET_LEN: u32 = 120;
pub const DEFAULT_RATE: f64 = 1e5;
pub const DEFAULT_NOISE_PSD: f64 = 1e-9;
pub const DEFAULT_P_MAX_DBW: f64 = -25.0;
pub const DEFAULT_D_MIN: f64 = 10.0;
pub const DEFAULT_D_MAX: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },
    #[error("distance {value} m for user {user} is outside [{min}, {max}] m")]
    InvalidDistance {
        user: usize,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("fixed placement lists {given} distances for {expected} users")]
    DistanceCount { given: usize, expected: usize },
    #[error("channel for user {user} is {rows}x{cols}, expected {n_rx}x{n_tx}")]
    ChannelShape {
        user: usize,
        rows: usize,
        cols: usize,
        n_rx: usize,
        n_tx: usize,
    },
    #[error(transparent)]
    Efficiency(#[from] EfficiencyError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// How channel entries are drawn for a user at distance `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    /// Nonnegative Rayleigh entries with mean `1/d`.
    #[default]
    RayleighEntries,
    /// Rayleigh magnitudes with mean `1/d` and an independent uniform sign.
    SignedRayleighEntries,
    /// Zero-mean Gaussian entries with standard deviation `1/d`.
    GaussianEntries,
}

/// Global constants of the uplink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub n_users: usize,
    pub n_tx: usize,
    pub n_rx: usize,
    /// Noise PSD `N₀` in W/Hz; the per-antenna noise variance is `N₀/2`.
    pub noise_psd: f64,
    /// Common bit rate `R` in bit/s.
    pub rate: f64,
    pub packet_len: u32,
    pub info_len: u32,
    /// Common power cap in watts.
    pub p_max: f64,
    /// Optional per-user caps overriding `p_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max_per_user: Option<Vec<f64>>,
    pub channel_model: ChannelModel,
    /// Filled in by [`SystemParams::resolve`].
    pub target_sinr: f64,
}

impl SystemParams {
    /// Validates the parameters and solves for the target SINR.
    pub fn resolve(mut self) -> Result<Self, ModelError> {
        let bad = |name, reason: &str| {
            Err(ModelError::InvalidParam {
                name,
                reason: reason.to_string(),
            })
        };
        if self.n_users == 0 {
            return bad("n_users", "must be at least 1");
        }
        if self.n_tx == 0 {
            return bad("n_tx", "must be at least 1");
        }
        if self.n_rx == 0 {
            return bad("n_rx", "must be at least 1");
        }
        for (name, v) in [
            ("noise_psd", self.noise_psd),
            ("rate", self.rate),
            ("p_max", self.p_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(name, "must be positive and finite");
            }
        }
        if self.info_len == 0 || self.info_len > self.packet_len {
            return bad("info_len", "must satisfy 1 <= L <= M");
        }
        if let Some(caps) = &self.p_max_per_user {
            if caps.len() != self.n_users {
                return bad("p_max_per_user", "needs one entry per user");
            }
            if caps.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
                return bad("p_max_per_user", "entries must be positive and finite");
            }
        }
        let target = solve_target_sinr(self.packet_len)?;
        let f = EfficiencyFn::new(self.packet_len);
        let residual = f.eff(target)? - target * f.eff_prime(target)?;
        if residual.abs() > 1e-9 {
            return bad("target_sinr", "root residual above 1e-9");
        }
        self.target_sinr = target;
        Ok(self)
    }

    /// Per-antenna noise variance `N₀/2`.
    pub fn noise_var(&self) -> f64 {
        0.5 * self.noise_psd
    }

    pub fn p_max_for(&self, user: usize) -> f64 {
        self.p_max_per_user
            .as_ref()
            .map_or(self.p_max, |caps| caps[user])
    }

    /// Copy with a different user count (per-user caps are dropped).
    pub fn with_users(&self, n_users: usize) -> Result<Self, ModelError> {
        SystemParams {
            n_users,
            p_max_per_user: None,
            ..self.clone()
        }
        .resolve()
    }
}

/// The reference configuration: 4 transmit antennas, 120-bit packets with no
/// overhead, 100 kbit/s, `N₀ = 1e-9` W/Hz and a −25 dBW power cap.
pub fn default_params(n_users: usize, n_rx: usize) -> Result<SystemParams, ModelError> {
    SystemParams {
        n_users,
        n_tx: DEFAULT_N_TX,
        n_rx,
        noise_psd: DEFAULT_NOISE_PSD,
        rate: DEFAULT_RATE,
        packet_len: DEFAULT_PACKET_LEN,
        info_len: DEFAULT_PACKET_LEN,
        p_max: from_db(DEFAULT_P_MAX_DBW),
        p_max_per_user: None,
        channel_model: ChannelModel::default(),
        target_sinr: 0.0,
    }
    .resolve()
}

/// User placement around the access point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Placement {
    /// Distance drawn uniformly in `[d_min, d_max]` metres.
    UniformDistance { d_min: f64, d_max: f64 },
    /// One distance per user, each inside the default ring.
    Fixed { distances: Vec<f64> },
}

impl Default for Placement {
    fn default() -> Self {
        Placement::UniformDistance {
            d_min: DEFAULT_D_MIN,
            d_max: DEFAULT_D_MAX,
        }
    }
}

impl Placement {
    pub fn validate(&self, n_users: usize) -> Result<(), ModelError> {
        match self {
            Placement::UniformDistance { d_min, d_max } => {
                if !(*d_min > 0.0 && d_min <= d_max && d_max.is_finite()) {
                    return Err(ModelError::InvalidParam {
                        name: "placement",
                        reason: format!("need 0 < d_min <= d_max, got [{d_min}, {d_max}]"),
                    });
                }
            }
            Placement::Fixed { distances } => {
                if distances.len() != n_users {
                    return Err(ModelError::DistanceCount {
                        given: distances.len(),
                        expected: n_users,
                    });
                }
                for (user, &value) in distances.iter().enumerate() {
                    if !(DEFAULT_D_MIN..=DEFAULT_D_MAX).contains(&value) {
                        return Err(ModelError::InvalidDistance {
                            user,
                            value,
                            min: DEFAULT_D_MIN,
                            max: DEFAULT_D_MAX,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Seed plus stream selector for a reproducible draw sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngHandle {
    pub seed: u64,
    pub stream: u64,
}

impl RngHandle {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngHandle { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// One realization of user positions and channel matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub distances: Vec<f64>,
    /// `channels[k]` is the `n_rx × n_tx` gain matrix of user `k`.
    pub channels: Vec<Matrix>,
    pub seed_record: Option<RngHandle>,
}

impl Scenario {
    /// Wraps explicitly given channels, e.g. for hand-built test cases.
    pub fn from_channels(channels: Vec<Matrix>) -> Self {
        Scenario {
            distances: vec![f64::NAN; channels.len()],
            channels,
            seed_record: None,
        }
    }

    pub fn n_users(&self) -> usize {
        self.channels.len()
    }

    pub fn check_dims(&self, params: &SystemParams) -> Result<(), ModelError> {
        if self.channels.len() != params.n_users {
            return Err(ModelError::DistanceCount {
                given: self.channels.len(),
                expected: params.n_users,
            });
        }
        for (user, h) in self.channels.iter().enumerate() {
            if h.rows() != params.n_rx || h.cols() != params.n_tx {
                return Err(ModelError::ChannelShape {
                    user,
                    rows: h.rows(),
                    cols: h.cols(),
                    n_rx: params.n_rx,
                    n_tx: params.n_tx,
                });
            }
        }
        Ok(())
    }
}

/// Draws one scenario.
///
/// All user distances are drawn first; channel entries follow in
/// receive-antenna-major order (antenna row, then user, then transmit
/// antenna). A scenario with fewer receive antennas is therefore the
/// leading rows of one with more, for the same handle.
pub fn sample_scenario(
    params: &SystemParams,
    placement: &Placement,
    handle: RngHandle,
) -> Result<Scenario, ModelError> {
    placement.validate(params.n_users)?;
    let mut rng = handle.rng();
    let k = params.n_users;
    let distances: Vec<f64> = match placement {
        Placement::UniformDistance { d_min, d_max } => (0..k)
            .map(|_| {
                if d_min == d_max {
                    *d_min
                } else {
                    rng.random_range(*d_min..*d_max)
                }
            })
            .collect(),
        Placement::Fixed { distances } => distances.clone(),
    };
    let mut entries = vec![vec![0.0; params.n_rx * params.n_tx]; k];
    for r in 0..params.n_rx {
        for (user, buf) in entries.iter_mut().enumerate() {
            let mean = 1.0 / distances[user];
            for c in 0..params.n_tx {
                buf[r * params.n_tx + c] = draw_entry(&mut rng, params.channel_model, mean);
            }
        }
    }
    let channels = entries
        .into_iter()
        .map(|e| Matrix::from_vec(params.n_rx, params.n_tx, e))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Scenario {
        distances,
        channels,
        seed_record: Some(handle),
    })
}

fn draw_entry<R: Rng>(rng: &mut R, model: ChannelModel, mean: f64) -> f64 {
    match model {
        ChannelModel::RayleighEntries => rayleigh(rng, mean),
        ChannelModel::SignedRayleighEntries => {
            let m = rayleigh(rng, mean);
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        }
        ChannelModel::GaussianEntries => mean * rng.sample::<f64, _>(StandardNormal),
    }
}

/// Rayleigh variate with the given mean: scale `σ = mean/√(π/2)`, inverse CDF.
fn rayleigh<R: Rng>(rng: &mut R, mean: f64) -> f64 {
    let sigma = mean / std::f64::consts::FRAC_PI_2.sqrt();
    let u: f64 = rng.random();
    sigma * (-2.0 * (-u).ln_1p()).sqrt()
}

/// Dominant eigenvector of `HᵀH`: the single-user SINR-maximizing beam.
pub fn initial_beamformer(channel: &Matrix) -> Result<Vector, ModelError> {
    let mut gram = channel.transpose().mul(channel);
    gram.symmetrize();
    Ok(dominant_eigenpair(&gram)?.vector)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let p = default_params(10, 8).unwrap();
        assert!((p.p_max - 3.1623e-3).abs() < 1e-7);
        assert_eq!((p.n_tx, p.packet_len, p.info_len), (4, 120, 120));
        let p = default_params(1, 4).unwrap();
        assert!((p.target_sinr - 6.689).abs() < 1e-3);
        assert!((p.noise_var() - 5e-10).abs() < 1e-24);
        let p = default_params(2, 4).unwrap();
        assert_eq!(p.info_len as f64 / p.packet_len as f64, 1.0);
    }

    #[test]
    fn param_validation() {
        assert!(default_params(0, 4).is_err());
        assert!(default_params(2, 0).is_err());
        let p = default_params(2, 4).unwrap();
        assert!(SystemParams {
            info_len: 121,
            ..p.clone()
        }
        .resolve()
        .is_err());
        assert!(SystemParams {
            packet_len: 1,
            info_len: 1,
            ..p.clone()
        }
        .resolve()
        .is_err());
        assert!(SystemParams {
            p_max_per_user: Some(vec![1e-3]),
            ..p.clone()
        }
        .resolve()
        .is_err());
        let q = SystemParams {
            p_max_per_user: Some(vec![1e-3, 2e-3]),
            ..p
        }
        .resolve()
        .unwrap();
        assert_eq!(q.p_max_for(1), 2e-3);
    }

    #[test]
    fn fixed_single_user() {
        let p = default_params(1, 4).unwrap();
        let s = sample_scenario(
            &p,
            &Placement::Fixed {
                distances: vec![10.0],
            },
            RngHandle::new(1, 0),
        )
        .unwrap();
        assert_eq!((s.channels[0].rows(), s.channels[0].cols()), (4, 4));
        assert!(s.channels[0].as_slice().iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn invalid_fixed_distances() {
        let p = default_params(2, 4).unwrap();
        let h = RngHandle::new(1, 0);
        assert!(matches!(
            sample_scenario(
                &p,
                &Placement::Fixed {
                    distances: vec![5.0, 100.0]
                },
                h
            ),
            Err(ModelError::InvalidDistance { user: 0, .. })
        ));
        assert!(matches!(
            sample_scenario(
                &p,
                &Placement::Fixed {
                    distances: vec![100.0]
                },
                h
            ),
            Err(ModelError::DistanceCount { .. })
        ));
    }

    #[test]
    fn deterministic_and_nested_in_rx() {
        let p8 = default_params(3, 8).unwrap();
        let p4 = default_params(3, 4).unwrap();
        let h = RngHandle::new(42, 7);
        let a = sample_scenario(&p8, &Placement::default(), h).unwrap();
        let b = sample_scenario(&p8, &Placement::default(), h).unwrap();
        assert_eq!(a, b);
        let c = sample_scenario(&p4, &Placement::default(), h).unwrap();
        assert_eq!(a.distances, c.distances);
        for k in 0..3 {
            assert_eq!(&a.channels[k].as_slice()[..16], c.channels[k].as_slice());
        }
        let other = sample_scenario(&p8, &Placement::default(), RngHandle::new(42, 8)).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn distances_in_ring() {
        let p = default_params(50, 4).unwrap();
        let s = sample_scenario(&p, &Placement::default(), RngHandle::new(3, 0)).unwrap();
        assert!(s.distances.iter().all(|d| (10.0..=1000.0).contains(d)));
    }

    #[test]
    fn beamformer_diagonal_channel() {
        let a = initial_beamformer(&Matrix::diag(&[2.0, 1.0, 1.0, 1.0])).unwrap();
        assert!((a[0] - 1.0).abs() < 1e-12);
        assert!(a.iter().skip(1).all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn beamformer_identity_channel() {
        let h = Matrix::identity(4);
        let a = initial_beamformer(&h).unwrap();
        let g = h.transpose().mul(&h);
        let lam = a.dot(&g.mul_vec(&a));
        assert!(g.mul_vec(&a).sub(&a.scaled(lam)).norm() < 1e-12);
        assert!((a.norm() - 1.0).abs() < 1e-12);
    }
}
