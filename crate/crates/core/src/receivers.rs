//! Receive filters and output SINR for matched-filter, linear MMSE and
//! SIC-MMSE reception.
//!
//! SINR is always the explicit quotient
//!
//! ```text
//! γ_k = p_k (d_kᵀ h_k)² / ( (N₀/2)‖d_k‖² + Σ_{i ∈ I_k} p_i (d_kᵀ h_i)² )
//! ```
//!
//! with `h_i = H_i a_i` the effective signature of user `i`. For linear
//! receivers the interferer set `I_k` is every other user; under SIC it is
//! only the users detected after `k`, assuming earlier decisions were correct.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{initial_beamformer, ModelError, Scenario, SystemParams};
use crate::numerics::{Cholesky, Matrix, NumericsError, Vector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReceiverError {
    #[error("receive filter of user {user} is zero")]
    ZeroFilter { user: usize },
    #[error("state has {got} users, scenario has {expected}")]
    UserCount { expected: usize, got: usize },
    #[error("power {power} of user {user} outside [0, {cap}]")]
    PowerOutOfRange { user: usize, power: f64, cap: f64 },
    #[error("beamformer of user {user} has norm {norm}, expected 1")]
    BeamNotUnit { user: usize, norm: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverKind {
    Matched,
    Mmse,
    SicMmse,
}

/// Powers, beamformers and receive filters of all users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationState {
    pub powers: Vec<f64>,
    pub beamformers: Vec<Vector>,
    pub filters: Vec<Vector>,
    pub receiver: ReceiverKind,
}

impl AllocationState {
    /// Every user at `power_fraction · p_max`, beamformers at the dominant
    /// eigenvector of `H_kᵀH_k`, filters optimal for `receiver`.
    pub fn initial(
        scenario: &Scenario,
        params: &SystemParams,
        receiver: ReceiverKind,
        power_fraction: f64,
    ) -> Result<Self, ReceiverError> {
        let beamformers = scenario
            .channels
            .iter()
            .map(initial_beamformer)
            .collect::<Result<Vec<_>, _>>()?;
        let powers = (0..scenario.n_users())
            .map(|k| power_fraction * params.p_max_for(k))
            .collect();
        let mut state = AllocationState {
            powers,
            beamformers,
            filters: Vec::new(),
            receiver,
        };
        state.filters = optimal_filters(scenario, &state, params.noise_var())?;
        Ok(state)
    }

    pub fn n_users(&self) -> usize {
        self.powers.len()
    }

    /// Checks the power box and unit-norm beamformers.
    pub fn validate(
        &self,
        scenario: &Scenario,
        params: &SystemParams,
    ) -> Result<(), ReceiverError> {
        let k = scenario.n_users();
        if self.powers.len() != k || self.beamformers.len() != k || self.filters.len() != k {
            return Err(ReceiverError::UserCount {
                expected: k,
                got: self.powers.len(),
            });
        }
        for (user, &power) in self.powers.iter().enumerate() {
            let cap = params.p_max_for(user);
            if !(0.0..=cap).contains(&power) {
                return Err(ReceiverError::PowerOutOfRange { user, power, cap });
            }
        }
        for (user, a) in self.beamformers.iter().enumerate() {
            let norm = a.norm();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(ReceiverError::BeamNotUnit { user, norm });
            }
        }
        Ok(())
    }
}

/// Detection order for SIC: non-increasing `‖H_k a_k‖`, ties by index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SicOrder {
    pub permutation: Vec<usize>,
}

impl SicOrder {
    /// Position of `user` in the detection sequence.
    pub fn position(&self, user: usize) -> usize {
        self.permutation
            .iter()
            .position(|&u| u == user)
            .expect("user in order")
    }

    /// Users detected after `user`.
    pub fn later(&self, user: usize) -> &[usize] {
        &self.permutation[self.position(user) + 1..]
    }
}

/// Effective signatures `h_k = H_k a_k`.
pub fn signatures(scenario: &Scenario, state: &AllocationState) -> Vec<Vector> {
    scenario
        .channels
        .iter()
        .zip(&state.beamformers)
        .map(|(h, a)| h.mul_vec(a))
        .collect()
}

/// `M = Σ p_k h_k h_kᵀ + (N₀/2) I`.
pub fn covariance(scenario: &Scenario, state: &AllocationState, noise_var: f64) -> Matrix {
    covariance_from(&signatures(scenario, state), &state.powers, noise_var, None)
}

/// `M_k`: the covariance with user `k` left out.
pub fn interference_covariance(
    scenario: &Scenario,
    state: &AllocationState,
    noise_var: f64,
    k: usize,
) -> Matrix {
    covariance_from(
        &signatures(scenario, state),
        &state.powers,
        noise_var,
        Some(k),
    )
}

pub(crate) fn covariance_from(
    sigs: &[Vector],
    powers: &[f64],
    noise_var: f64,
    skip: Option<usize>,
) -> Matrix {
    let n = sigs.first().map_or(0, |s| s.dim());
    let mut m = Matrix::identity(n);
    m.scale_in_place(noise_var);
    for (i, (h, &p)) in sigs.iter().zip(powers).enumerate() {
        if Some(i) != skip && p != 0.0 {
            m.add_outer(p, h);
        }
    }
    m.symmetrize();
    m
}

pub fn matched_filter(channel: &Matrix, beamformer: &Vector) -> Vector {
    channel.mul_vec(beamformer)
}

/// `d_k = √p_k M⁻¹ h_k`.
pub fn mmse_filter(
    scenario: &Scenario,
    state: &AllocationState,
    noise_var: f64,
    k: usize,
) -> Result<Vector, ReceiverError> {
    let sigs = signatures(scenario, state);
    let m = covariance_from(&sigs, &state.powers, noise_var, None);
    Ok(Cholesky::new(&m)?
        .solve(&sigs[k])
        .scaled(state.powers[k].sqrt()))
}

pub fn sic_order(scenario: &Scenario, state: &AllocationState) -> SicOrder {
    order_from(&signatures(scenario, state))
}

pub(crate) fn order_from(sigs: &[Vector]) -> SicOrder {
    let norms: Vec<f64> = sigs.iter().map(Vector::norm).collect();
    let mut permutation: Vec<usize> = (0..sigs.len()).collect();
    // stable sort keeps ascending index among equal norms
    permutation.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    SicOrder { permutation }
}

/// `d_k = √p_k (H̃_k P_k H̃_kᵀ + (N₀/2) I)⁻¹ h_k`, where `H̃_k` stacks the
/// signatures of `k` and every user detected after it.
pub fn sic_filter(
    scenario: &Scenario,
    state: &AllocationState,
    noise_var: f64,
    order: &SicOrder,
    k: usize,
) -> Result<Vector, ReceiverError> {
    let sigs = signatures(scenario, state);
    let n = sigs[k].dim();
    let mut c = Matrix::identity(n);
    c.scale_in_place(noise_var);
    for &i in std::iter::once(&k).chain(order.later(k)) {
        c.add_outer(state.powers[i], &sigs[i]);
    }
    c.symmetrize();
    Ok(Cholesky::new(&c)?
        .solve(&sigs[k])
        .scaled(state.powers[k].sqrt()))
}

/// The optimal filter of every user for the state's receiver kind.
pub fn optimal_filters(
    scenario: &Scenario,
    state: &AllocationState,
    noise_var: f64,
) -> Result<Vec<Vector>, ReceiverError> {
    let sigs = signatures(scenario, state);
    filters_from(&sigs, &state.powers, noise_var, state.receiver)
}

pub(crate) fn filters_from(
    sigs: &[Vector],
    powers: &[f64],
    noise_var: f64,
    receiver: ReceiverKind,
) -> Result<Vec<Vector>, ReceiverError> {
    match receiver {
        ReceiverKind::Matched => Ok(sigs.to_vec()),
        ReceiverKind::Mmse => {
            let chol = Cholesky::new(&covariance_from(sigs, powers, noise_var, None))?;
            Ok(sigs
                .iter()
                .zip(powers)
                .map(|(h, p)| chol.solve(h).scaled(p.sqrt()))
                .collect())
        }
        ReceiverKind::SicMmse => {
            let order = order_from(sigs);
            let n = sigs.first().map_or(0, |s| s.dim());
            let mut c = Matrix::identity(n);
            c.scale_in_place(noise_var);
            let mut filters = vec![Vector::zeros(n); sigs.len()];
            for &k in order.permutation.iter().rev() {
                c.add_outer(powers[k], &sigs[k]);
                c.symmetrize();
                filters[k] = Cholesky::new(&c)?.solve(&sigs[k]).scaled(powers[k].sqrt());
            }
            Ok(filters)
        }
    }
}

/// Output SINR of user `k` with the filter stored in `state`.
pub fn sinr(
    scenario: &Scenario,
    state: &AllocationState,
    noise_var: f64,
    k: usize,
) -> Result<f64, ReceiverError> {
    let sigs = signatures(scenario, state);
    match state.receiver {
        ReceiverKind::SicMmse => {
            let order = order_from(&sigs);
            sinr_quotient(
                &sigs,
                &state.powers,
                &state.filters[k],
                noise_var,
                k,
                order.later(k).iter().copied(),
            )
        }
        _ => sinr_quotient(
            &sigs,
            &state.powers,
            &state.filters[k],
            noise_var,
            k,
            (0..sigs.len()).filter(|&i| i != k),
        ),
    }
}

/// SINR of every user under the state's receiver kind and stored filters.
pub fn all_sinrs(
    scenario: &Scenario,
    state: &AllocationState,
    noise_var: f64,
) -> Result<Vec<f64>, ReceiverError> {
    sinrs_from(
        &signatures(scenario, state),
        &state.powers,
        &state.filters,
        noise_var,
        state.receiver,
    )
}

pub(crate) fn sinrs_from(
    sigs: &[Vector],
    powers: &[f64],
    filters: &[Vector],
    noise_var: f64,
    receiver: ReceiverKind,
) -> Result<Vec<f64>, ReceiverError> {
    let k_total = sigs.len();
    match receiver {
        ReceiverKind::SicMmse => {
            let order = order_from(sigs);
            (0..k_total)
                .map(|k| {
                    sinr_quotient(
                        sigs,
                        powers,
                        &filters[k],
                        noise_var,
                        k,
                        order.later(k).iter().copied(),
                    )
                })
                .collect()
        }
        _ => (0..k_total)
            .map(|k| {
                sinr_quotient(
                    sigs,
                    powers,
                    &filters[k],
                    noise_var,
                    k,
                    (0..k_total).filter(|&i| i != k),
                )
            })
            .collect(),
    }
}

pub(crate) fn sinr_quotient(
    sigs: &[Vector],
    powers: &[f64],
    filter: &Vector,
    noise_var: f64,
    k: usize,
    interferers: impl Iterator<Item = usize>,
) -> Result<f64, ReceiverError> {
    let dd = filter.norm_sq();
    if dd == 0.0 {
        return Err(ReceiverError::ZeroFilter { user: k });
    }
    let signal = filter.dot(&sigs[k]);
    let mut den = noise_var * dd;
    for i in interferers {
        let x = filter.dot(&sigs[i]);
        den += powers[i] * x * x;
    }
    Ok(powers[k] * signal * signal / den)
}

/// `γ_k = p_k h_kᵀ M_k⁻¹ h_k`, the SINR of an MMSE receiver in closed form.
pub fn mmse_sinr_closed_form(
    scenario: &Scenario,
    state: &AllocationState,
    noise_var: f64,
    k: usize,
) -> Result<f64, ReceiverError> {
    let sigs = signatures(scenario, state);
    let mk = covariance_from(&sigs, &state.powers, noise_var, Some(k));
    let x = Cholesky::new(&mk)?.solve(&sigs[k]);
    Ok(state.powers[k] * sigs[k].dot(&x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, i: usize) -> Vector {
        Vector::unit(n, i)
    }

    fn state(
        powers: Vec<f64>,
        beams: Vec<Vector>,
        receiver: ReceiverKind,
        scenario: &Scenario,
        nv: f64,
    ) -> AllocationState {
        let mut s = AllocationState {
            powers,
            beamformers: beams,
            filters: vec![],
            receiver,
        };
        s.filters = optimal_filters(scenario, &s, nv).unwrap();
        s
    }

    #[test]
    fn covariance_examples() {
        let sc = Scenario::from_channels(vec![Matrix::identity(3)]);
        let st = state(vec![0.0], vec![e(3, 0)], ReceiverKind::Matched, &sc, 1.0);
        assert_eq!(
            covariance(&sc, &st, 0.25),
            Matrix::diag(&[0.25, 0.25, 0.25])
        );
        let st = state(vec![2.0], vec![e(3, 0)], ReceiverKind::Matched, &sc, 1.0);
        assert_eq!(covariance(&sc, &st, 1.0), Matrix::diag(&[3.0, 1.0, 1.0]));
    }

    #[test]
    fn matched_filter_examples() {
        assert_eq!(matched_filter(&Matrix::identity(2), &e(2, 0)), e(2, 0));
        let mut two = Matrix::identity(2);
        two.scale_in_place(2.0);
        assert_eq!(matched_filter(&two, &e(2, 0)).as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn matched_sinr_single_and_two_users() {
        let sc = Scenario::from_channels(vec![Matrix::identity(2)]);
        let st = state(vec![1.0], vec![e(2, 0)], ReceiverKind::Matched, &sc, 1.0);
        assert!((sinr(&sc, &st, 1.0, 0).unwrap() - 1.0).abs() < 1e-15);

        let sc = Scenario::from_channels(vec![Matrix::identity(2), Matrix::identity(2)]);
        let st = state(
            vec![2.0, 2.0],
            vec![e(2, 0), e(2, 0)],
            ReceiverKind::Matched,
            &sc,
            1.0,
        );
        assert!((sinr(&sc, &st, 1.0, 0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let st = state(
            vec![2.0, 2.0],
            vec![e(2, 0), e(2, 1)],
            ReceiverKind::Matched,
            &sc,
            1.0,
        );
        assert!((sinr(&sc, &st, 1.0, 0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn mmse_closed_form_examples() {
        let sc = Scenario::from_channels(vec![Matrix::identity(2), Matrix::identity(2)]);
        let st = state(
            vec![2.0, 2.0],
            vec![e(2, 0), e(2, 0)],
            ReceiverKind::Mmse,
            &sc,
            1.0,
        );
        // M_1 = diag(3, 1)
        assert!((mmse_sinr_closed_form(&sc, &st, 1.0, 0).unwrap() - 2.0 / 3.0).abs() < 1e-14);
        assert!((sinr(&sc, &st, 1.0, 0).unwrap() - 2.0 / 3.0).abs() < 1e-14);

        let h = Matrix::from_rows(&[&[1.0, 2.0], &[0.5, -1.0], &[3.0, 0.0]]);
        let sc = Scenario::from_channels(vec![h.clone()]);
        let a = Vector::from(vec![0.6, 0.8]);
        let st = state(vec![0.3], vec![a.clone()], ReceiverKind::Mmse, &sc, 0.7);
        let expect = 0.3 * h.mul_vec(&a).norm_sq() / 0.7;
        assert!((mmse_sinr_closed_form(&sc, &st, 0.7, 0).unwrap() - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn single_user_mmse_is_matched_direction() {
        let h = Matrix::from_rows(&[&[1.0, 2.0], &[0.5, -1.0], &[3.0, 0.0]]);
        let sc = Scenario::from_channels(vec![h.clone()]);
        let a = Vector::from(vec![0.6, 0.8]);
        let st = state(vec![0.3], vec![a.clone()], ReceiverKind::Mmse, &sc, 0.7);
        let d = mmse_filter(&sc, &st, 0.7, 0).unwrap();
        let m = matched_filter(&h, &a);
        let cos = d.dot(&m) / (d.norm() * m.norm());
        assert!((cos - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mmse_orthogonal_signatures() {
        // M = diag(p1 + nv, p2 + nv), so M^{-1} h_1 = e1 / (p1 + nv)
        let sc = Scenario::from_channels(vec![Matrix::identity(2), Matrix::identity(2)]);
        let st = state(
            vec![3.0, 5.0],
            vec![e(2, 0), e(2, 1)],
            ReceiverKind::Mmse,
            &sc,
            1.0,
        );
        let d = mmse_filter(&sc, &st, 1.0, 0).unwrap();
        assert!((d[0] - 3f64.sqrt() / 4.0).abs() < 1e-15);
        assert_eq!(d[1], 0.0);
        assert!((sinr(&sc, &st, 1.0, 0).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn filter_scale_invariance() {
        let sc = Scenario::from_channels(vec![
            Matrix::from_rows(&[&[1.0, 0.2], &[0.3, 1.0]]),
            Matrix::from_rows(&[&[0.5, 0.5], &[0.9, 0.1]]),
        ]);
        let b = Vector::from(vec![0.6, 0.8]);
        let mut st = state(
            vec![1.0, 2.0],
            vec![b.clone(), b],
            ReceiverKind::Mmse,
            &sc,
            0.1,
        );
        let g = sinr(&sc, &st, 0.1, 0).unwrap();
        st.filters[0] = st.filters[0].scaled(5.0);
        assert!((sinr(&sc, &st, 0.1, 0).unwrap() - g).abs() <= 1e-12 * g);
        st.filters[0] = Vector::zeros(2);
        assert_eq!(
            sinr(&sc, &st, 0.1, 0),
            Err(ReceiverError::ZeroFilter { user: 0 })
        );
    }

    #[test]
    fn sic_order_examples() {
        let sig = |x: f64| Vector::from(vec![x, 0.0]);
        assert_eq!(
            order_from(&[sig(3.0), sig(1.0), sig(2.0)]).permutation,
            vec![0, 2, 1]
        );
        assert_eq!(
            order_from(&[sig(1.0), sig(1.0), sig(1.0)]).permutation,
            vec![0, 1, 2]
        );
        assert_eq!(order_from(&[sig(1.0)]).permutation, vec![0]);
    }

    #[test]
    fn sic_last_user_is_matched_and_interference_free() {
        let sc = Scenario::from_channels(vec![
            Matrix::from_rows(&[&[2.0, 0.2], &[0.3, 1.0], &[0.1, 0.1]]),
            Matrix::from_rows(&[&[0.5, 0.5], &[0.4, 0.1], &[0.2, 0.2]]),
        ]);
        let b = Vector::from(vec![0.6, 0.8]);
        let st = state(
            vec![1.0, 2.0],
            vec![b.clone(), b],
            ReceiverKind::SicMmse,
            &sc,
            0.1,
        );
        let order = sic_order(&sc, &st);
        assert_eq!(order.permutation, vec![0, 1]);
        let last = 1;
        let d = sic_filter(&sc, &st, 0.1, &order, last).unwrap();
        let h = signatures(&sc, &st)[last].clone();
        assert!((d.dot(&h) / (d.norm() * h.norm()) - 1.0).abs() < 1e-9);
        let g = sinr(&sc, &st, 0.1, last).unwrap();
        assert!((g - 2.0 * h.norm_sq() / 0.1).abs() < 1e-9 * g);
        assert_eq!(&st.filters[last], &d);
    }

    #[test]
    fn validate_catches_bad_state() {
        let params = crate::model::SystemParams {
            n_users: 1,
            n_tx: 2,
            n_rx: 2,
            ..crate::model::default_params(1, 2).unwrap()
        };
        let sc = Scenario::from_channels(vec![Matrix::identity(2)]);
        let st = state(vec![1.0], vec![e(2, 0)], ReceiverKind::Matched, &sc, 1.0);
        assert!(matches!(
            st.validate(&sc, &params),
            Err(ReceiverError::PowerOutOfRange { .. })
        ));
        let st = state(
            vec![1e-3],
            vec![Vector::from(vec![1.0, 1.0])],
            ReceiverKind::Matched,
            &sc,
            1.0,
        );
        assert!(matches!(
            st.validate(&sc, &params),
            Err(ReceiverError::BeamNotUnit { .. })
        ));
    }
}
