//! Independent oracles and generators shared by the integration tests.

#![allow(dead_code)]

use mimo_ee::model::{
    default_params, sample_scenario, Placement, RngHandle, Scenario, SystemParams,
};
use mimo_ee::numerics::{Matrix, Vector};
use mimo_ee::receivers::{optimal_filters, AllocationState, ReceiverKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// descending. Plain textbook version, kept separate from the library code.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        let scale: f64 = (0..n)
            .map(|i| m[i][i] * m[i][i])
            .sum::<f64>()
            .max(f64::MIN_POSITIVE);
        if off <= 1e-32 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// `GᵀG + εI`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, eps: f64) -> Matrix {
    let g = random_matrix(rng, n, n);
    let mut a = g.transpose().mul(&g);
    a.add_identity(eps);
    a.symmetrize();
    a
}

pub fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    loop {
        let v = Vector::from(
            (0..n)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect::<Vec<_>>(),
        );
        if let Some(u) = v.normalized() {
            return u;
        }
    }
}

/// A sampled scenario with random powers in `(0, p_max]`, random unit
/// beamformers and the optimal filters for `receiver`.
pub fn random_state(
    seed: u64,
    k: usize,
    n_rx: usize,
    receiver: ReceiverKind,
) -> (SystemParams, Scenario, AllocationState) {
    let params = default_params(k, n_rx).unwrap();
    let scenario =
        sample_scenario(&params, &Placement::default(), RngHandle::new(seed, 0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let powers = (0..k)
        .map(|_| params.p_max * rng.random_range(0.01..1.0))
        .collect();
    let beamformers = (0..k).map(|_| random_unit(&mut rng, params.n_tx)).collect();
    let mut state = AllocationState {
        powers,
        beamformers,
        filters: Vec::new(),
        receiver,
    };
    state.filters = optimal_filters(&scenario, &state, params.noise_var()).unwrap();
    (params, scenario, state)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
