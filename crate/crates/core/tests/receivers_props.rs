#![allow(clippy::needless_range_loop)]

mod common;

use common::{random_state, random_unit, rng};
use mimo_ee::games::sum_capacity;
use mimo_ee::numerics::log_det_spd;
use mimo_ee::receivers::{
    all_sinrs, interference_covariance, matched_filter, mmse_filter, mmse_sinr_closed_form,
    optimal_filters, sinr, ReceiverKind,
};
use proptest::prelude::*;

fn n_rx_choice() -> impl Strategy<Value = usize> {
    prop_oneof![Just(2usize), Just(4), Just(8)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn closed_form_equals_quotient(seed in any::<u64>(), k in 1usize..=10, n_rx in n_rx_choice()) {
        let (params, sc, st) = random_state(seed, k, n_rx, ReceiverKind::Mmse);
        let nv = params.noise_var();
        let quotient = all_sinrs(&sc, &st, nv).unwrap();
        for u in 0..k {
            let closed = mmse_sinr_closed_form(&sc, &st, nv, u).unwrap();
            prop_assert!((closed - quotient[u]).abs() <= 1e-9 * closed.max(1e-12), "user {u}: {closed} vs {}", quotient[u]);
        }
    }

    #[test]
    fn capacity_splits_into_interference_and_sinr(seed in any::<u64>(), k in 1usize..=10, n_rx in n_rx_choice()) {
        let (params, sc, st) = random_state(seed, k, n_rx, ReceiverKind::Mmse);
        let nv = params.noise_var();
        let c = sum_capacity(&sc, &st, nv).unwrap();
        let g = all_sinrs(&sc, &st, nv).unwrap();
        for u in 0..k {
            let mk = interference_covariance(&sc, &st, nv, u);
            let split = 0.5 * (log_det_spd(&mk).unwrap() - n_rx as f64 * nv.ln()) + 0.5 * g[u].ln_1p();
            prop_assert!((split - c).abs() <= 1e-9 * c.abs().max(1.0), "user {u}: {split} vs {c}");
        }
    }

    #[test]
    fn mmse_beats_matched_filter(seed in any::<u64>(), k in 1usize..=10, n_rx in n_rx_choice()) {
        let (params, sc, st) = random_state(seed, k, n_rx, ReceiverKind::Mmse);
        let nv = params.noise_var();
        let mut mf = st.clone();
        mf.receiver = ReceiverKind::Matched;
        mf.filters = optimal_filters(&sc, &mf, nv).unwrap();
        let g_mmse = all_sinrs(&sc, &st, nv).unwrap();
        let g_mf = all_sinrs(&sc, &mf, nv).unwrap();
        for u in 0..k {
            prop_assert!(g_mmse[u] >= g_mf[u] * (1.0 - 1e-12), "user {u}");
        }
    }

    #[test]
    fn sic_beats_mmse(seed in any::<u64>(), k in 1usize..=10, n_rx in n_rx_choice()) {
        let (params, sc, st) = random_state(seed, k, n_rx, ReceiverKind::SicMmse);
        let nv = params.noise_var();
        let mut lin = st.clone();
        lin.receiver = ReceiverKind::Mmse;
        lin.filters = optimal_filters(&sc, &lin, nv).unwrap();
        let g_sic = all_sinrs(&sc, &st, nv).unwrap();
        let g_lin = all_sinrs(&sc, &lin, nv).unwrap();
        for u in 0..k {
            prop_assert!(g_sic[u] >= g_lin[u] * (1.0 - 1e-12), "user {u}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn mmse_filter_is_locally_optimal(seed in any::<u64>(), k in 1usize..=8, n_rx in n_rx_choice()) {
        let (params, sc, st) = random_state(seed, k, n_rx, ReceiverKind::Mmse);
        let nv = params.noise_var();
        let mut r = rng(seed.wrapping_add(1));
        let u = (seed % k as u64) as usize;
        let d = mmse_filter(&sc, &st, nv, u).unwrap();
        let base = sinr(&sc, &st, nv, u).unwrap();
        let mut trial = st.clone();
        for _ in 0..100 {
            let z = random_unit(&mut r, n_rx);
            let mut dz = d.clone();
            dz.axpy(1e-3 * d.norm(), &z);
            trial.filters[u] = dz;
            let g = sinr(&sc, &trial, nv, u).unwrap();
            prop_assert!(g <= base * (1.0 + 1e-9), "{g} > {base}");
        }
    }

    #[test]
    fn sinr_is_linear_in_own_power(seed in any::<u64>(), k in 1usize..=8, n_rx in n_rx_choice(), s in 0.01f64..10.0) {
        let (params, sc, st) = random_state(seed, k, n_rx, ReceiverKind::Mmse);
        let nv = params.noise_var();
        let u = (seed % k as u64) as usize;
        let g0 = mmse_sinr_closed_form(&sc, &st, nv, u).unwrap();
        let mut scaled = st.clone();
        scaled.powers[u] *= s;
        let g1 = mmse_sinr_closed_form(&sc, &scaled, nv, u).unwrap();
        prop_assert!((g1 - s * g0).abs() <= 1e-10 * g1, "{g1} vs {}", s * g0);
    }

    #[test]
    fn sinr_ignores_filter_scale(seed in any::<u64>(), k in 1usize..=8, n_rx in n_rx_choice(), s in 1e-6f64..1e6) {
        for receiver in [ReceiverKind::Matched, ReceiverKind::Mmse, ReceiverKind::SicMmse] {
            let (params, sc, st) = random_state(seed, k, n_rx, receiver);
            let nv = params.noise_var();
            let mut scaled = st.clone();
            for f in &mut scaled.filters {
                *f = f.scaled(s);
            }
            let a = all_sinrs(&sc, &st, nv).unwrap();
            let b = all_sinrs(&sc, &scaled, nv).unwrap();
            for u in 0..k {
                prop_assert!((a[u] - b[u]).abs() <= 1e-12 * a[u].max(f64::MIN_POSITIVE));
            }
        }
    }

    #[test]
    fn matched_filter_is_the_signature(seed in any::<u64>(), k in 1usize..=4) {
        let (params, sc, st) = random_state(seed, k, 4, ReceiverKind::Matched);
        let _ = params;
        for u in 0..k {
            prop_assert_eq!(&st.filters[u], &matched_filter(&sc.channels[u], &st.beamformers[u]));
        }
    }
}
