use mimo_ee::efficiency::{solve_target_sinr, utility, EfficiencyFn};
use mimo_ee::model::default_params;
use proptest::prelude::*;

fn root_gap(f: &EfficiencyFn, g: f64) -> f64 {
    f.eff(g).unwrap() - g * f.eff_prime(g).unwrap()
}

#[test]
fn target_is_a_root() {
    for m in [2, 10, 50, 120, 500] {
        let f = EfficiencyFn::new(m);
        let g = solve_target_sinr(m).unwrap();
        assert!(
            root_gap(&f, g).abs() <= 1e-12,
            "M = {m}: {}",
            root_gap(&f, g)
        );
    }
}

#[test]
fn target_root_is_unique() {
    for m in [2, 10, 50, 120, 500] {
        let f = EfficiencyFn::new(m);
        let grid: Vec<f64> = (0..=2000)
            .map(|i| 10f64.powf(-4.0 + 7.0 * i as f64 / 2000.0))
            .collect();
        let signs: Vec<bool> = grid.iter().map(|&g| root_gap(&f, g) > 0.0).collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 1, "M = {m}");
    }
}

#[test]
fn eff_prime_matches_finite_differences() {
    for m in [2, 10, 120, 500] {
        let f = EfficiencyFn::new(m);
        let target = solve_target_sinr(m).unwrap();
        for g in [0.1, 1.0, target, 10.0] {
            // f is steep for large M; the step keeps truncation error near 1e-10
            let h = 1e-7 * g;
            let fd = (f.eff(g + h).unwrap() - f.eff(g - h).unwrap()) / (2.0 * h);
            let d = f.eff_prime(g).unwrap();
            assert!(
                (fd - d).abs() <= 1e-6 * d.abs(),
                "M = {m}, γ = {g}: {d} vs {fd}"
            );
        }
    }
}

#[test]
fn target_maximizes_utility_along_a_channel() {
    // a user with gain c reaches γ = c p, so at fixed c the power scales with γ
    let params = default_params(1, 4).unwrap();
    let target = params.target_sinr;
    let p = 1e-3;
    let best = utility(target, p, &params).unwrap();
    for i in 1..200 {
        let g = target * (0.05 * i as f64);
        let u = utility(g, p * g / target, &params).unwrap();
        assert!(u <= best * (1.0 + 1e-12), "γ = {g}: {u} > {best}");
    }
}

proptest! {
    #[test]
    fn eff_is_a_probability_and_increasing(m in 1u32..2000, a in 0.0f64..50.0, b in 0.0f64..50.0) {
        let f = EfficiencyFn::new(m);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (flo, fhi) = (f.eff(lo).unwrap(), f.eff(hi).unwrap());
        prop_assert!((0.0..=1.0).contains(&flo) && (0.0..=1.0).contains(&fhi));
        prop_assert!(flo <= fhi);
    }

    #[test]
    fn utility_scales_inversely_with_power(g in 0.0f64..30.0, p in 1e-6f64..1.0, s in 1.0f64..100.0) {
        let params = default_params(1, 4).unwrap();
        let u1 = utility(g, p, &params).unwrap();
        let u2 = utility(g, p * s, &params).unwrap();
        prop_assert!((u1 - s * u2).abs() <= 1e-12 * u1.max(f64::MIN_POSITIVE));
    }
}
