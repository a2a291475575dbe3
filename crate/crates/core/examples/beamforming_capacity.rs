//! The joint power/beamformer game and the sum capacity along its path.
//!
//! Each round sweeps every user's beamformer toward the dominant eigenvector
//! of `H_kᵀ M_k⁻¹ H_k` at fixed powers, then updates powers. Sum capacity
//! never falls within a sweep.
//!
//! ```bash
//! cargo run -p mimo-ee --example beamforming_capacity
//! ```

use mimo_ee::games::{beamformer_best_response, solve_game, GameKind, SolverOptions};
use mimo_ee::model::{default_params, sample_scenario, Placement, RngHandle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = default_params(5, 4)?;
    let sc = sample_scenario(&params, &Placement::default(), RngHandle::new(3, 1))?;
    let r = solve_game(
        &sc,
        &params,
        GameKind::MmseBeamPower,
        &SolverOptions::default(),
    )?;
    println!(
        "converged {} after {} rounds",
        r.converged, r.outer_iterations
    );
    println!(
        "{:>5} {:>12} {:>12} {:>10}",
        "round", "C before", "C after", "gain"
    );
    let shown = r.capacity_trace.len().min(12);
    for (i, seg) in r.capacity_trace.iter().take(shown).enumerate() {
        println!(
            "{:>5} {:>12.6} {:>12.6} {:>10.2e}",
            i + 1,
            seg[0],
            seg[1],
            seg[1] - seg[0]
        );
    }
    if r.capacity_trace.len() > shown {
        let last = r.capacity_trace.last().unwrap();
        println!("  ...  final {:.6} (nats)", last[1]);
    }
    println!(
        "monotone within every sweep: {}",
        r.capacity_monotone(1e-10)
    );

    for k in 0..params.n_users {
        let best = beamformer_best_response(&sc, &r.state, params.noise_var(), k)?;
        let a = &r.state.beamformers[k];
        println!(
            "user {k}: |a·a*| = {:.10}, γ = {:.4}",
            a.dot(&best).abs(),
            r.sinr[k]
        );
    }
    Ok(())
}
