//! A lone user: every game reduces to the same closed form,
//! `p* = min(p_max, γ̄ σ² / λ_max(HᵀH))`.
//!
//! ```bash
//! cargo run -p mimo-ee --example single_user
//! ```

use mimo_ee::efficiency::to_db;
use mimo_ee::games::{solve_game, GameKind, SolverOptions};
use mimo_ee::model::{default_params, sample_scenario, Placement, RngHandle};
use mimo_ee::numerics::dominant_eigenpair;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = default_params(1, 4)?;
    for distance in [30.0, 300.0, 1000.0] {
        let sc = sample_scenario(
            &params,
            &Placement::Fixed {
                distances: vec![distance],
            },
            RngHandle::new(7, 0),
        )?;
        let h = &sc.channels[0];
        let lam = dominant_eigenpair(&h.transpose().mul(h))?.value;
        let closed = (params.target_sinr * params.noise_var() / lam).min(params.p_max);
        println!(
            "d = {distance} m: closed form p = {closed:.4e} W ({:.2} dBW)",
            to_db(closed)
        );
        for kind in GameKind::ALL {
            let r = solve_game(&sc, &params, kind, &SolverOptions::default())?;
            println!(
                "  {:<16} p = {:.4e}  γ = {:.4}  u = {:.4e} bit/J",
                kind.as_str(),
                r.state.powers[0],
                r.sinr[0],
                r.utility[0]
            );
        }
    }
    Ok(())
}
