//! All four games on one shared scenario, user by user.
//!
//! ```bash
//! cargo run -p mimo-ee --example game_comparison -- 6 8
//! ```
//! Arguments: user count and receive antennas (default 6 and 4).

use mimo_ee::efficiency::to_db;
use mimo_ee::games::{solve_game, GameKind, SolverOptions};
use mimo_ee::model::{default_params, sample_scenario, Placement, RngHandle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let k: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(6);
    let n_rx: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(4);
    let params = default_params(k, n_rx)?;
    let sc = sample_scenario(&params, &Placement::default(), RngHandle::new(11, 0))?;
    println!(
        "K = {k}, N_R = {n_rx}, target {:.3} dB, p_max {:.1} dBW",
        to_db(params.target_sinr),
        to_db(params.p_max)
    );
    println!(
        "distances: {:?}\n",
        sc.distances.iter().map(|d| d.round()).collect::<Vec<_>>()
    );

    for kind in GameKind::ALL {
        let r = solve_game(&sc, &params, kind, &SolverOptions::default())?;
        println!(
            "{} (converged {}, {} rounds): mean u = {:.4e} bit/J",
            kind,
            r.converged,
            r.power_rounds,
            r.mean_utility()
        );
        for u in 0..k {
            let pinned = if r.state.powers[u] == params.p_max {
                " at p_max"
            } else {
                ""
            };
            println!(
                "  user {u}: p = {:>7.2} dBW  γ = {:>6.2} dB  u = {:.3e}{pinned}",
                to_db(r.state.powers[u]),
                to_db(r.sinr[u]),
                r.utility[u]
            );
        }
    }
    Ok(())
}
