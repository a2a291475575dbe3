//! Checking a solution for unilateral profitable deviations.
//!
//! ```bash
//! cargo run -p mimo-ee --example verify_equilibrium
//! ```

use mimo_ee::games::{solve_game, verify_nash, GameKind, SolverOptions};
use mimo_ee::model::{default_params, sample_scenario, Placement, RngHandle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = default_params(4, 4)?;
    let sc = sample_scenario(&params, &Placement::default(), RngHandle::new(5, 2))?;
    let grid = [0.01, 0.05, 0.1];
    for kind in GameKind::ALL {
        let r = solve_game(&sc, &params, kind, &SolverOptions::default())?;
        let check = verify_nash(&sc, &params, &r, &grid)?;
        println!(
            "{:<16} converged {:<5} structure ok {:<5} nash {:<5} worst gain {:+.2e}",
            kind.as_str(),
            r.converged,
            r.structure_violations(&params).is_empty(),
            check.passed,
            check.worst_gain
        );
    }

    // knock one unpinned user off its equilibrium power
    let r = solve_game(&sc, &params, GameKind::MmsePower, &SolverOptions::default())?;
    if let Some(k) = (0..params.n_users).find(|&k| r.state.powers[k] < params.p_max) {
        let mut off = r.clone();
        off.state.powers[k] *= 1.3;
        let check = verify_nash(&sc, &params, &off, &grid)?;
        let best = check
            .deviations
            .iter()
            .max_by(|a, b| a.relative_gain.total_cmp(&b.relative_gain))
            .unwrap();
        println!(
            "\nuser {k} at 1.3 p*: nash {}, best deviation user {} δ = {:+} gains {:.2}%",
            check.passed,
            best.user,
            best.delta,
            100.0 * best.relative_gain
        );
    }
    Ok(())
}
