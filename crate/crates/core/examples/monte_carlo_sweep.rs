//! Average utility, power and SINR at equilibrium versus user count.
//!
//! ```bash
//! cargo run --release -p mimo-ee --example monte_carlo_sweep -- 300
//! ```
//! The optional argument is the number of trials per cell (default 200).

use mimo_ee::games::GameKind;
use mimo_ee::montecarlo::{paired_ratio, run_sweep, SweepSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trials = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(200);
    let spec = SweepSpec::new(
        GameKind::ALL.to_vec(),
        vec![2, 4, 6, 8, 10],
        vec![4, 8],
        trials,
        2008,
    );
    let started = std::time::Instant::now();
    let summary = run_sweep(&spec)?;
    println!(
        "{trials} trials per cell, target SINR {:.4}, {:.1?}\n",
        summary.target_sinr,
        started.elapsed()
    );
    println!(
        "{:<16} {:>3} {:>4} {:>14} {:>10} {:>9} {:>7}",
        "game", "K", "N_R", "utility b/J", "power dBW", "SINR dB", "conv"
    );
    for c in &summary.cells {
        println!(
            "{:<16} {:>3} {:>4} {:>14.4e} {:>10.2} {:>9.3} {:>7.3}",
            c.game.as_str(),
            c.k,
            c.n_rx,
            c.mean_utility_bits_per_joule.unwrap_or(f64::NAN),
            c.mean_power_dbw.unwrap_or(f64::NAN),
            c.mean_sinr_db.unwrap_or(f64::NAN),
            c.convergence_rate
        );
    }
    for n_rx in [4, 8] {
        println!(
            "\nK = 10, N_R = {n_rx}: sic/mf = {:.1}, mmse_beam/mf = {:.1}, mmse/mf = {:.2}",
            paired_ratio(&summary, GameKind::SicPower, GameKind::MfPower, 10, n_rx)?,
            paired_ratio(
                &summary,
                GameKind::MmseBeamPower,
                GameKind::MfPower,
                10,
                n_rx
            )?,
            paired_ratio(&summary, GameKind::MmsePower, GameKind::MfPower, 10, n_rx)?,
        );
    }
    Ok(())
}
