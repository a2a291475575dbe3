//! Target SINR versus packet length, and the utility curve around it.
//!
//! ```bash
//! cargo run -p mimo-ee --example target_sinr
//! ```

use mimo_ee::efficiency::{solve_target_sinr, to_db, utility, EfficiencyFn};
use mimo_ee::model::default_params;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>6} {:>10} {:>8}", "M", "target", "dB");
    for m in [2, 10, 60, 120, 240, 1000] {
        let g = solve_target_sinr(m)?;
        println!("{m:>6} {g:>10.4} {:>8.3}", to_db(g));
    }

    // f(γ)/γ peaks at the target: at fixed channel gain, p ∝ γ
    let params = default_params(1, 4)?;
    let f = EfficiencyFn::new(params.packet_len);
    let target = params.target_sinr;
    println!("\nM = {}: f(γ)/γ around γ̄ = {target:.4}", params.packet_len);
    for scale in [0.5, 0.8, 0.95, 1.0, 1.05, 1.25, 2.0] {
        let g = scale * target;
        println!(
            "  γ = {g:>7.4}  f = {:.4}  f/γ = {:.5}",
            f.eff(g)?,
            f.eff(g)? / g
        );
    }
    println!(
        "\nutility at γ̄ with p = 1 mW: {:.4e} bit/J",
        utility(target, 1e-3, &params)?
    );
    Ok(())
}
