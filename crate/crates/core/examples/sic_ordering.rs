//! Successive interference cancellation: detection order and per-stage SINR
//! compared with the plain MMSE receiver at the same powers.
//!
//! ```bash
//! cargo run -p mimo-ee --example sic_ordering
//! ```

use mimo_ee::efficiency::to_db;
use mimo_ee::model::{default_params, sample_scenario, Placement, RngHandle};
use mimo_ee::receivers::{
    all_sinrs, optimal_filters, sic_order, signatures, AllocationState, ReceiverKind,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = default_params(6, 4)?;
    let nv = params.noise_var();
    let sc = sample_scenario(&params, &Placement::default(), RngHandle::new(21, 0))?;
    let mut sic = AllocationState::initial(&sc, &params, ReceiverKind::SicMmse, 0.1)?;
    let mut mmse = sic.clone();
    mmse.receiver = ReceiverKind::Mmse;
    mmse.filters = optimal_filters(&sc, &mmse, nv)?;
    sic.filters = optimal_filters(&sc, &sic, nv)?;

    let order = sic_order(&sc, &sic);
    let sigs = signatures(&sc, &sic);
    let g_sic = all_sinrs(&sc, &sic, nv)?;
    let g_mmse = all_sinrs(&sc, &mmse, nv)?;
    println!(
        "detection order (strongest signature first): {:?}\n",
        order.permutation
    );
    println!(
        "{:>5} {:>5} {:>12} {:>10} {:>10}",
        "stage", "user", "|H a|", "MMSE dB", "SIC dB"
    );
    for (stage, &u) in order.permutation.iter().enumerate() {
        println!(
            "{stage:>5} {u:>5} {:>12.4e} {:>10.2} {:>10.2}",
            sigs[u].norm(),
            to_db(g_mmse[u]),
            to_db(g_sic[u])
        );
    }
    Ok(())
}
