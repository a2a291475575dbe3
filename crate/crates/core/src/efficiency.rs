//! Packet success model and the energy-efficiency utility.
//!
//! For uncoded BPSK with `M`-bit packets the probability that a packet
//! arrives intact is approximated by `f(γ) = (1 − e^{−γ})^M`. A user's
//! utility is the number of bits delivered per joule, `R·(L/M)·f(γ)/p`.
//! Each user maximizes `f(γ)/p`; because its SINR is linear in its own power
//! the optimum sits at the unique positive root of `f(γ) = γ f′(γ)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::SystemParams;

const BISECTION_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EfficiencyError {
    #[error("SINR must be nonnegative, got {0}")]
    NegativeSinr(f64),
    #[error("transmit power must be nonnegative, got {0}")]
    NegativePower(f64),
    #[error(
        "packet length M = {0} has no positive target SINR: f(γ) = γf'(γ) only at γ = 0 when M < 2"
    )]
    PacketTooShort(u32),
}

/// `f(γ) = (1 − e^{−γ})^M` for a fixed packet length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EfficiencyFn {
    pub packet_len: u32,
}

impl EfficiencyFn {
    pub fn new(packet_len: u32) -> Self {
        EfficiencyFn { packet_len }
    }

    /// Evaluated in log space so large `M` does not underflow near zero.
    pub fn eff(&self, sinr: f64) -> Result<f64, EfficiencyError> {
        check_sinr(sinr)?;
        let log_base = (-(-sinr).exp_m1()).ln();
        Ok((self.packet_len as f64 * log_base).exp().min(1.0))
    }

    /// `f′(γ) = M e^{−γ} (1 − e^{−γ})^{M−1}`.
    pub fn eff_prime(&self, sinr: f64) -> Result<f64, EfficiencyError> {
        check_sinr(sinr)?;
        let m = self.packet_len as f64;
        if self.packet_len == 0 {
            return Ok(0.0);
        }
        if self.packet_len == 1 {
            return Ok((-sinr).exp());
        }
        let log_base = (-(-sinr).exp_m1()).ln();
        Ok(m * (-sinr + (m - 1.0) * log_base).exp())
    }

    pub fn target_sinr(&self) -> Result<f64, EfficiencyError> {
        solve_target_sinr(self.packet_len)
    }
}

fn check_sinr(sinr: f64) -> Result<(), EfficiencyError> {
    if sinr >= 0.0 {
        Ok(())
    } else {
        Err(EfficiencyError::NegativeSinr(sinr))
    }
}

/// Positive root of `f(γ) = γ f′(γ)`.
///
/// Dividing through by `(1 − e^{−γ})^{M−1} e^{−γ}` leaves `e^γ = 1 + Mγ`,
/// which is solved by bisection on `[1e-6, 10 + 2 ln M]`.
pub fn solve_target_sinr(packet_len: u32) -> Result<f64, EfficiencyError> {
    if packet_len < 2 {
        return Err(EfficiencyError::PacketTooShort(packet_len));
    }
    let m = packet_len as f64;
    let h = |g: f64| g.exp_m1() - m * g;
    let (mut lo, mut hi) = (1e-6, 10.0 + 2.0 * m.ln());
    debug_assert!(h(lo) < 0.0 && h(hi) > 0.0);
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bits per joule delivered by a user at SINR `sinr` transmitting `power` watts.
///
/// Zero power yields zero utility, the limit of `f(γ)/p` as `p → 0`.
pub fn utility(sinr: f64, power: f64, params: &SystemParams) -> Result<f64, EfficiencyError> {
    if power < 0.0 || power.is_nan() {
        return Err(EfficiencyError::NegativePower(power));
    }
    let f = EfficiencyFn::new(params.packet_len).eff(sinr)?;
    if power == 0.0 {
        return Ok(0.0);
    }
    Ok(params.rate * (params.info_len as f64 / params.packet_len as f64) * f / power)
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_params;

    #[test]
    fn eff_values() {
        let f = EfficiencyFn::new(120);
        assert_eq!(f.eff(0.0).unwrap(), 0.0);
        assert!((f.eff(1e6).unwrap() - 1.0).abs() <= 1e-12);
        let f2 = EfficiencyFn::new(2);
        assert!((f2.eff(2f64.ln()).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(f.eff(-1.0), Err(EfficiencyError::NegativeSinr(_))));
    }

    #[test]
    fn eff_prime_edges() {
        assert_eq!(EfficiencyFn::new(2).eff_prime(0.0).unwrap(), 0.0);
        assert_eq!(EfficiencyFn::new(120).eff_prime(0.0).unwrap(), 0.0);
        assert_eq!(EfficiencyFn::new(1).eff_prime(0.0).unwrap(), 1.0);
        assert!(EfficiencyFn::new(3).eff_prime(-0.5).is_err());
    }

    #[test]
    fn eff_is_monotone_and_saturates() {
        let f = EfficiencyFn::new(120);
        let mut prev = 0.0;
        for i in 0..400 {
            let g = i as f64 * 0.1;
            let v = f.eff(g).unwrap();
            assert!(v >= prev && v <= 1.0);
            prev = v;
        }
        assert!(prev > 1.0 - 1e-12);
    }

    #[test]
    fn target_sinr_m2() {
        // root of e^g - 1 - 2g on (0.1, 10) by plain bisection: 1.2564312086...
        let g = solve_target_sinr(2).unwrap();
        assert!((g - 1.256_431_208_6).abs() < 1e-9, "{g}");
    }

    #[test]
    fn target_sinr_rejects_m1() {
        assert_eq!(
            solve_target_sinr(1),
            Err(EfficiencyError::PacketTooShort(1))
        );
        assert_eq!(
            solve_target_sinr(0),
            Err(EfficiencyError::PacketTooShort(0))
        );
    }

    #[test]
    fn utility_examples() {
        let p = default_params(2, 4).unwrap();
        assert_eq!(utility(0.0, 1e-3, &p).unwrap(), 0.0);
        assert!((utility(1e6, 1e-3, &p).unwrap() - 1e8).abs() < 1e-4);
        let u1 = utility(3.0, 1e-3, &p).unwrap();
        let u2 = utility(3.0, 2e-3, &p).unwrap();
        assert!((u1 - 2.0 * u2).abs() <= 1e-12 * u1);
        assert_eq!(utility(3.0, 0.0, &p).unwrap(), 0.0);
        assert!(utility(3.0, -1.0, &p).is_err());
    }

    #[test]
    fn db_round_trip() {
        assert!((to_db(from_db(-25.0)) + 25.0).abs() < 1e-12);
    }
}
