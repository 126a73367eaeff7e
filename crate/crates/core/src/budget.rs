//! Code distance reachable under a dispersive photon-number ceiling.
//!
//! A one-mode binomial code of order w has ⟨n⟩ ≈ (w+1)²/2 while the extended
//! binomial code spreads excitations over modes at ⟨n⟩ ≈ (w+1)/2 per mode.
//! Keeping ⟨n⟩ ≤ n_c gives w_one_mode = ⌊√(2n_c)⌋ − 1 and
//! w_extended = ⌊2n_c⌋ − 1, both floored at 0.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BudgetReport {
    pub n_c: f64,
    pub w_one_mode: u64,
    pub w_extended: u64,
}

/// Largest r with r² ≤ x, exact for every representable x.
fn floor_sqrt(x: f64) -> u64 {
    let mut r = x.sqrt().floor() as u64;
    while (r as f64) * (r as f64) > x {
        r -= 1;
    }
    while ((r + 1) as f64) * ((r + 1) as f64) <= x {
        r += 1;
    }
    r
}

pub fn dispersive_budget(n_c: f64) -> Result<BudgetReport> {
    if !(n_c > 0.0) || !n_c.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "n_c must be positive and finite, got {n_c}"
        )));
    }
    let twice = 2.0 * n_c;
    Ok(BudgetReport {
        n_c,
        w_one_mode: floor_sqrt(twice).saturating_sub(1),
        w_extended: (twice.floor() as u64).saturating_sub(1),
    })
}
