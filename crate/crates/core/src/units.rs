//! Unit conventions. Everything numerical in this crate runs with `hbar = 1`,
//! so a level width in eV and a time in 1/eV multiply to a pure number.
//! The constants here exist for the reporting boundary only.

/// Reduced Planck constant in eV·s (CODATA 2018, exact by definition).
pub const HBAR_EV_S: f64 = 6.582_119_569e-16;

/// Lifetime in seconds for a width given in eV.
#[inline]
pub fn lifetime_seconds(gamma_ev: f64) -> f64 {
    HBAR_EV_S / gamma_ev
}

/// Width in eV for a lifetime given in seconds.
#[inline]
pub fn width_ev(tau_s: f64) -> f64 {
    HBAR_EV_S / tau_s
}

pub const NANOSECOND: f64 = 1e-9;
