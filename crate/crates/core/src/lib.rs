//! Numerical toolkit for resonance decay: Breit-Wigner lineshapes, their
//! time-domain counterparts, and the quadrature/residue machinery that ties
//! the two together.
//!
//! The crate is organized around one correspondence: a Lorentzian energy
//! distribution with complex pole `z_R = E_R - i*Gamma/2` pairs with the
//! exponential amplitude `exp(-i*z_R*t)` for `t >= 0`. Every module works
//! some side of that pairing:
//!
//! * [`spectral`]   lineshapes, spectral densities, norms, rational test functions
//! * [`quadrature`] oscillatory Fourier integrals, two independent routes
//! * [`dynamics`]   decay amplitudes, survival probabilities, deviation diagnostics
//! * [`fitting`]    synthetic data generation and width/lifetime extraction
//! * [`relativistic`] Poincare semigroup action on resonance states
//! * [`cli`]        scenario configs and the `gamow-lab` command set
//!
//! Internally `hbar = 1`: times are in inverse energy units. Conversion to
//! seconds happens only in reporting layers via [`units::HBAR_EV_S`].

pub mod cli;
pub mod dynamics;
pub mod fitting;
pub mod quadrature;
pub mod relativistic;
pub mod spectral;
pub mod units;
