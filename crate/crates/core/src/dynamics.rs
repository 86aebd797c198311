//! Time-domain side of the resonance correspondence: decay amplitudes,
//! survival probabilities, and the diagnostics that separate a clean
//! exponential from its truncation-induced deviations.
//!
//! Two spectral supports appear throughout. On the full line every pole
//! integral closes exactly and amplitudes vanish identically before the
//! onset. On the half-line the cutoff at zero energy breaks that closure:
//! a small pre-onset amplitude survives, and the late-time survival
//! probability crosses over from exponential to an inverse-square tail.

use crate::quadrature::{
    fourier_halfline, residue_fourier, Method, QuadratureError, QuadratureResult, DEFAULT_TOL,
};
use crate::spectral::{
    bw_density, norm_truncated_closed_form, PoleTerm, RationalFunction, RationalHardyFunction,
    ResonanceLine, SpectralSupport,
};
use num_complex::Complex64;
use thiserror::Error;

/// Survival evaluations run tighter than user-facing defaults so that
/// squared magnitudes keep full headroom.
const SURVIVAL_TOL: f64 = 1e-12;

/// Tail diagnostics are meaningless before the power law has had a chance
/// to emerge; windows must start this many lifetimes out.
const TAIL_WINDOW_FLOOR: f64 = 20.0;

/// Quadratic curvature of `ln P` against `ln t` above which the window is
/// still riding the exponential-to-power-law transition.
const CURVATURE_LIMIT: f64 = 0.05;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("time grid is empty")]
    EmptyGrid,
    #[error("time grid must be strictly increasing (violated at index {index})")]
    GridNotIncreasing { index: usize },
    #[error("pre-onset grid must stay negative, found t = {t}")]
    GridNotNegative { t: f64 },
    #[error("series lengths disagree: {times} times, {values} values, {errors} errors")]
    MismatchedSeries {
        times: usize,
        values: usize,
        errors: usize,
    },
    #[error("full-line survival decays exponentially; no power-law tail to fit")]
    ExponentialTail,
    #[error("tail window starts at t = {t_min}, need at least {required}")]
    WindowTooEarly { t_min: f64, required: f64 },
    #[error("tail window ({t_lo}, {t_hi}) is not an increasing pair of positive times")]
    InvalidWindow { t_lo: f64, t_hi: f64 },
    #[error(
        "log-log curvature {curvature:.3} exceeds {limit}; window still \
         inside the exponential-to-power-law transition"
    )]
    StillExponential { curvature: f64, limit: f64 },
    #[error("tail fit needs at least {minimum} points, got {n}")]
    TooFewPoints { n: usize, minimum: usize },
    #[error("exponential and power-law branches never meet for this line")]
    NoCrossover,
    #[error("repeated decay pole of order {order} at {position}; split is not defined")]
    DegeneratePole { position: Complex64, order: usize },
    #[error("retardation needs distance >= 0 and speed > 0, got r = {r}, c = {c}")]
    BadRetardation { r: f64, c: f64 },
}

/// Amplitude samples on a common time grid, with per-point error claims.
#[derive(Debug, Clone)]
pub struct AmplitudeSeries {
    times: Vec<f64>,
    values: Vec<Complex64>,
    errors: Vec<f64>,
    model: String,
}

impl AmplitudeSeries {
    pub fn new(
        times: Vec<f64>,
        values: Vec<Complex64>,
        errors: Vec<f64>,
        model: impl Into<String>,
    ) -> Result<Self, DynamicsError> {
        if times.len() != values.len() || times.len() != errors.len() {
            return Err(DynamicsError::MismatchedSeries {
                times: times.len(),
                values: values.len(),
                errors: errors.len(),
            });
        }
        Ok(Self {
            times,
            values,
            errors,
            model: model.into(),
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Pre-onset amplitude scan plus where it peaks.
#[derive(Debug, Clone)]
pub struct PrecursorReport {
    pub series: AmplitudeSeries,
    pub max_probability: f64,
    pub time_of_max: f64,
}

/// Decomposition of a rational spectral function into simple decay poles
/// (lower half-plane) and everything else.
#[derive(Debug, Clone)]
pub struct PoleBackgroundSplit {
    /// `(position, coefficient)` of each simple lower pole; each one evolves
    /// as `coefficient * exp(-i * position * t)` under the transform.
    pub pole_terms: Vec<(Complex64, Complex64)>,
    /// Upper-half-plane poles and any constant part, untouched.
    pub background: RationalFunction,
}

/// Decay amplitude of the resonance probed by `psi`:
/// `(i/2pi) int psi(w) exp(-i w t) / (w - z_R) dw` over `support`.
///
/// Runs at the default tolerance; use [`gamow_amplitude_detailed`] to pick
/// the tolerance or inspect error estimates.
pub fn gamow_amplitude(
    line: &ResonanceLine,
    psi: &RationalHardyFunction,
    t: f64,
    support: SpectralSupport,
) -> Result<Complex64, DynamicsError> {
    Ok(gamow_amplitude_detailed(line, psi, t, support, DEFAULT_TOL)?.value)
}

pub fn gamow_amplitude_detailed(
    line: &ResonanceLine,
    psi: &RationalHardyFunction,
    t: f64,
    support: SpectralSupport,
    tol: f64,
) -> Result<QuadratureResult, DynamicsError> {
    match support {
        SpectralSupport::FullLine => {
            // closing the contour picks up exactly the resonance pole for
            // t >= 0 and nothing at all for t < 0; no quadrature involved
            if t < 0.0 {
                return Ok(QuadratureResult {
                    value: Complex64::new(0.0, 0.0),
                    abs_error_estimate: 0.0,
                    panels_used: 0,
                    method: Method::ResidueExact,
                });
            }
            let value = (-Complex64::i() * line.z_r() * t).exp() * psi.eval(line.z_r());
            Ok(QuadratureResult {
                value,
                abs_error_estimate: f64::EPSILON * value.norm(),
                panels_used: 0,
                method: Method::ResidueExact,
            })
        }
        SpectralSupport::HalfLine => {
            let z = line.z_r();
            let two_pi = 2.0 * std::f64::consts::PI;
            let g = |w: f64| {
                let wc = Complex64::new(w, 0.0);
                psi.eval(wc) / (wc - z)
            };
            let raw = fourier_halfline(g, t, tol * two_pi)?;
            Ok(QuadratureResult {
                value: raw.value * Complex64::i() / two_pi,
                abs_error_estimate: raw.abs_error_estimate / two_pi,
                panels_used: raw.panels_used,
                method: raw.method,
            })
        }
    }
}

/// Survival amplitude `A(t) = int rho_N(E) exp(-i E t) dE` of the
/// normalized density on `support`.
///
/// Full line: exact residue evaluation, `exp(-i z_R t)` for `t >= 0` and
/// its mirror for `t < 0`. Half line: direct transform of the truncated
/// density divided by its norm.
pub fn survival_amplitude(
    line: &ResonanceLine,
    support: SpectralSupport,
    t: f64,
    tol: f64,
) -> Result<QuadratureResult, DynamicsError> {
    let two_pi = 2.0 * std::f64::consts::PI;
    match support {
        SpectralSupport::FullLine => {
            let scale = Complex64::new(line.gamma() / two_pi, 0.0);
            let rho = RationalFunction::from_ratio(&[scale], &[line.z_r(), line.z_r().conj()])
                .expect("distinct conjugate roots");
            let raw = residue_fourier(&rho, t)?;
            Ok(QuadratureResult {
                value: raw.value * two_pi,
                abs_error_estimate: raw.abs_error_estimate * two_pi,
                panels_used: raw.panels_used,
                method: raw.method,
            })
        }
        SpectralSupport::HalfLine => {
            let norm = norm_truncated_closed_form(line);
            let g = |e: f64| Complex64::new(bw_density(line, e, SpectralSupport::FullLine), 0.0);
            let raw = fourier_halfline(g, t, tol * norm)?;
            Ok(QuadratureResult {
                value: raw.value / norm,
                abs_error_estimate: raw.abs_error_estimate / norm,
                panels_used: raw.panels_used,
                method: raw.method,
            })
        }
    }
}

/// `|A(t)|^2` at a fixed internal tolerance tight enough for squared use.
pub fn survival_probability(
    line: &ResonanceLine,
    support: SpectralSupport,
    t: f64,
) -> Result<f64, DynamicsError> {
    Ok(survival_amplitude(line, support, t, SURVIVAL_TOL)?
        .value
        .norm_sqr())
}

/// Scan the decay amplitude over a grid of strictly negative times and
/// report the largest pre-onset probability. On the full line this is
/// identically zero; on the half line it is small but finite and peaks
/// at the grid point closest to the onset.
pub fn precursor_report(
    line: &ResonanceLine,
    psi: &RationalHardyFunction,
    support: SpectralSupport,
    times: &[f64],
    tol: f64,
) -> Result<PrecursorReport, DynamicsError> {
    if times.is_empty() {
        return Err(DynamicsError::EmptyGrid);
    }
    for (i, pair) in times.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            return Err(DynamicsError::GridNotIncreasing { index: i + 1 });
        }
    }
    if let Some(&t) = times.iter().find(|t| **t >= 0.0) {
        return Err(DynamicsError::GridNotNegative { t });
    }

    let mut values = Vec::with_capacity(times.len());
    let mut errors = Vec::with_capacity(times.len());
    let mut max_probability = 0.0f64;
    let mut time_of_max = times[0];
    for &t in times {
        let r = gamow_amplitude_detailed(line, psi, t, support, tol)?;
        let prob = r.value.norm_sqr();
        if prob > max_probability {
            max_probability = prob;
            time_of_max = t;
        }
        values.push(r.value);
        errors.push(r.abs_error_estimate);
    }
    let series = AmplitudeSeries::new(
        times.to_vec(),
        values,
        errors,
        format!("precursor amplitude, {support}"),
    )?;
    Ok(PrecursorReport {
        series,
        max_probability,
        time_of_max,
    })
}

/// Least-squares exponent of the late-time survival tail: the slope of
/// `ln P` against `ln t` over a log-spaced grid in `window`. A clean
/// inverse-square tail gives a slope near -2.
///
/// Guards: the full line has no such tail; the window must start at least
/// [`TAIL_WINDOW_FLOOR`] lifetimes out; and a quadratic term in the fit
/// beyond [`CURVATURE_LIMIT`] means the exponential has not yet died, so
/// a straight-line exponent would be meaningless.
pub fn tail_exponent(
    line: &ResonanceLine,
    support: SpectralSupport,
    window: (f64, f64),
    n_points: usize,
) -> Result<f64, DynamicsError> {
    let (t_lo, t_hi) = window;
    if support == SpectralSupport::FullLine {
        return Err(DynamicsError::ExponentialTail);
    }
    if n_points < 4 {
        return Err(DynamicsError::TooFewPoints {
            n: n_points,
            minimum: 4,
        });
    }
    if !(t_lo > 0.0 && t_hi > t_lo) {
        return Err(DynamicsError::InvalidWindow { t_lo, t_hi });
    }
    let required = TAIL_WINDOW_FLOOR * line.tau();
    if t_lo < required {
        return Err(DynamicsError::WindowTooEarly { t_min: t_lo, required });
    }

    let ratio = (t_hi / t_lo).ln();
    let mut xs = Vec::with_capacity(n_points);
    let mut ys = Vec::with_capacity(n_points);
    for k in 0..n_points {
        let t = t_lo * (ratio * k as f64 / (n_points - 1) as f64).exp();
        let p = survival_probability(line, support, t)?;
        xs.push(t.ln());
        ys.push(p.ln());
    }

    // quadratic fit first: its x^2 coefficient is the transition detector
    let (_, _, curvature) = fit_quadratic(&xs, &ys);
    if curvature.abs() > CURVATURE_LIMIT {
        return Err(DynamicsError::StillExponential {
            curvature,
            limit: CURVATURE_LIMIT,
        });
    }

    // straight-line slope over the same points
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Least-squares coefficients `(a, b, c)` of `y = a + b x + c x^2` via the
/// normal equations in centered coordinates.
fn fit_quadratic(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let u: Vec<f64> = xs.iter().map(|x| x - mx).collect();
    let s1: f64 = u.iter().sum();
    let s2: f64 = u.iter().map(|v| v * v).sum();
    let s3: f64 = u.iter().map(|v| v * v * v).sum();
    let s4: f64 = u.iter().map(|v| v * v * v * v).sum();
    let b0: f64 = ys.iter().sum();
    let b1: f64 = u.iter().zip(ys).map(|(v, y)| v * y).sum();
    let b2: f64 = u.iter().zip(ys).map(|(v, y)| v * v * y).sum();
    // 3x3 solve by Cramer's rule; the matrix is tiny and well scaled
    let m = [[n, s1, s2], [s1, s2, s3], [s2, s3, s4]];
    let det = det3(&m);
    let rep = |col: usize| {
        let mut mm = m;
        mm[0][col] = b0;
        mm[1][col] = b1;
        mm[2][col] = b2;
        det3(&mm) / det
    };
    let (a_c, b_c, c_c) = (rep(0), rep(1), rep(2));
    // undo the centering for the reported constant and slope
    let a = a_c - b_c * mx + c_c * mx * mx;
    let b = b_c - 2.0 * c_c * mx;
    (a, b, c_c)
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Time where the exponential branch `exp(-gamma t)` falls to the level of
/// the model power-law tail `(rho_N(0)/t)^2`, found by bisection on the
/// log difference. Beyond this point the tail owns the survival curve.
pub fn crossover_time(line: &ResonanceLine) -> Result<f64, DynamicsError> {
    let rho0 = bw_density(line, 0.0, SpectralSupport::FullLine) / norm_truncated_closed_form(line);
    let ln_c = 2.0 * rho0.ln();
    // f > 0 while the exponential dominates
    let f = |t: f64| -line.gamma() * t + 2.0 * t.ln() - ln_c;

    let mut lo = line.tau();
    if f(lo) <= 0.0 {
        return Err(DynamicsError::NoCrossover);
    }
    let mut hi = lo * 2.0;
    let mut doublings = 0;
    while f(hi) > 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(DynamicsError::NoCrossover);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Separate a rational spectral function into simple decay poles and
/// background. Each returned pole term is `(position, coefficient)` with
/// `Im position < 0`; repeated lower poles are rejected because a single
/// decay rate cannot be assigned to them.
pub fn pole_background_split(
    phi: &RationalFunction,
) -> Result<PoleBackgroundSplit, DynamicsError> {
    let mut pole_terms = Vec::new();
    let mut bg_terms = Vec::new();
    for term in phi.terms() {
        let order = term
            .coeffs
            .iter()
            .rposition(|c| c.norm() > 0.0)
            .map_or(0, |i| i + 1);
        if order == 0 {
            continue;
        }
        if term.position.im < 0.0 {
            if order > 1 {
                return Err(DynamicsError::DegeneratePole {
                    position: term.position,
                    order,
                });
            }
            pole_terms.push((term.position, term.coeffs[0]));
        } else {
            bg_terms.push(PoleTerm {
                position: term.position,
                coeffs: term.coeffs[..order].to_vec(),
            });
        }
    }
    Ok(PoleBackgroundSplit {
        pole_terms,
        background: RationalFunction::new(phi.constant_part(), bg_terms),
    })
}

/// Detection probability at distance `r` from a source switched on at
/// `t = 0`, with signal speed `c`: the decay probability evaluated at the
/// retarded time `t - r/c`. On the full line this is exactly zero ahead
/// of the light front; the half-line truncation lets a small probability
/// leak out early.
pub fn fermi_retarded_probability(
    line: &ResonanceLine,
    psi: &RationalHardyFunction,
    support: SpectralSupport,
    r: f64,
    c: f64,
    t: f64,
) -> Result<f64, DynamicsError> {
    if !(r >= 0.0 && r.is_finite() && c > 0.0 && c.is_finite()) {
        return Err(DynamicsError::BadRetardation { r, c });
    }
    let retarded = t - r / c;
    let a = gamow_amplitude_detailed(line, psi, retarded, support, 1e-10)?;
    Ok(a.value.norm_sqr())
}
