//! Synthetic resonance data and the fits that pull the width back out.
//!
//! Two experimental routes measure the same number: the energy-domain
//! linewidth of the cross section peak, and the time-domain rate of the
//! counting curve. The generators here produce both kinds of data from a
//! known line, the fitters recover the parameters, and
//! [`compare_width_lifetime`] turns the pair into the lifetime test
//! `tau = hbar / gamma`.
//!
//! Generators are deterministic functions of their seed. Fitters never use
//! the generator parameters; round-tripping is the correctness check, not
//! an input.

use crate::spectral::ResonanceLine;
use crate::units;
use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FittingError {
    #[error("noise sigma must be non-negative, got {sigma}")]
    NegativeNoise { sigma: f64 },
    #[error("need at least {minimum} sample points, got {n}")]
    TooFewSamples { n: usize, minimum: usize },
    #[error("no interior peak in the sampled window")]
    NoPeak,
    #[error("fit did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("bin edges must be non-negative and strictly increasing: {detail}")]
    BadBinEdges { detail: String },
    #[error("every bin is empty")]
    AllBinsEmpty,
    #[error("need at least {minimum} non-empty bins, got {nonempty}")]
    TooFewBins { nonempty: usize, minimum: usize },
    #[error("counts do not decrease with time; no decay rate to extract")]
    NotDecaying,
    #[error("widths must be positive, got {value}")]
    NonPositiveWidth { value: f64 },
    #[error("line {line}: {detail}")]
    BadRecord { line: usize, detail: String },
}

/// Cross-section samples on an energy grid, possibly noisy.
#[derive(Debug, Clone)]
pub struct LineshapeSample {
    pub energies: Vec<f64>,
    pub cross_sections: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Histogrammed decay events. `counts[k]` covers
/// `[bin_edges[k], bin_edges[k+1])`.
#[derive(Debug, Clone)]
pub struct DecayCounts {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_initial: u64,
}

#[derive(Debug, Clone)]
pub struct LineshapeFit {
    pub e_r: f64,
    pub gamma: f64,
    pub scale: f64,
    pub e_r_err: f64,
    pub gamma_err: f64,
    pub scale_err: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct DecayRateFit {
    pub gamma_r: f64,
    pub gamma_r_err: f64,
    pub iterations: usize,
}

/// Width from the lineshape against width from the rate, with the lifetime
/// `tau = hbar/gamma_r` in seconds. Inputs are in eV.
#[derive(Debug, Clone)]
pub struct WidthLifetimeReport {
    pub gamma_fit: f64,
    pub gamma_fit_err: f64,
    pub gamma_r_fit: f64,
    pub gamma_r_fit_err: f64,
    pub tau_fit_seconds: f64,
    pub tau_err_seconds: f64,
    pub ratio: f64,
    pub ratio_err: f64,
}

/// Lorentzian cross section `scale / ((E - e_r)^2 + (gamma/2)^2)` sampled
/// on `e_grid`, with seeded Gaussian noise added and the result clipped at
/// zero (counts cannot go negative).
pub fn generate_lineshape(
    line: &ResonanceLine,
    e_grid: &[f64],
    amplitude_scale: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<LineshapeSample, FittingError> {
    if noise_sigma < 0.0 {
        return Err(FittingError::NegativeNoise { sigma: noise_sigma });
    }
    let hw = 0.5 * line.gamma();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if noise_sigma > 0.0 {
        Some(Normal::new(0.0, noise_sigma).expect("sigma checked"))
    } else {
        None
    };
    let cross_sections = e_grid
        .iter()
        .map(|&e| {
            let d = e - line.e_r();
            let clean = amplitude_scale / (d * d + hw * hw);
            let y = clean + noise.map_or(0.0, |n| n.sample(&mut rng));
            y.max(0.0)
        })
        .collect();
    Ok(LineshapeSample {
        energies: e_grid.to_vec(),
        cross_sections,
        noise_sigma,
        seed,
    })
}

fn lorentz_model(p: &Vector3<f64>, e: f64) -> (f64, Vector3<f64>) {
    // p = (scale, e_r, gamma)
    let d = e - p[1];
    let hw = 0.5 * p[2];
    let denom = d * d + hw * hw;
    let value = p[0] / denom;
    let jac = Vector3::new(
        1.0 / denom,
        p[0] * 2.0 * d / (denom * denom),
        -p[0] * hw / (denom * denom),
    );
    (value, jac)
}

/// Three-parameter Lorentzian least squares (scale, center, width) by
/// Levenberg-Marquardt with the analytic Jacobian. Starts from the grid
/// peak and an FWHM scan; converges when the relative parameter step
/// drops below 1e-10.
pub fn fit_lineshape(sample: &LineshapeSample) -> Result<LineshapeFit, FittingError> {
    let n = sample.energies.len();
    if n < 5 {
        return Err(FittingError::TooFewSamples { n, minimum: 5 });
    }
    let e = &sample.energies;
    let y = &sample.cross_sections;

    let (peak_idx, &peak) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    if peak_idx == 0 || peak_idx == n - 1 || peak <= 0.0 {
        return Err(FittingError::NoPeak);
    }

    // FWHM scan: first half-maximum crossings walking out from the peak
    let half = 0.5 * peak;
    let cross_left = (0..peak_idx).rev().find(|&i| y[i] < half).map(|i| {
        let f = (half - y[i]) / (y[i + 1] - y[i]);
        e[i] + f * (e[i + 1] - e[i])
    });
    let cross_right = (peak_idx + 1..n).find(|&i| y[i] < half).map(|i| {
        let f = (half - y[i - 1]) / (y[i] - y[i - 1]);
        e[i - 1] + f * (e[i] - e[i - 1])
    });
    let gamma0 = match (cross_left, cross_right) {
        (Some(l), Some(r)) => r - l,
        // window narrower than the line: start from its span instead
        _ => (e[n - 1] - e[0]) / 4.0,
    };
    let mut p = Vector3::new(peak * (gamma0 / 2.0).powi(2), e[peak_idx], gamma0);

    let cost = |p: &Vector3<f64>| -> f64 {
        e.iter()
            .zip(y)
            .map(|(&ei, &yi)| {
                let (m, _) = lorentz_model(p, ei);
                (m - yi).powi(2)
            })
            .sum()
    };

    let max_iter = 500;
    let mut lambda = 1e-3;
    let mut current_cost = cost(&p);
    for iter in 0..max_iter {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (&ei, &yi) in e.iter().zip(y) {
            let (m, jac) = lorentz_model(&p, ei);
            let r = m - yi;
            jtj += jac * jac.transpose();
            jtr += jac * r;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let mut damped = jtj;
            for k in 0..3 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let step = match damped.lu().solve(&jtr) {
                Some(s) => s,
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial = p - step;
            if trial[0] <= 0.0 || trial[2] <= 0.0 {
                lambda *= 10.0;
                continue;
            }
            let trial_cost = cost(&trial);
            if trial_cost <= current_cost {
                let rel_step = (0..3)
                    .map(|k| (step[k] / (p[k].abs() + 1e-300)).abs())
                    .fold(0.0f64, f64::max);
                p = trial;
                current_cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-14);
                accepted = true;
                if rel_step < 1e-10 {
                    return finish_lineshape(&p, e, y, current_cost, iter + 1);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // damping saturated: the step is numerically zero, we are there
            return finish_lineshape(&p, e, y, current_cost, iter + 1);
        }
    }
    Err(FittingError::NonConvergence {
        iterations: max_iter,
    })
}

fn finish_lineshape(
    p: &Vector3<f64>,
    e: &[f64],
    y: &[f64],
    cost: f64,
    iterations: usize,
) -> Result<LineshapeFit, FittingError> {
    let mut jtj = Matrix3::zeros();
    for &ei in e {
        let (_, jac) = lorentz_model(p, ei);
        jtj += jac * jac.transpose();
    }
    let dof = e.len().saturating_sub(3).max(1) as f64;
    let s2 = cost / dof;
    let cov = jtj.try_inverse().map(|inv| inv * s2);
    let err = |k: usize| cov.map_or(f64::NAN, |c| c[(k, k)].max(0.0).sqrt());
    let _ = y;
    Ok(LineshapeFit {
        scale: p[0],
        e_r: p[1],
        gamma: p[2],
        scale_err: err(0),
        e_r_err: err(1),
        gamma_err: err(2),
        iterations,
    })
}

fn validate_edges(bin_edges: &[f64]) -> Result<(), FittingError> {
    if bin_edges.len() < 2 {
        return Err(FittingError::BadBinEdges {
            detail: format!("need at least 2 edges, got {}", bin_edges.len()),
        });
    }
    if bin_edges[0] < 0.0 {
        return Err(FittingError::BadBinEdges {
            detail: format!("first edge {} is negative", bin_edges[0]),
        });
    }
    if let Some(k) = (1..bin_edges.len()).find(|&k| bin_edges[k] <= bin_edges[k - 1]) {
        return Err(FittingError::BadBinEdges {
            detail: format!(
                "edge {} ({}) does not exceed edge {} ({})",
                k,
                bin_edges[k],
                k - 1,
                bin_edges[k - 1]
            ),
        });
    }
    Ok(())
}

/// Histogram of decays of `n_initial` states: expected counts per bin are
/// `N (exp(-gamma t_k) - exp(-gamma t_{k+1}))`, Poisson-sampled when
/// `poisson` is set and rounded otherwise.
pub fn generate_decay_counts(
    line: &ResonanceLine,
    bin_edges: &[f64],
    n_initial: u64,
    seed: u64,
    poisson: bool,
) -> Result<DecayCounts, FittingError> {
    validate_edges(bin_edges)?;
    let gamma = line.gamma();
    let n = n_initial as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = bin_edges
        .windows(2)
        .map(|w| {
            let mu = n * ((-gamma * w[0]).exp() - (-gamma * w[1]).exp());
            if poisson && mu > 0.0 {
                Poisson::new(mu).expect("mu positive").sample(&mut rng) as u64
            } else {
                mu.round() as u64
            }
        })
        .collect();
    Ok(DecayCounts {
        bin_edges: bin_edges.to_vec(),
        counts,
        n_initial,
    })
}

/// Mean time of an exponential with rate `gamma` truncated to `[a, b]`,
/// written so the `1/gamma` pieces cancel against the window mean inside
/// the score. Returns the mean minus `1/gamma`.
fn shifted_bin_mean(gamma: f64, a: f64, b: f64) -> f64 {
    let d = b - a;
    // 1 - exp(-gamma d), accurate for small exponents
    let e = -(-gamma * d).exp_m1();
    b - d / e
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Score of the profile (multinomial) likelihood in the rate: the window
/// mean time minus the data-weighted bin mean times. Positive while the
/// trial rate is too small.
fn rate_score(gamma: f64, edges: &[f64], counts: &[u64]) -> f64 {
    let n_tot: f64 = counts.iter().map(|&c| c as f64).sum();
    let window = shifted_bin_mean(gamma, edges[0], edges[edges.len() - 1]);
    let data: f64 = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| c as f64 * shifted_bin_mean(gamma, edges[k], edges[k + 1]))
        .sum();
    n_tot * window - data
}

/// Maximum-likelihood decay rate from binned counts: the root of the
/// profile-likelihood score, found by bisection over a fixed wide bracket.
/// The estimate depends only on the shape of the histogram, never on its
/// normalization.
pub fn fit_decay_rate(counts: &DecayCounts) -> Result<DecayRateFit, FittingError> {
    validate_edges(&counts.bin_edges)?;
    if counts.counts.len() != counts.bin_edges.len() - 1 {
        return Err(FittingError::BadBinEdges {
            detail: format!(
                "{} bins but {} counts",
                counts.bin_edges.len() - 1,
                counts.counts.len()
            ),
        });
    }
    let nonempty = counts.counts.iter().filter(|&&c| c > 0).count();
    if nonempty == 0 {
        return Err(FittingError::AllBinsEmpty);
    }
    if nonempty < 3 {
        return Err(FittingError::TooFewBins {
            nonempty,
            minimum: 3,
        });
    }

    // reduce by the common factor so rescaled histograms bisect on
    // bit-identical scores: the estimate is a function of shape alone
    let common = counts.counts.iter().fold(0, |acc, &c| gcd(acc, c));
    let reduced: Vec<u64> = counts.counts.iter().map(|&c| c / common.max(1)).collect();

    let edges = &counts.bin_edges;
    let span = edges[edges.len() - 1] - edges[0];
    let (mut lo, mut hi) = (1e-6 / span, 1e6 / span);
    let u = |g: f64| rate_score(g, edges, &reduced);
    if !(u(lo) > 0.0 && u(hi) < 0.0) {
        return Err(FittingError::NotDecaying);
    }
    let mut iterations = 0;
    while hi - lo > 2.0 * f64::EPSILON * hi && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if u(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let gamma_r = 0.5 * (lo + hi);

    // observed information of the profile likelihood by a central
    // difference of the analytic score, at the full event count
    let h = gamma_r * 1e-5;
    let full = |g: f64| rate_score(g, edges, &counts.counts);
    let info = -(full(gamma_r + h) - full(gamma_r - h)) / (2.0 * h);
    let gamma_r_err = if info > 0.0 {
        1.0 / info.sqrt()
    } else {
        f64::NAN
    };
    Ok(DecayRateFit {
        gamma_r,
        gamma_r_err,
        iterations,
    })
}

/// Assemble the lifetime test: `tau = hbar/gamma_r` in seconds (inputs in
/// eV) and the width ratio with first-order error propagation.
pub fn compare_width_lifetime(
    gamma_fit: f64,
    gamma_fit_err: f64,
    gamma_r_fit: f64,
    gamma_r_fit_err: f64,
) -> Result<WidthLifetimeReport, FittingError> {
    for value in [gamma_fit, gamma_r_fit] {
        if !(value > 0.0) {
            return Err(FittingError::NonPositiveWidth { value });
        }
    }
    let tau_fit_seconds = units::lifetime_seconds(gamma_r_fit);
    let tau_err_seconds = tau_fit_seconds * (gamma_r_fit_err / gamma_r_fit);
    let ratio = gamma_fit / gamma_r_fit;
    let rel = (gamma_fit_err / gamma_fit).hypot(gamma_r_fit_err / gamma_r_fit);
    Ok(WidthLifetimeReport {
        gamma_fit,
        gamma_fit_err,
        gamma_r_fit,
        gamma_r_fit_err,
        tau_fit_seconds,
        tau_err_seconds,
        ratio,
        ratio_err: ratio * rel,
    })
}

/// Two columns `energy,cross_section`, one row per sample point.
pub fn export_lineshape(sample: &LineshapeSample) -> String {
    let mut out = String::from("# energy,cross_section\n");
    for (e, y) in sample.energies.iter().zip(&sample.cross_sections) {
        out.push_str(&format!("{e},{y}\n"));
    }
    out
}

fn parse_f64(field: &str, line: usize) -> Result<f64, FittingError> {
    field
        .trim()
        .parse()
        .map_err(|_| FittingError::BadRecord {
            line,
            detail: format!("cannot parse '{}' as a number", field.trim()),
        })
}

fn data_rows(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parse `energy,cross_section` rows. Imported samples carry the observed
/// columns only; generator metadata (`noise_sigma`, `seed`) is zeroed.
pub fn import_lineshape(text: &str) -> Result<LineshapeSample, FittingError> {
    let mut energies = Vec::new();
    let mut cross_sections = Vec::new();
    for (line, row) in data_rows(text) {
        let mut fields = row.split(',');
        let (e, y) = match (fields.next(), fields.next(), fields.next()) {
            (Some(e), Some(y), None) => (e, y),
            _ => {
                return Err(FittingError::BadRecord {
                    line,
                    detail: "expected exactly 2 comma-separated fields".into(),
                })
            }
        };
        energies.push(parse_f64(e, line)?);
        cross_sections.push(parse_f64(y, line)?);
    }
    Ok(LineshapeSample {
        energies,
        cross_sections,
        noise_sigma: 0.0,
        seed: 0,
    })
}

/// Three columns `t_lo,t_hi,count`, one row per bin.
pub fn export_decay_counts(counts: &DecayCounts) -> String {
    let mut out = String::from("# t_lo,t_hi,count\n");
    for (w, c) in counts.bin_edges.windows(2).zip(&counts.counts) {
        out.push_str(&format!("{},{},{}\n", w[0], w[1], c));
    }
    out
}

/// Parse `t_lo,t_hi,count` rows into a contiguous histogram. Rows must
/// tile the time axis without gaps; `n_initial` is reconstructed as the
/// total observed count.
pub fn import_decay_counts(text: &str) -> Result<DecayCounts, FittingError> {
    let mut bin_edges: Vec<f64> = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    for (line, row) in data_rows(text) {
        let mut fields = row.split(',');
        let (lo, hi, c) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(lo), Some(hi), Some(c), None) => (lo, hi, c),
            _ => {
                return Err(FittingError::BadRecord {
                    line,
                    detail: "expected exactly 3 comma-separated fields".into(),
                })
            }
        };
        let lo = parse_f64(lo, line)?;
        let hi = parse_f64(hi, line)?;
        let count: u64 = c.trim().parse().map_err(|_| FittingError::BadRecord {
            line,
            detail: format!("cannot parse '{}' as a count", c.trim()),
        })?;
        match bin_edges.last() {
            None => bin_edges.push(lo),
            Some(&prev_hi) if prev_hi == lo => {}
            Some(&prev_hi) => {
                return Err(FittingError::BadRecord {
                    line,
                    detail: format!("bin starts at {lo} but the previous one ended at {prev_hi}"),
                })
            }
        }
        bin_edges.push(hi);
        counts.push(count);
    }
    validate_edges(&bin_edges)?;
    let n_initial = counts.iter().sum();
    Ok(DecayCounts {
        bin_edges,
        counts,
        n_initial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_mean_limits() {
        // gamma -> 0: mean tends to the midpoint, shifted by 1/gamma
        let g = 1e-9;
        let m = shifted_bin_mean(g, 2.0, 3.0) + 1.0 / g;
        assert!((m - 2.5).abs() < 1e-6);
        // gamma large: all mass at the left edge
        let g = 1e4;
        let m = shifted_bin_mean(g, 2.0, 3.0) + 1.0 / g;
        assert!((m - 2.0).abs() < 1e-3);
    }

    #[test]
    fn score_sign_flips_across_the_true_rate() {
        let line = ResonanceLine::new(1.0, 0.2).unwrap();
        let edges: Vec<f64> = (0..=30).map(|k| k as f64).collect();
        let counts = generate_decay_counts(&line, &edges, 10_000_000, 0, false).unwrap();
        assert!(rate_score(0.1, &edges, &counts.counts) > 0.0);
        assert!(rate_score(0.4, &edges, &counts.counts) < 0.0);
    }
}
