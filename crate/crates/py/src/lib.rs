//! Python face of gamow-core: thin wrappers over the lineshape, decay-law,
//! fitting, and symmetry-action entry points. Errors surface as ValueError
//! with the library's own messages; complex numbers cross the boundary as
//! Python complex.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gamow_core::dynamics;
use gamow_core::fitting;
use gamow_core::relativistic::{
    self, FourVector, HalfInt, LorentzTransform, PoincareOutcome,
};
use gamow_core::spectral::{self, HalfPlane, RationalHardyFunction, SpectralSupport};
use gamow_core::units;

fn val_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_support(s: &str) -> PyResult<SpectralSupport> {
    match s {
        "half-line" => Ok(SpectralSupport::HalfLine),
        "full-line" => Ok(SpectralSupport::FullLine),
        other => Err(PyValueError::new_err(format!(
            "support must be 'half-line' or 'full-line', got '{other}'"
        ))),
    }
}

fn half_int(name: &str, x: f64) -> PyResult<HalfInt> {
    let twice = (2.0 * x).round();
    if (2.0 * x - twice).abs() > 1e-9 {
        return Err(PyValueError::new_err(format!(
            "{name} must be integer or half-integer, got {x}"
        )));
    }
    Ok(HalfInt::from_twice(twice as i32))
}

fn window_from_poles(poles: Vec<Complex64>) -> PyResult<RationalHardyFunction> {
    RationalHardyFunction::reciprocal_poles(&poles, HalfPlane::Lower).map_err(val_err)
}

/// Breit-Wigner line: resonance energy and width in the same energy unit.
#[pyclass(frozen)]
#[derive(Clone)]
struct ResonanceLine {
    inner: spectral::ResonanceLine,
}

#[pymethods]
impl ResonanceLine {
    #[new]
    fn new(e_r: f64, gamma: f64) -> PyResult<Self> {
        Ok(Self {
            inner: spectral::ResonanceLine::new(e_r, gamma).map_err(val_err)?,
        })
    }

    #[getter]
    fn e_r(&self) -> f64 {
        self.inner.e_r()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    /// Lifetime 1/gamma in natural time units (hbar / energy unit).
    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau()
    }

    /// Lower-half-plane pole e_r - i gamma/2.
    #[getter]
    fn z_r(&self) -> Complex64 {
        self.inner.z_r()
    }

    /// Half-line norm of the line, in closed form.
    fn norm_truncated(&self) -> f64 {
        spectral::norm_truncated_closed_form(&self.inner)
    }

    /// Partial sum of the narrow-line expansion of the half-line norm.
    fn norm_series(&self, order: usize) -> PyResult<f64> {
        spectral::norm_truncated_series(&self.inner, order).map_err(val_err)
    }

    /// Time at which the half-line power tail overtakes the exponential.
    fn crossover_time(&self) -> PyResult<f64> {
        dynamics::crossover_time(&self.inner).map_err(val_err)
    }

    fn __repr__(&self) -> String {
        format!("ResonanceLine(e_r={}, gamma={})", self.inner.e_r(), self.inner.gamma())
    }
}

/// Survival amplitude of the truncated line at time `t`: value and an
/// absolute error estimate.
#[pyfunction]
#[pyo3(signature = (line, support, t, tol=1e-8))]
fn survival_amplitude(
    line: &ResonanceLine,
    support: &str,
    t: f64,
    tol: f64,
) -> PyResult<(Complex64, f64)> {
    let r = dynamics::survival_amplitude(&line.inner, parse_support(support)?, t, tol)
        .map_err(val_err)?;
    Ok((r.value, r.abs_error_estimate))
}

/// |survival amplitude|^2 at a fixed internal tolerance.
#[pyfunction]
fn survival_probability(line: &ResonanceLine, support: &str, t: f64) -> PyResult<f64> {
    dynamics::survival_probability(&line.inner, parse_support(support)?, t).map_err(val_err)
}

/// Resonance-term amplitude seen through a rational window with the given
/// upper-half-plane poles. Returns (value, error estimate).
#[pyfunction]
#[pyo3(signature = (line, psi_poles, t, support, tol=1e-8))]
fn gamow_amplitude(
    line: &ResonanceLine,
    psi_poles: Vec<Complex64>,
    t: f64,
    support: &str,
    tol: f64,
) -> PyResult<(Complex64, f64)> {
    let psi = window_from_poles(psi_poles)?;
    let r = dynamics::gamow_amplitude_detailed(&line.inner, &psi, t, parse_support(support)?, tol)
        .map_err(val_err)?;
    Ok((r.value, r.abs_error_estimate))
}

/// Detector response at distance `r` with signal speed `c`.
#[pyfunction]
fn fermi_retarded_probability(
    line: &ResonanceLine,
    psi_poles: Vec<Complex64>,
    support: &str,
    r: f64,
    c: f64,
    t: f64,
) -> PyResult<f64> {
    let psi = window_from_poles(psi_poles)?;
    dynamics::fermi_retarded_probability(&line.inner, &psi, parse_support(support)?, r, c, t)
        .map_err(val_err)
}

/// Log-log slope of the late half-line survival tail over [t_min, t_max].
#[pyfunction]
#[pyo3(signature = (line, t_min, t_max, points=30))]
fn tail_exponent(line: &ResonanceLine, t_min: f64, t_max: f64, points: usize) -> PyResult<f64> {
    dynamics::tail_exponent(&line.inner, SpectralSupport::HalfLine, (t_min, t_max), points)
        .map_err(val_err)
}

/// Noisy Lorentzian samples on an energy grid; returns the cross sections.
#[pyfunction]
fn generate_lineshape(
    line: &ResonanceLine,
    energies: Vec<f64>,
    amplitude_scale: f64,
    noise_sigma: f64,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let sample =
        fitting::generate_lineshape(&line.inner, &energies, amplitude_scale, noise_sigma, seed)
            .map_err(val_err)?;
    Ok(sample.cross_sections)
}

/// Lorentzian least squares. Returns a dict with e_r, gamma, scale and
/// their standard errors.
#[pyfunction]
fn fit_lineshape(
    py: Python<'_>,
    energies: Vec<f64>,
    cross_sections: Vec<f64>,
) -> PyResult<PyObject> {
    let sample = fitting::LineshapeSample {
        energies,
        cross_sections,
        noise_sigma: 0.0,
        seed: 0,
    };
    let fit = fitting::fit_lineshape(&sample).map_err(val_err)?;
    let out = PyDict::new_bound(py);
    out.set_item("e_r", fit.e_r)?;
    out.set_item("gamma", fit.gamma)?;
    out.set_item("scale", fit.scale)?;
    out.set_item("e_r_err", fit.e_r_err)?;
    out.set_item("gamma_err", fit.gamma_err)?;
    out.set_item("scale_err", fit.scale_err)?;
    Ok(out.into())
}

/// Histogrammed decay events for `n_initial` states on the given edges.
#[pyfunction]
#[pyo3(signature = (line, bin_edges, n_initial, seed=0, poisson=false))]
fn generate_decay_counts(
    line: &ResonanceLine,
    bin_edges: Vec<f64>,
    n_initial: u64,
    seed: u64,
    poisson: bool,
) -> PyResult<Vec<u64>> {
    let counts = fitting::generate_decay_counts(&line.inner, &bin_edges, n_initial, seed, poisson)
        .map_err(val_err)?;
    Ok(counts.counts)
}

/// Maximum-likelihood decay rate from a histogram. Returns a dict with
/// gamma_r and gamma_r_err.
#[pyfunction]
fn fit_decay_rate(py: Python<'_>, bin_edges: Vec<f64>, counts: Vec<u64>) -> PyResult<PyObject> {
    let n_initial = counts.iter().sum();
    let data = fitting::DecayCounts {
        bin_edges,
        counts,
        n_initial,
    };
    let fit = fitting::fit_decay_rate(&data).map_err(val_err)?;
    let out = PyDict::new_bound(py);
    out.set_item("gamma_r", fit.gamma_r)?;
    out.set_item("gamma_r_err", fit.gamma_r_err)?;
    Ok(out.into())
}

/// Width-versus-lifetime comparison; widths in eV, lifetime in seconds.
#[pyfunction]
fn compare_width_lifetime(
    py: Python<'_>,
    gamma_fit: f64,
    gamma_fit_err: f64,
    gamma_r_fit: f64,
    gamma_r_fit_err: f64,
) -> PyResult<PyObject> {
    let report =
        fitting::compare_width_lifetime(gamma_fit, gamma_fit_err, gamma_r_fit, gamma_r_fit_err)
            .map_err(val_err)?;
    let out = PyDict::new_bound(py);
    out.set_item("tau_fit_seconds", report.tau_fit_seconds)?;
    out.set_item("tau_err_seconds", report.tau_err_seconds)?;
    out.set_item("ratio", report.ratio)?;
    out.set_item("ratio_err", report.ratio_err)?;
    Ok(out.into())
}

/// Lifetime in seconds from a width in eV.
#[pyfunction]
fn lifetime_seconds(gamma_ev: f64) -> f64 {
    units::lifetime_seconds(gamma_ev)
}

/// Width in eV from a lifetime in seconds.
#[pyfunction]
fn width_ev(tau_s: f64) -> f64 {
    units::width_ev(tau_s)
}

/// Spin-j rotation matrix for a rotation about `axis` by `angle`,
/// as a (2j+1) x (2j+1) nested list, rows indexed from m' = +j down.
#[pyfunction]
fn wigner_d(j: f64, axis: (f64, f64, f64), angle: f64) -> PyResult<Vec<Vec<Complex64>>> {
    let j = half_int("j", j)?;
    let rot = LorentzTransform::rotation([axis.0, axis.1, axis.2], angle).map_err(val_err)?;
    let d = relativistic::wigner_d(j, &rot).map_err(val_err)?;
    Ok((0..d.nrows())
        .map(|r| (0..d.ncols()).map(|c| d[(r, c)]).collect())
        .collect())
}

/// Resonance label (j, pole mass, width, velocity, j3) under Poincare
/// actions restricted to forward-cone translations.
#[pyclass(frozen)]
struct GamowLabel {
    inner: relativistic::GamowLabel,
}

#[pymethods]
impl GamowLabel {
    #[new]
    #[pyo3(signature = (j, mass, width, j3, velocity=(0.0, 0.0, 0.0)))]
    fn new(j: f64, mass: f64, width: f64, j3: f64, velocity: (f64, f64, f64)) -> PyResult<Self> {
        let inner = relativistic::GamowLabel::from_mass_width(
            half_int("j", j)?,
            mass,
            width,
            [velocity.0, velocity.1, velocity.2],
            half_int("j3", j3)?,
        )
        .map_err(val_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn sqrt_s_r(&self) -> Complex64 {
        self.inner.sqrt_s_r()
    }

    /// Act with a Lorentz transformation and a spacetime translation `x`.
    /// Provide at most one of `boost` (a 3-velocity) or `rotation`
    /// (axis, angle). Returns a dict: either the transformed phase,
    /// spin components and pulled-back velocity, or a rejection.
    #[pyo3(signature = (x, boost=None, rotation=None))]
    fn transform(
        &self,
        py: Python<'_>,
        x: (f64, f64, f64, f64),
        boost: Option<(f64, f64, f64)>,
        rotation: Option<((f64, f64, f64), f64)>,
    ) -> PyResult<PyObject> {
        let lambda = match (boost, rotation) {
            (None, None) => LorentzTransform::identity(),
            (Some(v), None) => LorentzTransform::boost([v.0, v.1, v.2]).map_err(val_err)?,
            (None, Some((axis, angle))) => {
                LorentzTransform::rotation([axis.0, axis.1, axis.2], angle).map_err(val_err)?
            }
            (Some(_), Some(_)) => {
                return Err(PyValueError::new_err("give either boost or rotation, not both"))
            }
        };
        let x = FourVector::new(x.0, [x.1, x.2, x.3]);
        let out = PyDict::new_bound(py);
        match relativistic::transform_gamow(&self.inner, &lambda, x).map_err(val_err)? {
            PoincareOutcome::Transformed(state) => {
                out.set_item("status", "TRANSFORMED")?;
                out.set_item("phase", state.phase)?;
                out.set_item("abs_phase", state.phase.norm())?;
                out.set_item("components", state.components)?;
                let p = state.new_p_hat;
                out.set_item("new_p_hat", (p.t, p.x[0], p.x[1], p.x[2]))?;
            }
            PoincareOutcome::Rejected(rejection) => {
                out.set_item("status", "REJECTED")?;
                out.set_item("reason", rejection.to_string())?;
            }
        }
        Ok(out.into())
    }

    fn __repr__(&self) -> String {
        format!(
            "GamowLabel(j={}, sqrt_s_r={}, j3={})",
            self.inner.j(),
            self.inner.sqrt_s_r(),
            self.inner.j3()
        )
    }
}

#[pymodule]
fn gamow_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HBAR_EV_S", units::HBAR_EV_S)?;
    m.add_class::<ResonanceLine>()?;
    m.add_class::<GamowLabel>()?;
    m.add_function(wrap_pyfunction!(survival_amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(survival_probability, m)?)?;
    m.add_function(wrap_pyfunction!(gamow_amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(fermi_retarded_probability, m)?)?;
    m.add_function(wrap_pyfunction!(tail_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(generate_lineshape, m)?)?;
    m.add_function(wrap_pyfunction!(fit_lineshape, m)?)?;
    m.add_function(wrap_pyfunction!(generate_decay_counts, m)?)?;
    m.add_function(wrap_pyfunction!(fit_decay_rate, m)?)?;
    m.add_function(wrap_pyfunction!(compare_width_lifetime, m)?)?;
    m.add_function(wrap_pyfunction!(lifetime_seconds, m)?)?;
    m.add_function(wrap_pyfunction!(width_ev, m)?)?;
    m.add_function(wrap_pyfunction!(wigner_d, m)?)?;
    Ok(())
}
