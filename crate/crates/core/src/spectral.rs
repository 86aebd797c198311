//! Lineshapes and spectral densities for an isolated resonance, plus the
//! rational test functions used to probe them.
//!
//! The central object is a resonance line with positive energy `E_R` and
//! width `Gamma`, i.e. the complex pole `z_R = E_R - i*Gamma/2`. The
//! amplitude `i/(w - z_R)` and the Lorentzian density
//! `(Gamma/2pi) / ((E-E_R)^2 + (Gamma/2)^2)` are two renderings of the same
//! pole. Densities can live on the physical half-line `E >= 0` or on the
//! whole real axis; the half-line norm is strictly below one and has the
//! closed form `1/2 + atan(2 E_R / Gamma)/pi`.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("resonance line needs finite e_r > 0 and gamma > 0, got e_r = {e_r}, gamma = {gamma}")]
    InvalidLine { e_r: f64, gamma: f64 },
    #[error("series expansion needs gamma/(2 e_r) < 1, got {ratio}")]
    SeriesDomain { ratio: f64 },
    #[error("pole at {pole} lies outside the required half-plane")]
    PoleOnWrongSide { pole: Complex64 },
    #[error("function must vanish at least like 1/|w|^2 on the far circle (decay order {order})")]
    SlowDecay { order: usize },
    #[error("numerator degree {num_degree} must be below pole count {pole_count}")]
    ImproperRational { num_degree: usize, pole_count: usize },
    #[error("duplicate pole at {pole}; use an explicit multiplicity instead")]
    DuplicatePole { pole: Complex64 },
}

/// An isolated resonance: peak position `e_r` and full width `gamma`,
/// both strictly positive. Everything downstream reads the pair through
/// the complex pole `z_R = E_R - i*Gamma/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceLine {
    e_r: f64,
    gamma: f64,
}

impl ResonanceLine {
    pub fn new(e_r: f64, gamma: f64) -> Result<Self, SpectralError> {
        if !(e_r.is_finite() && gamma.is_finite() && e_r > 0.0 && gamma > 0.0) {
            return Err(SpectralError::InvalidLine { e_r, gamma });
        }
        Ok(Self { e_r, gamma })
    }

    #[inline]
    pub fn e_r(&self) -> f64 {
        self.e_r
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Pole position in the lower half-plane.
    #[inline]
    pub fn z_r(&self) -> Complex64 {
        Complex64::new(self.e_r, -0.5 * self.gamma)
    }

    /// Lifetime in the working units (`hbar = 1`).
    #[inline]
    pub fn tau(&self) -> f64 {
        1.0 / self.gamma
    }

    /// Width-to-position ratio, the small parameter of the narrow-line regime.
    #[inline]
    pub fn ratio(&self) -> f64 {
        self.gamma / self.e_r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralSupport {
    /// Physical spectrum `E >= 0`.
    HalfLine,
    /// Idealized spectrum covering the whole real axis.
    FullLine,
}

impl std::fmt::Display for SpectralSupport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpectralSupport::HalfLine => write!(f, "half-line"),
            SpectralSupport::FullLine => write!(f, "full-line"),
        }
    }
}

/// Breit-Wigner amplitude `i/(w - z_R)`, optionally carrying the
/// `sqrt(gamma/2pi)` factor that makes the associated state unit-normalized.
///
/// `w` must differ from the pole; at `w == z_R` the division overflows
/// to infinity like any complex reciprocal.
pub fn bw_amplitude(line: &ResonanceLine, w: Complex64, normalized: bool) -> Complex64 {
    let scale = if normalized {
        (line.gamma() / (2.0 * PI)).sqrt()
    } else {
        1.0
    };
    Complex64::i() * scale / (w - line.z_r())
}

/// Lorentzian density `(gamma/2pi) / ((e - e_r)^2 + (gamma/2)^2)`.
/// On the half-line the expression is cut off below `e = 0` without
/// re-normalization; see [`EnergyDensity`] for the normalized object.
pub fn bw_density(line: &ResonanceLine, e: f64, support: SpectralSupport) -> f64 {
    if support == SpectralSupport::HalfLine && e < 0.0 {
        return 0.0;
    }
    let d = e - line.e_r();
    let hw = 0.5 * line.gamma();
    line.gamma() / (2.0 * PI) / (d * d + hw * hw)
}

/// Norm of the half-line Lorentzian: `1/2 + atan(2 e_r/gamma)/pi`.
pub fn norm_truncated_closed_form(line: &ResonanceLine) -> f64 {
    0.5 + (2.0 * line.e_r() / line.gamma()).atan() / PI
}

/// Partial sums of the narrow-line expansion of the half-line norm,
/// `1 - (1/pi) (x - x^3/3 + x^5/5 - ...)` with `x = gamma/(2 e_r)`.
/// `order` counts the retained terms beyond none: order 0 keeps `x`,
/// order 1 keeps `x - x^3/3`, and so on. Wide lines (`x >= 1`) are
/// rejected since the alternating series no longer converges.
pub fn norm_truncated_series(line: &ResonanceLine, order: usize) -> Result<f64, SpectralError> {
    let x = line.gamma() / (2.0 * line.e_r());
    if x >= 1.0 {
        return Err(SpectralError::SeriesDomain { ratio: x });
    }
    let mut sum = 0.0;
    let mut power = x;
    let x2 = x * x;
    for k in 0..=order {
        let term = power / (2 * k + 1) as f64;
        sum += if k % 2 == 0 { term } else { -term };
        power *= x2;
    }
    Ok(1.0 - sum / PI)
}

/// Normalized spectral density: the Lorentzian of `line` divided by its
/// norm over `support`, so that it integrates to one there.
#[derive(Debug, Clone)]
pub struct EnergyDensity {
    line: ResonanceLine,
    support: SpectralSupport,
    normalization: f64,
}

impl EnergyDensity {
    pub fn new(line: ResonanceLine, support: SpectralSupport) -> Self {
        let normalization = match support {
            SpectralSupport::HalfLine => norm_truncated_closed_form(&line),
            SpectralSupport::FullLine => 1.0,
        };
        Self {
            line,
            support,
            normalization,
        }
    }

    #[inline]
    pub fn line(&self) -> &ResonanceLine {
        &self.line
    }

    #[inline]
    pub fn support(&self) -> SpectralSupport {
        self.support
    }

    /// Norm of the raw Lorentzian over the support; divides [`Self::eval`].
    #[inline]
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn eval(&self, e: f64) -> f64 {
        bw_density(&self.line, e, self.support) / self.normalization
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfPlane {
    Upper,
    Lower,
}

/// One pole with its stack of partial-fraction coefficients:
/// `coeffs[k]` multiplies `1/(w - position)^(k+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleTerm {
    pub position: Complex64,
    pub coeffs: Vec<Complex64>,
}

impl PoleTerm {
    fn eval(&self, w: Complex64) -> Complex64 {
        let inv = (w - self.position).inv();
        let mut power = inv;
        let mut sum = Complex64::new(0.0, 0.0);
        for c in &self.coeffs {
            sum += c * power;
            power *= inv;
        }
        sum
    }

    fn order(&self) -> usize {
        self.coeffs.len()
    }
}

/// A rational function in partial-fraction form: a constant plus a sum of
/// pole stacks. Decaying functions have zero constant; the rate of decay
/// at infinity follows from moment cancellations among the coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFunction {
    constant: Complex64,
    terms: Vec<PoleTerm>,
}

impl RationalFunction {
    pub fn new(constant: Complex64, terms: Vec<PoleTerm>) -> Self {
        Self { constant, terms }
    }

    pub fn constant(c: Complex64) -> Self {
        Self {
            constant: c,
            terms: Vec::new(),
        }
    }

    /// `1/(w - position)^order`.
    pub fn single_pole_power(position: Complex64, order: usize) -> Self {
        assert!(order >= 1, "pole order must be at least 1");
        let mut coeffs = vec![Complex64::new(0.0, 0.0); order];
        coeffs[order - 1] = Complex64::new(1.0, 0.0);
        Self {
            constant: Complex64::new(0.0, 0.0),
            terms: vec![PoleTerm { position, coeffs }],
        }
    }

    /// Partial-fraction decomposition of `num(w) / prod (w - root)`,
    /// multiplicities allowed. `num` is in ascending powers of `w` and its
    /// degree must stay below the pole count so the result decays.
    pub fn from_ratio(num: &[Complex64], den_roots: &[Complex64]) -> Result<Self, SpectralError> {
        let num_degree = polynomial_degree(num);
        if den_roots.is_empty() || num_degree + 1 > den_roots.len() {
            return Err(SpectralError::ImproperRational {
                num_degree,
                pole_count: den_roots.len(),
            });
        }

        // group exactly-equal roots into multiplicities
        let mut groups: Vec<(Complex64, usize)> = Vec::new();
        for &r in den_roots {
            match groups.iter_mut().find(|(p, _)| *p == r) {
                Some((_, m)) => *m += 1,
                None => groups.push((r, 1)),
            }
        }

        let mut terms = Vec::with_capacity(groups.len());
        for (gi, &(beta, m)) in groups.iter().enumerate() {
            // Taylor coefficients of num(w)/Q(w) around beta, where Q collects
            // every other factor; the stack coefficient on 1/(w-beta)^j is the
            // (m-j)-th of them.
            let num_shifted = taylor_shift(num, beta, m);
            let mut q = vec![Complex64::new(1.0, 0.0)];
            for (gj, &(other, mo)) in groups.iter().enumerate() {
                if gj == gi {
                    continue;
                }
                for _ in 0..mo {
                    q = poly_mul_linear(&q, beta - other, m);
                }
            }
            let q_inv = reciprocal_series(&q, m);
            let t = poly_mul(&num_shifted, &q_inv, m);

            let mut coeffs = vec![Complex64::new(0.0, 0.0); m];
            for j in 1..=m {
                coeffs[j - 1] = t[m - j];
            }
            terms.push(PoleTerm {
                position: beta,
                coeffs,
            });
        }
        Ok(Self {
            constant: Complex64::new(0.0, 0.0),
            terms,
        })
    }

    #[inline]
    pub fn constant_part(&self) -> Complex64 {
        self.constant
    }

    #[inline]
    pub fn terms(&self) -> &[PoleTerm] {
        &self.terms
    }

    pub fn eval(&self, w: Complex64) -> Complex64 {
        let mut sum = self.constant;
        for t in &self.terms {
            sum += t.eval(w);
        }
        sum
    }

    /// Coefficient of `w^-n` in the expansion at infinity (`n >= 1`).
    pub fn asymptotic_coefficient(&self, n: usize) -> Complex64 {
        // 1/(w-b)^j = sum_{n>=j} C(n-1, j-1) b^(n-j) w^-n
        let mut a = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            for (jm1, c) in t.coeffs.iter().enumerate() {
                let j = jm1 + 1;
                if n >= j {
                    a += c * binomial(n - 1, j - 1) * t.position.powu((n - j) as u32);
                }
            }
        }
        a
    }

    /// Smallest `d` with a nonvanishing `w^-d` coefficient; 0 when a constant
    /// part survives at infinity. Cancellations are judged against the
    /// coefficient magnitudes to absorb float noise.
    pub fn decay_order(&self) -> usize {
        let scale: f64 = self
            .terms
            .iter()
            .flat_map(|t| t.coeffs.iter())
            .map(|c| c.norm())
            .sum::<f64>()
            .max(f64::MIN_POSITIVE);
        if self.constant.norm() > 1e-13 * scale.max(1.0) {
            return 0;
        }
        let max_order: usize = self.terms.iter().map(PoleTerm::order).sum();
        let pole_scale = self
            .terms
            .iter()
            .map(|t| t.position.norm())
            .fold(1.0f64, f64::max);
        for n in 1..=max_order {
            let a = self.asymptotic_coefficient(n);
            if a.norm() > 1e-12 * scale * pole_scale.powi(n as i32 - 1) {
                return n;
            }
        }
        // all moments cancel: effectively zero, decays faster than any tracked power
        max_order + 1
    }

    /// The function `w -> w * f(w)`, still in partial-fraction form. Each
    /// stack sheds one power and a decaying `f` of order >= 2 stays free of
    /// a constant part.
    pub fn mul_by_omega(&self) -> Self {
        let mut constant = self.constant; // only sensible when constant == 0
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let m = t.coeffs.len();
            constant += t.coeffs[0];
            let mut coeffs = vec![Complex64::new(0.0, 0.0); m];
            for p in 1..=m {
                let mut c = t.position * t.coeffs[p - 1];
                if p < m {
                    c += t.coeffs[p];
                }
                coeffs[p - 1] = c;
            }
            terms.push(PoleTerm {
                position: t.position,
                coeffs,
            });
        }
        Self { constant, terms }
    }
}

/// Evaluate a partial-fraction rational at a complex point.
pub fn hardy_eval(f: &RationalFunction, z: Complex64) -> Complex64 {
    f.eval(z)
}

/// A rational function analytic throughout one half-plane, with enough decay
/// (order >= 2) that far semicircles on the analytic side contribute nothing
/// to contour integrals.
#[derive(Debug, Clone)]
pub struct RationalHardyFunction {
    func: RationalFunction,
    half_plane: HalfPlane,
}

impl RationalHardyFunction {
    pub fn new(func: RationalFunction, half_plane: HalfPlane) -> Result<Self, SpectralError> {
        for t in func.terms() {
            let ok = match half_plane {
                HalfPlane::Lower => t.position.im > 0.0,
                HalfPlane::Upper => t.position.im < 0.0,
            };
            if !ok {
                return Err(SpectralError::PoleOnWrongSide { pole: t.position });
            }
        }
        let order = func.decay_order();
        if order < 2 {
            return Err(SpectralError::SlowDecay { order });
        }
        Ok(Self { func, half_plane })
    }

    /// `1 / prod (w - pole)` with distinct poles, at least two of them.
    pub fn reciprocal_poles(
        poles: &[Complex64],
        half_plane: HalfPlane,
    ) -> Result<Self, SpectralError> {
        for (i, &p) in poles.iter().enumerate() {
            if poles[..i].contains(&p) {
                return Err(SpectralError::DuplicatePole { pole: p });
            }
        }
        let one = [Complex64::new(1.0, 0.0)];
        let func = RationalFunction::from_ratio(&one, poles)?;
        Self::new(func, half_plane)
    }

    #[inline]
    pub fn half_plane(&self) -> HalfPlane {
        self.half_plane
    }

    #[inline]
    pub fn rational(&self) -> &RationalFunction {
        &self.func
    }

    #[inline]
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.func.eval(z)
    }

    /// The weighted function `w * psi(w)`. Decay drops by one order, which is
    /// fine wherever the weight is paired with another decaying factor, so the
    /// Hardy-side validation is deliberately not repeated.
    pub fn omega_weighted(&self) -> Self {
        Self {
            func: self.func.mul_by_omega(),
            half_plane: self.half_plane,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SemicircleReport {
    pub radii: Vec<f64>,
    /// max over the sampled circle of `|f(R e^{i theta})| * R`.
    pub bounds: Vec<f64>,
    /// true when the bounds fall monotonically, i.e. decay is at least 1/R^2.
    pub decaying: bool,
}

/// Sample `|f| * R` on circles of the given radii (1000 angles each). The
/// bound sequence goes to zero exactly when `f` decays faster than `1/|w|`,
/// which is the condition for dropping far arcs from contour integrals.
pub fn verify_semicircle_decay(f: &RationalFunction, radii: &[f64]) -> SemicircleReport {
    const ANGLES: usize = 1000;
    let mut bounds = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut max = 0.0f64;
        for k in 0..ANGLES {
            let theta = 2.0 * PI * (k as f64 + 0.5) / ANGLES as f64;
            let w = Complex64::from_polar(r, theta);
            max = max.max(f.eval(w).norm() * r);
        }
        bounds.push(max);
    }
    let decaying = bounds.windows(2).all(|p| p[1] < p[0] * (1.0 - 1e-9));
    SemicircleReport {
        radii: radii.to_vec(),
        bounds,
        decaying,
    }
}

fn polynomial_degree(coeffs: &[Complex64]) -> usize {
    coeffs
        .iter()
        .rposition(|c| c.norm() > 0.0)
        .unwrap_or(0)
}

/// First `keep` Taylor coefficients of `p(w)` around `w = center`,
/// via repeated synthetic division by `(w - center)`.
fn taylor_shift(p: &[Complex64], center: Complex64, keep: usize) -> Vec<Complex64> {
    let mut work: Vec<Complex64> = p.to_vec();
    let mut out = vec![Complex64::new(0.0, 0.0); keep];
    for slot in out.iter_mut() {
        let n = work.len();
        if n == 0 {
            break;
        }
        let mut quotient = vec![Complex64::new(0.0, 0.0); n - 1];
        let mut b = work[n - 1];
        for k in (0..n - 1).rev() {
            quotient[k] = b;
            b = work[k] + center * b;
        }
        *slot = b; // remainder: next derivative term
        work = quotient;
    }
    out
}

/// Multiply a truncated series by `(u + a)`, keeping `keep` coefficients.
fn poly_mul_linear(p: &[Complex64], a: Complex64, keep: usize) -> Vec<Complex64> {
    let n = (p.len() + 1).min(keep);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (i, &c) in p.iter().enumerate() {
        if i < n {
            out[i] += c * a;
        }
        if i + 1 < n {
            out[i + 1] += c;
        }
    }
    out
}

fn poly_mul(a: &[Complex64], b: &[Complex64], keep: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); keep];
    for (i, &ca) in a.iter().enumerate() {
        if i >= keep {
            break;
        }
        for (j, &cb) in b.iter().enumerate() {
            if i + j >= keep {
                break;
            }
            out[i + j] += ca * cb;
        }
    }
    out
}

/// Coefficients of `1/q(u)` as a truncated power series; `q(0)` must be nonzero.
fn reciprocal_series(q: &[Complex64], keep: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); keep];
    let q0 = q[0];
    out[0] = q0.inv();
    for n in 1..keep {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 1..=n {
            let qk = if k < q.len() {
                q[k]
            } else {
                Complex64::new(0.0, 0.0)
            };
            acc += qk * out[n - k];
        }
        out[n] = -acc / q0;
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k.min(n));
    let mut v = 1.0;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}
