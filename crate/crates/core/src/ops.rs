//! Spectral differential operators, norms, the frequency cutoff `J_n` and the
//! electrostatic (Gauss-law) field solve.
//!
//! Derivatives multiply by `i k` with the Nyquist wavenumber set to zero, so
//! derivatives of real fields stay real and `laplacian == divergence2 ∘
//! gradient3` holds exactly. Norm weights and the cutoff ball use the true
//! `|k|`.

use rustfft::num_complex::Complex64;

use crate::error::SpectralError;
use crate::field::{ScalarField, SpectralField, VectorField3};
use crate::grid::{pairwise_sum, sum_by, Grid};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Supported Lebesgue exponents for [`lp_norm`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lebesgue {
    Two,
    Four,
    Infinity,
}

impl TryFrom<f64> for Lebesgue {
    type Error = SpectralError;

    fn try_from(p: f64) -> Result<Self, Self::Error> {
        if p == 2.0 {
            Ok(Lebesgue::Two)
        } else if p == 4.0 {
            Ok(Lebesgue::Four)
        } else if p == f64::INFINITY {
            Ok(Lebesgue::Infinity)
        } else {
            Err(SpectralError::UnsupportedExponent(p))
        }
    }
}

/// Friedrichs cutoff `J_n`: keeps the modes with `|m| ≤ n` (closed ball,
/// mode-index units) and zeroes the rest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffOperator {
    radius: f64,
}

impl CutoffOperator {
    pub fn new(radius: f64) -> Result<Self, SpectralError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(SpectralError::InvalidCutoff(radius));
        }
        Ok(CutoffOperator { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Whether the mode at flat spectral index `idx` lies in the ball.
    #[inline]
    pub fn contains(&self, grid: &Grid, idx: usize) -> bool {
        let (i, j) = grid.split(idx);
        let m1 = grid.mode_index(i) as f64;
        let m2 = grid.mode_index(j) as f64;
        m1 * m1 + m2 * m2 <= self.radius * self.radius
    }

    /// Zeroes the coefficients outside the ball in place.
    pub fn project_spectrum(&self, grid: &Grid, spectrum: &mut [Complex64]) {
        for (idx, c) in spectrum.iter_mut().enumerate() {
            if !self.contains(grid, idx) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }
}

/// Applies `J_n` to a scalar or vector field.
pub fn apply_cutoff<F: SpectralField>(op: &CutoffOperator, f: &F) -> F {
    f.map_components(&|c| {
        let mut spec = c.spectrum().to_vec();
        op.project_spectrum(c.grid(), &mut spec);
        ScalarField::from_spectrum(c.grid(), spec)
    })
}

// ---------------------------------------------------------------------------
// Spectrum-level kernels shared with the dynamics and integrator.

pub(crate) fn deriv_spec(grid: &Grid, spec: &[Complex64], axis: usize) -> Vec<Complex64> {
    spec.iter()
        .enumerate()
        .map(|(idx, &c)| {
            let (i, j) = grid.split(idx);
            let k = if axis == 0 { grid.deriv_wavenumber(i) } else { grid.deriv_wavenumber(j) };
            I * k * c
        })
        .collect()
}

/// `kd₁² + kd₂²` with the Nyquist-zeroed derivative wavenumbers.
#[inline]
pub(crate) fn deriv_k_sq(grid: &Grid, idx: usize) -> f64 {
    let (i, j) = grid.split(idx);
    let a = grid.deriv_wavenumber(i);
    let b = grid.deriv_wavenumber(j);
    a * a + b * b
}

pub(crate) fn grad(f: &ScalarField) -> VectorField3 {
    let g = f.grid();
    let s = f.spectrum();
    VectorField3::from_components([
        ScalarField::from_spectrum(g, deriv_spec(g, s, 0)),
        ScalarField::from_spectrum(g, deriv_spec(g, s, 1)),
        ScalarField::zeros(g),
    ])
}

pub(crate) fn div(v: &VectorField3) -> ScalarField {
    let g = v.grid();
    let a = deriv_spec(g, v.component(0).spectrum(), 0);
    let b = deriv_spec(g, v.component(1).spectrum(), 1);
    ScalarField::from_spectrum(g, a.iter().zip(&b).map(|(x, y)| x + y).collect())
}

pub(crate) fn curl(v: &VectorField3) -> VectorField3 {
    let g = v.grid();
    let d1v2 = deriv_spec(g, v.component(1).spectrum(), 0);
    let d2v1 = deriv_spec(g, v.component(0).spectrum(), 1);
    let d1v3 = deriv_spec(g, v.component(2).spectrum(), 0);
    let d2v3 = deriv_spec(g, v.component(2).spectrum(), 1);
    VectorField3::from_components([
        ScalarField::from_spectrum(g, d2v3),
        ScalarField::from_spectrum(g, d1v3.iter().map(|c| -c).collect()),
        ScalarField::from_spectrum(g, d1v2.iter().zip(&d2v1).map(|(a, b)| a - b).collect()),
    ])
}

pub(crate) fn lap(f: &ScalarField) -> ScalarField {
    let g = f.grid().clone();
    f.multiply(|idx| Complex64::new(-deriv_k_sq(&g, idx), 0.0))
}

/// `Σ_m w(m) |c_m|²` scaled by `L²`.
pub(crate) fn weighted_energy(grid: &Grid, spec: &[Complex64], w: impl Fn(usize) -> f64) -> f64 {
    let area = grid.length() * grid.length();
    area * sum_by(spec.len(), |idx| w(idx) * spec[idx].norm_sqr())
}

/// Spectral `‖f‖²_{L²}` (Parseval).
pub(crate) fn l2_sq(f: &ScalarField) -> f64 {
    weighted_energy(f.grid(), f.spectrum(), |_| 1.0)
}

/// `‖∇f‖²_{L²}` with derivative wavenumbers.
pub(crate) fn grad_l2_sq(f: &ScalarField) -> f64 {
    let g = f.grid();
    weighted_energy(g, f.spectrum(), |idx| deriv_k_sq(g, idx))
}

/// `‖∇²f‖²_{L²} = Σ_{i,a} ‖∂_i∂_a f‖²`, which equals `‖Δf‖²` spectrally.
pub(crate) fn hess_l2_sq(f: &ScalarField) -> f64 {
    let g = f.grid();
    weighted_energy(g, f.spectrum(), |idx| deriv_k_sq(g, idx).powi(2))
}

// ---------------------------------------------------------------------------
// Public operators.

/// `(∂₁f, ∂₂f, 0)`.
pub fn gradient3(f: &ScalarField) -> Result<VectorField3, SpectralError> {
    f.ensure_finite()?;
    Ok(grad(f))
}

/// `∂₁v₁ + ∂₂v₂`; the third component is ignored.
pub fn divergence2(v: &VectorField3) -> Result<ScalarField, SpectralError> {
    v.ensure_finite()?;
    Ok(div(v))
}

/// `(∂₂v₃, −∂₁v₃, ∂₁v₂ − ∂₂v₁)`.
pub fn curl3(v: &VectorField3) -> Result<VectorField3, SpectralError> {
    v.ensure_finite()?;
    Ok(curl(v))
}

pub fn laplacian(f: &ScalarField) -> Result<ScalarField, SpectralError> {
    f.ensure_finite()?;
    Ok(lap(f))
}

/// Sobolev norm of order `s`, normalized so that `s = 0` gives the
/// physical L² norm. The inhomogeneous weight is `(1+|k|²)^s`, the
/// homogeneous one `|k|^{2s}`. Vector norms are root-sum-of-squares of the
/// component norms.
pub fn sobolev_norm<F: SpectralField>(f: &F, s: f64, homogeneous: bool) -> Result<f64, SpectralError> {
    if !(s >= -2.0) {
        return Err(SpectralError::OrderOutOfRange(s));
    }
    let grid = f.grid().clone();
    let mut total = 0.0;
    for c in f.scalar_components() {
        c.ensure_finite()?;
        let spec = c.spectrum();
        if homogeneous && s < 0.0 {
            let mean = spec[0].re;
            let rms = (l2_sq(c) / (grid.length() * grid.length())).sqrt();
            if mean.abs() > 1e-12 * rms.max(f64::MIN_POSITIVE) {
                return Err(SpectralError::HomogeneousNegativeOrder { order: s, mean });
            }
        }
        total += weighted_energy(&grid, spec, |idx| {
            let k2 = grid.wavenumber_norm(idx).powi(2);
            if homogeneous {
                if idx == 0 {
                    if s == 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    k2.powf(s)
                }
            } else {
                (1.0 + k2).powf(s)
            }
        });
    }
    Ok(total.sqrt())
}

/// Grid-quadrature Lebesgue norm; `p = ∞` is the largest absolute sample.
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64, SpectralError> {
    let p = Lebesgue::try_from(p)?;
    f.ensure_finite()?;
    Ok(lp_norm_of(f.values(), f.grid().cell_area(), p))
}

/// As [`lp_norm`], but evaluated on the ×2 zero-padded grid to control the
/// aliasing error of the quartic integrand.
pub fn lp_norm_oversampled(f: &ScalarField, p: f64) -> Result<f64, SpectralError> {
    let p = Lebesgue::try_from(p)?;
    f.ensure_finite()?;
    let fine = refine(f);
    Ok(lp_norm_of(fine.values(), fine.grid().cell_area(), p))
}

/// Band-limited interpolation of `f` onto the ×2 grid.
pub fn refine(f: &ScalarField) -> ScalarField {
    let g = f.grid();
    ScalarField::from_spectrum(g.refined(), g.pad_to_refined(f.spectrum()))
}

pub(crate) fn lp_norm_of(values: &[f64], cell: f64, p: Lebesgue) -> f64 {
    match p {
        Lebesgue::Two => {
            let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
            (pairwise_sum(&sq) * cell).sqrt()
        }
        Lebesgue::Four => {
            let q: Vec<f64> = values.iter().map(|v| (v * v) * (v * v)).collect();
            (pairwise_sum(&q) * cell).powf(0.25)
        }
        Lebesgue::Infinity => values.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
    }
}

/// Curl-free solution `E = ∇(Δ⁻¹ρ)` of `div E = ρ`, embedded as `(E₁, E₂, 0)`.
pub fn solve_gauss_electric(rho: &ScalarField) -> Result<VectorField3, SpectralError> {
    rho.ensure_finite()?;
    let g = rho.grid();
    let spec = rho.spectrum();
    let mean = spec[0].re;
    let rms = (l2_sq(rho) / (g.length() * g.length())).sqrt();
    if mean.abs() > 1e-12 * rms.max(f64::MIN_POSITIVE) {
        return Err(SpectralError::NonzeroMean { mean });
    }
    let mut e1 = vec![Complex64::new(0.0, 0.0); spec.len()];
    let mut e2 = e1.clone();
    for (idx, &c) in spec.iter().enumerate() {
        let k2 = deriv_k_sq(g, idx);
        if k2 == 0.0 {
            continue;
        }
        let (i, j) = g.split(idx);
        let phi = -c / k2;
        e1[idx] = I * g.deriv_wavenumber(i) * phi;
        e2[idx] = I * g.deriv_wavenumber(j) * phi;
    }
    Ok(VectorField3::from_components([
        ScalarField::from_spectrum(g, e1),
        ScalarField::from_spectrum(g, e2),
        ScalarField::zeros(g),
    ]))
}
