//! Real scalar and ℝ³-valued fields over a [`Grid`].

use std::sync::OnceLock;

use rustfft::num_complex::Complex64;

use crate::error::SpectralError;
use crate::grid::{pairwise_sum, Grid};

/// Real samples on a grid, with a lazily cached spectrum.
#[derive(Clone)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self::from_values_unchecked(grid, vec![0.0; grid.len()])
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self::from_values_unchecked(grid, vec![c; grid.len()])
    }

    /// Wraps samples after checking the length and that every value is finite.
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self, SpectralError> {
        if values.len() != grid.len() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite { what: "field" });
        }
        Ok(Self::from_values_unchecked(grid, values))
    }

    pub(crate) fn from_values_unchecked(grid: &Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField {
            grid: grid.clone(),
            values,
            spectrum: OnceLock::new(),
        }
    }

    /// Samples `f(x₁, x₂)` at every grid point.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let values = (0..grid.len())
            .map(|idx| f(grid.coordinate(idx % n), grid.coordinate(idx / n)))
            .collect();
        Self::from_values_unchecked(grid, values)
    }

    /// Synthesizes a real field from Fourier-series coefficients (the real
    /// part is kept, which projects onto Hermitian-symmetric spectra).
    pub fn from_spectrum(grid: &Grid, spectrum: Vec<Complex64>) -> Self {
        let values = grid.inverse(&spectrum);
        Self::from_values_unchecked(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Fourier-series coefficients, computed once per field.
    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| self.grid.forward(&self.values))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn ensure_finite(&self) -> Result<(), SpectralError> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(SpectralError::NonFinite { what: "field" })
        }
    }

    /// Spatial average over the torus.
    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.values) / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Grid quadrature `∫ f dx`.
    pub fn integral(&self) -> f64 {
        pairwise_sum(&self.values) * self.grid.cell_area()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_values_unchecked(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(self.grid == other.grid, "fields live on different grids");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_values_unchecked(&self.grid, values)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    /// Pointwise product on the physical grid.
    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|v| alpha * v)
    }

    /// Applies a per-mode multiplier `m(idx)` in spectral space.
    pub(crate) fn multiply(&self, m: impl Fn(usize) -> Complex64) -> Self {
        let spec: Vec<Complex64> = self
            .spectrum()
            .iter()
            .enumerate()
            .map(|(idx, &c)| c * m(idx))
            .collect();
        Self::from_spectrum(&self.grid, spec)
    }
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("grid", &self.grid)
            .field("max_abs", &self.max_abs())
            .finish()
    }
}

/// ℝ³-valued field over the 2D grid; the third direction carries no
/// derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField3 {
    components: [ScalarField; 3],
}

impl VectorField3 {
    pub fn new(c1: ScalarField, c2: ScalarField, c3: ScalarField) -> Result<Self, SpectralError> {
        if c1.grid() != c2.grid() || c1.grid() != c3.grid() {
            return Err(SpectralError::GridMismatch);
        }
        Ok(VectorField3 {
            components: [c1, c2, c3],
        })
    }

    pub(crate) fn from_components(components: [ScalarField; 3]) -> Self {
        VectorField3 { components }
    }

    pub fn zeros(grid: &Grid) -> Self {
        let z = ScalarField::zeros(grid);
        VectorField3 {
            components: [z.clone(), z.clone(), z],
        }
    }

    pub fn grid(&self) -> &Grid {
        self.components[0].grid()
    }

    pub fn components(&self) -> &[ScalarField; 3] {
        &self.components
    }

    pub fn component(&self, a: usize) -> &ScalarField {
        &self.components[a]
    }

    pub fn into_components(self) -> [ScalarField; 3] {
        self.components
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(ScalarField::is_finite)
    }

    pub(crate) fn ensure_finite(&self) -> Result<(), SpectralError> {
        self.components.iter().try_for_each(ScalarField::ensure_finite)
    }

    pub fn map(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        let [a, b, c] = &self.components;
        VectorField3 {
            components: [f(a), f(b), f(c)],
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, ScalarField::add)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, ScalarField::sub)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|c| c.scale(alpha))
    }

    /// Pointwise product with a scalar field.
    pub fn mul_scalar(&self, s: &ScalarField) -> Self {
        self.map(|c| c.mul(s))
    }

    /// Pointwise dot product.
    pub fn dot(&self, other: &Self) -> ScalarField {
        let [a1, a2, a3] = &self.components;
        let [b1, b2, b3] = &other.components;
        a1.mul(b1).add(&a2.mul(b2)).add(&a3.mul(b3))
    }

    /// Pointwise squared Euclidean norm.
    pub fn norm_sq(&self) -> ScalarField {
        self.dot(self)
    }

    /// Largest pointwise Euclidean norm.
    pub fn max_norm(&self) -> f64 {
        self.norm_sq().max_abs().sqrt()
    }

    fn zip(&self, other: &Self, f: impl Fn(&ScalarField, &ScalarField) -> ScalarField) -> Self {
        VectorField3 {
            components: [
                f(&self.components[0], &other.components[0]),
                f(&self.components[1], &other.components[1]),
                f(&self.components[2], &other.components[2]),
            ],
        }
    }
}

/// Common view over scalar and vector fields for norms and Fourier
/// multipliers.
pub trait SpectralField: Clone {
    fn grid(&self) -> &Grid;
    fn scalar_components(&self) -> Vec<&ScalarField>;
    fn map_components(&self, f: &dyn Fn(&ScalarField) -> ScalarField) -> Self;
}

impl SpectralField for ScalarField {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn scalar_components(&self) -> Vec<&ScalarField> {
        vec![self]
    }
    fn map_components(&self, f: &dyn Fn(&ScalarField) -> ScalarField) -> Self {
        f(self)
    }
}

impl SpectralField for VectorField3 {
    fn grid(&self) -> &Grid {
        VectorField3::grid(self)
    }
    fn scalar_components(&self) -> Vec<&ScalarField> {
        self.components.iter().collect()
    }
    fn map_components(&self, f: &dyn Fn(&ScalarField) -> ScalarField) -> Self {
        self.map(f)
    }
}
