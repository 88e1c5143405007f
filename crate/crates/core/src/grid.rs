//! Periodic square lattice on the torus `[0, L)²` and its discrete Fourier
//! transform.
//!
//! Physical samples are stored row-major: `values[j * n + i]` is the sample at
//! `(x₁, x₂) = (i·Δx, j·Δx)`. Spectral arrays use the same layout, with the
//! signed mode index `m = (m₁, m₂)` given by [`Grid::mode_index`] and the
//! physical wavenumber `k = 2π m / L`.
//!
//! Spectral coefficients are Fourier-series coefficients: the forward
//! transform divides by `n²`, so `u(x) = Σ_m c_m e^{i k·x}` and
//! `‖u‖²_{L²} = L² Σ_m |c_m|²`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::SpectralError;

/// Smallest supported number of points per axis.
pub const MIN_POINTS: usize = 8;

struct GridInner {
    n: usize,
    length: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    index: Vec<i64>,
    wavenumber: Vec<f64>,
    deriv_wavenumber: Vec<f64>,
    refined: OnceLock<Grid>,
}

/// Uniform periodic grid with cached FFT plans. Cloning is cheap.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl Grid {
    /// Builds an `n × n` grid on `[0, length)²`. `n` must be even and at
    /// least [`MIN_POINTS`].
    pub fn new(n: usize, length: f64) -> Result<Self, SpectralError> {
        if n < MIN_POINTS || n % 2 != 0 {
            return Err(SpectralError::InvalidGrid(format!(
                "points per axis must be even and >= {MIN_POINTS}, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(SpectralError::InvalidGrid(format!(
                "domain length must be positive and finite, got {length}"
            )));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let unit = 2.0 * std::f64::consts::PI / length;
        let half = (n / 2) as i64;
        let index: Vec<i64> = (0..n as i64)
            .map(|i| if i >= half { i - n as i64 } else { i })
            .collect();
        let wavenumber = index.iter().map(|&m| m as f64 * unit).collect();
        let deriv_wavenumber = index
            .iter()
            .map(|&m| if m == -half { 0.0 } else { m as f64 * unit })
            .collect();
        Ok(Grid {
            inner: Arc::new(GridInner {
                n,
                length,
                forward,
                inverse,
                index,
                wavenumber,
                deriv_wavenumber,
                refined: OnceLock::new(),
            }),
        })
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn length(&self) -> f64 {
        self.inner.length
    }

    pub fn len(&self) -> usize {
        self.inner.n * self.inner.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.inner.length / self.inner.n as f64
    }

    /// Quadrature weight of one cell, `(L/n)²`.
    pub fn cell_area(&self) -> f64 {
        let dx = self.dx();
        dx * dx
    }

    /// Coordinate of the `i`-th grid line along either axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    /// Signed mode index of the `i`-th spectral position along an axis.
    /// The Nyquist position carries index `-n/2`.
    pub fn mode_index(&self, i: usize) -> i64 {
        self.inner.index[i]
    }

    /// Physical wavenumber `2π m / L` along an axis.
    pub fn wavenumber(&self, i: usize) -> f64 {
        self.inner.wavenumber[i]
    }

    /// Wavenumber used by derivative multipliers: identical to
    /// [`Grid::wavenumber`] except that it vanishes at the Nyquist index.
    pub fn deriv_wavenumber(&self, i: usize) -> f64 {
        self.inner.deriv_wavenumber[i]
    }

    /// `|k|` of the mode stored at flat spectral index `idx`.
    pub fn wavenumber_norm(&self, idx: usize) -> f64 {
        let (i, j) = self.split(idx);
        self.inner.wavenumber[i].hypot(self.inner.wavenumber[j])
    }

    /// `|m|` (mode-index units) of the mode at flat spectral index `idx`.
    pub fn mode_norm(&self, idx: usize) -> f64 {
        let (i, j) = self.split(idx);
        (self.inner.index[i] as f64).hypot(self.inner.index[j] as f64)
    }

    /// Largest `|k|` represented on the grid (the Nyquist corner).
    pub fn max_wavenumber(&self) -> f64 {
        let k = self.inner.n as f64 / 2.0 * 2.0 * std::f64::consts::PI / self.inner.length;
        k * std::f64::consts::SQRT_2
    }

    /// Splits a flat index into `(i, j)` = (axis-1 position, axis-2 position).
    #[inline]
    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx % self.inner.n, idx / self.inner.n)
    }

    /// True if either axis index of the mode sits on the Nyquist line.
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let half = -((self.inner.n / 2) as i64);
        let (i, j) = self.split(idx);
        self.inner.index[i] == half || self.inner.index[j] == half
    }

    /// Forward transform of real samples to Fourier-series coefficients.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.len(), "sample count does not match grid");
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, &self.inner.forward);
        let scale = 1.0 / self.len() as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
        buf
    }

    /// Inverse transform; returns the real part of the synthesized samples.
    pub fn inverse(&self, spectrum: &[Complex64]) -> Vec<f64> {
        assert_eq!(spectrum.len(), self.len(), "coefficient count does not match grid");
        let mut buf = spectrum.to_vec();
        self.transform(&mut buf, &self.inner.inverse);
        buf.into_iter().map(|c| c.re).collect()
    }

    fn transform(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.inner.n;
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(buf, &mut scratch);
        transpose_square(buf, n);
        plan.process_with_scratch(buf, &mut scratch);
        transpose_square(buf, n);
    }

    /// The grid with twice the points per axis on the same domain, used for
    /// oversampled quadrature of nonlinear integrands.
    pub fn refined(&self) -> &Grid {
        self.inner
            .refined
            .get_or_init(|| Grid::new(2 * self.inner.n, self.inner.length).expect("refined grid"))
    }

    /// Zero-pads a spectrum of this grid onto [`Grid::refined`]. The Nyquist
    /// line is split symmetrically so that real fields stay real.
    pub fn pad_to_refined(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        let fine = self.refined();
        let n = self.inner.n;
        let nf = fine.n();
        let mut out = vec![Complex64::new(0.0, 0.0); nf * nf];
        let place = |m: i64| -> usize {
            if m < 0 {
                (m + nf as i64) as usize
            } else {
                m as usize
            }
        };
        let half = (n / 2) as i64;
        for j in 0..n {
            for i in 0..n {
                let c = spectrum[j * n + i];
                let m1 = self.inner.index[i];
                let m2 = self.inner.index[j];
                let targets1: &[i64] = if m1 == -half { &[-half, half] } else { &[m1] };
                let targets2: &[i64] = if m2 == -half { &[-half, half] } else { &[m2] };
                let w = 1.0 / (targets1.len() * targets2.len()) as f64;
                for &t2 in targets2 {
                    for &t1 in targets1 {
                        out[place(t2) * nf + place(t1)] += c * w;
                    }
                }
            }
        }
        out
    }
}

fn transpose_square(buf: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in (r + 1)..n {
            buf.swap(r * n + c, c * n + r);
        }
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n == other.inner.n
                && self.inner.length.to_bits() == other.inner.length.to_bits())
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.inner.n)
            .field("length", &self.inner.length)
            .finish()
    }
}

/// Deterministic pairwise summation; fixed order independent of threading.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

pub(crate) fn sum_by<F: Fn(usize) -> f64>(len: usize, f: F) -> f64 {
    let terms: Vec<f64> = (0..len).map(f).collect();
    pairwise_sum(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_odd_and_small_grids() {
        assert!(Grid::new(7, 1.0).is_err());
        assert!(Grid::new(6, 1.0).is_err());
        assert!(Grid::new(8, 0.0).is_err());
        assert!(Grid::new(8, f64::NAN).is_err());
        assert!(Grid::new(8, 1.0).is_ok());
    }

    #[test]
    fn wavenumbers_are_reproducible() {
        let a = Grid::new(16, 3.0).unwrap();
        let b = Grid::new(16, 3.0).unwrap();
        for i in 0..16 {
            assert_eq!(a.wavenumber(i).to_bits(), b.wavenumber(i).to_bits());
        }
        assert_eq!(a.mode_index(8), -8);
        assert_eq!(a.deriv_wavenumber(8), 0.0);
        assert_eq!(a.mode_index(15), -1);
    }

    #[test]
    fn single_mode_coefficients() {
        let g = Grid::new(16, 2.0 * PI).unwrap();
        let vals: Vec<f64> = (0..g.len())
            .map(|idx| {
                let (i, _) = g.split(idx);
                g.coordinate(i).sin()
            })
            .collect();
        let c = g.forward(&vals);
        // sin x = (e^{ix} - e^{-ix}) / 2i
        assert!((c[1] - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        assert!((c[15] - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        let back = g.inverse(&c);
        for (a, b) in back.iter().zip(&vals) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn padding_preserves_samples() {
        let g = Grid::new(8, 1.0).unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|k| ((k * 7919) % 13) as f64 - 6.0).collect();
        let fine = g.refined().inverse(&g.pad_to_refined(&g.forward(&vals)));
        let nf = g.refined().n();
        for j in 0..8 {
            for i in 0..8 {
                let a = vals[j * 8 + i];
                let b = fine[(2 * j) * nf + 2 * i];
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }
}
