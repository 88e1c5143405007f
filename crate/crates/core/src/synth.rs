//! Deterministic synthetic fields used by presets, corpora and tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;

use crate::field::{ScalarField, VectorField3};
use crate::grid::Grid;
use crate::ops;

/// Zero-mean real field with independent Gaussian coefficients on the modes
/// `0 < |m| ≤ max_index`, weighted by `(1 + |m|)^(-slope)`. The Nyquist
/// lines are always left empty.
pub fn random_band_limited(grid: &Grid, seed: u64, max_index: usize, slope: f64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limit = (max_index as f64).min(grid.n() as f64 / 2.0 - 1.0);
    let spec: Vec<Complex64> = (0..grid.len())
        .map(|idx| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            let m = grid.mode_norm(idx);
            if idx == 0 || m > limit || grid.is_nyquist(idx) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(re, im) * (1.0 + m).powf(-slope)
            }
        })
        .collect();
    ScalarField::from_spectrum(grid, spec)
}

/// Rescales `f` so that its largest absolute sample equals `amplitude`.
pub fn normalize_peak(f: &ScalarField, amplitude: f64) -> ScalarField {
    let peak = f.max_abs();
    if peak == 0.0 {
        f.clone()
    } else {
        f.scale(amplitude / peak)
    }
}

/// Signed minimum-image offset on a periodic axis of length `l`.
pub fn periodic_offset(x: f64, c: f64, l: f64) -> f64 {
    let d = (x - c).rem_euclid(l);
    if d > l / 2.0 {
        d - l
    } else {
        d
    }
}

/// `exp(−|x − c|² / (2σ²))` with periodic minimum-image distance.
pub fn gaussian_bump(grid: &Grid, center: (f64, f64), sigma: f64) -> ScalarField {
    let l = grid.length();
    ScalarField::from_fn(grid, |x, y| {
        let dx = periodic_offset(x, center.0, l);
        let dy = periodic_offset(y, center.1, l);
        (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
    })
}

/// Removes the zero mode.
pub fn remove_mean(f: &ScalarField) -> ScalarField {
    let mut spec = f.spectrum().to_vec();
    spec[0] = Complex64::new(0.0, 0.0);
    ScalarField::from_spectrum(f.grid(), spec)
}

/// Removes every mode on a Nyquist line.
pub fn strip_nyquist(f: &ScalarField) -> ScalarField {
    let g = f.grid();
    let spec = f
        .spectrum()
        .iter()
        .enumerate()
        .map(|(idx, &c)| if g.is_nyquist(idx) { Complex64::new(0.0, 0.0) } else { c })
        .collect();
    ScalarField::from_spectrum(g, spec)
}

/// Divergence-free field `curl(A)` of a random band-limited potential with
/// peak magnitude `amplitude`.
pub fn random_solenoidal(grid: &Grid, seed: u64, max_index: usize, amplitude: f64) -> VectorField3 {
    let pot = VectorField3::from_components([
        random_band_limited(grid, seed.wrapping_mul(3).wrapping_add(101), max_index, 1.5),
        random_band_limited(grid, seed.wrapping_mul(3).wrapping_add(102), max_index, 1.5),
        random_band_limited(grid, seed.wrapping_mul(3).wrapping_add(103), max_index, 1.5),
    ]);
    let b = ops::curl(&pot);
    let peak = b.max_norm();
    if peak == 0.0 {
        b
    } else {
        b.scale(amplitude / peak)
    }
}
