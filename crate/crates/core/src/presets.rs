//! Initial states. Every preset has zero-mean charge, `E₀` from the Gauss
//! solve plus a small solenoidal part, and `B₀ = curl A` for a random
//! potential `A`, so both constraints hold to roundoff. Nyquist modes are
//! removed and `J_n` is applied when a cutoff is configured.

use crate::config::{Preset, RunConfig};
use crate::dynamics::State;
use crate::error::SpectralError;
use crate::field::{ScalarField, VectorField3};
use crate::grid::Grid;
use crate::ops::{solve_gauss_electric, CutoffOperator};
use crate::synth::{gaussian_bump, normalize_peak, random_band_limited, random_solenoidal, remove_mean, strip_nyquist};

/// Relative size of the divergence-free parts of `E₀` and of `B₀`.
const FIELD_FRACTION: f64 = 0.1;

fn potential_band(grid: &Grid) -> usize {
    (grid.n() / 8).max(2)
}

/// Zero-mean, Nyquist-free charge of peak `amplitude`.
pub fn initial_charge(grid: &Grid, preset: Preset, seed: u64, amplitude: f64) -> ScalarField {
    let l = grid.length();
    let raw = match preset {
        Preset::Dipole => {
            let envelope = gaussian_bump(grid, (0.5 * l, 0.5 * l), l / 8.0);
            let wave = ScalarField::from_fn(grid, |x, _| (2.0 * std::f64::consts::PI * x / l).sin());
            wave.mul(&envelope)
        }
        Preset::GaussianPair => {
            let sigma = l / 48.0;
            gaussian_bump(grid, (0.375 * l, 0.5 * l), sigma).sub(&gaussian_bump(grid, (0.625 * l, 0.5 * l), sigma))
        }
        Preset::BandLimitedRandom(_) | Preset::HeatOnly => random_band_limited(grid, seed, grid.n() / 6, 1.5),
        Preset::MaxwellOnly => return ScalarField::zeros(grid),
    };
    normalize_peak(&remove_mean(&strip_nyquist(&raw)), amplitude)
}

/// `(E₁, E₂, E₃)` with zero divergence and peak `amplitude`.
fn solenoidal_with_axial(grid: &Grid, seed: u64, amplitude: f64) -> VectorField3 {
    let band = potential_band(grid);
    let planar = random_solenoidal(grid, seed, band, amplitude);
    let axial = normalize_peak(&random_band_limited(grid, seed.wrapping_add(7), band, 1.5), amplitude);
    let [e1, e2, _] = planar.into_components();
    VectorField3::new(e1, e2, axial).expect("one grid")
}

pub fn build_initial_state(cfg: &RunConfig) -> Result<State, SpectralError> {
    let grid = Grid::new(cfg.grid_n, cfg.domain_length)?;
    let amp = cfg.amplitude;
    let seed = cfg.seed;
    let rho = initial_charge(&grid, cfg.preset, cfg.charge_seed(), amp);
    let (e, b) = match cfg.preset {
        Preset::MaxwellOnly => (
            solenoidal_with_axial(&grid, seed, amp),
            solenoidal_with_axial(&grid, seed.wrapping_add(1000), amp),
        ),
        Preset::HeatOnly => (VectorField3::zeros(&grid), VectorField3::zeros(&grid)),
        _ => (
            solve_gauss_electric(&rho)?.add(&solenoidal_with_axial(&grid, seed, FIELD_FRACTION * amp)),
            random_solenoidal(&grid, seed.wrapping_add(1000), potential_band(&grid), FIELD_FRACTION * amp),
        ),
    };
    let state = State::new(rho, e, b, 0.0)?;
    Ok(match cfg.cutoff_n {
        Some(n) => state.project(&CutoffOperator::new(n)?),
        None => state,
    })
}
