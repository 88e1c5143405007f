//! Dyadic (Littlewood–Paley) frequency decomposition and the logarithmic
//! `L∞` interpolation bound built on it.
//!
//! Filters act on the physical wavenumber `ξ = 2π m / L`. The low-pass
//! profile `χ` is radial, equal to 1 on `|ξ| ≤ 1/2` and 0 on `|ξ| ≥ 1`; the
//! ring profile is `φ(ξ) = χ(ξ/2) − χ(ξ)`, supported in `1/2 ≤ |ξ| ≤ 2`.
//! Then `Δ_q u = F⁻¹(φ(2^{−q}ξ) û)` and `S_q u = F⁻¹(χ(2^{−q}ξ) û)`, and
//! `χ(ξ) + Σ_{q=0}^{Q} φ(2^{−q}ξ) = χ(2^{−(Q+1)}ξ)` telescopes exactly.

use rustfft::num_complex::Complex64;

use crate::error::VerificationError;
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::integrator::TrajectoryRecord;
use crate::ops;

/// Transition polynomial of the radial cutoff. The variants are versioned
/// by name so stored constants stay reproducible.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ChiProfile {
    /// `3t² − 2t³`, C¹.
    SmoothstepC1,
    /// `6t⁵ − 15t⁴ + 10t³`, C².
    #[default]
    SmoothstepC2,
}

impl ChiProfile {
    fn step(self, t: f64) -> f64 {
        match self {
            ChiProfile::SmoothstepC1 => t * t * (3.0 - 2.0 * t),
            ChiProfile::SmoothstepC2 => t * t * t * (t * (6.0 * t - 15.0) + 10.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct DyadicFilterBank {
    profile: ChiProfile,
}

/// Builds the radial filter pair `(χ, φ)` for the given transition profile.
pub fn build_filter_bank(profile: ChiProfile) -> DyadicFilterBank {
    DyadicFilterBank { profile }
}

impl DyadicFilterBank {
    pub fn profile(&self) -> ChiProfile {
        self.profile
    }

    /// `χ(r)` for `r = |ξ|`.
    pub fn chi(&self, r: f64) -> f64 {
        if r <= 0.5 {
            1.0
        } else if r >= 1.0 {
            0.0
        } else {
            1.0 - self.profile.step(2.0 * r - 1.0)
        }
    }

    /// `φ(r) = χ(r/2) − χ(r)`.
    pub fn phi(&self, r: f64) -> f64 {
        self.chi(0.5 * r) - self.chi(r)
    }

    /// `χ(2^{−q} r)`.
    pub fn chi_scaled(&self, q: i32, r: f64) -> f64 {
        self.chi(r * 2f64.powi(-q))
    }

    /// `φ(2^{−q} r)`.
    pub fn phi_scaled(&self, q: i32, r: f64) -> f64 {
        self.phi(r * 2f64.powi(-q))
    }

    /// Largest block index `Q` needed on `grid`: the smallest `Q ≥ 0` with
    /// `2^Q ≥ max |ξ|`, so that `S₁ + Σ_{q=1}^{Q} Δ_q` is the identity.
    pub fn q_max(&self, grid: &Grid) -> i32 {
        let kmax = grid.max_wavenumber();
        if kmax <= 1.0 {
            0
        } else {
            kmax.log2().ceil() as i32
        }
    }

    fn filter(&self, u: &ScalarField, weight: impl Fn(f64) -> f64) -> ScalarField {
        let g = u.grid();
        let spec: Vec<Complex64> = u
            .spectrum()
            .iter()
            .enumerate()
            .map(|(idx, &c)| c * weight(g.wavenumber_norm(idx)))
            .collect();
        ScalarField::from_spectrum(g, spec)
    }
}

/// `Δ_q u`. A ring that misses every grid wavenumber yields the zero field.
pub fn block(u: &ScalarField, q: i32, bank: &DyadicFilterBank) -> ScalarField {
    bank.filter(u, |r| bank.phi_scaled(q, r))
}

/// `S_q u`.
pub fn low_pass(u: &ScalarField, q: i32, bank: &DyadicFilterBank) -> ScalarField {
    bank.filter(u, |r| bank.chi_scaled(q, r))
}

/// `u = S₁u + Σ_{q=1}^{Q} Δ_q u`.
#[derive(Clone, Debug)]
pub struct DyadicDecomposition {
    pub low: ScalarField,
    /// `blocks[q - 1] = Δ_q u` for `q = 1..=q_max`.
    pub blocks: Vec<ScalarField>,
    pub q_max: i32,
}

pub fn decompose(u: &ScalarField, bank: &DyadicFilterBank) -> DyadicDecomposition {
    let q_max = bank.q_max(u.grid());
    DyadicDecomposition {
        low: low_pass(u, 1, bank),
        blocks: (1..=q_max).map(|q| block(u, q, bank)).collect(),
        q_max,
    }
}

pub fn reconstruct(d: &DyadicDecomposition) -> ScalarField {
    d.blocks.iter().fold(d.low.clone(), |acc, b| acc.add(b))
}

/// Left side and right-side terms of
/// `‖u‖_{L∞} ≤ C (‖u‖_{L²} + N‖∇u‖_{L²} + 2^{−N}‖∇²u‖_{L²})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterpolationBound {
    pub lhs: f64,
    pub l2: f64,
    pub grad_term: f64,
    pub hess_term: f64,
}

impl InterpolationBound {
    pub fn terms_sum(&self) -> f64 {
        self.l2 + self.grad_term + self.hess_term
    }

    /// `lhs / Σ terms`, i.e. the smallest admissible constant; 0 for `u = 0`.
    pub fn ratio(&self) -> f64 {
        let s = self.terms_sum();
        if s == 0.0 {
            0.0
        } else {
            self.lhs / s
        }
    }
}

/// Evaluates both sides of the interpolation chain from the four norms.
pub fn interpolation_terms(linf: f64, l2: f64, grad_l2: f64, hess_l2: f64, trunc_n: u32) -> InterpolationBound {
    InterpolationBound {
        lhs: linf,
        l2,
        grad_term: trunc_n as f64 * grad_l2,
        hess_term: 2f64.powi(-(trunc_n as i32)) * hess_l2,
    }
}

pub fn linf_interpolation_bound(u: &ScalarField, trunc_n: u32, _bank: &DyadicFilterBank) -> InterpolationBound {
    interpolation_terms(
        u.max_abs(),
        ops::l2_sq(u).sqrt(),
        ops::grad_l2_sq(u).sqrt(),
        ops::hess_l2_sq(u).sqrt(),
        trunc_n,
    )
}

/// `round(log(e + ratio) / log 2)` clamped to `[1, q_max]`, where
/// `ratio = ‖∇²u‖/‖∇u‖`; a vanishing gradient gives 1.
pub fn truncation_for_ratio(grad_l2: f64, hess_l2: f64, q_max: i32) -> u32 {
    if !(grad_l2 > 0.0) {
        return 1;
    }
    let n = ((std::f64::consts::E + hess_l2 / grad_l2).ln() / std::f64::consts::LN_2).round();
    n.clamp(1.0, q_max.max(1) as f64) as u32
}

pub fn optimal_truncation(u: &ScalarField, bank: &DyadicFilterBank) -> u32 {
    truncation_for_ratio(
        ops::grad_l2_sq(u).sqrt(),
        ops::hess_l2_sq(u).sqrt(),
        bank.q_max(u.grid()),
    )
}

/// Both sides of the time-integrated bound
/// `‖ρ‖_{L¹_t L∞_x} ≤ C₀^{1/2}T^{1/2} + C T^{1/2} G log(e + H/G)`, with
/// `G = ‖∇ρ‖_{L²_{t,x}}` and `H = ‖∇²ρ‖_{L²_{t,x}}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogBound {
    pub lhs: f64,
    pub rhs: f64,
}

pub fn log_bound_from_series(
    times: &[f64],
    linf: &[f64],
    grad_l2: &[f64],
    hess_l2: &[f64],
    c0: f64,
    c: f64,
) -> LogBound {
    let t_span = times.last().copied().unwrap_or(0.0) - times.first().copied().unwrap_or(0.0);
    let lhs = trapezoid(times, linf);
    let g = trapezoid(times, &grad_l2.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
    let h = trapezoid(times, &hess_l2.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
    let log_term = if g > 0.0 { g * (std::f64::consts::E + h / g).ln() } else { 0.0 };
    LogBound {
        lhs,
        rhs: (c0 * t_span).sqrt() + c * t_span.sqrt() * log_term,
    }
}

/// Evaluates the bound over the records with `t ≤ horizon`.
pub fn trajectory_log_bound(
    traj: &TrajectoryRecord,
    c0: f64,
    horizon: f64,
    c: f64,
) -> Result<LogBound, VerificationError> {
    let rows: Vec<_> = traj.rows().iter().filter(|r| r.t <= horizon).collect();
    if rows.is_empty() {
        return Err(VerificationError::TrajectoryTooShort { got: 0, needed: 1 });
    }
    let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let linf: Vec<f64> = rows.iter().map(|r| r.linf_rho).collect();
    let grad: Vec<f64> = rows.iter().map(|r| r.grad_rho_l2).collect();
    let hess: Vec<f64> = rows.iter().map(|r| r.hess_rho_l2).collect();
    Ok(log_bound_from_series(&times, &linf, &grad, &hess, c0, c))
}

/// Composite trapezoidal rule on possibly nonuniform nodes.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}
