//! Exponential time differencing (ETD-RK2, Cox–Matthews) in Fourier space.
//!
//! The linear operator `L` is treated exactly per mode. It contains the heat
//! term for `ρ`, the Maxwell rotation for `(E, B)` and the linear current
//! `+∇ρ` in the `E` equation. In the mode basis `u = k/|k|`,
//! `E∥ = u·E`, `E⊥ = −u₂E₁ + u₁E₂`, it splits into
//!
//! ```text
//! (ρ, E∥):  [[−κ², 0], [iκ, 0]]       (lower triangular)
//! (E⊥, B₃): −iκ σₓ,   (E₃, B⊥): +iκ σₓ,   B∥: 0
//! ```
//!
//! with `κ = |k|` (Nyquist-zeroed). The remaining quadratic term is
//! `N(u) = (−J_n div(ρE), −J_n(ρE), 0)`. Both parts annihilate
//! `div E − ρ` mode by mode, so the Gauss laws are transported to roundoff.
//!
//! A step of size `h` is
//!
//! ```text
//! a  = e^{hL}u + h φ₁(hL) N(u)
//! u⁺ = a + h φ₂(hL) (N(a) − N(u))
//! ```

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::dynamics::{energy_identity_terms, gauss_residuals, h1_balance_terms, State};
use crate::error::IntegratorError;
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::littlewood_paley::trapezoid;
use crate::ops::{self, CutoffOperator};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const MAX_HALVINGS: u32 = 20;

/// Whether the quadratic `ρE` terms are integrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Coupling {
    #[default]
    Full,
    /// Linear dynamics only: `ρ` follows the heat semigroup exactly.
    Decoupled,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Friedrichs cutoff radius in mode-index units.
    pub cutoff_radius: Option<f64>,
    pub cfl_safety: f64,
    pub record_every: usize,
    pub coupling: Coupling,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 2e-3,
            t_end: 1.0,
            cutoff_radius: None,
            cfl_safety: 0.5,
            record_every: 1,
            coupling: Coupling::Full,
        }
    }
}

impl IntegratorConfig {
    /// Checks the scalar parameters and the de-aliasing bound `n ≤ ⌊N/3⌋`.
    pub fn validate(&self, grid: &Grid) -> Result<Option<CutoffOperator>, IntegratorError> {
        let bad = |m: String| Err(IntegratorError::InvalidConfig(m));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        match self.cutoff_radius {
            None => Ok(None),
            Some(r) => {
                let limit = grid.n() / 3;
                if r > limit as f64 {
                    return Err(IntegratorError::DealiasingViolation { radius: r, limit });
                }
                CutoffOperator::new(r)
                    .map(Some)
                    .map_err(|e| IntegratorError::InvalidConfig(e.to_string()))
            }
        }
    }

    /// Number of macro steps; the last one is shortened to land on `t_end`.
    pub fn step_count(&self) -> usize {
        let n = (self.t_end / self.dt * (1.0 - 1e-12)).ceil();
        (n as usize).max(1)
    }

    /// Time at the end of macro step `k`.
    pub fn time_at(&self, k: usize) -> f64 {
        if k >= self.step_count() {
            self.t_end
        } else {
            k as f64 * self.dt
        }
    }

    /// Largest admissible step for the given sup norms.
    pub fn cfl_limit(&self, grid: &Grid, linf_rho: f64, linf_e: f64) -> f64 {
        self.cfl_safety * (grid.dx() / (linf_rho + linf_e).max(1.0)).min(1.0)
    }
}

// ---------------------------------------------------------------------------
// φ-functions and per-mode propagators.

/// `[φ₀, φ₁, φ₂, φ₃](z)` with `φ₀ = eᶻ`, `φ_{k+1}(z) = (φ_k(z) − 1/k!)/z`.
pub fn phi_functions(z: Complex64) -> [Complex64; 4] {
    if z.norm() < 1.0 {
        // Taylor: φ_k(z) = Σ_j z^j / (j+k)!
        let mut out = [ZERO; 4];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut term = Complex64::new(1.0 / factorial(k), 0.0);
            let mut sum = term;
            for j in 1..25 {
                term = term * z / (j + k) as f64;
                sum += term;
            }
            *slot = sum;
        }
        out
    } else {
        let p0 = z.exp();
        let p1 = (p0 - 1.0) / z;
        let p2 = (p1 - 1.0) / z;
        let p3 = (p2 - 0.5) / z;
        [p0, p1, p2, p3]
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Entries of `f(hL)` for one mode, `f ∈ {exp, φ₁, φ₂}`.
#[derive(Clone, Copy, Debug)]
struct ModeFn {
    /// `ρ → ρ`.
    rr: Complex64,
    /// `ρ → E∥`.
    re: Complex64,
    /// `f(0)`, acting on `E∥` and `B∥`.
    f0: f64,
    /// Diagonal and off-diagonal of the two Maxwell 2×2 blocks.
    d: Complex64,
    o: Complex64,
}

#[derive(Debug)]
struct Propagator {
    /// `(u₁, u₂, κ)` per mode.
    basis: Arc<Vec<(f64, f64, f64)>>,
    fns: [Vec<ModeFn>; 3],
}

fn mode_basis(grid: &Grid) -> Vec<(f64, f64, f64)> {
    (0..grid.len())
        .map(|idx| {
            let (i, j) = grid.split(idx);
            let k1 = grid.deriv_wavenumber(i);
            let k2 = grid.deriv_wavenumber(j);
            let kappa = k1.hypot(k2);
            if kappa == 0.0 {
                (0.0, 0.0, 0.0)
            } else {
                (k1 / kappa, k2 / kappa, kappa)
            }
        })
        .collect()
}

impl Propagator {
    fn new(basis: Arc<Vec<(f64, f64, f64)>>, h: f64) -> Self {
        let f0 = [1.0, 1.0, 0.5];
        let mut fns: [Vec<ModeFn>; 3] = Default::default();
        for &(_, _, kappa) in basis.iter() {
            let heat = phi_functions(Complex64::new(-kappa * kappa * h, 0.0));
            let wave_m = phi_functions(Complex64::new(0.0, -kappa * h));
            let wave_p = phi_functions(Complex64::new(0.0, kappa * h));
            for k in 0..3 {
                fns[k].push(ModeFn {
                    rr: heat[k],
                    re: I * kappa * h * heat[k + 1],
                    f0: f0[k],
                    d: 0.5 * (wave_m[k] + wave_p[k]),
                    o: 0.5 * (wave_m[k] - wave_p[k]),
                });
            }
        }
        Propagator { basis, fns }
    }

    /// `out[p] = f(hL) v[p]` for every mode, `which` selecting `exp, φ₁, φ₂`.
    fn apply(&self, which: usize, v: &Planes) -> Planes {
        let fns = &self.fns[which];
        let mut out = Planes::zeros(v.len());
        for idx in 0..v.len() {
            let m = fns[idx];
            let (u1, u2, kappa) = self.basis[idx];
            let [rho, e1, e2, e3, b1, b2, b3] = v.at(idx);
            let res = if kappa == 0.0 {
                let f = m.f0;
                [rho * f, e1 * f, e2 * f, e3 * f, b1 * f, b2 * f, b3 * f]
            } else {
                let e_par = e1 * u1 + e2 * u2;
                let e_perp = -e1 * u2 + e2 * u1;
                let b_par = b1 * u1 + b2 * u2;
                let b_perp = -b1 * u2 + b2 * u1;
                let rho_n = m.rr * rho;
                let e_par_n = m.re * rho + e_par * m.f0;
                let e_perp_n = m.d * e_perp + m.o * b3;
                let b3_n = m.o * e_perp + m.d * b3;
                let e3_n = m.d * e3 - m.o * b_perp;
                let b_perp_n = -m.o * e3 + m.d * b_perp;
                let b_par_n = b_par * m.f0;
                [
                    rho_n,
                    e_par_n * u1 - e_perp_n * u2,
                    e_par_n * u2 + e_perp_n * u1,
                    e3_n,
                    b_par_n * u1 - b_perp_n * u2,
                    b_par_n * u2 + b_perp_n * u1,
                    b3_n,
                ]
            };
            out.set(idx, res);
        }
        out
    }
}

/// Seven spectral planes `ρ̂, Ê₁, Ê₂, Ê₃, B̂₁, B̂₂, B̂₃`.
#[derive(Clone, Debug, PartialEq)]
struct Planes([Vec<Complex64>; 7]);

impl Planes {
    fn zeros(len: usize) -> Self {
        Planes(std::array::from_fn(|_| vec![ZERO; len]))
    }

    fn from_state(s: &State) -> Self {
        let p = s.planes();
        Planes(std::array::from_fn(|c| p[c].spectrum().to_vec()))
    }

    fn to_state(&self, grid: &Grid, time: f64) -> State {
        let fields: Vec<ScalarField> = self.0.par_iter().map(|s| ScalarField::from_spectrum(grid, s.clone())).collect();
        let planes: [ScalarField; 7] = fields.try_into().expect("seven planes");
        State::from_planes(planes, time).expect("planes share one grid")
    }

    fn len(&self) -> usize {
        self.0[0].len()
    }

    #[inline]
    fn at(&self, idx: usize) -> [Complex64; 7] {
        std::array::from_fn(|c| self.0[c][idx])
    }

    #[inline]
    fn set(&mut self, idx: usize, v: [Complex64; 7]) {
        for (c, x) in v.into_iter().enumerate() {
            self.0[c][idx] = x;
        }
    }

    /// `self + alpha * other`.
    fn axpy(&self, alpha: f64, other: &Planes) -> Planes {
        Planes(std::array::from_fn(|c| {
            self.0[c].iter().zip(&other.0[c]).map(|(a, b)| a + b * alpha).collect()
        }))
    }

    fn sub(&self, other: &Planes) -> Planes {
        self.axpy(-1.0, other)
    }

    fn is_finite(&self) -> bool {
        self.0.iter().all(|p| p.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
    }
}

/// Quadratic term together with the sup norms needed for the CFL check.
struct Nonlinear {
    planes: Planes,
    linf_rho: f64,
    linf_e: f64,
}

// ---------------------------------------------------------------------------
// Simulation.

/// A single evolving solution; advanced by [`Simulation::advance`].
#[derive(Debug)]
pub struct Simulation {
    grid: Grid,
    cfg: IntegratorConfig,
    cutoff: Option<CutoffOperator>,
    planes: Planes,
    time: f64,
    basis: Arc<Vec<(f64, f64, f64)>>,
    cache: HashMap<u64, Arc<Propagator>>,
    halvings: u32,
}

impl Simulation {
    /// Validates `cfg` and projects the initial data by `J_n` when a cutoff
    /// is configured.
    pub fn new(initial: &State, cfg: &IntegratorConfig) -> Result<Self, IntegratorError> {
        let grid = initial.grid().clone();
        let cutoff = cfg.validate(&grid)?;
        if !initial.is_finite() {
            return Err(IntegratorError::NonFiniteState { time: initial.time });
        }
        let start = match &cutoff {
            Some(op) => initial.project(op),
            None => initial.clone(),
        };
        Ok(Simulation {
            basis: Arc::new(mode_basis(&grid)),
            planes: Planes::from_state(&start),
            time: initial.time,
            grid,
            cfg: *cfg,
            cutoff,
            cache: HashMap::new(),
            halvings: 0,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Total number of step halvings forced by the CFL check so far.
    pub fn halvings(&self) -> u32 {
        self.halvings
    }

    pub fn state(&self) -> State {
        self.planes.to_state(&self.grid, self.time)
    }

    /// `L²` distance to another simulation on the same grid (Parseval).
    pub fn l2_distance(&self, other: &Simulation) -> f64 {
        let area = self.grid.length() * self.grid.length();
        let terms: Vec<f64> = (0..7)
            .map(|c| {
                let d: Vec<f64> = self.planes.0[c]
                    .iter()
                    .zip(&other.planes.0[c])
                    .map(|(a, b)| (a - b).norm_sqr())
                    .collect();
                crate::grid::pairwise_sum(&d)
            })
            .collect();
        (area * terms.iter().sum::<f64>()).sqrt()
    }

    pub(crate) fn linf_rho(&self) -> f64 {
        self.grid.inverse(&self.planes.0[0]).iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    fn propagator(&mut self, h: f64) -> Arc<Propagator> {
        let basis = &self.basis;
        self.cache
            .entry(h.to_bits())
            .or_insert_with(|| Arc::new(Propagator::new(basis.clone(), h)))
            .clone()
    }

    fn nonlinear(&self, v: &Planes) -> Nonlinear {
        let g = &self.grid;
        let phys: Vec<Vec<f64>> = v.0[..4].par_iter().map(|s| g.inverse(s)).collect();
        let linf_rho = phys[0].iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let linf_e = (0..g.len())
            .map(|p| (phys[1][p].powi(2) + phys[2][p].powi(2) + phys[3][p].powi(2)).sqrt())
            .fold(0.0_f64, f64::max);
        let mut planes = Planes::zeros(g.len());
        let active = self.cfg.coupling == Coupling::Full && v.0[0].iter().any(|c| *c != ZERO);
        if active {
            let mut flux: Vec<Vec<Complex64>> = (1..4)
                .into_par_iter()
                .map(|a| {
                    let prod: Vec<f64> = phys[0].iter().zip(&phys[a]).map(|(r, e)| r * e).collect();
                    g.forward(&prod)
                })
                .collect();
            if let Some(op) = &self.cutoff {
                for f in flux.iter_mut() {
                    op.project_spectrum(g, f);
                }
            }
            for idx in 0..g.len() {
                let (i, j) = g.split(idx);
                let div = I * (g.deriv_wavenumber(i) * flux[0][idx] + g.deriv_wavenumber(j) * flux[1][idx]);
                planes.0[0][idx] = -div;
                for a in 0..3 {
                    planes.0[1 + a][idx] = -flux[a][idx];
                }
            }
        }
        Nonlinear { planes, linf_rho, linf_e }
    }

    /// Advances by `h`, halving recursively while the CFL bound is violated.
    pub fn advance(&mut self, h: f64) -> Result<(), IntegratorError> {
        self.advance_inner(h, 0)
    }

    fn advance_inner(&mut self, h: f64, depth: u32) -> Result<(), IntegratorError> {
        let n0 = self.nonlinear(&self.planes);
        let limit = self.cfg.cfl_limit(&self.grid, n0.linf_rho, n0.linf_e);
        if h > limit {
            if depth >= MAX_HALVINGS {
                return Err(IntegratorError::BlowUpSuspected {
                    time: self.time,
                    halvings: depth,
                    linf_rho: n0.linf_rho,
                    linf_e: n0.linf_e,
                });
            }
            self.halvings += 1;
            self.advance_inner(0.5 * h, depth + 1)?;
            return self.advance_inner(0.5 * h, depth + 1);
        }
        let prop = self.propagator(h);
        let a = prop.apply(0, &self.planes).axpy(h, &prop.apply(1, &n0.planes));
        let na = self.nonlinear(&a);
        let next = a.axpy(h, &prop.apply(2, &na.planes.sub(&n0.planes)));
        if !next.is_finite() {
            return Err(IntegratorError::NonFiniteState { time: self.time + h });
        }
        self.planes = next;
        self.time += h;
        Ok(())
    }

    /// Advances through macro step `k` (from `time_at(k-1)` to `time_at(k)`).
    pub(crate) fn macro_step(&mut self, k: usize) -> Result<(), IntegratorError> {
        let t_next = self.cfg.time_at(k);
        let h = t_next - self.cfg.time_at(k - 1);
        self.advance(h)?;
        self.time = t_next;
        Ok(())
    }
}

/// Exact flow `e^{dt L}` of the linear part (heat, Maxwell rotation and the
/// linear current).
pub fn linear_propagator(s: &State, dt: f64) -> State {
    let basis = Arc::new(mode_basis(s.grid()));
    let prop = Propagator::new(basis, dt);
    prop.apply(0, &Planes::from_state(s)).to_state(s.grid(), s.time + dt)
}

/// One macro step of size `cfg.dt`.
pub fn step(s: &State, cfg: &IntegratorConfig) -> Result<State, IntegratorError> {
    let mut sim = Simulation::new(s, cfg)?;
    sim.advance(cfg.dt)?;
    Ok(sim.state())
}

// ---------------------------------------------------------------------------
// Trajectories.

/// Diagnostics at one recorded time. The running integrals use the
/// trapezoidal rule over the recorded times.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub l2_rho: f64,
    pub l2_e: f64,
    pub l2_b: f64,
    pub h1_rho: f64,
    pub h1_e: f64,
    pub h1_b: f64,
    pub grad_rho_l2: f64,
    pub hess_rho_l2: f64,
    pub linf_rho: f64,
    pub linf_e: f64,
    pub l4_rho: f64,
    pub gauss_e_residual: f64,
    pub div_b_residual: f64,
    pub energy: f64,
    /// `∫₀ᵗ ‖∇ρ‖²`.
    pub dissipation_integral: f64,
    /// `∫₀ᵗ ‖ρ‖_{H¹}`.
    pub h1_rho_integral: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub i1_closed: f64,
    pub i4_closed: f64,
    pub grad_f_l2_sq: f64,
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    pub j4: f64,
    pub j5: f64,
    pub j6: f64,
    pub j5_closed: f64,
}

impl TrajectoryRow {
    pub fn energy_source(&self) -> f64 {
        self.i1 + self.i2 + self.i3 + self.i4
    }

    pub fn h1_source(&self) -> f64 {
        self.j1 + self.j2 + self.j3 + self.j4 + self.j5 + self.j6
    }

    /// `‖(E, B)‖_{H¹}`.
    pub fn h1_field(&self) -> f64 {
        self.h1_e.hypot(self.h1_b)
    }
}

/// Instantaneous diagnostics of a state; running integrals are left at 0.
pub fn diagnostics(s: &State) -> TrajectoryRow {
    let en = energy_identity_terms(s);
    let h1 = h1_balance_terms(s);
    let gr = gauss_residuals(s);
    let h1_norm = |f: &crate::field::VectorField3| ops::sobolev_norm(f, 1.0, false).unwrap_or(f64::NAN);
    TrajectoryRow {
        t: s.time,
        l2_rho: en.l2_rho_sq.sqrt(),
        l2_e: en.l2_e_sq.sqrt(),
        l2_b: en.l2_b_sq.sqrt(),
        h1_rho: ops::sobolev_norm(&s.rho, 1.0, false).unwrap_or(f64::NAN),
        h1_e: h1_norm(&s.e),
        h1_b: h1_norm(&s.b),
        grad_rho_l2: en.grad_rho_l2_sq.sqrt(),
        hess_rho_l2: h1.hess_rho_l2_sq.sqrt(),
        linf_rho: s.rho.max_abs(),
        linf_e: s.e.max_norm(),
        l4_rho: ops::lp_norm(&s.rho, 4.0).unwrap_or(f64::NAN),
        gauss_e_residual: gr.e_residual,
        div_b_residual: gr.b_residual,
        energy: en.energy(),
        dissipation_integral: 0.0,
        h1_rho_integral: 0.0,
        i1: en.i1,
        i2: en.i2,
        i3: en.i3,
        i4: en.i4,
        i1_closed: en.i1_closed,
        i4_closed: en.i4_closed,
        grad_f_l2_sq: h1.grad_f_l2_sq,
        j1: h1.j1,
        j2: h1.j2,
        j3: h1.j3,
        j4: h1.j4,
        j5: h1.j5,
        j6: h1.j6,
        j5_closed: h1.j5_closed,
    }
}

/// Recorded diagnostics of one run, plus its last state.
#[derive(Clone, Debug, Default)]
pub struct TrajectoryRecord {
    rows: Vec<TrajectoryRow>,
    final_state: Option<State>,
    halvings: u32,
}

impl TrajectoryRecord {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a row, filling in the running integrals. Times must increase.
    pub fn push(&mut self, mut row: TrajectoryRow) {
        if let Some(prev) = self.rows.last() {
            assert!(row.t > prev.t, "trajectory times must increase");
            let dt = row.t - prev.t;
            row.dissipation_integral =
                prev.dissipation_integral + 0.5 * dt * (prev.grad_rho_l2.powi(2) + row.grad_rho_l2.powi(2));
            row.h1_rho_integral = prev.h1_rho_integral + 0.5 * dt * (prev.h1_rho + row.h1_rho);
        } else {
            row.dissipation_integral = 0.0;
            row.h1_rho_integral = 0.0;
        }
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[TrajectoryRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn final_state(&self) -> Option<&State> {
        self.final_state.as_ref()
    }

    pub fn halvings(&self) -> u32 {
        self.halvings
    }

    /// `∫ f(row) dt` over the recorded times.
    pub fn integrate(&self, f: impl Fn(&TrajectoryRow) -> f64) -> f64 {
        let v: Vec<f64> = self.rows.iter().map(f).collect();
        trapezoid(&self.times(), &v)
    }
}

/// A run that stopped early; `partial` holds everything recorded before.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct SimulationFailure {
    pub partial: TrajectoryRecord,
    #[source]
    pub error: IntegratorError,
}

/// Integrates to `cfg.t_end`, recording diagnostics at `t = 0`, every
/// `record_every` steps and at the final time.
pub fn simulate(initial: &State, cfg: &IntegratorConfig) -> Result<TrajectoryRecord, SimulationFailure> {
    simulate_with(initial, cfg, |_, _| {})
}

/// As [`simulate`], calling `observer` with each recorded state and row.
pub fn simulate_with(
    initial: &State,
    cfg: &IntegratorConfig,
    mut observer: impl FnMut(&State, &TrajectoryRow),
) -> Result<TrajectoryRecord, SimulationFailure> {
    let mut traj = TrajectoryRecord::new();
    let mut sim = match Simulation::new(initial, cfg) {
        Ok(s) => s,
        Err(error) => return Err(SimulationFailure { partial: traj, error }),
    };
    let mut record = |sim: &Simulation, traj: &mut TrajectoryRecord| {
        let s = sim.state();
        let row = diagnostics(&s);
        traj.push(row);
        observer(&s, traj.rows.last().expect("just pushed"));
        traj.final_state = Some(s);
        traj.halvings = sim.halvings;
    };
    record(&sim, &mut traj);
    let n = cfg.step_count();
    for k in 1..=n {
        if let Err(error) = sim.macro_step(k) {
            traj.halvings = sim.halvings;
            return Err(SimulationFailure { partial: traj, error });
        }
        if k % cfg.record_every == 0 || k == n {
            record(&sim, &mut traj);
        }
    }
    Ok(traj)
}

/// Member trajectories of a cutoff sequence and the sup-in-time `L²`
/// distances between consecutive members, taken over every macro step.
#[derive(Clone, Debug)]
pub struct FriedrichsReport {
    pub radii: Vec<f64>,
    pub trajectories: Vec<TrajectoryRecord>,
    /// `distances[i] = sup_t ‖u_{n_i}(t) − u_{n_{i+1}}(t)‖_{L²}`.
    pub distances: Vec<f64>,
}

/// Runs one simulation per cutoff radius from the same initial data (each
/// projected by its own `J_n`). Members advance in lockstep so distances
/// are measured without storing states.
pub fn friedrichs_sequence(
    initial: &State,
    cfg: &IntegratorConfig,
    radii: &[f64],
) -> Result<FriedrichsReport, IntegratorError> {
    let limit = initial.grid().n() / 3;
    if radii.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(IntegratorError::InvalidConfig("radii must be strictly increasing".into()));
    }
    if let Some(&r) = radii.iter().find(|&&r| r > limit as f64) {
        return Err(IntegratorError::DealiasingViolation { radius: r, limit });
    }
    let mut members = radii
        .iter()
        .map(|&r| {
            Simulation::new(
                initial,
                &IntegratorConfig {
                    cutoff_radius: Some(r),
                    ..*cfg
                },
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut trajectories = vec![TrajectoryRecord::new(); radii.len()];
    let mut distances = vec![0.0_f64; radii.len().saturating_sub(1)];
    let measure = |members: &[Simulation], distances: &mut [f64]| {
        for (i, d) in distances.iter_mut().enumerate() {
            *d = d.max(members[i].l2_distance(&members[i + 1]));
        }
    };
    let record = |members: &[Simulation], trajectories: &mut [TrajectoryRecord]| {
        let rows: Vec<(State, TrajectoryRow)> = members
            .par_iter()
            .map(|m| {
                let s = m.state();
                let row = diagnostics(&s);
                (s, row)
            })
            .collect();
        for ((traj, (s, row)), m) in trajectories.iter_mut().zip(rows).zip(members) {
            traj.push(row);
            traj.final_state = Some(s);
            traj.halvings = m.halvings;
        }
    };
    measure(&members, &mut distances);
    record(&members, &mut trajectories);
    let n = cfg.step_count();
    for k in 1..=n {
        members
            .par_iter_mut()
            .map(|m| m.macro_step(k))
            .collect::<Result<Vec<_>, _>>()?;
        measure(&members, &mut distances);
        if k % cfg.record_every == 0 || k == n {
            record(&members, &mut trajectories);
        }
    }
    Ok(FriedrichsReport {
        radii: radii.to_vec(),
        trajectories,
        distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::VectorField3;
    use crate::ops::solve_gauss_electric;
    use crate::synth::{gaussian_bump, random_band_limited, random_solenoidal, remove_mean};
    use std::f64::consts::PI;

    fn maxwell_state(grid: &Grid, seed: u64) -> State {
        let mut e = random_solenoidal(grid, seed, 12, 1.0);
        let e3 = crate::synth::normalize_peak(&random_band_limited(grid, seed + 5, 12, 1.0), 1.0);
        e = VectorField3::new(e.component(0).clone(), e.component(1).clone(), e3).unwrap();
        let b = random_solenoidal(grid, seed + 9, 12, 1.0);
        State::new(ScalarField::zeros(grid), e, b, 0.0).unwrap()
    }

    fn nonlinear_state(grid: &Grid, amp: f64) -> State {
        let l = grid.length();
        let rho = gaussian_bump(grid, (0.35 * l, 0.5 * l), l / 12.0)
            .sub(&gaussian_bump(grid, (0.65 * l, 0.5 * l), l / 12.0))
            .scale(amp);
        let rho = remove_mean(&rho);
        let e = solve_gauss_electric(&rho)
            .unwrap()
            .add(&random_solenoidal(grid, 3, 6, 0.3 * amp));
        let b = random_solenoidal(grid, 4, 6, 0.3 * amp);
        State::new(rho, e, b, 0.0).unwrap()
    }

    #[test]
    fn phi_functions_agree_across_branches() {
        for z in [
            Complex64::new(0.999, 0.0),
            Complex64::new(-0.999, 0.0),
            Complex64::new(0.0, 0.9999),
            Complex64::new(0.6, -0.7),
        ] {
            let inside = phi_functions(z);
            // direct closed forms
            let e = z.exp();
            let p1 = (e - 1.0) / z;
            let p2 = (e - 1.0 - z) / (z * z);
            let p3 = (e - 1.0 - z - z * z / 2.0) / (z * z * z);
            for (a, b) in inside.iter().zip([e, p1, p2, p3]) {
                assert!((a - b).norm() < 1e-12, "{a} vs {b} at {z}");
            }
        }
        let p = phi_functions(ZERO);
        assert_eq!([p[0].re, p[1].re, p[2].re], [1.0, 1.0, 0.5]);
        assert!((p[3].re - 1.0 / 6.0).abs() < 1e-16);
        let big = phi_functions(Complex64::new(-1e4, 0.0));
        assert!((big[1].re - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = Grid::new(16, 2.0 * PI).unwrap();
        let s = State::zeros(&g);
        let out = step(&s, &IntegratorConfig::default()).unwrap();
        assert!(out.planes().iter().all(|p| p.max_abs() == 0.0));
        let traj = simulate(&s, &IntegratorConfig { t_end: 0.01, ..Default::default() }).unwrap();
        assert!(traj.rows().iter().all(|r| r.energy == 0.0 && r.l2_rho == 0.0));
    }

    #[test]
    fn heat_decay_of_one_mode() {
        let g = Grid::new(32, 2.0 * PI).unwrap();
        let mut s = State::zeros(&g);
        s.rho = ScalarField::from_fn(&g, |x, _| x.sin());
        let out = linear_propagator(&s, 1.0);
        let expect = s.rho.scale((-1.0f64).exp());
        assert!(out.rho.sub(&expect).max_abs() < 1e-14);
    }

    #[test]
    fn maxwell_flow_is_unitary() {
        let g = Grid::new(32, 2.0 * PI).unwrap();
        let s = maxwell_state(&g, 1);
        let before = s.l2_sq();
        let out = linear_propagator(&s, 0.37);
        assert!((out.l2_sq() - before).abs() <= 1e-13 * before);
        // step and linear flow agree bit for bit when rho = 0
        let cfg = IntegratorConfig { dt: 0.01, ..Default::default() };
        assert!(cfg.dt < cfg.cfl_limit(&g, 0.0, s.e.max_norm()));
        let a = step(&s, &cfg).unwrap();
        let b = linear_propagator(&s, 0.01);
        assert_eq!(a.planes().map(|p| p.values().to_vec()), b.planes().map(|p| p.values().to_vec()));
    }

    #[test]
    fn plane_wave_matches_closed_form() {
        // E = (0, 0, cos(x₁ − t)), B = (0, −cos(x₁ − t), 0) travels in +x₁
        let g = Grid::new(32, 2.0 * PI).unwrap();
        let wave = |t: f64| {
            let e3 = ScalarField::from_fn(&g, |x, _| (x - t).cos());
            let b2 = e3.scale(-1.0);
            State::new(
                ScalarField::zeros(&g),
                VectorField3::new(ScalarField::zeros(&g), ScalarField::zeros(&g), e3).unwrap(),
                VectorField3::new(ScalarField::zeros(&g), b2, ScalarField::zeros(&g)).unwrap(),
                t,
            )
            .unwrap()
        };
        let cfg = IntegratorConfig { dt: 0.01, t_end: 1.0, ..Default::default() };
        let mut sim = Simulation::new(&wave(0.0), &cfg).unwrap();
        for k in 1..=100 {
            sim.macro_step(k).unwrap();
        }
        let got = sim.state();
        let want = wave(1.0);
        for (a, b) in got.planes().iter().zip(want.planes()) {
            assert!(a.sub(b).max_abs() < 1e-12);
        }
    }

    #[test]
    fn decoupled_rho_is_exact_heat_flow() {
        let g = Grid::new(32, 2.0 * PI).unwrap();
        let mut s = State::zeros(&g);
        s.rho = random_band_limited(&g, 2, 15, 1.0);
        let cfg = IntegratorConfig {
            dt: 0.01,
            t_end: 0.5,
            coupling: Coupling::Decoupled,
            ..Default::default()
        };
        let traj = simulate(&s, &cfg).unwrap();
        let fin = traj.final_state().unwrap();
        let want = s.rho.spectrum();
        for (idx, c) in fin.rho.spectrum().iter().enumerate() {
            let k2 = ops::deriv_k_sq(&g, idx);
            assert!((c - want[idx] * (-k2 * 0.5).exp()).norm() < 1e-14);
        }
    }

    #[test]
    fn gauss_law_is_transported() {
        let g = Grid::new(32, 8.0 * PI).unwrap();
        let s = nonlinear_state(&g, 1.0);
        let cfg = IntegratorConfig {
            dt: 0.01,
            t_end: 0.3,
            cutoff_radius: Some(10.0),
            record_every: 5,
            ..Default::default()
        };
        let traj = simulate(&s, &cfg).unwrap();
        for r in traj.rows() {
            assert!(r.gauss_e_residual < 1e-12 && r.div_b_residual < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn second_order_self_convergence() {
        let g = Grid::new(32, 8.0 * PI).unwrap();
        let s = nonlinear_state(&g, 2.0);
        let run = |dt: f64| {
            let cfg = IntegratorConfig {
                dt,
                t_end: 0.5,
                cutoff_radius: Some(10.0),
                record_every: 1000,
                ..Default::default()
            };
            simulate(&s, &cfg).unwrap().final_state().unwrap().clone()
        };
        let reference = run(0.05 / 16.0);
        let errs: Vec<f64> = [0.05, 0.025, 0.0125].iter().map(|&dt| run(dt).l2_distance(&reference)).collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.3..5.0).contains(&ratio), "ratio {ratio}, errors {errs:?}");
        }
    }

    #[test]
    fn cfl_halving_and_blow_up() {
        let g = Grid::new(16, 2.0 * PI).unwrap();
        let mut s = maxwell_state(&g, 4);
        s.e = s.e.scale(1e3);
        // dx ≈ 0.39, |E| ≈ 1e3 → limit ≈ 2e-4; dt = 1e-3 needs three halvings
        let cfg = IntegratorConfig { dt: 1e-3, t_end: 1e-3, ..Default::default() };
        let traj = simulate(&s, &cfg).unwrap();
        assert!(traj.halvings() >= 3);
        s.e = s.e.scale(1e9);
        let err = simulate(&s, &cfg).unwrap_err();
        assert!(matches!(err.error, IntegratorError::BlowUpSuspected { halvings: 20, .. }));
        assert_eq!(err.partial.len(), 1);
    }

    #[test]
    fn config_validation() {
        let g = Grid::new(128, 1.0).unwrap();
        let ok = IntegratorConfig { cutoff_radius: Some(42.0), ..Default::default() };
        assert!(ok.validate(&g).unwrap().is_some());
        let bad = IntegratorConfig { cutoff_radius: Some(43.0), ..Default::default() };
        assert!(matches!(bad.validate(&g), Err(IntegratorError::DealiasingViolation { limit: 42, .. })));
        let bad = IntegratorConfig { dt: 0.0, ..Default::default() };
        assert!(bad.validate(&g).is_err());
        let bad = IntegratorConfig { cfl_safety: 1.5, ..Default::default() };
        assert!(bad.validate(&g).is_err());
        let cfg = IntegratorConfig { dt: 0.3, t_end: 1.0, ..Default::default() };
        assert_eq!(cfg.step_count(), 4);
        assert_eq!(cfg.time_at(4), 1.0);
        let cfg = IntegratorConfig { dt: 2e-3, t_end: 1.0, ..Default::default() };
        assert_eq!(cfg.step_count(), 500);
    }

    #[test]
    fn friedrichs_members_coincide_for_band_limited_data() {
        let g = Grid::new(48, 8.0 * PI).unwrap();
        let rho = remove_mean(&random_band_limited(&g, 1, 4, 0.0));
        let rho = rho.scale(0.5 / rho.max_abs());
        let e = solve_gauss_electric(&rho).unwrap();
        let s = State::new(rho, e, VectorField3::zeros(&g), 0.0).unwrap();
        // the quadratic term widens the spectrum, so the cutoffs are inactive
        // only for the linear flow
        let cfg = IntegratorConfig {
            dt: 0.02,
            t_end: 0.2,
            record_every: 2,
            coupling: Coupling::Decoupled,
            ..Default::default()
        };
        let rep = friedrichs_sequence(&s, &cfg, &[8.0, 12.0, 16.0]).unwrap();
        assert!(rep.distances.iter().all(|&d| d < 1e-10), "{:?}", rep.distances);
        assert_eq!(rep.trajectories[0].len(), 6);
        assert!(friedrichs_sequence(&s, &cfg, &[8.0, 17.0]).is_err());
        assert!(friedrichs_sequence(&s, &cfg, &[8.0, 8.0]).is_err());
    }

    #[test]
    fn runs_are_deterministic() {
        let g = Grid::new(32, 8.0 * PI).unwrap();
        let s = nonlinear_state(&g, 1.0);
        let cfg = IntegratorConfig { dt: 0.01, t_end: 0.1, cutoff_radius: Some(10.0), ..Default::default() };
        let a = simulate(&s, &cfg).unwrap();
        let b = simulate(&s, &cfg).unwrap();
        assert_eq!(a.rows(), b.rows());
    }
}
