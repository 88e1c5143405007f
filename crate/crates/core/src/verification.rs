//! Pass/fail checks over completed trajectories and field corpora.
//!
//! Exact identities (energy balance, Gauss laws) are checked against fixed
//! absolute tolerances. Inequalities whose constants are only known to exist
//! are checked against values from a [`Calibration`] file; nothing here
//! recalibrates implicitly.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calibration::{self, Calibration, SAFETY_FACTOR};
use crate::config::CheckName;
use crate::dynamics::State;
use crate::error::VerificationError;
use crate::field::{ScalarField, VectorField3};
use crate::grid::Grid;
use crate::integrator::{simulate, IntegratorConfig, Simulation, TrajectoryRecord};
use crate::littlewood_paley::{
    decompose, interpolation_terms, trajectory_log_bound, truncation_for_ratio, DyadicFilterBank,
};
use crate::ops::{self, solve_gauss_electric};
use crate::synth::{gaussian_bump, normalize_peak, random_band_limited, random_solenoidal, remove_mean, strip_nyquist};

/// Per-unit-time tolerance of the energy balance and of the energy bound.
pub const ENERGY_TOLERANCE: f64 = 1e-5;
/// Tolerance on `‖div E − ρ‖_{L²}` and `‖div B‖_{L²}`.
pub const GAUSS_TOLERANCE: f64 = 1e-8;
/// Default relative size of the contraction perturbation.
pub const CONTRACTION_DELTA: f64 = 1e-6;
/// Default corpus size for the field inequalities.
pub const CORPUS_SIZE: usize = 100;
/// Relative rounding allowance for the scalar inequalities.
const SCALAR_TOLERANCE: f64 = 4.0 * f64::EPSILON;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: CheckName,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs` in the units of the check (log units for exponential
    /// bounds); `passed ⇔ margin ≥ −tolerance`.
    pub margin: f64,
    pub passed: bool,
    pub calibration_constant: Option<f64>,
    pub tolerance: f64,
    pub note: String,
}

impl CheckReport {
    fn new(name: CheckName, lhs: f64, rhs: f64, margin: f64, tolerance: f64) -> Self {
        CheckReport {
            name,
            lhs,
            rhs,
            margin,
            // NaN margins fail
            passed: margin >= -tolerance,
            calibration_constant: None,
            tolerance,
            note: String::new(),
        }
    }

    fn with_constant(mut self, c: f64) -> Self {
        self.calibration_constant = Some(c);
        self
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: lhs = {:.6e}, rhs = {:.6e}, margin = {:.6e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name.as_str(),
            self.lhs,
            self.rhs,
            self.margin
        )?;
        if let Some(c) = self.calibration_constant {
            write!(f, ", C = {c:.6}")?;
        }
        if !self.note.is_empty() {
            write!(f, " ({})", self.note)?;
        }
        Ok(())
    }
}

fn need(traj: &TrajectoryRecord, needed: usize) -> Result<(), VerificationError> {
    if traj.len() < needed {
        return Err(VerificationError::TrajectoryTooShort {
            got: traj.len(),
            needed,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Energy identity.

/// Residuals of `d/dt ½(‖ρ‖² + ‖E‖² + ‖B‖²) + ‖∇ρ‖² = I₁ + I₂ + I₃ + I₄`
/// and of the energy bound.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyBalance {
    /// `(t, residual)` at interior records, from five-point central
    /// differences on uniform records (three-point otherwise), or at the
    /// midpoint of a two-record trajectory.
    pub residuals: Vec<(f64, f64)>,
    pub max_residual: f64,
    /// `max_t [energy(t) + ∫₀ᵗ‖∇ρ‖² − energy(0)]`.
    pub max_excess: f64,
}

fn uniform(traj: &TrajectoryRecord) -> bool {
    let t = traj.times();
    let h = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    t.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h)
}

pub fn energy_balance(traj: &TrajectoryRecord) -> Result<EnergyBalance, VerificationError> {
    need(traj, 2)?;
    let r = traj.rows();
    let rate = |i: usize| r[i].grad_rho_l2.powi(2) - r[i].energy_source();
    let residuals: Vec<(f64, f64)> = if r.len() == 2 {
        let dt = r[1].t - r[0].t;
        let res = (r[1].energy - r[0].energy) / dt + 0.5 * (rate(0) + rate(1));
        vec![(0.5 * (r[0].t + r[1].t), res.abs())]
    } else if r.len() < 5 || !uniform(traj) {
        (1..r.len() - 1)
            .map(|k| {
                let d = (r[k + 1].energy - r[k - 1].energy) / (r[k + 1].t - r[k - 1].t);
                (r[k].t, (d + rate(k)).abs())
            })
            .collect()
    } else {
        // fourth-order stencil: its truncation error stays well below the
        // second-order error of the time stepper
        (2..r.len() - 2)
            .map(|k| {
                let h = (r[k + 2].t - r[k - 2].t) / 4.0;
                let d = (8.0 * (r[k + 1].energy - r[k - 1].energy) - (r[k + 2].energy - r[k - 2].energy)) / (12.0 * h);
                (r[k].t, (d + rate(k)).abs())
            })
            .collect()
    };
    let max_residual = residuals.iter().map(|p| p.1).fold(0.0, f64::max);
    let e0 = r[0].energy;
    let max_excess = r
        .iter()
        .map(|x| x.energy + x.dissipation_integral - e0)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EnergyBalance {
        residuals,
        max_residual,
        max_excess,
    })
}

/// Balance residual per unit time against `tol`, and
/// `energy(t) + ∫₀ᵗ‖∇ρ‖² ≤ energy(0) + tol`. `lhs` is the larger of the
/// residual and the excess.
pub fn check_energy_identity(traj: &TrajectoryRecord, tol: f64) -> Result<CheckReport, VerificationError> {
    let b = energy_balance(traj)?;
    let lhs = b.max_residual.max(b.max_excess);
    Ok(CheckReport::new(CheckName::EnergyIdentity, lhs, tol, tol - lhs, 0.0).with_note(format!(
        "balance residual {:.3e}, bound excess {:.3e}",
        b.max_residual, b.max_excess
    )))
}

pub fn check_gauss_law(traj: &TrajectoryRecord, tol: f64) -> Result<CheckReport, VerificationError> {
    need(traj, 1)?;
    let e = traj.rows().iter().map(|r| r.gauss_e_residual).fold(0.0, f64::max);
    let b = traj.rows().iter().map(|r| r.div_b_residual).fold(0.0, f64::max);
    let lhs = e.max(b);
    Ok(CheckReport::new(CheckName::GaussLaw, lhs, tol, tol - lhs, 0.0)
        .with_note(format!("div E - rho {e:.3e}, div B {b:.3e}")))
}

// ---------------------------------------------------------------------------
// Growth bound.

/// `C₀ = C_cal (‖ρ₀‖² + ‖E₀‖² + ‖B₀‖² + 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthConstants {
    pub c0: f64,
    pub c_cal: f64,
}

impl GrowthConstants {
    pub fn new(l2_rho0: f64, l2_e0: f64, l2_b0: f64, c_cal: f64) -> Self {
        GrowthConstants {
            c0: c_cal * (l2_rho0 * l2_rho0 + l2_e0 * l2_e0 + l2_b0 * l2_b0 + 1.0),
            c_cal,
        }
    }

    /// Constants from the first record of `traj`.
    pub fn from_trajectory(traj: &TrajectoryRecord, c_cal: f64) -> Result<Self, VerificationError> {
        need(traj, 1)?;
        let r = &traj.rows()[0];
        Ok(Self::new(r.l2_rho, r.l2_e, r.l2_b, c_cal))
    }
}

/// `‖ρ‖_{L¹(0,t;H¹)} + ‖(E,B)(t)‖_{H¹} ≤ (1 + ‖(E₀,B₀)‖_{H¹}) e^{C₀(t+1)}` at
/// every record. Compared in log space; `lhs`/`rhs` are reported at the
/// tightest time and the margin is `ln rhs − ln lhs`.
pub fn check_growth_bound(traj: &TrajectoryRecord, k: GrowthConstants) -> Result<CheckReport, VerificationError> {
    need(traj, 1)?;
    let rows = traj.rows();
    if rows.iter().any(|r| !r.h1_rho.is_finite() || !r.h1_field().is_finite()) {
        return Err(VerificationError::MissingDiagnostic("H1 norm"));
    }
    let f0 = rows[0].h1_field();
    let mut worst: Option<(f64, f64, f64)> = None;
    for r in rows {
        let lhs = r.h1_rho_integral + r.h1_field();
        let log_rhs = (1.0 + f0).ln() + k.c0 * (r.t + 1.0);
        let margin = if lhs > 0.0 { log_rhs - lhs.ln() } else { f64::INFINITY };
        if worst.is_none_or(|w| margin < w.0) {
            worst = Some((margin, lhs, log_rhs));
        }
    }
    let (margin, lhs, log_rhs) = worst.expect("at least one record");
    Ok(CheckReport::new(CheckName::GrowthBound, lhs, log_rhs.exp(), margin, 0.0)
        .with_constant(k.c_cal)
        .with_note(format!("C0 = {:.6}, margin in log units", k.c0)))
}

// ---------------------------------------------------------------------------
// Field inequalities.

/// Deterministic zero-mean corpus: three in four members are random
/// band-limited fields with random band and slope, the rest are signed sums
/// of one to three periodic Gaussian bumps of random width. Every member
/// has unit peak and no Nyquist content.
pub fn field_corpus(grid: &Grid, seed: u64, count: usize) -> Vec<ScalarField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = grid.length();
    let top = (grid.n() / 3).max(3);
    (0..count)
        .map(|i| {
            let raw = if i % 4 == 3 {
                let bumps = rng.random_range(1..=3);
                (0..bumps).fold(ScalarField::zeros(grid), |acc, _| {
                    let c = (rng.random_range(0.0..l), rng.random_range(0.0..l));
                    let sigma = rng.random_range(2.0 * grid.dx()..l / 8.0);
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    acc.add(&gaussian_bump(grid, c, sigma).scale(sign))
                })
            } else {
                let band = rng.random_range(2..=top);
                let slope = rng.random_range(0.5..3.0);
                random_band_limited(grid, rng.random(), band, slope)
            };
            normalize_peak(&remove_mean(&strip_nyquist(&raw)), 1.0)
        })
        .collect()
}

/// `‖u‖²_{L⁴} / (‖u‖_{L²}‖∇u‖_{L²})`, with the quartic integral on the ×2 grid;
/// `None` for a field with vanishing gradient.
pub fn gn_ratio(u: &ScalarField) -> Option<f64> {
    let grad = ops::grad_l2_sq(u).sqrt();
    if !(grad > 0.0) {
        return None;
    }
    let l4 = ops::lp_norm_oversampled(u, 4.0).ok()?;
    Some(l4 * l4 / (ops::l2_sq(u).sqrt() * grad))
}

pub fn check_gn(corpus: &[ScalarField], c_gn: f64) -> Result<CheckReport, VerificationError> {
    if corpus.is_empty() {
        return Err(VerificationError::EmptyCorpus);
    }
    let ratios: Vec<f64> = corpus.iter().filter_map(gn_ratio).collect();
    let excluded = corpus.len() - ratios.len();
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let mut note = format!("{} fields", ratios.len());
    if excluded > 0 {
        note.push_str(&format!(", {excluded} constant fields excluded"));
    }
    Ok(CheckReport::new(CheckName::Gn, max, c_gn, c_gn - max, 0.0)
        .with_constant(c_gn)
        .with_note(note))
}

/// `√(a+b) ≤ √a + b` and `log(a+b) ≤ log a + b` for `a ≥ 1`, `b ≥ 0`.
/// The margin is the smallest relative slack over both inequalities.
pub fn check_scalar_inequalities(samples: &[(f64, f64)]) -> Result<CheckReport, VerificationError> {
    if let Some((index, &(a, b))) = samples
        .iter()
        .enumerate()
        .find(|(_, &(a, b))| !(a >= 1.0 && b >= 0.0 && a.is_finite() && b.is_finite()))
    {
        return Err(VerificationError::InvalidSample { index, a, b });
    }
    let mut worst = (f64::INFINITY, 0.0, 0.0);
    let mut violations = 0usize;
    for &(a, b) in samples {
        let pairs = [
            ((a + b).sqrt(), a.sqrt() + b),
            // log(a+b) − log a = log1p(b/a), kept exact for tiny b
            ((b / a).ln_1p(), b),
        ];
        for (lhs, rhs) in pairs {
            let slack = if rhs > 0.0 { (rhs - lhs) / rhs } else { rhs - lhs };
            if slack < -SCALAR_TOLERANCE {
                violations += 1;
            }
            if slack < worst.0 {
                worst = (slack, lhs, rhs);
            }
        }
    }
    let (margin, lhs, rhs) = if samples.is_empty() { (0.0, 0.0, 0.0) } else { worst };
    Ok(
        CheckReport::new(CheckName::ScalarInequalities, lhs, rhs, margin, SCALAR_TOLERANCE).with_note(format!(
            "{} pairs, {violations} violations",
            samples.len()
        )),
    )
}

/// Pairs with `a` log-uniform in `[1, 10⁶]` and `b` alternately uniform in
/// `[0, 10⁶]` and log-uniform in `[10⁻¹², 10⁶]`, plus the corner `(1, 0)`.
pub fn random_pairs(seed: u64, count: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    if count > 0 {
        out.push((1.0, 0.0));
    }
    while out.len() < count {
        let a = 10f64.powf(rng.random_range(0.0..=6.0));
        let b = if out.len() % 2 == 0 {
            rng.random_range(0.0..=1e6)
        } else {
            10f64.powf(rng.random_range(-12.0..=6.0))
        };
        out.push((a.max(1.0), b));
    }
    out
}

/// Largest Bernstein ratios over a corpus, `sup ‖Δ_q u‖_{L∞}/(2^q‖Δ_q u‖_{L²})`
/// and `sup ‖Δ_q ∇u‖_{L²}/(2^q‖Δ_q u‖_{L²})`. Blocks holding less than
/// `10⁻¹⁰` of the field's `L²` norm are skipped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BernsteinRatios {
    pub linf: f64,
    pub grad: f64,
}

pub fn bernstein_ratios(corpus: &[ScalarField], bank: &DyadicFilterBank) -> BernsteinRatios {
    let mut out = BernsteinRatios { linf: 0.0, grad: 0.0 };
    for u in corpus {
        let total = ops::l2_sq(u).sqrt();
        let d = decompose(u, bank);
        for (q, b) in (1..).zip(&d.blocks) {
            let l2 = ops::l2_sq(b).sqrt();
            if !(l2 > 1e-10 * total) {
                continue;
            }
            let scale = 2f64.powi(q) * l2;
            out.linf = out.linf.max(b.max_abs() / scale);
            out.grad = out.grad.max(ops::grad_l2_sq(b).sqrt() / scale);
        }
    }
    out
}

/// Both Bernstein ratios against their constants; `lhs` is the larger of
/// the two normalized ratios and `rhs = 1`.
pub fn check_bernstein(
    corpus: &[ScalarField],
    bank: &DyadicFilterBank,
    cal: &Calibration,
) -> Result<CheckReport, VerificationError> {
    let c_linf = cal.get(calibration::C_BERNSTEIN_LINF)?;
    let c_grad = cal.get(calibration::C_BERNSTEIN_GRAD)?;
    let r = bernstein_ratios(corpus, bank);
    let lhs = (r.linf / c_linf).max(r.grad / c_grad);
    Ok(CheckReport::new(CheckName::Bernstein, lhs, 1.0, 1.0 - lhs, 0.0)
        .with_constant(c_linf)
        .with_note(format!(
            "L-inf ratio {:.4} (C {:.4}), gradient ratio {:.4} (C {:.4})",
            r.linf, c_linf, r.grad, c_grad
        )))
}

/// Smallest admissible constant in the interpolation chain
/// `‖u‖_{L∞} ≤ C(‖u‖_{L²} + N‖∇u‖_{L²} + 2^{−N}‖∇²u‖_{L²})` with the
/// optimized `N`.
pub fn sds_ratio(linf: f64, l2: f64, grad: f64, hess: f64, q_max: i32) -> f64 {
    interpolation_terms(linf, l2, grad, hess, truncation_for_ratio(grad, hess, q_max)).ratio()
}

/// The per-time chain at every record with `c_sds`, and the time-integrated
/// bound with `c_lp_traj`, taking `C₀` from `growth`. `lhs`/`rhs` belong to
/// the integrated bound; the margin is the smaller relative slack of the two.
pub fn check_lp_log_bound(
    traj: &TrajectoryRecord,
    bank: &DyadicFilterBank,
    cal: &Calibration,
    growth: GrowthConstants,
) -> Result<CheckReport, VerificationError> {
    need(traj, 1)?;
    let grid = traj
        .final_state()
        .map(|s| s.grid().clone())
        .ok_or(VerificationError::MissingDiagnostic("final state"))?;
    let c_sds = cal.get(calibration::C_SDS)?;
    let c_traj = cal.get(calibration::C_LP_TRAJ)?;
    let q_max = bank.q_max(&grid);
    let chain = traj
        .rows()
        .iter()
        .map(|r| sds_ratio(r.linf_rho, r.l2_rho, r.grad_rho_l2, r.hess_rho_l2, q_max))
        .fold(0.0, f64::max);
    let horizon = traj.rows().last().map_or(0.0, |r| r.t);
    let b = trajectory_log_bound(traj, growth.c0, horizon, c_traj)?;
    let traj_slack = if b.rhs > 0.0 { 1.0 - b.lhs / b.rhs } else { -b.lhs };
    let chain_slack = 1.0 - chain / c_sds;
    Ok(
        CheckReport::new(CheckName::LpLogBound, b.lhs, b.rhs, traj_slack.min(chain_slack), 0.0)
            .with_constant(c_traj)
            .with_note(format!("per-time chain ratio {chain:.4} against C {c_sds:.4}")),
    )
}

// ---------------------------------------------------------------------------
// Contraction.

/// Twin-run measurement for the Gronwall envelope
/// `‖δu(t)‖² ≤ ‖δu₀‖² exp(∫₀ᵗ(‖ρ₁‖_{L∞} + ‖ρ₂‖_{L∞} + K))`, where `δu` is the
/// full difference `(δρ, δE, δB)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionProbe {
    pub check: CheckReport,
    pub times: Vec<f64>,
    /// `ln(‖δu(t)‖²/‖δu₀‖²)`.
    pub log_ratio: Vec<f64>,
    /// `∫₀ᵗ(‖ρ₁‖_{L∞} + ‖ρ₂‖_{L∞}) dτ`, without the `K t` part.
    pub exponent: Vec<f64>,
    /// Final `ln(‖δu‖²/‖δu₀‖²) / t`.
    pub measured_rate: f64,
    /// Smallest `K ≥ 0` for which the envelope holds on this run.
    pub needed_k: f64,
}

/// Zero-mean perturbation of relative size `delta`: a random band-limited
/// charge with `E` re-solved from the Gauss law, or, for charge-free data, a
/// solenoidal field perturbation.
pub fn perturbation(initial: &State, delta: f64, seed: u64) -> Result<State, VerificationError> {
    let g = initial.grid();
    let band = (g.n() / 8).max(2);
    let rho_scale = initial.rho.max_abs();
    let (rho, e) = if rho_scale > 0.0 {
        let rho = normalize_peak(&random_band_limited(g, seed, band, 1.5), delta * rho_scale);
        let e = solve_gauss_electric(&rho)?;
        (rho, e)
    } else {
        let scale = delta * initial.e.max_norm().max(initial.b.max_norm()).max(1.0);
        (ScalarField::zeros(g), random_solenoidal(g, seed, band, scale))
    };
    Ok(State::new(rho, e, VectorField3::zeros(g), 0.0)?)
}

pub fn contraction_probe(
    initial: &State,
    cfg: &IntegratorConfig,
    delta: f64,
    k: f64,
    seed: u64,
) -> Result<ContractionProbe, VerificationError> {
    let dp = perturbation(initial, delta, seed)?;
    let perturbed = State {
        rho: initial.rho.add(&dp.rho),
        e: initial.e.add(&dp.e),
        b: initial.b.add(&dp.b),
        time: initial.time,
    };
    let mut a = Simulation::new(initial, cfg)?;
    let mut b = Simulation::new(&perturbed, cfg)?;
    let d0 = a.l2_distance(&b);
    let mut times = vec![a.time()];
    let mut dist = vec![d0];
    let mut linf = vec![a.linf_rho() + b.linf_rho()];
    for step in 1..=cfg.step_count() {
        a.macro_step(step)?;
        b.macro_step(step)?;
        times.push(a.time());
        dist.push(a.l2_distance(&b));
        linf.push(a.linf_rho() + b.linf_rho());
    }
    let mut exponent = vec![0.0];
    for i in 1..times.len() {
        exponent.push(exponent[i - 1] + 0.5 * (times[i] - times[i - 1]) * (linf[i] + linf[i - 1]));
    }
    if d0 == 0.0 {
        let max = dist.iter().copied().fold(0.0, f64::max);
        let check = CheckReport::new(CheckName::Contraction, max, 0.0, -max, 0.0)
            .with_constant(k)
            .with_note("zero perturbation");
        return Ok(ContractionProbe {
            check,
            log_ratio: vec![0.0; times.len()],
            times,
            exponent,
            measured_rate: 0.0,
            needed_k: 0.0,
        });
    }
    let log_ratio: Vec<f64> = dist.iter().map(|d| 2.0 * (d / d0).ln()).collect();
    let t0 = times[0];
    let mut worst = (f64::INFINITY, 0.0, 0.0);
    let mut needed_k = 0.0_f64;
    for i in 1..times.len() {
        let t = times[i] - t0;
        let env = exponent[i] + k * t;
        if env - log_ratio[i] < worst.0 {
            worst = (env - log_ratio[i], log_ratio[i], env);
        }
        needed_k = needed_k.max((log_ratio[i] - exponent[i]) / t);
    }
    let span = times.last().copied().unwrap_or(t0) - t0;
    let measured_rate = if span > 0.0 { log_ratio.last().copied().unwrap_or(0.0) / span } else { 0.0 };
    let (margin, lhs, rhs) = if times.len() > 1 { worst } else { (0.0, 0.0, 0.0) };
    let check = CheckReport::new(CheckName::Contraction, lhs, rhs, margin, 0.0)
        .with_constant(k)
        .with_note(format!("measured rate {measured_rate:.6e}, K needed {needed_k:.3e}"));
    Ok(ContractionProbe {
        check,
        times,
        log_ratio,
        exponent,
        measured_rate,
        needed_k,
    })
}

// ---------------------------------------------------------------------------
// Calibration.

/// Inputs of a calibration run.
#[derive(Clone, Debug)]
pub struct CalibrationPlan {
    /// Geometry of the field corpus.
    pub grid: Grid,
    pub corpus_seed: u64,
    pub corpus_size: usize,
    /// Twin run used to size `K`.
    pub probe_initial: State,
    pub probe_config: IntegratorConfig,
    pub bank: DyadicFilterBank,
}

/// Measures every constant and stores it multiplied by [`SAFETY_FACTOR`]
/// (the growth constant is fixed at 1).
pub fn calibrate(plan: &CalibrationPlan) -> Result<Calibration, VerificationError> {
    let corpus = field_corpus(&plan.grid, plan.corpus_seed, plan.corpus_size);
    if corpus.is_empty() {
        return Err(VerificationError::EmptyCorpus);
    }
    let origin = format!(
        "{} fields, seed {}, N = {}, L = {:.6}",
        corpus.len(),
        plan.corpus_seed,
        plan.grid.n(),
        plan.grid.length()
    );
    let scaled = |x: f64| SAFETY_FACTOR * x;
    let mut cal = Calibration::default();

    let gn = corpus.iter().filter_map(gn_ratio).fold(0.0, f64::max);
    cal.set(calibration::C_GN, scaled(gn), &format!("max ratio {gn:.6} x {SAFETY_FACTOR} over {origin}"));

    let b = bernstein_ratios(&corpus, &plan.bank);
    cal.set(
        calibration::C_BERNSTEIN_LINF,
        scaled(b.linf),
        &format!("max block ratio {:.6} x {SAFETY_FACTOR} over {origin}", b.linf),
    );
    cal.set(
        calibration::C_BERNSTEIN_GRAD,
        scaled(b.grad),
        &format!("max block ratio {:.6} x {SAFETY_FACTOR} over {origin}", b.grad),
    );

    let q_max = plan.bank.q_max(&plan.grid);
    let sds = corpus
        .iter()
        .map(|u| {
            sds_ratio(
                u.max_abs(),
                ops::l2_sq(u).sqrt(),
                ops::grad_l2_sq(u).sqrt(),
                ops::hess_l2_sq(u).sqrt(),
                q_max,
            )
        })
        .fold(0.0, f64::max);
    let c_sds = scaled(sds);
    cal.set(calibration::C_SDS, c_sds, &format!("max chain ratio {sds:.6} x {SAFETY_FACTOR} over {origin}"));
    let traj_factor = 1.0 / std::f64::consts::LN_2 + 0.5 + std::f64::consts::SQRT_2;
    cal.set(
        calibration::C_LP_TRAJ,
        c_sds * traj_factor,
        &format!("c_sds x (1/ln 2 + 1/2 + sqrt 2) = c_sds x {traj_factor:.6}"),
    );

    cal.set(calibration::C_GROWTH, 1.0, "fixed at 1");

    let probe = contraction_probe(&plan.probe_initial, &plan.probe_config, CONTRACTION_DELTA, 0.0, plan.corpus_seed)?;
    let k = scaled(probe.needed_k.max(K_FLOOR));
    cal.set(
        calibration::K_GRONWALL,
        k,
        &format!(
            "max(needed K {:.3e}, floor {K_FLOOR}) x {SAFETY_FACTOR}; twin run N = {}, dt = {}, T = {}",
            probe.needed_k,
            plan.probe_initial.grid().n(),
            plan.probe_config.dt,
            plan.probe_config.t_end
        ),
    );
    Ok(cal)
}

/// Lower bound on the stored `K`, so that a probe run whose difference never
/// grows still leaves headroom for other data.
pub const K_FLOOR: f64 = 0.1;

// ---------------------------------------------------------------------------
// Suite.

/// Everything a full verification pass needs.
pub struct SuiteInputs<'a> {
    pub initial: &'a State,
    pub config: &'a IntegratorConfig,
    pub trajectory: &'a TrajectoryRecord,
    pub calibration: &'a Calibration,
    pub bank: &'a DyadicFilterBank,
    pub seed: u64,
}

/// Runs the named checks in the given order.
pub fn run_suite(inputs: &SuiteInputs<'_>, names: &[CheckName]) -> Result<Vec<CheckReport>, VerificationError> {
    let cal = inputs.calibration;
    let traj = inputs.trajectory;
    let growth = GrowthConstants::from_trajectory(traj, cal.get(calibration::C_GROWTH)?)?;
    let mut corpus: Option<Vec<ScalarField>> = None;
    let mut corpus = || -> Vec<ScalarField> {
        corpus
            .get_or_insert_with(|| field_corpus(inputs.initial.grid(), inputs.seed, CORPUS_SIZE))
            .clone()
    };
    names
        .iter()
        .map(|name| match name {
            CheckName::GaussLaw => check_gauss_law(traj, GAUSS_TOLERANCE),
            CheckName::EnergyIdentity => check_energy_identity(traj, ENERGY_TOLERANCE),
            CheckName::GrowthBound => check_growth_bound(traj, growth),
            CheckName::Gn => check_gn(&corpus(), cal.get(calibration::C_GN)?),
            CheckName::ScalarInequalities => check_scalar_inequalities(&random_pairs(inputs.seed, 100_000)),
            CheckName::Bernstein => check_bernstein(&corpus(), inputs.bank, cal),
            CheckName::LpLogBound => check_lp_log_bound(traj, inputs.bank, cal, growth),
            CheckName::Contraction => contraction_probe(
                inputs.initial,
                inputs.config,
                CONTRACTION_DELTA,
                cal.get(calibration::K_GRONWALL)?,
                inputs.seed,
            )
            .map(|p| p.check),
        })
        .collect()
}

/// Convenience wrapper: simulate, then run the suite on the result.
pub fn verify_run(
    initial: &State,
    config: &IntegratorConfig,
    cal: &Calibration,
    names: &[CheckName],
    seed: u64,
) -> Result<(TrajectoryRecord, Vec<CheckReport>), VerificationError> {
    let traj = simulate(initial, config).map_err(|f| f.error)?;
    let bank = DyadicFilterBank::default();
    let reports = run_suite(
        &SuiteInputs {
            initial,
            config,
            trajectory: &traj,
            calibration: cal,
            bank: &bank,
            seed,
        },
        names,
    )?;
    Ok((traj, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Preset, RunConfig};
    use crate::integrator::Coupling;
    use crate::presets::build_initial_state;
    use std::f64::consts::PI;

    fn small(preset: Preset) -> (State, IntegratorConfig) {
        let cfg = RunConfig {
            grid_n: 32,
            domain_length: 8.0 * PI,
            cutoff_n: Some(10.0),
            t_end: 0.1,
            dt: 5e-3,
            preset,
            ..RunConfig::default()
        };
        (build_initial_state(&cfg).unwrap(), cfg.integrator_config())
    }

    fn run(preset: Preset) -> (State, IntegratorConfig, TrajectoryRecord) {
        let (s, c) = small(preset);
        let t = simulate(&s, &c).unwrap();
        (s, c, t)
    }

    #[test]
    fn zero_trajectory_has_zero_residual() {
        let g = Grid::new(16, 2.0 * PI).unwrap();
        let cfg = IntegratorConfig {
            t_end: 0.05,
            dt: 0.01,
            ..IntegratorConfig::default()
        };
        let traj = simulate(&State::zeros(&g), &cfg).unwrap();
        let b = energy_balance(&traj).unwrap();
        assert_eq!(b.max_residual, 0.0);
        assert_eq!(b.max_excess, 0.0);
        assert!(check_energy_identity(&traj, 1e-12).unwrap().passed);
        let k = GrowthConstants::from_trajectory(&traj, 1.0).unwrap();
        assert_eq!(k.c0, 1.0);
        let r = check_growth_bound(&traj, k).unwrap();
        assert!(r.passed && r.rhs >= 1f64.exp());
    }

    #[test]
    fn maxwell_energy_is_constant() {
        let (_, _, traj) = run(Preset::MaxwellOnly);
        let b = energy_balance(&traj).unwrap();
        let e0 = traj.rows()[0].energy;
        assert!(b.max_residual < 1e-12 * e0, "{b:?}");
        assert!(traj.rows().iter().all(|r| r.dissipation_integral == 0.0));
        assert!(check_growth_bound(&traj, GrowthConstants::from_trajectory(&traj, 1.0).unwrap())
            .unwrap()
            .passed);
    }

    #[test]
    fn nonlinear_run_passes_identities() {
        let (_, _, traj) = run(Preset::GaussianPair);
        let e = check_energy_identity(&traj, ENERGY_TOLERANCE).unwrap();
        assert!(e.passed, "{e}");
        assert!(check_gauss_law(&traj, GAUSS_TOLERANCE).unwrap().passed);
    }

    #[test]
    fn short_trajectories_are_rejected() {
        let t = TrajectoryRecord::new();
        assert!(matches!(
            energy_balance(&t),
            Err(VerificationError::TrajectoryTooShort { got: 0, needed: 2 })
        ));
        assert!(check_growth_bound(&t, GrowthConstants::new(0.0, 0.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn growth_constants_scale_with_energy() {
        let k = GrowthConstants::new(1.0, 2.0, 3.0, 0.5);
        assert_eq!(k.c0, 0.5 * 15.0);
        assert!(GrowthConstants::new(0.0, 0.0, 0.0, 2.0).c0 >= 2.0);
    }

    #[test]
    fn gn_ratio_of_a_sine() {
        let g = Grid::new(32, 2.0 * PI).unwrap();
        let u = ScalarField::from_fn(&g, |x, _| x.sin());
        // ∫sin⁴ = 3π²/2 over the square, ‖u‖₂ = ‖∇u‖₂ = √2 π
        let oracle = (1.5 * PI * PI).sqrt() / (2.0 * PI * PI);
        assert!((gn_ratio(&u).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn gn_ratio_of_a_narrow_gaussian() {
        let g = Grid::new(128, 2.0 * PI).unwrap();
        let u = gaussian_bump(&g, (PI, PI), 2.0 * PI / 20.0);
        let oracle = (PI / 2.0).sqrt() / PI;
        let r = gn_ratio(&u).unwrap();
        assert!((r / oracle - 1.0).abs() < 0.02, "{r} vs {oracle}");
    }

    #[test]
    fn gn_excludes_constant_fields() {
        let g = Grid::new(16, 2.0 * PI).unwrap();
        let corpus = vec![ScalarField::constant(&g, 0.0), ScalarField::from_fn(&g, |x, _| x.sin())];
        let r = check_gn(&corpus, 0.5).unwrap();
        assert!(r.passed);
        assert!(r.note.contains("1 constant fields excluded"));
        assert!(matches!(check_gn(&[], 1.0), Err(VerificationError::EmptyCorpus)));
    }

    #[test]
    fn scalar_inequalities_boundary_cases() {
        let r = check_scalar_inequalities(&[(1.0, 0.0)]).unwrap();
        assert!(r.passed);
        assert_eq!(r.margin, 0.0);
        let r = check_scalar_inequalities(&[(1.0, 1.0)]).unwrap();
        assert!(r.passed && r.margin > 0.0);
        assert!(matches!(
            check_scalar_inequalities(&[(1.0, 1.0), (0.5, 1.0)]),
            Err(VerificationError::InvalidSample { index: 1, .. })
        ));
        assert!(check_scalar_inequalities(&[(1.0, -1e-300)]).is_err());
    }

    #[test]
    fn scalar_sweep_has_no_violations() {
        let pairs = random_pairs(5, 20_000);
        assert_eq!(pairs.len(), 20_000);
        assert!(pairs.iter().all(|&(a, b)| (1.0..=1e6).contains(&a) && (0.0..=1e6).contains(&b)));
        let r = check_scalar_inequalities(&pairs).unwrap();
        assert!(r.passed && r.note.ends_with(" 0 violations"), "{r}");
    }

    #[test]
    fn bernstein_single_mode_is_exact() {
        let g = Grid::new(64, 2.0 * PI).unwrap();
        // |ξ| = 4 = 2², entirely inside block q = 2
        let u = ScalarField::from_fn(&g, |x, _| (4.0 * x).cos());
        let r = bernstein_ratios(&[u], &DyadicFilterBank::default());
        let oracle = 2f64.sqrt() / (4.0 * 2.0 * PI);
        assert!((r.linf - oracle).abs() < 1e-12, "{r:?}");
        assert!((r.grad - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bernstein_zero_is_vacuous() {
        let g = Grid::new(16, 2.0 * PI).unwrap();
        let r = check_bernstein(&[ScalarField::zeros(&g)], &DyadicFilterBank::default(), &Calibration::builtin()).unwrap();
        assert!(r.passed);
        assert_eq!(r.lhs, 0.0);
    }

    #[test]
    fn corpus_is_zero_mean_and_deterministic() {
        let g = Grid::new(32, 4.0 * PI).unwrap();
        let a = field_corpus(&g, 9, 12);
        assert_eq!(a, field_corpus(&g, 9, 12));
        assert_ne!(a, field_corpus(&g, 10, 12));
        for u in &a {
            assert!(u.mean().abs() < 1e-14);
            assert!((u.max_abs() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn heat_run_log_bound_lhs_matches_semigroup() {
        let g = Grid::new(32, 2.0 * PI).unwrap();
        let rho = ScalarField::from_fn(&g, |x, _| 0.3 * (2.0 * x).cos());
        let s = State::new(rho, VectorField3::zeros(&g), VectorField3::zeros(&g), 0.0).unwrap();
        let cfg = IntegratorConfig {
            dt: 1e-3,
            t_end: 0.5,
            coupling: Coupling::Decoupled,
            ..IntegratorConfig::default()
        };
        let traj = simulate(&s, &cfg).unwrap();
        let b = trajectory_log_bound(&traj, 1.0, 0.5, 1.0).unwrap();
        // ‖ρ(t)‖∞ = 0.3 e^{−4t}
        let oracle = 0.3 * (1.0 - (-2.0f64).exp()) / 4.0;
        assert!((b.lhs - oracle).abs() < 1e-5 * oracle, "{} vs {oracle}", b.lhs);
        let mut cal = Calibration::builtin();
        cal.set(calibration::C_SDS, 10.0, "");
        let r = check_lp_log_bound(&traj, &DyadicFilterBank::default(), &cal, GrowthConstants::new(0.0, 0.0, 0.0, 1.0))
            .unwrap();
        assert!(r.passed, "{r}");
    }

    #[test]
    fn zero_perturbation_gives_zero_difference() {
        let (s, c) = small(Preset::GaussianPair);
        let p = contraction_probe(&s, &c, 0.0, 0.0, 1).unwrap();
        assert!(p.check.passed);
        assert_eq!(p.check.lhs, 0.0);
    }

    #[test]
    fn maxwell_difference_is_conserved() {
        let (s, c) = small(Preset::MaxwellOnly);
        let p = contraction_probe(&s, &c, 1e-6, 0.0, 1).unwrap();
        assert!(p.log_ratio.iter().all(|v| v.abs() < 1e-9), "{:?}", p.log_ratio);
        assert!(p.exponent.iter().all(|&v| v == 0.0));
        assert!(p.measured_rate.abs() < 1e-8);
    }

    #[test]
    fn perturbation_keeps_gauss_law() {
        let (s, _) = small(Preset::Dipole);
        let d = perturbation(&s, 1e-6, 3).unwrap();
        assert!(crate::dynamics::gauss_residuals(&d).e_residual < 1e-20);
        assert!((d.rho.max_abs() / s.rho.max_abs() - 1e-6).abs() < 1e-18);
        assert!(d.rho.mean().abs() < 1e-20);
    }

    #[test]
    fn nonlinear_probe_stays_under_envelope() {
        let (s, c) = small(Preset::GaussianPair);
        let p = contraction_probe(&s, &c, 1e-6, 0.125, 2).unwrap();
        assert!(p.check.passed, "{}", p.check);
    }

    #[test]
    fn calibration_is_complete_and_consistent() {
        let (s, c) = small(Preset::GaussianPair);
        let plan = CalibrationPlan {
            grid: s.grid().clone(),
            corpus_seed: 4,
            corpus_size: 8,
            probe_initial: s,
            probe_config: c,
            bank: DyadicFilterBank::default(),
        };
        let cal = calibrate(&plan).unwrap();
        cal.ensure_complete().unwrap();
        let sds = cal.get(calibration::C_SDS).unwrap();
        let traj = cal.get(calibration::C_LP_TRAJ).unwrap();
        assert!((traj / sds - (1.0 / 2f64.ln() + 0.5 + 2f64.sqrt())).abs() < 1e-12);
        assert!(cal.get(calibration::K_GRONWALL).unwrap() >= SAFETY_FACTOR * K_FLOOR);
        // the corpus it was measured on passes with margin
        let corpus = field_corpus(&plan.grid, 4, 8);
        assert!(check_gn(&corpus, cal.get(calibration::C_GN).unwrap()).unwrap().margin > 0.0);
        assert!(check_bernstein(&corpus, &plan.bank, &cal).unwrap().margin > 0.0);
    }

    #[test]
    fn suite_runs_every_check_in_order() {
        let (s, c, traj) = run(Preset::GaussianPair);
        let bank = DyadicFilterBank::default();
        let cal = Calibration::builtin();
        let inputs = SuiteInputs {
            initial: &s,
            config: &c,
            trajectory: &traj,
            calibration: &cal,
            bank: &bank,
            seed: 0,
        };
        let reports = run_suite(&inputs, &CheckName::ALL).unwrap();
        let names: Vec<_> = reports.iter().map(|r| r.name).collect();
        assert_eq!(names, CheckName::ALL);
        for r in &reports {
            assert_eq!(r.passed, r.margin >= -r.tolerance);
        }
        assert!(reports[0].passed && reports[1].passed);
    }
}
