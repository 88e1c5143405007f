//! Right-hand side of the drift-diffusion–Maxwell system, constraint
//! residuals, and the integrands of the `L²` and `H¹` balance laws.
//!
//! Nonlinear products are formed pointwise on the physical grid. With a
//! cutoff of radius `n ≤ N/3` and in-ball fields, every cubic quadrature
//! below is alias-free, so the integration-by-parts identities hold to
//! roundoff.

use crate::error::{DynamicsError, SpectralError};
use crate::field::{ScalarField, VectorField3};
use crate::grid::Grid;
use crate::ops::{self, apply_cutoff, CutoffOperator};

/// `(ρ, E, B)` at time `time`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub rho: ScalarField,
    pub e: VectorField3,
    pub b: VectorField3,
    pub time: f64,
}

impl State {
    pub fn new(rho: ScalarField, e: VectorField3, b: VectorField3, time: f64) -> Result<Self, SpectralError> {
        if rho.grid() != e.grid() || rho.grid() != b.grid() {
            return Err(SpectralError::GridMismatch);
        }
        Ok(State { rho, e, b, time })
    }

    pub fn zeros(grid: &Grid) -> Self {
        State {
            rho: ScalarField::zeros(grid),
            e: VectorField3::zeros(grid),
            b: VectorField3::zeros(grid),
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.rho.is_finite() && self.e.is_finite() && self.b.is_finite()
    }

    /// The seven scalar planes in snapshot order `ρ, E₁, E₂, E₃, B₁, B₂, B₃`.
    pub fn planes(&self) -> [&ScalarField; 7] {
        let [e1, e2, e3] = self.e.components();
        let [b1, b2, b3] = self.b.components();
        [&self.rho, e1, e2, e3, b1, b2, b3]
    }

    /// Inverse of [`State::planes`].
    pub fn from_planes(planes: [ScalarField; 7], time: f64) -> Result<Self, SpectralError> {
        let [rho, e1, e2, e3, b1, b2, b3] = planes;
        State::new(rho, VectorField3::new(e1, e2, e3)?, VectorField3::new(b1, b2, b3)?, time)
    }

    /// Applies `J_n` to all fields.
    pub fn project(&self, op: &CutoffOperator) -> State {
        State {
            rho: apply_cutoff(op, &self.rho),
            e: apply_cutoff(op, &self.e),
            b: apply_cutoff(op, &self.b),
            time: self.time,
        }
    }

    /// `‖ρ‖² + ‖E‖² + ‖B‖²` in `L²`.
    pub fn l2_sq(&self) -> f64 {
        self.planes().iter().map(|f| ops::l2_sq(f)).sum()
    }

    /// `L²` distance over all seven planes.
    pub fn l2_distance(&self, other: &State) -> f64 {
        self.planes()
            .iter()
            .zip(other.planes())
            .map(|(a, b)| ops::l2_sq(&a.sub(b)))
            .sum::<f64>()
            .sqrt()
    }
}

/// Time derivative `(∂ₜρ, ∂ₜE, ∂ₜB)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tendency {
    pub rho: ScalarField,
    pub e: VectorField3,
    pub b: VectorField3,
}

fn cut<F: crate::field::SpectralField>(op: Option<&CutoffOperator>, f: F) -> F {
    match op {
        Some(op) => apply_cutoff(op, &f),
        None => f,
    }
}

/// `j = ρE − ∇ρ`, followed by `J_n` when a cutoff is given.
pub fn current_density(s: &State, cutoff: Option<&CutoffOperator>) -> VectorField3 {
    cut(cutoff, s.e.mul_scalar(&s.rho).sub(&ops::grad(&s.rho)))
}

/// `(J_nΔρ − J_n div(ρE), curl B − j, −curl E)`; `J_n` is the identity
/// without a cutoff.
pub fn rhs(s: &State, cutoff: Option<&CutoffOperator>) -> Result<Tendency, DynamicsError> {
    if let Some(op) = cutoff {
        let nyquist = s.grid().n() as f64 / 2.0;
        if op.radius() > nyquist {
            return Err(DynamicsError::CutoffAboveNyquist {
                radius: op.radius(),
                nyquist,
            });
        }
    }
    let flux = s.e.mul_scalar(&s.rho);
    let rho_t = cut(cutoff, ops::lap(&s.rho).sub(&ops::div(&flux)));
    let j = current_density(s, cutoff);
    Ok(Tendency {
        rho: rho_t,
        e: ops::curl(&s.b).sub(&j),
        b: ops::curl(&s.e).scale(-1.0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussResiduals {
    /// `‖div E − ρ‖_{L²}`.
    pub e_residual: f64,
    /// `‖div B‖_{L²}`.
    pub b_residual: f64,
}

pub fn gauss_residuals(s: &State) -> GaussResiduals {
    GaussResiduals {
        e_residual: ops::l2_sq(&ops::div(&s.e).sub(&s.rho)).sqrt(),
        b_residual: ops::l2_sq(&ops::div(&s.b)).sqrt(),
    }
}

/// Terms of `d/dt ½(‖ρ‖²+‖E‖²+‖B‖²) + ‖∇ρ‖² = I₁+I₂+I₃+I₄`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyReport {
    pub l2_rho_sq: f64,
    pub l2_e_sq: f64,
    pub l2_b_sq: f64,
    pub grad_rho_l2_sq: f64,
    /// `−∫ρE·∇ρ`.
    pub i1: f64,
    /// `−∫ρ³`.
    pub i2: f64,
    /// `−∫ρ|E|²`.
    pub i3: f64,
    /// `∫E·∇ρ`.
    pub i4: f64,
    /// `½∫ρ³`, equal to `I₁` on Gauss-compatible states.
    pub i1_closed: f64,
    /// `−∫ρ²`, equal to `I₄` on Gauss-compatible states.
    pub i4_closed: f64,
    /// Balance residual; only known once a time derivative is available.
    pub identity_residual: Option<f64>,
}

impl EnergyReport {
    /// `½(‖ρ‖² + ‖E‖² + ‖B‖²)`.
    pub fn energy(&self) -> f64 {
        0.5 * (self.l2_rho_sq + self.l2_e_sq + self.l2_b_sq)
    }

    pub fn source(&self) -> f64 {
        self.i1 + self.i2 + self.i3 + self.i4
    }
}

pub fn energy_identity_terms(s: &State) -> EnergyReport {
    let rho = &s.rho;
    let grad_rho = ops::grad(rho);
    let rho2 = rho.mul(rho);
    let rho3 = rho2.mul(rho);
    EnergyReport {
        l2_rho_sq: ops::l2_sq(rho),
        l2_e_sq: s.e.components().iter().map(ops::l2_sq).sum(),
        l2_b_sq: s.b.components().iter().map(ops::l2_sq).sum(),
        grad_rho_l2_sq: ops::grad_l2_sq(rho),
        i1: -s.e.dot(&grad_rho).mul(rho).integral(),
        i2: -rho3.integral(),
        i3: -s.e.norm_sq().mul(rho).integral(),
        i4: s.e.dot(&grad_rho).integral(),
        i1_closed: 0.5 * rho3.integral(),
        i4_closed: -rho2.integral(),
        identity_residual: None,
    }
}

/// Terms of `d/dt ½‖∇F‖² + ‖∇²ρ‖² = J₁+…+J₆` with `F = (ρ, E, B)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct H1Report {
    /// `‖∇ρ‖² + ‖∇E‖² + ‖∇B‖²`.
    pub grad_f_l2_sq: f64,
    pub hess_rho_l2_sq: f64,
    /// `∫∂ᵢ∂ₐρ ∂ᵢEₐ`.
    pub j1: f64,
    /// `−∫∂ᵢρ Eₐ ∂ᵢEₐ`.
    pub j2: f64,
    /// `−∫ρ |∇E|²`.
    pub j3: f64,
    /// `−∫∂ᵢEₐ ∂ₐρ ∂ᵢρ`.
    pub j4: f64,
    /// `−∫Eₐ ∂ᵢ∂ₐρ ∂ᵢρ`.
    pub j5: f64,
    /// `−2∫ρ|∇ρ|²`.
    pub j6: f64,
    /// `½∫ρ|∇ρ|²`, equal to `J₅` on Gauss-compatible states.
    pub j5_closed: f64,
}

impl H1Report {
    pub fn source(&self) -> f64 {
        self.j1 + self.j2 + self.j3 + self.j4 + self.j5 + self.j6
    }
}

/// `∂ᵢvₐ` for `i ∈ {1,2}`, `a ∈ {1,2,3}`, indexed `[i][a]`.
fn jacobian(v: &VectorField3) -> [[ScalarField; 3]; 2] {
    let g = v.grid();
    let d = |i: usize, a: usize| ScalarField::from_spectrum(g, ops::deriv_spec(g, v.component(a).spectrum(), i));
    [[d(0, 0), d(0, 1), d(0, 2)], [d(1, 0), d(1, 1), d(1, 2)]]
}

pub fn h1_balance_terms(s: &State) -> H1Report {
    let g = s.grid();
    let rho = &s.rho;
    let grad_rho = ops::grad(rho);
    let dr = [grad_rho.component(0), grad_rho.component(1)];
    let hess = jacobian(&grad_rho);
    let de = jacobian(&s.e);
    let grad_rho_sq = dr[0].mul(dr[0]).add(&dr[1].mul(dr[1]));

    let mut j1 = ScalarField::zeros(g);
    let mut j2 = ScalarField::zeros(g);
    let mut de_sq = ScalarField::zeros(g);
    let mut j4 = ScalarField::zeros(g);
    let mut j5 = ScalarField::zeros(g);
    for i in 0..2 {
        for a in 0..3 {
            j2 = j2.add(&dr[i].mul(s.e.component(a)).mul(&de[i][a]));
            de_sq = de_sq.add(&de[i][a].mul(&de[i][a]));
        }
        for a in 0..2 {
            j1 = j1.add(&hess[i][a].mul(&de[i][a]));
            j4 = j4.add(&de[i][a].mul(dr[a]).mul(dr[i]));
            j5 = j5.add(&s.e.component(a).mul(&hess[i][a]).mul(dr[i]));
        }
    }
    let rho_grad_sq = rho.mul(&grad_rho_sq).integral();
    let grad_sq = |v: &VectorField3| v.components().iter().map(ops::grad_l2_sq).sum::<f64>();
    H1Report {
        grad_f_l2_sq: ops::grad_l2_sq(rho) + grad_sq(&s.e) + grad_sq(&s.b),
        hess_rho_l2_sq: ops::hess_l2_sq(rho),
        j1: j1.integral(),
        j2: -j2.integral(),
        j3: -rho.mul(&de_sq).integral(),
        j4: -j4.integral(),
        j5: -j5.integral(),
        j6: -2.0 * rho_grad_sq,
        j5_closed: 0.5 * rho_grad_sq,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyFlux {
    /// `‖∇√ρ − ½E√ρ‖_{L²}`.
    pub h_l2: f64,
}

/// Needs `ρ > 0` everywhere, which excludes Gauss-compatible data on the
/// torus; intended for fixtures with the constraint relaxed.
pub fn entropy_flux(s: &State) -> Result<EntropyFlux, DynamicsError> {
    let min = s.rho.min();
    if !(min > 0.0) {
        return Err(DynamicsError::PositivityViolation { min });
    }
    let sqrt_rho = s.rho.map(f64::sqrt);
    let h = ops::grad(&sqrt_rho).sub(&s.e.mul_scalar(&sqrt_rho).scale(0.5));
    Ok(EntropyFlux {
        h_l2: h.components().iter().map(ops::l2_sq).sum::<f64>().sqrt(),
    })
}
