//! The catalog of right-hand sides: local semilinear flows u_t = Lap u + f(u),
//! the exactly solvable non-local cubic flow, its non-local generalization,
//! and non-autonomous perturbations u_t = V'(u) + h(t) W'(u).
//!
//! All operations are pure functions of an immutable `FlowSpec` and a basis.
//! The sign convention everywhere: eigenvalues are taken from -Laplace, so
//! they are positive and nondecreasing, and the non-local rhs component is
//! (lambda_l^m - lambda_k^m - |a|^2) a_k.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::basis::{EigenBasis, SpectralField};
use crate::error::{Error, Result};

/// Scalar nonlinearity f with derivative and antiderivative F (F(0) = 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    /// f(u) = 0 (pure heat).
    Zero,
    /// f(u) = u.
    Identity,
    /// f(u) = u - u^3.
    AllenCahn,
    /// f(u) = u^3 (non-coercive; admits finite-time blow-up).
    Cubic,
    /// f(u) = u - e^{-1/u^2}, with f(0) = 0 by continuity.
    FlatSmooth,
}

/// Below this magnitude the flat correction e^{-1/u^2} underflows anyway;
/// return the linear part exactly.
const FLAT_CUTOFF: f64 = 1e-8;

impl Nonlinearity {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Identity => u,
            Nonlinearity::AllenCahn => u - u * u * u,
            Nonlinearity::Cubic => u * u * u,
            Nonlinearity::FlatSmooth => {
                if u.abs() < FLAT_CUTOFF {
                    u
                } else {
                    u - (-1.0 / (u * u)).exp()
                }
            }
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Identity => 1.0,
            Nonlinearity::AllenCahn => 1.0 - 3.0 * u * u,
            Nonlinearity::Cubic => 3.0 * u * u,
            Nonlinearity::FlatSmooth => {
                if u.abs() < FLAT_CUTOFF {
                    1.0
                } else {
                    1.0 - (2.0 / (u * u * u)) * (-1.0 / (u * u)).exp()
                }
            }
        }
    }

    /// Antiderivative F with F(0) = 0.
    pub fn potential(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Identity => 0.5 * u * u,
            Nonlinearity::AllenCahn => 0.5 * u * u - 0.25 * u.powi(4),
            Nonlinearity::Cubic => 0.25 * u.powi(4),
            Nonlinearity::FlatSmooth => {
                // int_0^u e^{-1/s^2} ds = u e^{-1/u^2} - sqrt(pi) erfc(1/u), odd in u.
                let x = u.abs();
                if x < FLAT_CUTOFF {
                    return 0.5 * u * u;
                }
                let tail = x * (-1.0 / (x * x)).exp() - std::f64::consts::PI.sqrt() * erfc(1.0 / x);
                0.5 * u * u - u.signum() * tail
            }
        }
    }
}

/// Smooth non-analytic growth function g for the non-local general flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthFn {
    /// g(s) = s^{3/2} e^{-1/s} for s > 0, extended by 0 at s = 0.
    SmoothLog,
}

impl GrowthFn {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            GrowthFn::SmoothLog => {
                if s <= 0.0 {
                    0.0
                } else {
                    s.powf(1.5) * (-1.0 / s).exp()
                }
            }
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            GrowthFn::SmoothLog => {
                if s <= 0.0 {
                    0.0
                } else {
                    (-1.0 / s).exp() * (1.5 * s.sqrt() + 1.0 / s.sqrt())
                }
            }
        }
    }

    pub fn second_derivative(&self, s: f64) -> f64 {
        match self {
            GrowthFn::SmoothLog => {
                if s <= 0.0 {
                    0.0
                } else {
                    let e = (-1.0 / s).exp();
                    e * ((1.5 * s.sqrt() + 1.0 / s.sqrt()) / (s * s) + 0.75 / s.sqrt()
                        - 0.5 / s.powf(1.5))
                }
            }
        }
    }
}

/// Decay rate h(t) of a non-autonomous perturbation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayProfile {
    /// h(t) = 1/(1+t)^alpha.
    PowerLaw { alpha: f64 },
    /// h(t) = e^{-rate t}.
    Exponential { rate: f64 },
}

impl DecayProfile {
    pub fn value(&self, t: f64) -> f64 {
        self.ln_value(t).exp()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.log_derivative(t) * self.value(t)
    }

    /// ln h(t); avoids underflow in monotonicity probes at large t.
    pub fn ln_value(&self, t: f64) -> f64 {
        match *self {
            DecayProfile::PowerLaw { alpha } => -alpha * (1.0 + t).ln(),
            DecayProfile::Exponential { rate } => -rate * t,
        }
    }

    /// h'(t)/h(t).
    pub fn log_derivative(&self, t: f64) -> f64 {
        match *self {
            DecayProfile::PowerLaw { alpha } => -alpha / (1.0 + t),
            DecayProfile::Exponential { rate } => -rate,
        }
    }

    /// int_0^infty sqrt(h), when finite in closed form.
    pub fn sqrt_integral(&self) -> Option<f64> {
        match *self {
            DecayProfile::PowerLaw { alpha } if alpha > 2.0 => Some(2.0 / (alpha - 2.0)),
            DecayProfile::PowerLaw { .. } => None,
            DecayProfile::Exponential { rate } if rate > 0.0 => Some(2.0 / rate),
            DecayProfile::Exponential { .. } => None,
        }
    }

    /// int_t^infty sqrt(h(s)) ds, when finite in closed form.
    pub fn sqrt_tail_integral(&self, t: f64) -> Option<f64> {
        match *self {
            DecayProfile::PowerLaw { alpha } if alpha > 2.0 => {
                Some((2.0 / (alpha - 2.0)) * (1.0 + t).powf(-(alpha - 2.0) / 2.0))
            }
            DecayProfile::PowerLaw { .. } => None,
            DecayProfile::Exponential { rate } if rate > 0.0 => {
                Some((2.0 / rate) * (-rate * t / 2.0).exp())
            }
            DecayProfile::Exponential { .. } => None,
        }
    }
}

/// A right-hand side from the catalog, with Lyapunov functional and Jacobian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FlowSpec {
    /// u_t = Lap u + f(u), nonlinear term computed pseudospectrally.
    Local { f: Nonlinearity },
    /// u_t = Lap u + lambda_l u - (int u^2) u, optionally with (-Lap)^m, m >= 1.
    NonlocalCubic { l_group: usize, m: u32 },
    /// u_t = Lap u + mu u - g'(int u^2) u.
    NonlocalGeneral { mu: f64, g: GrowthFn },
    /// u_t = V'(u) + h(t) W'(u), one level of perturbation only.
    Perturbed {
        base: Box<FlowSpec>,
        h: DecayProfile,
        w_prime: Nonlinearity,
    },
}

impl FlowSpec {
    pub fn perturbed(base: FlowSpec, h: DecayProfile, w_prime: Nonlinearity) -> Result<Self> {
        if matches!(base, FlowSpec::Perturbed { .. }) {
            return Err(Error::NestedPerturbation);
        }
        Ok(FlowSpec::Perturbed {
            base: Box::new(base),
            h,
            w_prime,
        })
    }

    pub fn is_perturbed(&self) -> bool {
        matches!(self, FlowSpec::Perturbed { .. })
    }

    /// The perturbation (h, W') if present.
    pub fn perturbation(&self) -> Option<(DecayProfile, Nonlinearity)> {
        match self {
            FlowSpec::Perturbed { h, w_prime, .. } => Some((*h, *w_prime)),
            _ => None,
        }
    }

    pub fn base(&self) -> &FlowSpec {
        match self {
            FlowSpec::Perturbed { base, .. } => base,
            other => other,
        }
    }

    /// Effective linear coefficient lambda_l^m of the non-local cubic flow.
    pub fn nonlocal_lambda_l(&self, basis: &EigenBasis) -> Result<f64> {
        match self {
            FlowSpec::NonlocalCubic { l_group, m } => {
                let group = basis
                    .groups
                    .get(*l_group)
                    .ok_or(Error::UnknownGroup(*l_group as f64))?;
                Ok(group.eigenvalue.powi(*m as i32))
            }
            _ => Err(Error::Config("not a non-local cubic flow".into())),
        }
    }

    /// Diagonal of the stiff linear part a_k' = L_k a_k + N(a)_k.
    pub fn linear_coeffs(&self, basis: &EigenBasis) -> Result<DVector<f64>> {
        match self {
            FlowSpec::Local { .. } => Ok(-basis.powered_eigenvalues(1)),
            FlowSpec::NonlocalCubic { m, .. } => {
                let lam_l = self.nonlocal_lambda_l(basis)?;
                let lam = basis.powered_eigenvalues(*m);
                Ok(lam.map(|l| lam_l - l))
            }
            FlowSpec::NonlocalGeneral { mu, .. } => {
                let lam = basis.powered_eigenvalues(1);
                Ok(lam.map(|l| mu - l))
            }
            FlowSpec::Perturbed { base, .. } => base.linear_coeffs(basis),
        }
    }

    /// Non-stiff remainder N(a, t) of the rhs.
    pub fn nonlinear_rhs(
        &self,
        basis: &EigenBasis,
        state: &SpectralField,
        t: f64,
    ) -> Result<DVector<f64>> {
        match self {
            FlowSpec::Local { f } => {
                if *f == Nonlinearity::Zero {
                    return Ok(DVector::zeros(state.len()));
                }
                let values = basis.synthesize(state)?;
                let fv = values.map(|u| f.eval(u));
                Ok(basis.analyze(&fv)?.coeffs)
            }
            FlowSpec::NonlocalCubic { .. } => {
                let s = state.coeffs.norm_squared();
                Ok(-s * &state.coeffs)
            }
            FlowSpec::NonlocalGeneral { g, .. } => {
                let s = state.coeffs.norm_squared();
                Ok(-g.derivative(s) * &state.coeffs)
            }
            FlowSpec::Perturbed { base, h, w_prime } => {
                let mut n = base.nonlinear_rhs(basis, state, t)?;
                let ht = h.value(t);
                match w_prime {
                    // W'(u) = u maps to the coefficients directly.
                    Nonlinearity::Identity => n += ht * &state.coeffs,
                    other => {
                        let values = basis.synthesize(state)?;
                        let wv = values.map(|u| other.eval(u));
                        n += ht * basis.analyze(&wv)?.coeffs;
                    }
                }
                Ok(n)
            }
        }
    }

    /// Time derivative of the coefficients.
    pub fn rhs(&self, basis: &EigenBasis, state: &SpectralField, t: f64) -> Result<SpectralField> {
        if !state.is_finite() {
            return Err(Error::Overflow);
        }
        let linear = self.linear_coeffs(basis)?;
        let mut out = self.nonlinear_rhs(basis, state, t)?;
        out += linear.component_mul(&state.coeffs);
        if !out.iter().all(|x| x.is_finite()) {
            return Err(Error::Overflow);
        }
        Ok(SpectralField { coeffs: out })
    }

    /// Lyapunov functional V; increases along unperturbed orbits.
    pub fn lyapunov(&self, basis: &EigenBasis, state: &SpectralField) -> Result<f64> {
        match self {
            FlowSpec::Local { f } => {
                let lam = basis.powered_eigenvalues(1);
                let grad_sq: f64 = lam
                    .iter()
                    .zip(state.coeffs.iter())
                    .map(|(&l, &a)| l * a * a)
                    .sum();
                let pot = basis.quadrature_of(state, |u| f.potential(u))?;
                Ok(-0.5 * grad_sq + pot)
            }
            FlowSpec::NonlocalCubic { m, .. } => {
                let lam_l = self.nonlocal_lambda_l(basis)?;
                let lam = basis.powered_eigenvalues(*m);
                let weighted: f64 = lam
                    .iter()
                    .zip(state.coeffs.iter())
                    .map(|(&l, &a)| l * a * a)
                    .sum();
                let s = state.coeffs.norm_squared();
                Ok(-0.5 * weighted + 0.5 * lam_l * s - 0.25 * s * s)
            }
            FlowSpec::NonlocalGeneral { mu, g } => {
                let lam = basis.powered_eigenvalues(1);
                let weighted: f64 = lam
                    .iter()
                    .zip(state.coeffs.iter())
                    .map(|(&l, &a)| l * a * a)
                    .sum();
                let s = state.coeffs.norm_squared();
                Ok(-0.5 * weighted + 0.5 * mu * s - g.eval(s))
            }
            FlowSpec::Perturbed { .. } => Err(Error::UndefinedPotential),
        }
    }

    /// V of the autonomous base flow; what a trajectory records for
    /// perturbed systems (their energy identity combines it with h W).
    pub fn base_lyapunov(&self, basis: &EigenBasis, state: &SpectralField) -> Result<f64> {
        self.base().lyapunov(basis, state)
    }

    /// W(u) = int W(u(x)) dx of the perturbation potential.
    pub fn perturbation_energy(&self, basis: &EigenBasis, state: &SpectralField) -> Result<f64> {
        match self {
            FlowSpec::Perturbed { w_prime, .. } => match w_prime {
                Nonlinearity::Identity => Ok(0.5 * state.coeffs.norm_squared()),
                other => basis.quadrature_of(state, |u| other.potential(u)),
            },
            _ => Err(Error::Config("flow has no perturbation".into())),
        }
    }

    /// Dense symmetric matrix of the Frechet derivative of the rhs.
    pub fn jacobian(&self, basis: &EigenBasis, state: &SpectralField) -> Result<DMatrix<f64>> {
        let n = basis.len();
        if state.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                got: state.len(),
            });
        }
        match self {
            FlowSpec::Local { f } => {
                let values = basis.synthesize(state)?;
                let fp = values.map(|u| f.derivative(u));
                // J_{kj} = -lambda_k delta_{kj} + sum_x w phi_k(x) f'(u(x)) phi_j(x)
                let mut j = DMatrix::zeros(n, n);
                let e_k = |k: usize| {
                    SpectralField::from_pairs(n, &[(k, 1.0)]).expect("valid position")
                };
                // Columns of the weighted mass matrix via synthesized basis columns.
                let mut phi_cols = Vec::with_capacity(n);
                for k in 0..n {
                    phi_cols.push(basis.synthesize(&e_k(k))?);
                }
                let w = basis.quadrature_weight();
                for row in 0..n {
                    for col in row..n {
                        let mut s = 0.0;
                        for p in 0..fp.len() {
                            s += phi_cols[row][p] * fp[p] * phi_cols[col][p];
                        }
                        s *= w;
                        j[(row, col)] = s;
                        j[(col, row)] = s;
                    }
                }
                let lam = basis.powered_eigenvalues(1);
                for k in 0..n {
                    j[(k, k)] -= lam[k];
                }
                Ok(j)
            }
            FlowSpec::NonlocalCubic { m, .. } => {
                let lam_l = self.nonlocal_lambda_l(basis)?;
                let lam = basis.powered_eigenvalues(*m);
                let s = state.coeffs.norm_squared();
                let mut j = -2.0 * &state.coeffs * state.coeffs.transpose();
                for k in 0..n {
                    j[(k, k)] += lam_l - lam[k] - s;
                }
                Ok(j)
            }
            FlowSpec::NonlocalGeneral { mu, g } => {
                let lam = basis.powered_eigenvalues(1);
                let s = state.coeffs.norm_squared();
                let gp = g.derivative(s);
                let gpp = g.second_derivative(s);
                let mut j = -2.0 * gpp * &state.coeffs * state.coeffs.transpose();
                for k in 0..n {
                    j[(k, k)] += mu - lam[k] - gp;
                }
                Ok(j)
            }
            FlowSpec::Perturbed { .. } => Err(Error::PerturbedFlow("jacobian")),
        }
    }
}
