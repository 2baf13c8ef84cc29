//! Newton refinement of equilibria and linearized spectrum analysis.
//!
//! The Jacobians of every autonomous flow in the catalog are symmetric, so
//! the Newton step is solved through a symmetric eigendecomposition. At a
//! degenerate equilibrium (a point of a positive-dimensional manifold) the
//! Jacobian has a nontrivial kernel; the step is taken in the complement of
//! the numerical kernel, which converges to the nearest manifold point
//! instead of diverging along the flat directions.

use nalgebra::{DMatrix, DVector};

use crate::basis::{EigenBasis, SpectralField};
use crate::error::{Error, Result};
use crate::flows::FlowSpec;
use crate::nonlocal::kernel_tolerance;

/// An equilibrium with its linearization data.
#[derive(Clone, Debug, PartialEq)]
pub struct Equilibrium {
    pub state: SpectralField,
    /// ||rhs|| at the returned state.
    pub residual_norm: f64,
    /// Eigenvalues of the Jacobian, ascending.
    pub spectrum: Vec<f64>,
    /// Number of eigenvalues inside the kernel tolerance.
    pub kernel_dim: usize,
    /// Smallest |eigenvalue| outside the kernel tolerance.
    pub spectral_gap: f64,
}

const MAX_NEWTON_ITERS: usize = 50;
const MAX_BACKTRACKS: usize = 30;

/// Solve J s = -r in the complement of the numerical kernel of J.
fn kernel_aware_solve(jac: &DMatrix<f64>, residual: &DVector<f64>) -> Result<DVector<f64>> {
    let eig = jac.clone().symmetric_eigen();
    let radius = eig.eigenvalues.amax();
    let tol = kernel_tolerance(radius);
    let mut any = false;
    let mut step = DVector::zeros(residual.len());
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam.abs() <= tol {
            continue;
        }
        any = true;
        let v = eig.eigenvectors.column(i);
        step += (-(v.dot(residual)) / lam) * v;
    }
    if !any {
        return Err(Error::NewtonSingular);
    }
    Ok(step)
}

/// Spectrum, kernel dimension, and gap of the linearization at `state`.
pub fn analyze_spectrum(
    flow: &FlowSpec,
    basis: &EigenBasis,
    state: &SpectralField,
) -> Result<(Vec<f64>, usize, f64)> {
    let jac = flow.jacobian(basis, state)?;
    let eig = jac.symmetric_eigen();
    let mut spectrum: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    spectrum.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tol = kernel_tolerance(eig.eigenvalues.amax());
    let kernel_dim = spectrum.iter().filter(|v| v.abs() <= tol).count();
    let gap = spectrum
        .iter()
        .map(|v| v.abs())
        .filter(|v| *v > tol)
        .fold(f64::INFINITY, f64::min);
    Ok((spectrum, kernel_dim, gap))
}

/// Refine `guess` to an equilibrium of the flow by a damped Newton method
/// with backtracking on the residual norm.
pub fn newton_equilibrium(
    flow: &FlowSpec,
    basis: &EigenBasis,
    guess: &SpectralField,
    tol: f64,
) -> Result<Equilibrium> {
    if flow.is_perturbed() {
        return Err(Error::PerturbedFlow("equilibrium refinement"));
    }
    let mut state = guess.clone();
    let mut residual = flow.rhs(basis, &state, 0.0)?.coeffs;
    let mut res_norm = residual.norm();
    for iter in 0..MAX_NEWTON_ITERS {
        if res_norm <= tol {
            let (spectrum, kernel_dim, spectral_gap) = analyze_spectrum(flow, basis, &state)?;
            return Ok(Equilibrium {
                state,
                residual_norm: res_norm,
                spectrum,
                kernel_dim,
                spectral_gap,
            });
        }
        let jac = flow.jacobian(basis, &state)?;
        let step = kernel_aware_solve(&jac, &residual)?;
        let mut damping = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let trial = SpectralField {
                coeffs: &state.coeffs + damping * &step,
            };
            match flow.rhs(basis, &trial, 0.0) {
                Ok(r) => {
                    let n = r.coeffs.norm();
                    if n < res_norm {
                        state = trial;
                        residual = r.coeffs;
                        res_norm = n;
                        accepted = true;
                        break;
                    }
                }
                Err(Error::Overflow) => {}
                Err(e) => return Err(e),
            }
            damping /= 2.0;
        }
        if !accepted {
            return Err(Error::NewtonNoConvergence {
                iterations: iter + 1,
                residual: res_norm,
            });
        }
    }
    Err(Error::NewtonNoConvergence {
        iterations: MAX_NEWTON_ITERS,
        residual: res_norm,
    })
}
