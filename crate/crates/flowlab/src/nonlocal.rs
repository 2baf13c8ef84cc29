//! The exactly solvable non-local cubic flow.
//!
//! For a' = (L_l - L_k - |a|^2) a_k with L_k = lambda_k^m the solution is
//! known in closed form: each coefficient keeps its linear exponential and
//! the whole vector is divided by a common scalar sqrt(D(t)). This module
//! evaluates that solution in a numerically robust way (log-space, grouped
//! by eigenvalue multiplicity), enumerates the branching equilibrium
//! manifolds S_j, verifies the kernel-dimension hypothesis at random points
//! of a manifold, and classifies the asymptotic convergence rate of an
//! initial condition mode by mode.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::{EigenBasis, SpectralField};
use crate::error::{Error, Result};
use crate::flows::FlowSpec;

/// ln of the smallest positive normal double, with margin; exponents below
/// this underflow to zero.
const LN_UNDERFLOW: f64 = -745.0;

/// Kernel tolerance scaled by the spectral radius of the Jacobian.
pub fn kernel_tolerance(spectral_radius: f64) -> f64 {
    1e-8 * (1.0 + spectral_radius)
}

/// Eigenvalues this close to each other are treated as one multiplicity
/// group (matches the grouping tolerance of the basis).
const GROUP_TOL: f64 = 1e-9;

/// Smallest admissible spectral gap at a hypothesis check.
pub const GAP_FLOOR: f64 = 1e-6;

/// Sum of squared coefficients per multiplicity group.
fn group_mass(basis: &EigenBasis, a: &SpectralField) -> Vec<f64> {
    let mut mass = vec![0.0; basis.groups.len()];
    for (g, group) in basis.groups.iter().enumerate() {
        mass[g] = group
            .positions
            .iter()
            .map(|&p| a.coeffs[p] * a.coeffs[p])
            .sum();
    }
    mass
}

/// Exact solution of the non-local cubic flow at time t >= 0.
///
/// Every coefficient evolves as a_k(0) e^{(L_l - L_k) t} / sqrt(D(t)) with a
/// shared denominator. D(t) mixes terms of wildly different exponential
/// scales, so it is assembled in log space: with growth rates
/// g = 2 (L_l - L_g) per group, factor out M = max(0, max_g (g t + ln c_g))
/// and sum the residual exponentials, which are all <= 1.
pub fn closed_form(
    basis: &EigenBasis,
    init: &SpectralField,
    l_group: usize,
    m: u32,
    t: f64,
) -> Result<SpectralField> {
    if init.len() != basis.len() {
        return Err(Error::SizeMismatch {
            expected: basis.len(),
            got: init.len(),
        });
    }
    if !(t >= 0.0) {
        return Err(Error::Config("closed form requires t >= 0".into()));
    }
    let l = basis
        .groups
        .get(l_group)
        .ok_or(Error::UnknownGroup(l_group as f64))?
        .eigenvalue
        .powi(m as i32);
    let powered = basis.powered_eigenvalues(m);
    let mass = group_mass(basis, init);

    // D(t) = 1 + 2 A_l t + sum_{g != l} (A_g / (L_l - L_g)) (e^{2(L_l - L_g) t} - 1)
    // written as sum of exponentials c_g e^{r_g t} plus an affine part.
    // Split: groups with L_g > L_l decay (bounded by their t = 0 value),
    // groups with L_g < L_l grow and dominate; handle both via one
    // log-sum-exp with the affine part folded in at its own scale.
    let mut ln_terms: Vec<(f64, f64)> = Vec::new(); // (ln c, rate), term = c e^{rate t}
    let mut affine = 1.0 + 2.0 * mass[l_group] * t;
    for (g, group) in basis.groups.iter().enumerate() {
        if g == l_group || mass[g] == 0.0 {
            continue;
        }
        let lg = group.eigenvalue.powi(m as i32);
        if (lg - l).abs() < GROUP_TOL {
            // Numerically resonant with the l-group: same 2 A t behavior.
            affine += 2.0 * mass[g] * t;
            continue;
        }
        let c = mass[g] / (l - lg);
        // c (e^{2(l - lg) t} - 1) = c e^{rate t} - c
        ln_terms.push((c.abs().ln(), 2.0 * (l - lg)));
        affine -= c;
        // Sign bookkeeping: for lg < l, c > 0 (growing term added, constant
        // subtracted); for lg > l, c < 0 so the exponential term is negative
        // but decays, and -c > 0 joins the affine part. Negative decaying
        // terms are folded with an explicit sign below.
    }
    // Evaluate ln D = M + ln(sum of signed terms e^{ln c + r t - M}).
    let mut scale = if affine > 0.0 { affine.ln() } else { 0.0 };
    for &(ln_c, rate) in &ln_terms {
        scale = scale.max(ln_c + rate * t);
    }
    let mut inner = 0.0;
    if affine != 0.0 {
        let e = affine.abs().ln() - scale;
        if e > LN_UNDERFLOW {
            inner += affine.signum() * e.exp();
        }
    }
    for (g, group) in basis.groups.iter().enumerate() {
        if g == l_group || mass[g] == 0.0 {
            continue;
        }
        let lg = group.eigenvalue.powi(m as i32);
        if (lg - l).abs() < GROUP_TOL {
            continue;
        }
        let c = mass[g] / (l - lg);
        let e = c.abs().ln() + 2.0 * (l - lg) * t - scale;
        if e > LN_UNDERFLOW {
            inner += c.signum() * e.exp();
        }
    }
    if !(inner > 0.0) {
        return Err(Error::Overflow);
    }
    let ln_d = scale + inner.ln();

    // a_k(t) = a_k(0) exp((l - L_k) t - ln D / 2), evaluated per coefficient
    // in log space so that huge decaying exponents underflow cleanly to 0.
    let mut out = DVector::zeros(init.len());
    for k in 0..init.len() {
        let a0 = init.coeffs[k];
        if a0 == 0.0 {
            continue;
        }
        let e = (l - powered[k]) * t - 0.5 * ln_d;
        if e > 709.0 {
            return Err(Error::Overflow);
        }
        out[k] = if e > LN_UNDERFLOW { a0 * e.exp() } else { 0.0 };
    }
    Ok(SpectralField { coeffs: out })
}

/// One branching equilibrium manifold: the sphere of radius
/// sqrt(L_l - L_j) inside the eigenspace of lambda_j.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumManifold {
    /// Index of the eigenvalue group spanning the manifold.
    pub j_group: usize,
    /// Index of the group fixing the linear gain.
    pub l_group: usize,
    /// Polyharmonic order of the linear part.
    pub m: u32,
    /// Radius sqrt(lambda_l^m - lambda_j^m).
    pub radius: f64,
    /// Dimension of the sphere (multiplicity of lambda_j minus one).
    pub dim: usize,
}

/// The nonzero equilibrium manifold for a given pair (j, l), if it exists.
pub fn equilibrium_manifold(
    basis: &EigenBasis,
    j_group: usize,
    l_group: usize,
    m: u32,
) -> Result<EquilibriumManifold> {
    let lam_j = basis
        .groups
        .get(j_group)
        .ok_or(Error::UnknownGroup(j_group as f64))?
        .eigenvalue;
    let lam_l = basis
        .groups
        .get(l_group)
        .ok_or(Error::UnknownGroup(l_group as f64))?
        .eigenvalue;
    let lj = lam_j.powi(m as i32);
    let ll = lam_l.powi(m as i32);
    if ll <= lj {
        return Err(Error::NoEquilibrium {
            lambda_j: lam_j,
            lambda_l: lam_l,
        });
    }
    Ok(EquilibriumManifold {
        j_group,
        l_group,
        m,
        radius: (ll - lj).sqrt(),
        dim: basis.groups[j_group].positions.len() - 1,
    })
}

/// All nonzero equilibrium manifolds of the flow on this basis.
pub fn equilibrium_manifolds(
    basis: &EigenBasis,
    l_group: usize,
    m: u32,
) -> Result<Vec<EquilibriumManifold>> {
    basis
        .groups
        .iter()
        .enumerate()
        .filter(|(_, g)| {
            g.eigenvalue.powi(m as i32)
                < basis.groups[l_group].eigenvalue.powi(m as i32)
        })
        .map(|(j, _)| equilibrium_manifold(basis, j, l_group, m))
        .collect()
}

/// Nearest point of the manifold to `state`: normalize the projection onto
/// the eigenspace of lambda_j to the manifold radius.
pub fn project_onto_manifold(
    basis: &EigenBasis,
    manifold: &EquilibriumManifold,
    state: &SpectralField,
) -> Result<SpectralField> {
    if state.len() != basis.len() {
        return Err(Error::SizeMismatch {
            expected: basis.len(),
            got: state.len(),
        });
    }
    let positions = &basis.groups[manifold.j_group].positions;
    let norm: f64 = positions
        .iter()
        .map(|&p| state.coeffs[p] * state.coeffs[p])
        .sum::<f64>()
        .sqrt();
    if norm < 1e-12 {
        return Err(Error::DegenerateProjection);
    }
    let mut out = DVector::zeros(state.len());
    for &p in positions {
        out[p] = manifold.radius * state.coeffs[p] / norm;
    }
    Ok(SpectralField { coeffs: out })
}

/// How a solution of the non-local flow approaches its limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateCase {
    /// Lowest excited eigenvalue above lambda_l: exponential decay to zero.
    DecayExponential,
    /// Lowest excited eigenvalue equals lambda_l: algebraic decay t^{-1/2}.
    DecayAlgebraic,
    /// Lowest excited eigenvalue below lambda_l: convergence to a nonzero
    /// equilibrium at rate e^{-2(L_l - L_j) t} with a linear-in-t prefactor.
    ConvergeNonzero,
}

/// Predicted asymptotics of one initial condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateClassification {
    pub case: RateCase,
    /// Group carrying the lowest excited eigenvalue.
    pub j_group: usize,
    /// Exponential rate (cases i and iii) or the algebraic exponent 1/2.
    pub predicted_rate: f64,
    /// Norm of the limit equilibrium (zero in the decay cases).
    pub limit_norm: f64,
}

/// Modes smaller than this are treated as unexcited when classifying.
const EXCITATION_FLOOR: f64 = 1e-14;

/// Classify the convergence of `init` under the non-local cubic flow by
/// the lowest excited eigenvalue group.
pub fn classify_rate(
    basis: &EigenBasis,
    init: &SpectralField,
    l_group: usize,
    m: u32,
) -> Result<RateClassification> {
    if init.len() != basis.len() {
        return Err(Error::SizeMismatch {
            expected: basis.len(),
            got: init.len(),
        });
    }
    let mass = group_mass(basis, init);
    let j_group = mass
        .iter()
        .position(|&s| s.sqrt() > EXCITATION_FLOOR)
        .ok_or(Error::ZeroState)?;
    let lj = basis.groups[j_group].eigenvalue.powi(m as i32);
    let ll = basis.groups[l_group].eigenvalue.powi(m as i32);
    Ok(if lj > ll {
        RateClassification {
            case: RateCase::DecayExponential,
            j_group,
            predicted_rate: lj - ll,
            limit_norm: 0.0,
        }
    } else if (lj - ll).abs() < GROUP_TOL {
        RateClassification {
            case: RateCase::DecayAlgebraic,
            j_group,
            predicted_rate: 0.5,
            limit_norm: 0.0,
        }
    } else {
        RateClassification {
            case: RateCase::ConvergeNonzero,
            j_group,
            predicted_rate: 2.0 * (ll - lj),
            limit_norm: (ll - lj).sqrt(),
        }
    })
}

/// Outcome of the kernel-dimension check at sampled manifold points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub manifold: EquilibriumManifold,
    /// Kernel dimension observed at every sample (must equal manifold.dim).
    pub kernel_dims: Vec<usize>,
    /// Smallest nonzero |eigenvalue| over all samples.
    pub min_gap: f64,
    /// Largest |eigenvalue| over all samples (sets the kernel tolerance).
    pub spectral_radius: f64,
    pub passed: bool,
}

/// Sample random points of the manifold, linearize the flow there, and
/// check that the Jacobian kernel has exactly the manifold dimension while
/// all other eigenvalues stay away from zero.
pub fn hypothesis_check(
    basis: &EigenBasis,
    j_group: usize,
    l_group: usize,
    m: u32,
    n_samples: usize,
    seed: u64,
) -> Result<HypothesisCheck> {
    let manifold = equilibrium_manifold(basis, j_group, l_group, m)?;
    let flow = FlowSpec::NonlocalCubic { l_group, m };
    let positions = basis.groups[j_group].positions.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kernel_dims = Vec::with_capacity(n_samples);
    let mut min_gap = f64::INFINITY;
    let mut spectral_radius: f64 = 0.0;
    for _ in 0..n_samples.max(1) {
        // Uniform point of the sphere: normalized standard Gaussian inside
        // the eigenspace, scaled to the manifold radius.
        let mut point = SpectralField::zeros(basis.len());
        loop {
            let mut norm_sq = 0.0;
            for &p in &positions {
                let g: f64 = StandardNormal.sample(&mut rng);
                point.coeffs[p] = g;
                norm_sq += g * g;
            }
            if norm_sq > 1e-12 {
                let scale = manifold.radius / norm_sq.sqrt();
                for &p in &positions {
                    point.coeffs[p] *= scale;
                }
                break;
            }
        }
        let jac = flow.jacobian(basis, &point)?;
        let eig = jac.symmetric_eigen();
        let radius = eig.eigenvalues.amax();
        spectral_radius = spectral_radius.max(radius);
        let tol = kernel_tolerance(radius);
        let mut kernel = 0;
        for &v in eig.eigenvalues.iter() {
            if v.abs() <= tol {
                kernel += 1;
            } else {
                min_gap = min_gap.min(v.abs());
            }
        }
        kernel_dims.push(kernel);
    }
    let passed =
        kernel_dims.iter().all(|&k| k == manifold.dim) && min_gap >= GAP_FLOOR;
    Ok(HypothesisCheck {
        manifold,
        kernel_dims,
        min_gap,
        spectral_radius,
        passed,
    })
}
