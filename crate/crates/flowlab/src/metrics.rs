//! Convergence diagnostics: energy identity residual, decay-rate fitting,
//! tail-energy displacement bounds, perturbation decay-class checks,
//! Lojasiewicz exponent estimation, omega-limit detection, and the scalar
//! slow-decay flows.

use serde::{Deserialize, Serialize};

use crate::basis::{EigenBasis, SpectralField};
use crate::error::{Error, Result};
use crate::flows::{DecayProfile, FlowSpec};
use crate::integrate::{tail_energy, Status, Trajectory};

/// Values below this are at the floor of double-precision trust and are
/// excluded from fits.
const VALUE_FLOOR: f64 = 1e-13;

/// Minimum number of samples a rate fit needs.
const MIN_FIT_SAMPLES: usize = 20;

/// Runner-up residual within this relative margin marks a fit ambiguous.
const MODEL_MARGIN: f64 = 0.05;

/// Relative slack applied when comparing trapezoid tail energies against
/// analytic bounds; the trapezoid rule overestimates convex integrands by
/// O(dt^2), which must not flip an exact-boundary hypothesis.
const TAIL_QUADRATURE_SLACK: f64 = 1e-4;

/// Candidate decay models, all linear in log coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// A e^{-delta t}
    Exponential,
    /// A t^{-p}
    Algebraic,
    /// A (ln t)^{-q}
    Logarithmic,
    /// A t e^{-delta t}
    TExponential,
}

impl RateModel {
    pub const ALL: [RateModel; 4] = [
        RateModel::Exponential,
        RateModel::Algebraic,
        RateModel::Logarithmic,
        RateModel::TExponential,
    ];

    /// (regressor, transformed value) for the log-linear form
    /// ln~value = ln A - rate * regressor; None when t is out of the
    /// model's domain.
    fn log_coords(&self, t: f64, value: f64) -> Option<(f64, f64)> {
        let ln_v = value.ln();
        match self {
            RateModel::Exponential => Some((t, ln_v)),
            RateModel::Algebraic => (t > 0.0).then(|| (t.ln(), ln_v)),
            RateModel::Logarithmic => (t > 1.0).then(|| (t.ln().ln(), ln_v)),
            RateModel::TExponential => (t > 0.0).then(|| (t, ln_v - t.ln())),
        }
    }
}

/// Result of fitting the four candidate models to a decaying series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub model: RateModel,
    /// Prefactor A.
    pub amplitude: f64,
    /// delta, p, or q of the selected model.
    pub rate: f64,
    /// RMS residual on the log scale over the fit window.
    pub residual: f64,
    /// Relative margin of the runner-up residual over the best.
    pub runner_up_margin: f64,
    /// True when the runner-up is within the margin rule.
    pub ambiguous: bool,
    /// (t_start, t_end) of the samples used.
    pub window: (f64, f64),
}

fn linear_regression(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fit the trailing half of the samples above the floor with all four
/// models and select the one with the smallest RMS log residual.
pub fn fit_rate(times: &[f64], values: &[f64]) -> Result<RateFit> {
    if times.len() != values.len() {
        return Err(Error::SizeMismatch {
            expected: times.len(),
            got: values.len(),
        });
    }
    let above: Vec<(f64, f64)> = times
        .iter()
        .zip(values.iter())
        .filter(|(_, &v)| v > VALUE_FLOOR)
        .map(|(&t, &v)| (t, v))
        .collect();
    let window_samples = &above[above.len() / 2..];
    if window_samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_SAMPLES,
            got: window_samples.len(),
        });
    }
    let window = (
        window_samples.first().unwrap().0,
        window_samples.last().unwrap().0,
    );

    let mut fits: Vec<(RateModel, f64, f64, f64)> = Vec::new(); // (model, rate, amplitude, residual)
    for model in RateModel::ALL {
        let coords: Vec<(f64, f64)> = window_samples
            .iter()
            .filter_map(|&(t, v)| model.log_coords(t, v))
            .collect();
        if coords.len() < MIN_FIT_SAMPLES {
            continue;
        }
        let xs: Vec<f64> = coords.iter().map(|c| c.0).collect();
        let ys: Vec<f64> = coords.iter().map(|c| c.1).collect();
        let (slope, intercept) = linear_regression(&xs, &ys);
        let rms = (xs
            .iter()
            .zip(ys.iter())
            .map(|(x, y)| {
                let r = y - (slope * x + intercept);
                r * r
            })
            .sum::<f64>()
            / xs.len() as f64)
            .sqrt();
        fits.push((model, -slope, intercept.exp(), rms));
    }
    if fits.is_empty() {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_SAMPLES,
            got: 0,
        });
    }
    fits.sort_by(|a, b| a.3.partial_cmp(&b.3).unwrap());
    let best = fits[0];
    let runner_up_margin = if fits.len() > 1 {
        if best.3 > 0.0 {
            (fits[1].3 - best.3) / best.3
        } else {
            f64::INFINITY
        }
    } else {
        f64::INFINITY
    };
    Ok(RateFit {
        model: best.0,
        amplitude: best.2,
        rate: best.1,
        residual: best.3,
        runner_up_margin,
        ambiguous: runner_up_margin < MODEL_MARGIN,
        window,
    })
}

/// Max over recorded, equally spaced sample triples of the defect in
/// d/dt V = ||u_t||^2 (for perturbed flows, in d/dt[V + hW] = ||u_t||^2 +
/// h' W), with the time integral evaluated by Simpson's rule over the
/// triple.
pub fn energy_identity_residual(
    flow: &FlowSpec,
    basis: &EigenBasis,
    traj: &Trajectory,
) -> Result<f64> {
    if traj.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: traj.len(),
        });
    }
    let perturbation = flow.perturbation();
    // Total energy G and integrand g at each sample.
    let mut g_total = Vec::with_capacity(traj.len());
    let mut integrand = Vec::with_capacity(traj.len());
    for i in 0..traj.len() {
        let ut_sq = traj.ut_norms[i] * traj.ut_norms[i];
        match perturbation {
            None => {
                g_total.push(traj.lyapunov_values[i]);
                integrand.push(ut_sq);
            }
            Some((h, _)) => {
                let t = traj.times[i];
                let w = flow.perturbation_energy(basis, &traj.states[i])?;
                g_total.push(traj.lyapunov_values[i] + h.value(t) * w);
                integrand.push(ut_sq + h.derivative(t) * w);
            }
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..traj.len() - 2 {
        let h1 = traj.times[i + 1] - traj.times[i];
        let h2 = traj.times[i + 2] - traj.times[i + 1];
        if (h1 - h2).abs() > 1e-12 * h1.max(h2) {
            continue; // uneven spacing (e.g. a final partial step)
        }
        let simpson = h1 / 3.0 * (integrand[i] + 4.0 * integrand[i + 1] + integrand[i + 2]);
        worst = worst.max(((g_total[i + 2] - g_total[i]) - simpson).abs());
    }
    Ok(worst)
}

/// Verdict of the exponential tail-energy displacement bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZelenyakReport {
    pub holds: bool,
    /// Displacement constant built from C8 and beta.
    pub c9: f64,
    /// max over pairs t <= tau of ||u(t) - u(tau)|| / (C9 e^{-beta t / 2}).
    pub worst_ratio: f64,
}

/// Check that exponentially small tail energies imply exponentially small
/// displacements: given tail_energy(t) <= c8 e^{-beta t} on the grid, the
/// unit-partition argument yields ||u(t) - u(tau)|| <= c9 e^{-beta t / 2}
/// with c9 = sqrt(c8) (1/(1 - e^{-beta/2}) + 1).
pub fn zelenyak_bound_check(traj: &Trajectory, c8: f64, beta: f64) -> Result<ZelenyakReport> {
    if traj.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: traj.len(),
        });
    }
    for (i, &t) in traj.times.iter().enumerate().take(traj.len() - 1) {
        let tail = tail_energy(traj, t)?;
        if tail <= VALUE_FLOOR {
            continue; // below the double-precision trust floor
        }
        let bound = c8 * (-beta * t).exp();
        if tail > bound * (1.0 + TAIL_QUADRATURE_SLACK) {
            return Err(Error::HypothesisFailed(format!(
                "tail energy {tail:.6e} exceeds {bound:.6e} at t = {t} (sample {i})"
            )));
        }
    }
    let c9 = c8.sqrt() * (1.0 / (1.0 - (-beta / 2.0).exp()) + 1.0);
    let mut worst_ratio: f64 = 0.0;
    for i in 0..traj.len() {
        let rhs = c9 * (-beta * traj.times[i] / 2.0).exp();
        for j in i + 1..traj.len() {
            let lhs = (&traj.states[i].coeffs - &traj.states[j].coeffs).norm();
            worst_ratio = worst_ratio.max(lhs / rhs);
        }
    }
    Ok(ZelenyakReport {
        holds: worst_ratio <= 1.0,
        c9,
        worst_ratio,
    })
}

/// Verdict of the perturbed displacement bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbedBoundReport {
    pub holds: bool,
    /// Fitted constant c with tail_energy(t) <= c h(t) on the grid.
    pub scale: f64,
    /// max over pairs of ||u(t) - u(tau)|| / (sqrt(c) int_{t-1}^inf sqrt(h)).
    pub worst_ratio: f64,
}

/// Check the slowly-decaying-forcing displacement bound: once tail
/// energies are dominated by c h(t), displacements from time t on are
/// dominated by sqrt(c) int_{t-1}^infty sqrt(h(s)) ds. Pairs with
/// t < t_min are skipped (the majorant needs t - 1 > 0 and the bound is
/// asymptotic).
pub fn perturbed_bound_check(
    traj: &Trajectory,
    h: &DecayProfile,
    t_min: f64,
) -> Result<PerturbedBoundReport> {
    if traj.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: traj.len(),
        });
    }
    let mut scale: f64 = 0.0;
    for &t in traj.times.iter().take(traj.len() - 1) {
        let tail = tail_energy(traj, t)?;
        scale = scale.max(tail / h.value(t));
    }
    if !scale.is_finite() {
        return Err(Error::HypothesisFailed(
            "tail energy is not dominated by any multiple of h".into(),
        ));
    }
    let mut worst_ratio: f64 = 0.0;
    for i in 0..traj.len() {
        let t = traj.times[i];
        if t < t_min.max(1.0) {
            continue;
        }
        let majorant = scale.sqrt()
            * h.sqrt_tail_integral(t - 1.0).ok_or_else(|| {
                Error::HypothesisFailed("sqrt(h) is not integrable".into())
            })?;
        for j in i + 1..traj.len() {
            let lhs = (&traj.states[i].coeffs - &traj.states[j].coeffs).norm();
            worst_ratio = worst_ratio.max(lhs / majorant);
        }
    }
    Ok(PerturbedBoundReport {
        holds: worst_ratio <= 1.0,
        scale,
        worst_ratio,
    })
}

/// Per-criterion verdicts on a forcing decay profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayClassReport {
    /// h > 0 and strictly decreasing on the probe grid.
    pub positive_decreasing: bool,
    /// h(T_probe) negligible against h(0).
    pub vanishes: bool,
    /// Doubling-segment quadrature of sqrt(h) converged.
    pub sqrt_integrable: bool,
    /// |h'/h| < 0.01 at T_probe (decays slower than any exponential there).
    pub slow_decay: bool,
    /// Accumulated quadrature of int_0^infty sqrt(h), when it converged.
    pub sqrt_integral: Option<f64>,
}

/// Simpson's rule for f on [a, b] with n (even) subintervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n.max(2) & !1;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Numerical verdicts on the decay class of h (positivity, monotone decay,
/// integrable square root, slower-than-exponential decay at the probe).
pub fn h_class_check(h: &DecayProfile, t_probe: f64) -> DecayClassReport {
    // Monotonicity and positivity on a log grid up to the probe time.
    let n_grid = 200;
    let mut positive_decreasing = h.value(0.0) > 0.0;
    let mut prev_ln = h.ln_value(0.0);
    for i in 1..=n_grid {
        let t = t_probe.powf(i as f64 / n_grid as f64) - 1.0 + 1e-6 * i as f64;
        let ln_h = h.ln_value(t);
        if !(ln_h < prev_ln) || h.log_derivative(t) >= 0.0 {
            positive_decreasing = false;
            break;
        }
        prev_ln = ln_h;
    }
    let vanishes = h.ln_value(t_probe) < h.ln_value(0.0) + (1e-6f64).ln();
    // Quadrature of sqrt(h) over doubling segments until the last segment
    // contributes below 1e-6 of the accumulated value.
    let mut total = simpson(|t| h.value(t).sqrt(), 0.0, 1.0, 64);
    let mut left = 1.0;
    let mut sqrt_integrable = false;
    for _ in 0..60 {
        let right = 2.0 * left;
        let seg = simpson(|t| h.value(t).sqrt(), left, right, 64);
        total += seg;
        if seg < 1e-6 * total {
            sqrt_integrable = true;
            break;
        }
        left = right;
    }
    let slow_decay = h.log_derivative(t_probe).abs() < 0.01;
    DecayClassReport {
        positive_decreasing,
        vanishes,
        sqrt_integrable,
        slow_decay,
        sqrt_integral: sqrt_integrable.then_some(total),
    }
}

/// Estimated gradient-inequality exponent of a converging trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LojasiewiczEstimate {
    /// Exponent theta in |V - B|^{1 - theta} <= c ||V'||, clipped to [0, 1/2].
    pub theta: f64,
    /// Raw regression slope of ln ||V'|| against ln |V - B|.
    pub slope: f64,
    pub pairs_used: usize,
}

/// Regression of ln(gradient norm) against ln(energy gap) over pairs above
/// the floor; theta = 1 - slope, clipped to [0, 1/2].
pub fn lojasiewicz_from_series(gaps: &[f64], grads: &[f64]) -> Result<LojasiewiczEstimate> {
    if gaps.len() != grads.len() {
        return Err(Error::SizeMismatch {
            expected: gaps.len(),
            got: grads.len(),
        });
    }
    let pairs: Vec<(f64, f64)> = gaps
        .iter()
        .zip(grads.iter())
        .filter(|(&g, &d)| g > VALUE_FLOOR && d > VALUE_FLOOR)
        .map(|(&g, &d)| (g.ln(), d.ln()))
        .collect();
    if pairs.len() < 10 {
        return Err(Error::InsufficientData {
            needed: 10,
            got: pairs.len(),
        });
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (slope, _) = linear_regression(&xs, &ys);
    Ok(LojasiewiczEstimate {
        theta: (1.0 - slope).clamp(0.0, 0.5),
        slope,
        pairs_used: pairs.len(),
    })
}

/// Estimate the exponent along a converged trajectory. The Lyapunov limit
/// B is the final recorded V plus the remaining tail energy, extrapolated
/// from the fitted decay of ||u_t||.
pub fn lojasiewicz_estimate(
    flow: &FlowSpec,
    basis: &EigenBasis,
    traj: &Trajectory,
) -> Result<LojasiewiczEstimate> {
    let _ = (flow, basis); // the trajectory already carries V and ||u_t||
    let fit = fit_rate(&traj.times, &traj.ut_norms)?;
    let t_last = traj.final_time();
    let ut_last = *traj.ut_norms.last().unwrap();
    // B - V(t_last) = int_{t_last}^inf ||u_t||^2 under the fitted decay law.
    let correction = match fit.model {
        RateModel::Exponential | RateModel::TExponential if fit.rate > 0.0 => {
            ut_last * ut_last / (2.0 * fit.rate)
        }
        RateModel::Algebraic if fit.rate > 0.5 => {
            ut_last * ut_last * t_last / (2.0 * fit.rate - 1.0)
        }
        _ => 0.0,
    };
    let b = traj.lyapunov_values.last().unwrap() + correction;
    // Trailing half of the samples above the floor, as in fit_rate; for
    // fast-converging runs most late samples sit below the floor.
    let pairs: Vec<(f64, f64)> = traj
        .lyapunov_values
        .iter()
        .zip(traj.ut_norms.iter())
        .map(|(&v, &g)| (b - v, g))
        .filter(|&(gap, grad)| gap > VALUE_FLOOR && grad > VALUE_FLOOR)
        .collect();
    let tail = &pairs[pairs.len() / 2..];
    let gaps: Vec<f64> = tail.iter().map(|p| p.0).collect();
    let grads: Vec<f64> = tail.iter().map(|p| p.1).collect();
    lojasiewicz_from_series(&gaps, &grads)
}

/// True iff the distance to `candidate` eventually drops below `tol`,
/// stays monotonically nonincreasing afterwards, and ends below tol / 10.
pub fn omega_limit_single(
    traj: &Trajectory,
    candidate: &SpectralField,
    tol: f64,
) -> Result<bool> {
    if traj.status == Status::BlowUp {
        return Err(Error::BlownUpTrajectory);
    }
    let dist: Vec<f64> = traj
        .states
        .iter()
        .map(|s| (&s.coeffs - &candidate.coeffs).norm())
        .collect();
    let Some(first) = dist.iter().position(|&d| d < tol) else {
        return Ok(false);
    };
    for w in dist[first..].windows(2) {
        if w[1] > w[0] + 1e-12 {
            return Ok(false);
        }
    }
    Ok(*dist.last().unwrap() < tol / 10.0)
}

/// Which scalar slow-decay model to integrate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlowFlowKind {
    /// a' = -rho2 e^{-1/(4 rho1^2 a^2)}: decays like 1/(rho1 sqrt(ln t)).
    FlatExp,
    /// a' = -a^3 e^{-1/a^2}: decays like 1/sqrt(ln 2t).
    NonlocalLog,
}

/// Samples of a scalar trajectory with the rhs recorded at each sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

fn slow_rhs(kind: SlowFlowKind, rho1: f64, rho2: f64, a: f64) -> f64 {
    match kind {
        SlowFlowKind::FlatExp => -rho2 * (-1.0 / (4.0 * rho1 * rho1 * a * a)).exp(),
        SlowFlowKind::NonlocalLog => -a * a * a * (-1.0 / (a * a)).exp(),
    }
}

fn slow_rhs_derivative(kind: SlowFlowKind, rho1: f64, rho2: f64, a: f64) -> f64 {
    match kind {
        SlowFlowKind::FlatExp => {
            -rho2 * (-1.0 / (4.0 * rho1 * rho1 * a * a)).exp()
                / (2.0 * rho1 * rho1 * a * a * a)
        }
        SlowFlowKind::NonlocalLog => {
            -(3.0 * a * a + 2.0) * (-1.0 / (a * a)).exp()
        }
    }
}

/// Points per decade of the geometric time grid.
const SLOW_GRID_DENSITY: f64 = 64.0;

/// Integrate a scalar slow-decay flow to t_end on a geometrically
/// stretched grid with the implicit midpoint rule; each step is solved by
/// a scalar Newton iteration.
pub fn scalar_slow_flow(
    kind: SlowFlowKind,
    rho1: f64,
    rho2: f64,
    a0: f64,
    t_end: f64,
) -> Result<ScalarTrajectory> {
    if !(a0 > 0.0) {
        return Err(Error::ScalarStep(a0));
    }
    // Grid: t = 0, then geometric from t0 to t_end at 64 points per decade.
    let t0 = 1e-2_f64;
    let mut times = vec![0.0];
    if t_end > t0 {
        let decades = (t_end / t0).log10();
        let n = (decades * SLOW_GRID_DENSITY).ceil() as usize;
        for i in 0..=n {
            times.push(t0 * (t_end / t0).powf(i as f64 / n as f64));
        }
    } else {
        times.push(t_end);
    }
    let mut values = Vec::with_capacity(times.len());
    let mut derivs = Vec::with_capacity(times.len());
    let mut a = a0;
    values.push(a);
    derivs.push(slow_rhs(kind, rho1, rho2, a));
    for w in times.clone().windows(2) {
        let dt = w[1] - w[0];
        // Implicit midpoint: x = a + dt f((a + x)/2), Newton on
        // g(x) = x - a - dt f((a + x)/2).
        let mut x = a + dt * slow_rhs(kind, rho1, rho2, a);
        if x <= 0.0 {
            x = a / 2.0;
        }
        let mut converged = false;
        for _ in 0..100 {
            let mid = 0.5 * (a + x);
            if mid <= 0.0 {
                return Err(Error::ScalarStep(mid));
            }
            let g = x - a - dt * slow_rhs(kind, rho1, rho2, mid);
            let gp = 1.0 - 0.5 * dt * slow_rhs_derivative(kind, rho1, rho2, mid);
            let step = g / gp;
            x -= step;
            if step.abs() <= 1e-16 * (1.0 + x.abs()) {
                converged = true;
                break;
            }
        }
        if !converged || x <= 0.0 {
            return Err(Error::ScalarStep(x));
        }
        a = x;
        values.push(a);
        derivs.push(slow_rhs(kind, rho1, rho2, a));
    }
    Ok(ScalarTrajectory {
        times,
        values,
        derivs,
    })
}

/// Potential drop int_0^a rho2 e^{-1/(4 rho1^2 s^2)} ds of the flat scalar
/// flow, by Simpson quadrature (the integrand vanishes to all orders at 0).
pub fn flat_potential_gap(a: f64, rho1: f64, rho2: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    simpson(
        |s| {
            if s <= 0.0 {
                0.0
            } else {
                rho2 * (-1.0 / (4.0 * rho1 * rho1 * s * s)).exp()
            }
        },
        0.0,
        a,
        2000,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn synthetic_trajectory(
        times: Vec<f64>,
        value: impl Fn(f64) -> f64,
        deriv_norm: impl Fn(f64) -> f64,
        lyapunov: impl Fn(f64) -> f64,
    ) -> Trajectory {
        Trajectory {
            states: times
                .iter()
                .map(|&t| SpectralField::from_pairs(1, &[(0, value(t))]).unwrap())
                .collect(),
            ut_norms: times.iter().map(|&t| deriv_norm(t)).collect(),
            lyapunov_values: times.iter().map(|&t| lyapunov(t)).collect(),
            times,
            status: Status::MaxTime,
        }
    }

    #[test]
    fn fit_recovers_exponential() {
        let times: Vec<f64> = (0..=300).map(|i| i as f64 * 0.01).collect();
        let values: Vec<f64> = times.iter().map(|t| 5.0 * (-6.0 * t).exp()).collect();
        let fit = fit_rate(&times, &values).unwrap();
        assert_eq!(fit.model, RateModel::Exponential);
        assert_abs_diff_eq!(fit.rate, 6.0, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.amplitude, 5.0, epsilon = 1e-5);
        assert!(!fit.ambiguous);
    }

    #[test]
    fn fit_recovers_algebraic() {
        let times: Vec<f64> = (0..400).map(|i| 10f64.powf(2.0 + i as f64 / 199.5)).collect();
        let values: Vec<f64> = times.iter().map(|t| 3.0 * t.powf(-0.5)).collect();
        let fit = fit_rate(&times, &values).unwrap();
        assert_eq!(fit.model, RateModel::Algebraic);
        assert_abs_diff_eq!(fit.rate, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn fit_recovers_logarithmic() {
        let times: Vec<f64> = (0..400).map(|i| 10f64.powf(3.0 + 3.0 * i as f64 / 399.0)).collect();
        let values: Vec<f64> = times.iter().map(|t| 2.0 * t.ln().powf(-0.5)).collect();
        let fit = fit_rate(&times, &values).unwrap();
        assert_eq!(fit.model, RateModel::Logarithmic);
        assert_abs_diff_eq!(fit.rate, 0.5, epsilon = 1e-3);
    }

    #[test]
    fn fit_recovers_t_exponential() {
        let times: Vec<f64> = (0..=300).map(|i| 0.5 + i as f64 * 0.01).collect();
        let values: Vec<f64> = times.iter().map(|t| 4.0 * t * (-2.0 * t).exp()).collect();
        let fit = fit_rate(&times, &values).unwrap();
        assert_eq!(fit.model, RateModel::TExponential);
        assert_abs_diff_eq!(fit.rate, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.amplitude, 4.0, epsilon = 1e-5);
    }

    #[test]
    fn fit_rejects_short_series() {
        let times: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let values = vec![1.0; 10];
        assert!(matches!(
            fit_rate(&times, &values),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn fit_ignores_samples_at_the_floor() {
        let times: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.01).collect();
        // decays through the floor around t = 5; later samples are junk
        let values: Vec<f64> = times
            .iter()
            .map(|t| (2.0 * (-6.0 * t).exp()).max(1e-16))
            .collect();
        let fit = fit_rate(&times, &values).unwrap();
        assert_eq!(fit.model, RateModel::Exponential);
        assert_abs_diff_eq!(fit.rate, 6.0, epsilon = 1e-4);
        assert!(fit.window.1 < 6.0);
    }

    #[test]
    fn energy_identity_on_a_synthetic_gradient_orbit() {
        // V(t) chosen so that dV/dt = ||u_t||^2 exactly: V = -e^{-2t}/2,
        // ||u_t|| = e^{-t}. Simpson on sample triples is exact to O(h^4).
        let n = 2000usize;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * 1e-3).collect();
        let traj = synthetic_trajectory(
            times,
            |t| (-t).exp(),
            |t| (-t).exp(),
            |t| -0.5 * (-2.0 * t).exp(),
        );
        let flow = FlowSpec::NonlocalCubic { l_group: 1, m: 1 };
        let b = crate::basis::build_basis(
            &crate::basis::DomainSpec {
                kind: crate::basis::DomainKind::Interval,
                quadrature_points_per_dim: 2,
            },
            1,
        )
        .unwrap();
        let r = energy_identity_residual(&flow, &b, &traj).unwrap();
        assert!(r < 1e-12, "residual {r}");
    }

    #[test]
    fn zelenyak_bound_on_the_model_trajectory() {
        // u(t) = e^{-t/2} e_1: tail energy int_t^inf e^{-s}/4 ds = e^{-t}/4,
        // so c8 = 1/4, beta = 1 and c9 = (1/2)(1/(1-e^{-1/2}) + 1).
        let n = 4000usize;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * 20.0 / n as f64).collect();
        let traj = synthetic_trajectory(times, |t| (-t / 2.0).exp(), |t| 0.5 * (-t / 2.0).exp(), |_| 0.0);
        let report = zelenyak_bound_check(&traj, 0.25, 1.0).unwrap();
        assert!(report.holds, "worst ratio {}", report.worst_ratio);
        assert_abs_diff_eq!(
            report.c9,
            0.5 * (1.0 / (1.0 - (-0.5f64).exp()) + 1.0),
            epsilon = 1e-14
        );
        assert!(report.worst_ratio <= 1.0);
        // Monotone in c8: a larger constant can only keep it holding.
        let looser = zelenyak_bound_check(&traj, 1.0, 1.0).unwrap();
        assert!(looser.holds);
        assert!(looser.worst_ratio <= report.worst_ratio);
    }

    #[test]
    fn zelenyak_rejects_a_false_tail_hypothesis() {
        let n = 200usize;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * 0.1).collect();
        let traj = synthetic_trajectory(times, |t| (-t / 2.0).exp(), |t| 0.5 * (-t / 2.0).exp(), |_| 0.0);
        assert!(matches!(
            zelenyak_bound_check(&traj, 1e-6, 1.0),
            Err(Error::HypothesisFailed(_))
        ));
    }

    #[test]
    fn zelenyak_equilibrium_is_trivial() {
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let traj = synthetic_trajectory(times, |_| 1.0, |_| 0.0, |_| 0.0);
        let report = zelenyak_bound_check(&traj, 1.0, 1.0).unwrap();
        assert!(report.holds);
        assert_eq!(report.worst_ratio, 0.0);
    }

    #[test]
    fn perturbed_bound_on_a_synthetic_orbit() {
        // u(t) = (1+t)^{-1} e_1: ||u_t||^2 = (1+t)^{-4}, tail = (1+t)^{-3}/3,
        // = h(t)/3 for alpha = 3. Displacements obey the lemma comfortably.
        let n = 2000usize;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * 100.0 / n as f64).collect();
        let traj = synthetic_trajectory(
            times,
            |t| 1.0 / (1.0 + t),
            |t| (1.0 + t).powi(-2),
            |_| 0.0,
        );
        let h = DecayProfile::PowerLaw { alpha: 3.0 };
        let report = perturbed_bound_check(&traj, &h, 2.0).unwrap();
        assert!(report.holds, "worst ratio {}", report.worst_ratio);
        // trapezoid tails overestimate by O(dt^2)
        assert!(report.scale <= (1.0 / 3.0) * 1.01);
    }

    #[test]
    fn decay_class_of_the_cubic_power_law() {
        let h = DecayProfile::PowerLaw { alpha: 3.0 };
        let report = h_class_check(&h, 1e6);
        assert!(report.positive_decreasing);
        assert!(report.vanishes);
        assert!(report.sqrt_integrable);
        assert!(report.slow_decay);
        assert_abs_diff_eq!(report.sqrt_integral.unwrap(), 2.0, epsilon = 1e-4);
    }

    #[test]
    fn decay_class_rejects_slow_power_law_and_exponential() {
        let slow = h_class_check(&DecayProfile::PowerLaw { alpha: 1.5 }, 1e6);
        assert!(!slow.sqrt_integrable);
        assert!(slow.positive_decreasing);
        let exp = h_class_check(&DecayProfile::Exponential { rate: 1.0 }, 1e6);
        assert!(!exp.slow_decay);
        assert!(exp.sqrt_integrable);
        assert_abs_diff_eq!(exp.sqrt_integral.unwrap(), 2.0, epsilon = 1e-4);
    }

    #[test]
    fn lojasiewicz_exact_half_from_constructed_pairs() {
        // |V - B| = ||rhs||^2 exactly: slope 1/2, theta = 1/2.
        let grads: Vec<f64> = (1..=50).map(|i| 1e-6 * i as f64).collect();
        let gaps: Vec<f64> = grads.iter().map(|g| g * g).collect();
        let est = lojasiewicz_from_series(&gaps, &grads).unwrap();
        assert_abs_diff_eq!(est.theta, 0.5, epsilon = 1e-12);
        assert!(est.pairs_used >= 10);
    }

    #[test]
    fn lojasiewicz_theta_is_clipped() {
        // gap = grad^4: slope 1/4, 1 - slope = 3/4 clipped to 1/2.
        let grads: Vec<f64> = (1..=50).map(|i| 1e-3 * i as f64).collect();
        let gaps: Vec<f64> = grads.iter().map(|g| g.powi(4)).collect();
        let est = lojasiewicz_from_series(&gaps, &grads).unwrap();
        assert_eq!(est.theta, 0.5);
        assert!(est.slope < 0.5);
    }

    #[test]
    fn omega_limit_detects_the_right_candidate() {
        let n = 500usize;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * 0.02).collect();
        let traj = synthetic_trajectory(
            times,
            |t| 1.0 + (-3.0 * t).exp(),
            |t| 3.0 * (-3.0 * t).exp(),
            |_| 0.0,
        );
        let right = SpectralField::from_pairs(1, &[(0, 1.0)]).unwrap();
        let wrong = SpectralField::from_pairs(1, &[(0, -1.0)]).unwrap();
        assert!(omega_limit_single(&traj, &right, 1e-2).unwrap());
        assert!(!omega_limit_single(&traj, &wrong, 1e-2).unwrap());
    }

    #[test]
    fn omega_limit_rejects_blowups() {
        let traj = Trajectory {
            times: vec![0.0, 1.0],
            states: vec![SpectralField::zeros(1), SpectralField::zeros(1)],
            lyapunov_values: vec![0.0, 0.0],
            ut_norms: vec![0.0, 0.0],
            status: Status::BlowUp,
        };
        assert!(matches!(
            omega_limit_single(&traj, &SpectralField::zeros(1), 1e-3),
            Err(Error::BlownUpTrajectory)
        ));
    }

    #[test]
    fn flat_flow_respects_the_logarithmic_lower_bound() {
        let traj = scalar_slow_flow(SlowFlowKind::FlatExp, 1.0, 1.0, 0.5, 1e6).unwrap();
        // strictly decreasing and positive throughout
        for w in traj.values.windows(2) {
            assert!(w[1] < w[0] && w[1] > 0.0);
        }
        for (t, a) in traj.times.iter().zip(traj.values.iter()) {
            if *t >= 1e3 {
                assert!(
                    a * t.ln().sqrt() >= 1.0 / 3.0,
                    "bound violated at t = {t}: {}",
                    a * t.ln().sqrt()
                );
            }
        }
    }

    #[test]
    fn nonlocal_log_flow_matches_its_asymptotic() {
        let traj = scalar_slow_flow(SlowFlowKind::NonlocalLog, 1.0, 1.0, 0.5, 1e6).unwrap();
        let a = *traj.values.last().unwrap();
        let t = *traj.times.last().unwrap();
        let ratio = a * (2.0 * t).ln().sqrt();
        assert!((0.9..=1.1).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn scalar_flow_rejects_nonpositive_start() {
        assert!(matches!(
            scalar_slow_flow(SlowFlowKind::FlatExp, 1.0, 1.0, 0.0, 10.0),
            Err(Error::ScalarStep(_))
        ));
    }

    #[test]
    fn flat_flow_lojasiewicz_exponent_is_small() {
        // The flat potential kills any power-law gradient inequality: the
        // estimated exponent over [1e3, 1e6] stays near zero.
        let traj = scalar_slow_flow(SlowFlowKind::FlatExp, 1.0, 1.0, 0.5, 1e6).unwrap();
        let mut gaps = Vec::new();
        let mut grads = Vec::new();
        for i in 0..traj.times.len() {
            if traj.times[i] >= 1e3 {
                gaps.push(flat_potential_gap(traj.values[i], 1.0, 1.0));
                grads.push(traj.derivs[i].abs());
            }
        }
        let est = lojasiewicz_from_series(&gaps, &grads).unwrap();
        assert!(est.theta <= 0.1, "theta {}", est.theta);
    }
}
