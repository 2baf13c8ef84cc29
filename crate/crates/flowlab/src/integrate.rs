//! Time integration of the Galerkin ODE systems.
//!
//! The schemes split the rhs as a' = L a + N(a, t) with diagonal stiff part
//! L (the linearization at zero) and integrate the non-stiff remainder with
//! classical fourth-order Runge-Kutta on the exponentially rescaled variable
//! b = e^{-Lt} a. This keeps large dissipative eigenvalues exact and leaves
//! only the smooth nonlinear dynamics to the RK stages.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::basis::{EigenBasis, SpectralField};
use crate::error::{Error, Result};
use crate::flows::FlowSpec;

/// Fixed-step integration parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorParams {
    /// Step size.
    pub dt: f64,
    /// Integrate over [0, t_end].
    pub t_end: f64,
    /// Record every `record_stride`-th step (plus the final state).
    pub record_stride: usize,
    /// Stop early once ||a'|| falls below this threshold; 0 disables.
    pub stationary_tol: f64,
    /// Declare blow-up once ||a|| exceeds this (or any coefficient is
    /// non-finite).
    pub blowup_threshold: f64,
}

impl Default for IntegratorParams {
    fn default() -> Self {
        IntegratorParams {
            dt: 1e-3,
            t_end: 10.0,
            record_stride: 10,
            stationary_tol: 0.0,
            blowup_threshold: 1e6,
        }
    }
}

/// Why the integration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// ||a'|| dropped below `stationary_tol`.
    Converged,
    /// Reached t_end.
    MaxTime,
    /// The trajectory left the trust region; recorded samples end at the
    /// last finite state.
    BlowUp,
}

/// Recorded samples of one integration run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    /// Lyapunov functional of the (base) flow at each sample, when defined.
    pub lyapunov_values: Vec<f64>,
    /// ||a'(t)|| at each sample.
    pub ut_norms: Vec<f64>,
    pub status: Status,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &SpectralField {
        self.states.last().expect("trajectory has samples")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has samples")
    }
}

fn record(
    traj: &mut Trajectory,
    flow: &FlowSpec,
    basis: &EigenBasis,
    t: f64,
    state: &SpectralField,
    rhs_norm: f64,
) -> Result<()> {
    traj.times.push(t);
    traj.states.push(state.clone());
    traj.lyapunov_values.push(flow.base_lyapunov(basis, state)?);
    traj.ut_norms.push(rhs_norm);
    Ok(())
}

/// Integrate the flow from `init` with the integrating-factor RK4 scheme.
pub fn integrate(
    flow: &FlowSpec,
    basis: &EigenBasis,
    init: &SpectralField,
    params: &IntegratorParams,
) -> Result<Trajectory> {
    if init.len() != basis.len() {
        return Err(Error::SizeMismatch {
            expected: basis.len(),
            got: init.len(),
        });
    }
    if !(params.dt > 0.0 && params.t_end > 0.0) {
        return Err(Error::Config("dt and t_end must be positive".into()));
    }
    let stride = params.record_stride.max(1);
    let linear = flow.linear_coeffs(basis)?;
    // Componentwise propagators over a full and a half step.
    let e_full: DVector<f64> = linear.map(|l| (l * params.dt).exp());
    let e_half: DVector<f64> = linear.map(|l| (l * params.dt / 2.0).exp());
    let n_steps = (params.t_end / params.dt).round() as usize;

    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        lyapunov_values: Vec::new(),
        ut_norms: Vec::new(),
        status: Status::MaxTime,
    };

    let nonlin = |a: &DVector<f64>, t: f64| -> Result<DVector<f64>> {
        flow.nonlinear_rhs(basis, &SpectralField { coeffs: a.clone() }, t)
    };
    let full_rhs_norm = |a: &SpectralField, t: f64| -> Result<f64> {
        Ok(flow.rhs(basis, a, t)?.norm())
    };

    let mut a = init.clone();
    let mut t = 0.0;
    let r0 = full_rhs_norm(&a, t)?;
    record(&mut traj, flow, basis, t, &a, r0)?;
    if params.stationary_tol > 0.0 && r0 < params.stationary_tol {
        traj.status = Status::Converged;
        return Ok(traj);
    }

    for step in 1..=n_steps {
        let dt = params.dt;
        let y = &a.coeffs;
        let blown = (|| -> Result<DVector<f64>> {
            let k1 = nonlin(y, t)?;
            let mid = t + dt / 2.0;
            let k2 = nonlin(&(e_half.component_mul(&(y + (dt / 2.0) * &k1))), mid)?;
            let k3 = nonlin(
                &(e_half.component_mul(y) + (dt / 2.0) * &k2),
                mid,
            )?;
            let k4 = nonlin(
                &(e_full.component_mul(y) + dt * e_half.component_mul(&k3)),
                t + dt,
            )?;
            Ok(e_full.component_mul(&(y + (dt / 6.0) * &k1))
                + (dt / 3.0) * e_half.component_mul(&(&k2 + &k3))
                + (dt / 6.0) * k4)
        })();
        let next = match blown {
            Ok(v) => v,
            Err(Error::Overflow) => {
                traj.status = Status::BlowUp;
                return Ok(traj);
            }
            Err(e) => return Err(e),
        };
        if !next.iter().all(|x| x.is_finite()) || next.norm() >= params.blowup_threshold {
            traj.status = Status::BlowUp;
            return Ok(traj);
        }
        a = SpectralField { coeffs: next };
        t = step as f64 * dt;

        let at_end = step == n_steps;
        let mut rhs_norm = None;
        if params.stationary_tol > 0.0 || step % stride == 0 || at_end {
            rhs_norm = Some(full_rhs_norm(&a, t)?);
        }
        if step % stride == 0 || at_end {
            record(&mut traj, flow, basis, t, &a, rhs_norm.unwrap())?;
        }
        if params.stationary_tol > 0.0 && rhs_norm.unwrap_or(f64::MAX) < params.stationary_tol {
            if step % stride != 0 && !at_end {
                record(&mut traj, flow, basis, t, &a, rhs_norm.unwrap())?;
            }
            traj.status = Status::Converged;
            return Ok(traj);
        }
    }
    Ok(traj)
}

/// Trapezoid approximation of int_t^{t_last} ||a'(s)||^2 ds from the recorded
/// samples, with linear interpolation of ||a'||^2 at the left endpoint.
pub fn tail_energy(traj: &Trajectory, t: f64) -> Result<f64> {
    if traj.status == Status::BlowUp {
        return Err(Error::BlownUpTrajectory);
    }
    let times = &traj.times;
    if times.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: times.len(),
        });
    }
    let (t_min, t_max) = (times[0], *times.last().unwrap());
    if t < t_min || t > t_max {
        return Err(Error::OutOfRange { t, t_min, t_max });
    }
    let sq: Vec<f64> = traj.ut_norms.iter().map(|u| u * u).collect();
    // First sample index at or after t.
    let i0 = times.partition_point(|&s| s < t);
    let mut total = 0.0;
    // Partial cell [t, times[i0]].
    if i0 > 0 && times[i0] > t {
        let (tl, tr) = (times[i0 - 1], times[i0]);
        let frac = (t - tl) / (tr - tl);
        let sq_t = sq[i0 - 1] + frac * (sq[i0] - sq[i0 - 1]);
        total += 0.5 * (sq_t + sq[i0]) * (tr - t);
    }
    for i in i0..times.len() - 1 {
        total += 0.5 * (sq[i] + sq[i + 1]) * (times[i + 1] - times[i]);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, min_quadrature_points, DomainKind, DomainSpec};
    use crate::flows::Nonlinearity;
    use crate::nonlocal;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn interval(n: usize) -> EigenBasis {
        let domain = DomainSpec {
            kind: DomainKind::Interval,
            quadrature_points_per_dim: min_quadrature_points(DomainKind::Interval, n),
        };
        build_basis(&domain, n).unwrap()
    }

    fn heat() -> FlowSpec {
        FlowSpec::Local {
            f: Nonlinearity::Zero,
        }
    }

    #[test]
    fn pure_heat_decays_exactly() {
        // a_1' = -a_1: the integrating factor handles this with zero error
        // from the RK stages (N = 0), so the decay e^{-t} is exact in
        // floating point up to rounding of the per-step propagator.
        let b = interval(4);
        let init = SpectralField::from_pairs(4, &[(0, 1.0)]).unwrap();
        let params = IntegratorParams {
            dt: 1e-2,
            t_end: 5.0,
            record_stride: 100,
            ..Default::default()
        };
        let traj = integrate(&heat(), &b, &init, &params).unwrap();
        assert_eq!(traj.status, Status::MaxTime);
        for (t, a) in traj.times.iter().zip(traj.states.iter()) {
            assert_abs_diff_eq!(a.coeffs[0], (-t).exp(), epsilon = 1e-10);
        }
    }

    #[test]
    fn stiff_heat_is_stable_at_large_step() {
        // 256 modes: fastest eigenvalue 65536. Explicit RK4 at dt = 1e-2
        // would explode; the integrating factor keeps it exact.
        let b = interval(256);
        let mut coeffs = vec![0.0; 256];
        coeffs[0] = 1.0;
        coeffs[255] = 1.0;
        let init = SpectralField::from_vec(coeffs);
        let params = IntegratorParams {
            dt: 1e-2,
            t_end: 1.0,
            record_stride: 100,
            ..Default::default()
        };
        let traj = integrate(&heat(), &b, &init, &params).unwrap();
        let last = traj.final_state();
        assert_abs_diff_eq!(last.coeffs[0], (-1.0f64).exp(), epsilon = 1e-8);
        assert!(last.coeffs[255].abs() < 1e-12);
    }

    #[test]
    fn matches_nonlocal_closed_form() {
        let b = interval(8);
        let init = SpectralField::from_pairs(8, &[(0, 0.1), (1, 0.05), (3, 0.2)]).unwrap();
        let flow = FlowSpec::NonlocalCubic { l_group: 1, m: 1 };
        let params = IntegratorParams {
            dt: 1e-3,
            t_end: 8.0,
            record_stride: 500,
            ..Default::default()
        };
        let traj = integrate(&flow, &b, &init, &params).unwrap();
        for (t, a) in traj.times.iter().zip(traj.states.iter()) {
            let exact = nonlocal::closed_form(&b, &init, 1, 1, *t).unwrap();
            assert!(
                (&a.coeffs - &exact.coeffs).norm() < 1e-6,
                "t = {t}: deviation {}",
                (&a.coeffs - &exact.coeffs).norm()
            );
        }
    }

    #[test]
    fn fourth_order_convergence() {
        // Compare against the closed form over a short horizon at two step
        // sizes; halving dt must shrink the error by at least 12x (16x for
        // a clean fourth-order method, slack for roundoff).
        let b = interval(6);
        let init = SpectralField::from_pairs(6, &[(0, 0.4), (1, 0.3)]).unwrap();
        let flow = FlowSpec::NonlocalCubic { l_group: 1, m: 1 };
        let t_end = 1.0;
        let exact = nonlocal::closed_form(&b, &init, 1, 1, t_end).unwrap();
        let err_at = |dt: f64| {
            let params = IntegratorParams {
                dt,
                t_end,
                record_stride: usize::MAX,
                ..Default::default()
            };
            let traj = integrate(&flow, &b, &init, &params).unwrap();
            (&traj.final_state().coeffs - &exact.coeffs).norm()
        };
        let coarse = err_at(0.05);
        let fine = err_at(0.025);
        assert!(
            coarse / fine >= 12.0,
            "order check failed: coarse {coarse:.3e}, fine {fine:.3e}"
        );
    }

    #[test]
    fn cubic_flow_blows_up() {
        let b = interval(4);
        let init = SpectralField::from_pairs(4, &[(0, 10.0)]).unwrap();
        let flow = FlowSpec::Local {
            f: Nonlinearity::Cubic,
        };
        let params = IntegratorParams {
            dt: 1e-3,
            t_end: 10.0,
            record_stride: 1,
            ..Default::default()
        };
        let traj = integrate(&flow, &b, &init, &params).unwrap();
        assert_eq!(traj.status, Status::BlowUp);
        // All recorded samples stay finite and below the threshold.
        for a in &traj.states {
            assert!(a.is_finite());
            assert!(a.norm() < params.blowup_threshold);
        }
        assert!(traj.final_time() < 10.0);
    }

    #[test]
    fn lyapunov_is_monotone_along_orbits() {
        let b = interval(6);
        let flow = FlowSpec::NonlocalCubic { l_group: 1, m: 1 };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let init =
                SpectralField::from_vec((0..6).map(|_| rng.gen_range(-0.5..0.5)).collect());
            let params = IntegratorParams {
                dt: 1e-3,
                t_end: 5.0,
                record_stride: 50,
                ..Default::default()
            };
            let traj = integrate(&flow, &b, &init, &params).unwrap();
            for w in traj.lyapunov_values.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "V decreased: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn stationary_tolerance_stops_early() {
        let b = interval(4);
        let init = SpectralField::from_pairs(4, &[(0, 1.0)]).unwrap();
        let params = IntegratorParams {
            dt: 1e-2,
            t_end: 100.0,
            record_stride: 100,
            stationary_tol: 1e-6,
            ..Default::default()
        };
        let traj = integrate(&heat(), &b, &init, &params).unwrap();
        assert_eq!(traj.status, Status::Converged);
        assert!(traj.final_time() < 100.0);
        assert!(*traj.ut_norms.last().unwrap() < 1e-6);
    }

    #[test]
    fn tail_energy_of_exponential_decay() {
        // Synthetic single-mode trajectory a(t) = e^{-t}: ||a'||^2 = e^{-2t}
        // and int_t^inf = e^{-2t}/2. With a finite horizon T = 20 the cutoff
        // error is negligible against the 1e-3 relative tolerance.
        let n = 2048usize;
        let dt = 20.0 / n as f64;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        let traj = Trajectory {
            states: times
                .iter()
                .map(|t| SpectralField::from_pairs(1, &[(0, (-t).exp())]).unwrap())
                .collect(),
            ut_norms: times.iter().map(|t| (-t).exp()).collect(),
            lyapunov_values: vec![0.0; times.len()],
            times,
            status: Status::MaxTime,
        };
        for t in [0.0f64, 0.5, 1.0, 2.0, 3.7] {
            let exact = 0.5 * (-2.0 * t).exp();
            let approx_val = tail_energy(&traj, t).unwrap();
            assert!(
                (approx_val - exact).abs() <= 1e-3 * exact,
                "t = {t}: {approx_val} vs {exact}"
            );
        }
        assert!(matches!(
            tail_energy(&traj, -1.0),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            tail_energy(&traj, 21.0),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn tail_energy_rejects_blown_up_trajectories() {
        let traj = Trajectory {
            times: vec![0.0, 1.0],
            states: vec![SpectralField::zeros(1), SpectralField::zeros(1)],
            lyapunov_values: vec![0.0, 0.0],
            ut_norms: vec![0.0, 0.0],
            status: Status::BlowUp,
        };
        assert!(matches!(
            tail_energy(&traj, 0.5),
            Err(Error::BlownUpTrajectory)
        ));
    }
}
