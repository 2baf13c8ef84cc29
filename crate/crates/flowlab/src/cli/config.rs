//! Experiment configuration: the JSON schema read by `run --config` and
//! produced by the presets.

use serde::{Deserialize, Serialize};

use crate::basis::DomainKind;
use crate::flows::FlowSpec;
use crate::integrate::IntegratorParams;

/// One experiment: an optional simulation pipeline plus a list of analyses
/// with pinned tolerances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Identifier echoed into report and artifact names.
    pub id: String,
    /// Seed for every randomized analysis (manifold sampling).
    pub seed: u64,
    /// Basis + flow + initial data; absent for purely scalar experiments.
    pub pipeline: Option<PipelineConfig>,
    pub analyses: Vec<AnalysisConfig>,
}

/// Basis construction, flow selection, and trajectory generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub domain: DomainKind,
    /// Quadrature points per dimension; defaults to the dealiasing floor.
    #[serde(default)]
    pub quadrature_points_per_dim: Option<usize>,
    pub n_modes: usize,
    pub flow: FlowSpec,
    /// Initial data as (mode position, coefficient) pairs.
    pub init: Vec<(usize, f64)>,
    pub integrator: IntegratorParams,
    /// When false, the trajectory is sampled from the exact solution on a
    /// geometric time grid instead of being integrated (non-local cubic
    /// flows only).
    pub integrate: bool,
}

/// One analysis with all numeric choices pinned in the config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalysisConfig {
    /// Sup over recorded samples and modes of |integrated - exact|.
    OracleMatch { tol: f64 },
    /// Exponential decay to zero when the lowest excited mode lies above
    /// the gain: ||u(t)|| fits e^{-delta t}.
    DecayRateExponential { expected_delta: f64, rel_tol: f64 },
    /// Algebraic decay of the resonant mode: a_l(t) ~ 1/sqrt(2t).
    DecayRateAlgebraic {
        /// a_l(t_check) sqrt(2 t_check) must land in 1 +- sqrt2t_tol.
        sqrt2t_tol: f64,
        /// Time window of the algebraic fit.
        window: (f64, f64),
        expected_p: f64,
        p_tol: f64,
    },
    /// Convergence to the nonzero equilibrium with mode-wise exponential
    /// deviation rates, computed from the exact solution.
    ConvergeNonzeroRates {
        a1_init: f64,
        a2_init: f64,
        /// Deviation rate of the driving mode for single-mode data.
        delta_single: f64,
        /// Decay rate of the resonant second mode for two-mode data.
        delta_second: f64,
        rel_tol: f64,
        /// Fits are restricted to deviations inside this band.
        deviation_band: (f64, f64),
        /// |limit norm - sqrt(lambda_l - lambda_1)| tolerance.
        limit_tol: f64,
    },
    /// Kernel dimension and spectral gap on a branching manifold.
    KernelDimension {
        j_eigenvalue: f64,
        l_eigenvalue: f64,
        m: u32,
        n_samples: usize,
        expected_kernel_dim: usize,
        expected_gap: f64,
        gap_tol: f64,
    },
    /// Energy identity defect on the pipeline run plus a dt/2 refinement.
    EnergyIdentity { tol: f64, min_refine_factor: f64 },
    /// Tail-energy displacement bound: synthetic model trajectory with the
    /// exact constants, then the pipeline run with a fitted decay rate.
    ZelenyakBound {},
    /// Perturbed flow: single omega-limit, displacement bound, decay class.
    PerturbedConvergence {
        omega_tol: f64,
        bound_t_min: f64,
        sqrt_integral_expected: f64,
        sqrt_integral_tol: f64,
    },
    /// Scalar slow flows: flat lower bound and logarithmic asymptotics.
    SlowDecay {
        rho1: f64,
        rho2: f64,
        a0: f64,
        t_end: f64,
        bound_t_min: f64,
        log_ratio_band: (f64, f64),
    },
    /// Gradient-inequality exponent of the scalar flat flow.
    LojasiewiczFlat {
        rho1: f64,
        rho2: f64,
        a0: f64,
        t_end: f64,
        window_start: f64,
        theta_max: f64,
    },
    /// Gradient-inequality exponent of the pipeline trajectory.
    LojasiewiczResonance { expected_theta: f64, tol: f64 },
    /// Pipeline run is expected to leave the trust region in finite time.
    BlowUp {},
}
