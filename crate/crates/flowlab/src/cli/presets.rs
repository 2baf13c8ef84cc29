//! Pinned experiment configurations reproducing every headline claim.
//! Each preset fixes all numeric choices so runs are reproducible.

use crate::basis::DomainKind;
use crate::error::{Error, Result};
use crate::flows::{DecayProfile, FlowSpec, Nonlinearity};
use crate::integrate::IntegratorParams;

use super::config::{AnalysisConfig, ExperimentConfig, PipelineConfig};

pub const PRESET_NAMES: [&str; 12] = [
    "oracle-match",
    "prop41-i",
    "prop41-ii",
    "prop41-iii",
    "hr-square",
    "hr-interval",
    "zelenyak",
    "energy-identity",
    "perturbed-alpha3",
    "slow-decay",
    "lojasiewicz-flat",
    "blow-up",
];

const DEFAULT_SEED: u64 = 42;

fn params(dt: f64, t_end: f64, record_stride: usize) -> IntegratorParams {
    IntegratorParams {
        dt,
        t_end,
        record_stride,
        stationary_tol: 0.0,
        blowup_threshold: 1e6,
    }
}

fn interval_pipeline(
    flow: FlowSpec,
    init: Vec<(usize, f64)>,
    integrator: IntegratorParams,
    integrate: bool,
) -> PipelineConfig {
    PipelineConfig {
        domain: DomainKind::Interval,
        quadrature_points_per_dim: None,
        n_modes: 16,
        flow,
        init,
        integrator,
        integrate,
    }
}

/// The benchmark run: non-local cubic flow with gain at the second
/// eigenvalue, two excited modes, integrated over [0, 10].
fn benchmark_pipeline() -> PipelineConfig {
    interval_pipeline(
        FlowSpec::NonlocalCubic { l_group: 1, m: 1 },
        vec![(0, 0.1), (1, 0.05)],
        params(1e-3, 10.0, 10),
        true,
    )
}

/// The exact config behind each named preset.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (pipeline, analyses) = match name {
        "oracle-match" => (
            Some(benchmark_pipeline()),
            vec![AnalysisConfig::OracleMatch { tol: 1e-6 }],
        ),
        "prop41-i" => (
            Some(interval_pipeline(
                FlowSpec::NonlocalCubic { l_group: 0, m: 1 },
                vec![(1, 0.1)],
                params(1e-3, 10.0, 10),
                false,
            )),
            vec![AnalysisConfig::DecayRateExponential {
                expected_delta: 3.0,
                rel_tol: 0.05,
            }],
        ),
        "prop41-ii" => (
            Some(interval_pipeline(
                FlowSpec::NonlocalCubic { l_group: 0, m: 1 },
                vec![(0, 0.3)],
                params(1e-3, 1e4, 10),
                false,
            )),
            vec![AnalysisConfig::DecayRateAlgebraic {
                sqrt2t_tol: 0.01,
                window: (1e2, 1e4),
                expected_p: 0.5,
                p_tol: 0.005,
            }],
        ),
        "prop41-iii" => (
            Some(benchmark_pipeline()),
            vec![
                AnalysisConfig::ConvergeNonzeroRates {
                    a1_init: 0.1,
                    a2_init: 0.05,
                    delta_single: 6.0,
                    delta_second: 3.0,
                    rel_tol: 0.05,
                    deviation_band: (1e-12, 1e-2),
                    limit_tol: 1e-8,
                },
                AnalysisConfig::LojasiewiczResonance {
                    expected_theta: 0.5,
                    tol: 0.05,
                },
            ],
        ),
        "hr-square" => (
            Some(PipelineConfig {
                domain: DomainKind::Square,
                quadrature_points_per_dim: None,
                n_modes: 64,
                // gain at the lambda = 10 group (fourth distinct eigenvalue)
                flow: FlowSpec::NonlocalCubic { l_group: 3, m: 1 },
                init: vec![(0, 0.1)],
                integrator: params(1e-3, 10.0, 10),
                integrate: false,
            }),
            vec![AnalysisConfig::KernelDimension {
                j_eigenvalue: 5.0,
                l_eigenvalue: 10.0,
                m: 1,
                n_samples: 8,
                expected_kernel_dim: 1,
                expected_gap: 3.0,
                gap_tol: 1e-6,
            }],
        ),
        "hr-interval" => (
            Some(interval_pipeline(
                FlowSpec::NonlocalCubic { l_group: 1, m: 1 },
                vec![(0, 0.1)],
                params(1e-3, 10.0, 10),
                false,
            )),
            vec![AnalysisConfig::KernelDimension {
                j_eigenvalue: 1.0,
                l_eigenvalue: 4.0,
                m: 1,
                n_samples: 4,
                expected_kernel_dim: 0,
                expected_gap: 3.0,
                gap_tol: 1e-6,
            }],
        ),
        "zelenyak" => (
            Some(benchmark_pipeline()),
            vec![AnalysisConfig::ZelenyakBound {}],
        ),
        "energy-identity" => (
            Some(benchmark_pipeline()),
            vec![AnalysisConfig::EnergyIdentity {
                tol: 1e-6,
                min_refine_factor: 4.0,
            }],
        ),
        "perturbed-alpha3" => (
            Some(interval_pipeline(
                FlowSpec::perturbed(
                    FlowSpec::NonlocalCubic { l_group: 1, m: 1 },
                    DecayProfile::PowerLaw { alpha: 3.0 },
                    Nonlinearity::Identity,
                )?,
                vec![(0, 0.1), (1, 0.05)],
                params(1e-3, 200.0, 100),
                true,
            )),
            vec![AnalysisConfig::PerturbedConvergence {
                omega_tol: 1e-3,
                bound_t_min: 10.0,
                sqrt_integral_expected: 2.0,
                sqrt_integral_tol: 1e-4,
            }],
        ),
        "slow-decay" => (
            None,
            vec![AnalysisConfig::SlowDecay {
                rho1: 1.0,
                rho2: 1.0,
                a0: 0.5,
                t_end: 1e6,
                bound_t_min: 1e3,
                log_ratio_band: (0.9, 1.1),
            }],
        ),
        "lojasiewicz-flat" => (
            None,
            vec![AnalysisConfig::LojasiewiczFlat {
                rho1: 1.0,
                rho2: 1.0,
                a0: 0.5,
                t_end: 1e6,
                window_start: 1e3,
                theta_max: 0.1,
            }],
        ),
        "blow-up" => (
            Some(interval_pipeline(
                FlowSpec::Local {
                    f: Nonlinearity::Cubic,
                },
                vec![(0, 10.0)],
                params(1e-3, 10.0, 1),
                true,
            )),
            vec![AnalysisConfig::BlowUp {}],
        ),
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(ExperimentConfig {
        id: name.to_string(),
        seed: DEFAULT_SEED,
        pipeline,
        analyses,
    })
}
