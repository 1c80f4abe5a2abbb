//! The `analyze` pipeline: load, fit, assemble Ω, region, band.

use rdjoint_core::band::{BandRequest, BandVariant, UniformBand};
use rdjoint_core::bandwidth::BandwidthWarning;
use rdjoint_core::fuzzy::fuzzy_level_variance;
use rdjoint_core::linalg::Sym2;
use rdjoint_core::{
    assemble_omega, assemble_omega_fuzzy, estimate_fuzzy, estimate_sharp, nn_variance, rbc_marginal_interval,
    rule_of_thumb_bandwidths, validate_sample, ConfidenceRegion, EffectLine, FitSpec, JointEstimates, OmegaMatrix,
    Sample, ValidationReport,
};
use serde::Serialize;

use crate::error::CliError;

/// Which band to emit, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandChoice {
    Uniform,
    Envelope,
    None,
}

/// Everything `analyze` needs besides the sample.
#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub spec: FitSpec,
    /// `None` selects both bandwidths by the rule of thumb.
    pub h: Option<f64>,
    pub b: Option<f64>,
    pub grid: usize,
    pub band: BandChoice,
    pub boundary_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Warning {
    pub code: String,
    pub message: String,
}

impl Warning {
    fn new(code: &str, message: impl Into<String>) -> Self {
        Warning {
            code: code.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleInfo {
    pub n: usize,
    pub cutoff: f64,
    pub running: String,
    pub outcome: String,
    pub treatment: Option<String>,
    #[serde(flatten)]
    pub counts: ValidationReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpecEcho {
    #[serde(flatten)]
    pub spec: FitSpec,
    /// `user`, `user_h` (b copied from h) or `rule_of_thumb`.
    pub bandwidth_source: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct SharpEstimates {
    pub tau_hat: f64,
    pub tau_prime_hat: f64,
    pub tau_tilde: f64,
    pub tau_prime_tilde: f64,
    /// Estimated leading bias of `(τ̂₊, τ̂′₊)` on the treated side.
    pub bias_right: (f64, f64),
    pub bias_left: (f64, f64),
}

impl From<&JointEstimates> for SharpEstimates {
    fn from(e: &JointEstimates) -> Self {
        SharpEstimates {
            tau_hat: e.tau_hat,
            tau_prime_hat: e.tau_prime_hat,
            tau_tilde: e.tau_tilde,
            tau_prime_tilde: e.tau_prime_tilde,
            bias_right: e.bias_right,
            bias_left: e.bias_left,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Estimates {
    Sharp(SharpEstimates),
    Fuzzy {
        outcome: SharpEstimates,
        first_stage: SharpEstimates,
        tau_frd: f64,
        tau_prime_frd: f64,
        tau_prime_first_stage_se: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct Effect {
    pub tau: f64,
    pub tau_prime: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OmegaOut {
    pub v: f64,
    pub v_prime: f64,
    pub c: f64,
    pub h: f64,
    /// `diag(1, 1/h) Ω diag(1, 1/h)`, the covariance of `(τ̃, τ̃′)`.
    pub omega_h: Sym2,
}

impl From<&OmegaMatrix> for OmegaOut {
    fn from(o: &OmegaMatrix) -> Self {
        OmegaOut {
            v: o.v,
            v_prime: o.vp,
            c: o.c,
            h: o.h,
            omega_h: o.omega_h,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Marginal {
    pub tau: (f64, f64),
    pub tau_prime: (f64, f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionOut {
    pub center: (f64, f64),
    pub shape: Sym2,
    pub level: f64,
    pub chi2_crit: f64,
    pub area: f64,
    pub boundary: Vec<(f64, f64)>,
}

/// Machine-readable result of `analyze`.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisResult {
    pub design: &'static str,
    pub sample: SampleInfo,
    pub spec: SpecEcho,
    pub estimates: Estimates,
    pub effect: Effect,
    pub omega: OmegaOut,
    pub marginal: Marginal,
    pub region: RegionOut,
    pub band: Option<UniformBand>,
    pub warnings: Vec<Warning>,
}

struct Fitted {
    estimates: Estimates,
    line: EffectLine,
    omega: OmegaMatrix,
    level_variance: f64,
    ill_conditioned: bool,
}

fn fit(sample: &Sample, spec: &FitSpec) -> Result<Fitted, CliError> {
    let variances = nn_variance(sample, spec)?;
    if sample.treatment().is_some() {
        let fz = estimate_fuzzy(sample, spec)?;
        let line = fz.line()?;
        let omega = assemble_omega_fuzzy(&fz, &variances)?;
        let level_variance = fuzzy_level_variance(&fz, &variances)?;
        Ok(Fitted {
            estimates: Estimates::Fuzzy {
                outcome: (&fz.y_part).into(),
                first_stage: (&fz.t_part).into(),
                tau_frd: line.level,
                tau_prime_frd: line.slope,
                tau_prime_first_stage_se: fz.tau_prime_t_se,
            },
            line,
            omega,
            level_variance,
            ill_conditioned: fz.y_part.ill_conditioned() || fz.t_part.ill_conditioned(),
        })
    } else {
        let est = estimate_sharp(sample, spec)?;
        let omega = assemble_omega(&est, &variances)?;
        Ok(Fitted {
            estimates: Estimates::Sharp((&est).into()),
            line: est.line(),
            level_variance: omega.v,
            omega,
            ill_conditioned: est.ill_conditioned(),
        })
    }
}

/// Runs the full pipeline on a loaded sample.
pub fn analyze(
    sample: &Sample,
    columns: (&str, &str, Option<&str>),
    opts: &AnalyzeOptions,
) -> Result<AnalysisResult, CliError> {
    let mut spec = opts.spec.clone();
    let mut warnings = Vec::new();
    let bandwidth_source = match (opts.h, opts.b) {
        (Some(h), Some(b)) => {
            spec.h = h;
            spec.b = b;
            "user"
        }
        (Some(h), None) => {
            spec.h = h;
            spec.b = h;
            warnings.push(Warning::new("b_set_to_h", format!("no --b given, using b = h = {h}")));
            "user_h"
        }
        (None, Some(_)) => {
            return Err(CliError::usage("bad_bandwidth", "--b requires --h"));
        }
        (None, None) => {
            let bw = rule_of_thumb_bandwidths(sample, spec.p, &spec.kernel)?;
            spec.h = bw.h;
            spec.b = bw.b;
            for w in bw.warnings {
                warnings.push(Warning::new(w.code(), bandwidth_message(w)));
            }
            "rule_of_thumb"
        }
    };
    spec.validate()?;

    let counts = validate_sample(sample, &spec);
    for issue in counts.issues.iter().filter(|i| !i.fatal) {
        warnings.push(Warning::new(issue_code(issue.code), issue.message.clone()));
    }
    let fitted = fit(sample, &spec)?;
    if fitted.ill_conditioned {
        warnings.push(Warning::new(
            "ill_conditioned",
            "a local design matrix is badly conditioned; estimates may be unstable",
        ));
    }

    let line = fitted.line;
    let om = fitted.omega.omega_h;
    let tau = rbc_marginal_interval(line.level, fitted.level_variance, spec.alpha)?;
    let tau_prime = rbc_marginal_interval(line.slope, om[1][1], spec.alpha)?;
    let region = ConfidenceRegion::new((line.level, line.slope), om, spec.alpha)?;
    let boundary = region.boundary(opts.boundary_points)?;

    let band = match opts.band {
        BandChoice::None => None,
        choice => {
            let variant = if choice == BandChoice::Envelope {
                BandVariant::Envelope
            } else {
                BandVariant::Uniform
            };
            if spec.delta_lo == 0.0 && spec.delta_hi == 0.0 {
                warnings.push(Warning::new(
                    "band_collapsed",
                    "both extrapolation reaches are zero; the band is the marginal interval at the cutoff",
                ));
            }
            let request = BandRequest::new(spec.delta_lo, spec.delta_hi, spec.alpha)
                .with_grid(opts.grid)
                .with_variant(variant);
            Some(rdjoint_core::band::uniform_band(&line, &fitted.omega, &request)?)
        }
    };

    Ok(AnalysisResult {
        design: if sample.treatment().is_some() { "fuzzy" } else { "sharp" },
        sample: SampleInfo {
            n: sample.len(),
            cutoff: sample.cutoff(),
            running: columns.0.to_string(),
            outcome: columns.1.to_string(),
            treatment: columns.2.map(str::to_string),
            counts,
        },
        spec: SpecEcho { spec, bandwidth_source },
        estimates: fitted.estimates,
        effect: Effect {
            tau: line.level,
            tau_prime: line.slope,
        },
        omega: (&fitted.omega).into(),
        marginal: Marginal { tau, tau_prime },
        region: RegionOut {
            center: region.center,
            shape: region.shape,
            level: region.level,
            chi2_crit: region.chi2_crit,
            area: region.area(),
            boundary,
        },
        band,
        warnings,
    })
}

fn issue_code(code: rdjoint_core::sample::IssueCode) -> &'static str {
    use rdjoint_core::sample::IssueCode::*;
    match code {
        EmptyControlSide => "empty_control_side",
        EmptyTreatedSide => "empty_treated_side",
        SingularDesign => "singular_design",
        ThinWindow => "thin_window",
    }
}

fn bandwidth_message(w: BandwidthWarning) -> &'static str {
    match w {
        BandwidthWarning::FallbackMain => "plug-in formula for h degenerate; using sd(x) n^(-1/(2p+3))",
        BandwidthWarning::FallbackBias => "plug-in formula for b degenerate; using sd(x) n^(-1/(2p+5))",
        BandwidthWarning::ClampedMain => "h clamped to the data range",
        BandwidthWarning::ClampedBias => "b clamped to the data range",
    }
}
