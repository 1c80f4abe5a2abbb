//! Monte Carlo coverage of the joint region, the extrapolation bands and the
//! marginal interval.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::dgp::{generate_dgp, DgpSpec};
use crate::band::{uniform_band, BandRequest, BandVariant, EffectLine};
use crate::bandwidth::rule_of_thumb_bandwidths;
use crate::error::{Error, Result};
use crate::fuzzy::{assemble_omega_fuzzy, estimate_fuzzy, fuzzy_level_variance};
use crate::inference::{rbc_marginal_interval, ConfidenceRegion};
use crate::math;
use crate::numerics::CompensatedSum;
use crate::sample::{FitSpec, Sample};
use crate::sharp::{assemble_omega, estimate_sharp, nn_variance, OmegaMatrix};

/// Relative slack in the per-replication nesting check.
const NESTING_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum BandwidthRule {
    /// Use `h` and `b` from the fit spec.
    Fixed,
    /// Plug-in bandwidths recomputed on every replication.
    RuleOfThumb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Targets {
    pub region: bool,
    pub band: bool,
    pub marginal: bool,
}

impl Targets {
    pub fn all() -> Self {
        Targets {
            region: true,
            band: true,
            marginal: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentConfig {
    pub dgp: DgpSpec,
    /// Orders, kernel, level and extrapolation reach; `h` and `b` are used
    /// only with [`BandwidthRule::Fixed`].
    pub spec: FitSpec,
    pub bandwidth: BandwidthRule,
    pub n: usize,
    pub reps: usize,
    pub targets: Targets,
    pub grid_size: usize,
}

impl ExperimentConfig {
    pub fn new(dgp: DgpSpec, spec: FitSpec, n: usize, reps: usize) -> Self {
        ExperimentConfig {
            dgp,
            spec,
            bandwidth: BandwidthRule::Fixed,
            n,
            reps,
            targets: Targets::all(),
            grid_size: crate::band::DEFAULT_GRID,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        self.spec.validate()?;
        if self.n < 2 {
            return Err(Error::InvalidSpec(alloc::format!(
                "n must be at least 2, got {}",
                self.n
            )));
        }
        if self.targets.band {
            self.band_request(BandVariant::Uniform).validate()?;
            if !self.dgp.is_fuzzy() && !self.dgp.effect_is_linear() {
                return Err(Error::InvalidSpec(
                    "band coverage needs a treatment effect that is exactly linear in x".into(),
                ));
            }
        }
        Ok(())
    }

    fn band_request(&self, variant: BandVariant) -> BandRequest {
        BandRequest::new(self.spec.delta_lo, self.spec.delta_hi, self.spec.alpha)
            .with_grid(self.grid_size)
            .with_variant(variant)
    }
}

/// Result of one successful replication. Fields for targets that were not
/// requested are `None`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReplicationHits {
    pub h: f64,
    pub b: f64,
    pub region: Option<bool>,
    pub region_area: Option<f64>,
    pub band: Option<bool>,
    pub envelope: Option<bool>,
    pub band_width: Option<f64>,
    pub marginal: Option<bool>,
    /// `false` when the marginal, uniform and envelope half-widths at 0 are
    /// not ordered.
    pub nested: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ReplicationOutcome {
    Hits(ReplicationHits),
    /// Estimation or inference failed; carries the error code.
    Failed(String),
}

struct Fitted {
    line: EffectLine,
    omega: Option<OmegaMatrix>,
    level_variance: f64,
}

fn fit(sample: &Sample, spec: &FitSpec, fuzzy: bool, need_joint: bool) -> Result<Fitted> {
    let variances = nn_variance(sample, spec)?;
    if fuzzy {
        let fz = estimate_fuzzy(sample, spec)?;
        let level_variance = fuzzy_level_variance(&fz, &variances)?;
        let (omega, slope) = if need_joint {
            (Some(assemble_omega_fuzzy(&fz, &variances)?), fz.tau_prime()?)
        } else {
            (None, fz.tau_prime_frd.unwrap_or(f64::NAN))
        };
        Ok(Fitted {
            line: EffectLine {
                level: fz.tau_frd,
                slope,
            },
            omega,
            level_variance,
        })
    } else {
        let est = estimate_sharp(sample, spec)?;
        let omega = assemble_omega(&est, &variances)?;
        Ok(Fitted {
            line: est.line(),
            level_variance: omega.v,
            omega: Some(omega),
        })
    }
}

fn replicate(cfg: &ExperimentConfig, truth: &EffectLine, rep: u64) -> Result<ReplicationHits> {
    let sample = generate_dgp(&cfg.dgp, cfg.n, rep)?;
    let mut spec = cfg.spec.clone();
    if cfg.bandwidth == BandwidthRule::RuleOfThumb {
        let bw = rule_of_thumb_bandwidths(&sample, spec.p, &spec.kernel)?;
        spec.h = bw.h;
        spec.b = bw.b;
    }
    let targets = cfg.targets;
    let need_joint = targets.region || targets.band;
    let fitted = fit(&sample, &spec, cfg.dgp.is_fuzzy(), need_joint)?;
    let alpha = spec.alpha;
    let mut hits = ReplicationHits {
        h: spec.h,
        b: spec.b,
        region: None,
        region_area: None,
        band: None,
        envelope: None,
        band_width: None,
        marginal: None,
        nested: true,
    };

    let (lo, hi) = rbc_marginal_interval(fitted.line.level, fitted.level_variance, alpha)?;
    if targets.marginal {
        hits.marginal = Some(lo <= truth.level && truth.level <= hi);
    }
    let Some(omega) = fitted.omega else {
        return Ok(hits);
    };
    if targets.region {
        let region = ConfidenceRegion::new((fitted.line.level, fitted.line.slope), omega.omega_h, alpha)?;
        hits.region = Some(region.contains(truth.level, truth.slope));
        hits.region_area = Some(region.area());
    }
    let uniform = uniform_band(&fitted.line, &omega, &cfg.band_request(BandVariant::Uniform))?;
    let envelope = uniform_band(&fitted.line, &omega, &cfg.band_request(BandVariant::Envelope))?;
    if targets.band {
        hits.band = Some(uniform.covers(truth));
        hits.envelope = Some(envelope.covers(truth));
        hits.band_width = Some(uniform.mean_width());
    }
    let marginal_half = 0.5 * (hi - lo);
    let band_half = uniform.half_width_near(0.0);
    let envelope_half = envelope.half_width_near(0.0);
    let slack = NESTING_SLACK * envelope_half;
    hits.nested = marginal_half <= band_half + slack && band_half <= envelope_half + slack;
    Ok(hits)
}

/// Runs replication `rep` (the generator stream index).
pub fn run_replication(cfg: &ExperimentConfig, rep: u64) -> ReplicationOutcome {
    let truth = cfg.dgp.true_effect();
    match replicate(cfg, &truth, rep) {
        Ok(h) => ReplicationOutcome::Hits(h),
        Err(e) => ReplicationOutcome::Failed(e.code().to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Rate {
    pub hits: usize,
    /// `hits / valid_reps`, 0 when there are no valid replications.
    pub rate: f64,
    /// Binomial standard error `√(rate (1 − rate) / valid_reps)`.
    pub mc_se: f64,
}

impl Rate {
    fn new(hits: usize, valid: usize) -> Self {
        if valid == 0 {
            return Rate {
                hits,
                rate: 0.0,
                mc_se: 0.0,
            };
        }
        let rate = hits as f64 / valid as f64;
        Rate {
            hits,
            rate,
            mc_se: math::sqrt(rate * (1.0 - rate) / valid as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoverageReport {
    pub n: usize,
    pub reps: usize,
    pub valid_reps: usize,
    pub alpha: f64,
    pub truth: EffectLine,
    pub region: Option<Rate>,
    pub band: Option<Rate>,
    pub envelope: Option<Rate>,
    pub marginal: Option<Rate>,
    pub mean_region_area: Option<f64>,
    pub mean_band_width: Option<f64>,
    pub mean_h: Option<f64>,
    pub mean_b: Option<f64>,
    /// Failed replications keyed by error code.
    pub failures: BTreeMap<String, usize>,
    pub nesting_violations: usize,
}

fn mean(sum: &CompensatedSum, count: usize) -> Option<f64> {
    (count > 0).then(|| sum.value() / count as f64)
}

/// Aggregates outcomes listed in replication order. Counts are integers and
/// sums are compensated, so the result does not depend on how the outcomes
/// were produced.
pub fn aggregate(cfg: &ExperimentConfig, outcomes: &[ReplicationOutcome]) -> CoverageReport {
    let mut failures = BTreeMap::new();
    let mut valid = 0;
    let (mut region, mut band, mut envelope, mut marginal) = (0, 0, 0, 0);
    let mut nesting_violations = 0;
    let (mut area, mut width, mut h, mut b) = Default::default();
    let (mut n_area, mut n_width) = (0, 0);
    for outcome in outcomes {
        match outcome {
            ReplicationOutcome::Failed(code) => *failures.entry(code.clone()).or_insert(0) += 1,
            ReplicationOutcome::Hits(r) => {
                valid += 1;
                region += usize::from(r.region == Some(true));
                band += usize::from(r.band == Some(true));
                envelope += usize::from(r.envelope == Some(true));
                marginal += usize::from(r.marginal == Some(true));
                nesting_violations += usize::from(!r.nested);
                CompensatedSum::add(&mut h, r.h);
                CompensatedSum::add(&mut b, r.b);
                if let Some(a) = r.region_area {
                    CompensatedSum::add(&mut area, a);
                    n_area += 1;
                }
                if let Some(w) = r.band_width {
                    CompensatedSum::add(&mut width, w);
                    n_width += 1;
                }
            }
        }
    }
    let t = cfg.targets;
    CoverageReport {
        n: cfg.n,
        reps: outcomes.len(),
        valid_reps: valid,
        alpha: cfg.spec.alpha,
        truth: cfg.dgp.true_effect(),
        region: t.region.then(|| Rate::new(region, valid)),
        band: t.band.then(|| Rate::new(band, valid)),
        envelope: t.band.then(|| Rate::new(envelope, valid)),
        marginal: t.marginal.then(|| Rate::new(marginal, valid)),
        mean_region_area: mean(&area, n_area),
        mean_band_width: mean(&width, n_width),
        mean_h: mean(&h, valid),
        mean_b: mean(&b, valid),
        failures,
        nesting_violations,
    }
}

/// Runs `cfg.reps` replications sequentially, replication `r` on stream `r`.
pub fn coverage_experiment(cfg: &ExperimentConfig) -> Result<CoverageReport> {
    cfg.validate()?;
    let outcomes: Vec<ReplicationOutcome> = (0..cfg.reps as u64).map(|r| run_replication(cfg, r)).collect();
    Ok(aggregate(cfg, &outcomes))
}
