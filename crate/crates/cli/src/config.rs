//! Plain-text `key = value` experiment files for `simulate`.
//!
//! Lines starting with `#` and blank lines are ignored. A `preset` key
//! (`benchmark` or `linear_effect`) seeds every DGP field; later keys
//! override it. Recognized keys:
//!
//! ```text
//! preset          benchmark | linear_effect
//! mu_left         comma-separated coefficients, constant first
//! mu_right        same
//! noise_sd_left   real >= 0
//! noise_sd_right  real >= 0
//! x_dist          uniform(lo, hi) | truncated_normal(mean, sd, lo, hi)
//! prob_left       first-stage probability polynomial (fuzzy designs)
//! prob_right      same; give both or neither
//! seed            integer
//! n, reps         integers
//! p, q            polynomial orders (q defaults to p + 1)
//! h, b            fixed bandwidths; omit h for plug-in bandwidths
//! kernel          triangular | epanechnikov | uniform
//! alpha           level in (0, 1)
//! delta_lo        extrapolation reach below the cutoff
//! delta_hi        extrapolation reach above the cutoff
//! nn_neighbors    integer >= 1
//! grid            band grid size
//! targets         comma-separated subset of region, band, marginal
//! ```
//!
//! Without a `targets` key every target is scored, except the band for a
//! sharp design whose treatment effect is not linear.

use std::collections::HashMap;
use std::str::FromStr;

use rdjoint_core::sim::{BandwidthRule, DgpSpec, ExperimentConfig, FirstStage, Polynomial, RunningDist, Targets};
use rdjoint_core::{FitSpec, Kernel};

use crate::error::CliError;

const KEYS: &[&str] = &[
    "preset",
    "mu_left",
    "mu_right",
    "noise_sd_left",
    "noise_sd_right",
    "x_dist",
    "prob_left",
    "prob_right",
    "seed",
    "n",
    "reps",
    "p",
    "q",
    "h",
    "b",
    "kernel",
    "alpha",
    "delta_lo",
    "delta_hi",
    "nn_neighbors",
    "grid",
    "targets",
];

fn bad(message: impl Into<String>) -> CliError {
    CliError::usage("bad_config", message)
}

fn bad_dgp(message: impl Into<String>) -> CliError {
    CliError::usage("bad_dgp", message)
}

struct Entries {
    values: HashMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = HashMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected `key = value`", k + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(bad(format!("line {}: unknown key {key:?}", k + 1)));
            }
            if values
                .insert(key.to_string(), (k + 1, value.trim().to_string()))
                .is_some()
            {
                return Err(bad(format!("line {}: duplicate key {key:?}", k + 1)));
            }
        }
        Ok(Entries { values })
    }

    fn raw(&self, key: &str) -> Option<&(usize, String)> {
        self.values.get(key)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.raw(key)
            .map(|(line, v)| {
                v.parse::<T>()
                    .map_err(|_| bad(format!("line {line}: cannot parse {key} = {v:?}")))
            })
            .transpose()
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.raw(key)
            .map(|(line, v)| {
                parse_list(v).ok_or_else(|| bad(format!("line {line}: {key} needs comma-separated numbers")))
            })
            .transpose()
    }
}

fn parse_list(v: &str) -> Option<Vec<f64>> {
    v.split(',')
        .map(|s| s.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
        .collect()
}

fn parse_dist(line: usize, v: &str) -> Result<RunningDist, CliError> {
    let err = || {
        bad(format!(
            "line {line}: x_dist must be uniform(lo, hi) or truncated_normal(mean, sd, lo, hi)"
        ))
    };
    let (name, rest) = v.split_once('(').ok_or_else(err)?;
    let args = parse_list(rest.strip_suffix(')').ok_or_else(err)?).ok_or_else(err)?;
    match (name.trim(), args.as_slice()) {
        ("uniform", &[lo, hi]) => Ok(RunningDist::Uniform { lo, hi }),
        ("truncated_normal", &[mean, sd, lo, hi]) => Ok(RunningDist::TruncatedNormal { mean, sd, lo, hi }),
        _ => Err(err()),
    }
}

/// Parses an experiment file into a validated configuration.
pub fn parse_experiment(text: &str) -> Result<ExperimentConfig, CliError> {
    let e = Entries::parse(text)?;
    let mut dgp = match e.raw("preset").map(|(l, v)| (*l, v.as_str())) {
        None | Some((_, "benchmark")) => DgpSpec::benchmark(),
        Some((_, "linear_effect")) => DgpSpec::linear_effect_benchmark(),
        Some((line, other)) => return Err(bad(format!("line {line}: unknown preset {other:?}"))),
    };
    if let Some(c) = e.list("mu_left")? {
        dgp.mu_left = Polynomial::new(c);
    }
    if let Some(c) = e.list("mu_right")? {
        dgp.mu_right = Polynomial::new(c);
    }
    if let Some(v) = e.get("noise_sd_left")? {
        dgp.noise_sd_left = v;
    }
    if let Some(v) = e.get("noise_sd_right")? {
        dgp.noise_sd_right = v;
    }
    if let Some((line, v)) = e.raw("x_dist") {
        dgp.x_dist = parse_dist(*line, v)?;
    }
    match (e.list("prob_left")?, e.list("prob_right")?) {
        (Some(l), Some(r)) => {
            dgp.fuzzy = Some(FirstStage {
                prob_left: Polynomial::new(l),
                prob_right: Polynomial::new(r),
            })
        }
        (None, None) => {}
        _ => return Err(bad_dgp("prob_left and prob_right must be given together")),
    }
    if let Some(v) = e.get("seed")? {
        dgp.seed = v;
    }
    dgp.validate().map_err(|err| bad_dgp(err.to_string()))?;

    let p: usize = e.get("p")?.unwrap_or(1);
    let q: usize = e.get("q")?.unwrap_or(p + 1);
    let h: Option<f64> = e.get("h")?;
    let b: Option<f64> = e.get("b")?;
    let bandwidth = if h.is_some() {
        BandwidthRule::Fixed
    } else {
        BandwidthRule::RuleOfThumb
    };
    if h.is_none() && b.is_some() {
        return Err(bad("b without h: give h as well, or neither for plug-in bandwidths"));
    }
    let h = h.unwrap_or(1.0);
    let mut spec = FitSpec::new(h, b.unwrap_or(h)).with_orders(p, q);
    if let Some((line, v)) = e.raw("kernel") {
        spec.kernel = Kernel::from_str(v).map_err(|_| bad(format!("line {line}: unknown kernel {v:?}")))?;
    }
    if let Some(a) = e.get::<f64>("alpha")? {
        if !(a > 0.0 && a < 1.0) {
            return Err(CliError::usage(
                "bad_alpha",
                format!("alpha must lie in (0, 1), got {a}"),
            ));
        }
        spec.alpha = a;
    }
    spec.delta_lo = e.get("delta_lo")?.unwrap_or(0.0);
    spec.delta_hi = e.get("delta_hi")?.unwrap_or(0.0);
    if let Some(j) = e.get("nn_neighbors")? {
        spec.nn_neighbors = j;
    }
    let n = e.get("n")?.ok_or_else(|| bad("missing key n"))?;
    let reps = e.get("reps")?.ok_or_else(|| bad("missing key reps"))?;
    let mut cfg = ExperimentConfig::new(dgp, spec, n, reps);
    cfg.bandwidth = bandwidth;
    if let Some(g) = e.get("grid")? {
        cfg.grid_size = g;
    }
    if let Some((line, v)) = e.raw("targets") {
        let mut t = Targets {
            region: false,
            band: false,
            marginal: false,
        };
        for name in v.split(',').map(str::trim) {
            match name {
                "region" => t.region = true,
                "band" => t.band = true,
                "marginal" => t.marginal = true,
                other => return Err(bad(format!("line {line}: unknown target {other:?}"))),
            }
        }
        cfg.targets = t;
    } else if !cfg.dgp.is_fuzzy() && !cfg.dgp.effect_is_linear() {
        cfg.targets.band = false;
    }
    cfg.validate().map_err(|err| bad(err.to_string()))?;
    Ok(cfg)
}
