//! The data model: observations around a cutoff, the estimation
//! configuration, and pre-fit diagnostics.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelFn};
use crate::locpoly::Side;

/// Running variable, outcome and optional binary treatment, plus the cutoff.
///
/// Estimators only ever see `running - cutoff`; observations exactly at the
/// cutoff belong to the treated (right) side.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    running: Vec<f64>,
    outcome: Vec<f64>,
    treatment: Option<Vec<f64>>,
    cutoff: f64,
}

impl Sample {
    pub fn new(running: Vec<f64>, outcome: Vec<f64>, treatment: Option<Vec<f64>>, cutoff: f64) -> Result<Self> {
        if running.is_empty() {
            return Err(Error::InvalidSample("sample is empty".into()));
        }
        if running.len() != outcome.len() {
            return Err(Error::InvalidSample(format!(
                "running has {} values but outcome has {}",
                running.len(),
                outcome.len()
            )));
        }
        if !cutoff.is_finite() {
            return Err(Error::InvalidSample("cutoff must be finite".into()));
        }
        if let Some(i) = running.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSample(format!("non-finite running value at row {i}")));
        }
        if let Some(i) = outcome.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSample(format!("non-finite outcome at row {i}")));
        }
        if let Some(t) = &treatment {
            if t.len() != running.len() {
                return Err(Error::InvalidSample(format!(
                    "running has {} values but treatment has {}",
                    running.len(),
                    t.len()
                )));
            }
            if let Some(i) = t.iter().position(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::Domain(format!(
                    "treatment at row {i} is {}, expected 0 or 1",
                    t[i]
                )));
            }
        }
        Ok(Sample {
            running,
            outcome,
            treatment,
            cutoff,
        })
    }

    pub fn len(&self) -> usize {
        self.running.len()
    }

    pub fn is_empty(&self) -> bool {
        self.running.is_empty()
    }

    pub fn running(&self) -> &[f64] {
        &self.running
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn treatment(&self) -> Option<&[f64]> {
        self.treatment.as_deref()
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// `X_i - c` for every observation.
    pub fn centered(&self) -> Vec<f64> {
        self.running.iter().map(|x| x - self.cutoff).collect()
    }

    pub fn side_counts(&self) -> (usize, usize) {
        let right = self.running.iter().filter(|&&x| x >= self.cutoff).count();
        (self.len() - right, right)
    }

    /// Same design, new outcome vector.
    pub fn with_outcome(&self, outcome: Vec<f64>) -> Result<Self> {
        Sample::new(self.running.clone(), outcome, self.treatment.clone(), self.cutoff)
    }

    /// Same design and outcome, new (or removed) treatment column.
    pub fn with_treatment(&self, treatment: Option<Vec<f64>>) -> Result<Self> {
        Sample::new(self.running.clone(), self.outcome.clone(), treatment, self.cutoff)
    }
}

/// Estimation configuration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitSpec {
    /// Order of the main local polynomial.
    pub p: usize,
    /// Order of the pilot fit used for bias estimation, at least `p + 1`.
    pub q: usize,
    /// Main bandwidth.
    pub h: f64,
    /// Bias (pilot) bandwidth.
    pub b: f64,
    pub kernel: Kernel,
    /// One minus the coverage level.
    pub alpha: f64,
    /// Extrapolation reach below the cutoff.
    pub delta_lo: f64,
    /// Extrapolation reach above the cutoff.
    pub delta_hi: f64,
    /// Neighbors used by the nearest-neighbor variance estimator.
    pub nn_neighbors: usize,
}

impl FitSpec {
    /// Local linear fit with local quadratic bias estimation and defaults for
    /// everything else.
    pub fn new(h: f64, b: f64) -> Self {
        FitSpec {
            p: 1,
            q: 2,
            h,
            b,
            kernel: Kernel::Triangular,
            alpha: 0.05,
            delta_lo: 0.0,
            delta_hi: 0.0,
            nn_neighbors: 3,
        }
    }

    pub fn with_orders(mut self, p: usize, q: usize) -> Self {
        self.p = p;
        self.q = q;
        self
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_deltas(mut self, delta_lo: f64, delta_hi: f64) -> Self {
        self.delta_lo = delta_lo;
        self.delta_hi = delta_hi;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.p < 1 {
            return bad(format!("p must be at least 1, got {}", self.p));
        }
        if self.q < self.p + 1 {
            return bad(format!("q must be at least p + 1 = {}, got {}", self.p + 1, self.q));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return bad(format!("h must be positive, got {}", self.h));
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return bad(format!("b must be positive, got {}", self.b));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.delta_lo.is_finite() && self.delta_lo >= 0.0) {
            return bad(format!("delta_lo must be nonnegative, got {}", self.delta_lo));
        }
        if !(self.delta_hi.is_finite() && self.delta_hi >= 0.0) {
            return bad(format!("delta_hi must be nonnegative, got {}", self.delta_hi));
        }
        if self.nn_neighbors < 1 {
            return bad("nn_neighbors must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum IssueCode {
    EmptyControlSide,
    EmptyTreatedSide,
    SingularDesign,
    ThinWindow,
}

impl IssueCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::EmptyControlSide => "empty control side",
            IssueCode::EmptyTreatedSide => "empty treated side",
            IssueCode::SingularDesign => "singular design",
            IssueCode::ThinWindow => "thin window",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Issue {
    pub code: IssueCode,
    pub fatal: bool,
    pub message: String,
}

/// Per-side observation counts and coded diagnostics.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValidationReport {
    pub n_left: usize,
    pub n_right: usize,
    pub n_left_in_h: usize,
    pub n_right_in_h: usize,
    pub n_left_in_b: usize,
    pub n_right_in_b: usize,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_fatal(&self) -> bool {
        self.issues.iter().any(|i| i.fatal)
    }

    pub fn has(&self, code: IssueCode) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }
}

/// Observations with positive kernel weight and their number of distinct
/// running values.
fn window_counts<K: KernelFn>(xc: &[f64], side: Side, bw: f64, kernel: &K) -> (usize, usize) {
    let mut inside: Vec<f64> = xc
        .iter()
        .copied()
        .filter(|&x| side.contains(x) && kernel.weight(x / bw) > 0.0)
        .collect();
    let count = inside.len();
    inside.sort_by(|a, b| a.total_cmp(b));
    inside.dedup();
    (count, inside.len())
}

/// Counts observations per side and per window and flags designs that cannot
/// identify the required number of polynomial coefficients.
pub fn validate_sample(sample: &Sample, spec: &FitSpec) -> ValidationReport {
    let xc = sample.centered();
    let (n_left, n_right) = sample.side_counts();
    let mut report = ValidationReport {
        n_left,
        n_right,
        ..Default::default()
    };

    if n_left == 0 {
        report.issues.push(Issue {
            code: IssueCode::EmptyControlSide,
            fatal: true,
            message: "no observations below the cutoff".into(),
        });
    }
    if n_right == 0 {
        report.issues.push(Issue {
            code: IssueCode::EmptyTreatedSide,
            fatal: true,
            message: "no observations at or above the cutoff".into(),
        });
    }

    for side in [Side::Left, Side::Right] {
        let (in_h, distinct_h) = window_counts(&xc, side, spec.h, &spec.kernel);
        let (in_b, distinct_b) = window_counts(&xc, side, spec.b, &spec.kernel);
        match side {
            Side::Left => {
                report.n_left_in_h = in_h;
                report.n_left_in_b = in_b;
            }
            Side::Right => {
                report.n_right_in_h = in_h;
                report.n_right_in_b = in_b;
            }
        }
        let side_empty = match side {
            Side::Left => n_left == 0,
            Side::Right => n_right == 0,
        };
        if side_empty {
            continue;
        }
        if distinct_h < spec.p + 1 {
            report.issues.push(Issue {
                code: IssueCode::SingularDesign,
                fatal: true,
                message: format!(
                    "{} side has {distinct_h} distinct running values inside h, order {} needs {}",
                    side.name(),
                    spec.p,
                    spec.p + 1
                ),
            });
        }
        if distinct_b < spec.q + 1 {
            report.issues.push(Issue {
                code: IssueCode::SingularDesign,
                fatal: true,
                message: format!(
                    "{} side has {distinct_b} distinct running values inside b, order {} needs {}",
                    side.name(),
                    spec.q,
                    spec.q + 1
                ),
            });
        }
        if in_h < 2 * (spec.p + 1) && distinct_h > spec.p {
            report.issues.push(Issue {
                code: IssueCode::ThinWindow,
                fatal: false,
                message: format!("{} side has only {in_h} observations inside h", side.name()),
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Sample::new(vec![], vec![], None, 0.0).is_err());
        assert!(Sample::new(vec![1.0], vec![1.0, 2.0], None, 0.0).is_err());
        assert!(Sample::new(vec![f64::NAN], vec![1.0], None, 0.0).is_err());
        assert!(matches!(
            Sample::new(vec![1.0], vec![1.0], Some(vec![0.5]), 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ties_go_to_treated_side() {
        let s = Sample::new(vec![-1.0, 2.0, 2.0], vec![0.0; 3], None, 2.0).unwrap();
        assert_eq!(s.side_counts(), (1, 2));
    }

    #[test]
    fn spec_validation() {
        assert!(FitSpec::new(0.5, 0.5).validate().is_ok());
        assert!(FitSpec::new(0.5, 0.5).with_orders(1, 1).validate().is_err());
        assert!(FitSpec::new(0.0, 0.5).validate().is_err());
        assert!(FitSpec::new(0.5, 0.5).with_alpha(1.0).validate().is_err());
        assert!(FitSpec::new(0.5, 0.5).with_deltas(-1.0, 0.0).validate().is_err());
    }

    #[test]
    fn well_populated_window_has_no_fatal_issue() {
        let x = grid(100, -1.0, 1.0);
        let s = Sample::new(x, vec![0.0; 100], None, 0.0).unwrap();
        let r = validate_sample(&s, &FitSpec::new(0.5, 0.5));
        assert!(!r.is_fatal(), "{r:?}");
        assert_eq!(r.n_left + r.n_right, 100);
        assert_eq!(r.n_left_in_h, 25);
    }

    #[test]
    fn all_points_below_cutoff() {
        let x = grid(50, -1.0, -0.1);
        let s = Sample::new(x, vec![0.0; 50], None, 0.0).unwrap();
        let r = validate_sample(&s, &FitSpec::new(0.5, 0.5));
        assert!(r.is_fatal());
        assert!(r.has(IssueCode::EmptyTreatedSide));
        assert_eq!(IssueCode::EmptyTreatedSide.as_str(), "empty treated side");
    }

    #[test]
    fn single_point_in_window_is_singular() {
        let mut x = grid(50, -1.0, 0.0);
        x.extend([0.05, 0.6, 0.8, 0.9]);
        let n = x.len();
        let s = Sample::new(x, vec![0.0; n], None, 0.0).unwrap();
        let r = validate_sample(&s, &FitSpec::new(0.1, 1.0));
        assert!(r.is_fatal());
        assert!(r.has(IssueCode::SingularDesign));
        assert_eq!(r.n_right_in_h, 1);
    }
}
