//! Convergence curves along nested designs.
//!
//! Each curve evaluates the predictor at a fixed target on the prefixes
//! `design.prefix(n)` for `n` in an `n_list`. The helpers [`record_at`] and
//! [`extended_records`] expose the per-size work so callers can distribute
//! it; the curve functions run sequentially.

use alloc::format;
use alloc::vec::Vec;

use crate::designs::Design;
use crate::error::{Error, Result};
use crate::extended::{self, ExtendedOptions};
use crate::functions::TestFunction;
use crate::kernels::Kernel;
use crate::solver::GramSystem;

/// One row of a convergence curve.
///
/// `prediction` and `abs_error` are NaN when the curve carries no test
/// function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRecord {
    pub n: usize,
    pub sigma2: f64,
    pub lebesgue: f64,
    pub prediction: f64,
    pub abs_error: f64,
    pub effective_rank: usize,
    pub condition_estimate: f64,
    pub preclamp_sigma2: f64,
}

/// Arithmetic used to build each prefix system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Precision {
    /// Truncated eigendecomposition in `f64`.
    Double { truncation_tol: f64 },
    /// Untruncated nested Cholesky in adaptive multi-precision.
    Extended(ExtendedOptions),
}

impl Default for Precision {
    fn default() -> Self {
        Precision::Double {
            truncation_tol: crate::DEFAULT_TRUNCATION_TOL,
        }
    }
}

/// `{4, 8, ..., 256}`.
pub fn default_n_list() -> Vec<usize> {
    (2..=8).map(|p| 1usize << p).collect()
}

fn check_n_list(design: &Design, n_list: &[usize]) -> Result<()> {
    if n_list.is_empty() {
        return Err(Error::Precondition("n_list is empty".into()));
    }
    if let Some(&n) = n_list.iter().find(|&&n| n > design.len()) {
        return Err(Error::Precondition(format!(
            "n = {n} exceeds the design size {}",
            design.len()
        )));
    }
    Ok(())
}

/// Double-precision record on the prefix of size `n`.
///
/// `samples` holds `f(x_i)` for at least the first `n` design points and
/// `truth` is `f(x)`.
pub fn record_at(
    kernel: &Kernel,
    design: &Design,
    x: &[f64],
    n: usize,
    truncation_tol: f64,
    samples: Option<(&[f64], f64)>,
) -> Result<CurveRecord> {
    let system = GramSystem::build(kernel, &design.prefix(n), truncation_tol)?;
    let p = system.kriging_weights(x)?;
    let (prediction, abs_error) = match samples {
        Some((s, truth)) => {
            let value = p.predict(&s[..n])?;
            (value, libm::fabs(truth - value))
        }
        None => (f64::NAN, f64::NAN),
    };
    Ok(CurveRecord {
        n,
        sigma2: p.variance,
        lebesgue: p.lebesgue,
        prediction,
        abs_error,
        effective_rank: system.effective_rank(),
        condition_estimate: system.condition_estimate(),
        preclamp_sigma2: p.preclamp_variance,
    })
}

/// Multi-precision records for every size in `n_list`, from one nested
/// factorization.
pub fn extended_records(
    kernel: &Kernel,
    design: &Design,
    x: &[f64],
    n_list: &[usize],
    samples: Option<(&[f64], f64)>,
    opts: &ExtendedOptions,
) -> Result<Vec<CurveRecord>> {
    let points = extended::nested_curve(kernel, design, x, n_list, samples.map(|s| s.0), opts)?;
    Ok(points
        .iter()
        .map(|p| {
            let (prediction, abs_error) = match (p.prediction, samples) {
                (Some(v), Some((_, truth))) => (v, libm::fabs(truth - v)),
                _ => (f64::NAN, f64::NAN),
            };
            CurveRecord {
                n: p.n,
                sigma2: p.sigma2,
                lebesgue: p.lebesgue,
                prediction,
                abs_error,
                effective_rank: p.n,
                condition_estimate: p.pivot_ratio,
                preclamp_sigma2: p.sigma2,
            }
        })
        .collect())
}

fn run(
    kernel: &Kernel,
    design: &Design,
    x: &[f64],
    n_list: &[usize],
    samples: Option<(&[f64], f64)>,
    precision: &Precision,
) -> Result<Vec<CurveRecord>> {
    kernel.check_dim(design.dim())?;
    kernel.check_dim(x.len())?;
    check_n_list(design, n_list)?;
    match precision {
        Precision::Double { truncation_tol } => n_list
            .iter()
            .map(|&n| record_at(kernel, design, x, n, *truncation_tol, samples))
            .collect(),
        Precision::Extended(opts) => extended_records(kernel, design, x, n_list, samples, opts),
    }
}

/// Variance and Lebesgue constant at a target outside the design box.
pub fn neb_curve(
    kernel: &Kernel,
    design: &Design,
    x: &[f64],
    n_list: &[usize],
    precision: &Precision,
) -> Result<Vec<CurveRecord>> {
    kernel.check_dim(x.len())?;
    if design.bbox().distance_to(x) <= 0.0 {
        return Err(Error::Precondition(
            "target must lie at positive distance from the design box".into(),
        ));
    }
    run(kernel, design, x, n_list, None, precision)
}

fn check_adherent(design: &Design, x: &[f64]) -> Result<()> {
    if design.dim() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: design.dim(),
            found: x.len(),
        });
    }
    if !design.bbox().contains(x) {
        return Err(Error::Precondition(
            "target must lie in the closed design box".into(),
        ));
    }
    Ok(())
}

/// Prediction of `f` at `x` from its samples on each prefix.
pub fn consistency_curve(
    kernel: &Kernel,
    design: &Design,
    x: &[f64],
    f: &TestFunction,
    n_list: &[usize],
    precision: &Precision,
) -> Result<Vec<CurveRecord>> {
    check_adherent(design, x)?;
    check_n_list(design, n_list)?;
    let n_max = n_list.iter().copied().max().unwrap_or(0);
    let samples = f.samples(&design.prefix(n_max))?;
    let truth = f.evaluate(x)?;
    run(kernel, design, x, n_list, Some((&samples, truth)), precision)
}

/// `Lambda_n(x)` on each prefix, for a target in the design box.
pub fn lebesgue_curve(
    kernel: &Kernel,
    design: &Design,
    x: &[f64],
    n_list: &[usize],
    precision: &Precision,
) -> Result<Vec<CurveRecord>> {
    check_adherent(design, x)?;
    run(kernel, design, x, n_list, None, precision)
}

/// Predicts `mollifier_bump(center = x, radius, height = 1)` from a design
/// that avoids the open ball `B(x, radius)`. All samples vanish, so the
/// prediction is exactly 0 while `f(x) = 1`.
pub fn counterexample_probe(
    kernel: &Kernel,
    design: &Design,
    x: &[f64],
    radius: f64,
    truncation_tol: f64,
) -> Result<CurveRecord> {
    kernel.check_dim(design.dim())?;
    kernel.check_dim(x.len())?;
    let f = TestFunction::mollifier_bump(x.to_vec(), radius, 1.0)?;
    if let Some(i) = design.points().position(|p| crate::distance(p, x) < radius) {
        return Err(Error::Precondition(format!(
            "design point {i} lies inside the support of the probe"
        )));
    }
    let samples = f.samples(design)?;
    let truth = f.evaluate(x)?;
    record_at(kernel, design, x, design.len(), truncation_tol, Some((&samples, truth)))
}

/// True when `sigma2` never increases by more than `tol * s2` along `records`.
pub fn sigma2_non_increasing(records: &[CurveRecord], s2: f64, tol: f64) -> bool {
    records
        .windows(2)
        .all(|w| w[1].sigma2 <= w[0].sigma2 + tol * s2)
}
