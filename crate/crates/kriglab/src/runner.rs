//! Scenario execution. Independent prefix sizes and sample paths are spread
//! over a rayon pool; every reduction runs sequentially in a fixed order, so
//! outputs do not depend on the thread count.

use kriglab_core::experiments::{self, CurveRecord, Precision};
use kriglab_core::gp::{self, ConditionalMeanReport, MartingaleReport, PathEnsemble, PathSampler};
use kriglab_core::{Design, Kernel};
use rayon::prelude::*;

use crate::config::{Resolved, ScenarioKind};
use crate::error::{CliError, Result};

pub const THREADS_VAR: &str = "KRIGLAB_THREADS";

/// Pool sized by `KRIGLAB_THREADS` (unset or 0: one thread per core).
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_VAR) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Config(format!("{THREADS_VAR} must be a non-negative integer, got `{v}`")))?,
        Err(_) => 0,
    };
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads).build()?)
}

fn need<'a, T>(value: &'a Option<T>, section: &'static str, key: &'static str) -> Result<&'a T> {
    value.as_ref().ok_or(CliError::Missing { section, key })
}

fn check_sizes(design: &Design, n_list: &[usize]) -> Result<()> {
    if n_list.is_empty() {
        return Err(CliError::Config("run.n_list is empty".into()));
    }
    match n_list.iter().find(|&&n| n > design.len()) {
        Some(n) => Err(CliError::Config(format!(
            "run.n_list entry {n} exceeds the {} design points",
            design.len()
        ))),
        None => Ok(()),
    }
}

/// Convergence curve of the configured scenario, one record per `n_list` entry.
pub fn run_curve(r: &Resolved) -> Result<Vec<CurveRecord>> {
    let kind = *need(&r.run.scenario, "run", "scenario")?;
    let design = need(&r.design, "design", "kind")?;
    let x = need(&r.x, "target", "x")?;
    let n_list = &r.run.n_list;
    check_sizes(design, n_list)?;
    let k = &r.kernel;
    let precision = r.run.precision;

    if let (Precision::Extended(_), ScenarioKind::Neb | ScenarioKind::Consistency | ScenarioKind::Lebesgue) =
        (precision, kind)
    {
        // one nested multi-precision factorization covers every size
        return Ok(match kind {
            ScenarioKind::Neb => experiments::neb_curve(k, design, x, n_list, &precision)?,
            ScenarioKind::Lebesgue => experiments::lebesgue_curve(k, design, x, n_list, &precision)?,
            _ => {
                let f = need(&r.function, "function", "kind")?;
                experiments::consistency_curve(k, design, x, f, n_list, &precision)?
            }
        });
    }

    let per_size = |n: usize| -> Result<CurveRecord> {
        let one = [n];
        let recs = match kind {
            ScenarioKind::Neb => experiments::neb_curve(k, design, x, &one, &precision)?,
            ScenarioKind::Lebesgue => experiments::lebesgue_curve(k, design, x, &one, &precision)?,
            ScenarioKind::Consistency => {
                let f = need(&r.function, "function", "kind")?;
                experiments::consistency_curve(k, design, x, f, &one, &precision)?
            }
            ScenarioKind::Probe => {
                let radius = *need(&r.radius, "target", "radius")?;
                vec![experiments::counterexample_probe(
                    k,
                    &design.prefix(n),
                    x,
                    radius,
                    r.run.truncation_tol,
                )?]
            }
        };
        Ok(recs[0])
    };
    thread_pool()?.install(|| n_list.par_iter().map(|&n| per_size(n)).collect())
}

/// Paths generated in parallel, one ChaCha stream per path.
pub fn parallel_ensemble(kernel: &Kernel, points: &Design, n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    let sampler = PathSampler::new(kernel, points, seed)?;
    let m = points.len();
    let mut values = vec![0.0; n_paths * m];
    if m > 0 {
        thread_pool()?.install(|| {
            values
                .par_chunks_mut(m)
                .enumerate()
                .for_each(|(p, row)| sampler.sample_path(p as u64, row))
        });
    }
    Ok(sampler.into_ensemble(n_paths, values)?)
}

/// Ensemble at `design ∪ {x}` (for the conditional-mean check).
pub fn check_ensemble(r: &Resolved) -> Result<PathEnsemble> {
    let design = need(&r.design, "design", "kind")?;
    let x = need(&r.x, "target", "x")?;
    let (union, _) = design.with_point(x)?;
    parallel_ensemble(&r.kernel, &union, r.run.n_paths, r.run.seed)
}

pub fn gp_check(r: &Resolved, ensemble: &PathEnsemble) -> Result<ConditionalMeanReport> {
    let design = need(&r.design, "design", "kind")?;
    let x = need(&r.x, "target", "x")?;
    Ok(gp::conditional_mean_report(&r.kernel, design, x, ensemble)?)
}

/// Ensemble at `design.prefix(max n) ∪ {x}` (for the martingale experiment).
pub fn martingale_ensemble(r: &Resolved) -> Result<PathEnsemble> {
    let design = need(&r.design, "design", "kind")?;
    let x = need(&r.x, "target", "x")?;
    check_sizes(design, &r.run.n_list)?;
    let n_max = r.run.n_list.iter().copied().max().unwrap_or(0);
    let (union, _) = design.prefix(n_max).with_point(x)?;
    parallel_ensemble(&r.kernel, &union, r.run.n_paths, r.run.seed)
}

pub fn martingale(r: &Resolved, ensemble: &PathEnsemble) -> Result<MartingaleReport> {
    let design = need(&r.design, "design", "kind")?;
    let x = need(&r.x, "target", "x")?;
    Ok(gp::martingale_report(&r.kernel, design, x, &r.run.n_list, ensemble)?)
}
