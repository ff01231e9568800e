//! `kriglab` command line. Flags mirror scenario keys and override values
//! read from `--config`.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use kriglab_core::kernels::RadialGrid;
use kriglab_core::solver::GramSystem;
use serde::Serialize;

use crate::config::{
    DesignKind, DesignSection, Family, FunctionKind, FunctionSection, Needs, PrecisionKind, Resolved, RunSection,
    Scenario, ScenarioKind, TargetSection,
};
use crate::csvio;
use crate::error::{CliError, Result};
use crate::runner;

#[derive(Debug, Parser)]
#[command(name = "kriglab", version, about = "Simple kriging laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate k(x, y).
    #[command(allow_negative_numbers = true)]
    Eval(EvalArgs),
    /// Kriging weights, variance and Lebesgue constant at one target.
    #[command(allow_negative_numbers = true)]
    Predict(PredictArgs),
    /// Polynomial-minorant check of the spectral density.
    #[command(allow_negative_numbers = true)]
    SpectralCheck(SpectralArgs),
    /// Convergence curve of a scenario, as CSV.
    #[command(allow_negative_numbers = true)]
    Curve(CurveArgs),
    /// Monte Carlo check of the conditional-mean identity.
    #[command(allow_negative_numbers = true)]
    GpCheck(GpArgs),
    /// Predictor trajectories along nested designs.
    #[command(allow_negative_numbers = true)]
    Martingale(GpArgs),
}

#[derive(Debug, Args, Default)]
pub struct ConfigArg {
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct KernelFlags {
    #[arg(long = "kernel", value_enum)]
    pub family: Option<Family>,
    #[arg(long)]
    pub s2: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct DesignFlags {
    #[arg(long = "design", value_enum)]
    pub design_kind: Option<DesignKind>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub lower: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub upper: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub at: Option<Vec<f64>>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub direction: Option<Vec<f64>>,
    /// Design points from CSV (implies `--design csv`).
    #[arg(long = "design-csv")]
    pub design_csv: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub exclude_center: Option<Vec<f64>>,
    #[arg(long)]
    pub exclude_radius: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct TargetFlags {
    #[arg(long, value_delimiter = ',')]
    pub x: Option<Vec<f64>>,
    #[arg(long)]
    pub radius: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct FunctionFlags {
    #[arg(long = "function", value_enum)]
    pub function_kind: Option<FunctionKind>,
    #[arg(long = "function-center", value_delimiter = ',')]
    pub function_center: Option<Vec<f64>>,
    #[arg(long = "function-width")]
    pub function_width: Option<f64>,
    #[arg(long = "function-height")]
    pub function_height: Option<f64>,
    #[arg(long = "function-radius")]
    pub function_radius: Option<f64>,
    #[arg(long = "function-slope")]
    pub function_slope: Option<f64>,
    #[arg(long = "function-period")]
    pub function_period: Option<f64>,
    #[arg(long = "function-coeffs", value_delimiter = ',')]
    pub function_coeffs: Option<Vec<f64>>,
}

#[derive(Debug, Args, Default)]
pub struct RunFlags {
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioKind>,
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub precision: Option<PrecisionKind>,
    #[arg(long)]
    pub truncation_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV path (stdout when absent).
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub n_paths: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub kernel: KernelFlags,
    #[arg(long, value_delimiter = ',')]
    pub x: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub y: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub kernel: KernelFlags,
    #[command(flatten)]
    pub design: DesignFlags,
    #[command(flatten)]
    pub target: TargetFlags,
    #[arg(long)]
    pub truncation_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SpectralArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub kernel: KernelFlags,
    /// Polynomial order to check.
    #[arg(long)]
    pub r: Option<u32>,
    /// Also search the smallest passing order up to this bound.
    #[arg(long)]
    pub r_max: Option<u32>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub u_min: Option<f64>,
    #[arg(long)]
    pub u_max: Option<f64>,
    #[arg(long)]
    pub refinement_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub kernel: KernelFlags,
    #[command(flatten)]
    pub design: DesignFlags,
    #[command(flatten)]
    pub target: TargetFlags,
    #[command(flatten)]
    pub function: FunctionFlags,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Args)]
pub struct GpArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub kernel: KernelFlags,
    #[command(flatten)]
    pub design: DesignFlags,
    #[command(flatten)]
    pub target: TargetFlags,
    #[command(flatten)]
    pub run: RunFlags,
    /// Dump the simulated paths as `path_id,point_id,value`.
    #[arg(long)]
    pub ensemble_out: Option<PathBuf>,
}

macro_rules! apply {
    ($dst:expr, $src:expr; $($field:ident),+) => {
        $( if let Some(v) = $src.$field.clone() { $dst.$field = Some(v); } )+
    };
}

impl KernelFlags {
    fn apply(&self, s: &mut Scenario) {
        apply!(s.kernel, self; family, s2, alpha, beta, nu, rho, dim);
    }
}

impl DesignFlags {
    fn apply(&self, s: &mut Scenario) {
        let d = s.design.get_or_insert_with(DesignSection::default);
        if self.design_csv.is_some() && self.design_kind.is_none() {
            d.kind = Some(DesignKind::Csv);
        }
        if let Some(k) = self.design_kind {
            d.kind = Some(k);
        }
        if let Some(p) = &self.design_csv {
            d.path = Some(p.clone());
        }
        apply!(d, self; n, lower, upper, at, rate, direction, exclude_center, exclude_radius);
    }
}

impl TargetFlags {
    fn apply(&self, s: &mut Scenario) {
        let t = s.target.get_or_insert_with(TargetSection::default);
        apply!(t, self; x, radius);
    }
}

impl FunctionFlags {
    fn apply(&self, s: &mut Scenario) {
        let overrides = FunctionSection {
            kind: self.function_kind,
            center: self.function_center.clone(),
            width: self.function_width,
            height: self.function_height,
            radius: self.function_radius,
            slope: self.function_slope,
            period: self.function_period,
            centers: None,
            coeffs: self.function_coeffs.clone(),
        };
        if overrides != FunctionSection::default() || s.function.is_some() {
            let f = s.function.get_or_insert_with(FunctionSection::default);
            apply!(f, overrides; kind, center, width, height, radius, slope, period, coeffs);
        }
    }
}

impl RunFlags {
    fn apply(&self, s: &mut Scenario) {
        let r = s.run.get_or_insert_with(RunSection::default);
        apply!(r, self; scenario, n_list, precision, truncation_tol, seed, out, n_paths);
    }
}

fn load(config: &ConfigArg) -> Result<Scenario> {
    match &config.config {
        Some(path) => Scenario::from_toml_file(path),
        None => Ok(Scenario::default()),
    }
}

/// Streams the printed report; every `emit` is deterministic text.
struct Output<W: Write> {
    out: W,
}

impl<W: Write> Output<W> {
    fn text(&mut self, s: &str) -> Result<()> {
        self.out.write_all(s.as_bytes()).map_err(CliError::Stdout)
    }

    fn config(&mut self, scenario: &Scenario) -> Result<()> {
        self.text("# resolved configuration\n")?;
        self.text(&scenario.to_toml()?)?;
        Ok(())
    }

    fn result<T: Serialize>(&mut self, value: &T) -> Result<()> {
        #[derive(Serialize)]
        struct Wrap<'a, T> {
            result: &'a T,
        }
        self.text("\n")?;
        self.text(&toml::to_string(&Wrap { result: value })?)
    }
}

#[derive(Serialize)]
struct EvalResult {
    x: Vec<f64>,
    y: Vec<f64>,
    value: f64,
}

#[derive(Serialize)]
struct PredictResult {
    weights: Vec<f64>,
    sigma2: f64,
    preclamp_sigma2: f64,
    lebesgue: f64,
    effective_rank: usize,
    condition_estimate: f64,
    truncated: bool,
}

#[derive(Serialize)]
struct SpectralResult {
    r: u32,
    c_estimate: f64,
    satisfied: bool,
    tail_ratio: f64,
    grid_points: usize,
    u_min: f64,
    u_max: f64,
    refinement_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    r_max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_poly_order: Option<u32>,
}

#[derive(Serialize)]
struct GpResult {
    passed: bool,
    n_paths: usize,
    sigma2: f64,
    residual_mean: f64,
    mean_tol: f64,
    residual_variance: f64,
    variance_tol: f64,
    max_abs_covariance: f64,
    covariance_tol: f64,
    jitter_used: f64,
}

#[derive(Serialize)]
struct MartingaleSummary {
    passed: bool,
    mse_tracks_sigma2: bool,
    exceedance_non_increasing: bool,
    l2_bounded: bool,
    n_paths: usize,
    jitter_used: f64,
}

const ALL_BUT_FUNCTION: Needs = Needs {
    design: true,
    target: true,
    function: false,
    run: true,
};

fn eval(a: &EvalArgs, out: &mut Output<impl Write>) -> Result<()> {
    let mut s = load(&a.config)?;
    a.kernel.apply(&mut s);
    if let Some(x) = &a.x {
        s.target.get_or_insert_with(TargetSection::default).x = Some(x.clone());
    }
    let r = s.resolve(Needs {
        target: true,
        ..Needs::default()
    })?;
    out.config(&r.scenario)?;
    let x = r.x.clone().unwrap_or_default();
    let value = r.kernel.eval(&x, &a.y)?;
    out.result(&EvalResult {
        x,
        y: a.y.clone(),
        value,
    })
}

fn predict(a: &PredictArgs, out: &mut Output<impl Write>) -> Result<()> {
    let mut s = load(&a.config)?;
    a.kernel.apply(&mut s);
    a.design.apply(&mut s);
    a.target.apply(&mut s);
    if let Some(t) = a.truncation_tol {
        s.run.get_or_insert_with(RunSection::default).truncation_tol = Some(t);
    }
    if let Some(run) = &s.run {
        // only the truncation tolerance applies here
        s.run = Some(RunSection {
            truncation_tol: run.truncation_tol,
            ..RunSection::default()
        });
    }
    let needs = Needs {
        design: true,
        target: true,
        function: false,
        run: false,
    };
    let tol = s.run.as_ref().and_then(|r| r.truncation_tol).unwrap_or(kriglab_core::DEFAULT_TRUNCATION_TOL);
    let mut r = s.resolve(needs)?;
    r.scenario.run = Some(RunSection {
        truncation_tol: Some(tol),
        ..RunSection::default()
    });
    out.config(&r.scenario)?;
    let design = r.design.as_ref().expect("design resolved");
    let system = GramSystem::build(&r.kernel, design, tol)?;
    let p = system.kriging_weights(r.x.as_deref().unwrap_or_default())?;
    out.result(&PredictResult {
        weights: p.weights.clone(),
        sigma2: p.variance,
        preclamp_sigma2: p.preclamp_variance,
        lebesgue: p.lebesgue,
        effective_rank: p.effective_rank,
        condition_estimate: system.condition_estimate(),
        truncated: p.truncated,
    })
}

fn spectral_check(a: &SpectralArgs, out: &mut Output<impl Write>) -> Result<()> {
    let mut s = load(&a.config)?;
    a.kernel.apply(&mut s);
    let r = s.resolve(Needs::default())?;
    let order = match (a.r, a.r_max) {
        (Some(r), _) => r,
        (None, Some(_)) => 0,
        (None, None) => return Err(CliError::Config("spectral-check needs --r or --r-max".into())),
    };
    let defaults = RadialGrid::default();
    let grid = RadialGrid {
        points: a.grid_points.unwrap_or(defaults.points),
        u_min: a.u_min.unwrap_or(defaults.u_min),
        u_max: a.u_max.unwrap_or(defaults.u_max),
        refinement_tol: a.refinement_tol.unwrap_or(defaults.refinement_tol),
    };
    out.config(&r.scenario)?;
    let report = r.kernel.check_polynomial_minorant(order, &grid)?;
    let min_poly_order = match a.r_max {
        Some(m) => r.kernel.min_poly_order(m, &grid)?,
        None => None,
    };
    out.result(&SpectralResult {
        r: report.r,
        c_estimate: report.c_estimate,
        satisfied: report.satisfied,
        tail_ratio: report.tail_ratio,
        grid_points: grid.points,
        u_min: grid.u_min,
        u_max: grid.u_max,
        refinement_tol: grid.refinement_tol,
        r_max: a.r_max,
        min_poly_order,
    })
}

fn curve(a: &CurveArgs, out: &mut Output<impl Write>) -> Result<()> {
    let mut s = load(&a.config)?;
    a.kernel.apply(&mut s);
    a.design.apply(&mut s);
    a.target.apply(&mut s);
    a.function.apply(&mut s);
    a.run.apply(&mut s);
    let scenario = s.run.as_ref().and_then(|r| r.scenario);
    let r = s.resolve(Needs {
        design: true,
        target: true,
        function: scenario == Some(ScenarioKind::Consistency),
        run: true,
    })?;
    out.config(&r.scenario)?;
    let records = runner::run_curve(&r)?;
    match &r.run.out {
        Some(path) => {
            csvio::write_curve(&records, path.as_ref())?;
            out.text(&format!("\n# wrote {} records to {path}\n", records.len()))
        }
        None => {
            out.text("\n")?;
            csvio::write_curve_to(&records, &mut out.out).map_err(|e| CliError::Stdout(e.into()))
        }
    }
}

fn gp_resolve(a: &GpArgs) -> Result<Resolved> {
    let mut s = load(&a.config)?;
    a.kernel.apply(&mut s);
    a.design.apply(&mut s);
    a.target.apply(&mut s);
    a.run.apply(&mut s);
    if let Some(run) = s.run.as_mut() {
        run.scenario = None;
    }
    s.function = None;
    s.resolve(ALL_BUT_FUNCTION)
}

fn gp_check(a: &GpArgs, out: &mut Output<impl Write>) -> Result<()> {
    let r = gp_resolve(a)?;
    let mut shown = r.scenario.clone();
    if let Some(run) = shown.run.as_mut() {
        run.n_list = None;
    }
    out.config(&shown)?;
    let ensemble = runner::check_ensemble(&r)?;
    if let Some(path) = &a.ensemble_out {
        csvio::write_ensemble(&ensemble, path)?;
    }
    let report = runner::gp_check(&r, &ensemble)?;
    out.result(&GpResult {
        passed: report.passed,
        n_paths: report.n_paths,
        sigma2: report.sigma2,
        residual_mean: report.residual_mean,
        mean_tol: report.mean_tol,
        residual_variance: report.residual_variance,
        variance_tol: report.variance_tol,
        max_abs_covariance: report.covariances.iter().fold(0.0, |m, c| m.max(c.abs())),
        covariance_tol: report.covariance_tol.first().copied().unwrap_or(0.0),
        jitter_used: report.jitter_used,
    })
}

fn martingale(a: &GpArgs, out: &mut Output<impl Write>) -> Result<()> {
    let r = gp_resolve(a)?;
    out.config(&r.scenario)?;
    let ensemble = runner::martingale_ensemble(&r)?;
    if let Some(path) = &a.ensemble_out {
        csvio::write_ensemble(&ensemble, path)?;
    }
    let report = runner::martingale(&r, &ensemble)?;
    out.result(&MartingaleSummary {
        passed: report.passed(),
        mse_tracks_sigma2: report.mse_tracks_sigma2,
        exceedance_non_increasing: report.exceedance_non_increasing,
        l2_bounded: report.l2_bounded,
        n_paths: report.n_paths,
        jitter_used: report.jitter_used,
    })?;
    match &r.run.out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|source| CliError::Io {
                path: path.into(),
                source,
            })?;
            csvio::write_martingale_to(&report.records, std::io::BufWriter::new(file)).map_err(|source| {
                CliError::Csv {
                    path: path.into(),
                    source,
                }
            })
        }
        None => {
            out.text("\n")?;
            csvio::write_martingale_to(&report.records, &mut out.out).map_err(|e| CliError::Stdout(e.into()))
        }
    }
}

fn dispatch(cli: &Cli, out: &mut Output<impl Write>) -> Result<()> {
    match &cli.command {
        Command::Eval(a) => eval(a, out),
        Command::Predict(a) => predict(a, out),
        Command::SpectralCheck(a) => spectral_check(a, out),
        Command::Curve(a) => curve(a, out),
        Command::GpCheck(a) => gp_check(a, out),
        Command::Martingale(a) => martingale(a, out),
    }
}

/// Runs one invocation and returns the process exit code
/// (0 success, 1 configuration error, 2 numerical failure).
pub fn run<I, T>(argv: I, stdout: &mut impl Write, stderr: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let mut out = Output { out: stdout };
    match dispatch(&cli, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
