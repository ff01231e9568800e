//! TOML scenario files.
//!
//! Every key is optional in the file. [`Scenario::resolve`] fills in the
//! defaults, rejects keys that do not apply to the selected kernel family,
//! design kind or function kind, and produces a fully explicit scenario that
//! can be printed back as TOML.

use std::path::Path;

use clap::ValueEnum;
use kriglab_core::designs::{self, BoundingBox, Design};
use kriglab_core::experiments::{self, Precision};
use kriglab_core::extended::ExtendedOptions;
use kriglab_core::{Kernel, TestFunction};
use serde::{Deserialize, Serialize};

use crate::csvio;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Exponential,
    Matern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Grid,
    Halton,
    Accumulate,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum FunctionKind {
    KernelSpan,
    GaussianBump,
    MollifierBump,
    ContinuousNonsmooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Neb,
    Consistency,
    Lebesgue,
    Probe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PrecisionKind {
    Double,
    Extended,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<DesignKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    /// Accumulation point; defaults to the target.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclude_center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclude_radius: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    /// Support radius of the counterexample probe.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<FunctionKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    /// Kernel-span centers, one point per row.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<PrecisionKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<FunctionSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSection>,
}

/// Sections a command consumes; the others are dropped from the resolved
/// scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Needs {
    pub design: bool,
    pub target: bool,
    pub function: bool,
    pub run: bool,
}

/// Concrete objects built from a resolved scenario.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// Fully explicit scenario, for printing.
    pub scenario: Scenario,
    pub kernel: Kernel,
    pub design: Option<Design>,
    pub x: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub function: Option<TestFunction>,
    pub run: RunSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub scenario: Option<ScenarioKind>,
    pub n_list: Vec<usize>,
    pub precision: Precision,
    pub truncation_tol: f64,
    pub seed: u64,
    pub out: Option<String>,
    pub n_paths: usize,
}

pub const DEFAULT_N_PATHS: usize = 10_000;

fn reject(section: &'static str, kind: &str, key: &'static str, set: bool) -> Result<()> {
    if set {
        Err(CliError::IrrelevantKey {
            section,
            kind: kind.to_owned(),
            key,
        })
    } else {
        Ok(())
    }
}

impl Scenario {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut scenario: Scenario = toml::from_str(&text).map_err(|source| CliError::Toml {
            path: path.to_owned(),
            source,
        })?;
        // relative design paths are anchored at the config file
        if let Some(p) = scenario.design.as_mut().and_then(|d| d.path.as_mut()) {
            if Path::new(p.as_str()).is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(p.as_str()).to_string_lossy().into_owned();
                }
            }
        }
        Ok(scenario)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn resolve(&self, needs: Needs) -> Result<Resolved> {
        let x = self.target.as_ref().and_then(|t| t.x.clone());
        let dim_hint = x
            .as_ref()
            .map(Vec::len)
            .or_else(|| self.design.as_ref().and_then(|d| d.lower.as_ref().map(Vec::len)))
            .unwrap_or(1);
        let kernel_section = resolve_kernel(&self.kernel, dim_hint)?;
        let kernel = build_kernel(&kernel_section)?;
        let dim = kernel.dim();

        let run_section = needs.run.then(|| resolve_run(self.run.as_ref().cloned().unwrap_or_default()));
        let run = match &run_section {
            Some(r) => run_settings(r),
            None => run_settings(&resolve_run(RunSection::default())),
        };

        let target_section = if needs.target {
            let t = self.target.clone().unwrap_or_default();
            if t.x.is_none() {
                return Err(CliError::Missing {
                    section: "target",
                    key: "x",
                });
            }
            Some(t)
        } else {
            None
        };
        let x = target_section.as_ref().and_then(|t| t.x.clone());
        let radius = target_section.as_ref().and_then(|t| t.radius);

        let (design_section, design) = if needs.design {
            let n_default = run.n_list.iter().copied().max().unwrap_or(1);
            let section = resolve_design(
                self.design.clone().unwrap_or_default(),
                dim,
                n_default,
                x.as_deref(),
            )?;
            let design = build_design(&section, dim)?;
            (Some(section), Some(design))
        } else {
            (None, None)
        };

        let (function_section, function) = match (&self.function, needs.function) {
            (Some(f), true) => {
                let section = resolve_function(f.clone(), dim)?;
                let function = build_function(&section, &kernel)?;
                (Some(section), Some(function))
            }
            _ => (None, None),
        };

        Ok(Resolved {
            scenario: Scenario {
                kernel: kernel_section,
                design: design_section,
                target: target_section,
                function: function_section,
                run: run_section,
            },
            kernel,
            design,
            x,
            radius,
            function,
            run,
        })
    }
}

fn resolve_kernel(k: &KernelSection, dim_hint: usize) -> Result<KernelSection> {
    let family = k.family.ok_or(CliError::Missing {
        section: "kernel",
        key: "family",
    })?;
    let name = match family {
        Family::Gaussian => "gaussian",
        Family::Exponential => "exponential",
        Family::Matern => "matern",
    };
    let mut out = KernelSection {
        family: Some(family),
        s2: Some(k.s2.unwrap_or(1.0)),
        dim: Some(k.dim.unwrap_or(dim_hint)),
        ..KernelSection::default()
    };
    match family {
        Family::Gaussian => {
            reject("kernel", name, "beta", k.beta.is_some())?;
            reject("kernel", name, "nu", k.nu.is_some())?;
            reject("kernel", name, "rho", k.rho.is_some())?;
            out.alpha = Some(k.alpha.unwrap_or(1.0));
        }
        Family::Exponential => {
            reject("kernel", name, "nu", k.nu.is_some())?;
            reject("kernel", name, "rho", k.rho.is_some())?;
            out.alpha = Some(k.alpha.unwrap_or(1.0));
            out.beta = Some(k.beta.unwrap_or(1.0));
        }
        Family::Matern => {
            reject("kernel", name, "alpha", k.alpha.is_some())?;
            reject("kernel", name, "beta", k.beta.is_some())?;
            out.nu = Some(k.nu.unwrap_or(1.5));
            out.rho = Some(k.rho.unwrap_or(1.0));
        }
    }
    Ok(out)
}

fn build_kernel(k: &KernelSection) -> Result<Kernel> {
    let (s2, dim) = (k.s2.unwrap_or(1.0), k.dim.unwrap_or(1));
    let kernel = match k.family {
        Some(Family::Gaussian) => Kernel::gaussian(s2, k.alpha.unwrap_or(1.0), dim),
        Some(Family::Exponential) => Kernel::exponential(s2, k.alpha.unwrap_or(1.0), k.beta.unwrap_or(1.0), dim),
        Some(Family::Matern) | None => Kernel::matern(s2, k.nu.unwrap_or(1.5), k.rho.unwrap_or(1.0), dim),
    };
    Ok(kernel?)
}

fn resolve_run(r: RunSection) -> RunSection {
    RunSection {
        scenario: r.scenario,
        n_list: Some(r.n_list.unwrap_or_else(experiments::default_n_list)),
        precision: Some(r.precision.unwrap_or(PrecisionKind::Double)),
        truncation_tol: Some(r.truncation_tol.unwrap_or(kriglab_core::DEFAULT_TRUNCATION_TOL)),
        seed: Some(r.seed.unwrap_or(0)),
        out: r.out,
        n_paths: Some(r.n_paths.unwrap_or(DEFAULT_N_PATHS)),
    }
}

fn run_settings(r: &RunSection) -> RunSettings {
    let truncation_tol = r.truncation_tol.unwrap_or(kriglab_core::DEFAULT_TRUNCATION_TOL);
    RunSettings {
        scenario: r.scenario,
        n_list: r.n_list.clone().unwrap_or_default(),
        precision: match r.precision {
            Some(PrecisionKind::Extended) => Precision::Extended(ExtendedOptions::default()),
            _ => Precision::Double { truncation_tol },
        },
        truncation_tol,
        seed: r.seed.unwrap_or(0),
        out: r.out.clone(),
        n_paths: r.n_paths.unwrap_or(DEFAULT_N_PATHS),
    }
}

fn resolve_design(d: DesignSection, dim: usize, n_default: usize, x: Option<&[f64]>) -> Result<DesignSection> {
    let kind = d.kind.unwrap_or(if d.path.is_some() { DesignKind::Csv } else { DesignKind::Grid });
    let name = match kind {
        DesignKind::Grid => "grid",
        DesignKind::Halton => "halton",
        DesignKind::Accumulate => "accumulate",
        DesignKind::Csv => "csv",
    };
    let mut out = DesignSection {
        kind: Some(kind),
        exclude_center: d.exclude_center.clone(),
        exclude_radius: d.exclude_radius,
        ..DesignSection::default()
    };
    if d.exclude_center.is_some() != d.exclude_radius.is_some() {
        return Err(CliError::Config(
            "design.exclude_center and design.exclude_radius go together".into(),
        ));
    }
    match kind {
        DesignKind::Grid | DesignKind::Halton => {
            for (key, set) in [
                ("at", d.at.is_some()),
                ("rate", d.rate.is_some()),
                ("direction", d.direction.is_some()),
                ("path", d.path.is_some()),
            ] {
                reject("design", name, key, set)?;
            }
            out.n = Some(d.n.unwrap_or(n_default));
            out.lower = Some(d.lower.unwrap_or_else(|| vec![0.0; dim]));
            out.upper = Some(d.upper.unwrap_or_else(|| vec![1.0; dim]));
        }
        DesignKind::Accumulate => {
            reject("design", name, "lower", d.lower.is_some())?;
            reject("design", name, "upper", d.upper.is_some())?;
            reject("design", name, "path", d.path.is_some())?;
            out.n = Some(d.n.unwrap_or(n_default));
            out.at = Some(match d.at.or_else(|| x.map(<[f64]>::to_vec)) {
                Some(a) => a,
                None => {
                    return Err(CliError::Missing {
                        section: "design",
                        key: "at",
                    })
                }
            });
            out.rate = Some(d.rate.unwrap_or(0.5));
            out.direction = Some(d.direction.unwrap_or_else(|| {
                let mut e = vec![0.0; dim];
                e[0] = 1.0;
                e
            }));
        }
        DesignKind::Csv => {
            for (key, set) in [
                ("at", d.at.is_some()),
                ("rate", d.rate.is_some()),
                ("direction", d.direction.is_some()),
            ] {
                reject("design", name, key, set)?;
            }
            out.path = Some(d.path.ok_or(CliError::Missing {
                section: "design",
                key: "path",
            })?);
            out.n = d.n;
            out.lower = d.lower;
            out.upper = d.upper;
        }
    }
    Ok(out)
}

fn build_design(d: &DesignSection, dim: usize) -> Result<Design> {
    let design = match d.kind {
        Some(DesignKind::Grid) | Some(DesignKind::Halton) => {
            let bbox = BoundingBox::new(d.lower.clone().unwrap_or_default(), d.upper.clone().unwrap_or_default())?;
            let n = d.n.unwrap_or(1);
            if d.kind == Some(DesignKind::Grid) {
                designs::grid_sequence(&bbox, n)?
            } else {
                designs::halton_sequence(&bbox, n)?
            }
        }
        Some(DesignKind::Accumulate) => designs::accumulate_at(
            d.at.as_deref().unwrap_or_default(),
            d.rate.unwrap_or(0.5),
            d.direction.as_deref().unwrap_or_default(),
            d.n.unwrap_or(1),
        )?,
        Some(DesignKind::Csv) | None => {
            let path = d.path.as_deref().unwrap_or_default();
            let read = csvio::read_design(Path::new(path))?;
            let read = match d.n {
                Some(n) if n > read.len() => {
                    return Err(CliError::Config(format!(
                        "design.n = {n} exceeds the {} rows of {path}",
                        read.len()
                    )))
                }
                Some(n) => read.prefix(n),
                None => read,
            };
            match (&d.lower, &d.upper) {
                (Some(l), Some(u)) => Design::with_box(read.coords().to_vec(), BoundingBox::new(l.clone(), u.clone())?)?,
                (None, None) => read,
                _ => {
                    return Err(CliError::Config(
                        "design.lower and design.upper go together".into(),
                    ))
                }
            }
        }
    };
    if design.dim() != dim {
        return Err(kriglab_core::Error::DimensionMismatch {
            expected: dim,
            found: design.dim(),
        }
        .into());
    }
    match (&d.exclude_center, d.exclude_radius) {
        (Some(c), Some(r)) => Ok(designs::exclude_ball(&design, c, r)?),
        _ => Ok(design),
    }
}

fn resolve_function(f: FunctionSection, dim: usize) -> Result<FunctionSection> {
    let kind = f.kind.ok_or(CliError::Missing {
        section: "function",
        key: "kind",
    })?;
    let name = match kind {
        FunctionKind::KernelSpan => "kernel_span",
        FunctionKind::GaussianBump => "gaussian_bump",
        FunctionKind::MollifierBump => "mollifier_bump",
        FunctionKind::ContinuousNonsmooth => "continuous_nonsmooth",
    };
    let used: &[&'static str] = match kind {
        FunctionKind::KernelSpan => &["centers", "coeffs"],
        FunctionKind::GaussianBump => &["center", "width", "height"],
        FunctionKind::MollifierBump => &["center", "radius", "height"],
        FunctionKind::ContinuousNonsmooth => &["slope", "period"],
    };
    for (key, set) in [
        ("center", f.center.is_some()),
        ("width", f.width.is_some()),
        ("height", f.height.is_some()),
        ("radius", f.radius.is_some()),
        ("slope", f.slope.is_some()),
        ("period", f.period.is_some()),
        ("centers", f.centers.is_some()),
        ("coeffs", f.coeffs.is_some()),
    ] {
        reject("function", name, key, set && !used.contains(&key))?;
    }
    let mut out = FunctionSection {
        kind: Some(kind),
        ..FunctionSection::default()
    };
    match kind {
        FunctionKind::KernelSpan => {
            out.centers = Some(f.centers.ok_or(CliError::Missing {
                section: "function",
                key: "centers",
            })?);
            out.coeffs = Some(f.coeffs.ok_or(CliError::Missing {
                section: "function",
                key: "coeffs",
            })?);
        }
        FunctionKind::GaussianBump => {
            out.center = Some(f.center.unwrap_or_else(|| vec![0.0; dim]));
            out.width = Some(f.width.unwrap_or(1.0));
            out.height = Some(f.height.unwrap_or(1.0));
        }
        FunctionKind::MollifierBump => {
            out.center = Some(f.center.unwrap_or_else(|| vec![0.0; dim]));
            out.radius = Some(f.radius.unwrap_or(1.0));
            out.height = Some(f.height.unwrap_or(1.0));
        }
        FunctionKind::ContinuousNonsmooth => {
            out.slope = Some(f.slope.unwrap_or(1.0));
            out.period = Some(f.period.unwrap_or(1.0));
        }
    }
    Ok(out)
}

fn build_function(f: &FunctionSection, kernel: &Kernel) -> Result<TestFunction> {
    let dim = kernel.dim();
    let function = match f.kind {
        Some(FunctionKind::KernelSpan) => {
            let centers = f.centers.clone().unwrap_or_default();
            if let Some(bad) = centers.iter().find(|c| c.len() != dim) {
                return Err(kriglab_core::Error::DimensionMismatch {
                    expected: dim,
                    found: bad.len(),
                }
                .into());
            }
            let coords: Vec<f64> = centers.into_iter().flatten().collect();
            let design = if coords.is_empty() {
                Design::empty(BoundingBox::unit(dim))
            } else {
                Design::from_coords(dim, coords)?
            };
            TestFunction::kernel_span(*kernel, design, f.coeffs.clone().unwrap_or_default())?
        }
        Some(FunctionKind::GaussianBump) => TestFunction::gaussian_bump(
            f.center.clone().unwrap_or_default(),
            f.width.unwrap_or(1.0),
            f.height.unwrap_or(1.0),
        )?,
        Some(FunctionKind::MollifierBump) => TestFunction::mollifier_bump(
            f.center.clone().unwrap_or_default(),
            f.radius.unwrap_or(1.0),
            f.height.unwrap_or(1.0),
        )?,
        Some(FunctionKind::ContinuousNonsmooth) | None => {
            TestFunction::triangle_wave(f.slope.unwrap_or(1.0), f.period.unwrap_or(1.0), dim)?
        }
    };
    if function.dim() != dim {
        return Err(kriglab_core::Error::DimensionMismatch {
            expected: dim,
            found: function.dim(),
        }
        .into());
    }
    Ok(function)
}
