//! Scenario configuration: the TOML schema, strict parsing with unknown
//! keys rejected, and the conversion into a validated [`Scenario`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::densities::{Density, Phase, SamplerMode, SamplingSchedule};
use crate::error::{Error, Result};
use crate::experiment::Scenario;
use crate::kernels::{Interval, Kernel};
use crate::krr::GammaSchedule;
use crate::operator::{QuadratureGrid, StepFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub kernel: KernelConfig,
    pub regression: RegressionConfig,
    pub schedule: ScheduleConfig,
    pub noise: NoiseConfig,
    pub gamma: GammaConfig,
    pub grid: GridConfig,
    pub checkpoints: Vec<usize>,
    pub seeds: SeedsConfig,
    pub output: OutputConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmonics: Option<u32>,
    pub domain: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionConfig {
    pub pieces: Vec<PieceConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceConfig {
    pub from: f64,
    pub to: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub phases: Vec<PhaseConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub density: DensityConfig,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<DensityConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaConfig {
    pub gamma0: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedsConfig {
    pub master: u64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_scale: Option<f64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            mode: "independent".into(),
            step_scale: None,
        }
    }
}

impl Config {
    /// Parse a TOML document; parse failures carry the offending line and
    /// column, unknown keys are rejected.
    pub fn from_toml(text: &str) -> Result<Config> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Config::from_toml(&text)
    }

    fn domain(&self) -> Result<Interval> {
        Interval::new(self.kernel.domain[0], self.kernel.domain[1])
            .map_err(|e| Error::Config(format!("kernel.domain: {e}")))
    }

    fn build_kernel(&self) -> Result<Kernel> {
        let domain = self.domain()?;
        let k = &self.kernel;
        let reject = |field: &str| {
            Err(Error::Config(format!(
                "kernel.{field} does not apply to family '{}'",
                k.family
            )))
        };
        match k.family.as_str() {
            "gaussian" => {
                if k.order.is_some() {
                    return reject("order");
                }
                if k.period.is_some() {
                    return reject("period");
                }
                if k.harmonics.is_some() {
                    return reject("harmonics");
                }
                let width = k
                    .width
                    .ok_or_else(|| Error::Config("kernel.width required for gaussian".into()))?;
                Kernel::gaussian(width, domain).map_err(|e| Error::Config(e.to_string()))
            }
            "spline" => {
                if k.width.is_some() {
                    return reject("width");
                }
                if k.period.is_some() {
                    return reject("period");
                }
                if k.harmonics.is_some() {
                    return reject("harmonics");
                }
                let order = k
                    .order
                    .ok_or_else(|| Error::Config("kernel.order required for spline".into()))?;
                Kernel::spline(order, domain).map_err(|e| Error::Config(e.to_string()))
            }
            "periodic" => {
                if k.width.is_some() {
                    return reject("width");
                }
                if k.order.is_some() {
                    return reject("order");
                }
                let period = k
                    .period
                    .ok_or_else(|| Error::Config("kernel.period required for periodic".into()))?;
                let harmonics = k.harmonics.ok_or_else(|| {
                    Error::Config("kernel.harmonics required for periodic".into())
                })?;
                Kernel::periodic(period, harmonics, domain)
                    .map_err(|e| Error::Config(e.to_string()))
            }
            other => Err(Error::Config(format!(
                "unknown kernel family '{other}' (expected gaussian, spline, or periodic)"
            ))),
        }
    }

    fn build_density(spec: &DensityConfig, support: Interval) -> Result<Density> {
        let reject = |field: &str, kind: &str| {
            Err(Error::Config(format!(
                "density.{field} does not apply to kind '{kind}'"
            )))
        };
        match spec.kind.as_str() {
            "truncated_gaussian" => {
                if spec.breakpoints.is_some() || spec.values.is_some() {
                    return reject("breakpoints/values", "truncated_gaussian");
                }
                if spec.components.is_some() || spec.weights.is_some() {
                    return reject("components/weights", "truncated_gaussian");
                }
                let center = spec.center.ok_or_else(|| {
                    Error::Config("density.center required for truncated_gaussian".into())
                })?;
                let scale = spec.scale.ok_or_else(|| {
                    Error::Config("density.scale required for truncated_gaussian".into())
                })?;
                Density::truncated_gaussian(center, scale, support)
                    .map_err(|e| Error::Config(e.to_string()))
            }
            "piecewise_constant" => {
                if spec.center.is_some() || spec.scale.is_some() {
                    return reject("center/scale", "piecewise_constant");
                }
                if spec.components.is_some() || spec.weights.is_some() {
                    return reject("components/weights", "piecewise_constant");
                }
                let breakpoints = spec.breakpoints.clone().ok_or_else(|| {
                    Error::Config("density.breakpoints required for piecewise_constant".into())
                })?;
                let values = spec.values.clone().ok_or_else(|| {
                    Error::Config("density.values required for piecewise_constant".into())
                })?;
                let d = Density::piecewise_constant(breakpoints, values)
                    .map_err(|e| Error::Config(e.to_string()))?;
                if d.support() != support {
                    return Err(Error::Config(format!(
                        "piecewise density spans [{}, {}] but the kernel domain is [{}, {}]",
                        d.support().lo,
                        d.support().hi,
                        support.lo,
                        support.hi
                    )));
                }
                Ok(d)
            }
            "uniform" => {
                if spec.center.is_some()
                    || spec.scale.is_some()
                    || spec.breakpoints.is_some()
                    || spec.values.is_some()
                    || spec.components.is_some()
                    || spec.weights.is_some()
                {
                    return reject("parameters", "uniform");
                }
                Ok(Density::uniform(support))
            }
            "mixture" => {
                if spec.center.is_some() || spec.scale.is_some() {
                    return reject("center/scale", "mixture");
                }
                if spec.breakpoints.is_some() || spec.values.is_some() {
                    return reject("breakpoints/values", "mixture");
                }
                let comps = spec.components.as_ref().ok_or_else(|| {
                    Error::Config("density.components required for mixture".into())
                })?;
                let weights = spec.weights.clone().ok_or_else(|| {
                    Error::Config("density.weights required for mixture".into())
                })?;
                let components = comps
                    .iter()
                    .map(|c| Config::build_density(c, support))
                    .collect::<Result<Vec<_>>>()?;
                Density::mixture(components, weights).map_err(|e| Error::Config(e.to_string()))
            }
            other => Err(Error::Config(format!(
                "unknown density kind '{other}' (expected truncated_gaussian, piecewise_constant, uniform, or mixture)"
            ))),
        }
    }

    fn build_sampler(&self) -> Result<SamplerMode> {
        match self.sampler.mode.as_str() {
            "independent" => {
                if self.sampler.step_scale.is_some() {
                    return Err(Error::Config(
                        "sampler.step_scale applies only to metropolis mode".into(),
                    ));
                }
                Ok(SamplerMode::Independent)
            }
            "metropolis" => {
                let step_scale = self.sampler.step_scale.unwrap_or(1.0);
                if !(step_scale > 0.0) {
                    return Err(Error::Config(format!(
                        "sampler.step_scale must be positive, got {step_scale}"
                    )));
                }
                Ok(SamplerMode::Metropolis { step_scale })
            }
            other => Err(Error::Config(format!(
                "unknown sampler mode '{other}' (expected independent or metropolis)"
            ))),
        }
    }

    /// Build and validate the scenario this configuration describes.
    pub fn to_scenario(&self) -> Result<Scenario> {
        let kernel = self.build_kernel()?;
        let domain = kernel.domain();

        let mut pieces = Vec::with_capacity(self.regression.pieces.len());
        for p in &self.regression.pieces {
            let iv = Interval::new(p.from, p.to)
                .map_err(|e| Error::Config(format!("regression piece: {e}")))?;
            if !domain.contains(p.from) || !domain.contains(p.to) {
                return Err(Error::Config(format!(
                    "regression piece [{}, {}] outside the kernel domain",
                    p.from, p.to
                )));
            }
            pieces.push((iv, p.value));
        }
        let h = StepFunction::new(pieces).map_err(|e| Error::Config(e.to_string()))?;

        if self.schedule.phases.is_empty() {
            return Err(Error::Config("schedule.phases must be nonempty".into()));
        }
        let phases = self
            .schedule
            .phases
            .iter()
            .map(|p| {
                Ok(Phase {
                    density: Config::build_density(&p.density, domain)?,
                    count: p.count,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let schedule = SamplingSchedule::new(phases).map_err(|e| Error::Config(e.to_string()))?;

        if self.noise.variance < 0.0 {
            return Err(Error::Config(format!(
                "noise.variance must be nonnegative, got {}",
                self.noise.variance
            )));
        }
        let gamma = GammaSchedule::new(self.gamma.gamma0, self.gamma.alpha)
            .map_err(|e| Error::Config(e.to_string()))?;
        let grid = QuadratureGrid::simpson(domain, self.grid.nodes)
            .map_err(|e| Error::Config(format!("grid.nodes: {e}")))?;
        let sampler = self.build_sampler()?;

        for f in &self.output.formats {
            if f != "csv" && f != "json" {
                return Err(Error::Config(format!(
                    "unknown output format '{f}' (expected csv or json)"
                )));
            }
        }

        let scenario = Scenario {
            kernel,
            h,
            schedule,
            noise_var: self.noise.variance,
            gamma,
            grid,
            checkpoints: self.checkpoints.clone(),
            master_seed: self.seeds.master,
            replicates: self.seeds.replicates,
            sampler,
        };
        scenario.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(scenario)
    }
}
