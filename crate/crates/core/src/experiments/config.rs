use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::quantizer::DEFAULT_ETA;
use crate::scenarios::{
    build_channel_scenario, build_eig_scenario, EigPreset, EigScenario, EstimatorVariant,
};

use super::sweep::BuiltScenario;

/// Version of the configuration schema understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

/// Scenario names accepted in place of a custom definition.
pub const BUILTIN_PRESETS: &[(&str, &str)] = &[
    (
        "fig5",
        "channel estimation, k = 2 taps, n = 120 observations",
    ),
    (
        "fig6",
        "channel estimation, k = 8 taps, n = 120 observations",
    ),
    (
        "eig-setup1",
        "eigen-spectrum recovery, k = 2, n_x = 20, 2x2 DFT basis",
    ),
    (
        "eig-setup2",
        "eigen-spectrum recovery, k = 4, n_x = 60, identity basis",
    ),
    ("scalar", "scalar Wiener model, k = n = 1"),
];

/// What to evaluate at each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Thm1,
    Thm1NoDither,
    Cor3,
    Cor3NoDither,
    Cor2,
    Prop1Lower,
    Prop1Upper,
    TaskIgnorantEmp,
    TaskIgnorantApprox,
    MmseFloor,
    EigPipeline,
    PriorMean,
}

impl Method {
    pub const ALL: [Method; 12] = [
        Method::Thm1,
        Method::Thm1NoDither,
        Method::Cor3,
        Method::Cor3NoDither,
        Method::Cor2,
        Method::Prop1Lower,
        Method::Prop1Upper,
        Method::TaskIgnorantEmp,
        Method::TaskIgnorantApprox,
        Method::MmseFloor,
        Method::EigPipeline,
        Method::PriorMean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Thm1 => "thm1",
            Method::Thm1NoDither => "thm1-nodither",
            Method::Cor3 => "cor3",
            Method::Cor3NoDither => "cor3-nodither",
            Method::Cor2 => "cor2",
            Method::Prop1Lower => "prop1-lower",
            Method::Prop1Upper => "prop1-upper",
            Method::TaskIgnorantEmp => "task-ignorant-emp",
            Method::TaskIgnorantApprox => "task-ignorant-approx",
            Method::MmseFloor => "mmse-floor",
            Method::EigPipeline => "eig-pipeline",
            Method::PriorMean => "prior-mean",
        }
    }

    pub fn for_channel(self) -> bool {
        !matches!(self, Method::EigPipeline | Method::PriorMean)
    }

    pub fn for_eig(self) -> bool {
        matches!(
            self,
            Method::EigPipeline | Method::PriorMean | Method::MmseFloor | Method::Prop1Upper
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                format!(
                    "unknown method '{s}' (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(format!("unknown format '{s}' (expected csv or json)")),
        }
    }
}

/// Scenario definition, either a preset or custom parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSpec {
    Channel {
        taps: usize,
        observations: usize,
    },
    EigPreset(EigPreset),
    Eig {
        alpha: Vec<f64>,
        beta: Vec<f64>,
        samples: usize,
        dft_basis: bool,
    },
}

impl ScenarioSpec {
    pub fn preset(name: &str) -> Option<Self> {
        Some(match name {
            "fig5" => ScenarioSpec::Channel {
                taps: 2,
                observations: 120,
            },
            "fig6" => ScenarioSpec::Channel {
                taps: 8,
                observations: 120,
            },
            "scalar" => ScenarioSpec::Channel {
                taps: 1,
                observations: 1,
            },
            "eig-setup1" => ScenarioSpec::EigPreset(EigPreset::Setup1),
            "eig-setup2" => ScenarioSpec::EigPreset(EigPreset::Setup2),
            _ => return None,
        })
    }

    pub fn is_channel(&self) -> bool {
        matches!(self, ScenarioSpec::Channel { .. })
    }

    pub fn build(&self, variant: EstimatorVariant) -> Result<BuiltScenario> {
        Ok(match self {
            ScenarioSpec::Channel { taps, observations } => {
                BuiltScenario::Channel(build_channel_scenario(*taps, *observations)?)
            }
            ScenarioSpec::EigPreset(p) => BuiltScenario::Eig(build_eig_scenario(*p, variant)),
            ScenarioSpec::Eig {
                alpha,
                beta,
                samples,
                dft_basis,
            } => {
                let k = alpha.len();
                let basis = if *dft_basis {
                    EigScenario::dft_basis(k)?
                } else {
                    DMatrix::identity(k, k)
                };
                BuiltScenario::Eig(EigScenario::new(
                    alpha.clone(),
                    beta.clone(),
                    *samples,
                    basis,
                    variant,
                )?)
            }
        })
    }
}

/// A validated sweep definition.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub scenario: ScenarioSpec,
    pub methods: Vec<Method>,
    /// Strictly increasing `log₂ M` grid.
    pub bits: Vec<u32>,
    pub trials: usize,
    pub seed: u64,
    pub eta: f64,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    pub threads: Option<usize>,
    /// Fixed number of quantizers for `thm1`; `None` picks the best.
    pub output_dim: Option<usize>,
    /// Set counts `n_s` for the eigen-spectrum pipeline.
    pub partitions: Vec<usize>,
    pub estimator: EstimatorVariant,
    /// Dither the eigen-spectrum pipeline's quantizers.
    pub dither: bool,
    /// Trials for the random-codebook methods.
    pub bound_trials: usize,
    /// Largest `log₂ M` for which codebooks are enumerated.
    pub bound_max_bits: u32,
    pub record_timing: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: Option<u32>,
    scenario: Option<String>,
    taps: Option<usize>,
    observations: Option<usize>,
    alpha: Option<Vec<f64>>,
    beta: Option<Vec<f64>>,
    samples: Option<usize>,
    basis: Option<String>,
    methods: Option<Vec<String>>,
    bits: Option<Vec<i64>>,
    trials: Option<usize>,
    seed: Option<u64>,
    eta: Option<f64>,
    output: Option<PathBuf>,
    format: Option<String>,
    threads: Option<usize>,
    output_dim: Option<usize>,
    partitions: Option<Vec<usize>>,
    estimator: Option<String>,
    dither: Option<bool>,
    bound_trials: Option<usize>,
    bound_max_bits: Option<u32>,
    record_timing: Option<bool>,
}

impl SweepConfig {
    /// Defaults for a preset: every applicable method on the preset's usual
    /// bit grid.
    pub fn for_preset(name: &str) -> Result<Self> {
        let scenario = ScenarioSpec::preset(name).ok_or_else(|| {
            Error::Config(vec![format!(
                "scenario: unknown preset '{name}' (expected one of {})",
                preset_names()
            )])
        })?;
        let (methods, bits, partitions) = match &scenario {
            ScenarioSpec::Channel { taps, .. } => (
                vec![
                    Method::Thm1,
                    Method::Thm1NoDither,
                    Method::Cor3,
                    Method::Cor3NoDither,
                    Method::Cor2,
                    Method::MmseFloor,
                ],
                (2..=10)
                    .map(|i| (i as u32) * (*taps as u32).max(1))
                    .collect(),
                Vec::new(),
            ),
            ScenarioSpec::EigPreset(EigPreset::Setup1) => (
                vec![Method::EigPipeline, Method::PriorMean, Method::MmseFloor],
                (2..=12).map(|i| i * 10).collect(),
                vec![1, 2, 4, 5, 10, 20],
            ),
            _ => (
                vec![Method::EigPipeline, Method::PriorMean, Method::MmseFloor],
                (4..=24).map(|i| i * 10).collect(),
                vec![1, 2, 3, 4, 5, 6, 10, 12, 15, 20, 30, 60],
            ),
        };
        Ok(Self::defaults(scenario, methods, bits, partitions))
    }

    fn defaults(
        scenario: ScenarioSpec,
        methods: Vec<Method>,
        bits: Vec<u32>,
        partitions: Vec<usize>,
    ) -> Self {
        Self {
            scenario,
            methods,
            bits,
            trials: 10_000,
            seed: 0,
            eta: DEFAULT_ETA,
            output: None,
            format: OutputFormat::Csv,
            threads: None,
            output_dim: None,
            partitions,
            estimator: EstimatorVariant::AsPrinted,
            dither: false,
            bound_trials: 20_000,
            bound_max_bits: 16,
            record_timing: false,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Parses and validates a TOML configuration. All problems are reported
    /// together, one per field.
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::Config(vec![e.message().to_string()]))?;
        let mut errs = Vec::new();

        match raw.schema_version {
            Some(SCHEMA_VERSION) => {}
            Some(v) => errs.push(format!(
                "schema_version: unsupported version {v} (this build reads {SCHEMA_VERSION})"
            )),
            None => errs.push("schema_version: missing (expected 1)".to_string()),
        }

        let scenario = match raw.scenario.as_deref() {
            None => {
                errs.push("scenario: missing".to_string());
                None
            }
            Some("channel") => match (raw.taps, raw.observations) {
                (Some(taps), Some(observations)) => {
                    Some(ScenarioSpec::Channel { taps, observations })
                }
                _ => {
                    errs.push("taps, observations: required for a custom channel".to_string());
                    None
                }
            },
            Some("eig") => match (raw.alpha.clone(), raw.beta.clone(), raw.samples) {
                (Some(alpha), Some(beta), Some(samples)) => {
                    let dft_basis = match raw.basis.as_deref() {
                        None | Some("identity") => false,
                        Some("dft") => true,
                        Some(other) => {
                            errs.push(format!(
                                "basis: unknown basis '{other}' (expected dft or identity)"
                            ));
                            false
                        }
                    };
                    Some(ScenarioSpec::Eig {
                        alpha,
                        beta,
                        samples,
                        dft_basis,
                    })
                }
                _ => {
                    errs.push(
                        "alpha, beta, samples: required for a custom eigen-spectrum scenario"
                            .to_string(),
                    );
                    None
                }
            },
            Some(name) => match ScenarioSpec::preset(name) {
                Some(s) => Some(s),
                None => {
                    errs.push(format!(
                        "scenario: unknown scenario '{name}' (expected channel, eig or one of {})",
                        preset_names()
                    ));
                    None
                }
            },
        };
        if let Some(s) = &scenario {
            let custom_keys = [
                ("taps", raw.taps.is_some()),
                ("observations", raw.observations.is_some()),
                ("alpha", raw.alpha.is_some()),
                ("beta", raw.beta.is_some()),
                ("samples", raw.samples.is_some()),
                ("basis", raw.basis.is_some()),
            ];
            let allowed: &[&str] = match (s, raw.scenario.as_deref()) {
                (_, Some("channel")) => &["taps", "observations"],
                (_, Some("eig")) => &["alpha", "beta", "samples", "basis"],
                _ => &[],
            };
            for (key, set) in custom_keys {
                if set && !allowed.contains(&key) {
                    errs.push(format!(
                        "{key}: only valid for a custom scenario of that kind"
                    ));
                }
            }
        }

        let methods: Vec<Method> = match &raw.methods {
            None => {
                errs.push("methods: missing".to_string());
                Vec::new()
            }
            Some(list) => {
                let mut out = Vec::new();
                for name in list {
                    match name.parse::<Method>() {
                        Ok(m) if out.contains(&m) => {
                            errs.push(format!("methods: '{name}' listed twice"))
                        }
                        Ok(m) => out.push(m),
                        Err(e) => errs.push(format!("methods: {e}")),
                    }
                }
                if list.is_empty() {
                    errs.push("methods: must not be empty".to_string());
                }
                out
            }
        };
        if let Some(s) = &scenario {
            for m in &methods {
                let ok = if s.is_channel() {
                    m.for_channel()
                } else {
                    m.for_eig()
                };
                if !ok {
                    let kind = if s.is_channel() {
                        "channel"
                    } else {
                        "eigen-spectrum"
                    };
                    errs.push(format!(
                        "methods: '{m}' does not apply to a {kind} scenario"
                    ));
                }
            }
        }

        let bits: Vec<u32> = match &raw.bits {
            None => {
                errs.push("bits: missing".to_string());
                Vec::new()
            }
            Some(list) if list.is_empty() => {
                errs.push("bits: must not be empty".to_string());
                Vec::new()
            }
            Some(list) => {
                let mut out = Vec::new();
                for &b in list {
                    match u32::try_from(b) {
                        Ok(v) if v <= 4096 => out.push(v),
                        _ => errs.push(format!("bits: {b} is outside 0..=4096")),
                    }
                }
                if out.windows(2).any(|w| w[0] >= w[1]) {
                    errs.push("bits: grid must be strictly increasing".to_string());
                }
                out
            }
        };

        let trials = raw.trials.unwrap_or(10_000);
        if trials == 0 {
            errs.push("trials: must be at least 1".to_string());
        }
        let eta = raw.eta.unwrap_or(DEFAULT_ETA);
        if !(eta.is_finite() && eta > 0.0) {
            errs.push(format!("eta: must be positive, got {eta}"));
        }
        let format = match raw.format.as_deref() {
            None => OutputFormat::Csv,
            Some(f) => f.parse().unwrap_or_else(|e: String| {
                errs.push(format!("format: {e}"));
                OutputFormat::Csv
            }),
        };
        if raw.threads == Some(0) {
            errs.push("threads: must be at least 1".to_string());
        }
        if raw.output_dim == Some(0) {
            errs.push("output_dim: must be at least 1".to_string());
        }
        if raw.output_dim.is_some()
            && !methods.contains(&Method::Thm1)
            && !methods.contains(&Method::Thm1NoDither)
        {
            errs.push("output_dim: only used by thm1 and thm1-nodither".to_string());
        }
        let estimator = match raw.estimator.as_deref() {
            None | Some("as-printed") => EstimatorVariant::AsPrinted,
            Some("posterior-mean") => EstimatorVariant::PosteriorMean,
            Some(other) => {
                errs.push(format!(
                    "estimator: unknown variant '{other}' (expected as-printed or posterior-mean)"
                ));
                EstimatorVariant::AsPrinted
            }
        };
        let bound_trials = raw.bound_trials.unwrap_or(20_000);
        if bound_trials == 0 {
            errs.push("bound_trials: must be at least 1".to_string());
        }
        let bound_max_bits = raw.bound_max_bits.unwrap_or(16);
        if bound_max_bits > 40 {
            errs.push(format!("bound_max_bits: {bound_max_bits} exceeds 40"));
        }

        let partitions = raw.partitions.clone().unwrap_or_default();
        if let Some(s) = &scenario {
            if s.is_channel() {
                if raw.partitions.is_some() {
                    errs.push("partitions: only valid for eigen-spectrum scenarios".to_string());
                }
                if raw.estimator.is_some() {
                    errs.push("estimator: only valid for eigen-spectrum scenarios".to_string());
                }
                if raw.dither.is_some() {
                    errs.push(
                        "dither: only valid for eigen-spectrum scenarios (use the -nodither methods)"
                            .to_string(),
                    );
                }
            } else {
                let n_x = match s {
                    ScenarioSpec::EigPreset(EigPreset::Setup1) => 20,
                    ScenarioSpec::EigPreset(EigPreset::Setup2) => 60,
                    ScenarioSpec::Eig { samples, .. } => *samples,
                    ScenarioSpec::Channel { .. } => unreachable!(),
                };
                if methods.contains(&Method::EigPipeline) && partitions.is_empty() {
                    errs.push("partitions: eig-pipeline needs at least one set count".to_string());
                }
                for &n_s in &partitions {
                    if n_s == 0 || !n_x.is_multiple_of(n_s) {
                        errs.push(format!(
                            "partitions: {n_s} does not divide the sample count {n_x}"
                        ));
                    }
                }
                if partitions.windows(2).any(|w| w[0] >= w[1]) {
                    errs.push("partitions: must be strictly increasing".to_string());
                }
            }
        }

        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        let cfg = Self {
            scenario: scenario.expect("validated"),
            methods,
            bits,
            trials,
            seed: raw.seed.unwrap_or(0),
            eta,
            output: raw.output,
            format,
            threads: raw.threads,
            output_dim: raw.output_dim,
            partitions,
            estimator,
            dither: raw.dither.unwrap_or(false),
            bound_trials,
            bound_max_bits,
            record_timing: raw.record_timing.unwrap_or(false),
        };
        // Scenario parameters are checked by actually building it.
        cfg.scenario
            .build(cfg.estimator)
            .map_err(|e| Error::Config(vec![format!("scenario: {e}")]))?;
        Ok(cfg)
    }
}

fn preset_names() -> String {
    BUILTIN_PRESETS
        .iter()
        .map(|(n, _)| *n)
        .collect::<Vec<_>>()
        .join(", ")
}
