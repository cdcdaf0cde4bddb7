//! Run configuration: one TOML file per experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::components::{BatterySpec, PerComponent, PvSpec, TurbineSpec, WindSpec};
use crate::dispatch::{DesignBounds, DesignVector, SystemSpecs, DESIGN_DISCRETE_MASK};
use crate::economics::CostParams;
use crate::error::ModelError;
use crate::objective::MicrogridObjective;
use crate::optimize::{GainSchedule, MspsaConfig, PsoConfig};
use crate::scenario::{ReliabilityParams, StochasticParams, TmyReadError, TypicalYear};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: field `{field}`: {reason}")]
    Invalid {
        path: PathBuf,
        field: String,
        reason: String,
    },
    #[error("{path}: {source}")]
    Data {
        path: PathBuf,
        #[source]
        source: TmyReadError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Typical-year CSV, relative to the config file.
    pub data: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub stochastic: StochasticParams,
    #[serde(default = "always_available")]
    pub reliability: PerComponent<ReliabilityParams>,
    #[serde(default)]
    pub components: ComponentsConfig,
    pub costs: CostParams,
    #[serde(default)]
    pub design: DesignConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub compare: CompareConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn always_available() -> PerComponent<ReliabilityParams> {
    PerComponent::splat(ReliabilityParams::ALWAYS_AVAILABLE)
}

/// Per-unit component models. Fleet sizes come from the design vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComponentsConfig {
    pub pv: PvSpec,
    pub wind: WindSpec,
    pub battery: BatterySpec,
    pub turbine: TurbineSpec,
    pub turbine_charging: bool,
}

impl From<ComponentsConfig> for SystemSpecs {
    fn from(c: ComponentsConfig) -> Self {
        SystemSpecs {
            pv: c.pv,
            wind: c.wind,
            battery: c.battery,
            turbine: c.turbine,
            turbine_charging: c.turbine_charging,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    pub bounds: DesignBounds,
    pub initial: DesignVector,
    /// Optimizer units per unit of threshold fraction.
    pub threshold_scale: f64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig {
            bounds: DesignBounds::default(),
            initial: DesignVector {
                pv_kw: 5000,
                wt_kw: 5000,
                bss_kwh: 5000,
                mt_kw: 5000,
                t_rp: 0.0,
                t_er: 0.0,
            },
            threshold_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Mspsa,
    Pso,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    /// MSPSA iterations; PSO gets twice as many loss evaluations.
    pub max_iterations: usize,
    pub replicates_per_eval: usize,
    pub mspsa: MspsaSettings,
    pub pso: PsoSettings,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Mspsa,
            max_iterations: 500,
            replicates_per_eval: 1,
            mspsa: MspsaSettings::default(),
            pso: PsoSettings::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn budget_evaluations(&self) -> usize {
        2 * self.max_iterations
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MspsaSettings {
    pub a: f64,
    pub c: f64,
    pub big_a: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub common_random_numbers: bool,
    pub stall_tolerance: f64,
    pub stall_window: usize,
    pub track_loss: bool,
}

impl Default for MspsaSettings {
    fn default() -> Self {
        let g = GainSchedule::default();
        MspsaSettings {
            a: g.a,
            c: g.c,
            big_a: g.big_a,
            alpha: g.alpha,
            gamma: g.gamma,
            common_random_numbers: true,
            stall_tolerance: 1e-6,
            stall_window: 50,
            track_loss: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsoSettings {
    pub c1: f64,
    pub c2: f64,
    pub w: f64,
    pub population: usize,
    pub v0_range: [f64; 2],
    pub v_max_fraction: Option<f64>,
    pub init_spread: f64,
}

impl Default for PsoSettings {
    fn default() -> Self {
        PsoSettings {
            c1: 2.3,
            c2: 2.3,
            w: 1.0,
            population: 20,
            v0_range: [-1.0, 1.0],
            v_max_fraction: None,
            init_spread: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    /// Monte Carlo years used to score a final design.
    pub scenarios: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig { scenarios: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub replicates: usize,
    /// Evaluations between curve points.
    pub stride: usize,
    /// Monte Carlo years used to score incumbents along the curves.
    pub scenarios: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            replicates: 10,
            stride: 20,
            scenarios: 20,
        }
    }
}

/// A validated configuration with its data loaded.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: RunConfig,
    pub tmy: TypicalYear,
    /// Directory the config file lives in.
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<RunConfig, ConfigError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate(path)?;
        Ok(config)
    }

    /// Checks every nested invariant, naming the offending field.
    pub fn validate(&self, path: &Path) -> Result<(), ConfigError> {
        let invalid = |field: String, reason: String| ConfigError::Invalid {
            path: path.to_path_buf(),
            field,
            reason,
        };
        let model = |prefix: &str| {
            let prefix = prefix.to_string();
            move |e: ModelError| match e {
                ModelError::InvalidParameter { name, reason } => ConfigError::Invalid {
                    path: path.to_path_buf(),
                    field: qualify(&prefix, name),
                    reason,
                },
                other => ConfigError::Invalid {
                    path: path.to_path_buf(),
                    field: prefix.clone(),
                    reason: other.to_string(),
                },
            }
        };

        self.stochastic.validate().map_err(model(""))?;
        for (kind, r) in self.reliability.iter() {
            r.validate().map_err(model(&format!("reliability.{}", kind.name())))?;
        }
        SystemSpecs::from(self.components)
            .validate()
            .map_err(model("components"))?;
        self.costs.validate().map_err(model(""))?;
        self.design.bounds.validate().map_err(model(""))?;
        if !self.design.bounds.contains(&self.design.initial) {
            return Err(invalid(
                "design.initial".into(),
                "initial design lies outside design.bounds".into(),
            ));
        }
        let scale = self.design.threshold_scale;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("design.threshold_scale".into(), "must be > 0".into()));
        }
        let opt = &self.optimizer;
        if opt.replicates_per_eval == 0 {
            return Err(invalid("optimizer.replicates_per_eval".into(), "must be >= 1".into()));
        }
        self.mspsa_config()
            .validate::<ModelError>()
            .map_err(|e| invalid("optimizer.mspsa".into(), e.to_string()))?;
        self.pso_config()
            .validate::<ModelError>()
            .map_err(|e| invalid("optimizer.pso".into(), e.to_string()))?;
        if self.evaluation.scenarios == 0 {
            return Err(invalid("evaluation.scenarios".into(), "must be >= 1".into()));
        }
        if self.compare.replicates == 0 {
            return Err(invalid("compare.replicates".into(), "must be >= 1".into()));
        }
        if self.compare.stride == 0 {
            return Err(invalid("compare.stride".into(), "must be >= 1".into()));
        }
        if self.compare.scenarios == 0 {
            return Err(invalid("compare.scenarios".into(), "must be >= 1".into()));
        }
        Ok(())
    }

    pub fn mspsa_config(&self) -> MspsaConfig {
        let s = &self.optimizer.mspsa;
        let scale = self.design.threshold_scale;
        MspsaConfig {
            gains: GainSchedule {
                a: s.a,
                c: s.c,
                big_a: s.big_a,
                alpha: s.alpha,
                gamma: s.gamma,
            },
            bounds: self.design.bounds.to_box(scale),
            discrete: DESIGN_DISCRETE_MASK.to_vec(),
            initial: self.design.initial.to_point(scale).to_vec(),
            max_iterations: self.optimizer.max_iterations,
            replicates_per_eval: self.optimizer.replicates_per_eval,
            seed: self.seed,
            common_random_numbers: s.common_random_numbers,
            stall_tolerance: s.stall_tolerance,
            stall_window: s.stall_window,
            track_loss: s.track_loss,
        }
    }

    pub fn pso_config(&self) -> PsoConfig {
        let s = &self.optimizer.pso;
        let scale = self.design.threshold_scale;
        PsoConfig {
            c1: s.c1,
            c2: s.c2,
            w: s.w,
            population: s.population,
            v0_range: (s.v0_range[0], s.v0_range[1]),
            bounds: self.design.bounds.to_box(scale),
            discrete: DESIGN_DISCRETE_MASK.to_vec(),
            initial: self.design.initial.to_point(scale).to_vec(),
            max_evaluations: self.optimizer.budget_evaluations(),
            replicates_per_eval: self.optimizer.replicates_per_eval,
            seed: self.seed,
            v_max_fraction: s.v_max_fraction,
            init_spread: s.init_spread,
        }
    }

    /// Thresholds pinned to zero.
    pub fn without_incentives(&self) -> RunConfig {
        let mut c = self.clone();
        c.design.bounds = c.design.bounds.without_incentives();
        c.design.initial.t_rp = 0.0;
        c.design.initial.t_er = 0.0;
        c
    }
}

fn qualify(prefix: &str, name: &str) -> String {
    // reliability errors name their own section; replace it with the
    // component-qualified prefix
    let name = name.strip_prefix("reliability.").unwrap_or(name);
    let name = if name == "reliability" { "" } else { name };
    match (prefix.is_empty(), name.is_empty()) {
        (true, _) => name.to_string(),
        (false, true) => prefix.to_string(),
        (false, false) => format!("{prefix}.{name}"),
    }
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Experiment, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config = RunConfig::from_toml(&text, path)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let data_path = base_dir.join(&config.data);
        if !data_path.is_file() {
            return Err(ConfigError::Invalid {
                path: path.to_path_buf(),
                field: "data".into(),
                reason: format!("file {} does not exist", data_path.display()),
            });
        }
        let tmy = TypicalYear::read_csv(&data_path).map_err(|source| ConfigError::Data {
            path: data_path.clone(),
            source,
        })?;
        Ok(Experiment {
            config,
            tmy,
            base_dir,
        })
    }

    pub fn objective(&self) -> MicrogridObjective {
        let c = &self.config;
        MicrogridObjective {
            tmy: self.tmy.clone(),
            stochastic: c.stochastic,
            reliability: c.reliability,
            specs: c.components.into(),
            costs: c.costs,
            threshold_scale: c.design.threshold_scale,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
data = "tmy.csv"
[stochastic]
sigma_pv = 0.0724
weibull_shape = 2.0
weibull_scale = 6.8
[costs]
capex_unit = { pv = 1.0, wind = 1.0, battery = 1.0, turbine = 1.0 }
opex_unit = { pv = 0.0, wind = 0.0, battery = 0.0, turbine = 0.0 }
carbon_tax = 0.05
fuel_price = 1.0
voll = 5.0
discount_rate = 0.08
lifetime_years = 20
h_max = 10.0
penalty_r = 100.0
"#;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::from_toml(text, Path::new("case.toml"))
    }

    fn field_of(text: &str) -> String {
        match parse(text) {
            Err(ConfigError::Invalid { field, .. }) => field,
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.optimizer.max_iterations, 500);
        assert_eq!(c.optimizer.budget_evaluations(), 1000);
        assert_eq!(c.design.initial.pv_kw, 5000);
        assert_eq!(c.evaluation.scenarios, 100);
        assert_eq!(c.compare.replicates, 10);
        assert_eq!(c.pso_config().population, 20);
        assert_eq!(c.mspsa_config().gains, GainSchedule::default());
    }

    #[test]
    fn validation_names_the_field() {
        let t = MINIMAL.replace("discount_rate = 0.08", "discount_rate = 1.5");
        assert_eq!(field_of(&t), "costs.discount_rate");

        let t = format!("{MINIMAL}\n[reliability.wind]\nfailure_rate = 2.0\nrepair_rate = 0.1\n[reliability.pv]\nfailure_rate = 0.0\nrepair_rate = 1.0\n[reliability.battery]\nfailure_rate = 0.0\nrepair_rate = 1.0\n[reliability.turbine]\nfailure_rate = 0.0\nrepair_rate = 1.0\n");
        assert_eq!(field_of(&t), "reliability.wind.failure_rate");

        let t = format!("{MINIMAL}\n[components.battery]\nsoc_min = 0.9\nsoc_max = 0.5\n");
        assert!(field_of(&t).starts_with("components.battery"));

        let t = format!("{MINIMAL}\n[design]\nthreshold_scale = 0.0\n");
        assert_eq!(field_of(&t), "design.threshold_scale");

        let t = format!("{MINIMAL}\n[design.initial]\npv_kw = 20000\nwt_kw = 0\nbss_kwh = 0\nmt_kw = 0\nt_rp = 0.0\nt_er = 0.0\n");
        assert_eq!(field_of(&t), "design.initial");

        let t = format!("{MINIMAL}\n[optimizer.mspsa]\nc = 0.0\n");
        assert_eq!(field_of(&t), "optimizer.mspsa");

        let t = format!("{MINIMAL}\n[optimizer.pso]\npopulation = 1\n");
        assert_eq!(field_of(&t), "optimizer.pso");
    }

    #[test]
    fn unknown_keys_are_parse_errors_with_location() {
        let t = MINIMAL.replace("voll = 5.0", "vol = 5.0");
        match parse(&t) {
            Err(ConfigError::Parse { message, .. }) => {
                assert!(message.contains("vol"), "{message}");
                assert!(message.contains("line"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_data_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("case.toml");
        std::fs::write(&path, MINIMAL).unwrap();
        match Experiment::load(&path) {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "data"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn without_incentives_pins_thresholds() {
        let c = parse(MINIMAL).unwrap().without_incentives();
        let b = c.mspsa_config().bounds;
        assert_eq!(b[4], (0.0, 0.0));
        assert_eq!(b[5], (0.0, 0.0));
    }
}
