//! Run configuration.
//!
//! A run is described by one TOML document. Relative paths resolve against the
//! directory of the document.
//!
//! ```toml
//! name = "toy"
//! seed = 7
//! policy = "nodal"
//!
//! [paths]
//! history_forecast = "history_forecast.csv"
//! history_actual = "history_actual.csv"
//! forecast = "forecast_day.csv"
//! realized = "realized_day.csv"
//! case = "case.toml"
//!
//! [stressor]
//! scenarios = 100
//! parallel = true
//!
//! [reserve]
//! method = "risk"
//! level = 3
//!
//! [penalties]
//! load_shedding = 10000.0
//! wind_spillage = 100.0
//! redispatch_i = 2.0
//! redispatch_ii = 5.0
//! relax = 500.0
//!
//! [solver]
//! backend = "highs"
//! mip_rel_gap = 1e-4
//! threads = 1
//!
//! [sweep]
//! methods = ["extent", "probability", "risk"]
//! levels = [1, 2, 3, 4, 5]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use windflex_core::reserve::{level_preset, MethodKind, ReserveMethod, RiskVariant};
use windflex_core::stats::FitOptions;
use windflex_core::stressor::{Placeholders, RecordLayout};
use windflex_core::weather::FeatureSchema;
use windflex_core::TurbineSpec;
use windflex_sched::{ContingencyRule, RampForm, ReservePolicy, RtPenalties, ScucOptions, SolveLimits};

use crate::error::{AtStage, PipelineError, Result, Stage};

pub const SOLVER_ENV: &str = "WINDFLEX_SOLVER";
pub const THREADS_ENV: &str = "WINDFLEX_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Historical day-ahead weather forecasts.
    pub history_forecast: PathBuf,
    /// Realized weather at the same timestamps.
    pub history_actual: PathBuf,
    /// Forecast weather of the study day(s).
    pub forecast: PathBuf,
    /// Realized weather of the study day(s).
    pub realized: PathBuf,
    pub case: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StressorConfig {
    pub scenarios: usize,
    pub key_stressor: String,
    /// Forecast-speed interval edges; the default grid is used when absent.
    pub edges: Option<Vec<f64>>,
    pub placeholders: Placeholders,
    pub fit: FitOptions,
    /// Trailing rows of the history used for the coupling PCA; all rows when absent.
    pub pca_window: Option<usize>,
    pub layout: RecordLayout,
    pub parallel: bool,
    /// Confidence level of the emitted plot envelope.
    pub envelope_ci: f64,
}

impl Default for StressorConfig {
    fn default() -> Self {
        Self {
            scenarios: 100,
            key_stressor: "windspeed_100m".into(),
            edges: None,
            placeholders: Placeholders::default(),
            fit: FitOptions::default(),
            pca_window: None,
            layout: RecordLayout::default(),
            parallel: true,
            envelope_ci: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReserveConfig {
    pub method: MethodKind,
    /// Preset level 1..=5.
    pub level: usize,
    pub risk_variant: RiskVariant,
}

impl Default for ReserveConfig {
    fn default() -> Self {
        Self {
            method: MethodKind::Risk,
            level: 3,
            risk_variant: RiskVariant::Printed,
        }
    }
}

impl ReserveConfig {
    /// Preset for a farm of `rated_mw`.
    pub fn method_for(&self, rated_mw: f64) -> Result<ReserveMethod> {
        let m = level_preset(self.method, self.level, rated_mw).at(Stage::Size)?;
        Ok(match m {
            ReserveMethod::Risk { rho_mw, .. } => ReserveMethod::Risk {
                rho_mw,
                variant: self.risk_variant,
            },
            other => other,
        })
    }
}

/// $/MW prices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Penalties {
    pub load_shedding: f64,
    pub wind_spillage: f64,
    pub redispatch_i: f64,
    pub redispatch_ii: f64,
    /// Price of relaxing a day-ahead reserve requirement.
    pub relax: f64,
}

impl Default for Penalties {
    fn default() -> Self {
        let rt = RtPenalties::default();
        Self {
            load_shedding: rt.load_shedding,
            wind_spillage: rt.wind_spillage,
            redispatch_i: rt.redispatch_i,
            redispatch_ii: rt.redispatch_ii,
            relax: ScucOptions::default().reserve_penalty,
        }
    }
}

impl Penalties {
    pub fn rt(&self) -> RtPenalties {
        RtPenalties {
            load_shedding: self.load_shedding,
            wind_spillage: self.wind_spillage,
            redispatch_i: self.redispatch_i,
            redispatch_ii: self.redispatch_ii,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScucConfig {
    pub contingency: ContingencyRule,
    pub ramp: RampForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub backend: String,
    pub mip_rel_gap: f64,
    pub time_limit_s: Option<f64>,
    pub threads: Option<u32>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let l = SolveLimits::default();
        Self {
            backend: "highs".into(),
            mip_rel_gap: l.mip_rel_gap,
            time_limit_s: l.time_limit_s,
            threads: l.threads,
        }
    }
}

impl SolverConfig {
    pub fn limits(&self) -> SolveLimits {
        SolveLimits {
            mip_rel_gap: self.mip_rel_gap,
            time_limit_s: self.time_limit_s,
            threads: self.threads,
        }
    }
}

/// Reserve methods × preset levels, one report per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub methods: Vec<MethodKind>,
    pub levels: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            methods: MethodKind::ALL.to_vec(),
            levels: vec![1, 2, 3, 4, 5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub policy: ReservePolicy,
    pub paths: Paths,
    #[serde(default = "FeatureSchema::standard")]
    pub schema: FeatureSchema,
    #[serde(default)]
    pub turbine: TurbineSpec,
    #[serde(default)]
    pub stressor: StressorConfig,
    #[serde(default)]
    pub reserve: ReserveConfig,
    #[serde(default)]
    pub penalties: Penalties,
    #[serde(default)]
    pub scuc: ScucConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_name() -> String {
    "run".into()
}

impl RunConfig {
    pub fn from_toml_str(s: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(s).at(Stage::Config)?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).at(Stage::Config)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, base)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).at(Stage::Config)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn case_path(&self) -> PathBuf {
        self.resolve(&self.paths.case)
    }

    /// Applies `WINDFLEX_SOLVER` and `WINDFLEX_THREADS`.
    pub fn apply_env(&mut self) -> Result<()> {
        self.apply_overrides(std::env::var(SOLVER_ENV).ok(), std::env::var(THREADS_ENV).ok())
    }

    pub fn apply_overrides(&mut self, solver: Option<String>, threads: Option<String>) -> Result<()> {
        if let Some(s) = solver.filter(|s| !s.is_empty()) {
            self.solver.backend = s;
        }
        if let Some(t) = threads.filter(|s| !s.is_empty()) {
            let n: u32 = t
                .trim()
                .parse()
                .map_err(|_| PipelineError::invalid(Stage::Config, format!("{THREADS_ENV}=`{t}` is not a count")))?;
            self.solver.threads = Some(n);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::invalid(Stage::Config, m));
        let p = &self.paths;
        for (what, path) in [
            ("history_forecast", &p.history_forecast),
            ("history_actual", &p.history_actual),
            ("forecast", &p.forecast),
            ("realized", &p.realized),
            ("case", &p.case),
        ] {
            let full = self.resolve(path);
            if !full.is_file() {
                return bad(format!("{what} file {} does not exist", full.display()));
            }
        }
        if self.stressor.scenarios == 0 {
            return bad("stressor.scenarios must be at least 1".into());
        }
        if !(self.stressor.envelope_ci > 0.0 && self.stressor.envelope_ci <= 1.0) {
            return bad(format!("stressor.envelope_ci {} not in (0, 1]", self.stressor.envelope_ci));
        }
        if self.stressor.pca_window.is_some_and(|w| w < 2) {
            return bad("stressor.pca_window must be at least 2".into());
        }
        if !self.schema.features.iter().any(|f| f.id == self.stressor.key_stressor) {
            return bad(format!("key stressor `{}` is not in the schema", self.stressor.key_stressor));
        }
        self.turbine
            .validate()
            .map_err(|e| PipelineError::invalid(Stage::Config, e.to_string()))?;
        self.stressor
            .placeholders
            .validate(&self.turbine)
            .map_err(|e| PipelineError::invalid(Stage::Config, e.to_string()))?;
        check_level(self.reserve.level)?;
        self.penalties
            .rt()
            .validate()
            .map_err(|e| PipelineError::invalid(Stage::Config, e.to_string()))?;
        if !(self.penalties.relax >= 0.0 && self.penalties.relax.is_finite()) {
            return bad(format!("relaxation penalty {}", self.penalties.relax));
        }
        if !(self.solver.mip_rel_gap >= 0.0) {
            return bad(format!("mip_rel_gap {}", self.solver.mip_rel_gap));
        }
        windflex_sched::backend(&self.solver.backend).at(Stage::Config)?;
        if let Some(s) = &self.sweep {
            if s.methods.is_empty() || s.levels.is_empty() {
                return bad("sweep needs at least one method and one level".into());
            }
            for &l in &s.levels {
                check_level(l)?;
            }
        }
        Ok(())
    }

    pub fn scuc_options(&self) -> ScucOptions {
        ScucOptions {
            contingency: self.scuc.contingency,
            ramp: self.scuc.ramp,
            reserve_penalty: self.penalties.relax,
        }
    }

    /// SHA-256 of the canonical TOML form. Sampling parallelism, the thread
    /// count and the sweep do not change a run's own report and are left out.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.stressor.parallel = StressorConfig::default().parallel;
        c.solver.threads = None;
        c.sweep = None;
        let text = c.to_toml_string()?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }

    /// The schema of files written by the ingest stage (columns named by feature id).
    pub fn canonical_schema(&self) -> FeatureSchema {
        let mut s = self.schema.clone();
        s.timestamp_column = "timestamp".into();
        for f in &mut s.features {
            f.column = f.id.clone();
        }
        s
    }
}

fn check_level(level: usize) -> Result<()> {
    if (1..=5).contains(&level) {
        Ok(())
    } else {
        Err(PipelineError::invalid(Stage::Config, format!("reserve level {level} not in 1..=5")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"
policy = "zonal"
seed = 3

[paths]
history_forecast = "hf.csv"
history_actual = "ha.csv"
forecast = "f.csv"
realized = "r.csv"
case = "case.toml"

[reserve]
method = "extent"
level = 2
"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_toml_str(DOC, "/tmp").unwrap();
        assert_eq!(c.policy, ReservePolicy::Zonal);
        assert_eq!(c.stressor.scenarios, 100);
        assert_eq!(c.penalties, Penalties::default());
        assert_eq!(c.penalties.load_shedding, 10_000.0);
        assert_eq!(c.penalties.relax, 500.0);
        assert_eq!(c.schema.features.len(), 21);
        assert_eq!(c.case_path(), PathBuf::from("/tmp/case.toml"));
        let back = RunConfig::from_toml_str(&c.to_toml_string().unwrap(), "/tmp").unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn missing_files_fail_validation() {
        let c = RunConfig::from_toml_str(DOC, "/nonexistent").unwrap();
        let e = c.validate().unwrap_err();
        assert_eq!(e.stage, Stage::Config);
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let doc = format!("{DOC}\nbogus = 1\n");
        assert!(RunConfig::from_toml_str(&doc, "/tmp").is_err());
    }

    #[test]
    fn overrides_apply() {
        let mut c = RunConfig::from_toml_str(DOC, "/tmp").unwrap();
        c.apply_overrides(Some("HiGHS".into()), Some("4".into())).unwrap();
        assert_eq!(c.solver.backend, "HiGHS");
        assert_eq!(c.solver.threads, Some(4));
        assert!(c.apply_overrides(None, Some("many".into())).is_err());
    }

    #[test]
    fn risk_variant_reaches_the_method() {
        let mut r = ReserveConfig::default();
        r.risk_variant = RiskVariant::Mirrored;
        match r.method_for(100.0).unwrap() {
            ReserveMethod::Risk { rho_mw, variant } => {
                assert!((rho_mw - 30.0).abs() < 1e-12);
                assert_eq!(variant, RiskVariant::Mirrored);
            }
            m => panic!("{m:?}"),
        }
    }
}
