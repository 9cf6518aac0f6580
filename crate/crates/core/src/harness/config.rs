use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{fpa_layout, Scheme, SchemeSettings, APS_MAX_CYCLES};
use crate::channel::{FriErrorModel, ScenarioConfig};
use crate::error::{Error, Result};
use crate::pso::PsoParams;

/// Parameter varied across an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "M")]
    M,
    #[serde(rename = "K")]
    K,
    #[serde(rename = "L")]
    L,
    #[serde(rename = "A_over_lambda")]
    AOverLambda,
    #[serde(rename = "pmax_dbm")]
    PmaxDbm,
    #[serde(rename = "mu")]
    Mu,
    #[serde(rename = "delta")]
    Delta,
}

impl SweepParam {
    pub const ALL: [SweepParam; 7] = [
        SweepParam::M,
        SweepParam::K,
        SweepParam::L,
        SweepParam::AOverLambda,
        SweepParam::PmaxDbm,
        SweepParam::Mu,
        SweepParam::Delta,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::M => "M",
            SweepParam::K => "K",
            SweepParam::L => "L",
            SweepParam::AOverLambda => "A_over_lambda",
            SweepParam::PmaxDbm => "pmax_dbm",
            SweepParam::Mu => "mu",
            SweepParam::Delta => "delta",
        }
    }

    /// Writes `value` into the scenario or the error model.
    pub fn apply(
        self,
        value: f64,
        cfg: &mut ScenarioConfig,
        fri: &mut FriErrorModel,
    ) -> Result<()> {
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::config(format!(
                    "{} must be a positive integer, got {value}",
                    self.as_str()
                )))
            }
        };
        match self {
            SweepParam::M => cfg.num_antennas = count()?,
            SweepParam::K => cfg.num_users = count()?,
            SweepParam::L => cfg.num_paths = count()?,
            SweepParam::AOverLambda => cfg.region_over_lambda = value,
            SweepParam::PmaxDbm => cfg.pmax_dbm = value,
            SweepParam::Mu => fri.mu = value,
            SweepParam::Delta => fri.delta = value,
        }
        Ok(())
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.as_str() == s.trim())
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown sweep parameter `{s}` (expected one of M, K, L, A_over_lambda, pmax_dbm, mu, delta)"
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// Built-in parameter sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    /// 16 antennas, 12 users, 200 particles, 300 iterations, 1000 trials.
    Table1,
    /// 6 antennas, 4 users, 30 particles, 80 iterations, 100 trials.
    Desk,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "table1" => Ok(Profile::Table1),
            "desk" => Ok(Profile::Desk),
            _ => Err(Error::config(format!(
                "unknown profile `{s}` (expected table1 or desk)"
            ))),
        }
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub pso: PsoParams,
    pub schemes: Vec<Scheme>,
    /// `None` runs the base scenario only.
    pub sweep: Option<Sweep>,
    pub trials: usize,
    pub seed: u64,
    /// Error of the channel knowledge handed to the optimizers.
    pub fri: FriErrorModel,
    pub aps_max_cycles: usize,
    /// Record wall-clock time per scheme run. Off by default because timings
    /// make output files differ between runs.
    pub record_timing: bool,
}

impl ExperimentSpec {
    pub fn from_profile(profile: Profile) -> Self {
        let (scenario, pso, trials) = match profile {
            Profile::Table1 => (ScenarioConfig::table1(), PsoParams::table1(), 1000),
            Profile::Desk => (ScenarioConfig::desk(), PsoParams::desk(), 100),
        };
        Self {
            scenario,
            pso,
            schemes: Scheme::ALL.to_vec(),
            sweep: None,
            trials,
            seed: 0,
            fri: FriErrorModel::default(),
            aps_max_cycles: APS_MAX_CYCLES,
            record_timing: false,
        }
    }

    /// Profile defaults overridden by a TOML document with optional
    /// `[scenario]`, `[pso]` and `[experiment]` tables.
    pub fn from_toml_str(text: &str, profile: Profile) -> Result<Self> {
        let doc: toml::Table = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        let mut spec = Self::from_profile(profile);
        for (key, value) in doc {
            let table = match value {
                toml::Value::Table(t) => t,
                _ => return Err(Error::config(format!("`{key}` must be a table"))),
            };
            match key.as_str() {
                "scenario" => spec.scenario = overlay(&spec.scenario, table)?,
                "pso" => spec.pso = overlay(&spec.pso, table)?,
                "experiment" => {
                    let section: ExperimentSection = toml::Value::Table(table)
                        .try_into()
                        .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
                    section.apply(&mut spec)?;
                }
                other => return Err(Error::config(format!("unknown section `[{other}]`"))),
            }
        }
        Ok(spec)
    }

    pub fn from_toml_file(path: &Path, profile: Profile) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, profile).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn settings(&self) -> SchemeSettings {
        SchemeSettings {
            pso: self.pso.clone(),
            aps_max_cycles: self.aps_max_cycles,
        }
    }

    /// Name written to the `sweep_param` column.
    pub fn sweep_name(&self) -> &'static str {
        self.sweep.as_ref().map_or("none", |s| s.param.as_str())
    }

    /// `(sweep value, scenario, error model)` for every sweep point; a single
    /// point with value 0 when nothing is swept.
    pub fn points(&self) -> Result<Vec<(f64, ScenarioConfig, FriErrorModel)>> {
        match &self.sweep {
            None => Ok(vec![(0.0, self.scenario.clone(), self.fri)]),
            Some(sweep) => sweep
                .values
                .iter()
                .map(|&v| {
                    let mut cfg = self.scenario.clone();
                    let mut fri = self.fri;
                    sweep.param.apply(v, &mut cfg, &mut fri)?;
                    Ok((v, cfg, fri))
                })
                .collect(),
        }
    }

    /// Rejects specs that would fail part-way through a run.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("at least one scheme is required"));
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return Err(Error::config(format!("scheme {s} listed twice")));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::config("sweep values must not be empty"));
            }
            if sweep.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::config("sweep values must be finite"));
            }
        }
        if self.aps_max_cycles == 0 {
            return Err(Error::config("aps_max_cycles must be at least 1"));
        }
        self.pso.validate()?;
        let needs_grid = self
            .schemes
            .iter()
            .any(|s| matches!(s, Scheme::Fpa | Scheme::Aps));
        for (_, cfg, fri) in self.points()? {
            cfg.validate()?;
            if !(fri.mu >= 0.0 && fri.mu.is_finite() && fri.delta >= 0.0 && fri.delta.is_finite()) {
                return Err(Error::config(
                    "mu and delta must be finite and non-negative",
                ));
            }
            if needs_grid {
                fpa_layout(cfg.num_antennas, cfg.wavelength, cfg.region_side())?;
            }
        }
        Ok(())
    }
}

fn overlay<T>(base: &T, table: toml::Table) -> Result<T>
where
    T: Serialize + for<'de> Deserialize<'de>,
{
    let mut merged = match toml::Value::try_from(base).map_err(|e| Error::config(e.to_string()))? {
        toml::Value::Table(t) => t,
        _ => unreachable!("structs serialize to tables"),
    };
    merged.extend(table);
    toml::Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| Error::config(e.to_string()))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Number {
    Int(i64),
    Float(f64),
}

impl Number {
    fn value(&self) -> f64 {
        match *self {
            Number::Int(i) => i as f64,
            Number::Float(f) => f,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    schemes: Option<Vec<Scheme>>,
    sweep_param: Option<SweepParam>,
    sweep_values: Option<Vec<Number>>,
    trials: Option<usize>,
    seed: Option<u64>,
    mu: Option<f64>,
    delta: Option<f64>,
    aps_max_cycles: Option<usize>,
    record_timing: Option<bool>,
}

impl ExperimentSection {
    fn apply(self, spec: &mut ExperimentSpec) -> Result<()> {
        if let Some(v) = self.schemes {
            spec.schemes = v;
        }
        match (self.sweep_param, self.sweep_values) {
            (Some(param), Some(values)) => {
                spec.sweep = Some(Sweep {
                    param,
                    values: values.iter().map(Number::value).collect(),
                })
            }
            (None, None) => {}
            _ => {
                return Err(Error::config(
                    "sweep_param and sweep_values must be given together",
                ))
            }
        }
        if let Some(v) = self.trials {
            spec.trials = v;
        }
        if let Some(v) = self.seed {
            spec.seed = v;
        }
        if let Some(v) = self.mu {
            spec.fri.mu = v;
        }
        if let Some(v) = self.delta {
            spec.fri.delta = v;
        }
        if let Some(v) = self.aps_max_cycles {
            spec.aps_max_cycles = v;
        }
        if let Some(v) = self.record_timing {
            spec.record_timing = v;
        }
        Ok(())
    }
}
