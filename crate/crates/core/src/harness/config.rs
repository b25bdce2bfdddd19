//! Scenario and sweep configuration files (TOML).

use std::fmt;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{CorruptionSchedule, RoundScript, ScheduleKind, StrategySpec};
use crate::engine::FaultType;
use crate::model::{all_bit_vectors, Bit, Clause, Value};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    Schema(u32),
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolId {
    OmissionCa,
    Wc,
    GcCa,
    Madabsm,
    AuthCa,
    Statcons,
    Indulgent,
}

impl ProtocolId {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolId::OmissionCa => "omission_ca",
            ProtocolId::Wc => "wc",
            ProtocolId::GcCa => "gc_ca",
            ProtocolId::Madabsm => "madabsm",
            ProtocolId::AuthCa => "auth_ca",
            ProtocolId::Statcons => "statcons",
            ProtocolId::Indulgent => "indulgent",
        }
    }

    pub fn is_composite(self) -> bool {
        matches!(self, ProtocolId::Statcons | ProtocolId::Indulgent)
    }

    /// The fault type a base protocol is built for.
    pub fn native_fault(self) -> Option<FaultType> {
        match self {
            ProtocolId::OmissionCa => Some(FaultType::Omission),
            ProtocolId::Wc | ProtocolId::GcCa => Some(FaultType::Byzantine),
            ProtocolId::Madabsm | ProtocolId::AuthCa => Some(FaultType::AuthByzantine),
            ProtocolId::Statcons | ProtocolId::Indulgent => None,
        }
    }
}

impl fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledInputs {
    pub k: usize,
    pub seed: u64,
}

/// `[0, 1, 1]`, `"all"`, or `{ sampled = { k = 4, seed = 1 } }`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputSpec {
    Explicit(Vec<Bit>),
    Named(String),
    Sampled { sampled: SampledInputs },
}

impl Default for InputSpec {
    fn default() -> Self {
        InputSpec::Named("all".into())
    }
}

impl InputSpec {
    /// Input vectors in binary order.
    pub fn resolve(&self, n: usize) -> Result<Vec<Vec<Bit>>, ConfigError> {
        match self {
            InputSpec::Explicit(v) => {
                if v.len() != n {
                    return invalid(format!("inputs list has {} entries but n = {n}", v.len()));
                }
                Ok(vec![v.clone()])
            }
            InputSpec::Named(s) if s == "all" => {
                if n > 20 {
                    return invalid(format!("inputs = \"all\" enumerates 2^{n} vectors; use sampled inputs"));
                }
                Ok(all_bit_vectors(n))
            }
            InputSpec::Named(s) => invalid(format!("unknown inputs keyword `{s}` (expected \"all\")")),
            InputSpec::Sampled { sampled } => {
                if n > 60 {
                    return invalid("sampled inputs support n <= 60");
                }
                let space = 1u64 << n;
                let k = sampled.k.min(space as usize);
                let mut rng = ChaCha8Rng::seed_from_u64(sampled.seed);
                let mut codes: Vec<u64> = if space <= 1 << 20 {
                    rand::seq::index::sample(&mut rng, space as usize, k).into_iter().map(|c| c as u64).collect()
                } else {
                    use rand::Rng;
                    let mut seen = std::collections::BTreeSet::new();
                    while seen.len() < k {
                        seen.insert(rng.random_range(0..space));
                    }
                    seen.into_iter().collect()
                };
                codes.sort_unstable();
                Ok(codes
                    .into_iter()
                    .map(|c| (0..n).map(|i| Bit::from(c >> (n - 1 - i) & 1 == 1)).collect())
                    .collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversaryConfig {
    None,
    Silence,
    Random {
        seed: u64,
        #[serde(default)]
        stream: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        extra: Option<Vec<Value>>,
    },
    Scripted { rounds: Vec<RoundScript> },
    /// Every behavior, falling back to sampling above `cap`.
    Exhaustive {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fallback_samples: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Seeded random behaviors.
    Sampled { seed: u64, samples: u64 },
}

impl AdversaryConfig {
    /// The concrete single-execution strategy, if this is one.
    pub fn strategy(&self) -> Option<StrategySpec> {
        Some(match self {
            AdversaryConfig::None => StrategySpec::None,
            AdversaryConfig::Silence => StrategySpec::Silence,
            AdversaryConfig::Random { seed, stream, extra } => {
                StrategySpec::Random { seed: *seed, stream: *stream, extra: extra.clone() }
            }
            AdversaryConfig::Scripted { rounds } => StrategySpec::Scripted { rounds: rounds.clone() },
            AdversaryConfig::Exhaustive { .. } | AdversaryConfig::Sampled { .. } => return None,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    /// Where `check` writes the first counterexample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<PathBuf>,
}

impl OutputPaths {
    fn is_empty(&self) -> bool {
        self == &OutputPaths::default()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub holds: bool,
    #[serde(default)]
    pub violated_clauses: Vec<Clause>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed_properties: Vec<String>,
}

fn default_max_rounds() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub protocol: ProtocolId,
    /// Commit-adopt machine used by `statcons` and `indulgent`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<ProtocolId>,
    pub n: usize,
    pub t: usize,
    pub fault: FaultType,
    #[serde(default)]
    pub inputs: InputSpec,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    /// Exploration horizon for `indulgent` under exhaustive checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    pub schedule: ScheduleKind,
    pub adversary: AdversaryConfig,
    #[serde(default, skip_serializing_if = "OutputPaths::is_empty")]
    pub output: OutputPaths,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs serialize to TOML")
    }

    pub fn corruption_schedule(&self) -> CorruptionSchedule {
        CorruptionSchedule::new(self.schedule, self.t)
    }

    /// Base commit-adopt protocol whose fault type governs the scenario.
    pub fn base_protocol(&self) -> ProtocolId {
        if self.protocol.is_composite() {
            self.inner.unwrap_or(ProtocolId::OmissionCa)
        } else {
            self.protocol
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Schema(self.schema_version));
        }
        if self.n < 2 {
            return invalid(format!("n must be at least 2, got {}", self.n));
        }
        if self.n > 64 {
            return invalid(format!("n must be at most 64, got {}", self.n));
        }
        if self.t >= self.n {
            return invalid(format!("t must be below n (t = {}, n = {})", self.t, self.n));
        }
        if self.protocol.is_composite() {
            match self.inner {
                Some(ProtocolId::OmissionCa | ProtocolId::GcCa | ProtocolId::AuthCa) => {}
                Some(other) => return invalid(format!("{} needs a commit-adopt inner protocol, not {other}", self.protocol)),
                None => return invalid(format!("{} needs `inner` (omission_ca, gc_ca or auth_ca)", self.protocol)),
            }
        } else if self.inner.is_some() {
            return invalid(format!("{} takes no inner protocol", self.protocol));
        }
        let base = self.base_protocol();
        let native = base.native_fault().expect("base protocols have a fault type");
        if native != self.fault {
            return invalid(format!("{base} runs against {native} faults, not {}", self.fault));
        }
        self.inputs.resolve(self.n)?;
        if let AdversaryConfig::Random { extra, .. } = &self.adversary {
            let alphabet = extra.clone().unwrap_or_default();
            if self.fault == FaultType::Omission && !alphabet.is_empty() {
                return invalid("omission adversaries cannot carry a substitution alphabet");
            }
            if self.fault != FaultType::Omission && extra.as_ref().is_some_and(Vec::is_empty) {
                return invalid("byzantine adversaries need a non-empty alphabet");
            }
        }
        Ok(())
    }
}

/// One block of a sweep grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub protocol: ProtocolId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<ProtocolId>,
    pub fault: FaultType,
    pub n: RangeSpec,
    pub t: RangeSpec,
    pub schedule: ScheduleKind,
    #[serde(default)]
    pub mode: CellMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub inputs: InputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellMode {
    /// Exhaustive, falling back to sampling above the cap.
    #[default]
    Exhaustive,
    Sampled,
}

/// Inclusive range whose ends are expressions in `n`: an integer, `n`,
/// `n-K`, `ceil(n/K)` or `floor(n/K)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub from: Bound,
    pub to: Bound,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Int(usize),
    Expr(String),
}

impl Bound {
    pub fn eval(&self, n: usize) -> Result<usize, ConfigError> {
        let s = match self {
            Bound::Int(k) => return Ok(*k),
            Bound::Expr(s) => s.replace(' ', ""),
        };
        let num = |x: &str| x.parse::<usize>().map_err(|_| ConfigError::Invalid(format!("bad range bound `{s}`")));
        if s == "n" {
            return Ok(n);
        }
        if let Some(k) = s.strip_prefix("n-") {
            return n.checked_sub(num(k)?).ok_or_else(|| ConfigError::Invalid(format!("`{s}` is negative at n = {n}")));
        }
        for (prefix, ceil) in [("ceil(n/", true), ("floor(n/", false)] {
            if let Some(rest) = s.strip_prefix(prefix).and_then(|r| r.strip_suffix(')')) {
                let k = num(rest)?;
                if k == 0 {
                    return invalid("division by zero in range bound");
                }
                return Ok(if ceil { n.div_ceil(k) } else { n / k });
            }
        }
        num(&s)
    }
}

impl RangeSpec {
    pub fn values(&self, n: usize) -> Result<Vec<usize>, ConfigError> {
        Ok((self.from.eval(n)?..=self.to.eval(n)?).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub schema_version: u32,
    #[serde(rename = "grid")]
    pub grids: Vec<GridBlock>,
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let spec: SweepSpec = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if spec.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Schema(spec.schema_version));
        }
        Ok(spec)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    /// Every cell as a scenario config, in grid order.
    pub fn cells(&self) -> Result<Vec<ScenarioConfig>, ConfigError> {
        let mut out = Vec::new();
        for g in &self.grids {
            for n in g.n.from.eval(0)?..=g.n.to.eval(0)? {
                for t in g.t.values(n)? {
                    if t >= n {
                        continue;
                    }
                    let adversary = match g.mode {
                        CellMode::Exhaustive => AdversaryConfig::Exhaustive { cap: g.cap, fallback_samples: g.samples, seed: Some(g.seed) },
                        CellMode::Sampled => AdversaryConfig::Sampled { seed: g.seed, samples: g.samples.unwrap_or(10_000) },
                    };
                    let cfg = ScenarioConfig {
                        schema_version: SCHEMA_VERSION,
                        protocol: g.protocol,
                        inner: g.inner,
                        n,
                        t,
                        fault: g.fault,
                        inputs: g.inputs.clone(),
                        max_rounds: g.max_rounds,
                        horizon: g.horizon,
                        schedule: g.schedule,
                        adversary,
                        output: OutputPaths::default(),
                        expect: None,
                    };
                    cfg.validate()?;
                    out.push(cfg);
                }
            }
        }
        Ok(out)
    }
}
