use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha1::Sha1;
use sha2::{Digest, Sha256};

use crate::envs::{CarbonConfig, DataConfig, InferenceConfig};
use crate::error::{Error, Result};
use crate::learner::{BetaSchedule, GridConfig, TrainConfig};
use crate::model::CompetitiveSpec;

/// Largest episode count per seed; keeps the seed streams disjoint.
pub const MAX_EPISODES: usize = 1_000_000;

/// Environment selection, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvChoice {
    Carbon(CarbonConfig),
    Inference(InferenceConfig),
    /// A tiny enumerable fixture; learned with the exact history-tree planner.
    Tiny {
        fixture: PathBuf,
    },
}

impl Default for EnvChoice {
    fn default() -> Self {
        EnvChoice::Carbon(CarbonConfig::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    pub lambda: f64,
    pub b: f64,
}

impl SpecConfig {
    pub fn build(&self) -> Result<CompetitiveSpec> {
        CompetitiveSpec::new(self.lambda, self.b).map_err(|e| Error::config(e.to_string()))
    }
}

/// One policy in the roster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RosterEntry {
    #[serde(rename = "acrl")]
    Acrl,
    #[serde(rename = "rl")]
    Rl,
    #[serde(rename = "crl")]
    Crl,
    #[serde(rename = "random+acd")]
    RandomAcd,
    #[serde(rename = "rl+acd")]
    RlAcd,
    #[serde(rename = "prior")]
    Prior,
}

impl RosterEntry {
    pub fn id(self) -> &'static str {
        match self {
            RosterEntry::Acrl => "acrl",
            RosterEntry::Rl => "rl",
            RosterEntry::Crl => "crl",
            RosterEntry::RandomAcd => "random+acd",
            RosterEntry::RlAcd => "rl+acd",
            RosterEntry::Prior => "prior",
        }
    }

    /// Runs behind the ACD projection, so every row must satisfy the constraint.
    pub fn acd_wrapped(self) -> bool {
        matches!(self, RosterEntry::Acrl | RosterEntry::RandomAcd | RosterEntry::RlAcd)
    }

    pub fn learns(self) -> bool {
        matches!(
            self,
            RosterEntry::Acrl | RosterEntry::Rl | RosterEntry::Crl | RosterEntry::RlAcd
        )
    }
}

impl fmt::Display for RosterEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Half-open seed range written `a..b` (or inclusive `a..=b`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SeedRange {
    pub start: u64,
    pub end: u64,
}

impl SeedRange {
    pub fn iter(&self) -> impl Iterator<Item = u64> {
        self.start..self.end
    }

    pub fn len(&self) -> usize {
        (self.end - self.start) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

impl FromStr for SeedRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("seed range {s:?} is not of the form a..b"));
        let (a, b, inclusive) = if let Some((a, b)) = s.split_once("..=") {
            (a, b, true)
        } else if let Some((a, b)) = s.split_once("..") {
            (a, b, false)
        } else {
            let n: u64 = s.trim().parse().map_err(|_| bad())?;
            return Ok(SeedRange { start: n, end: n + 1 });
        };
        let start: u64 = a.trim().parse().map_err(|_| bad())?;
        let mut end: u64 = b.trim().parse().map_err(|_| bad())?;
        if inclusive {
            end += 1;
        }
        if end <= start {
            return Err(Error::config(format!("seed range {s:?} is empty")));
        }
        Ok(SeedRange { start, end })
    }
}

impl TryFrom<String> for SeedRange {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SeedRange> for String {
    fn from(r: SeedRange) -> String {
        format!("{}..{}", r.start, r.end)
    }
}

impl fmt::Display for SeedRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// What the regret columns are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    /// Learners trained on the reference seed range and frozen.
    Trained,
    /// The policy prior stands in for both references.
    Prior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceConfig {
    pub source: ReferenceSource,
    /// Training episodes for each reference learner.
    pub episodes: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            source: ReferenceSource::Trained,
            episodes: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Lambda,
    B,
    Beta0,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Lambda => "lambda",
            SweepParam::B => "b",
            SweepParam::Beta0 => "beta0",
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(SweepParam::Lambda),
            "b" => Ok(SweepParam::B),
            "beta0" => Ok(SweepParam::Beta0),
            _ => Err(Error::config(format!(
                "unknown sweep parameter {s:?}; expected lambda, b or beta0"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub over: SweepParam,
    pub values: Vec<f64>,
}

/// A full experiment: environment, spec, roster, episode counts and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub env: EnvChoice,
    pub spec: SpecConfig,
    pub roster: Vec<RosterEntry>,
    /// Training episodes `K` per seed.
    pub episodes: usize,
    /// Held-out evaluation episodes per seed and policy.
    #[serde(default)]
    pub eval_episodes: usize,
    pub seeds: SeedRange,
    /// Overrides the environment's horizon.
    #[serde(default)]
    pub horizon: Option<usize>,
    /// Width of the trailing window for `windowed_regret`.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Write a checkpoint every this many update windows; 0 disables.
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn default_window() -> usize {
    50
}

fn default_checkpoint_every() -> usize {
    1
}

/// A parsed config plus the hashes that stamp its runs.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// Git blob hash (`sha1("blob <len>\0" ++ bytes)`) of the file as read.
    pub content_hash: String,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates `path`; relative fixture and trace paths are
    /// resolved against the config's directory.
    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let bytes = std::fs::read(path)?;
        let text =
            String::from_utf8(bytes.clone()).map_err(|_| Error::config(format!("{} is not UTF-8", path.display())))?;
        let mut config = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(LoadedConfig {
            config,
            content_hash: git_blob_hash(&bytes),
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let fix_data = |d: &mut DataConfig| {
            for s in [&mut d.primary, &mut d.secondary] {
                if let Some(p) = s.path.as_mut() {
                    fix(p);
                }
            }
        };
        match &mut self.env {
            EnvChoice::Carbon(c) => fix_data(&mut c.data),
            EnvChoice::Inference(c) => fix_data(&mut c.data),
            EnvChoice::Tiny { fixture } => fix(fixture),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.build()?;
        self.train.validate()?;
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::config("name must be nonempty and contain no path separators"));
        }
        if self.roster.is_empty() {
            return Err(Error::config("roster is empty"));
        }
        for (i, r) in self.roster.iter().enumerate() {
            if self.roster[..i].contains(r) {
                return Err(Error::config(format!("roster lists {r} twice")));
            }
        }
        if self.episodes > MAX_EPISODES || self.eval_episodes > MAX_EPISODES || self.reference.episodes > MAX_EPISODES {
            return Err(Error::config(format!("episode counts are limited to {MAX_EPISODES}")));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seed range is empty"));
        }
        if self.window == 0 {
            return Err(Error::config("window must be positive"));
        }
        if self.horizon == Some(0) {
            return Err(Error::config("horizon must be positive"));
        }
        if let EnvChoice::Tiny { .. } = self.env {
            if self.roster.contains(&RosterEntry::Crl) {
                return Err(Error::config(
                    "the crl baseline needs a grid environment, not a tiny fixture",
                ));
            }
            if self.horizon.is_some() {
                return Err(Error::config("tiny fixtures fix their own horizon"));
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::config("sweep has no values"));
            }
        }
        Ok(())
    }

    /// The competitive spec after any sweep override has been applied.
    pub fn competitive_spec(&self) -> Result<CompetitiveSpec> {
        self.spec.build()
    }

    /// A copy with one sweep parameter set.
    pub fn with_param(&self, param: SweepParam, value: f64) -> Result<Self> {
        let mut c = self.clone();
        match param {
            SweepParam::Lambda => c.spec.lambda = value,
            SweepParam::B => c.spec.b = value,
            SweepParam::Beta0 => match &mut c.train.beta {
                BetaSchedule::Log { beta0 } => *beta0 = value,
                other => {
                    return Err(Error::config(format!(
                        "beta0 sweep needs the log schedule, config has {other:?}"
                    )))
                }
            },
        }
        c.sweep = None;
        c.validate()?;
        Ok(c)
    }

    /// Canonical TOML of the parsed config; whitespace and key order in the
    /// source file do not change it.
    pub fn canonical(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("cannot serialize config: {e}")))
    }

    /// SHA-256 of [`ExperimentConfig::canonical`], hex.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.canonical()?.as_bytes())))
    }
}

/// `git hash-object` of `bytes`.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
roster = ["prior", "random+acd"]
episodes = 3
seeds = "0..2"
spec = { lambda = 2.0, b = 2.0 }
"#;

    #[test]
    fn parses_minimal_config() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.seeds, SeedRange { start: 0, end: 2 });
        assert_eq!(c.roster, vec![RosterEntry::Prior, RosterEntry::RandomAcd]);
        assert_eq!(c.window, 50);
        assert!(matches!(c.env, EnvChoice::Carbon(_)));
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = format!("{MINIMAL}\nbogus = 1\n");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(Error::Config(_))));
        let nested = MINIMAL.replace("b = 2.0 }", "b = 2.0, c = 1 }");
        assert!(ExperimentConfig::from_toml(&nested).is_err());
        let env = format!("{MINIMAL}\n[env]\nkind = \"carbon\"\nwhatever = 3\n");
        assert!(ExperimentConfig::from_toml(&env).is_err());
    }

    #[test]
    fn seed_ranges() {
        assert_eq!("3..7".parse::<SeedRange>().unwrap().len(), 4);
        assert_eq!("3..=7".parse::<SeedRange>().unwrap().len(), 5);
        assert_eq!("4".parse::<SeedRange>().unwrap(), SeedRange { start: 4, end: 5 });
        assert!("5..5".parse::<SeedRange>().is_err());
        assert!("a..b".parse::<SeedRange>().is_err());
    }

    #[test]
    fn hash_ignores_formatting_but_not_values() {
        let a = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let b = ExperimentConfig::from_toml(&MINIMAL.replace("episodes = 3", "episodes    =   3")).unwrap();
        let c = ExperimentConfig::from_toml(&MINIMAL.replace("episodes = 3", "episodes = 4")).unwrap();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn git_blob_hash_matches_git() {
        // `printf 'hello\n' | git hash-object --stdin`
        assert_eq!(git_blob_hash(b"hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
    }

    #[test]
    fn sweep_overrides() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.with_param(SweepParam::Lambda, 6.0).unwrap().spec.lambda, 6.0);
        assert!(c.with_param(SweepParam::B, -1.0).is_err());
        match c.with_param(SweepParam::Beta0, 7.0).unwrap().train.beta {
            BetaSchedule::Log { beta0 } => assert_eq!(beta0, 7.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_roster_and_tiny_crl_rejected() {
        let dup = MINIMAL.replace(r#"["prior", "random+acd"]"#, r#"["prior", "prior"]"#);
        assert!(ExperimentConfig::from_toml(&dup).is_err());
        let tiny = format!(
            "{}\n[env]\nkind = \"tiny\"\nfixture = \"x.toml\"\n",
            MINIMAL.replace(r#"["prior", "random+acd"]"#, r#"["crl"]"#)
        );
        assert!(ExperimentConfig::from_toml(&tiny).is_err());
    }
}
