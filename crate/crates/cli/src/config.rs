use std::path::{Path, PathBuf};

use anderson_edge::evt::BatteryOptions;
use anderson_edge::{ContinuumShape, TailKind, TailSpec};
use schemars::JsonSchema;
use serde::{Deserialize, Deserializer, Serialize};

/// Everything a run depends on. `out` is where files land and does not enter
/// the embedded header, so a replay into another directory is byte-identical.
#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Lattice dimension; used when `shape` is absent.
    pub d: usize,
    /// Continuum shape; defaults to the unit cube of dimension `d`.
    #[schemars(with = "Option<serde_json::Value>")]
    pub shape: Option<ContinuumShape>,
    /// One scale or a list of scales.
    #[serde(rename = "L", deserialize_with = "one_or_many")]
    pub l: Vec<u64>,
    pub rho: f64,
    /// Tail perturbation, e.g. `{ kind = "atan", c = 0.1 }`.
    #[schemars(with = "serde_json::Value")]
    pub tail: TailKind,
    /// Box side override.
    pub n_l: Option<u64>,
    /// Corridor width override.
    pub r_l: Option<u64>,
    /// Top eigenvalues per sample.
    pub k: usize,
    pub ensemble: usize,
    pub seed: u64,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub spectrum: SpectrumKnobs,
    pub verify: VerifyKnobs,
    pub chi: ChiKnobs,
    pub evt: EvtKnobs,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumKnobs {
    /// `A` of the large-field region reported per sample.
    pub a: f64,
    /// Box draws per unit tail probability for the centering estimate.
    pub centering_exceedances: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyKnobs {
    pub campaigns: Vec<String>,
    pub instances: usize,
    pub chi_tol: f64,
    /// With `a`, runs truncation on fields over `D_L` at this fixed `(R, A)`.
    pub r: Option<u64>,
    pub a: Option<f64>,
    #[serde(skip)]
    #[schemars(skip)]
    pub inject_fault: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ChiKnobs {
    pub rhos: Vec<f64>,
    pub dims: Vec<usize>,
    /// Largest ball radius per dimension, indexed by `d − 1`.
    pub max_n: Vec<u64>,
    pub tol: f64,
    /// Also extrapolate `χ` by growing balls until the drop is below `limit_tol`.
    pub limit: bool,
    pub limit_tol: f64,
    /// Largest radius of the extrapolation per dimension, indexed by `d − 1`.
    pub limit_max_radius: Vec<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct EvtKnobs {
    pub centering_exceedances: f64,
    pub bootstrap: usize,
    pub level: f64,
    #[schemars(with = "serde_json::Value")]
    pub battery: BatteryOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            d: 1,
            shape: None,
            l: vec![1000],
            rho: 1.0,
            tail: TailKind::Exact,
            n_l: None,
            r_l: None,
            k: 5,
            ensemble: 10,
            seed: 1,
            out: None,
            spectrum: SpectrumKnobs::default(),
            verify: VerifyKnobs::default(),
            chi: ChiKnobs::default(),
            evt: EvtKnobs::default(),
        }
    }
}

impl Default for SpectrumKnobs {
    fn default() -> Self {
        SpectrumKnobs { a: 1.0, centering_exceedances: 20.0 }
    }
}

impl Default for VerifyKnobs {
    fn default() -> Self {
        VerifyKnobs { campaigns: vec!["truncation".into()], instances: 100, chi_tol: 1e-11, r: None, a: None, inject_fault: false }
    }
}

impl Default for ChiKnobs {
    fn default() -> Self {
        ChiKnobs { rhos: vec![0.5, 1.0, 2.0], dims: vec![1, 2], max_n: vec![12, 4], tol: 1e-10, limit: true, limit_tol: 1e-8, limit_max_radius: vec![200, 6] }
    }
}

impl Default for EvtKnobs {
    fn default() -> Self {
        EvtKnobs { centering_exceedances: 200.0, bootstrap: 200, level: 0.01, battery: BatteryOptions::default() }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(u64),
        Many(Vec<u64>),
    }
    Ok(match OneOrMany::deserialize(de)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("{0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })
    }

    pub fn shape(&self) -> ContinuumShape {
        self.shape.clone().unwrap_or_else(|| ContinuumShape::unit_cube(self.d))
    }

    pub fn tail_spec(&self) -> Result<TailSpec, ConfigError> {
        TailSpec::new(self.rho, self.tail).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Checks that do not need any sampling.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.shape.is_none() && !(1..=3).contains(&self.d) {
            return bad(format!("d must be 1, 2 or 3, got {}", self.d));
        }
        self.shape().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.tail_spec()?;
        if self.l.is_empty() || self.l.contains(&0) {
            return bad("L must be a nonempty list of positive integers".into());
        }
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if self.ensemble == 0 {
            return bad("ensemble must be positive".into());
        }
        if self.verify.r.is_some() != self.verify.a.is_some() {
            return bad("verify.r and verify.a must be given together".into());
        }
        let top_dim = self.chi.dims.iter().copied().max().unwrap_or(0);
        if self.chi.max_n.len() < top_dim || (self.chi.limit && self.chi.limit_max_radius.len() < top_dim) {
            return bad("chi.max_n and chi.limit_max_radius need one radius per dimension".into());
        }
        if self.chi.dims.contains(&0) {
            return bad("chi.dims must be positive".into());
        }
        Ok(())
    }
}
