//! Experiment manifests.
//!
//! ```toml
//! [system]          # either {a, b, c, tau} or {q, w, c}, plus sigma or snr_db
//! a = -1.0
//! b = 1.0
//! c = 1.0
//! tau = 1.0
//!
//! [run]
//! num_bits = 320
//! num_runs = 2000
//! seed = 0
//!
//! [grid]
//! n = 4001
//! tol = 1e-6
//! alpha = 0.0
//!
//! [sweep]
//! snr_db = "0..14 step 2"   # or a list: [0, 2, 4]
//! ```

use serde::Deserialize;

use crate::chain::RunConfig;
use crate::error::{Error, Result};
use crate::kernel::{DEFAULT_GRID_N, DEFAULT_MAX_ITER};
use crate::model::{sigma_for_snr, ContinuousSystem, DiscreteSystem};

pub const DEFAULT_TOL: f64 = 1e-6;

fn config_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let reason = e.message().to_string();
            let key = reason
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "config".to_string());
            config_err(&key, reason)
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub tau: Option<f64>,
    pub q: Option<f64>,
    pub w: Option<f64>,
    pub sigma: Option<f64>,
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    Sigma(f64),
    SnrDb(f64),
}

/// `(q, w, c)` plus an optional noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemSpec {
    pub q: f64,
    pub w: f64,
    pub c: f64,
    pub noise: Option<Noise>,
}

impl SystemSpec {
    /// System at the configured noise level.
    pub fn system(&self) -> Result<DiscreteSystem> {
        match self.noise {
            Some(Noise::Sigma(s)) => self.with_sigma(s),
            Some(Noise::SnrDb(db)) => self.at_snr(db),
            None => Err(config_err("sigma|snr_db", "no noise level configured")),
        }
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<DiscreteSystem> {
        DiscreteSystem::new(self.q, self.w, self.c, sigma)
    }

    pub fn at_snr(&self, snr_db: f64) -> Result<DiscreteSystem> {
        let unit = DiscreteSystem::new(self.q, self.w, self.c, 1.0)?;
        unit.with_sigma(sigma_for_snr(&unit, snr_db)?)
    }

    pub fn configured_snr_db(&self) -> Result<Option<f64>> {
        Ok(match self.noise {
            Some(Noise::SnrDb(db)) => Some(db),
            Some(Noise::Sigma(_)) => Some(self.system()?.snr_db()),
            None => None,
        })
    }
}

impl SystemSection {
    /// The unit-decay system `a = -1`, `b = c = 1`, `tau = 1`.
    pub fn default_continuous() -> Self {
        SystemSection {
            a: Some(-1.0),
            b: Some(1.0),
            c: Some(1.0),
            tau: Some(1.0),
            ..SystemSection::default()
        }
    }

    fn has_continuous(&self) -> bool {
        self.a.is_some() || self.b.is_some() || self.tau.is_some()
    }

    fn has_discrete(&self) -> bool {
        self.q.is_some() || self.w.is_some()
    }

    /// Resolves exactly one parameter form. An empty section falls back to
    /// [`SystemSection::default_continuous`] with its noise keys kept.
    pub fn resolve(&self) -> Result<SystemSpec> {
        let noise = match (self.sigma, self.snr_db) {
            (Some(_), Some(_)) => {
                return Err(config_err("sigma", "give either sigma or snr_db, not both"))
            }
            (Some(s), None) => Some(Noise::Sigma(s)),
            (None, Some(db)) => Some(Noise::SnrDb(db)),
            (None, None) => None,
        };
        let c = self.c.unwrap_or(1.0);
        let (q, w) = match (self.has_continuous(), self.has_discrete()) {
            (true, true) => {
                let key = if self.q.is_some() { "q" } else { "w" };
                return Err(config_err(
                    key,
                    "mixes discrete keys {q, w} with continuous keys {a, b, tau}",
                ));
            }
            (false, false) => {
                let d = SystemSection::default_continuous();
                return SystemSection {
                    c: self.c.or(d.c),
                    sigma: self.sigma,
                    snr_db: self.snr_db,
                    ..d
                }
                .resolve();
            }
            (true, false) => {
                let a = self.a.ok_or_else(|| config_err("a", "missing"))?;
                let b = self.b.ok_or_else(|| config_err("b", "missing"))?;
                let tau = self.tau.unwrap_or(1.0);
                let sys = ContinuousSystem::new(a, b, c, tau).map_err(|e| tag(e, "a"))?;
                crate::model::discretize(&sys).map_err(|e| tag(e, "b"))?
            }
            (false, true) => (
                self.q.ok_or_else(|| config_err("q", "missing"))?,
                self.w.ok_or_else(|| config_err("w", "missing"))?,
            ),
        };
        DiscreteSystem::new(q, w, c, 1.0).map_err(|e| tag(e, "system"))?;
        if let Some(Noise::Sigma(s)) = noise {
            if !(s.is_finite() && s > 0.0) {
                return Err(config_err("sigma", format!("must be positive, got {s}")));
            }
        }
        if let Some(Noise::SnrDb(db)) = noise {
            if !db.is_finite() {
                return Err(config_err("snr_db", "must be finite"));
            }
        }
        Ok(SystemSpec { q, w, c, noise })
    }
}

/// Rewrites parameter errors as config errors naming the offending key.
fn tag(e: Error, fallback: &str) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => config_err(name, reason),
        Error::NonPositiveW { w } => config_err(
            if fallback == "system" { "w" } else { "b" },
            format!("input weight w = {w} must be positive"),
        ),
        other => config_err(fallback, other.to_string()),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub num_bits: Option<usize>,
    pub num_runs: Option<usize>,
    pub seed: Option<u64>,
    pub x0: Option<f64>,
    pub xhat0: Option<f64>,
}

impl RunSection {
    pub fn resolve(&self) -> Result<RunConfig> {
        let d = RunConfig::default();
        let cfg = RunConfig {
            num_bits: self.num_bits.unwrap_or(d.num_bits),
            num_runs: self.num_runs.unwrap_or(d.num_runs),
            seed: self.seed.unwrap_or(d.seed),
            x0: self.x0.unwrap_or(d.x0),
            xhat0: self.xhat0.unwrap_or(d.xhat0),
        };
        if cfg.num_bits == 0 {
            return Err(config_err("num_bits", "must be at least 1"));
        }
        if cfg.num_runs == 0 {
            return Err(config_err("num_runs", "must be at least 1"));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSettings {
    pub n: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub alpha: f64,
}

impl GridSection {
    pub fn resolve(&self) -> Result<GridSettings> {
        let s = GridSettings {
            n: self.n.unwrap_or(DEFAULT_GRID_N),
            tol: self.tol.unwrap_or(DEFAULT_TOL),
            max_iter: self.max_iter.unwrap_or(DEFAULT_MAX_ITER),
            alpha: self.alpha.unwrap_or(0.0),
        };
        if s.n < 3 || s.n.is_multiple_of(2) {
            return Err(config_err(
                "grid_n",
                format!("must be odd and at least 3, got {}", s.n),
            ));
        }
        if !(s.tol.is_finite() && s.tol > 0.0) {
            return Err(config_err(
                "tol",
                format!("must be positive, got {}", s.tol),
            ));
        }
        if s.max_iter == 0 {
            return Err(config_err("max_iter", "must be at least 1"));
        }
        if !s.alpha.is_finite() {
            return Err(config_err("alpha", "must be finite"));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SnrList {
    List(Vec<f64>),
    Spec(String),
}

impl SnrList {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            SnrList::List(v) => {
                crate::curve::validate_snr_list(v).map_err(|e| tag(e, "snr_db"))?;
                Ok(v.clone())
            }
            SnrList::Spec(s) => parse_snr_spec(s),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub snr_db: Option<SnrList>,
}

/// Parses `"a..b step s"` (inclusive of `b`) or a comma-separated list.
pub fn parse_snr_spec(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    let bad = |why: &str| config_err("snr", format!("{why} in {spec:?}"));
    let values = if let Some((range, step)) = spec.split_once("step") {
        let (a, b) = range
            .split_once("..")
            .ok_or_else(|| bad("expected `a..b step s`"))?;
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad("bad number"));
        let (a, b, s) = (num(a)?, num(b)?, num(step)?);
        if s.is_nan() || s <= 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(bad("step must be positive and bounds finite"));
        }
        if b < a {
            return Err(bad("empty range"));
        }
        let count = ((b - a) / s + 1e-9).floor() as usize + 1;
        (0..count).map(|i| a + s * i as f64).collect::<Vec<_>>()
    } else if spec.is_empty() {
        Vec::new()
    } else {
        spec.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad("bad number")))
            .collect::<Result<Vec<_>>>()?
    };
    crate::curve::validate_snr_list(&values).map_err(|e| tag(e, "snr"))?;
    Ok(values)
}
