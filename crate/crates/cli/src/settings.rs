use std::path::Path;

use anyhow::{Context, Result};

use osa_core::chain::RunConfig;
use osa_core::config::{parse_snr_spec, ConfigFile, GridSettings, Noise, SystemSpec};
use osa_core::{DiscreteSystem, Error};

const DEFAULT_SWEEP: &str = "0..14 step 2";

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub bits: Option<usize>,
    pub snr: Option<String>,
    pub alpha: Option<f64>,
    pub grid_n: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub tau: Option<f64>,
    pub q: Option<f64>,
    pub w: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub system: SystemSpec,
    pub run: RunConfig,
    pub grid: GridSettings,
    pub snr: Option<Vec<f64>>,
}

fn config_error(key: &str, reason: &str) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.to_string(),
    }
}

impl Settings {
    pub fn load(path: Option<&Path>, o: &Overrides) -> Result<Self> {
        let mut file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("cannot read config file {}", p.display()))?;
                ConfigFile::from_toml(&text)?
            }
            None => ConfigFile::default(),
        };

        let sys = &mut file.system;
        if o.a.is_some() || o.b.is_some() || o.tau.is_some() {
            sys.q = None;
            sys.w = None;
        }
        if o.q.is_some() || o.w.is_some() {
            sys.a = None;
            sys.b = None;
            sys.tau = None;
        }
        macro_rules! set {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src {
                    $dst = Some(v);
                }
            };
        }
        set!(sys.a, o.a);
        set!(sys.b, o.b);
        set!(sys.c, o.c);
        set!(sys.tau, o.tau);
        set!(sys.q, o.q);
        set!(sys.w, o.w);
        if o.sigma.is_some() {
            sys.snr_db = None;
            sys.sigma = o.sigma;
        }
        set!(file.run.seed, o.seed);
        set!(file.run.num_runs, o.runs);
        set!(file.run.num_bits, o.bits);
        set!(file.grid.n, o.grid_n);
        set!(file.grid.tol, o.tol);
        set!(file.grid.max_iter, o.max_iter);
        set!(file.grid.alpha, o.alpha);

        let snr = match (&o.snr, &file.sweep.snr_db) {
            (Some(spec), _) => Some(parse_snr_spec(spec)?),
            (None, Some(list)) => Some(list.values()?),
            (None, None) => None,
        };
        Ok(Settings {
            system: file.system.resolve()?,
            run: file.run.resolve()?,
            grid: file.grid.resolve()?,
            snr,
        })
    }

    /// SNR points for curve commands: the SNR list, else the configured noise
    /// level, else `0..14 step 2`.
    pub fn sweep_points(&self) -> Result<Vec<(f64, DiscreteSystem)>> {
        let list = match (&self.snr, self.system.noise) {
            (Some(list), _) => list.clone(),
            (None, Some(Noise::Sigma(_))) => {
                let sys = self.system.system()?;
                return Ok(vec![(sys.snr_db(), sys)]);
            }
            (None, Some(Noise::SnrDb(db))) => vec![db],
            (None, None) => parse_snr_spec(DEFAULT_SWEEP)?,
        };
        Ok(list
            .into_iter()
            .map(|db| Ok((db, self.system.at_snr(db)?)))
            .collect::<osa_core::Result<Vec<_>>>()?)
    }

    /// The single operating point for point commands.
    pub fn single_point(&self) -> Result<(f64, DiscreteSystem)> {
        match &self.snr {
            Some(list) if list.len() == 1 => Ok((list[0], self.system.at_snr(list[0])?)),
            Some(_) => Err(config_error(
                "snr",
                "this command takes a single SNR value; use `sweep` for a list",
            )
            .into()),
            None => match self.system.noise {
                Some(_) => {
                    let sys = self.system.system()?;
                    Ok((sys.snr_db(), sys))
                }
                None => Err(config_error(
                    "snr",
                    "no noise level: pass --snr, --sigma or set [system] snr_db",
                )
                .into()),
            },
        }
    }
}
