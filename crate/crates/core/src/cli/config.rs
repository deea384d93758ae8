//! Run configuration and its `key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! preset = tc-small            # optional; later keys override it
//! n = 2
//! grid.points = 64
//! flavor = two_convex          # or area_decreasing
//! recipe.kind = modes          # zero | quadratic | modes | random_region
//! recipe.a = 1, 0, 0, 1        # row-major n×n, symmetric
//! recipe.mode.0 = 1,0 0.2 0.0  # wavevector, amplitude, phase (phase optional)
//! recipe.region = two_convex   # two_convex | area_decreasing | none
//! recipe.margin = 0.1
//! recipe.seed = 7
//! recipe.max_rejects = 10000
//! recipe.random.count = 3
//! recipe.random.amplitude = 0.3
//! recipe.random.max_wavenumber = 2
//! integrator.scheme = euler    # or rk4
//! integrator.cfl = 0.5
//! integrator.max_steps = 10000000
//! integrator.t_end = 50
//! output.sample_every = 50
//! output.csv_path = diagnostics.csv
//! output.json_summary_path = summary.json
//! output.snapshot_cadence = 0
//! output.snapshot_dir = snapshots
//! tolerances.slack_mono = 1e-7
//! tolerances.tol_growth = auto # or a number; auto = 1e-4 + 10h²
//! tolerances.tol_a2 = 1e-8
//! tolerances.tol_hess = 1e-4
//! tolerances.tol_theta = 1e-6
//! tolerances.warn_margin = 1e-3
//! ```

use crate::flow::{IntegratorSpec, RunOptions, Scheme};
use crate::monitors::{ConvergenceTolerances, DEFAULT_MONOTONE_SLACK};
use crate::scenarios::{preset, Mode, Recipe, RecipeKind, Region};
use crate::spectrum::{Flavor, SymMatrix};
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    pub csv_path: PathBuf,
    pub json_summary_path: PathBuf,
    /// Diagnostics rows between snapshots; 0 disables them.
    pub snapshot_cadence: u64,
    pub snapshot_dir: PathBuf,
    pub sample_every: u64,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            csv_path: "diagnostics.csv".into(),
            json_summary_path: "summary.json".into(),
            snapshot_cadence: 0,
            snapshot_dir: "snapshots".into(),
            sample_every: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub slack_mono: f64,
    /// `None`: `1e-4 + 10h²`.
    pub tol_growth: Option<f64>,
    pub convergence: ConvergenceTolerances,
    pub warn_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            slack_mono: DEFAULT_MONOTONE_SLACK,
            tol_growth: None,
            convergence: ConvergenceTolerances::default(),
            warn_margin: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub n: usize,
    pub points: usize,
    pub recipe: Recipe,
    pub integrator: IntegratorSpec,
    pub flavor: Flavor,
    pub output: OutputSpec,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            name: "custom".into(),
            n: 2,
            points: 32,
            recipe: Recipe::default(),
            integrator: IntegratorSpec::default(),
            flavor: Flavor::TwoConvex,
            output: OutputSpec::default(),
            tolerances: Tolerances::default(),
        }
    }
}

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::Config(format!("{key} = {value}: {what}"))
}

fn real(key: &str, value: &str) -> Result<f64> {
    match value.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(bad(key, value, "expected a finite number")),
    }
}

fn uint<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, "expected a non-negative integer"))
}

fn parse_mode(key: &str, value: &str) -> Result<Mode> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(bad(key, value, "expected `k1,k2,... amplitude [phase]`"));
    }
    let k = parts[0]
        .split(',')
        .map(|s| s.trim().parse::<i64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| bad(key, value, "wavevector must be integers"))?;
    Ok(Mode {
        k,
        amplitude: real(key, parts[1])?,
        phase: parts.get(2).map(|p| real(key, p)).transpose()?.unwrap_or(0.0),
    })
}

impl RunConfig {
    pub fn from_preset(name: &str) -> Result<Self> {
        let p = preset(name).ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))?;
        Ok(RunConfig {
            name: p.name.into(),
            n: p.n,
            points: p.points,
            recipe: p.recipe,
            integrator: IntegratorSpec {
                t_end: p.t_end,
                ..IntegratorSpec::default()
            },
            flavor: p.flavor,
            ..RunConfig::default()
        })
    }

    /// Parses the text format. A `preset` key, if present, is applied first.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut modes = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if let Some(i) = k.strip_prefix("recipe.mode.") {
                let i: usize = uint(&k, i)?;
                if modes.insert(i, parse_mode(&k, &v)?).is_some() {
                    return Err(Error::Config(format!("line {}: duplicate key {k}", lineno + 1)));
                }
                continue;
            }
            if entries.insert(k.clone(), v).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {k}", lineno + 1)));
            }
        }
        let mut cfg = match entries.remove("preset") {
            Some(p) => RunConfig::from_preset(&p)?,
            None => RunConfig::default(),
        };
        if !modes.is_empty() {
            cfg.recipe.modes = modes.into_values().collect();
        }
        let mut a_text = None;
        for (k, v) in &entries {
            cfg.set(k, v, &mut a_text)?;
        }
        if let Some(v) = a_text {
            let vals = v
                .split(',')
                .map(|s| real("recipe.a", s.trim()))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != cfg.n * cfg.n {
                return Err(bad("recipe.a", &v, &format!("expected {} entries", cfg.n * cfg.n)));
            }
            cfg.recipe.a = Some(SymMatrix::from_row_major(cfg.n, &vals).map_err(|e| bad("recipe.a", &v, &e.to_string()))?);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str, a_text: &mut Option<String>) -> Result<()> {
        match key {
            "name" => self.name = v.into(),
            "n" => self.n = uint(key, v)?,
            "grid.points" => self.points = uint(key, v)?,
            "flavor" => self.flavor = Flavor::parse(v).ok_or_else(|| bad(key, v, "unknown flavor"))?,
            "recipe.kind" => self.recipe.kind = RecipeKind::parse(v).ok_or_else(|| bad(key, v, "unknown recipe kind"))?,
            "recipe.a" => *a_text = Some(v.into()),
            "recipe.region" => self.recipe.region = Region::parse(v).ok_or_else(|| bad(key, v, "unknown region"))?,
            "recipe.margin" => self.recipe.margin = real(key, v)?,
            "recipe.seed" => self.recipe.seed = uint(key, v)?,
            "recipe.max_rejects" => self.recipe.max_rejects = uint(key, v)?,
            "recipe.random.count" => self.recipe.random.count = uint(key, v)?,
            "recipe.random.amplitude" => self.recipe.random.amplitude = real(key, v)?,
            "recipe.random.max_wavenumber" => self.recipe.random.max_wavenumber = uint(key, v)?,
            "integrator.scheme" => self.integrator.scheme = Scheme::parse(v).ok_or_else(|| bad(key, v, "unknown scheme"))?,
            "integrator.cfl" => self.integrator.cfl = real(key, v)?,
            "integrator.max_steps" => self.integrator.max_steps = uint(key, v)?,
            "integrator.t_end" => self.integrator.t_end = real(key, v)?,
            "output.sample_every" => self.output.sample_every = uint(key, v)?,
            "output.csv_path" => self.output.csv_path = v.into(),
            "output.json_summary_path" => self.output.json_summary_path = v.into(),
            "output.snapshot_cadence" => self.output.snapshot_cadence = uint(key, v)?,
            "output.snapshot_dir" => self.output.snapshot_dir = v.into(),
            "tolerances.slack_mono" => self.tolerances.slack_mono = real(key, v)?,
            "tolerances.tol_growth" => {
                self.tolerances.tol_growth = if v == "auto" { None } else { Some(real(key, v)?) }
            }
            "tolerances.tol_a2" => self.tolerances.convergence.a2 = real(key, v)?,
            "tolerances.tol_hess" => self.tolerances.convergence.hess = real(key, v)?,
            "tolerances.tol_theta" => self.tolerances.convergence.theta = real(key, v)?,
            "tolerances.warn_margin" => self.tolerances.warn_margin = real(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        crate::field::Grid::new(self.n, self.points)?;
        self.recipe.validate(self.n)?;
        self.integrator.validate()?;
        if self.output.sample_every == 0 {
            return Err(Error::Config("output.sample_every must be >= 1".into()));
        }
        let t = &self.tolerances;
        if !(t.slack_mono >= 0.0 && t.tol_growth.is_none_or(|x| x >= 0.0) && t.warn_margin >= 0.0) {
            return Err(Error::Config("tolerances must be non-negative".into()));
        }
        Ok(())
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            integrator: self.integrator,
            flavor: self.flavor,
            sample_every: self.output.sample_every,
            snapshot_every: self.output.snapshot_cadence,
            convergence: self.tolerances.convergence,
            warn_margin: self.tolerances.warn_margin,
        }
    }

    pub fn growth_tol(&self) -> f64 {
        let h = std::f64::consts::TAU / self.points as f64;
        self.tolerances
            .tol_growth
            .unwrap_or_else(|| crate::monitors::default_growth_tol(h))
    }
}
