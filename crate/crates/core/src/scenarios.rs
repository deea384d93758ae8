//! Deterministic initial data and named presets.
//!
//! The periodic part is a finite sum of cosine modes
//! `v(x) = Σ c·cos(k·x + φ)`. With a region requested, every grid point must
//! satisfy the region predicate with the requested margin; otherwise all
//! amplitudes are scaled by 0.8 and the field is rebuilt.

use crate::field::{periodic_hessian, Grid, PotentialField};
use crate::rng::SplitMix64;
use crate::spectrum::{classify, eigenvalues_sym, Flavor, SymMatrix};
use crate::{Error, Result};
use std::f64::consts::TAU;

const REJECT_SCALE: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecipeKind {
    Zero,
    Quadratic,
    Modes,
    RandomRegion,
}

impl RecipeKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "zero" => RecipeKind::Zero,
            "quadratic" => RecipeKind::Quadratic,
            "modes" => RecipeKind::Modes,
            "random_region" => RecipeKind::RandomRegion,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            RecipeKind::Zero => "zero",
            RecipeKind::Quadratic => "quadratic",
            RecipeKind::Modes => "modes",
            RecipeKind::RandomRegion => "random_region",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    TwoConvex,
    AreaDecreasing,
    None,
}

impl Region {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "two_convex" => Region::TwoConvex,
            "area_decreasing" => Region::AreaDecreasing,
            "none" => Region::None,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::TwoConvex => "two_convex",
            Region::AreaDecreasing => "area_decreasing",
            Region::None => "none",
        }
    }

    fn flavor(self) -> Option<Flavor> {
        match self {
            Region::TwoConvex => Some(Flavor::TwoConvex),
            Region::AreaDecreasing => Some(Flavor::AreaDecreasing),
            Region::None => None,
        }
    }
}

/// `amplitude · cos(k·x + phase)`
#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    pub k: Vec<i64>,
    pub amplitude: f64,
    pub phase: f64,
}

/// How `random_region` draws its modes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomModes {
    pub count: usize,
    /// Amplitudes are uniform in `[0, amplitude)`.
    pub amplitude: f64,
    /// Wavevector components are uniform in `[−max_wavenumber, max_wavenumber]`.
    pub max_wavenumber: i64,
}

impl Default for RandomModes {
    fn default() -> Self {
        RandomModes {
            count: 3,
            amplitude: 0.3,
            max_wavenumber: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recipe {
    pub kind: RecipeKind,
    /// Quadratic part; `None` means zero.
    pub a: Option<SymMatrix>,
    pub modes: Vec<Mode>,
    pub region: Region,
    pub margin: f64,
    pub seed: u64,
    pub max_rejects: usize,
    pub random: RandomModes,
}

impl Default for Recipe {
    fn default() -> Self {
        Recipe {
            kind: RecipeKind::Zero,
            a: None,
            modes: Vec::new(),
            region: Region::None,
            margin: 0.1,
            seed: 0,
            max_rejects: 10_000,
            random: RandomModes::default(),
        }
    }
}

impl Recipe {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::Config(format!("margin = {} must be > 0", self.margin)));
        }
        if let Some(a) = &self.a {
            if a.dim() != n {
                return Err(Error::Config(format!("A is {0}x{0}, expected {n}x{n}", a.dim())));
            }
        }
        for m in &self.modes {
            if m.k.len() != n {
                return Err(Error::Config(format!("mode wavevector {:?} has wrong length for n = {n}", m.k)));
            }
            if !(m.amplitude.is_finite() && m.phase.is_finite()) {
                return Err(Error::Config("mode amplitude and phase must be finite".into()));
            }
        }
        if self.kind == RecipeKind::RandomRegion
            && !(self.random.amplitude.is_finite() && self.random.amplitude >= 0.0 && self.random.max_wavenumber >= 1)
        {
            return Err(Error::Config("random mode parameters invalid".into()));
        }
        Ok(())
    }

    /// The modes the recipe evaluates, before any rescaling.
    pub fn resolved_modes(&self, n: usize) -> Vec<Mode> {
        match self.kind {
            RecipeKind::Zero | RecipeKind::Quadratic => Vec::new(),
            RecipeKind::Modes => self.modes.clone(),
            RecipeKind::RandomRegion => {
                let mut rng = SplitMix64::new(self.seed);
                let kmax = self.random.max_wavenumber;
                let mut out = Vec::with_capacity(self.random.count + self.modes.len());
                for _ in 0..self.random.count {
                    let k = loop {
                        let k: Vec<i64> = (0..n).map(|_| rng.int_in(-kmax, kmax)).collect();
                        if k.iter().any(|&c| c != 0) {
                            break k;
                        }
                    };
                    let amplitude = rng.uniform(0.0, self.random.amplitude);
                    let phase = rng.uniform(0.0, TAU);
                    out.push(Mode { k, amplitude, phase });
                }
                out.extend(self.modes.iter().cloned());
                out
            }
        }
    }
}

/// Evaluates `Σ scale·c·cos(k·x + φ)` on the grid. The angle `k·x` is
/// reduced exactly on the integer lattice before scaling by `2π/N`.
pub fn evaluate_modes(grid: &Grid, modes: &[Mode], scale: f64) -> Vec<f64> {
    let n = grid.dim();
    let np = grid.points() as i64;
    (0..grid.len())
        .map(|idx| {
            let mi = grid.multi_index(idx);
            modes
                .iter()
                .map(|m| {
                    let lattice: i64 = (0..n).map(|d| m.k[d] * mi[d] as i64).sum::<i64>().rem_euclid(np);
                    let angle = TAU * lattice as f64 / np as f64 + m.phase;
                    scale * m.amplitude * angle.cos()
                })
                .sum()
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub field: PotentialField,
    pub rejects: usize,
    /// Final amplitude factor, `0.8^rejects`.
    pub scale: f64,
}

/// Smallest region margin of a field over all grid points.
pub fn field_margin(field: &PotentialField, flavor: Flavor) -> f64 {
    let n = field.grid.dim();
    periodic_hessian(&field.grid, &field.v)
        .iter()
        .map(|h| {
            let l = eigenvalues_sym(&field.a.add(h));
            flavor.margin(&classify(&l[..n]).margins)
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn generate_detailed(recipe: &Recipe, n: usize, points: usize) -> Result<Generated> {
    let grid = Grid::new(n, points)?;
    recipe.validate(n)?;
    let a = recipe.a.unwrap_or_else(|| SymMatrix::zeros(n));
    let modes = recipe.resolved_modes(n);
    let mut scale = 1.0;
    let mut rejects = 0;
    loop {
        let v = evaluate_modes(&grid, &modes, scale);
        let field = PotentialField::new(grid, a, v)?;
        let Some(flavor) = recipe.region.flavor() else {
            return Ok(Generated { field, rejects, scale });
        };
        let margin = field_margin(&field, flavor);
        if margin >= recipe.margin {
            return Ok(Generated { field, rejects, scale });
        }
        let exhausted = modes.iter().all(|m| scale * m.amplitude == 0.0);
        if rejects >= recipe.max_rejects || exhausted {
            return Err(Error::GenerationFailed {
                rejects,
                reason: format!(
                    "{} margin {margin:.3e} below requested {:.3e}",
                    recipe.region.name(),
                    recipe.margin
                ),
            });
        }
        rejects += 1;
        scale *= REJECT_SCALE;
    }
}

pub fn generate(recipe: &Recipe, n: usize, points: usize) -> Result<PotentialField> {
    generate_detailed(recipe, n, points).map(|g| g.field)
}

/// A named experiment: grid, recipe and the flavor it is meant to exercise.
#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub n: usize,
    pub points: usize,
    pub recipe: Recipe,
    pub flavor: Flavor,
    pub t_end: f64,
}

pub const PRESET_NAMES: [&str; 6] = ["zero", "quad-identity", "tc-small", "tc-aniso", "ad-small", "heat-1d"];

pub fn list_presets() -> Vec<&'static str> {
    PRESET_NAMES.to_vec()
}

fn mode(k: &[i64], amplitude: f64) -> Mode {
    Mode {
        k: k.to_vec(),
        amplitude,
        phase: 0.0,
    }
}

pub fn preset(name: &str) -> Option<Preset> {
    let base = Recipe::default();
    let p = match name {
        "zero" => Preset {
            name: "zero",
            n: 2,
            points: 32,
            recipe: base,
            flavor: Flavor::AreaDecreasing,
            t_end: 1.0,
        },
        "quad-identity" => Preset {
            name: "quad-identity",
            n: 2,
            points: 32,
            recipe: Recipe {
                kind: RecipeKind::Quadratic,
                a: Some(SymMatrix::identity(2)),
                ..base
            },
            flavor: Flavor::TwoConvex,
            t_end: 1.0,
        },
        "tc-small" => Preset {
            name: "tc-small",
            n: 2,
            points: 64,
            recipe: Recipe {
                kind: RecipeKind::Modes,
                a: Some(SymMatrix::identity(2)),
                modes: vec![mode(&[1, 0], 0.2)],
                region: Region::TwoConvex,
                margin: 0.1,
                ..base
            },
            flavor: Flavor::TwoConvex,
            t_end: 50.0,
        },
        "tc-aniso" => Preset {
            name: "tc-aniso",
            n: 2,
            points: 64,
            recipe: Recipe {
                kind: RecipeKind::Modes,
                a: Some(SymMatrix::from_diag(&[2.0, -0.3])),
                modes: vec![mode(&[0, 1], 0.08), mode(&[1, 1], 0.03)],
                region: Region::TwoConvex,
                margin: 0.05,
                ..base
            },
            flavor: Flavor::TwoConvex,
            t_end: 50.0,
        },
        "ad-small" => Preset {
            name: "ad-small",
            n: 2,
            points: 32,
            recipe: Recipe {
                kind: RecipeKind::Modes,
                modes: vec![mode(&[1, 0], 0.3), mode(&[0, 1], 0.3)],
                region: Region::AreaDecreasing,
                margin: 0.5,
                ..base
            },
            flavor: Flavor::AreaDecreasing,
            t_end: 50.0,
        },
        "heat-1d" => Preset {
            name: "heat-1d",
            n: 1,
            points: 64,
            recipe: Recipe {
                kind: RecipeKind::Modes,
                modes: vec![mode(&[1], 1e-3)],
                ..base
            },
            flavor: Flavor::TwoConvex,
            t_end: 1.0,
        },
        _ => return None,
    };
    Some(p)
}

impl Preset {
    pub fn generate(&self) -> Result<PotentialField> {
        generate(&self.recipe, self.n, self.points)
    }
}
