//! Global diagnostics per time sample and checks over a sampled series.
//!
//! Grid minima of `log det S^[2]`, `log *Ω` and `log det P^[2]` stand in for
//! minima over the evolving submanifold. Along the flow they must not
//! decrease, and at the argmin the forward rate of the two log-determinants
//! is bounded below by `2|A|²`.

use crate::field::{periodic_hessian, third_derivs_from, PotentialField};
use crate::flow::theta_field;
use crate::geometry::second_fundamental;
use crate::spectrum::{
    check_bounds, eigen_sym, lagrangian_angle, log_star_omega, BoundBudget, BoundReport, Flavor, PairMargins,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One time sample. Minima carry the row-major index of their first
/// occurrence.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub min_logdet_s2: f64,
    pub argmin_logdet_s2: usize,
    pub min_log_star_omega: f64,
    pub argmin_log_star_omega: usize,
    pub min_logdet_p2: f64,
    pub argmin_logdet_p2: usize,
    pub max_a2: f64,
    pub sum_sq_max: f64,
    pub min_pair_sum: f64,
    pub min_one_plus_prod: f64,
    pub min_one_minus_sqprod: f64,
    pub min_three_plus_twoprod: f64,
    pub theta_osc: f64,
    /// `‖D²v‖∞`: distance of the Hessian from the constant `A`.
    pub hess_sup: f64,
    pub angle_residual: f64,
    /// `|A|²` at the argmin of `log det S^[2]` / `log det P^[2]`.
    pub a2_at_argmin_s2: f64,
    pub a2_at_argmin_p2: f64,
    pub all_convex: bool,
    pub all_two_convex: bool,
    pub all_area_decreasing: bool,
    /// Eigenvalue bounds at every point with `δ₁ = −min log *Ω`,
    /// `δ₂ = −min log det S^[2]`; `None` for `n = 1` or outside the region.
    pub bounds: Option<BoundReport>,
}

/// Column order of the diagnostics CSV.
pub const CSV_COLUMNS: [&str; 13] = [
    "t",
    "min_logdet_s2",
    "min_log_star_omega",
    "min_logdet_p2",
    "max_a2",
    "sum_sq_max",
    "min_pair_sum",
    "min_one_plus_prod",
    "min_one_minus_sqprod",
    "min_three_plus_twoprod",
    "theta_osc",
    "hess_sup",
    "angle_residual",
];

impl DiagnosticsRow {
    pub fn csv_values(&self) -> [f64; 13] {
        [
            self.t,
            self.min_logdet_s2,
            self.min_log_star_omega,
            self.min_logdet_p2,
            self.max_a2,
            self.sum_sq_max,
            self.min_pair_sum,
            self.min_one_plus_prod,
            self.min_one_minus_sqprod,
            self.min_three_plus_twoprod,
            self.theta_osc,
            self.hess_sup,
            self.angle_residual,
        ]
    }

    pub fn value(&self, q: Quantity) -> f64 {
        match q {
            Quantity::LogdetS2 => self.min_logdet_s2,
            Quantity::LogStarOmega => self.min_log_star_omega,
            Quantity::LogdetP2 => self.min_logdet_p2,
        }
    }

    pub fn all_in_region(&self, flavor: Flavor) -> bool {
        match flavor {
            Flavor::TwoConvex => self.all_two_convex,
            Flavor::AreaDecreasing => self.all_area_decreasing,
        }
    }
}

struct PointDiag {
    lambdas: [f64; 4],
    theta: f64,
    logdet_s2: f64,
    log_star_omega: f64,
    logdet_p2: f64,
    a2: f64,
    margins: PairMargins,
    convex: bool,
    hess_sup: f64,
}

#[inline]
fn argmin_first(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (i, x) in values.enumerate() {
        if x < best.0 || i == 0 {
            best = (x, i);
        }
    }
    best
}

/// Global diagnostics of a field. `probe_dt` is the step used for the
/// angle-equation residual.
pub fn snapshot(field: &PotentialField, probe_dt: f64) -> DiagnosticsRow {
    let g = field.grid;
    let n = g.dim();
    let ph = periodic_hessian(&g, &field.v);
    let third = third_derivs_from(&g, &ph);
    let pts: Vec<PointDiag> = (0..g.len())
        .into_par_iter()
        .map(|idx| {
            let hess = field.a.add(&ph[idx]);
            let eig = eigen_sym(&hess).expect("finite field");
            let l = eig.values();
            let a2 = second_fundamental(&hess, &third[idx]).map(|s| s.norm_a2).unwrap_or(f64::NAN);
            PointDiag {
                lambdas: eig.values,
                theta: lagrangian_angle(l),
                logdet_s2: Flavor::TwoConvex.logdet(l).value(),
                log_star_omega: log_star_omega(l),
                logdet_p2: Flavor::AreaDecreasing.logdet(l).value(),
                a2,
                margins: PairMargins::of(l),
                convex: l.iter().all(|&x| x > 0.0),
                hess_sup: ph[idx].sup_norm(),
            }
        })
        .collect();

    let (min_s2, arg_s2) = argmin_first(pts.iter().map(|p| p.logdet_s2));
    let (min_om, arg_om) = argmin_first(pts.iter().map(|p| p.log_star_omega));
    let (min_p2, arg_p2) = argmin_first(pts.iter().map(|p| p.logdet_p2));
    let fold_min = |f: &dyn Fn(&PointDiag) -> f64| pts.iter().map(f).fold(f64::INFINITY, f64::min);
    let fold_max = |f: &dyn Fn(&PointDiag) -> f64| pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let theta_max = fold_max(&|p| p.theta);
    let theta_min = fold_min(&|p| p.theta);

    let bounds = if n >= 2 && min_s2.is_finite() {
        BoundBudget::new(-min_om, -min_s2).ok().map(|budget| {
            pts.iter()
                .map(|p| check_bounds(&p.lambdas[..n], &budget).expect("n >= 2"))
                .reduce(BoundReport::worst)
                .expect("non-empty grid")
        })
    } else {
        None
    };

    DiagnosticsRow {
        t: field.t,
        min_logdet_s2: min_s2,
        argmin_logdet_s2: arg_s2,
        min_log_star_omega: min_om,
        argmin_log_star_omega: arg_om,
        min_logdet_p2: min_p2,
        argmin_logdet_p2: arg_p2,
        max_a2: fold_max(&|p| p.a2),
        sum_sq_max: fold_max(&|p| p.margins.sum_sq),
        min_pair_sum: fold_min(&|p| p.margins.min_pair_sum),
        min_one_plus_prod: fold_min(&|p| p.margins.min_one_plus_prod),
        min_one_minus_sqprod: fold_min(&|p| p.margins.min_one_minus_sqprod),
        min_three_plus_twoprod: fold_min(&|p| p.margins.min_three_plus_twoprod),
        theta_osc: theta_max - theta_min,
        hess_sup: fold_max(&|p| p.hess_sup),
        angle_residual: angle_residual(field, probe_dt),
        a2_at_argmin_s2: pts[arg_s2].a2,
        a2_at_argmin_p2: pts[arg_p2].a2,
        all_convex: pts.iter().all(|p| p.convex),
        all_two_convex: pts.iter().all(|p| p.margins.two_convex_margin() > 0.0),
        all_area_decreasing: pts.iter().all(|p| p.margins.area_decreasing_margin() > 0.0),
        bounds,
    }
}

/// `‖(θ(t+dt) − θ(t))/dt − g^{ij}∂ᵢ∂ⱼθ‖∞`, where `θ(t+dt)` comes from one
/// forward-Euler step of size `dt` and `∂ᵢ∂ⱼθ` uses the same stencils as
/// the Hessian.
pub fn angle_residual(field: &PotentialField, dt: f64) -> f64 {
    if !(dt > 0.0) {
        return 0.0;
    }
    let g = field.grid;
    let n = g.dim();
    let theta0 = theta_field(field);
    let mean = crate::field::mean(&theta0);
    let mut next = field.clone();
    for (x, th) in next.v.iter_mut().zip(&theta0) {
        *x += dt * (th - mean);
    }
    let theta1 = theta_field(&next);
    let d2theta = periodic_hessian(&g, &theta0);
    (0..g.len())
        .into_par_iter()
        .map(|idx| {
            let hess = field.a.add(&crate::field::periodic_hessian_at(&g, &field.v, idx));
            let gi = crate::geometry::inverse_metric(&hess).expect("finite field");
            let mut lin = 0.0;
            for i in 0..n {
                for j in 0..n {
                    lin += gi.get(i, j) * d2theta[idx].get(i, j);
                }
            }
            ((theta1[idx] - theta0[idx]) / dt - lin).abs()
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    LogdetS2,
    LogStarOmega,
    LogdetP2,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::LogdetS2 => "min_logdet_s2",
            Quantity::LogStarOmega => "min_log_star_omega",
            Quantity::LogdetP2 => "min_logdet_p2",
        }
    }

    /// The log-determinant tracked by a flavor.
    pub fn for_flavor(flavor: Flavor) -> Self {
        match flavor {
            Flavor::TwoConvex => Quantity::LogdetS2,
            Flavor::AreaDecreasing => Quantity::LogdetP2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityReport {
    pub quantity: Quantity,
    /// `(t, drop)` for every decrease larger than `slack`.
    pub violations: Vec<(f64, f64)>,
    pub worst_drop: f64,
    pub slack: f64,
    pub passed: bool,
}

pub const DEFAULT_MONOTONE_SLACK: f64 = 1e-7;

/// Flags every sample-to-sample decrease of the tracked minimum beyond
/// `slack`. A step from a finite value to the `-inf` sentinel is an
/// infinite drop.
pub fn check_monotone(rows: &[DiagnosticsRow], quantity: Quantity, slack: f64) -> MonotonicityReport {
    let mut violations = Vec::new();
    let mut worst = 0.0f64;
    for w in rows.windows(2) {
        let (a, b) = (w[0].value(quantity), w[1].value(quantity));
        let drop = if a == f64::NEG_INFINITY {
            0.0
        } else if b == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            a - b
        };
        worst = worst.max(drop);
        if drop > slack {
            violations.push((w[1].t, drop));
        }
    }
    MonotonicityReport {
        quantity,
        violations,
        worst_drop: worst,
        slack,
        passed: worst <= slack,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthReport {
    pub quantity: Quantity,
    /// `(t, deficit)` where `rate − 2|A|²(argmin)` fell below `−tol`.
    pub violations: Vec<(f64, f64)>,
    /// Smallest `rate − 2|A|²(argmin)` seen; `+inf` with fewer than two rows.
    pub worst_margin: f64,
    pub tol: f64,
    pub passed: bool,
}

/// `1e-4 + 10h²`.
pub fn default_growth_tol(h: f64) -> f64 {
    1e-4 + 10.0 * h * h
}

/// Checks `(min(t+Δ) − min(t))/Δ ≥ 2|A|²(argmin at t) − tol` for every
/// consecutive pair of rows.
pub fn check_growth_bound(rows: &[DiagnosticsRow], quantity: Quantity, tol: f64) -> GrowthReport {
    assert!(
        matches!(quantity, Quantity::LogdetS2 | Quantity::LogdetP2),
        "growth bound applies to the log-determinants"
    );
    let mut violations = Vec::new();
    let mut worst = f64::INFINITY;
    for w in rows.windows(2) {
        let dt = w[1].t - w[0].t;
        let (a, b) = (w[0].value(quantity), w[1].value(quantity));
        let a2 = match quantity {
            Quantity::LogdetS2 => w[0].a2_at_argmin_s2,
            _ => w[0].a2_at_argmin_p2,
        };
        let margin = if a.is_finite() && b.is_finite() {
            (b - a) / dt - 2.0 * a2
        } else if b == f64::NEG_INFINITY && a.is_finite() {
            f64::NEG_INFINITY
        } else {
            continue;
        };
        worst = worst.min(margin);
        if margin < -tol {
            violations.push((w[0].t, margin));
        }
    }
    GrowthReport {
        quantity,
        violations,
        worst_margin: worst,
        tol,
        passed: worst >= -tol,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTolerances {
    pub a2: f64,
    pub hess: f64,
    pub theta: f64,
}

impl Default for ConvergenceTolerances {
    fn default() -> Self {
        ConvergenceTolerances {
            a2: 1e-8,
            hess: 1e-4,
            theta: 1e-6,
        }
    }
}

pub fn check_convergence(row: &DiagnosticsRow, tol: &ConvergenceTolerances) -> bool {
    row.max_a2 < tol.a2 && row.hess_sup < tol.hess && row.theta_osc < tol.theta
}

/// Every row satisfies the flavor's region predicate at every grid point.
pub fn region_preserved(rows: &[DiagnosticsRow], flavor: Flavor) -> bool {
    rows.iter().all(|r| r.all_in_region(flavor))
}

/// Every row's bound chain passed with non-negative slack.
pub fn bound_chain_holds(rows: &[DiagnosticsRow]) -> bool {
    rows.iter().all(|r| r.bounds.is_some_and(|b| b.all_passed()))
}
