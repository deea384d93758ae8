//! Pointwise algebra on Hessian eigenvalue tuples.
//!
//! Everything here is a pure function of the sorted eigenvalues `λ` of
//! `D²u` at one point: the Lagrangian angle, the graphical volume ratio
//! `*Ω`, the two log-determinants that track two-convexity and the
//! area-decreasing condition, region predicates with their margins, the
//! Lewy rotation, and the quantitative eigenvalue bounds implied by lower
//! bounds on `log *Ω` and `log det S^[2]`.

mod eigen;

pub use eigen::{eigen_sym, eigenvalues_sym, SymEigen, SymMatrix, MAX_DIM};

use crate::{Error, Result};
use std::f64::consts::{FRAC_PI_2, PI};

/// Result of a log-determinant that may leave its region.
///
/// `Exterior` is the boundary/exterior sentinel; its numeric encoding is
/// `-inf` so it can be written to diagnostics tables as is.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RegionLog {
    Inside(f64),
    Exterior,
}

impl RegionLog {
    pub fn value(self) -> f64 {
        match self {
            RegionLog::Inside(x) => x,
            RegionLog::Exterior => f64::NEG_INFINITY,
        }
    }

    pub fn is_exterior(self) -> bool {
        matches!(self, RegionLog::Exterior)
    }
}

/// `θ = Σ arctan λᵢ`.
pub fn lagrangian_angle(lambdas: &[f64]) -> f64 {
    lambdas.iter().map(|l| l.atan()).sum()
}

/// `*Ω = 1/√∏(1+λᵢ²)`.
pub fn star_omega(lambdas: &[f64]) -> f64 {
    log_star_omega(lambdas).exp()
}

/// `log *Ω = −½ Σ log(1+λᵢ²)`, computed without forming the product.
pub fn log_star_omega(lambdas: &[f64]) -> f64 {
    -0.5 * lambdas.iter().map(|l| (l * l).ln_1p()).sum::<f64>()
}

/// One pair term of `log det S^[2]`:
/// `log[(λᵢ+λⱼ)(1+λᵢλⱼ)/((1+λᵢ²)(1+λⱼ²))]`, or `None` when the factor is ≤ 0.
#[inline]
fn s2_pair_log(a: f64, b: f64) -> Option<f64> {
    // both factors must be positive; their product alone misses the case
    // where both are negative
    let (sum, prod) = (a + b, 1.0 + a * b);
    if !(sum > 0.0 && prod > 0.0) {
        return None;
    }
    let num = sum * prod;
    // 1 − (Sᵢᵢ + Sⱼⱼ) = (1−a)²/(2(1+a²)) + (1−b)²/(2(1+b²)) ≥ 0
    let gap = 0.5 * ((1.0 - a).powi(2) / (1.0 + a * a) + (1.0 - b).powi(2) / (1.0 + b * b));
    Some(if gap < 0.5 {
        (-gap).ln_1p()
    } else {
        (num.ln() - (a * a).ln_1p() - (b * b).ln_1p()).min(0.0)
    })
}

/// One pair term of `log det P^[2]`: `log[(1−λᵢ²λⱼ²)/((1+λᵢ²)(1+λⱼ²))]`.
#[inline]
fn p2_pair_log(a: f64, b: f64) -> Option<f64> {
    let ab = (a * b).abs();
    let num = (1.0 - ab) * (1.0 + ab);
    if !(num > 0.0) {
        return None;
    }
    let den = (1.0 + a * a) * (1.0 + b * b);
    // den − num = a² + b² + 2a²b² ≥ 0
    let gap = (a * a + b * b + 2.0 * ab * ab) / den;
    Some(if gap < 0.5 {
        (-gap).ln_1p()
    } else {
        ((1.0 - ab).ln() + ab.ln_1p() - (a * a).ln_1p() - (b * b).ln_1p()).min(0.0)
    })
}

fn pair_sum_log(lambdas: &[f64], term: impl Fn(f64, f64) -> Option<f64>) -> Result<RegionLog> {
    let n = lambdas.len();
    if n < 2 {
        return Err(Error::UndefinedForDimension(n));
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            match term(lambdas[i], lambdas[j]) {
                Some(x) => total += x,
                None => return Ok(RegionLog::Exterior),
            }
        }
    }
    Ok(RegionLog::Inside(total))
}

/// `log det S^[2] = log ∏_{i<j} (λᵢ+λⱼ)(1+λᵢλⱼ)/((1+λᵢ²)(1+λⱼ²))`.
pub fn logdet_s2(lambdas: &[f64]) -> Result<RegionLog> {
    pair_sum_log(lambdas, s2_pair_log)
}

/// `log det P^[2] = log ∏_{i<j} (1−λᵢ²λⱼ²)/((1+λᵢ²)(1+λⱼ²))`.
pub fn logdet_p2(lambdas: &[f64]) -> Result<RegionLog> {
    pair_sum_log(lambdas, p2_pair_log)
}

/// Pairwise minima over `i < j`. For `n = 1` the pair set is empty and every
/// minimum is `+inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairMargins {
    pub min_pair_sum: f64,
    pub min_one_plus_prod: f64,
    pub min_one_minus_sqprod: f64,
    pub min_three_plus_twoprod: f64,
    pub sum_sq: f64,
}

impl PairMargins {
    pub fn of(lambdas: &[f64]) -> Self {
        let mut m = PairMargins {
            min_pair_sum: f64::INFINITY,
            min_one_plus_prod: f64::INFINITY,
            min_one_minus_sqprod: f64::INFINITY,
            min_three_plus_twoprod: f64::INFINITY,
            sum_sq: lambdas.iter().map(|l| l * l).sum(),
        };
        let n = lambdas.len();
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (lambdas[i], lambdas[j]);
                let p = a * b;
                m.min_pair_sum = m.min_pair_sum.min(a + b);
                m.min_one_plus_prod = m.min_one_plus_prod.min(1.0 + p);
                m.min_one_minus_sqprod = m.min_one_minus_sqprod.min((1.0 - p.abs()) * (1.0 + p.abs()));
                m.min_three_plus_twoprod = m.min_three_plus_twoprod.min(3.0 + 2.0 * p);
            }
        }
        m
    }

    /// Distance-like margin of the two-convex region (positive inside).
    pub fn two_convex_margin(&self) -> f64 {
        self.min_pair_sum.min(self.min_one_plus_prod)
    }

    /// Margin of the area-decreasing region (positive inside).
    pub fn area_decreasing_margin(&self) -> f64 {
        self.min_one_minus_sqprod
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegionFlags {
    pub convex: bool,
    pub two_convex: bool,
    pub area_decreasing: bool,
    /// Set for `n = 1`, where the pair conditions hold vacuously.
    pub vacuous: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Classification {
    pub flags: RegionFlags,
    pub margins: PairMargins,
}

pub fn classify(lambdas: &[f64]) -> Classification {
    let margins = PairMargins::of(lambdas);
    let flags = RegionFlags {
        convex: lambdas.iter().all(|&l| l > 0.0),
        two_convex: margins.min_pair_sum > 0.0 && margins.min_one_plus_prod > 0.0,
        area_decreasing: margins.min_one_minus_sqprod > 0.0,
        vacuous: lambdas.len() < 2,
    };
    Classification { flags, margins }
}

/// Which of the two preserved regions a run tracks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavor {
    TwoConvex,
    AreaDecreasing,
}

impl Flavor {
    pub fn name(self) -> &'static str {
        match self {
            Flavor::TwoConvex => "two_convex",
            Flavor::AreaDecreasing => "area_decreasing",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "two_convex" => Some(Flavor::TwoConvex),
            "area_decreasing" => Some(Flavor::AreaDecreasing),
            _ => None,
        }
    }

    /// The region's log-determinant; `n = 1` gives the empty product `0`.
    pub fn logdet(self, lambdas: &[f64]) -> RegionLog {
        if lambdas.len() < 2 {
            return RegionLog::Inside(0.0);
        }
        let r = match self {
            Flavor::TwoConvex => logdet_s2(lambdas),
            Flavor::AreaDecreasing => logdet_p2(lambdas),
        };
        r.expect("n >= 2")
    }

    /// True exactly when [`Flavor::logdet`] would return the exterior sentinel.
    #[inline]
    pub fn is_exterior(self, lambdas: &[f64]) -> bool {
        let n = lambdas.len();
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (lambdas[i], lambdas[j]);
                let inside = match self {
                    Flavor::TwoConvex => a + b > 0.0 && 1.0 + a * b > 0.0,
                    Flavor::AreaDecreasing => {
                        let ab = (a * b).abs();
                        (1.0 - ab) * (1.0 + ab) > 0.0
                    }
                };
                if !inside {
                    return true;
                }
            }
        }
        false
    }

    pub fn margin(self, m: &PairMargins) -> f64 {
        match self {
            Flavor::TwoConvex => m.two_convex_margin(),
            Flavor::AreaDecreasing => m.area_decreasing_margin(),
        }
    }
}

/// Full per-point spectral summary.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSpectrum {
    pub lambdas: Vec<f64>,
    pub theta: f64,
    pub star_omega: f64,
    pub logdet_s2: RegionLog,
    pub logdet_p2: RegionLog,
    pub flags: RegionFlags,
    pub margins: PairMargins,
}

impl PointSpectrum {
    pub fn from_lambdas(lambdas: &[f64]) -> Self {
        let c = classify(lambdas);
        let pair = |f: fn(&[f64]) -> Result<RegionLog>| {
            if lambdas.len() < 2 {
                RegionLog::Inside(0.0)
            } else {
                f(lambdas).expect("n >= 2")
            }
        };
        PointSpectrum {
            lambdas: lambdas.to_vec(),
            theta: lagrangian_angle(lambdas),
            star_omega: star_omega(lambdas),
            logdet_s2: pair(logdet_s2),
            logdet_p2: pair(logdet_p2),
            flags: c.flags,
            margins: c.margins,
        }
    }

    pub fn from_matrix(m: &SymMatrix) -> Result<Self> {
        let e = eigen_sym(m)?;
        Ok(Self::from_lambdas(e.values()))
    }
}

/// Rotates every complex factor by `−phi`: `λ'ᵢ = tan(arctan λᵢ − phi)`.
///
/// Computed in angle space, so `λ = −1` is not a special case.
pub fn lewy_rotate(lambdas: &[f64], phi: f64) -> Result<Vec<f64>> {
    lambdas
        .iter()
        .map(|&l| {
            let a = l.atan() - phi;
            // distance to the nearest pole π/2 + kπ
            let r = (a - FRAC_PI_2).rem_euclid(PI);
            if r.min(PI - r) <= 1e-12 {
                Err(Error::PoleError { lambda: l })
            } else {
                Ok(a.tan())
            }
        })
        .collect()
}

/// Lower bounds `log *Ω ≥ −δ₁` and `log det S^[2] ≥ −δ₂`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundBudget {
    pub delta1: f64,
    pub delta2: f64,
}

impl BoundBudget {
    pub fn new(delta1: f64, delta2: f64) -> Result<Self> {
        if !(delta1.is_finite() && delta2.is_finite() && delta1 >= 0.0 && delta2 >= 0.0) {
            return Err(Error::Config(format!(
                "bound budget must be finite and non-negative, got ({delta1}, {delta2})"
            )));
        }
        Ok(BoundBudget { delta1, delta2 })
    }

    /// `e^{2δ₁} − 1`, the cap on `Σλᵢ²`.
    pub fn sum_sq_cap(&self) -> f64 {
        (2.0 * self.delta1).exp_m1()
    }

    /// Floor for `(λᵢ+λⱼ)(1+λᵢλⱼ)`.
    pub fn pair_product_floor(&self) -> f64 {
        (-self.delta2).exp()
    }

    /// Floor for `1+λᵢλⱼ`: `e^{−δ₂}/√(2(e^{2δ₁}−1))`.
    pub fn one_plus_prod_floor(&self) -> f64 {
        self.pair_product_floor() / (2.0 * self.sum_sq_cap()).sqrt()
    }

    /// Floor for `λᵢ+λⱼ`: `2e^{−δ₂}/(e^{2δ₁}+1)`.
    pub fn pair_sum_floor(&self) -> f64 {
        2.0 * self.pair_product_floor() / ((2.0 * self.delta1).exp() + 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    pub passed: bool,
    /// Worst (smallest) slack; negative when violated.
    pub slack: f64,
}

impl BoundCheck {
    fn from_slack(slack: f64) -> Self {
        BoundCheck {
            passed: slack >= 0.0,
            slack,
        }
    }

    /// Combines two checks keeping the worse slack.
    pub fn worst(self, other: BoundCheck) -> BoundCheck {
        BoundCheck::from_slack(self.slack.min(other.slack))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundReport {
    /// `Σλᵢ² ≤ e^{2δ₁} − 1`
    pub sum_sq: BoundCheck,
    /// `(λᵢ+λⱼ)(1+λᵢλⱼ) ≥ e^{−δ₂}`
    pub pair_product: BoundCheck,
    /// Both separate floors on `1+λᵢλⱼ` and `λᵢ+λⱼ`.
    pub separate: BoundCheck,
}

impl BoundReport {
    pub fn all_passed(&self) -> bool {
        self.sum_sq.passed && self.pair_product.passed && self.separate.passed
    }

    pub fn worst(self, other: BoundReport) -> BoundReport {
        BoundReport {
            sum_sq: self.sum_sq.worst(other.sum_sq),
            pair_product: self.pair_product.worst(other.pair_product),
            separate: self.separate.worst(other.separate),
        }
    }
}

pub fn check_bounds(lambdas: &[f64], budget: &BoundBudget) -> Result<BoundReport> {
    let n = lambdas.len();
    if n < 2 {
        return Err(Error::UndefinedForDimension(n));
    }
    let sum_sq: f64 = lambdas.iter().map(|l| l * l).sum();
    let cap = budget.sum_sq_cap();
    let prod_floor = budget.pair_product_floor();
    let opp_floor = budget.one_plus_prod_floor();
    let sum_floor = budget.pair_sum_floor();
    let mut prod_slack = f64::INFINITY;
    let mut sep_slack = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (lambdas[i], lambdas[j]);
            prod_slack = prod_slack.min((a + b) * (1.0 + a * b) - prod_floor);
            sep_slack = sep_slack.min((1.0 + a * b) - opp_floor).min((a + b) - sum_floor);
        }
    }
    Ok(BoundReport {
        sum_sq: BoundCheck::from_slack(cap - sum_sq),
        pair_product: BoundCheck::from_slack(prod_slack),
        separate: BoundCheck::from_slack(sep_slack),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn angle_examples() {
        assert_eq!(lagrangian_angle(&[0.0, 0.0, 0.0]), 0.0);
        assert!(close(lagrangian_angle(&[1.0, 1.0]), PI / 2.0, 1e-15));
        let s3 = 3f64.sqrt();
        assert!(close(lagrangian_angle(&[s3, -1.0 / s3]), PI / 6.0, 1e-15));
    }

    #[test]
    fn both_pair_factors_negative_is_exterior() {
        // (λ₁+λ₂)(1+λ₁λ₂) > 0 here, yet the pair is not two-convex
        let l = [3.157757864525446, -7.534955146901273];
        assert!(!classify(&l).flags.two_convex);
        assert!(logdet_s2(&l).unwrap().is_exterior());
        assert!(Flavor::TwoConvex.is_exterior(&l));
    }

    #[test]
    fn star_omega_examples() {
        assert_eq!(star_omega(&[0.0, 0.0]), 1.0);
        assert!(close(star_omega(&[1.0, 1.0]), 0.5, 1e-15));
        // 1/sqrt(5 * 1.09) = 0.42835...
        let expected = 1.0 / (5.0f64 * 1.09).sqrt();
        assert!(close(star_omega(&[2.0, -0.3]), expected, 1e-15));
        assert!(close(expected, 0.428_353, 1e-6));
    }

    #[test]
    fn logdet_s2_examples() {
        assert_eq!(logdet_s2(&[1.0, 1.0]).unwrap(), RegionLog::Inside(0.0));
        let v = logdet_s2(&[0.0, 1.0]).unwrap().value();
        assert!(close(v, 0.5f64.ln(), 1e-15));
        assert!(close(v, -0.693_147, 1e-6));
        assert!(logdet_s2(&[-0.5, 0.4]).unwrap().is_exterior());
        assert_eq!(logdet_s2(&[-0.5, 0.4]).unwrap().value(), f64::NEG_INFINITY);
        assert_eq!(logdet_s2(&[1.0]), Err(Error::UndefinedForDimension(1)));
    }

    #[test]
    fn logdet_p2_examples() {
        assert_eq!(logdet_p2(&[0.0, 0.0]).unwrap(), RegionLog::Inside(0.0));
        let v = logdet_p2(&[0.5, -0.5]).unwrap().value();
        assert!(close(v, 0.6f64.ln(), 1e-15));
        assert!(close(v, -0.510_826, 1e-6));
        assert!(logdet_p2(&[1.0, 1.0]).unwrap().is_exterior());
        assert_eq!(logdet_p2(&[0.2]), Err(Error::UndefinedForDimension(1)));
    }

    #[test]
    fn classify_examples() {
        let c = classify(&[1.0, 1.0, 1.0]);
        assert!(c.flags.convex && c.flags.two_convex && !c.flags.area_decreasing);
        let c = classify(&[2.0, -0.3]);
        assert!(!c.flags.convex && c.flags.two_convex && c.flags.area_decreasing);
        assert!(close(c.margins.min_pair_sum, 1.7, 1e-15));
        assert!(close(c.margins.min_one_plus_prod, 0.4, 1e-15));
        let c = classify(&[2.0, 0.6, 0.4]);
        assert!(c.flags.convex && !c.flags.area_decreasing);
        let c = classify(&[0.7]);
        assert!(c.flags.vacuous && c.flags.two_convex && c.flags.area_decreasing);
        assert_eq!(c.margins.min_pair_sum, f64::INFINITY);
        assert_eq!(c.margins.min_three_plus_twoprod, f64::INFINITY);
    }

    #[test]
    fn lewy_examples() {
        let r = lewy_rotate(&[1.0, 1.0], FRAC_PI_4).unwrap();
        assert!(r.iter().all(|x| x.abs() < 1e-15));
        let r = lewy_rotate(&[3f64.sqrt()], FRAC_PI_4).unwrap();
        assert!(close(r[0], 2.0 - 3f64.sqrt(), 1e-15));
        let r = lewy_rotate(&[0.0], FRAC_PI_4).unwrap();
        assert!(close(r[0], -1.0, 1e-15));
    }

    #[test]
    fn lewy_pole_detected() {
        // arctan(−1) − π/4 = −π/2
        assert!(matches!(lewy_rotate(&[-1.0], FRAC_PI_4), Err(Error::PoleError { .. })));
    }

    #[test]
    fn lewy_agrees_with_rational_form() {
        let mut rng = SplitMix64::new(11);
        for _ in 0..1000 {
            let l = rng.uniform(-20.0, 20.0);
            if (l + 1.0).abs() < 1e-3 {
                continue;
            }
            let angle = lewy_rotate(&[l], FRAC_PI_4).unwrap()[0];
            let rational = (l - 1.0) / (1.0 + l);
            assert!((angle - rational).abs() <= 1e-11 * (1.0 + rational.abs()), "{l}");
        }
    }

    #[test]
    fn bounds_examples() {
        let b = BoundBudget::new(2f64.ln(), 0.1).unwrap();
        let r = check_bounds(&[1.0, 1.0], &b).unwrap();
        assert!(r.all_passed());
        assert!(close(r.sum_sq.slack, 1.0, 1e-14));

        let b = BoundBudget::new(0.37, 1.0).unwrap();
        let r = check_bounds(&[0.0, 0.0], &b).unwrap();
        assert!(r.sum_sq.passed);
        assert!(close(r.sum_sq.slack, (0.74f64).exp() - 1.0, 1e-15));

        let b = BoundBudget::new(0.5 * 2f64.ln(), 0.0).unwrap();
        assert!(close(b.one_plus_prod_floor(), std::f64::consts::FRAC_1_SQRT_2, 1e-15));
        assert!(close(b.pair_sum_floor(), 2.0 / 3.0, 1e-15));
    }

    #[test]
    fn budget_validation() {
        assert!(BoundBudget::new(-0.1, 0.2).is_err());
        assert!(BoundBudget::new(f64::NAN, 0.2).is_err());
        assert!(BoundBudget::new(0.1, f64::INFINITY).is_err());
    }

    #[test]
    fn point_spectrum_from_matrix() {
        let ps = PointSpectrum::from_matrix(&SymMatrix::from_diag(&[2.0, -0.3])).unwrap();
        assert_eq!(ps.lambdas, vec![-0.3, 2.0]);
        let expected = (1.7f64 * 0.4 / (5.0 * 1.09)).ln();
        assert!(close(ps.logdet_s2.value(), expected, 1e-14));
        assert!(close(expected, 0.124_771f64.ln(), 1e-5));
    }
}
