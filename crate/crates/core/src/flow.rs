//! Explicit time integration of `∂u/∂t = θ(D²u)`.
//!
//! Only the periodic part `v` is stepped. The spatial mean of the rate is
//! split off every stage and accumulated in `phase`, so `v` stays at zero
//! mean. The linearized operator is `g^{ij}∂ᵢ∂ⱼ` with `g = I + (D²u)²`,
//! whose coefficients are bounded by one; the step `dt = cfl·h²/(2n)` is
//! therefore independent of the solution.

use crate::field::{periodic_hessian_at, remove_mean, PotentialField};
use crate::monitors::{self, ConvergenceTolerances, DiagnosticsRow};
use crate::spectrum::{eigenvalues_sym, lagrangian_angle, Flavor, PairMargins};
use crate::{Error, Result};
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    Rk4,
}

impl Scheme {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "euler" => Some(Scheme::Euler),
            "rk4" => Some(Scheme::Rk4),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::Rk4 => "rk4",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorSpec {
    pub scheme: Scheme,
    pub cfl: f64,
    pub max_steps: u64,
    pub t_end: f64,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        IntegratorSpec {
            scheme: Scheme::Euler,
            cfl: 0.5,
            max_steps: 10_000_000,
            t_end: 50.0,
        }
    }
}

impl IntegratorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!("cfl = {} not in (0, 1]", self.cfl)));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::Config(format!("t_end = {} must be >= 0", self.t_end)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Running,
    Converged,
    /// Reached `t_end` without meeting the convergence tolerances.
    Completed,
    RegionExit,
    NanBlowup,
    MaxSteps,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::Converged => "converged",
            Status::Completed => "completed",
            Status::RegionExit => "region_exit",
            Status::NanBlowup => "nan_blowup",
            Status::MaxSteps => "max_steps",
        }
    }

    pub fn is_terminal(self) -> bool {
        self != Status::Running
    }
}

/// Mean-removed angle field plus the removed mean and region data.
#[derive(Clone, Debug)]
pub struct Rhs {
    pub rate: Vec<f64>,
    pub mean: f64,
    /// Smallest region margin over the grid, for the tracked flavor.
    pub min_margin: f64,
    /// Some point sits on or outside the tracked region.
    pub exterior: bool,
}

/// Pointwise `θ(A + D²v)` without mean removal.
pub fn theta_field(field: &PotentialField) -> Vec<f64> {
    let g = field.grid;
    let n = g.dim();
    (0..g.len())
        .into_par_iter()
        .map(|idx| {
            let m = field.a.add(&periodic_hessian_at(&g, &field.v, idx));
            lagrangian_angle(&eigenvalues_sym(&m)[..n])
        })
        .collect()
}

/// `θ(A + D²v)` with the spatial mean split off; region data for `flavor`.
pub fn rhs_for(field: &PotentialField, flavor: Flavor) -> Result<Rhs> {
    let g = field.grid;
    let n = g.dim();
    let per_point: Vec<(f64, f64, bool)> = (0..g.len())
        .into_par_iter()
        .map(|idx| {
            let m = field.a.add(&periodic_hessian_at(&g, &field.v, idx));
            let vals = eigenvalues_sym(&m);
            let l = &vals[..n];
            let margin = flavor.margin(&PairMargins::of(l));
            (lagrangian_angle(l), margin, flavor.is_exterior(l))
        })
        .collect();
    let mut rate = Vec::with_capacity(per_point.len());
    let mut min_margin = f64::INFINITY;
    let mut exterior = false;
    for &(theta, margin, ext) in &per_point {
        if !theta.is_finite() {
            return Err(Error::NanBlowup);
        }
        rate.push(theta);
        min_margin = min_margin.min(margin);
        exterior |= ext;
    }
    let mean = crate::field::mean(&rate);
    for x in rate.iter_mut() {
        *x -= mean;
    }
    Ok(Rhs {
        rate,
        mean,
        min_margin,
        exterior,
    })
}

/// Right-hand side with two-convex region bookkeeping.
pub fn rhs(field: &PotentialField) -> Result<Rhs> {
    rhs_for(field, Flavor::TwoConvex)
}

/// `cfl·h²/(2n)`.
pub fn stable_dt(field: &PotentialField, cfl: f64) -> f64 {
    let h = field.grid.spacing();
    cfl * h * h / (2.0 * field.grid.dim() as f64)
}

#[derive(Clone, Debug)]
pub struct FlowState {
    pub field: PotentialField,
    pub step_index: u64,
    pub dt_last: f64,
    pub status: Status,
    pub flavor: Flavor,
    /// Smallest region margin seen at the start of any step.
    pub min_margin: f64,
}

impl FlowState {
    pub fn new(field: PotentialField, flavor: Flavor) -> Self {
        FlowState {
            field,
            step_index: 0,
            dt_last: 0.0,
            status: Status::Running,
            flavor,
            min_margin: f64::INFINITY,
        }
    }
}

fn axpy(dst: &mut [f64], base: &[f64], a: f64, x: &[f64]) {
    for ((d, b), xi) in dst.iter_mut().zip(base).zip(x) {
        *d = b + a * xi;
    }
}

/// Advances one step of size `min(stable_dt, t_end − t)`.
///
/// The current state is checked first: a point outside the tracked region
/// sets `RegionExit` and a non-finite angle sets `NanBlowup`, both without
/// advancing.
pub fn step(state: &mut FlowState, spec: &IntegratorSpec) {
    if state.status != Status::Running {
        return;
    }
    let mut dt = stable_dt(&state.field, spec.cfl);
    if spec.t_end.is_finite() {
        dt = dt.min(spec.t_end - state.field.t);
    }
    let k1 = match rhs_for(&state.field, state.flavor) {
        Ok(r) => r,
        Err(_) => {
            state.status = Status::NanBlowup;
            return;
        }
    };
    state.min_margin = state.min_margin.min(k1.min_margin);
    if k1.exterior {
        state.status = Status::RegionExit;
        return;
    }
    let field = &mut state.field;
    match spec.scheme {
        Scheme::Euler => {
            for (x, r) in field.v.iter_mut().zip(&k1.rate) {
                *x += dt * r;
            }
            field.phase += dt * k1.mean;
        }
        Scheme::Rk4 => {
            let base = field.v.clone();
            let mut stage = field.clone();
            let eval = |v: &[f64], stage: &mut PotentialField| -> Option<Rhs> {
                stage.v.copy_from_slice(v);
                rhs_for(stage, state.flavor).ok()
            };
            let mut tmp = vec![0.0; base.len()];
            axpy(&mut tmp, &base, 0.5 * dt, &k1.rate);
            let Some(k2) = eval(&tmp, &mut stage) else {
                state.status = Status::NanBlowup;
                return;
            };
            axpy(&mut tmp, &base, 0.5 * dt, &k2.rate);
            let Some(k3) = eval(&tmp, &mut stage) else {
                state.status = Status::NanBlowup;
                return;
            };
            axpy(&mut tmp, &base, dt, &k3.rate);
            let Some(k4) = eval(&tmp, &mut stage) else {
                state.status = Status::NanBlowup;
                return;
            };
            let w = dt / 6.0;
            for (i, x) in field.v.iter_mut().enumerate() {
                *x = base[i] + w * (k1.rate[i] + 2.0 * k2.rate[i] + 2.0 * k3.rate[i] + k4.rate[i]);
            }
            field.phase += w * (k1.mean + 2.0 * k2.mean + 2.0 * k3.mean + k4.mean);
        }
    }
    remove_mean(field);
    field.t += dt;
    state.step_index += 1;
    state.dt_last = dt;
    if !field.is_finite() {
        state.status = Status::NanBlowup;
    }
}

/// Everything `run` needs besides the initial field.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub integrator: IntegratorSpec,
    pub flavor: Flavor,
    /// Steps between diagnostics rows (≥ 1).
    pub sample_every: u64,
    /// Rows between field snapshots; 0 disables snapshots.
    pub snapshot_every: u64,
    pub convergence: ConvergenceTolerances,
    /// Log a warning once the region margin drops below this.
    pub warn_margin: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            integrator: IntegratorSpec::default(),
            flavor: Flavor::TwoConvex,
            sample_every: 50,
            snapshot_every: 0,
            convergence: ConvergenceTolerances::default(),
            warn_margin: 1e-3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowTrajectory {
    pub rows: Vec<DiagnosticsRow>,
    pub snapshots: Vec<PotentialField>,
    pub status: Status,
    pub final_field: PotentialField,
    pub steps: u64,
    /// Nominal step `cfl·h²/(2n)`.
    pub dt: f64,
    pub convergence_time: Option<f64>,
    /// The region margin fell below `warn_margin` at some step.
    pub margin_warning: bool,
}

/// Integrates until convergence, `t_end`, `max_steps` or a failure status.
/// A diagnostics row is recorded at `t = 0`, every `sample_every` steps and
/// at the final state.
pub fn run(field: PotentialField, opts: &RunOptions) -> Result<FlowTrajectory> {
    opts.integrator.validate()?;
    if opts.sample_every == 0 {
        return Err(Error::Config("sample_every must be >= 1".into()));
    }
    if !field.is_finite() {
        return Err(Error::NanBlowup);
    }
    let dt = stable_dt(&field, opts.integrator.cfl);
    let mut state = FlowState::new(field, opts.flavor);
    let mut rows: Vec<DiagnosticsRow> = Vec::new();
    let mut snapshots = Vec::new();
    let mut warned = false;
    let record = |state: &FlowState, rows: &mut Vec<DiagnosticsRow>, snapshots: &mut Vec<PotentialField>| {
        let row = monitors::snapshot(&state.field, dt);
        if opts.snapshot_every > 0 && (rows.len() as u64) % opts.snapshot_every == 0 {
            snapshots.push(state.field.clone());
        }
        let converged = monitors::check_convergence(&row, &opts.convergence);
        rows.push(row);
        converged
    };

    if record(&state, &mut rows, &mut snapshots) {
        state.status = Status::Converged;
    }
    let t_end = opts.integrator.t_end;
    while state.status == Status::Running {
        if state.field.t >= t_end {
            state.status = Status::Completed;
            break;
        }
        if state.step_index >= opts.integrator.max_steps {
            state.status = Status::MaxSteps;
            break;
        }
        step(&mut state, &opts.integrator);
        if !warned && state.min_margin < opts.warn_margin {
            warned = true;
            log::warn!(
                "region margin {:.3e} below {:.1e} at t = {:.6}",
                state.min_margin,
                opts.warn_margin,
                state.field.t
            );
        }
        if state.status != Status::Running {
            break;
        }
        let at_end = state.field.t >= t_end || state.step_index >= opts.integrator.max_steps;
        if state.step_index % opts.sample_every == 0 || at_end {
            if record(&state, &mut rows, &mut snapshots) {
                state.status = Status::Converged;
            }
        }
    }
    let last_t = rows.last().map(|r| r.t).unwrap_or(f64::NEG_INFINITY);
    if state.field.t > last_t && state.field.is_finite() {
        record(&state, &mut rows, &mut snapshots);
    }
    let convergence_time = (state.status == Status::Converged).then(|| state.field.t);
    Ok(FlowTrajectory {
        rows,
        snapshots,
        status: state.status,
        final_field: state.field,
        steps: state.step_index,
        dt,
        convergence_time,
        margin_warning: warned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use crate::spectrum::SymMatrix;
    use std::f64::consts::{FRAC_PI_2, TAU};

    fn mode_field(n: usize, points: usize, a: SymMatrix, eps: f64) -> PotentialField {
        let g = Grid::new(n, points).unwrap();
        let v = (0..g.len()).map(|i| eps * g.position(i)[0].cos()).collect();
        PotentialField::new(g, a, v).unwrap()
    }

    #[test]
    fn rhs_of_flat_fields() {
        let z = mode_field(2, 16, SymMatrix::zeros(2), 0.0);
        let r = rhs(&z).unwrap();
        assert!(r.rate.iter().all(|&x| x == 0.0) && r.mean == 0.0);
        let q = mode_field(2, 16, SymMatrix::identity(2), 0.0);
        let r = rhs(&q).unwrap();
        assert!(theta_field(&q).iter().all(|&x| (x - FRAC_PI_2).abs() < 1e-15));
        assert!(r.rate.iter().all(|&x| x.abs() < 1e-15));
        assert!((r.mean - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn rhs_linearizes_for_small_amplitude() {
        let eps = 1e-3;
        let f = mode_field(1, 64, SymMatrix::zeros(1), eps);
        let r = rhs(&f).unwrap();
        let h = f.grid.spacing();
        // discrete symbol of the 3-point Laplacian on cos x
        let symbol = 4.0 / (h * h) * (0.5 * h).sin().powi(2);
        for (i, &x) in r.rate.iter().enumerate() {
            let lin = -eps * symbol * f.grid.position(i)[0].cos();
            assert!((x - lin).abs() <= eps.powi(3), "{x} vs {lin}");
        }
    }

    #[test]
    fn stable_dt_rule() {
        let f = mode_field(2, 64, SymMatrix::zeros(2), 0.0);
        let dt = stable_dt(&f, 0.5);
        let expected = 0.5 * (TAU / 64.0).powi(2) / 4.0;
        assert_eq!(dt, expected);
        assert!((dt - 1.2048e-3).abs() < 1e-7);
        let f1 = mode_field(1, 16, SymMatrix::zeros(1), 0.0);
        assert_eq!(stable_dt(&f1, 1.0), (TAU / 16.0).powi(2) / 2.0);
        let f2 = mode_field(2, 128, SymMatrix::zeros(2), 0.0);
        assert!((stable_dt(&f2, 0.5) * 4.0 - dt).abs() < 1e-18);
    }

    #[test]
    fn fixed_point_is_unchanged() {
        let f = mode_field(2, 16, SymMatrix::identity(2), 0.0);
        let mut s = FlowState::new(f.clone(), Flavor::TwoConvex);
        let spec = IntegratorSpec::default();
        for _ in 0..5 {
            step(&mut s, &spec);
        }
        assert_eq!(s.field.v, f.v);
        assert_eq!(s.status, Status::Running);
        assert!(s.field.phase > 0.0);
    }

    #[test]
    fn single_mode_heat_decay() {
        let eps = 1e-3;
        let f = mode_field(1, 64, SymMatrix::zeros(1), eps);
        let mut s = FlowState::new(f, Flavor::TwoConvex);
        let spec = IntegratorSpec {
            t_end: 1.0,
            ..IntegratorSpec::default()
        };
        while s.field.t < 1.0 {
            step(&mut s, &spec);
        }
        assert!((s.field.t - 1.0).abs() < 1e-12);
        let ratio = s.field.v[0] / eps;
        assert!((ratio / (-1f64).exp() - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn rk4_and_euler_differ_at_second_order() {
        let a = SymMatrix::from_diag(&[1.0, 0.5]);
        let f = mode_field(2, 32, a, 0.2);
        let diff = |cfl: f64| {
            let mut e = FlowState::new(f.clone(), Flavor::TwoConvex);
            let mut r = e.clone();
            let mut spec = IntegratorSpec {
                cfl,
                ..IntegratorSpec::default()
            };
            step(&mut e, &spec);
            spec.scheme = Scheme::Rk4;
            step(&mut r, &spec);
            e.field.v.iter().zip(&r.field.v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        };
        let (d1, d2) = (diff(0.4), diff(0.2));
        // halving dt quarters the one-step difference
        let ratio = d2 / d1;
        assert!((0.2..=0.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn region_exit_is_reported_without_advancing() {
        // λ₁ = 0.3 − 0.5cos x₁, λ₂ = −0.1: pair sum negative near x₁ = 0
        let f = mode_field(2, 16, SymMatrix::from_diag(&[0.3, -0.1]), 0.5);
        let mut s = FlowState::new(f.clone(), Flavor::TwoConvex);
        step(&mut s, &IntegratorSpec::default());
        assert_eq!(s.status, Status::RegionExit);
        assert_eq!(s.field, f);
        step(&mut s, &IntegratorSpec::default());
        assert_eq!(s.step_index, 0);
    }

    #[test]
    fn nan_field_blows_up() {
        let mut f = mode_field(2, 16, SymMatrix::identity(2), 0.1);
        f.v[3] = f64::NAN;
        let mut s = FlowState::new(f, Flavor::TwoConvex);
        step(&mut s, &IntegratorSpec::default());
        assert_eq!(s.status, Status::NanBlowup);
    }

    #[test]
    fn quadratic_converges_immediately() {
        let f = mode_field(2, 16, SymMatrix::identity(2), 0.0);
        let tr = run(f, &RunOptions::default()).unwrap();
        assert_eq!(tr.status, Status::Converged);
        assert_eq!(tr.steps, 0);
        assert_eq!(tr.rows.len(), 1);
        assert_eq!(tr.convergence_time, Some(0.0));
    }

    #[test]
    fn run_respects_limits() {
        let f = mode_field(2, 16, SymMatrix::identity(2), 0.1);
        let mut opts = RunOptions::default();
        opts.integrator.t_end = 0.5;
        let tr = run(f.clone(), &opts).unwrap();
        assert_eq!(tr.status, Status::Completed);
        assert!((tr.final_field.t - 0.5).abs() < 1e-12);
        assert!(tr.rows.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(tr.rows.last().unwrap().t, tr.final_field.t);

        opts.integrator.t_end = 50.0;
        opts.integrator.max_steps = 7;
        let tr = run(f, &opts).unwrap();
        assert_eq!(tr.status, Status::MaxSteps);
        assert_eq!(tr.steps, 7);
    }

    #[test]
    fn invalid_options_rejected() {
        let f = mode_field(2, 16, SymMatrix::identity(2), 0.1);
        let mut opts = RunOptions::default();
        opts.integrator.cfl = 1.5;
        assert!(run(f.clone(), &opts).is_err());
        opts.integrator.cfl = 0.5;
        opts.sample_every = 0;
        assert!(run(f, &opts).is_err());
    }
}
