use lagflow::field::{Grid, PotentialField};
use lagflow::flow::{run, IntegratorSpec, RunOptions, Scheme, Status};
use lagflow::monitors::{check_convergence, check_growth_bound, check_monotone, snapshot, ConvergenceTolerances, Quantity};
use lagflow::scenarios::preset;
use lagflow::spectrum::{Flavor, SymMatrix};

fn short_opts(t_end: f64) -> RunOptions {
    RunOptions {
        integrator: IntegratorSpec {
            t_end,
            ..IntegratorSpec::default()
        },
        sample_every: 10,
        snapshot_every: 1,
        ..RunOptions::default()
    }
}

fn aniso(points: usize) -> PotentialField {
    let mut p = preset("tc-aniso").unwrap();
    p.points = points;
    p.generate().unwrap()
}

fn scalars(r: &lagflow::monitors::DiagnosticsRow) -> [f64; 12] {
    let v = r.csv_values();
    v[1..].try_into().unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn adding_a_constant_changes_nothing_observable() {
    let f = aniso(32);
    let mut g = f.clone();
    for x in g.v.iter_mut() {
        *x += 3.25;
    }
    let g = PotentialField::new(g.grid, g.a, g.v).unwrap();
    let a = run(f, &short_opts(0.3)).unwrap();
    let b = run(g, &short_opts(0.3)).unwrap();
    assert_eq!(a.rows.len(), b.rows.len());
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        assert_eq!(ra.t, rb.t);
        for (x, y) in scalars(ra).iter().zip(scalars(rb)) {
            assert!(close(*x, y, 1e-12), "{x} vs {y}");
        }
    }
    // construction drops the constant along with the rest of the mean
    assert_eq!(a.final_field.phase, b.final_field.phase);
    for (x, y) in a.final_field.v.iter().zip(&b.final_field.v) {
        assert!((x - y).abs() <= 1e-13);
    }
}

#[test]
fn translation_by_one_cell() {
    let f = aniso(32);
    let grid = f.grid;
    let shifted = PotentialField::new(grid, f.a, grid.translate(&f.v, 0, 1)).unwrap();
    let a = run(f, &short_opts(0.2)).unwrap();
    let b = run(shifted, &short_opts(0.2)).unwrap();
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        for (x, y) in scalars(ra).iter().zip(scalars(rb)) {
            assert!(close(*x, y, 1e-12), "{x} vs {y}");
        }
    }
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        let moved = grid.translate(&sa.v, 0, 1);
        for (x, y) in moved.iter().zip(&sb.v) {
            assert!((x - y).abs() <= 1e-13);
        }
    }
}

#[test]
fn identical_inputs_give_identical_trajectories() {
    let a = run(aniso(32), &short_opts(0.2)).unwrap();
    let b = run(aniso(32), &short_opts(0.2)).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.final_field, b.final_field);
}

#[test]
fn rows_strictly_increase_and_end_at_t_end() {
    let a = run(aniso(32), &short_opts(0.25)).unwrap();
    assert!(a.rows.windows(2).all(|w| w[1].t > w[0].t));
    assert_eq!(a.rows.last().unwrap().t, 0.25);
    assert_eq!(a.status, Status::Completed);
}

#[test]
fn rk4_and_euler_agree_to_first_order() {
    let mut opts = short_opts(0.2);
    let e = run(aniso(32), &opts).unwrap();
    opts.integrator.scheme = Scheme::Rk4;
    let r = run(aniso(32), &opts).unwrap();
    let diff = e
        .final_field
        .v
        .iter()
        .zip(&r.final_field.v)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    // global Euler error O(dt), dt ≈ 4.8e-3
    assert!(diff > 0.0 && diff < 1e-3, "{diff}");
}

#[test]
fn pure_quadratic_converges_immediately() {
    let g = Grid::new(3, 16).unwrap();
    let f = PotentialField::new(g, SymMatrix::from_diag(&[0.3, 1.0, 2.0]), vec![0.0; g.len()]).unwrap();
    let row = snapshot(&f, 1e-3);
    assert!(check_convergence(&row, &ConvergenceTolerances::default()));
    let t = run(f, &RunOptions::default()).unwrap();
    assert_eq!((t.status, t.steps, t.rows.len()), (Status::Converged, 0, 1));
}

#[test]
fn fresh_seed_is_not_converged() {
    let f = preset("tc-small").unwrap().generate().unwrap();
    assert!(!check_convergence(&snapshot(&f, 1e-3), &ConvergenceTolerances::default()));
}

#[test]
fn non_two_convex_start_exits_cleanly() {
    let g = Grid::new(2, 16).unwrap();
    let v = (0..g.len()).map(|i| 0.3 * g.position(i)[1].sin()).collect();
    let f = PotentialField::new(g, SymMatrix::from_diag(&[-2.0, 0.5]), v).unwrap();
    let t = run(f, &short_opts(1.0)).unwrap();
    assert_eq!(t.status, Status::RegionExit);
    assert_eq!(t.rows.len(), 1);
}

#[test]
fn coarse_grid_growth_bound_depends_on_tolerance() {
    let mut p = preset("tc-small").unwrap();
    p.points = 16;
    let t = run(p.generate().unwrap(), &short_opts(1.0)).unwrap();
    assert!(check_monotone(&t.rows, Quantity::LogdetS2, 1e-7).passed);
    let h = std::f64::consts::TAU / 16.0;
    let loose = check_growth_bound(&t.rows, Quantity::LogdetS2, lagflow::monitors::default_growth_tol(h));
    assert!(loose.passed, "{:?}", loose.worst_margin);
    // with zero tolerance the discretization error is exposed or not; either
    // way the report is consistent with its own margin
    let strict = check_growth_bound(&t.rows, Quantity::LogdetS2, 0.0);
    assert_eq!(strict.passed, strict.worst_margin >= 0.0);
}

#[test]
fn area_decreasing_flavor_tracks_p2() {
    let p = preset("ad-small").unwrap();
    let opts = RunOptions {
        flavor: Flavor::AreaDecreasing,
        ..short_opts(0.5)
    };
    let t = run(p.generate().unwrap(), &opts).unwrap();
    assert!(t.rows.iter().all(|r| r.all_area_decreasing));
    assert!(check_monotone(&t.rows, Quantity::LogdetP2, 1e-7).passed);
    assert!(check_growth_bound(&t.rows, Quantity::LogdetP2, 1e-4).passed);
}
