//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use lagflow::cli::config::RunConfig;
use lagflow::cli::{execute, RunOutcome};
use lagflow::flow::Status;
use lagflow::monitors::{
    bound_chain_holds, check_growth_bound, check_monotone, default_growth_tol, region_preserved, Quantity,
    DEFAULT_MONOTONE_SLACK,
};
use lagflow::oracles::{lewy_sweep, run_named, ClosedForms};
use lagflow::rng::SplitMix64;
use lagflow::scenarios::{RandomModes, RecipeKind, Region};
use lagflow::spectrum::{Flavor, SymMatrix};
use std::f64::consts::TAU;
use std::time::Instant;

struct Run {
    label: String,
    outcome: RunOutcome,
    csv: Vec<u8>,
}

fn execute_config(label: &str, cfg: RunConfig) -> Run {
    let dir = tempfile::tempdir().expect("temp dir");
    let start = Instant::now();
    let outcome = execute(cfg, dir.path()).unwrap_or_else(|e| panic!("{label}: {e}"));
    let csv = std::fs::read(dir.path().join(&outcome.config.output.csv_path)).expect("csv written");
    println!(
        "    run {label:<12} {:<10} t = {:>8.3}  steps = {:>6}  rows = {:>4}  ({:.1} s)",
        outcome.trajectory.status.name(),
        outcome.trajectory.final_field.t,
        outcome.trajectory.steps,
        outcome.trajectory.rows.len(),
        start.elapsed().as_secs_f64()
    );
    Run {
        label: label.into(),
        outcome,
        csv,
    }
}

/// Random two-convex field: `A` within 0.3 of the identity plus three modes.
fn random_two_convex(seed: u64) -> RunConfig {
    let mut rng = SplitMix64::new(seed);
    let (d1, d2, off) = (rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.2, 0.2));
    let mut cfg = RunConfig::from_preset("tc-small").expect("preset");
    cfg.name = format!("tc-rand-{seed}");
    cfg.recipe.kind = RecipeKind::RandomRegion;
    cfg.recipe.a = Some(SymMatrix::from_row_major(2, &[1.0 + d1, off, off, 1.0 + d2]).expect("symmetric"));
    cfg.recipe.modes.clear();
    cfg.recipe.seed = seed;
    cfg.recipe.random = RandomModes {
        count: 3,
        amplitude: 0.3,
        max_wavenumber: 2,
    };
    cfg
}

fn random_area_decreasing(seed: u64, n: usize) -> RunConfig {
    let mut cfg = RunConfig::from_preset("ad-small").expect("preset");
    cfg.name = format!("ad-rand-{seed}");
    cfg.n = n;
    cfg.recipe.kind = RecipeKind::RandomRegion;
    cfg.recipe.modes.clear();
    cfg.recipe.seed = seed;
    cfg.recipe.region = Region::AreaDecreasing;
    cfg.recipe.random = RandomModes {
        count: 3,
        amplitude: 0.2,
        max_wavenumber: if n == 3 { 1 } else { 2 },
    };
    cfg
}

struct Verdict {
    passed: bool,
}

fn report(verdicts: &mut Vec<Verdict>, id: u32, title: &str, passed: bool, detail: String) {
    println!("criterion {id:>2} {}  {title}: {detail}", if passed { "PASS" } else { "FAIL" });
    verdicts.push(Verdict { passed });
}

fn h_of(run: &Run) -> f64 {
    TAU / run.outcome.config.points as f64
}

/// Criteria 2–5 for one flavor over a set of runs: region and tracked
/// minimum, log *Ω, growth bound, convergence.
fn region_criteria(runs: &[Run], flavor: Flavor) -> [(bool, String); 4] {
    let q = Quantity::for_flavor(flavor);
    let mut preserved = true;
    let mut worst_drop = 0.0f64;
    let mut worst_omega_drop = 0.0f64;
    let mut worst_growth = f64::INFINITY;
    let mut growth_ok = true;
    let mut converged = true;
    let mut failures = Vec::new();
    for r in runs {
        let rows = &r.outcome.trajectory.rows;
        if !region_preserved(rows, flavor) {
            preserved = false;
            failures.push(format!("{}: left region", r.label));
        }
        let m = check_monotone(rows, q, DEFAULT_MONOTONE_SLACK);
        worst_drop = worst_drop.max(m.worst_drop);
        let o = check_monotone(rows, Quantity::LogStarOmega, DEFAULT_MONOTONE_SLACK);
        worst_omega_drop = worst_omega_drop.max(o.worst_drop);
        let g = check_growth_bound(rows, q, default_growth_tol(h_of(r)));
        worst_growth = worst_growth.min(g.worst_margin + g.tol);
        growth_ok &= g.passed;
        let last = rows.last().expect("rows");
        let ok = r.outcome.trajectory.status == Status::Converged
            && last.max_a2 < 1e-8
            && last.hess_sup < 1e-4
            && last.theta_osc < 1e-6
            && last.t <= 50.0;
        if !ok {
            failures.push(format!("{}: {} at t = {}", r.label, r.outcome.trajectory.status.name(), last.t));
        }
        converged &= ok;
    }
    let n = runs.len();
    [
        (
            preserved && worst_drop <= DEFAULT_MONOTONE_SLACK,
            format!("{n} runs, region flag held = {preserved}, worst drop of {} {worst_drop:.3e}", q.name()),
        ),
        (
            worst_omega_drop <= DEFAULT_MONOTONE_SLACK,
            format!("{n} runs, worst drop of min_log_star_omega {worst_omega_drop:.3e}"),
        ),
        (
            growth_ok,
            format!("{n} runs, smallest Δmin/Δt − 2|A|² + tol = {worst_growth:.3e}"),
        ),
        (
            converged,
            if failures.is_empty() {
                format!("{n} runs converged within t ≤ 50")
            } else {
                failures.join("; ")
            },
        ),
    ]
}

fn max_angle_residual(run: &Run) -> f64 {
    run.outcome
        .trajectory
        .rows
        .iter()
        .map(|r| r.angle_residual)
        .fold(0.0, f64::max)
}

fn main() {
    let start = Instant::now();
    let mut verdicts = Vec::new();
    let imp = ClosedForms::default();

    // 1
    let s = run_named("s_closed_form", &imp).expect("check exists");
    let l = run_named("logdet_s2", &imp).expect("check exists");
    report(
        &mut verdicts,
        1,
        "oracle equivalence",
        s.passed && l.passed,
        format!("S: {}; log det S^[2]: {}", s.detail, l.detail),
    );

    // 2–5, 8
    println!("  two-convex runs (n = 2, N = 64):");
    let mut tc = vec![
        execute_config("tc-small", RunConfig::from_preset("tc-small").expect("preset")),
        execute_config("tc-aniso", RunConfig::from_preset("tc-aniso").expect("preset")),
    ];
    for seed in 1..=8 {
        tc.push(execute_config(&format!("tc-rand-{seed}"), random_two_convex(seed)));
    }
    let titles = [
        "two-convexity preserved, min_logdet_s2 monotone",
        "min_log_star_omega monotone",
        "growth bound d/dt min_logdet_s2 ≥ 2|A|²",
        "convergence to a flat limit",
    ];
    for (i, (ok, detail)) in region_criteria(&tc, Flavor::TwoConvex).into_iter().enumerate() {
        report(&mut verdicts, 2 + i as u32, titles[i], ok, detail);
    }

    // 6
    println!("  area-decreasing runs (N = 32):");
    let mut ad = vec![execute_config("ad-small", RunConfig::from_preset("ad-small").expect("preset"))];
    for seed in 1..=3 {
        ad.push(execute_config(&format!("ad-rand-{seed}"), random_area_decreasing(seed, 2)));
    }
    ad.push(execute_config("ad-rand-n3", random_area_decreasing(4, 3)));
    let sub = region_criteria(&ad, Flavor::AreaDecreasing);
    report(
        &mut verdicts,
        6,
        "area-decreasing flavor (criteria 2–5 with min_logdet_p2)",
        sub.iter().all(|(ok, _)| *ok),
        sub.iter()
            .map(|(ok, d)| format!("[{}] {d}", if *ok { "ok" } else { "FAIL" }))
            .collect::<Vec<_>>()
            .join(" "),
    );

    // 7
    let full = max_angle_residual(&tc[0]);
    let short = |points: usize| {
        let mut cfg = RunConfig::from_preset("tc-small").expect("preset");
        cfg.points = points;
        cfg.integrator.t_end = 0.5;
        execute_config(&format!("tc-small/{points}"), cfg)
    };
    let (r64, r128) = (max_angle_residual(&short(64)), max_angle_residual(&short(128)));
    let ratio = r128 / r64;
    report(
        &mut verdicts,
        7,
        "angle equation residual",
        full <= 5e-3 && ratio <= 0.35,
        format!("max residual N=64 full run {full:.3e} (≤ 5e-3); t ≤ 0.5: N=64 {r64:.3e}, N=128 {r128:.3e}, ratio {ratio:.4} (≤ 0.35)"),
    );

    // 8
    let chain_rows: usize = tc.iter().map(|r| r.outcome.trajectory.rows.len()).sum();
    let chain = tc.iter().all(|r| bound_chain_holds(&r.outcome.trajectory.rows));
    let worst_slack = tc
        .iter()
        .flat_map(|r| r.outcome.trajectory.rows.iter())
        .filter_map(|row| row.bounds.map(|b| b.sum_sq.slack.min(b.pair_product.slack).min(b.separate.slack)))
        .fold(f64::INFINITY, f64::min);
    report(
        &mut verdicts,
        8,
        "eigenvalue bound chain",
        chain,
        format!("{chain_rows} rows, smallest slack {worst_slack:.3e}"),
    );

    // 9
    let sweep = lewy_sweep(10_000, 2024);
    report(
        &mut verdicts,
        9,
        "Lewy rotation",
        sweep.not_area_decreasing == 0 && sweep.poles == 0 && sweep.max_roundtrip <= 1e-12,
        format!(
            "{} tuples, {} not area-decreasing, {} poles, round trip {:.3e}",
            sweep.samples, sweep.not_area_decreasing, sweep.poles, sweep.max_roundtrip
        ),
    );

    // 10
    let mut cfg = RunConfig::from_preset("heat-1d").expect("preset");
    cfg.output.snapshot_cadence = 1;
    let heat = execute_config("heat-1d", cfg);
    let amplitude = |f: &lagflow::field::PotentialField| {
        let g = f.grid;
        2.0 / g.len() as f64 * (0..g.len()).map(|i| f.v[i] * g.position(i)[0].cos()).sum::<f64>()
    };
    let snaps = &heat.outcome.trajectory.snapshots;
    let a0 = amplitude(&snaps[0]);
    let worst_rel = snaps
        .iter()
        .map(|s| ((amplitude(s) / a0) / (-s.t).exp() - 1.0).abs())
        .fold(0.0, f64::max);
    let t_last = snaps.last().map(|s| s.t).unwrap_or(0.0);
    report(
        &mut verdicts,
        10,
        "linear heat decay",
        worst_rel <= 0.05 && (t_last - 1.0).abs() < 1e-12,
        format!("{} samples up to t = {t_last}, worst |a(t)/a(0)·eᵗ − 1| = {worst_rel:.3e} (≤ 0.05)", snaps.len()),
    );

    // 11
    let again = [
        execute_config("ad-small", RunConfig::from_preset("ad-small").expect("preset")),
        execute_config("ad-rand-1", random_area_decreasing(1, 2)),
        execute_config("heat-1d", RunConfig::from_preset("heat-1d").expect("preset")),
    ];
    let identical = again[0].csv == ad[0].csv && again[1].csv == ad[1].csv && again[2].csv == heat.csv;
    report(
        &mut verdicts,
        11,
        "determinism",
        identical,
        format!(
            "repeated runs reproduce the CSV byte for byte: {}",
            again.iter().map(|r| r.label.as_str()).collect::<Vec<_>>().join(", ")
        ),
    );

    let failed = verdicts.iter().filter(|v| !v.passed).count();
    println!(
        "acceptance: {} of {} criteria passed ({:.0} s)",
        verdicts.len() - failed,
        verdicts.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
