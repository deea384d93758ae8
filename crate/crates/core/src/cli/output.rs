//! Diagnostics CSV, JSON summary and snapshot files.

use crate::field::{fmt_real, write_snapshot, PotentialField};
use crate::flow::FlowTrajectory;
use crate::monitors::{
    bound_chain_holds, check_growth_bound, check_monotone, region_preserved, DiagnosticsRow, GrowthReport,
    MonotonicityReport, Quantity, CSV_COLUMNS,
};
use crate::spectrum::Flavor;
use crate::{Error, Result};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::config::RunConfig;

/// Header line plus one line per row; reals with 17 significant digits.
pub fn write_csv<W: Write>(rows: &[DiagnosticsRow], mut w: W) -> Result<()> {
    writeln!(w, "{}", CSV_COLUMNS.join(","))?;
    for r in rows {
        let line: Vec<String> = r.csv_values().iter().map(|&x| fmt_real(x)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a diagnostics CSV back into its numeric columns.
pub fn read_csv(text: &str) -> Result<Vec<[f64; 13]>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Io("empty csv".into()))?;
    if header != CSV_COLUMNS.join(",") {
        return Err(Error::Io(format!("unexpected csv header `{header}`")));
    }
    lines
        .map(|l| {
            let vals: Vec<f64> = l
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|_| Error::Io(format!("bad csv value `{s}`"))))
                .collect::<Result<_>>()?;
            vals.try_into()
                .map_err(|_| Error::Io(format!("csv row has wrong width: `{l}`")))
        })
        .collect()
}

/// A real that serializes as a JSON number when finite and as the strings
/// `"inf"`, `"-inf"` or `"nan"` otherwise.
#[derive(Clone, Copy, Debug)]
pub struct Real(pub f64);

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits() || self.0 == other.0
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let x = self.0;
        if x.is_finite() {
            s.serialize_f64(x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(Real(x)),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(Real(f64::INFINITY)),
                "-inf" => Ok(Real(f64::NEG_INFINITY)),
                "nan" => Ok(Real(f64::NAN)),
                _ => Err(serde::de::Error::custom(format!("not a real: {s}"))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSummary {
    pub quantity: Quantity,
    pub worst_drop: Real,
    pub slack: Real,
    pub passed: bool,
    /// `(t, drop)` pairs.
    pub violations: Vec<(Real, Real)>,
}

impl From<&MonotonicityReport> for MonotoneSummary {
    fn from(r: &MonotonicityReport) -> Self {
        MonotoneSummary {
            quantity: r.quantity,
            worst_drop: Real(r.worst_drop),
            slack: Real(r.slack),
            passed: r.passed,
            violations: r.violations.iter().map(|&(t, d)| (Real(t), Real(d))).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthSummary {
    pub quantity: Quantity,
    /// Smallest `Δmin/Δt − 2|A|²` over consecutive rows.
    pub worst_margin: Real,
    pub tol: Real,
    pub passed: bool,
    pub violations: Vec<(Real, Real)>,
}

impl From<&GrowthReport> for GrowthSummary {
    fn from(r: &GrowthReport) -> Self {
        GrowthSummary {
            quantity: r.quantity,
            worst_margin: Real(r.worst_margin),
            tol: Real(r.tol),
            passed: r.passed,
            violations: r.violations.iter().map(|&(t, m)| (Real(t), Real(m))).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub status: String,
    pub exit_code: i32,
    pub n: usize,
    pub points: usize,
    pub flavor: String,
    pub scheme: String,
    pub dt: Real,
    pub steps: u64,
    pub t_final: Real,
    pub convergence_time: Option<Real>,
    pub rows: usize,
    pub margin_warning: bool,
    pub region_preserved: bool,
    /// Eigenvalue bound chain at every row; two-convex runs with `n ≥ 2` only.
    pub bound_chain: Option<bool>,
    /// Final diagnostics row, keyed by CSV column.
    pub final_row: Vec<(String, Real)>,
    pub monotonicity: Vec<MonotoneSummary>,
    pub growth: Vec<GrowthSummary>,
}

impl RunSummary {
    pub fn build(cfg: &RunConfig, traj: &FlowTrajectory, exit_code: i32) -> Self {
        let slack = cfg.tolerances.slack_mono;
        let monotonicity = [Quantity::LogdetS2, Quantity::LogStarOmega, Quantity::LogdetP2]
            .iter()
            .filter(|&&q| cfg.n >= 2 || q == Quantity::LogStarOmega)
            .map(|&q| MonotoneSummary::from(&check_monotone(&traj.rows, q, slack)))
            .collect();
        let growth = if cfg.n >= 2 {
            [Quantity::LogdetS2, Quantity::LogdetP2]
                .iter()
                .map(|&q| GrowthSummary::from(&check_growth_bound(&traj.rows, q, cfg.growth_tol())))
                .collect()
        } else {
            Vec::new()
        };
        let final_row = traj
            .rows
            .last()
            .map(|r| {
                CSV_COLUMNS
                    .iter()
                    .zip(r.csv_values())
                    .map(|(c, v)| (c.to_string(), Real(v)))
                    .collect()
            })
            .unwrap_or_default();
        RunSummary {
            name: cfg.name.clone(),
            status: traj.status.name().into(),
            exit_code,
            n: cfg.n,
            points: cfg.points,
            flavor: cfg.flavor.name().into(),
            scheme: cfg.integrator.scheme.name().into(),
            dt: Real(traj.dt),
            steps: traj.steps,
            t_final: Real(traj.final_field.t),
            convergence_time: traj.convergence_time.map(Real),
            rows: traj.rows.len(),
            margin_warning: traj.margin_warning,
            region_preserved: region_preserved(&traj.rows, cfg.flavor),
            bound_chain: (cfg.n >= 2 && cfg.flavor == Flavor::TwoConvex).then(|| bound_chain_holds(&traj.rows)),
            final_row,
            monotonicity,
            growth,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary is serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Io(format!("summary json: {e}")))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write_csv_file(rows: &[DiagnosticsRow], path: &Path) -> Result<()> {
    write_csv(rows, create(path)?)
}

pub fn write_summary_file(summary: &RunSummary, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", summary.to_json())?;
    w.flush()?;
    Ok(())
}

/// Writes `snap_00000.txt`, `snap_00001.txt`, … into `dir`.
pub fn write_snapshots(snapshots: &[PotentialField], dir: &Path) -> Result<()> {
    for (i, s) in snapshots.iter().enumerate() {
        let mut w = create(&dir.join(format!("snap_{i:05}.txt")))?;
        write_snapshot(s, &mut w)?;
        w.flush()?;
    }
    Ok(())
}
