//! The single-shot subcommands: kernel tables, raw simulations and exact
//! moments.

use crate::ExperimentError;
use brwepi::brw::{brw_run, OffspringLaw, RunSummary, TrajectoryWriter, DEFAULT_GUARD};
use brwepi::kernel::cache;
use brwepi::moments::{cumulant_recursion, mean_fields, second_moment, Convention, GridJson, MomentReport};
use brwepi::rng::StreamSeed;
use brwepi::sir::{coupled_run, CoupledOptions, CoupledRun};
use brwepi::{BoxGrid, KernelTable, LatticeField, Site, WalkSpec};
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;

fn io(path: &Path, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<(), ExperimentError> {
    std::fs::write(path, text).map_err(|e| io(path, e))
}

fn spec(d: usize) -> Result<WalkSpec, ExperimentError> {
    Ok(WalkSpec::new(d)?)
}

/// Builds (or loads) `P_0..P_{n_max}` and writes the binary cache.
pub fn kernel_table(d: usize, n_max: usize, out: &Path) -> Result<KernelTable, ExperimentError> {
    Ok(cache::load_or_build(spec(d)?, n_max, out)?)
}

/// `replicates` envelope runs from a point mass: replicate 0 streamed to
/// `trajectory.csv`, one summary row per replicate in `summary.csv`.
pub fn brw_runs(d: usize, mass: u64, law: &OffspringLaw, horizon: usize, replicates: u64, seed: u64, out: &Path) -> Result<(), ExperimentError> {
    spec(d)?;
    std::fs::create_dir_all(out).map_err(|e| io(out, e))?;
    let mu = LatticeField::point(d, mass);
    let rows: Vec<String> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let traj = brw_run(&mu, law, horizon, StreamSeed::new(seed, r), DEFAULT_GUARD)?;
            if r == 0 {
                let path = out.join("trajectory.csv");
                let f = std::fs::File::create(&path).map_err(|e| io(&path, e))?;
                let mut w = TrajectoryWriter::new(std::io::BufWriter::new(f), d).map_err(|e| io(&path, e))?;
                for (t, x) in traj.fields().iter().enumerate() {
                    w.write_step(t, x).map_err(|e| io(&path, e))?;
                }
                w.finish().map_err(|e| io(&path, e))?;
            }
            Ok(RunSummary::from_trajectory(r, &traj).csv_row())
        })
        .collect::<Result<_, ExperimentError>>()?;
    let mut csv = format!("{}\n", RunSummary::CSV_HEADER);
    for r in rows {
        csv += &r;
        csv.push('\n');
    }
    write_file(&out.join("summary.csv"), &csv)
}

/// Coupled SIR runs (both colourings on one envelope), one row per replicate.
#[allow(clippy::too_many_arguments)]
pub fn sir_runs(d: usize, mass: u64, n_village: u64, alpha: f64, horizon: usize, replicates: u64, seed: u64, out: &Path) -> Result<(), ExperimentError> {
    spec(d)?;
    std::fs::create_dir_all(out).map_err(|e| io(out, e))?;
    let mu = LatticeField::point(d, mass);
    let opts = CoupledOptions { law: OffspringLaw::EnvelopeN(n_village), guard: DEFAULT_GUARD, keep_fields: false };
    let rows: Vec<String> = (0..replicates)
        .into_par_iter()
        .map(|r| Ok(coupled_run(&mu, n_village, alpha, horizon, StreamSeed::new(seed, r), &opts)?.csv_row(r, d)))
        .collect::<Result<_, ExperimentError>>()?;
    let mut csv = format!("{}\n", CoupledRun::CSV_HEADER);
    for r in rows {
        csv += &r;
        csv.push('\n');
    }
    write_file(&out.join("sir_summary.csv"), &csv)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Quantity {
    /// `E X_n` and `E R_n` from a point mass.
    Mean,
    /// `E X_n(0)^2` from one particle at the origin.
    Second,
    /// Cumulants `kappa_{h,n}` of `<R_n, theta delta_0>`.
    Cumulant,
}

pub fn exact_moment(
    d: usize,
    n: usize,
    quantity: Quantity,
    mass: u64,
    psi: f64,
    h_max: usize,
    convention: Convention,
    law: &OffspringLaw,
    table: Option<&KernelTable>,
) -> Result<MomentReport, ExperimentError> {
    let sp = spec(d)?;
    let owned;
    let table = match table {
        Some(t) if t.d() == d && t.n_max() >= n => t,
        _ => {
            owned = KernelTable::build(sp, n)?;
            &owned
        }
    };
    Ok(match quantity {
        Quantity::Mean => {
            let (ex, er) = mean_fields(&LatticeField::point(d, mass), table, n)?;
            MomentReport { quantity: "mean".into(), d, n, convention: None, psi: None, scalar: None, grids: vec![(&ex).into(), (&er).into()] }
        }
        Quantity::Second => {
            let v = second_moment(Site::ORIGIN, n, law, table)?;
            MomentReport { quantity: "second_moment".into(), d, n, convention: None, psi: None, scalar: Some(v), grids: vec![] }
        }
        Quantity::Cumulant => {
            let p = BoxGrid::delta(d, psi);
            let t = cumulant_recursion(&p, h_max, n, law, convention)?;
            let grids: Vec<GridJson> = (1..=h_max).map(|h| t.kappa(h, n).into()).collect();
            MomentReport { quantity: "cumulant".into(), d, n, convention: Some(convention), psi: Some((&p).into()), scalar: None, grids }
        }
    })
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), ExperimentError> {
    let mut f = std::fs::File::create(path).map_err(|e| io(path, e))?;
    let text = serde_json::to_string_pretty(value).map_err(|e| io(path, e))?;
    writeln!(f, "{text}").map_err(|e| io(path, e))
}
