//! Scenario runner: time-series CSV, timing, VTK snapshots, residual history,
//! checkpoints and the run summary.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Checkpoint, InitialCondition, ScenarioConfig, Simulation, StepReport, TimeSeriesRecord};
use crate::error::{FsiError, Result};
use crate::vtk;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output_dir: PathBuf,
    pub dump_matrices: bool,
    /// Resume from a checkpoint file instead of the initial condition.
    pub resume: Option<PathBuf>,
    /// Stop after this many steps (default: until `end_time`).
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub min: f64,
    pub max: f64,
    pub last: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub steps: usize,
    pub final_time: f64,
    pub mesh_ratio: Option<f64>,
    /// `max |E(t) − E(0)| / E(0)` over the recorded rows; absent for runs
    /// starting from rest.
    pub max_energy_variation: Option<f64>,
    /// `max |A(t) − A(0)| / A(0)` over the recorded rows.
    pub max_area_drift: f64,
    pub columns: BTreeMap<String, ColumnStats>,
    #[serde(skip)]
    pub records: Vec<TimeSeriesRecord>,
}

const COLUMNS: [&str; 18] = [
    "step",
    "time",
    "probe_dx",
    "probe_dy",
    "probe_ux",
    "probe_uy",
    "kinetic_fluid",
    "kinetic_solid",
    "dissipation",
    "potential",
    "total_energy",
    "solid_area",
    "convection_iterations",
    "solver_iterations",
    "relative_residual",
    "divergence_norm",
    "energy_variation",
    "area_drift",
];

fn row(r: &TimeSeriesRecord, e0: f64, a0: f64) -> [f64; 18] {
    let e = r.energy.total();
    [
        r.step as f64,
        r.time,
        r.probe_displacement[0],
        r.probe_displacement[1],
        r.probe_velocity[0],
        r.probe_velocity[1],
        r.energy.kinetic_fluid,
        r.energy.kinetic_solid,
        r.energy.dissipation,
        r.energy.potential,
        e,
        r.solid_area,
        r.convection_iterations as f64,
        r.solver_iterations as f64,
        r.relative_residual,
        r.divergence_norm,
        if e0 > 0.0 { (e - e0) / e0 } else { f64::NAN },
        if a0 != 0.0 { (r.solid_area - a0) / a0 } else { 0.0 },
    ]
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

fn csv_err(e: csv::Error) -> FsiError {
    FsiError::Io(std::io::Error::other(e))
}

struct Writers {
    series: csv::Writer<File>,
    timing: csv::Writer<File>,
    residuals: Option<csv::Writer<File>>,
    dir: PathBuf,
}

impl Writers {
    fn create(dir: &Path, residuals: bool) -> Result<Self> {
        let mut series = csv::Writer::from_path(dir.join("timeseries.csv")).map_err(csv_err)?;
        series.write_record(COLUMNS).map_err(csv_err)?;
        let mut timing = csv::Writer::from_path(dir.join("timing.csv")).map_err(csv_err)?;
        timing.write_record(["step", "wall_seconds"]).map_err(csv_err)?;
        let residuals = if residuals {
            let mut w = csv::Writer::from_path(dir.join("residual_history.csv")).map_err(csv_err)?;
            w.write_record(["step", "iteration", "relative_residual"]).map_err(csv_err)?;
            Some(w)
        } else {
            None
        };
        Ok(Writers {
            series,
            timing,
            residuals,
            dir: dir.to_path_buf(),
        })
    }

    fn record(&mut self, r: &TimeSeriesRecord, e0: f64, a0: f64) -> Result<()> {
        let vals = row(r, e0, a0);
        let mut fields: Vec<String> = vec![r.step.to_string()];
        fields.extend(vals[1..].iter().map(|&x| fmt(x)));
        fields[12] = r.convection_iterations.to_string();
        fields[13] = r.solver_iterations.to_string();
        self.series.write_record(&fields).map_err(csv_err)
    }

    fn snapshot(&self, sim: &Simulation) -> Result<()> {
        let s = sim.state();
        let name = |kind: &str| self.dir.join(format!("{kind}_{:06}.vtk", s.step));
        vtk::write_fluid(BufWriter::new(File::create(name("fluid"))?), sim.mesh(), &s.u, &s.p, s.time)?;
        if let Some(solid) = sim.solid() {
            vtk::write_solid(BufWriter::new(File::create(name("solid"))?), solid, &s.u_s, s.time)?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.series.flush()?;
        self.timing.flush()?;
        if let Some(w) = &mut self.residuals {
            w.flush()?;
        }
        Ok(())
    }
}

/// Runs a scenario and writes its artifacts into `opts.output_dir`.
pub fn run_scenario(config: &ScenarioConfig, opts: &RunOptions) -> Result<RunSummary> {
    let dir = &opts.output_dir;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), config.to_toml_string()?)?;
    let mut sim = match &opts.resume {
        Some(path) => Simulation::from_checkpoint(config.clone(), Checkpoint::read(path)?)?,
        None => Simulation::new(config.clone())?,
    };
    if opts.dump_matrices {
        sim.dump_matrices(&dir.join("matrices"))?;
    }
    let mut w = Writers::create(dir, config.output.residual_history)?;
    let e0 = match config.initial {
        InitialCondition::Rest => 0.0,
        _ => sim.initial_energy(),
    };
    let a0 = sim.solid().map(|s| s.area()).unwrap_or(0.0);
    let out = &config.output;
    let first = sim.record(None)?;
    w.record(&first, e0, a0)?;
    if out.vtk {
        w.snapshot(&sim)?;
    }
    let mut records = vec![first];
    let total = config.n_steps();
    let last_step = opts.max_steps.map_or(total, |m| (sim.state().step + m).min(total));
    let mut result: Result<()> = Ok(());
    while sim.state().step < last_step {
        let clock = Instant::now();
        let report: StepReport = match sim.step() {
            Ok(r) => r,
            Err(e) => {
                result = Err(e);
                break;
            }
        };
        let elapsed = clock.elapsed().as_secs_f64();
        w.timing
            .write_record([report.step.to_string(), fmt(elapsed)])
            .map_err(csv_err)?;
        if let Some(rw) = &mut w.residuals {
            for (i, r) in report.residual_history.iter().enumerate() {
                rw.write_record([report.step.to_string(), i.to_string(), fmt(*r)])
                    .map_err(csv_err)?;
            }
        }
        let step = report.step;
        let is_last = step == last_step;
        if step.is_multiple_of(out.every) || is_last {
            let rec = sim.record(Some(&report))?;
            w.record(&rec, e0, a0)?;
            records.push(rec);
            log::info!(
                "step {step} t = {:.4} E = {:.6e} residual = {:.2e}",
                rec.time,
                rec.energy.total(),
                rec.relative_residual
            );
        }
        if out.vtk && ((out.vtk_every > 0 && step.is_multiple_of(out.vtk_every)) || is_last) {
            w.snapshot(&sim)?;
        }
    }
    w.flush()?;
    if let Err(e) = result {
        // leave the last consistent state behind for inspection
        sim.checkpoint().write(&dir.join("failure_state.json"))?;
        return Err(e);
    }
    sim.checkpoint().write(&dir.join("checkpoint.json"))?;

    let mut columns = BTreeMap::new();
    let rows: Vec<[f64; 18]> = records.iter().map(|r| row(r, e0, a0)).collect();
    for (k, name) in COLUMNS.iter().enumerate().skip(1) {
        let vals = rows.iter().map(|r| r[k]);
        columns.insert(
            name.to_string(),
            ColumnStats {
                min: vals.clone().fold(f64::INFINITY, f64::min),
                max: vals.clone().fold(f64::NEG_INFINITY, f64::max),
                last: rows.last().map(|r| r[k]).unwrap_or(f64::NAN),
            },
        );
    }
    let summary = RunSummary {
        scenario: config.name.clone(),
        steps: sim.state().step,
        final_time: sim.state().time,
        mesh_ratio: sim.mesh_ratio(),
        max_energy_variation: (e0 > 0.0).then(|| rows.iter().map(|r| r[16].abs()).fold(0.0, f64::max)),
        max_area_drift: rows.iter().map(|r| r[17].abs()).fold(0.0, f64::max),
        columns,
        records,
    };
    std::fs::write(
        dir.join("summary.toml"),
        toml::to_string_pretty(&summary).map_err(|e| FsiError::Serde(e.to_string()))?,
    )?;
    Ok(summary)
}
