//! Run orchestration: seed derivation, per-member solver pipelines with
//! attached diagnostics, the on-disk layout (`config.echo`, `events.csv`,
//! `diagnostics.csv`, `bounds.csv`, `wiener.csv`, `snapshots/`), and
//! ensemble aggregation.
//!
//! Seeding rule: the master seed is `noise.seed`. Member `i` runs with
//! master seed `seed + i` (or an explicit `member_seeds` entry); within a
//! member, purpose-specific streams derive by the counter-based split
//! `split_seed(member_seed, purpose, index)`. The noise basis and the
//! tracked loops derive from the master seed itself so all members share
//! them.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::config::{NoiseKind, RunConfig};
use crate::diagnostics::{
    self, DiagnosticRecord, GradAGrowth, GradARecord,
};
use crate::field::VectorField;
use crate::grid::Grid;
use crate::interp::InterpScheme;
use crate::noise::{build_fourier_noise_basis, split_seed, NoiseModel, WienerPath};
use crate::solver::{self, SolverConfig, SolverState, WindowEvent};
use crate::{io, Error, Result};

/// Number of circulation-tracking loops.
pub const TRACKED_LOOPS: usize = 3;
/// Points per tracked loop.
pub const LOOP_POINTS: usize = 256;
/// Sliding-window length (in slices) of the ∇A growth fit.
pub const GROWTH_FIT_WINDOW: usize = 16;

pub fn solver_config(cfg: &RunConfig, grid: Grid) -> SolverConfig {
    let mut sc = SolverConfig::new(grid, cfg.dt_flow);
    sc.picard_tol = cfg.picard_tol;
    sc.max_iter = cfg.max_iter;
    sc.guard_threshold = cfg.guard_threshold;
    sc.l = cfg.holder_l;
    sc.alpha = cfg.holder_alpha;
    sc.scheme = cfg.interp;
    sc
}

/// Build the noise model described by the configuration (deterministic in
/// the master seed).
pub fn build_noise_model(cfg: &RunConfig, grid: Grid) -> Result<NoiseModel> {
    match &cfg.noise.kind {
        NoiseKind::None => Ok(NoiseModel::empty(grid, cfg.interp)),
        NoiseKind::Constant { vector } => {
            let v = *vector;
            NoiseModel::from_fields(
                vec![VectorField::from_fn(grid, |_| v)],
                vec![1.0],
                cfg.interp,
            )
        }
        NoiseKind::Fourier { k, decay, amplitudes } => {
            let basis_seed = split_seed(cfg.noise.seed, "basis", 0);
            let model = build_fourier_noise_basis(grid, *k, *decay, basis_seed, cfg.interp)?;
            match amplitudes {
                None => Ok(model),
                Some(a) => {
                    let fields: Vec<VectorField> =
                        (0..model.k()).map(|i| model.sigma(i).clone()).collect();
                    NoiseModel::from_fields(fields, a.clone(), cfg.interp)
                }
            }
        }
    }
}

/// Seeded closed loops (circles in random planes), shared by all members.
pub fn seeded_loops(master_seed: u64, count: usize, points: usize) -> Vec<Vec<[f64; 3]>> {
    let mut loops = Vec::with_capacity(count);
    for j in 0..count {
        let mut rng = ChaCha12Rng::seed_from_u64(split_seed(master_seed, "loops", j as u64));
        let mut sample3 = || -> [f64; 3] {
            [
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            ]
        };
        let center = sample3().map(|v: f64| Grid::wrap(v * 2.0));
        let mut e1 = sample3();
        let norm1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
        for c in &mut e1 {
            *c /= norm1;
        }
        let mut e2 = sample3();
        let dot = e1[0] * e2[0] + e1[1] * e2[1] + e1[2] * e2[2];
        for c in 0..3 {
            e2[c] -= dot * e1[c];
        }
        let norm2 = (e2[0] * e2[0] + e2[1] * e2[1] + e2[2] * e2[2]).sqrt();
        for c in &mut e2 {
            *c /= norm2;
        }
        let radius = 0.8 + 0.6 * (j as f64 / count.max(1) as f64);
        let pts: Vec<[f64; 3]> = (0..=points)
            .map(|i| {
                let s = std::f64::consts::TAU * i as f64 / points as f64;
                let (cs, sn) = (s.cos(), s.sin());
                [
                    center[0] + radius * (cs * e1[0] + sn * e2[0]),
                    center[1] + radius * (cs * e1[1] + sn * e2[1]),
                    center[2] + radius * (cs * e1[2] + sn * e2[2]),
                ]
            })
            .collect();
        loops.push(pts);
    }
    loops
}

/// Per-slice diagnostics accumulated window by window: energy, divergence,
/// `∇A` statistics, Cauchy residual against the window-start datum, and the
/// circulation drift of transported loops. Usable as the `run_windowed`
/// observer.
pub struct DiagnosticsCollector {
    scheme: InterpScheme,
    loops: Vec<Vec<[f64; 3]>>,
    pub records: Vec<DiagnosticRecord>,
    pub grad_a_records: Vec<GradARecord>,
    /// Rows `(time, measured ‖∇(Y−id)‖_{0,α}, closed-form bound)`.
    pub bounds_rows: Vec<(f64, f64, f64)>,
    pub guard_trips: usize,
    pub windows: usize,
}

impl DiagnosticsCollector {
    pub fn new(master_seed: u64, scheme: InterpScheme) -> Self {
        Self {
            scheme,
            loops: seeded_loops(master_seed, TRACKED_LOOPS, LOOP_POINTS),
            records: Vec::new(),
            grad_a_records: Vec::new(),
            bounds_rows: Vec::new(),
            guard_trips: 0,
            windows: 0,
        }
    }

    /// Record the initial slice (time zero).
    pub fn record_initial(&mut self, u0: &VectorField) {
        self.records.push(DiagnosticRecord {
            time: 0.0,
            energy: u0.energy(),
            max_grad_a: 0.0,
            circulation_error: 0.0,
            cauchy_residual: 0.0,
            divergence_residual: u0.divergence_max_rel(),
        });
        self.grad_a_records.push(GradARecord {
            time: 0.0,
            max_dev: 0.0,
            median_dev: 0.0,
            q90_dev: 0.0,
        });
    }

    /// Observe one accepted window.
    pub fn observe(
        &mut self,
        state: &SolverState,
        event: &WindowEvent,
        accepted: usize,
    ) -> Result<()> {
        let u_start = &state.slices[0];
        let base_circ: Vec<f64> = self
            .loops
            .iter()
            .map(|l| diagnostics::circulation(u_start, l, self.scheme))
            .collect::<Result<_>>()?;
        for i in 1..=accepted {
            let t = state.time(i);
            let u_i = &state.slices[i];
            let a_rec = diagnostics::grad_a_record(t, &state.a_maps[i]);
            let cauchy = diagnostics::cauchy_vorticity_residual(u_i, &state.x_maps[i], u_start)?;
            let mut circ_err = 0.0f64;
            for (l, base) in self.loops.iter().zip(&base_circ) {
                let moved = state.x_maps[i].evaluate(l);
                let c = diagnostics::circulation(u_i, &moved, self.scheme)?;
                // Normalized so that the Kelvin budget |Δ| ≤ 1e-3|c₀| + 1e-6
                // reads as a plain ≤ 1e-3 on this column.
                circ_err = circ_err.max((c - base).abs() / (base.abs() + 1e-3));
            }
            self.records.push(DiagnosticRecord {
                time: t,
                energy: u_i.energy(),
                max_grad_a: a_rec.max_dev,
                circulation_error: circ_err,
                cauchy_residual: cauchy,
                divergence_residual: u_i.divergence_max_rel(),
            });
            self.grad_a_records.push(a_rec);
        }
        for (i, (measured, bound)) in state
            .grad_lambda_series
            .iter()
            .enumerate()
            .take(accepted + 1)
            .skip(1)
        {
            self.bounds_rows.push((state.time(i), *measured, *bound));
        }
        // Transport the loops to the window end.
        let x_end = &state.x_maps[accepted];
        for l in self.loops.iter_mut() {
            *l = x_end.evaluate(l);
        }
        self.windows += 1;
        if event.truncated {
            self.guard_trips += 1;
        }
        Ok(())
    }

    pub fn growth(&self, flag_rate: f64) -> GradAGrowth {
        diagnostics::grad_a_growth(&self.grad_a_records, GROWTH_FIT_WINDOW, flag_rate)
    }
}

/// Outcome of one ensemble member.
pub struct MemberResult {
    pub member: usize,
    pub seed: u64,
    pub events: Vec<WindowEvent>,
    pub records: Vec<DiagnosticRecord>,
    pub growth: GradAGrowth,
    /// Set when the member aborted with a numerical failure (the ensemble
    /// continues); I/O errors abort instead.
    pub failure: Option<String>,
}

fn fmt_bool(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write_events_csv(path: &Path, events: &[WindowEvent]) -> Result<()> {
    let mut w = fs::File::create(path)?;
    writeln!(
        w,
        "window_start,window_end,iterations,final_residual,max_guard,truncated"
    )?;
    for e in events {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            e.window_start,
            e.window_end,
            e.iterations,
            e.final_residual,
            e.max_guard,
            fmt_bool(e.truncated)
        )?;
    }
    Ok(())
}

pub fn write_diagnostics_csv(path: &Path, records: &[DiagnosticRecord]) -> Result<()> {
    let mut w = fs::File::create(path)?;
    writeln!(
        w,
        "time,energy,max_grad_a,circulation_error,cauchy_residual,divergence_residual"
    )?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.time,
            r.energy,
            r.max_grad_a,
            r.circulation_error,
            r.cauchy_residual,
            r.divergence_residual
        )?;
    }
    Ok(())
}

pub fn write_bounds_csv(path: &Path, rows: &[(f64, f64, f64)]) -> Result<()> {
    let mut w = fs::File::create(path)?;
    writeln!(w, "time,grad_lambda_measured,grad_lambda_bound_l0")?;
    for (t, m, b) in rows {
        writeln!(w, "{t},{m},{b}")?;
    }
    Ok(())
}

pub fn write_wiener_csv(path: &Path, wiener: &WienerPath) -> Result<()> {
    let mut w = fs::File::create(path)?;
    let k = wiener.k();
    let mut header = String::from("t");
    for i in 1..=k {
        header.push_str(&format!(",w{i}"));
    }
    writeln!(w, "{header}")?;
    if k == 0 {
        return Ok(());
    }
    for s in 0..=wiener.steps() {
        let mut row = format!("{}", wiener.time(s));
        for comp in 0..k {
            row.push_str(&format!(",{}", wiener.value(comp, s)));
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}

/// Run one member into `dir`, writing its event log, diagnostics, bound
/// comparison, Wiener path, and snapshots.
pub fn run_member(cfg: &RunConfig, member: usize, dir: &Path) -> Result<MemberResult> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    let grid = Grid::new(cfg.resolution)?;
    let u0 = cfg.scenario.build(grid)?;
    let model = build_noise_model(cfg, grid)?;
    let sc = solver_config(cfg, grid);

    let member_seed = cfg.member_seed(member);
    let horizon_steps = cfg.horizon_steps();
    let window_steps = cfg.window_steps();
    let path_steps = horizon_steps * cfg.noise.refine;
    let dt_path = cfg.dt_flow / cfg.noise.refine as f64;
    let wiener = if model.k() == 0 {
        WienerPath::zeros(dt_path, path_steps)
    } else {
        WienerPath::generate(
            model.k(),
            dt_path,
            path_steps,
            split_seed(member_seed, "wiener", 0),
        )
    };
    write_wiener_csv(&dir.join("wiener.csv"), &wiener)?;

    let mut collector = DiagnosticsCollector::new(cfg.noise.seed, cfg.interp);
    collector.record_initial(&u0);
    let run = solver::run_windowed(
        &u0,
        &model,
        &wiener,
        horizon_steps,
        window_steps,
        &sc,
        |state, event, accepted| collector.observe(state, event, accepted),
    );

    let (events, trajectory, failure) = match run {
        Ok(out) => (out.events, Some(out.trajectory), None),
        Err(
            e @ (Error::BlowUpSuspected { .. }
            | Error::VolumeDrift(_)
            | Error::StepSize { .. }
            | Error::NearSingularMap(_)
            | Error::NonConvergence { .. }),
        ) => (Vec::new(), None, Some(e.to_string())),
        Err(e) => return Err(e),
    };

    write_events_csv(&dir.join("events.csv"), &events)?;
    write_diagnostics_csv(&dir.join("diagnostics.csv"), &collector.records)?;
    write_bounds_csv(&dir.join("bounds.csv"), &collector.bounds_rows)?;
    if let Some(msg) = &failure {
        fs::write(dir.join("failure.txt"), format!("{msg}\n"))?;
    }
    if cfg.snapshot_stride > 0 {
        if let Some(traj) = &trajectory {
            let snap_dir = dir.join("snapshots");
            fs::create_dir_all(&snap_dir)?;
            for (i, slice) in traj.iter().enumerate() {
                if i % cfg.snapshot_stride == 0 || i == traj.len() - 1 {
                    io::write_field3(&snap_dir.join(format!("u_{i:06}.f3d")), slice)?;
                }
            }
        }
    }
    let growth = collector.growth(cfg.grad_a_flag_rate);
    Ok(MemberResult {
        member,
        seed: member_seed,
        events,
        records: collector.records,
        growth,
        failure,
    })
}

/// Cross-member summary of an ensemble run.
pub struct EnsembleSummary {
    pub members: Vec<MemberResult>,
    pub out_dir: PathBuf,
}

impl EnsembleSummary {
    pub fn failed_members(&self) -> usize {
        self.members.iter().filter(|m| m.failure.is_some()).count()
    }
}

fn write_summary(out_dir: &Path, members: &[MemberResult]) -> Result<()> {
    // Per-time energy statistics over the members that completed.
    let complete: Vec<&MemberResult> = members.iter().filter(|m| m.failure.is_none()).collect();
    let mut w = fs::File::create(out_dir.join("summary.csv"))?;
    writeln!(w, "time,energy_mean,energy_std,members")?;
    if let Some(first) = complete.first() {
        for (i, r) in first.records.iter().enumerate() {
            let vals: Vec<f64> = complete
                .iter()
                .filter_map(|m| m.records.get(i).map(|r| r.energy))
                .collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = if vals.len() > 1 {
                vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            writeln!(w, "{},{},{},{}", r.time, mean, var.sqrt(), vals.len())?;
        }
    }

    let mut s = fs::File::create(out_dir.join("ensemble_stats.csv"))?;
    writeln!(
        s,
        "member,seed,windows,guard_trips,failed,grad_a_growth_rate,growth_flagged"
    )?;
    for m in members {
        let trips = m.events.iter().filter(|e| e.truncated).count();
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            m.member,
            m.seed,
            m.events.len(),
            trips,
            fmt_bool(m.failure.is_some()),
            m.growth.fitted_rate.unwrap_or(f64::NAN),
            fmt_bool(m.growth.flagged)
        )?;
    }
    Ok(())
}

/// Run a single simulation (member 0 layout directly in the output dir).
pub fn run_single(cfg: &RunConfig) -> Result<MemberResult> {
    fs::create_dir_all(&cfg.output_dir)?;
    fs::write(cfg.output_dir.join("config.echo"), cfg.echo())?;
    run_member(cfg, 0, &cfg.output_dir)
}

/// Run all ensemble members (`member_XXX/` subdirectories) and write the
/// cross-member summary. Numerical failures are recorded per member; the
/// ensemble continues.
pub fn run_ensemble(cfg: &RunConfig) -> Result<EnsembleSummary> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    fs::write(cfg.output_dir.join("config.echo"), cfg.echo())?;
    let members: Vec<Result<MemberResult>> = (0..cfg.ensemble)
        .into_par_iter()
        .map(|m| {
            let dir = cfg.output_dir.join(format!("member_{m:03}"));
            run_member(cfg, m, &dir)
        })
        .collect();
    let members: Vec<MemberResult> = members.into_iter().collect::<Result<_>>()?;
    write_summary(&cfg.output_dir, &members)?;
    Ok(EnsembleSummary {
        members,
        out_dir: cfg.output_dir.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn small_cfg(out: &Path, extra: &str) -> RunConfig {
        let text = format!(
            "[run]\nresolution = 16\ndt_flow = 0.001953125\nwindow_length = 0.01\n\
             horizon = 0.02\noutput_dir = {}\n{extra}\n[scenario]\nname = abc\n\
             amp_a = 0.5\namp_b = 0.5\namp_c = 0.5\n",
            out.display()
        );
        parse_config(&text).unwrap()
    }

    #[test]
    fn single_run_produces_expected_layout() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_cfg(dir.path(), "snapshot_stride = 5\n");
        let result = run_single(&cfg).unwrap();
        assert!(result.failure.is_none());
        assert!(dir.path().join("config.echo").exists());
        assert!(dir.path().join("events.csv").exists());
        assert!(dir.path().join("diagnostics.csv").exists());
        assert!(dir.path().join("bounds.csv").exists());
        assert!(dir.path().join("wiener.csv").exists());
        assert!(dir.path().join("snapshots/u_000000.f3d").exists());
        assert!(dir.path().join("snapshots/u_000010.f3d").exists());
        // 2 windows of 5 steps each (0.01 / dt ≈ 5.12 → 5 steps).
        assert_eq!(result.events.len(), 2);
        // 11 records: initial + 10 slices.
        assert_eq!(result.records.len(), 11);
        DiagnosticRecord::validate_series(&result.records).unwrap();
    }

    #[test]
    fn ensemble_of_one_matches_single_run() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let cfg_a = small_cfg(dir_a.path(), "");
        let cfg_b = small_cfg(dir_b.path(), "ensemble = 1\n");
        run_single(&cfg_a).unwrap();
        run_ensemble(&cfg_b).unwrap();
        let a = fs::read_to_string(dir_a.path().join("diagnostics.csv")).unwrap();
        let b = fs::read_to_string(dir_b.path().join("member_000/diagnostics.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reruns_are_bit_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        // A stochastic configuration: constant noise exercises the whole
        // pathway.
        let noise = "[noise]\nkind = constant\nvector = 0,0,0.4\nseed = 11\n";
        let cfg_a = parse_config(&format!(
            "[run]\nresolution = 16\nwindow_length = 0.01\nhorizon = 0.01\noutput_dir = {}\n\
             [scenario]\nname = taylor-green\n{noise}",
            dir_a.path().display()
        ))
        .unwrap();
        let cfg_b = parse_config(&format!(
            "[run]\nresolution = 16\nwindow_length = 0.01\nhorizon = 0.01\noutput_dir = {}\n\
             [scenario]\nname = taylor-green\n{noise}",
            dir_b.path().display()
        ))
        .unwrap();
        run_single(&cfg_a).unwrap();
        run_single(&cfg_b).unwrap();
        for f in ["diagnostics.csv", "events.csv", "wiener.csv", "bounds.csv"] {
            let a = fs::read(dir_a.path().join(f)).unwrap();
            let b = fs::read(dir_b.path().join(f)).unwrap();
            assert_eq!(a, b, "{f} differs between identical runs");
        }
    }

    #[test]
    fn member_outputs_are_independent_of_ensemble_size() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let mk = |dir: &Path, members: usize| {
            parse_config(&format!(
                "[run]\nresolution = 16\nwindow_length = 0.01\nhorizon = 0.01\n\
                 ensemble = {members}\noutput_dir = {}\n\
                 [scenario]\nname = taylor-green\n\
                 [noise]\nkind = constant\nvector = 0,0,0.4\nseed = 3\n",
                dir.display()
            ))
            .unwrap()
        };
        run_ensemble(&mk(dir_a.path(), 2)).unwrap();
        run_ensemble(&mk(dir_b.path(), 4)).unwrap();
        for m in ["member_000", "member_001"] {
            let a = fs::read(dir_a.path().join(m).join("diagnostics.csv")).unwrap();
            let b = fs::read(dir_b.path().join(m).join("diagnostics.csv")).unwrap();
            assert_eq!(a, b, "{m} depends on the ensemble size");
        }
    }

    #[test]
    fn ensemble_summary_files_exist() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(&format!(
            "[run]\nresolution = 16\nwindow_length = 0.01\nhorizon = 0.01\nensemble = 2\n\
             output_dir = {}\n[scenario]\nname = abc\namp_a = 0.5\namp_b = 0.5\namp_c = 0.5\n\
             [noise]\nkind = constant\nvector = 0,0,0.3\nseed = 5\n",
            dir.path().display()
        ))
        .unwrap();
        let summary = run_ensemble(&cfg).unwrap();
        assert_eq!(summary.members.len(), 2);
        assert_eq!(summary.failed_members(), 0);
        assert!(dir.path().join("summary.csv").exists());
        assert!(dir.path().join("ensemble_stats.csv").exists());
        let s = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(s.lines().count() > 2);
    }
}
