//! Self-check suite: every check the project must pass runs through here,
//! both from `cargo test` (the `acceptance` integration target) and from the
//! CLI `verify` subcommand. Each criterion pins its tolerance in
//! [`Tolerances::default`]; a criterion fails rather than loosens.
//!
//! The two reference runs (deterministic ABC over two windows, and the
//! Taylor–Green run under constant-vector noise) are computed once and
//! shared by the criteria that inspect them.

use std::sync::{Arc, OnceLock};

use crate::config::{parse_config, RunConfig};
use crate::diagnostics::{self, KunitaStatus};
use crate::field::VectorField;
use crate::flow::FlowMap;
use crate::grid::Grid;
use crate::holder;
use crate::interp::InterpScheme;
use crate::noise::{self, split_seed, NoiseModel, WienerPath};
use crate::ops;
use crate::runner::{self, DiagnosticsCollector};
use crate::scenario;
use crate::solver::{self, SolverConfig, SolverState, WindowEvent};
use crate::{Error, Result};

/// Pinned pass thresholds. Defaults are the accepted contract; tests may
/// tamper with them to prove the checks bite.
#[derive(Debug, Clone)]
pub struct Tolerances {
    /// Projection idempotence / gradient annihilation / analytic flows.
    pub spectral_exact: f64,
    /// Lie-adjoint duality residual (relative).
    pub adjoint_duality: f64,
    /// Both vector-identity residuals (relative).
    pub vector_identity: f64,
    /// Steady-state relative L² drift.
    pub steady_drift: f64,
    /// Required Picard final residual per window.
    pub picard_residual: f64,
    /// Contraction-ratio ceiling.
    pub contraction_ratio: f64,
    /// Noise-translation equivalence, relative L².
    pub translation_equiv: f64,
    /// Kelvin circulation drift per window (normalized column).
    pub circulation: f64,
    /// Cauchy vorticity residual at window ends.
    pub cauchy: f64,
    /// Minimum observed order of the weak-form residual under dt halving.
    pub weak_form_order: f64,
    /// Admissible Richardson slope band for the deterministic pull-back
    /// expansion.
    pub kunita_slope: (f64, f64),
    /// A further Φ application may move the converged iterate by at most
    /// this multiple of the Picard tolerance.
    pub fixed_point_factor: f64,
    /// Window-restart consistency at the shared final time, relative L².
    pub restart_consistency: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            spectral_exact: 1e-12,
            adjoint_duality: 1e-8,
            vector_identity: 1e-8,
            steady_drift: 1e-3,
            picard_residual: 1e-6,
            contraction_ratio: 0.9,
            translation_equiv: 1e-3,
            circulation: 1e-3,
            cauchy: 1e-3,
            weak_form_order: 0.8,
            kunita_slope: (1.5, 2.5),
            fixed_point_factor: 2.0,
            restart_consistency: 5e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} [{}] {}: {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.details
        )
    }
}

pub const CRITERIA: [(usize, &str); 12] = [
    (1, "spectral correctness"),
    (2, "vector identities"),
    (3, "exact noise flows"),
    (4, "deterministic steady state"),
    (5, "noise-translation equivalence"),
    (6, "Kelvin circulation"),
    (7, "Cauchy vorticity residual"),
    (8, "weak-form residual convergence"),
    (9, "small-time pull-back statistics"),
    (10, "fixed-point self-consistency"),
    (11, "window-restart consistency"),
    (12, "reproducibility"),
];

pub fn criterion_name(id: usize) -> &'static str {
    CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .map(|(_, n)| *n)
        .unwrap_or("unknown")
}

const VERIFY_SEED: u64 = 42;
const N: usize = 32;
const DT: f64 = 1.0 / 512.0;
/// 26 flow steps ≈ the 0.05 window, kept dyadic so refinement studies share
/// end times exactly.
const WINDOW_STEPS: usize = 26;
const HORIZON4_STEPS: usize = 51; // ≈ 0.1

fn grid() -> Grid {
    Grid::new(N).expect("valid grid")
}

fn base_solver_config() -> SolverConfig {
    SolverConfig::new(grid(), DT)
}

/// Everything the run-inspecting criteria need from one reference run.
pub struct RunArtifacts {
    pub u0: VectorField,
    pub trajectory: Vec<VectorField>,
    pub events: Vec<WindowEvent>,
    pub residual_histories: Vec<Vec<f64>>,
    pub records: Vec<diagnostics::DiagnosticRecord>,
    pub first_window_slices: Vec<VectorField>,
    pub wiener: WienerPath,
}

type Shared<T> = OnceLock<std::result::Result<Arc<T>, String>>;

fn compute_run(
    u0: VectorField,
    model: &NoiseModel,
    wiener: WienerPath,
    horizon_steps: usize,
    window_steps: usize,
) -> Result<RunArtifacts> {
    let sc = base_solver_config();
    let mut collector = DiagnosticsCollector::new(VERIFY_SEED, sc.scheme);
    collector.record_initial(&u0);
    let mut residual_histories = Vec::new();
    let mut first_window_slices = Vec::new();
    let out = solver::run_windowed(
        &u0,
        model,
        &wiener,
        horizon_steps,
        window_steps,
        &sc,
        |state: &SolverState, event, accepted| {
            if residual_histories.is_empty() {
                first_window_slices = state.slices.clone();
            }
            residual_histories.push(state.residual_history.clone());
            collector.observe(state, event, accepted)
        },
    )?;
    Ok(RunArtifacts {
        u0,
        trajectory: out.trajectory,
        events: out.events,
        residual_histories,
        records: collector.records,
        first_window_slices,
        wiener,
    })
}

/// Deterministic reference run: ABC datum, K = 0, two windows over ≈ 0.1.
pub fn run4() -> Result<Arc<RunArtifacts>> {
    static CACHE: Shared<RunArtifacts> = OnceLock::new();
    CACHE
        .get_or_init(|| {
            let u0 = scenario::abc_field(grid(), 1.0, 1.0, 1.0);
            let model = NoiseModel::empty(grid(), InterpScheme::Tricubic);
            let wiener = WienerPath::zeros(DT, HORIZON4_STEPS);
            compute_run(u0, &model, wiener, HORIZON4_STEPS, WINDOW_STEPS)
                .map(Arc::new)
                .map_err(|e| e.to_string())
        })
        .clone()
        .map_err(Error::Config)
}

pub const RUN5_SIGMA: [f64; 3] = [0.0, 0.0, 0.5];

fn run5_model() -> Result<NoiseModel> {
    let v = RUN5_SIGMA;
    NoiseModel::from_fields(
        vec![VectorField::from_fn(grid(), |_| v)],
        vec![1.0],
        InterpScheme::Tricubic,
    )
}

/// Stochastic reference run: Taylor–Green datum, constant σ, one window.
pub fn run5() -> Result<Arc<RunArtifacts>> {
    static CACHE: Shared<RunArtifacts> = OnceLock::new();
    CACHE
        .get_or_init(|| {
            let build = || -> Result<RunArtifacts> {
                let u0 = scenario::taylor_green(grid(), 1.0);
                let model = run5_model()?;
                let wiener = WienerPath::generate(
                    1,
                    DT,
                    WINDOW_STEPS,
                    split_seed(VERIFY_SEED, "wiener", 0),
                );
                compute_run(u0, &model, wiener, WINDOW_STEPS, WINDOW_STEPS)
            };
            build().map(Arc::new).map_err(|e| e.to_string())
        })
        .clone()
        .map_err(Error::Config)
}

fn report(id: usize, passed: bool, details: String) -> CriterionReport {
    CriterionReport {
        id,
        name: criterion_name(id),
        passed,
        details,
    }
}

fn rel_l2(a: &VectorField, b: &VectorField) -> Result<f64> {
    Ok(a.sub(b)?.l2_norm() / b.l2_norm().max(1e-300))
}

// --- criterion 1 -----------------------------------------------------------

fn criterion_1(tol: &Tolerances, _quick: bool) -> Result<CriterionReport> {
    let g = grid();
    let mut worst: Vec<(String, f64, f64)> = Vec::new();

    // Gradient fields project to zero; projection is idempotent.
    let gradient = VectorField::from_fn(g, |[x, y, _]| {
        [(x).cos() * (y).sin(), (x).sin() * (y).cos(), 0.0] // ∇(sin x sin y)
    });
    let killed = ops::leray_project(&gradient)?.max_norm() / gradient.max_norm();
    worst.push(("gradient annihilation".into(), killed, tol.spectral_exact));

    let f = scenario::random_band_limited(g, 3, 1.0, split_seed(VERIFY_SEED, "c1", 0))?;
    let raw = VectorField::from_fn(g, |[x, y, z]| {
        [(x + y).sin(), (y - 2.0 * z).cos(), (x * 1.0).sin() * z.cos()]
    });
    for (name, field) in [("solenoidal", &f), ("generic", &raw)] {
        let p1 = ops::leray_project(field)?;
        let p2 = ops::leray_project(&p1)?;
        let idem = p2.max_distance(&p1)? / p1.max_norm().max(1e-300);
        worst.push((format!("idempotence ({name})"), idem, tol.spectral_exact));
    }

    let abc = scenario::abc_field(g, 1.0, 1.0, 1.0);
    let curl_err = ops::curl(&abc)?.max_distance(&abc)? / abc.max_norm();
    worst.push(("curl(ABC) = ABC".into(), curl_err, tol.spectral_exact));

    let mut max_duality = 0.0f64;
    for i in 0..10 {
        let sigma = scenario::random_band_limited(g, 3, 1.0, split_seed(VERIFY_SEED, "c1-s", i))?;
        let v = scenario::random_band_limited(g, 3, 1.2, split_seed(VERIFY_SEED, "c1-v", i))?;
        let w = scenario::random_band_limited(g, 3, 1.0, split_seed(VERIFY_SEED, "c1-w", i))?;
        let lhs = ops::lie_adjoint(&sigma, &v)?.inner(&w)?;
        let rhs = v.inner(&ops::lie_derivative(&sigma, &w)?)?;
        max_duality = max_duality.max((lhs + rhs).abs() / (v.l2_norm() * w.l2_norm()));
    }
    worst.push(("adjoint duality".into(), max_duality, tol.adjoint_duality));

    let passed = worst.iter().all(|(_, v, t)| v <= t);
    let details = worst
        .iter()
        .map(|(n, v, t)| format!("{n} {v:.2e} (tol {t:.0e})"))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(report(1, passed, details))
}

// --- criterion 2 -----------------------------------------------------------

fn criterion_2(tol: &Tolerances, _quick: bool) -> Result<CriterionReport> {
    let g = grid();
    let mut max_b = 0.0f64;
    let mut max_a = 0.0f64;
    for i in 0..5 {
        let u = scenario::random_band_limited(g, 3, 1.0, split_seed(VERIFY_SEED, "c2-u", i))?;
        let sigma = scenario::random_band_limited(g, 3, 1.5, split_seed(VERIFY_SEED, "c2-s", i))?;
        let rep = ops::verify_vector_identities(&u, &sigma)?;
        max_b = max_b.max(rep.bernoulli_residual);
        max_a = max_a.max(rep.adjoint_residual);
    }
    let passed = max_b <= tol.vector_identity && max_a <= tol.vector_identity;
    Ok(report(
        2,
        passed,
        format!(
            "rotational-form residual {max_b:.2e}, adjoint-form residual {max_a:.2e} (tol {:.0e})",
            tol.vector_identity
        ),
    ))
}

// --- criterion 3 -----------------------------------------------------------

fn criterion_3(tol: &Tolerances, _quick: bool) -> Result<CriterionReport> {
    let g = grid();
    let steps = 100;
    let scheme = InterpScheme::Tricubic;

    // Constant field: exact translation.
    let c = [0.0, 0.0, 0.8];
    let model = NoiseModel::from_fields(vec![VectorField::from_fn(g, |_| c)], vec![1.0], scheme)?;
    let path = WienerPath::generate(1, DT, steps, split_seed(VERIFY_SEED, "c3", 0));
    let maps = noise::noise_flow_slices(&model, &path, 0, steps, 1, &FlowMap::identity(g, scheme))?;
    let w = path.value(0, steps);
    let expect = FlowMap::translation(g, [0.0, 0.0, c[2] * w], scheme);
    let mut worst_pos = maps
        .last()
        .unwrap()
        .displacement()
        .max_distance(expect.displacement())?;
    let mut worst_jac = maps.last().unwrap().jacobian().max_deviation_from_identity();

    // Shear field: x₂ invariant, Heun exact pathwise.
    let f_amp = 0.7;
    let sigma = VectorField::from_fn(g, |[_, y, _]| [f_amp * y.sin(), 0.0, 0.0]);
    let model = NoiseModel::from_fields(vec![sigma], vec![1.0], scheme)?;
    let path = WienerPath::generate(1, DT, steps, split_seed(VERIFY_SEED, "c3", 1));
    let maps = noise::noise_flow_slices(&model, &path, 0, steps, 1, &FlowMap::identity(g, scheme))?;
    let w = path.value(0, steps);
    let last = maps.last().unwrap();
    let expect_disp = VectorField::from_fn(g, |[_, y, _]| [f_amp * y.sin() * w, 0.0, 0.0]);
    worst_pos = worst_pos.max(last.displacement().max_distance(&expect_disp)?);
    let mut jac_err = 0.0f64;
    for (i, p) in g.points() {
        let j = last.jacobian().at(i);
        let expect_01 = w * f_amp * p[1].cos();
        for r in 0..3 {
            for cc in 0..3 {
                let want = if r == cc {
                    1.0
                } else if (r, cc) == (0, 1) {
                    expect_01
                } else {
                    0.0
                };
                jac_err = jac_err.max((j[r][cc] - want).abs());
            }
        }
    }
    worst_jac = worst_jac.max(jac_err);

    let passed = worst_pos <= tol.spectral_exact && worst_jac <= tol.spectral_exact;
    Ok(report(
        3,
        passed,
        format!(
            "position error {worst_pos:.2e}, Jacobian error {worst_jac:.2e} over {steps} steps (tol {:.0e})",
            tol.spectral_exact
        ),
    ))
}

// --- criterion 4 -----------------------------------------------------------

fn criterion_4(tol: &Tolerances, _quick: bool) -> Result<CriterionReport> {
    let art = run4()?;
    let mut drift = 0.0f64;
    for slice in &art.trajectory {
        drift = drift.max(rel_l2(slice, &art.u0)?);
    }
    let worst_residual = art
        .events
        .iter()
        .map(|e| e.final_residual)
        .fold(0.0f64, f64::max);
    let mut worst_ratio = 0.0f64;
    for h in &art.residual_histories {
        worst_ratio = worst_ratio.max(solver::contraction_monitor(h).max_ratio);
    }
    let passed = drift <= tol.steady_drift
        && worst_residual <= tol.picard_residual
        && worst_ratio <= tol.contraction_ratio
        && art.events.len() == 2;
    Ok(report(
        4,
        passed,
        format!(
            "L² drift {drift:.2e} (tol {:.0e}), worst residual {worst_residual:.2e} (tol {:.0e}), worst ratio {worst_ratio:.2} (tol {}), {} windows",
            tol.steady_drift,
            tol.picard_residual,
            tol.contraction_ratio,
            art.events.len()
        ),
    ))
}

// --- criterion 5 -----------------------------------------------------------

fn criterion_5(tol: &Tolerances, _quick: bool) -> Result<CriterionReport> {
    let art5 = run5()?;
    // Deterministic companion with the same datum.
    let u0 = scenario::taylor_green(grid(), 1.0);
    let det_model = NoiseModel::empty(grid(), InterpScheme::Tricubic);
    let det_path = WienerPath::zeros(DT, WINDOW_STEPS);
    let sc = base_solver_config();
    let det = solver::run_windowed(
        &u0,
        &det_model,
        &det_path,
        WINDOW_STEPS,
        WINDOW_STEPS,
        &sc,
        |_, _, _| Ok(()),
    )?;

    let sample_slices = [5usize, 10, 15, 20, WINDOW_STEPS];
    let mut worst = 0.0f64;
    for &s in &sample_slices {
        let w_t = art5.wiener.value(0, s);
        let a = [
            RUN5_SIGMA[0] * w_t,
            RUN5_SIGMA[1] * w_t,
            RUN5_SIGMA[2] * w_t,
        ];
        // The stochastic solution is the deterministic one composed with
        // x ↦ x − σW_t.
        let shifted = det.trajectory[s].shift([-a[0], -a[1], -a[2]]);
        worst = worst.max(rel_l2(&art5.trajectory[s], &shifted)?);
    }
    let passed = worst <= tol.translation_equiv;
    Ok(report(
        5,
        passed,
        format!(
            "worst relative L² mismatch {worst:.2e} over {} sample times (tol {:.0e})",
            sample_slices.len(),
            tol.translation_equiv
        ),
    ))
}

// --- criteria 6 & 7 --------------------------------------------------------

fn criterion_6(tol: &Tolerances, _quick: bool) -> Result<CriterionReport> {
    let mut worst = 0.0f64;
    for art in [run4()?, run5()?] {
        for r in &art.records {
            worst = worst.max(r.circulation_error);
        }
    }
    let passed = worst <= tol.circulation;
    Ok(report(
        6,
        passed,
        format!(
            "worst normalized circulation drift {worst:.2e} over {} tracked loops (tol {:.0e})",
            runner::TRACKED_LOOPS,
            tol.circulation
        ),
    ))
}

fn criterion_7(tol: &Tolerances, _quick: bool) -> Result<CriterionReport> {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for art in [run4()?, run5()?] {
        for e in &art.events {
            let rec = art
                .records
                .iter()
                .min_by(|a, b| {
                    let da = (a.time - e.window_end).abs();
                    let db = (b.time - e.window_end).abs();
                    da.partial_cmp(&db).expect("finite times")
                })
                .expect("records present");
            worst = worst.max(rec.cauchy_residual);
            checked += 1;
        }
    }
    let passed = worst <= tol.cauchy;
    Ok(report(
        7,
        passed,
        format!("worst Cauchy residual {worst:.2e} at {checked} window ends (tol {:.0e})",
            tol.cauchy),
    ))
}

// --- criterion 8 -----------------------------------------------------------

fn criterion_8(tol: &Tolerances, quick: bool) -> Result<CriterionReport> {
    let g = grid();
    let u0 = scenario::taylor_green(g, 1.0);
    let model = run5_model()?;
    let levels: usize = if quick { 2 } else { 3 };
    // Shared fine path: every level sums the same increments.
    let finest_sub = 1 << (levels - 1);
    let fine_steps = WINDOW_STEPS * finest_sub;
    let dt_path = DT / finest_sub as f64;
    let path = WienerPath::generate(1, dt_path, fine_steps, split_seed(VERIFY_SEED, "c8", 0));

    let test_fields: Vec<VectorField> = (0..10)
        .map(|i| scenario::random_band_limited(g, 3, 1.0, split_seed(VERIFY_SEED, "c8-v", i)))
        .collect::<Result<_>>()?;

    let mut max_residuals = Vec::new();
    for level in 0..levels {
        let refine = 1 << level; // slices per coarse step
        let mut sc = base_solver_config();
        sc.dt = DT / refine as f64;
        let window = WINDOW_STEPS * refine;
        let state = solver::picard_solve(&u0, &model, &path, 0, window, &sc)?;
        let res = diagnostics::weak_form_residual(
            &state.slices,
            sc.dt,
            &model,
            &path,
            &test_fields,
            window,
        )?;
        max_residuals.push(res.into_iter().fold(0.0f64, f64::max));
    }
    let mut orders = Vec::new();
    for w in max_residuals.windows(2) {
        orders.push((w[0] / w[1]).log2());
    }
    let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    let passed = min_order >= tol.weak_form_order;
    Ok(report(
        8,
        passed,
        format!(
            "residuals {:?}, observed orders {:?}, min {min_order:.2} (tol >= {})",
            max_residuals
                .iter()
                .map(|r| format!("{r:.3e}"))
                .collect::<Vec<_>>(),
            orders.iter().map(|o| format!("{o:.2}")).collect::<Vec<_>>(),
            tol.weak_form_order
        ),
    ))
}

// --- criterion 9 -----------------------------------------------------------

fn criterion_9(tol: &Tolerances, quick: bool) -> Result<CriterionReport> {
    let g = grid();
    let samples = if quick { 128 } else { 512 };
    let u = scenario::abc_field(g, 0.5, 0.5, 0.5);
    let v = scenario::random_band_limited(g, 2, 1.0, split_seed(VERIFY_SEED, "c9-v", 0))?;

    // Single non-constant mode, modest amplitude.
    let sigma = VectorField::from_fn(g, |[_, y, z]| [0.4 * (y + z).sin(), 0.0, 0.0]);
    let model = NoiseModel::from_fields(vec![sigma], vec![1.0], InterpScheme::Tricubic)?;
    // One call checks both horizons 0.01 and 0.005.
    let stochastic = diagnostics::kunita_small_time_check(
        &model,
        &u,
        &v,
        0.01,
        samples,
        DT,
        split_seed(VERIFY_SEED, "c9", 1),
        InterpScheme::Tricubic,
    )?;

    let det_model = NoiseModel::empty(g, InterpScheme::Tricubic);
    let deterministic = diagnostics::kunita_small_time_check(
        &det_model,
        &u,
        &v,
        0.01,
        1,
        DT,
        split_seed(VERIFY_SEED, "c9", 2),
        InterpScheme::Tricubic,
    )?;

    let (lo, hi) = tol.kunita_slope;
    let slope_ok = deterministic.richardson_slope >= lo && deterministic.richardson_slope <= hi;
    let passed = stochastic.status == KunitaStatus::Pass && slope_ok;
    Ok(report(
        9,
        passed,
        format!(
            "stochastic: dev {:.2e} vs 3se {:.2e} at t=0.01, dev {:.2e} vs 3se {:.2e} at t=0.005 ({:?}, {} samples); deterministic slope {:.2} in [{lo}, {hi}]",
            stochastic.at_t.l2_deviation,
            3.0 * stochastic.at_t.l2_std_error,
            stochastic.at_half_t.l2_deviation,
            3.0 * stochastic.at_half_t.l2_std_error,
            stochastic.status,
            samples,
            deterministic.richardson_slope
        ),
    ))
}

// --- criterion 10 ----------------------------------------------------------

fn criterion_10(tol: &Tolerances, _quick: bool) -> Result<CriterionReport> {
    let sc = base_solver_config();
    let mut worst = 0.0f64;

    for (art, model, wiener) in [
        (
            run4()?,
            NoiseModel::empty(grid(), InterpScheme::Tricubic),
            WienerPath::zeros(DT, HORIZON4_STEPS),
        ),
        (run5()?, run5_model()?, run5()?.wiener.clone()),
    ] {
        let window_steps = art.first_window_slices.len() - 1;
        let phi = noise::noise_flow_slices(
            &model,
            &wiener,
            0,
            window_steps,
            1,
            &FlowMap::identity(grid(), sc.scheme),
        )?;
        let out = solver::apply_phi(&art.first_window_slices, &phi, &art.u0, &sc)?;
        for (a, b) in out.slices.iter().zip(&art.first_window_slices) {
            let d = holder::holder_distance(a, b, sc.l, sc.alpha, &sc.policy)?;
            worst = worst.max(d.value);
        }
    }
    let budget = tol.fixed_point_factor * sc.picard_tol;
    let passed = worst <= budget;
    Ok(report(
        10,
        passed,
        format!("extra Φ application moved the iterate by {worst:.2e} (budget {budget:.1e})"),
    ))
}

// --- criterion 11 ----------------------------------------------------------

fn criterion_11(tol: &Tolerances, _quick: bool) -> Result<CriterionReport> {
    let art = run4()?;
    // Same horizon solved as a single long window.
    let model = NoiseModel::empty(grid(), InterpScheme::Tricubic);
    let path = WienerPath::zeros(DT, HORIZON4_STEPS);
    let sc = base_solver_config();
    let single = solver::run_windowed(
        &art.u0,
        &model,
        &path,
        HORIZON4_STEPS,
        HORIZON4_STEPS,
        &sc,
        |_, _, _| Ok(()),
    )?;
    let err = rel_l2(
        single.trajectory.last().expect("slices"),
        art.trajectory.last().expect("slices"),
    )?;
    let passed = err <= tol.restart_consistency && single.events.len() == 1;
    Ok(report(
        11,
        passed,
        format!(
            "windowed vs single-window relative L² difference {err:.2e} at t = {:.4} (tol {:.0e})",
            HORIZON4_STEPS as f64 * DT,
            tol.restart_consistency
        ),
    ))
}

// --- criterion 12 ----------------------------------------------------------

fn run5_config_text(out_dir: &std::path::Path) -> String {
    format!(
        "[run]\nresolution = {N}\ndt_flow = {DT}\nwindow_length = 0.05\nhorizon = 0.05\n\
         output_dir = {}\n[scenario]\nname = taylor-green\n\
         [noise]\nkind = constant\nvector = 0,0,0.5\nseed = {VERIFY_SEED}\n",
        out_dir.display()
    )
}

fn criterion_12(_tol: &Tolerances, _quick: bool) -> Result<CriterionReport> {
    let base = std::env::temp_dir().join(format!("verify-repro-{}", std::process::id()));
    let mut digests = Vec::new();
    for attempt in 0..2 {
        let dir = base.join(format!("attempt{attempt}"));
        let cfg: RunConfig = parse_config(&run5_config_text(&dir))?;
        runner::run_single(&cfg)?;
        digests.push(std::fs::read(dir.join("diagnostics.csv"))?);
    }
    let identical = digests[0] == digests[1];
    std::fs::remove_dir_all(&base).ok();
    Ok(report(
        12,
        identical,
        format!(
            "diagnostics.csv {} bytes, bit-identical across reruns: {identical}",
            digests[0].len()
        ),
    ))
}

/// Run one criterion by id.
pub fn run_criterion(id: usize, tol: &Tolerances, quick: bool) -> Result<CriterionReport> {
    match id {
        1 => criterion_1(tol, quick),
        2 => criterion_2(tol, quick),
        3 => criterion_3(tol, quick),
        4 => criterion_4(tol, quick),
        5 => criterion_5(tol, quick),
        6 => criterion_6(tol, quick),
        7 => criterion_7(tol, quick),
        8 => criterion_8(tol, quick),
        9 => criterion_9(tol, quick),
        10 => criterion_10(tol, quick),
        11 => criterion_11(tol, quick),
        12 => criterion_12(tol, quick),
        other => Err(Error::Config(format!("no criterion {other}"))),
    }
}

/// Run a set of criteria (all of them when `ids` is empty), returning the
/// reports in id order.
pub fn run_suite(ids: &[usize], tol: &Tolerances, quick: bool) -> Result<Vec<CriterionReport>> {
    let selected: Vec<usize> = if ids.is_empty() {
        CRITERIA.iter().map(|(i, _)| *i).collect()
    } else {
        let mut v = ids.to_vec();
        v.sort_unstable();
        v.dedup();
        v
    };
    selected
        .into_iter()
        .map(|id| run_criterion(id, tol, quick))
        .collect()
}
