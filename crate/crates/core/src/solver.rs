//! The Lagrangian fixed-point engine.
//!
//! One window `[t_a, t_b]` is solved by Picard iteration of the map Φ that
//! sends a candidate velocity trajectory `{u_t}` to the reconstruction
//!
//! ```text
//! ũ_t = (φ_t⁻¹)_* u_t           pull the drift back through the noise flow
//! Ẏ_t = ũ_t(Y_t), Y_{t_a} = id  random ODE for the remaining flow
//! X_t = φ_t ∘ Y_t               full particle flow
//! û_t = P[(∇X_t⁻¹)ᵀ u₀ ∘ X_t⁻¹] Weber reconstruction from labels
//! ```
//!
//! Iteration starts from the constant-in-time extension of the window's
//! initial datum and stops when consecutive iterates are closer than
//! `picard_tol` in the monitored Hölder norm. Windows are chained by
//! `run_windowed`, which truncates a window early whenever the estimate of
//! `‖∇(X_t⁻¹ − id)‖_{l,α}` exceeds the guard threshold and restarts from the
//! truncation time with fresh flows (the Wiener path continues globally).

use crate::field::mat3;
use crate::field::{MatrixField, VectorField};
use crate::flow::{self, FlowMap, SampledField};
use crate::grid::Grid;
use crate::holder::{self, HolderEstimate, PairPolicy};
use crate::interp::InterpScheme;
use crate::noise::{self, NoiseModel, WienerPath};
use crate::ops;
use crate::{Error, Result};

/// Parameters of the windowed Picard solver.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Flow step and slice spacing (one velocity slice per flow step).
    pub dt: f64,
    /// Stop when consecutive iterates differ by at most this much in the
    /// monitored Hölder norm.
    pub picard_tol: f64,
    pub max_iter: usize,
    /// Restart threshold on the `‖∇(A − id)‖_{l,α}` estimate.
    pub guard_threshold: f64,
    /// Hölder order of the contraction norm; slices are monitored in
    /// `C^{l+1,α}`.
    pub l: usize,
    pub alpha: f64,
    /// Working-radius factor: the norm bound is
    /// `u_bound_factor · ‖u₀‖_{l+1,α}`, exceedance is logged, not fatal.
    pub u_bound_factor: f64,
    pub scheme: InterpScheme,
    pub policy: PairPolicy,
}

impl SolverConfig {
    pub fn new(grid: Grid, dt: f64) -> Self {
        Self {
            dt,
            picard_tol: 1e-6,
            max_iter: 25,
            guard_threshold: 1.0,
            l: 1,
            alpha: 0.5,
            u_bound_factor: 16.0,
            scheme: InterpScheme::Tricubic,
            policy: PairPolicy::default_strided(grid),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return Err(Error::BadAlpha(self.alpha));
        }
        if self.l + 1 > holder::DEFAULT_MAX_DERIVATIVE_ORDER {
            return Err(Error::DerivativeOrder {
                requested: self.l + 1,
                max: holder::DEFAULT_MAX_DERIVATIVE_ORDER,
            });
        }
        Ok(())
    }
}

/// Weber operator `W(ℓ, v) = P[(I + ∇ℓ)ᵀ v]` with `∇ℓ` computed spectrally
/// from the displacement.
pub fn weber(ell: &VectorField, v: &VectorField) -> Result<VectorField> {
    ell.ensure_same_grid(v)?;
    ell.ensure_finite("Weber displacement")?;
    v.ensure_finite("Weber field")?;
    let grid = v.grid();
    let grad = ops::gradient(ell);
    let mut comps = [
        vec![0.0; grid.len()],
        vec![0.0; grid.len()],
        vec![0.0; grid.len()],
    ];
    for i in 0..grid.len() {
        let g = grad.at(i);
        let vv = v.at(i);
        let gv = mat3::transpose_mul_vec(&g, &vv);
        for c in 0..3 {
            comps[c][i] = vv[c] + gv[c];
        }
    }
    ops::leray_project(&VectorField::from_components(grid, comps)?)
}

/// Output of one application of Φ.
pub struct PhiOutput {
    pub slices: Vec<VectorField>,
    pub x_maps: Vec<FlowMap>,
    pub a_maps: Vec<FlowMap>,
    pub y_maps: Vec<FlowMap>,
    pub u_tilde: Vec<SampledField>,
}

/// One application of the window map Φ. `phi_slices[i]` is the noise flow at
/// slice `i`; the first entry must be the identity (flows are reset at the
/// window start, which pins `û` at `t_a` to `u₀`).
pub fn apply_phi(
    u_slices: &[VectorField],
    phi_slices: &[FlowMap],
    u0: &VectorField,
    cfg: &SolverConfig,
) -> Result<PhiOutput> {
    cfg.validate()?;
    if u_slices.len() != phi_slices.len() || u_slices.len() < 2 {
        return Err(Error::Config(format!(
            "need equal slice counts >= 2, got {} velocity and {} flow slices",
            u_slices.len(),
            phi_slices.len()
        )));
    }
    if phi_slices[0].max_displacement() > 1e-12 {
        return Err(Error::Config(
            "the noise flow must start from the identity at the window start".into(),
        ));
    }
    u0.ensure_divergence_free(1e-8)?;

    // Pull the drift back through the noise flow, slice by slice.
    let mut u_tilde = Vec::with_capacity(u_slices.len());
    for (u, phi) in u_slices.iter().zip(phi_slices) {
        let pulled = flow::pullback_field(phi, u)?;
        u_tilde.push(SampledField::new(pulled, cfg.scheme));
    }

    // Random ODE for Y, with the variational Jacobian.
    let refs: Vec<&SampledField> = u_tilde.iter().collect();
    let y_maps = flow::integrate_drift_flow(&refs, cfg.dt)?;

    // Per slice: X = φ∘Y, A = X⁻¹, û = P[(∇A)ᵀ u₀∘A].
    let u0_interp = flow::vector_interpolant(u0, cfg.scheme);
    let mut slices = Vec::with_capacity(u_slices.len());
    let mut x_maps = Vec::with_capacity(u_slices.len());
    let mut a_maps = Vec::with_capacity(u_slices.len());
    a_maps.push(FlowMap::identity(u0.grid(), cfg.scheme));
    for i in 0..u_slices.len() {
        let x = FlowMap::compose(&phi_slices[i], &y_maps[i])?;
        if i == 0 {
            // X at the window start is the identity; the reconstruction
            // returns the initial datum exactly.
            slices.push(u0.clone());
        } else {
            let a = x.invert()?;
            let integrand = flow::pushforward_with_interp(&a, &u0_interp)?;
            slices.push(ops::leray_project(&integrand)?);
            a_maps.push(a);
        }
        x_maps.push(x);
    }
    Ok(PhiOutput {
        slices,
        x_maps,
        a_maps,
        y_maps,
        u_tilde,
    })
}

/// Converged state of one window.
pub struct SolverState {
    pub t_start: f64,
    pub dt: f64,
    /// `u_t` at each slice of the window (first entry the initial datum).
    pub slices: Vec<VectorField>,
    /// Particle flow `X_t` per slice (from the window start).
    pub x_maps: Vec<FlowMap>,
    /// Back-to-labels map `A_t = X_t⁻¹` per slice.
    pub a_maps: Vec<FlowMap>,
    /// `sup_t` Hölder distance between consecutive iterates, per iteration.
    pub residual_history: Vec<f64>,
    /// `‖∇(A_t − id)‖_{l,α}` estimate per slice (the restart monitor).
    pub guard_series: Vec<f64>,
    /// `‖u_t‖_{l+1,α}` estimate per slice of the converged iterate.
    pub norm_series: Vec<f64>,
    /// Measured `‖∇(Y_t − id)‖_{0,α}` against the closed-form first-order
    /// bound `2 t Ũ_t e^{(2+α) t Ũ_t}`, per slice.
    pub grad_lambda_series: Vec<(f64, f64)>,
    pub u_bound: f64,
    pub u_bound_exceeded: bool,
    pub iterations: usize,
    pub final_residual: f64,
}

impl SolverState {
    pub fn window_steps(&self) -> usize {
        self.slices.len() - 1
    }

    pub fn time(&self, slice: usize) -> f64 {
        self.t_start + slice as f64 * self.dt
    }

    pub fn max_guard(&self) -> f64 {
        self.guard_series.iter().cloned().fold(0.0, f64::max)
    }
}

fn jac_deviation_field(map: &FlowMap) -> MatrixField {
    let grid = map.grid();
    let mut dev = MatrixField::zeros(grid);
    for i in 0..grid.len() {
        let mut m = map.jacobian().at(i);
        for r in 0..3 {
            m[r][r] -= 1.0;
        }
        dev.set_at(i, &m);
    }
    dev
}

/// Guard value `‖∇(map − id)‖_{l,α}` from the stored Jacobian.
pub fn guard_estimate(map: &FlowMap, cfg: &SolverConfig) -> Result<HolderEstimate> {
    holder::holder_norm_matrix(&jac_deviation_field(map), cfg.l, cfg.alpha, &cfg.policy)
}

/// Picard iteration of Φ on a window whose noise flow is already available.
/// The initial guess is the constant-in-time extension of `u0`.
pub fn picard_solve_with_flows(
    u0: &VectorField,
    phi_slices: &[FlowMap],
    t_start: f64,
    cfg: &SolverConfig,
) -> Result<SolverState> {
    cfg.validate()?;
    let n_slices = phi_slices.len();
    let u0_norm = holder::holder_norm(u0, cfg.l + 1, cfg.alpha, &cfg.policy)?.value;
    let u_bound = cfg.u_bound_factor * u0_norm;

    let mut current: Vec<VectorField> = vec![u0.clone(); n_slices];
    let mut residual_history = Vec::new();
    let mut last: Option<PhiOutput> = None;
    let mut converged = false;

    for _ in 0..cfg.max_iter {
        let out = apply_phi(&current, phi_slices, u0, cfg)?;
        let mut residual = 0.0f64;
        for (new_u, old_u) in out.slices.iter().zip(&current) {
            let d = holder::holder_distance(new_u, old_u, cfg.l, cfg.alpha, &cfg.policy)?;
            residual = residual.max(d.value);
        }
        residual_history.push(residual);
        current = out.slices.clone();
        last = Some(out);
        if residual <= cfg.picard_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            max_iter: cfg.max_iter,
            history: residual_history,
        });
    }
    let out = last.expect("at least one iteration ran");

    // Post-convergence monitors on the accepted iterate.
    let mut guard_series = Vec::with_capacity(n_slices);
    let mut norm_series = Vec::with_capacity(n_slices);
    let mut grad_lambda_series = Vec::with_capacity(n_slices);
    let mut u_tilde_sup = 0.0f64;
    for i in 0..n_slices {
        guard_series.push(guard_estimate(&out.a_maps[i], cfg)?.value);
        norm_series.push(holder::holder_norm(&out.slices[i], cfg.l + 1, cfg.alpha, &cfg.policy)?.value);
        // Closed-form first-order bound on ∇(Y − id) at l = 0, logged
        // against the measured value.
        let est = holder::holder_norm(out.u_tilde[i].field(), 1, cfg.alpha, &cfg.policy)?;
        u_tilde_sup = u_tilde_sup.max(est.value);
        let t = i as f64 * cfg.dt;
        let bound = 2.0 * t * u_tilde_sup * ((2.0 + cfg.alpha) * t * u_tilde_sup).exp();
        let measured = holder::holder_norm_matrix(
            &jac_deviation_field(&out.y_maps[i]),
            0,
            cfg.alpha,
            &cfg.policy,
        )?
        .value;
        grad_lambda_series.push((measured, bound));
    }
    let u_bound_exceeded = norm_series.iter().any(|&v| v > u_bound);
    let final_residual = *residual_history.last().expect("non-empty history");
    let iterations = residual_history.len();

    Ok(SolverState {
        t_start,
        dt: cfg.dt,
        slices: current,
        x_maps: out.x_maps,
        a_maps: out.a_maps,
        residual_history,
        guard_series,
        norm_series,
        grad_lambda_series,
        u_bound,
        u_bound_exceeded,
        iterations,
        final_residual,
    })
}

/// Build the window's noise flow and run the Picard iteration.
/// `start_step`/`window_steps` are in flow steps of size `cfg.dt`; the
/// Wiener path may be finer (its step must divide `cfg.dt`).
pub fn picard_solve(
    u0: &VectorField,
    noise_model: &NoiseModel,
    path: &WienerPath,
    start_step: usize,
    window_steps: usize,
    cfg: &SolverConfig,
) -> Result<SolverState> {
    cfg.validate()?;
    let substeps = substeps_per_flow_step(path, cfg)?;
    let identity = FlowMap::identity(u0.grid(), cfg.scheme);
    let phi_slices = noise::noise_flow_slices(
        noise_model,
        path,
        start_step * substeps,
        window_steps,
        substeps,
        &identity,
    )?;
    picard_solve_with_flows(u0, &phi_slices, start_step as f64 * cfg.dt, cfg)
}

pub fn substeps_per_flow_step(path: &WienerPath, cfg: &SolverConfig) -> Result<usize> {
    let ratio = cfg.dt / path.dt();
    let substeps = ratio.round();
    if substeps < 1.0 || (ratio - substeps).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "the path step {} must divide the flow step {}",
            path.dt(),
            cfg.dt
        )));
    }
    Ok(substeps as usize)
}

/// Geometric decay of the Picard residuals.
#[derive(Debug, Clone)]
pub struct ContractionReport {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// Set when any ratio exceeds 0.9: the window is too long for a healthy
    /// contraction margin.
    pub flagged: bool,
}

pub const CONTRACTION_FLAG_THRESHOLD: f64 = 0.9;

pub fn contraction_monitor(residuals: &[f64]) -> ContractionReport {
    let mut ratios = Vec::new();
    for w in residuals.windows(2) {
        if w[0] > 0.0 {
            ratios.push(w[1] / w[0]);
        }
    }
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    ContractionReport {
        ratios,
        max_ratio,
        flagged: max_ratio > CONTRACTION_FLAG_THRESHOLD,
    }
}

/// One row of the windowed run's event log.
#[derive(Debug, Clone)]
pub struct WindowEvent {
    pub window_start: f64,
    pub window_end: f64,
    pub iterations: usize,
    pub final_residual: f64,
    pub max_guard: f64,
    pub truncated: bool,
}

/// Full windowed trajectory plus the event log.
pub struct RunOutput {
    /// Global slices at every flow step, `horizon_steps + 1` fields.
    pub trajectory: Vec<VectorField>,
    pub events: Vec<WindowEvent>,
}

/// Chain Picard windows over `horizon_steps` flow steps. After each window
/// converges, the guard series is scanned: the first slice whose
/// `‖∇(A−id)‖_{l,α}` estimate exceeds the threshold truncates the window
/// there, and the next window restarts from the truncation time with fresh
/// flows. A window that fails to converge is retried at half length; if it
/// shrinks below one flow step the run aborts as blow-up-suspected. The
/// observer sees every accepted window (`state`, `event`, accepted slice
/// count) before its maps are dropped.
pub fn run_windowed(
    u0: &VectorField,
    noise_model: &NoiseModel,
    path: &WienerPath,
    horizon_steps: usize,
    window_steps: usize,
    cfg: &SolverConfig,
    mut observer: impl FnMut(&SolverState, &WindowEvent, usize) -> Result<()>,
) -> Result<RunOutput> {
    cfg.validate()?;
    if window_steps == 0 || horizon_steps == 0 {
        return Err(Error::Config(
            "horizon and window must cover at least one flow step".into(),
        ));
    }
    // Scrub any divergence drift in the initial datum.
    let mut u_cur = ops::leray_project(u0)?;
    let mut trajectory = vec![u_cur.clone()];
    let mut events = Vec::new();
    let mut step = 0usize;

    while step < horizon_steps {
        let remaining = horizon_steps - step;
        let mut attempt_steps = window_steps.min(remaining);
        let state = loop {
            match picard_solve(&u_cur, noise_model, path, step, attempt_steps, cfg) {
                Ok(state) => break state,
                Err(Error::NonConvergence { .. }) if attempt_steps > 1 => {
                    attempt_steps /= 2;
                }
                Err(Error::NonConvergence { max_iter, history }) => {
                    return Err(Error::BlowUpSuspected {
                        time: step as f64 * cfg.dt,
                        detail: format!(
                            "Picard rejected even a single-step window ({max_iter} iterations, residuals {history:?})"
                        ),
                    });
                }
                Err(e) => return Err(e),
            }
        };

        // Guard scan: accept slices up to the first exceedance.
        let trip = state
            .guard_series
            .iter()
            .position(|&g| g > cfg.guard_threshold);
        let (accepted, truncated) = match trip {
            Some(0) => {
                return Err(Error::BlowUpSuspected {
                    time: state.t_start,
                    detail: "guard exceeded at the window start".into(),
                })
            }
            Some(i) => (i, true),
            None => (state.window_steps(), false),
        };

        let event = WindowEvent {
            window_start: state.t_start,
            window_end: state.time(accepted),
            iterations: state.iterations,
            final_residual: state.final_residual,
            max_guard: state.max_guard(),
            truncated,
        };
        observer(&state, &event, accepted)?;
        events.push(event);

        for i in 1..=accepted {
            trajectory.push(state.slices[i].clone());
        }
        step += accepted;
        // Restart datum: re-projected to scrub accumulated divergence drift.
        u_cur = ops::leray_project(&state.slices[accepted])?;
    }

    Ok(RunOutput { trajectory, events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario;

    fn grid() -> Grid {
        Grid::new(16).unwrap()
    }

    fn cfg() -> SolverConfig {
        SolverConfig::new(grid(), 1.0 / 512.0)
    }

    const TRI: InterpScheme = InterpScheme::Tricubic;

    #[test]
    fn weber_trivial_cases() {
        let g = Grid::new(32).unwrap();
        let zero = VectorField::zeros(g);
        let v = scenario::random_band_limited(g, 3, 1.0, 5).unwrap();
        // ℓ = 0, divergence-free v: W(0, v) = P v = v.
        let w = weber(&zero, &v).unwrap();
        assert!(w.max_distance(&v).unwrap() <= 1e-12);
        // ℓ = 0, gradient input: projected away.
        let gradient = VectorField::from_fn(g, |[x, _, _]| [x.cos(), 0.0, 0.0]);
        let w = weber(&zero, &gradient).unwrap();
        assert!(w.max_norm() <= 1e-12);
        // Constant displacement: ∇ℓ = 0, so W(a, u₀(·+a)) = u₀(·+a).
        let a = [0.4, -0.2, 0.9];
        let ell = VectorField::from_fn(g, |_| a);
        let shifted = v.shift(a);
        let w = weber(&ell, &shifted).unwrap();
        assert!(w.max_distance(&shifted).unwrap() <= 1e-12);
    }

    fn identity_flows(n_slices: usize) -> Vec<FlowMap> {
        (0..n_slices)
            .map(|_| FlowMap::identity(grid(), TRI))
            .collect()
    }

    #[test]
    fn phi_of_zero_datum_is_zero() {
        let zero = VectorField::zeros(grid());
        let slices = vec![zero.clone(); 6];
        let out = apply_phi(&slices, &identity_flows(6), &zero, &cfg()).unwrap();
        for s in &out.slices {
            assert_eq!(s.max_norm(), 0.0);
        }
    }

    #[test]
    fn phi_pins_the_initial_slice() {
        let u0 = scenario::abc_field(grid(), 1.0, 1.0, 1.0);
        let slices = vec![u0.clone(); 4];
        let out = apply_phi(&slices, &identity_flows(4), &u0, &cfg()).unwrap();
        assert!(out.slices[0].max_distance(&u0).unwrap() <= 1e-12);
        // Every output slice is divergence-free.
        for s in &out.slices {
            assert!(s.divergence_max_rel() <= 1e-8);
        }
    }

    #[test]
    fn phi_requires_identity_at_window_start() {
        let u0 = scenario::abc_field(grid(), 1.0, 1.0, 1.0);
        let slices = vec![u0.clone(); 3];
        let mut flows = identity_flows(3);
        flows[0] = FlowMap::translation(grid(), [0.3, 0.0, 0.0], TRI);
        assert!(matches!(
            apply_phi(&slices, &flows, &u0, &cfg()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn picard_on_zero_datum_converges_immediately() {
        let zero = VectorField::zeros(grid());
        let path = WienerPath::zeros(cfg().dt, 64);
        let model = NoiseModel::empty(grid(), TRI);
        let state = picard_solve(&zero, &model, &path, 0, 8, &cfg()).unwrap();
        assert_eq!(state.iterations, 1);
        assert_eq!(state.final_residual, 0.0);
        for s in &state.slices {
            assert_eq!(s.max_norm(), 0.0);
        }
    }

    #[test]
    fn picard_reaches_the_steady_state_on_abc() {
        // ABC is a steady Euler solution; the fixed point is the constant
        // trajectory, so residuals contract fast and the trajectory stays
        // within 1e-3 of the initial datum in relative L².
        let u0 = scenario::abc_field(grid(), 1.0, 1.0, 1.0);
        let model = NoiseModel::empty(grid(), TRI);
        let c = cfg();
        let steps = 10;
        let path = WienerPath::zeros(c.dt, steps);
        let state = picard_solve(&u0, &model, &path, 0, steps, &c).unwrap();
        assert!(state.final_residual <= c.picard_tol);
        let rep = contraction_monitor(&state.residual_history);
        assert!(!rep.flagged, "ratios {:?}", rep.ratios);
        let u0_l2 = u0.l2_norm();
        for s in &state.slices {
            let drift = s.sub(&u0).unwrap().l2_norm() / u0_l2;
            assert!(drift <= 1e-3, "steady-state drift {drift}");
        }
        // Monotone residual decay.
        for w in state.residual_history.windows(2) {
            assert!(w[1] <= w[0], "history {:?}", state.residual_history);
        }
        assert!(!state.u_bound_exceeded);
        // The logged first-order bound dominates the measured ∇(Y − id).
        for (measured, bound) in state.grad_lambda_series.iter().skip(1) {
            assert!(measured <= bound, "measured {measured} vs bound {bound}");
        }
    }

    #[test]
    fn contraction_monitor_arithmetic() {
        let rep = contraction_monitor(&[1.0, 0.4, 0.16]);
        assert_eq!(rep.ratios.len(), 2);
        assert!((rep.ratios[0] - 0.4).abs() < 1e-15);
        assert!((rep.ratios[1] - 0.4).abs() < 1e-15);
        assert!(!rep.flagged);

        let rep = contraction_monitor(&[1.0, 0.95, 0.93]);
        assert!(rep.flagged);
        assert!((rep.max_ratio - 0.93 / 0.95).abs() < 1e-12);
    }

    fn zero_path(steps: usize, c: &SolverConfig) -> WienerPath {
        WienerPath::zeros(c.dt, steps)
    }

    #[test]
    fn windowed_run_matches_single_window_when_guard_is_quiet() {
        let u0 = scenario::abc_field(grid(), 1.0, 1.0, 1.0);
        let model = NoiseModel::empty(grid(), TRI);
        let c = cfg();
        let steps = 8;
        let path = zero_path(steps, &c);
        let single = picard_solve(&u0, &model, &path, 0, steps, &c).unwrap();
        let windowed =
            run_windowed(&u0, &model, &path, steps, steps, &c, |_, _, _| Ok(())).unwrap();
        assert_eq!(windowed.events.len(), 1);
        assert!(!windowed.events[0].truncated);
        let d = windowed
            .trajectory
            .last()
            .unwrap()
            .max_distance(single.slices.last().unwrap())
            .unwrap();
        // The initial datum is re-projected once at the run start, which only
        // touches roundoff-level divergence content.
        assert!(d <= 1e-10, "windowed vs single-window mismatch {d}");
    }

    #[test]
    fn windowed_run_chains_windows_over_the_horizon() {
        let u0 = scenario::abc_field(grid(), 1.0, 1.0, 1.0);
        let model = NoiseModel::empty(grid(), TRI);
        let c = cfg();
        let mut seen = 0usize;
        let out = run_windowed(&u0, &model, &zero_path(16, &c), 16, 5, &c, |_, _, acc| {
            seen += acc;
            Ok(())
        })
        .unwrap();
        assert_eq!(out.events.len(), 4); // 5 + 5 + 5 + 1 steps
        assert_eq!(seen, 16);
        assert_eq!(out.trajectory.len(), 17);
        let u0_l2 = u0.l2_norm();
        let drift = out.trajectory.last().unwrap().sub(&u0).unwrap().l2_norm() / u0_l2;
        assert!(drift <= 1e-3, "steady drift over horizon {drift}");
    }

    #[test]
    fn strong_noise_trips_the_guard_and_truncates() {
        // Large-amplitude single-mode noise: ∇(A − id) grows fast enough to
        // cross a small guard threshold inside the window.
        let u0 = scenario::abc_field(grid(), 0.5, 0.5, 0.5);
        let sigma = VectorField::from_fn(grid(), |[_, y, _]| [y.sin(), 0.0, 0.0]);
        let model = NoiseModel::from_fields(vec![sigma], vec![4.0], TRI).unwrap();
        let mut c = cfg();
        c.guard_threshold = 0.35;
        let steps = 12;
        let path = WienerPath::generate(1, c.dt, steps, 12345);
        let mut trunc_events = 0;
        let out = run_windowed(&u0, &model, &path, steps, steps, &c, |_, ev, _| {
            if ev.truncated {
                trunc_events += 1;
                assert!(ev.window_end < steps as f64 * c.dt);
            }
            Ok(())
        });
        match out {
            Ok(run) => {
                assert!(trunc_events >= 1, "events: {:?}", run.events);
                assert_eq!(run.trajectory.len(), steps + 1);
            }
            Err(Error::BlowUpSuspected { .. }) => {
                panic!("guard should truncate, not abort, at this amplitude")
            }
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn fixed_point_is_consistent_under_one_more_application() {
        let u0 = scenario::abc_field(grid(), 1.0, 1.0, 1.0);
        let model = NoiseModel::empty(grid(), TRI);
        let c = cfg();
        let steps = 8;
        let path = zero_path(steps, &c);
        let state = picard_solve(&u0, &model, &path, 0, steps, &c).unwrap();
        let phi = identity_flows(steps + 1);
        let extra = apply_phi(&state.slices, &phi, &u0, &c).unwrap();
        let mut change = 0.0f64;
        for (a, b) in extra.slices.iter().zip(&state.slices) {
            let d = holder::holder_distance(a, b, c.l, c.alpha, &c.policy).unwrap();
            change = change.max(d.value);
        }
        assert!(
            change <= 2.0 * c.picard_tol,
            "extra Φ application moved the iterate by {change}"
        );
    }
}
