//! Transport-noise machinery: a finite family of divergence-free fields
//! `{σ_k}`, seeded Wiener paths on a fixed time grid, and Stratonovich
//! integration (Heun predictor–corrector) of the noise-only flow
//! `dφ = Σ_k a_k σ_k(φ) ∘ dW^k` together with its Jacobian via the
//! variational equation.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::field::mat3::{self, Mat3};
use crate::field::VectorField;
use crate::flow::{FlowMap, SampledField};
use crate::grid::Grid;
use crate::holder::{self, PairPolicy};
use crate::interp::InterpScheme;
use crate::{Error, Result};

/// Abort threshold on `|det ∇φ − 1|` during noise-flow integration.
pub const VOLUME_ABORT_TOL: f64 = 0.05;

/// Amplitudes `|k|^{-decay}` are square-summable over the lattice only for
/// `decay > 3/2`; below that the finite basis is still usable but the
/// infinite-family budget diverges, so the builder attaches a warning.
pub const DECAY_WARN_THRESHOLD: f64 = 1.5;

/// Derive a child seed from `(master, purpose, index)`; the documented
/// counter-based splitting rule (first 8 bytes of a SHA-256 digest).
pub fn split_seed(master: u64, purpose: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(purpose.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[0..8].try_into().expect("digest is long enough"))
}

/// Finite noise basis: `K` divergence-free fields with scalar amplitudes.
pub struct NoiseModel {
    grid: Grid,
    scheme: InterpScheme,
    sigmas: Vec<SampledField>,
    amplitudes: Vec<f64>,
    warnings: Vec<String>,
}

impl NoiseModel {
    /// K = 0: deterministic dynamics.
    pub fn empty(grid: Grid, scheme: InterpScheme) -> Self {
        Self {
            grid,
            scheme,
            sigmas: Vec::new(),
            amplitudes: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn from_fields(
        fields: Vec<VectorField>,
        amplitudes: Vec<f64>,
        scheme: InterpScheme,
    ) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::Config(
                "from_fields needs at least one field; use empty() for K = 0".into(),
            ));
        }
        if fields.len() != amplitudes.len() {
            return Err(Error::Config(format!(
                "got {} fields but {} amplitudes",
                fields.len(),
                amplitudes.len()
            )));
        }
        let grid = fields[0].grid();
        for (k, f) in fields.iter().enumerate() {
            f.ensure_same_grid(&fields[0])?;
            f.ensure_finite("noise field")?;
            f.ensure_divergence_free(1e-10).map_err(|e| {
                Error::Config(format!("noise field {k} is not divergence-free: {e}"))
            })?;
        }
        if amplitudes.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::Config("amplitudes must be finite and >= 0".into()));
        }
        // The basis is fixed for the lifetime of the model; sample its
        // exact spectral Jacobians once.
        let sigmas = fields
            .into_iter()
            .map(|f| SampledField::with_spectral_gradient(f, scheme))
            .collect();
        Ok(Self {
            grid,
            scheme,
            sigmas,
            amplitudes,
            warnings: Vec::new(),
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn scheme(&self) -> InterpScheme {
        self.scheme
    }

    pub fn k(&self) -> usize {
        self.sigmas.len()
    }

    pub fn sigma(&self, k: usize) -> &VectorField {
        self.sigmas[k].field()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// The standing regularity budget `Σ_k a_k² ‖σ_k‖²_{l+3,α}`, reported
    /// with the Hölder estimator (derivative cap raised to l+3).
    pub fn summability(&self, l: usize, alpha: f64) -> Result<f64> {
        let policy = PairPolicy::default_strided(self.grid);
        let mut sum = 0.0;
        for (sigma, amp) in self.sigmas.iter().zip(&self.amplitudes) {
            let est = holder::holder_norm_capped(sigma.field(), l + 3, alpha, &policy, l + 3)?;
            sum += amp * amp * est.value * est.value;
        }
        Ok(sum)
    }

    /// `Σ_k a_k ΔW_k (σ_k(p), ∇σ_k(p))` at one point — the Heun increment
    /// drift evaluated through the prebuilt σ interpolants.
    #[inline]
    fn increment_at(&self, p: [f64; 3], dw: &[f64]) -> ([f64; 3], Mat3) {
        let mut v = [0.0f64; 3];
        let mut g = [[0.0f64; 3]; 3];
        for (k, sigma) in self.sigmas.iter().enumerate() {
            let w = self.amplitudes[k] * dw[k];
            if w == 0.0 {
                continue;
            }
            let (sv, sg) = sigma.eval(p);
            for c in 0..3 {
                v[c] += w * sv[c];
            }
            for r in 0..3 {
                for c in 0..3 {
                    g[r][c] += w * sg[r][c];
                }
            }
        }
        (v, g)
    }
}

/// Divergence-free trigonometric basis from the lowest wavenumbers with
/// amplitudes `|k|^{-decay}`; polarizations are seeded. Deterministic for a
/// fixed `(k_count, decay, seed)`.
pub fn build_fourier_noise_basis(
    grid: Grid,
    k_count: usize,
    decay: f64,
    seed: u64,
    scheme: InterpScheme,
) -> Result<NoiseModel> {
    if k_count == 0 {
        return Ok(NoiseModel::empty(grid, scheme));
    }
    // Half-space wavevector enumeration ordered by |k|², then lexicographic.
    let mut waves: Vec<[i64; 3]> = Vec::new();
    let reach = 3i64;
    for kx in -reach..=reach {
        for ky in -reach..=reach {
            for kz in -reach..=reach {
                let k = [kx, ky, kz];
                if k == [0, 0, 0] {
                    continue;
                }
                let leading = if kx != 0 { kx } else if ky != 0 { ky } else { kz };
                if leading > 0 {
                    waves.push(k);
                }
            }
        }
    }
    waves.sort_by_key(|k| (k[0] * k[0] + k[1] * k[1] + k[2] * k[2], k[0], k[1], k[2]));

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut fields = Vec::with_capacity(k_count);
    let mut amplitudes = Vec::with_capacity(k_count);
    'outer: for k in waves {
        let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
        let knorm = (kf[0] * kf[0] + kf[1] * kf[1] + kf[2] * kf[2]).sqrt();
        // Orthonormal polarization pair perpendicular to k, rotated by a
        // seeded angle.
        let helper = if k[0] == 0 && k[1] == 0 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 0.0, 1.0]
        };
        let mut p1 = [
            kf[1] * helper[2] - kf[2] * helper[1],
            kf[2] * helper[0] - kf[0] * helper[2],
            kf[0] * helper[1] - kf[1] * helper[0],
        ];
        let p1n = (p1[0] * p1[0] + p1[1] * p1[1] + p1[2] * p1[2]).sqrt();
        for c in &mut p1 {
            *c /= p1n;
        }
        let p2 = [
            (kf[1] * p1[2] - kf[2] * p1[1]) / knorm,
            (kf[2] * p1[0] - kf[0] * p1[2]) / knorm,
            (kf[0] * p1[1] - kf[1] * p1[0]) / knorm,
        ];
        let theta: f64 = {
            let t: f64 = StandardNormal.sample(&mut rng);
            t
        };
        let (ct, st) = (theta.cos(), theta.sin());
        let q1 = [
            ct * p1[0] + st * p2[0],
            ct * p1[1] + st * p2[1],
            ct * p1[2] + st * p2[2],
        ];
        let q2 = [
            -st * p1[0] + ct * p2[0],
            -st * p1[1] + ct * p2[1],
            -st * p1[2] + ct * p2[2],
        ];
        for (pol, phase_sin) in [(q1, false), (q2, false), (q1, true), (q2, true)] {
            let field = VectorField::from_fn(grid, |x| {
                let arg = kf[0] * x[0] + kf[1] * x[1] + kf[2] * x[2];
                let osc = if phase_sin { arg.sin() } else { arg.cos() };
                [pol[0] * osc, pol[1] * osc, pol[2] * osc]
            });
            fields.push(field);
            amplitudes.push(knorm.powf(-decay));
            if fields.len() == k_count {
                break 'outer;
            }
        }
    }

    let mut model = NoiseModel::from_fields(fields, amplitudes, scheme)?;
    if decay <= DECAY_WARN_THRESHOLD {
        model.warnings.push(format!(
            "decay {decay} <= {DECAY_WARN_THRESHOLD}: amplitudes are not square-summable over the full lattice; the truncated basis is used as-is"
        ));
    }
    Ok(model)
}

/// K-dimensional Brownian samples on a uniform grid `t_i = i·dt`, seeded and
/// reproducible: identical `(seed, dt, steps, K)` give bit-identical values.
#[derive(Debug, Clone)]
pub struct WienerPath {
    dt: f64,
    values: Vec<Vec<f64>>, // per component: steps+1 cumulative samples, W(0) = 0
}

impl WienerPath {
    pub fn generate(k: usize, dt: f64, steps: usize, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let sqrt_dt = dt.sqrt();
        let mut values = vec![vec![0.0; steps + 1]; k];
        // Increment-major order: all K components per step, so a path
        // extended in time reproduces its prefix.
        for step in 0..steps {
            for comp in values.iter_mut() {
                let g: f64 = StandardNormal.sample(&mut rng);
                comp[step + 1] = comp[step] + sqrt_dt * g;
            }
        }
        Self { dt, values }
    }

    /// Deterministic all-zero path (used for K = 0).
    pub fn zeros(dt: f64, steps: usize) -> Self {
        Self {
            dt,
            values: vec![vec![0.0; steps + 1]; 0],
        }
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        if self.values.is_empty() {
            usize::MAX // a K = 0 path covers any interval
        } else {
            self.values[0].len() - 1
        }
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    pub fn value(&self, comp: usize, step: usize) -> f64 {
        self.values[comp][step]
    }

    /// `W(t₁) − W(t₀)` per component, in path steps.
    pub fn increment(&self, comp: usize, step0: usize, step1: usize) -> f64 {
        self.values[comp][step1] - self.values[comp][step0]
    }

    /// Map a time to the nearest path step, requiring alignment.
    pub fn step_of_time(&self, t: f64) -> Result<usize> {
        let raw = t / self.dt;
        let step = raw.round();
        if (raw - step).abs() > 1e-9 || step < 0.0 {
            return Err(Error::PathCoverage(t, t));
        }
        let step = step as usize;
        if !self.values.is_empty() && step >= self.values[0].len() {
            return Err(Error::PathCoverage(t, t));
        }
        Ok(step)
    }
}

/// Integrate the noise-only flow from path step `step0` over `flow_steps`
/// Heun steps, each spanning `substeps` path increments, starting from
/// `phi0`. Returns the flow at every step boundary (`flow_steps + 1` maps,
/// the first a clone of `phi0`).
pub fn noise_flow_slices(
    model: &NoiseModel,
    path: &WienerPath,
    step0: usize,
    flow_steps: usize,
    substeps: usize,
    phi0: &FlowMap,
) -> Result<Vec<FlowMap>> {
    if model.k() == 0 {
        return Ok(vec![phi0.clone(); flow_steps + 1]);
    }
    if path.k() != model.k() {
        return Err(Error::Config(format!(
            "path has {} components but the noise model has {}",
            path.k(),
            model.k()
        )));
    }
    let last_needed = step0 + flow_steps * substeps;
    if last_needed > path.steps() {
        return Err(Error::PathCoverage(
            path.time(step0),
            path.time(last_needed),
        ));
    }
    let grid = model.grid();
    if grid != phi0.grid() {
        return Err(Error::ResolutionMismatch(grid.n(), phi0.grid().n()));
    }

    let mut maps = Vec::with_capacity(flow_steps + 1);
    maps.push(phi0.clone());
    let mut positions: Vec<[f64; 3]> = {
        let mut p: Vec<[f64; 3]> = grid.points().map(|(_, x)| x).collect();
        for (i, q) in p.iter_mut().enumerate() {
            let d = phi0.displacement().at(i);
            for c in 0..3 {
                q[c] += d[c];
            }
        }
        p
    };
    let mut jacs: Vec<Mat3> = (0..grid.len()).map(|i| phi0.jacobian().at(i)).collect();

    for step in 0..flow_steps {
        let s0 = step0 + step * substeps;
        let s1 = s0 + substeps;
        let dw: Vec<f64> = (0..model.k()).map(|k| path.increment(k, s0, s1)).collect();
        positions
            .par_iter_mut()
            .zip(jacs.par_iter_mut())
            .for_each(|(p, j)| {
                // Heun predictor-corrector: Stratonovich-consistent without
                // Lévy areas.
                let (v0, g0) = model.increment_at(*p, &dw);
                let p_star = [p[0] + v0[0], p[1] + v0[1], p[2] + v0[2]];
                let g0j = mat3::mul(&g0, j);
                let j_star = mat3::add(j, &g0j);
                let (v1, g1) = model.increment_at(p_star, &dw);
                for c in 0..3 {
                    p[c] += 0.5 * (v0[c] + v1[c]);
                }
                let g1j = mat3::mul(&g1, &j_star);
                *j = mat3::add(j, &mat3::scale(&mat3::add(&g0j, &g1j), 0.5));
            });
        let snapshot = FlowMap::from_state(grid, &positions, &jacs, model.scheme());
        let (lo, hi) = snapshot.det_range();
        let drift = (lo - 1.0).abs().max((hi - 1.0).abs());
        if !drift.is_finite() || drift > VOLUME_ABORT_TOL {
            return Err(Error::VolumeDrift(drift));
        }
        maps.push(snapshot);
    }
    Ok(maps)
}

/// Noise flow over `[t0, t1]` at the path resolution, composed with `phi0`.
pub fn integrate_noise_flow(
    model: &NoiseModel,
    path: &WienerPath,
    t0: f64,
    t1: f64,
    phi0: &FlowMap,
) -> Result<FlowMap> {
    if model.k() == 0 {
        return Ok(phi0.clone());
    }
    let s0 = path.step_of_time(t0).map_err(|_| Error::PathCoverage(t0, t1))?;
    let s1 = path.step_of_time(t1).map_err(|_| Error::PathCoverage(t0, t1))?;
    if s1 < s0 {
        return Err(Error::PathCoverage(t0, t1));
    }
    let mut maps = noise_flow_slices(model, path, s0, s1 - s0, 1, phi0)?;
    Ok(maps.pop().expect("at least the initial map"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(32).unwrap()
    }

    const TRI: InterpScheme = InterpScheme::Tricubic;

    #[test]
    fn seed_splitting_is_stable_and_purpose_separated() {
        let a = split_seed(42, "wiener", 0);
        let b = split_seed(42, "wiener", 0);
        assert_eq!(a, b);
        assert_ne!(a, split_seed(42, "wiener", 1));
        assert_ne!(a, split_seed(42, "basis", 0));
        assert_ne!(a, split_seed(43, "wiener", 0));
    }

    #[test]
    fn wiener_paths_are_bit_reproducible() {
        let a = WienerPath::generate(3, 0.01, 100, 7);
        let b = WienerPath::generate(3, 0.01, 100, 7);
        for k in 0..3 {
            for s in 0..=100 {
                assert_eq!(a.value(k, s).to_bits(), b.value(k, s).to_bits());
            }
        }
        let c = WienerPath::generate(3, 0.01, 100, 8);
        assert_ne!(a.value(0, 100).to_bits(), c.value(0, 100).to_bits());
    }

    #[test]
    fn wiener_increments_look_independent_and_scaled() {
        // Consecutive disjoint increments along one long path: the empirical
        // correlation must vanish within 3/sqrt(M) and the variance match dt.
        let dt = 0.01;
        let steps = 20_000;
        let p = WienerPath::generate(1, dt, steps, 99);
        let inc: Vec<f64> = (0..steps).map(|s| p.increment(0, s, s + 1)).collect();
        let m = steps / 2;
        let mut sum_xy = 0.0;
        let mut sum_xx = 0.0;
        let mut sum_yy = 0.0;
        for i in 0..m {
            let x = inc[2 * i];
            let y = inc[2 * i + 1];
            sum_xy += x * y;
            sum_xx += x * x;
            sum_yy += y * y;
        }
        let corr = sum_xy / (sum_xx * sum_yy).sqrt();
        assert!(corr.abs() <= 3.0 / (m as f64).sqrt(), "corr {corr}");
        let var = inc.iter().map(|x| x * x).sum::<f64>() / steps as f64;
        assert!((var / dt - 1.0).abs() < 0.05, "variance ratio {}", var / dt);
    }

    #[test]
    fn fourier_basis_is_divergence_free_with_finite_budget() {
        let model = build_fourier_noise_basis(grid(), 6, 2.0, 11, TRI).unwrap();
        assert_eq!(model.k(), 6);
        for k in 0..6 {
            assert!(model.sigma(k).divergence_max_rel() <= 1e-10);
        }
        let s = model.summability(1, 0.5).unwrap();
        assert!(s.is_finite() && s > 0.0);
        assert!(model.warnings().is_empty());
        // Small decay only warns, never errors.
        let rough = build_fourier_noise_basis(grid(), 2, 0.5, 11, TRI).unwrap();
        assert_eq!(rough.warnings().len(), 1);
    }

    #[test]
    fn empty_model_leaves_flows_untouched() {
        let model = NoiseModel::empty(grid(), TRI);
        let path = WienerPath::zeros(1.0 / 512.0, 64);
        let phi0 = FlowMap::translation(grid(), [0.2, 0.0, 0.0], TRI);
        let maps = noise_flow_slices(&model, &path, 0, 8, 1, &phi0).unwrap();
        assert_eq!(maps.len(), 9);
        for m in &maps {
            assert!(m.displacement().max_distance(phi0.displacement()).unwrap() == 0.0);
        }
    }

    #[test]
    fn constant_sigma_flow_is_an_exact_translation() {
        let c = 0.8;
        let sigma = VectorField::from_fn(grid(), |_| [0.0, 0.0, c]);
        let model = NoiseModel::from_fields(vec![sigma], vec![1.0], TRI).unwrap();
        let dt = 1.0 / 512.0;
        let steps = 100;
        let path = WienerPath::generate(1, dt, steps, 5);
        let phi0 = FlowMap::identity(grid(), TRI);
        let maps = noise_flow_slices(&model, &path, 0, steps, 1, &phi0).unwrap();
        for (s, m) in maps.iter().enumerate() {
            let w = path.value(0, s);
            let expect = FlowMap::translation(grid(), [0.0, 0.0, c * w], TRI);
            let err = m
                .displacement()
                .max_distance(expect.displacement())
                .unwrap();
            assert!(err <= 1e-12, "step {s}: translation error {err}");
            assert!(m.jacobian().max_deviation_from_identity() <= 1e-12);
        }
    }

    #[test]
    fn shear_sigma_flow_matches_analytic_solution() {
        // σ = (f(x₂), 0, 0): x₂ invariant, so Heun is exact pathwise.
        let f = |y: f64| 0.7 * y.sin();
        let fp = |y: f64| 0.7 * y.cos();
        let sigma = VectorField::from_fn(grid(), |[_, y, _]| [f(y), 0.0, 0.0]);
        let model = NoiseModel::from_fields(vec![sigma], vec![1.0], TRI).unwrap();
        let dt = 1.0 / 512.0;
        let steps = 100;
        let path = WienerPath::generate(1, dt, steps, 17);
        let phi0 = FlowMap::identity(grid(), TRI);
        let maps = noise_flow_slices(&model, &path, 0, steps, 1, &phi0).unwrap();
        let w = path.value(0, steps);
        let last = maps.last().unwrap();
        let expect_disp = VectorField::from_fn(grid(), |[_, y, _]| [f(y) * w, 0.0, 0.0]);
        let err = last.displacement().max_distance(&expect_disp).unwrap();
        assert!(err <= 1e-12, "shear position error {err}");
        let mut jac_err = 0.0f64;
        for (i, p) in grid().points() {
            let j = last.jacobian().at(i);
            let mut expect = mat3::IDENTITY;
            expect[0][1] = w * fp(p[1]);
            for r in 0..3 {
                for c in 0..3 {
                    jac_err = jac_err.max((j[r][c] - expect[r][c]).abs());
                }
            }
        }
        assert!(jac_err <= 1e-12, "shear Jacobian error {jac_err}");
    }

    #[test]
    fn strong_order_one_for_single_field_noise() {
        // A single noise field always commutes with itself, so Heun is
        // pathwise first order; halving dt must shrink the error against a
        // dt/8 reference by at least 1.8. (A pure shear is integrated
        // exactly, so this uses a field with σ·∇σ ≠ 0.)
        let sigma = VectorField::from_fn(grid(), |[x, y, _]| [0.6 * y.sin(), 0.0, 0.6 * x.cos()]);
        let model = NoiseModel::from_fields(vec![sigma], vec![1.0], TRI).unwrap();
        let fine_steps = 64;
        let dt_fine = 1.0 / 2048.0;
        let path = WienerPath::generate(1, dt_fine, fine_steps, 23);
        let phi0 = FlowMap::identity(grid(), TRI);

        let run = |substeps: usize| -> VectorField {
            let maps =
                noise_flow_slices(&model, &path, 0, fine_steps / substeps, substeps, &phi0)
                    .unwrap();
            maps.last().unwrap().displacement().clone()
        };
        let reference = run(1); // dt/8 reference
        let coarse = run(8);
        let half = run(4);
        let e_coarse = coarse.max_distance(&reference).unwrap();
        let e_half = half.max_distance(&reference).unwrap();
        let ratio = e_coarse / e_half;
        assert!(
            ratio >= 1.8,
            "halving dt reduced the error only by {ratio} ({e_coarse} -> {e_half})"
        );
    }

    #[test]
    fn volume_is_preserved_at_default_steps() {
        let model = build_fourier_noise_basis(grid(), 4, 2.0, 3, TRI).unwrap();
        let dt = 1.0 / 512.0;
        let steps = 51; // horizon ≈ 0.1
        let path = WienerPath::generate(4, dt, steps, 29);
        let maps =
            noise_flow_slices(&model, &path, 0, steps, 1, &FlowMap::identity(grid(), TRI))
                .unwrap();
        let (lo, hi) = maps.last().unwrap().det_range();
        assert!((lo - 1.0).abs() <= 1e-3 && (hi - 1.0).abs() <= 1e-3, "det in [{lo}, {hi}]");
    }

    #[test]
    fn oversized_increments_trigger_volume_abort() {
        // Cyclic shear: det(I + ∇σ·ΔW) = 1 + O(ΔW³) genuinely departs from
        // one, so a giant increment must trip the volume guard.
        let sigma = VectorField::from_fn(grid(), |[x, y, z]| {
            [2.0 * y.sin(), 2.0 * z.sin(), 2.0 * x.sin()]
        });
        let model = NoiseModel::from_fields(vec![sigma], vec![3.0], TRI).unwrap();
        // One giant increment: dt = 1 over a single step.
        let path = WienerPath::generate(1, 1.0, 4, 101);
        let out = noise_flow_slices(&model, &path, 0, 4, 1, &FlowMap::identity(grid(), TRI));
        assert!(matches!(out, Err(Error::VolumeDrift(_))));
    }

    #[test]
    fn integrate_noise_flow_respects_path_coverage() {
        let model = build_fourier_noise_basis(grid(), 2, 2.0, 1, TRI).unwrap();
        let path = WienerPath::generate(2, 0.01, 10, 1);
        let id = FlowMap::identity(grid(), TRI);
        assert!(integrate_noise_flow(&model, &path, 0.0, 0.2, &id).is_err());
        assert!(integrate_noise_flow(&model, &path, 0.005, 0.05, &id).is_err());
        assert!(integrate_noise_flow(&model, &path, 0.02, 0.08, &id).is_ok());
    }
}
