//! Torus diffeomorphisms stored as periodic displacement fields with their
//! Jacobians, plus the operations the Lagrangian solver needs: off-grid
//! evaluation, composition, per-node Newton inversion, pull-back and
//! cotangent push-forward of velocity fields, and RK4 integration of drift
//! flows with the variational equation for the Jacobian.
//!
//! Displacements must stay within half a period; the solver's short windows
//! guarantee this, and snapshots wrap them into `[-π, π)`.

use std::sync::OnceLock;

use rayon::prelude::*;
use rustfft::num_complex::Complex;

use crate::field::mat3::{self, Mat3};
use crate::field::{MatrixField, VectorField};
use crate::grid::Grid;
use crate::interp::{FieldInterpolant, InterpScheme};
use crate::ops;
use crate::{Error, Result};

/// Newton inversion parameters (per-node damped Newton on `y + d(y) = x`).
pub const INVERT_TOL: f64 = 1e-10;
pub const INVERT_MAX_ITER: usize = 50;

/// A map `x ↦ x + d(x)` of the torus with its Jacobian `∇(x + d)` stored
/// alongside (never re-differenced from positions).
pub struct FlowMap {
    scheme: InterpScheme,
    disp: VectorField,
    jac: MatrixField,
    disp_interp: OnceLock<FieldInterpolant>,
    jac_interp: OnceLock<FieldInterpolant>,
}

impl Clone for FlowMap {
    fn clone(&self) -> Self {
        Self {
            scheme: self.scheme,
            disp: self.disp.clone(),
            jac: self.jac.clone(),
            disp_interp: OnceLock::new(),
            jac_interp: OnceLock::new(),
        }
    }
}

impl std::fmt::Debug for FlowMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlowMap")
            .field("n", &self.grid().n())
            .field("max_displacement", &self.disp.max_norm())
            .finish()
    }
}

impl FlowMap {
    pub fn identity(grid: Grid, scheme: InterpScheme) -> Self {
        Self {
            scheme,
            disp: VectorField::zeros(grid),
            jac: MatrixField::identity(grid),
            disp_interp: OnceLock::new(),
            jac_interp: OnceLock::new(),
        }
    }

    pub fn translation(grid: Grid, a: [f64; 3], scheme: InterpScheme) -> Self {
        let w = [
            Grid::wrap_centered(a[0]),
            Grid::wrap_centered(a[1]),
            Grid::wrap_centered(a[2]),
        ];
        Self {
            scheme,
            disp: VectorField::from_fn(grid, |_| w),
            jac: MatrixField::identity(grid),
            disp_interp: OnceLock::new(),
            jac_interp: OnceLock::new(),
        }
    }

    /// Build from a smooth displacement field; the Jacobian is `I + ∇d`
    /// computed spectrally.
    pub fn from_displacement(disp: VectorField, scheme: InterpScheme) -> Self {
        let grid = disp.grid();
        let grad = ops::gradient(&disp);
        let mut jac = MatrixField::zeros(grid);
        for i in 0..grid.len() {
            jac.set_at(i, &mat3::add(&grad.at(i), &mat3::IDENTITY));
        }
        Self {
            scheme,
            disp,
            jac,
            disp_interp: OnceLock::new(),
            jac_interp: OnceLock::new(),
        }
    }

    pub fn from_parts(disp: VectorField, jac: MatrixField, scheme: InterpScheme) -> Self {
        Self {
            scheme,
            disp,
            jac,
            disp_interp: OnceLock::new(),
            jac_interp: OnceLock::new(),
        }
    }

    /// Snapshot from absolute particle positions and their Jacobians.
    pub(crate) fn from_state(
        grid: Grid,
        positions: &[[f64; 3]],
        jacs: &[Mat3],
        scheme: InterpScheme,
    ) -> Self {
        let mut comps = [
            vec![0.0; grid.len()],
            vec![0.0; grid.len()],
            vec![0.0; grid.len()],
        ];
        for (i, p) in grid.points() {
            for c in 0..3 {
                comps[c][i] = Grid::wrap_centered(positions[i][c] - p[c]);
            }
        }
        let disp = VectorField::from_components(grid, comps).expect("state matches the grid");
        let mut jac = MatrixField::zeros(grid);
        for (i, j) in jacs.iter().enumerate() {
            jac.set_at(i, j);
        }
        Self {
            scheme,
            disp,
            jac,
            disp_interp: OnceLock::new(),
            jac_interp: OnceLock::new(),
        }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.disp.grid()
    }

    pub fn scheme(&self) -> InterpScheme {
        self.scheme
    }

    pub fn displacement(&self) -> &VectorField {
        &self.disp
    }

    pub fn jacobian(&self) -> &MatrixField {
        &self.jac
    }

    fn disp_interpolant(&self) -> &FieldInterpolant {
        self.disp_interp.get_or_init(|| {
            let comps: Vec<&[f64]> = (0..3).map(|c| self.disp.comp(c)).collect();
            FieldInterpolant::new(self.grid(), &comps, self.scheme)
        })
    }

    fn jac_interpolant(&self) -> &FieldInterpolant {
        self.jac_interp.get_or_init(|| {
            let comps: Vec<&[f64]> = self.jac.components().iter().map(|e| e.as_slice()).collect();
            FieldInterpolant::new(self.grid(), &comps, self.scheme)
        })
    }

    /// Interpolated displacement at an arbitrary point.
    pub fn disp_at(&self, p: [f64; 3]) -> [f64; 3] {
        let mut d = [0.0f64; 3];
        self.disp_interpolant().eval(p, &mut d);
        d
    }

    /// Interpolated displacement and Jacobian at an arbitrary point.
    pub fn disp_jac_at(&self, p: [f64; 3]) -> ([f64; 3], Mat3) {
        let d = self.disp_at(p);
        let mut out = [0.0f64; 9];
        self.jac_interpolant().eval(p, &mut out);
        let mut j = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                j[r][c] = out[3 * r + c];
            }
        }
        (d, j)
    }

    /// Image of a point under the map (position left unwrapped).
    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let d = self.disp_at(p);
        [p[0] + d[0], p[1] + d[1], p[2] + d[2]]
    }

    /// Evaluate the map at a list of points.
    pub fn evaluate(&self, points: &[[f64; 3]]) -> Vec<[f64; 3]> {
        points.iter().map(|&p| self.apply(p)).collect()
    }

    pub fn max_displacement(&self) -> f64 {
        self.disp.max_norm()
    }

    /// Range of `det ∇(map)` over the nodes.
    pub fn det_range(&self) -> (f64, f64) {
        self.jac.det_range()
    }

    /// Composition `x ↦ outer(inner(x))`, Jacobian by the chain rule.
    pub fn compose(outer: &FlowMap, inner: &FlowMap) -> Result<FlowMap> {
        if outer.grid() != inner.grid() {
            return Err(Error::ResolutionMismatch(outer.grid().n(), inner.grid().n()));
        }
        let grid = inner.grid();
        let pts: Vec<[f64; 3]> = grid.points().map(|(_, p)| p).collect();
        let results: Vec<([f64; 3], Mat3)> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let di = inner.disp.at(i);
                let y = [pts[i][0] + di[0], pts[i][1] + di[1], pts[i][2] + di[2]];
                let (do_, jo) = outer.disp_jac_at(y);
                let disp = [
                    Grid::wrap_centered(di[0] + do_[0]),
                    Grid::wrap_centered(di[1] + do_[1]),
                    Grid::wrap_centered(di[2] + do_[2]),
                ];
                (disp, mat3::mul(&jo, &inner.jac.at(i)))
            })
            .collect();
        let mut comps = [
            vec![0.0; grid.len()],
            vec![0.0; grid.len()],
            vec![0.0; grid.len()],
        ];
        let mut jac = MatrixField::zeros(grid);
        for (i, (d, j)) in results.iter().enumerate() {
            for c in 0..3 {
                comps[c][i] = d[c];
            }
            jac.set_at(i, j);
        }
        Ok(FlowMap::from_parts(
            VectorField::from_components(grid, comps)?,
            jac,
            outer.scheme,
        ))
    }

    /// Per-node damped Newton inversion of `x ↦ x + d(x)`; the inverse map's
    /// Jacobian is `(∇map)⁻¹` evaluated at the preimage.
    pub fn invert(&self) -> Result<FlowMap> {
        let grid = self.grid();
        let (det_min, _) = self.det_range();
        if det_min <= 0.0 {
            return Err(Error::NearSingularMap(format!(
                "Jacobian determinant reaches {det_min:.3e} on the grid"
            )));
        }
        let pts: Vec<[f64; 3]> = grid.points().map(|(_, p)| p).collect();
        let node_results: Vec<std::result::Result<([f64; 3], Mat3), String>> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let x = pts[i];
                let d0 = self.disp.at(i);
                let mut y = [x[0] - d0[0], x[1] - d0[1], x[2] - d0[2]];
                let mut resid = f64::INFINITY;
                for _ in 0..INVERT_MAX_ITER {
                    let (dy, jy) = self.disp_jac_at(y);
                    let r = [
                        Grid::wrap_centered(y[0] + dy[0] - x[0]),
                        Grid::wrap_centered(y[1] + dy[1] - x[1]),
                        Grid::wrap_centered(y[2] + dy[2] - x[2]),
                    ];
                    resid = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
                    if resid <= INVERT_TOL {
                        let jinv = mat3::inverse(&jy).ok_or_else(|| {
                            format!("singular Jacobian at node {i} during inversion")
                        })?;
                        let disp = [
                            Grid::wrap_centered(y[0] - x[0]),
                            Grid::wrap_centered(y[1] - x[1]),
                            Grid::wrap_centered(y[2] - x[2]),
                        ];
                        return Ok((disp, jinv));
                    }
                    let jinv = mat3::inverse(&jy)
                        .ok_or_else(|| format!("singular Jacobian at node {i} during inversion"))?;
                    let full = mat3::mul_vec(&jinv, &r);
                    // Damped update: halve the step until the residual drops.
                    let mut lambda = 1.0;
                    let mut accepted = false;
                    for _ in 0..5 {
                        let cand = [
                            y[0] - lambda * full[0],
                            y[1] - lambda * full[1],
                            y[2] - lambda * full[2],
                        ];
                        let dc = self.disp_at(cand);
                        let rc = [
                            Grid::wrap_centered(cand[0] + dc[0] - x[0]),
                            Grid::wrap_centered(cand[1] + dc[1] - x[1]),
                            Grid::wrap_centered(cand[2] + dc[2] - x[2]),
                        ];
                        let rn = (rc[0] * rc[0] + rc[1] * rc[1] + rc[2] * rc[2]).sqrt();
                        if rn < resid {
                            y = cand;
                            accepted = true;
                            break;
                        }
                        lambda *= 0.5;
                    }
                    if !accepted {
                        return Err(format!(
                            "Newton stalled at node {i} with residual {resid:.3e}"
                        ));
                    }
                }
                Err(format!(
                    "no convergence at node {i}: residual {resid:.3e} after {INVERT_MAX_ITER} iterations"
                ))
            })
            .collect();

        let mut comps = [
            vec![0.0; grid.len()],
            vec![0.0; grid.len()],
            vec![0.0; grid.len()],
        ];
        let mut jac = MatrixField::zeros(grid);
        for (i, r) in node_results.into_iter().enumerate() {
            match r {
                Ok((d, j)) => {
                    for c in 0..3 {
                        comps[c][i] = d[c];
                    }
                    jac.set_at(i, &j);
                }
                Err(msg) => return Err(Error::NearSingularMap(msg)),
            }
        }
        Ok(FlowMap::from_parts(
            VectorField::from_components(grid, comps)?,
            jac,
            self.scheme,
        ))
    }
}

/// Interpolant over the three components of a vector field, built from its
/// cached spectrum.
pub fn vector_interpolant(u: &VectorField, scheme: InterpScheme) -> FieldInterpolant {
    let spec = u.spectral();
    FieldInterpolant::from_spectra(u.grid(), spec.to_vec(), scheme)
}

/// Pull-back `(φ⁻¹)_* u = (∇φ)⁻¹ · (u ∘ φ)`, the drift seen after removing
/// the noise flow.
pub fn pullback_field(phi: &FlowMap, u: &VectorField) -> Result<VectorField> {
    if phi.grid() != u.grid() {
        return Err(Error::ResolutionMismatch(phi.grid().n(), u.grid().n()));
    }
    pullback_with_interp(phi, &vector_interpolant(u, phi.scheme()))
}

/// Pull-back variant reusing a prebuilt interpolant of `u` (the field is
/// often shared across many flows).
pub fn pullback_with_interp(phi: &FlowMap, u_interp: &FieldInterpolant) -> Result<VectorField> {
    let grid = phi.grid();
    let pts: Vec<[f64; 3]> = grid.points().map(|(_, p)| p).collect();
    let vals: Vec<std::result::Result<[f64; 3], usize>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let d = phi.displacement().at(i);
            let y = [pts[i][0] + d[0], pts[i][1] + d[1], pts[i][2] + d[2]];
            let mut uval = [0.0; 3];
            u_interp.eval(y, &mut uval);
            let k = mat3::inverse(&phi.jacobian().at(i)).ok_or(i)?;
            Ok(mat3::mul_vec(&k, &uval))
        })
        .collect();
    collect_vector(grid, vals, "pull-back")
}

/// Cotangent push-forward `(∇A)ᵀ · (u₀ ∘ A)`: the velocity reconstruction
/// integrand, before projection.
pub fn pushforward_cotangent(a: &FlowMap, u0: &VectorField) -> Result<VectorField> {
    if a.grid() != u0.grid() {
        return Err(Error::ResolutionMismatch(a.grid().n(), u0.grid().n()));
    }
    pushforward_with_interp(a, &vector_interpolant(u0, a.scheme()))
}

/// Push-forward variant reusing a prebuilt interpolant of `u₀`.
pub fn pushforward_with_interp(a: &FlowMap, u_interp: &FieldInterpolant) -> Result<VectorField> {
    let grid = a.grid();
    let pts: Vec<[f64; 3]> = grid.points().map(|(_, p)| p).collect();
    let vals: Vec<std::result::Result<[f64; 3], usize>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let d = a.displacement().at(i);
            let y = [pts[i][0] + d[0], pts[i][1] + d[1], pts[i][2] + d[2]];
            let mut uval = [0.0; 3];
            u_interp.eval(y, &mut uval);
            Ok(mat3::transpose_mul_vec(&a.jacobian().at(i), &uval))
        })
        .collect();
    collect_vector(grid, vals, "cotangent push-forward")
}

fn collect_vector(
    grid: Grid,
    vals: Vec<std::result::Result<[f64; 3], usize>>,
    what: &str,
) -> Result<VectorField> {
    let mut comps = [
        vec![0.0; grid.len()],
        vec![0.0; grid.len()],
        vec![0.0; grid.len()],
    ];
    for (i, v) in vals.into_iter().enumerate() {
        match v {
            Ok(v) => {
                for c in 0..3 {
                    comps[c][i] = v[c];
                }
            }
            Err(node) => {
                return Err(Error::NearSingularMap(format!(
                    "singular Jacobian at node {node} during {what}"
                )))
            }
        }
    }
    VectorField::from_components(grid, comps)
}

/// A velocity field evaluable off-grid together with its gradient.
///
/// Two gradient modes exist: the default derives the gradient from the
/// interpolant itself (B-spline derivative weights; 3 coefficient arrays,
/// cheap to build and evaluate), while `with_spectral_gradient` interpolates
/// the 9 exact Fourier-derivative fields alongside the values — used for
/// the noise basis, whose Jacobians must be sampled exactly.
pub struct SampledField {
    field: VectorField,
    scheme: InterpScheme,
    spectral_gradient: bool,
    grad: OnceLock<MatrixField>,
    interp: OnceLock<FieldInterpolant>,
}

impl SampledField {
    pub fn new(field: VectorField, scheme: InterpScheme) -> Self {
        Self {
            field,
            scheme,
            spectral_gradient: false,
            grad: OnceLock::new(),
            interp: OnceLock::new(),
        }
    }

    /// Interpolate the spectrally differentiated gradient fields instead of
    /// differentiating the interpolant.
    pub fn with_spectral_gradient(field: VectorField, scheme: InterpScheme) -> Self {
        Self {
            field,
            scheme,
            spectral_gradient: true,
            grad: OnceLock::new(),
            interp: OnceLock::new(),
        }
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn grad(&self) -> &MatrixField {
        self.grad.get_or_init(|| ops::gradient(&self.field))
    }

    pub fn grid(&self) -> Grid {
        self.field.grid()
    }

    fn interpolant(&self) -> &FieldInterpolant {
        self.interp.get_or_init(|| {
            let grid = self.grid();
            let spec = self.field.spectral();
            if !self.spectral_gradient {
                return FieldInterpolant::from_spectra(grid, spec.to_vec(), self.scheme);
            }
            let n = grid.n();
            let ik: Vec<f64> = (0..n).map(|i| grid.deriv_wavenumber(i) as f64).collect();
            let mut spectra: Vec<Vec<Complex<f64>>> = Vec::with_capacity(12);
            for c in 0..3 {
                spectra.push(spec[c].clone());
            }
            // Gradient spectra i k_axis û_r.
            for r in 0..3 {
                for axis in 0..3 {
                    let mut d = spec[r].clone();
                    let mut idx = 0usize;
                    for iz in 0..n {
                        for iy in 0..n {
                            for ix in 0..n {
                                let k = match axis {
                                    0 => ik[ix],
                                    1 => ik[iy],
                                    _ => ik[iz],
                                };
                                let v = d[idx];
                                d[idx] = Complex::new(-k * v.im, k * v.re);
                                idx += 1;
                            }
                        }
                    }
                    spectra.push(d);
                }
            }
            FieldInterpolant::from_spectra(grid, spectra, self.scheme)
        })
    }

    /// Value and gradient at an arbitrary point.
    pub fn eval(&self, p: [f64; 3]) -> ([f64; 3], Mat3) {
        if self.spectral_gradient {
            let mut out = [0.0f64; 12];
            self.interpolant().eval(p, &mut out);
            let v = [out[0], out[1], out[2]];
            let mut g = [[0.0; 3]; 3];
            for r in 0..3 {
                for c in 0..3 {
                    g[r][c] = out[3 + 3 * r + c];
                }
            }
            (v, g)
        } else {
            let mut v = [0.0f64; 3];
            let mut gr = [0.0f64; 9];
            self.interpolant().eval_with_gradient(p, &mut v, &mut gr);
            let mut g = [[0.0; 3]; 3];
            for r in 0..3 {
                for c in 0..3 {
                    g[r][c] = gr[r * 3 + c];
                }
            }
            (v, g)
        }
    }
}

#[inline]
fn axpy3(p: &[f64; 3], s: f64, v: &[f64; 3]) -> [f64; 3] {
    [p[0] + s * v[0], p[1] + s * v[1], p[2] + s * v[2]]
}

#[inline]
fn mat_axpy(m: &Mat3, s: f64, v: &Mat3) -> Mat3 {
    mat3::add(m, &mat3::scale(v, s))
}

/// One RK4 step of `ẏ = u(t, y)` and its variational equation
/// `d(∇Y)/dt = ∇u(t, Y)·∇Y`, with the field linear in time between the two
/// bracketing slices (`fm` is the precomputed midpoint field).
fn rk4_node(
    p: [f64; 3],
    j: Mat3,
    f0: &SampledField,
    fm: &SampledField,
    f1: &SampledField,
    dt: f64,
) -> ([f64; 3], Mat3) {
    let (k1, g1) = f0.eval(p);
    let kj1 = mat3::mul(&g1, &j);

    let p2 = axpy3(&p, 0.5 * dt, &k1);
    let j2 = mat_axpy(&j, 0.5 * dt, &kj1);
    let (k2, g2) = fm.eval(p2);
    let kj2 = mat3::mul(&g2, &j2);

    let p3 = axpy3(&p, 0.5 * dt, &k2);
    let j3 = mat_axpy(&j, 0.5 * dt, &kj2);
    let (k3, g3) = fm.eval(p3);
    let kj3 = mat3::mul(&g3, &j3);

    let p4 = axpy3(&p, dt, &k3);
    let j4 = mat_axpy(&j, dt, &kj3);
    let (k4, g4) = f1.eval(p4);
    let kj4 = mat3::mul(&g4, &j4);

    let sixth = dt / 6.0;
    let pn = [
        p[0] + sixth * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        p[1] + sixth * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        p[2] + sixth * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    ];
    let mut jn = j;
    for r in 0..3 {
        for c in 0..3 {
            jn[r][c] += sixth
                * (kj1[r][c] + 2.0 * kj2[r][c] + 2.0 * kj3[r][c] + kj4[r][c]);
        }
    }
    (pn, jn)
}

/// Integrate the random ODE `Ẏ = ũ(t, Y)`, `Y(t₀) = id`, over
/// `slices.len() − 1` uniform steps of size `dt`; `slices[i]` samples the
/// field at time `t₀ + i·dt` and the field is linear in time in between.
/// Returns the flow at every step boundary (first entry the identity).
pub fn integrate_drift_flow(slices: &[&SampledField], dt: f64) -> Result<Vec<FlowMap>> {
    assert!(!slices.is_empty(), "need at least one field slice");
    let grid = slices[0].grid();
    let scheme = slices[0].scheme;
    for s in slices {
        if s.grid() != grid {
            return Err(Error::ResolutionMismatch(s.grid().n(), grid.n()));
        }
    }
    // CFL-type guard: a particle may not cross more than half a cell per step.
    let max_vel = slices
        .iter()
        .map(|s| s.field.max_norm())
        .fold(0.0f64, f64::max);
    let limit = 0.5 * grid.spacing();
    if max_vel * dt > limit {
        return Err(Error::StepSize {
            advect: max_vel * dt,
            limit,
        });
    }

    let mut maps = Vec::with_capacity(slices.len());
    maps.push(FlowMap::identity(grid, scheme));
    let mut positions: Vec<[f64; 3]> = grid.points().map(|(_, p)| p).collect();
    let mut jacs: Vec<Mat3> = vec![mat3::IDENTITY; grid.len()];

    for step in 0..slices.len() - 1 {
        let f0 = slices[step];
        let f1 = slices[step + 1];
        // Midpoint field for the interior stages, built once per step.
        let mid_holder: Option<SampledField> = if std::ptr::eq(f0, f1) {
            None
        } else {
            let s0 = f0.field().spectral();
            let s1 = f1.field().spectral();
            let avg = [0, 1, 2].map(|c| {
                s0[c]
                    .iter()
                    .zip(&s1[c])
                    .map(|(a, b)| (a + b) * 0.5)
                    .collect()
            });
            Some(SampledField::new(
                VectorField::from_spectral(grid, avg)?,
                scheme,
            ))
        };
        let fm = mid_holder.as_ref().unwrap_or(f0);
        positions
            .par_iter_mut()
            .zip(jacs.par_iter_mut())
            .for_each(|(p, j)| {
                let (pn, jn) = rk4_node(*p, *j, f0, fm, f1, dt);
                *p = pn;
                *j = jn;
            });
        maps.push(FlowMap::from_state(grid, &positions, &jacs, scheme));
    }
    Ok(maps)
}

/// Convenience wrapper for a field frozen in time.
pub fn integrate_steady_flow(field: &SampledField, dt: f64, steps: usize) -> Result<Vec<FlowMap>> {
    let slices: Vec<&SampledField> = std::iter::repeat(field).take(steps + 1).collect();
    integrate_drift_flow(&slices, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario;

    fn grid() -> Grid {
        Grid::new(32).unwrap()
    }

    const TRI: InterpScheme = InterpScheme::Tricubic;

    #[test]
    fn identity_and_translation_evaluate_exactly() {
        let id = FlowMap::identity(grid(), TRI);
        let tr = FlowMap::translation(grid(), [0.3, -0.4, 1.0], TRI);
        let pts = [[0.1, 0.2, 0.3], [5.9, 2.2, 4.4]];
        for &p in &pts {
            let q = id.apply(p);
            for c in 0..3 {
                assert!((q[c] - p[c]).abs() < 1e-12);
            }
            let q = tr.apply(p);
            let expect = [p[0] + 0.3, p[1] - 0.4, p[2] + 1.0];
            for c in 0..3 {
                assert!((q[c] - expect[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tricubic_evaluation_tracks_the_spectral_oracle() {
        // Band-limited displacement of realistic (small) amplitude.
        let disp = VectorField::from_fn(grid(), |[x, y, z]| {
            [
                0.02 * (y.sin() + z.cos()),
                0.015 * (x + z).sin(),
                0.02 * (x.cos() * y.sin()),
            ]
        });
        let tri = FlowMap::from_displacement(disp.clone(), TRI);
        let spe = FlowMap::from_displacement(disp, InterpScheme::Spectral);
        let mut max_err = 0.0f64;
        for i in 0..100 {
            let t = 0.37 * i as f64;
            let p = [
                Grid::wrap(1.127 * t),
                Grid::wrap(2.911 * t + 0.8),
                Grid::wrap(0.733 * t + 2.0),
            ];
            let a = tri.apply(p);
            let b = spe.apply(p);
            for c in 0..3 {
                max_err = max_err.max((a[c] - b[c]).abs());
            }
        }
        assert!(max_err <= 1e-6, "tricubic vs spectral {max_err}");
    }

    #[test]
    fn composition_of_translations_adds() {
        let a = FlowMap::translation(grid(), [0.2, 0.0, -0.3], TRI);
        let b = FlowMap::translation(grid(), [0.1, 0.5, 0.3], TRI);
        let ab = FlowMap::compose(&a, &b).unwrap();
        let expect = FlowMap::translation(grid(), [0.3, 0.5, 0.0], TRI);
        assert!(
            ab.displacement()
                .max_distance(expect.displacement())
                .unwrap()
                < 1e-12
        );
        let id = FlowMap::identity(grid(), TRI);
        let m = FlowMap::from_displacement(
            VectorField::from_fn(grid(), |[x, _, _]| [0.0, 0.05 * x.sin(), 0.0]),
            TRI,
        );
        let idm = FlowMap::compose(&id, &m).unwrap();
        assert!(idm.displacement().max_distance(m.displacement()).unwrap() < 1e-12);
    }

    #[test]
    fn shear_composes_with_its_analytic_inverse_to_identity() {
        let w = 0.4;
        let fwd = FlowMap::from_displacement(
            VectorField::from_fn(grid(), |[_, y, _]| [w * y.sin(), 0.0, 0.0]),
            TRI,
        );
        let bwd = FlowMap::from_displacement(
            VectorField::from_fn(grid(), |[_, y, _]| [-w * y.sin(), 0.0, 0.0]),
            TRI,
        );
        let composed = FlowMap::compose(&fwd, &bwd).unwrap();
        assert!(composed.displacement().max_norm() <= 1e-6);
        assert!(composed.jacobian().max_deviation_from_identity() <= 1e-6);
    }

    #[test]
    fn inversion_of_elementary_maps() {
        let tr = FlowMap::translation(grid(), [0.7, -0.2, 0.1], TRI);
        let inv = tr.invert().unwrap();
        let expect = FlowMap::translation(grid(), [-0.7, 0.2, -0.1], TRI);
        assert!(inv.displacement().max_distance(expect.displacement()).unwrap() < 1e-10);

        let id = FlowMap::identity(grid(), TRI);
        let idinv = id.invert().unwrap();
        assert!(idinv.displacement().max_norm() < 1e-12);

        // Shear: exact inverse is the negated displacement.
        let w = 0.3;
        let shear = FlowMap::from_displacement(
            VectorField::from_fn(grid(), |[_, y, _]| [w * y.sin(), 0.0, 0.0]),
            TRI,
        );
        let sinv = shear.invert().unwrap();
        let expect = VectorField::from_fn(grid(), |[_, y, _]| [-w * y.sin(), 0.0, 0.0]);
        assert!(sinv.displacement().max_distance(&expect).unwrap() < 1e-10);
        // Jacobian of the inverse: I − w cos(y) e₁e₂ᵀ.
        let mut max_err = 0.0f64;
        for (i, p) in grid().points() {
            let j = sinv.jacobian().at(i);
            let mut expect_j = mat3::IDENTITY;
            expect_j[0][1] = -w * p[1].cos();
            for r in 0..3 {
                for c in 0..3 {
                    max_err = max_err.max((j[r][c] - expect_j[r][c]).abs());
                }
            }
        }
        assert!(max_err < 1e-9, "inverse Jacobian error {max_err}");
    }

    #[test]
    fn inverse_roundtrips_on_smooth_maps() {
        let m = FlowMap::from_displacement(
            VectorField::from_fn(grid(), |[x, y, z]| {
                [
                    0.05 * (y + z).sin(),
                    0.04 * (x).cos(),
                    0.05 * (x + y).sin(),
                ]
            }),
            TRI,
        );
        let minv = m.invert().unwrap();
        let round = minv.invert().unwrap();
        assert!(round.displacement().max_distance(m.displacement()).unwrap() <= 1e-6);
        let composed = FlowMap::compose(&m, &minv).unwrap();
        assert!(composed.displacement().max_norm() <= 1e-6);
    }

    #[test]
    fn inversion_rejects_folded_maps() {
        // Displacement gradient below -1 flips the Jacobian sign somewhere.
        let bad = FlowMap::from_displacement(
            VectorField::from_fn(grid(), |[x, _, _]| [1.5 * x.sin(), 0.0, 0.0]),
            TRI,
        );
        assert!(matches!(bad.invert(), Err(Error::NearSingularMap(_))));
    }

    #[test]
    fn stored_jacobian_matches_spectral_rediff() {
        let m = FlowMap::from_displacement(
            VectorField::from_fn(grid(), |[x, y, _]| {
                [0.03 * y.sin(), 0.03 * x.sin(), 0.0]
            }),
            TRI,
        );
        let inv = m.invert().unwrap();
        // Cross-check: I + ∇(disp of inverse), differentiated spectrally,
        // against the stored (interpolated) inverse Jacobian.
        let rediff = ops::gradient(inv.displacement());
        let mut max_err = 0.0f64;
        for i in 0..grid().len() {
            let a = inv.jacobian().at(i);
            let b = mat3::add(&rediff.at(i), &mat3::IDENTITY);
            for r in 0..3 {
                for c in 0..3 {
                    max_err = max_err.max((a[r][c] - b[r][c]).abs());
                }
            }
        }
        assert!(max_err <= 1e-4, "stored vs re-differentiated {max_err}");
    }

    #[test]
    fn drift_flow_trivial_cases() {
        let zero = SampledField::new(VectorField::zeros(grid()), TRI);
        let maps = integrate_steady_flow(&zero, 0.01, 5).unwrap();
        assert!(maps.last().unwrap().displacement().max_norm() == 0.0);

        let c = [0.4, -0.1, 0.2];
        let konst = SampledField::new(VectorField::from_fn(grid(), |_| c), TRI);
        let maps = integrate_steady_flow(&konst, 0.01, 10).unwrap();
        let last = maps.last().unwrap();
        let expect = FlowMap::translation(grid(), [c[0] * 0.1, c[1] * 0.1, c[2] * 0.1], TRI);
        assert!(
            last.displacement()
                .max_distance(expect.displacement())
                .unwrap()
                < 1e-13
        );
        assert!(last.jacobian().max_deviation_from_identity() < 1e-13);
    }

    #[test]
    fn drift_flow_richardson_self_convergence_on_abc() {
        // Steady ABC drift over 0.05: coarse dt against a dt/16 reference.
        let abc = SampledField::new(scenario::abc_field(grid(), 1.0, 1.0, 1.0), TRI);
        let horizon = 0.05;
        let coarse_steps = 8;
        let coarse = integrate_steady_flow(&abc, horizon / coarse_steps as f64, coarse_steps)
            .unwrap();
        let fine_steps = coarse_steps * 16;
        let fine = integrate_steady_flow(&abc, horizon / fine_steps as f64, fine_steps).unwrap();
        let err = coarse
            .last()
            .unwrap()
            .displacement()
            .max_distance(fine.last().unwrap().displacement())
            .unwrap();
        assert!(err <= 1e-8, "RK4 self-convergence error {err}");
    }

    #[test]
    fn drift_flow_enforces_cfl_guard() {
        let fast = SampledField::new(
            VectorField::from_fn(grid(), |_| [50.0, 0.0, 0.0]),
            TRI,
        );
        assert!(matches!(
            integrate_steady_flow(&fast, 0.01, 2),
            Err(Error::StepSize { .. })
        ));
    }

    #[test]
    fn variational_jacobian_matches_spectral_cross_check() {
        let abc = SampledField::new(scenario::abc_field(grid(), 1.0, 1.0, 1.0), TRI);
        let maps = integrate_steady_flow(&abc, 0.05 / 16.0, 16).unwrap();
        let last = maps.last().unwrap();
        let rediff = ops::gradient(last.displacement());
        let mut max_err = 0.0f64;
        for i in 0..grid().len() {
            let a = last.jacobian().at(i);
            let b = mat3::add(&rediff.at(i), &mat3::IDENTITY);
            for r in 0..3 {
                for c in 0..3 {
                    max_err = max_err.max((a[r][c] - b[r][c]).abs());
                }
            }
        }
        assert!(max_err <= 1e-4, "variational vs spectral {max_err}");
        // Volume preservation along the way (divergence-free drift).
        let (lo, hi) = last.det_range();
        assert!((lo - 1.0).abs() <= 1e-3 && (hi - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn pullback_trivial_and_shear_cases() {
        let u = scenario::abc_field(grid(), 1.0, 1.0, 1.0);
        let id = FlowMap::identity(grid(), TRI);
        let pb = pullback_field(&id, &u).unwrap();
        assert!(pb.max_distance(&u).unwrap() <= 1e-12);

        let a = [0.0, 0.0, 0.9];
        let tr = FlowMap::translation(grid(), a, TRI);
        let pb = pullback_field(&tr, &u).unwrap();
        let expect = u.shift(a);
        assert!(pb.max_distance(&expect).unwrap() <= 2e-5);

        // Shear map, constant u = e₁: the shear correction has e₁ in its
        // kernel, so the pull-back is e₁ again.
        let shear = FlowMap::from_displacement(
            VectorField::from_fn(grid(), |[_, y, _]| [0.4 * y.sin(), 0.0, 0.0]),
            TRI,
        );
        let e1 = VectorField::from_fn(grid(), |_| [1.0, 0.0, 0.0]);
        let pb = pullback_field(&shear, &e1).unwrap();
        assert!(pb.max_distance(&e1).unwrap() <= 1e-12);
    }

    #[test]
    fn pushforward_trivial_cases() {
        let u0 = scenario::taylor_green(grid(), 1.0);
        let id = FlowMap::identity(grid(), TRI);
        assert!(pushforward_cotangent(&id, &u0).unwrap().max_distance(&u0).unwrap() <= 1e-12);

        let a = [-0.7, 0.0, 0.0];
        let tr = FlowMap::translation(grid(), a, TRI);
        let pf = pushforward_cotangent(&tr, &u0).unwrap();
        let expect = u0.shift(a);
        assert!(pf.max_distance(&expect).unwrap() <= 2e-5);
    }

    #[test]
    fn pushforward_preserves_loop_integrals() {
        // ∮_{X(C)} (∇A)ᵀ u₀∘A · dl = ∮_C u₀ · dl  with A = X⁻¹.
        let u0 = scenario::abc_field(grid(), 1.0, 1.0, 1.0);
        let x_map = FlowMap::from_displacement(
            VectorField::from_fn(grid(), |[x, y, z]| {
                [0.06 * (y + z).sin(), 0.05 * x.cos(), 0.06 * (x - y).sin()]
            }),
            TRI,
        );
        let a_map = x_map.invert().unwrap();
        let w = pushforward_cotangent(&a_map, &u0).unwrap();

        let npts = 64;
        let loop_pts: Vec<[f64; 3]> = (0..=npts)
            .map(|i| {
                let s = std::f64::consts::TAU * i as f64 / npts as f64;
                [3.0 + 1.2 * s.cos(), 3.0 + 1.2 * s.sin(), 2.0 + 0.3 * (2.0 * s).sin()]
            })
            .collect();

        let line_integral = |f: &VectorField, pts: &[[f64; 3]]| -> f64 {
            let interp =
                FieldInterpolant::new(grid(), &[f.comp(0), f.comp(1), f.comp(2)], InterpScheme::Spectral);
            let mut acc = 0.0;
            let mut prev_val = [0.0; 3];
            interp.eval(pts[0], &mut prev_val);
            for w in pts.windows(2) {
                let mut val = [0.0; 3];
                interp.eval(w[1], &mut val);
                for c in 0..3 {
                    let dl = w[1][c] - w[0][c];
                    acc += 0.5 * (prev_val[c] + val[c]) * dl;
                }
                prev_val = val;
            }
            acc
        };

        let base = line_integral(&u0, &loop_pts);
        let moved: Vec<[f64; 3]> = x_map.evaluate(&loop_pts);
        let transported = line_integral(&w, &moved);
        assert!(
            (base - transported).abs() <= 1e-4,
            "loop integral drift {} vs {}",
            base,
            transported
        );
        // Refined-loop oracle: the identity error shrinks under loop
        // refinement (it is pure quadrature error).
        let npts2 = 256;
        let fine_pts: Vec<[f64; 3]> = (0..=npts2)
            .map(|i| {
                let s = std::f64::consts::TAU * i as f64 / npts2 as f64;
                [3.0 + 1.2 * s.cos(), 3.0 + 1.2 * s.sin(), 2.0 + 0.3 * (2.0 * s).sin()]
            })
            .collect();
        let base_fine = line_integral(&u0, &fine_pts);
        let moved_fine = x_map.evaluate(&fine_pts);
        let transported_fine = line_integral(&w, &moved_fine);
        let err_fine = (base_fine - transported_fine).abs();
        assert!(
            err_fine < (base - transported).abs(),
            "refined loop did not reduce the identity error: {err_fine}"
        );
        assert!(err_fine <= 1e-5);
    }

    #[test]
    fn cotangent_pushforward_is_functorial() {
        // T_{(f∘g)⁻¹} u = T_{f⁻¹}(T_{g⁻¹} u) with T_A u = (∇A)ᵀ u∘A.
        let f_map = FlowMap::from_displacement(
            VectorField::from_fn(grid(), |[_, y, z]| [0.05 * (y + z).sin(), 0.0, 0.04 * y.cos()]),
            TRI,
        );
        let g_map = FlowMap::from_displacement(
            VectorField::from_fn(grid(), |[x, _, z]| [0.0, 0.05 * (x - z).cos(), 0.04 * x.sin()]),
            TRI,
        );
        let u = scenario::taylor_green(grid(), 1.0);

        let fg = FlowMap::compose(&f_map, &g_map).unwrap();
        let lhs = pushforward_cotangent(&fg.invert().unwrap(), &u).unwrap();
        let inner = pushforward_cotangent(&g_map.invert().unwrap(), &u).unwrap();
        let rhs = pushforward_cotangent(&f_map.invert().unwrap(), &inner).unwrap();
        let err = lhs.max_distance(&rhs).unwrap();
        assert!(err <= 1e-5, "functoriality error {err}");
    }
}
