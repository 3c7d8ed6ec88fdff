//! Spectral differential operators on torus fields. All derivatives are
//! exact Fourier derivatives; every pseudo-spectral product is dealiased by
//! the 2/3 rule (inputs filtered, nodal multiply, product filtered again).

use rustfft::num_complex::Complex;

use crate::fft;
use crate::field::{MatrixField, VectorField};
use crate::grid::Grid;
use crate::Result;
#[cfg(test)]
use crate::Error;

/// Relative spectral-divergence tolerance accepted for "divergence-free"
/// inputs of the adjoint Lie operator and the vector-identity checks.
pub const DIV_FREE_INPUT_TOL: f64 = 1e-8;

#[inline]
fn ik_pow(k: i64, m: usize) -> Complex<f64> {
    // (i k)^m with i^m cycling 1, i, -1, -i.
    let kp = (k as f64).powi(m as i32);
    match m % 4 {
        0 => Complex::new(kp, 0.0),
        1 => Complex::new(0.0, kp),
        2 => Complex::new(-kp, 0.0),
        _ => Complex::new(0.0, -kp),
    }
}

/// Apply the 2/3-rule low-pass mask in place.
pub(crate) fn dealias_spectrum(grid: Grid, spec: &mut [Complex<f64>]) {
    let n = grid.n();
    let cut = grid.dealias_cutoff();
    for iz in 0..n {
        let kz = grid.wavenumber(iz).abs();
        for iy in 0..n {
            let ky = grid.wavenumber(iy).abs();
            for ix in 0..n {
                let kx = grid.wavenumber(ix).abs();
                if kx > cut || ky > cut || kz > cut {
                    spec[grid.idx(ix, iy, iz)] = Complex::new(0.0, 0.0);
                }
            }
        }
    }
}

fn dealiased_physical(grid: Grid, spec: &[Complex<f64>]) -> Vec<f64> {
    let mut s = spec.to_vec();
    dealias_spectrum(grid, &mut s);
    fft::inverse(&s, grid.n())
}

/// Spectral partial derivative `∂^m f` of one component, `m` a multi-index.
pub(crate) fn derivative_component(grid: Grid, spec: &[Complex<f64>], m: [usize; 3]) -> Vec<f64> {
    let n = grid.n();
    let fx: Vec<Complex<f64>> = (0..n).map(|i| ik_pow(grid.deriv_wavenumber(i), m[0])).collect();
    let fy: Vec<Complex<f64>> = (0..n).map(|i| ik_pow(grid.deriv_wavenumber(i), m[1])).collect();
    let fz: Vec<Complex<f64>> = (0..n).map(|i| ik_pow(grid.deriv_wavenumber(i), m[2])).collect();
    let mut out = spec.to_vec();
    let mut idx = 0usize;
    for iz in 0..n {
        for iy in 0..n {
            let fyz = fy[iy] * fz[iz];
            for ix in 0..n {
                out[idx] *= fx[ix] * fyz;
                idx += 1;
            }
        }
    }
    fft::inverse(&out, n)
}

fn axis_multi_index(axis: usize) -> [usize; 3] {
    let mut m = [0usize; 3];
    m[axis] = 1;
    m
}

/// Physical values of `div f`.
pub fn divergence(f: &VectorField) -> Vec<f64> {
    let grid = f.grid();
    let spec = f.spectral();
    let mut out = derivative_component(grid, &spec[0], axis_multi_index(0));
    for (c, axis) in [(1usize, 1usize), (2, 2)] {
        let d = derivative_component(grid, &spec[c], axis_multi_index(axis));
        for (o, v) in out.iter_mut().zip(d) {
            *o += v;
        }
    }
    out
}

/// Velocity gradient `(∇f)_{rc} = ∂f_r/∂x_c` by spectral differentiation.
pub fn gradient(f: &VectorField) -> MatrixField {
    let grid = f.grid();
    let spec = f.spectral();
    let mut comps = Vec::with_capacity(9);
    for r in 0..3 {
        for c in 0..3 {
            comps.push(derivative_component(grid, &spec[r], axis_multi_index(c)));
        }
    }
    MatrixField::from_entries(grid, comps).expect("gradient entries match the grid")
}

/// Gradient of a scalar given by its physical samples.
pub fn scalar_gradient(grid: Grid, values: &[f64]) -> Result<VectorField> {
    let spec = fft::forward(values, grid.n());
    let comps = [
        derivative_component(grid, &spec, axis_multi_index(0)),
        derivative_component(grid, &spec, axis_multi_index(1)),
        derivative_component(grid, &spec, axis_multi_index(2)),
    ];
    VectorField::from_components(grid, comps)
}

/// Spectral curl.
pub fn curl(f: &VectorField) -> Result<VectorField> {
    f.ensure_finite("curl input")?;
    let grid = f.grid();
    let spec = f.spectral();
    let d = |comp: usize, axis: usize| derivative_component(grid, &spec[comp], axis_multi_index(axis));
    let (dy_uz, dz_uy) = (d(2, 1), d(1, 2));
    let (dz_ux, dx_uz) = (d(0, 2), d(2, 0));
    let (dx_uy, dy_ux) = (d(1, 0), d(0, 1));
    let sub = |a: Vec<f64>, b: Vec<f64>| a.into_iter().zip(b).map(|(x, y)| x - y).collect();
    VectorField::from_components(grid, [sub(dy_uz, dz_uy), sub(dz_ux, dx_uz), sub(dx_uy, dy_ux)])
}

/// Leray–Hodge projection onto divergence-free fields. The zero mode (the
/// spatial mean) passes through unchanged; what is removed is a pure
/// gradient. Uses the differentiation wavenumbers (Nyquist zeroed) so that
/// the projected field annihilates the same discrete divergence operator
/// the rest of the crate applies.
pub fn leray_project(f: &VectorField) -> Result<VectorField> {
    f.ensure_finite("projection input")?;
    let grid = f.grid();
    let n = grid.n();
    let spec = f.spectral();
    let mut out = [spec[0].clone(), spec[1].clone(), spec[2].clone()];
    for iz in 0..n {
        let kz = grid.deriv_wavenumber(iz) as f64;
        for iy in 0..n {
            let ky = grid.deriv_wavenumber(iy) as f64;
            for ix in 0..n {
                let kx = grid.deriv_wavenumber(ix) as f64;
                let k2 = kx * kx + ky * ky + kz * kz;
                if k2 == 0.0 {
                    continue;
                }
                let i = grid.idx(ix, iy, iz);
                let dot = kx * out[0][i] + ky * out[1][i] + kz * out[2][i];
                let scale = dot / k2;
                out[0][i] -= kx * scale;
                out[1][i] -= ky * scale;
                out[2][i] -= kz * scale;
            }
        }
    }
    VectorField::from_spectral(grid, out)
}

/// Dealiased copy of a field (2/3-rule truncation of its spectrum).
pub fn dealias(f: &VectorField) -> VectorField {
    let grid = f.grid();
    let spec = f.spectral();
    let comps = [
        dealiased_physical(grid, &spec[0]),
        dealiased_physical(grid, &spec[1]),
        dealiased_physical(grid, &spec[2]),
    ];
    VectorField::from_components(grid, comps).expect("dealias preserves the grid")
}

fn filter_output(grid: Grid, comps: [Vec<f64>; 3]) -> VectorField {
    let n = grid.n();
    let filtered = comps.map(|c| {
        let mut s = fft::forward(&c, n);
        dealias_spectrum(grid, &mut s);
        fft::inverse(&s, n)
    });
    VectorField::from_components(grid, filtered).expect("filter preserves the grid")
}

/// Advection term `a·∇b`, dealiased.
pub fn advect(a: &VectorField, b: &VectorField) -> Result<VectorField> {
    a.ensure_same_grid(b)?;
    a.ensure_finite("advection input")?;
    b.ensure_finite("advection input")?;
    let grid = a.grid();
    let a_spec = a.spectral();
    let b_spec = b.spectral();
    let a_phys: [Vec<f64>; 3] = [
        dealiased_physical(grid, &a_spec[0]),
        dealiased_physical(grid, &a_spec[1]),
        dealiased_physical(grid, &a_spec[2]),
    ];
    let mut out: [Vec<f64>; 3] = [
        vec![0.0; grid.len()],
        vec![0.0; grid.len()],
        vec![0.0; grid.len()],
    ];
    for r in 0..3 {
        let mut spec_r = b_spec[r].clone();
        dealias_spectrum(grid, &mut spec_r);
        for axis in 0..3 {
            let db = derivative_component(grid, &spec_r, axis_multi_index(axis));
            for i in 0..grid.len() {
                out[r][i] += a_phys[axis][i] * db[i];
            }
        }
    }
    Ok(filter_output(grid, out))
}

/// Lie derivative (commutator) `L_a b = a·∇b − b·∇a`.
pub fn lie_derivative(a: &VectorField, b: &VectorField) -> Result<VectorField> {
    let fwd = advect(a, b)?;
    let bwd = advect(b, a)?;
    fwd.sub(&bwd)
}

/// L²-adjoint of the Lie derivative for divergence-free `sigma`:
/// `L*_σ v = σ·∇v + (∇σ)ᵀ v`.
pub fn lie_adjoint(sigma: &VectorField, v: &VectorField) -> Result<VectorField> {
    sigma.ensure_same_grid(v)?;
    sigma.ensure_finite("adjoint input")?;
    v.ensure_finite("adjoint input")?;
    // The adjoint formula assumes div σ = 0.
    sigma.ensure_divergence_free(DIV_FREE_INPUT_TOL)?;
    let grid = sigma.grid();
    let transport = advect(sigma, v)?;
    let sigma_spec = sigma.spectral();
    let v_spec = v.spectral();
    let v_phys: [Vec<f64>; 3] = [
        dealiased_physical(grid, &v_spec[0]),
        dealiased_physical(grid, &v_spec[1]),
        dealiased_physical(grid, &v_spec[2]),
    ];
    let mut out: [Vec<f64>; 3] = [
        vec![0.0; grid.len()],
        vec![0.0; grid.len()],
        vec![0.0; grid.len()],
    ];
    for r in 0..3 {
        let mut spec_r = sigma_spec[r].clone();
        dealias_spectrum(grid, &mut spec_r);
        for axis in 0..3 {
            // ((∇σ)ᵀ v)_axis accumulates ∂_axis σ_r · v_r over r.
            let ds = derivative_component(grid, &spec_r, axis_multi_index(axis));
            for i in 0..grid.len() {
                out[axis][i] += ds[i] * v_phys[r][i];
            }
        }
    }
    let stretch = filter_output(grid, out);
    transport.add(&stretch)
}

/// Node-wise cross product, dealiased.
pub fn cross(a: &VectorField, b: &VectorField) -> Result<VectorField> {
    a.ensure_same_grid(b)?;
    let grid = a.grid();
    let a_spec = a.spectral();
    let b_spec = b.spectral();
    let af: [Vec<f64>; 3] = [
        dealiased_physical(grid, &a_spec[0]),
        dealiased_physical(grid, &a_spec[1]),
        dealiased_physical(grid, &a_spec[2]),
    ];
    let bf: [Vec<f64>; 3] = [
        dealiased_physical(grid, &b_spec[0]),
        dealiased_physical(grid, &b_spec[1]),
        dealiased_physical(grid, &b_spec[2]),
    ];
    let mut out: [Vec<f64>; 3] = [
        vec![0.0; grid.len()],
        vec![0.0; grid.len()],
        vec![0.0; grid.len()],
    ];
    for i in 0..grid.len() {
        out[0][i] = af[1][i] * bf[2][i] - af[2][i] * bf[1][i];
        out[1][i] = af[2][i] * bf[0][i] - af[0][i] * bf[2][i];
        out[2][i] = af[0][i] * bf[1][i] - af[1][i] * bf[0][i];
    }
    Ok(filter_output(grid, out))
}

/// Dot product `a·b` as a dealiased scalar grid.
fn dot_dealiased(a: &VectorField, b: &VectorField) -> Vec<f64> {
    let grid = a.grid();
    let a_spec = a.spectral();
    let b_spec = b.spectral();
    let mut out = vec![0.0; grid.len()];
    for c in 0..3 {
        let af = dealiased_physical(grid, &a_spec[c]);
        let bf = dealiased_physical(grid, &b_spec[c]);
        for i in 0..grid.len() {
            out[i] += af[i] * bf[i];
        }
    }
    let n = grid.n();
    let mut s = fft::forward(&out, n);
    dealias_spectrum(grid, &mut s);
    fft::inverse(&s, n)
}

/// Max-norm residuals of the two pointwise identities that connect the
/// rotational form of the advection term with the adjoint Lie operator:
///
/// ```text
/// ω×u = −½∇(u·u) + u·∇u          (ω = curl u)
/// ω×σ = −∇(σ·u) + L*_σ u
/// ```
#[derive(Debug, Clone)]
pub struct VectorIdentityReport {
    /// Relative residual of `ω×u = −½∇(u·u) + u·∇u`.
    pub bernoulli_residual: f64,
    /// Relative residual of `ω×σ = −∇(σ·u) + L*_σ u`.
    pub adjoint_residual: f64,
}

fn relative_max_residual(lhs: &VectorField, rhs: &VectorField) -> Result<f64> {
    let resid = lhs.max_distance(rhs)?;
    let scale = lhs.max_norm().max(rhs.max_norm());
    if scale == 0.0 {
        Ok(0.0)
    } else {
        Ok(resid / scale)
    }
}

pub fn verify_vector_identities(u: &VectorField, sigma: &VectorField) -> Result<VectorIdentityReport> {
    u.ensure_divergence_free(DIV_FREE_INPUT_TOL)?;
    sigma.ensure_divergence_free(DIV_FREE_INPUT_TOL)?;
    let grid = u.grid();
    let omega = curl(u)?;

    let lhs1 = cross(&omega, u)?;
    let half_grad_u2 = scalar_gradient(grid, &dot_dealiased(u, u))?.scale(0.5);
    let rhs1 = advect(u, u)?.sub(&half_grad_u2)?;
    // Both sides of identity 1 can vanish together (Beltrami fields); scale
    // by the advection term so the residual stays meaningful.
    let resid1 = lhs1.max_distance(&rhs1)?;
    let scale1 = lhs1
        .max_norm()
        .max(advect(u, u)?.max_norm())
        .max(half_grad_u2.max_norm());
    let bernoulli_residual = if scale1 == 0.0 { 0.0 } else { resid1 / scale1 };

    let lhs2 = cross(&omega, sigma)?;
    let grad_su = scalar_gradient(grid, &dot_dealiased(sigma, u))?;
    let rhs2 = lie_adjoint(sigma, u)?.sub(&grad_su)?;
    let adjoint_residual = relative_max_residual(&lhs2, &rhs2)?;

    Ok(VectorIdentityReport {
        bernoulli_residual,
        adjoint_residual,
    })
}
