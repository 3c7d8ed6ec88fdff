//! Periodic interpolation of grid-sampled fields at arbitrary torus points.
//!
//! The default scheme is a tricubic B-spline: coefficients are obtained by
//! one exact deconvolution in Fourier space (the periodic prefilter), and
//! evaluation gathers a 4×4×4 stencil. The interpolant passes through the
//! samples at the nodes. `Spectral` evaluates the full trigonometric sum and
//! serves as the accuracy oracle on small grids.

use rayon::prelude::*;
use rustfft::num_complex::Complex;

use crate::fft;
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpScheme {
    /// Prefiltered periodic tricubic B-spline; O(1) per point.
    Tricubic,
    /// Exact trigonometric sum over all modes; O(N³) per point.
    Spectral,
}

impl Default for InterpScheme {
    fn default() -> Self {
        InterpScheme::Tricubic
    }
}

enum Payload {
    /// Interleaved B-spline coefficients, node-major and component-minor
    /// (`coeffs[node * ncomp + c]`), so one stencil tap touches all
    /// components contiguously.
    Tricubic { ncomp: usize, coeffs: Vec<f64> },
    Spectral { spectra: Vec<Vec<Complex<f64>>> },
}

fn interleave(grid: Grid, per_comp: Vec<Vec<f64>>) -> Payload {
    let ncomp = per_comp.len();
    let mut coeffs = vec![0.0; grid.len() * ncomp];
    for (c, comp) in per_comp.iter().enumerate() {
        for (i, &v) in comp.iter().enumerate() {
            coeffs[i * ncomp + c] = v;
        }
    }
    Payload::Tricubic { ncomp, coeffs }
}

/// A bundle of scalar components interpolated jointly (they share stencil
/// weights), e.g. the 3 displacement + 9 Jacobian entries of a flow map.
pub struct FieldInterpolant {
    grid: Grid,
    payload: Payload,
}

/// Cubic B-spline symbol `(2 + cos θ)/3`; dividing each Fourier mode by the
/// product of the three per-axis symbols makes the spline interpolate the
/// samples exactly.
fn bspline_symbol(grid: Grid, i: usize) -> f64 {
    let theta = std::f64::consts::TAU * grid.wavenumber(i) as f64 / grid.n() as f64;
    (2.0 + theta.cos()) / 3.0
}

fn symbol_table(grid: Grid) -> Vec<f64> {
    (0..grid.n()).map(|i| bspline_symbol(grid, i)).collect()
}

fn deconvolve(grid: Grid, spec: &mut [Complex<f64>], sym: &[f64]) {
    let n = grid.n();
    let mut idx = 0usize;
    for iz in 0..n {
        for iy in 0..n {
            let byz = sym[iy] * sym[iz];
            for ix in 0..n {
                spec[idx] /= sym[ix] * byz;
                idx += 1;
            }
        }
    }
}

fn prefilter(grid: Grid, values: &[f64]) -> Vec<f64> {
    let n = grid.n();
    let mut spec = fft::forward(values, n);
    deconvolve(grid, &mut spec, &symbol_table(grid));
    fft::inverse(&spec, n)
}

#[inline]
fn bspline_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        (1.0 - t) * (1.0 - t) * (1.0 - t) / 6.0,
        (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
        (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
        t3 / 6.0,
    ]
}

/// d/dt of the four basis weights (sums to zero).
#[inline]
fn bspline_dweights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    [
        -0.5 * (1.0 - t) * (1.0 - t),
        0.5 * (3.0 * t2 - 4.0 * t),
        0.5 * (-3.0 * t2 + 2.0 * t + 1.0),
        0.5 * t2,
    ]
}

impl FieldInterpolant {
    pub fn new(grid: Grid, comps: &[&[f64]], scheme: InterpScheme) -> Self {
        let payload = match scheme {
            InterpScheme::Tricubic => {
                let per_comp: Vec<Vec<f64>> = comps
                    .par_iter()
                    .map(|c| prefilter(grid, c))
                    .collect();
                interleave(grid, per_comp)
            }
            InterpScheme::Spectral => Payload::Spectral {
                spectra: comps
                    .par_iter()
                    .map(|c| fft::forward(c, grid.n()))
                    .collect(),
            },
        };
        Self { grid, payload }
    }

    /// Build directly from Fourier coefficients, saving the forward
    /// transforms when the spectra are already cached.
    pub fn from_spectra(grid: Grid, spectra: Vec<Vec<Complex<f64>>>, scheme: InterpScheme) -> Self {
        let payload = match scheme {
            InterpScheme::Tricubic => {
                let n = grid.n();
                let sym = symbol_table(grid);
                let per_comp: Vec<Vec<f64>> = spectra
                    .into_par_iter()
                    .map(|mut spec| {
                        deconvolve(grid, &mut spec, &sym);
                        fft::inverse(&spec, n)
                    })
                    .collect();
                interleave(grid, per_comp)
            }
            InterpScheme::Spectral => Payload::Spectral { spectra },
        };
        Self { grid, payload }
    }

    pub fn ncomp(&self) -> usize {
        match &self.payload {
            Payload::Tricubic { ncomp, .. } => *ncomp,
            Payload::Spectral { spectra } => spectra.len(),
        }
    }

    pub fn scheme(&self) -> InterpScheme {
        match self.payload {
            Payload::Tricubic { .. } => InterpScheme::Tricubic,
            Payload::Spectral { .. } => InterpScheme::Spectral,
        }
    }

    /// Evaluate every component at a point; `out.len()` must equal `ncomp`.
    pub fn eval(&self, p: [f64; 3], out: &mut [f64]) {
        match &self.payload {
            Payload::Tricubic { ncomp, coeffs } => {
                self.eval_tricubic(*ncomp, coeffs, p, out)
            }
            Payload::Spectral { spectra } => self.eval_spectral(spectra, p, out),
        }
    }

    fn eval_tricubic(&self, ncomp: usize, coeffs: &[f64], p: [f64; 3], out: &mut [f64]) {
        let n = self.grid.n();
        let h = self.grid.spacing();
        let mut base = [0usize; 3];
        let mut w = [[0.0f64; 4]; 3];
        for axis in 0..3 {
            let u = Grid::wrap(p[axis]) / h;
            let mut i0 = u.floor();
            let mut t = u - i0;
            // Guard against u == N from rounding at the period boundary.
            if i0 as usize >= n {
                i0 = 0.0;
                t = 0.0;
            }
            base[axis] = i0 as usize;
            w[axis] = bspline_weights(t);
        }
        // Wrapped stencil indices per axis: base-1 .. base+2.
        let mut idx = [[0usize; 4]; 3];
        for axis in 0..3 {
            for s in 0..4 {
                idx[axis][s] = (base[axis] + n + s - 1) % n;
            }
        }
        for o in out.iter_mut() {
            *o = 0.0;
        }
        for sz in 0..4 {
            let wz = w[2][sz];
            let iz = idx[2][sz];
            for sy in 0..4 {
                let wyz = w[1][sy] * wz;
                let iy = idx[1][sy];
                let row = (iz * n + iy) * n;
                for sx in 0..4 {
                    let weight = w[0][sx] * wyz;
                    let node = (row + idx[0][sx]) * ncomp;
                    let taps = &coeffs[node..node + ncomp];
                    for (o, c) in out.iter_mut().zip(taps) {
                        *o += weight * c;
                    }
                }
            }
        }
    }

    /// Evaluate all components together with their spatial gradients.
    /// `grads[c*3 + axis] = ∂_axis f_c`. For the tricubic scheme the
    /// gradient is the exact derivative of the spline interpolant; for the
    /// spectral scheme it is the exact Fourier derivative.
    pub fn eval_with_gradient(&self, p: [f64; 3], vals: &mut [f64], grads: &mut [f64]) {
        match &self.payload {
            Payload::Tricubic { ncomp, coeffs } => {
                self.eval_tricubic_grad(*ncomp, coeffs, p, vals, grads)
            }
            Payload::Spectral { spectra } => self.eval_spectral_grad(spectra, p, vals, grads),
        }
    }

    fn eval_tricubic_grad(
        &self,
        ncomp: usize,
        coeffs: &[f64],
        p: [f64; 3],
        vals: &mut [f64],
        grads: &mut [f64],
    ) {
        let n = self.grid.n();
        let h = self.grid.spacing();
        let inv_h = 1.0 / h;
        let mut base = [0usize; 3];
        let mut w = [[0.0f64; 4]; 3];
        let mut dw = [[0.0f64; 4]; 3];
        for axis in 0..3 {
            let u = Grid::wrap(p[axis]) / h;
            let mut i0 = u.floor();
            let mut t = u - i0;
            if i0 as usize >= n {
                i0 = 0.0;
                t = 0.0;
            }
            base[axis] = i0 as usize;
            w[axis] = bspline_weights(t);
            let d = bspline_dweights(t);
            dw[axis] = [d[0] * inv_h, d[1] * inv_h, d[2] * inv_h, d[3] * inv_h];
        }
        let mut idx = [[0usize; 4]; 3];
        for axis in 0..3 {
            for s in 0..4 {
                idx[axis][s] = (base[axis] + n + s - 1) % n;
            }
        }
        for v in vals.iter_mut() {
            *v = 0.0;
        }
        for g in grads.iter_mut() {
            *g = 0.0;
        }
        for sz in 0..4 {
            let (wz, dz) = (w[2][sz], dw[2][sz]);
            let iz = idx[2][sz];
            for sy in 0..4 {
                let (wy, dy) = (w[1][sy], dw[1][sy]);
                let iy = idx[1][sy];
                let w_yz = wy * wz;
                let d_yz = dy * wz;
                let w_ydz = wy * dz;
                let row = (iz * n + iy) * n;
                for sx in 0..4 {
                    let (wx, dx) = (w[0][sx], dw[0][sx]);
                    let weight = wx * w_yz;
                    let gx = dx * w_yz;
                    let gy = wx * d_yz;
                    let gz = wx * w_ydz;
                    let node = (row + idx[0][sx]) * ncomp;
                    let taps = &coeffs[node..node + ncomp];
                    for (c, &tap) in taps.iter().enumerate() {
                        vals[c] += weight * tap;
                        grads[c * 3] += gx * tap;
                        grads[c * 3 + 1] += gy * tap;
                        grads[c * 3 + 2] += gz * tap;
                    }
                }
            }
        }
    }

    fn eval_spectral_grad(
        &self,
        spectra: &[Vec<Complex<f64>>],
        p: [f64; 3],
        vals: &mut [f64],
        grads: &mut [f64],
    ) {
        let n = self.grid.n();
        let norm = 1.0 / (n * n * n) as f64;
        let mut phases = vec![[Complex::new(0.0, 0.0); 3]; n];
        for i in 0..n {
            for axis in 0..3 {
                let k = self.grid.wavenumber(i) as f64;
                let arg = k * p[axis];
                phases[i][axis] = Complex::new(arg.cos(), arg.sin());
            }
        }
        let ik: Vec<f64> = (0..n).map(|i| self.grid.deriv_wavenumber(i) as f64).collect();
        for (c, spec) in spectra.iter().enumerate() {
            let mut acc = Complex::new(0.0, 0.0);
            let mut gacc = [Complex::new(0.0, 0.0); 3];
            for iz in 0..n {
                let pz = phases[iz][2];
                for iy in 0..n {
                    let pyz = phases[iy][1] * pz;
                    let row = (iz * n + iy) * n;
                    let mut inner = Complex::new(0.0, 0.0);
                    let mut inner_dx = Complex::new(0.0, 0.0);
                    for ix in 0..n {
                        let term = spec[row + ix] * phases[ix][0];
                        inner += term;
                        inner_dx += term * Complex::new(0.0, ik[ix]);
                    }
                    acc += inner * pyz;
                    gacc[0] += inner_dx * pyz;
                    gacc[1] += inner * pyz * Complex::new(0.0, ik[iy]);
                    gacc[2] += inner * pyz * Complex::new(0.0, ik[iz]);
                }
            }
            vals[c] = acc.re * norm;
            for axis in 0..3 {
                grads[c * 3 + axis] = gacc[axis].re * norm;
            }
        }
    }

    fn eval_spectral(&self, spectra: &[Vec<Complex<f64>>], p: [f64; 3], out: &mut [f64]) {
        let n = self.grid.n();
        let norm = 1.0 / (n * n * n) as f64;
        // Per-axis phase tables e^{i k x}.
        let mut phases = vec![[Complex::new(0.0, 0.0); 3]; n];
        for i in 0..n {
            for axis in 0..3 {
                let k = self.grid.wavenumber(i) as f64;
                let arg = k * p[axis];
                phases[i][axis] = Complex::new(arg.cos(), arg.sin());
            }
        }
        for (o, spec) in out.iter_mut().zip(spectra) {
            let mut acc = Complex::new(0.0, 0.0);
            for iz in 0..n {
                let pz = phases[iz][2];
                for iy in 0..n {
                    let pyz = phases[iy][1] * pz;
                    let row = (iz * n + iy) * n;
                    let mut inner = Complex::new(0.0, 0.0);
                    for ix in 0..n {
                        inner += spec[row + ix] * phases[ix][0];
                    }
                    acc += inner * pyz;
                }
            }
            *o = acc.re * norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(32).unwrap()
    }

    fn sample(grid: Grid, f: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
        let mut v = vec![0.0; grid.len()];
        for (i, p) in grid.points() {
            v[i] = f(p);
        }
        v
    }

    #[test]
    fn exact_at_grid_nodes() {
        let g = grid();
        let vals = sample(g, |[x, y, z]| (x + 2.0 * y).sin() * z.cos());
        let interp = FieldInterpolant::new(g, &[&vals], InterpScheme::Tricubic);
        let mut out = [0.0];
        for (i, p) in g.points() {
            interp.eval(p, &mut out);
            assert!((out[0] - vals[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_scheme_reproduces_band_limited_exactly() {
        let g = grid();
        let f = |[x, y, z]: [f64; 3]| (2.0 * x).sin() + (y - z).cos();
        let vals = sample(g, f);
        let interp = FieldInterpolant::new(g, &[&vals], InterpScheme::Spectral);
        let mut out = [0.0];
        for p in [[0.13, 5.1, 2.7], [3.3, 0.02, 1.9], [6.0, 6.0, 0.5]] {
            interp.eval(p, &mut out);
            assert!((out[0] - f(p)).abs() < 1e-11, "at {p:?}");
        }
    }

    #[test]
    fn tricubic_tracks_spectral_oracle_on_smooth_field() {
        // Low-mode field of modest amplitude: the spline should stay within
        // 1e-6 of the exact trigonometric evaluation.
        let g = grid();
        let amp = 0.02;
        let f = |[x, y, z]: [f64; 3]| amp * ((x).sin() + (y).cos() * (z).sin());
        let vals = sample(g, f);
        let tri = FieldInterpolant::new(g, &[&vals], InterpScheme::Tricubic);
        let spe = FieldInterpolant::new(g, &[&vals], InterpScheme::Spectral);
        let mut a = [0.0];
        let mut b = [0.0];
        let mut max_err = 0.0f64;
        for i in 0..200 {
            let t = i as f64 * 0.7;
            let p = [
                Grid::wrap(1.618 * t),
                Grid::wrap(2.414 * t + 0.3),
                Grid::wrap(0.577 * t + 1.1),
            ];
            tri.eval(p, &mut a);
            spe.eval(p, &mut b);
            max_err = max_err.max((a[0] - b[0]).abs());
        }
        assert!(max_err <= 1e-6, "tricubic vs spectral max err {max_err}");
    }

    #[test]
    fn shared_weights_interpolate_multiple_components() {
        let g = grid();
        let v0 = sample(g, |[x, _, _]| x.sin());
        let v1 = sample(g, |[_, y, _]| y.cos());
        let interp = FieldInterpolant::new(g, &[&v0, &v1], InterpScheme::Tricubic);
        let mut out = [0.0, 0.0];
        interp.eval([0.4, 1.3, 2.2], &mut out);
        assert!((out[0] - 0.4f64.sin()).abs() < 2e-5);
        assert!((out[1] - 1.3f64.cos()).abs() < 2e-5);
    }
}
