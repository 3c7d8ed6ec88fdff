//! Initial-data library: classical divergence-free fields on the torus plus
//! a seeded band-limited random field generator. Every constructor returns a
//! zero-mean, divergence-free field unless stated otherwise.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;

use crate::field::VectorField;
use crate::grid::Grid;
use crate::ops;
use crate::{Error, Result};

/// ABC flow `(A sin x₃ + C cos x₂, B sin x₁ + A cos x₃, C sin x₂ + B cos x₁)`,
/// a Beltrami field (`curl u = u` for A = B = C = 1) and thus a steady Euler
/// solution.
pub fn abc_field(grid: Grid, a: f64, b: f64, c: f64) -> VectorField {
    VectorField::from_fn(grid, |[x, y, z]| {
        [
            a * z.sin() + c * y.cos(),
            b * x.sin() + a * z.cos(),
            c * y.sin() + b * x.cos(),
        ]
    })
}

/// Three-dimensional Taylor–Green vortex.
pub fn taylor_green(grid: Grid, amplitude: f64) -> VectorField {
    VectorField::from_fn(grid, |[x, y, z]| {
        [
            amplitude * x.sin() * y.cos() * z.cos(),
            -amplitude * x.cos() * y.sin() * z.cos(),
            0.0,
        ]
    })
}

/// Plane shear `(amplitude · sin x₂, 0, 0)`.
pub fn shear(grid: Grid, amplitude: f64) -> VectorField {
    VectorField::from_fn(grid, |[_, y, _]| [amplitude * y.sin(), 0.0, 0.0])
}

/// Seeded random field with modes `1 ≤ |k|∞ ≤ kmax`, coefficient magnitude
/// `∝ |k|^{-slope}`, Leray-projected and normalized to unit max norm.
pub fn random_band_limited(grid: Grid, kmax: usize, slope: f64, seed: u64) -> Result<VectorField> {
    if kmax == 0 || kmax as i64 > grid.dealias_cutoff() {
        return Err(Error::Config(format!(
            "band limit kmax must lie in [1, {}], got {kmax}",
            grid.dealias_cutoff()
        )));
    }
    let n = grid.n();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut comps: [Vec<f64>; 3] = [
        vec![0.0; grid.len()],
        vec![0.0; grid.len()],
        vec![0.0; grid.len()],
    ];
    for c in comps.iter_mut() {
        for v in c.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
    }
    let white = VectorField::from_components(grid, comps)?;
    let spec = white.spectral();
    let mut filtered = [spec[0].clone(), spec[1].clone(), spec[2].clone()];
    for iz in 0..n {
        let kz = grid.wavenumber(iz);
        for iy in 0..n {
            let ky = grid.wavenumber(iy);
            for ix in 0..n {
                let kx = grid.wavenumber(ix);
                let kinf = kx.abs().max(ky.abs()).max(kz.abs());
                let i = grid.idx(ix, iy, iz);
                if kinf == 0 || kinf > kmax as i64 {
                    for comp in filtered.iter_mut() {
                        comp[i] = Complex::new(0.0, 0.0);
                    }
                } else {
                    let k2 = (kx * kx + ky * ky + kz * kz) as f64;
                    let w = k2.sqrt().powf(-slope);
                    for comp in filtered.iter_mut() {
                        comp[i] *= w;
                    }
                }
            }
        }
    }
    let shaped = VectorField::from_spectral(grid, filtered)?;
    let projected = ops::leray_project(&shaped)?;
    let amp = projected.max_norm();
    if amp == 0.0 {
        return Err(Error::Config(
            "random field degenerated to zero; change the seed".into(),
        ));
    }
    Ok(projected.scale(1.0 / amp))
}

/// Named initial-data constructors selectable from the run configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSpec {
    Abc { a: f64, b: f64, c: f64 },
    TaylorGreen { amplitude: f64 },
    Shear { amplitude: f64 },
    RandomBandLimited { kmax: usize, slope: f64, seed: u64, amplitude: f64 },
}

impl ScenarioSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioSpec::Abc { .. } => "abc",
            ScenarioSpec::TaylorGreen { .. } => "taylor-green",
            ScenarioSpec::Shear { .. } => "shear",
            ScenarioSpec::RandomBandLimited { .. } => "random",
        }
    }

    pub fn build(&self, grid: Grid) -> Result<VectorField> {
        let u0 = match *self {
            ScenarioSpec::Abc { a, b, c } => abc_field(grid, a, b, c),
            ScenarioSpec::TaylorGreen { amplitude } => taylor_green(grid, amplitude),
            ScenarioSpec::Shear { amplitude } => shear(grid, amplitude),
            ScenarioSpec::RandomBandLimited {
                kmax,
                slope,
                seed,
                amplitude,
            } => random_band_limited(grid, kmax, slope, seed)?.scale(amplitude),
        };
        u0.ensure_divergence_free(1e-10)?;
        Ok(u0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(32).unwrap()
    }

    #[test]
    fn library_fields_are_divergence_free_and_zero_mean() {
        let fields = vec![
            abc_field(grid(), 1.0, 1.0, 1.0),
            taylor_green(grid(), 1.0),
            shear(grid(), 0.5),
            random_band_limited(grid(), 3, 1.5, 9).unwrap(),
        ];
        for f in fields {
            assert!(f.divergence_max_rel() <= 1e-10);
            let m = f.mean();
            for c in 0..3 {
                assert!(m[c].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_field_is_seed_deterministic() {
        let a = random_band_limited(grid(), 3, 1.0, 1234).unwrap();
        let b = random_band_limited(grid(), 3, 1.0, 1234).unwrap();
        assert_eq!(a.max_distance(&b).unwrap(), 0.0);
        let c = random_band_limited(grid(), 3, 1.0, 1235).unwrap();
        assert!(a.max_distance(&c).unwrap() > 1e-3);
    }

    #[test]
    fn random_field_band_limit_enforced() {
        assert!(random_band_limited(grid(), 0, 1.0, 1).is_err());
        assert!(random_band_limited(grid(), 20, 1.0, 1).is_err());
        let f = random_band_limited(grid(), 2, 1.0, 1).unwrap();
        // No content above |k|∞ = 2.
        let spec = f.spectral();
        let g = grid();
        for iz in 0..g.n() {
            for iy in 0..g.n() {
                for ix in 0..g.n() {
                    let kinf = g
                        .wavenumber(ix)
                        .abs()
                        .max(g.wavenumber(iy).abs())
                        .max(g.wavenumber(iz).abs());
                    if kinf > 2 {
                        let i = g.idx(ix, iy, iz);
                        for comp in spec.iter() {
                            assert!(comp[i].norm() < 1e-10);
                        }
                    }
                }
            }
        }
    }
}
