//! Discrete Hölder norm estimation on the torus grid.
//!
//! For a field `u` and a multi-index `m`,
//!
//! ```text
//! ‖u‖_l      = Σ_{|m|≤l} sup_x |∂^m u(x)|
//! ‖u‖_{l,α}  = ‖u‖_l + Σ_{|m|=l} sup_{x≠y} |∂^m u(x) − ∂^m u(y)| / |x−y|^α
//! ```
//!
//! Derivatives are spectral; suprema run over grid nodes and the seminorm
//! sup over a sampled set of node pairs. Every estimate is therefore a lower
//! bound of the continuum norm, exact in the limit of all pairs; it is a
//! monitor, not a certified bound.

use rustfft::num_complex::Complex;

use crate::fft;
use crate::field::{MatrixField, VectorField};
use crate::grid::Grid;
use crate::ops::derivative_component;
use crate::{Error, Result};

/// Default cap on the derivative order accepted by the public estimators.
pub const DEFAULT_MAX_DERIVATIVE_ORDER: usize = 2;

/// All-pairs sampling is quadratic in the node count; keep it to small grids.
pub const ALL_PAIRS_MAX_N: usize = 16;

/// The 13 lattice directions (axes, face diagonals, body diagonals modulo
/// sign) used by the strided pair policy.
pub const LATTICE_DIRECTIONS: [[i64; 3]; 13] = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 1, 0],
    [1, -1, 0],
    [1, 0, 1],
    [1, 0, -1],
    [0, 1, 1],
    [0, 1, -1],
    [1, 1, 1],
    [1, 1, -1],
    [1, -1, 1],
    [1, -1, -1],
];

/// Which grid-point pairs enter the seminorm supremum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PairPolicy {
    /// Every unordered pair of grid nodes. Only allowed for N ≤ 16.
    AllPairs,
    /// Offsets `stride · e` along the 13 lattice directions.
    Strided { strides: Vec<usize> },
}

impl PairPolicy {
    /// Dyadic strides `{1, 2, 4, …, N/2}` along the 13 lattice directions.
    pub fn default_strided(grid: Grid) -> Self {
        let mut strides = Vec::new();
        let mut s = 1;
        while s <= grid.n() / 2 {
            strides.push(s);
            s *= 2;
        }
        PairPolicy::Strided { strides }
    }

    fn validate(&self, grid: Grid) -> Result<()> {
        match self {
            PairPolicy::AllPairs => {
                if grid.n() > ALL_PAIRS_MAX_N {
                    return Err(Error::AllPairsTooLarge {
                        n: grid.n(),
                        max: ALL_PAIRS_MAX_N,
                    });
                }
            }
            PairPolicy::Strided { strides } => {
                if strides.is_empty() || strides.iter().any(|&s| s == 0 || s > grid.n() / 2) {
                    return Err(Error::Config(format!(
                        "strides must lie in [1, N/2] and be non-empty, got {strides:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A lower-bound estimate of `‖·‖_{l,α}` together with the sampling policy
/// that produced it.
#[derive(Debug, Clone)]
pub struct HolderEstimate {
    pub l: usize,
    pub alpha: f64,
    /// Derivative-sup part `Σ_{|m|≤l} sup |∂^m u|`.
    pub norm_l: f64,
    /// Sampled seminorm part `Σ_{|m|=l} |∂^m u|_α`.
    pub seminorm: f64,
    /// `norm_l + seminorm`.
    pub value: f64,
    pub policy: PairPolicy,
}

fn multi_indices_of_degree(d: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for m0 in 0..=d {
        for m1 in 0..=(d - m0) {
            out.push([m0, m1, d - m0 - m1]);
        }
    }
    out
}

fn sup_magnitude(comps: &[Vec<f64>]) -> f64 {
    let len = comps[0].len();
    let mut m = 0.0f64;
    for i in 0..len {
        let mut s = 0.0;
        for c in comps {
            s += c[i] * c[i];
        }
        m = m.max(s);
    }
    m.sqrt()
}

fn pair_magnitude_sq(comps: &[Vec<f64>], i: usize, j: usize) -> f64 {
    let mut s = 0.0;
    for c in comps {
        let d = c[i] - c[j];
        s += d * d;
    }
    s
}

fn seminorm_strided(grid: Grid, comps: &[Vec<f64>], strides: &[usize], alpha: f64) -> f64 {
    let n = grid.n();
    let h = grid.spacing();
    let mut best = 0.0f64;
    for dir in LATTICE_DIRECTIONS {
        let dir_len = ((dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]) as f64).sqrt();
        for &stride in strides {
            let off = [
                (dir[0] * stride as i64).rem_euclid(n as i64) as usize,
                (dir[1] * stride as i64).rem_euclid(n as i64) as usize,
                (dir[2] * stride as i64).rem_euclid(n as i64) as usize,
            ];
            let mut max_sq = 0.0f64;
            for iz in 0..n {
                let jz = (iz + off[2]) % n;
                for iy in 0..n {
                    let jy = (iy + off[1]) % n;
                    for ix in 0..n {
                        let jx = (ix + off[0]) % n;
                        let i = grid.idx(ix, iy, iz);
                        let j = grid.idx(jx, jy, jz);
                        let d = pair_magnitude_sq(comps, i, j);
                        if d > max_sq {
                            max_sq = d;
                        }
                    }
                }
            }
            // Geodesic pair distance: stride ≤ N/2 keeps each offset within
            // half a period, so no wrapping correction is needed.
            let dist = h * stride as f64 * dir_len;
            best = best.max(max_sq.sqrt() / dist.powf(alpha));
        }
    }
    best
}

fn seminorm_all_pairs(grid: Grid, comps: &[Vec<f64>], alpha: f64) -> f64 {
    let n = grid.n();
    let pts: Vec<[f64; 3]> = grid.points().map(|(_, p)| p).collect();
    let mut best = 0.0f64;
    for i in 0..n * n * n {
        for j in (i + 1)..n * n * n {
            let d = pair_magnitude_sq(comps, i, j).sqrt();
            if d == 0.0 {
                continue;
            }
            let dist = Grid::distance(pts[i], pts[j]);
            best = best.max(d / dist.powf(alpha));
        }
    }
    best
}

/// Core estimator over an arbitrary list of scalar components (3 for a
/// vector field, 9 for a matrix field); magnitudes are Euclidean across
/// components.
pub fn holder_estimate_spectra(
    grid: Grid,
    spectra: &[Vec<Complex<f64>>],
    l: usize,
    alpha: f64,
    policy: &PairPolicy,
    max_l: usize,
) -> Result<HolderEstimate> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::BadAlpha(alpha));
    }
    if l > max_l {
        return Err(Error::DerivativeOrder {
            requested: l,
            max: max_l,
        });
    }
    policy.validate(grid)?;

    let mut norm_l = 0.0;
    let mut seminorm = 0.0;
    for degree in 0..=l {
        for m in multi_indices_of_degree(degree) {
            let deriv: Vec<Vec<f64>> = spectra
                .iter()
                .map(|s| derivative_component(grid, s, m))
                .collect();
            norm_l += sup_magnitude(&deriv);
            if degree == l {
                seminorm += match policy {
                    PairPolicy::AllPairs => seminorm_all_pairs(grid, &deriv, alpha),
                    PairPolicy::Strided { strides } => {
                        seminorm_strided(grid, &deriv, strides, alpha)
                    }
                };
            }
        }
    }
    Ok(HolderEstimate {
        l,
        alpha,
        norm_l,
        seminorm,
        value: norm_l + seminorm,
        policy: policy.clone(),
    })
}

/// `‖f‖_{l,α}` estimate for a vector field, capped at the default maximum
/// derivative order.
pub fn holder_norm(
    f: &VectorField,
    l: usize,
    alpha: f64,
    policy: &PairPolicy,
) -> Result<HolderEstimate> {
    holder_norm_capped(f, l, alpha, policy, DEFAULT_MAX_DERIVATIVE_ORDER)
}

/// Same estimator with an explicit derivative-order cap (used internally for
/// the noise summability report, which needs order l+3).
pub fn holder_norm_capped(
    f: &VectorField,
    l: usize,
    alpha: f64,
    policy: &PairPolicy,
    max_l: usize,
) -> Result<HolderEstimate> {
    f.ensure_finite("Hölder estimate input")?;
    let spec = f.spectral();
    holder_estimate_spectra(f.grid(), spec.as_slice(), l, alpha, policy, max_l)
}

/// Hölder estimate of a 9-component matrix field (Frobenius magnitudes).
pub fn holder_norm_matrix(
    m: &MatrixField,
    l: usize,
    alpha: f64,
    policy: &PairPolicy,
) -> Result<HolderEstimate> {
    let grid = m.grid();
    let spectra: Vec<Vec<Complex<f64>>> = m
        .components()
        .iter()
        .map(|c| fft::forward(c, grid.n()))
        .collect();
    holder_estimate_spectra(grid, &spectra, l, alpha, policy, DEFAULT_MAX_DERIVATIVE_ORDER)
}

/// Estimate of `‖a − b‖_{l,α}`.
pub fn holder_distance(
    a: &VectorField,
    b: &VectorField,
    l: usize,
    alpha: f64,
    policy: &PairPolicy,
) -> Result<HolderEstimate> {
    holder_norm(&a.sub(b)?, l, alpha, policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid16() -> Grid {
        Grid::new(16).unwrap()
    }

    #[test]
    fn constant_field_norm_is_its_magnitude() {
        let f = VectorField::from_fn(grid16(), |_| [3.0, 0.0, 4.0]);
        let e = holder_norm(&f, 0, 0.5, &PairPolicy::default_strided(grid16())).unwrap();
        assert!((e.norm_l - 5.0).abs() < 1e-12);
        assert!(e.seminorm.abs() < 1e-10);
    }

    #[test]
    fn zero_field_is_zero_for_any_order() {
        let f = VectorField::zeros(grid16());
        for l in 0..=2 {
            let e = holder_norm(&f, l, 0.3, &PairPolicy::default_strided(grid16())).unwrap();
            assert_eq!(e.value, 0.0);
        }
    }

    #[test]
    fn all_pairs_matches_brute_force_oracle() {
        // Independent brute force over every grid pair for f = (sin x₁, 0, 0).
        let g = grid16();
        let f = VectorField::from_fn(g, |[x, _, _]| [x.sin(), 0.0, 0.0]);
        let alpha = 0.5;

        let mut oracle = 0.0f64;
        let pts: Vec<[f64; 3]> = g.points().map(|(_, p)| p).collect();
        let vals: Vec<f64> = (0..g.len()).map(|i| f.comp(0)[i]).collect();
        for i in 0..g.len() {
            for j in (i + 1)..g.len() {
                let diff = (vals[i] - vals[j]).abs();
                if diff == 0.0 {
                    continue;
                }
                let dist = Grid::distance(pts[i], pts[j]);
                oracle = oracle.max(diff / dist.powf(alpha));
            }
        }

        let e = holder_norm(&f, 0, alpha, &PairPolicy::AllPairs).unwrap();
        assert!(
            (e.seminorm - oracle).abs() <= 1e-12 * oracle,
            "estimate {} vs oracle {oracle}",
            e.seminorm
        );
    }

    #[test]
    fn strided_policy_is_a_lower_bound_of_all_pairs() {
        let g = grid16();
        let f = VectorField::from_fn(g, |[x, y, z]| {
            [(x + 2.0 * y).sin(), (y - z).cos(), (x * 1.0).sin() * z.cos()]
        });
        let all = holder_norm(&f, 0, 0.5, &PairPolicy::AllPairs).unwrap();
        let strided = holder_norm(&f, 0, 0.5, &PairPolicy::default_strided(g)).unwrap();
        assert!(strided.seminorm <= all.seminorm + 1e-12);
    }

    #[test]
    fn estimate_grows_under_pair_refinement() {
        let g = grid16();
        let f = VectorField::from_fn(g, |[x, y, _]| [(3.0 * x).sin(), (2.0 * y).cos(), 0.0]);
        let coarse = holder_norm(&f, 1, 0.5, &PairPolicy::Strided { strides: vec![4] }).unwrap();
        let mid = holder_norm(&f, 1, 0.5, &PairPolicy::Strided { strides: vec![2, 4] }).unwrap();
        let fine =
            holder_norm(&f, 1, 0.5, &PairPolicy::Strided { strides: vec![1, 2, 4, 8] }).unwrap();
        assert!(coarse.value <= mid.value + 1e-14);
        assert!(mid.value <= fine.value + 1e-14);
    }

    #[test]
    fn norms_nest_in_the_derivative_order() {
        let g = grid16();
        let f = VectorField::from_fn(g, |[x, y, z]| [(x).sin(), (2.0 * y).cos(), (y + z).sin()]);
        let p = PairPolicy::default_strided(g);
        let e0 = holder_norm(&f, 0, 0.5, &p).unwrap();
        let e1 = holder_norm(&f, 1, 0.5, &p).unwrap();
        let e2 = holder_norm(&f, 2, 0.5, &p).unwrap();
        assert!(e0.norm_l <= e1.norm_l + 1e-14);
        assert!(e1.norm_l <= e2.norm_l + 1e-14);
    }

    #[test]
    fn input_validation() {
        let g = grid16();
        let f = VectorField::zeros(g);
        let p = PairPolicy::default_strided(g);
        assert!(matches!(holder_norm(&f, 0, 1.2, &p), Err(Error::BadAlpha(_))));
        assert!(matches!(holder_norm(&f, 0, -0.1, &p), Err(Error::BadAlpha(_))));
        assert!(matches!(
            holder_norm(&f, 3, 0.5, &p),
            Err(Error::DerivativeOrder { .. })
        ));
        let g32 = Grid::new(32).unwrap();
        let f32 = VectorField::zeros(g32);
        assert!(matches!(
            holder_norm(&f32, 0, 0.5, &PairPolicy::AllPairs),
            Err(Error::AllPairsTooLarge { .. })
        ));
    }

    #[test]
    fn sin_derivative_sup_is_exact() {
        // ‖(sin x₁, 0, 0)‖_1 = sup|f| + Σ_axis sup|∂f| = 1 + 1.
        let g = grid16();
        let f = VectorField::from_fn(g, |[x, _, _]| [x.sin(), 0.0, 0.0]);
        let e = holder_norm(&f, 1, 0.5, &PairPolicy::default_strided(g)).unwrap();
        assert!((e.norm_l - 2.0).abs() < 1e-12, "norm_l = {}", e.norm_l);
    }
}
