use std::f64::consts::TAU;

use crate::{Error, Result};

/// Uniform N³ grid over the periodic box `[0, 2π)³`, x-fastest storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    n: usize,
}

impl Grid {
    /// N must be a power of two and at least 8.
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::BadResolution(n));
        }
        Ok(Self { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of grid points, N³.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing h = 2π/N.
    #[inline]
    pub fn spacing(&self) -> f64 {
        TAU / self.n as f64
    }

    #[inline]
    pub fn idx(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.n + iy) * self.n + ix
    }

    /// Integer wavenumber for FFT bin `i`: 0..N/2 then -N/2..-1.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i <= self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Wavenumber used for spectral differentiation: the Nyquist bin is
    /// zeroed so odd-order derivatives of real data stay real.
    #[inline]
    pub fn deriv_wavenumber(&self, i: usize) -> i64 {
        if i == self.n / 2 {
            0
        } else {
            self.wavenumber(i)
        }
    }

    /// Largest retained wavenumber under the 2/3 dealiasing rule.
    #[inline]
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n / 3) as i64
    }

    #[inline]
    pub fn point(&self, ix: usize, iy: usize, iz: usize) -> [f64; 3] {
        let h = self.spacing();
        [ix as f64 * h, iy as f64 * h, iz as f64 * h]
    }

    /// Iterate `(linear index, [x,y,z])` over all nodes in storage order.
    pub fn points(&self) -> impl Iterator<Item = (usize, [f64; 3])> + '_ {
        let n = self.n;
        (0..n).flat_map(move |iz| {
            (0..n).flat_map(move |iy| {
                (0..n).map(move |ix| (self.idx(ix, iy, iz), self.point(ix, iy, iz)))
            })
        })
    }

    /// Wrap a coordinate into `[0, 2π)`.
    #[inline]
    pub fn wrap(x: f64) -> f64 {
        let r = x.rem_euclid(TAU);
        if r == TAU {
            0.0
        } else {
            r
        }
    }

    /// Wrap a displacement into `[-π, π)`.
    #[inline]
    pub fn wrap_centered(d: f64) -> f64 {
        let r = (d + std::f64::consts::PI).rem_euclid(TAU);
        r - std::f64::consts::PI
    }

    /// Geodesic distance between two points of the torus.
    pub fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
        let mut s = 0.0;
        for c in 0..3 {
            let d = Self::wrap_centered(a[c] - b[c]);
            s += d * d;
        }
        s.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_resolutions() {
        assert!(Grid::new(7).is_err());
        assert!(Grid::new(12).is_err());
        assert!(Grid::new(4).is_err());
        assert!(Grid::new(8).is_ok());
        assert!(Grid::new(32).is_ok());
    }

    #[test]
    fn wavenumber_layout() {
        let g = Grid::new(8).unwrap();
        let ks: Vec<i64> = (0..8).map(|i| g.wavenumber(i)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, 4, -3, -2, -1]);
        assert_eq!(g.deriv_wavenumber(4), 0);
    }

    #[test]
    fn torus_distance_wraps() {
        let a = [0.1, 0.0, 0.0];
        let b = [TAU - 0.1, 0.0, 0.0];
        assert!((Grid::distance(a, b) - 0.2).abs() < 1e-14);
    }

    #[test]
    fn wrap_centered_range() {
        for &d in &[-10.0, -3.2, 0.0, 3.1, 9.9, 100.0] {
            let w = Grid::wrap_centered(d);
            assert!((-std::f64::consts::PI..std::f64::consts::PI).contains(&w));
            assert!(((w - d) / TAU - ((w - d) / TAU).round()).abs() < 1e-12);
        }
    }
}
