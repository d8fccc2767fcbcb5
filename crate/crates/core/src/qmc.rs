//! Randomly shifted Kronecker (Richtmyer) lattice points.

use crate::rng::RngStream;

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Generator vector frac(√p_d) for the first `dim` primes.
#[derive(Clone, Debug)]
pub struct Kronecker {
    alpha: Vec<f64>,
}

impl Kronecker {
    pub fn new(dim: usize) -> Self {
        assert!(dim <= PRIMES.len(), "Kronecker sequence supports at most {} dimensions", PRIMES.len());
        let alpha = PRIMES[..dim].iter().map(|&p| (p as f64).sqrt().fract()).collect();
        Self { alpha }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// Point `i` shifted by `shift`, written into `out`.
    #[inline]
    pub fn point_into(&self, i: u64, shift: &[f64], out: &mut [f64]) {
        let fi = i as f64;
        for ((o, &a), &s) in out.iter_mut().zip(&self.alpha).zip(shift) {
            *o = (fi * a + s).fract();
        }
    }
}

/// Baker's (tent) transform, which lifts lattice rules to second order.
#[inline]
pub fn baker(u: f64) -> f64 {
    1.0 - (2.0 * u - 1.0).abs()
}

/// Uniform random shift in [0,1)^dim.
pub fn random_shift(dim: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..dim).map(|_| rng.uniform()).collect()
}

/// `n_points` randomly shifted Kronecker points in [0,1)^dim, shift drawn from `shift`.
pub fn qmc_points(dim: usize, n_points: usize, shift: &mut RngStream) -> Vec<Vec<f64>> {
    let seq = Kronecker::new(dim);
    let s = random_shift(dim, shift);
    (0..n_points)
        .map(|i| {
            let mut p = vec![0.0; dim];
            seq.point_into(i as u64 + 1, &s, &mut p);
            p
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_in_unit_cube() {
        for dim in [1, 3, 12] {
            let pts = qmc_points(dim, 4096, &mut RngStream::new(1, dim as u64));
            assert!(pts.iter().flatten().all(|&u| (0.0..1.0).contains(&u)));
        }
    }

    #[test]
    fn mean_of_identity_is_half() {
        let pts = qmc_points(1, 1 << 14, &mut RngStream::new(7, 0));
        let mean = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
        assert!((mean - 0.5).abs() <= 1e-3);
    }

    #[test]
    fn same_shift_same_points() {
        let a = qmc_points(4, 100, &mut RngStream::new(3, 3));
        let b = qmc_points(4, 100, &mut RngStream::new(3, 3));
        assert_eq!(a, b);
    }

    #[test]
    fn lattice_beats_plain_monte_carlo_on_smooth_integrand() {
        // ∫ Π (1 + (u−½)) over [0,1]^5 = 1
        let pts = qmc_points(5, 1 << 12, &mut RngStream::new(2, 0));
        let est = pts
            .iter()
            .map(|p| p.iter().map(|&u| 1.0 + (baker(u) - 0.5)).product::<f64>())
            .sum::<f64>()
            / pts.len() as f64;
        assert!((est - 1.0).abs() < 1e-3, "{est}");
    }
}
