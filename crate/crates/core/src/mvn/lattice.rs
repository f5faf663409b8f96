//! Randomly shifted Kronecker (Richtmyer) point sets with the baker's transform.

use alloc::vec::Vec;
use rand::Rng;

use crate::rng::rng_from_seed;

/// Generator `sqrt(prime_j) mod 1` for each of `dim` coordinates.
pub(crate) fn generators(dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(dim);
    let mut candidate = 2u64;
    while out.len() < dim {
        if is_prime(candidate) {
            let s = libm::sqrt(candidate as f64);
            out.push(s - libm::floor(s));
        }
        candidate += 1;
    }
    out
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// One randomization of the lattice: a random shift drawn from `seed`.
pub(crate) struct ShiftedLattice<'a> {
    generators: &'a [f64],
    shift: Vec<f64>,
}

impl<'a> ShiftedLattice<'a> {
    pub(crate) fn new(generators: &'a [f64], seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let shift = generators.iter().map(|_| rng.random::<f64>()).collect();
        Self { generators, shift }
    }

    /// Writes point `i` (1-based index into the sequence) into `out`.
    #[inline]
    pub(crate) fn point(&self, i: usize, out: &mut [f64]) {
        let fi = i as f64;
        for ((o, g), s) in out.iter_mut().zip(self.generators).zip(&self.shift) {
            let x = fi * g + s;
            let x = x - libm::floor(x);
            // baker's transform keeps the rule periodic-smooth
            *o = 1.0 - libm::fabs(2.0 * x - 1.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_stay_in_unit_cube_and_fill_it() {
        let g = generators(3);
        let lat = ShiftedLattice::new(&g, 11);
        let mut p = [0.0; 3];
        let mut mean = [0.0; 3];
        let n = 4096;
        for i in 1..=n {
            lat.point(i, &mut p);
            for (m, &x) in mean.iter_mut().zip(&p) {
                assert!((0.0..=1.0).contains(&x));
                *m += x / n as f64;
            }
        }
        for m in mean {
            assert!((m - 0.5).abs() < 5e-3);
        }
    }

    #[test]
    fn first_generators_are_sqrt_primes() {
        let g = generators(4);
        let expect = [2.0f64, 3.0, 5.0, 7.0].map(|p| p.sqrt() - p.sqrt().floor());
        for (a, b) in g.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
