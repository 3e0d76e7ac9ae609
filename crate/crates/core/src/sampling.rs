//! Seeded point sets: uniform draws, Latin hypercubes, shifted Halton
//! sequences, and per-purpose seed derivation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::Bounds;

pub type SeededRng = ChaCha8Rng;

/// Distinct random streams drawn within a single optimization step. Keeping
/// them separate lets two algorithms share e.g. the acquisition stream while
/// one of them also consumes a virtual-point stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Random = 1,
    FHyper = 2,
    GHyper = 3,
    Acquisition = 4,
    Virtual = 5,
    Ratio = 6,
    Diagnostic = 7,
    InitialDesign = 8,
    Trial = 9,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed, an iteration index and a stream tag into a new seed.
pub fn derive_seed(base: u64, index: u64, stream: Stream) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(index)) ^ (stream as u64).wrapping_mul(0xA24B_AED4_963E_E407))
}

pub fn rng_for(base: u64, index: u64, stream: Stream) -> SeededRng {
    SeededRng::seed_from_u64(derive_seed(base, index, stream))
}

pub fn uniform_point<R: Rng + ?Sized>(bounds: &Bounds, rng: &mut R) -> Vec<f64> {
    (0..bounds.dim())
        .map(|d| rng.random_range(bounds.lower(d)..=bounds.upper(d)))
        .collect()
}

/// `n` points in the unit cube, one per stratum along every axis, jittered
/// uniformly inside each stratum.
pub fn latin_hypercube_unit<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dim]; n];
    if n == 0 {
        return pts;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    for d in 0..dim {
        perm.shuffle(rng);
        for (i, p) in pts.iter_mut().enumerate() {
            let u: f64 = rng.random();
            p[d] = (perm[i] as f64 + u) / n as f64;
        }
    }
    pts
}

pub fn latin_hypercube<R: Rng + ?Sized>(n: usize, bounds: &Bounds, rng: &mut R) -> Vec<Vec<f64>> {
    latin_hypercube_unit(n, bounds.dim(), rng)
        .into_iter()
        .map(|u| bounds.from_unit(&u))
        .collect()
}

/// Two Latin hypercubes stacked so the first `n_small` points are a subset of
/// the full `n_large` set.
pub fn nested_latin_hypercube<R: Rng + ?Sized>(
    n_small: usize,
    n_large: usize,
    bounds: &Bounds,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let mut pts = latin_hypercube(n_small, bounds, rng);
    pts.extend(latin_hypercube(n_large.saturating_sub(n_small), bounds, rng));
    pts
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Halton points in the unit cube with a Cranley-Patterson rotation drawn
/// from `rng`. Dimensions beyond the prime table fall back to uniform draws.
pub fn shifted_halton_unit<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let shift: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
    (0..n)
        .map(|i| {
            (0..dim)
                .map(|d| {
                    let base = match PRIMES.get(d) {
                        Some(&p) => p as u64,
                        None => return rng.random(),
                    };
                    let v = radical_inverse(i as u64 + 1, base) + shift[d];
                    v - v.floor()
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lhs_has_one_point_per_stratum() {
        let mut rng = SeededRng::seed_from_u64(3);
        let pts = latin_hypercube_unit(17, 4, &mut rng);
        for d in 0..4 {
            let mut strata: Vec<usize> = pts.iter().map(|p| (p[d] * 17.0).floor() as usize).collect();
            strata.sort();
            assert_eq!(strata, (0..17).collect::<Vec<_>>());
        }
    }

    #[test]
    fn nested_design_prefix_is_its_own_lhs() {
        let b = Bounds::uniform(2, -1.0, 1.0).unwrap();
        let mut rng = SeededRng::seed_from_u64(9);
        let pts = nested_latin_hypercube(5, 10, &b, &mut rng);
        assert_eq!(pts.len(), 10);
        for d in 0..2 {
            let mut strata: Vec<usize> = pts[..5]
                .iter()
                .map(|p| (b.to_unit(p)[d] * 5.0).floor() as usize)
                .collect();
            strata.sort();
            assert_eq!(strata, vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn derived_seeds_differ_by_stream_and_index() {
        let a = derive_seed(7, 1, Stream::Acquisition);
        assert_ne!(a, derive_seed(7, 1, Stream::Virtual));
        assert_ne!(a, derive_seed(7, 2, Stream::Acquisition));
        assert_eq!(a, derive_seed(7, 1, Stream::Acquisition));
    }

    #[test]
    fn halton_stays_in_unit_cube() {
        let mut rng = SeededRng::seed_from_u64(1);
        for p in shifted_halton_unit(200, 3, &mut rng) {
            assert!(p.iter().all(|&v| (0.0..1.0).contains(&v)));
        }
    }
}
