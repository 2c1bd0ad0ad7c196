//! Seeded random ensembles used by the verification sweeps.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::matrix::{c, identity, ComplexMatrix};

/// Deterministic generator for the `trial`-th shard of a sweep.
pub fn shard_rng(seed: u64, tag: &str, trial: u64) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ h.rotate_left(17));
    rng.set_stream(trial);
    rng
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Complex Ginibre matrix with i.i.d. standard complex Gaussian entries.
pub fn random_ginibre<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(dim, dim, |_, _| c(s * gaussian(rng), s * gaussian(rng)))
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let g = random_ginibre(rng, dim);
    (&g + g.adjoint()).scale(0.5)
}

/// Hermitian matrix rescaled to operator norm `norm`.
pub fn random_hermitian_with_norm<R: Rng + ?Sized>(rng: &mut R, dim: usize, norm: f64) -> ComplexMatrix {
    let h = random_hermitian(rng, dim);
    let n = crate::matrix::op_norm(&h);
    if n == 0.0 {
        return h;
    }
    h.scale(norm / n)
}

/// Haar-distributed unitary via QR of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let qr = random_ginibre(rng, dim).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..dim {
            u[(i, k)] *= phase;
        }
    }
    u
}

/// Positive definite matrix `G G* + I/dim`.
pub fn random_positive_definite<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let g = random_ginibre(rng, dim);
    let p = &g * g.adjoint() + identity(dim).scale(1.0 / dim as f64);
    (&p + p.adjoint()).scale(0.5)
}

/// Positive semidefinite matrix of the given rank.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> ComplexMatrix {
    let g = random_ginibre(rng, dim);
    let g = g.columns(0, rank.min(dim)).into_owned();
    let p = &g * g.adjoint();
    (&p + p.adjoint()).scale(0.5)
}

/// Faithful density matrix: spectrum uniform on [0.1, 1] before normalization,
/// eigenbasis Haar random.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let vals: Vec<f64> = (0..dim).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = vals.iter().sum();
    let u = random_unitary(rng, dim);
    let d = crate::matrix::from_real_diag(&vals.iter().map(|v| v / total).collect::<Vec<_>>());
    let rho = &u * d * u.adjoint();
    (&rho + rho.adjoint()).scale(0.5)
}

/// Uniform point on the unit sphere of `C^dim`.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> nalgebra::DVector<num_complex::Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = nalgebra::DVector::from_fn(dim, |_, _| c(s * gaussian(rng), s * gaussian(rng)));
    let n = v.norm();
    v / c(n, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{op_norm, trace};

    #[test]
    fn unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_unitary(&mut rng, 5);
        assert!(op_norm(&(u.adjoint() * &u - identity(5))) < 1e-13);
    }

    #[test]
    fn density_is_faithful_and_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = random_density(&mut rng, 4);
        assert!((trace(&rho).re - 1.0).abs() < 1e-13);
        let eig = crate::matrix::eig_hermitian(&rho).unwrap();
        assert!(eig.values[0] > 0.0);
    }

    #[test]
    fn shards_are_reproducible_and_distinct() {
        let a: f64 = shard_rng(7, "holder", 3).random();
        let b: f64 = shard_rng(7, "holder", 3).random();
        let d: f64 = shard_rng(7, "holder", 4).random();
        let e: f64 = shard_rng(7, "minkowski", 3).random();
        assert_eq!(a, b);
        assert_ne!(a, d);
        assert_ne!(a, e);
    }
}
