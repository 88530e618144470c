//! Seeded random operators for restarts and property checks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::linalg::{DensityMatrix, HermitianMatrix};
use crate::strategies::{StrategyMatrix, StrategySignature};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

/// Complex Ginibre matrix with standard normal entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Gaussian Hermitian matrix `(G + G†)/2`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianMatrix {
    HermitianMatrix::symmetrized(ginibre(rng, n, n))
}

/// `G G† / n` for a square Ginibre `G`.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianMatrix {
    let g = ginibre(rng, n, n);
    HermitianMatrix::symmetrized(&g * g.adjoint() / Complex64::new(n as f64, 0.0))
}

/// Density matrix from the Hilbert–Schmidt ensemble.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DensityMatrix {
    let p = random_psd(rng, n);
    let tr = p.trace();
    DensityMatrix::new_unchecked(p.scale(1.0 / tr))
}

pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DensityMatrix {
    let v = DVector::from_fn(n, |_, _| gaussian(rng));
    DensityMatrix::pure(&v).expect("gaussian vector is nonzero")
}

/// Haar-random unitary via QR of a Ginibre matrix with phase correction.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<Complex64> {
    let qr = ginibre(rng, n, n).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// Uniform point of the probability simplex with `n` coordinates.
pub fn random_simplex_point<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Random POVM with `outcomes` elements on `C^n`: `M_a = S^{-1/2} A_a S^{-1/2}`.
pub fn random_povm<R: Rng + ?Sized>(rng: &mut R, n: usize, outcomes: usize) -> Vec<HermitianMatrix> {
    let parts: Vec<HermitianMatrix> = (0..outcomes).map(|_| random_psd(rng, n)).collect();
    let sum = parts.iter().fold(HermitianMatrix::zeros(n), |acc, p| &acc + p);
    let inv_sqrt = sum
        .map_spectrum(|x| 1.0 / x.sqrt())
        .expect("sum of Ginibre products is positive definite");
    parts
        .iter()
        .map(|p| HermitianMatrix::symmetrized(inv_sqrt.matrix() * p.matrix() * inv_sqrt.matrix()))
        .collect()
}

/// Haar-random isometry `C^cols → C^rows` (`rows ≥ cols`).
pub fn random_isometry<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<Complex64> {
    assert!(rows >= cols, "isometry needs rows >= cols");
    random_unitary(rng, rows).columns(0, cols).into_owned()
}

/// Random channel `C^input → C^output` from a Haar isometry into
/// `output ⊗ environment`.
pub fn random_channel<R: Rng + ?Sized>(rng: &mut R, input: usize, output: usize) -> StrategyMatrix {
    random_comb(rng, &StrategySignature::channel(input, output))
}

/// Random strategy for `sig`, built as a sequence of Haar isometries that
/// pass a memory register from round to round; the final memory is traced
/// out.
pub fn random_comb<R: Rng + ?Sized>(rng: &mut R, sig: &StrategySignature) -> StrategyMatrix {
    // t has rows (y_1..y_j, m) and columns (x_1..x_j)
    let mut t = DMatrix::<Complex64>::identity(1, 1);
    let mut ys = 1usize;
    let mut xs = 1usize;
    let mut mem = 1usize;
    for (&dx, &dy) in sig.in_dims.iter().zip(&sig.out_dims) {
        let next_mem = mem * dx;
        // v: (m, x) -> (y, m')
        let v = random_isometry(rng, dy * next_mem, mem * dx);
        let mut out = DMatrix::<Complex64>::zeros(ys * dy * next_mem, xs * dx);
        for yo in 0..ys {
            for xo in 0..xs {
                for m in 0..mem {
                    let a = t[(yo * mem + m, xo)];
                    if a == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for x in 0..dx {
                        for y in 0..dy {
                            for m2 in 0..next_mem {
                                out[((yo * dy + y) * next_mem + m2, xo * dx + x)] += a * v[(y * next_mem + m2, m * dx + x)];
                            }
                        }
                    }
                }
            }
        }
        t = out;
        ys *= dy;
        xs *= dx;
        mem = next_mem;
    }
    // Q = Σ_e vec(K_e) vec(K_e)†, vec index (y, x)
    let n = ys * xs;
    let mut q = DMatrix::<Complex64>::zeros(n, n);
    for e in 0..mem {
        let v = DVector::from_fn(n, |i, _| t[((i / xs) * mem + e, i % xs)]);
        q += &v * v.adjoint();
    }
    StrategyMatrix::new_unchecked(sig.clone(), HermitianMatrix::symmetrized(q))
}
