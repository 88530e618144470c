//! Discrete Weyl operators and the discrete Wigner representation on `C^n`,
//! `n` odd.
//!
//! The operators `V_{a,b} = W_{a,b} T W_{a,b}†` with `W_{a,b} = X^a Z^b` and
//! the parity `T|a⟩ = |−a⟩` are unitary, Hermitian, have unit trace and are
//! pairwise orthogonal with `⟨V_j, V_k⟩ = n δ_jk`. They are ordered
//! lexicographically in `(a, b)` with `a` outer, so `V_1 = T`.
//!
//! `ψ(H)_k = (⟨V_k, H⟩ + 1) / (n(n+1))` maps density operators into the
//! simplex `Δ_{n²}`; its inverse is `ψ⁻¹(v) = (n+1) Σ v_k V_k − I`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hs_inner_unchecked, HermitianMatrix};

fn check_odd(n: usize) -> Result<()> {
    if n == 0 || n % 2 == 0 {
        return Err(Error::EvenDimension(n));
    }
    Ok(())
}

/// `X^a Z^b` with `X|j⟩ = |j+1⟩` and `Z|j⟩ = ω^j|j⟩`, `ω = exp(2πi/n)`.
pub fn weyl(a: usize, b: usize, n: usize) -> Result<DMatrix<Complex64>> {
    check_odd(n)?;
    let omega = |k: usize| Complex64::from_polar(1.0, 2.0 * PI * (k % n) as f64 / n as f64);
    // (X^a Z^b)|j⟩ = ω^{bj} |j + a⟩
    let mut w = DMatrix::zeros(n, n);
    for j in 0..n {
        w[((j + a) % n, j)] = omega(b * j);
    }
    Ok(w)
}

/// The parity permutation `T|a⟩ = |−a mod n⟩`.
pub fn parity_operator(n: usize) -> Result<HermitianMatrix> {
    check_odd(n)?;
    let mut t = DMatrix::zeros(n, n);
    for a in 0..n {
        t[((n - a) % n, a)] = Complex64::new(1.0, 0.0);
    }
    Ok(HermitianMatrix::symmetrized(t))
}

/// The ordered orthogonal family `V_1, …, V_{n²}`.
#[derive(Debug, Clone)]
pub struct WignerBasis {
    n: usize,
    operators: Vec<HermitianMatrix>,
}

static CACHE: OnceLock<Mutex<HashMap<usize, Arc<WignerBasis>>>> = OnceLock::new();

impl WignerBasis {
    pub fn build(n: usize) -> Result<Self> {
        let t = parity_operator(n)?;
        let mut operators = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let w = weyl(a, b, n)?;
                let v = &w * t.matrix() * w.adjoint();
                operators.push(HermitianMatrix::symmetrized(v));
            }
        }
        Ok(Self { n, operators })
    }

    /// Shared instance, built once per dimension.
    pub fn shared(n: usize) -> Result<Arc<Self>> {
        check_odd(n)?;
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(b) = cache.lock().unwrap().get(&n) {
            return Ok(Arc::clone(b));
        }
        let built = Arc::new(Self::build(n)?);
        Ok(Arc::clone(cache.lock().unwrap().entry(n).or_insert(built)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn operators(&self) -> &[HermitianMatrix] {
        &self.operators
    }

    /// `V_{a,b}` by its residues.
    pub fn get(&self, a: usize, b: usize) -> &HermitianMatrix {
        &self.operators[(a % self.n) * self.n + (b % self.n)]
    }

    /// `√n·(n+1)`, the exact scale between Frobenius distances of operators
    /// and Euclidean distances of their representations.
    pub fn isometry_scale(&self) -> f64 {
        (self.n as f64).sqrt() * (self.n as f64 + 1.0)
    }

    pub fn psi(&self, h: &HermitianMatrix) -> Result<Vec<f64>> {
        if h.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, actual: h.dim() });
        }
        let scale = 1.0 / (self.n as f64 * (self.n as f64 + 1.0));
        Ok(self
            .operators
            .iter()
            .map(|v| (hs_inner_unchecked(v, h) + 1.0) * scale)
            .collect())
    }

    pub fn psi_inv(&self, v: &[f64]) -> Result<HermitianMatrix> {
        if v.len() != self.n * self.n {
            return Err(Error::DimensionMismatch { expected: self.n * self.n, actual: v.len() });
        }
        let mut acc = DMatrix::<Complex64>::zeros(self.n, self.n);
        for (op, &w) in self.operators.iter().zip(v) {
            if w != 0.0 {
                acc += op.matrix() * Complex64::new(w, 0.0);
            }
        }
        let h = HermitianMatrix::symmetrized(acc).scale(self.n as f64 + 1.0);
        Ok(h.shift(-1.0))
    }
}

pub fn build_basis(n: usize) -> Result<WignerBasis> {
    WignerBasis::build(n)
}

pub fn psi(h: &HermitianMatrix, basis: &WignerBasis) -> Result<Vec<f64>> {
    basis.psi(h)
}

pub fn psi_inv(v: &[f64], basis: &WignerBasis) -> Result<HermitianMatrix> {
    basis.psi_inv(v)
}
