//! Dense complex Hermitian matrix algebra.
//!
//! Every operator in the crate is a [`HermitianMatrix`]: tensor products,
//! partial traces, Hilbert–Schmidt inner products, norms, the projection onto
//! the positive semidefinite cone and the `normalize` map onto density
//! operators.
//!
//! Tensor factors use one global index convention: the first factor is the
//! most significant digit of the composite index, so `(a, b) ↦ a·dim(B) + b`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::config::DEFAULT;
use crate::error::{Error, Result};

/// A dense Hermitian matrix. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    data: DMatrix<Complex64>,
}

/// Eigendecomposition `H = Σ λ_k v_k v_k†`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

/// Frobenius, trace and spectral norm of a Hermitian matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub frobenius: f64,
    pub trace_norm: f64,
    pub spectral: f64,
}

impl HermitianMatrix {
    /// Symmetrizes `m` as `(m + m†)/2`, rejecting inputs whose anti-Hermitian
    /// part is larger than the construction tolerance.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(Error::InvalidArgument("matrix dimension must be at least 1".into()));
        }
        let adj = m.adjoint();
        let skew = (&m - &adj).norm() / 2.0;
        let scale = m.norm().max(1.0);
        if skew > DEFAULT.hermitian_reject * scale {
            return Err(Error::NotHermitian(skew));
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without checking; for results of Hermiticity-preserving
    /// arithmetic where only rounding noise can appear.
    pub(crate) fn symmetrized(m: DMatrix<Complex64>) -> Self {
        let adj = m.adjoint();
        let mut data = (m + adj) * Complex64::new(0.5, 0.0);
        for i in 0..data.nrows() {
            data[(i, i)].im = 0.0;
        }
        Self { data }
    }

    pub fn from_real(m: DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| Complex64::new(x, 0.0)));
        Self { data: DMatrix::from_diagonal(&v) }
    }

    pub fn identity(n: usize) -> Self {
        Self { data: DMatrix::identity(n, n) }
    }

    pub fn zeros(n: usize) -> Self {
        Self { data: DMatrix::zeros(n, n) }
    }

    /// The rank-one projector `v v†`.
    pub fn projector(v: &DVector<Complex64>) -> Self {
        Self::symmetrized(v * v.adjoint())
    }

    /// `|i⟩⟨i|` in dimension `n`.
    pub fn basis_projector(n: usize, i: usize) -> Self {
        let mut d = vec![0.0; n];
        d[i] = 1.0;
        Self::from_diagonal(&d)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.data[(i, i)].re).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.data[(i, i)].re).collect()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { data: &self.data * Complex64::new(s, 0.0) }
    }

    /// `self + s·I`.
    pub fn shift(&self, s: f64) -> Self {
        let mut data = self.data.clone();
        for i in 0..self.dim() {
            data[(i, i)].re += s;
        }
        Self { data }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.norm()
    }

    /// Frobenius distance `‖self − other‖₂`.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "distance between matrices of different dimension");
        (&self.data - &other.data).norm()
    }

    /// Largest entry of the anti-Hermitian part; zero for matrices built
    /// through this type, kept for invariant checks.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                worst = worst.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn eigh(&self) -> Result<Spectrum> {
        let eig = SymmetricEigen::try_new(self.data.clone(), f64::EPSILON, 10_000)
            .ok_or(Error::EigenFailure)?;
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Ok(Spectrum { values, vectors })
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.eigh()?.values)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(*self.eigenvalues()?.last().unwrap())
    }

    /// Spectral norm `max |λ|`.
    pub fn spectral_norm(&self) -> Result<f64> {
        let ev = self.eigenvalues()?;
        Ok(ev.iter().fold(0.0_f64, |m, x| m.max(x.abs())))
    }

    /// Applies a real function to the eigenvalues.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let s = self.eigh()?;
        Ok(s.reassemble(s.values.iter().map(|&x| f(x)).collect::<Vec<_>>().as_slice()))
    }
}

impl Spectrum {
    /// `Σ w_k v_k v_k†` on this eigenbasis.
    pub fn reassemble(&self, weights: &[f64]) -> HermitianMatrix {
        let mut scaled = self.vectors.clone();
        for (k, &w) in weights.iter().enumerate() {
            let mut col = scaled.column_mut(k);
            col *= Complex64::new(w, 0.0);
        }
        HermitianMatrix::symmetrized(&scaled * self.vectors.adjoint())
    }

    /// Eigenvector for the largest eigenvalue.
    pub fn top_vector(&self) -> DVector<Complex64> {
        self.vectors.column(self.vectors.ncols() - 1).into_owned()
    }
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: Self) -> HermitianMatrix {
        HermitianMatrix { data: &self.data + &rhs.data }
    }
}

impl Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: Self) -> HermitianMatrix {
        HermitianMatrix { data: &self.data - &rhs.data }
    }
}

impl Neg for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn neg(self) -> HermitianMatrix {
        HermitianMatrix { data: -&self.data }
    }
}

impl Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn mul(self, rhs: f64) -> HermitianMatrix {
        self.scale(rhs)
    }
}

/// A density operator: PSD with unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    base: HermitianMatrix,
}

impl DensityMatrix {
    pub fn new(base: HermitianMatrix) -> Result<Self> {
        let tr = base.trace();
        if (tr - 1.0).abs() > DEFAULT.density_trace {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let min = base.min_eigenvalue()?;
        if min < -DEFAULT.density_min_eig {
            return Err(Error::InvalidDensity(format!("min eigenvalue {min:.3e}")));
        }
        Ok(Self { base })
    }

    pub(crate) fn new_unchecked(base: HermitianMatrix) -> Self {
        Self { base }
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self { base: HermitianMatrix::identity(n).scale(1.0 / n as f64) }
    }

    /// `|i⟩⟨i|`.
    pub fn basis_state(n: usize, i: usize) -> Self {
        Self { base: HermitianMatrix::basis_projector(n, i) }
    }

    pub fn pure(v: &DVector<Complex64>) -> Result<Self> {
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::InvalidDensity("zero vector".into()));
        }
        Ok(Self { base: HermitianMatrix::projector(&(v / Complex64::new(norm, 0.0))) })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.base
    }

    pub fn into_hermitian(self) -> HermitianMatrix {
        self.base
    }
}

impl AsRef<HermitianMatrix> for DensityMatrix {
    fn as_ref(&self) -> &HermitianMatrix {
        &self.base
    }
}

/// Dimensions of the tensor factors of a composite space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FactorShape {
    dims: Vec<usize>,
}

impl FactorShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidShape(format!("{dims:?}")));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    /// Stride of each factor in the composite index.
    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for f in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[f] = strides[f + 1] * self.dims[f + 1];
        }
        strides
    }

    /// Composite-index offsets of every multi-index over `factors`, in
    /// lexicographic order of those factors.
    pub(crate) fn offsets(&self, factors: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut out = vec![0usize];
        for &f in factors {
            let mut next = Vec::with_capacity(out.len() * self.dims[f]);
            for &base in &out {
                for d in 0..self.dims[f] {
                    next.push(base + d * strides[f]);
                }
            }
            out = next;
        }
        out
    }
}

/// Kronecker product `A ⊗ B`, first factor most significant.
pub fn tensor(a: &HermitianMatrix, b: &HermitianMatrix) -> HermitianMatrix {
    HermitianMatrix { data: a.data.kronecker(&b.data) }
}

/// `A₁ ⊗ ··· ⊗ A_m`.
pub fn tensor_all<'a, I>(factors: I) -> HermitianMatrix
where
    I: IntoIterator<Item = &'a HermitianMatrix>,
{
    factors
        .into_iter()
        .fold(HermitianMatrix::identity(1), |acc, f| tensor(&acc, f))
}

fn validate_keep(shape: &FactorShape, keep: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.is_empty() {
        return Err(Error::InvalidShape("keep set must be nonempty".into()));
    }
    if let Some(&bad) = kept.iter().find(|&&k| k >= shape.len()) {
        return Err(Error::InvalidShape(format!("factor {bad} out of range for {} factors", shape.len())));
    }
    let traced = (0..shape.len()).filter(|f| !kept.contains(f)).collect();
    Ok((kept, traced))
}

/// Partial trace over the complement of `keep`; the kept factors stay in
/// ascending order.
pub fn partial_trace(a: &HermitianMatrix, shape: &FactorShape, keep: &[usize]) -> Result<HermitianMatrix> {
    if shape.total() != a.dim() {
        return Err(Error::DimensionMismatch { expected: shape.total(), actual: a.dim() });
    }
    let (kept, traced) = validate_keep(shape, keep)?;
    let ok = shape.offsets(&kept);
    let ot = shape.offsets(&traced);
    let k = ok.len();
    let mut out = DMatrix::<Complex64>::zeros(k, k);
    for (i, &oi) in ok.iter().enumerate() {
        for (j, &oj) in ok.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &t in &ot {
                acc += a.data[(oi + t, oj + t)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(HermitianMatrix::symmetrized(out))
}

/// Inverse placement of [`partial_trace`]: `R ⊗ I` with the identity on the
/// factors not in `keep`, each factor back at its original position.
pub fn embed_identity(r: &HermitianMatrix, shape: &FactorShape, keep: &[usize]) -> Result<HermitianMatrix> {
    let (kept, traced) = validate_keep(shape, keep)?;
    let ok = shape.offsets(&kept);
    if ok.len() != r.dim() {
        return Err(Error::DimensionMismatch { expected: ok.len(), actual: r.dim() });
    }
    let ot = shape.offsets(&traced);
    let n = shape.total();
    let mut out = DMatrix::<Complex64>::zeros(n, n);
    for (i, &oi) in ok.iter().enumerate() {
        for (j, &oj) in ok.iter().enumerate() {
            let v = r.data[(i, j)];
            for &t in &ot {
                out[(oi + t, oj + t)] = v;
            }
        }
    }
    Ok(HermitianMatrix { data: out })
}

/// Reorders tensor factors: factor `perm[i]` of the input becomes factor `i`
/// of the output.
pub fn permute_factors(a: &HermitianMatrix, shape: &FactorShape, perm: &[usize]) -> Result<HermitianMatrix> {
    if shape.total() != a.dim() {
        return Err(Error::DimensionMismatch { expected: shape.total(), actual: a.dim() });
    }
    let mut sorted = perm.to_vec();
    sorted.sort_unstable();
    if sorted != (0..shape.len()).collect::<Vec<_>>() {
        return Err(Error::InvalidShape(format!("{perm:?} is not a permutation of {} factors", shape.len())));
    }
    // offsets(perm) enumerates input indices in the output's lexicographic order
    let src = shape.offsets(perm);
    let n = a.dim();
    let out = DMatrix::from_fn(n, n, |i, j| a.data[(src[i], src[j])]);
    Ok(HermitianMatrix { data: out })
}

/// Hilbert–Schmidt inner product `Tr(A·B)`; real for Hermitian operands.
pub fn hs_inner(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), actual: b.dim() });
    }
    Ok(hs_inner_unchecked(a, b))
}

pub(crate) fn hs_inner_unchecked(a: &HermitianMatrix, b: &HermitianMatrix) -> f64 {
    // Tr(AB) = Σ A_ij B_ji = Σ A_ij conj(B_ij) for Hermitian B.
    a.data
        .iter()
        .zip(b.data.iter())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

pub fn norms(a: &HermitianMatrix) -> Result<Norms> {
    let ev = a.eigenvalues()?;
    Ok(Norms {
        frobenius: a.frobenius_norm(),
        trace_norm: ev.iter().map(|x| x.abs()).sum(),
        spectral: ev.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
    })
}

/// Frobenius-nearest PSD matrix: negative eigenvalues clamped to zero.
pub fn project_psd(h: &HermitianMatrix) -> Result<HermitianMatrix> {
    let s = h.eigh()?;
    if s.values[0] >= 0.0 {
        return Ok(h.clone());
    }
    let clamped: Vec<f64> = s.values.iter().map(|&x| x.max(0.0)).collect();
    Ok(s.reassemble(&clamped))
}

/// `P/Tr(P)` when `Tr(P) ≥ 1`, otherwise `P + (1 − Tr(P))·I/n`.
pub fn normalize_psd(p: &HermitianMatrix) -> Result<DensityMatrix> {
    let min = p.min_eigenvalue()?;
    if min < -DEFAULT.normalize_reject {
        return Err(Error::NotPositive(min));
    }
    Ok(DensityMatrix::new_unchecked(normalize_unchecked(p)))
}

pub(crate) fn normalize_unchecked(p: &HermitianMatrix) -> HermitianMatrix {
    let tr = p.trace();
    let n = p.dim() as f64;
    if tr >= 1.0 {
        p.scale(1.0 / tr)
    } else {
        p.shift((1.0 - tr) / n)
    }
}

/// Euclidean projection of a real vector onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Frobenius projection onto the density operators: eigenvalues projected
/// onto the unit simplex.
pub fn project_density(h: &HermitianMatrix) -> Result<DensityMatrix> {
    let s = h.eigh()?;
    let w = project_simplex(&s.values);
    Ok(DensityMatrix::new_unchecked(s.reassemble(&w)))
}
