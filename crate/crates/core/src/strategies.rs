//! Strategy spaces of the quantum strategies (combs) framework.
//!
//! A player acting in `r` rounds receives `X_1`, sends `Y_1`, …, receives
//! `X_r`, sends `Y_r`. Its strategy is a PSD operator `Q` on
//! `Y_1 ⊗ ··· ⊗ Y_r ⊗ X_1 ⊗ ··· ⊗ X_r` obeying the chain
//!
//! ```text
//! Tr_{Y_r}(Q)         = X_{r-1} ⊗ I_{X_r}
//! Tr_{Y_{j}}(X_{j})   = X_{j-1} ⊗ I_{X_j}      (j = r-1, …, 2)
//! Tr_{Y_1}(X_1)       = I_{X_1}
//! ```
//!
//! Writing `τ_S` for the trace-and-replace map `Q ↦ Tr_S(Q) ⊗ I_S / dim(S)`,
//! level `j` of the chain is `Π_j Q = 0` with `Π_j = (1 − τ_{X_j}) τ_{S_j}` and
//! `S_j = {Y_j, …, Y_r, X_{j+1}, …, X_r}`. The `Π_j` are mutually orthogonal
//! projectors and are orthogonal to `Π_0 = τ_all` (the trace), so the affine
//! constraint set has a closed-form projection. The PSD cone is then handled
//! by dual ascent (Dykstra's method with momentum).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::DEFAULT;
use crate::error::{Error, Result};
use crate::linalg::{
    embed_identity, hs_inner, partial_trace, project_density, project_psd, tensor, tensor_all, FactorShape, HermitianMatrix,
};

/// Register dimensions of a player's interaction, round by round.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StrategySignature {
    pub in_dims: Vec<usize>,
    pub out_dims: Vec<usize>,
}

impl StrategySignature {
    pub fn new(in_dims: Vec<usize>, out_dims: Vec<usize>) -> Result<Self> {
        let sig = Self { in_dims, out_dims };
        sig.validate()?;
        Ok(sig)
    }

    /// One round, trivial input: the player prepares a state on `C^n`.
    pub fn state_preparation(n: usize) -> Self {
        Self { in_dims: vec![1], out_dims: vec![n] }
    }

    /// One round: a channel from `C^in` to `C^out`.
    pub fn channel(input: usize, output: usize) -> Self {
        Self { in_dims: vec![input], out_dims: vec![output] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dims.is_empty() || self.in_dims.len() != self.out_dims.len() {
            return Err(Error::InvalidShape(format!(
                "signature needs equally many (≥ 1) input and output registers, got {} and {}",
                self.in_dims.len(),
                self.out_dims.len()
            )));
        }
        if self.in_dims.contains(&0) || self.out_dims.contains(&0) {
            return Err(Error::InvalidShape("register dimensions must be positive".into()));
        }
        Ok(())
    }

    pub fn rounds(&self) -> usize {
        self.in_dims.len()
    }

    /// `n_k = Π out · Π in`.
    pub fn total_dim(&self) -> usize {
        self.output_dim() * self.input_dim()
    }

    /// `d_k = Π in`, the trace of every strategy.
    pub fn input_dim(&self) -> usize {
        self.in_dims.iter().product()
    }

    pub fn output_dim(&self) -> usize {
        self.out_dims.iter().product()
    }

    pub fn is_state_preparation(&self) -> bool {
        self.in_dims.iter().all(|&d| d == 1)
    }

    /// Factor layout `[Y_1, …, Y_r, X_1, …, X_r]`.
    pub fn shape(&self) -> FactorShape {
        let dims = self.out_dims.iter().chain(&self.in_dims).copied().collect();
        FactorShape::new(dims).expect("validated signature")
    }

    fn y(&self, round: usize) -> usize {
        round
    }

    fn x(&self, round: usize) -> usize {
        self.rounds() + round
    }
}

/// `τ_S(Q) = Tr_S(Q) ⊗ I_S / dim(S)` for the factors listed in `traced`.
fn trace_replace(q: &HermitianMatrix, shape: &FactorShape, traced: &[usize]) -> HermitianMatrix {
    if traced.is_empty() {
        return q.clone();
    }
    let keep: Vec<usize> = (0..shape.len()).filter(|f| !traced.contains(f)).collect();
    let d: usize = traced.iter().map(|&f| shape.dims()[f]).product();
    if keep.is_empty() {
        return HermitianMatrix::identity(q.dim()).scale(q.trace() / d as f64);
    }
    let marginal = partial_trace(q, shape, &keep).expect("shape matches");
    embed_identity(&marginal, shape, &keep).expect("shape matches").scale(1.0 / d as f64)
}

/// `Π_j Q` for round `j` (0-based): the component of `Q` violating level `j`.
fn level_violation(q: &HermitianMatrix, sig: &StrategySignature, j: usize) -> HermitianMatrix {
    let r = sig.rounds();
    let shape = sig.shape();
    let mut s: Vec<usize> = (j..r).map(|i| sig.y(i)).collect();
    s.extend((j + 1..r).map(|i| sig.x(i)));
    let a = trace_replace(q, &shape, &s);
    let b = trace_replace(&a, &shape, &[sig.x(j)]);
    &a - &b
}

/// Which affine constraint set a projection targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AffineTarget {
    /// Full chain with `Tr(Q) = t`.
    Trace(f64),
    /// Chain with the final marginal only proportional to the identity.
    Cone,
}

/// Exact Frobenius projection onto the affine constraint set, with the
/// last level either fixed to trace `t` or left homogeneous.
pub fn project_affine_target(h: &HermitianMatrix, sig: &StrategySignature, target: AffineTarget) -> Result<HermitianMatrix> {
    sig.validate()?;
    if h.dim() != sig.total_dim() {
        return Err(Error::DimensionMismatch { expected: sig.total_dim(), actual: h.dim() });
    }
    let mut out = h.clone();
    for j in 0..sig.rounds() {
        out = &out - &level_violation(h, sig, j);
    }
    if let AffineTarget::Trace(t) = target {
        let n = h.dim() as f64;
        out = out.shift((t - h.trace()) / n);
    }
    Ok(out)
}

/// Projection onto the constraint chain of `𝒮_k` (`homogeneous = false`,
/// final marginal `I`) or of its cone (`homogeneous = true`, final marginal
/// proportional to `I`).
pub fn project_affine(h: &HermitianMatrix, sig: &StrategySignature, homogeneous: bool) -> Result<HermitianMatrix> {
    let target = if homogeneous {
        AffineTarget::Cone
    } else {
        AffineTarget::Trace(sig.input_dim() as f64)
    };
    project_affine_target(h, sig, target)
}

/// Per-level diagnostics of the strategy constraints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintReport {
    /// `max(0, −λ_min(Q))`.
    pub psd_violation: f64,
    /// Frobenius residuals of the chain, ordered from level `r` down to the
    /// final `Tr_{Y_1}(X_1) = I` check.
    pub level_residuals: Vec<f64>,
    /// `|Tr(Q) − d_k|`.
    pub trace_residual: f64,
    pub tolerance: f64,
}

impl ConstraintReport {
    pub fn max_residual(&self) -> f64 {
        self.level_residuals.iter().copied().fold(self.trace_residual, f64::max)
    }

    pub fn passes(&self) -> bool {
        self.psd_violation <= self.tolerance && self.max_residual() <= self.tolerance
    }
}

/// Evaluates the constraint chain, extracting the auxiliary operators
/// `X_{j-1} = Tr_{X_j}(Tr_{Y_j}(X_j)) / dim(X_j)` from the top down.
pub fn check_strategy(q: &HermitianMatrix, sig: &StrategySignature, tol: f64) -> Result<ConstraintReport> {
    sig.validate()?;
    if q.dim() != sig.total_dim() {
        return Err(Error::DimensionMismatch { expected: sig.total_dim(), actual: q.dim() });
    }
    let r = sig.rounds();
    let mut level_residuals = Vec::with_capacity(r);
    // current operator lives on [Y_1..Y_j, X_1..X_j]
    let mut current = q.clone();
    for j in (1..r).rev() {
        let dims: Vec<usize> = sig.out_dims[..=j].iter().chain(&sig.in_dims[..=j]).copied().collect();
        let shape = FactorShape::new(dims)?;
        let keep: Vec<usize> = (0..shape.len()).filter(|&f| f != j).collect();
        let traced_y = partial_trace(&current, &shape, &keep)?;
        let dx = sig.in_dims[j];
        let inner_dims: Vec<usize> = sig.out_dims[..j].iter().chain(&sig.in_dims[..=j]).copied().collect();
        let inner_shape = FactorShape::new(inner_dims)?;
        let last = inner_shape.len() - 1;
        let candidate = partial_trace(&traced_y, &inner_shape, &(0..last).collect::<Vec<_>>())?.scale(1.0 / dx as f64);
        let rebuilt = tensor(&candidate, &HermitianMatrix::identity(dx));
        level_residuals.push(traced_y.distance(&rebuilt));
        current = candidate;
    }
    let shape = FactorShape::new(vec![sig.out_dims[0], sig.in_dims[0]])?;
    let marginal = partial_trace(&current, &shape, &[1])?;
    level_residuals.push(marginal.distance(&HermitianMatrix::identity(sig.in_dims[0])));

    let min = q.min_eigenvalue()?;
    Ok(ConstraintReport {
        psd_violation: (-min).max(0.0),
        level_residuals,
        trace_residual: (q.trace() - sig.input_dim() as f64).abs(),
        tolerance: tol,
    })
}

/// A validated strategy `Q ∈ 𝒮_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyMatrix {
    sig: StrategySignature,
    q: HermitianMatrix,
}

impl StrategyMatrix {
    pub fn new(sig: StrategySignature, q: HermitianMatrix) -> Result<Self> {
        Self::with_tolerance(sig, q, DEFAULT.strategy_residual)
    }

    pub fn with_tolerance(sig: StrategySignature, q: HermitianMatrix, tol: f64) -> Result<Self> {
        let report = check_strategy(&q, &sig, tol)?;
        if report.psd_violation > DEFAULT.strategy_psd.max(tol) {
            return Err(Error::NotPositive(-report.psd_violation));
        }
        if report.max_residual() > tol {
            return Err(Error::InvalidArgument(format!(
                "strategy constraints violated (max residual {:.3e})",
                report.max_residual()
            )));
        }
        Ok(Self { sig, q })
    }

    pub(crate) fn new_unchecked(sig: StrategySignature, q: HermitianMatrix) -> Self {
        Self { sig, q }
    }

    /// `d_k · I / n_k`: every round answered with the maximally mixed state.
    pub fn uniform(sig: StrategySignature) -> Self {
        let q = HermitianMatrix::identity(sig.total_dim()).scale(1.0 / sig.output_dim() as f64);
        Self { sig, q }
    }

    pub fn signature(&self) -> &StrategySignature {
        &self.sig
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.q
    }

    pub fn into_matrix(self) -> HermitianMatrix {
        self.q
    }
}

/// Choi matrix `J(Φ) = Σ Φ(|a⟩⟨b|) ⊗ |a⟩⟨b|` of a channel given by Kraus
/// operators, factor order `Y ⊗ X`.
pub fn choi_of_channel(kraus: &[DMatrix<Complex64>], in_dim: usize, out_dim: usize) -> Result<StrategyMatrix> {
    if kraus.is_empty() {
        return Err(Error::InvalidArgument("empty Kraus set".into()));
    }
    let mut completeness = DMatrix::<Complex64>::zeros(in_dim, in_dim);
    for k in kraus {
        if k.shape() != (out_dim, in_dim) {
            return Err(Error::DimensionMismatch { expected: out_dim * in_dim, actual: k.nrows() * k.ncols() });
        }
        completeness += k.adjoint() * k;
    }
    let deviation = (completeness - DMatrix::<Complex64>::identity(in_dim, in_dim)).norm();
    if deviation > 1e-8 {
        return Err(Error::NotTracePreserving(deviation));
    }
    let n = in_dim * out_dim;
    let mut j = DMatrix::<Complex64>::zeros(n, n);
    for k in kraus {
        // vec(K)[(y, a)] = K[y, a]
        let v = nalgebra::DVector::from_fn(n, |idx, _| k[(idx / in_dim, idx % in_dim)]);
        j += &v * v.adjoint();
    }
    Ok(StrategyMatrix::new_unchecked(
        StrategySignature::channel(in_dim, out_dim),
        HermitianMatrix::symmetrized(j),
    ))
}

/// `⟨P_a, Q_1 ⊗ ··· ⊗ Q_m⟩`.
pub fn outcome_probability(p: &HermitianMatrix, profile: &[StrategyMatrix]) -> Result<f64> {
    let joint = tensor_all(profile.iter().map(|s| s.matrix()));
    hs_inner(p, &joint)
}

/// Result of an alternating-projection solve.
#[derive(Debug, Clone)]
pub struct Projection {
    pub matrix: HermitianMatrix,
    pub iterations: usize,
    /// Affine residual of the returned PSD iterate.
    pub residual: f64,
}

/// Frobenius projection onto `PSD ∩ {affine chain}`.
///
/// Solves the dual problem over multipliers `λ` orthogonal to the affine
/// subspace: the primal point is `X(λ) = P_psd(H + λ)` and the dual gradient
/// is `P_A(X) − X`. With unit steps this is Dykstra's method; Nesterov
/// momentum with gradient restarts is layered on top. The returned matrix is
/// the PSD iterate, so it misses the affine constraints by at most `tol`.
pub fn project_intersection(
    h: &HermitianMatrix,
    sig: &StrategySignature,
    target: AffineTarget,
    tol: f64,
    max_iter: usize,
) -> Result<Projection> {
    let mut multiplier = HermitianMatrix::zeros(h.dim());
    project_intersection_warm(h, sig, target, tol, max_iter, &mut multiplier)
}

/// [`project_intersection`] started from the multiplier left behind by a
/// previous call. Sequences of nearby inputs (as in projected ascent) then
/// converge in a handful of iterations. On success `multiplier` holds the
/// final dual variable.
pub fn project_intersection_warm(
    h: &HermitianMatrix,
    sig: &StrategySignature,
    target: AffineTarget,
    tol: f64,
    max_iter: usize,
    multiplier: &mut HermitianMatrix,
) -> Result<Projection> {
    if h.dim() != sig.total_dim() {
        return Err(Error::DimensionMismatch { expected: sig.total_dim(), actual: h.dim() });
    }
    if multiplier.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), actual: multiplier.dim() });
    }
    let mut lambda = multiplier.clone();
    let mut lookahead = lambda.clone();
    let mut t = 1.0f64;
    let mut x = project_psd(h)?;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let next = project_psd(&(h + &lookahead))?;
        let grad = &project_affine_target(&next, sig, target)? - &next;
        residual = grad.frobenius_norm();
        let change = next.distance(&x);
        x = next;
        if residual <= tol && change <= tol {
            *multiplier = lookahead;
            return Ok(Projection { matrix: x, iterations: it, residual });
        }
        let stepped = &lookahead + &grad;
        let direction = &stepped - &lambda;
        if crate::linalg::hs_inner_unchecked(&grad, &direction) < 0.0 {
            t = 1.0;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        lookahead = &stepped + &direction.scale((t - 1.0) / t_next);
        lambda = stepped;
        t = t_next;
    }
    Err(Error::NotConverged { iterations: max_iter, residual })
}

/// Projection onto `𝒞_k = 𝒮_k / d_k` (`cone = false`) or onto the cone
/// `𝒦_k` generated by it (`cone = true`).
pub fn project_to_set(
    h: &HermitianMatrix,
    sig: &StrategySignature,
    cone: bool,
    tol: f64,
    max_iter: usize,
) -> Result<HermitianMatrix> {
    Ok(project_to_set_detailed(h, sig, cone, tol, max_iter)?.matrix)
}

pub fn project_to_set_detailed(
    h: &HermitianMatrix,
    sig: &StrategySignature,
    cone: bool,
    tol: f64,
    max_iter: usize,
) -> Result<Projection> {
    sig.validate()?;
    if h.dim() != sig.total_dim() {
        return Err(Error::DimensionMismatch { expected: sig.total_dim(), actual: h.dim() });
    }
    if sig.is_state_preparation() {
        // No marginal constraints survive: density matrices, or the PSD cone.
        let matrix = if cone { project_psd(h)? } else { project_density(h)?.into_hermitian() };
        return Ok(Projection { matrix, iterations: 1, residual: 0.0 });
    }
    let target = if cone { AffineTarget::Cone } else { AffineTarget::Trace(1.0) };
    project_intersection(h, sig, target, tol, max_iter)
}
