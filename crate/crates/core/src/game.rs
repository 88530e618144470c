//! Games between quantum strategies, best responses and Nash certificates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::DEFAULT;
use crate::error::{Error, Result};
use crate::linalg::{hs_inner, HermitianMatrix};
use crate::strategies::{
    check_strategy, project_intersection_warm, project_to_set, AffineTarget, StrategyMatrix, StrategySignature,
};

/// An `m`-player game: one payoff observable per player on the joint space
/// `V_1 ⊗ ··· ⊗ V_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumGame {
    sigs: Vec<StrategySignature>,
    payoffs: Vec<HermitianMatrix>,
}

impl QuantumGame {
    pub fn new(sigs: Vec<StrategySignature>, payoffs: Vec<HermitianMatrix>) -> Result<Self> {
        if sigs.is_empty() {
            return Err(Error::InvalidArgument("a game needs at least one player".into()));
        }
        if sigs.len() != payoffs.len() {
            return Err(Error::InvalidShape(format!(
                "{} signatures but {} payoff operators",
                sigs.len(),
                payoffs.len()
            )));
        }
        for s in &sigs {
            s.validate()?;
        }
        let n: usize = sigs.iter().map(StrategySignature::total_dim).product();
        for h in &payoffs {
            if h.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, actual: h.dim() });
            }
        }
        Ok(Self { sigs, payoffs })
    }

    pub fn players(&self) -> usize {
        self.sigs.len()
    }

    pub fn signatures(&self) -> &[StrategySignature] {
        &self.sigs
    }

    pub fn signature(&self, k: usize) -> &StrategySignature {
        &self.sigs[k]
    }

    pub fn payoffs(&self) -> &[HermitianMatrix] {
        &self.payoffs
    }

    pub fn payoff(&self, k: usize) -> &HermitianMatrix {
        &self.payoffs[k]
    }

    /// `n = Π n_k`.
    pub fn joint_dim(&self) -> usize {
        self.sigs.iter().map(StrategySignature::total_dim).product()
    }

    /// `Π d_k`.
    pub fn input_dim_product(&self) -> usize {
        self.sigs.iter().map(StrategySignature::input_dim).product()
    }

    fn check_player(&self, k: usize) -> Result<()> {
        if k >= self.players() {
            return Err(Error::InvalidArgument(format!(
                "player index {k} out of range for {} players",
                self.players()
            )));
        }
        Ok(())
    }
}

/// One strategy per player.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    strategies: Vec<StrategyMatrix>,
}

impl StrategyProfile {
    pub const TOLERANCE: f64 = 1e-5;

    pub fn new(strategies: Vec<StrategyMatrix>) -> Result<Self> {
        for s in &strategies {
            let report = check_strategy(s.matrix(), s.signature(), Self::TOLERANCE)?;
            if !report.passes() {
                return Err(Error::InvalidArgument(format!(
                    "profile entry violates strategy constraints (residual {:.3e}, psd {:.3e})",
                    report.max_residual(),
                    report.psd_violation
                )));
            }
        }
        Ok(Self { strategies })
    }

    /// Builds a profile from raw matrices, validating each against its
    /// signature.
    pub fn from_matrices(sigs: &[StrategySignature], matrices: Vec<HermitianMatrix>) -> Result<Self> {
        if sigs.len() != matrices.len() {
            return Err(Error::InvalidShape(format!(
                "{} signatures but {} strategies",
                sigs.len(),
                matrices.len()
            )));
        }
        let strategies = sigs
            .iter()
            .cloned()
            .zip(matrices)
            .map(|(s, q)| StrategyMatrix::with_tolerance(s, q, Self::TOLERANCE))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { strategies })
    }

    #[cfg(test)]
    pub(crate) fn new_unchecked(strategies: Vec<StrategyMatrix>) -> Self {
        Self { strategies }
    }

    pub fn uniform(sigs: &[StrategySignature]) -> Self {
        Self { strategies: sigs.iter().cloned().map(StrategyMatrix::uniform).collect() }
    }

    pub fn strategies(&self) -> &[StrategyMatrix] {
        &self.strategies
    }

    pub fn strategy(&self, k: usize) -> &StrategyMatrix {
        &self.strategies[k]
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    /// Replaces player `k`'s strategy.
    pub fn with_strategy(&self, k: usize, s: StrategyMatrix) -> Self {
        let mut strategies = self.strategies.clone();
        strategies[k] = s;
        Self { strategies }
    }

    fn check_against(&self, game: &QuantumGame) -> Result<()> {
        if self.len() != game.players() {
            return Err(Error::DimensionMismatch { expected: game.players(), actual: self.len() });
        }
        for (s, sig) in self.strategies.iter().zip(game.signatures()) {
            if s.signature() != sig {
                return Err(Error::DimensionMismatch { expected: sig.total_dim(), actual: s.matrix().dim() });
            }
        }
        Ok(())
    }
}

/// Contracts factor `j` of an operator on `dims` against `q`:
/// `out[(l,r),(l',r')] = Σ_{x,y} q[x,y] · h[(l,y,r),(l',x,r')]`.
fn contract_factor(h: &HermitianMatrix, dims: &[usize], j: usize, q: &HermitianMatrix) -> HermitianMatrix {
    let left: usize = dims[..j].iter().product();
    let right: usize = dims[j + 1..].iter().product();
    let d = dims[j];
    let m = h.matrix();
    let qm = q.matrix();
    let size = left * right;
    let full = |l: usize, y: usize, r: usize| (l * d + y) * right + r;
    let out = nalgebra::DMatrix::from_fn(size, size, |row, col| {
        let (l, r) = (row / right, row % right);
        let (l2, r2) = (col / right, col % right);
        let mut acc = num_complex::Complex64::new(0.0, 0.0);
        for x in 0..d {
            for y in 0..d {
                acc += qm[(x, y)] * m[(full(l, y, r), full(l2, x, r2))];
            }
        }
        acc
    });
    HermitianMatrix::symmetrized(out)
}

/// Contracts every player except `k` against the given operators.
fn xi_from(h: &HermitianMatrix, dims: &[usize], ops: &[&HermitianMatrix], k: usize) -> HermitianMatrix {
    let mut current = h.clone();
    let mut remaining: Vec<usize> = dims.to_vec();
    // Contract from the last player backwards so earlier indices stay valid.
    for j in (0..dims.len()).rev() {
        if j == k {
            continue;
        }
        current = contract_factor(&current, &remaining, j, ops[j]);
        remaining.remove(j);
    }
    current
}

/// `Ξ_k(Q_{-k}) = Tr_{V_{-k}}((Q_1 ⊗ ··· ⊗ I_{V_k} ⊗ ··· ⊗ Q_m) H_k)`, the
/// observable whose inner product with `Q_k` is player `k`'s payoff.
pub fn xi(game: &QuantumGame, profile: &StrategyProfile, k: usize) -> Result<HermitianMatrix> {
    game.check_player(k)?;
    profile.check_against(game)?;
    let ops: Vec<&HermitianMatrix> = profile.strategies().iter().map(StrategyMatrix::matrix).collect();
    Ok(xi_operators(game, &ops, k))
}

/// [`xi`] for arbitrary Hermitian operators in the other players' slots
/// (normalized strategies, differences of profiles, …).
pub fn xi_operators(game: &QuantumGame, ops: &[&HermitianMatrix], k: usize) -> HermitianMatrix {
    let dims: Vec<usize> = game.signatures().iter().map(StrategySignature::total_dim).collect();
    xi_from(game.payoff(k), &dims, ops, k)
}

/// `⟨H_k, Q_1 ⊗ ··· ⊗ Q_m⟩`.
pub fn expected_payoff(game: &QuantumGame, profile: &StrategyProfile, k: usize) -> Result<f64> {
    let x = xi(game, profile, k)?;
    hs_inner(&x, profile.strategy(k).matrix())
}

/// Settings for the projected-ascent best-response solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponseOptions {
    pub max_iter: usize,
    pub projection_tol: f64,
    pub projection_max_iter: usize,
    /// `c` in the step schedule `η_t = c / √t`, in units of `1/‖Ξ_k‖₂`.
    pub step_scale: f64,
}

impl Default for BestResponseOptions {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT.best_response_max_iter,
            projection_tol: DEFAULT.projection_tol,
            projection_max_iter: DEFAULT.projection_max_iter,
            step_scale: 1e3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BestResponse {
    /// `sup_R ⟨Ξ_k, R⟩` over `𝒮_k`, as attained by `strategy`.
    pub value: f64,
    pub strategy: StrategyMatrix,
    pub iterations: usize,
}

/// Maximizes player `k`'s payoff against the rest of `profile`.
pub fn best_response(game: &QuantumGame, profile: &StrategyProfile, k: usize, tol: f64) -> Result<BestResponse> {
    let options = BestResponseOptions { projection_tol: tol.min(DEFAULT.projection_tol), ..Default::default() };
    best_response_with(game, profile, k, &options)
}

pub fn best_response_with(
    game: &QuantumGame,
    profile: &StrategyProfile,
    k: usize,
    options: &BestResponseOptions,
) -> Result<BestResponse> {
    let x = xi(game, profile, k)?;
    maximize_linear(&x, game.signature(k), Some(profile.strategy(k)), options)
}

/// Maximizes `⟨a, R⟩` over `𝒮_k` by projected ascent on `𝒞_k` with steps
/// `η_t = c/√t`, starting from `start` (or the uniform strategy). The best
/// iterate seen is returned, rescaled by `d_k`.
pub fn maximize_linear(
    a: &HermitianMatrix,
    sig: &StrategySignature,
    start: Option<&StrategyMatrix>,
    options: &BestResponseOptions,
) -> Result<BestResponse> {
    if a.dim() != sig.total_dim() {
        return Err(Error::DimensionMismatch { expected: sig.total_dim(), actual: a.dim() });
    }
    let dk = sig.input_dim() as f64;
    let mut x = match start {
        Some(s) => s.matrix().scale(1.0 / dk),
        None => StrategyMatrix::uniform(sig.clone()).into_matrix().scale(1.0 / dk),
    };
    let norm = a.frobenius_norm();
    let finish = |best: HermitianMatrix, value: f64, iterations: usize| BestResponse {
        value: value * dk,
        strategy: StrategyMatrix::new_unchecked(sig.clone(), best.scale(dk)),
        iterations,
    };
    let mut best_value = hs_inner(a, &x)?;
    if norm == 0.0 {
        return Ok(finish(x, best_value, 0));
    }
    let c = options.step_scale / norm;
    let mut best = x.clone();
    let mut multiplier = HermitianMatrix::zeros(a.dim());
    let exact = sig.is_state_preparation();
    let still = if exact { 0.0 } else { 2.0 * options.projection_tol };
    let mut quiet = 0usize;
    for t in 1..=options.max_iter {
        let step = c / (t as f64).sqrt();
        let moved = &x + &a.scale(step);
        let next = if exact {
            project_to_set(&moved, sig, false, options.projection_tol, options.projection_max_iter)?
        } else {
            project_intersection_warm(
                &moved,
                sig,
                AffineTarget::Trace(1.0),
                options.projection_tol,
                options.projection_max_iter,
                &mut multiplier,
            )?
            .matrix
        };
        let change = next.distance(&x);
        x = next;
        let value = hs_inner(a, &x)?;
        if value > best_value {
            best_value = value;
            best = x.clone();
        }
        quiet = if change <= still { quiet + 1 } else { 0 };
        if quiet >= 3 {
            return Ok(finish(best, best_value, t));
        }
    }
    Ok(finish(best, best_value, options.max_iter))
}

/// Outcome of checking a profile for `ε`-Nash stability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashCertificate {
    pub epsilon: f64,
    pub tolerance: f64,
    /// `best-response value − expected payoff`, per player.
    pub gaps: Vec<f64>,
    pub best_response_values: Vec<f64>,
    pub payoffs: Vec<f64>,
    pub valid: bool,
}

impl NashCertificate {
    pub fn max_gap(&self) -> f64 {
        self.gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Computes every player's best-response gap. Players are handled in
/// parallel; results are gathered in player order.
pub fn certify(game: &QuantumGame, profile: &StrategyProfile, epsilon: f64, tol: f64) -> Result<NashCertificate> {
    let options = BestResponseOptions { projection_tol: tol.min(DEFAULT.projection_tol), ..Default::default() };
    certify_with(game, profile, epsilon, tol, &options)
}

pub fn certify_with(
    game: &QuantumGame,
    profile: &StrategyProfile,
    epsilon: f64,
    tol: f64,
    options: &BestResponseOptions,
) -> Result<NashCertificate> {
    profile.check_against(game)?;
    let rows = (0..game.players())
        .into_par_iter()
        .map(|k| {
            let payoff = expected_payoff(game, profile, k)?;
            let br = best_response_with(game, profile, k, options)?;
            Ok((payoff, br.value))
        })
        .collect::<Result<Vec<_>>>()?;
    let payoffs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let best_response_values: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let gaps: Vec<f64> = rows.iter().map(|(p, b)| b - p).collect();
    let valid = gaps.iter().all(|&g| g <= epsilon + tol);
    Ok(NashCertificate { epsilon, tolerance: tol, gaps, best_response_values, payoffs, valid })
}

/// A payoff table over action tuples, stored row-major (last player's
/// action varies fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffTable {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl PayoffTable {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::InvalidShape("every player needs at least one action".into()));
        }
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::InvalidShape(format!(
                "table of shape {shape:?} needs {expected} entries, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("payoff values must be finite".into()));
        }
        Ok(Self { shape, values })
    }

    /// Two-player table from rows (player 1's action) and columns.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidShape("ragged payoff table".into()));
        }
        Self::new(vec![rows.len(), cols], rows.concat())
    }

    pub fn get(&self, actions: &[usize]) -> f64 {
        let idx = actions.iter().zip(&self.shape).fold(0, |acc, (&a, &d)| acc * d + a);
        self.values[idx]
    }

    /// Classical expected payoff of independent mixed strategies.
    pub fn mixed_payoff(&self, mixed: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for (idx, v) in self.values.iter().enumerate() {
            let mut rest = idx;
            let mut p = 1.0;
            for (j, &d) in self.shape.iter().enumerate().rev() {
                p *= mixed[j][rest % d];
                rest /= d;
            }
            total += p * v;
        }
        total
    }
}

/// Embeds a normal-form game: each player prepares a state on `C^{actions}`,
/// the referee measures in the standard basis, and `H_k` is diagonal.
pub fn embed_classical(tables: &[PayoffTable]) -> Result<QuantumGame> {
    let first = tables
        .first()
        .ok_or_else(|| Error::InvalidArgument("no payoff tables".into()))?;
    if first.shape.len() != tables.len() {
        return Err(Error::InvalidShape(format!(
            "{} tables for a {}-player action space",
            tables.len(),
            first.shape.len()
        )));
    }
    if tables.iter().any(|t| t.shape != first.shape) {
        return Err(Error::InvalidShape("payoff tables disagree on the action space".into()));
    }
    let sigs = first.shape.iter().map(|&d| StrategySignature::state_preparation(d)).collect();
    let payoffs = tables.iter().map(|t| HermitianMatrix::from_diagonal(&t.values)).collect();
    QuantumGame::new(sigs, payoffs)
}

/// Non-interactive game refereed by a POVM `{M_a}` on the players' joint
/// output: `H_k = Σ_a v_k(a) M_a`.
pub fn payoffs_from_referee(out_dims: &[usize], povm: &[HermitianMatrix], values: &[Vec<f64>]) -> Result<QuantumGame> {
    let n: usize = out_dims.iter().product();
    if povm.is_empty() {
        return Err(Error::IncompletePovm(1.0));
    }
    let mut sum = HermitianMatrix::zeros(n);
    for m in povm {
        if m.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: m.dim() });
        }
        if m.min_eigenvalue()? < -1e-8 {
            return Err(Error::NotPositive(m.min_eigenvalue()?));
        }
        sum = &sum + m;
    }
    let deviation = sum.distance(&HermitianMatrix::identity(n));
    if deviation > 1e-8 {
        return Err(Error::IncompletePovm(deviation));
    }
    if values.len() != out_dims.len() {
        return Err(Error::InvalidShape(format!("{} value lists for {} players", values.len(), out_dims.len())));
    }
    let mut payoffs = Vec::with_capacity(values.len());
    for v in values {
        if v.len() != povm.len() {
            return Err(Error::InvalidShape(format!("{} values for {} outcomes", v.len(), povm.len())));
        }
        let h = povm
            .iter()
            .zip(v)
            .fold(HermitianMatrix::zeros(n), |acc, (m, &w)| &acc + &m.scale(w));
        payoffs.push(h);
    }
    let sigs = out_dims.iter().map(|&d| StrategySignature::state_preparation(d)).collect();
    QuantumGame::new(sigs, payoffs)
}

/// Matching pennies: player 1 wins on a match.
pub fn matching_pennies() -> QuantumGame {
    let t1 = PayoffTable::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
    let t2 = PayoffTable::new(t1.shape.clone(), t1.values.iter().map(|v| -v).collect()).unwrap();
    embed_classical(&[t1, t2]).unwrap()
}

/// Prisoner's dilemma with actions (cooperate, defect).
pub fn prisoners_dilemma() -> QuantumGame {
    let t1 = PayoffTable::from_rows(&[vec![3.0, 0.0], vec![5.0, 1.0]]).unwrap();
    let t2 = PayoffTable::from_rows(&[vec![3.0, 5.0], vec![0.0, 1.0]]).unwrap();
    embed_classical(&[t1, t2]).unwrap()
}
