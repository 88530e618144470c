//! The quantum gain function and a damped fixed-point solver built on it.
//!
//! For densities `ρ_k` the map is
//!
//! ```text
//! σ_k = proj(ρ_k | 𝒞_k)
//! α_k = ⟨Ξ_k(σ_{-k}), σ_k⟩
//! P_k = proj(Ξ_k(σ_{-k}) − α_k I | 𝒦_k)
//! G_k = (σ_k + P_k) / (1 + Tr P_k)
//! ```
//!
//! Its fixed points are exactly the Nash equilibria (after rescaling by
//! `d_k`), and an approximate fixed point converts into an approximate
//! equilibrium through [`deviation_bound`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::DEFAULT;
use crate::error::{Error, Result};
use crate::game::{xi_operators, QuantumGame, StrategyProfile};
use crate::linalg::{hs_inner, DensityMatrix, HermitianMatrix};
use crate::sampling::random_density;
use crate::strategies::{project_to_set, StrategyMatrix, StrategySignature};

#[derive(Debug, Clone, PartialEq)]
pub struct GainConfig {
    pub projection_tol: f64,
    pub projection_max_iter: usize,
    /// Iteration budget for each run (the first run and every restart).
    pub max_iter: usize,
    /// `λ` in `ρ ← (1−λ)ρ + λ G(ρ)`.
    pub damping: f64,
    pub restarts: usize,
    /// Stop once `‖G(ρ) − ρ‖₂` falls to this level.
    pub target_residual: f64,
    pub seed: u64,
}

impl Default for GainConfig {
    fn default() -> Self {
        Self {
            projection_tol: 1e-9,
            projection_max_iter: DEFAULT.projection_max_iter,
            max_iter: 20_000,
            damping: 0.5,
            restarts: 3,
            target_residual: 1e-6,
            seed: 0,
        }
    }
}

impl GainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.projection_tol > 0.0) {
            return Err(Error::InvalidArgument("projection tolerance must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument(format!("damping {} outside (0, 1]", self.damping)));
        }
        if !(self.target_residual >= 0.0) {
            return Err(Error::InvalidArgument("target residual must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Every intermediate quantity of `G_k` for one player.
#[derive(Debug, Clone)]
pub struct PlayerGain {
    pub sigma: HermitianMatrix,
    /// `Ξ_k(σ_{-k})`.
    pub xi: HermitianMatrix,
    pub alpha: f64,
    pub p: HermitianMatrix,
    pub g: HermitianMatrix,
    /// `‖G_k − σ_k‖₂`.
    pub eta: f64,
}

fn check_inputs(game: &QuantumGame, densities: &[HermitianMatrix]) -> Result<()> {
    if densities.len() != game.players() {
        return Err(Error::DimensionMismatch { expected: game.players(), actual: densities.len() });
    }
    for (rho, sig) in densities.iter().zip(game.signatures()) {
        if rho.dim() != sig.total_dim() {
            return Err(Error::DimensionMismatch { expected: sig.total_dim(), actual: rho.dim() });
        }
    }
    Ok(())
}

/// Projects each `ρ_k` into `𝒞_k`.
pub fn project_profile(game: &QuantumGame, densities: &[HermitianMatrix], cfg: &GainConfig) -> Result<Vec<HermitianMatrix>> {
    check_inputs(game, densities)?;
    densities
        .par_iter()
        .zip(game.signatures())
        .map(|(rho, sig)| project_to_set(rho, sig, false, cfg.projection_tol, cfg.projection_max_iter))
        .collect()
}

/// Evaluates `G` and keeps the per-player pieces.
pub fn gain_components(game: &QuantumGame, densities: &[HermitianMatrix], cfg: &GainConfig) -> Result<Vec<PlayerGain>> {
    let sigmas = project_profile(game, densities, cfg)?;
    gain_components_projected(game, sigmas, cfg)
}

fn gain_components_projected(game: &QuantumGame, sigmas: Vec<HermitianMatrix>, cfg: &GainConfig) -> Result<Vec<PlayerGain>> {
    let ops: Vec<&HermitianMatrix> = sigmas.iter().collect();
    (0..game.players())
        .into_par_iter()
        .map(|k| {
            let sigma = &sigmas[k];
            let xi = xi_operators(game, &ops, k);
            let alpha = hs_inner(&xi, sigma)?;
            let p = project_to_set(&xi.shift(-alpha), game.signature(k), true, cfg.projection_tol, cfg.projection_max_iter)?;
            let g = (sigma + &p).scale(1.0 / (1.0 + p.trace()));
            let eta = g.distance(sigma);
            Ok(PlayerGain { sigma: sigma.clone(), xi, alpha, p, g, eta })
        })
        .collect()
}

/// `G(ρ_1, …, ρ_m)`.
pub fn gain_map(game: &QuantumGame, densities: &[HermitianMatrix], cfg: &GainConfig) -> Result<Vec<HermitianMatrix>> {
    Ok(gain_components(game, densities, cfg)?.into_iter().map(|c| c.g).collect())
}

fn product_distance(a: &[HermitianMatrix], b: &[HermitianMatrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.distance(y).powi(2)).sum::<f64>().sqrt()
}

/// A point of `𝒞_1 × ··· × 𝒞_m` with its gain residual.
#[derive(Debug, Clone)]
pub struct GainState {
    pub densities: Vec<DensityMatrix>,
    /// `‖G(ρ) − ρ‖₂` over the product.
    pub residual: f64,
}

impl GainState {
    pub fn matrices(&self) -> Vec<HermitianMatrix> {
        self.densities.iter().map(|d| d.as_hermitian().clone()).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GainRunSummary {
    pub iterations: usize,
    pub restarts_used: usize,
    pub converged: bool,
    pub residual: f64,
}

/// Result of [`iterate_gain`]: the best state seen plus bookkeeping.
#[derive(Debug, Clone)]
pub struct GainRun {
    pub state: GainState,
    /// Residual at every step of the run that produced `state`.
    pub history: Vec<f64>,
    /// Steps taken across all runs.
    pub iterations: usize,
    pub restarts_used: usize,
    pub converged: bool,
}

impl GainRun {
    pub fn summary(&self) -> GainRunSummary {
        GainRunSummary {
            iterations: self.iterations,
            restarts_used: self.restarts_used,
            converged: self.converged,
            residual: self.state.residual,
        }
    }
}

/// `I/n_k`, or its projection into `𝒞_k`.
pub fn default_init(game: &QuantumGame, cfg: &GainConfig) -> Result<Vec<HermitianMatrix>> {
    let mixed: Vec<HermitianMatrix> = game
        .signatures()
        .iter()
        .map(|s| HermitianMatrix::identity(s.total_dim()).scale(1.0 / s.total_dim() as f64))
        .collect();
    project_profile(game, &mixed, cfg)
}

struct RunOutcome {
    best: Vec<HermitianMatrix>,
    best_residual: f64,
    history: Vec<f64>,
    steps: usize,
}

fn run_once(game: &QuantumGame, init: Vec<HermitianMatrix>, cfg: &GainConfig) -> Result<RunOutcome> {
    let mut rho = project_profile(game, &init, cfg)?;
    let mut best = rho.clone();
    let mut best_residual = f64::INFINITY;
    let mut history = Vec::new();
    let mut steps = 0;
    loop {
        let g = gain_map(game, &rho, cfg)?;
        let residual = product_distance(&g, &rho);
        history.push(residual);
        if residual < best_residual {
            best_residual = residual;
            best = rho.clone();
        }
        if residual <= cfg.target_residual || steps >= cfg.max_iter {
            break;
        }
        rho = rho
            .iter()
            .zip(&g)
            .map(|(r, gk)| &r.scale(1.0 - cfg.damping) + &gk.scale(cfg.damping))
            .collect();
        steps += 1;
    }
    Ok(RunOutcome { best, best_residual, history, steps })
}

/// Damped iteration `ρ ← (1−λ)ρ + λ G(ρ)` with seeded random restarts.
/// Running out of budget is not an error: the best state found is returned
/// with `converged = false`.
pub fn iterate_gain(game: &QuantumGame, init: Option<Vec<HermitianMatrix>>, cfg: &GainConfig) -> Result<GainRun> {
    cfg.validate()?;
    let init = match init {
        Some(i) => {
            check_inputs(game, &i)?;
            i
        }
        None => default_init(game, cfg)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut outcome = run_once(game, init, cfg)?;
    let mut iterations = outcome.steps;
    let mut restarts_used = 0;
    while outcome.best_residual > cfg.target_residual && restarts_used < cfg.restarts {
        restarts_used += 1;
        let start: Vec<HermitianMatrix> = game
            .signatures()
            .iter()
            .map(|s| random_density(&mut rng, s.total_dim()).into_hermitian())
            .collect();
        let next = run_once(game, start, cfg)?;
        iterations += next.steps;
        if next.best_residual < outcome.best_residual {
            outcome = next;
        }
    }
    let densities = outcome.best.into_iter().map(DensityMatrix::new_unchecked).collect();
    Ok(GainRun {
        state: GainState { densities, residual: outcome.best_residual },
        history: outcome.history,
        iterations,
        restarts_used,
        converged: outcome.best_residual <= cfg.target_residual,
    })
}

/// `(1 + 3 n ‖A‖)² √η`: if `‖(σ+P)/(1+Tr P) − σ‖₂ ≤ η` then `σ` is a
/// `δ`-best response to `A` over the normalized set.
pub fn deviation_bound(eta: f64, n: usize, a_norm: f64) -> Result<f64> {
    if eta < 0.0 || a_norm < 0.0 || n == 0 || eta.is_nan() || a_norm.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "deviation bound needs eta ≥ 0, n ≥ 1, ‖A‖ ≥ 0 (got {eta}, {n}, {a_norm})"
        )));
    }
    Ok((1.0 + 3.0 * n as f64 * a_norm).powi(2) * eta.sqrt())
}

/// The `ε` implied by the per-player residuals at `densities`, in payoff
/// units of the rescaled profile: `Σ_k (Π_j d_j) (1 + 3 n_k ‖Ξ_k‖)² √η_k`.
pub fn certified_epsilon(game: &QuantumGame, densities: &[HermitianMatrix], cfg: &GainConfig) -> Result<f64> {
    let scale = game.input_dim_product() as f64;
    let mut total = 0.0;
    for (c, sig) in gain_components(game, densities, cfg)?.iter().zip(game.signatures()) {
        total += scale * deviation_bound(c.eta, sig.total_dim(), c.xi.spectral_norm()?)?;
    }
    Ok(total)
}

/// `Q_k = d_k ξ_k` after a final projection into `𝒞_k`.
pub fn profile_from_state(state: &GainState, sigs: &[StrategySignature]) -> Result<StrategyProfile> {
    profile_from_densities(&state.matrices(), sigs, DEFAULT.projection_tol * 1e-2)
}

pub fn profile_from_densities(densities: &[HermitianMatrix], sigs: &[StrategySignature], tol: f64) -> Result<StrategyProfile> {
    if densities.len() != sigs.len() {
        return Err(Error::DimensionMismatch { expected: sigs.len(), actual: densities.len() });
    }
    let strategies = densities
        .iter()
        .zip(sigs)
        .map(|(rho, sig)| {
            let xi = project_to_set(rho, sig, false, tol, DEFAULT.projection_max_iter)?;
            Ok(StrategyMatrix::new_unchecked(sig.clone(), xi.scale(sig.input_dim() as f64)))
        })
        .collect::<Result<Vec<_>>>()?;
    StrategyProfile::new(strategies)
}


#[cfg(test)]
mod properties {
    use super::*;
    use crate::sampling::random_hermitian;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn outputs_are_normalized_strategies(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sigs = vec![StrategySignature::state_preparation(2), StrategySignature::channel(2, 2)];
            let game = QuantumGame::new(sigs.clone(), vec![random_hermitian(&mut rng, 8), random_hermitian(&mut rng, 8)]).unwrap();
            let rho: Vec<HermitianMatrix> = sigs.iter().map(|s| random_hermitian(&mut rng, s.total_dim())).collect();
            let cfg = GainConfig::default();
            for (g, sig) in gain_map(&game, &rho, &cfg).unwrap().iter().zip(&sigs) {
                let again = project_to_set(g, sig, false, 1e-9, 20_000).unwrap();
                prop_assert!(again.distance(g) <= 1e-6);
            }
        }

        #[test]
        fn gain_is_lipschitz(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sigs = vec![StrategySignature::state_preparation(2), StrategySignature::state_preparation(2)];
            let payoffs = vec![random_hermitian(&mut rng, 4), random_hermitian(&mut rng, 4)];
            let m_const = payoffs.iter().map(|h| h.spectral_norm().unwrap()).fold(0.0, f64::max) + 1.0;
            let game = QuantumGame::new(sigs.clone(), payoffs).unwrap();
            let cfg = GainConfig::default();
            let a: Vec<HermitianMatrix> = sigs.iter().map(|s| random_density(&mut rng, s.total_dim()).into_hermitian()).collect();
            let b: Vec<HermitianMatrix> = sigs.iter().map(|s| random_density(&mut rng, s.total_dim()).into_hermitian()).collect();
            let ga = gain_map(&game, &a, &cfg).unwrap();
            let gb = gain_map(&game, &b, &cfg).unwrap();
            let n = 4.0;
            let k = 4.0 * n * n * 2.0 * m_const;
            prop_assert!(product_distance(&ga, &gb) <= k * product_distance(&a, &b) + 1e-9);
        }
    }
}
