//! Fixed points of maps on density operators through the discrete Wigner
//! representation and barycentric subdivision, and games solved that way.
//!
//! A map `f` on `D(C^n)` (`n` odd) becomes `g = ψ ∘ f ∘ proj_D ∘ ψ⁻¹` on
//! `Δ_{n²}`; an exact fixed point `v` of its barycentric approximation gives
//! the candidate `ρ = proj_D(ψ⁻¹(v))`. Tuples of densities are first packed
//! block-diagonally, and even dimensions are padded by one.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::config::DEFAULT;
use crate::error::{Error, Result};
use crate::gain::{gain_map, iterate_gain, profile_from_densities, GainConfig, GainRunSummary};
use crate::game::{certify, NashCertificate, QuantumGame, StrategyProfile};
use crate::linalg::{normalize_unchecked, project_density, DensityMatrix, HermitianMatrix};
use crate::simplex::{cell_count, diameter_bound, find_fixed_point, BarycentricApproximation, FixedPointOptions, SimplexPoint};
use crate::wigner::WignerBasis;

pub type DensityMap = Arc<dyn Fn(&DensityMatrix) -> DensityMatrix + Send + Sync>;
pub type DensityTupleMap = Arc<dyn Fn(&[DensityMatrix]) -> Vec<DensityMatrix> + Send + Sync>;

/// A map on density tuples whose approximate fixed points are wanted.
#[derive(Clone)]
pub struct DensityMapProblem {
    pub dims: Vec<usize>,
    pub f: DensityTupleMap,
    /// Lipschitz constant of `f` (Frobenius norms).
    pub lipschitz: f64,
    /// Target accuracy `‖f(ρ) − ρ‖₂ ≤ ε`.
    pub epsilon: f64,
}

impl std::fmt::Debug for DensityMapProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DensityMapProblem")
            .field("dims", &self.dims)
            .field("lipschitz", &self.lipschitz)
            .field("epsilon", &self.epsilon)
            .finish_non_exhaustive()
    }
}

impl DensityMapProblem {
    pub fn single(n: usize, f: DensityMap, lipschitz: f64, epsilon: f64) -> Result<Self> {
        let tuple: DensityTupleMap = Arc::new(move |rho: &[DensityMatrix]| vec![f(&rho[0])]);
        Self::new(vec![n], tuple, lipschitz, epsilon)
    }

    pub fn new(dims: Vec<usize>, f: DensityTupleMap, lipschitz: f64, epsilon: f64) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidShape("density dimensions must be positive".into()));
        }
        if !(lipschitz > 0.0) || !(epsilon > 0.0) {
            return Err(Error::InvalidArgument("Lipschitz constant and ε must be positive".into()));
        }
        Ok(Self { dims, f, lipschitz, epsilon })
    }

    /// Evaluates `f` and checks that its outputs are densities.
    pub fn eval(&self, rho: &[DensityMatrix]) -> Result<Vec<DensityMatrix>> {
        let out = (self.f)(rho);
        if out.len() != self.dims.len() {
            return Err(Error::DimensionMismatch { expected: self.dims.len(), actual: out.len() });
        }
        for (o, &d) in out.iter().zip(&self.dims) {
            if o.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: o.dim() });
            }
        }
        Ok(out)
    }
}

/// Extends `f` on `D(C^n)`, `n` even, to `D(C^{n+1})`:
/// `h([P u; u† λ]) = [f(P + λ I/n) 0; 0 0]`.
pub fn pad_to_odd(f: DensityMap, n: usize) -> Result<DensityMap> {
    if n % 2 == 1 {
        return Err(Error::InvalidArgument(format!("dimension {n} is already odd")));
    }
    Ok(Arc::new(move |x: &DensityMatrix| {
        let inner = unpad(x.as_hermitian(), n);
        let out = f(&inner);
        DensityMatrix::new_unchecked(pad_block(out.as_hermitian(), n + 1))
    }))
}

/// `P + λ I/n` from the padded operator `[P u; u† λ]` on `C^{n+1}`.
pub fn unpad(x: &HermitianMatrix, n: usize) -> DensityMatrix {
    let m = x.matrix();
    let p = m.view((0, 0), (n, n)).into_owned();
    let lambda = m[(n, n)].re;
    DensityMatrix::new_unchecked(HermitianMatrix::symmetrized(p).shift(lambda / n as f64))
}

fn pad_block(a: &HermitianMatrix, size: usize) -> HermitianMatrix {
    let mut m = DMatrix::<Complex64>::zeros(size, size);
    m.view_mut((0, 0), (a.dim(), a.dim())).copy_from(a.matrix());
    HermitianMatrix::symmetrized(m)
}

/// Pieces of `X - h(X)` for a padded `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PaddingResidual {
    /// `‖h(X) − X‖₂`.
    pub total: f64,
    /// `‖f(P + λI/n) − P‖₂`.
    pub block: f64,
    /// `‖u‖₂`.
    pub off_diagonal: f64,
    /// The corner entry `λ`.
    pub corner: f64,
}

impl PaddingResidual {
    /// `2‖u‖² + λ² ≤ ε²`, with `ε` the total residual and slack `tol`.
    pub fn chain_holds(&self, tol: f64) -> bool {
        2.0 * self.off_diagonal.powi(2) + self.corner.powi(2) <= self.total.powi(2) + tol
    }
}

pub fn padding_residual(h: &DensityMap, x: &DensityMatrix, n: usize) -> PaddingResidual {
    let hx = h(x);
    let m = x.as_hermitian().matrix();
    let p = HermitianMatrix::symmetrized(m.view((0, 0), (n, n)).into_owned());
    let f_block = HermitianMatrix::symmetrized(hx.as_hermitian().matrix().view((0, 0), (n, n)).into_owned());
    let u = m.view((0, n), (n, 1)).norm();
    PaddingResidual {
        total: hx.as_hermitian().distance(x.as_hermitian()),
        block: f_block.distance(&p),
        off_diagonal: u,
        corner: m[(n, n)].re,
    }
}

fn block_offsets(dims: &[usize]) -> Vec<usize> {
    dims.iter()
        .scan(0, |acc, &d| {
            let start = *acc;
            *acc += d;
            Some(start)
        })
        .collect()
}

/// `normalize(m X_kk)` for each diagonal block of `X`.
pub fn read_blocks(x: &HermitianMatrix, dims: &[usize]) -> Vec<DensityMatrix> {
    let m = dims.len() as f64;
    block_offsets(dims)
        .into_iter()
        .zip(dims)
        .map(|(o, &d)| {
            let block = HermitianMatrix::symmetrized(x.matrix().view((o, o), (d, d)).into_owned());
            DensityMatrix::new_unchecked(normalize_unchecked(&project_psd_quiet(&block).scale(m)))
        })
        .collect()
}

fn project_psd_quiet(h: &HermitianMatrix) -> HermitianMatrix {
    crate::linalg::project_psd(h).unwrap_or_else(|_| h.clone())
}

/// `(1/m) blockdiag(ρ_1, …, ρ_m)`.
pub fn write_blocks(parts: &[DensityMatrix]) -> DensityMatrix {
    let dims: Vec<usize> = parts.iter().map(DensityMatrix::dim).collect();
    let n: usize = dims.iter().sum();
    let m = parts.len() as f64;
    let mut out = DMatrix::<Complex64>::zeros(n, n);
    for (o, p) in block_offsets(&dims).into_iter().zip(parts) {
        out.view_mut((o, o), (p.dim(), p.dim()))
            .copy_from(&(p.as_hermitian().matrix() / Complex64::new(m, 0.0)));
    }
    DensityMatrix::new_unchecked(HermitianMatrix::symmetrized(out))
}

/// Packs a map on `D(C^{n_1}) × ··· × D(C^{n_m})` into one on `D(C^n)`,
/// `n = Σ n_k`: `g(X) = (1/m) blockdiag(f(normalize(m X_11), …))`.
pub fn block_embed(f: DensityTupleMap, dims: Vec<usize>) -> DensityMap {
    Arc::new(move |x: &DensityMatrix| {
        let parts = read_blocks(x.as_hermitian(), &dims);
        write_blocks(&f(&parts))
    })
}

/// Outcome of the Wigner/simplex pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    /// Dimension `n` of the density space searched (after padding).
    pub density_dim: usize,
    /// `n²`.
    pub simplex_dim: usize,
    pub level: usize,
    pub cells: u128,
    pub cell_index: u128,
    /// `‖g_r(v*) − v*‖₂` for the barycentric approximation.
    pub simplex_residual: f64,
    /// `‖g(v*) − v*‖₂` for the map itself.
    pub direct_residual: f64,
    /// `diameter_bound(n², r)`.
    pub diameter_bound: f64,
    /// The level that would guarantee `ε` for a `K`-Lipschitz map.
    pub theoretical_level: f64,
    /// `‖f(ρ) − ρ‖₂`, computed directly.
    pub achieved_residual: f64,
    /// Whether `achieved ≤ (factor)·√n(n+1)·direct + 2·tol` held.
    pub consistent: bool,
    pub vertex_evaluations: usize,
    #[serde(skip)]
    pub simplex_point: Vec<f64>,
    #[serde(skip)]
    pub recovered: Option<DensityMatrix>,
}

/// `(n²+1)·⌈ln(1/ε) + 2 log₂ K + 2 ln n + 4⌉`.
pub fn theoretical_level(n: usize, lipschitz: f64, epsilon: f64) -> f64 {
    let n2 = (n * n) as f64;
    let inner = (1.0 / epsilon).ln() + 2.0 * lipschitz.max(1.0).log2() + 2.0 * (n as f64).ln() + 4.0;
    (n2 + 1.0) * inner.max(0.0).ceil()
}

/// Runs the pipeline for a single odd-dimensional density map at level `r`
/// (default 1).
pub fn density_fixed_point(problem: &DensityMapProblem, r: Option<usize>, options: &FixedPointOptions) -> Result<PipelineReport> {
    if problem.dims.len() != 1 {
        return Err(Error::InvalidArgument("density_fixed_point expects a single density space; block-embed first".into()));
    }
    let n = problem.dims[0];
    if n % 2 == 0 {
        return Err(Error::EvenDimension(n));
    }
    let r = r.unwrap_or(1);
    let simplex_dim = n * n;
    let cells = cell_count(simplex_dim, r).unwrap_or(u128::MAX);
    if cells > options.budget {
        return Err(Error::BudgetExceeded { required: cells, limit: options.budget });
    }
    let basis = WignerBasis::shared(n)?;
    let g = |v: &[f64]| -> Vec<f64> {
        let h = basis.psi_inv(v).expect("dimension fixed");
        let rho = project_density(&h).expect("eigendecomposition");
        let out = problem.eval(std::slice::from_ref(&rho)).expect("map output shape");
        basis.psi(out[0].as_hermitian()).expect("dimension fixed")
    };
    let fp = find_fixed_point(|v: &SimplexPoint| g(&v.to_f64()), simplex_dim, r, options)?;
    let v = fp.point.clone();
    let gv = g(&v);
    let direct = v.iter().zip(&gv).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let rho = project_density(&basis.psi_inv(&v)?)?;
    let f_rho = problem.eval(std::slice::from_ref(&rho))?;
    let achieved = f_rho[0].as_hermitian().distance(rho.as_hermitian());
    let factor = (problem.lipschitz + 1.0).max(2.0);
    let bound = direct * basis.isometry_scale() * factor + 2.0 * DEFAULT.projection_tol;
    Ok(PipelineReport {
        density_dim: n,
        simplex_dim,
        level: r,
        cells,
        cell_index: fp.cell_index,
        simplex_residual: fp.residual,
        direct_residual: direct,
        diameter_bound: diameter_bound(simplex_dim, r),
        theoretical_level: theoretical_level(n, problem.lipschitz, problem.epsilon),
        achieved_residual: achieved,
        consistent: achieved <= bound,
        vertex_evaluations: fp.vertex_evaluations,
        simplex_point: v,
        recovered: Some(rho),
    })
}

/// `g_r` of the Wigner-transported map, for inspection.
pub fn transported_map(problem: &DensityMapProblem) -> Result<impl Fn(&[f64]) -> Vec<f64> + '_> {
    let n = problem.dims[0];
    let basis = WignerBasis::shared(n)?;
    Ok(move |v: &[f64]| {
        let rho = project_density(&basis.psi_inv(v).expect("dimension fixed")).expect("eigendecomposition");
        let out = problem.eval(std::slice::from_ref(&rho)).expect("map output shape");
        basis.psi(out[0].as_hermitian()).expect("dimension fixed")
    })
}

/// Barycentric approximation of a Wigner-transported map.
pub fn transported_approximation(
    problem: &DensityMapProblem,
    r: usize,
) -> Result<BarycentricApproximation<impl Fn(&SimplexPoint) -> Vec<f64> + '_>> {
    let g = transported_map(problem)?;
    let n = problem.dims[0];
    Ok(BarycentricApproximation::new(n * n, r, move |v: &SimplexPoint| g(&v.to_f64())))
}

/// Which solver produced a reduction-route profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveRoute {
    Reduction,
    GainFallback,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductionOutcome {
    pub route: SolveRoute,
    pub requested_epsilon: f64,
    pub achieved_epsilon: f64,
    pub met_target: bool,
    pub pipeline: Option<PipelineReport>,
    pub gain: Option<GainRunSummary>,
    pub certificate: NashCertificate,
    #[serde(skip)]
    pub profile: Option<StrategyProfile>,
    /// Why the reduction route was not taken, when it was not.
    pub fallback_reason: Option<String>,
}

/// Result of [`solve_density_problem`] on the original (unpadded, unembedded)
/// problem.
#[derive(Debug, Clone)]
pub struct DensitySolution {
    pub report: PipelineReport,
    pub densities: Vec<DensityMatrix>,
    /// `‖f(ρ) − ρ‖₂` over the tuple, computed directly.
    pub residual: f64,
}

/// Block-embeds a tuple problem, pads to odd dimension if needed and runs
/// [`density_fixed_point`]. The cell budget is checked before any work.
pub fn solve_density_problem(problem: &DensityMapProblem, r: Option<usize>, options: &FixedPointOptions) -> Result<DensitySolution> {
    let level = r.unwrap_or(1);
    let dims = problem.dims.clone();
    let total: usize = dims.iter().sum();
    let padded = if total % 2 == 0 { total + 1 } else { total };
    let cells = cell_count(padded * padded, level).unwrap_or(u128::MAX);
    if cells > options.budget {
        return Err(Error::BudgetExceeded { required: cells, limit: options.budget });
    }
    let tuple = problem.f.clone();
    let map = if dims.len() == 1 {
        Arc::new(move |x: &DensityMatrix| tuple(std::slice::from_ref(x)).swap_remove(0)) as DensityMap
    } else {
        block_embed(tuple, dims.clone())
    };
    let map = if padded != total { pad_to_odd(map, total)? } else { map };
    let single = DensityMapProblem::single(padded, map, problem.lipschitz, problem.epsilon)?;
    let report = density_fixed_point(&single, Some(level), options)?;
    let big = report.recovered.clone().expect("pipeline recovers a density");
    let unpadded = if padded != total { unpad(big.as_hermitian(), total) } else { big };
    let densities = if dims.len() == 1 { vec![unpadded] } else { read_blocks(unpadded.as_hermitian(), &dims) };
    let out = problem.eval(&densities)?;
    let residual = out
        .iter()
        .zip(&densities)
        .map(|(a, b)| a.as_hermitian().distance(b.as_hermitian()).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(DensitySolution { report, densities, residual })
}

/// Solves `game` through the gain function, block embedding, padding and the
/// simplex search at level `r`. If the simplex instance exceeds the cell
/// budget and `allow_fallback` is set, the damped gain iteration is used
/// instead and the outcome says so; otherwise the budget error is returned.
pub fn solve_game_via_reduction(
    game: &QuantumGame,
    epsilon: f64,
    r: Option<usize>,
    options: &FixedPointOptions,
    gain_cfg: &GainConfig,
    allow_fallback: bool,
) -> Result<ReductionOutcome> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("ε must be positive".into()));
    }
    let tol = DEFAULT.projection_tol * 1e-2;
    let game_owned = game.clone();
    let cfg = gain_cfg.clone();
    let gain: DensityTupleMap = Arc::new(move |rho: &[DensityMatrix]| {
        let mats: Vec<HermitianMatrix> = rho.iter().map(|d| d.as_hermitian().clone()).collect();
        gain_map(&game_owned, &mats, &cfg)
            .expect("gain map")
            .into_iter()
            .map(|g| project_density(&g).expect("eigendecomposition"))
            .collect()
    });
    let dims: Vec<usize> = game.signatures().iter().map(|s| s.total_dim()).collect();
    // A crude but safe modulus for the reported level formula.
    let n_joint = game.joint_dim() as f64;
    let a_max = game
        .payoffs()
        .iter()
        .map(|h| h.spectral_norm())
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let total: usize = dims.iter().sum();
    let lipschitz = 4.0 * total as f64 * (1.0 + 4.0 * n_joint * a_max) * game.players() as f64;
    let problem = DensityMapProblem::new(dims, gain, lipschitz, epsilon)?;

    let (route, mats, pipeline, gain_summary, reason) = match solve_density_problem(&problem, r, options) {
        Ok(sol) => {
            let mats: Vec<HermitianMatrix> = sol.densities.into_iter().map(DensityMatrix::into_hermitian).collect();
            (SolveRoute::Reduction, mats, Some(sol.report), None, None)
        }
        Err(Error::BudgetExceeded { required, limit }) if allow_fallback => {
            let run = iterate_gain(game, None, gain_cfg)?;
            let reason = format!("the simplex instance needs {required} cells, over the budget of {limit}");
            (SolveRoute::GainFallback, run.state.matrices(), None, Some(run.summary()), Some(reason))
        }
        Err(e) => return Err(e),
    };
    let profile = profile_from_densities(&mats, game.signatures(), tol)?;
    let certificate = certify(game, &profile, epsilon, 1e-9)?;
    Ok(ReductionOutcome {
        route,
        requested_epsilon: epsilon,
        achieved_epsilon: certificate.max_gap().max(0.0),
        met_target: certificate.valid,
        pipeline,
        gain: gain_summary,
        certificate,
        profile: Some(profile),
        fallback_reason: reason,
    })
}

/// Built-in single-density problems on `D(C^n)` used by the command line and
/// the tests.
pub fn builtin_problem(name: &str, n: usize) -> Result<DensityMapProblem> {
    let target = HermitianMatrix::identity(n).scale(1.0 / n as f64);
    let (f, k): (DensityMap, f64) = match name {
        "const-mixed" => {
            let t = DensityMatrix::new_unchecked(target);
            (Arc::new(move |_: &DensityMatrix| t.clone()), 1.0)
        }
        "contract-mixed" => (
            Arc::new(move |x: &DensityMatrix| {
                DensityMatrix::new_unchecked((x.as_hermitian() + &target).scale(0.5))
            }),
            0.5,
        ),
        "identity" => (Arc::new(|x: &DensityMatrix| x.clone()), 1.0),
        other => return Err(Error::InvalidArgument(format!("unknown problem '{other}'"))),
    };
    DensityMapProblem::single(n, f, k, 1e-6)
}
