//! Numerical tolerances shared by every module.
//!
//! The constructions are exact in principle; in floating point each check
//! needs a threshold. They all live here so that the choices stay coherent.

/// Tolerance record with the crate-wide defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Largest anti-Hermitian part silently removed at construction.
    pub hermitian_reject: f64,
    /// Smallest admissible eigenvalue of a density matrix.
    pub density_min_eig: f64,
    /// Admissible trace deviation of a density matrix.
    pub density_trace: f64,
    /// Eigenvalue below which `normalize_psd` refuses its input.
    pub normalize_reject: f64,
    /// Eigenvalue floor for strategy matrices.
    pub strategy_psd: f64,
    /// Residual bound for the linear constraint chain of a strategy.
    pub strategy_residual: f64,
    /// Convergence tolerance of the alternating-projection solver.
    pub projection_tol: f64,
    /// Iteration budget of the alternating-projection solver.
    pub projection_max_iter: usize,
    /// Iteration budget of projected ascent in best responses.
    pub best_response_max_iter: usize,
    /// Largest number of cells a fixed-point search may enumerate.
    pub cell_budget: u128,
    /// Residual accepted for a barycentric fixed point.
    pub fixed_point_residual: f64,
    /// Negative weight tolerated in a barycentric solution.
    pub weight_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        DEFAULT
    }
}

pub const DEFAULT: Tolerances = Tolerances {
    hermitian_reject: 1e-6,
    density_min_eig: 1e-9,
    density_trace: 1e-9,
    normalize_reject: 1e-6,
    strategy_psd: 1e-8,
    strategy_residual: 1e-6,
    projection_tol: 1e-7,
    projection_max_iter: 20_000,
    best_response_max_iter: 5_000,
    cell_budget: 5_000_000,
    fixed_point_residual: 1e-9,
    weight_floor: 1e-12,
};
