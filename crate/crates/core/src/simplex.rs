//! Barycentric subdivision of the standard simplex `Δ_n`, point location,
//! barycentric approximations of maps `Δ_n → Δ_n`, and exact fixed points of
//! those approximations.
//!
//! A level-1 cell of a simplex with ordered vertices `w_1, …, w_n` is given
//! by a permutation `π`; its vertices are the barycenters of the chain
//! `{w_π(1)} ⊂ {w_π(1), w_π(2)} ⊂ ··· ⊂ {w_1, …, w_n}`, in that order. A
//! level-`r` cell is a sequence of `r` such permutations, each relative to
//! the vertex order of its parent.

use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::DEFAULT;
use crate::error::{Error, Result};

/// A point of `Δ_n` with exact rational coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SimplexPoint {
    coords: Vec<BigRational>,
}

impl SimplexPoint {
    pub fn new(coords: Vec<BigRational>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidShape("a simplex point needs at least one coordinate".into()));
        }
        if coords.iter().any(|c| c < &BigRational::zero()) {
            return Err(Error::InvalidArgument("simplex coordinates must be nonnegative".into()));
        }
        let sum: BigRational = coords.iter().sum();
        if !sum.is_one() {
            return Err(Error::InvalidArgument(format!("simplex coordinates sum to {sum}, not 1")));
        }
        Ok(Self { coords })
    }

    /// The point `(num_1/den, …, num_n/den)`.
    pub fn from_ratios(nums: &[i64], den: i64) -> Result<Self> {
        if den <= 0 {
            return Err(Error::InvalidArgument("denominator must be positive".into()));
        }
        Self::new(nums.iter().map(|&a| BigRational::new(a.into(), den.into())).collect())
    }

    fn from_scaled(nums: &[u128], den: u128) -> Self {
        let den = BigInt::from(den);
        Self {
            coords: nums.iter().map(|&a| BigRational::new(BigInt::from(a), den.clone())).collect(),
        }
    }

    /// The standard basis vector `u_i` (0-based).
    pub fn vertex(n: usize, i: usize) -> Self {
        let coords = (0..n)
            .map(|j| if i == j { BigRational::one() } else { BigRational::zero() })
            .collect();
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[BigRational] {
        &self.coords
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coords.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect()
    }
}

/// `v_A = (1/|A|) Σ_{k∈A} w_k` over the listed vertices.
pub fn barycenter(vertices: &[SimplexPoint], subset: &[usize]) -> Result<SimplexPoint> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("barycenter of an empty vertex set".into()));
    }
    let n = vertices.first().map_or(0, SimplexPoint::dim);
    let mut acc = vec![BigRational::zero(); n];
    for &k in subset {
        let v = vertices
            .get(k)
            .ok_or_else(|| Error::InvalidArgument(format!("vertex index {k} out of range")))?;
        for (a, c) in acc.iter_mut().zip(&v.coords) {
            *a += c;
        }
    }
    let size = BigRational::from_integer(BigInt::from(subset.len()));
    Ok(SimplexPoint { coords: acc.into_iter().map(|a| a / &size).collect() })
}

/// Barycenter of the standard basis vectors indexed by `subset`.
pub fn standard_barycenter(n: usize, subset: &[usize]) -> Result<SimplexPoint> {
    let vertices: Vec<SimplexPoint> = (0..n).map(|i| SimplexPoint::vertex(n, i)).collect();
    barycenter(&vertices, subset)
}

/// A level-`r` cell: one permutation per subdivision level.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SubsimplexAddress {
    pub n: usize,
    pub chain: Vec<Vec<usize>>,
}

fn is_permutation(p: &[usize], n: usize) -> bool {
    let mut seen = vec![false; n];
    p.len() == n && p.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// Rank of `p` among all permutations of `0..n` in lexicographic order.
fn rank_permutation(p: &[usize]) -> u128 {
    let n = p.len();
    let mut rank = 0u128;
    for i in 0..n {
        let smaller = p[i + 1..].iter().filter(|&&x| x < p[i]).count() as u128;
        rank += smaller * factorial(n - 1 - i);
    }
    rank
}

fn unrank_permutation(n: usize, mut rank: u128) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let f = factorial(n - 1 - i);
        let idx = (rank / f) as usize;
        rank %= f;
        out.push(pool.remove(idx));
    }
    out
}

impl SubsimplexAddress {
    pub fn new(n: usize, chain: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidShape("Δ_0 is empty".into()));
        }
        for p in &chain {
            if !is_permutation(p, n) {
                return Err(Error::InvalidArgument(format!("{p:?} is not a permutation of 0..{n}")));
            }
        }
        Ok(Self { n, chain })
    }

    pub fn level(&self) -> usize {
        self.chain.len()
    }

    /// Position in lexicographic address order.
    pub fn index(&self) -> u128 {
        let f = factorial(self.n);
        self.chain.iter().fold(0, |acc, p| acc * f + rank_permutation(p))
    }

    pub fn from_index(n: usize, r: usize, mut index: u128) -> Self {
        let f = factorial(n);
        let mut chain = vec![Vec::new(); r];
        for level in (0..r).rev() {
            chain[level] = unrank_permutation(n, index % f);
            index /= f;
        }
        Self { n, chain }
    }

    /// Vertices of the cell, in chain order.
    pub fn vertices(&self) -> Vec<SimplexPoint> {
        let mut current: Vec<SimplexPoint> = (0..self.n).map(|i| SimplexPoint::vertex(self.n, i)).collect();
        for p in &self.chain {
            current = (1..=self.n)
                .map(|j| barycenter(&current, &p[..j]).expect("nonempty prefix"))
                .collect();
        }
        current
    }
}

/// A located point: its cell and exact weights on the cell's vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycentricCoords {
    pub address: SubsimplexAddress,
    pub weights: Vec<BigRational>,
    pub vertices: Vec<SimplexPoint>,
}

impl BarycentricCoords {
    /// `Σ λ_i v_i`.
    pub fn reconstruct(&self) -> SimplexPoint {
        let n = self.address.n;
        let mut acc = vec![BigRational::zero(); n];
        for (w, v) in self.weights.iter().zip(&self.vertices) {
            for (a, c) in acc.iter_mut().zip(&v.coords) {
                *a += w * c;
            }
        }
        SimplexPoint { coords: acc }
    }

    /// Vertices carrying nonzero weight, with their weights.
    pub fn support(&self) -> Vec<(&SimplexPoint, &BigRational)> {
        self.vertices
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| !w.is_zero())
            .collect()
    }
}

/// Finds the level-`r` cell containing `v` and its weights there. Local
/// coordinates are sorted in descending order, ties going to the smaller
/// vertex index; the sorted order is the cell's permutation.
pub fn locate(v: &SimplexPoint, r: usize) -> BarycentricCoords {
    let n = v.dim();
    let mut beta = v.coords.clone();
    let mut chain = Vec::with_capacity(r);
    for _ in 0..r {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by(|&a, &b| beta[b].cmp(&beta[a]).then(a.cmp(&b)));
        let mut lambda = Vec::with_capacity(n);
        for j in 0..n {
            let next = if j + 1 < n { beta[perm[j + 1]].clone() } else { BigRational::zero() };
            let scale = BigRational::from_integer(BigInt::from(j + 1));
            lambda.push(scale * (&beta[perm[j]] - next));
        }
        chain.push(perm);
        beta = lambda;
    }
    let address = SubsimplexAddress { n, chain };
    let vertices = address.vertices();
    BarycentricCoords { address, weights: beta, vertices }
}

/// Number of level-`r` cells, `(n!)^r`, if it fits.
pub fn cell_count(n: usize, r: usize) -> Option<u128> {
    let f = factorial(n.min(34));
    if n > 34 {
        return None;
    }
    (0..r).try_fold(1u128, |acc, _| acc.checked_mul(f))
}

fn check_budget(n: usize, r: usize, budget: u128) -> Result<u128> {
    match cell_count(n, r) {
        Some(c) if c <= budget => Ok(c),
        Some(c) => Err(Error::BudgetExceeded { required: c, limit: budget }),
        None => Err(Error::BudgetExceeded { required: u128::MAX, limit: budget }),
    }
}

fn lcm_upto(n: usize) -> u128 {
    fn gcd(a: u128, b: u128) -> u128 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    (1..=n as u128).fold(1, |acc, k| acc / gcd(acc, k) * k)
}

/// Integer vertex arithmetic on the common denominator `lcm(1..n)^r`, which
/// clears every denominator that can appear at level `r`.
#[derive(Debug, Clone, Copy)]
struct ScaledGrid {
    n: usize,
    r: usize,
    denom: u128,
}

impl ScaledGrid {
    fn new(n: usize, r: usize) -> Result<Self> {
        let l = lcm_upto(n);
        let denom = (0..r)
            .try_fold(1u128, |acc, _| acc.checked_mul(l))
            .ok_or(Error::BudgetExceeded { required: u128::MAX, limit: u128::MAX })?;
        Ok(Self { n, r, denom })
    }

    fn base(&self) -> Vec<Vec<u128>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| if i == j { self.denom } else { 0 }).collect())
            .collect()
    }

    fn average(points: &[&Vec<u128>]) -> Vec<u128> {
        let k = points.len() as u128;
        let n = points[0].len();
        (0..n)
            .map(|c| {
                let s: u128 = points.iter().map(|p| p[c]).sum();
                debug_assert_eq!(s % k, 0, "grid denominator too small");
                s / k
            })
            .collect()
    }

    fn subdivide(current: &[Vec<u128>], perm: &[usize]) -> Vec<Vec<u128>> {
        let mut out = Vec::with_capacity(perm.len());
        let mut prefix: Vec<&Vec<u128>> = Vec::with_capacity(perm.len());
        for &p in perm {
            prefix.push(&current[p]);
            out.push(Self::average(&prefix));
        }
        out
    }

    fn cell(&self, perms: &[Vec<usize>]) -> Vec<Vec<u128>> {
        perms.iter().fold(self.base(), |cur, p| Self::subdivide(&cur, p))
    }

    fn to_f64(&self, v: &[u128]) -> Vec<f64> {
        v.iter().map(|&a| a as f64 / self.denom as f64).collect()
    }

    fn to_point(&self, v: &[u128]) -> SimplexPoint {
        SimplexPoint::from_scaled(v, self.denom)
    }

    /// All vertices of `𝔅ⁿ_r`, sorted, via barycenters of every nonempty
    /// vertex subset of every level-`(r−1)` cell.
    fn level_vertices(&self) -> Vec<Vec<u128>> {
        if self.r == 0 {
            return self.base();
        }
        let parents = cell_count(self.n, self.r - 1).expect("budget checked");
        let mut all: Vec<Vec<u128>> = (0..parents)
            .into_par_iter()
            .flat_map_iter(|idx| {
                let addr = SubsimplexAddress::from_index(self.n, self.r - 1, idx);
                let cell = self.cell(&addr.chain);
                (1u32..(1 << self.n)).map(move |mask| {
                    let members: Vec<&Vec<u128>> =
                        (0..self.n).filter(|i| mask & (1 << i) != 0).map(|i| &cell[i]).collect();
                    Self::average(&members)
                })
            })
            .collect();
        all.par_sort_unstable();
        all.dedup();
        all
    }
}

/// The vertex set `𝔅ⁿ_r`, refusing instances with more than `budget` cells
/// at level `r − 1`.
pub fn level_vertices(n: usize, r: usize, budget: u128) -> Result<Vec<SimplexPoint>> {
    if n == 0 {
        return Err(Error::InvalidShape("Δ_0 is empty".into()));
    }
    check_budget(n, r.saturating_sub(1), budget)?;
    let grid = ScaledGrid::new(n, r)?;
    Ok(grid.level_vertices().iter().map(|v| grid.to_point(v)).collect())
}

/// `(1 − 1/(n+1))^r`.
pub fn diameter_bound(n: usize, r: usize) -> f64 {
    (1.0 - 1.0 / (n as f64 + 1.0)).powi(r as i32)
}

/// `√2 (1 − 1/n)^r`: the classical contraction `(d/(d+1))^r` of the
/// diameter under subdivision, for `Δ_n` of dimension `d = n − 1` and
/// diameter `√2`.
pub fn subdivision_diameter(n: usize, r: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    std::f64::consts::SQRT_2 * (1.0 - 1.0 / n as f64).powi(r as i32)
}

fn check_codomain(value: &[f64], n: usize) -> Result<()> {
    let sum: f64 = value.iter().sum();
    if value.len() != n || value.iter().any(|&x| !(x >= -1e-9)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "map value {value:?} is not a point of Δ_{n}"
        )));
    }
    Ok(())
}

/// The level-`r` barycentric approximation `g_r` of `f`, with every
/// evaluation of `f` at a vertex cached.
pub struct BarycentricApproximation<F> {
    n: usize,
    r: usize,
    f: F,
    cache: Mutex<HashMap<SimplexPoint, Vec<f64>>>,
}

impl<F> BarycentricApproximation<F>
where
    F: Fn(&SimplexPoint) -> Vec<f64>,
{
    pub fn new(n: usize, r: usize, f: F) -> Self {
        Self { n, r, f, cache: Mutex::new(HashMap::new()) }
    }

    pub fn level(&self) -> usize {
        self.r
    }

    pub fn vertex_value(&self, v: &SimplexPoint) -> Result<Vec<f64>> {
        if let Some(hit) = self.cache.lock().expect("cache poisoned").get(v) {
            return Ok(hit.clone());
        }
        let value = (self.f)(v);
        check_codomain(&value, self.n)?;
        self.cache.lock().expect("cache poisoned").insert(v.clone(), value.clone());
        Ok(value)
    }

    /// `g_r(v) = Σ λ_i f(v_i)`.
    pub fn eval(&self, v: &SimplexPoint) -> Result<Vec<f64>> {
        if v.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, actual: v.dim() });
        }
        let located = locate(v, self.r);
        let mut out = vec![0.0; self.n];
        for (vertex, w) in located.support() {
            let fv = self.vertex_value(vertex)?;
            let w = w.to_f64().unwrap_or(f64::NAN);
            for (o, x) in out.iter_mut().zip(fv) {
                *o += w * x;
            }
        }
        Ok(out)
    }

    pub fn cached_vertices(&self) -> usize {
        self.cache.lock().expect("cache poisoned").len()
    }
}

/// One-shot `g_r(v)`.
pub fn bary_approx<F>(f: F, r: usize, v: &SimplexPoint) -> Result<Vec<f64>>
where
    F: Fn(&SimplexPoint) -> Vec<f64>,
{
    BarycentricApproximation::new(v.dim(), r, f).eval(v)
}

/// Lawson–Hanson nonnegative least squares: `min ‖A x − b‖₂` over `x ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0) * b.amax().max(1.0);
    let tol = 1e-14 * scale * (a.nrows().max(n) as f64);
    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
        let sub = a.select_columns(&idx);
        let sol = sub
            .svd(true, true)
            .solve(b, 1e-13)
            .unwrap_or_else(|_| DVector::zeros(idx.len()));
        let mut full = DVector::zeros(n);
        for (k, &i) in idx.iter().enumerate() {
            full[i] = sol[k];
        }
        full
    };
    for _outer in 0..3 * n + 3 {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&i| !passive[i])
            .fold(None, |best: Option<usize>, i| match best {
                Some(j) if w[j] >= w[i] => Some(j),
                _ => Some(i),
            });
        let Some(j) = candidate else { break };
        if w[j] <= tol {
            break;
        }
        passive[j] = true;
        for _inner in 0..3 * n + 3 {
            let s = solve_passive(&passive);
            if (0..n).filter(|&i| passive[i]).all(|i| s[i] > 0.0) {
                x = s;
                break;
            }
            let mut alpha = f64::INFINITY;
            for i in (0..n).filter(|&i| passive[i] && s[i] <= 0.0) {
                let denom = x[i] - s[i];
                if denom > 0.0 {
                    alpha = alpha.min(x[i] / denom);
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            x = &x + (&s - &x) * alpha;
            for i in 0..n {
                if passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Maximum number of level-`r` cells.
    pub budget: u128,
    /// Accept a cell when `‖g_r(v) − v‖₂` is at most this.
    pub residual_tol: f64,
    /// Accept weights down to `−weight_floor`.
    pub weight_floor: f64,
    /// Worker threads; `None` reads `QNASH_THREADS`, else rayon's default.
    pub threads: Option<usize>,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            budget: DEFAULT.cell_budget,
            residual_tol: DEFAULT.fixed_point_residual,
            weight_floor: DEFAULT.weight_floor,
            threads: None,
        }
    }
}

/// Thread count from `QNASH_THREADS`, when set to a positive integer.
pub fn env_threads() -> Option<usize> {
    std::env::var("QNASH_THREADS").ok()?.trim().parse().ok().filter(|&t| t > 0)
}

/// Runs `job` on a pool of the requested size (or the global pool).
pub fn with_threads<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads.or_else(env_threads) {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
        None => Ok(job()),
    }
}

/// An exact fixed point of the barycentric approximation `g_r`.
#[derive(Debug, Clone, Serialize)]
pub struct FixedPoint {
    pub point: Vec<f64>,
    pub address: SubsimplexAddress,
    pub cell_index: u128,
    /// Weights on the cell's vertices (in chain order).
    pub weights: Vec<f64>,
    pub vertices: Vec<Vec<f64>>,
    /// `‖g_r(v*) − v*‖₂`.
    pub residual: f64,
    pub vertex_evaluations: usize,
}

/// Searches level-`r` cells in address order for a point `v = Σ λ_i v_i`
/// with `Σ λ_i f(v_i) = v`, returning the first cell that admits one. The
/// vertex values of `f` are computed once, in parallel, before the search.
pub fn find_fixed_point<F>(f: F, n: usize, r: usize, options: &FixedPointOptions) -> Result<FixedPoint>
where
    F: Fn(&SimplexPoint) -> Vec<f64> + Sync,
{
    if n == 0 {
        return Err(Error::InvalidShape("Δ_0 is empty".into()));
    }
    let cells = check_budget(n, r, options.budget)?;
    let grid = ScaledGrid::new(n, r)?;
    with_threads(options.threads, || search(&f, grid, cells, options))?
}

fn search<F>(f: &F, grid: ScaledGrid, cells: u128, options: &FixedPointOptions) -> Result<FixedPoint>
where
    F: Fn(&SimplexPoint) -> Vec<f64> + Sync,
{
    let n = grid.n;
    let keys = grid.level_vertices();
    let values = keys
        .par_iter()
        .map(|k| {
            let value = f(&grid.to_point(k));
            check_codomain(&value, n)?;
            Ok(value)
        })
        .collect::<Result<Vec<_>>>()?;
    let table: HashMap<&[u128], &[f64]> = keys.iter().map(Vec::as_slice).zip(values.iter().map(Vec::as_slice)).collect();

    let found = (0..cells).into_par_iter().find_map_first(|idx| {
        let address = SubsimplexAddress::from_index(n, grid.r, idx);
        let cell = grid.cell(&address.chain);
        let w: Vec<Vec<f64>> = cell.iter().map(|v| grid.to_f64(v)).collect();
        let fv: Vec<&[f64]> = cell.iter().map(|v| table[v.as_slice()]).collect();
        solve_cell(&w, &fv, options).map(|(weights, point, residual)| FixedPoint {
            point,
            address,
            cell_index: idx,
            weights,
            vertices: w,
            residual,
            vertex_evaluations: keys.len(),
        })
    });
    found.ok_or(Error::NoFixedPoint)
}

/// Solves `Σ λ_i (f(v_i) − v_i) = 0`, `Σ λ_i = 1`, `λ ≥ 0` in one cell.
fn solve_cell(w: &[Vec<f64>], fv: &[&[f64]], options: &FixedPointOptions) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let n = w.len();
    let a = DMatrix::from_fn(n + 1, n, |row, col| if row < n { fv[col][row] - w[col][row] } else { 1.0 });
    let mut b = DVector::zeros(n + 1);
    b[n] = 1.0;
    let lambda = nnls(&a, &b);
    let total: f64 = lambda.iter().sum();
    if !(total > 0.5) {
        return None;
    }
    let lambda: Vec<f64> = lambda.iter().map(|x| x / total).collect();
    if lambda.iter().any(|&x| x < -options.weight_floor) {
        return None;
    }
    let mut point = vec![0.0; n];
    let mut image = vec![0.0; n];
    for (j, &l) in lambda.iter().enumerate() {
        for i in 0..n {
            point[i] += l * w[j][i];
            image[i] += l * fv[j][i];
        }
    }
    let residual = point.iter().zip(&image).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    (residual <= options.residual_tol).then_some((lambda, point, residual))
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    fn point(n: usize) -> impl Strategy<Value = SimplexPoint> {
        proptest::collection::vec(0i64..1000, n)
            .prop_filter("nonzero", |v| v.iter().sum::<i64>() > 0)
            .prop_map(|v| {
                let s: i64 = v.iter().sum();
                SimplexPoint::from_ratios(&v, s).unwrap()
            })
    }

    proptest! {
        #[test]
        fn locate_reconstructs_exactly(v in (2usize..=5).prop_flat_map(point), r in 0usize..=3) {
            let loc = locate(&v, r);
            prop_assert_eq!(loc.reconstruct(), v);
            prop_assert!(loc.weights.iter().all(|w| w >= &BigRational::zero()));
            let total: BigRational = loc.weights.iter().sum();
            prop_assert!(total.is_one());
        }

        #[test]
        fn vertices_are_fixed_by_locate(n in 2usize..=4, idx in 0u128..24, r in 1usize..=2) {
            let idx = idx % cell_count(n, r).unwrap();
            let addr = SubsimplexAddress::from_index(n, r, idx);
            for v in addr.vertices() {
                let loc = locate(&v, r);
                prop_assert_eq!(loc.support().len(), 1);
                prop_assert_eq!(loc.support()[0].0, &v);
            }
        }
    }
}
