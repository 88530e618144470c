use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use qnash::config::DEFAULT;
use qnash::error::{Error, Result};
use qnash::gain::{certified_epsilon, iterate_gain, profile_from_state, GainConfig};
use qnash::game::{best_response_with, certify, expected_payoff, BestResponseOptions};
use qnash::io;
use qnash::linalg::DensityMatrix;
use qnash::reduction::{builtin_problem, solve_density_problem, solve_game_via_reduction};
use qnash::sampling::random_hermitian;
use qnash::simplex::{cell_count, diameter_bound, find_fixed_point, subdivision_diameter, FixedPointOptions, SimplexPoint};
use qnash::strategies::{check_strategy, project_to_set_detailed, StrategySignature};
use qnash::wigner::WignerBasis;

#[derive(Parser, Debug)]
#[command(name = "qnash", version, about = "Equilibria of quantum games and fixed points of density maps")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Numerical tolerance (meaning depends on the command).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Iteration budget.
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Maximum number of subsimplices searched.
    #[arg(long, global = true)]
    budget: Option<u128>,
    /// Subdivision level.
    #[arg(long, global = true)]
    r: Option<usize>,
    /// Damping of the gain iteration.
    #[arg(long, global = true)]
    damping: Option<f64>,
    /// Worker threads for the cell search (default: QNASH_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the JSON result here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check whether a profile is an ε-approximate Nash equilibrium.
    Certify {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
    },
    /// Iterate the gain function to an approximate equilibrium.
    SolveGain {
        #[arg(long)]
        game: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
        /// Also write the profile (strategies only) here.
        #[arg(long)]
        profile_out: Option<PathBuf>,
    },
    /// Best response of one player to a profile.
    BestResponse {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        /// Zero-based player index.
        #[arg(long)]
        player: usize,
    },
    /// Project a Hermitian matrix onto a strategy set.
    Project {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        in_dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        out_dims: Vec<usize>,
        #[arg(long, value_enum, default_value_t = TargetSet::Strategies)]
        set: TargetSet,
    },
    /// Discrete Wigner map and its inverse.
    Wigner {
        #[command(subcommand)]
        op: WignerOp,
    },
    /// Exact fixed point of a barycentric approximation on Δ_n.
    Fixpoint {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = SimplexMap::Rotate)]
        f: SimplexMap,
        /// JSON file with a column-stochastic `matrix`; used with `--f linear`.
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Fixed point of a built-in density map through the Wigner pipeline.
    Reduce {
        #[arg(long, value_enum, default_value_t = Problem::ConstMixed)]
        problem: Problem,
        #[arg(long, default_value_t = 3)]
        n: usize,
    },
    /// Solve a game through the fixed-point pipeline.
    SolveReduction {
        #[arg(long)]
        game: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        epsilon: f64,
        /// Fail with the budget error instead of falling back to the gain iteration.
        #[arg(long)]
        no_fallback: bool,
        #[arg(long)]
        profile_out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum WignerOp {
    /// ψ of a Hermitian matrix file.
    Psi {
        #[arg(long)]
        matrix: PathBuf,
    },
    /// ψ⁻¹ of a vector file, or of the zero-based vertex `--vertex` of Δ_{n²}.
    Inv {
        #[arg(long)]
        vector: Option<PathBuf>,
        #[arg(long)]
        vertex: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// ψ⁻¹(ψ(H)) for a matrix file, or a seeded random H of size `--n`.
    Roundtrip {
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum TargetSet {
    /// The strategy set itself (trace d).
    Strategies,
    /// Unit-trace strategies.
    Normalized,
    /// Nonnegative multiples of strategies.
    Cone,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum SimplexMap {
    Identity,
    Constant,
    Contract,
    Rotate,
    Linear,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Problem {
    ConstMixed,
    ContractMixed,
    Identity,
}

impl Problem {
    fn id(self) -> &'static str {
        match self {
            Problem::ConstMixed => "const-mixed",
            Problem::ContractMixed => "contract-mixed",
            Problem::Identity => "identity",
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::DimensionMismatch { .. } | Error::EvenDimension(_) | Error::InvalidShape(_) | Error::NotSquare { .. } => 3,
        Error::NotConverged { .. } | Error::NoFixedPoint => 4,
        Error::BudgetExceeded { .. } => 5,
        _ => 2,
    }
}

/// A finished command: the JSON document and the exit status to report.
struct Outcome {
    doc: Value,
    code: u8,
    extra: Vec<(PathBuf, Value)>,
}

impl Outcome {
    fn ok(doc: Value) -> Self {
        Self { doc, code: 0, extra: Vec::new() }
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
    }
}

fn fixed_point_options(c: &Common) -> Result<FixedPointOptions> {
    let mut o = FixedPointOptions { threads: c.threads, ..FixedPointOptions::default() };
    if let Some(b) = c.budget {
        o.budget = b;
    }
    if let Some(t) = c.tol {
        o.residual_tol = positive("--tol", t)?;
    }
    Ok(o)
}

fn gain_config(c: &Common) -> Result<GainConfig> {
    let mut g = GainConfig { seed: c.seed, ..GainConfig::default() };
    if let Some(t) = c.tol {
        g.target_residual = positive("--tol", t)?;
    }
    if let Some(m) = c.max_iter {
        g.max_iter = m;
    }
    if let Some(d) = c.damping {
        g.damping = d;
    }
    g.validate()?;
    Ok(g)
}

fn common_fields(c: &Common, command: &str) -> Value {
    json!({ "command": command, "seed": c.seed })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(a), Value::Object(b)) = (&mut base, extra) {
        a.extend(b);
    }
    base
}

fn cmd_certify(c: &Common, game: &Path, profile: &Path, epsilon: f64) -> Result<Outcome> {
    let epsilon = positive("--epsilon", epsilon)?;
    let g = io::game_from_json(&io::read_json(game)?)?;
    let p = io::profile_from_json(&io::read_json(profile)?, &g)?;
    let cert = certify(&g, &p, epsilon, c.tol.map_or(Ok(1e-9), |t| positive("--tol", t))?)?;
    let code = if cert.valid { 0 } else { 1 };
    Ok(Outcome { doc: merge(common_fields(c, "certify"), io::report(&cert)), code, extra: Vec::new() })
}

fn cmd_solve_gain(c: &Common, game: &Path, epsilon: f64, profile_out: Option<&Path>) -> Result<Outcome> {
    let epsilon = positive("--epsilon", epsilon)?;
    let cfg = gain_config(c)?;
    let g = io::game_from_json(&io::read_json(game)?)?;
    let run = iterate_gain(&g, None, &cfg)?;
    let profile = profile_from_state(&run.state, g.signatures())?;
    let cert = certify(&g, &profile, epsilon, 1e-9)?;
    let bound = certified_epsilon(&g, &run.state.matrices(), &cfg)?;
    let summary = run.summary();
    let code = if summary.converged && cert.valid { 0 } else { 4 };
    let doc = merge(
        common_fields(c, "solve-gain"),
        json!({
            "format": io::FORMAT,
            "damping": cfg.damping,
            "target_residual": cfg.target_residual,
            "iterations": summary.iterations,
            "restarts_used": summary.restarts_used,
            "converged": summary.converged,
            "residual": summary.residual,
            "certified_epsilon": bound,
            "certificate": io::report(&cert),
            "profile": io::profile_to_json(&profile),
        }),
    );
    let extra = profile_out.map(|p| (p.to_path_buf(), io::profile_to_json(&profile))).into_iter().collect();
    Ok(Outcome { doc, code, extra })
}

fn cmd_best_response(c: &Common, game: &Path, profile: &Path, player: usize) -> Result<Outcome> {
    let g = io::game_from_json(&io::read_json(game)?)?;
    let p = io::profile_from_json(&io::read_json(profile)?, &g)?;
    if player >= g.players() {
        return Err(Error::DimensionMismatch { expected: g.players(), actual: player });
    }
    let mut opts = BestResponseOptions::default();
    if let Some(t) = c.tol {
        opts.projection_tol = positive("--tol", t)?;
    }
    if let Some(m) = c.max_iter {
        opts.max_iter = m;
    }
    let br = best_response_with(&g, &p, player, &opts)?;
    let current = expected_payoff(&g, &p, player)?;
    Ok(Outcome::ok(merge(
        common_fields(c, "best-response"),
        json!({
            "format": io::FORMAT,
            "player": player,
            "value": br.value,
            "current_payoff": current,
            "gap": br.value - current,
            "iterations": br.iterations,
            "strategy": io::matrix_to_json(br.strategy.matrix()),
        }),
    )))
}

fn cmd_project(c: &Common, matrix: &Path, in_dims: &[usize], out_dims: &[usize], set: TargetSet) -> Result<Outcome> {
    let sig = StrategySignature::new(in_dims.to_vec(), out_dims.to_vec())?;
    let h = io::hermitian_from_json(&io::read_json(matrix)?)?;
    if h.dim() != sig.total_dim() {
        return Err(Error::DimensionMismatch { expected: sig.total_dim(), actual: h.dim() });
    }
    let tol = c.tol.map_or(Ok(1e-9), |t| positive("--tol", t))?;
    let max_iter = c.max_iter.unwrap_or(DEFAULT.projection_max_iter);
    let d = sig.input_dim() as f64;
    let (input, cone, scale) = match set {
        TargetSet::Strategies => (h.scale(1.0 / d), false, d),
        TargetSet::Normalized => (h.clone(), false, 1.0),
        TargetSet::Cone => (h.clone(), true, 1.0),
    };
    let proj = project_to_set_detailed(&input, &sig, cone, tol, max_iter)?;
    let out = proj.matrix.scale(scale);
    let check_scale = match set {
        TargetSet::Normalized => d,
        TargetSet::Cone => {
            let t = out.trace();
            if t > 0.0 {
                d / t
            } else {
                1.0
            }
        }
        TargetSet::Strategies => 1.0,
    };
    let report = check_strategy(&out.scale(check_scale), &sig, 1e-5)?;
    Ok(Outcome::ok(merge(
        common_fields(c, "project"),
        json!({
            "format": io::FORMAT,
            "signature": io::signature_to_json(&sig),
            "iterations": proj.iterations,
            "residual": proj.residual,
            "distance": out.distance(&h),
            "constraints": report,
            "passes": report.passes(),
            "matrix": io::matrix_to_json(&out),
        }),
    )))
}

fn wigner_dim(len: usize) -> Result<usize> {
    let n = (len as f64).sqrt().round() as usize;
    if n * n != len {
        return Err(Error::InvalidShape(format!("vector of length {len} is not n² long")));
    }
    Ok(n)
}

fn cmd_wigner(c: &Common, op: &WignerOp) -> Result<Outcome> {
    match op {
        WignerOp::Psi { matrix } => {
            let h = io::hermitian_from_json(&io::read_json(matrix)?)?;
            let basis = WignerBasis::shared(h.dim())?;
            let v = basis.psi(&h)?;
            Ok(Outcome::ok(merge(
                common_fields(c, "wigner psi"),
                json!({ "format": io::FORMAT, "n": h.dim(), "vector": v }),
            )))
        }
        WignerOp::Inv { vector, vertex, n } => {
            let v = match (vector, vertex) {
                (Some(path), None) => {
                    let doc = io::read_json(path)?;
                    io::vector_from_json(doc.get("vector").unwrap_or(&doc))?
                }
                (None, Some(k)) => {
                    let n = n.ok_or_else(|| Error::InvalidArgument("--vertex needs --n".into()))?;
                    if *k >= n * n {
                        return Err(Error::DimensionMismatch { expected: n * n, actual: *k });
                    }
                    let mut v = vec![0.0; n * n];
                    v[*k] = 1.0;
                    v
                }
                _ => return Err(Error::InvalidArgument("give exactly one of --vector or --vertex".into())),
            };
            let dim = wigner_dim(v.len())?;
            if let Some(n) = n {
                if *n != dim {
                    return Err(Error::DimensionMismatch { expected: *n, actual: dim });
                }
            }
            let basis = WignerBasis::shared(dim)?;
            let h = basis.psi_inv(&v)?;
            let min = h.min_eigenvalue()?;
            Ok(Outcome::ok(merge(
                common_fields(c, "wigner inv"),
                json!({
                    "format": io::FORMAT,
                    "n": dim,
                    "matrix": io::matrix_to_json(&h),
                    "trace": h.trace(),
                    "min_eigenvalue": min,
                    "is_density": min >= -1e-12,
                }),
            )))
        }
        WignerOp::Roundtrip { matrix, n } => {
            let h = match (matrix, n) {
                (Some(path), None) => io::hermitian_from_json(&io::read_json(path)?)?,
                (None, Some(n)) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
                    random_hermitian(&mut rng, *n)
                }
                _ => return Err(Error::InvalidArgument("give exactly one of --matrix or --n".into())),
            };
            let basis = WignerBasis::shared(h.dim())?;
            let back = basis.psi_inv(&basis.psi(&h)?)?;
            let diff = &back - &h;
            let max_dev = diff.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
            Ok(Outcome::ok(merge(
                common_fields(c, "wigner roundtrip"),
                json!({
                    "format": io::FORMAT,
                    "n": h.dim(),
                    "max_deviation": max_dev,
                    "frobenius_deviation": diff.frobenius_norm(),
                }),
            )))
        }
    }
}

fn column_stochastic(path: &Path, n: usize) -> Result<Vec<Vec<f64>>> {
    let doc = io::read_json(path)?;
    let m = io::complex_matrix_from_json(doc.get("matrix").unwrap_or(&doc))?;
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: m.nrows() });
    }
    if m.iter().any(|z| z.im != 0.0 || z.re < 0.0) {
        return Err(Error::InvalidArgument("map matrix must be real and nonnegative".into()));
    }
    for j in 0..n {
        let s: f64 = (0..n).map(|i| m[(i, j)].re).sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("column {j} sums to {s}, not 1")));
        }
    }
    Ok((0..n).map(|i| (0..n).map(|j| m[(i, j)].re).collect()).collect())
}

fn cmd_fixpoint(c: &Common, n: usize, f: SimplexMap, map: Option<&Path>) -> Result<Outcome> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let r = c.r.unwrap_or(1);
    let opts = fixed_point_options(c)?;
    let center = 1.0 / n as f64;
    let linear = match (f, map) {
        (SimplexMap::Linear, Some(p)) => Some(column_stochastic(p, n)?),
        (SimplexMap::Linear, None) => return Err(Error::InvalidArgument("--f linear needs --map".into())),
        (_, Some(_)) => return Err(Error::InvalidArgument("--map is only used with --f linear".into())),
        _ => None,
    };
    let g = move |v: &[f64]| -> Vec<f64> {
        match f {
            SimplexMap::Identity => v.to_vec(),
            SimplexMap::Constant => vec![center; v.len()],
            SimplexMap::Contract => v.iter().map(|x| 0.5 * (x + center)).collect(),
            SimplexMap::Rotate => (0..v.len()).map(|i| v[(i + v.len() - 1) % v.len()]).collect(),
            SimplexMap::Linear => {
                let a = linear.as_ref().expect("checked above");
                a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
            }
        }
    };
    let fp = find_fixed_point(|p: &SimplexPoint| g(&p.to_f64()), n, r, &opts)?;
    let direct = {
        let gv = g(&fp.point);
        gv.iter().zip(&fp.point).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    };
    Ok(Outcome::ok(merge(
        common_fields(c, "fixpoint"),
        json!({
            "format": io::FORMAT,
            "n": n,
            "level": r,
            "cells": cell_count(n, r),
            "diameter_bound": diameter_bound(n, r),
            "subdivision_diameter": subdivision_diameter(n, r),
            "direct_residual": direct,
            "fixed_point": io::report(&fp),
        }),
    )))
}

fn cmd_reduce(c: &Common, problem: Problem, n: usize) -> Result<Outcome> {
    let opts = fixed_point_options(c)?;
    let p = builtin_problem(problem.id(), n)?;
    let sol = solve_density_problem(&p, c.r, &opts)?;
    let rho = &sol.densities[0];
    let mixed = DensityMatrix::maximally_mixed(n);
    Ok(Outcome::ok(merge(
        common_fields(c, "reduce"),
        json!({
            "format": io::FORMAT,
            "problem": problem.id(),
            "n": n,
            "padded": sol.report.density_dim != n,
            "residual": sol.residual,
            "distance_to_maximally_mixed": rho.as_hermitian().distance(mixed.as_hermitian()),
            "recovered": io::matrix_to_json(rho.as_hermitian()),
            "pipeline": io::report(&sol.report),
        }),
    )))
}

fn cmd_solve_reduction(c: &Common, game: &Path, epsilon: f64, no_fallback: bool, profile_out: Option<&Path>) -> Result<Outcome> {
    let epsilon = positive("--epsilon", epsilon)?;
    let g = io::game_from_json(&io::read_json(game)?)?;
    let opts = fixed_point_options(c)?;
    let cfg = GainConfig { projection_tol: 1e-9, ..gain_config(&Common { tol: None, ..c.clone() })? };
    let out = solve_game_via_reduction(&g, epsilon, c.r, &opts, &cfg, !no_fallback)?;
    let profile = out.profile.clone().expect("solver returns the profile");
    let code = if out.met_target { 0 } else { 1 };
    let doc = merge(
        merge(common_fields(c, "solve-reduction"), io::report(&out)),
        json!({ "profile": io::profile_to_json(&profile) }),
    );
    let extra = profile_out.map(|p| (p.to_path_buf(), io::profile_to_json(&profile))).into_iter().collect();
    Ok(Outcome { doc, code, extra })
}

fn run(cli: &Cli) -> Result<Outcome> {
    let c = &cli.common;
    match &cli.command {
        Command::Certify { game, profile, epsilon } => cmd_certify(c, game, profile, *epsilon),
        Command::SolveGain { game, epsilon, profile_out } => cmd_solve_gain(c, game, *epsilon, profile_out.as_deref()),
        Command::BestResponse { game, profile, player } => cmd_best_response(c, game, profile, *player),
        Command::Project { matrix, in_dims, out_dims, set } => cmd_project(c, matrix, in_dims, out_dims, *set),
        Command::Wigner { op } => cmd_wigner(c, op),
        Command::Fixpoint { n, f, map } => cmd_fixpoint(c, *n, *f, map.as_deref()),
        Command::Reduce { problem, n } => cmd_reduce(c, *problem, *n),
        Command::SolveReduction { game, epsilon, no_fallback, profile_out } => {
            cmd_solve_reduction(c, game, *epsilon, *no_fallback, profile_out.as_deref())
        }
    }
}

/// Writes through a temporary file in the same directory so that readers
/// never see a partial document.
fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            for (path, doc) in &outcome.extra {
                if let Err(e) = write_atomic(path, &io::to_string(doc)) {
                    eprintln!("qnash: cannot write {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            }
            let text = io::to_string(&outcome.doc);
            match &cli.common.out {
                Some(path) => {
                    if let Err(e) = write_atomic(path, &text) {
                        eprintln!("qnash: cannot write {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                }
                None => print!("{text}"),
            }
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("qnash: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
