//! End-to-end quantitative checks. Each test prints one PASS/FAIL line.

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qnash::gain::{gain_components, gain_map, iterate_gain, profile_from_densities, GainConfig};
use qnash::game::{best_response, certify, matching_pennies, prisoners_dilemma, xi, xi_operators, QuantumGame, StrategyProfile};
use qnash::linalg::{
    hs_inner, normalize_psd, project_density, tensor_all, DensityMatrix, HermitianMatrix,
};
use qnash::reduction::{
    builtin_problem, density_fixed_point, pad_to_odd, padding_residual, solve_density_problem, DensityMap,
    DensityMapProblem,
};
use qnash::sampling::{random_comb, random_density, random_hermitian, random_psd, random_pure_state, random_simplex_point};
use qnash::simplex::{
    bary_approx, cell_count, diameter_bound, find_fixed_point, level_vertices, locate, FixedPointOptions, SimplexPoint,
    SubsimplexAddress,
};
use qnash::strategies::{check_strategy, project_intersection, project_to_set, AffineTarget, StrategySignature};
use qnash::wigner::WignerBasis;

fn verdict(name: &str, ok: bool, detail: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    drop(out);
    assert!(ok, "{name}: {detail}");
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn seconds(d: Duration) -> f64 {
    d.as_secs_f64()
}

#[test]
fn wigner_basis_orthogonality() {
    let start = Instant::now();
    let mut worst_off: f64 = 0.0;
    let mut worst_diag: f64 = 0.0;
    let mut worst_op: f64 = 0.0;
    for n in [1usize, 3, 5, 7, 9] {
        let basis = WignerBasis::build(n).unwrap();
        let ops = basis.operators();
        assert_eq!(ops.len(), n * n);
        let id = HermitianMatrix::identity(n);
        for (j, vj) in ops.iter().enumerate() {
            worst_diag = worst_diag.max((hs_inner(vj, vj).unwrap() - n as f64).abs());
            for vk in &ops[j + 1..] {
                worst_off = worst_off.max(hs_inner(vj, vk).unwrap().abs());
            }
            let m = vj.matrix();
            let unitary = (m * m.adjoint() - id.matrix()).norm();
            let hermitian = (m - m.adjoint()).norm();
            let trace = (m.trace() - Complex64::new(1.0, 0.0)).norm();
            worst_op = worst_op.max(unitary).max(hermitian).max(trace);
        }
    }
    let t = seconds(start.elapsed());
    let ok = worst_off <= 1e-9 && worst_diag <= 1e-9 && worst_op <= 1e-10 && t < 5.0;
    verdict(
        "wigner_basis",
        ok,
        &format!("max |<Vj,Vk>| {worst_off:.2e}, max |<Vk,Vk>-n| {worst_diag:.2e}, operator defects {worst_op:.2e}, {t:.2}s"),
    );
}

#[test]
fn wigner_map_is_a_scaled_isometry() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_round: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for n in [3usize, 5] {
        let basis = WignerBasis::build(n).unwrap();
        let k = (n as f64).sqrt() * (n + 1) as f64;
        for _ in 0..200 {
            let h = random_hermitian(&mut rng, n).scale(rng.random_range(0.1..10.0));
            let back = basis.psi_inv(&basis.psi(&h).unwrap()).unwrap();
            worst_round = worst_round.max(back.distance(&h) / h.frobenius_norm().max(1.0));
            let g = random_hermitian(&mut rng, n);
            let ratio = dist(&basis.psi(&h).unwrap(), &basis.psi(&g).unwrap()) * k / h.distance(&g);
            worst_ratio = worst_ratio.max((ratio - 1.0).abs());
        }
    }
    let ok = worst_round <= 1e-9 && worst_ratio <= 1e-9;
    verdict(
        "wigner_bijection",
        ok,
        &format!("relative roundtrip error {worst_round:.2e}, |ratio - 1| {worst_ratio:.2e}"),
    );
}

/// Eigenvalues projected onto the simplex by the sort-and-threshold rule.
fn spectral_density_oracle(h: &HermitianMatrix) -> HermitianMatrix {
    let eig = nalgebra::SymmetricEigen::new(h.matrix().clone());
    let mut sorted: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        cumulative += x;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    let weights = eig.eigenvalues.map(|x| Complex64::new((x - theta).max(0.0), 0.0));
    let m = &eig.eigenvectors * nalgebra::DMatrix::from_diagonal(&weights) * eig.eigenvectors.adjoint();
    HermitianMatrix::new((&m + m.adjoint()) * Complex64::new(0.5, 0.0)).unwrap()
}

#[test]
fn strategy_projections() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tol = 1e-10;
    let max_iter = 50_000;
    let mut worst_check: f64 = 0.0;
    let mut all_pass = true;
    let mut worst_idem: f64 = 0.0;
    let mut worst_vi = f64::NEG_INFINITY;
    for sig in [StrategySignature::channel(2, 2), StrategySignature::new(vec![2, 2], vec![2, 2]).unwrap()] {
        let d = sig.input_dim() as f64;
        let feasible: Vec<HermitianMatrix> =
            (0..200).map(|_| random_comb(&mut rng, &sig).matrix().scale(1.0 / d)).collect();
        for cone in [false, true] {
            for _ in 0..50 {
                let h = random_hermitian(&mut rng, sig.total_dim());
                let out = project_to_set(&h, &sig, cone, tol, max_iter).unwrap();
                let tr = out.trace();
                let rescale = if cone { if tr > 1e-12 { d / tr } else { 0.0 } } else { d };
                if rescale > 0.0 {
                    let report = check_strategy(&out.scale(rescale), &sig, 1e-5).unwrap();
                    worst_check = worst_check.max(report.max_residual());
                    all_pass &= report.passes();
                }
                let again = project_to_set(&out, &sig, cone, tol, max_iter).unwrap();
                worst_idem = worst_idem.max(again.distance(&out));
                let diff = &h - &out;
                for xi in &feasible {
                    let candidates: Vec<HermitianMatrix> = if cone {
                        vec![xi.scale(rng.random_range(0.0..3.0)), HermitianMatrix::zeros(xi.dim())]
                    } else {
                        vec![xi.clone()]
                    };
                    for c in candidates {
                        worst_vi = worst_vi.max(hs_inner(&(&c - &out), &diff).unwrap());
                    }
                }
            }
        }
    }
    let mut worst_state: f64 = 0.0;
    for n in [2usize, 3, 4] {
        let sig = StrategySignature::state_preparation(n);
        for _ in 0..50 {
            let h = random_hermitian(&mut rng, n);
            let oracle = spectral_density_oracle(&h);
            let general = project_intersection(&h, &sig, AffineTarget::Trace(1.0), tol, max_iter).unwrap();
            let fast = project_to_set(&h, &sig, false, tol, max_iter).unwrap();
            worst_state = worst_state.max(general.matrix.distance(&oracle)).max(fast.distance(&oracle));
            worst_state = worst_state.max(project_density(&h).unwrap().as_hermitian().distance(&oracle));
        }
    }
    let t = seconds(start.elapsed());
    let ok = all_pass && worst_idem <= 1e-6 && worst_vi <= 1e-5 && worst_state <= 1e-6 && t < 60.0;
    verdict(
        "strategy_projections",
        ok,
        &format!(
            "constraint residual {worst_check:.2e}, idempotence {worst_idem:.2e}, max variational product {worst_vi:.2e}, state-preparation agreement {worst_state:.2e}, {t:.1}s"
        ),
    );
}

fn random_state_game(rng: &mut ChaCha8Rng, dims: &[usize]) -> QuantumGame {
    let n: usize = dims.iter().product();
    let sigs = dims.iter().map(|&d| StrategySignature::state_preparation(d)).collect();
    let payoffs = dims.iter().map(|_| random_hermitian(rng, n)).collect();
    QuantumGame::new(sigs, payoffs).unwrap()
}

#[test]
fn best_response_matches_top_eigenvalue() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let dims = [rng.random_range(1..=4), rng.random_range(1..=4)];
        let game = random_state_game(&mut rng, &dims);
        let mats = dims.iter().map(|&d| random_density(&mut rng, d).into_hermitian()).collect();
        let profile = StrategyProfile::from_matrices(game.signatures(), mats).unwrap();
        for k in 0..2 {
            let br = best_response(&game, &profile, k, 1e-9).unwrap();
            let top = xi(&game, &profile, k).unwrap().max_eigenvalue().unwrap();
            worst = worst.max((br.value - top).abs());
        }
    }
    verdict("best_response", worst <= 1e-5, &format!("max |value - lambda_max| {worst:.2e} over 100 games"));
}

#[test]
fn classical_equilibria_via_gain() {
    let cfg = GainConfig::default();

    let start = Instant::now();
    let mp = matching_pennies();
    let run = iterate_gain(&mp, None, &cfg).unwrap();
    let profile = profile_from_densities(&run.state.matrices(), mp.signatures(), 1e-11).unwrap();
    let cert = certify(&mp, &profile, 1e-3, 1e-9).unwrap();
    let diag_dev = profile
        .strategies()
        .iter()
        .flat_map(|s| s.matrix().diagonal())
        .map(|p| (p - 0.5).abs())
        .fold(0.0, f64::max);
    let t_mp = seconds(start.elapsed());
    let mp_ok = run.state.residual <= 1e-6 && cert.valid && cert.max_gap() <= 1e-3 && diag_dev <= 1e-2 && t_mp < 30.0;

    let start = Instant::now();
    let pd = prisoners_dilemma();
    let run_pd = iterate_gain(&pd, None, &cfg).unwrap();
    let profile_pd = profile_from_densities(&run_pd.state.matrices(), pd.signatures(), 1e-11).unwrap();
    let cert_pd = certify(&pd, &profile_pd, 1e-3, 1e-9).unwrap();
    let dd = profile_pd.strategy(0).matrix().get(1, 1).re * profile_pd.strategy(1).matrix().get(1, 1).re;
    let t_pd = seconds(start.elapsed());
    let pd_ok = cert_pd.valid && cert_pd.max_gap() <= 1e-3 && dd >= 0.99 && t_pd < 30.0;

    verdict(
        "classical_equilibria",
        mp_ok && pd_ok,
        &format!(
            "pennies residual {:.2e} gap {:.2e} diagonal deviation {diag_dev:.2e} ({t_mp:.2}s); dilemma gap {:.2e} defect/defect weight {dd:.4} ({t_pd:.2}s)",
            run.state.residual,
            cert.max_gap(),
            cert_pd.max_gap()
        ),
    );
}

/// A random two-player state game with a known pure equilibrium: each
/// player's effective observable is `A_k`, whose top eigenvector is `ψ_k`,
/// plus interaction terms that vanish against the other player's `ψ`.
fn game_with_known_equilibrium(rng: &mut ChaCha8Rng, d1: usize, d2: usize) -> (QuantumGame, Vec<HermitianMatrix>) {
    let psi = [random_pure_state(rng, d1).into_hermitian(), random_pure_state(rng, d2).into_hermitian()];
    let favoured = |rng: &mut ChaCha8Rng, p: &HermitianMatrix| {
        let d = p.dim();
        let comp = &HermitianMatrix::identity(d) - p;
        let r = random_hermitian(rng, d);
        let rest = HermitianMatrix::new(comp.matrix() * r.matrix() * comp.matrix()).unwrap();
        let c = rest.spectral_norm().unwrap() + rng.random_range(0.5..2.0);
        &p.scale(c) + &rest
    };
    let vanishing = |rng: &mut ChaCha8Rng, p: &HermitianMatrix| {
        let c = random_hermitian(rng, p.dim());
        let t = hs_inner(&c, p).unwrap();
        c.shift(-t)
    };
    let a1 = favoured(rng, &psi[0]);
    let a2 = favoured(rng, &psi[1]);
    let c1 = vanishing(rng, &psi[1]);
    let c2 = vanishing(rng, &psi[0]);
    let b1 = random_hermitian(rng, d1);
    let b2 = random_hermitian(rng, d2);
    let i1 = HermitianMatrix::identity(d1);
    let i2 = HermitianMatrix::identity(d2);
    let h1 = &tensor_all([&a1, &i2]) + &tensor_all([&b1, &c1]);
    let h2 = &tensor_all([&i1, &a2]) + &tensor_all([&c2, &b2]);
    let sigs = vec![StrategySignature::state_preparation(d1), StrategySignature::state_preparation(d2)];
    (QuantumGame::new(sigs, vec![h1, h2]).unwrap(), psi.to_vec())
}

fn product_distance(a: &[HermitianMatrix], b: &[HermitianMatrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.distance(y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn gain_function_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = GainConfig::default();

    // near-equilibria have small gain residual
    let mut worst_residual: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    let mut profiles = 0;
    let mut equilibria: Vec<(QuantumGame, Vec<HermitianMatrix>)> = Vec::new();
    for i in 0..18 {
        let (d1, d2) = (2 + i % 2, 2 + (i / 2) % 2);
        equilibria.push(game_with_known_equilibrium(&mut rng, d1, d2));
    }
    for g in [matching_pennies(), prisoners_dilemma()] {
        let run = iterate_gain(&g, None, &cfg).unwrap();
        equilibria.push((g, run.state.matrices()));
    }
    for (game, rho) in &equilibria {
        let profile = profile_from_densities(rho, game.signatures(), 1e-11).unwrap();
        let cert = certify(game, &profile, 1e-3, 1e-9).unwrap();
        worst_gap = worst_gap.max(cert.max_gap());
        if cert.valid {
            profiles += 1;
            let g = gain_map(game, rho, &cfg).unwrap();
            worst_residual = worst_residual.max(product_distance(&g, rho));
        }
    }

    // the deviation bound certifies every iterate, and Tr P stays bounded
    let mut lemma_failures = 0;
    let mut trace_failures = 0;
    let mut iterates = 0;
    let mut games = vec![matching_pennies(), prisoners_dilemma()];
    games.push(random_state_game(&mut rng, &[2, 3]));
    {
        let sigs = vec![StrategySignature::channel(2, 2), StrategySignature::state_preparation(2)];
        let n = 8;
        let payoffs = (0..2).map(|_| random_hermitian(&mut rng, n)).collect();
        games.push(QuantumGame::new(sigs, payoffs).unwrap());
    }
    for game in &games {
        let scale = game.input_dim_product() as f64;
        let mut rho: Vec<HermitianMatrix> = game
            .signatures()
            .iter()
            .map(|s| random_density(&mut rng, s.total_dim()).into_hermitian())
            .collect();
        rho = qnash::gain::project_profile(game, &rho, &cfg).unwrap();
        for _ in 0..60 {
            let comps = gain_components(game, &rho, &cfg).unwrap();
            let mut epsilon = 0.0;
            for (c, sig) in comps.iter().zip(game.signatures()) {
                let n = sig.total_dim() as f64;
                let a = c.xi.spectral_norm().unwrap();
                epsilon += scale * (1.0 + 3.0 * n * a).powi(2) * c.eta.sqrt();
                if c.p.trace() > 4.0 * n * a + 1e-6 {
                    trace_failures += 1;
                }
            }
            let profile = profile_from_densities(&rho, game.signatures(), 1e-11).unwrap();
            if !certify(game, &profile, epsilon, 1e-9).unwrap().valid {
                lemma_failures += 1;
            }
            iterates += 1;
            let g: Vec<HermitianMatrix> = comps.iter().map(|c| c.g.clone()).collect();
            rho = rho.iter().zip(&g).map(|(r, gk)| &r.scale(0.5) + &gk.scale(0.5)).collect();
        }
    }

    let ok = profiles == 20 && worst_residual <= 1e-2 && lemma_failures == 0 && trace_failures == 0;
    verdict(
        "gain_function",
        ok,
        &format!(
            "{profiles}/20 certified profiles (worst gap {worst_gap:.2e}), worst gain residual {worst_residual:.2e}; {lemma_failures} bound failures and {trace_failures} trace failures over {iterates} iterates"
        ),
    );
}

#[test]
fn lipschitz_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = Vec::new();

    let mut v = 0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=5);
        let p = random_psd(&mut rng, n).scale(rng.random_range(0.05..3.0));
        let q = if rng.random_bool(0.5) {
            &p + &random_psd(&mut rng, n).scale(rng.random_range(0.0..0.2))
        } else {
            random_psd(&mut rng, n).scale(rng.random_range(0.05..3.0))
        };
        let lhs = normalize_psd(&p).unwrap().as_hermitian().distance(normalize_psd(&q).unwrap().as_hermitian());
        if lhs > 4.0 * n as f64 * p.distance(&q) + 1e-12 {
            v += 1;
        }
    }
    violations.push(("normalize", v));

    let mut v = 0;
    for _ in 0..1000 {
        let m = rng.random_range(1..=3);
        let dims: Vec<usize> = (0..m).map(|_| rng.random_range(2..=3)).collect();
        let a: Vec<HermitianMatrix> = dims.iter().map(|&d| random_density(&mut rng, d).into_hermitian()).collect();
        let b: Vec<HermitianMatrix> = dims.iter().map(|&d| random_density(&mut rng, d).into_hermitian()).collect();
        let lhs = tensor_all(&a).distance(&tensor_all(&b));
        if lhs > (m as f64).sqrt() * product_distance(&a, &b) + 1e-12 {
            v += 1;
        }
    }
    violations.push(("tensor", v));

    let mut v = 0;
    for _ in 0..1000 {
        let dims = [rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=3)];
        let game = random_state_game(&mut rng, &dims);
        let k = rng.random_range(0..3);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<HermitianMatrix> {
            dims.iter().map(|&d| random_density(rng, d).into_hermitian()).collect()
        };
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let xa = xi_operators(&game, &a.iter().collect::<Vec<_>>(), k);
        let xb = xi_operators(&game, &b.iter().collect::<Vec<_>>(), k);
        let others = |q: &[HermitianMatrix]| tensor_all(q.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, x)| x));
        let n = game.joint_dim() as f64;
        let bound = game.payoff(k).spectral_norm().unwrap() * n.sqrt() * others(&a).distance(&others(&b));
        if xa.distance(&xb) > bound + 1e-12 {
            v += 1;
        }
    }
    violations.push(("xi", v));

    let mut v = 0;
    let tol = 1e-9;
    let sigs = [StrategySignature::channel(2, 2), StrategySignature::state_preparation(3)];
    for i in 0..1000 {
        let sig = &sigs[i % 2];
        let cone = i % 4 >= 2;
        let h1 = random_hermitian(&mut rng, sig.total_dim());
        let h2 = if rng.random_bool(0.5) {
            &h1 + &random_hermitian(&mut rng, sig.total_dim()).scale(0.05)
        } else {
            random_hermitian(&mut rng, sig.total_dim())
        };
        let p1 = project_to_set(&h1, sig, cone, tol, 50_000).unwrap();
        let p2 = project_to_set(&h2, sig, cone, tol, 50_000).unwrap();
        if p1.distance(&p2) > h1.distance(&h2) + 4.0 * tol {
            v += 1;
        }
    }
    violations.push(("projection", v));

    let mut v = 0;
    for i in 0..1000 {
        let n = if i % 2 == 0 { 3 } else { 5 };
        let basis = WignerBasis::shared(n).unwrap();
        let k = (n as f64).sqrt() * (n + 1) as f64;
        let h = random_hermitian(&mut rng, n);
        let g = random_hermitian(&mut rng, n);
        let ratio = dist(&basis.psi(&h).unwrap(), &basis.psi(&g).unwrap()) * k / h.distance(&g);
        let u = random_simplex_point(&mut rng, n * n);
        let w = random_simplex_point(&mut rng, n * n);
        let inv_ratio = basis.psi_inv(&u).unwrap().distance(&basis.psi_inv(&w).unwrap()) / (k * dist(&u, &w));
        if (ratio - 1.0).abs() > 1e-9 || (inv_ratio - 1.0).abs() > 1e-9 {
            v += 1;
        }
    }
    violations.push(("wigner", v));

    let total: usize = violations.iter().map(|(_, v)| v).sum();
    let detail = violations.iter().map(|(name, v)| format!("{name} {v}")).collect::<Vec<_>>().join(", ");
    verdict("lipschitz_suite", total == 0, &format!("violations per claim out of 1000: {detail}"));
}

fn random_cell_pair(rng: &mut ChaCha8Rng, n: usize, r: usize) -> (Vec<f64>, Vec<f64>) {
    let cells = cell_count(n, r).unwrap();
    let address = SubsimplexAddress::from_index(n, r, rng.random_range(0..cells));
    let vertices: Vec<Vec<f64>> = address.vertices().iter().map(SimplexPoint::to_f64).collect();
    let mut sample = || {
        // bias towards the corners so long chords are exercised
        let w: Vec<f64> = random_simplex_point(rng, n).iter().map(|x| x.powi(3)).collect();
        let s: f64 = w.iter().sum();
        (0..n).map(|i| vertices.iter().zip(&w).map(|(v, wj)| v[i] * wj / s).sum()).collect::<Vec<f64>>()
    };
    (sample(), sample())
}

fn random_rational_point(rng: &mut ChaCha8Rng, n: usize) -> SimplexPoint {
    let den: i64 = rng.random_range(1..=50_000);
    let mut cuts: Vec<i64> = (0..n - 1).map(|_| rng.random_range(0..=den)).collect();
    cuts.sort_unstable();
    let mut nums = Vec::with_capacity(n);
    let mut prev = 0;
    for c in cuts {
        nums.push(c - prev);
        prev = c;
    }
    nums.push(den - prev);
    SimplexPoint::from_ratios(&nums, den).unwrap()
}

#[test]
fn subdivision_geometry() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut count_mismatch = Vec::new();
    let mut diameter_violations = Vec::new();
    let mut locate_failures = 0;
    for n in [2usize, 3, 4] {
        for r in [1usize, 2] {
            let fast: BTreeSet<SimplexPoint> = level_vertices(n, r, u128::MAX).unwrap().into_iter().collect();
            let mut direct = BTreeSet::new();
            for idx in 0..cell_count(n, r).unwrap() {
                direct.extend(SubsimplexAddress::from_index(n, r, idx).vertices());
            }
            if fast != direct {
                count_mismatch.push(format!("n={n} r={r}: {} vs {}", fast.len(), direct.len()));
            }

            let bound = diameter_bound(n, r);
            let mut worst: f64 = 0.0;
            let mut v = 0;
            for _ in 0..10_000 {
                let (a, b) = random_cell_pair(&mut rng, n, r);
                let d = dist(&a, &b);
                worst = worst.max(d);
                if d > bound {
                    v += 1;
                }
            }
            diameter_violations.push((n, r, v, worst, bound));

            for _ in 0..200 {
                let p = random_rational_point(&mut rng, n);
                let coords = locate(&p, r);
                if coords.reconstruct() != p {
                    locate_failures += 1;
                }
            }
        }
    }
    let total: usize = diameter_violations.iter().map(|x| x.2).sum();
    let detail = diameter_violations
        .iter()
        .map(|(n, r, v, w, b)| format!("n={n} r={r}: {v} over bound {b:.4} (longest {w:.4})"))
        .collect::<Vec<_>>()
        .join("; ");
    let ok = count_mismatch.is_empty() && total == 0 && locate_failures == 0;
    verdict(
        "subdivision_geometry",
        ok,
        &format!(
            "vertex-set mismatches {:?}; locate/reconstruct failures {locate_failures}; same-cell distances: {detail}",
            count_mismatch
        ),
    );
}

/// Coordinates rounded onto a fixed grid of denominator 10^15.
fn rationalize(x: &[f64]) -> SimplexPoint {
    let den: i64 = 1_000_000_000_000_000;
    let mut nums: Vec<i64> = x[..x.len() - 1].iter().map(|v| (v.max(0.0) * den as f64).round() as i64).collect();
    let rest = den - nums.iter().sum::<i64>();
    nums.push(rest.max(0));
    let total: i64 = nums.iter().sum();
    if total != den {
        let i = nums.iter().enumerate().max_by_key(|(_, v)| **v).unwrap().0;
        nums[i] += den - total;
    }
    SimplexPoint::from_ratios(&nums, den).unwrap()
}

#[test]
fn exact_barycentric_fixed_points() {
    let start = Instant::now();
    let opts = FixedPointOptions::default();
    let mut worst_residual: f64 = 0.0;
    let mut worst_recheck: f64 = 0.0;
    let mut worst_error: f64 = 0.0;
    let mut bound_failures = 0;
    for n in [3usize, 4] {
        let c = vec![1.0 / n as f64; n];
        let maps: Vec<(&str, Box<dyn Fn(&[f64]) -> Vec<f64> + Sync>)> = vec![
            ("identity", Box::new(|v: &[f64]| v.to_vec())),
            ("constant", Box::new({
                let c = c.clone();
                move |_: &[f64]| c.clone()
            })),
            ("contraction", Box::new({
                let c = c.clone();
                move |v: &[f64]| v.iter().zip(&c).map(|(x, y)| 0.5 * (x + y)).collect()
            })),
            ("rotation", Box::new(|v: &[f64]| (0..v.len()).map(|i| v[(i + v.len() - 1) % v.len()]).collect())),
        ];
        for (name, f) in &maps {
            for r in [1usize, 2] {
                let fp = find_fixed_point(|p: &SimplexPoint| f(&p.to_f64()), n, r, &opts).unwrap();
                worst_residual = worst_residual.max(fp.residual);
                let p = rationalize(&fp.point);
                let g = bary_approx(|q: &SimplexPoint| f(&q.to_f64()), r, &p).unwrap();
                worst_recheck = worst_recheck.max(dist(&g, &p.to_f64()));
                if *name == "constant" || *name == "contraction" {
                    let e = dist(&fp.point, &c);
                    worst_error = worst_error.max(e);
                    if e > diameter_bound(n, r) {
                        bound_failures += 1;
                    }
                }
            }
        }
    }
    let t = seconds(start.elapsed());
    let ok = worst_residual <= 1e-9 && worst_recheck <= 1e-9 && bound_failures == 0 && t < 60.0;
    verdict(
        "barycentric_fixed_points",
        ok,
        &format!(
            "reported residual {worst_residual:.2e}, recomputed residual {worst_recheck:.2e}, contraction error {worst_error:.2e}, {t:.2}s"
        ),
    );
}

#[test]
fn end_to_end_reduction() {
    let mixed = HermitianMatrix::identity(3).scale(1.0 / 3.0);
    let mut lines = Vec::new();
    let mut ok = true;
    for (threads, limit) in [(1usize, 600.0), (8, 120.0)] {
        let opts = FixedPointOptions { threads: Some(threads), ..FixedPointOptions::default() };
        let start = Instant::now();
        let mut worst_dist: f64 = 0.0;
        for name in ["const-mixed", "contract-mixed"] {
            let report = density_fixed_point(&builtin_problem(name, 3).unwrap(), Some(1), &opts).unwrap();
            ok &= report.cells == 362_880 && report.consistent;
            worst_dist = worst_dist.max(report.recovered.unwrap().as_hermitian().distance(&mixed));
        }
        let id = density_fixed_point(&builtin_problem("identity", 3).unwrap(), Some(1), &opts).unwrap();
        let rho = id.recovered.unwrap();
        let valid = DensityMatrix::new(rho.as_hermitian().clone()).is_ok();
        let t = seconds(start.elapsed());
        ok &= worst_dist <= 1e-6 && id.simplex_residual <= 1e-9 && valid && t < limit;
        lines.push(format!(
            "{threads} thread(s): distance to I/3 {worst_dist:.2e}, identity residual {:.2e}, {t:.2}s",
            id.simplex_residual
        ));
    }
    verdict("end_to_end_reduction", ok, &lines.join("; "));
}

#[test]
fn padding_recovery() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let tau = random_density(&mut rng, 2);
    let t2 = tau.clone();
    let maps: Vec<(&str, DensityMap)> = vec![
        ("identity", Arc::new(|x: &DensityMatrix| x.clone())),
        ("constant", Arc::new(move |_: &DensityMatrix| t2.clone())),
    ];
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, f) in maps {
        let h = pad_to_odd(f.clone(), 2).unwrap();
        let problem = DensityMapProblem::single(2, f.clone(), 1.0, 1e-6).unwrap();
        let sol = solve_density_problem(&problem, None, &FixedPointOptions::default()).unwrap();
        let x = sol.report.recovered.clone().unwrap();
        let res = padding_residual(&h, &x, 2);
        let rho = &sol.densities[0];
        let recovered = f(rho).as_hermitian().distance(rho.as_hermitian());
        let chain = res.chain_holds(1e-9);
        let recovery = recovered <= (1.0 + 2f64.sqrt()) * res.total + 1e-9;
        let target = name != "constant" || rho.as_hermitian().distance(tau.as_hermitian()) <= 1e-6;
        ok &= chain && recovery && target;
        lines.push(format!(
            "{name}: fixed-point residual {:.2e}, 2|u|^2+lambda^2 = {:.2e}, recovered residual {recovered:.2e}",
            res.total,
            2.0 * res.off_diagonal.powi(2) + res.corner.powi(2)
        ));
    }

    // random near-fixed points of a padded contraction
    let mut worst_slack = f64::NEG_INFINITY;
    for _ in 0..200 {
        let u = qnash::sampling::random_unitary(&mut rng, 2);
        let sigma = random_density(&mut rng, 2);
        let f: DensityMap = Arc::new(move |x: &DensityMatrix| {
            let m = &u * x.as_hermitian().matrix() * u.adjoint();
            let rotated = HermitianMatrix::new((&m + m.adjoint()) * Complex64::new(0.5, 0.0)).unwrap();
            DensityMatrix::new(&rotated.scale(0.5) + &sigma.as_hermitian().scale(0.5)).unwrap()
        });
        let h = pad_to_odd(f.clone(), 2).unwrap();
        let mut x = random_density(&mut rng, 3);
        for _ in 0..rng.random_range(2..40) {
            x = h(&x);
        }
        let v = DVector::from_fn(3, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let noise = HermitianMatrix::projector(&v.normalize());
        let x = DensityMatrix::new(&x.as_hermitian().scale(0.98) + &noise.scale(0.02)).unwrap();
        let res = padding_residual(&h, &x, 2);
        ok &= res.chain_holds(1e-9);
        let rho = qnash::reduction::unpad(x.as_hermitian(), 2);
        let recovered = f(&rho).as_hermitian().distance(rho.as_hermitian());
        worst_slack = worst_slack.max(recovered - (1.0 + 2f64.sqrt()) * res.total);
    }
    ok &= worst_slack <= 1e-9;
    lines.push(format!("200 perturbed points: worst recovery slack {worst_slack:.2e}"));
    verdict("padding", ok, &lines.join("; "));
}
