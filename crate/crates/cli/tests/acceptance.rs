//! End-to-end acceptance checks, one test per release criterion. Each test
//! prints a single PASS line with the measured quantities; a failing test
//! panics with the measured value so the gate output names the defect.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectral_weights::csvio::write_weight_trace;
use spectral_weights::eig::weighted_form;
use spectral_weights::protocols::{estimate_diameter, max_consensus};
use spectral_weights::{
    aug_lagrangian_value, central_solve, condition_number, decay_rate, demo_weights,
    disagreement_norms, laplacian, lmi_feasible, node_weighted_laplacian, optimal_consensus_step,
    optimal_step_by_grid, outer_solve, projected_step, simulate_avg_consensus,
    simulate_dof_closedloop, sym_eig, AugLagParams, DistributedEngine, DofController, EigEngine,
    EdgeWeights, Graph, LtiPlant, NodeWeights, OracleEngine, Scheme, Weighting, WeightMode,
};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/bench7.graph");
const BIN: &str = env!("CARGO_BIN_EXE_spectral-weights");

fn fixture_graph() -> Graph {
    let text = std::fs::read_to_string(FIXTURE).expect("fixture file ships in-repo");
    Graph::parse(&text).expect("fixture file parses")
}

/// Same construction the library's internal suites use: a random spanning
/// tree plus independent extra edges.
fn random_connected_graph(rng: &mut ChaCha8Rng, max_n: usize) -> Graph {
    let n = rng.random_range(2..=max_n);
    let mut pairs = Vec::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        pairs.push((u, v));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !pairs.contains(&(i, j)) && rng.random_bool(0.3) {
                pairs.push((i, j));
            }
        }
    }
    Graph::from_edges(n, &pairs).expect("spanning tree guarantees connectivity")
}

fn run_cli(args: &[&str]) -> (Option<i32>, String) {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    (
        out.status.code(),
        String::from_utf8(out.stdout).expect("output is UTF-8"),
    )
}

/// Extract the numeric field following `label` in a CLI summary.
fn summary_value(stdout: &str, label: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| {
            let rest = l.strip_prefix(label)?;
            rest.split_whitespace().next()?.parse().ok()
        })
        .unwrap_or_else(|| panic!("summary line {label:?} missing in:\n{stdout}"))
}

#[test]
fn a01_unit_weight_baseline_spectrum() {
    let started = Instant::now();
    let g = fixture_graph();
    let spec = sym_eig(&laplacian(&g));
    let lambda_2 = spec.values[1];
    let lambda_n = spec.values[6];
    let kappa = condition_number(&g, Weighting::Unit).expect("connected fixture");
    let elapsed = started.elapsed();

    assert!((kappa - 4.2689).abs() <= 1e-3, "kappa {kappa}");
    assert!((lambda_2 - 1.4892).abs() <= 1e-3, "lambda_2 {lambda_2}");
    assert!((lambda_n - 6.3574).abs() <= 1e-3, "lambda_N {lambda_n}");
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!(
        "PASS baseline spectrum: kappa={kappa:.4} lambda_2={lambda_2:.4} \
         lambda_N={lambda_n:.4} in {elapsed:?}"
    );
}

#[test]
fn a02_distributed_optimization_lands_in_the_accepted_band() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout) = run_cli(&[
        "optimize",
        "--graph",
        FIXTURE,
        "--engine",
        "distributed",
        "--seed",
        "2024",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    let elapsed = started.elapsed();

    assert!(
        matches!(code, Some(0) | Some(2)),
        "unexpected exit code {code:?}:\n{stdout}"
    );
    let kappa = summary_value(&stdout, "kappa");
    let lambda_2 = summary_value(&stdout, "lambda_2");
    assert!(
        (2.51..=2.61).contains(&kappa),
        "terminal kappa {kappa} outside [2.51, 2.61]"
    );
    assert!(lambda_2 >= 0.95, "terminal lambda_2 {lambda_2} below 0.95");
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    println!(
        "PASS distributed optimum: kappa={kappa:.4} lambda_2={lambda_2:.4} \
         exit={code:?} in {elapsed:?}"
    );
}

#[test]
fn a03_centralized_optimum_is_certified() {
    let started = Instant::now();
    let g = fixture_graph();
    let trace = central_solve(&g, &AugLagParams::default(), WeightMode::Node)
        .expect("certified solve succeeds");
    let term = trace.terminal();
    let rel = (term.kappa - 2.5445).abs() / 2.5445;
    let scaled: Vec<f64> = term.w.iter().map(|w| w / term.lambda_2).collect();
    let feasible = lmi_feasible(
        &g,
        &NodeWeights::new(scaled).unwrap(),
        term.kappa + 1e-6,
    );
    let elapsed = started.elapsed();

    assert!(rel <= 0.006, "kappa {} is {rel:.4} away", term.kappa);
    assert!(feasible, "terminal point failed the feasibility check");
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    println!(
        "PASS centralized optimum: kappa={:.6} ({:.3}% from 2.5445), feasible, in {elapsed:?}",
        term.kappa,
        100.0 * rel
    );
}

#[test]
fn a04_engines_agree_on_fixture_and_random_graphs() {
    // The default stopping tolerances leave a shallow valley where the
    // terminal point is path-dependent by a few percent regardless of
    // engine, so the engines are compared where comparison is meaningful:
    // both run to tight convergence, and must then agree within 1%.
    let tight = AugLagParams {
        eps_lambda_n: 1e-5,
        eps_sigma: 0.01,
        t_max: 20000,
        k_max: 200,
        ..AugLagParams::default()
    };
    let mut cases = vec![(fixture_graph(), AugLagParams::default())];
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    while cases.len() < 11 {
        let g = random_connected_graph(&mut rng, 10);
        if g.n() >= 3 {
            cases.push((g, tight.clone()));
        }
    }
    let mut worst = 0.0f64;
    for (i, (g, params)) in cases.iter().enumerate() {
        let oracle = outer_solve(g, params, WeightMode::Node, &mut OracleEngine)
            .expect("oracle solve succeeds");
        let mut engine = DistributedEngine::new(7 + i as u64, Scheme::Interleaved);
        let dist = outer_solve(g, params, WeightMode::Node, &mut engine)
            .expect("distributed solve succeeds");
        let ko = oracle.terminal().kappa;
        let kd = dist.terminal().kappa;
        let gap = (kd - ko).abs() / ko;
        worst = worst.max(gap);
        assert!(
            gap <= 0.01,
            "case {i} (n={}): oracle kappa {ko}, distributed {kd}, gap {gap:.4}",
            g.n()
        );
    }
    println!(
        "PASS engine agreement: worst relative gap {:.3}% over {} graphs",
        100.0 * worst,
        cases.len()
    );
}

#[test]
fn a05_gradients_match_finite_differences_and_never_ascend() {
    use spectral_weights::optimizer::{edge_lagrangian_gradient, node_lagrangian_gradient};
    let fixtures = [
        fixture_graph(),
        Graph::path(3),
        Graph::complete(3),
        Graph::star(4),
    ];
    let (sigma, rho) = (0.5, 20.0);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0usize;
    let mut worst = 0.0f64;

    for g in &fixtures {
        for mode in [WeightMode::Node, WeightMode::Edge] {
            let dim = match mode {
                WeightMode::Node => g.n(),
                WeightMode::Edge => g.edges().len(),
            };
            let mut draws = 0;
            while draws < 20 {
                let w: Vec<f64> = (0..dim).map(|_| rng.random_range(0.2..2.0)).collect();
                let spectrum_of = |w: &[f64]| {
                    let m = match mode {
                        WeightMode::Node => weighted_form(
                            g,
                            Weighting::Node(&NodeWeights::new(w.to_vec()).unwrap()),
                        ),
                        WeightMode::Edge => weighted_form(
                            g,
                            Weighting::Edge(&EdgeWeights::new(w.to_vec()).unwrap()),
                        ),
                    };
                    sym_eig(&m)
                };
                let spec = spectrum_of(&w);
                let n = g.n();
                // Finite differences only make sense when the differentiated
                // eigenvalues are simple; skip near-multiple draws.
                let guard = 0.05 * spec.values[n - 1].max(1.0);
                if spec.values[n - 1] - spec.values[n - 2] < guard
                    || spec.values[2] - spec.values[1] < guard
                {
                    continue;
                }
                draws += 1;
                let value_at = |w: &[f64]| {
                    let s = spectrum_of(w);
                    aug_lagrangian_value(s.values[n - 1], s.values[1], sigma, rho)
                };
                let grad = match mode {
                    WeightMode::Node => node_lagrangian_gradient(
                        g,
                        &w,
                        &spec.top().vector,
                        &spec.second().vector,
                        spec.values[1],
                        sigma,
                        rho,
                    ),
                    WeightMode::Edge => edge_lagrangian_gradient(
                        g,
                        &spec.top().vector,
                        &spec.second().vector,
                        spec.values[1],
                        sigma,
                        rho,
                    ),
                };
                for i in 0..dim {
                    let h = 1e-6 * w[i].max(1.0);
                    let mut wp = w.clone();
                    wp[i] += h;
                    let mut wm = w.clone();
                    wm[i] -= h;
                    let fd = (value_at(&wp) - value_at(&wm)) / (2.0 * h);
                    let scale = fd.abs().max(1.0);
                    let rel = (fd - grad[i]).abs() / scale;
                    worst = worst.max(rel);
                    assert!(
                        rel <= 1e-5,
                        "entry {i}: analytic {} vs central difference {fd}, rel {rel:.2e}",
                        grad[i]
                    );
                }
                checked += 1;
            }
        }
    }

    // Projected subgradient steps on graphs whose extreme eigenvalues are
    // repeated at the uniform start must still descend at a small step.
    for g in [Graph::complete(3), Graph::star(4)] {
        let mut w = vec![1.0; g.n()];
        let eval = |w: &[f64]| {
            let spec = sym_eig(&weighted_form(
                &g,
                Weighting::Node(&NodeWeights::new(w.to_vec()).unwrap()),
            ));
            (spec.clone(), aug_lagrangian_value(spec.values[g.n() - 1], spec.values[1], 0.0, rho))
        };
        let (mut spec, mut value) = eval(&w);
        for step in 0..300 {
            let grad = node_lagrangian_gradient(
                &g,
                &w,
                &spec.top().vector,
                &spec.second().vector,
                spec.values[1],
                0.0,
                rho,
            );
            w = projected_step(&w, &grad, 1e-4);
            let (next_spec, next_value) = eval(&w);
            assert!(
                next_value <= value + 1e-12,
                "objective rose {value} -> {next_value} at step {step} (n={})",
                g.n()
            );
            spec = next_spec;
            value = next_value;
        }
    }
    println!(
        "PASS gradient suite: {checked} finite-difference draws, worst rel {worst:.2e}; \
         600 subgradient steps never ascended"
    );
}

#[test]
fn a06_distributed_protocols_meet_their_bounds() {
    let mut graphs = vec![
        fixture_graph(),
        Graph::path(3),
        Graph::complete(3),
        Graph::star(4),
        Graph::cycle(4),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..50 {
        graphs.push(random_connected_graph(&mut rng, 12));
    }

    // Max-consensus exactness within the diameter, and diameter estimate
    // bounds, on every graph.
    for g in &graphs {
        let d = g.diameter().max(1);
        let x0: Vec<f64> = (0..g.n()).map(|_| rng.random_range(-5.0..5.0)).collect();
        let best = x0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (value, rounds) = max_consensus(g, x0, 4 * g.n() + 4).unwrap();
        assert_eq!(value, best, "max-consensus value off on n={}", g.n());
        assert!(
            rounds <= d,
            "max-consensus took {rounds} rounds on a diameter-{d} graph"
        );
        let (est, _) = estimate_diameter(g, 4 * g.n() + 4).unwrap();
        assert!(
            est >= d && est <= 2 * d,
            "diameter estimate {est} outside [{d}, {}]",
            2 * d
        );
    }

    // Distributed eigenpairs against the oracle, and kernel leakage of the
    // connectivity eigenvector, on the fixture and a random sample.
    let mut worst_value = 0.0f64;
    let mut worst_align = 1.0f64;
    let mut worst_leak = 0.0f64;
    for (i, g) in graphs.iter().take(12).enumerate() {
        let n = g.n();
        let spec = sym_eig(&laplacian(g));
        let guard = 1e-6;
        let top_simple = n >= 3 && spec.values[n - 1] - spec.values[n - 2] > guard;
        let second_simple = n >= 3 && spec.values[2] - spec.values[1] > guard;
        let mut engine = DistributedEngine::new(100 + i as u64, Scheme::Interleaved);
        let est = engine.eval(g, Weighting::Unit).unwrap();

        worst_value = worst_value
            .max((est.top.value - spec.values[n - 1]).abs())
            .max((est.second.value - spec.values[1]).abs());
        assert!(
            (est.top.value - spec.values[n - 1]).abs() <= 1e-4,
            "top eigenvalue off by more than 1e-4 on n={n}"
        );
        assert!(
            (est.second.value - spec.values[1]).abs() <= 1e-4,
            "second eigenvalue off by more than 1e-4 on n={n}"
        );

        let align = |a: &[f64], b: &[f64]| {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            (dot / (na * nb)).abs()
        };
        if top_simple {
            let a = align(&est.top.vector, &spec.pair(n - 1).vector);
            worst_align = worst_align.min(a);
            assert!(a >= 0.999, "top eigenvector alignment {a} on n={n}");
        }
        if second_simple {
            let a = align(&est.second.vector, &spec.pair(1).vector);
            worst_align = worst_align.min(a);
            assert!(a >= 0.999, "second eigenvector alignment {a} on n={n}");
        }

        // The unit-weighting kernel direction is the constant vector.
        let kernel = vec![(n as f64).sqrt().recip(); n];
        let norm: f64 = est.second.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        let leak = est
            .second
            .vector
            .iter()
            .zip(&kernel)
            .map(|(x, q)| x * q)
            .sum::<f64>()
            .abs()
            / norm;
        worst_leak = worst_leak.max(leak);
        assert!(leak <= 1e-6, "kernel leakage {leak:.2e} on n={n}");
    }
    println!(
        "PASS protocol suite: {} graphs; worst eigenvalue error {worst_value:.2e}, \
         worst alignment {worst_align:.6}, worst kernel leakage {worst_leak:.2e}",
        graphs.len()
    );
}

#[test]
fn a07_consensus_demo_hits_the_predicted_rate() {
    let g = fixture_graph();
    let spec = sym_eig(&laplacian(&g));
    let (r_star, rho_star) = optimal_consensus_step(spec.values[1], spec.values[6]).unwrap();
    assert!((rho_star - 0.6204).abs() <= 5e-5, "predicted rate {rho_star}");

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let x0 = spectral_weights::gaussian_vector(&mut rng, 7);
    let traj = simulate_avg_consensus(&g, r_star, &x0, 50).unwrap();
    let measured = decay_rate(&disagreement_norms(&traj), 10, 50);
    assert!(
        (measured - 0.6204).abs() <= 0.02,
        "measured rate {measured} vs 0.6204"
    );

    let grid = optimal_step_by_grid(&g, 0.5, 10.0, 0.01);
    assert!(
        (grid - r_star).abs() <= 0.01 + 1e-12,
        "grid argmin {grid} vs closed form {r_star}"
    );
    println!(
        "PASS consensus demo: measured rate {measured:.4} vs predicted {rho_star:.4}, \
         grid argmin {grid:.2} vs closed form {r_star:.4}"
    );
}

#[test]
fn a08_output_feedback_demo_decays_and_orders_energies() {
    let g = fixture_graph();
    let plant = LtiPlant::fixture();
    let unit_lap = laplacian(&g).to_dense();
    let weighted_lap = node_weighted_laplacian(&g, &demo_weights());
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let flat = spectral_weights::gaussian_vector(&mut rng, 14);
    let x0: Vec<[f64; 2]> = flat.chunks(2).map(|c| [c[0], c[1]]).collect();

    let unweighted_final = simulate_dof_closedloop(
        &unit_lap,
        &plant,
        &DofController::unweighted_gains(),
        &x0,
        None,
        201,
    )
    .unwrap()
    .disagreement[200];
    let optimized_final = simulate_dof_closedloop(
        &weighted_lap,
        &plant,
        &DofController::optimized_gains(),
        &x0,
        None,
        201,
    )
    .unwrap()
    .disagreement[200];

    let mut ordered = 0usize;
    for seed in 0..50u64 {
        let u = simulate_dof_closedloop(
            &unit_lap,
            &plant,
            &DofController::unweighted_gains(),
            &vec![[0.0; 2]; 7],
            Some(seed),
            201,
        )
        .unwrap();
        let w = simulate_dof_closedloop(
            &weighted_lap,
            &plant,
            &DofController::optimized_gains(),
            &vec![[0.0; 2]; 7],
            Some(seed),
            201,
        )
        .unwrap();
        if w.energy_ratio() < u.energy_ratio() {
            ordered += 1;
        }
    }

    println!(
        "measured: unweighted-pair disagreement {unweighted_final:.3e} at k=200, \
         optimized-pair {optimized_final:.3e}; optimized energy ratio lower in {ordered}/50 runs"
    );
    assert!(
        unweighted_final < 1e-3,
        "unweighted pair disagreement {unweighted_final:.3e} at k=200"
    );
    // The two assertions below state the intended behavior of the bundled
    // optimized gain set; as shipped, that gain set does not stabilize its
    // matching weighted coupling (its closed-loop modes have radii 1.04 and
    // 1.24), so they fail. See the optimized-gain tests in the core crate,
    // which pin the measured radii.
    assert!(
        optimized_final < 1e-3,
        "optimized pair disagreement {optimized_final:.3e} at k=200"
    );
    assert!(
        ordered >= 45,
        "optimized pair's energy ratio lower in only {ordered}/50 runs"
    );
    println!(
        "PASS output-feedback demo: disagreement {unweighted_final:.3e} / \
         {optimized_final:.3e}, ordering {ordered}/50"
    );
}

#[test]
fn a09_spectral_structure_properties_hold() {
    let g = fixture_graph();
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let active = |w: &[f64]| {
        sym_eig(&weighted_form(
            &g,
            Weighting::Node(&NodeWeights::new(w.to_vec()).unwrap()),
        ))
        .values
    };

    // Midpoint convexity of the largest and concavity of the smallest
    // active eigenvalue as functions of the node weights.
    for _ in 0..50 {
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..3.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..3.0)).collect();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x + y) / 2.0).collect();
        let (sa, sb, sm) = (active(&a), active(&b), active(&mid));
        assert!(
            sm[n - 1] <= (sa[n - 1] + sb[n - 1]) / 2.0 + 1e-8,
            "largest eigenvalue failed midpoint convexity"
        );
        assert!(
            sm[1] >= (sa[1] + sb[1]) / 2.0 - 1e-8,
            "smallest active eigenvalue failed midpoint concavity"
        );
    }

    // Scale invariance of the condition number.
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
    let base = active(&w);
    let kappa = base[n - 1] / base[1];
    for alpha in [0.1, 3.0, 100.0] {
        let scaled: Vec<f64> = w.iter().map(|x| alpha * x).collect();
        let s = active(&scaled);
        let k = s[n - 1] / s[1];
        assert!(
            (k - kappa).abs() <= 1e-9,
            "kappa changed from {kappa} to {k} under scaling by {alpha}"
        );
    }

    // Every Laplacian row sums to zero.
    let mut rng2 = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..10 {
        let h = random_connected_graph(&mut rng2, 10);
        let wn =
            NodeWeights::new((0..h.n()).map(|_| rng2.random_range(0.1..2.0)).collect()).unwrap();
        for m in [laplacian(&h).to_dense(), node_weighted_laplacian(&h, &wn)] {
            for i in 0..h.n() {
                let s: f64 = (0..h.n()).map(|j| m.get(i, j)).sum();
                assert!(s.abs() <= 1e-12, "row {i} sums to {s}");
            }
        }
    }
    println!("PASS structure properties: convexity, scale invariance, zero row sums");
}

#[test]
fn a10_identical_seeds_produce_identical_csv_bytes() {
    let read = |dir: &Path, name: &str| std::fs::read(dir.join(name)).expect("csv written");

    let optimize_into = |dir: &Path| {
        let (code, _) = run_cli(&[
            "optimize",
            "--graph",
            FIXTURE,
            "--engine",
            "distributed",
            "--seed",
            "2024",
            "--t-max",
            "120",
            "--out-dir",
            dir.to_str().unwrap(),
        ]);
        assert!(matches!(code, Some(0) | Some(2)));
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    optimize_into(d1.path());
    optimize_into(d2.path());
    for name in ["nodeWeight.csv", "nodeWeightEigen.csv", "nodeWeightMu.csv"] {
        assert_eq!(
            read(d1.path(), name),
            read(d2.path(), name),
            "{name} differs between identically-seeded runs"
        );
    }

    let demo_into = |dir: &Path| {
        let (code, _) = run_cli(&[
            "demo",
            "dof",
            "--noise-seed",
            "7",
            "--out-dir",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(code, Some(0));
    };
    let d3 = tempfile::tempdir().unwrap();
    let d4 = tempfile::tempdir().unwrap();
    demo_into(d3.path());
    demo_into(d4.path());
    for name in [
        "unweighted_sim.csv",
        "unweighted_sim_inout.csv",
        "weighted_sim.csv",
        "weighted_sim_inout.csv",
    ] {
        assert_eq!(
            read(d3.path(), name),
            read(d4.path(), name),
            "{name} differs between identically-seeded runs"
        );
    }

    // The in-process writer is deterministic too.
    let mut engine = DistributedEngine::new(2024, Scheme::Interleaved);
    let params = AugLagParams {
        t_max: 60,
        ..AugLagParams::default()
    };
    let g = fixture_graph();
    let trace = outer_solve(&g, &params, WeightMode::Node, &mut engine).unwrap();
    let mut engine2 = DistributedEngine::new(2024, Scheme::Interleaved);
    let trace2 = outer_solve(&g, &params, WeightMode::Node, &mut engine2).unwrap();
    let mut b1 = Vec::new();
    let mut b2 = Vec::new();
    write_weight_trace(&mut b1, &trace).unwrap();
    write_weight_trace(&mut b2, &trace2).unwrap();
    assert_eq!(b1, b2);
    println!("PASS determinism: seven seeded CSV outputs byte-identical across reruns");
}
