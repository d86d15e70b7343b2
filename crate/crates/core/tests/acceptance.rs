//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line with its runtime (`cargo test --test acceptance --
//! --nocapture` to see them).

use std::time::Instant;

use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dtdq::amc::{build_amc, validate_amc, BaseSystem, PriorityPolicy, SystemConfig};
use dtdq::dph::DphDistribution;
use dtdq::metrics;
use dtdq::optimizer::{self, DistFamily};
use dtdq::rmc::build_complete_amc;
use dtdq::sim;
use dtdq::state_space::{amc_state_count, enumerate_amc, AmcState};

fn pass(number: u32, label: &str, started: Instant) {
    println!(
        "criterion {number:02} {label}: PASS ({:.2}s)",
        started.elapsed().as_secs_f64()
    );
}

fn geometric_pair(p1: f64, p2: f64, k: usize, priority: PriorityPolicy) -> SystemConfig {
    SystemConfig {
        dph1: DphDistribution::geometric(p1).unwrap(),
        dph2: DphDistribution::geometric(p2).unwrap(),
        k,
        priority,
    }
}

/// Closed-form minimum-order transient matrix and absorption vectors under
/// S1 priority, as symbolic functions of (b1, B1, b2, B2) evaluated
/// numerically. Row and column order follow the canonical enumeration.
#[allow(clippy::type_complexity)]
fn golden_m14(b1: f64, bb1: f64, b2: f64, bb2: f64) -> (Vec<[f64; 14]>, [f64; 14], [f64; 14]) {
    let z = [0.0f64; 14];
    let mut a = vec![z; 14];
    a[0][0] = bb1 * bb2;
    a[0][1] = b2 * bb1;
    a[0][10] = b1 * bb2;
    a[0][12] = b1 * b2;
    a[1][1] = bb1 * bb2;
    a[1][7] = b1 * bb2;
    a[2][2] = bb1 * bb2;
    a[2][7] = b2 * bb1;
    a[3][2] = b1 * bb2;
    a[3][3] = bb1 * bb2;
    a[3][11] = b2 * bb1;
    a[3][12] = b1 * b2;
    a[4][1] = bb1;
    a[4][12] = b1;
    a[5][2] = bb2;
    a[5][12] = b2;
    a[6][12] = 1.0;
    a[7][7] = bb1 * bb2;
    a[8][11] = bb1;
    a[8][12] = b1;
    a[9][10] = bb2;
    a[9][12] = b2;
    a[10][7] = b2 * bb1;
    a[10][10] = bb1 * bb2;
    a[11][7] = b1 * bb2;
    a[11][11] = bb1 * bb2;
    a[12][7] = bb1;
    a[13][7] = bb2;
    let mut c_s = [0.0; 14];
    c_s[7] = b1 + b2 - b1 * b2;
    c_s[10] = b1;
    c_s[11] = b2;
    c_s[12] = b1;
    c_s[13] = b2;
    let mut c_u = [0.0; 14];
    c_u[1] = b2;
    c_u[2] = b1;
    (a, c_s, c_u)
}

#[test]
fn criterion_01_golden_minimum_order_matrices() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..5 {
        let p1: f64 = 0.05 + 0.9 * rng.random::<f64>();
        let p2: f64 = 0.05 + 0.9 * rng.random::<f64>();
        let model = build_amc(&geometric_pair(p1, p2, 1, PriorityPolicy::S1Priority)).unwrap();
        assert_eq!(model.size(), 14);
        let (a, c_s, c_u) = golden_m14(p1, 1.0 - p1, p2, 1.0 - p2);
        for r in 0..14 {
            for c in 0..14 {
                assert!(
                    (model.a.get(r, c) - a[r][c]).abs() < 1e-14,
                    "A[{r}][{c}] = {} expected {} at p1={p1} p2={p2}",
                    model.a.get(r, c),
                    a[r][c]
                );
            }
            assert!((model.c_s[r] - c_s[r]).abs() < 1e-14, "c_s[{r}]");
            assert!((model.c_u[r] - c_u[r]).abs() < 1e-14, "c_u[{r}]");
        }
    }
    pass(1, "golden minimum-order matrices", started);
}

/// Independent enumeration oracle: scan the bounding box and keep tuples
/// satisfying each class's occupancy rule.
fn brute_force_count(n1: usize, n2: usize, k: usize) -> usize {
    let mut count = 0;
    for class in 1u8..=14 {
        for l in 0..k {
            for i in 0..=n1 {
                for j in 0..=n2 {
                    let ok = match class {
                        1..=4 | 11 | 12 => i >= 1 && j >= 1,
                        5 | 9 | 13 => i >= 1 && j == 0,
                        6 | 10 | 14 => i == 0 && j >= 1,
                        7 => i == 0 && j == 0,
                        8 => i >= 1 && j >= 1 && l == 0,
                        _ => false,
                    };
                    if ok {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

#[test]
fn criterion_02_state_count_formula() {
    let started = Instant::now();
    for n1 in 1..=4 {
        for n2 in 1..=4 {
            for k in 1..=4 {
                let space = enumerate_amc(n1, n2, k).unwrap();
                let formula = amc_state_count(n1, n2, k);
                let brute = brute_force_count(n1, n2, k);
                assert_eq!(space.len(), formula, "formula mismatch at ({n1},{n2},{k})");
                assert_eq!(space.len(), brute, "oracle mismatch at ({n1},{n2},{k})");
            }
        }
    }
    pass(2, "state-count formula over the 64-case grid", started);
}

fn random_dph(rng: &mut ChaCha8Rng, max_order: usize) -> DphDistribution {
    let order = rng.random_range(1..=max_order);
    let mut alpha: Vec<f64> = (0..order).map(|_| 0.05 + rng.random::<f64>()).collect();
    let total: f64 = alpha.iter().sum();
    for a in alpha.iter_mut() {
        *a /= total;
    }
    let mut trans = vec![0.0; order * order];
    for r in 0..order {
        let row: Vec<f64> = (0..order).map(|_| rng.random::<f64>()).collect();
        let row_total: f64 = row.iter().sum();
        // strict substochasticity keeps absorption certain from every phase
        let target = 0.2 + 0.75 * rng.random::<f64>();
        for (c, v) in row.iter().enumerate() {
            trans[r * order + c] = v * target / row_total;
        }
    }
    DphDistribution::new(alpha, trans).unwrap()
}

#[test]
fn criterion_03_stochasticity_property_suite() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for trial in 0..200 {
        let priority = if trial % 2 == 0 {
            PriorityPolicy::S1Priority
        } else {
            PriorityPolicy::S2Priority
        };
        let config = SystemConfig {
            dph1: random_dph(&mut rng, 6),
            dph2: random_dph(&mut rng, 6),
            k: rng.random_range(1..=6),
            priority,
        };
        let model = build_complete_amc(&config).unwrap();
        // Row closure to 1e-12 and sigma support/normalization.
        let violations = validate_amc(&model);
        assert!(violations.is_empty(), "trial {trial}: {violations:?}");
        // Both PMFs accumulate all but at most 1e-9 of their mass.
        for pmf in [
            metrics::aoi_pmf(&model, 1e-9).unwrap(),
            metrics::paoi_pmf(&model, 1e-9).unwrap(),
        ] {
            assert!(
                (pmf.total_mass() - 1.0).abs() < 1e-9,
                "trial {trial}: PMF mass {}",
                pmf.total_mass()
            );
        }
    }
    pass(3, "stochasticity suite over 200 random configs", started);
}

#[test]
fn criterion_04_theory_matches_simulation() {
    let started = Instant::now();
    // Mean service times 2, 6, 10 with freezing parameters drawn from the
    // validation studies.
    let grid: [(f64, usize); 4] = [(2.0, 3), (6.0, 4), (6.0, 7), (10.0, 8)];
    let mut seed = 404;
    for family in [DistFamily::Geometric, DistFamily::Uniform] {
        for &(mean, k) in &grid {
            let dph = family.build(mean).unwrap();
            let config = SystemConfig {
                dph1: dph.clone(),
                dph2: dph,
                k,
                priority: PriorityPolicy::S1Priority,
            };
            let model = build_complete_amc(&config).unwrap();
            let run = sim::simulate(&config, 400_000, seed).unwrap();
            seed += 1;
            let checks = [
                ("E[AoI]", metrics::aoi_mean(&model).unwrap(), run.aoi_mean),
                (
                    "E[AoI^2]",
                    metrics::aoi_second_moment(&model).unwrap(),
                    run.aoi_second_moment,
                ),
                ("E[peak]", metrics::paoi_mean(&model).unwrap(), run.paoi_mean),
            ];
            for (label, analytic, estimate) in checks {
                assert!(
                    (analytic - estimate.value).abs() < 3.0 * estimate.std_err,
                    "{} mean={mean} k={k} {label}: analytic {analytic} vs {}±{}",
                    family.name(),
                    estimate.value,
                    estimate.std_err
                );
            }
        }
    }
    pass(4, "theory vs simulation on the validation grid", started);
}

#[test]
fn criterion_05_degenerate_coincidence() {
    let started = Instant::now();
    for k in 1..=8 {
        let build = |dph: DphDistribution| {
            let config = SystemConfig {
                dph1: dph.clone(),
                dph2: dph,
                k,
                priority: PriorityPolicy::S1Priority,
            };
            metrics::aoi_report(&build_complete_amc(&config).unwrap(), 1e-10).unwrap()
        };
        let g = build(DphDistribution::geometric(1.0).unwrap());
        let u = build(DphDistribution::uniform(1, 1).unwrap());
        assert!((g.aoi_mean - u.aoi_mean).abs() < 1e-12);
        assert!((g.aoi_second_moment - u.aoi_second_moment).abs() < 1e-12);
        assert!((g.paoi_mean - u.paoi_mean).abs() < 1e-12);
        assert_eq!(g.aoi_pmf.truncation_h, u.aoi_pmf.truncation_h);
        assert_eq!(g.paoi_pmf.truncation_h, u.paoi_pmf.truncation_h);
        for (a, b) in g.aoi_pmf.values.iter().zip(&u.aoi_pmf.values) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).abs() < 1e-12);
        }
        for (a, b) in g.paoi_pmf.values.iter().zip(&u.paoi_pmf.values) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).abs() < 1e-12);
        }
    }
    pass(5, "geometric(1) and uniform(1,1) coincide for k in 1..8", started);
}

#[test]
fn criterion_06_mean_aoi_bound_at_mean_ten() {
    let started = Instant::now();
    let config = geometric_pair(0.1, 0.1, 8, PriorityPolicy::S1Priority);
    let model = build_complete_amc(&config).unwrap();
    let mean = metrics::aoi_mean(&model).unwrap();
    assert!(mean < 13.0, "mean AoI {mean} >= 13");
    pass(6, "geometric mean-10 k=8 mean AoI below 13", started);
}

#[test]
fn criterion_07_deterministic_optimum_freezing() {
    let started = Instant::now();
    let det12 = DphDistribution::triangular(12.0, 0.0).unwrap();
    let base = BaseSystem {
        dph1: det12.clone(),
        dph2: det12,
        priority: PriorityPolicy::S1Priority,
    };
    let result = optimizer::find_optimal_k(&base, 24).unwrap();
    assert_eq!(result.k_star, 6, "curve: {:?}", result.curve);
    pass(7, "deterministic mean-12 optimum k* = 6 by full scan", started);
}

#[test]
fn criterion_08_geometric_k_star_staircase() {
    let started = Instant::now();
    let means: Vec<f64> = (10..=120).map(|x| x as f64 / 10.0).collect();
    let mut k_stars = Vec::with_capacity(means.len());
    for (idx, &mean) in means.iter().enumerate() {
        let base = BaseSystem {
            dph1: DphDistribution::geometric(1.0 / mean).unwrap(),
            dph2: DphDistribution::geometric(1.0 / mean).unwrap(),
            priority: PriorityPolicy::S1Priority,
        };
        let k_max = optimizer::default_k_max(&base);
        let record =
            optimizer::freezing_gain(&base, k_max, 2_000_000, 808 + idx as u64).unwrap();
        k_stars.push(record.k_star);
    }
    for (mean, &k_star) in means.iter().zip(&k_stars) {
        if *mean < 2.0 {
            assert_eq!(k_star, 0, "freezing flagged beneficial at mean {mean}");
        }
    }
    for w in k_stars.windows(2) {
        assert!(w[1] >= w[0], "k* not monotone: {k_stars:?}");
    }
    let jumps: Vec<f64> = means
        .iter()
        .zip(k_stars.windows(2))
        .filter(|(_, w)| w[1] > w[0])
        .map(|(m, _)| m + 0.1)
        .collect();
    assert!(jumps.len() >= 4, "too few staircase steps: {jumps:?}");
    let intervals: Vec<f64> = jumps.windows(2).map(|w| w[1] - w[0]).collect();
    let mean_interval = intervals.iter().sum::<f64>() / intervals.len() as f64;
    assert!(
        (1.8..=2.4).contains(&mean_interval),
        "staircase interval {mean_interval} outside 2.1 +/- 0.3 ({intervals:?})"
    );
    pass(8, "geometric k* staircase with ~2.1 mean spacing", started);
}

#[test]
fn criterion_09_triangular_zero_variance_gain() {
    let started = Instant::now();
    let det13 = DphDistribution::triangular(13.0, 0.0).unwrap();
    let base = BaseSystem {
        dph1: det13.clone(),
        dph2: det13,
        priority: PriorityPolicy::S1Priority,
    };
    let k_max = optimizer::default_k_max(&base);
    let record = optimizer::freezing_gain(&base, k_max, 2_000_000, 909).unwrap();
    assert!(
        record.gain_percent > 17.0,
        "gain {}% <= 17%",
        record.gain_percent
    );
    assert!(
        record.gain_ci.0 > 15.0,
        "gain CI lower bound {}% <= 15%",
        record.gain_ci.0
    );
    pass(9, "triangular mean-13 zero-variance gain above 17%", started);
}

#[test]
fn criterion_10_nonidentical_geometric_surface() {
    let started = Instant::now();
    let means: Vec<f64> = (1..=6).map(|m| (2 * m) as f64).collect();
    let run = |priority| {
        optimizer::sweep_nonidentical(
            DistFamily::Geometric,
            priority,
            &means,
            &means,
            None,
            1_000_000,
            1010,
        )
        .unwrap()
    };
    let s1 = run(PriorityPolicy::S1Priority);
    let s2 = run(PriorityPolicy::S2Priority);

    let max_point = s1
        .points
        .iter()
        .max_by(|a, b| a.gain.gain_percent.partial_cmp(&b.gain.gain_percent).unwrap())
        .unwrap();
    assert!(
        (3.7..=5.7).contains(&max_point.gain.gain_percent),
        "max gain {}% outside 4.7 +/- 1.0",
        max_point.gain.gain_percent
    );
    assert!(
        max_point.mean1 != max_point.mean2,
        "maximum gain unexpectedly on the diagonal"
    );

    let find = |sweep: &optimizer::SweepResult, m1: f64, m2: f64| {
        sweep
            .points
            .iter()
            .find(|p| p.mean1 == m1 && p.mean2 == m2)
            .unwrap()
            .clone()
    };
    let mut any_asymmetry = false;
    for &m1 in &means {
        for &m2 in &means {
            let a = find(&s1, m1, m2);
            let b = find(&s2, m2, m1);
            // Swapping means and priority is an exact relabeling of the
            // analytic model.
            assert!(
                (a.gain.optimum_aoi - b.gain.optimum_aoi).abs() < 1e-9,
                "optimum differs under swap at ({m1},{m2})"
            );
            assert_eq!(a.gain.analytic_k_star, b.gain.analytic_k_star);
            // Baselines are independent runs of the same law.
            let se_a = (a.gain.gain_ci.1 - a.gain.gain_ci.0) / (2.0 * 1.96);
            let se_b = (b.gain.gain_ci.1 - b.gain.gain_ci.0) / (2.0 * 1.96);
            let se = (se_a * se_a + se_b * se_b).sqrt();
            assert!(
                (a.gain.gain_percent - b.gain.gain_percent).abs() <= 3.0 * se + 1e-9,
                "gain not swap-invariant at ({m1},{m2}): {} vs {}",
                a.gain.gain_percent,
                b.gain.gain_percent
            );
            if m1 != m2 {
                let c = find(&s1, m2, m1);
                if (a.gain.optimum_aoi - c.gain.optimum_aoi).abs() > 1e-3 {
                    any_asymmetry = true;
                }
            }
        }
    }
    assert!(any_asymmetry, "surface is symmetric; priority should break symmetry");
    pass(10, "non-identical geometric gain surface", started);
}

#[test]
fn criterion_11_initial_vector_census() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    for trial in 0..10 {
        let priority = if trial % 2 == 0 {
            PriorityPolicy::S1Priority
        } else {
            PriorityPolicy::S2Priority
        };
        let config = SystemConfig {
            dph1: random_dph(&mut rng, 4),
            dph2: random_dph(&mut rng, 4),
            k: rng.random_range(1..=5),
            priority,
        };
        let model = build_complete_amc(&config).unwrap();
        let sigma = model.sigma().unwrap();
        let census =
            sim::simulate_amc_initial_census(&config, 1_000_000, 2222 + trial as u64).unwrap();
        for (idx, &state) in model.space.states().iter().enumerate() {
            if state.l != 0 {
                continue;
            }
            let key = (state.class, state.i, state.j);
            let analytic = sigma[idx];
            let freq = census.frequency(key);
            if analytic == 0.0 {
                assert_eq!(freq, 0.0, "trial {trial}: census mass outside sigma support");
                continue;
            }
            let se = census.frequency_std_err(key);
            assert!(
                (freq - analytic).abs() <= 3.0 * se + 1e-9,
                "trial {trial} state {state:?}: census {freq} vs sigma {analytic} (se {se})"
            );
        }
    }
    pass(11, "initial-vector census over 10 random configs", started);
}

#[test]
fn criterion_12_byte_deterministic_outputs() {
    let started = Instant::now();
    let config_text = r#"
[system]
k = 2
priority = "s1"
[system.server1]
kind = "geometric"
p = 0.4
[system.server2]
kind = "uniform"
a = 1
b = 3
[simulation]
slots = 50000
seed = 9
[optimize]
k_max = 4
baseline_slots = 20000
seed = 9
[sweep]
kind = "mean"
family = "geometric"
means = [2.0, 3.0]
k_max = 3
slots = 20000
seed = 9
"#;
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.toml");
    std::fs::write(&config_path, config_text).unwrap();

    // (name, extra args, whether the command reads the config file)
    let commands: [(&str, &[&str], bool); 7] = [
        ("analyze", &[], true),
        ("simulate", &[], true),
        ("optimize", &[], true),
        ("sweep", &[], true),
        ("dump-states", &[], true),
        ("dump-matrix", &[], true),
        ("reproduce", &["fig5", "--slots", "20000", "--seed", "9"], false),
    ];
    for pass_dir in ["run1", "run2"] {
        for (name, extra, takes_config) in &commands {
            let out = dir.path().join(pass_dir).join(name);
            let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_dtdq"));
            cmd.arg(name).args(extra.iter());
            if *takes_config {
                cmd.arg("--config").arg(&config_path);
            }
            let status = cmd.arg("--out").arg(&out).output().unwrap();
            assert!(
                status.status.success(),
                "{name} failed: {}",
                String::from_utf8_lossy(&status.stderr)
            );
        }
    }
    // Every file produced by the first pass must be byte-identical in the
    // second.
    fn compare_dirs(d1: &std::path::Path, d2: &std::path::Path) -> usize {
        let mut compared = 0;
        for entry in std::fs::read_dir(d1).unwrap() {
            let entry = entry.unwrap();
            let name = entry.file_name();
            if entry.file_type().unwrap().is_dir() {
                compared += compare_dirs(&d1.join(&name), &d2.join(&name));
            } else {
                let b1 = std::fs::read(d1.join(&name)).unwrap();
                let b2 = std::fs::read(d2.join(&name)).unwrap();
                assert_eq!(b1, b2, "{name:?} differs between runs");
                compared += 1;
            }
        }
        compared
    }
    let mut compared = 0;
    for (name, _, _) in &commands {
        compared += compare_dirs(
            &dir.path().join("run1").join(name),
            &dir.path().join("run2").join(name),
        );
    }
    assert!(compared >= 15, "only {compared} files compared");
    pass(12, "byte-deterministic command outputs", started);
}

#[test]
fn criterion_03b_sigma_support_matches_priority() {
    // Companion check to the stochasticity suite: sigma's support moves
    // from class 5 to class 6 when the priority flips.
    let started = Instant::now();
    for (priority, solo_class) in [
        (PriorityPolicy::S1Priority, 5u8),
        (PriorityPolicy::S2Priority, 6u8),
    ] {
        let config = geometric_pair(0.3, 0.6, 2, priority);
        let model = build_complete_amc(&config).unwrap();
        let sigma = model.sigma().unwrap();
        for (idx, &AmcState { class, l, .. }) in model.space.states().iter().enumerate() {
            if sigma[idx] > 0.0 {
                assert_eq!(l, 0);
                assert!(matches!(class, 1 | 4) || class == solo_class);
            }
        }
    }
    pass(3, "sigma support follows the priority policy", started);
}
