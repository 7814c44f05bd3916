//! End-to-end acceptance checks, one numbered criterion per test. Each test
//! prints a single `criterion N: PASS` line on success; a failing assertion
//! reports the criterion as failed with the measured values.

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cf_audit::classifiers::{logreg_gradient, logreg_loss, train_knn, BlackBox, Label};
use cf_audit::cli::{prepare_dataset, train_model, RunConfig, ENV_DATA_DIR};
use cf_audit::connect::{cluster, Epsilon};
use cf_audit::data::make_half_moons;
use cf_audit::generators::generator_by_name;
use cf_audit::geometry::{sample_ball, sample_layer, Ball, Point, SphericalLayer};
use cf_audit::lra::{aggregate, anchors, lra, scores, LraParams};
use cf_audit::oracles::{
    dbscan_partition, dbscan_reference, exact_risk, pocket_classifier, SyntheticGeometry,
};
use cf_audit::ve::{justification_check, ve_benchmark, VeParams};

fn dist(a: &Point, b: &Point) -> f64 {
    a.0.iter()
        .zip(b.0.iter())
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt()
}

fn repo_data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn pocket_world() -> (SyntheticGeometry, Vec<Point>, Vec<Label>) {
    let geometry = SyntheticGeometry::PocketInBall {
        pocket_center: Point(vec![-0.4, 0.0]),
        pocket_half_side: 0.1,
        halfplane_x: 0.8,
        counterfactual: 1,
        factual: 0,
    };
    let train_points = vec![
        Point(vec![0.0, 0.3]),
        Point(vec![0.2, -0.2]),
        Point(vec![-0.1, 0.5]),
        Point(vec![1.0, 0.0]),
        Point(vec![1.3, 0.2]),
        Point(vec![1.6, -0.4]),
    ];
    let train_labels = vec![0, 0, 0, 1, 1, 1];
    (geometry, train_points, train_labels)
}

#[test]
fn criterion_1_clustering_matches_dbscan_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..200 {
        let n = rng.gen_range(50..=500);
        let d = [2usize, 5, 10][case % 3];
        let points: Vec<Point> = (0..n)
            .map(|_| Point((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let eps = rng.gen_range(0.05..0.8) * (d as f64).sqrt();
        let mut state = cluster(&points, Epsilon::new(eps).unwrap()).unwrap();
        let reference = dbscan_partition(&dbscan_reference(&points, eps, 2));
        assert_eq!(
            state.partition(),
            reference,
            "criterion 1: FAIL — partition mismatch on case {case} (n={n}, d={d}, eps={eps})"
        );
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 30,
        "criterion 1: FAIL — took {elapsed:?}, budget 30 s"
    );
    println!("criterion 1: PASS — 200 random clusterings equal the DBSCAN(minPts=2) oracle ({elapsed:.0?})");
}

#[test]
fn criterion_2_sampler_radial_cdf_and_bounds() {
    let n = 100_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(202);

    // ball in 3-D
    let center = Point(vec![0.3, -0.2, 0.7]);
    let radius = 1.5;
    let ball = Ball::new(center.clone(), radius).unwrap();
    let mut radii: Vec<f64> = sample_ball(&ball, n, &mut rng)
        .iter()
        .map(|p| dist(p, &center))
        .collect();
    for &r in &radii {
        assert!(r <= radius, "criterion 2: FAIL — ball sample outside radius: {r}");
    }
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut dev: f64 = 0.0;
    for (i, &r) in radii.iter().enumerate() {
        let f = (r / radius).powi(3);
        dev = dev.max((f - i as f64 / n as f64).abs());
        dev = dev.max((f - (i + 1) as f64 / n as f64).abs());
    }
    assert!(dev < 0.01, "criterion 2: FAIL — ball CDF deviation {dev}");
    let ball_dev = dev;

    // layer in 4-D
    let center = Point(vec![0.0, 1.0, -1.0, 0.5]);
    let (r_in, r_out) = (0.6, 1.4);
    let layer = SphericalLayer::new(center.clone(), r_in, r_out).unwrap();
    let mut radii: Vec<f64> = sample_layer(&layer, n, &mut rng)
        .iter()
        .map(|p| dist(p, &center))
        .collect();
    for &r in &radii {
        assert!(
            (r_in..=r_out).contains(&r),
            "criterion 2: FAIL — layer sample outside bounds: {r}"
        );
    }
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let norm = r_out.powi(4) - r_in.powi(4);
    let mut dev: f64 = 0.0;
    for (i, &r) in radii.iter().enumerate() {
        let f = (r.powi(4) - r_in.powi(4)) / norm;
        dev = dev.max((f - i as f64 / n as f64).abs());
        dev = dev.max((f - (i + 1) as f64 / n as f64).abs());
    }
    assert!(dev < 0.01, "criterion 2: FAIL — layer CDF deviation {dev}");
    println!(
        "criterion 2: PASS — radial CDFs within 0.01 (ball {ball_dev:.4}, layer {dev:.4}), bounds exact"
    );
}

#[test]
fn criterion_3_pocket_risk_matches_analytic_value() {
    let started = Instant::now();
    let (geometry, train_points, train_labels) = pocket_world();
    let f = pocket_classifier(geometry.clone());
    let x = Point(vec![0.0, 0.0]);
    let exact = exact_risk(&geometry, &x, 1.0).unwrap();
    let params = LraParams {
        n: 20_000,
        ..LraParams::default()
    };
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let report = lra(&x, &f, &train_points, &train_labels, &params, &mut rng).unwrap();
        let r = scores(&report).r_x;
        worst = worst.max((r - exact).abs());
        assert!(
            (r - exact).abs() <= 0.05,
            "criterion 3: FAIL — seed {seed}: estimated {r} vs exact {exact}"
        );
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "criterion 3: FAIL — took {elapsed:?}, budget 60 s"
    );
    println!(
        "criterion 3: PASS — pocket risk within 0.05 of the analytic value over 10 seeds (worst {worst:.4}, {elapsed:.0?})"
    );
}

#[test]
fn criterion_4_connected_region_models_have_zero_risk() {
    let started = Instant::now();
    std::env::set_var(ENV_DATA_DIR, repo_data_dir());
    let params = LraParams {
        n: 4000,
        ..LraParams::default()
    };
    for dataset in ["halfmoons", "iris2d"] {
        for family in ["knn", "logreg"] {
            let mut config = RunConfig::default();
            config.dataset.name = dataset.into();
            config.model.family = family.into();
            config.seed = 0;
            let prep = prepare_dataset(&config).unwrap();
            let model = train_model(&config, &prep.train).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(3));
            let agg = aggregate(
                &prep.test.points,
                &model,
                &prep.train.points,
                &prep.train.labels,
                &params,
                1,
                &mut rng,
            )
            .unwrap();
            assert_eq!(
                agg.s_bar, 0.0,
                "criterion 4: FAIL — {family} on {dataset}: S_bar = {} over {} instances",
                agg.s_bar,
                agg.rows.len()
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 300,
        "criterion 4: FAIL — took {elapsed:?}, budget 5 min"
    );
    println!(
        "criterion 4: PASS — S_bar = 0.0 exactly for 1-NN and logreg on half-moons and 2-D iris ({elapsed:.0?})"
    );
}

#[test]
fn criterion_5_forest_risk_in_reference_band() {
    let started = Instant::now();
    let mut any_s_small_forest = false;
    let mut s_bar_200 = f64::NAN;
    for n_trees in [3usize, 200] {
        let mut config = RunConfig::default();
        config.model.family = "forest".into();
        config.model.n_trees = n_trees;
        config.seed = 42;
        let prep = prepare_dataset(&config).unwrap();
        let model = train_model(&config, &prep.train).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(3));
        let agg = aggregate(
            &prep.test.points,
            &model,
            &prep.train.points,
            &prep.train.labels,
            &LraParams::default(),
            10,
            &mut rng,
        )
        .unwrap();
        if n_trees == 3 {
            any_s_small_forest = agg.rows.iter().any(|r| r.mean_s > 0.0);
        } else {
            s_bar_200 = agg.s_bar;
        }
    }
    assert!(
        any_s_small_forest,
        "criterion 5: FAIL — no instance with S_x = 1 under the 3-tree forest"
    );
    assert!(
        (0.15..=0.60).contains(&s_bar_200),
        "criterion 5: FAIL — 200-tree forest S_bar = {s_bar_200}, outside [0.15, 0.60]"
    );
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 900,
        "criterion 5: FAIL — took {elapsed:?}, budget 15 min"
    );
    println!(
        "criterion 5: PASS — risk exists under small forests and S_bar = {s_bar_200:.3} in [0.15, 0.60] under 200 trees ({elapsed:.0?})"
    );
}

#[test]
fn criterion_6_risk_ordering_across_datasets() {
    let started = Instant::now();
    std::env::set_var(ENV_DATA_DIR, repo_data_dir());

    // R_bar per dataset, forest with 200 trees, n = 2000, >= 100 instances
    let mut r_bars: Vec<(&str, f64)> = Vec::new();
    for dataset in ["recidivism", "boston", "halfmoons"] {
        let mut config = RunConfig::default();
        config.dataset.name = dataset.into();
        config.seed = 7;
        config.audit.max_instances = Some(150);
        let prep = match prepare_dataset(&config) {
            Ok(p) => p,
            Err(e) => panic!(
                "criterion 6: FAIL — dataset '{dataset}' unavailable ({e}). The recidivism and \
                 boston CSVs are not distributed with this repository and could not be fetched \
                 in this environment; supply them through a datasets.toml manifest in the \
                 directory named by {ENV_DATA_DIR} to run this criterion."
            ),
        };
        assert!(
            prep.test.len() >= 100,
            "criterion 6: FAIL — test split of '{dataset}' holds {} < 100 instances",
            prep.test.len()
        );
        let model = train_model(&config, &prep.train).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(3));
        let instances: Vec<Point> = prep.test.points.iter().take(150).cloned().collect();
        let agg = aggregate(
            &instances,
            &model,
            &prep.train.points,
            &prep.train.labels,
            &LraParams::default(),
            1,
            &mut rng,
        )
        .unwrap();
        r_bars.push((dataset, agg.r_bar));
    }
    assert!(
        r_bars[0].1 > r_bars[1].1 && r_bars[1].1 > r_bars[2].1,
        "criterion 6: FAIL — expected R_bar(recidivism) > R_bar(boston) > R_bar(halfmoons), got {r_bars:?}"
    );
    println!(
        "criterion 6: PASS — R_bar ordering {:?} ({:.0?})",
        r_bars,
        started.elapsed()
    );
}

#[test]
fn criterion_7_justification_sanity_extremes() {
    // counterfactuals that are correctly predicted enemy training instances
    // are always justified
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ds = make_half_moons(200, 0.15, &mut rng);
    let knn = train_knn(&ds.points, &ds.labels, 1).unwrap();
    let ve_params = VeParams::default();
    let mut checked = 0usize;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in ds.points.iter().take(5) {
            let e = anchors(x, &knn, &ds.points, &ds.labels).unwrap().0[0]
                .point
                .clone();
            let res =
                justification_check(&e, &knn, &ds.points, &ds.labels, &ve_params, &mut rng)
                    .unwrap();
            assert!(
                res.justified,
                "criterion 7: FAIL — enemy training instance judged unjustified (seed {seed})"
            );
            checked += 1;
        }
    }

    // counterfactuals placed in an isolated pocket are never justified
    let (geometry, train_points, train_labels) = pocket_world();
    let f = pocket_classifier(geometry);
    let pocket_center = Point(vec![-0.4, 0.0]);
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let res = justification_check(
            &pocket_center,
            &f,
            &train_points,
            &train_labels,
            &ve_params,
            &mut rng,
        )
        .unwrap();
        assert!(
            !res.justified,
            "criterion 7: FAIL — pocket counterfactual judged justified (seed {seed})"
        );
    }
    println!(
        "criterion 7: PASS — J_bar = 1.0 on {checked} training-instance counterfactuals, J_bar = 0.0 on pocket centers, 10 seeds each"
    );
}

#[test]
fn criterion_8_generator_benchmark_trend() {
    let started = Instant::now();
    let mut lore_wins = 0usize;
    let mut comparable = 0usize;
    let mut gs_justified = 0usize;
    let mut gs_generated = 0usize;
    for seed in 0..10u64 {
        let mut config = RunConfig::default();
        config.model.family = "forest".into();
        config.model.n_trees = 200;
        config.seed = seed;
        let prep = prepare_dataset(&config).unwrap();
        let model = train_model(&config, &prep.train).unwrap();
        let generators = vec![
            generator_by_name("gs").unwrap(),
            generator_by_name("lore").unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(4));
        let bench = ve_benchmark(
            &prep.test.points,
            &model,
            &prep.train.points,
            &prep.train.labels,
            &generators,
            &LraParams::default(),
            &VeParams::default(),
            0.25,
            1,
            &mut rng,
        )
        .unwrap();
        let gs = &bench.summaries[0];
        let lore = &bench.summaries[1];
        gs_justified += gs.n_justified;
        gs_generated += gs.n_generated;
        if let (Some(g), Some(l)) = (gs.j_bar, lore.j_bar) {
            comparable += 1;
            if l >= g {
                lore_wins += 1;
            }
        }
    }
    assert!(
        gs_generated > 0 && gs_justified < gs_generated,
        "criterion 8: FAIL — growing spheres produced no unjustified counterfactual \
         ({gs_justified}/{gs_generated} justified)"
    );
    assert!(
        lore_wins >= 7,
        "criterion 8: FAIL — lore J_bar >= gs J_bar in only {lore_wins}/{comparable} seeded repetitions"
    );
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 1800,
        "criterion 8: FAIL — took {elapsed:?}, budget 30 min"
    );
    println!(
        "criterion 8: PASS — gs J_bar {:.3} < 1.0 pooled, lore >= gs in {lore_wins}/{comparable} repetitions ({elapsed:.0?})",
        gs_justified as f64 / gs_generated as f64
    );
}

#[test]
fn criterion_9_cli_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config_path = tmp.path().join("run.toml");
    let config = format!(
        r#"
seed = 11
out = "{}"

[dataset]
name = "halfmoons"
size = 160

[model]
family = "knn"

[audit]
n = 400
runs = 1
threshold = 0.1
max_instances = 20

[grid]
resolution = 30
"#,
        out.display()
    );
    std::fs::write(&config_path, config).unwrap();

    let run = |command: &str| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_cf-audit"))
            .args([command, "--config"])
            .arg(&config_path)
            .stderr(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(
            status.success(),
            "criterion 9: FAIL — `{command}` exited with {status}"
        );
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        files
    };

    // train first so lra/ve/grid can reuse the persisted model
    for command in ["train", "grid", "lra", "ve", "audit"] {
        let first = run(command);
        let second = run(command);
        assert_eq!(
            first.len(),
            second.len(),
            "criterion 9: FAIL — `{command}` changed the output file set between runs"
        );
        for ((name_a, bytes_a), (name_b, bytes_b)) in first.iter().zip(second.iter()) {
            assert!(
                name_a == name_b && bytes_a == bytes_b,
                "criterion 9: FAIL — `{command}` output {name_a} differs between identical runs"
            );
        }
    }
    println!("criterion 9: PASS — train/grid/lra/ve/audit reruns are byte-identical");
}

#[test]
fn criterion_10_logreg_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let points: Vec<Point> = (0..30)
        .map(|_| Point(vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]))
        .collect();
    let labels: Vec<Label> = (0..30).map(|_| rng.gen_range(0..2) as Label).collect();
    let h = 1e-5;
    let mut max_err: f64 = 0.0;
    for _ in 0..20 {
        let w = vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let b = rng.gen_range(-3.0..3.0);
        let (gw, gb) = logreg_gradient(&points, &labels, &w, b);
        for j in 0..2 {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += h;
            wm[j] -= h;
            let num = (logreg_loss(&points, &labels, &wp, b)
                - logreg_loss(&points, &labels, &wm, b))
                / (2.0 * h);
            max_err = max_err.max((gw[j] - num).abs());
        }
        let num = (logreg_loss(&points, &labels, &w, b + h)
            - logreg_loss(&points, &labels, &w, b - h))
            / (2.0 * h);
        max_err = max_err.max((gb - num).abs());
    }
    assert!(
        max_err < 1e-5,
        "criterion 10: FAIL — max gradient error {max_err}"
    );
    println!("criterion 10: PASS — gradient vs central differences, max error {max_err:.2e}");
}
