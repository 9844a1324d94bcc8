//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p toponet-cli --test acceptance`; pass criterion
//! numbers as arguments (after `--`) to run a subset.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use toponet_cli::{pipeline, ExperimentConfig, RunReport};
use toponet_core::data::AnnulusLabeling;
use toponet_core::embedding::{classical_mds, isomap};
use toponet_core::linalg::{symmetric_eigen, Matrix};
use toponet_core::moves::{classify_relu_action, relu_clamp, ReluAction};
use toponet_core::nn::{loss_and_gradients, Gradients};
use toponet_core::simplex::{argmax, cell_with_tolerance, Cell, TIE_TOLERANCE};
use toponet_core::{
    cloud, forward, generate, kernel_collision_witness, urysohn_multiclass, Network, NetworkSpec,
    PointCloud, Shape, ShapeSpec,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load_config(file: &str) -> ExperimentConfig {
    ExperimentConfig::load(&configs_dir().join(file)).expect("shipped config is valid")
}

fn run_seed(file: &str, seed: u64) -> (RunReport, tempfile::TempDir) {
    let mut cfg = load_config(file);
    cfg.override_seed(seed);
    let dir = tempfile::tempdir().expect("temp dir");
    let out = dir.path().join("run");
    let report = pipeline::run(&cfg, &out).unwrap_or_else(|e| panic!("{file} seed {seed}: {e}"));
    (report, dir)
}

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn random_shape(rng: &mut ChaCha8Rng) -> Shape {
    match rng.random_range(0..5) {
        0 => {
            let classes = rng.random_range(2..=5);
            Shape::Annulus2D {
                inner_radius: 1.0,
                outer_radius: 2.0,
                labeling: AnnulusLabeling::Radial {
                    classes,
                    gap: rng.random_range(0.02..0.2),
                },
            }
        }
        1 => {
            let classes = rng.random_range(2..=5);
            Shape::Annulus2D {
                inner_radius: 0.5,
                outer_radius: 2.0,
                labeling: AnnulusLabeling::Sectors {
                    classes,
                    gap: rng.random_range(0.05..0.5),
                },
            }
        }
        2 => {
            let classes = rng.random_range(2..=5);
            let extra = rng.random_range(0..=3);
            let mut bands: Vec<usize> = (0..classes).collect();
            bands.extend((0..extra).map(|_| rng.random_range(0..classes)));
            for i in (1..bands.len()).rev() {
                let j = rng.random_range(0..=i);
                bands.swap(i, j);
            }
            Shape::Torus3D {
                major_radius: 2.0,
                minor_radius: 0.7,
                bands,
                gap: 0.05,
            }
        }
        3 => Shape::BallShell {
            dim: rng.random_range(2..=4),
            inner_radius: 0.9,
            shell_inner: 1.0,
            shell_outer: 2.0,
        },
        _ => Shape::LinkedTori {
            major_radius: 1.0,
            minor_radius: 0.25,
        },
    }
}

/// Every sample point of class `c` evaluates to `c + 1` within 1e-12.
fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut points = 0usize;
    let mut class_counts = [0usize; 6];
    for d in 0..50u64 {
        let shape = random_shape(&mut rng);
        class_counts[shape.num_classes()] += 1;
        let data = generate(&ShapeSpec::new(shape, 60, 100 + d)).expect("valid shape");
        let f = urysohn_multiclass(&data.classes()).expect("disjoint classes");
        for (x, &label) in data.points.iter().zip(&data.labels) {
            let v = f.evaluate(x).expect("finite");
            worst = worst.max((v - (label + 1) as f64).abs());
            points += 1;
        }
    }
    outcome(
        worst <= 1e-12,
        format!(
            "50 datasets (class counts 2..5: {:?}), {points} points, max |f - label| = {worst:e}",
            &class_counts[2..]
        ),
    )
}

/// Kernel witness pairs share every downstream output bitwise; norm bounds hold;
/// the E3 verdict is false on every seed.
fn criterion_2() -> Outcome {
    let mut identical = 0;
    let mut norms_ok = 0;
    let mut worst_diff = 0.0f64;
    for t in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(t);
        let (n, k) = if t % 2 == 0 { (3, 2) } else { (5, 3) };
        let w_data = (0..n * k).map(|_| StandardNormal.sample(&mut rng)).collect();
        let w = Matrix::from_row_major(k, n, w_data).expect("sized");
        let spec = NetworkSpec::relu_softmax(&[n, k, 6, 4, 2]).expect("valid spec");
        let mut net = Network::init(&spec, 1000 + t).expect("init");
        net.layers[0].weights = w.clone();
        let witness = kernel_collision_witness(&w, 0.9, (1.0, 2.0)).expect("bottleneck");
        let (a, b) = (
            forward(&net, &witness.p1).expect("forward"),
            forward(&net, &witness.p2).expect("forward"),
        );
        if a == b {
            identical += 1;
        }
        worst_diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(worst_diff, f64::max);
        let (n1, n2) = (cloud::norm(&witness.p1), cloud::norm(&witness.p2));
        if n1 <= 0.9 && (1.0..=2.0).contains(&n2) {
            norms_ok += 1;
        }
    }
    let mut e3_false = 0;
    for seed in SEEDS {
        let (report, _dir) = run_seed("e3_ball_shell.toml", seed);
        let sep = report.separation.expect("separation enabled");
        if !sep.verdict.separated && sep.witness.is_some() {
            e3_false += 1;
        }
    }
    outcome(
        identical == 100 && norms_ok == 100 && e3_false == SEEDS.len(),
        format!(
            "bitwise-identical outputs {identical}/100 (max |difference| {worst_diff:e}), \
             norm bounds {norms_ok}/100, E3 separated=false {e3_false}/{}",
            SEEDS.len()
        ),
    )
}

/// Argmax equals the brute-force nearest vertex on 10^6 uniform simplex points.
fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut agree, mut checked, mut ties) = (0u64, 0u64, 0u64);
    let mut p: Vec<f64> = Vec::with_capacity(8);
    for i in 0..1_000_000u64 {
        let n = 2 + (i % 7) as usize;
        p.clear();
        p.extend((0..n).map(|_| -> f64 { Exp1.sample(&mut rng) }));
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v: &mut f64| *v /= s);
        if cell_with_tolerance(&p, TIE_TOLERANCE) == Cell::Tie {
            ties += 1;
            continue;
        }
        let nearest = (0..n)
            .map(|v| {
                p.iter()
                    .enumerate()
                    .map(|(j, &x)| {
                        let d = x - if j == v { 1.0 } else { 0.0 };
                        d * d
                    })
                    .sum::<f64>()
            })
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(v, _)| v)
            .expect("n >= 2");
        checked += 1;
        if nearest == argmax(&p) {
            agree += 1;
        }
    }
    outcome(
        agree == checked,
        format!("{agree}/{checked} agree, {ties} ties skipped, dims 2..8"),
    )
}

/// Canonical clouds and the dense grid.
fn criterion_4() -> Outcome {
    let cloud_of = |rows: &[[f64; 2]]| PointCloud::from_rows(rows).expect("rows");
    let id = classify_relu_action(&cloud_of(&[[1.0, 1.0], [2.0, 3.0]])).expect("nonempty");
    let quo = classify_relu_action(&cloud_of(&[[1.0, 1.0], [1.0, -1.0], [1.0, -2.0]])).expect("nonempty");
    let bend = classify_relu_action(&cloud_of(&[[1.0, 1.0], [-1.0, 1.0]])).expect("nonempty");

    let steps = 41;
    let mut grid = PointCloud::new(2);
    for i in 0..steps {
        for j in 0..steps {
            let x = -1.0 + 2.0 * i as f64 / (steps - 1) as f64;
            let y = -1.0 + 2.0 * j as f64 / (steps - 1) as f64;
            grid.push(&[x, y]).expect("2-d");
        }
    }
    let g = classify_relu_action(&grid).expect("nonempty");
    let clamped = relu_clamp(&grid);
    let third: Vec<usize> = (0..grid.len())
        .filter(|&i| grid.point(i)[0] <= 0.0 && grid.point(i)[1] <= 0.0)
        .collect();
    let collapse = third.iter().all(|&i| clamped.point(i) == [0.0, 0.0]);
    let witnesses_valid = g.witnesses.iter().all(|&(a, b)| {
        cloud::distance(clamped.point(a), clamped.point(b)) <= 1e-9
            && cloud::distance(grid.point(a), grid.point(b)) > 1e-9
    });
    let pass = id.action == ReluAction::IdentityAction
        && quo.action == ReluAction::Quotienting
        && quo.witnesses == vec![(1, 2)]
        && bend.action == ReluAction::Bending
        && g.action == ReluAction::Quotienting
        && collapse
        && witnesses_valid;
    outcome(
        pass,
        format!(
            "canonical: {:?}/{:?}/{:?}; grid {steps}x{steps}: {:?}, {} collision pairs, \
             {} third-quadrant points all at origin = {collapse}",
            id.action,
            quo.action,
            bend.action,
            g.action,
            g.collision_pair_count,
            third.len()
        ),
    )
}

/// E1: >= 95% accuracy for at least 3 of 5 seeds, each with quotienting evidence.
fn criterion_5() -> Outcome {
    let mut good = 0;
    let mut lines = Vec::new();
    for seed in SEEDS {
        let (r, _dir) = run_seed("e1_annulus.toml", seed);
        let acc = r.training.final_accuracy;
        let quotient_layers: Vec<usize> = r
            .moves
            .as_ref()
            .expect("moves enabled")
            .iter()
            .filter(|m| m.has_quotienting())
            .map(|m| m.layer)
            .collect();
        let ok = r.training.epochs <= 2000 && acc >= 0.95 && !quotient_layers.is_empty();
        if ok {
            good += 1;
        }
        lines.push(format!("seed {seed}: acc {acc:.4} quotienting layers {quotient_layers:?}"));
    }
    outcome(good >= 3, format!("{good}/5 seeds pass [{}]", lines.join("; ")))
}

/// E2: class-0 components drop from 2 at the input to 1 at the output.
fn criterion_6() -> Outcome {
    let mut good = 0;
    let mut lines = Vec::new();
    for seed in SEEDS {
        let (r, _dir) = run_seed("e2_torus.toml", seed);
        let acc = r.training.final_accuracy;
        let comps = r.components.as_ref().expect("components enabled");
        let counts: Vec<usize> = comps.layers.iter().map(|l| l.count).collect();
        let first = counts[0];
        let last = *counts.last().expect("layers");
        if acc >= 0.90 && first == 2 && last == 1 {
            good += 1;
        }
        lines.push(format!("seed {seed}: acc {acc:.4} counts {counts:?}"));
    }
    outcome(good >= 3, format!("{good}/5 seeds pass [{}]", lines.join("; ")))
}

/// E4: >= 95% accuracy and separated verdict for at least 3 of 5 seeds.
fn criterion_7() -> Outcome {
    let mut good = 0;
    let mut lines = Vec::new();
    for seed in SEEDS {
        let (r, _dir) = run_seed("e4_linked_tori.toml", seed);
        let acc = r.training.final_accuracy;
        let sep = r.separation.as_ref().expect("separation enabled").verdict.separated;
        if acc >= 0.95 && sep {
            good += 1;
        }
        lines.push(format!("seed {seed}: acc {acc:.4} separated {sep}"));
    }
    outcome(good >= 3, format!("{good}/5 seeds pass [{}]", lines.join("; ")))
}

fn flatten(g: &Gradients) -> Vec<f64> {
    let mut v = Vec::new();
    for (w, b) in g.weights.iter().zip(&g.biases) {
        v.extend_from_slice(w.as_slice());
        v.extend_from_slice(b);
    }
    v
}

fn parameter(net: &mut Network, mut idx: usize) -> &mut f64 {
    for layer in &mut net.layers {
        let nw = layer.weights.as_slice().len();
        if idx < nw {
            return &mut layer.weights.as_mut_slice()[idx];
        }
        idx -= nw;
        if idx < layer.bias.len() {
            return &mut layer.bias[idx];
        }
        idx -= layer.bias.len();
    }
    panic!("parameter index out of range")
}

/// Analytic gradients against central differences (step 1e-5).
fn criterion_8() -> Outcome {
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut params = 0;
    for t in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(800 + t);
        let depth = rng.random_range(1..=3);
        let mut dims: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..=5)).collect();
        let classes = rng.random_range(2..=5);
        *dims.last_mut().expect("nonempty") = classes;
        let spec = NetworkSpec::relu_softmax(&dims).expect("valid");
        let mut net = Network::init(&spec, t).expect("init");
        for layer in &mut net.layers {
            for b in &mut layer.bias {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        let mut points = PointCloud::new(dims[0]);
        let mut labels = Vec::new();
        for i in 0..10 {
            let p: Vec<f64> = (0..dims[0]).map(|_| StandardNormal.sample(&mut rng)).collect();
            points.push(&p).expect("dim");
            labels.push(i % classes);
        }
        let idx: Vec<usize> = (0..10).collect();
        let (_, grads) = loss_and_gradients(&net, &points, &labels, &idx).expect("classifier");
        let analytic = flatten(&grads);
        params += analytic.len();
        for (p, &a) in analytic.iter().enumerate() {
            let orig = *parameter(&mut net, p);
            *parameter(&mut net, p) = orig + h;
            let (lp, _) = loss_and_gradients(&net, &points, &labels, &idx).expect("classifier");
            *parameter(&mut net, p) = orig - h;
            let (lm, _) = loss_and_gradients(&net, &points, &labels, &idx).expect("classifier");
            *parameter(&mut net, p) = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    outcome(
        worst <= 1e-4,
        format!("20 nets, {params} parameters, max relative error {worst:e}"),
    )
}

fn pairwise(c: &PointCloud) -> Vec<f64> {
    let n = c.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = cloud::distance(c.point(i), c.point(j));
        }
    }
    d
}

fn one_minus_r2(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    1.0 - sxy * sxy / (sxx * syy)
}

/// Circle in R^3 and the complete-graph reduction to classical MDS.
fn criterion_9() -> Outcome {
    let n = 200;
    let (a, b) = (0.7f64, 1.1f64);
    let rot = Matrix::from_rows(&[
        [a.cos(), -a.sin(), 0.0],
        [a.sin() * b.cos(), a.cos() * b.cos(), -b.sin()],
        [a.sin() * b.sin(), a.cos() * b.sin(), b.cos()],
    ])
    .expect("3x3");
    let mut planar = PointCloud::new(2);
    let mut circle = PointCloud::new(3);
    for i in 0..n {
        let t = std::f64::consts::TAU * i as f64 / n as f64;
        let p = [2.0 * t.cos(), 2.0 * t.sin()];
        planar.push(&p).expect("2-d");
        circle.push(&rot.matvec(&[p[0], p[1], 0.0]).expect("3-d")).expect("3-d");
    }
    let emb = isomap(&circle, 10, 2).expect("connected");
    let upper = |d: &[f64]| -> Vec<f64> {
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| d[i * n + j])
            .collect()
    };
    let oracle_rv = one_minus_r2(&upper(&pairwise(&planar)), &upper(&pairwise(&emb.coords)));

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = 80;
    let mut blob = PointCloud::new(3);
    for _ in 0..m {
        let p: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
        blob.push(&p).expect("3-d");
    }
    let complete = isomap(&blob, m - 1, 2).expect("complete graph");
    let raw = pairwise(&blob);
    let direct = classical_mds(&raw, m, 2).expect("mds");
    // Independent route: full Jacobi eigendecomposition of the centred Gram matrix.
    let mut gram = Matrix::zeros(m, m);
    let sq: Vec<f64> = raw.iter().map(|d| d * d).collect();
    let row: Vec<f64> = (0..m).map(|i| sq[i * m..(i + 1) * m].iter().sum::<f64>() / m as f64).collect();
    let all = row.iter().sum::<f64>() / m as f64;
    for i in 0..m {
        for j in 0..m {
            gram[(i, j)] = -0.5 * (sq[i * m + j] - row[i] - row[j] + all);
        }
    }
    let (values, _) = symmetric_eigen(&gram).expect("square");
    let dist_gap = pairwise(&complete.coords)
        .iter()
        .zip(pairwise(&direct.coords))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let eig_gap = complete
        .eigenvalues
        .iter()
        .zip(&values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let pass = emb.residual_variance <= 0.05 && oracle_rv <= 0.05 && dist_gap <= 1e-8 && eig_gap <= 1e-8;
    outcome(
        pass,
        format!(
            "circle: residual variance {:.3e} (geodesic), {oracle_rv:.3e} (vs planar oracle); \
             complete graph: max distance gap {dist_gap:e}, max eigenvalue gap {eig_gap:e}",
            emb.residual_variance
        ),
    )
}

/// Two E1 runs produce byte-identical reports.
fn criterion_10() -> Outcome {
    let cfg = load_config("e1_annulus.toml");
    let dir = tempfile::tempdir().expect("temp dir");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    pipeline::run(&cfg, &a).expect("run a");
    pipeline::run(&cfg, &b).expect("run b");
    let files = [
        pipeline::REPORT_FILE,
        pipeline::DATASET_FILE,
        pipeline::NETWORK_FILE,
        pipeline::TRAINING_FILE,
    ];
    let mut differing = Vec::new();
    for f in files {
        if std::fs::read(a.join(f)).expect("artifact") != std::fs::read(b.join(f)).expect("artifact") {
            differing.push(f);
        }
    }
    let report_len = std::fs::metadata(a.join(pipeline::REPORT_FILE)).expect("report").len();
    outcome(
        differing.is_empty(),
        format!("report.json {report_len} bytes; differing artifacts {differing:?}"),
    )
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "urysohn exactness", Duration::from_secs(10), criterion_1),
        (2, "kernel witness collisions", Duration::from_secs(30), criterion_2),
        (3, "voronoi/argmax equivalence", Duration::from_secs(10), criterion_3),
        (4, "relu move taxonomy", Duration::from_secs(5), criterion_4),
        (5, "E1 annulus", Duration::from_secs(300), criterion_5),
        (6, "E2 torus components", Duration::from_secs(600), criterion_6),
        (7, "E4 linked tori", Duration::from_secs(600), criterion_7),
        (8, "gradient integrity", Duration::from_secs(30), criterion_8),
        (9, "isomap oracle", Duration::from_secs(30), criterion_9),
        (10, "determinism", Duration::MAX, criterion_10),
    ];
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failures = 0;
    for (id, name, limit, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let pass = result.pass && in_time;
        if !pass {
            failures += 1;
        }
        let budget = if limit == Duration::MAX {
            String::new()
        } else {
            format!(" / {}s", limit.as_secs())
        };
        println!(
            "criterion {id:>2} {:<28} {} ({:.1}s{budget}) {}",
            name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            result.detail
        );
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
