//! Property tests for the structural invariants of each module.

use proptest::prelude::*;
use toponet_core::cloud::{self, PointCloud};
use toponet_core::embedding::{geodesic_distances, knn_graph};
use toponet_core::linalg::{svd, Matrix};
use toponet_core::moves::{classify_relu_action, relu_clamp, ReluAction};
use toponet_core::nn::trace_cloud;
use toponet_core::simplex::{argmax, cell_with_tolerance, softmax_into, verdict_from_outputs, Cell, TIE_TOLERANCE};
use toponet_core::{
    epsilon_components, forward, head, isomap, kernel_collision_witness, Network, NetworkSpec,
};

fn cloud_strategy(dim: usize, max_points: usize, range: f64) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(prop::collection::vec(-range..range, dim), 1..max_points)
        .prop_map(|rows| PointCloud::from_rows(&rows).expect("equal dims"))
}

fn matrix_strategy(max_dim: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
        prop::collection::vec(-5.0..5.0f64, r * c)
            .prop_map(move |d| Matrix::from_row_major(r, c, d).expect("sized"))
    })
}

fn network_strategy() -> impl Strategy<Value = Network> {
    (prop::collection::vec(1usize..6, 2..5), any::<u64>()).prop_map(|(mut dims, seed)| {
        if *dims.last().unwrap() < 2 {
            *dims.last_mut().unwrap() = 2;
        }
        Network::init(&NetworkSpec::relu_softmax(&dims).unwrap(), seed).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn relu_clamp_is_idempotent(c in cloud_strategy(4, 40, 3.0)) {
        let once = relu_clamp(&c);
        prop_assert_eq!(relu_clamp(&once), once.clone());
        prop_assert!(once.as_flat().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn nonnegative_clouds_are_fixed(c in cloud_strategy(3, 40, 3.0)) {
        let positive = relu_clamp(&c);
        let report = classify_relu_action(&positive).unwrap();
        prop_assert_eq!(report.action, ReluAction::IdentityAction);
        prop_assert_eq!(report.points_with_negatives, 0);
    }

    #[test]
    fn collision_witnesses_are_sound(c in cloud_strategy(2, 60, 1.0)) {
        let report = classify_relu_action(&c).unwrap();
        let clamped = relu_clamp(&c);
        for &(i, j) in &report.witnesses {
            prop_assert!(i < j);
            prop_assert!(cloud::distance(clamped.point(i), clamped.point(j)) <= 1e-9);
            prop_assert!(cloud::distance(c.point(i), c.point(j)) > 1e-9);
        }
        prop_assert_eq!(report.action == ReluAction::Quotienting, report.collision_pair_count > 0);
    }

    #[test]
    fn softmax_lands_in_the_simplex(z in prop::collection::vec(-700.0..700.0f64, 1..10)) {
        let mut p = vec![0.0; z.len()];
        softmax_into(&z, &mut p);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert_eq!(argmax(&p), argmax(&z));
    }

    #[test]
    fn largest_coordinate_is_nearest_vertex(raw in prop::collection::vec(0.0..1.0f64, 2..9)) {
        let s: f64 = raw.iter().sum();
        prop_assume!(s > 1e-6);
        let p: Vec<f64> = raw.iter().map(|v| v / s).collect();
        if let Cell::Vertex(v) = cell_with_tolerance(&p, TIE_TOLERANCE) {
            let dist = |i: usize| p.iter().enumerate()
                .map(|(j, &x)| (x - if i == j { 1.0 } else { 0.0 }).powi(2)).sum::<f64>();
            for i in 0..p.len() {
                prop_assert!(dist(v) <= dist(i));
            }
        }
    }

    #[test]
    fn components_merge_as_eps_grows(c in cloud_strategy(2, 50, 2.0), e in 0.01..1.0f64) {
        let small = epsilon_components(&c, e).unwrap();
        let large = epsilon_components(&c, 2.0 * e).unwrap();
        prop_assert!(large.count <= small.count);
        // Points together at the small scale stay together at the large one.
        for i in 0..c.len() {
            for j in 0..c.len() {
                if small.ids[i] == small.ids[j] {
                    prop_assert_eq!(large.ids[i], large.ids[j]);
                }
            }
        }
    }

    #[test]
    fn svd_reconstructs(a in matrix_strategy(6)) {
        let d = svd(&a);
        let err = d.reconstruct().sub(&a).unwrap().frobenius_norm();
        prop_assert!(err <= 1e-10 * (1.0 + a.frobenius_norm()), "error {err}");
        prop_assert!(d.singular_values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(d.singular_values.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn witness_maps_to_one_point(
        shape in prop::sample::select(vec![(3usize, 2usize), (5, 3), (10, 4)]),
        seed in any::<u64>(),
    ) {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (n, k) = shape;
        let data = (0..n * k).map(|_| StandardNormal.sample(&mut rng)).collect();
        let w = Matrix::from_row_major(k, n, data).unwrap();
        let witness = kernel_collision_witness(&w, 0.9, (1.0, 2.0)).unwrap();
        prop_assert!(witness.residual <= 1e-9);
        prop_assert!(cloud::norm(&witness.p1) <= 0.9);
        let n2 = cloud::norm(&witness.p2);
        prop_assert!((1.0..=2.0).contains(&n2));
    }

    #[test]
    fn heads_telescope(net in network_strategy(), x in prop::collection::vec(-2.0..2.0f64, 5)) {
        let x = &x[..net.input_dim()];
        let mut current = x.to_vec();
        for i in 1..=net.num_layers() {
            current = net.layers[i - 1].apply(&current).1;
            prop_assert_eq!(head(&net, i, x).unwrap(), current.clone());
        }
        prop_assert_eq!(forward(&net, x).unwrap(), current);
    }

    #[test]
    fn trace_rows_match_heads(net in network_strategy(), c in cloud_strategy(5, 12, 2.0)) {
        let input = PointCloud::from_rows(
            &c.iter().map(|p| p[..net.input_dim()].to_vec()).collect::<Vec<_>>()
        ).unwrap();
        let labels = vec![0; input.len()];
        let trace = trace_cloud(&net, &input, labels).unwrap();
        prop_assert_eq!(trace.clouds.len(), net.num_layers() + 1);
        for (i, layer_cloud) in trace.clouds.iter().enumerate() {
            prop_assert_eq!(layer_cloud.len(), input.len());
            for p in 0..input.len() {
                let expected = if i == 0 { input.point(p).to_vec() } else { head(&net, i, input.point(p)).unwrap() };
                prop_assert_eq!(layer_cloud.point(p), &expected[..]);
            }
        }
    }

    #[test]
    fn verdict_ignores_point_order(
        rows in prop::collection::vec((prop::collection::vec(0.0..1.0f64, 3), 0usize..3), 1..30),
        rotate in 0usize..30,
    ) {
        let norm = |v: &Vec<f64>| { let s: f64 = v.iter().sum::<f64>().max(1e-9); v.iter().map(|x| x / s).collect::<Vec<_>>() };
        let outputs: Vec<Vec<f64>> = rows.iter().map(|(v, _)| norm(v)).collect();
        let labels: Vec<usize> = rows.iter().map(|(_, l)| *l).collect();
        let a = verdict_from_outputs(&outputs, &labels, 3);
        let r = rotate % outputs.len();
        let (mut o2, mut l2) = (outputs.clone(), labels.clone());
        o2.rotate_left(r);
        l2.rotate_left(r);
        let b = verdict_from_outputs(&o2, &l2, 3);
        prop_assert_eq!(a.separated, b.separated);
        prop_assert_eq!(a.per_class, b.per_class);
        prop_assert_eq!(a.accuracy, b.accuracy);
        prop_assert_eq!(a.boundary_points.len(), b.boundary_points.len());
    }

    #[test]
    fn geodesics_form_a_metric(c in cloud_strategy(3, 30, 2.0), k in 1usize..6) {
        let g = geodesic_distances(&knn_graph(&c, k));
        let n = c.len();
        for i in 0..n {
            prop_assert_eq!(g.get(i, i), 0.0);
            for j in 0..n {
                prop_assert_eq!(g.get(i, j), g.get(j, i));
                prop_assert!(g.get(i, j) + 1e-12 >= cloud::distance(c.point(i), c.point(j)));
                for m in 0..n {
                    prop_assert!(g.get(i, j) <= g.get(i, m) + g.get(m, j) + 1e-9);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn isomap_output_is_centred(c in cloud_strategy(3, 60, 2.0)) {
        prop_assume!(c.len() >= 12);
        if let Ok(emb) = isomap(&c, c.len() - 1, 2) {
            for d in 0..emb.coords.dim() {
                let mean: f64 = emb.coords.iter().map(|p| p[d]).sum::<f64>() / c.len() as f64;
                prop_assert!(mean.abs() <= 1e-8, "mean {mean}");
            }
            prop_assert!((0.0..=1.0 + 1e-12).contains(&emb.residual_variance));
        }
    }
}
