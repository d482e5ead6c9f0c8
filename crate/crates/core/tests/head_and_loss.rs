use modal_align::gradcheck::{check, Instance};
use modal_align::head::{HeadGradients, Layer};
use modal_align::loss::{batch_loss, loss_and_gradients};
use modal_align::{load_head, save_head, HeadConfig, ProjectionHead};
use proptest::prelude::*;

fn arb_head() -> impl Strategy<Value = ProjectionHead> {
    (1usize..10, 1usize..10, proptest::collection::vec(1usize..10, 0..3), any::<u64>())
        .prop_map(|(i, o, h, seed)| ProjectionHead::init(&HeadConfig::new(i, o, h, seed)).unwrap())
}

fn input_for(head: &ProjectionHead) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-10.0f64..10.0, head.input_dim())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

const KINK_MARGIN: f64 = 1e-2;

fn min_hidden_preactivation(inst: &Instance) -> f64 {
    let mut min = f64::INFINITY;
    for x in &inst.graph_inputs {
        let mut h = x.clone();
        let layers = &inst.graph_head.layers;
        for l in &layers[..layers.len() - 1] {
            let z: Vec<f64> = l
                .weights
                .chunks(l.cols)
                .zip(&l.bias)
                .map(|(row, b)| row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + b)
                .collect();
            min = z.iter().fold(min, |m, v| m.min(v.abs()));
            h = z.iter().map(|v| v.max(0.0)).collect();
        }
    }
    min
}

fn central(inst: &Instance, graph: bool, layer: usize, idx: usize, step: f64) -> f64 {
    let head = if graph { &inst.graph_head } else { &inst.text_head };
    let at = |d: f64| {
        let mut h = head.clone();
        let l = &mut h.layers[layer];
        match idx.checked_sub(l.weights.len()) {
            Some(b) => l.bias[b] += d,
            None => l.weights[idx] += d,
        }
        if graph {
            inst.loss(&h, &inst.text_head).unwrap()
        } else {
            inst.loss(&inst.graph_head, &h).unwrap()
        }
    };
    (at(step) - at(-step)) / (2.0 * step)
}

/// Worst elementwise relative error against Richardson-extrapolated central
/// differences with steps 1e-4 and 5e-5.
fn max_rel_error(inst: &Instance, grads: &HeadGradients, graph: bool) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, g) in grads.layers.iter().enumerate() {
        for (i, &a) in g.weights.iter().chain(&g.bias).enumerate() {
            let (d1, d2) = (central(inst, graph, k, i, 1e-4), central(inst, graph, k, i, 5e-5));
            let n = (4.0 * d2 - d1) / 3.0;
            worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-6));
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig {
        max_global_rejects: 1 << 16,
        ..ProptestConfig::default()
    })]

    #[test]
    fn forward_output_is_unit_or_degenerate(
        (head, x) in arb_head().prop_flat_map(|h| { let x = input_for(&h); (Just(h), x) })
    ) {
        match head.forward(&x) {
            Ok(y) => prop_assert!((norm(&y) - 1.0).abs() < 1e-9),
            Err(e) => prop_assert_eq!(e.code(), "DegenerateOutput"),
        }
    }

    #[test]
    fn single_layer_direction_ignores_positive_scale(
        dims in (1usize..10, 2usize..10),
        seed in any::<u64>(),
        c in 1e-3f64..1e3,
        x in proptest::collection::vec(-10.0f64..10.0, 10),
    ) {
        let head = ProjectionHead::init(&HeadConfig::new(dims.0, dims.1, vec![], seed)).unwrap();
        let x = &x[..dims.0];
        prop_assume!(norm(x) > 1e-6);
        let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
        let (a, b) = (head.forward(x).unwrap(), head.forward(&scaled).unwrap());
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn phd1_round_trip_is_bitwise(head in arb_head()) {
        let bytes = head.to_phd1_bytes();
        let back = ProjectionHead::from_phd1_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_phd1_bytes(), bytes.clone());
        prop_assert!(ProjectionHead::from_phd1_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn gradients_match_extrapolated_differences(seed in any::<u64>()) {
        let inst = Instance::random(seed).unwrap();
        // Central differences are no oracle where the stencil straddles a ReLU kink.
        prop_assume!(min_hidden_preactivation(&inst) > KINK_MARGIN);
        let (gg, tg) = inst.analytic().unwrap();
        let worst = max_rel_error(&inst, &gg, true).max(max_rel_error(&inst, &tg, false));
        prop_assert!(worst < 1e-4, "seed {seed}: {worst:e}");
    }

    #[test]
    fn loss_terms_are_non_negative(
        b in 1usize..8,
        dim in 2usize..8,
        tau in 0.05f64..2.0,
        raw in proptest::collection::vec(-1.0f64..1.0, 2 * 8 * 8),
        seed_w in proptest::collection::vec(1.0f64..3.0, 8),
    ) {
        let mut chunks = raw.chunks(dim);
        let mut take = |n: usize| -> Vec<Vec<f64>> {
            (0..n).map(|_| chunks.next().unwrap().to_vec()).collect()
        };
        let g: Vec<Vec<f64>> = take(b);
        let t: Vec<Vec<f64>> = take(b);
        prop_assume!(g.iter().chain(&t).all(|v| norm(v) > 1e-3));
        let g: Vec<Vec<f64>> = g.into_iter().map(unit).collect();
        let t: Vec<Vec<f64>> = t.into_iter().map(unit).collect();
        let out = batch_loss(&g, &t, tau, &seed_w[..b]).unwrap();
        prop_assert!(out.per_sample.iter().all(|&x| x >= 0.0));
        prop_assert!(out.loss >= 0.0);
        for row in &out.sim {
            prop_assert!(row.iter().all(|&s| (-1e-12..=1.0 + 1e-12).contains(&s)));
        }
    }
}

#[test]
fn plain_difference_error_is_truncation_not_gradient() {
    // A smooth instance where the 1e-4 central difference is off by 2.2e-4
    // relative on one parameter; smaller steps converge to the analytic value.
    let inst = Instance::random(16192694158721239199).unwrap();
    assert!(min_hidden_preactivation(&inst) > KINK_MARGIN);
    let report = check(&inst).unwrap();
    assert!(report.max_rel_error > 1e-4);
    let (gg, _) = inst.analytic().unwrap();
    let a = *gg.layers[2].weights.iter().chain(&gg.layers[2].bias).nth(131).unwrap();
    let err = |step: f64| (central(&inst, true, 2, 131, step) - a).abs();
    assert!(err(1e-4) > 4e-8);
    assert!(err(1e-5) < err(1e-4) / 50.0);
    assert!(max_rel_error(&inst, &gg, true) < 1e-6);
}

#[test]
fn single_sample_batch_has_zero_loss_and_gradient() {
    let g = vec![vec![0.6, 0.8]];
    let t = vec![vec![1.0, 0.0]];
    let (l, grads) = loss_and_gradients(&g, &t, 0.2, &[1.0]).unwrap();
    assert_eq!(l.loss, 0.0);
    assert!(grads.graph[0].iter().chain(&grads.text[0]).all(|&x| x == 0.0));
}

#[test]
fn hand_built_two_layer_head() {
    let l1 = Layer {
        rows: 2,
        cols: 2,
        weights: vec![1.0, 0.0, 0.0, -1.0],
        bias: vec![0.0, 0.0],
    };
    let l2 = Layer {
        rows: 2,
        cols: 2,
        weights: vec![1.0, 0.0, 0.0, 1.0],
        bias: vec![0.0, 0.0],
    };
    let head = ProjectionHead::from_layers(vec![l1, l2]).unwrap();
    assert_eq!(head.forward(&[1.0, 1.0]).unwrap(), vec![1.0, 0.0]);
}

#[test]
fn saved_head_loads_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.phd1");
    let head = ProjectionHead::init(&HeadConfig::new(5, 3, vec![4, 6], 9)).unwrap();
    save_head(&head, &path).unwrap();
    let back = load_head(&path).unwrap();
    assert_eq!(back.dim_chain(), vec![5, 4, 6, 3]);
    assert_eq!(back.to_phd1_bytes(), head.to_phd1_bytes());
}

#[test]
fn init_is_deterministic_and_bounded() {
    let cfg = HeadConfig::new(30, 20, vec![], 5);
    let a = ProjectionHead::init(&cfg).unwrap();
    let b = ProjectionHead::init(&cfg).unwrap();
    assert_eq!(a.to_phd1_bytes(), b.to_phd1_bytes());
    let bound = (6.0f64 / 50.0).sqrt();
    assert!(a.layers[0].weights.iter().all(|w| w.abs() < bound));
    assert!(a.layers[0].bias.iter().all(|&b| b == 0.0));
    assert!(ProjectionHead::init(&HeadConfig::new(3, 3, vec![2, 2, 2], 0)).is_err());
}
