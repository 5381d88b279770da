use agcn_core::gcn::{build_classifiers, Activation, GcnLayer, GcnStack};
use agcn_core::labelgraph::{normalize_matrix, EmbeddingMatrix};
use agcn_core::numcore::grad_check;
use agcn_core::{Matrix, Parameter};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn embeddings(e: Matrix) -> EmbeddingMatrix {
    let labels = (0..e.rows()).map(|i| format!("l{i}")).collect();
    EmbeddingMatrix::new(labels, e).unwrap()
}

fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.2 * x
    }
}

/// `δ(Â·H·W)` written out entry by entry.
fn layer_oracle(a: &Matrix, h: &Matrix, w: &Matrix, act: bool) -> Matrix {
    let (c, din, dout) = (a.rows(), h.cols(), w.cols());
    Matrix::from_fn(c, dout, |i, o| {
        let mut z = 0.0;
        for j in 0..c {
            for k in 0..din {
                z += a[(i, j)] * h[(j, k)] * w[(k, o)];
            }
        }
        if act {
            leaky(z)
        } else {
            z
        }
    })
}

fn two_layer(w0: Matrix, w1: Matrix) -> GcnStack {
    GcnStack::new(vec![
        GcnLayer {
            weight: Parameter::new(w0),
            activation: Activation::LeakyRelu(0.2),
        },
        GcnLayer {
            weight: Parameter::new(w1),
            activation: Activation::None,
        },
    ])
    .unwrap()
}

#[test]
fn two_layer_stack_matches_stepwise_oracle() {
    let (c, de, hidden, d) = (3, 4, 5, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let e = random(c, de, &mut rng);
    let a = normalize_matrix(&random(c, c, &mut rng)).unwrap();
    let w0 = random(de, hidden, &mut rng);
    let w1 = random(hidden, d, &mut rng);
    let bank = build_classifiers(&embeddings(e.clone()), &a, &two_layer(w0.clone(), w1.clone())).unwrap();
    let h1 = layer_oracle(&a, &e, &w0, true);
    let want = layer_oracle(&a, &h1, &w1, false);
    assert_eq!(bank.weights.shape(), (c, d));
    assert!(bank.weights.max_abs_diff(&want).unwrap() < 1e-12);
}

#[test]
fn stack_gradients_pass_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let e = random(3, 4, &mut rng);
    let a = normalize_matrix(&random(3, 3, &mut rng)).unwrap();
    let stack = two_layer(random(4, 5, &mut rng), random(5, 6, &mut rng));
    let params: Vec<(String, Matrix)> = stack.params().into_iter().map(|(n, p)| (n, p.value.clone())).collect();
    let report = grad_check(
        |t, v| {
            let ev = t.leaf(e.clone());
            let av = t.leaf(a.clone());
            let out = stack.forward(t, ev, av, v)?;
            Ok(t.sum(out))
        },
        &params,
        1e-5,
        1e-4,
    )
    .unwrap();
    assert!(report.passed(), "{report:?}");
}

#[test]
fn relabeling_permutes_classifiers() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let c = 5;
    let e = random(c, 3, &mut rng);
    let a = normalize_matrix(&random(c, c, &mut rng)).unwrap();
    let stack = two_layer(random(3, 4, &mut rng), random(4, 2, &mut rng));
    let perm = [3, 0, 4, 1, 2];
    let pe = Matrix::from_fn(c, 3, |i, k| e[(perm[i], k)]);
    let pa = Matrix::from_fn(c, c, |i, j| a[(perm[i], perm[j])]);
    let w = build_classifiers(&embeddings(e), &a, &stack).unwrap().weights;
    let pw = build_classifiers(&embeddings(pe), &pa, &stack).unwrap().weights;
    for i in 0..c {
        for k in 0..2 {
            assert!((pw[(i, k)] - w[(perm[i], k)]).abs() < 1e-12);
        }
    }
}

#[test]
fn uniform_graph_makes_every_classifier_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let c = 4;
    let a = Matrix::filled(c, c, 1.0 / c as f64);
    let stack = two_layer(random(3, 5, &mut rng), random(5, 6, &mut rng));
    let w = build_classifiers(&embeddings(random(c, 3, &mut rng)), &a, &stack).unwrap().weights;
    for i in 1..c {
        for k in 0..6 {
            assert!((w[(i, k)] - w[(0, k)]).abs() < 1e-12);
        }
    }
}

#[test]
fn identity_graph_keeps_labels_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let e = random(4, 3, &mut rng);
    let stack = two_layer(random(3, 5, &mut rng), random(5, 2, &mut rng));
    let w = build_classifiers(&embeddings(e.clone()), &Matrix::identity(4), &stack).unwrap().weights;
    let mut e2 = e.clone();
    e2.row_mut(2).iter_mut().for_each(|v| *v += 0.5);
    let w2 = build_classifiers(&embeddings(e2), &Matrix::identity(4), &stack).unwrap().weights;
    for i in [0, 1, 3] {
        assert_eq!(w.row(i), w2.row(i));
    }
    assert_ne!(w.row(2), w2.row(2));
}
