use agcn_core::data::{synth_generate, Dataset, LabeledSample, SyntheticSpec};
use agcn_core::gcn::{ClassifierBank, StackSpec};
use agcn_core::labelgraph::{mean_diagonal, EmbeddingMatrix};
use agcn_core::metrics::TopK;
use agcn_core::model::{bce_loss, evaluate, predict, train, AgcnModel, LrSchedule, ModelConfig, Trainer};
use agcn_core::numcore::grad_check;
use agcn_core::{Matrix, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn predict_matches_per_row_inner_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let w = Matrix::from_fn(4, 6, |_, _| rng.random_range(-1.0..1.0));
    let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let p = predict(&ClassifierBank { weights: w.clone() }, &x).unwrap();
    for j in 0..4 {
        let mut dot = 0.0;
        for k in 0..6 {
            dot += w[(j, k)] * x[k];
        }
        assert!((p[j] - dot).abs() < 1e-15);
    }
}

#[test]
fn bce_matches_naive_elementwise_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p: Vec<f64> = (0..8).map(|_| rng.random_range(-4.0..4.0)).collect();
    let y: Vec<f64> = (0..8).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
    let naive = -p
        .iter()
        .zip(&y)
        .map(|(&p, &y)| {
            let s = 1.0 / (1.0 + (-p).exp());
            y * s.ln() + (1.0 - y) * (1.0 - s).ln()
        })
        .sum::<f64>()
        / 8.0;
    assert!((bce_loss(&p, &y).unwrap() - naive).abs() < 1e-12);
}

fn toy_model_config() -> ModelConfig {
    ModelConfig {
        stack: StackSpec {
            hidden: Some(vec![5]),
            ..Default::default()
        },
        ..ModelConfig::default()
    }
}

/// Total loss of a C=4, d_e=3, hidden=5, D=5 model against every label-graph
/// and GCN parameter.
#[test]
fn end_to_end_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let labels: Vec<String> = (0..4).map(|j| format!("l{j}")).collect();
    let e = Matrix::from_fn(4, 3, |_, _| rng.random_range(-2.0..2.0));
    let emb = EmbeddingMatrix::new(labels, e).unwrap();
    let model = AgcnModel::init(emb, None, 5, &toy_model_config()).unwrap();
    let x = Matrix::from_fn(6, 5, |_, _| rng.random_range(-1.0..1.0));
    let y = Matrix::from_fn(6, 4, |_, _| if rng.random_bool(0.5) { 1.0 } else { 0.0 });
    let params: Vec<(String, Matrix)> = model.params().into_iter().map(|(n, p)| (n, p.value.clone())).collect();
    assert_eq!(params.len(), 4);
    let report = grad_check(
        |t, v: &[Var]| Ok(model.forward(t, v, &x, &y)?.loss_total),
        &params,
        1e-5,
        1e-4,
    )
    .unwrap();
    assert!(report.passed(), "{report:?}");
}

#[test]
fn separable_toy_trains_to_low_loss() {
    let spec = SyntheticSpec {
        train_samples: 200,
        test_samples: 100,
        p_in: 1.0,
        p_out: 0.0,
        noise: 0.05,
        seed: 100,
        ..SyntheticSpec::benchmark(100)
    };
    let data = synth_generate(&spec).unwrap();
    let schedule = LrSchedule {
        epochs: 200,
        decay_every: 1000,
        ..Default::default()
    };
    let cfg = ModelConfig {
        schedule,
        ..ModelConfig::default()
    };
    let (model, history) = train(&data.train, data.embeddings.clone(), None, &cfg).unwrap();
    // Pilot value 0.0013; see examples/pilot_output.txt.
    assert!(history.last().unwrap().loss_cls < 0.05);
    assert!(history.iter().all(|r| r.loss_total.is_finite()));

    let cfg0 = ModelConfig { alpha: 0.0, ..cfg };
    let (model0, _) = train(&data.train, data.embeddings.clone(), None, &cfg0).unwrap();
    assert!(mean_diagonal(&model.a_hat().unwrap()) > mean_diagonal(&model0.a_hat().unwrap()));

    let report = evaluate(&model, &data.train, 0.5, None).unwrap();
    assert!(report.map > 0.95);
}

#[test]
fn evaluate_perfect_model_and_empty_set() {
    // Identity embeddings, one linear layer, Â = I: W̄ is the layer weight,
    // which we set to a large multiple of the identity.
    let labels: Vec<String> = (0..3).map(|j| format!("l{j}")).collect();
    let emb = EmbeddingMatrix::new(labels.clone(), Matrix::identity(3)).unwrap();
    let cfg = ModelConfig {
        stack: StackSpec {
            hidden: Some(Vec::new()),
            ..Default::default()
        },
        ..ModelConfig::default()
    };
    let mut model = AgcnModel::init(emb, Some(Matrix::identity(3)), 3, &cfg).unwrap();
    model.params_mut()[0].value = Matrix::identity(3).scale(100.0);
    let samples = vec![
        LabeledSample {
            feature: vec![1.0, -1.0, 1.0],
            labels: vec![true, false, true],
        },
        LabeledSample {
            feature: vec![-1.0, 1.0, -1.0],
            labels: vec![false, true, false],
        },
    ];
    let data = Dataset::new(labels.clone(), 3, samples).unwrap();
    let r = evaluate(
        &model,
        &data,
        0.5,
        Some(TopK {
            k: 1,
            apply_threshold: false,
        }),
    )
    .unwrap();
    assert_eq!((r.map, r.all.cf1, r.all.of1), (1.0, 1.0, 1.0));
    let empty = Dataset::new(labels, 3, Vec::new()).unwrap();
    assert!(evaluate(&model, &empty, 0.5, None).is_err());
}

#[test]
fn identical_seeds_give_identical_parameters() {
    let spec = SyntheticSpec {
        train_samples: 150,
        test_samples: 10,
        ..SyntheticSpec::benchmark(4)
    };
    let data = synth_generate(&spec).unwrap();
    let cfg = ModelConfig {
        schedule: LrSchedule {
            epochs: 2,
            ..Default::default()
        },
        ..ModelConfig::default()
    };
    let run = || {
        let m = AgcnModel::init(data.embeddings.clone(), None, spec.feature_dim, &cfg).unwrap();
        let mut t = Trainer::new(m, cfg.clone());
        t.run(&data.train, |_| {}).unwrap();
        t.into_model()
    };
    let (a, b) = (run(), run());
    for ((_, pa), (_, pb)) in a.params().iter().zip(b.params()) {
        let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&pa.value), bits(&pb.value));
    }
}
