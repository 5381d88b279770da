use agcn_core::data::{
    load_dataset, load_embeddings, load_graph_csv, synth_generate, write_dataset, write_embeddings, write_graph_csv,
    Dataset, LabeledSample, LoadMode, SyntheticSpec,
};
use agcn_core::labelgraph::EmbeddingMatrix;
use agcn_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn awkward(rng: &mut ChaCha8Rng) -> f64 {
    // Mix of magnitudes, subnormal-adjacent values and exact integers.
    match rng.random_range(0..4) {
        0 => rng.random_range(-1.0..1.0),
        1 => rng.random_range(-1e300..1e300),
        2 => rng.random_range(-1e-300..1e-300),
        _ => rng.random_range(-5..5) as f64,
    }
}

#[test]
fn hundred_record_dataset_round_trips_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let labels: Vec<String> = (0..7).map(|j| format!("tag_{j}")).collect();
    let samples: Vec<LabeledSample> = (0..100)
        .map(|i| {
            let mut l: Vec<bool> = (0..7).map(|_| rng.random_bool(0.3)).collect();
            l[i % 7] = true;
            LabeledSample {
                feature: (0..9).map(|_| awkward(&mut rng)).collect(),
                labels: l,
            }
        })
        .collect();
    let ds = Dataset::new(labels.clone(), 9, samples).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.tsv");
    write_dataset(&path, &ds).unwrap();
    let back = load_dataset(&path, &labels, LoadMode::Train).unwrap();
    assert_eq!(back.records_read, 100);
    assert!(back.rejected.is_empty());
    assert_eq!(back.dataset, ds);
    for (a, b) in back.dataset.samples().iter().zip(ds.samples()) {
        assert!(a.feature.iter().zip(&b.feature).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn embeddings_round_trip_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(67);
    let labels: Vec<String> = (0..5).map(|j| format!("w{j}")).collect();
    let e = EmbeddingMatrix::new(labels, Matrix::from_fn(5, 6, |_, _| awkward(&mut rng))).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.txt");
    write_embeddings(&path, &e).unwrap();
    assert_eq!(load_embeddings(&path).unwrap(), e);
}

#[test]
fn hand_written_embedding_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.txt");
    std::fs::write(&path, "cat 1 0\ndog 0 1\n").unwrap();
    let e = load_embeddings(&path).unwrap();
    assert_eq!(e.vectors(), &Matrix::identity(2));
    std::fs::write(&path, "cat 1 0\ndog 0 1\ncat 2 2\n").unwrap();
    let err = load_embeddings(&path).unwrap_err().to_string();
    assert!(err.contains("cat") && err.contains(":3:"), "{err}");
}

#[test]
fn graph_csv_round_trips_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let labels: Vec<String> = (0..4).map(|j| format!("n{j}")).collect();
    let g = Matrix::from_fn(4, 4, |_, _| awkward(&mut rng));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.csv");
    write_graph_csv(&path, &labels, &g).unwrap();
    let (l, back) = load_graph_csv(&path, Some(&labels)).unwrap();
    assert_eq!(l, labels);
    assert!(back.as_slice().iter().zip(g.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn generation_is_reproducible() {
    let spec = SyntheticSpec {
        train_samples: 50,
        test_samples: 20,
        ..SyntheticSpec::benchmark(9)
    };
    let (a, b) = (synth_generate(&spec).unwrap(), synth_generate(&spec).unwrap());
    assert_eq!(a.train, b.train);
    assert_eq!(a.test, b.test);
    assert_eq!(a.embeddings, b.embeddings);
    let c = synth_generate(&SyntheticSpec { seed: 10, ..spec }).unwrap();
    assert_ne!(a.train, c.train);
}

/// Label activation rates over raw draws against the generator's
/// probabilities, within 3σ binomial bounds.
#[test]
fn cooccurrence_rates_match_probabilities() {
    let spec = SyntheticSpec {
        train_samples: 0,
        test_samples: 10_000,
        feature_dim: 4,
        ..SyntheticSpec::default()
    };
    let data = synth_generate(&spec).unwrap();
    let k = spec.blocks.len() as f64;
    let n = data.test.len() as f64;
    // Single label: the sample's block is its own w.p. 1/K.
    let p_single = spec.p_in / k + spec.p_out * (k - 1.0) / k;
    // Pair in one block: both in w.p. p_in² when the block is drawn.
    let p_same = spec.p_in.powi(2) / k + spec.p_out.powi(2) * (k - 1.0) / k;
    // Pair across blocks: one of them is in-block w.p. 2/K.
    let p_cross = 2.0 * spec.p_in * spec.p_out / k + spec.p_out.powi(2) * (k - 2.0) / k;
    let block = &data.block_matrix;
    let c = spec.num_labels;
    let rate = |f: &dyn Fn(&LabeledSample) -> bool| data.test.samples().iter().filter(|s| f(s)).count() as f64 / n;
    let within = |obs: f64, p: f64| (obs - p).abs() <= 3.0 * (p * (1.0 - p) / n).sqrt();
    for i in 0..c {
        let obs = rate(&|s| s.labels[i]);
        assert!(within(obs, p_single), "label {i}: {obs} vs {p_single}");
        for j in (i + 1)..c {
            let p = if block[(i, j)] == 1.0 { p_same } else { p_cross };
            let obs = rate(&|s| s.labels[i] && s.labels[j]);
            // Pairwise tests are many; widen to 4σ to keep the family-wise
            // false-alarm rate negligible for a fixed seed.
            assert!((obs - p).abs() <= 4.0 * (p * (1.0 - p) / n).sqrt(), "pair ({i},{j}): {obs} vs {p}");
        }
    }
}

#[test]
fn loader_accounts_for_every_record() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.tsv");
    std::fs::write(&path, "# comment\na\t1 2\n\t3 4\n\nb,a\t5 6\n\t7 8\n").unwrap();
    let order = vec!["a".to_string(), "b".to_string()];
    let r = load_dataset(&path, &order, LoadMode::Train).unwrap();
    assert_eq!(r.records_read, r.dataset.len() + r.rejected.len());
    assert_eq!((r.dataset.len(), r.rejected.len()), (2, 2));
    assert!(r.rejected.iter().all(|x| !x.reason.is_empty()));
}
