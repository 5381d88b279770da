//! Paired runs on the synthetic benchmark: A-GCN at the configured α, the
//! same model at α = 0, and the independent-classifier baseline (α = 0,
//! fixed `Â = I`). All three share the GCN initialization.
//!
//! ```text
//! cargo run --release --example pilot -- [seeds=100,101,102] [key=value ...]
//! ```
//!
//! Keys `n_train n_test feature_dim embed_dim p_in p_out noise embed_noise
//! embed_scale block_share embed_block_share` adjust the generator (starting from the
//! benchmark preset); every other key is a model setting.

use std::time::Instant;

use agcn_core::data::{synth_generate, SyntheticSpec};
use agcn_core::labelgraph::{block_contrast, mean_diagonal};
use agcn_core::model::{evaluate, train, KeyValues, ModelConfig};
use agcn_core::Matrix;

fn main() -> agcn_core::Result<()> {
    let mut spec = SyntheticSpec::benchmark(0);
    let mut kv = KeyValues::default();
    let mut seeds = vec![100u64, 101, 102];
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').expect("arguments are key=value");
        let real = || v.parse::<f64>().expect("real value");
        let count = || v.parse::<usize>().expect("integer value");
        match k {
            "n_train" => spec.train_samples = count(),
            "n_test" => spec.test_samples = count(),
            "feature_dim" => spec.feature_dim = count(),
            "embed_dim" => spec.embed_dim = count(),
            "p_in" => spec.p_in = real(),
            "p_out" => spec.p_out = real(),
            "noise" => spec.noise = real(),
            "embed_noise" => spec.embed_noise = real(),
            "embed_scale" => spec.embed_scale = real(),
            "block_share" => spec.block_share = real(),
            "embed_block_share" => spec.embed_block_share = real(),
            "seeds" => seeds = v.split(',').map(|s| s.parse().expect("seed")).collect(),
            _ => kv.set(k, v),
        }
    }
    let base = ModelConfig::from_key_values(&kv)?;
    println!("model: {}", base.to_key_values().to_text().replace('\n', "; "));
    println!("data: {spec:?}");

    let mut gains = Vec::new();
    for &seed in &seeds {
        let data = synth_generate(&SyntheticSpec { seed, ..spec.clone() })?;
        let t0 = Instant::now();
        let mut line = format!("seed {seed}:");
        let mut maps = Vec::new();
        for (name, alpha, fixed) in [("agcn", base.alpha, false), ("alpha0", 0.0, false), ("indep", 0.0, true)] {
            let cfg = ModelConfig { alpha, seed, ..base.clone() };
            let graph = fixed.then(|| Matrix::identity(spec.num_labels));
            match train(&data.train, data.embeddings.clone(), graph, &cfg) {
                Ok((model, history)) => {
                    let report = evaluate(&model, &data.test, 0.5, None)?;
                    let a = model.a_hat()?;
                    let last = history.last().expect("at least one epoch");
                    line += &format!(" {name}: map={:.4} cls={:.4} l_a={:.3} diag={:.3}", report.map, last.loss_cls, last.loss_a, mean_diagonal(&a));
                    if !fixed {
                        let bc = block_contrast(&a, &data.block_matrix)?;
                        line += &format!(" intra={:.4} cross={:.4}", bc.intra, bc.cross);
                    }
                    line += " |";
                    maps.push(report.map);
                }
                Err(e) => {
                    line += &format!(" {name}: {e} |");
                    maps.push(f64::NAN);
                }
            }
        }
        gains.push(maps[0] - maps[2]);
        println!("{line} gain={:+.4} ({:.1}s)", maps[0] - maps[2], t0.elapsed().as_secs_f64());
    }
    println!("mean gain {:+.4}", gains.iter().sum::<f64>() / gains.len() as f64);
    Ok(())
}
