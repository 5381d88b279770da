use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use agcn_core::data::{
    load_dataset, load_embeddings, load_graph_csv, synth_generate, write_dataset, write_embeddings, write_graph_csv,
    Dataset, LoadMode, SyntheticData, SyntheticSpec,
};
use agcn_core::labelgraph::{block_contrast, mean_diagonal, EmbeddingMatrix};
use agcn_core::metrics::TopK;
use agcn_core::model::{
    evaluate, load_checkpoint, save_checkpoint, AgcnModel, Checkpoint, EpochRecord, ModelConfig, Trainer,
};
use agcn_core::numcore::grad_check;
use agcn_core::{Error, Matrix};

use crate::config::RunConfig;
use crate::plot::{block_order, heatmap_svg, line_chart_svg, Series};
use crate::CliError;

pub const CHECKPOINT_FILE: &str = "checkpoint.agcn";
pub const LOG_FILE: &str = "train_log.csv";
pub const GRAPH_RAW_FILE: &str = "graph_raw.csv";
pub const GRAPH_NORMALIZED_FILE: &str = "graph_normalized.csv";

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn load_train_set(path: &Path, labels: &[String]) -> Result<Dataset, CliError> {
    let report = load_dataset(path, labels, LoadMode::Train)?;
    for r in &report.rejected {
        eprintln!("warning: {}:{}: skipped ({})", path.display(), r.line, r.reason);
    }
    if report.dataset.is_empty() {
        return Err(CliError::Input(format!("{}: no usable training samples", path.display())));
    }
    Ok(report.dataset)
}

fn load_eval_set(path: &Path, labels: &[String], feature_dim: usize) -> Result<Dataset, CliError> {
    let ds = load_dataset(path, labels, LoadMode::Eval)?.dataset;
    if ds.is_empty() {
        return Err(CliError::Input(format!("{}: evaluation set is empty", path.display())));
    }
    if ds.feature_dim() != feature_dim {
        return Err(CliError::Input(format!(
            "{}: features have {} dims, the model expects {feature_dim}",
            path.display(),
            ds.feature_dim()
        )));
    }
    Ok(ds)
}

fn load_fixed_graph(cfg: &RunConfig, labels: &[String]) -> Result<Option<Matrix>, CliError> {
    match cfg.optional("fixed_graph", &cfg.fixed_graph)? {
        Some(p) => Ok(Some(load_graph_csv(p, Some(labels))?.1)),
        None => Ok(None),
    }
}

fn load_blocks(path: Option<&Path>, labels: &[String]) -> Result<Option<Matrix>, CliError> {
    match path {
        Some(p) => Ok(Some(load_graph_csv(p, Some(labels))?.1)),
        None => Ok(None),
    }
}

/// Inputs shared by every training-style command, loaded before anything is
/// written.
struct TrainInputs {
    embeddings: EmbeddingMatrix,
    train: Dataset,
    eval: Option<Dataset>,
    fixed_graph: Option<Matrix>,
}

fn load_train_inputs(cfg: &RunConfig, need_eval: bool) -> Result<TrainInputs, CliError> {
    let emb_path = cfg.require("embeddings", &cfg.embeddings)?;
    let train_path = cfg.require("train", &cfg.train)?;
    let eval_path = if need_eval {
        Some(cfg.require("eval", &cfg.eval)?)
    } else {
        cfg.optional("eval", &cfg.eval)?
    };
    cfg.optional("fixed_graph", &cfg.fixed_graph)?;
    let embeddings = load_embeddings(emb_path)?;
    let labels = embeddings.labels().to_vec();
    let train = load_train_set(train_path, &labels)?;
    let eval = match eval_path {
        Some(p) => Some(load_eval_set(p, &labels, train.feature_dim())?),
        None => None,
    };
    let fixed_graph = load_fixed_graph(cfg, &labels)?;
    Ok(TrainInputs {
        embeddings,
        train,
        eval,
        fixed_graph,
    })
}

fn write_graphs(dir: &Path, model: &AgcnModel) -> Result<(), CliError> {
    let g = model.correlation_graph()?;
    write_graph_csv(dir.join(GRAPH_RAW_FILE), model.labels(), &g.raw)?;
    write_graph_csv(dir.join(GRAPH_NORMALIZED_FILE), model.labels(), &g.normalized)?;
    Ok(())
}

fn top_k(cfg: &RunConfig) -> Option<TopK> {
    Some(TopK {
        k: cfg.top_k,
        apply_threshold: false,
    })
}

fn write_reports(dir: &Path, stem: &str, cfg: &RunConfig, model: &AgcnModel, data: &Dataset) -> Result<f64, CliError> {
    let report = evaluate(model, data, cfg.threshold, top_k(cfg))?;
    write_text(&dir.join(format!("{stem}.kv")), &report.to_key_values(model.labels()))?;
    let table = report.to_table();
    write_text(&dir.join(format!("{stem}.txt")), &table)?;
    print!("{table}");
    Ok(report.map)
}

const LOG_HEADER: &str = "epoch,lr,loss_cls,loss_a,loss_total,eval_map";

fn log_line(r: &EpochRecord, eval_map: Option<f64>) -> String {
    let map = eval_map.map(|m| format!("{m:.6}")).unwrap_or_default();
    format!(
        "{},{:e},{:.9},{:.9},{:.9},{map}",
        r.epoch, r.lr, r.loss_cls, r.loss_a, r.loss_total
    )
}

pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let inputs = load_train_inputs(cfg, false)?;
    let model = AgcnModel::init(inputs.embeddings, inputs.fixed_graph, inputs.train.feature_dim(), &cfg.model)?;

    let out = &cfg.output_dir;
    create_dir(out)?;
    write_text(&out.join("config.resolved"), &cfg.to_text())?;
    let log_path = out.join(LOG_FILE);
    let mut log = BufWriter::new(File::create(&log_path).map_err(|e| CliError::Input(e.to_string()))?);
    let io = |e: std::io::Error| CliError::Input(format!("{}: {e}", log_path.display()));
    writeln!(log, "{LOG_HEADER}").map_err(io)?;

    let mut trainer = Trainer::new(model, cfg.model.clone());
    for _ in 0..cfg.model.schedule.epochs {
        let record = match trainer.run_epoch(&inputs.train) {
            Ok(r) => r,
            Err(e) => {
                log.flush().map_err(io)?;
                return Err(e.into());
            }
        };
        let eval_map = match &inputs.eval {
            Some(d) => Some(evaluate(trainer.model(), d, cfg.threshold, None)?.map),
            None => None,
        };
        writeln!(log, "{}", log_line(&record, eval_map)).map_err(io)?;
        eprintln!(
            "epoch {:>3}  lr {:.1e}  cls {:.5}  l_a {:.4}  total {:.5}{}",
            record.epoch,
            record.lr,
            record.loss_cls,
            record.loss_a,
            record.loss_total,
            eval_map.map(|m| format!("  mAP {m:.4}")).unwrap_or_default()
        );
    }
    log.flush().map_err(io)?;

    let velocities = trainer.optimizer().velocities().to_vec();
    let epochs_done = trainer.epochs_done();
    let model = trainer.into_model();
    write_graphs(out, &model)?;
    if let Some(d) = &inputs.eval {
        write_reports(out, "eval_report", cfg, &model, d)?;
    }
    let ckpt = Checkpoint {
        config: cfg.model.clone(),
        model,
        epochs_done,
        velocities,
    };
    save_checkpoint(out.join(CHECKPOINT_FILE), &ckpt)?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn eval(cfg: &RunConfig, checkpoint: &Path, data: Option<&Path>) -> Result<(), CliError> {
    let ckpt = load_checkpoint(checkpoint)?;
    let model = &ckpt.model;
    if let Some(p) = cfg.optional("embeddings", &cfg.embeddings)? {
        let labels = load_embeddings(p)?.labels().to_vec();
        if labels != model.labels() {
            return Err(CliError::Input(format!(
                "label order mismatch: checkpoint has [{}], {} has [{}]",
                model.labels().join(","),
                p.display(),
                labels.join(",")
            )));
        }
    }
    let data_path = match data {
        Some(p) => p,
        None => cfg.require("eval", &cfg.eval)?,
    };
    let ds = load_eval_set(data_path, model.labels(), model.feature_dim())?;
    create_dir(&cfg.output_dir)?;
    write_reports(&cfg.output_dir, "eval_report", cfg, model, &ds)?;
    Ok(())
}

pub fn export_graph(cfg: &RunConfig, checkpoint: &Path) -> Result<(), CliError> {
    let ckpt = load_checkpoint(checkpoint)?;
    let blocks = load_blocks(cfg.optional("blocks", &cfg.blocks)?, ckpt.model.labels())?;
    create_dir(&cfg.output_dir)?;
    write_graphs(&cfg.output_dir, &ckpt.model)?;
    let a = ckpt.model.a_hat()?;
    let mut summary = format!("mean_diagonal = {}\n", mean_diagonal(&a));
    if let Some(b) = blocks {
        let bc = block_contrast(&a, &b)?;
        summary += &format!(
            "mean_intra_block = {}\nmean_cross_block = {}\nratio = {}\n",
            bc.intra,
            bc.cross,
            bc.ratio()
        );
    }
    write_text(&cfg.output_dir.join("graph_summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn read_log(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let row = line
            .split(',')
            .map(|c| if c.is_empty() { Ok(f64::NAN) } else { c.parse::<f64>() })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Input(format!("{}:{}: {e}", path.display(), n + 1)))?;
        if row.len() != LOG_HEADER.split(',').count() {
            return Err(CliError::Input(format!("{}:{}: wrong column count", path.display(), n + 1)));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn plot(cfg: &RunConfig, checkpoint: &Path, log: Option<&Path>) -> Result<(), CliError> {
    let ckpt = load_checkpoint(checkpoint)?;
    let labels = ckpt.model.labels();
    let blocks = load_blocks(cfg.optional("blocks", &cfg.blocks)?, labels)?;
    let log_rows = match log {
        Some(p) => Some(read_log(p)?),
        None => None,
    };
    let a = ckpt.model.a_hat()?;
    let (order, groups) = match &blocks {
        Some(b) => block_order(b),
        None => ((0..labels.len()).collect(), vec![labels.len()]),
    };
    create_dir(&cfg.output_dir)?;
    let svg = heatmap_svg("normalized label graph", labels, &a, &order, &groups, cfg.heatmap_cell);
    write_text(&cfg.output_dir.join("graph_heatmap.svg"), &svg)?;
    if let Some(rows) = log_rows {
        let col = |k: usize| rows.iter().map(|r| (r[0], r[k])).collect::<Vec<_>>();
        let losses = [
            Series {
                name: "L_cls".into(),
                points: col(2),
            },
            Series {
                name: "alpha*L_A".into(),
                points: rows.iter().map(|r| (r[0], r[4] - r[2])).collect(),
            },
            Series {
                name: "L_total".into(),
                points: col(4),
            },
        ];
        write_text(
            &cfg.output_dir.join("loss_curve.svg"),
            &line_chart_svg("training loss", "epoch", "loss", &losses),
        )?;
        if rows.iter().any(|r| r[5].is_finite()) {
            let map = [Series {
                name: "eval mAP".into(),
                points: col(5),
            }];
            write_text(
                &cfg.output_dir.join("map_curve.svg"),
                &line_chart_svg("evaluation mAP", "epoch", "mAP", &map),
            )?;
        }
    }
    println!("wrote plots to {}", cfg.output_dir.display());
    Ok(())
}

pub struct GradCheckOptions {
    pub samples: usize,
    pub step: f64,
    pub tol: f64,
}

pub fn grad_check_cmd(cfg: &RunConfig, opts: &GradCheckOptions) -> Result<(), CliError> {
    if opts.samples == 0 || opts.step.is_nan() || opts.step <= 0.0 || opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(CliError::Usage("samples, step and tol must be positive".into()));
    }
    let inputs = load_train_inputs(cfg, false)?;
    let model = AgcnModel::init(inputs.embeddings, inputs.fixed_graph, inputs.train.feature_dim(), &cfg.model)?;
    let idx: Vec<usize> = (0..opts.samples.min(inputs.train.len())).collect();
    let (x, y) = (inputs.train.features(&idx), inputs.train.targets(&idx));
    let params: Vec<(String, Matrix)> = model.params().into_iter().map(|(n, p)| (n, p.value.clone())).collect();
    let report = grad_check(|t, v| Ok(model.forward(t, v, &x, &y)?.loss_total), &params, opts.step, opts.tol)?;
    let mut text = format!("step = {}\ntol = {}\nsamples = {}\n", opts.step, opts.tol, idx.len());
    for p in &report.params {
        text += &format!(
            "{}: max_rel_error = {:.3e} max_abs_error = {:.3e} worst_index = {} {}\n",
            p.name,
            p.max_rel_error,
            p.max_abs_error,
            p.worst_index,
            if p.passed { "ok" } else { "FAILED" }
        );
    }
    create_dir(&cfg.output_dir)?;
    write_text(&cfg.output_dir.join("grad_check.txt"), &text)?;
    print!("{text}");
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::GradCheck(format!(
            "max relative error {:.3e} exceeds {}",
            report.max_rel_error(),
            opts.tol
        )))
    }
}

pub const SYNTH_KEYS: &[&str] = &[
    "num_labels",
    "num_blocks",
    "embed_dim",
    "feature_dim",
    "train_samples",
    "test_samples",
    "p_in",
    "p_out",
    "noise",
    "embed_noise",
    "embed_scale",
    "block_share",
    "embed_block_share",
];

pub fn synth_spec(preset: &str, seed: u64, overrides: &[String]) -> Result<SyntheticSpec, CliError> {
    let mut spec = match preset {
        "benchmark" => SyntheticSpec::benchmark(seed),
        "default" => SyntheticSpec {
            seed,
            ..SyntheticSpec::default()
        },
        other => return Err(CliError::Usage(format!("unknown preset '{other}' (benchmark, default)"))),
    };
    let mut num_blocks = spec.blocks.len();
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| CliError::Usage(format!("override '{o}' is not of the form key=value")))?;
        let bad = || CliError::Config(format!("cannot parse {k} = '{v}'"));
        let count = || v.parse::<usize>().map_err(|_| bad());
        let real = || v.parse::<f64>().map_err(|_| bad());
        match k {
            "num_labels" => spec.num_labels = count()?,
            "num_blocks" => num_blocks = count()?,
            "embed_dim" => spec.embed_dim = count()?,
            "feature_dim" => spec.feature_dim = count()?,
            "train_samples" => spec.train_samples = count()?,
            "test_samples" => spec.test_samples = count()?,
            "p_in" => spec.p_in = real()?,
            "p_out" => spec.p_out = real()?,
            "noise" => spec.noise = real()?,
            "embed_noise" => spec.embed_noise = real()?,
            "embed_scale" => spec.embed_scale = real()?,
            "block_share" => spec.block_share = real()?,
            "embed_block_share" => spec.embed_block_share = real()?,
            _ => {
                return Err(CliError::Config(format!(
                    "unknown generator key '{k}' (known: {})",
                    SYNTH_KEYS.join(", ")
                )))
            }
        }
    }
    if num_blocks == 0 || num_blocks > spec.num_labels {
        return Err(CliError::Config(format!("num_blocks must lie in 1..={}", spec.num_labels)));
    }
    spec.blocks = agcn_core::data::contiguous_blocks(spec.num_labels, num_blocks);
    spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(spec)
}

pub fn synth(spec: &SyntheticSpec, out: &Path) -> Result<(), CliError> {
    let data: SyntheticData = synth_generate(spec)?;
    create_dir(out)?;
    let labels = data.embeddings.labels().to_vec();
    write_embeddings(out.join("embeddings.txt"), &data.embeddings)?;
    write_dataset(out.join("train.tsv"), &data.train)?;
    write_dataset(out.join("test.tsv"), &data.test)?;
    write_graph_csv(out.join("blocks.csv"), &labels, &data.block_matrix)?;
    let conf = format!(
        "# Generated for seed {}; paths are relative to this file.\n\
         embeddings = embeddings.txt\ntrain = train.tsv\neval = test.tsv\nblocks = blocks.csv\noutput_dir = run\nseed = {}\n",
        spec.seed, spec.seed
    );
    write_text(&out.join("run.conf"), &conf)?;
    println!(
        "wrote {} labels, {} train / {} test samples to {}",
        labels.len(),
        data.train.len(),
        data.test.len(),
        out.display()
    );
    Ok(())
}

pub fn parse_alphas(s: &str) -> Result<Vec<f64>, CliError> {
    let alphas = s
        .split(',')
        .map(|a| {
            a.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| CliError::Usage(format!("bad alpha '{a}'")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if alphas.len() < 2 {
        return Err(CliError::Usage("an alpha sweep needs at least two values".into()));
    }
    Ok(alphas)
}

/// One row of an α sweep.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub alpha: f64,
    /// `None` when the run diverged.
    pub map: Option<f64>,
    pub loss_total: f64,
    pub mean_diagonal: f64,
    pub status: String,
}

fn sweep_one(inputs: &TrainInputs, base: &ModelConfig, alpha: f64) -> Result<SweepRow, CliError> {
    let cfg = ModelConfig { alpha, ..base.clone() };
    let model = AgcnModel::init(
        inputs.embeddings.clone(),
        inputs.fixed_graph.clone(),
        inputs.train.feature_dim(),
        &cfg,
    )?;
    let mut trainer = Trainer::new(model, cfg);
    match trainer.run(&inputs.train, |_| {}) {
        Ok(()) => {}
        Err(Error::Divergence { epoch, step, loss }) => {
            return Ok(SweepRow {
                alpha,
                map: None,
                loss_total: loss,
                mean_diagonal: f64::NAN,
                status: format!("diverged(epoch={epoch},step={step})"),
            })
        }
        Err(e) => return Err(e.into()),
    }
    let loss_total = trainer.history().last().map_or(f64::NAN, |r| r.loss_total);
    let model = trainer.into_model();
    let eval = inputs.eval.as_ref().expect("sweep requires an eval set");
    Ok(SweepRow {
        alpha,
        map: Some(evaluate(&model, eval, 0.5, None)?.map),
        loss_total,
        mean_diagonal: mean_diagonal(&model.a_hat()?),
        status: "ok".into(),
    })
}

pub fn sweep_alpha(cfg: &RunConfig, alphas: &[f64], parallel: bool) -> Result<Vec<SweepRow>, CliError> {
    let inputs = load_train_inputs(cfg, true)?;
    let rows: Vec<SweepRow> = if parallel {
        let (inputs, base) = (&inputs, &cfg.model);
        std::thread::scope(|s| {
            let handles: Vec<_> = alphas
                .iter()
                .map(|&a| s.spawn(move || sweep_one(inputs, base, a)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sweep worker panicked"))
                .collect::<Result<_, _>>()
        })?
    } else {
        let mut rows = Vec::new();
        for &a in alphas {
            let row = sweep_one(&inputs, &cfg.model, a)?;
            eprintln!("alpha {a}: {}", row.status);
            rows.push(row);
        }
        rows
    };

    create_dir(&cfg.output_dir)?;
    let mut csv = String::from("alpha,status,map,final_loss_total,mean_diagonal\n");
    let mut table = format!("{:>8}  {:>8}  {:>12}  {:>9}  status\n", "alpha", "mAP", "loss_total", "diag(Â)");
    for r in &rows {
        let map = r.map.map(|m| format!("{m:.6}")).unwrap_or_default();
        csv += &format!("{},{},{map},{},{}\n", r.alpha, r.status, r.loss_total, r.mean_diagonal);
        table += &format!(
            "{:>8}  {:>8}  {:>12.5}  {:>9.4}  {}\n",
            r.alpha,
            r.map.map(|m| format!("{:.2}", 100.0 * m)).unwrap_or_else(|| "-".into()),
            r.loss_total,
            r.mean_diagonal,
            r.status
        );
    }
    write_text(&cfg.output_dir.join("sweep_alpha.csv"), &csv)?;
    let series = [Series {
        name: "test mAP".into(),
        points: rows.iter().map(|r| (r.alpha, r.map.unwrap_or(f64::NAN))).collect(),
    }];
    write_text(
        &cfg.output_dir.join("sweep_alpha.svg"),
        &line_chart_svg("mAP versus alpha", "alpha", "mAP", &series),
    )?;
    print!("{table}");
    Ok(rows)
}

/// Output directory for commands that have no run configuration.
pub fn output_dir_or(cli: Option<PathBuf>, fallback: &str) -> PathBuf {
    cli.or_else(|| {
        std::env::var_os(crate::config::OUTPUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
    })
    .unwrap_or_else(|| PathBuf::from(fallback))
}
