//! Run configuration: one `key = value` file, `--set key=value` overrides,
//! and an environment override for the output directory.

use std::path::{Path, PathBuf};

use agcn_core::model::{KeyValues, ModelConfig, MODEL_KEYS};

use crate::CliError;

pub const OUTPUT_DIR_ENV: &str = "AGCN_OUTPUT_DIR";

/// Keys that are not model settings.
pub const RUN_KEYS: &[&str] = &[
    "embeddings",
    "train",
    "eval",
    "fixed_graph",
    "blocks",
    "output_dir",
    "threshold",
    "top_k",
    "heatmap_cell",
];

const PATH_KEYS: &[&str] = &["embeddings", "train", "eval", "fixed_graph", "blocks", "output_dir"];

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub embeddings: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub eval: Option<PathBuf>,
    /// Replaces the learned graph when set.
    pub fixed_graph: Option<PathBuf>,
    /// Ground-truth same-block matrix, used to order heatmaps and report
    /// block contrast.
    pub blocks: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub model: ModelConfig,
    pub threshold: f64,
    pub top_k: usize,
    /// Heatmap cell size in pixels.
    pub heatmap_cell: usize,
}

fn parse_override(s: &str) -> Result<(&str, &str), CliError> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| CliError::Usage(format!("override '{s}' is not of the form key=value")))
}

impl RunConfig {
    /// Relative paths inside the file resolve against the file's directory;
    /// relative paths in overrides resolve against the working directory.
    /// Output directory precedence: `cli_output_dir`, then the environment,
    /// then the file.
    pub fn load(file: Option<&Path>, overrides: &[String], cli_output_dir: Option<&Path>) -> Result<Self, CliError> {
        let mut kv = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
                let mut kv = KeyValues::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                let base = path.parent().unwrap_or(Path::new(""));
                for key in PATH_KEYS {
                    if let Some(v) = kv.get(key) {
                        let p = base.join(v);
                        kv.set(key, &p.to_string_lossy());
                    }
                }
                kv
            }
            None => KeyValues::default(),
        };
        for o in overrides {
            let (k, v) = parse_override(o)?;
            kv.set(k, v);
        }
        Self::from_key_values(kv, cli_output_dir)
    }

    fn from_key_values(mut kv: KeyValues, cli_output_dir: Option<&Path>) -> Result<Self, CliError> {
        let unknown: Vec<&str> = kv
            .keys()
            .filter(|k| !RUN_KEYS.contains(k) && !MODEL_KEYS.contains(k))
            .collect();
        if !unknown.is_empty() {
            return Err(CliError::Config(format!("unknown key(s): {}", unknown.join(", "))));
        }
        if kv.get("fixed_graph").is_some() && kv.get("lg_variant").is_some() {
            return Err(CliError::Config(
                "set exactly one of lg_variant and fixed_graph to select the graph source".into(),
            ));
        }
        let path = |kv: &mut KeyValues, key: &str| kv.remove(key).filter(|v| !v.is_empty()).map(PathBuf::from);
        let embeddings = path(&mut kv, "embeddings");
        let train = path(&mut kv, "train");
        let eval = path(&mut kv, "eval");
        let fixed_graph = path(&mut kv, "fixed_graph");
        let blocks = path(&mut kv, "blocks");
        let file_out = path(&mut kv, "output_dir");
        let env_out = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
        let output_dir = cli_output_dir
            .map(Path::to_path_buf)
            .or(env_out)
            .or(file_out)
            .unwrap_or_else(|| PathBuf::from("agcn-out"));

        let cfg_err = |e: agcn_core::Error| CliError::Config(e.to_string());
        let threshold: f64 = kv.parse_or("threshold", 0.5).map_err(cfg_err)?;
        let top_k: usize = kv.parse_or("top_k", 3).map_err(cfg_err)?;
        let heatmap_cell: usize = kv.parse_or("heatmap_cell", 28).map_err(cfg_err)?;
        for k in ["threshold", "top_k", "heatmap_cell"] {
            kv.remove(k);
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(CliError::Config(format!("threshold must lie in [0, 1], got {threshold}")));
        }
        if top_k == 0 || heatmap_cell == 0 {
            return Err(CliError::Config("top_k and heatmap_cell must be positive".into()));
        }
        let model = ModelConfig::from_key_values(&kv).map_err(cfg_err)?;
        model.validate().map_err(cfg_err)?;

        Ok(RunConfig {
            embeddings,
            train,
            eval,
            fixed_graph,
            blocks,
            output_dir,
            model,
            threshold,
            top_k,
            heatmap_cell,
        })
    }

    /// A configured path that must exist.
    pub fn require<'a>(&self, key: &str, value: &'a Option<PathBuf>) -> Result<&'a Path, CliError> {
        let p = value
            .as_deref()
            .ok_or_else(|| CliError::Config(format!("'{key}' is not set")))?;
        if !p.exists() {
            return Err(CliError::Config(format!("'{key}' points to a missing file: {}", p.display())));
        }
        Ok(p)
    }

    /// Optional path that, when set, must exist.
    pub fn optional<'a>(&self, key: &str, value: &'a Option<PathBuf>) -> Result<Option<&'a Path>, CliError> {
        match value {
            None => Ok(None),
            Some(_) => self.require(key, value).map(Some),
        }
    }

    /// Fully resolved settings, for the run record.
    pub fn to_text(&self) -> String {
        let mut kv = self.model.to_key_values();
        for (k, v) in [
            ("embeddings", &self.embeddings),
            ("train", &self.train),
            ("eval", &self.eval),
            ("fixed_graph", &self.fixed_graph),
            ("blocks", &self.blocks),
        ] {
            if let Some(p) = v {
                kv.set(k, &p.to_string_lossy());
            }
        }
        if self.fixed_graph.is_some() {
            kv.remove("lg_variant");
        }
        kv.set("threshold", &self.threshold.to_string());
        kv.set("top_k", &self.top_k.to_string());
        kv.set("heatmap_cell", &self.heatmap_cell.to_string());
        kv.to_text()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(overrides: &[&str]) -> Result<RunConfig, CliError> {
        let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        RunConfig::load(None, &o, Some(Path::new("out")))
    }

    #[test]
    fn defaults_follow_the_training_recipe() {
        let c = load(&[]).unwrap();
        assert_eq!(c.model, ModelConfig::default());
        assert_eq!((c.threshold, c.top_k), (0.5, 3));
    }

    #[test]
    fn graph_source_is_exclusive() {
        assert!(matches!(load(&["fixed_graph=g.csv", "lg_variant=dot"]), Err(CliError::Config(_))));
        assert!(load(&["fixed_graph=g.csv"]).unwrap().fixed_graph.is_some());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(load(&["learning_rate=1"]), Err(CliError::Config(_))));
        assert!(matches!(load(&["threshold=2"]), Err(CliError::Config(_))));
        assert!(matches!(load(&["alpha=-1"]), Err(CliError::Config(_))));
        assert!(matches!(load(&["alpha"]), Err(CliError::Usage(_))));
    }

    #[test]
    fn file_paths_resolve_against_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "embeddings = e.txt\nalpha = 0.5\n").unwrap();
        let c = RunConfig::load(Some(&path), &["seed=4".into()], Some(Path::new("o"))).unwrap();
        assert_eq!(c.embeddings.unwrap(), dir.path().join("e.txt"));
        assert_eq!((c.model.alpha, c.model.seed), (0.5, 4));
    }
}
