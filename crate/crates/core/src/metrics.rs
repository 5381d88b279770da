//! Multi-label evaluation: mAP, per-class and overall precision/recall/F1,
//! top-k decisions, and class-agnostic AP.
//!
//! Rankings always break score ties by ascending original index, so every
//! number here is reproducible.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Scores, ground truth and binary decisions for `N` samples over `C` classes.
#[derive(Clone, Debug)]
pub struct PredictionSet {
    scores: Matrix,
    truths: Matrix,
    decisions: Matrix,
}

fn is_binary(m: &Matrix) -> bool {
    m.as_slice().iter().all(|&v| v == 0.0 || v == 1.0)
}

impl PredictionSet {
    pub fn new(scores: Matrix, truths: Matrix, decisions: Matrix) -> Result<Self> {
        scores.expect_same_shape(&truths, "prediction_set")?;
        scores.expect_same_shape(&decisions, "prediction_set")?;
        if !is_binary(&truths) {
            return Err(Error::Input("truths must be 0/1".into()));
        }
        if !is_binary(&decisions) {
            return Err(Error::Input("decisions must be 0/1".into()));
        }
        Ok(PredictionSet {
            scores,
            truths,
            decisions,
        })
    }

    pub fn scores(&self) -> &Matrix {
        &self.scores
    }

    pub fn truths(&self) -> &Matrix {
        &self.truths
    }

    pub fn decisions(&self) -> &Matrix {
        &self.decisions
    }

    pub fn num_samples(&self) -> usize {
        self.scores.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.scores.cols()
    }

    fn column(m: &Matrix, j: usize) -> Vec<f64> {
        (0..m.rows()).map(|i| m[(i, j)]).collect()
    }

    /// Classes with no positive truth.
    pub fn classes_without_positives(&self) -> Vec<usize> {
        (0..self.num_classes())
            .filter(|&j| (0..self.num_samples()).all(|i| self.truths[(i, j)] == 0.0))
            .collect()
    }
}

/// Indices sorted by descending score, ties by ascending index.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Non-interpolated AP: mean of precision@k over the ranks `k` of positives.
pub fn average_precision(scores: &[f64], truths: &[f64]) -> Result<f64> {
    if scores.len() != truths.len() {
        return Err(Error::Shape {
            op: "average_precision",
            left: (scores.len(), 1),
            right: (truths.len(), 1),
        });
    }
    let positives = truths.iter().filter(|&&t| t == 1.0).count();
    if positives == 0 {
        return Err(Error::Input("average precision needs at least one positive".into()));
    }
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank, &i) in ranking(scores).iter().enumerate() {
        if truths[i] == 1.0 {
            hits += 1;
            total += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(total / positives as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapResult {
    pub map: f64,
    /// `None` for excluded classes.
    pub per_class: Vec<Option<f64>>,
    pub excluded: Vec<usize>,
}

/// Unweighted mean of per-class AP over classes with at least one positive.
pub fn mean_average_precision(pred: &PredictionSet) -> Result<MapResult> {
    let mut per_class = Vec::with_capacity(pred.num_classes());
    let mut excluded = Vec::new();
    for j in 0..pred.num_classes() {
        let t = PredictionSet::column(&pred.truths, j);
        if t.iter().all(|&v| v == 0.0) {
            excluded.push(j);
            per_class.push(None);
            continue;
        }
        let s = PredictionSet::column(&pred.scores, j);
        per_class.push(Some(average_precision(&s, &t)?));
    }
    let included: Vec<f64> = per_class.iter().flatten().copied().collect();
    if included.is_empty() {
        return Err(Error::Input("no class has a positive example".into()));
    }
    Ok(MapResult {
        map: included.iter().sum::<f64>() / included.len() as f64,
        per_class,
        excluded,
    })
}

/// Precision, recall and their harmonic mean, with notes on any 0/0 term.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub flags: Vec<String>,
}

fn ratio(num: f64, den: f64, what: &str, flags: &mut Vec<String>) -> f64 {
    if den == 0.0 {
        flags.push(format!("{what}: zero denominator, defined as 0"));
        0.0
    } else {
        num / den
    }
}

fn harmonic(p: f64, r: f64, what: &str, flags: &mut Vec<String>) -> f64 {
    ratio(2.0 * p * r, p + r, what, flags)
}

/// Per-class `(TP, FP, FN)`.
pub fn confusion_counts(pred: &PredictionSet) -> Vec<(usize, usize, usize)> {
    (0..pred.num_classes())
        .map(|j| {
            let mut c = (0, 0, 0);
            for i in 0..pred.num_samples() {
                match (pred.decisions[(i, j)] == 1.0, pred.truths[(i, j)] == 1.0) {
                    (true, true) => c.0 += 1,
                    (true, false) => c.1 += 1,
                    (false, true) => c.2 += 1,
                    (false, false) => {}
                }
            }
            c
        })
        .collect()
}

/// OP / OR / OF1 from confusion counts pooled over all classes.
pub fn prf_overall(pred: &PredictionSet) -> Prf {
    let (tp, fp, fn_) = confusion_counts(pred)
        .into_iter()
        .fold((0, 0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));
    let mut flags = Vec::new();
    let precision = ratio(tp as f64, (tp + fp) as f64, "OP", &mut flags);
    let recall = ratio(tp as f64, (tp + fn_) as f64, "OR", &mut flags);
    let f1 = harmonic(precision, recall, "OF1", &mut flags);
    Prf {
        precision,
        recall,
        f1,
        flags,
    }
}

/// CP / CR as unweighted class means, CF1 as their harmonic mean. Classes
/// without positives are left out of both means.
pub fn prf_per_class(pred: &PredictionSet) -> Prf {
    let excluded = pred.classes_without_positives();
    let mut flags = Vec::new();
    let (mut p_sum, mut r_sum, mut n) = (0.0, 0.0, 0usize);
    for (j, (tp, fp, fn_)) in confusion_counts(pred).into_iter().enumerate() {
        if excluded.contains(&j) {
            continue;
        }
        p_sum += ratio(tp as f64, (tp + fp) as f64, &format!("CP class {j}"), &mut flags);
        r_sum += ratio(tp as f64, (tp + fn_) as f64, &format!("CR class {j}"), &mut flags);
        n += 1;
    }
    let precision = ratio(p_sum, n as f64, "CP", &mut flags);
    let recall = ratio(r_sum, n as f64, "CR", &mut flags);
    let f1 = harmonic(precision, recall, "CF1", &mut flags);
    Prf {
        precision,
        recall,
        f1,
        flags,
    }
}

/// Positive wherever the score is strictly greater than `threshold`.
pub fn threshold_decisions(scores: &Matrix, threshold: f64) -> Matrix {
    scores.map(|s| if s > threshold { 1.0 } else { 0.0 })
}

/// Exactly `k` positives per row at the highest scores, ties by ascending index.
pub fn topk_decisions(scores: &Matrix, k: usize) -> Result<Matrix> {
    if k > scores.cols() {
        return Err(Error::Input(format!("top-k of {k} exceeds {} classes", scores.cols())));
    }
    let mut out = Matrix::zeros(scores.rows(), scores.cols());
    for i in 0..scores.rows() {
        for &j in ranking(scores.row(i)).iter().take(k) {
            out[(i, j)] = 1.0;
        }
    }
    Ok(out)
}

/// AP over all `N·C` (score, truth) pairs pooled into one ranking, in
/// row-major order for tie-breaking.
pub fn ap_all(pred: &PredictionSet) -> Result<f64> {
    average_precision(pred.scores.as_slice(), pred.truths.as_slice())
}

/// The six decision-based metrics for one decision rule.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PrfSet {
    pub cp: f64,
    pub cr: f64,
    pub cf1: f64,
    pub op: f64,
    pub or: f64,
    pub of1: f64,
}

impl PrfSet {
    pub fn compute(pred: &PredictionSet, flags: &mut Vec<String>, prefix: &str) -> Self {
        let c = prf_per_class(pred);
        let o = prf_overall(pred);
        flags.extend(c.flags.iter().chain(&o.flags).map(|f| format!("{prefix}{f}")));
        PrfSet {
            cp: c.precision,
            cr: c.recall,
            cf1: c.f1,
            op: o.precision,
            or: o.recall,
            of1: o.f1,
        }
    }

    fn entries(&self) -> [(&'static str, f64); 6] {
        [
            ("cp", self.cp),
            ("cr", self.cr),
            ("cf1", self.cf1),
            ("op", self.op),
            ("or", self.or),
            ("of1", self.of1),
        ]
    }
}

/// How decisions are formed for the top-k section.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TopK {
    pub k: usize,
    /// Also require the score to exceed the threshold.
    pub apply_threshold: bool,
}

/// Full evaluation battery for one model on one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub num_samples: usize,
    pub num_classes: usize,
    pub threshold: f64,
    pub map: f64,
    pub per_class_ap: Vec<Option<f64>>,
    pub all: PrfSet,
    pub top_k: Option<(usize, PrfSet)>,
    pub ap_all: f64,
    pub excluded_classes: Vec<usize>,
    pub flags: Vec<String>,
}

impl MetricReport {
    /// `scores` are confidences in `[0, 1]`, `truths` 0/1, both `N×C`.
    pub fn compute(scores: &Matrix, truths: &Matrix, threshold: f64, top_k: Option<TopK>) -> Result<Self> {
        if scores.rows() == 0 {
            return Err(Error::Input("cannot evaluate an empty dataset".into()));
        }
        let mut flags = Vec::new();
        let thresholded = PredictionSet::new(scores.clone(), truths.clone(), threshold_decisions(scores, threshold))?;
        let map = mean_average_precision(&thresholded)?;
        let all = PrfSet::compute(&thresholded, &mut flags, "");
        let ap_all = ap_all(&thresholded)?;

        let top_k = match top_k {
            None => None,
            Some(TopK { k, apply_threshold }) => {
                let mut d = topk_decisions(scores, k)?;
                if apply_threshold {
                    d = d.hadamard(thresholded.decisions())?;
                }
                let pred = PredictionSet::new(scores.clone(), truths.clone(), d)?;
                Some((k, PrfSet::compute(&pred, &mut flags, &format!("top{k} "))))
            }
        };

        Ok(MetricReport {
            num_samples: scores.rows(),
            num_classes: scores.cols(),
            threshold,
            map: map.map,
            per_class_ap: map.per_class,
            all,
            top_k,
            ap_all,
            excluded_classes: map.excluded,
            flags,
        })
    }

    /// One `key=value` per line. Keys: `num_samples`, `num_classes`,
    /// `threshold`, `map`, `cp`, `cr`, `cf1`, `op`, `or`, `of1`, then
    /// `top{k}_map` and `top{k}_{cp,cr,cf1,op,or,of1}` when a top-k section
    /// exists, `ap_all`, `ap.<label>` per class (`excluded` when the class had
    /// no positives), `excluded_classes` and `flags` (`;`-separated).
    pub fn to_key_values(&self, labels: &[String]) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "num_samples={}", self.num_samples);
        let _ = writeln!(s, "num_classes={}", self.num_classes);
        let _ = writeln!(s, "threshold={}", self.threshold);
        let _ = writeln!(s, "map={}", self.map);
        for (k, v) in self.all.entries() {
            let _ = writeln!(s, "{k}={v}");
        }
        if let Some((k, set)) = &self.top_k {
            let _ = writeln!(s, "top{k}_map={}", self.map);
            for (name, v) in set.entries() {
                let _ = writeln!(s, "top{k}_{name}={v}");
            }
        }
        let _ = writeln!(s, "ap_all={}", self.ap_all);
        for (j, ap) in self.per_class_ap.iter().enumerate() {
            let name = labels.get(j).cloned().unwrap_or_else(|| j.to_string());
            match ap {
                Some(v) => {
                    let _ = writeln!(s, "ap.{name}={v}");
                }
                None => {
                    let _ = writeln!(s, "ap.{name}=excluded");
                }
            }
        }
        let excluded: Vec<String> = self
            .excluded_classes
            .iter()
            .map(|&j| labels.get(j).cloned().unwrap_or_else(|| j.to_string()))
            .collect();
        let _ = writeln!(s, "excluded_classes={}", excluded.join(","));
        let _ = writeln!(s, "flags={}", self.flags.join(";"));
        s
    }

    /// Human-readable table, percentages with two decimals.
    pub fn to_table(&self) -> String {
        let pct = |v: f64| format!("{:>6.2}", 100.0 * v);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} samples, {} classes, threshold {}",
            self.num_samples, self.num_classes, self.threshold
        );
        let _ = writeln!(s, "{:<8} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}", "", "mAP", "CP", "CR", "CF1", "OP", "OR", "OF1");
        let row = |name: &str, set: &PrfSet| {
            format!(
                "{:<8} {} {} {} {} {} {} {}\n",
                name,
                pct(self.map),
                pct(set.cp),
                pct(set.cr),
                pct(set.cf1),
                pct(set.op),
                pct(set.or),
                pct(set.of1)
            )
        };
        s.push_str(&row("all", &self.all));
        if let Some((k, set)) = &self.top_k {
            s.push_str(&row(&format!("top-{k}"), set));
        }
        let _ = writeln!(s, "AP_all {}", pct(self.ap_all));
        if !self.excluded_classes.is_empty() {
            let _ = writeln!(s, "excluded (no positives): {:?}", self.excluded_classes);
        }
        s
    }
}
