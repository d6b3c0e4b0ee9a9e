//! Randomized train/test evaluation and the multi-classifier benchmark.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureDataset, FeatureError, FeatureId};
use crate::ingest::Activity;
use crate::learn::{ClassifierKind, ClassifierSpec, LearnError, TrainedModel};

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.70;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("test set has no labels")]
    MissingLabels,
    #[error("train fraction must be in (0, 1), got {0}")]
    Fraction(f64),
    #[error("benchmark plan is empty")]
    EmptyPlan,
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("bad report record: {0}")]
    Record(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Shuffles the rows with a seeded Fisher-Yates pass and puts the first
/// ⌊N·fraction⌋ into the training set.
pub fn shuffle_split(
    data: &FeatureDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(FeatureDataset, FeatureDataset), EvalError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(EvalError::Fraction(train_fraction));
    }
    if data.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let order = shuffled_indices(data.len(), seed);
    let cut = (data.len() as f64 * train_fraction).floor() as usize;
    Ok((data.subset(&order[..cut]), data.subset(&order[cut..])))
}

pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

pub type Confusion = [[u64; Activity::COUNT]; Activity::COUNT];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Plan row label such as `1.2`, empty for ad-hoc evaluations.
    pub label: String,
    pub algorithm: String,
    pub classifier: ClassifierKind,
    pub hyperparameters: String,
    pub features: Vec<FeatureId>,
    pub accuracy_pct: f64,
    pub build_time_s: f64,
    /// Rows are true classes, columns predicted, both by activity code.
    pub confusion: Confusion,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: Option<u64>,
}

impl EvaluationReport {
    pub fn correct(&self) -> u64 {
        (0..Activity::COUNT).map(|i| self.confusion[i][i]).sum()
    }
}

/// Scores `model` on a labeled test set. Columns are matched by name, so the
/// test set may carry more features than the model uses.
pub fn evaluate(model: &TrainedModel, test: &FeatureDataset) -> Result<EvaluationReport, EvalError> {
    let labels = test.labels().ok_or(EvalError::MissingLabels)?;
    if test.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let preds = model.predict_dataset(test)?;
    let mut confusion = [[0u64; Activity::COUNT]; Activity::COUNT];
    for (p, l) in preds.iter().zip(labels) {
        confusion[l.index()][p.activity.index()] += 1;
    }
    let trace: u64 = (0..Activity::COUNT).map(|i| confusion[i][i]).sum();
    Ok(EvaluationReport {
        label: String::new(),
        algorithm: String::new(),
        classifier: model.kind(),
        hyperparameters: String::new(),
        features: model.feature_names.clone(),
        accuracy_pct: 100.0 * trace as f64 / test.len() as f64,
        build_time_s: model.build_time_s,
        confusion,
        n_train: model.n_train,
        n_test: test.len(),
        seed: None,
    })
}

/// Which columns a plan row trains on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FeatureSubset {
    All,
    Named(Vec<String>),
}

impl FeatureSubset {
    pub fn resolve(&self, data: &FeatureDataset) -> Result<Vec<FeatureId>, FeatureError> {
        match self {
            FeatureSubset::All => Ok(data.feature_names().to_vec()),
            FeatureSubset::Named(names) => FeatureId::parse_list(names),
        }
    }

    /// Parses `all`, `@table3:<row>` or a comma/space separated name list.
    pub fn parse(spec: &str) -> Result<FeatureSubset, EvalError> {
        let s = spec.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(FeatureSubset::All);
        }
        if let Some(row) = s.strip_prefix("@table3:") {
            let names = table3_subset(row).ok_or_else(|| EvalError::UnknownPreset(s.to_string()))?;
            return Ok(FeatureSubset::Named(names.iter().map(|n| n.to_string()).collect()));
        }
        if s.starts_with('@') {
            return Err(EvalError::UnknownPreset(s.to_string()));
        }
        let names: Vec<String> = s.split([',', ' ']).filter(|n| !n.is_empty()).map(str::to_string).collect();
        FeatureId::parse_list(&names)?;
        Ok(FeatureSubset::Named(names))
    }
}

/// Reduced feature lists of the `table3` preset, verbatim (including the `igraccx`
/// misspelling, which resolves to `iqraccx`). Row 3.2 is labeled as nine
/// features but lists seven.
pub fn table3_subset(row: &str) -> Option<&'static [&'static str]> {
    const NB_10: &[&str] = &[
        "meanaccx",
        "meanaccy",
        "varianceaccy",
        "standarddeviationaccx",
        "standarddeviationaccz",
        "kurtosisaccy",
        "kurtosisaccz",
        "skewnessaccx",
        "skewnessaccz",
        "fkurtosisaccz",
    ];
    const TREE_11: &[&str] = &[
        "meanaccx",
        "meanaccy",
        "meanaccz",
        "varianceaccz",
        "skewnessaccx",
        "energyaccy",
        "energyaccz",
        "fmeanaccx",
        "fmeanaccz",
        "fvarianceaccy",
        "fkurtosisaccz",
    ];
    const FOREST_7: &[&str] = &[
        "meanaccx",
        "meanaccy",
        "varianceaccx",
        "varianceaccy",
        "standarddeviationaccx",
        "standarddeviationaccy",
        "igraccx",
    ];
    const BAGGING_8: &[&str] = &[
        "meanaccy",
        "meanaccz",
        "varianceaccx",
        "varianceaccy",
        "igraccx",
        "skewnessaccx",
        "energyaccz",
        "fskewnessaccx",
    ];
    match row {
        "1.2" => Some(NB_10),
        "2.2" => Some(TREE_11),
        "3.2" => Some(FOREST_7),
        "4.2" => Some(BAGGING_8),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub label: String,
    pub classifier: ClassifierSpec,
    pub features: FeatureSubset,
}

impl PlanRow {
    pub fn new(label: &str, classifier: ClassifierSpec, features: FeatureSubset) -> Self {
        PlanRow { label: label.to_string(), classifier, features }
    }
}

/// The `table3` roster: each classifier on all 42
/// features and on its reduced list, plus 1-NN on all features.
pub fn table3_plan() -> Vec<PlanRow> {
    let named = |row: &str| FeatureSubset::Named(table3_subset(row).unwrap().iter().map(|s| s.to_string()).collect());
    let spec = ClassifierSpec::default_for;
    vec![
        PlanRow::new("1.1", spec(ClassifierKind::Nb), FeatureSubset::All),
        PlanRow::new("1.2", spec(ClassifierKind::Nb), named("1.2")),
        PlanRow::new("2.1", spec(ClassifierKind::Tree), FeatureSubset::All),
        PlanRow::new("2.2", spec(ClassifierKind::Tree), named("2.2")),
        PlanRow::new("3.1", spec(ClassifierKind::Forest), FeatureSubset::All),
        PlanRow::new("3.2", spec(ClassifierKind::Forest), named("3.2")),
        PlanRow::new("4.1", spec(ClassifierKind::Bagging), FeatureSubset::All),
        PlanRow::new("4.2", spec(ClassifierKind::Bagging), named("4.2")),
        PlanRow::new("5.1", spec(ClassifierKind::Knn), FeatureSubset::All),
    ]
}

pub fn plan_for_preset(name: &str) -> Result<Vec<PlanRow>, EvalError> {
    match name {
        "table3" => Ok(table3_plan()),
        _ => Err(EvalError::UnknownPreset(name.to_string())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SplitMode {
    /// One split for the whole plan.
    #[default]
    Shared,
    /// Row `i` uses its own split seeded with `seed + i`.
    PerRow,
}

/// Outcome of one plan row; a failed row keeps its error message.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub label: String,
    pub algorithm: String,
    pub n_features: usize,
    pub outcome: Result<EvaluationReport, String>,
}

/// Trains and scores every plan row on a 70/30 split of `data`. A row that
/// fails to train is recorded and the rest still run. Rows come back in plan
/// order.
pub fn run_benchmark(
    plan: &[PlanRow],
    data: &FeatureDataset,
    seed: u64,
    train_fraction: f64,
    split_mode: SplitMode,
) -> Result<Vec<BenchmarkRow>, EvalError> {
    if plan.is_empty() {
        return Err(EvalError::EmptyPlan);
    }
    if data.labels().is_none() {
        return Err(EvalError::MissingLabels);
    }
    let shared = match split_mode {
        SplitMode::Shared => Some(shuffle_split(data, train_fraction, seed)?),
        SplitMode::PerRow => None,
    };
    let rows = plan
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let split_seed = match split_mode {
                SplitMode::Shared => seed,
                SplitMode::PerRow => seed.wrapping_add(i as u64),
            };
            let outcome = (|| -> Result<EvaluationReport, EvalError> {
                let own;
                let (train, test) = match &shared {
                    Some(s) => (&s.0, &s.1),
                    None => {
                        own = shuffle_split(data, train_fraction, split_seed)?;
                        (&own.0, &own.1)
                    }
                };
                let ids = row.features.resolve(data)?;
                let model = row.classifier.train(&train.select_ids(&ids)?, split_seed)?;
                let mut report = evaluate(&model, test)?;
                report.label = row.label.clone();
                report.algorithm = row.classifier.algorithm_name().to_string();
                report.hyperparameters = row.classifier.describe();
                report.seed = Some(split_seed);
                Ok(report)
            })();
            let n_features = row.features.resolve(data).map_or(0, |ids| ids.len());
            BenchmarkRow {
                label: row.label.clone(),
                algorithm: row.classifier.algorithm_name().to_string(),
                n_features,
                outcome: outcome.map_err(|e| e.to_string()),
            }
        })
        .collect();
    Ok(rows)
}

/// Aligned text table: algorithm, feature count, feature names, accuracy to
/// four decimals and build time.
pub fn render_table(rows: &[BenchmarkRow]) -> String {
    let names = |r: &BenchmarkRow| match &r.outcome {
        Ok(rep) if rep.features.len() == crate::features::FEATURE_COUNT => "(all)".to_string(),
        Ok(rep) => rep.features.iter().map(|f| f.name()).collect::<Vec<_>>().join(" "),
        Err(_) => "-".to_string(),
    };
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            let (acc, time) = match &r.outcome {
                Ok(rep) => (format!("{:.4}", rep.accuracy_pct), format!("{:.3}", rep.build_time_s)),
                Err(e) => (format!("FAILED: {e}"), "-".to_string()),
            };
            [r.label.clone(), r.algorithm.clone(), r.n_features.to_string(), names(r), acc, time]
        })
        .collect();
    let header = ["Row", "Algorithm", "#Features", "Features", "Accuracy %", "Build time s"];
    let mut widths = header.map(str::len);
    for c in &cells {
        for (w, s) in widths.iter_mut().zip(c) {
            *w = (*w).max(s.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, c: &[&str]| {
        let parts: Vec<String> = c.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "{}", rule.join("  "));
    for c in &cells {
        line(&mut out, &c.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

/// One JSON record per line.
pub fn write_records<W: Write>(mut w: W, rows: &[BenchmarkRow]) -> Result<(), EvalError> {
    for r in rows {
        serde_json::to_writer(&mut w, r).map_err(|e| EvalError::Record(e.to_string()))?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: BufRead>(r: R) -> Result<Vec<BenchmarkRow>, EvalError> {
    r.lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| serde_json::from_str(&l?).map_err(|e| EvalError::Record(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{train_nb, ModelParams, TreeParams};
    use proptest::prelude::*;
    use Activity::*;

    fn toy(n: usize) -> FeatureDataset {
        let rows = (0..n).map(|i| vec![i as f64, (i * 7 % 5) as f64]).collect();
        let labels = (0..n).map(|i| Activity::ALL[i % 7]).collect();
        FeatureDataset::new(FeatureId::all().take(2).collect(), rows, Some(labels)).unwrap()
    }

    fn constant_model(class: Activity) -> TrainedModel {
        let mut counts = [0; Activity::COUNT];
        counts[class.index()] = 1;
        let leaf = crate::learn::DecisionTree { nodes: vec![crate::learn::Node::Leaf { class, counts }] };
        TrainedModel {
            feature_names: FeatureId::all().take(2).collect(),
            build_time_s: 0.25,
            n_train: 0,
            params: ModelParams::Tree(leaf),
        }
    }

    #[test]
    fn seventy_thirty() {
        let (tr, te) = shuffle_split(&toy(10), 0.7, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (7, 3));
        assert!(shuffle_split(&toy(10), 1.0, 1).is_err());
        assert!(shuffle_split(&toy(10), 0.0, 1).is_err());
        assert!(matches!(shuffle_split(&toy(0), 0.7, 1), Err(EvalError::EmptyDataset)));
    }

    #[test]
    fn split_is_seed_deterministic() {
        let d = toy(50);
        assert_eq!(shuffle_split(&d, 0.7, 5).unwrap(), shuffle_split(&d, 0.7, 5).unwrap());
        assert_ne!(shuffle_split(&d, 0.7, 5).unwrap().0, shuffle_split(&d, 0.7, 6).unwrap().0);
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 1usize..200, seed in any::<u64>(), frac in 0.05f64..0.95) {
            let d = toy(n);
            let (tr, te) = shuffle_split(&d, frac, seed).unwrap();
            prop_assert_eq!(tr.len(), (n as f64 * frac).floor() as usize);
            let mut ids: Vec<u64> = tr.rows().iter().chain(te.rows()).map(|r| r[0] as u64).collect();
            ids.sort();
            prop_assert_eq!(ids, (0..n as u64).collect::<Vec<_>>());
        }
    }

    #[test]
    fn constant_classifier_accuracy() {
        let all_idle =
            FeatureDataset::new(FeatureId::all().take(2).collect(), vec![vec![0.0, 0.0]; 9], Some(vec![Idle; 9]))
                .unwrap();
        let rep = evaluate(&constant_model(Idle), &all_idle).unwrap();
        assert_eq!(rep.accuracy_pct, 100.0);
        assert_eq!(rep.build_time_s, 0.25);

        let rep = evaluate(&constant_model(Idle), &toy(70)).unwrap();
        assert!((rep.accuracy_pct - 100.0 / 7.0).abs() < 1e-12);
        assert_eq!(format!("{:.4}", rep.accuracy_pct), "14.2857");
        for a in Activity::ALL {
            assert_eq!(rep.confusion[a.index()].iter().sum::<u64>(), 10);
        }
        assert_eq!(rep.confusion.iter().flatten().sum::<u64>(), 70);
    }

    #[test]
    fn accuracy_two_ways() {
        let d = toy(140);
        let (tr, te) = shuffle_split(&d, 0.7, 3).unwrap();
        let m = crate::learn::train_tree(&tr, &TreeParams::default()).unwrap();
        let rep = evaluate(&m, &te).unwrap();
        let direct =
            m.predict_dataset(&te).unwrap().iter().zip(te.labels().unwrap()).filter(|(p, l)| p.activity == **l).count();
        assert_eq!(rep.correct(), direct as u64);
        assert_eq!(rep.accuracy_pct, 100.0 * direct as f64 / te.len() as f64);
    }

    #[test]
    fn unlabeled_test_set_rejected() {
        let d = FeatureDataset::new(FeatureId::all().take(2).collect(), vec![vec![0.0, 1.0]], None).unwrap();
        assert!(matches!(evaluate(&constant_model(Idle), &d), Err(EvalError::MissingLabels)));
    }

    #[test]
    fn subset_parsing() {
        assert_eq!(FeatureSubset::parse("all").unwrap(), FeatureSubset::All);
        let FeatureSubset::Named(n) = FeatureSubset::parse("@table3:1.2").unwrap() else { panic!() };
        assert_eq!(n.len(), 10);
        let FeatureSubset::Named(n) = FeatureSubset::parse("meanaccx, fqraccz").unwrap() else { panic!() };
        assert_eq!(n, ["meanaccx", "fqraccz"]);
        assert!(FeatureSubset::parse("@table3:9.9").is_err());
        assert!(FeatureSubset::parse("meanaccx,meanaccx").is_err());
        for row in ["1.2", "2.2", "3.2", "4.2"] {
            let ids = FeatureId::parse_list(table3_subset(row).unwrap()).unwrap();
            assert_eq!(ids.len(), [10, 11, 7, 8][["1.2", "2.2", "3.2", "4.2"].iter().position(|r| *r == row).unwrap()]);
        }
    }

    #[test]
    fn roster_covers_all_rows() {
        let plan = table3_plan();
        let labels: Vec<&str> = plan.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["1.1", "1.2", "2.1", "2.2", "3.1", "3.2", "4.1", "4.2", "5.1"]);
        assert_eq!(plan[8].classifier, ClassifierSpec::default_for(ClassifierKind::Knn));
    }

    #[test]
    fn failed_rows_do_not_stop_the_run() {
        let d = toy(70);
        let plan = vec![
            PlanRow::new("a", ClassifierSpec::Nb, FeatureSubset::All),
            PlanRow::new(
                "b",
                ClassifierSpec::Knn(crate::learn::KnnParams { k: 1000, standardize: true }),
                FeatureSubset::All,
            ),
            PlanRow::new("c", ClassifierSpec::Nb, FeatureSubset::Named(vec!["meanaccx".into()])),
            PlanRow::new("d", ClassifierSpec::Nb, FeatureSubset::Named(vec!["energyaccz".into()])),
        ];
        let rows = run_benchmark(&plan, &d, 2, 0.7, SplitMode::Shared).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].outcome.is_ok());
        assert!(rows[1].outcome.is_err());
        assert!(rows[2].outcome.is_ok());
        assert!(rows[3].outcome.is_err());
        let table = render_table(&rows);
        assert!(table.contains("FAILED"));
        assert_eq!(table.lines().count(), 6);
        assert!(matches!(run_benchmark(&[], &d, 2, 0.7, SplitMode::Shared), Err(EvalError::EmptyPlan)));
    }

    #[test]
    fn shared_split_means_shared_test_set() {
        let d = toy(140);
        let plan = vec![
            PlanRow::new("x", ClassifierSpec::Nb, FeatureSubset::All),
            PlanRow::new("y", ClassifierSpec::Tree(TreeParams::default()), FeatureSubset::All),
        ];
        let rows = run_benchmark(&plan, &d, 9, 0.7, SplitMode::Shared).unwrap();
        let a = rows[0].outcome.as_ref().unwrap();
        let b = rows[1].outcome.as_ref().unwrap();
        for t in 0..7 {
            assert_eq!(a.confusion[t].iter().sum::<u64>(), b.confusion[t].iter().sum::<u64>());
        }
        let per_row = run_benchmark(&plan, &d, 9, 0.7, SplitMode::PerRow).unwrap();
        assert_eq!(per_row[1].outcome.as_ref().unwrap().seed, Some(10));
    }

    #[test]
    fn records_roundtrip() {
        let d = toy(70);
        let plan = vec![
            PlanRow::new("1.1", ClassifierSpec::Nb, FeatureSubset::All),
            PlanRow::new(
                "bad",
                ClassifierSpec::Knn(crate::learn::KnnParams { k: 1000, standardize: true }),
                FeatureSubset::All,
            ),
        ];
        let rows = run_benchmark(&plan, &d, 4, 0.7, SplitMode::Shared).unwrap();
        let mut buf = Vec::new();
        write_records(&mut buf, &rows).unwrap();
        assert_eq!(read_records(buf.as_slice()).unwrap(), rows);
        let nb = train_nb(&d).unwrap();
        assert_eq!(nb.n_train, 70);
    }
}
