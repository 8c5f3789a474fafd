//! Accuracy tables, error-cell confusion, negation-stratified label skew
//! and cross-template spread.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Mode;
use crate::instance::LOGIC_TAGS;
use crate::label::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub instance_id: String,
    pub gold: Label,
    pub predicted: Label,
    pub mode: Mode,
    pub template_id: String,
    /// Whether the original statement carries a logical negation.
    pub has_negation: bool,
    pub depth: i32,
    #[serde(default)]
    pub logic_tags: Vec<String>,
}

impl PredictionRecord {
    pub fn correct(&self) -> bool {
        self.gold == self.predicted
    }
}

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("no prediction records")]
    EmptyInput,
    #[error("template spread needs at least two templates, got {0}")]
    SingleTemplate(usize),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    None,
    Depth,
    LogicTag,
    Template,
}

impl GroupBy {
    pub fn name(self) -> &'static str {
        match self {
            GroupBy::None => "overall",
            GroupBy::Depth => "depth",
            GroupBy::LogicTag => "logic_tag",
            GroupBy::Template => "template",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub group: String,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Exact-match accuracy per group. A record with several logic tags counts
/// toward each of them; untagged records fall in group `none`.
pub fn accuracy(records: &[PredictionRecord], group_by: GroupBy) -> Result<Vec<AccuracyRow>, AnalyticsError> {
    if records.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    // sort keys keep the row order stable: depth numerically, tags in
    // canonical order, templates by id
    let mut groups: BTreeMap<(i64, String), (usize, usize)> = BTreeMap::new();
    let mut add = |key: (i64, String), ok: bool| {
        let e = groups.entry(key).or_default();
        e.0 += 1;
        e.1 += ok as usize;
    };
    for r in records {
        let ok = r.correct();
        match group_by {
            GroupBy::None => add((0, "all".into()), ok),
            GroupBy::Depth => add((r.depth as i64, r.depth.to_string()), ok),
            GroupBy::Template => add((0, r.template_id.clone()), ok),
            GroupBy::LogicTag => {
                if r.logic_tags.is_empty() {
                    add((LOGIC_TAGS.len() as i64 + 1, "none".into()), ok);
                }
                for t in &r.logic_tags {
                    let rank = LOGIC_TAGS.iter().position(|x| x == t).unwrap_or(LOGIC_TAGS.len()) as i64;
                    add((rank, t.clone()), ok);
                }
            }
        }
    }
    Ok(groups
        .into_iter()
        .map(|((_, group), (n, correct))| AccuracyRow { group, n, correct, accuracy: correct as f64 / n as f64 })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionStats {
    pub total: usize,
    /// Counts indexed `[gold][predicted]` in E, C, N order.
    pub matrix: [[usize; 3]; 3],
    pub errors: usize,
    /// Gold E predicted C.
    pub tf: usize,
    /// Gold C predicted E.
    pub ft: usize,
    /// Share of all errors per off-diagonal cell, keyed `"E->C"` etc.
    pub error_share: BTreeMap<String, f64>,
}

impl ConfusionStats {
    pub fn tf_share(&self) -> f64 {
        self.error_share["E->C"]
    }

    pub fn ft_share(&self) -> f64 {
        self.error_share["C->E"]
    }
}

pub fn confusion_tf_ft(records: &[PredictionRecord]) -> Result<ConfusionStats, AnalyticsError> {
    if records.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let mut matrix = [[0usize; 3]; 3];
    for r in records {
        matrix[r.gold.index()][r.predicted.index()] += 1;
    }
    let errors = records.iter().filter(|r| !r.correct()).count();
    let mut error_share = BTreeMap::new();
    for g in Label::ALL {
        for p in Label::ALL {
            if g != p {
                let count = matrix[g.index()][p.index()];
                let share = if errors == 0 { 0.0 } else { count as f64 / errors as f64 };
                error_share.insert(format!("{g}->{p}"), share);
            }
        }
    }
    Ok(ConfusionStats {
        total: records.len(),
        matrix,
        errors,
        tf: matrix[Label::Entailment.index()][Label::Contradiction.index()],
        ft: matrix[Label::Contradiction.index()][Label::Entailment.index()],
        error_share,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelRatios {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "N")]
    pub n: f64,
}

impl LabelRatios {
    fn from_counts(counts: [usize; 3]) -> LabelRatios {
        let total: usize = counts.iter().sum();
        let r = |i: usize| counts[i] as f64 / total as f64;
        LabelRatios { e: r(0), c: r(1), n: r(2) }
    }

    pub fn get(&self, label: Label) -> f64 {
        match label {
            Label::Entailment => self.e,
            Label::Contradiction => self.c,
            Label::Neutral => self.n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub n: usize,
    pub gold: LabelRatios,
    pub predicted: LabelRatios,
}

/// Label ratios split by whether the statement carries a negation. An empty
/// stratum is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegationSplit {
    pub with_not: Option<Stratum>,
    pub without_not: Option<Stratum>,
}

pub fn negation_split(records: &[PredictionRecord]) -> Result<NegationSplit, AnalyticsError> {
    if records.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let stratum = |neg: bool| {
        let mut gold = [0usize; 3];
        let mut pred = [0usize; 3];
        let mut n = 0;
        for r in records.iter().filter(|r| r.has_negation == neg) {
            gold[r.gold.index()] += 1;
            pred[r.predicted.index()] += 1;
            n += 1;
        }
        (n > 0).then(|| Stratum { n, gold: LabelRatios::from_counts(gold), predicted: LabelRatios::from_counts(pred) })
    };
    Ok(NegationSplit { with_not: stratum(true), without_not: stratum(false) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplatePoint {
    pub template_id: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadStats {
    pub points: Vec<TemplatePoint>,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub iqr: f64,
    /// Points beyond 1.5 IQR from the quartiles.
    pub outliers: Vec<TemplatePoint>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn spread_of(points: Vec<TemplatePoint>) -> SpreadStats {
    let mut values: Vec<f64> = points.iter().map(|p| p.accuracy).collect();
    values.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&values, 0.25), quantile(&values, 0.5), quantile(&values, 0.75));
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let outliers = points.iter().filter(|p| p.accuracy < lo || p.accuracy > hi).cloned().collect();
    SpreadStats { min: values[0], q1, median, q3, max: values[values.len() - 1], iqr, outliers, points }
}

/// Per-template accuracy spread, overall (`all`) and per logic tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpread {
    pub by_tag: BTreeMap<String, SpreadStats>,
}

pub fn template_spread(records: &[PredictionRecord]) -> Result<TemplateSpread, AnalyticsError> {
    if records.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let mut by_template: BTreeMap<&str, Vec<PredictionRecord>> = BTreeMap::new();
    for r in records {
        by_template.entry(&r.template_id).or_default().push(r.clone());
    }
    if by_template.len() < 2 {
        return Err(AnalyticsError::SingleTemplate(by_template.len()));
    }
    let mut per_tag: BTreeMap<String, Vec<TemplatePoint>> = BTreeMap::new();
    for (template, recs) in &by_template {
        let overall = accuracy(recs, GroupBy::None)?;
        per_tag
            .entry("all".into())
            .or_default()
            .push(TemplatePoint { template_id: template.to_string(), accuracy: overall[0].accuracy });
        for row in accuracy(recs, GroupBy::LogicTag)? {
            per_tag
                .entry(row.group)
                .or_default()
                .push(TemplatePoint { template_id: template.to_string(), accuracy: row.accuracy });
        }
    }
    Ok(TemplateSpread { by_tag: per_tag.into_iter().map(|(tag, pts)| (tag, spread_of(pts))).collect() })
}

/// Every diagnostic for one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub mode: Mode,
    pub n: usize,
    pub accuracy: f64,
    pub by_depth: Vec<AccuracyRow>,
    pub by_logic_tag: Vec<AccuracyRow>,
    pub by_template: Vec<AccuracyRow>,
    pub confusion: ConfusionStats,
    pub negation_split: NegationSplit,
    pub spread: Option<TemplateSpread>,
}

pub fn mode_report(mode: Mode, records: &[PredictionRecord]) -> Result<ModeReport, AnalyticsError> {
    let spread = match template_spread(records) {
        Ok(s) => Some(s),
        Err(AnalyticsError::SingleTemplate(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(ModeReport {
        mode,
        n: records.len(),
        accuracy: accuracy(records, GroupBy::None)?[0].accuracy,
        by_depth: accuracy(records, GroupBy::Depth)?,
        by_logic_tag: accuracy(records, GroupBy::LogicTag)?,
        by_template: accuracy(records, GroupBy::Template)?,
        confusion: confusion_tf_ft(records)?,
        negation_split: negation_split(records)?,
        spread,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub modes: Vec<ModeReport>,
    /// Instances whose statement could not be negated; they were scored
    /// baseline-only.
    pub unsupported_negation: usize,
}

impl EvaluationReport {
    pub fn mode(&self, mode: Mode) -> Option<&ModeReport> {
        self.modes.iter().find(|m| m.mode == mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AnalyticsError + '_ {
    move |source| AnalyticsError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> AnalyticsError + '_ {
    move |e| AnalyticsError::Io { path: path.to_path_buf(), source: e.into() }
}

/// Path of the long-format spread table written next to a CSV report.
pub fn spread_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_spread.csv"))
}

/// JSON: one pretty-printed file. CSV: one long-format accuracy table at
/// `path` (`mode,table,group,n,correct,accuracy`) plus a spread table for
/// box plots at [`spread_path`].
pub fn emit_report(
    report: &EvaluationReport,
    format: ReportFormat,
    path: &Path,
) -> Result<Vec<PathBuf>, AnalyticsError> {
    match format {
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(report).expect("report serializes");
            text.push('\n');
            std::fs::write(path, text).map_err(io_err(path))?;
            Ok(vec![path.to_path_buf()])
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
            w.write_record(["mode", "table", "group", "n", "correct", "accuracy"]).map_err(csv_err(path))?;
            for m in &report.modes {
                let overall = AccuracyRow {
                    group: "all".into(),
                    n: m.n,
                    correct: (m.accuracy * m.n as f64).round() as usize,
                    accuracy: m.accuracy,
                };
                let tables = [
                    (GroupBy::None, std::slice::from_ref(&overall)),
                    (GroupBy::Depth, &m.by_depth[..]),
                    (GroupBy::LogicTag, &m.by_logic_tag[..]),
                    (GroupBy::Template, &m.by_template[..]),
                ];
                for (table, rows) in tables {
                    for r in rows {
                        w.write_record([
                            m.mode.to_string(),
                            table.name().to_string(),
                            r.group.clone(),
                            r.n.to_string(),
                            r.correct.to_string(),
                            r.accuracy.to_string(),
                        ])
                        .map_err(csv_err(path))?;
                    }
                }
            }
            w.flush().map_err(io_err(path))?;

            let spath = spread_path(path);
            let mut w = csv::Writer::from_path(&spath).map_err(csv_err(&spath))?;
            w.write_record(["mode", "logic_tag", "template", "accuracy", "outlier"]).map_err(csv_err(&spath))?;
            for m in &report.modes {
                let Some(spread) = &m.spread else { continue };
                for (tag, stats) in &spread.by_tag {
                    for p in &stats.points {
                        let outlier = stats.outliers.contains(p);
                        w.write_record([
                            m.mode.to_string(),
                            tag.clone(),
                            p.template_id.clone(),
                            p.accuracy.to_string(),
                            outlier.to_string(),
                        ])
                        .map_err(csv_err(&spath))?;
                    }
                }
            }
            w.flush().map_err(io_err(&spath))?;
            Ok(vec![path.to_path_buf(), spath])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, gold: Label, predicted: Label) -> PredictionRecord {
        PredictionRecord {
            instance_id: id.into(),
            gold,
            predicted,
            mode: Mode::Baseline,
            template_id: "A1".into(),
            has_negation: false,
            depth: 0,
            logic_tags: vec![],
        }
    }

    use Label::{Contradiction as C, Entailment as E, Neutral as N};

    #[test]
    fn three_of_four() {
        let rs = vec![rec("a", E, E), rec("b", C, C), rec("c", N, N), rec("d", E, C)];
        assert_eq!(accuracy(&rs, GroupBy::None).unwrap()[0].accuracy, 0.75);
    }

    #[test]
    fn by_depth_rows() {
        let mut rs = vec![rec("a", E, E), rec("b", C, E), rec("c", N, N)];
        rs[1].depth = 1;
        rs[2].depth = 10;
        let rows = accuracy(&rs, GroupBy::Depth).unwrap();
        let groups: Vec<&str> = rows.iter().map(|r| r.group.as_str()).collect();
        assert_eq!(groups, ["0", "1", "10"]);
    }

    #[test]
    fn by_tag_canonical_order() {
        let mut a = rec("a", E, E);
        a.logic_tags = vec!["negation".into(), "implication".into()];
        let mut b = rec("b", E, C);
        b.logic_tags = vec!["conjunction".into()];
        let rows = accuracy(&[a, b, rec("c", N, N)], GroupBy::LogicTag).unwrap();
        let groups: Vec<&str> = rows.iter().map(|r| r.group.as_str()).collect();
        assert_eq!(groups, ["conjunction", "negation", "implication", "none"]);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(accuracy(&[], GroupBy::None), Err(AnalyticsError::EmptyInput)));
        assert!(matches!(confusion_tf_ft(&[]), Err(AnalyticsError::EmptyInput)));
        assert!(matches!(negation_split(&[]), Err(AnalyticsError::EmptyInput)));
    }

    #[test]
    fn confusion_cells() {
        let all_right = confusion_tf_ft(&[rec("a", E, E), rec("b", N, N)]).unwrap();
        assert!(all_right.error_share.values().all(|&v| v == 0.0));
        let one_tf = confusion_tf_ft(&[rec("a", E, C), rec("b", N, N)]).unwrap();
        assert_eq!(one_tf.tf_share(), 1.0);
        assert_eq!(one_tf.tf, 1);
        assert_eq!(one_tf.ft, 0);
    }

    #[test]
    fn negation_split_absent_stratum() {
        let s = negation_split(&[rec("a", E, E), rec("b", C, E)]).unwrap();
        assert!(s.with_not.is_none());
        let w = s.without_not.unwrap();
        assert_eq!((w.gold.e, w.gold.c), (0.5, 0.5));
        assert_eq!(w.predicted.e, 1.0);
    }

    fn with_template(mut r: PredictionRecord, t: &str) -> PredictionRecord {
        r.template_id = t.into();
        r
    }

    #[test]
    fn spread_median_and_iqr() {
        let s = spread_of(
            [0.4, 0.5, 0.6]
                .iter()
                .enumerate()
                .map(|(i, &a)| TemplatePoint { template_id: format!("T{i}"), accuracy: a })
                .collect(),
        );
        assert!((s.median - 0.5).abs() < 1e-12);
        let flat = spread_of((0..4).map(|i| TemplatePoint { template_id: format!("T{i}"), accuracy: 0.7 }).collect());
        assert_eq!(flat.iqr, 0.0);
        assert!(flat.outliers.is_empty());
    }

    #[test]
    fn spread_outlier() {
        let pts: Vec<TemplatePoint> = [0.50, 0.51, 0.52, 0.53, 0.10]
            .iter()
            .enumerate()
            .map(|(i, &a)| TemplatePoint { template_id: format!("T{i}"), accuracy: a })
            .collect();
        let s = spread_of(pts);
        assert_eq!(s.outliers.len(), 1);
        assert_eq!(s.outliers[0].template_id, "T4");
    }

    #[test]
    fn single_template_rejected() {
        assert!(matches!(template_spread(&[rec("a", E, E)]), Err(AnalyticsError::SingleTemplate(1))));
        let rs = [with_template(rec("a", E, E), "A1"), with_template(rec("a", E, C), "A2")];
        let s = template_spread(&rs).unwrap();
        assert_eq!(s.by_tag["all"].points.len(), 2);
    }

    #[test]
    fn csv_and_json_emit() {
        let mut rs = vec![rec("a", E, E), rec("b", C, E)];
        rs[1].depth = 1;
        let report =
            EvaluationReport { modes: vec![mode_report(Mode::Baseline, &rs).unwrap()], unsupported_negation: 0 };
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("report.csv");
        let written = emit_report(&report, ReportFormat::Csv, &csv_path).unwrap();
        assert_eq!(written.len(), 2);
        let text = std::fs::read_to_string(&csv_path).unwrap();
        let depth_rows = text.lines().filter(|l| l.starts_with("baseline,depth,")).count();
        assert_eq!(depth_rows, 2);
        let json_path = dir.path().join("report.json");
        emit_report(&report, ReportFormat::Json, &json_path).unwrap();
        let first = std::fs::read(&json_path).unwrap();
        emit_report(&report, ReportFormat::Json, &json_path).unwrap();
        assert_eq!(first, std::fs::read(&json_path).unwrap());
    }

    #[test]
    fn unwritable_path() {
        let report = EvaluationReport {
            modes: vec![mode_report(Mode::Baseline, &[rec("a", E, E)]).unwrap()],
            unsupported_negation: 0,
        };
        let path = Path::new("/nonexistent-dir/deeper/report.json");
        let err = emit_report(&report, ReportFormat::Json, path).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/deeper/report.json"));
    }

    fn arb_record() -> impl Strategy<Value = PredictionRecord> {
        (0usize..3, 0usize..3, any::<bool>(), 0i32..4).prop_map(|(g, p, neg, d)| {
            let mut r = rec("x", Label::ALL[g], Label::ALL[p]);
            r.has_negation = neg;
            r.depth = d;
            r
        })
    }

    proptest! {
        #[test]
        fn accuracy_matches_error_cells(rs in proptest::collection::vec(arb_record(), 1..60)) {
            let acc = accuracy(&rs, GroupBy::None).unwrap()[0].accuracy;
            let c = confusion_tf_ft(&rs).unwrap();
            let off: usize = (0..3).flat_map(|g| (0..3).map(move |p| (g, p))).filter(|(g, p)| g != p).map(|(g, p)| c.matrix[g][p]).sum();
            prop_assert!((acc - (1.0 - off as f64 / rs.len() as f64)).abs() < 1e-12);
            if c.errors > 0 {
                prop_assert!((c.error_share.values().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn permutation_invariant(rs in proptest::collection::vec(arb_record(), 1..60)) {
            let mut rev = rs.clone();
            rev.reverse();
            prop_assert_eq!(confusion_tf_ft(&rs).unwrap(), confusion_tf_ft(&rev).unwrap());
            prop_assert_eq!(negation_split(&rs).unwrap(), negation_split(&rev).unwrap());
            prop_assert_eq!(accuracy(&rs, GroupBy::Depth).unwrap(), accuracy(&rev, GroupBy::Depth).unwrap());
        }
    }
}
