//! Metrics, confusion matrices, threshold sweeps, and report emission.

use std::io::Write;

use ndarray::Array2;
use thiserror::Error;

use crate::decision::{
    center_distances, distance_cascade, score_cascade, ClassCenters, Method, ThresholdError,
    Thresholds,
};
use crate::flow::LabeledSample;
use crate::neural::{batch_matrix, NeuralError};
use crate::pipeline::Pipeline;
use crate::types::{Label, LABEL_COUNT};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("sweep values must be strictly increasing ({context})")]
    NotIncreasing { context: String },
    #[error("sweep value {value} violates the threshold invariants: {source}")]
    BadSweepValue {
        value: f64,
        source: ThresholdError,
    },
    #[error("expected a {expected} pipeline, got {found}")]
    MethodMismatch { expected: Method, found: Method },
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// 6×6 counts; rows are true labels in dataset order, columns predictions
/// (VPN is the sixth of each).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: [[u64; LABEL_COUNT]; LABEL_COUNT],
}

impl Default for ConfusionMatrix {
    fn default() -> Self {
        ConfusionMatrix {
            counts: [[0; LABEL_COUNT]; LABEL_COUNT],
        }
    }
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: Label, predicted: Label) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn count(&self, truth: Label, predicted: Label) -> u64 {
        self.counts[truth.index()][predicted.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, truth: Label) -> u64 {
        self.counts[truth.index()].iter().sum()
    }

    pub fn column_total(&self, predicted: Label) -> u64 {
        self.counts.iter().map(|row| row[predicted.index()]).sum()
    }

    pub fn diagonal_total(&self) -> u64 {
        (0..LABEL_COUNT).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.diagonal_total() as f64 / self.total() as f64
    }

    /// TP / (TP + FP); `None` when nothing was predicted as this label.
    pub fn precision(&self, label: Label) -> Option<f64> {
        let predicted = self.column_total(label);
        (predicted > 0).then(|| self.count(label, label) as f64 / predicted as f64)
    }

    /// TP / (TP + FN); `None` when the label never occurs in the test set.
    pub fn recall(&self, label: Label) -> Option<f64> {
        let actual = self.row_total(label);
        (actual > 0).then(|| self.count(label, label) as f64 / actual as f64)
    }

    /// Count of samples predicted as VPN.
    pub fn vpn_predictions(&self) -> u64 {
        self.column_total(Label::VPN)
    }
}

/// Per-class and overall metrics for one evaluation. Undefined-denominator
/// precision/recall values are carried as `None`, never silently as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub method: Method,
    pub thresholds: Thresholds,
    pub precision: [Option<f64>; LABEL_COUNT],
    pub recall: [Option<f64>; LABEL_COUNT],
    pub accuracy: f64,
    /// Recall of the VPN label: the fraction of true-VPN samples rejected
    /// into VPN.
    pub vpn_rejection_rate: Option<f64>,
}

impl MetricsReport {
    fn from_matrix(matrix: &ConfusionMatrix, method: Method, thresholds: Thresholds) -> Self {
        let mut precision = [None; LABEL_COUNT];
        let mut recall = [None; LABEL_COUNT];
        for label in Label::all() {
            precision[label.index()] = matrix.precision(label);
            recall[label.index()] = matrix.recall(label);
        }
        MetricsReport {
            method,
            thresholds,
            precision,
            recall,
            accuracy: matrix.accuracy(),
            vpn_rejection_rate: matrix.recall(Label::VPN),
        }
    }

    /// Mean of the defined per-class precisions.
    pub fn mean_precision(&self) -> Option<f64> {
        let defined: Vec<f64> = self.precision.iter().flatten().copied().collect();
        if defined.is_empty() {
            None
        } else {
            Some(defined.iter().sum::<f64>() / defined.len() as f64)
        }
    }
}

/// Classify every sample and tabulate the confusion matrix and metrics.
pub fn evaluate(
    samples: &[LabeledSample],
    pipeline: &Pipeline,
) -> Result<(ConfusionMatrix, MetricsReport), EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let features: Vec<&crate::types::ByteVector> = samples.iter().map(|s| &s.features).collect();
    let inputs = batch_matrix(&features);
    let decisions = pipeline.classify_batch(inputs.view())?;

    let mut matrix = ConfusionMatrix::default();
    for (sample, decision) in samples.iter().zip(&decisions) {
        matrix.record(sample.label, decision.predicted_label());
    }
    let report = MetricsReport::from_matrix(&matrix, pipeline.method, pipeline.thresholds);
    Ok((matrix, report))
}

/// Which threshold a sweep varies: lambda for the score method, eta for the
/// distance method. The cascade partners (mu, delta) stay fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Lambda,
    Eta,
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepAxis::Lambda => write!(f, "lambda"),
            SweepAxis::Eta => write!(f, "eta"),
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lambda" => Ok(SweepAxis::Lambda),
            "eta" => Ok(SweepAxis::Eta),
            other => Err(format!("unknown sweep axis {other:?} (expected lambda or eta)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
    pub report: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
}

/// Evaluate the pipeline at each threshold value. Both networks' scores are
/// computed once and reused across thresholds (decisions are pure in the
/// threshold), which is observationally identical to re-running evaluate().
pub fn sweep(
    samples: &[LabeledSample],
    pipeline: &Pipeline,
    axis: SweepAxis,
    values: &[f64],
) -> Result<SweepGrid, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    if values.is_empty() {
        return Err(EvalError::NotIncreasing {
            context: "no sweep values given".to_string(),
        });
    }
    for pair in values.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(EvalError::NotIncreasing {
                context: format!("{} does not increase to {}", pair[0], pair[1]),
            });
        }
    }
    let thresholds_at = |value: f64| -> Result<Thresholds, EvalError> {
        match axis {
            SweepAxis::Lambda => pipeline.thresholds.with_lambda(value),
            SweepAxis::Eta => pipeline.thresholds.with_eta(value),
        }
        .map_err(|source| EvalError::BadSweepValue { value, source })
    };
    // Validate every value up front so an invariant violation names it
    // before any work happens.
    for &value in values {
        thresholds_at(value)?;
    }

    // One forward pass per network over the whole set; thresholds only
    // re-partition the cached scores. The widest sweep threshold can route
    // any row to net2, so net2 runs over all rows here.
    let features: Vec<&crate::types::ByteVector> = samples.iter().map(|s| &s.features).collect();
    let inputs = batch_matrix(&features);
    let y1 = pipeline.net1.scores_batch(inputs.view())?;
    let y2 = pipeline.net2.scores_batch(inputs.view())?;
    let centers = ClassCenters::default();

    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let thresholds = thresholds_at(value)?;
        let mut matrix = ConfusionMatrix::default();
        for (i, sample) in samples.iter().enumerate() {
            let y1_row = row_scores(&y1, i)?;
            let y2_row = row_scores(&y2, i)?;
            let decision = match pipeline.method {
                Method::Score => score_cascade(&y1_row, &y2_row, &thresholds),
                Method::Distance => {
                    let d1 = center_distances(&y1_row, &centers);
                    let d2 = center_distances(&y2_row, &centers);
                    distance_cascade(&d1, &d2, &thresholds)
                }
            };
            matrix.record(sample.label, decision.predicted_label());
        }
        let report = MetricsReport::from_matrix(&matrix, pipeline.method, thresholds);
        points.push(SweepPoint {
            threshold: value,
            confusion: matrix,
            report,
        });
    }
    Ok(SweepGrid { axis, points })
}

fn row_scores(y: &Array2<f64>, i: usize) -> Result<crate::types::ScoreVector, EvalError> {
    Ok(crate::neural::score_vector_from_row(y.row(i))?)
}

/// Paired evaluation of a score pipeline and a distance pipeline over the
/// same test set, with the accuracy delta (distance minus score). No claim
/// is made about the delta's sign.
#[derive(Debug, Clone)]
pub struct MethodComparison {
    pub score: MetricsReport,
    pub distance: MetricsReport,
    pub accuracy_delta: f64,
}

pub fn compare_methods(
    samples: &[LabeledSample],
    score_pipeline: &Pipeline,
    distance_pipeline: &Pipeline,
) -> Result<MethodComparison, EvalError> {
    for (pipeline, expected) in [
        (score_pipeline, Method::Score),
        (distance_pipeline, Method::Distance),
    ] {
        if pipeline.method != expected {
            return Err(EvalError::MethodMismatch {
                expected,
                found: pipeline.method,
            });
        }
    }
    let (_, score) = evaluate(samples, score_pipeline)?;
    let (_, distance) = evaluate(samples, distance_pipeline)?;
    let accuracy_delta = distance.accuracy - score.accuracy;
    Ok(MethodComparison {
        score,
        distance,
        accuracy_delta,
    })
}

fn write_optional(dest: &mut impl Write, value: Option<f64>) -> std::io::Result<()> {
    match value {
        Some(v) => write!(dest, "{v}"),
        None => Ok(()),
    }
}

/// Report CSV: `class,precision,recall` rows in label order, then an
/// `overall,<accuracy>,` row. Absent metrics are empty fields.
pub fn write_report_csv<W: Write>(report: &MetricsReport, mut dest: W) -> Result<(), EvalError> {
    writeln!(dest, "class,precision,recall")?;
    for label in Label::all() {
        write!(dest, "{},", label.name())?;
        write_optional(&mut dest, report.precision[label.index()])?;
        write!(dest, ",")?;
        write_optional(&mut dest, report.recall[label.index()])?;
        writeln!(dest)?;
    }
    writeln!(dest, "overall,{},", report.accuracy)?;
    Ok(())
}

/// Sweep CSV: `threshold,accuracy,vpn_recall,mean_precision` per point.
pub fn write_sweep_csv<W: Write>(grid: &SweepGrid, mut dest: W) -> Result<(), EvalError> {
    writeln!(dest, "threshold,accuracy,vpn_recall,mean_precision")?;
    for point in &grid.points {
        write!(dest, "{},{},", point.threshold, point.report.accuracy)?;
        write_optional(&mut dest, point.report.vpn_rejection_rate)?;
        write!(dest, ",")?;
        write_optional(&mut dest, point.report.mean_precision())?;
        writeln!(dest)?;
    }
    Ok(())
}

/// Confusion-matrix CSV: header `true\predicted` with label columns, one
/// row per true label.
pub fn write_confusion_csv<W: Write>(
    matrix: &ConfusionMatrix,
    mut dest: W,
) -> Result<(), EvalError> {
    write!(dest, "true\\predicted")?;
    for label in Label::all() {
        write!(dest, ",{}", label.name())?;
    }
    writeln!(dest)?;
    for truth in Label::all() {
        write!(dest, "{}", truth.name())?;
        for predicted in Label::all() {
            write!(dest, ",{}", matrix.count(truth, predicted))?;
        }
        writeln!(dest)?;
    }
    Ok(())
}

/// Loss-curve CSV: `epoch,train_loss,test_loss`.
pub fn write_loss_curve_csv<W: Write>(
    curve: &[crate::neural::EpochLoss],
    mut dest: W,
) -> Result<(), EvalError> {
    writeln!(dest, "epoch,train_loss,test_loss")?;
    for point in curve {
        writeln!(dest, "{},{},{}", point.epoch, point.train_loss, point.test_loss)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{MlpParameters, NetworkParameters};
    use crate::types::{ByteVector, CLASS_COUNT, FEATURE_LEN};

    fn matrix_from_pairs(pairs: &[(u8, u8)]) -> ConfusionMatrix {
        let mut m = ConfusionMatrix::default();
        for &(t, p) in pairs {
            m.record(Label::new(t).unwrap(), Label::new(p).unwrap());
        }
        m
    }

    #[test]
    fn perfect_classifier_metrics() {
        let pairs: Vec<(u8, u8)> = (0..6).flat_map(|l| std::iter::repeat_n((l, l), 4)).collect();
        let m = matrix_from_pairs(&pairs);
        assert_eq!(m.total(), 24);
        assert_eq!(m.diagonal_total(), 24);
        assert_eq!(m.accuracy(), 1.0);
        for label in Label::all() {
            assert_eq!(m.precision(label), Some(1.0));
            assert_eq!(m.recall(label), Some(1.0));
        }
    }

    #[test]
    fn constant_rejector_metrics() {
        let pairs: Vec<(u8, u8)> = (0..6).map(|l| (l, 5)).collect();
        let m = matrix_from_pairs(&pairs);
        assert_eq!(m.recall(Label::VPN), Some(1.0));
        for label in Label::all().filter(|l| !l.is_vpn()) {
            assert_eq!(m.recall(label), Some(0.0));
            // Nothing predicted as this class: precision is absent.
            assert_eq!(m.precision(label), None);
        }
        assert_eq!(m.vpn_predictions(), 6);
    }

    #[test]
    fn hand_computed_twenty_sample_fixture() {
        // 20 samples over labels {0, 1, 5}; tabulated by hand:
        //   truth 0 (8 samples): predicted 0 ×6, 1 ×1, 5 ×1
        //   truth 1 (7 samples): predicted 1 ×5, 0 ×2
        //   truth 5 (5 samples): predicted 5 ×4, 0 ×1
        let pairs = [
            (0, 0), (0, 0), (0, 0), (0, 0), (0, 0), (0, 0), (0, 1), (0, 5),
            (1, 1), (1, 1), (1, 1), (1, 1), (1, 1), (1, 0), (1, 0),
            (5, 5), (5, 5), (5, 5), (5, 5), (5, 0),
        ];
        let m = matrix_from_pairs(&pairs);
        assert_eq!(m.total(), 20);
        // precision_0 = 6 / (6 + 2 + 1) = 2/3; recall_0 = 6/8.
        assert!((m.precision(Label::CHAT).unwrap() - 6.0 / 9.0).abs() < 1e-12);
        assert!((m.recall(Label::CHAT).unwrap() - 0.75).abs() < 1e-12);
        // precision_1 = 5/6; recall_1 = 5/7.
        assert!((m.precision(Label::EMAIL).unwrap() - 5.0 / 6.0).abs() < 1e-12);
        assert!((m.recall(Label::EMAIL).unwrap() - 5.0 / 7.0).abs() < 1e-12);
        // precision_5 = 4/5; recall_5 = 4/5.
        assert!((m.precision(Label::VPN).unwrap() - 0.8).abs() < 1e-12);
        assert!((m.recall(Label::VPN).unwrap() - 0.8).abs() < 1e-12);
        // accuracy = (6 + 5 + 4) / 20.
        assert!((m.accuracy() - 0.75).abs() < 1e-12);
        // Classes 2..4 absent: both metrics undefined.
        assert_eq!(m.precision(Label::FTP), None);
        assert_eq!(m.recall(Label::FTP), None);
    }

    #[test]
    fn recall_weighted_by_frequency_sums_to_accuracy() {
        let pairs = [
            (0, 0), (0, 1), (1, 1), (1, 1), (2, 5), (5, 5), (5, 0), (3, 3),
        ];
        let m = matrix_from_pairs(&pairs);
        let total = m.total() as f64;
        let weighted: f64 = Label::all()
            .filter_map(|l| m.recall(l).map(|r| r * m.row_total(l) as f64 / total))
            .sum();
        assert!((weighted - m.accuracy()).abs() < 1e-12);
    }

    fn tiny_pipeline(method: Method) -> Pipeline {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        Pipeline {
            method,
            net1: NetworkParameters::Mlp(MlpParameters::seeded_with_dims(
                FEATURE_LEN,
                10,
                6,
                CLASS_COUNT,
                &mut rng,
            )),
            net2: NetworkParameters::Mlp(MlpParameters::seeded_with_dims(
                FEATURE_LEN,
                10,
                6,
                CLASS_COUNT,
                &mut rng,
            )),
            thresholds: Thresholds::defaults(),
        }
    }

    fn tiny_samples() -> Vec<LabeledSample> {
        (0..30u32)
            .map(|i| {
                let bytes: Vec<u8> = (0..200).map(|j| ((i * 41 + j * 13) % 256) as u8).collect();
                LabeledSample {
                    features: ByteVector::from_bytes(&bytes),
                    label: Label::new((i % 6) as u8).unwrap(),
                }
            })
            .collect()
    }

    #[test]
    fn evaluate_rejects_empty_test_set() {
        assert!(matches!(
            evaluate(&[], &tiny_pipeline(Method::Score)),
            Err(EvalError::EmptyTestSet)
        ));
    }

    #[test]
    fn evaluate_row_sums_match_class_counts() {
        let samples = tiny_samples();
        let (matrix, report) = evaluate(&samples, &tiny_pipeline(Method::Score)).unwrap();
        assert_eq!(matrix.total(), samples.len() as u64);
        for label in Label::all() {
            let expected = samples.iter().filter(|s| s.label == label).count() as u64;
            assert_eq!(matrix.row_total(label), expected);
        }
        assert!((0.0..=1.0).contains(&report.accuracy));
    }

    #[test]
    fn single_value_sweep_equals_evaluate() {
        let samples = tiny_samples();
        for (method, axis, value) in [
            (Method::Score, SweepAxis::Lambda, 0.5),
            (Method::Distance, SweepAxis::Eta, 1.0),
        ] {
            let pipeline = tiny_pipeline(method);
            let grid = sweep(&samples, &pipeline, axis, &[value]).unwrap();
            assert_eq!(grid.points.len(), 1);
            let (matrix, report) = evaluate(&samples, &pipeline).unwrap();
            assert_eq!(grid.points[0].confusion, matrix);
            assert_eq!(grid.points[0].report, report);
        }
    }

    #[test]
    fn sweep_vpn_counts_monotone_in_lambda() {
        let samples = tiny_samples();
        let pipeline = tiny_pipeline(Method::Score);
        let values: Vec<f64> = (1..=8).map(|i| i as f64 * 0.1).collect();
        let grid = sweep(&samples, &pipeline, SweepAxis::Lambda, &values).unwrap();
        let counts: Vec<u64> = grid.points.iter().map(|p| p.confusion.vpn_predictions()).collect();
        for pair in counts.windows(2) {
            assert!(pair[1] >= pair[0], "vpn counts not monotone: {counts:?}");
        }
    }

    #[test]
    fn sweep_matches_unchached_reevaluation() {
        // Caching transparency: each grid point equals a fresh evaluate()
        // with that threshold substituted.
        let samples = tiny_samples();
        let mut pipeline = tiny_pipeline(Method::Distance);
        pipeline.thresholds = Thresholds::new(0.5, 0.9, 2.0, 0.05).unwrap();
        let values = [0.4, 0.8, 1.2];
        let grid = sweep(&samples, &pipeline, SweepAxis::Eta, &values).unwrap();
        for point in &grid.points {
            let mut fresh = pipeline.clone();
            fresh.thresholds = pipeline.thresholds.with_eta(point.threshold).unwrap();
            let (matrix, _) = evaluate(&samples, &fresh).unwrap();
            assert_eq!(point.confusion, matrix);
        }
    }

    #[test]
    fn sweep_rejects_bad_axes() {
        let samples = tiny_samples();
        let pipeline = tiny_pipeline(Method::Score);
        assert!(matches!(
            sweep(&samples, &pipeline, SweepAxis::Lambda, &[0.5, 0.4]),
            Err(EvalError::NotIncreasing { .. })
        ));
        // lambda >= mu = 0.9 violates the invariant and names the value.
        match sweep(&samples, &pipeline, SweepAxis::Lambda, &[0.5, 0.95]) {
            Err(EvalError::BadSweepValue { value, .. }) => assert_eq!(value, 0.95),
            other => panic!("expected BadSweepValue, got {other:?}"),
        }
    }

    #[test]
    fn compare_methods_self_and_mismatch() {
        let samples = tiny_samples();
        let score = tiny_pipeline(Method::Score);
        let distance = tiny_pipeline(Method::Distance);
        let comparison = compare_methods(&samples, &score, &distance).unwrap();
        assert!(comparison.accuracy_delta.is_finite());
        assert!(
            (comparison.accuracy_delta
                - (comparison.distance.accuracy - comparison.score.accuracy))
                .abs()
                < 1e-15
        );

        assert!(matches!(
            compare_methods(&samples, &distance, &distance),
            Err(EvalError::MethodMismatch { .. })
        ));
    }

    #[test]
    fn report_csv_shape_and_absent_fields() {
        let pairs: Vec<(u8, u8)> = vec![(0, 0), (0, 0), (1, 0), (5, 5)];
        let m = matrix_from_pairs(&pairs);
        let report = MetricsReport::from_matrix(&m, Method::Score, Thresholds::defaults());
        let mut out = Vec::new();
        write_report_csv(&report, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "class,precision,recall");
        assert_eq!(lines.len(), 8);
        // Email was never predicted: precision empty, recall 0.
        assert_eq!(lines[2], "Email,,0");
        // Ftp absent entirely: both fields empty.
        assert_eq!(lines[3], "Ftp,,");
        assert!(lines[7].starts_with("overall,0.75,"));
    }

    #[test]
    fn sweep_csv_shape() {
        let samples = tiny_samples();
        let pipeline = tiny_pipeline(Method::Score);
        let grid = sweep(&samples, &pipeline, SweepAxis::Lambda, &[0.2, 0.5]).unwrap();
        let mut out = Vec::new();
        write_sweep_csv(&grid, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "threshold,accuracy,vpn_recall,mean_precision");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0.2,"));
    }
}
