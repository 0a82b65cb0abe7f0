//! Open-set decision rules: score thresholding, distance-from-center
//! thresholding, and the two-network cascades that reject unconfident
//! inputs into the VPN class.

use thiserror::Error;

use crate::types::{Label, ScoreVector, CLASS_COUNT};

/// The two decision families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Score,
    Distance,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Score => write!(f, "score"),
            Method::Distance => write!(f, "distance"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "score" => Ok(Method::Score),
            "distance" => Ok(Method::Distance),
            other => Err(format!("unknown method {other:?} (expected score or distance)")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ThresholdError {
    #[error("mu ({mu}) must be greater than lambda ({lambda})")]
    MuNotAboveLambda { lambda: f64, mu: f64 },
    #[error("delta ({delta}) must be less than eta ({eta})")]
    DeltaNotBelowEta { delta: f64, eta: f64 },
    #[error("eta must be positive, got {0}")]
    EtaNotPositive(f64),
    #[error("delta must be positive, got {0}")]
    DeltaNotPositive(f64),
    #[error("threshold {0} is not finite")]
    NotFinite(f64),
}

/// The four decision thresholds: lambda/mu govern the score method,
/// eta/delta the distance method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    lambda: f64,
    mu: f64,
    eta: f64,
    delta: f64,
}

impl Thresholds {
    pub const DEFAULT_LAMBDA: f64 = 0.5;
    pub const DEFAULT_MU: f64 = 0.9;
    pub const DEFAULT_ETA: f64 = 1.0;
    pub const DEFAULT_DELTA: f64 = 0.1;

    pub fn new(lambda: f64, mu: f64, eta: f64, delta: f64) -> Result<Self, ThresholdError> {
        for v in [lambda, mu, eta, delta] {
            if !v.is_finite() {
                return Err(ThresholdError::NotFinite(v));
            }
        }
        if mu <= lambda {
            return Err(ThresholdError::MuNotAboveLambda { lambda, mu });
        }
        if eta <= 0.0 {
            return Err(ThresholdError::EtaNotPositive(eta));
        }
        if delta <= 0.0 {
            return Err(ThresholdError::DeltaNotPositive(delta));
        }
        if delta >= eta {
            return Err(ThresholdError::DeltaNotBelowEta { delta, eta });
        }
        Ok(Thresholds {
            lambda,
            mu,
            eta,
            delta,
        })
    }

    pub fn defaults() -> Self {
        Self::new(
            Self::DEFAULT_LAMBDA,
            Self::DEFAULT_MU,
            Self::DEFAULT_ETA,
            Self::DEFAULT_DELTA,
        )
        .expect("defaults satisfy the threshold invariants")
    }

    pub fn with_lambda(self, lambda: f64) -> Result<Self, ThresholdError> {
        Self::new(lambda, self.mu, self.eta, self.delta)
    }

    pub fn with_eta(self, eta: f64) -> Result<Self, ThresholdError> {
        Self::new(self.lambda, self.mu, eta, self.delta)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// The five class centers: center i is the 5-dimensional one-hot point with
/// a 1 at coordinate i. Both networks use the same centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassCenters {
    centers: [[f64; CLASS_COUNT]; CLASS_COUNT],
}

impl Default for ClassCenters {
    fn default() -> Self {
        let mut centers = [[0.0; CLASS_COUNT]; CLASS_COUNT];
        for (i, c) in centers.iter_mut().enumerate() {
            c[i] = 1.0;
        }
        ClassCenters { centers }
    }
}

impl ClassCenters {
    pub fn center(&self, class: usize) -> &[f64; CLASS_COUNT] {
        &self.centers[class]
    }
}

/// Euclidean distances from an output vector to the five class centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceVector([f64; CLASS_COUNT]);

impl DistanceVector {
    pub fn new(distances: [f64; CLASS_COUNT]) -> Self {
        DistanceVector(distances)
    }

    pub fn values(&self) -> &[f64; CLASS_COUNT] {
        &self.0
    }

    /// Smallest distance and the index of its first occurrence (ties break
    /// to the lowest class index).
    pub fn min_with_argmin(&self) -> (f64, usize) {
        let mut best = self.0[0];
        let mut arg = 0;
        for (i, &v) in self.0.iter().enumerate().skip(1) {
            if v < best {
                best = v;
                arg = i;
            }
        }
        (best, arg)
    }
}

/// Which network produced a decision; `Rejected` means neither network's
/// confidence cleared its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Net1,
    Net2,
    Rejected,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Net1 => write!(f, "net1"),
            Provenance::Net2 => write!(f, "net2"),
            Provenance::Rejected => write!(f, "rejected"),
        }
    }
}

/// Final outcome: one of the five application classes, or VPN by rejection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Class(usize),
    Vpn,
}

/// A classification decision with its provenance. The VPN outcome occurs
/// exactly when provenance is `Rejected`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    outcome: Outcome,
    provenance: Provenance,
}

impl Decision {
    fn class(index: usize, provenance: Provenance) -> Self {
        debug_assert!(index < CLASS_COUNT);
        debug_assert!(provenance != Provenance::Rejected);
        Decision {
            outcome: Outcome::Class(index),
            provenance,
        }
    }

    fn vpn() -> Self {
        Decision {
            outcome: Outcome::Vpn,
            provenance: Provenance::Rejected,
        }
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn is_vpn(&self) -> bool {
        matches!(self.outcome, Outcome::Vpn)
    }

    /// The predicted dataset label: class i maps to label i, VPN to label 5.
    pub fn predicted_label(&self) -> Label {
        match self.outcome {
            Outcome::Class(i) => Label::new(i as u8).expect("class index < 5"),
            Outcome::Vpn => Label::VPN,
        }
    }
}

/// Single-network score rule: accept arg max y if max y > lambda, else VPN.
pub fn score_decide(y: &ScoreVector, lambda: f64) -> Decision {
    let (best, arg) = y.max_with_argmax();
    if best > lambda {
        Decision::class(arg, Provenance::Net1)
    } else {
        Decision::vpn()
    }
}

/// Two-network score cascade. Branches partition all values of max y1:
/// above mu the first network decides, in (lambda, mu] the second network
/// decides, at or below lambda the input is rejected as VPN.
pub fn score_cascade(
    y1: &ScoreVector,
    y2: &ScoreVector,
    thresholds: &Thresholds,
) -> Decision {
    score_cascade_lazy(y1, thresholds, || *y2)
}

/// Cascade variant that computes the second network's scores only when the
/// middle branch is reached.
pub fn score_cascade_lazy<F>(y1: &ScoreVector, thresholds: &Thresholds, y2: F) -> Decision
where
    F: FnOnce() -> ScoreVector,
{
    let (best, arg) = y1.max_with_argmax();
    if best > thresholds.mu() {
        Decision::class(arg, Provenance::Net1)
    } else if best > thresholds.lambda() {
        let (_, arg2) = y2().max_with_argmax();
        Decision::class(arg2, Provenance::Net2)
    } else {
        Decision::vpn()
    }
}

/// Euclidean distance from the output vector to each one-hot class center.
pub fn center_distances(y: &ScoreVector, centers: &ClassCenters) -> DistanceVector {
    let mut out = [0.0; CLASS_COUNT];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = euclidean(y.values(), centers.center(i));
    }
    DistanceVector(out)
}

pub(crate) fn euclidean(a: &[f64; CLASS_COUNT], b: &[f64; CLASS_COUNT]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Single-network distance rule: accept arg min d if min d < eta, else VPN.
pub fn distance_decide(d: &DistanceVector, eta: f64) -> Decision {
    let (best, arg) = d.min_with_argmin();
    if best < eta {
        Decision::class(arg, Provenance::Net1)
    } else {
        Decision::vpn()
    }
}

/// Two-network distance cascade. Branches partition all values of min d1:
/// below delta the first network decides, in [delta, eta) the second
/// network decides, at or above eta the input is rejected as VPN.
pub fn distance_cascade(
    d1: &DistanceVector,
    d2: &DistanceVector,
    thresholds: &Thresholds,
) -> Decision {
    distance_cascade_lazy(d1, thresholds, || *d2)
}

/// Cascade variant that computes the second network's distances only when
/// the middle branch is reached.
pub fn distance_cascade_lazy<F>(d1: &DistanceVector, thresholds: &Thresholds, d2: F) -> Decision
where
    F: FnOnce() -> DistanceVector,
{
    let (best, arg) = d1.min_with_argmin();
    if best < thresholds.delta() {
        Decision::class(arg, Provenance::Net1)
    } else if best < thresholds.eta() {
        let (_, arg2) = d2().min_with_argmin();
        Decision::class(arg2, Provenance::Net2)
    } else {
        Decision::vpn()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(v: [f64; 5]) -> ScoreVector {
        ScoreVector::new(v).unwrap()
    }

    #[test]
    fn threshold_invariants_enforced() {
        assert!(Thresholds::new(0.5, 0.9, 1.0, 0.1).is_ok());
        assert!(matches!(
            Thresholds::new(0.9, 0.5, 1.0, 0.1),
            Err(ThresholdError::MuNotAboveLambda { .. })
        ));
        assert!(matches!(
            Thresholds::new(0.5, 0.9, 0.1, 0.1),
            Err(ThresholdError::DeltaNotBelowEta { .. })
        ));
        assert!(matches!(
            Thresholds::new(0.5, 0.9, -1.0, 0.1),
            Err(ThresholdError::EtaNotPositive(_))
        ));
        assert!(matches!(
            Thresholds::new(0.5, 0.9, 1.0, 0.0),
            Err(ThresholdError::DeltaNotPositive(_))
        ));
    }

    #[test]
    fn score_decide_examples() {
        let d = score_decide(&scores([0.9, 0.2, 0.3, 0.1, 0.05]), 0.5);
        assert_eq!(d.outcome(), Outcome::Class(0));
        assert_eq!(d.provenance(), Provenance::Net1);

        let d = score_decide(&scores([0.4, 0.4, 0.4, 0.4, 0.4]), 0.5);
        assert!(d.is_vpn());
        assert_eq!(d.provenance(), Provenance::Rejected);

        // Tie-break to the lowest index.
        let d = score_decide(&scores([0.8, 0.8, 0.1, 0.1, 0.1]), 0.5);
        assert_eq!(d.outcome(), Outcome::Class(0));
    }

    #[test]
    fn score_cascade_branches() {
        let t = Thresholds::new(0.5, 0.9, 1.0, 0.1).unwrap();

        let d = score_cascade(&scores([0.95, 0.1, 0.1, 0.1, 0.1]), &scores([0.0; 5]), &t);
        assert_eq!(d.outcome(), Outcome::Class(0));
        assert_eq!(d.provenance(), Provenance::Net1);

        let d = score_cascade(
            &scores([0.7, 0.1, 0.1, 0.1, 0.1]),
            &scores([0.1, 0.9, 0.2, 0.3, 0.4]),
            &t,
        );
        assert_eq!(d.outcome(), Outcome::Class(1));
        assert_eq!(d.provenance(), Provenance::Net2);

        let d = score_cascade(
            &scores([0.3, 0.1, 0.1, 0.1, 0.1]),
            &scores([1.0, 0.9, 0.2, 0.3, 0.4]),
            &t,
        );
        assert!(d.is_vpn());
    }

    #[test]
    fn score_cascade_boundary_partition() {
        // max y1 exactly mu goes to net2; exactly lambda rejects.
        let t = Thresholds::new(0.5, 0.9, 1.0, 0.1).unwrap();
        let at_mu = score_cascade(&scores([0.9, 0.0, 0.0, 0.0, 0.0]), &scores([0.0, 1.0, 0.0, 0.0, 0.0]), &t);
        assert_eq!(at_mu.provenance(), Provenance::Net2);
        let at_lambda = score_cascade(&scores([0.5, 0.0, 0.0, 0.0, 0.0]), &scores([1.0; 5]), &t);
        assert!(at_lambda.is_vpn());
    }

    #[test]
    fn center_distance_geometry() {
        let centers = ClassCenters::default();

        let d = center_distances(&scores([0.0, 0.0, 1.0, 0.0, 0.0]), &centers);
        let sqrt2 = 2.0f64.sqrt();
        assert_eq!(d.values()[2], 0.0);
        for i in [0usize, 1, 3, 4] {
            assert!((d.values()[i] - sqrt2).abs() < 1e-15);
        }

        let d = center_distances(&scores([0.0; 5]), &centers);
        assert!(d.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));

        let d = center_distances(&scores([0.5, 0.5, 0.0, 0.0, 0.0]), &centers);
        assert!((d.values()[0] - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((d.values()[0] - 0.70711).abs() < 1e-5);
        assert!((d.values()[2] - 1.5f64.sqrt()).abs() < 1e-12);
        assert!((d.values()[2] - 1.22474).abs() < 1e-5);
    }

    #[test]
    fn distance_decide_examples() {
        let centers = ClassCenters::default();
        let d1 = center_distances(&scores([0.0, 1.0, 0.0, 0.0, 0.0]), &centers);
        let d = distance_decide(&d1, 0.5);
        assert_eq!(d.outcome(), Outcome::Class(1));

        let all_one = DistanceVector::new([1.0; 5]);
        assert!(distance_decide(&all_one, 0.5).is_vpn());

        let tie = DistanceVector::new([0.3, 0.3, 0.9, 0.9, 0.9]);
        assert_eq!(distance_decide(&tie, 0.5).outcome(), Outcome::Class(0));
    }

    #[test]
    fn distance_cascade_branches() {
        let t = Thresholds::new(0.5, 0.9, 1.0, 0.1).unwrap();

        let d = distance_cascade(
            &DistanceVector::new([0.05, 2.0, 2.0, 2.0, 2.0]),
            &DistanceVector::new([2.0; 5]),
            &t,
        );
        assert_eq!(d.outcome(), Outcome::Class(0));
        assert_eq!(d.provenance(), Provenance::Net1);

        let d = distance_cascade(
            &DistanceVector::new([0.5, 2.0, 2.0, 2.0, 2.0]),
            &DistanceVector::new([2.0, 2.0, 2.0, 0.2, 2.0]),
            &t,
        );
        assert_eq!(d.outcome(), Outcome::Class(3));
        assert_eq!(d.provenance(), Provenance::Net2);

        let d = distance_cascade(
            &DistanceVector::new([1.2, 2.0, 2.0, 2.0, 2.0]),
            &DistanceVector::new([0.0; 5]),
            &t,
        );
        assert!(d.is_vpn());
    }

    #[test]
    fn distance_cascade_boundary_partition() {
        // min d1 exactly delta goes to net2; exactly eta rejects.
        let t = Thresholds::new(0.5, 0.9, 1.0, 0.1).unwrap();
        let at_delta = distance_cascade(
            &DistanceVector::new([0.1, 2.0, 2.0, 2.0, 2.0]),
            &DistanceVector::new([2.0, 0.0, 2.0, 2.0, 2.0]),
            &t,
        );
        assert_eq!(at_delta.provenance(), Provenance::Net2);
        let at_eta = distance_cascade(
            &DistanceVector::new([1.0, 2.0, 2.0, 2.0, 2.0]),
            &DistanceVector::new([0.0; 5]),
            &t,
        );
        assert!(at_eta.is_vpn());
    }

    #[test]
    fn vpn_outcome_iff_rejected_provenance() {
        let t = Thresholds::defaults();
        let cases = [
            score_cascade(&scores([0.95, 0.0, 0.0, 0.0, 0.0]), &scores([0.0; 5]), &t),
            score_cascade(&scores([0.7, 0.0, 0.0, 0.0, 0.0]), &scores([0.0; 5]), &t),
            score_cascade(&scores([0.1, 0.0, 0.0, 0.0, 0.0]), &scores([0.0; 5]), &t),
        ];
        for d in cases {
            assert_eq!(d.is_vpn(), d.provenance() == Provenance::Rejected);
        }
    }

    #[test]
    fn positive_scaling_keeps_argmax() {
        let y = scores([0.3, 0.7, 0.2, 0.1, 0.4]);
        let scaled = scores([0.15, 0.35, 0.1, 0.05, 0.2]);
        assert_eq!(y.max_with_argmax().1, scaled.max_with_argmax().1);
    }
}
