//! Domain types shared across the crate: class labels, the fixed-length
//! feature vector fed to the networks, and the five per-class output scores.

use thiserror::Error;

/// Length of the model input: the first 784 payload bytes of a flow.
pub const FEATURE_LEN: usize = 784;

/// Number of non-VPN application classes (network output width).
pub const CLASS_COUNT: usize = 5;

/// Number of dataset labels: the five application classes plus VPN.
pub const LABEL_COUNT: usize = 6;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("label {0} out of range (expected 0..=5)")]
pub struct InvalidLabel(pub u8);

/// A dataset label: 0=Chat, 1=Email, 2=Ftp, 3=Streaming, 4=Voip, 5=VPN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(u8);

impl Label {
    pub const CHAT: Label = Label(0);
    pub const EMAIL: Label = Label(1);
    pub const FTP: Label = Label(2);
    pub const STREAMING: Label = Label(3);
    pub const VOIP: Label = Label(4);
    pub const VPN: Label = Label(5);

    pub fn new(value: u8) -> Result<Self, InvalidLabel> {
        if usize::from(value) < LABEL_COUNT {
            Ok(Label(value))
        } else {
            Err(InvalidLabel(value))
        }
    }

    /// All six labels in dataset order.
    pub fn all() -> impl Iterator<Item = Label> {
        (0..LABEL_COUNT as u8).map(Label)
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn is_vpn(self) -> bool {
        self.0 == 5
    }

    pub fn name(self) -> &'static str {
        match self.0 {
            0 => "Chat",
            1 => "Email",
            2 => "Ftp",
            3 => "Streaming",
            4 => "Voip",
            _ => "VPN",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// A subset of the six labels, used to filter training sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelSet(u8);

impl LabelSet {
    /// All six labels.
    pub fn all() -> Self {
        LabelSet(0b0011_1111)
    }

    /// The five application classes, excluding VPN.
    pub fn non_vpn() -> Self {
        LabelSet(0b0001_1111)
    }

    pub fn from_labels(labels: &[Label]) -> Self {
        let mut bits = 0u8;
        for l in labels {
            bits |= 1 << l.index();
        }
        LabelSet(bits)
    }

    pub fn contains(self, label: Label) -> bool {
        self.0 & (1 << label.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum InvalidScore {
    #[error("score[{index}] = {value} is not finite")]
    NotFinite { index: usize, value: f64 },
    #[error("score[{index}] = {value} outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
}

/// The normalized model input x: exactly 784 values, each `byte / 255`
/// (or 0 for zero-padding of short flows).
#[derive(Debug, Clone, PartialEq)]
pub struct ByteVector {
    values: Box<[f64; FEATURE_LEN]>,
}

impl ByteVector {
    /// Build from raw payload bytes: the first `min(len, 784)` bytes are
    /// divided by 255, the remainder zero-padded; bytes beyond 784 are
    /// ignored.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        let mut values = Box::new([0.0f64; FEATURE_LEN]);
        for (slot, &b) in values.iter_mut().zip(bytes.iter().take(FEATURE_LEN)) {
            *slot = f64::from(b) / 255.0;
        }
        ByteVector { values }
    }

    pub fn values(&self) -> &[f64; FEATURE_LEN] {
        &self.values
    }

    /// Recover the raw bytes. Exact for vectors built by [`Self::from_bytes`],
    /// since `round((b / 255) * 255) == b` for every byte value in f64.
    pub fn to_raw_bytes(&self) -> [u8; FEATURE_LEN] {
        let mut out = [0u8; FEATURE_LEN];
        for (slot, &v) in out.iter_mut().zip(self.values.iter()) {
            *slot = (v * 255.0).round() as u8;
        }
        out
    }
}

/// The five per-class outputs of a network's Gaussian output layer.
///
/// Mathematically each entry lies in (0, 1]; in f64 the exponential can
/// underflow to exactly 0 for extreme pre-activations, so construction
/// accepts the closed interval [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreVector([f64; CLASS_COUNT]);

impl ScoreVector {
    pub fn new(scores: [f64; CLASS_COUNT]) -> Result<Self, InvalidScore> {
        for (index, &value) in scores.iter().enumerate() {
            if !value.is_finite() {
                return Err(InvalidScore::NotFinite { index, value });
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(InvalidScore::OutOfRange { index, value });
            }
        }
        Ok(ScoreVector(scores))
    }

    pub fn values(&self) -> &[f64; CLASS_COUNT] {
        &self.0
    }

    /// Highest score and the index of its first occurrence (ties break to
    /// the lowest class index).
    pub fn max_with_argmax(&self) -> (f64, usize) {
        let mut best = self.0[0];
        let mut arg = 0;
        for (i, &v) in self.0.iter().enumerate().skip(1) {
            if v > best {
                best = v;
                arg = i;
            }
        }
        (best, arg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_scheme_matches_table() {
        let names: Vec<&str> = Label::all().map(Label::name).collect();
        assert_eq!(names, ["Chat", "Email", "Ftp", "Streaming", "Voip", "VPN"]);
        assert!(Label::new(6).is_err());
        assert!(Label::VPN.is_vpn());
        assert!(!Label::VOIP.is_vpn());
    }

    #[test]
    fn label_set_filters() {
        let s = LabelSet::non_vpn();
        assert!(s.contains(Label::CHAT));
        assert!(!s.contains(Label::VPN));
        assert!(LabelSet::all().contains(Label::VPN));
        assert!(LabelSet::from_labels(&[]).is_empty());
    }

    #[test]
    fn byte_vector_normalizes_and_pads() {
        let v = ByteVector::from_bytes(&[0xFF; FEATURE_LEN]);
        assert!(v.values().iter().all(|&x| x == 1.0));

        let empty = ByteVector::from_bytes(&[]);
        assert!(empty.values().iter().all(|&x| x == 0.0));

        let bytes: Vec<u8> = (0..800u32).map(|i| (i % 256) as u8).collect();
        let v = ByteVector::from_bytes(&bytes);
        for i in 0..FEATURE_LEN {
            assert_eq!(v.values()[i], f64::from((i % 256) as u8) / 255.0);
        }
    }

    #[test]
    fn byte_round_trip_is_exact_for_every_value() {
        let bytes: Vec<u8> = (0..=255u8).collect();
        let v = ByteVector::from_bytes(&bytes);
        let back = v.to_raw_bytes();
        assert_eq!(&back[..256], &bytes[..]);
        assert!(back[256..].iter().all(|&b| b == 0));
    }

    #[test]
    fn score_vector_rejects_bad_entries() {
        assert!(ScoreVector::new([0.0, 0.5, 1.0, 0.2, 0.9]).is_ok());
        assert!(ScoreVector::new([1.5, 0.5, 1.0, 0.2, 0.9]).is_err());
        assert!(ScoreVector::new([f64::NAN, 0.5, 1.0, 0.2, 0.9]).is_err());
    }

    #[test]
    fn argmax_breaks_ties_to_lowest_index() {
        let y = ScoreVector::new([0.8, 0.8, 0.1, 0.1, 0.1]).unwrap();
        assert_eq!(y.max_with_argmax(), (0.8, 0));
    }
}
