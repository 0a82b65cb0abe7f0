//! Independently coded literal transcription of the decision rules, written
//! as straight-line slice code with its own argmax/argmin/distance loops.
//! Used only to cross-check the library's decision functions; returns the
//! predicted label directly (0-4 for classes, 5 for VPN).

use flowclass::decision::Decision;

pub fn decision_label(d: &Decision) -> u8 {
    d.predicted_label().value()
}

fn literal_argmax(y: &[f64; 5]) -> (f64, usize) {
    let mut best = y[0];
    let mut arg = 0;
    for (i, &v) in y.iter().enumerate() {
        if v > best {
            best = v;
            arg = i;
        }
    }
    (best, arg)
}

fn literal_distances(y: &[f64; 5]) -> [f64; 5] {
    let mut d = [0.0; 5];
    for (i, slot) in d.iter_mut().enumerate() {
        let mut sum = 0.0;
        for (k, &yk) in y.iter().enumerate() {
            let center = if k == i { 1.0 } else { 0.0 };
            sum += (yk - center) * (yk - center);
        }
        *slot = sum.sqrt();
    }
    d
}

fn literal_argmin(d: &[f64; 5]) -> (f64, usize) {
    let mut best = d[0];
    let mut arg = 0;
    for (i, &v) in d.iter().enumerate() {
        if v < best {
            best = v;
            arg = i;
        }
    }
    (best, arg)
}

/// Single-network score rule: accept arg max if the max score clears
/// lambda, otherwise VPN.
pub fn score_decide_transcription(y: &[f64; 5], lambda: f64) -> u8 {
    let (best, arg) = literal_argmax(y);
    if best > lambda {
        arg as u8
    } else {
        5
    }
}

/// Two-network score rule with the partitioned boundaries: strictly above
/// mu the first network decides, in (lambda, mu] the second, at or below
/// lambda the input is VPN.
pub fn score_cascade_transcription(y1: &[f64; 5], y2: &[f64; 5], lambda: f64, mu: f64) -> u8 {
    let (best, arg) = literal_argmax(y1);
    if best > mu {
        arg as u8
    } else if best > lambda {
        literal_argmax(y2).1 as u8
    } else {
        5
    }
}

/// Single-network distance rule: accept arg min if the min distance is
/// under eta, otherwise VPN.
pub fn distance_decide_transcription(y: &[f64; 5], eta: f64) -> u8 {
    let (best, arg) = literal_argmin(&literal_distances(y));
    if best < eta {
        arg as u8
    } else {
        5
    }
}

/// Two-network distance rule with the partitioned boundaries: strictly
/// below delta the first network decides, in [delta, eta) the second, at or
/// above eta the input is VPN.
pub fn distance_cascade_transcription(y1: &[f64; 5], y2: &[f64; 5], eta: f64, delta: f64) -> u8 {
    let d1 = literal_distances(y1);
    let (best, arg) = literal_argmin(&d1);
    if best < delta {
        arg as u8
    } else if best < eta {
        let d2 = literal_distances(y2);
        literal_argmin(&d2).1 as u8
    } else {
        5
    }
}
