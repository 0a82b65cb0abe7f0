//! FLOW1 dataset files and the debug CSV export.
//!
//! FLOW1 layout (bit-exact): bytes 0-4 ASCII `FLOW1`, bytes 5-8 u32
//! little-endian sample count N, then N records of `[1 byte label][784
//! raw feature bytes, pre-normalization]`. Readers normalize on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::types::{ByteVector, Label, FEATURE_LEN};

const MAGIC: &[u8; 5] = b"FLOW1";
const HEADER_LEN: usize = 9;
const RECORD_LEN: usize = 1 + FEATURE_LEN;

/// A feature vector paired with its dataset label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: ByteVector,
    pub label: Label,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad dataset magic {0:02x?} (expected \"FLOW1\")")]
    BadMagic([u8; 5]),
    #[error("dataset too short: {len} bytes, need at least {HEADER_LEN}")]
    ShortFile { len: usize },
    #[error("dataset truncated: header promises {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("dataset has {extra} trailing bytes past the last record")]
    TrailingBytes { extra: usize },
    #[error("sample {index} has invalid label {value} (expected 0..=5)")]
    InvalidLabel { index: usize, value: u8 },
}

/// Write samples in FLOW1 format. Returns the number of samples written.
pub fn write_dataset<W: Write>(samples: &[LabeledSample], mut dest: W) -> Result<usize, DatasetError> {
    dest.write_all(MAGIC)?;
    dest.write_all(&(samples.len() as u32).to_le_bytes())?;
    for sample in samples {
        dest.write_all(&[sample.label.value()])?;
        dest.write_all(&sample.features.to_raw_bytes())?;
    }
    Ok(samples.len())
}

pub fn write_dataset_file<P: AsRef<Path>>(
    samples: &[LabeledSample],
    path: P,
) -> Result<usize, DatasetError> {
    let mut out = BufWriter::new(File::create(path)?);
    let n = write_dataset(samples, &mut out)?;
    out.flush()?;
    Ok(n)
}

/// Read a FLOW1 stream back into samples, validating magic, count, and
/// exact trailing length.
pub fn read_dataset<R: Read>(mut source: R) -> Result<Vec<LabeledSample>, DatasetError> {
    let mut data = Vec::new();
    source.read_to_end(&mut data)?;
    if data.len() < HEADER_LEN {
        return Err(DatasetError::ShortFile { len: data.len() });
    }
    let magic: [u8; 5] = data[..5].try_into().unwrap();
    if &magic != MAGIC {
        return Err(DatasetError::BadMagic(magic));
    }
    let count = u32::from_le_bytes(data[5..9].try_into().unwrap()) as usize;
    let expected = HEADER_LEN + count * RECORD_LEN;
    if data.len() < expected {
        return Err(DatasetError::Truncated {
            expected,
            actual: data.len(),
        });
    }
    if data.len() > expected {
        return Err(DatasetError::TrailingBytes {
            extra: data.len() - expected,
        });
    }

    let mut samples = Vec::with_capacity(count);
    for index in 0..count {
        let record = &data[HEADER_LEN + index * RECORD_LEN..HEADER_LEN + (index + 1) * RECORD_LEN];
        let label = Label::new(record[0]).map_err(|e| DatasetError::InvalidLabel {
            index,
            value: e.0,
        })?;
        samples.push(LabeledSample {
            features: ByteVector::from_bytes(&record[1..]),
            label,
        });
    }
    Ok(samples)
}

pub fn read_dataset_file<P: AsRef<Path>>(path: P) -> Result<Vec<LabeledSample>, DatasetError> {
    read_dataset(BufReader::new(File::open(path)?))
}

/// Debug CSV export: header `label,b0,...,b783`, raw bytes as decimal
/// integers.
pub fn write_dataset_csv<W: Write>(samples: &[LabeledSample], mut dest: W) -> Result<(), DatasetError> {
    write!(dest, "label")?;
    for i in 0..FEATURE_LEN {
        write!(dest, ",b{i}")?;
    }
    writeln!(dest)?;
    for sample in samples {
        write!(dest, "{}", sample.label.value())?;
        for b in sample.features.to_raw_bytes() {
            write!(dest, ",{b}")?;
        }
        writeln!(dest)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(label: u8, bytes: &[u8]) -> LabeledSample {
        LabeledSample {
            features: ByteVector::from_bytes(bytes),
            label: Label::new(label).unwrap(),
        }
    }

    #[test]
    fn empty_dataset_is_nine_bytes() {
        let mut buf = Vec::new();
        assert_eq!(write_dataset(&[], &mut buf).unwrap(), 0);
        assert_eq!(buf.len(), 9);
        assert_eq!(&buf[..5], b"FLOW1");
        assert_eq!(&buf[5..], &[0, 0, 0, 0]);
        assert!(read_dataset(&buf[..]).unwrap().is_empty());
    }

    #[test]
    fn single_sample_size_arithmetic() {
        let mut buf = Vec::new();
        write_dataset(&[sample(5, &[])], &mut buf).unwrap();
        assert_eq!(buf.len(), 9 + 1 + FEATURE_LEN);
        assert_eq!(buf[9], 5);
        assert!(buf[10..].iter().all(|&b| b == 0));
    }

    #[test]
    fn round_trip_is_identity() {
        let samples: Vec<LabeledSample> = (0..10)
            .map(|i| {
                let bytes: Vec<u8> = (0..FEATURE_LEN).map(|j| ((i * 37 + j) % 256) as u8).collect();
                sample((i % 6) as u8, &bytes)
            })
            .collect();
        let mut buf = Vec::new();
        write_dataset(&samples, &mut buf).unwrap();
        let back = read_dataset(&buf[..]).unwrap();
        assert_eq!(back, samples);

        // Writing the read-back samples reproduces the bytes exactly.
        let mut buf2 = Vec::new();
        write_dataset(&back, &mut buf2).unwrap();
        assert_eq!(buf2, buf);
    }

    #[test]
    fn bad_magic_short_file_trailing_and_label_errors_are_distinct() {
        let mut buf = Vec::new();
        write_dataset(&[sample(0, b"x")], &mut buf).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'G';
        assert!(matches!(
            read_dataset(&bad[..]),
            Err(DatasetError::BadMagic(_))
        ));

        assert!(matches!(
            read_dataset(&buf[..5]),
            Err(DatasetError::ShortFile { len: 5 })
        ));

        assert!(matches!(
            read_dataset(&buf[..buf.len() - 3]),
            Err(DatasetError::Truncated { .. })
        ));

        let mut trailing = buf.clone();
        trailing.push(0xAA);
        assert!(matches!(
            read_dataset(&trailing[..]),
            Err(DatasetError::TrailingBytes { extra: 1 })
        ));

        let mut badlabel = buf.clone();
        badlabel[9] = 9;
        assert!(matches!(
            read_dataset(&badlabel[..]),
            Err(DatasetError::InvalidLabel { index: 0, value: 9 })
        ));
    }

    #[test]
    fn csv_export_shape() {
        let mut out = Vec::new();
        write_dataset_csv(&[sample(3, &[255, 128])], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("label,b0,b1,"));
        assert!(header.ends_with(",b783"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("3,255,128,0,"));
        assert_eq!(row.split(',').count(), 1 + FEATURE_LEN);
    }
}
