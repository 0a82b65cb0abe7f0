//! NNMD1 model files (bit-exact): ASCII magic `NNMD1`, one arch tag byte
//! (0 = MLP, 1 = LSTM), u32 LE array count, then each array as u16 LE name
//! length, UTF-8 name, u32 LE rows, u32 LE cols, and row-major 64-bit LE
//! IEEE-754 values. LSTM files carry a trailing u32 LE step width.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

use super::{LstmParameters, MlpParameters, NetworkParameters, NeuralError};

const MAGIC: &[u8; 5] = b"NNMD1";
const TAG_MLP: u8 = 0;
const TAG_LSTM: u8 = 1;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad model magic {0:02x?} (expected \"NNMD1\")")]
    BadMagic([u8; 5]),
    #[error("unknown architecture tag {0}")]
    UnknownArchTag(u8),
    #[error("model file truncated while reading {context}")]
    Truncated { context: String },
    #[error("model file has {extra} trailing bytes")]
    TrailingBytes { extra: usize },
    #[error("array {index} name is not valid UTF-8")]
    BadName { index: usize },
    #[error("array {index}: expected {expected:?}, found {found:?}")]
    UnexpectedArray {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("expected {expected} arrays, header says {found}")]
    ArrayCount { expected: usize, found: u32 },
    #[error("trailing step width {stored} does not match gate input width {actual}")]
    StepWidthMismatch { stored: u32, actual: usize },
    #[error("invalid parameters: {0}")]
    Invalid(#[from] NeuralError),
}

pub fn write_model<W: Write>(params: &NetworkParameters, mut dest: W) -> Result<(), ModelIoError> {
    dest.write_all(MAGIC)?;
    let tag = match params.architecture() {
        super::Architecture::Mlp => TAG_MLP,
        super::Architecture::Lstm => TAG_LSTM,
    };
    dest.write_all(&[tag])?;
    let names = params.array_names();
    let arrays = params.arrays();
    dest.write_all(&(names.len() as u32).to_le_bytes())?;
    for (name, array) in names.iter().zip(&arrays) {
        dest.write_all(&(name.len() as u16).to_le_bytes())?;
        dest.write_all(name.as_bytes())?;
        dest.write_all(&(array.nrows() as u32).to_le_bytes())?;
        dest.write_all(&(array.ncols() as u32).to_le_bytes())?;
        for v in array.iter() {
            dest.write_all(&v.to_le_bytes())?;
        }
    }
    if let NetworkParameters::Lstm(p) = params {
        dest.write_all(&(p.step_width() as u32).to_le_bytes())?;
    }
    Ok(())
}

pub fn write_model_file<P: AsRef<Path>>(
    params: &NetworkParameters,
    path: P,
) -> Result<(), ModelIoError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_model(params, &mut out)?;
    out.flush()?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, context: &str) -> Result<&'a [u8], ModelIoError> {
        if self.data.len() - self.pos < n {
            return Err(ModelIoError::Truncated {
                context: context.to_string(),
            });
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16_le(&mut self, context: &str) -> Result<u16, ModelIoError> {
        Ok(u16::from_le_bytes(self.take(2, context)?.try_into().unwrap()))
    }

    fn u32_le(&mut self, context: &str) -> Result<u32, ModelIoError> {
        Ok(u32::from_le_bytes(self.take(4, context)?.try_into().unwrap()))
    }
}

pub fn read_model<R: Read>(mut source: R) -> Result<NetworkParameters, ModelIoError> {
    let mut data = Vec::new();
    source.read_to_end(&mut data)?;
    let mut cursor = Cursor {
        data: &data,
        pos: 0,
    };

    let magic: [u8; 5] = cursor.take(5, "magic")?.try_into().unwrap();
    if &magic != MAGIC {
        return Err(ModelIoError::BadMagic(magic));
    }
    let tag = cursor.take(1, "architecture tag")?[0];
    let expected_names: &[&str] = match tag {
        TAG_MLP => &MlpParameters::array_names(),
        TAG_LSTM => &LstmParameters::array_names(),
        other => return Err(ModelIoError::UnknownArchTag(other)),
    };
    let count = cursor.u32_le("array count")?;
    if count as usize != expected_names.len() {
        return Err(ModelIoError::ArrayCount {
            expected: expected_names.len(),
            found: count,
        });
    }

    let mut arrays = Vec::with_capacity(expected_names.len());
    for (index, expected) in expected_names.iter().enumerate() {
        let name_len = cursor.u16_le("array name length")? as usize;
        let name_bytes = cursor.take(name_len, "array name")?;
        let name =
            std::str::from_utf8(name_bytes).map_err(|_| ModelIoError::BadName { index })?;
        if name != *expected {
            return Err(ModelIoError::UnexpectedArray {
                index,
                expected: (*expected).to_string(),
                found: name.to_string(),
            });
        }
        let rows = cursor.u32_le("array rows")? as usize;
        let cols = cursor.u32_le("array cols")? as usize;
        let len = rows.checked_mul(cols).ok_or(ModelIoError::Truncated {
            context: format!("array {name} dimensions overflow"),
        })?;
        let raw = cursor.take(len * 8, "array values")?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let array = Array2::from_shape_vec((rows, cols), values)
            .expect("shape matches the collected length");
        arrays.push(array);
    }

    let params = match tag {
        TAG_MLP => {
            let mut it = arrays.into_iter();
            let params = MlpParameters {
                w: it.next().unwrap(),
                u: it.next().unwrap(),
                v: it.next().unwrap(),
            };
            params.validate()?;
            NetworkParameters::Mlp(params)
        }
        _ => {
            let stored = cursor.u32_le("step width")?;
            let mut it = arrays.into_iter();
            let mut take = || it.next().unwrap();
            let (w_f, u_f, b_f) = (take(), take(), take());
            let (w_i, u_i, b_i) = (take(), take(), take());
            let (w_o, u_o, b_o) = (take(), take(), take());
            let (w_c, u_c, b_c) = (take(), take(), take());
            let head_u = take();
            let head_v = take();
            let actual = w_f.ncols();
            if stored as usize != actual {
                return Err(ModelIoError::StepWidthMismatch { stored, actual });
            }
            let mut params = LstmParameters::zeros(actual, w_f.nrows(), head_u.ncols(), head_v.ncols());
            params.w_f = w_f;
            params.u_f = u_f;
            params.b_f = b_f;
            params.w_i = w_i;
            params.u_i = u_i;
            params.b_i = b_i;
            params.w_o = w_o;
            params.u_o = u_o;
            params.b_o = b_o;
            params.w_c = w_c;
            params.u_c = u_c;
            params.b_c = b_c;
            params.head_u = head_u;
            params.head_v = head_v;
            params.validate()?;
            NetworkParameters::Lstm(params)
        }
    };

    if cursor.pos != data.len() {
        return Err(ModelIoError::TrailingBytes {
            extra: data.len() - cursor.pos,
        });
    }
    Ok(params)
}

pub fn read_model_file<P: AsRef<Path>>(path: P) -> Result<NetworkParameters, ModelIoError> {
    read_model(BufReader::new(File::open(path)?))
}
