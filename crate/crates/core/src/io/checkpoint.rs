//! Model checkpoints (`.fnmd`): magic `FNMD`, `u32` version, `u64` length of
//! a JSON architecture header and the header itself, `u64` tensor count,
//! then each tensor as a `u64` length and `f64` values, and finally a `u64`
//! checksum as in matrix files. Tensors appear per affine layer (weights
//! row-major `fan_in × fan_out`, then bias) followed, in the batchnorm
//! variant, by scale, shift, running mean and running variance per hidden
//! layer.

use std::path::Path;

use super::{checksum, corrupt, read_all, write_atomic, IoError};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::trainer::{Architecture, BatchNormParams, DenseLayer, ModelParams, Regularizer};

const MAGIC: &[u8; 4] = b"FNMD";
const VERSION: u32 = 1;

fn put_tensor<T: Scalar>(buf: &mut Vec<u8>, values: &[T]) -> Result<(), IoError> {
    buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for (i, v) in values.iter().enumerate() {
        let v = v.as_f64();
        if !v.is_finite() {
            return Err(IoError::NonFinite(i));
        }
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

pub(crate) fn encode_model<T: Scalar>(model: &ModelParams<T>) -> Result<Vec<u8>, IoError> {
    let header = serde_json::to_vec(&model.arch).expect("architecture serializes");
    let mut tensors: Vec<&[T]> = Vec::new();
    for l in &model.layers {
        tensors.push(l.weights.as_slice());
        tensors.push(&l.bias);
    }
    for bn in &model.batchnorm {
        tensors.extend([&bn.gamma[..], &bn.beta, &bn.running_mean, &bn.running_var]);
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header);
    buf.extend_from_slice(&(tensors.len() as u64).to_le_bytes());
    for t in tensors {
        put_tensor(&mut buf, t)?;
    }
    let sum = checksum(&buf);
    buf.extend_from_slice(&sum.to_le_bytes());
    Ok(buf)
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IoError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| corrupt(self.path, format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64, IoError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn tensor<T: Scalar>(&mut self, expected: usize) -> Result<Vec<T>, IoError> {
        let at = self.pos;
        let len = self.u64()? as usize;
        if len != expected {
            return Err(corrupt(
                self.path,
                format!("tensor at byte {at} has {len} values, architecture needs {expected}"),
            ));
        }
        let raw = self.take(len.checked_mul(8).ok_or_else(|| corrupt(self.path, "tensor length overflows"))?)?;
        raw.chunks_exact(8)
            .map(|c| {
                let v = f64::from_le_bytes(c.try_into().unwrap());
                if v.is_finite() {
                    Ok(T::lit(v))
                } else {
                    Err(corrupt(self.path, "non-finite parameter"))
                }
            })
            .collect()
    }
}

pub(crate) fn decode_model<T: Scalar>(path: &Path, bytes: &[u8]) -> Result<ModelParams<T>, IoError> {
    if bytes.len() < 4 + 4 + 8 + 8 {
        return Err(corrupt(path, "truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            offset: 0,
            message: "bad magic, not a model checkpoint".into(),
        });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    if checksum(body) != u64::from_le_bytes(tail.try_into().unwrap()) {
        return Err(corrupt(path, "checksum mismatch"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            offset: 4,
            message: format!("unsupported version {version}"),
        });
    }
    let mut r = Reader { path, bytes: body, pos: 8 };
    let header_len = r.u64()? as usize;
    let header = r.take(header_len)?;
    let arch: Architecture = serde_json::from_slice(header).map_err(|e| IoError::Format {
        path: path.to_path_buf(),
        offset: 16,
        message: format!("architecture header: {e}"),
    })?;
    arch.validate().map_err(|e| super::schema(path, e.to_string()))?;
    let bn_layers = if arch.regularizer == Regularizer::Batchnorm { arch.hidden.len() } else { 0 };
    let shapes = arch.layer_shapes();
    let count = r.u64()? as usize;
    if count != 2 * shapes.len() + 4 * bn_layers {
        return Err(corrupt(path, format!("{count} tensors do not match the architecture")));
    }
    let mut layers = Vec::with_capacity(shapes.len());
    for &(fan_in, fan_out) in &shapes {
        let weights = Matrix::from_vec(fan_in, fan_out, r.tensor(fan_in * fan_out)?);
        let bias = r.tensor(fan_out)?;
        layers.push(DenseLayer { weights, bias });
    }
    let mut batchnorm = Vec::with_capacity(bn_layers);
    for &w in &arch.hidden[..bn_layers] {
        let (gamma, beta, running_mean, running_var) = (r.tensor(w)?, r.tensor(w)?, r.tensor(w)?, r.tensor::<T>(w)?);
        if running_var.iter().any(|&v| v <= T::zero()) {
            return Err(super::schema(path, "running variance must be positive"));
        }
        batchnorm.push(BatchNormParams { gamma, beta, running_mean, running_var });
    }
    if r.pos != body.len() {
        return Err(corrupt(path, format!("{} trailing bytes", body.len() - r.pos)));
    }
    Ok(ModelParams { arch, layers, batchnorm })
}

pub fn save_model<T: Scalar>(model: &ModelParams<T>, path: &Path) -> Result<(), IoError> {
    write_atomic(path, &encode_model(model)?)
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<ModelParams<T>, IoError> {
    decode_model(path, &read_all(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_all_variants() {
        let dir = tempfile::tempdir().unwrap();
        for (k, reg) in
            [Regularizer::None, Regularizer::Dropout { rate: 0.5 }, Regularizer::Batchnorm].into_iter().enumerate()
        {
            let arch = Architecture::new(7, vec![5, 3], 4, reg);
            let mut model = ModelParams::<f64>::init(&arch, k as u64).unwrap();
            if let Some(bn) = model.batchnorm.first_mut() {
                bn.running_var[0] = 2.5;
                bn.running_mean[1] = -0.25;
            }
            let path = dir.path().join(format!("m{k}.fnmd"));
            save_model(&model, &path).unwrap();
            assert_eq!(load_model::<f64>(&path).unwrap(), model);
        }
    }

    #[test]
    fn damage_is_detected() {
        let model = ModelParams::<f64>::init(&Architecture::new(3, vec![2], 2, Regularizer::Batchnorm), 1).unwrap();
        let bytes = encode_model(&model).unwrap();
        let p = Path::new("m.fnmd");
        assert!(matches!(decode_model::<f64>(p, &bytes[..bytes.len() - 3]), Err(IoError::Corrupt { .. })));
        let mut flipped = bytes.clone();
        let mid = flipped.len() / 2;
        flipped[mid] ^= 0x10;
        assert!(matches!(decode_model::<f64>(p, &flipped), Err(IoError::Corrupt { .. })));
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(matches!(decode_model::<f64>(p, &magic), Err(IoError::Format { offset: 0, .. })));
    }
}
