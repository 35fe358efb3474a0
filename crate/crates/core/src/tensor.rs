//! Named dense tensors and the `NVF1` binary parameter codec.
//!
//! Layout (little-endian): magic `NVF1`, format version `u32`, tensor count
//! `u32`, then per tensor: name length `u32`, name bytes (UTF-8), rank `u32`,
//! `rank` dims as `u32`, and `prod(dims)` values as `f64`.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::math;
use crate::rng::Rng;

pub const MAGIC: [u8; 4] = *b"NVF1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(name: &str, dims: &[usize]) -> Self {
        Self {
            name: name.to_string(),
            dims: dims.to_vec(),
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn uniform(name: &str, dims: &[usize], bound: f64, r: &mut Rng) -> Self {
        let mut t = Self::zeros(name, dims);
        for v in &mut t.data {
            *v = r.gen_range(-bound..bound);
        }
        t
    }

    /// Payload size in bytes when encoded.
    pub fn encoded_len(&self) -> usize {
        4 + self.name.len() + 4 + 4 * self.dims.len() + 8 * self.data.len()
    }
}

/// Ordered collection of tensors. Models index it with fixed positions.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TensorSet {
    tensors: Vec<Tensor>,
}

impl TensorSet {
    pub fn new(tensors: Vec<Tensor>) -> Self {
        Self { tensors }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn into_tensors(self) -> Vec<Tensor> {
        self.tensors
    }

    #[inline]
    pub fn data(&self, i: usize) -> &[f64] {
        &self.tensors[i].data
    }

    #[inline]
    pub fn data_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.tensors[i].data
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor::zeros(&t.name, &t.dims))
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn scale(&mut self, f: f64) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|v| *v *= f);
        }
    }

    pub fn global_norm(&self) -> f64 {
        math::sqrt(
            self.tensors
                .iter()
                .flat_map(|t| t.data.iter())
                .map(|v| v * v)
                .sum(),
        )
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Exact byte length of [`encode`]'s output.
    pub fn encoded_len(&self) -> usize {
        12 + self.tensors.iter().map(Tensor::encoded_len).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamFileError {
    #[error("bad magic bytes {0:?}, expected \"NVF1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("file truncated at byte {0}")]
    Truncated(usize),
    #[error("{0} trailing bytes after the last tensor")]
    TrailingBytes(usize),
    #[error("tensor name at byte {0} is not UTF-8")]
    BadName(usize),
    #[error("tensor {name} has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("missing tensor {0}")]
    MissingTensor(String),
    #[error("unexpected tensor {0}")]
    UnexpectedTensor(String),
    #[error("tensor {0} contains non-finite values")]
    NonFinite(String),
}

pub fn encode(set: &TensorSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(set.encoded_len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(set.len() as u32).to_le_bytes());
    for t in set.tensors() {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
        for &d in &t.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ParamFileError> {
        let end = self.pos.checked_add(n).ok_or(ParamFileError::Truncated(self.pos))?;
        let s = self.bytes.get(self.pos..end).ok_or(ParamFileError::Truncated(self.pos))?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ParamFileError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode(bytes: &[u8]) -> Result<TensorSet, ParamFileError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4)?;
    let magic = [magic[0], magic[1], magic[2], magic[3]];
    if magic != MAGIC {
        return Err(ParamFileError::BadMagic(magic));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(ParamFileError::Version(version));
    }
    let count = r.u32()? as usize;
    let mut tensors = Vec::new();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let at = r.pos;
        let name = core::str::from_utf8(r.take(name_len)?)
            .map_err(|_| ParamFileError::BadName(at))?
            .to_string();
        let rank = r.u32()? as usize;
        let mut dims = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            dims.push(r.u32()? as usize);
        }
        let n: usize = dims.iter().product();
        let payload = r.take(n.checked_mul(8).ok_or(ParamFileError::Truncated(r.pos))?)?;
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect();
        tensors.push(Tensor { name, dims, data });
    }
    if r.pos != bytes.len() {
        return Err(ParamFileError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(TensorSet::new(tensors))
}

/// Checks that `set` holds exactly the tensors `expected` (name, dims), in
/// any order, and returns them in the expected order.
pub fn conform(set: TensorSet, expected: &[(String, Vec<usize>)]) -> Result<TensorSet, ParamFileError> {
    let mut pool: Vec<Option<Tensor>> = set.into_tensors().into_iter().map(Some).collect();
    let mut out = Vec::with_capacity(expected.len());
    for (name, dims) in expected {
        let slot = pool
            .iter_mut()
            .find(|t| t.as_ref().is_some_and(|t| &t.name == name))
            .ok_or_else(|| ParamFileError::MissingTensor(name.clone()))?;
        let t = slot.take().expect("slot checked above");
        if &t.dims != dims {
            return Err(ParamFileError::ShapeMismatch {
                name: name.clone(),
                expected: dims.clone(),
                found: t.dims,
            });
        }
        if !t.data.iter().all(|v| v.is_finite()) {
            return Err(ParamFileError::NonFinite(name.clone()));
        }
        out.push(t);
    }
    if let Some(extra) = pool.into_iter().flatten().next() {
        return Err(ParamFileError::UnexpectedTensor(extra.name));
    }
    Ok(TensorSet::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn sample() -> TensorSet {
        let mut r = seeded(1);
        TensorSet::new(vec![
            Tensor::uniform("a.w", &[3, 4], 1.0, &mut r),
            Tensor::uniform("a.b", &[3], 1.0, &mut r),
        ])
    }

    #[test]
    fn codec_round_trip_and_size() {
        let s = sample();
        let bytes = encode(&s);
        // header 12 + per tensor (4 + name + 4 + 4*rank + 8*n)
        assert_eq!(bytes.len(), 12 + (4 + 3 + 4 + 8 + 8 * 12) + (4 + 3 + 4 + 4 + 8 * 3));
        assert_eq!(bytes.len(), s.encoded_len());
        assert_eq!(decode(&bytes).unwrap(), s);
    }

    #[test]
    fn codec_errors() {
        let mut bytes = encode(&sample());
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(ParamFileError::BadMagic(_))));
        let mut bytes = encode(&sample());
        bytes[4] = 2;
        assert_eq!(decode(&bytes), Err(ParamFileError::Version(2)));
        let bytes = encode(&sample());
        assert!(matches!(decode(&bytes[..bytes.len() - 3]), Err(ParamFileError::Truncated(_))));
    }

    #[test]
    fn conform_checks_names_and_shapes() {
        let expected = vec![("a.b".to_string(), vec![3]), ("a.w".to_string(), vec![3, 4])];
        let c = conform(sample(), &expected).unwrap();
        assert_eq!(c.tensors()[0].name, "a.b");
        let wrong = vec![("a.w".to_string(), vec![4, 3]), ("a.b".to_string(), vec![3])];
        match conform(sample(), &wrong) {
            Err(ParamFileError::ShapeMismatch { name, .. }) => assert_eq!(name, "a.w"),
            other => panic!("{other:?}"),
        }
        let missing = vec![("a.w".to_string(), vec![3, 4]), ("c".to_string(), vec![1])];
        assert_eq!(conform(sample(), &missing), Err(ParamFileError::MissingTensor("c".into())));
    }
}
