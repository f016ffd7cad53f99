//! Named parameter collections and the `NICP` checkpoint format.
//!
//! Layout (all integers little-endian):
//!
//! | field          | type                               |
//! |----------------|------------------------------------|
//! | magic          | `b"NICP"`                          |
//! | version        | `u16` (= 1)                        |
//! | entry count    | `u32`                              |
//! | per entry      | name length `u32`, UTF-8 name, rank `u32`, `rank` extents `u32`, values `f64` row-major |

use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NICP";
pub const CHECKPOINT_VERSION: u16 = 1;

/// Ordered, named collection of tensors: weights, biases and normalization
/// statistics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: IndexMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Option<Tensor> {
        self.entries.insert(name.into(), value)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.get_mut(name)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("missing parameter {name}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Total number of scalar values across all entries.
    pub fn num_values(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }

    /// Copy of the entries whose name starts with `prefix`.
    pub fn subset(&self, prefix: &str) -> ParamStore {
        Self {
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| k.starts_with(prefix))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    pub fn extend(&mut self, other: ParamStore) {
        self.entries.extend(other.entries);
    }

    pub fn all_finite(&self) -> bool {
        self.entries.values().all(Tensor::is_finite)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&to_u32(self.entries.len())?.to_le_bytes())?;
        for (name, t) in &self.entries {
            w.write_all(&to_u32(name.len())?.to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&to_u32(t.rank())?.to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&to_u32(d)?.to_le_bytes())?;
            }
            let mut buf = Vec::with_capacity(t.len() * 8);
            for v in t.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("bad magic, not a NICP checkpoint".into()));
        }
        let version = u16::from_le_bytes(read_array(&mut r)?);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let count = u32::from_le_bytes(read_array(&mut r)?) as usize;
        let mut store = ParamStore::new();
        for _ in 0..count {
            let len = u32::from_le_bytes(read_array(&mut r)?) as usize;
            let mut name = vec![0u8; len];
            read_exact(&mut r, &mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?;
            let rank = u32::from_le_bytes(read_array(&mut r)?) as usize;
            let shape = (0..rank)
                .map(|_| Ok(u32::from_le_bytes(read_array(&mut r)?) as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let mut raw = vec![0u8; n * 8];
            read_exact(&mut r, &mut raw)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let t = Tensor::new(shape, data).map_err(|e| Error::Format(e.to_string()))?;
            if store.insert(name.clone(), t).is_some() {
                return Err(Error::Format(format!("duplicate parameter {name}")));
            }
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after last entry".into()));
        }
        Ok(store)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn to_u32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated checkpoint".into()),
        _ => Error::Io(e),
    })
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(r, &mut buf)?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("enc.conv0.w", Tensor::from_fn(&[3, 3, 3, 2], |i| i as f64 * 0.1 - 1.0));
        s.insert("enc.conv0.b", Tensor::vector(vec![-0.0, f64::MIN_POSITIVE]));
        s.insert("scale", Tensor::scalar(std::f64::consts::PI));
        s
    }

    #[test]
    fn layout_is_as_documented() {
        let mut s = ParamStore::new();
        s.insert("ab", Tensor::vector(vec![1.5]));
        let bytes = s.to_bytes();
        // magic + version + count + (len + name + rank + 1 extent + 1 value)
        assert_eq!(bytes.len(), 4 + 2 + 4 + 4 + 2 + 4 + 4 + 8);
        assert_eq!(&bytes[..4], b"NICP");
        assert_eq!(&bytes[4..6], &1u16.to_le_bytes());
        assert_eq!(&bytes[bytes.len() - 8..], &1.5f64.to_le_bytes());
    }

    #[test]
    fn order_is_preserved() {
        let s = sample();
        let back = ParamStore::from_bytes(&s.to_bytes()).unwrap();
        let names: Vec<_> = back.names().collect();
        assert_eq!(names, vec!["enc.conv0.w", "enc.conv0.b", "scale"]);
        assert_eq!(back.get("enc.conv0.b").unwrap().data()[0].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn rejects_corruption() {
        let mut bytes = sample().to_bytes();
        assert!(ParamStore::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        bytes[0] = b'X';
        assert!(matches!(ParamStore::from_bytes(&bytes), Err(Error::Format(_))));
        let mut bytes = sample().to_bytes();
        bytes[4] = 9;
        assert!(ParamStore::from_bytes(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            entries in proptest::collection::vec(
                ("[a-z.]{1,12}", proptest::collection::vec(1usize..4, 0..4), any::<u64>()),
                0..6,
            )
        ) {
            let mut store = ParamStore::new();
            for (name, shape, bits) in entries {
                let n: usize = shape.iter().product();
                let data = (0..n).map(|i| f64::from_bits(bits.rotate_left(i as u32))).collect();
                store.insert(name, Tensor::new(shape, data).unwrap());
            }
            let bytes = store.to_bytes();
            let back = ParamStore::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
