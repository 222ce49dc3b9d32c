//! Feature vectors consumed by the regression head, a deterministic toy
//! extractor, and the `GFEA` interchange file written by external backbones.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! magic      4 bytes  "GFEA"
//! version    u32      1
//! backbone   u32 byte length + UTF-8
//! dim        u64
//! count      u64
//! ids        count x (u32 byte length + UTF-8)
//! data       count x dim f32, row-major
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::preprocess::NetInput;

pub const MAGIC: [u8; 4] = *b"GFEA";
pub const VERSION: u32 = 1;

/// Side of the pooling grid used by the toy extractor.
pub const TOY_GRID: usize = 8;
pub const TOY_POOLED: usize = TOY_GRID * TOY_GRID * 3;
pub const TOY_DEFAULT_DIM: usize = 1024;
const TOY_GAIN: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVec {
    values: Vec<f64>,
}

impl FeatureVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidConfig("feature vector must not be empty".into()));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature {
                id: String::new(),
                index,
            });
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Frozen stand-in for a pretrained backbone: 8x8 average pooling per
/// channel, a fixed seeded random projection, then `tanh`.
#[derive(Debug, Clone)]
pub struct ToyExtractor {
    seed: u64,
    dim: usize,
    /// `dim x TOY_POOLED`, row-major.
    projection: Vec<f64>,
}

impl ToyExtractor {
    pub fn new(seed: u64, dim: usize) -> Self {
        assert!(dim > 0, "toy feature dimension must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6772_6173_7066_6561);
        let bound = TOY_GAIN * (3.0 / TOY_POOLED as f64).sqrt();
        let projection = (0..dim * TOY_POOLED)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        Self {
            seed,
            dim,
            projection,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> String {
        format!("toy-projection-{}x{}-seed{}", TOY_POOLED, self.dim, self.seed)
    }

    /// Channel-major pooled descriptor of length [`TOY_POOLED`].
    pub fn pool(input: &NetInput) -> Vec<f64> {
        input
            .channels
            .iter()
            .flat_map(|c| c.average_pool(TOY_GRID))
            .collect()
    }

    pub fn project(&self, pooled: &[f64]) -> FeatureVec {
        assert_eq!(pooled.len(), TOY_POOLED);
        let values = self
            .projection
            .chunks_exact(TOY_POOLED)
            .map(|row| {
                let dot: f64 = row.iter().zip(pooled).map(|(w, x)| w * x).sum();
                dot.tanh()
            })
            .collect();
        FeatureVec { values }
    }

    pub fn extract(&self, input: &NetInput) -> FeatureVec {
        self.project(&Self::pool(input))
    }
}

/// One-shot convenience around [`ToyExtractor`].
pub fn toy_extract(input: &NetInput, seed: u64, dim: usize) -> FeatureVec {
    ToyExtractor::new(seed, dim).extract(input)
}

/// Parsed feature file: per-id vectors in file order.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub backbone: String,
    pub dim: usize,
    entries: Vec<(String, FeatureVec)>,
    index: HashMap<String, usize>,
}

impl FeatureSet {
    pub fn new(backbone: impl Into<String>, dim: usize) -> Self {
        Self {
            backbone: backbone.into(),
            dim,
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, features: FeatureVec) -> Result<()> {
        let id = id.into();
        if features.dim() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                actual: features.dim(),
            });
        }
        if self.index.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.index.insert(id.clone(), self.entries.len());
        self.entries.push((id, features));
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&FeatureVec> {
        self.index.get(id).map(|&i| &self.entries[i].1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &FeatureVec)> {
        self.entries.iter().map(|(id, f)| (id.as_str(), f))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.entries.len() * (self.dim * 4 + 16));
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_str(&mut out, &self.backbone);
        out.extend_from_slice(&(self.dim as u64).to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for (id, _) in &self.entries {
            put_str(&mut out, id);
        }
        for (_, f) in &self.entries {
            for &v in f.values() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic {
                expected: MAGIC,
                found: magic,
            });
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::VersionUnsupported(version));
        }
        let backbone = r.string()?;
        let dim = r.u64()?;
        let count = r.u64()?;
        if dim == 0 {
            return Err(Error::MalformedHeader("dim must be positive".into()));
        }
        // every id needs at least its 4-byte length prefix
        let min_ids = count
            .checked_mul(4)
            .ok_or_else(|| Error::MalformedHeader(format!("count {count} overflows")))?;
        r.require(min_ids)?;
        let mut ids = Vec::with_capacity(count as usize);
        for _ in 0..count {
            ids.push(r.string()?);
        }
        let payload = count
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::MalformedHeader(format!("{count} x {dim} overflows")))?;
        let expected = r.pos as u64 + payload;
        let actual = bytes.len() as u64;
        if actual < expected {
            return Err(Error::TruncatedPayload { expected, actual });
        }
        if actual > expected {
            return Err(Error::TrailingData {
                extra: actual - expected,
            });
        }
        let dim = dim as usize;
        let mut set = FeatureSet::new(backbone, dim);
        let data = &bytes[r.pos..];
        for (id, row) in ids.into_iter().zip(data.chunks_exact(dim * 4)) {
            let values: Vec<f64> = row
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
                .collect();
            if let Some(index) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteFeature { id, index });
            }
            set.insert(id, FeatureVec { values })?;
        }
        Ok(set)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Reads and validates a feature file.
pub fn load_features(path: &Path) -> Result<FeatureSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    FeatureSet::from_bytes(&bytes)
}

/// What `features validate` reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureFileSummary {
    pub backbone: String,
    pub dim: usize,
    pub count: usize,
    /// Hex SHA-256 of the whole file.
    pub checksum: String,
}

pub fn validate_feature_file(path: &Path) -> Result<FeatureFileSummary> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let set = FeatureSet::from_bytes(&bytes)?;
    Ok(FeatureFileSummary {
        backbone: set.backbone.clone(),
        dim: set.dim,
        count: set.len(),
        checksum: hex::encode(Sha256::digest(&bytes)),
    })
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn require(&self, n: u64) -> Result<()> {
        let expected = self.pos as u64 + n;
        if expected > self.bytes.len() as u64 {
            return Err(Error::TruncatedPayload {
                expected,
                actual: self.bytes.len() as u64,
            });
        }
        Ok(())
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        self.require(n as u64)?;
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| Error::MalformedHeader("string is not valid UTF-8".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plane::Plane;
    use crate::preprocess::FRAME;

    fn small_set() -> FeatureSet {
        let mut set = FeatureSet::new("alexnet:features", 3);
        set.insert("pcd0100", FeatureVec::new(vec![0.5, -1.25, 3.0]).unwrap())
            .unwrap();
        set.insert("pcd0101", FeatureVec::new(vec![0.0, 2.0, -0.125]).unwrap())
            .unwrap();
        set
    }

    #[test]
    fn bytes_roundtrip() {
        let set = small_set();
        let back = FeatureSet::from_bytes(&set.to_bytes()).unwrap();
        assert_eq!(back.backbone, "alexnet:features");
        assert_eq!(back.dim, 3);
        assert_eq!(back.get("pcd0101"), set.get("pcd0101"));
    }

    #[test]
    fn rejects_damaged_files() {
        let bytes = small_set().to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(FeatureSet::from_bytes(&bad), Err(Error::BadMagic { .. })));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            FeatureSet::from_bytes(&bad),
            Err(Error::VersionUnsupported(9))
        ));
        let cut = &bytes[..bytes.len() - 1];
        match FeatureSet::from_bytes(cut) {
            Err(Error::TruncatedPayload { expected, actual }) => {
                assert_eq!(expected, bytes.len() as u64);
                assert_eq!(actual, bytes.len() as u64 - 1);
            }
            other => panic!("{other:?}"),
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(
            FeatureSet::from_bytes(&long),
            Err(Error::TrailingData { extra: 1 })
        ));
        assert!(matches!(
            FeatureSet::from_bytes(&bytes[..10]),
            Err(Error::TruncatedPayload { .. })
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut set = small_set();
        let err = set.insert("pcd0100", FeatureVec::new(vec![1.0; 3]).unwrap());
        assert!(matches!(err, Err(Error::DuplicateId(_))));
        // a file carrying a duplicate is rejected on load as well
        let mut bytes = small_set().to_bytes();
        let pos = bytes.windows(7).rposition(|w| w == b"pcd0101").unwrap();
        bytes[pos + 6] = b'0';
        assert!(matches!(FeatureSet::from_bytes(&bytes), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn toy_zero_input_gives_zero_features() {
        let f = toy_extract(&NetInput::filled(0.0), 3, 64);
        assert_eq!(f.dim(), 64);
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn toy_is_deterministic_and_sensitive() {
        let base = NetInput::new(std::array::from_fn(|c| {
            Plane::from_fn(FRAME, FRAME, |u, v| ((u * 7 + v * 3 + c) % 11) as f64 / 5.0 - 1.0)
        }));
        let a = toy_extract(&base, 5, 128);
        assert_eq!(a, toy_extract(&base, 5, 128));
        let mut changed = base.clone();
        let p = changed.channels[1].get(41, 40);
        assert!(p != 0.0);
        changed.channels[1].set(41, 40, -p);
        assert_ne!(a, toy_extract(&changed, 5, 128));
        assert_ne!(a, toy_extract(&base, 6, 128));
    }
}
