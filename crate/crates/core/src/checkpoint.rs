//! Binary checkpoint of a [`DenseHead`] and its [`AdamState`].
//!
//! ```text
//! magic        4 bytes "GCKP"
//! version      u32 (1)
//! input        u64
//! hidden1      u64
//! hidden2      u64
//! output       u64 (6)
//! dropout_p    f64
//! activation   u32 (0 linear, 1 tanh)
//! step         u64
//! lr beta1 beta2 eps   4 x f64
//! params, adam m, adam v   each: per layer weights then bias, f64
//! ```
//!
//! Integers and reals are little-endian, so save/load is bit-exact.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::regressor::{
    AdamConfig, AdamState, DenseHead, HeadDims, OutputActivation, Params, OUTPUT_DIM,
};

pub const MAGIC: [u8; 4] = *b"GCKP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub head: DenseHead,
    pub adam: AdamState,
}

impl Checkpoint {
    pub fn new(head: DenseHead, adam: AdamState) -> Self {
        Self { head, adam }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let d = self.head.dims();
        let mut out = Vec::with_capacity(96 + 24 * self.head.params.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for n in [d.input, d.hidden1, d.hidden2, OUTPUT_DIM] {
            out.extend_from_slice(&(n as u64).to_le_bytes());
        }
        out.extend_from_slice(&self.head.dropout_p.to_le_bytes());
        let act: u32 = match self.head.output_activation {
            OutputActivation::Linear => 0,
            OutputActivation::Tanh => 1,
        };
        out.extend_from_slice(&act.to_le_bytes());
        out.extend_from_slice(&self.adam.step.to_le_bytes());
        let c = self.adam.config;
        for v in [c.lr, c.beta1, c.beta2, c.eps] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for params in [&self.head.params, &self.adam.m, &self.adam.v] {
            for v in params.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic {
                expected: MAGIC,
                found: magic,
            });
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::VersionUnsupported(version));
        }
        let mut dim = || -> Result<usize> {
            let v = r.u64()?;
            usize::try_from(v)
                .ok()
                .filter(|&n| n > 0 && n < (1 << 28))
                .ok_or_else(|| Error::MalformedHeader(format!("implausible layer width {v}")))
        };
        let dims = HeadDims {
            input: dim()?,
            hidden1: dim()?,
            hidden2: dim()?,
        };
        let output = dim()?;
        if output != OUTPUT_DIM {
            return Err(Error::DimMismatch {
                expected: OUTPUT_DIM,
                actual: output,
            });
        }
        let dropout_p = r.f64()?;
        if !(0.0..1.0).contains(&dropout_p) {
            return Err(Error::MalformedHeader(format!("dropout {dropout_p}")));
        }
        let activation = match u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) {
            0 => OutputActivation::Linear,
            1 => OutputActivation::Tanh,
            other => return Err(Error::MalformedHeader(format!("activation code {other}"))),
        };
        let step = r.u64()?;
        let config = AdamConfig {
            lr: r.f64()?,
            beta1: r.f64()?,
            beta2: r.f64()?,
            eps: r.f64()?,
        };
        let n = Params::zeros(dims).len() as u64;
        let expected = r.pos as u64 + 3 * n * 8;
        let actual = bytes.len() as u64;
        if actual < expected {
            return Err(Error::TruncatedPayload { expected, actual });
        }
        if actual > expected {
            return Err(Error::TrailingData {
                extra: actual - expected,
            });
        }
        let mut read_params = || -> Result<Params> {
            let mut p = Params::zeros(dims);
            for v in p.values_mut() {
                *v = r.f64()?;
            }
            Ok(p)
        };
        let params = read_params()?;
        let m = read_params()?;
        let v = read_params()?;
        let head = DenseHead::from_params(params, dropout_p, activation);
        Ok(Self {
            head,
            adam: AdamState { config, m, v, step },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Hex SHA-256 of the serialized checkpoint.
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::TruncatedPayload {
                expected: (self.pos + n) as u64,
                actual: self.bytes.len() as u64,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
