//! Container layout, all integers and floats little-endian:
//!
//! ```text
//! "VOMC" | version u8 | A u8 | predictor u8 | D u8 | λ f64 | α f64 × A
//!        | N u32 | padding u8 × D | payload
//! ```

use crate::error::{Result, VomcError};
use crate::model::{Alphabet, CtwPrior, Symbol};

pub const MAGIC: &[u8; 4] = b"VOMC";
pub const VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Header {
    pub version: u8,
    pub alphabet: Alphabet,
    pub predictor_id: u8,
    /// Context length of the predictor (the PPM order for PPM).
    pub depth: u8,
    pub lambda: f64,
    pub alpha: Vec<f64>,
    pub len: u32,
    /// Oldest first, `depth` symbols.
    pub padding: Vec<Symbol>,
}

impl Header {
    pub fn prior(&self) -> Result<CtwPrior> {
        CtwPrior::new(self.alphabet, self.depth as usize, self.lambda, self.alpha.clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodeStream {
    pub header: Header,
    pub payload: Vec<u8>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(VomcError::Truncated(what))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn f64(&mut self, what: &'static str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("eight bytes")))
    }
}

impl CodeStream {
    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(24 + 8 * h.alpha.len() + h.padding.len() + self.payload.len());
        out.extend(MAGIC);
        out.extend([h.version, h.alphabet.size() as u8, h.predictor_id, h.depth]);
        out.extend(h.lambda.to_le_bytes());
        for a in &h.alpha {
            out.extend(a.to_le_bytes());
        }
        out.extend(h.len.to_le_bytes());
        out.extend(&h.padding);
        out.extend(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4, "magic").map_err(|_| VomcError::BadMagic)? != MAGIC {
            return Err(VomcError::BadMagic);
        }
        let version = r.u8("version")?;
        if version != VERSION {
            return Err(VomcError::UnsupportedVersion(version));
        }
        let alphabet = Alphabet::new(r.u8("alphabet size")? as usize)?;
        let predictor_id = r.u8("predictor id")?;
        let depth = r.u8("depth")?;
        let lambda = r.f64("lambda")?;
        let alpha = (0..alphabet.size()).map(|_| r.f64("alpha")).collect::<Result<Vec<_>>>()?;
        let len = u32::from_le_bytes(r.take(4, "length")?.try_into().expect("four bytes"));
        let padding = r.take(depth as usize, "padding")?.to_vec();
        for &s in &padding {
            alphabet.check(s as usize)?;
        }
        let payload = bytes[r.at..].to_vec();
        Ok(Self {
            header: Header { version, alphabet, predictor_id, depth, lambda, alpha, len, padding },
            payload,
        })
    }
}
