//! Byte-oriented range coder over 64-bit state with carry propagation into
//! already-written bytes.

use crate::error::{Result, VomcError};

/// The range never drops below this after renormalization.
const TOP: u64 = 1 << 56;

#[derive(Clone, Debug)]
pub struct RangeEncoder {
    low: u64,
    range: u64,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        Self { low: 0, range: u64::MAX, out: Vec::new() }
    }

    fn carry(&mut self) {
        for b in self.out.iter_mut().rev() {
            *b = b.wrapping_add(1);
            if *b != 0 {
                return;
            }
        }
        unreachable!("carry out of the code value");
    }

    /// Narrow to `[cum, cum + freq)` out of `total`.
    pub fn encode(&mut self, cum: u32, freq: u32, total: u32) {
        debug_assert!(freq > 0 && cum + freq <= total);
        let r = self.range / total as u64;
        let (low, overflow) = self.low.overflowing_add(r * cum as u64);
        self.low = low;
        if overflow {
            self.carry();
        }
        self.range = r * freq as u64;
        while self.range < TOP {
            self.out.push((self.low >> 56) as u8);
            self.low <<= 8;
            self.range <<= 8;
        }
    }

    /// Emit the shortest byte string that pins a value inside the interval.
    pub fn finish(mut self) -> Vec<u8> {
        let k = 63 - self.range.leading_zeros();
        let mask = (1u64 << k) - 1;
        let (v, overflow) = self.low.overflowing_add(mask);
        if overflow {
            self.carry();
        }
        let v = v & !mask;
        let bytes = (64 - k).div_ceil(8);
        for j in 0..bytes {
            self.out.push((v >> (56 - 8 * j)) as u8);
        }
        self.out
    }
}

#[derive(Clone, Debug)]
pub struct RangeDecoder<'a> {
    input: &'a [u8],
    next: usize,
    code: u64,
    range: u64,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(input: &'a [u8]) -> Self {
        let mut d = Self { input, next: 0, code: 0, range: u64::MAX };
        for _ in 0..8 {
            d.code = (d.code << 8) | d.byte() as u64;
        }
        d
    }

    fn byte(&mut self) -> u8 {
        let b = self.input.get(self.next).copied().unwrap_or(0);
        self.next += 1;
        b
    }

    /// Target count in `[0, total)` for the next symbol.
    pub fn target(&self, total: u32) -> u32 {
        let r = self.range / total as u64;
        (self.code / r).min(total as u64 - 1) as u32
    }

    pub fn consume(&mut self, cum: u32, freq: u32, total: u32) -> Result<()> {
        let r = self.range / total as u64;
        self.code -= r * cum as u64;
        self.range = r * freq as u64;
        while self.range < TOP {
            self.code = (self.code << 8) | self.byte() as u64;
            self.range <<= 8;
        }
        // The encoder flushes at most eight bytes beyond its last shift.
        if self.next > self.input.len() + 8 {
            return Err(VomcError::Truncated("payload ended early"));
        }
        Ok(())
    }
}
