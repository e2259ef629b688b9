//! Big-endian bit buffers over de-armored payloads.

use super::armor::{armor, char_to_sixbit, dearmor, sixbit_to_char};
use super::CodecError;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitBuf {
    bits: Vec<bool>,
}

impl BitBuf {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// De-armor `payload`, dropping the trailing `fill_bits`.
    pub fn from_armored(payload: &str, fill_bits: u8) -> Result<Self, CodecError> {
        let mut bits = Vec::with_capacity(payload.len() * 6);
        for ch in payload.chars() {
            let v = dearmor(ch)?;
            for shift in (0..6).rev() {
                bits.push((v >> shift) & 1 == 1);
            }
        }
        let fill = fill_bits as usize;
        if fill > 5 || fill > bits.len() {
            return Err(CodecError::Framing(format!("fill bits {fill_bits} out of range")));
        }
        bits.truncate(bits.len() - fill);
        Ok(Self { bits })
    }

    /// Armor into payload text plus the number of fill bits appended.
    pub fn to_armored(&self) -> (String, u8) {
        let fill = (6 - self.bits.len() % 6) % 6;
        let mut out = String::with_capacity(self.bits.len().div_ceil(6));
        for chunk in self.bits.chunks(6) {
            let mut v = 0u8;
            for i in 0..6 {
                v = (v << 1) | u8::from(chunk.get(i).copied().unwrap_or(false));
            }
            out.push(armor(v));
        }
        (out, fill as u8)
    }

    /// Zero-extend to `len` bits.
    pub fn pad_to(&mut self, len: usize) {
        if self.bits.len() < len {
            self.bits.resize(len, false);
        }
    }

    pub fn extend(&mut self, other: &BitBuf) {
        self.bits.extend_from_slice(&other.bits);
    }

    pub fn uint(&self, start: usize, width: usize) -> u64 {
        debug_assert!(width <= 64 && start + width <= self.bits.len());
        self.bits[start..start + width].iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
    }

    pub fn int(&self, start: usize, width: usize) -> i64 {
        let raw = self.uint(start, width);
        if width > 0 && width < 64 && (raw >> (width - 1)) & 1 == 1 {
            raw as i64 - (1i64 << width)
        } else {
            raw as i64
        }
    }

    /// Six-bit text, trailing '@' and spaces stripped.
    pub fn text(&self, start: usize, chars: usize) -> String {
        let s: String = (0..chars).map(|i| sixbit_to_char(self.uint(start + 6 * i, 6) as u8)).collect();
        s.trim_end_matches(['@', ' ']).to_string()
    }

    pub fn push_uint(&mut self, value: u64, width: usize) {
        for shift in (0..width).rev() {
            self.bits.push(shift < 64 && (value >> shift) & 1 == 1);
        }
    }

    pub fn push_int(&mut self, value: i64, width: usize) {
        let mask = if width >= 64 { u64::MAX } else { (1u64 << width) - 1 };
        self.push_uint(value as u64 & mask, width);
    }

    /// Push `text` padded with '@' to `chars` characters.
    pub fn push_text(&mut self, text: &str, chars: usize) -> Result<(), CodecError> {
        let mut n = 0;
        for ch in text.chars() {
            let v = char_to_sixbit(ch)
                .ok_or_else(|| CodecError::OutOfRange(format!("character {ch:?} not in 6-bit alphabet")))?;
            if n == chars {
                return Err(CodecError::OutOfRange(format!("text longer than {chars} characters")));
            }
            self.push_uint(v as u64, 6);
            n += 1;
        }
        for _ in n..chars {
            self.push_uint(0, 6);
        }
        Ok(())
    }
}
