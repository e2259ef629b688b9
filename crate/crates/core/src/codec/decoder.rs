use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::bits::BitBuf;
use super::message::{PositionFix, StaticReport, POSITION_BITS, STATIC_BITS, STATIC_MIN_BITS};
use super::sentence::{RawSentence, Sentence};
use super::{CodecError, ErrorKind};

/// Feed-time lifetime of an incomplete multipart message.
pub const FRAGMENT_TTL_S: i64 = 30;

#[derive(Debug, Clone, PartialEq)]
pub enum Decoded {
    Position(PositionFix),
    Static(StaticReport),
    Skip(SkipReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    /// Fragment stored, waiting for the rest of the message.
    Buffered,
    /// Class B position report (types 18 and 19).
    ClassB(u8),
    Unsupported(u8),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeStats {
    pub lines: u64,
    pub positions: u64,
    pub statics: u64,
    pub buffered: u64,
    pub class_b: u64,
    pub unsupported: u64,
    pub framing_errors: u64,
    pub checksum_errors: u64,
    pub armor_errors: u64,
    pub length_errors: u64,
    pub fragment_errors: u64,
    pub other_errors: u64,
    /// Type-5 payloads zero-filled from 422 or 423 bits.
    pub padded: u64,
    /// Position reports without a feed timestamp.
    pub untimed: u64,
    /// Incomplete multipart messages dropped by the eviction timer.
    pub evicted: u64,
}

impl DecodeStats {
    pub fn errors(&self) -> u64 {
        self.framing_errors
            + self.checksum_errors
            + self.armor_errors
            + self.length_errors
            + self.fragment_errors
            + self.other_errors
    }

    /// Every line ends in exactly one outcome bucket.
    pub fn reconciles(&self) -> bool {
        self.lines == self.positions + self.statics + self.buffered + self.class_b + self.unsupported + self.errors()
    }

    pub fn merge(&mut self, o: &DecodeStats) {
        self.lines += o.lines;
        self.positions += o.positions;
        self.statics += o.statics;
        self.buffered += o.buffered;
        self.class_b += o.class_b;
        self.unsupported += o.unsupported;
        self.framing_errors += o.framing_errors;
        self.checksum_errors += o.checksum_errors;
        self.armor_errors += o.armor_errors;
        self.length_errors += o.length_errors;
        self.fragment_errors += o.fragment_errors;
        self.other_errors += o.other_errors;
        self.padded += o.padded;
        self.untimed += o.untimed;
        self.evicted += o.evicted;
    }

    fn record_error(&mut self, err: &CodecError) {
        match err.kind() {
            ErrorKind::Framing => self.framing_errors += 1,
            ErrorKind::Checksum => self.checksum_errors += 1,
            ErrorKind::Armor => self.armor_errors += 1,
            ErrorKind::Length => self.length_errors += 1,
            ErrorKind::Fragment => self.fragment_errors += 1,
            ErrorKind::OutOfRange => self.other_errors += 1,
        }
    }
}

#[derive(Debug)]
struct Pending {
    count: u8,
    next_index: u8,
    bits: BitBuf,
    first_seen: Option<i64>,
}

/// Streaming decoder for one input lane.
///
/// Holds the multipart reassembly buffer, keyed by (channel, sequence id).
#[derive(Debug, Default)]
pub struct Decoder {
    pending: HashMap<(Option<char>, Option<u8>), Pending>,
    feed_time: Option<i64>,
    stats: DecodeStats,
}

impl Decoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> &DecodeStats {
        &self.stats
    }

    pub fn pending_fragments(&self) -> usize {
        self.pending.len()
    }

    /// Decode one line of feed text. Never panics; every failure is counted.
    pub fn decode_line(&mut self, text: &str) -> Result<Decoded, CodecError> {
        match RawSentence::from_feed_line(text) {
            Ok(raw) => self.decode(&raw),
            Err(e) => {
                self.stats.lines += 1;
                self.stats.record_error(&e);
                Err(e)
            }
        }
    }

    pub fn decode(&mut self, raw: &RawSentence) -> Result<Decoded, CodecError> {
        self.stats.lines += 1;
        if let Some(t) = raw.receipt_epoch {
            self.feed_time = Some(self.feed_time.map_or(t, |f| f.max(t)));
            self.evict();
        }
        let result = self.decode_inner(raw);
        match &result {
            Ok(Decoded::Position(fix)) => {
                self.stats.positions += 1;
                if fix.epoch.is_none() {
                    self.stats.untimed += 1;
                }
            }
            Ok(Decoded::Static(_)) => self.stats.statics += 1,
            Ok(Decoded::Skip(SkipReason::Buffered)) => self.stats.buffered += 1,
            Ok(Decoded::Skip(SkipReason::ClassB(_))) => self.stats.class_b += 1,
            Ok(Decoded::Skip(SkipReason::Unsupported(_))) => self.stats.unsupported += 1,
            Err(e) => self.stats.record_error(e),
        }
        result
    }

    fn evict(&mut self) {
        let Some(now) = self.feed_time else { return };
        let before = self.pending.len();
        self.pending.retain(|_, p| p.first_seen.is_none_or(|t| now - t <= FRAGMENT_TTL_S));
        self.stats.evicted += (before - self.pending.len()) as u64;
    }

    fn decode_inner(&mut self, raw: &RawSentence) -> Result<Decoded, CodecError> {
        let sentence = Sentence::parse(&raw.line)?;
        if sentence.fragment_count == 1 {
            let bits = BitBuf::from_armored(&sentence.payload, sentence.fill_bits)?;
            return self.dispatch(bits, raw.receipt_epoch);
        }

        let key = (sentence.channel, sentence.sequence_id);
        if sentence.fragment_index == 1 {
            let bits = BitBuf::from_armored(&sentence.payload, 0)?;
            if self
                .pending
                .insert(
                    key,
                    Pending {
                        count: sentence.fragment_count,
                        next_index: 2,
                        bits,
                        first_seen: raw.receipt_epoch.or(self.feed_time),
                    },
                )
                .is_some()
            {
                self.stats.evicted += 1;
            }
            return Ok(Decoded::Skip(SkipReason::Buffered));
        }

        let Some(mut pending) = self.pending.remove(&key) else {
            return Err(CodecError::FragmentMismatch(format!(
                "fragment {} of {} without its predecessors",
                sentence.fragment_index, sentence.fragment_count
            )));
        };
        if pending.count != sentence.fragment_count || pending.next_index != sentence.fragment_index {
            return Err(CodecError::FragmentMismatch(format!(
                "expected fragment {} of {}, got {} of {}",
                pending.next_index, pending.count, sentence.fragment_index, sentence.fragment_count
            )));
        }
        let last = sentence.fragment_index == sentence.fragment_count;
        let fill = if last { sentence.fill_bits } else { 0 };
        pending.bits.extend(&BitBuf::from_armored(&sentence.payload, fill)?);
        if !last {
            pending.next_index += 1;
            self.pending.insert(key, pending);
            return Ok(Decoded::Skip(SkipReason::Buffered));
        }
        self.dispatch(pending.bits, raw.receipt_epoch)
    }

    fn dispatch(&mut self, mut bits: BitBuf, epoch: Option<i64>) -> Result<Decoded, CodecError> {
        if bits.len() < 6 {
            return Err(CodecError::Length { msg_type: None, bits: bits.len() });
        }
        let msg_type = bits.uint(0, 6) as u8;
        match msg_type {
            1..=3 => {
                if bits.len() != POSITION_BITS {
                    return Err(CodecError::Length { msg_type: Some(msg_type), bits: bits.len() });
                }
                Ok(Decoded::Position(PositionFix::from_bits(&bits, epoch)))
            }
            5 => {
                let n = bits.len();
                if !(STATIC_MIN_BITS..=STATIC_BITS).contains(&n) {
                    return Err(CodecError::Length { msg_type: Some(5), bits: n });
                }
                if n < STATIC_BITS {
                    self.stats.padded += 1;
                    bits.pad_to(STATIC_BITS);
                }
                Ok(Decoded::Static(StaticReport::from_bits(&bits)))
            }
            18 | 19 => Ok(Decoded::Skip(SkipReason::ClassB(msg_type))),
            other => Ok(Decoded::Skip(SkipReason::Unsupported(other))),
        }
    }
}
