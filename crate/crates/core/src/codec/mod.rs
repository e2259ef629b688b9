//! AIS AIVDM/AIVDO decoding and encoding.
//!
//! Only the reports the mobility pipeline consumes are modelled: class A
//! position reports (types 1, 2, 3) and static and voyage data (type 5).
//! Everything else decodes to [`Decoded::Skip`].

mod armor;
mod bits;
mod decoder;
mod message;
mod sentence;

use thiserror::Error;

pub use armor::{armor, dearmor};
pub use bits::BitBuf;
pub use decoder::{DecodeStats, Decoded, Decoder, SkipReason, FRAGMENT_TTL_S};
pub use message::{NavStatus, PositionFix, StaticReport, POSITION_BITS, STATIC_BITS, STATIC_MIN_BITS};
pub use sentence::{checksum, verify_checksum, RawSentence, Sentence, Talker};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("framing: {0}")]
    Framing(String),
    #[error("checksum mismatch")]
    Checksum,
    #[error("character {0:?} is outside the payload alphabet")]
    BadArmor(char),
    #[error("payload of {bits} bits is invalid for message type {msg_type:?}")]
    Length { msg_type: Option<u8>, bits: usize },
    #[error("fragment mismatch: {0}")]
    FragmentMismatch(String),
    #[error("field out of range: {0}")]
    OutOfRange(String),
}

/// Coarse classification of [`CodecError`] used for statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorKind {
    Framing,
    Checksum,
    Armor,
    Length,
    Fragment,
    OutOfRange,
}

impl CodecError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Self::Framing(_) => ErrorKind::Framing,
            Self::Checksum => ErrorKind::Checksum,
            Self::BadArmor(_) => ErrorKind::Armor,
            Self::Length { .. } => ErrorKind::Length,
            Self::FragmentMismatch(_) => ErrorKind::Fragment,
            Self::OutOfRange(_) => ErrorKind::OutOfRange,
        }
    }
}

/// Encode a position report as a single sentence stamped with the fix epoch.
pub fn encode_position(fix: &PositionFix, channel: char) -> Result<RawSentence, CodecError> {
    let bits = fix.to_bits()?;
    let (payload, fill_bits) = bits.to_armored();
    let sentence = Sentence {
        talker: Talker::Vdm,
        fragment_count: 1,
        fragment_index: 1,
        sequence_id: None,
        channel: Some(channel),
        payload,
        fill_bits,
    };
    Ok(RawSentence::new(sentence.to_line(), fix.epoch))
}

/// Payload characters carried by the first fragment of a type-5 message.
const FIRST_FRAGMENT_CHARS: usize = 60;

/// Encode a static report as a two-fragment message.
pub fn encode_static(
    report: &StaticReport,
    channel: char,
    sequence_id: u8,
    receipt_epoch: Option<i64>,
) -> Result<Vec<RawSentence>, CodecError> {
    if sequence_id > 9 {
        return Err(CodecError::OutOfRange(format!("sequence id {sequence_id}")));
    }
    let bits = report.to_bits()?;
    let (payload, fill_bits) = bits.to_armored();
    let (first, second) = payload.split_at(FIRST_FRAGMENT_CHARS);
    let parts = [(first, 0u8), (second, fill_bits)];
    Ok(parts
        .iter()
        .enumerate()
        .map(|(i, (text, fill))| {
            let sentence = Sentence {
                talker: Talker::Vdm,
                fragment_count: 2,
                fragment_index: i as u8 + 1,
                sequence_id: Some(sequence_id),
                channel: Some(channel),
                payload: text.to_string(),
                fill_bits: *fill,
            };
            RawSentence::new(sentence.to_line(), receipt_epoch)
        })
        .collect())
}
