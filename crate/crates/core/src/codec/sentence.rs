//! NMEA 0183 `!AIVDM` / `!AIVDO` framing.

use std::fmt;

use super::CodecError;

/// One input line as received, with the feed-supplied receipt time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawSentence {
    pub line: String,
    pub receipt_epoch: Option<i64>,
}

impl RawSentence {
    pub fn new(line: impl Into<String>, receipt_epoch: Option<i64>) -> Self {
        Self { line: line.into(), receipt_epoch }
    }

    /// Split an input line of the form `[<epoch>\t]!AIVDM,...`.
    pub fn from_feed_line(text: &str) -> Result<Self, CodecError> {
        let text = text.trim_end_matches(['\r', '\n']);
        match text.split_once('\t') {
            Some((prefix, rest)) => {
                let epoch = prefix
                    .trim()
                    .parse::<i64>()
                    .map_err(|_| CodecError::Framing(format!("bad epoch prefix {prefix:?}")))?;
                Ok(Self::new(rest.trim(), Some(epoch)))
            }
            None => Ok(Self::new(text.trim(), None)),
        }
    }
}

impl fmt::Display for RawSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.receipt_epoch {
            Some(t) => write!(f, "{t}\t{}", self.line),
            None => f.write_str(&self.line),
        }
    }
}

/// XOR of every byte in `body`.
pub fn checksum(body: &str) -> u8 {
    body.bytes().fold(0, |acc, b| acc ^ b)
}

fn split_checksum(line: &str) -> Result<(&str, u8), CodecError> {
    let rest = line.strip_prefix('!').ok_or_else(|| CodecError::Framing("missing '!' start delimiter".into()))?;
    let (body, hh) =
        rest.rsplit_once('*').ok_or_else(|| CodecError::Framing("missing '*' checksum delimiter".into()))?;
    let hh = hh.trim_end();
    if hh.len() != 2 || !hh.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(CodecError::Framing(format!("checksum field {hh:?} is not two hex digits")));
    }
    let sum = u8::from_str_radix(hh, 16).map_err(|_| CodecError::Framing("unparsable checksum".into()))?;
    Ok((body, sum))
}

/// True iff the XOR over the characters between `!` and `*` equals the
/// transmitted `hh`.
pub fn verify_checksum(line: &str) -> Result<bool, CodecError> {
    let (body, sum) = split_checksum(line)?;
    Ok(checksum(body) == sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Talker {
    /// Received from other vessels.
    Vdm,
    /// Own-ship report.
    Vdo,
}

/// Parsed framing fields of one sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub talker: Talker,
    pub fragment_count: u8,
    pub fragment_index: u8,
    pub sequence_id: Option<u8>,
    pub channel: Option<char>,
    pub payload: String,
    pub fill_bits: u8,
}

impl Sentence {
    /// Parse and checksum-verify one line.
    pub fn parse(line: &str) -> Result<Self, CodecError> {
        let (body, sum) = split_checksum(line)?;
        if checksum(body) != sum {
            return Err(CodecError::Checksum);
        }
        let fields: Vec<&str> = body.split(',').collect();
        if fields.len() != 7 {
            return Err(CodecError::Framing(format!("expected 7 fields, found {}", fields.len())));
        }
        let talker = match fields[0] {
            "AIVDM" => Talker::Vdm,
            "AIVDO" => Talker::Vdo,
            other => return Err(CodecError::Framing(format!("unsupported sentence {other:?}"))),
        };
        let num = |s: &str, what: &str| s.parse::<u8>().map_err(|_| CodecError::Framing(format!("bad {what} {s:?}")));
        let fragment_count = num(fields[1], "fragment count")?;
        let fragment_index = num(fields[2], "fragment index")?;
        if fragment_count == 0 || fragment_index == 0 || fragment_index > fragment_count {
            return Err(CodecError::Framing(format!("fragment {fragment_index} of {fragment_count} is not valid")));
        }
        let sequence_id = match fields[3] {
            "" => None,
            s => Some(num(s, "sequence id")?),
        };
        let channel = match fields[4] {
            "" => None,
            s if s.chars().count() == 1 => s.chars().next(),
            s => return Err(CodecError::Framing(format!("bad channel {s:?}"))),
        };
        let fill_bits = num(fields[6], "fill bits")?;
        if fill_bits > 5 {
            return Err(CodecError::Framing(format!("fill bits {fill_bits} out of range")));
        }
        Ok(Self {
            talker,
            fragment_count,
            fragment_index,
            sequence_id,
            channel,
            payload: fields[5].to_string(),
            fill_bits,
        })
    }

    /// Render as a checksummed line.
    pub fn to_line(&self) -> String {
        let talker = match self.talker {
            Talker::Vdm => "AIVDM",
            Talker::Vdo => "AIVDO",
        };
        let body = format!(
            "{talker},{},{},{},{},{},{}",
            self.fragment_count,
            self.fragment_index,
            self.sequence_id.map(|s| s.to_string()).unwrap_or_default(),
            self.channel.map(String::from).unwrap_or_default(),
            self.payload,
            self.fill_bits
        );
        format!("!{body}*{:02X}", checksum(&body))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Hand XOR oracle, independent of `checksum`.
    fn xor_by_hand(s: &str) -> u8 {
        let mut acc = 0u8;
        for b in s.as_bytes() {
            acc ^= *b;
        }
        acc
    }

    const CANONICAL: &str = "!AIVDM,1,1,,B,177KQJ5000G?tO`K>RA1wUbN0TKH,0*5C";

    #[test]
    fn published_checksum_verifies() {
        let body = &CANONICAL[1..CANONICAL.len() - 3];
        assert_eq!(xor_by_hand(body), 0x5C);
        assert!(verify_checksum(CANONICAL).unwrap());
    }

    #[test]
    fn flipped_digit_fails() {
        let bad = CANONICAL.replace("*5C", "*5D");
        assert!(!verify_checksum(&bad).unwrap());
        assert!(matches!(Sentence::parse(&bad), Err(CodecError::Checksum)));
    }

    #[test]
    fn empty_payload_sentence() {
        let body = "AIVDM,1,1,,A,,0";
        let hh = xor_by_hand(body);
        let line = format!("!{body}*{hh:02X}");
        assert!(verify_checksum(&line).unwrap());
        let s = Sentence::parse(&line).unwrap();
        assert_eq!(s.payload, "");
    }

    #[test]
    fn malformed_suffix_is_framing_error() {
        assert!(matches!(verify_checksum("!AIVDM,1,1,,A,,0"), Err(CodecError::Framing(_))));
        assert!(matches!(verify_checksum("!AIVDM,1,1,,A,,0*5"), Err(CodecError::Framing(_))));
        assert!(matches!(verify_checksum("!AIVDM,1,1,,A,,0*ZZ"), Err(CodecError::Framing(_))));
        assert!(matches!(verify_checksum("AIVDM,1,1,,A,,0*00"), Err(CodecError::Framing(_))));
    }

    #[test]
    fn fragment_index_above_count_rejected() {
        let body = "AIVDM,1,2,,A,,0";
        let line = format!("!{body}*{:02X}", checksum(body));
        assert!(matches!(Sentence::parse(&line), Err(CodecError::Framing(_))));
    }

    #[test]
    fn feed_line_prefix() {
        let raw = RawSentence::from_feed_line(&format!("1583020800\t{CANONICAL}\n")).unwrap();
        assert_eq!(raw.receipt_epoch, Some(1_583_020_800));
        assert_eq!(raw.line, CANONICAL);
        assert_eq!(raw.to_string(), format!("1583020800\t{CANONICAL}"));
        let bare = RawSentence::from_feed_line(CANONICAL).unwrap();
        assert_eq!(bare.receipt_epoch, None);
    }

    #[test]
    fn line_roundtrip() {
        let s = Sentence::parse(CANONICAL).unwrap();
        assert_eq!(s.to_line(), CANONICAL);
    }
}
