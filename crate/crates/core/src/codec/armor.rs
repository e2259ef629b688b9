//! Payload armoring and the 6-bit text alphabet.

use super::CodecError;

/// Map one armored payload character to its 6-bit value.
pub fn dearmor(ch: char) -> Result<u8, CodecError> {
    let c = ch as u32;
    let valid = (48..=87).contains(&c) || (96..=119).contains(&c);
    if !valid {
        return Err(CodecError::BadArmor(ch));
    }
    let mut v = c - 48;
    if v > 40 {
        v -= 8;
    }
    Ok(v as u8)
}

/// Inverse of [`dearmor`]. `value` must be below 64.
pub fn armor(value: u8) -> char {
    debug_assert!(value < 64);
    let v = value & 0x3f;
    (if v < 40 { v + 48 } else { v + 56 }) as char
}

/// 6-bit text code to character ('@' padding included).
pub fn sixbit_to_char(v: u8) -> char {
    let v = v & 0x3f;
    (if v < 32 { v + 64 } else { v }) as char
}

/// Character to 6-bit text code, `None` outside the alphabet.
pub fn char_to_sixbit(ch: char) -> Option<u8> {
    match ch as u32 {
        c @ 64..=95 => Some((c - 64) as u8),
        c @ 32..=63 => Some(c as u8),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabet_examples() {
        assert_eq!(dearmor('0').unwrap(), 0);
        assert_eq!(dearmor('W').unwrap(), 39);
        assert_eq!(dearmor('`').unwrap(), 40);
        assert_eq!(dearmor('w').unwrap(), 63);
    }

    #[test]
    fn rejects_outside_alphabet() {
        for ch in ['X', '_', 'x', ' ', '/', '\u{e9}'] {
            assert!(matches!(dearmor(ch), Err(CodecError::BadArmor(c)) if c == ch));
        }
    }

    #[test]
    fn bijection() {
        let mut seen = [false; 64];
        for v in 0..64u8 {
            let ch = armor(v);
            assert_eq!(dearmor(ch).unwrap(), v);
            seen[v as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
        let accepted = (0u32..128).filter_map(char::from_u32).filter(|c| dearmor(*c).is_ok()).count();
        assert_eq!(accepted, 64);
    }

    #[test]
    fn sixbit_text_bijection() {
        for v in 0..64u8 {
            assert_eq!(char_to_sixbit(sixbit_to_char(v)), Some(v));
        }
        assert_eq!(char_to_sixbit('a'), None);
    }
}
