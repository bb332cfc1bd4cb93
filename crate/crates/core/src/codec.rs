//! Text <-> bit-vector conversion. Each character is one Latin-1 byte,
//! written most-significant bit first.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("character {ch:?} at position {position} is outside Latin-1")]
    CharacterOutOfRange { ch: char, position: usize },
    #[error("bit vector length {0} is not a multiple of eight")]
    LengthNotMultipleOfEight(usize),
    #[error("bit vector entry {position} is {value}, expected 0 or 1")]
    NonBinary { position: usize, value: u8 },
}

/// A binary vector whose length is a multiple of eight.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitMessage(Vec<u8>);

impl BitMessage {
    pub fn new(bits: Vec<u8>) -> Result<Self, CodecError> {
        if bits.len() % 8 != 0 {
            return Err(CodecError::LengthNotMultipleOfEight(bits.len()));
        }
        if let Some(position) = bits.iter().position(|&b| b > 1) {
            return Err(CodecError::NonBinary {
                position,
                value: bits[position],
            });
        }
        Ok(Self(bits))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| f64::from(b)).collect()
    }

    /// Interprets an already rounded and capped real vector as bits.
    pub fn from_binary_reals(values: &[f64]) -> Result<Self, CodecError> {
        let bits = values
            .iter()
            .enumerate()
            .map(|(position, &v)| {
                if v == 0.0 {
                    Ok(0)
                } else if v == 1.0 {
                    Ok(1)
                } else {
                    Err(CodecError::NonBinary {
                        position,
                        value: u8::MAX,
                    })
                }
            })
            .collect::<Result<Vec<u8>, _>>()?;
        Self::new(bits)
    }
}

/// Maps a Latin-1 byte slice to a `String` (every byte is a code point).
pub fn latin1_to_string(bytes: &[u8]) -> String {
    bytes.iter().map(|&b| char::from(b)).collect()
}

pub fn string_to_latin1(text: &str) -> Result<Vec<u8>, CodecError> {
    text.chars()
        .enumerate()
        .map(|(position, ch)| {
            u8::try_from(u32::from(ch)).map_err(|_| CodecError::CharacterOutOfRange { ch, position })
        })
        .collect()
}

pub fn string_to_bits(text: &str) -> Result<BitMessage, CodecError> {
    let bytes = string_to_latin1(text)?;
    let mut bits = Vec::with_capacity(bytes.len() * 8);
    for byte in bytes {
        for shift in (0..8).rev() {
            bits.push((byte >> shift) & 1);
        }
    }
    Ok(BitMessage(bits))
}

pub fn bits_to_string(w: &BitMessage) -> String {
    w.0.chunks_exact(8)
        .map(|chunk| char::from(chunk.iter().fold(0u8, |acc, &b| (acc << 1) | b)))
        .collect()
}

/// Positional mismatches over the common prefix plus the length difference.
pub fn char_distance(a: &str, b: &str) -> usize {
    let mut ia = a.chars();
    let mut ib = b.chars();
    let mut dist = 0;
    loop {
        match (ia.next(), ib.next()) {
            (Some(x), Some(y)) => dist += usize::from(x != y),
            (Some(_), None) | (None, Some(_)) => dist += 1,
            (None, None) => return dist,
        }
    }
}
