//! Bit strings are `Vec<u8>` holding 0/1 values.

use rand::Rng;

pub fn random_bits<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<u8> {
    (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect()
}

pub fn to_string(bits: &[u8]) -> String {
    bits.iter().map(|b| if *b == 0 { '0' } else { '1' }).collect()
}

pub fn parse(s: &str) -> Option<Vec<u8>> {
    s.chars()
        .map(|c| match c {
            '0' => Some(0),
            '1' => Some(1),
            _ => None,
        })
        .collect()
}

/// Bits of `bytes`, most significant first.
pub fn from_bytes(bytes: &[u8]) -> Vec<u8> {
    bytes.iter().flat_map(|b| (0..8).rev().map(move |i| (b >> i) & 1)).collect()
}

/// Serde adapter writing bit strings as compact "0101" text.
pub mod serde_bits {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bits: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::to_string(bits))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        super::parse(&s).ok_or_else(|| D::Error::custom("bit string may only contain '0' and '1'"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_expansion_is_msb_first() {
        assert_eq!(to_string(&from_bytes(&[0xA5])), "10100101");
        assert_eq!(parse("10100101").unwrap(), from_bytes(&[0xA5]));
        assert_eq!(parse("102"), None);
    }
}
