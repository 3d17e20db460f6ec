//! Finite alphabets and symbol strings.
//!
//! Symbols are small integers `0..d` with `2 <= d <= 10`; textual I/O writes
//! one decimal digit per symbol, so sequences round-trip as plain strings
//! like "0110".

use crate::error::{Error, Result};

pub const MAX_ALPHABET: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alphabet(u8);

impl Alphabet {
    pub fn new(size: u8) -> Result<Alphabet> {
        if (2..=MAX_ALPHABET).contains(&size) {
            Ok(Alphabet(size))
        } else {
            Err(Error::Domain(format!(
                "alphabet size {size} outside supported range 2..={MAX_ALPHABET}"
            )))
        }
    }

    pub fn size(self) -> u8 {
        self.0
    }

    pub fn symbols(self) -> impl Iterator<Item = u8> {
        0..self.0
    }

    pub fn contains(self, symbol: u8) -> bool {
        symbol < self.0
    }

    /// Parse a digit string into symbols, validating each against `self`.
    pub fn parse_symbols(self, s: &str) -> Result<Vec<u8>> {
        s.chars()
            .map(|c| {
                let d = c
                    .to_digit(10)
                    .ok_or_else(|| Error::parse(format!("symbol {c:?} is not a digit")))?
                    as u8;
                if !self.contains(d) {
                    return Err(Error::parse(format!(
                        "symbol {d} outside alphabet of size {}",
                        self.0
                    )));
                }
                Ok(d)
            })
            .collect()
    }
}

pub fn format_symbols(xs: &[u8]) -> String {
    xs.iter().map(|&x| char::from(b'0' + x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_validates_alphabet() {
        let a = Alphabet::new(2).unwrap();
        assert_eq!(a.parse_symbols("0110").unwrap(), vec![0, 1, 1, 0]);
        assert!(a.parse_symbols("012").is_err());
        assert!(a.parse_symbols("0 1").is_err());
        assert!(Alphabet::new(1).is_err());
        assert!(Alphabet::new(11).is_err());
    }

    #[test]
    fn format_roundtrip() {
        let a = Alphabet::new(5).unwrap();
        let xs = a.parse_symbols("043210").unwrap();
        assert_eq!(format_symbols(&xs), "043210");
    }
}
