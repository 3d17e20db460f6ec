//! Incremental-parsing complexity estimate: split the string into phrases,
//! each the shortest prefix of the remainder not seen as a phrase before,
//! and charge `ceil(log2 c) + ceil(log2 d)` bits per phrase (back-reference
//! plus fresh symbol) for `c` phrases over a `d`-letter alphabet.

use crate::error::{Error, Result};
use crate::numeric::ceil_log2;

/// Number of phrases in the incremental parse. The trailing phrase is
/// counted even when the input ends before it becomes novel.
pub fn phrase_count(xs: &[u8], alphabet_size: u8) -> Result<u64> {
    if alphabet_size < 2 {
        return Err(Error::Domain(
            "phrase parsing needs an alphabet of at least 2".into(),
        ));
    }
    if let Some(&bad) = xs.iter().find(|&&a| a >= alphabet_size) {
        return Err(Error::Domain(format!(
            "symbol {bad} outside alphabet of size {alphabet_size}"
        )));
    }
    let d = alphabet_size as usize;
    // Phrase dictionary as a trie; node 0 is the empty phrase.
    let mut children: Vec<Vec<u32>> = vec![vec![0; d]];
    let mut phrases = 0u64;
    let mut node = 0usize;
    for &a in xs {
        let next = children[node][a as usize];
        if next != 0 {
            node = next as usize;
            continue;
        }
        // Novel phrase: register it and restart from the root.
        let idx = children.len() as u32;
        children.push(vec![0; d]);
        children[node][a as usize] = idx;
        phrases += 1;
        node = 0;
    }
    // A partial phrase still pending at the end is charged like a full one.
    if node != 0 {
        phrases += 1;
    }
    Ok(phrases)
}

/// Code length of the parse in bits; the empty string costs nothing.
pub fn complexity_bits(xs: &[u8], alphabet_size: u8) -> Result<u64> {
    let c = phrase_count(xs, alphabet_size)?;
    if c == 0 {
        return Ok(0);
    }
    Ok(c * (ceil_log2(c) as u64 + ceil_log2(alphabet_size as u64) as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn empty_string_costs_nothing() {
        assert_eq!(phrase_count(&[], 2).unwrap(), 0);
        assert_eq!(complexity_bits(&[], 2).unwrap(), 0);
    }

    #[test]
    fn all_ones_parse_grows_like_square_root() {
        // 1, 11, 111, ...: k full phrases cover k(k+1)/2 bits, so 1024 ones
        // split into 44 full phrases plus a pending partial one.
        let xs = vec![1u8; 1024];
        assert_eq!(phrase_count(&xs, 2).unwrap(), 45);
        assert_eq!(complexity_bits(&xs, 2).unwrap(), 45 * (6 + 1));
    }

    #[test]
    fn short_parses_by_hand() {
        // 0|1|00|01|1 -> phrases 0,1,00,01 plus pending "1".
        let xs = [0u8, 1, 0, 0, 0, 1, 1];
        assert_eq!(phrase_count(&xs, 2).unwrap(), 5);
        // Single symbol: one phrase, zero bits for the (empty) reference.
        assert_eq!(complexity_bits(&[1], 2).unwrap(), 1);
    }

    #[test]
    fn random_strings_cost_more_than_constant_ones() {
        let constant = complexity_bits(&vec![1u8; 1024], 2).unwrap();
        let mut total = 0u64;
        for seed in 0..100u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<u8> = (0..1024).map(|_| rng.gen_range(0..2u8)).collect();
            total += complexity_bits(&xs, 2).unwrap();
        }
        assert!(total / 100 >= constant, "avg {} < {constant}", total / 100);
    }

    #[test]
    fn alphabet_guards() {
        assert!(phrase_count(&[0, 1], 1).is_err());
        assert!(phrase_count(&[0, 3], 3).is_err());
        assert_eq!(phrase_count(&[0, 1, 2], 3).unwrap(), 3);
    }
}
