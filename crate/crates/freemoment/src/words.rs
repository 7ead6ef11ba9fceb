//! Words over the free semigroup on d letters, enumerated in graded
//! lexicographic order (by length, then lexicographically).
//!
//! Letters are 1-based. The table of all words of length <= N is prefix
//! closed and indexable in O(1) arithmetic, since graded-lex order makes the
//! index of a word a base-d numeral offset by the level start.

use std::fmt;

use crate::error::{Error, Result};

/// Hard cap on enumerated table sizes; inputs demanding more refuse with
/// CapacityExceeded rather than allocating.
pub const DEFAULT_WORD_CAPACITY: usize = 100_000;

/// A word in the free semigroup on `d` letters; `letters` are in 1..=d.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word {
    d: usize,
    letters: Vec<usize>,
}

impl Word {
    /// The empty word over a d-letter alphabet (d >= 1).
    pub fn empty(d: usize) -> Word {
        assert!(d >= 1, "alphabet size must be at least 1");
        Word { d, letters: Vec::new() }
    }

    pub fn new(d: usize, letters: Vec<usize>) -> Result<Word> {
        if d < 1 {
            return Err(Error::Validation("alphabet size must be at least 1".into()));
        }
        for &l in &letters {
            if l < 1 || l > d {
                return Err(Error::InvalidLetter { letter: l, d });
            }
        }
        Ok(Word { d, letters })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    /// Appends one letter.
    pub fn push(&self, letter: usize) -> Result<Word> {
        if letter < 1 || letter > self.d {
            return Err(Error::InvalidLetter { letter, d: self.d });
        }
        let mut letters = self.letters.clone();
        letters.push(letter);
        Ok(Word { d: self.d, letters })
    }

    /// Concatenation; both words must share the alphabet.
    pub fn concat(&self, other: &Word) -> Result<Word> {
        if self.d != other.d {
            return Err(Error::AlphabetMismatch(format!(
                "cannot concatenate words over alphabets of size {} and {}",
                self.d, other.d
            )));
        }
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Ok(Word { d: self.d, letters })
    }

    /// The reversal: letters in opposite order.
    pub fn reversed(&self) -> Word {
        let mut letters = self.letters.clone();
        letters.reverse();
        Word { d: self.d, letters }
    }

    /// "e" for the empty word, a digit string for d <= 9, dot-separated
    /// integers otherwise.
    pub fn render(&self) -> String {
        if self.letters.is_empty() {
            return "e".to_string();
        }
        if self.d <= 9 {
            self.letters.iter().map(|l| l.to_string()).collect()
        } else {
            self.letters
                .iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(".")
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Graded lexicographic order. Alphabet size does not participate; words
/// from different alphabets are never stored together.
impl Ord for Word {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.letters
            .len()
            .cmp(&other.letters.len())
            .then_with(|| self.letters.cmp(&other.letters))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Number of words of length <= n over d letters: (d^{n+1}-1)/(d-1), or n+1
/// when d = 1. Checked in u128 against `cap`.
pub fn word_count(d: usize, n: usize, cap: usize) -> Result<usize> {
    if d < 1 {
        return Err(Error::Validation("alphabet size must be at least 1".into()));
    }
    let count: u128 = if d == 1 {
        n as u128 + 1
    } else {
        let d = d as u128;
        let mut pow: u128 = 1;
        for _ in 0..=n {
            pow = pow.checked_mul(d).ok_or(Error::CapacityExceeded {
                what: "word table",
                required: u128::MAX,
                limit: cap,
            })?;
            if pow > 16 * cap as u128 {
                return Err(Error::CapacityExceeded {
                    what: "word table",
                    required: (pow - 1) / (d - 1),
                    limit: cap,
                });
            }
        }
        (pow - 1) / (d - 1)
    };
    if count > cap as u128 {
        return Err(Error::CapacityExceeded {
            what: "word table",
            required: count,
            limit: cap,
        });
    }
    Ok(count as usize)
}

/// All words of length <= max_len over d letters, in graded-lex order.
///
/// Level offsets make `index_of`, child and parent lookups O(1); the table is
/// prefix closed (every word's parent sits at a smaller index).
#[derive(Debug, Clone)]
pub struct WordTable {
    d: usize,
    max_len: usize,
    words: Vec<Word>,
    /// level_offsets[l] = index of the first word of length l; one extra
    /// entry holds the total count.
    level_offsets: Vec<usize>,
}

/// Enumerates with the default capacity cap.
pub fn enumerate_words(d: usize, max_len: usize) -> Result<WordTable> {
    enumerate_words_capped(d, max_len, DEFAULT_WORD_CAPACITY)
}

pub fn enumerate_words_capped(d: usize, max_len: usize, cap: usize) -> Result<WordTable> {
    let total = word_count(d, max_len, cap)?;
    let mut words = Vec::with_capacity(total);
    let mut level_offsets = Vec::with_capacity(max_len + 2);
    level_offsets.push(0);
    words.push(Word::empty(d));
    let mut level_start = 0usize;
    for _len in 1..=max_len {
        let level_end = words.len();
        level_offsets.push(level_end);
        for idx in level_start..level_end {
            for letter in 1..=d {
                let w = words[idx].push(letter).expect("letter within alphabet");
                words.push(w);
            }
        }
        level_start = level_end;
    }
    level_offsets.push(words.len());
    debug_assert_eq!(words.len(), total);
    Ok(WordTable {
        d,
        max_len,
        words,
        level_offsets,
    })
}

impl WordTable {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, idx: usize) -> &Word {
        &self.words[idx]
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    /// Index of the first word of length `len`.
    pub fn level_offset(&self, len: usize) -> usize {
        self.level_offsets[len]
    }

    /// Number of words of length < `len` (= level_offset(len)).
    pub fn count_below(&self, len: usize) -> usize {
        self.level_offsets[len]
    }

    /// Arithmetic index: level offset plus the base-d numeral of the letters.
    pub fn index_of(&self, w: &Word) -> Option<usize> {
        if w.d() != self.d || w.len() > self.max_len {
            return None;
        }
        let mut rank = 0usize;
        for &l in w.letters() {
            if l < 1 || l > self.d {
                return None;
            }
            rank = rank * self.d + (l - 1);
        }
        Some(self.level_offsets[w.len()] + rank)
    }

    /// Index of word . letter (append), if it stays within the table.
    pub fn child_index(&self, idx: usize, letter: usize) -> Option<usize> {
        let len = self.words[idx].len();
        if len + 1 > self.max_len || letter < 1 || letter > self.d {
            return None;
        }
        let rank = idx - self.level_offsets[len];
        Some(self.level_offsets[len + 1] + rank * self.d + (letter - 1))
    }

    /// Index of letter . word (prepend), if it stays within the table.
    pub fn prepend_index(&self, idx: usize, letter: usize) -> Option<usize> {
        let len = self.words[idx].len();
        if len + 1 > self.max_len || letter < 1 || letter > self.d {
            return None;
        }
        let rank = idx - self.level_offsets[len];
        let dpow = self.d.pow(len as u32);
        Some(self.level_offsets[len + 1] + (letter - 1) * dpow + rank)
    }

    /// Parent (word minus its last letter) and that last letter; idx >= 1.
    pub fn parent_of(&self, idx: usize) -> (usize, usize) {
        assert!(idx >= 1, "the empty word has no parent");
        let len = self.words[idx].len();
        let rank = idx - self.level_offsets[len];
        let letter = rank % self.d + 1;
        (self.level_offsets[len - 1] + rank / self.d, letter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table_d2_n2_is_the_expected_sequence() {
        let t = enumerate_words(2, 2).unwrap();
        let rendered: Vec<String> = t.words().iter().map(|w| w.render()).collect();
        assert_eq!(rendered, vec!["e", "1", "2", "11", "12", "21", "22"]);
    }

    #[test]
    fn counts_match_formula() {
        assert_eq!(word_count(1, 4, 1000).unwrap(), 5);
        assert_eq!(word_count(2, 3, 1000).unwrap(), 15);
        assert_eq!(word_count(3, 3, 1000).unwrap(), 40);
        assert_eq!(enumerate_words(3, 3).unwrap().len(), 40);
    }

    #[test]
    fn capacity_is_enforced() {
        // (10^6 - 1)/9 = 111111 > 100000.
        assert!(matches!(
            enumerate_words(10, 5),
            Err(Error::CapacityExceeded { .. })
        ));
        assert!(word_count(2, 200, DEFAULT_WORD_CAPACITY).is_err());
    }

    #[test]
    fn prefix_closure_parents_precede_children() {
        let t = enumerate_words(3, 4).unwrap();
        for idx in 1..t.len() {
            let (p, letter) = t.parent_of(idx);
            assert!(p < idx);
            let child = t.word(p).push(letter).unwrap();
            assert_eq!(&child, t.word(idx));
            assert_eq!(t.child_index(p, letter), Some(idx));
        }
    }

    #[test]
    fn prepend_index_matches_concat() {
        let t = enumerate_words(3, 4).unwrap();
        for idx in 0..t.level_offset(4) {
            for letter in 1..=3 {
                let head = Word::new(3, vec![letter]).unwrap();
                let w = head.concat(t.word(idx)).unwrap();
                assert_eq!(t.prepend_index(idx, letter), t.index_of(&w));
            }
        }
    }

    #[test]
    fn rendering_rules() {
        assert_eq!(Word::empty(2).render(), "e");
        assert_eq!(Word::new(2, vec![1, 2]).unwrap().render(), "12");
        assert_eq!(Word::new(12, vec![1, 11]).unwrap().render(), "1.11");
    }

    #[test]
    fn alphabet_mismatch_is_refused() {
        let a = Word::new(2, vec![1]).unwrap();
        let b = Word::new(3, vec![1]).unwrap();
        assert!(matches!(a.concat(&b), Err(Error::AlphabetMismatch(_))));
        assert!(matches!(
            Word::new(2, vec![3]),
            Err(Error::InvalidLetter { letter: 3, d: 2 })
        ));
    }

    #[test]
    fn d1_table_is_a_chain() {
        let t = enumerate_words(1, 6).unwrap();
        assert_eq!(t.len(), 7);
        for (k, w) in t.words().iter().enumerate() {
            assert_eq!(w.len(), k);
        }
    }

    proptest! {
        #[test]
        fn index_roundtrip(d in 1usize..4, letters in proptest::collection::vec(1usize..4, 0..5)) {
            let letters: Vec<usize> = letters.into_iter().map(|l| (l - 1) % d + 1).collect();
            let w = Word::new(d, letters).unwrap();
            let t = enumerate_words(d, 5).unwrap();
            let idx = t.index_of(&w).unwrap();
            prop_assert_eq!(t.word(idx), &w);
        }

        #[test]
        fn table_is_sorted_graded_lex(d in 1usize..4, n in 0usize..5) {
            let t = enumerate_words(d, n).unwrap();
            for i in 1..t.len() {
                prop_assert!(t.word(i - 1) < t.word(i));
            }
        }

        #[test]
        fn reversal_is_an_antihomomorphism(
            a in proptest::collection::vec(1usize..3, 0..6),
            b in proptest::collection::vec(1usize..3, 0..6),
        ) {
            let wa = Word::new(2, a).unwrap();
            let wb = Word::new(2, b).unwrap();
            let lhs = wa.concat(&wb).unwrap().reversed();
            let rhs = wb.reversed().concat(&wa.reversed()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
