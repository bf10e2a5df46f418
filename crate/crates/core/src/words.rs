//! Alphabets, words, word morphisms, and the base-`b` numeric representation.
//!
//! Letters are 1-indexed throughout: a word over an alphabet of size `b`
//! is a sequence of indices in `1..=b`, and the numeric representation maps
//! the k-th symbol of the alphabet to the digit value k. With that digit
//! assignment the representation
//!
//! ```text
//! sigma(w) = sum_j sigma(w_j) * b^(|w| - j),    sigma(empty) = 0
//! ```
//!
//! is injective on all words at once, not just per length: length-l values
//! fill the closed interval [(b^l - 1)/(b - 1), b*(b^l - 1)/(b - 1)] and
//! consecutive intervals are separated by exactly 1.

use num::bigint::BigInt;
use num::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WordsError {
    /// A letter index fell outside the domain of the alphabet or morphism.
    #[error("letter {letter} outside domain 1..={domain}")]
    LetterOutOfRange { letter: usize, domain: usize },
    /// Alphabet construction with a repeated symbol.
    #[error("duplicate symbol {0:?} in alphabet")]
    DuplicateSymbol(String),
    /// Alphabet construction with no symbols.
    #[error("alphabet must contain at least one symbol")]
    EmptyAlphabet,
    /// A serialized word contained text not matching any alphabet symbol.
    #[error("unparsable word text at {0:?}")]
    UnparsableWord(String),
}

/// An ordered finite set of distinct symbol tokens. The declared order fixes
/// the digit enumeration: symbol at position k (1-based) has digit value k.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self, WordsError> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(WordsError::EmptyAlphabet);
        }
        for (i, s) in symbols.iter().enumerate() {
            if symbols[..i].contains(s) {
                return Err(WordsError::DuplicateSymbol(s.clone()));
            }
        }
        Ok(Alphabet { symbols })
    }

    /// Two-symbol alphabet `("a", "b")` used by most fixtures.
    pub fn ab() -> Self {
        Alphabet::new(["a", "b"]).unwrap()
    }

    /// Alphabet size `b`.
    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    /// 1-based digit of a symbol, if present.
    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol).map(|i| i + 1)
    }

    /// Parse a word serialized as concatenated symbols. Symbols are matched
    /// greedily longest-first, which is unambiguous for the single-character
    /// alphabets used in instance files.
    pub fn parse_word(&self, text: &str) -> Result<Word, WordsError> {
        let mut order: Vec<usize> = (0..self.symbols.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(self.symbols[i].len()));
        let mut rest = text;
        let mut letters = Vec::new();
        'outer: while !rest.is_empty() {
            for &i in &order {
                if let Some(tail) = rest.strip_prefix(self.symbols[i].as_str()) {
                    letters.push(i + 1);
                    rest = tail;
                    continue 'outer;
                }
            }
            return Err(WordsError::UnparsableWord(rest.to_string()));
        }
        Ok(Word::from_letters(letters))
    }

    pub fn format_word(&self, w: &Word) -> String {
        w.letters()
            .iter()
            .map(|&l| self.symbols[l - 1].as_str())
            .collect()
    }

    /// Check that every letter of `w` is a valid digit for this alphabet.
    pub fn check_word(&self, w: &Word) -> Result<(), WordsError> {
        w.check_over(self.size())
    }

    /// Numeric representation of `w` in base `self.size()`.
    pub fn numeric_rep(&self, w: &Word) -> BigInt {
        numeric_rep(w, self.size())
    }
}

/// A word: a sequence of 1-based letter indices. The empty word is allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word {
    letters: Vec<usize>,
}

impl Word {
    pub fn empty() -> Self {
        Word { letters: Vec::new() }
    }

    /// Panics if any letter is 0; the upper bound depends on the alphabet and
    /// is checked separately by [`Word::check_over`].
    pub fn from_letters(letters: Vec<usize>) -> Self {
        assert!(letters.iter().all(|&l| l >= 1), "letters are 1-indexed");
        Word { letters }
    }

    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Word { letters }
    }

    pub fn push(&mut self, letter: usize) {
        assert!(letter >= 1, "letters are 1-indexed");
        self.letters.push(letter);
    }

    pub fn pop(&mut self) -> Option<usize> {
        self.letters.pop()
    }

    pub fn check_over(&self, b: usize) -> Result<(), WordsError> {
        match self.letters.iter().find(|&&l| l == 0 || l > b) {
            Some(&l) => Err(WordsError::LetterOutOfRange { letter: l, domain: b }),
            None => Ok(()),
        }
    }
}

/// Base-`b` numeric representation with digits 1..=b.
///
/// Satisfies the splitting rule `sigma(uv) = b^|v| * sigma(u) + sigma(v)`
/// and, for nonempty `w` of length l, the sharp bounds
/// `(b^l - 1)/(b - 1) <= sigma(w) <= b * (b^l - 1)/(b - 1)`
/// (repunit at the all-1 word, b times the repunit at the all-b word).
pub fn numeric_rep(w: &Word, b: usize) -> BigInt {
    let base = BigInt::from(b);
    let mut acc = BigInt::zero();
    for &l in w.letters() {
        acc = acc * &base + BigInt::from(l);
    }
    acc
}

/// Sharp inclusive range of `numeric_rep` over nonempty words of length `len`,
/// as `(min, max)`. For `len == 0` both are zero.
pub fn numeric_rep_range(len: usize, b: usize) -> (BigInt, BigInt) {
    // Repunit 1 + b + ... + b^(len-1), valid for b == 1 as well.
    let base = BigInt::from(b);
    let mut repunit = BigInt::zero();
    let mut power = BigInt::one();
    for _ in 0..len {
        repunit += &power;
        power *= &base;
    }
    let max = &repunit * &base;
    (repunit, max)
}

/// A concatenation-preserving map from words over `[d]` to words over some
/// target alphabet, given by the images of the `d` letters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordMorphism {
    images: Vec<Word>,
}

impl WordMorphism {
    pub fn new(images: Vec<Word>) -> Self {
        WordMorphism { images }
    }

    /// The identity morphism on a d-letter alphabet.
    pub fn identity(d: usize) -> Self {
        WordMorphism {
            images: (1..=d).map(|l| Word::from_letters(vec![l])).collect(),
        }
    }

    /// Domain size d.
    pub fn domain_size(&self) -> usize {
        self.images.len()
    }

    pub fn image(&self, letter: usize) -> Option<&Word> {
        if letter >= 1 {
            self.images.get(letter - 1)
        } else {
            None
        }
    }

    /// Apply the morphism: concatenate the letter images in order.
    pub fn apply(&self, w: &Word) -> Result<Word, WordsError> {
        let mut out = Vec::new();
        for &l in w.letters() {
            let img = self.image(l).ok_or(WordsError::LetterOutOfRange {
                letter: l,
                domain: self.images.len(),
            })?;
            out.extend_from_slice(img.letters());
        }
        Ok(Word { letters: out })
    }
}

/// Visit all words of length `n` over `[d]` in lexicographic order.
pub fn for_each_word(d: usize, n: usize, mut f: impl FnMut(&Word)) {
    let mut letters = vec![1usize; n];
    if n == 0 {
        f(&Word::empty());
        return;
    }
    loop {
        f(&Word { letters: letters.clone() });
        // Odometer increment, most significant letter first.
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if letters[i] < d {
                letters[i] += 1;
                for l in letters.iter_mut().skip(i + 1) {
                    *l = 1;
                }
                break;
            }
        }
    }
}
