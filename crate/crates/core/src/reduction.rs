//! Compiler from correspondence instances to diagonal matrix product
//! operators.
//!
//! The pipeline has three stages, all in exact rational arithmetic:
//!
//! 1. [`build_d6`] turns an instance into a morphism of 6 x 6 matrices whose
//!    boundary sandwich evaluates the squared numeric difference of the two
//!    concatenation tracks, shifted by the threshold;
//! 2. [`binary_reduce`] re-encodes any such morphism over a binary alphabet
//!    at the cost of a factor-d bond dimension, with an explicit
//!    [`LetterEncoder`] between source words and binary control words;
//! 3. [`assemble_mpo`] wraps a binary morphism as a diagonal
//!    [`MpoInstance`].
//!
//! [`compile`] is the composition. A solution word of length n shows up on
//! the diagonal of the compiled operator at system size d*n.

use crate::exact::{dot, q_int, row_mul, Q, QMatrix};
use crate::mpo::MpoInstance;
use crate::pcp::PcpInstance;
use crate::words::{numeric_rep, Word};
use num::{BigInt, One, Zero};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReductionError {
    #[error("letter {letter} outside morphism domain 1..={d}")]
    Letter { letter: usize, d: usize },
    #[error("binary encoding needs at least 2 source letters, got {d}")]
    DomainTooSmall { d: usize },
    #[error("binary encoding needs matrix dimension at least 2, got {dim}")]
    DimensionTooSmall { dim: usize },
    #[error("inconsistent morphism data: {0}")]
    Shape(String),
}

/// A matrix monoid morphism with boundary vectors: one square generator per
/// source letter, extended to words by left-to-right products, evaluated
/// between a fixed row vector and a fixed column vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixMorphism {
    generators: Vec<QMatrix>,
    left: Vec<Q>,
    right: Vec<Q>,
}

impl MatrixMorphism {
    pub fn new(
        generators: Vec<QMatrix>,
        left: Vec<Q>,
        right: Vec<Q>,
    ) -> Result<Self, ReductionError> {
        if generators.is_empty() {
            return Err(ReductionError::Shape("no generators".into()));
        }
        let dim = generators[0].nrows();
        for g in &generators {
            if g.nrows() != dim || g.ncols() != dim {
                return Err(ReductionError::Shape(
                    "generators must be square and equal sized".into(),
                ));
            }
        }
        if left.len() != dim || right.len() != dim {
            return Err(ReductionError::Shape(format!(
                "boundary vectors must have length {dim}"
            )));
        }
        Ok(MatrixMorphism {
            generators,
            left,
            right,
        })
    }

    /// Matrix dimension of every generator.
    pub fn dim(&self) -> usize {
        self.generators[0].nrows()
    }

    /// Number of source letters.
    pub fn domain_size(&self) -> usize {
        self.generators.len()
    }

    /// Generator for a 1-based letter.
    pub fn generator(&self, letter: usize) -> Result<&QMatrix, ReductionError> {
        self.generators
            .get(letter.wrapping_sub(1))
            .ok_or(ReductionError::Letter {
                letter,
                d: self.domain_size(),
            })
    }

    pub fn left(&self) -> &[Q] {
        &self.left
    }

    pub fn right(&self) -> &[Q] {
        &self.right
    }

    /// Full matrix product over a word; the empty word gives the identity.
    pub fn word_matrix(&self, w: &Word) -> Result<QMatrix, ReductionError> {
        let mut acc = QMatrix::identity(self.dim());
        for &l in w.letters() {
            acc = acc.mul(self.generator(l)?);
        }
        Ok(acc)
    }

    /// Boundary evaluation `left . M(w_1) ... M(w_n) . right`, computed as a
    /// sequence of row-vector products so no full matrix product is formed.
    pub fn sandwich(&self, w: &Word) -> Result<Q, ReductionError> {
        let mut row = self.left.clone();
        for &l in w.letters() {
            row = row_mul(&row, self.generator(l)?);
        }
        Ok(dot(&row, &self.right))
    }
}

/// The 6 x 6 tracker matrix for a pair of words over a size-b alphabet.
///
/// Multiplying trackers concatenates the word pairs: the matrix caches the
/// base powers `b^|u|`, `b^|v|`, the numeric values sigma(u), sigma(v), and
/// the monomials `sigma(u)^2, sigma(u) sigma(v), sigma(v)^2` needed to
/// extend a squared difference under the splitting rule
/// `sigma(uw) = b^|w| sigma(u) + sigma(w)`. All entries are nonnegative
/// integers.
pub fn pair_matrix(b: usize, u: &Word, v: &Word) -> QMatrix {
    let base = BigInt::from(b);
    let pu = base.pow(u.len() as u32);
    let pv = base.pow(v.len() as u32);
    let su = numeric_rep(u, b);
    let sv = numeric_rep(v, b);
    let two = BigInt::from(2);
    let e = |x: BigInt| Q::from_integer(x);
    let z = BigInt::zero;
    let rows: [[BigInt; 6]; 6] = [
        [&pu * &pu, z(), z(), z(), z(), z()],
        [z(), &pu * &pv, z(), z(), z(), z()],
        [z(), z(), &pv * &pv, z(), z(), z()],
        [&su * &pu, &sv * &pu, z(), pu.clone(), z(), z()],
        [z(), &su * &pv, &sv * &pv, z(), pv.clone(), z()],
        [&su * &su, &two * &su * &sv, &sv * &sv, &two * &su, &two * &sv, BigInt::one()],
    ];
    let mut m = QMatrix::zeros(6, 6);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, x) in row.into_iter().enumerate() {
            m[(i, j)] = e(x);
        }
    }
    m
}

/// Stage 1: one 6 x 6 tracker generator per domino, with boundaries chosen
/// so that for every word w over the domino indices
///
/// ```text
/// sandwich(w) = (sigma(U(w)) - sigma(V(w)))^2 - (lambda + 1)
/// ```
///
/// where U and V are the two concatenation morphisms. A solution word hits
/// exactly `-(lambda + 1)`; every non-solution stays at `>= -lambda`
/// because distinct words have distinct numeric values.
pub fn build_d6(inst: &PcpInstance, lambda: &Q) -> MatrixMorphism {
    let b = inst.alphabet().size();
    let generators = inst
        .dominos()
        .iter()
        .map(|(u, v)| pair_matrix(b, u, v))
        .collect();
    let mut left = vec![Q::zero(); 6];
    left[5] = Q::one();
    let mut right = vec![Q::zero(); 6];
    right[0] = Q::one();
    right[1] = -Q::one();
    right[2] = Q::one();
    right[5] = -(lambda + Q::one());
    MatrixMorphism::new(generators, left, right).expect("fixed shape")
}

/// Block encoding of source letters as binary control words of length d.
///
/// Letter alpha maps to `X(alpha) = 2^(alpha-1) 1 2^(d-alpha)`: a single 1
/// in position alpha of a block of d symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LetterEncoder {
    d: usize,
}

impl LetterEncoder {
    pub fn new(d: usize) -> Result<Self, ReductionError> {
        if d < 2 {
            return Err(ReductionError::DomainTooSmall { d });
        }
        Ok(LetterEncoder { d })
    }

    pub fn domain_size(&self) -> usize {
        self.d
    }

    /// `X(alpha)` for a 1-based source letter.
    pub fn encode_letter(&self, letter: usize) -> Result<Word, ReductionError> {
        if letter == 0 || letter > self.d {
            return Err(ReductionError::Letter {
                letter,
                d: self.d,
            });
        }
        let mut out = Vec::with_capacity(self.d);
        out.extend(std::iter::repeat(2).take(letter - 1));
        out.push(1);
        out.extend(std::iter::repeat(2).take(self.d - letter));
        Ok(Word::from_letters(out))
    }

    /// Concatenated letter images; the result has length `d * |w|`.
    pub fn encode(&self, w: &Word) -> Result<Word, ReductionError> {
        let mut out = Word::empty();
        for &l in w.letters() {
            out = out.concat(&self.encode_letter(l)?);
        }
        Ok(out)
    }

    /// Strict inverse on the image: chops the word into blocks of d symbols
    /// and matches each against a letter image. Returns None for words not
    /// of the form `X(w)`, including any block with zero or several 1s.
    pub fn decode(&self, y: &Word) -> Option<Word> {
        if y.len() % self.d != 0 {
            return None;
        }
        let mut letters = Vec::with_capacity(y.len() / self.d);
        for block in y.letters().chunks(self.d) {
            let mut found = None;
            for (pos, &s) in block.iter().enumerate() {
                match s {
                    2 => {}
                    1 => {
                        if found.is_some() {
                            return None;
                        }
                        found = Some(pos + 1);
                    }
                    _ => return None,
                }
            }
            letters.push(found?);
        }
        Some(Word::from_letters(letters))
    }

    /// Pointer decode of an arbitrary binary control word.
    ///
    /// A pointer cycles through 1..=d, advancing one step per symbol; each 1
    /// emits the current pointer value. This is exactly the source word whose
    /// tracker product appears in the surviving block of the binary morphism,
    /// so the binary sandwich of y equals the source sandwich of the decoded
    /// word. Words whose length is not a multiple of d land off the boundary
    /// blocks, have sandwich zero, and decode to None.
    pub fn trace_decode(&self, y: &Word) -> Option<Word> {
        if y.len() % self.d != 0 {
            return None;
        }
        let mut p = 1usize;
        let mut emitted = Vec::new();
        for &s in y.letters() {
            match s {
                1 => {
                    emitted.push(p);
                    p = p % self.d + 1;
                }
                2 => {
                    p = p % self.d + 1;
                }
                _ => return None,
            }
        }
        Some(Word::from_letters(emitted))
    }
}

/// Stage 2: re-encode a d-letter morphism of dimension D over the binary
/// alphabet at dimension d*D.
///
/// Generator 2 is the cyclic block shift `S (x) 1_D`; generator 1 applies the
/// block diagonal `diag(A(1), ..., A(d))` and then the same shift. With this
/// split, the image of a block `X(alpha)` is the block diagonal matrix
/// `diag(A(alpha), ..., A(d), A(1), ..., A(alpha-1))`: the alpha-1 leading
/// shifts rotate the pointer onto letter alpha, the 1 consumes it, and the
/// trailing shifts complete the cycle. Boundaries are the originals padded
/// with zeros, so blockwise products telescope to the source sandwich.
pub fn binary_reduce(
    m: &MatrixMorphism,
) -> Result<(MatrixMorphism, LetterEncoder), ReductionError> {
    let d = m.domain_size();
    let dim = m.dim();
    if d < 2 {
        return Err(ReductionError::DomainTooSmall { d });
    }
    if dim < 2 {
        return Err(ReductionError::DimensionTooSmall { dim });
    }
    let n = d * dim;
    let mut shift = QMatrix::zeros(n, n);
    for block in 0..d {
        let target = (block + 1) % d;
        for k in 0..dim {
            shift[(block * dim + k, target * dim + k)] = Q::one();
        }
    }
    let mut blocks = QMatrix::zeros(n, n);
    for (block, g) in m.generators.iter().enumerate() {
        for i in 0..dim {
            for j in 0..dim {
                blocks[(block * dim + i, block * dim + j)] = g[(i, j)].clone();
            }
        }
    }
    let one_gen = blocks.mul(&shift);
    let mut left = vec![Q::zero(); n];
    let mut right = vec![Q::zero(); n];
    left[..dim].clone_from_slice(&m.left);
    right[..dim].clone_from_slice(&m.right);
    let out = MatrixMorphism::new(vec![one_gen, shift], left, right)?;
    Ok((out, LetterEncoder::new(d)?))
}

/// Stage 3: wrap a binary morphism as a diagonal MPO with physical
/// dimension 2 and bond dimension equal to the morphism dimension.
pub fn assemble_mpo(m: &MatrixMorphism) -> MpoInstance {
    assert_eq!(
        m.domain_size(),
        2,
        "assemble_mpo expects a binary morphism"
    );
    let dim = m.dim();
    let tensors = vec![
        m.generators[0].clone(),
        QMatrix::zeros(dim, dim),
        QMatrix::zeros(dim, dim),
        m.generators[1].clone(),
    ];
    MpoInstance::new(2, tensors, m.left.clone(), m.right.clone()).expect("fixed shape")
}

/// End-to-end compilation output: the diagonal operator plus the letter
/// encoder relating solution words to diagonal basis words.
#[derive(Debug, Clone)]
pub struct CompiledReduction {
    pub mpo: MpoInstance,
    pub encoder: LetterEncoder,
}

impl CompiledReduction {
    /// System size carrying candidate words of the given length: each source
    /// letter occupies one block of d sites.
    pub fn system_size(&self, word_len: usize) -> usize {
        self.encoder.domain_size() * word_len
    }
}

/// Full pipeline: tracker morphism, binary re-encoding, MPO assembly.
pub fn compile(inst: &PcpInstance, lambda: &Q) -> Result<CompiledReduction, ReductionError> {
    let d6 = build_d6(inst, lambda);
    let (binary, encoder) = binary_reduce(&d6)?;
    Ok(CompiledReduction {
        mpo: assemble_mpo(&binary),
        encoder,
    })
}

/// Reference value the compiled diagonal should take on a control word:
/// zero off the aligned lengths, otherwise the squared numeric difference
/// of the decoded word minus `lambda + 1`.
pub fn expected_entry(
    inst: &PcpInstance,
    encoder: &LetterEncoder,
    lambda: &Q,
    y: &Word,
) -> Q {
    match encoder.trace_decode(y) {
        None => Q::zero(),
        Some(w) => {
            let b = inst.alphabet().size();
            let u = inst.top_morphism().apply(&w).expect("decoded letters in range");
            let v = inst.bottom_morphism().apply(&w).expect("decoded letters in range");
            let du = Q::from_integer(numeric_rep(&u, b) - numeric_rep(&v, b));
            &du * &du - (lambda + q_int(1))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::q_ratio;
    use crate::words::for_each_word;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn w(letters: &[usize]) -> Word {
        Word::from_letters(letters.to_vec())
    }

    #[test]
    fn empty_pair_matrix_is_identity() {
        assert_eq!(pair_matrix(2, &Word::empty(), &Word::empty()), QMatrix::identity(6));
    }

    #[test]
    fn pair_matrix_explicit_entries() {
        // b=2, u = "a" = (1), v = "ba" = (2,1): sigma(u)=1, sigma(v)=5.
        let m = pair_matrix(2, &w(&[1]), &w(&[2, 1]));
        let expected = QMatrix::from_int_rows(&[
            &[4, 0, 0, 0, 0, 0],
            &[0, 8, 0, 0, 0, 0],
            &[0, 0, 16, 0, 0, 0],
            &[2, 10, 0, 2, 0, 0],
            &[0, 4, 20, 0, 4, 0],
            &[1, 10, 25, 2, 10, 1],
        ]);
        assert_eq!(m, expected);
    }

    #[test]
    fn pair_matrix_multiplication_concatenates_500_random_pairs() {
        let mut rng = StdRng::seed_from_u64(0x5eed_0001);
        let random_word = |rng: &mut StdRng, b: usize| {
            let len = rng.random_range(0..=6);
            Word::from_letters((0..len).map(|_| rng.random_range(1..=b)).collect())
        };
        for _ in 0..500 {
            let b = rng.random_range(2..=3);
            let (u1, v1) = (random_word(&mut rng, b), random_word(&mut rng, b));
            let (u2, v2) = (random_word(&mut rng, b), random_word(&mut rng, b));
            let lhs = pair_matrix(b, &u1, &v1).mul(&pair_matrix(b, &u2, &v2));
            let rhs = pair_matrix(b, &u1.concat(&u2), &v1.concat(&v2));
            assert_eq!(lhs, rhs, "b={b} u1={u1:?} v1={v1:?} u2={u2:?} v2={v2:?}");
        }
    }

    #[test]
    fn tracker_generators_are_nonnegative_integers() {
        let m = build_d6(&PcpInstance::classic(), &q_int(0));
        for letter in 1..=3 {
            let g = m.generator(letter).unwrap();
            for i in 0..6 {
                for j in 0..6 {
                    let e = &g[(i, j)];
                    assert!(e.is_integer(), "entry ({i},{j}) of generator {letter}");
                    assert!(e >= &q_int(0), "entry ({i},{j}) of generator {letter}");
                }
            }
        }
    }

    #[test]
    fn sandwich_values_frozen_for_classic_instance() {
        let inst = PcpInstance::classic();
        let cases: [(&[usize], i64, i64, (i64, i64)); 6] = [
            // word, value at lambda=0, at lambda=1, at lambda=7/3
            (&[3, 2, 3, 1], -1, -2, (-10, 3)),
            (&[1], 99, 98, (290, 3)),
            (&[2], 0, -1, (-7, 3)),
            (&[3], 48, 47, (137, 3)),
            (&[1, 2], 1520, 1519, (4553, 3)),
            (&[], -1, -2, (-10, 3)),
        ];
        let m0 = build_d6(&inst, &q_int(0));
        let m1 = build_d6(&inst, &q_int(1));
        let m73 = build_d6(&inst, &q_ratio(7, 3));
        for (word, at0, at1, (p, q)) in cases {
            let word = w(word);
            assert_eq!(m0.sandwich(&word).unwrap(), q_int(at0), "lambda=0, {word:?}");
            assert_eq!(m1.sandwich(&word).unwrap(), q_int(at1), "lambda=1, {word:?}");
            assert_eq!(m73.sandwich(&word).unwrap(), q_ratio(p, q), "lambda=7/3, {word:?}");
        }
    }

    #[test]
    fn sandwich_rejects_foreign_letter() {
        let m = build_d6(&PcpInstance::classic(), &q_int(0));
        assert_eq!(
            m.sandwich(&w(&[4])),
            Err(ReductionError::Letter { letter: 4, d: 3 })
        );
    }

    #[test]
    fn solution_words_hit_the_floor_and_nothing_else_does() {
        let inst = PcpInstance::classic();
        let lambda = q_int(0);
        let m = build_d6(&inst, &lambda);
        let floor = -(lambda.clone() + q_int(1));
        let mut floor_words = Vec::new();
        for len in 0..=4 {
            for_each_word(3, len, |word| {
                let val = m.sandwich(word).unwrap();
                assert!(val >= floor, "{word:?} below floor");
                if val == floor {
                    floor_words.push(word.clone());
                }
            });
        }
        // The empty word and the unique length-4 solution.
        assert_eq!(floor_words, vec![Word::empty(), w(&[3, 2, 3, 1])]);
        for word in &floor_words {
            if !word.is_empty() {
                assert!(inst.verify_solution(word).unwrap());
            }
        }
    }

    proptest! {
        #[test]
        fn sandwich_matches_squared_difference_formula(
            letters in proptest::collection::vec(1usize..=3, 0..=6),
            lam_num in -3i64..=9,
        ) {
            let inst = PcpInstance::classic();
            let lambda = q_ratio(lam_num, 3);
            let m = build_d6(&inst, &lambda);
            let word = Word::from_letters(letters);
            let u = inst.top_morphism().apply(&word).unwrap();
            let v = inst.bottom_morphism().apply(&word).unwrap();
            let diff = Q::from_integer(numeric_rep(&u, 2) - numeric_rep(&v, 2));
            let expected = &diff * &diff - (&lambda + q_int(1));
            prop_assert_eq!(m.sandwich(&word).unwrap(), expected);
        }

        #[test]
        fn binary_sandwich_preserved_on_encoded_words(
            letters in proptest::collection::vec(1usize..=3, 0..=5),
        ) {
            let inst = PcpInstance::classic();
            let m = build_d6(&inst, &q_int(0));
            let (bin, enc) = binary_reduce(&m).unwrap();
            let word = Word::from_letters(letters);
            let y = enc.encode(&word).unwrap();
            prop_assert_eq!(y.len(), 3 * word.len());
            prop_assert_eq!(bin.sandwich(&y).unwrap(), m.sandwich(&word).unwrap());
        }

        #[test]
        fn binary_sandwich_on_arbitrary_words_follows_pointer_decode(
            letters in proptest::collection::vec(1usize..=2, 0..=9),
        ) {
            let inst = PcpInstance::classic();
            let lambda = q_int(0);
            let m = build_d6(&inst, &lambda);
            let (bin, enc) = binary_reduce(&m).unwrap();
            let y = Word::from_letters(letters);
            let direct = bin.sandwich(&y).unwrap();
            let expected = match enc.trace_decode(&y) {
                None => q_int(0),
                Some(word) => m.sandwich(&word).unwrap(),
            };
            prop_assert_eq!(direct, expected);
        }

        #[test]
        fn encode_decode_round_trip(
            letters in proptest::collection::vec(1usize..=4, 0..=5),
            d in 2usize..=4,
        ) {
            let enc = LetterEncoder::new(d).unwrap();
            let letters: Vec<usize> = letters.into_iter().map(|l| (l - 1) % d + 1).collect();
            let word = Word::from_letters(letters);
            let y = enc.encode(&word).unwrap();
            prop_assert_eq!(enc.decode(&y), Some(word.clone()));
            prop_assert_eq!(enc.trace_decode(&y), Some(word));
        }
    }

    #[test]
    fn letter_codes_for_three_sources() {
        let enc = LetterEncoder::new(3).unwrap();
        assert_eq!(enc.encode_letter(1).unwrap(), w(&[1, 2, 2]));
        assert_eq!(enc.encode_letter(2).unwrap(), w(&[2, 1, 2]));
        assert_eq!(enc.encode_letter(3).unwrap(), w(&[2, 2, 1]));
        assert_eq!(
            enc.encode(&w(&[3, 2, 3, 1])).unwrap(),
            w(&[2, 2, 1, 2, 1, 2, 2, 2, 1, 1, 2, 2])
        );
    }

    #[test]
    fn strict_decode_rejects_off_image_words() {
        let enc = LetterEncoder::new(3).unwrap();
        assert_eq!(enc.decode(&w(&[2, 2, 2])), None);
        assert_eq!(enc.decode(&w(&[1, 1, 2])), None);
        assert_eq!(enc.decode(&w(&[1, 2])), None);
        assert_eq!(enc.decode(&Word::empty()), Some(Word::empty()));
    }

    #[test]
    fn pointer_decode_handles_off_image_words() {
        let enc = LetterEncoder::new(3).unwrap();
        // All-skip block: emits nothing but stays aligned.
        assert_eq!(enc.trace_decode(&w(&[2, 2, 2])), Some(Word::empty()));
        // Misaligned length.
        assert_eq!(enc.trace_decode(&w(&[1, 2])), None);
        // Two emissions inside one block.
        assert_eq!(enc.trace_decode(&w(&[1, 1, 2])), Some(w(&[1, 2])));
        // The least word realizing the length-12 minimum of the compiled
        // classic operator: pads the solution across block boundaries.
        assert_eq!(
            enc.trace_decode(&w(&[2, 2, 1, 2, 1, 1, 1, 2, 2, 2, 2, 2])),
            Some(w(&[3, 2, 3, 1]))
        );
    }

    #[test]
    fn binary_generators_have_block_structure() {
        let inst = PcpInstance::classic();
        let m = build_d6(&inst, &q_int(0));
        let (bin, enc) = binary_reduce(&m).unwrap();
        assert_eq!(bin.dim(), 18);
        assert_eq!(bin.domain_size(), 2);
        let d = 3;
        let dim = 6;
        // The image of each letter code is block diagonal with the tracker
        // generators rotated to start at that letter.
        for alpha in 1..=d {
            let c = bin.word_matrix(&enc.encode_letter(alpha).unwrap()).unwrap();
            for bi in 0..d {
                for bj in 0..d {
                    for i in 0..dim {
                        for j in 0..dim {
                            let got = &c[(bi * dim + i, bj * dim + j)];
                            if bi == bj {
                                let src = (alpha - 1 + bi) % d + 1;
                                assert_eq!(got, &m.generator(src).unwrap()[(i, j)]);
                            } else {
                                assert_eq!(got, &q_int(0));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn letter_code_image_matches_shifted_product_form() {
        // The same block diagonal matrices arise as S^(a-1) * B * S^(d-a+1)
        // where B is the plain block diagonal of the tracker generators and
        // S the cyclic block shift; the split used by binary_reduce folds
        // one shift into the 1-generator so the letter codes keep length d.
        let inst = PcpInstance::classic();
        let m = build_d6(&inst, &q_int(0));
        let (bin, enc) = binary_reduce(&m).unwrap();
        let d = 3;
        let dim = 6;
        let n = d * dim;
        let mut s = QMatrix::zeros(n, n);
        for block in 0..d {
            for k in 0..dim {
                s[(block * dim + k, ((block + 1) % d) * dim + k)] = q_int(1);
            }
        }
        let mut b = QMatrix::zeros(n, n);
        for alpha in 0..d {
            let g = m.generator(alpha + 1).unwrap();
            for i in 0..dim {
                for j in 0..dim {
                    b[(alpha * dim + i, alpha * dim + j)] = g[(i, j)].clone();
                }
            }
        }
        let pow = |m: &QMatrix, k: usize| {
            let mut acc = QMatrix::identity(n);
            for _ in 0..k {
                acc = acc.mul(m);
            }
            acc
        };
        for alpha in 1..=d {
            let displayed = pow(&s, alpha - 1).mul(&b).mul(&pow(&s, d - alpha + 1));
            let via_code = bin.word_matrix(&enc.encode_letter(alpha).unwrap()).unwrap();
            assert_eq!(displayed, via_code, "alpha={alpha}");
        }
    }

    #[test]
    fn binary_reduce_rejects_small_inputs() {
        let one_letter =
            MatrixMorphism::new(vec![QMatrix::identity(2)], vec![q_int(1); 2], vec![q_int(1); 2])
                .unwrap();
        assert!(matches!(
            binary_reduce(&one_letter),
            Err(ReductionError::DomainTooSmall { d: 1 })
        ));
        let dim_one = MatrixMorphism::new(
            vec![QMatrix::identity(1), QMatrix::identity(1)],
            vec![q_int(1)],
            vec![q_int(1)],
        )
        .unwrap();
        assert!(matches!(
            binary_reduce(&dim_one),
            Err(ReductionError::DimensionTooSmall { dim: 1 })
        ));
    }

    #[test]
    fn compiled_classic_operator_shape() {
        let compiled = compile(&PcpInstance::classic(), &q_int(0)).unwrap();
        assert_eq!(compiled.mpo.physical_dim(), 2);
        assert_eq!(compiled.mpo.bond_dim(), 18);
        assert!(compiled.mpo.is_diagonal());
        assert_eq!(compiled.system_size(4), 12);
    }

    #[test]
    fn seven_domino_instance_compiles_to_bond_42() {
        let texts: Vec<(&str, &str)> = vec![
            ("a", "ab"),
            ("b", "ba"),
            ("ab", "b"),
            ("ba", "a"),
            ("aa", "a"),
            ("bb", "b"),
            ("ab", "ba"),
        ];
        let inst = PcpInstance::from_texts(crate::words::Alphabet::ab(), &texts).unwrap();
        let compiled = compile(&inst, &q_int(0)).unwrap();
        assert_eq!(compiled.mpo.bond_dim(), 42);
        assert_eq!(compiled.mpo.physical_dim(), 2);
    }

    #[test]
    fn compiled_diagonal_matches_reference_entry() {
        let inst = PcpInstance::classic();
        for lambda in [q_int(0), q_int(1), q_ratio(7, 3)] {
            let compiled = compile(&inst, &lambda).unwrap();
            for len in 0..=6 {
                for_each_word(2, len, |y| {
                    let got = compiled.mpo.diagonal_entry(y).unwrap();
                    let want = expected_entry(&inst, &compiled.encoder, &lambda, y);
                    assert_eq!(got, want, "lambda={lambda} y={y:?}");
                });
            }
        }
    }

    #[test]
    fn compiled_solution_entry_at_full_size() {
        let inst = PcpInstance::classic();
        let compiled = compile(&inst, &q_int(0)).unwrap();
        let y = compiled.encoder.encode(&w(&[3, 2, 3, 1])).unwrap();
        assert_eq!(y.len(), 12);
        assert_eq!(compiled.mpo.diagonal_entry(&y).unwrap(), q_int(-1));

        let compiled1 = compile(&inst, &q_int(1)).unwrap();
        assert_eq!(compiled1.mpo.diagonal_entry(&y).unwrap(), q_int(-2));
    }

    #[test]
    fn diagonal_minima_frozen_small_sizes() {
        let compiled = compile(&PcpInstance::classic(), &q_int(0)).unwrap();
        let budget = 1 << 24;
        let cases: [(usize, i64, &[usize]); 6] = [
            (1, 0, &[1]),
            (2, 0, &[1, 1]),
            (3, -1, &[2, 2, 2]),
            (6, -1, &[2, 2, 2, 2, 2, 2]),
            (9, -1, &[2, 2, 1, 2, 1, 1, 1, 2, 2]),
            (12, -1, &[2, 2, 1, 2, 1, 1, 1, 2, 2, 2, 2, 2]),
        ];
        for (n, min, witness) in cases {
            let (got_min, got_wit) = compiled.mpo.min_diagonal(n, budget).unwrap();
            assert_eq!(got_min, q_int(min), "size {n}");
            assert_eq!(got_wit, w(witness), "size {n}");
        }
    }

    #[test]
    fn negative_entry_counts_frozen() {
        let compiled = compile(&PcpInstance::classic(), &q_int(0)).unwrap();
        for (n, expected) in [(3usize, 1usize), (6, 1), (9, 2), (12, 6)] {
            let mut count = 0;
            for_each_word(2, n, |y| {
                if compiled.mpo.diagonal_entry(y).unwrap() < q_int(0) {
                    count += 1;
                }
            });
            assert_eq!(count, expected, "size {n}");
        }
    }
}
