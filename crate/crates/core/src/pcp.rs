//! Correspondence-problem instances, solution checking, and a brute-force
//! solver with prefix pruning.
//!
//! An instance is a list of d dominos `(u_alpha, v_alpha)` over a common
//! alphabet. A solution is a nonempty index word w with `U(w) = V(w)` where
//! U and V concatenate the top and bottom rows. The solver enumerates index
//! words in lexicographic order, prunes a branch as soon as neither partial
//! image is a prefix of the other, and counts every visited partial word
//! against a budget so that an exhausted search is reported as such instead
//! of masquerading as "no solution".

use crate::words::{Alphabet, Word, WordMorphism, WordsError};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PcpError {
    #[error(transparent)]
    Words(#[from] WordsError),
    /// Solutions must be nonempty by definition.
    #[error("the empty word is not an admissible solution candidate")]
    EmptyCandidate,
    /// The search visited `visited` partial words and hit the configured cap
    /// before the space was exhausted.
    #[error("search budget exhausted after visiting {visited} partial words")]
    BudgetExhausted { visited: u64 },
    #[error("instance must contain at least one domino")]
    NoDominos,
}

/// Caps for the exhaustive searches. The default allows 10^7 partial words.
#[derive(Debug, Clone, Copy)]
pub struct SearchBudget {
    pub max_partial_words: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_partial_words: 10_000_000,
        }
    }
}

/// A correspondence-problem instance: d dominos over one alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcpInstance {
    alphabet: Alphabet,
    dominos: Vec<(Word, Word)>,
}

impl PcpInstance {
    pub fn new(alphabet: Alphabet, dominos: Vec<(Word, Word)>) -> Result<Self, PcpError> {
        if dominos.is_empty() {
            return Err(PcpError::NoDominos);
        }
        for (u, v) in &dominos {
            alphabet.check_word(u)?;
            alphabet.check_word(v)?;
        }
        Ok(PcpInstance { alphabet, dominos })
    }

    /// Convenience constructor from serialized domino texts.
    pub fn from_texts(
        alphabet: Alphabet,
        dominos: &[(&str, &str)],
    ) -> Result<Self, PcpError> {
        let parsed = dominos
            .iter()
            .map(|(u, v)| Ok((alphabet.parse_word(u)?, alphabet.parse_word(v)?)))
            .collect::<Result<Vec<_>, WordsError>>()?;
        Self::new(alphabet, parsed)
    }

    /// The classic 3-domino fixture `(a|baa), (ab|aa), (bba|bb)` whose
    /// shortest solution is `(3,2,3,1)`.
    pub fn classic() -> Self {
        Self::from_texts(Alphabet::ab(), &[("a", "baa"), ("ab", "aa"), ("bba", "bb")]).unwrap()
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn dominos(&self) -> &[(Word, Word)] {
        &self.dominos
    }

    /// Number of dominos d.
    pub fn domino_count(&self) -> usize {
        self.dominos.len()
    }

    /// Top-row morphism U.
    pub fn top_morphism(&self) -> WordMorphism {
        WordMorphism::new(self.dominos.iter().map(|(u, _)| u.clone()).collect())
    }

    /// Bottom-row morphism V.
    pub fn bottom_morphism(&self) -> WordMorphism {
        WordMorphism::new(self.dominos.iter().map(|(_, v)| v.clone()).collect())
    }

    /// Check a candidate solution: true iff `U(w) = V(w)`. The empty word is
    /// rejected and letters must index existing dominos.
    pub fn verify_solution(&self, w: &Word) -> Result<bool, PcpError> {
        if w.is_empty() {
            return Err(PcpError::EmptyCandidate);
        }
        w.check_over(self.domino_count())
            .map_err(|_| PcpError::Words(WordsError::LetterOutOfRange {
                letter: *w.letters().iter().find(|&&l| l == 0 || l > self.domino_count()).unwrap(),
                domain: self.domino_count(),
            }))?;
        let u = self.top_morphism().apply(w)?;
        let v = self.bottom_morphism().apply(w)?;
        Ok(u == v)
    }

    /// Search for a solution of length exactly `n`. Returns the
    /// lexicographically least one, `None` after an exhaustive search, or a
    /// budget error when the cap is hit first.
    pub fn solve_bpcp(&self, n: usize, budget: SearchBudget) -> Result<Option<Word>, PcpError> {
        assert!(n >= 1, "solution length must be positive");
        let mut counter = 0u64;
        self.dfs(&Word::empty(), &[], &[], n, budget, &mut counter)
    }

    /// Smallest-length solution with length at most `n_max`, together with
    /// its length. The budget is shared across all lengths.
    pub fn solve_pcp_bounded(
        &self,
        n_max: usize,
        budget: SearchBudget,
    ) -> Result<Option<(Word, usize)>, PcpError> {
        assert!(n_max >= 1, "length cap must be positive");
        let mut counter = 0u64;
        for n in 1..=n_max {
            if let Some(w) = self.dfs(&Word::empty(), &[], &[], n, budget, &mut counter)? {
                return Ok(Some((w, n)));
            }
        }
        Ok(None)
    }

    /// Depth-first extension of the partial word `prefix` whose images so far
    /// are `u_img`/`v_img`. Explores letters in increasing order, so the
    /// first full-length match found is the lexicographically least.
    fn dfs(
        &self,
        prefix: &Word,
        u_img: &[usize],
        v_img: &[usize],
        n: usize,
        budget: SearchBudget,
        counter: &mut u64,
    ) -> Result<Option<Word>, PcpError> {
        for letter in 1..=self.domino_count() {
            *counter += 1;
            if *counter > budget.max_partial_words {
                return Err(PcpError::BudgetExhausted { visited: *counter });
            }
            let (u_dom, v_dom) = &self.dominos[letter - 1];
            let mut u_new = u_img.to_vec();
            u_new.extend_from_slice(u_dom.letters());
            let mut v_new = v_img.to_vec();
            v_new.extend_from_slice(v_dom.letters());
            // Prune unless one image is a prefix of the other; appending
            // dominos can never repair a mismatch at an existing position.
            let common = u_new.len().min(v_new.len());
            if u_new[..common] != v_new[..common] {
                continue;
            }
            let mut w = prefix.clone();
            w.push(letter);
            if w.len() == n {
                if u_new == v_new {
                    return Ok(Some(w));
                }
                continue;
            }
            if let Some(sol) = self.dfs(&w, &u_new, &v_new, n, budget, counter)? {
                return Ok(Some(sol));
            }
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::for_each_word;

    fn big_budget() -> SearchBudget {
        SearchBudget::default()
    }

    #[test]
    fn classic_solution_verifies() {
        let inst = PcpInstance::classic();
        let w = Word::from_letters(vec![3, 2, 3, 1]);
        assert_eq!(inst.verify_solution(&w), Ok(true));
        let bad = Word::from_letters(vec![1]);
        assert_eq!(inst.verify_solution(&bad), Ok(false));
    }

    #[test]
    fn empty_candidate_is_rejected() {
        let inst = PcpInstance::classic();
        assert_eq!(
            inst.verify_solution(&Word::empty()),
            Err(PcpError::EmptyCandidate)
        );
    }

    #[test]
    fn equal_domino_always_solves() {
        let inst =
            PcpInstance::from_texts(Alphabet::ab(), &[("a", "a"), ("ab", "ba")]).unwrap();
        assert_eq!(inst.verify_solution(&Word::from_letters(vec![1])), Ok(true));
        for k in 1..=4 {
            let got = inst.solve_bpcp(k, big_budget()).unwrap();
            assert_eq!(got, Some(Word::from_letters(vec![1; k])), "length {k}");
        }
    }

    #[test]
    fn classic_solutions_by_length() {
        let inst = PcpInstance::classic();
        for n in 1..=3 {
            assert_eq!(inst.solve_bpcp(n, big_budget()).unwrap(), None, "length {n}");
        }
        assert_eq!(
            inst.solve_bpcp(4, big_budget()).unwrap(),
            Some(Word::from_letters(vec![3, 2, 3, 1]))
        );
        for n in 5..=7 {
            assert_eq!(inst.solve_bpcp(n, big_budget()).unwrap(), None, "length {n}");
        }
        assert_eq!(
            inst.solve_bpcp(8, big_budget()).unwrap(),
            Some(Word::from_letters(vec![3, 2, 3, 1, 3, 2, 3, 1]))
        );
    }

    #[test]
    fn bounded_search_returns_smallest_length() {
        let inst = PcpInstance::classic();
        let got = inst.solve_pcp_bounded(6, big_budget()).unwrap();
        assert_eq!(got, Some((Word::from_letters(vec![3, 2, 3, 1]), 4)));
        assert_eq!(inst.solve_pcp_bounded(3, big_budget()).unwrap(), None);
    }

    #[test]
    fn growing_mismatch_prunes_to_nothing() {
        let inst = PcpInstance::from_texts(Alphabet::ab(), &[("ab", "a")]).unwrap();
        assert_eq!(inst.solve_pcp_bounded(10, big_budget()).unwrap(), None);
    }

    #[test]
    fn budget_exhaustion_is_distinguished() {
        let inst = PcpInstance::classic();
        let tiny = SearchBudget { max_partial_words: 10 };
        match inst.solve_bpcp(4, tiny) {
            Err(PcpError::BudgetExhausted { visited }) => assert!(visited > 10),
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn solver_agrees_with_unpruned_enumeration() {
        // Pruning must not lose solutions: compare against a plain scan of
        // all d^n words on instances small enough to enumerate.
        let instances = vec![
            PcpInstance::classic(),
            PcpInstance::from_texts(Alphabet::ab(), &[("a", "ab"), ("b", "a")]).unwrap(),
            PcpInstance::from_texts(Alphabet::ab(), &[("ba", "b"), ("b", "ab")]).unwrap(),
        ];
        for inst in instances {
            for n in 1..=5 {
                let mut brute: Option<Word> = None;
                for_each_word(inst.domino_count(), n, |w| {
                    if brute.is_none() && inst.verify_solution(w) == Ok(true) {
                        brute = Some(w.clone());
                    }
                });
                let solved = inst.solve_bpcp(n, big_budget()).unwrap();
                assert_eq!(solved, brute, "instance {inst:?} length {n}");
            }
        }
    }

    #[test]
    fn solver_results_verify() {
        let inst = PcpInstance::classic();
        if let Some(w) = inst.solve_bpcp(4, big_budget()).unwrap() {
            assert_eq!(inst.verify_solution(&w), Ok(true));
        } else {
            panic!("expected a length-4 solution");
        }
    }

    #[test]
    fn rejects_empty_instance_and_foreign_words() {
        assert_eq!(
            PcpInstance::new(Alphabet::ab(), vec![]),
            Err(PcpError::NoDominos)
        );
        let inst = PcpInstance::classic();
        let foreign = Word::from_letters(vec![4]);
        assert!(matches!(
            inst.verify_solution(&foreign),
            Err(PcpError::Words(WordsError::LetterOutOfRange { .. }))
        ));
    }
}
