//! Matrix product operator data model, dense assembly, spectra, and the
//! threshold problems.
//!
//! An operator on n sites of local dimension d is stored as a single site
//! tensor together with boundary vectors,
//!
//! ```text
//! rho(L,M,R,n)[x,y] = L . M^(x_1,y_1) M^(x_2,y_2) ... M^(x_n,y_n) . R
//! ```
//!
//! where each `M^(alpha,beta)` is a D x D rational matrix, L is a row vector
//! and R a column vector. The threshold question "is rho + lambda*1 >= 0"
//! is answered on two paths:
//!
//! * diagonal path: when every off-diagonal tensor vanishes the operator is
//!   diagonal in the computational basis, each entry is a rational word
//!   product, and the verdict is an exact comparison;
//! * dense path: the operator is assembled as a float matrix, symmetrized,
//!   and diagonalized; verdicts carry a tolerance band and can come back
//!   inconclusive near the threshold.

use crate::exact::{dot, q_to_f64, row_mul, Q, QMatrix};
use crate::words::Word;
use nalgebra::DMatrix;
use num::{One, Signed, Zero};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MpoError {
    #[error("operator dimension {dim} exceeds the dense cap {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },
    #[error("word count {count} exceeds the enumeration budget {budget}")]
    EnumerationBudget { count: usize, budget: usize },
    #[error("operation requires a diagonal MPO")]
    NotDiagonal,
    #[error("word length {got} does not match system size {expected}")]
    WrongLength { got: usize, expected: usize },
    #[error("letter {letter} outside physical range 1..={d}")]
    BadLetter { letter: usize, d: usize },
    #[error("inconsistent tensor shapes: {0}")]
    Shape(String),
}

/// Default cap on `d^n` for dense assembly and eigensolves.
pub const DEFAULT_DENSE_CAP: usize = 4096;
/// Default cap on `d^n` for exact diagonal enumeration.
pub const DEFAULT_ENUM_BUDGET: usize = 1 << 24;

/// A translation invariant MPO: physical dimension d, bond dimension D,
/// site tensor `M^(alpha,beta)` and boundary vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MpoInstance {
    d: usize,
    bond: usize,
    /// Row-major by physical indices: slot `(alpha-1)*d + (beta-1)`.
    tensors: Vec<QMatrix>,
    left: Vec<Q>,
    right: Vec<Q>,
    diagonal: bool,
}

impl MpoInstance {
    pub fn new(
        d: usize,
        tensors: Vec<QMatrix>,
        left: Vec<Q>,
        right: Vec<Q>,
    ) -> Result<Self, MpoError> {
        if d == 0 {
            return Err(MpoError::Shape("physical dimension must be positive".into()));
        }
        if tensors.len() != d * d {
            return Err(MpoError::Shape(format!(
                "expected {} site matrices, got {}",
                d * d,
                tensors.len()
            )));
        }
        let bond = tensors[0].nrows();
        for t in &tensors {
            if t.nrows() != bond || t.ncols() != bond {
                return Err(MpoError::Shape("site matrices must be square and equal sized".into()));
            }
        }
        if left.len() != bond || right.len() != bond {
            return Err(MpoError::Shape(format!(
                "boundary vectors must have length {bond}"
            )));
        }
        let diagonal = (0..d).all(|a| {
            (0..d).all(|b| a == b || tensors[a * d + b].is_zero())
        });
        Ok(MpoInstance {
            d,
            bond,
            tensors,
            left,
            right,
            diagonal,
        })
    }

    /// The identity operator at bond dimension 1.
    pub fn identity(d: usize) -> Self {
        let tensors = (0..d * d)
            .map(|slot| {
                if slot % (d + 1) == 0 {
                    QMatrix::identity(1)
                } else {
                    QMatrix::zeros(1, 1)
                }
            })
            .collect();
        MpoInstance::new(d, tensors, vec![Q::one()], vec![Q::one()]).unwrap()
    }

    pub fn physical_dim(&self) -> usize {
        self.d
    }

    pub fn bond_dim(&self) -> usize {
        self.bond
    }

    /// True iff every `M^(alpha,beta)` with `alpha != beta` is zero; set at
    /// construction time by inspecting the tensors.
    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    /// Site matrix for 1-based physical indices.
    pub fn tensor(&self, alpha: usize, beta: usize) -> &QMatrix {
        assert!(alpha >= 1 && alpha <= self.d && beta >= 1 && beta <= self.d);
        &self.tensors[(alpha - 1) * self.d + (beta - 1)]
    }

    pub fn left(&self) -> &[Q] {
        &self.left
    }

    pub fn right(&self) -> &[Q] {
        &self.right
    }

    /// Largest entry magnitude over tensors and boundaries, for float-path
    /// overflow guards.
    pub fn max_abs_entry(&self) -> Q {
        let mut m = self
            .tensors
            .iter()
            .map(|t| t.max_abs())
            .max()
            .unwrap_or_else(Q::zero);
        for v in self.left.iter().chain(self.right.iter()) {
            let a = v.abs();
            if a > m {
                m = a;
            }
        }
        m
    }

    fn check_size(&self, n: usize, cap: usize) -> Result<usize, MpoError> {
        let mut dim = 1usize;
        for _ in 0..n {
            dim = dim.checked_mul(self.d).filter(|&v| v <= cap).ok_or(
                MpoError::DenseCapExceeded {
                    dim: cap.saturating_add(1),
                    cap,
                },
            )?;
        }
        Ok(dim)
    }

    /// One diagonal entry `<w| rho |w>`, exact. Requires the diagonal flag.
    pub fn diagonal_entry(&self, w: &Word) -> Result<Q, MpoError> {
        if !self.diagonal {
            return Err(MpoError::NotDiagonal);
        }
        for &l in w.letters() {
            if l == 0 || l > self.d {
                return Err(MpoError::BadLetter { letter: l, d: self.d });
            }
        }
        let mut row = self.left.clone();
        for &l in w.letters() {
            row = row_mul(&row, self.tensor(l, l));
        }
        Ok(dot(&row, &self.right))
    }

    /// Exact dense assembly as a `d^n x d^n` rational matrix. Cost is
    /// quadratic in the matrix size; intended for cross-checks at small n.
    pub fn dense_assemble(&self, n: usize, cap: usize) -> Result<QMatrix, MpoError> {
        let dim = self.check_size(n, cap)?;
        let mut out = QMatrix::zeros(dim, dim);
        let mut xw = vec![1usize; n];
        for x in 0..dim {
            if x > 0 {
                increment(&mut xw, self.d);
            }
            let mut yw = vec![1usize; n];
            for y in 0..dim {
                if y > 0 {
                    increment(&mut yw, self.d);
                }
                if self.diagonal && x != y {
                    continue;
                }
                let mut row = self.left.clone();
                for k in 0..n {
                    row = row_mul(&row, self.tensor(xw[k], yw[k]));
                }
                out[(x, y)] = dot(&row, &self.right);
            }
        }
        Ok(out)
    }

    /// Float dense assembly via a two-half split: all left half-contractions
    /// and right half-contractions are tabulated once, so the cost is
    /// `O(d^n * d^n * D)` instead of rebuilding every word product.
    pub fn dense_assemble_f64(&self, n: usize, cap: usize) -> Result<DMatrix<f64>, MpoError> {
        let dim = self.check_size(n, cap)?;
        let tensors_f: Vec<Vec<f64>> = self.tensors.iter().map(|t| t.to_f64_vec()).collect();
        let bond = self.bond;
        let left_f: Vec<f64> = self.left.iter().map(q_to_f64).collect();
        let right_f: Vec<f64> = self.right.iter().map(q_to_f64).collect();

        let n1 = n / 2;
        let n2 = n - n1;
        let halves_left = self.tabulate_halves(&tensors_f, &left_f, n1, true);
        let halves_right = self.tabulate_halves(&tensors_f, &right_f, n2, false);

        let d1 = self.d.pow(n1 as u32);
        let d2 = self.d.pow(n2 as u32);
        let mut out = DMatrix::zeros(dim, dim);
        for x1 in 0..d1 {
            for y1 in 0..d1 {
                let a = &halves_left[x1 * d1 + y1];
                for x2 in 0..d2 {
                    for y2 in 0..d2 {
                        let b = &halves_right[x2 * d2 + y2];
                        let mut acc = 0.0;
                        for k in 0..bond {
                            acc += a[k] * b[k];
                        }
                        out[(x1 * d2 + x2, y1 * d2 + y2)] = acc;
                    }
                }
            }
        }
        Ok(out)
    }

    /// All `d^k * d^k` partial contractions of length `k` starting from
    /// `boundary`, either extending to the right from L or to the left
    /// from R.
    fn tabulate_halves(
        &self,
        tensors_f: &[Vec<f64>],
        boundary: &[f64],
        k: usize,
        from_left: bool,
    ) -> Vec<Vec<f64>> {
        let bond = self.bond;
        let mut acc: Vec<Vec<f64>> = vec![boundary.to_vec()];
        for _ in 0..k {
            let mut next = Vec::with_capacity(acc.len() * self.d * self.d);
            for v in &acc {
                for slot in 0..self.d * self.d {
                    let t = &tensors_f[slot];
                    let mut out = vec![0.0; bond];
                    if from_left {
                        for (i, vi) in v.iter().enumerate() {
                            if *vi != 0.0 {
                                for (j, o) in out.iter_mut().enumerate() {
                                    *o += vi * t[i * bond + j];
                                }
                            }
                        }
                    } else {
                        for (i, o) in out.iter_mut().enumerate() {
                            let mut s = 0.0;
                            for (j, vj) in v.iter().enumerate() {
                                s += t[i * bond + j] * vj;
                            }
                            *o = s;
                        }
                    }
                    next.push(out);
                }
            }
            acc = next;
        }
        if !from_left {
            // Reindex so that the physical word digits read left to right:
            // the accumulation above appended the innermost site last, but
            // index pairs must be ordered with the leftmost site most
            // significant.
            let dd = self.d * self.d;
            let total = acc.len();
            let mut fixed = vec![Vec::new(); total];
            for (idx, v) in acc.into_iter().enumerate() {
                // idx digits base dd, first-applied site least significant;
                // reverse the digit order.
                let mut digits = Vec::with_capacity(k);
                let mut r = idx;
                for _ in 0..k {
                    digits.push(r % dd);
                    r /= dd;
                }
                let mut new_idx = 0usize;
                for &dgt in digits.iter() {
                    new_idx = new_idx * dd + dgt;
                }
                fixed[new_idx] = v;
            }
            acc = fixed;
        }
        // Convert (site-major pair) indexing to (x-word, y-word) split order.
        let d1 = self.d.pow(k as u32);
        let mut out = vec![Vec::new(); d1 * d1];
        for (idx, v) in acc.into_iter().enumerate() {
            let mut x = 0usize;
            let mut y = 0usize;
            let mut r = idx;
            let mut pairs = Vec::with_capacity(k);
            for _ in 0..k {
                pairs.push(r % (self.d * self.d));
                r /= self.d * self.d;
            }
            pairs.reverse();
            for &p in &pairs {
                x = x * self.d + p / self.d;
                y = y * self.d + p % self.d;
            }
            out[x * d1 + y] = v;
        }
        out
    }

    /// Exact minimum of the diagonal over all `d^n` basis words, with the
    /// lexicographically least witness. Diagonal MPOs only.
    pub fn min_diagonal(&self, n: usize, budget: usize) -> Result<(Q, Word), MpoError> {
        if !self.diagonal {
            return Err(MpoError::NotDiagonal);
        }
        let mut count = 1usize;
        for _ in 0..n {
            count = count
                .checked_mul(self.d)
                .filter(|&v| v <= budget)
                .ok_or(MpoError::EnumerationBudget {
                    count: budget.saturating_add(1),
                    budget,
                })?;
        }
        if n == 0 {
            return Ok((dot(&self.left, &self.right), Word::empty()));
        }
        // One sequential walk per leading letter; the reduction keeps the
        // first subtree achieving the global minimum, which preserves the
        // lexicographic witness under parallel evaluation.
        let per_letter: Vec<(Q, Word)> = (1..=self.d)
            .into_par_iter()
            .map(|first| {
                let row = row_mul(&self.left, self.tensor(first, first));
                let mut best: Option<(Q, Word)> = None;
                let mut prefix = Word::from_letters(vec![first]);
                self.walk_diag(&row, &mut prefix, n, &mut best);
                best.expect("nonempty subtree")
            })
            .collect();
        let mut iter = per_letter.into_iter();
        let mut best = iter.next().expect("d >= 1");
        for cand in iter {
            if cand.0 < best.0 {
                best = cand;
            }
        }
        Ok(best)
    }

    fn walk_diag(&self, row: &[Q], prefix: &mut Word, n: usize, best: &mut Option<(Q, Word)>) {
        if prefix.len() == n {
            let val = dot(row, &self.right);
            match best {
                Some((b, _)) if *b <= val => {}
                _ => *best = Some((val, prefix.clone())),
            }
            return;
        }
        for letter in 1..=self.d {
            let next = row_mul(row, self.tensor(letter, letter));
            prefix.push(letter);
            self.walk_diag(&next, prefix, n, best);
            prefix.pop();
        }
    }

    /// Smallest eigenvalue of the symmetrized dense operator
    /// `(rho + rho^T)/2`.
    pub fn min_eigenvalue(&self, n: usize, cap: usize) -> Result<f64, MpoError> {
        let rho = self.dense_assemble_f64(n, cap)?;
        let sym = (&rho + rho.transpose()) * 0.5;
        let eigs = sym.symmetric_eigenvalues();
        Ok(eigs.iter().cloned().fold(f64::INFINITY, f64::min))
    }

    /// Relative asymmetry `||rho - rho^T|| / ||rho||` of the dense operator,
    /// used to warn when the symmetrized spectrum is reported for an
    /// operator that was not symmetric to begin with.
    pub fn asymmetry_defect(&self, n: usize, cap: usize) -> Result<f64, MpoError> {
        let rho = self.dense_assemble_f64(n, cap)?;
        let norm = rho.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        Ok((&rho - rho.transpose()).norm() / norm)
    }
}

fn increment(word: &mut [usize], d: usize) {
    for slot in word.iter_mut().rev() {
        if *slot < d {
            *slot += 1;
            return;
        }
        *slot = 1;
    }
}

/// Three-valued outcome of a threshold query. The float path reports
/// `Inconclusive` inside its tolerance band instead of guessing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Positive,
    NotPositive,
    Inconclusive,
}

/// Minimum value backing a verdict: exact on the diagonal path, float on
/// the dense path.
#[derive(Debug, Clone, PartialEq)]
pub enum MinValue {
    Exact(Q),
    Float(f64),
}

impl MinValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            MinValue::Exact(q) => q_to_f64(q),
            MinValue::Float(f) => *f,
        }
    }
}

/// Outcome of a single-size threshold query.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdVerdict {
    pub decision: Decision,
    /// Basis-word witness on the diagonal path; present iff not positive.
    pub witness: Option<Word>,
    /// Eigenvector witness on the dense path; present iff not positive.
    pub eigvec_witness: Option<Vec<f64>>,
    pub min_value: MinValue,
    pub n: usize,
    /// Dense path only: the operator was visibly non-symmetric and the
    /// spectrum refers to its symmetrization.
    pub non_normal: bool,
}

impl ThresholdVerdict {
    pub fn is_positive(&self) -> bool {
        self.decision == Decision::Positive
    }

    /// Distance `|min + lambda|` between the spectrum edge and the allowed
    /// threshold.
    pub fn margin(&self, lambda: &Q) -> f64 {
        (self.min_value.to_f64() + q_to_f64(lambda)).abs()
    }
}

/// Tolerance band half-width for float-path verdicts.
pub fn float_band(lambda: &Q) -> f64 {
    1e-9 * (1.0 + q_to_f64(lambda).abs())
}

impl MpoInstance {
    /// Threshold query at one system size: is `rho + lambda*1 >= 0`?
    ///
    /// Diagonal MPOs get an exact verdict by enumeration; everything else is
    /// assembled densely, symmetrized, and judged with a tolerance band of
    /// `1e-9 * (1 + |lambda|)` around the threshold.
    pub fn threshold_check(&self, n: usize, lambda: &Q) -> Result<ThresholdVerdict, MpoError> {
        self.threshold_check_with(n, lambda, DEFAULT_ENUM_BUDGET, DEFAULT_DENSE_CAP, false)
    }

    /// [`MpoInstance::threshold_check`] with explicit budgets; `force_dense`
    /// routes diagonal operators through the float path too.
    pub fn threshold_check_with(
        &self,
        n: usize,
        lambda: &Q,
        enum_budget: usize,
        dense_cap: usize,
        force_dense: bool,
    ) -> Result<ThresholdVerdict, MpoError> {
        if self.diagonal && !force_dense {
            let (min, wit) = self.min_diagonal(n, enum_budget)?;
            let neg_lambda = -lambda.clone();
            let not_positive = min < neg_lambda;
            Ok(ThresholdVerdict {
                decision: if not_positive {
                    Decision::NotPositive
                } else {
                    Decision::Positive
                },
                witness: not_positive.then_some(wit),
                eigvec_witness: None,
                min_value: MinValue::Exact(min),
                n,
                non_normal: false,
            })
        } else {
            let min = self.min_eigenvalue(n, dense_cap)?;
            let defect = self.asymmetry_defect(n, dense_cap)?;
            let non_normal = defect > 1e-12;
            let band = float_band(lambda);
            let thr = -q_to_f64(lambda);
            let decision = if min < thr - band {
                Decision::NotPositive
            } else if min > thr + band {
                Decision::Positive
            } else {
                Decision::Inconclusive
            };
            let eigvec_witness = if decision == Decision::NotPositive {
                let rho = self.dense_assemble_f64(n, dense_cap)?;
                let sym = (&rho + rho.transpose()) * 0.5;
                let eig = nalgebra::SymmetricEigen::new(sym);
                let (idx, _) = eig
                    .eigenvalues
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap();
                Some(eig.eigenvectors.column(idx).iter().cloned().collect())
            } else {
                None
            };
            Ok(ThresholdVerdict {
                decision,
                witness: None,
                eigvec_witness,
                min_value: MinValue::Float(min),
                n,
                non_normal,
            })
        }
    }

    /// Scan system sizes `1..=n_max` for the first threshold violation.
    /// An empty result means "no violation found up to n_max", which is not
    /// a claim about larger sizes.
    pub fn threshold_search(&self, lambda: &Q, n_max: usize) -> Result<SearchOutcome, MpoError> {
        self.threshold_search_with(lambda, n_max, DEFAULT_ENUM_BUDGET, DEFAULT_DENSE_CAP)
    }

    /// [`MpoInstance::threshold_search`] with explicit budgets.
    pub fn threshold_search_with(
        &self,
        lambda: &Q,
        n_max: usize,
        enum_budget: usize,
        dense_cap: usize,
    ) -> Result<SearchOutcome, MpoError> {
        let mut inconclusive = Vec::new();
        for n in 1..=n_max {
            let verdict = self.threshold_check_with(n, lambda, enum_budget, dense_cap, false)?;
            match verdict.decision {
                Decision::NotPositive => {
                    return Ok(SearchOutcome {
                        violation: Some(verdict),
                        inconclusive_sizes: inconclusive,
                        n_max,
                    })
                }
                Decision::Inconclusive => inconclusive.push(n),
                Decision::Positive => {}
            }
        }
        Ok(SearchOutcome {
            violation: None,
            inconclusive_sizes: inconclusive,
            n_max,
        })
    }
}

/// Result of scanning sizes for a violation.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub violation: Option<ThresholdVerdict>,
    /// Sizes where the float path could not decide.
    pub inconclusive_sizes: Vec<usize>,
    pub n_max: usize,
}
