//! Hidden Markov model evaluation, Hankel blocks, and quasi-realization
//! synthesis.
//!
//! A model assigns probabilities to outcome sequences through a boundary
//! contracted matrix product,
//!
//! ```text
//! prob(w) = p . M^(w_1) M^(w_2) ... M^(w_n) . 1
//! ```
//!
//! with nonnegative transition matrices whose sum is row stochastic. Hankel
//! blocks tabulate these probabilities split into prefix and suffix, and a
//! rank-revealing decomposition of small blocks recovers a quasi-realization:
//! a model of the same product form whose matrices may have negative entries
//! but which reproduces the sequence probabilities.
//!
//! This path is floating point, with tolerances pinned as module constants;
//! [`ExactHmm`] offers an exact-rational variant for rank questions on
//! rational inputs.

use crate::exact::{Q, QMatrix};
use crate::words::{for_each_word, Word};
use nalgebra::{DMatrix, DVector};
use num::{One, Zero};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Tolerance for validating stochasticity constraints on input models.
pub const VALIDATION_TOL: f64 = 1e-9;
/// Tolerance for the stationarity test.
pub const STATIONARY_TOL: f64 = 1e-12;
/// Relative singular value threshold defining numerical rank.
pub const RANK_REL_TOL: f64 = 1e-10;
/// Agreement required of duplicate probabilities when merging blocks.
pub const MERGE_TOL: f64 = 1e-9;
/// Agreement required of adjacent-length marginals when merging blocks.
pub const MARGINAL_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum HmmError {
    #[error("transition matrix {alpha} entry ({i},{j}) is negative: {value}")]
    NegativeEntry {
        alpha: usize,
        i: usize,
        j: usize,
        value: f64,
    },
    #[error("summed kernel row {i} sums to {sum}, expected 1")]
    RowSum { i: usize, sum: f64 },
    #[error("initial distribution invalid: {reason}")]
    BadInitial { reason: String },
    #[error("Hankel block of {rows} x {cols} entries exceeds cap {cap}")]
    CapExceeded { rows: usize, cols: usize, cap: usize },
    #[error("letter {letter} outside outcome range 1..={d}")]
    Letter { letter: usize, d: usize },
    #[error("inconsistent block family: {reason}")]
    Inconsistent { reason: String },
    #[error("inconsistent shapes: {0}")]
    Shape(String),
}

/// Default cap on Hankel block entries.
pub const DEFAULT_HANKEL_CAP: usize = 1 << 22;

/// A hidden Markov model in matrix product form.
#[derive(Debug, Clone, PartialEq)]
pub struct Hmm {
    transitions: Vec<DMatrix<f64>>,
    initial: Vec<f64>,
}

impl Hmm {
    /// Validates nonnegativity of every transition entry, row stochasticity
    /// of the summed kernel, and that the initial vector is a probability
    /// distribution, all within [`VALIDATION_TOL`].
    pub fn new(transitions: Vec<DMatrix<f64>>, initial: Vec<f64>) -> Result<Self, HmmError> {
        if transitions.is_empty() {
            return Err(HmmError::Shape("no transition matrices".into()));
        }
        let bond = transitions[0].nrows();
        for (alpha, m) in transitions.iter().enumerate() {
            if m.nrows() != bond || m.ncols() != bond {
                return Err(HmmError::Shape(
                    "transition matrices must be square and equal sized".into(),
                ));
            }
            for i in 0..bond {
                for j in 0..bond {
                    let value = m[(i, j)];
                    if value < -VALIDATION_TOL || !value.is_finite() {
                        return Err(HmmError::NegativeEntry { alpha: alpha + 1, i, j, value });
                    }
                }
            }
        }
        for i in 0..bond {
            let sum: f64 = transitions.iter().map(|m| m.row(i).sum()).sum();
            if (sum - 1.0).abs() > VALIDATION_TOL {
                return Err(HmmError::RowSum { i, sum });
            }
        }
        if initial.len() != bond {
            return Err(HmmError::Shape(format!(
                "initial vector must have length {bond}"
            )));
        }
        if initial.iter().any(|&x| x < -VALIDATION_TOL || !x.is_finite()) {
            return Err(HmmError::BadInitial {
                reason: "negative entry".into(),
            });
        }
        let total: f64 = initial.iter().sum();
        if (total - 1.0).abs() > VALIDATION_TOL {
            return Err(HmmError::BadInitial {
                reason: format!("entries sum to {total}"),
            });
        }
        Ok(Hmm {
            transitions,
            initial,
        })
    }

    /// Uniform i.i.d. process on `d` outcomes at bond dimension 1.
    pub fn uniform_iid(d: usize) -> Self {
        let transitions = (0..d)
            .map(|_| DMatrix::from_element(1, 1, 1.0 / d as f64))
            .collect();
        Hmm::new(transitions, vec![1.0]).unwrap()
    }

    pub fn bond_dim(&self) -> usize {
        self.transitions[0].nrows()
    }

    pub fn outcome_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn transition(&self, alpha: usize) -> &DMatrix<f64> {
        &self.transitions[alpha - 1]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Sequence probability by the boundary contracted matrix product.
    pub fn prob(&self, w: &Word) -> Result<f64, HmmError> {
        contract(&self.transitions, &self.initial, None, w)
    }

    /// True iff the initial vector is invariant under the summed kernel,
    /// within [`STATIONARY_TOL`]: `p . sum_alpha M^(alpha) = p`.
    pub fn is_stationary(&self) -> bool {
        let bond = self.bond_dim();
        let mut mapped = vec![0.0; bond];
        for m in &self.transitions {
            for i in 0..bond {
                for j in 0..bond {
                    mapped[j] += self.initial[i] * m[(i, j)];
                }
            }
        }
        mapped
            .iter()
            .zip(&self.initial)
            .all(|(a, b)| (a - b).abs() <= STATIONARY_TOL)
    }

    /// Hankel block of prefix length `k` and suffix length `n`: entry
    /// `(u, v)` is `prob(uv)`, rows and columns in length-lex order.
    pub fn hankel(&self, k: usize, n: usize, cap: usize) -> Result<HankelBlock, HmmError> {
        hankel_from(
            self.outcome_count(),
            |w| self.prob(w).expect("letters in range"),
            k,
            n,
            cap,
        )
    }
}

fn contract(
    transitions: &[DMatrix<f64>],
    left: &[f64],
    right: Option<&[f64]>,
    w: &Word,
) -> Result<f64, HmmError> {
    let d = transitions.len();
    let bond = transitions[0].nrows();
    let mut row = DVector::from_column_slice(left).transpose();
    for &l in w.letters() {
        if l == 0 || l > d {
            return Err(HmmError::Letter { letter: l, d });
        }
        row *= &transitions[l - 1];
    }
    Ok(match right {
        Some(r) => (0..bond).map(|j| row[j] * r[j]).sum(),
        None => row.sum(),
    })
}

fn hankel_from(
    d: usize,
    prob: impl Fn(&Word) -> f64 + Sync,
    k: usize,
    n: usize,
    cap: usize,
) -> Result<HankelBlock, HmmError> {
    let rows = d.checked_pow(k as u32).filter(|&r| r <= cap);
    let cols = d.checked_pow(n as u32).filter(|&c| c <= cap);
    let (rows, cols) = match (rows, cols) {
        (Some(r), Some(c)) if r.checked_mul(c).is_some_and(|t| t <= cap) => (r, c),
        _ => {
            return Err(HmmError::CapExceeded {
                rows: d.pow(k as u32),
                cols: d.pow(n as u32),
                cap,
            })
        }
    };
    let mut prefixes = Vec::with_capacity(rows);
    for_each_word(d, k, |w| prefixes.push(w.clone()));
    let mut suffixes = Vec::with_capacity(cols);
    for_each_word(d, n, |w| suffixes.push(w.clone()));
    let data: Vec<Vec<f64>> = prefixes
        .par_iter()
        .map(|u| suffixes.iter().map(|v| prob(&u.concat(v))).collect())
        .collect();
    let matrix = DMatrix::from_fn(rows, cols, |i, j| data[i][j]);
    Ok(HankelBlock { k, n, matrix })
}

/// A prefix-suffix probability table of shape `d^k x d^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelBlock {
    pub k: usize,
    pub n: usize,
    pub matrix: DMatrix<f64>,
}

impl HankelBlock {
    /// Numerical rank: singular values above [`RANK_REL_TOL`] times the
    /// largest one.
    pub fn numerical_rank(&self) -> usize {
        numerical_rank(&self.matrix)
    }

    /// CSV rendering, one row per prefix, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.matrix.nrows() {
            let row: Vec<String> = (0..self.matrix.ncols())
                .map(|j| format!("{:.17e}", self.matrix[(i, j)]))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_REL_TOL * max).count()
}

/// Merged probability table for all sequence lengths up to `t`, assembled
/// from Hankel blocks or directly from a model.
#[derive(Debug, Clone)]
pub struct HankelFamily {
    d: usize,
    t: usize,
    /// `probs[len]` holds `d^len` values in lex order.
    probs: Vec<Vec<f64>>,
}

impl HankelFamily {
    /// Merge blocks into one table covering every total length they span.
    ///
    /// Fails if two blocks disagree on a shared sequence (beyond
    /// [`MERGE_TOL`]), if some length up to the maximum is not covered, or
    /// if adjacent lengths violate the suffix marginal
    /// `sum_alpha prob(w alpha) = prob(w)` beyond [`MARGINAL_TOL`]. A
    /// missing length-0 entry defaults to probability one, the empty
    /// sequence convention.
    pub fn from_blocks(d: usize, blocks: &[HankelBlock]) -> Result<Self, HmmError> {
        if d == 0 {
            return Err(HmmError::Shape("outcome count must be positive".into()));
        }
        let t = blocks.iter().map(|b| b.k + b.n).max().unwrap_or(0);
        let mut probs: Vec<Vec<Option<f64>>> = (0..=t)
            .map(|len| vec![None; d.pow(len as u32)])
            .collect();
        for block in blocks {
            let len = block.k + block.n;
            let cols = d.pow(block.n as u32);
            for i in 0..block.matrix.nrows() {
                for j in 0..block.matrix.ncols() {
                    let value = block.matrix[(i, j)];
                    let idx = i * cols + j;
                    match probs[len][idx] {
                        None => probs[len][idx] = Some(value),
                        Some(prev) if (prev - value).abs() <= MERGE_TOL => {}
                        Some(prev) => {
                            return Err(HmmError::Inconsistent {
                                reason: format!(
                                    "length-{len} sequence {idx} appears as {prev} and {value}"
                                ),
                            })
                        }
                    }
                }
            }
        }
        if t > 0 && probs[0][0].is_none() {
            probs[0][0] = Some(1.0);
        }
        let probs: Vec<Vec<f64>> = probs
            .into_iter()
            .enumerate()
            .map(|(len, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(idx, v)| {
                        v.ok_or(HmmError::Inconsistent {
                            reason: format!("length-{len} sequence {idx} not covered"),
                        })
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        for len in 0..t {
            for idx in 0..probs[len].len() {
                let marginal: f64 = (0..d).map(|a| probs[len + 1][idx * d + a]).sum();
                if (marginal - probs[len][idx]).abs() > MARGINAL_TOL {
                    return Err(HmmError::Inconsistent {
                        reason: format!(
                            "length-{len} sequence {idx}: marginal {marginal} vs {}",
                            probs[len][idx]
                        ),
                    });
                }
            }
        }
        Ok(HankelFamily { d, t, probs })
    }

    /// Direct tabulation of a model up to length `t`.
    pub fn from_hmm(h: &Hmm, t: usize) -> Result<Self, HmmError> {
        let d = h.outcome_count();
        let mut probs = Vec::with_capacity(t + 1);
        for len in 0..=t {
            let mut row = Vec::with_capacity(d.pow(len as u32));
            for_each_word(d, len, |w| row.push(h.prob(w).expect("letters in range")));
            probs.push(row);
        }
        Ok(HankelFamily { d, t, probs })
    }

    pub fn outcome_count(&self) -> usize {
        self.d
    }

    pub fn max_len(&self) -> usize {
        self.t
    }

    pub fn prob(&self, w: &Word) -> Result<f64, HmmError> {
        if w.len() > self.t {
            return Err(HmmError::Shape(format!(
                "length {} beyond table maximum {}",
                w.len(),
                self.t
            )));
        }
        let mut idx = 0usize;
        for &l in w.letters() {
            if l == 0 || l > self.d {
                return Err(HmmError::Letter { letter: l, d: self.d });
            }
            idx = idx * self.d + (l - 1);
        }
        Ok(self.probs[w.len()][idx])
    }
}

/// A matrix product probability model with unconstrained real tensors and
/// explicit boundary vectors. Shape rules match [`Hmm`] but no positivity
/// or normalization is imposed.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiRealization {
    transitions: Vec<DMatrix<f64>>,
    left: Vec<f64>,
    right: Vec<f64>,
    /// Absolute singular value threshold that defined the bond dimension
    /// during synthesis, recorded for reproducibility.
    pub rank_tolerance: f64,
}

impl QuasiRealization {
    pub fn new(
        transitions: Vec<DMatrix<f64>>,
        left: Vec<f64>,
        right: Vec<f64>,
    ) -> Result<Self, HmmError> {
        if transitions.is_empty() {
            return Err(HmmError::Shape("no transition matrices".into()));
        }
        let bond = transitions[0].nrows();
        for m in &transitions {
            if m.nrows() != bond || m.ncols() != bond {
                return Err(HmmError::Shape(
                    "transition matrices must be square and equal sized".into(),
                ));
            }
        }
        if left.len() != bond || right.len() != bond {
            return Err(HmmError::Shape(format!(
                "boundary vectors must have length {bond}"
            )));
        }
        Ok(QuasiRealization {
            transitions,
            left,
            right,
            rank_tolerance: 0.0,
        })
    }

    pub fn bond_dim(&self) -> usize {
        self.transitions[0].nrows()
    }

    pub fn outcome_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn transition(&self, alpha: usize) -> &DMatrix<f64> {
        &self.transitions[alpha - 1]
    }

    pub fn left(&self) -> &[f64] {
        &self.left
    }

    pub fn right(&self) -> &[f64] {
        &self.right
    }

    pub fn prob(&self, w: &Word) -> Result<f64, HmmError> {
        contract(&self.transitions, &self.left, Some(&self.right), w)
    }

    /// True iff some transition or boundary entry is negative; a
    /// quasi-realization with none could be renormalized into a model.
    pub fn has_negative_entries(&self) -> bool {
        self.transitions
            .iter()
            .any(|m| m.iter().any(|&x| x < 0.0))
            || self.left.iter().any(|&x| x < 0.0)
            || self.right.iter().any(|&x| x < 0.0)
    }
}

/// Words of length at most `k` in length-lex order; the empty word is
/// index 0.
fn short_words(d: usize, k: usize) -> Vec<Word> {
    let mut out = Vec::new();
    for len in 0..=k {
        for_each_word(d, len, |w| out.push(w.clone()));
    }
    out
}

/// Synthesize a quasi-realization from a probability table.
///
/// The table is arranged as a single prefix-suffix matrix over all words of
/// length at most `K = min(3, (t-1)/2)`, factored through its numerical
/// rank `r`, and the shifted matrices are projected through the factors:
///
/// ```text
/// H = F G,    M^(alpha) = F^+ H_alpha G^+,
/// left = row of F at the empty prefix,    right = column of G at the
/// empty suffix.
/// ```
///
/// When the table comes from a bond dimension D model whose rank is already
/// realized on these short words, the output has bond dimension at most D
/// and reproduces every tabulated probability.
pub fn quasi_realize(family: &HankelFamily) -> Result<QuasiRealization, HmmError> {
    let d = family.outcome_count();
    let t = family.max_len();
    let k = (t.saturating_sub(1) / 2).min(3);
    let basis = short_words(d, k);
    let m = basis.len();
    let mut h = DMatrix::zeros(m, m);
    for (i, u) in basis.iter().enumerate() {
        for (j, v) in basis.iter().enumerate() {
            h[(i, j)] = family.prob(&u.concat(v))?;
        }
    }
    let svd = h.svd(true, true);
    let u = svd.u.as_ref().expect("requested");
    let v_t = svd.v_t.as_ref().expect("requested");
    let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let abs_tol = RANK_REL_TOL * max_sv;
    let r = svd
        .singular_values
        .iter()
        .filter(|&&s| s > abs_tol)
        .count()
        .max(1);

    // F = U_r S_r and G = V_r^T give H = F G; the pseudo-inverses reduce to
    // F^+ = S_r^-1 U_r^T and G^+ = V_r.
    let u_r = u.columns(0, r);
    let v_r = v_t.rows(0, r).transpose();
    let inv_s: Vec<f64> = (0..r).map(|i| 1.0 / svd.singular_values[i]).collect();

    let mut transitions = Vec::with_capacity(d);
    for alpha in 1..=d {
        let mut h_alpha = DMatrix::zeros(m, m);
        for (i, u_word) in basis.iter().enumerate() {
            for (j, v_word) in basis.iter().enumerate() {
                let mut w = u_word.clone();
                w.push(alpha);
                h_alpha[(i, j)] = family.prob(&w.concat(v_word))?;
            }
        }
        let mut proj = u_r.transpose() * h_alpha * &v_r;
        for i in 0..r {
            for j in 0..r {
                proj[(i, j)] *= inv_s[i];
            }
        }
        transitions.push(proj);
    }

    // Empty word sits at index 0 of the basis.
    let left: Vec<f64> = (0..r).map(|j| u_r[(0, j)] * svd.singular_values[j]).collect();
    let right: Vec<f64> = (0..r).map(|i| v_r[(0, i)]).collect();
    let mut out = QuasiRealization::new(transitions, left, right)?;
    out.rank_tolerance = abs_tol;
    Ok(out)
}

/// Exact-rational model for rank questions: same shape constraints as
/// [`Hmm`] but validated and evaluated without rounding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactHmm {
    transitions: Vec<QMatrix>,
    initial: Vec<Q>,
}

impl ExactHmm {
    pub fn new(transitions: Vec<QMatrix>, initial: Vec<Q>) -> Result<Self, HmmError> {
        if transitions.is_empty() {
            return Err(HmmError::Shape("no transition matrices".into()));
        }
        let bond = transitions[0].nrows();
        for (alpha, m) in transitions.iter().enumerate() {
            if m.nrows() != bond || m.ncols() != bond {
                return Err(HmmError::Shape(
                    "transition matrices must be square and equal sized".into(),
                ));
            }
            for i in 0..bond {
                for j in 0..bond {
                    if m[(i, j)] < Q::zero() {
                        return Err(HmmError::NegativeEntry {
                            alpha: alpha + 1,
                            i,
                            j,
                            value: crate::exact::q_to_f64(&m[(i, j)]),
                        });
                    }
                }
            }
        }
        for i in 0..bond {
            let mut sum = Q::zero();
            for m in &transitions {
                for j in 0..bond {
                    sum += m[(i, j)].clone();
                }
            }
            if !sum.is_one() {
                return Err(HmmError::RowSum {
                    i,
                    sum: crate::exact::q_to_f64(&sum),
                });
            }
        }
        if initial.len() != bond {
            return Err(HmmError::Shape(format!(
                "initial vector must have length {bond}"
            )));
        }
        if initial.iter().any(|x| x < &Q::zero()) {
            return Err(HmmError::BadInitial {
                reason: "negative entry".into(),
            });
        }
        let total: Q = initial.iter().cloned().sum();
        if !total.is_one() {
            return Err(HmmError::BadInitial {
                reason: format!("entries sum to {total}"),
            });
        }
        Ok(ExactHmm {
            transitions,
            initial,
        })
    }

    pub fn bond_dim(&self) -> usize {
        self.transitions[0].nrows()
    }

    pub fn outcome_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn prob(&self, w: &Word) -> Result<Q, HmmError> {
        let d = self.outcome_count();
        let mut row = self.initial.clone();
        for &l in w.letters() {
            if l == 0 || l > d {
                return Err(HmmError::Letter { letter: l, d });
            }
            row = crate::exact::row_mul(&row, &self.transitions[l - 1]);
        }
        Ok(row.into_iter().sum())
    }

    /// Exact rank of the `(k, n)` Hankel block by Gaussian elimination.
    pub fn hankel_rank_exact(&self, k: usize, n: usize, cap: usize) -> Result<usize, HmmError> {
        let d = self.outcome_count();
        let rows = d.checked_pow(k as u32).filter(|&r| r <= cap);
        let cols = d.checked_pow(n as u32).filter(|&c| c <= cap);
        let (rows, cols) = match (rows, cols) {
            (Some(r), Some(c)) if r.checked_mul(c).is_some_and(|t| t <= cap) => (r, c),
            _ => {
                return Err(HmmError::CapExceeded {
                    rows: d.pow(k as u32),
                    cols: d.pow(n as u32),
                    cap,
                })
            }
        };
        let mut prefixes = Vec::with_capacity(rows);
        for_each_word(d, k, |w| prefixes.push(w.clone()));
        let mut suffixes = Vec::with_capacity(cols);
        for_each_word(d, n, |w| suffixes.push(w.clone()));
        let mut h = QMatrix::zeros(rows, cols);
        for (i, u) in prefixes.iter().enumerate() {
            for (j, v) in suffixes.iter().enumerate() {
                h[(i, j)] = self.prob(&u.concat(v))?;
            }
        }
        Ok(h.rank())
    }
}

/// Random model at the given dimensions: entries drawn uniformly and each
/// row of the stacked kernel normalized, initial vector likewise.
pub fn random_hmm(rng: &mut impl Rng, bond: usize, outcomes: usize) -> Hmm {
    assert!(bond >= 1 && outcomes >= 1);
    let mut transitions: Vec<DMatrix<f64>> = (0..outcomes)
        .map(|_| DMatrix::from_fn(bond, bond, |_, _| rng.random::<f64>()))
        .collect();
    for i in 0..bond {
        let sum: f64 = transitions.iter().map(|m| m.row(i).sum()).sum();
        for m in transitions.iter_mut() {
            for j in 0..bond {
                m[(i, j)] /= sum;
            }
        }
    }
    let mut initial: Vec<f64> = (0..bond).map(|_| rng.random::<f64>()).collect();
    let total: f64 = initial.iter().sum();
    initial.iter_mut().for_each(|x| *x /= total);
    Hmm::new(transitions, initial).expect("normalized by construction")
}
