//! Verifiers for nonnegative and positive semidefinite matrix
//! factorizations, plus a small-scale rank oracle.
//!
//! The stance throughout is verification, not search: callers supply a
//! candidate factorization and get back an accept/reject with the residual.
//! Finding a nonnegative factorization is NP-hard, so the only search
//! offered is an exhaustive scan over a coarse rational grid, hard-capped
//! to toy sizes, whose negative answer means "not found on this grid" and
//! nothing more.

use crate::exact::{q_from_f64, q_int, q_ratio, Q, QMatrix};
use nalgebra::DMatrix;
use num::{Signed, Zero};
use thiserror::Error;

/// Max-norm tolerance for the factorization residuals.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Slack allowed on factor entries that should be nonnegative.
pub const FACTOR_TOL: f64 = 1e-12;
/// Eigenvalue slack for the semidefiniteness checks.
pub const PSD_TOL: f64 = 1e-10;
/// Hard cap on matrix side length for the rank oracle.
pub const RANK_DIM_CAP: usize = 4;
/// Hard cap on the target rank for the rank oracle.
pub const RANK_D_CAP: usize = 3;
/// Candidate budget for the grid search.
pub const GRID_BUDGET: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum FactorError {
    #[error("matrix entry ({row},{col}) = {value} is negative")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("input too large for the rank oracle: {0}")]
    CapExceeded(String),
}

/// Accept/reject answer together with the achieved residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOutcome {
    pub accepted: bool,
    /// Max-norm deviation of the candidate reconstruction from `F`.
    pub residual: f64,
}

fn require_nonnegative(f: &DMatrix<f64>) -> Result<(), FactorError> {
    for row in 0..f.nrows() {
        for col in 0..f.ncols() {
            if f[(row, col)] < 0.0 {
                return Err(FactorError::NegativeEntry {
                    row,
                    col,
                    value: f[(row, col)],
                });
            }
        }
    }
    Ok(())
}

/// A claimed nonnegative factorization `F = sum_j L_j R_j^T`.
#[derive(Debug, Clone)]
pub struct NmfCandidate {
    f: DMatrix<f64>,
    factors: Vec<(Vec<f64>, Vec<f64>)>,
}

impl NmfCandidate {
    pub fn new(
        f: DMatrix<f64>,
        factors: Vec<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self, FactorError> {
        require_nonnegative(&f)?;
        for (j, (l, r)) in factors.iter().enumerate() {
            if l.len() != f.nrows() || r.len() != f.ncols() {
                return Err(FactorError::Shape(format!(
                    "term {j} has lengths ({}, {}), expected ({}, {})",
                    l.len(),
                    r.len(),
                    f.nrows(),
                    f.ncols()
                )));
            }
        }
        Ok(NmfCandidate { f, factors })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn rank_bound(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.factors
    }
}

/// Check a nonnegative factorization: reconstruction within the residual
/// tolerance and all factor entries nonnegative up to [`FACTOR_TOL`].
pub fn verify_nmf(c: &NmfCandidate) -> VerifyOutcome {
    let mut residual = 0.0f64;
    for row in 0..c.f.nrows() {
        for col in 0..c.f.ncols() {
            let mut acc = 0.0;
            for (l, r) in &c.factors {
                acc += l[row] * r[col];
            }
            residual = residual.max((acc - c.f[(row, col)]).abs());
        }
    }
    let entries_ok = c
        .factors
        .iter()
        .flat_map(|(l, r)| l.iter().chain(r.iter()))
        .all(|&x| x >= -FACTOR_TOL);
    VerifyOutcome {
        accepted: residual <= RESIDUAL_TOL && entries_ok,
        residual,
    }
}

/// A claimed positive semidefinite factorization
/// `F[alpha, beta] = Tr(A_alpha B_beta)`.
#[derive(Debug, Clone)]
pub struct PsdCandidate {
    f: DMatrix<f64>,
    a_family: Vec<DMatrix<f64>>,
    b_family: Vec<DMatrix<f64>>,
}

impl PsdCandidate {
    pub fn new(
        f: DMatrix<f64>,
        a_family: Vec<DMatrix<f64>>,
        b_family: Vec<DMatrix<f64>>,
    ) -> Result<Self, FactorError> {
        require_nonnegative(&f)?;
        if a_family.len() != f.nrows() || b_family.len() != f.ncols() {
            return Err(FactorError::Shape(format!(
                "family sizes ({}, {}) do not match matrix shape ({}, {})",
                a_family.len(),
                b_family.len(),
                f.nrows(),
                f.ncols()
            )));
        }
        let dim = a_family
            .first()
            .or(b_family.first())
            .map(|m| m.nrows())
            .unwrap_or(0);
        for m in a_family.iter().chain(b_family.iter()) {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(FactorError::Shape(format!(
                    "family member is {}x{}, expected {dim}x{dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(PsdCandidate {
            f,
            a_family,
            b_family,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn psd_dim(&self) -> usize {
        self.a_family.first().map(|m| m.nrows()).unwrap_or(0)
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Check a PSD factorization: the trace identity within the residual
/// tolerance and every family member semidefinite up to [`PSD_TOL`].
pub fn verify_psd(c: &PsdCandidate) -> VerifyOutcome {
    let mut residual = 0.0f64;
    for alpha in 0..c.f.nrows() {
        for beta in 0..c.f.ncols() {
            let trace = (&c.a_family[alpha] * &c.b_family[beta]).trace();
            residual = residual.max((trace - c.f[(alpha, beta)]).abs());
        }
    }
    let psd_ok = c
        .a_family
        .iter()
        .chain(c.b_family.iter())
        .all(|m| min_eigenvalue(m) >= -PSD_TOL);
    VerifyOutcome {
        accepted: residual <= RESIDUAL_TOL && psd_ok,
        residual,
    }
}

/// Diagonal embedding of a nonnegative factorization as a PSD one: the
/// j-th entries of the left and right factors become the j-th diagonal
/// entries of `A_alpha` and `B_beta`.
pub fn embed_nmf(c: &NmfCandidate) -> PsdCandidate {
    let rank = c.factors.len();
    let a_family = (0..c.f.nrows())
        .map(|alpha| {
            DMatrix::from_fn(rank, rank, |i, j| {
                if i == j {
                    c.factors[i].0[alpha]
                } else {
                    0.0
                }
            })
        })
        .collect();
    let b_family = (0..c.f.ncols())
        .map(|beta| {
            DMatrix::from_fn(rank, rank, |i, j| {
                if i == j {
                    c.factors[i].1[beta]
                } else {
                    0.0
                }
            })
        })
        .collect();
    PsdCandidate {
        f: c.f.clone(),
        a_family,
        b_family,
    }
}

/// Search mode for [`rank_oracle`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankMode {
    /// Ordinary rank via exact rational elimination; a definite answer.
    Plain,
    /// Nonnegative rank on a coarse grid; `false` only means "not found on
    /// the grid", never a proof of nonexistence.
    Nonnegative,
}

/// Grid values used for the left factors in nonnegative mode.
fn grid_values() -> Vec<Q> {
    vec![q_int(0), q_ratio(1, 2), q_int(1), q_int(2)]
}

fn lift(f: &DMatrix<f64>) -> QMatrix {
    QMatrix::from_fn(f.nrows(), f.ncols(), |i, j| {
        q_from_f64(f[(i, j)]).expect("finite entry")
    })
}

/// Solve `l x = target` exactly; free variables are set to zero. Returns
/// `None` if the system is inconsistent.
fn solve_exact(l: &QMatrix, target: &[Q]) -> Option<Vec<Q>> {
    let rows = l.nrows();
    let cols = l.ncols();
    let mut aug = QMatrix::zeros(rows, cols + 1);
    for i in 0..rows {
        for j in 0..cols {
            aug[(i, j)] = l[(i, j)].clone();
        }
        aug[(i, cols)] = target[i].clone();
    }
    let mut pivot_cols = Vec::new();
    let mut pivot_row = 0usize;
    for col in 0..cols {
        let Some(src) = (pivot_row..rows).find(|&r| !aug[(r, col)].is_zero()) else {
            continue;
        };
        aug.swap_rows(pivot_row, src);
        let inv = aug[(pivot_row, col)].clone();
        for j in col..=cols {
            let v = aug[(pivot_row, j)].clone() / inv.clone();
            aug[(pivot_row, j)] = v;
        }
        for r in 0..rows {
            if r == pivot_row || aug[(r, col)].is_zero() {
                continue;
            }
            let factor = aug[(r, col)].clone();
            for j in col..=cols {
                let v = aug[(r, j)].clone() - factor.clone() * aug[(pivot_row, j)].clone();
                aug[(r, j)] = v;
            }
        }
        pivot_cols.push(col);
        pivot_row += 1;
        if pivot_row == rows {
            break;
        }
    }
    for r in pivot_row..rows {
        if !aug[(r, cols)].is_zero() {
            return None;
        }
    }
    let mut x = vec![Q::zero(); cols];
    for (row, &col) in pivot_cols.iter().enumerate() {
        x[col] = aug[(row, cols)].clone();
    }
    Some(x)
}

/// Does `F` admit a factorization of inner dimension at most `target`?
///
/// Plain mode decides the question exactly. Nonnegative mode enumerates
/// left factors over a small rational grid and solves for exact nonnegative
/// right factors; a `true` is a certificate, a `false` is only the absence
/// of a grid witness. Inputs beyond the hard caps are refused.
pub fn rank_oracle(
    f: &DMatrix<f64>,
    mode: RankMode,
    target: usize,
) -> Result<bool, FactorError> {
    if f.nrows() > RANK_DIM_CAP || f.ncols() > RANK_DIM_CAP {
        return Err(FactorError::CapExceeded(format!(
            "matrix is {}x{}, cap is {RANK_DIM_CAP}x{RANK_DIM_CAP}",
            f.nrows(),
            f.ncols()
        )));
    }
    if target > RANK_D_CAP {
        return Err(FactorError::CapExceeded(format!(
            "target rank {target}, cap is {RANK_D_CAP}"
        )));
    }
    let exact = lift(f);
    match mode {
        RankMode::Plain => Ok(exact.rank() <= target),
        RankMode::Nonnegative => {
            require_nonnegative(f)?;
            if target == 0 {
                return Ok(f.iter().all(|&x| x == 0.0));
            }
            let grid = grid_values();
            let slots = f.nrows() * target;
            let mut total = 1usize;
            for _ in 0..slots {
                total = total
                    .checked_mul(grid.len())
                    .filter(|&v| v <= GRID_BUDGET)
                    .ok_or_else(|| {
                        FactorError::CapExceeded(format!(
                            "grid enumeration exceeds budget {GRID_BUDGET}"
                        ))
                    })?;
            }
            let targets: Vec<Vec<Q>> = (0..exact.ncols())
                .map(|col| (0..exact.nrows()).map(|row| exact[(row, col)].clone()).collect())
                .collect();
            let mut odometer = vec![0usize; slots];
            loop {
                let l = QMatrix::from_fn(f.nrows(), target, |i, j| {
                    grid[odometer[i * target + j]].clone()
                });
                let solved = targets.iter().all(|t| {
                    solve_exact(&l, t)
                        .map(|x| x.iter().all(|v| !v.is_negative()))
                        .unwrap_or(false)
                });
                if solved {
                    return Ok(true);
                }
                let mut pos = 0usize;
                loop {
                    if pos == slots {
                        return Ok(false);
                    }
                    odometer[pos] += 1;
                    if odometer[pos] < grid.len() {
                        break;
                    }
                    odometer[pos] = 0;
                    pos += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::{numerical_rank, random_hmm};
    use crate::words::Word;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_nmf_verifies() {
        let c = NmfCandidate::new(
            DMatrix::identity(2, 2),
            vec![
                (vec![1.0, 0.0], vec![1.0, 0.0]),
                (vec![0.0, 1.0], vec![0.0, 1.0]),
            ],
        )
        .unwrap();
        let out = verify_nmf(&c);
        assert!(out.accepted);
        assert_eq!(out.residual, 0.0);
    }

    #[test]
    fn negative_matrix_is_rejected_at_construction() {
        let mut f = DMatrix::identity(2, 2);
        f[(0, 1)] = -0.5;
        assert!(matches!(
            NmfCandidate::new(f, vec![]),
            Err(FactorError::NegativeEntry { .. })
        ));
    }

    #[test]
    fn negative_factor_entry_rejects_at_verification() {
        let c = NmfCandidate::new(
            DMatrix::from_row_slice(1, 1, &[1.0]),
            vec![(vec![-1.0], vec![-1.0])],
        )
        .unwrap();
        let out = verify_nmf(&c);
        assert!(!out.accepted);
        assert!(out.residual <= RESIDUAL_TOL);
    }

    #[test]
    fn two_step_hmm_distribution_splits_as_nmf() {
        // F[alpha, beta] = prob(alpha beta) factors through the hidden
        // state after the first step.
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let h = random_hmm(&mut rng, 3, 3);
        let d = h.outcome_count();
        let bond = h.bond_dim();
        let f = DMatrix::from_fn(d, d, |alpha, beta| {
            h.prob(&Word::from_letters(vec![alpha + 1, beta + 1])).unwrap()
        });
        let factors = (0..bond)
            .map(|i| {
                let l: Vec<f64> = (0..d)
                    .map(|alpha| {
                        (0..bond)
                            .map(|s| h.initial()[s] * h.transition(alpha + 1)[(s, i)])
                            .sum()
                    })
                    .collect();
                let r: Vec<f64> = (0..d)
                    .map(|beta| h.transition(beta + 1).row(i).sum())
                    .collect();
                (l, r)
            })
            .collect();
        let c = NmfCandidate::new(f, factors).unwrap();
        let out = verify_nmf(&c);
        assert!(out.accepted, "residual {}", out.residual);
    }

    #[test]
    fn scalar_psd_candidate_verifies() {
        let ones = DMatrix::from_element(2, 2, 1.0);
        let family = vec![DMatrix::from_element(1, 1, 1.0); 2];
        let c = PsdCandidate::new(ones, family.clone(), family).unwrap();
        let out = verify_psd(&c);
        assert!(out.accepted);
        assert_eq!(out.residual, 0.0);
    }

    #[test]
    fn indefinite_family_member_rejects() {
        let f = DMatrix::from_element(1, 1, 1.0);
        let a = vec![DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -1.0])];
        let b = vec![DMatrix::identity(2, 2) * 0.5];
        let c = PsdCandidate::new(f, a, b).unwrap();
        assert!(!verify_psd(&c).accepted);
    }

    fn random_nmf(rng: &mut impl Rng, rows: usize, cols: usize, rank: usize) -> NmfCandidate {
        let factors: Vec<(Vec<f64>, Vec<f64>)> = (0..rank)
            .map(|_| {
                let l = (0..rows).map(|_| rng.random::<f64>()).collect::<Vec<_>>();
                let r = (0..cols).map(|_| rng.random::<f64>()).collect::<Vec<_>>();
                (l, r)
            })
            .collect();
        let f = DMatrix::from_fn(rows, cols, |i, j| {
            factors.iter().map(|(l, r)| l[i] * r[j]).sum()
        });
        NmfCandidate::new(f, factors).unwrap()
    }

    #[test]
    fn diagonal_embedding_preserves_acceptance() {
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        for _ in 0..50 {
            let rows = rng.random_range(1..=4);
            let cols = rng.random_range(1..=4);
            let rank = rng.random_range(1..=3);
            let c = random_nmf(&mut rng, rows, cols, rank);
            assert!(verify_nmf(&c).accepted);
            let embedded = embed_nmf(&c);
            assert_eq!(embedded.psd_dim(), rank);
            let out = verify_psd(&embedded);
            assert!(out.accepted, "residual {}", out.residual);
        }
    }

    #[test]
    fn accepted_psd_candidates_have_nonnegative_trace_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(107);
        for _ in 0..20 {
            let dim = rng.random_range(1..=3);
            let make_family = |rng: &mut ChaCha8Rng, count: usize| {
                (0..count)
                    .map(|_| {
                        let g = DMatrix::from_fn(dim, dim, |_, _| rng.random::<f64>() - 0.5);
                        &g * g.transpose()
                    })
                    .collect::<Vec<_>>()
            };
            let a = make_family(&mut rng, 3);
            let b = make_family(&mut rng, 2);
            let f = DMatrix::from_fn(3, 2, |alpha, beta| (&a[alpha] * &b[beta]).trace());
            for entry in f.iter() {
                assert!(*entry >= -PSD_TOL);
            }
            let c = PsdCandidate::new(f, a, b).unwrap();
            assert!(verify_psd(&c).accepted);
        }
    }

    #[test]
    fn plain_rank_oracle_on_known_matrices() {
        let id3 = DMatrix::identity(3, 3);
        assert!(!rank_oracle(&id3, RankMode::Plain, 2).unwrap());
        assert!(rank_oracle(&id3, RankMode::Plain, 3).unwrap());
        let rank2 =
            DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0]);
        assert!(!rank_oracle(&rank2, RankMode::Plain, 1).unwrap());
        assert!(rank_oracle(&rank2, RankMode::Plain, 2).unwrap());
    }

    #[test]
    fn plain_rank_agrees_with_float_rank_on_random_rationals() {
        let mut rng = ChaCha8Rng::seed_from_u64(109);
        for _ in 0..20 {
            let f = DMatrix::from_fn(4, 4, |_, _| {
                // Entries k/8 with small k cover rank-deficient cases often
                // enough once products are taken.
                (rng.random_range(-4i64..=4) as f64) / 8.0
            });
            let numeric = numerical_rank(&f);
            for target in 0..=RANK_D_CAP {
                let plain = rank_oracle(&f, RankMode::Plain, target).unwrap();
                assert_eq!(plain, numeric <= target, "target {target}, rank {numeric}");
            }
        }
    }

    #[test]
    fn grid_oracle_finds_rank_one_all_ones() {
        let ones = DMatrix::from_element(3, 3, 1.0);
        assert!(rank_oracle(&ones, RankMode::Nonnegative, 1).unwrap());
    }

    #[test]
    fn grid_oracle_reports_absence_for_identity_at_rank_one() {
        let id2 = DMatrix::identity(2, 2);
        assert!(!rank_oracle(&id2, RankMode::Nonnegative, 1).unwrap());
        assert!(rank_oracle(&id2, RankMode::Nonnegative, 2).unwrap());
    }

    #[test]
    fn rank_oracle_enforces_caps() {
        let big = DMatrix::identity(5, 5);
        assert!(matches!(
            rank_oracle(&big, RankMode::Plain, 2),
            Err(FactorError::CapExceeded(_))
        ));
        let small = DMatrix::identity(2, 2);
        assert!(matches!(
            rank_oracle(&small, RankMode::Plain, 4),
            Err(FactorError::CapExceeded(_))
        ));
    }
}
