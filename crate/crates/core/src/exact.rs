//! Dense linear algebra over arbitrary-precision rationals.
//!
//! Everything on the compilation path (gadget matrices, boundary vectors,
//! diagonal MPO evaluation) runs on [`QMatrix`], a plain row-major dense
//! matrix of `BigRational` entries. Entries on that path grow like `b^(2kn)`
//! so machine floats are not an option; correctness statements there are
//! exact equalities.
//!
//! Shape mismatches are programmer errors and panic, matching the behaviour
//! of the float backend. Fallible, user-facing validation lives in the
//! modules that parse input.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

/// Shorthand for the scalar type used on all exact paths.
pub type Q = BigRational;

/// Rational from an integer.
pub fn q_int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Rational p/q from a pair of integers. Panics if `den == 0`.
pub fn q_ratio(num: i64, den: i64) -> Q {
    assert!(den != 0, "zero denominator");
    Q::new(BigInt::from(num), BigInt::from(den))
}

/// Exact lift of a finite float. `f64 -> Q` is lossless, so float-entry
/// inputs can be moved onto the exact path without rounding.
pub fn q_from_f64(x: f64) -> Option<Q> {
    Q::from_float(x)
}

/// Nearest-float projection for reporting and for the float backends.
pub fn q_to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Dense row-major matrix over `BigRational`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Q>,
}

impl QMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        QMatrix {
            rows,
            cols,
            data: vec![Q::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Q::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Q) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        QMatrix { rows, cols, data }
    }

    /// Build from integer rows; convenient for hand-written fixtures.
    pub fn from_int_rows(rows: &[&[i64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| q_int(rows[i][j]))
    }

    pub fn from_rows(rows: Vec<Vec<Q>>) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        QMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Q] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn transpose(&self) -> QMatrix {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn add(&self, other: &QMatrix) -> QMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch in add");
        Self::from_fn(self.rows, self.cols, |i, j| &self[(i, j)] + &other[(i, j)])
    }

    pub fn scale(&self, c: &Q) -> QMatrix {
        Self::from_fn(self.rows, self.cols, |i, j| &self[(i, j)] * c)
    }

    pub fn mul(&self, other: &QMatrix) -> QMatrix {
        assert_eq!(self.cols, other.rows, "shape mismatch in mul");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        let prod = a * b;
                        out[(i, j)] += prod;
                    }
                }
            }
        }
        out
    }

    /// Kronecker product, `(self ⊗ other)`.
    pub fn kron(&self, other: &QMatrix) -> QMatrix {
        let (r1, c1, r2, c2) = (self.rows, self.cols, other.rows, other.cols);
        Self::from_fn(r1 * r2, c1 * c2, |i, j| {
            &self[(i / r2, j / c2)] * &other[(i % r2, j % c2)]
        })
    }

    /// Block-diagonal assembly of equally sized square blocks.
    pub fn block_diag(blocks: &[QMatrix]) -> QMatrix {
        assert!(!blocks.is_empty());
        let n = blocks[0].nrows();
        assert!(blocks.iter().all(|b| b.nrows() == n && b.ncols() == n), "blocks must be square and equal sized");
        let d = blocks.len();
        Self::from_fn(d * n, d * n, |i, j| {
            if i / n == j / n {
                blocks[i / n][(i % n, j % n)].clone()
            } else {
                Q::zero()
            }
        })
    }

    /// Rank by fraction-exact Gaussian elimination.
    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        let mut rank = 0;
        let mut col = 0;
        while rank < m.rows && col < m.cols {
            // Pick the largest-magnitude pivot in this column to keep the
            // intermediate numerators from snowballing.
            let pivot = (rank..m.rows)
                .filter(|&i| !m[(i, col)].is_zero())
                .max_by_key(|&i| m[(i, col)].abs());
            let Some(p) = pivot else {
                col += 1;
                continue;
            };
            m.swap_rows(rank, p);
            let inv = m[(rank, col)].recip();
            for j in col..m.cols {
                let v = &m[(rank, j)] * &inv;
                m[(rank, j)] = v;
            }
            for i in 0..m.rows {
                if i != rank && !m[(i, col)].is_zero() {
                    let factor = m[(i, col)].clone();
                    for j in col..m.cols {
                        let delta = &m[(rank, j)] * &factor;
                        m[(i, j)] -= delta;
                    }
                }
            }
            rank += 1;
            col += 1;
        }
        rank
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Entrywise conversion to a flat row-major `f64` buffer.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(q_to_f64).collect()
    }

    /// Largest absolute value among the entries, as a rational.
    pub fn max_abs(&self) -> Q {
        self.data
            .iter()
            .map(|x| x.abs())
            .max()
            .unwrap_or_else(Q::zero)
    }
}

impl std::ops::Index<(usize, usize)> for QMatrix {
    type Output = Q;
    fn index(&self, (i, j): (usize, usize)) -> &Q {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for QMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Q {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

/// Row vector times matrix; the workhorse of left-to-right sandwich products.
pub fn row_mul(row: &[Q], m: &QMatrix) -> Vec<Q> {
    assert_eq!(row.len(), m.nrows(), "shape mismatch in row_mul");
    let mut out = vec![Q::zero(); m.ncols()];
    for (k, a) in row.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        for j in 0..m.ncols() {
            let b = &m[(k, j)];
            if !b.is_zero() {
                out[j] += a * b;
            }
        }
    }
    out
}

/// Matrix times column vector.
pub fn mul_col(m: &QMatrix, col: &[Q]) -> Vec<Q> {
    assert_eq!(col.len(), m.ncols(), "shape mismatch in mul_col");
    (0..m.nrows())
        .map(|i| dot(m.row(i), col))
        .collect()
}

/// Inner product of two equally long slices.
pub fn dot(a: &[Q], b: &[Q]) -> Q {
    assert_eq!(a.len(), b.len(), "length mismatch in dot");
    let mut acc = Q::zero();
    for (x, y) in a.iter().zip(b) {
        if !x.is_zero() && !y.is_zero() {
            acc += x * y;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_neutral() {
        let a = QMatrix::from_int_rows(&[&[1, 2], &[3, 4]]);
        let i = QMatrix::identity(2);
        assert_eq!(a.mul(&i), a);
        assert_eq!(i.mul(&a), a);
    }

    #[test]
    fn mul_matches_hand_product() {
        let a = QMatrix::from_int_rows(&[&[1, 2], &[3, 4]]);
        let b = QMatrix::from_int_rows(&[&[5, 6], &[7, 8]]);
        let c = QMatrix::from_int_rows(&[&[19, 22], &[43, 50]]);
        assert_eq!(a.mul(&b), c);
    }

    #[test]
    fn rank_of_singular_matrix() {
        let a = QMatrix::from_int_rows(&[&[1, 2, 3], &[2, 4, 6], &[1, 0, 1]]);
        assert_eq!(a.rank(), 2);
        assert_eq!(QMatrix::identity(3).rank(), 3);
        assert_eq!(QMatrix::zeros(3, 3).rank(), 0);
    }

    #[test]
    fn rank_with_rational_entries() {
        let a = QMatrix::from_fn(2, 2, |i, j| q_ratio(1, (i + j + 1) as i64));
        // [[1, 1/2], [1/2, 1/3]] has determinant 1/12 != 0.
        assert_eq!(a.rank(), 2);
    }

    #[test]
    fn kron_shapes_and_values() {
        let a = QMatrix::from_int_rows(&[&[0, 1], &[1, 0]]);
        let i2 = QMatrix::identity(2);
        let k = a.kron(&i2);
        assert_eq!((k.nrows(), k.ncols()), (4, 4));
        assert_eq!(k[(0, 2)], q_int(1));
        assert_eq!(k[(1, 3)], q_int(1));
        assert_eq!(k[(0, 0)], q_int(0));
    }

    #[test]
    fn block_diag_places_blocks() {
        let a = QMatrix::from_int_rows(&[&[1, 0], &[0, 1]]);
        let b = QMatrix::from_int_rows(&[&[2, 3], &[4, 5]]);
        let m = QMatrix::block_diag(&[a, b]);
        assert_eq!(m[(2, 2)], q_int(2));
        assert_eq!(m[(3, 3)], q_int(5));
        assert_eq!(m[(0, 2)], q_int(0));
    }

    #[test]
    fn float_round_trip_is_exact() {
        let x = 0.1f64;
        let q = q_from_f64(x).unwrap();
        assert_eq!(q_to_f64(&q), x);
    }

    #[test]
    fn row_and_col_products() {
        let m = QMatrix::from_int_rows(&[&[1, 2], &[3, 4]]);
        let r = row_mul(&[q_int(1), q_int(1)], &m);
        assert_eq!(r, vec![q_int(4), q_int(6)]);
        let c = mul_col(&m, &[q_int(1), q_int(1)]);
        assert_eq!(c, vec![q_int(3), q_int(7)]);
    }
}
