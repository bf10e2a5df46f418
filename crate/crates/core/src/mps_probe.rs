//! Variational negativity probes: minimize `<psi| rho |psi>` over matrix
//! product states of bounded bond dimension.
//!
//! The probe is a hierarchy indexed by the MPS bond dimension chi. Each
//! level runs an alternating single-site minimization (sweeping in mixed
//! canonical form, so every local problem is an ordinary symmetric
//! eigenproblem) from several random starts, plus a warm start from the
//! previous level padded to the larger bond dimension. A level that pushes
//! the expectation below the threshold certifies negativity; levels that
//! stay above prove nothing, which is what makes this a one-sided
//! hierarchy.
//!
//! Everything here is floating point. Operators with rational entries too
//! large for faithful float conversion are refused and should be handled
//! by the exact diagonal path instead.

use crate::exact::q_to_f64;
use crate::mpo::{float_band, MpoInstance};
use crate::words::Word;
use nalgebra::{DMatrix, SymmetricEigen};
use num::Signed;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Largest MPO entry magnitude the float probe accepts.
pub const PROBE_MAX_ABS: f64 = 1e15;
/// Maximum number of full sweeps per run.
pub const MAX_SWEEPS: usize = 40;
/// Relative energy change below which a run counts as converged.
pub const SWEEP_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum ProbeError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(
        "MPO entries reach magnitude {max:.3e}, beyond the float probe limit {limit:.0e}; \
         use the exact diagonal path for such operators"
    )]
    MagnitudeTooLarge { max: f64, limit: f64 },
    #[error("state dimension {dim} exceeds cap {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },
}

/// One site tensor with shape `(left, phys, right)`, stored row-major in
/// that index order.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteTensor {
    pub left: usize,
    pub phys: usize,
    pub right: usize,
    pub data: Vec<f64>,
}

impl SiteTensor {
    pub fn zeros(left: usize, phys: usize, right: usize) -> Self {
        SiteTensor {
            left,
            phys,
            right,
            data: vec![0.0; left * phys * right],
        }
    }

    pub fn from_fn(
        left: usize,
        phys: usize,
        right: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut t = SiteTensor::zeros(left, phys, right);
        for l in 0..left {
            for p in 0..phys {
                for r in 0..right {
                    *t.at_mut(l, p, r) = f(l, p, r);
                }
            }
        }
        t
    }

    #[inline]
    pub fn at(&self, l: usize, p: usize, r: usize) -> f64 {
        self.data[(l * self.phys + p) * self.right + r]
    }

    #[inline]
    pub fn at_mut(&mut self, l: usize, p: usize, r: usize) -> &mut f64 {
        &mut self.data[(l * self.phys + p) * self.right + r]
    }
}

/// An open-boundary matrix product state. Physical dimensions may vary per
/// site; the outermost bond dimensions are 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Mps {
    tensors: Vec<SiteTensor>,
}

impl Mps {
    pub fn new(tensors: Vec<SiteTensor>) -> Result<Self, ProbeError> {
        if tensors.is_empty() {
            return Err(ProbeError::Shape("empty MPS".into()));
        }
        if tensors.first().unwrap().left != 1 || tensors.last().unwrap().right != 1 {
            return Err(ProbeError::Shape("outer bonds must be 1".into()));
        }
        for (i, pair) in tensors.windows(2).enumerate() {
            if pair[0].right != pair[1].left {
                return Err(ProbeError::Shape(format!(
                    "bond mismatch between sites {i} and {}",
                    i + 1
                )));
            }
        }
        Ok(Mps { tensors })
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn site(&self, i: usize) -> &SiteTensor {
        &self.tensors[i]
    }

    pub fn phys_dims(&self) -> Vec<usize> {
        self.tensors.iter().map(|t| t.phys).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.tensors.iter().map(|t| t.right).max().unwrap_or(1)
    }

    /// Computational basis product state `|w>` for a uniform physical
    /// dimension.
    pub fn basis_product(d: usize, w: &Word) -> Self {
        let tensors = w
            .letters()
            .iter()
            .map(|&l| {
                assert!(l >= 1 && l <= d);
                SiteTensor::from_fn(1, d, 1, |_, p, _| if p == l - 1 { 1.0 } else { 0.0 })
            })
            .collect();
        Mps::new(tensors).expect("product shape")
    }

    /// Random dense-entry state at bond dimension `chi`, capped near the
    /// boundaries so every bond is attainable, normalized to unit norm.
    pub fn random(rng: &mut impl Rng, d: usize, n: usize, chi: usize) -> Self {
        assert!(n >= 1 && d >= 1 && chi >= 1);
        let bond = |i: usize| {
            let left_cap = d.checked_pow(i as u32).unwrap_or(usize::MAX);
            let right_cap = d.checked_pow((n - i) as u32).unwrap_or(usize::MAX);
            chi.min(left_cap).min(right_cap)
        };
        let tensors = (0..n)
            .map(|i| {
                SiteTensor::from_fn(bond(i), d, bond(i + 1), |_, _, _| rng.random::<f64>() - 0.5)
            })
            .collect();
        let mut mps = Mps::new(tensors).expect("chain shape");
        mps.normalize();
        mps
    }

    /// Embed into larger bond dimensions by zero padding; the represented
    /// state is unchanged.
    pub fn padded(&self, chi: usize) -> Self {
        let n = self.n_sites();
        // Target for bond j (between sites j-1 and j), capped by the state
        // dimensions on both sides and never below the current bond.
        let bond = |j: usize| -> usize {
            if j == 0 || j == n {
                return 1;
            }
            let left_cap: usize = self.tensors[..j].iter().map(|s| s.phys).product();
            let right_cap: usize = self.tensors[j..].iter().map(|s| s.phys).product();
            chi.min(left_cap).min(right_cap).max(self.tensors[j].left)
        };
        let tensors = (0..n)
            .map(|i| {
                let t = &self.tensors[i];
                let new_left = bond(i);
                let new_right = bond(i + 1);
                let mut out = SiteTensor::zeros(new_left, t.phys, new_right);
                for l in 0..t.left {
                    for p in 0..t.phys {
                        for r in 0..t.right {
                            *out.at_mut(l, p, r) = t.at(l, p, r);
                        }
                    }
                }
                out
            })
            .collect();
        Mps::new(tensors).expect("padded shape")
    }

    /// Squared norm by the transfer contraction.
    pub fn norm_sq(&self) -> f64 {
        // env[(a,b)] over bra and ket bonds.
        let mut env = vec![1.0f64];
        let mut dim = 1usize;
        for t in &self.tensors {
            let mut next = vec![0.0; t.right * t.right];
            for a in 0..t.left {
                for b in 0..t.left {
                    let e = env[a * dim + b];
                    if e == 0.0 {
                        continue;
                    }
                    for p in 0..t.phys {
                        for ar in 0..t.right {
                            let x = e * t.at(a, p, ar);
                            if x == 0.0 {
                                continue;
                            }
                            for br in 0..t.right {
                                next[ar * t.right + br] += x * t.at(b, p, br);
                            }
                        }
                    }
                }
            }
            dim = t.right;
            env = next;
        }
        env[0]
    }

    pub fn normalize(&mut self) {
        let norm = self.norm_sq().sqrt();
        if norm > 0.0 {
            // Scale a single tensor so the rescaling cannot underflow
            // per-site for long chains.
            for x in &mut self.tensors[0].data {
                *x /= norm;
            }
        }
    }

    /// Full state vector, physical indices leftmost site most significant.
    pub fn to_dense(&self, cap: usize) -> Result<Vec<f64>, ProbeError> {
        let mut total = 1usize;
        for t in &self.tensors {
            total = total
                .checked_mul(t.phys)
                .filter(|&v| v <= cap)
                .ok_or(ProbeError::DenseCapExceeded {
                    dim: cap.saturating_add(1),
                    cap,
                })?;
        }
        // amp: (prefix physical index) x (bond)
        let mut amp = vec![1.0f64];
        let mut rows = 1usize;
        for t in &self.tensors {
            let mut next = vec![0.0; rows * t.phys * t.right];
            for x in 0..rows {
                for l in 0..t.left {
                    let a = amp[x * t.left + l];
                    if a == 0.0 {
                        continue;
                    }
                    for p in 0..t.phys {
                        for r in 0..t.right {
                            next[(x * t.phys + p) * t.right + r] += a * t.at(l, p, r);
                        }
                    }
                }
            }
            rows *= t.phys;
            amp = next;
        }
        Ok(amp)
    }
}

/// Float copy of an MPO for repeated contraction.
struct MpoF64 {
    d: usize,
    bond: usize,
    /// Slot `(p, q)` flattened, each a bond x bond row-major matrix.
    tensors: Vec<Vec<f64>>,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl MpoF64 {
    fn build(mpo: &MpoInstance) -> Result<Self, ProbeError> {
        let max = q_to_f64(&mpo.max_abs_entry().abs());
        if !max.is_finite() || max > PROBE_MAX_ABS {
            return Err(ProbeError::MagnitudeTooLarge {
                max,
                limit: PROBE_MAX_ABS,
            });
        }
        let d = mpo.physical_dim();
        let mut tensors = Vec::with_capacity(d * d);
        for p in 1..=d {
            for q in 1..=d {
                tensors.push(mpo.tensor(p, q).to_f64_vec());
            }
        }
        Ok(MpoF64 {
            d,
            bond: mpo.bond_dim(),
            tensors,
            left: mpo.left().iter().map(q_to_f64).collect(),
            right: mpo.right().iter().map(q_to_f64).collect(),
        })
    }

    #[inline]
    fn m(&self, p: usize, q: usize) -> &[f64] {
        &self.tensors[p * self.d + q]
    }
}

/// Environment tensor over `(bra bond, mpo bond, ket bond)` flattened.
type Env = Vec<f64>;

fn env_index(a: usize, k: usize, b: usize, kdim: usize, bdim: usize) -> usize {
    (a * kdim + k) * bdim + b
}

/// Extend a left environment across one site (same tensor on bra and ket).
fn extend_left(env: &Env, chi_l: usize, t: &SiteTensor, op: &MpoF64) -> Env {
    let kd = op.bond;
    let d = op.d;
    let chi_r = t.right;
    // t1[(p, a', k, b)] = sum_a t[a,p,a'] env[a,k,b]
    let mut t1 = vec![0.0; d * chi_r * kd * chi_l];
    for a in 0..chi_l {
        for p in 0..d {
            for ap in 0..chi_r {
                let coef = t.at(a, p, ap);
                if coef == 0.0 {
                    continue;
                }
                for k in 0..kd {
                    let base = env_index(a, k, 0, kd, chi_l);
                    let out = ((p * chi_r + ap) * kd + k) * chi_l;
                    for b in 0..chi_l {
                        t1[out + b] += coef * env[base + b];
                    }
                }
            }
        }
    }
    // t2[(a', q, k', b)] = sum_{p,k} t1[(p,a',k,b)] M(p,q)[k,k']
    let mut t2 = vec![0.0; chi_r * d * kd * chi_l];
    for p in 0..d {
        for q in 0..d {
            let m = op.m(p, q);
            for ap in 0..chi_r {
                for k in 0..kd {
                    let t1_base = ((p * chi_r + ap) * kd + k) * chi_l;
                    for kp in 0..kd {
                        let coef = m[k * kd + kp];
                        if coef == 0.0 {
                            continue;
                        }
                        let out = ((ap * d + q) * kd + kp) * chi_l;
                        for b in 0..chi_l {
                            t2[out + b] += coef * t1[t1_base + b];
                        }
                    }
                }
            }
        }
    }
    // out[(a', k', b')] = sum_{b,q} t2[(a',q,k',b)] t[b,q,b']
    let mut out = vec![0.0; chi_r * kd * chi_r];
    for ap in 0..chi_r {
        for q in 0..d {
            for kp in 0..kd {
                let t2_base = ((ap * d + q) * kd + kp) * chi_l;
                for b in 0..chi_l {
                    let coef = t2[t2_base + b];
                    if coef == 0.0 {
                        continue;
                    }
                    for bp in 0..chi_r {
                        out[env_index(ap, kp, bp, kd, chi_r)] += coef * t.at(b, q, bp);
                    }
                }
            }
        }
    }
    out
}

/// Extend a right environment across one site.
fn extend_right(env: &Env, chi_r: usize, t: &SiteTensor, op: &MpoF64) -> Env {
    let kd = op.bond;
    let d = op.d;
    let chi_l = t.left;
    // t1[(p, a, k', b')] = sum_{a'} t[a,p,a'] env[a',k',b']
    let mut t1 = vec![0.0; d * chi_l * kd * chi_r];
    for a in 0..chi_l {
        for p in 0..d {
            for ap in 0..chi_r {
                let coef = t.at(a, p, ap);
                if coef == 0.0 {
                    continue;
                }
                for kp in 0..kd {
                    let base = env_index(ap, kp, 0, kd, chi_r);
                    let out = ((p * chi_l + a) * kd + kp) * chi_r;
                    for bp in 0..chi_r {
                        t1[out + bp] += coef * env[base + bp];
                    }
                }
            }
        }
    }
    // t2[(a, q, k, b')] = sum_{p,k'} t1[(p,a,k',b')] M(p,q)[k,k']
    let mut t2 = vec![0.0; chi_l * d * kd * chi_r];
    for p in 0..d {
        for q in 0..d {
            let m = op.m(p, q);
            for a in 0..chi_l {
                for kp in 0..kd {
                    let t1_base = ((p * chi_l + a) * kd + kp) * chi_r;
                    for k in 0..kd {
                        let coef = m[k * kd + kp];
                        if coef == 0.0 {
                            continue;
                        }
                        let out = ((a * d + q) * kd + k) * chi_r;
                        for bp in 0..chi_r {
                            t2[out + bp] += coef * t1[t1_base + bp];
                        }
                    }
                }
            }
        }
    }
    // out[(a, k, b)] = sum_{b',q} t2[(a,q,k,b')] t[b,q,b']
    let mut out = vec![0.0; chi_l * kd * chi_l];
    for a in 0..chi_l {
        for q in 0..d {
            for k in 0..kd {
                let t2_base = ((a * d + q) * kd + k) * chi_r;
                for b in 0..chi_l {
                    for bp in 0..chi_r {
                        let coef = t2[t2_base + bp];
                        if coef != 0.0 {
                            out[env_index(a, k, b, kd, chi_l)] += coef * t.at(b, q, bp);
                        }
                    }
                }
            }
        }
    }
    out
}

fn boundary_env(v: &[f64]) -> Env {
    v.to_vec()
}

/// `<psi| rho |psi>` by the three-layer transfer contraction.
pub fn expectation(psi: &Mps, mpo: &MpoInstance, n: usize) -> Result<f64, ProbeError> {
    let op = MpoF64::build(mpo)?;
    if psi.n_sites() != n {
        return Err(ProbeError::Shape(format!(
            "state has {} sites, expected {n}",
            psi.n_sites()
        )));
    }
    if psi.phys_dims().iter().any(|&p| p != op.d) {
        return Err(ProbeError::Shape(format!(
            "physical dimensions {:?} do not match operator dimension {}",
            psi.phys_dims(),
            op.d
        )));
    }
    let mut env = boundary_env(&op.left);
    let mut chi = 1usize;
    for t in &psi.tensors {
        env = extend_left(&env, chi, t, &op);
        chi = t.right;
    }
    Ok((0..op.bond).map(|k| env[k] * op.right[k]).sum())
}

fn reshape_qr(data: &[f64], rows: usize, cols: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = DMatrix::from_row_slice(rows, cols, data);
    let qr = m.qr();
    (qr.q(), qr.r())
}

struct Sweeper<'a> {
    op: &'a MpoF64,
    mps: Mps,
}

impl<'a> Sweeper<'a> {
    /// Bring every site into right-canonical form, center at site 0, and
    /// normalize.
    fn right_canonicalize(&mut self) {
        let n = self.mps.tensors.len();
        for i in (1..n).rev() {
            let t = self.mps.tensors[i].clone();
            // LQ via QR of the transpose: rows (phys*right), cols left.
            let mut transposed = vec![0.0; t.left * t.phys * t.right];
            for l in 0..t.left {
                for p in 0..t.phys {
                    for r in 0..t.right {
                        transposed[(p * t.right + r) * t.left + l] = t.at(l, p, r);
                    }
                }
            }
            let (q, rfac) = reshape_qr(&transposed, t.phys * t.right, t.left);
            let k = q.ncols();
            let mut new_t = SiteTensor::zeros(k, t.phys, t.right);
            for l in 0..k {
                for p in 0..t.phys {
                    for r in 0..t.right {
                        *new_t.at_mut(l, p, r) = q[(p * t.right + r, l)];
                    }
                }
            }
            // Absorb rfac^T (left x k) into the previous site.
            let prev = self.mps.tensors[i - 1].clone();
            let mut new_prev = SiteTensor::zeros(prev.left, prev.phys, k);
            for l in 0..prev.left {
                for p in 0..prev.phys {
                    for r in 0..prev.right {
                        let coef = prev.at(l, p, r);
                        if coef == 0.0 {
                            continue;
                        }
                        for b in 0..k {
                            *new_prev.at_mut(l, p, b) += coef * rfac[(b, r)];
                        }
                    }
                }
            }
            self.mps.tensors[i] = new_t;
            self.mps.tensors[i - 1] = new_prev;
        }
        let norm = self
            .mps
            .tensors[0]
            .data
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        if norm > 0.0 {
            for x in &mut self.mps.tensors[0].data {
                *x /= norm;
            }
        }
    }

    /// Solve the local symmetric eigenproblem at `site` given its
    /// environments, overwrite the tensor with the minimizer, and return the
    /// minimal eigenvalue.
    fn solve_site(&mut self, site: usize, lenv: &Env, renv: &Env) -> f64 {
        let t = &self.mps.tensors[site];
        let (chi_l, d, chi_r) = (t.left, t.phys, t.right);
        let kd = self.op.bond;
        let dim = chi_l * d * chi_r;
        // h[(l,p,r),(l',p',r')] = sum_{k,k'} lenv[(l,k,l')] M(p,p')[k,k'] renv[(r,k',r')]
        // built through p1[(l,l',p,p',k')] = sum_k lenv[(l,k,l')] M(p,p')[k,k'].
        let mut p1 = vec![0.0; chi_l * chi_l * d * d * kd];
        for p in 0..d {
            for pp in 0..d {
                let m = self.op.m(p, pp);
                for l in 0..chi_l {
                    for lp in 0..chi_l {
                        let p1_base = (((l * chi_l + lp) * d + p) * d + pp) * kd;
                        for k in 0..kd {
                            let coef = lenv[env_index(l, k, lp, kd, chi_l)];
                            if coef == 0.0 {
                                continue;
                            }
                            let m_base = k * kd;
                            for kp in 0..kd {
                                p1[p1_base + kp] += coef * m[m_base + kp];
                            }
                        }
                    }
                }
            }
        }
        let mut h = DMatrix::zeros(dim, dim);
        for l in 0..chi_l {
            for p in 0..d {
                for r in 0..chi_r {
                    let row = (l * d + p) * chi_r + r;
                    for lp in 0..chi_l {
                        for pp in 0..d {
                            let p1_base = (((l * chi_l + lp) * d + p) * d + pp) * kd;
                            for rp in 0..chi_r {
                                let col = (lp * d + pp) * chi_r + rp;
                                let mut acc = 0.0;
                                for kp in 0..kd {
                                    acc += p1[p1_base + kp]
                                        * renv[env_index(r, kp, rp, kd, chi_r)];
                                }
                                h[(row, col)] += acc;
                            }
                        }
                    }
                }
            }
        }
        let sym = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let (idx, &value) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .expect("nonempty spectrum");
        let vec = eig.eigenvectors.column(idx);
        let t = &mut self.mps.tensors[site];
        for (slot, x) in t.data.iter_mut().zip(vec.iter()) {
            *slot = *x;
        }
        value
    }

    /// Move the canonical center one site to the right.
    fn shift_right(&mut self, site: usize) {
        let t = self.mps.tensors[site].clone();
        let (q, rfac) = reshape_qr(&t.data, t.left * t.phys, t.right);
        let k = q.ncols();
        let mut new_t = SiteTensor::zeros(t.left, t.phys, k);
        for l in 0..t.left {
            for p in 0..t.phys {
                for r in 0..k {
                    *new_t.at_mut(l, p, r) = q[(l * t.phys + p, r)];
                }
            }
        }
        let next = self.mps.tensors[site + 1].clone();
        let mut new_next = SiteTensor::zeros(k, next.phys, next.right);
        for a in 0..k {
            for r in 0..next.left {
                let coef = rfac[(a, r)];
                if coef == 0.0 {
                    continue;
                }
                for p in 0..next.phys {
                    for b in 0..next.right {
                        *new_next.at_mut(a, p, b) += coef * next.at(r, p, b);
                    }
                }
            }
        }
        self.mps.tensors[site] = new_t;
        self.mps.tensors[site + 1] = new_next;
    }

    /// Move the canonical center one site to the left.
    fn shift_left(&mut self, site: usize) {
        let t = self.mps.tensors[site].clone();
        let mut transposed = vec![0.0; t.left * t.phys * t.right];
        for l in 0..t.left {
            for p in 0..t.phys {
                for r in 0..t.right {
                    transposed[(p * t.right + r) * t.left + l] = t.at(l, p, r);
                }
            }
        }
        let (q, rfac) = reshape_qr(&transposed, t.phys * t.right, t.left);
        let k = q.ncols();
        let mut new_t = SiteTensor::zeros(k, t.phys, t.right);
        for l in 0..k {
            for p in 0..t.phys {
                for r in 0..t.right {
                    *new_t.at_mut(l, p, r) = q[(p * t.right + r, l)];
                }
            }
        }
        let prev = self.mps.tensors[site - 1].clone();
        let mut new_prev = SiteTensor::zeros(prev.left, prev.phys, k);
        for l in 0..prev.left {
            for p in 0..prev.phys {
                for r in 0..prev.right {
                    let coef = prev.at(l, p, r);
                    if coef == 0.0 {
                        continue;
                    }
                    for b in 0..k {
                        *new_prev.at_mut(l, p, b) += coef * rfac[(b, r)];
                    }
                }
            }
        }
        self.mps.tensors[site] = new_t;
        self.mps.tensors[site - 1] = new_prev;
    }

    fn run(&mut self, max_sweeps: usize) -> (f64, Vec<f64>, bool) {
        let n = self.mps.tensors.len();
        self.right_canonicalize();
        let mut sweep_values = Vec::new();
        let mut converged = false;
        let mut last = f64::INFINITY;
        for _ in 0..max_sweeps {
            // Rebuild right environments for the current state.
            let mut renvs: Vec<Env> = vec![Vec::new(); n];
            renvs[n - 1] = boundary_env(&self.op.right);
            for i in (0..n - 1).rev() {
                let chi_r = self.mps.tensors[i + 1].right;
                renvs[i] = extend_right(&renvs[i + 1], chi_r, &self.mps.tensors[i + 1], self.op);
            }
            let mut lenvs: Vec<Env> = vec![Vec::new(); n];
            lenvs[0] = boundary_env(&self.op.left);
            let mut energy = 0.0;
            for i in 0..n {
                energy = self.solve_site(i, &lenvs[i].clone(), &renvs[i]);
                if i < n - 1 {
                    self.shift_right(i);
                    lenvs[i + 1] =
                        extend_left(&lenvs[i], self.mps.tensors[i].left, &self.mps.tensors[i], self.op);
                }
            }
            sweep_values.push(energy);
            // Right-to-left half sweep, building left environments is done,
            // right environments rebuilt incrementally.
            let mut renv = boundary_env(&self.op.right);
            for i in (0..n).rev() {
                energy = self.solve_site(i, &lenvs[i].clone(), &renv);
                if i > 0 {
                    self.shift_left(i);
                    renv = extend_right(&renv, self.mps.tensors[i].right, &self.mps.tensors[i], self.op);
                }
            }
            sweep_values.push(energy);
            if (last - energy).abs() <= SWEEP_TOL * (1.0 + energy.abs()) {
                converged = true;
                break;
            }
            last = energy;
        }
        let value = *sweep_values.last().expect("at least one sweep");
        (value, sweep_values, converged)
    }
}

/// Result of one variational level.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOutcome {
    pub value: f64,
    pub witness: Mps,
    pub converged: bool,
    /// Energy after each half sweep of the winning run.
    pub sweep_values: Vec<f64>,
}

fn run_one(op: &MpoF64, init: Mps) -> ProbeOutcome {
    let mut sweeper = Sweeper {
        op,
        mps: init,
    };
    let (value, sweep_values, converged) = sweeper.run(MAX_SWEEPS);
    ProbeOutcome {
        value,
        witness: sweeper.mps,
        converged,
        sweep_values,
    }
}

fn best_outcome(outcomes: Vec<ProbeOutcome>) -> ProbeOutcome {
    outcomes
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            a.value
                .partial_cmp(&b.value)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(ia.cmp(ib))
        })
        .map(|(_, o)| o)
        .expect("at least one run")
}

/// Minimize the expectation over bond dimension `chi` states: `restarts`
/// random starts with seeds `seed`, `seed+1`, ... run in parallel, best
/// value returned. Warm starts can be supplied to seed the search from
/// known states.
pub fn variational_min_with(
    mpo: &MpoInstance,
    n: usize,
    chi: usize,
    restarts: usize,
    seed: u64,
    warm_starts: &[Mps],
) -> Result<ProbeOutcome, ProbeError> {
    assert!(chi >= 1, "bond dimension must be at least 1");
    assert!(n >= 1, "need at least one site");
    let op = MpoF64::build(mpo)?;
    let d = op.d;
    let mut inits: Vec<Mps> = warm_starts.iter().map(|m| m.padded(chi)).collect();
    for i in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        inits.push(Mps::random(&mut rng, d, n, chi));
    }
    for init in &inits {
        if init.n_sites() != n || init.phys_dims().iter().any(|&p| p != d) {
            return Err(ProbeError::Shape(
                "warm start does not match operator geometry".into(),
            ));
        }
    }
    let outcomes: Vec<ProbeOutcome> = inits
        .into_par_iter()
        .map(|init| run_one(&op, init))
        .collect();
    Ok(best_outcome(outcomes))
}

/// Best-of-restarts variational minimum at one bond dimension.
pub fn variational_min(
    mpo: &MpoInstance,
    n: usize,
    chi: usize,
    restarts: usize,
    seed: u64,
) -> Result<ProbeOutcome, ProbeError> {
    variational_min_with(mpo, n, chi, restarts, seed, &[])
}

/// One row of a hierarchy report.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeLevel {
    pub chi: usize,
    pub value: f64,
    pub converged: bool,
    pub witness: Mps,
}

/// Outcome of probing a sequence of bond dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub levels: Vec<ProbeLevel>,
    /// True iff some level certified a value below `-lambda` minus the
    /// float tolerance band.
    pub detected: bool,
    pub threshold: f64,
}

/// Run [`variational_min`] per bond dimension, warm-starting each level
/// from the previous winner padded up, and compare the best value against
/// the threshold `-lambda` with the shared float tolerance band.
pub fn probe_hierarchy(
    mpo: &MpoInstance,
    n: usize,
    chi_list: &[usize],
    restarts: usize,
    seed: u64,
    lambda: &crate::exact::Q,
) -> Result<ProbeReport, ProbeError> {
    assert!(!chi_list.is_empty(), "need at least one level");
    let band = float_band(lambda);
    let threshold = -q_to_f64(lambda) - band;
    let mut levels: Vec<ProbeLevel> = Vec::with_capacity(chi_list.len());
    let mut previous: Option<Mps> = None;
    for (idx, &chi) in chi_list.iter().enumerate() {
        let warm: Vec<Mps> = previous.iter().cloned().collect();
        let outcome = variational_min_with(
            mpo,
            n,
            chi,
            restarts,
            seed.wrapping_add((idx as u64) << 32),
            &warm,
        )?;
        previous = Some(outcome.witness.clone());
        levels.push(ProbeLevel {
            chi,
            value: outcome.value,
            converged: outcome.converged,
            witness: outcome.witness,
        });
    }
    let detected = levels.iter().any(|l| l.value < threshold);
    Ok(ProbeReport {
        levels,
        detected,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{q_int, QMatrix};
    use crate::pcp::PcpInstance;
    use crate::reduction::compile;

    fn diag_mpo(entries: &[i64]) -> MpoInstance {
        // One bond-1 block per letter.
        let d = entries.len();
        let mut tensors = Vec::new();
        for a in 0..d {
            for b in 0..d {
                tensors.push(if a == b {
                    QMatrix::from_int_rows(&[&[entries[a]]])
                } else {
                    QMatrix::zeros(1, 1)
                });
            }
        }
        MpoInstance::new(d, tensors, vec![q_int(1)], vec![q_int(1)]).unwrap()
    }

    #[test]
    fn basis_product_expectation_picks_diagonal_entry() {
        let compiled = compile(&PcpInstance::classic(), &q_int(0)).unwrap();
        for letters in [vec![2, 2, 2], vec![1, 2, 1], vec![2, 1, 2, 1, 1, 2]] {
            let w = Word::from_letters(letters);
            let psi = Mps::basis_product(2, &w);
            let got = expectation(&psi, &compiled.mpo, w.len()).unwrap();
            let want = q_to_f64(&compiled.mpo.diagonal_entry(&w).unwrap());
            assert!(
                (got - want).abs() <= 1e-9 * (1.0 + want.abs()),
                "{w:?}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn solution_basis_state_reaches_minus_one() {
        let compiled = compile(&PcpInstance::classic(), &q_int(0)).unwrap();
        let y = compiled
            .encoder
            .encode(&Word::from_letters(vec![3, 2, 3, 1]))
            .unwrap();
        let psi = Mps::basis_product(2, &y);
        let got = expectation(&psi, &compiled.mpo, 12).unwrap();
        assert!((got + 1.0).abs() < 1e-6, "expectation {got}");
    }

    #[test]
    fn identity_expectation_is_one_for_any_normalized_state() {
        let id = MpoInstance::identity(2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for chi in [1usize, 2, 3] {
            let psi = Mps::random(&mut rng, 2, 5, chi);
            let got = expectation(&psi, &id, 5).unwrap();
            assert!((got - 1.0).abs() < 1e-9, "chi {chi}: {got}");
        }
    }

    #[test]
    fn expectation_rejects_shape_mismatch() {
        let id = MpoInstance::identity(2);
        let psi = Mps::basis_product(3, &Word::from_letters(vec![1, 2]));
        assert!(matches!(
            expectation(&psi, &id, 2),
            Err(ProbeError::Shape(_))
        ));
        let psi = Mps::basis_product(2, &Word::from_letters(vec![1, 2]));
        assert!(matches!(
            expectation(&psi, &id, 3),
            Err(ProbeError::Shape(_))
        ));
    }

    #[test]
    fn variational_identity_stays_at_one() {
        let id = MpoInstance::identity(2);
        for chi in [1usize, 2] {
            let out = variational_min(&id, 4, chi, 2, 11).unwrap();
            assert!((out.value - 1.0).abs() < 1e-9, "chi {chi}: {}", out.value);
            assert!(out.converged);
        }
    }

    #[test]
    fn variational_finds_diagonal_minimum() {
        // Diagonal entries (-2)^(#1s): minimum -8 at |111>.
        let mpo = diag_mpo(&[-2, 1]);
        let (exact_min, _) = mpo.min_diagonal(3, 1 << 20).unwrap();
        let out = variational_min(&mpo, 3, 2, 6, 23).unwrap();
        let exact = q_to_f64(&exact_min);
        assert!(
            out.value >= exact - 1e-6,
            "variational {} below exact {exact}",
            out.value
        );
        assert!(
            (out.value - exact).abs() < 1e-6,
            "variational {} should reach {exact}",
            out.value
        );
    }

    #[test]
    fn variational_value_upper_bounds_dense_minimum() {
        let mpo = diag_mpo(&[-1, 2]);
        let n = 4;
        let dense_min = mpo.min_eigenvalue(n, 4096).unwrap();
        for chi in [1usize, 2] {
            let out = variational_min(&mpo, n, chi, 3, 31).unwrap();
            assert!(
                out.value >= dense_min - 1e-9,
                "chi {chi}: {} below {dense_min}",
                out.value
            );
        }
    }

    #[test]
    fn sweep_values_are_monotone() {
        let mpo = diag_mpo(&[-2, 1]);
        let out = variational_min(&mpo, 4, 2, 3, 5).unwrap();
        for pair in out.sweep_values.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-12,
                "sweep values not monotone: {:?}",
                out.sweep_values
            );
        }
    }

    #[test]
    fn hierarchy_levels_are_monotone_and_detect_negativity() {
        let compiled = compile(&PcpInstance::classic(), &q_int(0)).unwrap();
        let report =
            probe_hierarchy(&compiled.mpo, 12, &[1, 2, 4], 8, 2024, &q_int(0)).unwrap();
        for pair in report.levels.windows(2) {
            assert!(
                pair[1].value <= pair[0].value + 1e-9,
                "level values increased: {} then {}",
                pair[0].value,
                pair[1].value
            );
        }
        assert!(report.detected, "levels: {:?}", report
            .levels
            .iter()
            .map(|l| l.value)
            .collect::<Vec<_>>());
        let best = report
            .levels
            .iter()
            .map(|l| l.value)
            .fold(f64::INFINITY, f64::min);
        assert!(best <= -0.9, "best level value {best}");
    }

    #[test]
    fn zero_operator_probes_to_zero() {
        let mpo = diag_mpo(&[0, 0]);
        let report = probe_hierarchy(&mpo, 4, &[1, 2], 2, 77, &q_int(0)).unwrap();
        assert!(!report.detected);
        for level in &report.levels {
            assert!(level.value.abs() < 1e-9);
        }
    }

    #[test]
    fn probe_refuses_oversized_entries() {
        let huge = 1e16;
        let q = crate::exact::q_from_f64(huge).unwrap();
        let tensors = vec![
            QMatrix::from_fn(1, 1, |_, _| q.clone()),
            QMatrix::zeros(1, 1),
            QMatrix::zeros(1, 1),
            QMatrix::from_fn(1, 1, |_, _| q.clone()),
        ];
        let mpo = MpoInstance::new(2, tensors, vec![q_int(1)], vec![q_int(1)]).unwrap();
        match variational_min(&mpo, 3, 1, 1, 1) {
            Err(ProbeError::MagnitudeTooLarge { .. }) => {}
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn padding_preserves_the_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let psi = Mps::random(&mut rng, 2, 4, 2);
        let padded = psi.padded(4);
        assert_eq!(padded.max_bond(), 4);
        let a = psi.to_dense(1 << 12).unwrap();
        let b = padded.to_dense(1 << 12).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn norm_sq_matches_dense_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut psi = Mps::random(&mut rng, 2, 5, 3);
        psi.normalize();
        let dense = psi.to_dense(1 << 12).unwrap();
        let dense_norm: f64 = dense.iter().map(|x| x * x).sum();
        assert!((psi.norm_sq() - dense_norm).abs() < 1e-12);
        assert!((psi.norm_sq() - 1.0).abs() < 1e-12);
    }
}
