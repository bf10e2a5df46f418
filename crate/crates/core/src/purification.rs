//! Finitely correlated states from completely positive maps, their local
//! purifications, and the induced matrix product operators.
//!
//! A channel is a family of Kraus operators `K_i` mapping the bond space
//! into bond space tensor one physical site, normalized so that
//! `sum_i K_i^T K_i` is the bond identity. Iterating the channel from a
//! density matrix on the bond space grows a translation invariant state one
//! physical site at a time; tracing out the bond at the end yields the
//! n-site density matrix. The same data also yields an explicit purifying
//! MPS (bond dimension equal to the bond space, one extra leg per site for
//! the Kraus index) and an MPO of bond dimension `D^2` representing the
//! density matrix itself.

use crate::exact::{q_from_f64, QMatrix};
use crate::mpo::MpoInstance;
use crate::mps_probe::{Mps, SiteTensor};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use thiserror::Error;

/// Frobenius tolerance for the Kraus normalization check.
pub const CHANNEL_TOL: f64 = 1e-10;
/// Eigenvalue tolerance for accepting a bond state as positive
/// semidefinite.
pub const DENSITY_TOL: f64 = 1e-10;
/// Tolerance for the unit-trace check on bond states.
pub const TRACE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum PurifyError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("Kraus family is not normalized, residual {residual:.3e}")]
    NotNormalized { residual: f64 },
    #[error("bond state is not a density matrix: {reason}")]
    NotDensity { reason: String },
    #[error("state dimension {dim} exceeds cap {cap}")]
    CapExceeded { dim: usize, cap: usize },
}

/// A completely positive trace-preserving map from the bond space `C^D`
/// into `C^D` tensor one physical site `C^d`, given by Kraus operators
/// stored as `(D*d) x D` matrices with row index `a*d + x`.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    bond: usize,
    phys: usize,
    ops: Vec<DMatrix<f64>>,
}

impl KrausChannel {
    pub fn new(bond: usize, phys: usize, ops: Vec<DMatrix<f64>>) -> Result<Self, PurifyError> {
        if bond == 0 || phys == 0 {
            return Err(PurifyError::Shape("dimensions must be positive".into()));
        }
        if ops.is_empty() {
            return Err(PurifyError::Shape("need at least one Kraus operator".into()));
        }
        for (i, k) in ops.iter().enumerate() {
            if k.nrows() != bond * phys || k.ncols() != bond {
                return Err(PurifyError::Shape(format!(
                    "Kraus operator {i} is {}x{}, expected {}x{bond}",
                    k.nrows(),
                    k.ncols(),
                    bond * phys
                )));
            }
        }
        Ok(KrausChannel { bond, phys, ops })
    }

    pub fn bond_dim(&self) -> usize {
        self.bond
    }

    pub fn phys_dim(&self) -> usize {
        self.phys
    }

    pub fn kraus_count(&self) -> usize {
        self.ops.len()
    }

    pub fn op(&self, i: usize) -> &DMatrix<f64> {
        &self.ops[i]
    }

    /// Frobenius distance of `sum_i K_i^T K_i` from the bond identity.
    pub fn normalization_residual(&self) -> f64 {
        let mut acc = DMatrix::<f64>::zeros(self.bond, self.bond);
        for k in &self.ops {
            acc += k.transpose() * k;
        }
        (acc - DMatrix::<f64>::identity(self.bond, self.bond)).norm()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalization_residual() <= CHANNEL_TOL
    }

    /// Random normalized channel: orthonormalize a random `(D*d*E) x D`
    /// matrix and slice the isometry into `E` Kraus operators, taking row
    /// `(a*d + x)*E + i` of the isometry as row `(a*d + x)` of `K_i`.
    pub fn random(rng: &mut impl Rng, bond: usize, phys: usize, kraus_count: usize) -> Self {
        assert!(bond >= 1 && phys >= 1 && kraus_count >= 1);
        let rows = bond * phys * kraus_count;
        let m = DMatrix::from_fn(rows, bond, |_, _| rng.random::<f64>() - 0.5);
        let q = m.qr().q();
        let ops = (0..kraus_count)
            .map(|i| {
                DMatrix::from_fn(bond * phys, bond, |row, col| q[(row * kraus_count + i, col)])
            })
            .collect();
        KrausChannel {
            bond,
            phys,
            ops,
        }
    }
}

fn check_density(sigma: &DMatrix<f64>, bond: usize) -> Result<(), PurifyError> {
    if sigma.nrows() != bond || sigma.ncols() != bond {
        return Err(PurifyError::Shape(format!(
            "bond state is {}x{}, expected {bond}x{bond}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let asym = (sigma - sigma.transpose()).norm();
    if asym > DENSITY_TOL {
        return Err(PurifyError::NotDensity {
            reason: format!("asymmetry {asym:.3e}"),
        });
    }
    let trace_defect = (sigma.trace() - 1.0).abs();
    if trace_defect > TRACE_TOL {
        return Err(PurifyError::NotDensity {
            reason: format!("trace defect {trace_defect:.3e}"),
        });
    }
    let min_eig = sigma
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -DENSITY_TOL {
        return Err(PurifyError::NotDensity {
            reason: format!("eigenvalue {min_eig:.3e}"),
        });
    }
    Ok(())
}

fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let d = m.nrows();
    let mut out = DMatrix::<f64>::zeros(d, d);
    for k in 0..d {
        let lam = eig.eigenvalues[k].max(0.0).sqrt();
        if lam == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] += lam * v[i] * v[j];
            }
        }
    }
    out
}

/// A finitely correlated state: a normalized channel plus a stationary-side
/// density matrix on the bond space.
#[derive(Debug, Clone)]
pub struct FcsInstance {
    channel: KrausChannel,
    sigma: DMatrix<f64>,
}

impl FcsInstance {
    pub fn new(channel: KrausChannel, sigma: DMatrix<f64>) -> Result<Self, PurifyError> {
        if !channel.is_normalized() {
            return Err(PurifyError::NotNormalized {
                residual: channel.normalization_residual(),
            });
        }
        check_density(&sigma, channel.bond_dim())?;
        Ok(FcsInstance { channel, sigma })
    }

    /// Random instance: random channel plus a strictly positive random bond
    /// state.
    pub fn random(rng: &mut impl Rng, bond: usize, phys: usize, kraus_count: usize) -> Self {
        let channel = KrausChannel::random(rng, bond, phys, kraus_count);
        let a = DMatrix::from_fn(bond, bond, |_, _| rng.random::<f64>() - 0.5);
        let mut sigma = &a * a.transpose() + DMatrix::<f64>::identity(bond, bond) * 0.1;
        sigma /= sigma.trace();
        FcsInstance { channel, sigma }
    }

    pub fn channel(&self) -> &KrausChannel {
        &self.channel
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// The n-site density matrix, built by applying the channel n times to
    /// the bond state and tracing out the bond. Physical site 1 is the most
    /// significant index.
    pub fn density(&self, n: usize, cap: usize) -> Result<DMatrix<f64>, PurifyError> {
        let d = self.channel.phys;
        let bond = self.channel.bond;
        let mut dim = 1usize;
        for _ in 0..n {
            dim = dim
                .checked_mul(d)
                .filter(|&v| v <= cap)
                .ok_or(PurifyError::CapExceeded {
                    dim: cap.saturating_add(1),
                    cap,
                })?;
        }
        let mut cur = self.sigma.clone();
        let mut pdim = 1usize;
        for _ in 0..n {
            let next_dim = bond * pdim * d;
            let mut next = DMatrix::<f64>::zeros(next_dim, next_dim);
            for k in &self.channel.ops {
                for a in 0..bond {
                    for ap in 0..bond {
                        for x in 0..d {
                            let k1 = k[(ap * d + x, a)];
                            if k1 == 0.0 {
                                continue;
                            }
                            for b in 0..bond {
                                for bp in 0..bond {
                                    for y in 0..d {
                                        let coef = k1 * k[(bp * d + y, b)];
                                        if coef == 0.0 {
                                            continue;
                                        }
                                        for big_x in 0..pdim {
                                            let row = (ap * pdim + big_x) * d + x;
                                            let cur_row = a * pdim + big_x;
                                            for big_y in 0..pdim {
                                                next[(row, (bp * pdim + big_y) * d + y)] += coef
                                                    * cur[(cur_row, b * pdim + big_y)];
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            pdim *= d;
            cur = next;
        }
        let mut out = DMatrix::<f64>::zeros(pdim, pdim);
        for a in 0..bond {
            for x in 0..pdim {
                for y in 0..pdim {
                    out[(x, y)] += cur[(a * pdim + x, a * pdim + y)];
                }
            }
        }
        Ok(out)
    }

    /// Local purification: an MPS on `n + 2` sites whose reduced state on
    /// the doubled physical legs reproduces [`FcsInstance::density`]. The
    /// first and last sites carry the bond space as a physical leg, the `n`
    /// middle sites carry the physical site times the Kraus index, packed as
    /// `x * E + i`.
    pub fn purify(&self, n: usize) -> Mps {
        let bond = self.channel.bond;
        let d = self.channel.phys;
        let e = self.channel.ops.len();
        let root = sqrt_psd(&self.sigma);
        let mut tensors = Vec::with_capacity(n + 2);
        tensors.push(SiteTensor::from_fn(1, bond, bond, |_, s, b| root[(s, b)]));
        for _ in 0..n {
            tensors.push(SiteTensor::from_fn(bond, d * e, bond, |a, p, b| {
                let (x, i) = (p / e, p % e);
                self.channel.ops[i][(b * d + x, a)]
            }));
        }
        tensors.push(SiteTensor::from_fn(bond, bond, 1, |a, s, _| {
            if a == s {
                1.0
            } else {
                0.0
            }
        }));
        Mps::new(tensors).expect("purification shape")
    }

    /// The density matrix as an MPO of bond dimension `D^2`, with bond
    /// index `(a, b)` packed as `a*D + b`, left boundary the bond state and
    /// right boundary the trace.
    pub fn induced_mpo(&self) -> MpoInstance {
        let bond = self.channel.bond;
        let d = self.channel.phys;
        let dim = bond * bond;
        let lift = |v: f64| q_from_f64(v).expect("finite entry");
        let mut tensors = Vec::with_capacity(d * d);
        for x in 0..d {
            for y in 0..d {
                tensors.push(QMatrix::from_fn(dim, dim, |ab, apbp| {
                    let (a, b) = (ab / bond, ab % bond);
                    let (ap, bp) = (apbp / bond, apbp % bond);
                    let mut acc = 0.0;
                    for k in &self.channel.ops {
                        acc += k[(ap * d + x, a)] * k[(bp * d + y, b)];
                    }
                    lift(acc)
                }));
            }
        }
        let left = (0..dim)
            .map(|ab| lift(self.sigma[(ab / bond, ab % bond)]))
            .collect();
        let right = (0..dim)
            .map(|ab| lift(if ab / bond == ab % bond { 1.0 } else { 0.0 }))
            .collect();
        MpoInstance::new(d, tensors, left, right).expect("induced shape")
    }
}

/// Partial trace of a purification produced by [`FcsInstance::purify`]:
/// contracts the state with itself over the two boundary legs and every
/// Kraus index, returning the density matrix on the remaining physical
/// indices.
pub fn purified_density(
    psi: &Mps,
    phys: usize,
    kraus: usize,
    cap: usize,
) -> Result<DMatrix<f64>, PurifyError> {
    let sites = psi.n_sites();
    if sites < 2 {
        return Err(PurifyError::Shape("need boundary sites".into()));
    }
    let n = sites - 2;
    let bond = psi.site(0).phys;
    if psi.site(sites - 1).phys != bond {
        return Err(PurifyError::Shape("boundary legs disagree".into()));
    }
    for i in 1..=n {
        if psi.site(i).phys != phys * kraus {
            return Err(PurifyError::Shape(format!(
                "site {i} has physical dimension {}, expected {}",
                psi.site(i).phys,
                phys * kraus
            )));
        }
    }
    let mut dim = 1usize;
    for _ in 0..n {
        dim = dim
            .checked_mul(phys)
            .filter(|&v| v <= cap)
            .ok_or(PurifyError::CapExceeded {
                dim: cap.saturating_add(1),
                cap,
            })?;
    }
    let amp = psi.to_dense(cap.saturating_mul(bond * bond * kraus.pow(n as u32)))
        .map_err(|_| PurifyError::CapExceeded { dim, cap })?;
    // Index layout of amp: s0, (x_1, i_1), ..., (x_n, i_n), s_last with the
    // leftmost slot most significant.
    let de = phys * kraus;
    let mut strides = vec![0usize; n];
    let mut place = bond;
    for k in (0..n).rev() {
        strides[k] = kraus * place;
        place *= de;
    }
    let mut rho = DMatrix::<f64>::zeros(dim, dim);
    let env_count = bond * kraus.pow(n as u32) * bond;
    let mut v = vec![0.0f64; dim];
    for env in 0..env_count {
        let mut rest = env;
        let s_last = rest % bond;
        rest /= bond;
        let mut base = 0usize;
        let mut place = bond;
        for _ in 0..n {
            let i = rest % kraus;
            rest /= kraus;
            base += i * place;
            place *= de;
        }
        let s0 = rest;
        base += s0 * place + s_last;
        for (x_index, slot) in v.iter_mut().enumerate() {
            let mut idx = base;
            let mut x_rest = x_index;
            for stride in strides.iter().rev() {
                idx += (x_rest % phys) * stride;
                x_rest /= phys;
            }
            *slot = amp[idx];
        }
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (j, &vj) in v.iter().enumerate() {
                rho[(i, j)] += vi * vj;
            }
        }
    }
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpo::DEFAULT_DENSE_CAP;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const CAP: usize = 1 << 22;

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).abs().max()
    }

    #[test]
    fn random_channels_are_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for (bond, phys, kraus) in [(1, 2, 1), (2, 2, 2), (3, 2, 2), (2, 3, 1), (4, 3, 4)] {
            let ch = KrausChannel::random(&mut rng, bond, phys, kraus);
            assert!(
                ch.is_normalized(),
                "({bond},{phys},{kraus}): residual {}",
                ch.normalization_residual()
            );
        }
    }

    #[test]
    fn scaling_breaks_normalization_with_known_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let ch = KrausChannel::random(&mut rng, 3, 2, 2);
        let scaled = KrausChannel::new(
            3,
            2,
            ch.ops.iter().map(|k| k * 2.0).collect(),
        )
        .unwrap();
        assert!(!scaled.is_normalized());
        // sum K^T K becomes 4*I, so the residual is ||3*I|| = 3*sqrt(D).
        let expected = 3.0 * (3.0f64).sqrt();
        assert!((scaled.normalization_residual() - expected).abs() < 1e-9);
        assert!(matches!(
            FcsInstance::new(scaled, DMatrix::identity(3, 3) / 3.0),
            Err(PurifyError::NotNormalized { .. })
        ));
    }

    #[test]
    fn bond_state_validation_rejects_non_densities() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let ch = KrausChannel::random(&mut rng, 2, 2, 2);
        let double = DMatrix::identity(2, 2);
        assert!(matches!(
            FcsInstance::new(ch.clone(), double),
            Err(PurifyError::NotDensity { .. })
        ));
        let skew = DMatrix::from_row_slice(2, 2, &[0.5, 0.3, -0.3, 0.5]);
        assert!(matches!(
            FcsInstance::new(ch.clone(), skew),
            Err(PurifyError::NotDensity { .. })
        ));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, -0.5]);
        assert!(matches!(
            FcsInstance::new(ch, indefinite),
            Err(PurifyError::NotDensity { .. })
        ));
    }

    #[test]
    fn trivial_bond_space_gives_product_states() {
        // D = 1: each step appends an independent copy of tau.
        let p = 0.3f64;
        let k = DMatrix::from_column_slice(2, 1, &[p.sqrt(), (1.0 - p).sqrt()]);
        let ch = KrausChannel::new(1, 2, vec![k.clone()]).unwrap();
        let f = FcsInstance::new(ch, DMatrix::identity(1, 1)).unwrap();
        let tau = &k * k.transpose();
        let n = 3;
        let rho = f.density(n, CAP).unwrap();
        for row in 0..8 {
            for col in 0..8 {
                let mut want = 1.0;
                for site in 0..n {
                    let shift = n - 1 - site;
                    want *= tau[((row >> shift) & 1, (col >> shift) & 1)];
                }
                assert!((rho[(row, col)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn densities_are_positive_and_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for (bond, phys, kraus, n) in [(1, 2, 1, 3), (2, 2, 2, 3), (3, 2, 2, 4), (2, 3, 1, 4)] {
            let f = FcsInstance::random(&mut rng, bond, phys, kraus);
            let rho = f.density(n, CAP).unwrap();
            assert!((rho.trace() - 1.0).abs() <= 1e-12);
            assert!(max_abs_diff(&rho, &rho.transpose()) <= 1e-12);
            let min = rho
                .symmetric_eigenvalues()
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-10, "({bond},{phys},{kraus},{n}): eigenvalue {min}");
        }
    }

    #[test]
    fn purification_reduces_to_the_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for (bond, phys, kraus, n) in [
            (1, 2, 1, 3),
            (2, 2, 2, 3),
            (2, 2, 2, 5),
            (3, 2, 2, 4),
            (2, 3, 1, 4),
            (4, 3, 4, 3),
        ] {
            let f = FcsInstance::random(&mut rng, bond, phys, kraus);
            let psi = f.purify(n);
            assert_eq!(psi.n_sites(), n + 2);
            let reduced = purified_density(&psi, phys, kraus, CAP).unwrap();
            let direct = f.density(n, CAP).unwrap();
            let diff = max_abs_diff(&reduced, &direct);
            assert!(diff <= 1e-10, "({bond},{phys},{kraus},{n}): diff {diff:.3e}");
        }
    }

    #[test]
    fn purification_has_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        // A pure bond state keeps the purification a unit vector, and
        // normalization plus unit trace gives the same for mixed states.
        let ch = KrausChannel::random(&mut rng, 2, 2, 2);
        let pure = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let f = FcsInstance::new(ch, pure).unwrap();
        let psi = f.purify(4);
        assert!((psi.norm_sq() - 1.0).abs() < 1e-12);
        let g = FcsInstance::random(&mut rng, 3, 2, 2);
        assert!((g.purify(3).norm_sq() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn induced_mpo_assembles_the_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for (bond, phys, kraus, n) in [(1, 2, 1, 3), (2, 2, 2, 3), (2, 3, 2, 3), (3, 2, 2, 3)] {
            let f = FcsInstance::random(&mut rng, bond, phys, kraus);
            let mpo = f.induced_mpo();
            assert_eq!(mpo.bond_dim(), bond * bond);
            assert_eq!(mpo.physical_dim(), phys);
            let assembled = mpo.dense_assemble_f64(n, DEFAULT_DENSE_CAP).unwrap();
            let direct = f.density(n, CAP).unwrap();
            let diff = max_abs_diff(&assembled, &direct);
            assert!(diff <= 1e-10, "({bond},{phys},{kraus},{n}): diff {diff:.3e}");
        }
    }

    #[test]
    fn density_respects_the_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let f = FcsInstance::random(&mut rng, 2, 2, 2);
        assert!(matches!(
            f.density(13, 1 << 12),
            Err(PurifyError::CapExceeded { .. })
        ));
    }
}
