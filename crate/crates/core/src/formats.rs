//! Versioned JSON file formats shared by the command-line driver.
//!
//! Exact rationals are serialized as `"p/q"` strings so that exactness
//! survives serialization; floats are serialized as strings with a fixed
//! 17-digit scientific format so that re-running a command reproduces
//! byte-identical files. Every file carries a `schema` tag of the form
//! `mpocert.<kind>/v1`, and files produced by the driver embed the
//! [`RunManifest`] describing the command, hashed inputs, and parameters
//! that created them.

use crate::exact::{q_from_f64, Q};
use crate::hmm::Hmm;
use crate::mpo::{Decision, MinValue, MpoInstance, SearchOutcome, ThresholdVerdict};
use crate::mps_probe::{Mps, ProbeReport, SiteTensor};
use crate::pcp::PcpInstance;
use crate::purification::{FcsInstance, KrausChannel};
use crate::reduction::LetterEncoder;
use crate::words::{Alphabet, Word};
use nalgebra::DMatrix;
use num::BigInt;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

pub const SCHEMA_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("schema mismatch: expected {expected:?}, found {found:?}")]
    Schema { expected: String, found: String },
    #[error("bad rational literal {0:?}")]
    Rational(String),
    #[error("bad float literal {0:?}")]
    Float(String),
    #[error("invalid payload: {0}")]
    Invalid(String),
}

fn schema_tag(kind: &str) -> String {
    format!("mpocert.{kind}/{SCHEMA_VERSION}")
}

fn check_schema(kind: &str, found: &str) -> Result<(), FormatError> {
    let expected = schema_tag(kind);
    if found != expected {
        return Err(FormatError::Schema {
            expected,
            found: found.to_string(),
        });
    }
    Ok(())
}

/// `p/q` form of an exact rational.
pub fn rational_to_string(q: &Q) -> String {
    if q.denom() == &num::BigInt::from(1) {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Parse `p/q` or a bare integer.
pub fn rational_from_string(s: &str) -> Result<Q, FormatError> {
    let bad = || FormatError::Rational(s.to_string());
    match s.split_once('/') {
        Some((num, den)) => {
            let num: BigInt = num.trim().parse().map_err(|_| bad())?;
            let den: BigInt = den.trim().parse().map_err(|_| bad())?;
            if den == BigInt::from(0) {
                return Err(bad());
            }
            Ok(Q::new(num, den))
        }
        None => {
            let num: BigInt = s.trim().parse().map_err(|_| bad())?;
            Ok(Q::from_integer(num))
        }
    }
}

/// Fixed-precision form of a float; 17 significant digits round-trip f64
/// exactly.
pub fn float_to_string(x: f64) -> String {
    format!("{x:.17e}")
}

/// Parses a float literal; "p/q" rationals are accepted and converted.
pub fn float_from_string(s: &str) -> Result<f64, FormatError> {
    if let Ok(x) = s.trim().parse() {
        return Ok(x);
    }
    rational_from_string(s)
        .map(|q| crate::exact::q_to_f64(&q))
        .map_err(|_| FormatError::Float(s.to_string()))
}

/// Entry of an MPO file: either an exact rational or a float literal; the
/// float is lifted to an exact rational on load.
fn entry_to_q(s: &str) -> Result<Q, FormatError> {
    if let Ok(q) = rational_from_string(s) {
        return Ok(q);
    }
    let x = float_from_string(s)?;
    q_from_f64(x).ok_or_else(|| FormatError::Float(s.to_string()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance block embedded in every file the driver writes: the command,
/// content hashes of its inputs, and the parameters that determine the
/// output. Timings deliberately stay out so reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub command: String,
    pub inputs: BTreeMap<String, String>,
    pub parameters: BTreeMap<String, String>,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            schema: schema_tag("manifest"),
            command: command.to_string(),
            inputs: BTreeMap::new(),
            parameters: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn record_input(&mut self, label: &str, bytes: &[u8]) {
        self.inputs.insert(label.to_string(), sha256_hex(bytes));
    }

    pub fn set_parameter(&mut self, key: &str, value: impl ToString) {
        self.parameters.insert(key.to_string(), value.to_string());
    }
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

// ---------------------------------------------------------------------------
// Correspondence-problem instances

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominoEntry {
    pub u: String,
    pub v: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcpFile {
    pub schema: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
    pub alphabet: Vec<String>,
    pub dominos: Vec<DominoEntry>,
}

impl PcpFile {
    pub const KIND: &'static str = "pcp";

    pub fn from_instance(inst: &PcpInstance) -> Self {
        PcpFile {
            schema: schema_tag(Self::KIND),
            manifest: None,
            alphabet: inst.alphabet().symbols().to_vec(),
            dominos: inst
                .dominos()
                .iter()
                .map(|(u, v)| DominoEntry {
                    u: inst.alphabet().format_word(u),
                    v: inst.alphabet().format_word(v),
                })
                .collect(),
        }
    }

    pub fn to_instance(&self) -> Result<PcpInstance, FormatError> {
        check_schema(Self::KIND, &self.schema)?;
        let alphabet = Alphabet::new(self.alphabet.iter().cloned())
            .map_err(|e| FormatError::Invalid(e.to_string()))?;
        let dominos: Vec<(&str, &str)> = self
            .dominos
            .iter()
            .map(|d| (d.u.as_str(), d.v.as_str()))
            .collect();
        PcpInstance::from_texts(alphabet, &dominos)
            .map_err(|e| FormatError::Invalid(e.to_string()))
    }
}

// ---------------------------------------------------------------------------
// Matrix product operators

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MpoFile {
    pub schema: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
    pub physical_dim: usize,
    pub bond_dim: usize,
    pub diagonal: bool,
    /// `d*d` tensors in `(alpha, beta)` row-major slot order, each a
    /// row-major bond x bond matrix of rational (or float) literals.
    pub tensors: Vec<Vec<String>>,
    pub left: Vec<String>,
    pub right: Vec<String>,
}

impl MpoFile {
    pub const KIND: &'static str = "mpo";

    pub fn from_instance(mpo: &MpoInstance) -> Self {
        let d = mpo.physical_dim();
        let mut tensors = Vec::with_capacity(d * d);
        for alpha in 1..=d {
            for beta in 1..=d {
                let t = mpo.tensor(alpha, beta);
                let mut flat = Vec::with_capacity(t.nrows() * t.ncols());
                for i in 0..t.nrows() {
                    for j in 0..t.ncols() {
                        flat.push(rational_to_string(&t[(i, j)]));
                    }
                }
                tensors.push(flat);
            }
        }
        MpoFile {
            schema: schema_tag(Self::KIND),
            manifest: None,
            physical_dim: d,
            bond_dim: mpo.bond_dim(),
            diagonal: mpo.is_diagonal(),
            tensors,
            left: mpo.left().iter().map(rational_to_string).collect(),
            right: mpo.right().iter().map(rational_to_string).collect(),
        }
    }

    pub fn to_instance(&self) -> Result<MpoInstance, FormatError> {
        check_schema(Self::KIND, &self.schema)?;
        let d = self.physical_dim;
        let bond = self.bond_dim;
        if self.tensors.len() != d * d {
            return Err(FormatError::Invalid(format!(
                "expected {} tensors, found {}",
                d * d,
                self.tensors.len()
            )));
        }
        let mut tensors = Vec::with_capacity(d * d);
        for flat in &self.tensors {
            if flat.len() != bond * bond {
                return Err(FormatError::Invalid(format!(
                    "tensor has {} entries, expected {}",
                    flat.len(),
                    bond * bond
                )));
            }
            let parsed = flat.iter().map(|s| entry_to_q(s)).collect::<Result<Vec<_>, _>>()?;
            tensors.push(crate::exact::QMatrix::from_fn(bond, bond, |i, j| {
                parsed[i * bond + j].clone()
            }));
        }
        let left = self
            .left
            .iter()
            .map(|s| entry_to_q(s))
            .collect::<Result<Vec<_>, _>>()?;
        let right = self
            .right
            .iter()
            .map(|s| entry_to_q(s))
            .collect::<Result<Vec<_>, _>>()?;
        let mpo = MpoInstance::new(d, tensors, left, right)
            .map_err(|e| FormatError::Invalid(e.to_string()))?;
        if mpo.is_diagonal() != self.diagonal {
            return Err(FormatError::Invalid(
                "diagonal flag disagrees with tensor contents".into(),
            ));
        }
        Ok(mpo)
    }
}

// ---------------------------------------------------------------------------
// Reduction encoder tables

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncoderFile {
    pub schema: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
    pub domino_count: usize,
    /// `X(alpha)` per 1-based source letter, as digit sequences over {1, 2}.
    pub codes: Vec<Vec<usize>>,
}

impl EncoderFile {
    pub const KIND: &'static str = "encoder";

    pub fn from_encoder(encoder: &LetterEncoder) -> Self {
        let d = encoder.domain_size();
        let codes = (1..=d)
            .map(|l| encoder.encode_letter(l).expect("in range").letters().to_vec())
            .collect();
        EncoderFile {
            schema: schema_tag(Self::KIND),
            manifest: None,
            domino_count: d,
            codes,
        }
    }

    pub fn to_encoder(&self) -> Result<LetterEncoder, FormatError> {
        check_schema(Self::KIND, &self.schema)?;
        let encoder = LetterEncoder::new(self.domino_count)
            .map_err(|e| FormatError::Invalid(e.to_string()))?;
        let expected = EncoderFile::from_encoder(&encoder);
        if expected.codes != self.codes {
            return Err(FormatError::Invalid("encoder table is inconsistent".into()));
        }
        Ok(encoder)
    }
}

// ---------------------------------------------------------------------------
// Threshold verdicts and searches

fn decision_str(d: Decision) -> &'static str {
    match d {
        Decision::Positive => "positive",
        Decision::NotPositive => "not_positive",
        Decision::Inconclusive => "inconclusive",
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinValueEntry {
    /// "exact" or "float".
    pub kind: String,
    pub value: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictBody {
    pub decision: String,
    pub n: usize,
    pub min_value: MinValueEntry,
    /// `|min + lambda|`.
    pub margin: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_word: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_vector: Option<Vec<String>>,
    pub non_normal: bool,
}

impl VerdictBody {
    pub fn from_verdict(v: &ThresholdVerdict, lambda: &Q) -> Self {
        let min_value = match &v.min_value {
            MinValue::Exact(q) => MinValueEntry {
                kind: "exact".into(),
                value: rational_to_string(q),
            },
            MinValue::Float(f) => MinValueEntry {
                kind: "float".into(),
                value: float_to_string(*f),
            },
        };
        VerdictBody {
            decision: decision_str(v.decision).to_string(),
            n: v.n,
            min_value,
            margin: float_to_string(v.margin(lambda)),
            witness_word: v.witness.as_ref().map(|w| w.letters().to_vec()),
            witness_vector: v
                .eigvec_witness
                .as_ref()
                .map(|xs| xs.iter().map(|&x| float_to_string(x)).collect()),
            non_normal: v.non_normal,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictFile {
    pub schema: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
    pub mode: String,
    pub lambda: String,
    pub verdict: VerdictBody,
}

impl VerdictFile {
    pub const KIND: &'static str = "verdict";

    pub fn new(mode: &str, lambda: &Q, verdict: &ThresholdVerdict) -> Self {
        VerdictFile {
            schema: schema_tag(Self::KIND),
            manifest: None,
            mode: mode.to_string(),
            lambda: rational_to_string(lambda),
            verdict: VerdictBody::from_verdict(verdict, lambda),
        }
    }

    pub fn check(&self) -> Result<(), FormatError> {
        check_schema(Self::KIND, &self.schema)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchFile {
    pub schema: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
    pub lambda: String,
    pub n_max: usize,
    /// "violation" or "none".
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<VerdictBody>,
    pub inconclusive_sizes: Vec<usize>,
}

impl SearchFile {
    pub const KIND: &'static str = "search";

    pub fn new(lambda: &Q, outcome: &SearchOutcome) -> Self {
        SearchFile {
            schema: schema_tag(Self::KIND),
            manifest: None,
            lambda: rational_to_string(lambda),
            n_max: outcome.n_max,
            status: if outcome.violation.is_some() {
                "violation".into()
            } else {
                "none".into()
            },
            violation: outcome
                .violation
                .as_ref()
                .map(|v| VerdictBody::from_verdict(v, lambda)),
            inconclusive_sizes: outcome.inconclusive_sizes.clone(),
        }
    }

    pub fn check(&self) -> Result<(), FormatError> {
        check_schema(Self::KIND, &self.schema)
    }
}

// ---------------------------------------------------------------------------
// PCP solver output

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionFile {
    pub schema: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
    /// "solution", "none", or "unknown" (budget exhausted).
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
}

impl SolutionFile {
    pub const KIND: &'static str = "solution";

    pub fn solution(w: &Word) -> Self {
        SolutionFile {
            schema: schema_tag(Self::KIND),
            manifest: None,
            status: "solution".into(),
            witness: Some(w.letters().to_vec()),
            length: Some(w.len()),
        }
    }

    pub fn none() -> Self {
        SolutionFile {
            schema: schema_tag(Self::KIND),
            manifest: None,
            status: "none".into(),
            witness: None,
            length: None,
        }
    }

    pub fn unknown() -> Self {
        SolutionFile {
            schema: schema_tag(Self::KIND),
            manifest: None,
            status: "unknown".into(),
            witness: None,
            length: None,
        }
    }
}

// ---------------------------------------------------------------------------
// Hidden Markov models

fn matrix_to_strings(m: &DMatrix<f64>) -> Vec<String> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(float_to_string(m[(i, j)]));
        }
    }
    out
}

fn matrix_from_strings(
    rows: usize,
    cols: usize,
    flat: &[String],
) -> Result<DMatrix<f64>, FormatError> {
    if flat.len() != rows * cols {
        return Err(FormatError::Invalid(format!(
            "matrix has {} entries, expected {}",
            flat.len(),
            rows * cols
        )));
    }
    let parsed = flat
        .iter()
        .map(|s| float_from_string(s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DMatrix::from_fn(rows, cols, |i, j| parsed[i * cols + j]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HmmFile {
    pub schema: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
    pub bond_dim: usize,
    pub outcome_count: usize,
    /// One row-major bond x bond matrix per outcome.
    pub transitions: Vec<Vec<String>>,
    pub initial: Vec<String>,
}

impl HmmFile {
    pub const KIND: &'static str = "hmm";

    pub fn from_hmm(h: &Hmm) -> Self {
        HmmFile {
            schema: schema_tag(Self::KIND),
            manifest: None,
            bond_dim: h.bond_dim(),
            outcome_count: h.outcome_count(),
            transitions: (1..=h.outcome_count())
                .map(|a| matrix_to_strings(h.transition(a)))
                .collect(),
            initial: h.initial().iter().map(|&x| float_to_string(x)).collect(),
        }
    }

    pub fn to_hmm(&self) -> Result<Hmm, FormatError> {
        check_schema(Self::KIND, &self.schema)?;
        let transitions = self
            .transitions
            .iter()
            .map(|flat| matrix_from_strings(self.bond_dim, self.bond_dim, flat))
            .collect::<Result<Vec<_>, _>>()?;
        let initial = self
            .initial
            .iter()
            .map(|s| float_from_string(s))
            .collect::<Result<Vec<_>, _>>()?;
        if transitions.len() != self.outcome_count {
            return Err(FormatError::Invalid(format!(
                "{} transition matrices for {} outcomes",
                transitions.len(),
                self.outcome_count
            )));
        }
        Hmm::new(transitions, initial).map_err(|e| FormatError::Invalid(e.to_string()))
    }
}

// ---------------------------------------------------------------------------
// Channels, instances, and states

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FcsFile {
    pub schema: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
    pub bond_dim: usize,
    pub phys_dim: usize,
    pub kraus_count: usize,
    /// Kraus operators, each row-major `(bond*phys) x bond`.
    pub kraus: Vec<Vec<String>>,
    /// Row-major bond x bond density matrix.
    pub sigma: Vec<String>,
}

impl FcsFile {
    pub const KIND: &'static str = "fcs";

    pub fn from_instance(f: &FcsInstance) -> Self {
        let ch = f.channel();
        FcsFile {
            schema: schema_tag(Self::KIND),
            manifest: None,
            bond_dim: ch.bond_dim(),
            phys_dim: ch.phys_dim(),
            kraus_count: ch.kraus_count(),
            kraus: (0..ch.kraus_count())
                .map(|i| matrix_to_strings(ch.op(i)))
                .collect(),
            sigma: matrix_to_strings(f.sigma()),
        }
    }

    pub fn to_instance(&self) -> Result<FcsInstance, FormatError> {
        check_schema(Self::KIND, &self.schema)?;
        if self.kraus.len() != self.kraus_count {
            return Err(FormatError::Invalid(format!(
                "{} Kraus blocks for kraus_count {}",
                self.kraus.len(),
                self.kraus_count
            )));
        }
        let ops = self
            .kraus
            .iter()
            .map(|flat| matrix_from_strings(self.bond_dim * self.phys_dim, self.bond_dim, flat))
            .collect::<Result<Vec<_>, _>>()?;
        let channel = KrausChannel::new(self.bond_dim, self.phys_dim, ops)
            .map_err(|e| FormatError::Invalid(e.to_string()))?;
        let sigma = matrix_from_strings(self.bond_dim, self.bond_dim, &self.sigma)?;
        FcsInstance::new(channel, sigma).map_err(|e| FormatError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MpsSite {
    pub left: usize,
    pub phys: usize,
    pub right: usize,
    pub data: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MpsFile {
    pub schema: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
    pub sites: Vec<MpsSite>,
}

fn sites_from_mps(m: &Mps) -> Vec<MpsSite> {
    (0..m.n_sites())
        .map(|i| {
            let t = m.site(i);
            MpsSite {
                left: t.left,
                phys: t.phys,
                right: t.right,
                data: t.data.iter().map(|&x| float_to_string(x)).collect(),
            }
        })
        .collect()
}

fn mps_from_sites(sites: &[MpsSite]) -> Result<Mps, FormatError> {
    let tensors = sites
        .iter()
        .map(|s| {
            if s.data.len() != s.left * s.phys * s.right {
                return Err(FormatError::Invalid(format!(
                    "site tensor has {} entries for shape ({}, {}, {})",
                    s.data.len(),
                    s.left,
                    s.phys,
                    s.right
                )));
            }
            let data = s
                .data
                .iter()
                .map(|x| float_from_string(x))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(SiteTensor {
                left: s.left,
                phys: s.phys,
                right: s.right,
                data,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Mps::new(tensors).map_err(|e| FormatError::Invalid(e.to_string()))
}

impl MpsFile {
    pub const KIND: &'static str = "mps";

    pub fn from_mps(m: &Mps) -> Self {
        MpsFile {
            schema: schema_tag(Self::KIND),
            manifest: None,
            sites: sites_from_mps(m),
        }
    }

    pub fn to_mps(&self) -> Result<Mps, FormatError> {
        check_schema(Self::KIND, &self.schema)?;
        mps_from_sites(&self.sites)
    }
}

// ---------------------------------------------------------------------------
// Probe reports

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeLevelEntry {
    pub chi: usize,
    pub value: String,
    pub converged: bool,
    pub witness: Vec<MpsSite>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeFile {
    pub schema: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
    pub lambda: String,
    pub threshold: String,
    pub detected: bool,
    pub levels: Vec<ProbeLevelEntry>,
}

impl ProbeFile {
    pub const KIND: &'static str = "probe";

    pub fn new(lambda: &Q, report: &ProbeReport) -> Self {
        ProbeFile {
            schema: schema_tag(Self::KIND),
            manifest: None,
            lambda: rational_to_string(lambda),
            threshold: float_to_string(report.threshold),
            detected: report.detected,
            levels: report
                .levels
                .iter()
                .map(|l| ProbeLevelEntry {
                    chi: l.chi,
                    value: float_to_string(l.value),
                    converged: l.converged,
                    witness: sites_from_mps(&l.witness),
                })
                .collect(),
        }
    }

    pub fn check(&self) -> Result<(), FormatError> {
        check_schema(Self::KIND, &self.schema)
    }
}

// ---------------------------------------------------------------------------
// Factorization candidates and reports

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NmfTermEntry {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// Input format for nonnegative factorization checks; plain JSON numbers
/// since these files are typically written by hand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NmfFile {
    pub schema: String,
    pub matrix: Vec<Vec<f64>>,
    pub factors: Vec<NmfTermEntry>,
}

impl NmfFile {
    pub const KIND: &'static str = "nmf";

    pub fn check(&self) -> Result<(), FormatError> {
        check_schema(Self::KIND, &self.schema)
    }
}

/// Input format for PSD factorization checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsdFile {
    pub schema: String,
    pub matrix: Vec<Vec<f64>>,
    /// Each family member a square matrix as nested rows.
    pub a_family: Vec<Vec<Vec<f64>>>,
    pub b_family: Vec<Vec<Vec<f64>>>,
}

impl PsdFile {
    pub const KIND: &'static str = "psd";

    pub fn check(&self) -> Result<(), FormatError> {
        check_schema(Self::KIND, &self.schema)
    }
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, FormatError> {
    let r = rows.len();
    let c = rows.first().map(|row| row.len()).unwrap_or(0);
    if rows.iter().any(|row| row.len() != c) {
        return Err(FormatError::Invalid("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorReportFile {
    pub schema: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
    /// "nmf" or "psd".
    pub kind: String,
    pub accepted: bool,
    pub residual: String,
}

impl FactorReportFile {
    pub const KIND: &'static str = "factor-report";

    pub fn new(kind: &str, accepted: bool, residual: f64) -> Self {
        FactorReportFile {
            schema: schema_tag(Self::KIND),
            manifest: None,
            kind: kind.to_string(),
            accepted,
            residual: float_to_string(residual),
        }
    }
}

// ---------------------------------------------------------------------------
// Generic small reports (hmm / quasi / purify summaries)

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
    /// Free-form keyed values; floats in fixed precision.
    pub values: BTreeMap<String, String>,
}

impl ReportFile {
    pub const KIND: &'static str = "report";

    pub fn new() -> Self {
        ReportFile {
            schema: schema_tag(Self::KIND),
            manifest: None,
            values: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }
}

impl Default for ReportFile {
    fn default() -> Self {
        Self::new()
    }
}
