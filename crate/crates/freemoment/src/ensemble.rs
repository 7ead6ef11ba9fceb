//! Finitely supported random operator tuples with exact expectations.
//!
//! A probability space here is a finite list of weighted scenarios, so every
//! expectation is a finite sum — no sampling error anywhere downstream. Two
//! seeded generators produce the standard test families: strict row
//! contractions (Σ A_iA_i* = (1−slack)·I at the top eigenvalue, exactly by
//! scaling) and coisometry rows sliced from Haar unitaries (Σ A_iA_i* = I).

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::ncpoly::{NcPoly, Side};
use crate::words::Word;

/// One atom of the finite probability space: a weight and a d-tuple of
/// n×n matrices.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub weight: f64,
    pub ops: Vec<CMatrix>,
}

/// A d-tuple of random operators on an n-dimensional space, supported on
/// finitely many scenarios. Weights sum to 1 within 1e-12 after construction.
#[derive(Debug, Clone)]
pub struct OperatorEnsemble {
    d: usize,
    n: usize,
    label: String,
    scenarios: Vec<Scenario>,
}

/// A single random operator sharing its parent ensemble's probability space:
/// the k-th scenario weight here equals the parent's k-th weight.
#[derive(Debug, Clone)]
pub struct RandomOperator {
    n: usize,
    scenarios: Vec<(f64, CMatrix)>,
}

/// Weight sums farther than this from 1 are rejected instead of renormalized.
const WEIGHT_SUM_WINDOW: f64 = 1e-9;

impl OperatorEnsemble {
    /// Validates and renormalizes. The weight sum must land in
    /// [1−1e−9, 1+1e−9]; it is then divided out exactly so downstream code can
    /// rely on Σw = 1 within 1e−12.
    pub fn new(
        d: usize,
        n: usize,
        label: impl Into<String>,
        mut scenarios: Vec<Scenario>,
    ) -> Result<OperatorEnsemble> {
        if d < 1 || n < 1 {
            return Err(Error::Validation(format!(
                "tuple size and dimension must be positive, got d={d}, n={n}"
            )));
        }
        if scenarios.is_empty() {
            return Err(Error::Validation("ensemble has no scenarios".into()));
        }
        for (k, sc) in scenarios.iter().enumerate() {
            if !(sc.weight.is_finite() && sc.weight > 0.0) {
                return Err(Error::Validation(format!(
                    "scenario {k}: weight {} is not a positive real",
                    sc.weight
                )));
            }
            if sc.ops.len() != d {
                return Err(Error::Validation(format!(
                    "scenario {k}: expected {d} operators, got {}",
                    sc.ops.len()
                )));
            }
            for (i, m) in sc.ops.iter().enumerate() {
                if m.nrows() != n || m.ncols() != n {
                    return Err(Error::Validation(format!(
                        "scenario {k}, operator {}: expected {n}x{n}, got {}x{}",
                        i + 1,
                        m.nrows(),
                        m.ncols()
                    )));
                }
                if !linalg::all_finite(m) {
                    return Err(Error::Validation(format!(
                        "scenario {k}, operator {}: non-finite entry",
                        i + 1
                    )));
                }
            }
        }
        let sum: f64 = scenarios.iter().map(|s| s.weight).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_WINDOW {
            return Err(Error::Validation(format!(
                "scenario weights sum to {sum}, outside [1-1e-9, 1+1e-9]"
            )));
        }
        for sc in &mut scenarios {
            sc.weight /= sum;
        }
        Ok(OperatorEnsemble {
            d,
            n,
            label: label.into(),
            scenarios,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn num_scenarios(&self) -> usize {
        self.scenarios.len()
    }
}

/// E[A^α (A^β)*]: the exact weighted sum over scenarios, n×n.
pub fn word_moment(e: &OperatorEnsemble, alpha: &Word, beta: &Word) -> Result<CMatrix> {
    if alpha.d() != e.d || beta.d() != e.d {
        return Err(Error::AlphabetMismatch(format!(
            "words over alphabets of size {} and {} applied to a {}-tuple",
            alpha.d(),
            beta.d(),
            e.d
        )));
    }
    let n = e.n;
    let mut acc = CMatrix::zeros(n, n);
    for sc in &e.scenarios {
        let pa = word_product(&sc.ops, alpha, n);
        let pb = word_product(&sc.ops, beta, n);
        acc += (pa * pb.adjoint()) * Complex64::new(sc.weight, 0.0);
    }
    Ok(acc)
}

/// A^α = A_{i1}···A_{ik} for α = i1…ik; the empty word gives the identity.
pub fn word_product(ops: &[CMatrix], alpha: &Word, n: usize) -> CMatrix {
    let mut prod = CMatrix::identity(n, n);
    for &i in alpha.letters() {
        prod = prod * &ops[i - 1];
    }
    prod
}

/// Scenario-wise polynomial evaluation: X(ω) = p(A(ω)).
pub fn apply_random(e: &OperatorEnsemble, p: &NcPoly) -> Result<RandomOperator> {
    if p.d() != e.d {
        return Err(Error::AlphabetMismatch(format!(
            "polynomial over alphabet of size {} applied to a {}-tuple",
            p.d(),
            e.d
        )));
    }
    let mut scenarios = Vec::with_capacity(e.scenarios.len());
    for sc in &e.scenarios {
        scenarios.push((sc.weight, p.evaluate(&sc.ops, Side::Direct)?));
    }
    Ok(RandomOperator { n: e.n, scenarios })
}

impl RandomOperator {
    pub fn new(n: usize, scenarios: Vec<(f64, CMatrix)>) -> RandomOperator {
        RandomOperator { n, scenarios }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scenarios(&self) -> &[(f64, CMatrix)] {
        &self.scenarios
    }

    /// E[X]: plain weighted mean.
    pub fn expectation(&self) -> CMatrix {
        let mut acc = CMatrix::zeros(self.n, self.n);
        for (w, m) in &self.scenarios {
            acc += m * Complex64::new(*w, 0.0);
        }
        acc
    }

    /// E[X X*]: the averaged square driving the mean-square seminorm.
    pub fn second_moment(&self) -> CMatrix {
        let mut acc = CMatrix::zeros(self.n, self.n);
        for (w, m) in &self.scenarios {
            acc += (m * m.adjoint()) * Complex64::new(*w, 0.0);
        }
        acc
    }

    pub fn sub(&self, other: &RandomOperator) -> Result<RandomOperator> {
        if self.n != other.n || self.scenarios.len() != other.scenarios.len() {
            return Err(Error::Dimension(
                "random operators live on different probability spaces".into(),
            ));
        }
        let scenarios = self
            .scenarios
            .iter()
            .zip(&other.scenarios)
            .map(|((w, a), (_, b))| (*w, a - b))
            .collect();
        Ok(RandomOperator { n: self.n, scenarios })
    }
}

// ---------------------------------------------------------------------------
// Seeded generators
// ---------------------------------------------------------------------------

/// Per-scenario RNG: one master seed, scenario k drawn from stream k+1.
/// Stream 0 is reserved for probe vectors elsewhere, so regenerating a single
/// scenario never shifts its neighbours.
fn scenario_rng(seed: u64, scenario_index: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(scenario_index as u64 + 1);
    rng
}

/// One standard normal via Box–Muller. The (0,1] shift keeps ln away from 0.
fn gaussian(rng: &mut ChaCha12Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Standard complex Gaussian: E|z|² = 1.
pub(crate) fn complex_gaussian(rng: &mut ChaCha12Rng) -> Complex64 {
    Complex64::new(gaussian(rng), gaussian(rng)) * std::f64::consts::FRAC_1_SQRT_2
}

fn ginibre(rng: &mut ChaCha12Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Ascending weights j+1, j=0..k, normalized — distinguishable scenarios, so
/// weight-handling bugs can't hide behind uniform weights.
fn default_weights(k: usize) -> Vec<f64> {
    let total: f64 = (1..=k).map(|j| j as f64).sum();
    (1..=k).map(|j| j as f64 / total).collect()
}

/// Strict row contractions: per scenario, d Ginibre draws scaled so that
/// λ_max(Σ A_iA_i*) = 1 − slack exactly (up to one floating multiply).
pub fn gen_row_contraction_ensemble(
    d: usize,
    n: usize,
    k_scenarios: usize,
    seed: u64,
    slack: f64,
) -> Result<OperatorEnsemble> {
    if !(slack > 0.0 && slack < 1.0) {
        return Err(Error::Validation(format!(
            "slack must lie in (0,1), got {slack}"
        )));
    }
    if d < 1 || n < 1 || k_scenarios < 1 {
        return Err(Error::Validation(
            "tuple size, dimension, and scenario count must be positive".into(),
        ));
    }
    let weights = default_weights(k_scenarios);
    let mut scenarios = Vec::with_capacity(k_scenarios);
    for (k, &weight) in weights.iter().enumerate() {
        let mut rng = scenario_rng(seed, k);
        let g: Vec<CMatrix> = (0..d).map(|_| ginibre(&mut rng, n, n)).collect();
        let mut row_square = CMatrix::zeros(n, n);
        for gi in &g {
            row_square += gi * gi.adjoint();
        }
        let (_, lambda_max) = linalg::psd_margin(&row_square)?;
        let c = Complex64::new(((1.0 - slack) / lambda_max).sqrt(), 0.0);
        let ops = g.into_iter().map(|gi| gi * c).collect();
        scenarios.push(Scenario { weight, ops });
    }
    OperatorEnsemble::new(
        d,
        n,
        format!("row_contraction(d={d},n={n},k={k_scenarios},seed={seed},slack={slack})"),
        scenarios,
    )
}

/// Coisometry rows: per scenario, a Haar unitary U on C^{dn} (QR of Ginibre
/// with the R-diagonal phase fix), first n rows sliced into d blocks, giving
/// Σ A_iA_i* = I_n to working precision.
pub fn gen_coisometry_ensemble(
    d: usize,
    n: usize,
    k_scenarios: usize,
    seed: u64,
) -> Result<OperatorEnsemble> {
    if d < 1 || n < 1 || k_scenarios < 1 {
        return Err(Error::Validation(
            "tuple size, dimension, and scenario count must be positive".into(),
        ));
    }
    let weights = default_weights(k_scenarios);
    let mut scenarios = Vec::with_capacity(k_scenarios);
    for (k, &weight) in weights.iter().enumerate() {
        let mut rng = scenario_rng(seed, k);
        let u = haar_unitary(&mut rng, d * n);
        let mut ops = Vec::with_capacity(d);
        for i in 0..d {
            let mut a = CMatrix::zeros(n, n);
            for r in 0..n {
                for c in 0..n {
                    a[(r, c)] = u[(r, i * n + c)];
                }
            }
            ops.push(a);
        }
        scenarios.push(Scenario { weight, ops });
    }
    OperatorEnsemble::new(
        d,
        n,
        format!("coisometry(d={d},n={n},k={k_scenarios},seed={seed})"),
        scenarios,
    )
}

/// QR of a Ginibre matrix, with each Q column rotated by the phase of the
/// matching R diagonal entry — the standard correction that makes the law
/// exactly Haar rather than merely unitary.
fn haar_unitary(rng: &mut ChaCha12Rng, m: usize) -> CMatrix {
    let g = ginibre(rng, m, m);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..m {
        let rjj = r[(j, j)];
        let mag = rjj.norm();
        let phase = if mag > 0.0 {
            rjj / mag
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..m {
            q[(i, j)] *= phase;
        }
    }
    q
}

// ---------------------------------------------------------------------------
// Scenario files
// ---------------------------------------------------------------------------

/// The matrix container shared by scenario files and kernel exports:
/// row-major real and imaginary parts.
#[derive(Serialize, Deserialize)]
pub(crate) struct MatrixJson {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl MatrixJson {
    pub(crate) fn from_matrix(m: &CMatrix) -> MatrixJson {
        matrix_to_json(m)
    }
}

#[derive(Serialize, Deserialize)]
struct ScenarioJson {
    weight: f64,
    ops: Vec<MatrixJson>,
}

#[derive(Serialize, Deserialize)]
struct EnsembleJson {
    d: usize,
    n: usize,
    label: String,
    scenarios: Vec<ScenarioJson>,
}

fn matrix_to_json(m: &CMatrix) -> MatrixJson {
    let (rows, cols) = (m.nrows(), m.ncols());
    let mut re = Vec::with_capacity(rows * cols);
    let mut im = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            re.push(m[(r, c)].re);
            im.push(m[(r, c)].im);
        }
    }
    MatrixJson { rows, cols, re, im }
}

fn matrix_from_json(j: &MatrixJson) -> Result<CMatrix> {
    let len = j
        .rows
        .checked_mul(j.cols)
        .ok_or_else(|| Error::Validation("matrix dimensions overflow".into()))?;
    if j.re.len() != len || j.im.len() != len {
        return Err(Error::Validation(format!(
            "matrix {}x{} needs {} entries, got re: {}, im: {}",
            j.rows,
            j.cols,
            len,
            j.re.len(),
            j.im.len()
        )));
    }
    Ok(CMatrix::from_fn(j.rows, j.cols, |r, c| {
        Complex64::new(j.re[r * j.cols + c], j.im[r * j.cols + c])
    }))
}

/// Reads and validates a scenario file (see the module docs for the format).
pub fn load_ensemble(path: impl AsRef<Path>) -> Result<OperatorEnsemble> {
    let text = fs::read_to_string(path)?;
    let parsed: EnsembleJson = serde_json::from_str(&text)?;
    let scenarios = parsed
        .scenarios
        .iter()
        .map(|sj| {
            Ok(Scenario {
                weight: sj.weight,
                ops: sj.ops.iter().map(matrix_from_json).collect::<Result<_>>()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    OperatorEnsemble::new(parsed.d, parsed.n, parsed.label, scenarios)
}

/// Writes the scenario file format that `load_ensemble` reads. Floats print
/// in shortest round-trip form, so save→load is exact.
pub fn save_ensemble(path: impl AsRef<Path>, e: &OperatorEnsemble) -> Result<()> {
    let json = EnsembleJson {
        d: e.d,
        n: e.n,
        label: e.label.clone(),
        scenarios: e
            .scenarios
            .iter()
            .map(|sc| ScenarioJson {
                weight: sc.weight,
                ops: sc.ops.iter().map(matrix_to_json).collect(),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&json)?;
    fs::write(path, text + "\n")?;
    Ok(())
}
