//! The block moment kernel K(α,β) = E[A^α (A^β)*] of an ensemble, its
//! letter-summed companion K_Σ(α,β) = Σ_i K(αi,βi), and the two decisions
//! hanging off them: positivity of K and domination K_Σ ≤ K.
//!
//! Everything is assembled in a fixed order (scenarios outermost, graded word
//! pairs inside), so a kernel restricted to a smaller depth is bit-for-bit the
//! leading principal submatrix of the deeper kernel.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::ensemble::OperatorEnsemble;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::words::{enumerate_words, Word, WordTable};

/// Dense Gram matrices beyond this edge length are refused: the eigensolver
/// cost grows cubically and desk-scale inputs never get close.
pub const KERNEL_DIM_LIMIT: usize = 2048;

/// Relative tolerance for the Hermitian-symmetry self-check of assembled and
/// hand-built kernels.
pub const KERNEL_HERMITICITY_TOL: f64 = 1e-12;

/// Default relative tolerance for the positivity and domination margins.
pub const DEFAULT_PD_TOL: f64 = 1e-10;

/// Block Gram matrix over a graded word table: block (α,β) is the n×n
/// moment K(α,β), laid out in table order.
#[derive(Debug, Clone)]
pub struct BlockKernel {
    table: WordTable,
    n: usize,
    g: CMatrix,
}

impl BlockKernel {
    /// Wraps an existing Gram matrix; checks shape and Hermitian symmetry.
    pub fn from_parts(table: WordTable, n: usize, g: CMatrix) -> Result<BlockKernel> {
        let dim = table.len() * n;
        if g.nrows() != dim || g.ncols() != dim {
            return Err(Error::Dimension(format!(
                "kernel over {} words with block size {n} needs a {dim}x{dim} matrix, got {}x{}",
                table.len(),
                g.nrows(),
                g.ncols()
            )));
        }
        let defect = linalg::hermitian_defect(&g);
        let scale = linalg::frob(&g).max(1.0);
        if defect > KERNEL_HERMITICITY_TOL * scale {
            return Err(Error::NonHermitian {
                defect,
                tol: KERNEL_HERMITICITY_TOL * scale,
            });
        }
        Ok(BlockKernel { table, n, g })
    }

    pub fn table(&self) -> &WordTable {
        &self.table
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.table.d()
    }

    /// Word depth N of the underlying table.
    pub fn depth(&self) -> usize {
        self.table.max_len()
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn gram(&self) -> &CMatrix {
        &self.g
    }

    /// Copy of the n×n block at word indices (a, b).
    pub fn block(&self, a: usize, b: usize) -> CMatrix {
        self.g.view((a * self.n, b * self.n), (self.n, self.n)).into()
    }

    /// Copy of the block for a word pair.
    pub fn block_of(&self, alpha: &Word, beta: &Word) -> Result<CMatrix> {
        let a = self.table.index_of(alpha).ok_or_else(|| {
            Error::AlphabetMismatch(format!("word {alpha} is outside the kernel's table"))
        })?;
        let b = self.table.index_of(beta).ok_or_else(|| {
            Error::AlphabetMismatch(format!("word {beta} is outside the kernel's table"))
        })?;
        Ok(self.block(a, b))
    }
}

/// Assembles K up to word depth `depth`. Word products are built once per
/// scenario by extending each word's parent product with one letter.
pub fn assemble_kernel(e: &OperatorEnsemble, depth: usize) -> Result<BlockKernel> {
    let table = enumerate_words(e.d(), depth)?;
    let m = table.len();
    let n = e.n();
    let dim = m * n;
    if dim > KERNEL_DIM_LIMIT {
        return Err(Error::CapacityExceeded {
            what: "kernel dimension",
            required: dim as u128,
            limit: KERNEL_DIM_LIMIT,
        });
    }
    let mut g = CMatrix::zeros(dim, dim);
    for sc in e.scenarios() {
        // products[idx] = A^{word(idx)} for this scenario.
        let mut products: Vec<CMatrix> = Vec::with_capacity(m);
        products.push(CMatrix::identity(n, n));
        for idx in 1..m {
            let (parent, letter) = table.parent_of(idx);
            products.push(&products[parent] * &sc.ops[letter - 1]);
        }
        let w = Complex64::new(sc.weight, 0.0);
        for a in 0..m {
            for b in 0..m {
                let block = (&products[a] * products[b].adjoint()) * w;
                for r in 0..n {
                    for c in 0..n {
                        g[(a * n + r, b * n + c)] += block[(r, c)];
                    }
                }
            }
        }
    }
    BlockKernel::from_parts(table, n, g)
}

/// Leading principal part of the kernel down to word depth `depth` — bitwise
/// identical to assembling at that depth directly (graded ordering plus fixed
/// summation order make the same additions happen in the same order).
pub fn restrict(k: &BlockKernel, depth: usize) -> Result<BlockKernel> {
    if depth > k.depth() {
        return Err(Error::DepthExceeded {
            requested: depth,
            available: k.depth(),
        });
    }
    let table = enumerate_words(k.d(), depth)?;
    let dim = table.len() * k.n;
    let g: CMatrix = k.g.view((0, 0), (dim, dim)).into();
    Ok(BlockKernel { table, n: k.n, g })
}

/// K_Σ over W_{depth−1}: block (α,β) = Σ_{i=1}^d K(αi, βi), read straight out
/// of the input's blocks. For d=1 this is exactly the index-shifted kernel.
pub fn assemble_sigma(k: &BlockKernel) -> Result<BlockKernel> {
    if k.depth() == 0 {
        return Err(Error::DepthExceeded {
            requested: 1,
            available: 0,
        });
    }
    let table = enumerate_words(k.d(), k.depth() - 1)?;
    let m = table.len();
    let n = k.n;
    let mut g = CMatrix::zeros(m * n, m * n);
    for a in 0..m {
        for b in 0..m {
            for i in 1..=k.d() {
                let ca = k.table.child_index(a, i).expect("depth checked above");
                let cb = k.table.child_index(b, i).expect("depth checked above");
                for r in 0..n {
                    for c in 0..n {
                        g[(a * n + r, b * n + c)] += k.g[(ca * n + r, cb * n + c)];
                    }
                }
            }
        }
    }
    Ok(BlockKernel { table, n, g })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PdVerdict {
    Psd,
    NotPsd,
}

#[derive(Debug, Clone, Serialize)]
pub struct PdReport {
    pub verdict: PdVerdict,
    /// λ_min of the Gram matrix.
    pub margin: f64,
    pub lambda_max: f64,
    /// Relative tolerance the margin was judged against.
    pub tol: f64,
}

/// Positivity of the kernel: PSD iff λ_min ≥ −tol·max(1, λ_max).
pub fn pd_check(k: &BlockKernel, tol: f64) -> Result<PdReport> {
    let (margin, lambda_max) = linalg::psd_margin(&k.g)?;
    let verdict = if margin >= -tol * lambda_max.max(1.0) {
        PdVerdict::Psd
    } else {
        PdVerdict::NotPsd
    };
    Ok(PdReport {
        verdict,
        margin,
        lambda_max,
        tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DominationVerdict {
    Dominated,
    NotDominated,
}

/// One block of the most-negative eigenvector of K − K_Σ: the word and the
/// vector sitting in its n-dimensional slot.
#[derive(Debug, Clone)]
pub struct WitnessPair {
    pub word: Word,
    pub component: CVector,
}

#[derive(Debug, Clone)]
pub struct DominationReport {
    pub verdict: DominationVerdict,
    /// λ_min of restrict(K) − K_Σ.
    pub margin: f64,
    /// λ_max of the restricted K, the scale the margin is judged against.
    pub lambda_max_restricted: f64,
    /// Word depth the difference kernel lives on (N−1).
    pub depth: usize,
    pub tol: f64,
    /// Present on NotDominated: the failing quadratic-form direction,
    /// decoded block by block.
    pub witness: Option<Vec<WitnessPair>>,
}

impl DominationReport {
    /// Human-readable witness lines: word ↦ block norm.
    pub fn witness_lines(&self) -> Vec<String> {
        match &self.witness {
            None => Vec::new(),
            Some(pairs) => pairs
                .iter()
                .map(|p| format!("{} -> |component| = {:.6e}", p.word, p.component.norm()))
                .collect(),
        }
    }
}

/// Decides K_Σ ≤ K on W_{N−1}. The difference kernel needs moments one level
/// deeper than it lives on, which is why the input's own depth N must be ≥ 1.
pub fn pd_order_check(k: &BlockKernel, tol: f64) -> Result<DominationReport> {
    let restricted = restrict(k, k.depth().checked_sub(1).ok_or(Error::DepthExceeded {
        requested: 1,
        available: 0,
    })?)?;
    let sigma = assemble_sigma(k)?;
    let diff = &restricted.g - &sigma.g;
    let eig = linalg::hermitian_eig(&diff, linalg::DEFAULT_HERMITICITY_TOL)?;
    let margin = eig.values[0];
    let (_, lambda_max_restricted) = linalg::psd_margin(&restricted.g)?;
    let verdict = if margin >= -tol * lambda_max_restricted.max(1.0) {
        DominationVerdict::Dominated
    } else {
        DominationVerdict::NotDominated
    };
    let witness = if verdict == DominationVerdict::NotDominated {
        let v = eig.vectors.column(0);
        let n = k.n;
        let pairs = restricted
            .table
            .words()
            .iter()
            .enumerate()
            .map(|(idx, w)| WitnessPair {
                word: w.clone(),
                component: CVector::from_iterator(n, (0..n).map(|r| v[idx * n + r])),
            })
            .filter(|p| p.component.norm() > 1e-12)
            .collect();
        Some(pairs)
    } else {
        None
    };
    Ok(DominationReport {
        verdict,
        margin,
        lambda_max_restricted,
        depth: restricted.table.max_len(),
        tol,
        witness,
    })
}

#[derive(Serialize)]
struct KernelJson {
    d: usize,
    n: usize,
    depth: usize,
    words: Vec<String>,
    gram: crate::ensemble::MatrixJson,
}

/// Writes the kernel in the scenario-file matrix container, with word labels.
pub fn export_kernel(path: impl AsRef<Path>, k: &BlockKernel) -> Result<()> {
    let json = KernelJson {
        d: k.d(),
        n: k.n,
        depth: k.depth(),
        words: k.table.words().iter().map(|w| w.render()).collect(),
        gram: crate::ensemble::MatrixJson::from_matrix(&k.g),
    };
    let text = serde_json::to_string_pretty(&json)?;
    fs::write(path, text + "\n")?;
    Ok(())
}
