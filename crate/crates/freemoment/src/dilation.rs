//! Truncated isometric dilation of the GNS shifts, in the row-contraction
//! orientation T_i = B_i*: the space is 𝒦 = H′ ⊕ (F_{≤M} ⊗ 𝒟) with 𝒟 the
//! defect range of (I − T*T)^{1/2}, and
//! S_i(h ⊕ Σ e_γ⊗ξ_γ) = T_i h ⊕ (e_∅ ⊗ Π_𝒟Δι_i h + Σ_{|γ|<M} e_{iγ} ⊗ ξ_γ).
//!
//! Built this way the embedded H′ is invariant under every S_i* with a zero
//! block — S_i*J = J·B_i holds exactly — which is what makes the realization
//! and compression checks exact at finite depth instead of merely convergent.
//!
//! The family is a row isometry below the top Fock level but never a complete
//! one on a finite space. Where an identity genuinely needs range-complete
//! isometries (the projection-free moment formula), `equality_case_check`
//! extends the family one backward layer: new coordinates ξ_{j,w}, one per
//! letter j and wandering direction w of I − ΣS_iS_i*, with
//! Ŝ_i ξ_{j,w} = δ_{ij} d^{−1/2} w + c^{(i)}_{j,w} and mutually orthogonal
//! correction vectors c chosen so that Σ Ŝ_iŜ_i* = I on all of 𝒦. Only the
//! adjoints ever act in the check, and no Ŝ data is stored on the model.

use crate::error::{Error, Result};
use crate::gns::GnsModel;
use crate::kernel::{assemble_sigma, restrict, BlockKernel};
use crate::linalg::{self, CMatrix};
use crate::words::{enumerate_words, WordTable};

use num_complex::Complex64;

/// Absolute floor for eigenvalues of I − T*T before the construction refuses.
pub const CONTRACTION_FLOOR: f64 = 1e-10;

/// Relative rank cut for the defect space, matching the GNS rank policy.
pub const DEFECT_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct DilationModel {
    gns: GnsModel,
    m_fock: usize,
    fock_table: WordTable,
    defect_dim: usize,
    dim_k: usize,
    s: Vec<CMatrix>,
    w: CMatrix,
}

impl DilationModel {
    pub fn gns(&self) -> &GnsModel {
        &self.gns
    }

    pub fn d(&self) -> usize {
        self.gns.d()
    }

    pub fn n(&self) -> usize {
        self.gns.n()
    }

    /// Dimension of the embedded H′ (the range of P).
    pub fn r(&self) -> usize {
        self.gns.r()
    }

    pub fn m_fock(&self) -> usize {
        self.m_fock
    }

    pub fn defect_dim(&self) -> usize {
        self.defect_dim
    }

    pub fn dim_k(&self) -> usize {
        self.dim_k
    }

    pub fn s(&self) -> &[CMatrix] {
        &self.s
    }

    /// The isometry W = J·V_∅ : H → 𝒦.
    pub fn w(&self) -> &CMatrix {
        &self.w
    }

    /// P as a matrix: the projection onto the leading r coordinates.
    pub fn projection_p(&self) -> CMatrix {
        let mut p = CMatrix::zeros(self.dim_k, self.dim_k);
        for i in 0..self.r() {
            p[(i, i)] = Complex64::new(1.0, 0.0);
        }
        p
    }

    /// Compress a dim_k×dim_k operator to the embedded H′: J*·X·J.
    pub fn compress(&self, x: &CMatrix) -> CMatrix {
        x.view((0, 0), (self.r(), self.r())).into()
    }

    /// Number of coordinates below the top Fock level — the initial space of
    /// every S_i.
    pub fn low_dim(&self) -> usize {
        self.r() + self.fock_table.count_below(self.m_fock) * self.defect_dim
    }
}

/// Builds the truncated dilation at Fock level `m_fock`.
pub fn build_dilation(gns: GnsModel, m_fock: usize) -> Result<DilationModel> {
    let d = gns.d();
    let r = gns.r();
    let b = gns.shifts();

    // arg = I_{dr} − T*T with T = (B_1*, …, B_d*): blocks δ_ij I − B_i B_j*.
    let mut arg = CMatrix::identity(d * r, d * r);
    for i in 0..d {
        for j in 0..d {
            let block = &b[i] * b[j].adjoint();
            for row in 0..r {
                for col in 0..r {
                    arg[(i * r + row, j * r + col)] -= block[(row, col)];
                }
            }
        }
    }
    let arg = linalg::symmetrize(&arg);
    let eig = linalg::hermitian_eig(&arg, linalg::DEFAULT_HERMITICITY_TOL)?;
    let lambda_min = eig.values.first().copied().unwrap_or(0.0);
    if lambda_min < -CONTRACTION_FLOOR {
        return Err(Error::NotContractive { lambda_min });
    }
    let lambda_max = eig.values.last().copied().unwrap_or(0.0);
    let cut = DEFECT_RANK_TOL * lambda_max.max(1.0);

    // Defect basis (descending eigenvalue order) and the maps Π_𝒟Δι_i.
    let kept: Vec<usize> = (0..d * r).rev().filter(|&j| eig.values[j] > cut).collect();
    let defect_dim = kept.len();
    // row t of dmat_stack = √λ_t u_t^*, i.e. Π_𝒟Δ in defect coordinates.
    let mut dmat_stack = CMatrix::zeros(defect_dim, d * r);
    for (t, &j) in kept.iter().enumerate() {
        let s = eig.values[j].max(0.0).sqrt();
        for col in 0..d * r {
            dmat_stack[(t, col)] = eig.vectors[(col, j)].conj() * s;
        }
    }

    let fock_table = enumerate_words(d, m_fock)?;
    let fock_dim = fock_table.len();
    let dim_k = r + fock_dim * defect_dim;
    if dim_k > crate::kernel::KERNEL_DIM_LIMIT {
        return Err(Error::CapacityExceeded {
            what: "dilation space dimension",
            required: dim_k as u128,
            limit: crate::kernel::KERNEL_DIM_LIMIT,
        });
    }

    let one = Complex64::new(1.0, 0.0);
    let mut s_ops = Vec::with_capacity(d);
    for i in 0..d {
        let mut s = CMatrix::zeros(dim_k, dim_k);
        // H′ columns: T_i = B_i* into H′ rows, defect leg into the vacuum.
        for col in 0..r {
            for row in 0..r {
                s[(row, col)] = b[i][(col, row)].conj();
            }
            for t in 0..defect_dim {
                s[(r + t, col)] = dmat_stack[(t, i * r + col)];
            }
        }
        // Fock columns below the top level: e_γ ⊗ ξ ↦ e_{iγ} ⊗ ξ.
        for g in 0..fock_table.count_below(m_fock) {
            let target = fock_table.prepend_index(g, i + 1).expect("below top level");
            for t in 0..defect_dim {
                s[(r + target * defect_dim + t, r + g * defect_dim + t)] = one;
            }
        }
        s_ops.push(s);
    }

    let n = gns.n();
    let v0 = gns.v_block(0);
    let mut w = CMatrix::zeros(dim_k, n);
    for row in 0..r {
        for col in 0..n {
            w[(row, col)] = v0[(row, col)];
        }
    }

    Ok(DilationModel {
        gns,
        m_fock,
        fock_table,
        defect_dim,
        dim_k,
        s: s_ops,
        w,
    })
}

/// The backward orbit Y_β = (S^β)*W for all words up to `depth`, computed by
/// one adjoint application per child word.
fn backward_orbit(
    adjoints: &[CMatrix],
    w0: &CMatrix,
    table: &WordTable,
) -> Vec<CMatrix> {
    let mut orbit: Vec<CMatrix> = Vec::with_capacity(table.len());
    orbit.push(w0.clone());
    for idx in 1..table.len() {
        let (parent, letter) = table.parent_of(idx);
        orbit.push(&adjoints[letter - 1] * &orbit[parent]);
    }
    orbit
}

#[derive(Debug, Clone)]
pub struct RealizationReport {
    pub max_residual: f64,
    /// Residuals keyed by rendered word pair.
    pub per_pair: Vec<(String, String, f64)>,
    /// The scale 1 + ‖G‖_F residuals are judged against.
    pub scale: f64,
}

/// Checks K(α,β) = W*S^α P (S^β)*W for all word pairs up to `depth`.
pub fn realization_check(
    k: &BlockKernel,
    model: &DilationModel,
    depth: usize,
) -> Result<RealizationReport> {
    if depth > k.depth() || depth > model.m_fock {
        return Err(Error::DepthExceeded {
            requested: depth,
            available: k.depth().min(model.m_fock),
        });
    }
    let table = enumerate_words(model.d(), depth)?;
    let adjoints: Vec<CMatrix> = model.s.iter().map(|s| s.adjoint()).collect();
    let orbit = backward_orbit(&adjoints, &model.w, &table);
    let r = model.r();
    let n = model.n();

    // P projects onto the first r coordinates, so W*S^α P (S^β)*W is the
    // cross-Gram of the orbit's H′ components.
    let tops: Vec<CMatrix> = orbit.iter().map(|y| y.view((0, 0), (r, n)).into()).collect();
    let mut per_pair = Vec::with_capacity(table.len() * table.len());
    let mut max_residual = 0.0f64;
    for a in 0..table.len() {
        for bidx in 0..table.len() {
            let lhs = k.block(a, bidx);
            let rhs = tops[a].ad_mul(&tops[bidx]);
            let res = linalg::frob(&(lhs - rhs));
            max_residual = max_residual.max(res);
            per_pair.push((table.word(a).render(), table.word(bidx).render(), res));
        }
    }
    Ok(RealizationReport {
        max_residual,
        per_pair,
        scale: 1.0 + linalg::frob(k.gram()),
    })
}

#[derive(Debug, Clone)]
pub struct DominationIdentityReport {
    /// λ_min of P − ΣS_iPS_i* compressed to the backward-orbit span.
    pub margin: f64,
    pub pass: bool,
    /// Orthonormal basis size of span{(S^γ)*W u}.
    pub span_dim: usize,
    pub tol: f64,
}

/// Tolerance for the compressed-inequality margin.
pub const DOMINATION_IDENTITY_TOL: f64 = 1e-8;

/// Checks Σ_i S_i P S_i* ≤ P on span{(S^γ)*W u : |γ| ≤ gamma_depth}.
pub fn domination_identity_check(
    model: &DilationModel,
    k: &BlockKernel,
    gamma_depth: usize,
) -> Result<DominationIdentityReport> {
    if gamma_depth + 1 > k.depth() {
        return Err(Error::DepthExceeded {
            requested: gamma_depth,
            available: k.depth().saturating_sub(1),
        });
    }
    let table = enumerate_words(model.d(), gamma_depth)?;
    let adjoints: Vec<CMatrix> = model.s.iter().map(|s| s.adjoint()).collect();
    let orbit = backward_orbit(&adjoints, &model.w, &table);

    let dim_k = model.dim_k;
    let n = model.n();
    let mut span = CMatrix::zeros(dim_k, table.len() * n);
    for (idx, y) in orbit.iter().enumerate() {
        for row in 0..dim_k {
            for col in 0..n {
                span[(row, idx * n + col)] = y[(row, col)];
            }
        }
    }
    let basis = orthonormal_columns(&span);
    let span_dim = basis.ncols();

    // P − Σ S_iPS_i* applied through the low-rank form S_iP = S_i[:, 0..r].
    let r = model.r();
    let mut quad = CMatrix::zeros(span_dim, span_dim);
    {
        let top: CMatrix = basis.view((0, 0), (r, span_dim)).into();
        quad += top.ad_mul(&top); // basis* P basis
    }
    for s in &model.s {
        let si_p: CMatrix = s.view((0, 0), (dim_k, r)).into();
        let m = si_p.ad_mul(&basis); // r×span_dim = (S_iP)* basis
        quad -= m.ad_mul(&m);
    }
    let quad = linalg::symmetrize(&quad);
    let eig = linalg::hermitian_eig(&quad, linalg::DEFAULT_HERMITICITY_TOL)?;
    let margin = if span_dim == 0 { 0.0 } else { eig.values[0] };
    Ok(DominationIdentityReport {
        margin,
        pass: margin >= -DOMINATION_IDENTITY_TOL,
        span_dim,
        tol: DOMINATION_IDENTITY_TOL,
    })
}

/// Modified Gram–Schmidt with re-orthogonalization; drops columns whose
/// residual falls below 1e−10 of their original size.
fn orthonormal_columns(m: &CMatrix) -> CMatrix {
    let rows = m.nrows();
    let mut kept: Vec<crate::linalg::CVector> = Vec::new();
    for j in 0..m.ncols() {
        let mut v: crate::linalg::CVector = m.column(j).into();
        let original = v.norm();
        if original <= 1e-300 {
            continue;
        }
        for _ in 0..2 {
            for q in &kept {
                let c = q.dotc(&v);
                v -= q * c;
            }
        }
        if v.norm() <= 1e-10 * original {
            continue;
        }
        let norm = v.norm();
        kept.push(v / Complex64::new(norm, 0.0));
    }
    let mut out = CMatrix::zeros(rows, kept.len());
    for (j, q) in kept.iter().enumerate() {
        for row in 0..rows {
            out[(row, j)] = q[row];
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct EqualityCaseReport {
    /// max block distance between K and K_Σ on words up to the check depth.
    pub sigma_gap: f64,
    /// max residual of the projection-free formula K(α,β) = W*S^α(S^β)*W,
    /// with S extended one backward layer to a range-complete family.
    pub a5_residual: f64,
    pub depth: usize,
}

/// Measures how close the ensemble is to the equality case and how the
/// projection-free moment formula responds. The two move together: the
/// backward-extended family reproduces the formula exactly when K_Σ = K and
/// breaks it by Θ(‖K−K_Σ‖) otherwise.
pub fn equality_case_check(
    k: &BlockKernel,
    model: &DilationModel,
    depth: usize,
) -> Result<EqualityCaseReport> {
    let max_depth = k.depth().saturating_sub(1).min(model.m_fock.saturating_sub(1));
    if depth > max_depth {
        return Err(Error::DepthExceeded {
            requested: depth,
            available: max_depth,
        });
    }

    let restricted = restrict(k, depth)?;
    let sigma = assemble_sigma(&restrict(k, depth + 1)?)?;
    let m = restricted.table().len();
    let mut sigma_gap = 0.0f64;
    for a in 0..m {
        for b in 0..m {
            let diff = restricted.block(a, b) - sigma.block(a, b);
            sigma_gap = sigma_gap.max(linalg::frob(&diff));
        }
    }

    // One-layer backward completion. Wandering directions: eigenvectors of
    // I − ΣS_iS_i* with eigenvalue ≈ 1 (the operator is a projection up to
    // truncation noise, so the 0.5 threshold is unambiguous).
    let dim_k = model.dim_k;
    let d = model.d();
    let mut cover = CMatrix::identity(dim_k, dim_k);
    for s in &model.s {
        cover -= s * s.adjoint();
    }
    let cover = linalg::symmetrize(&cover);
    let eig = linalg::hermitian_eig(&cover, linalg::DEFAULT_HERMITICITY_TOL)?;
    let wandering: Vec<usize> = (0..dim_k).filter(|&j| eig.values[j] > 0.5).collect();
    let w0 = wandering.len();

    // Extended adjoints on 𝒦 ⊕ ℂ^{d·w0}:
    //   Ŝ_j* v   = S_j* v ⊕ d^{−1/2} (⟨w, v⟩)_w in slot j,
    //   Ŝ_j* ξ   = 0.
    // (The correction vectors c live one layer further out; adjoints starting
    // from 𝒦 never reach them, so they need no coordinates here.)
    let ext_dim = dim_k + d * w0;
    let scale = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    let mut ext_adjoints = Vec::with_capacity(d);
    for (j, s) in model.s.iter().enumerate() {
        let mut adj = CMatrix::zeros(ext_dim, ext_dim);
        let sa = s.adjoint();
        for row in 0..dim_k {
            for col in 0..dim_k {
                adj[(row, col)] = sa[(row, col)];
            }
        }
        for (t, &widx) in wandering.iter().enumerate() {
            for col in 0..dim_k {
                adj[(dim_k + j * w0 + t, col)] = eig.vectors[(col, widx)].conj() * scale;
            }
        }
        ext_adjoints.push(adj);
    }

    let n = model.n();
    let mut w_ext = CMatrix::zeros(ext_dim, n);
    for row in 0..dim_k {
        for col in 0..n {
            w_ext[(row, col)] = model.w[(row, col)];
        }
    }
    let table = enumerate_words(d, depth)?;
    let orbit = backward_orbit(&ext_adjoints, &w_ext, &table);

    let mut a5_residual = 0.0f64;
    for a in 0..table.len() {
        for b in 0..table.len() {
            let rhs = orbit[a].ad_mul(&orbit[b]);
            let res = linalg::frob(&(k.block(a, b) - rhs));
            a5_residual = a5_residual.max(res);
        }
    }
    Ok(EqualityCaseReport {
        sigma_gap,
        a5_residual,
        depth,
    })
}

#[derive(Debug, Clone)]
pub struct CuntzReport {
    /// max_{i,j} ‖S_i*S_j − δ_ij·Π_low‖ — the row-isometry certificate below
    /// the top Fock level.
    pub isometry_residual: f64,
    /// rank(I − ΣS_iS_i*): how many directions no S_i range covers. Reported,
    /// never asserted — it cannot vanish on a finite space for d ≥ 2.
    pub completeness_defect_rank: usize,
    /// Set when the defect space is zero-dimensional (d=1 unitary case) and
    /// the Fock layers are absent.
    pub degenerate: bool,
}

pub fn cuntz_residual(model: &DilationModel) -> Result<CuntzReport> {
    let dim_k = model.dim_k;
    let low = model.low_dim();
    let d = model.d();

    let mut isometry_residual = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let mut e = model.s[i].ad_mul(&model.s[j]);
            if i == j {
                for t in 0..low {
                    e[(t, t)] -= Complex64::new(1.0, 0.0);
                }
            }
            isometry_residual = isometry_residual.max(linalg::operator_norm(&e)?);
        }
    }

    // trace(ΣS_iS_i*) = Σ‖S_i‖_F² counts the covered directions; the spectrum
    // is {0,1} up to noise, so the trace is integral and the defect is the
    // dimension shortfall. Fall back to counting eigenvalues if the trace
    // lands away from an integer.
    let trace: f64 = model.s.iter().map(|s| linalg::frob(s).powi(2)).sum();
    let rounded = trace.round();
    let completeness_defect_rank = if (trace - rounded).abs() <= 1e-6 && rounded >= 0.0 {
        dim_k - rounded as usize
    } else {
        let mut cover = CMatrix::zeros(dim_k, dim_k);
        for s in &model.s {
            cover += s * s.adjoint();
        }
        let eig = linalg::hermitian_eig(&cover, linalg::DEFAULT_HERMITICITY_TOL)?;
        eig.values.iter().filter(|&&v| v < 0.5).count()
    };

    Ok(CuntzReport {
        isometry_residual,
        completeness_defect_rank,
        degenerate: model.defect_dim == 0,
    })
}
