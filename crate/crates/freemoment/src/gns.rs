//! Kolmogorov/GNS factorization of a positive block kernel, K(α,β) = V_α*V_β,
//! and the shift operators B_i V_α = V_{αi} it carries when the kernel
//! dominates its letter-summed companion.
//!
//! H′ is the column space of the factor F (rank r). The shifts are defined on
//! the span of the low-order factors and extended by zero on its
//! orthocomplement, which keeps Σ B_i*B_i ≤ I without inventing dynamics on
//! directions the words never reach.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::{pd_order_check, BlockKernel, DominationVerdict};
use crate::linalg::{self, CMatrix};
use crate::words::{Word, WordTable};

/// Relative rank cut for the factorization and every projection built on it.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// The shift-defining relations must hold to this residual (relative to
/// max(1, ‖F‖_F)); worse means the rank cut swallowed directions the shifts
/// still need.
pub const SHIFT_RESIDUAL_LIMIT: f64 = 1e-6;

/// Pass bound for λ_max(Σ B_i*B_i).
pub const COLUMN_CONTRACTION_TOL: f64 = 1e-8;

/// The factor half of the model: G = F*F with F of full row rank r.
/// Column block α of F is the operator V_α: H → H′.
#[derive(Debug, Clone)]
pub struct GnsFactor {
    table: WordTable,
    n: usize,
    r: usize,
    f: CMatrix,
}

impl GnsFactor {
    pub fn table(&self) -> &WordTable {
        &self.table
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Rank of H′.
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn f(&self) -> &CMatrix {
        &self.f
    }

    /// V_α for the word at table index `idx`: the r×n column block of F.
    pub fn v_block(&self, idx: usize) -> CMatrix {
        self.f.view((0, idx * self.n), (self.r, self.n)).into()
    }

    /// max over word pairs of ‖V_α*V_β − K(α,β)‖_F.
    pub fn factorization_residual(&self, k: &BlockKernel) -> f64 {
        let m = self.table.len();
        let mut worst = 0.0f64;
        let gram = self.f.ad_mul(&self.f);
        for a in 0..m {
            for b in 0..m {
                let mut diff = 0.0f64;
                for row in 0..self.n {
                    for col in 0..self.n {
                        diff += (gram[(a * self.n + row, b * self.n + col)]
                            - k.gram()[(a * self.n + row, b * self.n + col)])
                        .norm_sqr();
                    }
                }
                worst = worst.max(diff.sqrt());
            }
        }
        worst
    }
}

/// Eigendecomposes G, keeps the eigenpairs above rank_tol·λ_max (descending
/// order), and returns F = Λ^{1/2}U* on the kept rows.
pub fn kolmogorov_factorize(k: &BlockKernel, rank_tol: f64) -> Result<GnsFactor> {
    let eig = linalg::hermitian_eig(k.gram(), linalg::DEFAULT_HERMITICITY_TOL)?;
    let dim = k.dim();
    let lambda_max = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    let lambda_min = eig.values.first().copied().unwrap_or(0.0);
    if lambda_min < -rank_tol * lambda_max {
        return Err(Error::NotPsd {
            lambda_min,
            band: rank_tol * lambda_max,
        });
    }
    let cut = rank_tol * lambda_max;
    let kept: Vec<usize> = (0..dim).rev().filter(|&j| eig.values[j] > cut).collect();
    let r = kept.len();
    let mut f = CMatrix::zeros(r, dim);
    for (row, &j) in kept.iter().enumerate() {
        let s = eig.values[j].sqrt();
        for col in 0..dim {
            f[(row, col)] = eig.vectors[(col, j)].conj() * s;
        }
    }
    Ok(GnsFactor {
        table: k.table().clone(),
        n: k.n(),
        r,
        f,
    })
}

/// The full model: factor, the projection Q onto the low-order span, and the
/// d shift operators with their construction residuals.
#[derive(Debug, Clone)]
pub struct GnsModel {
    factor: GnsFactor,
    q: CMatrix,
    b: Vec<CMatrix>,
    shift_residual: f64,
    well_definedness_residual: f64,
}

impl GnsModel {
    pub fn factor(&self) -> &GnsFactor {
        &self.factor
    }

    pub fn table(&self) -> &WordTable {
        &self.factor.table
    }

    pub fn n(&self) -> usize {
        self.factor.n
    }

    pub fn r(&self) -> usize {
        self.factor.r
    }

    pub fn d(&self) -> usize {
        self.factor.table.d()
    }

    /// Projection onto span{V_α u : |α| ≤ N−1} inside H′.
    pub fn q(&self) -> &CMatrix {
        &self.q
    }

    pub fn shifts(&self) -> &[CMatrix] {
        &self.b
    }

    pub fn v_block(&self, idx: usize) -> CMatrix {
        self.factor.v_block(idx)
    }

    /// max_i ‖B_i·F_low − F_shifted,i‖_F / max(1, ‖F‖_F).
    pub fn shift_residual(&self) -> f64 {
        self.shift_residual
    }

    /// Shift-relation residual along the most fragile direction: the bottom
    /// eigenvector of the low-order Gram pushed through the defining
    /// relations. Catches silent inconsistency when domination is borderline.
    pub fn well_definedness_residual(&self) -> f64 {
        self.well_definedness_residual
    }

    /// B^{α̃}: the word-reversed shift product, so that V_α = B^{α̃} V_∅.
    pub fn shift_word_product(&self, alpha: &Word) -> CMatrix {
        let mut prod = CMatrix::identity(self.factor.r, self.factor.r);
        for &letter in alpha.letters().iter().rev() {
            prod = &prod * &self.b[letter - 1];
        }
        prod
    }
}

/// Builds Q and the shifts B_i on top of a factorization. Refuses when the
/// kernel is not dominated (the relations would be inconsistent) and when the
/// least-squares relations do not close to SHIFT_RESIDUAL_LIMIT.
pub fn build_shifts(
    factor: GnsFactor,
    k: &BlockKernel,
    pd_tol: f64,
    rank_tol: f64,
) -> Result<GnsModel> {
    let domination = pd_order_check(k, pd_tol)?;
    if domination.verdict == DominationVerdict::NotDominated {
        return Err(Error::NotDominated {
            margin: domination.margin,
        });
    }
    let table = &factor.table;
    let depth = table.max_len();
    if depth == 0 {
        return Err(Error::DepthExceeded {
            requested: 1,
            available: 0,
        });
    }
    let n = factor.n;
    let r = factor.r;
    let m_low = table.count_below(depth);
    let low_cols = m_low * n;
    let f_low: CMatrix = factor.f.view((0, 0), (r, low_cols)).into();

    // Gram of the low-order factor columns; its eigenspaces give both the
    // range projection Q and the pseudoinverse used for the solve.
    let gram_low = &f_low * f_low.adjoint();
    let eig = linalg::hermitian_eig(&gram_low, linalg::DEFAULT_HERMITICITY_TOL)?;
    let lambda_max = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    let cut = rank_tol * lambda_max;
    let kept: Vec<usize> = (0..r).filter(|&j| eig.values[j] > cut).collect();
    let mut q = CMatrix::zeros(r, r);
    let mut pinv = CMatrix::zeros(r, r);
    for &j in &kept {
        let u = eig.vectors.column(j);
        let uu = &u * u.adjoint();
        q += &uu;
        pinv += uu * Complex64::new(1.0 / eig.values[j], 0.0);
    }
    q = linalg::symmetrize(&q);
    pinv = linalg::symmetrize(&pinv);

    let scale = linalg::frob(&factor.f).max(1.0);
    let mut b = Vec::with_capacity(table.d());
    let mut shift_residual = 0.0f64;
    for i in 1..=table.d() {
        let mut f_shift = CMatrix::zeros(r, low_cols);
        for a in 0..m_low {
            let child = table.child_index(a, i).expect("low word has children");
            for row in 0..r {
                for col in 0..n {
                    f_shift[(row, a * n + col)] = factor.f[(row, child * n + col)];
                }
            }
        }
        // Least squares B_i·F_low ≈ F_shift with range confined to range(Q):
        // B_i = F_shift·F_low*·pinv(F_low·F_low*), zero on range(Q)^⊥.
        let bi = &f_shift * f_low.adjoint() * &pinv;
        shift_residual = shift_residual.max(linalg::frob(&(&bi * &f_low - &f_shift)) / scale);
        b.push(bi);
    }
    if shift_residual > SHIFT_RESIDUAL_LIMIT {
        return Err(Error::IllConditioned {
            residual: shift_residual,
        });
    }

    // Most fragile direction: bottom eigenvector c of the low-order kernel
    // Gram; z = F_low c should shift consistently under every B_i.
    let g_low: CMatrix = k.gram().view((0, 0), (low_cols, low_cols)).into();
    let eig_low = linalg::hermitian_eig(&g_low, linalg::DEFAULT_HERMITICITY_TOL)?;
    let c_bottom = CMatrix::from_fn(low_cols, 1, |row, _| eig_low.vectors[(row, 0)]);
    let z = &f_low * &c_bottom;
    let mut well_definedness_residual = 0.0f64;
    for i in 1..=table.d() {
        let mut shifted = CMatrix::zeros(r, 1);
        for a in 0..m_low {
            let child = table.child_index(a, i).expect("low word has children");
            let v_child = factor.v_block(child);
            let coeff = CMatrix::from_fn(n, 1, |row, _| c_bottom[(a * n + row, 0)]);
            shifted += v_child * coeff;
        }
        well_definedness_residual =
            well_definedness_residual.max(linalg::frob(&(&b[i - 1] * &z - shifted)) / scale);
    }

    Ok(GnsModel {
        factor,
        q,
        b,
        shift_residual,
        well_definedness_residual,
    })
}

#[derive(Debug, Clone)]
pub struct ColumnContractionReport {
    pub lambda_max: f64,
    pub pass: bool,
    pub tol: f64,
}

/// λ_max(Σ B_i*B_i) ≤ 1 + tol: the certificate that the shifts form a column
/// contraction (saturating at 1 exactly in the equality case).
pub fn column_contraction_check(model: &GnsModel) -> Result<ColumnContractionReport> {
    let r = model.r();
    let mut s = CMatrix::zeros(r, r);
    for bi in model.shifts() {
        s += bi.ad_mul(bi);
    }
    let (_, lambda_max) = linalg::psd_margin(&s)?;
    Ok(ColumnContractionReport {
        lambda_max,
        pass: lambda_max <= 1.0 + COLUMN_CONTRACTION_TOL,
        tol: COLUMN_CONTRACTION_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{
        gen_coisometry_ensemble, gen_row_contraction_ensemble, OperatorEnsemble, Scenario,
    };
    use crate::kernel::assemble_kernel;
    use crate::linalg::frob;
    use crate::words::enumerate_words;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn deterministic_1x1(value: f64) -> OperatorEnsemble {
        OperatorEnsemble::new(
            1,
            1,
            "det",
            vec![Scenario {
                weight: 1.0,
                ops: vec![CMatrix::from_element(1, 1, c(value, 0.0))],
            }],
        )
        .unwrap()
    }

    fn zero_ensemble(d: usize, n: usize) -> OperatorEnsemble {
        OperatorEnsemble::new(
            d,
            n,
            "zero",
            vec![Scenario {
                weight: 1.0,
                ops: vec![CMatrix::zeros(n, n); d],
            }],
        )
        .unwrap()
    }

    #[test]
    fn identity_kernel_factors_to_full_rank() {
        let table = enumerate_words(1, 0).unwrap();
        let k = BlockKernel::from_parts(table, 2, CMatrix::identity(2, 2)).unwrap();
        let factor = kolmogorov_factorize(&k, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(factor.r(), 2);
        let v = factor.v_block(0);
        assert!(frob(&(v.adjoint() * &v - CMatrix::identity(2, 2))) <= 1e-12);
    }

    #[test]
    fn rank_one_kernel_factors_to_rank_one() {
        // G = vv* over three d=1 words.
        let v = CMatrix::from_row_slice(3, 1, &[c(1.0, 0.0), c(0.5, 0.0), c(0.25, 0.0)]);
        let g = &v * v.adjoint();
        let table = enumerate_words(1, 2).unwrap();
        let k = BlockKernel::from_parts(table, 1, g).unwrap();
        let factor = kolmogorov_factorize(&k, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(factor.r(), 1);
        assert!(factor.factorization_residual(&k) <= 1e-12);
    }

    #[test]
    fn indefinite_kernel_is_refused() {
        let table = enumerate_words(1, 1).unwrap();
        let g = CMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
        );
        let k = BlockKernel::from_parts(table, 1, g).unwrap();
        assert!(matches!(
            kolmogorov_factorize(&k, DEFAULT_RANK_TOL),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn factorization_residual_sweep_on_assembled_kernels() {
        for (seed, d, n) in [(1u64, 1usize, 2usize), (2, 2, 2), (3, 3, 1), (4, 2, 3)] {
            let e = gen_row_contraction_ensemble(d, n, 3, seed, 0.2).unwrap();
            let k = assemble_kernel(&e, 3).unwrap();
            let factor = kolmogorov_factorize(&k, DEFAULT_RANK_TOL).unwrap();
            let tol = 1e-8 * (1.0 + frob(k.gram()));
            let res = factor.factorization_residual(&k);
            assert!(res <= tol, "residual {res} over tolerance {tol}");
        }
    }

    #[test]
    fn half_scalar_has_rank_one_gns_with_midpoint_shift() {
        let e = deterministic_1x1(0.5);
        let k = assemble_kernel(&e, 2).unwrap();
        let factor = kolmogorov_factorize(&k, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(factor.r(), 1);
        let model = build_shifts(factor, &k, 1e-10, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(model.shifts().len(), 1);
        let b = &model.shifts()[0];
        assert!((b[(0, 0)].re - 0.5).abs() <= 1e-12, "B = {}", b[(0, 0)]);
        assert!(b[(0, 0)].im.abs() <= 1e-14);
        let report = column_contraction_check(&model).unwrap();
        assert!((report.lambda_max - 0.25).abs() <= 1e-12);
        assert!(report.pass);
    }

    #[test]
    fn zero_ensemble_gets_zero_shifts() {
        let e = zero_ensemble(2, 2);
        let k = assemble_kernel(&e, 1).unwrap();
        let factor = kolmogorov_factorize(&k, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(factor.r(), 2);
        let model = build_shifts(factor, &k, 1e-10, DEFAULT_RANK_TOL).unwrap();
        for b in model.shifts() {
            assert!(frob(b) <= 1e-12);
        }
        let report = column_contraction_check(&model).unwrap();
        assert!(report.lambda_max <= 1e-12);
    }

    #[test]
    fn shift_relations_hold_on_low_words() {
        let e = gen_row_contraction_ensemble(2, 2, 3, 7, 0.2).unwrap();
        let k = assemble_kernel(&e, 3).unwrap();
        let factor = kolmogorov_factorize(&k, DEFAULT_RANK_TOL).unwrap();
        let model = build_shifts(factor, &k, 1e-10, DEFAULT_RANK_TOL).unwrap();
        let table = model.table().clone();
        for a in 0..table.count_below(3) {
            for i in 1..=2usize {
                let child = table.child_index(a, i).unwrap();
                let lhs = &model.shifts()[i - 1] * model.v_block(a);
                let rhs = model.v_block(child);
                assert!(
                    frob(&(lhs - rhs)) <= 1e-8,
                    "relation failed at word {} letter {i}",
                    table.word(a)
                );
            }
        }
        assert!(model.shift_residual() <= 1e-10);
        assert!(model.well_definedness_residual() <= 1e-8);
    }

    #[test]
    fn cyclicity_recovers_every_factor_block() {
        let e = gen_row_contraction_ensemble(2, 2, 2, 19, 0.3).unwrap();
        let k = assemble_kernel(&e, 3).unwrap();
        let factor = kolmogorov_factorize(&k, DEFAULT_RANK_TOL).unwrap();
        let model = build_shifts(factor, &k, 1e-10, DEFAULT_RANK_TOL).unwrap();
        let v0 = model.v_block(0);
        for (idx, w) in model.table().words().iter().enumerate() {
            let recovered = model.shift_word_product(w) * &v0;
            assert!(
                frob(&(recovered - model.v_block(idx))) <= 1e-8,
                "cyclicity failed at {w}"
            );
        }
    }

    #[test]
    fn column_contraction_saturates_for_coisometries() {
        for seed in [1u64, 2, 3] {
            let e = gen_coisometry_ensemble(2, 2, 2, seed).unwrap();
            let k = assemble_kernel(&e, 3).unwrap();
            let factor = kolmogorov_factorize(&k, DEFAULT_RANK_TOL).unwrap();
            let model = build_shifts(factor, &k, 1e-10, DEFAULT_RANK_TOL).unwrap();
            let report = column_contraction_check(&model).unwrap();
            assert!(
                (report.lambda_max - 1.0).abs() <= 1e-8,
                "lambda_max = {}",
                report.lambda_max
            );
        }
    }

    #[test]
    fn undominated_kernels_are_refused_with_margin() {
        let e = deterministic_1x1(2.0);
        let k = assemble_kernel(&e, 1).unwrap();
        let factor = kolmogorov_factorize(&k, DEFAULT_RANK_TOL).unwrap();
        match build_shifts(factor, &k, 1e-10, DEFAULT_RANK_TOL) {
            Err(Error::NotDominated { margin }) => {
                assert!((margin - (-3.0)).abs() <= 1e-12);
            }
            other => panic!("expected NotDominated, got {other:?}"),
        }
    }
}
