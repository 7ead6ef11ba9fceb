//! Dense complex linear algebra: Hermitian eigendecomposition (cyclic Jacobi),
//! PSD margins and square roots, and operator norms (dense or Lanczos).
//!
//! Everything downstream trusts this module for spectral decisions, so the
//! eigensolver is kept simple and accurate rather than fast: two-sided unitary
//! Jacobi rotations until the off-diagonal mass falls below 1e-15 of the input
//! scale. Matrices here are desk-scale (dimension a few hundred).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix, the carrier type for every operator in this crate.
pub type CMatrix = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = DVector<Complex64>;

/// Relative off-diagonal mass at which a Jacobi sweep stops.
const JACOBI_TOL: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 60;
/// Hermitian-defect tolerance used by the convenience wrappers.
pub const DEFAULT_HERMITICITY_TOL: f64 = 1e-8;
/// Below this dimension, operator norms go through the dense eigensolver.
const DENSE_NORM_LIMIT: usize = 128;

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn frob(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Frobenius norm of M - M*.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let mut s = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let dz = m[(i, j)] - m[(j, i)].conj();
            s += dz.norm_sqr();
        }
    }
    s.sqrt()
}

/// (M + M*)/2 with the diagonal forced exactly real.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let mut s = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
        }
        s[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
    }
    s
}

/// Eigendecomposition of a Hermitian matrix: `values` ascending, `vectors`
/// unitary with eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
///
/// The input is symmetrized internally; if its Hermitian defect exceeds
/// `hermiticity_tol * max(1, frob(M))` the call is refused instead, since a
/// materially non-Hermitian input signals a logic error upstream.
pub fn hermitian_eig(m: &CMatrix, hermiticity_tol: f64) -> Result<HermitianEig> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "hermitian_eig needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = frob(m);
    let defect = hermitian_defect(m);
    if defect > hermiticity_tol * scale.max(1.0) {
        return Err(Error::NonHermitian {
            defect,
            tol: hermiticity_tol * scale.max(1.0),
        });
    }

    let n = m.nrows();
    let mut a = symmetrize(m);
    let mut v = identity(n);
    if n > 1 && scale > 0.0 {
        for _sweep in 0..JACOBI_MAX_SWEEPS {
            let off = offdiag_frob(&a);
            if off <= JACOBI_TOL * scale {
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).copy_from(&v.column(src));
    }
    Ok(HermitianEig { values, vectors })
}

fn offdiag_frob(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                s += a[(p, q)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// One complex Jacobi rotation zeroing a[(p,q)].
///
/// With a_pq = |a_pq| e^{i phi}, the unitary U is the identity except
/// U[p,p] = c, U[p,q] = s e^{i phi}, U[q,p] = -s e^{-i phi}, U[q,q] = c,
/// and A <- U* A U, V <- V U.
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag < f64::MIN_POSITIVE {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        1.0 / (tau - (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let phase = apq / mag; // e^{i phi}
    let sp = phase * s; // s e^{i phi}
    let spc = sp.conj(); // s e^{-i phi}

    let n = a.nrows();
    // Column update: A <- A U.
    for r in 0..n {
        let arp = a[(r, p)];
        let arq = a[(r, q)];
        a[(r, p)] = arp * c - arq * spc;
        a[(r, q)] = arp * sp + arq * c;
    }
    // Row update: A <- U* A.
    for r in 0..n {
        let apr = a[(p, r)];
        let aqr = a[(q, r)];
        a[(p, r)] = apr * c - aqr * sp;
        a[(q, r)] = apr * spc + aqr * c;
    }
    // Re-impose exact Hermitian structure on the touched rows/columns.
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)] = Complex64::new(app - t * mag, 0.0);
    a[(q, q)] = Complex64::new(aqq + t * mag, 0.0);
    for r in 0..n {
        if r != p && r != q {
            a[(r, p)] = a[(p, r)].conj();
            a[(r, q)] = a[(q, r)].conj();
        }
    }
    // Accumulate eigenvectors: V <- V U.
    for r in 0..v.nrows() {
        let vrp = v[(r, p)];
        let vrq = v[(r, q)];
        v[(r, p)] = vrp * c - vrq * spc;
        v[(r, q)] = vrp * sp + vrq * c;
    }
}

/// Smallest and largest eigenvalue of a Hermitian matrix.
pub fn psd_margin(m: &CMatrix) -> Result<(f64, f64)> {
    let eig = hermitian_eig(m, DEFAULT_HERMITICITY_TOL)?;
    if eig.values.is_empty() {
        return Ok((0.0, 0.0));
    }
    Ok((eig.values[0], *eig.values.last().unwrap()))
}

/// PSD square root with a clamp band for slightly negative eigenvalues.
///
/// Eigenvalues in [-band, 0) with band = clamp_tol * max(1, lambda_max) are
/// clamped to zero; anything below the band refuses with NotPsd. The band is
/// taken relative to max(1, lambda_max) rather than lambda_max alone so that
/// near-zero PSD inputs (defect operators of near-coisometries) do not fail
/// on roundoff noise.
pub fn psd_sqrt(m: &CMatrix, clamp_tol: f64) -> Result<CMatrix> {
    let eig = hermitian_eig(m, DEFAULT_HERMITICITY_TOL)?;
    let lambda_max = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    let band = clamp_tol * lambda_max.max(1.0);
    if let Some(&lambda_min) = eig.values.first() {
        if lambda_min < -band {
            return Err(Error::NotPsd { lambda_min, band });
        }
    }
    let n = m.nrows();
    let mut s = CMatrix::zeros(n, n);
    for k in 0..n {
        let root = eig.values[k].max(0.0).sqrt();
        if root == 0.0 {
            continue;
        }
        let col = eig.vectors.column(k);
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] += col[i] * col[j].conj() * root;
            }
        }
    }
    Ok(symmetrize(&s))
}

/// Spectral norm: the largest singular value.
///
/// Formed as sqrt(lambda_max(G)) with G the Gram matrix on the smaller side;
/// small Gram matrices go through the dense eigensolver, large ones through
/// Lanczos on a matrix-vector closure.
pub fn operator_norm(m: &CMatrix) -> Result<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0.0);
    }
    let gram = if m.ncols() <= m.nrows() {
        m.ad_mul(m)
    } else {
        let adj = m.adjoint();
        adj.ad_mul(&adj)
    };
    Ok(top_eigenvalue_psd(&gram)?.max(0.0).sqrt())
}

/// Largest eigenvalue of a Hermitian PSD matrix, choosing the dense or
/// Lanczos path by dimension.
pub fn top_eigenvalue_psd(gram: &CMatrix) -> Result<f64> {
    let k = gram.nrows();
    if k <= DENSE_NORM_LIMIT {
        let (_, hi) = psd_margin(gram)?;
        Ok(hi)
    } else {
        Ok(lanczos_top(k, |x| gram * x, 1e-13, 4 * k))
    }
}

/// Largest eigenvalue of a Hermitian operator given as a matrix-vector
/// closure, by Lanczos iteration with full reorthogonalization.
///
/// Runs until the top Ritz pair's residual bound drops below `tol` relative
/// to the Ritz value (or the Krylov space is exhausted, which makes the
/// result exact). The start vector is a fixed splitmix64 sequence, so the
/// result is deterministic for a given operator.
pub fn lanczos_top(
    dim: usize,
    mut apply: impl FnMut(&CVector) -> CVector,
    tol: f64,
    max_iter: usize,
) -> f64 {
    assert!(dim > 0, "lanczos_top needs a positive dimension");
    let mut v0 = seeded_vector(dim, 0x6d6f_6d64_696c_0001);
    let n0 = v0.norm();
    v0 /= Complex64::new(n0, 0.0);

    let mut basis: Vec<CVector> = vec![v0];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut theta = f64::NEG_INFINITY;

    // The Ritz extraction is itself an eigensolve, so run it on a schedule
    // rather than every step, and exit on any of: certified residual, lucky
    // breakdown (invariant subspace found), or a stagnant Ritz value — the
    // value converges long before its eigenvector does when the top of the
    // spectrum is clustered, and only the value is reported.
    const CHECK_EVERY: usize = 8;
    let steps = max_iter.min(dim).max(1);
    let mut prev_theta = f64::NEG_INFINITY;
    let mut stagnant_checks = 0usize;
    for j in 0..steps {
        let mut w = apply(&basis[j]);
        let a_j = basis[j].dotc(&w).re;
        alpha.push(a_j);
        w -= basis[j].scale(a_j);
        if j > 0 {
            let b_prev = beta[j - 1];
            w -= basis[j - 1].scale(b_prev);
        }
        // Full reorthogonalization, twice for safety.
        for _ in 0..2 {
            for v in &basis {
                let c = v.dotc(&w);
                w -= v * c;
            }
        }
        let b_j = w.norm();
        let scale = alpha
            .iter()
            .map(|a| a.abs())
            .chain(beta.iter().copied())
            .fold(0.0f64, f64::max);
        let breakdown = b_j <= 1e-13 * scale.max(f64::MIN_POSITIVE);
        let last_step = j + 1 >= steps;

        if breakdown || last_step || j < 4 || (j + 1) % CHECK_EVERY == 0 {
            let (th, last) = tridiag_top(&alpha, &beta);
            let improvement = th - prev_theta;
            prev_theta = th;
            theta = th;
            let resid = b_j * last.abs();
            if resid <= tol * theta.abs().max(f64::MIN_POSITIVE) || breakdown || last_step {
                break;
            }
            if improvement <= 1e-14 * theta.abs().max(f64::MIN_POSITIVE) {
                stagnant_checks += 1;
                if stagnant_checks >= 3 {
                    break;
                }
            } else {
                stagnant_checks = 0;
            }
        }
        beta.push(b_j);
        basis.push(w / Complex64::new(b_j, 0.0));
    }
    theta
}

/// Top eigenvalue of the real symmetric tridiagonal (alpha; beta) and the
/// magnitude of the last component of its eigenvector.
fn tridiag_top(alpha: &[f64], beta: &[f64]) -> (f64, f64) {
    let k = alpha.len();
    if k == 1 {
        return (alpha[0], 1.0);
    }
    let mut t = CMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = Complex64::new(alpha[i], 0.0);
        if i + 1 < k {
            t[(i, i + 1)] = Complex64::new(beta[i], 0.0);
            t[(i + 1, i)] = Complex64::new(beta[i], 0.0);
        }
    }
    let eig = hermitian_eig(&t, 1e-9).expect("tridiagonal is Hermitian by construction");
    let top = eig.values.len() - 1;
    (eig.values[top], eig.vectors[(k - 1, top)].norm())
}

/// Deterministic pseudo-random start vector (splitmix64; no platform-varying
/// transcendentals).
fn seeded_vector(dim: usize, seed: u64) -> CVector {
    let mut state = seed;
    let mut next = move || {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z = z ^ (z >> 31);
        (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64) - 0.5
    };
    CVector::from_fn(dim, |_, _| Complex64::new(next(), next()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let v = seeded_vector(n * n, seed);
        let raw = CMatrix::from_fn(n, n, |i, j| v[i * n + j]);
        symmetrize(&raw)
    }

    #[test]
    fn identity_eigenvalues_are_ones() {
        let eig = hermitian_eig(&identity(4), 1e-10).unwrap();
        for v in eig.values {
            assert_relative_eq!(v, 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn two_by_two_known_spectrum() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let m = CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let eig = hermitian_eig(&m, 1e-10).unwrap();
        assert_relative_eq!(eig.values[0], 1.0, epsilon = 1e-13);
        assert_relative_eq!(eig.values[1], 3.0, epsilon = 1e-13);
    }

    #[test]
    fn eigen_residual_and_unitarity() {
        for n in [3usize, 17, 40] {
            let m = random_hermitian(n, 7 + n as u64);
            let eig = hermitian_eig(&m, 1e-10).unwrap();
            let scale = 1.0 + frob(&m);
            for k in 0..n {
                let v = eig.vectors.column(k).into_owned();
                let reshape = &m * &v - v.scale(eig.values[k]);
                assert!(
                    reshape.norm() <= 1e-12 * scale,
                    "residual {} at n={} k={}",
                    reshape.norm(),
                    n,
                    k
                );
            }
            let gram = eig.vectors.ad_mul(&eig.vectors);
            assert!(frob(&(gram - identity(n))) <= 1e-12);
            let mut sorted = eig.values.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(sorted, eig.values, "eigenvalues must come back ascending");
        }
    }

    #[test]
    fn trace_and_frobenius_are_preserved() {
        let m = random_hermitian(23, 99);
        let eig = hermitian_eig(&m, 1e-10).unwrap();
        let tr: f64 = (0..23).map(|i| m[(i, i)].re).sum();
        let sum: f64 = eig.values.iter().sum();
        assert_relative_eq!(tr, sum, epsilon = 1e-11 * (1.0 + tr.abs()));
        let f2: f64 = eig.values.iter().map(|v| v * v).sum();
        assert_relative_eq!(frob(&m) * frob(&m), f2, max_relative = 1e-12);
    }

    #[test]
    fn non_hermitian_is_refused() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            hermitian_eig(&m, 1e-8),
            Err(Error::NonHermitian { .. })
        ));
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let m = random_hermitian(9, 4);
        // Make it PSD by squaring.
        let p = m.ad_mul(&m);
        let s = psd_sqrt(&p, 1e-12).unwrap();
        assert!(frob(&(&s * &s - &p)) <= 1e-11 * (1.0 + frob(&p)));
    }

    #[test]
    fn psd_sqrt_clamps_inside_band_and_refuses_outside() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(1.0, 0.0);
        m[(1, 1)] = c(-1e-14, 0.0);
        let s = psd_sqrt(&m, 1e-12).unwrap();
        assert_relative_eq!(s[(0, 0)].re, 1.0, epsilon = 1e-12);
        assert_eq!(s[(1, 1)].re, 0.0);

        m[(1, 1)] = c(-1.0, 0.0);
        assert!(matches!(psd_sqrt(&m, 1e-12), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn psd_sqrt_tolerates_near_zero_input() {
        // Defect of a near-coisometry: a noise-level matrix must not fail.
        let mut m = CMatrix::zeros(3, 3);
        m[(0, 0)] = c(1e-16, 0.0);
        m[(1, 1)] = c(-1e-16, 0.0);
        let s = psd_sqrt(&m, 1e-12).unwrap();
        assert!(frob(&s) <= 1e-7);
    }

    #[test]
    fn operator_norm_matches_known_values() {
        // Column vector (3,4)^T has norm 5.
        let v = CMatrix::from_row_slice(2, 1, &[c(3.0, 0.0), c(4.0, 0.0)]);
        assert_relative_eq!(operator_norm(&v).unwrap(), 5.0, max_relative = 1e-12);
        // Rank-one uv* has norm |u||v|.
        let u = CMatrix::from_row_slice(3, 1, &[c(1.0, 0.0), c(0.0, 2.0), c(2.0, 0.0)]);
        let w = CMatrix::from_row_slice(1, 2, &[c(0.0, 1.0), c(1.0, 0.0)]);
        let m = &u * &w;
        assert_relative_eq!(operator_norm(&m).unwrap(), 3.0 * 2f64.sqrt(), max_relative = 1e-12);
        assert_eq!(operator_norm(&CMatrix::zeros(4, 4)).unwrap(), 0.0);
    }

    #[test]
    fn operator_norm_is_unitarily_invariant() {
        let m = random_hermitian(12, 21);
        let eig = hermitian_eig(&m, 1e-10).unwrap();
        let by_spectrum = eig
            .values
            .iter()
            .map(|v| v.abs())
            .fold(0.0f64, f64::max);
        assert_relative_eq!(operator_norm(&m).unwrap(), by_spectrum, max_relative = 1e-11);
    }

    #[test]
    fn lanczos_agrees_with_dense_on_large_psd() {
        let n = 300;
        let raw = seeded_vector(n * 40, 5);
        let rect = CMatrix::from_fn(40, n, |i, j| raw[i * n + j]);
        let gram = rect.ad_mul(&rect); // n x n PSD, rank <= 40
        let lz = lanczos_top(n, |x| &gram * x, 1e-13, 4 * n);
        // Same nonzero spectrum lives on the 40 x 40 side.
        let adj = rect.adjoint();
        let gram_small = adj.ad_mul(&adj);
        let (_, dense_top) = psd_margin(&gram_small).unwrap();
        assert_relative_eq!(lz, dense_top, max_relative = 1e-11);
    }

    #[test]
    fn lanczos_handles_near_zero_operator() {
        let z = CMatrix::zeros(200, 200);
        let top = lanczos_top(200, |x| &z * x, 1e-13, 400);
        assert!(top.abs() <= 1e-300);
    }
}
