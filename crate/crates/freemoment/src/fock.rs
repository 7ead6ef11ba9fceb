//! Truncated full Fock space over d letters: left creation operators L_i
//! (prepend a letter, kill the top level) and certified lower bounds for
//! ‖p(L)‖ via a domain-truncated but codomain-exact matrix of p(L).
//!
//! The codomain basis is never materialized: the image of a basis vector e_γ
//! under a monomial is another basis vector whose index is arithmetic in the
//! graded-lex numbering, so columns stay sparse lists of (row, coefficient).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::ncpoly::{NcPoly, Side};
use crate::words::{enumerate_words, word_count, WordTable, DEFAULT_WORD_CAPACITY};

/// Upper bound on the (virtual) codomain dimension of the rectangular norm
/// map; beyond this the sparse columns stop being desk-scale.
pub const FOCK_CODOMAIN_LIMIT: usize = 4_000_000;

/// Gram matrices up to this edge length take the dense eigensolver; larger
/// ones go through the matrix-free Lanczos path.
const DENSE_GRAM_LIMIT: usize = 256;

/// Left creation operators on words of length ≤ M.
#[derive(Debug, Clone)]
pub struct TruncatedFock {
    table: WordTable,
    l: Vec<CMatrix>,
}

impl TruncatedFock {
    pub fn d(&self) -> usize {
        self.table.d()
    }

    /// Truncation level M.
    pub fn level(&self) -> usize {
        self.table.max_len()
    }

    pub fn dim(&self) -> usize {
        self.table.len()
    }

    pub fn table(&self) -> &WordTable {
        &self.table
    }

    /// The d creation matrices: L_i e_γ = e_{iγ} for |γ| < M, else 0.
    pub fn creation(&self) -> &[CMatrix] {
        &self.l
    }
}

/// Builds the truncated creation tuple for (d, M).
pub fn build_fock(d: usize, m: usize) -> Result<TruncatedFock> {
    let table = enumerate_words(d, m)?;
    let dim = table.len();
    let mut l = Vec::with_capacity(d);
    for i in 1..=d {
        let mut li = CMatrix::zeros(dim, dim);
        for gamma in 0..table.count_below(m) {
            let target = table.prepend_index(gamma, i).expect("below top level");
            li[(target, gamma)] = Complex64::new(1.0, 0.0);
        }
        l.push(li);
    }
    Ok(TruncatedFock { table, l })
}

/// p(L) (or its adjoint) on the square truncated space. The top levels are
/// lost to truncation, so this is a diagnostic object — norm certification
/// goes through `fock_norm` instead.
pub fn eval_on_fock(p: &NcPoly, fock: &TruncatedFock, side: Side) -> Result<CMatrix> {
    if p.d() != fock.d() {
        return Err(Error::AlphabetMismatch(format!(
            "polynomial over alphabet of size {} on a Fock space over {}",
            p.d(),
            fock.d()
        )));
    }
    p.evaluate(&fock.l, side)
}

/// Certified Fock-norm surrogate: `value` is the operator norm of the exact
/// map F_{≤M} → F_{≤M+deg p}, ξ ↦ p(L)ξ. It never exceeds the true ‖p(L)‖
/// and is nondecreasing in M.
#[derive(Debug, Clone, Copy)]
pub struct FockNorm {
    pub value: f64,
    /// ‖p(L)Ω‖ = the coefficient l2 norm — a floor for every M.
    pub lower_bound: f64,
    pub dim_domain: usize,
    pub dim_codomain: usize,
}

/// Sparse column representation of the rectangular map, codomain indexed
/// arithmetically in graded-lex order up to length M + deg p.
struct RectMap {
    cols: Vec<Vec<(usize, Complex64)>>,
    dim_codomain: usize,
}

fn rect_map(p: &NcPoly, m: usize) -> Result<RectMap> {
    let d = p.d();
    let total_len = m + p.degree();
    let codomain = match word_count(d, total_len, FOCK_CODOMAIN_LIMIT) {
        Ok(count) if count <= FOCK_CODOMAIN_LIMIT => count,
        Ok(count) => {
            return Err(Error::CapacityExceeded {
                what: "Fock codomain dimension",
                required: count as u128,
                limit: FOCK_CODOMAIN_LIMIT,
            })
        }
        Err(Error::CapacityExceeded { required, .. }) => {
            return Err(Error::CapacityExceeded {
                what: "Fock codomain dimension",
                required,
                limit: FOCK_CODOMAIN_LIMIT,
            })
        }
        Err(e) => return Err(e),
    };
    let domain = enumerate_words(d, m)?;

    // offs[k] = number of words shorter than k in the codomain numbering.
    let mut offs = Vec::with_capacity(total_len + 2);
    offs.push(0usize);
    let mut level = 1usize;
    for _ in 0..=total_len {
        offs.push(offs.last().unwrap() + level);
        level *= d;
    }

    let base_rank = |letters: &[usize]| -> usize {
        letters.iter().fold(0usize, |acc, &l| acc * d + (l - 1))
    };

    let mut cols = Vec::with_capacity(domain.len());
    for gamma_idx in 0..domain.len() {
        let gamma = domain.word(gamma_idx);
        let g_len = gamma.len();
        let g_rank = base_rank(gamma.letters());
        let d_pow_g = d.pow(g_len as u32);
        let mut col: Vec<(usize, Complex64)> = Vec::with_capacity(p.num_terms());
        for (alpha, &coeff) in p.terms() {
            let len = alpha.len() + g_len;
            let row = offs[len] + base_rank(alpha.letters()) * d_pow_g + g_rank;
            col.push((row, coeff));
        }
        // Graded-lex term order makes rows strictly increase within a column.
        debug_assert!(col.windows(2).all(|w| w[0].0 < w[1].0));
        cols.push(col);
    }
    Ok(RectMap {
        cols,
        dim_codomain: codomain,
    })
}

/// <col_a, col_b> over the shared codomain rows (two-pointer merge).
fn column_dot(a: &[(usize, Complex64)], b: &[(usize, Complex64)]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1.conj() * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

pub fn fock_norm(p: &NcPoly, m: usize) -> Result<FockNorm> {
    let lower_bound = p.coeff_l2_norm();
    if p.is_zero() {
        let dim_domain = word_count(p.d(), m, DEFAULT_WORD_CAPACITY)?;
        return Ok(FockNorm {
            value: 0.0,
            lower_bound: 0.0,
            dim_domain,
            dim_codomain: dim_domain,
        });
    }
    let map = rect_map(p, m)?;
    let dim = map.cols.len();
    let top = if dim <= DENSE_GRAM_LIMIT {
        let mut gram = CMatrix::zeros(dim, dim);
        for a in 0..dim {
            for b in a..dim {
                let v = column_dot(&map.cols[a], &map.cols[b]);
                gram[(a, b)] = v;
                gram[(b, a)] = v.conj();
            }
        }
        linalg::top_eigenvalue_psd(&gram)?
    } else {
        // Matrix-free T*T: scatter through the codomain, gather per column.
        let mut scratch = vec![Complex64::new(0.0, 0.0); map.dim_codomain];
        let mut touched: Vec<usize> = Vec::new();
        linalg::lanczos_top(
            dim,
            |x| {
                for idx in touched.drain(..) {
                    scratch[idx] = Complex64::new(0.0, 0.0);
                }
                for (j, col) in map.cols.iter().enumerate() {
                    let xj = x[j];
                    if xj != Complex64::new(0.0, 0.0) {
                        for &(row, c) in col {
                            if scratch[row] == Complex64::new(0.0, 0.0) {
                                touched.push(row);
                            }
                            scratch[row] += c * xj;
                        }
                    }
                }
                crate::linalg::CVector::from_fn(dim, |j, _| {
                    map.cols[j]
                        .iter()
                        .map(|&(row, c)| c.conj() * scratch[row])
                        .sum()
                })
            },
            1e-13,
            4 * dim,
        )
    };
    Ok(FockNorm {
        value: top.max(0.0).sqrt(),
        lower_bound,
        dim_domain: dim,
        dim_codomain: map.dim_codomain,
    })
}
