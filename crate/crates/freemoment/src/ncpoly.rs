//! Noncommutative polynomials in d generators Z1..Zd with complex
//! coefficients, plus a parser and a canonical renderer.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! poly   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := scalar | gen ('^' uint)? | '(' poly ')'
//! gen    := 'Z' uint
//! scalar := '(' real (('+' | '-') real 'i')? ')' | real
//! ```
//!
//! `real` is a signed decimal floating literal. A parenthesized expression is
//! tried as a complex scalar first and re-parsed as a subexpression on
//! failure, so `(0.5+0.5i)` is one coefficient while `(Z1+1)` is a sum.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::words::Word;

/// Which of p(T) or p(T)* to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Direct,
    Adjoint,
}

/// Sparse polynomial: graded-lex ordered word -> nonzero coefficient.
/// Coefficients that cancel to exactly zero are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct NcPoly {
    d: usize,
    terms: BTreeMap<Word, Complex64>,
}

impl NcPoly {
    pub fn zero(d: usize) -> NcPoly {
        assert!(d >= 1, "alphabet size must be at least 1");
        NcPoly { d, terms: BTreeMap::new() }
    }

    pub fn constant(d: usize, c: Complex64) -> NcPoly {
        let mut p = NcPoly::zero(d);
        if c != Complex64::new(0.0, 0.0) {
            p.terms.insert(Word::empty(d), c);
        }
        p
    }

    pub fn one(d: usize) -> NcPoly {
        NcPoly::constant(d, Complex64::new(1.0, 0.0))
    }

    /// The generator Z_i (1-based).
    pub fn generator(d: usize, i: usize) -> Result<NcPoly> {
        let w = Word::new(d, vec![i])?;
        let mut p = NcPoly::zero(d);
        p.terms.insert(w, Complex64::new(1.0, 0.0));
        Ok(p)
    }

    pub fn from_terms<I>(d: usize, terms: I) -> Result<NcPoly>
    where
        I: IntoIterator<Item = (Word, Complex64)>,
    {
        let mut p = NcPoly::zero(d);
        for (w, c) in terms {
            if w.d() != d {
                return Err(Error::AlphabetMismatch(format!(
                    "term over alphabet of size {} in a polynomial over {}",
                    w.d(),
                    d
                )));
            }
            p.add_term(w, c);
        }
        Ok(p)
    }

    fn add_term(&mut self, w: Word, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        let entry = self.terms.entry(w);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = *o.get() + c;
                if sum == Complex64::new(0.0, 0.0) {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest word length carrying a nonzero coefficient; 0 for the zero
    /// polynomial.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|w| w.len()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &Complex64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, w: &Word) -> Complex64 {
        self.terms.get(w).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// l2 norm of the coefficient vector.
    pub fn coeff_l2_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check_alphabet(&self, other: &NcPoly) -> Result<()> {
        if self.d != other.d {
            return Err(Error::AlphabetMismatch(format!(
                "polynomials over alphabets of size {} and {}",
                self.d, other.d
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &NcPoly) -> Result<NcPoly> {
        self.check_alphabet(other)?;
        let mut p = self.clone();
        for (w, c) in &other.terms {
            p.add_term(w.clone(), *c);
        }
        Ok(p)
    }

    pub fn sub(&self, other: &NcPoly) -> Result<NcPoly> {
        self.check_alphabet(other)?;
        let mut p = self.clone();
        for (w, c) in &other.terms {
            p.add_term(w.clone(), -*c);
        }
        Ok(p)
    }

    pub fn scale(&self, c: Complex64) -> NcPoly {
        let mut p = NcPoly::zero(self.d);
        if c == Complex64::new(0.0, 0.0) {
            return p;
        }
        for (w, a) in &self.terms {
            p.add_term(w.clone(), *a * c);
        }
        p
    }

    /// Concatenation product: (sum a_u u)(sum b_v v) = sum a_u b_v (uv).
    pub fn mul(&self, other: &NcPoly) -> Result<NcPoly> {
        self.check_alphabet(other)?;
        let mut p = NcPoly::zero(self.d);
        for (u, a) in &self.terms {
            for (v, b) in &other.terms {
                p.add_term(u.concat(v)?, *a * *b);
            }
        }
        Ok(p)
    }

    /// Radial dilate: coefficient of a word of length k scales by r^k.
    pub fn radial_dilate(&self, r: f64) -> NcPoly {
        let mut p = NcPoly::zero(self.d);
        for (w, c) in &self.terms {
            p.add_term(w.clone(), *c * r.powi(w.len() as i32));
        }
        p
    }

    /// Canonical text form; parse(render(p)) reproduces p exactly (shortest
    /// round-trip float formatting).
    pub fn render(&self) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (w, c)) in self.terms.iter().enumerate() {
            let (neg, coeff) = render_coeff(*c);
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            out.push_str(&coeff);
            if !w.is_empty() {
                out.push('*');
                out.push_str(&render_word(w));
            }
        }
        out
    }

    /// p(T) or p(T)* for a d-tuple of square matrices of equal size.
    ///
    /// The adjoint side uses the reversal identity (T^w)* = (T*)^{reverse(w)}
    /// and conjugated coefficients, so both sides stay within word products.
    pub fn evaluate(&self, ops: &[CMatrix], side: Side) -> Result<CMatrix> {
        if ops.len() != self.d {
            return Err(Error::Dimension(format!(
                "expected {} operators, got {}",
                self.d,
                ops.len()
            )));
        }
        let n = match ops.first() {
            Some(m) => {
                if m.nrows() != m.ncols() {
                    return Err(Error::Dimension(format!(
                        "operators must be square, got {}x{}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                m.nrows()
            }
            None => {
                return Err(Error::Dimension("empty operator tuple".into()));
            }
        };
        for m in ops {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Dimension(
                    "operators in a tuple must share their size".into(),
                ));
            }
        }
        let adjoints: Vec<CMatrix> = match side {
            Side::Direct => Vec::new(),
            Side::Adjoint => ops.iter().map(|m| m.adjoint()).collect(),
        };
        let mut acc = CMatrix::zeros(n, n);
        for (w, c) in &self.terms {
            let (mats, letters, coeff): (&[CMatrix], Vec<usize>, Complex64) = match side {
                Side::Direct => (ops, w.letters().to_vec(), *c),
                Side::Adjoint => {
                    let mut rev = w.letters().to_vec();
                    rev.reverse();
                    (&adjoints, rev, c.conj())
                }
            };
            let mut prod = CMatrix::identity(n, n);
            for &l in &letters {
                prod = prod * &mats[l - 1];
            }
            acc += prod * coeff;
        }
        Ok(acc)
    }
}

/// Word part of a term: exponent-collapsed generator product, e.g. Z1^2*Z2.
fn render_word(w: &Word) -> String {
    let mut out = String::new();
    let letters = w.letters();
    let mut i = 0;
    while i < letters.len() {
        let mut j = i;
        while j + 1 < letters.len() && letters[j + 1] == letters[i] {
            j += 1;
        }
        if !out.is_empty() {
            out.push('*');
        }
        out.push('Z');
        out.push_str(&letters[i].to_string());
        let run = j - i + 1;
        if run > 1 {
            out.push('^');
            out.push_str(&run.to_string());
        }
        i = j + 1;
    }
    out
}

/// Renders a coefficient, factoring a real negative sign out so the caller
/// can join terms with " - ". Complex coefficients keep their sign inside the
/// parenthesized scalar.
fn render_coeff(c: Complex64) -> (bool, String) {
    if c.im == 0.0 {
        if c.re < 0.0 {
            (true, format!("{:?}", -c.re))
        } else {
            (false, format!("{:?}", c.re))
        }
    } else if c.im < 0.0 {
        (false, format!("({:?}-{:?}i)", c.re, -c.im))
    } else {
        (false, format!("({:?}+{:?}i)", c.re, c.im))
    }
}

/// Parses the grammar at the top of this module; `d` is the alphabet size
/// generators are checked against.
pub fn parse_ncpoly(text: &str, d: usize) -> Result<NcPoly> {
    if d < 1 {
        return Err(Error::Validation("alphabet size must be at least 1".into()));
    }
    let mut p = Parser {
        s: text.as_bytes(),
        pos: 0,
        d,
    };
    p.skip_ws();
    if p.at_end() {
        return Err(Error::EmptyInput);
    }
    let poly = p.parse_poly()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(Error::Syntax {
            position: p.pos,
            expected: "'+', '-', '*' or end of input".into(),
        });
    }
    Ok(poly)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    d: usize,
}

impl<'a> Parser<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.s.len()
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ') | Some(b'\t') | Some(b'\n') | Some(b'\r')) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, byte: u8) -> bool {
        if self.peek() == Some(byte) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse_poly(&mut self) -> Result<NcPoly> {
        let mut acc = self.parse_term()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let t = self.parse_term()?;
                    acc = acc.add(&t)?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    let t = self.parse_term()?;
                    acc = acc.sub(&t)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn parse_term(&mut self) -> Result<NcPoly> {
        let mut acc = self.parse_factor()?;
        loop {
            self.skip_ws();
            if self.eat(b'*') {
                let f = self.parse_factor()?;
                acc = acc.mul(&f)?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn parse_factor(&mut self) -> Result<NcPoly> {
        self.skip_ws();
        match self.peek() {
            Some(b'Z') => {
                self.pos += 1;
                let at = self.pos;
                let index = self.parse_uint()?;
                if index < 1 || index > self.d {
                    return Err(Error::GeneratorOutOfRange {
                        index,
                        d: self.d,
                        position: at,
                    });
                }
                let mut power = 1usize;
                let save = self.pos;
                self.skip_ws();
                if self.eat(b'^') {
                    power = self.parse_uint()?;
                } else {
                    self.pos = save;
                }
                let w = Word::new(self.d, vec![index; power])?;
                NcPoly::from_terms(self.d, [(w, Complex64::new(1.0, 0.0))])
            }
            Some(b'(') => {
                let save = self.pos;
                match self.try_complex_scalar() {
                    Some(c) => Ok(NcPoly::constant(self.d, c)),
                    None => {
                        self.pos = save;
                        self.pos += 1; // consume '('
                        let inner = self.parse_poly()?;
                        self.skip_ws();
                        if !self.eat(b')') {
                            return Err(Error::Syntax {
                                position: self.pos,
                                expected: "')'".into(),
                            });
                        }
                        Ok(inner)
                    }
                }
            }
            Some(b) if b == b'+' || b == b'-' || b == b'.' || b.is_ascii_digit() => {
                let r = self.parse_real()?;
                Ok(NcPoly::constant(self.d, Complex64::new(r, 0.0)))
            }
            _ => Err(Error::Syntax {
                position: self.pos,
                expected: "a scalar, 'Z<k>', or '('".into(),
            }),
        }
    }

    /// Attempts '(' real (('+'|'-') real 'i')? ')' without committing.
    fn try_complex_scalar(&mut self) -> Option<Complex64> {
        if !self.eat(b'(') {
            return None;
        }
        self.skip_ws();
        let re = self.parse_real().ok()?;
        self.skip_ws();
        let mut im = 0.0;
        match self.peek() {
            Some(b'+') | Some(b'-') => {
                let neg = self.peek() == Some(b'-');
                self.pos += 1;
                self.skip_ws();
                let mag = self.parse_real().ok()?;
                self.skip_ws();
                if !self.eat(b'i') {
                    return None;
                }
                im = if neg { -mag } else { mag };
            }
            _ => {}
        }
        self.skip_ws();
        if !self.eat(b')') {
            return None;
        }
        Some(Complex64::new(re, im))
    }

    /// Signed decimal floating literal, delegated to the f64 parser.
    fn parse_real(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        if matches!(self.peek(), Some(b'+') | Some(b'-')) {
            self.pos += 1;
        }
        let mantissa_start = self.pos;
        while matches!(self.peek(), Some(b) if b.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.eat(b'.') {
            while matches!(self.peek(), Some(b) if b.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if self.pos == mantissa_start {
            return Err(Error::Syntax {
                position: start,
                expected: "a number".into(),
            });
        }
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            let digits_start = self.pos;
            while matches!(self.peek(), Some(b) if b.is_ascii_digit()) {
                self.pos += 1;
            }
            if self.pos == digits_start {
                self.pos = save; // not an exponent after all
            }
        }
        let lit = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii slice");
        lit.parse::<f64>().map_err(|_| Error::Syntax {
            position: start,
            expected: "a number".into(),
        })
    }

    fn parse_uint(&mut self) -> Result<usize> {
        let start = self.pos;
        while matches!(self.peek(), Some(b) if b.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::Syntax {
                position: start,
                expected: "an unsigned integer".into(),
            });
        }
        let lit = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii slice");
        lit.parse::<usize>().map_err(|_| Error::Syntax {
            position: start,
            expected: "an unsigned integer".into(),
        })
    }
}

impl fmt::Display for NcPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}
