//! Affine expressions in the real decision vector.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::netmodel::C64;

/// `Σ coef·x[var] + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn var(i: usize) -> LinExpr {
        LinExpr { terms: vec![(i, 1.0)], constant: 0.0 }
    }

    pub fn constant(c: f64) -> LinExpr {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn scaled(&self, a: f64) -> LinExpr {
        if a == 0.0 {
            return LinExpr::default();
        }
        LinExpr { terms: self.terms.iter().map(|(i, c)| (*i, c * a)).collect(), constant: self.constant * a }
    }

    /// Terms merged by variable, exact zeros dropped.
    pub fn compressed(&self) -> LinExpr {
        let mut t = self.terms.clone();
        t.sort_by_key(|(i, _)| *i);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(t.len());
        for (i, c) in t {
            match out.last_mut() {
                Some((j, d)) if *j == i => *d += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|(_, c)| *c != 0.0);
        LinExpr { terms: out, constant: self.constant }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(i, c)| c * x[*i]).sum::<f64>()
    }
}

impl AddAssign<&LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: &LinExpr) {
        self.terms.extend_from_slice(&rhs.terms);
        self.constant += rhs.constant;
    }
}

impl Add<&LinExpr> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: &LinExpr) -> LinExpr {
        self += rhs;
        self
    }
}

impl Sub<&LinExpr> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: &LinExpr) -> LinExpr {
        self += &rhs.scaled(-1.0);
        self
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scaled(-1.0)
    }
}

/// Complex affine expression `re + j·im`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CExpr {
    pub re: LinExpr,
    pub im: LinExpr,
}

impl CExpr {
    pub fn new(re: LinExpr, im: LinExpr) -> CExpr {
        CExpr { re, im }
    }

    pub fn real(re: LinExpr) -> CExpr {
        CExpr { re, im: LinExpr::default() }
    }

    pub fn constant(c: C64) -> CExpr {
        CExpr { re: LinExpr::constant(c.re), im: LinExpr::constant(c.im) }
    }

    pub fn conj(&self) -> CExpr {
        CExpr { re: self.re.clone(), im: self.im.scaled(-1.0) }
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        C64::new(self.re.eval(x), self.im.eval(x))
    }
}

impl Mul<&CExpr> for C64 {
    type Output = CExpr;
    fn mul(self, e: &CExpr) -> CExpr {
        CExpr {
            re: e.re.scaled(self.re) - &e.im.scaled(self.im),
            im: e.re.scaled(self.im) + &e.im.scaled(self.re),
        }
    }
}

impl AddAssign<&CExpr> for CExpr {
    fn add_assign(&mut self, rhs: &CExpr) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl Add<&CExpr> for CExpr {
    type Output = CExpr;
    fn add(mut self, rhs: &CExpr) -> CExpr {
        self += rhs;
        self
    }
}

impl Sub<&CExpr> for CExpr {
    type Output = CExpr;
    fn sub(mut self, rhs: &CExpr) -> CExpr {
        self.re += &rhs.re.scaled(-1.0);
        self.im += &rhs.im.scaled(-1.0);
        self
    }
}

/// Square matrix of complex expressions.
#[derive(Debug, Clone)]
pub struct CExprMatrix {
    pub n: usize,
    pub m: usize,
    data: Vec<CExpr>,
}

impl CExprMatrix {
    pub fn from_fn(n: usize, m: usize, mut f: impl FnMut(usize, usize) -> CExpr) -> CExprMatrix {
        let mut data = Vec::with_capacity(n * m);
        for r in 0..n {
            for c in 0..m {
                data.push(f(r, c));
            }
        }
        CExprMatrix { n, m, data }
    }

    pub fn get(&self, r: usize, c: usize) -> &CExpr {
        &self.data[r * self.m + c]
    }

    pub fn adjoint(&self) -> CExprMatrix {
        CExprMatrix::from_fn(self.m, self.n, |r, c| self.get(c, r).conj())
    }

    /// `A · self` for a constant complex matrix `A`.
    pub fn left_mul(&self, a: &nalgebra::DMatrix<C64>) -> CExprMatrix {
        CExprMatrix::from_fn(a.nrows(), self.m, |r, c| {
            let mut e = CExpr::default();
            for k in 0..self.n {
                if a[(r, k)] != C64::new(0.0, 0.0) {
                    e += &(a[(r, k)] * self.get(k, c));
                }
            }
            e
        })
    }

    /// `self · A` for a constant complex matrix `A`.
    pub fn right_mul(&self, a: &nalgebra::DMatrix<C64>) -> CExprMatrix {
        CExprMatrix::from_fn(self.n, a.ncols(), |r, c| {
            let mut e = CExpr::default();
            for k in 0..self.m {
                if a[(k, c)] != C64::new(0.0, 0.0) {
                    e += &(a[(k, c)] * self.get(r, k));
                }
            }
            e
        })
    }
}
