//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! Small and purpose-built: enough to expand the per-frame closure
//! constraint symbolically and to run exact elimination on its
//! coefficients.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Number of variables a [`Poly`] can carry.
pub const NVARS: usize = 9;

pub type Exponents = [u8; NVARS];

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Poly {
    terms: BTreeMap<Exponents, BigRational>,
}

pub fn rational(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(value: BigRational) -> Self {
        let mut p = Self::zero();
        p.add_term([0; NVARS], value);
        p
    }

    pub fn int(n: i64) -> Self {
        Self::constant(rational(n))
    }

    pub fn var(index: usize) -> Self {
        let mut e = [0; NVARS];
        e[index] = 1;
        let mut p = Self::zero();
        p.add_term(e, BigRational::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &BigRational)> {
        self.terms.iter()
    }

    pub fn add_term(&mut self, exps: Exponents, coeff: BigRational) {
        if coeff.is_zero() {
            return;
        }
        let slot = self.terms.entry(exps).or_insert_with(BigRational::zero);
        *slot += coeff;
        if slot.is_zero() {
            self.terms.remove(&exps);
        }
    }

    pub fn scale(&self, k: &BigRational) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(e, c)| (*e, c * k)).collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Poly {
        (0..n).fold(Poly::int(1), |acc, _| &acc * self)
    }

    /// Rewrites every `x^2` (for `x = var`) as `replacement` until the
    /// degree in `var` is at most one.
    pub fn reduce_square(&self, var: usize, replacement: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (e, c) in &self.terms {
            let k = e[var] / 2;
            let mut base = *e;
            base[var] -= 2 * k;
            let mut mono = Poly::zero();
            mono.add_term(base, c.clone());
            let term = &mono * &replacement.pow(u32::from(k));
            out = &out + &term;
        }
        out
    }

    /// Splits into `(even, odd)` with `self = even + var * odd`, assuming the
    /// degree in `var` is at most one.
    pub fn split_linear(&self, var: usize) -> (Poly, Poly) {
        let mut even = Poly::zero();
        let mut odd = Poly::zero();
        for (e, c) in &self.terms {
            assert!(e[var] <= 1, "split_linear expects degree at most one");
            let mut base = *e;
            if base[var] == 1 {
                base[var] = 0;
                odd.add_term(base, c.clone());
            } else {
                even.add_term(base, c.clone());
            }
        }
        (even, odd)
    }

    /// Groups terms by the exponents of `outer`; each group keeps the
    /// remaining variables as a polynomial.
    pub fn group_by(&self, outer: &[usize]) -> BTreeMap<Vec<u8>, Poly> {
        let mut groups: BTreeMap<Vec<u8>, Poly> = BTreeMap::new();
        for (e, c) in &self.terms {
            let key: Vec<u8> = outer.iter().map(|&v| e[v]).collect();
            let mut rest = *e;
            for &v in outer {
                rest[v] = 0;
            }
            groups.entry(key).or_default().add_term(rest, c.clone());
        }
        groups
    }

    pub fn eval(&self, values: &[f64; NVARS]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                let mono: f64 = e.iter().zip(values).map(|(&k, &x)| x.powi(i32::from(k))).product();
                c.to_f64().unwrap_or(f64::NAN) * mono
            })
            .sum()
    }

    pub fn max_abs_coeff(&self) -> BigRational {
        self.terms
            .values()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(BigRational::zero)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(*e, c.clone());
        }
        out
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(*e, -c.clone());
        }
        out
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(&rational(-1))
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let mut e = [0u8; NVARS];
                for i in 0..NVARS {
                    e[i] = ea[i] + eb[i];
                }
                out.add_term(e, ca * cb);
            }
        }
        out
    }
}

/// Exact row reduction over the rationals.
///
/// Rows are fed one at a time; each is either independent of the earlier
/// ones (and becomes a new basis row) or is written as a combination of
/// the basis rows.
#[derive(Debug, Default)]
pub struct Eliminator {
    /// Reduced rows with pivot column, paired with their expression in
    /// terms of basis rows.
    echelon: Vec<(usize, Vec<BigRational>, Vec<BigRational>)>,
    width: usize,
    basis_count: usize,
}

pub enum Reduction {
    /// Row became basis row `index`.
    NewBasis(usize),
    /// Row equals this combination of basis rows.
    Combination(Vec<BigRational>),
}

impl Eliminator {
    pub fn new(width: usize) -> Self {
        Self {
            echelon: Vec::new(),
            width,
            basis_count: 0,
        }
    }

    pub fn basis_count(&self) -> usize {
        self.basis_count
    }

    pub fn push(&mut self, row: &[BigRational]) -> Reduction {
        assert_eq!(row.len(), self.width);
        let mut v = row.to_vec();
        let mut combo: Vec<BigRational> = vec![BigRational::zero(); self.basis_count];
        for (pivot, erow, ecombo) in &self.echelon {
            if v[*pivot].is_zero() {
                continue;
            }
            let f = &v[*pivot] / &erow[*pivot];
            for (x, y) in v.iter_mut().zip(erow) {
                if !y.is_zero() {
                    *x -= &f * y;
                }
            }
            for (k, y) in ecombo.iter().enumerate() {
                if !y.is_zero() {
                    combo[k] += &f * y;
                }
            }
        }
        match v.iter().position(|x| !x.is_zero()) {
            None => Reduction::Combination(combo),
            Some(pivot) => {
                let index = self.basis_count;
                self.basis_count += 1;
                for (_, _, c) in &mut self.echelon {
                    c.push(BigRational::zero());
                }
                // v = row - sum(combo_k * basis_k), so as a combination of
                // basis rows it is e_index - combo.
                let mut own: Vec<BigRational> = combo.into_iter().map(|x| -x).collect();
                own.push(BigRational::one());
                self.echelon.push((pivot, v, own));
                Reduction::NewBasis(index)
            }
        }
    }
}
