//! Polynomial phase-space symbols in `(p_1..p_N, q_1..q_N)` with complex
//! coefficients, their Moyal (Groenewold) star product, and Gaussian moments.
//!
//! For polynomials the star-product series terminates, so products of
//! mechanical observables and zero-time correlations can be evaluated exactly.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Sparse polynomial over phase space; key = exponent vector of length `2N`.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    n_dof: usize,
    terms: BTreeMap<Vec<u32>, C64>,
}

impl Poly {
    pub fn zero(n_dof: usize) -> Self {
        Self { n_dof, terms: BTreeMap::new() }
    }

    pub fn constant(n_dof: usize, c: C64) -> Self {
        let mut p = Self::zero(n_dof);
        p.add_term(&vec![0; 2 * n_dof], c);
        p
    }

    pub fn one(n_dof: usize) -> Self {
        Self::constant(n_dof, C64::new(1.0, 0.0))
    }

    /// The coordinate monomial `p_k`.
    pub fn p(n_dof: usize, k: usize) -> Self {
        let mut e = vec![0u32; 2 * n_dof];
        e[k] = 1;
        let mut poly = Self::zero(n_dof);
        poly.add_term(&e, C64::new(1.0, 0.0));
        poly
    }

    /// The coordinate monomial `q_k`.
    pub fn q(n_dof: usize, k: usize) -> Self {
        let mut e = vec![0u32; 2 * n_dof];
        e[n_dof + k] = 1;
        let mut poly = Self::zero(n_dof);
        poly.add_term(&e, C64::new(1.0, 0.0));
        poly
    }

    /// Build from real monomial coefficients: pairs of (exponents, coefficient).
    pub fn from_real_terms(n_dof: usize, terms: &[(Vec<u32>, f64)]) -> Result<Self> {
        let mut poly = Self::zero(n_dof);
        for (e, c) in terms {
            if e.len() != 2 * n_dof {
                return Err(Error::DimensionMismatch { expected: 2 * n_dof, got: e.len() });
            }
            poly.add_term(e, C64::new(*c, 0.0));
        }
        Ok(poly)
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &C64)> {
        self.terms.iter()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }

    pub fn add_term(&mut self, exps: &[u32], c: C64) {
        if c == C64::new(0.0, 0.0) {
            return;
        }
        let entry = self.terms.entry(exps.to_vec()).or_insert(C64::new(0.0, 0.0));
        *entry += c;
        if entry.norm() < 1e-300 {
            self.terms.remove(exps);
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e, *c);
        }
        out
    }

    pub fn scale(&self, s: C64) -> Poly {
        let mut out = Self::zero(self.n_dof);
        for (e, c) in &self.terms {
            out.add_term(e, c * s);
        }
        out
    }

    /// Pointwise (commutative) product.
    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Self::zero(self.n_dof);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(&e, ca * cb);
            }
        }
        out
    }

    /// Partial derivative along coordinate axis `axis` (0..2N).
    pub fn diff(&self, axis: usize) -> Poly {
        let mut out = Self::zero(self.n_dof);
        for (e, c) in &self.terms {
            if e[axis] == 0 {
                continue;
            }
            let mut d = e.clone();
            d[axis] -= 1;
            out.add_term(&d, c * C64::new(e[axis] as f64, 0.0));
        }
        out
    }

    pub fn eval(&self, x: &DVector<f64>) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (e, c) in &self.terms {
            let mut m = 1.0;
            for (k, &ek) in e.iter().enumerate() {
                m *= x[k].powi(ek as i32);
            }
            acc += c * m;
        }
        acc
    }

    pub fn eval_real(&self, x: &DVector<f64>) -> f64 {
        self.eval(x).re
    }

    /// Poisson-bracket-type bidifferential `Λ(A,B) = Σ_k ∂q_k A ∂p_k B − ∂p_k A ∂q_k B`,
    /// normalized so that `Λ(q, p) = 1`.
    fn bidiff(a: &Poly, b: &Poly) -> Poly {
        let n = a.n_dof;
        let mut out = Poly::zero(n);
        for k in 0..n {
            out = out.add(&a.diff(n + k).mul(&b.diff(k)));
            out = out.add(&a.diff(k).mul(&b.diff(n + k)).scale(C64::new(-1.0, 0.0)));
        }
        out
    }

    /// Moyal star product: the Weyl symbol of the operator product `Â B̂`.
    /// `A ⋆ B = Σ_k (iħ/2)^k Λ^k(A,B) / k!`; the series terminates for
    /// polynomials. In particular `q ⋆ p = qp + iħ/2`.
    pub fn star(&self, other: &Poly, hbar: f64) -> Result<Poly> {
        if self.n_dof != other.n_dof {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.n_dof,
                got: 2 * other.n_dof,
            });
        }
        let n = self.n_dof;
        // carry the k-th order as a sum of (A-part, B-part) pairs
        let mut pairs: Vec<(Poly, Poly)> = vec![(self.clone(), other.clone())];
        let mut out = self.mul(other);
        let maxk = (self.degree() + other.degree()) as usize;
        let mut coeff = C64::new(1.0, 0.0);
        for k in 1..=maxk {
            coeff *= C64::new(0.0, hbar / 2.0) / C64::new(k as f64, 0.0);
            let mut next: Vec<(Poly, Poly)> = Vec::new();
            for (pa, pb) in &pairs {
                for j in 0..n {
                    next.push((pa.diff(n + j), pb.diff(j)));
                    next.push((pa.diff(j), pb.diff(n + j).scale(C64::new(-1.0, 0.0))));
                }
            }
            let mut order = Poly::zero(n);
            for (pa, pb) in &next {
                order = order.add(&pa.mul(pb));
            }
            if order.terms.is_empty() {
                break;
            }
            out = out.add(&order.scale(coeff));
            pairs = next;
        }
        let _ = Self::bidiff; // kept for tests of the first-order term
        Ok(out)
    }

    /// First-order Moyal bracket term, exposed for tests.
    pub fn poisson(&self, other: &Poly) -> Poly {
        Self::bidiff(self, other)
    }
}

/// Moments `E[x^e]` of a Gaussian with the given mean and covariance, via the
/// Stein recursion `E[x_i f] = μ_i E[f] + Σ_j Σ_ij E[∂_j f]`.
pub struct GaussianMoments {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    cache: std::cell::RefCell<BTreeMap<Vec<u32>, f64>>,
}

impl GaussianMoments {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self { mean, cov, cache: std::cell::RefCell::new(BTreeMap::new()) }
    }

    pub fn moment(&self, exps: &[u32]) -> f64 {
        if exps.iter().all(|&e| e == 0) {
            return 1.0;
        }
        if let Some(v) = self.cache.borrow().get(exps) {
            return *v;
        }
        let i = exps.iter().position(|&e| e > 0).unwrap();
        let mut e1 = exps.to_vec();
        e1[i] -= 1;
        let mut acc = self.mean[i] * self.moment(&e1);
        for j in 0..exps.len() {
            if e1[j] > 0 {
                let mut e2 = e1.clone();
                e2[j] -= 1;
                acc += self.cov[(i, j)] * e1[j] as f64 * self.moment(&e2);
            }
        }
        self.cache.borrow_mut().insert(exps.to_vec(), acc);
        acc
    }

    /// `E[P(x)]` for a polynomial symbol.
    pub fn expect(&self, poly: &Poly) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (e, c) in poly.terms() {
            acc += c * self.moment(e);
        }
        acc
    }
}
