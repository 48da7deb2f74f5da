//! Exact quantum mechanics on a truncated harmonic-oscillator (Fock) basis:
//! operator construction, unitaries, reflection/translation operators,
//! Wigner/chord transforms, and exact correlation traces. One degree of
//! freedom; ground truth for the semiclassical machinery.
//!
//! Traces of non-trace-class operators (products of reflections and
//! metaplectic unitaries) are Abel-regularized: `tr_η[X] = Σ_n X_nn e^{-ηn}`
//! extrapolated polynomially to `η = 0`. The regularizer is validated against
//! the exact `tr[D(μ) P] = 1/2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::dynamics::{EvolutionChain, HamiltonianKind, HamiltonianSpec};
use crate::error::{Error, Result};
use crate::phase_space::{Chord, PhasePoint, SymplecticForm};
use crate::poly::Poly;
use crate::symbols::GaussianState;

/// Damping nodes for the Abel-regularized trace: `η D` is kept large enough
/// that cutoff truncation stays below the extrapolation error.
fn reg_etas(cutoff: usize) -> [f64; 6] {
    let eta0 = (27.0 / cutoff as f64).max(0.055);
    core::array::from_fn(|i| eta0 + 0.02 * i as f64)
}

/// Truncated Fock space with `cutoff` levels.
#[derive(Clone, Debug)]
pub struct OracleSpace {
    pub cutoff: usize,
    pub hbar: f64,
}

/// A matrix operator on the oracle space.
#[derive(Clone, Debug)]
pub struct OracleOperator {
    pub matrix: DMatrix<C64>,
    pub hermitian: bool,
}

impl OracleOperator {
    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `f(A)` for Hermitian `A`, via the real symmetric embedding
/// `A = X + iY  ->  [[X, -Y], [Y, X]]` (an algebra homomorphism), so no
/// external LAPACK is needed.
pub fn func_hermitian(a: &DMatrix<C64>, f: impl Fn(f64) -> C64) -> DMatrix<C64> {
    let d = a.nrows();
    let mut e = DMatrix::<f64>::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let z = a[(i, j)];
            e[(i, j)] = z.re;
            e[(i + d, j + d)] = z.re;
            e[(i, j + d)] = -z.im;
            e[(i + d, j)] = z.im;
        }
    }
    let se = e.symmetric_eigen();
    let vc = se.eigenvectors.map(|x| C64::new(x, 0.0));
    let fd = DMatrix::from_diagonal(&se.eigenvalues.map(&f));
    let w = &vc * fd * vc.transpose();
    DMatrix::from_fn(d, d, |i, j| w[(i, j)] + C64::new(0.0, 1.0) * w[(i + d, j)])
}

impl OracleSpace {
    pub fn new(cutoff: usize, hbar: f64) -> Result<Self> {
        if cutoff < 16 {
            return Err(Error::InvalidArgument("cutoff must be at least 16".into()));
        }
        if !(hbar > 0.0) {
            return Err(Error::InvalidArgument("hbar must be positive".into()));
        }
        Ok(Self { cutoff, hbar })
    }

    pub fn annihilation(&self) -> DMatrix<C64> {
        let d = self.cutoff;
        DMatrix::from_fn(d, d, |i, j| {
            if j == i + 1 {
                C64::new((j as f64).sqrt(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    pub fn position(&self) -> DMatrix<C64> {
        let a = self.annihilation();
        (&a + a.adjoint()) * C64::new((self.hbar / 2.0).sqrt(), 0.0)
    }

    pub fn momentum(&self) -> DMatrix<C64> {
        let a = self.annihilation();
        (a.adjoint() - &a) * C64::new(0.0, (self.hbar / 2.0).sqrt())
    }

    pub fn identity(&self) -> OracleOperator {
        OracleOperator { matrix: DMatrix::identity(self.cutoff, self.cutoff), hermitian: true }
    }

    /// Displacement `D(μ) = exp(μ a† - μ̄ a)` by the exact Fock matrix elements
    /// `⟨n+k|D|n⟩ = sqrt(n!/(n+k)!) μ^k e^{-z/2} L_n^{(k)}(z)`, `z = |μ|²`,
    /// evaluated along diagonals with the amplitude folded into the Laguerre
    /// recurrence (numerically stable, unlike column-by-column stepping).
    pub fn displacement(&self, mu: C64) -> DMatrix<C64> {
        let d = self.cutoff;
        let mut m = DMatrix::<C64>::zeros(d, d);
        let z = mu.norm_sqr();
        if z == 0.0 {
            return DMatrix::identity(d, d);
        }
        let abs_mu = z.sqrt();
        let phase_lo = mu / abs_mu; // lower-triangle phase per diagonal step
        let phase_up = -mu.conj() / abs_mu;
        for k in 0..d {
            let cnt = d - k;
            // ln |⟨k|D|0⟩| = k ln|μ| - z/2 - ln(k!)/2
            let mut logpref = k as f64 * abs_mu.ln() - z / 2.0;
            for j in 1..=k {
                logpref -= 0.5 * (j as f64).ln();
            }
            let ph_lo = phase_lo.powu(k as u32);
            let ph_up = phase_up.powu(k as u32);
            // u_n = sqrt(n!/(n+k)!) L_n^{(k)}(z) / exp(logscale - logpref-part)
            let mut logscale = 0.0f64;
            let mut u_prev = 0.0f64;
            let mut u = 1.0f64;
            for n in 0..cnt {
                if n > 0 {
                    let nf = n as f64;
                    let kf = k as f64;
                    let next = if n == 1 {
                        (1.0 + kf - z) * (1.0 / (kf + 1.0)).sqrt() * u
                    } else {
                        let r1 = (nf / (nf + kf)).sqrt();
                        let r2 = ((nf - 1.0) * nf / ((nf + kf - 1.0) * (nf + kf))).sqrt();
                        ((2.0 * (nf - 1.0) + kf + 1.0 - z) * r1 * u
                            - (nf - 1.0 + kf) * r2 * u_prev)
                            / nf
                    };
                    u_prev = u;
                    u = next;
                    if u.abs() > 1e200 {
                        u *= 1e-200;
                        u_prev *= 1e-200;
                        logscale += 200.0 * std::f64::consts::LN_10;
                    }
                }
                let logmag = logpref + logscale + if u == 0.0 { f64::NEG_INFINITY } else { u.abs().ln() };
                if logmag > -340.0 {
                    let val = u.signum() * logmag.exp();
                    m[(n + k, n)] = ph_lo * val;
                    m[(n, n + k)] = ph_up * val;
                }
            }
        }
        m
    }

    pub fn parity(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.cutoff, self.cutoff, |i, j| {
            if i == j {
                C64::new(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    fn alpha_of(&self, p: f64, q: f64) -> C64 {
        C64::new(q, p) / (2.0 * self.hbar).sqrt()
    }

    /// Reflection operator `R̂_x = D(2α_x) P`, unitary and involutive.
    pub fn reflection(&self, x: &PhasePoint) -> Result<OracleOperator> {
        if x.n_dof() != 1 {
            return Err(Error::DimensionMismatch { expected: 2, got: x.dim() });
        }
        let alpha = self.alpha_of(x.p(0), x.q(0));
        let m = self.displacement(alpha * 2.0) * self.parity();
        Ok(OracleOperator { matrix: m, hermitian: false })
    }

    /// Translation operator `T̂_ξ`, displacing `(p, q)` by the chord.
    pub fn translation(&self, xi: &Chord) -> Result<OracleOperator> {
        if xi.n_dof() != 1 {
            return Err(Error::DimensionMismatch { expected: 2, got: xi.dim() });
        }
        let alpha = self.alpha_of(xi.p(0), xi.q(0));
        Ok(OracleOperator { matrix: self.displacement(alpha), hermitian: false })
    }

    /// Weyl quantization of a real polynomial symbol (one dof), by the fully
    /// symmetrized ordering `Weyl(p^m q^n) = 2^{-n} Σ_k C(n,k) q̂^k p̂^m q̂^{n-k}`.
    pub fn quantize_poly(&self, poly: &Poly) -> Result<OracleOperator> {
        if poly.n_dof() != 1 {
            return Err(Error::InvalidArgument("oracle is one degree of freedom".into()));
        }
        let d = self.cutoff;
        let qm = self.position();
        let pm = self.momentum();
        // power caches
        let maxdeg = poly.degree() as usize;
        let mut qpow = vec![DMatrix::<C64>::identity(d, d)];
        let mut ppow = vec![DMatrix::<C64>::identity(d, d)];
        for k in 1..=maxdeg {
            qpow.push(&qpow[k - 1] * &qm);
            ppow.push(&ppow[k - 1] * &pm);
        }
        let mut out = DMatrix::<C64>::zeros(d, d);
        for (e, c) in poly.terms() {
            let (m, n) = (e[0] as usize, e[1] as usize);
            let mut acc = DMatrix::<C64>::zeros(d, d);
            let mut binom = 1.0f64;
            for k in 0..=n {
                if k > 0 {
                    binom *= (n - k + 1) as f64 / k as f64;
                }
                acc += (&qpow[k] * &ppow[m] * &qpow[n - k]) * C64::new(binom, 0.0);
            }
            out += acc * (*c * C64::new(0.5f64.powi(n as i32), 0.0));
        }
        let op = OracleOperator { matrix: out, hermitian: poly.is_real(1e-12) };
        Ok(op)
    }

    /// Weyl quantization of a grid symbol: `Â = 2^N Σ_x (d²ᴺ/(2πħ)^N) A(x) R̂_x`.
    pub fn quantize_grid(&self, sym: &crate::symbols::GridSymbol) -> Result<OracleOperator> {
        use crate::symbols::SymbolKind;
        if sym.grid.n_dof() != 1 {
            return Err(Error::InvalidArgument("oracle is one degree of freedom".into()));
        }
        if sym.kind != SymbolKind::Weyl {
            return Err(Error::InvalidArgument("quantize expects a Weyl symbol".into()));
        }
        let d = self.cutoff;
        let scale = 2.0 * sym.grid.volume_element() / (2.0 * std::f64::consts::PI * self.hbar);
        let mut out = DMatrix::<C64>::zeros(d, d);
        for (flat, v) in sym.values.iter().enumerate() {
            if v.norm() < 1e-16 {
                continue;
            }
            let node = sym.grid.node_of(flat);
            let r = self.reflection(&PhasePoint { coords: node })?;
            out += r.matrix * (*v * scale);
        }
        let op = OracleOperator { matrix: out, hermitian: false };
        let herm = op.hermiticity_defect() < 1e-8;
        Ok(OracleOperator { hermitian: herm, ..op })
    }

    /// Hamiltonian matrix of a spec (quadratic forms are expanded to their
    /// polynomial symbols first; the linear term is included).
    pub fn hamiltonian_matrix(&self, h: &HamiltonianSpec) -> Result<OracleOperator> {
        let poly = match &h.kind {
            HamiltonianKind::Polynomial(p) => p.clone(),
            HamiltonianKind::Quadratic { q_form, linear } => {
                if q_form.nrows() != 2 {
                    return Err(Error::InvalidArgument("oracle is one degree of freedom".into()));
                }
                Poly::from_real_terms(
                    1,
                    &[
                        (vec![2, 0], 0.5 * q_form[(0, 0)]),
                        (vec![1, 1], q_form[(0, 1)]),
                        (vec![0, 2], 0.5 * q_form[(1, 1)]),
                        (vec![1, 0], linear[0]),
                        (vec![0, 1], linear[1]),
                    ],
                )?
            }
        };
        self.quantize_poly(&poly)
    }

    /// `exp(-i t Ĥ / ħ)` by spectral calculus; exactly unitary.
    pub fn unitary(&self, h: &HamiltonianSpec, t: f64) -> Result<OracleOperator> {
        let hm = self.hamiltonian_matrix(h)?;
        let hbar = self.hbar;
        let u = func_hermitian(&hm.matrix, |lam| {
            let ph = -t * lam / hbar;
            C64::new(ph.cos(), ph.sin())
        });
        Ok(OracleOperator { matrix: u, hermitian: false })
    }

    /// Unitary of a piecewise-constant chain (`chain[0]` acts first).
    pub fn unitary_chain(&self, chain: &EvolutionChain) -> Result<OracleOperator> {
        let mut u = DMatrix::<C64>::identity(self.cutoff, self.cutoff);
        for leg in chain {
            let ul = self.unitary(&leg.hamiltonian, leg.duration)?;
            u = ul.matrix * u;
        }
        Ok(OracleOperator { matrix: u, hermitian: false })
    }

    /// Density matrix of a Gaussian state: squeezed vacuum rotated to match
    /// `G`, then displaced to the mean.
    pub fn gaussian_density(&self, state: &GaussianState) -> Result<OracleOperator> {
        if state.n_dof() != 1 {
            return Err(Error::InvalidArgument("oracle is one degree of freedom".into()));
        }
        // metaplectic map x -> G^{-1/2} x realizes Wigner exponent G from vacuum
        let se = state.g_form.clone().symmetric_eigen();
        let mut log_g = DMatrix::<f64>::zeros(2, 2);
        for k in 0..2 {
            let lam = se.eigenvalues[k];
            if lam <= 0.0 {
                return Err(Error::NonPositiveDefinite);
            }
            let v = se.eigenvectors.column(k);
            log_g += v * v.transpose() * lam.ln();
        }
        let a_gen = log_g * -0.5; // G^{-1/2} = exp(a_gen), symmetric traceless
        let form = SymplecticForm::new(1);
        let q_form = -form.matrix() * &a_gen; // flow exp(J Q) = exp(a_gen)
        let q_form = (&q_form + q_form.transpose()) * 0.5;
        let hq = HamiltonianSpec::quadratic(q_form, DVector::zeros(2), "squeeze")?;
        let us = self.unitary(&hq, 1.0)?;
        let mut vac = DVector::<C64>::zeros(self.cutoff);
        vac[0] = C64::new(1.0, 0.0);
        let disp = self.displacement(self.alpha_of(state.mean.p(0), state.mean.q(0)));
        let psi = disp * (us.matrix * vac);
        let rho = DMatrix::from_fn(self.cutoff, self.cutoff, |i, j| psi[i] * psi[j].conj());
        let op = OracleOperator { matrix: rho, hermitian: true };
        let tail = self.tail_weight(&op);
        if tail > 1e-10 {
            return Err(Error::CutoffTooSmall { tail });
        }
        Ok(op)
    }

    /// Relative Frobenius mass of the outer eighth of rows and columns.
    pub fn tail_weight(&self, op: &OracleOperator) -> f64 {
        let d = self.cutoff;
        let band = d - d / 8;
        let mut outer = 0.0;
        let mut total = 0.0;
        for i in 0..d {
            for j in 0..d {
                let m = op.matrix[(i, j)].norm_sqr();
                total += m;
                if i >= band || j >= band {
                    outer += m;
                }
            }
        }
        if total == 0.0 {
            0.0
        } else {
            (outer / total).sqrt()
        }
    }

    pub fn trace(&self, m: &DMatrix<C64>) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..m.nrows() {
            acc += m[(i, i)];
        }
        acc
    }

    /// Abel-regularized trace of a (generally non-trace-class) operator.
    pub fn reg_trace(&self, m: &DMatrix<C64>) -> C64 {
        let d = m.nrows();
        let diag: Vec<C64> = (0..d).map(|i| m[(i, i)]).collect();
        Self::extrapolate(&diag, reg_etas(d))
    }

    /// Regularized trace of `a · b` without forming the product.
    pub fn reg_trace_of_product(&self, a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
        let d = a.nrows();
        let diag: Vec<C64> = (0..d)
            .map(|i| {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..d {
                    acc += a[(i, j)] * b[(j, i)];
                }
                acc
            })
            .collect();
        Self::extrapolate(&diag, reg_etas(d))
    }

    fn extrapolate(diag: &[C64], etas: [f64; 6]) -> C64 {
        // Lagrange extrapolation of Σ diag_n e^{-ηn} to η = 0
        let vals: Vec<C64> = etas
            .iter()
            .map(|&eta| {
                let mut acc = C64::new(0.0, 0.0);
                let mut w = 1.0;
                let step = (-eta).exp();
                for z in diag {
                    acc += z * w;
                    w *= step;
                }
                acc
            })
            .collect();
        let mut out = C64::new(0.0, 0.0);
        for (i, &eta_i) in etas.iter().enumerate() {
            let mut l = 1.0;
            for (j, &eta_j) in etas.iter().enumerate() {
                if i != j {
                    l *= (0.0 - eta_j) / (eta_i - eta_j);
                }
            }
            out += vals[i] * l;
        }
        out
    }

    /// Weyl symbol `A(x) = 2^N tr[R̂_x Â]` (regularized trace).
    pub fn weyl_symbol_at(&self, op: &OracleOperator, x: &PhasePoint) -> Result<C64> {
        let r = self.reflection(x)?;
        Ok(self.reg_trace_of_product(&r.matrix, &op.matrix) * 2.0)
    }

    /// Chord symbol `Ã(ξ) = tr[T̂_{-ξ} Â]` (regularized trace).
    pub fn chord_symbol_at(&self, op: &OracleOperator, xi: &Chord) -> Result<C64> {
        let t = self.translation(&xi.scaled(-1.0))?;
        Ok(self.reg_trace_of_product(&t.matrix, &op.matrix))
    }

    /// Exact correlation `tr[U_{ν+1} Â_ν U_ν ⋯ Â_1 U_1 ρ̂]`; trace-class, plain
    /// trace. `observables[0]` is `Â_1`.
    pub fn correlation(
        &self,
        rho: &OracleOperator,
        observables: &[OracleOperator],
        chains: &[EvolutionChain],
    ) -> Result<C64> {
        if chains.len() != observables.len() + 1 {
            return Err(Error::InvalidArgument(
                "need one more evolution than observables".into(),
            ));
        }
        let mut acc = self.unitary_chain(&chains[0])?.matrix * &rho.matrix;
        for (j, obs) in observables.iter().enumerate() {
            acc = &obs.matrix * acc;
            acc = self.unitary_chain(&chains[j + 1])?.matrix * acc;
        }
        Ok(self.trace(&acc))
    }

    /// Trace of the compound unitary. With `centres.len() == chains.len()` this
    /// is the full compound `U_{ν+1} R̂_{x_ν} ⋯ U_1 R̂_{x_0}` (`centres[0]` is
    /// `x_0`, acting first); with `centres.len() == chains.len() - 1` the
    /// reduced compound `U_{ν+1} R̂_{x_ν} ⋯ R̂_{x_1} U_1`. Regularized trace.
    pub fn compound_trace(
        &self,
        centres: &[PhasePoint],
        chains: &[EvolutionChain],
    ) -> Result<C64> {
        let full = if centres.len() == chains.len() {
            true
        } else if centres.len() + 1 == chains.len() {
            false
        } else {
            return Err(Error::InvalidArgument(
                "centres must number chains or chains - 1".into(),
            ));
        };
        let d = self.cutoff;
        let mut acc = DMatrix::<C64>::identity(d, d);
        let mut centre_iter = centres.iter();
        if full {
            let r = self.reflection(centre_iter.next().unwrap())?;
            acc = r.matrix;
        }
        for (k, chain) in chains.iter().enumerate() {
            let u = self.unitary_chain(chain)?;
            acc = u.matrix * acc;
            if k + 1 < chains.len() {
                let r = self.reflection(centre_iter.next().ok_or_else(|| {
                    Error::InvalidArgument("not enough centres".into())
                })?)?;
                acc = r.matrix * acc;
            }
        }
        Ok(self.reg_trace(&acc))
    }
}
