//! Classical flows: trajectory integration, variational monodromy matrices,
//! centre actions `S(x)` along initial-valued trajectories, and the Cayley
//! parametrization `M = (I + JB)^{-1}(I - JB)`.
//!
//! Hamilton's equations are `x' = J dH/dx` with `J(p,q) = (-q,p)`. The centre
//! action of a segment is the symplectic area between the arc and its chord
//! minus `E t`,
//!
//! ```text
//! S = ∫ p·dq  -  ½ (p⁺+p⁻)·(q⁺-q⁻)  -  E t,
//! ```
//!
//! accumulated in the same stepper as the flow so that the derivative identity
//! `ξ = -J dS/dx` holds to integrator accuracy. Quadratic Hamiltonians use the
//! exact matrix-exponential map and a van Loan block exponential for the action;
//! separable polynomial Hamiltonians a 4th-order Yoshida splitting with exact
//! shear tangents; other polynomial Hamiltonians fixed-step RK4 with the
//! variational equations differentiated through the stages.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::phase_space::{Chord, PhasePoint, SymplecticForm};
use crate::poly::Poly;

/// Caustic threshold on `|det(I+M)|`.
pub const CAUSTIC_EPS: f64 = 1e-10;
/// Default step for the Yoshida splitting integrator.
const SPLIT_STEP: f64 = 2.5e-3;
/// Default step for the RK4 fallback.
const RK4_STEP: f64 = 1.0e-3;

/// Matrix exponential by scaled Taylor series with repeated squaring.
pub(crate) fn expm_complex(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    let norm = a.iter().map(|z| z.norm()).fold(0.0, f64::max) * n as f64;
    let s = if norm > 0.25 { (norm / 0.25).log2().ceil() as i32 } else { 0 };
    let scaled = a.map(|z| z / C64::new(2f64.powi(s), 0.0));
    let mut result = DMatrix::<C64>::identity(n, n);
    let mut term = DMatrix::<C64>::identity(n, n);
    for k in 1..=24 {
        term = (&term * &scaled).map(|z| z / C64::new(k as f64, 0.0));
        result += &term;
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

pub(crate) fn expm_real(a: &DMatrix<f64>) -> DMatrix<f64> {
    let ac = a.map(|v| C64::new(v, 0.0));
    expm_complex(&ac).map(|z| z.re)
}

/// Hamiltonian kinds supported by the flow machinery.
#[derive(Clone, Debug)]
pub enum HamiltonianKind {
    /// `H(x) = ½ xᵀ Q x + b·x` with symmetric `Q`.
    Quadratic { q_form: DMatrix<f64>, linear: DVector<f64> },
    /// Smooth polynomial in `(p, q)` with real coefficients.
    Polynomial(Poly),
}

#[derive(Clone, Debug)]
pub struct HamiltonianSpec {
    pub kind: HamiltonianKind,
    pub label: String,
}

impl HamiltonianSpec {
    pub fn quadratic(q_form: DMatrix<f64>, linear: DVector<f64>, label: &str) -> Result<Self> {
        if q_form.nrows() != q_form.ncols() || q_form.nrows() != linear.len() {
            return Err(Error::DimensionMismatch {
                expected: q_form.nrows(),
                got: linear.len(),
            });
        }
        if (q_form.transpose() - &q_form).amax() > 1e-12 {
            return Err(Error::InvalidArgument("quadratic form must be symmetric".into()));
        }
        Ok(Self { kind: HamiltonianKind::Quadratic { q_form, linear }, label: label.into() })
    }

    pub fn polynomial(poly: Poly, label: &str) -> Result<Self> {
        if !poly.is_real(1e-14) {
            return Err(Error::InvalidArgument("polynomial Hamiltonian must be real".into()));
        }
        Ok(Self { kind: HamiltonianKind::Polynomial(poly), label: label.into() })
    }

    /// `H = ω (p² + q²) / 2` per degree of freedom.
    pub fn harmonic(n_dof: usize, omega: f64) -> Self {
        let q_form = DMatrix::identity(2 * n_dof, 2 * n_dof) * omega;
        Self {
            kind: HamiltonianKind::Quadratic { q_form, linear: DVector::zeros(2 * n_dof) },
            label: format!("harmonic({omega})"),
        }
    }

    /// `H = p²/2 + a q²/2 + b q⁴/4` (one degree of freedom).
    pub fn quartic(a: f64, b: f64) -> Self {
        let poly = Poly::from_real_terms(
            1,
            &[(vec![2, 0], 0.5), (vec![0, 2], a / 2.0), (vec![0, 4], b / 4.0)],
        )
        .expect("static terms");
        Self { kind: HamiltonianKind::Polynomial(poly), label: format!("quartic({a},{b})") }
    }

    /// `H = λ ((p² + q²)/2)²` (one degree of freedom, non-separable).
    pub fn kerr_like(lambda: f64) -> Self {
        let c = lambda / 4.0;
        let poly = Poly::from_real_terms(
            1,
            &[(vec![4, 0], c), (vec![2, 2], 2.0 * c), (vec![0, 4], c)],
        )
        .expect("static terms");
        Self { kind: HamiltonianKind::Polynomial(poly), label: format!("kerr-like({lambda})") }
    }

    pub fn n_dof(&self) -> usize {
        match &self.kind {
            HamiltonianKind::Quadratic { q_form, .. } => q_form.nrows() / 2,
            HamiltonianKind::Polynomial(p) => p.n_dof(),
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        match &self.kind {
            HamiltonianKind::Quadratic { q_form, linear } => {
                0.5 * x.dot(&(q_form * x)) + linear.dot(x)
            }
            HamiltonianKind::Polynomial(p) => p.eval_real(x),
        }
    }

    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            HamiltonianKind::Quadratic { q_form, linear } => q_form * x + linear,
            HamiltonianKind::Polynomial(p) => {
                DVector::from_fn(x.len(), |k, _| p.diff(k).eval_real(x))
            }
        }
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.kind {
            HamiltonianKind::Quadratic { q_form, .. } => q_form.clone(),
            HamiltonianKind::Polynomial(p) => {
                let d = x.len();
                DMatrix::from_fn(d, d, |i, j| p.diff(i).diff(j).eval_real(x))
            }
        }
    }

    /// Separable means `H = T(p) + V(q)`: no mixed monomials.
    pub fn is_separable(&self) -> bool {
        match &self.kind {
            HamiltonianKind::Quadratic { q_form, .. } => {
                let n = q_form.nrows() / 2;
                let mut mixed = 0.0f64;
                for i in 0..n {
                    for j in 0..n {
                        mixed = mixed.max(q_form[(i, n + j)].abs());
                    }
                }
                mixed == 0.0
            }
            HamiltonianKind::Polynomial(p) => {
                let n = p.n_dof();
                p.terms().all(|(e, _)| {
                    let dp: u32 = e[..n].iter().sum();
                    let dq: u32 = e[n..].iter().sum();
                    dp == 0 || dq == 0
                })
            }
        }
    }
}

/// One evolution leg: a Hamiltonian acting for a signed duration.
#[derive(Clone, Debug)]
pub struct EvolutionSpec {
    pub hamiltonian: HamiltonianSpec,
    pub duration: f64,
}

impl EvolutionSpec {
    pub fn new(hamiltonian: HamiltonianSpec, duration: f64) -> Self {
        Self { hamiltonian, duration }
    }
}

/// Piecewise-constant evolution: legs applied in list order.
pub type EvolutionChain = Vec<EvolutionSpec>;

/// Reverse a chain (the classical counterpart of the adjoint unitary).
pub fn reversed_chain(chain: &EvolutionChain) -> EvolutionChain {
    chain
        .iter()
        .rev()
        .map(|leg| EvolutionSpec::new(leg.hamiltonian.clone(), -leg.duration))
        .collect()
}

/// A trajectory segment with its centre-action data.
#[derive(Clone, Debug)]
pub struct TrajectorySegment {
    pub start: PhasePoint,
    pub end: PhasePoint,
    pub centre: PhasePoint,
    pub chord: Chord,
    pub action: f64,
    pub monodromy: DMatrix<f64>,
    pub duration: f64,
}

fn finish_segment(
    start: PhasePoint,
    end_coords: DVector<f64>,
    arc_minus_ht: f64,
    monodromy: DMatrix<f64>,
    duration: f64,
) -> TrajectorySegment {
    let n = start.n_dof();
    let end = PhasePoint { coords: end_coords };
    let mut chord_area = 0.0;
    for k in 0..n {
        chord_area += 0.5
            * (start.coords[k] + end.coords[k])
            * (end.coords[n + k] - start.coords[n + k]);
    }
    let centre = start.midpoint(&end);
    let chord = start.chord_to(&end);
    TrajectorySegment {
        start,
        end,
        centre,
        chord,
        action: arc_minus_ht - chord_area,
        monodromy,
        duration,
    }
}

fn flow_quadratic(
    q_form: &DMatrix<f64>,
    linear: &DVector<f64>,
    x0: &PhasePoint,
    t: f64,
) -> TrajectorySegment {
    let dim = q_form.nrows();
    let n = dim / 2;
    let form = SymplecticForm::new(n);
    let a = form.matrix() * q_form; // J Q
    let c = form.apply(linear); // J b

    // augmented generator for the affine flow
    let mut at = DMatrix::zeros(dim + 1, dim + 1);
    at.view_mut((0, 0), (dim, dim)).copy_from(&(&a * t));
    at.view_mut((0, dim), (dim, 1)).copy_from(&(&c * t));

    // quadratic integrand p·q' - H  =  yᵀ K̃ y in y = (x, 1)
    // p·q' = xᵀ P (A x + c) with P = Σ_k e_k e_{n+k}ᵀ
    let mut pa = DMatrix::zeros(dim, dim);
    let mut pc = DVector::zeros(dim);
    for k in 0..n {
        for j in 0..dim {
            pa[(k, j)] = a[(n + k, j)];
        }
        pc[k] = c[n + k];
    }
    let kmat = (&pa + pa.transpose()) * 0.5 - q_form * 0.5;
    let gvec = &pc - linear;
    let mut ktil = DMatrix::zeros(dim + 1, dim + 1);
    ktil.view_mut((0, 0), (dim, dim)).copy_from(&kmat);
    ktil.view_mut((0, dim), (dim, 1)).copy_from(&(&gvec * 0.5));
    ktil.view_mut((dim, 0), (1, dim)).copy_from(&(&gvec * 0.5).transpose());

    // van Loan block: exp([[ -Ãᵀ, K̃ ], [0, Ã]] t) has F22 = e^{Ãt} and
    // F22ᵀ F12 = ∫₀ᵗ e^{Ãᵀτ} K̃ e^{Ãτ} dτ
    let m = dim + 1;
    let mut big = DMatrix::zeros(2 * m, 2 * m);
    big.view_mut((0, 0), (m, m)).copy_from(&(-at.transpose()));
    big.view_mut((0, m), (m, m)).copy_from(&(&ktil * t));
    big.view_mut((m, m), (m, m)).copy_from(&at);
    let eb = expm_real(&big);
    let f12 = eb.view((0, m), (m, m)).into_owned();
    let f22 = eb.view((m, m), (m, m)).into_owned();
    let cint = f22.transpose() * f12;

    let mut y0 = DVector::zeros(m);
    y0.rows_mut(0, dim).copy_from(&x0.coords);
    y0[dim] = 1.0;
    let arc = y0.dot(&(&cint * &y0));

    let monodromy = f22.view((0, 0), (dim, dim)).into_owned();
    let end = f22.view((0, 0), (dim, dim)) * &x0.coords + f22.view((0, dim), (dim, 1)).column(0);
    finish_segment(x0.clone(), end, arc, monodromy, t)
}


fn flow_separable(h: &HamiltonianSpec, x0: &PhasePoint, t: f64) -> Result<TrajectorySegment> {
    let n = h.n_dof();
    let dim = 2 * n;
    let steps = ((t.abs() / SPLIT_STEP).ceil() as usize).max(1);
    let dt = t / steps as f64;
    // Yoshida 4th-order composition of leapfrog steps
    let w1 = 1.0 / (2.0 - 2f64.powf(1.0 / 3.0));
    let w0 = 1.0 - 2.0 * w1;

    let mut x = x0.coords.clone();
    let mut mono = DMatrix::<f64>::identity(dim, dim);
    let mut arc = 0.0;

    let grad_t = |xv: &DVector<f64>| -> DVector<f64> {
        // dT/dp, zero on q slots
        let mut g = h.grad(xv);
        for k in 0..n {
            g[n + k] = 0.0;
        }
        g
    };
    let grad_v = |xv: &DVector<f64>| -> DVector<f64> {
        let mut g = h.grad(xv);
        for k in 0..n {
            g[k] = 0.0;
        }
        g
    };

    // split H = T(p) + V(q): V(q) = H(0, q), T(p) = H(p, 0) - H(0, 0)
    let h00 = h.eval(&DVector::zeros(dim));
    let v_part = |x: &DVector<f64>| -> f64 {
        let mut xq = x.clone();
        for k in 0..n {
            xq[k] = 0.0;
        }
        h.eval(&xq)
    };
    let t_part = |x: &DVector<f64>| -> f64 {
        let mut xp = x.clone();
        for k in 0..n {
            xp[n + k] = 0.0;
        }
        h.eval(&xp) - h00
    };

    let kick = |x: &mut DVector<f64>, mono: &mut DMatrix<f64>, arc: &mut f64, s: f64| {
        // sub-flow of V(q): p -> p - s dV/dq, q fixed; ∫ p·dq = 0, ∫ V dτ = s V
        let gv = grad_v(x);
        let mut dp = DVector::zeros(dim);
        for k in 0..n {
            dp[k] = -s * gv[n + k];
        }
        *arc -= s * v_part(x);
        *x += dp;
        // tangent: δp -= s V''(q) δq
        let hess = h.hessian(x);
        for k in 0..n {
            for j in 0..n {
                let coeff = s * hess[(n + k, n + j)];
                for col in 0..dim {
                    let adj = coeff * mono[(n + j, col)];
                    mono[(k, col)] -= adj;
                }
            }
        }
    };
    let drift = |x: &mut DVector<f64>, mono: &mut DMatrix<f64>, arc: &mut f64, s: f64| {
        // sub-flow of T(p): q -> q + s dT/dp, p fixed; ∫ p·dq = p·Δq, ∫ T dτ = s T
        let gt = grad_t(x);
        let mut dq = DVector::zeros(dim);
        for k in 0..n {
            dq[n + k] = s * gt[k];
        }
        let mut pdq = 0.0;
        for k in 0..n {
            pdq += x[k] * dq[n + k];
        }
        *arc += pdq - s * t_part(x);
        *x += dq;
        let hess = h.hessian(x);
        for k in 0..n {
            for j in 0..n {
                let coeff = s * hess[(k, j)];
                for col in 0..dim {
                    let adj = coeff * mono[(j, col)];
                    mono[(n + k, col)] += adj;
                }
            }
        }
    };

    for _ in 0..steps {
        for w in [w1, w0, w1] {
            let hstep = w * dt;
            kick(&mut x, &mut mono, &mut arc, hstep / 2.0);
            drift(&mut x, &mut mono, &mut arc, hstep);
            kick(&mut x, &mut mono, &mut arc, hstep / 2.0);
        }
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::FlowFailure { segment: 0, reason: "trajectory blow-up".into() });
    }
    Ok(finish_segment(x0.clone(), x, arc, mono, t))
}

fn flow_rk4(h: &HamiltonianSpec, x0: &PhasePoint, t: f64) -> Result<TrajectorySegment> {
    let n = h.n_dof();
    let dim = 2 * n;
    let form = SymplecticForm::new(n);
    let steps = ((t.abs() / RK4_STEP).ceil() as usize).max(1);
    let dt = t / steps as f64;

    // state: x, monodromy columns, arc integral
    let deriv = |x: &DVector<f64>, m: &DMatrix<f64>| {
        let g = h.grad(x);
        let xdot = form.apply(&g);
        let hess = h.hessian(x);
        let jh = form.matrix() * hess;
        let mdot = &jh * m;
        let mut pdq = 0.0;
        for k in 0..n {
            pdq += x[k] * xdot[n + k];
        }
        let sdot = pdq - h.eval(x);
        (xdot, mdot, sdot)
    };

    let mut x = x0.coords.clone();
    let mut m = DMatrix::<f64>::identity(dim, dim);
    let mut arc = 0.0;
    for _ in 0..steps {
        let (k1x, k1m, k1s) = deriv(&x, &m);
        let (k2x, k2m, k2s) = deriv(&(&x + &k1x * (dt / 2.0)), &(&m + &k1m * (dt / 2.0)));
        let (k3x, k3m, k3s) = deriv(&(&x + &k2x * (dt / 2.0)), &(&m + &k2m * (dt / 2.0)));
        let (k4x, k4m, k4s) = deriv(&(&x + &k3x * dt), &(&m + &k3m * dt));
        x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (dt / 6.0);
        m += (k1m + k2m * 2.0 + k3m * 2.0 + k4m) * (dt / 6.0);
        arc += (k1s + 2.0 * k2s + 2.0 * k3s + k4s) * (dt / 6.0);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::FlowFailure { segment: 0, reason: "trajectory blow-up".into() });
        }
    }
    Ok(finish_segment(x0.clone(), x, arc, m, t))
}

/// Integrate one segment from `x0` for time `t`, with monodromy and action.
pub fn flow_segment(h: &HamiltonianSpec, x0: &PhasePoint, t: f64) -> Result<TrajectorySegment> {
    if x0.n_dof() != h.n_dof() {
        return Err(Error::DimensionMismatch { expected: 2 * h.n_dof(), got: x0.dim() });
    }
    if !t.is_finite() {
        return Err(Error::InvalidArgument("non-finite duration".into()));
    }
    if t == 0.0 {
        let dim = x0.dim();
        return Ok(finish_segment(
            x0.clone(),
            x0.coords.clone(),
            0.0,
            DMatrix::identity(dim, dim),
            0.0,
        ));
    }
    match &h.kind {
        HamiltonianKind::Quadratic { q_form, linear } => Ok(flow_quadratic(q_form, linear, x0, t)),
        HamiltonianKind::Polynomial(_) => {
            if h.is_separable() {
                flow_separable(h, x0, t)
            } else {
                flow_rk4(h, x0, t)
            }
        }
    }
}

/// Endpoint of the Hamiltonian flow.
pub fn flow(h: &HamiltonianSpec, x0: &PhasePoint, t: f64) -> Result<PhasePoint> {
    Ok(flow_segment(h, x0, t)?.end)
}

/// Monodromy matrix of the flow linearized around the trajectory from `x0`.
pub fn monodromy(h: &HamiltonianSpec, x0: &PhasePoint, t: f64) -> Result<DMatrix<f64>> {
    Ok(flow_segment(h, x0, t)?.monodromy)
}

/// Centre action of the segment launched at `x0`.
pub fn centre_action(h: &HamiltonianSpec, x0: &PhasePoint, t: f64) -> Result<f64> {
    Ok(flow_segment(h, x0, t)?.action)
}

/// Flow a point through a chain of evolutions.
pub fn flow_chain(chain: &EvolutionChain, x0: &PhasePoint) -> Result<PhasePoint> {
    let mut x = x0.clone();
    for leg in chain {
        x = flow(&leg.hamiltonian, &x, leg.duration)?;
    }
    Ok(x)
}

/// Cayley parameter `B = -J (I - M)(I + M)^{-1}`, symmetric away from caustics;
/// `B` is half the Hessian of the centre action of the linear map `M`.
pub fn cayley_b(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = m.nrows();
    let form = SymplecticForm::new(dim / 2);
    let ipm = DMatrix::<f64>::identity(dim, dim) + m;
    let det = ipm.determinant();
    if det.abs() < CAUSTIC_EPS {
        return Err(Error::Caustic { det });
    }
    let inv = ipm.try_inverse().ok_or(Error::Caustic { det })?;
    let b = -form.matrix() * (DMatrix::<f64>::identity(dim, dim) - m) * inv;
    Ok((&b + b.transpose()) * 0.5)
}

/// Reconstruct `M = (I + JB)^{-1}(I - JB)` from the Cayley parameter.
pub fn cayley_m(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = b.nrows();
    let form = SymplecticForm::new(dim / 2);
    let jb = form.matrix() * b;
    let id = DMatrix::<f64>::identity(dim, dim);
    let inv = (&id + &jb).try_inverse().ok_or(Error::Caustic { det: 0.0 })?;
    Ok(inv * (&id - &jb))
}

/// Root-search the segment of `H` over time `t` whose centre is `centre`,
/// Newton-iterating on the initial point with Jacobian `(I + M)/2`.
pub fn segment_with_centre(
    h: &HamiltonianSpec,
    t: f64,
    centre: &PhasePoint,
    seed: &PhasePoint,
) -> Result<TrajectorySegment> {
    let dim = centre.dim();
    let mut x = seed.clone();
    for _ in 0..50 {
        let seg = flow_segment(h, &x, t)?;
        let res = &seg.centre.coords - &centre.coords;
        if res.amax() < 1e-12 {
            return Ok(seg);
        }
        let jac = (DMatrix::<f64>::identity(dim, dim) + &seg.monodromy) * 0.5;
        let step = jac
            .lu()
            .solve(&res)
            .ok_or(Error::Caustic { det: 0.0 })?;
        x = PhasePoint { coords: &x.coords - step };
    }
    let seg = flow_segment(h, &x, t)?;
    let res = (&seg.centre.coords - &centre.coords).amax();
    if res < 1e-9 {
        Ok(seg)
    } else {
        Err(Error::NewtonFailed { iters: 50, residual: res })
    }
}
