//! Phase-space representations: Weyl and chord symbols on uniform grids, the
//! Wigner function of Gaussian states, the centre ↔ chord symplectic Fourier
//! transform, and Weyl (Moyal) products by quadrature.
//!
//! Normalization conventions, pinned by the identity-operator and reflection
//! checks against the oracle:
//!
//! ```text
//! Ã(ξ) = (2πħ)^{-N} ∫ dx A(x) e^{+(i/ħ) x∧ξ},
//! A(x) = (2πħ)^{-N} ∫ dξ Ã(ξ) e^{-(i/ħ) x∧ξ},
//! ```
//!
//! so the chord symbol of the identity is a `(2πħ)^N`-weighted discrete delta
//! at `ξ = 0` and the chord symbol of a reflection `R̂_x` is the constant
//! `2^{-N} e^{(i/ħ) x∧ξ}`. Wigner functions carry the extra `(2πħ)^{-N}`:
//! `W = Symb[ρ̂]/(2πħ)^N`, normalized to `∫W dx = 1`.

use std::f64::consts::PI;
use std::io::{BufRead, Read, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::phase_space::{PhasePoint, SymplecticForm};
use crate::poly::Poly;

/// One uniform grid axis: nodes `lo + k d`, `k = 0..n`, `d = (hi-lo)/n`.
/// The right endpoint is excluded (periodic-trapezoid convention, so every
/// node carries weight `d`).
#[derive(Clone, Debug, PartialEq)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl AxisSpec {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.spacing()
    }

    /// Symmetric axis covering `[-half, half)` with `n` nodes, node at 0 when
    /// `n` is even.
    pub fn symmetric(half: f64, n: usize) -> Self {
        AxisSpec { lo: -half, hi: half, n }
    }
}

/// A uniform tensor grid over 2N phase-space axes ordered `(p_1..p_N, q_1..q_N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub axes: Vec<AxisSpec>,
    pub hbar: f64,
}

impl GridSpec {
    pub fn new(axes: Vec<AxisSpec>, hbar: f64) -> Result<Self> {
        if axes.is_empty() || axes.len() % 2 != 0 {
            return Err(Error::InvalidArgument("grid needs 2N axes".into()));
        }
        if axes.iter().any(|a| a.n < 2 || !(a.hi > a.lo)) {
            return Err(Error::InvalidArgument("axis needs n >= 2 and hi > lo".into()));
        }
        if !(hbar > 0.0) {
            return Err(Error::InvalidArgument("hbar must be positive".into()));
        }
        Ok(Self { axes, hbar })
    }

    /// Symmetric grid with the spacing `d = sqrt(πħ/n)` that makes the
    /// discrete Moyal kernel an exact discrete delta (identity ⋆ identity = 1).
    pub fn moyal_symmetric(n_dof: usize, n: usize, hbar: f64) -> Result<Self> {
        let d = (PI * hbar / n as f64).sqrt();
        let half = d * n as f64 / 2.0;
        Self::new(vec![AxisSpec::symmetric(half, n); 2 * n_dof], hbar)
    }

    /// Symmetric grid sized to a Gaussian state: `n_sigmas` standard deviations
    /// of the widest marginal on every axis.
    pub fn for_state(state: &GaussianState, n: usize, n_sigmas: f64, hbar: f64) -> Result<Self> {
        let dim = state.mean.dim();
        let cov = state.covariance(hbar);
        let mut axes = Vec::with_capacity(dim);
        for k in 0..dim {
            let sigma = cov[(k, k)].sqrt();
            let c = state.mean.coords[k];
            let half = n_sigmas * sigma;
            axes.push(AxisSpec { lo: c - half, hi: c + half, n });
        }
        Self::new(axes, hbar)
    }

    pub fn n_dof(&self) -> usize {
        self.axes.len() / 2
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn volume_element(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing()).product()
    }

    /// Dual grid for the chord variable: axis `ξ_{p_k}` is conjugate to `q_k`
    /// and `ξ_{q_k}` to `p_k`, each with spacing `2πħ/(n d)` and symmetric
    /// about 0.
    pub fn chord_dual(&self) -> GridSpec {
        let n_dof = self.n_dof();
        let mut axes = vec![AxisSpec::symmetric(1.0, 2); 2 * n_dof];
        for k in 0..n_dof {
            let make = |src: &AxisSpec| {
                let d = 2.0 * PI * self.hbar / (src.n as f64 * src.spacing());
                AxisSpec::symmetric(d * src.n as f64 / 2.0, src.n)
            };
            // ξ_{p_k} dual to q_k, ξ_{q_k} dual to p_k
            axes[k] = make(&self.axes[n_dof + k]);
            axes[n_dof + k] = make(&self.axes[k]);
        }
        GridSpec { axes, hbar: self.hbar }
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.axes.len()];
        for i in (0..self.axes.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.axes[i + 1].n;
        }
        s
    }

    pub fn node_of(&self, flat: usize) -> DVector<f64> {
        let strides = self.strides();
        DVector::from_fn(self.axes.len(), |i, _| {
            let idx = (flat / strides[i]) % self.axes[i].n;
            self.axes[i].node(idx)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolKind {
    Weyl,
    Chord,
}

/// A symbol tabulated on a grid, row-major with axis 0 outermost.
#[derive(Clone, Debug)]
pub struct GridSymbol {
    pub grid: GridSpec,
    pub values: Vec<C64>,
    pub kind: SymbolKind,
}

impl GridSymbol {
    pub fn from_fn(
        grid: GridSpec,
        kind: SymbolKind,
        f: impl Fn(&DVector<f64>) -> C64,
    ) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.node_of(i))).collect();
        Self { grid, values, kind }
    }

    pub fn constant(grid: GridSpec, kind: SymbolKind, c: C64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values, kind }
    }

    /// `Σ values · d^{2N}`.
    pub fn integrate(&self) -> C64 {
        let vol = self.grid.volume_element();
        self.values.iter().sum::<C64>() * vol
    }

    /// Multilinear interpolation; zero outside the窗 grid window.
    pub fn interpolate(&self, x: &DVector<f64>) -> C64 {
        let dim = self.grid.axes.len();
        let strides = self.grid.strides();
        let mut base = vec![0usize; dim];
        let mut frac = vec![0f64; dim];
        for i in 0..dim {
            let a = &self.grid.axes[i];
            let t = (x[i] - a.lo) / a.spacing();
            if t < 0.0 || t > (a.n - 1) as f64 {
                return C64::new(0.0, 0.0);
            }
            let k = (t.floor() as usize).min(a.n - 2);
            base[i] = k;
            frac[i] = t - k as f64;
        }
        let mut acc = C64::new(0.0, 0.0);
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut flat = 0usize;
            for i in 0..dim {
                let up = (corner >> i) & 1 == 1;
                w *= if up { frac[i] } else { 1.0 - frac[i] };
                flat += (base[i] + up as usize) * strides[i];
            }
            acc += self.values[flat] * w;
        }
        acc
    }

    /// Fraction of `|values|²` mass in the outer 10% band of any axis.
    pub fn leakage_fraction(&self) -> f64 {
        let dim = self.grid.axes.len();
        let strides = self.grid.strides();
        let mut outer = 0.0;
        let mut total = 0.0;
        for (flat, v) in self.values.iter().enumerate() {
            let m = v.norm_sqr();
            total += m;
            let mut is_outer = false;
            for i in 0..dim {
                let n = self.grid.axes[i].n;
                let idx = (flat / strides[i]) % n;
                let band = (n / 10).max(1);
                if idx < band || idx >= n - band {
                    is_outer = true;
                    break;
                }
            }
            if is_outer {
                outer += m;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            outer / total
        }
    }
}

/// A Gaussian state: `W(x) = (πħ)^{-N} exp(-(x-x̄)·G(x-x̄)/ħ)` with symmetric
/// positive `G`, `det G = 1` (unit weight).
#[derive(Clone, Debug)]
pub struct GaussianState {
    pub mean: PhasePoint,
    pub g_form: DMatrix<f64>,
}

impl GaussianState {
    pub fn new(mean: PhasePoint, g_form: DMatrix<f64>) -> Result<Self> {
        let dim = mean.dim();
        if g_form.nrows() != dim || g_form.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: g_form.nrows() });
        }
        if (g_form.transpose() - &g_form).amax() > 1e-12 {
            return Err(Error::InvalidArgument("G must be symmetric".into()));
        }
        if g_form.clone().cholesky().is_none() {
            return Err(Error::NonPositiveDefinite);
        }
        let det = g_form.determinant();
        if (det - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "G must have unit determinant (pure Gaussian), det = {det}"
            )));
        }
        Ok(Self { mean, g_form })
    }

    /// Coherent state centred at `mean` (G = I).
    pub fn coherent(mean: PhasePoint) -> Self {
        let dim = mean.dim();
        Self { mean, g_form: DMatrix::identity(dim, dim) }
    }

    /// One-dof squeezed state: `G = diag(e^{2r}, e^{-2r})` rotated by `phi`.
    pub fn squeezed_n1(mean: PhasePoint, r: f64, phi: f64) -> Result<Self> {
        let d = DMatrix::from_diagonal(&DVector::from_row_slice(&[(2.0 * r).exp(), (-2.0 * r).exp()]));
        let rot = DMatrix::from_row_slice(2, 2, &[phi.cos(), -phi.sin(), phi.sin(), phi.cos()]);
        let g = &rot * d * rot.transpose();
        Self::new(mean, g)
    }

    pub fn n_dof(&self) -> usize {
        self.mean.n_dof()
    }

    /// Phase-space covariance of `W`: `(ħ/2) G^{-1}`.
    pub fn covariance(&self, hbar: f64) -> DMatrix<f64> {
        self.g_form.clone().try_inverse().expect("G positive definite") * (hbar / 2.0)
    }
}

/// Wigner function of a Gaussian state at a point.
pub fn wigner_gaussian(state: &GaussianState, x: &PhasePoint, hbar: f64) -> Result<f64> {
    if x.dim() != state.mean.dim() {
        return Err(Error::DimensionMismatch { expected: state.mean.dim(), got: x.dim() });
    }
    let n = state.n_dof();
    let d = &x.coords - &state.mean.coords;
    let quad = d.dot(&(&state.g_form * &d));
    Ok((PI * hbar).powi(-(n as i32)) * (-quad / hbar).exp())
}

/// Chord function of a Gaussian state (closed form):
/// `χ(ξ) = (2πħ)^{-N} exp(-(Jξ)·G^{-1}(Jξ)/(4ħ)) e^{(i/ħ) x̄∧ξ}`.
pub fn chord_function_gaussian(state: &GaussianState, xi: &DVector<f64>, hbar: f64) -> C64 {
    let n = state.n_dof();
    let form = SymplecticForm::new(n);
    let jxi = form.apply(xi);
    let ginv = state.g_form.clone().try_inverse().expect("G positive definite");
    let quad = jxi.dot(&(&ginv * &jxi));
    let phase = form.wedge(&state.mean.coords, xi) / hbar;
    (2.0 * PI * hbar).powi(-(n as i32))
        * (-quad / (4.0 * hbar)).exp()
        * C64::new(phase.cos(), phase.sin())
}

/// Tabulate the Wigner function of a Gaussian on a grid.
pub fn wigner_on_grid(state: &GaussianState, grid: &GridSpec) -> Result<GridSymbol> {
    let hbar = grid.hbar;
    let st = state.clone();
    Ok(GridSymbol::from_fn(grid.clone(), SymbolKind::Weyl, move |x| {
        let xp = PhasePoint { coords: x.clone() };
        C64::new(wigner_gaussian(&st, &xp, hbar).expect("dim"), 0.0)
    }))
}

fn transform_axis(
    values: &[C64],
    dims: &[usize],
    axis: usize,
    kernel: &DMatrix<C64>,
) -> Vec<C64> {
    // out[.., j, ..] = Σ_k kernel[(j, k)] in[.., k, ..]
    let n = dims[axis];
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let mut out = vec![C64::new(0.0, 0.0); values.len()];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * n * inner + i;
            for j in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..n {
                    acc += kernel[(j, k)] * values[base + k * inner];
                }
                out[base + j * inner] = acc;
            }
        }
    }
    out
}

fn permute_pq(values: &[C64], dims: &[usize]) -> Vec<C64> {
    // swap axis blocks (0..N) <-> (N..2N)
    let two_n = dims.len();
    let n = two_n / 2;
    let perm: Vec<usize> = (0..two_n).map(|i| (i + n) % two_n).collect();
    let new_dims: Vec<usize> = perm.iter().map(|&i| dims[i]).collect();
    let mut old_strides = vec![1usize; two_n];
    for i in (0..two_n - 1).rev() {
        old_strides[i] = old_strides[i + 1] * dims[i + 1];
    }
    let mut new_strides = vec![1usize; two_n];
    for i in (0..two_n - 1).rev() {
        new_strides[i] = new_strides[i + 1] * new_dims[i + 1];
    }
    let mut out = vec![C64::new(0.0, 0.0); values.len()];
    for (flat, v) in values.iter().enumerate() {
        let mut nf = 0usize;
        for i in 0..two_n {
            let idx = (flat / old_strides[perm[i]]) % dims[perm[i]];
            nf += idx * new_strides[i];
        }
        out[nf] = *v;
    }
    out
}

fn symplectic_fourier(sym: &GridSymbol, inverse: bool) -> Result<GridSymbol> {
    let n_dof = sym.grid.n_dof();
    let hbar = sym.grid.hbar;
    let (src, dst, out_kind) = match (sym.kind, inverse) {
        (SymbolKind::Weyl, false) => (sym.grid.clone(), sym.grid.chord_dual(), SymbolKind::Chord),
        (SymbolKind::Chord, true) => (sym.grid.clone(), sym.grid.chord_dual(), SymbolKind::Weyl),
        _ => {
            return Err(Error::InvalidArgument(
                "centre_to_chord needs a Weyl symbol; chord_to_centre a chord symbol".into(),
            ))
        }
    };
    // kernel e^{+(i/ħ) x∧ξ} forward, e^{-(i/ħ) x∧ξ} inverse, with
    // x∧ξ = Σ_k p_k ξq_k - q_k ξp_k. In both directions the source axis in the
    // first block (p_k forward, ξ_{p_k} inverse) pairs with its conjugate with
    // sign +, the second block with sign -; the block swap of the conjugate
    // variables is what distinguishes the two directions.
    let _ = inverse;
    let dims: Vec<usize> = src.axes.iter().map(|a| a.n).collect();
    let mut values = sym.values.clone();
    for i in 0..2 * n_dof {
        let sign = if i < n_dof { 1.0 } else { -1.0 };
        // dual axis spec: after the block swap, source axis i lands at slot
        // (i + N) mod 2N of the destination grid
        let dst_slot = (i + n_dof) % (2 * n_dof);
        let src_axis = &src.axes[i];
        let dst_axis = &dst.axes[dst_slot];
        let d = src_axis.spacing();
        let kernel = DMatrix::from_fn(src_axis.n, src_axis.n, |j, k| {
            let phase = sign * src_axis.node(k) * dst_axis.node(j) / hbar;
            C64::new(phase.cos(), phase.sin()) * d
        });
        values = transform_axis(&values, &dims, i, &kernel);
    }
    let values = permute_pq(&values, &dims);
    let scale = (2.0 * PI * hbar).powi(-(n_dof as i32));
    let values = values.into_iter().map(|v| v * scale).collect();
    Ok(GridSymbol { grid: dst, values, kind: out_kind })
}

/// Discrete symplectic Fourier transform, Weyl → chord.
pub fn centre_to_chord(sym: &GridSymbol) -> Result<GridSymbol> {
    symplectic_fourier(sym, false)
}

/// Inverse transform, chord → Weyl.
pub fn chord_to_centre(sym: &GridSymbol) -> Result<GridSymbol> {
    symplectic_fourier(sym, true)
}

/// Weyl → chord with a Nyquist guard: errors when more than `threshold` of the
/// spectral mass lands in the outer band of the chord grid.
pub fn centre_to_chord_checked(sym: &GridSymbol, threshold: f64) -> Result<GridSymbol> {
    let out = centre_to_chord(sym)?;
    let leak = out.leakage_fraction();
    if leak > threshold {
        return Err(Error::GridTooCoarse { leak, threshold });
    }
    Ok(out)
}

/// Moyal star product of two Weyl grid symbols on the same grid, computed as a
/// twisted convolution of their chord symbols:
/// `C̃(ζ) = (2πħ)^{-N} ∫ dη Ã(ζ-η) B̃(η) e^{(i/2ħ) ζ∧η}`.
pub fn star_product_grid(a: &GridSymbol, b: &GridSymbol) -> Result<GridSymbol> {
    if a.grid != b.grid {
        return Err(Error::InvalidArgument("star product needs matching grids".into()));
    }
    let hbar = a.grid.hbar;
    let n_dof = a.grid.n_dof();
    let form = SymplecticForm::new(n_dof);
    let at = centre_to_chord(a)?;
    let bt = centre_to_chord(b)?;
    let grid = at.grid.clone();
    let m = grid.len();
    let vol = grid.volume_element();
    let scale = (2.0 * PI * hbar).powi(-(n_dof as i32)) * vol;
    let dims: Vec<usize> = grid.axes.iter().map(|x| x.n).collect();
    let strides = grid.strides();
    // index arithmetic on the uniform symmetric grid: node index k ↔ value
    // lo + k d; differences stay on the lattice
    let mut out = vec![C64::new(0.0, 0.0); m];
    let nodes: Vec<DVector<f64>> = (0..m).map(|i| grid.node_of(i)).collect();
    for zi in 0..m {
        let zeta = &nodes[zi];
        let mut acc = C64::new(0.0, 0.0);
        'inner: for ei in 0..m {
            let eta = &nodes[ei];
            // flat index of ζ - η
            let mut flat = 0usize;
            for ax in 0..dims.len() {
                let kz = (zi / strides[ax]) % dims[ax];
                let ke = (ei / strides[ax]) % dims[ax];
                // node index of the difference: kz - ke + (index of 0)
                let zero_idx = (-grid.axes[ax].lo / grid.axes[ax].spacing()).round() as isize;
                let kd = kz as isize - ke as isize + zero_idx;
                if kd < 0 || kd >= dims[ax] as isize {
                    continue 'inner;
                }
                flat += kd as usize * strides[ax];
            }
            let ph = 0.5 * form.wedge(zeta, eta) / hbar;
            acc += at.values[flat] * bt.values[ei] * C64::new(ph.cos(), ph.sin());
        }
        out[zi] = acc * scale;
    }
    let twisted = GridSymbol { grid, values: out, kind: SymbolKind::Chord };
    chord_to_centre(&twisted)
}

/// Multi-factor Weyl product evaluated at one centre. `factors[0]` is the
/// leftmost operator (`{A_ν ⋯ A_1}` with `A_1` rightmost). For two factors this
/// is the direct double quadrature
/// `(πħ)^{-2N} ΣΣ A_2(x_2) A_1(x_1) e^{(i/ħ)Δ_3(x_0,x_1,x_2)}`; larger even
/// counts are reduced pairwise (the product is associative). Odd counts are
/// routed to the chord form by the caller.
pub fn weyl_product(factors: &[GridSymbol], x0: &PhasePoint) -> Result<C64> {
    if factors.len() % 2 != 0 || factors.is_empty() {
        return Err(Error::ParityViolation(
            "the centre-side product formula needs an even number of factors".into(),
        ));
    }
    if factors.len() == 2 {
        let a2 = &factors[0];
        let a1 = &factors[1];
        if a2.grid != a1.grid {
            return Err(Error::InvalidArgument("factors need matching grids".into()));
        }
        let grid = &a2.grid;
        let hbar = grid.hbar;
        let n_dof = grid.n_dof();
        let form = SymplecticForm::new(n_dof);
        let m = grid.len();
        let vol = grid.volume_element();
        let scale = (PI * hbar).powi(-2 * n_dof as i32) * vol * vol;
        let nodes: Vec<DVector<f64>> = (0..m).map(|i| grid.node_of(i)).collect();
        // Δ_3(x0, x1, x2) = 2 (x1 - x0) ∧ (x2 - x0)
        let mut acc = C64::new(0.0, 0.0);
        for i1 in 0..m {
            let d1 = &nodes[i1] - &x0.coords;
            let mut inner = C64::new(0.0, 0.0);
            for i2 in 0..m {
                let d2 = &nodes[i2] - &x0.coords;
                let ph = 2.0 * form.wedge(&d1, &d2) / hbar;
                inner += a2.values[i2] * C64::new(ph.cos(), ph.sin());
            }
            acc += a1.values[i1] * inner;
        }
        return Ok(acc * scale);
    }
    // pairwise reduction from the right: {A_ν…A_1} = A_ν ⋆ (…(A_2 ⋆ A_1))
    let mut acc = factors.last().unwrap().clone();
    for f in factors[..factors.len() - 1].iter().rev() {
        acc = star_product_grid(f, &acc)?;
    }
    Ok(acc.interpolate(&x0.coords))
}

/// Observable: a polynomial symbol or a tabulated grid symbol.
#[derive(Clone, Debug)]
pub enum ObservableSpec {
    Polynomial(Poly),
    Grid(GridSymbol),
}

impl ObservableSpec {
    pub fn poly(p: Poly) -> Result<Self> {
        if !p.is_real(1e-12) {
            return Err(Error::InvalidArgument("observable symbols are real".into()));
        }
        Ok(ObservableSpec::Polynomial(p))
    }

    pub fn n_dof(&self) -> usize {
        match self {
            ObservableSpec::Polynomial(p) => p.n_dof(),
            ObservableSpec::Grid(g) => g.grid.n_dof(),
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> C64 {
        match self {
            ObservableSpec::Polynomial(p) => p.eval(x),
            ObservableSpec::Grid(g) => g.interpolate(x),
        }
    }

    pub fn as_poly(&self) -> Option<&Poly> {
        match self {
            ObservableSpec::Polynomial(p) => Some(p),
            ObservableSpec::Grid(_) => None,
        }
    }
}

// ---------------------------------------------------------------------------
// GridSymbol import/export
// ---------------------------------------------------------------------------

/// CSV layout: `# axis,<lo>,<hi>,<n>` per axis, `# hbar,<value>`,
/// `# kind,<weyl|chord>`, then `index,re,im` rows.
pub fn write_csv<W: Write>(sym: &GridSymbol, mut w: W) -> Result<()> {
    for a in &sym.grid.axes {
        writeln!(w, "# axis,{:.17e},{:.17e},{}", a.lo, a.hi, a.n)?;
    }
    writeln!(w, "# hbar,{:.17e}", sym.grid.hbar)?;
    writeln!(
        w,
        "# kind,{}",
        match sym.kind {
            SymbolKind::Weyl => "weyl",
            SymbolKind::Chord => "chord",
        }
    )?;
    writeln!(w, "index,re,im")?;
    for (i, v) in sym.values.iter().enumerate() {
        writeln!(w, "{},{:.17e},{:.17e}", i, v.re, v.im)?;
    }
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<GridSymbol> {
    let reader = std::io::BufReader::new(r);
    let mut axes = Vec::new();
    let mut hbar = None;
    let mut kind = None;
    let mut values = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line == "index,re,im" {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# ") {
            let parts: Vec<&str> = rest.split(',').collect();
            match parts[0] {
                "axis" if parts.len() == 4 => {
                    let lo: f64 = parts[1].parse().map_err(|_| bad(line))?;
                    let hi: f64 = parts[2].parse().map_err(|_| bad(line))?;
                    let n: usize = parts[3].parse().map_err(|_| bad(line))?;
                    axes.push(AxisSpec { lo, hi, n });
                }
                "hbar" if parts.len() == 2 => {
                    hbar = Some(parts[1].parse().map_err(|_| bad(line))?);
                }
                "kind" if parts.len() == 2 => {
                    kind = Some(match parts[1] {
                        "weyl" => SymbolKind::Weyl,
                        "chord" => SymbolKind::Chord,
                        _ => return Err(bad(line)),
                    });
                }
                _ => return Err(bad(line)),
            }
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(bad(line));
        }
        let re: f64 = parts[1].parse().map_err(|_| bad(line))?;
        let im: f64 = parts[2].parse().map_err(|_| bad(line))?;
        values.push(C64::new(re, im));
    }
    let grid = GridSpec::new(axes, hbar.ok_or_else(|| Error::Parse("missing hbar".into()))?)?;
    let kind = kind.ok_or_else(|| Error::Parse("missing kind".into()))?;
    if values.len() != grid.len() {
        return Err(Error::Parse(format!(
            "value count {} does not match grid size {}",
            values.len(),
            grid.len()
        )));
    }
    Ok(GridSymbol { grid, values, kind })
}

fn bad(line: &str) -> Error {
    Error::Parse(format!("malformed line: {line}"))
}

const BINARY_MAGIC: &[u8; 4] = b"WWGS";

/// Binary layout (little-endian): magic `WWGS`, u32 version = 1, u32 kind,
/// u32 axis count, f64 hbar, per axis (f64 lo, f64 hi, u64 n), then the values
/// as contiguous (re, im) f64 pairs, row-major with axis 0 outermost.
pub fn write_binary<W: Write>(sym: &GridSymbol, mut w: W) -> Result<()> {
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&1u32.to_le_bytes())?;
    let kind = match sym.kind {
        SymbolKind::Weyl => 0u32,
        SymbolKind::Chord => 1u32,
    };
    w.write_all(&kind.to_le_bytes())?;
    w.write_all(&(sym.grid.axes.len() as u32).to_le_bytes())?;
    w.write_all(&sym.grid.hbar.to_le_bytes())?;
    for a in &sym.grid.axes {
        w.write_all(&a.lo.to_le_bytes())?;
        w.write_all(&a.hi.to_le_bytes())?;
        w.write_all(&(a.n as u64).to_le_bytes())?;
    }
    for v in &sym.values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<GridSymbol> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Parse("bad magic".into()));
    }
    let mut u32buf = [0u8; 4];
    let mut f64buf = [0u8; 8];
    r.read_exact(&mut u32buf)?;
    if u32::from_le_bytes(u32buf) != 1 {
        return Err(Error::Parse("unsupported version".into()));
    }
    r.read_exact(&mut u32buf)?;
    let kind = match u32::from_le_bytes(u32buf) {
        0 => SymbolKind::Weyl,
        1 => SymbolKind::Chord,
        _ => return Err(Error::Parse("bad kind".into())),
    };
    r.read_exact(&mut u32buf)?;
    let n_axes = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut f64buf)?;
    let hbar = f64::from_le_bytes(f64buf);
    let mut axes = Vec::with_capacity(n_axes);
    let mut u64buf = [0u8; 8];
    for _ in 0..n_axes {
        r.read_exact(&mut f64buf)?;
        let lo = f64::from_le_bytes(f64buf);
        r.read_exact(&mut f64buf)?;
        let hi = f64::from_le_bytes(f64buf);
        r.read_exact(&mut u64buf)?;
        let n = u64::from_le_bytes(u64buf) as usize;
        axes.push(AxisSpec { lo, hi, n });
    }
    let grid = GridSpec::new(axes, hbar)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        r.read_exact(&mut f64buf)?;
        let re = f64::from_le_bytes(f64buf);
        r.read_exact(&mut f64buf)?;
        let im = f64::from_le_bytes(f64buf);
        values.push(C64::new(re, im));
    }
    Ok(GridSymbol { grid, values, kind })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_gaussian() -> GaussianState {
        GaussianState::coherent(PhasePoint::n1(0.0, 0.0))
    }

    #[test]
    fn wigner_peak_and_normalization() {
        let hbar = 1.0;
        let st = unit_gaussian();
        let peak = wigner_gaussian(&st, &PhasePoint::n1(0.0, 0.0), hbar).unwrap();
        assert_abs_diff_eq!(peak, 1.0 / (PI * hbar), epsilon = 1e-15);

        let grid = GridSpec::for_state(&st, 64, 7.0, hbar).unwrap();
        let w = wigner_on_grid(&st, &grid).unwrap();
        let total = w.integrate();
        assert_abs_diff_eq!(total.re, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(total.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn squeezed_state_normalized() {
        let hbar = 0.5;
        let st = GaussianState::squeezed_n1(PhasePoint::n1(0.3, -0.2), 0.4, 0.7).unwrap();
        let grid = GridSpec::for_state(&st, 96, 7.5, hbar).unwrap();
        let w = wigner_on_grid(&st, &grid).unwrap();
        assert_abs_diff_eq!(w.integrate().re, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn transform_round_trip_random_symbol() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let grid = GridSpec::moyal_symmetric(1, 24, 1.0).unwrap();
        let sym = GridSymbol {
            values: (0..grid.len())
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
            grid,
            kind: SymbolKind::Weyl,
        };
        let back = chord_to_centre(&centre_to_chord(&sym).unwrap()).unwrap();
        let err = sym
            .values
            .iter()
            .zip(&back.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "round trip error {err}");
    }

    #[test]
    fn gaussian_chord_matches_closed_form() {
        let hbar = 1.0;
        let st = GaussianState::squeezed_n1(PhasePoint::n1(0.4, 0.1), 0.3, 0.2).unwrap();
        let grid = GridSpec::for_state(&st, 64, 8.0, hbar).unwrap();
        let w = wigner_on_grid(&st, &grid).unwrap();
        let chi = centre_to_chord_checked(&w, 1e-8).unwrap();
        let mut max_err = 0.0f64;
        for i in (0..chi.grid.len()).step_by(7) {
            let xi = chi.grid.node_of(i);
            let expect = chord_function_gaussian(&st, &xi, hbar);
            max_err = max_err.max((chi.values[i] - expect).norm());
        }
        assert!(max_err < 1e-8, "chord mismatch {max_err}");
    }

    #[test]
    fn chord_of_reflection_is_constant() {
        // Weyl symbol of R̂_0 is (πħ)^N δ(x): a discrete delta of that mass
        // transforms to the constant 2^{-N}
        let hbar = 0.7;
        let grid = GridSpec::moyal_symmetric(1, 32, hbar).unwrap();
        let vol = grid.volume_element();
        let mut values = vec![C64::new(0.0, 0.0); grid.len()];
        // origin node: both axes at index n/2
        let strides = [32usize, 1];
        let origin = 16 * strides[0] + 16 * strides[1];
        values[origin] = C64::new((PI * hbar) / vol, 0.0);
        let sym = GridSymbol { grid, values, kind: SymbolKind::Weyl };
        let chi = centre_to_chord(&sym).unwrap();
        for v in chi.values.iter().step_by(11) {
            assert_abs_diff_eq!(v.re, 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn chord_of_identity_is_delta() {
        let hbar = 1.0;
        let grid = GridSpec::moyal_symmetric(1, 32, hbar).unwrap();
        let sym = GridSymbol::constant(grid.clone(), SymbolKind::Weyl, C64::new(1.0, 0.0));
        let chi = centre_to_chord(&sym).unwrap();
        // mass concentrates at ξ = 0 with weight (2πħ)^N / volume element
        let vol = chi.grid.volume_element();
        let origin = 16 * 32 + 16;
        assert_abs_diff_eq!(chi.values[origin].re * vol, 2.0 * PI * hbar, epsilon = 1e-9);
        let off = chi.values[origin + 5].norm();
        assert!(off < 1e-9, "off-peak {off}");
    }

    #[test]
    fn nyquist_violation_detected() {
        // a Gaussian much narrower than the grid spacing leaks
        let hbar = 1.0;
        let st = unit_gaussian();
        let grid = GridSpec::new(
            vec![AxisSpec::symmetric(40.0, 16); 2],
            hbar,
        )
        .unwrap();
        let w = wigner_on_grid(&st, &grid).unwrap();
        assert!(matches!(
            centre_to_chord_checked(&w, 1e-6),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn weyl_product_identity_factors() {
        let hbar = 1.0;
        let grid = GridSpec::moyal_symmetric(1, 32, hbar).unwrap();
        let one = GridSymbol::constant(grid.clone(), SymbolKind::Weyl, C64::new(1.0, 0.0));
        // exact on lattice points with the Moyal-commensurate spacing
        for flat in [0usize, 16 * 32 + 16, 5 * 32 + 20] {
            let x0 = PhasePoint { coords: grid.node_of(flat) };
            let v = weyl_product(&[one.clone(), one.clone()], &x0).unwrap();
            assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-9);
        }
        // off-lattice evaluation only suffers windowing ringing
        let v = weyl_product(&[one.clone(), one], &PhasePoint::n1(0.31, -0.2)).unwrap();
        assert!((v - C64::new(1.0, 0.0)).norm() < 1e-2);
    }

    #[test]
    fn weyl_product_odd_count_rejected() {
        let grid = GridSpec::moyal_symmetric(1, 8, 1.0).unwrap();
        let one = GridSymbol::constant(grid, SymbolKind::Weyl, C64::new(1.0, 0.0));
        assert!(matches!(
            weyl_product(&[one], &PhasePoint::n1(0.0, 0.0)),
            Err(Error::ParityViolation(_))
        ));
    }

    #[test]
    fn star_product_grid_matches_weyl_product_on_gaussians() {
        // dual route: twisted convolution vs direct double quadrature
        let hbar = 1.0;
        let grid = GridSpec::moyal_symmetric(1, 24, hbar).unwrap();
        let ga = GaussianState::coherent(PhasePoint::n1(0.2, 0.3));
        let gb = GaussianState::coherent(PhasePoint::n1(-0.25, 0.1));
        let a = wigner_on_grid(&ga, &grid).unwrap();
        let b = wigner_on_grid(&gb, &grid).unwrap();
        let st = star_product_grid(&a, &b).unwrap();
        for flat in [300usize, 301, 180] {
            let x0 = PhasePoint { coords: grid.node_of(flat) };
            let direct = weyl_product(&[a.clone(), b.clone()], &x0).unwrap();
            let viastar = st.values[flat];
            assert!(
                (direct - viastar).norm() < 1e-8,
                "{direct} vs {viastar}"
            );
        }
    }

    #[test]
    fn csv_round_trip() {
        let grid = GridSpec::moyal_symmetric(1, 8, 0.8).unwrap();
        let sym = GridSymbol::from_fn(grid, SymbolKind::Chord, |x| C64::new(x[0], x[1] * 0.5));
        let mut buf = Vec::new();
        write_csv(&sym, &mut buf).unwrap();
        let back = read_csv(&buf[..]).unwrap();
        assert_eq!(back.kind, sym.kind);
        assert_eq!(back.grid, sym.grid);
        assert_eq!(back.values, sym.values);
    }

    #[test]
    fn binary_round_trip() {
        let grid =
            GridSpec::new(vec![AxisSpec { lo: -1.0, hi: 2.0, n: 5 }, AxisSpec::symmetric(3.0, 4)], 1.3)
                .unwrap();
        let sym = GridSymbol::from_fn(grid, SymbolKind::Weyl, |x| C64::new(x[0] * x[1], -x[0]));
        let mut buf = Vec::new();
        write_binary(&sym, &mut buf).unwrap();
        let back = read_binary(&buf[..]).unwrap();
        assert_eq!(back.kind, sym.kind);
        assert_eq!(back.grid, sym.grid);
        assert_eq!(back.values, sym.values);
    }

    #[test]
    fn malformed_csv_rejected() {
        let junk = "# axis,0,1,8\nnot,a,row,at,all\n";
        assert!(read_csv(junk.as_bytes()).is_err());
    }
}
