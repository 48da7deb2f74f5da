//! Symplectic linear algebra, reflection/translation affine maps, and symplectic
//! areas of centre-defined polygons.
//!
//! Conventions (fixed once, used everywhere):
//!
//! * phase-space vectors are ordered `(p_1..p_N, q_1..q_N)`;
//! * the symplectic matrix is `J (p, q) = (-q, p)`, i.e. `J = [[0, -I], [I, 0]]`
//!   in `(p, q)` block form, so Hamilton's equations read `x' = J dH/dx`;
//! * the wedge is `a ∧ b = (J a) · b = Σ_k (p_a q_b - q_a p_b)_k`.
//!
//! With these choices the phase of the trace of a product of reflection
//! operators equals `+Δ/ħ`, where `Δ` is the polygon area computed here; the
//! oracle test pins that sign.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A point of phase space, coordinates ordered `(p_1..p_N, q_1..q_N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub coords: DVector<f64>,
}

/// A chord (difference of two phase points), same coordinate ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct Chord {
    pub coords: DVector<f64>,
}

macro_rules! vector_like {
    ($ty:ident) => {
        impl $ty {
            pub fn new(coords: DVector<f64>) -> Result<Self> {
                if coords.len() % 2 != 0 || coords.len() == 0 {
                    return Err(Error::InvalidArgument(format!(
                        "phase-space vectors have even positive length, got {}",
                        coords.len()
                    )));
                }
                if !coords.iter().all(|c| c.is_finite()) {
                    return Err(Error::InvalidArgument("non-finite entries".into()));
                }
                Ok(Self { coords })
            }

            pub fn from_slice(coords: &[f64]) -> Result<Self> {
                Self::new(DVector::from_row_slice(coords))
            }

            /// One degree of freedom: `(p, q)`.
            pub fn n1(p: f64, q: f64) -> Self {
                Self { coords: DVector::from_row_slice(&[p, q]) }
            }

            pub fn zeros(n_dof: usize) -> Self {
                Self { coords: DVector::zeros(2 * n_dof) }
            }

            /// Number of degrees of freedom.
            pub fn n_dof(&self) -> usize {
                self.coords.len() / 2
            }

            pub fn dim(&self) -> usize {
                self.coords.len()
            }

            pub fn p(&self, k: usize) -> f64 {
                self.coords[k]
            }

            pub fn q(&self, k: usize) -> f64 {
                self.coords[self.n_dof() + k]
            }

            pub fn norm(&self) -> f64 {
                self.coords.norm()
            }
        }
    };
}

vector_like!(PhasePoint);
vector_like!(Chord);

impl PhasePoint {
    pub fn chord_to(&self, other: &PhasePoint) -> Chord {
        Chord { coords: &other.coords - &self.coords }
    }

    pub fn midpoint(&self, other: &PhasePoint) -> PhasePoint {
        PhasePoint { coords: (&self.coords + &other.coords) * 0.5 }
    }

    pub fn translated(&self, chord: &Chord) -> PhasePoint {
        PhasePoint { coords: &self.coords + &chord.coords }
    }
}

impl Chord {
    pub fn scaled(&self, s: f64) -> Chord {
        Chord { coords: &self.coords * s }
    }
}

/// The symplectic form of an `N`-degree-of-freedom phase space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SymplecticForm {
    n_dof: usize,
}

impl SymplecticForm {
    pub fn new(n_dof: usize) -> Self {
        Self { n_dof }
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    pub fn dim(&self) -> usize {
        2 * self.n_dof
    }

    /// The matrix `J` with `J (p, q) = (-q, p)`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n_dof;
        let mut j = DMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            j[(k, n + k)] = -1.0;
            j[(n + k, k)] = 1.0;
        }
        j
    }

    /// `J v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let n = self.n_dof;
        let mut out = DVector::zeros(2 * n);
        for k in 0..n {
            out[k] = -v[n + k];
            out[n + k] = v[k];
        }
        out
    }

    /// `a ∧ b = (J a) · b = Σ_k p_a q_b - q_a p_b`.
    pub fn wedge(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let n = self.n_dof;
        let mut acc = 0.0;
        for k in 0..n {
            acc += a[k] * b[n + k] - a[n + k] * b[k];
        }
        acc
    }

    /// `M^T J M - J`, the symplecticity defect.
    pub fn symplectic_defect(&self, m: &DMatrix<f64>) -> f64 {
        let j = self.matrix();
        (m.transpose() * &j * m - j).amax()
    }
}

/// Symplectic wedge of two chords, `a ∧ b = Σ_k p_a q_b - q_a p_b`.
pub fn wedge(a: &Chord, b: &Chord) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(SymplecticForm::new(a.n_dof()).wedge(&a.coords, &b.coords))
}

/// Point reflection of `x` through `centre`: `2 centre - x`.
pub fn reflect(x: &PhasePoint, centre: &PhasePoint) -> Result<PhasePoint> {
    if x.dim() != centre.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: centre.dim() });
    }
    Ok(PhasePoint { coords: &centre.coords * 2.0 - &x.coords })
}

/// An affine map `x -> linear x + shift` with symplectic linear part.
#[derive(Clone, Debug)]
pub struct AffineSymplecticMap {
    pub linear: DMatrix<f64>,
    pub shift: DVector<f64>,
}

impl AffineSymplecticMap {
    pub fn identity(dim: usize) -> Self {
        Self { linear: DMatrix::identity(dim, dim), shift: DVector::zeros(dim) }
    }

    pub fn reflection(centre: &PhasePoint) -> Self {
        let dim = centre.dim();
        Self {
            linear: -DMatrix::<f64>::identity(dim, dim),
            shift: &centre.coords * 2.0,
        }
    }

    pub fn translation(chord: &Chord) -> Self {
        let dim = chord.dim();
        Self { linear: DMatrix::identity(dim, dim), shift: chord.coords.clone() }
    }

    pub fn apply(&self, x: &PhasePoint) -> PhasePoint {
        PhasePoint { coords: &self.linear * &x.coords + &self.shift }
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &AffineSymplecticMap) -> AffineSymplecticMap {
        AffineSymplecticMap {
            linear: &self.linear * &other.linear,
            shift: &self.linear * &other.shift + &self.shift,
        }
    }

    /// Fixed point of the map, when `I - linear` is invertible.
    pub fn fixed_point(&self) -> Result<PhasePoint> {
        let dim = self.shift.len();
        let lu = (DMatrix::identity(dim, dim) - &self.linear).lu();
        match lu.solve(&self.shift) {
            Some(x) => Ok(PhasePoint { coords: x }),
            None => Err(Error::Resonance { det: 0.0 }),
        }
    }
}

/// Compose point reflections written as an operator product: `centres[0]` is the
/// leftmost factor, `centres[last]` acts first. An even count yields a
/// translation (`linear = +I`), an odd count a reflection (`linear = -I`).
pub fn compose_reflections(centres: &[PhasePoint]) -> Result<AffineSymplecticMap> {
    let first = centres
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty centre list".into()))?;
    let dim = first.dim();
    let mut map = AffineSymplecticMap::identity(dim);
    // rightmost factor acts first: walk the list from the end
    for c in centres.iter().rev() {
        if c.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: c.dim() });
        }
        map = AffineSymplecticMap::reflection(c).compose(&map);
    }
    Ok(map)
}

/// Effective reflection centre of an odd chain of reflections applied in path
/// order (`centres[0]` acts first): the alternating sum
/// `x_ν - x_{ν-1} + ... + x_1`. Appending the returned centre closes the
/// polygonal path.
pub fn closure_centre(centres: &[PhasePoint]) -> Result<PhasePoint> {
    let first = centres
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty centre list".into()))?;
    if centres.len() % 2 == 0 {
        return Err(Error::EvenPolygon(centres.len()));
    }
    let dim = first.dim();
    let mut acc = DVector::zeros(dim);
    // last centre enters with +, alternating backwards
    for (i, c) in centres.iter().enumerate() {
        if c.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: c.dim() });
        }
        let sign = if (centres.len() - 1 - i) % 2 == 0 { 1.0 } else { -1.0 };
        acc += &c.coords * sign;
    }
    Ok(PhasePoint { coords: acc })
}

/// Corners of the unique closed polygon whose sides are centred, in path order,
/// on an odd list of centres. Corner `k+1 = 2 centres[k] - corner_k`, and the
/// starting corner is the fixed point of the full reflection chain.
pub fn polygon_corners(centres: &[PhasePoint]) -> Result<Vec<PhasePoint>> {
    if centres.len() % 2 == 0 {
        return Err(Error::EvenPolygon(centres.len()));
    }
    let start = closure_centre(centres)?;
    let mut corners = Vec::with_capacity(centres.len());
    let mut c = start;
    for x in centres {
        corners.push(c.clone());
        c = reflect(&c, x)?;
    }
    Ok(corners)
}

/// Symplectic area `Δ_{ν+1}` of the polygon whose sides are centred on the
/// given odd list of centres (path order), by the symplectic shoelace sum over
/// its corners. Degenerate polygons are legal and give 0.
pub fn polygon_area_from_centres(centres: &[PhasePoint]) -> Result<f64> {
    let corners = polygon_corners(centres)?;
    let form = SymplecticForm::new(corners[0].n_dof());
    let m = corners.len();
    let mut twice = 0.0;
    for k in 0..m {
        let a = &corners[k];
        let b = &corners[(k + 1) % m];
        twice += form.wedge(&a.coords, &b.coords);
    }
    Ok(0.5 * twice)
}

/// Reduced polygon area `Δ'` from a path-ordered list of side chords
/// (alternating evolution and reflection sides for a compound trajectory):
/// `2Δ' = ξ_1 ∧ ξ_2 + (ξ_1 + ξ_2) ∧ ξ_3 + ...`, each new side wedged by the
/// running sum of all previous ones. When the path closes this equals the
/// symplectic shoelace area of the polygon; the closing side contributes zero
/// either way.
pub fn reduced_polygon_area(chords: &[Chord]) -> Result<f64> {
    let Some(first) = chords.first() else { return Ok(0.0) };
    let dim = first.dim();
    let form = SymplecticForm::new(first.n_dof());
    let mut run = DVector::zeros(dim);
    let mut twice = 0.0;
    for c in chords {
        if c.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: c.dim() });
        }
        twice += form.wedge(&run, &c.coords);
        run += &c.coords;
    }
    Ok(0.5 * twice)
}
