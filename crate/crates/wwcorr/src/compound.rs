//! Compound trajectories: flow segments joined by point reflections through
//! fixed centres, their reduced actions, compound monodromies, and the
//! initial-value change of variables.
//!
//! A compound with reflection centres `x_1..x_ν` and evolution chains
//! `U_1..U_{ν+1}` maps `x₀⁻` through segment 1, reflects through `x_1`,
//! continues, and ends at `x₀⁺`. The reduced action is
//!
//! ```text
//! S'(x₀) = Δ'(side chords) + Σ_j S_j(segment centres),
//! ```
//!
//! with `Δ'` the running-sum polygon area over the path-ordered side chords,
//! and the compound monodromy is the chain-rule product
//! `M' = M_{ν+1} (-I) M_ν ⋯ (-I) M_1`. The Jacobian of the midpoint map
//! `x₀⁻ ↦ x₀ = (x₀⁻+x₀⁺)/2` is `det((I+M')/2)`.
//!
//! The Maslov branch of the IVR factor `det(I+M')^{1/2}` (or `det(I-M')^{∓1/2}`
//! for traces and chord kernels) is tracked continuously along the
//! duration-scaling path `s: 0 → 1`. For metaplectic compounds the monodromy
//! path is independent of the initial point, so the lift is computed once per
//! task by analytic continuation; otherwise it is sampled per trajectory at a
//! bounded number of checkpoints.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::dynamics::{
    expm_complex, flow_segment, EvolutionChain, HamiltonianKind, TrajectorySegment,
};
use crate::error::{Error, Result};
use crate::phase_space::{reduced_polygon_area, reflect, Chord, PhasePoint, SymplecticForm};
use crate::propagators::{arg_lift_complex, arg_lift_real};

/// A compound specification: `ν` reflection centres (fixed, or collapsed onto
/// the running trajectory) interleaved with `ν+1` evolution chains.
#[derive(Clone, Debug)]
pub struct CompoundSpec {
    /// Fixed reflection centres; `None` builds the collapsed compound whose
    /// reflections sit at the arrival points (zero reflection chords).
    pub centres: Option<Vec<PhasePoint>>,
    pub chains: Vec<EvolutionChain>,
}

impl CompoundSpec {
    pub fn fixed(centres: Vec<PhasePoint>, chains: Vec<EvolutionChain>) -> Result<Self> {
        if chains.len() != centres.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "need len(chains) = len(centres) + 1, got {} and {}",
                chains.len(),
                centres.len()
            )));
        }
        Ok(Self { centres: Some(centres), chains })
    }

    pub fn collapsed(chains: Vec<EvolutionChain>) -> Result<Self> {
        if chains.is_empty() {
            return Err(Error::InvalidArgument("need at least one chain".into()));
        }
        Ok(Self { centres: None, chains })
    }

    pub fn n_reflections(&self) -> usize {
        match &self.centres {
            Some(c) => c.len(),
            None => self.chains.len() - 1,
        }
    }

    pub fn is_metaplectic(&self) -> bool {
        self.chains.iter().flatten().all(|leg| {
            matches!(leg.hamiltonian.kind, HamiltonianKind::Quadratic { .. })
        })
    }

    pub fn scaled(&self, s: f64) -> CompoundSpec {
        let chains = self
            .chains
            .iter()
            .map(|c| {
                c.iter()
                    .map(|leg| crate::dynamics::EvolutionSpec {
                        hamiltonian: leg.hamiltonian.clone(),
                        duration: leg.duration * s,
                    })
                    .collect()
            })
            .collect();
        CompoundSpec { centres: self.centres.clone(), chains }
    }
}

/// A built compound trajectory with all per-segment data.
#[derive(Clone, Debug)]
pub struct CompoundTrajectory {
    pub initial: PhasePoint,
    pub final_point: PhasePoint,
    pub midpoint: PhasePoint,
    pub reflection_centres: Vec<PhasePoint>,
    pub reflection_chords: Vec<Chord>,
    /// Flattened trajectory legs in path order.
    pub segments: Vec<TrajectorySegment>,
    /// Path-ordered side chords (evolution legs and reflection jumps).
    pub sides: Vec<Chord>,
    /// Legs per chain, to re-interleave reflections.
    pub legs_per_chain: Vec<usize>,
}

impl CompoundTrajectory {
    /// The compound chord `ξ₀ = x₀⁺ - x₀⁻`.
    pub fn chord(&self) -> Chord {
        self.initial.chord_to(&self.final_point)
    }

    /// Reduced action `S'`: running-sum polygon area over the side chords plus
    /// the segment centre actions.
    pub fn reduced_action(&self) -> f64 {
        let area = reduced_polygon_area(&self.sides).expect("consistent dimensions");
        area + self.segments.iter().map(|s| s.action).sum::<f64>()
    }

    /// Chain-rule compound monodromy `M' = M_{ν+1} (-I) M_ν ⋯ (-I) M_1`.
    pub fn compound_monodromy(&self) -> DMatrix<f64> {
        let dim = self.initial.dim();
        let mut m = DMatrix::<f64>::identity(dim, dim);
        let mut seg_iter = self.segments.iter();
        for (k, &count) in self.legs_per_chain.iter().enumerate() {
            for _ in 0..count {
                let seg = seg_iter.next().expect("leg count consistent");
                m = &seg.monodromy * m;
            }
            if k + 1 < self.legs_per_chain.len() {
                m = -m;
            }
        }
        m
    }
}

/// Build the compound trajectory determined by its initial value.
pub fn build_compound(spec: &CompoundSpec, x0_minus: &PhasePoint) -> Result<CompoundTrajectory> {
    let n_chains = spec.chains.len();
    let mut segments = Vec::new();
    let mut sides = Vec::new();
    let mut legs_per_chain = Vec::with_capacity(n_chains);
    let mut reflection_centres = Vec::new();
    let mut reflection_chords = Vec::new();
    let mut point = x0_minus.clone();
    for (k, chain) in spec.chains.iter().enumerate() {
        legs_per_chain.push(chain.len());
        for leg in chain {
            let seg = flow_segment(&leg.hamiltonian, &point, leg.duration)
                .map_err(|e| Error::FlowFailure { segment: k, reason: e.to_string() })?;
            point = seg.end.clone();
            sides.push(seg.chord.clone());
            segments.push(seg);
        }
        if k + 1 < n_chains {
            let centre = match &spec.centres {
                Some(cs) => cs[k].clone(),
                None => point.clone(),
            };
            let reflected = reflect(&point, &centre)?;
            let chord = point.chord_to(&reflected);
            sides.push(chord.clone());
            reflection_chords.push(chord);
            reflection_centres.push(centre);
            point = reflected;
        }
    }
    Ok(CompoundTrajectory {
        initial: x0_minus.clone(),
        midpoint: x0_minus.midpoint(&point),
        final_point: point,
        reflection_centres,
        reflection_chords,
        segments,
        sides,
        legs_per_chain,
    })
}

/// `det((I + M')/2)`, the Jacobian of the midpoint map `dx₀/dx₀⁻`. May be
/// zero (a nodal surface); that is a legal output.
pub fn ivr_jacobian(m_prime: &DMatrix<f64>) -> f64 {
    let dim = m_prime.nrows();
    ((DMatrix::<f64>::identity(dim, dim) + m_prime) * 0.5).determinant()
}

/// Which determinant branch a kernel uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LiftSign {
    /// `det(I + M')`: the IVR kernel factor.
    Plus,
    /// `det(I - M')`: trace formula and chord-side kernels.
    Minus,
}

impl LiftSign {
    fn apply(&self, dim: usize, m: &DMatrix<C64>) -> DMatrix<C64> {
        let id = DMatrix::<C64>::identity(dim, dim);
        match self {
            LiftSign::Plus => id + m,
            LiftSign::Minus => id - m,
        }
    }
}

const BRANCH_DELTA: f64 = 1e-4;

/// Monodromy path of a metaplectic compound at complex-scaled durations; the
/// path does not depend on the initial point or the reflection centres.
fn metaplectic_monodromy_path(spec: &CompoundSpec, z: C64) -> DMatrix<C64> {
    let n_dof = spec.chains[0]
        .first()
        .map(|leg| leg.hamiltonian.n_dof())
        .unwrap_or_else(|| spec.centres.as_ref().map(|c| c[0].n_dof()).unwrap_or(1));
    let dim = 2 * n_dof;
    let form = SymplecticForm::new(n_dof);
    let jm = form.matrix().map(|v| C64::new(v, 0.0));
    let mut m = DMatrix::<C64>::identity(dim, dim);
    for (k, chain) in spec.chains.iter().enumerate() {
        for leg in chain {
            let HamiltonianKind::Quadratic { q_form, .. } = &leg.hamiltonian.kind else {
                unreachable!("metaplectic path needs quadratic legs");
            };
            let a = &jm * q_form.map(|v| C64::new(v, 0.0) * z * leg.duration);
            m = expm_complex(&a) * m;
        }
        if k + 1 < spec.chains.len() {
            m = -m;
        }
    }
    m
}

/// Continuous branch lift of `det(I ± M'(s))` along the duration-scaling path
/// `s: 0 → 1`, with the `s(1-iδ)` branch rule. Returns the lift (a multiple of
/// π) and the number of counted crossings. For metaplectic compounds this is
/// exact and independent of `x₀⁻`; otherwise the real path is sampled at
/// `checkpoints` points with refinement.
pub fn compound_phase_lift(
    spec: &CompoundSpec,
    x0_minus: &PhasePoint,
    sign: LiftSign,
    checkpoints: usize,
) -> Result<(f64, u32)> {
    let dim = x0_minus.dim();
    if spec.is_metaplectic() {
        let f = |s: f64| -> C64 {
            let z = C64::new(s, -s * BRANCH_DELTA);
            let m = metaplectic_monodromy_path(spec, z);
            sign.apply(dim, &m).determinant()
        };
        // the anchor determinant vanishes identically at s = 0 when the
        // reflection parity makes M'(0) = ±I; anchor at the s → 0⁺ limit
        // instead, whose principal argument is arg(det of the leading
        // s-power), 0 or π
        let lift = if f(0.0).norm() < 1e-12 {
            let s0 = 1e-3;
            f(s0).arg() + arg_lift_complex(&|u: f64| f(s0 + (1.0 - s0) * u), 32)
        } else {
            arg_lift_complex(&f, 32)
        };
        let snapped = (lift / std::f64::consts::PI).round() * std::f64::consts::PI;
        Ok((snapped, (snapped / std::f64::consts::PI).round().abs() as u32))
    } else {
        let f = |s: f64| -> f64 {
            let traj = build_compound(&spec.scaled(s), x0_minus).expect("scaled compound");
            let m = traj.compound_monodromy().map(|v| C64::new(v, 0.0));
            sign.apply(dim, &m).determinant().re
        };
        let (mut lift, mut crossings) = arg_lift_real(&f, checkpoints);
        // match the complex-branch anchoring when the s = 0 determinant
        // vanishes and the path emerges on the negative side
        if f(0.0) == 0.0 {
            let mut s = 1.0 / checkpoints.max(2) as f64;
            let mut probe = f(s);
            while probe == 0.0 && s < 1.0 {
                s += 1.0 / checkpoints.max(2) as f64;
                probe = f(s.min(1.0));
            }
            if probe < 0.0 {
                lift += std::f64::consts::PI;
                crossings += 1;
            }
        }
        Ok((lift, crossings))
    }
}

/// Bundle of the quantities entering the semiclassical kernels.
#[derive(Clone, Debug)]
pub struct CompoundResult {
    pub action: f64,
    pub monodromy: DMatrix<f64>,
    pub jacobian: f64,
    /// Arg-lift of the kernel determinant along the construction path.
    pub phase_lift: f64,
    pub caustic_crossings: u32,
}

/// Build a compound and assemble its kernel data with the requested
/// determinant branch.
pub fn compound_result(
    spec: &CompoundSpec,
    x0_minus: &PhasePoint,
    sign: LiftSign,
    checkpoints: usize,
) -> Result<(CompoundTrajectory, CompoundResult)> {
    let traj = build_compound(spec, x0_minus)?;
    let m = traj.compound_monodromy();
    let jacobian = ivr_jacobian(&m);
    let (phase_lift, caustic_crossings) = compound_phase_lift(spec, x0_minus, sign, checkpoints)?;
    let action = traj.reduced_action();
    Ok((traj, CompoundResult { action, monodromy: m, jacobian, phase_lift, caustic_crossings }))
}

/// The explicit off-shell action functional of the full compound (with the
/// extra reflection at `x0_reflection` closing the path):
///
/// ```text
/// F(x'_1..x'_{ν+1}) = Δ(x0, x'_1, x_1, …, x_ν, x'_{ν+1}, x) + Σ_j S_j(x'_j),
/// ```
///
/// with `Δ` the odd centre-polygon area over the path-ordered side centres
/// (`x` is the full compound's own side centre, held fixed). The stationary
/// points over the segment centres `x'_j` are the true compound trajectories;
/// verification helper for the stationarity identity.
pub fn off_shell_action(
    segment_centres: &[PhasePoint],
    segment_actions: &[f64],
    reflection_centres: &[PhasePoint],
    legs_per_chain: &[usize],
    x0_reflection: &PhasePoint,
    full_centre: &PhasePoint,
) -> Result<f64> {
    if segment_centres.len() != segment_actions.len() {
        return Err(Error::InvalidArgument("centres/actions length mismatch".into()));
    }
    let mut list = Vec::with_capacity(segment_centres.len() + reflection_centres.len() + 2);
    list.push(x0_reflection.clone());
    let mut seg_iter = segment_centres.iter();
    for (k, &count) in legs_per_chain.iter().enumerate() {
        for _ in 0..count {
            let c = seg_iter
                .next()
                .ok_or_else(|| Error::InvalidArgument("legs_per_chain exceeds segments".into()))?;
            list.push(c.clone());
        }
        if k + 1 < legs_per_chain.len() {
            list.push(reflection_centres[k].clone());
        }
    }
    list.push(full_centre.clone());
    let area = crate::phase_space::polygon_area_from_centres(&list)?;
    Ok(area + segment_actions.iter().sum::<f64>())
}

/// Sample the compound path as a polyline for figure export: segment arcs
/// sampled at `k` interior points, reflection jumps marked by their centre
/// index.
pub fn sample_polyline(
    spec: &CompoundSpec,
    x0_minus: &PhasePoint,
    k: usize,
) -> Result<Vec<(PhasePoint, Option<usize>)>> {
    let mut out = Vec::new();
    let mut point = x0_minus.clone();
    let mut refl = 0usize;
    for (ci, chain) in spec.chains.iter().enumerate() {
        for leg in chain {
            for j in 0..=k {
                let t = leg.duration * j as f64 / k as f64;
                let p = crate::dynamics::flow(&leg.hamiltonian, &point, t)?;
                out.push((p, None));
            }
            point = crate::dynamics::flow(&leg.hamiltonian, &point, leg.duration)?;
        }
        if ci + 1 < spec.chains.len() {
            let centre = match &spec.centres {
                Some(cs) => cs[ci].clone(),
                None => point.clone(),
            };
            point = reflect(&point, &centre)?;
            out.push((point.clone(), Some(refl)));
            refl += 1;
        }
    }
    Ok(out)
}
