//! Periodic orbits of compound canonical transformations (`x₀⁺ = x₀⁻`),
//! the semiclassical trace of the compound propagator, and continuation of
//! orbit families over reflection-centre parameters.
//!
//! The trace of the reduced compound operator is carried by its periodic
//! points:
//!
//! ```text
//! tr Û' ≈ |det(I - M')|^{-1/2} exp[i(S'(x*)/ħ + ψ)],
//! ```
//!
//! with `M'` the reduced compound monodromy at the fixed point, `S'` the
//! reduced action of the closed path, and `ψ = -lift/2` the branch of
//! `det(I - M'(s))^{-1/2}` tracked continuously along the duration-scaling
//! path from the zero-duration anchor (where the trace is the exact
//! reflection-product value). Exactly at `det(I - M') = 0` the formula is
//! resonance-singular and an error is reported.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::compound::{build_compound, compound_phase_lift, CompoundSpec, CompoundTrajectory, LiftSign};
use crate::error::{Error, Result};
use crate::phase_space::PhasePoint;

/// Resonance threshold on `|det(I - M')|`.
pub const RESONANCE_EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 50 }
    }
}

/// A compound periodic orbit.
#[derive(Clone, Debug)]
pub struct PeriodicOrbit {
    pub fixed_point: PhasePoint,
    pub trajectory: CompoundTrajectory,
    pub action: f64,
    /// Reduced compound monodromy at the fixed point.
    pub monodromy: DMatrix<f64>,
    /// `|det(I - M')|`.
    pub stability: f64,
}

/// Newton search for a fixed point of the reduced compound map, with
/// backtracking damping on the residual norm.
pub fn find_periodic(
    spec: &CompoundSpec,
    seed: &PhasePoint,
    cfg: &NewtonConfig,
) -> Result<PeriodicOrbit> {
    let dim = seed.dim();
    let mut x = seed.clone();
    let mut traj = build_compound(spec, &x)?;
    let mut residual = (&traj.final_point.coords - &x.coords).norm();
    for _ in 0..cfg.max_iters {
        if residual < cfg.tol {
            let m = traj.compound_monodromy();
            let stability = (DMatrix::<f64>::identity(dim, dim) - &m).determinant().abs();
            return Ok(PeriodicOrbit {
                action: traj.reduced_action(),
                fixed_point: x,
                trajectory: traj,
                monodromy: m,
                stability,
            });
        }
        let m = traj.compound_monodromy();
        let jac = &m - DMatrix::<f64>::identity(dim, dim);
        let f = &traj.final_point.coords - &x.coords;
        let step = jac.lu().solve(&f).ok_or(Error::Resonance { det: 0.0 })?;
        // backtracking line search on the residual norm
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let cand = PhasePoint { coords: &x.coords - &step * lambda };
            let cand_traj = build_compound(spec, &cand)?;
            let cand_res = (&cand_traj.final_point.coords - &cand.coords).norm();
            if cand_res < residual || cand_res < cfg.tol {
                x = cand;
                traj = cand_traj;
                residual = cand_res;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonFailed { iters: cfg.max_iters, residual });
        }
    }
    if residual < cfg.tol {
        let m = traj.compound_monodromy();
        let stability = (DMatrix::<f64>::identity(dim, dim) - &m).determinant().abs();
        return Ok(PeriodicOrbit {
            action: traj.reduced_action(),
            fixed_point: x,
            trajectory: traj,
            monodromy: m,
            stability,
        });
    }
    Err(Error::NewtonFailed { iters: cfg.max_iters, residual })
}

/// Signature (count of positive minus negative eigenvalues) of a symmetric
/// matrix, ignoring eigenvalues below a relative threshold.
fn signature(b: &DMatrix<f64>) -> f64 {
    let se = b.clone().symmetric_eigen();
    let scale = se.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    se.eigenvalues.iter().map(|&l| if l.abs() > 1e-9 * scale { l.signum() } else { 0.0 }).sum()
}

fn monodromy_at_scale(
    spec: &CompoundSpec,
    x0: &PhasePoint,
    s: f64,
) -> Result<DMatrix<f64>> {
    Ok(build_compound(&spec.scaled(s), x0)?.compound_monodromy())
}

/// Semiclassical trace of the reduced compound operator carried by one orbit:
///
/// ```text
/// tr Û' ≈ |det(I-M')|^{-1/2} exp[i(S'/ħ + (π/4) sig B' + φ)],
/// ```
///
/// where `B'` is the Cayley parameter of `M'` at the fixed point (the `π/4`
/// signature term of the stationary-phase x₀ integration) and `φ` is the
/// compound propagator's own phase: `-lift/2` of the `det(I + M'(s))` branch
/// along the duration-scaling path, plus, for an odd reflection count, the
/// caustic birth phase `-(π/4) sig B'(0⁺)` (the reduced compound emerges from
/// the δ-symbol of a reflection). Pinned against the exact oracle on
/// metaplectic compounds.
pub fn trace_sc(orbit: &PeriodicOrbit, spec: &CompoundSpec, hbar: f64) -> Result<C64> {
    if orbit.stability < RESONANCE_EPS {
        return Err(Error::Resonance { det: orbit.stability });
    }
    let plus_form = (|| -> Result<f64> {
        let b_now = crate::dynamics::cayley_b(&orbit.monodromy)?;
        let (lift_plus, _) = compound_phase_lift(spec, &orbit.fixed_point, LiftSign::Plus, 8)?;
        let birth = if spec.n_reflections() % 2 == 1 {
            let m0 = monodromy_at_scale(spec, &orbit.fixed_point, 1e-3)?;
            let b0 = crate::dynamics::cayley_b(&m0)?;
            -std::f64::consts::FRAC_PI_4 * signature(&b0)
        } else {
            0.0
        };
        Ok(std::f64::consts::FRAC_PI_4 * signature(&b_now) + birth - 0.5 * lift_plus)
    })();
    let correction = match plus_form {
        Ok(c) => c,
        // at a full-compound caustic (det(I+M') = 0, e.g. zero durations with
        // an odd reflection count) the Minus branch is the regular one
        Err(Error::Caustic { .. }) => {
            if spec.n_reflections() % 2 == 0 {
                return Err(Error::Caustic { det: 0.0 });
            }
            let (lift_minus, _) =
                compound_phase_lift(spec, &orbit.fixed_point, LiftSign::Minus, 8)?;
            -0.5 * lift_minus
        }
        Err(e) => return Err(e),
    };
    let phase = orbit.action / hbar + correction;
    Ok(C64::new(0.0, phase).exp() / orbit.stability.sqrt())
}

/// Result of a continuation run over a grid of reflection-centre sets.
#[derive(Debug)]
pub struct FamilyResult {
    pub orbits: Vec<Option<PeriodicOrbit>>,
    pub failures: Vec<usize>,
    /// Nodes whose stability dropped below the resonance threshold.
    pub resonant: Vec<usize>,
    pub rows: usize,
    pub cols: usize,
}

impl FamilyResult {
    pub fn success_fraction(&self) -> f64 {
        let ok = self.orbits.iter().filter(|o| o.is_some()).count();
        ok as f64 / self.orbits.len() as f64
    }
}

/// Continue an orbit family over a `rows × cols` grid of reflection-centre
/// sets (row-major). Each node warm-starts Newton from the nearest solved
/// neighbour (left, then up), the first node from `seed`.
pub fn continue_family(
    centre_sets: &[Vec<PhasePoint>],
    rows: usize,
    cols: usize,
    chains: &[crate::dynamics::EvolutionChain],
    seed: &PhasePoint,
    cfg: &NewtonConfig,
) -> Result<FamilyResult> {
    if centre_sets.len() != rows * cols {
        return Err(Error::InvalidArgument("grid size mismatch".into()));
    }
    let mut orbits: Vec<Option<PeriodicOrbit>> = vec![None; rows * cols];
    let mut failures = Vec::new();
    let mut resonant = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let idx = r * cols + c;
            let spec = CompoundSpec::fixed(centre_sets[idx].clone(), chains.to_vec())?;
            let warm = if c > 0 && orbits[idx - 1].is_some() {
                orbits[idx - 1].as_ref().unwrap().fixed_point.clone()
            } else if r > 0 && orbits[idx - cols].is_some() {
                orbits[idx - cols].as_ref().unwrap().fixed_point.clone()
            } else {
                seed.clone()
            };
            match find_periodic(&spec, &warm, cfg) {
                Ok(orbit) => {
                    if orbit.stability < RESONANCE_EPS {
                        resonant.push(idx);
                    }
                    orbits[idx] = Some(orbit);
                }
                Err(_) => failures.push(idx),
            }
        }
    }
    Ok(FamilyResult { orbits, failures, resonant, rows, cols })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compound::ivr_jacobian;
    use crate::dynamics::{EvolutionChain, EvolutionSpec, HamiltonianSpec};
    use crate::error::Error;
    use crate::oracle::OracleSpace;
    use crate::phase_space::{closure_centre, polygon_area_from_centres};
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn chain(h: HamiltonianSpec, t: f64) -> EvolutionChain {
        vec![EvolutionSpec::new(h, t)]
    }

    #[test]
    fn zero_duration_odd_fixed_point_is_closure_centre() {
        let centres = vec![
            PhasePoint::n1(0.4, -0.1),
            PhasePoint::n1(-0.2, 0.5),
            PhasePoint::n1(0.3, 0.2),
        ];
        let spec = CompoundSpec::fixed(centres.clone(), vec![Vec::new(); 4]).unwrap();
        let orbit =
            find_periodic(&spec, &PhasePoint::n1(0.0, 0.0), &NewtonConfig::default()).unwrap();
        let expect = closure_centre(&centres).unwrap();
        assert!((&orbit.fixed_point.coords - &expect.coords).amax() < 1e-10);
    }

    #[test]
    fn harmonic_centres_at_origin_fixed_point_origin() {
        let h = HamiltonianSpec::harmonic(1, 1.0);
        let spec = CompoundSpec::fixed(
            vec![PhasePoint::n1(0.0, 0.0)],
            vec![chain(h.clone(), 0.7), chain(h, 0.9)],
        )
        .unwrap();
        let orbit =
            find_periodic(&spec, &PhasePoint::n1(0.2, 0.1), &NewtonConfig::default()).unwrap();
        assert!(orbit.fixed_point.coords.amax() < 1e-10);
    }

    #[test]
    fn metaplectic_fixed_point_matches_affine_algebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..5 {
            let q1 = {
                let r = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-0.6..0.6));
                (&r + r.transpose()) * 0.5
            };
            let h1 = HamiltonianSpec::quadratic(q1, nalgebra::DVector::zeros(2), "a").unwrap();
            let h2 = HamiltonianSpec::harmonic(1, rng.gen_range(0.6..1.4));
            let centres = vec![PhasePoint::n1(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))];
            let spec = CompoundSpec::fixed(
                centres.clone(),
                vec![chain(h1, rng.gen_range(0.3..0.9)), chain(h2, rng.gen_range(0.3..0.9))],
            )
            .unwrap();
            // affine fixed point: x* = (I - M')^{-1} shift
            let origin_image = build_compound(&spec, &PhasePoint::zeros(1)).unwrap().final_point;
            let m = build_compound(&spec, &PhasePoint::zeros(1))
                .unwrap()
                .compound_monodromy();
            let aff = (DMatrix::<f64>::identity(2, 2) - &m)
                .lu()
                .solve(&origin_image.coords)
                .unwrap();
            let orbit =
                find_periodic(&spec, &PhasePoint::n1(0.0, 0.0), &NewtonConfig::default()).unwrap();
            assert!((&orbit.fixed_point.coords - &aff).amax() < 1e-10);
        }
    }

    #[test]
    fn trace_zero_duration_reduces_to_reflection_product() {
        // odd reflection count, no evolution: tr Û' = 2^{-N} e^{iΔ_ν/ħ}
        let hbar = 1.0;
        let centres = vec![
            PhasePoint::n1(0.3, -0.2),
            PhasePoint::n1(-0.4, 0.1),
            PhasePoint::n1(0.2, 0.4),
        ];
        let spec = CompoundSpec::fixed(centres.clone(), vec![Vec::new(); 4]).unwrap();
        let orbit =
            find_periodic(&spec, &PhasePoint::n1(0.0, 0.0), &NewtonConfig::default()).unwrap();
        let tr = trace_sc(&orbit, &spec, hbar).unwrap();
        let area = polygon_area_from_centres(&centres).unwrap();
        let pred = C64::new(0.0, area / hbar).exp() * 0.5;
        assert!((tr - pred).norm() < 1e-12, "{tr} vs {pred}");
        // and the oracle agrees
        let s = OracleSpace::new(448, hbar).unwrap();
        let orc = s.compound_trace(&centres, &vec![Vec::new(); 4]).unwrap();
        assert!((tr - orc).norm() < 1e-6, "{tr} vs oracle {orc}");
    }

    #[test]
    fn metaplectic_trace_matches_oracle() {
        let hbar = 1.0;
        let h1 = HamiltonianSpec::harmonic(1, 1.0);
        let q2 = DMatrix::from_row_slice(2, 2, &[1.3, 0.4, 0.4, 0.9]);
        let h2 = HamiltonianSpec::quadratic(q2, nalgebra::DVector::zeros(2), "b").unwrap();
        let centres = vec![PhasePoint::n1(0.3, -0.2)];
        for (t1, t2) in [(0.5, 0.7), (0.9, 0.7), (2.4, 2.2)] {
            let chains = vec![chain(h1.clone(), t1), chain(h2.clone(), t2)];
            let spec = CompoundSpec::fixed(centres.clone(), chains.clone()).unwrap();
            let orbit =
                find_periodic(&spec, &PhasePoint::n1(0.0, 0.0), &NewtonConfig::default()).unwrap();
            let tr = trace_sc(&orbit, &spec, hbar).unwrap();
            let s = OracleSpace::new(448, hbar).unwrap();
            let orc = s.compound_trace(&centres, &chains).unwrap();
            let rel = (tr - orc).norm() / orc.norm();
            assert!(rel < 2e-5, "t=({t1},{t2}): {tr} vs {orc}, rel {rel}");
        }
        // even reflection count (two centres, three chains)
        let centres2 = vec![PhasePoint::n1(0.3, -0.2), PhasePoint::n1(-0.25, 0.15)];
        let chains2 = vec![chain(h1.clone(), 0.5), chain(h2.clone(), 0.7), chain(h1, 0.4)];
        let spec2 = CompoundSpec::fixed(centres2.clone(), chains2.clone()).unwrap();
        let orbit2 =
            find_periodic(&spec2, &PhasePoint::n1(0.0, 0.0), &NewtonConfig::default()).unwrap();
        let tr2 = trace_sc(&orbit2, &spec2, hbar).unwrap();
        let s = OracleSpace::new(448, hbar).unwrap();
        let orc2 = s.compound_trace(&centres2, &chains2).unwrap();
        let rel2 = (tr2 - orc2).norm() / orc2.norm();
        assert!(rel2 < 2e-5, "even case: {tr2} vs {orc2}, rel {rel2}");
    }

    #[test]
    fn ivr_trace_agrees_with_trace_sc_metaplectic() {
        // tr Û' = (2πħ)^{-N} ∫ dx₀⁻ 2^{-N} |det(I+M')|^{1/2} e^{iS'(x₀⁻)/ħ}:
        // for a metaplectic compound the integral is an exact Fresnel integral
        let hbar = 1.0;
        let h1 = HamiltonianSpec::harmonic(1, 1.0);
        let h2 = HamiltonianSpec::harmonic(1, 1.35);
        let centres = vec![PhasePoint::n1(0.25, -0.15)];
        let chains = vec![chain(h1, 0.8), chain(h2, 0.6)];
        let spec = CompoundSpec::fixed(centres, chains).unwrap();
        let orbit =
            find_periodic(&spec, &PhasePoint::n1(0.0, 0.0), &NewtonConfig::default()).unwrap();
        let tr = trace_sc(&orbit, &spec, hbar).unwrap();

        // quadratic-form extraction of S'(x₀⁻) (exact for metaplectic)
        let action_at = |p: f64, q: f64| -> f64 {
            build_compound(&spec, &PhasePoint::n1(p, q)).unwrap().reduced_action()
        };
        let s00 = action_at(0.0, 0.0);
        let eps = 1e-3;
        let gp = (action_at(eps, 0.0) - action_at(-eps, 0.0)) / (2.0 * eps);
        let gq = (action_at(0.0, eps) - action_at(0.0, -eps)) / (2.0 * eps);
        let hpp = (action_at(eps, 0.0) + action_at(-eps, 0.0) - 2.0 * s00) / (eps * eps);
        let hqq = (action_at(0.0, eps) + action_at(0.0, -eps) - 2.0 * s00) / (eps * eps);
        let hpq = (action_at(eps, eps) + action_at(-eps, -eps)
            - action_at(eps, -eps)
            - action_at(-eps, eps))
            / (4.0 * eps * eps);
        // ∫ e^{(i/ħ)(½ xᵀHx + gᵀx + s00)} dx with the Fresnel branch: complete
        // the square and take Π_k (2πħ/|λ_k|)^{1/2} e^{iπ sign(λ_k)/4} over the
        // eigenvalues of H
        let hmat = DMatrix::from_row_slice(2, 2, &[hpp, hpq, hpq, hqq]);
        let g = nalgebra::DVector::from_row_slice(&[gp, gq]);
        let xstar = -hmat.clone().lu().solve(&g).unwrap();
        let stat_phase = (s00 + 0.5 * g.dot(&xstar)) / hbar;
        let se = hmat.symmetric_eigen();
        let mut fresnel = C64::new(0.0, stat_phase).exp();
        for k in 0..2 {
            let lam = se.eigenvalues[k];
            fresnel *= C64::new(2.0 * std::f64::consts::PI * hbar / lam.abs(), 0.0).sqrt()
                * C64::new(0.0, std::f64::consts::FRAC_PI_4 * lam.signum()).exp();
        }
        let m = build_compound(&spec, &PhasePoint::zeros(1))
            .unwrap()
            .compound_monodromy();
        let detfac = (DMatrix::<f64>::identity(2, 2) + &m).determinant().abs().sqrt();
        // the reduced propagator's own phase: caustic birth (odd reflection
        // count) plus the tracked det(I+M') branch
        let (lift_plus, _) =
            compound_phase_lift(&spec, &orbit.fixed_point, LiftSign::Plus, 8).unwrap();
        let m0 = monodromy_at_scale(&spec, &orbit.fixed_point, 1e-3).unwrap();
        let phi_prop = -std::f64::consts::FRAC_PI_4
            * signature(&crate::dynamics::cayley_b(&m0).unwrap())
            - 0.5 * lift_plus;
        let ivr = fresnel * detfac * 0.5 / (2.0 * std::f64::consts::PI * hbar)
            * C64::new(0.0, phi_prop).exp();
        let rel = (ivr - tr).norm() / tr.norm();
        assert!(rel < 1e-4, "ivr {ivr} vs trace {tr}, rel {rel}");
    }

    #[test]
    fn resonance_error_and_amplitude_scaling() {
        // harmonic compound approaching total rotation 2π: det(I-M') → 0 and
        // the amplitude grows as |det|^{-1/2}
        let hbar = 1.0;
        let centres = vec![PhasePoint::n1(0.2, 0.1)];
        let mut points = Vec::new();
        for k in 0..6 {
            let t = 2.0 * std::f64::consts::PI - 0.4 / (1.5f64.powi(k));
            // one reflection flips the rotation parity: total map is
            // -R(t): det(I - M') = det(I + R(t)) → 0 as t → 2π... use
            // two reflections so M' = R(t) itself
            let spec = CompoundSpec::fixed(
                vec![centres[0].clone(), PhasePoint::n1(-0.1, 0.3)],
                vec![
                    chain(HamiltonianSpec::harmonic(1, 1.0), t / 3.0),
                    chain(HamiltonianSpec::harmonic(1, 1.0), t / 3.0),
                    chain(HamiltonianSpec::harmonic(1, 1.0), t / 3.0),
                ],
            )
            .unwrap();
            let orbit =
                find_periodic(&spec, &PhasePoint::n1(0.0, 0.0), &NewtonConfig::default())
                    .unwrap();
            let tr = trace_sc(&orbit, &spec, hbar).unwrap();
            points.push((orbit.stability.ln(), tr.norm().ln()));
        }
        // log|tr| vs log det slope ≈ -1/2
        let n = points.len() as f64;
        let sx: f64 = points.iter().map(|p| p.0).sum();
        let sy: f64 = points.iter().map(|p| p.1).sum();
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!((slope + 0.5).abs() < 0.05, "slope {slope}");

        // exact resonance reports the error
        let spec = CompoundSpec::fixed(
            vec![PhasePoint::n1(0.0, 0.0), PhasePoint::n1(0.0, 0.0)],
            vec![
                chain(HamiltonianSpec::harmonic(1, 1.0), 0.0),
                chain(HamiltonianSpec::harmonic(1, 1.0), 0.0),
                chain(HamiltonianSpec::harmonic(1, 1.0), 0.0),
            ],
        )
        .unwrap();
        let traj = build_compound(&spec, &PhasePoint::n1(0.0, 0.0)).unwrap();
        let m = traj.compound_monodromy();
        let orbit = PeriodicOrbit {
            fixed_point: PhasePoint::n1(0.0, 0.0),
            trajectory: traj,
            action: 0.0,
            stability: (DMatrix::<f64>::identity(2, 2) - &m).determinant().abs(),
            monodromy: m,
        };
        assert!(matches!(trace_sc(&orbit, &spec, hbar), Err(Error::Resonance { .. })));
    }

    #[test]
    fn action_invariant_under_relabeling() {
        // (a) zero-duration polygon orbits: the action is the polygon area,
        // invariant under cyclic rotation of the reflection centres
        let centres = vec![
            PhasePoint::n1(0.4, -0.1),
            PhasePoint::n1(-0.2, 0.5),
            PhasePoint::n1(0.3, 0.2),
        ];
        let spec = CompoundSpec::fixed(centres.clone(), vec![Vec::new(); 4]).unwrap();
        let orbit =
            find_periodic(&spec, &PhasePoint::n1(0.0, 0.0), &NewtonConfig::default()).unwrap();
        let mut rot = centres.clone();
        rot.rotate_left(1);
        let spec_rot = CompoundSpec::fixed(rot, vec![Vec::new(); 4]).unwrap();
        let orbit_rot =
            find_periodic(&spec_rot, &PhasePoint::n1(0.0, 0.0), &NewtonConfig::default())
                .unwrap();
        assert_abs_diff_eq!(orbit_rot.action, orbit.action, epsilon = 1e-12);

        // (b) reparametrizing where a chain starts (splitting a leg) leaves
        // the same closed polygon and the same action
        let h1 = HamiltonianSpec::harmonic(1, 1.0);
        let h2 = HamiltonianSpec::harmonic(1, 1.3);
        let c1 = PhasePoint::n1(0.3, -0.1);
        let spec_a = CompoundSpec::fixed(
            vec![c1.clone()],
            vec![chain(h1.clone(), 0.6), chain(h2.clone(), 0.5)],
        )
        .unwrap();
        let spec_b = CompoundSpec::fixed(
            vec![c1],
            vec![
                vec![EvolutionSpec::new(h1.clone(), 0.25), EvolutionSpec::new(h1, 0.35)],
                chain(h2, 0.5),
            ],
        )
        .unwrap();
        let oa = find_periodic(&spec_a, &PhasePoint::n1(0.0, 0.0), &NewtonConfig::default())
            .unwrap();
        let ob = find_periodic(&spec_b, &PhasePoint::n1(0.0, 0.0), &NewtonConfig::default())
            .unwrap();
        assert!((&oa.fixed_point.coords - &ob.fixed_point.coords).amax() < 1e-10);
        assert_abs_diff_eq!(oa.action, ob.action, epsilon = 1e-10);
    }

    #[test]
    fn continuation_constant_grid_and_affine_covariance() {
        let h = HamiltonianSpec::harmonic(1, 1.0);
        let chains = vec![chain(h.clone(), 0.7), chain(h.clone(), 0.5)];
        // constant grid: identical orbit everywhere
        let base = vec![PhasePoint::n1(0.2, 0.1)];
        let sets: Vec<Vec<PhasePoint>> = vec![base.clone(); 9];
        let fam = continue_family(&sets, 3, 3, &chains, &PhasePoint::n1(0.0, 0.0), &NewtonConfig::default())
            .unwrap();
        assert_eq!(fam.success_fraction(), 1.0);
        let f0 = fam.orbits[0].as_ref().unwrap().fixed_point.clone();
        for o in &fam.orbits {
            assert!((&o.as_ref().unwrap().fixed_point.coords - &f0.coords).amax() < 1e-10);
        }

        // translated centres: fixed points translate affinely
        let shift = PhasePoint::n1(0.3, -0.2);
        let sets2: Vec<Vec<PhasePoint>> = vec![vec![PhasePoint {
            coords: &base[0].coords + &shift.coords,
        }]; 4];
        let fam2 = continue_family(&sets2, 2, 2, &chains, &f0, &NewtonConfig::default()).unwrap();
        let f1 = fam2.orbits[0].as_ref().unwrap().fixed_point.clone();
        // affine covariance: x*(c + δ) = x*(c) + A δ with A = (I-M')^{-1}(dshift/dc)
        // verified indirectly: re-solving from the translated centre converges
        // and the two fixed points differ by a linear map of the shift
        let spec0 = CompoundSpec::fixed(base.clone(), chains.clone()).unwrap();
        let m = build_compound(&spec0, &PhasePoint::zeros(1))
            .unwrap()
            .compound_monodromy();
        // shift of the affine map when the single centre moves by δ: the
        // final point gains M_2 · 2δ (reflection centre enters once)
        let m2 = crate::dynamics::monodromy(&h, &PhasePoint::zeros(1), 0.5).unwrap();
        let dshift = m2 * &shift.coords * 2.0;
        let pred = (DMatrix::<f64>::identity(2, 2) - &m).lu().solve(&dshift).unwrap();
        assert!(
            ((&f1.coords - &f0.coords) - pred).amax() < 1e-9,
            "affine covariance violated"
        );
    }

    #[test]
    fn quartic_benchmark_grid_success_rate() {
        // smooth 11×11 grid of reflection centres for a quartic bounce orbit
        let h = HamiltonianSpec::quartic(1.0, 0.8);
        let chains = vec![chain(h.clone(), 0.8), chain(h, 0.8)];
        let mut sets = Vec::new();
        for i in 0..11 {
            for j in 0..11 {
                let cp = -0.25 + 0.05 * i as f64;
                let cq = -0.25 + 0.05 * j as f64;
                sets.push(vec![PhasePoint::n1(cp, cq)]);
            }
        }
        let fam = continue_family(
            &sets,
            11,
            11,
            &chains,
            &PhasePoint::n1(0.0, 0.0),
            &NewtonConfig::default(),
        )
        .unwrap();
        assert!(
            fam.success_fraction() >= 0.95,
            "success {}",
            fam.success_fraction()
        );
        // spot-check an orbit is genuinely periodic and non-resonant
        let o = fam.orbits[60].as_ref().unwrap();
        assert!(o.stability > 1e-6);
        let _ = ivr_jacobian(&o.monodromy);
    }
}
