//! Magnetic field reconstruction from measured resonance frequencies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{direction_from_miller, nv_families, project_field, MagneticField, UnitVector};
use crate::spin::{transition_frequencies, Manifold, SpinConstants};

use super::lm::{least_squares_residuals, Bounds, FitResult, LmOptions, CI95};
use super::peaks::DipEstimate;

/// Result of inverting an aligned-family line pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedInversion {
    /// T.
    pub b_par: f64,
    /// True when the pair sits above the anticrossing (f₋ = γB − D).
    pub above_lac: bool,
    /// Deviation of the pair from the aligned closed form, Hz.
    pub inconsistency: f64,
    /// Inconsistency exceeded the tolerance: misalignment or an excited-state line.
    pub flagged: bool,
}

/// Inverts f± = |D ± γB∥| for B∥, trying both sides of the anticrossing.
pub fn invert_aligned(f_minus: f64, f_plus: f64, d: f64, gamma: f64, tolerance: f64) -> Result<AlignedInversion> {
    if !(f_plus >= f_minus) {
        return Err(Error::invalid("f_plus", "must be >= f_minus"));
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma", "must be > 0"));
    }
    // below: f₊ + f₋ = 2D; above: f₊ − f₋ = 2D
    let below = (f_plus + f_minus - 2.0 * d).abs();
    let above = (f_plus - f_minus - 2.0 * d).abs();
    let (b_par, above_lac, inconsistency) = if below <= above {
        ((f_plus - f_minus) / (2.0 * gamma), false, below)
    } else {
        ((f_plus + f_minus) / (2.0 * gamma), true, above)
    };
    Ok(AlignedInversion {
        b_par,
        above_lac,
        inconsistency,
        flagged: inconsistency > tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionClass {
    /// Field along a cube axis; all families equivalent.
    Axis100,
    /// Field along a body diagonal; family 0 is the aligned one.
    Axis111,
    /// Unknown direction; magnitude and direction are fitted.
    Free,
}

impl DirectionClass {
    pub fn direction(self) -> Option<UnitVector> {
        match self {
            DirectionClass::Axis100 => Some(direction_from_miller(1, 0, 0).expect("nonzero")),
            DirectionClass::Axis111 => Some(direction_from_miller(1, 1, 1).expect("nonzero")),
            DirectionClass::Free => None,
        }
    }

    fn min_dips(self) -> usize {
        match self {
            DirectionClass::Free => 4,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelLine {
    pub family: usize,
    pub manifold: Manifold,
    /// 0 for m_s = 0 ↔ −1, 1 for m_s = 0 ↔ +1.
    pub branch: usize,
    /// Hz.
    pub frequency: f64,
}

/// Resonance lines of all four families for a Cartesian field.
pub fn model_lines(field: [f64; 3], constants: &SpinConstants, include_excited: bool) -> Vec<ModelLine> {
    let field = MagneticField::from_vector(field);
    let mut out = Vec::with_capacity(16);
    let manifolds: &[Manifold] = if include_excited {
        &[Manifold::Ground, Manifold::Excited]
    } else {
        &[Manifold::Ground]
    };
    for &manifold in manifolds {
        for fam in nv_families() {
            let t = transition_frequencies(&constants.system(manifold, project_field(&field, &fam)));
            for (branch, frequency) in [t.f_minus, t.f_plus].into_iter().enumerate() {
                out.push(ModelLine {
                    family: fam.index,
                    manifold,
                    branch,
                    frequency,
                });
            }
        }
    }
    out
}

/// Minimum-cost assignment of each row to a distinct column (rows ≤ columns).
/// Returns the column chosen for every row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "more rows than columns");
    // potentials formulation, 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertOptions {
    pub constants: SpinConstants,
    pub include_excited: bool,
    /// Dips farther than this from their assigned line are dropped and the
    /// fit repeated, Hz.
    pub outlier_tolerance: f64,
    /// Only model lines inside this band are expected to appear as dips, Hz.
    pub window: Option<(f64, f64)>,
    /// Upper end of the magnitude seed grid, T.
    pub max_field: f64,
    /// Seed grid step, T.
    pub field_step: f64,
}

impl Default for InvertOptions {
    fn default() -> Self {
        Self {
            constants: SpinConstants::default(),
            include_excited: false,
            outlier_tolerance: 10e6,
            window: None,
            max_field: 0.150,
            field_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldInversion {
    pub field: MagneticField,
    pub class: DirectionClass,
    /// 95 % half-width on |B|, T.
    pub magnitude_ci: f64,
    pub fit: FitResult,
    /// Family whose axis is parallel to the field (⟨111⟩ class).
    pub aligned_family: Option<usize>,
    /// Model line index per dip; `None` for excluded dips.
    pub assignment: Vec<Option<usize>>,
    pub lines: Vec<ModelLine>,
    pub excluded: Vec<usize>,
}

const MHZ: f64 = 1e6;

/// Sphere sampling density of the free-direction seed grid.
const SEED_DIRECTIONS: usize = 2400;

fn symmetric_cost(lines: &[ModelLine], dips: &[f64], window: Option<(f64, f64)>) -> f64 {
    let dist = |f: f64, set: &mut dyn Iterator<Item = f64>| set.map(|g| (f - g).abs()).fold(f64::INFINITY, f64::min);
    let to_lines: f64 = dips
        .iter()
        .map(|&d| dist(d, &mut lines.iter().map(|l| l.frequency)))
        .sum();
    let to_dips: f64 = lines
        .iter()
        .filter(|l| window.is_none_or(|(lo, hi)| l.frequency >= lo && l.frequency <= hi))
        .map(|l| dist(l.frequency, &mut dips.iter().copied()))
        .sum();
    to_lines + to_dips
}

/// Near-uniform directions in the wedge x ≥ y ≥ z ≥ 0. The line set is
/// invariant under the 48 cubic symmetry operations, so the wedge covers every
/// distinguishable direction.
fn seed_directions(per_sphere: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..per_sphere)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / per_sphere as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .filter(|v| v[0] >= v[1] && v[1] >= v[2] && v[2] >= 0.0)
        .collect()
}

fn assign(lines: &[ModelLine], dips: &[f64]) -> Vec<usize> {
    let cost: Vec<Vec<f64>> = dips
        .iter()
        .map(|d| lines.iter().map(|l| ((l.frequency - d) / MHZ).powi(2)).collect())
        .collect();
    hungarian(&cost)
}

/// Fits `to_field(params)` to the dips with fixed assignments, re-assigning
/// until the assignment is stable.
fn refine<F>(
    to_field: &F,
    init: Vec<f64>,
    bounds: &Bounds,
    typical: Vec<f64>,
    dips: &[f64],
    options: &InvertOptions,
) -> Result<(FitResult, Vec<usize>)>
where
    F: Fn(&[f64]) -> [f64; 3],
{
    let lines_at = |p: &[f64]| model_lines(to_field(p), &options.constants, options.include_excited);
    let mut params = init;
    let mut assignment = assign(&lines_at(&params), dips);
    let lm = LmOptions {
        typical: Some(typical),
        ..LmOptions::default()
    };
    for _ in 0..8 {
        let a = assignment.clone();
        let fit = least_squares_residuals(
            |p| {
                let lines = lines_at(p);
                dips.iter()
                    .zip(&a)
                    .map(|(d, &k)| (lines[k].frequency - d) / MHZ)
                    .collect()
            },
            &params,
            Some(bounds),
            &lm,
        )?;
        params = fit.params.clone();
        let next = assign(&lines_at(&params), dips);
        if next == assignment {
            return Ok((fit, assignment));
        }
        assignment = next;
    }
    Err(Error::NoConvergence { iterations: 8 })
}

/// Reconstructs the field from dip centers.
pub fn invert_field(dips: &[DipEstimate], class: DirectionClass, options: &InvertOptions) -> Result<FieldInversion> {
    let needed = class.min_dips();
    if dips.len() < needed {
        return Err(Error::Underdetermined(format!(
            "{:?} class needs at least {needed} dips, got {}",
            class,
            dips.len()
        )));
    }
    let mut active: Vec<usize> = (0..dips.len()).collect();
    let mut excluded = Vec::new();
    loop {
        let centers: Vec<f64> = active.iter().map(|&i| dips[i].center).collect();
        let (field, fit, assignment) = solve_class(&centers, class, options)?;
        let lines = model_lines(field, &options.constants, options.include_excited);
        let worst = centers
            .iter()
            .zip(&assignment)
            .enumerate()
            .map(|(k, (c, &a))| (k, (lines[a].frequency - c).abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((k, err)) = worst {
            if err > options.outlier_tolerance && active.len() > needed {
                excluded.push(active.remove(k));
                continue;
            }
        }
        let mut per_dip = vec![None; dips.len()];
        for (&i, &a) in active.iter().zip(&assignment) {
            per_dip[i] = Some(a);
        }
        let magnetic = MagneticField::from_vector(field);
        let magnitude_ci = match class {
            DirectionClass::Free => {
                // propagate the vector covariance onto |B|
                let b = magnetic.magnitude;
                if b > 0.0 {
                    let g = field.map(|c| c / b);
                    let mut var = 0.0;
                    for i in 0..3 {
                        for j in 0..3 {
                            var += g[i] * fit.covariance[(i, j)] * g[j];
                        }
                    }
                    CI95 * var.max(0.0).sqrt()
                } else {
                    CI95 * fit.covariance.trace().max(0.0).sqrt()
                }
            }
            _ => fit.ci95()[0],
        };
        excluded.sort_unstable();
        return Ok(FieldInversion {
            field: magnetic,
            class,
            magnitude_ci,
            aligned_family: (class == DirectionClass::Axis111).then_some(0),
            assignment: per_dip,
            lines,
            fit,
            excluded,
        });
    }
}

fn solve_class(centers: &[f64], class: DirectionClass, options: &InvertOptions) -> Result<([f64; 3], FitResult, Vec<usize>)> {
    let steps = (options.max_field / options.field_step).round() as usize;
    let magnitudes: Vec<f64> = (0..=steps).map(|i| i as f64 * options.field_step).collect();
    let seed_cost = |f: [f64; 3]| symmetric_cost(&model_lines(f, &options.constants, options.include_excited), centers, options.window);
    match class.direction() {
        Some(dir) => {
            let d = dir.to_array();
            let to_field = |p: &[f64]| [p[0] * d[0], p[0] * d[1], p[0] * d[2]];
            let costs: Vec<f64> = magnitudes.iter().map(|&b| seed_cost(to_field(&[b]))).collect();
            // refine from the three best local minima of the seed grid
            let mut seeds: Vec<usize> = (0..costs.len())
                .filter(|&i| (i == 0 || costs[i] <= costs[i - 1]) && (i + 1 == costs.len() || costs[i] <= costs[i + 1]))
                .collect();
            seeds.sort_by(|a, b| costs[*a].total_cmp(&costs[*b]));
            seeds.truncate(3);
            let bounds = Bounds {
                lower: vec![0.0],
                upper: vec![f64::INFINITY],
            };
            let mut best: Option<(FitResult, Vec<usize>)> = None;
            for s in seeds {
                let (fit, a) = refine(&to_field, vec![magnitudes[s]], &bounds, vec![1e-2], centers, options)?;
                if best.as_ref().is_none_or(|(b, _)| fit.residual_norm < b.residual_norm) {
                    best = Some((fit, a));
                }
            }
            let (fit, a) = best.expect("at least one seed");
            Ok((to_field(&fit.params), fit, a))
        }
        None => {
            let dirs = seed_directions(SEED_DIRECTIONS);
            let mut scored: Vec<(f64, [f64; 3])> = Vec::with_capacity(dirs.len() * magnitudes.len());
            for d in &dirs {
                for &b in &magnitudes {
                    let f = [b * d[0], b * d[1], b * d[2]];
                    scored.push((seed_cost(f), f));
                }
            }
            scored.sort_by(|a, b| a.0.total_cmp(&b.0));
            let to_field = |p: &[f64]| [p[0], p[1], p[2]];
            let bounds = Bounds::unbounded(3);
            let mut best: Option<(FitResult, Vec<usize>)> = None;
            let mut seeds: Vec<[f64; 3]> = Vec::new();
            for (_, f) in &scored {
                let distinct = seeds
                    .iter()
                    .all(|s| (0..3).map(|i| (s[i] - f[i]).powi(2)).sum::<f64>().sqrt() > 3.0 * options.field_step);
                if distinct {
                    seeds.push(*f);
                    if seeds.len() == 5 {
                        break;
                    }
                }
            }
            for f in &seeds {
                let init = f.map(|c| if c == 0.0 { 1e-6 } else { c }).to_vec();
                if let Ok((fit, a)) = refine(&to_field, init, &bounds, vec![1e-2; 3], centers, options) {
                    if best.as_ref().is_none_or(|(b, _)| fit.residual_norm < b.residual_norm) {
                        best = Some((fit, a));
                    }
                }
            }
            let (fit, a) = best.ok_or(Error::NoConvergence { iterations: 8 })?;
            let f = [fit.params[0], fit.params[1], fit.params[2]];
            Ok((f, fit, a))
        }
    }
}
