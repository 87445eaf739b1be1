//! Spin-1 Hamiltonians of the NV⁻ ground and excited triplets.
//!
//! Energies are stored in Hz (divided by Planck's constant), in the
//! m_s = {−1, 0, +1} basis. The transverse field is placed along S_x; the
//! spectrum only depends on its magnitude.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FieldProjection;

/// Ground-state zero-field splitting, Hz.
pub const D_GROUND: f64 = 2.87e9;
/// Electron gyromagnetic ratio, Hz/T.
pub const GAMMA_E: f64 = 28e9;
/// Field of the excited-state anticrossing used to fix D_es, T.
pub const ESLAC_FIELD: f64 = 51e-3;
/// Excited-state zero-field splitting, Hz. Chosen so the ESLAC sits at 51 mT.
pub const D_EXCITED: f64 = GAMMA_E * ESLAC_FIELD;

/// Basis index of each m_s value.
pub const MS_MINUS: usize = 0;
pub const MS_ZERO: usize = 1;
pub const MS_PLUS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Manifold {
    Ground,
    Excited,
}

/// Zero-field splittings and gyromagnetic ratio shared by the two triplets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpinConstants {
    pub d_gs: f64,
    pub d_es: f64,
    pub gamma: f64,
}

impl Default for SpinConstants {
    fn default() -> Self {
        Self {
            d_gs: D_GROUND,
            d_es: D_EXCITED,
            gamma: GAMMA_E,
        }
    }
}

impl SpinConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("d_gs", self.d_gs), ("d_es", self.d_es), ("gamma", self.gamma)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, "must be finite and > 0"));
            }
        }
        Ok(())
    }

    pub fn system(&self, manifold: Manifold, projection: FieldProjection) -> SpinSystem {
        let d_split = match manifold {
            Manifold::Ground => self.d_gs,
            Manifold::Excited => self.d_es,
        };
        SpinSystem {
            d_split,
            gamma: self.gamma,
            projection,
            manifold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinSystem {
    pub d_split: f64,
    pub gamma: f64,
    pub projection: FieldProjection,
    pub manifold: Manifold,
}

impl SpinSystem {
    pub fn new(
        d_split: f64,
        gamma: f64,
        projection: FieldProjection,
        manifold: Manifold,
    ) -> Result<Self> {
        if !(d_split > 0.0) {
            return Err(Error::invalid("d_split", "must be > 0"));
        }
        if !(gamma > 0.0) {
            return Err(Error::invalid("gamma", "must be > 0"));
        }
        Ok(Self {
            d_split,
            gamma,
            projection,
            manifold,
        })
    }

    pub fn ground(projection: FieldProjection) -> Self {
        SpinConstants::default().system(Manifold::Ground, projection)
    }

    pub fn excited(projection: FieldProjection) -> Self {
        SpinConstants::default().system(Manifold::Excited, projection)
    }
}

/// H = D·Sz² + γ(B∥·Sz + B⊥·Sx).
pub fn hamiltonian(sys: &SpinSystem) -> Matrix3<f64> {
    let d = sys.d_split;
    let zpar = sys.gamma * sys.projection.b_par;
    let x = sys.gamma * sys.projection.b_perp * std::f64::consts::FRAC_1_SQRT_2;
    Matrix3::new(
        d - zpar, x, 0.0, //
        x, 0.0, x, //
        0.0, x, d + zpar,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    /// Eigenvalues in ascending order, Hz.
    pub levels: [f64; 3],
    /// Column `i` is the eigenvector of `levels[i]` in the m_s basis.
    pub states: Matrix3<f64>,
}

impl EigenSystem {
    pub fn reconstruct(&self) -> Matrix3<f64> {
        let l = Matrix3::from_diagonal(&self.levels.into());
        self.states * l * self.states.transpose()
    }
}

pub fn eigensystem(h: &Matrix3<f64>) -> Result<EigenSystem> {
    let scale = h.amax().max(f64::MIN_POSITIVE);
    let asymmetry = (h - h.transpose()).amax() / scale;
    if asymmetry > 1e-12 {
        return Err(Error::NotHermitian { asymmetry });
    }
    let eig = SymmetricEigen::new(*h);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let levels = order.map(|i| eig.eigenvalues[i]);
    let mut states = Matrix3::zeros();
    for (col, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        // deterministic phase: largest component positive
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v = -v;
        }
        states.set_column(col, &v);
    }
    Ok(EigenSystem { levels, states })
}

/// |⟨eigenstate_i | m_s = j⟩|²; rows are eigenstates in ascending energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingMatrix(pub [[f64; 3]; 3]);

impl MixingMatrix {
    pub fn identity() -> Self {
        MixingMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn row(&self, i: usize) -> [f64; 3] {
        self.0[i]
    }

    pub fn max_stochastic_error(&self) -> f64 {
        let mut err: f64 = 0.0;
        for i in 0..3 {
            let row: f64 = self.0[i].iter().sum();
            let col: f64 = (0..3).map(|r| self.0[r][i]).sum();
            err = err.max((row - 1.0).abs()).max((col - 1.0).abs());
        }
        err
    }
}

fn mixing_of(eig: &EigenSystem) -> MixingMatrix {
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = eig.states[(j, i)].powi(2);
        }
    }
    MixingMatrix(m)
}

pub fn mixing_matrix(sys: &SpinSystem) -> MixingMatrix {
    let eig = eigensystem(&hamiltonian(sys)).expect("spin Hamiltonian is symmetric");
    mixing_of(&eig)
}

/// Eigenlevels relabeled by dominant m_s character.
///
/// `energies[k]` and `mixing.0[k]` refer to the eigenstate carrying label
/// k ∈ {MS_MINUS, MS_ZERO, MS_PLUS}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledLevels {
    pub energies: [f64; 3],
    pub mixing: MixingMatrix,
}

impl LabeledLevels {
    pub fn transitions(&self, manifold: Manifold) -> TransitionSet {
        TransitionSet {
            f_minus: (self.energies[MS_MINUS] - self.energies[MS_ZERO]).abs(),
            f_plus: (self.energies[MS_PLUS] - self.energies[MS_ZERO]).abs(),
            manifold,
        }
    }
}

const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Assigns m_s labels to eigenstates by maximal total overlap. Exact ties are
/// resolved by giving the m_s = 0 label to the lower-energy eigenstate.
pub fn labeled_levels(sys: &SpinSystem) -> LabeledLevels {
    let eig = eigensystem(&hamiltonian(sys)).expect("spin Hamiltonian is symmetric");
    let mix = mixing_of(&eig);
    // perm[i] = label of eigenstate i
    let mut best: Option<(f64, [usize; 3])> = None;
    for perm in PERMUTATIONS {
        let score: f64 = (0..3).map(|i| mix.0[i][perm[i]]).sum();
        let better = match best {
            None => true,
            Some((s, prev)) => {
                if score > s + 1e-12 {
                    true
                } else if (score - s).abs() <= 1e-12 {
                    let zero_of = |p: [usize; 3]| p.iter().position(|&l| l == MS_ZERO).unwrap();
                    eig.levels[zero_of(perm)] < eig.levels[zero_of(prev)]
                } else {
                    false
                }
            }
        };
        if better {
            best = Some((score, perm));
        }
    }
    let perm = best.expect("six permutations").1;
    let mut energies = [0.0; 3];
    let mut rows = [[0.0; 3]; 3];
    for i in 0..3 {
        energies[perm[i]] = eig.levels[i];
        rows[perm[i]] = mix.0[i];
    }
    LabeledLevels {
        energies,
        mixing: MixingMatrix(rows),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionSet {
    pub f_minus: f64,
    pub f_plus: f64,
    pub manifold: Manifold,
}

/// Closed form f± = |D ± γB∥|, valid only without transverse field.
pub fn zeeman_aligned(sys: &SpinSystem) -> Result<TransitionSet> {
    if sys.projection.b_perp != 0.0 {
        return Err(Error::NotAligned(sys.projection.b_perp));
    }
    let shift = sys.gamma * sys.projection.b_par;
    Ok(TransitionSet {
        f_minus: (sys.d_split - shift).abs(),
        f_plus: (sys.d_split + shift).abs(),
        manifold: sys.manifold,
    })
}

pub fn transition_frequencies(sys: &SpinSystem) -> TransitionSet {
    labeled_levels(sys).transitions(sys.manifold)
}

/// Fields of the ground- and excited-state anticrossings, (D_gs/γ, D_es/γ).
pub fn lac_fields(d_gs: f64, d_es: f64, gamma: f64) -> (f64, f64) {
    (d_gs / gamma, d_es / gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ground(b_par: f64, b_perp: f64) -> SpinSystem {
        SpinSystem::ground(FieldProjection::from_components(b_par, b_perp))
    }

    /// Trigonometric roots of the characteristic cubic of a real symmetric 3×3.
    fn cubic_roots(a: &Matrix3<f64>) -> [f64; 3] {
        let tr = a.trace();
        let c2 = -tr;
        let c1 = a[(0, 0)] * a[(1, 1)] + a[(0, 0)] * a[(2, 2)] + a[(1, 1)] * a[(2, 2)]
            - a[(0, 1)] * a[(1, 0)]
            - a[(0, 2)] * a[(2, 0)]
            - a[(1, 2)] * a[(2, 1)];
        let c0 = -a.determinant();
        // depressed cubic t³ + pt + q with λ = t − c2/3
        let p = c1 - c2 * c2 / 3.0;
        let q = 2.0 * c2.powi(3) / 27.0 - c2 * c1 / 3.0 + c0;
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let mut r = [0.0; 3];
        for (k, root) in r.iter_mut().enumerate() {
            *root = m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - c2 / 3.0;
        }
        r.sort_by(f64::total_cmp);
        r
    }

    #[test]
    fn zero_field_hamiltonian() {
        let h = hamiltonian(&ground(0.0, 0.0));
        assert_eq!(h, Matrix3::from_diagonal(&[D_GROUND, 0.0, D_GROUND].into()));
        let e = eigensystem(&h).unwrap();
        assert_eq!(e.levels, [0.0, D_GROUND, D_GROUND]);
        assert_eq!(mixing_matrix(&ground(0.0, 0.0)).0[0], [0.0, 1.0, 0.0]);
    }

    #[test]
    fn trace_is_twice_d() {
        for (bp, bt) in [(0.0, 0.0), (0.01, 0.02), (0.2, 0.1)] {
            let h = hamiltonian(&ground(bp, bt));
            assert_relative_eq!(h.trace(), 2.0 * D_GROUND, max_relative = 1e-15);
            let e = eigensystem(&h).unwrap();
            assert_relative_eq!(e.levels.iter().sum::<f64>(), 2.0 * D_GROUND, max_relative = 1e-12);
        }
    }

    #[test]
    fn gslac_degeneracy() {
        let b = D_GROUND / GAMMA_E;
        assert_relative_eq!(b, 0.1025, max_relative = 1e-12);
        let e = eigensystem(&hamiltonian(&ground(b, 0.0))).unwrap();
        assert!(e.levels[0].abs() < 1e-3);
        assert!(e.levels[1].abs() < 1e-3);
    }

    #[test]
    fn rejects_asymmetric_matrix() {
        let mut h = Matrix3::identity();
        h[(0, 1)] = 1.0;
        assert!(matches!(eigensystem(&h), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn second_order_transverse_shift() {
        let b_perp = 1e-3;
        let levels = labeled_levels(&ground(0.0, b_perp));
        let oracle = -(GAMMA_E * b_perp).powi(2) / D_GROUND;
        assert_relative_eq!(oracle, -273.17e3, max_relative = 1e-4);
        assert_relative_eq!(levels.energies[MS_ZERO], oracle, max_relative = 1e-3);
    }

    #[test]
    fn aligned_closed_form_examples() {
        let t = zeeman_aligned(&ground(0.0, 0.0)).unwrap();
        assert_eq!((t.f_minus, t.f_plus), (2.87e9, 2.87e9));
        let t = zeeman_aligned(&ground(1e-3, 0.0)).unwrap();
        assert_relative_eq!(t.f_minus, 2.842e9, max_relative = 1e-15);
        assert_relative_eq!(t.f_plus, 2.898e9, max_relative = 1e-15);
        let t = zeeman_aligned(&ground(0.1025, 0.0)).unwrap();
        assert!(t.f_minus < 1e-3);
        assert!(matches!(zeeman_aligned(&ground(0.01, 1e-4)), Err(Error::NotAligned(_))));
    }

    #[test]
    fn tilted_first_order() {
        let theta = (1.0f64 / 3f64.sqrt()).acos();
        let b = 5e-3;
        let t = transition_frequencies(&ground(b * theta.cos(), b * theta.sin()));
        let split = GAMMA_E * b * theta.cos();
        assert_relative_eq!(split, 80.83e6, max_relative = 1e-3);
        // second-order perturbation theory in the transverse term
        let g2 = (GAMMA_E * b * theta.sin()).powi(2) / 2.0;
        let e0 = -g2 * (1.0 / (D_GROUND - split) + 1.0 / (D_GROUND + split));
        let e_plus = D_GROUND + split + g2 / (D_GROUND + split);
        let e_minus = D_GROUND - split + g2 / (D_GROUND - split);
        assert!((t.f_plus - (e_plus - e0)).abs() < 5e4);
        assert!((t.f_minus - (e_minus - e0)).abs() < 5e4);
        assert!(((t.f_plus - t.f_minus) / (2.0 * split) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn anticrossing_gap_opens() {
        let b_perp = 0.5e-3;
        let t = transition_frequencies(&ground(D_GROUND / GAMMA_E, b_perp));
        let gap = std::f64::consts::SQRT_2 * GAMMA_E * b_perp;
        assert!(t.f_minus > 0.0);
        assert_relative_eq!(t.f_minus, gap, max_relative = 1e-2);
    }

    #[test]
    fn mixing_at_gslac_is_even() {
        let m = mixing_matrix(&ground(D_GROUND / GAMMA_E, 0.5e-3));
        // the two lowest eigenstates share m_s = 0 and −1 equally
        for row in &m.0[..2] {
            assert_relative_eq!(row[MS_ZERO], 0.5, epsilon = 1e-3);
            assert_relative_eq!(row[MS_MINUS], 0.5, epsilon = 1e-3);
        }
        assert!(m.max_stochastic_error() < 1e-10);
    }

    #[test]
    fn lac_field_examples() {
        let (gs, es) = lac_fields(D_GROUND, D_EXCITED, GAMMA_E);
        assert_relative_eq!(gs, 102.5e-3, max_relative = 1e-12);
        assert_relative_eq!(es, 51e-3, max_relative = 1e-12);
        assert_relative_eq!(D_EXCITED, 1.428e9, max_relative = 1e-12);
        let (gs2, es2) = lac_fields(D_GROUND, D_EXCITED, 2.0 * GAMMA_E);
        assert_relative_eq!(gs2, gs / 2.0);
        assert_relative_eq!(es2, es / 2.0);
        let (a, b) = lac_fields(D_GROUND, D_GROUND, GAMMA_E);
        assert_eq!(a, b);
    }

    #[test]
    fn excited_anticrossing_minimum() {
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=2000 {
            let b = 40e-3 + 20e-3 * i as f64 / 2000.0;
            let t = transition_frequencies(&SpinSystem::excited(FieldProjection::from_components(b, 0.5e-3)));
            if t.f_minus < best.0 {
                best = (t.f_minus, b);
            }
        }
        assert!((best.1 - 51e-3).abs() < 0.5e-3, "minimum at {}", best.1);
    }

    #[test]
    fn tie_gives_zero_label_to_lower_level() {
        let levels = labeled_levels(&ground(D_GROUND / GAMMA_E, 0.5e-3));
        assert!(levels.energies[MS_ZERO] < levels.energies[MS_MINUS]);
    }

    proptest! {
        #[test]
        fn eigen_matches_cubic_oracle(v in proptest::collection::vec(-5.0f64..5.0, 6)) {
            let a = Matrix3::new(v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5]);
            let e = eigensystem(&a).unwrap();
            let r = cubic_roots(&a);
            let scale = a.amax().max(1.0);
            for k in 0..3 {
                prop_assert!((e.levels[k] - r[k]).abs() < 1e-9 * scale);
            }
            prop_assert!((e.reconstruct() - a).amax() <= 1e-9 * scale);
            let gram = e.states.transpose() * e.states;
            prop_assert!((gram - Matrix3::identity()).amax() < 1e-10);
        }

        #[test]
        fn aligned_diagonalization_matches_closed_form(b in 0.0f64..0.2) {
            let sys = ground(b, 0.0);
            let exact = transition_frequencies(&sys);
            let closed = zeeman_aligned(&sys).unwrap();
            prop_assert!((exact.f_plus - closed.f_plus).abs() <= 1e-9 * closed.f_plus);
            prop_assert!((exact.f_minus - closed.f_minus).abs() <= 1e-9 * closed.f_minus.max(1.0));
        }

        #[test]
        fn mixing_doubly_stochastic(bp in 0.0f64..0.2, bt in 0.0f64..0.2) {
            let m = mixing_matrix(&ground(bp, bt));
            prop_assert!(m.max_stochastic_error() < 1e-10);
            for row in m.0 { for x in row { prop_assert!((0.0..=1.0 + 1e-12).contains(&x)); } }
        }

        #[test]
        fn f_plus_increases_with_parallel_field(b in prop_oneof![0.0f64..0.09, 0.115f64..0.2], bt in 0.0f64..0.01) {
            let lo = transition_frequencies(&ground(b, bt));
            let hi = transition_frequencies(&ground(b + 1e-3, bt));
            prop_assert!(hi.f_plus > lo.f_plus);
        }
    }

    #[test]
    fn f_minus_decreases_until_lac() {
        let bt = 1e-3;
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let b = 0.1 * i as f64 / 100.0;
            let f = transition_frequencies(&ground(b, bt)).f_minus;
            assert!(f < prev);
            prev = f;
        }
    }
}
