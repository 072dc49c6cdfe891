mod common;

use common::{haar, max_diff, models};
use ethdyn::engine::{expectation, PureState};
use ethdyn::funcfilter::{EnergyWindow, ShellFilter};
use ethdyn::model::{
    apply_operator, build_geometry, BondTag, Geometry, ModelSpec, Operator, SpinOperator,
};
use ethdyn::oracle::{apply_dense, densify, exact_diagonalize};
use num_complex::Complex64;
use proptest::prelude::*;

fn handles(ops: &ethdyn::model::ModelOperators) -> [&SpinOperator; 5] {
    [&ops.h_left, &ops.h_right, &ops.h_coupling, &ops.h, &ops.d]
}

fn geometry_strategy() -> impl Strategy<Value = ModelSpec> {
    (0usize..4, 1usize..=3, -1.0f64..1.0, 0.0f64..1.5, 0.0f64..2.0, any::<u64>()).prop_map(
        |(g, n, delta, j_c, w, seed)| {
            let (geom, n) = match g {
                0 => (Geometry::Ladder, n.min(2)),
                1 => (Geometry::SingleContact, n),
                2 => (Geometry::TwoContact, n),
                _ => (Geometry::Lattice2d, 2),
            };
            let mut spec = ModelSpec::new(geom, n).with_couplings(delta, j_c).with_disorder(w, seed);
            if geom == Geometry::Lattice2d {
                spec = spec.with_n_right(2);
            }
            spec
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn handles_are_hermitian(spec in geometry_strategy(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let (ops, _) = models(&spec);
        let phi = haar(ops.dim(), s1);
        let psi = haar(ops.dim(), s2);
        for op in handles(&ops) {
            let a = phi.dot(&apply_operator(op, &psi).unwrap());
            let b = psi.dot(&apply_operator(op, &phi).unwrap()).conj();
            prop_assert!((a - b).norm() < 1e-12 * op.norm_bound().max(1.0));
        }
    }

    #[test]
    fn pieces_add_up(spec in geometry_strategy(), seed in any::<u64>()) {
        let (ops, _) = models(&spec);
        let psi = haar(ops.dim(), seed);
        let [l, r, c, h, d] = handles(&ops).map(|o| apply_operator(o, &psi).unwrap());
        let mut sum = l.clone();
        sum.axpy(Complex64::new(1.0, 0.0), &r);
        sum.axpy(Complex64::new(1.0, 0.0), &c);
        prop_assert!(max_diff(&sum, &h) < 1e-13);
        let mut diff = l;
        diff.axpy(Complex64::new(-1.0, 0.0), &r);
        prop_assert!(max_diff(&diff, &d) < 1e-13);
    }

    #[test]
    fn magnetization_is_conserved(spec in geometry_strategy(), seed in any::<u64>(), m in 0u32..8) {
        let (ops, _) = models(&spec);
        let n = ops.n_sites() as u32;
        let sector = m % (n + 1);
        let mut psi = haar(ops.dim(), seed);
        for (i, a) in psi.amplitudes_mut().iter_mut().enumerate() {
            if (i as u32).count_ones() != sector {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        for op in handles(&ops) {
            let out = apply_operator(op, &psi).unwrap();
            for (i, a) in out.amplitudes().iter().enumerate() {
                if (i as u32).count_ones() != sector {
                    prop_assert_eq!(*a, Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn matrix_free_matches_dense(spec in geometry_strategy()) {
        let (ops, dense) = models(&spec);
        for (op, m) in handles(&ops).into_iter().zip([&dense.h_left, &dense.h_right, &dense.h_coupling, &dense.h, &dense.d]) {
            let free = densify(op);
            let err = free.iter().zip(m.iter()).map(|(a, b)| (a - Complex64::new(*b, 0.0)).norm()).fold(0.0, f64::max);
            prop_assert!(err < 1e-12, "max elementwise error {err}");
        }
    }
}

#[test]
fn ladder_bond_counts() {
    let g = build_geometry(&ModelSpec::new(Geometry::Ladder, 8)).unwrap();
    assert_eq!((g.count(BondTag::Left), g.count(BondTag::Right), g.count(BondTag::Coupling)), (7, 15, 8));
}

#[test]
fn six_spin_ladder_against_dense_product() {
    let spec = common::ladder6().with_disorder(0.5, 11);
    let (ops, dense) = models(&spec);
    let psi = haar(ops.dim(), 4);
    let free = apply_operator(&ops.h, &psi).unwrap();
    assert!(max_diff(&free, &apply_dense(&dense.h, &psi)) < 1e-12);
    let dense_value = psi.dot(&apply_dense(&dense.d, &psi)).re;
    assert!((expectation(&psi, &ops.d).unwrap() - dense_value).abs() < 1e-12);
}

#[test]
fn all_up_state_is_an_eigenstate() {
    let (ops, _) = models(&common::ladder6());
    let up = PureState::basis(64, 63);
    let out = apply_operator(&ops.h, &up).unwrap();
    let mut expected = up.clone();
    expected.scale(Complex64::new(0.345, 0.0));
    assert!(max_diff(&out, &expected) < 1e-14);
    assert!((expectation(&up, &ops.d).unwrap() + 0.15).abs() < 1e-14);
}

#[test]
fn decoupled_hamiltonian_is_sum_of_halves() {
    let spec = ModelSpec::new(Geometry::Ladder, 2).with_couplings(0.3, 0.0).with_disorder(0.8, 2);
    let (ops, _) = models(&spec);
    let psi = haar(64, 9);
    let mut sum = apply_operator(&ops.h_left, &psi).unwrap();
    sum.axpy(Complex64::new(1.0, 0.0), &apply_operator(&ops.h_right, &psi).unwrap());
    assert!(max_diff(&sum, &apply_operator(&ops.h, &psi).unwrap()) < 1e-14);
}

#[test]
fn mirror_symmetric_model_has_no_mean_displacement() {
    // equal chain lengths, clean: the left-right swap maps D to −D
    let spec = ModelSpec::new(Geometry::Ladder, 3).with_n_right(3).with_couplings(0.3, 0.3);
    let (ops, dense) = models(&spec);
    let spec_h = exact_diagonalize(&dense.h).unwrap();
    let g = spec_h.function_matrix(|e| (-(e - 0.4).powi(2) / 0.72).exp());
    assert!((g * &dense.d).trace().abs() < 1e-10);
    let bounds = ethdyn::engine::spectral_bounds(&ops.h);
    let filter = ShellFilter::new(bounds, EnergyWindow::new(0.4, 0.6), 1e-10).unwrap();
    let mut total = 0.0;
    for b in 0..64 {
        let phi = filter.apply(&ops.h, &PureState::basis(64, b)).unwrap();
        total += expectation(&phi, &ops.d).unwrap();
    }
    assert!(total.abs() < 1e-8);
}
