//! Property tests for jet arithmetic, Hamiltonian fields, the `L_j`
//! operators and phase rescaling.

use cr_toeplitz::cr_models::heisenberg_chart;
use cr_toeplitz::jet::{multi_indices_of_degree, origin, Jet};
use cr_toeplitz::kernel::{phase_rescale, random_kernel_amplitude};
use cr_toeplitz::stationary_phase::{apply_l, build_phase_data};
use cr_toeplitz::symbol::{divergence, hamiltonian_pairing_defect, hamiltonian_vector_field};
use cr_toeplitz::Complex64;
use proptest::prelude::*;

const NV: usize = 3;
const ORDER: usize = 4;
const TOL: f64 = 1e-11;

fn num_monomials(nv: usize, order: usize) -> usize {
    (0..=order)
        .map(|d| multi_indices_of_degree(nv, d).len())
        .sum()
}

fn build(nv: usize, order: usize, coeffs: &[(f64, f64)], constant: Option<f64>) -> Jet {
    let exps: Vec<Vec<u8>> = (0..=order)
        .flat_map(|d| {
            multi_indices_of_degree(nv, d)
                .into_iter()
                .map(|e| e.to_vec())
        })
        .collect();
    let terms: Vec<(Vec<u8>, Complex64)> = exps
        .into_iter()
        .zip(coeffs)
        .map(|(e, &(re, im))| {
            let c = if e.iter().all(|&k| k == 0) {
                constant.map_or(Complex64::new(re, im), |v| Complex64::new(v, 0.0))
            } else {
                Complex64::new(re, im)
            };
            (e, c)
        })
        .collect();
    Jet::from_terms(
        &origin(nv),
        order,
        terms.iter().map(|(e, c)| (e.as_slice(), *c)),
    )
    .unwrap()
}

fn coeffs_strategy(nv: usize, order: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), num_monomials(nv, order))
}

fn jet() -> impl Strategy<Value = Jet> {
    coeffs_strategy(NV, ORDER).prop_map(|c| build(NV, ORDER, &c, None))
}

/// Jets with value 1 at the base point and small higher coefficients.
fn unit_jet() -> impl Strategy<Value = Jet> {
    coeffs_strategy(NV, ORDER).prop_map(|c| {
        let small: Vec<(f64, f64)> = c.iter().map(|&(a, b)| (0.3 * a, 0.3 * b)).collect();
        build(NV, ORDER, &small, Some(1.0))
    })
}

/// Jets vanishing at the base point, usable as inner maps of a composition.
fn centered_jet() -> impl Strategy<Value = Jet> {
    coeffs_strategy(NV, ORDER).prop_map(|c| build(NV, ORDER, &c, Some(0.0)))
}

fn close(a: &Jet, b: &Jet) -> bool {
    a.max_diff(b).unwrap() < TOL * (1.0 + a.max_abs().max(b.max_abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ring_axioms(f in jet(), g in jet(), h in jet()) {
        prop_assert!(close(&f.add(&g).unwrap(), &g.add(&f).unwrap()));
        prop_assert!(close(&f.mul(&g).unwrap(), &g.mul(&f).unwrap()));
        let left = f.mul(&g).unwrap().mul(&h).unwrap();
        let right = f.mul(&g.mul(&h).unwrap()).unwrap();
        prop_assert!(close(&left, &right));
        let dist = f.mul(&g.add(&h).unwrap()).unwrap();
        let split = f.mul(&g).unwrap().add(&f.mul(&h).unwrap()).unwrap();
        prop_assert!(close(&dist, &split));
        prop_assert!(f.sub(&f).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn truncation_is_a_ring_map(f in jet(), g in jet(), k in 0usize..ORDER) {
        let lhs = f.mul(&g).unwrap().truncate(k);
        let rhs = f.truncate(k).mul(&g.truncate(k)).unwrap();
        prop_assert!(close(&lhs, &rhs));
    }

    #[test]
    fn leibniz_rule(f in jet(), g in jet(), i in 0usize..NV) {
        let lhs = f.mul(&g).unwrap().partial(i).unwrap();
        let k = lhs.order();
        let rhs = f.partial(i).unwrap().mul(&g.truncate(k)).unwrap()
            .add(&f.truncate(k).mul(&g.partial(i).unwrap()).unwrap()).unwrap();
        prop_assert!(close(&lhs, &rhs));
    }

    #[test]
    fn chain_rule(f in jet(), h0 in centered_jet(), h1 in centered_jet(), h2 in centered_jet(),
                  i in 0usize..NV) {
        let inner = [h0, h1, h2];
        let lhs = f.compose(&inner).unwrap().partial(i).unwrap();
        let k = lhs.order();
        let mut rhs = Jet::zero(&origin(NV), k);
        for (j, hj) in inner.iter().enumerate() {
            let outer = f.partial(j).unwrap().compose(&inner).unwrap().truncate(k);
            rhs = rhs.add(&outer.mul(&hj.partial(i).unwrap()).unwrap()).unwrap();
        }
        prop_assert!(close(&lhs, &rhs));
    }

    #[test]
    fn invert_log_exp_pow(f in unit_jet(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let one = Jet::constant(&origin(NV), ORDER, Complex64::new(1.0, 0.0));
        prop_assert!(close(&f.mul(&f.invert().unwrap()).unwrap(), &one));
        prop_assert!(close(&f.log().unwrap().exp().unwrap(), &f));
        let prod = f.pow_real(a).unwrap().mul(&f.pow_real(b).unwrap()).unwrap();
        prop_assert!(close(&prod, &f.pow_real(a + b).unwrap()));
        prop_assert!(close(&f.pow_real(-1.0).unwrap(), &f.invert().unwrap()));
    }

    #[test]
    fn hamiltonian_fields_are_divergence_free(c in coeffs_strategy(4, ORDER)) {
        let f = build(4, ORDER, &c, None);
        let xf = hamiltonian_vector_field(&f).unwrap();
        prop_assert!(divergence(&xf).unwrap().max_abs() < TOL);
        prop_assert!(hamiltonian_pairing_defect(&f).unwrap() < TOL);
    }

    #[test]
    fn l1_is_linear(u in coeffs_strategy(4, ORDER), v in coeffs_strategy(4, ORDER),
                    a in (-1.0..1.0f64, -1.0..1.0f64), b in (-1.0..1.0f64, -1.0..1.0f64)) {
        let data = build_phase_data(&heisenberg_chart(1, 6).unwrap()).unwrap();
        let (u, v) = (build(4, ORDER, &u, None), build(4, ORDER, &v, None));
        let (a, b) = (Complex64::new(a.0, a.1), Complex64::new(b.0, b.1));
        let combo = u.scale(a).add(&v.scale(b)).unwrap();
        let lhs = apply_l(&data, 1, &combo).unwrap();
        let rhs = a * apply_l(&data, 1, &u).unwrap() + b * apply_l(&data, 1, &v).unwrap();
        prop_assert!((lhs - rhs).norm() < TOL * (1.0 + lhs.norm()));
    }

    #[test]
    fn rescaling_by_one_is_identity(seed in 0u64..10_000, p in -2.0..3.0f64) {
        let amp = random_kernel_amplitude(1, p, 2, 4, seed, true).unwrap();
        let one = Jet::constant(&origin(2), 4, Complex64::new(1.0, 0.0));
        let out = phase_rescale(&amp, &one, -1.0).unwrap();
        for j in 0..2 {
            prop_assert!(out.coeff(j).max_diff(&amp.coeff(j)).unwrap() < 1e-15);
        }
        prop_assert_eq!(out.top_power(), amp.top_power());
    }
}
