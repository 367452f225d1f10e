//! Seeded test inputs shared by the integration targets.

#![allow(dead_code)]

use cr_toeplitz::jet::{multi_indices_of_degree, origin, Jet};
use cr_toeplitz::rng::stream;
use cr_toeplitz::Complex64;
use rand::Rng;

/// `κ(x) = x + (random quadratic and cubic terms)` plus a perturbation of the
/// linear part, fixing the origin.
pub fn random_cubic_kappa(dim: usize, order: usize, seed: u64) -> Vec<Jet> {
    let mut rng = stream(seed, "cubic-diffeo");
    let base = origin(dim);
    (0..dim)
        .map(|j| {
            let mut terms: Vec<(Vec<u8>, Complex64)> = Vec::new();
            for deg in 1..=3 {
                for e in multi_indices_of_degree(dim, deg) {
                    let mut c = 0.4 * (2.0 * rng.gen::<f64>() - 1.0);
                    if deg == 1 && e[j] == 1 {
                        c += 1.0;
                    }
                    terms.push((e.to_vec(), Complex64::new(c, 0.0)));
                }
            }
            Jet::from_terms(&base, order, terms.iter().map(|(e, c)| (e.as_slice(), *c))).unwrap()
        })
        .collect()
}

/// Positive density `1 + (random real terms of degree 1 and 2)`.
pub fn random_density(dim: usize, order: usize, seed: u64) -> Jet {
    let mut rng = stream(seed, "density");
    let base = origin(dim);
    let mut terms: Vec<(Vec<u8>, Complex64)> = vec![(vec![0; dim], Complex64::new(1.0, 0.0))];
    for deg in 1..=2 {
        for e in multi_indices_of_degree(dim, deg) {
            terms.push((
                e.to_vec(),
                Complex64::new(0.5 * (2.0 * rng.gen::<f64>() - 1.0), 0.0),
            ));
        }
    }
    Jet::from_terms(&base, order, terms.iter().map(|(e, c)| (e.as_slice(), *c))).unwrap()
}

/// Complex jet at the origin with coefficients uniform in `[-1, 1]²` up to
/// `max_degree`.
pub fn random_jet(nv: usize, order: usize, max_degree: usize, label: &str, seed: u64) -> Jet {
    let mut rng = stream(seed, label);
    let mut terms: Vec<(Vec<u8>, Complex64)> = Vec::new();
    for deg in 0..=max_degree.min(order) {
        for e in multi_indices_of_degree(nv, deg) {
            let c = Complex64::new(2.0 * rng.gen::<f64>() - 1.0, 2.0 * rng.gen::<f64>() - 1.0);
            terms.push((e.to_vec(), c));
        }
    }
    Jet::from_terms(
        &origin(nv),
        order,
        terms.iter().map(|(e, c)| (e.as_slice(), *c)),
    )
    .unwrap()
}
