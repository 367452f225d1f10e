//! Canonical-coordinate CR model charts and their pseudohermitian geometry.
//!
//! Coordinates are `x_1, ..., x_{2n+1}` with `z_j = x_{2j-1} + i x_{2j}`
//! (zero-based index `2j-2` and `2j-1`) and `x_{2n+1}` the transverse
//! variable. The exact model is the Heisenberg group with contact form
//! `dx_{2n+1} + (i/2) sum (z̄_j dz_j - z_j dz̄_j)`, Reeb field `-∂_{2n+1}` and
//! flat volume density. Perturbed charts add a quadratic part to the density
//! and a quartic part to the phase, tied to a synthetic scalar curvature.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::ModelError;
use crate::jet::{multi_indices_of_degree, origin, Jet, MultiIndex};
use crate::rng::stream;

const INVARIANT_TOL: f64 = 1e-12;
const CONSISTENCY_TOL: f64 = 1e-10;
const IM_SAMPLES: usize = 10_000;
const IM_SAMPLE_RADIUS: f64 = 0.5;
const IM_SAMPLE_SEED: u64 = 0x5eed_0001;

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The Szegő phase and its prepared form, as jets in `(x, y)` at `(0, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePair {
    pub phi: Jet,
    pub prepared_phi: Jet,
}

/// Explicit perturbation data for [`perturbed_chart`].
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    /// Symmetric `(2n+1) x (2n+1)` matrix `Q`; the density becomes `1 + x^T Q x`.
    pub lambda_quadratic: Vec<Vec<f64>>,
    /// Quartic polynomial `K(v)` in `2n` variables as `(exponents, coefficient)`;
    /// the phase gains `K(x' - y')`.
    pub phase_quartic: Vec<(MultiIndex, Complex64)>,
}

impl Perturbation {
    /// No perturbation.
    pub fn zero(n: usize) -> Self {
        Self {
            lambda_quadratic: vec![vec![0.0; 2 * n + 1]; 2 * n + 1],
            phase_quartic: Vec::new(),
        }
    }
}

/// Seeded generator of admissible perturbations.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSpec;

impl PerturbationSpec {
    /// Random perturbation satisfying the curvature identity for `r_synth`.
    ///
    /// `lambda_share` in `[0, 1]` splits the curvature between the density
    /// channel (`Δλ(0) = -2 R w`) and the phase channel
    /// (`Δ²h₁(0) = 16 i R (1 - w)`).
    pub fn seeded(n: usize, r_synth: f64, lambda_share: f64, seed: u64) -> Perturbation {
        let dim = 2 * n + 1;
        let mut rng = stream(seed, "perturbation");
        let mut q = vec![vec![0.0; dim]; dim];
        for i in 0..dim {
            for j in i..dim {
                let v = 0.5 * (rng.gen::<f64>() - 0.5);
                q[i][j] = v;
                q[j][i] = v;
            }
        }
        let trace: f64 = (0..2 * n).map(|j| q[j][j]).sum();
        let shift = (-r_synth * lambda_share - trace) / (2 * n) as f64;
        for j in 0..2 * n {
            q[j][j] += shift;
        }

        let mut quartic: Vec<(MultiIndex, Complex64)> = multi_indices_of_degree(2 * n, 4)
            .into_iter()
            .map(|e| {
                let c = cx(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5).scale(0.2);
                (e, c)
            })
            .collect();
        let current: Complex64 = quartic
            .iter()
            .map(|(e, c)| c * bilaplacian_of_monomial(e))
            .sum();
        let target = cx(0.0, 8.0 * r_synth * (1.0 - lambda_share));
        quartic[0].1 += (target - current) / 24.0;
        Perturbation {
            lambda_quadratic: q,
            phase_quartic: quartic,
        }
    }
}

/// `Δ²` of a monomial in the horizontal variables, evaluated at 0.
fn bilaplacian_of_monomial(e: &[u8]) -> f64 {
    let deg: u32 = e.iter().map(|&v| v as u32).sum();
    if deg != 4 {
        return 0.0;
    }
    let fours = e.iter().filter(|&&v| v == 4).count();
    let twos = e.iter().filter(|&&v| v == 2).count();
    if fours == 1 {
        24.0
    } else if twos == 2 {
        8.0
    } else {
        0.0
    }
}

/// Canonical-coordinate model of a strictly pseudoconvex CR manifold near 0.
#[derive(Clone, Debug, PartialEq)]
pub struct CRModelChart {
    n: usize,
    jet_order: usize,
    contact_form: Vec<Jet>,
    frame: Vec<Vec<Jet>>,
    reeb: Vec<Jet>,
    volume_density: Jet,
    synthetic_r: f64,
    phase: PhasePair,
    exact: bool,
}

impl CRModelChart {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Real dimension `2n+1`.
    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    pub fn jet_order(&self) -> usize {
        self.jet_order
    }

    /// Coefficient jets of `ω₀` in the basis `dx_1, ..., dx_{2n+1}`.
    pub fn contact_form(&self) -> &[Jet] {
        &self.contact_form
    }

    /// `frame()[j][k]` is the `∂_k` coefficient of `Z_{j+1}`.
    pub fn frame(&self) -> &[Vec<Jet>] {
        &self.frame
    }

    /// Coefficient jets of the Reeb field `𝒯`.
    pub fn reeb(&self) -> &[Jet] {
        &self.reeb
    }

    pub fn volume_density(&self) -> &Jet {
        &self.volume_density
    }

    pub fn synthetic_r(&self) -> f64 {
        self.synthetic_r
    }

    pub fn phase(&self) -> &PhasePair {
        &self.phase
    }

    /// True for the unperturbed Heisenberg model.
    pub fn is_heisenberg(&self) -> bool {
        self.exact
    }

    /// Coefficient of `dz_j` (zero-based `j`) in `ω₀`.
    pub fn contact_form_dz(&self, j: usize) -> Jet {
        let a = &self.contact_form[2 * j];
        let b = &self.contact_form[2 * j + 1];
        a.scale_real(0.5)
            .add(&b.scale(cx(0.0, -0.5)))
            .expect("contact form jets share one space")
    }

    /// Real Levi frame as a matrix of jets: row `a` holds the coordinates of
    /// `X_{a+1}`, with `Z_j = (X_{2j-1} - i X_{2j}) / √2` and `X_{2n+1} = -𝒯`.
    pub fn real_frame(&self) -> Vec<Vec<Jet>> {
        let s = std::f64::consts::SQRT_2;
        let mut rows = Vec::with_capacity(self.dim());
        for z in &self.frame {
            let re: Vec<Jet> = z.iter().map(|c| real_part(c).scale_real(s)).collect();
            let im: Vec<Jet> = z.iter().map(|c| imag_part(c).scale_real(-s)).collect();
            rows.push(re);
            rows.push(im);
        }
        rows.push(self.reeb.iter().map(Jet::neg).collect());
        rows
    }

    /// Laplacian `Δ = Σ_{j ≤ 2n} ∂²_j` of a jet in the chart variables.
    pub fn horizontal_laplacian(&self, f: &Jet) -> Result<Jet, ModelError> {
        let mut acc = Jet::zero(f.base_point(), f.order().saturating_sub(2));
        for j in 0..2 * self.n {
            acc = acc.add(&f.partial(j)?.partial(j)?)?;
        }
        Ok(acc)
    }

    /// The quartic remainder `h₁(u) = Φ(0,u) + Φ(u,0)` minus its quadratic part,
    /// restricted to `σ = 1`, returned as `Δ²h₁(0)`.
    pub fn bilaplacian_h1(&self) -> Result<Complex64, ModelError> {
        let dim = self.dim();
        let k = self.jet_order;
        let base = origin(dim);
        let zero = Jet::zero(&base, k);
        let vars: Vec<Jet> = (0..dim)
            .map(|i| Jet::variable(&base, k, i))
            .collect::<Result<_, _>>()?;
        let mut at_0u = vec![zero.clone(); dim];
        at_0u.extend(vars.iter().cloned());
        let mut at_u0 = vars.clone();
        at_u0.extend(std::iter::repeat_n(zero, dim));
        let prepared = &self.phase.prepared_phi;
        let psi = prepared.compose(&at_0u)?.add(&prepared.compose(&at_u0)?)?;
        let lap = self.horizontal_laplacian(&psi)?;
        let bilap = self.horizontal_laplacian(&lap)?;
        Ok(bilap.constant_term())
    }

    /// Residual of `-(1/32)Δ²h₁(0) + (i/4)Δλ(0) + (i/2)R`.
    pub fn consistency_residual(&self) -> Result<f64, ModelError> {
        let bilap = if self.jet_order >= 4 {
            self.bilaplacian_h1()?
        } else {
            cx(0.0, 0.0)
        };
        let lap_lambda = self
            .horizontal_laplacian(&self.volume_density)?
            .constant_term();
        let r = tw_scalar_curvature(self);
        let lhs = bilap * (-1.0 / 32.0) + cx(0.0, 0.25) * lap_lambda;
        Ok((lhs + cx(0.0, 0.5 * r)).norm())
    }

    fn validate(&self) -> Result<(), ModelError> {
        let dim = self.dim();
        let k = self.jet_order;
        let base = origin(dim);
        let fail = |msg: String| Err(ModelError::InvariantViolation(msg));

        let mut pairing = Jet::zero(&base, k);
        for (w, t) in self.contact_form.iter().zip(&self.reeb) {
            pairing = pairing.add(&w.mul(t)?)?;
        }
        let minus_one = Jet::constant(&base, k, cx(-1.0, 0.0));
        if pairing
            .truncate(k - 1)
            .max_diff(&minus_one.truncate(k - 1))?
            > INVARIANT_TOL
        {
            return fail("contact form paired with Reeb field is not -1".into());
        }

        let lam = &self.volume_density;
        if (lam.constant_term() - 1.0).norm() > INVARIANT_TOL {
            return fail("volume density is not 1 at the origin".into());
        }
        for j in 0..dim {
            let mut e = vec![0u8; dim];
            e[j] = 1;
            if lam.coeff(&e).norm() > INVARIANT_TOL {
                return fail(format!("volume density has a linear term in x{}", j + 1));
            }
        }

        let heis = heisenberg_contact_form(self.n, k)?;
        for (j, (w, h)) in self.contact_form.iter().zip(&heis).enumerate() {
            if w.truncate(2).max_diff(&h.truncate(2))? > INVARIANT_TOL {
                return fail(format!(
                    "contact form component {} is not in normal form",
                    j + 1
                ));
            }
        }

        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (j, z) in self.frame.iter().enumerate() {
            for (c, comp) in z.iter().enumerate() {
                let want = if c == 2 * j {
                    cx(s, 0.0)
                } else if c == 2 * j + 1 {
                    cx(0.0, -s)
                } else {
                    cx(0.0, 0.0)
                };
                if (comp.constant_term() - want).norm() > INVARIANT_TOL {
                    return fail(format!("Z_{} is not √2∂z at the origin", j + 1));
                }
            }
        }

        self.validate_phase()?;
        if self.exact {
            self.validate_im_positive()?;
        }
        Ok(())
    }

    fn validate_phase(&self) -> Result<(), ModelError> {
        let dim = self.dim();
        let k = self.jet_order;
        let fail = |msg: String| Err(ModelError::InvariantViolation(msg));
        let xbase = origin(dim);
        let vars: Vec<Jet> = (0..dim)
            .map(|i| Jet::variable(&xbase, k, i))
            .collect::<Result<_, _>>()?;
        let diag: Vec<Jet> = vars.iter().chain(vars.iter()).cloned().collect();
        for (name, phi) in [
            ("phi", &self.phase.phi),
            ("prepared phi", &self.phase.prepared_phi),
        ] {
            if phi.compose(&diag)?.max_abs() > INVARIANT_TOL {
                return fail(format!("{name} does not vanish on the diagonal"));
            }
            for j in 0..dim {
                let want = if j == dim - 1 { -1.0 } else { 0.0 };
                let mut e = vec![0u8; 2 * dim];
                e[j] = 1;
                if (phi.coeff(&e) - want).norm() > INVARIANT_TOL {
                    return fail(format!("d_x {name}(0,0) differs from -ω₀(0)"));
                }
                let mut e = vec![0u8; 2 * dim];
                e[dim + j] = 1;
                if (phi.coeff(&e) + want).norm() > INVARIANT_TOL {
                    return fail(format!("d_y {name}(0,0) differs from ω₀(0)"));
                }
            }
            let heis = heisenberg_phase(self.n, k)?;
            if phi.truncate(3).max_diff(&heis.truncate(3))? > INVARIANT_TOL {
                return fail(format!("{name} is not in normal form through degree 3"));
            }
        }
        let yt = 2 * dim - 1;
        let second = self.phase.prepared_phi.partial(yt)?.partial(yt)?;
        if second.max_abs() > INVARIANT_TOL {
            return fail("prepared phase is not linear in y_{2n+1}".into());
        }
        Ok(())
    }

    fn validate_im_positive(&self) -> Result<(), ModelError> {
        let dim = self.dim();
        let mut rng = stream(IM_SAMPLE_SEED, "im-phi-samples");
        let mut point = vec![0.0; 2 * dim];
        for _ in 0..IM_SAMPLES {
            loop {
                for p in point.iter_mut() {
                    *p = IM_SAMPLE_RADIUS * (2.0 * rng.gen::<f64>() - 1.0);
                }
                if point.iter().map(|p| p * p).sum::<f64>() <= IM_SAMPLE_RADIUS.powi(2) {
                    break;
                }
            }
            let v = self.phase.phi.eval_real(&point)?;
            if v.im < -INVARIANT_TOL {
                return Err(ModelError::InvariantViolation(format!(
                    "Im phi = {} < 0 at a sample point",
                    v.im
                )));
            }
        }
        Ok(())
    }
}

fn real_part(j: &Jet) -> Jet {
    let conj = conj_jet(j);
    j.add(&conj).expect("same space").scale_real(0.5)
}

fn imag_part(j: &Jet) -> Jet {
    let conj = conj_jet(j);
    j.sub(&conj).expect("same space").scale(cx(0.0, -0.5))
}

/// Complex conjugate of the coefficients (real base point assumed).
pub fn conj_jet(j: &Jet) -> Jet {
    let terms: Vec<(Vec<u8>, Complex64)> = j
        .terms()
        .map(|(m, c)| (m.exponents().to_vec(), c.conj()))
        .collect();
    Jet::from_terms(
        j.base_point(),
        j.order(),
        terms.iter().map(|(e, c)| (e.as_slice(), *c)),
    )
    .expect("terms come from a valid jet")
}

fn heisenberg_contact_form(n: usize, order: usize) -> Result<Vec<Jet>, ModelError> {
    let dim = 2 * n + 1;
    let base = origin(dim);
    let mut form = Vec::with_capacity(dim);
    for j in 0..n {
        form.push(Jet::variable(&base, order, 2 * j + 1)?);
        form.push(Jet::variable(&base, order, 2 * j)?.neg());
    }
    form.push(Jet::constant(&base, order, cx(1.0, 0.0)));
    Ok(form)
}

/// `Φ(x,y) = y_t - x_t + (i/2) Σ [|z-w|² + z̄w - z w̄]` in `(x, y)`.
pub fn heisenberg_phase(n: usize, order: usize) -> Result<Jet, ModelError> {
    let dim = 2 * n + 1;
    let base = origin(2 * dim);
    let v = |i: usize| Jet::variable(&base, order, i);
    let mut phi = v(2 * dim - 1)?.sub(&v(dim - 1)?)?;
    for j in 0..n {
        let (a1, a2) = (v(2 * j)?, v(2 * j + 1)?);
        let (b1, b2) = (v(dim + 2 * j)?, v(dim + 2 * j + 1)?);
        let d1 = a1.sub(&b1)?;
        let d2 = a2.sub(&b2)?;
        let sq = d1.mul(&d1)?.add(&d2.mul(&d2)?)?;
        phi = phi.add(&sq.scale(cx(0.0, 0.5)))?;
        let cross = a1.mul(&b2)?.sub(&a2.mul(&b1)?)?;
        phi = phi.sub(&cross)?;
    }
    Ok(phi)
}

/// The exact Heisenberg chart.
pub fn heisenberg_chart(n: usize, jet_order: usize) -> Result<CRModelChart, ModelError> {
    if n < 1 {
        return Err(ModelError::InvalidDimension(n));
    }
    if jet_order < 2 {
        return Err(ModelError::JetOrderTooLow {
            order: jet_order,
            min: 2,
        });
    }
    let dim = 2 * n + 1;
    let base = origin(dim);
    let k = jet_order;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut frame = Vec::with_capacity(n);
    for j in 0..n {
        let mut z = vec![Jet::zero(&base, k); dim];
        z[2 * j] = Jet::constant(&base, k, cx(s, 0.0));
        z[2 * j + 1] = Jet::constant(&base, k, cx(0.0, -s));
        let x1 = Jet::variable(&base, k, 2 * j)?;
        let x2 = Jet::variable(&base, k, 2 * j + 1)?;
        z[dim - 1] = x1.scale(cx(0.0, -s)).sub(&x2.scale_real(s))?;
        frame.push(z);
    }
    let mut reeb = vec![Jet::zero(&base, k); dim];
    reeb[dim - 1] = Jet::constant(&base, k, cx(-1.0, 0.0));
    let phi = heisenberg_phase(n, k)?;
    let chart = CRModelChart {
        n,
        jet_order: k,
        contact_form: heisenberg_contact_form(n, k)?,
        frame,
        reeb,
        volume_density: Jet::constant(&base, k, cx(1.0, 0.0)),
        synthetic_r: 0.0,
        phase: PhasePair {
            phi: phi.clone(),
            prepared_phi: phi,
        },
        exact: true,
    };
    chart.validate()?;
    Ok(chart)
}

/// A Heisenberg chart with synthetic curvature injected through the density
/// and the phase. The curvature identity is validated at construction.
pub fn perturbed_chart(
    base: &CRModelChart,
    r_synth: f64,
    perturbation: &Perturbation,
) -> Result<CRModelChart, ModelError> {
    if !base.exact {
        return Err(ModelError::NotHeisenberg);
    }
    let n = base.n;
    let dim = base.dim();
    let k = base.jet_order;
    let q = &perturbation.lambda_quadratic;
    if q.len() != dim || q.iter().any(|row| row.len() != dim) {
        return Err(ModelError::MalformedPerturbation(format!(
            "density matrix must be {dim}x{dim}"
        )));
    }
    for i in 0..dim {
        for j in 0..dim {
            if (q[i][j] - q[j][i]).abs() > 1e-15 * (1.0 + q[i][j].abs()) {
                return Err(ModelError::MalformedPerturbation(
                    "density matrix is not symmetric".into(),
                ));
            }
        }
    }
    let has_quartic = perturbation
        .phase_quartic
        .iter()
        .any(|(_, c)| c.norm() > 0.0);
    if has_quartic && k < 4 {
        return Err(ModelError::JetOrderTooLow { order: k, min: 4 });
    }
    for (e, _) in &perturbation.phase_quartic {
        let deg: u32 = e.iter().map(|&v| v as u32).sum();
        if e.len() != 2 * n || deg != 4 {
            return Err(ModelError::MalformedPerturbation(
                "phase perturbation must be quartic in 2n variables".into(),
            ));
        }
    }

    let xbase = origin(dim);
    let mut lambda = Jet::constant(&xbase, k, cx(1.0, 0.0));
    for i in 0..dim {
        for j in 0..dim {
            if q[i][j] != 0.0 {
                let t = Jet::variable(&xbase, k, i)?.mul(&Jet::variable(&xbase, k, j)?)?;
                lambda = lambda.add(&t.scale_real(q[i][j]))?;
            }
        }
    }

    let kbase = origin(2 * n);
    let quartic = Jet::from_terms(
        &kbase,
        k,
        perturbation
            .phase_quartic
            .iter()
            .map(|(e, c)| (e.as_slice(), *c)),
    )?;
    let xybase = origin(2 * dim);
    let diffs: Vec<Jet> = (0..2 * n)
        .map(|j| Ok(Jet::variable(&xybase, k, j)?.sub(&Jet::variable(&xybase, k, dim + j)?)?))
        .collect::<Result<_, ModelError>>()?;
    let q_phase = quartic.compose(&diffs)?;

    let mut chart = base.clone();
    chart.volume_density = lambda;
    chart.phase = PhasePair {
        phi: base.phase.phi.add(&q_phase)?,
        prepared_phi: base.phase.prepared_phi.add(&q_phase)?,
    };
    chart.synthetic_r = r_synth;
    chart.exact = r_synth == 0.0 && !has_quartic && q.iter().flatten().all(|&v| v == 0.0);
    chart.validate()?;
    let residual = chart.consistency_residual()?;
    if residual > CONSISTENCY_TOL {
        return Err(ModelError::ConsistencyViolation { residual });
    }
    Ok(chart)
}

/// Christoffel symbols `Γ^l_{jk}` of the frame-parallel connection, defined by
/// `∇_{∂_j} dx_k = Σ_l Γ^l_{jk} dx_l`. Indices are zero-based.
#[derive(Clone, Debug, PartialEq)]
pub struct Christoffel {
    dim: usize,
    table: Vec<Jet>,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Γ^l_{jk}` as a jet.
    pub fn gamma(&self, l: usize, j: usize, k: usize) -> &Jet {
        &self.table[(l * self.dim + j) * self.dim + k]
    }

    /// `C^l_{jk}` with `∇_{∂_j} ∂_k = Σ_l C^l_{jk} ∂_l`, i.e. `-Γ^k_{jl}`.
    pub fn vector_coeff(&self, l: usize, j: usize, k: usize) -> Jet {
        self.gamma(k, j, l).neg()
    }
}

/// Gauss–Jordan inverse of a square matrix of jets.
pub fn jet_matrix_inverse(m: &[Vec<Jet>]) -> Result<Vec<Vec<Jet>>, ModelError> {
    let size = m.len();
    let base = m[0][0].base_point().to_vec();
    let order = m[0][0].order();
    let mut a: Vec<Vec<Jet>> = m.to_vec();
    let mut inv: Vec<Vec<Jet>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| Jet::constant(&base, order, cx(if i == j { 1.0 } else { 0.0 }, 0.0)))
                .collect()
        })
        .collect();
    for col in 0..size {
        let pivot = (col..size)
            .max_by(|&x, &y| {
                a[x][col]
                    .constant_term()
                    .norm()
                    .total_cmp(&a[y][col].constant_term().norm())
            })
            .expect("non-empty range");
        if a[pivot][col].constant_term().norm() < 1e-14 {
            return Err(ModelError::InvariantViolation(
                "frame matrix is singular at the origin".into(),
            ));
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p_inv = a[col][col].invert()?;
        for j in 0..size {
            a[col][j] = a[col][j].mul(&p_inv)?;
            inv[col][j] = inv[col][j].mul(&p_inv)?;
        }
        for row in 0..size {
            if row == col || a[row][col].is_zero() {
                continue;
            }
            let f = a[row][col].clone();
            for j in 0..size {
                a[row][j] = a[row][j].sub(&f.mul(&a[col][j])?)?;
                inv[row][j] = inv[row][j].sub(&f.mul(&inv[col][j])?)?;
            }
        }
    }
    Ok(inv)
}

/// Christoffel symbols of the connection that makes the real Levi frame
/// `X_1, ..., X_{2n+1}` parallel, as jets of the given order.
pub fn christoffel_at(chart: &CRModelChart, jet_order: usize) -> Result<Christoffel, ModelError> {
    let dim = chart.dim();
    let order = jet_order.min(chart.jet_order);
    let m: Vec<Vec<Jet>> = chart
        .real_frame()
        .into_iter()
        .map(|row| row.into_iter().map(|j| j.truncate(order)).collect())
        .collect();
    let inv = jet_matrix_inverse(&m)?;
    let base = origin(dim);
    let mut table = Vec::with_capacity(dim * dim * dim);
    for l in 0..dim {
        for j in 0..dim {
            for k in 0..dim {
                let mut g = Jet::zero(&base, order.saturating_sub(1));
                for a in 0..dim {
                    let dm = m[a][k].partial(j)?;
                    if dm.is_zero() {
                        continue;
                    }
                    g = g.add(&dm.mul(&inv[l][a].truncate(order.saturating_sub(1)))?)?;
                }
                table.push(g);
            }
        }
    }
    Ok(Christoffel { dim, table })
}

/// Tanaka–Webster scalar curvature at the origin.
///
/// Perturbed charts return their synthetic curvature. The exact chart goes
/// through connection forms, curvature two-forms, the Levi metric and the
/// Ricci contraction.
pub fn tw_scalar_curvature(chart: &CRModelChart) -> f64 {
    if !chart.exact {
        return chart.synthetic_r;
    }
    curvature_from_frame(chart).expect("exact chart data is well formed")
}

fn curvature_from_frame(chart: &CRModelChart) -> Result<f64, ModelError> {
    let n = chart.n;
    let dim = chart.dim();
    let order = chart.jet_order;
    let base = origin(dim);
    let gam = christoffel_at(chart, order)?;
    let lower = order.saturating_sub(1);

    let mut cframe: Vec<Vec<Jet>> = chart.frame.clone();
    for z in &chart.frame {
        cframe.push(z.iter().map(conj_jet).collect());
    }
    cframe.push(chart.reeb.iter().map(Jet::neg).collect());
    let coframe = jet_matrix_inverse(&cframe)?;

    // omega[j][k][i] = θ^k(∇_{∂_i} Z_j)
    let mut omega = vec![vec![Vec::with_capacity(dim); n]; n];
    for j in 0..n {
        for i in 0..dim {
            let mut nabla = Vec::with_capacity(dim);
            for l in 0..dim {
                let mut v = chart.frame[j][l].partial(i)?;
                for kk in 0..dim {
                    let c = gam.vector_coeff(l, i, kk);
                    if c.is_zero() {
                        continue;
                    }
                    v = v.add(&c.mul(&chart.frame[j][kk].truncate(lower))?)?;
                }
                nabla.push(v);
            }
            for k in 0..n {
                let mut w = Jet::zero(&base, lower);
                for l in 0..dim {
                    w = w.add(&nabla[l].mul(&coframe[l][k].truncate(lower))?)?;
                }
                omega[j][k].push(w);
            }
        }
    }

    let z0: Vec<Vec<Complex64>> = chart
        .frame
        .iter()
        .map(|z| z.iter().map(Jet::constant_term).collect())
        .collect();
    let theta = |j: usize, k: usize, a: usize, b: usize| -> Result<Complex64, ModelError> {
        let mut v =
            omega[j][k][b].partial(a)?.constant_term() - omega[j][k][a].partial(b)?.constant_term();
        for p in 0..n {
            v -= omega[j][p][a].constant_term() * omega[p][k][b].constant_term()
                - omega[j][p][b].constant_term() * omega[p][k][a].constant_term();
        }
        Ok(v)
    };

    let mut ricci = DMatrix::<Complex64>::zeros(n, n);
    for l in 0..n {
        for m in 0..n {
            let mut acc = cx(0.0, 0.0);
            for k in 0..n {
                for a in 0..dim {
                    for b in 0..dim {
                        let za = z0[l][a];
                        let zb = z0[m][b].conj();
                        if za.norm() == 0.0 || zb.norm() == 0.0 {
                            continue;
                        }
                        acc += za * zb * theta(k, k, a, b)?;
                    }
                }
            }
            ricci[(l, m)] = acc;
        }
    }

    let w0: Vec<Jet> = chart.contact_form.clone();
    let mut levi = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let mut acc = cx(0.0, 0.0);
            for a in 0..dim {
                for b in 0..dim {
                    let dw = w0[b].partial(a)?.constant_term() - w0[a].partial(b)?.constant_term();
                    acc += z0[j][a] * z0[k][b].conj() * dw;
                }
            }
            levi[(j, k)] = -acc / cx(0.0, 1.0);
        }
    }
    let levi_inv = levi
        .try_inverse()
        .ok_or_else(|| ModelError::InvariantViolation("Levi form is degenerate".into()))?;
    let mut r = cx(0.0, 0.0);
    for j in 0..n {
        for m in 0..n {
            r += levi_inv[(m, j)] * ricci[(j, m)];
        }
    }
    Ok(r.re)
}

/// `□_b f(0) = -½ Σ_{j ≤ 2n} ∂²_j f(0) - i n ∂_{2n+1} f(0)`.
pub fn kohn_laplacian_at0(chart: &CRModelChart, f: &Jet) -> Result<Complex64, ModelError> {
    check_chart_jet(chart, f, 2)?;
    let dim = chart.dim();
    let mut acc = cx(0.0, 0.0);
    for j in 0..2 * chart.n {
        let mut e = vec![0u8; dim];
        e[j] = 2;
        acc += f.derivative_at_base(&e);
    }
    let mut e = vec![0u8; dim];
    e[dim - 1] = 1;
    Ok(acc * -0.5 - cx(0.0, chart.n as f64) * f.derivative_at_base(&e))
}

/// `𝒯 f(0)`.
pub fn reeb_derivative_at0(chart: &CRModelChart, f: &Jet) -> Result<Complex64, ModelError> {
    check_chart_jet(chart, f, 1)?;
    let dim = chart.dim();
    let mut acc = cx(0.0, 0.0);
    for (j, t) in chart.reeb.iter().enumerate() {
        let mut e = vec![0u8; dim];
        e[j] = 1;
        acc += t.constant_term() * f.derivative_at_base(&e);
    }
    Ok(acc)
}

fn check_chart_jet(chart: &CRModelChart, f: &Jet, min_order: usize) -> Result<(), ModelError> {
    if f.num_vars() != chart.dim() {
        return Err(crate::error::JetError::VarCountMismatch {
            left: f.num_vars(),
            right: chart.dim(),
        }
        .into());
    }
    if f.order() < min_order {
        return Err(ModelError::JetOrderTooLow {
            order: f.order(),
            min: min_order,
        });
    }
    Ok(())
}
