//! Kernel amplitudes of Szegő and Toeplitz operators, the two routes to
//! their first two diagonal coefficients, and the phase-rescaling and
//! singularity representations of oscillatory kernels.
//!
//! An amplitude `b(x, y, t) ~ Σ_j b_j(x, y) t^{p - j}` is stored as jets in the
//! `2N` variables `(x_1, ..., x_N, y_1, ..., y_N)` at `(0, 0)`, `N = 2n + 1`.
//! Route A builds the Szegő amplitude, applies `E` and composes by stationary
//! phase; route B evaluates the closed formulas.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use statrs::consts::EULER_MASCHERONI;
use statrs::function::gamma::gamma;

use crate::cr_models::{
    kohn_laplacian_at0, reeb_derivative_at0, tw_scalar_curvature, CRModelChart,
};
use crate::error::KernelError;
use crate::jet::{factorial, multi_indices_of_degree, origin, Jet};
use crate::rng::stream;
use crate::stationary_phase::{build_phase_data, expansion_coeffs};
use crate::symbol::{p_operator_canonical, subprincipal_symbol, ClassicalSymbol};

const INDEPENDENCE_TOL: f64 = 1e-12;
const DIAGONAL_TOL: f64 = 1e-12;
const INTEGER_TOL: f64 = 1e-12;

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `b(x, y, t) ~ Σ_j b_j(x, y) t^{top_power - j}`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelAmplitude {
    top_power: f64,
    coeffs: Vec<Jet>,
    y_last_independent: bool,
}

impl KernelAmplitude {
    /// Validates shapes and, when flagged, independence of the last `y`.
    pub fn new(
        top_power: f64,
        coeffs: Vec<Jet>,
        y_last_independent: bool,
    ) -> Result<Self, KernelError> {
        let Some(first) = coeffs.first() else {
            return Err(KernelError::EmptyAmplitude);
        };
        let nv = first.num_vars();
        if nv % 2 != 0 || nv == 0 {
            return Err(KernelError::Incompatible(format!(
                "amplitude jets need 2N variables, found {nv}"
            )));
        }
        let base = origin(nv);
        for c in &coeffs {
            c.check_compatible(&Jet::zero(&base, c.order()))?;
        }
        let amp = Self {
            top_power,
            coeffs,
            y_last_independent,
        };
        if y_last_independent && amp.y_last_dependence() > INDEPENDENCE_TOL {
            return Err(KernelError::NotYIndependent);
        }
        Ok(amp)
    }

    pub fn top_power(&self) -> f64 {
        self.top_power
    }

    pub fn coeffs(&self) -> &[Jet] {
        &self.coeffs
    }

    pub fn is_y_last_independent(&self) -> bool {
        self.y_last_independent
    }

    /// The base dimension `N`.
    pub fn dim(&self) -> usize {
        self.coeffs[0].num_vars() / 2
    }

    /// `b_j`, or the zero jet when absent.
    pub fn coeff(&self, j: usize) -> Jet {
        self.coeffs
            .get(j)
            .cloned()
            .unwrap_or_else(|| Jet::zero(&origin(2 * self.dim()), self.coeffs[0].order()))
    }

    /// `b_j(0, 0)`.
    pub fn value_at_origin(&self, j: usize) -> Complex64 {
        self.coeffs
            .get(j)
            .map(Jet::constant_term)
            .unwrap_or_default()
    }

    /// Largest coefficient on a monomial containing `y_N`.
    pub fn y_last_dependence(&self) -> f64 {
        let last = 2 * self.dim() - 1;
        self.coeffs
            .iter()
            .flat_map(|c| c.terms())
            .filter(|(m, _)| m.exponents()[last] > 0)
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max)
    }

    /// Largest coefficient of the diagonal jet `x ↦ (∂_{y_N} b₀)(x, x)`; zero
    /// when the leading coefficient satisfies `𝒯_y b₀ = 0` on the diagonal.
    pub fn lead_normalization_defect(&self) -> Result<f64, KernelError> {
        let n = self.dim();
        let d = self.coeffs[0].partial(2 * n - 1)?;
        Ok(restrict_diagonal(&d)?.max_abs())
    }
}

/// Jets `(x, x)` in `N` variables, for restricting to the diagonal.
fn restrict_diagonal(j: &Jet) -> Result<Jet, KernelError> {
    let n = j.num_vars() / 2;
    let base = origin(n);
    let vars: Vec<Jet> = (0..n)
        .map(|i| Jet::variable(&base, j.order(), i))
        .collect::<Result<_, _>>()?;
    let mut inner = vars.clone();
    inner.extend(vars);
    Ok(j.compose(&inner)?)
}

/// `b(x, 0)` or `b(0, y)` as a jet in `N` variables.
fn restrict_slot(j: &Jet, keep_x: bool) -> Result<Jet, KernelError> {
    let n = j.num_vars() / 2;
    let base = origin(n);
    let zero = Jet::zero(&base, j.order());
    let vars: Vec<Jet> = (0..n)
        .map(|i| Jet::variable(&base, j.order(), i))
        .collect::<Result<_, _>>()?;
    let inner: Vec<Jet> = if keep_x {
        vars.into_iter()
            .chain(std::iter::repeat_n(zero, n))
            .collect()
    } else {
        std::iter::repeat_n(zero, n).chain(vars).collect()
    };
    Ok(j.compose(&inner)?)
}

/// Product truncated to the smaller of the two orders.
fn mul_min(a: &Jet, b: &Jet) -> Result<Jet, KernelError> {
    let k = a.order().min(b.order());
    Ok(a.truncate(k).mul(&b.truncate(k))?)
}

/// Sum truncated to the smaller of the two orders.
fn add_min(a: &Jet, b: &Jet) -> Result<Jet, KernelError> {
    let k = a.order().min(b.order());
    Ok(a.truncate(k).add(&b.truncate(k))?)
}

fn pi_pow(n: usize) -> f64 {
    PI.powi(n as i32 + 1)
}

/// The Szegő amplitude `A₀ = 1/(2π^{n+1})`, `A₁ = R/(4π^{n+1})`, top power `n`.
pub fn szego_amplitude(chart: &CRModelChart) -> Result<KernelAmplitude, KernelError> {
    let n = chart.n();
    let base = origin(2 * chart.dim());
    let k = chart.jet_order();
    let a0 = Jet::constant(&base, k, cx(1.0 / (2.0 * pi_pow(n)), 0.0));
    let a1 = Jet::constant(
        &base,
        k,
        cx(tw_scalar_curvature(chart) / (4.0 * pi_pow(n)), 0.0),
    );
    KernelAmplitude::new(n as f64, vec![a0, a1], true)
}

/// The amplitude `C` of `Q_E = E Π` in the phase `Φ`:
/// `C₀ = ẽ₀(x, Φ'_x) A₀` and
/// `C₁ = ẽ₀(x, Φ'_x) A₁ + A₀ [ẽ₁(x, Φ'_x) - i Σ_{|α|=2} ∂_ξ^α ẽ₀(x, Φ'_x) ∂_x^α Φ / α!]`.
pub fn qe_amplitude(
    e: &ClassicalSymbol,
    a: &KernelAmplitude,
    chart: &CRModelChart,
) -> Result<KernelAmplitude, KernelError> {
    let n_dim = chart.dim();
    if e.dim() != n_dim || a.dim() != n_dim {
        return Err(KernelError::Incompatible(
            "symbol, amplitude and chart dimensions differ".into(),
        ));
    }
    if !a.is_y_last_independent() {
        return Err(KernelError::NotYIndependent);
    }
    let phi = &chart.phase().phi;
    if phi.order() < 3 {
        return Err(KernelError::InsufficientOrder {
            have: phi.order(),
            need: 3,
        });
    }
    let base = origin(2 * n_dim);
    let inner_order = phi.order() - 1;
    let mut inner: Vec<Jet> = (0..n_dim)
        .map(|i| Jet::variable(&base, inner_order, i))
        .collect::<Result<_, _>>()?;
    for j in 0..n_dim {
        inner.push(phi.partial(j)?);
    }
    let e0 = e.component(0);
    let e0c = e0.compose(&inner)?;
    let e1c = e.component(1).compose(&inner)?;
    let mut hess = Jet::zero(&base, inner_order);
    for j in 0..n_dim {
        for k in 0..n_dim {
            let d2e = e0.partial(n_dim + j)?.partial(n_dim + k)?;
            if d2e.is_zero() {
                continue;
            }
            let d2phi = phi.partial(j)?.partial(k)?;
            hess = add_min(
                &hess,
                &mul_min(&d2e.compose(&inner)?, &d2phi)?.scale_real(0.5),
            )?;
        }
    }
    let a0 = a.coeff(0);
    let a1 = a.coeff(1);
    let c0 = mul_min(&e0c, &a0)?;
    let corr = add_min(&e1c, &hess.scale(cx(0.0, -1.0)))?;
    let c1 = add_min(&mul_min(&e0c, &a1)?, &mul_min(&a0, &corr)?)?;
    let c = KernelAmplitude::new(a.top_power() + e.order_m(), vec![c0, c1], false)?;
    if c.y_last_dependence() > INDEPENDENCE_TOL {
        return Err(KernelError::NotYIndependent);
    }
    Ok(KernelAmplitude {
        y_last_independent: true,
        ..c
    })
}

/// First two coefficients at `(0, 0)` of a composed amplitude.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositionCoefficients {
    pub c0: Complex64,
    pub c1: Complex64,
    /// Top power `l + m - n` of the composed amplitude.
    pub top_power: f64,
    /// `γ₀(u, σ) = 𝒜₀(0, u) ℬ₀(u, 0) λ(u) σ^l` as a jet in `(u, σ - 1)`.
    pub gamma0: Option<Jet>,
}

/// Coefficients of `∫ e^{i(sΦ(x,u) + tΦ(u,y))} 𝒜(x,u,s) ℬ(u,y,t) λ(u)` at
/// `x = y = 0`, by stationary phase in `(u, σ = s/t)`.
pub fn compose_amplitudes_sp(
    a: &KernelAmplitude,
    b: &KernelAmplitude,
    chart: &CRModelChart,
) -> Result<CompositionCoefficients, KernelError> {
    compose_sp_with_density(a, b, chart, chart.volume_density())
}

fn check_pair(
    a: &KernelAmplitude,
    b: &KernelAmplitude,
    chart: &CRModelChart,
) -> Result<(), KernelError> {
    if a.dim() != chart.dim() || b.dim() != chart.dim() {
        return Err(KernelError::Incompatible(
            "amplitude and chart dimensions differ".into(),
        ));
    }
    if !a.is_y_last_independent() || !b.is_y_last_independent() {
        return Err(KernelError::NotYIndependent);
    }
    Ok(())
}

fn compose_sp_with_density(
    a: &KernelAmplitude,
    b: &KernelAmplitude,
    chart: &CRModelChart,
    density: &Jet,
) -> Result<CompositionCoefficients, KernelError> {
    check_pair(a, b, chart)?;
    let n = chart.n();
    let top_power = a.top_power() + b.top_power() - n as f64;
    let n_dim = chart.dim();
    if density.num_vars() != n_dim {
        return Err(KernelError::Incompatible(
            "density lives in the base variables".into(),
        ));
    }
    let data = build_phase_data(chart)?;
    let k = chart.jet_order();
    let base = origin(n_dim + 1);
    let zero = Jet::zero(&base, k);
    let u: Vec<Jet> = (0..n_dim)
        .map(|i| Jet::variable(&base, k, i))
        .collect::<Result<_, _>>()?;
    let mut at_0u = vec![zero.clone(); n_dim];
    at_0u.extend(u.iter().cloned());
    let mut at_u0 = u.clone();
    at_u0.extend(std::iter::repeat_n(zero, n_dim));
    let a0 = a.coeff(0).compose(&at_0u)?;
    let b0 = b.coeff(0).compose(&at_u0)?;
    let lambda = density
        .truncate(k)
        .embed(&base, &(0..n_dim).collect::<Vec<_>>())?;
    let sigma_l = Jet::variable(&base, k, n_dim)?
        .add_constant(cx(1.0, 0.0))
        .pow_real(a.top_power())?;
    let gamma0 = mul_min(&mul_min(&a0, &b0)?, &mul_min(&lambda, &sigma_l)?)?;
    let g1 = (a.value_at_origin(1) * b.value_at_origin(0)
        + a.value_at_origin(0) * b.value_at_origin(1))
        * density.constant_term();
    let gamma1 = Jet::constant(&base, gamma0.order(), g1);
    let c = expansion_coeffs(&data, &gamma0, &gamma1, 2)?;
    Ok(CompositionCoefficients {
        c0: c[0],
        c1: c[1],
        top_power,
        gamma0: Some(gamma0),
    })
}

/// The closed composition formula:
/// `𝒞₀ = 2π^{n+1} 𝒜₀ℬ₀` and
/// `𝒞₁/π^{n+1} = -𝒜₀ℬ₀R + 2(𝒜₀ℬ₁ + 𝒜₁ℬ₀) - (𝒜₀ □_{b,x}ℬ₀ + ℬ₀ □_{b,y}𝒜₀)
///   + 2i(n - l) 𝒜₀ 𝒯_x ℬ₀ + Σ_{j ≤ 2n} ∂_{y_j}𝒜₀ ∂_{x_j}ℬ₀`, all at `(0, 0)`,
/// where `l` is the top power of `𝒜`.
pub fn compose_amplitudes_closed(
    a: &KernelAmplitude,
    b: &KernelAmplitude,
    chart: &CRModelChart,
) -> Result<CompositionCoefficients, KernelError> {
    check_pair(a, b, chart)?;
    let n = chart.n();
    let l = a.top_power();
    let a0y = restrict_slot(&a.coeff(0), false)?;
    let b0x = restrict_slot(&b.coeff(0), true)?;
    let (a0, a1) = (a.value_at_origin(0), a.value_at_origin(1));
    let (b0, b1) = (b.value_at_origin(0), b.value_at_origin(1));
    let r = tw_scalar_curvature(chart);
    let mut cross = cx(0.0, 0.0);
    for j in 0..2 * n {
        let mut e = vec![0u8; chart.dim()];
        e[j] = 1;
        cross += a0y.derivative_at_base(&e) * b0x.derivative_at_base(&e);
    }
    let c1_over = -a0 * b0 * r + 2.0 * (a0 * b1 + a1 * b0)
        - (a0 * kohn_laplacian_at0(chart, &b0x)? + b0 * kohn_laplacian_at0(chart, &a0y)?)
        + cx(0.0, 2.0 * (n as f64 - l)) * a0 * reeb_derivative_at0(chart, &b0x)?
        + cross;
    Ok(CompositionCoefficients {
        c0: 2.0 * pi_pow(n) * a0 * b0,
        c1: pi_pow(n) * c1_over,
        top_power: a.top_power() + b.top_power() - n as f64,
        gamma0: None,
    })
}

/// Diagonal coefficients `b₀(0,0)`, `b₁(0,0)` of a Toeplitz kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToeplitzCoefficients {
    pub b0: Complex64,
    pub b1: Complex64,
}

/// `ℰ₀(x) = e₀(x, -ω₀(x))` as a jet in the base variables.
pub fn principal_on_contact_section(
    e: &ClassicalSymbol,
    chart: &CRModelChart,
) -> Result<Jet, KernelError> {
    let n_dim = chart.dim();
    let base = origin(n_dim);
    let k = chart.jet_order();
    let mut inner: Vec<Jet> = (0..n_dim)
        .map(|i| Jet::variable(&base, k, i))
        .collect::<Result<_, _>>()?;
    inner.extend(chart.contact_form().iter().map(Jet::neg));
    Ok(e.component(0).compose(&inner)?)
}

/// Route B: `b₀ = ℰ₀/(2π^{n+1})` and
/// `b₁ = [Rℰ₀ - □_bℰ₀ + P(e₀) + 2e_sub - im𝒯ℰ₀]/(4π^{n+1})` at `0`, with the
/// subprincipal symbol taken relative to the 1-density `density`.
pub fn toeplitz_b1_closed_form(
    e: &ClassicalSymbol,
    chart: &CRModelChart,
    density: &Jet,
) -> Result<ToeplitzCoefficients, KernelError> {
    if !e.is_homogeneous() {
        return Err(KernelError::NotHomogeneous);
    }
    if e.dim() != chart.dim() {
        return Err(KernelError::Incompatible(
            "symbol and chart dimensions differ".into(),
        ));
    }
    let n = chart.n();
    let cal_e0 = principal_on_contact_section(e, chart)?;
    let e_val = cal_e0.constant_term();
    let r = tw_scalar_curvature(chart);
    let kohn = kohn_laplacian_at0(chart, &cal_e0)?;
    let p = p_operator_canonical(&e.component(0))?;
    let (e_sub, _) = subprincipal_symbol(e, density, 1.0)?;
    let reeb = reeb_derivative_at0(chart, &cal_e0)?;
    let bracket = r * e_val - kohn + p + 2.0 * e_sub - cx(0.0, e.order_m()) * reeb;
    Ok(ToeplitzCoefficients {
        b0: e_val / (2.0 * pi_pow(n)),
        b1: bracket / (4.0 * pi_pow(n)),
    })
}

/// Route A: Szegő amplitude, then `Q_E`, then stationary-phase composition
/// `Π ∘ Q_E` with volume density `density`.
pub fn toeplitz_b1_pipeline(
    e: &ClassicalSymbol,
    chart: &CRModelChart,
    density: &Jet,
) -> Result<ToeplitzCoefficients, KernelError> {
    let a = szego_amplitude(chart)?;
    let c = qe_amplitude(e, &a, chart)?;
    let comp = compose_sp_with_density(&a, &c, chart, density)?;
    Ok(ToeplitzCoefficients {
        b0: comp.c0,
        b1: comp.c1,
    })
}

/// Reproducible amplitude with random jet coefficients scaled by `1/deg!`.
pub fn random_kernel_amplitude(
    dim: usize,
    top_power: f64,
    num_coeffs: usize,
    jet_order: usize,
    seed: u64,
    y_last_independent: bool,
) -> Result<KernelAmplitude, KernelError> {
    let nv = 2 * dim;
    let mut rng = stream(seed, "kernel-amplitude");
    let mut coeffs = Vec::with_capacity(num_coeffs);
    for _ in 0..num_coeffs.max(1) {
        let mut terms: Vec<(Vec<u8>, Complex64)> = Vec::new();
        for deg in 0..=jet_order {
            let scale = 1.0 / factorial(deg);
            for e in multi_indices_of_degree(nv, deg) {
                let c = cx(2.0 * rng.gen::<f64>() - 1.0, 2.0 * rng.gen::<f64>() - 1.0) * scale;
                if y_last_independent && e[nv - 1] > 0 {
                    continue;
                }
                terms.push((e.to_vec(), c));
            }
        }
        coeffs.push(Jet::from_terms(
            &origin(nv),
            jet_order,
            terms.iter().map(|(e, c)| (e.as_slice(), *c)),
        )?);
    }
    KernelAmplitude::new(top_power, coeffs, y_last_independent)
}

/// Reproducible `f(x, y) = 1 + Σ_k (x_k - y_k) g_k(x, y)` with `g_N(0, 0) = 0`,
/// so `f = 1` on the diagonal and `𝒯_y f(0, 0) = 0`.
pub fn random_admissible_rescaling(
    dim: usize,
    jet_order: usize,
    scale: f64,
    seed: u64,
) -> Result<Jet, KernelError> {
    let nv = 2 * dim;
    let base = origin(nv);
    let mut rng = stream(seed, "phase-rescaling");
    let mut f = Jet::constant(&base, jet_order, cx(1.0, 0.0));
    for k in 0..dim {
        let mut terms: Vec<(Vec<u8>, Complex64)> = Vec::new();
        for deg in 0..jet_order {
            let s = scale / factorial(deg);
            for e in multi_indices_of_degree(nv, deg) {
                let c = cx(2.0 * rng.gen::<f64>() - 1.0, 2.0 * rng.gen::<f64>() - 1.0) * s;
                if deg == 0 && k == dim - 1 {
                    continue;
                }
                terms.push((e.to_vec(), c));
            }
        }
        let g = Jet::from_terms(
            &base,
            jet_order,
            terms.iter().map(|(e, c)| (e.as_slice(), *c)),
        )?;
        let diff =
            Jet::variable(&base, jet_order, k)?.sub(&Jet::variable(&base, jet_order, dim + k)?)?;
        f = f.add(&diff.mul(&g)?)?;
    }
    Ok(f)
}

/// Rewrites an amplitude for the phase `Φ f^{-exponent_sign}`:
/// `b_j ↦ b_j f^{exponent_sign (p - j + 1)}`, `p` the top power.
///
/// With `exponent_sign = -1` the new phase is `Φ / f` and the coefficients
/// become `b_j / f^{p - j + 1}`. `f` must be identically 1 on the diagonal.
pub fn phase_rescale(
    amplitude: &KernelAmplitude,
    f: &Jet,
    exponent_sign: f64,
) -> Result<KernelAmplitude, KernelError> {
    if f.num_vars() != 2 * amplitude.dim() {
        return Err(KernelError::Incompatible(
            "rescale function dimension".into(),
        ));
    }
    let defect = restrict_diagonal(f)?.add_constant(cx(-1.0, 0.0)).max_abs();
    if defect > DIAGONAL_TOL {
        return Err(KernelError::NotDiagonalUnit(defect));
    }
    let p = amplitude.top_power();
    let coeffs = amplitude
        .coeffs()
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let order = b.order().min(f.order());
            let w = f
                .truncate(order)
                .pow_real(exponent_sign * (p - j as f64 + 1.0))?;
            Ok(b.truncate(order).mul(&w)?)
        })
        .collect::<Result<Vec<_>, KernelError>>()?;
    let out = KernelAmplitude::new(p, coeffs, false)?;
    let independent = out.y_last_dependence() <= INDEPENDENCE_TOL;
    Ok(KernelAmplitude {
        y_last_independent: independent,
        ..out
    })
}

/// The phase `Φ f^{-exponent_sign}` matching [`phase_rescale`].
pub fn rescaled_phase(phase: &Jet, f: &Jet, exponent_sign: f64) -> Result<Jet, KernelError> {
    let order = phase.order().min(f.order());
    Ok(phase
        .truncate(order)
        .mul(&f.truncate(order).pow_real(-exponent_sign)?)?)
}

/// Which branch of the singularity representation applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SingularityBranch {
    /// `p = n + m` not an integer: `F / (-iφ)^{p+1}`.
    NonInteger,
    /// Integer `p ≥ 0`: `F / (-iφ)^{p+1} + G log(-iφ)`.
    IntegerNonNegative,
    /// Integer `p < 0`: `G log(-iφ)`.
    IntegerNegative,
}

/// `F` and `G` of the singularity representation with their first two Taylor
/// coefficients along the Reeb direction `y = (0, ..., 0, y_N)` at `(0, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularityRepresentation {
    pub branch: SingularityBranch,
    pub top_power: f64,
    pub f: Option<Jet>,
    pub g: Option<Jet>,
    pub f_along: Option<[Complex64; 2]>,
    pub g_along: Option<[Complex64; 2]>,
}

fn along_reeb(j: &Jet) -> [Complex64; 2] {
    let nv = j.num_vars();
    let mut e = vec![0u8; nv];
    e[nv - 1] = 1;
    [j.constant_term(), j.derivative_at_base(&e)]
}

fn integer_value(p: f64) -> Option<i64> {
    let r = p.round();
    ((p - r).abs() < INTEGER_TOL).then_some(r as i64)
}

/// Series `Σ_j w_j b_j (-iφ)^{j + shift}` over the coefficients selected by `terms`.
fn weighted_series(
    amplitude: &KernelAmplitude,
    phase: &Jet,
    terms: &[(usize, f64, usize)],
) -> Result<Jet, KernelError> {
    let order = phase.order().min(amplitude.coeffs()[0].order());
    let base = origin(phase.num_vars());
    let minus_i_phi = phase.truncate(order).scale(cx(0.0, -1.0));
    let mut acc = Jet::zero(&base, order);
    for &(j, w, power) in terms {
        if w == 0.0 {
            continue;
        }
        let mut term = amplitude.coeff(j).truncate(order).promote(order)?;
        for _ in 0..power {
            term = term.mul(&minus_i_phi)?;
        }
        acc = acc.add(&term.scale_real(w))?;
    }
    Ok(acc)
}

/// The singularity representation of `∫₀^∞ e^{itφ} b dt` near the diagonal.
///
/// Non-integer `p`: `F ~ Σ Γ(p+1-j) b_j (-iφ)^j`. Integer `p ≥ 0`:
/// `F = Σ_{j ≤ p} (p-j)! b_j (-iφ)^j` and `G ~ Σ (-1)^{j+1}/j! b_{p+1+j} (-iφ)^j`.
/// Integer `p < 0`: `G ~ Σ (-1)^{p-j}/(j-p-1)! b_j (-iφ)^{j-p-1}`.
pub fn singularity_representation(
    amplitude: &KernelAmplitude,
    phase: &Jet,
) -> Result<SingularityRepresentation, KernelError> {
    if phase.num_vars() != 2 * amplitude.dim() {
        return Err(KernelError::Incompatible("phase dimension".into()));
    }
    let p = amplitude.top_power();
    let count = amplitude.coeffs().len();
    let (branch, f_terms, g_terms) = match integer_value(p) {
        None => {
            let f: Vec<_> = (0..count)
                .map(|j| (j, gamma(p + 1.0 - j as f64), j))
                .collect();
            (SingularityBranch::NonInteger, Some(f), None)
        }
        Some(pi) if pi >= 0 => {
            let pu = pi as usize;
            let f: Vec<_> = (0..=pu.min(count.saturating_sub(1)))
                .map(|j| (j, factorial(pu - j), j))
                .collect();
            let g: Vec<_> = (0..count.saturating_sub(pu + 1))
                .map(|j| {
                    let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
                    (pu + 1 + j, sign / factorial(j), j)
                })
                .collect();
            (SingularityBranch::IntegerNonNegative, Some(f), Some(g))
        }
        Some(pi) => {
            let g: Vec<_> = (0..count)
                .map(|j| {
                    let k = j as i64 - pi - 1;
                    let sign = if (pi - j as i64).rem_euclid(2) == 0 {
                        1.0
                    } else {
                        -1.0
                    };
                    (j, sign / factorial(k as usize), k as usize)
                })
                .collect();
            (SingularityBranch::IntegerNegative, None, Some(g))
        }
    };
    let f = f_terms
        .map(|t| weighted_series(amplitude, phase, &t))
        .transpose()?;
    let g = g_terms
        .map(|t| weighted_series(amplitude, phase, &t))
        .transpose()?;
    Ok(SingularityRepresentation {
        branch,
        top_power: p,
        f_along: f.as_ref().map(along_reeb),
        g_along: g.as_ref().map(along_reeb),
        f,
        g,
    })
}

/// Recovers `b₁(0, 0)` from the Reeb-direction Taylor data of a singularity
/// representation, assuming `𝒯_y b₀(0, 0) = 0`.
///
/// Available when `p` is non-integer, an integer `≥ 1`, `0` or `-1`; deeper
/// negative integers place `b₁` beyond the first two coefficients.
pub fn diagonal_b1_from_representation(
    rep: &SingularityRepresentation,
    phase: &Jet,
) -> Result<Complex64, KernelError> {
    let dphi = along_reeb(phase)[1];
    if dphi.norm() == 0.0 {
        return Err(KernelError::Incompatible(
            "phase is flat along the Reeb direction".into(),
        ));
    }
    let p = rep.top_power;
    let minus_i = cx(0.0, -1.0);
    match integer_value(p) {
        Some(0) => Ok(-rep.g_along.ok_or_else(missing)?[0]),
        Some(-1) => Ok(rep.g_along.ok_or_else(missing)?[1] / (minus_i * dphi)),
        Some(pi) if pi < -1 => Err(KernelError::Incompatible(format!(
            "b1 is not among the first two coefficients for top power {pi}"
        ))),
        _ => {
            let df = rep.f_along.ok_or_else(missing)?[1];
            Ok(df / (minus_i * gamma(p) * dphi))
        }
    }
}

fn missing() -> KernelError {
    KernelError::Incompatible("representation lacks the required series".into())
}

/// The finite-part integral `∫₀^∞ e^{-xt} t^m dt` for `x ≠ 0`, `Re x ≥ 0`:
/// `Γ(m+1) x^{-m-1}` off the negative integers, and
/// `(-1)^m/(-m-1)! x^{-m-1} (log x + γ - Σ_{j=1}^{-m-1} 1/j)` on them.
pub fn finite_part_laplace(x: Complex64, m: f64) -> Result<Complex64, KernelError> {
    if x.norm() == 0.0 || x.re < 0.0 {
        return Err(KernelError::Incompatible(
            "finite part needs x != 0 and Re x >= 0".into(),
        ));
    }
    match integer_value(m) {
        Some(mi) if mi < 0 => {
            let k = (-mi - 1) as usize;
            let sign = if mi.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let harmonic: f64 = (1..=k).map(|j| 1.0 / j as f64).sum();
            Ok(x.powi(k as i32) * (x.ln() + EULER_MASCHERONI - harmonic) * (sign / factorial(k)))
        }
        _ => Ok(x.powf(-m - 1.0) * gamma(m + 1.0)),
    }
}
