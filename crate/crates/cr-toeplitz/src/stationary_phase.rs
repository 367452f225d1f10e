//! Stationary phase at a nondegenerate critical point, and a brute-force
//! quadrature oracle for the same integrals.
//!
//! The integral is `I(t) = t ∫∫ e^{itΨ₀(u,σ)} Γ(u,σ,t) du dσ` with
//! `Ψ₀(u,σ) = σΦ(0,u) + Φ(u,0)` and critical point `(u,σ) = (0,1)`. Jets use
//! the variables `(u_1, ..., u_{2n+1}, s)` with `s = σ - 1`, so the critical
//! point is the origin.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::cr_models::CRModelChart;
use crate::error::PhaseError;
use crate::jet::{origin, Jet, Monomial};

const CRITICAL_TOL: f64 = 1e-12;
const BRANCH_STEPS: usize = 2000;

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Phase data at the critical point.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseCriticalData {
    psi0: Jet,
    hessian: DMatrix<Complex64>,
    hessian_inverse: DMatrix<Complex64>,
    h: Jet,
    det_normalized: Complex64,
    sqrt_det: Complex64,
}

impl PhaseCriticalData {
    /// Analyses a phase jet whose critical point is its base point.
    pub fn from_phase(psi0: Jet) -> Result<Self, PhaseError> {
        let nv = psi0.num_vars();
        let v0 = psi0.constant_term().norm();
        if v0 > CRITICAL_TOL {
            return Err(PhaseError::NonZeroValue(v0));
        }
        let mut grad: f64 = 0.0;
        for a in 0..nv {
            let mut e = vec![0u8; nv];
            e[a] = 1;
            grad = grad.max(psi0.coeff(&e).norm());
        }
        if grad > CRITICAL_TOL {
            return Err(PhaseError::NotCritical(grad));
        }
        let hessian = DMatrix::from_fn(nv, nv, |a, b| {
            let mut e = vec![0u8; nv];
            e[a] += 1;
            e[b] += 1;
            psi0.derivative_at_base(&e)
        });
        let hessian_inverse = hessian
            .clone()
            .try_inverse()
            .ok_or(PhaseError::SingularHessian)?;
        let low = psi0.truncate(2);
        let h = psi0.sub(&low.promote(psi0.order())?)?;
        let scale = cx(0.0, 2.0 * std::f64::consts::PI);
        let det_normalized = (hessian.clone() / scale).determinant();
        let sqrt_det = continued_sqrt_det(&hessian)?;
        Ok(Self {
            psi0,
            hessian,
            hessian_inverse,
            h,
            det_normalized,
            sqrt_det,
        })
    }

    pub fn psi0(&self) -> &Jet {
        &self.psi0
    }

    pub fn hessian(&self) -> &DMatrix<Complex64> {
        &self.hessian
    }

    pub fn hessian_inverse(&self) -> &DMatrix<Complex64> {
        &self.hessian_inverse
    }

    /// Cubic-and-higher remainder of the phase.
    pub fn h(&self) -> &Jet {
        &self.h
    }

    /// `det(Ψ₀''/(2πi))`.
    pub fn det_normalized(&self) -> Complex64 {
        self.det_normalized
    }

    /// Branch of `det(Ψ₀''/(2πi))^{1/2}` continued from the imaginary reference.
    pub fn sqrt_det(&self) -> Complex64 {
        self.sqrt_det
    }

    pub fn num_vars(&self) -> usize {
        self.psi0.num_vars()
    }
}

fn continued_sqrt_det(hessian: &DMatrix<Complex64>) -> Result<Complex64, PhaseError> {
    let nv = hessian.nrows();
    let scale = cx(0.0, 2.0 * std::f64::consts::PI);
    let ident = DMatrix::<Complex64>::identity(nv, nv) * cx(0.0, 1.0);
    let det_at = |tau: f64| -> Complex64 {
        let a = &ident * cx(1.0 - tau, 0.0) + hessian * cx(tau, 0.0);
        (a / scale).determinant()
    };
    let start = det_at(0.0);
    let mut root = start.sqrt();
    let floor = 1e-12 * start.norm();
    for step in 1..=BRANCH_STEPS {
        let tau = step as f64 / BRANCH_STEPS as f64;
        let d = det_at(tau);
        if d.norm() < floor {
            return Err(PhaseError::Branch(format!(
                "determinant passes through zero near tau = {tau}"
            )));
        }
        let cand = d.sqrt();
        root = if (cand - root).norm() <= (cand + root).norm() {
            cand
        } else {
            -cand
        };
    }
    if root.re <= 0.0 {
        return Err(PhaseError::Branch(format!(
            "continued square root {root} has non-positive real part"
        )));
    }
    Ok(root)
}

/// `Ψ₀(u, s) = (1+s) Φ(0,u) + Φ(u,0)` as a jet in `(u, s)`.
pub fn psi0_from_chart(chart: &CRModelChart) -> Result<Jet, PhaseError> {
    let dim = chart.dim();
    let k = chart.jet_order();
    let base = origin(dim + 1);
    let zero = Jet::zero(&base, k);
    let u: Vec<Jet> = (0..dim)
        .map(|i| Jet::variable(&base, k, i))
        .collect::<Result<_, _>>()?;
    let mut at_0u = vec![zero.clone(); dim];
    at_0u.extend(u.iter().cloned());
    let mut at_u0 = u.clone();
    at_u0.extend(std::iter::repeat_n(zero, dim));
    let phi = &chart.phase().prepared_phi;
    let sigma = Jet::variable(&base, k, dim)?.add_constant(cx(1.0, 0.0));
    Ok(sigma
        .mul(&phi.compose(&at_0u)?)?
        .add(&phi.compose(&at_u0)?)?)
}

/// Phase data for the composition integral of a chart.
pub fn build_phase_data(chart: &CRModelChart) -> Result<PhaseCriticalData, PhaseError> {
    PhaseCriticalData::from_phase(psi0_from_chart(chart)?)
}

/// Bilinear coefficient table of `⟨Ψ₀''⁻¹ D, D⟩ = Σ_{ab} q_{ab} ∂_a ∂_b`,
/// `D = -i∂`, so `q = -Ψ₀''⁻¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct InverseHessianOperator {
    pub table: DMatrix<Complex64>,
}

impl InverseHessianOperator {
    /// Coefficient of the monomial `∂_a ∂_b` (`a ≠ b` counts both orders).
    pub fn coefficient(&self, a: usize, b: usize) -> Complex64 {
        if a == b {
            self.table[(a, a)]
        } else {
            self.table[(a, b)] + self.table[(b, a)]
        }
    }

    /// The operator symbol `Σ q_{ab} ζ_a ζ_b` as a jet of the given order.
    fn symbol_jet(&self, order: usize) -> Result<Jet, PhaseError> {
        let nv = self.table.nrows();
        let mut terms: Vec<(Vec<u8>, Complex64)> = Vec::new();
        for a in 0..nv {
            for b in 0..nv {
                let mut e = vec![0u8; nv];
                e[a] += 1;
                e[b] += 1;
                terms.push((e, self.table[(a, b)]));
            }
        }
        Ok(Jet::from_terms(
            &origin(nv),
            order,
            terms.iter().map(|(e, c)| (e.as_slice(), *c)),
        )?)
    }
}

pub fn inverse_hessian_operator(data: &PhaseCriticalData) -> InverseHessianOperator {
    InverseHessianOperator {
        table: -data.hessian_inverse.clone(),
    }
}

/// Applies the constant-coefficient operator with symbol `op` to `w` at 0.
fn apply_constant_operator(op: &Jet, w: &Jet) -> Complex64 {
    op.terms()
        .map(|(m, c)| c * w.coeff(m.exponents()) * m.factorial())
        .sum()
}

/// The individual terms `μ = 0, ..., 2j` of `L_j v`, prefactors included.
pub fn apply_l_terms(
    data: &PhaseCriticalData,
    j: usize,
    v: &Jet,
) -> Result<Vec<Complex64>, PhaseError> {
    if j == 0 {
        return Ok(vec![v.constant_term()]);
    }
    if v.order() < 2 * j {
        return Err(PhaseError::InsufficientOrder {
            have: v.order(),
            need: 2 * j,
        });
    }
    if data.h.order() < 2 * j + 2 {
        return Err(PhaseError::InsufficientOrder {
            have: data.h.order(),
            need: 2 * j + 2,
        });
    }
    let op = inverse_hessian_operator(data);
    let prefactor = cx(0.0, -1.0).powu(j as u32);
    let mut terms = Vec::with_capacity(2 * j + 1);
    for mu in 0..=2 * j {
        let k = mu + j;
        let deg = 2 * k;
        let p1 = op.symbol_jet(deg)?;
        let mut pk = p1.clone();
        for _ in 1..k {
            pk = pk.mul(&p1)?;
        }
        let hd = data.h.with_order(deg)?;
        let mut w = v.with_order(deg)?;
        for _ in 0..mu {
            w = w.mul(&hd)?;
        }
        let denom = crate::jet::factorial(mu) * crate::jet::factorial(k) * 2f64.powi(k as i32);
        terms.push(prefactor * apply_constant_operator(&pk, &w) / denom);
    }
    Ok(terms)
}

/// `L_j v = i^{-j} Σ_{μ=0}^{2j} ⟨Ψ₀''⁻¹D,D⟩^{μ+j}(h^μ v)(crit) / (μ!(μ+j)!2^{μ+j})`.
pub fn apply_l(data: &PhaseCriticalData, j: usize, v: &Jet) -> Result<Complex64, PhaseError> {
    Ok(apply_l_terms(data, j, v)?.into_iter().sum())
}

/// Coefficients of `t^{p-n}` and `t^{p-n-1}` in `I(t)` for `Γ = γ₀ t^p + γ₁ t^{p-1}`:
/// `γ₀(crit)/√det` and `(γ₁(crit) + L₁γ₀)/√det`.
pub fn expansion_coeffs(
    data: &PhaseCriticalData,
    gamma0: &Jet,
    gamma1: &Jet,
    num_coeffs: usize,
) -> Result<Vec<Complex64>, PhaseError> {
    if num_coeffs > 2 {
        return Err(PhaseError::TooManyCoefficients(num_coeffs));
    }
    let mut out = Vec::with_capacity(num_coeffs);
    if num_coeffs >= 1 {
        out.push(gamma0.constant_term() / data.sqrt_det);
    }
    if num_coeffs >= 2 {
        let l1 = apply_l(data, 1, gamma0)?;
        out.push((gamma1.constant_term() + l1) / data.sqrt_det);
    }
    Ok(out)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Golub–Welsch).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], 2.0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Grid and cutoff parameters of the quadrature oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    /// Outer cutoff radius per axis; the cutoff is 1 inside `inner_fraction`
    /// of it.
    pub radii: Vec<f64>,
    pub inner_fraction: f64,
    pub nodes_per_panel: usize,
    pub radians_per_panel: f64,
    pub min_nodes: usize,
    /// Relative RMS residual allowed in the least-squares fit.
    pub fit_threshold: f64,
    /// Number of fitted powers `t^{p}, t^{p-1}, ...` (at least 2).
    pub fit_terms: usize,
}

impl OracleConfig {
    /// Radii suited to the Heisenberg composition phase for `n = 1`.
    pub fn heisenberg() -> Self {
        Self {
            radii: vec![3.0, 3.0, 8.0, 1.6],
            inner_fraction: 0.5,
            nodes_per_panel: 12,
            radians_per_panel: 2.0,
            min_nodes: 48,
            fit_threshold: 1e-6,
            fit_terms: 4,
        }
    }

    /// The same radius on every axis.
    pub fn uniform(num_vars: usize, radius: f64) -> Self {
        Self {
            radii: vec![radius; num_vars],
            ..Self::heisenberg()
        }
    }
}

/// Fitted expansion from the quadrature oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleFit {
    /// `c₀, c₁, ...` in `J(t) ≈ Σ c_k t^{p-k}`.
    pub coeffs: Vec<Complex64>,
    pub leading_power: f64,
    pub relative_residual: f64,
    pub samples: Vec<(f64, Complex64)>,
}

fn smooth_step(y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y >= 1.0 {
        return 1.0;
    }
    let f = |z: f64| if z <= 0.0 { 0.0 } else { (-1.0 / z).exp() };
    f(y) / (f(y) + f(1.0 - y))
}

fn cutoff(x: f64, inner: f64, outer: f64) -> f64 {
    smooth_step((outer - x.abs()) / (outer - inner))
}

/// Composite Gauss–Legendre grid on `[-radius, radius]` with uniform panels
/// and cutoff-weighted weights, stored panel-major.
struct Axis {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panel_offsets: Vec<f64>,
    first_mid: f64,
    width: f64,
}

fn build_axis(radius: f64, inner_fraction: f64, bandwidth: f64, cfg: &OracleConfig) -> Axis {
    let (gx, gw) = gauss_legendre(cfg.nodes_per_panel);
    let total_rad = bandwidth * 2.0 * radius;
    let by_freq = (total_rad / cfg.radians_per_panel).ceil() as usize;
    let by_min = cfg.min_nodes.div_ceil(cfg.nodes_per_panel);
    let panels = by_freq.max(by_min).max(1);
    let width = 2.0 * radius / panels as f64;
    let inner = inner_fraction * radius;
    let mut nodes = Vec::with_capacity(panels * gx.len());
    let mut weights = Vec::with_capacity(panels * gx.len());
    for p in 0..panels {
        let mid = -radius + (p as f64 + 0.5) * width;
        for (x, w) in gx.iter().zip(&gw) {
            let node = mid + 0.5 * width * x;
            nodes.push(node);
            weights.push(0.5 * width * w * cutoff(node, inner, radius));
        }
    }
    Axis {
        nodes,
        weights,
        panel_offsets: gx.iter().map(|x| 0.5 * width * x).collect(),
        first_mid: -radius + 0.5 * width,
        width,
    }
}

/// Exact panel restart interval for the geometric recurrence.
const RESTART_PANELS: usize = 32;

/// `Σ_x w(x) x^p e^{zx}` for `p = 0..weighted[0].len()`, using
/// `e^{z·mid_{p+1}} = e^{z·mid_p} e^{z·width}` across uniform panels.
fn linear_phase_sums(axis: &Axis, weighted: &[Vec<f64>], z: Complex64) -> Vec<Complex64> {
    let npp = axis.panel_offsets.len();
    let offsets: Vec<Complex64> = axis.panel_offsets.iter().map(|o| (z * o).exp()).collect();
    let step = (z * axis.width).exp();
    let mut acc = vec![cx(0.0, 0.0); weighted[0].len()];
    let mut mid = cx(0.0, 0.0);
    for (panel, chunk) in weighted.chunks(npp).enumerate() {
        if panel % RESTART_PANELS == 0 {
            mid = (z * (axis.first_mid + panel as f64 * axis.width)).exp();
        } else {
            mid *= step;
        }
        for (wx, off) in chunk.iter().zip(&offsets) {
            let e = mid * off;
            for (slot, w) in acc.iter_mut().zip(wx) {
                *slot += e * w;
            }
        }
    }
    acc
}

/// Splits a polynomial phase into per-axis pieces around the hub variable.
fn split_phase(phase: &Jet, hub: usize) -> Result<(Vec<Jet>, Jet), PhaseError> {
    let nv = phase.num_vars();
    let mut pieces: Vec<Vec<(Vec<u8>, Complex64)>> = vec![Vec::new(); nv];
    let mut hub_only: Vec<(Vec<u8>, Complex64)> = Vec::new();
    for (m, c) in phase.terms() {
        let e = m.exponents();
        let others: Vec<usize> = (0..nv).filter(|&i| i != hub && e[i] > 0).collect();
        match others.as_slice() {
            [] => hub_only.push((e.to_vec(), *c)),
            [k] => pieces[*k].push((e.to_vec(), *c)),
            _ => {
                return Err(PhaseError::Quadrature(format!(
                    "phase monomial {e:?} couples two non-hub variables"
                )))
            }
        }
    }
    let base = origin(nv);
    let to_jet = |t: &Vec<(Vec<u8>, Complex64)>| {
        Jet::from_terms(
            &base,
            phase.order(),
            t.iter().map(|(e, c)| (e.as_slice(), *c)),
        )
    };
    let jets = pieces.iter().map(to_jet).collect::<Result<Vec<_>, _>>()?;
    Ok((jets, to_jet(&hub_only)?))
}

/// Evaluates a two-variable polynomial piece `ψ(hub, x)`.
fn eval_pair(piece: &Jet, hub: usize, k: usize, h: f64, x: f64) -> Complex64 {
    piece
        .terms()
        .map(|(m, c)| {
            let e = m.exponents();
            if k == hub {
                c * h.powi(e[hub] as i32)
            } else {
                c * h.powi(e[hub] as i32) * x.powi(e[k] as i32)
            }
        })
        .sum()
}

/// Largest `|∂ Re ψ|` and `|∂² Im ψ|` along `var` over the cutoff box.
fn pair_bounds(piece: &Jet, hub: usize, k: usize, var: usize, radii: &[f64]) -> (f64, f64) {
    let samples = 41;
    let mut twice = vec![0u8; piece.num_vars()];
    twice[var] = 2;
    let (Ok(d1), Ok(d2)) = (piece.partial(var), piece.partial_multi(&twice)) else {
        return (0.0, 0.0);
    };
    let grid = |r: f64, i: usize| -r + 2.0 * r * i as f64 / (samples - 1) as f64;
    let (mut re, mut im) = (0.0f64, 0.0f64);
    for i in 0..samples {
        let h = grid(radii[hub], i);
        for j in 0..samples {
            let x = grid(radii[k], j);
            re = re.max(eval_pair(&d1, hub, k, h, x).re.abs());
            im = im.max(eval_pair(&d2, hub, k, h, x).im.abs());
        }
    }
    (re, im)
}

/// Angular bandwidth of `e^{itΨ}` along axis `k` over the cutoff box: the
/// oscillation rate plus a few Gaussian widths from the damping.
fn axis_bandwidth(
    pieces: &[Jet],
    hub_only: &Jet,
    hub: usize,
    k: usize,
    radii: &[f64],
    t: f64,
) -> f64 {
    let (re, im) = if k != hub {
        pair_bounds(&pieces[k], hub, k, k, radii)
    } else {
        let mut acc = pair_bounds(hub_only, hub, hub, hub, radii);
        for (j, piece) in pieces.iter().enumerate() {
            if j != hub {
                let (r, i) = pair_bounds(piece, hub, j, hub, radii);
                acc.0 += r;
                acc.1 += i;
            }
        }
        acc
    };
    t * re + 4.0 * (t * im).sqrt()
}

/// Brute-force evaluation of `J(t) = ∫ e^{itΨ} a` for a polynomial phase and
/// amplitude, followed by a least-squares fit of
/// `J(t) t^{-p} = c₀ + c₁/t + ...` with `p = -num_vars/2`.
///
/// The phase must be separable around its last variable (every monomial
/// involves that variable and at most one other), which lets the tensor grid
/// sum factorize. A smooth product cutoff localizes to the critical point.
pub fn numeric_expansion_oracle(
    phase: &Jet,
    amplitude: &Jet,
    t_samples: &[f64],
    cfg: &OracleConfig,
) -> Result<OracleFit, PhaseError> {
    let nv = phase.num_vars();
    if amplitude.num_vars() != nv || cfg.radii.len() != nv {
        return Err(PhaseError::Quadrature("dimension mismatch".into()));
    }
    if cfg.fit_terms < 2 || t_samples.len() < cfg.fit_terms.max(4) {
        return Err(PhaseError::Quadrature(
            "need at least four t samples and two fit terms".into(),
        ));
    }
    let hub = nv - 1;
    let (pieces, hub_only) = split_phase(phase, hub)?;
    let amp_terms: Vec<(Vec<u8>, Complex64)> = amplitude
        .terms()
        .map(|(m, c)| (m.exponents().to_vec(), *c))
        .collect();
    let max_pow: Vec<usize> = (0..nv)
        .map(|k| {
            amp_terms
                .iter()
                .map(|(e, _)| e[k] as usize)
                .max()
                .unwrap_or(0)
        })
        .collect();
    let t_max = t_samples.iter().copied().fold(0.0, f64::max);

    let axes: Vec<Axis> = (0..nv)
        .map(|k| {
            let f = axis_bandwidth(&pieces, &hub_only, hub, k, &cfg.radii, t_max);
            build_axis(cfg.radii[k], cfg.inner_fraction, f, cfg)
        })
        .collect();

    let leading_power = -(nv as f64) / 2.0;
    let mut samples = Vec::with_capacity(t_samples.len());
    for &t in t_samples {
        let it = cx(0.0, t);
        let hub_axis = &axes[hub];
        // tables[k][h][p] = Σ_x w χ x^p e^{itψ_k(h,x)}
        let mut tables: Vec<Vec<Vec<Complex64>>> = vec![Vec::new(); nv];
        for k in 0..nv {
            if k == hub {
                continue;
            }
            let axis = &axes[k];
            let mut per_hub = Vec::with_capacity(hub_axis.nodes.len());
            let hub_independent = pieces[k].terms().all(|(m, _)| m.exponents()[hub] == 0);
            let mut cache: Option<Vec<Complex64>> = None;
            let linear = pieces[k].terms().all(|(m, _)| m.exponents()[k] <= 1);
            let weighted: Vec<Vec<f64>> = axis
                .nodes
                .iter()
                .zip(&axis.weights)
                .map(|(&x, &w)| {
                    let mut row = Vec::with_capacity(max_pow[k] + 1);
                    let mut xp = w;
                    for _ in 0..=max_pow[k] {
                        row.push(xp);
                        xp *= x;
                    }
                    row
                })
                .collect();
            let hub_linear = pieces[k].terms().all(|(m, _)| m.exponents()[hub] <= 1);
            if !linear && !hub_independent && hub_linear {
                // ψ_k(h, x) = b(x) + a(x) h: recur over the hub panels instead.
                let rows = hub_axis.nodes.len();
                let mut flat = vec![cx(0.0, 0.0); rows * (max_pow[k] + 1)];
                let npp = hub_axis.panel_offsets.len();
                for (&x, wx) in axis.nodes.iter().zip(&weighted) {
                    if wx[0] == 0.0 {
                        continue;
                    }
                    let b = eval_pair(&pieces[k], hub, k, 0.0, x);
                    let a = eval_pair(&pieces[k], hub, k, 1.0, x) - b;
                    let z = it * a;
                    let lead = (it * b).exp();
                    let offsets: Vec<Complex64> = hub_axis
                        .panel_offsets
                        .iter()
                        .map(|o| (z * o).exp())
                        .collect();
                    let step = (z * hub_axis.width).exp();
                    let mut mid = cx(0.0, 0.0);
                    for panel in 0..rows / npp {
                        if panel % RESTART_PANELS == 0 {
                            mid = lead
                                * (z * (hub_axis.first_mid + panel as f64 * hub_axis.width)).exp();
                        } else {
                            mid *= step;
                        }
                        for (q, off) in offsets.iter().enumerate() {
                            let e = mid * off;
                            let row = (panel * npp + q) * (max_pow[k] + 1);
                            for (slot, w) in flat[row..row + max_pow[k] + 1].iter_mut().zip(wx) {
                                *slot += e * w;
                            }
                        }
                    }
                }
                tables[k] = flat.chunks(max_pow[k] + 1).map(|c| c.to_vec()).collect();
                continue;
            }
            for &h in &hub_axis.nodes {
                if hub_independent {
                    if let Some(c) = &cache {
                        per_hub.push(c.clone());
                        continue;
                    }
                }
                let acc = if linear {
                    let slope = eval_pair(&pieces[k], hub, k, h, 1.0);
                    linear_phase_sums(axis, &weighted, it * slope)
                } else {
                    let mut acc = vec![cx(0.0, 0.0); max_pow[k] + 1];
                    for (&x, wx) in axis.nodes.iter().zip(&weighted) {
                        let e = (it * eval_pair(&pieces[k], hub, k, h, x)).exp();
                        for (slot, w) in acc.iter_mut().zip(wx) {
                            *slot += e * w;
                        }
                    }
                    acc
                };
                if hub_independent {
                    cache = Some(acc.clone());
                }
                per_hub.push(acc);
            }
            tables[k] = per_hub;
        }
        let mut total = cx(0.0, 0.0);
        for (hi, (&h, &w)) in hub_axis.nodes.iter().zip(&hub_axis.weights).enumerate() {
            let hub_phase =
                eval_pair(&hub_only, hub, hub, h, h) + eval_pair(&pieces[hub], hub, hub, h, h);
            let base = (it * hub_phase).exp() * w;
            let mut amp = cx(0.0, 0.0);
            for (e, c) in &amp_terms {
                let mut term = *c * h.powi(e[hub] as i32);
                for k in 0..nv {
                    if k != hub {
                        term *= tables[k][hi][e[k] as usize];
                    }
                }
                amp += term;
            }
            total += base * amp;
        }
        samples.push((t, total));
    }

    let rows = samples.len();
    let cols = cfg.fit_terms;
    let design = DMatrix::from_fn(rows, cols, |r, c| samples[r].0.powi(-(c as i32)));
    let scaled: Vec<Complex64> = samples
        .iter()
        .map(|(t, j)| j * t.powf(-leading_power))
        .collect();
    let svd = design.clone().svd(true, true);
    let re = DVector::from_iterator(rows, scaled.iter().map(|z| z.re));
    let im = DVector::from_iterator(rows, scaled.iter().map(|z| z.im));
    let sol_re = svd
        .solve(&re, 1e-14)
        .map_err(|e| PhaseError::Quadrature(e.to_string()))?;
    let sol_im = svd
        .solve(&im, 1e-14)
        .map_err(|e| PhaseError::Quadrature(e.to_string()))?;
    let coeffs: Vec<Complex64> = (0..cols).map(|c| cx(sol_re[c], sol_im[c])).collect();
    let fitted_re = &design * &sol_re;
    let fitted_im = &design * &sol_im;
    let mut ss = 0.0;
    let mut norm = 0.0;
    for r in 0..rows {
        ss += (fitted_re[r] - re[r]).powi(2) + (fitted_im[r] - im[r]).powi(2);
        norm += re[r].powi(2) + im[r].powi(2);
    }
    let relative_residual = if norm > 0.0 { (ss / norm).sqrt() } else { 0.0 };
    if relative_residual > cfg.fit_threshold {
        return Err(PhaseError::FitResidual {
            residual: relative_residual,
            threshold: cfg.fit_threshold,
        });
    }
    Ok(OracleFit {
        coeffs,
        leading_power,
        relative_residual,
        samples,
    })
}

/// Jet of a single monomial with unit coefficient.
pub fn monomial_jet(exps: &[u8], order: usize) -> Result<Jet, PhaseError> {
    let m = Monomial::new(exps);
    Ok(Jet::from_terms(
        &origin(exps.len()),
        order.max(m.degree()),
        [(exps, cx(1.0, 0.0))],
    )?)
}
