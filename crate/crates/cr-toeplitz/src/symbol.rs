//! Classical symbols as jets at a single covector, subprincipal symbols,
//! coordinate changes, homogeneity and the operator `P` on the cotangent
//! bundle.
//!
//! A symbol in `d` base variables is a list of jets in the `2d` variables
//! `(x_1, ..., x_d, ξ_1, ..., ξ_d)` based at `(0, ξ⁰)`. For CR charts the base
//! covector is `-ω₀(0) = (0, ..., 0, -1)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::cr_models::{christoffel_at, jet_matrix_inverse, CRModelChart};
use crate::error::{ModelError, SymbolError};
use crate::jet::{origin, Jet};
use crate::rng::stream;

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The covector `-ω₀(0) = (0, ..., 0, -1)` in `dim` variables.
pub fn cr_base_covector(dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[dim - 1] = -1.0;
    v
}

/// The point `(0, ξ⁰)` of the cotangent bundle as a complex vector.
pub fn symbol_base(covector: &[f64]) -> Vec<Complex64> {
    let mut b = origin(covector.len());
    b.extend(covector.iter().map(|&c| cx(c, 0.0)));
    b
}

/// A classical symbol `e ~ Σ e_j` with `e_j` of homogeneity degree `m - j`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalSymbol {
    order_m: f64,
    components: Vec<Jet>,
    base_covector: Vec<f64>,
    homogeneous: bool,
}

impl ClassicalSymbol {
    /// Builds a symbol; every component must live at `(0, base_covector)`.
    pub fn new(
        order_m: f64,
        components: Vec<Jet>,
        base_covector: Vec<f64>,
        homogeneous: bool,
    ) -> Result<Self, SymbolError> {
        if components.is_empty() {
            return Err(SymbolError::Empty);
        }
        let base = symbol_base(&base_covector);
        for c in &components {
            if c.num_vars() != base.len() {
                return Err(SymbolError::Dimension(format!(
                    "component has {} variables, expected {}",
                    c.num_vars(),
                    base.len()
                )));
            }
            Jet::zero(&base, 0).check_compatible(&Jet::zero(c.base_point(), 0))?;
        }
        Ok(Self {
            order_m,
            components,
            base_covector,
            homogeneous,
        })
    }

    pub fn order_m(&self) -> f64 {
        self.order_m
    }

    /// Number of base variables `d`.
    pub fn dim(&self) -> usize {
        self.base_covector.len()
    }

    pub fn base_covector(&self) -> &[f64] {
        &self.base_covector
    }

    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous
    }

    pub fn components(&self) -> &[Jet] {
        &self.components
    }

    /// Truncation order of the principal component.
    pub fn jet_order(&self) -> usize {
        self.components[0].order()
    }

    /// Component `e_j`, or the zero jet when absent.
    pub fn component(&self, j: usize) -> Jet {
        self.components
            .get(j)
            .cloned()
            .unwrap_or_else(|| Jet::zero(&symbol_base(&self.base_covector), self.jet_order()))
    }

    /// Largest Euler residual over all components.
    pub fn max_euler_residual(&self) -> Result<f64, SymbolError> {
        let mut worst: f64 = 0.0;
        for (j, c) in self.components.iter().enumerate() {
            worst = worst.max(euler_check(c, self.order_m - j as f64)?);
        }
        Ok(worst)
    }
}

/// The identity operator's symbol.
pub fn identity_symbol(dim: usize, jet_order: usize) -> ClassicalSymbol {
    let cov = cr_base_covector(dim);
    let e0 = Jet::constant(&symbol_base(&cov), jet_order, cx(1.0, 0.0));
    ClassicalSymbol::new(0.0, vec![e0], cov, true).expect("well-formed identity symbol")
}

/// Order-zero symbol `e₀(x, ξ) = f(x)`, flagged homogeneous of degree 0.
pub fn make_multiplication_symbol(f: &Jet) -> Result<ClassicalSymbol, SymbolError> {
    let dim = f.num_vars();
    let cov = cr_base_covector(dim);
    let e0 = f.embed(&symbol_base(&cov), &(0..dim).collect::<Vec<_>>())?;
    ClassicalSymbol::new(0.0, vec![e0], cov, true)
}

fn random_jet(rng: &mut impl Rng, base: &[Complex64], order: usize) -> Result<Jet, SymbolError> {
    let nv = base.len();
    let mut terms: Vec<(Vec<u8>, Complex64)> = Vec::new();
    for deg in 0..=order {
        let scale = 1.0 / crate::jet::factorial(deg);
        for e in crate::jet::multi_indices_of_degree(nv, deg) {
            let c = cx(2.0 * rng.gen::<f64>() - 1.0, 2.0 * rng.gen::<f64>() - 1.0) * scale;
            terms.push((e.to_vec(), c));
        }
    }
    Ok(Jet::from_terms(
        base,
        order,
        terms.iter().map(|(e, c)| (e.as_slice(), *c)),
    )?)
}

/// Reproducible pseudo-random symbol in `dim` base variables at `-ω₀(0)`.
///
/// Homogeneous symbols are extended from random data on the slice
/// `ξ_dim = -1`.
pub fn random_classical_symbol(
    dim: usize,
    order_m: f64,
    num_components: usize,
    seed: u64,
    homogeneous: bool,
    jet_order: usize,
) -> Result<ClassicalSymbol, SymbolError> {
    let cov = cr_base_covector(dim);
    let mut rng = stream(seed, "classical-symbol");
    let mut components = Vec::with_capacity(num_components.max(1));
    for j in 0..num_components.max(1) {
        let c = if homogeneous {
            let slice = random_jet(&mut rng, &origin(2 * dim - 1), jet_order)?;
            homogeneity_extend(&slice, order_m - j as f64)?
        } else {
            random_jet(&mut rng, &symbol_base(&cov), jet_order)?
        };
        components.push(c);
    }
    ClassicalSymbol::new(order_m, components, cov, homogeneous)
}

/// Reproducible complex jet at the origin of `R^dim`, coefficients of degree
/// `k` uniform in the square of half-width `1/k!`.
pub fn random_function_jet(dim: usize, jet_order: usize, seed: u64) -> Result<Jet, SymbolError> {
    random_jet(&mut stream(seed, "function-jet"), &origin(dim), jet_order)
}

/// Reproducible real diffeomorphism `κ(x) = x + A x + Q(x) + C(x)` fixing the
/// origin, with every coefficient of `A`, `Q`, `C` uniform in
/// `[-scale, scale]`.
pub fn random_cubic_diffeo(
    dim: usize,
    jet_order: usize,
    scale: f64,
    seed: u64,
) -> Result<Vec<Jet>, SymbolError> {
    let mut rng = stream(seed, "cubic-diffeo");
    let base = origin(dim);
    (0..dim)
        .map(|j| {
            let mut terms: Vec<(Vec<u8>, Complex64)> = Vec::new();
            for deg in 1..=3 {
                for e in crate::jet::multi_indices_of_degree(dim, deg) {
                    let mut c = scale * (2.0 * rng.gen::<f64>() - 1.0);
                    if deg == 1 && e[j] == 1 {
                        c += 1.0;
                    }
                    terms.push((e.to_vec(), cx(c, 0.0)));
                }
            }
            Ok(Jet::from_terms(
                &base,
                jet_order,
                terms.iter().map(|(e, c)| (e.as_slice(), *c)),
            )?)
        })
        .collect()
}

/// Extends data on the slice `ξ_d = -1` to a jet homogeneous of `degree` in
/// `ξ`, using `e(x, ξ) = |ξ_d|^degree s(x, ξ' / |ξ_d|)`.
///
/// The slice is a jet in `(x_1..x_d, ξ_1..ξ_{d-1})` at the origin.
pub fn homogeneity_extend(slice: &Jet, degree: f64) -> Result<Jet, SymbolError> {
    let nv = slice.num_vars();
    if nv.is_multiple_of(2) {
        return Err(SymbolError::Dimension(
            "slice must have 2d-1 variables".into(),
        ));
    }
    let dim = nv.div_ceil(2);
    let order = slice.order();
    let base = symbol_base(&cr_base_covector(dim));
    let tau = Jet::displacement(&base, order, 2 * dim - 1)?;
    let abs_xi_t = tau.neg().add_constant(cx(1.0, 0.0));
    let inv = abs_xi_t.invert()?;
    let mut inner = Vec::with_capacity(nv);
    for j in 0..dim {
        inner.push(Jet::variable(&base, order, j)?);
    }
    for k in 0..dim - 1 {
        inner.push(Jet::variable(&base, order, dim + k)?.mul(&inv)?);
    }
    let composed = slice.compose(&inner)?;
    Ok(composed.mul(&abs_xi_t.pow_real(degree)?)?)
}

/// Max coefficient magnitude of `Σ ξ_j ∂_{ξ_j} e - degree · e` at order
/// `order - 1`. The `ξ` base is read from the jet's base point.
pub fn euler_check(component: &Jet, degree: f64) -> Result<f64, SymbolError> {
    let nv = component.num_vars();
    if !nv.is_multiple_of(2) {
        return Err(SymbolError::Dimension(
            "symbol jets have 2d variables".into(),
        ));
    }
    let dim = nv / 2;
    let order = component.order().saturating_sub(1);
    let base = component.base_point().to_vec();
    let mut acc = component.truncate(order).scale_real(-degree);
    for j in 0..dim {
        let xi = Jet::variable(&base, order, dim + j)?;
        acc = acc.add(&xi.mul(&component.partial(dim + j)?)?)?;
    }
    Ok(acc.max_abs())
}

/// Both sides of `m · (-∂_{x_d} e₀) = ∂_{x_d} ∂_{ξ_d} e₀` at the base point.
pub fn principal_symbol_identity(sym: &ClassicalSymbol) -> (Complex64, Complex64) {
    let d = sym.dim();
    let e0 = &sym.components[0];
    let mut ex = vec![0u8; 2 * d];
    ex[d - 1] = 1;
    let mut exx = ex.clone();
    exx[2 * d - 1] = 1;
    let lhs = -e0.derivative_at_base(&ex) * sym.order_m;
    (lhs, e0.derivative_at_base(&exx))
}

/// Subprincipal symbol with respect to the `s`-density `λ`:
/// `e₁ + (i/2) Σ ∂_{x_j} ∂_{ξ_j} e₀ + (i/(2s)) Σ ∂_{ξ_j} e₀ ∂_{x_j} log λ`.
///
/// Returns the value at the base covector and the jet (order `K - 2`).
pub fn subprincipal_symbol(
    sym: &ClassicalSymbol,
    density: &Jet,
    s: f64,
) -> Result<(Complex64, Jet), SymbolError> {
    if s == 0.0 {
        return Err(SymbolError::ZeroDensityExponent);
    }
    let l0 = density.constant_term();
    if l0.re <= 0.0 {
        return Err(SymbolError::NonPositiveDensity(l0.re));
    }
    let d = sym.dim();
    if density.num_vars() != d {
        return Err(SymbolError::Dimension(
            "density lives in the base variables".into(),
        ));
    }
    let e0 = &sym.components[0];
    let order = e0.order().saturating_sub(2);
    let base = symbol_base(&sym.base_covector);
    let log_l = density.log()?.embed(&base, &(0..d).collect::<Vec<_>>())?;
    let mut acc = sym.component(1).truncate(order);
    for j in 0..d {
        let mixed = e0.partial(j)?.partial(d + j)?.truncate(order);
        acc = acc.add(&mixed.scale(cx(0.0, 0.5)))?;
        let dxi = e0.partial(d + j)?.truncate(order);
        let dlog = log_l.partial(j)?.truncate(order);
        acc = acc.add(&dxi.mul(&dlog)?.scale(cx(0.0, 0.5 / s)))?;
    }
    let acc = acc.with_order(order)?;
    Ok((acc.constant_term(), acc))
}

fn jacobian_at_zero(kappa: &[Jet]) -> DMatrix<f64> {
    let d = kappa.len();
    DMatrix::from_fn(d, d, |j, k| {
        let mut e = vec![0u8; d];
        e[k] = 1;
        kappa[j].coeff(&e).re
    })
}

/// Inverse map `x(y)` of a local diffeomorphism `κ` with `κ(0) = 0`, by
/// fixed-point iteration on jets.
pub fn inverse_map(kappa: &[Jet]) -> Result<Vec<Jet>, SymbolError> {
    let d = kappa.len();
    let order = kappa[0].order();
    let base = origin(d);
    let a = jacobian_at_zero(kappa);
    let a_inv = a
        .clone()
        .try_inverse()
        .ok_or(SymbolError::SingularJacobian)?;
    let vars: Vec<Jet> = (0..d)
        .map(|i| Jet::variable(&base, order, i))
        .collect::<Result<_, _>>()?;
    let lin_apply = |m: &DMatrix<f64>, v: &[Jet]| -> Result<Vec<Jet>, SymbolError> {
        let mut out = Vec::with_capacity(d);
        for j in 0..d {
            let mut acc = Jet::zero(&base, order);
            for k in 0..d {
                if m[(j, k)] != 0.0 {
                    acc = acc.add(&v[k].scale_real(m[(j, k)]))?;
                }
            }
            out.push(acc);
        }
        Ok(out)
    };
    let linear_part = lin_apply(&a, &vars)?;
    let nonlinear: Vec<Jet> = kappa
        .iter()
        .zip(&linear_part)
        .map(|(k, l)| k.sub(l))
        .collect::<Result<_, _>>()?;
    let mut x = lin_apply(&a_inv, &vars)?;
    for _ in 0..=order {
        let nx: Vec<Jet> = nonlinear
            .iter()
            .map(|nl| nl.compose(&x))
            .collect::<Result<_, _>>()?;
        let rhs: Vec<Jet> = vars
            .iter()
            .zip(&nx)
            .map(|(v, n)| v.sub(n))
            .collect::<Result<_, _>>()?;
        x = lin_apply(&a_inv, &rhs)?;
    }
    Ok(x)
}

/// Determinant of a square jet matrix by elimination.
pub fn jet_determinant(m: &[Vec<Jet>]) -> Result<Jet, SymbolError> {
    let size = m.len();
    let mut a: Vec<Vec<Jet>> = m.to_vec();
    let base = a[0][0].base_point().to_vec();
    let order = a[0][0].order();
    let mut det = Jet::constant(&base, order, cx(1.0, 0.0));
    for col in 0..size {
        let pivot = (col..size)
            .max_by(|&x, &y| {
                a[x][col]
                    .constant_term()
                    .norm()
                    .total_cmp(&a[y][col].constant_term().norm())
            })
            .expect("non-empty range");
        if a[pivot][col].constant_term().norm() == 0.0 {
            return Err(SymbolError::SingularJacobian);
        }
        if pivot != col {
            a.swap(col, pivot);
            det = det.neg();
        }
        det = det.mul(&a[col][col])?;
        let p_inv = a[col][col].invert()?;
        for row in col + 1..size {
            if a[row][col].is_zero() {
                continue;
            }
            let f = a[row][col].mul(&p_inv)?;
            for j in col..size {
                a[row][j] = a[row][j].sub(&f.mul(&a[col][j])?)?;
            }
        }
    }
    Ok(det)
}

/// Jacobian matrix `∂_k κ_j` composed with `x(y)`.
fn jacobian_along(kappa: &[Jet], x_of_y: &[Jet]) -> Result<Vec<Vec<Jet>>, SymbolError> {
    let d = kappa.len();
    let order = x_of_y[0].order().saturating_sub(1);
    let x_trunc: Vec<Jet> = x_of_y.iter().map(|x| x.truncate(order)).collect();
    let mut jac = Vec::with_capacity(d);
    for kj in kappa {
        let mut row = Vec::with_capacity(d);
        for k in 0..d {
            row.push(kj.partial(k)?.compose(&x_trunc)?);
        }
        jac.push(row);
    }
    Ok(jac)
}

/// Transported density `λ_κ(y) = λ(x(y)) / |det κ'(x(y))|^s`.
pub fn transport_density(density: &Jet, kappa: &[Jet], s: f64) -> Result<Jet, SymbolError> {
    let x = inverse_map(kappa)?;
    let jac = jacobian_along(kappa, &x)?;
    let mut det = jet_determinant(&jac)?;
    if det.constant_term().re < 0.0 {
        det = det.neg();
    }
    let order = det.order();
    let lam = density
        .truncate(order)
        .compose(&x.iter().map(|j| j.truncate(order)).collect::<Vec<_>>())?;
    Ok(lam.mul(&det.pow_real(-s)?)?)
}

/// Symbol of the operator transported by `κ`, through the subleading level:
/// `e_{κ,0}(y, η) = e₀(x, κ'(x)ᵀη)` and
/// `e_{κ,1} = e₁(x, κ'ᵀη) - i Σ_{|α|=2} (1/α!) ∂_ξ^α e₀(x, κ'ᵀη) ⟨∂^α κ(x), η⟩`,
/// with `x = κ⁻¹(y)`. The result is based at `η⁰ = κ'(0)^{-T} ξ⁰`.
pub fn transform_symbol_under_diffeo(
    sym: &ClassicalSymbol,
    kappa: &[Jet],
) -> Result<ClassicalSymbol, SymbolError> {
    let d = sym.dim();
    if kappa.len() != d || kappa.iter().any(|k| k.num_vars() != d) {
        return Err(SymbolError::Dimension(
            "κ must map d variables to d variables".into(),
        ));
    }
    if kappa.iter().any(|k| k.constant_term().norm() > 1e-14) {
        return Err(SymbolError::Dimension("κ must fix the origin".into()));
    }
    let order = sym.jet_order().min(kappa[0].order());
    let kappa: Vec<Jet> = kappa.iter().map(|k| k.truncate(order)).collect();
    let a = jacobian_at_zero(&kappa);
    let a_inv_t = a
        .clone()
        .try_inverse()
        .ok_or(SymbolError::SingularJacobian)?
        .transpose();
    let xi0 = nalgebra::DVector::from_column_slice(&sym.base_covector);
    let eta0: Vec<f64> = (a_inv_t * xi0).iter().copied().collect();
    let new_base = symbol_base(&eta0);
    let ymap: Vec<usize> = (0..d).collect();

    let x = inverse_map(&kappa)?;
    let inner_order = order.saturating_sub(1);
    let jac = jacobian_along(&kappa, &x)?;
    let eta: Vec<Jet> = (0..d)
        .map(|j| Jet::variable(&new_base, inner_order, d + j))
        .collect::<Result<_, _>>()?;
    let mut inner: Vec<Jet> = x
        .iter()
        .map(|xj| xj.truncate(inner_order).embed(&new_base, &ymap))
        .collect::<Result<_, _>>()?;
    for k in 0..d {
        let mut acc = Jet::zero(&new_base, inner_order);
        for j in 0..d {
            acc = acc.add(&jac[j][k].embed(&new_base, &ymap)?.mul(&eta[j])?)?;
        }
        inner.push(acc);
    }

    let e0 = &sym.components[0];
    let ek0 = e0.compose(&inner)?;

    let sub_order = order.saturating_sub(2);
    let inner_sub: Vec<Jet> = inner.iter().map(|j| j.truncate(sub_order)).collect();
    let x_sub: Vec<Jet> = x.iter().map(|j| j.truncate(sub_order)).collect();
    let mut ek1 = sym.component(1).truncate(sub_order).compose(&inner_sub)?;
    for p in 0..d {
        for q in p..d {
            let mut alpha = vec![0u8; d];
            alpha[p] += 1;
            alpha[q] += 1;
            let alpha_fact = if p == q { 2.0 } else { 1.0 };
            let mut xi_alpha = vec![0u8; 2 * d];
            xi_alpha[d..].copy_from_slice(&alpha);
            let de0 = e0.partial_multi(&xi_alpha)?.compose(&inner_sub)?;
            let mut pairing = Jet::zero(&new_base, sub_order);
            for (j, kj) in kappa.iter().enumerate() {
                let d2 = kj
                    .partial_multi(&alpha)?
                    .compose(&x_sub)?
                    .embed(&new_base, &ymap)?;
                pairing = pairing.add(&d2.mul(&eta[j].truncate(sub_order))?)?;
            }
            let term = de0.mul(&pairing)?.scale(cx(0.0, -1.0 / alpha_fact));
            ek1 = ek1.add(&term)?;
        }
    }
    ClassicalSymbol::new(sym.order_m, vec![ek0, ek1], eta0, sym.homogeneous)
}

/// Components `(X_1..X_d, Ξ_1..Ξ_d)` of the Hamiltonian field
/// `X_F = Σ ∂_{x_j}F ∂_{ξ_j} - ∂_{ξ_j}F ∂_{x_j}`.
pub fn hamiltonian_vector_field(f: &Jet) -> Result<Vec<Jet>, SymbolError> {
    let nv = f.num_vars();
    if !nv.is_multiple_of(2) {
        return Err(SymbolError::Dimension(
            "phase-space jets have 2d variables".into(),
        ));
    }
    let d = nv / 2;
    let mut out = Vec::with_capacity(nv);
    for j in 0..d {
        out.push(f.partial(d + j)?.neg());
    }
    for j in 0..d {
        out.push(f.partial(j)?);
    }
    Ok(out)
}

/// `Div(Σ X_j ∂_{x_j} + Ξ_j ∂_{ξ_j}) = Σ ∂_{x_j} X_j + ∂_{ξ_j} Ξ_j`.
pub fn divergence(vf: &[Jet]) -> Result<Jet, SymbolError> {
    let first = vf.first().ok_or(SymbolError::Empty)?;
    if vf.len() != first.num_vars() {
        return Err(SymbolError::Dimension(
            "vector field needs one component per variable".into(),
        ));
    }
    let mut acc = Jet::zero(first.base_point(), first.order().saturating_sub(1));
    for (i, c) in vf.iter().enumerate() {
        acc = acc.add(&c.partial(i)?)?;
    }
    Ok(acc)
}

/// Max coefficient of `ω(X_F, ·) + dF` with `ω = Σ dx_j ∧ dξ_j`.
pub fn hamiltonian_pairing_defect(f: &Jet) -> Result<f64, SymbolError> {
    let x = hamiltonian_vector_field(f)?;
    let d = f.num_vars() / 2;
    let mut worst: f64 = 0.0;
    for j in 0..d {
        // V = ∂_{x_j}: ω(X_F, V) = -Ξ_j.
        worst = worst.max(f.partial(j)?.sub(&x[d + j])?.max_abs());
        // V = ∂_{ξ_j}: ω(X_F, V) = X_j.
        worst = worst.max(f.partial(d + j)?.add(&x[j])?.max_abs());
    }
    Ok(worst)
}

/// `P(F)(0, -ω₀(0)) = Σ_j [∂_{x_{2j}} ∂_{ξ_{2j-1}} F - ∂_{x_{2j-1}} ∂_{ξ_{2j}} F]`.
pub fn p_operator_canonical(f: &Jet) -> Result<Complex64, SymbolError> {
    let nv = f.num_vars();
    if !nv.is_multiple_of(2) || (nv / 2) % 2 != 1 {
        return Err(SymbolError::Dimension(
            "F must be a jet in (x, ξ) with dim 2n+1".into(),
        ));
    }
    let d = nv / 2;
    let n = (d - 1) / 2;
    let mut acc = cx(0.0, 0.0);
    for j in 0..n {
        let mut e = vec![0u8; nv];
        e[2 * j + 1] = 1;
        e[d + 2 * j] = 1;
        acc += f.derivative_at_base(&e);
        let mut e = vec![0u8; nv];
        e[2 * j] = 1;
        e[d + 2 * j + 1] = 1;
        acc -= f.derivative_at_base(&e);
    }
    Ok(acc)
}

/// `P(F) = -½ Div(J_{T*X} X_F)` at `(0, -ω₀(0))`, computed through the
/// horizontal/vertical splitting of `T T*X` induced by the connection.
pub fn p_operator_geometric(chart: &CRModelChart, f: &Jet) -> Result<Complex64, SymbolError> {
    if !chart.is_heisenberg() {
        return Err(ModelError::NotHeisenberg.into());
    }
    let d = chart.dim();
    let n = chart.n();
    if f.num_vars() != 2 * d {
        return Err(SymbolError::Dimension("F must be a jet in (x, ξ)".into()));
    }
    if f.order() < 2 {
        return Err(SymbolError::Dimension(
            "F needs jet order at least 2".into(),
        ));
    }
    let w = (f.order() - 1).min(chart.jet_order() - 1);
    let base = symbol_base(&cr_base_covector(d));
    let xmap: Vec<usize> = (0..d).collect();
    let lift = |j: &Jet| -> Result<Jet, SymbolError> { Ok(j.truncate(w).embed(&base, &xmap)?) };

    let frame = chart.real_frame();
    let frame_inv = jet_matrix_inverse(&frame)?;
    let gam = christoffel_at(chart, chart.jet_order())?;
    let m: Vec<Vec<Jet>> = frame
        .iter()
        .map(|r| r.iter().map(&lift).collect())
        .collect::<Result<_, _>>()?;
    let ninv: Vec<Vec<Jet>> = frame_inv
        .iter()
        .map(|r| r.iter().map(&lift).collect())
        .collect::<Result<_, _>>()?;
    let xi: Vec<Jet> = (0..d)
        .map(|k| Jet::variable(&base, w, d + k))
        .collect::<Result<_, _>>()?;

    // H[j][l] = -Σ_k ξ_k Γ^l_{jk}
    let mut h = vec![vec![Jet::zero(&base, w); d]; d];
    for j in 0..d {
        for l in 0..d {
            let mut acc = Jet::zero(&base, w);
            for k in 0..d {
                let g = gam.gamma(l, j, k);
                if g.is_zero() {
                    continue;
                }
                acc = acc.sub(&lift(g)?.mul(&xi[k])?)?;
            }
            h[j][l] = acc;
        }
    }

    let xf = hamiltonian_vector_field(&f.truncate(w + 1))?;
    let (a, b) = xf.split_at(d);

    let mut c = vec![Jet::zero(&base, w); d];
    for (ai, ci) in c.iter_mut().enumerate() {
        for (j, aj) in a.iter().enumerate() {
            *ci = ci.add(&ninv[j][ai].mul(aj)?)?;
        }
    }
    let mut wv = Vec::with_capacity(d);
    for l in 0..d {
        let mut acc = b[l].clone();
        for j in 0..d {
            acc = acc.sub(&h[j][l].mul(&a[j])?)?;
        }
        wv.push(acc);
    }
    let mut dv = vec![Jet::zero(&base, w); d];
    for (bi, di) in dv.iter_mut().enumerate() {
        for (l, wl) in wv.iter().enumerate() {
            *di = di.add(&m[bi][l].mul(wl)?)?;
        }
    }

    let mut cj = vec![Jet::zero(&base, w); d];
    let mut dj = vec![Jet::zero(&base, w); d];
    for j in 0..n {
        cj[2 * j + 1] = c[2 * j].clone();
        cj[2 * j] = c[2 * j + 1].neg();
        dj[2 * j + 1] = dv[2 * j].clone();
        dj[2 * j] = dv[2 * j + 1].neg();
    }

    let mut field = Vec::with_capacity(2 * d);
    let mut wx = Vec::with_capacity(d);
    for j in 0..d {
        let mut acc = Jet::zero(&base, w);
        for (ai, cja) in cj.iter().enumerate() {
            acc = acc.add(&cja.mul(&m[ai][j])?)?;
        }
        wx.push(acc);
    }
    field.extend(wx.iter().cloned());
    for l in 0..d {
        let mut acc = Jet::zero(&base, w);
        for j in 0..d {
            acc = acc.add(&wx[j].mul(&h[j][l])?)?;
        }
        for (bi, djb) in dj.iter().enumerate() {
            acc = acc.add(&djb.mul(&ninv[l][bi])?)?;
        }
        field.push(acc);
    }
    Ok(divergence(&field)?.constant_term() * -0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cr_models::heisenberg_chart;

    fn xi_jet(d: usize, order: usize, terms: &[(&[u8], f64)]) -> Jet {
        let base = symbol_base(&cr_base_covector(d));
        Jet::from_terms(&base, order, terms.iter().map(|(e, c)| (*e, cx(*c, 0.0)))).unwrap()
    }

    #[test]
    fn extension_of_constant_degree_one() {
        let slice = Jet::constant(&origin(5), 4, cx(1.0, 0.0));
        let e = homogeneity_extend(&slice, 1.0).unwrap();
        // -ξ₃ = 1 - τ at the base covector.
        let want = xi_jet(
            3,
            4,
            &[(&[0, 0, 0, 0, 0, 0], 1.0), (&[0, 0, 0, 0, 0, 1], -1.0)],
        );
        assert!(e.max_diff(&want).unwrap() < 1e-15);
        let e0 = homogeneity_extend(&slice, 0.0).unwrap();
        assert!(e0.max_diff(&xi_jet(3, 4, &[(&[0; 6], 1.0)])).unwrap() < 1e-15);
    }

    #[test]
    fn euler_witnesses() {
        let minus_xi3 = xi_jet(
            3,
            4,
            &[(&[0, 0, 0, 0, 0, 0], 1.0), (&[0, 0, 0, 0, 0, 1], -1.0)],
        );
        assert!(euler_check(&minus_xi3, 1.0).unwrap() < 1e-15);
        let x1 = xi_jet(3, 4, &[(&[1, 0, 0, 0, 0, 0], 1.0)]);
        assert!((euler_check(&x1, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let slice =
            Jet::from_terms(&origin(5), 5, [(&[0u8, 0, 0, 2, 0][..], cx(1.0, 0.0))]).unwrap();
        let e = homogeneity_extend(&slice, 1.0).unwrap();
        assert!(euler_check(&e, 1.0).unwrap() < 1e-12);
    }

    #[test]
    fn multiplication_symbol_is_xi_independent() {
        let f = Jet::variable(&origin(3), 4, 0).unwrap();
        let s = make_multiplication_symbol(&f).unwrap();
        let e0 = s.component(0);
        assert_eq!(e0.coeff(&[1, 0, 0, 0, 0, 0]), cx(1.0, 0.0));
        assert_eq!(e0.num_terms(), 1);
        assert!(s.component(1).is_zero());
        assert!(euler_check(&e0, 0.0).unwrap() < 1e-15);
    }

    #[test]
    fn random_symbol_determinism() {
        let a = random_classical_symbol(3, 0.5, 2, 9, true, 4).unwrap();
        let b = random_classical_symbol(3, 0.5, 2, 9, true, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.max_euler_residual().unwrap() < 1e-12);
        let one = random_classical_symbol(3, 1.0, 1, 9, true, 4).unwrap();
        assert!(one.component(1).is_zero());
    }

    #[test]
    fn subprincipal_examples() {
        let id = identity_symbol(3, 4);
        let lam = Jet::variable(&origin(3), 4, 0).unwrap().exp().unwrap();
        assert_eq!(subprincipal_symbol(&id, &lam, 1.0).unwrap().0, cx(0.0, 0.0));

        // One base variable, base covector (-1), e₀ = ξ₁, λ = exp(x₁), s = 1.
        let base = symbol_base(&[-1.0]);
        let e0 = Jet::variable(&base, 4, 1).unwrap();
        let sym = ClassicalSymbol::new(1.0, vec![e0], vec![-1.0], true).unwrap();
        let lam1 = Jet::variable(&origin(1), 4, 0).unwrap().exp().unwrap();
        let v = subprincipal_symbol(&sym, &lam1, 1.0).unwrap().0;
        assert!((v - cx(0.0, 0.5)).norm() < 1e-15);

        let c = cx(0.3, -0.2);
        let zero = Jet::zero(&symbol_base(&cr_base_covector(3)), 4);
        let e1 = Jet::constant(&symbol_base(&cr_base_covector(3)), 4, c);
        let sym = ClassicalSymbol::new(0.0, vec![zero, e1], cr_base_covector(3), false).unwrap();
        assert_eq!(subprincipal_symbol(&sym, &lam, 2.0).unwrap().0, c);
        assert_eq!(
            subprincipal_symbol(&sym, &lam, 0.0),
            Err(SymbolError::ZeroDensityExponent)
        );
    }

    #[test]
    fn identity_diffeo_leaves_symbol_unchanged() {
        let sym = random_classical_symbol(3, 1.0, 2, 4, true, 5).unwrap();
        let kappa: Vec<Jet> = (0..3)
            .map(|i| Jet::variable(&origin(3), 5, i).unwrap())
            .collect();
        let t = transform_symbol_under_diffeo(&sym, &kappa).unwrap();
        assert_eq!(t.component(0).order(), 4);
        assert!(
            t.component(0)
                .max_diff(&sym.component(0).truncate(4))
                .unwrap()
                < 1e-13
        );
        let e1 = sym.component(1).truncate(3);
        assert!(t.component(1).max_diff(&e1).unwrap() < 1e-13);
    }

    #[test]
    fn singular_jacobian_is_error() {
        let sym = identity_symbol(3, 4);
        let z = Jet::zero_origin(3, 4);
        let kappa = vec![z.clone(), z.clone(), z];
        assert_eq!(
            transform_symbol_under_diffeo(&sym, &kappa),
            Err(SymbolError::SingularJacobian)
        );
    }

    #[test]
    fn hamiltonian_field_examples() {
        let f = xi_jet(3, 4, &[(&[1, 0, 0, 1, 0, 0], 1.0)]);
        // F = x₁ ξ₁ with ξ₁ = displacement at the base, ξ₁⁰ = 0.
        let x = hamiltonian_vector_field(&f).unwrap();
        assert_eq!(x[0].coeff(&[1, 0, 0, 0, 0, 0]), cx(-1.0, 0.0));
        assert_eq!(x[3].coeff(&[0, 0, 0, 1, 0, 0]), cx(1.0, 0.0));
        let g = xi_jet(3, 4, &[(&[2, 1, 0, 0, 0, 0], 1.0)]);
        let xg = hamiltonian_vector_field(&g).unwrap();
        assert!(xg[..3].iter().all(Jet::is_zero));
        assert!(divergence(&xg).unwrap().is_zero());
        let mut field = vec![Jet::zero(f.base_point(), 4); 6];
        field[0] = xi_jet(3, 4, &[(&[1, 0, 0, 0, 0, 0], 1.0)]);
        assert_eq!(divergence(&field).unwrap().constant_term(), cx(1.0, 0.0));
    }

    #[test]
    fn p_operator_examples() {
        let ch = heisenberg_chart(1, 4).unwrap();
        let x2xi1 = xi_jet(3, 4, &[(&[0, 1, 0, 1, 0, 0], 1.0)]);
        let x1xi2 = xi_jet(3, 4, &[(&[1, 0, 0, 0, 1, 0], 1.0)]);
        let fx = xi_jet(
            3,
            4,
            &[(&[1, 1, 0, 0, 0, 0], 1.0), (&[0, 0, 1, 0, 0, 0], 2.0)],
        );
        let xi1xi2 = xi_jet(3, 4, &[(&[0, 0, 0, 1, 1, 0], 1.0)]);
        for (f, want) in [(&x2xi1, 1.0), (&x1xi2, -1.0), (&fx, 0.0)] {
            assert_eq!(p_operator_canonical(f).unwrap(), cx(want, 0.0));
            let g = p_operator_geometric(&ch, f).unwrap();
            assert!((g - cx(want, 0.0)).norm() < 1e-12, "{g}");
        }
        let c = p_operator_canonical(&xi1xi2).unwrap();
        let g = p_operator_geometric(&ch, &xi1xi2).unwrap();
        assert!((c - g).norm() < 1e-12);
    }
}
