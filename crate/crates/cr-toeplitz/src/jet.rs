//! Truncated multivariate Taylor polynomials (jets) with complex coefficients.
//!
//! A [`Jet`] stores the Taylor coefficients of a function in the displacement
//! `x - base_point`, keyed by exponent multi-index and truncated at a fixed
//! total degree. Iteration is degree-graded, and within a degree the order is
//! descending lexicographic, so `x1` precedes `x2`. All operations are pure.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_complex::Complex64;
use smallvec::SmallVec;

use crate::error::JetError;

/// Exponent vector of a monomial.
pub type MultiIndex = SmallVec<[u8; 16]>;

/// Default truncation order.
pub const DEFAULT_ORDER: usize = 6;

/// Coefficients below this fraction of the largest magnitude are dropped.
pub const PRUNE_RELATIVE: f64 = 1e-14;

const BASE_TOL: f64 = 1e-12;

/// A monomial exponent with cached total degree.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    degree: u32,
    exps: MultiIndex,
}

impl Monomial {
    pub fn new(exps: &[u8]) -> Self {
        Self {
            degree: exps.iter().map(|&e| e as u32).sum(),
            exps: SmallVec::from_slice(exps),
        }
    }

    fn from_vec(exps: MultiIndex) -> Self {
        Self {
            degree: exps.iter().map(|&e| e as u32).sum(),
            exps,
        }
    }

    pub fn exponents(&self) -> &[u8] {
        &self.exps
    }

    pub fn degree(&self) -> usize {
        self.degree as usize
    }

    /// Multi-index factorial `alpha!`.
    pub fn factorial(&self) -> f64 {
        self.exps.iter().map(|&e| factorial(e as usize)).product()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree
            .cmp(&other.degree)
            .then_with(|| other.exps.cmp(&self.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `k!` as a float.
pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

type Terms = BTreeMap<Monomial, Complex64>;

/// Truncated Taylor polynomial in `num_vars` variables around `base_point`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    order: usize,
    base: Vec<Complex64>,
    coeffs: Terms,
}

fn close(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= BASE_TOL * (1.0 + a.norm().max(b.norm()))
}

fn check_order(order: usize) -> Result<(), JetError> {
    if order > u8::MAX as usize {
        Err(JetError::OrderTooLarge { order })
    } else {
        Ok(())
    }
}

impl Jet {
    /// The zero jet at `base` with the given truncation order.
    pub fn zero(base: &[Complex64], order: usize) -> Self {
        Self {
            order,
            base: base.to_vec(),
            coeffs: Terms::new(),
        }
    }

    /// The zero jet at the origin of `num_vars`-space.
    pub fn zero_origin(num_vars: usize, order: usize) -> Self {
        Self::zero(&vec![Complex64::new(0.0, 0.0); num_vars], order)
    }

    /// A constant jet.
    pub fn constant(base: &[Complex64], order: usize, value: Complex64) -> Self {
        let mut jet = Self::zero(base, order);
        if value != Complex64::new(0.0, 0.0) {
            jet.coeffs.insert(
                Monomial::from_vec(SmallVec::from_elem(0, base.len())),
                value,
            );
        }
        jet
    }

    /// The coordinate function `x_index`, i.e. `base[index] + displacement`.
    pub fn variable(base: &[Complex64], order: usize, index: usize) -> Result<Self, JetError> {
        check_order(order)?;
        let nv = base.len();
        if index >= nv {
            return Err(JetError::IndexOutOfRange {
                index,
                num_vars: nv,
            });
        }
        let mut jet = Self::constant(base, order, base[index]);
        if order >= 1 {
            let mut e: MultiIndex = SmallVec::from_elem(0, nv);
            e[index] = 1;
            jet.coeffs
                .insert(Monomial::from_vec(e), Complex64::new(1.0, 0.0));
        }
        Ok(jet)
    }

    /// The displacement `x_index - base[index]`.
    pub fn displacement(base: &[Complex64], order: usize, index: usize) -> Result<Self, JetError> {
        let mut jet = Self::variable(base, order, index)?;
        jet.coeffs
            .remove(&Monomial::from_vec(SmallVec::from_elem(0, base.len())));
        Ok(jet)
    }

    /// Builds a jet from explicit terms; monomials above `order` are dropped.
    pub fn from_terms<'a, I>(base: &[Complex64], order: usize, terms: I) -> Result<Self, JetError>
    where
        I: IntoIterator<Item = (&'a [u8], Complex64)>,
    {
        check_order(order)?;
        let mut jet = Self::zero(base, order);
        for (exps, c) in terms {
            if exps.len() != base.len() {
                return Err(JetError::LengthMismatch {
                    expected: base.len(),
                    found: exps.len(),
                });
            }
            let m = Monomial::new(exps);
            if m.degree() <= order {
                *jet.coeffs.entry(m).or_insert(Complex64::new(0.0, 0.0)) += c;
            }
        }
        jet.prune();
        Ok(jet)
    }

    pub fn num_vars(&self) -> usize {
        self.base.len()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn base_point(&self) -> &[Complex64] {
        &self.base
    }

    /// Coefficient of the monomial with the given exponents (zero if absent).
    pub fn coeff(&self, exps: &[u8]) -> Complex64 {
        if exps.len() != self.num_vars() {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs
            .get(&Monomial::new(exps))
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// The partial derivative `D^alpha` evaluated at the base point.
    pub fn derivative_at_base(&self, exps: &[u8]) -> Complex64 {
        self.coeff(exps) * Monomial::new(exps).factorial()
    }

    pub fn constant_term(&self) -> Complex64 {
        self.coeff(&vec![0; self.num_vars()])
    }

    /// Iterates stored terms in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest total degree carrying a non-zero coefficient.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.keys().next_back().map(Monomial::degree)
    }

    /// Smallest total degree carrying a non-zero coefficient.
    pub fn low_degree(&self) -> Option<usize> {
        self.coeffs.keys().next().map(Monomial::degree)
    }

    /// Checks that two jets share variable count, base point and order.
    pub fn check_compatible(&self, other: &Jet) -> Result<(), JetError> {
        self.check_same_space(other)?;
        if self.order != other.order {
            return Err(JetError::OrderMismatch {
                left: self.order,
                right: other.order,
            });
        }
        Ok(())
    }

    fn check_same_space(&self, other: &Jet) -> Result<(), JetError> {
        if self.num_vars() != other.num_vars() {
            return Err(JetError::VarCountMismatch {
                left: self.num_vars(),
                right: other.num_vars(),
            });
        }
        for (k, (a, b)) in self.base.iter().zip(&other.base).enumerate() {
            if !close(*a, *b) {
                return Err(JetError::BasePointMismatch { component: k });
            }
        }
        Ok(())
    }

    fn prune(&mut self) {
        let threshold = self.max_abs() * PRUNE_RELATIVE;
        self.coeffs.retain(|_, c| c.norm() > threshold);
    }

    fn with_terms(&self, order: usize, coeffs: Terms) -> Jet {
        let mut jet = Jet {
            order,
            base: self.base.clone(),
            coeffs,
        };
        jet.prune();
        jet
    }

    pub fn add(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_compatible(other)?;
        let mut coeffs = self.coeffs.clone();
        for (m, c) in &other.coeffs {
            *coeffs.entry(m.clone()).or_insert(Complex64::new(0.0, 0.0)) += *c;
        }
        Ok(self.with_terms(self.order, coeffs))
    }

    pub fn sub(&self, other: &Jet) -> Result<Jet, JetError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Jet {
        self.scale(Complex64::new(-1.0, 0.0))
    }

    pub fn scale(&self, factor: Complex64) -> Jet {
        if factor == Complex64::new(0.0, 0.0) {
            return Jet::zero(&self.base, self.order);
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|(m, c)| (m.clone(), c * factor))
            .collect();
        self.with_terms(self.order, coeffs)
    }

    pub fn scale_real(&self, factor: f64) -> Jet {
        self.scale(Complex64::new(factor, 0.0))
    }

    pub fn add_constant(&self, value: Complex64) -> Jet {
        let mut coeffs = self.coeffs.clone();
        *coeffs
            .entry(Monomial::from_vec(SmallVec::from_elem(0, self.num_vars())))
            .or_insert(Complex64::new(0.0, 0.0)) += value;
        self.with_terms(self.order, coeffs)
    }

    /// Truncated Cauchy product at the shared order.
    pub fn mul(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_compatible(other)?;
        let coeffs = mul_terms(&self.coeffs, &other.coeffs, self.order);
        Ok(self.with_terms(self.order, coeffs))
    }

    /// Drops all monomials above `order`; the result has that order.
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        let coeffs = self
            .coeffs
            .iter()
            .filter(|(m, _)| m.degree() <= order)
            .map(|(m, c)| (m.clone(), *c))
            .collect();
        self.with_terms(order, coeffs)
    }

    /// Treats the stored polynomial as exact and raises the truncation order.
    pub fn promote(&self, order: usize) -> Result<Jet, JetError> {
        check_order(order)?;
        let mut jet = self.clone();
        jet.order = order.max(self.order);
        Ok(jet)
    }

    /// Sets the truncation order, truncating or promoting as needed.
    pub fn with_order(&self, order: usize) -> Result<Jet, JetError> {
        if order <= self.order {
            Ok(self.truncate(order))
        } else {
            self.promote(order)
        }
    }

    /// Formal partial derivative; the result has order `order - 1`.
    pub fn partial(&self, index: usize) -> Result<Jet, JetError> {
        if index >= self.num_vars() {
            return Err(JetError::IndexOutOfRange {
                index,
                num_vars: self.num_vars(),
            });
        }
        let order = self.order.saturating_sub(1);
        if self.order == 0 {
            return Ok(Jet::zero(&self.base, 0));
        }
        let mut coeffs = Terms::new();
        for (m, c) in &self.coeffs {
            let e = m.exps[index];
            if e == 0 {
                continue;
            }
            let mut exps = m.exps.clone();
            exps[index] -= 1;
            coeffs.insert(Monomial::from_vec(exps), c * e as f64);
        }
        Ok(self.with_terms(order, coeffs))
    }

    /// Repeated partial derivative `D^alpha`.
    pub fn partial_multi(&self, exps: &[u8]) -> Result<Jet, JetError> {
        if exps.len() != self.num_vars() {
            return Err(JetError::LengthMismatch {
                expected: self.num_vars(),
                found: exps.len(),
            });
        }
        let mut jet = self.clone();
        for (i, &e) in exps.iter().enumerate() {
            for _ in 0..e {
                jet = jet.partial(i)?;
            }
        }
        Ok(jet)
    }

    /// `1 / a`; requires a non-zero constant term.
    pub fn invert(&self) -> Result<Jet, JetError> {
        let a0 = self.constant_term();
        if a0.norm() == 0.0 {
            return Err(JetError::ZeroConstantTerm);
        }
        let u = self.scale(a0.inv()).add_constant(Complex64::new(-1.0, 0.0));
        let coeffs: Vec<Complex64> = (0..=self.order)
            .map(|k| Complex64::new(if k % 2 == 0 { 1.0 } else { -1.0 }, 0.0))
            .collect();
        Ok(univariate_series(&u, &coeffs).scale(a0.inv()))
    }

    /// `a^p` on the principal branch; requires `Re a(base) > 0`.
    pub fn pow_real(&self, p: f64) -> Result<Jet, JetError> {
        let a0 = self.positive_constant()?;
        let u = self.scale(a0.inv()).add_constant(Complex64::new(-1.0, 0.0));
        let mut coeffs = Vec::with_capacity(self.order + 1);
        let mut c = 1.0;
        for k in 0..=self.order {
            coeffs.push(Complex64::new(c, 0.0));
            c *= (p - k as f64) / (k as f64 + 1.0);
        }
        Ok(univariate_series(&u, &coeffs).scale(a0.powf(p)))
    }

    /// Principal logarithm; requires `Re a(base) > 0`.
    pub fn log(&self) -> Result<Jet, JetError> {
        let a0 = self.positive_constant()?;
        let u = self.scale(a0.inv()).add_constant(Complex64::new(-1.0, 0.0));
        let coeffs: Vec<Complex64> = (0..=self.order)
            .map(|k| match k {
                0 => Complex64::new(0.0, 0.0),
                _ => Complex64::new(if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64, 0.0),
            })
            .collect();
        Ok(univariate_series(&u, &coeffs).add_constant(a0.ln()))
    }

    /// Exponential.
    pub fn exp(&self) -> Result<Jet, JetError> {
        let a0 = self.constant_term();
        let v = self.add_constant(-a0);
        let coeffs: Vec<Complex64> = (0..=self.order)
            .map(|k| Complex64::new(1.0 / factorial(k), 0.0))
            .collect();
        Ok(univariate_series(&v, &coeffs).scale(a0.exp()))
    }

    fn positive_constant(&self) -> Result<Complex64, JetError> {
        let a0 = self.constant_term();
        if a0.re <= 0.0 {
            return Err(JetError::BranchCut {
                re: a0.re,
                im: a0.im,
            });
        }
        Ok(a0)
    }

    /// Truncated composition `outer(inner_1, ..., inner_k)`.
    ///
    /// Every inner jet must take the value `outer.base_point[k]` at its own
    /// base point. The result lives at the inner base point with order
    /// `min(outer.order, inner.order)`.
    pub fn compose(&self, inner: &[Jet]) -> Result<Jet, JetError> {
        if inner.len() != self.num_vars() {
            return Err(JetError::LengthMismatch {
                expected: self.num_vars(),
                found: inner.len(),
            });
        }
        let Some(first) = inner.first() else {
            return Ok(self.clone());
        };
        for g in &inner[1..] {
            first.check_compatible(g)?;
        }
        let order = self.order.min(first.order);
        let mut disp = Vec::with_capacity(inner.len());
        for (k, g) in inner.iter().enumerate() {
            let g0 = g.constant_term();
            if !close(g0, self.base[k]) {
                return Err(JetError::CenteringViolation {
                    component: k,
                    expected: format!("{}", self.base[k]),
                    found: format!("{g0}"),
                });
            }
            disp.push(g.truncate(order).add_constant(-g0).coeffs);
        }
        let mut powers: Vec<Vec<Terms>> = Vec::with_capacity(disp.len());
        for d in &disp {
            let mut pw = vec![unit_terms(first.num_vars())];
            for p in 1..=order {
                let next = mul_terms(&pw[p - 1], d, order);
                pw.push(next);
            }
            powers.push(pw);
        }
        let outer: Vec<(MultiIndex, Complex64)> = self
            .coeffs
            .iter()
            .filter(|(m, _)| m.degree() <= order)
            .map(|(m, c)| (m.exps.clone(), *c))
            .collect();
        let coeffs = compose_rec(&outer, 0, &powers, order, first.num_vars());
        Ok(first.with_terms(order, coeffs))
    }

    /// Evaluates the polynomial at `base_point + displacement`.
    pub fn eval_complex(&self, displacement: &[Complex64]) -> Result<Complex64, JetError> {
        if displacement.len() != self.num_vars() {
            return Err(JetError::LengthMismatch {
                expected: self.num_vars(),
                found: displacement.len(),
            });
        }
        let powers: Vec<Vec<Complex64>> = displacement
            .iter()
            .map(|&d| {
                let mut pw = vec![Complex64::new(1.0, 0.0)];
                for p in 1..=self.order {
                    pw.push(pw[p - 1] * d);
                }
                pw
            })
            .collect();
        Ok(self
            .coeffs
            .iter()
            .map(|(m, c)| {
                m.exps
                    .iter()
                    .enumerate()
                    .fold(*c, |acc, (i, &e)| acc * powers[i][e as usize])
            })
            .sum())
    }

    /// Evaluates at a real displacement.
    pub fn eval_real(&self, displacement: &[f64]) -> Result<Complex64, JetError> {
        let d: Vec<Complex64> = displacement
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        self.eval_complex(&d)
    }

    /// Re-indexes into a larger space: variable `i` becomes variable `map[i]`.
    ///
    /// The target base point must agree with this jet's base on mapped slots.
    pub fn embed(&self, base: &[Complex64], map: &[usize]) -> Result<Jet, JetError> {
        if map.len() != self.num_vars() {
            return Err(JetError::LengthMismatch {
                expected: self.num_vars(),
                found: map.len(),
            });
        }
        for (i, &j) in map.iter().enumerate() {
            if j >= base.len() {
                return Err(JetError::IndexOutOfRange {
                    index: j,
                    num_vars: base.len(),
                });
            }
            if !close(base[j], self.base[i]) {
                return Err(JetError::BasePointMismatch { component: i });
            }
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|(m, c)| {
                let mut e: MultiIndex = SmallVec::from_elem(0, base.len());
                for (i, &j) in map.iter().enumerate() {
                    e[j] += m.exps[i];
                }
                (Monomial::from_vec(e), *c)
            })
            .collect();
        Ok(Jet {
            order: self.order,
            base: base.to_vec(),
            coeffs,
        })
    }

    /// Maximum coefficient deviation between two compatible jets.
    pub fn max_diff(&self, other: &Jet) -> Result<f64, JetError> {
        self.check_same_space(other)?;
        let mut keys: Vec<&Monomial> = self.coeffs.keys().chain(other.coeffs.keys()).collect();
        keys.sort();
        keys.dedup();
        Ok(keys
            .into_iter()
            .map(|m| {
                let a = self.coeffs.get(m).copied().unwrap_or_default();
                let b = other.coeffs.get(m).copied().unwrap_or_default();
                (a - b).norm()
            })
            .fold(0.0, f64::max))
    }
}

impl fmt::Display for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.coeffs {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for (i, &e) in m.exps.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*d{}", i + 1)?,
                    _ => write!(f, "*d{}^{}", i + 1, e)?,
                }
            }
        }
        Ok(())
    }
}

fn unit_terms(nv: usize) -> Terms {
    let mut t = Terms::new();
    t.insert(
        Monomial::from_vec(SmallVec::from_elem(0, nv)),
        Complex64::new(1.0, 0.0),
    );
    t
}

fn mul_terms(a: &Terms, b: &Terms, max_deg: usize) -> Terms {
    if a.is_empty() || b.is_empty() {
        return Terms::new();
    }
    let b_vec: Vec<(&Monomial, &Complex64)> = b.iter().collect();
    let mut acc: HashMap<MultiIndex, Complex64> = HashMap::new();
    for (ma, ca) in a {
        let da = ma.degree();
        if da > max_deg {
            break;
        }
        let room = max_deg - da;
        for (mb, cb) in &b_vec {
            if mb.degree() > room {
                break;
            }
            let e: MultiIndex = ma.exps.iter().zip(&mb.exps).map(|(x, y)| x + y).collect();
            *acc.entry(e).or_insert(Complex64::new(0.0, 0.0)) += ca * *cb;
        }
    }
    acc.into_iter()
        .map(|(e, c)| (Monomial::from_vec(e), c))
        .collect()
}

fn univariate_series(u: &Jet, coeffs: &[Complex64]) -> Jet {
    let mut acc = Terms::new();
    for c in coeffs.iter().rev() {
        acc = mul_terms(&acc, &u.coeffs, u.order);
        if *c != Complex64::new(0.0, 0.0) {
            *acc.entry(Monomial::from_vec(SmallVec::from_elem(0, u.num_vars())))
                .or_insert(Complex64::new(0.0, 0.0)) += *c;
        }
    }
    u.with_terms(u.order, acc)
}

fn compose_rec(
    outer: &[(MultiIndex, Complex64)],
    var: usize,
    powers: &[Vec<Terms>],
    max_deg: usize,
    nv: usize,
) -> Terms {
    if outer.is_empty() {
        return Terms::new();
    }
    if var == powers.len() {
        let c: Complex64 = outer.iter().map(|(_, c)| *c).sum();
        let mut t = Terms::new();
        t.insert(Monomial::from_vec(SmallVec::from_elem(0, nv)), c);
        return t;
    }
    let mut groups: BTreeMap<u8, Vec<(MultiIndex, Complex64)>> = BTreeMap::new();
    for (e, c) in outer {
        groups.entry(e[var]).or_default().push((e.clone(), *c));
    }
    let mut result: HashMap<MultiIndex, Complex64> = HashMap::new();
    for (p, group) in groups {
        let p = p as usize;
        if p > max_deg {
            continue;
        }
        let inner = compose_rec(&group, var + 1, powers, max_deg - p, nv);
        let prod = if p == 0 {
            inner
        } else {
            mul_terms(&powers[var][p], &inner, max_deg)
        };
        for (m, c) in prod {
            *result.entry(m.exps).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
    }
    result
        .into_iter()
        .map(|(e, c)| (Monomial::from_vec(e), c))
        .collect()
}

/// Enumerates all exponent vectors in `nv` variables with total degree `deg`.
pub fn multi_indices_of_degree(nv: usize, deg: usize) -> Vec<MultiIndex> {
    fn rec(nv: usize, left: usize, cur: &mut MultiIndex, out: &mut Vec<MultiIndex>) {
        if cur.len() == nv - 1 {
            cur.push(left as u8);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for e in (0..=left).rev() {
            cur.push(e as u8);
            rec(nv, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if nv == 0 {
        if deg == 0 {
            out.push(MultiIndex::new());
        }
        return out;
    }
    rec(nv, deg, &mut MultiIndex::new(), &mut out);
    out
}

/// The origin of `nv`-space as a complex vector.
pub fn origin(nv: usize) -> Vec<Complex64> {
    vec![Complex64::new(0.0, 0.0); nv]
}
