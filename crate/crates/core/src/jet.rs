//! Truncated multivariate Taylor series ("jets").
//!
//! A [`Jet`] holds the Taylor coefficients of a scalar quantity in `nvars`
//! variables up to total degree `order` (at most [`MAX_ORDER`]). Arithmetic on
//! jets is arithmetic on truncated power series, so evaluating a formula on
//! seeded input jets yields every partial derivative of the result up to
//! `order` in one forward pass.
//!
//! Coefficients are stored graded by degree, so the coefficients of a jet of
//! order `o` are a prefix of those of the same quantity at order `o + 1`;
//! truncation is a slice.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

/// Highest derivative order any jet can carry.
pub const MAX_ORDER: usize = 3;

/// Monomial bookkeeping shared by all jets in a given number of variables.
#[derive(Debug)]
pub struct JetLayout {
    nvars: usize,
    exponents: Vec<Vec<u8>>,
    lookup: HashMap<Vec<u8>, usize>,
    len_by_order: [usize; MAX_ORDER + 1],
    // (lhs, rhs, out) coefficient triples, sorted by the degree of `out`.
    products: Vec<(u32, u32, u32)>,
    products_by_order: [usize; MAX_ORDER + 1],
    // raise[m][i] = index of the monomial m + e_i, when it is in range.
    raise: Vec<Vec<Option<u32>>>,
    factorial: Vec<f64>,
}

fn layouts() -> &'static Mutex<HashMap<usize, Arc<JetLayout>>> {
    static LAYOUTS: OnceLock<Mutex<HashMap<usize, Arc<JetLayout>>>> = OnceLock::new();
    LAYOUTS.get_or_init(|| Mutex::new(HashMap::new()))
}

fn monomials_of_degree(nvars: usize, degree: usize) -> Vec<Vec<u8>> {
    fn rec(var: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        let nvars = cur.len();
        if var + 1 == nvars {
            cur[var] = left as u8;
            out.push(cur.clone());
            cur[var] = 0;
            return;
        }
        for e in (0..=left).rev() {
            cur[var] = e as u8;
            rec(var + 1, left - e, cur, out);
        }
        cur[var] = 0;
    }
    let mut out = Vec::new();
    if nvars == 0 {
        if degree == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(0, degree, &mut vec![0; nvars], &mut out);
    out
}

impl JetLayout {
    /// Shared layout for `nvars` variables (cached process-wide).
    pub fn get(nvars: usize) -> Arc<JetLayout> {
        let mut map = layouts().lock().expect("jet layout cache poisoned");
        map.entry(nvars)
            .or_insert_with(|| Arc::new(JetLayout::build(nvars)))
            .clone()
    }

    fn build(nvars: usize) -> JetLayout {
        let mut exponents = Vec::new();
        let mut len_by_order = [0; MAX_ORDER + 1];
        for (d, slot) in len_by_order.iter_mut().enumerate() {
            exponents.extend(monomials_of_degree(nvars, d));
            *slot = exponents.len();
        }
        let lookup: HashMap<Vec<u8>, usize> = exponents
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        let degree = |e: &[u8]| e.iter().map(|&x| x as usize).sum::<usize>();

        let mut products = Vec::new();
        for (a, ea) in exponents.iter().enumerate() {
            for (b, eb) in exponents.iter().enumerate() {
                if degree(ea) + degree(eb) > MAX_ORDER {
                    continue;
                }
                let sum: Vec<u8> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                products.push((a as u32, b as u32, lookup[&sum] as u32));
            }
        }
        products.sort_by_key(|&(_, _, c)| degree(&exponents[c as usize]));
        let mut products_by_order = [0; MAX_ORDER + 1];
        for (o, slot) in products_by_order.iter_mut().enumerate() {
            *slot = products
                .iter()
                .take_while(|&&(_, _, c)| degree(&exponents[c as usize]) <= o)
                .count();
        }

        let raise = exponents
            .iter()
            .map(|e| {
                (0..nvars)
                    .map(|i| {
                        let mut up = e.clone();
                        up[i] += 1;
                        lookup.get(&up).map(|&k| k as u32)
                    })
                    .collect()
            })
            .collect();
        let factorial = exponents
            .iter()
            .map(|e| {
                e.iter()
                    .map(|&k| (1..=k as u64).product::<u64>() as f64)
                    .product()
            })
            .collect();

        JetLayout {
            nvars,
            exponents,
            lookup,
            len_by_order,
            products,
            products_by_order,
            raise,
            factorial,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Number of coefficients of a jet of the given order.
    pub fn len(&self, order: usize) -> usize {
        self.len_by_order[order]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn index_of_multi(&self, multi_index: &[usize]) -> Option<usize> {
        let mut e = vec![0u8; self.nvars];
        for &i in multi_index {
            if i >= self.nvars {
                return None;
            }
            e[i] += 1;
        }
        self.lookup.get(&e).copied()
    }
}

/// A truncated Taylor series in several variables.
#[derive(Clone)]
pub struct Jet {
    layout: Arc<JetLayout>,
    order: usize,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.layout.nvars)
            .field("order", &self.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl Jet {
    pub fn constant(layout: &Arc<JetLayout>, order: usize, value: f64) -> Jet {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let mut coeffs = vec![0.0; layout.len(order)];
        coeffs[0] = value;
        Jet {
            layout: layout.clone(),
            order,
            coeffs,
        }
    }

    /// The independent variable `var` expanded around `value`.
    pub fn variable(layout: &Arc<JetLayout>, order: usize, var: usize, value: f64) -> Jet {
        let mut jet = Jet::constant(layout, order, value);
        if order > 0 {
            let e: Vec<u8> = (0..layout.nvars).map(|i| (i == var) as u8).collect();
            jet.coeffs[layout.lookup[&e]] = 1.0;
        }
        jet
    }

    /// Seeds one jet per coordinate of `point`.
    pub fn seed(point: &[f64], order: usize) -> Vec<Jet> {
        let layout = JetLayout::get(point.len());
        point
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(&layout, order, i, v))
            .collect()
    }

    /// Builds a jet from partial derivatives: `derivs[m]` is the derivative
    /// for the monomial with index `m` in the layout.
    pub fn from_derivatives(layout: &Arc<JetLayout>, order: usize, derivs: &[f64]) -> Jet {
        let n = layout.len(order);
        assert_eq!(derivs.len(), n);
        let coeffs = derivs
            .iter()
            .zip(&layout.factorial)
            .map(|(d, f)| d / f)
            .collect();
        Jet {
            layout: layout.clone(),
            order,
            coeffs,
        }
    }

    pub fn layout(&self) -> &Arc<JetLayout> {
        &self.layout
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nvars(&self) -> usize {
        self.layout.nvars
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Exponent vector of coefficient `m`.
    pub fn monomial(&self, m: usize) -> &[u8] {
        &self.layout.exponents[m]
    }

    /// Partial derivative `∂^{|multi_index|} / ∂x^{multi_index}` at the
    /// expansion point. Index order does not matter. Returns `None` when the
    /// requested order exceeds the jet order.
    pub fn partial(&self, multi_index: &[usize]) -> Option<f64> {
        if multi_index.len() > self.order {
            return None;
        }
        let m = self.layout.index_of_multi(multi_index)?;
        Some(self.coeffs[m] * self.layout.factorial[m])
    }

    /// `∂/∂x^var` as a jet of one lower order.
    pub fn derivative(&self, var: usize) -> Jet {
        let order = self.order.saturating_sub(1);
        let n = self.layout.len(order);
        let mut coeffs = vec![0.0; n];
        if self.order > 0 {
            for (m, c) in coeffs.iter_mut().enumerate() {
                if let Some(up) = self.layout.raise[m][var] {
                    let k = self.layout.exponents[up as usize][var] as f64;
                    *c = k * self.coeffs[up as usize];
                }
            }
        }
        Jet {
            layout: self.layout.clone(),
            order,
            coeffs,
        }
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet {
            layout: self.layout.clone(),
            order,
            coeffs: self.coeffs[..self.layout.len(order)].to_vec(),
        }
    }

    fn check_compatible(&self, other: &Jet) {
        debug_assert!(
            Arc::ptr_eq(&self.layout, &other.layout),
            "jets over different variable sets"
        );
    }

    fn binary_len(&self, other: &Jet) -> (usize, usize) {
        self.check_compatible(other);
        let order = self.order.min(other.order);
        (order, self.layout.len(order))
    }

    fn mul_jet(&self, other: &Jet) -> Jet {
        let (order, n) = self.binary_len(other);
        let mut coeffs = vec![0.0; n];
        let table = &self.layout.products[..self.layout.products_by_order[order]];
        for &(a, b, c) in table {
            coeffs[c as usize] += self.coeffs[a as usize] * other.coeffs[b as usize];
        }
        Jet {
            layout: self.layout.clone(),
            order,
            coeffs,
        }
    }

    /// f(a + h) = Σ f⁽ᵐ⁾(a)/m! hᵐ where `derivs[m] = f⁽ᵐ⁾(a)`.
    fn compose(&self, derivs: [f64; MAX_ORDER + 1]) -> Jet {
        let mut out = Jet::constant(&self.layout, self.order, derivs[0]);
        if self.order == 0 {
            return out;
        }
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut power = h.clone();
        let mut factorial = 1.0;
        for (m, d) in derivs.iter().enumerate().take(self.order + 1).skip(1) {
            factorial *= m as f64;
            let scale = d / factorial;
            for (o, p) in out.coeffs.iter_mut().zip(&power.coeffs) {
                *o += scale * p;
            }
            if m < self.order {
                power = power.mul_jet(&h);
            }
        }
        out
    }
}

fn atan_derivs(u: f64) -> [f64; 4] {
    let q = 1.0 + u * u;
    [u.atan(), 1.0 / q, -2.0 * u / (q * q), (6.0 * u * u - 2.0) / (q * q * q)]
}

/// Scalars usable in generic geometric formulas: plain `f64` or [`Jet`].
pub trait Scalar:
    Clone
    + Send
    + Sync
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(&self) -> f64;
    /// A constant of the same shape as `self`.
    fn lift(&self, v: f64) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn recip(&self) -> Self;
    fn powi(&self, k: i32) -> Self;
    fn acos(&self) -> Self;
    /// Four-quadrant arctangent of `self / x`.
    fn atan2(&self, x: &Self) -> Self;

    fn zero_like(&self) -> Self {
        self.lift(0.0)
    }

    fn square(&self) -> Self {
        self.clone() * self.clone()
    }
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn lift(&self, v: f64) -> f64 {
        v
    }
    fn sin(&self) -> f64 {
        f64::sin(*self)
    }
    fn cos(&self) -> f64 {
        f64::cos(*self)
    }
    fn exp(&self) -> f64 {
        f64::exp(*self)
    }
    fn ln(&self) -> f64 {
        f64::ln(*self)
    }
    fn sqrt(&self) -> f64 {
        f64::sqrt(*self)
    }
    fn recip(&self) -> f64 {
        1.0 / *self
    }
    fn powi(&self, k: i32) -> f64 {
        f64::powi(*self, k)
    }
    fn acos(&self) -> f64 {
        f64::acos(*self)
    }
    fn atan2(&self, x: &f64) -> f64 {
        f64::atan2(*self, *x)
    }
}

impl Scalar for Jet {
    fn value(&self) -> f64 {
        self.coeffs[0]
    }

    fn lift(&self, v: f64) -> Jet {
        Jet::constant(&self.layout, self.order, v)
    }

    fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose([s, c, -s, -c])
    }

    fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose([c, -s, -c, s])
    }

    fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose([e; 4])
    }

    fn ln(&self) -> Jet {
        let a = self.value();
        self.compose([a.ln(), 1.0 / a, -1.0 / (a * a), 2.0 / (a * a * a)])
    }

    fn sqrt(&self) -> Jet {
        let r = self.value().sqrt();
        let r3 = r * r * r;
        self.compose([r, 0.5 / r, -0.25 / r3, 0.375 / (r3 * r * r)])
    }

    fn recip(&self) -> Jet {
        let a = self.value();
        let r = 1.0 / a;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    fn powi(&self, k: i32) -> Jet {
        let a = self.value();
        let mut d = [0.0; 4];
        let mut falling = 1.0;
        for (j, slot) in d.iter_mut().enumerate() {
            if j > 0 {
                falling *= (k - j as i32 + 1) as f64;
            }
            *slot = if falling == 0.0 {
                0.0
            } else {
                falling * a.powi(k - j as i32)
            };
        }
        self.compose(d)
    }

    fn acos(&self) -> Jet {
        let a = self.value();
        let q = 1.0 - a * a;
        let s = q.sqrt();
        self.compose([
            a.acos(),
            -1.0 / s,
            -a / (q * s),
            -(1.0 + 2.0 * a * a) / (q * q * s),
        ])
    }

    fn atan2(&self, x: &Jet) -> Jet {
        let (y0, x0) = (self.value(), x.value());
        let base = y0.atan2(x0);
        if x0.abs() >= y0.abs() {
            let u = self.clone() / x.clone();
            let d = atan_derivs(u.value());
            u.compose([base, d[1], d[2], d[3]])
        } else {
            // atan2(y, x) = ±π/2 − atan(x / y) away from the y = 0 axis.
            let v = x.clone() / self.clone();
            let d = atan_derivs(v.value());
            v.compose([base, -d[1], -d[2], -d[3]])
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        let (order, n) = self.binary_len(&rhs);
        self.coeffs.truncate(n);
        self.order = order;
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        let (order, n) = self.binary_len(&rhs);
        self.coeffs.truncate(n);
        self.order = order;
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.mul_jet(&rhs)
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        self.mul_jet(&rhs.recip())
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        self.coeffs.iter_mut().for_each(|c| *c = -*c);
        self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.coeffs[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        self.coeffs.iter_mut().for_each(|c| *c *= rhs);
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(mut self, rhs: f64) -> Jet {
        self.coeffs.iter_mut().for_each(|c| *c /= rhs);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_sizes_match_binomials() {
        let l = JetLayout::get(5);
        assert_eq!(l.len(0), 1);
        assert_eq!(l.len(1), 6);
        assert_eq!(l.len(2), 21);
        assert_eq!(l.len(3), 56);
    }

    #[test]
    fn product_rule_on_polynomial() {
        let x = Jet::seed(&[2.0, -1.5], 3);
        // f = x0^2 * x1 + 3 x1^3
        let f = x[0].clone() * x[0].clone() * x[1].clone()
            + x[1].clone() * x[1].clone() * x[1].clone() * 3.0;
        assert_eq!(f.value(), 4.0 * -1.5 + 3.0 * -3.375);
        assert_eq!(f.partial(&[0]).unwrap(), 2.0 * 2.0 * -1.5);
        assert_eq!(f.partial(&[1]).unwrap(), 4.0 + 9.0 * 2.25);
        assert_eq!(f.partial(&[0, 1]).unwrap(), 4.0);
        assert_eq!(f.partial(&[1, 0]).unwrap(), 4.0);
        assert_eq!(f.partial(&[0, 0, 1]).unwrap(), 2.0);
        assert_eq!(f.partial(&[1, 1, 1]).unwrap(), 18.0);
        assert_eq!(f.partial(&[0, 0, 0]).unwrap(), 0.0);
        assert!(f.partial(&[0, 0, 0, 1]).is_none());
    }

    #[test]
    fn derivative_shifts_coefficients() {
        let x = Jet::seed(&[0.3, 0.7], 3);
        let f = x[0].sin() * x[1].exp();
        let dfx = f.derivative(0);
        assert_eq!(dfx.order(), 2);
        let expect = 0.3f64.cos() * 0.7f64.exp();
        assert!((dfx.value() - expect).abs() < 1e-15);
        assert!((dfx.partial(&[0, 1]).unwrap() - f.partial(&[0, 0, 1]).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn transcendental_derivatives() {
        let x = Jet::seed(&[0.4], 3);
        let checks: Vec<(Jet, [f64; 4])> = vec![
            (x[0].sqrt(), {
                let a: f64 = 0.4;
                [a.sqrt(), 0.5 * a.powf(-0.5), -0.25 * a.powf(-1.5), 0.375 * a.powf(-2.5)]
            }),
            (x[0].ln(), [0.4f64.ln(), 2.5, -6.25, 2.0 / 0.064]),
            (x[0].acos(), {
                let a: f64 = 0.4;
                let q = 1.0 - a * a;
                [a.acos(), -q.powf(-0.5), -a * q.powf(-1.5), -(1.0 + 2.0 * a * a) * q.powf(-2.5)]
            }),
            (x[0].powi(2), [0.16, 0.8, 2.0, 0.0]),
        ];
        for (jet, want) in checks {
            for (m, w) in want.iter().enumerate() {
                let idx = vec![0; m];
                let got = jet.partial(&idx).unwrap();
                assert!((got - w).abs() < 1e-12 * w.abs().max(1.0), "{m}: {got} vs {w}");
            }
        }
    }

    #[test]
    fn atan2_matches_analytic_gradient_in_all_quadrants() {
        for &(y, x) in &[(0.3, 1.2), (1.2, 0.3), (-0.7, -0.2), (0.5, -2.0), (-2.0, 0.1)] {
            let v = Jet::seed(&[y, x], 2);
            let t = v[0].atan2(&v[1]);
            let r2 = x * x + y * y;
            assert!((t.value() - f64::atan2(y, x)).abs() < 1e-15);
            assert!((t.partial(&[0]).unwrap() - x / r2).abs() < 1e-14);
            assert!((t.partial(&[1]).unwrap() + y / r2).abs() < 1e-14);
            // ∂²/∂y∂x of atan2 = (y² − x²) / r⁴
            let want = (y * y - x * x) / (r2 * r2);
            assert!((t.partial(&[0, 1]).unwrap() - want).abs() < 1e-13);
        }
    }

    #[test]
    fn division_is_inverse_of_multiplication() {
        let x = Jet::seed(&[1.3, 0.2, -0.4], 3);
        let a = x[0].clone() * x[1].sin() + x[2].exp();
        let b = x[1].cos() + x[0].clone() * x[2].clone();
        let q = a.clone() / b.clone();
        let back = q * b;
        for (u, v) in back.coeffs().iter().zip(a.coeffs()) {
            assert!((u - v).abs() < 1e-13);
        }
    }
}
