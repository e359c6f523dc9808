//! Forward-mode dual numbers.
//!
//! A [`Jet`] of depth `k` is a dual number nested `k` times: it carries one
//! independent infinitesimal per level, each squaring to zero. Coefficients
//! are stored as a flat vector of length `2^k`; the first half is the part
//! free of the outermost infinitesimal, the second half its coefficient. A
//! depth-1 jet is the classic `a + b·ε`.
//!
//! Because the depth is a runtime quantity, a Lie bracket of brackets can be
//! evaluated by simply adding one more level per bracket, without the
//! polymorphic recursion a statically nested `Dual<Dual<..>>` would need.

use std::fmt;

/// Arithmetic needed by the expression evaluator.
///
/// Implemented for plain `f64` (value-only evaluation) and for [`Jet`].
pub trait Scalar: Clone + fmt::Debug {
    /// A constant with the same shape as `self`.
    fn lift(&self, v: f64) -> Self;
    /// The real (infinitesimal-free) part.
    fn value(&self) -> f64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Division without a zero check; callers test `o.value()` first.
    fn div(&self, o: &Self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn tanh(&self) -> Self;
    fn sqrt(&self) -> Self;
    /// Whether any coefficient beyond the real part is carried.
    fn has_infinitesimals(&self) -> bool;
}

impl Scalar for f64 {
    fn lift(&self, v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn tanh(&self) -> Self {
        f64::tanh(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn has_infinitesimals(&self) -> bool {
        false
    }
}

/// Nested dual number of runtime depth.
#[derive(Clone, PartialEq)]
pub struct Jet {
    c: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet{:?}", self.c)
    }
}

impl Jet {
    /// A constant of the given depth.
    pub fn constant(v: f64, depth: u32) -> Self {
        let mut c = vec![0.0; 1 << depth];
        c[0] = v;
        Jet { c }
    }

    /// Builds `re + eps·ε` where `ε` is a new outermost infinitesimal.
    ///
    /// Both parts must share one depth; the result is one level deeper.
    pub fn extend(re: &Jet, eps: &Jet) -> Self {
        assert_eq!(re.c.len(), eps.c.len(), "jet depth mismatch");
        let mut c = Vec::with_capacity(2 * re.c.len());
        c.extend_from_slice(&re.c);
        c.extend_from_slice(&eps.c);
        Jet { c }
    }

    /// Depth-1 jet `v + d·ε`.
    pub fn dual(v: f64, d: f64) -> Self {
        Jet { c: vec![v, d] }
    }

    pub fn depth(&self) -> u32 {
        self.c.len().trailing_zeros()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    /// Part free of the outermost infinitesimal (one level shallower).
    pub fn re(&self) -> Jet {
        let h = self.c.len() / 2;
        Jet { c: self.c[..h].to_vec() }
    }

    /// Coefficient of the outermost infinitesimal (one level shallower).
    pub fn eps(&self) -> Jet {
        let h = self.c.len() / 2;
        Jet { c: self.c[h..].to_vec() }
    }

    /// Lifts to one level deeper with a zero coefficient for the new level.
    pub fn deepen(&self) -> Jet {
        let mut c = self.c.clone();
        c.resize(2 * self.c.len(), 0.0);
        Jet { c }
    }
}

mod ops {
    pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }

    pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
        a.iter().map(|x| x * s).collect()
    }

    /// Product in the algebra of `d` nilpotent generators: a subset
    /// convolution over the bit masks of the coefficient indices.
    pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
        let len = a.len();
        let mut out = vec![0.0; len];
        for (s, o) in out.iter_mut().enumerate() {
            let mut t = s;
            let mut acc = 0.0;
            loop {
                acc += a[t] * b[s ^ t];
                if t == 0 {
                    break;
                }
                t = (t - 1) & s;
            }
            *o = acc;
        }
        out
    }

    /// `f(a0 + ν) = Σ_j f⁽ʲ⁾(a0) νʲ / j!`, with `ν` the nilpotent part of `a`.
    ///
    /// `ders[j]` is `f⁽ʲ⁾(a0)`; entries past the depth are unused.
    pub fn taylor(a: &[f64], ders: &dyn Fn(usize) -> f64) -> Vec<f64> {
        let depth = a.len().trailing_zeros() as usize;
        let mut nu = a.to_vec();
        nu[0] = 0.0;
        let mut fact = 1.0;
        for j in 1..=depth {
            fact *= j as f64;
        }
        let mut out = vec![0.0; a.len()];
        out[0] = ders(depth) / fact;
        for j in (0..depth).rev() {
            fact /= (j + 1) as f64;
            out = mul(&out, &nu);
            out[0] += ders(j) / fact;
        }
        out
    }

    pub fn sin(a: &[f64]) -> Vec<f64> {
        let (s, c) = a[0].sin_cos();
        taylor(a, &|j| [s, c, -s, -c][j % 4])
    }

    pub fn cos(a: &[f64]) -> Vec<f64> {
        let (s, c) = a[0].sin_cos();
        taylor(a, &|j| [c, -s, -c, s][j % 4])
    }

    pub fn exp(a: &[f64]) -> Vec<f64> {
        let e = a[0].exp();
        taylor(a, &|_| e)
    }

    pub fn tanh(a: &[f64]) -> Vec<f64> {
        let depth = a.len().trailing_zeros() as usize;
        let t = a[0].tanh();
        // d/dx P(tanh x) = P'(t) (1 - t²), starting from P = t
        let mut poly = vec![0.0, 1.0];
        let mut ders = Vec::with_capacity(depth + 1);
        for _ in 0..=depth {
            ders.push(poly.iter().rev().fold(0.0, |acc, c| acc * t + c));
            let dp: Vec<f64> = (1..poly.len()).map(|i| i as f64 * poly[i]).collect();
            let mut next = vec![0.0; dp.len() + 2];
            for (i, c) in dp.iter().enumerate() {
                next[i] += c;
                next[i + 2] -= c;
            }
            poly = next;
        }
        taylor(a, &|j| ders[j])
    }

    /// Real power `x^p`, derivatives by falling factorials.
    fn power(a: &[f64], p: f64, base: &dyn Fn(usize) -> f64) -> Vec<f64> {
        taylor(a, &|j| {
            let mut ff = 1.0;
            for i in 0..j {
                ff *= p - i as f64;
            }
            if ff == 0.0 {
                0.0
            } else {
                ff * base(j)
            }
        })
    }

    pub fn recip(a: &[f64]) -> Vec<f64> {
        let x = a[0];
        power(a, -1.0, &|j| x.powi(-1 - j as i32))
    }

    pub fn sqrt(a: &[f64]) -> Vec<f64> {
        let x = a[0];
        let r = x.sqrt();
        power(a, 0.5, &|j| r / x.powi(j as i32))
    }

    pub fn powi(a: &[f64], n: i32) -> Vec<f64> {
        let x = a[0];
        power(a, n as f64, &|j| x.powi(n - j as i32))
    }
}

impl Scalar for Jet {
    fn lift(&self, v: f64) -> Self {
        Jet::constant(v, self.depth())
    }
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn add(&self, o: &Self) -> Self {
        debug_assert_eq!(self.c.len(), o.c.len());
        Jet { c: ops::add(&self.c, &o.c) }
    }
    fn sub(&self, o: &Self) -> Self {
        debug_assert_eq!(self.c.len(), o.c.len());
        Jet { c: ops::sub(&self.c, &o.c) }
    }
    fn mul(&self, o: &Self) -> Self {
        debug_assert_eq!(self.c.len(), o.c.len());
        Jet { c: ops::mul(&self.c, &o.c) }
    }
    fn neg(&self) -> Self {
        Jet { c: ops::scale(&self.c, -1.0) }
    }
    fn div(&self, o: &Self) -> Self {
        Jet { c: ops::mul(&self.c, &ops::recip(&o.c)) }
    }
    fn powi(&self, n: i32) -> Self {
        Jet { c: ops::powi(&self.c, n) }
    }
    fn sin(&self) -> Self {
        Jet { c: ops::sin(&self.c) }
    }
    fn cos(&self) -> Self {
        Jet { c: ops::cos(&self.c) }
    }
    fn exp(&self) -> Self {
        Jet { c: ops::exp(&self.c) }
    }
    fn tanh(&self) -> Self {
        Jet { c: ops::tanh(&self.c) }
    }
    fn sqrt(&self) -> Self {
        Jet { c: ops::sqrt(&self.c) }
    }
    fn has_infinitesimals(&self) -> bool {
        self.c.len() > 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_derivatives() {
        let x = Jet::dual(0.3, 1.0);
        let y = x.sin().mul(&x.exp());
        let expect = 0.3f64.cos() * 0.3f64.exp() + 0.3f64.sin() * 0.3f64.exp();
        assert!((y.coeffs()[1] - expect).abs() < 1e-15);
        let q = x.powi(3);
        assert!((q.coeffs()[1] - 3.0 * 0.09).abs() < 1e-15);
        let r = x.lift(1.0).div(&x);
        assert!((r.coeffs()[1] + 1.0 / 0.09).abs() < 1e-12);
    }

    #[test]
    fn second_derivative_by_nesting() {
        // d²/dx² tanh(x) at 0.4 = -2 tanh(x) sech²(x)
        let inner = Jet::dual(0.4, 1.0);
        let x = Jet::extend(&inner, &Jet::dual(1.0, 0.0));
        let y = x.tanh();
        let t = 0.4f64.tanh();
        let mixed = y.coeffs()[3];
        assert!((mixed - (-2.0 * t * (1.0 - t * t))).abs() < 1e-14);
        assert!((y.coeffs()[1] - (1.0 - t * t)).abs() < 1e-15);
        assert!((y.coeffs()[2] - (1.0 - t * t)).abs() < 1e-15);
    }

    #[test]
    fn sqrt_and_cos() {
        let x = Jet::dual(4.0, 1.0);
        assert!((x.sqrt().coeffs()[1] - 0.25).abs() < 1e-15);
        let c = Jet::dual(0.7, 1.0).cos();
        assert!((c.coeffs()[1] + 0.7f64.sin()).abs() < 1e-15);
    }
}
