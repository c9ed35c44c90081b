//! Truncated multivariate Taylor expansions ("jets") with ring-generic
//! coefficients.
//!
//! A jet of order `k` at a point stores the coefficients c_γ = ∂^γ f / γ! for
//! all multi-indices with |γ| ≤ k. Products are truncated Leibniz products,
//! so differential operators of total order ≤ k can be applied exactly by
//! coefficient shuffling — over `BigRational` this is exact arithmetic.

use crate::error::{CoreError, Result};
use crate::scalar::Ring;
use smallvec::SmallVec;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Inline coefficient storage: order-1 jets in up to 7 variables avoid the
/// heap entirely.
pub type Coeffs<T> = SmallVec<[T; 8]>;

pub const MAX_ORDER: usize = 4;

/// Shared combinatorial tables for jets in `nvars` variables up to `order`.
#[derive(Debug)]
pub struct JetShape {
    pub nvars: usize,
    pub order: usize,
    /// Multi-indices sorted by total degree, then lexicographically.
    pub midx: Vec<Vec<u8>>,
    /// Number of positions of total degree ≤ d, for d = 0..=order.
    pub count_le: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
    /// Truncated-product triples (ia, ib, ic): midx[ia] + midx[ib] = midx[ic].
    pub prod: Vec<(u32, u32, u32)>,
    /// Per variable v, per target position: source position of γ + e_v and the
    /// integer factor γ_v + 1.
    pub deriv: Vec<Vec<(u32, u32)>>,
}

fn gen_midx(nvars: usize, order: usize) -> Vec<Vec<u8>> {
    let mut all: Vec<Vec<u8>> = Vec::new();
    let mut cur = vec![0u8; nvars];
    fn rec(all: &mut Vec<Vec<u8>>, cur: &mut Vec<u8>, var: usize, left: u8) {
        if var == cur.len() {
            all.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur[var] = e;
            rec(all, cur, var + 1, left - e);
        }
        cur[var] = 0;
    }
    for d in 0..=order as u8 {
        let before = all.len();
        rec(&mut all, &mut cur, 0, d);
        // keep only total degree exactly d from this pass
        let mut fixed: Vec<Vec<u8>> = all.split_off(before);
        fixed.retain(|m| m.iter().map(|&e| e as usize).sum::<usize>() == d as usize);
        fixed.sort();
        all.extend(fixed);
    }
    all
}

impl JetShape {
    fn new(nvars: usize, order: usize) -> Arc<JetShape> {
        assert!(order <= MAX_ORDER);
        let midx = gen_midx(nvars, order);
        let mut index = HashMap::new();
        for (i, m) in midx.iter().enumerate() {
            index.insert(m.clone(), i);
        }
        let deg = |m: &Vec<u8>| m.iter().map(|&e| e as usize).sum::<usize>();
        let mut count_le = vec![0usize; order + 1];
        for m in &midx {
            for d in deg(m)..=order {
                count_le[d] += 1;
            }
        }
        let mut prod = Vec::new();
        for (ia, a) in midx.iter().enumerate() {
            for (ib, b) in midx.iter().enumerate() {
                if deg(a) + deg(b) <= order {
                    let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                    let ic = index[&sum];
                    prod.push((ia as u32, ib as u32, ic as u32));
                }
            }
        }
        // sorted by target so accumulation order is fixed
        prod.sort_by_key(|&(a, b, c)| (c, a, b));
        let mut deriv = Vec::with_capacity(nvars);
        for v in 0..nvars {
            let mut tbl = Vec::new();
            for m in &midx {
                if deg(m) >= order {
                    break;
                }
                let mut up = m.clone();
                up[v] += 1;
                tbl.push((index[&up] as u32, (m[v] + 1) as u32));
            }
            deriv.push(tbl);
        }
        Arc::new(JetShape {
            nvars,
            order,
            midx,
            count_le,
            index,
            prod,
            deriv,
        })
    }

    pub fn get(nvars: usize, order: usize) -> Arc<JetShape> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetShape>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap();
        guard
            .entry((nvars, order))
            .or_insert_with(|| JetShape::new(nvars, order))
            .clone()
    }

    pub fn position(&self, m: &[u8]) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn len_for(&self, ord: usize) -> usize {
        self.count_le[ord.min(self.order)]
    }
}

/// Taylor coefficients of a function at a point, valid up to order `ord`.
#[derive(Debug, Clone)]
pub struct Jet<T: Ring> {
    pub shape: Arc<JetShape>,
    pub ord: usize,
    pub c: Coeffs<T>,
}

impl<T: Ring> Jet<T> {
    pub fn zero(shape: Arc<JetShape>, ord: usize) -> Self {
        let n = shape.len_for(ord);
        let mut c = Coeffs::with_capacity(n);
        c.resize(n, T::zero());
        Jet { shape, ord, c }
    }

    pub fn constant(shape: Arc<JetShape>, ord: usize, v: T) -> Self {
        let mut j = Jet::zero(shape, ord);
        j.c[0] = v;
        j
    }

    /// Jet of the coordinate function x_v at a point with x_v = value.
    pub fn coordinate(shape: Arc<JetShape>, ord: usize, v: usize, value: T) -> Self {
        let mut j = Jet::zero(shape.clone(), ord);
        j.c[0] = value;
        if ord >= 1 {
            let mut e = vec![0u8; shape.nvars];
            e[v] = 1;
            let p = shape.position(&e).expect("first-order position");
            j.c[p] = T::one();
        }
        j
    }

    pub fn value(&self) -> T {
        self.c[0].clone()
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|x| x.is_zero())
    }

    /// Truncate in place to a lower order.
    pub fn truncate(&mut self, ord: usize) {
        if ord < self.ord {
            self.ord = ord;
            self.c.truncate(self.shape.len_for(ord));
        }
    }

    pub fn add(&self, other: &Jet<T>) -> Jet<T> {
        let ord = self.ord.min(other.ord);
        let n = self.shape.len_for(ord);
        let mut c = Coeffs::with_capacity(n);
        for i in 0..n {
            c.push(self.c[i].clone() + other.c[i].clone());
        }
        Jet {
            shape: self.shape.clone(),
            ord,
            c,
        }
    }

    pub fn add_assign(&mut self, other: &Jet<T>) {
        let ord = self.ord.min(other.ord);
        self.truncate(ord);
        for i in 0..self.c.len() {
            self.c[i] = self.c[i].clone() + other.c[i].clone();
        }
    }

    pub fn neg(&self) -> Jet<T> {
        Jet {
            shape: self.shape.clone(),
            ord: self.ord,
            c: self.c.iter().map(|x| -x.clone()).collect(),
        }
    }

    pub fn neg_in_place(&mut self) {
        for x in &mut self.c {
            *x = -x.clone();
        }
    }

    pub fn scale(&self, s: &T) -> Jet<T> {
        Jet {
            shape: self.shape.clone(),
            ord: self.ord,
            c: self.c.iter().map(|x| x.clone() * s.clone()).collect(),
        }
    }

    /// Truncated product, valid to min of the factor orders.
    pub fn mul(&self, other: &Jet<T>) -> Jet<T> {
        let ord = self.ord.min(other.ord);
        let out_len = self.shape.len_for(ord);
        let la = self.c.len();
        let lb = other.c.len();
        let mut c = Coeffs::with_capacity(out_len);
        c.resize(out_len, T::zero());
        for &(ia, ib, ic) in &self.shape.prod {
            let (ia, ib, ic) = (ia as usize, ib as usize, ic as usize);
            if ic >= out_len || ia >= la || ib >= lb {
                continue;
            }
            if self.c[ia].is_zero() || other.c[ib].is_zero() {
                continue;
            }
            c[ic] = c[ic].clone() + self.c[ia].clone() * other.c[ib].clone();
        }
        Jet {
            shape: self.shape.clone(),
            ord,
            c,
        }
    }

    /// Jet of ∂f/∂x_v, valid to order − 1.
    pub fn derivative(&self, v: usize) -> Jet<T> {
        assert!(self.ord >= 1, "derivative of an order-0 jet");
        let ord = self.ord - 1;
        let n = self.shape.len_for(ord);
        let tbl = &self.shape.deriv[v];
        let mut c = Coeffs::with_capacity(n);
        for t in tbl.iter().take(n) {
            let (src, fac) = (t.0 as usize, t.1 as i64);
            c.push(self.c[src].clone() * T::from_int(fac));
        }
        Jet {
            shape: self.shape.clone(),
            ord,
            c,
        }
    }

    /// Compose with a univariate analytic function given by the Taylor
    /// coefficients `series[k]` = g^{(k)}(value)/k! of the outer function at
    /// the inner value. The inner value itself must already be subtracted by
    /// the caller supplying `series`.
    pub fn compose_series(&self, series: &[T]) -> Jet<T> {
        let ord = self.ord;
        let mut nil = self.clone();
        nil.c[0] = T::zero();
        // Horner over the nilpotent part
        let mut acc = Jet::constant(self.shape.clone(), ord, series[ord].clone());
        for k in (0..ord).rev() {
            acc = acc.mul(&nil);
            acc.c[0] = acc.c[0].clone() + series[k].clone();
        }
        acc
    }

    /// Integer power; negative powers invert via a truncated geometric series
    /// (exact over rationals when the value is nonzero).
    pub fn powi(&self, k: i32) -> Result<Jet<T>> {
        if k == 0 {
            return Ok(Jet::constant(self.shape.clone(), self.ord, T::one()));
        }
        let base = if k > 0 { self.clone() } else { self.recip()? };
        let mut acc = base.clone();
        for _ in 1..k.unsigned_abs() {
            acc = acc.mul(&base);
        }
        Ok(acc)
    }

    /// 1/f as a jet; error when the value vanishes.
    pub fn recip(&self) -> Result<Jet<T>> {
        let v = self.value();
        let inv = v
            .try_recip()
            .ok_or_else(|| CoreError::NearSingular("reciprocal of zero jet value".into()))?;
        // series of 1/(v + z) = (1/v) Σ (-z/v)^k
        let mut series = Vec::with_capacity(self.ord + 1);
        let mut cur = inv.clone();
        series.push(cur.clone());
        for _ in 0..self.ord {
            cur = -(cur * inv.clone());
            series.push(cur.clone());
        }
        Ok(self.compose_series(&series))
    }
}

impl Jet<f64> {
    pub fn exp(&self) -> Jet<f64> {
        let v = self.value().exp();
        let mut series = Vec::with_capacity(self.ord + 1);
        let mut fact = 1.0;
        for k in 0..=self.ord {
            series.push(v / fact);
            fact *= (k + 1) as f64;
        }
        self.compose_series(&series)
    }

    pub fn ln(&self) -> Result<Jet<f64>> {
        let v = self.value();
        if !(v > 0.0) {
            return Err(CoreError::NotExact(format!("log of nonpositive value {v}")));
        }
        // log(v + z) = log v + Σ_{k≥1} (-1)^{k+1} z^k / (k v^k)
        let mut series = vec![v.ln()];
        for k in 1..=self.ord {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            series.push(sign / (k as f64 * v.powi(k as i32)));
        }
        Ok(self.compose_series(&series))
    }

    /// Real power at a strictly positive value.
    pub fn powf(&self, p: f64) -> Result<Jet<f64>> {
        let v = self.value();
        if !(v > 0.0) {
            return Err(CoreError::NotExact(format!(
                "real power of nonpositive value {v}"
            )));
        }
        // (v+z)^p = v^p Σ C(p,k) (z/v)^k
        let mut series = vec![v.powf(p)];
        let mut coef = v.powf(p);
        for k in 1..=self.ord {
            coef *= (p - (k as f64 - 1.0)) / (k as f64 * v);
            series.push(coef);
        }
        Ok(self.compose_series(&series))
    }

    pub fn sqrt(&self) -> Result<Jet<f64>> {
        self.powf(0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use crate::scalar::Ring;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::from_ratio(n, d)
    }

    #[test]
    fn product_is_leibniz_exact() {
        // f = x^2, g = x*y at (3, 5); check (fg) coefficients by hand.
        let shape = JetShape::get(2, 2);
        let x = Jet::<BigRational>::coordinate(shape.clone(), 2, 0, q(3, 1));
        let y = Jet::<BigRational>::coordinate(shape.clone(), 2, 1, q(5, 1));
        let f = x.mul(&x);
        let g = x.mul(&y);
        let fg = f.mul(&g); // x^3 y
        assert_eq!(fg.value(), q(135, 1));
        let dx = fg.derivative(0); // 3 x^2 y = 135
        assert_eq!(dx.value(), q(135, 1));
        let dy = fg.derivative(1); // x^3 = 27
        assert_eq!(dy.value(), q(27, 1));
        // mixed second: ∂x∂y (x^3 y) = 3x^2 = 27
        assert_eq!(fg.derivative(0).derivative(1).value(), q(27, 1));
    }

    #[test]
    fn recip_is_exact_geometric() {
        let shape = JetShape::get(1, 3);
        let x = Jet::<BigRational>::coordinate(shape, 3, 0, q(2, 1));
        let r = x.recip().unwrap(); // 1/x at 2: 1/2, -1/4, 1/8, -1/16
        assert_eq!(r.c[0], q(1, 2));
        assert_eq!(r.c[1], q(-1, 4));
        assert_eq!(r.c[2], q(1, 8));
        assert_eq!(r.c[3], q(-1, 16));
    }

    #[test]
    fn exp_series_matches() {
        let shape = JetShape::get(1, 3);
        let x = Jet::<f64>::coordinate(shape, 3, 0, 0.0);
        let e = x.exp();
        assert!((e.c[0] - 1.0).abs() < 1e-15);
        assert!((e.c[1] - 1.0).abs() < 1e-15);
        assert!((e.c[2] - 0.5).abs() < 1e-15);
        assert!((e.c[3] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn zero_value_recip_errors() {
        let shape = JetShape::get(1, 2);
        let x = Jet::<BigRational>::coordinate(shape, 2, 0, q(0, 1));
        assert!(x.recip().is_err());
    }
}
