//! One-dimensional radial weight profiles: finite sums of c · r^p · (log r)^q.
//!
//! The family is closed under products, sums and d/dr, which is exactly what
//! the weighted inequality catalog needs — weights like r^{−a}(log r)^c paired
//! with their first two radial derivatives in closed form.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialTerm {
    pub coef: f64,
    pub pow: f64,
    pub logpow: i32,
}

/// Σ cᵢ r^{pᵢ} (log r)^{qᵢ}, with q ≥ 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile(pub Vec<RadialTerm>);

impl RadialProfile {
    pub fn zero() -> Self {
        RadialProfile(Vec::new())
    }

    pub fn one() -> Self {
        RadialProfile::power(1.0, 0.0)
    }

    /// c · r^p
    pub fn power(coef: f64, pow: f64) -> Self {
        RadialProfile(vec![RadialTerm {
            coef,
            pow,
            logpow: 0,
        }])
        .simplified()
    }

    /// c · r^p (log r)^q
    pub fn power_log(coef: f64, pow: f64, logpow: i32) -> Self {
        assert!(logpow >= 0, "negative log powers are not smooth across r=1");
        RadialProfile(vec![RadialTerm { coef, pow, logpow }]).simplified()
    }

    pub fn eval(&self, r: f64) -> f64 {
        debug_assert!(r > 0.0);
        let lr = r.ln();
        self.0
            .iter()
            .map(|t| t.coef * r.powf(t.pow) * lr.powi(t.logpow))
            .sum()
    }

    /// d/dr in closed form.
    pub fn deriv(&self) -> RadialProfile {
        let mut out = Vec::new();
        for t in &self.0 {
            if t.pow != 0.0 {
                out.push(RadialTerm {
                    coef: t.coef * t.pow,
                    pow: t.pow - 1.0,
                    logpow: t.logpow,
                });
            }
            if t.logpow > 0 {
                out.push(RadialTerm {
                    coef: t.coef * t.logpow as f64,
                    pow: t.pow - 1.0,
                    logpow: t.logpow - 1,
                });
            }
        }
        RadialProfile(out).simplified()
    }

    pub fn mul(&self, other: &RadialProfile) -> RadialProfile {
        let mut out = Vec::new();
        for a in &self.0 {
            for b in &other.0 {
                out.push(RadialTerm {
                    coef: a.coef * b.coef,
                    pow: a.pow + b.pow,
                    logpow: a.logpow + b.logpow,
                });
            }
        }
        RadialProfile(out).simplified()
    }

    pub fn add(&self, other: &RadialProfile) -> RadialProfile {
        let mut out = self.0.clone();
        out.extend_from_slice(&other.0);
        RadialProfile(out).simplified()
    }

    pub fn scale(&self, s: f64) -> RadialProfile {
        RadialProfile(
            self.0
                .iter()
                .map(|t| RadialTerm {
                    coef: t.coef * s,
                    ..*t
                })
                .collect(),
        )
        .simplified()
    }

    /// Multiply by r^p.
    pub fn shift_pow(&self, p: f64) -> RadialProfile {
        RadialProfile(
            self.0
                .iter()
                .map(|t| RadialTerm {
                    coef: t.coef,
                    pow: t.pow + p,
                    logpow: t.logpow,
                })
                .collect(),
        )
    }

    fn simplified(mut self) -> RadialProfile {
        self.0
            .sort_by(|a, b| (a.pow, a.logpow).partial_cmp(&(b.pow, b.logpow)).unwrap());
        let mut out: Vec<RadialTerm> = Vec::new();
        for t in self.0 {
            if let Some(last) = out.last_mut() {
                if last.pow == t.pow && last.logpow == t.logpow {
                    last.coef += t.coef;
                    continue;
                }
            }
            out.push(t);
        }
        out.retain(|t| t.coef != 0.0);
        RadialProfile(out)
    }

    /// Smallest log power appearing; used by admissibility checks.
    pub fn min_logpow(&self) -> i32 {
        self.0.iter().map(|t| t.logpow).min().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_power_log() {
        // d/dr [r^{-2} (log r)^3] = -2 r^{-3}(log r)^3 + 3 r^{-3}(log r)^2
        let p = RadialProfile::power_log(1.0, -2.0, 3);
        let d = p.deriv();
        let r: f64 = 1.7;
        let expect = -2.0 * r.powf(-3.0) * r.ln().powi(3) + 3.0 * r.powf(-3.0) * r.ln().powi(2);
        assert!((d.eval(r) - expect).abs() < 1e-14);
    }

    #[test]
    fn product_and_sum_close() {
        let a = RadialProfile::power(2.0, -1.0);
        let b = RadialProfile::power_log(3.0, 0.5, 1);
        let p = a.mul(&b);
        let r: f64 = 2.3;
        assert!((p.eval(r) - a.eval(r) * b.eval(r)).abs() < 1e-13);
        let s = a.add(&b);
        assert!((s.eval(r) - a.eval(r) - b.eval(r)).abs() < 1e-13);
    }

    #[test]
    fn like_terms_merge() {
        let a = RadialProfile::power(1.0, -1.0).add(&RadialProfile::power(-1.0, -1.0));
        assert!(a.0.is_empty());
    }
}
