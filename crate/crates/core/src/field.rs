//! Test fields: closed-form complex-valued functions with exact jets and
//! declared support geometry.
//!
//! Every field is built from smooth bump factors, so supports are compact,
//! all derivatives vanish at the support boundary, and the first-stratum norm
//! stays above a positive margin wherever the field is nonzero.

use crate::error::{CoreError, Result};
use crate::expr::{CExpr, EvalCtx, Expr};
use crate::group::GroupModel;
use crate::jet::Jet;
use std::sync::Arc;
use crate::scalar::rational_to_f64;

/// Support geometry: the ambient bounding box, and the radial annulus of the
/// first-stratum norm on the support (rmin is the stratum margin δ).
#[derive(Debug, Clone)]
pub struct SupportInfo {
    pub bounds: Vec<(f64, f64)>,
    pub rmin: f64,
    pub rmax: f64,
}

#[derive(Debug, Clone)]
pub enum FieldBody {
    /// Expression in the ambient coordinates (Euclidean models).
    Direct(CExpr),
    /// u(x')·b(t) product on Heisenberg models; `t` is an expression in one
    /// variable. A constant t-factor means the field is not yet compactly
    /// supported and cannot be integrated.
    Product { stratum: CExpr, t: CExpr },
}

/// Ambient expressions and jet shape fixed once per sweep.
pub struct PreparedField {
    pub re: Expr,
    pub im: Option<Expr>,
    pub shape: Arc<crate::jet::JetShape>,
}

#[derive(Debug, Clone)]
pub struct ScalarField {
    pub id: String,
    pub model: GroupModel,
    pub body: FieldBody,
    pub support: SupportInfo,
}

fn remap_var(e: &Expr, from: usize, to: usize) -> Expr {
    match e {
        Expr::Coord(i) if *i == from => Expr::Coord(to),
        Expr::Coord(_) | Expr::ConstRat(_) | Expr::ConstF(_) => e.clone(),
        Expr::Add(es) => Expr::Add(es.iter().map(|x| remap_var(x, from, to)).collect()),
        Expr::Mul(es) => Expr::Mul(es.iter().map(|x| remap_var(x, from, to)).collect()),
        Expr::Neg(b) => Expr::Neg(Box::new(remap_var(b, from, to))),
        Expr::IntPow(b, k) => Expr::IntPow(Box::new(remap_var(b, from, to)), *k),
        Expr::RealPow(b, p) => Expr::RealPow(Box::new(remap_var(b, from, to)), *p),
        Expr::Exp(b) => Expr::Exp(Box::new(remap_var(b, from, to))),
        Expr::Log(b) => Expr::Log(Box::new(remap_var(b, from, to))),
        Expr::StratumNormSq | Expr::StratumNorm | Expr::QuasiNorm => e.clone(),
        Expr::LogBump { arg, r0, s } => Expr::LogBump {
            arg: Box::new(remap_var(arg, from, to)),
            r0: *r0,
            s: *s,
        },
        Expr::WinBump {
            arg,
            center,
            halfwidth,
        } => Expr::WinBump {
            arg: Box::new(remap_var(arg, from, to)),
            center: *center,
            halfwidth: *halfwidth,
        },
    }
}

fn has_compact_t(t: &CExpr) -> bool {
    fn go(e: &Expr) -> bool {
        match e {
            Expr::WinBump { .. } => true,
            Expr::LogBump { .. } => true,
            Expr::Add(es) => es.iter().all(go),
            Expr::Mul(es) => es.iter().any(go),
            Expr::Neg(b) | Expr::IntPow(b, _) => go(b),
            _ => false,
        }
    }
    go(&t.re) && t.im.as_ref().map_or(true, |e| go(e))
}

impl ScalarField {
    /// Ambient expression pair (t-variable remapped) for pointwise paths.
    pub fn ambient_exprs(&self) -> (Expr, Option<Expr>) {
        match &self.body {
            FieldBody::Direct(c) => (c.re.clone(), c.im.clone()),
            FieldBody::Product { stratum, t } => {
                let tv = self.model.ambient_dim() - 1;
                let tre = remap_var(&t.re, 0, tv);
                let tim = t.im.as_ref().map(|e| remap_var(e, 0, tv));
                let ure = stratum.re.clone();
                let uim = stratum.im.clone();
                // (ure + i uim)(tre + i tim)
                let re = match (&uim, &tim) {
                    (None, None) => Expr::mul2(ure.clone(), tre.clone()),
                    (Some(ui), None) => {
                        let _ = ui;
                        Expr::mul2(ure.clone(), tre.clone())
                    }
                    (None, Some(ti)) => {
                        let _ = ti;
                        Expr::mul2(ure.clone(), tre.clone())
                    }
                    (Some(_), Some(ti)) => Expr::add2(
                        Expr::mul2(ure.clone(), tre.clone()),
                        Expr::Neg(Box::new(Expr::mul2(uim.clone().unwrap(), ti.clone()))),
                    ),
                };
                let im = match (&uim, &tim) {
                    (None, None) => None,
                    (Some(ui), None) => Some(Expr::mul2(ui.clone(), tre)),
                    (None, Some(ti)) => Some(Expr::mul2(ure, ti.clone())),
                    (Some(ui), Some(ti)) => Some(Expr::add2(
                        Expr::mul2(ure, ti.clone()),
                        Expr::mul2(ui.clone(), tre),
                    )),
                };
                (re, im)
            }
        }
    }

    pub fn is_complex(&self) -> bool {
        match &self.body {
            FieldBody::Direct(c) => c.is_complex(),
            FieldBody::Product { stratum, t } => stratum.is_complex() || t.is_complex(),
        }
    }

    pub fn is_compactly_supported(&self) -> bool {
        match &self.body {
            FieldBody::Direct(_) => true,
            FieldBody::Product { t, .. } => has_compact_t(t),
        }
    }

    pub fn inside_support(&self, x: &[f64]) -> bool {
        self.support
            .bounds
            .iter()
            .zip(x)
            .all(|(&(lo, hi), &xi)| xi >= lo && xi <= hi)
    }

    /// One-time preparation of the ambient expressions for hot loops.
    pub fn prepare(&self, order: usize) -> PreparedField {
        let (re, im) = self.ambient_exprs();
        PreparedField {
            re,
            im,
            shape: crate::jet::JetShape::get(self.model.ambient_dim(), order),
        }
    }

    /// Complex jet (re, im) of the field at `x` to the given order; points
    /// outside the support box yield the zero jet exactly.
    pub fn eval_jet(&self, x: &[f64], order: usize) -> Result<(Jet<f64>, Jet<f64>)> {
        if order > crate::jet::MAX_ORDER {
            return Err(CoreError::Field(format!("jet order {order} > 4")));
        }
        self.eval_jet_prepared(&self.prepare(order), x)
    }

    /// Jet evaluation against a prepared expression pair.
    pub fn eval_jet_prepared(
        &self,
        prep: &PreparedField,
        x: &[f64],
    ) -> Result<(Jet<f64>, Jet<f64>)> {
        let order = prep.shape.order;
        let ctx = EvalCtx::ambient(&self.model);
        if !self.inside_support(x) {
            return Ok((
                Jet::zero(prep.shape.clone(), order),
                Jet::zero(prep.shape.clone(), order),
            ));
        }
        let jre = crate::expr::eval_f64_shaped(&prep.re, &ctx, x, &prep.shape)?;
        let jim = match &prep.im {
            Some(e) => crate::expr::eval_f64_shaped(e, &ctx, x, &prep.shape)?,
            None => Jet::zero(prep.shape.clone(), order),
        };
        Ok((jre, jim))
    }

    pub fn conj(&self) -> ScalarField {
        let conj_c = |c: &CExpr| c.conj();
        let body = match &self.body {
            FieldBody::Direct(c) => FieldBody::Direct(conj_c(c)),
            FieldBody::Product { stratum, t } => FieldBody::Product {
                stratum: conj_c(stratum),
                t: conj_c(t),
            },
        };
        ScalarField {
            id: format!("conj({})", self.id),
            model: self.model.clone(),
            body,
            support: self.support.clone(),
        }
    }
}

/// Per-coordinate support bounds of a radial annulus |·| ≤ rmax in the given
/// model (anisotropic quasi-norms bound coordinate i by rmax^{νᵢ}).
fn radial_bounds(model: &GroupModel, rmax: f64, quasi: bool) -> Vec<(f64, f64)> {
    match model {
        GroupModel::Euclidean(m) => m
            .dilation
            .weights()
            .iter()
            .map(|w| {
                let e = if quasi { rational_to_f64(w) } else { 1.0 };
                let b = rmax.powf(e);
                (-b, b)
            })
            .collect(),
        GroupModel::Heisenberg { n } => {
            let mut b = vec![(-rmax, rmax); 2 * n];
            b.push((f64::NEG_INFINITY, f64::INFINITY));
            b
        }
    }
}

fn norm_arg(model: &GroupModel) -> Expr {
    match model {
        GroupModel::Euclidean(m) => match m.qnorm {
            crate::group::QuasiNormSpec::Euclidean => Expr::StratumNorm,
            crate::group::QuasiNormSpec::Anisotropic { .. } => Expr::QuasiNorm,
        },
        GroupModel::Heisenberg { .. } => Expr::StratumNorm,
    }
}

fn is_quasi(model: &GroupModel) -> bool {
    matches!(
        model,
        GroupModel::Euclidean(m) if matches!(m.qnorm, crate::group::QuasiNormSpec::Anisotropic { .. })
    )
}

/// Smooth radial annulus bump g(|x'|), g(r) = exp(−1/(1−u²)) with
/// u = log(r/r0)/s; support r ∈ (r0·e^{−s}, r0·e^{s}). On Heisenberg models
/// the result is a stratum factor that still needs `tensor_with_t_bump`.
pub fn log_radial_bump(model: &GroupModel, r0: f64, s: f64) -> Result<ScalarField> {
    if !(r0 > 0.0) || !(s > 0.0) {
        return Err(CoreError::InvalidParam(format!(
            "log_radial_bump needs r0 > 0 and s > 0, got ({r0}, {s})"
        )));
    }
    // u = log(r/r0)/s expressed through the squared norm where possible:
    // log(r²/r0²)/(2s) is the same function without the square root.
    let expr = match norm_arg(model) {
        Expr::StratumNorm => Expr::LogBump {
            arg: Box::new(Expr::StratumNormSq),
            r0: r0 * r0,
            s: 2.0 * s,
        },
        arg => Expr::LogBump {
            arg: Box::new(arg),
            r0,
            s,
        },
    };
    let rmin = r0 * (-s).exp();
    let rmax = r0 * s.exp();
    let body = match model {
        GroupModel::Euclidean(_) => FieldBody::Direct(CExpr::real(expr)),
        GroupModel::Heisenberg { .. } => FieldBody::Product {
            stratum: CExpr::real(expr),
            t: CExpr::real(Expr::rat(1, 1)),
        },
    };
    Ok(ScalarField {
        id: format!("logbump(r0={r0},s={s})"),
        model: model.clone(),
        body,
        support: SupportInfo {
            bounds: radial_bounds(model, rmax, is_quasi(model)),
            rmin: if is_quasi(model) {
                // conservative euclidean inner radius for the graded scheme
                let n = model.ambient_dim() as f64;
                let wmax = model
                    .dilation_weights_f64()
                    .iter()
                    .cloned()
                    .fold(1.0f64, f64::max);
                rmin.powf(wmax) / n.sqrt()
            } else {
                rmin
            },
            rmax,
        },
    })
}

/// Product field u(x')·b(t) with b a window bump in t. Errors when the
/// t-factor fails to produce a compactly supported field.
pub fn tensor_with_t_bump(
    f: &ScalarField,
    t_center: f64,
    t_halfwidth: f64,
    t_complex_slope: Option<f64>,
) -> Result<ScalarField> {
    let stratum = match &f.body {
        FieldBody::Product { stratum, .. } => stratum.clone(),
        FieldBody::Direct(_) => {
            return Err(CoreError::Field(
                "tensor_with_t_bump expects a first-stratum field on a heisenberg model".into(),
            ))
        }
    };
    if !(t_halfwidth > 0.0) || !t_halfwidth.is_finite() {
        return Err(CoreError::Field(
            "t-factor must be compactly supported (finite positive halfwidth)".into(),
        ));
    }
    let bump = Expr::WinBump {
        arg: Box::new(Expr::Coord(0)),
        center: t_center,
        halfwidth: t_halfwidth,
    };
    let t = match t_complex_slope {
        None => CExpr::real(bump),
        Some(mu) => CExpr::complex(
            bump.clone(),
            Expr::Mul(vec![Expr::constant(mu), Expr::Coord(0), bump]),
        ),
    };
    let mut bounds = f.support.bounds.clone();
    let tv = f.model.ambient_dim() - 1;
    bounds[tv] = (t_center - t_halfwidth, t_center + t_halfwidth);
    Ok(ScalarField {
        id: format!("{}*tbump(c={t_center},w={t_halfwidth})", f.id),
        model: f.model.clone(),
        body: FieldBody::Product { stratum, t },
        support: SupportInfo {
            bounds,
            ..f.support.clone()
        },
    })
}

/// Multiply the stratum part by a closed-form factor (support unchanged —
/// the factor must be smooth on the support annulus).
pub fn with_stratum_factor(f: &ScalarField, re: Expr, im: Option<Expr>) -> ScalarField {
    let apply = |c: &CExpr| -> CExpr {
        // (cre + i cim)(re + i im)
        let cre = c.re.clone();
        let cim = c.im.clone();
        let new_re = match (&cim, &im) {
            (Some(ci), Some(fi)) => Expr::add2(
                Expr::mul2(cre.clone(), re.clone()),
                Expr::Neg(Box::new(Expr::mul2(ci.clone(), fi.clone()))),
            ),
            _ => Expr::mul2(cre.clone(), re.clone()),
        };
        let new_im = match (&cim, &im) {
            (None, None) => None,
            (Some(ci), None) => Some(Expr::mul2(ci.clone(), re.clone())),
            (None, Some(fi)) => Some(Expr::mul2(cre, fi.clone())),
            (Some(ci), Some(fi)) => Some(Expr::add2(
                Expr::mul2(cre, fi.clone()),
                Expr::mul2(ci.clone(), re.clone()),
            )),
        };
        CExpr {
            re: new_re,
            im: new_im,
        }
    };
    let body = match &f.body {
        FieldBody::Direct(c) => FieldBody::Direct(apply(c)),
        FieldBody::Product { stratum, t } => FieldBody::Product {
            stratum: apply(stratum),
            t: t.clone(),
        },
    };
    ScalarField {
        id: f.id.clone(),
        model: f.model.clone(),
        body,
        support: f.support.clone(),
    }
}

/// The extremizing family f_ε = |x'|^{−(N−2)/2+ε} · cutoff, whose Rayleigh
/// quotient approaches the sharp constant as ε → 0 with widening cutoff.
pub fn hardy_extremizer_family(
    model: &GroupModel,
    eps: f64,
    cutoff: &ScalarField,
) -> Result<ScalarField> {
    let n = model.stratum_dim();
    let ok = match model {
        GroupModel::Euclidean(_) => n >= 3,
        GroupModel::Heisenberg { .. } => n >= 4,
    };
    if !ok {
        return Err(CoreError::InvalidParam(format!(
            "extremizer family needs first-stratum dimension ≥ 3 (euclid) or ≥ 4 (heisenberg), got {n}"
        )));
    }
    if !(eps > 0.0) {
        return Err(CoreError::InvalidParam(format!(
            "extremizer exponent offset must be positive, got {eps}"
        )));
    }
    let expo = -((n as f64 - 2.0) / 2.0) + eps;
    let mut out = power_radial_factor(cutoff, expo);
    out.id = format!("extremizer(eps={eps})*{}", cutoff.id);
    Ok(out)
}

/// Multiply a field by |x'|^{expo} (real exponent, via the squared norm).
pub fn power_radial_factor(f: &ScalarField, expo: f64) -> ScalarField {
    if expo == 0.0 {
        return f.clone();
    }
    let factor = Expr::RealPow(Box::new(Expr::StratumNormSq), expo / 2.0);
    with_stratum_factor(f, factor, None)
}

// ---------------------------------------------------------------------------
// default field presets
// ---------------------------------------------------------------------------

/// Named default field used by the inequality suites: `radial`, `angular`
/// (real, not stratum-radial), `complex`.
pub fn default_field(model: &GroupModel, preset: &str) -> Result<ScalarField> {
    let (r0, s) = (1.0, 0.6);
    match preset {
        "radial" => finish_default(model, log_radial_bump(model, r0, s)?, preset, false),
        "angular" => {
            let base = log_radial_bump(model, r0, s)?;
            let factor = Expr::add2(
                Expr::rat(1, 1),
                Expr::mul2(Expr::rat(1, 4), Expr::Coord(0)),
            );
            let f = with_stratum_factor(&base, factor, None);
            finish_default(model, f, preset, false)
        }
        "complex" => {
            let base = log_radial_bump(model, r0, s)?;
            let re = Expr::add2(
                Expr::rat(1, 1),
                Expr::mul2(Expr::rat(1, 4), Expr::Coord(0)),
            );
            let im = Expr::mul2(Expr::rat(1, 3), Expr::Coord(model.stratum_dim() - 1));
            let f = with_stratum_factor(&base, re, Some(im));
            finish_default(model, f, preset, true)
        }
        other => {
            if let Some(rest) = other.strip_prefix("logbump:") {
                let (r0, s) = parse_two(rest)?;
                let f = log_radial_bump(model, r0, s)?;
                return finish_default(model, f, other, false);
            }
            if let Some(rest) = other.strip_prefix("extremizer:") {
                let (eps, s) = parse_two(rest)?;
                let cutoff = log_radial_bump(model, 1.0, s)?;
                let f = hardy_extremizer_family(model, eps, &cutoff)?;
                return finish_default(model, f, other, false);
            }
            Err(CoreError::UnknownId(format!("field preset '{other}'")))
        }
    }
}

fn parse_two(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(CoreError::InvalidParam(format!(
            "expected two comma-separated numbers, got '{s}'"
        )));
    }
    let a: f64 = parts[0]
        .parse()
        .map_err(|_| CoreError::InvalidParam(format!("bad number '{}'", parts[0])))?;
    let b: f64 = parts[1]
        .parse()
        .map_err(|_| CoreError::InvalidParam(format!("bad number '{}'", parts[1])))?;
    Ok((a, b))
}

fn finish_default(
    model: &GroupModel,
    f: ScalarField,
    preset: &str,
    complex_t: bool,
) -> Result<ScalarField> {
    let mut out = match model {
        GroupModel::Euclidean(_) => f,
        GroupModel::Heisenberg { .. } => {
            tensor_with_t_bump(&f, 0.0, 1.5, if complex_t { Some(0.5) } else { None })?
        }
    };
    out.id = format!("{preset}");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn bump_boundary_magnitude_flush() {
        // one-sided evaluation at u = ±(1 − 1e-3): magnitude far below 1e-30
        let u: f64 = 1.0 - 1e-3;
        let v = (-1.0 / (1.0 - u * u)).exp();
        assert!(v < 1e-30, "boundary magnitude {v}");
    }

    #[test]
    fn zero_jet_outside_support() {
        let model = GroupModel::euclidean_isotropic(3);
        let f = default_field(&model, "radial").unwrap();
        let (re, im) = f.eval_jet(&[5.0, 0.0, 0.0], 2).unwrap();
        assert!(re.is_zero() && im.is_zero());
        // inside the box but outside the annulus: also exactly zero
        let (re, _) = f.eval_jet(&[0.01, 0.0, 0.0], 2).unwrap();
        assert!(re.is_zero());
    }

    #[test]
    fn jets_match_finite_differences() {
        let model = GroupModel::heisenberg(1);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let fields = [
            default_field(&model, "radial").unwrap(),
            default_field(&model, "angular").unwrap(),
            default_field(&model, "complex").unwrap(),
        ];
        let h = 1e-4;
        let mut checked = 0;
        'outer: for f in &fields {
            for _ in 0..40 {
                let x = [
                    rng.gen_range(-1.6..1.6),
                    rng.gen_range(-1.6..1.6),
                    rng.gen_range(-1.4..1.4),
                ];
                let (jre, _) = f.eval_jet(&x, 2).unwrap();
                if jre.value().abs() < 1e-3 {
                    continue;
                }
                let shape = jre.shape.clone();
                for v in 0..3 {
                    let mut xp = x;
                    xp[v] += h;
                    let mut xm = x;
                    xm[v] -= h;
                    let fp = f.eval_jet(&xp, 0).unwrap().0.value();
                    let fm = f.eval_jet(&xm, 0).unwrap().0.value();
                    let fd = (fp - fm) / (2.0 * h);
                    let mut e = vec![0u8; 3];
                    e[v] = 1;
                    let exact = jre.c[shape.position(&e).unwrap()];
                    let scale = exact.abs().max(1e-3);
                    assert!(
                        (fd - exact).abs() < 1e-6 * scale.max(1.0),
                        "field {} var {v}: fd {fd} vs jet {exact}",
                        f.id
                    );
                }
                checked += 1;
                if checked >= 50 {
                    break 'outer;
                }
            }
        }
        assert!(checked >= 20, "too few interior sample points: {checked}");
    }

    #[test]
    fn conjugation_commutes_with_jets() {
        let model = GroupModel::heisenberg(1);
        let f = default_field(&model, "complex").unwrap();
        let g = f.conj();
        let x = [0.9, 0.3, 0.2];
        let (fre, fim) = f.eval_jet(&x, 2).unwrap();
        let (gre, gim) = g.eval_jet(&x, 2).unwrap();
        for i in 0..fre.c.len() {
            assert!((fre.c[i] - gre.c[i]).abs() < 1e-14);
            assert!((fim.c[i] + gim.c[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn extremizer_exponent_cancels_on_r3() {
        // N = 3, ε = 1/2 ⇒ the radial power is |x|^0 and f equals the cutoff
        let model = GroupModel::euclidean_isotropic(3);
        let cutoff = log_radial_bump(&model, 1.0, 0.5).unwrap();
        let f = hardy_extremizer_family(&model, 0.5, &cutoff).unwrap();
        let x = [0.8, 0.3, -0.2];
        let a = f.eval_jet(&x, 1).unwrap().0;
        let b = cutoff.eval_jet(&x, 1).unwrap().0;
        for i in 0..a.c.len() {
            assert!((a.c[i] - b.c[i]).abs() < 1e-13);
        }
        assert!(hardy_extremizer_family(&model, 0.0, &cutoff).is_err());
        assert!(hardy_extremizer_family(&model, -0.1, &cutoff).is_err());
    }

    #[test]
    fn t_bump_contract() {
        let model = GroupModel::heisenberg(1);
        let u = log_radial_bump(&model, 1.0, 0.5).unwrap();
        assert!(!u.is_compactly_supported());
        // infinite halfwidth = constant 1 on the t-range: rejected
        assert!(tensor_with_t_bump(&u, 0.0, f64::INFINITY, None).is_err());
        let f = tensor_with_t_bump(&u, 0.0, 1.5, None).unwrap();
        assert!(f.is_compactly_supported());
    }
}
