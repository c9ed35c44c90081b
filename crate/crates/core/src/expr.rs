//! Closed-form scalar expressions with jet evaluation.
//!
//! The node set is deliberately small: coordinates, exact rational constants,
//! ring operations, integer powers (negative allowed away from zeros), real
//! powers / exp / log of strictly positive subexpressions, the first-stratum
//! norm, the model quasi-norm, and two smooth bump profiles. Everything the
//! field catalog needs factors through these.
//!
//! Expressions built from coordinates, rational constants, ring operations
//! and integer powers evaluate to exact rational jets; the remaining nodes
//! are numeric-only.

use crate::error::{CoreError, Result};
use crate::group::{GroupModel, QuasiNormSpec};
use crate::jet::{Jet, JetShape};
use crate::scalar::{format_rational, parse_rational, rational_to_f64, Ring};
use num_rational::BigRational;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Coord(usize),
    ConstRat(BigRational),
    ConstF(f64),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Neg(Box<Expr>),
    IntPow(Box<Expr>, i32),
    RealPow(Box<Expr>, f64),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    /// |x'|² — sum of squares of the first-stratum coordinates (polynomial).
    StratumNormSq,
    /// |x'| — numeric only.
    StratumNorm,
    /// Model quasi-norm |x| — numeric only.
    QuasiNorm,
    /// exp(−1/(1−u²)) with u = log(arg/r0)/s for |u| < 1, else 0.
    LogBump { arg: Box<Expr>, r0: f64, s: f64 },
    /// exp(−1/(1−u²)) with u = (arg−center)/halfwidth for |u| < 1, else 0.
    WinBump {
        arg: Box<Expr>,
        center: f64,
        halfwidth: f64,
    },
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::ConstF(v)
    }

    pub fn rat(n: i64, d: i64) -> Expr {
        Expr::ConstRat(BigRational::from_ratio(n, d))
    }

    pub fn add2(a: Expr, b: Expr) -> Expr {
        Expr::Add(vec![a, b])
    }

    pub fn mul2(a: Expr, b: Expr) -> Expr {
        Expr::Mul(vec![a, b])
    }
}

/// Evaluation context: the model fixes the stratum dimension and quasi-norm;
/// `nvars` is the number of jet variables (ambient dim, or 1 for t-profiles).
pub struct EvalCtx<'a> {
    pub model: &'a GroupModel,
    pub nvars: usize,
    pub stratum_dim: usize,
}

impl<'a> EvalCtx<'a> {
    pub fn ambient(model: &'a GroupModel) -> Self {
        EvalCtx {
            model,
            nvars: model.ambient_dim(),
            stratum_dim: model.stratum_dim(),
        }
    }

    /// Context for one-variable profiles (the Heisenberg t-factor).
    pub fn scalar_var(model: &'a GroupModel) -> Self {
        EvalCtx {
            model,
            nvars: 1,
            stratum_dim: 0,
        }
    }
}

/// Bump profile b(u) = exp(−1/(1−u²)) on |u| < 1 as a jet of the inner
/// expression `u`; exactly zero outside (all coefficients).
fn bump_of(u: &Jet<f64>) -> Jet<f64> {
    let v = u.value();
    if v.abs() >= 1.0 {
        return Jet::zero(u.shape.clone(), u.ord);
    }
    // 1 - u^2
    let one = Jet::constant(u.shape.clone(), u.ord, 1.0);
    let w = one.add(&u.mul(u).neg());
    let inv = w.recip().expect("1-u^2 > 0 inside the bump support");
    inv.neg().exp()
}

pub fn eval_f64(expr: &Expr, ctx: &EvalCtx, x: &[f64], order: usize) -> Result<Jet<f64>> {
    let shape = JetShape::get(ctx.nvars, order);
    eval_f64_inner(expr, ctx, x, &shape, order)
}

/// Same as [`eval_f64`] but reusing a prebuilt shape (hot loops).
pub fn eval_f64_shaped(
    expr: &Expr,
    ctx: &EvalCtx,
    x: &[f64],
    shape: &Arc<JetShape>,
) -> Result<Jet<f64>> {
    eval_f64_inner(expr, ctx, x, shape, shape.order)
}

fn eval_f64_inner(
    expr: &Expr,
    ctx: &EvalCtx,
    x: &[f64],
    shape: &Arc<JetShape>,
    order: usize,
) -> Result<Jet<f64>> {
    match expr {
        Expr::Coord(i) => {
            if *i >= ctx.nvars {
                return Err(CoreError::Field(format!(
                    "coordinate {i} out of range for {} variables",
                    ctx.nvars
                )));
            }
            Ok(Jet::coordinate(shape.clone(), order, *i, x[*i]))
        }
        Expr::ConstRat(r) => Ok(Jet::constant(shape.clone(), order, rational_to_f64(r))),
        Expr::ConstF(v) => Ok(Jet::constant(shape.clone(), order, *v)),
        Expr::Add(es) => {
            let mut acc = Jet::zero(shape.clone(), order);
            for e in es {
                acc.add_assign(&eval_f64_inner(e, ctx, x, shape, order)?);
            }
            Ok(acc)
        }
        Expr::Mul(es) => {
            let mut acc = Jet::constant(shape.clone(), order, 1.0);
            for e in es {
                let j = eval_f64_inner(e, ctx, x, shape, order)?;
                if j.is_zero() {
                    return Ok(Jet::zero(shape.clone(), order));
                }
                acc = acc.mul(&j);
            }
            Ok(acc)
        }
        Expr::Neg(e) => Ok(eval_f64_inner(e, ctx, x, shape, order)?.neg()),
        Expr::IntPow(e, k) => eval_f64_inner(e, ctx, x, shape, order)?.powi(*k),
        Expr::RealPow(e, p) => eval_f64_inner(e, ctx, x, shape, order)?.powf(*p),
        Expr::Exp(e) => Ok(eval_f64_inner(e, ctx, x, shape, order)?.exp()),
        Expr::Log(e) => eval_f64_inner(e, ctx, x, shape, order)?.ln(),
        Expr::StratumNormSq => Ok(stratum_norm_sq_jet(ctx, x, shape, order)),
        Expr::StratumNorm => stratum_norm_sq_jet(ctx, x, shape, order).sqrt(),
        Expr::QuasiNorm => quasi_norm_jet(ctx, x, shape, order),
        Expr::LogBump { arg, r0, s } => {
            let a = eval_f64_inner(arg, ctx, x, shape, order)?;
            if !(a.value() > 0.0) {
                return Ok(Jet::zero(shape.clone(), order));
            }
            // u = (log a - log r0)/s
            let u = a
                .ln()?
                .add(&Jet::constant(shape.clone(), order, -r0.ln()))
                .scale(&(1.0 / s));
            Ok(bump_of(&u))
        }
        Expr::WinBump {
            arg,
            center,
            halfwidth,
        } => {
            let a = eval_f64_inner(arg, ctx, x, shape, order)?;
            let u = a
                .add(&Jet::constant(shape.clone(), order, -*center))
                .scale(&(1.0 / halfwidth));
            Ok(bump_of(&u))
        }
    }
}

pub fn stratum_norm_sq_jet(
    ctx: &EvalCtx,
    x: &[f64],
    shape: &Arc<JetShape>,
    order: usize,
) -> Jet<f64> {
    let mut acc = Jet::zero(shape.clone(), order);
    for i in 0..ctx.stratum_dim {
        let c = Jet::coordinate(shape.clone(), order, i, x[i]);
        acc.add_assign(&c.mul(&c));
    }
    acc
}

fn quasi_norm_jet(ctx: &EvalCtx, x: &[f64], shape: &Arc<JetShape>, order: usize) -> Result<Jet<f64>> {
    match ctx.model {
        GroupModel::Euclidean(m) => match m.qnorm {
            QuasiNormSpec::Euclidean => stratum_norm_sq_jet(ctx, x, shape, order).sqrt(),
            QuasiNormSpec::Anisotropic { m: mm } => {
                let mut acc = Jet::zero(shape.clone(), order);
                for (i, w) in m.dilation.weights().iter().enumerate() {
                    let e = BigRational::from_int(2 * mm as i64) / w.clone();
                    let e: i32 = rational_to_f64(&e) as i32;
                    let c = Jet::coordinate(shape.clone(), order, i, x[i]);
                    acc.add_assign(&c.powi(e)?);
                }
                acc.powf(1.0 / (2.0 * mm as f64))
            }
        },
        GroupModel::Heisenberg { .. } => Err(CoreError::Field(
            "quasi-norm expressions are only realized on euclidean models".into(),
        )),
    }
}

/// If the expression is a univariate function of |x'|², return it with that
/// argument substituted by the single variable `Coord(0)`; hot sweeps then
/// evaluate a one-variable jet and chain-rule through the squared norm.
pub fn as_normsq_profile(e: &Expr) -> Option<Expr> {
    fn go(e: &Expr) -> Option<Expr> {
        match e {
            Expr::StratumNormSq => Some(Expr::Coord(0)),
            Expr::Coord(_) | Expr::StratumNorm | Expr::QuasiNorm => None,
            Expr::ConstRat(_) | Expr::ConstF(_) => Some(e.clone()),
            Expr::Add(es) => Some(Expr::Add(es.iter().map(go).collect::<Option<Vec<_>>>()?)),
            Expr::Mul(es) => Some(Expr::Mul(es.iter().map(go).collect::<Option<Vec<_>>>()?)),
            Expr::Neg(b) => Some(Expr::Neg(Box::new(go(b)?))),
            Expr::IntPow(b, k) => Some(Expr::IntPow(Box::new(go(b)?), *k)),
            Expr::RealPow(b, p) => Some(Expr::RealPow(Box::new(go(b)?), *p)),
            Expr::Exp(b) => Some(Expr::Exp(Box::new(go(b)?))),
            Expr::Log(b) => Some(Expr::Log(Box::new(go(b)?))),
            Expr::LogBump { arg, r0, s } => Some(Expr::LogBump {
                arg: Box::new(go(arg)?),
                r0: *r0,
                s: *s,
            }),
            Expr::WinBump {
                arg,
                center,
                halfwidth,
            } => Some(Expr::WinBump {
                arg: Box::new(go(arg)?),
                center: *center,
                halfwidth: *halfwidth,
            }),
        }
    }
    go(e)
}

/// Exact rational jet; errors on any numeric-only node.
pub fn eval_exact(
    expr: &Expr,
    ctx: &EvalCtx,
    x: &[BigRational],
    order: usize,
) -> Result<Jet<BigRational>> {
    let shape = JetShape::get(ctx.nvars, order);
    eval_exact_inner(expr, ctx, x, &shape, order)
}

fn eval_exact_inner(
    expr: &Expr,
    ctx: &EvalCtx,
    x: &[BigRational],
    shape: &Arc<JetShape>,
    order: usize,
) -> Result<Jet<BigRational>> {
    match expr {
        Expr::Coord(i) => Ok(Jet::coordinate(shape.clone(), order, *i, x[*i].clone())),
        Expr::ConstRat(r) => Ok(Jet::constant(shape.clone(), order, r.clone())),
        Expr::Add(es) => {
            let mut acc = Jet::zero(shape.clone(), order);
            for e in es {
                acc.add_assign(&eval_exact_inner(e, ctx, x, shape, order)?);
            }
            Ok(acc)
        }
        Expr::Mul(es) => {
            let mut acc = Jet::constant(shape.clone(), order, BigRational::from_int(1));
            for e in es {
                acc = acc.mul(&eval_exact_inner(e, ctx, x, shape, order)?);
            }
            Ok(acc)
        }
        Expr::Neg(e) => Ok(eval_exact_inner(e, ctx, x, shape, order)?.neg()),
        Expr::IntPow(e, k) => eval_exact_inner(e, ctx, x, shape, order)?.powi(*k),
        Expr::StratumNormSq => {
            let mut acc = Jet::zero(shape.clone(), order);
            for i in 0..ctx.stratum_dim {
                let c = Jet::coordinate(shape.clone(), order, i, x[i].clone());
                acc.add_assign(&c.mul(&c));
            }
            Ok(acc)
        }
        other => Err(CoreError::NotExact(format!(
            "node '{}' has no exact rational jet",
            head_name(other)
        ))),
    }
}

fn head_name(e: &Expr) -> &'static str {
    match e {
        Expr::Coord(_) => "coord",
        Expr::ConstRat(_) => "const",
        Expr::ConstF(_) => "constf",
        Expr::Add(_) => "add",
        Expr::Mul(_) => "mul",
        Expr::Neg(_) => "neg",
        Expr::IntPow(..) => "pow",
        Expr::RealPow(..) => "rpow",
        Expr::Exp(_) => "exp",
        Expr::Log(_) => "log",
        Expr::StratumNormSq => "norm1sq",
        Expr::StratumNorm => "norm1",
        Expr::QuasiNorm => "qnorm",
        Expr::LogBump { .. } => "bump",
        Expr::WinBump { .. } => "tbump",
    }
}

/// Complex-valued expression as a pair of real fields.
#[derive(Debug, Clone, PartialEq)]
pub struct CExpr {
    pub re: Expr,
    pub im: Option<Expr>,
}

impl CExpr {
    pub fn real(re: Expr) -> CExpr {
        CExpr { re, im: None }
    }

    pub fn complex(re: Expr, im: Expr) -> CExpr {
        CExpr { re, im: Some(im) }
    }

    pub fn is_complex(&self) -> bool {
        self.im.is_some()
    }

    pub fn conj(&self) -> CExpr {
        CExpr {
            re: self.re.clone(),
            im: self.im.as_ref().map(|e| Expr::Neg(Box::new(e.clone()))),
        }
    }
}

// ---------------------------------------------------------------------------
// prefix-notation serialization
// ---------------------------------------------------------------------------

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Coord(i) => write!(f, "(x {i})"),
            Expr::ConstRat(r) => write!(f, "{}", format_rational(r)),
            Expr::ConstF(v) => write!(f, "{v}"),
            Expr::Add(es) => {
                write!(f, "(add")?;
                for e in es {
                    write!(f, " {e}")?;
                }
                write!(f, ")")
            }
            Expr::Mul(es) => {
                write!(f, "(mul")?;
                for e in es {
                    write!(f, " {e}")?;
                }
                write!(f, ")")
            }
            Expr::Neg(e) => write!(f, "(neg {e})"),
            Expr::IntPow(e, k) => write!(f, "(pow {e} {k})"),
            Expr::RealPow(e, p) => write!(f, "(rpow {e} {p})"),
            Expr::Exp(e) => write!(f, "(exp {e})"),
            Expr::Log(e) => write!(f, "(log {e})"),
            Expr::StratumNormSq => write!(f, "(norm1sq)"),
            Expr::StratumNorm => write!(f, "(norm1)"),
            Expr::QuasiNorm => write!(f, "(qnorm)"),
            Expr::LogBump { arg, r0, s } => write!(f, "(bump {arg} {r0} {s})"),
            Expr::WinBump {
                arg,
                center,
                halfwidth,
            } => write!(f, "(tbump {arg} {center} {halfwidth})"),
        }
    }
}

fn tokenize(s: &str) -> Vec<String> {
    s.replace('(', " ( ")
        .replace(')', " ) ")
        .split_whitespace()
        .map(|t| t.to_string())
        .collect()
}

fn parse_number(tok: &str) -> Result<Expr> {
    if let Some(r) = parse_rational(tok) {
        return Ok(Expr::ConstRat(r));
    }
    tok.parse::<f64>()
        .map(Expr::ConstF)
        .map_err(|_| CoreError::Field(format!("bad number token '{tok}'")))
}

fn parse_f64_tok(tok: &str) -> Result<f64> {
    if let Some(r) = parse_rational(tok) {
        return Ok(rational_to_f64(&r));
    }
    tok.parse::<f64>()
        .map_err(|_| CoreError::Field(format!("bad number token '{tok}'")))
}

fn parse_tokens(toks: &[String], pos: &mut usize) -> Result<Expr> {
    let err = |m: &str| CoreError::Field(format!("expression parse error: {m}"));
    if *pos >= toks.len() {
        return Err(err("unexpected end"));
    }
    let tok = &toks[*pos];
    *pos += 1;
    if tok != "(" {
        return parse_number(tok);
    }
    let head = toks.get(*pos).ok_or_else(|| err("missing head"))?.clone();
    *pos += 1;
    let mut args: Vec<Expr> = Vec::new();
    let mut raw: Vec<String> = Vec::new();
    while *pos < toks.len() && toks[*pos] != ")" {
        if toks[*pos] == "(" {
            args.push(parse_tokens(toks, pos)?);
            raw.push(String::new());
        } else {
            raw.push(toks[*pos].clone());
            args.push(parse_number(&toks[*pos])?);
            *pos += 1;
        }
    }
    if *pos >= toks.len() {
        return Err(err("missing close paren"));
    }
    *pos += 1; // consume ')'
    let one_arg = |mut a: Vec<Expr>| -> Result<Box<Expr>> {
        if a.len() != 1 {
            return Err(CoreError::Field(format!("'{head}' takes one argument")));
        }
        Ok(Box::new(a.remove(0)))
    };
    match head.as_str() {
        "x" => {
            if raw.len() != 1 {
                return Err(err("(x i) takes one index"));
            }
            let i: usize = raw[0]
                .parse()
                .map_err(|_| err("bad coordinate index"))?;
            Ok(Expr::Coord(i))
        }
        "add" => Ok(Expr::Add(args)),
        "mul" => Ok(Expr::Mul(args)),
        "neg" => Ok(Expr::Neg(one_arg(args)?)),
        "pow" => {
            if args.len() != 2 {
                return Err(err("(pow e k)"));
            }
            let k: i32 = raw[1].parse().map_err(|_| err("bad integer power"))?;
            Ok(Expr::IntPow(Box::new(args.into_iter().next().unwrap()), k))
        }
        "rpow" => {
            if args.len() != 2 {
                return Err(err("(rpow e p)"));
            }
            let p = parse_f64_tok(&raw[1])?;
            Ok(Expr::RealPow(Box::new(args.into_iter().next().unwrap()), p))
        }
        "exp" => Ok(Expr::Exp(one_arg(args)?)),
        "log" => Ok(Expr::Log(one_arg(args)?)),
        "norm1sq" => Ok(Expr::StratumNormSq),
        "norm1" => Ok(Expr::StratumNorm),
        "qnorm" => Ok(Expr::QuasiNorm),
        "bump" => {
            if args.len() != 3 {
                return Err(err("(bump arg r0 s)"));
            }
            let r0 = parse_f64_tok(&raw[1])?;
            let s = parse_f64_tok(&raw[2])?;
            Ok(Expr::LogBump {
                arg: Box::new(args.into_iter().next().unwrap()),
                r0,
                s,
            })
        }
        "tbump" => {
            if args.len() != 3 {
                return Err(err("(tbump arg c w)"));
            }
            let c = parse_f64_tok(&raw[1])?;
            let w = parse_f64_tok(&raw[2])?;
            Ok(Expr::WinBump {
                arg: Box::new(args.into_iter().next().unwrap()),
                center: c,
                halfwidth: w,
            })
        }
        other => Err(err(&format!("unknown head '{other}'"))),
    }
}

pub fn parse_expr(s: &str) -> Result<Expr> {
    let toks = tokenize(s);
    let mut pos = 0;
    let e = parse_tokens(&toks, &mut pos)?;
    if pos != toks.len() {
        return Err(CoreError::Field("trailing tokens in expression".into()));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Ring;

    #[test]
    fn taylor_of_square() {
        let model = GroupModel::euclidean_isotropic(1);
        let ctx = EvalCtx::ambient(&model);
        let f = Expr::IntPow(Box::new(Expr::Coord(0)), 2);
        let j = eval_f64(&f, &ctx, &[3.0], 2).unwrap();
        assert_eq!(j.c, vec![9.0, 6.0, 1.0]);
    }

    #[test]
    fn exact_bilinear_jet() {
        let model = GroupModel::euclidean_isotropic(2);
        let ctx = EvalCtx::ambient(&model);
        let f = Expr::mul2(Expr::Coord(0), Expr::Coord(1));
        let x = vec![BigRational::from_int(2), BigRational::from_int(5)];
        let j = eval_exact(&f, &ctx, &x, 2).unwrap();
        let shape = j.shape.clone();
        assert_eq!(j.value(), BigRational::from_int(10));
        assert_eq!(j.c[shape.position(&[1, 0]).unwrap()], BigRational::from_int(5));
        assert_eq!(j.c[shape.position(&[0, 1]).unwrap()], BigRational::from_int(2));
        assert_eq!(j.c[shape.position(&[1, 1]).unwrap()], BigRational::from_int(1));
        assert_eq!(j.c[shape.position(&[2, 0]).unwrap()], BigRational::from_int(0));
    }

    #[test]
    fn exact_rejects_transcendental_nodes() {
        let model = GroupModel::euclidean_isotropic(1);
        let ctx = EvalCtx::ambient(&model);
        let f = Expr::Exp(Box::new(Expr::Coord(0)));
        assert!(eval_exact(&f, &ctx, &[BigRational::from_int(0)], 2).is_err());
    }

    #[test]
    fn log_of_nonpositive_errors() {
        let model = GroupModel::euclidean_isotropic(1);
        let ctx = EvalCtx::ambient(&model);
        let f = Expr::Log(Box::new(Expr::Coord(0)));
        assert!(eval_f64(&f, &ctx, &[-1.0], 1).is_err());
        assert!(eval_f64(&f, &ctx, &[2.0], 1).is_ok());
    }

    #[test]
    fn bump_value_and_support() {
        let model = GroupModel::euclidean_isotropic(2);
        let ctx = EvalCtx::ambient(&model);
        let f = Expr::LogBump {
            arg: Box::new(Expr::StratumNorm),
            r0: 1.0,
            s: 0.5,
        };
        // at |x| = r0 the bump equals e^{-1}
        let j = eval_f64(&f, &ctx, &[1.0, 0.0], 2).unwrap();
        assert!((j.value() - (-1.0f64).exp()).abs() < 1e-14);
        // at the support boundary and beyond: exactly the zero jet
        let j = eval_f64(&f, &ctx, &[(0.5f64).exp(), 0.0], 2).unwrap();
        assert!(j.is_zero());
        let j = eval_f64(&f, &ctx, &[2.0, 0.0], 2).unwrap();
        assert!(j.is_zero());
    }

    #[test]
    fn prefix_roundtrip() {
        let s = "(mul (pow (norm1) -1) (bump (norm1) 1 1/2))";
        let e = parse_expr(s).unwrap();
        let printed = e.to_string();
        let e2 = parse_expr(&printed).unwrap();
        assert_eq!(e, e2);
    }
}
