//! Differential-operator ASTs over the model vector fields, applied through
//! jets. Over `BigRational` the application is exact; over `f64` it backs the
//! quadrature paths.

use crate::error::{CoreError, Result};
use crate::expr::{eval_exact, eval_f64, EvalCtx, Expr};
use crate::group::GroupModel;
use crate::jet::{Jet, JetShape};
use crate::scalar::{rational_to_f64, Ring};
use num_rational::BigRational;
use num_traits::Zero;
use std::cell::OnceCell;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub enum OpExpr {
    /// ∂/∂xᵢ in ambient coordinates.
    Partial(usize),
    /// Multiplication by the coordinate xᵢ.
    MulCoord(usize),
    /// Multiplication by |x'|^k (first-stratum norm), k ∈ ℤ.
    MulStratumNormPow(i32),
    /// Multiplication by |x|^k (model quasi-norm), numeric paths only.
    MulQuasiNormPow(i32),
    /// Multiplication by an exact rational scalar.
    Scale(BigRational),
    /// Multiplication by the function obtained by applying an operator to a
    /// fixed closed-form expression.
    MulDerived(Box<OpExpr>, Expr),
    Sum(Vec<OpExpr>),
    /// Composition, applied right-to-left: Compose([A, B]) f = A(B f).
    Compose(Vec<OpExpr>),

    // named primitives, expanded per model
    /// X_j on ℍₙ (∂_{x_j} − y_j/2 ∂_t); ∂_j on Euclidean models.
    X(usize),
    /// Y_j on ℍₙ (∂_{y_j} + x_j/2 ∂_t).
    Y(usize),
    /// T = ∂_t (ℍₙ).
    T,
    /// Z = Σ (x_j ∂_{y_j} − y_j ∂_{x_j}) (ℍₙ).
    Z,
    /// Sub-Laplacian Σ X̃_j².
    SubLaplacian,
    /// Euclidean Laplacian in the first-stratum variables.
    DeltaStratum,
    /// j-th horizontal component X̃_j (X_j for j < n, Y_{j−n} otherwise).
    Horizontal(usize),
    /// Radial derivative (Σ νᵢ xᵢ ∂ᵢ)/|x| on Euclidean models.
    Radial,
}

impl OpExpr {
    pub fn identity() -> OpExpr {
        OpExpr::Scale(BigRational::from_int(1))
    }

    pub fn scale_i(k: i64) -> OpExpr {
        OpExpr::Scale(BigRational::from_int(k))
    }

    pub fn scale_q(n: i64, d: i64) -> OpExpr {
        OpExpr::Scale(BigRational::from_ratio(n, d))
    }

    pub fn compose2(a: OpExpr, b: OpExpr) -> OpExpr {
        OpExpr::Compose(vec![a, b])
    }

    /// x'·∇_H as Σ x'_j X̃_j.
    pub fn euler_horizontal(model: &GroupModel) -> OpExpr {
        let n = model.stratum_dim();
        OpExpr::Sum(
            (0..n)
                .map(|j| OpExpr::compose2(OpExpr::MulCoord(j), OpExpr::Horizontal(j)))
                .collect(),
        )
    }

    /// Expand named primitives into base nodes for the given model.
    pub fn expand(&self, model: &GroupModel) -> Result<OpExpr> {
        let heis_n = match model {
            GroupModel::Heisenberg { n } => Some(*n),
            GroupModel::Euclidean(_) => None,
        };
        let t_index = model.ambient_dim() - 1;
        Ok(match self {
            OpExpr::Partial(_)
            | OpExpr::MulCoord(_)
            | OpExpr::MulStratumNormPow(_)
            | OpExpr::MulQuasiNormPow(_)
            | OpExpr::Scale(_) => self.clone(),
            OpExpr::MulDerived(op, base) => {
                OpExpr::MulDerived(Box::new(op.expand(model)?), base.clone())
            }
            OpExpr::Sum(es) => OpExpr::Sum(
                es.iter()
                    .map(|e| e.expand(model))
                    .collect::<Result<Vec<_>>>()?,
            ),
            OpExpr::Compose(es) => OpExpr::Compose(
                es.iter()
                    .map(|e| e.expand(model))
                    .collect::<Result<Vec<_>>>()?,
            ),
            OpExpr::X(j) => match heis_n {
                None => OpExpr::Partial(*j),
                Some(n) => {
                    if *j >= n {
                        return Err(CoreError::BadOperator(format!("X_{j} out of range")));
                    }
                    OpExpr::Sum(vec![
                        OpExpr::Partial(*j),
                        OpExpr::Compose(vec![
                            OpExpr::scale_q(-1, 2),
                            OpExpr::MulCoord(n + j),
                            OpExpr::Partial(t_index),
                        ]),
                    ])
                }
            },
            OpExpr::Y(j) => match heis_n {
                None => {
                    return Err(CoreError::BadOperator(
                        "Y fields exist only on heisenberg models".into(),
                    ))
                }
                Some(n) => {
                    if *j >= n {
                        return Err(CoreError::BadOperator(format!("Y_{j} out of range")));
                    }
                    OpExpr::Sum(vec![
                        OpExpr::Partial(n + j),
                        OpExpr::Compose(vec![
                            OpExpr::scale_q(1, 2),
                            OpExpr::MulCoord(*j),
                            OpExpr::Partial(t_index),
                        ]),
                    ])
                }
            },
            OpExpr::T => match heis_n {
                None => {
                    return Err(CoreError::BadOperator(
                        "T exists only on heisenberg models".into(),
                    ))
                }
                Some(_) => OpExpr::Partial(t_index),
            },
            OpExpr::Z => match heis_n {
                None => {
                    return Err(CoreError::BadOperator(
                        "Z exists only on heisenberg models".into(),
                    ))
                }
                Some(n) => OpExpr::Sum(
                    (0..n)
                        .flat_map(|j| {
                            vec![
                                OpExpr::Compose(vec![OpExpr::MulCoord(j), OpExpr::Partial(n + j)]),
                                OpExpr::Compose(vec![
                                    OpExpr::scale_i(-1),
                                    OpExpr::MulCoord(n + j),
                                    OpExpr::Partial(j),
                                ]),
                            ]
                        })
                        .collect(),
                ),
            },
            OpExpr::SubLaplacian => {
                let n = model.stratum_dim();
                OpExpr::Sum(
                    (0..n)
                        .map(|j| {
                            let h = OpExpr::Horizontal(j);
                            OpExpr::compose2(h.clone(), h)
                        })
                        .collect::<Vec<_>>(),
                )
                .expand(model)?
            }
            OpExpr::DeltaStratum => {
                let n = model.stratum_dim();
                OpExpr::Sum(
                    (0..n)
                        .map(|j| OpExpr::compose2(OpExpr::Partial(j), OpExpr::Partial(j)))
                        .collect(),
                )
            }
            OpExpr::Horizontal(j) => {
                let n = model.stratum_dim();
                if *j >= n {
                    return Err(CoreError::BadOperator(format!(
                        "horizontal component {j} out of range"
                    )));
                }
                match heis_n {
                    None => OpExpr::Partial(*j),
                    Some(hn) => {
                        if *j < hn {
                            OpExpr::X(*j).expand(model)?
                        } else {
                            OpExpr::Y(*j - hn).expand(model)?
                        }
                    }
                }
            }
            OpExpr::Radial => match model {
                GroupModel::Euclidean(m) => {
                    let terms = m
                        .dilation
                        .weights()
                        .iter()
                        .enumerate()
                        .map(|(i, w)| {
                            OpExpr::Compose(vec![
                                OpExpr::Scale(w.clone()),
                                OpExpr::MulCoord(i),
                                OpExpr::Partial(i),
                            ])
                        })
                        .collect();
                    OpExpr::Compose(vec![OpExpr::MulQuasiNormPow(-1), OpExpr::Sum(terms)])
                }
                GroupModel::Heisenberg { .. } => {
                    return Err(CoreError::BadOperator(
                        "the radial derivative is realized on euclidean models only".into(),
                    ))
                }
            },
        })
    }

    /// Maximum number of partial derivatives along any composition chain,
    /// computed on the expanded form.
    pub fn order(&self, model: &GroupModel) -> Result<usize> {
        fn go(e: &OpExpr) -> usize {
            match e {
                OpExpr::Partial(_) => 1,
                OpExpr::Sum(es) => es.iter().map(go).max().unwrap_or(0),
                OpExpr::Compose(es) => es.iter().map(go).sum(),
                _ => 0,
            }
        }
        Ok(go(&self.expand(model)?))
    }

    /// AB − BA.
    pub fn commutator(a: &OpExpr, b: &OpExpr, model: &GroupModel) -> Result<OpExpr> {
        let total = a.order(model)? + b.order(model)?;
        if total > crate::jet::MAX_ORDER {
            return Err(CoreError::BadOperator(format!(
                "commutator order {total} exceeds the jet limit"
            )));
        }
        Ok(OpExpr::Sum(vec![
            OpExpr::compose2(a.clone(), b.clone()),
            OpExpr::Compose(vec![OpExpr::scale_i(-1), b.clone(), a.clone()]),
        ]))
    }
}

/// The two-parameter factorization pair (T_{α,β}, T⁺_{α,β}):
/// T = −𝓛 + α (x'·∇_H)/|x'|² + β/|x'|² and
/// T⁺ = −𝓛 − α (x'·∇_H)/|x'|² − (α(N−2) − β)/|x'|².
pub fn factorization_pair(
    model: &GroupModel,
    alpha: &BigRational,
    beta: &BigRational,
) -> (OpExpr, OpExpr) {
    let n_minus_2 = BigRational::from_int(model.stratum_dim() as i64 - 2);
    let euler = OpExpr::euler_horizontal(model);
    let t = OpExpr::Sum(vec![
        OpExpr::compose2(OpExpr::scale_i(-1), OpExpr::SubLaplacian),
        OpExpr::Compose(vec![
            OpExpr::Scale(alpha.clone()),
            OpExpr::MulStratumNormPow(-2),
            euler.clone(),
        ]),
        OpExpr::compose2(OpExpr::Scale(beta.clone()), OpExpr::MulStratumNormPow(-2)),
    ]);
    let zc = -(alpha.clone() * n_minus_2 - beta.clone());
    let t_adj = OpExpr::Sum(vec![
        OpExpr::compose2(OpExpr::scale_i(-1), OpExpr::SubLaplacian),
        OpExpr::Compose(vec![
            OpExpr::Scale(-alpha.clone()),
            OpExpr::MulStratumNormPow(-2),
            euler,
        ]),
        OpExpr::compose2(OpExpr::Scale(zc), OpExpr::MulStratumNormPow(-2)),
    ]);
    (t, t_adj)
}

/// The Heisenberg primitive set {X_j, Y_j, T, Z, 𝓛, Δ_{x̃'}}.
pub struct HeisenbergPrimitives {
    pub x: Vec<OpExpr>,
    pub y: Vec<OpExpr>,
    pub t: OpExpr,
    pub z: OpExpr,
    pub sub_laplacian: OpExpr,
    pub delta_stratum: OpExpr,
}

pub fn heisenberg_primitives(n: usize) -> HeisenbergPrimitives {
    assert!(n >= 1);
    HeisenbergPrimitives {
        x: (0..n).map(OpExpr::X).collect(),
        y: (0..n).map(OpExpr::Y).collect(),
        t: OpExpr::T,
        z: OpExpr::Z,
        sub_laplacian: OpExpr::SubLaplacian,
        delta_stratum: OpExpr::DeltaStratum,
    }
}

// ---------------------------------------------------------------------------
// application to jets
// ---------------------------------------------------------------------------

/// Scalars that operators can be applied over. The hooks isolate everything
/// that differs between the exact and the floating paths.
pub trait OpScalar: Ring {
    fn eval_expr(expr: &Expr, ctx: &EvalCtx, x: &[Self], order: usize) -> Result<Jet<Self>>;
    fn norm_pow(norm_sq: &Jet<Self>, k: i32) -> Result<Jet<Self>>;
    fn from_big_rational(r: &BigRational) -> Self;
}

impl OpScalar for BigRational {
    fn eval_expr(expr: &Expr, ctx: &EvalCtx, x: &[Self], order: usize) -> Result<Jet<Self>> {
        eval_exact(expr, ctx, x, order)
    }
    fn norm_pow(norm_sq: &Jet<Self>, k: i32) -> Result<Jet<Self>> {
        if k.rem_euclid(2) != 0 {
            return Err(CoreError::NotExact(format!(
                "|x'|^{k} is irrational at rational points"
            )));
        }
        norm_sq.powi(k / 2)
    }
    fn from_big_rational(r: &BigRational) -> Self {
        r.clone()
    }
}

impl OpScalar for f64 {
    fn eval_expr(expr: &Expr, ctx: &EvalCtx, x: &[Self], order: usize) -> Result<Jet<Self>> {
        eval_f64(expr, ctx, x, order)
    }
    fn norm_pow(norm_sq: &Jet<Self>, k: i32) -> Result<Jet<Self>> {
        if k.rem_euclid(2) == 0 {
            norm_sq.powi(k / 2)
        } else {
            norm_sq.powf(k as f64 / 2.0)
        }
    }
    fn from_big_rational(r: &BigRational) -> Self {
        rational_to_f64(r)
    }
}

/// Per-point application context; caches the |x'|² and quasi-norm jets.
pub struct ApplyCtx<'a, T: OpScalar> {
    pub model: &'a GroupModel,
    pub point: &'a [T],
    pub shape: Arc<JetShape>,
    norm_sq: OnceCell<Jet<T>>,
}

impl<'a, T: OpScalar> ApplyCtx<'a, T> {
    pub fn new(model: &'a GroupModel, point: &'a [T], shape: Arc<JetShape>) -> Self {
        ApplyCtx {
            model,
            point,
            shape,
            norm_sq: OnceCell::new(),
        }
    }

    fn norm_sq_jet(&self) -> &Jet<T> {
        self.norm_sq.get_or_init(|| {
            let ns = self.model.stratum_dim();
            let ord = self.shape.order;
            let mut acc = Jet::zero(self.shape.clone(), ord);
            for i in 0..ns {
                let c = Jet::coordinate(self.shape.clone(), ord, i, self.point[i].clone());
                acc.add_assign(&c.mul(&c));
            }
            acc
        })
    }

    fn eval_ctx(&self) -> EvalCtx<'a> {
        EvalCtx {
            model: self.model,
            nvars: self.model.ambient_dim(),
            stratum_dim: self.model.stratum_dim(),
        }
    }
}

/// Apply an expanded base-node operator to a jet. The result is valid to
/// `f.ord − order(op)`.
pub fn apply<T: OpScalar>(op: &OpExpr, f: &Jet<T>, ctx: &ApplyCtx<T>) -> Result<Jet<T>> {
    match op {
        OpExpr::Partial(i) => {
            if f.ord == 0 {
                return Err(CoreError::BadOperator(
                    "jet order exhausted by derivatives".into(),
                ));
            }
            Ok(f.derivative(*i))
        }
        OpExpr::MulCoord(i) => {
            let c = Jet::coordinate(ctx.shape.clone(), f.ord, *i, ctx.point[*i].clone());
            Ok(f.mul(&c))
        }
        OpExpr::MulStratumNormPow(k) => {
            let mut nsq = ctx.norm_sq_jet().clone();
            nsq.truncate(f.ord);
            let w = T::norm_pow(&nsq, *k)?;
            Ok(f.mul(&w))
        }
        OpExpr::MulQuasiNormPow(k) => {
            let ectx = ctx.eval_ctx();
            let q = T::eval_expr(&Expr::QuasiNorm, &ectx, ctx.point, f.ord)?;
            Ok(f.mul(&q.powi(*k)?))
        }
        OpExpr::Scale(r) => Ok(f.scale(&T::from_big_rational(r))),
        OpExpr::MulDerived(inner, base) => {
            let iord = inner.order(ctx.model)?;
            let ectx = ctx.eval_ctx();
            let base_jet = T::eval_expr(base, &ectx, ctx.point, f.ord + iord)?;
            let expanded = inner.expand(ctx.model)?;
            let mut mult = apply(&expanded, &base_jet, ctx)?;
            mult.truncate(f.ord);
            Ok(f.mul(&mult))
        }
        OpExpr::Sum(es) => {
            let mut acc: Option<Jet<T>> = None;
            for e in es {
                let j = apply(e, f, ctx)?;
                match &mut acc {
                    None => acc = Some(j),
                    Some(a) => {
                        let ord = a.ord.min(j.ord);
                        a.truncate(ord);
                        a.add_assign(&j);
                    }
                }
            }
            acc.ok_or_else(|| CoreError::BadOperator("empty operator sum".into()))
        }
        OpExpr::Compose(es) => {
            let mut cur = f.clone();
            for e in es.iter().rev() {
                cur = apply(e, &cur, ctx)?;
            }
            Ok(cur)
        }
        named => {
            let expanded = named.expand(ctx.model)?;
            apply(&expanded, f, ctx)
        }
    }
}

/// Exact rational value of (op f)(x) for a rational-expressible field.
pub fn apply_exact(
    op: &OpExpr,
    f: &Expr,
    model: &GroupModel,
    x: &[BigRational],
) -> Result<BigRational> {
    let order = op.order(model)?;
    if order > crate::jet::MAX_ORDER {
        return Err(CoreError::BadOperator(format!(
            "operator order {order} exceeds the jet limit"
        )));
    }
    let ns = model.stratum_dim();
    if x[..ns].iter().all(|c| c.is_zero()) && needs_norm(op) {
        return Err(CoreError::NearSingular(
            "x' = 0 with a singular multiplier".into(),
        ));
    }
    let ectx = EvalCtx::ambient(model);
    let jet = eval_exact(f, &ectx, x, order)?;
    let shape = jet.shape.clone();
    let ctx = ApplyCtx::new(model, x, shape);
    let expanded = op.expand(model)?;
    Ok(apply(&expanded, &jet, &ctx)?.value())
}

fn needs_norm(op: &OpExpr) -> bool {
    match op {
        OpExpr::MulStratumNormPow(k) => *k < 0,
        OpExpr::MulQuasiNormPow(k) => *k < 0,
        OpExpr::Sum(es) | OpExpr::Compose(es) => es.iter().any(needs_norm),
        OpExpr::MulDerived(inner, _) => needs_norm(inner),
        OpExpr::SubLaplacian | OpExpr::DeltaStratum => false,
        OpExpr::Radial => true,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Ring;

    fn qi(n: i64) -> BigRational {
        BigRational::from_int(n)
    }

    #[test]
    fn second_partial_of_cube() {
        let model = GroupModel::euclidean_isotropic(2);
        let op = OpExpr::compose2(OpExpr::Partial(0), OpExpr::Partial(0));
        let f = Expr::IntPow(Box::new(Expr::Coord(0)), 3);
        let v = apply_exact(&op, &f, &model, &[qi(2), qi(1)]).unwrap();
        assert_eq!(v, qi(12));
    }

    #[test]
    fn stratum_norm_reciprocal() {
        let model = GroupModel::heisenberg(1);
        let op = OpExpr::MulStratumNormPow(-2);
        let f = Expr::rat(1, 1);
        let v = apply_exact(&op, &f, &model, &[qi(1), qi(2), qi(0)]).unwrap();
        assert_eq!(v, BigRational::from_ratio(1, 5));
    }

    #[test]
    fn odd_norm_power_rejected_exactly() {
        let model = GroupModel::heisenberg(1);
        let op = OpExpr::MulStratumNormPow(-1);
        let f = Expr::rat(1, 1);
        assert!(apply_exact(&op, &f, &model, &[qi(1), qi(2), qi(0)]).is_err());
    }

    #[test]
    fn x1_applied_to_t() {
        // X_1 t = -y/2; at (2, 6, 0) this is -3
        let model = GroupModel::heisenberg(1);
        let f = Expr::Coord(2);
        let v = apply_exact(&OpExpr::X(0), &f, &model, &[qi(2), qi(6), qi(0)]).unwrap();
        assert_eq!(v, qi(-3));
    }

    #[test]
    fn sublaplacian_hand_checks() {
        let model = GroupModel::heisenberg(1);
        // L (x^2 + y^2) = 4 everywhere
        let f = Expr::add2(
            Expr::IntPow(Box::new(Expr::Coord(0)), 2),
            Expr::IntPow(Box::new(Expr::Coord(1)), 2),
        );
        let v = apply_exact(&OpExpr::SubLaplacian, &f, &model, &[qi(3), qi(-2), qi(7)]).unwrap();
        assert_eq!(v, qi(4));
        // L t = 0 everywhere
        let v =
            apply_exact(&OpExpr::SubLaplacian, &Expr::Coord(2), &model, &[qi(1), qi(1), qi(1)])
                .unwrap();
        assert_eq!(v, qi(0));
    }

    #[test]
    fn sublaplacian_squared_oracle() {
        // L^2 (x^2 y^2 t) = 8 t on H_1 (hand/CAS expansion), so 8 at (1,1,1).
        let model = GroupModel::heisenberg(1);
        let f = Expr::Mul(vec![
            Expr::IntPow(Box::new(Expr::Coord(0)), 2),
            Expr::IntPow(Box::new(Expr::Coord(1)), 2),
            Expr::Coord(2),
        ]);
        let op = OpExpr::compose2(OpExpr::SubLaplacian, OpExpr::SubLaplacian);
        assert_eq!(op.order(&model).unwrap(), 4);
        let v = apply_exact(&op, &f, &model, &[qi(1), qi(1), qi(1)]).unwrap();
        assert_eq!(v, qi(8));
    }

    #[test]
    fn leibniz_consistency() {
        // Partial(i) ∘ MulCoord(i) = f + x_i ∂_i f exactly
        let model = GroupModel::euclidean_isotropic(2);
        let op = OpExpr::compose2(OpExpr::Partial(0), OpExpr::MulCoord(0));
        let f = Expr::Mul(vec![
            Expr::IntPow(Box::new(Expr::Coord(0)), 2),
            Expr::Coord(1),
        ]);
        let x = [qi(3), qi(5)];
        let lhs = apply_exact(&op, &f, &model, &x).unwrap();
        // f = x^2 y: f(3,5) = 45, ∂_0 f = 2xy = 30; expected 45 + 3·30 = 135
        assert_eq!(lhs, qi(135));
    }

    #[test]
    fn commutator_partial_coord_is_identity() {
        let model = GroupModel::euclidean_isotropic(1);
        let comm =
            OpExpr::commutator(&OpExpr::Partial(0), &OpExpr::MulCoord(0), &model).unwrap();
        let f = Expr::IntPow(Box::new(Expr::Coord(0)), 3);
        let x = [BigRational::from_ratio(7, 3)];
        let lhs = apply_exact(&comm, &f, &model, &x).unwrap();
        let fx = apply_exact(&OpExpr::identity(), &f, &model, &x).unwrap();
        assert_eq!(lhs, fx);
    }

    #[test]
    fn factorization_pair_at_zero_params_is_minus_l() {
        let model = GroupModel::heisenberg(1);
        let zero = BigRational::from_int(0);
        let (t, tp) = factorization_pair(&model, &zero, &zero);
        let f = Expr::Mul(vec![Expr::Coord(0), Expr::Coord(0), Expr::Coord(1)]);
        let x = [qi(1), qi(2), qi(3)];
        let a = apply_exact(&t, &f, &model, &x).unwrap();
        let b = apply_exact(&tp, &f, &model, &x).unwrap();
        let ml = apply_exact(
            &OpExpr::compose2(OpExpr::scale_i(-1), OpExpr::SubLaplacian),
            &f,
            &model,
            &x,
        )
        .unwrap();
        assert_eq!(a, ml);
        assert_eq!(b, ml);
    }

    #[test]
    fn radial_on_heisenberg_rejected() {
        let model = GroupModel::heisenberg(1);
        assert!(OpExpr::Radial.expand(&model).is_err());
    }
}
