//! Randomized-exact verification of the operator expansion identities.
//!
//! Each case states two operator expressions that must agree as operators.
//! Verification draws random rational points (stratum coordinates not all
//! zero) and random rational polynomials of total degree ≤ 6, applies both
//! sides through exact rational jets, and demands equality with no tolerance.
//! Twenty trials at degree 6 give Schwartz–Zippel-style confidence for the
//! order-≤-4 catalog.

use crate::error::{CoreError, Result};
use crate::expr::Expr;
use crate::group::GroupModel;
use crate::op::{apply, factorization_pair, ApplyCtx, OpExpr};
use crate::scalar::{format_rational, Ring};
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct IdentityParams {
    pub alpha: BigRational,
    pub beta: BigRational,
    pub gamma: i32,
}

impl Default for IdentityParams {
    fn default() -> Self {
        IdentityParams {
            alpha: BigRational::from_int(1),
            beta: BigRational::zero(),
            gamma: 2,
        }
    }
}

impl IdentityParams {
    pub fn ab(alpha: BigRational, beta: BigRational) -> Self {
        IdentityParams {
            alpha,
            beta,
            ..Default::default()
        }
    }

    pub fn ab_i(alpha: i64, beta: i64) -> Self {
        Self::ab(BigRational::from_int(alpha), BigRational::from_int(beta))
    }

    pub fn gamma(g: i32) -> Self {
        IdentityParams {
            gamma: g,
            ..Default::default()
        }
    }
}

/// One identity with its parameter slots resolved.
pub struct IdentityCase {
    pub id: String,
    pub model: GroupModel,
    pub params: IdentityParams,
    pub lhs: OpExpr,
    pub rhs: OpExpr,
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub point: Vec<String>,
    pub input_poly: String,
    pub lhs_value: String,
    pub rhs_value: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: String,
    pub model: String,
    pub params: String,
    pub trials: u32,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

fn rand_rational(rng: &mut ChaCha8Rng, max_num: i64, max_den: i64) -> BigRational {
    let n = rng.gen_range(-max_num..=max_num);
    let d = rng.gen_range(1..=max_den);
    BigRational::from_ratio(n, d)
}

fn rand_point(rng: &mut ChaCha8Rng, model: &GroupModel) -> Vec<BigRational> {
    loop {
        let x: Vec<BigRational> = (0..model.ambient_dim())
            .map(|_| rand_rational(rng, 64, 16))
            .collect();
        if x[..model.stratum_dim()].iter().any(|c| !c.is_zero()) {
            return x;
        }
    }
}

fn rand_polynomial(rng: &mut ChaCha8Rng, nvars: usize, max_degree: usize) -> Expr {
    let n_monomials = rng.gen_range(6..=12);
    let mut terms = Vec::with_capacity(n_monomials);
    for _ in 0..n_monomials {
        let deg = rng.gen_range(0..=max_degree);
        // random composition of `deg` into nvars parts
        let mut exps = vec![0u32; nvars];
        for _ in 0..deg {
            let v = rng.gen_range(0..nvars);
            exps[v] += 1;
        }
        let mut factors = vec![Expr::ConstRat(loop {
            let c = rand_rational(rng, 9, 4);
            if !c.is_zero() {
                break c;
            }
        })];
        for (v, &e) in exps.iter().enumerate() {
            if e > 0 {
                factors.push(Expr::IntPow(Box::new(Expr::Coord(v)), e as i32));
            }
        }
        terms.push(Expr::Mul(factors));
    }
    Expr::Add(terms)
}

/// Run the randomized-exact check; failure returns the first counterexample.
pub fn check_identity(case: &IdentityCase, trials: u32, seed: u64) -> Result<CheckResult> {
    let model = &case.model;
    let lhs = case.lhs.expand(model)?;
    let rhs = case.rhs.expand(model)?;
    let ord_l = case.lhs.order(model)?;
    let ord_r = case.rhs.order(model)?;
    let order = ord_l.max(ord_r);
    if order > crate::jet::MAX_ORDER {
        return Err(CoreError::BadOperator(format!(
            "identity '{}' has order {order} > 4",
            case.id
        )));
    }
    let nvars = model.ambient_dim();
    let shape = crate::jet::JetShape::get(nvars, order);
    let ectx = crate::expr::EvalCtx::ambient(model);
    let mut witness = None;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e3779b97f4a7c15u64.wrapping_mul(trial as u64 + 1)));
        let x = rand_point(&mut rng, model);
        let poly = rand_polynomial(&mut rng, nvars, 6);
        let jet = crate::expr::eval_exact(&poly, &ectx, &x, order)?;
        let ctx = ApplyCtx::new(model, &x, shape.clone());
        let lv = apply(&lhs, &jet, &ctx)?.value();
        let rv = apply(&rhs, &jet, &ctx)?.value();
        if lv != rv {
            witness = Some(Witness {
                point: x.iter().map(format_rational).collect(),
                input_poly: poly.to_string(),
                lhs_value: format_rational(&lv),
                rhs_value: format_rational(&rv),
            });
            break;
        }
    }
    Ok(CheckResult {
        id: case.id.clone(),
        model: model.tag(),
        params: format!(
            "alpha={},beta={},gamma={}",
            format_rational(&case.params.alpha),
            format_rational(&case.params.beta),
            case.params.gamma
        ),
        trials,
        pass: witness.is_none(),
        witness,
    })
}

// ---------------------------------------------------------------------------
// catalog
// ---------------------------------------------------------------------------

type Builder = fn(&GroupModel, &IdentityParams) -> Result<(OpExpr, OpExpr)>;

pub struct IdentitySpec {
    pub id: &'static str,
    pub heisenberg_only: bool,
    pub build: Builder,
    pub default_params: Vec<IdentityParams>,
}

impl IdentitySpec {
    pub fn default_models(&self) -> Vec<GroupModel> {
        if self.heisenberg_only {
            vec![GroupModel::heisenberg(1), GroupModel::heisenberg(2)]
        } else {
            vec![
                GroupModel::heisenberg(1),
                GroupModel::heisenberg(2),
                GroupModel::euclidean_isotropic(2),
                GroupModel::euclidean_isotropic(3),
            ]
        }
    }

    pub fn case(&self, model: &GroupModel, params: &IdentityParams) -> Result<IdentityCase> {
        let (lhs, rhs) = (self.build)(model, params)?;
        Ok(IdentityCase {
            id: self.id.to_string(),
            model: model.clone(),
            params: params.clone(),
            lhs,
            rhs,
        })
    }
}

fn m_norm(k: i32) -> OpExpr {
    OpExpr::MulStratumNormPow(k)
}

fn n_of(model: &GroupModel) -> i64 {
    model.stratum_dim() as i64
}

/// Σ_{j,k} x'_j x'_k X̃_j X̃_k.
fn double_sum(model: &GroupModel) -> OpExpr {
    let n = model.stratum_dim();
    let mut terms = Vec::with_capacity(n * n);
    for j in 0..n {
        for k in 0..n {
            terms.push(OpExpr::Compose(vec![
                OpExpr::MulCoord(j),
                OpExpr::MulCoord(k),
                OpExpr::Horizontal(j),
                OpExpr::Horizontal(k),
            ]));
        }
    }
    OpExpr::Sum(terms)
}

/// Σ_j (x_j Y_j − y_j X_j) on ℍₙ.
fn tangential_sum_op(model: &GroupModel) -> Result<OpExpr> {
    let n = match model {
        GroupModel::Heisenberg { n } => *n,
        _ => {
            return Err(CoreError::BadOperator(
                "tangential sum exists only on heisenberg models".into(),
            ))
        }
    };
    let mut terms = Vec::with_capacity(2 * n);
    for j in 0..n {
        terms.push(OpExpr::compose2(OpExpr::MulCoord(j), OpExpr::Y(j)));
        terms.push(OpExpr::Compose(vec![
            OpExpr::scale_i(-1),
            OpExpr::MulCoord(n + j),
            OpExpr::X(j),
        ]));
    }
    Ok(OpExpr::Sum(terms))
}

fn build_formula1(model: &GroupModel, p: &IdentityParams) -> Result<(OpExpr, OpExpr)> {
    let g = p.gamma;
    if g % 2 != 0 {
        return Err(CoreError::NotExact("formula1 needs even gamma".into()));
    }
    let base = Expr::IntPow(Box::new(Expr::StratumNormSq), g / 2);
    let n = model.stratum_dim();
    let lhs = OpExpr::Sum(
        (0..n)
            .map(|j| {
                let m = OpExpr::MulDerived(Box::new(OpExpr::Horizontal(j)), base.clone());
                OpExpr::compose2(m.clone(), m)
            })
            .collect(),
    );
    let rhs = OpExpr::Compose(vec![
        OpExpr::Scale(BigRational::from_int((g as i64) * (g as i64))),
        m_norm(2 * g - 2),
    ]);
    Ok((lhs, rhs))
}

fn build_formula2(model: &GroupModel, p: &IdentityParams) -> Result<(OpExpr, OpExpr)> {
    let g = p.gamma;
    if g % 2 != 0 {
        return Err(CoreError::NotExact("formula2 needs even gamma".into()));
    }
    let n = model.stratum_dim();
    let lhs = OpExpr::Sum(
        (0..n)
            .map(|j| {
                let component = Expr::mul2(
                    Expr::Coord(j),
                    Expr::IntPow(Box::new(Expr::StratumNormSq), -g / 2),
                );
                OpExpr::MulDerived(Box::new(OpExpr::Horizontal(j)), component)
            })
            .collect(),
    );
    let rhs = OpExpr::Compose(vec![
        OpExpr::Scale(BigRational::from_int(n_of(model) - g as i64)),
        m_norm(-g),
    ]);
    Ok((lhs, rhs))
}

fn build_formula3(model: &GroupModel, _p: &IdentityParams) -> Result<(OpExpr, OpExpr)> {
    let n = n_of(model);
    let lhs = OpExpr::compose2(OpExpr::SubLaplacian, m_norm(-2));
    let rhs = OpExpr::Sum(vec![
        OpExpr::compose2(m_norm(-2), OpExpr::SubLaplacian),
        OpExpr::Compose(vec![
            OpExpr::scale_i(-4),
            m_norm(-4),
            OpExpr::euler_horizontal(model),
        ]),
        OpExpr::compose2(OpExpr::scale_i(-(2 * n - 8)), m_norm(-4)),
    ]);
    Ok((lhs, rhs))
}

fn build_formula4(model: &GroupModel, _p: &IdentityParams) -> Result<(OpExpr, OpExpr)> {
    let euler = OpExpr::euler_horizontal(model);
    let lhs = OpExpr::Compose(vec![m_norm(-2), euler.clone(), m_norm(-2)]);
    let rhs = OpExpr::Sum(vec![
        OpExpr::compose2(OpExpr::scale_i(-2), m_norm(-4)),
        OpExpr::compose2(m_norm(-4), euler),
    ]);
    Ok((lhs, rhs))
}

/// Shared polynomial coefficients of the T⁺T expansion.
struct HeisCoefs {
    lap: BigRational,
    euler: BigRational,
    zero_order: BigRational,
    double: BigRational,
    commutator: BigRational,
}

fn heis_tt_coefs(n: i64, a: &BigRational, b: &BigRational) -> HeisCoefs {
    let q = BigRational::from_int;
    HeisCoefs {
        // −(2β − (N−4)α)
        lap: -(q(2) * b.clone() - q(n - 4) * a.clone()),
        // 2(N−2)α + 4β − (N−3)α²
        euler: q(2 * (n - 2)) * a.clone() + q(4) * b.clone() - q(n - 3) * a.clone() * a.clone(),
        // β² + 2(N−4)β − (N−4)αβ
        zero_order: b.clone() * b.clone() + q(2 * (n - 4)) * b.clone()
            - q(n - 4) * a.clone() * b.clone(),
        // −α(α−4)
        double: -(a.clone() * (a.clone() - q(4))),
        // +2α
        commutator: q(2) * a.clone(),
    }
}

fn heis_ttstar_coefs(n: i64, a: &BigRational, b: &BigRational) -> HeisCoefs {
    let q = BigRational::from_int;
    HeisCoefs {
        // −(2β − Nα)
        lap: -(q(2) * b.clone() - q(n) * a.clone()),
        // 6(2−N)α + 4β − (N−3)α²
        euler: q(6 * (2 - n)) * a.clone() + q(4) * b.clone() - q(n - 3) * a.clone() * a.clone(),
        // β² + 2(N−4)β − Nαβ + 2α²(N−2) − 2α(N−4)(N−2)
        zero_order: b.clone() * b.clone() + q(2 * (n - 4)) * b.clone()
            - q(n) * a.clone() * b.clone()
            + q(2 * (n - 2)) * a.clone() * a.clone()
            - q(2 * (n - 4) * (n - 2)) * a.clone(),
        // −α(α+4)
        double: -(a.clone() * (a.clone() + q(4))),
        // −2α
        commutator: q(-2) * a.clone(),
    }
}

fn heis_rhs(model: &GroupModel, c: &HeisCoefs, scale_lap_sq: i64) -> Result<OpExpr> {
    let lap2 = OpExpr::compose2(OpExpr::SubLaplacian, OpExpr::SubLaplacian);
    let mut terms = vec![
        OpExpr::compose2(OpExpr::scale_i(scale_lap_sq), lap2),
        OpExpr::Compose(vec![
            OpExpr::Scale(c.lap.clone()),
            m_norm(-2),
            OpExpr::SubLaplacian,
        ]),
        OpExpr::Compose(vec![
            OpExpr::Scale(c.euler.clone()),
            m_norm(-4),
            OpExpr::euler_horizontal(model),
        ]),
        OpExpr::compose2(OpExpr::Scale(c.zero_order.clone()), m_norm(-4)),
        OpExpr::Compose(vec![
            OpExpr::Scale(c.double.clone()),
            m_norm(-4),
            double_sum(model),
        ]),
    ];
    if !c.commutator.is_zero() {
        terms.push(OpExpr::Compose(vec![
            OpExpr::Scale(c.commutator.clone()),
            m_norm(-2),
            tangential_sum_op(model)?,
            OpExpr::T,
        ]));
    }
    Ok(OpExpr::Sum(terms))
}

fn build_heis_tt(model: &GroupModel, p: &IdentityParams) -> Result<(OpExpr, OpExpr)> {
    let (t, tp) = factorization_pair(model, &p.alpha, &p.beta);
    let lhs = OpExpr::compose2(tp, t);
    let c = heis_tt_coefs(n_of(model), &p.alpha, &p.beta);
    Ok((lhs, heis_rhs(model, &c, 1)?))
}

/// The same expansion with the commutator term deleted; must fail for α ≠ 0.
pub fn heis_tt_missing_commutator_case(
    model: &GroupModel,
    params: &IdentityParams,
) -> Result<IdentityCase> {
    let (t, tp) = factorization_pair(model, &params.alpha, &params.beta);
    let lhs = OpExpr::compose2(tp, t);
    let mut c = heis_tt_coefs(n_of(model), &params.alpha, &params.beta);
    c.commutator = BigRational::zero();
    Ok(IdentityCase {
        id: "heis_tt_nocomm".into(),
        model: model.clone(),
        params: params.clone(),
        lhs,
        rhs: heis_rhs(model, &c, 1)?,
    })
}

fn build_heis_ttstar(model: &GroupModel, p: &IdentityParams) -> Result<(OpExpr, OpExpr)> {
    let (t, tp) = factorization_pair(model, &p.alpha, &p.beta);
    let lhs = OpExpr::compose2(t, tp);
    let c = heis_ttstar_coefs(n_of(model), &p.alpha, &p.beta);
    Ok((lhs, heis_rhs(model, &c, 1)?))
}

fn build_strat_tt_sum(model: &GroupModel, p: &IdentityParams) -> Result<(OpExpr, OpExpr)> {
    let (t, tp) = factorization_pair(model, &p.alpha, &p.beta);
    let lhs = OpExpr::Sum(vec![
        OpExpr::compose2(tp.clone(), t.clone()),
        OpExpr::compose2(t, tp),
    ]);
    let q = BigRational::from_int;
    let n = n_of(model);
    let (a, b) = (&p.alpha, &p.beta);
    let c = HeisCoefs {
        // 2α(N−2) − 4β
        lap: q(2 * (n - 2)) * a.clone() - q(4) * b.clone(),
        // −4α(N−2) − 2α²(N−3) + 8β
        euler: q(-4 * (n - 2)) * a.clone() - q(2 * (n - 3)) * a.clone() * a.clone()
            + q(8) * b.clone(),
        // 2α(N−2)(4−N) + 2α²(N−2) − 2αβ(N−2) + (4N−16)β + 2β²
        zero_order: q(2 * (n - 2) * (4 - n)) * a.clone()
            + q(2 * (n - 2)) * a.clone() * a.clone()
            - q(2 * (n - 2)) * a.clone() * b.clone()
            + q(4 * n - 16) * b.clone()
            + q(2) * b.clone() * b.clone(),
        // −2α²
        double: q(-2) * a.clone() * a.clone(),
        commutator: BigRational::zero(),
    };
    Ok((lhs, heis_rhs(model, &c, 2)?))
}

fn build_lap_decomp(_model: &GroupModel, _p: &IdentityParams) -> Result<(OpExpr, OpExpr)> {
    let rhs = OpExpr::Sum(vec![
        OpExpr::DeltaStratum,
        OpExpr::Compose(vec![OpExpr::scale_q(1, 4), m_norm(2), OpExpr::T, OpExpr::T]),
        OpExpr::compose2(OpExpr::Z, OpExpr::T),
    ]);
    Ok((OpExpr::SubLaplacian, rhs))
}

fn build_lap3(model: &GroupModel, _p: &IdentityParams) -> Result<(OpExpr, OpExpr)> {
    let _ = model;
    let lhs = OpExpr::compose2(OpExpr::Z, OpExpr::T);
    let rhs = OpExpr::Sum(vec![
        OpExpr::SubLaplacian,
        OpExpr::compose2(OpExpr::scale_i(-1), OpExpr::DeltaStratum),
        OpExpr::Compose(vec![
            OpExpr::scale_q(-1, 4),
            m_norm(2),
            OpExpr::T,
            OpExpr::T,
        ]),
    ]);
    Ok((lhs, rhs))
}

fn build_tangential_sum(model: &GroupModel, _p: &IdentityParams) -> Result<(OpExpr, OpExpr)> {
    let lhs = tangential_sum_op(model)?;
    let rhs = OpExpr::Sum(vec![
        OpExpr::Z,
        OpExpr::Compose(vec![OpExpr::scale_q(1, 2), m_norm(2), OpExpr::T]),
    ]);
    Ok((lhs, rhs))
}

fn build_zt_commute(model: &GroupModel, _p: &IdentityParams) -> Result<(OpExpr, OpExpr)> {
    let _ = model;
    Ok((
        OpExpr::compose2(OpExpr::Z, OpExpr::T),
        OpExpr::compose2(OpExpr::T, OpExpr::Z),
    ))
}

fn build_hardy_ttilde(model: &GroupModel, p: &IdentityParams) -> Result<(OpExpr, OpExpr)> {
    let n = model.stratum_dim();
    let a = &p.alpha;
    // component X̃_j + α x'_j/|x'|²
    let comp = |j: usize| -> OpExpr {
        OpExpr::Sum(vec![
            OpExpr::Horizontal(j),
            OpExpr::Compose(vec![
                OpExpr::Scale(a.clone()),
                OpExpr::MulCoord(j),
                m_norm(-2),
            ]),
        ])
    };
    let mut terms = Vec::with_capacity(2 * n);
    for j in 0..n {
        terms.push(OpExpr::Compose(vec![
            OpExpr::scale_i(-1),
            OpExpr::Horizontal(j),
            comp(j),
        ]));
        terms.push(OpExpr::Compose(vec![
            OpExpr::Scale(a.clone()),
            m_norm(-2),
            OpExpr::MulCoord(j),
            comp(j),
        ]));
    }
    let lhs = OpExpr::Sum(terms);
    // −𝓛 + α(α + 2 − N)/|x'|²
    let zc = a.clone() * (a.clone() + BigRational::from_int(2 - n as i64));
    let rhs = OpExpr::Sum(vec![
        OpExpr::compose2(OpExpr::scale_i(-1), OpExpr::SubLaplacian),
        OpExpr::compose2(OpExpr::Scale(zc), m_norm(-2)),
    ]);
    Ok((lhs, rhs))
}

pub fn identity_catalog() -> Vec<IdentitySpec> {
    let gammas = || {
        vec![
            IdentityParams::gamma(2),
            IdentityParams::gamma(4),
            IdentityParams::gamma(-2),
        ]
    };
    let abs = || {
        vec![
            IdentityParams::ab_i(1, 0),
            IdentityParams::ab_i(0, 1),
            IdentityParams::ab_i(2, -1),
            IdentityParams::ab(
                BigRational::from_ratio(1, 2),
                BigRational::from_ratio(1, 3),
            ),
        ]
    };
    vec![
        IdentitySpec {
            id: "formula1",
            heisenberg_only: false,
            build: build_formula1,
            default_params: gammas(),
        },
        IdentitySpec {
            id: "formula2",
            heisenberg_only: false,
            build: build_formula2,
            default_params: gammas(),
        },
        IdentitySpec {
            id: "formula3",
            heisenberg_only: false,
            build: build_formula3,
            default_params: vec![IdentityParams::default()],
        },
        IdentitySpec {
            id: "formula4",
            heisenberg_only: false,
            build: build_formula4,
            default_params: vec![IdentityParams::default()],
        },
        IdentitySpec {
            id: "strat_tt_sum",
            heisenberg_only: false,
            build: build_strat_tt_sum,
            default_params: abs(),
        },
        IdentitySpec {
            id: "heis_tt",
            heisenberg_only: true,
            build: build_heis_tt,
            default_params: abs(),
        },
        IdentitySpec {
            id: "heis_ttstar",
            heisenberg_only: true,
            build: build_heis_ttstar,
            default_params: abs(),
        },
        IdentitySpec {
            id: "lap_decomp",
            heisenberg_only: true,
            build: build_lap_decomp,
            default_params: vec![IdentityParams::default()],
        },
        IdentitySpec {
            id: "lap3",
            heisenberg_only: true,
            build: build_lap3,
            default_params: vec![IdentityParams::default()],
        },
        IdentitySpec {
            id: "tangential_sum",
            heisenberg_only: true,
            build: build_tangential_sum,
            default_params: vec![IdentityParams::default()],
        },
        IdentitySpec {
            id: "zt_commute",
            heisenberg_only: true,
            build: build_zt_commute,
            default_params: vec![IdentityParams::default()],
        },
        IdentitySpec {
            id: "hardy_ttilde",
            heisenberg_only: false,
            build: build_hardy_ttilde,
            default_params: vec![
                IdentityParams::ab_i(1, 0),
                IdentityParams::ab(BigRational::from_ratio(1, 2), BigRational::zero()),
                IdentityParams::ab_i(-2, 0),
            ],
        },
    ]
}

pub fn find_identity(id: &str) -> Result<IdentitySpec> {
    identity_catalog()
        .into_iter()
        .find(|s| s.id == id)
        .ok_or_else(|| CoreError::UnknownId(format!("identity '{id}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_value_tangential_sum() {
        // apply both sides to f = t at (1, 2, 3) on ℍ₁: value (x²+y²)/2 = 5/2
        let model = GroupModel::heisenberg(1);
        let spec = find_identity("tangential_sum").unwrap();
        let case = spec.case(&model, &IdentityParams::default()).unwrap();
        let f = Expr::Coord(2);
        let x = [
            BigRational::from_int(1),
            BigRational::from_int(2),
            BigRational::from_int(3),
        ];
        let lv = crate::op::apply_exact(&case.lhs, &f, &model, &x).unwrap();
        let rv = crate::op::apply_exact(&case.rhs, &f, &model, &x).unwrap();
        assert_eq!(lv, BigRational::from_ratio(5, 2));
        assert_eq!(rv, BigRational::from_ratio(5, 2));
    }

    #[test]
    fn lap_decomp_quick() {
        let model = GroupModel::heisenberg(1);
        let spec = find_identity("lap_decomp").unwrap();
        let case = spec.case(&model, &IdentityParams::default()).unwrap();
        let r = check_identity(&case, 10, 0).unwrap();
        assert!(r.pass, "witness: {:?}", r.witness);
    }

    #[test]
    fn formula2_vanishes_at_critical_gamma() {
        // N = 2 on ℍ₁ and γ = 2: div_H(x'/|x'|²) ≡ 0
        let model = GroupModel::heisenberg(1);
        let spec = find_identity("formula2").unwrap();
        let case = spec.case(&model, &IdentityParams::gamma(2)).unwrap();
        let f = Expr::rat(1, 1);
        let x = [
            BigRational::from_ratio(3, 2),
            BigRational::from_int(-2),
            BigRational::from_int(5),
        ];
        let lv = crate::op::apply_exact(&case.lhs, &f, &model, &x).unwrap();
        assert!(lv.is_zero());
    }

    #[test]
    fn heis_tt_quick_h1() {
        let model = GroupModel::heisenberg(1);
        let spec = find_identity("heis_tt").unwrap();
        let case = spec.case(&model, &IdentityParams::ab_i(1, 0)).unwrap();
        let r = check_identity(&case, 5, 7).unwrap();
        assert!(r.pass, "witness: {:?}", r.witness);
    }

    #[test]
    fn negative_control_fails() {
        let model = GroupModel::heisenberg(1);
        let case =
            heis_tt_missing_commutator_case(&model, &IdentityParams::ab_i(1, 0)).unwrap();
        let r = check_identity(&case, 20, 0).unwrap();
        assert!(!r.pass, "the commutator-free expansion must not verify");
        assert!(r.witness.is_some());
    }

    #[test]
    fn odd_gamma_rejected() {
        let model = GroupModel::heisenberg(1);
        let spec = find_identity("formula1").unwrap();
        assert!(spec.case(&model, &IdentityParams::gamma(3)).is_err());
    }
}
