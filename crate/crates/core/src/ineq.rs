//! The inequality catalog: every statement as an evaluatable list of
//! (coefficient, functional) pairs for both sides, plus the deficit
//! evaluator and the (α, β) sweep engine.

use crate::error::{CoreError, Result};
use crate::field::ScalarField;
use crate::functional::{Evaluator, Functional, WeightFn};
use crate::group::GroupModel;
use crate::op::OpExpr;
use crate::quad::QuadSpec;
use crate::radial::RadialProfile;
use serde::Serialize;

/// Scalar parameters of an instance; unused slots are ignored by each
/// builder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Params {
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            alpha: 1.0,
            beta: 0.0,
            a: 0.0,
            b: 1.0,
            c: 0.0,
            d: 0.0,
        }
    }
}

impl Params {
    pub fn ab(alpha: f64, beta: f64) -> Self {
        Params {
            alpha,
            beta,
            ..Default::default()
        }
    }
}

/// One (coefficient, functional) pair of an inequality side.
#[derive(Debug, Clone)]
pub struct Term {
    pub name: &'static str,
    pub coefficient: f64,
    pub functional: Functional,
}

impl Term {
    fn new(name: &'static str, coefficient: f64, functional: Functional) -> Term {
        Term {
            name,
            coefficient,
            functional,
        }
    }
}

/// A fully resolved inequality instance: deficit = Σ lhs − Σ rhs ≥ 0.
#[derive(Debug, Clone)]
pub struct Instance {
    pub id: &'static str,
    pub model: GroupModel,
    pub params: Params,
    pub lhs: Vec<Term>,
    pub rhs: Vec<Term>,
}

/// Which parameters a sweep varies for the instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    AlphaBeta,
    AlphaOnly,
    None,
}

pub struct InstanceSpec {
    pub id: &'static str,
    pub sweep: SweepKind,
    pub default_model: fn() -> GroupModel,
    pub default_params: Params,
    pub admissible: fn(&GroupModel, &Params) -> Result<()>,
    pub build: fn(&GroupModel, &Params) -> Result<Instance>,
}

impl InstanceSpec {
    pub fn instance(&self, model: &GroupModel, params: &Params) -> Result<Instance> {
        (self.admissible)(model, params)?;
        (self.build)(model, params)
    }
}

// ---------------------------------------------------------------------------
// functional shorthands
// ---------------------------------------------------------------------------

fn lap_sq() -> Functional {
    Functional::L2Sq {
        op: OpExpr::SubLaplacian,
        w: WeightFn::One,
    }
}

fn grad_w(k: i32) -> Functional {
    Functional::GradHSq {
        w: if k == 0 {
            WeightFn::One
        } else {
            WeightFn::StratumPow(k)
        },
    }
}

fn euler_w(model: &GroupModel, k: i32) -> Functional {
    Functional::L2Sq {
        op: OpExpr::euler_horizontal(model),
        w: WeightFn::StratumPow(k),
    }
}

fn plain_w(k: i32) -> Functional {
    Functional::plain_l2(k)
}

fn t_sq() -> Functional {
    Functional::L2Sq {
        op: OpExpr::T,
        w: WeightFn::One,
    }
}

fn zt_inner() -> Functional {
    Functional::Inner {
        a: OpExpr::Z,
        b: OpExpr::T,
        w: WeightFn::StratumPow(-1),
    }
}

fn radial_l2(w: RadialProfile) -> Functional {
    Functional::L2Sq {
        op: OpExpr::Radial,
        w: WeightFn::Radial(w),
    }
}

fn plain_radial(w: RadialProfile) -> Functional {
    Functional::L2Sq {
        op: OpExpr::identity(),
        w: WeightFn::Radial(w),
    }
}

// weights φ = r^{−a}(log r)^c, ψ = r^{−b}(log r)^d
fn phi_of(p: &Params) -> RadialProfile {
    RadialProfile::power_log(1.0, -p.a, p.c as i32)
}

fn psi_of(p: &Params) -> RadialProfile {
    RadialProfile::power_log(1.0, -p.b, p.d as i32)
}

// ---------------------------------------------------------------------------
// admissibility helpers
// ---------------------------------------------------------------------------

fn euclid_only(m: &GroupModel, _p: &Params) -> Result<()> {
    if !m.is_euclidean() {
        return Err(CoreError::Inadmissible(
            "instance is realized on euclidean models only".into(),
        ));
    }
    Ok(())
}

fn heis_only(m: &GroupModel, _p: &Params) -> Result<()> {
    if m.is_euclidean() {
        return Err(CoreError::Inadmissible(
            "instance is stated on the heisenberg group".into(),
        ));
    }
    Ok(())
}

fn needs_stratum_dim(m: &GroupModel, min: usize) -> Result<()> {
    if m.stratum_dim() < min {
        return Err(CoreError::Inadmissible(format!(
            "needs first-stratum dimension ≥ {min}, model has {}",
            m.stratum_dim()
        )));
    }
    Ok(())
}

fn hom_admissible(m: &GroupModel, _p: &Params) -> Result<()> {
    euclid_only(m, _p)?;
    if m.q_hom() < 3.0 {
        return Err(CoreError::Inadmissible(format!(
            "needs homogeneous dimension ≥ 3, model has {}",
            m.q_hom()
        )));
    }
    Ok(())
}

fn hom_log_admissible(m: &GroupModel, p: &Params) -> Result<()> {
    hom_admissible(m, p)?;
    let is_nonneg_int = |v: f64| v >= 0.0 && v.fract() == 0.0;
    if !is_nonneg_int(p.c) || !is_nonneg_int(p.d) {
        return Err(CoreError::Inadmissible(
            "log exponents c, d must be nonnegative integers (smoothness across r = 1)".into(),
        ));
    }
    if p.c + p.d < 1.0 {
        return Err(CoreError::Inadmissible(
            "log-weight case needs c + d ≥ 1".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// builders
// ---------------------------------------------------------------------------

fn nn(model: &GroupModel) -> f64 {
    model.stratum_dim() as f64
}

fn build_hardy_like(
    id: &'static str,
    model: &GroupModel,
    params: &Params,
    lhs_term: Term,
) -> Instance {
    let n = nn(model);
    let c = (n - 2.0) * (n - 2.0) / 4.0;
    Instance {
        id,
        model: model.clone(),
        params: *params,
        lhs: vec![lhs_term],
        rhs: vec![Term::new("((N-2)/2)^2 |f/|x'||^2", c, plain_w(-1))],
    }
}

fn build_hardy_euclid(model: &GroupModel, p: &Params) -> Result<Instance> {
    Ok(build_hardy_like(
        "hardy_euclid",
        model,
        p,
        Term::new("|grad f|^2", 1.0, grad_w(0)),
    ))
}

fn build_hardy_strat(model: &GroupModel, p: &Params) -> Result<Instance> {
    Ok(build_hardy_like(
        "hardy_strat",
        model,
        p,
        Term::new("|grad_H f|^2", 1.0, grad_w(0)),
    ))
}

fn build_refined_hardy_strat(model: &GroupModel, p: &Params) -> Result<Instance> {
    let mut inst = build_hardy_like(
        "refined_hardy_strat",
        model,
        p,
        Term::new(
            "|x'.grad_H f / |x'||^2",
            1.0,
            euler_w(model, -1),
        ),
    );
    inst.id = "refined_hardy_strat";
    Ok(inst)
}

/// Shared shape of the two-parameter second-order inequalities.
struct RellichCoefs {
    grad: f64,
    euler: Option<f64>,
    zero: f64,
    zt: Option<f64>,
    t: Option<f64>,
    lap_inner: Option<f64>,
    delta_inner: Option<f64>,
}

fn rellich_instance(
    id: &'static str,
    model: &GroupModel,
    params: &Params,
    c: RellichCoefs,
) -> Instance {
    let mut rhs = vec![Term::new("grad term", c.grad, grad_w(-1))];
    if let Some(e) = c.euler {
        rhs.push(Term::new("euler term", e, euler_w(model, -2)));
    }
    rhs.push(Term::new("zero-order term", c.zero, plain_w(-2)));
    if let Some(v) = c.zt {
        rhs.push(Term::new("Z-T cross term", v, zt_inner()));
    }
    if let Some(v) = c.lap_inner {
        rhs.push(Term::new(
            "lap inner term",
            v,
            Functional::Inner {
                a: OpExpr::SubLaplacian,
                b: OpExpr::identity(),
                w: WeightFn::StratumPow(-1),
            },
        ));
    }
    if let Some(v) = c.delta_inner {
        rhs.push(Term::new(
            "delta inner term",
            v,
            Functional::Inner {
                a: OpExpr::DeltaStratum,
                b: OpExpr::identity(),
                w: WeightFn::StratumPow(-1),
            },
        ));
    }
    if let Some(v) = c.t {
        rhs.push(Term::new("T term", v, t_sq()));
    }
    Instance {
        id,
        model: model.clone(),
        params: *params,
        lhs: vec![Term::new("|Lf|^2", 1.0, lap_sq())],
        rhs,
    }
}

fn build_gl_rellich(model: &GroupModel, p: &Params) -> Result<Instance> {
    let (n, al, be) = (nn(model), p.alpha, p.beta);
    Ok(rellich_instance(
        "gl_rellich",
        model,
        p,
        RellichCoefs {
            grad: (n - 4.0) * al - 2.0 * be,
            euler: Some(-al * (al - 4.0)),
            zero: be * ((n - 4.0) * (al - 2.0) - be),
            zt: None,
            t: None,
            lap_inner: None,
            delta_inner: None,
        },
    ))
}

fn counterpart_zero_order(n: f64, al: f64, be: f64) -> f64 {
    2.0 * (n - 4.0) * (al * (n - 2.0) - be) - 2.0 * al * al * (n - 2.0) + al * be * n - be * be
}

fn build_gl_counterpart(model: &GroupModel, p: &Params) -> Result<Instance> {
    let (n, al, be) = (nn(model), p.alpha, p.beta);
    Ok(rellich_instance(
        "gl_counterpart",
        model,
        p,
        RellichCoefs {
            grad: n * al - 2.0 * be,
            euler: Some(-al * (al + 4.0)),
            zero: counterpart_zero_order(n, al, be),
            zt: None,
            t: None,
            lap_inner: None,
            delta_inner: None,
        },
    ))
}

fn strat_zero_order(n: f64, al: f64, be: f64) -> f64 {
    al * (n - 4.0) * (n - 2.0) - al * al * (n - 2.0) + 2.0 * be * (4.0 - n) - be * be
        + al * be * (n - 2.0)
}

fn build_strat_rellich_common(
    id: &'static str,
    model: &GroupModel,
    p: &Params,
) -> Result<Instance> {
    let (n, al, be) = (nn(model), p.alpha, p.beta);
    Ok(rellich_instance(
        id,
        model,
        p,
        RellichCoefs {
            grad: al * (n - 2.0) - 2.0 * be,
            euler: Some(-al * al),
            zero: strat_zero_order(n, al, be),
            zt: None,
            t: None,
            lap_inner: None,
            delta_inner: None,
        },
    ))
}

fn build_strat_rellich(model: &GroupModel, p: &Params) -> Result<Instance> {
    build_strat_rellich_common("strat_rellich", model, p)
}

fn build_euclid_rellich_ab(model: &GroupModel, p: &Params) -> Result<Instance> {
    build_strat_rellich_common("euclid_rellich_ab", model, p)
}

fn build_strat_rellich_cs(model: &GroupModel, p: &Params) -> Result<Instance> {
    let (n, al, be) = (nn(model), p.alpha, p.beta);
    Ok(rellich_instance(
        "strat_rellich_cs",
        model,
        p,
        RellichCoefs {
            grad: al * (n - 2.0) - 2.0 * be - al * al,
            euler: None,
            zero: strat_zero_order(n, al, be),
            zt: None,
            t: None,
            lap_inner: None,
            delta_inner: None,
        },
    ))
}

fn build_heis_1(model: &GroupModel, p: &Params) -> Result<Instance> {
    let (n, al, be) = (nn(model), p.alpha, p.beta);
    Ok(rellich_instance(
        "heis_1",
        model,
        p,
        RellichCoefs {
            grad: (n - 4.0) * al - 2.0 * be,
            euler: Some(-al * (al - 4.0)),
            zero: be * ((n - 4.0) * (al - 2.0) - be),
            zt: Some(2.0 * al),
            t: Some(al),
            lap_inner: None,
            delta_inner: None,
        },
    ))
}

fn build_heis_11(model: &GroupModel, p: &Params) -> Result<Instance> {
    let (n, al, be) = (nn(model), p.alpha, p.beta);
    Ok(rellich_instance(
        "heis_11",
        model,
        p,
        RellichCoefs {
            grad: n * al - 2.0 * be,
            euler: Some(-al * (al + 4.0)),
            zero: counterpart_zero_order(n, al, be),
            zt: Some(-2.0 * al),
            t: Some(-al),
            lap_inner: None,
            delta_inner: None,
        },
    ))
}

fn build_heis_2(model: &GroupModel, p: &Params) -> Result<Instance> {
    let (n, al, be) = (nn(model), p.alpha, p.beta);
    Ok(rellich_instance(
        "heis_2",
        model,
        p,
        RellichCoefs {
            grad: (n - al) * al - 2.0 * be,
            euler: None,
            zero: be * ((n - 4.0) * (al - 2.0) - be),
            zt: Some(2.0 * al),
            t: Some(al),
            lap_inner: None,
            delta_inner: None,
        },
    ))
}

fn build_heis_22(model: &GroupModel, p: &Params) -> Result<Instance> {
    let (n, al, be) = (nn(model), p.alpha, p.beta);
    Ok(rellich_instance(
        "heis_22",
        model,
        p,
        RellichCoefs {
            grad: -2.0 * be + al * (n - al) - 4.0 * al,
            euler: None,
            zero: counterpart_zero_order(n, al, be),
            zt: Some(-2.0 * al),
            t: Some(-al),
            lap_inner: None,
            delta_inner: None,
        },
    ))
}

fn build_heis_1_rewrite(model: &GroupModel, p: &Params) -> Result<Instance> {
    let (n, al, be) = (nn(model), p.alpha, p.beta);
    Ok(rellich_instance(
        "heis_1_rewrite",
        model,
        p,
        RellichCoefs {
            grad: (n - 4.0) * al - 2.0 * be,
            euler: Some(-al * (al - 4.0)),
            zero: be * ((n - 4.0) * (al - 2.0) - be),
            zt: None,
            t: Some(al / 2.0),
            lap_inner: Some(-2.0 * al),
            delta_inner: Some(2.0 * al),
        },
    ))
}

fn build_heis_11_rewrite(model: &GroupModel, p: &Params) -> Result<Instance> {
    let (n, al, be) = (nn(model), p.alpha, p.beta);
    Ok(rellich_instance(
        "heis_11_rewrite",
        model,
        p,
        RellichCoefs {
            grad: n * al - 2.0 * be,
            euler: Some(-al * (al + 4.0)),
            zero: counterpart_zero_order(n, al, be),
            zt: None,
            t: Some(-al / 2.0),
            lap_inner: Some(2.0 * al),
            delta_inner: Some(-2.0 * al),
        },
    ))
}

fn build_hom_fac1(model: &GroupModel, p: &Params) -> Result<Instance> {
    let q = model.q_hom();
    let al = p.alpha;
    let phi = phi_of(p);
    let psi = psi_of(p);
    // φ·ℛψ + ψ·ℛφ + (Q−1)·φψ/r
    let w1 = phi
        .mul(&psi.deriv())
        .add(&psi.mul(&phi.deriv()))
        .add(&phi.mul(&psi).shift_pow(-1.0).scale(q - 1.0));
    Ok(Instance {
        id: "hom_fac1",
        model: model.clone(),
        params: *p,
        lhs: vec![Term::new(
            "phi^2 |Rf|^2",
            1.0,
            radial_l2(phi.mul(&phi)),
        )],
        rhs: vec![
            Term::new("alpha weight term", al, plain_radial(w1)),
            Term::new("-alpha^2 psi^2 term", -al * al, plain_radial(psi.mul(&psi))),
        ],
    })
}

fn build_hom_fac2(model: &GroupModel, p: &Params) -> Result<Instance> {
    let q = model.q_hom();
    let al = p.alpha;
    let phi = phi_of(p);
    let psi = psi_of(p);
    // ψ·ℛφ − φ·ℛψ + (Q−1)·φψ/r
    let w1 = psi
        .mul(&phi.deriv())
        .add(&phi.mul(&psi.deriv()).scale(-1.0))
        .add(&phi.mul(&psi).shift_pow(-1.0).scale(q - 1.0));
    // (Q−1)·φℛφ/r − (Q−1)·φ²/r² + φ·ℛ²φ
    let w2 = phi
        .mul(&phi.deriv())
        .shift_pow(-1.0)
        .scale(q - 1.0)
        .add(&phi.mul(&phi).shift_pow(-2.0).scale(-(q - 1.0)))
        .add(&phi.mul(&phi.deriv().deriv()));
    Ok(Instance {
        id: "hom_fac2",
        model: model.clone(),
        params: *p,
        lhs: vec![Term::new(
            "phi^2 |Rf|^2",
            1.0,
            radial_l2(phi.mul(&phi)),
        )],
        rhs: vec![
            Term::new("alpha weight term", al, plain_radial(w1)),
            Term::new("-alpha^2 psi^2 term", -al * al, plain_radial(psi.mul(&psi))),
            Term::new("phi curvature term", 1.0, plain_radial(w2)),
        ],
    })
}

fn build_hom_power(model: &GroupModel, p: &Params) -> Result<Instance> {
    let q = model.q_hom();
    let (al, a, b) = (p.alpha, p.a, p.b);
    Ok(Instance {
        id: "hom_power",
        model: model.clone(),
        params: *p,
        lhs: vec![Term::new(
            "|Rf|^2 / r^{2a}",
            1.0,
            radial_l2(RadialProfile::power(1.0, -2.0 * a)),
        )],
        rhs: vec![
            Term::new(
                "alpha(Q-a-b-1) / r^{a+b+1}",
                al * (q - a - b - 1.0),
                plain_radial(RadialProfile::power(1.0, -(a + b + 1.0))),
            ),
            Term::new(
                "-alpha^2 / r^{2b}",
                -al * al,
                plain_radial(RadialProfile::power(1.0, -2.0 * b)),
            ),
        ],
    })
}

fn build_hom_weighted_hardy(model: &GroupModel, p: &Params) -> Result<Instance> {
    let q = model.q_hom();
    let a = p.a;
    let c = (q - 2.0 * a - 2.0).powi(2) / 4.0;
    Ok(Instance {
        id: "hom_weighted_hardy",
        model: model.clone(),
        params: *p,
        lhs: vec![Term::new(
            "|Rf|^2 / r^{2a}",
            1.0,
            radial_l2(RadialProfile::power(1.0, -2.0 * a)),
        )],
        rhs: vec![Term::new(
            "(Q-2a-2)^2/4 / r^{2a+2}",
            c,
            plain_radial(RadialProfile::power(1.0, -(2.0 * a + 2.0))),
        )],
    })
}

fn build_hom_log(model: &GroupModel, p: &Params) -> Result<Instance> {
    let q = model.q_hom();
    let (al, a, b, c, d) = (p.alpha, p.a, p.b, p.c as i32, p.d as i32);
    let w_mid = RadialProfile::power_log((c + d) as f64, -(a + b + 1.0), c + d - 1).add(
        &RadialProfile::power_log(q - 1.0 - a - b, -(a + b + 1.0), c + d),
    );
    Ok(Instance {
        id: "hom_log",
        model: model.clone(),
        params: *p,
        lhs: vec![Term::new(
            "(log r)^{2c} |Rf|^2 / r^{2a}",
            1.0,
            radial_l2(RadialProfile::power_log(1.0, -2.0 * a, 2 * c)),
        )],
        rhs: vec![
            Term::new("alpha log-weight term", al, plain_radial(w_mid)),
            Term::new(
                "-alpha^2 (log r)^{2d} / r^{2b}",
                -al * al,
                plain_radial(RadialProfile::power_log(1.0, -2.0 * b, 2 * d)),
            ),
        ],
    })
}

fn critical_lhs(model: &GroupModel) -> Functional {
    let q = model.q_hom();
    radial_l2(RadialProfile::power_log(1.0, -(q - 2.0), 2))
}

fn build_hom_log_critical_pre(model: &GroupModel, p: &Params) -> Result<Instance> {
    let q = model.q_hom();
    let al = p.alpha;
    Ok(Instance {
        id: "hom_log_critical_pre",
        model: model.clone(),
        params: *p,
        lhs: vec![Term::new("(log r)^2 |Rf|^2 / r^{Q-2}", 1.0, critical_lhs(model))],
        rhs: vec![Term::new(
            "(alpha - alpha^2) / r^Q",
            al - al * al,
            plain_radial(RadialProfile::power(1.0, -q)),
        )],
    })
}

fn build_hom_critical(model: &GroupModel, p: &Params) -> Result<Instance> {
    let q = model.q_hom();
    Ok(Instance {
        id: "hom_critical",
        model: model.clone(),
        params: *p,
        lhs: vec![Term::new("(log r)^2 |Rf|^2 / r^{Q-2}", 1.0, critical_lhs(model))],
        rhs: vec![Term::new(
            "(1/4) / r^Q",
            0.25,
            plain_radial(RadialProfile::power(1.0, -q)),
        )],
    })
}

// ---------------------------------------------------------------------------
// catalog
// ---------------------------------------------------------------------------

pub fn catalog() -> Vec<InstanceSpec> {
    fn r3() -> GroupModel {
        GroupModel::euclidean_isotropic(3)
    }
    fn h1() -> GroupModel {
        GroupModel::heisenberg(1)
    }
    fn h2() -> GroupModel {
        GroupModel::heisenberg(2)
    }
    vec![
        InstanceSpec {
            id: "hardy_euclid",
            sweep: SweepKind::None,
            default_model: r3,
            default_params: Params::default(),
            admissible: |m, p| {
                euclid_only(m, p)?;
                needs_stratum_dim(m, 3)
            },
            build: build_hardy_euclid,
        },
        InstanceSpec {
            id: "gl_rellich",
            sweep: SweepKind::AlphaBeta,
            default_model: r3,
            default_params: Params::ab(1.0, 0.0),
            admissible: |m, p| {
                euclid_only(m, p)?;
                needs_stratum_dim(m, 2)
            },
            build: build_gl_rellich,
        },
        InstanceSpec {
            id: "gl_counterpart",
            sweep: SweepKind::AlphaBeta,
            default_model: r3,
            default_params: Params::ab(1.0, 0.0),
            admissible: |m, p| {
                euclid_only(m, p)?;
                needs_stratum_dim(m, 2)
            },
            build: build_gl_counterpart,
        },
        InstanceSpec {
            id: "hom_fac1",
            sweep: SweepKind::AlphaOnly,
            default_model: r3,
            default_params: Params {
                alpha: 0.5,
                a: 0.0,
                b: 1.0,
                c: 0.0,
                d: 0.0,
                beta: 0.0,
            },
            admissible: hom_admissible,
            build: build_hom_fac1,
        },
        InstanceSpec {
            id: "hom_fac2",
            sweep: SweepKind::AlphaOnly,
            default_model: r3,
            default_params: Params {
                alpha: 0.5,
                a: 0.0,
                b: 1.0,
                c: 0.0,
                d: 0.0,
                beta: 0.0,
            },
            admissible: hom_admissible,
            build: build_hom_fac2,
        },
        InstanceSpec {
            id: "hom_power",
            sweep: SweepKind::AlphaOnly,
            default_model: r3,
            default_params: Params {
                alpha: 0.25,
                a: 0.25,
                b: 1.25,
                c: 0.0,
                d: 0.0,
                beta: 0.0,
            },
            admissible: hom_admissible,
            build: build_hom_power,
        },
        InstanceSpec {
            id: "hom_weighted_hardy",
            sweep: SweepKind::None,
            default_model: r3,
            default_params: Params {
                a: 0.25,
                ..Params::default()
            },
            admissible: hom_admissible,
            build: build_hom_weighted_hardy,
        },
        InstanceSpec {
            id: "hom_log",
            sweep: SweepKind::AlphaOnly,
            default_model: r3,
            default_params: Params {
                alpha: 0.5,
                a: 0.5,
                b: 1.5,
                c: 1.0,
                d: 0.0,
                beta: 0.0,
            },
            admissible: hom_log_admissible,
            build: build_hom_log,
        },
        InstanceSpec {
            id: "hom_log_critical_pre",
            sweep: SweepKind::AlphaOnly,
            default_model: r3,
            default_params: Params {
                alpha: 0.5,
                ..Params::default()
            },
            admissible: hom_admissible,
            build: build_hom_log_critical_pre,
        },
        InstanceSpec {
            id: "hom_critical",
            sweep: SweepKind::None,
            default_model: r3,
            default_params: Params::default(),
            admissible: hom_admissible,
            build: build_hom_critical,
        },
        InstanceSpec {
            id: "strat_rellich",
            sweep: SweepKind::AlphaBeta,
            default_model: h2,
            default_params: Params::ab(1.0, 0.0),
            admissible: |m, p| {
                let _ = p;
                needs_stratum_dim(m, 2)
            },
            build: build_strat_rellich,
        },
        InstanceSpec {
            id: "strat_rellich_cs",
            sweep: SweepKind::AlphaBeta,
            default_model: h2,
            default_params: Params::ab(1.0, 0.0),
            admissible: |m, p| {
                let _ = p;
                needs_stratum_dim(m, 2)
            },
            build: build_strat_rellich_cs,
        },
        InstanceSpec {
            id: "euclid_rellich_ab",
            sweep: SweepKind::AlphaBeta,
            default_model: r3,
            default_params: Params::ab(1.0, 0.0),
            admissible: |m, p| {
                euclid_only(m, p)?;
                needs_stratum_dim(m, 2)
            },
            build: build_euclid_rellich_ab,
        },
        InstanceSpec {
            id: "hardy_strat",
            sweep: SweepKind::None,
            default_model: h2,
            default_params: Params::default(),
            admissible: |m, p| {
                let _ = p;
                needs_stratum_dim(m, 3)
            },
            build: build_hardy_strat,
        },
        InstanceSpec {
            id: "refined_hardy_strat",
            sweep: SweepKind::None,
            default_model: h2,
            default_params: Params::default(),
            admissible: |m, p| {
                let _ = p;
                needs_stratum_dim(m, 3)
            },
            build: build_refined_hardy_strat,
        },
        InstanceSpec {
            id: "heis_1",
            sweep: SweepKind::AlphaBeta,
            default_model: h1,
            default_params: Params::ab(1.0, 0.0),
            admissible: heis_only,
            build: build_heis_1,
        },
        InstanceSpec {
            id: "heis_11",
            sweep: SweepKind::AlphaBeta,
            default_model: h1,
            default_params: Params::ab(1.0, 0.0),
            admissible: heis_only,
            build: build_heis_11,
        },
        InstanceSpec {
            id: "heis_2",
            sweep: SweepKind::AlphaBeta,
            default_model: h1,
            default_params: Params::ab(-1.0, 0.0),
            admissible: |m, p| {
                heis_only(m, p)?;
                if p.alpha * (p.alpha - 4.0) < 0.0 {
                    return Err(CoreError::Inadmissible(format!(
                        "alpha(alpha-4) = {} < 0",
                        p.alpha * (p.alpha - 4.0)
                    )));
                }
                Ok(())
            },
            build: build_heis_2,
        },
        InstanceSpec {
            id: "heis_22",
            sweep: SweepKind::AlphaBeta,
            default_model: h1,
            default_params: Params::ab(1.0, 0.0),
            admissible: |m, p| {
                heis_only(m, p)?;
                if p.alpha * (p.alpha + 4.0) < 0.0 {
                    return Err(CoreError::Inadmissible(format!(
                        "alpha(alpha+4) = {} < 0",
                        p.alpha * (p.alpha + 4.0)
                    )));
                }
                Ok(())
            },
            build: build_heis_22,
        },
        InstanceSpec {
            id: "heis_1_rewrite",
            sweep: SweepKind::AlphaBeta,
            default_model: h1,
            default_params: Params::ab(1.0, 0.0),
            admissible: heis_only,
            build: build_heis_1_rewrite,
        },
        InstanceSpec {
            id: "heis_11_rewrite",
            sweep: SweepKind::AlphaBeta,
            default_model: h1,
            default_params: Params::ab(1.0, 0.0),
            admissible: heis_only,
            build: build_heis_11_rewrite,
        },
    ]
}

pub fn find_instance(id: &str) -> Result<InstanceSpec> {
    catalog()
        .into_iter()
        .find(|s| s.id == id)
        .ok_or_else(|| CoreError::UnknownId(format!("inequality '{id}'")))
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct TermReport {
    pub name: String,
    pub coefficient: f64,
    pub value: f64,
    pub im: f64,
    pub err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeficitReport {
    pub id: String,
    pub model: String,
    pub params: Params,
    pub field: String,
    pub lhs: f64,
    pub rhs: f64,
    pub deficit: f64,
    pub total_err: f64,
    pub scale: f64,
    pub verdict: bool,
    pub terms: Vec<TermReport>,
}

impl DeficitReport {
    pub fn tolerance(&self) -> f64 {
        (10.0 * self.total_err).max(1e-8 * self.scale)
    }
}

/// Evaluate all functionals of an instance on one field and assemble the
/// deficit report. Shared functionals are cached in the evaluator.
pub fn evaluate(
    ev: &mut Evaluator,
    inst: &Instance,
    field: &ScalarField,
    spec: &QuadSpec,
) -> Result<DeficitReport> {
    let all: Vec<&Term> = inst.lhs.iter().chain(inst.rhs.iter()).collect();
    let funcs: Vec<Functional> = all.iter().map(|t| t.functional.clone()).collect();
    let vals = ev.eval_batch(field, &funcs, spec)?;
    let mut terms = Vec::with_capacity(all.len());
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let mut total_err = 0.0;
    let mut scale = 0.0;
    for (i, t) in all.iter().enumerate() {
        let v = vals[i];
        let contrib = t.coefficient * v.re;
        if i < inst.lhs.len() {
            lhs += contrib;
        } else {
            rhs += contrib;
        }
        total_err += t.coefficient.abs() * v.err;
        scale += contrib.abs();
        terms.push(TermReport {
            name: t.name.to_string(),
            coefficient: t.coefficient,
            value: v.re,
            im: v.im,
            err: v.err,
        });
    }
    let deficit = lhs - rhs;
    let tol = (10.0 * total_err).max(1e-8 * scale);
    Ok(DeficitReport {
        id: inst.id.to_string(),
        model: inst.model.tag(),
        params: inst.params,
        field: field.id.clone(),
        lhs,
        rhs,
        deficit,
        total_err,
        scale,
        verdict: deficit >= -tol,
    terms,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub alpha: f64,
    pub beta: f64,
    pub admissible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deficit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub id: String,
    pub model: String,
    pub field: String,
    pub cells: Vec<SweepCell>,
    pub min_deficit: Option<f64>,
    pub all_pass: bool,
}

/// Evaluate the deficit over a parameter grid; inadmissible cells are marked
/// and skipped. Functional values are shared across cells through the cache.
pub fn sweep(
    ev: &mut Evaluator,
    spec_: &InstanceSpec,
    model: &GroupModel,
    base: &Params,
    alphas: &[f64],
    betas: &[f64],
    field: &ScalarField,
    quad: &QuadSpec,
) -> Result<SweepReport> {
    let mut cells = Vec::new();
    let mut min_deficit: Option<f64> = None;
    let mut all_pass = true;
    for &al in alphas {
        for &be in betas {
            let params = Params {
                alpha: al,
                beta: be,
                ..*base
            };
            match spec_.instance(model, &params) {
                Err(CoreError::Inadmissible(msg)) => {
                    cells.push(SweepCell {
                        alpha: al,
                        beta: be,
                        admissible: false,
                        deficit: None,
                        verdict: None,
                        note: Some(msg),
                    });
                }
                Err(e) => return Err(e),
                Ok(inst) => {
                    let rep = evaluate(ev, &inst, field, quad)?;
                    min_deficit = Some(match min_deficit {
                        None => rep.deficit,
                        Some(m) => m.min(rep.deficit),
                    });
                    all_pass &= rep.verdict;
                    cells.push(SweepCell {
                        alpha: al,
                        beta: be,
                        admissible: true,
                        deficit: Some(rep.deficit),
                        verdict: Some(rep.verdict),
                        note: None,
                    });
                }
            }
        }
    }
    Ok(SweepReport {
        id: spec_.id.to_string(),
        model: model.tag(),
        field: field.id.clone(),
        cells,
        min_deficit,
        all_pass,
    })
}

/// Maximizer of α(N − 2 − α): α* = (N−2)/2 with value (N−2)²/4.
pub fn best_alpha_hardy(n: usize) -> Result<(f64, f64)> {
    if n < 3 {
        return Err(CoreError::InvalidParam(format!(
            "hardy constant needs N ≥ 3, got {n}"
        )));
    }
    let a = (n as f64 - 2.0) / 2.0;
    Ok((a, a * a))
}

/// Maximizer of α − α²: (1/2, 1/4).
pub fn best_alpha_critical() -> (f64, f64) {
    (0.5, 0.25)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_ids_unique_and_complete() {
        let ids: Vec<&str> = catalog().iter().map(|s| s.id).collect();
        let mut dedup = ids.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(ids.len(), dedup.len());
        assert_eq!(ids.len(), 21);
    }

    #[test]
    fn hardy_euclid_constant_quarter_on_r3() {
        let spec = find_instance("hardy_euclid").unwrap();
        let m = GroupModel::euclidean_isotropic(3);
        let inst = spec.instance(&m, &Params::default()).unwrap();
        assert_eq!(inst.rhs[0].coefficient, 0.25);
    }

    #[test]
    fn strat_zero_order_vanishes_at_origin_params() {
        let spec = find_instance("strat_rellich").unwrap();
        let m = GroupModel::heisenberg(2);
        let inst = spec.instance(&m, &Params::ab(0.0, 0.0)).unwrap();
        for t in &inst.rhs {
            assert_eq!(t.coefficient, 0.0, "term {}", t.name);
        }
    }

    #[test]
    fn heis_grad_coef_vanishes_at_n4_alpha1() {
        let spec = find_instance("heis_1").unwrap();
        let m = GroupModel::heisenberg(2); // N = 4
        let inst = spec.instance(&m, &Params::ab(1.0, 0.0)).unwrap();
        assert_eq!(inst.rhs[0].coefficient, 0.0);
    }

    #[test]
    fn heis_2_admissibility() {
        let spec = find_instance("heis_2").unwrap();
        let m = GroupModel::heisenberg(1);
        assert!(spec.instance(&m, &Params::ab(2.0, 0.0)).is_err());
        assert!(spec.instance(&m, &Params::ab(4.0, 0.0)).is_ok());
        assert!(spec.instance(&m, &Params::ab(-1.0, 0.0)).is_ok());
        // wrong model class
        assert!(spec
            .instance(&GroupModel::euclidean_isotropic(3), &Params::ab(4.0, 0.0))
            .is_err());
    }

    #[test]
    fn best_alpha_closed_forms() {
        assert_eq!(best_alpha_hardy(4).unwrap(), (1.0, 1.0));
        assert_eq!(best_alpha_hardy(3).unwrap(), (0.5, 0.25));
        assert!(best_alpha_hardy(2).is_err());
        assert_eq!(best_alpha_critical(), (0.5, 0.25));
    }

    #[test]
    fn hom_log_param_validation() {
        let spec = find_instance("hom_log").unwrap();
        let m = GroupModel::euclidean_isotropic(3);
        let mut p = spec.default_params;
        assert!(spec.instance(&m, &p).is_ok());
        p.c = 0.5;
        assert!(spec.instance(&m, &p).is_err());
        p.c = 0.0;
        p.d = 0.0;
        assert!(spec.instance(&m, &p).is_err());
    }
}
