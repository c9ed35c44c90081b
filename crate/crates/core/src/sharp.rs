//! Sharp-constant probes: minimize Rayleigh quotients over parametric
//! extremizing families and report how close the infimum estimate comes to
//! the constant the inequality states.
//!
//! Extremizing families concentrate over many radial decades, so their
//! quadrature uses the dyadically graded shells from the quadrature module;
//! the search runs at a single coarse resolution and the reported best point
//! is re-evaluated with the refined error pass.

use crate::error::{CoreError, Result};
use crate::expr::{CExpr, Expr};
use crate::field::{FieldBody, ScalarField, SupportInfo};
use crate::functional::{eval_functionals, eval_functionals_single, Functional, WeightFn};
use crate::group::GroupModel;
use crate::op::OpExpr;
use crate::optim::nelder_mead;
use crate::quad::{Grading, QuadSpec};
use crate::radial::RadialProfile;
use serde::Serialize;

pub struct RayleighProblem {
    pub id: &'static str,
    pub target: f64,
    pub model: GroupModel,
    pub param_names: Vec<&'static str>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub start: Vec<f64>,
    pub numerator: Functional,
    pub denominator: Functional,
    pub family: fn(&GroupModel, &[f64]) -> Result<ScalarField>,
    /// Nodes per axis (per graded box) for the final refined evaluation.
    pub final_nodes: usize,
    /// Nodes per axis during the search (single resolution).
    pub search_nodes: usize,
}

fn quad_for(field: &ScalarField, nodes: usize) -> QuadSpec {
    QuadSpec {
        grading: Grading::Auto,
        refinement_factor: 2,
        ..QuadSpec::new(
            field
                .support
                .bounds
                .iter()
                .map(|&(lo, hi)| {
                    // symmetric box for the graded scheme
                    let m = lo.abs().max(hi.abs());
                    (-m, m)
                })
                .collect(),
            nodes,
        )
    }
}

/// Rayleigh quotient with its propagated quadrature error estimate.
pub fn rayleigh(problem: &RayleighProblem, params: &[f64], nodes: usize) -> Result<(f64, f64)> {
    let field = (problem.family)(&problem.model, params)?;
    let spec = quad_for(&field, nodes);
    let vals = eval_functionals(
        &field,
        &[problem.numerator.clone(), problem.denominator.clone()],
        &spec,
    )?;
    let (num, den) = (vals[0], vals[1]);
    if den.re.abs() < 1e-30 {
        return Err(CoreError::Quadrature(
            "degenerate family member: denominator below 1e-30".into(),
        ));
    }
    let q = num.re / den.re;
    let err = (num.err / den.re.abs()) + (num.re.abs() * den.err / (den.re * den.re));
    Ok((q, err.abs()))
}

fn rayleigh_search(problem: &RayleighProblem, params: &[f64]) -> f64 {
    let field = match (problem.family)(&problem.model, params) {
        Ok(f) => f,
        Err(_) => return f64::INFINITY,
    };
    let spec = quad_for(&field, problem.search_nodes);
    match eval_functionals_single(
        &field,
        &[problem.numerator.clone(), problem.denominator.clone()],
        &spec,
    ) {
        Ok(v) => {
            if v[1].re.abs() < 1e-30 {
                f64::INFINITY
            } else {
                v[0].re / v[1].re
            }
        }
        Err(_) => f64::INFINITY,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub problem_id: String,
    pub target: f64,
    pub best_params: Vec<f64>,
    pub best_quotient: f64,
    pub gap: f64,
    pub total_err: f64,
    pub budget: usize,
    pub node_counts: (usize, usize),
    pub clamped: bool,
    /// best_quotient ≥ target − 10·total_err: the inequality direction is
    /// never violated by the probe.
    pub above_floor: bool,
}

/// Minimize the quotient over the family box with the given evaluation
/// budget, then re-evaluate the winner with the refined error pass.
pub fn probe(problem: &RayleighProblem, budget: usize) -> Result<ProbeReport> {
    if budget < 1 {
        return Err(CoreError::InvalidParam("probe budget must be ≥ 1".into()));
    }
    let r = nelder_mead(
        |x| rayleigh_search(problem, x),
        &problem.start,
        &problem.lo,
        &problem.hi,
        budget,
    );
    let (best_quotient, err) = rayleigh(problem, &r.x, problem.final_nodes)?;
    Ok(ProbeReport {
        problem_id: problem.id.to_string(),
        target: problem.target,
        best_params: r.x,
        best_quotient,
        gap: best_quotient - problem.target,
        total_err: err,
        budget,
        node_counts: (problem.search_nodes, problem.final_nodes),
        clamped: r.clamped,
        above_floor: best_quotient >= problem.target - 10.0 * err,
    })
}

// ---------------------------------------------------------------------------
// families
// ---------------------------------------------------------------------------

fn annulus_field(
    model: &GroupModel,
    id: String,
    expr: Expr,
    rmin: f64,
    rmax: f64,
) -> ScalarField {
    let bounds = match model {
        GroupModel::Euclidean(_) => vec![(-rmax * 1.02, rmax * 1.02); model.ambient_dim()],
        GroupModel::Heisenberg { n } => {
            let mut b = vec![(-rmax * 1.02, rmax * 1.02); 2 * n];
            b.push((f64::NEG_INFINITY, f64::INFINITY));
            b
        }
    };
    ScalarField {
        id,
        model: model.clone(),
        body: FieldBody::Direct(CExpr::real(expr)),
        support: SupportInfo { bounds, rmin, rmax },
    }
}

/// |x'|^{−μ+ε} · bump(log |x'| / s) on a Euclidean model.
fn power_family(model: &GroupModel, mu: f64, params: &[f64]) -> Result<ScalarField> {
    let (eps, s) = (params[0], params[1]);
    if !(eps > 0.0) || !(s > 0.0) {
        return Err(CoreError::InvalidParam(format!(
            "family parameters must be positive, got eps={eps}, s={s}"
        )));
    }
    let expo = -mu + eps;
    let bump = Expr::LogBump {
        arg: Box::new(Expr::StratumNormSq),
        r0: 1.0,
        s: 2.0 * s,
    };
    let expr = if expo == 0.0 {
        bump
    } else {
        Expr::mul2(
            Expr::RealPow(Box::new(Expr::StratumNormSq), expo / 2.0),
            bump,
        )
    };
    Ok(annulus_field(
        model,
        format!("power_family(mu={mu},eps={eps},s={s})"),
        expr,
        (-s).exp(),
        s.exp(),
    ))
}

fn hardy_r3_family(model: &GroupModel, params: &[f64]) -> Result<ScalarField> {
    power_family(model, 0.5, params)
}

fn weighted_hardy_family(model: &GroupModel, params: &[f64]) -> Result<ScalarField> {
    // μ_w = (Q − 2a − 2)/2 with a = 1/4 on ℝ³
    power_family(model, 0.25, params)
}

fn hardy_h2_family(model: &GroupModel, params: &[f64]) -> Result<ScalarField> {
    let (eps, s) = (params[0], params[1]);
    let u = power_family(model, 1.0, &[eps, s])?;
    let stratum = match u.body {
        FieldBody::Direct(c) => c,
        _ => unreachable!(),
    };
    // t-window wide enough that the vertical term is negligible
    let wt = 0.25 * (2.0 * s).exp().max(40.0);
    let bump = Expr::WinBump {
        arg: Box::new(Expr::Coord(0)),
        center: 0.0,
        halfwidth: wt,
    };
    let mut bounds = vec![(-s.exp() * 1.02, s.exp() * 1.02); model.stratum_dim()];
    bounds.push((-wt, wt));
    Ok(ScalarField {
        id: format!("h2_extremizer(eps={eps},s={s})"),
        model: model.clone(),
        body: FieldBody::Product {
            stratum,
            t: CExpr::real(bump),
        },
        support: SupportInfo {
            bounds,
            rmin: (-s).exp(),
            rmax: s.exp(),
        },
    })
}

/// (log r)^{1/2} · bump(log log r), supported in r > 1. The f64 exponent
/// range caps log r at ~200, which bounds how far this family can descend
/// toward the critical constant.
fn critical_family(model: &GroupModel, params: &[f64]) -> Result<ScalarField> {
    let (tau0, mut sigma) = (params[0], params[1]);
    if !(tau0 > 0.0) || !(sigma > 0.0) {
        return Err(CoreError::InvalidParam("family parameters must be positive".into()));
    }
    // keep the support inside representable radii and resolvable near r = 1
    let sig_cap = (200.0 / tau0).ln().min((tau0 / 0.15).ln());
    if sig_cap <= 0.0 {
        return Err(CoreError::InvalidParam("critical family box collapsed".into()));
    }
    sigma = sigma.min(sig_cap);
    let logr = Expr::Log(Box::new(Expr::StratumNorm));
    let expr = Expr::mul2(
        Expr::RealPow(Box::new(logr.clone()), 0.5),
        Expr::LogBump {
            arg: Box::new(logr),
            r0: tau0,
            s: sigma,
        },
    );
    let tau_min = tau0 * (-sigma).exp();
    let tau_max = tau0 * sigma.exp();
    Ok(annulus_field(
        model,
        format!("critical_family(tau0={tau0},sigma={sigma})"),
        expr,
        tau_min.exp(),
        tau_max.exp(),
    ))
}

// ---------------------------------------------------------------------------
// problem catalog
// ---------------------------------------------------------------------------

pub fn problem_catalog() -> Vec<RayleighProblem> {
    let r3 = GroupModel::euclidean_isotropic(3);
    let h2 = GroupModel::heisenberg(2);
    vec![
        RayleighProblem {
            id: "hardy_r3",
            target: 0.25,
            model: r3.clone(),
            param_names: vec!["eps", "s"],
            lo: vec![0.002, 2.0],
            hi: vec![0.8, 21.0],
            start: vec![0.2, 6.0],
            numerator: Functional::GradHSq { w: WeightFn::One },
            denominator: Functional::plain_l2(-1),
            family: hardy_r3_family,
            final_nodes: 16,
            search_nodes: 12,
        },
        RayleighProblem {
            id: "hardy_h2",
            target: 1.0,
            model: h2,
            param_names: vec!["eps", "s"],
            lo: vec![0.002, 2.0],
            hi: vec![0.8, 10.5],
            start: vec![0.2, 4.0],
            numerator: Functional::GradHSq { w: WeightFn::One },
            denominator: Functional::plain_l2(-1),
            family: hardy_h2_family,
            final_nodes: 12,
            search_nodes: 8,
        },
        RayleighProblem {
            id: "weighted_hardy_r3",
            // (Q − 2a − 2)²/4 at Q = 3, a = 1/4
            target: 0.0625,
            model: r3.clone(),
            param_names: vec!["eps", "s"],
            lo: vec![0.002, 2.0],
            hi: vec![0.8, 27.0],
            start: vec![0.2, 8.0],
            numerator: Functional::L2Sq {
                op: OpExpr::Radial,
                w: WeightFn::Radial(RadialProfile::power(1.0, -0.5)),
            },
            denominator: Functional::L2Sq {
                op: OpExpr::identity(),
                w: WeightFn::Radial(RadialProfile::power(1.0, -2.5)),
            },
            family: weighted_hardy_family,
            final_nodes: 16,
            search_nodes: 12,
        },
        RayleighProblem {
            id: "critical_hardy_r3",
            target: 0.25,
            model: r3,
            param_names: vec!["tau0", "sigma"],
            lo: vec![0.5, 0.5],
            hi: vec![6.0, 3.7],
            start: vec![2.0, 2.0],
            numerator: Functional::L2Sq {
                op: OpExpr::Radial,
                w: WeightFn::Radial(RadialProfile::power_log(1.0, -1.0, 2)),
            },
            denominator: Functional::L2Sq {
                op: OpExpr::identity(),
                w: WeightFn::Radial(RadialProfile::power(1.0, -3.0)),
            },
            family: critical_family,
            final_nodes: 20,
            search_nodes: 14,
        },
    ]
}

pub fn find_problem(id: &str) -> Result<RayleighProblem> {
    problem_catalog()
        .into_iter()
        .find(|p| p.id == id)
        .ok_or_else(|| CoreError::UnknownId(format!("sharpness problem '{id}'")))
}

/// Quotients of the refined and plain Hardy forms for one field: the
/// refined numerator ‖x'·∇_H f/|x'|‖² never exceeds ‖∇_H f‖², and both
/// quotients stay above the shared constant.
#[derive(Debug, Clone, Serialize)]
pub struct RefinedVsPlain {
    pub q_refined: f64,
    pub q_plain: f64,
    pub err: f64,
}

pub fn refined_vs_plain(field: &ScalarField, spec: &QuadSpec) -> Result<RefinedVsPlain> {
    let model = &field.model;
    let funcs = [
        Functional::L2Sq {
            op: OpExpr::euler_horizontal(model),
            w: WeightFn::StratumPow(-1),
        },
        Functional::GradHSq { w: WeightFn::One },
        Functional::plain_l2(-1),
    ];
    let vals = eval_functionals(field, &funcs, spec)?;
    let den = vals[2].re;
    if den.abs() < 1e-30 {
        return Err(CoreError::Quadrature("degenerate denominator".into()));
    }
    let q_refined = vals[0].re / den;
    let q_plain = vals[1].re / den;
    let err = (vals[0].err + vals[1].err) / den.abs()
        + (vals[0].re.abs() + vals[1].re.abs()) * vals[2].err / (den * den);
    Ok(RefinedVsPlain {
        q_refined,
        q_plain,
        err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_invariance_of_quotient() {
        let problem = find_problem("hardy_r3").unwrap();
        let params = [0.3, 3.0];
        let (q1, _) = rayleigh(&problem, &params, 12).unwrap();
        // same family member scaled by 3: build manually
        let f = (problem.family)(&problem.model, &params).unwrap();
        let scaled = crate::field::with_stratum_factor(&f, Expr::rat(3, 1), None);
        let spec = quad_for(&scaled, 12);
        let vals = eval_functionals(
            &scaled,
            &[problem.numerator.clone(), problem.denominator.clone()],
            &spec,
        )
        .unwrap();
        let q2 = vals[0].re / vals[1].re;
        assert!((q1 - q2).abs() < 1e-10 * q1.abs());
    }

    #[test]
    fn hardy_r3_quotient_never_below_constant() {
        let problem = find_problem("hardy_r3").unwrap();
        for params in [[0.3, 2.5], [0.1, 4.0], [0.6, 2.0]] {
            let (q, err) = rayleigh(&problem, &params, 12).unwrap();
            assert!(
                q >= 0.25 - 10.0 * err,
                "quotient {q} dipped below the constant (err {err})"
            );
        }
    }

    #[test]
    fn frozen_quotient_at_reference_point() {
        // 1-D reduction oracle value for ε = 0.05, s = 3: 0.5948 (the
        // quotient equals 1/4 + ∫w'²/∫w² for w = e^{εt}B(t/3)).
        let problem = find_problem("hardy_r3").unwrap();
        let (q, err) = rayleigh(&problem, &[0.05, 3.0], 16).unwrap();
        assert!(
            (q - 0.5948).abs() < 0.01 + 10.0 * err,
            "quotient {q} err {err}"
        );
    }

    #[test]
    fn degenerate_family_rejected() {
        let problem = find_problem("hardy_r3").unwrap();
        assert!(rayleigh(&problem, &[-0.1, 3.0], 8).is_err());
    }
}
