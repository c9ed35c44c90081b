//! Evaluation of the weighted L² functionals that the inequality catalog is
//! made of: ∫|op f|² w dx, ∫(a f)·conj(b f)·w dx and the horizontal-gradient
//! sum, all with one shared quadrature sweep per (field, spec) pair.
//!
//! On Heisenberg models the catalog fields are products u(x')·b(t) and every
//! catalog operator has coefficients depending on the stratum variables only,
//! so (op f)(x', t) = Σ_m U_m(x')·b^{(m)}(t) with m ≤ 2. The sweep therefore
//! runs over the stratum grid once, accumulating a 3×3 matrix of stratum
//! integrals per functional, and pairs it with the matching matrix of 1-D
//! t-integrals. This keeps the 5-dimensional ℍ₂ integrals affordable without
//! leaving Cartesian tensor quadrature.

use crate::error::{CoreError, Result};
use crate::expr::{eval_f64, EvalCtx, Expr};
use crate::field::{FieldBody, ScalarField};
use crate::group::{quasi_norm, GroupModel};
use crate::jet::{Jet, JetShape};
use crate::op::{apply, ApplyCtx, OpExpr, OpScalar};
use crate::quad::{gl_rule, graded_boxes, BoxBounds, Kahan, KahanC, QuadSpec};
use crate::radial::RadialProfile;
use num_complex::Complex64;
use rayon::prelude::*;
use std::cell::OnceCell;
use std::collections::HashMap;
use std::sync::Arc;

/// Pointwise weight multiplying an integrand.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightFn {
    One,
    /// |x'|^{2k} — integer powers of the squared first-stratum norm.
    StratumPow(i32),
    /// w(|x|) for a closed-form radial profile in the model quasi-norm.
    Radial(RadialProfile),
    /// log |x'|².
    LogStratumSq,
}

impl WeightFn {
    fn eval(&self, model: &GroupModel, x: &[f64], rho_sq: f64) -> Result<f64> {
        match self {
            WeightFn::One => Ok(1.0),
            WeightFn::StratumPow(k) => Ok(rho_sq.powi(*k)),
            WeightFn::Radial(p) => {
                let r = quasi_norm(model, x)?;
                Ok(p.eval(r))
            }
            WeightFn::LogStratumSq => Ok(rho_sq.ln()),
        }
    }

    fn eval_stratum(&self, rho_sq: f64) -> Result<f64> {
        match self {
            WeightFn::One => Ok(1.0),
            WeightFn::StratumPow(k) => Ok(rho_sq.powi(*k)),
            WeightFn::LogStratumSq => Ok(rho_sq.ln()),
            WeightFn::Radial(_) => Err(CoreError::BadOperator(
                "radial-profile weights are realized on euclidean models only".into(),
            )),
        }
    }
}

/// One integral functional of a single field.
#[derive(Debug, Clone, PartialEq)]
pub enum Functional {
    /// ∫ |(op f)(x)|² w(x) dx
    L2Sq { op: OpExpr, w: WeightFn },
    /// ∫ (a f)(x) · conj((b f)(x)) · w(x) dx
    Inner { a: OpExpr, b: OpExpr, w: WeightFn },
    /// Σ_j ∫ |(X̃_j f)(x)|² w(x) dx
    GradHSq { w: WeightFn },
}

impl Functional {
    pub fn plain_l2(k: i32) -> Functional {
        Functional::L2Sq {
            op: OpExpr::identity(),
            w: WeightFn::StratumPow(k),
        }
    }

    fn order(&self, model: &GroupModel) -> Result<usize> {
        Ok(match self {
            Functional::L2Sq { op, .. } => op.order(model)?,
            Functional::Inner { a, b, .. } => a.order(model)?.max(b.order(model)?),
            Functional::GradHSq { .. } => 1,
        })
    }

    fn weight(&self) -> &WeightFn {
        match self {
            Functional::L2Sq { w, .. } => w,
            Functional::Inner { w, .. } => w,
            Functional::GradHSq { w } => w,
        }
    }

    /// Stable cache key.
    pub fn key(&self) -> String {
        format!("{self:?}")
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FunctionalValue {
    pub re: f64,
    pub im: f64,
    pub err: f64,
}

// ---------------------------------------------------------------------------
// slot jets (stratum ⊗ t decomposition)
// ---------------------------------------------------------------------------

const SLOTS: usize = 3;

/// Jet over the stratum variables with one coefficient vector per number of
/// t-derivatives applied to the t-factor.
#[derive(Debug, Clone)]
struct SJet {
    shape: Arc<JetShape>,
    ord: usize,
    c: Vec<[Complex64; SLOTS]>,
}

impl SJet {
    fn zero(shape: Arc<JetShape>, ord: usize) -> SJet {
        let n = shape.len_for(ord);
        SJet {
            shape,
            ord,
            c: vec![[Complex64::default(); SLOTS]; n],
        }
    }

    fn from_complex_jet(re: &Jet<f64>, im: &Jet<f64>) -> SJet {
        let mut out = SJet::zero(re.shape.clone(), re.ord);
        for i in 0..re.c.len() {
            out.c[i][0] = Complex64::new(re.c[i], im.c[i]);
        }
        out
    }

    fn truncate(&mut self, ord: usize) {
        if ord < self.ord {
            self.ord = ord;
            self.c.truncate(self.shape.len_for(ord));
        }
    }

    fn derivative(&self, v: usize) -> Result<SJet> {
        if self.ord == 0 {
            return Err(CoreError::BadOperator(
                "stratum jet order exhausted by derivatives".into(),
            ));
        }
        let ord = self.ord - 1;
        let n = self.shape.len_for(ord);
        let tbl = &self.shape.deriv[v];
        let mut c = Vec::with_capacity(n);
        for t in tbl.iter().take(n) {
            let (src, fac) = (t.0 as usize, t.1 as f64);
            let mut e = [Complex64::default(); SLOTS];
            for m in 0..SLOTS {
                e[m] = self.c[src][m] * fac;
            }
            c.push(e);
        }
        Ok(SJet {
            shape: self.shape.clone(),
            ord,
            c,
        })
    }

    fn t_shift(&self) -> Result<SJet> {
        let mut out = SJet::zero(self.shape.clone(), self.ord);
        for (i, slots) in self.c.iter().enumerate() {
            if slots[SLOTS - 1] != Complex64::default() {
                return Err(CoreError::BadOperator(
                    "more than two t-derivatives in one functional term".into(),
                ));
            }
            for m in 0..SLOTS - 1 {
                out.c[i][m + 1] = slots[m];
            }
        }
        Ok(out)
    }

    fn mul_real_jet(&self, g: &Jet<f64>) -> SJet {
        let ord = self.ord.min(g.ord);
        let out_len = self.shape.len_for(ord);
        let mut out = SJet {
            shape: self.shape.clone(),
            ord,
            c: vec![[Complex64::default(); SLOTS]; out_len],
        };
        for &(ia, ib, ic) in &self.shape.prod {
            let (ia, ib, ic) = (ia as usize, ib as usize, ic as usize);
            if ic >= out_len || ia >= self.c.len() || ib >= g.c.len() {
                continue;
            }
            let gb = g.c[ib];
            if gb == 0.0 {
                continue;
            }
            for m in 0..SLOTS {
                out.c[ic][m] += self.c[ia][m] * gb;
            }
        }
        out
    }

    fn scale(&self, s: f64) -> SJet {
        let mut out = self.clone();
        for slots in &mut out.c {
            for m in 0..SLOTS {
                slots[m] *= s;
            }
        }
        out
    }

    fn add_assign(&mut self, other: &SJet) {
        let ord = self.ord.min(other.ord);
        self.truncate(ord);
        for i in 0..self.c.len() {
            for m in 0..SLOTS {
                self.c[i][m] += other.c[i][m];
            }
        }
    }

    fn value_slots(&self) -> [Complex64; SLOTS] {
        self.c[0]
    }
}

struct SlotCtx<'a> {
    point: &'a [f64],
    shape: Arc<JetShape>,
    t_index: usize,
    norm_sq: OnceCell<Jet<f64>>,
}

impl<'a> SlotCtx<'a> {
    fn norm_sq_jet(&self) -> &Jet<f64> {
        self.norm_sq.get_or_init(|| {
            let ord = self.shape.order;
            let mut acc = Jet::zero(self.shape.clone(), ord);
            for i in 0..self.shape.nvars {
                let c = Jet::coordinate(self.shape.clone(), ord, i, self.point[i]);
                acc.add_assign(&c.mul(&c));
            }
            acc
        })
    }
}

fn apply_slots(op: &OpExpr, f: &SJet, ctx: &SlotCtx) -> Result<SJet> {
    match op {
        OpExpr::Partial(i) => {
            if *i == ctx.t_index {
                f.t_shift()
            } else {
                f.derivative(*i)
            }
        }
        OpExpr::MulCoord(i) => {
            if *i == ctx.t_index {
                return Err(CoreError::BadOperator(
                    "multiplication by t is outside the catalog operator class".into(),
                ));
            }
            let c = Jet::coordinate(ctx.shape.clone(), f.ord, *i, ctx.point[*i]);
            Ok(f.mul_real_jet(&c))
        }
        OpExpr::MulStratumNormPow(k) => {
            let mut nsq = ctx.norm_sq_jet().clone();
            nsq.truncate(f.ord);
            let w = <f64 as OpScalar>::norm_pow(&nsq, *k)?;
            Ok(f.mul_real_jet(&w))
        }
        OpExpr::Scale(r) => Ok(f.scale(crate::scalar::rational_to_f64(r))),
        OpExpr::Sum(es) => {
            let mut acc: Option<SJet> = None;
            for e in es {
                let j = apply_slots(e, f, ctx)?;
                match &mut acc {
                    None => acc = Some(j),
                    Some(a) => a.add_assign(&j),
                }
            }
            acc.ok_or_else(|| CoreError::BadOperator("empty operator sum".into()))
        }
        OpExpr::Compose(es) => {
            let mut cur = f.clone();
            for e in es.iter().rev() {
                cur = apply_slots(e, &cur, ctx)?;
            }
            Ok(cur)
        }
        other => Err(CoreError::BadOperator(format!(
            "operator node {other:?} is not supported on product fields"
        ))),
    }
}

// ---------------------------------------------------------------------------
// prepared complex expressions with the radial fast path
// ---------------------------------------------------------------------------

/// Expression pair prepared for one sweep. Components that are univariate in
/// |x'|² skip the generic AST walk: one 1-D jet plus a chain rule through a
/// directly assembled squared-norm jet.
struct PreparedC {
    re: Expr,
    im: Option<Expr>,
    re_prof: Option<Expr>,
    im_prof: Option<Expr>,
    shape: Arc<JetShape>,
    shape1: Arc<JetShape>,
    /// positions of the first-order and diagonal second-order coefficients
    lin_pos: Vec<usize>,
    diag_pos: Vec<usize>,
    ns: usize,
}

impl PreparedC {
    fn new(c: &crate::expr::CExpr, shape: Arc<JetShape>, ns: usize) -> PreparedC {
        let order = shape.order;
        let mut lin_pos = Vec::new();
        let mut diag_pos = Vec::new();
        if order >= 1 {
            for v in 0..ns {
                let mut e = vec![0u8; shape.nvars];
                e[v] = 1;
                lin_pos.push(shape.position(&e).unwrap());
            }
        }
        if order >= 2 {
            for v in 0..ns {
                let mut e = vec![0u8; shape.nvars];
                e[v] = 2;
                diag_pos.push(shape.position(&e).unwrap());
            }
        }
        PreparedC {
            re: c.re.clone(),
            im: c.im.clone(),
            re_prof: crate::expr::as_normsq_profile(&c.re),
            im_prof: c.im.as_ref().and_then(crate::expr::as_normsq_profile),
            shape1: JetShape::get(1, order),
            shape,
            lin_pos,
            diag_pos,
            ns,
        }
    }

    /// |x'|² jet assembled coefficient-by-coefficient.
    fn norm_sq_jet(&self, x: &[f64]) -> Jet<f64> {
        let ord = self.shape.order;
        let mut j = Jet::zero(self.shape.clone(), ord);
        let mut v = 0.0;
        for i in 0..self.ns {
            v += x[i] * x[i];
        }
        j.c[0] = v;
        if ord >= 1 {
            for i in 0..self.ns {
                j.c[self.lin_pos[i]] = 2.0 * x[i];
            }
        }
        if ord >= 2 {
            for i in 0..self.ns {
                j.c[self.diag_pos[i]] = 1.0;
            }
        }
        j
    }

    fn eval_component(
        &self,
        expr: &Expr,
        prof: &Option<Expr>,
        ctx: &EvalCtx,
        x: &[f64],
        nsq: Option<&Jet<f64>>,
    ) -> Result<Jet<f64>> {
        if let (Some(p), Some(nsq)) = (prof, nsq) {
            let v = [nsq.c[0]];
            let ctx1 = EvalCtx {
                model: ctx.model,
                nvars: 1,
                stratum_dim: 0,
            };
            let g = crate::expr::eval_f64_shaped(p, &ctx1, &v, &self.shape1)?;
            return Ok(nsq.compose_series(&g.c));
        }
        crate::expr::eval_f64_shaped(expr, ctx, x, &self.shape)
    }

    fn eval(&self, ctx: &EvalCtx, x: &[f64]) -> Result<(Jet<f64>, Jet<f64>)> {
        let nsq = if self.re_prof.is_some() || (self.im.is_some() && self.im_prof.is_some()) {
            Some(self.norm_sq_jet(x))
        } else {
            None
        };
        let jre = self.eval_component(&self.re, &self.re_prof, ctx, x, nsq.as_ref())?;
        let jim = match &self.im {
            Some(e) => self.eval_component(e, &self.im_prof, ctx, x, nsq.as_ref())?,
            None => Jet::zero(self.shape.clone(), self.shape.order),
        };
        Ok((jre, jim))
    }
}

// ---------------------------------------------------------------------------
// shared sweeps
// ---------------------------------------------------------------------------

/// Operator pair of a functional in expanded form, shared per sweep.
enum Compiled {
    L2(OpExpr),
    Pair(OpExpr, OpExpr),
    Grad(Vec<OpExpr>),
}

fn compile(funcs: &[Functional], model: &GroupModel) -> Result<Vec<Compiled>> {
    funcs
        .iter()
        .map(|f| {
            Ok(match f {
                Functional::L2Sq { op, .. } => Compiled::L2(op.expand(model)?),
                Functional::Inner { a, b, .. } => {
                    Compiled::Pair(a.expand(model)?, b.expand(model)?)
                }
                Functional::GradHSq { .. } => Compiled::Grad(
                    (0..model.stratum_dim())
                        .map(|j| OpExpr::Horizontal(j).expand(model))
                        .collect::<Result<Vec<_>>>()?,
                ),
            })
        })
        .collect()
}

/// Evaluate a batch of functionals of one field. All functionals share the
/// node sweeps; the error estimate is a full recomputation at the refined
/// node count.
pub fn eval_functionals(
    field: &ScalarField,
    funcs: &[Functional],
    spec: &QuadSpec,
) -> Result<Vec<FunctionalValue>> {
    spec.validate()?;
    if !spec.contains(&clip_infinite(&field.support.bounds, &spec.box_bounds)) {
        return Err(CoreError::Quadrature(
            "quadrature box does not contain the field support".into(),
        ));
    }
    if !field.is_compactly_supported() {
        return Err(CoreError::Quadrature(
            "field is not compactly supported (missing t-factor)".into(),
        ));
    }
    let model = &field.model;
    let order = funcs
        .iter()
        .map(|f| f.order(model))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(0);
    if order > crate::jet::MAX_ORDER {
        return Err(CoreError::BadOperator("functional order exceeds 4".into()));
    }
    let compiled = compile(funcs, model)?;
    match (&field.body, model) {
        (FieldBody::Product { stratum, t }, GroupModel::Heisenberg { .. }) => {
            let coarse = heis_sweep(field, stratum, t, funcs, &compiled, spec, order, 1)?;
            let fine = heis_sweep(
                field,
                stratum,
                t,
                funcs,
                &compiled,
                spec,
                order,
                spec.refinement_factor,
            )?;
            Ok(pair_up(coarse, fine))
        }
        (_, GroupModel::Euclidean(_)) => {
            let coarse = euclid_sweep(field, funcs, &compiled, spec, order, 1)?;
            let fine = euclid_sweep(field, funcs, &compiled, spec, order, spec.refinement_factor)?;
            Ok(pair_up(coarse, fine))
        }
        _ => Err(CoreError::Field(
            "heisenberg fields must be stratum × t products".into(),
        )),
    }
}

/// Single-resolution variant (no refined error pass); used inside probe
/// searches where only the quotient ordering matters.
pub fn eval_functionals_single(
    field: &ScalarField,
    funcs: &[Functional],
    spec: &QuadSpec,
) -> Result<Vec<Complex64>> {
    spec.validate()?;
    if !field.is_compactly_supported() {
        return Err(CoreError::Quadrature(
            "field is not compactly supported (missing t-factor)".into(),
        ));
    }
    let model = &field.model;
    let order = funcs
        .iter()
        .map(|f| f.order(model))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(0);
    let compiled = compile(funcs, model)?;
    match (&field.body, model) {
        (FieldBody::Product { stratum, t }, GroupModel::Heisenberg { .. }) => {
            heis_sweep(field, stratum, t, funcs, &compiled, spec, order, 1)
        }
        (_, GroupModel::Euclidean(_)) => euclid_sweep(field, funcs, &compiled, spec, order, 1),
        _ => Err(CoreError::Field(
            "heisenberg fields must be stratum × t products".into(),
        )),
    }
}

fn clip_infinite(bounds: &[(f64, f64)], into: &[(f64, f64)]) -> Vec<(f64, f64)> {
    bounds
        .iter()
        .zip(into)
        .map(|(&(lo, hi), &(blo, bhi))| {
            (
                if lo.is_finite() { lo } else { blo },
                if hi.is_finite() { hi } else { bhi },
            )
        })
        .collect()
}

fn pair_up(coarse: Vec<Complex64>, fine: Vec<Complex64>) -> Vec<FunctionalValue> {
    coarse
        .into_iter()
        .zip(fine)
        .map(|(c, f)| FunctionalValue {
            re: c.re,
            im: c.im,
            err: (c - f).norm(),
        })
        .collect()
}

fn stratum_boxes(spec: &QuadSpec, rmin: f64, dim: usize) -> Vec<BoxBounds> {
    let sub = QuadSpec {
        box_bounds: spec.box_bounds[..dim].to_vec(),
        ..spec.clone()
    };
    match graded_boxes(&sub, Some(rmin)) {
        Some(boxes) => boxes,
        None => vec![sub.box_bounds],
    }
}

/// Heisenberg product-field sweep at `factor × nodes_per_axis`.
#[allow(clippy::too_many_arguments)]
fn heis_sweep(
    field: &ScalarField,
    stratum: &crate::expr::CExpr,
    t_factor: &crate::expr::CExpr,
    funcs: &[Functional],
    compiled: &[Compiled],
    spec: &QuadSpec,
    order: usize,
    factor: usize,
) -> Result<Vec<Complex64>> {
    let model = &field.model;
    let ns = model.stratum_dim();
    let t_index = model.ambient_dim() - 1;
    let p = spec.nodes_per_axis * factor;
    let shape = JetShape::get(ns, order);
    let sctx_template = EvalCtx {
        model,
        nvars: ns,
        stratum_dim: ns,
    };
    let prep = PreparedC::new(stratum, shape.clone(), ns);

    // t-matrices: T[m][m'] = ∫ b^{(m)} conj(b^{(m')}) dt over the t-bounds
    let (tlo, thi) = spec.box_bounds[t_index];
    let t_mat = t_matrix(model, t_factor, tlo, thi, p)?;

    let boxes = stratum_boxes(spec, field.support.rmin, ns);
    let nfun = funcs.len();

    // per-box accumulation, boxes combined in fixed order
    let box_results: Vec<Result<Vec<[[Complex64; SLOTS]; SLOTS]>>> = boxes
        .par_iter()
        .map(|b| {
            let (n1, w1) = gl_rule(p);
            let mut nodes = Vec::with_capacity(ns);
            let mut weights = Vec::with_capacity(ns);
            for &(lo, hi) in b.iter() {
                let c = 0.5 * (lo + hi);
                let h = 0.5 * (hi - lo);
                nodes.push(n1.iter().map(|&x| c + h * x).collect::<Vec<_>>());
                weights.push(w1.iter().map(|&w| w * h).collect::<Vec<_>>());
            }
            let mut acc = vec![[[KahanC::new(); SLOTS]; SLOTS]; nfun];
            let mut idx = vec![0usize; ns];
            let mut x = vec![0.0f64; ns];
            'nodes: loop {
                let mut wq = 1.0;
                for d in 0..ns {
                    x[d] = nodes[d][idx[d]];
                    wq *= weights[d][idx[d]];
                }
                let rho_sq: f64 = x.iter().map(|v| v * v).sum();
                let rho = rho_sq.sqrt();
                if rho > field.support.rmin * 1e-3 {
                    let inside = rho >= field.support.rmin && rho <= field.support.rmax;
                    if inside {
                        let (jre, jim) = prep.eval(&sctx_template, &x)?;
                        if !(jre.is_zero() && jim.is_zero()) {
                            let sj = SJet::from_complex_jet(&jre, &jim);
                            let ctx = SlotCtx {
                                point: &x,
                                shape: shape.clone(),
                                t_index,
                                norm_sq: OnceCell::new(),
                            };
                            for (fi, f) in funcs.iter().enumerate() {
                                let wv = f.weight().eval_stratum(rho_sq)? * wq;
                                match &compiled[fi] {
                                    Compiled::L2(op) => {
                                        let a = apply_slots(op, &sj, &ctx)?.value_slots();
                                        rank1_acc(&mut acc[fi], &a, &a, wv);
                                    }
                                    Compiled::Pair(oa, ob) => {
                                        let a = apply_slots(oa, &sj, &ctx)?.value_slots();
                                        let bsl = apply_slots(ob, &sj, &ctx)?.value_slots();
                                        rank1_acc(&mut acc[fi], &a, &bsl, wv);
                                    }
                                    Compiled::Grad(ops) => {
                                        for op in ops {
                                            let a = apply_slots(op, &sj, &ctx)?.value_slots();
                                            rank1_acc(&mut acc[fi], &a, &a, wv);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                let mut d = ns;
                loop {
                    if d == 0 {
                        break 'nodes;
                    }
                    d -= 1;
                    idx[d] += 1;
                    if idx[d] < p {
                        break;
                    }
                    idx[d] = 0;
                }
            }
            Ok(acc
                .into_iter()
                .map(|m| {
                    let mut out = [[Complex64::default(); SLOTS]; SLOTS];
                    for i in 0..SLOTS {
                        for j in 0..SLOTS {
                            out[i][j] = m[i][j].value();
                        }
                    }
                    out
                })
                .collect())
        })
        .collect();

    // combine boxes in order, then contract with the t-matrix
    let mut totals = vec![[[KahanC::new(); SLOTS]; SLOTS]; nfun];
    for br in box_results {
        let br = br?;
        for (fi, m) in br.into_iter().enumerate() {
            for i in 0..SLOTS {
                for j in 0..SLOTS {
                    totals[fi][i][j].add(m[i][j]);
                }
            }
        }
    }
    Ok((0..nfun)
        .map(|fi| {
            let mut v = KahanC::new();
            for i in 0..SLOTS {
                for j in 0..SLOTS {
                    v.add(totals[fi][i][j].value() * t_mat[i][j]);
                }
            }
            v.value()
        })
        .collect())
}

fn rank1_acc(
    acc: &mut [[KahanC; SLOTS]; SLOTS],
    a: &[Complex64; SLOTS],
    b: &[Complex64; SLOTS],
    w: f64,
) {
    for i in 0..SLOTS {
        if a[i] == 0.0.into() {
            continue;
        }
        for j in 0..SLOTS {
            if b[j] == 0.0.into() {
                continue;
            }
            acc[i][j].add(a[i] * b[j].conj() * w);
        }
    }
}

/// T[m][m'] = ∫ b^{(m)}(t) conj(b^{(m')}(t)) dt by 1-D Gauss–Legendre.
fn t_matrix(
    model: &GroupModel,
    t_factor: &crate::expr::CExpr,
    lo: f64,
    hi: f64,
    p: usize,
) -> Result<[[Complex64; SLOTS]; SLOTS]> {
    let ctx = EvalCtx::scalar_var(model);
    let (n1, w1) = gl_rule(p);
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let mut acc = [[KahanC::new(); SLOTS]; SLOTS];
    for (xi, wi) in n1.iter().zip(&w1) {
        let t = c + h * xi;
        let w = wi * h;
        let jre = eval_f64(&t_factor.re, &ctx, &[t], 2)?;
        let jim = match &t_factor.im {
            Some(e) => eval_f64(e, &ctx, &[t], 2)?,
            None => Jet::zero(jre.shape.clone(), 2),
        };
        // b^{(m)} = m! · c_m
        let mut b = [Complex64::default(); SLOTS];
        let facts = [1.0, 1.0, 2.0];
        for m in 0..SLOTS {
            b[m] = Complex64::new(jre.c[m] * facts[m], jim.c[m] * facts[m]);
        }
        for i in 0..SLOTS {
            for j in 0..SLOTS {
                acc[i][j].add(b[i] * b[j].conj() * w);
            }
        }
    }
    let mut out = [[Complex64::default(); SLOTS]; SLOTS];
    for i in 0..SLOTS {
        for j in 0..SLOTS {
            out[i][j] = acc[i][j].value();
        }
    }
    Ok(out)
}

/// Euclidean direct sweep at `factor × nodes_per_axis`.
fn euclid_sweep(
    field: &ScalarField,
    funcs: &[Functional],
    compiled: &[Compiled],
    spec: &QuadSpec,
    order: usize,
    factor: usize,
) -> Result<Vec<Complex64>> {
    let model = &field.model;
    let dim = model.ambient_dim();
    let p = spec.nodes_per_axis * factor;
    let shape = JetShape::get(dim, order);
    let (am_re, am_im) = field.ambient_exprs();
    let prep = PreparedC::new(
        &crate::expr::CExpr {
            re: am_re,
            im: am_im,
        },
        shape.clone(),
        model.stratum_dim(),
    );
    let ectx = EvalCtx::ambient(model);
    let boxes = stratum_boxes(spec, field.support.rmin, dim);
    let nfun = funcs.len();

    let box_results: Vec<Result<Vec<Complex64>>> = boxes
        .par_iter()
        .map(|b| {
            let (n1, w1) = gl_rule(p);
            let mut nodes = Vec::with_capacity(dim);
            let mut weights = Vec::with_capacity(dim);
            for &(lo, hi) in b.iter() {
                let cc = 0.5 * (lo + hi);
                let h = 0.5 * (hi - lo);
                nodes.push(n1.iter().map(|&x| cc + h * x).collect::<Vec<_>>());
                weights.push(w1.iter().map(|&w| w * h).collect::<Vec<_>>());
            }
            let mut acc = vec![KahanC::new(); nfun];
            let mut idx = vec![0usize; dim];
            let mut x = vec![0.0f64; dim];
            'nodes: loop {
                let mut wq = 1.0;
                for d in 0..dim {
                    x[d] = nodes[d][idx[d]];
                    wq *= weights[d][idx[d]];
                }
                if field.inside_support(&x) {
                    let (jre, jim) = prep.eval(&ectx, &x)?;
                    if !(jre.is_zero() && jim.is_zero()) {
                        let rho_sq: f64 = x.iter().map(|v| v * v).sum();
                        let actx: ApplyCtx<f64> = ApplyCtx::new(model, &x, shape.clone());
                        for (fi, f) in funcs.iter().enumerate() {
                            let wv = f.weight().eval(model, &x, rho_sq)? * wq;
                            match &compiled[fi] {
                                Compiled::L2(op) => {
                                    let v = apply_pair(op, &jre, &jim, &actx)?;
                                    acc[fi].add(Complex64::new(v.norm_sqr() * wv, 0.0));
                                }
                                Compiled::Pair(oa, ob) => {
                                    let va = apply_pair(oa, &jre, &jim, &actx)?;
                                    let vb = apply_pair(ob, &jre, &jim, &actx)?;
                                    acc[fi].add(va * vb.conj() * wv);
                                }
                                Compiled::Grad(ops) => {
                                    let mut s = 0.0;
                                    for op in ops {
                                        let v = apply_pair(op, &jre, &jim, &actx)?;
                                        s += v.norm_sqr();
                                    }
                                    acc[fi].add(Complex64::new(s * wv, 0.0));
                                }
                            }
                        }
                    }
                }
                let mut d = dim;
                loop {
                    if d == 0 {
                        break 'nodes;
                    }
                    d -= 1;
                    idx[d] += 1;
                    if idx[d] < p {
                        break;
                    }
                    idx[d] = 0;
                }
            }
            Ok(acc.into_iter().map(|k| k.value()).collect())
        })
        .collect();

    let mut totals = vec![KahanC::new(); nfun];
    for br in box_results {
        for (fi, v) in br?.into_iter().enumerate() {
            totals[fi].add(v);
        }
    }
    Ok(totals.into_iter().map(|k| k.value()).collect())
}

fn apply_pair(
    op: &OpExpr,
    jre: &Jet<f64>,
    jim: &Jet<f64>,
    ctx: &ApplyCtx<f64>,
) -> Result<Complex64> {
    let re = apply(op, jre, ctx)?.value();
    let im = if jim.is_zero() {
        0.0
    } else {
        apply(op, jim, ctx)?.value()
    };
    Ok(Complex64::new(re, im))
}

// ---------------------------------------------------------------------------
// cached evaluator and spec-level operations
// ---------------------------------------------------------------------------

/// Memoizes functional values per (model, field, spec, functional).
#[derive(Default)]
pub struct Evaluator {
    cache: HashMap<String, FunctionalValue>,
}

impl Evaluator {
    pub fn new() -> Self {
        Evaluator::default()
    }

    pub fn eval_batch(
        &mut self,
        field: &ScalarField,
        funcs: &[Functional],
        spec: &QuadSpec,
    ) -> Result<Vec<FunctionalValue>> {
        let spec_key = serde_json::to_string(spec).unwrap_or_default();
        let keys: Vec<String> = funcs
            .iter()
            .map(|f| {
                format!(
                    "{}|{}|{}|{}",
                    field.model.tag(),
                    field.id,
                    spec_key,
                    f.key()
                )
            })
            .collect();
        let missing: Vec<usize> = (0..funcs.len())
            .filter(|&i| !self.cache.contains_key(&keys[i]))
            .collect();
        if !missing.is_empty() {
            let todo: Vec<Functional> = missing.iter().map(|&i| funcs[i].clone()).collect();
            let vals = eval_functionals(field, &todo, spec)?;
            for (slot, v) in missing.iter().zip(vals) {
                self.cache.insert(keys[*slot].clone(), v);
            }
        }
        Ok(keys.iter().map(|k| self.cache[k]).collect())
    }
}

/// ∫ |f|² |x'|^{2k} dx.
pub fn weighted_l2_sq(field: &ScalarField, k: i32, spec: &QuadSpec) -> Result<FunctionalValue> {
    if k < 0 && !(field.support.rmin > 0.0) {
        return Err(CoreError::NearSingular(
            "negative weight power needs a positive stratum margin".into(),
        ));
    }
    Ok(eval_functionals(field, &[Functional::plain_l2(k)], spec)?[0])
}

/// ∫ (op_f f)·conj(op_g g)·|x'|^{2k} dx for two fields, pointwise.
/// Used by the adjointness checks on low-dimensional models.
pub fn weighted_inner_two(
    f: &ScalarField,
    g: &ScalarField,
    op_f: &OpExpr,
    op_g: &OpExpr,
    k: i32,
    spec: &QuadSpec,
) -> Result<FunctionalValue> {
    spec.validate()?;
    let model = f.model.clone();
    if g.model != model {
        return Err(CoreError::Field("field models differ".into()));
    }
    let order = op_f.order(&model)?.max(op_g.order(&model)?);
    let shape = JetShape::get(model.ambient_dim(), order);
    let ns = model.stratum_dim();
    let ef = op_f.expand(&model)?;
    let eg = op_g.expand(&model)?;
    let rmin = f.support.rmin.min(g.support.rmin);
    let integrand = |x: &[f64]| -> Complex64 {
        let rho_sq: f64 = x[..ns].iter().map(|v| v * v).sum();
        if k < 0 && rho_sq <= (rmin * 1e-3).powi(2) {
            return Complex64::default();
        }
        let (fre, fim) = match f.eval_jet(x, order) {
            Ok(v) => v,
            Err(_) => return Complex64::default(),
        };
        let (gre, gim) = match g.eval_jet(x, order) {
            Ok(v) => v,
            Err(_) => return Complex64::default(),
        };
        if (fre.is_zero() && fim.is_zero()) || (gre.is_zero() && gim.is_zero()) {
            return Complex64::default();
        }
        let ctx: ApplyCtx<f64> = ApplyCtx::new(&model, x, shape.clone());
        let va = match apply_pair(&ef, &fre, &fim, &ctx) {
            Ok(v) => v,
            Err(_) => return Complex64::default(),
        };
        let vb = match apply_pair(&eg, &gre, &gim, &ctx) {
            Ok(v) => v,
            Err(_) => return Complex64::default(),
        };
        va * vb.conj() * rho_sq.powi(k)
    };
    let r = crate::quad::integrate(integrand, spec, Some(rmin))?;
    Ok(FunctionalValue {
        re: r.re,
        im: r.im,
        err: r.err_estimate,
    })
}

/// Ratio [∫ h(|x|) dx] / [∫₀^∞ h(r) r^{Q−1} dr] — the total quasi-sphere
/// measure; profile-independent by the polar decomposition.
pub fn polar_consistency_ratio(
    model: &GroupModel,
    profile: &Expr,
    r_support: (f64, f64),
    spec: &QuadSpec,
) -> Result<(f64, f64)> {
    if !model.is_euclidean() {
        return Err(CoreError::InvalidModel(
            "polar consistency is realized on euclidean models".into(),
        ));
    }
    let ctx1 = EvalCtx::scalar_var(model);
    let h = |r: f64| -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        eval_f64(profile, &ctx1, &[r], 0)
            .map(|j| j.value())
            .unwrap_or(0.0)
    };
    let num = crate::quad::integrate(
        |x| {
            let r = quasi_norm(model, x).unwrap_or(0.0);
            Complex64::new(h(r), 0.0)
        },
        spec,
        Some(r_support.0),
    )?;
    // 1-D radial side at matching resolution
    let q = model.q_hom();
    let (n1, w1) = gl_rule(spec.nodes_per_axis * spec.refinement_factor);
    let c = 0.5 * (r_support.0 + r_support.1);
    let hw = 0.5 * (r_support.1 - r_support.0);
    let mut acc = Kahan::new();
    for (xi, wi) in n1.iter().zip(&w1) {
        let r = c + hw * xi;
        acc.add(h(r) * r.powf(q - 1.0) * wi * hw);
    }
    let den = acc.value();
    if den.abs() < 1e-300 {
        return Err(CoreError::Quadrature("degenerate radial profile".into()));
    }
    let ratio = num.re / den;
    let err = num.err_estimate / den.abs();
    if !ratio.is_finite() || err > 0.05 * ratio.abs() {
        return Err(CoreError::Quadrature(format!(
            "polar ratio did not converge (ratio {ratio}, err {err})"
        )));
    }
    Ok((ratio, err))
}

/// Radial derivative ℛf(x) = (Σ νᵢ xᵢ ∂ᵢ f)/|x| on Euclidean models.
pub fn radial_derivative(
    model: &GroupModel,
    field: &ScalarField,
    x: &[f64],
) -> Result<Complex64> {
    let r = quasi_norm(model, x)?;
    if r < crate::group::NEAR_ORIGIN {
        return Err(CoreError::NearSingular(format!(
            "quasi-norm {r} below threshold"
        )));
    }
    let (jre, jim) = field.eval_jet(x, 1)?;
    let shape = jre.shape.clone();
    let ctx: ApplyCtx<f64> = ApplyCtx::new(model, x, shape);
    apply_pair(&OpExpr::Radial.expand(model)?, &jre, &jim, &ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::default_field;

    fn spec_for(field: &ScalarField, p: usize) -> QuadSpec {
        QuadSpec::new(clip_infinite(&field.support.bounds, &field.support.bounds), p)
    }

    #[test]
    fn plain_l2_positive_euclid() {
        let model = GroupModel::euclidean_isotropic(3);
        let f = default_field(&model, "radial").unwrap();
        let spec = QuadSpec::new(f.support.bounds.clone(), 24);
        let v = weighted_l2_sq(&f, 0, &spec).unwrap();
        assert!(v.re > 0.0);
        assert!(v.err < 1e-2 * v.re);
        // weight k=-1 with support in |x'| ≥ rmin bounds the weighted norm
        let w = weighted_l2_sq(&f, -1, &spec).unwrap();
        assert!(w.re <= v.re / (f.support.rmin * f.support.rmin) * 1.0001);
        assert!(w.re >= v.re / (f.support.rmax * f.support.rmax) * 0.9999);
    }

    #[test]
    fn product_path_matches_pointwise_on_h1() {
        // ∫ |f|² on ℍ₁ computed by the slot path and by the pointwise
        // two-field inner product must agree.
        let model = GroupModel::heisenberg(1);
        let f = default_field(&model, "complex").unwrap();
        let mut bounds = f.support.bounds.clone();
        let spec = QuadSpec::new(std::mem::take(&mut bounds), 20);
        let a = weighted_l2_sq(&f, -1, &spec).unwrap();
        let b = weighted_inner_two(&f, &f, &OpExpr::identity(), &OpExpr::identity(), -1, &spec)
            .unwrap();
        assert!(
            (a.re - b.re).abs() <= 10.0 * (a.err + b.err) + 1e-10,
            "slot {} vs pointwise {}",
            a.re,
            b.re
        );
        assert!(a.im.abs() <= 10.0 * a.err + 1e-12);
    }

    #[test]
    fn gradient_functional_on_h1_products() {
        // T f of a product field is u·b'; Z f of a stratum-radial product is 0.
        let model = GroupModel::heisenberg(1);
        let f = default_field(&model, "radial").unwrap();
        let spec = QuadSpec::new(f.support.bounds.clone(), 20);
        let vals = eval_functionals(
            &f,
            &[
                Functional::L2Sq {
                    op: OpExpr::Z,
                    w: WeightFn::One,
                },
                Functional::L2Sq {
                    op: OpExpr::T,
                    w: WeightFn::One,
                },
                Functional::GradHSq { w: WeightFn::One },
            ],
            &spec,
        )
        .unwrap();
        assert!(vals[0].re.abs() <= 10.0 * vals[0].err + 1e-12, "Zf ≠ 0: {}", vals[0].re);
        assert!(vals[1].re > 0.0);
        assert!(vals[2].re > 0.0);
    }

    #[test]
    fn polar_ratio_isotropic() {
        // sphere measures: 4π in ℝ³, 2π in ℝ²
        let bump = Expr::LogBump {
            arg: Box::new(Expr::Coord(0)),
            r0: 1.0,
            s: 0.5,
        };
        for (n, expect) in [(3usize, 4.0 * std::f64::consts::PI), (2, 2.0 * std::f64::consts::PI)]
        {
            let model = GroupModel::euclidean_isotropic(n);
            let rmax = (0.5f64).exp() * 1.001;
            let spec = QuadSpec::new(vec![(-rmax, rmax); n], 48);
            let (ratio, err) =
                polar_consistency_ratio(&model, &bump, ((-0.5f64).exp() * 0.999, rmax), &spec)
                    .unwrap();
            assert!(
                (ratio - expect).abs() < 20.0 * err.max(1e-4 * expect),
                "n={n}: ratio {ratio} vs {expect} (err {err})"
            );
        }
    }

    #[test]
    fn radial_derivative_examples() {
        // isotropic ℝ³, f = exp(−|x|²) at (1,0,0): ℛf = −2 e^{−1}
        let model = GroupModel::euclidean_isotropic(3);
        let f = ScalarField {
            id: "gauss".into(),
            model: model.clone(),
            body: crate::field::FieldBody::Direct(crate::expr::CExpr::real(Expr::Exp(Box::new(
                Expr::Neg(Box::new(Expr::StratumNormSq)),
            )))),
            support: crate::field::SupportInfo {
                bounds: vec![(-10.0, 10.0); 3],
                rmin: 1e-6,
                rmax: 10.0,
            },
        };
        let v = radial_derivative(&model, &f, &[1.0, 0.0, 0.0]).unwrap();
        assert!((v.re + 2.0 * (-1.0f64).exp()).abs() < 1e-12);
        // |x|² has radial derivative 2|x|
        let f2 = ScalarField {
            id: "rsq".into(),
            body: crate::field::FieldBody::Direct(crate::expr::CExpr::real(Expr::StratumNormSq)),
            ..f.clone()
        };
        let x = [0.3, -0.4, 1.2];
        let r = quasi_norm(&model, &x).unwrap();
        let v = radial_derivative(&model, &f2, &x).unwrap();
        assert!((v.re - 2.0 * r).abs() < 1e-12);
        // rejection near the origin
        assert!(radial_derivative(&model, &f, &[1e-12, 0.0, 0.0]).is_err());
    }
}
