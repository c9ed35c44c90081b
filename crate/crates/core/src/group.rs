//! Concrete homogeneous-group models: ℝⁿ with diagonal dilations and a
//! homogeneous quasi-norm, and the Heisenberg group ℍₙ.

use crate::error::{CoreError, Result};
use crate::scalar::{format_rational, parse_rational, rational_to_f64, Ring};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

/// Threshold below which radial operations reject a point as effectively on
/// the dilation singularity.
pub const NEAR_ORIGIN: f64 = 1e-9;

/// Diagonal dilation exponents ν₁,…,νₙ with Q = Σνᵢ kept exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct DilationStructure {
    weights: Vec<BigRational>,
    q_hom: BigRational,
}

impl DilationStructure {
    pub fn new(weights: Vec<BigRational>) -> Result<Self> {
        if weights.is_empty() {
            return Err(CoreError::InvalidModel("no dilation weights".into()));
        }
        if weights.iter().any(|w| !w.is_positive()) {
            return Err(CoreError::InvalidModel(
                "dilation weights must be positive".into(),
            ));
        }
        let q_hom = weights.iter().cloned().sum();
        Ok(DilationStructure { weights, q_hom })
    }

    pub fn isotropic(n: usize) -> Self {
        DilationStructure::new(vec![BigRational::one(); n]).expect("isotropic weights")
    }

    pub fn weights(&self) -> &[BigRational] {
        &self.weights
    }

    pub fn q_hom(&self) -> &BigRational {
        &self.q_hom
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn is_isotropic(&self) -> bool {
        self.weights.iter().all(|w| w.is_one())
    }
}

/// Homogeneous quasi-norm choice for a Euclidean model.
///
/// `Anisotropic { m }` denotes |x| = (Σᵢ |xᵢ|^{2m/νᵢ})^{1/(2m)}; validity
/// requires every exponent 2m/νᵢ to be an even integer so the norm is smooth
/// away from the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum QuasiNormSpec {
    Euclidean,
    Anisotropic { m: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanModel {
    pub dilation: DilationStructure,
    pub qnorm: QuasiNormSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroupModel {
    Euclidean(EuclideanModel),
    Heisenberg { n: usize },
}

impl GroupModel {
    pub fn euclidean_isotropic(n: usize) -> Self {
        GroupModel::Euclidean(EuclideanModel {
            dilation: DilationStructure::isotropic(n),
            qnorm: QuasiNormSpec::Euclidean,
        })
    }

    pub fn euclidean(weights: Vec<BigRational>, qnorm: QuasiNormSpec) -> Result<Self> {
        let dilation = DilationStructure::new(weights)?;
        let model = GroupModel::Euclidean(EuclideanModel { dilation, qnorm });
        model.validate()?;
        Ok(model)
    }

    pub fn heisenberg(n: usize) -> Self {
        assert!(n >= 1);
        GroupModel::Heisenberg { n }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GroupModel::Euclidean(m) => match m.qnorm {
                QuasiNormSpec::Euclidean => {
                    if !m.dilation.is_isotropic() {
                        return Err(CoreError::InvalidModel(
                            "euclidean quasi-norm requires unit dilation weights".into(),
                        ));
                    }
                    Ok(())
                }
                QuasiNormSpec::Anisotropic { m: mm } => {
                    if mm == 0 {
                        return Err(CoreError::InvalidModel("anisotropic m must be ≥ 1".into()));
                    }
                    for w in m.dilation.weights() {
                        // 2m/ν must be an even integer
                        let e = BigRational::from_int(2 * mm as i64) / w.clone();
                        if !e.is_integer() || (e.numer() % 2i32) != num_bigint::BigInt::zero() {
                            return Err(CoreError::InvalidModel(format!(
                                "2m/ν = {} is not an even integer",
                                e
                            )));
                        }
                    }
                    Ok(())
                }
            },
            GroupModel::Heisenberg { n } => {
                if *n < 1 {
                    Err(CoreError::InvalidModel("heisenberg needs n ≥ 1".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Ambient (topological) dimension.
    pub fn ambient_dim(&self) -> usize {
        match self {
            GroupModel::Euclidean(m) => m.dilation.dim(),
            GroupModel::Heisenberg { n } => 2 * n + 1,
        }
    }

    /// Dimension N of the first stratum.
    pub fn stratum_dim(&self) -> usize {
        match self {
            GroupModel::Euclidean(m) => m.dilation.dim(),
            GroupModel::Heisenberg { n } => 2 * n,
        }
    }

    /// Step of the group as a stratified group (1 or 2).
    pub fn step(&self) -> usize {
        match self {
            GroupModel::Euclidean(_) => 1,
            GroupModel::Heisenberg { .. } => 2,
        }
    }

    pub fn q_hom_rational(&self) -> BigRational {
        match self {
            GroupModel::Euclidean(m) => m.dilation.q_hom().clone(),
            GroupModel::Heisenberg { n } => BigRational::from_int(2 * *n as i64 + 2),
        }
    }

    pub fn q_hom(&self) -> f64 {
        rational_to_f64(&self.q_hom_rational())
    }

    pub fn dilation_weights_f64(&self) -> Vec<f64> {
        match self {
            GroupModel::Euclidean(m) => m.dilation.weights().iter().map(rational_to_f64).collect(),
            GroupModel::Heisenberg { n } => {
                let mut w = vec![1.0; 2 * n];
                w.push(2.0);
                w
            }
        }
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self, GroupModel::Euclidean(_))
    }

    /// Short identifier used in reports, e.g. `euclid:3` or `heis:2`.
    pub fn tag(&self) -> String {
        match self {
            GroupModel::Euclidean(m) => {
                if m.dilation.is_isotropic() {
                    format!("euclid:{}", m.dilation.dim())
                } else {
                    let ws: Vec<String> =
                        m.dilation.weights().iter().map(format_rational).collect();
                    let mm = match m.qnorm {
                        QuasiNormSpec::Anisotropic { m } => m,
                        QuasiNormSpec::Euclidean => 0,
                    };
                    format!("aniso:{}:m={}", ws.join(","), mm)
                }
            }
            GroupModel::Heisenberg { n } => format!("heis:{n}"),
        }
    }

    /// Parse `euclid:<n>`, `heis:<n>` or `aniso:<w1,...,wn>:m=<m>`.
    pub fn parse_tag(s: &str) -> Result<GroupModel> {
        let bad = || CoreError::InvalidModel(format!("cannot parse model tag '{s}'"));
        if let Some(n) = s.strip_prefix("euclid:") {
            let n: usize = n.parse().map_err(|_| bad())?;
            if n == 0 {
                return Err(bad());
            }
            return Ok(GroupModel::euclidean_isotropic(n));
        }
        if let Some(n) = s.strip_prefix("heis:") {
            let n: usize = n.parse().map_err(|_| bad())?;
            if n == 0 {
                return Err(bad());
            }
            return Ok(GroupModel::heisenberg(n));
        }
        if let Some(rest) = s.strip_prefix("aniso:") {
            let (ws, m) = rest.rsplit_once(":m=").ok_or_else(bad)?;
            let weights: Option<Vec<BigRational>> = ws.split(',').map(parse_rational).collect();
            let weights = weights.ok_or_else(bad)?;
            let m: u32 = m.parse().map_err(|_| bad())?;
            return GroupModel::euclidean(weights, QuasiNormSpec::Anisotropic { m });
        }
        Err(bad())
    }

    pub fn to_config(&self) -> ModelConfig {
        match self {
            GroupModel::Euclidean(m) => ModelConfig {
                variant: "euclidean".into(),
                weights: Some(m.dilation.weights().iter().map(format_rational).collect()),
                quasi_norm: Some(m.qnorm),
                n: None,
            },
            GroupModel::Heisenberg { n } => ModelConfig {
                variant: "heisenberg".into(),
                weights: None,
                quasi_norm: None,
                n: Some(*n),
            },
        }
    }

    pub fn from_config(cfg: &ModelConfig) -> Result<GroupModel> {
        match cfg.variant.as_str() {
            "euclidean" => {
                let ws = cfg
                    .weights
                    .as_ref()
                    .ok_or_else(|| CoreError::InvalidModel("missing weights".into()))?;
                let weights: Option<Vec<BigRational>> =
                    ws.iter().map(|w| parse_rational(w)).collect();
                let weights =
                    weights.ok_or_else(|| CoreError::InvalidModel("bad weight fraction".into()))?;
                GroupModel::euclidean(weights, cfg.quasi_norm.unwrap_or(QuasiNormSpec::Euclidean))
            }
            "heisenberg" => {
                let n = cfg
                    .n
                    .ok_or_else(|| CoreError::InvalidModel("missing n".into()))?;
                Ok(GroupModel::heisenberg(n))
            }
            other => Err(CoreError::InvalidModel(format!("unknown variant {other}"))),
        }
    }
}

/// Plain-text configuration form of a group model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quasi_norm: Option<QuasiNormSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

/// D_λ x = (λ^{ν₁}x₁, …, λ^{νₙ}xₙ).
pub fn dilate(d: &DilationStructure, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(CoreError::InvalidParam(format!(
            "dilation parameter must be positive, got {lambda}"
        )));
    }
    Ok(x.iter()
        .zip(d.weights())
        .map(|(xi, w)| lambda.powf(rational_to_f64(w)) * xi)
        .collect())
}

/// Homogeneous quasi-norm of a Euclidean model.
pub fn quasi_norm(model: &GroupModel, x: &[f64]) -> Result<f64> {
    match model {
        GroupModel::Euclidean(m) => {
            model.validate()?;
            match m.qnorm {
                QuasiNormSpec::Euclidean => {
                    Ok(x.iter().map(|v| v * v).sum::<f64>().sqrt())
                }
                QuasiNormSpec::Anisotropic { m: mm } => {
                    let mut s = 0.0;
                    for (xi, w) in x.iter().zip(m.dilation.weights()) {
                        let e = 2.0 * mm as f64 / rational_to_f64(w);
                        s += xi.abs().powf(e);
                    }
                    Ok(s.powf(1.0 / (2.0 * mm as f64)))
                }
            }
        }
        GroupModel::Heisenberg { n } => {
            // Norm of the first stratum; the t-coordinate does not enter the
            // weights used by the catalog.
            Ok(x[..2 * n].iter().map(|v| v * v).sum::<f64>().sqrt())
        }
    }
}

/// Euclidean norm of the first-stratum coordinates |x'|.
pub fn stratum_norm(model: &GroupModel, x: &[f64]) -> f64 {
    let ns = model.stratum_dim();
    x[..ns].iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Ring;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::from_ratio(n, d)
    }

    #[test]
    fn dilate_matches_definition() {
        let d = DilationStructure::isotropic(2);
        assert_eq!(dilate(&d, 2.0, &[1.0, 1.0]).unwrap(), vec![2.0, 2.0]);
        let d = DilationStructure::new(vec![q(1, 1), q(2, 1)]).unwrap();
        assert_eq!(dilate(&d, 3.0, &[1.0, 1.0]).unwrap(), vec![3.0, 9.0]);
        assert_eq!(dilate(&d, 1.0, &[5.0, 7.0]).unwrap(), vec![5.0, 7.0]);
        assert!(dilate(&d, 0.0, &[1.0, 1.0]).is_err());
        assert!(dilate(&d, -2.0, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn q_hom_is_exact_sum() {
        let d = DilationStructure::new(vec![q(1, 2), q(3, 2), q(1, 1)]).unwrap();
        assert_eq!(*d.q_hom(), q(3, 1));
        assert!(DilationStructure::new(vec![q(-1, 1)]).is_err());
    }

    #[test]
    fn quasi_norm_examples() {
        let m = GroupModel::euclidean_isotropic(3);
        assert!((quasi_norm(&m, &[3.0, 4.0, 0.0]).unwrap() - 5.0).abs() < 1e-15);

        let m = GroupModel::euclidean(
            vec![q(1, 1), q(2, 1)],
            QuasiNormSpec::Anisotropic { m: 2 },
        )
        .unwrap();
        // |x| = (x1^4 + x2^2)^{1/4}
        assert!((quasi_norm(&m, &[0.0, 4.0]).unwrap() - 2.0).abs() < 1e-15);

        // euclidean kind with non-unit weights is invalid
        let bad = GroupModel::Euclidean(EuclideanModel {
            dilation: DilationStructure::new(vec![q(1, 1), q(2, 1)]).unwrap(),
            qnorm: QuasiNormSpec::Euclidean,
        });
        assert!(quasi_norm(&bad, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn quasi_norm_is_homogeneous() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let m = GroupModel::euclidean(
            vec![q(1, 1), q(2, 1)],
            QuasiNormSpec::Anisotropic { m: 2 },
        )
        .unwrap();
        let d = match &m {
            GroupModel::Euclidean(e) => e.dilation.clone(),
            _ => unreachable!(),
        };
        for _ in 0..100 {
            let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let lam: f64 = rng.gen_range(0.1..5.0);
            let nx = quasi_norm(&m, &x).unwrap();
            let nd = quasi_norm(&m, &dilate(&d, lam, &x).unwrap()).unwrap();
            assert!((nd - lam * nx).abs() <= 1e-12 * lam * nx.max(1e-300));
        }
    }

    #[test]
    fn heisenberg_dimensions() {
        let m = GroupModel::heisenberg(2);
        assert_eq!(m.ambient_dim(), 5);
        assert_eq!(m.stratum_dim(), 4);
        assert_eq!(m.q_hom(), 6.0);
        assert_eq!(m.step(), 2);
    }

    #[test]
    fn tag_roundtrip() {
        for tag in ["euclid:3", "heis:2", "aniso:1,2:m=2"] {
            let m = GroupModel::parse_tag(tag).unwrap();
            assert_eq!(m.tag(), tag);
        }
        assert!(GroupModel::parse_tag("euclid:0").is_err());
        assert!(GroupModel::parse_tag("nope").is_err());
    }

    #[test]
    fn model_config_roundtrip() {
        let m = GroupModel::euclidean(
            vec![q(1, 1), q(2, 1)],
            QuasiNormSpec::Anisotropic { m: 2 },
        )
        .unwrap();
        let cfg = m.to_config();
        let back = GroupModel::from_config(&cfg).unwrap();
        assert_eq!(m, back);
        let js = serde_json::to_string(&cfg).unwrap();
        let cfg2: ModelConfig = serde_json::from_str(&js).unwrap();
        assert_eq!(GroupModel::from_config(&cfg2).unwrap(), m);
    }
}
