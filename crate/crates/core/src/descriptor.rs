//! JSON descriptions of fields and valuations.
//!
//! ```json
//! {"kind":"min","children":[{"kind":"const","dim":3,"value":0},
//!                           {"kind":"disk_support","xi":[1,0,0],"lambda":2.0}]}
//! {"kind":"theta2","density":{"type":"odd","psi":{"re":{"dim":3,"terms":[{"coef":1,"exps":[1,1,1]}]}}}}
//! ```
//!
//! Bodies use the serde form of [`ConvexBody`] directly.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Polynomial, ScalarField, SmoothFn};
use crate::valuations::{even_density, even_density_flipped, odd_density, MatrixDensity, ScalarDensity, Valuation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Const { dim: usize, value: f64 },
    Linear { v: Vec<f64> },
    DiskSupport { xi: Vec<f64>, lambda: f64 },
    Polynomial(Polynomial),
    Scale { factor: f64, child: Box<FieldSpec> },
    Sum { children: Vec<FieldSpec> },
    Min { children: Vec<FieldSpec> },
    Max { children: Vec<FieldSpec> },
    /// `matrix` is given by rows.
    GlAct { matrix: Vec<Vec<f64>>, child: Box<FieldSpec> },
}

fn checked(p: &Polynomial) -> Result<Polynomial> {
    let dim = p.dim();
    if let Some(t) = p.terms().iter().find(|t| t.exps.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: t.exps.len(),
        });
    }
    Ok(p.clone())
}

fn build_all(children: &[FieldSpec]) -> Result<Vec<ScalarField>> {
    if children.is_empty() {
        return Err(Error::InvalidInput("empty children list".into()));
    }
    children.iter().map(FieldSpec::build).collect()
}

impl FieldSpec {
    pub fn build(&self) -> Result<ScalarField> {
        match self {
            FieldSpec::Const { dim, value } => Ok(ScalarField::constant(*dim, *value)),
            FieldSpec::Linear { v } => Ok(ScalarField::linear(v)),
            FieldSpec::DiskSupport { xi, lambda } => ScalarField::disk_support(xi, *lambda),
            FieldSpec::Polynomial(p) => Ok(ScalarField::polynomial(checked(p)?)),
            FieldSpec::Scale { factor, child } => Ok(child.build()?.scaled(*factor)),
            FieldSpec::Sum { children } => ScalarField::sum(&build_all(children)?),
            FieldSpec::Min { children } => ScalarField::meet(&build_all(children)?),
            FieldSpec::Max { children } => ScalarField::join(&build_all(children)?),
            FieldSpec::GlAct { matrix, child } => {
                let n = matrix.len();
                if matrix.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidInput("matrix must be square".into()));
                }
                let g = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
                ScalarField::gl_act(&g, &child.build()?)
            }
        }
    }
}

/// Polynomial density with an optional imaginary part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarSpec {
    pub re: Polynomial,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Polynomial>,
}

impl ScalarSpec {
    pub fn build(&self) -> Result<ScalarDensity> {
        let re = SmoothFn::polynomial(checked(&self.re)?);
        match &self.im {
            None => Ok(ScalarDensity::real(re)),
            Some(im) => ScalarDensity::complex(re, SmoothFn::polynomial(checked(im)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MatrixSpec {
    Even { dim: usize },
    EvenFlipped { dim: usize },
    Identity { dim: usize },
    Odd { psi: ScalarSpec },
}

impl MatrixSpec {
    pub fn build(&self) -> Result<MatrixDensity> {
        match self {
            MatrixSpec::Even { dim } => Ok(even_density(*dim)),
            MatrixSpec::EvenFlipped { dim } => Ok(even_density_flipped(*dim)),
            MatrixSpec::Identity { dim } => Ok(MatrixDensity::identity(*dim)),
            MatrixSpec::Odd { psi } => odd_density(&psi.build()?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValuationSpec {
    Theta1 { phi: ScalarSpec },
    Theta2 { density: MatrixSpec },
    /// Coefficients as `[re, im]` pairs.
    Rotinv { c: [Complex64; 3] },
    Area { p: ScalarSpec },
    HessS2 { psi: ScalarSpec },
}

impl ValuationSpec {
    pub fn build(&self) -> Result<Valuation> {
        Ok(match self {
            ValuationSpec::Theta1 { phi } => Valuation::Theta1(phi.build()?),
            ValuationSpec::Theta2 { density } => Valuation::Theta2(density.build()?),
            ValuationSpec::Rotinv { c } => Valuation::RotInv(*c),
            ValuationSpec::Area { p } => Valuation::AreaIntegral(p.build()?),
            ValuationSpec::HessS2 { psi } => Valuation::HessS2(psi.build()?),
        })
    }

    /// Ambient dimension, when the description fixes one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            ValuationSpec::Theta1 { phi: s } | ValuationSpec::Area { p: s } | ValuationSpec::HessS2 { psi: s } => {
                Some(s.re.dim())
            }
            ValuationSpec::Theta2 { density } => Some(match density {
                MatrixSpec::Even { dim } | MatrixSpec::EvenFlipped { dim } | MatrixSpec::Identity { dim } => *dim,
                MatrixSpec::Odd { psi } => psi.re.dim(),
            }),
            ValuationSpec::Rotinv { .. } => None,
        }
    }
}

pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("bad JSON: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::ConvexBody;

    #[test]
    fn field_round_trip() {
        let text = r#"{"kind":"min","children":[{"kind":"const","dim":3,"value":0},
            {"kind":"disk_support","xi":[1,0,0],"lambda":2.0}]}"#;
        let spec: FieldSpec = parse_json(text).unwrap();
        let f = spec.build().unwrap();
        assert_eq!(f.eval(&[1.0, 0.0, 0.0]), -1.0);
        let again: FieldSpec = parse_json(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(again, spec);
    }

    #[test]
    fn nested_fields() {
        let text = r#"{"kind":"gl_act","matrix":[[2,0,0],[0,1,0],[0,0,1]],
            "child":{"kind":"scale","factor":3,"child":{"kind":"sum","children":[
              {"kind":"linear","v":[1,0,0]},
              {"kind":"polynomial","dim":3,"terms":[{"coef":1,"exps":[0,0,2]}]}]}}}"#;
        let f = parse_json::<FieldSpec>(text).unwrap().build().unwrap();
        // g·f(x) = |gᵀx| f(gᵀx/|gᵀx|); at e₁, gᵀx = 2e₁
        assert!((f.eval(&[1.0, 0.0, 0.0]) - 6.0).abs() < 1e-14);
    }

    #[test]
    fn bad_inputs() {
        assert!(parse_json::<FieldSpec>(r#"{"kind":"nope"}"#).is_err());
        let arity = r#"{"kind":"polynomial","dim":3,"terms":[{"coef":1,"exps":[1,1]}]}"#;
        assert!(parse_json::<FieldSpec>(arity).unwrap().build().is_err());
        assert!(parse_json::<FieldSpec>(r#"{"kind":"max","children":[]}"#).unwrap().build().is_err());
    }

    #[test]
    fn valuations_parse() {
        let rot: ValuationSpec = parse_json(r#"{"kind":"rotinv","c":[[0,0],[0,0],[1,0]]}"#).unwrap();
        assert!(matches!(rot.build().unwrap(), Valuation::RotInv(_)));
        let odd = r#"{"kind":"theta2","density":{"type":"odd","psi":{"re":{"dim":3,"terms":[{"coef":1,"exps":[1,1,1]}]}}}}"#;
        let v: ValuationSpec = parse_json(odd).unwrap();
        assert_eq!(v.dim(), Some(3));
        assert_eq!(v.build().unwrap().name(), "theta2");
        let even: ValuationSpec = parse_json(r#"{"kind":"theta2","density":{"type":"even","dim":4}}"#).unwrap();
        assert_eq!(even.dim(), Some(4));
        let hs: ValuationSpec = parse_json(
            r#"{"kind":"hess_s2","psi":{"re":{"dim":3,"terms":[{"coef":1,"exps":[0,0,0]}]}}}"#,
        )
        .unwrap();
        assert!(matches!(hs.build().unwrap(), Valuation::HessS2(_)));
    }

    #[test]
    fn bodies_parse() {
        let c: ConvexBody = parse_json(r#"{"kind":"cone","xi":[1,0,0],"lambda":2}"#).unwrap();
        assert_eq!(c, ConvexBody::cone(&[1.0, 0.0, 0.0], 2.0).unwrap());
    }
}
