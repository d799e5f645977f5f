//! Instance files: JSON descriptions of the objects the CLI computes with.
//!
//! Two kinds are supported. `"polynomial"` describes affine space with a
//! family of potentials; `"dg-category"` a finite table presentation with
//! central families. Rationals are strings `p/q`; central-family components
//! are either a bare basis-morphism name or a list of `{basis, coeff}` terms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dgcat::poly::{PolynomialAlgebraPresentation, SparsePoly};
use crate::dgcat::{BasisMorphism, CentralFamily, DgCategoryPresentation};
use crate::lin::Lin;
use crate::linalg::parse_rational;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("bad instance: {0}")]
    Bad(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WindowSpec {
    #[serde(default)]
    pub w_max: Option<i64>,
    #[serde(default)]
    pub t_max: Option<usize>,
    #[serde(default)]
    pub length_bound: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum InstanceFile {
    #[serde(rename = "polynomial")]
    Polynomial(PolynomialInstance),
    #[serde(rename = "dg-category")]
    DgCategory(DgCategoryInstance),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolynomialInstance {
    pub name: String,
    pub variables: Vec<VariableSpec>,
    #[serde(default)]
    pub potentials: Vec<PotentialSpec>,
    #[serde(default)]
    pub windows: Option<WindowSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    #[serde(default = "one")]
    pub weight: u32,
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub terms: Vec<TermSpec>,
    /// declared weight, required when the polynomial is zero
    #[serde(default)]
    pub weight: Option<i64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermSpec {
    pub exponents: Vec<u32>,
    pub coeff: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DgCategoryInstance {
    pub name: String,
    pub objects: Vec<String>,
    pub morphisms: Vec<MorphismSpec>,
    pub identities: BTreeMap<String, String>,
    #[serde(default)]
    pub composition: Vec<CompositionSpec>,
    #[serde(default)]
    pub differential: Vec<DifferentialSpec>,
    #[serde(default)]
    pub central_families: Vec<CentralFamilySpec>,
    #[serde(default)]
    pub windows: Option<WindowSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MorphismSpec {
    pub name: String,
    pub source: String,
    pub target: String,
    pub degree: i64,
    #[serde(default)]
    pub weight: Option<i64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompositionSpec {
    pub left: String,
    pub right: String,
    pub result: Vec<BasisTermSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DifferentialSpec {
    pub on: String,
    pub result: Vec<BasisTermSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisTermSpec {
    pub basis: String,
    #[serde(default = "one_str")]
    pub coeff: String,
}

fn one_str() -> String {
    "1".into()
}

/// A central-family component: a bare morphism name or a combination.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComponentSpec {
    Name(String),
    Terms(Vec<BasisTermSpec>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CentralFamilySpec {
    pub components: BTreeMap<String, ComponentSpec>,
}

pub fn parse_instance(text: &str) -> Result<InstanceFile, InstanceError> {
    Ok(serde_json::from_str(text)?)
}

impl PolynomialInstance {
    pub fn presentation(&self) -> Result<PolynomialAlgebraPresentation, InstanceError> {
        let n = self.variables.len();
        let mut potentials = Vec::new();
        let mut declared = Vec::new();
        for p in &self.potentials {
            let mut poly = SparsePoly::zero();
            for t in &p.terms {
                if t.exponents.len() != n {
                    return Err(InstanceError::Bad(format!(
                        "term has {} exponents, expected {}",
                        t.exponents.len(),
                        n
                    )));
                }
                let c = parse_rational(&t.coeff)
                    .map_err(|e| InstanceError::Bad(e.to_string()))?;
                if !num_traits::Zero::is_zero(&c) {
                    let slot = poly.0.entry(t.exponents.clone()).or_insert_with(|| {
                        crate::linalg::rat(0)
                    });
                    *slot += c;
                    if num_traits::Zero::is_zero(slot) {
                        poly.0.remove(&t.exponents);
                    }
                }
            }
            if poly.is_zero() && p.weight.is_none() {
                return Err(InstanceError::Bad(
                    "the zero potential needs a declared weight".into(),
                ));
            }
            potentials.push(poly);
            declared.push(p.weight);
        }
        if self.variables.iter().any(|v| v.weight == 0) {
            return Err(InstanceError::Bad("variable weights must be positive".into()));
        }
        Ok(PolynomialAlgebraPresentation {
            var_names: self.variables.iter().map(|v| v.name.clone()).collect(),
            weights: self.variables.iter().map(|v| v.weight).collect(),
            potentials,
            declared_weights: declared,
        })
    }
}

impl DgCategoryInstance {
    pub fn presentation(
        &self,
    ) -> Result<(DgCategoryPresentation, CentralFamily), InstanceError> {
        let obj_of = |name: &str| -> Result<usize, InstanceError> {
            self.objects
                .iter()
                .position(|o| o == name)
                .ok_or_else(|| InstanceError::Bad(format!("unknown object `{name}`")))
        };
        let mut morphisms = Vec::new();
        for m in &self.morphisms {
            morphisms.push(BasisMorphism {
                name: m.name.clone(),
                source: obj_of(&m.source)?,
                target: obj_of(&m.target)?,
                degree: m.degree,
                weight: m.weight,
            });
        }
        let mor_of = |name: &str| -> Result<usize, InstanceError> {
            self.morphisms
                .iter()
                .position(|m| m.name == name)
                .ok_or_else(|| InstanceError::Bad(format!("unknown morphism `{name}`")))
        };
        let mut identities = vec![usize::MAX; self.objects.len()];
        for (obj, mor) in &self.identities {
            identities[obj_of(obj)?] = mor_of(mor)?;
        }
        if identities.contains(&usize::MAX) {
            return Err(InstanceError::Bad("every object needs an identity".into()));
        }
        let lin_of = |terms: &[BasisTermSpec]| -> Result<Lin<usize>, InstanceError> {
            let mut l = Lin::new();
            for t in terms {
                let c = parse_rational(&t.coeff)
                    .map_err(|e| InstanceError::Bad(e.to_string()))?;
                l.add(mor_of(&t.basis)?, c);
            }
            Ok(l)
        };
        let mut composition = BTreeMap::new();
        for c in &self.composition {
            composition.insert((mor_of(&c.left)?, mor_of(&c.right)?), lin_of(&c.result)?);
        }
        let mut differential = BTreeMap::new();
        for d in &self.differential {
            differential.insert(mor_of(&d.on)?, lin_of(&d.result)?);
        }
        let cat = DgCategoryPresentation {
            objects: self.objects.clone(),
            morphisms,
            identities,
            composition,
            differential,
        };
        let mut family = CentralFamily { components: Vec::new() };
        for f in &self.central_families {
            let mut comps = vec![Lin::new(); self.objects.len()];
            for (obj, spec) in &f.components {
                let oi = obj_of(obj)?;
                comps[oi] = match spec {
                    ComponentSpec::Name(n) => Lin::single(mor_of(n)?, crate::linalg::rat(1)),
                    ComponentSpec::Terms(ts) => lin_of(ts)?,
                };
            }
            family.components.push(comps);
        }
        Ok((cat, family))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_polynomial_instance() {
        let text = r#"{
            "kind": "polynomial",
            "name": "a1-xsquared",
            "variables": [{"name": "x", "weight": 1}],
            "potentials": [{"terms": [{"exponents": [2], "coeff": "1"}]}],
            "windows": {"w_max": 4, "t_max": 2}
        }"#;
        let inst = parse_instance(text).unwrap();
        let InstanceFile::Polynomial(p) = inst else { panic!() };
        let pres = p.presentation().unwrap();
        assert_eq!(pres.n(), 1);
        assert_eq!(pres.potential_weight(0), 2);
    }

    #[test]
    fn parse_dg_category_instance() {
        let text = r#"{
            "kind": "dg-category",
            "name": "kx-mod-x3",
            "objects": ["pt"],
            "morphisms": [
                {"name": "1", "source": "pt", "target": "pt", "degree": 0},
                {"name": "x", "source": "pt", "target": "pt", "degree": 0},
                {"name": "x2", "source": "pt", "target": "pt", "degree": 0}
            ],
            "identities": {"pt": "1"},
            "composition": [
                {"left": "x", "right": "x", "result": [{"basis": "x2"}]},
                {"left": "x", "right": "x2", "result": []},
                {"left": "x2", "right": "x", "result": []},
                {"left": "x2", "right": "x2", "result": []}
            ],
            "central_families": [{"components": {"pt": "x"}}],
            "windows": {"length_bound": 5, "t_max": 2}
        }"#;
        let inst = parse_instance(text).unwrap();
        let InstanceFile::DgCategory(c) = inst else { panic!() };
        let (cat, fam) = c.presentation().unwrap();
        assert!(crate::dgcat::validate_presentation(&cat).is_valid());
        assert_eq!(fam.m(), 1);
        assert!(crate::dgcat::validate_central_family(&cat, &fam).is_valid());
    }

    #[test]
    fn malformed_rational_is_an_error() {
        let text = r#"{
            "kind": "polynomial",
            "name": "bad",
            "variables": [{"name": "x"}],
            "potentials": [{"terms": [{"exponents": [1], "coeff": "1/0"}]}]
        }"#;
        let inst = parse_instance(text).unwrap();
        let InstanceFile::Polynomial(p) = inst else { panic!() };
        assert!(p.presentation().is_err());
    }
}
