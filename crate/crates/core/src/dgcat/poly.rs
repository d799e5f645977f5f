//! Implicit presentations of weight-graded polynomial coordinate algebras.
//!
//! The coordinate algebra of affine n-space never gets a full table; each
//! weight slice is finite once every variable has positive weight, and that
//! is all the chain-level machinery needs.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::linalg::{format_rational, Rational};

/// Exponent vector of a monomial.
pub type Monomial = Vec<u32>;

/// A sparse polynomial: monomial -> coefficient.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SparsePoly(pub BTreeMap<Monomial, Rational>);

impl SparsePoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(exps: Monomial, c: Rational) -> Self {
        let mut p = Self::zero();
        if !c.is_zero() {
            p.0.insert(exps, c);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// The single monomial of the polynomial, if it has exactly one term.
    pub fn as_monomial(&self) -> Option<(&Monomial, &Rational)> {
        if self.0.len() == 1 {
            self.0.iter().next()
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolynomialAlgebraPresentation {
    pub var_names: Vec<String>,
    /// positive weight per variable
    pub weights: Vec<u32>,
    #[serde(skip)]
    pub potentials: Vec<SparsePoly>,
    /// declared weight per potential; required for the zero polynomial,
    /// checked against the computed weight otherwise
    pub declared_weights: Vec<Option<i64>>,
}

/// Quasi-homogeneity status of one potential.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Homogeneity {
    /// all monomials share this weight
    QuasiHomogeneous { weight: i64 },
    /// mixed weights; computations run in filtration mode with a caveat flag
    NotQuasiHomogeneous { weights_seen: Vec<i64> },
}

impl PolynomialAlgebraPresentation {
    pub fn n(&self) -> usize {
        self.var_names.len()
    }

    pub fn m(&self) -> usize {
        self.potentials.len()
    }

    pub fn monomial_weight(&self, m: &Monomial) -> i64 {
        m.iter().zip(&self.weights).map(|(e, w)| *e as i64 * *w as i64).sum()
    }

    pub fn homogeneity(&self, i: usize) -> Homogeneity {
        let p = &self.potentials[i];
        if p.is_zero() {
            return Homogeneity::QuasiHomogeneous {
                weight: self.declared_weights[i].unwrap_or(1),
            };
        }
        let mut seen: Vec<i64> = p.0.keys().map(|m| self.monomial_weight(m)).collect();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() == 1 {
            Homogeneity::QuasiHomogeneous { weight: seen[0] }
        } else {
            Homogeneity::NotQuasiHomogeneous { weights_seen: seen }
        }
    }

    pub fn all_quasi_homogeneous(&self) -> bool {
        (0..self.m()).all(|i| matches!(self.homogeneity(i), Homogeneity::QuasiHomogeneous { .. }))
    }

    /// Scalar weight of potential `i` (quasi-homogeneous weight, or the top
    /// filtration weight in the non-quasi-homogeneous case).
    pub fn potential_weight(&self, i: usize) -> i64 {
        match self.homogeneity(i) {
            Homogeneity::QuasiHomogeneous { weight } => weight,
            Homogeneity::NotQuasiHomogeneous { weights_seen } => *weights_seen.last().unwrap(),
        }
    }

    /// All potentials are single monomials (or zero with a declared
    /// multidegree makes no sense, so zero disables this): enables the finer
    /// bookkeeping by exponent multidegree.
    pub fn all_monomial_potentials(&self) -> bool {
        self.potentials.iter().all(|p| p.as_monomial().is_some())
    }

    pub fn format_monomial(&self, m: &Monomial) -> String {
        let mut parts = Vec::new();
        for (i, e) in m.iter().enumerate() {
            match e {
                0 => {}
                1 => parts.push(self.var_names[i].clone()),
                _ => parts.push(format!("{}^{}", self.var_names[i], e)),
            }
        }
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join("*")
        }
    }

    pub fn format_poly(&self, p: &SparsePoly) -> String {
        if p.is_zero() {
            return "0".into();
        }
        p.0.iter()
            .map(|(m, c)| format!("({})·{}", format_rational(c), self.format_monomial(m)))
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

/// All monomials in `n` variables of the given weights with total weight `w`,
/// in lexicographic order on exponent vectors.
pub fn enumerate_monomials(weights: &[u32], w: i64) -> Vec<Monomial> {
    assert!(weights.iter().all(|&x| x >= 1), "variable weights must be positive");
    let mut out = Vec::new();
    if w < 0 {
        return out;
    }
    let mut cur = vec![0u32; weights.len()];
    fn rec(weights: &[u32], rem: i64, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<Monomial>) {
        if pos == weights.len() {
            if rem == 0 {
                out.push(cur.clone());
            }
            return;
        }
        if pos + 1 == weights.len() {
            // last variable must absorb the rest exactly
            let w = weights[pos] as i64;
            if rem % w == 0 {
                cur[pos] = (rem / w) as u32;
                out.push(cur.clone());
                cur[pos] = 0;
            }
            return;
        }
        let w = weights[pos] as i64;
        let max = rem / w;
        for e in 0..=max {
            cur[pos] = e as u32;
            rec(weights, rem - e * w, pos + 1, cur, out);
        }
        cur[pos] = 0;
    }
    if weights.is_empty() {
        if w == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(weights, w, 0, &mut cur, &mut out);
    out
}

/// Whether the finer bookkeeping by exponent multidegree applies: every
/// potential is a single monomial (and there is at least one). Both sides of
/// a comparison must use the same rule.
pub fn use_multidegree(pres: &PolynomialAlgebraPresentation) -> bool {
    pres.m() > 0 && pres.all_monomial_potentials()
}

pub fn monomial_mul(a: &Monomial, b: &Monomial) -> Monomial {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn is_unit_monomial(m: &Monomial) -> bool {
    m.iter().all(|&e| e == 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rat;

    #[test]
    fn monomial_enumeration() {
        // n=1, wt(x)=1, w=2 -> {x^2}
        assert_eq!(enumerate_monomials(&[1], 2), vec![vec![2]]);
        // n=2, wt=(1,1), w=2 -> {y^2, xy, x^2} in lex order on exponents
        let ms = enumerate_monomials(&[1, 1], 2);
        assert_eq!(ms, vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
        // n=1, wt(x)=2, w=3 -> empty (parity obstruction)
        assert!(enumerate_monomials(&[2], 3).is_empty());
        // w=0 -> the unit monomial
        assert_eq!(enumerate_monomials(&[1, 1], 0), vec![vec![0, 0]]);
    }

    #[test]
    fn homogeneity_check() {
        let p = PolynomialAlgebraPresentation {
            var_names: vec!["x".into(), "y".into()],
            weights: vec![1, 1],
            potentials: vec![
                SparsePoly::monomial(vec![1, 1], rat(1)),
                {
                    let mut q = SparsePoly::monomial(vec![2, 0], rat(1));
                    q.0.insert(vec![0, 1], rat(1));
                    q
                },
            ],
            declared_weights: vec![None, None],
        };
        assert_eq!(p.homogeneity(0), Homogeneity::QuasiHomogeneous { weight: 2 });
        assert!(matches!(p.homogeneity(1), Homogeneity::NotQuasiHomogeneous { .. }));
        assert!(p.all_monomial_potentials() == false);
    }
}
