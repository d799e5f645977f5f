//! Presentations of dg categories with central families, and their validation.
//!
//! A presentation is a finite table: objects, basis morphisms with integer
//! cohomological degree (and an optional positive weight), structure constants
//! for composition, and a differential table. Missing composition or
//! differential entries mean zero. Validation reports every violated axiom
//! with a witness instead of failing on the first one.
//!
//! Weight-graded polynomial coordinate algebras get their own implicit
//! presentation ([`PolynomialAlgebraPresentation`]); these never materialize a
//! full table since each weight slice is finite on its own.

pub mod poly;

use std::collections::BTreeMap;

use crate::lin::Lin;
use crate::linalg::{format_rational, Rational};
use num_traits::One;
use serde::{Deserialize, Serialize};

/// Multiweight vector. Empty for ungraded presentations.
pub type Grade = Vec<i64>;

pub fn grade_total(g: &Grade) -> i64 {
    g.iter().sum()
}

pub fn grade_add(a: &Grade, b: &Grade) -> Grade {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn grade_sub(a: &Grade, b: &Grade) -> Grade {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn grade_zero(rank: usize) -> Grade {
    vec![0; rank]
}

/// One basis morphism of a table presentation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisMorphism {
    pub name: String,
    pub source: usize,
    pub target: usize,
    pub degree: i64,
    /// weight in the artifact's bookkeeping grading; `None` on ungraded tables
    #[serde(default)]
    pub weight: Option<i64>,
}

/// A dg category presented by finite tables.
#[derive(Clone, Debug)]
pub struct DgCategoryPresentation {
    pub objects: Vec<String>,
    pub morphisms: Vec<BasisMorphism>,
    /// identity basis morphism per object
    pub identities: Vec<usize>,
    /// `(left, right) -> left ∘ right` on basis morphisms; missing = 0.
    /// Pairs involving identities may be omitted (they are synthesized).
    pub composition: BTreeMap<(usize, usize), Lin<usize>>,
    /// differential on basis morphisms; missing = 0
    pub differential: BTreeMap<usize, Lin<usize>>,
}

/// A central family `t = (t_1, .., t_m)`: for each i and object, a degree-0
/// endomorphism given as a linear combination of basis morphisms.
#[derive(Clone, Debug)]
pub struct CentralFamily {
    /// components[i][obj]
    pub components: Vec<Vec<Lin<usize>>>,
}

impl CentralFamily {
    pub fn m(&self) -> usize {
        self.components.len()
    }

    /// The all-zero family with `m` components.
    pub fn zero(m: usize, objects: usize) -> Self {
        CentralFamily { components: vec![vec![Lin::new(); objects]; m] }
    }

    /// `c · identity` on every object.
    pub fn scalar(c: Rational, cat: &DgCategoryPresentation) -> Self {
        let comps = (0..cat.objects.len())
            .map(|o| Lin::single(cat.identities[o], c.clone()))
            .collect();
        CentralFamily { components: vec![comps] }
    }
}

/// A dg functor between table presentations, on basis data.
#[derive(Clone, Debug)]
pub struct DgFunctorPresentation {
    pub object_map: Vec<usize>,
    /// image of each basis morphism as a linear combination in the target
    pub morphism_map: Vec<Lin<usize>>,
}

/// A single violated axiom, with enough data to locate it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    DegreeMismatch { context: String },
    WeightMismatch { context: String },
    DifferentialSquare { on: String, result: String },
    NonAssociative { triple: [String; 3], difference: String },
    UnitFailure { context: String },
    LeibnizFailure { pair: [String; 2], difference: String },
    NotClosed { on: String, result: String },
    NotCentral { index: usize, witness: String, difference: String },
    FunctorFailure { context: String },
    Malformed { context: String },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl DgCategoryPresentation {
    pub fn is_identity(&self, m: usize) -> bool {
        self.identities.contains(&m)
    }

    pub fn degree_of(&self, l: &Lin<usize>) -> Option<i64> {
        let mut deg = None;
        for (m, _) in l.iter() {
            match deg {
                None => deg = Some(self.morphisms[*m].degree),
                Some(d) if d == self.morphisms[*m].degree => {}
                _ => return None,
            }
        }
        deg
    }

    /// Composite `left ∘ right`, with identity pairs synthesized.
    pub fn compose(&self, left: usize, right: usize) -> Lin<usize> {
        if self.is_identity(left) {
            if self.morphisms[left].source == self.morphisms[right].target {
                return Lin::single(right, Rational::one());
            }
            return Lin::new();
        }
        if self.is_identity(right) {
            if self.morphisms[right].target == self.morphisms[left].source {
                return Lin::single(left, Rational::one());
            }
            return Lin::new();
        }
        self.composition.get(&(left, right)).cloned().unwrap_or_default()
    }

    pub fn compose_lin(&self, left: &Lin<usize>, right: &Lin<usize>) -> Lin<usize> {
        let mut out = Lin::new();
        for (l, cl) in left.iter() {
            for (r, cr) in right.iter() {
                out.add_all(self.compose(*l, *r).scaled(&(cl * cr)));
            }
        }
        out
    }

    pub fn diff(&self, m: usize) -> Lin<usize> {
        self.differential.get(&m).cloned().unwrap_or_default()
    }

    pub fn diff_lin(&self, l: &Lin<usize>) -> Lin<usize> {
        l.flat_map(|m| self.diff(*m))
    }

    pub fn format_lin(&self, l: &Lin<usize>) -> String {
        l.format_with(|m| self.morphisms[*m].name.clone())
    }

    fn composable(&self, left: usize, right: usize) -> bool {
        self.morphisms[left].source == self.morphisms[right].target
    }
}

/// Checks every axiom of a dg category presentation; an empty report means
/// the presentation is valid.
pub fn validate_presentation(p: &DgCategoryPresentation) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let name = |m: usize| p.morphisms[m].name.clone();

    // shape checks
    if p.identities.len() != p.objects.len() {
        rep.violations.push(Violation::Malformed {
            context: "one identity morphism required per object".into(),
        });
        return rep;
    }
    for (o, &idm) in p.identities.iter().enumerate() {
        let bm = &p.morphisms[idm];
        if bm.source != o || bm.target != o {
            rep.violations.push(Violation::UnitFailure {
                context: format!("identity of object {} has wrong endpoints", p.objects[o]),
            });
        }
        if bm.degree != 0 {
            rep.violations.push(Violation::DegreeMismatch {
                context: format!("identity {} must have degree 0", bm.name),
            });
        }
        if !p.diff(idm).is_zero() {
            rep.violations.push(Violation::NotClosed {
                on: bm.name.clone(),
                result: p.format_lin(&p.diff(idm)),
            });
        }
    }

    // composition table: endpoints, degree and weight additivity
    for (&(l, r), res) in &p.composition {
        if !p.composable(l, r) {
            rep.violations.push(Violation::Malformed {
                context: format!("table entry for non-composable pair ({}, {})", name(l), name(r)),
            });
            continue;
        }
        let (lm, rm) = (&p.morphisms[l], &p.morphisms[r]);
        for (m, _) in res.iter() {
            let mm = &p.morphisms[*m];
            if mm.degree != lm.degree + rm.degree {
                rep.violations.push(Violation::DegreeMismatch {
                    context: format!("{} ∘ {} hits {} of wrong degree", name(l), name(r), mm.name),
                });
            }
            if mm.source != rm.source || mm.target != lm.target {
                rep.violations.push(Violation::Malformed {
                    context: format!("{} ∘ {} hits {} with wrong endpoints", name(l), name(r), mm.name),
                });
            }
            if let (Some(wl), Some(wr), Some(wm)) = (lm.weight, rm.weight, mm.weight) {
                if wm != wl + wr {
                    rep.violations.push(Violation::WeightMismatch {
                        context: format!("{} ∘ {} hits {} of wrong weight", name(l), name(r), mm.name),
                    });
                }
            }
        }
        // identity rows, when stored, must agree with the synthesized ones
        if p.is_identity(l) || p.is_identity(r) {
            let expect = if p.is_identity(l) {
                Lin::single(r, Rational::one())
            } else {
                Lin::single(l, Rational::one())
            };
            if *res != expect {
                rep.violations.push(Violation::UnitFailure {
                    context: format!("stored identity composition ({}, {}) is not the unit law", name(l), name(r)),
                });
            }
        }
    }

    // differential: degree +1, weight 0, endpoints preserved, d^2 = 0
    for (&m, dm) in &p.differential {
        let bm = &p.morphisms[m];
        for (im, _) in dm.iter() {
            let imm = &p.morphisms[*im];
            if imm.degree != bm.degree + 1 {
                rep.violations.push(Violation::DegreeMismatch {
                    context: format!("d({}) hits {} of degree {}, want {}", bm.name, imm.name, imm.degree, bm.degree + 1),
                });
            }
            if imm.source != bm.source || imm.target != bm.target {
                rep.violations.push(Violation::Malformed {
                    context: format!("d({}) changes endpoints at {}", bm.name, imm.name),
                });
            }
            if let (Some(w), Some(wi)) = (bm.weight, imm.weight) {
                if w != wi {
                    rep.violations.push(Violation::WeightMismatch {
                        context: format!("d({}) changes weight at {}", bm.name, imm.name),
                    });
                }
            }
        }
    }
    for m in 0..p.morphisms.len() {
        let dd = p.diff_lin(&p.diff(m));
        if !dd.is_zero() {
            rep.violations.push(Violation::DifferentialSquare {
                on: name(m),
                result: p.format_lin(&dd),
            });
        }
    }

    // associativity on all composable triples
    for a in 0..p.morphisms.len() {
        for b in 0..p.morphisms.len() {
            if !p.composable(a, b) {
                continue;
            }
            for c in 0..p.morphisms.len() {
                if !p.composable(b, c) {
                    continue;
                }
                let left = p.compose_lin(&p.compose(a, b), &Lin::single(c, Rational::one()));
                let mut right = p.compose_lin(&Lin::single(a, Rational::one()), &p.compose(b, c));
                right.sub(&left);
                if !right.is_zero() {
                    rep.violations.push(Violation::NonAssociative {
                        triple: [name(a), name(b), name(c)],
                        difference: p.format_lin(&right),
                    });
                }
            }
        }
    }

    // Leibniz rule d(ab) = d(a) b + (-1)^{|a|} a d(b)
    for a in 0..p.morphisms.len() {
        for b in 0..p.morphisms.len() {
            if !p.composable(a, b) {
                continue;
            }
            let ab = p.compose(a, b);
            let mut lhs = p.diff_lin(&ab);
            let da_b = p.compose_lin(&p.diff(a), &Lin::single(b, Rational::one()));
            let sign = if p.morphisms[a].degree.rem_euclid(2) == 0 {
                Rational::one()
            } else {
                -Rational::one()
            };
            let a_db = p.compose_lin(&Lin::single(a, Rational::one()), &p.diff(b)).scaled(&sign);
            lhs.sub(&da_b);
            lhs.sub(&a_db);
            if !lhs.is_zero() {
                rep.violations.push(Violation::LeibnizFailure {
                    pair: [name(a), name(b)],
                    difference: p.format_lin(&lhs),
                });
            }
        }
    }

    rep
}

/// Checks closedness and centrality of a family `t`.
pub fn validate_central_family(p: &DgCategoryPresentation, t: &CentralFamily) -> ValidationReport {
    let mut rep = ValidationReport::default();
    for (i, comps) in t.components.iter().enumerate() {
        if comps.len() != p.objects.len() {
            rep.violations.push(Violation::Malformed {
                context: format!("central family {} must have one component per object", i),
            });
            continue;
        }
        for (o, to) in comps.iter().enumerate() {
            for (m, _) in to.iter() {
                let bm = &p.morphisms[*m];
                if bm.source != o || bm.target != o {
                    rep.violations.push(Violation::Malformed {
                        context: format!("t_{} at object {} uses non-endomorphism {}", i + 1, p.objects[o], bm.name),
                    });
                }
                if bm.degree != 0 {
                    rep.violations.push(Violation::DegreeMismatch {
                        context: format!("t_{} at object {} has degree {} component {}", i + 1, p.objects[o], bm.degree, bm.name),
                    });
                }
            }
            let dt = p.diff_lin(to);
            if !dt.is_zero() {
                rep.violations.push(Violation::NotClosed {
                    on: format!("t_{} at {}", i + 1, p.objects[o]),
                    result: p.format_lin(&dt),
                });
            }
        }
        // centrality: t_{tgt(a)} a = a t_{src(a)} for every basis morphism a
        for a in 0..p.morphisms.len() {
            let bm = &p.morphisms[a];
            let unit = Lin::single(a, Rational::one());
            let mut lhs = p.compose_lin(&comps[bm.target], &unit);
            let rhs = p.compose_lin(&unit, &comps[bm.source]);
            lhs.sub(&rhs);
            if !lhs.is_zero() {
                rep.violations.push(Violation::NotCentral {
                    index: i + 1,
                    witness: bm.name.clone(),
                    difference: p.format_lin(&lhs),
                });
            }
        }
    }
    rep
}

/// Matrix category over a one-object presentation, as a `k`-object category:
/// objects `1..k`, hom from `p` to `q` spanned by `a·e_qp`, composition
/// `(a e_qp)(b e_rs) = δ_{pr} (ab) e_qs`. The corner functor embeds the
/// algebra as the full subcategory on the first object; it is a dg Morita
/// equivalence of the underlying categories.
pub fn matrix_category(
    p: &DgCategoryPresentation,
    k: usize,
) -> (DgCategoryPresentation, DgFunctorPresentation) {
    assert_eq!(p.objects.len(), 1, "matrix category wants a one-object presentation");
    assert!(k >= 1);
    let nb = p.morphisms.len();
    // morphism (m, row q, col p) -> index
    let midx = |m: usize, q: usize, col: usize| (m * k + q) * k + col;
    let mut morphisms = Vec::with_capacity(nb * k * k);
    for m in 0..nb {
        for q in 0..k {
            for col in 0..k {
                let base = &p.morphisms[m];
                let name = if p.is_identity(m) {
                    format!("e{}{}", q + 1, col + 1)
                } else {
                    format!("{}·e{}{}", base.name, q + 1, col + 1)
                };
                morphisms.push(BasisMorphism {
                    name,
                    source: col,
                    target: q,
                    degree: base.degree,
                    weight: base.weight,
                });
            }
        }
    }
    let identities: Vec<usize> = (0..k).map(|o| midx(p.identities[0], o, o)).collect();
    let mut composition = BTreeMap::new();
    for l in 0..nb {
        for r in 0..nb {
            let base = p.compose(l, r);
            if base.is_zero() {
                continue;
            }
            for q in 0..k {
                for mid in 0..k {
                    for s in 0..k {
                        // identity pairs of the new category are synthesized
                        if p.is_identity(l) && q == mid || p.is_identity(r) && mid == s {
                            continue;
                        }
                        let li = midx(l, q, mid);
                        let ri = midx(r, mid, s);
                        composition.insert((li, ri), base.clone().map(|m| midx(m, q, s)));
                    }
                }
            }
        }
    }
    let mut differential = BTreeMap::new();
    for m in 0..nb {
        let dm = p.diff(m);
        if dm.is_zero() {
            continue;
        }
        for q in 0..k {
            for s in 0..k {
                differential.insert(midx(m, q, s), dm.clone().map(|x| midx(x, q, s)));
            }
        }
    }
    let cat = DgCategoryPresentation {
        objects: (1..=k).map(|i| format!("{}", i)).collect(),
        morphisms,
        identities,
        composition,
        differential,
    };
    let functor = DgFunctorPresentation {
        object_map: vec![0],
        morphism_map: (0..nb).map(|m| Lin::single(midx(m, 0, 0), Rational::one())).collect(),
    };
    (cat, functor)
}

/// Transports a central family through [`matrix_category`]: each `t_i`
/// becomes the diagonal family `t_i · e_pp`.
pub fn matrix_central_family(
    _p: &DgCategoryPresentation,
    t: &CentralFamily,
    k: usize,
) -> CentralFamily {
    let midx = |m: usize, q: usize, col: usize| (m * k + q) * k + col;
    CentralFamily {
        components: t
            .components
            .iter()
            .map(|comps| {
                (0..k)
                    .map(|o| comps[0].clone().map(|m| midx(m, o, o)))
                    .collect()
            })
            .collect(),
    }
}

/// Validates that `f` is a dg functor preserving identities, degrees,
/// differentials, composition, and the central families.
pub fn validate_functor(
    f: &DgFunctorPresentation,
    src: &DgCategoryPresentation,
    tgt: &DgCategoryPresentation,
    t_src: &CentralFamily,
    t_tgt: &CentralFamily,
) -> ValidationReport {
    let mut rep = ValidationReport::default();
    if f.object_map.len() != src.objects.len() || f.morphism_map.len() != src.morphisms.len() {
        rep.violations.push(Violation::Malformed { context: "functor tables have wrong shape".into() });
        return rep;
    }
    for (m, img) in f.morphism_map.iter().enumerate() {
        let bm = &src.morphisms[m];
        for (im, _) in img.iter() {
            let t = &tgt.morphisms[*im];
            if t.degree != bm.degree
                || t.source != f.object_map[bm.source]
                || t.target != f.object_map[bm.target]
            {
                rep.violations.push(Violation::FunctorFailure {
                    context: format!("image of {} has wrong degree or endpoints", bm.name),
                });
            }
        }
    }
    for (o, &io) in f.object_map.iter().enumerate() {
        if f.morphism_map[src.identities[o]] != Lin::single(tgt.identities[io], Rational::one()) {
            rep.violations.push(Violation::FunctorFailure {
                context: format!("identity of {} is not sent to an identity", src.objects[o]),
            });
        }
    }
    let apply = |l: &Lin<usize>| -> Lin<usize> {
        l.flat_map(|m| f.morphism_map[*m].clone())
    };
    for m in 0..src.morphisms.len() {
        let mut lhs = apply(&src.diff(m));
        lhs.sub(&tgt.diff_lin(&f.morphism_map[m]));
        if !lhs.is_zero() {
            rep.violations.push(Violation::FunctorFailure {
                context: format!("differential not preserved on {}", src.morphisms[m].name),
            });
        }
        for r in 0..src.morphisms.len() {
            if !src.composable(m, r) {
                continue;
            }
            let mut lhs = apply(&src.compose(m, r));
            lhs.sub(&tgt.compose_lin(&f.morphism_map[m], &f.morphism_map[r]));
            if !lhs.is_zero() {
                rep.violations.push(Violation::FunctorFailure {
                    context: format!(
                        "composition not preserved on ({}, {})",
                        src.morphisms[m].name, src.morphisms[r].name
                    ),
                });
            }
        }
    }
    if t_src.m() != t_tgt.m() {
        rep.violations.push(Violation::Malformed { context: "central family sizes differ".into() });
    } else {
        for i in 0..t_src.m() {
            for (o, &io) in f.object_map.iter().enumerate() {
                let mut lhs = apply(&t_src.components[i][o]);
                lhs.sub(&t_tgt.components[i][io]);
                if !lhs.is_zero() {
                    rep.violations.push(Violation::FunctorFailure {
                        context: format!("t_{} not preserved at object {}", i + 1, src.objects[o]),
                    });
                }
            }
        }
    }
    rep
}

/// Formats a rational scalar times a named morphism, used in witnesses.
pub fn format_term(c: &Rational, name: &str) -> String {
    format!("({})·{}", format_rational(c), name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rat;

    pub fn point() -> DgCategoryPresentation {
        DgCategoryPresentation {
            objects: vec!["pt".into()],
            morphisms: vec![BasisMorphism { name: "1".into(), source: 0, target: 0, degree: 0, weight: Some(0) }],
            identities: vec![0],
            composition: BTreeMap::new(),
            differential: BTreeMap::new(),
        }
    }

    #[test]
    fn point_is_valid() {
        let p = point();
        assert!(validate_presentation(&p).is_valid());
        let t0 = CentralFamily::zero(1, 1);
        assert!(validate_central_family(&p, &t0).is_valid());
        let tid = CentralFamily::scalar(rat(1), &p);
        assert!(validate_central_family(&p, &tid).is_valid());
    }

    #[test]
    fn degree_mismatch_is_reported() {
        // one object, generator x of degree 0 with d(x) = x: degree bookkeeping fails
        let mut p = point();
        p.morphisms.push(BasisMorphism { name: "x".into(), source: 0, target: 0, degree: 0, weight: Some(1) });
        p.differential.insert(1, Lin::single(1, rat(1)));
        let rep = validate_presentation(&p);
        assert!(rep
            .violations
            .iter()
            .any(|v| matches!(v, Violation::DegreeMismatch { .. })));
    }

    #[test]
    fn matrix_category_of_point() {
        let p = point();
        let (mat2, corner) = matrix_category(&p, 2);
        assert_eq!(mat2.morphisms.len(), 4);
        let rep = validate_presentation(&mat2);
        assert!(rep.is_valid(), "{:?}", rep.violations);
        // composition e_pq e_qr = e_pr on the eight composable non-identity pairs
        let by_name = |n: &str| mat2.morphisms.iter().position(|m| m.name == n).unwrap();
        let e12 = by_name("e12");
        let e21 = by_name("e21");
        let e11 = by_name("e11");
        let e22 = by_name("e22");
        assert_eq!(mat2.compose(e12, e21), Lin::single(e11, rat(1)));
        assert_eq!(mat2.compose(e21, e12), Lin::single(e22, rat(1)));
        assert_eq!(mat2.compose(e11, e12), Lin::single(e12, rat(1)));
        assert_eq!(mat2.compose(e12, e22), Lin::single(e12, rat(1)));
        // corner functor is a valid dg functor matching the scalar families
        let c = rat(3);
        let t_src = CentralFamily::scalar(c.clone(), &p);
        let t_tgt = matrix_central_family(&p, &t_src, 2);
        let rep = validate_functor(&corner, &p, &mat2, &t_src, &t_tgt);
        assert!(rep.is_valid(), "{:?}", rep.violations);
    }

    /// One-object presentation of 2x2 matrices on basis 1, e11, e12, e21
    /// (with e22 = 1 - e11), used to exhibit a centrality failure.
    fn mat2_flat() -> DgCategoryPresentation {
        let names = ["1", "e11", "e12", "e21"];
        let morphisms = names
            .iter()
            .map(|n| BasisMorphism { name: n.to_string(), source: 0, target: 0, degree: 0, weight: None })
            .collect();
        let mut composition = BTreeMap::new();
        let one = |m: usize| Lin::single(m, rat(1));
        // e11 e11 = e11; e11 e12 = e12; e12 e21 = e11; e21 e11 = e21;
        // e21 e12 = e22 = 1 - e11; everything else among non-units is 0
        composition.insert((1, 1), one(1));
        composition.insert((1, 2), one(2));
        composition.insert((2, 1), Lin::new());
        composition.insert((2, 3), one(1));
        composition.insert((3, 1), one(3));
        composition.insert((1, 3), Lin::new());
        composition.insert((2, 2), Lin::new());
        composition.insert((3, 3), Lin::new());
        let mut e22: Lin<usize> = Lin::single(0, rat(1));
        e22.add(1, rat(-1));
        composition.insert((3, 2), e22);
        DgCategoryPresentation {
            objects: vec!["pt".into()],
            morphisms,
            identities: vec![0],
            composition,
            differential: BTreeMap::new(),
        }
    }

    #[test]
    fn centrality_failure_witness() {
        let p = mat2_flat();
        let rep = validate_presentation(&p);
        assert!(rep.is_valid(), "{:?}", rep.violations);
        // t = e11 is not central: e11 e12 = e12 but e12 e11 = 0
        let t = CentralFamily { components: vec![vec![Lin::single(1, rat(1))]] };
        let rep = validate_central_family(&p, &t);
        assert!(rep.violations.iter().any(|v| matches!(
            v,
            Violation::NotCentral { witness, .. } if witness == "e12"
        )));
    }
}
