//! The generic engine for modules over the extended twisting algebra: a
//! graded space with a differential `d`, anticommuting degree `-1` operators
//! `β_0..β_m`, and twisting operators `e_i` (degree 0), `E_i` (degree `-2`)
//! subject to the commutation identities listed in [`relation_suite`].
//!
//! Modules are addressed per component: one component per (multiweight,
//! degree) pair, with operators acting as maps between components with a
//! fixed (weight shift, degree shift). Implementations either materialize
//! matrices ([`LambdaExtModule`]) or stream operator columns on demand (the
//! Hochschild chain backends), behind the common [`ModuleOps`] trait.

pub mod tower;
pub mod weak;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dgcat::{grade_add, Grade};
use crate::linalg::{format_rational, Rational, SparseMatrix};

/// Address of one graded component.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct CompKey {
    pub weight: Grade,
    pub degree: i64,
}

impl CompKey {
    pub fn new(weight: Grade, degree: i64) -> Self {
        CompKey { weight, degree }
    }

    pub fn shifted(&self, dw: &Grade, dd: i64) -> CompKey {
        CompKey { weight: grade_add(&self.weight, dw), degree: self.degree + dd }
    }
}

/// The operator alphabet. `Beta(0)` is the cyclic operator `β_0`; twisting
/// indices are 0-based, so `Beta(i+1)`, `E(i)`, `BigE(i)` belong to `t_{i+1}`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Op {
    /// module differential (degree +1)
    D,
    /// β_j for j = 0..=m (degree -1)
    Beta(usize),
    /// e_i for i = 0..m-1 (degree 0)
    E(usize),
    /// E_i for i = 0..m-1 (degree -2)
    BigE(usize),
}

impl Op {
    pub fn degree_shift(&self) -> i64 {
        match self {
            Op::D => 1,
            Op::Beta(_) => -1,
            Op::E(_) => 0,
            Op::BigE(_) => -2,
        }
    }

    pub fn weight_shift(&self, ops: &dyn ModuleOps) -> Grade {
        match self {
            Op::D | Op::Beta(0) => vec![0; ops.grading_rank()],
            Op::Beta(i) => ops.central_weight(i - 1),
            Op::E(i) | Op::BigE(i) => ops.central_weight(*i),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Op::D => "d".into(),
            Op::Beta(0) => "beta0".into(),
            Op::Beta(i) => format!("beta{}", i),
            Op::E(i) => format!("e{}", i + 1),
            Op::BigE(i) => format!("E{}", i + 1),
        }
    }
}

/// Component-wise access to a twisted module.
pub trait ModuleOps: Sync {
    fn grading_rank(&self) -> usize;
    fn num_central(&self) -> usize;
    /// weight of `t_{i+1}` (the shift of `β_{i+1}`, `e_{i+1}`, `E_{i+1}`)
    fn central_weight(&self, i: usize) -> Grade;
    fn component_keys(&self) -> Vec<CompKey>;
    /// 0 for components outside the built range
    fn dim(&self, key: &CompKey) -> usize;
    fn label(&self, key: &CompKey, idx: usize) -> String;
    /// column `idx` of the operator at the source component, as coordinates
    /// in the target component `key + shift(op)`
    fn apply(&self, op: Op, key: &CompKey, idx: usize) -> Vec<(usize, Rational)>;
}

/// Applies `op` to a sparse vector sitting at `key`; returns the target key
/// and the image vector.
pub fn apply_sparse(
    ops: &dyn ModuleOps,
    op: Op,
    key: &CompKey,
    v: &[(usize, Rational)],
) -> (CompKey, Vec<(usize, Rational)>) {
    let target = key.shifted(&op.weight_shift(ops), op.degree_shift());
    let mut acc: BTreeMap<usize, Rational> = BTreeMap::new();
    for (idx, c) in v {
        for (tidx, tc) in ops.apply(op, key, *idx) {
            let slot = acc.entry(tidx).or_insert_with(|| Rational::from_integer(0.into()));
            *slot += tc * c;
        }
    }
    acc.retain(|_, c| !num_traits::Zero::is_zero(c));
    (target, acc.into_iter().collect())
}

/// One monomial of a relation: a scalar times a word of operators applied
/// left-to-right (`word[0]` first).
pub type RelationTerm = (i64, Vec<Op>);

/// A named operator identity `sum of terms = 0`.
pub struct Relation {
    pub name: String,
    pub terms: Vec<RelationTerm>,
}

/// Which part of the identity suite to run.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RelationScope {
    /// only the identities entering the square of the twisted total
    /// differential: anticommutation among `d` and the `β_j`
    DifferentialOnly,
    /// the full suite including the `e_i`/`E_i` identities
    Full,
}

/// The operator identities of a twisted module, expanded in powers of the
/// bookkeeping variable: anticommutation of `(d, β_0, .., β_m)`, flatness of
/// `e_i`, the defining identity `[d, E_i] = e_i β_0 - β_0 e_i - β_i`, and
/// commutation of `e_i`, `E_i` with every `β_j`.
pub fn relation_suite(m: usize, scope: RelationScope) -> Vec<Relation> {
    let mut rels = Vec::new();
    let anti = |name: String, a: Op, b: Op| Relation {
        name,
        terms: vec![(1, vec![a, b]), (1, vec![b, a])],
    };
    rels.push(anti("d.d".into(), Op::D, Op::D));
    for j in 0..=m {
        rels.push(anti(format!("d.beta{j} + beta{j}.d"), Op::D, Op::Beta(j)));
    }
    for i in 0..=m {
        for j in i..=m {
            rels.push(anti(format!("beta{i}.beta{j} + beta{j}.beta{i}"), Op::Beta(i), Op::Beta(j)));
        }
    }
    if scope == RelationScope::Full {
        for i in 0..m {
            rels.push(Relation {
                name: format!("[d, e{}]", i + 1),
                terms: vec![(1, vec![Op::E(i), Op::D]), (-1, vec![Op::D, Op::E(i)])],
            });
            rels.push(Relation {
                name: format!("[d, E{}] - (e{} beta0 - beta0 e{} - beta{})", i + 1, i + 1, i + 1, i + 1),
                terms: vec![
                    (1, vec![Op::BigE(i), Op::D]),
                    (-1, vec![Op::D, Op::BigE(i)]),
                    (-1, vec![Op::Beta(0), Op::E(i)]),
                    (1, vec![Op::E(i), Op::Beta(0)]),
                    (1, vec![Op::Beta(i + 1)]),
                ],
            });
            rels.push(Relation {
                name: format!("[E{}, beta0]", i + 1),
                terms: vec![(1, vec![Op::Beta(0), Op::BigE(i)]), (-1, vec![Op::BigE(i), Op::Beta(0)])],
            });
            for j in 1..=m {
                rels.push(Relation {
                    name: format!("[e{}, beta{j}]", i + 1),
                    terms: vec![(1, vec![Op::Beta(j), Op::E(i)]), (-1, vec![Op::E(i), Op::Beta(j)])],
                });
                rels.push(Relation {
                    name: format!("[E{}, beta{j}]", i + 1),
                    terms: vec![(1, vec![Op::Beta(j), Op::BigE(i)]), (-1, vec![Op::BigE(i), Op::Beta(j)])],
                });
            }
        }
    }
    rels
}

/// Verifies exactly the anticommutation identities that the square of every
/// truncated total differential decomposes into: `(d+β_0)^2` on each weight,
/// `{d+β_0, β_i}` where the target weight is present, and `{β_i, β_j}` where
/// all three shifted weights are present. Together these prove `D^2 = 0` on
/// every slice assembled from the given weights, because truncation only
/// removes whole blocks and each removed block kills both halves of the
/// corresponding anticommutator.
pub fn check_differential_pieces(
    ops: &dyn ModuleOps,
    weights: &std::collections::BTreeSet<Grade>,
) -> RelationReport {
    use rayon::prelude::*;
    let m = ops.num_central();
    let tws: Vec<Grade> = (0..m).map(|i| ops.central_weight(i)).collect();
    let keys_of = |v: &Grade| -> Vec<CompKey> {
        ops.component_keys()
            .into_iter()
            .filter(|k| &k.weight == v)
            .collect()
    };
    // (name, terms, weight applicability)
    let mut jobs: Vec<(Relation, Grade)> = Vec::new();
    let anti = |name: String, a: Op, b: Op| Relation {
        name,
        terms: vec![(1, vec![a, b]), (1, vec![b, a])],
    };
    for v in weights {
        jobs.push((anti("(d+beta0)^2: d.d".into(), Op::D, Op::D), v.clone()));
        jobs.push((anti("(d+beta0)^2: d.beta0".into(), Op::D, Op::Beta(0)), v.clone()));
        jobs.push((anti("(d+beta0)^2: beta0.beta0".into(), Op::Beta(0), Op::Beta(0)), v.clone()));
        for i in 0..m {
            let vi = grade_add(v, &tws[i]);
            if !weights.contains(&vi) {
                continue;
            }
            jobs.push((anti(format!("{{d, beta{}}}", i + 1), Op::D, Op::Beta(i + 1)), v.clone()));
            jobs.push((
                anti(format!("{{beta0, beta{}}}", i + 1), Op::Beta(0), Op::Beta(i + 1)),
                v.clone(),
            ));
            for j in i..m {
                let vj = grade_add(v, &tws[j]);
                let vij = grade_add(&vi, &tws[j]);
                if weights.contains(&vj) && weights.contains(&vij) {
                    jobs.push((
                        anti(format!("{{beta{}, beta{}}}", i + 1, j + 1), Op::Beta(i + 1), Op::Beta(j + 1)),
                        v.clone(),
                    ));
                }
            }
        }
    }
    let verdicts: Vec<Option<RelationWitness>> = jobs
        .par_iter()
        .map(|(rel, v)| {
            for key in keys_of(v) {
                for idx in 0..ops.dim(&key) {
                    let mut acc: BTreeMap<(CompKey, usize), Rational> = BTreeMap::new();
                    for (coeff, word) in &rel.terms {
                        let mut cur = vec![(idx, Rational::from_integer((*coeff).into()))];
                        let mut cur_key = key.clone();
                        for op in word {
                            let (nk, nv) = apply_sparse(ops, *op, &cur_key, &cur);
                            cur_key = nk;
                            cur = nv;
                        }
                        for (tidx, c) in cur {
                            let slot = acc
                                .entry((cur_key.clone(), tidx))
                                .or_insert_with(|| Rational::from_integer(0.into()));
                            *slot += c;
                        }
                    }
                    acc.retain(|_, c| !num_traits::Zero::is_zero(c));
                    if !acc.is_empty() {
                        return Some(RelationWitness {
                            relation: rel.name.clone(),
                            component: format!("(w={:?}, deg={})", key.weight, key.degree),
                            basis_label: ops.label(&key, idx),
                            difference: acc
                                .iter()
                                .map(|((k, t), c)| {
                                    format!("({})·{}", format_rational(c), ops.label(k, *t))
                                })
                                .collect::<Vec<_>>()
                                .join(" + "),
                        });
                    }
                }
            }
            None
        })
        .collect();
    // compress: one verdict per relation name
    let mut by_name: BTreeMap<String, RelationVerdict> = BTreeMap::new();
    for ((rel, _), witness) in jobs.iter().zip(verdicts) {
        let entry = by_name.entry(rel.name.clone()).or_insert_with(|| RelationVerdict {
            relation: rel.name.clone(),
            ok: true,
            components_checked: 0,
            witness: None,
        });
        entry.components_checked += 1;
        if let Some(w) = witness {
            entry.ok = false;
            entry.witness.get_or_insert(w);
        }
    }
    RelationReport { verdicts: by_name.into_values().collect() }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelationWitness {
    pub relation: String,
    pub component: String,
    pub basis_label: String,
    pub difference: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelationVerdict {
    pub relation: String,
    pub ok: bool,
    pub components_checked: usize,
    pub witness: Option<RelationWitness>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RelationReport {
    pub verdicts: Vec<RelationVerdict>,
}

impl RelationReport {
    pub fn all_ok(&self) -> bool {
        self.verdicts.iter().all(|v| v.ok)
    }
}

/// Checks the identity suite on every basis element of the given source
/// components. The caller must pick `keys` so that all intermediate
/// components of every word are inside the built range.
pub fn check_relations(ops: &dyn ModuleOps, keys: &[CompKey], scope: RelationScope) -> RelationReport {
    let rels = relation_suite(ops.num_central(), scope);
    let jobs: Vec<(usize, &CompKey)> = rels
        .iter()
        .enumerate()
        .flat_map(|(ri, _)| keys.iter().map(move |k| (ri, k)))
        .collect();
    let outcomes: Vec<(usize, usize, Option<RelationWitness>)> = jobs
        .par_iter()
        .map(|&(ri, key)| {
            let rel = &rels[ri];
            let mut witness = None;
            let mut checked = 0usize;
            'keys: for key in [key] {
                let dim = ops.dim(key);
                if dim == 0 {
                    continue;
                }
                checked += 1;
                for idx in 0..dim {
                    let mut acc: BTreeMap<(CompKey, usize), Rational> = BTreeMap::new();
                    for (coeff, word) in &rel.terms {
                        let mut cur = vec![(idx, Rational::from_integer((*coeff).into()))];
                        let mut cur_key = key.clone();
                        for op in word {
                            let (nk, nv) = apply_sparse(ops, *op, &cur_key, &cur);
                            cur_key = nk;
                            cur = nv;
                        }
                        for (tidx, c) in cur {
                            let slot = acc
                                .entry((cur_key.clone(), tidx))
                                .or_insert_with(|| Rational::from_integer(0.into()));
                            *slot += c;
                        }
                    }
                    acc.retain(|_, c| !num_traits::Zero::is_zero(c));
                    if !acc.is_empty() {
                        let diff = acc
                            .iter()
                            .map(|((k, t), c)| {
                                format!("({})·{}", format_rational(c), ops.label(k, *t))
                            })
                            .collect::<Vec<_>>()
                            .join(" + ");
                        witness = Some(RelationWitness {
                            relation: rel.name.clone(),
                            component: format!("(w={:?}, deg={})", key.weight, key.degree),
                            basis_label: ops.label(key, idx),
                            difference: diff,
                        });
                        break 'keys;
                    }
                }
            }
            (ri, checked, witness)
        })
        .collect();
    let mut verdicts: Vec<RelationVerdict> = rels
        .iter()
        .map(|rel| RelationVerdict {
            relation: rel.name.clone(),
            ok: true,
            components_checked: 0,
            witness: None,
        })
        .collect();
    for (ri, checked, witness) in outcomes {
        verdicts[ri].components_checked += checked;
        if let Some(w) = witness {
            verdicts[ri].ok = false;
            verdicts[ri].witness.get_or_insert(w);
        }
    }
    RelationReport { verdicts }
}

/// A twisted module with materialized operator matrices.
#[derive(Clone, Debug)]
pub struct LambdaExtModule {
    pub grading_rank: usize,
    pub t_weights: Vec<Grade>,
    /// labels of the basis per component; the component dimension is the length
    pub comps: BTreeMap<CompKey, Vec<String>>,
    /// operator matrices keyed by (operator, source component)
    pub mats: BTreeMap<(Op, CompKey), SparseMatrix>,
}

impl LambdaExtModule {
    pub fn op_matrix(&self, op: Op, key: &CompKey) -> Option<&SparseMatrix> {
        self.mats.get(&(op, key.clone()))
    }

    fn all_ops(&self) -> Vec<Op> {
        let m = self.t_weights.len();
        let mut ops = vec![Op::D];
        for j in 0..=m {
            ops.push(Op::Beta(j));
        }
        for i in 0..m {
            ops.push(Op::E(i));
            ops.push(Op::BigE(i));
        }
        ops
    }
}

impl ModuleOps for LambdaExtModule {
    fn grading_rank(&self) -> usize {
        self.grading_rank
    }

    fn num_central(&self) -> usize {
        self.t_weights.len()
    }

    fn central_weight(&self, i: usize) -> Grade {
        self.t_weights[i].clone()
    }

    fn component_keys(&self) -> Vec<CompKey> {
        self.comps.keys().cloned().collect()
    }

    fn dim(&self, key: &CompKey) -> usize {
        self.comps.get(key).map_or(0, |v| v.len())
    }

    fn label(&self, key: &CompKey, idx: usize) -> String {
        self.comps[key][idx].clone()
    }

    fn apply(&self, op: Op, key: &CompKey, idx: usize) -> Vec<(usize, Rational)> {
        match self.mats.get(&(op, key.clone())) {
            None => Vec::new(),
            Some(m) => m.iter().filter(|(_, c, _)| *c == idx).map(|(r, _, v)| (r, v.clone())).collect(),
        }
    }
}

/// Materializes operator matrices from any streaming module.
pub fn materialize(ops: &dyn ModuleOps) -> LambdaExtModule {
    let m = ops.num_central();
    let keys = ops.component_keys();
    let mut comps = BTreeMap::new();
    for key in &keys {
        let labels: Vec<String> = (0..ops.dim(key)).map(|i| ops.label(key, i)).collect();
        comps.insert(key.clone(), labels);
    }
    let mut all_ops = vec![Op::D];
    for j in 0..=m {
        all_ops.push(Op::Beta(j));
    }
    for i in 0..m {
        all_ops.push(Op::E(i));
        all_ops.push(Op::BigE(i));
    }
    let mut mats = BTreeMap::new();
    for key in &keys {
        let dim = ops.dim(key);
        for &op in &all_ops {
            let target = key.shifted(&op.weight_shift(ops), op.degree_shift());
            let tdim = ops.dim(&target);
            let mut mat = SparseMatrix::zero(tdim, dim);
            let mut nonzero = false;
            for idx in 0..dim {
                for (tidx, c) in ops.apply(op, key, idx) {
                    assert!(tidx < tdim, "operator output outside the built range");
                    mat.set(tidx, idx, c);
                    nonzero = true;
                }
            }
            if nonzero {
                mats.insert((op, key.clone()), mat);
            }
        }
    }
    LambdaExtModule {
        grading_rank: ops.grading_rank(),
        t_weights: (0..m).map(|i| ops.central_weight(i)).collect(),
        comps,
        mats,
    }
}

/// A map of twisted modules on matrices, keyed by source component.
#[derive(Clone, Debug)]
pub struct ModuleMap {
    pub weight_shift: Grade,
    pub degree_shift: i64,
    pub mats: BTreeMap<CompKey, SparseMatrix>,
}

impl ModuleMap {
    pub fn identity(module: &LambdaExtModule) -> Self {
        let mats = module
            .comps
            .iter()
            .map(|(k, labels)| (k.clone(), SparseMatrix::identity(labels.len())))
            .collect();
        ModuleMap {
            weight_shift: vec![0; module.grading_rank],
            degree_shift: 0,
            mats,
        }
    }

    pub fn matrix(&self, key: &CompKey, target_dim: usize, source_dim: usize) -> SparseMatrix {
        self.mats
            .get(key)
            .cloned()
            .unwrap_or_else(|| SparseMatrix::zero(target_dim, source_dim))
    }
}

#[derive(Debug, Error)]
pub enum ConeError {
    #[error("map does not commute strictly with {op} at component {component}")]
    NotStrictMorphism { op: String, component: String },
}

/// Standard cone of a strict map of twisted modules. The source sits in the
/// cone with degree shifted down by one; the differential and every `β_j`
/// change sign there, the `e_i` and `E_i` do not.
pub fn cone_module(
    sub: &LambdaExtModule,
    ambient: &LambdaExtModule,
    map: &ModuleMap,
) -> Result<LambdaExtModule, ConeError> {
    assert_eq!(sub.grading_rank, ambient.grading_rank);
    assert_eq!(sub.t_weights, ambient.t_weights);
    let ops_list = ambient.all_ops();
    // strictness: phi (op_sub) = (op_amb) phi on every source component
    for key in sub.comps.keys() {
        let sdim = sub.dim(key);
        for &op in &ops_list {
            let target = key.shifted(&op.weight_shift(sub), op.degree_shift());
            let lhs = map
                .matrix(&target, ambient.dim(&target), sub.dim(&target))
                .mul(&sub.op_matrix(op, key).cloned().unwrap_or_else(|| {
                    SparseMatrix::zero(sub.dim(&target), sdim)
                }));
            let rhs = ambient
                .op_matrix(op, key)
                .cloned()
                .unwrap_or_else(|| SparseMatrix::zero(ambient.dim(&target), ambient.dim(key)))
                .mul(&map.matrix(key, ambient.dim(key), sdim));
            if lhs != rhs {
                return Err(ConeError::NotStrictMorphism {
                    op: op.name(),
                    component: format!("(w={:?}, deg={})", key.weight, key.degree),
                });
            }
        }
    }

    // cone component at (w, g) = sub(w, g+1) ++ ambient(w, g)
    let mut keys: std::collections::BTreeSet<CompKey> = std::collections::BTreeSet::new();
    for k in sub.comps.keys() {
        keys.insert(CompKey::new(k.weight.clone(), k.degree - 1));
    }
    for k in ambient.comps.keys() {
        keys.insert(k.clone());
    }
    let mut comps = BTreeMap::new();
    for key in &keys {
        let up = CompKey::new(key.weight.clone(), key.degree + 1);
        let mut labels: Vec<String> = sub
            .comps
            .get(&up)
            .map(|ls| ls.iter().map(|l| format!("S·{}", l)).collect())
            .unwrap_or_default();
        labels.extend(ambient.comps.get(key).cloned().unwrap_or_default());
        if !labels.is_empty() {
            comps.insert(key.clone(), labels);
        }
    }
    let sub_dim = |k: &CompKey| sub.dim(&CompKey::new(k.weight.clone(), k.degree + 1));
    let mut mats = BTreeMap::new();
    for key in comps.keys() {
        let s_dim = sub_dim(key);
        let a_dim = ambient.dim(key);
        for &op in &ops_list {
            let target = key.shifted(&op.weight_shift(ambient), op.degree_shift());
            let ts_dim = sub_dim(&target);
            let ta_dim = ambient.dim(&target);
            let rows = ts_dim + ta_dim;
            if rows == 0 || s_dim + a_dim == 0 {
                continue;
            }
            let mut mat = SparseMatrix::zero(rows, s_dim + a_dim);
            let odd = matches!(op, Op::D | Op::Beta(_));
            let up = CompKey::new(key.weight.clone(), key.degree + 1);
            if let Some(ms) = sub.op_matrix(op, &up) {
                for (r, c, v) in ms.iter() {
                    let v = if odd { -v.clone() } else { v.clone() };
                    mat.set(r, c, v);
                }
            }
            if op == Op::D {
                // connecting map phi from the shifted part into the ambient
                if let Some(mp) = map.mats.get(&up) {
                    for (r, c, v) in mp.iter() {
                        mat.set(ts_dim + r, c, v.clone());
                    }
                }
            }
            if let Some(ma) = ambient.op_matrix(op, key) {
                for (r, c, v) in ma.iter() {
                    mat.set(ts_dim + r, s_dim + c, v.clone());
                }
            }
            if !mat.is_zero() {
                mats.insert((op, key.clone()), mat);
            }
        }
    }
    Ok(LambdaExtModule {
        grading_rank: ambient.grading_rank,
        t_weights: ambient.t_weights.clone(),
        comps,
        mats,
    })
}
