//! Weak morphisms of twisted modules and intertwiners of Weyl actions.
//!
//! A map of the underlying `(d, β_0..β_m)`-modules is *weak* when its failure
//! to commute with each `e_i + E_i` is null-homotopic on the folded total
//! complex. The check verifies a supplied candidate homotopy exactly, or
//! searches for one by affine solving (meant for small windows).
//!
//! An intertwiner between two Weyl actions is a window-wise invertible,
//! parity-preserving family of maps commuting with the tower, τ, and ∂~
//! matrices; the solver assembles the commutation constraints, solves the
//! homogeneous system, and samples the solution space deterministically for
//! an invertible point.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::dgcat::grade_add;
use crate::linalg::{format_rational, rat, solve_affine, Rational, SparseMatrix};

use super::tower::{TowerCtx, WeylActionData};
use super::{CompKey, ModuleMap, Op};

/// Outcome of the weak-morphism check for one underlying map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakMorphismReport {
    /// per twisting index, per family total weight: whether a homotopy is
    /// known (verified candidate or solved)
    pub verdicts: Vec<WeakVerdict>,
    pub is_weak: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakVerdict {
    pub index: usize,
    pub family: String,
    pub found: bool,
    pub from_candidate: bool,
}

/// Checks whether `phi` (a strict map of the underlying `(d, β)`-modules,
/// given per component with no shift) is a weak morphism: for each `i` the
/// defect `(e_i + E_i) φ - φ (e_i + E_i)` must be `D h + h D` for some `h`.
/// `candidates[i]`, when given, is verified; otherwise a homotopy is solved
/// for on each slice family.
pub fn is_weak_morphism(
    src: &TowerCtx,
    tgt: &TowerCtx,
    phi: &ModuleMap,
    candidates: Option<&[ModuleMap]>,
) -> WeakMorphismReport {
    let m = src.tws.len();
    let mut verdicts = Vec::new();
    let mut all = true;
    for i in 0..m {
        let tw = src.tws[i].clone();
        for fp in &src.plan.families {
            let omega = &fp.omega;
            let omega_t = grade_add(omega, &tw);
            // both slices must exist at a common level
            let Some(lt) = tgt.family_max_level(&omega_t) else { continue };
            let level = fp.max_level.min(lt);
            let Some(d_src) = src.slice_total_matrix(omega, level) else { continue };
            let Some(d_tgt) = tgt.slice_total_matrix(&omega_t, level) else { continue };
            // defect = (e_i + E_i)_tgt ∘ φ - φ ∘ (e_i + E_i)_src, componentwise
            let defect_apply = |key: &CompKey, idx: usize| -> Vec<(CompKey, usize, Rational)> {
                let mut out: BTreeMap<(CompKey, usize), Rational> = BTreeMap::new();
                // path 1: φ then (e+E) in the target module
                if let Some(mat) = phi.mats.get(key) {
                    for (r, c, v) in mat.iter() {
                        if c == idx {
                            for op in [Op::E(i), Op::BigE(i)] {
                                let tk = key.shifted(&op.weight_shift(tgt.ops), op.degree_shift());
                                for (tidx, tc) in tgt.ops.apply(op, key, r) {
                                    *out.entry((tk.clone(), tidx)).or_insert_with(Rational::zero) +=
                                        tc * v;
                                }
                            }
                        }
                    }
                }
                // path 2: (e+E) in the source module, then φ
                for op in [Op::E(i), Op::BigE(i)] {
                    let tk = key.shifted(&op.weight_shift(src.ops), op.degree_shift());
                    for (mid, mc) in src.ops.apply(op, key, idx) {
                        if let Some(mat) = phi.mats.get(&tk) {
                            for (r, c, v) in mat.iter() {
                                if c == mid {
                                    *out.entry((tk.clone(), r)).or_insert_with(Rational::zero) -=
                                        v * &mc;
                                }
                            }
                        }
                    }
                }
                out.retain(|_, v| !v.is_zero());
                out.into_iter().map(|((k, t), v)| (k, t, v)).collect()
            };
            let Some(defect) = src.slice_map_matrix(tgt, omega, &omega_t, level, &defect_apply)
            else {
                continue;
            };
            if defect.is_zero() {
                verdicts.push(WeakVerdict {
                    index: i + 1,
                    family: format!("ω={:?}", omega),
                    found: true,
                    from_candidate: false,
                });
                continue;
            }
            // candidate homotopy, as a slice matrix
            let mut found = false;
            let mut from_candidate = false;
            if let Some(cands) = candidates {
                let h_apply = |key: &CompKey, idx: usize| -> Vec<(CompKey, usize, Rational)> {
                    let tk = CompKey::new(
                        grade_add(&key.weight, &cands[i].weight_shift),
                        key.degree + cands[i].degree_shift,
                    );
                    match cands[i].mats.get(key) {
                        None => Vec::new(),
                        Some(mat) => mat
                            .iter()
                            .filter(|(_, c, _)| *c == idx)
                            .map(|(r, _, v)| (tk.clone(), r, v.clone()))
                            .collect(),
                    }
                };
                if let Some(h) = src.slice_map_matrix(tgt, omega, &omega_t, level, &h_apply) {
                    if d_tgt.mul(&h).add(&h.mul(&d_src)) == defect {
                        found = true;
                        from_candidate = true;
                    }
                }
            }
            if !found {
                found = solve_homotopy(&d_src, &d_tgt, &defect).is_some();
            }
            all &= found;
            verdicts.push(WeakVerdict {
                index: i + 1,
                family: format!("ω={:?}", omega),
                found,
                from_candidate,
            });
        }
    }
    WeakMorphismReport { verdicts, is_weak: all }
}

/// Searches for `h` with `D' h + h D = defect` by affine solving.
pub fn solve_homotopy(
    d_src: &SparseMatrix,
    d_tgt: &SparseMatrix,
    defect: &SparseMatrix,
) -> Option<SparseMatrix> {
    let rows = d_tgt.rows;
    let cols = d_src.cols;
    let nvars = rows * cols;
    let var = |r: usize, c: usize| r * cols + c;
    let mut entries: Vec<(usize, usize, Rational)> = Vec::new();
    let mut rhs = vec![Rational::zero(); rows * cols];
    // equation (r, c): sum_k D'[r,k] h[k,c] + sum_k h[r,k] D[k,c] = defect[r,c]
    for (r, k, v) in d_tgt.iter() {
        for c in 0..cols {
            entries.push((r * cols + c, var(k, c), v.clone()));
        }
    }
    for (k, c, v) in d_src.iter() {
        for r in 0..rows {
            entries.push((r * cols + c, var(r, k), v.clone()));
        }
    }
    for (r, c, v) in defect.iter() {
        rhs[r * cols + c] = v.clone();
    }
    let mat = SparseMatrix::from_entries(rows * cols, nvars, entries);
    let sol = solve_affine(&mat, &rhs)?;
    let mut h = SparseMatrix::zero(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            if !sol[var(r, c)].is_zero() {
                h.set(r, c, sol[var(r, c)].clone());
            }
        }
    }
    Some(h)
}

/// Intertwiner search outcome.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum IntertwinerOutcome {
    /// dimensions differ at a reported window: a falsification certificate
    DimensionMismatch {
        window: (i64, usize),
        left: (usize, usize),
        right: (usize, usize),
    },
    NotFound { detail: String },
    Found { windows: BTreeMap<String, Vec<Vec<String>>> },
}

impl IntertwinerOutcome {
    pub fn is_found(&self) -> bool {
        matches!(self, IntertwinerOutcome::Found { .. })
    }
}

fn commutation_rows(
    src: (i64, usize),
    tgt: (i64, usize),
    ma: &SparseMatrix,
    mb: &SparseMatrix,
    a: &WeylActionData,
    b: &WeylActionData,
    var_of: &BTreeMap<((i64, usize), usize, usize), usize>,
    rows: &mut Vec<BTreeMap<usize, Rational>>,
) {
    let sa = a.windows[&src].dim();
    let tb = b.windows[&tgt].dim();
    // Φ_tgt · M_a - M_b · Φ_src = 0, entry (r, c)
    for r in 0..tb {
        for c in 0..sa {
            let mut row: BTreeMap<usize, Rational> = BTreeMap::new();
            for (k, cc, v) in ma.iter() {
                if cc == c {
                    if let Some(&var) = var_of.get(&(tgt, r, k)) {
                        *row.entry(var).or_insert_with(Rational::zero) += v.clone();
                    }
                }
            }
            for (rr, k, v) in mb.iter() {
                if rr == r {
                    if let Some(&var) = var_of.get(&(src, k, c)) {
                        *row.entry(var).or_insert_with(Rational::zero) -= v.clone();
                    }
                }
            }
            row.retain(|_, v| !v.is_zero());
            if !row.is_empty() {
                rows.push(row);
            }
        }
    }
}

/// Finds a window-wise invertible, parity-preserving family commuting with
/// the tower, τ, and ∂~ matrices of two Weyl actions on their reported
/// windows.
pub fn intertwiner_solve(a: &WeylActionData, b: &WeylActionData) -> IntertwinerOutcome {
    let mut windows: Vec<(i64, usize)> = a.reported.iter().cloned().collect();
    windows.sort_unstable();
    for w in &windows {
        let da = a.window_dims(w.0, w.1);
        let db = b.window_dims(w.0, w.1);
        if da != db {
            return IntertwinerOutcome::DimensionMismatch { window: *w, left: da, right: db };
        }
    }

    let mut var_of: BTreeMap<((i64, usize), usize, usize), usize> = BTreeMap::new();
    let mut vars = 0usize;
    for w in &windows {
        let ha = &a.windows[w];
        let hb = &b.windows[w];
        for r in 0..hb.dim() {
            for c in 0..ha.dim() {
                if hb.parity[r] == ha.parity[c] {
                    var_of.insert((*w, r, c), vars);
                    vars += 1;
                }
            }
        }
    }

    let mut rows: Vec<BTreeMap<usize, Rational>> = Vec::new();
    for w in &windows {
        if w.1 >= 1 {
            let tgt = (w.0, w.1 - 1);
            if a.reported.contains(&tgt) {
                if let (Some(ma), Some(mb)) = (a.tower_maps.get(w), b.tower_maps.get(w)) {
                    commutation_rows(*w, tgt, ma, mb, a, b, &var_of, &mut rows);
                }
            }
        }
        for i in 0..a.m {
            let tgt = (w.0 - a.t_totals[i], w.1 + 1);
            if a.reported.contains(&tgt) {
                if let (Some(ma), Some(mb)) = (a.tau.get(&(i, w.0, w.1)), b.tau.get(&(i, w.0, w.1)))
                {
                    commutation_rows(*w, tgt, ma, mb, a, b, &var_of, &mut rows);
                }
            }
            if w.1 >= 1 {
                let tgt = (w.0 + a.t_totals[i], w.1 - 1);
                if a.reported.contains(&tgt) {
                    if let (Some(ma), Some(mb)) =
                        (a.dtilde.get(&(i, w.0, w.1)), b.dtilde.get(&(i, w.0, w.1)))
                    {
                        commutation_rows(*w, tgt, ma, mb, a, b, &var_of, &mut rows);
                    }
                }
            }
        }
    }

    let mut cmat = SparseMatrix::zero(rows.len(), vars);
    for (ri, row) in rows.iter().enumerate() {
        for (&var, v) in row {
            cmat.set(ri, var, v.clone());
        }
    }
    let kernel = cmat.kernel_basis();
    if vars == 0 {
        // every window is zero-dimensional: the empty map is an isomorphism
        return IntertwinerOutcome::Found { windows: BTreeMap::new() };
    }
    if kernel.is_empty() {
        return IntertwinerOutcome::NotFound { detail: "constraints force the zero map".into() };
    }

    // deterministic sampling of the solution space for an invertible point
    let mut state = 0xfeed_5eed_0123_4567u64;
    let mut step = |range: u64| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state % range) as i64
    };
    let attempts = 200usize.max(4 * kernel.len());
    for attempt in 0..attempts {
        let coeffs: Vec<Rational> = (0..kernel.len())
            .map(|i| {
                if attempt < kernel.len() {
                    rat((i == attempt) as i64)
                } else {
                    rat(step(7) - 3)
                }
            })
            .collect();
        if coeffs.iter().all(|c| c.is_zero()) {
            continue;
        }
        let mut phi: BTreeMap<(i64, usize), SparseMatrix> = BTreeMap::new();
        for w in &windows {
            let d = a.windows[w].dim();
            phi.insert(*w, SparseMatrix::zero(d, d));
        }
        for (kv, c) in kernel.iter().zip(&coeffs) {
            if c.is_zero() {
                continue;
            }
            for (&(w, r, cc), &var) in &var_of {
                if !kv[var].is_zero() {
                    phi.get_mut(&w).unwrap().add_to(r, cc, c * &kv[var]);
                }
            }
        }
        let ok = windows.iter().all(|w| {
            let d = a.windows[w].dim();
            phi[w].rank() == d
        });
        if ok {
            let rendered: BTreeMap<String, Vec<Vec<String>>> = phi
                .iter()
                .map(|(w, m)| {
                    let mut grid = vec![vec!["0".to_string(); m.cols]; m.rows];
                    for (r, c, v) in m.iter() {
                        grid[r][c] = format_rational(v);
                    }
                    (format!("w={} T={}", w.0, w.1), grid)
                })
                .collect();
            return IntertwinerOutcome::Found { windows: rendered };
        }
    }
    IntertwinerOutcome::NotFound {
        detail: format!(
            "no invertible point found in a solution space of dimension {} after {} samples",
            kernel.len(),
            attempts
        ),
    }
}
