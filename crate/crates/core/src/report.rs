//! Deterministic report structures shared by the drivers and the CLI.
//!
//! Reports are plain data with rationals rendered as `p/q` strings, so the
//! machine format (canonical JSON through serde) is byte-identical across
//! runs of the same instance and version. Timing is deliberately not part of
//! the machine format.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dgcat::ValidationReport;
use crate::derham::IdentityCheck;
use crate::lambdamod::tower::{WeylActionData, WeylCheck};
use crate::lambdamod::weak::IntertwinerOutcome;
use crate::lambdamod::RelationReport;

/// One row of a window dimension table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WindowRow {
    pub weight: i64,
    pub level: usize,
    pub even: usize,
    pub odd: usize,
    pub stable: bool,
    pub labels: Vec<String>,
}

/// Dimension table of one Weyl action, reported windows only.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DimsTable {
    pub rows: Vec<WindowRow>,
}

impl DimsTable {
    pub fn from_weyl(wd: &WeylActionData, with_labels: bool) -> DimsTable {
        let mut rows = Vec::new();
        for &(w, t) in &wd.reported {
            let hw = &wd.windows[&(w, t)];
            rows.push(WindowRow {
                weight: w,
                level: t,
                even: hw.even,
                odd: hw.odd,
                stable: *wd.stable.get(&(w, t)).unwrap_or(&false),
                labels: if with_labels { hw.labels.clone() } else { Vec::new() },
            });
        }
        rows.sort_by_key(|r| (r.weight, r.level));
        DimsTable { rows }
    }
}

/// Matrices of one Weyl action rendered as rational strings, flag-gated.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MatrixDump {
    pub tower: BTreeMap<String, Vec<Vec<String>>>,
    pub tau: BTreeMap<String, Vec<Vec<String>>>,
    pub dtilde: BTreeMap<String, Vec<Vec<String>>>,
}

impl MatrixDump {
    pub fn from_weyl(wd: &WeylActionData) -> MatrixDump {
        let render = |m: &crate::linalg::SparseMatrix| -> Vec<Vec<String>> {
            let mut grid = vec![vec!["0".to_string(); m.cols]; m.rows];
            for (r, c, v) in m.iter() {
                grid[r][c] = crate::linalg::format_rational(v);
            }
            grid
        };
        let mut out = MatrixDump::default();
        for (&(w, t), m) in &wd.tower_maps {
            if wd.reported.contains(&(w, t)) {
                out.tower.insert(format!("w={w} T={t}"), render(m));
            }
        }
        for (&(i, w, t), m) in &wd.tau {
            if wd.reported.contains(&(w, t)) {
                out.tau.insert(format!("tau{} w={w} T={t}", i + 1), render(m));
            }
        }
        for (&(i, w, t), m) in &wd.dtilde {
            if wd.reported.contains(&(w, t)) {
                out.dtilde.insert(format!("dtilde{} w={w} T={t}", i + 1), render(m));
            }
        }
        out
    }
}

/// Summary of a relation-suite run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelationSummary {
    pub all_ok: bool,
    pub relations_checked: usize,
    pub failures: Vec<String>,
}

impl RelationSummary {
    pub fn from_report(r: &RelationReport) -> RelationSummary {
        RelationSummary {
            all_ok: r.all_ok(),
            relations_checked: r.verdicts.len(),
            failures: r
                .verdicts
                .iter()
                .filter(|v| !v.ok)
                .map(|v| {
                    let w = v.witness.as_ref().unwrap();
                    format!(
                        "{} fails at {} on {}: {}",
                        v.relation, w.component, w.basis_label, w.difference
                    )
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeylSummary {
    pub all_ok: bool,
    pub checks: usize,
    pub failures: Vec<String>,
}

impl WeylSummary {
    pub fn from_checks(checks: &[WeylCheck]) -> WeylSummary {
        WeylSummary {
            all_ok: checks.iter().all(|c| c.ok),
            checks: checks.len(),
            failures: checks
                .iter()
                .filter(|c| !c.ok)
                .map(|c| format!("{} at (w={}, T={})", c.name, c.window.0, c.window.1))
                .collect(),
        }
    }
}

/// The verdict of the end-to-end comparison of one polynomial instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mt1Report {
    pub instance: String,
    pub multidegree: bool,
    pub t_totals: Vec<i64>,
    pub t_max: usize,
    pub weight_range: (i64, i64),
    pub relations: RelationSummary,
    pub hochschild: DimsTable,
    pub derham: DimsTable,
    pub dims_match: bool,
    pub first_mismatch: Option<(i64, usize)>,
    pub weyl_hochschild: WeylSummary,
    pub weyl_derham: WeylSummary,
    pub commutators_hochschild: WeylSummary,
    pub commutators_derham: WeylSummary,
    pub chain_level_commutator_witness: Option<String>,
    pub homotopy_identity: Vec<IdentityCheck>,
    pub fold_agreement: Vec<IdentityCheck>,
    pub intertwiner: IntertwinerOutcome,
    pub filtration_caveat: bool,
    pub verdict: String,
    pub matrices: Option<(MatrixDump, MatrixDump)>,
}

impl Mt1Report {
    pub fn consistent(&self) -> bool {
        self.verdict == "consistent with the comparison isomorphism"
    }
}

/// HKR comparison report: the five operator compatibilities with the
/// measured sign of the `E`-compatibility, and quasi-isomorphism
/// certificates per weight.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HkrReport {
    pub instance: String,
    pub chain_map_ok: bool,
    pub b_compat_ok: bool,
    pub beta_compat_ok: bool,
    pub e_compat_ok: bool,
    /// the measured sign s with ε∘E_i = s · (½ df_i · d)∘ε, if any holds
    pub big_e_sign: Option<i64>,
    pub failures: Vec<String>,
    pub quasi_iso: Vec<QuasiIsoRow>,
    pub quasi_iso_ok: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuasiIsoRow {
    pub weight: i64,
    pub degree: i64,
    pub hh_dim: usize,
    pub form_dim: usize,
    pub eps_rank: usize,
    pub ok: bool,
}

/// Report of a Morita (corner embedding) run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MoritaReport {
    pub instance: String,
    pub length_bound: usize,
    pub t_max: usize,
    pub source: DimsTable,
    pub target: DimsTable,
    pub induced_iso: bool,
    pub base_profile: (usize, usize),
    pub failures: Vec<String>,
}

/// Report of a validation run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidateReport {
    pub instance: String,
    pub presentation: ValidationReport,
    pub central_families: Vec<ValidationReport>,
    pub ok: bool,
}

/// Report of a de Rham run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerhamReport {
    pub instance: String,
    pub relations_with_e: RelationSummary,
    pub relations_without_e: RelationSummary,
    pub weak_morphism_found: bool,
    pub homotopy_from_candidate: bool,
    pub homotopy_identity: Vec<IdentityCheck>,
    pub fold_agreement: Vec<IdentityCheck>,
    pub dims: DimsTable,
    pub weyl: WeylSummary,
    pub filtration_caveat: bool,
    pub matrices: Option<MatrixDump>,
    pub ok: bool,
}

/// Report of an identities run on one instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentitiesReport {
    pub instance: String,
    pub relations: RelationSummary,
    pub ok: bool,
}

/// Report of a periodic-homology run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HpReport {
    pub instance: String,
    pub relations: RelationSummary,
    pub dims: DimsTable,
    pub weyl: WeylSummary,
    pub matrices: Option<MatrixDump>,
    pub ok: bool,
}

/// Canonical machine rendering (pretty JSON with sorted keys, no timing).
pub fn to_machine(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize")
}
