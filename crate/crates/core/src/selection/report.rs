//! Serializable run records and the best-model text summary.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::ConfusionMatrix;
use super::nested::{CellStatus, EvalReport, ExperimentMatrix};
use crate::classifiers::ModelFamily;
use crate::data::Role;
use crate::fusion::FusionMode;

/// One (role, mode) cell of a single-seed run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub role: Role,
    pub fusion: FusionMode,
    pub status: CellStatus,
    pub reports: Vec<EvalReport>,
}

/// All cells of a single-seed run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub seed: u64,
    pub cells: Vec<CellRecord>,
}

impl From<&ExperimentMatrix> for MatrixRecord {
    fn from(m: &ExperimentMatrix) -> Self {
        Self {
            seed: m.seed,
            cells: m
                .cells
                .iter()
                .map(|c| CellRecord {
                    role: c.role,
                    fusion: c.mode,
                    status: c.status,
                    reports: c.outcomes.iter().map(|o| o.report.clone()).collect(),
                })
                .collect(),
        }
    }
}

/// Median; mean of the middle pair for even lengths. `NaN` when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub family: ModelFamily,
    /// Median over seeds of the pooled balanced accuracy.
    pub pooled_median: f64,
    pub pooled_by_seed: Vec<f64>,
    /// Median over seeds of the per-fold mean and sd.
    pub fold_mean_median: f64,
    pub fold_sd_median: f64,
    pub folds_undefined: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub role: Role,
    pub fusion: FusionMode,
    pub status: CellStatus,
    pub families: Vec<FamilySummary>,
    pub n_samples: usize,
    pub n_negative: usize,
    pub excluded_missing_partner: usize,
}

impl SummaryCell {
    /// Family with the highest seed-median pooled score; first listed wins ties.
    pub fn best(&self) -> Option<&FamilySummary> {
        let mut best: Option<&FamilySummary> = None;
        for f in &self.families {
            if best.is_none_or(|b| f.pooled_median > b.pooled_median) {
                best = Some(f);
            }
        }
        best
    }
}

/// Seed-aggregated view of one or more single-seed runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seeds: Vec<u64>,
    pub k_outer: usize,
    pub k_inner: usize,
    pub cells: Vec<SummaryCell>,
}

impl Summary {
    pub fn from_records(records: &[MatrixRecord]) -> Self {
        let seeds = records.iter().map(|r| r.seed).collect();
        let first_report = records.iter().flat_map(|r| &r.cells).flat_map(|c| &c.reports).next();
        let (k_outer, k_inner) = first_report.map_or((0, 0), |r| (r.k_outer, r.k_inner));
        let mut cells = Vec::new();
        if let Some(first) = records.first() {
            for proto in &first.cells {
                let matching: Vec<&CellRecord> = records
                    .iter()
                    .filter_map(|r| r.cells.iter().find(|c| c.role == proto.role && c.fusion == proto.fusion))
                    .collect();
                let families = proto
                    .reports
                    .iter()
                    .map(|p| {
                        let reports: Vec<&EvalReport> = matching
                            .iter()
                            .filter_map(|c| c.reports.iter().find(|r| r.family == p.family))
                            .collect();
                        let pooled: Vec<f64> = reports.iter().map(|r| r.pooled_balanced_accuracy).collect();
                        let means: Vec<f64> = reports.iter().map(|r| r.fold_mean).filter(|v| v.is_finite()).collect();
                        let sds: Vec<f64> = reports.iter().map(|r| r.fold_sd).filter(|v| v.is_finite()).collect();
                        FamilySummary {
                            family: p.family,
                            pooled_median: median(&pooled),
                            pooled_by_seed: pooled,
                            fold_mean_median: median(&means),
                            fold_sd_median: median(&sds),
                            folds_undefined: reports.iter().map(|r| r.folds_undefined).sum(),
                        }
                    })
                    .collect();
                let head = proto.reports.first();
                cells.push(SummaryCell {
                    role: proto.role,
                    fusion: proto.fusion,
                    status: proto.status,
                    families,
                    n_samples: head.map_or(0, |r| r.n_samples),
                    n_negative: head.map_or(0, |r| r.n_negative),
                    excluded_missing_partner: head.map_or(0, |r| r.excluded_missing_partner),
                });
            }
        }
        Self {
            seeds,
            k_outer,
            k_inner,
            cells,
        }
    }

    pub fn cell(&self, role: Role, fusion: FusionMode) -> Option<&SummaryCell> {
        self.cells.iter().find(|c| c.role == role && c.fusion == fusion)
    }

    /// Best-family seed-median pooled balanced accuracy of a cell.
    pub fn value(&self, role: Role, fusion: FusionMode) -> Option<f64> {
        self.cell(role, fusion)?.best().map(|f| f.pooled_median)
    }

    /// The evaluated cell with the highest value for `role`; earlier table rows win ties.
    pub fn best_cell(&self, role: Role) -> Option<&SummaryCell> {
        let mut best: Option<(&SummaryCell, f64)> = None;
        for mode in FusionMode::TABLE_ORDER {
            if let (Some(cell), Some(v)) = (self.cell(role, mode), self.value(role, mode)) {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((cell, v));
                }
            }
        }
        best.map(|(c, _)| c)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "Prediction results of the best models: balanced accuracy (%)");
        let _ = writeln!(
            out,
            "nested couple-disjoint CV, {} outer x {} inner folds, pooled outer predictions, median over seeds [{}]",
            self.k_outer,
            self.k_inner,
            seeds.join(", ")
        );
        let _ = writeln!(out, "folds are grouped by couple and not stratified by label");
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<48}{:<24}{:<24}", "Approach", "Male", "Female");
        for mode in FusionMode::TABLE_ORDER {
            if !self.cells.iter().any(|c| c.fusion == mode) {
                continue;
            }
            let _ = write!(out, "{:<48}", mode.title());
            for role in Role::ALL {
                let _ = write!(out, "{:<24}", self.cell_text(role, mode));
            }
            out = out.trim_end().to_string();
            out.push('\n');
        }

        let _ = writeln!(out);
        let _ = writeln!(out, "Per family (pooled, median over seeds; fold mean ± sd)");
        for role in Role::ALL {
            for mode in FusionMode::TABLE_ORDER {
                let Some(cell) = self.cell(role, mode) else { continue };
                if cell.status != CellStatus::Evaluated {
                    continue;
                }
                let parts: Vec<String> = cell
                    .families
                    .iter()
                    .map(|f| {
                        let mut s = format!(
                            "{} {} ({} ± {}",
                            f.family,
                            pct(f.pooled_median),
                            pct(f.fold_mean_median),
                            pct(f.fold_sd_median)
                        );
                        if f.folds_undefined > 0 {
                            let _ = write!(s, ", {} folds undefined", f.folds_undefined);
                        }
                        s.push(')');
                        s
                    })
                    .collect();
                let _ = writeln!(out, "  {role} / {}: {}", mode.key(), parts.join("; "));
            }
        }

        let _ = writeln!(out);
        let _ = writeln!(out, "Samples");
        for role in Role::ALL {
            let cells: Vec<&SummaryCell> = self
                .cells
                .iter()
                .filter(|c| c.role == role && c.status == CellStatus::Evaluated)
                .collect();
            if cells.is_empty() {
                if self.cells.iter().any(|c| c.role == role) {
                    let _ = writeln!(out, "  {role}: no records");
                }
                continue;
            }
            let base = cells.iter().find(|c| c.fusion == FusionMode::Baseline).unwrap_or(&cells[0]);
            let _ = write!(out, "  {role}: {} records ({} negative)", base.n_samples, base.n_negative);
            let dropped = cells.iter().map(|c| c.excluded_missing_partner).max().unwrap_or(0);
            if dropped > 0 {
                let _ = write!(out, "; {dropped} excluded from dyadic approaches for a missing partner record");
            }
            out.push('\n');
        }
        out
    }

    fn cell_text(&self, role: Role, mode: FusionMode) -> String {
        match self.cell(role, mode) {
            None => "-".into(),
            Some(c) => match c.status {
                CellStatus::MissingRole => "MissingRole".into(),
                CellStatus::NoEligibleDyads => "NoEligibleDyads".into(),
                CellStatus::Evaluated => match c.best() {
                    Some(f) => format!("{} ({})", pct(f.pooled_median), f.family),
                    None => "-".into(),
                },
            },
        }
    }
}

/// Percent with one decimal.
pub fn pct(v: f64) -> String {
    if v.is_finite() {
        format!("{:.1}", 100.0 * v)
    } else {
        "n/a".into()
    }
}

/// Pooled confusion matrix of the best model for `role`, summed over seeds,
/// together with the cell it came from.
pub fn best_confusion(records: &[MatrixRecord], summary: &Summary, role: Role) -> Option<(FusionMode, ModelFamily, ConfusionMatrix)> {
    let cell = summary.best_cell(role)?;
    let family = cell.best()?.family;
    let cm = records
        .iter()
        .flat_map(|r| &r.cells)
        .filter(|c| c.role == role && c.fusion == cell.fusion)
        .flat_map(|c| &c.reports)
        .filter(|r| r.family == family)
        .map(|r| r.pooled)
        .sum();
    Some((cell.fusion, family, cm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::HyperParams;

    fn report(role: Role, fusion: FusionMode, family: ModelFamily, seed: u64, ba: f64) -> EvalReport {
        EvalReport {
            role,
            fusion,
            family,
            seed,
            k_outer: 10,
            k_inner: 5,
            stratified: false,
            n_samples: 100,
            n_negative: 10,
            n_positive: 90,
            excluded_missing_partner: 0,
            folds: vec![super::super::nested::FoldOutcome {
                fold: 0,
                n_train: 90,
                n_test: 10,
                chosen: HyperParams::LinearSvm { c: 1.0 },
                inner_scores: vec![],
                confusion: ConfusionMatrix::new([[1, 0], [0, 9]]),
                balanced_accuracy: Some(1.0),
            }],
            pooled: ConfusionMatrix::new([[5, 5], [10, 80]]),
            pooled_balanced_accuracy: ba,
            fold_mean: ba,
            fold_sd: 0.01,
            folds_undefined: 0,
        }
    }

    fn records() -> Vec<MatrixRecord> {
        [(1, 0.60, 0.55), (2, 0.62, 0.70), (3, 0.64, 0.58)]
            .into_iter()
            .map(|(seed, lin, rf)| MatrixRecord {
                seed,
                cells: vec![
                    CellRecord {
                        role: Role::Male,
                        fusion: FusionMode::Baseline,
                        status: CellStatus::Evaluated,
                        reports: vec![
                            report(Role::Male, FusionMode::Baseline, ModelFamily::LinearSvm, seed, lin),
                            report(Role::Male, FusionMode::Baseline, ModelFamily::RandomForest, seed, rf),
                        ],
                    },
                    CellRecord {
                        role: Role::Female,
                        fusion: FusionMode::Baseline,
                        status: CellStatus::MissingRole,
                        reports: vec![],
                    },
                ],
            })
            .collect()
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn aggregates_over_seeds() {
        let recs = records();
        let s = Summary::from_records(&recs);
        let cell = s.cell(Role::Male, FusionMode::Baseline).unwrap();
        assert_eq!(cell.families[0].pooled_median, 0.62);
        assert_eq!(cell.families[1].pooled_median, 0.58);
        assert_eq!(cell.best().unwrap().family, ModelFamily::LinearSvm);
        assert_eq!(s.value(Role::Female, FusionMode::Baseline), None);

        let (mode, family, cm) = best_confusion(&recs, &s, Role::Male).unwrap();
        assert_eq!((mode, family), (FusionMode::Baseline, ModelFamily::LinearSvm));
        assert_eq!(cm.total(), 300);
    }

    #[test]
    fn renders_table_with_markers() {
        let text = Summary::from_records(&records()).render();
        assert!(text.contains("62.0 (linear_svm)"));
        assert!(text.contains("MissingRole"));
        assert!(text.contains("not stratified"));
        assert!(text.contains("[1, 2, 3]"));
    }
}
