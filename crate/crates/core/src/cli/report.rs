//! Machine-readable outputs: the JSON run report, the factor file and the
//! per-iteration trace CSV. Files are written atomically
//! (write-temp-then-rename).

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::dataset::SourceFormat;
use super::CliError;
use crate::atomset::{AtomSpec, VectorAtom};
use crate::objective::{FactorModel, RankOneTerm};
use crate::pursuit::PursuitTrace;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub mode: String,
    pub rank: usize,
    pub spec_u: AtomSpec,
    pub spec_v: AtomSpec,
    pub symmetric: bool,
    pub corrections: usize,
    pub restarts: usize,
    pub power_iters: usize,
    pub gap_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<(f64, f64, f64)>,
    pub format: SourceFormat,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub path: String,
    pub shape: (usize, usize),
    pub observed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_sizes: Option<(usize, usize, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub cost: f64,
    pub residual_norm: f64,
    pub lmo_value: f64,
    pub lmo_gap: f64,
    pub corrections: usize,
    pub refit_fallback: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metrics {
    pub cost: f64,
    /// `||Y - X||` over the evaluated entries, unscaled.
    pub reconstruction_error: f64,
    pub explained_variance_ratio: f64,
    pub model_rank: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected_rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse_train: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse_validation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse_test: Option<f64>,
}

/// Wall-clock seconds per phase. Excluded from determinism comparisons.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timings {
    pub load_secs: f64,
    pub fit_secs: f64,
    pub total_secs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub seed: u64,
    pub config: ConfigEcho,
    pub dataset: DatasetSummary,
    pub trace: Vec<TraceRow>,
    pub metrics: Metrics,
    pub stop: String,
    pub timings: Timings,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

pub fn trace_rows(trace: &PursuitTrace) -> Vec<TraceRow> {
    trace
        .records
        .iter()
        .map(|r| TraceRow {
            iteration: r.iteration,
            cost: r.cost,
            residual_norm: r.residual_norm,
            lmo_value: r.lmo_value,
            lmo_gap: r.lmo_gap,
            corrections: r.corrections_applied,
            refit_fallback: r.refit_fallback,
        })
        .collect()
}

/// CSV rendering of the trace.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("iteration,cost,residual_norm,lmo_value,lmo_gap,corrections\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.iteration, r.cost, r.residual_norm, r.lmo_value, r.lmo_gap, r.corrections
        ));
    }
    out
}

// ── factor file ─────────────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorTerm {
    pub weight: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Serialized factor model: shape, atom specs and the per-term
/// `(weight, u, v)` triples at full precision (the decimal encoding
/// round-trips every f64 exactly).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorFile {
    pub shape: (usize, usize),
    pub symmetric: bool,
    pub spec_u: AtomSpec,
    pub spec_v: AtomSpec,
    pub terms: Vec<FactorTerm>,
}

impl FactorFile {
    pub fn from_model(
        model: &FactorModel,
        spec_u: AtomSpec,
        spec_v: AtomSpec,
        symmetric: bool,
    ) -> Self {
        Self {
            shape: model.shape(),
            symmetric,
            spec_u,
            spec_v,
            terms: model
                .terms()
                .iter()
                .zip(model.weights())
                .map(|(term, &weight)| FactorTerm {
                    weight,
                    u: term.u.values().iter().copied().collect(),
                    v: term.v.values().iter().copied().collect(),
                })
                .collect(),
        }
    }

    /// Reconstructs the model, re-validating every atom against its spec.
    pub fn to_model(&self) -> Result<FactorModel, CliError> {
        let mut model = FactorModel::empty(self.shape);
        for term in &self.terms {
            let u = VectorAtom::new(DVector::from_column_slice(&term.u), self.spec_u)
                .map_err(|e| CliError::Parse(format!("bad atom in factor file: {e}")))?;
            let v = VectorAtom::new(DVector::from_column_slice(&term.v), self.spec_v)
                .map_err(|e| CliError::Parse(format!("bad atom in factor file: {e}")))?;
            model
                .push_term(RankOneTerm::new(u, v), term.weight)
                .map_err(|e| CliError::Parse(format!("bad term in factor file: {e}")))?;
        }
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Parse(format!("bad factor file {}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("factor serialization cannot fail")
    }
}

/// Atomic write: the content lands under `path` only as a whole.
pub fn write_atomic(path: &Path, content: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp-write");
    fs::write(&tmp, content)
        .map_err(|e| CliError::Parse(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(|e| CliError::Parse(format!("cannot move into place {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomset::linear_argmax;
    use crate::objective::TargetProblem;
    use nalgebra::DMatrix;

    #[test]
    fn factor_file_roundtrips_bitwise() {
        let spec_u = AtomSpec::unit_sphere(3).unwrap();
        let spec_v = AtomSpec::sparse(4, 2).unwrap();
        let u = linear_argmax(&spec_u, &DVector::from_column_slice(&[0.3, -1.7, 0.9])).unwrap();
        let v = linear_argmax(&spec_v, &DVector::from_column_slice(&[1.0, -3.0, 0.2, 2.9]))
            .unwrap();
        let mut model = FactorModel::empty((3, 4));
        model
            .push_term(RankOneTerm::new(u, v), 1.0 / 3.0)
            .unwrap();

        let file = FactorFile::from_model(&model, spec_u, spec_v, false);
        let parsed: FactorFile = serde_json::from_str(&file.to_json()).unwrap();
        let restored = parsed.to_model().unwrap();

        assert_eq!(restored.weights()[0].to_bits(), model.weights()[0].to_bits());
        for (a, b) in restored.terms()[0]
            .u
            .values()
            .iter()
            .zip(model.terms()[0].u.values().iter())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }

        // Reloaded model reproduces metrics exactly.
        let y = DMatrix::from_fn(3, 4, |i, j| (i + j) as f64);
        let problem = TargetProblem::full(y).unwrap();
        let c1 = crate::objective::cost(&problem, &model).unwrap();
        let c2 = crate::objective::cost(&problem, &restored).unwrap();
        assert_eq!(c1.to_bits(), c2.to_bits());
    }

    #[test]
    fn factor_file_rejects_invalid_atoms() {
        let spec = AtomSpec::unit_sphere(2).unwrap();
        let file = FactorFile {
            shape: (2, 2),
            symmetric: false,
            spec_u: spec,
            spec_v: spec,
            terms: vec![FactorTerm {
                weight: 1.0,
                u: vec![2.0, 0.0], // not unit norm
                v: vec![1.0, 0.0],
            }],
        };
        assert!(file.to_model().is_err());
    }

    #[test]
    fn trace_csv_has_the_documented_header() {
        let csv = trace_csv(&[]);
        assert!(csv.starts_with("iteration,cost,residual_norm,lmo_value,lmo_gap,corrections\n"));
    }
}
