//! Analysis documents and their CSV renderings, shared by the API and CLI.

use std::str::FromStr;

use psm_core::applicability::{
    build_dependency_network, complexity_gate, congruence_report, CongruenceRecord, Measure, ParasiticEdge,
    Residual, DEFAULT_EPSILON, DEFAULT_H_CRIT,
};
use psm_core::impact::{progress_rollup, sroi, Ratio, SroiEntry};
use psm_core::model::ProblemModel;
use psm_core::session::Session;
use serde_json::{json, Value};

use crate::error::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Analysis {
    Impact,
    Sroi,
    Complexity,
    Congruence,
}

impl FromStr for Analysis {
    type Err = ApiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "impact" => Ok(Analysis::Impact),
            "sroi" => Ok(Analysis::Sroi),
            "complexity" => Ok(Analysis::Complexity),
            "congruence" => Ok(Analysis::Congruence),
            other => Err(ApiError::new(404, "UNKNOWN_ANALYSIS", format!("no analysis named `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub epsilon: f64,
    pub measure: Measure,
    pub h_crit: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params { epsilon: DEFAULT_EPSILON, measure: Measure::default(), h_crit: DEFAULT_H_CRIT }
    }
}

/// What an analysis reads: a model plus whatever the session recorded.
#[derive(Debug, Clone, Copy)]
pub struct Inputs<'a> {
    pub model: &'a ProblemModel,
    pub congruence: &'a [CongruenceRecord],
    pub dependencies: &'a [ParasiticEdge],
}

impl<'a> Inputs<'a> {
    pub fn of_model(model: &'a ProblemModel) -> Self {
        Inputs { model, congruence: &[], dependencies: &[] }
    }

    pub fn of_session(session: &'a Session) -> Self {
        Inputs { model: session.model(), congruence: session.congruence(), dependencies: session.dependencies() }
    }
}

fn congruence(inputs: Inputs<'_>, params: &Params) -> Result<Vec<psm_core::applicability::CongruenceReport>, ApiError> {
    if !(params.epsilon > 0.0 && params.epsilon < 1.0) {
        let err = psm_core::applicability::CongruenceError::InvalidEpsilon(params.epsilon);
        return Err(invalid(err.code(), err));
    }
    congruence_report(inputs.congruence, params.epsilon).map_err(|e| invalid(e.code(), e))
}

fn invalid(code: &str, err: impl std::fmt::Display) -> ApiError {
    ApiError::new(400, code, err.to_string())
}

pub fn document(kind: Analysis, inputs: Inputs<'_>, params: &Params) -> Result<Value, ApiError> {
    let value = match kind {
        Analysis::Impact => serde_json::to_value(progress_rollup(inputs.model)),
        Analysis::Sroi => serde_json::to_value(sroi(inputs.model)),
        Analysis::Complexity => {
            let network = build_dependency_network(inputs.model, inputs.dependencies)
                .map_err(|e| ApiError::new(422, e.code(), e.to_string()))?;
            let report = complexity_gate(&network, params.measure, params.h_crit)
                .map_err(|e| invalid("INVALID_THRESHOLD", e))?;
            Ok(json!({ "network": network, "report": report }))
        }
        Analysis::Congruence => {
            let records = congruence(inputs, params)?;
            Ok(json!({ "epsilon": params.epsilon, "records": records }))
        }
    };
    value.map_err(|e| ApiError::internal("SERIALIZATION", e.to_string()))
}

fn number(x: f64) -> String {
    format!("{x}")
}

fn ratio(r: Ratio) -> String {
    match r {
        Ratio::Defined(v) => number(v),
        Ratio::Undefined => "UNDEFINED".into(),
    }
}

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<String, ApiError> {
    let bytes = writer.into_inner().map_err(|e| ApiError::internal("CSV", e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| ApiError::internal("CSV", e.to_string()))
}

fn row(w: &mut csv::Writer<Vec<u8>>, fields: &[String]) -> Result<(), ApiError> {
    w.write_record(fields).map_err(|e| ApiError::internal("CSV", e.to_string()))
}

/// CSV form. Impact has one row per leaf obstacle, so its impact column
/// sums to one for a complete model.
pub fn csv(kind: Analysis, inputs: Inputs<'_>, params: &Params) -> Result<String, ApiError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match kind {
        Analysis::Impact => {
            let report = progress_rollup(inputs.model);
            row(&mut w, &["id".into(), "label".into(), "impact".into(), "progress".into()])?;
            for leaf in inputs.model.terminal_obstacles() {
                row(
                    &mut w,
                    &[
                        leaf.id.to_string(),
                        leaf.label.clone(),
                        number(report.per_node[&leaf.id]),
                        number(report.node_progress[&leaf.id]),
                    ],
                )?;
            }
        }
        Analysis::Sroi => {
            let report = sroi(inputs.model);
            row(&mut w, &["entity".into(), "id".into(), "needleMovement".into(), "spend".into(), "sroi".into()])?;
            let entries = |entity: &'static str, map: &std::collections::BTreeMap<_, SroiEntry>| {
                map.iter()
                    .map(|(id, e): (&psm_core::model::Id, &SroiEntry)| {
                        vec![entity.to_string(), id.to_string(), number(e.needle_movement), number(e.spend), ratio(e.sroi)]
                    })
                    .collect::<Vec<_>>()
            };
            for fields in entries("solution", &report.per_solution).into_iter().chain(entries("resource", &report.per_resource)) {
                row(&mut w, &fields)?;
            }
        }
        Analysis::Complexity => {
            let doc = document(kind, inputs, params)?;
            let r = &doc["report"];
            let header = ["measure", "h", "hCrit", "applicable", "cyclomatic", "parasiticRatio", "density", "degreeEntropy"];
            row(&mut w, &header.map(String::from))?;
            let cell = |v: &Value| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            row(&mut w, &header.map(|k| cell(&r[k])))?;
        }
        Analysis::Congruence => {
            let records = congruence(inputs, params)?;
            let header = ["stakeholderId", "epsilon", "congruent", "ratioC", "ratioCbar", "residual"];
            row(&mut w, &header.map(String::from))?;
            for r in records {
                let residual = match r.residual {
                    Residual::Value(v) => number(v),
                    Residual::NotSupplied => "NOT_SUPPLIED".into(),
                };
                row(
                    &mut w,
                    &[
                        r.stakeholder_id.to_string(),
                        number(r.epsilon),
                        r.congruent.to_string(),
                        number(r.ratio_c),
                        number(r.ratio_cbar),
                        residual,
                    ],
                )?;
            }
        }
    }
    finish(w)
}
