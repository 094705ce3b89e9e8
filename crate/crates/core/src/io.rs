//! `.idg.json` diagram documents.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "nodes": [
//!     { "id": "C", "name": "Chance", "kind": "chance",
//!       "outcomes": ["win", "lose"], "parents": [], "table": [[0.4, 0.6]] },
//!     { "id": "D", "name": "Decision", "kind": "decision",
//!       "outcomes": ["bet", "pass"], "parents": [] },
//!     { "id": "V", "name": "Value", "kind": "value", "parents": ["D", "C"],
//!       "payoffs": [100, -50, 0, 0], "risk_aversion": 0 }
//!   ],
//!   "layout": { "C": { "x": 60, "y": 60 } }
//! }
//! ```
//!
//! Table rows and payoffs follow the mixed-radix order of `parents`, first
//! parent most significant.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    complete_no_forgetting, validate, ConditionalTable, Diagram, MixedRadix, ModelError, Node,
    NodeBody, NodeId, NodeKind, OutcomeSpace, Position, ValidationReport, ValueNode, ValueScale,
    NORMALIZATION_TOLERANCE,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Rows within this distance of 1 may be renormalized on request.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramDocument {
    pub schema_version: u32,
    pub nodes: Vec<NodeRecord>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub layout: BTreeMap<String, Position>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outcomes: Vec<String>,
    #[serde(default)]
    pub parents: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk_aversion: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<ValueScale>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoadError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported schema version {0} (expected {SCHEMA_VERSION})")]
    UnsupportedVersion(u32),
    #[error("node `{node}`{}: {message}", row.map(|r| format!(", row {r}")).unwrap_or_default())]
    Node {
        node: String,
        row: Option<usize>,
        message: String,
    },
    #[error("layout refers to unknown node `{0}`")]
    Layout(String),
    #[error("diagram is invalid:\n{0}")]
    Invalid(ValidationReport),
}

impl LoadError {
    pub fn code(&self) -> &'static str {
        match self {
            LoadError::Parse { .. } => "PARSE_ERROR",
            LoadError::UnsupportedVersion(_) => "UNSUPPORTED_VERSION",
            LoadError::Node { .. } | LoadError::Layout(_) => "INVALID_NODE",
            LoadError::Invalid(_) => "VALIDATION_FAILED",
        }
    }

    fn node(node: &str, row: Option<usize>, message: impl Into<String>) -> Self {
        LoadError::Node {
            node: node.to_owned(),
            row,
            message: message.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoadOptions {
    /// Rescale rows that are within 1e-6 of summing to one.
    pub renormalize: bool,
    /// Add no-forgetting arcs before validating.
    pub complete_no_forgetting: bool,
    /// Run full validation; when off only structural checks apply.
    pub validate: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            renormalize: false,
            complete_no_forgetting: false,
            validate: true,
        }
    }
}

/// Parse document text without interpreting it.
pub fn parse_document(bytes: &[u8]) -> Result<DiagramDocument, LoadError> {
    let doc: DiagramDocument = serde_json::from_slice(bytes).map_err(|e| LoadError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(LoadError::UnsupportedVersion(doc.schema_version));
    }
    Ok(doc)
}

/// Load a diagram with default options: exact normalization, full
/// validation.
pub fn load(bytes: &[u8]) -> Result<Diagram, LoadError> {
    load_with(bytes, LoadOptions::default())
}

pub fn load_with(bytes: &[u8], options: LoadOptions) -> Result<Diagram, LoadError> {
    parse_document(bytes)?.to_diagram(options)
}

pub fn save(d: &Diagram) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&DiagramDocument::from_diagram(d))
        .expect("documents always serialize");
    out.push(b'\n');
    out
}

fn from_model(node: &str, e: ModelError) -> LoadError {
    LoadError::node(node, None, e.to_string())
}

impl DiagramDocument {
    pub fn from_diagram(d: &Diagram) -> Self {
        let mut layout = BTreeMap::new();
        let nodes = d
            .nodes()
            .iter()
            .map(|n| {
                if let Some(p) = n.position {
                    layout.insert(n.id.to_string(), p);
                }
                let mut record = NodeRecord {
                    id: n.id.to_string(),
                    name: Some(n.name.clone()),
                    kind: n.kind(),
                    outcomes: n.space().map(|s| s.labels().to_vec()).unwrap_or_default(),
                    parents: n.parents().iter().map(ToString::to_string).collect(),
                    table: None,
                    payoffs: None,
                    risk_aversion: None,
                    scale: None,
                };
                match &n.body {
                    NodeBody::Chance(c) => {
                        record.table = Some(c.table.rows().map(<[f64]>::to_vec).collect())
                    }
                    NodeBody::Decision(_) => {}
                    NodeBody::Value(v) => {
                        record.payoffs = Some(v.payoffs.clone());
                        record.risk_aversion = Some(v.risk_aversion);
                        if v.scale == ValueScale::Utility {
                            record.scale = Some(ValueScale::Utility);
                        }
                    }
                }
                record
            })
            .collect();
        DiagramDocument {
            schema_version: SCHEMA_VERSION,
            nodes,
            layout,
        }
    }

    pub fn to_diagram(&self, options: LoadOptions) -> Result<Diagram, LoadError> {
        let mut cardinality: HashMap<&str, usize> = HashMap::new();
        for record in &self.nodes {
            let card = match record.kind {
                NodeKind::Value => 1,
                _ => record.outcomes.len(),
            };
            if cardinality.insert(record.id.as_str(), card).is_some() {
                return Err(LoadError::node(&record.id, None, "duplicate node id"));
            }
        }
        for id in self.layout.keys() {
            if !cardinality.contains_key(id.as_str()) {
                return Err(LoadError::Layout(id.clone()));
            }
        }

        let mut nodes = Vec::with_capacity(self.nodes.len());
        for record in &self.nodes {
            let id = record.id.as_str();
            if id.is_empty() {
                return Err(LoadError::node(id, None, "empty node id"));
            }
            let mut parent_cards = Vec::with_capacity(record.parents.len());
            for p in &record.parents {
                let card = cardinality
                    .get(p.as_str())
                    .ok_or_else(|| LoadError::node(id, None, format!("unknown parent `{p}`")))?;
                parent_cards.push(*card);
            }
            let radix = MixedRadix::new(parent_cards.clone()).map_err(|e| from_model(id, e))?;
            let parents: Vec<NodeId> = record
                .parents
                .iter()
                .map(|p| NodeId::from(p.as_str()))
                .collect();
            let misplaced = |field: &str| {
                LoadError::node(
                    id,
                    None,
                    format!("field `{field}` is not allowed on a {} node", record.kind),
                )
            };

            let body = match record.kind {
                NodeKind::Chance | NodeKind::Decision => {
                    let space = OutcomeSpace::new(record.outcomes.iter().cloned())
                        .map_err(|e| from_model(id, e))?;
                    if record.payoffs.is_some() {
                        return Err(misplaced("payoffs"));
                    }
                    if record.risk_aversion.is_some() {
                        return Err(misplaced("risk_aversion"));
                    }
                    if record.scale.is_some() {
                        return Err(misplaced("scale"));
                    }
                    if record.kind == NodeKind::Decision {
                        if record.table.is_some() {
                            return Err(misplaced("table"));
                        }
                        NodeBody::Decision(crate::model::DecisionNode { space, parents })
                    } else {
                        let rows = record.table.as_ref().ok_or_else(|| {
                            LoadError::node(id, None, "chance node needs a table")
                        })?;
                        let table = read_table(id, &space, radix, rows, options)?;
                        NodeBody::Chance(crate::model::ChanceNode {
                            space,
                            parents,
                            table,
                        })
                    }
                }
                NodeKind::Value => {
                    if !record.outcomes.is_empty() {
                        return Err(misplaced("outcomes"));
                    }
                    if record.table.is_some() {
                        return Err(misplaced("table"));
                    }
                    let payoffs = record
                        .payoffs
                        .clone()
                        .ok_or_else(|| LoadError::node(id, None, "value node needs payoffs"))?;
                    if payoffs.len() != radix.len() {
                        return Err(LoadError::node(
                            id,
                            None,
                            format!("has {} payoffs, expected {}", payoffs.len(), radix.len()),
                        ));
                    }
                    if let Some(i) = payoffs.iter().position(|x| !x.is_finite()) {
                        return Err(LoadError::node(id, Some(i), "payoff is not finite"));
                    }
                    let risk_aversion = record.risk_aversion.unwrap_or(0.0);
                    if options.validate && !(risk_aversion.is_finite() && risk_aversion >= 0.0) {
                        return Err(LoadError::node(
                            id,
                            None,
                            "risk_aversion must be non-negative",
                        ));
                    }
                    NodeBody::Value(ValueNode {
                        parents,
                        payoffs,
                        risk_aversion,
                        scale: record.scale.unwrap_or_default(),
                    })
                }
            };
            nodes.push(Node {
                id: NodeId::from(id),
                name: record.name.clone().unwrap_or_else(|| id.to_owned()),
                body,
                position: self.layout.get(id).copied(),
            });
        }

        let mut diagram = Diagram::new(nodes).map_err(|e| match &e {
            ModelError::EmptyName(n) | ModelError::DuplicateNode(n) => {
                from_model(n.as_str(), e.clone())
            }
            ModelError::UnknownParent { node, .. } | ModelError::DuplicateParent { node, .. } => {
                from_model(node.as_str(), e.clone())
            }
            _ => LoadError::node("", None, e.to_string()),
        })?;
        if options.complete_no_forgetting {
            if let Ok(done) = complete_no_forgetting(&diagram) {
                diagram = done;
            }
        }
        if options.validate {
            let report = validate(&diagram);
            if !report.is_valid() {
                return Err(LoadError::Invalid(report));
            }
        }
        Ok(diagram)
    }
}

fn read_table(
    id: &str,
    space: &OutcomeSpace,
    radix: MixedRadix,
    rows: &[Vec<f64>],
    options: LoadOptions,
) -> Result<ConditionalTable, LoadError> {
    if rows.len() != radix.len() {
        return Err(LoadError::node(
            id,
            None,
            format!("table has {} rows, expected {}", rows.len(), radix.len()),
        ));
    }
    let mut probabilities = Vec::with_capacity(rows.len() * space.len());
    for (r, row) in rows.iter().enumerate() {
        if row.len() != space.len() {
            return Err(LoadError::node(
                id,
                Some(r),
                format!("row has {} entries, expected {}", row.len(), space.len()),
            ));
        }
        let in_range = row.iter().all(|p| (0.0..=1.0).contains(p));
        let sum: f64 = row.iter().sum();
        let off = (sum - 1.0).abs();
        if !options.validate && !(options.renormalize && in_range && off <= RENORMALIZE_TOLERANCE) {
            // Left for `validate` to report.
            probabilities.extend_from_slice(row);
            continue;
        }
        if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(LoadError::node(
                id,
                Some(r),
                format!("probability {p} outside [0, 1]"),
            ));
        }
        if off <= NORMALIZATION_TOLERANCE {
            probabilities.extend_from_slice(row);
        } else if options.renormalize && off <= RENORMALIZE_TOLERANCE {
            probabilities.extend(row.iter().map(|p| p / sum));
        } else {
            return Err(LoadError::node(id, Some(r), format!("row sums to {sum}")));
        }
    }
    ConditionalTable::new(space.len(), radix.radices().to_vec(), probabilities)
        .map_err(|e| from_model(id, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn round_trip_fixtures() {
        for d in [
            fixtures::wildcatter(),
            fixtures::bet_pass(0.002),
            fixtures::two_stage(),
            fixtures::even_lottery(0.0),
        ] {
            assert_eq!(load(&save(&d)).unwrap(), d);
        }
    }

    #[test]
    fn layout_is_preserved() {
        let d = fixtures::bet_pass(0.0);
        let back = load(&save(&d)).unwrap();
        let c = back.node(&"C".into()).unwrap();
        assert_eq!(c.position, Some(Position { x: 60.0, y: 60.0 }));
    }

    #[test]
    fn solved_diagram_saves_loadably() {
        let s = crate::solve::solve(&fixtures::bet_pass(0.002)).unwrap();
        let last = s.final_diagram();
        assert_eq!(&load(&save(last)).unwrap(), last.as_ref());
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        assert!(matches!(load(b""), Err(LoadError::Parse { line: 1, .. })));
    }

    #[test]
    fn duplicate_id_names_the_node() {
        let doc = br#"{"schema_version":1,"nodes":[
            {"id":"v","kind":"value","payoffs":[0]},
            {"id":"v","kind":"value","payoffs":[0]}]}"#;
        let err = load(doc).unwrap_err();
        assert_eq!(err, LoadError::node("v", None, "duplicate node id"));
    }

    #[test]
    fn unknown_kind_is_located() {
        let doc = b"{\"schema_version\":1,\"nodes\":[\n{\"id\":\"v\",\"kind\":\"utility\"}]}";
        match load(doc).unwrap_err() {
            LoadError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unnormalized_rows_are_rejected_unless_renormalizing() {
        let doc = br#"{"schema_version":1,"nodes":[
            {"id":"x","kind":"chance","outcomes":["a","b"],"table":[[0.5,0.5000001]]},
            {"id":"v","kind":"value","parents":["x"],"payoffs":[0,1]}]}"#;
        let err = load(doc).unwrap_err();
        assert!(matches!(err, LoadError::Node { ref node, row: Some(0), .. } if node == "x"));
        let opts = LoadOptions {
            renormalize: true,
            ..LoadOptions::default()
        };
        let d = load_with(doc, opts).unwrap();
        let row = d
            .node(&"x".into())
            .unwrap()
            .as_chance()
            .unwrap()
            .table
            .row(0)
            .to_vec();
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let far = br#"{"schema_version":1,"nodes":[
            {"id":"x","kind":"chance","outcomes":["a","b"],"table":[[0.5,0.6]]},
            {"id":"v","kind":"value","parents":["x"],"payoffs":[0,1]}]}"#;
        assert!(load_with(far, opts).is_err());
    }

    #[test]
    fn bad_arity_is_located() {
        let doc = br#"{"schema_version":1,"nodes":[
            {"id":"x","kind":"chance","outcomes":["a","b"],"table":[[0.5,0.5],[0.5,0.5]]},
            {"id":"v","kind":"value","parents":["x"],"payoffs":[0,1]}]}"#;
        let err = load(doc).unwrap_err();
        assert!(
            err.to_string().contains("table has 2 rows, expected 1"),
            "{err}"
        );
    }

    #[test]
    fn semantic_validation_runs_on_load() {
        let doc = br#"{"schema_version":1,"nodes":[
            {"id":"x","kind":"chance","outcomes":["a","b"],"table":[[0.5,0.5]]}]}"#;
        assert!(matches!(load(doc), Err(LoadError::Invalid(_))));
        let lax = LoadOptions {
            validate: false,
            ..LoadOptions::default()
        };
        assert!(load_with(doc, lax).is_ok());
    }

    #[test]
    fn unsupported_version() {
        let doc = br#"{"schema_version":7,"nodes":[]}"#;
        assert_eq!(load(doc).unwrap_err(), LoadError::UnsupportedVersion(7));
    }
}
