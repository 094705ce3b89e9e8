//! Helpers shared by integration tests.
#![allow(dead_code)]

use idg_core::model::{MixedRadix, NodeBody, NodeKind};
use idg_core::transforms::Transform;
use idg_core::{Diagram, Node, NodeId};

/// Explicit joint over the chance nodes, ordered by id, as a flat table in
/// mixed-radix order.
pub fn joint(d: &Diagram) -> (Vec<NodeId>, Vec<f64>) {
    let mut ids: Vec<NodeId> = d.chances().map(|n| n.id.clone()).collect();
    ids.sort();
    let radix = MixedRadix::new(d.cardinalities(&ids).unwrap()).unwrap();
    let nodes: Vec<&Node> = ids.iter().map(|id| d.node(id).unwrap()).collect();
    let slots: Vec<Vec<usize>> = nodes
        .iter()
        .map(|n| {
            n.parents()
                .iter()
                .map(|p| {
                    ids.iter()
                        .position(|i| i == p)
                        .expect("chance-only diagram")
                })
                .collect()
        })
        .collect();
    let probs = radix
        .iter()
        .map(|digits| {
            nodes
                .iter()
                .zip(&slots)
                .map(|(n, slot)| {
                    let c = n.as_chance().unwrap();
                    let parent_digits: Vec<usize> = slot.iter().map(|&s| digits[s]).collect();
                    let row = d.parent_radix(&n.id).unwrap().encode(&parent_digits);
                    c.table
                        .get(row, digits[ids.iter().position(|i| *i == n.id).unwrap()])
                })
                .product()
        })
        .collect();
    (ids, probs)
}

/// Chance to chance arcs.
pub fn chance_arcs(d: &Diagram) -> Vec<(NodeId, NodeId)> {
    let is_chance = |id: &NodeId| d.node(id).is_some_and(|n| n.kind() == NodeKind::Chance);
    d.arcs()
        .into_iter()
        .filter(|(a, b)| is_chance(a) && is_chance(b))
        .collect()
}

/// Every transform that names an existing node or arc, legal or not.
pub fn candidate_transforms(d: &Diagram) -> Vec<Transform> {
    let mut out = Vec::new();
    for n in d.nodes() {
        match n.kind() {
            NodeKind::Chance => {
                out.push(Transform::RemoveBarren { node: n.id.clone() });
                out.push(Transform::RemoveChance { node: n.id.clone() });
            }
            NodeKind::Decision => {
                out.push(Transform::RemoveBarren { node: n.id.clone() });
                out.push(Transform::RemoveDecision { node: n.id.clone() });
            }
            NodeKind::Value => {}
        }
    }
    for (from, to) in chance_arcs(d) {
        out.push(Transform::ReverseArc { from, to });
    }
    for c in d.chances() {
        for k in d.decisions() {
            if !k.parents().contains(&c.id) {
                out.push(Transform::AddInformationalArc {
                    from: c.id.clone(),
                    to: k.id.clone(),
                });
            }
        }
    }
    out
}

/// `d` with the value node's payoffs mapped by `f` and risk aversion set.
pub fn map_payoffs(d: &Diagram, f: impl Fn(f64) -> f64, risk_aversion: f64) -> Diagram {
    let mut v = d.value_node().unwrap().clone();
    if let NodeBody::Value(body) = &mut v.body {
        body.payoffs = body.payoffs.iter().map(|&x| f(x)).collect();
        body.risk_aversion = risk_aversion;
    }
    d.with_node(v).unwrap()
}

pub fn risk_aversion(d: &Diagram) -> f64 {
    d.value_node().unwrap().as_value().unwrap().risk_aversion
}
