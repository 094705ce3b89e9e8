//! Value-preserving reductions: barren node removal, arc reversal between
//! chance nodes, and removal of chance and decision nodes into the value
//! node. Each maps a valid diagram to a new valid diagram.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    complete_no_forgetting, ConditionalTable, Diagram, MixedRadix, ModelError, Node, NodeBody,
    NodeId, NodeKind, ValueNode,
};
use crate::solve::Policy;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("`{0}` is not a chance node")]
    NotChance(NodeId),
    #[error("`{0}` is not a decision node")]
    NotDecision(NodeId),
    #[error("`{0}` is the value node")]
    ValueNode(NodeId),
    #[error("diagram has no value node")]
    NoValueNode,
    #[error("`{node}` still has children: {}", list(children))]
    HasChildren { node: NodeId, children: Vec<NodeId> },
    #[error("no arc `{from}` -> `{to}`")]
    ArcAbsent { from: NodeId, to: NodeId },
    #[error("arc `{from}` -> `{to}` already exists")]
    ArcPresent { from: NodeId, to: NodeId },
    #[error("alternate path {from}->{to} exists; reversing the arc would create a cycle")]
    ReversalWouldCycle { from: NodeId, to: NodeId },
    #[error("adding arc `{from}` -> `{to}` would create a cycle")]
    ArcWouldCycle { from: NodeId, to: NodeId },
    #[error("`{node}` is not a parent of the value node")]
    NotValueParent { node: NodeId },
    #[error("`{node}` has children other than the value node: {}", list(children))]
    NonValueChildren { node: NodeId, children: Vec<NodeId> },
    #[error(
        "value node has non-informational parents for `{decision}`: {}",
        list(parents)
    )]
    UnobservedValueParents {
        decision: NodeId,
        parents: Vec<NodeId>,
    },
    #[error("decisions cannot be ordered: {0}")]
    Order(#[from] crate::model::OrderError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn list(ids: &[NodeId]) -> String {
    ids.iter()
        .map(NodeId::as_str)
        .collect::<Vec<_>>()
        .join(", ")
}

impl TransformError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            TransformError::UnknownNode(_) => "UNKNOWN_NODE",
            TransformError::NotChance(_) => "NOT_CHANCE_NODE",
            TransformError::NotDecision(_) => "NOT_DECISION_NODE",
            TransformError::ValueNode(_) => "IS_VALUE_NODE",
            TransformError::NoValueNode => "NO_VALUE_NODE",
            TransformError::HasChildren { .. } => "NODE_HAS_CHILDREN",
            TransformError::ArcAbsent { .. } => "ARC_ABSENT",
            TransformError::ArcPresent { .. } => "ARC_ALREADY_PRESENT",
            TransformError::ReversalWouldCycle { .. } => "REVERSAL_WOULD_CYCLE",
            TransformError::ArcWouldCycle { .. } => "ARC_WOULD_CYCLE",
            TransformError::NotValueParent { .. } => "NOT_VALUE_PARENT",
            TransformError::NonValueChildren { .. } => "NON_VALUE_CHILDREN",
            TransformError::UnobservedValueParents { .. } => "VALUE_PARENT_NOT_OBSERVED",
            TransformError::Order(_) => "DECISIONS_NOT_ORDERED",
            TransformError::Model(_) => "MALFORMED_DIAGRAM",
        }
    }
}

type Result<T> = std::result::Result<T, TransformError>;

/// One requested transformation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Transform {
    RemoveBarren {
        node: NodeId,
    },
    #[serde(alias = "reverse")]
    ReverseArc {
        from: NodeId,
        to: NodeId,
    },
    RemoveChance {
        node: NodeId,
    },
    RemoveDecision {
        node: NodeId,
    },
    #[serde(alias = "add_info_arc")]
    AddInformationalArc {
        from: NodeId,
        to: NodeId,
    },
}

impl Transform {
    pub fn kind(&self) -> TransformKind {
        match self {
            Transform::RemoveBarren { .. } => TransformKind::BarrenRemoval,
            Transform::ReverseArc { .. } => TransformKind::ArcReversal,
            Transform::RemoveChance { .. } => TransformKind::ChanceRemoval,
            Transform::RemoveDecision { .. } => TransformKind::DecisionRemoval,
            Transform::AddInformationalArc { .. } => TransformKind::InformationalArc,
        }
    }

    pub fn subjects(&self) -> Vec<NodeId> {
        match self {
            Transform::RemoveBarren { node }
            | Transform::RemoveChance { node }
            | Transform::RemoveDecision { node } => vec![node.clone()],
            Transform::ReverseArc { from, to } | Transform::AddInformationalArc { from, to } => {
                vec![from.clone(), to.clone()]
            }
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::RemoveBarren { node } => write!(f, "remove barren node {node}"),
            Transform::ReverseArc { from, to } => write!(f, "reverse arc {from} -> {to}"),
            Transform::RemoveChance { node } => write!(f, "remove chance node {node} into value"),
            Transform::RemoveDecision { node } => {
                write!(f, "remove decision node {node} into value")
            }
            Transform::AddInformationalArc { from, to } => {
                write!(f, "add informational arc {from} -> {to}")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    BarrenRemoval,
    ChanceRemoval,
    DecisionRemoval,
    ArcReversal,
    InformationalArc,
}

/// A transformation step together with the snapshots it connects.
#[derive(Clone, Debug)]
pub struct TransformRecord {
    pub transform: Transform,
    pub before: Arc<Diagram>,
    pub after: Arc<Diagram>,
    /// Emitted by decision removal only.
    pub policy: Option<Policy>,
    /// Rows of the reversed arc's tail whose conditioning event had zero
    /// probability and were set to uniform.
    pub patched_rows: Vec<usize>,
}

impl TransformRecord {
    pub fn kind(&self) -> TransformKind {
        self.transform.kind()
    }
}

/// Apply `transform` to `before`, producing a record of the step.
pub fn apply(before: &Arc<Diagram>, transform: &Transform) -> Result<TransformRecord> {
    let mut policy = None;
    let mut patched_rows = Vec::new();
    let after = match transform {
        Transform::RemoveBarren { node } => remove_barren(before, node)?,
        Transform::ReverseArc { from, to } => {
            let r = reverse_arc_detailed(before, from, to)?;
            patched_rows = r.patched_rows;
            r.diagram
        }
        Transform::RemoveChance { node } => remove_chance_into_value(before, node)?,
        Transform::RemoveDecision { node } => {
            let (d, p) = remove_decision_into_value(before, node)?;
            policy = Some(p);
            d
        }
        Transform::AddInformationalArc { from, to } => add_informational_arc(before, from, to)?,
    };
    Ok(TransformRecord {
        transform: transform.clone(),
        before: Arc::clone(before),
        after: Arc::new(after),
        policy,
        patched_rows,
    })
}

fn node<'a>(d: &'a Diagram, id: &NodeId) -> Result<&'a Node> {
    d.node(id)
        .ok_or_else(|| TransformError::UnknownNode(id.clone()))
}

fn value_node(d: &Diagram) -> Result<(&Node, &ValueNode)> {
    let v = d.value_node().ok_or(TransformError::NoValueNode)?;
    Ok((v, v.as_value().expect("value node")))
}

/// For each position of `frame`, the stride of that variable in a table over
/// `scope` (zero when absent), so `Σ digit·stride` indexes the table.
fn strides(d: &Diagram, frame: &[NodeId], scope: &[NodeId]) -> Vec<usize> {
    let mut scope_stride = vec![0; scope.len()];
    let mut acc = 1;
    for (slot, id) in scope.iter().enumerate().rev() {
        scope_stride[slot] = acc;
        acc *= d.node(id).expect("scope node exists").cardinality();
    }
    frame
        .iter()
        .map(|id| {
            scope
                .iter()
                .position(|s| s == id)
                .map_or(0, |slot| scope_stride[slot])
        })
        .collect()
}

fn offset(digits: &[usize], strides: &[usize]) -> usize {
    digits.iter().zip(strides).map(|(d, s)| d * s).sum()
}

fn radix(d: &Diagram, ids: &[NodeId]) -> Result<MixedRadix> {
    Ok(MixedRadix::new(d.cardinalities(ids)?)?)
}

/// `first` followed by the members of `second` it lacks.
fn union(first: &[NodeId], second: &[NodeId]) -> Vec<NodeId> {
    let mut out = first.to_vec();
    for id in second {
        if !out.contains(id) {
            out.push(id.clone());
        }
    }
    out
}

/// Delete a chance or decision node that has no children.
pub fn remove_barren(d: &Diagram, n: &NodeId) -> Result<Diagram> {
    let target = node(d, n)?;
    if target.kind() == NodeKind::Value {
        return Err(TransformError::ValueNode(n.clone()));
    }
    let children: Vec<NodeId> = d.children(n).into_iter().cloned().collect();
    if !children.is_empty() {
        return Err(TransformError::HasChildren {
            node: n.clone(),
            children,
        });
    }
    Ok(d.without_node(n)?)
}

/// Outcome of an arc reversal.
#[derive(Clone, Debug)]
pub struct Reversal {
    pub diagram: Diagram,
    /// Rows of the former tail's new table that were set to uniform.
    pub patched_rows: Vec<usize>,
}

/// Reverse the arc `from -> to` between two chance nodes by Bayes' theorem.
pub fn reverse_arc(d: &Diagram, from: &NodeId, to: &NodeId) -> Result<Diagram> {
    reverse_arc_detailed(d, from, to).map(|r| r.diagram)
}

pub fn reverse_arc_detailed(d: &Diagram, from: &NodeId, to: &NodeId) -> Result<Reversal> {
    let tail = node(d, from)?;
    let head = node(d, to)?;
    let tail_c = tail
        .as_chance()
        .ok_or_else(|| TransformError::NotChance(from.clone()))?;
    let head_c = head
        .as_chance()
        .ok_or_else(|| TransformError::NotChance(to.clone()))?;
    if !head_c.parents.contains(from) {
        return Err(TransformError::ArcAbsent {
            from: from.clone(),
            to: to.clone(),
        });
    }
    let alternate = d
        .children(from)
        .into_iter()
        .filter(|c| *c != to)
        .any(|c| d.has_path(c, to));
    if alternate {
        return Err(TransformError::ReversalWouldCycle {
            from: from.clone(),
            to: to.clone(),
        });
    }

    let head_rest: Vec<NodeId> = head_c
        .parents
        .iter()
        .filter(|p| *p != from)
        .cloned()
        .collect();
    let new_head_parents = union(&head_rest, &tail_c.parents);
    let mut new_tail_parents = union(&tail_c.parents, &head_rest);
    new_tail_parents.push(to.clone());

    let tail_card = tail_c.space.len();
    let head_card = head_c.space.len();
    let shared = radix(d, &new_head_parents)?;

    // Frame: shared parents, then the tail, then the head.
    let mut frame = new_head_parents.clone();
    frame.push(from.clone());
    frame.push(to.clone());
    let tail_rows = strides(d, &frame, &tail_c.parents);
    let head_rows = strides(d, &frame, &head_c.parents);
    let new_tail_rows = strides(d, &frame, &new_tail_parents);

    let mut head_table = vec![0.0; shared.len() * head_card];
    let mut tail_table = vec![0.0; shared.len() * head_card * tail_card];
    let mut patched_rows = Vec::new();
    let mut joint = vec![0.0; tail_card * head_card];
    let mut digits = vec![0; frame.len()];
    let k = new_head_parents.len();

    for (row, config) in shared.iter().enumerate() {
        digits[..k].copy_from_slice(&config);
        for x in 0..tail_card {
            digits[k] = x;
            let p_tail = tail_c.table.get(offset(&digits, &tail_rows), x);
            for y in 0..head_card {
                digits[k + 1] = y;
                let p_head = head_c.table.get(offset(&digits, &head_rows), y);
                joint[x * head_card + y] = p_tail * p_head;
            }
        }
        for y in 0..head_card {
            let marginal: f64 = (0..tail_card).map(|x| joint[x * head_card + y]).sum();
            head_table[row * head_card + y] = marginal;
            digits[k + 1] = y;
            let tail_row = offset(&digits, &new_tail_rows);
            for x in 0..tail_card {
                tail_table[tail_row * tail_card + x] = if marginal > 0.0 {
                    joint[x * head_card + y] / marginal
                } else {
                    1.0 / tail_card as f64
                };
            }
            if marginal <= 0.0 {
                patched_rows.push(tail_row);
            }
        }
    }
    patched_rows.sort_unstable();

    let mut new_head = head.clone();
    new_head.body = NodeBody::Chance(crate::model::ChanceNode {
        space: head_c.space.clone(),
        table: ConditionalTable::new(head_card, shared.radices().to_vec(), head_table)?,
        parents: new_head_parents,
    });
    let mut new_tail = tail.clone();
    new_tail.body = NodeBody::Chance(crate::model::ChanceNode {
        space: tail_c.space.clone(),
        table: ConditionalTable::new(tail_card, d.cardinalities(&new_tail_parents)?, tail_table)?,
        parents: new_tail_parents,
    });
    let diagram = d.with_node(new_head)?.with_node(new_tail)?;
    Ok(Reversal {
        diagram,
        patched_rows,
    })
}

/// Check that `n`'s only child is the value node.
fn only_feeds_value(d: &Diagram, n: &NodeId, value: &NodeId) -> Result<()> {
    let children = d.children(n);
    if !children.contains(&value) {
        return Err(TransformError::NotValueParent { node: n.clone() });
    }
    let others: Vec<NodeId> = children
        .into_iter()
        .filter(|c| *c != value)
        .cloned()
        .collect();
    if !others.is_empty() {
        return Err(TransformError::NonValueChildren {
            node: n.clone(),
            children: others,
        });
    }
    Ok(())
}

/// Remove a chance node whose only child is the value node by taking the
/// conditional expectation of the value, in utility space when the value
/// node is risk averse.
pub fn remove_chance_into_value(d: &Diagram, n: &NodeId) -> Result<Diagram> {
    let target = node(d, n)?;
    let chance = target
        .as_chance()
        .ok_or_else(|| TransformError::NotChance(n.clone()))?;
    let (v_node, value) = value_node(d)?;
    only_feeds_value(d, n, &v_node.id)?;

    let value = value.to_utility_scale();
    let rest: Vec<NodeId> = value.parents.iter().filter(|p| *p != n).cloned().collect();
    let new_parents = union(&rest, &chance.parents);
    let configs = radix(d, &new_parents)?;

    let mut frame = new_parents.clone();
    frame.push(n.clone());
    let chance_rows = strides(d, &frame, &chance.parents);
    let value_index = strides(d, &frame, &value.parents);
    let k = new_parents.len();
    let mut digits = vec![0; frame.len()];

    let payoffs = configs
        .iter()
        .map(|config| {
            digits[..k].copy_from_slice(&config);
            (0..chance.space.len())
                .map(|x| {
                    digits[k] = x;
                    let p = chance.table.get(offset(&digits, &chance_rows), x);
                    if p == 0.0 {
                        0.0
                    } else {
                        p * value.payoffs[offset(&digits, &value_index)]
                    }
                })
                .sum()
        })
        .collect();

    let mut new_value = v_node.clone();
    new_value.body = NodeBody::Value(ValueNode {
        parents: new_parents,
        payoffs,
        ..value
    });
    Ok(d.with_node(new_value)?.without_node(n)?)
}

/// Remove a decision whose only child is the value node by maximizing over
/// its alternatives. Ties go to the lowest alternative index.
pub fn remove_decision_into_value(d: &Diagram, n: &NodeId) -> Result<(Diagram, Policy)> {
    let target = node(d, n)?;
    let decision = target
        .as_decision()
        .ok_or_else(|| TransformError::NotDecision(n.clone()))?;
    let (v_node, value) = value_node(d)?;
    only_feeds_value(d, n, &v_node.id)?;
    let unobserved: Vec<NodeId> = value
        .parents
        .iter()
        .filter(|p| *p != n && !decision.parents.contains(p))
        .cloned()
        .collect();
    if !unobserved.is_empty() {
        return Err(TransformError::UnobservedValueParents {
            decision: n.clone(),
            parents: unobserved,
        });
    }

    let new_parents: Vec<NodeId> = value.parents.iter().filter(|p| *p != n).cloned().collect();
    let configs = radix(d, &new_parents)?;
    let mut frame = new_parents.clone();
    frame.push(n.clone());
    let value_index = strides(d, &frame, &value.parents);
    let k = new_parents.len();
    let mut digits = vec![0; frame.len()];

    let mut payoffs = Vec::with_capacity(configs.len());
    let mut choices = Vec::with_capacity(configs.len());
    for config in configs.iter() {
        digits[..k].copy_from_slice(&config);
        let mut best = (0, f64::NEG_INFINITY);
        for a in 0..decision.space.len() {
            digits[k] = a;
            let u = value.payoffs[offset(&digits, &value_index)];
            if u > best.1 {
                best = (a, u);
            }
        }
        choices.push(best.0);
        payoffs.push(best.1);
    }

    let policy = Policy::new(
        n.clone(),
        new_parents.clone(),
        configs.radices().to_vec(),
        decision.space.len(),
        choices,
    )?;
    let mut new_value = v_node.clone();
    new_value.body = NodeBody::Value(ValueNode {
        parents: new_parents,
        payoffs,
        ..value.clone()
    });
    Ok((d.with_node(new_value)?.without_node(n)?, policy))
}

/// Let decision `to` observe `from`, then restore no-forgetting for later
/// decisions.
pub fn add_informational_arc(d: &Diagram, from: &NodeId, to: &NodeId) -> Result<Diagram> {
    let source = node(d, from)?;
    let target = node(d, to)?;
    if source.kind() == NodeKind::Value {
        return Err(TransformError::ValueNode(from.clone()));
    }
    if target.kind() != NodeKind::Decision {
        return Err(TransformError::NotDecision(to.clone()));
    }
    if target.parents().contains(from) {
        return Err(TransformError::ArcPresent {
            from: from.clone(),
            to: to.clone(),
        });
    }
    if from == to || d.has_path(to, from) {
        return Err(TransformError::ArcWouldCycle {
            from: from.clone(),
            to: to.clone(),
        });
    }
    let mut updated = target.clone();
    updated.parents_mut().push(from.clone());
    Ok(complete_no_forgetting(&d.with_node(updated)?)?)
}
