//! Influence diagram representation: nodes, arcs implied by parent lists,
//! conditional tables and structural validation.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the sum of every conditional distribution.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("outcome space must contain at least one outcome")]
    EmptyOutcomeSpace,
    #[error("duplicate outcome label `{0}`")]
    DuplicateOutcome(String),
    #[error("node `{0}` has an empty name")]
    EmptyName(NodeId),
    #[error("duplicate node id `{0}`")]
    DuplicateNode(NodeId),
    #[error("node `{node}` lists unknown parent `{parent}`")]
    UnknownParent { node: NodeId, parent: NodeId },
    #[error("node `{node}` lists parent `{parent}` more than once")]
    DuplicateParent { node: NodeId, parent: NodeId },
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("cardinalities must be positive")]
    ZeroCardinality,
    #[error("table has {actual} entries, expected {expected}")]
    TableSize { expected: usize, actual: usize },
    #[error("configuration count overflows")]
    Overflow,
}

/// Ordered, non-empty list of unique outcome labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeSpace {
    labels: Vec<String>,
}

impl OutcomeSpace {
    pub fn new<I, S>(labels: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(ModelError::EmptyOutcomeSpace);
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(ModelError::DuplicateOutcome(l.clone()));
            }
        }
        Ok(OutcomeSpace { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Mixed-radix indexing of configurations. The first digit is the most
/// significant, matching the declared parent order of a table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MixedRadix {
    radices: Vec<usize>,
    len: usize,
}

impl MixedRadix {
    pub fn new(radices: Vec<usize>) -> Result<Self, ModelError> {
        if radices.contains(&0) {
            return Err(ModelError::ZeroCardinality);
        }
        let len = radices
            .iter()
            .try_fold(1usize, |acc, &r| acc.checked_mul(r))
            .ok_or(ModelError::Overflow)?;
        Ok(MixedRadix { radices, len })
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    /// Number of configurations (1 for the empty product).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn encode(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.radices.len());
        digits
            .iter()
            .zip(&self.radices)
            .fold(0, |acc, (&d, &r)| acc * r + d)
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.radices.len()];
        for (slot, &r) in digits.iter_mut().zip(&self.radices).rev() {
            *slot = index % r;
            index /= r;
        }
        digits
    }

    pub fn iter(&self) -> Configurations {
        Configurations {
            radices: self.radices.clone(),
            next: Some(vec![0; self.radices.len()]),
        }
    }
}

/// Iterator over all digit tuples of a [`MixedRadix`] in index order.
#[derive(Clone, Debug)]
pub struct Configurations {
    radices: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl Iterator for Configurations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut carried = true;
        for (digit, &r) in succ.iter_mut().zip(&self.radices).rev() {
            *digit += 1;
            if *digit < r {
                carried = false;
                break;
            }
            *digit = 0;
        }
        if !carried {
            self.next = Some(succ);
        }
        Some(current)
    }
}

/// Dense conditional probability table: one row per parent configuration,
/// one column per child outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalTable {
    child_cardinality: usize,
    parent_cardinalities: Vec<usize>,
    probabilities: Vec<f64>,
}

impl ConditionalTable {
    pub fn new(
        child_cardinality: usize,
        parent_cardinalities: Vec<usize>,
        probabilities: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if child_cardinality == 0 {
            return Err(ModelError::ZeroCardinality);
        }
        let rows = MixedRadix::new(parent_cardinalities.clone())?.len();
        let expected = rows
            .checked_mul(child_cardinality)
            .ok_or(ModelError::Overflow)?;
        if probabilities.len() != expected {
            return Err(ModelError::TableSize {
                expected,
                actual: probabilities.len(),
            });
        }
        Ok(ConditionalTable {
            child_cardinality,
            parent_cardinalities,
            probabilities,
        })
    }

    /// Build from explicit rows.
    pub fn from_rows(
        parent_cardinalities: Vec<usize>,
        rows: &[Vec<f64>],
    ) -> Result<Self, ModelError> {
        let width = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(ModelError::TableSize {
                expected: width,
                actual: bad.len(),
            });
        }
        Self::new(width, parent_cardinalities, rows.concat())
    }

    /// Unconditional distribution.
    pub fn prior(probabilities: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(probabilities.len(), Vec::new(), probabilities)
    }

    pub fn child_cardinality(&self) -> usize {
        self.child_cardinality
    }

    pub fn parent_cardinalities(&self) -> &[usize] {
        &self.parent_cardinalities
    }

    pub fn row_count(&self) -> usize {
        self.probabilities.len() / self.child_cardinality
    }

    pub fn row(&self, index: usize) -> &[f64] {
        let k = self.child_cardinality;
        &self.probabilities[index * k..(index + 1) * k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probabilities.chunks(self.child_cardinality)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn get(&self, row: usize, outcome: usize) -> f64 {
        self.probabilities[row * self.child_cardinality + outcome]
    }
}

/// Scale of the numbers held by a value node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueScale {
    /// Payoffs in value units.
    #[default]
    Payoff,
    /// Exponential utilities `-exp(-gamma * x)` of payoffs.
    Utility,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChanceNode {
    pub space: OutcomeSpace,
    pub parents: Vec<NodeId>,
    pub table: ConditionalTable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionNode {
    pub space: OutcomeSpace,
    /// Nodes observed before the decision is made.
    pub parents: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueNode {
    pub parents: Vec<NodeId>,
    /// One entry per parent configuration, mixed-radix in parent order.
    pub payoffs: Vec<f64>,
    pub risk_aversion: f64,
    pub scale: ValueScale,
}

impl ValueNode {
    /// Entries mapped into utility space. Identity when risk neutral.
    pub fn utilities(&self) -> Vec<f64> {
        match self.scale {
            ValueScale::Utility => self.payoffs.clone(),
            ValueScale::Payoff => self
                .payoffs
                .iter()
                .map(|&x| crate::solve::utility(x, self.risk_aversion))
                .collect(),
        }
    }

    /// Entries mapped back into value units (certain equivalents).
    pub fn values(&self) -> Vec<f64> {
        match self.scale {
            ValueScale::Payoff => self.payoffs.clone(),
            ValueScale::Utility => self
                .payoffs
                .iter()
                .map(|&u| crate::solve::inverse_utility(u, self.risk_aversion))
                .collect(),
        }
    }

    /// The same node with entries in utility space; risk-neutral nodes stay
    /// in payoff space.
    pub fn to_utility_scale(&self) -> ValueNode {
        if self.scale == ValueScale::Utility || self.risk_aversion == 0.0 {
            return self.clone();
        }
        ValueNode {
            payoffs: self.utilities(),
            scale: ValueScale::Utility,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeBody {
    Chance(ChanceNode),
    Decision(DecisionNode),
    Value(ValueNode),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Chance,
    Decision,
    Value,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Chance => "chance",
            NodeKind::Decision => "decision",
            NodeKind::Value => "value",
        })
    }
}

/// Canvas coordinates carried for the workbench.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub name: String,
    pub body: NodeBody,
    pub position: Option<Position>,
}

impl Node {
    pub fn chance(
        id: impl Into<NodeId>,
        name: impl Into<String>,
        space: OutcomeSpace,
        parents: Vec<NodeId>,
        table: ConditionalTable,
    ) -> Self {
        Node {
            id: id.into(),
            name: name.into(),
            body: NodeBody::Chance(ChanceNode {
                space,
                parents,
                table,
            }),
            position: None,
        }
    }

    pub fn decision(
        id: impl Into<NodeId>,
        name: impl Into<String>,
        space: OutcomeSpace,
        parents: Vec<NodeId>,
    ) -> Self {
        Node {
            id: id.into(),
            name: name.into(),
            body: NodeBody::Decision(DecisionNode { space, parents }),
            position: None,
        }
    }

    pub fn value(
        id: impl Into<NodeId>,
        name: impl Into<String>,
        parents: Vec<NodeId>,
        payoffs: Vec<f64>,
        risk_aversion: f64,
    ) -> Self {
        Node {
            id: id.into(),
            name: name.into(),
            body: NodeBody::Value(ValueNode {
                parents,
                payoffs,
                risk_aversion,
                scale: ValueScale::Payoff,
            }),
            position: None,
        }
    }

    pub fn with_position(mut self, x: f64, y: f64) -> Self {
        self.position = Some(Position { x, y });
        self
    }

    pub fn kind(&self) -> NodeKind {
        match self.body {
            NodeBody::Chance(_) => NodeKind::Chance,
            NodeBody::Decision(_) => NodeKind::Decision,
            NodeBody::Value(_) => NodeKind::Value,
        }
    }

    pub fn parents(&self) -> &[NodeId] {
        match &self.body {
            NodeBody::Chance(c) => &c.parents,
            NodeBody::Decision(d) => &d.parents,
            NodeBody::Value(v) => &v.parents,
        }
    }

    pub fn space(&self) -> Option<&OutcomeSpace> {
        match &self.body {
            NodeBody::Chance(c) => Some(&c.space),
            NodeBody::Decision(d) => Some(&d.space),
            NodeBody::Value(_) => None,
        }
    }

    /// Number of outcomes; a value node counts as a single state.
    pub fn cardinality(&self) -> usize {
        self.space().map_or(1, OutcomeSpace::len)
    }

    pub fn as_chance(&self) -> Option<&ChanceNode> {
        match &self.body {
            NodeBody::Chance(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_decision(&self) -> Option<&DecisionNode> {
        match &self.body {
            NodeBody::Decision(d) => Some(d),
            _ => None,
        }
    }

    pub fn as_value(&self) -> Option<&ValueNode> {
        match &self.body {
            NodeBody::Value(v) => Some(v),
            _ => None,
        }
    }

    pub(crate) fn parents_mut(&mut self) -> &mut Vec<NodeId> {
        match &mut self.body {
            NodeBody::Chance(c) => &mut c.parents,
            NodeBody::Decision(d) => &mut d.parents,
            NodeBody::Value(v) => &mut v.parents,
        }
    }
}

/// Immutable snapshot of an influence diagram. Transformations build new
/// diagrams; a `Diagram` is never mutated after construction.
///
/// Construction only guarantees referential integrity (unique ids, known
/// parents). Everything else is checked by [`validate`].
#[derive(Clone, Debug)]
pub struct Diagram {
    nodes: Arc<[Node]>,
    index: Arc<HashMap<NodeId, usize>>,
}

impl PartialEq for Diagram {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

impl Diagram {
    pub fn new(nodes: Vec<Node>) -> Result<Self, ModelError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if node.name.trim().is_empty() {
                return Err(ModelError::EmptyName(node.id.clone()));
            }
            if index.insert(node.id.clone(), i).is_some() {
                return Err(ModelError::DuplicateNode(node.id.clone()));
            }
        }
        for node in &nodes {
            let mut seen = HashSet::new();
            for p in node.parents() {
                if !index.contains_key(p) {
                    return Err(ModelError::UnknownParent {
                        node: node.id.clone(),
                        parent: p.clone(),
                    });
                }
                if !seen.insert(p) {
                    return Err(ModelError::DuplicateParent {
                        node: node.id.clone(),
                        parent: p.clone(),
                    });
                }
            }
        }
        Ok(Diagram {
            nodes: nodes.into(),
            index: Arc::new(index),
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn position_of(&self, id: &NodeId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &NodeId) -> Result<&Node, ModelError> {
        self.node(id)
            .ok_or_else(|| ModelError::UnknownNode(id.clone()))
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.index.contains_key(id)
    }

    /// Children of `id` in node order.
    pub fn children(&self, id: &NodeId) -> Vec<&NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.parents().contains(id))
            .map(|n| &n.id)
            .collect()
    }

    pub fn arc_count(&self) -> usize {
        self.nodes.iter().map(|n| n.parents().len()).sum()
    }

    pub fn arcs(&self) -> Vec<(NodeId, NodeId)> {
        self.nodes
            .iter()
            .flat_map(|n| n.parents().iter().map(move |p| (p.clone(), n.id.clone())))
            .collect()
    }

    pub fn has_arc(&self, from: &NodeId, to: &NodeId) -> bool {
        self.node(to).is_some_and(|n| n.parents().contains(from))
    }

    pub fn value_node(&self) -> Option<&Node> {
        self.nodes.iter().find(|n| n.kind() == NodeKind::Value)
    }

    pub fn decisions(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind() == NodeKind::Decision)
    }

    pub fn chances(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind() == NodeKind::Chance)
    }

    /// Node positions in a topological order (Kahn, ties broken by node
    /// order), or `None` when the arc graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut indegree: Vec<usize> = self.nodes.iter().map(|n| n.parents().len()).collect();
        let mut children = vec![Vec::new(); n];
        for (i, node) in self.nodes.iter().enumerate() {
            for p in node.parents() {
                children[self.index[p]].push(i);
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &c in &children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Whether a directed path of length ≥ 1 leads from `from` to `to`.
    pub fn has_path(&self, from: &NodeId, to: &NodeId) -> bool {
        self.reachable_from(from).contains(to)
    }

    /// Nodes reachable from `from` by a non-empty directed path.
    pub fn reachable_from(&self, from: &NodeId) -> HashSet<NodeId> {
        let mut children: HashMap<&NodeId, Vec<&NodeId>> = HashMap::new();
        for node in self.nodes.iter() {
            for p in node.parents() {
                children.entry(p).or_default().push(&node.id);
            }
        }
        let mut seen = HashSet::new();
        let mut queue: VecDeque<&NodeId> = VecDeque::from([from]);
        while let Some(cur) = queue.pop_front() {
            for &c in children.get(cur).into_iter().flatten() {
                if seen.insert(c.clone()) {
                    queue.push_back(c);
                }
            }
        }
        seen
    }

    /// Decisions in chronological order. Fails when two decisions are not
    /// connected by a directed path, or when the graph is cyclic.
    pub fn decision_order(&self) -> Result<Vec<NodeId>, OrderError> {
        let order = self.topological_order().ok_or(OrderError::Cyclic)?;
        let decisions: Vec<NodeId> = order
            .into_iter()
            .map(|i| &self.nodes[i])
            .filter(|n| n.kind() == NodeKind::Decision)
            .map(|n| n.id.clone())
            .collect();
        for pair in decisions.windows(2) {
            if !self.has_path(&pair[0], &pair[1]) {
                return Err(OrderError::Unordered {
                    first: pair[0].clone(),
                    second: pair[1].clone(),
                });
            }
        }
        Ok(decisions)
    }

    /// All parent configurations of `node` in table row order.
    pub fn parent_configurations(&self, node: &NodeId) -> Result<Configurations, ModelError> {
        Ok(self.parent_radix(node)?.iter())
    }

    pub fn parent_radix(&self, node: &NodeId) -> Result<MixedRadix, ModelError> {
        let node = self.get(node)?;
        MixedRadix::new(self.cardinalities(node.parents())?)
    }

    pub fn cardinalities(&self, ids: &[NodeId]) -> Result<Vec<usize>, ModelError> {
        ids.iter()
            .map(|id| Ok(self.get(id)?.cardinality()))
            .collect()
    }

    /// A new diagram with `node` replacing the node of the same id.
    pub fn with_node(&self, node: Node) -> Result<Diagram, ModelError> {
        let mut nodes = self.nodes.to_vec();
        let slot = self
            .position_of(&node.id)
            .ok_or_else(|| ModelError::UnknownNode(node.id.clone()))?;
        nodes[slot] = node;
        Diagram::new(nodes)
    }

    /// A new diagram without `id`. Fails if another node still lists it as
    /// a parent.
    pub fn without_node(&self, id: &NodeId) -> Result<Diagram, ModelError> {
        if !self.contains(id) {
            return Err(ModelError::UnknownNode(id.clone()));
        }
        Diagram::new(self.nodes.iter().filter(|n| &n.id != id).cloned().collect())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrderError {
    #[error("the arc graph contains a cycle")]
    Cyclic,
    #[error("decisions `{first}` and `{second}` are not ordered by a directed path")]
    Unordered { first: NodeId, second: NodeId },
}

/// A single invariant breach found by [`validate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "code", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Violation {
    Cycle {
        nodes: Vec<NodeId>,
    },
    NoValueNode,
    MultipleValueNodes {
        nodes: Vec<NodeId>,
    },
    ValueNodeHasChildren {
        node: NodeId,
        children: Vec<NodeId>,
    },
    ArityMismatch {
        node: NodeId,
        expected: usize,
        actual: usize,
    },
    RowNotNormalized {
        node: NodeId,
        row: usize,
        sum: f64,
    },
    ProbabilityOutOfRange {
        node: NodeId,
        row: usize,
        column: usize,
        value: f64,
    },
    NonFinitePayoff {
        node: NodeId,
        index: usize,
    },
    InvalidRiskAversion {
        node: NodeId,
        value: f64,
    },
    DecisionsNotOrdered {
        first: NodeId,
        second: NodeId,
    },
    NoForgetting {
        decision: NodeId,
        missing: Vec<NodeId>,
    },
}

impl Violation {
    pub fn code(&self) -> &'static str {
        match self {
            Violation::Cycle { .. } => "CYCLE",
            Violation::NoValueNode => "NO_VALUE_NODE",
            Violation::MultipleValueNodes { .. } => "MULTIPLE_VALUE_NODES",
            Violation::ValueNodeHasChildren { .. } => "VALUE_NODE_HAS_CHILDREN",
            Violation::ArityMismatch { .. } => "ARITY_MISMATCH",
            Violation::RowNotNormalized { .. } => "ROW_NOT_NORMALIZED",
            Violation::ProbabilityOutOfRange { .. } => "PROBABILITY_OUT_OF_RANGE",
            Violation::NonFinitePayoff { .. } => "NON_FINITE_PAYOFF",
            Violation::InvalidRiskAversion { .. } => "INVALID_RISK_AVERSION",
            Violation::DecisionsNotOrdered { .. } => "DECISIONS_NOT_ORDERED",
            Violation::NoForgetting { .. } => "NO_FORGETTING",
        }
    }

    /// The node the violation is located at, if any.
    pub fn node(&self) -> Option<&NodeId> {
        match self {
            Violation::Cycle { nodes } | Violation::MultipleValueNodes { nodes } => nodes.first(),
            Violation::NoValueNode => None,
            Violation::ValueNodeHasChildren { node, .. }
            | Violation::ArityMismatch { node, .. }
            | Violation::RowNotNormalized { node, .. }
            | Violation::ProbabilityOutOfRange { node, .. }
            | Violation::NonFinitePayoff { node, .. }
            | Violation::InvalidRiskAversion { node, .. } => Some(node),
            Violation::DecisionsNotOrdered { first, .. } => Some(first),
            Violation::NoForgetting { decision, .. } => Some(decision),
        }
    }
}

fn join(ids: &[NodeId]) -> String {
    ids.iter()
        .map(NodeId::as_str)
        .collect::<Vec<_>>()
        .join(", ")
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle { nodes } => write!(f, "cycle through {}", join(nodes)),
            Violation::NoValueNode => write!(f, "diagram has no value node"),
            Violation::MultipleValueNodes { nodes } => {
                write!(
                    f,
                    "diagram has {} value nodes: {}",
                    nodes.len(),
                    join(nodes)
                )
            }
            Violation::ValueNodeHasChildren { node, children } => {
                write!(f, "value node `{node}` has children: {}", join(children))
            }
            Violation::ArityMismatch {
                node,
                expected,
                actual,
            } => write!(
                f,
                "node `{node}`: table has {actual} entries, expected {expected}"
            ),
            Violation::RowNotNormalized { node, row, sum } => {
                write!(f, "node `{node}`: row {row} sums to {sum}")
            }
            Violation::ProbabilityOutOfRange {
                node,
                row,
                column,
                value,
            } => write!(
                f,
                "node `{node}`: row {row} column {column} is {value}, outside [0, 1]"
            ),
            Violation::NonFinitePayoff { node, index } => {
                write!(f, "node `{node}`: payoff {index} is not finite")
            }
            Violation::InvalidRiskAversion { node, value } => {
                write!(
                    f,
                    "node `{node}`: risk aversion {value} must be finite and non-negative"
                )
            }
            Violation::DecisionsNotOrdered { first, second } => write!(
                f,
                "decisions `{first}` and `{second}` are not ordered by a directed path"
            ),
            Violation::NoForgetting { decision, missing } => write!(
                f,
                "decision `{decision}` does not observe earlier information: {}",
                join(missing)
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Violation> {
        self.violations.iter()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {v}", v.code())?;
        }
        Ok(())
    }
}

/// Check every diagram invariant and report all breaches found.
pub fn validate(d: &Diagram) -> ValidationReport {
    let mut violations = Vec::new();

    let values: Vec<NodeId> = d
        .nodes()
        .iter()
        .filter(|n| n.kind() == NodeKind::Value)
        .map(|n| n.id.clone())
        .collect();
    match values.len() {
        0 => violations.push(Violation::NoValueNode),
        1 => {}
        _ => violations.push(Violation::MultipleValueNodes {
            nodes: values.clone(),
        }),
    }
    for v in &values {
        let children: Vec<NodeId> = d.children(v).into_iter().cloned().collect();
        if !children.is_empty() {
            violations.push(Violation::ValueNodeHasChildren {
                node: v.clone(),
                children,
            });
        }
    }

    for node in d.nodes() {
        check_tables(d, node, &mut violations);
    }

    match d.topological_order() {
        None => violations.push(Violation::Cycle {
            nodes: cyclic_nodes(d),
        }),
        Some(_) => match d.decision_order() {
            Err(OrderError::Unordered { first, second }) => {
                violations.push(Violation::DecisionsNotOrdered { first, second })
            }
            Err(OrderError::Cyclic) => unreachable!("acyclic graph reported as cyclic"),
            Ok(order) => check_no_forgetting(d, &order, &mut violations),
        },
    }

    ValidationReport { violations }
}

fn check_tables(d: &Diagram, node: &Node, out: &mut Vec<Violation>) {
    let radix = match d.cardinalities(node.parents()).and_then(MixedRadix::new) {
        Ok(r) => r,
        Err(_) => {
            out.push(Violation::ArityMismatch {
                node: node.id.clone(),
                expected: usize::MAX,
                actual: 0,
            });
            return;
        }
    };
    match &node.body {
        NodeBody::Chance(c) => {
            let expected = radix.len() * c.space.len();
            let t = &c.table;
            if t.child_cardinality() != c.space.len() || t.parent_cardinalities() != radix.radices()
            {
                out.push(Violation::ArityMismatch {
                    node: node.id.clone(),
                    expected,
                    actual: t.probabilities().len(),
                });
                return;
            }
            for (r, row) in t.rows().enumerate() {
                let mut in_range = true;
                for (col, &p) in row.iter().enumerate() {
                    if !(0.0..=1.0).contains(&p) {
                        in_range = false;
                        out.push(Violation::ProbabilityOutOfRange {
                            node: node.id.clone(),
                            row: r,
                            column: col,
                            value: p,
                        });
                    }
                }
                let sum: f64 = row.iter().sum();
                if in_range && (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                    out.push(Violation::RowNotNormalized {
                        node: node.id.clone(),
                        row: r,
                        sum,
                    });
                }
            }
        }
        NodeBody::Decision(_) => {}
        NodeBody::Value(v) => {
            if v.payoffs.len() != radix.len() {
                out.push(Violation::ArityMismatch {
                    node: node.id.clone(),
                    expected: radix.len(),
                    actual: v.payoffs.len(),
                });
            }
            for (i, &x) in v.payoffs.iter().enumerate() {
                if !x.is_finite() {
                    out.push(Violation::NonFinitePayoff {
                        node: node.id.clone(),
                        index: i,
                    });
                }
            }
            if !(v.risk_aversion.is_finite() && v.risk_aversion >= 0.0) {
                out.push(Violation::InvalidRiskAversion {
                    node: node.id.clone(),
                    value: v.risk_aversion,
                });
            }
        }
    }
}

/// Nodes left over after peeling sources and sinks: those on, or between,
/// directed cycles.
fn cyclic_nodes(d: &Diagram) -> Vec<NodeId> {
    let mut alive: HashSet<&NodeId> = d.nodes().iter().map(|n| &n.id).collect();
    loop {
        let removable: Vec<&NodeId> = alive
            .iter()
            .copied()
            .filter(|id| {
                let node = d.node(id).expect("alive nodes exist");
                let has_parent = node.parents().iter().any(|p| alive.contains(p));
                let has_child = d.children(id).iter().any(|c| alive.contains(c));
                !has_parent || !has_child
            })
            .collect();
        if removable.is_empty() {
            break;
        }
        for id in removable {
            alive.remove(id);
        }
    }
    let mut nodes: Vec<NodeId> = alive.into_iter().cloned().collect();
    nodes.sort();
    nodes
}

/// Informational parents a decision must carry under no-forgetting: every
/// earlier decision and everything observed at it.
fn required_information(d: &Diagram, order: &[NodeId]) -> Vec<(NodeId, Vec<NodeId>)> {
    let mut known: Vec<NodeId> = Vec::new();
    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let node = d.node(id).expect("decision exists");
        out.push((id.clone(), known.clone()));
        for p in node.parents() {
            if !known.contains(p) {
                known.push(p.clone());
            }
        }
        known.push(id.clone());
    }
    out
}

fn check_no_forgetting(d: &Diagram, order: &[NodeId], out: &mut Vec<Violation>) {
    for (decision, required) in required_information(d, order) {
        let parents = d.node(&decision).expect("decision exists").parents();
        let missing: Vec<NodeId> = required
            .into_iter()
            .filter(|r| !parents.contains(r))
            .collect();
        if !missing.is_empty() {
            out.push(Violation::NoForgetting { decision, missing });
        }
    }
}

/// Add the arcs no-forgetting requires. Only ever adds informational
/// parents to decisions; applying it twice is the same as once.
pub fn complete_no_forgetting(d: &Diagram) -> Result<Diagram, OrderError> {
    let order = d.decision_order()?;
    // Each decision is completed against the completed information of its
    // predecessor, so one pass suffices.
    let mut nodes = d.nodes().to_vec();
    let mut known: Vec<NodeId> = Vec::new();
    let mut changed = false;
    for id in &order {
        let slot = d.position_of(id).expect("decision exists");
        let parents = nodes[slot].parents_mut();
        for k in &known {
            if !parents.contains(k) {
                parents.push(k.clone());
                changed = true;
            }
        }
        for p in parents.iter() {
            if !known.contains(p) {
                known.push(p.clone());
            }
        }
        known.push(id.clone());
    }
    if !changed {
        return Ok(d.clone());
    }
    Ok(Diagram::new(nodes).expect("adding known parents keeps the diagram well formed"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(labels: &[&str]) -> OutcomeSpace {
        OutcomeSpace::new(labels.iter().copied()).unwrap()
    }

    fn coin(id: &str, parents: Vec<NodeId>, probs: Vec<f64>, parent_cards: Vec<usize>) -> Node {
        Node::chance(
            id,
            id,
            space(&["h", "t"]),
            parents,
            ConditionalTable::new(2, parent_cards, probs).unwrap(),
        )
    }

    #[test]
    fn mixed_radix_enumerates_first_digit_most_significant() {
        let r = MixedRadix::new(vec![3, 2]).unwrap();
        let all: Vec<_> = r.iter().collect();
        assert_eq!(all.len(), 6);
        assert_eq!(&all[..3], &[vec![0, 0], vec![0, 1], vec![1, 0]]);
        for (i, digits) in all.iter().enumerate() {
            assert_eq!(r.encode(digits), i);
            assert_eq!(&r.decode(i), digits);
        }
    }

    #[test]
    fn empty_radix_has_single_configuration() {
        let r = MixedRadix::new(vec![]).unwrap();
        assert_eq!(r.iter().collect::<Vec<_>>(), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn outcome_space_rejects_duplicates_and_empty() {
        assert_eq!(
            OutcomeSpace::new(Vec::<String>::new()),
            Err(ModelError::EmptyOutcomeSpace)
        );
        assert!(matches!(
            OutcomeSpace::new(["a", "a"]),
            Err(ModelError::DuplicateOutcome(_))
        ));
    }

    #[test]
    fn unnormalized_row_is_reported() {
        let d = Diagram::new(vec![
            coin("x", vec![], vec![0.5, 0.6], vec![]),
            Node::value("v", "v", vec!["x".into()], vec![0.0, 1.0], 0.0),
        ])
        .unwrap();
        let report = validate(&d);
        assert_eq!(report.len(), 1);
        assert_eq!(report.violations[0].code(), "ROW_NOT_NORMALIZED");
        assert!(report.violations[0]
            .to_string()
            .contains("row 0 sums to 1.1"));
    }

    #[test]
    fn two_node_cycle_is_reported() {
        let d = Diagram::new(vec![
            coin("a", vec!["b".into()], vec![0.5; 4], vec![2]),
            coin("b", vec!["a".into()], vec![0.5; 4], vec![2]),
            Node::value("v", "v", vec![], vec![0.0], 0.0),
        ])
        .unwrap();
        let report = validate(&d);
        assert_eq!(
            report.violations,
            vec![Violation::Cycle {
                nodes: vec!["a".into(), "b".into()]
            }]
        );
    }

    #[test]
    fn value_node_count_is_checked() {
        let none = Diagram::new(vec![coin("a", vec![], vec![0.5, 0.5], vec![])]).unwrap();
        assert_eq!(validate(&none).violations, vec![Violation::NoValueNode]);
        let two = Diagram::new(vec![
            Node::value("v", "v", vec![], vec![0.0], 0.0),
            Node::value("w", "w", vec![], vec![0.0], 0.0),
        ])
        .unwrap();
        assert_eq!(validate(&two).violations[0].code(), "MULTIPLE_VALUE_NODES");
    }

    #[test]
    fn arity_mismatch_is_reported() {
        let d = Diagram::new(vec![
            coin("a", vec![], vec![0.5, 0.5], vec![]),
            coin("b", vec!["a".into()], vec![0.5, 0.5], vec![]),
            Node::value("v", "v", vec!["b".into()], vec![0.0, 1.0], 0.0),
        ])
        .unwrap();
        assert_eq!(validate(&d).violations[0].code(), "ARITY_MISMATCH");
    }

    fn sequential(d2_parents: Vec<NodeId>) -> Diagram {
        Diagram::new(vec![
            coin("c", vec![], vec![0.5, 0.5], vec![]),
            Node::decision("d1", "D1", space(&["a", "b"]), vec!["c".into()]),
            Node::decision("d2", "D2", space(&["a", "b"]), d2_parents),
            Node::value("v", "v", vec!["d2".into()], vec![0.0, 1.0], 0.0),
        ])
        .unwrap()
    }

    #[test]
    fn unordered_decisions_are_reported() {
        let d = sequential(vec![]);
        assert_eq!(validate(&d).violations[0].code(), "DECISIONS_NOT_ORDERED");
        assert!(complete_no_forgetting(&d).is_err());
    }

    #[test]
    fn no_forgetting_completion_adds_earlier_information() {
        let d = sequential(vec!["d1".into()]);
        assert_eq!(
            validate(&d).violations,
            vec![Violation::NoForgetting {
                decision: "d2".into(),
                missing: vec!["c".into()]
            }]
        );
        let done = complete_no_forgetting(&d).unwrap();
        let parents = done.node(&"d2".into()).unwrap().parents().to_vec();
        assert_eq!(parents, vec![NodeId::from("d1"), NodeId::from("c")]);
        assert!(validate(&done).is_valid());
        assert_eq!(complete_no_forgetting(&done).unwrap(), done);
    }

    #[test]
    fn parent_configurations_of_root_is_single_empty_tuple() {
        let d = sequential(vec!["d1".into(), "c".into()]);
        let configs: Vec<_> = d.parent_configurations(&"c".into()).unwrap().collect();
        assert_eq!(configs, vec![Vec::<usize>::new()]);
        assert!(d.parent_configurations(&"zz".into()).is_err());
    }

    #[test]
    fn construction_rejects_duplicates_and_dangling_parents() {
        let dup = Diagram::new(vec![
            Node::value("v", "v", vec![], vec![0.0], 0.0),
            Node::value("v", "v", vec![], vec![0.0], 0.0),
        ]);
        assert_eq!(dup.unwrap_err(), ModelError::DuplicateNode("v".into()));
        let dangling = Diagram::new(vec![Node::value(
            "v",
            "v",
            vec!["q".into()],
            vec![0.0],
            0.0,
        )]);
        assert!(matches!(dangling, Err(ModelError::UnknownParent { .. })));
    }
}
