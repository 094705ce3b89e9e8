//! Evaluation by repeated reduction, plus an enumeration oracle and the
//! risk, information-value and per-alternative analyses built on it.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::lottery::{
    self, statistics, Enumerator, Lottery, LotteryError, PolicyTable, Statistics,
};
use crate::model::{
    complete_no_forgetting, validate, ConditionalTable, Diagram, MixedRadix, ModelError, Node,
    NodeBody, NodeId, NodeKind, OrderError, ValidationReport,
};
use crate::transforms::{self, Transform, TransformError, TransformRecord};

/// Default bound on the number of policy profiles the oracle enumerates.
pub const DEFAULT_PROFILE_BOUND: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("diagram is invalid:\n{0}")]
    Invalid(ValidationReport),
    #[error("decisions cannot be ordered: {0}")]
    Order(#[from] OrderError),
    #[error("internal error: reduction exceeded {limit} steps")]
    StepLimit { limit: usize },
    #[error("internal error: no reduction applies to the remaining diagram")]
    Stuck,
    #[error("internal error: {0}")]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Precondition(TransformError),
    #[error("{profiles} policy profiles exceed the bound of {bound}")]
    TooManyProfiles { profiles: String, bound: usize },
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("`{0}` is not a decision node")]
    NotDecision(NodeId),
    #[error("`{decision}` is not the first decision (first is `{first}`)")]
    NotFirstDecision { decision: NodeId, first: NodeId },
    #[error(transparent)]
    Lottery(#[from] LotteryError),
    #[error("invalid risk aversion {0}")]
    RiskAversion(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl SolveError {
    pub fn code(&self) -> &'static str {
        match self {
            SolveError::Invalid(_) => "VALIDATION_FAILED",
            SolveError::Order(_) => "DECISIONS_NOT_ORDERED",
            SolveError::StepLimit { .. } | SolveError::Stuck => "INTERNAL",
            SolveError::Transform(_) => "INTERNAL",
            SolveError::Precondition(e) => e.code(),
            SolveError::TooManyProfiles { .. } => "TOO_LARGE",
            SolveError::UnknownNode(_) => "UNKNOWN_NODE",
            SolveError::NotDecision(_) => "NOT_DECISION_NODE",
            SolveError::NotFirstDecision { .. } => "NOT_FIRST_DECISION",
            SolveError::Lottery(LotteryError::TooLarge { .. }) => "TOO_LARGE",
            SolveError::Lottery(LotteryError::Invalid(_)) => "VALIDATION_FAILED",
            SolveError::Lottery(_) => "POLICY_MISMATCH",
            SolveError::RiskAversion(_) => "INVALID_RISK_AVERSION",
            SolveError::Model(_) => "MALFORMED_DIAGRAM",
        }
    }

    /// Errors that indicate a bug rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            SolveError::StepLimit { .. } | SolveError::Stuck | SolveError::Transform(_)
        )
    }
}

/// Exponential utility `-exp(-γx)`; the identity when γ = 0.
pub fn utility(x: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        x
    } else {
        -(-gamma * x).exp()
    }
}

/// Inverse of [`utility`]: the sure amount with utility `u`.
pub fn inverse_utility(u: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        u
    } else {
        -(-u).ln() / gamma
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RiskProfile {
    gamma: f64,
}

impl RiskProfile {
    pub fn new(gamma: f64) -> Result<Self, SolveError> {
        if gamma.is_finite() && gamma >= 0.0 {
            Ok(RiskProfile { gamma })
        } else {
            Err(SolveError::RiskAversion(gamma))
        }
    }

    pub fn neutral() -> Self {
        RiskProfile { gamma: 0.0 }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn of(d: &Diagram) -> Result<Self, SolveError> {
        let v = d
            .value_node()
            .and_then(Node::as_value)
            .ok_or_else(|| SolveError::Invalid(validate(d)))?;
        RiskProfile::new(v.risk_aversion)
    }
}

/// Certain equivalent under exponential utility; the expected value when
/// risk neutral.
pub fn certain_equivalent(l: &Lottery, r: RiskProfile) -> f64 {
    let gamma = r.gamma();
    if gamma == 0.0 {
        return l.expected_value();
    }
    // Shift by the smallest payoff and use expm1/ln_1p so the result stays
    // accurate as γ → 0 and is exactly translation-equivariant.
    let atoms = l.atoms();
    let floor = atoms.iter().map(|a| a.payoff).fold(f64::INFINITY, f64::min);
    let excess: f64 = atoms
        .iter()
        .map(|a| a.probability * (-gamma * (a.payoff - floor)).exp_m1())
        .sum();
    floor - excess.ln_1p() / gamma
}

/// Deterministic decision rule: one alternative per configuration of the
/// information it conditions on.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Policy {
    decision: NodeId,
    domain: Vec<NodeId>,
    domain_cardinalities: Vec<usize>,
    alternatives: usize,
    choices: Vec<usize>,
}

impl Policy {
    pub fn new(
        decision: NodeId,
        domain: Vec<NodeId>,
        domain_cardinalities: Vec<usize>,
        alternatives: usize,
        choices: Vec<usize>,
    ) -> Result<Self, ModelError> {
        let rows = MixedRadix::new(domain_cardinalities.clone())?.len();
        if domain.len() != domain_cardinalities.len() || choices.len() != rows {
            return Err(ModelError::TableSize {
                expected: rows,
                actual: choices.len(),
            });
        }
        if alternatives == 0 || choices.iter().any(|&c| c >= alternatives) {
            return Err(ModelError::ZeroCardinality);
        }
        Ok(Policy {
            decision,
            domain,
            domain_cardinalities,
            alternatives,
            choices,
        })
    }

    /// Always choose `choice`.
    pub fn constant(decision: NodeId, alternatives: usize, choice: usize) -> Self {
        assert!(choice < alternatives, "choice out of range");
        Policy {
            decision,
            domain: Vec::new(),
            domain_cardinalities: Vec::new(),
            alternatives,
            choices: vec![choice],
        }
    }

    pub fn decision(&self) -> &NodeId {
        &self.decision
    }

    pub fn domain(&self) -> &[NodeId] {
        &self.domain
    }

    pub fn domain_cardinalities(&self) -> &[usize] {
        &self.domain_cardinalities
    }

    pub fn alternatives(&self) -> usize {
        self.alternatives
    }

    pub fn choices(&self) -> &[usize] {
        &self.choices
    }

    /// Alternative chosen for the domain configuration `digits`.
    pub fn choice(&self, digits: &[usize]) -> usize {
        let row = digits
            .iter()
            .zip(&self.domain_cardinalities)
            .fold(0, |acc, (&d, &r)| acc * r + d);
        self.choices[row]
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Certain equivalent of the optimal strategy, in value units.
    pub optimal_value: f64,
    /// Optimal expected utility (equals the value when risk neutral).
    pub optimal_expected_utility: f64,
    pub risk: RiskProfile,
    /// One per decision, in chronological order.
    pub policies: Vec<Policy>,
    pub transcript: Vec<TransformRecord>,
    /// The input with no-forgetting arcs completed; policies refer to it.
    pub diagram: Arc<Diagram>,
    /// Where the transcript starts: `diagram` with the value node in utility
    /// space.
    pub start: Arc<Diagram>,
}

impl Solution {
    pub fn policy(&self, decision: &NodeId) -> Option<&Policy> {
        self.policies.iter().find(|p| p.decision() == decision)
    }

    /// The single-node diagram the reduction ends with.
    pub fn final_diagram(&self) -> &Arc<Diagram> {
        self.transcript.last().map_or(&self.start, |r| &r.after)
    }
}

/// Complete no-forgetting and validate; the common entry of every solver.
pub fn prepare(d: &Diagram) -> Result<Diagram, SolveError> {
    let completed = complete_no_forgetting(d).map_err(|_| SolveError::Invalid(validate(d)))?;
    let report = validate(&completed);
    if !report.is_valid() {
        return Err(SolveError::Invalid(report));
    }
    Ok(completed)
}

fn in_utility_space(d: &Diagram) -> Diagram {
    let v = d.value_node().expect("prepared diagram has a value node");
    let mut node = v.clone();
    node.body = NodeBody::Value(v.as_value().expect("value").to_utility_scale());
    d.with_node(node).expect("same parents")
}

/// Solve by reductions until only the value node remains.
pub fn solve(d: &Diagram) -> Result<Solution, SolveError> {
    let diagram = Arc::new(prepare(d)?);
    let risk = RiskProfile::of(&diagram)?;
    let start = Arc::new(in_utility_space(&diagram));
    let order = diagram.decision_order()?;
    let limit = diagram.len() * diagram.arc_count().max(1) * 4;

    let mut current = Arc::clone(&start);
    let mut transcript: Vec<TransformRecord> = Vec::new();
    let mut policies: Vec<Policy> = Vec::new();
    let mut step = |current: &mut Arc<Diagram>, t: Transform| -> Result<(), SolveError> {
        if transcript.len() >= limit {
            return Err(SolveError::StepLimit { limit });
        }
        let record = transforms::apply(current, &t)?;
        *current = Arc::clone(&record.after);
        if let Some(p) = &record.policy {
            policies.push(p.clone());
        }
        transcript.push(record);
        Ok(())
    };

    while current.len() > 1 {
        let value_id = current
            .value_node()
            .expect("value node survives")
            .id
            .clone();

        if let Some(barren) = current
            .nodes()
            .iter()
            .find(|n| n.kind() != NodeKind::Value && current.children(&n.id).is_empty())
        {
            let id = barren.id.clone();
            step(&mut current, Transform::RemoveBarren { node: id })?;
            continue;
        }

        let leaf = current
            .chances()
            .find(|n| {
                let children = current.children(&n.id);
                children.len() == 1 && children[0] == &value_id
            })
            .map(|n| n.id.clone());
        if let Some(id) = leaf {
            step(&mut current, Transform::RemoveChance { node: id })?;
            continue;
        }

        if let Some(latest) = order.iter().rev().find(|id| current.contains(id)) {
            if decision_removable(&current, latest, &value_id) {
                step(
                    &mut current,
                    Transform::RemoveDecision {
                        node: latest.clone(),
                    },
                )?;
                continue;
            }
        }

        let target = cheapest_chance_to_absorb(&current, &value_id).ok_or(SolveError::Stuck)?;
        for child in children_in_topological_order(&current, &target, &value_id) {
            step(
                &mut current,
                Transform::ReverseArc {
                    from: target.clone(),
                    to: child,
                },
            )?;
        }
        step(&mut current, Transform::RemoveChance { node: target })?;
    }

    // Barren decisions leave no policy behind; any alternative is optimal.
    for id in &order {
        if !policies.iter().any(|p| p.decision() == id) {
            let card = diagram.node(id).expect("decision exists").cardinality();
            policies.push(Policy::constant(id.clone(), card, 0));
        }
    }
    policies.sort_by_key(|p| order.iter().position(|id| id == p.decision()));

    let value = current
        .value_node()
        .and_then(Node::as_value)
        .expect("value node remains");
    let optimal_expected_utility = value.utilities()[0];
    let optimal_value = value.values()[0];
    Ok(Solution {
        optimal_value,
        optimal_expected_utility,
        risk,
        policies,
        transcript,
        diagram,
        start,
    })
}

fn decision_removable(d: &Diagram, decision: &NodeId, value_id: &NodeId) -> bool {
    let children = d.children(decision);
    if children != [value_id] {
        return false;
    }
    let observed = d.node(decision).expect("decision exists").parents();
    let value = d.node(value_id).expect("value exists");
    value
        .parents()
        .iter()
        .all(|p| p == decision || observed.contains(p))
}

/// Chance parents of the value node that no remaining decision observes.
/// Among them pick the one whose reversals and removal create the smallest
/// largest table; ties go to the lowest id.
fn cheapest_chance_to_absorb(d: &Diagram, value_id: &NodeId) -> Option<NodeId> {
    let value = d.node(value_id)?;
    let card = |id: &NodeId| d.node(id).map_or(1, Node::cardinality);
    let size = |ids: &[NodeId]| {
        ids.iter()
            .fold(1usize, |acc, id| acc.saturating_mul(card(id)))
    };

    let mut best: Option<(usize, NodeId)> = None;
    for candidate in value.parents() {
        let node = d.node(candidate)?;
        if node.kind() != NodeKind::Chance {
            continue;
        }
        let children = d.children(candidate);
        if children
            .iter()
            .any(|c| d.node(c).is_some_and(|n| n.kind() == NodeKind::Decision))
        {
            continue;
        }
        let mut own_parents = node.parents().to_vec();
        let mut largest = 0usize;
        for child in children_in_topological_order(d, candidate, value_id) {
            let child_node = d.node(&child)?;
            let mut shared: Vec<NodeId> = child_node
                .parents()
                .iter()
                .filter(|p| *p != candidate)
                .cloned()
                .collect();
            for p in &own_parents {
                if !shared.contains(p) {
                    shared.push(p.clone());
                }
            }
            let head = size(&shared).saturating_mul(card(&child));
            largest = largest.max(head).max(head.saturating_mul(card(candidate)));
            own_parents = shared;
            own_parents.push(child);
        }
        let mut absorbed: Vec<NodeId> = value
            .parents()
            .iter()
            .filter(|p| *p != candidate)
            .cloned()
            .collect();
        for p in &own_parents {
            if !absorbed.contains(p) {
                absorbed.push(p.clone());
            }
        }
        largest = largest.max(size(&absorbed));
        let better = match &best {
            None => true,
            Some((cost, id)) => largest < *cost || (largest == *cost && candidate < id),
        };
        if better {
            best = Some((largest, candidate.clone()));
        }
    }
    best.map(|(_, id)| id)
}

fn children_in_topological_order(d: &Diagram, node: &NodeId, value_id: &NodeId) -> Vec<NodeId> {
    let order = d.topological_order().expect("valid diagram is acyclic");
    let children = d.children(node);
    order
        .into_iter()
        .map(|i| &d.nodes()[i].id)
        .filter(|id| *id != value_id && children.contains(id))
        .cloned()
        .collect()
}

/// Oracle: enumerate every deterministic policy profile and evaluate each
/// by full joint enumeration. Ties go to the lexicographically smallest
/// profile.
pub fn brute_force_solve(d: &Diagram) -> Result<Solution, SolveError> {
    brute_force_solve_with_bound(d, DEFAULT_PROFILE_BOUND)
}

pub fn brute_force_solve_with_bound(d: &Diagram, bound: usize) -> Result<Solution, SolveError> {
    let diagram = Arc::new(prepare(d)?);
    let risk = RiskProfile::of(&diagram)?;
    let order = diagram.decision_order()?;

    struct Slot {
        decision: NodeId,
        domain: Vec<NodeId>,
        radices: Vec<usize>,
        alternatives: usize,
        offset: usize,
        states: usize,
    }
    let mut slots = Vec::new();
    let mut width = 0usize;
    let mut profiles: Option<usize> = Some(1);
    for id in &order {
        let node = diagram.node(id).expect("decision exists");
        let radix = diagram.parent_radix(id)?;
        let alternatives = node.cardinality();
        profiles = profiles.and_then(|p| {
            u32::try_from(radix.len())
                .ok()
                .and_then(|s| alternatives.checked_pow(s))
                .and_then(|n| p.checked_mul(n))
        });
        slots.push(Slot {
            decision: id.clone(),
            domain: node.parents().to_vec(),
            radices: radix.radices().to_vec(),
            alternatives,
            offset: width,
            states: radix.len(),
        });
        width += radix.len();
    }
    match profiles {
        Some(p) if p <= bound => {}
        other => {
            return Err(SolveError::TooManyProfiles {
                profiles: other.map_or_else(|| "too many".to_owned(), |p| p.to_string()),
                bound,
            })
        }
    }

    let enumerator = Enumerator::new(&diagram)?;
    let utilities = diagram
        .value_node()
        .and_then(Node::as_value)
        .expect("valid diagram")
        .utilities();
    let slot_of: Vec<Option<usize>> = (0..diagram.len())
        .map(|pos| {
            slots
                .iter()
                .position(|s| diagram.position_of(&s.decision) == Some(pos))
        })
        .collect();
    let domain_positions: Vec<Vec<usize>> = slots
        .iter()
        .map(|s| {
            s.domain
                .iter()
                .map(|id| diagram.position_of(id).expect("exists"))
                .collect()
        })
        .collect();

    let mut profile = vec![0usize; width];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let mut eu = 0.0;
        enumerator.run(
            &mut |node, assignment| {
                let k = slot_of[node].expect("decision has a slot");
                let slot = &slots[k];
                let row = domain_positions[k]
                    .iter()
                    .zip(&slot.radices)
                    .fold(0, |acc, (&p, &r)| acc * r + assignment[p]);
                profile[slot.offset + row]
            },
            &mut |p, entry| eu += p * utilities[entry],
        );
        if best.as_ref().is_none_or(|(b, _)| eu > *b) {
            best = Some((eu, profile.clone()));
        }
        // Odometer: the last position varies fastest.
        let mut advanced = false;
        for pos in (0..width).rev() {
            let alternatives = slots
                .iter()
                .find(|s| pos >= s.offset && pos < s.offset + s.states)
                .expect("position belongs to a slot")
                .alternatives;
            profile[pos] += 1;
            if profile[pos] < alternatives {
                advanced = true;
                break;
            }
            profile[pos] = 0;
        }
        if !advanced {
            break;
        }
    }

    let (eu, choices) = best.expect("at least one profile");
    let policies = slots
        .iter()
        .map(|s| {
            Policy::new(
                s.decision.clone(),
                s.domain.clone(),
                s.radices.clone(),
                s.alternatives,
                choices[s.offset..s.offset + s.states].to_vec(),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Solution {
        optimal_value: inverse_utility(eu, risk.gamma()),
        optimal_expected_utility: eu,
        risk,
        policies,
        transcript: Vec::new(),
        start: Arc::clone(&diagram),
        diagram,
    })
}

/// Expected utility of following `policies`, by enumeration.
pub fn expected_utility(d: &Diagram, policies: &[Policy]) -> Result<f64, SolveError> {
    let d = prepare(d)?;
    let table = PolicyTable::new(&d, policies)?;
    let enumerator = Enumerator::new(&d)?;
    let utilities = enumerator
        .diagram()
        .value_node()
        .and_then(Node::as_value)
        .expect("valid diagram")
        .utilities();
    let mut eu = 0.0;
    enumerator.run(&mut |node, a| table.choose(node, a), &mut |p, entry| {
        eu += p * utilities[entry]
    });
    Ok(eu)
}

/// Increase in certain equivalent from letting `to` observe `from`. Zero
/// when `to` already observes it.
pub fn value_of_information(d: &Diagram, from: &NodeId, to: &NodeId) -> Result<f64, SolveError> {
    let base = prepare(d)?;
    let target = base
        .node(to)
        .ok_or_else(|| SolveError::UnknownNode(to.clone()))?;
    if target.kind() != NodeKind::Decision {
        return Err(SolveError::NotDecision(to.clone()));
    }
    if !base.contains(from) {
        return Err(SolveError::UnknownNode(from.clone()));
    }
    if target.parents().contains(from) {
        return Ok(0.0);
    }
    let informed =
        transforms::add_informational_arc(&base, from, to).map_err(SolveError::Precondition)?;
    Ok(solve(&informed)?.optimal_value - solve(&base)?.optimal_value)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlternativeStatistics {
    pub alternative: usize,
    pub label: String,
    #[serde(flatten)]
    pub statistics: Statistics,
}

/// For each alternative of the first decision: commit to it, act optimally
/// afterwards, and summarize the resulting value lottery.
pub fn alternative_statistics(
    d: &Diagram,
    decision: &NodeId,
) -> Result<Vec<AlternativeStatistics>, SolveError> {
    let base = prepare(d)?;
    let node = base
        .node(decision)
        .ok_or_else(|| SolveError::UnknownNode(decision.clone()))?;
    let space = node
        .as_decision()
        .map(|n| n.space.clone())
        .ok_or_else(|| SolveError::NotDecision(decision.clone()))?;
    let order = base.decision_order()?;
    if order.first() != Some(decision) {
        return Err(SolveError::NotFirstDecision {
            decision: decision.clone(),
            first: order[0].clone(),
        });
    }
    let risk = RiskProfile::of(&base)?;

    let mut rows = Vec::with_capacity(space.len());
    for (alternative, label) in space.labels().iter().enumerate() {
        let mut probabilities = vec![0.0; space.len()];
        probabilities[alternative] = 1.0;
        let committed = Node {
            body: NodeBody::Chance(crate::model::ChanceNode {
                space: space.clone(),
                parents: Vec::new(),
                table: ConditionalTable::prior(probabilities)?,
            }),
            ..node.clone()
        };
        let rest = solve(&base.with_node(committed)?)?;
        let mut policies = rest.policies;
        policies.push(Policy::constant(decision.clone(), space.len(), alternative));
        let lottery = lottery::value_lottery(&base, &policies)?;
        rows.push(AlternativeStatistics {
            alternative,
            label: label.clone(),
            statistics: statistics(&lottery, risk),
        });
    }
    Ok(rows)
}
