//! Value lotteries: the distribution of payoff induced by a policy profile,
//! computed by exact enumeration of the joint distribution.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{complete_no_forgetting, validate, Diagram, NodeBody, NodeId, ValidationReport};
use crate::solve::{certain_equivalent, Policy, RiskProfile};

/// Refuse to enumerate joints larger than this.
pub const MAX_JOINT_CONFIGURATIONS: usize = 10_000_000;

/// Atoms closer than this are merged.
pub const MERGE_TOLERANCE: f64 = 1e-12;

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LotteryError {
    #[error("lottery probabilities sum to {0}")]
    Unnormalized(f64),
    #[error("atom {index} is invalid (payoff {payoff}, probability {probability})")]
    InvalidAtom {
        index: usize,
        payoff: f64,
        probability: f64,
    },
    #[error("no policy given for decision `{0}`")]
    MissingPolicy(NodeId),
    #[error("policy for `{decision}` does not fit the diagram: {reason}")]
    PolicyMismatch { decision: NodeId, reason: String },
    #[error("joint distribution has more than {limit} configurations")]
    TooLarge { limit: usize },
    #[error("diagram is invalid:\n{0}")]
    Invalid(ValidationReport),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Atom {
    pub payoff: f64,
    pub probability: f64,
}

/// Discrete distribution over payoffs, sorted by payoff.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lottery {
    atoms: Vec<Atom>,
}

impl Lottery {
    /// Build from `(payoff, probability)` pairs. Zero-probability atoms are
    /// dropped and nearly equal payoffs merged.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, LotteryError> {
        let mut list = Vec::new();
        let mut total = 0.0;
        for (index, (payoff, probability)) in atoms.into_iter().enumerate() {
            if !payoff.is_finite() || !(0.0..=1.0 + SUM_TOLERANCE).contains(&probability) {
                return Err(LotteryError::InvalidAtom {
                    index,
                    payoff,
                    probability,
                });
            }
            total += probability;
            if probability > 0.0 {
                list.push(Atom {
                    payoff,
                    probability,
                });
            }
        }
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(LotteryError::Unnormalized(total));
        }
        list.sort_by(|a, b| a.payoff.total_cmp(&b.payoff));
        let mut merged: Vec<Atom> = Vec::with_capacity(list.len());
        for atom in list {
            match merged.last_mut() {
                Some(last) if (atom.payoff - last.payoff).abs() <= MERGE_TOLERANCE => {
                    last.probability += atom.probability
                }
                _ => merged.push(atom),
            }
        }
        Ok(Lottery { atoms: merged })
    }

    pub fn certain(payoff: f64) -> Self {
        Lottery {
            atoms: vec![Atom {
                payoff,
                probability: 1.0,
            }],
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_probability(&self) -> f64 {
        self.atoms.iter().map(|a| a.probability).sum()
    }

    pub fn expected_value(&self) -> f64 {
        self.atoms.iter().map(|a| a.probability * a.payoff).sum()
    }

    /// The same lottery with every payoff shifted by `c`.
    pub fn shifted(&self, c: f64) -> Lottery {
        Lottery {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    payoff: a.payoff + c,
                    probability: a.probability,
                })
                .collect(),
        }
    }
}

impl fmt::Display for Lottery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .atoms
            .iter()
            .map(|a| format!("{}: {}", a.payoff, a.probability))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Statistics {
    pub certain_equivalent: f64,
    pub expected_value: f64,
    pub standard_deviation: f64,
}

/// Expected value, standard deviation and certain equivalent.
pub fn statistics(lottery: &Lottery, risk: RiskProfile) -> Statistics {
    let ev = lottery.expected_value();
    // Central second moment avoids cancellation in E[x²] − EV².
    let var: f64 = lottery
        .atoms()
        .iter()
        .map(|a| a.probability * (a.payoff - ev).powi(2))
        .sum();
    Statistics {
        certain_equivalent: certain_equivalent(lottery, risk),
        expected_value: ev,
        standard_deviation: var.max(0.0).sqrt(),
    }
}

/// Depth-first enumeration of the joint distribution in topological order.
/// Chance nodes branch on their outcomes, decisions are resolved by a rule
/// that may look at anything already assigned.
pub(crate) struct Enumerator<'a> {
    diagram: &'a Diagram,
    /// Non-value node positions in topological order.
    order: Vec<usize>,
    /// Per node position: positions of its parents.
    parents: Vec<Vec<usize>>,
    cardinality: Vec<usize>,
    value: usize,
}

impl<'a> Enumerator<'a> {
    /// Expects an acyclic diagram with exactly one value node.
    pub(crate) fn new(diagram: &'a Diagram) -> Result<Self, LotteryError> {
        let joint = diagram
            .chances()
            .try_fold(1usize, |acc, n| acc.checked_mul(n.cardinality()))
            .filter(|&n| n <= MAX_JOINT_CONFIGURATIONS);
        if joint.is_none() {
            return Err(LotteryError::TooLarge {
                limit: MAX_JOINT_CONFIGURATIONS,
            });
        }
        let topo = diagram
            .topological_order()
            .ok_or_else(|| LotteryError::Invalid(validate(diagram)))?;
        let value = diagram
            .nodes()
            .iter()
            .position(|n| n.as_value().is_some())
            .ok_or_else(|| LotteryError::Invalid(validate(diagram)))?;
        let parents = diagram
            .nodes()
            .iter()
            .map(|n| {
                n.parents()
                    .iter()
                    .map(|p| diagram.position_of(p).expect("parent exists"))
                    .collect()
            })
            .collect();
        Ok(Enumerator {
            diagram,
            order: topo.into_iter().filter(|&i| i != value).collect(),
            parents,
            cardinality: diagram.nodes().iter().map(|n| n.cardinality()).collect(),
            value,
        })
    }

    pub(crate) fn diagram(&self) -> &Diagram {
        self.diagram
    }

    fn row(&self, node: usize, assignment: &[usize]) -> usize {
        self.parents[node]
            .iter()
            .fold(0, |acc, &p| acc * self.cardinality[p] + assignment[p])
    }

    /// Visit every positive-probability scenario with its probability and
    /// the index of the value entry it reaches.
    pub(crate) fn run(
        &self,
        decide: &mut dyn FnMut(usize, &[usize]) -> usize,
        visit: &mut dyn FnMut(f64, usize),
    ) {
        let mut assignment = vec![0; self.diagram.len()];
        self.descend(0, 1.0, &mut assignment, decide, visit);
    }

    fn descend(
        &self,
        depth: usize,
        probability: f64,
        assignment: &mut [usize],
        decide: &mut dyn FnMut(usize, &[usize]) -> usize,
        visit: &mut dyn FnMut(f64, usize),
    ) {
        let Some(&node) = self.order.get(depth) else {
            visit(probability, self.row(self.value, assignment));
            return;
        };
        match &self.diagram.nodes()[node].body {
            NodeBody::Chance(c) => {
                let row = c.table.row(self.row(node, assignment));
                for (outcome, &p) in row.iter().enumerate() {
                    if p > 0.0 {
                        assignment[node] = outcome;
                        self.descend(depth + 1, probability * p, assignment, decide, visit);
                    }
                }
            }
            NodeBody::Decision(_) => {
                assignment[node] = decide(node, assignment);
                self.descend(depth + 1, probability, assignment, decide, visit);
            }
            NodeBody::Value(_) => unreachable!("value node is excluded from the order"),
        }
    }
}

/// Policies indexed by node position, with domain positions resolved.
pub(crate) struct PolicyTable<'p> {
    by_node: HashMap<usize, (&'p Policy, Vec<usize>)>,
}

impl<'p> PolicyTable<'p> {
    pub(crate) fn new(diagram: &Diagram, policies: &'p [Policy]) -> Result<Self, LotteryError> {
        let mut by_node = HashMap::new();
        for policy in policies {
            let decision = policy.decision();
            let mismatch = |reason: &str| LotteryError::PolicyMismatch {
                decision: decision.clone(),
                reason: reason.to_owned(),
            };
            let node = diagram
                .node(decision)
                .and_then(|n| n.as_decision().map(|d| (n, d)))
                .ok_or_else(|| mismatch("not a decision of the diagram"))?;
            if node.1.space.len() != policy.alternatives() {
                return Err(mismatch("alternative count differs"));
            }
            let mut domain = Vec::new();
            for (id, &card) in policy.domain().iter().zip(policy.domain_cardinalities()) {
                if !node.1.parents.contains(id) {
                    return Err(mismatch(&format!("`{id}` is not observed by the decision")));
                }
                let pos = diagram.position_of(id).expect("parent exists");
                if diagram.nodes()[pos].cardinality() != card {
                    return Err(mismatch(&format!("cardinality of `{id}` differs")));
                }
                domain.push(pos);
            }
            by_node.insert(
                diagram.position_of(decision).expect("decision exists"),
                (policy, domain),
            );
        }
        for decision in diagram.decisions() {
            let pos = diagram.position_of(&decision.id).expect("decision exists");
            if !by_node.contains_key(&pos) {
                return Err(LotteryError::MissingPolicy(decision.id.clone()));
            }
        }
        Ok(PolicyTable { by_node })
    }

    pub(crate) fn choose(&self, node: usize, assignment: &[usize]) -> usize {
        let (policy, domain) = &self.by_node[&node];
        let digits: Vec<usize> = domain.iter().map(|&p| assignment[p]).collect();
        policy.choice(&digits)
    }
}

/// Distribution of the value node's payoff when every decision follows its
/// policy. Payoffs are reported in value units.
pub fn value_lottery(d: &Diagram, policies: &[Policy]) -> Result<Lottery, LotteryError> {
    let d = match complete_no_forgetting(d) {
        Ok(d) => d,
        Err(_) => return Err(LotteryError::Invalid(validate(d))),
    };
    let report = validate(&d);
    if !report.is_valid() {
        return Err(LotteryError::Invalid(report));
    }
    let table = PolicyTable::new(&d, policies)?;
    let enumerator = Enumerator::new(&d)?;
    let values = d
        .value_node()
        .and_then(|n| n.as_value())
        .expect("valid diagram")
        .values();
    let mut mass = vec![0.0; values.len()];
    enumerator.run(&mut |node, a| table.choose(node, a), &mut |p, entry| {
        mass[entry] += p
    });
    Lottery::new(values.into_iter().zip(mass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    fn bet(choice: usize) -> Vec<Policy> {
        vec![Policy::constant("D".into(), 2, choice)]
    }

    #[test]
    fn bet_policy_lottery() {
        let l = value_lottery(&fixtures::bet_pass(0.0), &bet(0)).unwrap();
        let atoms: Vec<(f64, f64)> = l
            .atoms()
            .iter()
            .map(|a| (a.payoff, a.probability))
            .collect();
        assert_eq!(atoms, vec![(-50.0, 0.6), (100.0, 0.4)]);
    }

    #[test]
    fn pass_policy_is_certain_zero() {
        let l = value_lottery(&fixtures::bet_pass(0.0), &bet(1)).unwrap();
        assert_eq!(l, Lottery::certain(0.0));
    }

    #[test]
    fn no_decision_lottery() {
        let l = value_lottery(&fixtures::even_lottery(0.0), &[]).unwrap();
        let atoms: Vec<(f64, f64)> = l
            .atoms()
            .iter()
            .map(|a| (a.payoff, a.probability))
            .collect();
        assert_eq!(atoms, vec![(0.0, 0.5), (100.0, 0.5)]);
    }

    #[test]
    fn missing_policy_is_an_error() {
        let err = value_lottery(&fixtures::bet_pass(0.0), &[]).unwrap_err();
        assert_eq!(err, LotteryError::MissingPolicy("D".into()));
    }

    #[test]
    fn statistics_examples() {
        let s = statistics(
            &Lottery::new([(100.0, 0.4), (-50.0, 0.6)]).unwrap(),
            RiskProfile::neutral(),
        );
        close(s.expected_value, 10.0, 1e-12);
        close(s.standard_deviation, 5400f64.sqrt(), 1e-9);
        close(s.standard_deviation, 73.485, 1e-3);
        close(s.certain_equivalent, 10.0, 1e-12);

        let s = statistics(
            &Lottery::new([(0.0, 0.5), (100.0, 0.5)]).unwrap(),
            RiskProfile::new(0.002).unwrap(),
        );
        close(s.expected_value, 50.0, 1e-12);
        close(s.standard_deviation, 50.0, 1e-12);
        close(s.certain_equivalent, 47.504, 1e-3);

        let s = statistics(&Lottery::certain(7.0), RiskProfile::new(0.3).unwrap());
        assert_eq!((s.expected_value, s.standard_deviation), (7.0, 0.0));
        close(s.certain_equivalent, 7.0, 1e-12);
    }

    #[test]
    fn unnormalized_lottery_is_rejected() {
        assert!(matches!(
            Lottery::new([(1.0, 0.5), (2.0, 0.6)]),
            Err(LotteryError::Unnormalized(_))
        ));
    }

    #[test]
    fn close_payoffs_are_merged() {
        let l = Lottery::new([(1.0, 0.25), (1.0 + 1e-13, 0.25), (2.0, 0.5)]).unwrap();
        assert_eq!(l.atoms().len(), 2);
        close(l.atoms()[0].probability, 0.5, 1e-15);
    }
}
