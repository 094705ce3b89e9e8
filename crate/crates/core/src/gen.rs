//! Seeded random diagrams for property tests and the `gen` command.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    complete_no_forgetting, ConditionalTable, Diagram, Node, NodeId, NodeKind, OutcomeSpace,
};

#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub max_chance: usize,
    pub max_outcomes: usize,
    pub max_decisions: usize,
    pub max_alternatives: usize,
    /// Risk aversion is drawn from this list.
    pub risk_aversions: Vec<f64>,
    /// Resample until the number of deterministic policy profiles is at most
    /// this, so the enumeration oracle stays fast.
    pub max_profiles: usize,
    pub max_parents: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_chance: 4,
            max_outcomes: 3,
            max_decisions: 2,
            max_alternatives: 3,
            risk_aversions: vec![0.0, 0.002],
            max_profiles: 5_000,
            max_parents: 3,
        }
    }
}

impl GenConfig {
    /// Chance nodes only (at least two), for arc reversal checks.
    pub fn chance_only() -> Self {
        GenConfig {
            max_decisions: 0,
            ..GenConfig::default()
        }
    }
}

fn space(prefix: &str, n: usize) -> OutcomeSpace {
    OutcomeSpace::new((0..n).map(|k| format!("{prefix}{k}"))).expect("distinct labels")
}

/// Random strictly positive distribution.
fn distribution(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

fn profile_count(d: &Diagram) -> Option<usize> {
    d.decisions().try_fold(1usize, |acc, n| {
        let states = d.parent_radix(&n.id).ok()?.len();
        let per = n.cardinality().checked_pow(u32::try_from(states).ok()?)?;
        acc.checked_mul(per)
    })
}

/// Draw a valid diagram with full-support tables and no-forgetting arcs.
pub fn random_diagram(rng: &mut impl Rng, config: &GenConfig) -> Diagram {
    loop {
        if let Some(d) = attempt(rng, config) {
            return d;
        }
    }
}

pub fn random_diagram_seeded(seed: u64, config: &GenConfig) -> Diagram {
    random_diagram(&mut ChaCha8Rng::seed_from_u64(seed), config)
}

fn attempt(rng: &mut impl Rng, config: &GenConfig) -> Option<Diagram> {
    let min_chance = if config.max_decisions == 0 { 2 } else { 1 };
    let chances = rng.gen_range(min_chance..=config.max_chance.max(min_chance));
    let decisions = rng.gen_range(0..=config.max_decisions);
    let mut kinds: Vec<NodeKind> = std::iter::repeat_n(NodeKind::Chance, chances)
        .chain(std::iter::repeat_n(NodeKind::Decision, decisions))
        .collect();
    kinds.shuffle(rng);

    let mut nodes: Vec<Node> = Vec::new();
    let (mut c, mut k) = (0, 0);
    let mut last_decision: Option<NodeId> = None;
    for kind in kinds {
        let earlier: Vec<(NodeId, usize)> = nodes
            .iter()
            .map(|n| (n.id.clone(), n.cardinality()))
            .collect();
        match kind {
            NodeKind::Chance => {
                let card = rng.gen_range(2..=config.max_outcomes.max(2));
                let mut parents = Vec::new();
                let mut cards = Vec::new();
                for (id, pc) in &earlier {
                    if parents.len() < config.max_parents && rng.gen_bool(0.5) {
                        parents.push(id.clone());
                        cards.push(*pc);
                    }
                }
                let rows: usize = cards.iter().product();
                let probs: Vec<f64> = (0..rows).flat_map(|_| distribution(rng, card)).collect();
                let id = format!("c{c}");
                c += 1;
                nodes.push(Node::chance(
                    id.as_str(),
                    format!("Chance {id}"),
                    space("o", card),
                    parents,
                    ConditionalTable::new(card, cards, probs).expect("shape"),
                ));
            }
            NodeKind::Decision => {
                let card = rng.gen_range(2..=config.max_alternatives.max(2));
                let mut parents: Vec<NodeId> = last_decision.iter().cloned().collect();
                for (id, _) in &earlier {
                    let is_chance = nodes
                        .iter()
                        .any(|n| &n.id == id && n.kind() == NodeKind::Chance);
                    if is_chance && rng.gen_bool(0.5) {
                        parents.push(id.clone());
                    }
                }
                let id = format!("d{k}");
                k += 1;
                last_decision = Some(NodeId::from(id.as_str()));
                nodes.push(Node::decision(
                    id.as_str(),
                    format!("Decision {id}"),
                    space("a", card),
                    parents,
                ));
            }
            NodeKind::Value => unreachable!(),
        }
    }

    let mut value_parents = Vec::new();
    let mut cards = Vec::new();
    for n in &nodes {
        if rng.gen_bool(0.6) {
            value_parents.push(n.id.clone());
            cards.push(n.cardinality());
        }
    }
    if value_parents.is_empty() {
        let n = &nodes[rng.gen_range(0..nodes.len())];
        value_parents.push(n.id.clone());
        cards.push(n.cardinality());
    }
    let entries: usize = cards.iter().product();
    let payoffs = (0..entries)
        .map(|_| (rng.gen_range(-100.0..200.0f64) * 100.0).round() / 100.0)
        .collect();
    let gamma = *config.risk_aversions.choose(rng).unwrap_or(&0.0);
    nodes.push(Node::value("v", "Value", value_parents, payoffs, gamma));

    let d = complete_no_forgetting(&Diagram::new(nodes).ok()?).ok()?;
    (profile_count(&d)? <= config.max_profiles).then_some(d)
}
