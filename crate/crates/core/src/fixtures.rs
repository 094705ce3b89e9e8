//! Built-in example diagrams.
//!
//! The wildcatter diagram uses the seismic-structure table as entered in the
//! original workbench screenshots; the oil prior (.5/.3/.2), drilling
//! payoffs (−70/50/200, $K) and the test cost (10) are the classic textbook
//! inputs and are fixture choices rather than published results.

use crate::model::{ConditionalTable, Diagram, Node, NodeId, OutcomeSpace};

fn space(labels: &[&str]) -> OutcomeSpace {
    OutcomeSpace::new(labels.iter().copied()).expect("fixture outcome labels are valid")
}

fn ids(list: &[&str]) -> Vec<NodeId> {
    list.iter().map(|&s| NodeId::from(s)).collect()
}

fn table(child: usize, parents: Vec<usize>, probabilities: Vec<f64>) -> ConditionalTable {
    ConditionalTable::new(child, parents, probabilities).expect("fixture table shape")
}

pub const OIL_PRIOR: [f64; 3] = [0.5, 0.3, 0.2];

/// P(seismic structure | amount of oil); rows Dry, Wet, Soaking.
pub const SEISMIC_GIVEN_OIL: [[f64; 3]; 3] = [[0.6, 0.3, 0.1], [0.3, 0.4, 0.3], [0.1, 0.4, 0.5]];

fn oil() -> Node {
    Node::chance(
        "oil",
        "Amount of Oil",
        space(&["Dry", "Wet", "Soaking"]),
        vec![],
        table(3, vec![], OIL_PRIOR.to_vec()),
    )
    .with_position(80.0, 60.0)
}

fn seismic() -> Node {
    Node::chance(
        "seismic",
        "Seismic Structure",
        space(&["No Structure", "Open Structure", "Closed Structure"]),
        ids(&["oil"]),
        table(3, vec![3], SEISMIC_GIVEN_OIL.concat()),
    )
    .with_position(80.0, 200.0)
}

/// Amount of oil and seismic structure only, with a value node on the
/// structure.
pub fn oil_seismic() -> Diagram {
    Diagram::new(vec![
        oil(),
        seismic(),
        Node::value("v", "Value", ids(&["seismic"]), vec![0.0, 1.0, 2.0], 0.0),
    ])
    .expect("fixture is well formed")
}

fn wildcatter_with_drill_information(drill_parents: &[&str]) -> Diagram {
    // Test result reveals the structure when the test is run.
    let mut result = Vec::new();
    for test in 0..2 {
        for structure in 0..3 {
            let mut row = [0.0; 4];
            row[if test == 0 { structure } else { 3 }] = 1.0;
            result.extend(row);
        }
    }
    let drill = [-70.0, 50.0, 200.0];
    let mut profit = Vec::new();
    for test_cost in [10.0, 0.0] {
        profit.extend(drill.iter().map(|x| x - test_cost));
        profit.extend([-test_cost; 3]);
    }
    Diagram::new(vec![
        oil(),
        seismic(),
        Node::decision(
            "test",
            "Whether to Test",
            space(&["Test", "Do Not Test"]),
            vec![],
        )
        .with_position(320.0, 60.0),
        Node::chance(
            "result",
            "Test Result",
            space(&[
                "No Structure",
                "Open Structure",
                "Closed Structure",
                "No Result",
            ]),
            ids(&["test", "seismic"]),
            table(4, vec![2, 3], result),
        )
        .with_position(320.0, 200.0),
        Node::decision(
            "drill",
            "Drill",
            space(&["Drill", "Do Not Drill"]),
            ids(drill_parents),
        )
        .with_position(560.0, 200.0),
        Node::value(
            "profit",
            "Net Profit",
            ids(&["test", "drill", "oil"]),
            profit,
            0.0,
        )
        .with_position(560.0, 60.0),
    ])
    .expect("fixture is well formed")
}

/// The oil wildcatter: test decision, test result, drill decision.
pub fn wildcatter() -> Diagram {
    wildcatter_with_drill_information(&["test", "result"])
}

/// The wildcatter with the drill decision observing only the test result,
/// i.e. before no-forgetting arcs are added.
pub fn wildcatter_without_memory_arcs() -> Diagram {
    wildcatter_with_drill_information(&["result"])
}

/// Bet or pass on a chance event: win (.4) pays 100, lose (.6) costs 50.
pub fn bet_pass(risk_aversion: f64) -> Diagram {
    Diagram::new(vec![
        Node::chance(
            "C",
            "Chance",
            space(&["win", "lose"]),
            vec![],
            table(2, vec![], vec![0.4, 0.6]),
        )
        .with_position(60.0, 60.0),
        Node::decision("D", "Decision", space(&["bet", "pass"]), vec![]).with_position(60.0, 180.0),
        Node::value(
            "V",
            "Value",
            ids(&["D", "C"]),
            vec![100.0, -50.0, 0.0, 0.0],
            risk_aversion,
        )
        .with_position(240.0, 120.0),
    ])
    .expect("fixture is well formed")
}

/// Even chance of 0 or 100.
pub fn even_lottery(risk_aversion: f64) -> Diagram {
    Diagram::new(vec![
        Node::chance(
            "x",
            "X",
            space(&["0", "100"]),
            vec![],
            table(2, vec![], vec![0.5, 0.5]),
        ),
        Node::value("v", "Value", ids(&["x"]), vec![0.0, 100.0], risk_aversion),
    ])
    .expect("fixture is well formed")
}

/// a -> b -> c with a shortcut a -> c.
pub fn chance_chain_with_shortcut() -> Diagram {
    let coin = || space(&["0", "1"]);
    Diagram::new(vec![
        Node::chance("a", "A", coin(), vec![], table(2, vec![], vec![0.3, 0.7])),
        Node::chance(
            "b",
            "B",
            coin(),
            ids(&["a"]),
            table(2, vec![2], vec![0.9, 0.1, 0.2, 0.8]),
        ),
        Node::chance(
            "c",
            "C",
            coin(),
            ids(&["a", "b"]),
            table(
                2,
                vec![2, 2],
                vec![0.5, 0.5, 0.1, 0.9, 0.6, 0.4, 0.25, 0.75],
            ),
        ),
        Node::value("v", "Value", ids(&["c"]), vec![0.0, 10.0], 0.0),
    ])
    .expect("fixture is well formed")
}

/// Bet/pass plus a chance leaf and a decision leaf that influence nothing.
pub fn with_barren_leaves() -> Diagram {
    let base = bet_pass(0.0);
    let mut nodes = base.nodes().to_vec();
    nodes.push(Node::chance(
        "noise",
        "Noise",
        space(&["quiet", "loud"]),
        ids(&["C"]),
        table(2, vec![2], vec![0.5, 0.5, 0.1, 0.9]),
    ));
    nodes.push(Node::decision(
        "idle",
        "Idle",
        space(&["wait", "go"]),
        ids(&["D"]),
    ));
    Diagram::new(nodes).expect("fixture is well formed")
}

/// Two decisions with an intermediate observation that depends on the
/// first decision.
pub fn two_stage() -> Diagram {
    let coin = || space(&["lo", "hi"]);
    Diagram::new(vec![
        Node::chance(
            "c1",
            "State",
            coin(),
            vec![],
            table(2, vec![], vec![0.35, 0.65]),
        ),
        Node::decision("d1", "First", coin(), vec![]),
        Node::chance(
            "c2",
            "Signal",
            coin(),
            ids(&["d1", "c1"]),
            table(
                2,
                vec![2, 2],
                vec![0.5, 0.5, 0.5, 0.5, 0.85, 0.15, 0.2, 0.8],
            ),
        ),
        Node::decision("d2", "Second", space(&["a", "b", "c"]), ids(&["d1", "c2"])),
        Node::value(
            "v",
            "Value",
            ids(&["d1", "d2", "c1"]),
            vec![
                10.0, 0.0, 4.0, 12.0, 7.0, 5.0, //
                8.0, -6.0, 1.0, 14.0, 3.0, 6.0,
            ],
            0.0,
        ),
    ])
    .expect("fixture is well formed")
}
