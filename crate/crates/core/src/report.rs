//! Human-readable and structured solution reports.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::lottery::{statistics, value_lottery, Lottery, Statistics};
use crate::model::{Diagram, MixedRadix};
use crate::solve::{alternative_statistics, AlternativeStatistics, Policy, Solution, SolveError};
use crate::transforms::TransformKind;

/// Significant digits in human output unless overridden.
pub const DEFAULT_PRECISION: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown report format `{0}` (expected text or json)")]
pub struct UnknownFormat(pub String);

impl FromStr for ReportFormat {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            other => Err(UnknownFormat(other.to_owned())),
        }
    }
}

/// Format `x` with `digits` significant digits, trailing zeros removed.
pub fn format_significant(x: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_owned();
    }
    let exponent = x.abs().log10().floor() as i32;
    if !(-5..=15).contains(&exponent) {
        let s = format!("{:.*e}", digits - 1, x);
        let (mantissa, exp) = s.split_once('e').expect("exponent form");
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
    let s = trim_zeros(&format!("{x:.decimals$}")).to_owned();
    if s == "-0" {
        "0".to_owned()
    } else {
        s
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NodeLabel {
    pub id: String,
    pub name: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct PolicyRow {
    pub information: Vec<String>,
    pub choice: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct PolicyView {
    pub decision: NodeLabel,
    pub domain: Vec<NodeLabel>,
    pub rows: Vec<PolicyRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AlternativesView {
    pub decision: NodeLabel,
    pub rows: Vec<AlternativeStatistics>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StepView {
    pub kind: TransformKind,
    pub subjects: Vec<String>,
    pub description: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub patched_rows: Vec<usize>,
}

/// Everything a report shows, computed once.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub optimal_value: f64,
    pub optimal_expected_utility: f64,
    pub risk_aversion: f64,
    pub statistics: Statistics,
    pub lottery: Lottery,
    pub policies: Vec<PolicyView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alternatives: Option<AlternativesView>,
    pub transcript: Vec<StepView>,
}

fn label(d: &Diagram, id: &crate::model::NodeId) -> NodeLabel {
    NodeLabel {
        id: id.to_string(),
        name: d
            .node(id)
            .map_or_else(|| id.to_string(), |n| n.name.clone()),
    }
}

fn policy_view(d: &Diagram, policy: &Policy) -> PolicyView {
    let outcome = |id: &crate::model::NodeId, k: usize| {
        d.node(id)
            .and_then(|n| n.space())
            .and_then(|s| s.label(k))
            .map_or_else(|| k.to_string(), str::to_owned)
    };
    let radix = MixedRadix::new(policy.domain_cardinalities().to_vec()).expect("policy radix");
    let rows = radix
        .iter()
        .zip(policy.choices())
        .map(|(digits, &choice)| PolicyRow {
            information: policy
                .domain()
                .iter()
                .zip(&digits)
                .map(|(id, &k)| outcome(id, k))
                .collect(),
            choice: outcome(policy.decision(), choice),
        })
        .collect();
    PolicyView {
        decision: label(d, policy.decision()),
        domain: policy.domain().iter().map(|id| label(d, id)).collect(),
        rows,
    }
}

impl Report {
    pub fn from_solution(s: &Solution) -> Result<Self, SolveError> {
        let d = s.diagram.as_ref();
        let lottery = value_lottery(d, &s.policies)?;
        let alternatives = match s.policies.first() {
            Some(first) => Some(AlternativesView {
                decision: label(d, first.decision()),
                rows: alternative_statistics(d, first.decision())?,
            }),
            None => None,
        };
        Ok(Report {
            optimal_value: s.optimal_value,
            optimal_expected_utility: s.optimal_expected_utility,
            risk_aversion: s.risk.gamma(),
            statistics: statistics(&lottery, s.risk),
            lottery,
            policies: s.policies.iter().map(|p| policy_view(d, p)).collect(),
            alternatives,
            transcript: s
                .transcript
                .iter()
                .map(|r| StepView {
                    kind: r.kind(),
                    subjects: r
                        .transform
                        .subjects()
                        .iter()
                        .map(ToString::to_string)
                        .collect(),
                    description: r.transform.to_string(),
                    patched_rows: r.patched_rows.clone(),
                })
                .collect(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn to_text(&self, precision: usize) -> String {
        let num = |x: f64| format_significant(x, precision);
        let mut out = String::new();
        let _ = writeln!(out, "optimal value: {}", num(self.optimal_value));
        let _ = writeln!(
            out,
            "expected utility: {}",
            num(self.optimal_expected_utility)
        );
        let _ = writeln!(out, "risk aversion: {}", num(self.risk_aversion));

        out.push_str("\nvalue lottery\n");
        let header = ["certain equivalent", "expected value", "standard deviation"];
        let stats = &self.statistics;
        table(
            &mut out,
            &header,
            &[vec![
                num(stats.certain_equivalent),
                num(stats.expected_value),
                num(stats.standard_deviation),
            ]],
        );
        let atoms: Vec<Vec<String>> = self
            .lottery
            .atoms()
            .iter()
            .map(|a| vec![num(a.payoff), num(a.probability)])
            .collect();
        table(&mut out, &["payoff", "probability"], &atoms);

        for p in &self.policies {
            let _ = writeln!(out, "\npolicy for {} ({})", p.decision.name, p.decision.id);
            let mut header: Vec<&str> = p.domain.iter().map(|l| l.name.as_str()).collect();
            header.push(&p.decision.name);
            let rows: Vec<Vec<String>> = p
                .rows
                .iter()
                .map(|r| {
                    let mut cells = r.information.clone();
                    cells.push(r.choice.clone());
                    cells
                })
                .collect();
            table(&mut out, &header, &rows);
        }

        if let Some(alts) = &self.alternatives {
            let _ = writeln!(
                out,
                "\nalternatives for {} ({})",
                alts.decision.name, alts.decision.id
            );
            let rows: Vec<Vec<String>> = alts
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.label.clone(),
                        num(r.statistics.certain_equivalent),
                        num(r.statistics.expected_value),
                        num(r.statistics.standard_deviation),
                    ]
                })
                .collect();
            table(
                &mut out,
                &[
                    "alternative",
                    "certain equivalent",
                    "expected value",
                    "standard deviation",
                ],
                &rows,
            );
        }

        let _ = writeln!(out, "\nreduction ({} steps)", self.transcript.len());
        for (i, step) in self.transcript.iter().enumerate() {
            let _ = write!(out, "  {}. {}", i + 1, step.description);
            if !step.patched_rows.is_empty() {
                let _ = write!(out, " (uniform rows: {:?})", step.patched_rows);
            }
            out.push('\n');
        }
        out
    }
}

/// Left-aligned columns separated by two spaces, indented by two.
pub(crate) fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut s = String::from(" ");
        for (cell, w) in cells.zip(&widths) {
            let _ = write!(s, " {cell:<w$} ");
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(&mut header.iter().copied());
    for row in rows {
        line(&mut row.iter().map(String::as_str));
    }
}

/// Render a solution report in the requested format.
pub fn export_report(s: &Solution, format: ReportFormat) -> Result<Vec<u8>, SolveError> {
    export_report_with_precision(s, format, DEFAULT_PRECISION)
}

pub fn export_report_with_precision(
    s: &Solution,
    format: ReportFormat,
    precision: usize,
) -> Result<Vec<u8>, SolveError> {
    let report = Report::from_solution(s)?;
    Ok(match format {
        ReportFormat::Text => report.to_text(precision).into_bytes(),
        ReportFormat::Json => {
            let mut s = report.to_json();
            s.push('\n');
            s.into_bytes()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{fixtures, solve::solve};

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_significant(73.484692283495, 6), "73.4847");
        assert_eq!(format_significant(73.484692283495, 5), "73.485");
        assert_eq!(format_significant(10.0, 6), "10");
        assert_eq!(format_significant(-50.0, 6), "-50");
        assert_eq!(format_significant(0.0, 6), "0");
        assert_eq!(format_significant(-1e-30, 6), "-1e-30");
        assert_eq!(format_significant(0.208333333, 6), "0.208333");
        assert_eq!(format_significant(99.99996, 6), "100");
        assert_eq!(format_significant(-0.0000001, 3), "-1e-7");
    }

    #[test]
    fn unknown_format_is_rejected() {
        assert!("yaml".parse::<ReportFormat>().is_err());
        assert_eq!("json".parse::<ReportFormat>(), Ok(ReportFormat::Json));
    }

    #[test]
    fn bet_pass_row_in_report_column_order() {
        let s = solve(&fixtures::bet_pass(0.0)).unwrap();
        let text =
            String::from_utf8(export_report_with_precision(&s, ReportFormat::Text, 5).unwrap())
                .unwrap();
        let rows: Vec<Vec<&str>> = text
            .lines()
            .map(|l| l.split_whitespace().collect())
            .collect();
        assert!(rows.contains(&vec!["bet", "10", "10", "73.485"]), "{text}");
        assert!(text.starts_with("optimal value: 10\n"));
    }

    #[test]
    fn no_decision_report_has_statistics_only() {
        let s = solve(&fixtures::even_lottery(0.0)).unwrap();
        let r = Report::from_solution(&s).unwrap();
        assert!(r.alternatives.is_none());
        assert!(r.policies.is_empty());
        let text = r.to_text(6);
        assert!(!text.contains("alternatives for"));
        assert!(text.contains("certain equivalent"));
    }

    #[test]
    fn json_report_is_structured() {
        let s = solve(&fixtures::bet_pass(0.0)).unwrap();
        let bytes = export_report(&s, ReportFormat::Json).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(v["optimal_value"], 10.0);
        assert_eq!(v["alternatives"]["rows"][0]["label"], "bet");
        assert_eq!(v["policies"][0]["rows"][0]["choice"], "bet");
    }
}
