//! Golden reproductions on the built-in datasets.

use bbl_core::oracle::{integrate_posterior, Decision, OracleConfig};
use bbl_core::{decide, BetaPrior, HyperPriorSpec, RPrior, Status, ThresholdMode};
use serde::{Deserialize, Serialize};

use crate::datasets;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoinPanel {
    pub label: String,
    pub hyper_prior: HyperPriorSpec,
    pub mode: ThresholdMode,
    /// Row `y1`, column `y2`; `O` proper, `X` improper, `?` unknown.
    pub cells: Vec<String>,
    /// Oracle decisions on the same grid: `O` finite, `X` divergent, `?` inconclusive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_cells: Option<Vec<String>>,
}

impl CoinPanel {
    pub fn oracle_agrees(&self) -> Option<bool> {
        self.oracle_cells.as_ref().map(|o| *o == self.cells)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HospitalRow {
    pub dataset: String,
    pub prior: String,
    pub hyper_prior: HyperPriorSpec,
    pub mode: ThresholdMode,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_condition: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetVerdict {
    pub dataset: String,
    pub mode: ThresholdMode,
    /// Common status under every prior; absent when the priors disagree.
    pub status: Option<Status>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "kebab-case")]
pub enum Reproduction {
    Coins { panels: Vec<CoinPanel> },
    Hospitals { rows: Vec<HospitalRow>, verdicts: Vec<DatasetVerdict> },
}

fn spec(f: RPrior, g: BetaPrior) -> HyperPriorSpec {
    HyperPriorSpec::new(f, g).expect("valid built-in prior")
}

/// The four coin panels: proper or `1/r²` prior on `r`, logistic or flat prior on `β₁`.
pub fn coin_panel_priors() -> Vec<(&'static str, HyperPriorSpec)> {
    let proper = RPrior::PowerLaw { t: 1.0, u: 1.0 };
    let power = RPrior::PowerLaw { t: 0.0, u: 1.0 };
    vec![
        ("a", spec(proper, BetaPrior::StandardLogisticIntercept)),
        ("b", spec(proper, BetaPrior::Flat)),
        ("c", spec(power, BetaPrior::StandardLogisticIntercept)),
        ("d", spec(power, BetaPrior::Flat)),
    ]
}

/// `dβ dr / r²`, `dβ dr / (1+r)²`, `dβ dr / r^1.5`, `dβ dr / (1+r)^1.5`.
pub fn hospital_priors() -> Vec<HyperPriorSpec> {
    [(0.0, 1.0), (1.0, 1.0), (0.0, 0.5), (1.0, 0.5)]
        .into_iter()
        .map(|(t, u)| spec(RPrior::PowerLaw { t, u }, BetaPrior::Flat))
        .collect()
}

pub fn status_symbol(status: Status) -> char {
    match status {
        Status::Proper => 'O',
        Status::Improper => 'X',
        Status::Unknown => '?',
    }
}

pub fn decision_symbol(decision: Decision) -> char {
    match decision {
        Decision::Finite => 'O',
        Decision::Divergent => 'X',
        Decision::Inconclusive => '?',
    }
}

fn grid(mut cell: impl FnMut(u32, u32) -> Result<char>) -> Result<Vec<String>> {
    (0..=2).map(|y1| (0..=2).map(|y2| cell(y1, y2)).collect::<Result<String>>()).collect()
}

/// Analytic panels for each requested mode, with oracle panels when `oracle` is given.
pub fn reproduce_coins(modes: &[ThresholdMode], oracle: Option<&OracleConfig>) -> Result<Reproduction> {
    let mut panels = Vec::new();
    for (label, hp) in coin_panel_priors() {
        let oracle_cells = match oracle {
            Some(cfg) => Some(grid(|y1, y2| {
                Ok(decision_symbol(integrate_posterior(&datasets::coins(y1, y2), &hp, cfg)?.decision))
            })?),
            None => None,
        };
        for &mode in modes {
            let cells = grid(|y1, y2| Ok(status_symbol(decide(&datasets::coins(y1, y2), &hp, mode)?.status)))?;
            panels.push(CoinPanel {
                label: label.to_string(),
                hyper_prior: hp.clone(),
                mode,
                cells,
                oracle_cells: oracle_cells.clone(),
            });
        }
    }
    Ok(Reproduction::Coins { panels })
}

pub fn reproduce_hospitals(modes: &[ThresholdMode]) -> Result<Reproduction> {
    let sets = [
        ("hospitals", datasets::hospitals()),
        ("hypothetical1", datasets::hypothetical1()),
        ("hypothetical2", datasets::hypothetical2()),
    ];
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for (name, data) in &sets {
        for &mode in modes {
            let mut statuses = Vec::new();
            for hp in hospital_priors() {
                let v = decide(data, &hp, mode)?;
                statuses.push(v.status);
                rows.push(HospitalRow {
                    dataset: name.to_string(),
                    prior: crate::report::prior_label(&hp),
                    failed_condition: v.failed_condition().map(|c| c.to_string()),
                    hyper_prior: hp,
                    mode,
                    status: v.status,
                });
            }
            let status = statuses.iter().all(|s| *s == statuses[0]).then_some(statuses[0]);
            verdicts.push(DatasetVerdict { dataset: name.to_string(), mode, status });
        }
    }
    Ok(Reproduction::Hospitals { rows, verdicts })
}
