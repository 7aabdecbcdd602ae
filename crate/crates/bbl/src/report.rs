//! Versioned report document and its plain-text rendering.

use std::fmt::Write as _;

use bbl_core::oracle::{Agreement, Decision, Direction, OracleReport, TailClass, Witness};
use bbl_core::sampler::DrawSummary;
use bbl_core::{
    BetaPrior, ClassificationResult, HyperPriorSpec, ProprietyVerdict, RPrior, SamplerConfig, Status, ThresholdMode,
};
use serde::{Deserialize, Serialize};

use crate::error::{status_word, Result};
use crate::reproduce::Reproduction;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub source: String,
    pub k: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSection {
    pub report: OracleReport,
    /// Corrected-threshold verdict against the oracle, when a verdict was computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement: Option<Agreement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub literal_agrees: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSection {
    pub config: SamplerConfig,
    pub summary: DrawSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyper_prior: Option<HyperPriorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub verdicts: Vec<ProprietyVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reproduction: Option<Reproduction>,
}

impl ReportDocument {
    pub fn new(command: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            input: None,
            hyper_prior: None,
            classification: None,
            verdicts: Vec::new(),
            oracle: None,
            sampler: None,
            reproduction: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} (report schema {})", self.command, self.schema_version);
        if let Some(i) = &self.input {
            let _ = writeln!(out, "input: {} (k = {}, m = {})", i.source, i.k, i.m);
        }
        if let Some(hp) = &self.hyper_prior {
            let _ = writeln!(out, "hyper-prior: {}", prior_label(hp));
        }
        if let Some(c) = &self.classification {
            render_classification(&mut out, c);
        }
        for v in &self.verdicts {
            render_verdict(&mut out, v);
        }
        if let Some(o) = &self.oracle {
            render_oracle(&mut out, o);
        }
        if let Some(s) = &self.sampler {
            render_sampler(&mut out, s);
        }
        if let Some(r) = &self.reproduction {
            render_reproduction(&mut out, r);
        }
        out
    }
}

fn number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.4}").trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Compact description such as `dr/(1+r)^2, flat g`.
pub fn prior_label(hp: &HyperPriorSpec) -> String {
    let f = match hp.f {
        RPrior::DrOverR => "dr/r".to_string(),
        RPrior::PowerLaw { t, u } if t == 0.0 => format!("dr/r^{}", number(u + 1.0)),
        RPrior::PowerLaw { t, u } => format!("dr/({}+r)^{}", number(t), number(u + 1.0)),
    };
    let g = match &hp.g {
        BetaPrior::Flat => "flat g".to_string(),
        BetaPrior::StandardLogisticIntercept => "standard logistic g".to_string(),
        BetaPrior::Gaussian(p) => format!("gaussian g (dim {})", p.dim()),
    };
    format!("{f}, {g}")
}

fn mode_word(mode: ThresholdMode) -> &'static str {
    match mode {
        ThresholdMode::Literal => "literal",
        ThresholdMode::Corrected => "corrected",
    }
}

fn decision_word(d: Decision) -> &'static str {
    match d {
        Decision::Finite => "finite",
        Decision::Divergent => "divergent",
        Decision::Inconclusive => "inconclusive",
    }
}

fn direction_label(d: &Direction) -> String {
    match d {
        Direction::LogRUp => "log r -> +inf".into(),
        Direction::LogRDown => "log r -> -inf".into(),
        Direction::Beta(u) => {
            let parts: Vec<String> = u.iter().map(|v| format!("{v:.4}")).collect();
            format!("beta along ({})", parts.join(", "))
        }
    }
}

fn render_classification(out: &mut String, c: &ClassificationResult) {
    let idx: Vec<String> = c.interior_idx.iter().map(|i| (i + 1).to_string()).collect();
    let list = if idx.is_empty() { "none".to_string() } else { idx.join(" ") };
    let _ = writeln!(out, "interior groups: {list} (k_y = {} of k = {})", c.k_y, c.k);
    let _ = writeln!(out, "rank(X_y) = {} (m = {})", c.rank_xy, c.m);
    let _ = writeln!(
        out,
        "extreme groups: {} all-success, {} all-failure",
        c.extreme_success_count, c.extreme_failure_count
    );
}

fn render_verdict(out: &mut String, v: &ProprietyVerdict) {
    let flag = if v.discrepancy_flag { " (differs from the other threshold mode)" } else { "" };
    let _ = writeln!(out, "verdict [{}]: {}{flag}", mode_word(v.mode), status_word(v.status));
    for r in &v.reasons {
        let _ = writeln!(out, "  {r}");
    }
}

fn render_oracle(out: &mut String, o: &OracleSection) {
    let r = &o.report;
    let _ = writeln!(
        out,
        "oracle: {} after {} levels, log integral {:.6}",
        decision_word(r.decision),
        r.levels.len(),
        r.log_integral()
    );
    for (i, l) in r.levels.iter().enumerate() {
        let inc = l.relative_increment.map_or("-".to_string(), |v| format!("{:.3e}", v + 0.0));
        let _ = writeln!(
            out,
            "  level {i}: |s| <= {}, |z| <= {}, log I = {:.6}, increment {inc}",
            number(l.s_half_width),
            number(l.beta_half_width),
            l.log_integral
        );
    }
    for t in &r.tail_slopes {
        let class = match t.class {
            TailClass::Integrable => "integrable",
            TailClass::NonIntegrable => "non-integrable",
            TailClass::Ambiguous => "ambiguous",
        };
        let _ = writeln!(out, "  tail {}: slope {:.4}, {class}", direction_label(&t.direction), t.slope);
    }
    match &r.divergence_witness {
        Some(Witness::Tail { direction, slope, min_log_value }) => {
            let _ = writeln!(
                out,
                "  witness: {} has slope {slope:.3e} with log integrand >= {min_log_value:.4}",
                direction_label(direction)
            );
        }
        Some(Witness::Increments { first_level, log_shell_masses }) => {
            let _ =
                writeln!(out, "  witness: {} non-shrinking shells from level {first_level}", log_shell_masses.len());
        }
        None => {}
    }
    if let Some(p) = &r.r_part {
        let _ = writeln!(out, "  r-part at beta {:?}: {:.10} (log {:.10})", p.beta, p.log_value.exp(), p.log_value);
    }
    if let Some(a) = o.agreement {
        let word = match a {
            Agreement::Agree => "agrees",
            Agreement::Disagree => "disagrees",
            Agreement::Undetermined => "undetermined",
        };
        let _ = writeln!(out, "  corrected-threshold verdict {word} with the oracle");
    }
    if let Some(l) = o.literal_agrees {
        let _ = writeln!(
            out,
            "  literal-threshold verdict {} with the oracle",
            if l { "agrees" } else { "does not agree" }
        );
    }
}

fn render_sampler(out: &mut String, s: &SamplerSection) {
    let _ = writeln!(
        out,
        "sampler: {} draws (burn-in {}, thin {}, seed {}), acceptance {:.3}",
        s.summary.draws, s.config.burn_in, s.config.thin, s.config.seed, s.summary.acceptance_rate
    );
    let _ = writeln!(out, "  {:<8} {:>12} {:>12} {:>12} {:>12} {:>10}", "param", "mean", "sd", "2.5%", "97.5%", "ess");
    for p in &s.summary.parameters {
        let _ = writeln!(
            out,
            "  {:<8} {:>12.5} {:>12.5} {:>12.5} {:>12.5} {:>10.1}",
            p.name, p.mean, p.sd, p.q025, p.q975, p.ess
        );
    }
    let b: Vec<String> = s.summary.mean_shrinkage.iter().map(|v| format!("{v:.4}")).collect();
    let _ = writeln!(out, "  mean shrinkage B_j: {}", b.join(" "));
    if let Some(f) = &s.draws_file {
        let _ = writeln!(out, "  draws written to {f}");
    }
}

fn render_grid(out: &mut String, cells: &[String]) {
    let _ = writeln!(out, "    y1\\y2 0 1 2");
    for (y1, row) in cells.iter().enumerate() {
        let spaced: Vec<String> = row.chars().map(String::from).collect();
        let _ = writeln!(out, "    {y1}     {}", spaced.join(" "));
    }
}

fn render_reproduction(out: &mut String, r: &Reproduction) {
    match r {
        Reproduction::Coins { panels } => {
            for p in panels {
                let _ = writeln!(out, "panel ({}) [{}]: {}", p.label, mode_word(p.mode), prior_label(&p.hyper_prior));
                render_grid(out, &p.cells);
                if let Some(o) = &p.oracle_cells {
                    let _ = writeln!(out, "  oracle:");
                    render_grid(out, o);
                }
            }
        }
        Reproduction::Hospitals { rows, verdicts } => {
            for row in rows {
                let why = row.failed_condition.as_deref().map_or(String::new(), |c| format!(" ({c})"));
                let _ = writeln!(
                    out,
                    "{:<14} [{}] {:<24} {}{why}",
                    row.dataset,
                    mode_word(row.mode),
                    row.prior,
                    status_word(row.status)
                );
            }
            for v in verdicts {
                let s = v.status.map_or("mixed", status_word);
                let _ = writeln!(out, "{} [{}]: {s}", v.dataset, mode_word(v.mode));
            }
        }
    }
}

/// Exit code for a verdict: 0 proper, 2 improper, 3 unknown.
pub fn status_exit_code(status: Status) -> i32 {
    match status {
        Status::Proper => 0,
        Status::Improper => 2,
        Status::Unknown => 3,
    }
}
