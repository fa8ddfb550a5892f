//! Report assembly and CSV emission.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;
use crate::gallery::ScenarioResult;
use crate::tangency::{EpsilonProfile, TangencyKind};

pub const TOOL_NAME: &str = "pretangent";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Whether the run reached a decision. Drives the process exit code:
/// decided runs exit 0 (confident negatives included), inconclusive ones 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Decided,
    Inconclusive,
}

/// Self-contained record of one command run.
///
/// The provenance block (tool, version, seed, schedule, tolerances) plus the
/// config echo suffices to reproduce the run exactly; identical config and
/// version produce byte-identical reports. No timestamps, no hostnames.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Probe schedule in force; empty when the command does not use one.
    pub schedule: Vec<u64>,
    /// Tolerance context every verdict in the payload was decided under.
    pub tolerances: Value,
    pub status: RunStatus,
    /// Parsed inputs and effective options.
    pub config: Value,
    pub warnings: Vec<String>,
    pub payload: Value,
}

impl Report {
    /// Pretty JSON with a trailing newline. Object keys inside `Value`
    /// fields are sorted, so equal reports serialize to equal bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report has no map keys");
        s.push('\n');
        s
    }

    pub fn exit_code(&self) -> i32 {
        match self.status {
            RunStatus::Decided => 0,
            RunStatus::Inconclusive => 2,
        }
    }
}

/// A run's report plus the command-specific CSV view, when it has one
/// (`tangency` renders its profile, `gallery` a scenario summary table).
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub csv: Option<String>,
}

pub fn kind_str(kind: TangencyKind) -> &'static str {
    match kind {
        TangencyKind::StronglyTangentEquivalent => "StronglyTangentEquivalent",
        TangencyKind::NotTangentEquivalent => "NotTangentEquivalent",
        TangencyKind::Inconclusive => "Inconclusive",
    }
}

/// Renders a profile as CSV, one row per grid point, largest radius first.
/// The ratio column is eps_min / t with no rounding; empty-shell rows keep
/// their flagged zero values instead of being dropped.
pub fn profile_csv(profile: &EpsilonProfile) -> String {
    let mut out = String::from("t,eps_zy,eps_yz,eps_min,ratio,empty_flag\n");
    let eps_min = profile.eps_min();
    for (k, &t) in profile.t_grid.iter().enumerate() {
        let zy = &profile.eps_zy[k];
        let yz = &profile.eps_yz[k];
        let m = eps_min[k];
        let flag = u8::from(zy.empty || yz.empty);
        out.push_str(&format!(
            "{t},{},{},{m},{},{flag}\n",
            zy.value,
            yz.value,
            m / t
        ));
    }
    out
}

/// Writes the profile CSV to a file.
pub fn emit_profile_csv(profile: &EpsilonProfile, path: &str) -> Result<()> {
    std::fs::write(path, profile_csv(profile))?;
    Ok(())
}

/// One line per scenario: verdict, fitted slope, and embedding defects.
/// Blank cells mark values the scenario did not produce.
pub fn gallery_summary_csv(results: &[ScenarioResult]) -> String {
    let mut out =
        String::from("scenario,verdict,slope,line_defect,half_line_defect,plane_defect\n");
    for r in results {
        let slope = r.slope().map(|s| s.to_string()).unwrap_or_default();
        let defect = |e: &Option<crate::gallery::Embeddability>| {
            e.as_ref().map(|e| e.defect.to_string()).unwrap_or_default()
        };
        out.push_str(&format!(
            "{},{},{slope},{},{},{}\n",
            r.scenario,
            kind_str(r.verdict.kind),
            defect(&r.line),
            defect(&r.half_line),
            defect(&r.plane),
        ));
    }
    out
}
