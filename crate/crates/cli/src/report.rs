//! Command reports: a list of named claims with their verdicts and the
//! numbers that back them, rendered either for a terminal or as JSON with
//! stable field names.
//!
//! Every claim carries a tag naming the property it speaks to (for example
//! `mps-gauge-uniqueness` or `lsm-consistency`), a yes/no on whether the
//! property holds, a one-line verdict, and the residual or scalar behind the
//! decision when one exists. The report echoes the command line, the
//! tolerances, and the seed for seeded subcommands, so a reader can rerun
//! any line verbatim.

use serde::Serialize;
use tncanon_core::Tolerance;

#[derive(Debug, Clone, Serialize)]
pub struct ToleranceEcho {
    pub relative_rank_cut: f64,
    pub residual_cut: f64,
}

impl From<&Tolerance> for ToleranceEcho {
    fn from(t: &Tolerance) -> Self {
        ToleranceEcho {
            relative_rank_cut: t.relative_rank_cut,
            residual_cut: t.residual_cut,
        }
    }
}

/// One verdict line.
#[derive(Debug, Clone, Serialize)]
pub struct Claim {
    /// Which property this verdict speaks to.
    pub tag: &'static str,
    /// Whether the property holds.
    pub holds: bool,
    /// One-line human verdict.
    pub verdict: String,
    /// Residual behind the decision, when the decision is a residual one.
    pub residual: Option<f64>,
    /// Scalar datum behind the verdict (a dimension, a phase, a filling),
    /// when one is meaningful.
    pub value: Option<f64>,
}

impl Claim {
    pub fn new(tag: &'static str, holds: bool, verdict: String) -> Self {
        Claim {
            tag,
            holds,
            verdict,
            residual: None,
            value: None,
        }
    }

    pub fn with_residual(mut self, residual: f64) -> Self {
        self.residual = Some(residual);
        self
    }

    pub fn with_value(mut self, value: f64) -> Self {
        self.value = Some(value);
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    /// The invocation that produced this report.
    pub command: String,
    /// Seed used by seeded subcommands; null elsewhere.
    pub seed: Option<u64>,
    pub tolerance: ToleranceEcho,
    pub claims: Vec<Claim>,
}

impl Report {
    pub fn new(command: String, tol: &Tolerance, seed: Option<u64>) -> Self {
        Report {
            command,
            seed,
            tolerance: ToleranceEcho::from(tol),
            claims: Vec::new(),
        }
    }

    pub fn push(&mut self, claim: Claim) {
        self.claims.push(claim);
    }

    pub fn json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn pretty(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("report for: {}\n", self.command));
        out.push_str(&format!(
            "tolerances: relative rank cut {:.1e}, residual cut {:.1e}\n",
            self.tolerance.relative_rank_cut, self.tolerance.residual_cut
        ));
        if let Some(seed) = self.seed {
            out.push_str(&format!("seed: {seed}\n"));
        }
        for c in &self.claims {
            let mark = if c.holds { "yes" } else { " no" };
            out.push_str(&format!("  [{mark}] {}: {}", c.tag, c.verdict));
            if let Some(r) = c.residual {
                out.push_str(&format!(" (residual {r:.3e})"));
            }
            out.push('\n');
        }
        out
    }
}
