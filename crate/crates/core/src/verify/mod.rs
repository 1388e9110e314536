//! Checks of the incentive-compatibility condition and of the probability
//! bounds behind the exploration schemes.

pub mod anticoncentration;
pub mod exact;
pub mod mc;
pub mod property;
pub mod quadrature;

use serde::Serialize;

use crate::model::{Arm, AtomOrder};

/// Conditioning events with fewer hits than this are flagged as low support.
pub const MIN_SUPPORT: u64 = 30;

/// Slack allowed on exactly computed margins for floating-point rounding.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    MonteCarlo,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Sufficient,
    LowSupport,
    NoSupport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginCell {
    pub competitor: Arm,
    /// Estimate of `E[μ(A) − μ(A′) | A recommended]`.
    pub margin: f64,
    pub ci_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginRow {
    pub arm: Arm,
    pub pr_recommend: f64,
    pub support_count: u64,
    pub support: Support,
    pub cells: Vec<MarginCell>,
}

/// Conditional margins of every recommended arm against every competitor
/// at one round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BicMarginTable {
    pub round: u64,
    pub mode: Mode,
    pub rows: Vec<MarginRow>,
}

impl BicMarginTable {
    fn tolerance(&self, cell: &MarginCell) -> f64 {
        match self.mode {
            Mode::Exact => EXACT_TOL,
            Mode::MonteCarlo => cell.ci_radius,
        }
    }

    /// Cells that are evaluated (enough support) and below `-radius`.
    pub fn violations(&self) -> Vec<(Arm, &MarginCell)> {
        self.rows
            .iter()
            .filter(|r| r.support == Support::Sufficient)
            .flat_map(|r| {
                r.cells
                    .iter()
                    .filter(|c| c.margin < -self.tolerance(c))
                    .map(move |c| (r.arm, c))
            })
            .collect()
    }

    pub fn passes(&self) -> bool {
        self.violations().is_empty()
    }

    /// Smallest margin over evaluated cells.
    pub fn min_margin(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.support == Support::Sufficient)
            .flat_map(|r| r.cells.iter().map(|c| c.margin))
            .reduce(f64::min)
    }

    pub fn row(&self, arm: Arm) -> Option<&MarginRow> {
        self.rows.iter().find(|r| r.arm == arm)
    }

    /// Same table with arms expressed in user atom indices.
    pub fn to_user(&self, order: &AtomOrder) -> Self {
        let mut t = self.clone();
        for r in &mut t.rows {
            r.arm = order.arm_to_user(r.arm);
            for c in &mut r.cells {
                c.competitor = order.arm_to_user(c.competitor);
            }
        }
        t
    }

    /// CSV rows: round, arm (hex), competitor (hex), margin, ci_radius, mode,
    /// support_count.
    pub fn csv_records(&self) -> Vec<[String; 7]> {
        let mut out = Vec::new();
        for r in &self.rows {
            for c in &r.cells {
                out.push([
                    self.round.to_string(),
                    r.arm.to_hex(),
                    c.competitor.to_hex(),
                    format!("{:.12e}", c.margin),
                    format!("{:.12e}", c.ci_radius),
                    self.mode.as_str().to_string(),
                    r.support_count.to_string(),
                ]);
            }
        }
        out
    }
}

pub const MARGIN_CSV_HEADER: [&str; 7] = [
    "round",
    "arm",
    "competitor",
    "margin",
    "ci_radius",
    "mode",
    "support_count",
];
