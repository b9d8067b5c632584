//! Published two-cell and three-cell reference instances with their printed
//! four-decimal values, and the reproduction check against them.

use serde::{Deserialize, Serialize};

use crate::approx;
use crate::config::ModelConfig;
use crate::exact::{ExactError, Observables, SolveOptions};

/// Allowed gap between a computed value and a printed one: one unit in the
/// last printed digit.
pub const PRINTED_TOL: f64 = 5e-5;

/// One published instance. `exact` and `approx` hold the printed densities
/// per cell followed by the flow rate.
#[derive(Debug, Clone, Copy)]
pub struct PublishedCase {
    pub id: &'static str,
    pub n_cells: usize,
    pub alpha: &'static str,
    /// `(a, p, beta)` per type.
    pub types: [(&'static str, &'static str, &'static str); 2],
    pub exact: &'static [f64],
    pub approx: &'static [f64],
}

impl PublishedCase {
    pub fn config(&self) -> ModelConfig {
        ModelConfig::rational(self.n_cells, self.alpha, &self.types)
    }
}

/// The five two-cell rows.
pub const TABLE_ROWS: [PublishedCase; 5] = [
    PublishedCase {
        id: "1",
        n_cells: 2,
        alpha: "2/5",
        types: [("3/7", "3/5", "3/10"), ("4/7", "4/5", "2/5")],
        exact: &[0.5149, 0.5544, 0.1940],
        approx: &[0.5142, 0.5552, 0.1943],
    },
    PublishedCase {
        id: "2",
        n_cells: 2,
        alpha: "1/5",
        types: [("2/5", "2/5", "1/5"), ("3/5", "3/5", "3/10")],
        exact: &[0.4135, 0.4692, 0.1173],
        approx: &[0.4118, 0.4706, 0.1176],
    },
    PublishedCase {
        id: "3",
        n_cells: 2,
        alpha: "1/5",
        types: [("1/3", "2/5", "1/5"), ("2/3", "4/5", "2/5")],
        exact: &[0.3583, 0.4278, 0.1283],
        approx: &[0.3529, 0.4314, 0.1294],
    },
    PublishedCase {
        id: "4",
        n_cells: 2,
        alpha: "8/25",
        types: [("3/4", "12/25", "9/25"), ("1/4", "18/25", "11/25")],
        exact: &[0.4752, 0.4393, 0.1679],
        approx: &[0.4749, 0.4455, 0.1680],
    },
    PublishedCase {
        id: "5",
        n_cells: 2,
        alpha: "8/25",
        types: [("3/4", "12/25", "1/25"), ("1/4", "18/25", "11/25")],
        exact: &[0.5744, 0.5958, 0.1362],
        approx: &[0.5723, 0.6048, 0.1369],
    },
];

/// The three-cell instance.
pub const THREE_CELL: PublishedCase = PublishedCase {
    id: "n3",
    n_cells: 3,
    alpha: "1/5",
    types: [("2/5", "2/5", "1/5"), ("3/5", "3/5", "3/10")],
    exact: &[0.3988, 0.4374, 0.4764, 0.1202],
    approx: &[0.4012, 0.4415, 0.4838, 0.1198],
};

/// Round half to even at four decimals.
pub fn round4(x: f64) -> f64 {
    (x * 1e4).round_ties_even() / 1e4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Exact,
    Approx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCheck {
    pub quantity: String,
    pub kind: ValueKind,
    pub computed: f64,
    pub rounded: f64,
    pub printed: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReproduction {
    pub id: String,
    pub config: ModelConfig,
    pub hop_star: f64,
    pub exit_star: f64,
    pub checks: Vec<CellCheck>,
}

impl CaseReproduction {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, quantity: &str, kind: ValueKind) -> Option<&CellCheck> {
        self.checks
            .iter()
            .find(|c| c.quantity == quantity && c.kind == kind)
    }
}

fn quantities(obs: &Observables) -> Vec<(String, f64)> {
    obs.density
        .iter()
        .enumerate()
        .map(|(i, &r)| (format!("rho{}", i + 1), r))
        .chain(std::iter::once(("J".to_string(), obs.flow_rate())))
        .collect()
}

fn checks(obs: &Observables, printed: &[f64], kind: ValueKind) -> Vec<CellCheck> {
    quantities(obs)
        .into_iter()
        .zip(printed)
        .map(|((quantity, computed), &printed)| CellCheck {
            quantity,
            kind,
            computed,
            rounded: round4(computed),
            printed,
            pass: (computed - printed).abs() <= PRINTED_TOL,
        })
        .collect()
}

pub fn reproduce(
    case: &PublishedCase,
    opts: &SolveOptions,
) -> Result<CaseReproduction, ExactError> {
    let config = case.config();
    let params = config
        .to_params(false)
        .expect("published instances are valid");
    let cmp = approx::compare(&params, opts)?;
    let mut all = checks(&cmp.exact, case.exact, ValueKind::Exact);
    all.extend(checks(&cmp.approx, case.approx, ValueKind::Approx));
    Ok(CaseReproduction {
        id: case.id.to_string(),
        config,
        hop_star: cmp.auxiliary.hop_prob,
        exit_star: cmp.auxiliary.exit_prob,
        checks: all,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_to_four_decimals() {
        assert_eq!(round4(0.51493), 0.5149);
        assert_eq!(round4(0.19402628), 0.194);
        assert_eq!(round4(0.99996), 1.0);
    }

    #[test]
    fn published_configs_are_valid() {
        for case in TABLE_ROWS.iter().chain(std::iter::once(&THREE_CELL)) {
            let p = case.config().to_params(false).unwrap();
            assert_eq!(p.n_cells(), case.n_cells);
            assert_eq!(case.exact.len(), case.n_cells + 1);
            assert_eq!(case.approx.len(), case.n_cells + 1);
        }
    }

    #[test]
    fn first_row_reproduces() {
        let r = reproduce(&TABLE_ROWS[0], &SolveOptions::default()).unwrap();
        assert_eq!(r.checks.len(), 6);
        assert!(r.all_pass(), "{r:#?}");
    }
}
