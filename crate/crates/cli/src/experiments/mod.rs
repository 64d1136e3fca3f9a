//! One pipeline per subcommand. Each returns estimates, verdicts and CSV
//! tables; writing them out is left to [`crate::report`].

mod catalog;
mod chaos;
mod fbm;
mod npbound;
mod stein;
mod wp;

use serde::{Deserialize, Serialize};
use smlab_core::stats::Estimate;

use crate::config::{Command, ExperimentConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedEstimate {
    pub name: String,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, header: &[&str]) -> Self {
        Self { file: file.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip form, so CSV cells reproduce the report bitwise.
pub(crate) fn num(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub estimates: Vec<NamedEstimate>,
    pub verdicts: Vec<Verdict>,
    pub tables: Vec<Table>,
}

impl Outcome {
    pub(crate) fn estimate(&mut self, name: impl Into<String>, e: Estimate) {
        self.estimates.push(NamedEstimate { name: name.into(), value: e.value, stderr: e.stderr });
    }

    pub(crate) fn exact(&mut self, name: impl Into<String>, v: f64) {
        self.estimate(name, Estimate::exact(v));
    }

    pub(crate) fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.verdicts.push(Verdict { name: name.into(), passed, detail: detail.into() });
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}

/// Built-in experiment registry.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Experiment {
    pub command: Command,
    pub description: &'static str,
    /// CSV files and their columns
    pub outputs: &'static [(&'static str, &'static str)],
}

pub const REGISTRY: [Experiment; 6] = [
    Experiment {
        command: Command::Catalog,
        description: "g* by quadrature vs closed form, density round trip, A/B signs and growth thresholds for the reference catalog",
        outputs: &[
            ("catalog.csv", "law,support_l,support_u,gstar_max_rel_err,density_max_err,a_max,b_max,assumptions"),
            ("growth.csv", "p,expected,passes,left_slope,right_slope"),
        ],
    },
    Experiment {
        command: Command::Stein,
        description: "Stein equation residuals over random Lipschitz test functions and the empirical constants k1, k2",
        outputs: &[("stein.csv", "law,family,n_functions,grid_points,k1,k1_refined,k2,k2_refined,max_residual")],
    },
    Experiment {
        command: Command::Chaos,
        description: "Wiener product formula residuals and the second-chaos fourth-moment ladder",
        outputs: &[
            ("chaos_products.csv", "q,p,residual_mean,residual_mean_se,residual_sq,residual_sq_se"),
            ("chaos_ladder.csv", "n,max_contraction,excess_kurtosis,excess_kurtosis_se,var_gamma,var_gamma_se,bound,bound_se,d_w,d_w_se,np_l1,np_l1_se"),
        ],
    },
    Experiment {
        command: Command::Npbound,
        description: "NP bound estimates for exact constructions, fast path and Mehler path",
        outputs: &[("npbound.csv", "construction,law,method,n,np_l1,np_l1_se,np_l1_regressed,np_l2,d_w,d_w_se,k,sandwich_holds")],
    },
    Experiment {
        command: Command::Wp,
        description: "Wiener-Poisson product formula on mixed grids, shrinking-atom fourth-moment ladder and a single-atom control",
        outputs: &[
            ("wp_products.csv", "grid,q,p,residual_mean,residual_mean_se,residual_sq,residual_sq_se"),
            ("wp_ladder.csv", "sequence,time_cells,cells,max_flagged,fourth_moment,fourth_moment_se,fourth_moment_exact,d_w,d_w_se,var_gamma,var_gamma_se,jump_term,jump_term_se"),
        ],
    },
    Experiment {
        command: Command::Fbm,
        description: "Bilinear fGn functional: moment ladder against chi-square targets, covariance mass and L(T) scaling",
        outputs: &[
            ("fbm_ladder.csv", "T,m2,m2_se,m3,m3_se,m4,m4_se"),
            ("fbm_targets.csv", "moment,target,terminal,terminal_se,band,within_band,approaching"),
            ("fbm_mass.csv", "T,covariance_mass,target"),
            ("fbm_scaling.csv", "P,S,edges,slope,envelope,regime,respects_envelope"),
        ],
    },
];

/// Runs the pipeline for `command`. The config must already be validated.
pub fn run(command: Command, config: &ExperimentConfig) -> smlab_core::Result<Outcome> {
    match command {
        Command::Catalog => catalog::run(config),
        Command::Stein => stein::run(config),
        Command::Chaos => chaos::run(config),
        Command::Npbound => npbound::run(config),
        Command::Wp => wp::run(config),
        Command::Fbm => fbm::run(config),
    }
}
