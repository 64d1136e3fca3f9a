//! TOML experiment configuration.
//!
//! Every section is optional and falls back to the acceptance-scale
//! defaults. Unknown keys are rejected at parse time; [`ExperimentConfig::validate`]
//! checks ranges before any sampling starts.

use std::path::Path;

use anyhow::{bail, ensure, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use smlab_core::fbm_lab::{FgnConfig, Subordination, MAX_STEPS};
use smlab_core::np_bound::MIN_SAMPLES;
use smlab_core::reference_laws::{LawSpec, ReferenceLaw, CATALOG_NAMES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Catalog,
    Stein,
    Chaos,
    Npbound,
    Wp,
    Fbm,
}

impl Command {
    pub const ALL: [Command; 6] = [Command::Catalog, Command::Stein, Command::Chaos, Command::Npbound, Command::Wp, Command::Fbm];

    pub fn name(self) -> &'static str {
        match self {
            Command::Catalog => "catalog",
            Command::Stein => "stein",
            Command::Chaos => "chaos",
            Command::Npbound => "npbound",
            Command::Wp => "wp",
            Command::Fbm => "fbm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Must match the subcommand when given.
    pub command: Option<Command>,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub catalog: CatalogConfig,
    pub stein: SteinConfig,
    pub chaos: ChaosConfig,
    pub npbound: NpConfig,
    pub wp: WpConfig,
    pub fbm: FbmConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: 1,
            tolerances: Tolerances::default(),
            catalog: CatalogConfig::default(),
            stein: SteinConfig::default(),
            chaos: ChaosConfig::default(),
            npbound: NpConfig::default(),
            wp: WpConfig::default(),
            fbm: FbmConfig::default(),
        }
    }
}

/// Pass thresholds. `k_*` entries count standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub gstar_rel: f64,
    pub density_sup: f64,
    /// rounding allowance for `A, B <= 0`
    pub ab_slack: f64,
    pub stein_residual: f64,
    pub k1_drift: f64,
    pub k_product: f64,
    pub np_fast: f64,
    pub np_mehler: f64,
    pub k_wp_terminal: f64,
    pub k_control: f64,
    pub fbm_bands: [f64; 3],
    pub covariance_mass: f64,
    pub envelope_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            gstar_rel: 1e-6,
            density_sup: 1e-6,
            ab_slack: 1e-12,
            stein_residual: 1e-6,
            k1_drift: 0.05,
            k_product: 3.0,
            np_fast: 1e-12,
            np_mehler: 1e-3,
            k_wp_terminal: 3.0,
            k_control: 5.0,
            fbm_bands: [0.1, 0.8, 8.0],
            covariance_mass: 0.05,
            envelope_slack: 0.1,
        }
    }
}

fn all_laws() -> Vec<LawSpec> {
    CATALOG_NAMES.iter().map(|n| LawSpec { name: n.to_string(), params: Default::default() }).collect()
}

fn law(name: &str, params: &[(&str, f64)]) -> LawSpec {
    LawSpec { name: name.into(), params: params.iter().map(|&(k, v)| (k.to_string(), v)).collect() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CatalogConfig {
    pub laws: Vec<LawSpec>,
    pub grid_points: usize,
    /// exponents `p` for the growth checker on `g(x) = (x + 1)^p`
    pub growth_powers: Vec<f64>,
}

impl Default for CatalogConfig {
    fn default() -> Self {
        Self { laws: all_laws(), grid_points: 200, growth_powers: vec![0.5, 1.0, 1.5, 2.0, 2.5] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteinConfig {
    pub laws: Vec<LawSpec>,
    pub n_functions: usize,
    pub grid_points: usize,
    /// upper bounds for `k1` of the standard normal
    pub k1_fortet_mourier: f64,
    pub k1_wasserstein: f64,
}

impl Default for SteinConfig {
    fn default() -> Self {
        Self {
            laws: vec![
                law("normal", &[]),
                law("chi2", &[("v", 1.0)]),
                law("gamma", &[("r", 1.0), ("s", 2.0)]),
                law("student_t", &[("v", 5.0)]),
                law("laplace", &[("c", 1.0)]),
            ],
            n_functions: 20,
            grid_points: 101,
            k1_fortet_mourier: 4.0,
            k1_wasserstein: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChaosConfig {
    pub product_cells: usize,
    pub max_order: usize,
    pub product_paths: usize,
    pub ladder: Vec<usize>,
    pub ladder_paths: usize,
}

impl Default for ChaosConfig {
    fn default() -> Self {
        Self { product_cells: 4, max_order: 3, product_paths: 100_000, ladder: vec![4, 8, 16, 32, 64], ladder_paths: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NpConfig {
    pub n_paths: usize,
    pub bins: usize,
    pub mehler_nodes: usize,
    pub mehler_inner: usize,
}

impl Default for NpConfig {
    fn default() -> Self {
        Self { n_paths: 20_000, bins: 50, mehler_nodes: 32, mehler_inner: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WpConfig {
    pub max_order: usize,
    pub product_paths: usize,
    pub shrinking: Vec<usize>,
    pub control: Vec<usize>,
    pub ladder_paths: usize,
}

impl Default for WpConfig {
    fn default() -> Self {
        Self { max_order: 2, product_paths: 100_000, shrinking: vec![8, 16, 32, 64, 128], control: vec![8, 32, 128], ladder_paths: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FbmConfig {
    pub hurst: f64,
    /// polynomial coefficients of the subordinating function, lowest first
    pub f: Vec<f64>,
    pub t_ladder: Vec<usize>,
    pub n_paths: usize,
    /// claimed limit of `T^{-2H} sum_{s,t} C(t - s)`
    pub covariance_mass_target: f64,
    pub forests: usize,
    pub forest_sizes: Vec<usize>,
    pub probe_horizons: Vec<f64>,
    pub probe_points: usize,
}

impl Default for FbmConfig {
    fn default() -> Self {
        Self {
            hurst: 0.7,
            f: vec![0.0, 1.0],
            t_ladder: vec![256, 1024, 4096],
            n_paths: 100_000,
            covariance_mass_target: 2.0,
            forests: 2,
            forest_sizes: vec![4, 6, 8],
            probe_horizons: vec![1e3, 1e4, 1e5, 1e6],
            probe_points: 1 << 16,
        }
    }
}

impl FbmConfig {
    pub fn fgn(&self, seed: u64) -> FgnConfig {
        FgnConfig { hurst: self.hurst, n_paths: self.n_paths, f: Subordination { coeffs: self.f.clone() }, seed }
    }
}

fn increasing<T: PartialOrd>(xs: &[T]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).context("invalid experiment config")
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    /// SHA-256 of the canonical JSON form, seed included.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Range checks for the section `command` will read.
    pub fn validate(&self, command: Command) -> anyhow::Result<()> {
        if let Some(c) = self.command {
            ensure!(c == command, "config is for '{}', not '{}'", c.name(), command.name());
        }
        let t = &self.tolerances;
        let all = [
            t.gstar_rel,
            t.density_sup,
            t.ab_slack,
            t.stein_residual,
            t.k1_drift,
            t.k_product,
            t.np_fast,
            t.np_mehler,
            t.k_wp_terminal,
            t.k_control,
            t.covariance_mass,
            t.envelope_slack,
        ];
        ensure!(all.iter().chain(&t.fbm_bands).all(|v| v.is_finite() && *v >= 0.0), "tolerances must be finite and non-negative");
        let laws = |specs: &[LawSpec]| -> anyhow::Result<()> {
            ensure!(!specs.is_empty(), "law list is empty");
            for s in specs {
                ReferenceLaw::from_spec(s).with_context(|| format!("law '{}'", s.name))?;
            }
            Ok(())
        };
        match command {
            Command::Catalog => {
                let c = &self.catalog;
                laws(&c.laws)?;
                ensure!(c.grid_points >= 2, "catalog.grid_points must be at least 2");
                ensure!(c.growth_powers.iter().all(|p| p.is_finite() && *p > 0.0), "growth powers must be positive");
            }
            Command::Stein => {
                let c = &self.stein;
                laws(&c.laws)?;
                ensure!(c.n_functions > 0, "stein.n_functions must be positive");
                ensure!(c.grid_points >= 3, "stein.grid_points must be at least 3");
            }
            Command::Chaos => {
                let c = &self.chaos;
                ensure!((1..=3).contains(&c.max_order), "chaos.max_order must be 1..=3");
                ensure!((1..=8).contains(&c.product_cells), "chaos.product_cells must be 1..=8");
                ensure!(c.product_paths >= 2, "chaos.product_paths must be at least 2");
                ensure!(c.ladder_paths >= MIN_SAMPLES, "chaos.ladder_paths must be at least {MIN_SAMPLES}");
                ensure!(c.ladder.len() >= 2 && increasing(&c.ladder), "chaos.ladder must hold at least two increasing sizes");
                ensure!(c.ladder[0] >= 1 && *c.ladder.last().unwrap() <= 64, "chaos.ladder sizes must be 1..=64");
            }
            Command::Npbound => {
                let c = &self.npbound;
                ensure!(c.n_paths >= MIN_SAMPLES, "npbound.n_paths must be at least {MIN_SAMPLES}");
                ensure!(c.bins >= 1 && c.mehler_nodes >= 1 && c.mehler_inner >= 1, "npbound sizes must be positive");
            }
            Command::Wp => {
                let c = &self.wp;
                ensure!((1..=2).contains(&c.max_order), "wp.max_order must be 1..=2");
                ensure!(c.product_paths >= 2, "wp.product_paths must be at least 2");
                ensure!(c.ladder_paths >= MIN_SAMPLES, "wp.ladder_paths must be at least {MIN_SAMPLES}");
                for (name, l) in [("shrinking", &c.shrinking), ("control", &c.control)] {
                    ensure!(l.len() >= 2 && increasing(l), "wp.{name} must hold at least two increasing sizes");
                    ensure!(l[0] >= 1 && *l.last().unwrap() <= 128, "wp.{name} sizes must be 1..=128");
                }
            }
            Command::Fbm => {
                let c = &self.fbm;
                c.fgn(self.seed).validate().context("fbm functional")?;
                ensure!(c.t_ladder.len() >= 2 && increasing(&c.t_ladder), "fbm.t_ladder must hold at least two increasing horizons");
                ensure!(c.t_ladder[0] >= 2 && *c.t_ladder.last().unwrap() <= MAX_STEPS, "fbm.t_ladder must lie in 2..={MAX_STEPS}");
                ensure!(c.forest_sizes.iter().all(|p| [4, 6, 8].contains(p)), "fbm.forest_sizes must be 4, 6 or 8");
                ensure!(c.probe_horizons.len() >= 2 && increasing(&c.probe_horizons), "fbm.probe_horizons must increase");
                ensure!(c.probe_horizons[0] > 1.0, "fbm.probe_horizons must exceed 1");
                if c.probe_points == 0 {
                    bail!("fbm.probe_points must be positive");
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml("sede = 3").is_err());
        assert!(ExperimentConfig::from_toml("[fbm]\nhurts = 0.7").is_err());
        assert!(ExperimentConfig::from_toml("[tolerances]\nnp = 1.0").is_err());
    }

    #[test]
    fn sections_parse() {
        let c = ExperimentConfig::from_toml(
            "command = \"fbm\"\nseed = 9\n[fbm]\nhurst = 0.8\nf = [0.0, 1.0, 0.0, 0.1]\n\n[[stein.laws]]\nname = \"gamma\"\nparams = { r = 1.0, s = 2.0 }\n",
        )
        .unwrap();
        assert_eq!(c.command, Some(Command::Fbm));
        assert_eq!(c.seed, 9);
        assert_eq!(c.fbm.f.len(), 4);
        assert_eq!(c.stein.laws[0].params["s"], 2.0);
        c.validate(Command::Fbm).unwrap();
        assert!(c.validate(Command::Wp).is_err());
    }

    #[test]
    fn validation_catches_ranges() {
        let mut c = ExperimentConfig::default();
        c.fbm.hurst = 0.5;
        assert!(c.validate(Command::Fbm).is_err());
        c.fbm.hurst = 0.7;
        c.fbm.f = vec![0.0, 0.0, 1.0];
        assert!(c.validate(Command::Fbm).is_err());
        c.chaos.ladder = vec![8, 4];
        assert!(c.validate(Command::Chaos).is_err());
        c.catalog.laws = vec![LawSpec { name: "cauchy".into(), params: Default::default() }];
        assert!(c.validate(Command::Catalog).is_err());
        for cmd in [Command::Stein, Command::Npbound, Command::Wp] {
            ExperimentConfig::default().validate(cmd).unwrap();
        }
    }

    #[test]
    fn hash_tracks_seed() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { seed: 2, ..a.clone() };
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
