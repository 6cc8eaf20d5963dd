//! Run configuration: sectioned TOML (or the `config` object of a previous
//! JSON summary), plus command-line overrides.

use std::path::{Path, PathBuf};

use hedgerep::hedging::ZeroRateClaim;
use hedgerep::mortality::QuadratureSpec;
use hedgerep::{AgeDomain, BondPortfolio, G2ppParams, GompertzParams, PolicyPortfolio};
use serde::{Deserialize, Serialize};

use crate::Failure;

pub const OUT_DIR_ENV: &str = "HEDGEREP_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<G2ppParams>,
    pub mortality: Option<MortalityBlock>,
    pub portfolio: Option<PortfolioBlock>,
    pub simulation: Option<SimulationBlock>,
    pub scan: Option<ScanBlock>,
    pub quadrature: Option<QuadratureSpec>,
    pub fit: Option<FitBlock>,
    pub hedge: Option<HedgeBlock>,
    pub validate: Option<ValidateBlock>,
    pub output: Option<OutputBlock>,
}

/// Gompertz force plus the admissible age range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MortalityBlock {
    pub a: f64,
    pub b: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub age_step: f64,
}

impl MortalityBlock {
    pub fn gompertz(&self) -> GompertzParams {
        GompertzParams {
            a: self.a,
            b: self.b,
        }
    }

    pub fn domain(&self) -> AgeDomain {
        AgeDomain {
            x_min: self.x_min,
            x_max: self.x_max,
            step: self.age_step,
        }
    }
}

/// `bonds` as `[nominal, maturity]` pairs, `policies` as `[count, age]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortfolioBlock {
    pub bonds: Option<Vec<(f64, f64)>>,
    pub policies: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitBlock {
    pub basis: Vec<f64>,
    #[serde(default)]
    pub ridge: f64,
}

/// Two-asset fixture, ratio offsets, and the zero-rate call ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HedgeBlock {
    pub s1: f64,
    pub s2: f64,
    pub rho: f64,
    pub x10: f64,
    pub x20: f64,
    pub offsets: Vec<f64>,
    pub ratio_step: f64,
    pub claim: ZeroRateClaim,
    pub x0: f64,
    pub ladder: Vec<usize>,
    pub n_se: f64,
}

impl Default for HedgeBlock {
    fn default() -> Self {
        Self {
            s1: 0.2,
            s2: 0.25,
            rho: 0.6,
            x10: 1.0,
            x20: 1.0,
            offsets: vec![-0.1, 0.1],
            ratio_step: 1e-3,
            claim: ZeroRateClaim::default(),
            x0: 1.0,
            ladder: vec![1, 2, 4, 8, 16, 32, 64],
            n_se: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateBlock {
    pub n_se: f64,
    pub martingale_times: Vec<f64>,
    pub maturities: Vec<f64>,
    pub identity_times: Vec<f64>,
    pub identity_candidates: Vec<f64>,
    pub mass_ages: Vec<f64>,
    pub mass_dt: f64,
    pub claim: ZeroRateClaim,
    pub pde_step: f64,
    pub pde_tol: f64,
}

impl Default for ValidateBlock {
    fn default() -> Self {
        Self {
            n_se: 3.0,
            martingale_times: vec![0.25, 0.5, 1.0],
            maturities: vec![2.0, 5.0, 10.0],
            identity_times: vec![0.5, 1.0],
            identity_candidates: vec![2.0, 5.0, 9.0],
            mass_ages: (0..=12).map(|k| 20.0 + 5.0 * k as f64).collect(),
            mass_dt: 0.1,
            claim: ZeroRateClaim::default(),
            pde_step: 1e-4,
            pde_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
    pub csv: Option<String>,
    pub json: Option<String>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

fn config_error(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("{}: {e}", path.display()))
}

impl RunConfig {
    /// Reads TOML, or JSON when the extension is `.json`. A JSON summary
    /// written by an earlier run is accepted as is; its `config` is used.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            let mut value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| config_error(path, e))?;
            if let Some(inner) = value.get_mut("config") {
                value = inner.take();
            }
            serde_json::from_value(value).map_err(|e| config_error(path, e))
        } else {
            toml::from_str(&text).map_err(|e| config_error(path, e))
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(sim) = self.simulation.as_mut() {
            if let Some(s) = o.seed {
                sim.seed = s;
            }
            if let Some(n) = o.paths {
                sim.n_paths = n;
            }
            if let Some(n) = o.steps {
                sim.n_steps = n;
            }
        }
        let dir = o
            .out_dir
            .clone()
            .or_else(|| self.output.as_ref().and_then(|b| b.dir.clone()))
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        self.output.get_or_insert_with(OutputBlock::default).dir = Some(dir);
    }

    pub fn out_dir(&self) -> PathBuf {
        self.output
            .as_ref()
            .and_then(|b| b.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn output_files(&self, command: &str) -> (PathBuf, PathBuf) {
        let dir = self.out_dir();
        let block = self.output.clone().unwrap_or_default();
        (
            dir.join(block.csv.unwrap_or_else(|| format!("{command}.csv"))),
            dir.join(block.json.unwrap_or_else(|| format!("{command}.json"))),
        )
    }

    pub fn model(&self) -> Result<G2ppParams, Failure> {
        let m = require(self.model, "model")?;
        m.validate()
            .map_err(|e| Failure::Config(format!("[model] {e}")))?;
        Ok(m)
    }

    pub fn simulation(&self) -> Result<SimulationBlock, Failure> {
        let s = require(self.simulation, "simulation")?;
        if s.n_paths < 2 || s.n_steps == 0 {
            return Err(Failure::Config(
                "[simulation] needs n_paths >= 2 and n_steps >= 1".into(),
            ));
        }
        Ok(s)
    }

    pub fn scan(&self) -> Result<ScanBlock, Failure> {
        require(self.scan, "scan")
    }

    pub fn quadrature(&self) -> Result<QuadratureSpec, Failure> {
        let q = require(self.quadrature, "quadrature")?;
        q.validate()
            .map_err(|e| Failure::Config(format!("[quadrature] {e}")))?;
        Ok(q)
    }

    pub fn mortality(&self) -> Result<(GompertzParams, AgeDomain), Failure> {
        let m = require(self.mortality, "mortality")?;
        let (g, d) = (m.gompertz(), m.domain());
        g.validate()
            .and_then(|_| d.validate())
            .map_err(|e| Failure::Config(format!("[mortality] {e}")))?;
        Ok((g, d))
    }

    pub fn bonds(&self) -> Result<BondPortfolio, Failure> {
        let entries = self
            .portfolio
            .as_ref()
            .and_then(|p| p.bonds.clone())
            .ok_or_else(|| Failure::Config("missing `bonds` in [portfolio]".into()))?;
        BondPortfolio::new(entries).map_err(|e| Failure::Config(format!("[portfolio] {e}")))
    }

    pub fn policies(&self, domain: &AgeDomain) -> Result<PolicyPortfolio, Failure> {
        let entries = self
            .portfolio
            .as_ref()
            .and_then(|p| p.policies.clone())
            .ok_or_else(|| Failure::Config("missing `policies` in [portfolio]".into()))?;
        PolicyPortfolio::new(entries, domain)
            .map_err(|e| Failure::Config(format!("[portfolio] {e}")))
    }

    pub fn fit(&self) -> Result<FitBlock, Failure> {
        require(self.fit.clone(), "fit")
    }

    pub fn hedge(&self) -> Result<HedgeBlock, Failure> {
        require(self.hedge.clone(), "hedge")
    }

    pub fn validate_block(&self) -> Result<ValidateBlock, Failure> {
        require(self.validate.clone(), "validate")
    }
}

fn require<T>(block: Option<T>, name: &str) -> Result<T, Failure> {
    block.ok_or_else(|| Failure::Config(format!("missing [{name}] section")))
}
