//! Model selection shared by the command line and the simulation harness.

use serde::{Deserialize, Serialize};

use crate::baselines::{run_bh93, run_lcia05, Bh93Hyper, NigHyper, SharedVariance};
use crate::error::Result;
use crate::gibbs::{run_chain, McmcConfig};
use crate::normal::NormalHyper;
use crate::partition::YaoPrior;
use crate::samples::{ModelKind, PosteriorSamples};

/// Mean-change baseline settings; unset prior moments are taken from the data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bh93Settings {
    pub mu0: Option<f64>,
    pub sigma0sq: Option<f64>,
    pub sigma2: SharedVariance,
    pub p_max: f64,
}

impl Default for Bh93Settings {
    fn default() -> Self {
        Self {
            mu0: None,
            sigma0sq: None,
            sigma2: SharedVariance::InverseGamma { a: 0.1, d: 2.1 },
            p_max: 0.05,
        }
    }
}

impl Bh93Settings {
    pub fn resolve(&self, x: &[f64]) -> Result<Bh93Hyper> {
        let base = Bh93Hyper::from_data(x)?;
        let h = Bh93Hyper {
            mu0: self.mu0.unwrap_or(base.mu0),
            sigma0sq: self.sigma0sq.unwrap_or(base.sigma0sq),
            sigma2: self.sigma2,
            p_max: self.p_max,
        };
        h.validate()?;
        Ok(h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "model")]
pub enum FitModel {
    Bmcp {
        hyper: NormalHyper,
        yao1: YaoPrior,
        yao2: YaoPrior,
    },
    Lcia05 {
        hyper: NigHyper,
        yao: YaoPrior,
    },
    Bh93(Bh93Settings),
}

impl FitModel {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Bmcp => FitModel::Bmcp {
                hyper: NormalHyper::default(),
                yao1: YaoPrior::default(),
                yao2: YaoPrior::default(),
            },
            ModelKind::Lcia05 => FitModel::Lcia05 {
                hyper: NigHyper::default(),
                yao: YaoPrior::default(),
            },
            ModelKind::Bh93 => FitModel::Bh93(Bh93Settings::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            FitModel::Bmcp { .. } => ModelKind::Bmcp,
            FitModel::Lcia05 { .. } => ModelKind::Lcia05,
            FitModel::Bh93(_) => ModelKind::Bh93,
        }
    }

    pub fn fit(&self, x: &[f64], config: &McmcConfig) -> Result<PosteriorSamples> {
        match self {
            FitModel::Bmcp { hyper, yao1, yao2 } => run_chain(x, hyper, yao1, yao2, config),
            FitModel::Lcia05 { hyper, yao } => run_lcia05(x, hyper, yao, config),
            FitModel::Bh93(settings) => run_bh93(x, &settings.resolve(x)?, config),
        }
    }
}
