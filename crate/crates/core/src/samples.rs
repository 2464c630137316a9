use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::partition::Partition;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Separate partitions for the mean and the variance.
    Bmcp,
    /// One partition shared by mean and variance, Normal-Inverse-Gamma blocks.
    Lcia05,
    /// One partition for the mean under a constant variance.
    Bh93,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Bmcp => "bmcp",
            ModelKind::Lcia05 => "lcia05",
            ModelKind::Bh93 => "bh93",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bmcp" => Ok(ModelKind::Bmcp),
            "lcia05" => Ok(ModelKind::Lcia05),
            "bh93" => Ok(ModelKind::Bh93),
            other => Err(Error::Config(format!(
                "unknown model `{other}` (expected bmcp, lcia05 or bh93)"
            ))),
        }
    }
}

/// Which structural parameter a partition describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Param {
    Mean,
    Variance,
}

impl Param {
    pub fn from_index(k: usize) -> Result<Self, Error> {
        match k {
            1 => Ok(Param::Mean),
            2 => Ok(Param::Variance),
            _ => Err(Error::domain(format!(
                "parameter index must be 1 or 2, got {k}"
            ))),
        }
    }

    pub fn index(&self) -> usize {
        match self {
            Param::Mean => 1,
            Param::Variance => 2,
        }
    }
}

/// One retained state, stored block-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct Draw {
    pub mean_partition: Partition,
    pub mean_values: Vec<f64>,
    pub var_partition: Partition,
    pub var_values: Vec<f64>,
    pub p1: f64,
    /// Change probability of the variance partition; absent for
    /// single-partition models.
    pub p2: Option<f64>,
}

impl Draw {
    pub fn partition(&self, param: Param) -> &Partition {
        match param {
            Param::Mean => &self.mean_partition,
            Param::Variance => &self.var_partition,
        }
    }

    pub fn values(&self, param: Param) -> &[f64] {
        match param {
            Param::Mean => &self.mean_values,
            Param::Variance => &self.var_values,
        }
    }

    /// Value of `param` at 0-based instant `t`.
    pub fn value_at(&self, param: Param, t: usize) -> f64 {
        let rho = self.partition(param);
        self.values(param)[rho.block_of(t)]
    }

    pub fn mu(&self) -> Vec<f64> {
        self.mean_partition.expand(&self.mean_values)
    }

    pub fn sigma2(&self) -> Vec<f64> {
        self.var_partition.expand(&self.var_values)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSamples {
    pub model: ModelKind,
    pub n: usize,
    pub draws: Vec<Draw>,
}

impl PosteriorSamples {
    pub fn new(model: ModelKind, n: usize) -> Self {
        Self {
            model,
            n,
            draws: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}
