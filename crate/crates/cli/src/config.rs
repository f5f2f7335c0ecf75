//! Run configuration shared by every command. Values come from command-line
//! flags, then the TOML file given by `--config`, then built-in defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use lms_core::geometry::{MetricProvider, Region};
use lms_core::metricnet::MetricNet;
use lms_core::smoothmap::{Activation, Decoder, Mlp};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{io_error, CliError, CliResult};

/// A dense matrix given as rows, `"1,0;0,1;0,0"` on the command line or an
/// array of arrays in TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Matrix(pub Vec<Vec<f64>>);

impl FromStr for Matrix {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rows = s
            .split(';')
            .map(|row| {
                row.split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad matrix entry {v:?}: {e}")))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Matrix(rows))
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .0
            .iter()
            .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
            .collect();
        f.write_str(&rows.join(";"))
    }
}

impl Matrix {
    pub fn to_dmatrix(&self) -> CliResult<DMatrix<f64>> {
        let rows = self.0.len();
        let cols = self.0.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 || self.0.iter().any(|r| r.len() != cols) {
            return Err(CliError::config("linear_matrix must be a non-empty rectangular matrix"));
        }
        Ok(DMatrix::from_row_iterator(rows, cols, self.0.iter().flatten().copied()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Decoder: sphere, linear, paraboloid, mlp (weights file) or random-mlp.
    #[arg(long)]
    pub decoder: Option<String>,
    /// Sphere radius.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Rows of the linear map, e.g. "1,0;0,1;0,0".
    #[arg(long)]
    pub linear_matrix: Option<Matrix>,
    /// Latent dimension of the paraboloid decoder.
    #[arg(long)]
    pub paraboloid_dim: Option<usize>,
    /// Decoder weights JSON, for `decoder = "mlp"`.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Layer sizes of a random tanh/sigmoid network, e.g. "2,256,784".
    #[arg(long, value_delimiter = ',')]
    pub mlp_sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub mlp_seed: Option<u64>,

    /// Metric source: exact or learned.
    #[arg(long)]
    pub metric: Option<String>,
    /// Trained metric network JSON, for the learned metric.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Finite-difference step for metric derivatives.
    #[arg(long)]
    pub fd_step: Option<f64>,

    /// Latent data CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Ambient data CSV (for `project`).
    #[arg(long)]
    pub ambient: Option<PathBuf>,

    /// Start point `x`, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub start: Option<Vec<f64>>,
    /// Target point `v`, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub target: Option<Vec<f64>>,
    /// Initial geodesic velocity, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub velocity: Option<Vec<f64>>,
    /// Tangent vector to transport, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub vector: Option<Vec<f64>>,
    /// RK4 steps for geodesics.
    #[arg(long)]
    pub geodesic_steps: Option<usize>,

    /// Diffusion time horizon T.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Euler–Maruyama steps K.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    /// Number of samples to generate.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Use the drift exactly as printed in the source paper.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub paper_drift: Option<bool>,

    #[arg(long, allow_hyphen_values = true)]
    pub grid_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub grid_hi: Option<f64>,
    #[arg(long)]
    pub grid_n: Option<usize>,

    /// Fréchet step size τ.
    #[arg(long)]
    pub frechet_step: Option<f64>,
    #[arg(long)]
    pub frechet_tol: Option<f64>,
    #[arg(long)]
    pub frechet_max_iter: Option<usize>,

    #[arg(long)]
    pub ml_tol: Option<f64>,
    #[arg(long)]
    pub ml_max_iter: Option<usize>,
    #[arg(long)]
    pub ml_fd_step: Option<f64>,

    /// Principal component whose curve is emitted.
    #[arg(long)]
    pub component: Option<usize>,
    /// Curve parameters for the principal curve, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub curve_ts: Option<Vec<f64>>,

    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub region_lo: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub region_hi: Option<Vec<f64>>,
    /// Relative inflation of the data bounding box used as training region.
    #[arg(long)]
    pub region_inflate: Option<f64>,
    #[arg(long)]
    pub train_samples: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub final_learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,

    /// Timed repetitions per provider in `benchmark`.
    #[arg(long)]
    pub repeats: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::config(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        Self::from_toml(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `self` win over those in `base`.
    pub fn over(&self, base: &RunConfig) -> RunConfig {
        let top = serde_json::to_value(self).expect("config serializes");
        let mut merged = serde_json::to_value(base).expect("config serializes");
        if let (serde_json::Value::Object(top), serde_json::Value::Object(out)) = (top, &mut merged) {
            for (k, v) in top {
                if !v.is_null() {
                    out.insert(k, v);
                }
            }
        }
        serde_json::from_value(merged).expect("merged config deserializes")
    }

    pub fn decoder(&self) -> CliResult<Decoder> {
        let kind = self.decoder.as_deref().unwrap_or("sphere");
        let decoder = match kind {
            "sphere" => Decoder::sphere(self.radius.unwrap_or(1.0))?,
            "linear" => {
                let m = self
                    .linear_matrix
                    .as_ref()
                    .ok_or_else(|| CliError::config("decoder \"linear\" needs linear_matrix"))?;
                Decoder::linear(m.to_dmatrix()?)?
            }
            "paraboloid" => Decoder::paraboloid(self.paraboloid_dim.unwrap_or(2))?,
            "mlp" => {
                let path = self
                    .weights
                    .as_ref()
                    .ok_or_else(|| CliError::config("decoder \"mlp\" needs a weights file"))?;
                let text = std::fs::read_to_string(path).map_err(io_error(path))?;
                Decoder::Mlp(Mlp::from_json(&text)?)
            }
            "random-mlp" => {
                let sizes = self
                    .mlp_sizes
                    .as_ref()
                    .ok_or_else(|| CliError::config("decoder \"random-mlp\" needs mlp_sizes"))?;
                Decoder::Mlp(Mlp::random(sizes, Activation::Tanh, Activation::Sigmoid, self.mlp_seed.unwrap_or(0))?)
            }
            other => return Err(CliError::config(format!("unknown decoder {other:?}"))),
        };
        Ok(decoder)
    }

    pub fn exact_provider(&self) -> CliResult<MetricProvider> {
        self.with_fd(MetricProvider::exact(self.decoder()?))
    }

    pub fn learned_provider(&self) -> CliResult<MetricProvider> {
        let path = self
            .model
            .as_ref()
            .ok_or_else(|| CliError::config("the learned metric needs a model file"))?;
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        self.with_fd(MetricProvider::learned(MetricNet::from_json(&text)?))
    }

    pub fn provider(&self) -> CliResult<MetricProvider> {
        match self.metric.as_deref().unwrap_or("exact") {
            "exact" => self.exact_provider(),
            "learned" => self.learned_provider(),
            other => Err(CliError::config(format!("unknown metric source {other:?}"))),
        }
    }

    fn with_fd(&self, p: MetricProvider) -> CliResult<MetricProvider> {
        match self.fd_step {
            Some(h) => Ok(p.with_fd_step(h)?),
            None => Ok(p),
        }
    }

    pub fn latent_data(&self) -> CliResult<Vec<DVector<f64>>> {
        let path = self.data.as_ref().ok_or_else(|| CliError::config("missing latent data file (data)"))?;
        Ok(lms_core::io::read_points_file(path)?)
    }

    /// A point-valued option, checked against the latent dimension.
    pub fn point(&self, name: &str, value: &Option<Vec<f64>>, d: usize, default: Option<Vec<f64>>) -> CliResult<DVector<f64>> {
        let v = value
            .clone()
            .or(default)
            .ok_or_else(|| CliError::config(format!("missing {name}")))?;
        if v.len() != d {
            return Err(CliError::config(format!("{name} has {} coordinates, expected {d}", v.len())));
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(CliError::config(format!("{name} has non-finite coordinates")));
        }
        Ok(DVector::from_vec(v))
    }

    pub fn region(&self, data: Option<&[DVector<f64>]>, d: usize) -> CliResult<Region> {
        match (&self.region_lo, &self.region_hi, data) {
            (Some(lo), Some(hi), _) => {
                if lo.len() != d || hi.len() != d {
                    return Err(CliError::config(format!("region bounds must have {d} coordinates")));
                }
                Ok(Region::new(lo.clone(), hi.clone())?)
            }
            (None, None, Some(points)) if !points.is_empty() => {
                Ok(Region::bounding(points, self.region_inflate.unwrap_or(0.2))?)
            }
            (None, None, _) => Err(CliError::config("training needs region_lo/region_hi or a data file")),
            _ => Err(CliError::config("region_lo and region_hi must be given together")),
        }
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Seed for one labelled random stream, stable across releases.
pub fn sub_seed(seed: u64, label: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    // splitmix64 finaliser
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
