//! A dense network predicting the metric and cometric directly from `z`,
//! replacing Jacobian-based metric evaluation once trained.

mod benchmark;
mod train;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{MetricTensor, Region};
use crate::linalg::frobenius_sq;
use crate::smoothmap::{LatentPoint, LayerRecord, Mlp, WeightsRecord};

pub use benchmark::{benchmark, BenchmarkReport, GeodesicWorkload};
pub use train::{gradient_check, train, EpochLoss, TrainConfig};

/// Number of entries in the upper triangle of a d×d matrix.
pub fn triangle_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Mirrors a row-major upper triangle into a full symmetric matrix. The
/// stored off-diagonal values are the matrix entries themselves.
pub fn from_upper(d: usize, upper: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            m[(i, j)] = upper[k];
            m[(j, i)] = upper[k];
            k += 1;
        }
    }
    m
}

pub fn to_upper(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(triangle_len(d));
    for i in 0..d {
        for j in i..d {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// The approximator objective for a single point:
/// `‖g−g̃‖²/‖g‖² + ‖g⁻¹−g̃⁻¹‖²/‖g⁻¹‖² + ‖g̃⁻¹g̃ − I‖²` in Frobenius norms.
pub fn loss(
    g_true: &DMatrix<f64>,
    ginv_true: &DMatrix<f64>,
    g_pred: &DMatrix<f64>,
    ginv_pred: &DMatrix<f64>,
) -> Result<f64> {
    let d = g_true.nrows();
    for m in [ginv_true, g_pred, ginv_pred] {
        if m.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: m.nrows(),
            });
        }
    }
    let gn = frobenius_sq(g_true);
    let hn = frobenius_sq(ginv_true);
    if gn == 0.0 {
        return Err(Error::DegenerateTarget("zero metric target"));
    }
    if hn == 0.0 {
        return Err(Error::DegenerateTarget("zero cometric target"));
    }
    let t1 = frobenius_sq(&(g_true - g_pred)) / gn;
    let t2 = frobenius_sq(&(ginv_true - ginv_pred)) / hn;
    let t3 = frobenius_sq(&(ginv_pred * g_pred - DMatrix::identity(d, d)));
    Ok(t1 + t2 + t3)
}

/// Training provenance stored alongside the weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub samples: usize,
    pub skipped: usize,
    pub epochs: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub initial_val_loss: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    dim: usize,
    region: Region,
    #[serde(flatten)]
    meta: TrainingMeta,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ModelDocument {
    metricnet: Header,
    layers: Vec<LayerRecord>,
}

#[derive(Clone, Debug)]
pub struct MetricNet {
    dim: usize,
    net: Mlp,
    region: Region,
    pub meta: TrainingMeta,
    /// Per-epoch losses from the run that produced this model; not persisted.
    pub history: Vec<EpochLoss>,
}

impl MetricNet {
    pub fn new(net: Mlp, region: Region, meta: TrainingMeta) -> Result<Self> {
        let dim = net.input_dim();
        if region.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: region.dim(),
            });
        }
        if net.output_dim() != 2 * triangle_len(dim) {
            return Err(Error::InvalidWeights(format!(
                "metric network for d = {dim} must output {} values, got {}",
                2 * triangle_len(dim),
                net.output_dim()
            )));
        }
        Ok(MetricNet {
            dim,
            net,
            region,
            meta,
            history: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    /// Raw symmetrised predictions without positive-definiteness checks.
    pub fn predict_raw(&self, z: &LatentPoint) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        check_dim(self.dim, z.len())?;
        let out = self.net.eval(z.as_slice());
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("metric network output"));
        }
        let t = triangle_len(self.dim);
        Ok((from_upper(self.dim, &out[..t]), from_upper(self.dim, &out[t..])))
    }

    /// Validated `(g̃(z), g̃⁻¹(z))`.
    pub fn predict(&self, z: &LatentPoint) -> Result<(MetricTensor, MetricTensor)> {
        let (g, h) = self.predict_raw(z)?;
        Ok((MetricTensor::new(g)?, MetricTensor::new(h)?))
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            metricnet: Header {
                dim: self.dim,
                region: self.region.clone(),
                meta: self.meta.clone(),
            },
            layers: self.net.to_record().layers,
        };
        serde_json::to_string_pretty(&doc).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("metricnet JSON: {e}")))?;
        let net = Mlp::from_record(&WeightsRecord { layers: doc.layers })?;
        if net.input_dim() != doc.metricnet.dim {
            return Err(Error::InvalidWeights(format!(
                "header dim {} but network input {}",
                doc.metricnet.dim,
                net.input_dim()
            )));
        }
        let region = Region::new(doc.metricnet.region.lo, doc.metricnet.region.hi)
            .map_err(|e| Error::Parse(format!("metricnet region: {e}")))?;
        MetricNet::new(net, region, doc.metricnet.meta)
    }
}
