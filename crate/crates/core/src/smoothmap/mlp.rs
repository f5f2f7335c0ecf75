use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dual::Scalar;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Softplus,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Softplus => {
                if x.re() > 0.0 {
                    x + (-x).exp().ln_1p()
                } else {
                    x.exp().ln_1p()
                }
            }
            Activation::Sigmoid => {
                let one = S::constant(1.0);
                if x.re() >= 0.0 {
                    one / (one + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (one + e)
                }
            }
            Activation::Identity => x,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Softplus => "softplus",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "softplus" => Ok(Activation::Softplus),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::InvalidWeights(format!("unknown activation {other:?}"))),
        }
    }
}

/// `y = act(W x + b)` with `W` stored `rows = out`, `cols = in`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: DMatrix<f64>, bias: DVector<f64>, activation: Activation) -> Result<Self> {
        if weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(Error::InvalidWeights("empty layer".into()));
        }
        if bias.len() != weights.nrows() {
            return Err(Error::InvalidWeights(format!(
                "bias length {} does not match {} rows",
                bias.len(),
                weights.nrows()
            )));
        }
        if !weights.iter().chain(bias.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidWeights("non-finite weight".into()));
        }
        Ok(DenseLayer {
            weights,
            bias,
            activation,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    fn forward<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let (rows, cols) = self.weights.shape();
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            let mut acc = S::constant(self.bias[r]);
            for c in 0..cols {
                acc = acc + x[c].scale(self.weights[(r, c)]);
            }
            out.push(self.activation.apply(acc));
        }
        out
    }
}

/// Fully connected network; the layer list is never empty.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidWeights("network has no layers".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::InvalidWeights(format!(
                    "layer {} outputs {} but layer {} expects {}",
                    i,
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                )));
            }
        }
        Ok(Mlp { layers })
    }

    /// Gaussian initialisation with variance `1/fan_in`; hidden layers use
    /// `hidden`, the last layer `output`.
    pub fn random(sizes: &[usize], hidden: Activation, output: Activation, seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid(format!("invalid layer sizes {sizes:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (i, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let normal = Normal::new(0.0, (1.0 / fan_in as f64).sqrt()).expect("valid std");
            let weights = DMatrix::from_fn(fan_out, fan_in, |_, _| normal.sample(&mut rng));
            let bias = DVector::from_fn(fan_out, |_, _| 0.1 * normal.sample(&mut rng));
            let act = if i + 2 == sizes.len() { output } else { hidden };
            layers.push(DenseLayer::new(weights, bias, act)?);
        }
        Mlp::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let mut h = self.layers[0].forward(x);
        for layer in &self.layers[1..] {
            h = layer.forward(&h);
        }
        h
    }

    pub fn to_record(&self) -> WeightsRecord {
        WeightsRecord {
            layers: self.layers.iter().map(LayerRecord::from_layer).collect(),
        }
    }

    pub fn from_record(record: &WeightsRecord) -> Result<Self> {
        let layers = record
            .layers
            .iter()
            .map(LayerRecord::to_layer)
            .collect::<Result<Vec<_>>>()?;
        Mlp::new(layers)
    }

    /// Parses the shared weights JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let record: WeightsRecord =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("weights JSON: {e}")))?;
        Mlp::from_record(&record)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_record()).expect("weights serialise")
    }
}

/// On-disk layer: row-major weights, `rows` outputs by `cols` inputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerRecord {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: String,
}

impl LayerRecord {
    fn from_layer(layer: &DenseLayer) -> Self {
        let (rows, cols) = layer.weights.shape();
        let mut weights = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                weights.push(layer.weights[(r, c)]);
            }
        }
        LayerRecord {
            rows,
            cols,
            weights,
            bias: layer.bias.iter().copied().collect(),
            activation: layer.activation.to_string(),
        }
    }

    fn to_layer(&self) -> Result<DenseLayer> {
        let expected = self
            .rows
            .checked_mul(self.cols)
            .ok_or_else(|| Error::InvalidWeights("layer size overflow".into()))?;
        if self.weights.len() != expected {
            return Err(Error::InvalidWeights(format!(
                "{}x{} layer carries {} weights",
                self.rows,
                self.cols,
                self.weights.len()
            )));
        }
        let activation = self.activation.parse()?;
        DenseLayer::new(
            DMatrix::from_row_slice(self.rows, self.cols, &self.weights),
            DVector::from_column_slice(&self.bias),
            activation,
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightsRecord {
    pub layers: Vec<LayerRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_exact() {
        let net = Mlp::random(&[2, 5, 3], Activation::Tanh, Activation::Sigmoid, 3).unwrap();
        let back = Mlp::from_json(&net.to_json()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn rejects_bad_documents() {
        let cases = [
            r#"{"layers":[]}"#,
            r#"{"layers":[{"rows":2,"cols":2,"weights":[1,2,3],"bias":[0,0],"activation":"tanh"}]}"#,
            r#"{"layers":[{"rows":2,"cols":2,"weights":[1,2,3,4],"bias":[0],"activation":"tanh"}]}"#,
            r#"{"layers":[{"rows":1,"cols":1,"weights":[1],"bias":[0],"activation":"relu"}]}"#,
            r#"{"layers":[{"rows":2,"cols":1,"weights":[1,1],"bias":[0,0],"activation":"tanh"},
                          {"rows":1,"cols":3,"weights":[1,1,1],"bias":[0],"activation":"identity"}]}"#,
            r#"{"layers":"#,
        ];
        for c in cases {
            assert!(Mlp::from_json(c).is_err(), "accepted {c}");
        }
    }

    #[test]
    fn activations_are_stable_at_extremes() {
        for act in [Activation::Softplus, Activation::Sigmoid, Activation::Tanh] {
            for x in [-800.0, -30.0, 0.0, 30.0, 800.0] {
                assert!(act.apply(x).is_finite(), "{act} at {x}");
            }
        }
        assert!((Activation::Softplus.apply(800.0) - 800.0).abs() < 1e-9);
    }
}
