//! Smooth decoder maps `f: Z → X`, their Jacobians, and projection of
//! ambient observations onto latent coordinates.

mod mlp;
mod projection;

use nalgebra::{DMatrix, DVector};

use crate::dual::{Dual, Scalar};
use crate::error::{check_dim, check_finite, Error, Result};

pub use mlp::{Activation, DenseLayer, LayerRecord, Mlp, WeightsRecord};
pub use projection::{project_to_latent, stereographic_guess, Projection, ProjectionOptions};

/// Latent coordinates `z ∈ Z`.
pub type LatentPoint = DVector<f64>;
/// Data-space coordinates `x ∈ X`.
pub type AmbientPoint = DVector<f64>;

/// A tangent vector together with its base point.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub base: LatentPoint,
    pub vec: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Decoder {
    /// Inverse stereographic projection onto the sphere of the given radius,
    /// `f(z) = R·(2z₁, 2z₂, 1 − |z|²)/(1 + |z|²)`.
    Sphere { radius: f64 },
    /// `f(z) = A z` with `A` of shape n×d.
    Linear { matrix: DMatrix<f64> },
    /// `f(z) = (z, |z|²)`.
    Paraboloid { dim: usize },
    Mlp(Mlp),
}

impl Decoder {
    pub fn sphere(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(format!("sphere radius must be positive, got {radius}")));
        }
        Ok(Decoder::Sphere { radius })
    }

    pub fn linear(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::invalid("empty linear map"));
        }
        check_finite(matrix.as_slice(), "linear map")?;
        Ok(Decoder::Linear { matrix })
    }

    pub fn paraboloid(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("paraboloid dimension must be positive"));
        }
        Ok(Decoder::Paraboloid { dim })
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            Decoder::Sphere { .. } => 2,
            Decoder::Linear { matrix } => matrix.ncols(),
            Decoder::Paraboloid { dim } => *dim,
            Decoder::Mlp(net) => net.input_dim(),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Decoder::Sphere { .. } => 3,
            Decoder::Linear { matrix } => matrix.nrows(),
            Decoder::Paraboloid { dim } => dim + 1,
            Decoder::Mlp(net) => net.output_dim(),
        }
    }

    /// Generic evaluation shared by `decode` and the dual sweeps of `jacobian`.
    pub fn eval<S: Scalar>(&self, z: &[S]) -> Vec<S> {
        match self {
            Decoder::Sphere { radius } => {
                let (a, b) = (z[0], z[1]);
                let s = a * a + b * b;
                let one = S::constant(1.0);
                let denom = one + s;
                vec![
                    (a / denom).scale(2.0 * radius),
                    (b / denom).scale(2.0 * radius),
                    ((one - s) / denom).scale(*radius),
                ]
            }
            Decoder::Linear { matrix } => (0..matrix.nrows())
                .map(|r| {
                    let mut acc = S::constant(0.0);
                    for (c, &zc) in z.iter().enumerate() {
                        acc = acc + zc.scale(matrix[(r, c)]);
                    }
                    acc
                })
                .collect(),
            Decoder::Paraboloid { .. } => {
                let mut out: Vec<S> = z.to_vec();
                let sq = z.iter().fold(S::constant(0.0), |acc, &x| acc + x * x);
                out.push(sq);
                out
            }
            Decoder::Mlp(net) => net.eval(z),
        }
    }
}

pub fn decode(f: &Decoder, z: &LatentPoint) -> Result<AmbientPoint> {
    check_dim(f.latent_dim(), z.len())?;
    check_finite(z.as_slice(), "latent point")?;
    let out = f.eval(z.as_slice());
    check_finite(&out, "decoder output")?;
    Ok(DVector::from_vec(out))
}

/// Exact n×d Jacobian, one forward dual sweep per latent coordinate.
pub fn jacobian(f: &Decoder, z: &LatentPoint) -> Result<DMatrix<f64>> {
    let d = f.latent_dim();
    check_dim(d, z.len())?;
    check_finite(z.as_slice(), "latent point")?;
    let n = f.ambient_dim();
    let mut jac = DMatrix::zeros(n, d);
    let mut seed: Vec<Dual> = z.iter().map(|&v| Dual::new(v, 0.0)).collect();
    for col in 0..d {
        seed[col].eps = 1.0;
        let out = f.eval(&seed);
        seed[col].eps = 0.0;
        for (row, o) in out.iter().enumerate() {
            if !(o.re.is_finite() && o.eps.is_finite()) {
                return Err(Error::NonFinite("decoder Jacobian"));
            }
            jac[(row, col)] = o.eps;
        }
    }
    Ok(jac)
}
