//! Riemannian Brownian motion in latent coordinates, guided bridges,
//! Monte-Carlo transition densities and maximum-likelihood means.

mod density;
mod mle;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::geometry::{local_geometry, LocalGeometry, MetricProvider};
use crate::linalg::bilinear;
use crate::smoothmap::LatentPoint;

pub use density::{log_likelihood, transition_density, DensityEstimate};
pub use mle::{ml_mean, MleOptions, MleResult, MleStep};

/// Guidance magnitudes `|z − v|/(T − t)` above this abort the bridge.
pub const GUIDANCE_LIMIT: f64 = 1e10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Drift {
    /// `b^j = −½ g^{kl} Γ^j_{kl}`, the generator `½Δ`.
    #[default]
    Standard,
    /// `b^j = g^{kl} Γ^j_{kl}`, kept for comparison only.
    Paper,
}

/// Time horizon, step count and drift convention of a simulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diffusion {
    pub horizon: f64,
    pub steps: usize,
    pub drift: Drift,
}

impl Diffusion {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        let d = Diffusion {
            horizon,
            steps,
            drift: Drift::Standard,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn with_drift(mut self, drift: Drift) -> Self {
        self.drift = drift;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid(format!("time horizon must be positive, got {}", self.horizon)));
        }
        if self.steps < 10 {
            return Err(Error::invalid(format!("at least 10 steps required, got {}", self.steps)));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        let mut t: Vec<f64> = (0..=self.steps).map(|k| k as f64 * dt).collect();
        t[self.steps] = self.horizon;
        t
    }
}

/// Identifies one independent noise stream. Streams depend only on these
/// three numbers, never on scheduling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSeed {
    pub seed: u64,
    pub data_index: u32,
    pub path_index: u32,
}

impl PathSeed {
    pub fn new(seed: u64, data_index: u32, path_index: u32) -> Self {
        PathSeed {
            seed,
            data_index,
            path_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((self.data_index as u64) << 32) | self.path_index as u64);
        rng
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub points: Vec<LatentPoint>,
    pub seed: PathSeed,
}

impl PathSample {
    pub fn endpoint(&self) -> &LatentPoint {
        self.points.last().expect("paths have at least two nodes")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BridgeSample {
    pub path: PathSample,
    pub target: LatentPoint,
    pub log_phi: f64,
    /// Distance from the target of the unforced last Euler step.
    pub terminal_gap: f64,
}

fn drift(geo: &LocalGeometry, kind: Drift) -> DVector<f64> {
    let tr = geo.christoffel.trace(geo.cometric.matrix());
    match kind {
        Drift::Standard => tr * -0.5,
        Drift::Paper => tr,
    }
}

fn normals(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample(StandardNormal))
}

fn check_state(z: &LatentPoint) -> Result<()> {
    check_finite(z.as_slice(), "diffusion state")
}

/// Euler–Maruyama simulation of Brownian motion started at `x`:
/// `z ← z + b Δt + L √Δt ξ` with `L Lᵀ = g⁻¹`.
pub fn simulate_bm(p: &MetricProvider, x: &LatentPoint, diff: &Diffusion, seed: PathSeed) -> Result<PathSample> {
    diff.validate()?;
    check_dim(p.dim(), x.len())?;
    let dt = diff.dt();
    let sq = dt.sqrt();
    let mut rng = seed.rng();
    let mut z = x.clone();
    let mut points = Vec::with_capacity(diff.steps + 1);
    points.push(z.clone());
    for _ in 0..diff.steps {
        let geo = local_geometry(p, &z)?;
        let b = drift(&geo, diff.drift);
        let l = geo.cometric.cholesky_lower();
        let xi = normals(&mut rng, z.len());
        z += b * dt + l * xi * sq;
        check_state(&z)?;
        points.push(z.clone());
    }
    Ok(PathSample {
        times: diff.times(),
        points,
        seed,
    })
}

/// Guided bridge from `x` to `v`: Euler–Maruyama on
/// `dz = b dt − (z − v)/(T − t) dt + L dB`, with the last node set to `v`.
///
/// `log_phi` accumulates
/// `−Σ_k (z_k − v)ᵀ g(z_k) b(z_k) Δt/(T − t_k)
///  − Σ_k (z_{k+1} − v)ᵀ (g(z_{k+1}) − g(z_k)) (z_{k+1} − v) / (2(T − t_{k+1}))`,
/// the second sum running over interior nodes only.
pub fn simulate_bridge(
    p: &MetricProvider,
    x: &LatentPoint,
    v: &LatentPoint,
    diff: &Diffusion,
    seed: PathSeed,
) -> Result<BridgeSample> {
    diff.validate()?;
    check_dim(p.dim(), x.len())?;
    check_dim(p.dim(), v.len())?;
    check_finite(v.as_slice(), "bridge target")?;
    let times = diff.times();
    let dt = diff.dt();
    let sq = dt.sqrt();
    let k_last = diff.steps - 1;
    let mut rng = seed.rng();
    let mut z = x.clone();
    let mut points = Vec::with_capacity(diff.steps + 1);
    points.push(z.clone());
    let mut log_phi = 0.0;
    let mut terminal_gap = 0.0;
    let mut g_prev: Option<nalgebra::DMatrix<f64>> = None;

    for k in 0..diff.steps {
        let geo = local_geometry(p, &z)?;
        let g = geo.metric.matrix();
        let rem = diff.horizon - times[k];
        let offset = &z - v;
        if let Some(gp) = &g_prev {
            log_phi -= bilinear(&offset, &(g - gp), &offset) / (2.0 * rem);
        }
        let b = drift(&geo, diff.drift);
        let magnitude = offset.norm() / rem;
        if !(magnitude <= GUIDANCE_LIMIT) {
            return Err(Error::GuidanceOverflow { t: times[k], magnitude });
        }
        log_phi -= bilinear(&offset, g, &b) * dt / rem;

        let l = geo.cometric.cholesky_lower();
        let xi = normals(&mut rng, z.len());
        let next = &z + &b * dt - &offset * (dt / rem) + l * xi * sq;
        check_state(&next)?;
        if k == k_last {
            terminal_gap = (&next - v).norm();
            z = v.clone();
        } else {
            z = next;
            g_prev = Some(geo.metric.into_matrix());
        }
        points.push(z.clone());
    }
    if !log_phi.is_finite() {
        return Err(Error::NonFinite("bridge log-correction"));
    }
    Ok(BridgeSample {
        path: PathSample { times, points, seed },
        target: v.clone(),
        log_phi,
        terminal_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothmap::Decoder;
    use nalgebra::{dvector, DMatrix};

    fn flat() -> MetricProvider {
        MetricProvider::exact(Decoder::linear(DMatrix::identity(2, 2)).unwrap())
    }

    #[test]
    fn same_seed_same_path() {
        let p = MetricProvider::exact(Decoder::sphere(1.0).unwrap());
        let diff = Diffusion::new(0.5, 50).unwrap();
        let a = simulate_bm(&p, &dvector![0.1, 0.2], &diff, PathSeed::new(9, 0, 3)).unwrap();
        let b = simulate_bm(&p, &dvector![0.1, 0.2], &diff, PathSeed::new(9, 0, 3)).unwrap();
        assert_eq!(a, b);
        let c = simulate_bm(&p, &dvector![0.1, 0.2], &diff, PathSeed::new(9, 0, 4)).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn bridge_ends_at_target() {
        let p = MetricProvider::exact(Decoder::sphere(1.0).unwrap());
        let diff = Diffusion::new(1.0, 40).unwrap();
        let v = dvector![0.3, -0.2];
        let s = simulate_bridge(&p, &dvector![0.0, 0.0], &v, &diff, PathSeed::new(1, 2, 3)).unwrap();
        assert_eq!(s.path.endpoint(), &v);
        assert_eq!(s.path.times.len(), 41);
        assert_eq!(*s.path.times.last().unwrap(), 1.0);
        assert!(s.log_phi.is_finite());
    }

    #[test]
    fn flat_bridge_has_no_correction() {
        let s = simulate_bridge(&flat(), &dvector![1.0, 0.0], &dvector![0.0, 0.5], &Diffusion::new(1.0, 20).unwrap(), PathSeed::new(4, 0, 0)).unwrap();
        assert!(s.log_phi.abs() < 1e-12);
    }

    #[test]
    fn flat_increments_are_unit_normals() {
        let diff = Diffusion::new(1.0, 10).unwrap();
        let path = simulate_bm(&flat(), &dvector![0.0, 0.0], &diff, PathSeed::new(2, 0, 0)).unwrap();
        let mut rng = PathSeed::new(2, 0, 0).rng();
        let mut z = dvector![0.0, 0.0];
        for k in 1..=10 {
            z += normals(&mut rng, 2) * diff.dt().sqrt();
            assert!((&path.points[k] - &z).amax() < 1e-12);
        }
    }

    #[test]
    fn invalid_diffusions_rejected() {
        assert!(Diffusion::new(0.0, 100).is_err());
        assert!(Diffusion::new(1.0, 9).is_err());
        assert!(Diffusion::new(f64::NAN, 100).is_err());
    }
}
