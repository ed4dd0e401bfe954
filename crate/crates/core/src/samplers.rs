//! Synthetic point clouds: circle, torus and double torus with Gaussian noise.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)` with the ChaCha
//! stream set to `stream`; experiments give cloud `i` the stream `i`, so any
//! cloud can be regenerated on its own.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homology::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Circle {
        radius: f64,
    },
    /// `major` is the radius of the center circle, `minor` the tube radius.
    Torus {
        major: f64,
        minor: f64,
    },
    /// Two tori touching at the origin, centers at `x = +-(major + minor)`.
    DoubleTorus {
        major: f64,
        minor: f64,
    },
}

impl Shape {
    pub fn torus() -> Self {
        Shape::Torus {
            major: 2.0,
            minor: 0.5,
        }
    }

    pub fn double_torus() -> Self {
        Shape::DoubleTorus {
            major: 2.0,
            minor: 0.5,
        }
    }

    pub fn circle() -> Self {
        Shape::Circle { radius: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Circle { radius } => radius > 0.0 && radius.is_finite(),
            Shape::Torus { major, minor } | Shape::DoubleTorus { major, minor } => {
                major > 0.0 && minor > 0.0 && major.is_finite() && minor.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "shape radii must be positive: {self:?}"
            )))
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Shape::Circle { .. } => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub shape: Shape,
    pub n: usize,
    pub noise_sd: f64,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

impl SamplerSpec {
    pub fn new(shape: Shape, n: usize, noise_sd: f64, seed: u64) -> Self {
        SamplerSpec {
            shape,
            n,
            noise_sd,
            seed,
            stream: 0,
        }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        if self.n == 0 {
            return Err(Error::InvalidInput(
                "a cloud needs at least one point".into(),
            ));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "noise standard deviation must be nonnegative, got {}",
                self.noise_sd
            )));
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Tube angle on a torus, drawn with density proportional to `major + minor cos(theta)`.
pub fn torus_tube_angle<R: Rng + ?Sized>(rng: &mut R, major: f64, minor: f64) -> f64 {
    loop {
        let theta = rng.random_range(0.0..TAU);
        let accept: f64 = rng.random();
        if accept * (major + minor) <= major + minor * theta.cos() {
            return theta;
        }
    }
}

fn torus_point<R: Rng + ?Sized>(rng: &mut R, major: f64, minor: f64) -> [f64; 3] {
    let theta = torus_tube_angle(rng, major, minor);
    let phi = rng.random_range(0.0..TAU);
    let ring = major + minor * theta.cos();
    [ring * phi.cos(), ring * phi.sin(), minor * theta.sin()]
}

/// Point drawn area-uniformly from the noiseless surface.
pub fn surface_point<R: Rng + ?Sized>(rng: &mut R, shape: &Shape) -> Vec<f64> {
    match *shape {
        Shape::Circle { radius } => {
            let a = rng.random_range(0.0..TAU);
            vec![radius * a.cos(), radius * a.sin()]
        }
        Shape::Torus { major, minor } => torus_point(rng, major, minor).to_vec(),
        Shape::DoubleTorus { major, minor } => {
            // both components have the same area
            let offset = if rng.random::<bool>() {
                major + minor
            } else {
                -(major + minor)
            };
            let [x, y, z] = torus_point(rng, major, minor);
            vec![x + offset, y, z]
        }
    }
}

pub fn sample_cloud(spec: &SamplerSpec) -> Result<PointCloud> {
    spec.validate()?;
    let mut rng = spec.rng();
    let dim = spec.shape.ambient_dim();
    let noise =
        Normal::new(0.0, spec.noise_sd).map_err(|e| Error::InvalidInput(format!("noise: {e}")))?;
    let mut coords = Vec::with_capacity(spec.n * dim);
    for _ in 0..spec.n {
        let p = surface_point(&mut rng, &spec.shape);
        coords.extend(p.into_iter().map(|c| {
            if spec.noise_sd > 0.0 {
                c + noise.sample(&mut rng)
            } else {
                c
            }
        }));
    }
    Ok(PointCloud::from_flat(dim, coords))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_circle_points_have_unit_norm() {
        let spec = SamplerSpec::new(Shape::circle(), 4, 0.0, 3);
        let cloud = sample_cloud(&spec).unwrap();
        assert_eq!(cloud.len(), 4);
        for p in cloud.points() {
            assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_torus_points_satisfy_the_implicit_equation() {
        let (major, minor) = (2.0, 0.5);
        let spec = SamplerSpec::new(Shape::Torus { major, minor }, 500, 0.0, 9);
        for p in sample_cloud(&spec).unwrap().points() {
            let residual = (p[0].hypot(p[1]) - major).powi(2) + p[2] * p[2] - minor * minor;
            assert!(residual.abs() < 1e-9);
        }
    }

    #[test]
    fn double_torus_points_lie_on_one_of_the_tori() {
        let (major, minor) = (2.0, 0.5);
        let spec = SamplerSpec::new(Shape::DoubleTorus { major, minor }, 400, 0.0, 1);
        let mut sides = [0, 0];
        for p in sample_cloud(&spec).unwrap().points() {
            let side = usize::from(p[0] > 0.0);
            let cx = if side == 1 {
                major + minor
            } else {
                -(major + minor)
            };
            let residual = ((p[0] - cx).hypot(p[1]) - major).powi(2) + p[2] * p[2] - minor * minor;
            assert!(residual.abs() < 1e-9);
            sides[side] += 1;
        }
        assert!(sides[0] > 150 && sides[1] > 150);
    }

    #[test]
    fn same_seed_same_cloud() {
        let spec = SamplerSpec::new(Shape::torus(), 50, 0.3, 42);
        assert_eq!(sample_cloud(&spec).unwrap(), sample_cloud(&spec).unwrap());
        let other = spec.with_stream(1);
        assert_ne!(sample_cloud(&spec).unwrap(), sample_cloud(&other).unwrap());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(sample_cloud(&SamplerSpec::new(Shape::torus(), 0, 0.0, 1)).is_err());
        assert!(sample_cloud(&SamplerSpec::new(Shape::torus(), 5, -1.0, 1)).is_err());
        assert!(sample_cloud(&SamplerSpec::new(Shape::Circle { radius: 0.0 }, 5, 0.0, 1)).is_err());
    }

    fn chi_square(counts: &[usize], probs: &[f64]) -> f64 {
        let total: usize = counts.iter().sum();
        counts
            .iter()
            .zip(probs)
            .map(|(&c, &p)| {
                let expected = p * total as f64;
                (c as f64 - expected).powi(2) / expected
            })
            .sum()
    }

    #[test]
    fn torus_angles_are_area_uniform() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let (major, minor) = (2.0, 0.5);
        let spec = SamplerSpec::new(Shape::Torus { major, minor }, 40_000, 0.0, 11);
        let bins = 16;
        let mut tube = vec![0usize; bins];
        let mut around = vec![0usize; bins];
        let bin = |a: f64| ((a.rem_euclid(TAU) / TAU * bins as f64) as usize).min(bins - 1);
        for p in sample_cloud(&spec).unwrap().points() {
            let ring = p[0].hypot(p[1]);
            tube[bin(p[2].atan2(ring - major))] += 1;
            around[bin(p[1].atan2(p[0]))] += 1;
        }
        // P(theta in [a, b]) = (major (b - a) + minor (sin b - sin a)) / (2 pi major)
        let width = TAU / bins as f64;
        let tube_probs: Vec<f64> = (0..bins)
            .map(|i| {
                let (a, b) = (i as f64 * width, (i + 1) as f64 * width);
                (major * width + minor * (b.sin() - a.sin())) / (TAU * major)
            })
            .collect();
        let flat = vec![1.0 / bins as f64; bins];
        let critical = ChiSquared::new((bins - 1) as f64)
            .unwrap()
            .inverse_cdf(0.999);
        assert!(chi_square(&tube, &tube_probs) < critical);
        assert!(chi_square(&around, &flat) < critical);
        // the uniform-angle alternative is rejected
        assert!(chi_square(&tube, &flat) > critical);
    }

    #[test]
    fn noise_has_the_requested_variance() {
        // a vanishing circle leaves only the noise
        let sd = 0.7;
        let spec = SamplerSpec::new(Shape::Circle { radius: 1e-12 }, 20_000, sd, 5);
        let cloud = sample_cloud(&spec).unwrap();
        for axis in 0..2 {
            let xs: Vec<f64> = cloud.points().map(|p| p[axis]).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            assert!(mean.abs() < 0.03, "mean {mean}");
            assert!((var / (sd * sd) - 1.0).abs() < 0.05, "variance {var}");
        }
    }

    #[test]
    fn streams_give_independent_clouds() {
        let spec = SamplerSpec::new(Shape::torus(), 10, 0.1, 4);
        let a = sample_cloud(&spec.with_stream(0)).unwrap();
        let b = sample_cloud(&spec.with_stream(1)).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, sample_cloud(&spec).unwrap());
    }
}
