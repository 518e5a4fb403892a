//! Constant-velocity Kalman filter over `(cx, cy, a, h)` box coordinates,
//! where `a` is width / height. The state appends the four per-frame
//! velocities.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;

pub type StateVector = SVector<f64, 8>;
pub type StateCovariance = SMatrix<f64, 8, 8>;
type Measurement = SVector<f64, 4>;
type Observation = SMatrix<f64, 4, 8>;

/// Smallest height / aspect a predicted box may take.
const MIN_EXTENT: f64 = 1e-6;

/// Noise model. Position and velocity deviations scale with box height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KalmanConfig {
    pub std_weight_position: f64,
    pub std_weight_velocity: f64,
    pub std_weight_measurement: f64,
    pub std_aspect: f64,
    pub std_aspect_velocity: f64,
    pub std_aspect_measurement: f64,
    /// Multiplier on the initial velocity deviations.
    pub init_velocity_scale: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        KalmanConfig {
            std_weight_position: 1.0 / 20.0,
            std_weight_velocity: 1.0 / 160.0,
            std_weight_measurement: 1.0 / 20.0,
            std_aspect: 1e-2,
            std_aspect_velocity: 1e-5,
            std_aspect_measurement: 1e-1,
            init_velocity_scale: 10.0,
        }
    }
}

impl KalmanConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.std_weight_position,
            self.std_weight_velocity,
            self.std_weight_measurement,
            self.std_aspect,
            self.std_aspect_velocity,
            self.std_aspect_measurement,
            self.init_velocity_scale,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::Config(
                "kalman noise parameters must be finite and positive".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVector,
    pub covariance: StateCovariance,
}

impl KalmanState {
    pub fn bbox(&self) -> BBox {
        state_to_bbox(&self.mean)
    }
}

pub fn bbox_to_measurement(b: &BBox) -> [f64; 4] {
    let (cx, cy) = b.center();
    [cx, cy, b.aspect(), b.h]
}

/// Converts the position part of a state back to `(x, y, w, h)`. Height and
/// aspect are clamped to a small positive floor so the result is always a
/// valid box.
pub fn state_to_bbox(mean: &StateVector) -> BBox {
    let h = mean[3].max(MIN_EXTENT);
    let w = mean[2].max(MIN_EXTENT) * h;
    BBox {
        x: mean[0] - w / 2.0,
        y: mean[1] - h / 2.0,
        w,
        h,
    }
}

#[derive(Debug, Clone)]
pub struct KalmanFilter {
    config: KalmanConfig,
    motion: StateCovariance,
    observation: Observation,
}

impl Default for KalmanFilter {
    fn default() -> Self {
        Self::new(KalmanConfig::default())
    }
}

impl KalmanFilter {
    pub fn new(config: KalmanConfig) -> Self {
        let mut motion = StateCovariance::identity();
        for i in 0..4 {
            motion[(i, i + 4)] = 1.0;
        }
        let mut observation = Observation::zeros();
        for i in 0..4 {
            observation[(i, i)] = 1.0;
        }
        KalmanFilter {
            config,
            motion,
            observation,
        }
    }

    pub fn config(&self) -> &KalmanConfig {
        &self.config
    }

    /// Starts a track at `b` with zero velocity.
    pub fn init(&self, b: &BBox) -> KalmanState {
        let [cx, cy, a, h] = bbox_to_measurement(b);
        let mean = StateVector::from_column_slice(&[cx, cy, a, h, 0.0, 0.0, 0.0, 0.0]);
        let c = &self.config;
        let pos = 2.0 * c.std_weight_position * h;
        let vel = c.init_velocity_scale * c.std_weight_velocity * h;
        let std = [
            pos,
            pos,
            c.std_aspect,
            pos,
            vel,
            vel,
            c.init_velocity_scale * c.std_aspect_velocity,
            vel,
        ];
        KalmanState {
            mean,
            covariance: StateCovariance::from_diagonal(&SVector::from(std.map(|s| s * s))),
        }
    }

    /// One constant-velocity step. Returns the propagated state and its box.
    pub fn predict(&self, s: &KalmanState) -> (KalmanState, BBox) {
        let c = &self.config;
        let h = s.mean[3].abs().max(MIN_EXTENT);
        let pos = c.std_weight_position * h;
        let vel = c.std_weight_velocity * h;
        let std = [
            pos,
            pos,
            c.std_aspect,
            pos,
            vel,
            vel,
            c.std_aspect_velocity,
            vel,
        ];
        let process = StateCovariance::from_diagonal(&SVector::from(std.map(|s| s * s)));
        let mean = self.motion * s.mean;
        let covariance = symmetrize(self.motion * s.covariance * self.motion.transpose() + process);
        let next = KalmanState { mean, covariance };
        let b = next.bbox();
        (next, b)
    }

    /// Standard Kalman correction toward `observed`.
    pub fn update(&self, s: &KalmanState, observed: &BBox) -> Result<KalmanState> {
        let z = bbox_to_measurement(observed);
        if !z.iter().all(|v| v.is_finite()) || !observed.is_valid() {
            return Err(Error::NonFinite(observed.to_array()));
        }
        let z = Measurement::from(z);
        let c = &self.config;
        let h = s.mean[3].abs().max(MIN_EXTENT);
        let m = c.std_weight_measurement * h;
        let std = [m, m, c.std_aspect_measurement, m];
        let noise = SMatrix::<f64, 4, 4>::from_diagonal(&SVector::from(std.map(|s| s * s)));

        let projected = self.observation * s.covariance * self.observation.transpose() + noise;
        let projected = symmetrize4(projected);
        let chol = projected
            .cholesky()
            .ok_or_else(|| Error::invalid("kalman", "innovation covariance is not positive definite"))?;
        // K = P H^T S^-1, solved as S K^T = H P.
        let gain = chol.solve(&(self.observation * s.covariance)).transpose();
        let innovation = z - self.observation * s.mean;
        let mean = s.mean + gain * innovation;
        let covariance = symmetrize(s.covariance - gain * projected * gain.transpose());
        Ok(KalmanState { mean, covariance })
    }
}

fn symmetrize(m: StateCovariance) -> StateCovariance {
    (m + m.transpose()) * 0.5
}

fn symmetrize4(m: SMatrix<f64, 4, 4>) -> SMatrix<f64, 4, 4> {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    fn position_trace(c: &StateCovariance) -> f64 {
        (0..4).map(|i| c[(i, i)]).sum()
    }

    #[test]
    fn init_mean_and_round_trip() {
        let kf = KalmanFilter::default();
        let b = bb(0.0, 0.0, 10.0, 20.0);
        let s = kf.init(&b);
        assert_eq!(s.mean.as_slice(), &[5.0, 10.0, 0.5, 20.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.bbox(), b);
        assert!((0..8).all(|i| s.covariance[(i, i)] > 0.0));
    }

    #[test]
    fn zero_velocity_is_fixed_point() {
        let kf = KalmanFilter::default();
        let b = bb(12.0, 7.0, 30.0, 40.0);
        let (_, p) = kf.predict(&kf.init(&b));
        assert_eq!(p, b);
    }

    #[test]
    fn one_linear_step() {
        let kf = KalmanFilter::default();
        let mut s = kf.init(&bb(0.0, 0.0, 10.0, 20.0));
        s.mean[4] = 2.0;
        let (next, _) = kf.predict(&s);
        assert_eq!(next.mean[0], 7.0);
    }

    #[test]
    fn zero_innovation_keeps_mean() {
        let kf = KalmanFilter::default();
        let s = kf.init(&bb(10.0, 10.0, 20.0, 40.0));
        let (pred, pbox) = kf.predict(&s);
        let post = kf.update(&pred, &pbox).unwrap();
        for i in 0..8 {
            assert!((post.mean[i] - pred.mean[i]).abs() < 1e-9);
        }
        assert!(position_trace(&post.covariance) <= position_trace(&pred.covariance));
    }

    #[test]
    fn tiny_measurement_noise_snaps_to_observation() {
        let kf = KalmanFilter::new(KalmanConfig {
            std_weight_measurement: 1e-9,
            std_aspect_measurement: 1e-12,
            ..KalmanConfig::default()
        });
        let s = kf.init(&bb(0.0, 0.0, 20.0, 40.0));
        let (pred, _) = kf.predict(&s);
        let far = bb(400.0, 300.0, 30.0, 45.0);
        let post = kf.update(&pred, &far).unwrap();
        let z = bbox_to_measurement(&far);
        for i in 0..4 {
            assert!((post.mean[i] - z[i]).abs() < 1e-6, "{i}: {} vs {}", post.mean[i], z[i]);
        }
    }

    #[test]
    fn non_finite_observation_rejected() {
        let kf = KalmanFilter::default();
        let s = kf.init(&bb(0.0, 0.0, 20.0, 40.0));
        let bad = BBox { x: f64::NAN, y: 0.0, w: 1.0, h: 1.0 };
        assert!(matches!(kf.update(&s, &bad), Err(Error::NonFinite(_))));
    }

    /// Oracle: simulate the filter on a box moving exactly +3 px per frame
    /// and compare each one-step prediction with the true next position.
    fn constant_velocity_errors(frames: usize) -> Vec<f64> {
        let kf = KalmanFilter::default();
        let truth = |t: usize| bb(100.0 + 3.0 * t as f64, 50.0, 40.0, 80.0);
        let mut s = kf.init(&truth(0));
        let mut errors = Vec::new();
        for t in 1..=frames {
            let (pred, pbox) = kf.predict(&s);
            errors.push((pbox.center().0 - truth(t).center().0).abs());
            s = kf.update(&pred, &truth(t)).unwrap();
        }
        errors
    }

    #[test]
    fn constant_velocity_converges() {
        let errors = constant_velocity_errors(12);
        assert!(errors[9] < 0.5, "{errors:?}");
        for w in errors[2..].windows(2) {
            assert!(w[1] <= w[0], "{errors:?}");
        }
        assert!(errors[..10].iter().any(|e| *e < 1.0));
    }

    proptest! {
        #[test]
        fn round_trip_through_state(x in -500.0..500.0f64, y in -500.0..500.0f64,
                                    w in 0.5..400.0f64, h in 0.5..400.0f64) {
            let b = bb(x, y, w, h);
            let back = KalmanFilter::default().init(&b).bbox();
            for (u, v) in b.to_array().iter().zip(back.to_array()) {
                prop_assert!((u - v).abs() <= 1e-9 * (1.0 + u.abs()));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn covariance_stays_spd(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let kf = KalmanFilter::default();
            let mut s = kf.init(&bb(100.0, 100.0, 40.0, 60.0));
            for _ in 0..1000 {
                let (pred, _) = kf.predict(&s);
                let obs = bb(
                    rng.random_range(0.0..1000.0),
                    rng.random_range(0.0..1000.0),
                    rng.random_range(1.0..200.0),
                    rng.random_range(1.0..200.0),
                );
                s = kf.update(&pred, &obs).unwrap();
                let asym = (s.covariance - s.covariance.transpose()).abs().max();
                prop_assert!(asym <= 1e-9);
                let min_eig = s.covariance.symmetric_eigenvalues().min();
                prop_assert!(min_eig > 0.0, "min eigenvalue {min_eig}");
            }
        }
    }
}
