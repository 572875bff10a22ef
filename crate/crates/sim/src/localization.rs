//! Noise models for relative localization and visual-inertial odometry.

use coguide::frames::{wrap_angle, FrameId, Pose, Transform4Dof, Vec3};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

/// Mean of the norm of a standard 3D Gaussian, `sqrt(8 / pi)`.
pub const MEAN_NORM_3D: f64 = 1.5958;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocMode {
    GroundTruth,
    Noisy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalizationModel {
    pub mode: LocMode,
    /// Mean 3D error norm of the relative position estimate.
    pub rel_mae: f64,
    pub rel_yaw_sigma: f64,
    /// Correlation time of the relative-localization error process in the
    /// simulator; `0` gives independent samples every step.
    pub correlation_time: f64,
    pub vio_pos_drift: f64,
    pub vio_yaw_drift: f64,
}

impl Default for LocalizationModel {
    fn default() -> Self {
        LocalizationModel {
            mode: LocMode::Noisy,
            rel_mae: 0.10,
            rel_yaw_sigma: 0.02,
            correlation_time: 2.0,
            vio_pos_drift: 0.03,
            vio_yaw_drift: 0.003,
        }
    }
}

impl LocalizationModel {
    pub fn ground_truth() -> Self {
        LocalizationModel { mode: LocMode::GroundTruth, ..LocalizationModel::default() }
    }

    /// Per-axis position standard deviation.
    pub fn sigma(&self) -> f64 {
        self.rel_mae / MEAN_NORM_3D
    }

    fn noisy(&self) -> bool {
        self.mode == LocMode::Noisy
    }
}

fn gauss<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma > 0.0 {
        sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
    } else {
        0.0
    }
}

/// Independent perturbation of a relative transform: per-axis Gaussian
/// translation noise and Gaussian yaw noise.
pub fn relative_loc_sample<R: Rng + ?Sized>(true_t: &Transform4Dof, model: &LocalizationModel, rng: &mut R) -> Transform4Dof {
    if !model.noisy() {
        return *true_t;
    }
    let s = model.sigma();
    let dt = Vec3::new(gauss(rng, s), gauss(rng, s), gauss(rng, s));
    Transform4Dof {
        translation: true_t.translation + dt,
        yaw: wrap_angle(true_t.yaw + gauss(rng, model.rel_yaw_sigma)),
        ..*true_t
    }
}

/// Time-correlated relative-localization error: a stationary
/// Ornstein-Uhlenbeck process whose marginal matches
/// [`relative_loc_sample`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RelativeNoise {
    pub offset: Vec3,
    pub yaw: f64,
    started: bool,
}

impl RelativeNoise {
    pub fn step<R: Rng + ?Sized>(&mut self, model: &LocalizationModel, dt: f64, rng: &mut R) {
        if !model.noisy() {
            *self = RelativeNoise::default();
            return;
        }
        let s = model.sigma();
        let sy = model.rel_yaw_sigma;
        if !self.started || model.correlation_time <= 0.0 {
            self.offset = Vec3::new(gauss(rng, s), gauss(rng, s), gauss(rng, s));
            self.yaw = gauss(rng, sy);
            self.started = true;
            return;
        }
        let a = (-dt / model.correlation_time).exp();
        let b = (1.0 - a * a).sqrt();
        self.offset = self.offset * a + Vec3::new(gauss(rng, s), gauss(rng, s), gauss(rng, s)) * b;
        self.yaw = self.yaw * a + gauss(rng, sy) * b;
    }

    pub fn apply(&self, true_t: &Transform4Dof) -> Transform4Dof {
        Transform4Dof {
            translation: true_t.translation + self.offset,
            yaw: wrap_angle(true_t.yaw + self.yaw),
            ..*true_t
        }
    }
}

/// Dead-reckoned pose in the odometry frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VioState {
    pub estimate: Pose,
}

impl VioState {
    pub fn new(initial: Pose) -> Self {
        VioState { estimate: Pose { frame: FrameId::Vio, ..initial } }
    }
}

/// Integrates a true body-frame motion (`body_delta` expressed in the
/// vehicle frame before the motion, `yaw_delta`) into the estimate and, in
/// noisy mode, adds random-walk increments with variance `drift^2 * dt`.
pub fn vio_step<R: Rng + ?Sized>(
    state: &mut VioState,
    body_delta: &Vec3,
    yaw_delta: f64,
    dt: f64,
    model: &LocalizationModel,
    rng: &mut R,
) -> Pose {
    let e = &mut state.estimate;
    let (s, c) = e.heading.sin_cos();
    let world_delta = Vec3::new(c * body_delta.x - s * body_delta.y, s * body_delta.x + c * body_delta.y, body_delta.z);
    let (sp, sy) = if model.noisy() {
        (model.vio_pos_drift * dt.sqrt(), model.vio_yaw_drift * dt.sqrt())
    } else {
        (0.0, 0.0)
    };
    let noise = if sp > 0.0 {
        let n = Normal::new(0.0, sp).expect("finite drift");
        Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng))
    } else {
        Vec3::zeros()
    };
    e.position += world_delta + noise;
    e.heading = wrap_angle(e.heading + yaw_delta + gauss(rng, sy));
    *e
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ground_truth_passthrough() {
        let t = Transform4Dof::new(Vec3::new(1.0, 2.0, 3.0), 0.4, FrameId::Secondary, FrameId::Local);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(relative_loc_sample(&t, &LocalizationModel::ground_truth(), &mut rng), t);
        let zero = LocalizationModel { rel_mae: 0.0, rel_yaw_sigma: 0.0, ..LocalizationModel::default() };
        assert_eq!(relative_loc_sample(&t, &zero, &mut rng), t);
    }

    #[test]
    fn correlated_noise_marginal() {
        let m = LocalizationModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut n = RelativeNoise::default();
        let mut acc = 0.0;
        let k = 200_000;
        for _ in 0..k {
            n.step(&m, 0.05, &mut rng);
            acc += n.offset.norm();
        }
        let mean = acc / k as f64;
        assert!((mean - 0.10).abs() < 0.01, "{mean}");
    }
}
