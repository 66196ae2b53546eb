//! Constant-velocity Kalman filter over `(cx, cy, a, h)` box states, the
//! confidence-scaled (NSA) measurement update, and camera-motion warps.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{matmul, symmetrize, transpose, SquareMatrix};
use crate::scalar::Scalar;

pub const STATE_DIM: usize = 8;
pub const MEAS_DIM: usize = 4;

pub type Mat8<T> = [[T; STATE_DIM]; STATE_DIM];

/// Mean `(cx, cy, a, h, vcx, vcy, va, vh)` and its covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState<T> {
    pub mean: [T; STATE_DIM],
    pub cov: Mat8<T>,
}

impl<T: Scalar> KalmanState<T> {
    pub fn measurement(&self) -> [T; MEAS_DIM] {
        [self.mean[0], self.mean[1], self.mean[2], self.mean[3]]
    }

    /// Largest asymmetry `|P[i][j] - P[j][i]|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..STATE_DIM {
            for j in 0..STATE_DIM {
                worst = worst.max((self.cov[i][j] - self.cov[j][i]).abs());
            }
        }
        worst
    }
}

/// Height-proportional noise model of the constant-velocity filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanFilter<T> {
    pub std_weight_position: T,
    pub std_weight_velocity: T,
}

impl<T: Scalar> Default for KalmanFilter<T> {
    fn default() -> Self {
        KalmanFilter {
            std_weight_position: T::lit(1.0 / 20.0),
            std_weight_velocity: T::lit(1.0 / 160.0),
        }
    }
}

fn diag_sq<T: Scalar, const N: usize>(std: [T; N]) -> [[T; N]; N] {
    let mut m = [[T::zero(); N]; N];
    for i in 0..N {
        m[i][i] = std[i] * std[i];
    }
    m
}

/// Constant-velocity transition: position components advance by their velocity.
pub fn transition<T: Scalar>() -> Mat8<T> {
    let mut f = [[T::zero(); STATE_DIM]; STATE_DIM];
    for i in 0..STATE_DIM {
        f[i][i] = T::one();
    }
    for i in 0..MEAS_DIM {
        f[i][i + MEAS_DIM] = T::one();
    }
    f
}

impl<T: Scalar> KalmanFilter<T> {
    pub fn initiate(&self, z: &[T; MEAS_DIM]) -> Result<KalmanState<T>> {
        let h = z[3];
        if !(h > T::zero()) {
            return Err(Error::invalid(format!("measurement height must be positive, got {h}")));
        }
        let two = T::lit(2.0);
        let ten = T::lit(10.0);
        let (sp, sv) = (self.std_weight_position, self.std_weight_velocity);
        let std = [
            two * sp * h,
            two * sp * h,
            T::lit(1e-2),
            two * sp * h,
            ten * sv * h,
            ten * sv * h,
            T::lit(1e-5),
            ten * sv * h,
        ];
        let mut mean = [T::zero(); STATE_DIM];
        mean[..MEAS_DIM].copy_from_slice(z);
        Ok(KalmanState {
            mean,
            cov: diag_sq(std),
        })
    }

    /// Process noise for a state whose current height is `h`.
    pub fn process_noise(&self, h: T) -> Mat8<T> {
        let (sp, sv) = (self.std_weight_position, self.std_weight_velocity);
        diag_sq([
            sp * h,
            sp * h,
            T::lit(1e-2),
            sp * h,
            sv * h,
            sv * h,
            T::lit(1e-5),
            sv * h,
        ])
    }

    /// Measurement noise for a predicted height `h`, before any confidence scaling.
    pub fn measurement_noise(&self, h: T) -> [[T; MEAS_DIM]; MEAS_DIM] {
        let sp = self.std_weight_position;
        diag_sq([sp * h, sp * h, T::lit(1e-1), sp * h])
    }

    pub fn predict(&self, s: &KalmanState<T>) -> KalmanState<T> {
        let f = transition::<T>();
        let mut mean = [T::zero(); STATE_DIM];
        for i in 0..STATE_DIM {
            mean[i] = (0..STATE_DIM).fold(T::zero(), |acc, k| acc + f[i][k] * s.mean[k]);
        }
        let mut cov = matmul(&matmul(&f, &s.cov), &transpose(&f));
        let q = self.process_noise(s.mean[3]);
        for i in 0..STATE_DIM {
            cov[i][i] += q[i][i];
        }
        symmetrize(&mut cov);
        KalmanState { mean, cov }
    }

    /// Measurement update. With `nsa`, the measurement noise is scaled by
    /// `1 - score` so confident detections pull the state harder; a score of
    /// 1 makes the measured components equal the measurement.
    pub fn update(&self, s: &KalmanState<T>, z: &[T; MEAS_DIM], score: T, nsa: bool) -> Result<KalmanState<T>> {
        if !(score >= T::zero() && score <= T::one()) {
            return Err(Error::invalid(format!("score {score} outside [0, 1]")));
        }
        let mut r = self.measurement_noise(s.mean[3]);
        if nsa {
            let scale = T::one() - score;
            for row in r.iter_mut() {
                for v in row.iter_mut() {
                    *v *= scale;
                }
            }
        }
        // S = H P Hᵀ + R, with H selecting the first four components.
        let innovation_cov = SquareMatrix::from_fn(MEAS_DIM, |i, j| s.cov[i][j] + r[i][j]);
        let chol = innovation_cov
            .cholesky()
            .map_err(|e| Error::Numerical(format!("singular innovation covariance: {e}")))?;

        // Kᵀ = S⁻¹ (H P), one column of H P at a time.
        let mut gain_t = [[T::zero(); STATE_DIM]; MEAS_DIM];
        for col in 0..STATE_DIM {
            let mut rhs = [s.cov[0][col], s.cov[1][col], s.cov[2][col], s.cov[3][col]];
            chol.solve_in_place(&mut rhs);
            for row in 0..MEAS_DIM {
                gain_t[row][col] = rhs[row];
            }
        }
        let gain = transpose(&gain_t);

        let mut innovation = [T::zero(); MEAS_DIM];
        for i in 0..MEAS_DIM {
            innovation[i] = z[i] - s.mean[i];
        }
        let mut mean = s.mean;
        for i in 0..STATE_DIM {
            for k in 0..MEAS_DIM {
                mean[i] += gain[i][k] * innovation[k];
            }
        }

        // P' = P - K S Kᵀ = P - K (H P)
        let mut cov = s.cov;
        for i in 0..STATE_DIM {
            for j in 0..STATE_DIM {
                let mut acc = T::zero();
                for k in 0..MEAS_DIM {
                    acc += gain[i][k] * s.cov[k][j];
                }
                cov[i][j] -= acc;
            }
        }
        symmetrize(&mut cov);

        if nsa && score == T::one() {
            // zero measurement noise: the posterior sits on the measurement
            mean[..MEAS_DIM].copy_from_slice(z);
            for i in 0..MEAS_DIM {
                for j in 0..STATE_DIM {
                    cov[i][j] = T::zero();
                    cov[j][i] = T::zero();
                }
            }
        }
        for (i, row) in cov.iter_mut().enumerate() {
            if row[i] < T::zero() {
                row[i] = T::zero();
            }
        }
        Ok(KalmanState { mean, cov })
    }
}

/// Affine map from previous-frame pixel coordinates to current-frame ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpMatrix<T> {
    pub frame: u32,
    /// Row-major `[[a11, a12, a13], [a21, a22, a23]]`.
    pub m: [[T; 3]; 2],
}

impl<T: Scalar> WarpMatrix<T> {
    pub fn identity(frame: u32) -> Self {
        WarpMatrix {
            frame,
            m: [
                [T::one(), T::zero(), T::zero()],
                [T::zero(), T::one(), T::zero()],
            ],
        }
    }

    pub fn translation(frame: u32, dx: T, dy: T) -> Self {
        let mut w = Self::identity(frame);
        w.m[0][2] = dx;
        w.m[1][2] = dy;
        w
    }

    pub fn det(&self) -> T {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.frame)
    }

    pub fn apply_point(&self, x: T, y: T) -> (T, T) {
        let m = &self.m;
        (m[0][0] * x + m[0][1] * y + m[0][2], m[1][0] * x + m[1][1] * y + m[1][2])
    }

    pub fn apply_vector(&self, x: T, y: T) -> (T, T) {
        let m = &self.m;
        (m[0][0] * x + m[0][1] * y, m[1][0] * x + m[1][1] * y)
    }

    /// Maps a state into the current frame's coordinates.
    ///
    /// Centers move affinely, velocities through the linear part only, and
    /// height (with its velocity) scales by `sqrt(|det|)`; aspect is kept.
    /// The covariance is conjugated by the same linear map.
    pub fn apply(&self, s: &KalmanState<T>) -> Result<KalmanState<T>> {
        let det = self.det();
        if !det.is_finite() || det.abs() <= T::epsilon() {
            return Err(Error::invalid(format!(
                "warp for frame {} has singular linear part (det = {det})",
                self.frame
            )));
        }
        if self.is_identity() {
            return Ok(*s);
        }
        let scale = det.abs().sqrt();
        let mut t = [[T::zero(); STATE_DIM]; STATE_DIM];
        for base in [0, MEAS_DIM] {
            t[base][base] = self.m[0][0];
            t[base][base + 1] = self.m[0][1];
            t[base + 1][base] = self.m[1][0];
            t[base + 1][base + 1] = self.m[1][1];
            t[base + 2][base + 2] = T::one();
            t[base + 3][base + 3] = scale;
        }
        let mut mean = [T::zero(); STATE_DIM];
        for i in 0..STATE_DIM {
            mean[i] = (0..STATE_DIM).fold(T::zero(), |acc, k| acc + t[i][k] * s.mean[k]);
        }
        mean[0] += self.m[0][2];
        mean[1] += self.m[1][2];
        let mut cov = matmul(&matmul(&t, &s.cov), &transpose(&t));
        symmetrize(&mut cov);
        Ok(KalmanState { mean, cov })
    }
}

/// Per-frame warps; frames without an entry use the identity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarpTable<T> {
    pub warps: BTreeMap<u32, WarpMatrix<T>>,
}

impl<T: Scalar> WarpTable<T> {
    pub fn new() -> Self {
        WarpTable {
            warps: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, w: WarpMatrix<T>) {
        self.warps.insert(w.frame, w);
    }

    pub fn get(&self, frame: u32) -> WarpMatrix<T> {
        self.warps
            .get(&frame)
            .copied()
            .unwrap_or_else(|| WarpMatrix::identity(frame))
    }

    pub fn is_empty(&self) -> bool {
        self.warps.is_empty()
    }

    pub fn len(&self) -> usize {
        self.warps.len()
    }
}
