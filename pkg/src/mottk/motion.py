"""Constant-velocity Kalman filter over (cx, cy, aspect, height).

The 8-dimensional state is::

    cx, cy, a, h, vcx, vcy, va, vh

with a = width / height. Time step is one frame. Noise standard deviations
scale with the current height, as in the SORT/DeepSORT family of trackers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mottk.errors import DegeneratePredictionError, InvalidBoxError, NumericError
from mottk.geometry import BoundingBox

_NDIM = 4

_MOTION = np.eye(2 * _NDIM)
_MOTION[:_NDIM, _NDIM:] = np.eye(_NDIM)
_OBSERVE = np.eye(_NDIM, 2 * _NDIM)

# aspect ratio is dimensionless, so its noise does not scale with height
_ASPECT_POS_STD = 1e-2
_ASPECT_VEL_STD = 1e-5
_ASPECT_MEAS_STD = 1e-1


@dataclass(frozen=True)
class NoiseConfig:
    """Height-relative noise factors.

    Defaults give position std h/20, velocity std h/160 and measurement
    std h/20.
    """

    pos_std_factor: float = 1.0 / 20
    vel_std_factor: float = 1.0 / 160
    meas_std_factor: float = 1.0 / 20

    def __post_init__(self):
        for name in ("pos_std_factor", "vel_std_factor", "meas_std_factor"):
            value = getattr(self, name)
            if not (value > 0 and np.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value}")


@dataclass(frozen=True, eq=False)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray
    noise: NoiseConfig = NoiseConfig()

    def box(self) -> BoundingBox:
        return BoundingBox.from_xyah(self.mean[:4])

    def __eq__(self, other):
        if not isinstance(other, KalmanState):
            return NotImplemented
        return (
            self.noise == other.noise
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.covariance, other.covariance)
        )


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return (m + m.T) / 2.0


def kf_init(box: BoundingBox, noise: NoiseConfig = NoiseConfig()) -> KalmanState:
    """Start a filter at ``box`` with zero velocity."""
    if not box.is_valid():
        raise InvalidBoxError(f"cannot initialise a filter from {box}")
    measurement = box.to_xyah()
    mean = np.r_[measurement, np.zeros(_NDIM)]
    h = measurement[3]
    std = [
        2 * noise.pos_std_factor * h,
        2 * noise.pos_std_factor * h,
        _ASPECT_POS_STD,
        2 * noise.pos_std_factor * h,
        10 * noise.vel_std_factor * h,
        10 * noise.vel_std_factor * h,
        _ASPECT_VEL_STD,
        10 * noise.vel_std_factor * h,
    ]
    return KalmanState(mean, np.diag(np.square(std)), noise)


def kf_predict(state: KalmanState) -> tuple[KalmanState, BoundingBox]:
    """Advance one frame; returns the new state and its ltwh box.

    Raises
    ------
    DegeneratePredictionError
        If the predicted height is not positive.
    """
    noise = state.noise
    h = state.mean[3]
    std_pos = [noise.pos_std_factor * h, noise.pos_std_factor * h, _ASPECT_POS_STD, noise.pos_std_factor * h]
    std_vel = [noise.vel_std_factor * h, noise.vel_std_factor * h, _ASPECT_VEL_STD, noise.vel_std_factor * h]
    process = np.diag(np.square(np.r_[std_pos, std_vel]))

    mean = _MOTION @ state.mean
    covariance = _symmetrize(_MOTION @ state.covariance @ _MOTION.T + process)
    if not (mean[3] > 0 and mean[2] > 0):
        raise DegeneratePredictionError(
            f"predicted height {mean[3]:.6g} / aspect {mean[2]:.6g} is not positive"
        )
    new = KalmanState(mean, covariance, noise)
    return new, new.box()


def kf_update(state: KalmanState, measurement: BoundingBox) -> KalmanState:
    """Joseph-form Kalman correction with an ltwh box measurement."""
    if not box_is_finite(measurement):
        raise NumericError(f"non-finite measurement {measurement}")
    if not measurement.is_valid():
        raise InvalidBoxError(f"measurement must have positive area: {measurement}")
    if not (np.all(np.isfinite(state.mean)) and np.all(np.isfinite(state.covariance))):
        raise NumericError("filter state is not finite")
    noise = state.noise
    h = state.mean[3]
    r_std = [noise.meas_std_factor * h, noise.meas_std_factor * h, _ASPECT_MEAS_STD, noise.meas_std_factor * h]
    innovation_cov = np.diag(np.square(r_std))

    P = state.covariance
    S = _OBSERVE @ P @ _OBSERVE.T + innovation_cov
    # K = P H^T S^-1, solved rather than inverted
    gain = np.linalg.solve(S, _OBSERVE @ P).T
    innovation = measurement.to_xyah() - _OBSERVE @ state.mean
    mean = state.mean + gain @ innovation
    joseph = np.eye(2 * _NDIM) - gain @ _OBSERVE
    covariance = joseph @ P @ joseph.T + gain @ innovation_cov @ gain.T
    covariance = _symmetrize(covariance)
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(covariance))):
        raise NumericError("Kalman update produced non-finite values")
    return KalmanState(mean, covariance, noise)


def box_is_finite(box: BoundingBox) -> bool:
    return bool(np.all(np.isfinite(box.as_tuple())))
