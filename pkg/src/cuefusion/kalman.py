"""Constant-velocity Kalman filter over a box state extended with a confidence channel.

State layout (10,): ``(xc, yc, w, h, c, vxc, vyc, vw, vh, vc)``; the
measurement is the first five components. Process and measurement noise
scale with the current width, height and confidence estimates, so the
filter is expressed as plain functions of ``(mean, covariance)`` pairs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.stats import chi2

NDIM = 5
STATE_DIM = 2 * NDIM

# index of the derivative for each preservable channel
RATE_INDEX = {"width": 7, "height": 8, "confidence": 9}

CONF_NOISE_FLOOR = 1e-3
NSA_SCALE_FLOOR = 1e-6

_F = np.eye(STATE_DIM)
_F[:NDIM, NDIM:] = np.eye(NDIM)
_H = np.eye(NDIM, STATE_DIM)


class FilterDivergenceError(np.linalg.LinAlgError):
    """Innovation covariance is numerically singular."""


@dataclass(frozen=True)
class NoiseFactors:
    std_position: float = 0.05
    std_velocity: float = 0.00625
    std_measurement: float = 0.05

    def __post_init__(self):
        if min(self.std_position, self.std_velocity, self.std_measurement) <= 0:
            raise ValueError("noise factors must be strictly positive")


@dataclass(frozen=True)
class Preserve:
    """Which rates are zeroed before each prediction."""

    width: bool = True
    height: bool = True
    confidence: bool = True


@dataclass
class KFState:
    mean: np.ndarray
    covariance: np.ndarray

    def copy(self) -> "KFState":
        return KFState(self.mean.copy(), self.covariance.copy())


def _conf_std(sigma: float, c: float) -> float:
    if abs(c) <= CONF_NOISE_FLOOR:
        return CONF_NOISE_FLOOR
    return sigma * c


def _symmetrize(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


def initiate(z, factors: NoiseFactors = NoiseFactors()) -> KFState:
    """Start a state at measurement ``z`` with zero rates."""
    z = np.asarray(z, dtype=float)
    w, h, c = z[2], z[3], z[4]
    mean = np.r_[z, np.zeros(NDIM)]
    sp = 2.0 * factors.std_measurement
    sv = 10.0 * factors.std_velocity
    std = [
        sp * w, sp * h, sp * w, sp * h, _conf_std(sp, c),
        sv * w, sv * h, sv * w, sv * h, _conf_std(sv, c),
    ]
    return KFState(mean, np.diag(np.square(std)))


def process_noise(mean: np.ndarray, factors: NoiseFactors) -> np.ndarray:
    w, h, c = mean[2], mean[3], mean[4]
    sp, sv = factors.std_position, factors.std_velocity
    std = [
        sp * w, sp * h, sp * w, sp * h, _conf_std(sp, c),
        sv * w, sv * h, sv * w, sv * h, _conf_std(sv, c),
    ]
    return np.diag(np.square(std))


def measurement_noise(mean: np.ndarray, factors: NoiseFactors) -> np.ndarray:
    w, h, c = mean[2], mean[3], mean[4]
    sm = factors.std_measurement
    std = [sm * w, sm * h, sm * w, sm * h, _conf_std(sm, c)]
    return np.diag(np.square(std))


def nsa_measurement_noise(r: np.ndarray, score: float) -> np.ndarray:
    """Scale measurement noise by ``1 - score``; the scale never drops below 1e-6."""
    return max(1.0 - score, NSA_SCALE_FLOOR) * r


def predict(state: KFState, factors: NoiseFactors = NoiseFactors(),
            preserve: Preserve = Preserve()) -> KFState:
    mean = state.mean.copy()
    for name, idx in RATE_INDEX.items():
        if getattr(preserve, name):
            mean[idx] = 0.0
    # noise uses the prior w, h, c estimates
    q = process_noise(mean, factors)
    mean = _F @ mean
    cov = _symmetrize(_F @ state.covariance @ _F.T + q)
    return KFState(mean, cov)


def project(state: KFState, factors: NoiseFactors = NoiseFactors()):
    """Return the measurement-space mean and innovation covariance."""
    r = measurement_noise(state.mean, factors)
    mean = _H @ state.mean
    cov = _symmetrize(_H @ state.covariance @ _H.T + r)
    return mean, cov


def update(state: KFState, z, factors: NoiseFactors = NoiseFactors(),
           nsa: bool = False) -> KFState:
    """Kalman correction with a Joseph-form covariance update."""
    z = np.asarray(z, dtype=float)
    r = measurement_noise(state.mean, factors)
    if nsa:
        r = nsa_measurement_noise(r, z[4])
    p = state.covariance
    s = _symmetrize(_H @ p @ _H.T + r)
    try:
        chol = scipy.linalg.cho_factor(s, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise FilterDivergenceError("innovation covariance is singular") from exc
    gain = scipy.linalg.cho_solve(chol, _H @ p).T
    innovation = z - _H @ state.mean
    mean = state.mean + gain @ innovation
    a = np.eye(STATE_DIM) - gain @ _H
    cov = _symmetrize(a @ p @ a.T + gain @ r @ gain.T)
    return KFState(mean, cov)


def gating_distance(state: KFState, measurements, factors: NoiseFactors = NoiseFactors()) -> np.ndarray:
    """Squared Mahalanobis distance of each measurement's center to the projected center."""
    measurements = np.asarray(measurements, dtype=float).reshape(-1, NDIM)
    mean, cov = project(state, factors)
    s = cov[:2, :2]
    d = measurements[:, :2] - mean[:2]
    if len(d) == 0:
        return np.zeros(0)
    try:
        chol = np.linalg.cholesky(s)
    except np.linalg.LinAlgError as exc:
        raise FilterDivergenceError("position block of innovation covariance is singular") from exc
    zz = scipy.linalg.solve_triangular(chol, d.T, lower=True, check_finite=False)
    return np.sum(zz * zz, axis=0)


def chi2_gate_threshold(dof: int = 2, quantile: float = 0.95) -> float:
    return float(chi2.ppf(quantile, dof))


def apply_affine(state: KFState, warp) -> KFState:
    """Move a state by a 2x3 camera warp.

    Center and center velocity are transformed; size and confidence are
    left as they are.
    """
    warp = np.asarray(warp, dtype=float).reshape(2, 3)
    m = warp[:, :2]
    t = warp[:, 2]
    if not np.all(np.isfinite(warp)):
        raise ValueError("non-finite warp")
    if abs(np.linalg.det(m)) < 1e-12:
        raise ValueError("warp linear part is not invertible")
    big = np.eye(STATE_DIM)
    big[0:2, 0:2] = m
    big[5:7, 5:7] = m
    mean = big @ state.mean
    mean[0:2] += t
    cov = _symmetrize(big @ state.covariance @ big.T)
    return KFState(mean, cov)


def state_to_box(mean: np.ndarray) -> np.ndarray:
    """Corner box ``(x1, y1, x2, y2)`` from a state mean."""
    xc, yc, w, h = mean[:4]
    return np.array([xc - w / 2.0, yc - h / 2.0, xc + w / 2.0, yc + h / 2.0])
