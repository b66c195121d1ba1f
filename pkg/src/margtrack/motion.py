"""Constant-velocity Kalman filter over (cx, cy, aspect, height) with
Mahalanobis gating.

Noise is proportional to the box height, as in DeepSORT. States are immutable
records; every operation returns a new :class:`KalmanState`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affinity import BoundingBox

# 0.95 quantile of the chi-square distribution with 4 degrees of freedom
CHI2_GATE_4DOF = 9.4877


class CorruptStateError(ValueError):
    """Innovation covariance is not positive definite."""


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    def to_box(self) -> BoundingBox:
        cx, cy, a, h = self.mean[:4]
        h = max(float(h), 1e-6)
        a = max(float(a), 1e-6)
        return BoundingBox.from_xyah((cx, cy, a, h))


def _measurement(box) -> np.ndarray:
    if isinstance(box, BoundingBox):
        return box.to_xyah()
    x, y, w, h = (float(v) for v in box)
    return BoundingBox(x, y, w, h).to_xyah()


class KalmanFilter:
    """8-dimensional constant-velocity filter.

    ``std_weight_position`` and ``std_weight_velocity`` scale the process and
    measurement noise with the box height.
    """

    ndim = 4

    def __init__(self, std_weight_position: float = 1.0 / 20, std_weight_velocity: float = 1.0 / 160,
                 gate: float = CHI2_GATE_4DOF):
        self.std_weight_position = std_weight_position
        self.std_weight_velocity = std_weight_velocity
        self.gate = gate
        self._motion_mat = np.eye(8)
        self._motion_mat[:4, 4:] = np.eye(4)
        self._update_mat = np.eye(4, 8)

    def initiate(self, measurement) -> KalmanState:
        z = _measurement(measurement)
        mean = np.r_[z, np.zeros(4)]
        h = z[3]
        std = [
            2 * self.std_weight_position * h,
            2 * self.std_weight_position * h,
            1e-2,
            2 * self.std_weight_position * h,
            10 * self.std_weight_velocity * h,
            10 * self.std_weight_velocity * h,
            1e-5,
            10 * self.std_weight_velocity * h,
        ]
        return KalmanState(mean, np.diag(np.square(std)))

    def _process_std(self, heights: np.ndarray) -> np.ndarray:
        wp = self.std_weight_position * heights
        wv = self.std_weight_velocity * heights
        small = np.ones_like(heights)
        return np.stack([wp, wp, 1e-2 * small, wp, wv, wv, 1e-5 * small, wv], axis=-1)

    def _measurement_std(self, heights: np.ndarray) -> np.ndarray:
        wp = self.std_weight_position * heights
        return np.stack([wp, wp, 1e-1 * np.ones_like(heights), wp], axis=-1)

    @staticmethod
    def _stack(states) -> tuple[np.ndarray, np.ndarray]:
        states = list(states)
        if not states:
            return np.zeros((0, 8)), np.zeros((0, 8, 8))
        return np.stack([s.mean for s in states]), np.stack([s.covariance for s in states])

    @staticmethod
    def _sym(cov: np.ndarray) -> np.ndarray:
        return 0.5 * (cov + np.swapaxes(cov, -1, -2))

    def predict(self, state: KalmanState) -> KalmanState:
        return self.predict_many([state])[0]

    def predict_many(self, states) -> list[KalmanState]:
        """Batched :meth:`predict`."""
        means, covs = self._stack(states)
        f = self._motion_mat
        q = np.square(self._process_std(means[:, 3]))
        new_means = means @ f.T
        new_covs = f @ covs @ f.T
        idx = np.arange(8)
        new_covs[:, idx, idx] += q
        new_covs = self._sym(new_covs)
        return [KalmanState(m, c) for m, c in zip(new_means, new_covs)]

    def _project_many(self, means: np.ndarray, covs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        r = np.square(self._measurement_std(means[:, 3]))
        proj_means = means[:, :4].copy()
        proj_covs = covs[:, :4, :4].copy()
        idx = np.arange(4)
        proj_covs[:, idx, idx] += r
        return proj_means, self._sym(proj_covs)

    def project(self, state: KalmanState) -> tuple[np.ndarray, np.ndarray]:
        """Observation-space mean and innovation covariance."""
        m, c = self._project_many(state.mean[None], state.covariance[None])
        return m[0], c[0]

    @staticmethod
    def _cholesky(covs: np.ndarray) -> np.ndarray:
        try:
            return np.linalg.cholesky(covs)
        except np.linalg.LinAlgError as exc:
            raise CorruptStateError("innovation covariance is not positive definite") from exc

    def update(self, state: KalmanState, measurement) -> KalmanState:
        return self.update_many([state], [measurement])[0]

    def update_many(self, states, measurements) -> list[KalmanState]:
        """Batched :meth:`update`; ``measurements[k]`` corrects ``states[k]``."""
        means, covs = self._stack(states)
        if len(means) == 0:
            return []
        zs = np.array([_measurement(m) for m in measurements], dtype=np.float64).reshape(-1, 4)
        if len(zs) != len(means):
            raise ValueError("need one measurement per state")
        proj_means, proj_covs = self._project_many(means, covs)
        chol = self._cholesky(proj_covs)
        # gain = P H^T S^-1, solved through the Cholesky factor of S
        pht = covs[:, :, :4]
        tmp = np.linalg.solve(chol, np.swapaxes(pht, 1, 2))
        gain = np.swapaxes(np.linalg.solve(np.swapaxes(chol, 1, 2), tmp), 1, 2)
        innov = zs - proj_means
        new_means = means + np.einsum("kij,kj->ki", gain, innov)
        new_covs = self._sym(covs - gain @ proj_covs @ np.swapaxes(gain, 1, 2))
        return [KalmanState(m, c) for m, c in zip(new_means, new_covs)]

    def gating_distance(self, state: KalmanState, measurements) -> np.ndarray:
        """Squared Mahalanobis distance of each measurement to the projected state."""
        zs = np.array([_measurement(m) for m in measurements], dtype=np.float64).reshape(-1, 4)
        return self._gating_xyah([state], zs)[0]

    def _gating_xyah(self, states, zs: np.ndarray) -> np.ndarray:
        """``(tracks, measurements)`` squared distances, ungated."""
        means, covs = self._stack(states)
        if len(means) == 0 or len(zs) == 0:
            return np.zeros((len(means), len(zs)))
        proj_means, proj_covs = self._project_many(means, covs)
        chol = self._cholesky(proj_covs)
        d = zs[None, :, :] - proj_means[:, None, :]
        solved = np.linalg.solve(chol, np.swapaxes(d, 1, 2))
        return np.sum(solved * solved, axis=1)

    def mahalanobis_matrix(self, states, detections) -> np.ndarray:
        """Squared distances, rows = detections, cols = tracks; ``inf`` beyond the gate."""
        zs = np.array([_measurement(d) for d in detections], dtype=np.float64).reshape(-1, 4)
        out = self._gating_xyah(states, zs).T.copy()
        out[out > self.gate] = np.inf
        return out


_default = KalmanFilter()


def initiate(measurement) -> KalmanState:
    return _default.initiate(measurement)


def predict(state: KalmanState) -> KalmanState:
    return _default.predict(state)


def update(state: KalmanState, measurement) -> KalmanState:
    return _default.update(state, measurement)


def gating_distance(state: KalmanState, measurements) -> np.ndarray:
    return _default.gating_distance(state, measurements)


def mahalanobis_matrix(states, detections) -> np.ndarray:
    return _default.mahalanobis_matrix(states, detections)
