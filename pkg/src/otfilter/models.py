"""Pendulum dynamics, integration, measurements, and constraint models.

The benchmark system is a planar pendulum in Cartesian coordinates
(x, y, xdot, ydot) with y pointing downward, so the hanging equilibrium
is (0, L, 0, 0).  The fixed rod length gives the state equality
constraint x^2 + y^2 = L^2, which is an invariant manifold of the
continuous dynamics but not of a discretized or assimilated trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ensemble import Ensemble, StateVector
from .errors import DecompositionError, SingularCovarianceError

DEFAULT_CONSTRAINT_SIGMA = 5e-2


@dataclass(frozen=True)
class PendulumParams:
    """Rod length L [m] and gravitational acceleration g [m/s^2]."""

    L: float = 1.0
    g: float = 9.8

    def __post_init__(self):
        if self.L <= 0 or self.g <= 0:
            raise ValueError(f"L and g must be positive, got L={self.L}, g={self.g}")


@dataclass(frozen=True)
class MeasurementModel:
    """Linear observation y = H x + v with v ~ N(0, R)."""

    H: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "R", R)
        if R.shape != (H.shape[0], H.shape[0]):
            raise ValueError(f"R shape {R.shape} does not match H rows {H.shape[0]}")
        if not np.allclose(R, R.T, atol=1e-12):
            raise ValueError("R must be symmetric")
        if np.linalg.eigvalsh(R).min() <= 0:
            raise ValueError("R must be positive definite")

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    def predict_members(self, members: np.ndarray) -> np.ndarray:
        """Noise-free predicted measurement for each member, (N, m)."""
        return members @ self.H.T

    def effective_observation(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=float)

    def noise_cov(self) -> np.ndarray:
        return self.R


@dataclass(frozen=True)
class ConstraintSpec:
    """Equality constraint g(x) = d with g: R^n -> R^s."""

    g_fn: Callable[[StateVector], np.ndarray]
    d: np.ndarray

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.d, dtype=float))
        if not np.all(np.isfinite(d)):
            raise ValueError("constraint target d must be finite")
        object.__setattr__(self, "d", d)

    @property
    def dim(self) -> int:
        return self.d.size

    def evaluate(self, members: np.ndarray) -> np.ndarray:
        """Constraint values for each member, (N, s)."""
        members = np.atleast_2d(members)
        return np.array([np.atleast_1d(self.g_fn(x)) for x in members], dtype=float)


@dataclass(frozen=True)
class AugmentedMeasurementModel:
    """Observation model with the constraint appended as a perfect measurement.

    The constraint block uses a tight Gaussian pseudo-noise (sigma_g per
    constraint component) instead of a Dirac delta so off-constraint members
    keep a nonzero, strongly suppressed weight.
    """

    base: MeasurementModel
    constraint: ConstraintSpec
    sigma_g: float = DEFAULT_CONSTRAINT_SIGMA

    def __post_init__(self):
        if self.sigma_g <= 0:
            raise ValueError(f"sigma_g must be positive, got {self.sigma_g}")

    @property
    def dim(self) -> int:
        return self.base.dim + self.constraint.dim

    def predict_members(self, members: np.ndarray) -> np.ndarray:
        """Stacked prediction [h(x); g(x)] for each member, (N, m+s)."""
        return np.hstack(
            [self.base.predict_members(members), self.constraint.evaluate(members)]
        )

    def effective_observation(self, y: np.ndarray) -> np.ndarray:
        """Stacked observation [y; d]."""
        return np.concatenate([np.asarray(y, dtype=float), self.constraint.d])

    def noise_cov(self) -> np.ndarray:
        s = self.constraint.dim
        m = self.base.dim
        cov = np.zeros((m + s, m + s))
        cov[:m, :m] = self.base.R
        cov[m:, m:] = self.sigma_g**2 * np.eye(s)
        return cov


def augment_measurement(
    base: MeasurementModel,
    constraint: ConstraintSpec,
    sigma_g: float = DEFAULT_CONSTRAINT_SIGMA,
) -> AugmentedMeasurementModel:
    """Append the constraint to the observation model as a perfect measurement."""
    return AugmentedMeasurementModel(base=base, constraint=constraint, sigma_g=sigma_g)


def pendulum_derivative(state: np.ndarray, params: PendulumParams) -> np.ndarray:
    """Cartesian pendulum kinematics; accepts a single state or an (N, 4) batch.

    xddot = (-g x y - x (xdot^2 + ydot^2)) / L^2
    yddot = ( g x^2 - y (xdot^2 + ydot^2)) / L^2
    """
    s = np.asarray(state, dtype=float)
    x, y, vx, vy = s[..., 0], s[..., 1], s[..., 2], s[..., 3]
    speed2 = vx * vx + vy * vy
    L2 = params.L * params.L
    ax = (-params.g * x * y - x * speed2) / L2
    ay = (params.g * x * x - y * speed2) / L2
    return np.stack([vx, vy, ax, ay], axis=-1)


def rk4_step(
    derivative_fn: Callable[[np.ndarray], np.ndarray],
    state: np.ndarray,
    dt: float,
) -> np.ndarray:
    """One classical 4th-order Runge-Kutta step of size dt."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    k1 = derivative_fn(state)
    k2 = derivative_fn(state + 0.5 * dt * k1)
    k3 = derivative_fn(state + 0.5 * dt * k2)
    k4 = derivative_fn(state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def propagate_state(
    state: np.ndarray, params: PendulumParams, dt: float, substeps: int
) -> np.ndarray:
    """Advance a state (or batch) by `substeps` RK4 steps spanning dt."""
    if substeps < 1:
        raise ValueError(f"substeps must be >= 1, got {substeps}")
    h = dt / substeps
    out = np.asarray(state, dtype=float)
    for _ in range(substeps):
        out = rk4_step(lambda s: pendulum_derivative(s, params), out, h)
    return out


def propagate_ensemble(
    e: Ensemble,
    params: PendulumParams,
    dt: float,
    substeps: int = 1,
    process_noise_cov: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> Ensemble:
    """Propagate every member through the dynamics, optionally adding one
    Gaussian process-noise draw per member afterwards."""
    members = propagate_state(e.members, params, dt, substeps)
    if process_noise_cov is not None:
        cov = np.asarray(process_noise_cov, dtype=float)
        if cov.shape != (e.dim, e.dim):
            raise DecompositionError(
                f"process noise shape {cov.shape} does not match state dim {e.dim}"
            )
        eigvals, eigvecs = np.linalg.eigh(0.5 * (cov + cov.T))
        if eigvals.min() < -1e-10:
            raise DecompositionError("process noise covariance must be PSD")
        if rng is None:
            raise ValueError("process noise requires a random generator")
        factor = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
        members = members + rng.standard_normal(members.shape) @ factor.T
    return Ensemble(members)


def measure(
    state: StateVector, model: MeasurementModel, rng: np.random.Generator
) -> np.ndarray:
    """One noisy measurement H x + v, deterministic given the generator state."""
    chol = np.linalg.cholesky(model.R)
    return model.H @ np.asarray(state, dtype=float) + chol @ rng.standard_normal(
        model.dim
    )


def gaussian_likelihood(
    y: np.ndarray, predicted: np.ndarray, R: np.ndarray
) -> float:
    """Unnormalized Gaussian likelihood exp(-0.5 r^T R^-1 r); peak value 1.

    The normalization constant is omitted because weights are renormalized
    downstream.
    """
    return float(np.exp(gaussian_log_likelihoods(y, np.atleast_2d(predicted), R)[0]))


def gaussian_log_likelihoods(
    y: np.ndarray, predicted: np.ndarray, R: np.ndarray
) -> np.ndarray:
    """Log of the unnormalized likelihood for a batch of predictions, (N,)."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    try:
        chol = np.linalg.cholesky(R)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError(f"R is not positive definite: {exc}") from exc
    residual = np.atleast_2d(predicted) - np.asarray(y, dtype=float)
    whitened = np.linalg.solve(chol, residual.T)
    return -0.5 * np.einsum("ij,ij->j", whitened, whitened)


def pendulum_constraint(state: np.ndarray) -> float | np.ndarray:
    """Squared distance from the pivot, x^2 + y^2."""
    s = np.asarray(state, dtype=float)
    value = s[..., 0] ** 2 + s[..., 1] ** 2
    return float(value) if value.ndim == 0 else value


def pendulum_constraint_spec(params: PendulumParams) -> ConstraintSpec:
    """Rod-length constraint x^2 + y^2 = L^2 as a ConstraintSpec."""
    return ConstraintSpec(
        g_fn=lambda s: np.atleast_1d(pendulum_constraint(s)),
        d=np.array([params.L**2]),
    )


def pendulum_measurement_model(r_diag: float = 0.01) -> MeasurementModel:
    """Position-only observation of the pendulum bob with isotropic noise."""
    if r_diag <= 0:
        raise ValueError(f"measurement variance must be positive, got {r_diag}")
    H = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
    return MeasurementModel(H=H, R=r_diag * np.eye(2))
