"""System model and error-covariance operators for remote state estimation.

A smart sensor runs a local Kalman filter on the LTI process

    x[k+1] = A x[k] + w[k],   y[k] = C x[k] + v[k],

and transmits its filtered estimate over an erasure link that delivers with
probability ``lam`` at low transmit power (and surely at high power).  The
remote estimator keeps the last received estimate and propagates it through
the plant model between arrivals, so its error covariance after ``i``
consecutive losses is ``h^i(Pbar)``, where ``h`` is the one-step prediction
(Lyapunov) map and ``Pbar`` the sensor's steady-state filtering covariance.

Everything downstream (schedules, attack chains, Monte Carlo) consumes only
``Pbar`` and the traces of its ``h``-iterates, which :class:`SteadyState`
caches incrementally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError, SolverError

__all__ = [
    "SystemModel",
    "SteadyState",
    "EstimatorState",
    "lyapunov_h",
    "riccati_gtilde",
    "steady_state_cov",
    "h_power_trace",
    "kalman_sensor_step",
    "remote_update",
    "initial_estimator_state",
]

_RANK_RTOL = 1e-8  # singular values below rtol * s_max count as zero
_SYM_TOL = 1e-10


def _as_matrix(M, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2:
        raise ModelError(f"{name} must be a 2-d matrix, got ndim={M.ndim}")
    return M


def _sym(X: np.ndarray) -> np.ndarray:
    return (X + X.T) * 0.5


def _check_symmetric(M: np.ndarray, name: str) -> None:
    if not np.allclose(M, M.T, rtol=0.0, atol=_SYM_TOL):
        raise ModelError(f"{name} is not symmetric within {_SYM_TOL}")


def _numerical_rank(M: np.ndarray) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > _RANK_RTOL * s[0]))


def _psd_sqrt(M: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix, clamping tiny negative eigs."""
    w, V = np.linalg.eigh(_sym(M))
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


@dataclass(eq=False)
class SystemModel:
    """LTI process, sensor noise statistics and erasure-channel quality.

    Parameters
    ----------
    A, C, Q, R : array_like
        Plant matrix (n x n), output matrix (m x n), process noise
        covariance (n x n, PSD) and measurement noise covariance
        (m x m, positive definite).
    Pi0 : array_like
        Initial state covariance (n x n, PSD).
    lam : float
        Arrival probability of a low-power transmission, strictly in (0, 1).

    Raises
    ------
    ModelError
        On shape mismatch, asymmetry, indefiniteness, an unobservable
        pair (A, C), an uncontrollable pair (A, Q^(1/2)), or lam outside
        the open unit interval.
    """

    A: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    Pi0: np.ndarray
    lam: float

    def __post_init__(self) -> None:
        self.A = _as_matrix(self.A, "A")
        self.C = _as_matrix(self.C, "C")
        self.Q = _as_matrix(self.Q, "Q")
        self.R = _as_matrix(self.R, "R")
        self.Pi0 = _as_matrix(self.Pi0, "Pi0")

        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ModelError(f"A must be square, got {self.A.shape}")
        m = self.C.shape[0]
        if self.C.shape != (m, n):
            raise ModelError(f"C must be {m}x{n}, got {self.C.shape}")
        if self.Q.shape != (n, n):
            raise ModelError(f"Q must be {n}x{n}, got {self.Q.shape}")
        if self.R.shape != (m, m):
            raise ModelError(f"R must be {m}x{m}, got {self.R.shape}")
        if self.Pi0.shape != (n, n):
            raise ModelError(f"Pi0 must be {n}x{n}, got {self.Pi0.shape}")

        for M, name in ((self.Q, "Q"), (self.R, "R"), (self.Pi0, "Pi0")):
            _check_symmetric(M, name)
        for M, name in ((self.Q, "Q"), (self.Pi0, "Pi0")):
            if np.linalg.eigvalsh(M).min() < -_SYM_TOL:
                raise ModelError(f"{name} is not positive semi-definite")
        if np.linalg.eigvalsh(self.R).min() <= 0.0:
            raise ModelError("R must be positive definite")

        obs = np.vstack([self.C @ np.linalg.matrix_power(self.A, i) for i in range(n)])
        if _numerical_rank(obs) < n:
            raise ModelError("(A, C) is not observable")
        qh = _psd_sqrt(self.Q)
        ctr = np.hstack([np.linalg.matrix_power(self.A, i) @ qh for i in range(n)])
        if _numerical_rank(ctr) < n:
            raise ModelError("(A, Q^(1/2)) is not controllable")

        self.lam = float(self.lam)
        if not (0.0 < self.lam < 1.0):
            raise ModelError(f"lam must lie in (0, 1), got {self.lam}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))


def lyapunov_h(model: SystemModel, X: np.ndarray) -> np.ndarray:
    """One prediction step of the error covariance: h(X) = A X A' + Q."""
    return _sym(model.A @ X @ model.A.T + model.Q)


def riccati_gtilde(model: SystemModel, X: np.ndarray) -> np.ndarray:
    """Measurement update of the error covariance.

    g(X) = X - X C' (C X C' + R)^(-1) C X, symmetrized after the product.
    """
    CX = model.C @ X
    S = model.C @ X @ model.C.T + model.R
    return _sym(X - CX.T @ np.linalg.solve(S, CX))


@dataclass(eq=False)
class SteadyState:
    """Steady-state filtering covariance plus a growing cache of h-iterates.

    ``h_power(i)`` is the remote error covariance after ``i`` consecutive
    losses; ``h_trace(i)`` its trace.  The cache extends on demand and each
    entry is produced by exactly one :func:`lyapunov_h` application, so
    repeated queries are bit-identical to stepping a live estimator.  Extend
    from a single thread at a time; reads of already-cached entries are safe.
    """

    model: SystemModel
    Pbar: np.ndarray
    hpowers: list = field(default_factory=list, repr=False)
    _traces: list = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if not self.hpowers:
            self.hpowers = [self.Pbar]
            self._traces = [float(np.trace(self.Pbar))]

    def _extend(self, i: int) -> None:
        while len(self.hpowers) <= i:
            nxt = lyapunov_h(self.model, self.hpowers[-1])
            self.hpowers.append(nxt)
            self._traces.append(float(np.trace(nxt)))

    def h_power(self, i: int) -> np.ndarray:
        if i < 0:
            raise ValueError("power index must be non-negative")
        self._extend(i)
        return self.hpowers[i]

    def h_trace(self, i: int) -> float:
        if i < 0:
            raise ValueError("power index must be non-negative")
        self._extend(i)
        return self._traces[i]

    def trace_table(self, length: int) -> np.ndarray:
        """First ``length`` traces as a float64 array (simulation lookup)."""
        self._extend(length - 1)
        return np.asarray(self._traces[:length], dtype=np.float64)


def steady_state_cov(
    model: SystemModel, tol: float = 1e-10, max_iter: int = 1_000_000
) -> SteadyState:
    """Fixed point of the filter recursion X -> g(h(X)).

    Iterates from Pi0 until successive traces differ by less than ``tol``.
    The limit exists and is unique under the observability/controllability
    conditions enforced by :class:`SystemModel`.
    """
    X = _sym(model.Pi0.copy())
    prev = float(np.trace(X))
    for _ in range(max_iter):
        X = riccati_gtilde(model, lyapunov_h(model, X))
        cur = float(np.trace(X))
        if abs(cur - prev) < tol:
            return SteadyState(model=model, Pbar=X)
        prev = cur
    raise SolverError(
        f"steady-state covariance iteration did not converge in {max_iter} steps "
        f"(last trace delta {abs(cur - prev):.3e})"
    )


def h_power_trace(ss: SteadyState, model: SystemModel, i: int) -> float:
    """Trace of the i-fold loss propagation of Pbar, extending the cache.

    The model argument names the operator being iterated; the cache lives on
    ``ss`` and was built with that same model.
    """
    return ss.h_trace(i)


def kalman_sensor_step(
    model: SystemModel, xhat: np.ndarray, P: np.ndarray, y: np.ndarray
):
    """One predict/update cycle of the sensor-side Kalman filter.

    Returns the posterior estimate and covariance; the covariance equals
    g(h(P)) independent of the measurement.
    """
    xpred = model.A @ xhat
    Ppred = lyapunov_h(model, P)
    S = model.C @ Ppred @ model.C.T + model.R
    K = np.linalg.solve(S, model.C @ Ppred).T
    xpost = xpred + K @ (y - model.C @ xpred)
    return xpost, riccati_gtilde(model, Ppred)


@dataclass
class EstimatorState:
    """Remote estimator state: estimate, exact covariance, loss streak."""

    xhat: np.ndarray
    P: np.ndarray
    tau: int = 0


def initial_estimator_state(ss: SteadyState) -> EstimatorState:
    return EstimatorState(
        xhat=np.zeros(ss.model.n), P=ss.Pbar.copy(), tau=0
    )


def remote_update(
    state: EstimatorState,
    arrived: bool,
    sensor_estimate: np.ndarray | None,
    model: SystemModel,
    ss: SteadyState,
) -> EstimatorState:
    """Advance the remote estimator by one step.

    On arrival the remote adopts the sensor estimate and its covariance
    resets to ``Pbar``; on a loss the estimate is propagated through A and
    the covariance through one :func:`lyapunov_h`, so ``k`` consecutive
    losses reproduce ``h^k`` of the starting covariance bit for bit.
    """
    if arrived:
        if sensor_estimate is None:
            raise ValueError("arrived=True requires the sensor estimate")
        return EstimatorState(
            xhat=np.asarray(sensor_estimate, dtype=np.float64).copy(),
            P=ss.Pbar.copy(),
            tau=0,
        )
    return EstimatorState(
        xhat=model.A @ state.xhat,
        P=lyapunov_h(model, state.P),
        tau=state.tau + 1,
    )
