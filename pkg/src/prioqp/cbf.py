"""Exponential control barrier functions for set-based tasks.

A set task h(x) >= 0 of relative degree r is kept forward invariant by
enforcing

    h^(r) >= -K_alpha @ eta_b,      eta_b = (h, hdot, ..., h^(r-1)),

where K_alpha places the poles of the companion matrix F_b - G_b K_alpha in
the open left half plane.  Along any trajectory satisfying the inequality,
h(t) is lower-bounded by the matrix-exponential envelope
C_b exp((F_b - G_b K_alpha) t) eta_b(0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import DimensionMismatch, NotHurwitz
from .model import PlantState
from .tasks import DynData, SetTask


def companion_matrices(r: int):
    """Integrator-chain (F_b, G_b, C_b) for a scalar output of degree r."""
    F_b = np.zeros((r, r))
    for i in range(r - 1):
        F_b[i, i + 1] = 1.0
    G_b = np.zeros((r, 1))
    G_b[-1, 0] = 1.0
    C_b = np.zeros((1, r))
    C_b[0, 0] = 1.0
    return F_b, G_b, C_b


def validate_kalpha(k_alpha, r: int) -> np.ndarray:
    """Closed-loop eigenvalues of F_b - G_b K_alpha; raises NotHurwitz if any
    lies outside the open left half plane."""
    k_alpha = np.atleast_1d(np.asarray(k_alpha, dtype=float))
    if k_alpha.shape != (r,):
        raise DimensionMismatch(f"K_alpha must have length {r}")
    F_b, G_b, _ = companion_matrices(r)
    eigs = np.linalg.eigvals(F_b - G_b @ k_alpha[None, :])
    eigs = eigs[np.lexsort((eigs.imag, eigs.real))]
    if np.any(eigs.real >= 0):
        raise NotHurwitz(f"closed-loop eigenvalues {eigs} not all in LHP")
    return eigs


def pole_placement_gain(poles) -> np.ndarray:
    """K_alpha whose companion closed loop has the given (stable) poles."""
    poles = np.asarray(poles, dtype=float)
    if np.any(poles >= 0):
        raise NotHurwitz("requested poles must be negative reals")
    coeffs = np.poly(poles)          # [1, a_{r-1}, ..., a_0]
    return coeffs[1:][::-1].copy()   # (a_0, ..., a_{r-1})


@dataclass
class Ecbf:
    """Validated ECBF gain and its companion-form matrices."""

    k_alpha: np.ndarray
    r: int
    F_b: np.ndarray
    G_b: np.ndarray
    C_b: np.ndarray

    @property
    def closed_loop(self) -> np.ndarray:
        return self.F_b - self.G_b @ self.k_alpha[None, :]

    def poles(self) -> np.ndarray:
        return validate_kalpha(self.k_alpha, self.r)


def make_ecbf(k_alpha, r: int | None = None) -> Ecbf:
    k_alpha = np.atleast_1d(np.asarray(k_alpha, dtype=float))
    r = len(k_alpha) if r is None else r
    validate_kalpha(k_alpha, r)
    F_b, G_b, C_b = companion_matrices(r)
    return Ecbf(k_alpha=k_alpha, r=r, F_b=F_b, G_b=G_b, C_b=C_b)


def ecbf_row(ecbf: Ecbf, task: SetTask, state: PlantState,
             dyn: DynData | None = None):
    """Constraint row (a_row, rhs) such that a_row @ u >= rhs encodes
    h^(r) >= -K_alpha eta_b (slack insertion is the hierarchy's job)."""
    if ecbf.r != task.r:
        raise DimensionMismatch(f"task degree {task.r} vs ECBF degree {ecbf.r}")
    a_row, b_scalar = task.io_data(state, dyn)
    eta_b = task.eta_b(state)
    rhs = float(-ecbf.k_alpha @ eta_b - b_scalar)
    return np.atleast_1d(a_row), rhs


def comparison_bound(ecbf: Ecbf, eta_b0: np.ndarray, t: float) -> float:
    """Lower-bound envelope C_b exp((F_b - G_b K_alpha) t) eta_b(0)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    eta_b0 = np.atleast_1d(np.asarray(eta_b0, dtype=float))
    if eta_b0.shape != (ecbf.r,):
        raise DimensionMismatch(f"eta_b0 must have length {ecbf.r}")
    return float(ecbf.C_b @ expm(ecbf.closed_loop * t) @ eta_b0)


def envelope_applies(ecbf: Ecbf, horizon: float = 20.0, samples: int = 400) -> bool:
    """True when the impulse response C_b e^{(F_b-G_b K)t} G_b is nonnegative,
    i.e. when the comparison bound is a valid pointwise guarantee.  Real
    closed-loop poles (e.g. K_alpha = [3, 4]) always qualify."""
    A = ecbf.closed_loop
    for t in np.linspace(0.0, horizon, samples):
        if float(ecbf.C_b @ expm(A * t) @ ecbf.G_b) < -1e-12:
            return False
    return True
