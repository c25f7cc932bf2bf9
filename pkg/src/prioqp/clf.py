"""Rapidly exponentially stabilizing CLFs for equality tasks.

For a task with transverse state eta = (y, ydot, ...) the quadratic form
V_eps = eta^T P_eps eta is synthesized from the continuous-time algebraic
Riccati equation

    F^T P + P F - P G G^T P + Q = 0

on the block integrator pair (F, G).  P_eps rescales P so the closed loop
decays at least at rate gamma/eps, gamma = lambda_min(Q)/lambda_max(P).
The QP constraint row produced here is

    LfV + LgV u <= -(gamma/eps) V  (+ slack, added by the hierarchy).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import (DimensionMismatch, InvalidEps, NoStabilizingSolution)
from .model import PlantState
from .tasks import DynData, EqualityTask


def brunovsky_pair(rho: int, m: int):
    """Block integrator chain (F, G) with m-dimensional blocks."""
    n = rho * m
    F = np.zeros((n, n))
    for i in range(rho - 1):
        F[i * m:(i + 1) * m, (i + 1) * m:(i + 2) * m] = np.eye(m)
    G = np.zeros((n, m))
    G[(rho - 1) * m:, :] = np.eye(m)
    return F, G


def solve_lyapunov(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve A^T P + P A = -Q via the Kronecker-product linear system.

    Sizes here never exceed 8, so the dense n^2 x n^2 solve is cheap.
    """
    n = A.shape[0]
    eye = np.eye(n)
    L = np.kron(A.T, eye) + np.kron(eye, A.T)
    P = np.linalg.solve(L, -Q.reshape(-1)).reshape(n, n)
    return 0.5 * (P + P.T)


def care_residual(F, G, Q, P) -> float:
    R = F.T @ P + P @ F - P @ G @ G.T @ P + Q
    return float(np.linalg.norm(R))


def solve_care(F: np.ndarray, G: np.ndarray, Q: np.ndarray,
               tol: float = 1e-12, max_iter: int = 60) -> np.ndarray:
    """Stabilizing solution of the CARE by Kleinman-Newton iteration.

    Each step solves a Lyapunov equation for the closed loop F - G K and
    updates K = G^T P; the iteration is initialized with a binomial
    pole-placement gain (all poles at s = -1) so the first closed loop is
    already Hurwitz.
    """
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n, m = G.shape
    if F.shape != (n, n) or Q.shape != (n, n):
        raise DimensionMismatch("F, G, Q sizes inconsistent")
    rho = n // m
    if rho * m != n:
        raise DimensionMismatch("G width must divide the state dimension")

    # binomial coefficients of (s+1)^rho give poles at -1 for each channel
    K = np.zeros((m, n))
    for i in range(rho):
        K[:, i * m:(i + 1) * m] = comb(rho, i) * np.eye(m)

    P = None
    for _ in range(max_iter):
        A_cl = F - G @ K
        if np.any(np.linalg.eigvals(A_cl).real >= 0):
            raise NoStabilizingSolution("iterate lost stability")
        P = solve_lyapunov(A_cl, Q + K.T @ K)
        K_next = G.T @ P
        if care_residual(F, G, Q, P) <= tol * (1.0 + np.linalg.norm(P)):
            K = K_next
            break
        K = K_next
    else:
        raise NoStabilizingSolution("Kleinman-Newton did not converge")

    eigs = np.linalg.eigvalsh(P)
    if eigs[0] <= 0:
        raise NoStabilizingSolution("CARE solution not positive definite")
    return P


@dataclass
class ResClf:
    """Synthesized RES-CLF data for one equality task."""

    rho: int
    m: int
    eps: float
    Q: np.ndarray
    P: np.ndarray
    P_eps: np.ndarray
    gamma: float
    F: np.ndarray
    G: np.ndarray

    def value(self, eta: np.ndarray) -> float:
        return float(eta @ self.P_eps @ eta)

    @property
    def decay_rate(self) -> float:
        return self.gamma / self.eps


def make_res_clf(rho: int, m: int, eps: float, Q: np.ndarray | None = None) -> ResClf:
    """Synthesize the RES-CLF for a rho in {1, 2}, m-dimensional task.

    For rho = 2, P_eps = diag(I/eps, I) P diag(I/eps, I); for rho = 1 the
    consistent specialization is P_eps = P / eps^2.  Note eps > 1 is allowed:
    it simply slows the prescribed decay rate gamma/eps.
    """
    if eps <= 0:
        raise InvalidEps(f"eps must be positive, got {eps}")
    if rho not in (1, 2):
        raise DimensionMismatch(f"relative degree {rho} not supported")
    n = rho * m
    Q = np.eye(n) if Q is None else np.asarray(Q, dtype=float)
    if Q.shape != (n, n):
        raise DimensionMismatch(f"Q must be {n}x{n}")
    F, G = brunovsky_pair(rho, m)
    P = solve_care(F, G, Q)
    if rho == 1:
        P_eps = P / eps ** 2
    else:
        T = np.diag(np.concatenate([np.full(m, 1.0 / eps), np.ones(m)]))
        P_eps = T @ P @ T
    gamma = float(np.linalg.eigvalsh(Q)[0] / np.linalg.eigvalsh(P)[-1])
    return ResClf(rho=rho, m=m, eps=eps, Q=Q, P=P, P_eps=P_eps,
                  gamma=gamma, F=F, G=G)


def clf_row(clf: ResClf, task: EqualityTask, state: PlantState,
            dyn: DynData | None = None, literal_paper_form: bool = False):
    """Constraint row (l_g, rhs) such that l_g @ u <= rhs encodes
    LfV + LgV u <= -(gamma/eps) V (slack handled by the caller).

    LfV = eta^T (F^T P_eps + P_eps F) eta + 2 eta^T P_eps G b and
    LgV = 2 eta^T P_eps G A.  With ``literal_paper_form`` the drift term
    uses P instead of P_eps in the b-product (both choices are valid CLF
    certificates; the consistent P_eps form is the default).
    """
    if task.rho != clf.rho or task.dim != clf.m:
        raise DimensionMismatch(
            f"task ({task.rho}, {task.dim}) vs clf ({clf.rho}, {clf.m})")
    eta = task.transverse(state)
    A, b = task.io_data(state, dyn)
    P_drift = clf.P if literal_paper_form else clf.P_eps
    V = clf.value(eta)
    LfV = float(eta @ (clf.F.T @ clf.P_eps + clf.P_eps @ clf.F) @ eta
                + 2.0 * eta @ P_drift @ clf.G @ b)
    l_g = 2.0 * (eta @ clf.P_eps @ clf.G) @ A
    rhs = -clf.decay_rate * V - LfV
    return np.atleast_1d(l_g), float(rhs)
