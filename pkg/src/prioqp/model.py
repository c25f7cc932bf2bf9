"""Simulated plants in Lagrangian form.

Two plants are provided:

* ``DoubleIntegratorChain`` -- m decoupled unit-mass double integrators,
  used for exact analytic verification of the controller machinery.
* ``PlanarSnake`` -- a planar floating-base chain of rigid links with
  body-fixed thrusters and joint torques.  Generalized coordinates are
  ``xi = (x, y, phi, theta_1, ..., theta_nj)`` with inertial-frame
  velocities ``zeta = d(xi)/dt``.

All kinematic quantities of the snake are derived from a complex-number
representation of the chain: a point attached to link k is

    p = (x + i y) + sum_j  l_j * exp(i alpha_j),

where alpha_j = phi + theta_1 + ... + theta_{j-1} is the absolute angle
of link j.  Every derivative of p with respect to an angle coordinate
multiplies the affected segment terms by i, so Jacobians, their time
derivatives, dM/dq and dB/dq are all exact closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidPlant, SingularBBt, SingularInertia, UnknownFrame


@dataclass
class PlantState:
    """Configuration ``xi``, generalized velocity ``zeta`` and time ``t``."""

    xi: np.ndarray
    zeta: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        self.zeta = np.asarray(self.zeta, dtype=float)

    def copy(self) -> "PlantState":
        return PlantState(self.xi.copy(), self.zeta.copy(), self.t)


@dataclass
class PlantMatrices:
    """M, C, D, g, B evaluated at one state."""

    M: np.ndarray
    C: np.ndarray
    D: np.ndarray
    gvec: np.ndarray
    B: np.ndarray


@dataclass(frozen=True)
class TaskPointSpec:
    """Identifies a scalar- or vector-valued kinematic quantity on a plant.

    kind is one of:
      * ``identity``     -- the full configuration vector (double integrator).
      * ``base``         -- planar position of the chain base point.
      * ``end_effector`` -- planar position of the distal end of the last link.
      * ``heading``      -- absolute angle of the last link (1-D).
      * ``link_point``   -- point on ``link`` at arclength ``offset``.
    """

    kind: str
    link: int = 0
    offset: float = 0.0


@dataclass(frozen=True)
class Thruster:
    """Body-fixed thruster: 1-based link index, arclength along the link,
    and thrust direction angle in the link frame (0 = along the link)."""

    link: int
    offset: float
    angle: float


def christoffel_matrix(DM: np.ndarray, zeta: np.ndarray) -> np.ndarray:
    """Coriolis matrix from the partials DM[k] = dM/dq_k.

    C_ij = 1/2 sum_k (dM_ij/dq_k + dM_ik/dq_j - dM_jk/dq_i) zeta_k, which
    makes Mdot - 2C skew-symmetric by construction.
    """
    t1 = np.einsum("kij,k->ij", DM, zeta)
    t2 = np.einsum("jik,k->ij", DM, zeta)
    t3 = np.einsum("ijk,k->ij", DM, zeta)
    return 0.5 * (t1 + t2 - t3)


class DoubleIntegratorChain:
    """m decoupled unit-mass double integrators: M = I, C = D = 0, g = 0, B = I."""

    def __init__(self, size: int):
        if size < 1:
            raise InvalidPlant("size must be >= 1")
        self.size = size

    @property
    def dof(self) -> int:
        return self.size

    @property
    def p_act(self) -> int:
        return self.size

    @property
    def joint_indices(self) -> list[int]:
        return list(range(self.size))

    def eval_matrices(self, state: PlantState) -> PlantMatrices:
        m = self.size
        eye = np.eye(m)
        zero = np.zeros((m, m))
        return PlantMatrices(M=eye, C=zero, D=zero.copy(), gvec=np.zeros(m), B=eye.copy())

    def forward_dynamics(self, state: PlantState, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.size,):
            raise ValueError(f"u must have shape ({self.size},)")
        return u.copy()

    def task_jacobian(self, state: PlantState, point: TaskPointSpec):
        if point.kind != "identity":
            raise UnknownFrame(f"double integrator has no frame {point.kind!r}")
        m = self.size
        return np.eye(m), np.zeros((m, m))

    def point_position(self, state: PlantState, point: TaskPointSpec) -> np.ndarray:
        if point.kind != "identity":
            raise UnknownFrame(f"double integrator has no frame {point.kind!r}")
        return state.xi.copy()


@dataclass
class SnakeParams:
    """Geometric and inertial parameters of the planar snake."""

    link_lengths: list = field(default_factory=lambda: [0.5, 0.5, 0.5])
    masses: list = None
    inertias: list = None          # default m*L^2/12
    com_offsets: list = None       # default L/2
    damping: list = None           # diagonal of D, length dof
    gravity: float = 0.0           # m/s^2 acting along -y (0 = neutrally buoyant)
    thrusters: list = field(default_factory=lambda: [
        Thruster(link=1, offset=0.1, angle=np.pi / 2),
        Thruster(link=1, offset=0.4, angle=0.0),
        Thruster(link=3, offset=0.1, angle=np.pi / 2),
        Thruster(link=3, offset=0.4, angle=0.0),
    ])
    joint_torques: bool = True


class PlanarSnake:
    """Planar floating-base chain with thrusters and joint torques.

    Coordinates: xi = (x, y, phi, theta_1..theta_nj); zeta = d(xi)/dt.
    Actuators: thruster forces first, then joint torques, so
    p_act = n_thrusters + n_joints (when joint torques are enabled).
    """

    def __init__(self, params: SnakeParams | None = None):
        p = params or SnakeParams()
        self.lengths = np.asarray(p.link_lengths, dtype=float)
        self.n_links = len(self.lengths)
        if self.n_links < 1 or np.any(self.lengths <= 0):
            raise InvalidPlant("link lengths must be positive")
        self.n_joints = self.n_links - 1

        self.masses = np.asarray(
            p.masses if p.masses is not None else np.ones(self.n_links), dtype=float)
        if len(self.masses) != self.n_links or np.any(self.masses <= 0):
            raise InvalidPlant("need one positive mass per link")
        self.inertias = np.asarray(
            p.inertias if p.inertias is not None
            else self.masses * self.lengths ** 2 / 12.0, dtype=float)
        self.com_offsets = np.asarray(
            p.com_offsets if p.com_offsets is not None else self.lengths / 2.0,
            dtype=float)
        self.gravity = float(p.gravity)

        self.thrusters = list(p.thrusters)
        for t in self.thrusters:
            if not (1 <= t.link <= self.n_links):
                raise InvalidPlant(f"thruster on nonexistent link {t.link}")
        self.joint_torques = bool(p.joint_torques)

        if p.damping is None:
            self.damping = np.zeros(self.dof)
        else:
            self.damping = np.asarray(p.damping, dtype=float)
            if self.damping.shape != (self.dof,):
                raise InvalidPlant(f"damping must have length {self.dof}")

        # ancestry[k, a] = 1 if angle coordinate a (phi, theta_1, ...) rotates
        # link k+1; phi rotates every link, theta_j rotates links j+1 and up.
        n_ang = 1 + self.n_joints
        anc = np.zeros((self.n_links, n_ang))
        anc[:, 0] = 1.0
        for k in range(self.n_links):
            anc[k, 1:k + 1] = 1.0
        self._ancestry = anc
        self._cache = (None, None)  # (xi bytes, chain data) memo, last state only

    @property
    def dof(self) -> int:
        return 3 + self.n_joints

    @property
    def p_act(self) -> int:
        return len(self.thrusters) + (self.n_joints if self.joint_torques else 0)

    @property
    def joint_indices(self) -> list[int]:
        return list(range(3, 3 + self.n_joints))

    # ------------------------------------------------------------------
    # chain kinematics
    # ------------------------------------------------------------------

    def _abs_angles(self, xi: np.ndarray) -> np.ndarray:
        """Absolute link angles alpha_k = phi + theta_1 + ... + theta_{k-1}."""
        ang = xi[2:]
        return ang[0] + np.concatenate(([0.0], np.cumsum(ang[1:])))

    def _point_terms(self, xi: np.ndarray, link: int, offset: float):
        """Segment contributions (sig, V) of a point on ``link`` (1-based)
        at arclength ``offset``: p = (x+iy) + sum_i sig_i with indicator
        rows V over the angle coordinates."""
        alphas = self._abs_angles(xi)
        lens = np.concatenate((self.lengths[:link - 1], [offset]))
        sig = lens * np.exp(1j * alphas[:link])
        V = self._ancestry[:link]
        return sig, V

    def _point_data(self, xi: np.ndarray, link: int, offset: float):
        """Position and derivatives of an attached point.

        Returns (p, dp, d2p) where dp is the complex gradient over all dof
        (dp[0] = 1, dp[1] = i) and d2p[a, b] the complex second derivative
        over the angle coordinates only.
        """
        sig, V = self._point_terms(xi, link, offset)
        n_ang = self._ancestry.shape[1]
        p = complex(xi[0], xi[1]) + sig.sum()
        dp = np.zeros(self.dof, dtype=complex)
        dp[0] = 1.0
        dp[1] = 1.0j
        dp[2:] = 1j * (V.T @ sig)
        d2p = -np.einsum("ia,i,ib->ab", V, sig, V)
        assert d2p.shape == (n_ang, n_ang)
        return p, dp, d2p

    def _jacobian_from(self, dp: np.ndarray) -> np.ndarray:
        """2 x dof real Jacobian from a complex gradient row."""
        return np.vstack((dp.real, dp.imag))

    def _chain_data(self, xi: np.ndarray):
        """M, dM/dq, g, B, dB/dq and COM data at a configuration (cached)."""
        key = xi.tobytes()
        cached_key, cached_val = self._cache
        if key == cached_key:
            return cached_val

        dof = self.dof
        n_ang = 1 + self.n_joints

        # center-of-mass points
        J_coms = np.zeros((self.n_links, 2, dof))
        dJ_coms = np.zeros((self.n_links, n_ang, 2, dof))
        gvec = np.zeros(dof)
        for k in range(self.n_links):
            _, dp, d2p = self._point_data(xi, k + 1, self.com_offsets[k])
            J_coms[k] = self._jacobian_from(dp)
            for b in range(n_ang):
                dJ_coms[k, b, 0, 2:] = d2p[:, b].real
                dJ_coms[k, b, 1, 2:] = d2p[:, b].imag
            if self.gravity != 0.0:
                gvec += self.masses[k] * self.gravity * dp.imag

        # M = sum m J^T J + sum I w w^T (rotational part constant in q)
        M = np.einsum("k,kad,kae->de", self.masses, J_coms, J_coms)
        w = np.zeros((self.n_links, dof))
        w[:, 2:] = self._ancestry
        M += np.einsum("k,kd,ke->de", self.inertias, w, w)

        DM = np.zeros((dof, dof, dof))
        DM[2:] = (np.einsum("k,kbad,kae->bde", self.masses, dJ_coms, J_coms)
                  + np.einsum("k,kad,kbae->bde", self.masses, J_coms, dJ_coms))

        B, dB = self._actuator_matrix(xi)

        val = {"M": M, "DM": DM, "gvec": gvec, "B": B, "dB": dB}
        self._cache = (key, val)
        return val

    def _actuator_matrix(self, xi: np.ndarray):
        """B (dof x p_act) and its angle partials dB (n_ang, dof, p_act)."""
        dof = self.dof
        n_ang = 1 + self.n_joints
        B = np.zeros((dof, self.p_act))
        dB = np.zeros((n_ang, dof, self.p_act))
        alphas = self._abs_angles(xi)
        for t, thr in enumerate(self.thrusters):
            _, dp, d2p = self._point_data(xi, thr.link, thr.offset)
            d = np.exp(1j * (alphas[thr.link - 1] + thr.angle))
            anc = self._ancestry[thr.link - 1]
            # generalized force: B[a] = Re(conj(dp_a) * d)
            B[:, t] = (np.conj(dp) * d).real
            for b in range(n_ang):
                dB[b, 2:, t] = (np.conj(d2p[:, b]) * d).real
                dB[b, :, t] += (np.conj(dp) * (1j * d * anc[b])).real
        if self.joint_torques:
            for j in range(self.n_joints):
                B[3 + j, len(self.thrusters) + j] = 1.0
        return B, dB

    def _actuator_second_derivs(self, xi: np.ndarray) -> np.ndarray:
        """d2B (n_ang, n_ang, dof, p_act); needed only by the actuation task."""
        dof = self.dof
        n_ang = 1 + self.n_joints
        d2B = np.zeros((n_ang, n_ang, dof, self.p_act))
        alphas = self._abs_angles(xi)
        for t, thr in enumerate(self.thrusters):
            sig, V = self._point_terms(xi, thr.link, thr.offset)
            _, dp, d2p = self._point_data(xi, thr.link, thr.offset)
            d3p = -1j * np.einsum("ia,i,ib,ic->abc", V, sig, V, V)
            d = np.exp(1j * (alphas[thr.link - 1] + thr.angle))
            anc = self._ancestry[thr.link - 1]
            for b in range(n_ang):
                for c in range(n_ang):
                    col = np.zeros(dof)
                    col[2:] = (np.conj(d3p[:, b, c]) * d).real
                    col[2:] += (np.conj(d2p[:, b]) * (1j * d * anc[c])).real
                    col[2:] += (np.conj(d2p[:, c]) * (1j * d * anc[b])).real
                    col += (np.conj(dp) * (-d * anc[b] * anc[c])).real
                    d2B[b, c, :, t] = col
        return d2B

    # ------------------------------------------------------------------
    # plant interface
    # ------------------------------------------------------------------

    def eval_matrices(self, state: PlantState) -> PlantMatrices:
        data = self._chain_data(state.xi)
        C = christoffel_matrix(data["DM"], state.zeta)
        return PlantMatrices(M=data["M"], C=C, D=np.diag(self.damping),
                             gvec=data["gvec"], B=data["B"])

    def forward_dynamics(self, state: PlantState, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.p_act,):
            raise ValueError(f"u must have shape ({self.p_act},)")
        mats = self.eval_matrices(state)
        rhs = mats.B @ u - (mats.C + mats.D) @ state.zeta - mats.gvec
        try:
            return np.linalg.solve(mats.M, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularInertia(str(exc)) from exc

    def _resolve_point(self, point: TaskPointSpec):
        if point.kind == "end_effector":
            return self.n_links, self.lengths[-1]
        if point.kind == "base":
            return 1, 0.0
        if point.kind == "link_point":
            if not (1 <= point.link <= self.n_links):
                raise UnknownFrame(f"no link {point.link}")
            return point.link, point.offset
        raise UnknownFrame(f"snake has no frame {point.kind!r}")

    def task_jacobian(self, state: PlantState, point: TaskPointSpec):
        """J and Jdot of a task point; rows are task-space coordinates."""
        if point.kind == "heading":
            J = np.zeros((1, self.dof))
            J[0, 2:] = self._ancestry[-1]
            return J, np.zeros((1, self.dof))
        link, offset = self._resolve_point(point)
        _, dp, d2p = self._point_data(state.xi, link, offset)
        J = self._jacobian_from(dp)
        # dJ/dt: column a gets sum_b d2p[a,b] * zeta_ang[b]
        dcol = d2p @ state.zeta[2:]
        Jdot = np.zeros_like(J)
        Jdot[0, 2:] = dcol.real
        Jdot[1, 2:] = dcol.imag
        return J, Jdot

    def point_position(self, state: PlantState, point: TaskPointSpec) -> np.ndarray:
        if point.kind == "heading":
            return np.array([self._abs_angles(state.xi)[-1]])
        link, offset = self._resolve_point(point)
        p, _, _ = self._point_data(state.xi, link, offset)
        return np.array([p.real, p.imag])

    def actuation_measure(self, state: PlantState) -> float:
        """det(B B^T), a singularity-distance proxy for the actuator map."""
        B = self._chain_data(state.xi)["B"]
        return float(np.linalg.det(B @ B.T))

    def actuation_measure_derivs(self, state: PlantState):
        """(sigma, grad, hess) of det(B B^T) over the full configuration.

        Gradient via Jacobi's formula sigma * tr(S^{-1} dS); the Hessian
        differentiates it once more.  Raises SingularBBt when S = B B^T is
        numerically singular.
        """
        data = self._chain_data(state.xi)
        B, dB = data["B"], data["dB"]
        d2B = self._actuator_second_derivs(state.xi)
        S = B @ B.T
        sigma = float(np.linalg.det(S))
        if np.linalg.cond(S) > 1e12:
            raise SingularBBt("B B^T numerically singular; Jacobi formula degenerates")
        Sinv = np.linalg.inv(S)

        n_ang = dB.shape[0]
        dS = np.array([dB[b] @ B.T + B @ dB[b].T for b in range(n_ang)])
        tr_b = np.array([np.trace(Sinv @ dS[b]) for b in range(n_ang)])

        grad = np.zeros(self.dof)
        grad[2:] = sigma * tr_b

        hess_ang = np.zeros((n_ang, n_ang))
        for b in range(n_ang):
            for c in range(n_ang):
                d2S = (d2B[b, c] @ B.T + dB[b] @ dB[c].T
                       + dB[c] @ dB[b].T + B @ d2B[b, c].T)
                hess_ang[b, c] = sigma * (
                    tr_b[b] * tr_b[c]
                    - np.trace(Sinv @ dS[c] @ Sinv @ dS[b])
                    + np.trace(Sinv @ d2S))
        hess = np.zeros((self.dof, self.dof))
        hess[2:, 2:] = hess_ang
        return sigma, grad, hess


def actuation_measure(B: np.ndarray) -> float:
    """det(B B^T) for an arbitrary actuator configuration matrix."""
    B = np.asarray(B, dtype=float)
    return float(np.linalg.det(B @ B.T))
