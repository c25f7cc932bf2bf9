"""Equality and set-based tasks.

An equality task drives an output error y to zero; a set-based task keeps a
scalar h nonnegative.  Both expose their input-output data: after rho (resp.
r) time derivatives of the output the control input appears affinely,

    y^(rho) = A(x) u + b(x),        h^(r) = a_row(x) u + b_scalar(x),

and those rows are what the QP levels consume.  All rows are analytic; the
finite-difference oracle in :mod:`prioqp.oracles` cross-checks them in tests.
"""

from __future__ import annotations

import numpy as np

from .errors import (DegenerateDistance, InvalidLimits, InvalidPlant,
                     NonUnitQuaternion, SingularInertia, UnknownFrame)
from .model import PlantState, TaskPointSpec


class DynData:
    """Shared per-state solves: M^{-1}B and M^{-1}(C zeta + D zeta + g).

    Every task row at a given state needs these two products; the controller
    computes one DynData per control step and passes it to all tasks.
    """

    def __init__(self, plant, state: PlantState):
        mats = plant.eval_matrices(state)
        bias = (mats.C + mats.D) @ state.zeta + mats.gvec
        try:
            sol = np.linalg.solve(mats.M, np.column_stack([mats.B, bias]))
        except np.linalg.LinAlgError as exc:
            raise SingularInertia(str(exc)) from exc
        self.mats = mats
        self.Minv_B = sol[:, :-1]
        self.Minv_bias = sol[:, -1]


class RefSchedule:
    """Piecewise-constant reference: value(t) is the entry with the largest
    switch time <= t (the first entry before that)."""

    def __init__(self, entries):
        # entries: list of (time, vector); a bare vector means one constant entry
        self.times = np.array([e[0] for e in entries], dtype=float)
        self.values = [np.atleast_1d(np.asarray(e[1], dtype=float)) for e in entries]
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("schedule times must be strictly increasing")

    @classmethod
    def constant(cls, value) -> "RefSchedule":
        return cls([(0.0, value)])

    def value(self, t: float) -> np.ndarray:
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.values[max(idx, 0)]


# ----------------------------------------------------------------------
# equality tasks
# ----------------------------------------------------------------------

class EqualityTask:
    """Base: output y, transverse state eta = (y, ydot, ...) and (A, b)."""

    name: str
    rho: int
    dim: int

    def output(self, state: PlantState) -> np.ndarray:
        raise NotImplementedError

    def output_rate(self, state: PlantState) -> np.ndarray:
        raise NotImplementedError

    def io_data(self, state: PlantState, dyn: DynData | None = None):
        raise NotImplementedError

    def transverse(self, state: PlantState) -> np.ndarray:
        if self.rho == 1:
            return self.output(state)
        return np.concatenate([self.output(state), self.output_rate(state)])


class PositionTask(EqualityTask):
    """Relative-degree-2 task on the position of a plant point (or the full
    configuration for the double integrator's identity point)."""

    rho = 2

    def __init__(self, plant, point: TaskPointSpec, target: RefSchedule, name: str):
        self.plant = plant
        self.point = point
        self.target = target
        self.name = name
        # probe the frame now so a bad point fails at construction
        self.dim = len(plant.point_position(PlantState(
            np.zeros(plant.dof), np.zeros(plant.dof)), point))

    def output(self, state: PlantState) -> np.ndarray:
        return self.plant.point_position(state, self.point) - self.target.value(state.t)

    def output_rate(self, state: PlantState) -> np.ndarray:
        J, _ = self.plant.task_jacobian(state, self.point)
        return J @ state.zeta

    def io_data(self, state: PlantState, dyn: DynData | None = None):
        dyn = dyn or DynData(self.plant, state)
        J, Jdot = self.plant.task_jacobian(state, self.point)
        A = J @ dyn.Minv_B
        b = Jdot @ state.zeta - J @ dyn.Minv_bias
        return A, b


class VelocityTask(EqualityTask):
    """Relative-degree-1 task regulating a subset of generalized velocities."""

    rho = 1

    def __init__(self, plant, selector, target: RefSchedule, name: str):
        self.plant = plant
        self.selector = list(selector)
        if any(not 0 <= i < plant.dof for i in self.selector):
            raise UnknownFrame(f"velocity selector out of range: {self.selector}")
        self.target = target
        self.name = name
        self.dim = len(self.selector)

    def output(self, state: PlantState) -> np.ndarray:
        return state.zeta[self.selector] - self.target.value(state.t)

    def io_data(self, state: PlantState, dyn: DynData | None = None):
        dyn = dyn or DynData(self.plant, state)
        A = dyn.Minv_B[self.selector]
        b = -dyn.Minv_bias[self.selector]
        return A, b


def make_position_task(plant, point: TaskPointSpec, target, name: str = "position"):
    sched = target if isinstance(target, RefSchedule) else RefSchedule.constant(target)
    return PositionTask(plant, point, sched, name)


def make_velocity_task(plant, selector, target=None, name: str = "velocity"):
    sched = (target if isinstance(target, RefSchedule)
             else RefSchedule.constant(target if target is not None
                                       else np.zeros(len(list(selector)))))
    return VelocityTask(plant, selector, sched, name)


def quaternion_error(q_d: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Imaginary part of the quaternion error between unit quaternions.

    Quaternions are scalar-first, q = (w, ex, ey, ez).  The error vector is

        e = w * eps_d - w_d * eps + eps x eps_d,

    evaluated literally; antipodal inputs therefore give the zero vector
    (same physical orientation, either cover).
    """
    q_d = np.asarray(q_d, dtype=float)
    q = np.asarray(q, dtype=float)
    for qq in (q_d, q):
        if qq.shape != (4,):
            raise NonUnitQuaternion(f"expected 4-vector, got shape {qq.shape}")
        if abs(np.linalg.norm(qq) - 1.0) > 1e-9:
            raise NonUnitQuaternion(f"norm {np.linalg.norm(qq)!r} deviates from 1")
    w, eps = q[0], q[1:]
    w_d, eps_d = q_d[0], q_d[1:]
    return w * eps_d - w_d * eps + np.cross(eps, eps_d)


# ----------------------------------------------------------------------
# set-based tasks
# ----------------------------------------------------------------------

class SetTask:
    """Base: scalar h(x) >= 0, its barrier stack eta_b, and the row of
    h^(r) = a_row u + b_scalar."""

    name: str
    r: int

    def h(self, state: PlantState) -> float:
        raise NotImplementedError

    def hdot(self, state: PlantState) -> float:
        raise NotImplementedError

    def measure(self, state: PlantState) -> float:
        """Raw underlying quantity (distance, determinant, angle)."""
        raise NotImplementedError

    def io_data(self, state: PlantState, dyn: DynData | None = None):
        raise NotImplementedError

    def eta_b(self, state: PlantState) -> np.ndarray:
        if self.r == 1:
            return np.array([self.h(state)])
        return np.array([self.h(state), self.hdot(state)])


class ObstacleTask(SetTask):
    """Keep a plant point outside a circular safety region:
    h = ||p_obs - p|| - (r_obs + d_margin), relative degree 2."""

    r = 2

    def __init__(self, plant, point: TaskPointSpec, center, r_obs: float,
                 d_margin: float, name: str):
        if r_obs <= 0 or d_margin < 0:
            raise InvalidPlant("need r_obs > 0 and d_margin >= 0")
        self.plant = plant
        self.point = point
        self.center = np.asarray(center, dtype=float)
        self.r_obs = float(r_obs)
        self.d_margin = float(d_margin)
        self.name = name

    def _geometry(self, state: PlantState):
        p = self.plant.point_position(state, self.point)
        d = self.center - p
        dist = float(np.linalg.norm(d))
        if dist < 1e-12:
            raise DegenerateDistance(f"task point coincides with obstacle center "
                                     f"for {self.name!r}")
        return d / dist, dist

    def measure(self, state: PlantState) -> float:
        _, dist = self._geometry(state)
        return dist

    def h(self, state: PlantState) -> float:
        return self.measure(state) - (self.r_obs + self.d_margin)

    def hdot(self, state: PlantState) -> float:
        n, _ = self._geometry(state)
        J, _ = self.plant.task_jacobian(state, self.point)
        return float(-n @ (J @ state.zeta))

    def io_data(self, state: PlantState, dyn: DynData | None = None):
        dyn = dyn or DynData(self.plant, state)
        n, dist = self._geometry(state)
        J, Jdot = self.plant.task_jacobian(state, self.point)
        v = J @ state.zeta
        v_perp = v - n * (n @ v)
        a_row = -(n @ J) @ dyn.Minv_B
        b = float(v_perp @ v_perp) / dist - n @ (Jdot @ state.zeta) \
            + (n @ J) @ dyn.Minv_bias
        return a_row, float(b)


class CoordinateBoundTask(SetTask):
    """One-sided bound on a configuration coordinate, relative degree 2:
    h = q[idx] - lo (side=+1) or h = hi - q[idx] (side=-1)."""

    r = 2

    def __init__(self, plant, idx: int, bound: float, side: int, name: str):
        self.plant = plant
        self.idx = int(idx)
        self.bound = float(bound)
        self.side = 1 if side >= 0 else -1
        self.name = name

    def measure(self, state: PlantState) -> float:
        return float(state.xi[self.idx])

    def h(self, state: PlantState) -> float:
        return self.side * (state.xi[self.idx] - self.bound)

    def hdot(self, state: PlantState) -> float:
        return self.side * float(state.zeta[self.idx])

    def io_data(self, state: PlantState, dyn: DynData | None = None):
        dyn = dyn or DynData(self.plant, state)
        a_row = self.side * dyn.Minv_B[self.idx]
        b = -self.side * dyn.Minv_bias[self.idx]
        return a_row, float(b)


class ActuationMeasureTask(SetTask):
    """Keep det(B B^T) above a floor, relative degree 2."""

    r = 2

    def __init__(self, plant, sigma_min: float, name: str):
        if not hasattr(plant, "actuation_measure_derivs"):
            raise InvalidPlant("plant has no configuration-dependent actuator matrix")
        self.plant = plant
        self.sigma_min = float(sigma_min)
        self.name = name

    def measure(self, state: PlantState) -> float:
        return self.plant.actuation_measure(state)

    def h(self, state: PlantState) -> float:
        return self.measure(state) - self.sigma_min

    def hdot(self, state: PlantState) -> float:
        _, grad, _ = self.plant.actuation_measure_derivs(state)
        return float(grad @ state.zeta)

    def io_data(self, state: PlantState, dyn: DynData | None = None):
        dyn = dyn or DynData(self.plant, state)
        _, grad, hess = self.plant.actuation_measure_derivs(state)
        a_row = grad @ dyn.Minv_B
        b = float(state.zeta @ hess @ state.zeta) - grad @ dyn.Minv_bias
        return a_row, float(b)


def make_obstacle_task(plant, point: TaskPointSpec, center, r_obs: float,
                       d_margin: float = 0.0, name: str = "obstacle") -> ObstacleTask:
    return ObstacleTask(plant, point, center, r_obs, d_margin, name)


def make_joint_limit_tasks(plant, theta_min, theta_max,
                           name: str = "jl") -> list[SetTask]:
    """Lower and upper bound tasks for every joint coordinate (2n tasks)."""
    theta_min = np.atleast_1d(np.asarray(theta_min, dtype=float))
    theta_max = np.atleast_1d(np.asarray(theta_max, dtype=float))
    idxs = plant.joint_indices
    if theta_min.shape != (len(idxs),) or theta_max.shape != (len(idxs),):
        raise InvalidLimits(f"need {len(idxs)} limits, got "
                            f"{theta_min.shape} / {theta_max.shape}")
    if np.any(theta_min >= theta_max):
        raise InvalidLimits("theta_min must be < theta_max elementwise")
    tasks: list[SetTask] = []
    for j, idx in enumerate(idxs):
        tasks.append(CoordinateBoundTask(plant, idx, theta_min[j], +1,
                                         f"{name}{j + 1}_lo"))
    for j, idx in enumerate(idxs):
        tasks.append(CoordinateBoundTask(plant, idx, theta_max[j], -1,
                                         f"{name}{j + 1}_hi"))
    return tasks


def make_actuation_task(plant, sigma_min: float,
                        name: str = "actuation") -> ActuationMeasureTask:
    return ActuationMeasureTask(plant, sigma_min, name)
