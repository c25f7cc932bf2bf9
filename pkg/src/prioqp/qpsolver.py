"""Dense convex QP solver.

Solves   min 1/2 v^T H v + c^T v
         s.t. G_ineq v <= h_ineq,   lb <= v <= ub

with a primal-dual interior-point method (Mehrotra predictor-corrector).
H only needs to be positive semidefinite: the Newton systems are solved with
a small static regularization added to the *factorized* matrix only, so the
fixed point (and the reported KKT residuals) belong to the unregularized
problem.  Box bounds are folded into inequality rows internally; the public
problem keeps them separate.

Everything is deterministic: fixed iteration order, no pivoting heuristics,
bitwise-identical outputs for identical inputs.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import IllConditioned

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITERS = "max_iters"


@dataclass
class SolverOptions:
    max_iters: int = 100
    mu_tol: float = 1e-9        # complementarity gap s^T lam / k
    feas_tol: float = 1e-9      # relative primal/dual residual tolerance
    reg: float = 1e-8           # static regularization in the factorization
    step_frac: float = 0.995    # fraction-to-boundary


@dataclass
class QpProblem:
    """min 1/2 v^T H v + c^T v  s.t.  G_ineq v <= h_ineq, lb <= v <= ub."""

    H: np.ndarray
    c: np.ndarray
    G_ineq: np.ndarray | None = None
    h_ineq: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.shape[0]
        if self.H.shape != (n, n):
            raise ValueError(f"H must be {n}x{n}")
        if self.G_ineq is not None:
            self.G_ineq = np.atleast_2d(np.asarray(self.G_ineq, dtype=float))
            self.h_ineq = np.atleast_1d(np.asarray(self.h_ineq, dtype=float))
            if self.G_ineq.shape != (len(self.h_ineq), n):
                raise ValueError("G_ineq/h_ineq shapes inconsistent")
        for name in ("lb", "ub"):
            val = getattr(self, name)
            if val is not None:
                setattr(self, name, np.asarray(val, dtype=float))

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def k(self) -> int:
        return 0 if self.G_ineq is None else self.G_ineq.shape[0]

    def validate(self):
        if np.max(np.abs(self.H - self.H.T), initial=0.0) > 1e-12:
            raise ValueError("H not symmetric")
        if self.n and np.linalg.eigvalsh(0.5 * (self.H + self.H.T))[0] < -1e-10:
            raise ValueError("H not positive semidefinite")
        if self.lb is not None and self.ub is not None:
            both = np.isfinite(self.lb) & np.isfinite(self.ub)
            if np.any(self.lb[both] > self.ub[both]):
                raise ValueError("lb > ub")

    def folded_rows(self):
        """All inequality rows including finite box bounds: rows, rhs, and a
        tag list ('g', i) / ('lb', j) / ('ub', j) identifying each row."""
        rows, rhs, tags = [], [], []
        if self.k:
            rows.append(self.G_ineq)
            rhs.append(self.h_ineq)
            tags += [("g", i) for i in range(self.k)]
        n = self.n
        if self.lb is not None:
            fin = np.where(np.isfinite(self.lb))[0]
            if len(fin):
                E = np.zeros((len(fin), n))
                E[np.arange(len(fin)), fin] = -1.0
                rows.append(E)
                rhs.append(-self.lb[fin])
                tags += [("lb", int(j)) for j in fin]
        if self.ub is not None:
            fin = np.where(np.isfinite(self.ub))[0]
            if len(fin):
                E = np.zeros((len(fin), n))
                E[np.arange(len(fin)), fin] = 1.0
                rows.append(E)
                rhs.append(self.ub[fin])
                tags += [("ub", int(j)) for j in fin]
        if not rows:
            return np.zeros((0, n)), np.zeros(0), tags
        return np.vstack(rows), np.concatenate(rhs), tags

    def objective(self, v: np.ndarray) -> float:
        return float(0.5 * v @ self.H @ v + self.c @ v)


@dataclass
class QpSolution:
    v_opt: np.ndarray
    status: str
    objective: float
    duals: np.ndarray           # multipliers of the G_ineq rows
    duals_lb: np.ndarray
    duals_ub: np.ndarray
    kkt_residuals: tuple        # (stationarity, primal, complementarity)
    iterations: int
    infeasibility: float = 0.0  # stalled primal residual when infeasible

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


def solve(problem: QpProblem, warm_start: np.ndarray | None = None,
          options: SolverOptions | None = None) -> QpSolution:
    """Solve the QP; see module docstring for the method.

    ``warm_start`` is a primal point (e.g. the previous control step's
    solution); its slacks are shifted to the strict interior before use.
    Raises IllConditioned when the Newton factorization fails even after
    boosting the regularization (distinct from primal infeasibility).
    """
    opts = options or SolverOptions()
    problem.validate()
    n = problem.n
    G, h, tags = problem.folded_rows()
    k = G.shape[0]

    def _package(v, s, lam_full, status, iters, infeas=0.0):
        duals = np.zeros(problem.k)
        dlb = np.zeros(n)
        dub = np.zeros(n)
        for val, (kind, idx) in zip(lam_full, tags):
            if kind == "g":
                duals[idx] = val
            elif kind == "lb":
                dlb[idx] = val
            else:
                dub[idx] = val
        r_d = problem.H @ v + problem.c + (G.T @ lam_full if k else 0.0)
        # primal violation measured directly: positive part of Gv - h
        viol = float(np.max(G @ v - h, initial=0.0)) if k else 0.0
        comp = float(s @ lam_full) / k if k else 0.0
        return QpSolution(
            v_opt=v, status=status, objective=problem.objective(v),
            duals=duals, duals_lb=dlb, duals_ub=dub,
            kkt_residuals=(float(np.linalg.norm(r_d, np.inf)), viol, comp),
            iterations=iters, infeasibility=infeas)

    if k == 0:
        # unconstrained: min-norm stationary point of the PSD objective
        v, *_ = np.linalg.lstsq(problem.H, -problem.c, rcond=None)
        status = OPTIMAL if np.linalg.norm(problem.H @ v + problem.c, np.inf) \
            <= opts.feas_tol * (1.0 + np.linalg.norm(problem.c, np.inf)) else MAX_ITERS
        return _package(v, np.zeros(0), np.zeros(0), status, 0)

    v = np.zeros(n) if warm_start is None else np.asarray(warm_start, dtype=float).copy()
    if v.shape != (n,):
        v = np.zeros(n)
    slack0 = h - G @ v
    s = np.maximum(slack0, 0.1 * (1.0 + np.abs(h)))
    lam = np.ones(k)

    c_scale = 1.0 + float(np.linalg.norm(problem.c, np.inf)) if n else 1.0
    h_scale = 1.0 + float(np.linalg.norm(h, np.inf))
    best_rp = np.inf
    stall = 0

    for it in range(1, opts.max_iters + 1):
        r_d = problem.H @ v + problem.c + G.T @ lam
        r_p = G @ v + s - h
        mu = float(s @ lam) / k

        rd_ok = np.linalg.norm(r_d, np.inf) <= opts.feas_tol * c_scale
        rp_ok = np.linalg.norm(r_p, np.inf) <= opts.feas_tol * h_scale
        if rd_ok and rp_ok and mu <= opts.mu_tol:
            return _package(v, s, lam, OPTIMAL, it - 1)

        # infeasibility heuristic: complementarity collapsed or duals blew up
        # while the primal residual stalled away from zero
        rp_norm = float(np.linalg.norm(r_p, np.inf))
        if rp_norm < best_rp * 0.9:
            best_rp = rp_norm
            stall = 0
        else:
            stall += 1
        primal_stuck = best_rp > 1e3 * opts.feas_tol * h_scale
        if primal_stuck and (mu <= opts.mu_tol or stall >= 15
                             or np.max(lam) > 1e10):
            return _package(v, s, lam, INFEASIBLE, it - 1, infeas=best_rp)

        D = lam / s
        reg = opts.reg
        chol = None
        for _ in range(4):
            Mmat = problem.H + reg * np.eye(n) + (G.T * D) @ G
            try:
                chol = cho_factor(Mmat, lower=True, check_finite=False)
                break
            except np.linalg.LinAlgError:
                reg *= 100.0
        if chol is None:
            raise IllConditioned("Newton matrix factorization failed")

        def newton(rc):
            rhs = -r_d + G.T @ (rc / s - D * r_p)
            dv = cho_solve(chol, rhs, check_finite=False)
            ds = -r_p - G @ dv
            dlam = -rc / s - D * ds
            return dv, ds, dlam

        # predictor
        dv_a, ds_a, dl_a = newton(s * lam)
        a_p = min(1.0, _max_step(s, ds_a))
        a_d = min(1.0, _max_step(lam, dl_a))
        mu_aff = float((s + a_p * ds_a) @ (lam + a_d * dl_a)) / k
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

        # corrector
        dv, ds, dlam = newton(s * lam - sigma * mu + ds_a * dl_a)
        a_p = min(1.0, opts.step_frac * _max_step(s, ds))
        a_d = min(1.0, opts.step_frac * _max_step(lam, dlam))
        v = v + a_p * dv
        s = s + a_p * ds
        lam = lam + a_d * dlam

    r_p = G @ v + s - h
    if np.linalg.norm(r_p, np.inf) > 1e3 * opts.feas_tol * h_scale:
        return _package(v, s, lam, INFEASIBLE, opts.max_iters,
                        infeas=float(np.linalg.norm(r_p, np.inf)))
    return _package(v, s, lam, MAX_ITERS, opts.max_iters)


# ----------------------------------------------------------------------
# self-describing text dump (bit-exact round trip via float repr)
# ----------------------------------------------------------------------

def _write_array(out, name: str, arr: np.ndarray | None):
    if arr is None:
        out.write(f"{name} none\n")
        return
    arr = np.asarray(arr, dtype=float)
    dims = " ".join(str(d) for d in arr.shape)
    out.write(f"{name} {len(arr.shape)} {dims}\n")
    flat = arr.reshape(-1)
    out.write(" ".join(repr(float(x)) for x in flat) + "\n")


def _read_array(lines, idx: int):
    head = lines[idx].split()
    name = head[0]
    if head[1] == "none":
        return name, None, idx + 1
    ndim = int(head[1])
    shape = tuple(int(x) for x in head[2:2 + ndim])
    vals = np.array([float(x) for x in lines[idx + 1].split()], dtype=float)
    return name, vals.reshape(shape), idx + 2


def dump_problem(problem: QpProblem) -> str:
    """Serialize to a self-describing text form; floats use repr so the
    round trip is bit exact."""
    out = io.StringIO()
    out.write("prioqp-qp 1\n")
    _write_array(out, "H", problem.H)
    _write_array(out, "c", problem.c)
    _write_array(out, "G", problem.G_ineq)
    _write_array(out, "h", problem.h_ineq)
    _write_array(out, "lb", problem.lb)
    _write_array(out, "ub", problem.ub)
    return out.getvalue()


def load_problem(text: str) -> QpProblem:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("prioqp-qp"):
        raise ValueError("not a prioqp QP dump")
    idx = 1
    fields = {}
    while idx < len(lines):
        name, arr, idx = _read_array(lines, idx)
        fields[name] = arr
    return QpProblem(H=fields["H"], c=fields["c"], G_ineq=fields.get("G"),
                     h_ineq=fields.get("h"), lb=fields.get("lb"),
                     ub=fields.get("ub"))


def save_problem(problem: QpProblem, path) -> None:
    with open(path, "w") as f:
        f.write(dump_problem(problem))


def load_problem_file(path) -> QpProblem:
    with open(path) as f:
        return load_problem(f.read())
