"""Theta-scheme time stepping for the primal, dual and extended-dual equations.

The semi-discrete system on interior nodes (collar nodes pinned to the datum,
constant exterior datum beyond the box) reads

    du/dt + A_II u = f - A_IC g + T_I u_ext (+ d * drift_load_I).

The mass is the identity: the cell volume already sits inside the assembled
matrix (A u collocates the operator pointwise), so an extra h^d factor would
only rescale time.  Dual variants use the transposed coupling and the dual
tail weights; the extended dual adds the exact constant-drift load, which
makes the shift identity (dual solution minus a constant solves the extended
dual) hold at the level of the discrete recursion.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .discretize import DiscreteForm, Grid

RESIDUAL_TOL = 1e-10


@dataclass
class ParabolicProblem:
    form: object                      # DiscreteForm or callable t -> DiscreteForm
    u0: object                        # initial values on all box nodes (or callable)
    t_start: float
    t_end: float
    dt: float
    f: object = None                  # source: callable (t, points) -> values, or None
    collar: object = None             # collar datum: callable (t, points), array, scalar
    exterior: float = 0.0
    theta: float = 1.0
    variant: str = "primal"           # primal | dual | dual_ext
    d_const: float = 0.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("time step must be positive")
        if not (0.5 <= self.theta <= 1.0):
            raise ValueError("theta must lie in [1/2, 1]")
        if self.variant not in ("primal", "dual", "dual_ext"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.t_end <= self.t_start:
            raise ValueError("empty time interval")

    def form_at(self, t: float) -> DiscreteForm:
        if isinstance(self.form, DiscreteForm):
            return self.form
        return self.form(t)

    @property
    def time_dependent(self) -> bool:
        return not isinstance(self.form, DiscreteForm)


@dataclass
class Solution:
    times: np.ndarray
    snapshots: np.ndarray             # (n_times, n_box_nodes), collar included
    grid: Grid
    meta: dict = field(default_factory=dict)
    residuals: np.ndarray | None = None

    def at_time(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        return self.snapshots[i]

    def window(self, t_lo: float, t_hi: float) -> np.ndarray:
        sel = (self.times >= t_lo - 1e-12) & (self.times <= t_hi + 1e-12)
        if not np.any(sel):
            raise ValueError("no snapshots inside the requested time window")
        return self.snapshots[sel]


def _operator(problem: ParabolicProblem, form: DiscreteForm):
    """System matrix, exterior tail weights and drift load for the variant."""
    if problem.variant == "primal":
        return form.A, form.tail, None
    load = form.drift_load if problem.variant == "dual_ext" else None
    return form.A.T, form.tail_dual, load


def _collar_values(problem: ParabolicProblem, grid: Grid, t: float) -> np.ndarray:
    pts = grid.nodes[grid.collar]
    g = problem.collar
    if g is None:
        return np.zeros(pts.shape[0])
    if callable(g):
        return np.asarray(g(t, pts), dtype=float) * np.ones(pts.shape[0])
    g = np.asarray(g, dtype=float)
    if g.ndim == 0:
        return np.full(pts.shape[0], float(g))
    return g


def _source(problem: ParabolicProblem, grid: Grid, t: float) -> np.ndarray:
    if problem.f is None:
        return np.zeros(int(np.sum(grid.interior)))
    return np.asarray(problem.f(t, grid.nodes[grid.interior]), dtype=float) * np.ones(
        int(np.sum(grid.interior)))


def _rhs_load(problem, form, t):
    """r(t) = M f - A_IC g + T_I u_ext (+ d * load_I) on interior nodes."""
    grid = form.grid
    I = grid.interior
    A, tail, load = _operator(problem, form)
    r = _source(problem, grid, t)
    g = _collar_values(problem, grid, t)
    if np.any(~I):
        r = r - A[np.ix_(I, ~I)] @ g
    r = r + tail[I] * problem.exterior
    if load is not None:
        r = r + problem.d_const * load[I]
    return r


def _solve_refined(lu_piv, Mmat, x_rhs):
    x = sla.lu_solve(lu_piv, x_rhs)
    res = x_rhs - Mmat @ x
    scale = np.linalg.norm(x_rhs)
    nres = np.linalg.norm(res)
    for _ in range(3):
        if nres <= RESIDUAL_TOL * max(scale, 1e-300):
            break
        x = x + sla.lu_solve(lu_piv, res)
        res = x_rhs - Mmat @ x
        nres = np.linalg.norm(res)
    return x, nres / max(scale, 1e-300)


class _Stepper:
    """Caches the LU factorization for time-independent operators."""

    def __init__(self, problem: ParabolicProblem):
        self.problem = problem
        self._cache = {}

    def matrices(self, t_new: float):
        p = self.problem
        key = None if not p.time_dependent else round(t_new, 12)
        if key in self._cache:
            return self._cache[key]
        form = p.form_at(t_new)
        grid = form.grid
        I = grid.interior
        A, _, _ = _operator(p, form)
        A_II = A[np.ix_(I, I)]
        M_impl = np.eye(A_II.shape[0]) + p.theta * p.dt * A_II
        try:
            lu_piv = sla.lu_factor(M_impl)
        except sla.LinAlgError as exc:
            cond = np.linalg.cond(M_impl)
            raise RuntimeError(f"linear solve failed (cond ~ {cond:.2e}): {exc}")
        entry = (form, A_II, M_impl, lu_piv)
        if key is None:
            self._cache[None] = entry
        else:
            self._cache.clear()
            self._cache[key] = entry
        return entry

    def step(self, u_full: np.ndarray, t: float):
        p = self.problem
        form_new, A_II, M_impl, lu_piv = self.matrices(t + p.dt)
        form_old = p.form_at(t) if p.time_dependent and p.theta < 1.0 else form_new
        grid = form_new.grid
        I = grid.interior
        u_I = u_full[I]
        b = u_I.copy()
        if p.theta < 1.0:
            A_old, _, _ = _operator(p, form_old)
            b = b - (1.0 - p.theta) * p.dt * (A_old[np.ix_(I, I)] @ u_I)
            b = b + p.dt * (1.0 - p.theta) * _rhs_load(p, form_old, t)
        b = b + p.dt * p.theta * _rhs_load(p, form_new, t + p.dt)
        u_new_I, rel_res = _solve_refined(lu_piv, M_impl, b)
        if not np.all(np.isfinite(u_new_I)):
            raise RuntimeError(f"non-finite state at t={t + p.dt}")
        out = np.empty_like(u_full)
        out[I] = u_new_I
        out[~I] = _collar_values(p, grid, t + p.dt)
        return out, rel_res


def theta_step(problem: ParabolicProblem, u_full: np.ndarray, t: float,
               stepper: _Stepper | None = None):
    """One theta-scheme step from t to t + dt; returns the new full-box state."""
    stepper = stepper or _Stepper(problem)
    out, _ = stepper.step(np.asarray(u_full, dtype=float), t)
    return out


def solve_parabolic(problem: ParabolicProblem) -> Solution:
    grid = problem.form_at(problem.t_start).grid
    u0 = problem.u0(grid.nodes) if callable(problem.u0) else np.asarray(
        problem.u0, dtype=float)
    if u0.shape != (grid.n_nodes,):
        raise ValueError("initial state must live on all box nodes")
    if not np.all(np.isfinite(u0)):
        raise ValueError("initial state contains non-finite values")
    u = u0.copy()
    u[grid.collar] = _collar_values(problem, grid, problem.t_start)
    n_steps = int(round((problem.t_end - problem.t_start) / problem.dt))
    n_steps = max(n_steps, 1)
    times = problem.t_start + problem.dt * np.arange(n_steps + 1)
    snaps = np.empty((n_steps + 1, grid.n_nodes))
    snaps[0] = u
    residuals = np.empty(n_steps)
    stepper = _Stepper(problem)
    for k in range(n_steps):
        u, residuals[k] = stepper.step(u, times[k])
        snaps[k + 1] = u
    meta = {"variant": problem.variant, "theta": problem.theta, "dt": problem.dt,
            "h": grid.h, "exterior": problem.exterior,
            "d_const": problem.d_const,
            "kernel_hash": problem.form_at(problem.t_start).meta.get("kernel_hash")}
    return Solution(times, snaps, grid, meta, residuals)


def solve_dual_ext(problem: ParabolicProblem) -> Solution:
    """Extended dual run; problem.variant is forced to dual_ext."""
    if problem.variant != "dual_ext":
        raise ValueError("problem.variant must be 'dual_ext'")
    return solve_parabolic(problem)


def default_dt(h: float, alpha: float) -> float:
    """Step matched to the order-alpha parabolic scaling of the cylinders."""
    return 0.25 * h ** alpha


def resolvent_solve(form: DiscreteForm, lam: float, f: np.ndarray,
                    variant: str = "primal") -> np.ndarray:
    """Solve (lam I + A) u = f with zero collar and exterior datum.

    Returns the full-box vector (collar entries zero).  lam must sit above the
    coercivity threshold of the form; singular systems are reported with a
    smallest-singular-value estimate.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    grid = form.grid
    I = grid.interior
    A = form.A if variant == "primal" else form.A.T
    A_II = A[np.ix_(I, I)]
    Mmat = lam * np.eye(A_II.shape[0]) + A_II
    rhs = np.asarray(f, dtype=float)[I]
    try:
        lu_piv = sla.lu_factor(Mmat)
        x, rel = _solve_refined(lu_piv, Mmat, rhs)
    except sla.LinAlgError:
        smin = np.linalg.svd(Mmat, compute_uv=False)[-1]
        raise RuntimeError(f"resolvent system singular (s_min ~ {smin:.3e})")
    if rel > 1e-6:
        smin = np.linalg.svd(Mmat, compute_uv=False)[-1]
        raise RuntimeError(f"resolvent solve unstable (s_min ~ {smin:.3e})")
    out = np.zeros(grid.n_nodes)
    out[I] = x
    return out
