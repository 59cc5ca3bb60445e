"""Model pairs, a fixed-step RK4 integrator, trajectories, and reachable tubes.

A ModelPair couples a full-order vector field F(x, u) with a reduced-order
field f(z, v) through a state projection and an input projection, consistent
in the sense that d/dt project_state(x) = f(project_state(x), project_input(x))
along full-model solutions.

Rollouts are deterministic: fixed step, no adaptive logic, no threading, so a
repeated run reproduces every float bit for bit. The safe velocity is
re-evaluated inside every RK4 substage because the control law is state
feedback evaluated wherever the stage state lands.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from ._io import atomic_write_text
from ._vec import vnorm
from .errors import ConfigurationError, DivergenceError

if TYPE_CHECKING:  # typing only; no runtime dependency on higher layers
    from .controller import ClosedLoopLaw
    from .recurrence import RecurrentCbf
    from .robustness import Disturbance


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integration settings. rk4 is the only supported method."""

    dt: float = 1e-3
    horizon: float = 10.0
    method: str = "rk4"

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if self.horizon < self.dt:
            raise ConfigurationError("horizon must cover at least one step")
        if self.method != "rk4":
            raise ConfigurationError(f"unsupported integration method {self.method!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class ModelPair:
    """A full-order model, a reduced-order model, and the projections linking them."""

    n_full: int
    n_reduced: int
    m_full: int
    m_reduced: int
    fom_field: Callable
    rom_field: Callable
    project_state: Callable
    project_input: Callable
    # analytic Jacobian of project_state when available; finite differences otherwise
    project_state_jacobian: Callable | None = None


_DI_PROJ_JAC = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
_DI_PROJ_JAC.flags.writeable = False


def double_integrator_pair(scenario=None) -> ModelPair:
    """Planar double integrator over a single-integrator reduced model.

    Full state x = (position, velocity) in R^4 with x_dot = (velocity, u);
    reduced state z = position with z_dot = v. The input projection reads the
    velocity, which is exactly the quantity the reduced model commands.
    """
    if scenario is not None:
        start = np.asarray(scenario.start, dtype=float)
        goal = np.asarray(scenario.goal, dtype=float)
        if start.shape != (2,) or goal.shape != (2,):
            raise ConfigurationError(
                "the double-integrator pair needs a planar scenario: start and goal in R^2"
            )

    def fom_field(x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        vel = x[..., 2:4]
        return np.concatenate([vel, np.broadcast_to(u, vel.shape)], axis=-1)

    def rom_field(z, v):
        return np.asarray(v, dtype=float)

    def project_state(x):
        return np.asarray(x, dtype=float)[..., :2]

    def project_input(x):
        return np.asarray(x, dtype=float)[..., 2:4]

    return ModelPair(
        n_full=4,
        n_reduced=2,
        m_full=2,
        m_reduced=2,
        fom_field=fom_field,
        rom_field=rom_field,
        project_state=project_state,
        project_input=project_input,
        project_state_jacobian=lambda x: _DI_PROJ_JAC,
    )


def relative_degree_residual(pair: ModelPair, x, u, fd_step: float = 1e-6) -> np.ndarray:
    """|| J(project_state) F(x, u) - f(project_state(x), project_input(x)) ||.

    Uses the analytic projection Jacobian when the pair declares one, central
    finite differences otherwise.
    """
    x = np.asarray(x, dtype=float)
    fx = pair.fom_field(x, u)
    if pair.project_state_jacobian is not None:
        jac = np.asarray(pair.project_state_jacobian(x), dtype=float)
    else:
        cols = []
        for i in range(pair.n_full):
            e = np.zeros(pair.n_full)
            e[i] = fd_step
            cols.append((pair.project_state(x + e) - pair.project_state(x - e)) / (2 * fd_step))
        jac = np.stack(cols, axis=-1)
    lhs = np.einsum("...ij,...j->...i", jac, fx)
    rhs = pair.rom_field(pair.project_state(x), pair.project_input(x))
    return vnorm(lhs - rhs)


@dataclass(frozen=True)
class TrajectorySample:
    """One recorded instant of a rollout."""

    t: float
    x: np.ndarray
    z: np.ndarray
    z_dot: np.ndarray
    z_s_dot: np.ndarray
    e: np.ndarray
    e_dot: np.ndarray
    u: np.ndarray
    h: float
    grad_h: np.ndarray
    v: float
    h_v: float


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Trajectory:
    """A uniformly sampled rollout with derived safety fields per sample.

    e is the integral of e_dot from zero (the tracked reference starts on the
    trajectory), so e = z - z_s holds by construction with z_s := z - e.
    v is the tracking certificate value and h_v the recurrent barrier value;
    h_v is NaN when no recurrent barrier was supplied to the integrator.
    Arrays are read-only after construction.
    """

    dt: float
    t: np.ndarray
    x: np.ndarray
    z: np.ndarray
    z_dot: np.ndarray
    z_s_dot: np.ndarray
    e: np.ndarray
    e_dot: np.ndarray
    u: np.ndarray
    h: np.ndarray
    grad_h: np.ndarray
    v: np.ndarray
    h_v: np.ndarray

    def __post_init__(self):
        for name in ("t", "x", "z", "z_dot", "z_s_dot", "e", "e_dot", "u", "h", "grad_h", "v", "h_v"):
            arr = getattr(self, name)
            if arr.flags.writeable:
                arr.flags.writeable = False

    @property
    def n_samples(self) -> int:
        return self.t.shape[0]

    @property
    def horizon(self) -> float:
        return float(self.t[-1])

    def sample(self, i: int) -> TrajectorySample:
        return TrajectorySample(
            t=float(self.t[i]),
            x=self.x[i],
            z=self.z[i],
            z_dot=self.z_dot[i],
            z_s_dot=self.z_s_dot[i],
            e=self.e[i],
            e_dot=self.e_dot[i],
            u=self.u[i],
            h=float(self.h[i]),
            grad_h=self.grad_h[i],
            v=float(self.v[i]),
            h_v=float(self.h_v[i]),
        )

    def min_h(self) -> float:
        return float(np.min(self.h))

    def csv_header(self) -> str:
        n = self.x.shape[1]
        r = self.z.shape[1]
        m = self.u.shape[1]
        names = (
            ["t"]
            + [f"x{i}" for i in range(1, n + 1)]
            + [f"z{i}" for i in range(1, r + 1)]
            + [f"zdot{i}" for i in range(1, r + 1)]
            + [f"zsdot{i}" for i in range(1, r + 1)]
            + [f"e{i}" for i in range(1, r + 1)]
            + [f"edot{i}" for i in range(1, r + 1)]
            + [f"u{i}" for i in range(1, m + 1)]
            + ["h", "V", "hV"]
        )
        return ",".join(names)

    def to_csv(self, path, preamble=()) -> None:
        """Write the flat sample table at full round-trip precision, atomically.

        ``preamble`` lines are emitted as leading '#' comments so an artifact
        can carry its own provenance.
        """
        data = np.hstack(
            [
                self.t[:, None],
                self.x,
                self.z,
                self.z_dot,
                self.z_s_dot,
                self.e,
                self.e_dot,
                self.u,
                self.h[:, None],
                self.v[:, None],
                self.h_v[:, None],
            ]
        )
        buf = io.StringIO()
        for line in preamble:
            buf.write(f"# {line}\n")
        buf.write(self.csv_header() + "\n")
        np.savetxt(buf, data, fmt="%.17g", delimiter=",")
        atomic_write_text(path, buf.getvalue())


@dataclass(frozen=True)
class BatchRollout:
    """Column-stacked rollouts from several initial states, one time grid.

    Arrays are shaped (T, K, d) with K the number of runs; scalar fields are
    (T, K). trajectory(k) materializes run k as a standalone Trajectory.
    """

    dt: float
    t: np.ndarray
    x: np.ndarray
    z: np.ndarray
    z_dot: np.ndarray
    z_s_dot: np.ndarray
    e: np.ndarray
    e_dot: np.ndarray
    u: np.ndarray
    h: np.ndarray
    grad_h: np.ndarray
    v: np.ndarray
    h_v: np.ndarray

    @property
    def n_runs(self) -> int:
        return self.x.shape[1]

    def trajectory(self, k: int) -> Trajectory:
        return Trajectory(
            dt=self.dt,
            t=_freeze(np.ascontiguousarray(self.t)),
            x=_freeze(np.ascontiguousarray(self.x[:, k])),
            z=_freeze(np.ascontiguousarray(self.z[:, k])),
            z_dot=_freeze(np.ascontiguousarray(self.z_dot[:, k])),
            z_s_dot=_freeze(np.ascontiguousarray(self.z_s_dot[:, k])),
            e=_freeze(np.ascontiguousarray(self.e[:, k])),
            e_dot=_freeze(np.ascontiguousarray(self.e_dot[:, k])),
            u=_freeze(np.ascontiguousarray(self.u[:, k])),
            h=_freeze(np.ascontiguousarray(self.h[:, k])),
            grad_h=_freeze(np.ascontiguousarray(self.grad_h[:, k])),
            v=_freeze(np.ascontiguousarray(self.v[:, k])),
            h_v=_freeze(np.ascontiguousarray(self.h_v[:, k])),
        )


def rk4_step(f, t, x, dt):
    """One classical Runge-Kutta step of x_dot = f(t, x)."""
    k1 = f(t, x)
    k2 = f(t + 0.5 * dt, x + (0.5 * dt) * k1)
    k3 = f(t + 0.5 * dt, x + (0.5 * dt) * k2)
    k4 = f(t + dt, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_batch(
    pair: ModelPair,
    law,
    x0s,
    cfg: IntegratorConfig,
    rcbf=None,
    disturbance=None,
) -> BatchRollout:
    """Roll the closed loop from each row of x0s and record every derived field.

    The disturbance, when given, enters additively on the full-model input
    channel: x_dot = F(x, u(x) + d(t)), with d evaluated at each substage time.
    Raises DivergenceError at the first non-finite sample.
    """
    x0s = np.asarray(x0s, dtype=float)
    if x0s.ndim != 2 or x0s.shape[1] != pair.n_full:
        raise ConfigurationError(f"initial states must have shape (K, {pair.n_full})")
    n_steps = cfg.n_steps
    n_samp = n_steps + 1
    k_runs = x0s.shape[0]
    dt = cfg.dt
    ts = np.arange(n_samp) * dt
    d_sig = disturbance.signal if disturbance is not None else None

    def f_cl(t, x):
        u = law.u_of_x(x)
        if d_sig is not None:
            u = u + d_sig(t)
        return pair.fom_field(x, u)

    xs = np.empty((n_samp, k_runs, pair.n_full))
    zs = np.empty((n_samp, k_runs, pair.n_reduced))
    zdots = np.empty_like(zs)
    zsdots = np.empty_like(zs)
    edots = np.empty_like(zs)
    us = np.empty((n_samp, k_runs, pair.m_full))
    hs = np.empty((n_samp, k_runs))
    grads = np.empty_like(zs)
    vs = np.empty((n_samp, k_runs))
    hvs = np.empty((n_samp, k_runs))

    b = getattr(law, "barrier", None)
    x = x0s.copy()
    with np.errstate(all="ignore"):
        for k in range(n_samp):
            t = float(ts[k])
            if not np.all(np.isfinite(x)):
                bad = int(np.flatnonzero(~np.isfinite(x).all(axis=-1))[0])
                raise DivergenceError(
                    f"non-finite state at step {k} (t={t:.6g}), run {bad}"
                )
            inter = law.intermediate(x)
            z = pair.project_state(x)
            zdot = pair.rom_field(z, pair.project_input(x))
            zsdot = np.broadcast_to(np.asarray(inter.z_dot_s, dtype=float), z.shape)
            edot = zdot - zsdot
            u = law.u_of_x(x)
            if d_sig is not None:
                u = u + d_sig(t)
            if b is not None:
                hval, grad = b.value_and_gradient(z)
            else:
                hval = np.full(k_runs, np.nan)
                grad = np.full_like(z, np.nan)
            if rcbf is not None:
                vval = rcbf.rtf.value(z, edot)
                hvval = rcbf.value(z, edot)
            else:
                vval = vnorm(edot)
                hvval = np.full(k_runs, np.nan)
            xs[k] = x
            zs[k] = z
            zdots[k] = zdot
            zsdots[k] = zsdot
            edots[k] = edot
            us[k] = u
            hs[k] = hval
            grads[k] = grad
            vs[k] = vval
            hvs[k] = hvval
            if k < n_steps:
                x = rk4_step(f_cl, t, x, dt)

    # e(t) = integral of e_dot, trapezoid rule; the reference starts on the run
    es = np.empty_like(edots)
    es[0] = 0.0
    np.cumsum((edots[:-1] + edots[1:]) * (dt / 2.0), axis=0, out=es[1:])
    return BatchRollout(
        dt=dt,
        t=ts,
        x=xs,
        z=zs,
        z_dot=zdots,
        z_s_dot=zsdots,
        e=es,
        e_dot=edots,
        u=us,
        h=hs,
        grad_h=grads,
        v=vs,
        h_v=hvs,
    )


def integrate(
    pair: ModelPair,
    law,
    x0,
    cfg: IntegratorConfig,
    rcbf=None,
    disturbance=None,
) -> Trajectory:
    """Roll the closed loop from one initial state; see integrate_batch."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (pair.n_full,):
        raise ConfigurationError(f"initial state must have shape ({pair.n_full},)")
    batch = integrate_batch(pair, law, x0[None, :], cfg, rcbf=rcbf, disturbance=disturbance)
    return batch.trajectory(0)


@dataclass(frozen=True)
class ReachableTube:
    """Sampled forward-reachable cloud over a window, with its bounding box."""

    points: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def contains_box(self, other: "ReachableTube") -> bool:
        return bool(np.all(self.lower <= other.lower) and np.all(self.upper >= other.upper))


def reachable_tube_estimate(pair: ModelPair, law, seeds, tau: float, cfg: IntegratorConfig) -> ReachableTube:
    """Sampled under-approximation of the states reached from the seeds within tau."""
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if seeds.shape[0] < 1:
        raise ConfigurationError("at least one seed state is required")
    if not tau > 0:
        raise ConfigurationError("tau must be positive")
    tube_cfg = IntegratorConfig(dt=cfg.dt, horizon=max(tau, cfg.dt), method=cfg.method)
    batch = integrate_batch(pair, law, seeds, tube_cfg)
    pts = batch.x.reshape(-1, pair.n_full)
    return ReachableTube(points=pts, lower=pts.min(axis=0), upper=pts.max(axis=0))
