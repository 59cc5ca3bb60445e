"""Tracking certificates, containment times, the recurrent barrier, and trajectory checks.

A tracking certificate V(z, e_dot) is sandwiched between a1 ||e_dot|| and
a2 ||e_dot||. Its recurrence property over windows of length tau asks for
some contained time t in (0, tau] with e^{beta t} V(t) <= V(0): V need not
decay monotonically, it must merely keep returning below an exponentially
shrinking level.

The recurrent barrier combines the certificate with a state barrier h:
h_V(z, e_dot) = -V(z, e_dot) + alpha_e h(z), with
alpha_e = a1^2 (beta - alpha) / (a2 C_h M). Its zero-superlevel set is the
certified region: trajectories started there keep h nonnegative even while
h_V itself dips below zero, provided beta > alpha.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._vec import vnorm
from .barrier import BarrierFn
from .dynamics import Trajectory
from .errors import ConfigurationError, HypothesisViolationError


@dataclass(frozen=True)
class Rtf:
    """A tracking certificate with its sandwich constants and recurrence window.

    value(z, e_dot) accepts single states or batches. The declared constants
    promise a1 ||e_dot|| <= V <= a2 ||e_dot||; beta is the recurrence rate and
    tau the window length.
    """

    value: Callable
    a1: float
    a2: float
    beta: float
    tau: float


def norm_rtf(a1: float = 1.0, a2: float = 1.0, beta: float = 2.45, tau: float = 1.0) -> Rtf:
    """The Euclidean certificate V(z, e_dot) = ||e_dot||; a1 = a2 = 1 is canonical."""
    if not (0 < a1 <= a2):
        raise ConfigurationError(f"need 0 < a1 <= a2, got a1={a1!r}, a2={a2!r}")
    if not beta > 0:
        raise ConfigurationError("beta must be positive")
    if not tau > 0:
        raise ConfigurationError("tau must be positive")

    def value(z, e_dot):
        return vnorm(e_dot)

    return Rtf(value=value, a1=float(a1), a2=float(a2), beta=float(beta), tau=float(tau))


@dataclass(frozen=True)
class ContainmentTimes:
    """Sample times inside a window at which a membership predicate holds."""

    traj: Trajectory
    window: tuple[float, float]
    times_in: np.ndarray
    mask: np.ndarray

    def membership(self, t: float) -> bool:
        """Predicate value at the sample nearest to t (within half a step)."""
        i = int(round((t - float(self.traj.t[0])) / self.traj.dt))
        if i < 0 or i >= self.traj.n_samples:
            return False
        if abs(float(self.traj.t[i]) - t) > self.traj.dt / 2:
            return False
        return bool(self.mask[i])


def _window_selector(traj: Trajectory, a: float, b_end: float) -> np.ndarray:
    # (a, b] resolved at sample resolution: strictly after a, within half a
    # step of b so the endpoint sample always counts
    return (traj.t > a) & (traj.t <= b_end + traj.dt / 2)


def containment_times(traj: Trajectory, predicate, window) -> ContainmentTimes:
    """Sample times in the half-open window (a, b] where the predicate holds.

    ``predicate`` maps the trajectory to a boolean mask over samples.
    """
    a, b_end = float(window[0]), float(window[1])
    if not b_end > a:
        raise ConfigurationError("window must have positive length")
    if b_end > traj.horizon + traj.dt / 2:
        raise ConfigurationError(
            f"window end {b_end:g} exceeds the trajectory horizon {traj.horizon:g}"
        )
    mask = np.asarray(predicate(traj), dtype=bool)
    if mask.shape != traj.t.shape:
        raise ConfigurationError("predicate must produce one boolean per sample")
    sel = _window_selector(traj, a, b_end) & mask
    return ContainmentTimes(traj=traj, window=(a, b_end), times_in=traj.t[sel], mask=mask)


@dataclass(frozen=True)
class RecurrenceVerdict:
    """Outcome of a recurrence check: the witness time attains the minimum."""

    satisfied: bool
    witness_t: float | None
    margin: float


def check_rtf_recurrence(
    rtf: Rtf,
    traj: Trajectory,
    s_predicate=None,
    shift: float = 0.0,
) -> RecurrenceVerdict:
    """Recurrence of the certificate along a rollout.

    Evaluates min over contained sample times t in (0, tau] of
    e^{beta t} (V(t) - shift) and compares it to V(0) - shift; margin is the
    difference (nonnegative means satisfied, up to 1e-12 relative slack).
    An empty containment set is reported as not satisfied (conservative).
    ``s_predicate``, when given, restricts the containment times to samples
    where its mask holds; ``shift`` is used by the disturbed variant.
    """
    if traj.horizon + traj.dt / 2 < rtf.tau:
        raise ConfigurationError(
            f"trajectory horizon {traj.horizon:g} is shorter than the window {rtf.tau:g}"
        )
    v0 = float(rtf.value(traj.z[0], traj.e_dot[0])) - shift
    sel = _window_selector(traj, 0.0, rtf.tau)
    if s_predicate is not None:
        mask = np.asarray(s_predicate(traj), dtype=bool)
        if mask.shape != traj.t.shape:
            raise ConfigurationError("predicate must produce one boolean per sample")
        sel = sel & mask
    if not np.any(sel):
        return RecurrenceVerdict(satisfied=False, witness_t=None, margin=float("-inf"))
    tsel = traj.t[sel]
    vals = np.exp(rtf.beta * tsel) * (
        np.asarray(rtf.value(traj.z[sel], traj.e_dot[sel]), dtype=float) - shift
    )
    i = int(np.argmin(vals))
    margin = v0 - float(vals[i])
    satisfied = margin >= -1e-12 * max(1.0, abs(v0))
    return RecurrenceVerdict(satisfied=bool(satisfied), witness_t=float(tsel[i]), margin=float(margin))


@dataclass(frozen=True)
class EnvelopeVerdict:
    holds: bool
    worst_ratio: float


def check_exponential_envelope(traj: Trajectory, beta: float, m: float) -> EnvelopeVerdict:
    """Pointwise ||e_dot(t)|| <= m e^{-beta t} ||e_dot(0)||, 1e-9 relative tolerance.

    A zero initial error is degenerate: the verdict is true only if the error
    stays identically zero.
    """
    en = vnorm(traj.e_dot)
    e0 = float(en[0])
    if e0 == 0.0:
        if np.all(en == 0.0):
            return EnvelopeVerdict(holds=True, worst_ratio=0.0)
        return EnvelopeVerdict(holds=False, worst_ratio=float("inf"))
    ratios = en / (m * e0 * np.exp(-beta * traj.t))
    worst = float(np.max(ratios))
    return EnvelopeVerdict(holds=worst <= 1.0 + 1e-9, worst_ratio=worst)


@dataclass(frozen=True)
class RecurrentCbf:
    """Barrier-minus-certificate function h_V(z, e_dot) = -V + alpha_e h."""

    rtf: Rtf
    barrier: BarrierFn
    alpha: float
    alpha_e: float
    m_overshoot: float

    def value(self, z, e_dot):
        return -np.asarray(self.rtf.value(z, e_dot), dtype=float) + self.alpha_e * np.asarray(
            self.barrier.value(z), dtype=float
        )


def build_rcbf(rtf: Rtf, b: BarrierFn, alpha: float, m: float) -> RecurrentCbf:
    """Construct the recurrent barrier; requires beta > alpha.

    alpha_e = a1^2 (beta - alpha) / (a2 C_h M) with C_h the barrier's gradient
    bound and M the certified tracking overshoot.
    """
    if not alpha > 0:
        raise ConfigurationError("alpha must be positive")
    if not m > 0:
        raise ConfigurationError("overshoot constant must be positive")
    if not b.grad_bound > 0:
        raise ConfigurationError("barrier gradient bound must be positive")
    if not rtf.beta > alpha:
        raise HypothesisViolationError(
            "the recurrence rate must exceed the barrier decay rate "
            f"(beta={rtf.beta:g} <= alpha={alpha:g}); no recurrent barrier exists here"
        )
    alpha_e = rtf.a1 * rtf.a1 * (rtf.beta - alpha) / (rtf.a2 * b.grad_bound * m)
    return RecurrentCbf(rtf=rtf, barrier=b, alpha=float(alpha), alpha_e=float(alpha_e), m_overshoot=float(m))


def in_recurrent_set(rcbf: RecurrentCbf, z, e_dot):
    """Membership in the certified region {h_V >= 0}."""
    return rcbf.value(z, e_dot) >= 0.0


@dataclass(frozen=True)
class RcbfVerdict:
    satisfied: bool
    return_time: float | None


def check_rcbf_recurrence(
    rcbf: RecurrentCbf,
    traj: Trajectory,
    gamma_rate: float,
    s_predicate=None,
) -> RcbfVerdict:
    """Earliest contained t in (0, tau] with e^{gamma_rate t} h_V(t) >= h_V(0).

    The time-scaled comparison lets h_V dip below its initial value as long
    as it recovers within the window at the prescribed rate.
    """
    tau = rcbf.rtf.tau
    if traj.horizon + traj.dt / 2 < tau:
        raise ConfigurationError(
            f"trajectory horizon {traj.horizon:g} is shorter than the window {tau:g}"
        )
    hv = np.asarray(rcbf.value(traj.z, traj.e_dot), dtype=float)
    hv0 = float(hv[0])
    sel = _window_selector(traj, 0.0, tau)
    if s_predicate is not None:
        mask = np.asarray(s_predicate(traj), dtype=bool)
        sel = sel & mask
    idx = np.flatnonzero(sel)
    if idx.size == 0:
        return RcbfVerdict(satisfied=False, return_time=None)
    ok = np.exp(gamma_rate * traj.t[idx]) * hv[idx] >= hv0
    hits = np.flatnonzero(ok)
    if hits.size == 0:
        return RcbfVerdict(satisfied=False, return_time=None)
    return RcbfVerdict(satisfied=True, return_time=float(traj.t[idx[hits[0]]]))


@dataclass(frozen=True)
class ChainReport:
    """Pointwise audit of the barrier lower bound along a rollout.

    slack(t) = h(t) - [e^{-alpha t} h(0) - C_h * I(t)] with I the
    exponentially weighted integral of ||e_dot||, evaluated by trapezoid
    quadrature. closed_form_slack audits the fully resolved endpoint bound
    e^{-alpha t} V(0) (C_h M / (a1 (beta - alpha))) (a2/a1 - 1), which
    degenerates to h >= 0 for a1 = a2.
    """

    t: np.ndarray
    slack: np.ndarray
    min_slack: float
    min_slack_t: float
    closed_form_slack: np.ndarray
    min_closed_form_slack: float
    quadrature: str = "trapezoid"


def check_safety_chain(traj: Trajectory, rcbf: RecurrentCbf) -> ChainReport:
    """Audit h(t) >= e^{-alpha t} h(0) - C_h int_0^t e^{-alpha (t-s)} ||e_dot(s)|| ds."""
    alpha = rcbf.alpha
    c_h = rcbf.barrier.grad_bound
    rtf = rcbf.rtf
    t = traj.t
    dt = traj.dt
    h = np.asarray(rcbf.barrier.value(traj.z), dtype=float)
    en = vnorm(traj.e_dot)

    # I_k = e^{-alpha t_k} * trapezoid of e^{alpha s} ||e_dot(s)||; O(T) via cumsum
    c = np.exp(alpha * t) * en
    csum = np.cumsum(c)
    inner = csum - 0.5 * c - 0.5 * c[0]
    integral = np.exp(-alpha * t) * dt * inner

    lower = np.exp(-alpha * t) * h[0] - c_h * integral
    slack = h - lower
    i = int(np.argmin(slack))

    v0 = float(rtf.value(traj.z[0], traj.e_dot[0]))
    endpoint = (
        np.exp(-alpha * t)
        * v0
        * (c_h * rcbf.m_overshoot / (rtf.a1 * (rtf.beta - alpha)))
        * (rtf.a2 / rtf.a1 - 1.0)
    )
    cf_slack = h - endpoint
    return ChainReport(
        t=t,
        slack=slack,
        min_slack=float(slack[i]),
        min_slack_t=float(t[i]),
        closed_form_slack=cf_slack,
        min_closed_form_slack=float(np.min(cf_slack)),
    )
