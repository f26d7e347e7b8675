"""Guidance-equation integration and oscillator diagnostics.

Trajectories are advanced with classic fixed-step fourth-order Runge-Kutta.
The batch integrator advances many members in lock step (vectorized over the
leading axis); each member is a full joint configuration, never one particle
alone, because the guidance velocity of either particle depends on both.
"""

import math
from dataclasses import dataclass

import numpy as np

from .wavefunctions import Configuration, OscillatorProduct

COMPLETED = "completed"
NODE_ABORTED = "node-aborted"
LEFT_DOMAIN = "left-domain"
STATUSES = (COMPLETED, NODE_ABORTED, LEFT_DOMAIN)

_CODES = {0: COMPLETED, 1: NODE_ABORTED, 2: LEFT_DOMAIN}


def step_count(h, T):
    """Number of uniform steps covering ``[0, T]`` with spacing at most ``h``."""
    if not h > 0:
        raise ValueError("step h must be positive")
    if T < 0:
        raise ValueError("horizon T must be non-negative")
    return int(math.ceil(T / h - 1e-12)) if T > 0 else 0


@dataclass
class Trajectory:
    """Uniformly sampled solution of the guidance equation.

    ``times`` has ``n + 1`` entries and ``q`` shape ``(n + 1, dim)``. When a
    run aborts, ``times``/``q`` stop at the last valid sample.
    """

    times: np.ndarray
    q: np.ndarray
    status: str
    model_kind: str
    h: float
    initial: Configuration

    def __len__(self):
        return len(self.times)

    @property
    def samples(self):
        return [Configuration(float(t), tuple(row)) for t, row in zip(self.times, self.q)]

    @property
    def final(self):
        return Configuration(float(self.times[-1]), tuple(self.q[-1]))


def velocity_field(model, c):
    """Bohmian velocity ``grad S / m`` at configuration ``c``."""
    return model.velocity(c.t, c.array)


def _outside(q, window):
    if window is None or window.x_max is None:
        return np.zeros(q.shape[0], dtype=bool)
    xs, ys = q[:, 0::2], q[:, 1::2]
    return np.any((xs < 0) | (xs > window.x_max) | (np.abs(ys) > window.y_max), axis=1)


def rk4_step(model, t, q, h):
    """One RK4 step for a batch ``q`` of shape ``(n, dim)``.

    Returns the new states, a mask of members for which any stage hit a
    node or an excluded slit ball (their new state is NaN), and the subset
    of that mask caused by an excluded ball.
    """
    stages = [q]
    k1, b1 = model.velocity_masked(t, q)
    stages.append(q + 0.5 * h * k1)
    k2, b2 = model.velocity_masked(t + 0.5 * h, stages[-1])
    stages.append(q + 0.5 * h * k2)
    k3, b3 = model.velocity_masked(t + 0.5 * h, stages[-1])
    stages.append(q + h * k3)
    k4, b4 = model.velocity_masked(t + h, stages[-1])
    new = q + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    bad = b1 | b2 | b3 | b4
    dom = np.zeros_like(bad)
    if np.any(bad):
        # a stage that failed for a member makes the later stages NaN, so the
        # first finite stage position inside a ball identifies a domain exit
        for stage in stages:
            with np.errstate(invalid="ignore"):
                dom |= bad & model.domain_violation(np.nan_to_num(stage, nan=np.inf))
    return new, bad, dom


@dataclass
class BatchResult:
    q: np.ndarray
    status: list
    t_end: np.ndarray
    h: float
    steps: int

    @property
    def status_counts(self):
        return {s: self.status.count(s) for s in STATUSES}


def integrate_batch(model, q0, t0, h, T, window=None, observer=None, finished=None):
    """Advance every row of ``q0`` from ``t0`` to ``t0 + T``.

    The step actually used is ``T / ceil(T / h)`` so the last sample lands
    on the horizon. ``observer(step, t, q, moved)`` is called after the
    initial state and after every step, where ``moved`` flags the members
    whose row was updated (at step 0: the members that start valid). Rows
    of retired members stay frozen at their last state. ``finished(q)`` may
    return a mask of members to retire early with status ``completed``.

    A member whose RK4 stage meets a node is retired as ``node-aborted``;
    one entering an excluded ball or leaving ``window`` as ``left-domain``.
    """
    q = np.array(q0, dtype=float, copy=True)
    if q.ndim != 2 or q.shape[1] != model.dim:
        raise ValueError(f"q0 must have shape (n, {model.dim})")
    n = q.shape[0]
    steps = step_count(h, T)
    h_eff = T / steps if steps else h
    code = np.zeros(n, dtype=np.int8)
    t_end = np.full(n, float(t0))
    active = np.ones(n, dtype=bool)

    _, bad0 = model.velocity_masked(t0, q)
    if np.any(bad0):
        code[bad0] = np.where(model.domain_violation(q)[bad0], 2, 1)
        active &= ~bad0
    if observer is not None:
        observer(0, float(t0), q, active.copy())
    if finished is not None:
        active &= ~finished(q)

    for step in range(1, steps + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        t = t0 + (step - 1) * h_eff
        new, bad, dom = rk4_step(model, t, q[idx], h_eff)
        if np.any(bad):
            bad_idx = idx[bad]
            code[bad_idx] = np.where(dom[bad], 2, 1)
            active[bad_idx] = False
            keep = ~bad
            idx, new = idx[keep], new[keep]
        out = _outside(new, window)
        q[idx] = new
        t_now = t0 + step * h_eff
        t_end[idx] = t_now
        if np.any(out):
            code[idx[out]] = 2
            active[idx[out]] = False
        if observer is not None:
            moved = np.zeros(n, dtype=bool)
            moved[idx] = True
            observer(step, t_now, q, moved)
        if finished is not None:
            idx = np.flatnonzero(active)
            if idx.size:
                done = finished(q[idx])
                active[idx[done]] = False

    return BatchResult(q=q, status=[_CODES[int(c)] for c in code], t_end=t_end, h=h_eff, steps=steps)


class _Recorder:
    def __init__(self, steps, dim):
        self.q = np.full((steps + 1, dim), np.nan)
        self.times = np.full(steps + 1, np.nan)
        self.last = -1

    def __call__(self, step, t, q, moved):
        if moved[0]:
            self.q[step] = q[0]
            self.times[step] = t
            self.last = step


def integrate(model, c0, h, T, window=None):
    """Single trajectory from configuration ``c0`` over horizon ``T``.

    Produces ``ceil(T / h)`` uniform steps ending exactly at ``c0.t + T``.
    ``T = 0`` returns the initial configuration alone.
    """
    steps = step_count(h, T)
    rec = _Recorder(steps, model.dim)
    res = integrate_batch(model, np.asarray(c0.array)[None, :], c0.t, h, T, window=window, observer=rec)
    last = max(rec.last, 0)
    if rec.last < 0:
        rec.q[0], rec.times[0] = c0.array, c0.t
    return Trajectory(times=rec.times[:last + 1], q=rec.q[:last + 1], status=res.status[0],
                      model_kind=model.kind, h=res.h, initial=c0)


# --------------------------------------------------------------------------
# coupled-oscillator closed forms


def oscillator_trajectory_exact(params, Q1_0, Q2_0, t):
    """Closed-form guidance solution for the oscillator packets."""
    t = np.asarray(t, dtype=float)
    Q1 = Q1_0 + params.a1 * (np.cos(params.omega1 * t) - 1.0)
    Q2 = Q2_0 - params.a2 * (np.cos(params.omega2 * t) - 1.0)
    return Q1, Q2


@dataclass(frozen=True)
class QuantumPotentialSample:
    t: float
    Q1: float
    Q2: float


def quantum_potentials(params, t, q):
    """Vectorized quantum potentials ``(Q(1), Q(2))`` at times ``t`` and states ``q``."""
    q = np.asarray(q, dtype=float)
    t = np.asarray(t, dtype=float)
    d1 = q[..., 0] - params.a1 * np.cos(params.omega1 * t)
    d2 = q[..., 1] + params.a2 * np.cos(params.omega2 * t)
    qp1 = 0.5 * params.hbar * params.omega1 - 0.5 * params.omega1**2 * d1**2
    qp2 = 0.5 * params.hbar * params.omega2 - 0.5 * params.omega2**2 * d2**2
    return qp1, qp2


def quantum_potential(params, c):
    qp1, qp2 = quantum_potentials(params, c.t, c.array)
    return QuantumPotentialSample(c.t, float(qp1), float(qp2))


@dataclass
class EnergyResidual:
    """Per-sample ``LHS - RHS`` of the oscillator energy relation, shape ``(n, 2)``."""

    residual: np.ndarray

    @property
    def max_abs(self):
        return float(np.max(np.abs(self.residual))) if self.residual.size else 0.0


def energy_terms(params, t, q, q0):
    """Both sides of the energy relation for each oscillator.

    The left side is ``(P^2 + omega^2 Q^2)/2 + Q_quantum`` with ``P`` the
    guidance momentum; the right side
    ``hbar omega/2 + omega^2 a^2/2 +- omega^2 a (Q(0) -+ a) cos(omega t)``
    follows from substituting the closed-form trajectory.
    """
    p = params
    t = np.asarray(t, dtype=float)
    q = np.asarray(q, dtype=float)
    w1t, w2t = p.omega1 * t, p.omega2 * t
    P1 = -p.omega1 * p.a1 * np.sin(w1t)
    P2 = p.omega2 * p.a2 * np.sin(w2t)
    qp1, qp2 = quantum_potentials(p, t, q)
    lhs1 = 0.5 * (P1**2 + p.omega1**2 * q[..., 0] ** 2) + qp1
    lhs2 = 0.5 * (P2**2 + p.omega2**2 * q[..., 1] ** 2) + qp2
    rhs1 = 0.5 * p.hbar * p.omega1 + 0.5 * p.omega1**2 * p.a1**2 + p.omega1**2 * p.a1 * (q0[0] - p.a1) * np.cos(w1t)
    rhs2 = 0.5 * p.hbar * p.omega2 + 0.5 * p.omega2**2 * p.a2**2 - p.omega2**2 * p.a2 * (q0[1] + p.a2) * np.cos(w2t)
    return np.stack([lhs1, lhs2], axis=-1), np.stack([rhs1, rhs2], axis=-1)


def energy_check(params, traj):
    """Residual of the energy relation along an oscillator trajectory."""
    if traj.model_kind != OscillatorProduct.kind:
        raise ValueError("energy_check needs an OscillatorProduct trajectory")
    # the relation refers to the configuration at t = 0
    c = traj.initial
    q0 = (c.q[0] - params.a1 * (np.cos(params.omega1 * c.t) - 1.0),
          c.q[1] + params.a2 * (np.cos(params.omega2 * c.t) - 1.0))
    lhs, rhs = energy_terms(params, traj.times, traj.q, q0)
    return EnergyResidual(lhs - rhs)


def pair_coordinates(traj):
    """Relative abscissa ``x1 - x2`` and ordinate sum ``y1 + y2`` per sample."""
    q = traj.q if isinstance(traj, Trajectory) else np.asarray(traj)
    if q.shape[-1] != 4:
        raise ValueError("pair coordinates need an interferometer trajectory")
    return q[..., 0] - q[..., 2], q[..., 1] + q[..., 3]
