"""Space means, time means and ergodicity verdicts.

Three routes are provided:

* Bohmian ensembles: :func:`space_mean`, :func:`time_mean` and
  :func:`compare_means` contrast ensemble averages with Cesaro averages
  along individual trajectories.
* Quantum mechanics in a finite non-degenerate energy basis:
  :func:`spectral_time_average` checks that the time-averaged expectation
  value equals ``Tr(rho F)`` with the dephased density matrix.
* Classical coupled pendulums: :func:`classical_pendulums` follows the
  orbit on the invariant torus and measures how much of it is visited.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import COMPLETED, integrate_batch, step_count
from .ensembles import EnsembleSpec, GIBBS, sample_initial
from .errors import PilotWaveError

ERGODIC = "ergodic-consistent"
NON_ERGODIC = "non-ergodic"

#: Multiple of the Monte-Carlo error a spread must exceed to count as real.
VERDICT_FACTOR = 5.0


@dataclass(frozen=True)
class Observable:
    """Real function ``func(t, q, p)`` of time, configuration and momentum ``grad S``.

    ``q`` and ``p`` have shape ``(n, dim)``; the result has shape ``(n,)``.
    """

    name: str
    func: object
    needs_momentum: bool = False

    def __call__(self, t, q, p=None):
        return np.asarray(self.func(t, q, p), dtype=float) * np.ones(q.shape[0])


def coordinate(i, name=None):
    return Observable(name or f"q{i}", lambda t, q, p: q[:, i])


def coordinate_power(i, power, name=None):
    return Observable(name or f"q{i}^{power}", lambda t, q, p: q[:, i] ** power)


def momentum(i, name=None):
    return Observable(name or f"p{i}", lambda t, q, p: p[:, i], needs_momentum=True)


def constant(c, name=None):
    return Observable(name or f"const({c:g})", lambda t, q, p: np.full(q.shape[0], float(c)))


def oscillator_observable(name):
    """Named oscillator observables: ``Q1``, ``Q2``, ``Q1^2``, ``Q2^2``, ``P1``, ``P2``, ``1``."""
    table = {
        "Q1": coordinate(0, "Q1"), "Q2": coordinate(1, "Q2"),
        "Q1^2": coordinate_power(0, 2, "Q1^2"), "Q2^2": coordinate_power(1, 2, "Q2^2"),
        "P1": momentum(0, "P1"), "P2": momentum(1, "P2"), "1": constant(1.0, "1"),
    }
    try:
        return table[name]
    except KeyError:
        raise ValueError(f"unknown observable {name!r}; choose from {sorted(table)}") from None


def _evaluate(model, obs, t, q):
    p = model.grad_phase(t, q) if obs.needs_momentum else None
    return obs(t, q, p)


@dataclass(frozen=True)
class MeanEstimate:
    value: float
    stderr: float
    count: int


def space_mean(model, spec, obs, t, h=1e-3):
    """Ensemble average of ``obs`` at time ``t``.

    Members are Born-sampled at ``spec.t0`` and carried to ``t`` by the
    guidance flow; the momentum argument is ``grad S`` at each member, so
    this is the average over the phase-space distribution
    ``P(q, t) delta(p - grad S)``.
    """
    if spec.kind != GIBBS:
        raise ValueError("space means use a Gibbs ensemble")
    batch = sample_initial(model, spec)
    res = integrate_batch(model, batch.q, batch.t0, h, t - batch.t0)
    ok = np.array([s == COMPLETED for s in res.status])
    if ok.sum() < 2:
        raise PilotWaveError("fewer than two usable members for a space mean")
    vals = _evaluate(model, obs, batch.t0 + (t - batch.t0), res.q[ok])
    return MeanEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size)), int(vals.size))


@dataclass(frozen=True)
class TimeMean:
    """Cesaro average along one trajectory with its tail diagnostic.

    ``tail`` is ``|full-horizon average - first-half average|``.
    """

    value: float
    tail: float
    samples: int
    converged: bool


def time_mean(traj, obs, model=None, tol=1e-2):
    """Cesaro average ``(1/N) sum_{n<N} F(q(t_n))`` over a completed trajectory.

    The final sample (at the horizon) is excluded, so a horizon of whole
    periods gives an exact average of any periodic signal sampled uniformly.
    ``model`` is required for momentum observables.
    """
    if traj.status != COMPLETED:
        raise PilotWaveError(f"trajectory status is {traj.status!r}, not completed")
    n = max(len(traj) - 1, 1)
    if obs.needs_momentum:
        if model is None:
            raise ValueError("momentum observables need the model")
        p = np.vstack([model.grad_phase(t, q[None, :]) for t, q in zip(traj.times[:n], traj.q[:n])])
    else:
        p = None
    vals = obs(traj.times[:n], traj.q[:n], p)
    full = float(vals.mean())
    half = float(vals[: max(1, n // 2)].mean())
    tail = abs(full - half)
    return TimeMean(full, tail, n, tail <= tol)


class CesaroAccumulator:
    """Streaming per-member time means for :func:`integrate_batch`.

    Accumulates samples ``0 .. steps-1`` (the horizon sample is skipped) and
    the first-half sums for the tail diagnostic.
    """

    def __init__(self, model, obs, n, steps, members=None):
        self.model, self.obs, self.steps = model, obs, max(steps, 1)
        self.members = np.arange(n) if members is None else members
        m = len(self.members)
        self.total = np.zeros(m)
        self.half = np.zeros(m)
        self.count = np.zeros(m, dtype=np.int64)
        self.half_count = np.zeros(m, dtype=np.int64)

    def __call__(self, step, t, q, moved):
        if step >= self.steps:
            return
        sel = moved[self.members]
        if not sel.any():
            return
        vals = _evaluate(self.model, self.obs, t, q[self.members[sel]])
        self.total[sel] += vals
        self.count[sel] += 1
        if step < max(1, self.steps // 2):
            self.half[sel] += vals
            self.half_count[sel] += 1

    @property
    def means(self):
        return self.total / np.maximum(self.count, 1)

    @property
    def tails(self):
        return np.abs(self.means - self.half / np.maximum(self.half_count, 1))


class EnsembleMeanAccumulator:
    """Streaming time average of the instantaneous ensemble mean and its error."""

    def __init__(self, model, obs, members, steps):
        self.model, self.obs, self.members, self.steps = model, obs, members, max(steps, 1)
        self.mean_sum = 0.0
        self.se_sum = 0.0
        self.samples = 0

    def __call__(self, step, t, q, moved):
        if step >= self.steps:
            return
        sel = self.members[moved[self.members]]
        if sel.size < 2:
            return
        vals = _evaluate(self.model, self.obs, t, q[sel])
        self.mean_sum += float(vals.mean())
        self.se_sum += float(vals.std(ddof=1) / math.sqrt(vals.size))
        self.samples += 1

    @property
    def mean(self):
        return self.mean_sum / max(self.samples, 1)

    @property
    def stderr(self):
        return self.se_sum / max(self.samples, 1)


@dataclass
class AverageReport:
    """Space mean versus per-member time means of one observable.

    ``verdict`` is non-ergodic when the spread of the time means exceeds
    ``VERDICT_FACTOR`` times the Monte-Carlo error (space-mean standard error
    plus the RMS horizon tail), or when their average differs from the space
    mean by more than ``VERDICT_FACTOR`` combined standard errors.
    """

    observable: str
    space_mean: float
    space_stderr: float
    time_means: np.ndarray
    time_tails: np.ndarray
    horizon: float
    h: float
    count: int
    seed: int
    route: str = "bohmian"
    extra: dict = field(default_factory=dict)
    initial: np.ndarray = field(default=None, repr=False)

    @property
    def time_mean_average(self):
        return float(np.mean(self.time_means))

    @property
    def time_spread(self):
        return float(np.std(self.time_means, ddof=1)) if self.time_means.size > 1 else 0.0

    @property
    def horizon_error(self):
        return float(np.sqrt(np.mean(self.time_tails**2))) if self.time_tails.size else 0.0

    @property
    def mc_error(self):
        return self.space_stderr + self.horizon_error

    @property
    def combined_error(self):
        n = max(self.time_means.size, 1)
        return math.hypot(self.space_stderr, self.time_spread / math.sqrt(n)) + self.horizon_error

    @property
    def member_dependent(self):
        return self.time_spread > VERDICT_FACTOR * self.mc_error

    @property
    def mean_mismatch(self):
        return abs(self.time_mean_average - self.space_mean) > VERDICT_FACTOR * self.combined_error

    @property
    def verdict(self):
        return NON_ERGODIC if (self.member_dependent or self.mean_mismatch) else ERGODIC

    def to_dict(self):
        return {
            "route": self.route,
            "observable": self.observable,
            "space_mean": self.space_mean,
            "space_stderr": self.space_stderr,
            "time_mean_average": self.time_mean_average,
            "time_spread": self.time_spread,
            "horizon_error": self.horizon_error,
            "time_means": [float(v) for v in self.time_means],
            "horizon": self.horizon,
            "h": self.h,
            "count": self.count,
            "seed": self.seed,
            "verdict_factor": VERDICT_FACTOR,
            "member_dependent": bool(self.member_dependent),
            "mean_mismatch": bool(self.mean_mismatch),
            "verdict": self.verdict,
            **self.extra,
        }


def compare_means(model, spec, obs, h, T):
    """Contrast the time-averaged space mean with per-member time means.

    ``2 * spec.count`` members are drawn from one seeded stream: the first
    ``count`` give the time means, the other ``count`` an independent Gibbs
    ensemble whose instantaneous mean is itself averaged over the horizon.
    Members that abort are excluded from both and reported in ``extra``.
    """
    return compare_means_many(model, spec, [obs], h, T)[0]


def compare_means_many(model, spec, observables, h, T):
    """:func:`compare_means` for several observables over one integration."""
    n = spec.count
    doubled = EnsembleSpec(kind=GIBBS, count=2 * n, seed=spec.seed, delta0=spec.delta0,
                           sigma0=spec.sigma0, window=spec.window, t0=spec.t0)
    batch = sample_initial(model, doubled)
    steps = step_count(h, T)
    accs = [(CesaroAccumulator(model, obs, 2 * n, steps, members=np.arange(n)),
             EnsembleMeanAccumulator(model, obs, np.arange(n, 2 * n), steps)) for obs in observables]

    def observer(step, t, q, moved):
        for time_acc, space_acc in accs:
            time_acc(step, t, q, moved)
            space_acc(step, t, q, moved)

    res = integrate_batch(model, batch.q, batch.t0, h, T, observer=observer)
    ok = np.array([s == COMPLETED for s in res.status[:n]])
    reports = []
    for obs, (time_acc, space_acc) in zip(observables, accs):
        reports.append(AverageReport(
            observable=obs.name, space_mean=space_acc.mean, space_stderr=space_acc.stderr,
            time_means=time_acc.means[ok], time_tails=time_acc.tails[ok], horizon=float(T),
            h=res.h, count=n, seed=int(spec.seed), initial=batch.q[:n][ok],
            extra={"aborted": int((~ok).sum())},
        ))
    return reports


def joint_distribution(model, c):
    """Phase-space density ``P(q, t) delta(p - grad S(q, t))`` at ``c``.

    Returned as ``(P, grad S)``: the position factor and the support point
    of the momentum delta. The delta itself is never discretized.
    """
    q = c.array[None, :]
    return float(model.born_density(c.t, q)[0]), model.grad_phase(c.t, q)[0]


# --------------------------------------------------------------------------
# finite-dimensional quantum ergodic theorem


@dataclass
class SpectralSystem:
    """Non-degenerate spectrum, state amplitudes and a Hermitian observable.

    ``F`` holds matrix elements ``F[n, m] = <phi_n|F|phi_m>``.
    """

    energies: np.ndarray
    coeffs: np.ndarray
    F: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        self.energies = np.asarray(self.energies, dtype=float)
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        self.F = np.asarray(self.F, dtype=complex)
        d = self.energies.size
        if self.coeffs.shape != (d,) or self.F.shape != (d, d):
            raise ValueError("energies, coeffs and F dimensions disagree")
        if d > 1 and self.min_gap <= 0:
            raise ValueError("degenerate spectrum: energies must be pairwise distinct")
        if not np.allclose(self.F, self.F.conj().T, atol=1e-12, rtol=0):
            raise ValueError("F must be Hermitian")
        if abs(np.sum(np.abs(self.coeffs) ** 2) - 1.0) > 1e-12:
            raise ValueError("coefficients must be normalized")

    @property
    def min_gap(self):
        e = np.sort(self.energies)
        return float(np.min(np.diff(e))) / self.hbar if e.size > 1 else math.inf

    @property
    def max_gap(self):
        return float(np.ptp(self.energies)) / self.hbar

    def expectation(self, t):
        """``<F>(t)`` for an array of times."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        psi = self.coeffs[None, :] * np.exp(-1j * np.outer(t, self.energies) / self.hbar)
        return np.real(np.einsum("tn,nm,tm->t", psi.conj(), self.F, psi))


def random_spectral_system(rng, dim, min_gap=0.1, max_gap=1.0):
    """Random system with gaps in ``[min_gap, max_gap]`` and ``||F|| = 1``."""
    gaps = rng.uniform(min_gap, max_gap, dim - 1)
    energies = np.concatenate([[0.0], np.cumsum(gaps)]) + rng.uniform(-1, 1)
    c = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    c /= np.linalg.norm(c)
    A = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    F = 0.5 * (A + A.conj().T)
    F /= np.linalg.norm(F, 2)
    F = 0.5 * (F + F.conj().T)
    return SpectralSystem(energies[rng.permutation(dim)], c, F)


@dataclass(frozen=True)
class SpectralAverage:
    closed_form: float
    cesaro: float
    trace: float
    horizon: float
    samples: int
    min_gap: float

    @property
    def bound(self):
        """Admissible Cesaro deviation ``5 / (T * min gap)``."""
        return 5.0 / (self.horizon * self.min_gap) if math.isfinite(self.min_gap) else 0.0

    @property
    def verdict(self):
        return ERGODIC if abs(self.cesaro - self.trace) <= self.bound + 1e-12 else NON_ERGODIC

    def to_dict(self):
        return {"route": "spectral", "closed_form": self.closed_form, "cesaro": self.cesaro,
                "trace": self.trace, "horizon": self.horizon, "samples": self.samples,
                "min_gap": self.min_gap, "bound": self.bound,
                "deviation": abs(self.cesaro - self.trace), "verdict": self.verdict}


def spectral_time_average(sys, T=None, periods=100, chunk=4096):
    """Time average of ``<F>(t)`` two ways, plus ``Tr(rho F)``.

    The closed form is ``sum_n |c_n|^2 F_nn``. The numerical route is the
    Cesaro mean of ``<F>(t_j)`` over uniform samples ``t_j = j dt`` covering
    ``T`` (default ``periods`` periods of the smallest Bohr frequency), with
    ``dt`` a quarter of the shortest Bohr half-period so no frequency aliases.
    ``rho`` is the dephased density matrix ``diag(|c_n|^2)``.
    """
    weights = np.abs(sys.coeffs) ** 2
    closed = float(np.real(np.sum(weights * np.diag(sys.F))))
    rho = np.diag(weights)
    trace = float(np.real(np.trace(rho @ sys.F)))
    if sys.energies.size == 1:
        return SpectralAverage(closed, float(np.real(sys.F[0, 0])), trace, 0.0, 1, math.inf)
    wmin, wmax = sys.min_gap, sys.max_gap
    if T is None:
        T = periods * 2.0 * math.pi / wmin
    dt = math.pi / (4.0 * wmax)
    n = int(math.ceil(T / dt))
    dt = T / n
    acc = np.zeros((sys.energies.size, sys.energies.size), dtype=complex)
    for start in range(0, n, chunk):
        t = dt * np.arange(start, min(start + chunk, n))
        psi = sys.coeffs[None, :] * np.exp(-1j * np.outer(t, sys.energies) / sys.hbar)
        acc += psi.T @ psi.conj()
    acc /= n
    cesaro = float(np.real(np.trace(sys.F @ acc)))
    return SpectralAverage(closed, cesaro, trace, float(T), n, wmin)


# --------------------------------------------------------------------------
# classical coupled pendulums


@dataclass
class PendulumOrbit:
    """Sampled orbit of the coupled pendulums and its torus coverage.

    ``theta`` are the two normal-mode angles; ``coverage`` is the fraction of
    the ``grid x grid`` cells of the angle torus visited by time
    ``coverage_times``.
    """

    times: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    Q: np.ndarray
    theta: np.ndarray
    omega: tuple
    grid: int
    coverage_times: np.ndarray
    coverage: np.ndarray

    def coverage_at(self, t):
        i = np.searchsorted(self.coverage_times, t, side="right") - 1
        return float(self.coverage[max(i, 0)])


def torus_first_visits(theta0, omega, T, grid):
    """First-visit times of every cell an angle-torus line enters by ``T``.

    The orbit ``theta0 + omega t`` is a straight line on the torus, so the
    visited cells are found exactly by merging the times at which either
    angle crosses a grid line. A mode with ``omega == 0`` never crosses.
    """
    cell = 2.0 * math.pi / grid
    crossings = [np.array([0.0])]
    for th0, w in zip(theta0, omega):
        if w <= 0:
            continue
        lo = math.floor(th0 / cell) + 1
        hi = math.floor((th0 + w * T) / cell)
        if hi >= lo:
            m = np.arange(lo, hi + 1, dtype=float)
            crossings.append((m * cell - th0) / w)
    starts = np.unique(np.concatenate(crossings))
    starts = starts[starts <= T]
    ends = np.append(starts[1:], T)
    mids = 0.5 * (starts + ends)
    idx = [np.floor(np.mod(th0 + w * mids, 2.0 * math.pi) / cell).astype(np.int64) % grid
           for th0, w in zip(theta0, omega)]
    cells = idx[0] * grid + idx[1]
    _, first = np.unique(cells, return_index=True)
    return np.sort(starts[first])


def classical_pendulums(alpha, q0, qdot0, T, h, grid=64):
    """Small oscillations of two unit pendulums joined by a spring ``alpha``.

    The normal coordinates ``Q1 = (q1 + q2)/sqrt 2`` and
    ``Q2 = (q1 - q2)/sqrt 2`` oscillate independently at ``omega1 = 1`` and
    ``omega2 = sqrt(1 + 2 alpha)``, so the orbit is evaluated in closed form.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    w = np.array([1.0, math.sqrt(1.0 + 2.0 * alpha)])
    s2 = math.sqrt(2.0)
    Q0 = np.array([q0[0] + q0[1], q0[0] - q0[1]]) / s2
    Qd0 = np.array([qdot0[0] + qdot0[1], qdot0[0] - qdot0[1]]) / s2
    steps = step_count(h, T)
    times = np.linspace(0.0, T, steps + 1)
    wt = np.outer(times, w)
    Q = Q0 * np.cos(wt) + Qd0 / w * np.sin(wt)
    Qd = -Q0 * w * np.sin(wt) + Qd0 * np.cos(wt)
    q = np.stack([Q[:, 0] + Q[:, 1], Q[:, 0] - Q[:, 1]], axis=1) / s2
    qd = np.stack([Qd[:, 0] + Qd[:, 1], Qd[:, 0] - Qd[:, 1]], axis=1) / s2
    # angle variables: Q = A cos(theta), Qdot = -A omega sin(theta)
    theta0 = np.mod(np.arctan2(-Qd0 / w, Q0), 2.0 * math.pi)
    amp = np.hypot(Q0, Qd0 / w)
    eff_w = np.where(amp > 0, w, 0.0)
    theta = np.mod(theta0 + np.outer(times, eff_w), 2.0 * math.pi)
    first = torus_first_visits(theta0, eff_w, T, grid)
    coverage = np.arange(1, first.size + 1) / grid**2
    return PendulumOrbit(times=times, q=q, qdot=qd, Q=Q, theta=theta, omega=tuple(w), grid=grid,
                         coverage_times=first, coverage=coverage)
