"""Joint detection on the plane ``x = x0``: time average versus space average.

A pair is released from the slits and each particle is detected where it
first crosses the plane ``x = x0``. Detection is labeled: particle 1 can
only fire ``D1`` and particle 2 only ``D2``. The time-ensemble probability
``pStar`` is the fraction of sequential single-pair runs in which both fire.
The space-average ``pBar`` integrates the normalized Born density on the
plane over ``D1 x D2``.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import quadrature
from .dynamics import COMPLETED, integrate_batch
from .ensembles import TIME_ENSEMBLE, EnsembleSpec, sample_initial
from .errors import NoCrossingError, PilotWaveError
from .wavefunctions import SphericalBosonic, SphericalNonOverlap

NONE = "none"
#: Fraction of aborted members above which a joint-probability estimate is invalid.
MAX_ABORTED_FRACTION = 0.01
#: Smallest ``x0 / a`` accepted as far zone.
FAR_ZONE_FACTOR = 10.0


@dataclass(frozen=True)
class DetectorRegion:
    """Interval ``[y_min, y_max]`` on the plane ``x = x0``."""

    x0: float
    y_min: float
    y_max: float
    label: str = "D1"

    def __post_init__(self):
        for name in ("x0", "y_min", "y_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.x0 > 0:
            raise ValueError("x0 must be positive")
        if not self.y_min <= self.y_max:
            raise ValueError("detector needs y_min <= y_max")

    @property
    def width(self):
        return self.y_max - self.y_min

    def contains(self, y):
        return (y >= self.y_min) & (y <= self.y_max)

    def reflected(self, label=None):
        return DetectorRegion(self.x0, -self.y_max, -self.y_min, label or self.label)

    def as_dict(self):
        return {"label": self.label, "x0": self.x0, "y_min": self.y_min, "y_max": self.y_max}


def detector_pair(x0, d1, d2, a=1.0):
    """Validated ``(D1, D2)`` on a common plane in the far zone."""
    if x0 < FAR_ZONE_FACTOR * a:
        raise ValueError(f"x0 = {x0:g} is not in the far zone (need x0 >= {FAR_ZONE_FACTOR:g} a)")
    return DetectorRegion(x0, float(d1[0]), float(d1[1]), "D1"), DetectorRegion(x0, float(d2[0]), float(d2[1]), "D2")


@dataclass(frozen=True)
class DetectionEvent:
    member: int
    particle: int
    t_cross: float
    y_cross: float
    detector: str

    @property
    def crossed(self):
        return not math.isnan(self.t_cross)


def _first_crossing(times, x, y, x0):
    above = x >= x0
    if not above.any():
        return math.nan, math.nan
    j = int(np.argmax(above))
    if j == 0:
        return float(times[0]), float(y[0])
    s = (x0 - x[j - 1]) / (x[j] - x[j - 1])
    return float(times[j - 1] + s * (times[j] - times[j - 1])), float(y[j - 1] + s * (y[j] - y[j - 1]))


def detect(traj, regions, member=0, strict=False):
    """First-crossing detection events ``(particle 1, particle 2)``.

    Crossing time and ordinate are interpolated linearly between the two
    samples that bracket the plane. A particle that never reaches the plane
    gets ``t_cross = nan`` and detector ``"none"``; with ``strict`` it
    raises :class:`NoCrossingError` instead.
    """
    events = []
    for i, region in enumerate(regions):
        t, y = _first_crossing(traj.times, traj.q[:, 2 * i], traj.q[:, 2 * i + 1], region.x0)
        if math.isnan(t):
            if strict:
                raise NoCrossingError(f"particle {i + 1} never reaches x0 = {region.x0:g}")
            events.append(DetectionEvent(member, i + 1, t, y, NONE))
            continue
        events.append(DetectionEvent(member, i + 1, t, y, region.label if region.contains(y) else NONE))
    return tuple(events)


class CrossingTracker:
    """Streaming first-crossing detector for :func:`integrate_batch`.

    Keeps the previous state of every member and records, per particle, the
    interpolated time and ordinate of the first step that reaches ``x0``.
    """

    def __init__(self, n, x0):
        self.x0 = x0
        self.prev = None
        self.prev_t = None
        self.t = np.full((n, 2), np.nan)
        self.y = np.full((n, 2), np.nan)

    def __call__(self, step, t, q, moved):
        x = q[:, 0::2]
        if self.prev is None:
            hit = (x >= self.x0) & moved[:, None]
            self.t[hit] = t
            self.y[hit] = q[:, 1::2][hit]
        else:
            px = self.prev[:, 0::2]
            hit = moved[:, None] & np.isnan(self.t) & (px < self.x0) & (x >= self.x0)
            if hit.any():
                s = (self.x0 - px[hit]) / (x[hit] - px[hit])
                self.t[hit] = self.prev_t + s * (t - self.prev_t)
                py = self.prev[:, 1::2][hit]
                self.y[hit] = py + s * (q[:, 1::2][hit] - py)
        self.prev = q.copy()
        self.prev_t = t

    def finished(self, q):
        return np.all(q[:, 0::2] >= self.x0, axis=1)


class TrajectorySampler:
    """Keeps every ``stride``-th sample of the first ``keep`` members (for plots)."""

    def __init__(self, keep, stride):
        self.keep, self.stride = keep, max(1, stride)
        self.times, self.rows = [], []

    def __call__(self, step, t, q, moved):
        if step % self.stride == 0:
            rows = q[: self.keep].copy()
            rows[~moved[: self.keep]] = np.nan
            self.times.append(t)
            self.rows.append(rows)

    def as_array(self):
        if not self.rows:
            return np.empty(0), np.empty((0, 0, 0))
        return np.array(self.times), np.stack(self.rows, axis=1)


def _track_chunk(args):
    model, q0, t0, h, T, x0, keep, stride = args
    tracker = CrossingTracker(q0.shape[0], x0)
    sampler = TrajectorySampler(keep, stride) if keep else None

    def observer(step, t, q, moved):
        tracker(step, t, q, moved)
        if sampler is not None:
            sampler(step, t, q, moved)

    res = integrate_batch(model, q0, t0, h, T, observer=observer, finished=tracker.finished)
    paths = sampler.as_array() if sampler is not None else None
    return tracker.t, tracker.y, res.status, res.h, paths


def track_crossings(model, q0, t0, h, T, x0, workers=1, keep=0, stride=50):
    """Crossing times/ordinates ``(n, 2)`` and statuses for a batch of pairs.

    Members retire as completed once both particles are past the plane.
    Splitting over ``workers`` processes does not change any result.
    """
    n = q0.shape[0]
    chunks = np.array_split(np.arange(n), max(1, min(workers, n)))
    jobs = [(model, q0[idx], t0, h, T, x0, keep if j == 0 else 0, stride) for j, idx in enumerate(chunks)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_track_chunk, jobs))
    else:
        parts = [_track_chunk(job) for job in jobs]
    t_cross = np.vstack([p[0] for p in parts])
    y_cross = np.vstack([p[1] for p in parts])
    status = [s for p in parts for s in p[2]]
    return t_cross, y_cross, status, parts[0][3], parts[0][4]


def wilson_interval(hits, n, z=1.0):
    """Wilson score interval ``(low, high)`` for ``hits`` successes in ``n`` trials."""
    if n <= 0:
        return 0.0, 1.0
    p = hits / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if hits == 0 else max(0.0, centre - half)
    hi = 1.0 if hits == n else min(1.0, centre + half)
    return lo, hi


@dataclass
class TimeEnsembleEstimate:
    """Joint-detection frequency over sequential single-pair runs.

    ``stderr`` is the half-width of the one-sigma Wilson interval; ``ci95``
    the 95% Wilson interval. Aborted members are excluded from numerator and
    denominator; the estimate is invalid above ``MAX_ABORTED_FRACTION``.
    """

    p: float
    stderr: float
    ci95: tuple
    members: int
    joint: int
    single: int
    miss: int
    aborted: int
    y_cross: np.ndarray = field(default=None, repr=False)
    paths: tuple = field(default=None, repr=False)

    @property
    def valid(self):
        return self.aborted <= MAX_ABORTED_FRACTION * self.members

    def counts(self):
        return {"members": self.members, "joint": self.joint, "single": self.single,
                "miss": self.miss, "aborted": self.aborted}


def joint_probability_time_ensemble(model, spec, regions, h, T=None, workers=1, keep=0, stride=50):
    """``pStar``: fraction of pairs with particle 1 in ``D1`` and particle 2 in ``D2``.

    ``T`` defaults to twice the straight-line flight time ``x0 / v``.
    """
    if spec.kind != TIME_ENSEMBLE:
        raise ValueError("pStar is estimated from a time ensemble")
    d1, d2 = regions
    x0 = d1.x0
    if d2.x0 != x0:
        raise ValueError("both detectors must sit on the same plane")
    if T is None:
        T = 2.0 * x0 / model.params.v
    batch = sample_initial(model, spec)
    t_cross, y_cross, status, _, paths = track_crossings(model, batch.q, batch.t0, h, T, x0,
                                                         workers=workers, keep=keep, stride=stride)
    ok = np.array([s == COMPLETED for s in status])
    hit1 = ~np.isnan(y_cross[:, 0]) & d1.contains(np.nan_to_num(y_cross[:, 0], nan=np.inf))
    hit2 = ~np.isnan(y_cross[:, 1]) & d2.contains(np.nan_to_num(y_cross[:, 1], nan=np.inf))
    joint = int(np.sum(ok & hit1 & hit2))
    single = int(np.sum(ok & (hit1 ^ hit2)))
    aborted = int(np.sum(~ok))
    used = len(status) - aborted
    lo, hi = wilson_interval(joint, used, 1.0)
    lo95, hi95 = wilson_interval(joint, used, 1.959963984540054)
    return TimeEnsembleEstimate(
        p=joint / used if used else math.nan, stderr=0.5 * (hi - lo), ci95=(lo95, hi95),
        members=len(status), joint=joint, single=single, miss=used - joint - single, aborted=aborted,
        y_cross=y_cross, paths=paths)


# --------------------------------------------------------------------------
# space average on the detection plane


def _plane_factors(params, x0, lo, hi, rtol):
    """Single-particle integrals over ``y in [lo, hi]`` on the plane ``x = x0``.

    Returns ``(A, B, C)``: ``A = int 1/rA^2``, ``B = int 1/rB^2`` (closed
    form) and ``C = int exp(ik(rA - rB)) / (rA rB)`` (quadrature) with its
    error estimate.
    """
    a, k = params.a, params.k
    A = (math.atan((hi - a) / x0) - math.atan((lo - a) / x0)) / x0
    B = (math.atan((hi + a) / x0) - math.atan((lo + a) / x0)) / x0
    if hi <= lo:
        return A, B, 0j, 0.0

    def cross(y):
        ra, rb = np.hypot(x0, y - a), np.hypot(x0, y + a)
        return np.exp(-1j * k * 4.0 * a * y / (ra + rb)) / (ra * rb)

    # panels of about a quarter of the fringe spacing x0 * lambda / (2a)
    fringe = x0 * params.wavelength / (2.0 * a)
    panels = max(4, int(math.ceil(4.0 * (hi - lo) / fringe)))
    C, err = quadrature.integrate_1d(cross, lo, hi, rtol=rtol, panels=panels)
    return A, B, C, err


@dataclass(frozen=True)
class SpaceAverageEstimate:
    """``pBar`` with its quadrature error; ``screen`` is the normalizing window."""

    p: float
    error: float
    screen: float
    model: str

    def as_dict(self):
        return {"p": self.p, "error": self.error, "screen": self.screen, "model": self.model}


def plane_density(model, x0, y1, y2):
    """Unnormalized ``|psi|^2`` on the plane ``x1 = x2 = x0`` (vectorized)."""
    y1, y2 = np.broadcast_arrays(np.asarray(y1, float), np.asarray(y2, float))
    q = np.stack([np.full(y1.shape, x0), y1, np.full(y1.shape, x0), y2], axis=-1)
    return np.abs(model.psi(0.0, q)) ** 2 * getattr(model, "norm", 1.0) ** 2


def joint_probability_space_average(model, regions, screen=10.0, rtol=1e-8):
    """``pBar``: the plane density normalized on ``|y| <= screen`` and integrated over ``D1 x D2``.

    The density factorizes into single-particle integrals, so the double
    integral reduces to products of one-dimensional ones. The relative
    error target is well inside ``1e-4``.
    """
    d1, d2 = regions
    x0 = d1.x0
    if d2.x0 != x0:
        raise ValueError("both detectors must sit on the same plane")
    p = model.params
    if not isinstance(model, (SphericalBosonic, SphericalNonOverlap)):
        raise TypeError("pBar needs an interferometer model")
    lo1, hi1 = max(d1.y_min, -screen), min(d1.y_max, screen)
    lo2, hi2 = max(d2.y_min, -screen), min(d2.y_max, screen)
    A1, B1, C1, e1 = _plane_factors(p, x0, lo1, max(lo1, hi1), rtol)
    A2, B2, C2, e2 = _plane_factors(p, x0, lo2, max(lo2, hi2), rtol)
    AS, BS, CS, eS = _plane_factors(p, x0, -screen, screen, rtol)
    if isinstance(model, SphericalNonOverlap):
        num, den = A1 * B2, AS * BS
        err = 0.0
    else:
        # |t1 + t2|^2 = |t1|^2 + |t2|^2 + 2 Re(t1 conj t2); the cross term
        # factorizes into C(D1) * conj(C(D2))
        num = A1 * B2 + B1 * A2 + 2.0 * (C1 * np.conj(C2)).real
        den = 2.0 * AS * BS + 2.0 * abs(CS) ** 2
        err = 2.0 * (abs(C1) * e2 + abs(C2) * e1) / den + 4.0 * abs(CS) * eS * abs(num) / den**2
    value = num / den
    if not -1e-15 <= value <= 1.0 + 1e-12:
        raise PilotWaveError(f"space average {value!r} outside [0, 1]")
    return SpaceAverageEstimate(float(max(value, 0.0)), float(err + 1e-15 * abs(value)), float(screen), model.kind)


# --------------------------------------------------------------------------
# report


@dataclass
class JointDetectionReport:
    """``pStar`` (time ensemble) against ``pBar`` (space average) for one geometry."""

    p_star: TimeEnsembleEstimate
    p_bar: SpaceAverageEstimate
    regions: tuple
    delta0: float
    sigma0: float
    h: float
    T: float
    seed: int

    @property
    def combined_error(self):
        return math.hypot(self.p_star.stderr, self.p_bar.error)

    @property
    def gap_sigmas(self):
        e = self.combined_error
        return (self.p_bar.p - self.p_star.p) / e if e > 0 else math.inf

    @property
    def valid(self):
        return self.p_star.valid

    def to_dict(self):
        return {
            "p_star_dbb": {"p": self.p_star.p, "stderr": self.p_star.stderr,
                           "ci95": list(self.p_star.ci95), "valid": self.p_star.valid},
            "p_bar_sqt": self.p_bar.as_dict(),
            "counts": self.p_star.counts(),
            "geometry": [r.as_dict() for r in self.regions],
            "widths": {"delta0": self.delta0, "sigma0": self.sigma0},
            "h": self.h, "T": self.T, "seed": self.seed,
            "combined_error": self.combined_error,
            "gap_sigmas": self.gap_sigmas,
        }


def joint_detection(model, regions, members, seed, h, T=None, delta0=0.0, sigma0=0.0,
                    screen=10.0, workers=1, keep=0, stride=50):
    spec = EnsembleSpec(kind=TIME_ENSEMBLE, count=members, seed=seed, delta0=delta0, sigma0=sigma0)
    if T is None:
        T = 2.0 * regions[0].x0 / model.params.v
    star = joint_probability_time_ensemble(model, spec, regions, h, T, workers=workers, keep=keep, stride=stride)
    bar = joint_probability_space_average(model, regions, screen)
    return JointDetectionReport(star, bar, tuple(regions), delta0, sigma0, h, T, seed)


def width_sweep(model, regions, widths, members, seed, h, T=None, workers=1):
    """``pStar`` for each ``(delta0, sigma0)``; the same seed gives common random numbers."""
    out = []
    for delta0, sigma0 in widths:
        spec = EnsembleSpec(kind=TIME_ENSEMBLE, count=members, seed=seed, delta0=delta0, sigma0=sigma0)
        est = joint_probability_time_ensemble(model, spec, regions, h, T, workers=workers)
        out.append({"delta0": delta0, "sigma0": sigma0, "p_star": est.p, "stderr": est.stderr,
                    **est.counts()})
    return out


# --------------------------------------------------------------------------
# presets


@dataclass
class Bundle:
    """Everything one preset run produces, before it is written to disk.

    ``tables`` maps file names to ``(header, rows)``; ``plots`` carries the
    arrays the figures are drawn from; ``status`` is ``"ok"`` or
    ``"invalid"``.
    """

    preset: str
    config: dict
    report: dict
    status: str = "ok"
    tables: dict = field(default_factory=dict)
    trajectories: tuple = None
    plots: dict = field(default_factory=dict)


def _oscillator_preset(cfg):
    from .dynamics import integrate
    from .ensembles import GIBBS
    from .ergodicity import compare_means_many, oscillator_observable
    from .wavefunctions import Configuration, OscillatorParams, OscillatorProduct

    params = OscillatorParams(omega1=cfg["omega1"], omega2=cfg["omega2"], a1=cfg["a1"], a2=cfg["a2"],
                              hbar=cfg["hbar"])
    model = OscillatorProduct(params)
    spec = EnsembleSpec(kind=GIBBS, count=cfg["members"], seed=cfg["seed"])
    observables = [oscillator_observable(name) for name in cfg["observables"]]
    reports = compare_means_many(model, spec, observables, cfg["h"], cfg["T"])
    out = {"preset": cfg["preset"], "model": model.kind, "params": vars(params),
           "average_reports": [r.to_dict() for r in reports]}
    plots = {"initial": reports[0].initial, "time_means": {r.observable: r.time_means for r in reports},
             "space_means": {r.observable: r.space_mean for r in reports}}
    # closed form: the time mean of Q1 is Q1(0) - a1, of Q2 is Q2(0) + a2
    predicted = {"Q1": lambda q0: q0[:, 0] - params.a1, "Q2": lambda q0: q0[:, 1] + params.a2}
    checks = {}
    for r in reports:
        if r.observable in predicted and r.time_means.size:
            checks[r.observable] = float(np.max(np.abs(r.time_means - predicted[r.observable](r.initial))))
    out["time_mean_closed_form_max_deviation"] = checks
    traj = None
    if cfg["emit_trajectories"] or cfg["figures"]:
        c0 = Configuration(spec.t0, tuple(reports[0].initial[0])) if reports[0].initial.size else None
        if c0 is not None:
            traj = integrate(model, c0, cfg["h"], cfg["T"])
            plots["trajectory"] = (traj.times, traj.q)
    rows = (["t", "Q1", "Q2"], np.column_stack([traj.times, traj.q]), traj.status) if traj is not None else None
    aborted = sum(r.extra["aborted"] for r in reports)
    status = "ok" if aborted <= MAX_ABORTED_FRACTION * cfg["members"] else "invalid"
    return Bundle(cfg["preset"], cfg, out, status=status, trajectories=rows, plots=plots)


def _interferometer_preset(cfg):
    from .wavefunctions import InterferometerParams

    params = InterferometerParams(k=cfg["k"], a=cfg["a"], m=cfg["m"], hbar=cfg["hbar"], epsilon_r=cfg["epsilon_r"])
    model = SphericalBosonic(params) if cfg["model"] == "bosonic" else SphericalNonOverlap(params)
    regions = detector_pair(cfg["x0"], cfg["d1"], cfg["d2"], params.a)
    keep = 24 if (cfg["figures"] or cfg["emit_trajectories"]) else 0
    rep = joint_detection(model, regions, cfg["members"], cfg["seed"], cfg["h"], cfg["T"], cfg["delta0"],
                          cfg["sigma0"], cfg["screen"], workers=cfg["workers"], keep=keep, stride=25)
    out = {"preset": cfg["preset"], "model": model.kind,
           "params": {"k": params.k, "a": params.a, "m": params.m, "hbar": params.hbar,
                      "epsilon_r": params.epsilon_r, "v": params.v},
           "joint_detection": rep.to_dict(),
           "incompatible": bool(rep.p_star.joint == 0 and rep.p_bar.p > 0 and rep.gap_sigmas > 10)}
    tables = {}
    if cfg["widths"]:
        sweep = width_sweep(model, regions, cfg["widths"], cfg["members"], cfg["seed"], cfg["h"], rep.T,
                            workers=cfg["workers"])
        out["width_sweep"] = sweep
        tables["width_sweep.csv"] = (["delta0", "sigma0", "p_star", "stderr", "joint", "aborted"],
                                     [[s["delta0"], s["sigma0"], s["p_star"], s["stderr"], s["joint"], s["aborted"]]
                                      for s in sweep])
    y = rep.p_star.y_cross
    tables["crossings.csv"] = (["member", "y1_cross", "y2_cross"],
                               np.column_stack([np.arange(y.shape[0]), y]))
    plots = {"y_cross": y, "regions": regions, "paths": rep.p_star.paths, "params": params}
    rows = None
    if cfg["emit_trajectories"] and rep.p_star.paths is not None:
        times, paths = rep.p_star.paths
        flat = [[i, t, *paths[i, j]] for i in range(paths.shape[0]) for j, t in enumerate(times)
                if np.all(np.isfinite(paths[i, j]))]
        rows = (["member", "t", "x1", "y1", "x2", "y2"], np.array(flat), None)
    return Bundle(cfg["preset"], cfg, out, status="ok" if rep.valid else "invalid", tables=tables,
                  trajectories=rows, plots=plots)


def _closing_period(omega):
    from fractions import Fraction

    ratio = omega[1] / omega[0]
    frac = Fraction(ratio).limit_denominator(64)
    if abs(float(frac) - ratio) > 1e-12:
        return None
    return 2.0 * math.pi * frac.denominator / omega[0]


def _torus_preset(cfg):
    from .ergodicity import classical_pendulums

    out = {"preset": cfg["preset"], "grid": cfg["grid"], "T": cfg["T"], "h": cfg["h"], "cases": []}
    rows, plots = [], {}
    traj = None
    for case, alpha in (("rational", cfg["alpha_rational"]), ("irrational", cfg["alpha_irrational"])):
        orbit = classical_pendulums(alpha, cfg["q0"], cfg["qdot0"], cfg["T"], cfg["h"], cfg["grid"])
        info = {"case": case, "alpha": alpha, "omega": list(orbit.omega),
                "ratio": orbit.omega[1] / orbit.omega[0],
                "final_coverage": float(orbit.coverage[-1]),
                "saturation_time": float(orbit.coverage_times[-1])}
        period = _closing_period(orbit.omega)
        if period is not None:
            closed = classical_pendulums(alpha, cfg["q0"], cfg["qdot0"], period, period, cfg["grid"])
            info["period"] = period
            info["recurrence_error"] = float(np.max(np.abs(np.concatenate(
                [closed.q[-1] - closed.q[0], closed.qdot[-1] - closed.qdot[0]]))))
            info["coverage_at_period"] = orbit.coverage_at(period)
        out["cases"].append(info)
        rows.extend([case, float(t), float(c)] for t, c in zip(orbit.coverage_times, orbit.coverage))
        plots[case] = orbit
        if case == "irrational":
            traj = (["t", "q1", "q2", "theta1", "theta2"],
                    np.column_stack([orbit.times, orbit.q, orbit.theta]), "completed")
    tables = {"coverage.csv": (["case", "t", "coverage"], rows)}
    return Bundle(cfg["preset"], cfg, out, tables=tables,
                  trajectories=traj if cfg["emit_trajectories"] else None, plots=plots)


def reference_spectral_system():
    """Four-level system with commensurate gaps, used as the exact reference.

    All Bohr frequencies are multiples of 1/2, so a horizon of whole
    periods of the smallest one makes the uniform Cesaro sum exact.
    """
    from .ergodicity import SpectralSystem

    energies = np.array([0.0, 1.0, 2.5, 4.0])
    c = np.array([1.0, 1j, -1.0, 0.5 + 0.5j])
    c = c / np.linalg.norm(c)
    n = np.arange(4)
    F = 1.0 / (1.0 + np.abs(n[:, None] - n[None, :])) + 0.1j * (n[:, None] - n[None, :])
    return SpectralSystem(energies, c, F)


def _sqt_preset(cfg):
    from .ensembles import round_generator
    from .ergodicity import random_spectral_system, spectral_time_average

    rng = round_generator(cfg["seed"], 0, 3)
    rows, worst_ratio, worst_trace = [], 0.0, 0.0
    verdicts = []
    for i in range(cfg["members"]):
        dim = int(rng.integers(2, cfg["dim_max"] + 1))
        sys = random_spectral_system(rng, dim)
        avg = spectral_time_average(sys)
        dev = abs(avg.cesaro - avg.closed_form)
        worst_ratio = max(worst_ratio, dev / avg.bound)
        worst_trace = max(worst_trace, abs(avg.closed_form - avg.trace))
        verdicts.append(avg.verdict)
        rows.append([i, dim, avg.min_gap, avg.horizon, dev, avg.bound])
    ref = spectral_time_average(reference_spectral_system())
    out = {"preset": cfg["preset"], "systems": cfg["members"], "dim_max": cfg["dim_max"],
           "max_deviation_over_bound": worst_ratio, "max_closed_form_minus_trace": worst_trace,
           "verdicts": {v: verdicts.count(v) for v in sorted(set(verdicts))},
           "reference": ref.to_dict(),
           "reference_deviation": abs(ref.cesaro - ref.trace)}
    tables = {"spectral.csv": (["system", "dim", "min_gap", "T", "deviation", "bound"], rows)}
    return Bundle(cfg["preset"], cfg, out, tables=tables, plots={"rows": np.array(rows)})


_PRESETS = {
    "oscillator-nonergodic": _oscillator_preset,
    "interferometer-incompatibility": _interferometer_preset,
    "classical-torus": _torus_preset,
    "sqt-ergodic": _sqt_preset,
}


def run_preset(name, overrides=None):
    """Run one of the four presets with config ``overrides``; returns a :class:`Bundle`.

    Results depend only on the resolved configuration (seed included).
    """
    from .config import build_config

    cfg = build_config(flag_values={**(overrides or {}), "preset": name})
    return _PRESETS[name](cfg)


def run_config(cfg):
    """Run an already resolved configuration."""
    return _PRESETS[cfg["preset"]](cfg)
