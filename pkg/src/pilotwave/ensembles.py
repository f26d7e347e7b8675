"""Born-rule sampling of initial configurations and batch evolution.

Random numbers come from numpy's counter-based Philox generator. Draw round
``j`` of stream ``s`` uses key ``seed`` and counter ``(0, 0, j, s)``; each kind
of variate has its own stream and member ``i`` always consumes element ``i``
of every round. A member's sample therefore depends only on ``(seed, i)``:
not on the ensemble size, the number of workers, or the order in which
chunks finish.
"""

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import Trajectory, integrate_batch, STATUSES
from .errors import SamplingError
from .wavefunctions import Configuration, OscillatorProduct, Window, _Spherical

GIBBS = "gibbs"
TIME_ENSEMBLE = "time"
KINDS = (GIBBS, TIME_ENSEMBLE)

_MIN_ACCEPTANCE = 1e-4
_ENVELOPE_WIDTH = 1.25


@dataclass(frozen=True)
class EnsembleSpec:
    """How initial configurations are drawn.

    ``delta0`` and ``sigma0`` are the widths of the Gaussian offsets applied
    to the mirror-symmetric interferometer pair (``x1 - x2`` and ``y1 + y2``);
    they are ignored for the oscillator. ``t0`` is the preparation time of
    oscillator members; interferometer members start at ``epsilon_r / v``.
    """

    kind: str = GIBBS
    count: int = 1000
    seed: int = 0
    delta0: float = 0.0
    sigma0: float = 0.0
    window: Window = None
    t0: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if int(self.count) != self.count or self.count < 1:
            raise ValueError("count must be a positive integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.delta0 < 0 or self.sigma0 < 0:
            raise ValueError("delta0 and sigma0 must be non-negative")

    def as_dict(self):
        d = asdict(self)
        d["window"] = self.window.as_dict() if self.window is not None else None
        return d


@dataclass
class SampleBatch:
    """Initial configurations, one row per member.

    ``rejected`` counts proposals discarded by the sampler; for the
    interferometer ``delta`` and ``sigma`` hold the realized offsets
    ``x1 - x2`` and ``y1 + y2`` at launch.
    """

    q: np.ndarray
    t0: float
    spec: EnsembleSpec
    rejected: int = 0
    provenance: str = ""
    delta: np.ndarray = field(default=None, repr=False)
    sigma: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return self.q.shape[0]

    @property
    def members(self):
        return [Configuration(self.t0, tuple(row)) for row in self.q]

    @property
    def acceptance_rate(self):
        return len(self) / (len(self) + self.rejected)


def round_generator(seed, round_index, stream=0):
    """Generator for draw round ``round_index`` of ``stream``."""
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, int(round_index), int(stream)]))


def spec_hash(model, spec):
    payload = json.dumps({"model": repr(model), "spec": spec.as_dict()}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def _sample_oscillator(model, spec):
    p = model.params
    window = spec.window or Window.oscillator_default(p)
    c1, c2 = model.centers(spec.t0)
    centers = np.array([c1, c2], dtype=float)
    sig = np.array([p.sigma1, p.sigma2])
    env = _ENVELOPE_WIDTH * sig
    n = spec.count
    out = np.empty((n, 2))
    pending = np.ones(n, dtype=bool)
    proposals = 0
    rnd = 0
    while pending.any():
        z = round_generator(spec.seed, rnd, 0).standard_normal((n, 2))
        u = round_generator(spec.seed, rnd, 1).random(n)
        rnd += 1
        cand = centers + env * z
        # target / (M * envelope) with M = prod(env / sig), the ratio at the centre
        log_ratio = -0.5 * np.sum(((cand - centers) / sig) ** 2 - z**2, axis=1)
        ok = u <= np.exp(log_ratio)
        ok &= (cand[:, 0] >= window.xlim[0]) & (cand[:, 0] <= window.xlim[1])
        ok &= (cand[:, 1] >= window.ylim[0]) & (cand[:, 1] <= window.ylim[1])
        proposals += int(pending.sum())
        take = pending & ok
        out[take] = cand[take]
        pending &= ~take
        accepted = n - int(pending.sum())
        if proposals >= 10_000 * n and accepted / proposals < _MIN_ACCEPTANCE:
            raise SamplingError("window too small: acceptance rate below 1e-4")
        if rnd > 10_000:
            raise SamplingError("window too small: rejection sampler did not terminate")
    return out, proposals - n, None, None


def launch_pair(params, theta, delta=0.0, sigma=0.0):
    """Initial pair on the launch circles ``r = epsilon_r`` around each slit.

    Particle 1 leaves slit A at angle ``theta``. Particle 2 starts at the
    mirror image ``(x1, -y1)`` displaced by ``(-delta, +sigma)`` and pulled
    radially back onto its own launch circle around slit B, so both
    wavefronts have the same radius ``v t0``. Only the tangential part of the
    displacement survives that projection; zero offsets give the exact
    mirror pair. Returns an array of shape ``(n, 4)``.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    delta = np.broadcast_to(np.asarray(delta, dtype=float), theta.shape)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), theta.shape)
    r0, a = params.epsilon_r, params.a
    x1 = r0 * np.cos(theta)
    y1 = a + r0 * np.sin(theta)
    dx, dy = x1 - delta, -y1 + sigma + a
    scale = r0 / np.hypot(dx, dy)
    exact = (delta == 0.0) & (sigma == 0.0)
    x2 = np.where(exact, x1, scale * dx)
    y2 = np.where(exact, -y1, -a + scale * dy)
    return np.stack([x1, y1, x2, y2], axis=-1)


def pair_with_separation(params, theta, delta):
    """Pair on the launch circles whose abscissae differ by exactly ``delta``.

    Particle 2's angle is solved from ``cos(phi) = cos(theta) - delta / r0``;
    the ordinate sum follows from the geometry.
    """
    r0, a = params.epsilon_r, params.a
    x1 = r0 * math.cos(theta)
    c = math.cos(theta) - delta / r0
    if not 0.0 <= c <= 1.0:
        raise ValueError("separation not reachable on the launch circle at this angle")
    phi = math.acos(c) * (1 if theta >= 0 else -1)
    return np.array([x1, a + r0 * math.sin(theta), x1 - delta, -a - r0 * math.sin(phi)])


def _sample_interferometer(model, spec):
    p = model.params
    n = spec.count
    theta = round_generator(spec.seed, 0, 2).uniform(-0.5 * math.pi, 0.5 * math.pi, n)
    out = np.empty((n, 4))
    pending = np.ones(n, dtype=bool)
    rejected = 0
    rnd = 1
    while pending.any():
        d = round_generator(spec.seed, rnd, 0).standard_normal(n) * spec.delta0
        s = round_generator(spec.seed, rnd, 1).standard_normal(n) * spec.sigma0
        rnd += 1
        cand = launch_pair(p, theta, d, s)
        ok = (cand[:, 0] > 0) & (cand[:, 2] > 0)
        take = pending & ok
        out[take] = cand[take]
        rejected += int((pending & ~ok).sum())
        pending &= ~take
        if rnd > 1000:
            raise SamplingError("offset widths too large for the launch circle")
    return out, rejected, out[:, 0] - out[:, 2], out[:, 1] + out[:, 3]


def sample_initial(model, spec):
    """Draw ``spec.count`` initial configurations.

    Oscillator members follow ``|psi(Q, t0)|^2`` (rejection sampling against
    a Gaussian envelope 25% wider than each packet, restricted to the
    window). Interferometer members are launched uniformly in angle from
    slit A with the partner on slit B's circle, see :func:`launch_pair`.
    """
    if isinstance(model, OscillatorProduct):
        q, rejected, delta, sigma = _sample_oscillator(model, spec)
        t0 = spec.t0
    elif isinstance(model, _Spherical):
        q, rejected, delta, sigma = _sample_interferometer(model, spec)
        t0 = model.params.epsilon_r / model.params.v
    else:
        raise TypeError(f"unsupported model {model!r}")
    return SampleBatch(q=q, t0=t0, spec=spec, rejected=rejected,
                       provenance=spec_hash(model, spec), delta=delta, sigma=sigma)


def _evolve_chunk(args):
    model, q0, t0, h, T, window = args
    from .dynamics import _Recorder, step_count
    steps = step_count(h, T)
    recs = [_Recorder(steps, model.dim) for _ in range(q0.shape[0])]

    def observer(step, t, q, moved):
        for i in np.flatnonzero(moved):
            recs[i].q[step] = q[i]
            recs[i].times[step] = t
            recs[i].last = step

    res = integrate_batch(model, q0, t0, h, T, window=window, observer=observer)
    out = []
    for i, rec in enumerate(recs):
        last = max(rec.last, 0)
        if rec.last < 0:
            rec.q[0], rec.times[0] = q0[i], t0
        out.append((rec.times[:last + 1], rec.q[:last + 1], res.status[i], res.h))
    return out


def evolve_batch(model, batch, h, T, window=None, workers=1):
    """Integrate every member of ``batch``; returns trajectories in member order.

    Members that hit a node or leave the domain keep their truncated
    trajectory and carry the corresponding status. With ``workers > 1`` the
    batch is split into contiguous chunks evaluated in separate processes;
    results are identical to the serial run.
    """
    if len(batch) == 0:
        raise ValueError("batch is empty")
    chunks = np.array_split(np.arange(len(batch)), max(1, min(workers, len(batch))))
    jobs = [(model, batch.q[idx], batch.t0, h, T, window) for idx in chunks]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_evolve_chunk, jobs))
    else:
        parts = [_evolve_chunk(job) for job in jobs]
    trajs = []
    members = batch.members
    for idx, part in zip(chunks, parts):
        for i, (times, q, status, h_eff) in zip(idx, part):
            trajs.append(Trajectory(times=times, q=q, status=status, model_kind=model.kind,
                                    h=h_eff, initial=members[i]))
    return trajs


def batch_manifest(model, batch, statuses=None):
    """JSON-ready summary: spec, acceptance rate and status counts."""
    out = {
        "model": model.kind,
        "spec": batch.spec.as_dict(),
        "provenance": batch.provenance,
        "members": len(batch),
        "rejected": batch.rejected,
        "acceptance_rate": batch.acceptance_rate,
    }
    if statuses is not None:
        out["status_counts"] = {s: list(statuses).count(s) for s in STATUSES}
    return out
