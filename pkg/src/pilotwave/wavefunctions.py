"""Closed-form two-particle wavefunctions.

Two systems are modelled:

* ``OscillatorProduct`` -- a product of two non-dispersive coherent packets in
  the normal coordinates ``(Q1, Q2)`` of a pair of coupled oscillators.
* ``SphericalNonOverlap`` and ``SphericalBosonic`` -- outgoing spherical
  (circular, in the plane) waves behind two point slits at ``(0, +a)`` and
  ``(0, -a)``; configuration ``(x1, y1, x2, y2)``.

Every model evaluates the complex amplitude, the phase ``S`` (with
``psi = |psi| exp(iS/hbar)``), the analytic phase gradient and the Born
density. All methods are vectorized over a leading batch axis of ``q``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NodeError
from . import quadrature

#: Relative threshold below which ``|psi|`` counts as a node.
NODE_THRESHOLD = 1e-12


@dataclass(frozen=True)
class OscillatorParams:
    """Frequencies and packet amplitudes of the coupled-oscillator system."""

    omega1: float = 1.0
    omega2: float = 2.0
    a1: float = 1.0
    a2: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if not (self.omega1 > 0 and self.omega2 > 0):
            raise ValueError("omega1 and omega2 must be positive")
        if not (self.a1 >= 0 and self.a2 >= 0):
            raise ValueError("a1 and a2 must be non-negative")
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")

    @classmethod
    def from_coupling(cls, alpha, a1=1.0, a2=1.0, hbar=1.0):
        """Unit pendulums joined by a spring of strength ``alpha``:
        ``omega1 = 1`` and ``omega2 = sqrt(1 + 2 alpha)``."""
        if alpha < 0:
            raise ValueError("alpha must be non-negative")
        return cls(omega1=1.0, omega2=math.sqrt(1.0 + 2.0 * alpha), a1=a1, a2=a2, hbar=hbar)

    @property
    def sigma1(self):
        """Standard deviation of the Born density along Q1."""
        return math.sqrt(self.hbar / (2.0 * self.omega1))

    @property
    def sigma2(self):
        return math.sqrt(self.hbar / (2.0 * self.omega2))


@dataclass(frozen=True)
class InterferometerParams:
    """Two point slits at ``(0, +a)`` (slit A) and ``(0, -a)`` (slit B).

    ``epsilon_r`` is the radius of the excluded ball around each slit; it
    defaults to ``1e-3 * a``.
    """

    k: float = 2.0 * math.pi
    a: float = 1.0
    m: float = 1.0
    hbar: float = 1.0
    epsilon_r: float = None

    def __post_init__(self):
        if not (self.k > 0 and self.a > 0 and self.m > 0 and self.hbar > 0):
            raise ValueError("k, a, m and hbar must be positive")
        if self.epsilon_r is None:
            object.__setattr__(self, "epsilon_r", 1e-3 * self.a)
        if not 0 < self.epsilon_r < 0.1 * self.a:
            raise ValueError("epsilon_r must satisfy 0 < epsilon_r << a")

    @property
    def v(self):
        """Propagation speed ``hbar k / m``."""
        return self.hbar * self.k / self.m

    @property
    def energy(self):
        """Total kinetic energy of the pair, ``2 * hbar^2 k^2 / 2m``."""
        return self.hbar**2 * self.k**2 / self.m

    @property
    def wavelength(self):
        return 2.0 * math.pi / self.k


@dataclass(frozen=True)
class Configuration:
    """Positions of both particles at time ``t``."""

    t: float
    q: tuple

    def __post_init__(self):
        q = tuple(float(v) for v in self.q)
        if not all(math.isfinite(v) for v in q) or not math.isfinite(self.t):
            raise DomainError("configuration coordinates must be finite")
        object.__setattr__(self, "q", q)

    @property
    def array(self):
        return np.array(self.q)


def _as_batch(q, dim):
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != dim:
        raise ValueError(f"expected {dim} coordinates, got shape {q.shape}")
    return q


class WavefunctionModel:
    """Common interface. Subclasses set ``kind``, ``dim`` and ``coords``."""

    kind = None
    dim = None
    coords = ()

    def psi(self, t, q):
        raise NotImplementedError

    def phase(self, t, q):
        raise NotImplementedError

    def grad_phase(self, t, q):
        raise NotImplementedError

    def born_density(self, t, q):
        return np.abs(self.psi(t, q)) ** 2

    def velocity(self, t, q):
        """Guidance velocity ``grad S / m``; raises at nodes or excluded balls."""
        v, bad = self.velocity_masked(t, q)
        if np.any(bad):
            self._raise_bad(t, q)
        return v

    def velocity_masked(self, t, q):
        """Velocity plus a boolean mask of members where it is undefined.

        Never raises; undefined entries are filled with NaN. Used by the
        batch integrator, which turns the mask into per-member statuses.
        """
        raise NotImplementedError

    def domain_violation(self, q):
        """Mask of members outside the model's domain (none by default)."""
        return np.zeros(np.shape(q)[:-1], dtype=bool)

    def _raise_bad(self, t, q):
        raise NodeError("wavefunction node")


# --------------------------------------------------------------------------
# coupled oscillators


class OscillatorProduct(WavefunctionModel):
    """``psi_A(Q1, t) * psi_B(Q2, t)``: packet A oscillates about ``+a1``
    with frequency ``omega1``, packet B about ``-a2`` with ``omega2``."""

    kind = "OscillatorProduct"
    dim = 2
    coords = ("Q1", "Q2")

    def __init__(self, params=None):
        self.params = params or OscillatorParams()

    def __repr__(self):
        return f"OscillatorProduct({self.params!r})"

    def centers(self, t):
        p = self.params
        return p.a1 * np.cos(p.omega1 * t), -p.a2 * np.cos(p.omega2 * t)

    def phase(self, t, q):
        p = self.params
        q = _as_batch(q, 2)
        w1t, w2t = p.omega1 * t, p.omega2 * t
        s1 = -0.5 * p.hbar * w1t - 0.5 * p.omega1 * (
            2.0 * q[..., 0] * p.a1 * np.sin(w1t) - 0.5 * p.a1**2 * np.sin(2.0 * w1t))
        s2 = -0.5 * p.hbar * w2t - 0.5 * p.omega2 * (
            -2.0 * q[..., 1] * p.a2 * np.sin(w2t) - 0.5 * p.a2**2 * np.sin(2.0 * w2t))
        return s1 + s2

    def amplitude(self, t, q):
        p = self.params
        q = _as_batch(q, 2)
        c1, c2 = self.centers(t)
        norm = (p.omega1 / (math.pi * p.hbar)) ** 0.25 * (p.omega2 / (math.pi * p.hbar)) ** 0.25
        expo = -(p.omega1 / (2 * p.hbar)) * (q[..., 0] - c1) ** 2 - (p.omega2 / (2 * p.hbar)) * (q[..., 1] - c2) ** 2
        return norm * np.exp(expo)

    def psi(self, t, q):
        return self.amplitude(t, q) * np.exp(1j * self.phase(t, q) / self.params.hbar)

    def grad_phase(self, t, q):
        p = self.params
        q = _as_batch(q, 2)
        g = np.empty(q.shape)
        g[..., 0] = -p.omega1 * p.a1 * np.sin(p.omega1 * t)
        g[..., 1] = p.omega2 * p.a2 * np.sin(p.omega2 * t)
        return g

    def born_density(self, t, q):
        return self.amplitude(t, q) ** 2

    def velocity_masked(self, t, q):
        # unit mass in normal coordinates; the packets have no nodes
        g = self.grad_phase(t, q)
        return g, np.zeros(g.shape[:-1], dtype=bool)


# --------------------------------------------------------------------------
# two-slit interferometer


def slit_radii(params, q):
    """Distances ``(r1A, r2B, r1B, r2A)`` of each particle from each slit."""
    q = _as_batch(q, 4)
    x1, y1, x2, y2 = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    a = params.a
    return (np.hypot(x1, y1 - a), np.hypot(x2, y2 + a),
            np.hypot(x1, y1 + a), np.hypot(x2, y2 - a))


class _Spherical(WavefunctionModel):
    dim = 4
    coords = ("x1", "y1", "x2", "y2")

    def __init__(self, params=None):
        self.params = params or InterferometerParams()

    def __repr__(self):
        return f"{self.kind}({self.params!r})"

    def _check_domain(self, radii):
        # launch points sit exactly on r = epsilon_r; allow for rounding in hypot
        eps = self.params.epsilon_r * (1.0 - 1e-9)
        inside = np.zeros(np.shape(radii[0]), dtype=bool)
        for r in radii:
            inside |= r < eps
        return inside

    def domain_violation(self, q):
        return self._check_domain(slit_radii(self.params, q))

    def _require_domain(self, q):
        radii = slit_radii(self.params, q)
        if np.any(self._check_domain(radii)):
            raise DomainError(f"a particle is closer than epsilon_r={self.params.epsilon_r:g} to a slit")
        return radii

    def time_factor(self, t):
        p = self.params
        return np.exp(-1j * p.energy * t / p.hbar)

    def _raise_bad(self, t, q):
        self._require_domain(q)
        raise NodeError("wavefunction node: phase and velocity undefined")


class SphericalNonOverlap(_Spherical):
    """Particle 1 emerges from slit A and particle 2 from slit B with no overlap:
    ``psi = exp(ik(r1A + r2B)) / (2 pi r1A r2B)`` times the energy phase."""

    kind = "SphericalNonOverlap"

    def psi(self, t, q):
        r1A, r2B, _, _ = self._require_domain(q)
        k = self.params.k
        return np.exp(1j * k * (r1A + r2B)) / (2.0 * math.pi * r1A * r2B) * self.time_factor(t)

    def phase(self, t, q):
        r1A, r2B, _, _ = self._require_domain(q)
        p = self.params
        return p.hbar * p.k * (r1A + r2B) - p.energy * t

    def _grad(self, q, r1A, r2B):
        p = self.params
        q = _as_batch(q, 4)
        hk = p.hbar * p.k
        g = np.empty(q.shape)
        g[..., 0] = hk * q[..., 0] / r1A
        g[..., 1] = hk * (q[..., 1] - p.a) / r1A
        g[..., 2] = hk * q[..., 2] / r2B
        g[..., 3] = hk * (q[..., 3] + p.a) / r2B
        return g

    def grad_phase(self, t, q):
        r1A, r2B, _, _ = self._require_domain(q)
        return self._grad(q, r1A, r2B)

    def velocity_masked(self, t, q):
        radii = slit_radii(self.params, q)
        bad = self._check_domain(radii)
        v = self._grad(q, radii[0], radii[1]) / self.params.m
        v[bad] = np.nan
        return v, bad


class SphericalBosonic(_Spherical):
    """Exchange-symmetric overlap form: the A->1, B->2 wave plus the B->1, A->2
    wave, divided by the normalization factor ``norm``.

    ``norm`` defaults to 1; :func:`normalize_numeric` computes it for a
    declared window and :meth:`normalized` returns a copy carrying it.
    """

    kind = "SphericalBosonic"

    def __init__(self, params=None, norm=1.0, window=None):
        super().__init__(params)
        self.norm = float(norm)
        self.window = window

    def normalized(self, window):
        n = normalize_numeric(self, window)
        return SphericalBosonic(self.params, norm=n, window=window)

    def _terms(self, q):
        """Log-moduli and phases of both terms plus the ratio ``rho = t2/t1``.

        The phase difference uses ``r1B - r1A = 4 a y1 / (r1A + r1B)`` so it
        is free of cancellation far from the slits.
        """
        p = self.params
        q = _as_batch(q, 4)
        radii = slit_radii(p, q)
        r1A, r2B, r1B, r2A = radii
        y1, y2 = q[..., 1], q[..., 3]
        dphase = p.k * (4.0 * p.a * y1 / (r1A + r1B) - 4.0 * p.a * y2 / (r2A + r2B))
        rho = (r1A * r2B) / (r1B * r2A) * np.exp(1j * dphase)
        return radii, rho

    def _log_derivs(self, q, radii):
        # d log(term) / d q for each term, shape (..., 4)
        p = self.params
        q = _as_batch(q, 4)
        r1A, r2B, r1B, r2A = radii
        ik = 1j * p.k
        x1, y1, x2, y2 = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
        g1 = np.empty(q.shape, dtype=complex)
        g2 = np.empty(q.shape, dtype=complex)
        f = (ik - 1.0 / r1A) / r1A
        g1[..., 0], g1[..., 1] = f * x1, f * (y1 - p.a)
        f = (ik - 1.0 / r2B) / r2B
        g1[..., 2], g1[..., 3] = f * x2, f * (y2 + p.a)
        f = (ik - 1.0 / r1B) / r1B
        g2[..., 0], g2[..., 1] = f * x1, f * (y1 + p.a)
        f = (ik - 1.0 / r2A) / r2A
        g2[..., 2], g2[..., 3] = f * x2, f * (y2 - p.a)
        return g1, g2

    def _nodes(self, rho):
        return np.abs(1.0 + rho) < NODE_THRESHOLD * (1.0 + np.abs(rho))

    def psi(self, t, q):
        r1A, r2B, r1B, r2A = self._require_domain(q)
        k = self.params.k
        total = np.exp(1j * k * (r1A + r2B)) / (r1A * r2B) + np.exp(1j * k * (r1B + r2A)) / (r1B * r2A)
        return total / self.norm * self.time_factor(t)

    def phase(self, t, q):
        """Phase anchored on the first term: ``hbar k (r1A + r2B) + hbar arg(1 + rho) - E t``.

        Single-valued only locally (the bosonic form has nodes); the branch
        cut of ``arg`` lies where ``|rho| > 1``.
        """
        self._require_domain(q)
        p = self.params
        radii, rho = self._terms(q)
        if np.any(self._nodes(rho)):
            raise NodeError("wavefunction node: phase undefined")
        return p.hbar * (p.k * (radii[0] + radii[1]) + np.angle(1.0 + rho)) - p.energy * t

    def _grad(self, q, radii, rho):
        g1, g2 = self._log_derivs(q, radii)
        rho = rho[..., None]
        return self.params.hbar * np.imag((g1 + rho * g2) / (1.0 + rho))

    def grad_phase(self, t, q):
        self._require_domain(q)
        radii, rho = self._terms(q)
        if np.any(self._nodes(rho)):
            raise NodeError("wavefunction node: phase gradient undefined")
        return self._grad(q, radii, rho)

    def velocity_masked(self, t, q):
        radii, rho = self._terms(q)
        bad = self._check_domain(radii) | self._nodes(rho)
        with np.errstate(invalid="ignore", divide="ignore"):
            v = self._grad(q, radii, rho) / self.params.m
        v[bad] = np.nan
        return v, bad


# --------------------------------------------------------------------------
# functional interface on Configuration objects


def eval_psi(model, c):
    """Complex amplitude at ``c``."""
    return complex(model.psi(c.t, c.array))


def phase(model, c):
    return float(model.phase(c.t, c.array))


def grad_phase(model, c):
    return model.grad_phase(c.t, c.array)


def born_density(model, c):
    return float(model.born_density(c.t, c.array))


# --------------------------------------------------------------------------
# normalization


@dataclass(frozen=True)
class Window:
    """Per-particle spatial window.

    For the oscillator this is the box ``xlim x ylim`` in ``(Q1, Q2)``. For
    the interferometer every particle ranges over ``[0, x_max] x [-y_max, y_max]``
    with the ``epsilon_r`` half-discs around both slits cut out.
    """

    xlim: tuple = field(default=None)
    ylim: tuple = field(default=None)
    x_max: float = None
    y_max: float = None

    @classmethod
    def oscillator_default(cls, params, width=8.0):
        """``width`` standard deviations beyond the swing of each packet centre."""
        span1 = params.a1 + width * params.sigma1
        span2 = params.a2 + width * params.sigma2
        return cls(xlim=(-span1, span1), ylim=(-span2, span2))

    def as_dict(self):
        return {k: v for k, v in (("xlim", self.xlim), ("ylim", self.ylim),
                                  ("x_max", self.x_max), ("y_max", self.y_max)) if v is not None}


def _slit_integrals(params, window, rtol):
    """Separable single-particle integrals over the window.

    Returns ``(I_A, I_B, C)`` with ``I_A = int 1/rA^2``, ``I_B = int 1/rB^2``
    and ``C = int exp(ik(rA - rB)) / (rA rB)``.
    """
    a, k, eps = params.a, params.k, params.epsilon_r
    X, Y = window.x_max, window.y_max
    if X is None or Y is None or Y <= a or X <= eps:
        raise DomainError("interferometer window needs x_max > epsilon_r and y_max > a")
    lam = params.wavelength

    def inv_ra2(x, y):
        return 1.0 / (x * x + (y - a) ** 2)

    def inv_rb2(x, y):
        return 1.0 / (x * x + (y + a) ** 2)

    def cross(x, y):
        ra, rb = np.hypot(x, y - a), np.hypot(x, y + a)
        return np.exp(1j * k * (-4.0 * a * y / (ra + rb))) / (ra * rb)

    results = []
    for fn in (inv_ra2, inv_rb2, cross):
        upper, _ = quadrature.integrate_polar_rect(fn, a, X, 0.0, Y, eps, lam, rtol=rtol)
        lower, _ = quadrature.integrate_polar_rect(fn, -a, X, -Y, 0.0, eps, lam, rtol=rtol)
        results.append(upper + lower)
    I_A, I_B, C = results
    return I_A.real, I_B.real, C


def normalize_numeric(model, window=None, rtol=1e-6):
    """Normalization constant ``N`` with ``int_window |psi|^2 / N^2 = 1``.

    The returned ``N`` is relative to the model's unnormalized amplitude
    (``norm`` is ignored). For the interferometer the four-dimensional
    integral factorizes into products of single-particle integrals, each
    evaluated by polar quadrature around the slits.
    """
    if isinstance(model, OscillatorProduct):
        window = window or Window.oscillator_default(model.params)
        val, _ = quadrature.integrate_box(
            lambda X, Y: model.born_density(0.0, np.stack([X, Y], axis=-1)), window.xlim, window.ylim, rtol=rtol)
        return math.sqrt(val)
    if isinstance(model, (SphericalNonOverlap, SphericalBosonic)):
        if window is None:
            raise DomainError("interferometer normalization needs an explicit window")
        I_A, I_B, C = _slit_integrals(model.params, window, rtol)
        if isinstance(model, SphericalNonOverlap):
            return math.sqrt(I_A * I_B) / (2.0 * math.pi)
        # t1 conj(t2) splits into [e^{ik(r1A-r1B)}/(r1A r1B)] [e^{ik(r2B-r2A)}/(r2B r2A)];
        # both factors integrate to C, which is real since the window is symmetric in y
        cross = C * C
        return math.sqrt(2.0 * I_A * I_B + 2.0 * cross.real)
    raise TypeError(f"unsupported model {model!r}")
