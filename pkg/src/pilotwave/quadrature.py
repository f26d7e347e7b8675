"""Composite Gauss-Legendre rules used by the normalization and detection integrals.

All routines refine by doubling the number of panels until two successive
estimates agree to the requested relative tolerance.
"""

import math

import numpy as np

from .errors import QuadratureError

_NODES = {}


def _legendre(order):
    if order not in _NODES:
        _NODES[order] = np.polynomial.legendre.leggauss(order)
    return _NODES[order]


def panel_nodes(edges, order=16):
    """Nodes and weights of a composite rule over consecutive ``edges``."""
    x, w = _legendre(order)
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (lo + hi) * 0.5 + half * x[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def _converge(estimate, rtol, max_level, what):
    prev = estimate(0)
    for level in range(1, max_level + 1):
        cur = estimate(level)
        err = abs(cur - prev)
        if err <= rtol * abs(cur) or err == 0.0:
            return cur, err
        prev = cur
    raise QuadratureError(f"{what} did not converge to rtol={rtol:g} (last change {err:.3g})")


def integrate_1d(f, a, b, rtol=1e-10, panels=4, max_level=10, order=16):
    """Integrate a vectorized ``f`` over ``[a, b]``; returns ``(value, error)``."""

    def estimate(level):
        edges = np.linspace(a, b, panels * 2**level + 1)
        x, w = panel_nodes(edges, order)
        return np.sum(w * f(x))

    return _converge(estimate, rtol, max_level, "1-D quadrature")


def integrate_box(f, xlim, ylim, rtol=1e-10, panels=4, max_level=7, order=16):
    """Tensor-product rule for smooth ``f(x, y)`` on a rectangle."""

    def estimate(level):
        n = panels * 2**level
        x, wx = panel_nodes(np.linspace(*xlim, n + 1), order)
        y, wy = panel_nodes(np.linspace(*ylim, n + 1), order)
        X, Y = np.meshgrid(x, y, indexing="ij")
        return np.sum(wx[:, None] * wy[None, :] * f(X, Y))

    return _converge(estimate, rtol, max_level, "box quadrature")


def _ray_length(theta, cy, x_max, y_lo, y_hi):
    # distance from (0, cy) along direction theta to the boundary of the rectangle
    c, s = np.cos(theta), np.sin(theta)
    with np.errstate(divide="ignore"):
        rx = np.where(c > 0, x_max / np.where(c > 0, c, 1.0), np.inf)
        ry = np.where(s > 0, (y_hi - cy) / np.where(s > 0, s, 1.0),
                      np.where(s < 0, (y_lo - cy) / np.where(s < 0, s, -1.0), np.inf))
    return np.minimum(rx, ry)


def integrate_polar_rect(f, cy, x_max, y_lo, y_hi, eps, wavelength, rtol=1e-8, max_level=5):
    """Integrate ``f(x, y)`` over ``[0, x_max] x [y_lo, y_hi]`` minus the disc
    of radius ``eps`` about ``(0, cy)``, a point on the left edge.

    Polar coordinates about the excluded point absorb ``1/r`` and ``1/r**2``
    singularities: near the centre the radial variable is ``log r``, further
    out panels are a fraction of ``wavelength`` long so ``exp(ikr)`` factors
    are resolved.
    """
    if not (y_lo <= cy <= y_hi) or eps <= 0 or x_max <= eps:
        raise QuadratureError("excluded point must sit on the left edge of the rectangle")
    # kinks of the ray length sit at the two right-hand corners
    cuts = [-math.pi / 2, math.atan2(y_lo - cy, x_max), math.atan2(y_hi - cy, x_max), math.pi / 2]
    cuts = sorted(set(cuts))
    r_split = min(0.25 * wavelength, x_max)

    def estimate(level):
        scale = 2**level
        th_edges = np.concatenate([np.linspace(lo, hi, 4 * scale + 1)[:-1] for lo, hi in zip(cuts[:-1], cuts[1:])] + [[cuts[-1]]])
        th, wth = panel_nodes(th_edges)
        rmax = _ray_length(th, cy, x_max, y_lo, y_hi)
        total = 0.0 + 0.0j
        for theta, wt, rm in zip(th, wth, rmax):
            if rm <= eps:
                continue
            c, s = math.cos(theta), math.sin(theta)
            r_in = min(r_split, rm)
            u, wu = panel_nodes(np.linspace(math.log(eps), math.log(r_in), 2 * scale + 1))
            r = np.exp(u)
            part = np.sum(wu * r * r * f(r * c, cy + r * s))
            if rm > r_in:
                n = max(1, int(math.ceil(2.0 * (rm - r_in) / wavelength))) * scale
                r, wr = panel_nodes(np.linspace(r_in, rm, n + 1))
                part = part + np.sum(wr * r * f(r * c, cy + r * s))
            total += wt * part
        return total

    return _converge(estimate, rtol, max_level, "polar quadrature")


def integrate_tan_line(f, center, scale, rtol=1e-10, max_level=10):
    """Integrate ``f(y)`` over the whole real line via ``y = center + scale*tan(phi)``."""

    def g(phi):
        c = np.cos(phi)
        return f(center + scale * np.tan(phi)) * scale / (c * c)

    return integrate_1d(g, -math.pi / 2, math.pi / 2, rtol=rtol, panels=8, max_level=max_level)
