"""Information measures of Gaussian mixtures: closed forms for single
Gaussians, analytic lower/upper bounds for mixtures, and adaptive
quadrature for marginals of dimension at most two.

Everything is computed in nats and rescaled by ``1 / log(base)`` at the
end, so ``base=2`` gives bits.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from .gaussmix import DegenerateMarginalError, GaussianMixture

LOG_2PI = math.log(2 * math.pi)
QUAD_TOL = 1e-6
BOX_SIGMAS = 10.0
FIXED_POINT_TOL = 1e-10
FIXED_POINT_ITERS = 1000


@dataclass
class BoundedValue:
    """A metric bracketed by ``lower <= exact <= upper``."""

    lower: float
    upper: float
    exact: Optional[float] = None
    methods: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def scaled(self, k: float) -> "BoundedValue":
        ex = None if self.exact is None else self.exact * k
        return BoundedValue(self.lower * k, self.upper * k, ex, dict(self.methods), list(self.flags))

    def sandwich(self, tol: float = QUAD_TOL) -> bool:
        if self.lower > self.upper + 1e-12:
            return False
        if self.exact is None:
            return True
        return self.lower - tol <= self.exact <= self.upper + tol


def _unit(base: float) -> float:
    return 1.0 / math.log(base)


def _logdet(s: np.ndarray) -> float:
    sign, ld = np.linalg.slogdet(s)
    if sign <= 0 or not np.isfinite(ld) or ld < -700:
        raise DegenerateMarginalError("degenerate marginal: covariance is singular")
    return float(ld)


def _nondegenerate(g: GaussianMixture) -> None:
    for s in g.covs:
        _logdet(s)


# ----------------------------------------------------------- single Gaussian

def gaussian_entropy(mu, cov, base: float = math.e) -> float:
    """``1/2 log((2 pi e)^n det cov)``."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    n = cov.shape[0]
    return 0.5 * (n * (LOG_2PI + 1.0) + _logdet(cov)) * _unit(base)


def gaussian_kl(mx, sx, my, sy, base: float = math.e) -> float:
    """``KL(N(mx, sx) || N(my, sy))`` in closed form."""
    sx = np.atleast_2d(np.asarray(sx, dtype=float))
    sy = np.atleast_2d(np.asarray(sy, dtype=float))
    d = np.atleast_1d(np.asarray(mx, dtype=float) - np.asarray(my, dtype=float))
    n = sx.shape[0]
    syi = np.linalg.inv(sy)
    val = 0.5 * (_logdet(sy) - _logdet(sx) + np.trace(syi @ sx) - n + d @ syi @ d)
    return float(val) * _unit(base)


def _log_gauss(x: np.ndarray, mu: np.ndarray, cov: np.ndarray) -> float:
    d = x - mu
    return -0.5 * (len(d) * LOG_2PI + _logdet(cov) + d @ np.linalg.solve(cov, d))


# ---------------------------------------------------------- pairwise matrix

@dataclass
class PairwiseDensityMatrix:
    """``z[a][b] = phi(mu_a; mu_b, cov_a + cov_b)`` stored as logarithms."""

    log_z: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return np.exp(self.log_z)

    @classmethod
    def between(cls, x: GaussianMixture, y: GaussianMixture) -> "PairwiseDensityMatrix":
        out = np.empty((len(x), len(y)))
        for a in range(len(x)):
            for b in range(len(y)):
                out[a, b] = _log_gauss(x.means[a], y.means[b], x.covs[a] + y.covs[b])
        return cls(out)


def _component_kl(x: GaussianMixture, y: GaussianMixture) -> np.ndarray:
    return np.array([[gaussian_kl(x.means[a], x.covs[a], y.means[b], y.covs[b])
                      for b in range(len(y))] for a in range(len(x))])


def _component_entropy(g: GaussianMixture) -> np.ndarray:
    return np.array([gaussian_entropy(m, s) for m, s in zip(g.means, g.covs)])


def _weight_entropy(w: np.ndarray) -> float:
    w = w[w > 0]
    return float(-(w * np.log(w)).sum())


# --------------------------------------------------------------- entropy

def gm_entropy_lower(g: GaussianMixture, base: float = math.e) -> float:
    """``-sum_i pi_i log sum_j pi_j z_ij``."""
    _nondegenerate(g)
    lz = PairwiseDensityMatrix.between(g, g).log_z
    inner = logsumexp(lz, b=g.weights[None, :], axis=1)
    return float(-(g.weights * inner).sum()) * _unit(base)


def merge_group(g: GaussianMixture, idx: Sequence[int]) -> tuple:
    """Total weight, mean and covariance of the sub-mixture ``idx``."""
    idx = list(idx)
    w = g.weights[idx]
    pi = float(w.sum())
    wn = w / pi
    mu = wn @ g.means[idx]
    d = g.means[idx] - mu
    cov = np.einsum("c,cij->ij", wn, g.covs[idx]) + np.einsum("c,ci,cj->ij", wn, d, d)
    return pi, mu, cov


def gm_entropy_upper(g: GaussianMixture, grouping: Optional[Sequence[Sequence[int]]] = None,
                     base: float = math.e) -> float:
    """Weight entropy plus the average component entropy.

    With ``grouping`` (a partition of component indices) each group is first
    replaced by its moment-matched Gaussian; the single-group partition gives
    the maximum-entropy Gaussian bound.
    """
    if grouping is not None:
        seen = sorted(i for grp in grouping for i in grp)
        if seen != list(range(len(g))):
            raise ValueError("grouping must partition the components")
        g = GaussianMixture.from_components(g.varnames, [merge_group(g, grp) for grp in grouping])
    _nondegenerate(g)
    return (_weight_entropy(g.weights) + float(g.weights @ _component_entropy(g))) * _unit(base)


def gm_entropy_upper_best(g: GaussianMixture, base: float = math.e) -> float:
    """Smallest of the ungrouped and fully merged upper bounds."""
    return min(gm_entropy_upper(g, base=base), gm_entropy_upper(g, [list(range(len(g)))], base=base))


# ------------------------------------------------------------- quadrature

def _box(g: GaussianMixture, axis: int) -> tuple:
    sd = np.sqrt(g.covs[:, axis, axis])
    return float((g.means[:, axis] - BOX_SIGMAS * sd).min()), float((g.means[:, axis] + BOX_SIGMAS * sd).max())


def _breaks(g: GaussianMixture, axis: int, lo: float, hi: float) -> list:
    pts = sorted(set(float(m) for m in g.means[:, axis]))
    return [p for p in pts if lo < p < hi]


def _density_1d(g: GaussianMixture):
    w, m, v = g.weights, g.means[:, 0], g.covs[:, 0, 0]
    norm = w / np.sqrt(2 * math.pi * v)

    def f(x):
        return float(np.dot(norm, np.exp(-0.5 * (x - m) ** 2 / v)))

    return f


def _xlogx(f):
    return f * math.log(f) if f > 0 else 0.0


def _quad(fn, lo, hi, points, tol):
    val, _ = integrate.quad(fn, lo, hi, points=points or None, limit=500, epsabs=tol * 1e-2, epsrel=1e-10)
    return val


def gm_entropy_quadrature(g: GaussianMixture, base: float = math.e, tol: float = QUAD_TOL) -> float:
    """``-int f log f`` by adaptive quadrature (dimension 1 or 2)."""
    _nondegenerate(g)
    if g.dim == 1:
        f = _density_1d(g)
        lo, hi = _box(g, 0)
        return -_quad(lambda x: _xlogx(f(x)), lo, hi, _breaks(g, 0, lo, hi), tol) * _unit(base)
    if g.dim == 2:
        return -_integrate_2d(g, lambda f, x, y: _xlogx(f), tol) * _unit(base)
    raise ValueError(f"quadrature supports at most 2 dimensions (got {g.dim}); use an MC estimate")


def _cond_1d(g: GaussianMixture, y: float):
    """Components of ``f(., y)`` as a function of the first coordinate."""
    syy = g.covs[:, 1, 1]
    sxy = g.covs[:, 0, 1]
    sxx = g.covs[:, 0, 0]
    ly = -0.5 * (LOG_2PI + np.log(syy) + (y - g.means[:, 1]) ** 2 / syy)
    coef = g.weights * np.exp(ly)
    mx = g.means[:, 0] + sxy / syy * (y - g.means[:, 1])
    vx = sxx - sxy ** 2 / syy
    return coef, mx, vx


def _integrate_2d(g: GaussianMixture, integrand, tol: float) -> float:
    """``int int integrand(f(x, y), x, y) dx dy`` by nested adaptive quadrature."""
    ylo, yhi = _box(g, 1)
    xlo, xhi = _box(g, 0)

    def inner(y):
        coef, mx, vx = _cond_1d(g, y)
        keep = coef > 0
        if not keep.any():
            return 0.0
        coef, mx, vx = coef[keep], mx[keep], vx[keep]
        norm = coef / np.sqrt(2 * math.pi * vx)

        def fx(x):
            return integrand(float(np.dot(norm, np.exp(-0.5 * (x - mx) ** 2 / vx))), x, y)

        sd = np.sqrt(vx)
        lo = max(xlo, float((mx - BOX_SIGMAS * sd).min()))
        hi = min(xhi, float((mx + BOX_SIGMAS * sd).max()))
        if hi <= lo:
            return 0.0
        pts = sorted(set(float(p) for p in mx if lo < p < hi))
        return _quad(fx, lo, hi, pts, tol)

    return _quad(inner, ylo, yhi, _breaks(g, 1, ylo, yhi), tol)


def cross_entropy_quadrature(x: GaussianMixture, y: GaussianMixture, tol: float = QUAD_TOL) -> float:
    """``L_X(Y) = int f_X log f_Y`` in nats (one dimension)."""
    if x.dim != 1:
        raise ValueError("cross-entropy quadrature is implemented for one dimension")
    _nondegenerate(x)
    _nondegenerate(y)
    fx, fy = _density_1d(x), _density_1d(y)
    lo = min(_box(x, 0)[0], _box(y, 0)[0])
    hi = max(_box(x, 0)[1], _box(y, 0)[1])
    pts = sorted(set(_breaks(x, 0, lo, hi) + _breaks(y, 0, lo, hi)))

    def h(t):
        a = fx(t)
        if a <= 0:
            return 0.0
        b = fy(t)
        # far tails: use the log-density directly to avoid log(0)
        return a * (math.log(b) if b > 0 else _log_mix_1d(y, t))

    return _quad(h, lo, hi, pts, tol)


def _log_mix_1d(g: GaussianMixture, t: float) -> float:
    v = g.covs[:, 0, 0]
    lp = -0.5 * (LOG_2PI + np.log(v) + (t - g.means[:, 0]) ** 2 / v)
    return float(logsumexp(lp, b=g.weights))


def kl_quadrature(x: GaussianMixture, y: GaussianMixture, base: float = math.e, tol: float = QUAD_TOL) -> float:
    """``KL(X || Y)`` by quadrature (one dimension)."""
    return (-gm_entropy_quadrature(x, tol=tol) - cross_entropy_quadrature(x, y, tol)) * _unit(base)


# ------------------------------------------------------------------ KL

def L_bounds(x: GaussianMixture, y: GaussianMixture) -> tuple:
    """Lower and upper bounds on ``L_X(Y) = int f_X log f_Y`` (nats)."""
    _nondegenerate(x)
    _nondegenerate(y)
    lz = PairwiseDensityMatrix.between(x, y).log_z
    upper = float(x.weights @ logsumexp(lz, b=y.weights[None, :], axis=1))
    kl = _component_kl(x, y)
    hx = _component_entropy(x)
    lower = float(x.weights @ (-hx + logsumexp(-kl, b=y.weights[None, :], axis=1)))
    return lower, upper


def variational_kl_upper(x: GaussianMixture, y: GaussianMixture, tol: float = FIXED_POINT_TOL,
                         max_iter: int = FIXED_POINT_ITERS, history: Optional[list] = None) -> tuple:
    """Variational upper bound on ``KL(X || Y)`` by the alternating fixed point.

    Starts from ``phi = psi = pi_a rho_b``. Each half-step minimizes the bound
    in one of the two variables, so the sequence of bound values is
    nonincreasing. Returns ``(bound, converged)``; ``history`` receives every
    bound value.
    """
    kl = _component_kl(x, y)
    pi, rho = x.weights, y.weights
    phi = np.outer(pi, rho)          # phi[a, b] = phi_{b|a}
    psi = np.outer(pi, rho)          # psi[a, b] = psi_{a|b}

    def bound(phi, psi):
        mask = phi > 0
        return float((phi[mask] * (np.log(phi[mask] / psi[mask]) + kl[mask])).sum())

    best = bound(phi, psi)
    if history is not None:
        history.append(best)
    converged = False
    for _ in range(max_iter):
        col = phi.sum(axis=0)
        psi = rho[None, :] * phi / np.where(col > 0, col, 1.0)[None, :]
        with np.errstate(divide="ignore"):
            logt = np.log(psi) - kl  # log(0) = -inf keeps zero entries exactly zero
        phi = pi[:, None] * np.exp(logt - logsumexp(logt, axis=1)[:, None])
        val = bound(phi, psi)
        if history is not None:
            history.append(val)
        change = best - val
        best = min(best, val)
        if abs(change) < tol:
            converged = True
            break
    if not converged:
        warnings.warn("variational KL fixed point did not converge; returning best iterate")
    return best, converged


def kl_bounds(x: GaussianMixture, y: GaussianMixture, base: float = math.e,
              exact: Optional[bool] = None, tol: float = QUAD_TOL) -> BoundedValue:
    """Bounds on ``KL(X || Y)`` from entropy and cross-entropy bounds, tightened
    on the upper side by the variational fixed point."""
    l_lo, l_hi = L_bounds(x, y)
    h_lo, h_hi = gm_entropy_lower(x), gm_entropy_upper(x)
    lower = -h_hi - l_hi
    l_route = -h_lo - l_lo
    var_ub, ok = variational_kl_upper(x, y)
    upper = min(l_route, var_ub)
    bv = BoundedValue(lower, upper, methods={
        "lower": "entropy-upper+L-upper",
        "upper": "L-route" if l_route <= var_ub else "variational",
        "l_route_upper": l_route, "variational_upper": var_ub,
    })
    if not ok:
        bv.flags.append("variational fixed point not converged")
    if (exact is None and x.dim == 1) or exact:
        bv.exact = kl_quadrature(x, y, tol=tol)
        bv.methods["exact"] = "quadrature"
    if len(x) == 1 and len(y) == 1:
        bv.exact = gaussian_kl(x.means[0], x.covs[0], y.means[0], y.covs[0])
        bv.methods["exact"] = "closed-form"
    return bv.scaled(_unit(base))


# ------------------------------------------------------------- entropy API

def entropy_bounds(g: GaussianMixture, base: float = math.e, tol: float = QUAD_TOL) -> BoundedValue:
    """Entropy bracket for a marginal; exact by closed form or quadrature."""
    g = g.lump()
    lo = gm_entropy_lower(g)
    hi = gm_entropy_upper(g)
    bv = BoundedValue(lo, hi, methods={"lower": "pairwise", "upper": "weight+component"})
    if len(g) == 1:
        bv.exact = gaussian_entropy(g.means[0], g.covs[0])
        bv.methods["exact"] = "closed-form"
    elif g.dim <= 2:
        bv.exact = gm_entropy_quadrature(g, tol=tol)
        bv.methods["exact"] = "quadrature"
    return bv.scaled(_unit(base))


def cond_entropy_bounds(joint: GaussianMixture, xvars: Sequence[str], yvars: Sequence[str],
                        base: float = math.e, tol: float = QUAD_TOL) -> BoundedValue:
    """``H(X | Y) = H(X, Y) - H(Y)``, bounded by opposite-bound differencing."""
    xy = joint.marginal(list(xvars) + list(yvars)).lump()
    y = joint.marginal(list(yvars)).lump()
    hxy, hy = entropy_bounds(xy, tol=tol), entropy_bounds(y, tol=tol)
    bv = BoundedValue(hxy.lower - hy.upper, hxy.upper - hy.lower,
                      methods={"lower": "H(X,Y)-lower minus H(Y)-upper",
                               "upper": "H(X,Y)-upper minus H(Y)-lower"})
    if hxy.exact is not None and hy.exact is not None:
        bv.exact = hxy.exact - hy.exact
        bv.methods["exact"] = f"{hxy.methods['exact']} difference"
    return bv.scaled(_unit(base))


def mi_bounds(joint: GaussianMixture, xvars: Sequence[str], yvars: Sequence[str],
              base: float = math.e, tol: float = QUAD_TOL) -> BoundedValue:
    """``I(X; Y) = H(X) - H(X | Y)`` with opposite-bound differencing.

    The cross-entropy route ``-H(X,Y) - L_XY(X) - L_XY(Y)`` is attached under
    ``methods['l_route']`` as a second, independent bracket.
    """
    hx = entropy_bounds(joint.marginal(list(xvars)), tol=tol)
    hc = cond_entropy_bounds(joint, xvars, yvars, tol=tol)
    bv = BoundedValue(hx.lower - hc.upper, hx.upper - hc.lower,
                      methods={"lower": "H(X)-lower minus H(X|Y)-upper",
                               "upper": "H(X)-upper minus H(X|Y)-lower"})
    if hx.exact is not None and hc.exact is not None:
        bv.exact = hx.exact - hc.exact
        bv.methods["exact"] = "entropy difference"
    bv.methods["l_route"] = mi_l_route(joint, xvars, yvars)
    return bv.scaled(_unit(base))


def mi_l_route(joint: GaussianMixture, xvars: Sequence[str], yvars: Sequence[str]) -> tuple:
    """``(lower, upper)`` on ``I(X; Y)`` via ``-H(X,Y) - L(X) - L(Y)`` (nats).

    ``L_XY(X) = int f_XY log f_X`` equals ``L_X(X)`` of the X-marginal.
    """
    xy = joint.marginal(list(xvars) + list(yvars)).lump()
    gx = joint.marginal(list(xvars)).lump()
    gy = joint.marginal(list(yvars)).lump()
    lx, ly = L_bounds(gx, gx), L_bounds(gy, gy)
    lower = -gm_entropy_upper(xy) - lx[1] - ly[1]
    upper = -gm_entropy_lower(xy) - lx[0] - ly[0]
    return lower, upper
