"""Potentials, their declared regularity constants, and sampling-based validators.

A potential U is the negative log-density of the target pi ~ exp(-U). Each
potential carries the constants the planner and the bound evaluators consume:

* mixture weak smoothness: ||grad U(x) - grad U(y)|| <= sum_i L_i ||x-y||^{alpha_i}
  with 0 < alpha_1 <= ... <= alpha_N <= 1,
* dissipativity: <grad U(x), x> >= a ||x||^beta - b,
* optionally a spectral-gap constant gamma and a radius R outside of which
  the potential is convex.

Evaluators are pure and accept either a single point of shape (d,) or a
batch of shape (n, d); they must broadcast over leading axes.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "PotentialSpec",
    "CheckReport",
    "builtin",
    "check_mixture_smooth",
    "check_dissipative",
    "check_lower_envelope",
    "check_origin_stationary",
    "lower_envelope",
    "descent_upper_bound",
]


@dataclass(frozen=True)
class PotentialSpec:
    """A potential with evaluators and declared analytic constants.

    Parameters
    ----------
    dim : int
        Ambient dimension d.
    value : callable
        x -> U(x). Accepts (d,) or (n, d) arrays.
    grad : callable
        x -> grad U(x), same batching contract as ``value``.
    smooth_terms : sequence of (L_i, alpha_i)
        Mixture weak-smoothness constants, sorted ascending in alpha_i,
        alpha_i in (0, 1], L_i > 0.
    dissip : (a, b, beta)
        Dissipativity constants, a > 0, b >= 0, beta > 0.
    poincare_gamma : float, optional
        Spectral-gap constant when known.
    convexity_radius : float, optional
        Radius outside of which U is convex, when known.
    origin_stationary : bool
        Declares grad U(0) = 0; checked at construction.
    """

    dim: int
    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    smooth_terms: tuple
    dissip: tuple
    poincare_gamma: Optional[float] = None
    convexity_radius: Optional[float] = None
    origin_stationary: bool = True

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        terms = tuple((float(L), float(al)) for L, al in self.smooth_terms)
        if not terms:
            raise ValueError("smooth_terms must be nonempty")
        alphas = [al for _, al in terms]
        if any(not (0.0 < al <= 1.0) for al in alphas):
            raise ValueError("every alpha_i must lie in (0, 1]")
        if alphas != sorted(alphas):
            raise ValueError("smooth_terms must be sorted ascending in alpha_i")
        if any(L <= 0 for L, _ in terms):
            raise ValueError("every L_i must be positive")
        object.__setattr__(self, "smooth_terms", terms)
        a, b, beta = (float(v) for v in self.dissip)
        if a <= 0 or b < 0 or beta <= 0:
            raise ValueError("dissip requires a > 0, b >= 0, beta > 0")
        object.__setattr__(self, "dissip", (a, b, beta))
        if self.origin_stationary:
            g0 = np.asarray(self.grad(np.zeros(self.dim)), dtype=float)
            if not np.all(np.isfinite(g0)) or float(np.linalg.norm(g0)) > 1e-9:
                raise ValueError("origin_stationary declared but ||grad(0)|| > 1e-9")

    # Conventions used throughout the bound evaluators.
    @property
    def n_terms(self) -> int:
        return len(self.smooth_terms)

    @property
    def L(self) -> float:
        """1 v max_i L_i."""
        return max(1.0, max(L for L, _ in self.smooth_terms))

    @property
    def alpha(self) -> float:
        """Smallest Hoelder exponent alpha_1."""
        return self.smooth_terms[0][1]

    @property
    def alpha_N(self) -> float:
        """Largest Hoelder exponent."""
        return self.smooth_terms[-1][1]

    def eligibility(self) -> dict:
        """Both step-planner eligibility predicates, reported side by side."""
        _, _, beta = self.dissip
        return {
            "two_alpha_le_beta": 2.0 * self.alpha_N <= beta,
            "two_alpha_sq_le_beta": 2.0 * self.alpha_N**2 <= beta,
        }


@dataclass(frozen=True)
class CheckReport:
    """Verdict of a sampling-based assumption check.

    ``worst_ratio`` is the largest demanded/achieved ratio observed, so the
    check passes exactly when it is <= 1. ``witness`` holds the offending
    point (pair) when the check fails.
    """

    assumption_id: str
    passed: bool
    worst_ratio: float
    witness: Optional[tuple] = None

    def __post_init__(self):
        if self.passed != (self.worst_ratio <= 1.0):
            raise ValueError("passed must hold exactly when worst_ratio <= 1")


def _ball(rng: np.random.Generator, n: int, d: int, radius: float) -> np.ndarray:
    """n points uniform in the centered d-ball of the given radius."""
    z = rng.standard_normal((n, d))
    z /= np.maximum(np.linalg.norm(z, axis=1, keepdims=True), 1e-300)
    r = radius * rng.random(n) ** (1.0 / d)
    return z * r[:, None]


# ---------------------------------------------------------------------------
# Built-in potentials


def _gaussian(dim: int) -> PotentialSpec:
    return PotentialSpec(
        dim=dim,
        value=lambda x: 0.5 * np.sum(np.square(x), axis=-1),
        grad=lambda x: np.asarray(x, dtype=float),
        smooth_terms=((1.0, 1.0),),
        dissip=(1.0, 0.0, 2.0),
        poincare_gamma=1.0,
        convexity_radius=0.0,
        origin_stationary=True,
    )


def _power(dim: int, alpha: float) -> PotentialSpec:
    if not (0.0 < alpha <= 1.0):
        raise ValueError("power potential needs alpha in (0, 1]")

    def value(x):
        r = np.linalg.norm(np.atleast_1d(x), axis=-1)
        return r ** (1.0 + alpha) / (1.0 + alpha)

    def grad(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(np.atleast_1d(x), axis=-1, keepdims=True)
        # Sub-gradient 0 at the origin for alpha < 1.
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(r > 0.0, r ** (alpha - 1.0), 0.0) * x
        return g

    return PotentialSpec(
        dim=dim,
        value=value,
        grad=grad,
        smooth_terms=((2.0 ** (1.0 - alpha), alpha),),
        dissip=(1.0, 0.0, 1.0 + alpha),
        poincare_gamma=None,
        convexity_radius=0.0,
        origin_stationary=True,
    )


def _gauss_plus_power(dim: int, alpha: float) -> PotentialSpec:
    if not (0.0 < alpha <= 1.0):
        raise ValueError("gauss_plus_power needs alpha in (0, 1]")
    pw = _power(dim, alpha)

    def value(x):
        return 0.5 * np.sum(np.square(x), axis=-1) + pw.value(x)

    def grad(x):
        return np.asarray(x, dtype=float) + pw.grad(x)

    terms = tuple(sorted([(2.0 ** (1.0 - alpha), alpha), (1.0, 1.0)], key=lambda t: t[1]))
    return PotentialSpec(
        dim=dim,
        value=value,
        grad=grad,
        smooth_terms=terms,
        dissip=(1.0, 0.0, 2.0),
        poincare_gamma=1.0,
        convexity_radius=0.0,
        origin_stationary=True,
    )


def _gaussian_mixture_2(dim: int, m: float) -> PotentialSpec:
    """Two symmetric modes at +-m along the first coordinate.

    U(x) = ||x||^2/2 + m^2/2 - log(2 cosh(m x_1)), i.e. the negative log of
    (exp(-||x - m e1||^2/2) + exp(-||x + m e1||^2/2))/2 up to the Gaussian
    normalizer.
    """
    if m <= 0:
        raise ValueError("gaussian_mixture_2 needs m > 0")

    def value(x):
        x = np.asarray(x, dtype=float)
        sq = 0.5 * np.sum(np.square(x), axis=-1)
        x1 = np.atleast_1d(x)[..., 0]
        # log(2 cosh(t)) = |t| + log1p(exp(-2|t|)), overflow-safe
        t = m * x1
        log2cosh = np.abs(t) + np.log1p(np.exp(-2.0 * np.abs(t)))
        return sq + 0.5 * m * m - log2cosh

    def grad(x):
        x = np.asarray(x, dtype=float)
        g = x.copy()
        g[..., 0] -= m * np.tanh(m * x[..., 0])
        return g

    if m <= 1.0:
        radius = 0.0
    elif dim == 1:
        radius = math.acosh(m) / m
    else:
        # A concave direction persists on the x_1 = 0 hyperplane at any
        # radius, so no finite convexity radius exists.
        radius = None
    return PotentialSpec(
        dim=dim,
        value=value,
        grad=grad,
        smooth_terms=((1.0 + m * m, 1.0),),
        dissip=(0.5, 2.0 * m * m, 2.0),
        poincare_gamma=None,
        convexity_radius=radius,
        origin_stationary=True,
    )


def _pseudo_huber(dim: int) -> PotentialSpec:
    def value(x):
        return np.sqrt(1.0 + np.sum(np.square(x), axis=-1))

    def grad(x):
        x = np.asarray(x, dtype=float)
        denom = np.sqrt(1.0 + np.sum(np.square(x), axis=-1, keepdims=True))
        return x / denom

    return PotentialSpec(
        dim=dim,
        value=value,
        grad=grad,
        smooth_terms=((1.0, 1.0),),
        dissip=(0.5, 1.0, 1.0),
        poincare_gamma=None,
        convexity_radius=0.0,
        origin_stationary=True,
    )


_BUILTINS = {
    "gaussian": lambda dim, p: _gaussian(dim),
    "power": lambda dim, p: _power(dim, p.get("alpha", 0.5)),
    "gauss_plus_power": lambda dim, p: _gauss_plus_power(dim, p.get("alpha", 0.5)),
    "gaussian_mixture_2": lambda dim, p: _gaussian_mixture_2(dim, p.get("m", 2.0)),
    "pseudo_huber": lambda dim, p: _pseudo_huber(dim),
}


def builtin(name: str, dim: int, params: Optional[dict] = None) -> PotentialSpec:
    """Construct a registered potential by name.

    Known names: gaussian, power, gauss_plus_power, gaussian_mixture_2,
    pseudo_huber. ``params`` is a flat map of reals (``alpha`` for the power
    families, ``m`` for the two-mode mixture).
    """
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ValueError(
            f"unknown potential {name!r}; known: {sorted(_BUILTINS)}"
        ) from None
    return factory(int(dim), dict(params or {}))


# ---------------------------------------------------------------------------
# Validators


def check_mixture_smooth(
    spec: PotentialSpec, n_pairs: int, radius: float, seed: int
) -> CheckReport:
    """Probe ||grad U(x)-grad U(y)|| <= sum_i L_i ||x-y||^{alpha_i} on random pairs.

    Sampling-based: a pass refutes nothing beyond the sampled pairs, but the
    worst observed ratio makes near-violations visible.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    rng = np.random.default_rng(seed)
    xs = _ball(rng, n_pairs, spec.dim, radius)
    ys = _ball(rng, n_pairs, spec.dim, radius)
    lhs = np.linalg.norm(spec.grad(xs) - spec.grad(ys), axis=-1)
    dist = np.linalg.norm(xs - ys, axis=-1)
    rhs = np.zeros_like(dist)
    for L, al in spec.smooth_terms:
        rhs += L * dist**al
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dist > 0.0, lhs / rhs, 0.0)
    worst = int(np.argmax(ratio))
    worst_ratio = float(ratio[worst])
    passed = worst_ratio <= 1.0
    witness = None if passed else (xs[worst].copy(), ys[worst].copy())
    return CheckReport("MixtureSmooth", passed, worst_ratio, witness)


def check_dissipative(
    spec: PotentialSpec, n_points: int, radius: float, seed: int
) -> CheckReport:
    """Probe <grad U(x), x> >= a ||x||^beta - b on random points."""
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    a, b, beta = spec.dissip
    rng = np.random.default_rng(seed)
    xs = _ball(rng, n_points, spec.dim, radius)
    observed = np.sum(spec.grad(xs) * xs, axis=-1)
    demanded = a * np.linalg.norm(xs, axis=-1) ** beta - b
    # demanded/observed, guarded so that ratio <= 1 iff the bound holds.
    ratio = np.zeros_like(observed)
    pos = observed > 0.0
    ratio[pos] = np.maximum(demanded[pos] / observed[pos], 0.0)
    bad = (~pos) & (demanded > observed)
    ratio[bad] = np.inf
    # a tight declaration saturates the bound; norm**beta and the inner
    # product round differently, and that must not decide the verdict
    ratio[(ratio > 1.0) & (ratio <= 1.0 + 1e-12)] = 1.0
    worst = int(np.argmax(ratio))
    worst_ratio = float(ratio[worst])
    passed = worst_ratio <= 1.0
    witness = None if passed else (xs[worst].copy(),)
    return CheckReport("Dissipative", passed, worst_ratio, witness)


def check_lower_envelope(
    spec: PotentialSpec, n_points: int, radius: float, seed: int
) -> CheckReport:
    """Probe U(x) >= lower_envelope(x) on random points.

    Ratio per point is exp(envelope - U), which is <= 1 exactly when the
    envelope sits below the potential there.
    """
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    rng = np.random.default_rng(seed)
    xs = _ball(rng, n_points, spec.dim, radius)
    gap = lower_envelope(spec, xs) - np.asarray(spec.value(xs), dtype=float)
    ratio = np.exp(np.minimum(gap, 50.0))
    worst = int(np.argmax(ratio))
    worst_ratio = float(ratio[worst])
    passed = worst_ratio <= 1.0
    witness = None if passed else (xs[worst].copy(),)
    return CheckReport("LowerEnvelope", passed, worst_ratio, witness)


def check_origin_stationary(spec: PotentialSpec, tol: float = 1e-8) -> CheckReport:
    """Verify ||grad U(0)|| <= tol; the ratio is the norm over the tolerance."""
    g0 = np.asarray(spec.grad(np.zeros(spec.dim)), dtype=float)
    norm = float(np.linalg.norm(g0))
    ratio = norm / tol if np.all(np.isfinite(g0)) else float("inf")
    passed = ratio <= 1.0
    witness = None if passed else (np.zeros(spec.dim),)
    return CheckReport("OriginStationary", passed, ratio, witness)


def lower_envelope(spec: PotentialSpec, x: np.ndarray) -> float:
    """Closed-form lower bound on U at x from the dissipativity constants.

    Returns a/(2 beta) ||x||^beta + U(0) - sum_i L_i/(alpha_i+1) R^{alpha_i+1}
    - b/beta with R = (2b/a)^{1/beta}.
    """
    a, b, beta = spec.dissip
    R = (2.0 * b / a) ** (1.0 / beta)
    drop = sum(L / (al + 1.0) * R ** (al + 1.0) for L, al in spec.smooth_terms)
    u0 = float(spec.value(np.zeros(spec.dim)))
    r = np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float)), axis=-1)
    return a / (2.0 * beta) * r**beta + u0 - drop - b / beta


def descent_upper_bound(spec: PotentialSpec, x: np.ndarray, y: np.ndarray) -> float:
    """First-order upper bound U(y) <= U(x) + <grad U(x), y-x> + sum_i L_i/(1+alpha_i)||y-x||^{1+alpha_i}."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    step = np.linalg.norm(y - x, axis=-1)
    extra = sum(L / (1.0 + al) * step ** (1.0 + al) for L, al in spec.smooth_terms)
    return spec.value(x) + np.sum(spec.grad(x) * (y - x), axis=-1) + extra
