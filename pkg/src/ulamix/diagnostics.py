"""Convergence measurement: exact Gaussian KL oracle, low-dimensional
histogram/quadrature estimators, empirical transport distances, weighted
moments, and divergence conversions.

The quadrature helpers are deliberately restricted to d <= 2. The box they
integrate over comes from the dissipativity envelope of the potential, chosen
wide enough that the neglected tail mass is below 1e-8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .pgauss import kappa_log
from .potential import PotentialSpec

__all__ = [
    "QuadratureGrid",
    "auto_grid",
    "target_quadrature",
    "kl_gaussian_exact",
    "propagate_gaussian_chain",
    "gaussian_stationary_cov",
    "ula_gaussian_bias_floor",
    "kl_quadrature",
    "tv_histogram",
    "w2_empirical",
    "quantile_reference_1d",
    "w2_densities_1d",
    "smoothed_potential_quadrature_1d",
    "smoothed_target_w2_gap_1d",
    "moment_Ms",
    "conversions",
    "geometric_checkpoints",
]


# ---------------------------------------------------------------------------
# Quadrature grids

@dataclass(frozen=True)
class QuadratureGrid:
    """Axis-aligned box [lo_j, hi_j] split into bins^d histogram cells, with
    ``sub`` Simpson subintervals per cell per axis."""

    lo: np.ndarray
    hi: np.ndarray
    bins: int = 128
    sub: int = 8

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("grid needs hi > lo per axis")
        if self.bins < 2 or self.sub < 2 or self.sub % 2 != 0:
            raise ValueError("bins >= 2 and even sub >= 2 required")

    @property
    def dim(self) -> int:
        return self.lo.size

    def edges(self, axis: int) -> np.ndarray:
        return np.linspace(self.lo[axis], self.hi[axis], self.bins + 1)


def _envelope_radius(spec: PotentialSpec) -> float:
    # U(x) >= a/(2 beta) ||x||^beta + U(0) - C0 outside the origin region;
    # pushing a/(2 beta) B^beta 40 nats past C0 leaves tail mass << 1e-8.
    a, b, beta = spec.dissip
    R = (2.0 * b / a) ** (1.0 / beta)
    C0 = sum(Li / (ai + 1.0) * R ** (ai + 1.0) for (Li, ai) in spec.smooth_terms)
    C0 += b / beta
    u0 = float(spec.value(np.zeros(spec.dim)))
    C0 += max(0.0, -u0)
    return ((2.0 * beta / a) * (C0 + 40.0)) ** (1.0 / beta)


def auto_grid(
    spec: PotentialSpec,
    samples: Optional[np.ndarray] = None,
    bins: int = 128,
    sub: int = 8,
) -> QuadratureGrid:
    """Envelope-derived box, expanded if needed so it covers at least 99.9%
    of the supplied samples on every axis."""
    if spec.dim > 2:
        raise ValueError("quadrature grids are supported for d <= 2 only")
    B = _envelope_radius(spec)
    lo = np.full(spec.dim, -B)
    hi = np.full(spec.dim, B)
    if samples is not None and len(samples) > 0:
        pts = np.atleast_2d(np.asarray(samples, dtype=float))
        qlo = np.quantile(pts, 0.0005, axis=0)
        qhi = np.quantile(pts, 0.9995, axis=0)
        width = (hi - lo) / bins
        lo = np.minimum(lo, qlo - 3.0 * width)
        hi = np.maximum(hi, qhi + 3.0 * width)
    return QuadratureGrid(lo=lo, hi=hi, bins=bins, sub=sub)


def _simpson_weights(n_nodes: int, h: float) -> np.ndarray:
    # composite Simpson over n_nodes-1 (even) intervals of width h
    w = np.ones(n_nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def _axis_nodes(grid: QuadratureGrid, axis: int) -> Tuple[np.ndarray, np.ndarray, int]:
    n_nodes = grid.bins * grid.sub + 1
    xs = np.linspace(grid.lo[axis], grid.hi[axis], n_nodes)
    h = (grid.hi[axis] - grid.lo[axis]) / (n_nodes - 1)
    return xs, _simpson_weights(grid.sub + 1, h), n_nodes


def _cell_gather(vals: np.ndarray, bins: int, sub: int) -> np.ndarray:
    # (bins*sub+1,) node values -> (bins, sub+1) per-cell nodes (shared edges)
    idx = np.arange(bins)[:, None] * sub + np.arange(sub + 1)[None, :]
    return vals[idx]


def _cell_masses(spec: PotentialSpec, grid: QuadratureGrid) -> np.ndarray:
    """Unnormalized target mass of every histogram cell, composite Simpson."""
    if grid.dim == 1:
        xs, w_cell, _ = _axis_nodes(grid, 0)
        dens = np.exp(-np.asarray(spec.value(xs[:, None]), dtype=float))
        per_cell = _cell_gather(dens, grid.bins, grid.sub)
        return per_cell @ w_cell
    xs, wx, nx = _axis_nodes(grid, 0)
    ys, wy, ny = _axis_nodes(grid, 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    dens = np.exp(-np.asarray(spec.value(pts), dtype=float)).reshape(nx, ny)
    idx = np.arange(grid.bins)[:, None] * grid.sub + np.arange(grid.sub + 1)[None, :]
    gath = dens[idx][:, :, idx]  # (bins, sub+1, bins, sub+1)
    return np.einsum("iajb,a,b->ij", gath, wx, wy)


def target_quadrature(
    spec: PotentialSpec, grid: Optional[QuadratureGrid] = None
) -> dict:
    """log Z, second moment E||x||^2, and the cell-mass table of the target
    on the quadrature box."""
    if grid is None:
        grid = auto_grid(spec)
    masses = _cell_masses(spec, grid)
    Z = float(masses.sum())
    if grid.dim == 1:
        xs, w_cell, _ = _axis_nodes(grid, 0)
        dens = np.exp(-np.asarray(spec.value(xs[:, None]), dtype=float))
        m2_nodes = _cell_gather(dens * xs**2, grid.bins, grid.sub)
        E2 = float((m2_nodes @ w_cell).sum()) / Z
    else:
        xs, wx, nx = _axis_nodes(grid, 0)
        ys, wy, ny = _axis_nodes(grid, 1)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        dens = np.exp(-np.asarray(spec.value(pts), dtype=float)).reshape(nx, ny)
        r2 = (X**2 + Y**2)
        idx = np.arange(grid.bins)[:, None] * grid.sub + np.arange(grid.sub + 1)[None, :]
        gath = (dens * r2)[idx][:, :, idx]
        E2 = float(np.einsum("iajb,a,b->ij", gath, wx, wy).sum()) / Z
    return {"log_Z": math.log(Z), "E2": E2, "cell_masses": masses / Z, "grid": grid}


# ---------------------------------------------------------------------------
# Exact Gaussian oracle

def kl_gaussian_exact(mean_p, cov_p, Q) -> float:
    """KL(N(mean_p, diag(cov_p)) || N(0, diag(Q)^{-1})):
    (1/2) sum_j [Q_j cov_j + Q_j mean_j^2 - 1 - log(Q_j cov_j)]."""
    m = np.atleast_1d(np.asarray(mean_p, dtype=float))
    c = np.atleast_1d(np.asarray(cov_p, dtype=float))
    q = np.atleast_1d(np.asarray(Q, dtype=float))
    if np.any(c <= 0):
        raise ValueError("covariance entries must be positive")
    if np.any(q <= 0):
        raise ValueError("target precision entries must be positive")
    r = q * c
    return float(0.5 * np.sum(r + q * m**2 - 1.0 - np.log(r)))


def propagate_gaussian_chain(Q, eta: float, k: int, mean0, cov0):
    """Exact per-coordinate law of the chain on a diagonal quadratic target:
    applies m <- (1 - eta Q) m, c <- (1 - eta Q)^2 c + 2 eta, k times."""
    q = np.atleast_1d(np.asarray(Q, dtype=float))
    m = np.atleast_1d(np.asarray(mean0, dtype=float)).copy()
    c = np.atleast_1d(np.asarray(cov0, dtype=float)).copy()
    if eta <= 0:
        raise ValueError("eta must be positive")
    if k < 0:
        raise ValueError("k must be nonnegative")
    worst = int(np.argmax(q))
    if eta * q[worst] >= 2.0:
        raise ValueError(
            f"unstable propagation: eta*Q_j = {eta * q[worst]:g} >= 2 "
            f"for eigenvalue Q_j = {q[worst]:g} (j={worst})"
        )
    f = 1.0 - eta * q
    for _ in range(int(k)):
        m = f * m
        c = f * c * f + 2.0 * eta
    return m, c


def gaussian_stationary_cov(Q, eta: float) -> np.ndarray:
    """Fixed point of the covariance recursion: 1/(Q (1 - eta Q / 2))."""
    q = np.atleast_1d(np.asarray(Q, dtype=float))
    if np.any(eta * q >= 2.0) or eta <= 0:
        raise ValueError("stationary covariance needs 0 < eta*Q < 2")
    return 1.0 / (q * (1.0 - eta * q / 2.0))


def ula_gaussian_bias_floor(Q, eta: float) -> float:
    """Limiting KL of the constant-step chain on the diagonal Gaussian target."""
    q = np.atleast_1d(np.asarray(Q, dtype=float))
    return kl_gaussian_exact(np.zeros_like(q), gaussian_stationary_cov(q, eta), q)


# ---------------------------------------------------------------------------
# Histogram estimators (d <= 2)

def _histogram_masses(samples: np.ndarray, grid: QuadratureGrid):
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    if grid.dim == 1:
        counts, _ = np.histogram(pts[:, 0], bins=grid.bins, range=(grid.lo[0], grid.hi[0]))
    else:
        counts, _, _ = np.histogram2d(
            pts[:, 0],
            pts[:, 1],
            bins=grid.bins,
            range=[(grid.lo[0], grid.hi[0]), (grid.lo[1], grid.hi[1])],
        )
    inside = counts.sum()
    if inside < 0.999 * len(pts):
        raise ValueError("grid box covers less than 99.9% of the samples")
    return counts / inside


def kl_quadrature(
    samples,
    spec: PotentialSpec,
    grid: Optional[QuadratureGrid] = None,
    allow_few: bool = False,
) -> float:
    """Histogram KL of the samples against the quadrature-normalized target.

    Both laws are conditioned on the grid box (the box is built so the
    target's outside mass is < 1e-8 and the samples' < 0.1%). Needs at least
    10^4 samples for a usable estimate; pass allow_few=True to override.
    """
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    if pts.shape[1] > 2:
        raise ValueError("histogram KL is restricted to d <= 2")
    if len(pts) < 10_000 and not allow_few:
        raise ValueError(
            f"got {len(pts)} samples; at least 10000 are needed for a "
            "reliable histogram KL (allow_few=True to override)"
        )
    if grid is None:
        grid = auto_grid(spec, pts)
    p_hat = _histogram_masses(pts, grid)
    pi_hat = _cell_masses(spec, grid)
    pi_hat = pi_hat / pi_hat.sum()
    mask = p_hat > 0
    return float(np.sum(p_hat[mask] * np.log(p_hat[mask] / pi_hat[mask])))


def tv_histogram(
    samples, spec: PotentialSpec, grid: Optional[QuadratureGrid] = None
) -> float:
    """Total variation between the sample histogram and the cell-integrated
    target, both conditioned on the grid box."""
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    if pts.shape[1] > 2:
        raise ValueError("histogram TV is restricted to d <= 2")
    if grid is None:
        grid = auto_grid(spec, pts)
    p_hat = _histogram_masses(pts, grid)
    pi_hat = _cell_masses(spec, grid)
    pi_hat = pi_hat / pi_hat.sum()
    return float(0.5 * np.abs(p_hat - pi_hat).sum())


# ---------------------------------------------------------------------------
# Transport distances

def w2_empirical(xs, ys) -> float:
    """W2 between two equal-size empirical measures. 1D couples by sorting;
    d >= 2 solves the exact assignment problem (at most 512 points)."""
    X = np.asarray(xs, dtype=float)
    Y = np.asarray(ys, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape != Y.shape:
        raise ValueError("point sets must have identical shapes")
    n, d = X.shape
    if d == 1:
        a = np.sort(X[:, 0])
        b = np.sort(Y[:, 0])
        return float(np.sqrt(np.mean((a - b) ** 2)))
    if n > 512:
        raise ValueError("exact assignment is limited to 512 points in d >= 2")
    cost = cdist(X, Y, "sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].mean()))


def _box_cdf_1d(log_dens_nodes: np.ndarray, xs: np.ndarray):
    dens = np.exp(log_dens_nodes - log_dens_nodes.max())
    cdf = np.concatenate(
        [[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(xs))]
    )
    return cdf / cdf[-1]


def quantile_reference_1d(
    spec: PotentialSpec, n: int, grid: Optional[QuadratureGrid] = None
) -> np.ndarray:
    """Deterministic size-n reference sample: target quantiles at midpoints
    (i - 1/2)/n."""
    if grid is None:
        grid = auto_grid(spec)
    if grid.dim != 1:
        raise ValueError("quantile references are 1D only")
    xs, _, _ = _axis_nodes(grid, 0)
    logd = -np.asarray(spec.value(xs[:, None]), dtype=float)
    cdf = _box_cdf_1d(logd, xs)
    u = (np.arange(n) + 0.5) / n
    return np.interp(u, cdf, xs)


def w2_densities_1d(
    log_f: Callable[[np.ndarray], np.ndarray],
    log_g: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    n_nodes: int = 16385,
    n_u: int = 100_000,
) -> float:
    """W2 between two 1D distributions given by unnormalized log-densities,
    via the inverse-CDF coupling W2^2 = int_0^1 (F^{-1} - G^{-1})^2 du."""
    xs = np.linspace(lo, hi, n_nodes)
    Ff = _box_cdf_1d(np.asarray(log_f(xs), dtype=float), xs)
    Fg = _box_cdf_1d(np.asarray(log_g(xs), dtype=float), xs)
    u = (np.arange(n_u) + 0.5) / n_u
    qf = np.interp(u, Ff, xs)
    qg = np.interp(u, Fg, xs)
    return float(np.sqrt(np.mean((qf - qg) ** 2)))


def smoothed_potential_quadrature_1d(
    spec: PotentialSpec, mu: float, p: float, xs: np.ndarray, n_t: int = 4097
) -> np.ndarray:
    """Deterministic U_mu(x) = E U(x + mu t), t one-dimensional generalized
    Gaussian, by composite Simpson in t. Reference-only companion to the
    Monte-Carlo estimator."""
    if p <= 1:
        raise ValueError("p must exceed 1")
    if n_t % 2 == 0:
        n_t += 1
    T = (45.0 * p) ** (1.0 / p)
    ts = np.linspace(-T, T, n_t)
    log_k1 = kappa_log(1, p)
    w = _simpson_weights(n_t, ts[1] - ts[0]) * np.exp(
        -np.abs(ts) ** p / p - log_k1
    )
    w = w / w.sum()  # renormalize the truncated weight to mass one
    xs = np.asarray(xs, dtype=float).ravel()
    out = np.empty_like(xs)
    block = max(1, 2_000_000 // n_t)
    for i in range(0, xs.size, block):
        chunk = xs[i : i + block]
        pts = (chunk[:, None] + mu * ts[None, :]).reshape(-1, 1)
        vals = np.asarray(spec.value(pts), dtype=float).reshape(chunk.size, n_t)
        out[i : i + block] = vals @ w
    return out


def smoothed_target_w2_gap_1d(
    spec: PotentialSpec,
    mu: float,
    p: float,
    grid: Optional[QuadratureGrid] = None,
    n_nodes: int = 16385,
) -> float:
    """Quadrature W2 between the target and its smoothed counterpart in 1D."""
    if grid is None:
        grid = auto_grid(spec)
    lo, hi = float(grid.lo[0]), float(grid.hi[0])

    def log_pi(xs):
        return -np.asarray(spec.value(xs[:, None]), dtype=float)

    def log_pi_mu(xs):
        return -smoothed_potential_quadrature_1d(spec, mu, p, xs)

    return w2_densities_1d(log_pi, log_pi_mu, lo, hi, n_nodes=n_nodes)


# ---------------------------------------------------------------------------
# Moments and conversions

def moment_Ms(samples, s: int) -> float:
    """Sample mean of (1 + ||x||^2)^{s/2}."""
    if s < 2 or s % 2 != 0:
        raise ValueError("s must be an even integer >= 2")
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    r2 = np.sum(pts**2, axis=1)
    return float(np.mean((1.0 + r2) ** (s / 2.0)))


def conversions(kl: float, bounds, beta: Optional[float] = None):
    """(TV bound, W_beta bound) implied by a KL level: Pinsker and the
    dissipativity transport budget."""
    if kl < 0:
        raise ValueError("kl must be nonnegative")
    from .bounds import wasserstein_budget

    tv_bound = math.sqrt(kl / 2.0)
    return tv_bound, wasserstein_budget(bounds, kl, beta)


def geometric_checkpoints(n_steps: int) -> list:
    """1, 2, 4, 8, ... capped and closed at n_steps."""
    ks = []
    k = 1
    while k < n_steps:
        ks.append(k)
        k *= 2
    ks.append(n_steps)
    return ks
