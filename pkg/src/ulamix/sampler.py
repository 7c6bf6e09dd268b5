"""Euler-Maruyama Langevin kernel, smoothed-gradient variant, and the multi-chain runner.

One step with step size eta moves x to x - eta grad U(x) + sqrt(2 eta) z with
z standard normal. The smoothed variant replaces grad U by the single-draw
estimator g_mu. Only constant step sizes are supported.

Chains are embarrassingly parallel. Each chain owns an independent generator
derived from (seed, chain index) through ``numpy.random.SeedSequence.spawn``,
so results are reproducible and independent of how chains are partitioned
across threads. The runner consumes each chain's stream in fixed-size blocks;
the single-step functions below consume one draw at a time, so a runner
trajectory and a hand-stepped trajectory agree in law but not draw for draw.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .pgauss import SmoothingConfig, grad_estimate, sample_np
from .potential import PotentialSpec

__all__ = [
    "ChainState",
    "RunConfig",
    "RunResult",
    "ula_step",
    "ula_smoothed_step",
    "init_gaussian",
    "run",
    "DIVERGENCE_RADIUS",
]

DIVERGENCE_RADIUS = 1e12


@dataclass(frozen=True)
class ChainState:
    """Position, step index, and elapsed diffusion time of one chain.

    ``t`` accumulates the applied step sizes with compensated summation, so
    after K constant-eta steps it equals K*eta with no drift.
    """

    x: np.ndarray
    k: int = 0
    t: float = 0.0
    t_comp: float = field(default=0.0, repr=False)

    def advance_time(self, eta: float) -> tuple:
        y = eta - self.t_comp
        t_new = self.t + y
        comp = (t_new - self.t) - y
        return t_new, comp


@dataclass(frozen=True)
class RunConfig:
    """Multi-chain run description.

    ``eta`` is a positive step size or the string "plan", in which case the
    caller must supply a planned bound set. ``init_cov`` overrides the
    default per-coordinate initial variance 1/L.
    """

    potential: str
    params: dict
    dim: int
    n_chains: int
    n_steps: int
    eta: Union[float, str]
    smoothing: Optional[SmoothingConfig] = None
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    init_cov: Optional[float] = None

    def __post_init__(self):
        if self.n_chains < 1 or self.n_steps < 1:
            raise ValueError("n_chains and n_steps must be positive")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not (0 <= self.burn_in < self.n_steps):
            raise ValueError("burn_in must satisfy 0 <= burn_in < n_steps")
        if isinstance(self.eta, str):
            if self.eta != "plan":
                raise ValueError('eta must be a positive number or "plan"')
        elif self.eta <= 0:
            raise ValueError("eta must be positive")


@dataclass
class RunResult:
    """Ensemble snapshots, per-step scalar summaries, and divergence flags."""

    eta: float
    mu: Optional[float]
    seed: int
    n_chains: int
    dim: int
    # k -> (n_chains, d) ensemble cross-section
    snapshots: Dict[int, np.ndarray] = field(default_factory=dict)
    # k -> dict of (n_chains,) arrays: t, norm, U, dissip_inner
    summaries: Dict[int, dict] = field(default_factory=dict)
    # -1 while healthy, else the step at which the chain was frozen
    diverged_at: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @property
    def n_diverged(self) -> int:
        return int(np.sum(self.diverged_at >= 0))

    def pooled(self, ks: Optional[Sequence[int]] = None) -> np.ndarray:
        """Stack healthy-chain snapshots at the given steps (default: all)."""
        use = sorted(self.snapshots) if ks is None else sorted(ks)
        healthy = self.diverged_at < 0
        parts = [self.snapshots[k][healthy] for k in use]
        return np.concatenate(parts, axis=0)


def _check_finite_grad(g: np.ndarray, k: int):
    if not np.all(np.isfinite(g)):
        raise FloatingPointError(
            f"non-finite gradient at step {k}; the potential was likely "
            "evaluated outside its admissible domain"
        )


def ula_step(
    state: ChainState, spec: PotentialSpec, eta: float, rng: np.random.Generator
) -> ChainState:
    """One Langevin step x' = x - eta grad U(x) + sqrt(2 eta) z."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    g = np.asarray(spec.grad(state.x), dtype=float)
    _check_finite_grad(g, state.k)
    z = rng.standard_normal(spec.dim)
    x_new = state.x - eta * g + math.sqrt(2.0 * eta) * z
    t_new, comp = state.advance_time(eta)
    return ChainState(x_new, state.k + 1, t_new, comp)


def ula_smoothed_step(
    state: ChainState,
    spec: PotentialSpec,
    cfg: SmoothingConfig,
    eta: float,
    rng: np.random.Generator,
) -> ChainState:
    """One Langevin step driven by the single-draw smoothed gradient g_mu."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if cfg.mu <= 0:
        raise ValueError("smoothed stepping needs mu > 0")
    g = grad_estimate(spec, state.x, cfg, rng)
    _check_finite_grad(g, state.k)
    z = rng.standard_normal(spec.dim)
    x_new = state.x - eta * g + math.sqrt(2.0 * eta) * z
    t_new, comp = state.advance_time(eta)
    return ChainState(x_new, state.k + 1, t_new, comp)


def init_gaussian(
    d: int, L: float, n: int, rng: np.random.Generator
) -> List[ChainState]:
    """n independent chains started from N(0, I/L)."""
    if L <= 0:
        raise ValueError("L must be positive")
    scale = 1.0 / math.sqrt(L)
    return [ChainState(scale * rng.standard_normal(d)) for _ in range(n)]


# ---------------------------------------------------------------------------
# Multi-chain runner

_BLOCK_ELEMS = 8_000_000  # per-array budget for pre-drawn noise blocks


def _chain_generators(seed: int, n: int) -> list:
    return [np.random.default_rng(c) for c in np.random.SeedSequence(seed).spawn(n)]


def _run_slice(
    spec,
    eta,
    smoothing,
    n_steps,
    gens,
    x,
    record_ks,
    summary_ks,
    snapshots,
    summaries,
    diverged_at,
    offset,
):
    """Advance a contiguous slice of chains; writes into shared preallocated dicts."""
    n, d = x.shape
    sqrt2eta = math.sqrt(2.0 * eta)
    block = max(1, min(n_steps, _BLOCK_ELEMS // max(1, n * d)))
    active = np.ones(n, dtype=bool)
    sl = slice(offset, offset + n)

    def summarize(k, xs, g):
        row = summaries[k]
        row["norm"][sl] = np.linalg.norm(xs, axis=-1)
        row["U"][sl] = spec.value(xs)
        row["dissip_inner"][sl] = np.sum(g * xs, axis=-1)

    g = np.asarray(spec.grad(x), dtype=float)
    if 0 in summary_ks:
        summarize(0, x, g)
    if 0 in record_ks:
        snapshots[0][sl] = x

    k = 0
    while k < n_steps:
        b = min(block, n_steps - k)
        z = np.empty((b, n, d))
        for i, gen in enumerate(gens):
            z[:, i, :] = gen.standard_normal((b, d))
        if smoothing is not None:
            xi = np.empty((b, n, d))
            for i, gen in enumerate(gens):
                xi[:, i, :] = sample_np(d, smoothing.p, gen, size=b).reshape(b, d)
        for j in range(b):
            k += 1
            if smoothing is None:
                g = np.asarray(spec.grad(x), dtype=float)
            else:
                g = np.asarray(spec.grad(x + smoothing.mu * xi[j]), dtype=float)
            x_new = x - eta * g + sqrt2eta * z[j]
            with np.errstate(over="ignore", invalid="ignore"):
                bad = ~np.isfinite(x_new).all(axis=-1)
                bad |= np.linalg.norm(np.nan_to_num(x_new), axis=-1) > DIVERGENCE_RADIUS
            newly_bad = active & bad
            if np.any(newly_bad):
                diverged_at[offset + np.nonzero(newly_bad)[0]] = k
                active &= ~bad
            x = np.where(active[:, None], x_new, x)
            if k in summary_ks:
                gs = np.asarray(spec.grad(x), dtype=float)
                summarize(k, x, gs)
            if k in record_ks:
                snapshots[k][sl] = x
    return x


def run(
    config: RunConfig,
    spec: PotentialSpec,
    plan=None,
    checkpoints: Optional[Sequence[int]] = None,
    n_threads: int = 1,
) -> RunResult:
    """Run the configured ensemble and collect snapshots plus scalar summaries.

    Snapshot steps are the post-burn-in thinned grid united with any explicit
    ``checkpoints``. Summaries (norm, U, dissipativity inner product) are
    recorded every ``thin`` steps over the whole trajectory. Chains whose
    state leaves the finite ball of radius 1e12 are frozen and flagged; the
    run continues for the remaining chains.
    """
    if config.eta == "plan":
        if plan is None:
            raise ValueError('eta="plan" requires a planned bound set')
        eta = float(plan.eta)
    else:
        eta = float(config.eta)
    if config.dim != spec.dim:
        raise ValueError("config dim does not match the potential")

    n, d, K = config.n_chains, spec.dim, config.n_steps
    record_ks = {
        k
        for k in range(max(1, config.burn_in), K + 1)
        if (k - config.burn_in) % config.thin == 0
    }
    if checkpoints:
        record_ks |= {int(k) for k in checkpoints if 0 <= int(k) <= K}
    summary_ks = {k for k in range(0, K + 1) if k % config.thin == 0} | {K}

    gens = _chain_generators(config.seed, n)
    cov0 = config.init_cov if config.init_cov is not None else 1.0 / spec.L
    scale = math.sqrt(cov0)
    x0 = np.stack([scale * g.standard_normal(d) for g in gens])

    snapshots = {k: np.empty((n, d)) for k in sorted(record_ks)}
    summaries = {
        k: {
            "t": k * eta,
            "norm": np.empty(n),
            "U": np.empty(n),
            "dissip_inner": np.empty(n),
        }
        for k in sorted(summary_ks)
    }
    diverged_at = np.full(n, -1, dtype=np.int64)

    if n_threads <= 1 or n < 2 * n_threads:
        _run_slice(
            spec, eta, config.smoothing, K, gens, x0, record_ks, summary_ks,
            snapshots, summaries, diverged_at, 0,
        )
    else:
        bounds = np.linspace(0, n, n_threads + 1, dtype=int)
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            futs = []
            for w in range(n_threads):
                lo, hi = int(bounds[w]), int(bounds[w + 1])
                if lo == hi:
                    continue
                futs.append(
                    pool.submit(
                        _run_slice, spec, eta, config.smoothing, K, gens[lo:hi],
                        x0[lo:hi], record_ks, summary_ks, snapshots, summaries,
                        diverged_at, lo,
                    )
                )
            for f in futs:
                f.result()

    mu = config.smoothing.mu if config.smoothing is not None else None
    return RunResult(
        eta=eta,
        mu=mu,
        seed=config.seed,
        n_chains=n,
        dim=d,
        snapshots=snapshots,
        summaries=summaries,
        diverged_at=diverged_at,
    )
