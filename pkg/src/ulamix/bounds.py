"""Closed-form constants and the step-size planner.

Every function evaluates a displayed formula literally, with no attempt to
optimize or tighten. Conventions shared by all of them: L = max(1, max L_i),
alpha = smallest Holder exponent, alpha_N = largest, N = number of mixture
terms. max/min operators written as v/^ in the source material are evaluated
exactly as max and min.

Where a statement and its derivation disagree on a constant factor the
statement form is computed by default and the alternative is available via
``proof_variant=True``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional, Tuple

import numpy as np

from .pgauss import SmoothingConfig
from .potential import PotentialSpec

__all__ = [
    "BoundSet",
    "PlannerIneligibleError",
    "SmoothedConstants",
    "tilde_constants",
    "initial_kl_surrogate",
    "descent_constants",
    "moment_growth_Cs",
    "plan_step_size",
    "kl_transport_budget",
    "wasserstein_budget",
    "smoothed_sampler_constants",
    "poincare_lower_bound",
    "grad_moment_bound",
    "stationary_grad_second_moment",
]


class PlannerIneligibleError(ValueError):
    """The planner's standing hypothesis on the exponents fails."""


@dataclass(frozen=True)
class BoundSet:
    """Flat record of every constant the planner evaluates.

    Field order is the canonical print order. Unsmoothed plans leave the
    mu-subscripted entries at None. ``eta_terms`` holds the five
    admissibility terms (at the final horizon T) whose minimum is eta.
    """

    eps: float
    s: int
    gamma: float
    H0: float
    E2: Optional[float]
    mu: Optional[float]
    p: float
    a: float
    beta: float
    tilde_c: float
    tilde_d: float
    C_s: float
    Ms: float
    lam: float
    D1: float
    D2: float
    D3: float
    Dmu1: Optional[float]
    Dmu2: Optional[float]
    Dmu3: Optional[float]
    A: float
    T: float
    eta: float
    K: int
    gamma1: float
    eta_terms: Tuple[float, float, float, float, float]
    elig_2alphaN_le_beta: bool
    elig_2alphaN_sq_le_beta: bool
    warning: Optional[str] = None

    def as_items(self):
        """(name, value) pairs in canonical order, eta_terms expanded."""
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "eta_terms":
                for i, t in enumerate(v, start=1):
                    out.append((f"eta_term_{i}", t))
            elif f.name == "lam":
                out.append(("lambda", v))
            else:
                out.append((f.name, v))
        return out


@dataclass(frozen=True)
class SmoothedConstants:
    gamma1: float
    dissip_mu: Optional[Tuple[float, float]]
    w2_gap: float
    mu_eligible: bool
    mu_threshold: float


def _value_at_origin(spec: PotentialSpec) -> float:
    return float(spec.value(np.zeros(spec.dim)))


def tilde_constants(
    spec: PotentialSpec,
    smoothing: Optional[SmoothingConfig] = None,
    d: Optional[int] = None,
) -> Tuple[float, float]:
    """Lyapunov-integral constants (tilde_c, tilde_d).

    tilde_d = (d/beta) [ (beta/2) log(pi) + log(4 beta/a) + (1 - beta/2) log(d/(2e)) ]
    tilde_c = (1/2) log(2/beta) + sum_i L_i/(alpha_i+1) (2b/a)^{(alpha_i+1)/beta}
              + b/beta + |U(0)|

    log(pi) is the natural log of the circle constant. With smoothing the
    value-level bias N L mu^{1+alpha}/(1+alpha) d^{2/min(2,p)} is added to
    tilde_c. U(0) is evaluated in the potential's own dimension.
    """
    a, b, beta = spec.dissip
    if a <= 0 or beta <= 0:
        raise ValueError("dissipativity needs a > 0 and beta > 0")
    dd = spec.dim if d is None else int(d)
    tilde_d = (dd / beta) * (
        (beta / 2.0) * math.log(math.pi)
        + math.log(4.0 * beta / a)
        + (1.0 - beta / 2.0) * math.log(dd / (2.0 * math.e))
    )
    tilde_c = (
        0.5 * math.log(2.0 / beta)
        + sum(
            (Li / (ai + 1.0)) * (2.0 * b / a) ** ((ai + 1.0) / beta)
            for (Li, ai) in spec.smooth_terms
        )
        + b / beta
        + abs(_value_at_origin(spec))
    )
    if smoothing is not None and smoothing.mu > 0:
        N, L, alpha = spec.n_terms, spec.L, spec.alpha
        tilde_c += (
            N * L * smoothing.mu ** (1.0 + alpha) / (1.0 + alpha)
        ) * dd ** (2.0 / min(2.0, smoothing.p))
    return tilde_c, tilde_d


def initial_kl_surrogate(
    spec: PotentialSpec,
    d: Optional[int] = None,
    smoothing: Optional[SmoothingConfig] = None,
) -> float:
    """O(d) surrogate for the KL at a N(0, I/L) start.

    U(0) + N L mu^{1+alpha}/(1+alpha) d^{2/min(2,p)} - (d/2) log(2 pi e / L)
    + N d/(1+alpha). Can be negative: the normalizing constant of the target
    is dropped. Callers should treat a nonpositive value as "already below
    any achievable accuracy".
    """
    dd = spec.dim if d is None else int(d)
    N, L, alpha = spec.n_terms, spec.L, spec.alpha
    mu = smoothing.mu if smoothing is not None else 0.0
    p = smoothing.p if smoothing is not None else 2.0
    bias = (N * L * mu ** (1.0 + alpha) / (1.0 + alpha)) * dd ** (
        2.0 / min(2.0, p)
    )
    return (
        _value_at_origin(spec)
        + bias
        - (dd / 2.0) * math.log(2.0 * math.pi * math.e / L)
        + N * dd / (1.0 + alpha)
    )


def _check_planner_hypothesis(spec: PotentialSpec):
    beta = spec.dissip[2]
    if 2.0 * spec.alpha_N > beta:
        raise PlannerIneligibleError(
            f"hypothesis 2*alpha_N <= beta fails: "
            f"2*{spec.alpha_N:g} = {2 * spec.alpha_N:g} > beta = {beta:g}"
        )


def descent_constants(
    spec: PotentialSpec,
    d: int,
    p: float,
    H0: float,
    smoothing: Optional[SmoothingConfig] = None,
    proof_variant: bool = False,
):
    """Descent constants (D1, D2, D3), or the mu-subscripted triple when a
    smoothing config is supplied.

    Statement forms:
      D1 = (16a/beta) N^4 L^6 (1.5 + tilde_d + tilde_c)
      D2 = N sum_i [ (16a/beta) N^2 L^{2+4 a_i} (1.5 + tilde_d + tilde_c)
                     + 4 N^2 L^{2+4 a_i} + 8 N^{2 a_i} L^{2+2 a_i} d^{3 a_i/p}
                     + 4 L^2 d^{a_i} ]
      D3 = 4 D1 H0 + D2
    The proof variant swaps L^6 -> L^4 in D1 and uses the derivation's
    grouping for D2. Smoothed forms follow the corresponding displays, with
    the mu-level constants A_mu1/A_mu2i folded in.
    """
    if H0 < 0:
        raise ValueError("H0 must be nonnegative")
    _check_planner_hypothesis(spec)
    a, b, beta = spec.dissip
    N, L = spec.n_terms, spec.L
    alpha = spec.alpha
    ai_list = [ai for (_, ai) in spec.smooth_terms]

    if smoothing is None:
        tc, td = tilde_constants(spec, None, d)
        base = 1.5 + td + tc
        if proof_variant:
            D1 = (16.0 * a / beta) * N**4 * L**4 * base
            D2 = (
                N**2
                * L**2
                * sum(
                    4.0 * N**2 * L**2
                    * (2.0 * d ** (3.0 * ai / p) + 1.0 + (4.0 * a / beta) * base)
                    + 4.0 * d**ai
                    for ai in ai_list
                )
            )
        else:
            D1 = (16.0 * a / beta) * N**4 * L**6 * base
            D2 = N * sum(
                (16.0 * a / beta) * N**2 * L ** (2.0 + 4.0 * ai) * base
                + 4.0 * N**2 * L ** (2.0 + 4.0 * ai)
                + 8.0 * N ** (2.0 * ai) * L ** (2.0 + 2.0 * ai) * d ** (3.0 * ai / p)
                + 4.0 * L**2 * d**ai
                for ai in ai_list
            )
        D3 = 4.0 * D1 * H0 + D2
        return D1, D2, D3

    mu = smoothing.mu
    pp = smoothing.p
    tcmu, td = tilde_constants(spec, smoothing, d)
    base = 1.5 + td + tcmu
    value_bias = (N * L * mu ** (1.0 + alpha) / (1.0 + alpha)) * d ** (
        2.0 / min(2.0, pp)
    )
    grad_bias = (N * L * mu ** (1.0 + alpha) / (1.0 + alpha)) * d ** max(
        3.0 / pp, 2.5
    )
    A_mu1 = (8.0 * a / beta) * N**2 * L**2 * base
    A_mu2 = [
        2.0 * N**2 * L**2
        + 2.0 * N**2 * L**2 * (4.0 * a / beta) * base
        + 2.0
        * (
            (2.0 * N * L / mu ** (1.0 - alpha)) * d ** (2.0 / pp) * d ** (2.0 / pp)
            + 2.0 * value_bias**2
        )
        ** ai
        for ai in ai_list
    ]
    var_bound = 8.0 * N**2 * L**2 * d ** (2.0 * alpha / pp)
    Dmu1 = 36.0 * N**2 * L**2 * A_mu1
    # the second term below carries mu to the first power, as displayed
    Dmu2 = (
        18.0 * N * L**2 * sum(A_mu2)
        + 6.0 * ((N * L * mu / (1.0 + alpha)) * d ** max(3.0 / pp, 2.5)) ** 2
        + var_bound
        + 6.0
        * N
        * L**2
        * sum(
            6.0 * (grad_bias ** (2.0 * ai) + var_bound**ai) + 4.0 * d**ai
            for ai in ai_list
        )
    )
    Dmu3 = 4.0 * Dmu1 * H0 + Dmu2
    return Dmu1, Dmu2, Dmu3


def moment_growth_Cs(spec: PotentialSpec, d: int, s: int) -> dict:
    """Per-step growth constant of the weighted moment M_s, the bound on
    M_s at a N(0, I/L) start plus target, and the step-size threshold under
    which the growth estimate holds.
    """
    if s < 2 or s % 2 != 0:
        raise ValueError("s must be an even integer >= 2")
    a, b, beta = spec.dissip
    N, L = spec.n_terms, spec.L
    expo = (s - 2.0) / beta + 1.0
    C_s = ((3.0 * a + 2.0 * b + 3.0) / min(1.0, a)) ** expo * float(s) ** s * float(
        d
    ) ** expo
    Ms_init = (
        2.0
        * ((3.0 * a + b + 3.0) / a) ** (s / beta)
        * float(s) ** (s / beta)
        * float(d) ** (s / beta)
    )
    eta_threshold = 0.5 * min(1.0, a / (2.0 * N**2 * L**2))
    return {"C_s": C_s, "Ms_init_bound": Ms_init, "eta_threshold": eta_threshold}


def _lambda_plain(spec: PotentialSpec, gamma: float) -> float:
    return 6.0 * spec.n_terms * spec.L * gamma ** (-0.25)


def _lambda_smoothed(
    spec: PotentialSpec, smoothing: SmoothingConfig, d: int, gamma1: float
) -> float:
    N, L, alpha = spec.n_terms, spec.L, spec.alpha
    shift = (
        2.0
        * (N * L * smoothing.mu ** (1.0 + alpha) / (1.0 + alpha))
        * d ** max(2.0 / smoothing.p, 2.0)
        * math.sqrt(1.0 / gamma1)
    )
    return math.sqrt(2.0) + shift


def plan_step_size(
    spec: PotentialSpec,
    d: int,
    p: float,
    eps: float,
    H0: float,
    gamma: float,
    s: int,
    T_hint: Optional[float] = None,
    smoothing: Optional[SmoothingConfig] = None,
    E2: Optional[float] = None,
    proof_variant: bool = False,
) -> BoundSet:
    """Step size eta, horizon T, and iteration count K for a target KL
    accuracy eps.

    The horizon solves T = lam^4 (M_s v C_s T)^{8/s} ln(H0/eps)/eps^3 by one
    fixed-point pass (start from the M_s-only value, substitute once).
    Then
        A   = (3/8) lam^{-2} (eps/2) / (2^{4/s} (M_s v C_s T)^{4/s})
        eta = min{ 1, (1/(2 T D1))^{1/(2 alpha)}, (H0/(2 T D2))^{1/alpha},
                   (A eps/(2 D3))^{1/alpha}, (eps/(2 T D3))^{1/alpha} }
        K   = ceil(T/eta)
    and T is reset to K*eta so the returned triple is exactly consistent;
    if the reset pushes eta above an admissibility term, eta is lowered and
    K recomputed (at most a few adjustment passes in practice).

    When eps >= H0 (including a nonpositive H0 surrogate) the plan is
    degenerate: K = 0, T = 0, and a warning is set. Smoothed plans use the
    perturbed functional-inequality constant and the mu-subscripted descent
    constants throughout.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if gamma is None or gamma <= 0:
        raise ValueError("gamma must be a positive real (supply one or use the lower-bound helper)")
    if s <= 8 or s % 2 != 0:
        raise ValueError("s must be an even integer > 8")
    _check_planner_hypothesis(spec)

    a, b, beta = spec.dissip
    alpha = spec.alpha
    N, L = spec.n_terms, spec.L
    tc, td = tilde_constants(spec, smoothing, d)
    growth = moment_growth_Cs(spec, d, s)
    C_s, Ms = growth["C_s"], growth["Ms_init_bound"]
    H0_for_D = max(H0, 0.0)
    D1, D2, D3 = descent_constants(spec, d, p, H0_for_D, None, proof_variant)
    if smoothing is not None and smoothing.mu > 0:
        Dmu1, Dmu2, Dmu3 = descent_constants(
            spec, d, p, H0_for_D, smoothing, proof_variant
        )
        gamma1 = gamma * math.exp(
            -4.0
            * L
            * smoothing.mu ** (1.0 + alpha)
            * d ** ((1.0 + alpha) / min(2.0, smoothing.p))
        )
        lam = _lambda_smoothed(spec, smoothing, d, gamma1)
        use1, use2, use3 = Dmu1, Dmu2, Dmu3
        mu_rec = smoothing.mu
        p_rec = smoothing.p
    else:
        Dmu1 = Dmu2 = Dmu3 = None
        gamma1 = gamma
        lam = _lambda_plain(spec, gamma)
        use1, use2, use3 = D1, D2, D3
        mu_rec = smoothing.mu if smoothing is not None else None
        p_rec = smoothing.p if smoothing is not None else p

    elig = spec.eligibility()

    def contraction(T: float) -> float:
        cap = max(Ms, C_s * T)
        return 0.375 / lam**2 * (eps / 2.0) / (2.0 ** (4.0 / s) * cap ** (4.0 / s))

    def admissibility(T: float, A: float):
        return (
            1.0,
            (1.0 / (2.0 * T * use1)) ** (1.0 / (2.0 * alpha)),
            (H0 / (2.0 * T * use2)) ** (1.0 / alpha),
            (A * eps / (2.0 * use3)) ** (1.0 / alpha),
            (eps / (2.0 * T * use3)) ** (1.0 / alpha),
        )

    common = dict(
        eps=eps,
        s=s,
        gamma=gamma,
        H0=H0,
        E2=E2,
        mu=mu_rec,
        p=p_rec,
        a=a,
        beta=beta,
        tilde_c=tc,
        tilde_d=td,
        C_s=C_s,
        Ms=Ms,
        lam=lam,
        D1=D1,
        D2=D2,
        D3=D3,
        Dmu1=Dmu1,
        Dmu2=Dmu2,
        Dmu3=Dmu3,
        gamma1=gamma1,
        elig_2alphaN_le_beta=elig["two_alpha_le_beta"],
        elig_2alphaN_sq_le_beta=elig["two_alpha_sq_le_beta"],
    )

    if H0 <= eps:
        A = contraction(0.0)
        eta = min(1.0, (A * eps / (2.0 * use3)) ** (1.0 / alpha))
        inf = float("inf")
        return BoundSet(
            A=A,
            T=0.0,
            eta=eta,
            K=0,
            eta_terms=(1.0, inf, inf, (A * eps / (2.0 * use3)) ** (1.0 / alpha), inf),
            warning=(
                f"target accuracy eps={eps:g} is not below the initial KL "
                f"H0={H0:g}; nothing to do (K=0)"
            ),
            **common,
        )

    log_gap = math.log(H0 / eps)
    if T_hint is not None:
        T0 = float(T_hint)
    else:
        T0 = lam**4 * Ms ** (8.0 / s) * log_gap / eps**3
    T = lam**4 * max(Ms, C_s * T0) ** (8.0 / s) * log_gap / eps**3

    A = contraction(T)
    eta = min(admissibility(T, A))
    K = math.ceil(T / eta)
    for _ in range(100):
        T_final = K * eta
        A = contraction(T_final)
        terms = admissibility(T_final, A)
        lo = min(terms)
        if eta <= lo * (1.0 + 1e-12):
            break
        eta = lo
        K = math.ceil(T / eta)
    return BoundSet(
        A=A, T=K * eta, eta=eta, K=int(K), eta_terms=terms, warning=None, **common
    )


def kl_transport_budget(
    a: float, beta: float, tilde_c: float, tilde_d: float, H: float
) -> float:
    """2 [(a/(4 beta)) (1.5 + tilde_d + tilde_c)]^{1/beta}
    (H^{1/beta} + H^{1/(2 beta)})."""
    if H < 0:
        raise ValueError("H must be nonnegative")
    base = (a / (4.0 * beta)) * (1.5 + tilde_d + tilde_c)
    return 2.0 * base ** (1.0 / beta) * (H ** (1.0 / beta) + H ** (1.0 / (2.0 * beta)))


def wasserstein_budget(bounds: BoundSet, H: float, beta: Optional[float] = None) -> float:
    """Transport budget a KL level H buys, using the bound set's constants."""
    bb = bounds.beta if beta is None else beta
    return kl_transport_budget(bounds.a, bb, bounds.tilde_c, bounds.tilde_d, H)


def smoothed_sampler_constants(
    spec: PotentialSpec,
    cfg: SmoothingConfig,
    gamma: float,
    d: int,
    E2: float,
) -> SmoothedConstants:
    """Perturbed functional-inequality constant, shifted dissipativity pair,
    and the squared-W2 gap bound between the target and its smoothed version.

    The gap bound 8.24 N L mu^{1+alpha} d^{2/p} E2 only applies when
    mu <= (0.05/(N L d^{2/p}))^{1/(1+alpha)}; ``mu_eligible`` records that.
    The dissipativity shift needs beta > 1; for beta <= 1 (and mu > 0) it is
    reported as None.
    """
    if E2 < 0:
        raise ValueError("E2 must be nonnegative")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    a, b, beta = spec.dissip
    N, L, alpha = spec.n_terms, spec.L, spec.alpha
    mu, p = cfg.mu, cfg.p

    gamma1 = gamma * math.exp(
        -4.0 * L * mu ** (1.0 + alpha) * d ** ((1.0 + alpha) / min(2.0, p))
    )
    if mu == 0:
        dissip_mu = (a / 2.0, b)
    elif beta > 1.0:
        pert = (L / 2.0) * mu**alpha * d ** max(2.5, 3.0 / p)
        dissip_mu = (a / 2.0, b + pert * (2.0 * pert / a) ** (1.0 / (beta - 1.0)))
    else:
        dissip_mu = None
    w2_gap = 8.24 * N * L * mu ** (1.0 + alpha) * d ** (2.0 / p) * E2
    threshold = (0.05 / (N * L * d ** (2.0 / p))) ** (1.0 / (1.0 + alpha))
    return SmoothedConstants(
        gamma1=gamma1,
        dissip_mu=dissip_mu,
        w2_gap=w2_gap,
        mu_eligible=mu <= threshold,
        mu_threshold=threshold,
    )


def poincare_lower_bound(spec: PotentialSpec, C_K: float = 1.0) -> float:
    """Functional-inequality constant guaranteed by convexity outside a ball.

    gamma_lb = exp(-8 sum_i L_i R^{1+alpha_i})
               / (32 C_K^2 d (a + b + 2 a R^2 + 3)/a)

    C_K is the universal constant of the Cheeger-type step; the default 1.0
    makes the result a template rather than a certified value.
    """
    R = spec.convexity_radius
    if R is None:
        raise ValueError("convexity radius unavailable for this potential")
    if C_K <= 0:
        raise ValueError("C_K must be positive")
    a, b, _ = spec.dissip
    decay = math.exp(
        -4.0 * 2.0 * sum(Li * R ** (1.0 + ai) for (Li, ai) in spec.smooth_terms)
    )
    denom = 32.0 * C_K**2 * spec.dim * ((a + b + 2.0 * a * R**2 + 3.0) / a)
    return decay / denom


def grad_moment_bound(spec: PotentialSpec, d: int, p: float, H: float) -> float:
    """Bound on E[||grad U||^{2 alpha_N}] along the chain at KL level H:
    (8 L^2 a/beta)(1.5 + tilde_d + tilde_c) H
    + (16 L^2 a/beta)(1.5 + tilde_d + tilde_c) + 4 L^2."""
    if H < 0:
        raise ValueError("H must be nonnegative")
    a, _, beta = spec.dissip
    L = spec.L
    tc, td = tilde_constants(spec, None, d)
    base = 1.5 + td + tc
    return (8.0 * L**2 * a / beta) * base * H + (16.0 * L**2 * a / beta) * base + 4.0 * L**2


def stationary_grad_second_moment(spec: PotentialSpec, d: int, p: float) -> float:
    """Stationary bound E_pi[||grad U||^2] <= 2 N L^2 d^{3/p}."""
    return 2.0 * spec.n_terms * spec.L**2 * d ** (3.0 / p)
