"""Batch front end.

Subcommands: plan, check, sample, diagnose. One JSON config document
describes one experiment:

    {
      "potential": {"name": "gaussian", "dim": 1, "params": {}},
      "run": {"n_chains": 4, "n_steps": 1000, "eta": 0.01,
              "burn_in": 0, "thin": 1, "seed": 0},
      "smoothing": {"enabled": false, "mu": "sqrt_eta", "p": 2.0,
                    "mc_batch": 1000},
      "plan": {"eps": 0.1, "s": 10, "gamma": "from_spec", "C_K": 1.0,
               "H0": "lemma35"},
      "output": {"dir": "out", "checkpoints": "geometric"}
    }

run.eta may be the string "plan", in which case the plan block supplies the
step size. smoothing.mu may be "sqrt_eta"; with a planned eta the scale is
taken from an unsmoothed pre-plan, then the final plan is recomputed with
smoothing. run.init_cov (optional) overrides the default 1/L initial
per-coordinate variance. All CSV floats are written with 17 significant
digits. Exit codes: 0 ok, 2 plan ineligibility, 3 every chain diverged,
4 sample-data mismatch.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .bounds import (
    BoundSet,
    PlannerIneligibleError,
    kl_transport_budget,
    initial_kl_surrogate,
    plan_step_size,
    poincare_lower_bound,
    tilde_constants,
)
from .diagnostics import (
    auto_grid,
    geometric_checkpoints,
    kl_gaussian_exact,
    kl_quadrature,
    moment_Ms,
    propagate_gaussian_chain,
    quantile_reference_1d,
    target_quadrature,
    tv_histogram,
    w2_empirical,
)
from .figures import render_density_overlay, render_kl_decay
from .pgauss import SmoothingConfig
from .potential import (
    PotentialSpec,
    builtin,
    check_dissipative,
    check_lower_envelope,
    check_mixture_smooth,
    check_origin_stationary,
)
from .sampler import RunConfig, run

EXIT_OK = 0
EXIT_INELIGIBLE = 2
EXIT_DIVERGED = 3
EXIT_MISMATCH = 4


class ConfigError(ValueError):
    pass


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")
    if "potential" not in cfg:
        raise ConfigError("config needs a potential block")
    return cfg


def build_spec(cfg: dict) -> PotentialSpec:
    pot = cfg["potential"]
    try:
        name = pot["name"]
        dim = int(pot["dim"])
    except KeyError as e:
        raise ConfigError(f"potential block is missing {e}")
    return builtin(name, dim, pot.get("params", {}))


def _smoothing_from(cfg: dict, eta: Optional[float]) -> Optional[SmoothingConfig]:
    blk = cfg.get("smoothing")
    if not blk or not blk.get("enabled", False):
        return None
    mu_raw = blk.get("mu", "sqrt_eta")
    if mu_raw == "sqrt_eta":
        if eta is None:
            raise ConfigError('smoothing.mu="sqrt_eta" needs a resolved eta')
        mu = math.sqrt(eta)
    else:
        mu = float(mu_raw)
    return SmoothingConfig(
        mu=mu, p=float(blk.get("p", 2.0)), mc_batch=int(blk.get("mc_batch", 1000))
    )


def _plan_from(cfg: dict, spec: PotentialSpec, smoothing) -> BoundSet:
    blk = cfg.get("plan")
    if blk is None:
        raise ConfigError("a plan block is required here")
    try:
        eps = float(blk["eps"])
        s = int(blk["s"])
    except KeyError as e:
        raise ConfigError(f"plan block is missing {e}")
    C_K = float(blk.get("C_K", 1.0))
    gamma_raw = blk.get("gamma", "from_spec")
    if gamma_raw == "from_spec":
        if spec.poincare_gamma is None:
            raise ConfigError(
                'plan.gamma="from_spec" but the potential declares none; '
                'use "poincare_lb" or a number'
            )
        gamma = spec.poincare_gamma
    elif gamma_raw == "poincare_lb":
        gamma = poincare_lower_bound(spec, C_K)
    else:
        gamma = float(gamma_raw)
    H0_raw = blk.get("H0", "lemma35")
    if H0_raw == "lemma35":
        H0 = initial_kl_surrogate(spec, spec.dim, smoothing)
    else:
        H0 = float(H0_raw)
    p = smoothing.p if smoothing is not None else 2.0
    return plan_step_size(
        spec, spec.dim, p, eps, H0, gamma, s, smoothing=smoothing
    )


def resolve_eta(cfg: dict, spec: PotentialSpec):
    """(eta, smoothing, bound_set_or_None) with smoothing.mu and planned eta
    settled; the bound set is present exactly when eta came from a plan."""
    run_blk = cfg.get("run", {})
    eta_raw = run_blk.get("eta", "plan")
    if eta_raw != "plan":
        eta = float(eta_raw)
        if eta <= 0:
            raise ConfigError("run.eta must be positive")
        return eta, _smoothing_from(cfg, eta), None
    sm_blk = cfg.get("smoothing")
    wants_smoothing = bool(sm_blk and sm_blk.get("enabled", False))
    if wants_smoothing and sm_blk.get("mu", "sqrt_eta") == "sqrt_eta":
        pre = _plan_from(cfg, spec, None)
        smoothing = _smoothing_from(cfg, pre.eta)
    else:
        smoothing = _smoothing_from(cfg, None) if wants_smoothing else None
    plan = _plan_from(cfg, spec, smoothing)
    return plan.eta, smoothing, plan


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else _fmt(v) for v in row])


# ---------------------------------------------------------------------------
# Subcommands

def cmd_plan(cfg: dict, out_dir: Path) -> int:
    spec = build_spec(cfg)
    run_blk = cfg.get("run", {})
    eta_raw = run_blk.get("eta", "plan")
    if eta_raw != "plan":
        smoothing = _smoothing_from(cfg, float(eta_raw))
    else:
        sm_blk = cfg.get("smoothing")
        if sm_blk and sm_blk.get("enabled", False) and sm_blk.get("mu", "sqrt_eta") == "sqrt_eta":
            pre = _plan_from(cfg, spec, None)
            smoothing = _smoothing_from(cfg, pre.eta)
        else:
            smoothing = _smoothing_from(cfg, None) if sm_blk and sm_blk.get("enabled", False) else None
    plan = _plan_from(cfg, spec, smoothing)
    lines = [f"{name}={_fmt(value)}" for name, value in plan.as_items()]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if plan.warning:
        sys.stdout.write(f"# warning: {plan.warning}\n")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "plan.txt").write_text(text, encoding="utf-8")
    return EXIT_OK


def cmd_check(cfg: dict, out_dir: Path, seed_override: Optional[int]) -> int:
    spec = build_spec(cfg)
    blk = cfg.get("check", {})
    n = int(blk.get("n_points", 2000))
    radius = float(blk.get("radius", 8.0 * math.sqrt(spec.dim)))
    seed = seed_override if seed_override is not None else int(
        blk.get("seed", cfg.get("run", {}).get("seed", 0))
    )
    reports = [
        check_mixture_smooth(spec, n, radius, seed),
        check_dissipative(spec, n, radius, seed + 1),
        check_lower_envelope(spec, n, radius, seed + 2),
        check_origin_stationary(spec),
    ]
    rows = []
    for r in reports:
        if r.witness is None:
            wit = None
        else:
            wit = ";".join(
                " ".join(_fmt(float(c)) for c in np.atleast_1d(pt)) for pt in r.witness
            )
        rows.append([r.assumption_id, r.passed, r.worst_ratio, wit])
        sys.stdout.write(
            f"{r.assumption_id}: {'pass' if r.passed else 'FAIL'} "
            f"(worst_ratio={_fmt(r.worst_ratio)})\n"
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "check.csv", ["id", "passed", "worst_ratio", "witness"], rows)
    return EXIT_OK


def cmd_sample(cfg: dict, out_dir: Path, seed_override: Optional[int], threads: int) -> int:
    spec = build_spec(cfg)
    eta, smoothing, plan = resolve_eta(cfg, spec)
    run_blk = cfg.get("run", {})
    seed = seed_override if seed_override is not None else int(run_blk.get("seed", 0))
    config = RunConfig(
        potential=cfg["potential"]["name"],
        params=cfg["potential"].get("params", {}),
        dim=spec.dim,
        n_chains=int(run_blk.get("n_chains", 1)),
        n_steps=int(run_blk.get("n_steps", 1000)),
        eta=eta,
        smoothing=smoothing,
        burn_in=int(run_blk.get("burn_in", 0)),
        thin=int(run_blk.get("thin", 1)),
        seed=seed,
        init_cov=run_blk.get("init_cov"),
    )
    cp_raw = cfg.get("output", {}).get("checkpoints", "geometric")
    if cp_raw == "geometric":
        checkpoints = geometric_checkpoints(config.n_steps)
    else:
        checkpoints = [int(k) for k in cp_raw]
    result = run(config, spec, plan=plan, checkpoints=checkpoints, n_threads=threads)

    out_dir.mkdir(parents=True, exist_ok=True)
    d = spec.dim
    sample_rows = []
    for k in sorted(result.snapshots):
        snap = result.snapshots[k]
        for i in range(result.n_chains):
            if 0 <= result.diverged_at[i] <= k:
                continue
            sample_rows.append([i, k] + [snap[i, j] for j in range(d)])
    _write_csv(
        out_dir / "samples.csv",
        ["chain_id", "k"] + [f"x_{j + 1}" for j in range(d)],
        sample_rows,
    )
    summary_rows = []
    for k in sorted(result.summaries):
        rec = result.summaries[k]
        for i in range(result.n_chains):
            summary_rows.append(
                [i, k, rec["t"], rec["norm"][i], rec["U"][i], rec["dissip_inner"][i]]
            )
    _write_csv(
        out_dir / "summary.csv",
        ["chain_id", "k", "t", "norm", "U", "dissip_inner"],
        summary_rows,
    )
    diverged = [int(i) for i in np.nonzero(result.diverged_at >= 0)[0]]
    meta = {
        "eta": eta,
        "mu": result.mu,
        "p": smoothing.p if smoothing is not None else None,
        "seed": seed,
        "n_chains": config.n_chains,
        "n_steps": config.n_steps,
        "burn_in": config.burn_in,
        "thin": config.thin,
        "n_diverged": len(diverged),
        "diverged_chains": ";".join(map(str, diverged)) if diverged else None,
    }
    (out_dir / "run_meta.txt").write_text(
        "".join(f"{k}={_fmt(v)}\n" for k, v in meta.items()), encoding="utf-8"
    )
    sys.stdout.write(
        f"eta={_fmt(eta)} mu={_fmt(result.mu)} diverged={len(diverged)}/{config.n_chains}\n"
    )
    sys.stdout.write(f"wrote {out_dir / 'samples.csv'} and {out_dir / 'summary.csv'}\n")
    if len(diverged) == config.n_chains:
        sys.stderr.write("every chain diverged; lower eta\n")
        return EXIT_DIVERGED
    return EXIT_OK


def _load_samples(path: Path, d: int):
    if not path.exists():
        raise FileNotFoundError(path)
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    x_cols = [c for c in header if c.startswith("x_")]
    if len(x_cols) != d:
        raise ValueError(
            f"sample file has {len(x_cols)} coordinate columns, config dim is {d}"
        )
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    ks = data[:, 1].astype(int)
    xs = data[:, 2 : 2 + d]
    return ks, xs


def cmd_diagnose(
    cfg: dict,
    out_dir: Path,
    samples_path: Optional[Path],
    allow_few: bool,
    seed_override: Optional[int],
) -> int:
    spec = build_spec(cfg)
    d = spec.dim
    eta, smoothing, _ = resolve_eta(cfg, spec)
    run_blk = cfg.get("run", {})
    seed = seed_override if seed_override is not None else int(run_blk.get("seed", 0))
    path = samples_path if samples_path is not None else out_dir / "samples.csv"
    try:
        ks_col, xs = _load_samples(Path(path), d)
    except (FileNotFoundError, ValueError) as e:
        sys.stderr.write(f"cannot use sample file: {e}\n")
        return EXIT_MISMATCH

    a, b, beta = spec.dissip
    tc, td = tilde_constants(spec, None)
    is_plain_gaussian = (
        cfg["potential"]["name"] == "gaussian" and smoothing is None
    )
    init_cov = run_blk.get("init_cov")
    cov0 = float(init_cov) if init_cov is not None else 1.0 / spec.L

    grid = auto_grid(spec, xs) if d <= 2 else None
    quad = target_quadrature(spec, grid) if d <= 2 else None
    rng = np.random.default_rng(seed)

    rows = []
    for k in np.unique(ks_col):
        pts = xs[ks_col == k]
        n = len(pts)
        kl = None
        method = "none"
        if is_plain_gaussian:
            mean_k, cov_k = propagate_gaussian_chain(
                np.ones(d), eta, int(k), np.zeros(d), np.full(d, cov0)
            )
            kl = kl_gaussian_exact(mean_k, cov_k, np.ones(d))
            method = "gaussian_exact"
        elif d <= 2 and (n >= 10_000 or allow_few):
            kl = kl_quadrature(pts, spec, grid, allow_few=allow_few)
            method = "quadrature"
        tv = tv_histogram(pts, spec, grid) if d <= 2 else None
        if d == 1:
            w2 = w2_empirical(pts, quantile_reference_1d(spec, n, grid))
        elif d == 2:
            m = min(n, 512)
            sub = pts[rng.choice(n, size=m, replace=False)] if n > m else pts
            ref = _grid_reference_2d(quad["cell_masses"], grid, m, rng)
            w2 = w2_empirical(sub, ref)
        elif cfg["potential"]["name"] == "gaussian":
            m = min(n, 512)
            sub = pts[rng.choice(n, size=m, replace=False)] if n > m else pts
            w2 = w2_empirical(sub, rng.standard_normal((m, d)))
        else:
            w2 = None
        tv_from_kl = math.sqrt(kl / 2.0) if kl is not None else None
        wbeta_from_kl = (
            kl_transport_budget(a, beta, tc, td, kl) if kl is not None else None
        )
        rows.append(
            {
                "k": int(k),
                "t": int(k) * eta,
                "kl": kl,
                "kl_method": method,
                "tv": tv,
                "w2": w2,
                "m_2": moment_Ms(pts, 2),
                "m_4": moment_Ms(pts, 4),
                "tv_from_kl": tv_from_kl,
                "wbeta_from_kl": wbeta_from_kl,
            }
        )

    out_dir.mkdir(parents=True, exist_ok=True)
    header = [
        "k", "t", "kl", "kl_method", "tv", "w2", "m_2", "m_4",
        "tv_from_kl", "wbeta_from_kl",
    ]
    _write_csv(out_dir / "diagnostics.csv", header, [[r[h] for h in header] for r in rows])
    render_kl_decay(rows, str(out_dir / "kl_decay.png"))
    if d <= 2:
        last_k = int(np.max(ks_col))
        render_density_overlay(
            xs[ks_col == last_k], spec, grid, str(out_dir / "density_overlay.png"), k=last_k
        )
    sys.stdout.write(f"wrote {out_dir / 'diagnostics.csv'} ({len(rows)} checkpoints)\n")
    return EXIT_OK


def _grid_reference_2d(cell_masses, grid, n, rng) -> np.ndarray:
    """n reference points from the cell-integrated target: multinomial over
    cells, uniform within each cell."""
    probs = cell_masses.ravel()
    probs = probs / probs.sum()
    counts = rng.multinomial(n, probs)
    ex = grid.edges(0)
    ey = grid.edges(1)
    pts = np.empty((n, 2))
    pos = 0
    for flat_idx in np.nonzero(counts)[0]:
        c = counts[flat_idx]
        i, j = divmod(flat_idx, grid.bins)
        u = rng.random((c, 2))
        pts[pos : pos + c, 0] = ex[i] + u[:, 0] * (ex[i + 1] - ex[i])
        pts[pos : pos + c, 1] = ey[j] + u[:, 1] * (ey[j + 1] - ey[j])
        pos += c
    return pts


# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ulamix",
        description="Langevin sampling toolkit: plan, check, sample, diagnose.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("plan", "check", "sample", "diagnose"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment document")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        if name == "sample":
            p.add_argument("--threads", type=int, default=1)
        if name == "diagnose":
            p.add_argument("--samples", default=None, help="samples.csv path")
            p.add_argument(
                "--allow-few", action="store_true",
                help="permit histogram KL below 10^4 samples",
            )
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        out_dir = Path(
            args.out
            if args.out is not None
            else cfg.get("output", {}).get("dir", "out")
        )
        if args.command == "plan":
            return cmd_plan(cfg, out_dir)
        if args.command == "check":
            return cmd_check(cfg, out_dir, args.seed)
        if args.command == "sample":
            return cmd_sample(cfg, out_dir, args.seed, args.threads)
        if args.command == "diagnose":
            return cmd_diagnose(
                cfg,
                out_dir,
                Path(args.samples) if args.samples else None,
                args.allow_few,
                args.seed,
            )
    except PlannerIneligibleError as e:
        sys.stderr.write(f"plan ineligible: {e}\n")
        return EXIT_INELIGIBLE
    except ConfigError as e:
        sys.stderr.write(f"config error: {e}\n")
        return 1
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
