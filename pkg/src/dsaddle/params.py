"""Step sizes and COMM parameters for the two oracle phases.

Phase 0 uses the plain stochastic oracle with step ``s0``; phase 1 uses the
SVRG oracle with step ``s``. For each phase the derivation produces the
contraction margins ``b``, shadow mixing rates ``alpha``, consensus weights
``gamma``, Lyapunov weights ``M`` and the linear rate bound ``rho``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .problems import ProblemConstants, SaddleProblem
from .topology import NetworkTopology

__all__ = [
    "InfeasibleConstants",
    "PhaseParams",
    "HyperParams",
    "derive_params_gsgo",
    "derive_params_svrg",
    "derive_params",
    "check_feasibility",
]


class InfeasibleConstants(ValueError):
    pass


@dataclass(frozen=True)
class PhaseParams:
    """Parameters of one phase. ``c_tilde_*`` are zero in phase 0."""

    s: float
    b_x: float
    b_y: float
    alpha_x: float
    alpha_y: float
    gamma_x: float
    gamma_y: float
    M_x: float
    M_y: float
    rho: float
    c_tilde_x: float = 0.0
    c_tilde_y: float = 0.0


@dataclass(frozen=True)
class HyperParams:
    phase0: PhaseParams
    phase1: PhaseParams
    delta: float
    p_ref: float
    n: int
    p_min: float
    L: float
    mu: float
    kappa_f: float
    kappa_g: float
    lambda_max_IW: float
    lambda_second_min_IW: float

    @property
    def s0(self) -> float:
        return self.phase0.s

    @property
    def s(self) -> float:
        return self.phase1.s

    @property
    def rho0(self) -> float:
        return self.phase0.rho

    @property
    def rho(self) -> float:
        return self.phase1.rho

    def as_rows(self) -> list[tuple[str, float]]:
        rows = []
        for tag, ph in (("phase0", self.phase0), ("phase1", self.phase1)):
            rows += [(f"{tag}.{k}", v) for k, v in asdict(ph).items()]
        for k in ("delta", "p_ref", "n", "p_min", "L", "mu", "kappa_f", "kappa_g", "lambda_max_IW",
                  "lambda_second_min_IW"):
            rows.append((k, getattr(self, k)))
        return rows


def _consts(problem) -> ProblemConstants:
    if isinstance(problem, SaddleProblem):
        return problem.constants
    if isinstance(problem, ProblemConstants):
        return problem
    raise TypeError(f"expected SaddleProblem or ProblemConstants, got {type(problem).__name__}")


def _comm_params(b: float, delta: float, topo: NetworkTopology) -> tuple[float, float, float]:
    """``(alpha, gamma, M)`` for a contraction margin ``b``."""
    lam_max = topo.lambda_max_IW
    alpha = b / (1.0 + delta)
    if lam_max == 0.0:
        # single node: no consensus term to weight
        gamma = 0.0
    elif delta == 0.0:
        gamma = 1.0 / (4.0 * lam_max)
    else:
        gamma = min(b / (4.0 * math.sqrt(delta) * (1.0 + delta) * lam_max), 1.0 / (4.0 * (1.0 + delta) * lam_max))
    M = 1.0 - math.sqrt(delta) * alpha / (1.0 - gamma * lam_max / 2.0)
    return alpha, gamma, M


def _rate(bx, by, gx, gy, ax, ay, topo, extra=()) -> float:
    lam2 = topo.lambda_second_min_IW
    terms = [1 - 3 * bx / 7, 1 - 3 * by / 7, 1 - ax, 1 - ay, *extra]
    if topo.m > 1:
        terms += [1 - gx * lam2 / 2, 1 - gy * lam2 / 2]
    return max(terms)


def _resolve_sampling(problem, n, p_min):
    if n is None:
        n = problem.n if isinstance(problem, SaddleProblem) else 1
    if p_min is None:
        p_min = 1.0 / n
    return int(n), float(p_min)


def derive_params_gsgo(problem, topo: NetworkTopology, delta: float, n: int | None = None,
                       p_min: float | None = None, check: bool = True) -> PhaseParams:
    """Phase-0 (plain stochastic oracle) parameters.

    ``n`` defaults to the problem's batch count and ``p_min`` to ``1/n``
    (uniform batch sampling).
    """
    c = _consts(problem)
    n, p_min = _resolve_sampling(problem, n, p_min)
    np_min = n * p_min
    s0 = np_min / (4.0 * math.sqrt(2.0) * c.L * c.kappa_f)
    bx = c.mu_x * s0 - 4.0 * s0**2 * c.L_yx**2 / np_min
    by = c.mu_y * s0 - 4.0 * s0**2 * c.L_xy**2 / np_min
    ax, gx, Mx = _comm_params(bx, delta, topo)
    ay, gy, My = _comm_params(by, delta, topo)
    rho0 = _rate(bx, by, gx, gy, ax, ay, topo)
    out = PhaseParams(s0, bx, by, ax, ay, gx, gy, Mx, My, rho0)
    if check:
        _check_phase(out, delta, "phase0")
    return out


def derive_params_svrg(problem, topo: NetworkTopology, delta: float, p_ref: float | None = None,
                       n: int | None = None, p_min: float | None = None, check: bool = True) -> PhaseParams:
    """Phase-1 (SVRG oracle) parameters; ``p_ref`` defaults to ``1/n``."""
    c = _consts(problem)
    n, p_min = _resolve_sampling(problem, n, p_min)
    if p_ref is None:
        p_ref = 1.0 / n
    if not 0.0 < p_ref <= 1.0:
        raise InfeasibleConstants(f"p_ref must lie in (0, 1], got {p_ref}")
    np_min = n * p_min
    L = c.L
    s = c.mu * np_min / (24.0 * L**2)
    ctx = 8.0 * s**2 * (L**2 + c.L_yx**2) / (np_min * p_ref)
    cty = 8.0 * s**2 * (L**2 + c.L_xy**2) / (np_min * p_ref)
    bx = s * c.mu_x - 4.0 * s**2 * c.L_yx**2 / np_min - ctx * p_ref
    by = s * c.mu_y - 4.0 * s**2 * c.L_xy**2 / np_min - cty * p_ref
    ax, gx, Mx = _comm_params(bx, delta, topo)
    ay, gy, My = _comm_params(by, delta, topo)
    rho = _rate(bx, by, gx, gy, ax, ay, topo, extra=(1 - p_ref / 2,))
    out = PhaseParams(s, bx, by, ax, ay, gx, gy, Mx, My, rho, ctx, cty)
    if check:
        _check_phase(out, delta, "phase1")
    return out


def _check_phase(p: PhaseParams, delta: float, tag: str) -> list[str]:
    bad = []
    for name in ("b_x", "b_y"):
        v = getattr(p, name)
        if not 0.0 < v < 1.0:
            bad.append(f"{tag}.{name}={v!r} not in (0,1)")
    for name in ("alpha_x", "alpha_y"):
        v = getattr(p, name)
        if not 0.0 < v < 1.0 / (1.0 + delta):
            bad.append(f"{tag}.{name}={v!r} not in (0, 1/(1+delta))")
    for ax in ("x", "y"):
        M = getattr(p, f"M_{ax}")
        b = getattr(p, f"b_{ax}")
        # M = 1 exactly when delta = 0, so the upper end is closed
        if not 0.0 < M <= 1.0:
            bad.append(f"{tag}.M_{ax}={M!r} not in (0,1]")
        elif not 0.0 < (1.0 - b) / M < 1.0:
            bad.append(f"{tag}.(1-b_{ax})/M_{ax}={(1.0 - b) / M!r} not in (0,1)")
    if not 0.0 < p.rho < 1.0:
        bad.append(f"{tag}.rho={p.rho!r} not in (0,1)")
    if bad:
        raise InfeasibleConstants("; ".join(bad))
    return bad


def check_feasibility(hp: HyperParams) -> None:
    """Raise :class:`InfeasibleConstants` unless every interval invariant holds."""
    _check_phase(hp.phase0, hp.delta, "phase0")
    _check_phase(hp.phase1, hp.delta, "phase1")
    if not hp.phase0.rho <= hp.phase1.rho:
        raise InfeasibleConstants(f"rho0={hp.phase0.rho!r} exceeds rho={hp.phase1.rho!r}")


def derive_params(problem, topo: NetworkTopology, delta: float, p_ref: float | None = None,
                  n: int | None = None, p_min: float | None = None) -> HyperParams:
    """Both phases plus the shared constants, checked for feasibility."""
    c = _consts(problem)
    n, p_min = _resolve_sampling(problem, n, p_min)
    if p_ref is None:
        p_ref = 1.0 / n
    if not c.L >= c.mu > 0:
        raise InfeasibleConstants(f"need L >= mu > 0, got L={c.L!r}, mu={c.mu!r}")
    ph0 = derive_params_gsgo(c, topo, delta, n=n, p_min=p_min, check=False)
    ph1 = derive_params_svrg(c, topo, delta, p_ref=p_ref, n=n, p_min=p_min, check=False)
    hp = HyperParams(
        phase0=ph0,
        phase1=ph1,
        delta=float(delta),
        p_ref=float(p_ref),
        n=n,
        p_min=p_min,
        L=c.L,
        mu=c.mu,
        kappa_f=c.kappa_f,
        kappa_g=topo.kappa_g,
        lambda_max_IW=topo.lambda_max_IW,
        lambda_second_min_IW=topo.lambda_second_min_IW,
    )
    check_feasibility(hp)
    return hp
