"""Maximize the certified uncertainty interval [1/Delta, Delta] by bisection.

For fixed Delta the robust conditions are an LMI feasibility problem, and
the certified set grows monotonically with the reparameterization
beta = (Delta + 1/Delta)/2, so the largest certifiable Delta is found by
bracketing (doubling) followed by bisection on Delta itself.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .cert import DecayRates, RobustCertificate, beta_of_delta, solve_robust
from .model import UncertainPiecewiseLTVSystem

__all__ = ["MarginOptions", "ProbeRecord", "MarginResult", "max_uncertainty",
           "write_probe_csv"]

FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class MarginOptions:
    delta_max: float = 1e6      # bracket cap
    tol_bis: float = 1e-3       # relative bisection width
    eta: float = 1e-6           # initial probe at Delta = 1 + eta
    # The margin claim covers all t, so by default the boundary conditions
    # carry the uncertainty too (vertex conditions at delta = 1/Delta and
    # Delta).  Without them the reported interval can exceed the true
    # stability boundary: the conditions outside the grid would then only
    # constrain the unperturbed dynamics.
    strict_boundary: bool = True
    solve_opts: sdp.SolveOptions = sdp.SolveOptions()


@dataclass
class ProbeRecord:
    delta: float
    beta: float
    status: str
    mu_star: float
    solve_time: float


@dataclass
class MarginResult:
    delta_star: float
    beta_star: float
    interval: tuple[float, float]
    certificate: RobustCertificate
    probes: list[ProbeRecord] = field(default_factory=list)
    uncertainty_inactive: bool = False  # B is identically zero
    bracket_capped: bool = False        # doubling reached delta_max feasible
    had_inconclusive: bool = False      # some probe was treated as infeasible


def max_uncertainty(usys: UncertainPiecewiseLTVSystem, eps: DecayRates,
                    opts: MarginOptions = MarginOptions()) -> MarginResult | None:
    """Largest Delta with a verified robust certificate, or None.

    Inconclusive probes are treated as infeasible (conservative) and
    flagged.  If every B_k is exactly zero the uncertain gain multiplies
    nothing, so delta_star is reported at the bracket cap with the
    uncertainty_inactive flag; the attached certificate is taken at the
    largest Delta whose multiplier scaling stays numerically well posed.
    """
    probes: list[ProbeRecord] = []
    result_flags = {"had_inconclusive": False}

    def probe(Delta: float):
        t0 = time.perf_counter()
        out = solve_robust(usys, eps, Delta, opts.strict_boundary, opts.solve_opts)
        if out.status == "inconclusive":
            result_flags["had_inconclusive"] = True
        probes.append(ProbeRecord(Delta, beta_of_delta(Delta), out.status,
                                  out.mu_star, time.perf_counter() - t0))
        return out

    if all(np.all(b == 0.0) for b in usys.B):
        # delta multiplies zero: any certifiable Delta certifies them all
        for d in (opts.delta_max, 1e3, 2.0):
            out = probe(d)
            if out.status == "feasible":
                return MarginResult(opts.delta_max, beta_of_delta(opts.delta_max),
                                    (1.0 / opts.delta_max, opts.delta_max),
                                    out.certificate, probes,
                                    uncertainty_inactive=True,
                                    had_inconclusive=result_flags["had_inconclusive"])
        return None

    out = probe(1.0 + opts.eta)
    if out.status != "feasible":
        return None
    lo, best = 1.0 + opts.eta, out.certificate

    # bracket by doubling
    hi = None
    d = 2.0
    capped = False
    while True:
        if d >= opts.delta_max:
            d = opts.delta_max
        out = probe(d)
        if out.status == "feasible":
            lo, best = d, out.certificate
            if d >= opts.delta_max:
                capped = True
                break
            d *= 2.0
        else:
            hi = d
            break

    if hi is not None:
        while (hi - lo) / lo > opts.tol_bis:
            mid = 0.5 * (lo + hi)
            out = probe(mid)
            if out.status == "feasible":
                lo, best = mid, out.certificate
            else:
                hi = mid

    return MarginResult(lo, beta_of_delta(lo), (1.0 / lo, lo), best, probes,
                        bracket_capped=capped,
                        had_inconclusive=result_flags["had_inconclusive"])


def write_probe_csv(path, probes: list[ProbeRecord]):
    lines = ["delta,beta,status,mu_star,solve_time"]
    for p in probes:
        lines.append(",".join([FLOAT_FMT % p.delta, FLOAT_FMT % p.beta, p.status,
                               FLOAT_FMT % p.mu_star, FLOAT_FMT % p.solve_time]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
