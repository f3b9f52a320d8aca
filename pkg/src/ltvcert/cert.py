"""Assembly of the stability LMIs and certificate packaging.

Nominal problem (per segment k, 2n x 2n block over z = [alpha x; x]):

    [[ M_k - Gamma_k,  L_k + Gamma_k/2 + S_k ],
     [ *,              N_k                   ]]  < 0

with M_k, L_k, N_k the alpha-quadratic coefficients of the Lyapunov decay
form, Gamma_k > 0 the interval multiplier for alpha(1-alpha) >= 0, and S_k
skew (its quadratic form on z-structured vectors vanishes).

Robust problem (4n x 4n block over w = [alpha*delta x; alpha x; delta x; x]):
the same construction applied twice, first over delta in [1/Delta, Delta]
with multiplier Gamma_k and beta = (Delta + 1/Delta)/2, then over alpha in
[0, 1] with multiplier Psi_k, plus skew multipliers S_{1,k} (n x n) and
S_{2,k} (2n x 2n, top-right block) matching the stacked structure.

The cross-block entries coupling the alpha-odd terms are (1,4) = N_{1,k}/2,
(2,3) = N_{1,k}^T/2 and (2,4) = M_{1,k}: these are twice the published
values, which is the unique scaling for which the stacked quadratic form
reproduces the decay form  alpha^2 M_2 + 2 alpha M_1 + M_0
+ delta (alpha^2 N_2 + 2 alpha N_1 + N_0)  exactly (the grid oracle and the
random-sample identity tests check this).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import sdp
from .lmi import (STAR, AffineMatrixExpr, LmiProblem, block, const_expr, lower,
                  sym, var_expr)
from .model import PiecewiseLTVSystem, UncertainPiecewiseLTVSystem

__all__ = [
    "DecayRates",
    "NominalCertificate",
    "RobustCertificate",
    "CertifyOutcome",
    "DEFAULT_EPSILON",
    "beta_of_delta",
    "delta_of_beta",
    "build_nominal",
    "build_robust",
    "solve_nominal",
    "solve_robust",
    "load_certificate",
    "save_certificate",
]

# Uniform decay rate used when a system file does not prescribe one.
DEFAULT_EPSILON = 0.01


@dataclass(frozen=True)
class DecayRates:
    """Per-breakpoint exponential decay rates, all positive."""

    epsilon: tuple[float, ...]

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilon)
        object.__setattr__(self, "epsilon", eps)
        if any(e <= 0 or not np.isfinite(e) for e in eps):
            raise ValueError("all decay rates must be positive and finite")

    @classmethod
    def uniform(cls, n_breakpoints: int, value: float = DEFAULT_EPSILON):
        return cls((value,) * n_breakpoints)

    def __getitem__(self, k: int) -> float:
        return self.epsilon[k]

    def __len__(self) -> int:
        return len(self.epsilon)

    @property
    def minimum(self) -> float:
        return min(self.epsilon)


def beta_of_delta(Delta: float) -> float:
    """beta = (Delta + 1/Delta) / 2, strictly increasing for Delta >= 1."""
    if Delta < 1:
        raise ValueError("Delta must be >= 1")
    return 0.5 * (Delta + 1.0 / Delta)


def delta_of_beta(beta: float) -> float:
    """Inverse of beta_of_delta on [1, inf): Delta = beta + sqrt(beta^2 - 1)."""
    if beta < 1:
        raise ValueError("beta must be >= 1")
    return beta + np.sqrt(max(beta * beta - 1.0, 0.0))


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------

@dataclass
class NominalCertificate:
    P: tuple[np.ndarray, ...]
    Gamma: tuple[np.ndarray, ...]
    S: tuple[np.ndarray, ...]
    epsilon: DecayRates
    mu_star: float
    solver_stats: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.P[0].shape[0]

    @property
    def n_segments(self) -> int:
        return len(self.P) - 1

    def P_of_t(self, grid, t: float) -> np.ndarray:
        """Interpolated Lyapunov matrix; constant P_0 / P_N outside the grid."""
        from .model import _interp
        return _interp(grid, self.P, t)


@dataclass
class RobustCertificate:
    P: tuple[np.ndarray, ...]
    Gamma: tuple[np.ndarray, ...]
    Psi: tuple[np.ndarray, ...]
    S1: tuple[np.ndarray, ...]
    S2: tuple[np.ndarray, ...]
    epsilon: DecayRates
    Delta: float
    beta: float
    mu_star: float
    solver_stats: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.P[0].shape[0]

    @property
    def n_segments(self) -> int:
        return len(self.P) - 1

    def P_of_t(self, grid, t: float) -> np.ndarray:
        from .model import _interp
        return _interp(grid, self.P, t)


@dataclass
class CertifyOutcome:
    """Result of a certification attempt.

    status is "feasible" (certificate attached), "infeasible" (mu_star and
    the most violated constraint are reported), or "inconclusive" (solver
    did not terminate cleanly; never mapped to infeasible).
    """

    status: str
    certificate: NominalCertificate | RobustCertificate | None
    mu_star: float
    most_violated: tuple[str, float] | None
    solve_result: sdp.FeasibilityResult


# ---------------------------------------------------------------------------
# Nominal assembly
# ---------------------------------------------------------------------------

def _decay_coeffs_A(prob_vars, A, k: int, eps_k: float, gamma_k: float):
    """Symbolic M_k, L_k, N_k for segment k from the A-family."""
    Pk, Pk1 = prob_vars[k], prob_vars[k - 1]
    Ak, Ak1 = A[k], A[k - 1]
    M = sym(var_expr(Pk, R=Ak) - var_expr(Pk, R=Ak1)
            - var_expr(Pk1, R=Ak) + var_expr(Pk1, R=Ak1))
    L = sym(0.5 * (var_expr(Pk, R=Ak1) + var_expr(Pk1, R=Ak))
            - var_expr(Pk1, R=Ak1)) \
        + (eps_k / 2.0) * (var_expr(Pk) - var_expr(Pk1))
    N = sym(var_expr(Pk1, R=Ak1)) \
        + gamma_k * (var_expr(Pk) - var_expr(Pk1)) + eps_k * var_expr(Pk1)
    return M, L, N


def _uncertainty_coeffs_B(prob_vars, B, k: int):
    """Symbolic N_{2,k}, N_{1,k}, N_{0,k} from the B-family (no decay terms)."""
    Pk, Pk1 = prob_vars[k], prob_vars[k - 1]
    Bk, Bk1 = B[k], B[k - 1]
    N2 = sym(var_expr(Pk, R=Bk) - var_expr(Pk, R=Bk1)
             - var_expr(Pk1, R=Bk) + var_expr(Pk1, R=Bk1))
    N1 = sym(0.5 * (var_expr(Pk, R=Bk1) + var_expr(Pk1, R=Bk))
             - var_expr(Pk1, R=Bk1))
    N0 = sym(var_expr(Pk1, R=Bk1))
    return N2, N1, N0


def _check_eps(sys_obj, eps: DecayRates):
    if len(eps) != len(sys_obj.grid.breakpoints):
        raise ValueError(
            f"decay-rate count {len(eps)} != breakpoint count "
            f"{len(sys_obj.grid.breakpoints)}")


def build_nominal(sys: PiecewiseLTVSystem, eps: DecayRates) -> LmiProblem:
    """Stability LMIs for a piecewise LTV system."""
    bad = sys.validate()
    if bad:
        raise ValueError("; ".join(bad))
    _check_eps(sys, eps)
    n, N = sys.n, sys.n_segments
    prob = LmiProblem()
    P = [prob.add_variable(f"P{k}", "symmetric", n) for k in range(N + 1)]
    Gam = {k: prob.add_variable(f"Gamma{k}", "symmetric", n) for k in range(1, N + 1)}
    S = {k: prob.add_variable(f"S{k}", "skew", n) for k in range(1, N + 1)}

    for k in range(N + 1):
        prob.add_constraint(var_expr(P[k]), "positive", f"P{k}_pos")
    prob.add_constraint(sym(var_expr(P[0], R=sys.A[0])) + eps[0] * var_expr(P[0]),
                        "negative", "boundary_start")
    prob.add_constraint(sym(var_expr(P[N], R=sys.A[N])) + eps[N] * var_expr(P[N]),
                        "negative", "boundary_end")

    for k in range(1, N + 1):
        prob.add_constraint(var_expr(Gam[k]), "positive", f"Gamma{k}_pos")
        M, L, Nk = _decay_coeffs_A(P, sys.A, k, eps[k], sys.grid.gamma(k))
        blk = block([
            [M - var_expr(Gam[k]), L + 0.5 * var_expr(Gam[k]) + var_expr(S[k])],
            [STAR, Nk],
        ])
        prob.add_constraint(blk, "negative", f"segment{k}_block")
    return prob


# ---------------------------------------------------------------------------
# Robust assembly
# ---------------------------------------------------------------------------

def build_robust(usys: UncertainPiecewiseLTVSystem, eps: DecayRates,
                 Delta: float, strict_boundary: bool = False) -> LmiProblem:
    """Robust stability LMIs for delta in [1/Delta, Delta].

    The boundary conditions outside the grid carry no B terms by default;
    strict_boundary additionally imposes the two vertex conditions at
    delta in {1/Delta, Delta} on each boundary (sufficient by linearity).
    """
    if not isinstance(usys, UncertainPiecewiseLTVSystem):
        raise ValueError("robust analysis needs a system with B matrices")
    bad = usys.validate()
    if bad:
        raise ValueError("; ".join(bad))
    _check_eps(usys, eps)
    if Delta < 1:
        raise ValueError("Delta must be >= 1")
    beta = beta_of_delta(Delta)
    n, N = usys.n, usys.n_segments
    A, B = usys.A, usys.B
    prob = LmiProblem()
    P = [prob.add_variable(f"P{k}", "symmetric", n) for k in range(N + 1)]
    Gam = {k: prob.add_variable(f"Gamma{k}", "symmetric", n) for k in range(1, N + 1)}
    Psi = {k: prob.add_variable(f"Psi{k}", "symmetric", 2 * n) for k in range(1, N + 1)}
    S1 = {k: prob.add_variable(f"S1_{k}", "skew", n) for k in range(1, N + 1)}
    S2 = {k: prob.add_variable(f"S2_{k}", "skew", 2 * n) for k in range(1, N + 1)}

    for k in range(N + 1):
        prob.add_constraint(var_expr(P[k]), "positive", f"P{k}_pos")

    for (idx, tag) in ((0, "start"), (N, "end")):
        prob.add_constraint(
            sym(var_expr(P[idx], R=A[idx])) + eps[idx] * var_expr(P[idx]),
            "negative", f"boundary_{tag}")
        if strict_boundary:
            for dv, vtag in ((1.0 / Delta, "lo"), (Delta, "hi")):
                prob.add_constraint(
                    sym(var_expr(P[idx], R=A[idx] + dv * B[idx]))
                    + eps[idx] * var_expr(P[idx]),
                    "negative", f"boundary_{tag}_vertex_{vtag}")

    Z = const_expr(np.zeros((n, n)))
    Z2 = const_expr(np.zeros((2 * n, 2 * n)))
    for k in range(1, N + 1):
        prob.add_constraint(var_expr(Gam[k]), "positive", f"Gamma{k}_pos")
        prob.add_constraint(var_expr(Psi[k]), "positive", f"Psi{k}_pos")
        M2, M1, M0 = _decay_coeffs_A(P, A, k, eps[k], usys.grid.gamma(k))
        N2, N1, N0 = _uncertainty_coeffs_B(P, B, k)
        G = var_expr(Gam[k])
        # stacked order [alpha*delta, alpha, delta, 1] in n-blocks
        R = block([
            [Z, 0.5 * N2, Z, 0.5 * N1],
            [STAR, M2, 0.5 * N1.T(), M1],
            [STAR, STAR, -1.0 * G, 0.5 * N0 + beta * G + var_expr(S1[k])],
            [STAR, STAR, STAR, M0 - G],
        ])
        # alpha-interval multiplier and the 2n skew term, at 2n granularity
        Psie = var_expr(Psi[k])
        H = block([
            [-1.0 * Psie, 0.5 * Psie + var_expr(S2[k])],
            [STAR, Z2],
        ])
        prob.add_constraint(R + H, "negative", f"segment{k}_robust_block")
    return prob


# ---------------------------------------------------------------------------
# Solving and re-validation
# ---------------------------------------------------------------------------

def _revalidated_margin(problem: LmiProblem, assignment) -> tuple[float, tuple[str, float]]:
    """Margin re-computed from the original constraints (block-normalized)."""
    worst_name, worst = "", np.inf
    for c in problem.constraints:
        M = c.expr.evaluate(assignment)
        scale = max(1.0, float(np.linalg.norm(
            0.5 * (c.expr.constant + c.expr.constant.T))))
        ev = np.linalg.eigvalsh(0.5 * (M + M.T))
        slack = (-ev.max() if c.sense == "negative" else ev.min()) / scale
        if slack < worst:
            worst, worst_name = slack, c.name
    return worst, (worst_name, worst)


def _solve_problem(problem: LmiProblem, opts: sdp.SolveOptions):
    form = lower(problem, margin=True)
    res = sdp.solve(form, opts)
    if res.status == "inconclusive":
        return res, None, None
    assignment = problem.assignment(res.x)
    mu, worst = _revalidated_margin(problem, assignment)
    # the original-constraint margin is authoritative over the lowered one
    res.mu_star = min(res.mu_star, mu)
    if res.status == "feasible" and mu <= opts.tau_feas:
        res.status = "infeasible"
    return res, assignment, worst


def solve_nominal(sys: PiecewiseLTVSystem, eps: DecayRates,
                  opts: sdp.SolveOptions = sdp.SolveOptions()) -> CertifyOutcome:
    prob = build_nominal(sys, eps)
    res, assignment, worst = _solve_problem(prob, opts)
    if res.status != "feasible":
        return CertifyOutcome(res.status, None, res.mu_star,
                              worst or res.most_violated, res)
    N = sys.n_segments
    cert = NominalCertificate(
        P=tuple(assignment[f"P{k}"] for k in range(N + 1)),
        Gamma=tuple(assignment[f"Gamma{k}"] for k in range(1, N + 1)),
        S=tuple(assignment[f"S{k}"] for k in range(1, N + 1)),
        epsilon=eps, mu_star=res.mu_star,
        solver_stats={"iterations": res.iterations,
                      "solve_time": res.solve_time,
                      "solver_status": res.solver_status})
    return CertifyOutcome("feasible", cert, res.mu_star, worst, res)


def solve_robust(usys: UncertainPiecewiseLTVSystem, eps: DecayRates, Delta: float,
                 strict_boundary: bool = False,
                 opts: sdp.SolveOptions = sdp.SolveOptions()) -> CertifyOutcome:
    prob = build_robust(usys, eps, Delta, strict_boundary)
    res, assignment, worst = _solve_problem(prob, opts)
    if res.status != "feasible":
        return CertifyOutcome(res.status, None, res.mu_star,
                              worst or res.most_violated, res)
    N = usys.n_segments
    cert = RobustCertificate(
        P=tuple(assignment[f"P{k}"] for k in range(N + 1)),
        Gamma=tuple(assignment[f"Gamma{k}"] for k in range(1, N + 1)),
        Psi=tuple(assignment[f"Psi{k}"] for k in range(1, N + 1)),
        S1=tuple(assignment[f"S1_{k}"] for k in range(1, N + 1)),
        S2=tuple(assignment[f"S2_{k}"] for k in range(1, N + 1)),
        epsilon=eps, Delta=float(Delta), beta=beta_of_delta(Delta),
        mu_star=res.mu_star,
        solver_stats={"iterations": res.iterations,
                      "solve_time": res.solve_time,
                      "solver_status": res.solver_status})
    return CertifyOutcome("feasible", cert, res.mu_star, worst, res)


# ---------------------------------------------------------------------------
# Certificate files (JSON, matrices row-major)
# ---------------------------------------------------------------------------

FORMAT_VERSION = 1


def save_certificate(path, cert):
    doc = {
        "format": FORMAT_VERSION,
        "mu_star": cert.mu_star,
        "epsilon": list(cert.epsilon.epsilon),
        "P": [m.tolist() for m in cert.P],
        "solver_stats": cert.solver_stats,
    }
    if isinstance(cert, RobustCertificate):
        doc["type"] = "robust"
        doc["Delta"] = cert.Delta
        doc["beta"] = cert.beta
        doc["Gamma"] = [m.tolist() for m in cert.Gamma]
        doc["Psi"] = [m.tolist() for m in cert.Psi]
        doc["S1"] = [m.tolist() for m in cert.S1]
        doc["S2"] = [m.tolist() for m in cert.S2]
    else:
        doc["type"] = "nominal"
        doc["Gamma"] = [m.tolist() for m in cert.Gamma]
        doc["S"] = [m.tolist() for m in cert.S]
    Path(path).write_text(json.dumps(doc, indent=1))


def load_certificate(path):
    doc = json.loads(Path(path).read_text())
    mats = lambda key: tuple(np.array(m, dtype=float) for m in doc[key])
    eps = DecayRates(tuple(doc["epsilon"]))
    if doc.get("type") == "robust":
        return RobustCertificate(
            P=mats("P"), Gamma=mats("Gamma"), Psi=mats("Psi"),
            S1=mats("S1"), S2=mats("S2"), epsilon=eps,
            Delta=float(doc["Delta"]), beta=float(doc["beta"]),
            mu_star=float(doc["mu_star"]),
            solver_stats=doc.get("solver_stats", {}))
    return NominalCertificate(
        P=mats("P"), Gamma=mats("Gamma"), S=mats("S"), epsilon=eps,
        mu_star=float(doc["mu_star"]), solver_stats=doc.get("solver_stats", {}))
