"""Solve the lowered maximize-margin feasibility problem.

The backend is the Clarabel interior-point solver (its PSD triangle cone
uses the same sqrt(2)-scaled svec convention as our lowering).  The solver
is never the final authority: the returned witness is re-validated by
direct eigenvalue computation on every block, and the reported margin is
the re-validated one.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import clarabel
import numpy as np
from scipy import sparse

from .lmi import ConeBlock, StandardConicForm, smat, svec, svec_dim

__all__ = ["SolveOptions", "FeasibilityResult", "solve", "dump_text", "load_text",
           "TAU_FEAS"]

# A problem is declared strictly feasible iff the re-validated margin
# exceeds this threshold (absolute, in block-normalized units).
TAU_FEAS = 1e-7


@dataclass(frozen=True)
class SolveOptions:
    tau_feas: float = TAU_FEAS
    gap_tol: float = 1e-9
    max_iter: int = 200
    verbose: bool = False


@dataclass
class FeasibilityResult:
    status: str                    # "feasible" | "infeasible" | "inconclusive"
    mu_star: float                 # re-validated margin (min over blocks)
    x: np.ndarray | None           # stacked free-scalar witness
    block_min_eigs: list[tuple[str, float]] = field(default_factory=list)
    solver_status: str = ""
    solver_objective: float = float("nan")
    iterations: int = 0
    solve_time: float = 0.0

    @property
    def most_violated(self) -> tuple[str, float] | None:
        """Name and min eigenvalue of the worst non-bound block."""
        cands = [(n, e) for n, e in self.block_min_eigs if not n.startswith("bound:")]
        if not cands:
            return None
        return min(cands, key=lambda t: t[1])


def solve(form: StandardConicForm, opts: SolveOptions = SolveOptions()) -> FeasibilityResult:
    """Maximize the margin mu over all blocks and classify feasibility.

    Contract: the problem `const_i + C_i x >= mu I` is always attainable
    (mu can go negative) and bounded above by the variable box blocks, so a
    healthy solve terminates optimal.  Any other termination is reported
    as inconclusive, never mapped to infeasible.
    """
    t0 = time.perf_counter()
    m = form.m
    if not form.margin:
        raise ValueError("solve requires the margin-adjoined form")

    A_parts, b_parts, cones = [], [], []
    for blk in form.blocks:
        sd = svec_dim(blk.dim)
        mu_col = sparse.csc_matrix(svec(np.eye(blk.dim)).reshape(sd, 1))
        A_parts.append(sparse.hstack([-blk.coeffs, mu_col], format="csc"))
        b_parts.append(blk.const)
        cones.append(clarabel.PSDTriangleConeT(blk.dim))
    A = sparse.vstack(A_parts, format="csc")
    b = np.concatenate(b_parts)
    q = np.zeros(m + 1)
    q[-1] = -1.0  # maximize mu
    P = sparse.csc_matrix((m + 1, m + 1))

    settings = clarabel.DefaultSettings()
    settings.verbose = opts.verbose
    settings.max_iter = opts.max_iter
    settings.tol_gap_abs = opts.gap_tol
    settings.tol_gap_rel = opts.gap_tol

    try:
        sol = clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()
    except BaseException as e:  # solver panic -> inconclusive, never a wrong verdict
        return FeasibilityResult("inconclusive", float("nan"), None,
                                 solver_status=f"exception: {e}",
                                 solve_time=time.perf_counter() - t0)

    status = str(sol.status)
    solved = status in ("SolverStatus.Solved", "SolverStatus.AlmostSolved",
                        "Solved", "AlmostSolved")
    if not solved or sol.x is None:
        return FeasibilityResult("inconclusive", float("nan"), None,
                                 solver_status=status,
                                 iterations=int(sol.iterations),
                                 solve_time=time.perf_counter() - t0)

    z = np.asarray(sol.x)
    x = z[:m]
    eigs = [(blk.name, blk.min_eig(x)) for blk in form.blocks]
    mu_star = min(e for _, e in eigs)
    verdict = "feasible" if mu_star > opts.tau_feas else "infeasible"
    return FeasibilityResult(verdict, mu_star, x, eigs,
                             solver_status=status,
                             solver_objective=float(z[-1]),
                             iterations=int(sol.iterations),
                             solve_time=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Text dump of the lowered form, one constraint per block, for cross-checks
# against external solvers.
# ---------------------------------------------------------------------------

def dump_text(form: StandardConicForm, path):
    lines = [f"ltvcert-conic 1 m={form.m} margin={int(form.margin)}"]
    for vid, kind, dim, off, nf in form.var_layout:
        lines.append(f"var {vid} {kind} {dim} {off} {nf}")
    for blk in form.blocks:
        lines.append(f"block {blk.name} dim={blk.dim} scale={blk.scale!r} "
                     f"bound={int(blk.is_bound)}")
        lines.append("const " + " ".join(repr(float(v)) for v in blk.const))
        cc = blk.coeffs.tocoo()
        for r, c, v in zip(cc.row, cc.col, cc.data):
            lines.append(f"coef {r} {c} {float(v)!r}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_text(path) -> StandardConicForm:
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    head = lines[0].split()
    if head[0] != "ltvcert-conic" or head[1] != "1":
        raise ValueError("not an ltvcert-conic v1 dump")
    m = int(head[2].split("=")[1])
    margin = bool(int(head[3].split("=")[1]))
    layout = []
    blocks = []
    cur = None

    def flush():
        if cur is not None:
            rows, cols, vals = cur["coo"]
            C = sparse.csc_matrix((vals, (rows, cols)),
                                  shape=(svec_dim(cur["dim"]), m))
            blocks.append(ConeBlock(cur["name"], cur["dim"], cur["scale"],
                                    np.array(cur["const"]), C, cur["bound"]))

    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "var":
            layout.append((parts[1], parts[2], int(parts[3]), int(parts[4]),
                           int(parts[5])))
        elif parts[0] == "block":
            flush()
            cur = {"name": parts[1],
                   "dim": int(parts[2].split("=")[1]),
                   "scale": float(parts[3].split("=")[1]),
                   "bound": bool(int(parts[4].split("=")[1])),
                   "const": [], "coo": ([], [], [])}
        elif parts[0] == "const":
            cur["const"] = [float(v) for v in parts[1:]]
        elif parts[0] == "coef":
            cur["coo"][0].append(int(parts[1]))
            cur["coo"][1].append(int(parts[2]))
            cur["coo"][2].append(float(parts[3]))
        else:
            raise ValueError(f"unrecognized dump line: {ln!r}")
    flush()
    return StandardConicForm(m, blocks, margin, layout)
