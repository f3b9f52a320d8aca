"""Independent verification: eigenvalue oracles, simulation, frozen-time margins.

Everything here recomputes quantities directly from certificate matrices
and system data; nothing is reused from the symbolic LMI assembly, so this
module serves as the second route of every dual-route check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cert import NominalCertificate, RobustCertificate
from .model import PiecewiseLTVSystem, UncertainPiecewiseLTVSystem

__all__ = [
    "Trajectory",
    "LyapunovTrace",
    "GridVerification",
    "FrozenMargin",
    "FrozenTimeReport",
    "simulate",
    "lyapunov_monitor",
    "verify_certificate_grid",
    "spectral_abscissa",
    "frozen_time_margins",
    "decay_coefficients",
    "uncertainty_coefficients",
    "write_trajectory_csv",
    "write_frozen_csv",
]

DIVERGENCE_NORM = 1e12
FLOAT_FMT = "%.17g"


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), n)
    delta: float
    h: float
    diverged: bool = False

    @property
    def n(self) -> int:
        return self.states.shape[1]


def _rhs_factory(sys_obj, delta: float):
    if isinstance(sys_obj, UncertainPiecewiseLTVSystem):
        return lambda t: sys_obj.eval_perturbed(t, delta)
    if delta != 0.0:
        raise ValueError("delta requires a system with B matrices")
    return sys_obj.eval_A


def simulate(sys_obj, delta: float, x0, t_span, h: float) -> Trajectory:
    """Classical 4th-order fixed-step integration of x' = A(t) x.

    Steps are aligned so every breakpoint inside t_span is a sample point
    (h is shrunk per sub-interval to divide it exactly).  Sets the
    divergence flag and stops early once |x| exceeds 1e12.
    """
    if h <= 0:
        raise ValueError("step size must be positive")
    x0 = np.asarray(x0, dtype=float)
    if not np.all(np.isfinite(x0)):
        raise ValueError("non-finite initial state")
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not (np.isfinite(t0) and np.isfinite(t1) and t1 > t0):
        raise ValueError("t_span must be a finite increasing pair")
    eval_at = _rhs_factory(sys_obj, delta)

    knots = [t0] + [t for t in sys_obj.grid.breakpoints if t0 < t < t1] + [t1]
    times = [t0]
    states = [x0.copy()]
    x = x0.copy()
    diverged = False
    for a, b in zip(knots, knots[1:]):
        steps = max(1, int(np.ceil((b - a) / h - 1e-12)))
        hs = (b - a) / steps
        for i in range(steps):
            t = a + i * hs
            A1 = eval_at(t)
            k1 = A1 @ x
            Ah = eval_at(t + 0.5 * hs)
            k2 = Ah @ (x + 0.5 * hs * k1)
            k3 = Ah @ (x + 0.5 * hs * k2)
            A2 = eval_at(t + hs)
            k4 = A2 @ (x + hs * k3)
            x = x + (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            times.append(a + (i + 1) * hs)
            states.append(x.copy())
            if np.linalg.norm(x) > DIVERGENCE_NORM:
                diverged = True
                break
        if diverged:
            break
    return Trajectory(np.array(times), np.array(states), float(delta), h, diverged)


# ---------------------------------------------------------------------------
# Lyapunov monitoring
# ---------------------------------------------------------------------------

@dataclass
class LyapunovTrace:
    times: np.ndarray
    values: np.ndarray
    epsilon_floor: float
    passed: bool
    worst_ratio: float  # max of V(t_j) / (V(t_i) e^{-eps (t_j - t_i)}) over i<j


def lyapunov_monitor(traj: Trajectory, cert, sys_obj,
                     rel_tol: float = 1e-6) -> LyapunovTrace:
    """Integrated decay check of V(t) = x(t)^T P(t) x(t).

    Pass iff V(t_j) <= V(t_i) e^{-eps_min (t_j - t_i)} (1 + rel_tol) for
    all sample pairs i < j inside [t_0, t_N]; equivalent to a running-min
    test on V(t) e^{eps_min t}.  Outside the grid P is held constant at
    its boundary value.  The check is done in integrated form rather than
    by differentiating V, which would be noisy at the knots where the
    interpolated P has corner points.
    """
    if traj.n != cert.n:
        raise ValueError("trajectory/certificate dimension mismatch")
    grid = sys_obj.grid
    V = np.array([x @ cert.P_of_t(grid, t) @ x
                  for t, x in zip(traj.times, traj.states)])
    eps = cert.epsilon.minimum
    t_lo, t_hi = grid.breakpoints[0], grid.breakpoints[-1]
    in_window = (traj.times >= t_lo) & (traj.times <= t_hi)
    tw, vw = traj.times[in_window], V[in_window]
    worst = 0.0
    passed = True
    if len(tw) > 1:
        # compare against the running minimum of V e^{eps t}, shifted to
        # the window start so the exponentials stay in range
        g = vw * np.exp(eps * (tw - tw[0]))
        run_min = np.minimum.accumulate(g)
        prev_min = np.concatenate([[np.inf], run_min[:-1]])
        with np.errstate(invalid="ignore", divide="ignore"):
            ratios = np.where(prev_min > 0, g / prev_min, 0.0)
        worst = float(np.nanmax(ratios[1:])) if len(ratios) > 1 else 0.0
        passed = bool(worst <= 1.0 + rel_tol)
    return LyapunovTrace(traj.times, V, eps, passed, worst)


# ---------------------------------------------------------------------------
# Grid oracle for certificates
# ---------------------------------------------------------------------------

def decay_coefficients(Pk1, Pk, Ak1, Ak, eps_k, gamma_k):
    """Numeric (M, L, N): the decay form is alpha^2 M + 2 alpha L + N."""
    def s(x):
        return x + x.T
    M = s(Pk @ Ak - (Pk @ Ak1 + Pk1 @ Ak) + Pk1 @ Ak1)
    L = s(0.5 * (Pk @ Ak1 + Pk1 @ Ak) - Pk1 @ Ak1) + 0.5 * eps_k * (Pk - Pk1)
    N = s(Pk1 @ Ak1) + gamma_k * (Pk - Pk1) + eps_k * Pk1
    return M, L, N


def uncertainty_coefficients(Pk1, Pk, Bk1, Bk):
    """Numeric (N2, N1, N0): the delta-linear part is
    delta (alpha^2 N2 + 2 alpha N1 + N0)."""
    def s(x):
        return x + x.T
    N2 = s(Pk @ Bk - (Pk @ Bk1 + Pk1 @ Bk) + Pk1 @ Bk1)
    N1 = s(0.5 * (Pk @ Bk1 + Pk1 @ Bk) - Pk1 @ Bk1)
    N0 = s(Pk1 @ Bk1)
    return N2, N1, N0


@dataclass
class GridVerification:
    max_eig: float
    k: int            # segment index; 0 = start boundary, -1 = end boundary
    alpha: float | None
    delta: float | None
    confirmed: bool
    grid_size: int


def verify_certificate_grid(cert, sys_obj, grid_size: int = 101) -> GridVerification:
    """Direct eigenvalue scan of the Lyapunov decay form, no multipliers.

    For each segment, the alpha-quadratic (and, for robust certificates,
    delta-affine) decay matrix is rebuilt from P_k, epsilon_k and the
    system matrices and scanned over a uniform alpha grid (and a geometric
    delta grid over [1/Delta, Delta]; affinity in delta makes the two
    endpoints sufficient, the interior points are a redundant cross-check).
    The certificate is confirmed iff the maximum eigenvalue found,
    including the two boundary matrices, is negative.
    """
    robust = isinstance(cert, RobustCertificate)
    if robust and not isinstance(sys_obj, UncertainPiecewiseLTVSystem):
        raise ValueError("robust certificate needs a system with B matrices")
    A = sys_obj.A
    B = sys_obj.B if robust else None
    eps = cert.epsilon
    grid = sys_obj.grid
    Nseg = sys_obj.n_segments
    if len(cert.P) != Nseg + 1:
        raise ValueError("certificate/system segment count mismatch")

    best = (-np.inf, 0, None, None)

    def consider(val, k, a, d):
        nonlocal best
        if val > best[0]:
            best = (val, k, a, d)

    Bnd0 = cert.P[0] @ A[0] + A[0].T @ cert.P[0] + eps[0] * cert.P[0]
    consider(float(np.linalg.eigvalsh(Bnd0).max()), 0, None, None)
    BndN = cert.P[-1] @ A[-1] + A[-1].T @ cert.P[-1] + eps[-1] * cert.P[-1]
    consider(float(np.linalg.eigvalsh(BndN).max()), -1, None, None)

    alphas = np.linspace(0.0, 1.0, grid_size)
    if robust:
        deltas = np.geomspace(1.0 / cert.Delta, cert.Delta, grid_size) \
            if cert.Delta > 1 else np.array([1.0])
    for k in range(1, Nseg + 1):
        M, L, Nm = decay_coefficients(cert.P[k - 1], cert.P[k], A[k - 1], A[k],
                                      eps[k], grid.gamma(k))
        if robust:
            N2, N1, N0 = uncertainty_coefficients(cert.P[k - 1], cert.P[k],
                                                  B[k - 1], B[k])
        for a in alphas:
            Qa = a * a * M + 2.0 * a * L + Nm
            if robust:
                Na = a * a * N2 + 2.0 * a * N1 + N0
                for d in deltas:
                    ev = float(np.linalg.eigvalsh(Qa + d * Na).max())
                    consider(ev, k, float(a), float(d))
            else:
                consider(float(np.linalg.eigvalsh(Qa).max()), k, float(a), None)

    val, k, a, d = best
    return GridVerification(val, k, a, d, val < 0.0, grid_size)


# ---------------------------------------------------------------------------
# Frozen-time comparison
# ---------------------------------------------------------------------------

def spectral_abscissa(A: np.ndarray) -> float:
    """Maximum real part of the eigenvalues of A."""
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise ValueError("non-finite matrix")
    return float(np.linalg.eigvals(A).real.max())


@dataclass
class FrozenMargin:
    k: int
    t_k: float
    abscissa: float            # of A_k alone
    delta_lower: float
    delta_upper: float
    lower_capped: bool = False
    upper_capped: bool = False
    empty: bool = False        # A_k + B_k not Hurwitz


@dataclass
class FrozenTimeReport:
    entries: list[FrozenMargin] = field(default_factory=list)
    intersection: tuple[float, float] | None = None


def _bisect_boundary(f, stable_pt: float, unstable_pt: float,
                     rel_tol: float) -> float:
    """Root of f between a stable (f<0) and unstable (f>=0) gain."""
    lo, hi = stable_pt, unstable_pt
    while abs(hi - lo) > rel_tol * max(abs(lo), abs(hi), 1e-12):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def frozen_time_margins(usys: UncertainPiecewiseLTVSystem,
                        delta_cap: float = 1e6, rel_tol: float = 1e-4,
                        signed: bool = False) -> FrozenTimeReport:
    """Per-breakpoint interval of gains delta keeping A_k + delta B_k Hurwitz.

    The search is one-sided around delta = 1 (gains are positive by
    default); signed=True extends the lower search through 0 into negative
    gains.  Ends that never destabilize are capped at delta_cap (or its
    reciprocal / negation) and flagged.
    """
    report = FrozenTimeReport()
    lower_floor = -delta_cap if signed else 1.0 / delta_cap
    for k, t_k in enumerate(usys.grid.breakpoints):
        Ak, Bk = usys.A[k], usys.B[k]
        f = lambda d: spectral_abscissa(Ak + d * Bk)
        absc = spectral_abscissa(Ak)
        if f(1.0) >= 0:
            report.entries.append(FrozenMargin(k, t_k, absc, np.nan, np.nan,
                                               empty=True))
            continue
        if f(delta_cap) < 0:
            hi, hi_cap = delta_cap, True
        else:
            hi, hi_cap = _bisect_boundary(f, 1.0, delta_cap, rel_tol), False
        if f(lower_floor) < 0:
            lo, lo_cap = lower_floor, True
        else:
            lo, lo_cap = _bisect_boundary(f, 1.0, lower_floor, rel_tol), False
        report.entries.append(FrozenMargin(k, t_k, absc, lo, hi,
                                           lower_capped=lo_cap,
                                           upper_capped=hi_cap))
    good = [e for e in report.entries if not e.empty]
    if good and len(good) == len(report.entries):
        report.intersection = (max(e.delta_lower for e in good),
                               min(e.delta_upper for e in good))
    return report


# ---------------------------------------------------------------------------
# CSV exports (deterministic: 17 significant digits)
# ---------------------------------------------------------------------------

def write_trajectory_csv(path, traj: Trajectory, lyap: LyapunovTrace | None = None):
    cols = ["t"] + [f"x_{i+1}" for i in range(traj.n)]
    if lyap is not None:
        cols.append("V")
    lines = [",".join(cols)]
    for i, t in enumerate(traj.times):
        row = [FLOAT_FMT % t] + [FLOAT_FMT % v for v in traj.states[i]]
        if lyap is not None:
            row.append(FLOAT_FMT % lyap.values[i])
        lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_frozen_csv(path, report: FrozenTimeReport):
    lines = ["k,t_k,abscissa,delta_lower,delta_upper,lower_capped,upper_capped,empty"]
    for e in report.entries:
        lines.append(",".join([
            str(e.k), FLOAT_FMT % e.t_k, FLOAT_FMT % e.abscissa,
            FLOAT_FMT % e.delta_lower, FLOAT_FMT % e.delta_upper,
            str(int(e.lower_capped)), str(int(e.upper_capped)), str(int(e.empty)),
        ]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
