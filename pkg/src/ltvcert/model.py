"""Piecewise linear-in-time system models.

A piecewise LTV system is defined by breakpoints t_0 < ... < t_N and
matrices A_0..A_N.  On each segment [t_{k-1}, t_k] the coefficient matrix
is the convex interpolation

    A(t) = alpha_k(t) * A_k + (1 - alpha_k(t)) * A_{k-1},
    alpha_k(t) = (t - t_{k-1}) / (t_k - t_{k-1}),

extended by constants outside [t_0, t_N].  The uncertain variant carries a
second matrix family B_0..B_N entering as A(t) + delta * B(t) for a scalar
gain delta.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "TimeGrid",
    "PiecewiseLTVSystem",
    "UncertainPiecewiseLTVSystem",
    "SystemFileError",
    "load_system",
    "save_system",
]


class SystemFileError(ValueError):
    """Raised when a system file is malformed or fails validation."""


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing breakpoints t_0 < t_1 < ... < t_N."""

    breakpoints: tuple[float, ...]

    def __post_init__(self):
        bp = tuple(float(t) for t in self.breakpoints)
        object.__setattr__(self, "breakpoints", bp)
        if len(bp) == 0:
            raise ValueError("grid needs at least one breakpoint")
        if not all(np.isfinite(bp)):
            raise ValueError("non-finite breakpoint")
        if any(b - a <= 0 for a, b in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")

    @property
    def n_segments(self) -> int:
        return len(self.breakpoints) - 1

    def gamma(self, k: int) -> float:
        """Inverse width 1/(t_k - t_{k-1}) of segment k (1-based)."""
        self._check_segment(k)
        return 1.0 / (self.breakpoints[k] - self.breakpoints[k - 1])

    def alpha(self, k: int, t: float) -> float:
        """Interpolation fraction of t within segment k; 0 at t_{k-1}, 1 at t_k."""
        self._check_segment(k)
        lo, hi = self.breakpoints[k - 1], self.breakpoints[k]
        if not (lo <= t <= hi):
            raise ValueError(f"t={t} outside segment {k} = [{lo}, {hi}]")
        if t == hi:  # exact at the knot, no floating drift
            return 1.0
        return (t - lo) * self.gamma(k)

    def segment_of(self, t: float) -> int:
        """Segment index for t, right-closed: t = t_k belongs to segment k.

        Clamps to the first/last segment outside [t_0, t_N].
        """
        bp = self.breakpoints
        if self.n_segments == 0:
            raise ValueError("degenerate grid has no segments")
        if t <= bp[0]:
            return 1
        if t >= bp[-1]:
            return self.n_segments
        k = int(np.searchsorted(bp, t, side="left"))
        return max(1, min(k, self.n_segments))

    def _check_segment(self, k: int):
        if not (1 <= k <= self.n_segments):
            raise ValueError(f"segment index {k} not in 1..{self.n_segments}")


def _as_matrix_list(mats, what: str) -> tuple[np.ndarray, ...]:
    out = []
    for i, m in enumerate(mats):
        a = np.array(m, dtype=float)
        if a.ndim == 1:  # flat row-major
            n = int(round(np.sqrt(a.size)))
            if n * n != a.size:
                raise ValueError(f"{what}[{i}] has {a.size} entries, not a square count")
            a = a.reshape(n, n)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"{what}[{i}] is not square")
        a.setflags(write=False)
        out.append(a)
    return tuple(out)


@dataclass(frozen=True)
class PiecewiseLTVSystem:
    """x' = A(t) x with A(t) piecewise linear in t over `grid`."""

    grid: TimeGrid
    A: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "A", _as_matrix_list(self.A, "A"))
        bad = self.validate()
        if bad:
            raise ValueError("; ".join(bad))

    @property
    def n(self) -> int:
        return self.A[0].shape[0]

    @property
    def n_segments(self) -> int:
        return self.grid.n_segments

    def validate(self) -> list[str]:
        """Diagnostic list; empty means well formed."""
        return _validate_family(self.grid, self.A, "A")

    def eval_A(self, t: float) -> np.ndarray:
        """Interpolated A(t); constant A_0 / A_N outside the grid."""
        return _interp(self.grid, self.A, t)


@dataclass(frozen=True)
class UncertainPiecewiseLTVSystem:
    """x' = [A(t) + delta B(t)] x with scalar uncertain gain delta."""

    base: PiecewiseLTVSystem
    B: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "B", _as_matrix_list(self.B, "B"))
        bad = self.validate()
        if bad:
            raise ValueError("; ".join(bad))

    @property
    def grid(self) -> TimeGrid:
        return self.base.grid

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def n_segments(self) -> int:
        return self.base.n_segments

    @property
    def A(self) -> tuple[np.ndarray, ...]:
        return self.base.A

    def validate(self) -> list[str]:
        bad = self.base.validate()
        bad += _validate_family(self.base.grid, self.B, "B")
        if self.B and self.base.A and self.B[0].shape != self.base.A[0].shape:
            bad.append(
                f"dimension mismatch: B is {self.B[0].shape[0]}x{self.B[0].shape[0]}, "
                f"A is {self.base.n}x{self.base.n}"
            )
        return bad

    def eval_B(self, t: float) -> np.ndarray:
        return _interp(self.base.grid, self.B, t)

    def eval_perturbed(self, t: float, delta: float) -> np.ndarray:
        """A(t) + delta * B(t)."""
        if not np.isfinite(delta):
            raise ValueError("delta must be finite")
        if delta == 0.0:
            return self.base.eval_A(t)
        return self.base.eval_A(t) + delta * self.eval_B(t)


def _validate_family(grid: TimeGrid, mats, what: str) -> list[str]:
    bad = []
    bp = grid.breakpoints
    if any(b - a <= 0 for a, b in zip(bp, bp[1:])):
        bad.append("non-increasing grid")
    if len(mats) != len(bp):
        bad.append(f"{what} count {len(mats)} != breakpoint count {len(bp)}")
    if mats:
        n = mats[0].shape[0]
        for i, m in enumerate(mats):
            if m.shape != (n, n):
                bad.append(f"dimension mismatch: {what}[{i}] is {m.shape[0]}x{m.shape[1]}, expected {n}x{n}")
            if not np.all(np.isfinite(m)):
                bad.append(f"non-finite entries in {what}[{i}]")
    return bad


def _interp(grid: TimeGrid, mats, t: float) -> np.ndarray:
    bp = grid.breakpoints
    if t <= bp[0]:
        return mats[0]
    if t >= bp[-1]:
        return mats[-1]
    k = grid.segment_of(t)
    if t == bp[k]:  # return the stored matrix bit-for-bit at knots
        return mats[k]
    a = grid.alpha(k, t)
    return a * mats[k] + (1.0 - a) * mats[k - 1]


# ---------------------------------------------------------------------------
# System file (JSON) format, version 1:
#   { "format": 1, "breakpoints": [...], "A": [mat, ...],
#     "B": [mat, ...] (optional), "epsilon": [...] (optional) }
# Each matrix is either a nested list of rows or a flat row-major list.
# ---------------------------------------------------------------------------

FORMAT_VERSION = 1


def load_system(path):
    """Read a system file.

    Returns (system, epsilon) where system is PiecewiseLTVSystem or
    UncertainPiecewiseLTVSystem and epsilon is a list or None.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise SystemFileError(f"cannot read system file {path}: {e}") from e
    if not isinstance(doc, dict) or "breakpoints" not in doc or "A" not in doc:
        raise SystemFileError(f"{path}: missing required keys 'breakpoints'/'A'")
    try:
        grid = TimeGrid(tuple(doc["breakpoints"]))
        base = PiecewiseLTVSystem(grid, tuple(doc["A"]))
        sys_obj = base
        if doc.get("B") is not None:
            sys_obj = UncertainPiecewiseLTVSystem(base, tuple(doc["B"]))
    except (ValueError, TypeError) as e:
        raise SystemFileError(f"{path}: {e}") from e
    eps = doc.get("epsilon")
    if eps is not None:
        eps = [float(e) for e in eps]
        if len(eps) != len(grid.breakpoints):
            raise SystemFileError(
                f"{path}: epsilon count {len(eps)} != breakpoint count {len(grid.breakpoints)}"
            )
        if any(e <= 0 for e in eps):
            raise SystemFileError(f"{path}: epsilon entries must be positive")
    return sys_obj, eps


def save_system(path, sys_obj, epsilon=None):
    doc = {
        "format": FORMAT_VERSION,
        "breakpoints": list(sys_obj.grid.breakpoints),
        "A": [m.tolist() for m in sys_obj.A],
    }
    if isinstance(sys_obj, UncertainPiecewiseLTVSystem):
        doc["B"] = [m.tolist() for m in sys_obj.B]
    if epsilon is not None:
        doc["epsilon"] = list(epsilon)
    Path(path).write_text(json.dumps(doc, indent=1))
