"""Bundled example systems with expected verdicts.

Three families: a scalar suite with hand-checkable stability boundaries, a
reduction suite (B identically zero), and a sampled rotating-coordinate
counterexample whose frozen-time eigenvalues are all stable while the
time-varying system diverges.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import (PiecewiseLTVSystem, TimeGrid, UncertainPiecewiseLTVSystem,
                    save_system)

__all__ = ["SuiteEntry", "bundled_suite", "rotating_counterexample",
           "write_suite"]


@dataclass(frozen=True)
class SuiteEntry:
    name: str
    system: PiecewiseLTVSystem | UncertainPiecewiseLTVSystem
    epsilon: tuple[float, ...]
    nominal_feasible: bool  # expected nominal verdict


def _pw(breakpoints, A, B=None):
    base = PiecewiseLTVSystem(TimeGrid(tuple(breakpoints)), tuple(A))
    if B is None:
        return base
    return UncertainPiecewiseLTVSystem(base, tuple(B))


def rotating_counterexample(segments_per_period: int = 32,
                            periods: int = 4) -> PiecewiseLTVSystem:
    """Piecewise-linear sampling of a rotating-coordinate system whose
    frozen eigenvalues are stable for every t while trajectories grow like
    e^{t/2}.  One period is 2*pi, the rotation period of the growing
    solution e^{t/2} (cos t, -sin t)."""
    def Amat(t):
        c, s = np.cos(t), np.sin(t)
        return np.array([
            [-1.0 + 1.5 * c * c, 1.0 - 1.5 * s * c],
            [-1.0 - 1.5 * s * c, -1.0 + 1.5 * s * s],
        ])

    Nseg = segments_per_period * periods
    ts = np.linspace(0.0, periods * 2.0 * np.pi, Nseg + 1)
    return _pw(ts, [Amat(t) for t in ts])


def bundled_suite() -> list[SuiteEntry]:
    """Certification suite: n <= 4, N <= 16, verdicts known by construction."""
    I2 = np.eye(2)
    entries = [
        SuiteEntry("scalar_lti_stable",
                   _pw([0.0], [[[-1.0]]]), (1.0,), True),
        SuiteEntry("scalar_lti_unstable",
                   _pw([0.0], [[[1.0]]]), (0.1,), False),
        SuiteEntry("scalar_pw_stable",
                   _pw([0.0, 1.0], [[[-1.0]], [[-2.0]]]), (0.1, 0.1), True),
        SuiteEntry("scalar_pw_unstable",
                   _pw([0.0, 1.0], [[[-1.0]], [[0.5]]]), (0.01, 0.01), False),
        SuiteEntry("scalar_const_uncertain",
                   _pw([0.0, 1.0], [[[-1.0]], [[-1.0]]],
                       [[[0.5]], [[0.5]]]), (0.01, 0.01), True),
        SuiteEntry("planar_lti_stable",
                   _pw([0.0], [(-I2).tolist()]), (1.0,), True),
        SuiteEntry("planar_pw_stable",
                   _pw([0.0, 1.0, 3.0],
                       [[[-1.0, 0.5], [0.0, -2.0]],
                        [[-2.0, 0.2], [-0.2, -1.0]],
                        [[-1.5, 0.0], [0.3, -1.2]]]),
                   (0.05, 0.05, 0.05), True),
        SuiteEntry("planar_pw_uncertain",
                   _pw([0.0, 2.0],
                       [[[-2.0, 1.0], [0.0, -1.0]],
                        [[-1.0, 0.5], [-0.5, -2.0]]],
                       [[[0.3, 0.0], [0.0, 0.3]],
                        [[0.2, 0.0], [0.0, 0.2]]]),
                   (0.01, 0.01), True),
        SuiteEntry("planar_reduction_b0",
                   _pw([0.0, 1.0],
                       [[[-1.5, 0.4], [-0.4, -1.0]],
                        [[-1.0, 0.0], [0.2, -2.0]]],
                       [np.zeros((2, 2)).tolist(), np.zeros((2, 2)).tolist()]),
                   (0.05, 0.05), True),
        SuiteEntry("quad_pw_stable",
                   _quad_system(), (0.02,) * 5, True),
        SuiteEntry("planar_spiral_unstable",
                   _pw([0.0, 1.0],
                       [[[0.1, 1.0], [-1.0, 0.1]],
                        [[0.2, 2.0], [-2.0, 0.2]]]),
                   (0.01, 0.01), False),
    ]
    return entries


def _quad_system():
    # two weakly coupled stable planar blocks, drifting over 4 segments
    rng = np.random.default_rng(7)
    ts = np.linspace(0.0, 4.0, 5)
    mats = []
    for i, t in enumerate(ts):
        D = np.diag([-1.0 - 0.1 * i, -1.5, -2.0 + 0.05 * i, -1.2])
        J = np.zeros((4, 4))
        J[0, 1] = 0.5
        J[1, 0] = -0.5
        J[2, 3] = 0.3 + 0.05 * i
        J[3, 2] = -(0.3 + 0.05 * i)
        C = 0.05 * rng.standard_normal((4, 4))
        mats.append(D + J + C)
    return _pw(ts, mats)


def write_suite(out_dir, include_counterexample: bool = True) -> Path:
    """Write the bundled systems and their expected-verdict manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"format": 1, "systems": []}
    for e in bundled_suite():
        path = out / f"{e.name}.json"
        save_system(path, e.system, e.epsilon)
        manifest["systems"].append({
            "file": path.name,
            "name": e.name,
            "uncertain": isinstance(e.system, UncertainPiecewiseLTVSystem),
            "nominal_feasible": e.nominal_feasible,
        })
    if include_counterexample:
        ce = rotating_counterexample()
        path = out / "rotating_counterexample.json"
        save_system(path, ce, (0.01,) * len(ce.grid.breakpoints))
        manifest["systems"].append({
            "file": path.name,
            "name": "rotating_counterexample",
            "uncertain": False,
            "nominal_feasible": False,
        })
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return out
