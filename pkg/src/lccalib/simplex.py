"""Derivative-free simplex (Nelder-Mead) minimizer.

Standard coefficients: reflection 1, expansion 2, contraction 0.5, shrink
0.5. The initial simplex is the start point plus one vertex per axis offset
by that axis's step. Non-finite objective values during the search are
treated as +inf (the vertex is rejected); a non-finite value at the start
point is an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

_REFLECTION = 1.0
_EXPANSION = 2.0
_CONTRACTION = 0.5
_SHRINK = 0.5


def _default_steps() -> np.ndarray:
    # translation steps in meters, rotation steps in radians
    return np.full(6, 0.01)


@dataclass(frozen=True)
class NelderMeadParams:
    steps: np.ndarray = field(default_factory=_default_steps)
    fvalue_tol: float = 1e-8
    diameter_tol: float = 1e-7
    max_evals: int = 500

    def __post_init__(self):
        steps = np.asarray(self.steps, dtype=np.float64).reshape(-1)
        if np.any(steps <= 0):
            raise ValueError("all simplex steps must be positive")
        object.__setattr__(self, "steps", steps)


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    x0: np.ndarray,
    params: NelderMeadParams | None = None,
) -> np.ndarray:
    """Minimize ``objective`` from ``x0``; returns the best vertex found."""
    if params is None:
        params = NelderMeadParams()
    x0 = np.asarray(x0, dtype=np.float64).reshape(-1)
    n = x0.size
    if params.steps.size != n:
        raise ValueError(f"expected {n} simplex steps, got {params.steps.size}")

    evals = 0

    def f(x: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        value = float(objective(x))
        return value if np.isfinite(value) else np.inf

    f0 = f(x0)
    if not np.isfinite(f0):
        raise ValueError("objective is not finite at the start point")

    vertices = [x0.copy()]
    values = [f0]
    for i in range(n):
        v = x0.copy()
        v[i] += params.steps[i]
        vertices.append(v)
        values.append(f(v))
    simplex = np.asarray(vertices)
    fvals = np.asarray(values)

    first_round = True
    while evals < params.max_evals:
        order = np.argsort(fvals, kind="stable")
        simplex = simplex[order]
        fvals = fvals[order]

        # An axis-step simplex can start with identical values on a symmetric
        # objective; always take at least one transformation step. Both
        # criteria must hold: the value spread alone goes flat while the
        # simplex is still coarse (quadratics flatten as the square of the
        # distance), which would stop far from the minimizer.
        finite = fvals[np.isfinite(fvals)]
        spread = float(finite.max() - finite.min()) if len(finite) else np.inf
        diameter = float(np.max(np.linalg.norm(simplex[1:] - simplex[0], axis=1)))
        if not first_round and spread < params.fvalue_tol and diameter < params.diameter_tol:
            break
        first_round = False

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        reflected = centroid + _REFLECTION * (centroid - worst)
        f_reflected = f(reflected)

        if f_reflected < fvals[0]:
            expanded = centroid + _EXPANSION * (centroid - worst)
            f_expanded = f(expanded)
            if f_expanded < f_reflected:
                simplex[-1], fvals[-1] = expanded, f_expanded
            else:
                simplex[-1], fvals[-1] = reflected, f_reflected
        elif f_reflected < fvals[-2]:
            simplex[-1], fvals[-1] = reflected, f_reflected
        else:
            if f_reflected < fvals[-1]:
                contracted = centroid + _CONTRACTION * (reflected - centroid)
            else:
                contracted = centroid - _CONTRACTION * (centroid - worst)
            f_contracted = f(contracted)
            if f_contracted < min(f_reflected, fvals[-1]):
                simplex[-1], fvals[-1] = contracted, f_contracted
            else:
                # shrink toward the best vertex
                for i in range(1, n + 1):
                    simplex[i] = simplex[0] + _SHRINK * (simplex[i] - simplex[0])
                    fvals[i] = f(simplex[i])
                    if evals >= params.max_evals:
                        break

    best = int(np.argmin(fvals))
    return simplex[best].copy()
