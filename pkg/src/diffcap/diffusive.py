"""Problem description and the diffusive system behind the derivative scheme.

The fractional derivative of order alpha is rewritten as an integral over an
auxiliary variable w of solutions phi(w, t) of first-order linear ODEs.  After
the substitution that folds both half-lines onto [0, inf), a K-point
Gauss-Laguerre rule needs phi only at the transformed node sets

    W_minus = { -x_k / q : k = 1..K },   W_plus = { x_k / (1 - q) : k = 1..K },

where q = alpha - ceil(alpha) + 1 in (0, 1).  Each node w contributes a decay
rate e^w; for w in W_plus these Lipschitz constants grow like
exp(x_max / (1 - q)) and are kept as exponents throughout (never materialized
once they would overflow).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import InvalidOrderError, InvalidParameterError
from .quadrature import QuadratureRule

INTEGER_ORDER_TOL = 1e-12

#: exponents above this make e^w exceed 1/ulp in double precision
_STIFF_EXPONENT = -math.log(np.finfo(float).eps)


def _validate_order(alpha: float) -> float:
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha <= 0.0:
        raise InvalidOrderError(f"order must be a positive real, got {alpha}")
    if abs(alpha - round(alpha)) <= INTEGER_ORDER_TOL:
        raise InvalidOrderError(
            f"integer orders are rejected (sin(alpha*pi) degenerates), got {alpha}"
        )
    return alpha


def fractional_part(alpha: float) -> float:
    """Fractional offset alpha - ceil(alpha) + 1, always in (0, 1).

    Equals alpha itself for 0 < alpha < 1.  Integer alpha is rejected.
    """
    alpha = _validate_order(alpha)
    return alpha - math.ceil(alpha) + 1.0


def signed_prefactor(alpha: float) -> float:
    """The forcing prefactor (-1)^floor(alpha) * sin(alpha*pi) / pi."""
    alpha = _validate_order(alpha)
    return (-1.0) ** math.floor(alpha) * math.sin(alpha * math.pi) / math.pi


@dataclass(frozen=True)
class DerivativeProblem:
    """A fractional differentiation task on [a, a + T].

    ``d_upper`` supplies the ceil(alpha)-th derivative of the target function
    (the scheme is driven by it, never by the function itself).
    ``d_upper_plus`` optionally supplies the next derivative, needed only for
    the a-priori ODE-error constant.
    """

    alpha: float
    a: float
    T: float
    d_upper: Callable[[float], float]
    d_upper_plus: Callable[[float], float] | None = None

    def __post_init__(self) -> None:
        _validate_order(self.alpha)
        if not math.isfinite(self.a):
            raise InvalidParameterError(f"left endpoint must be finite, got {self.a}")
        if not (math.isfinite(self.T) and self.T > 0.0):
            raise InvalidParameterError(f"interval length must be positive, got {self.T}")

    @property
    def ceil_order(self) -> int:
        return math.ceil(self.alpha)

    @property
    def fractional_part(self) -> float:
        return fractional_part(self.alpha)

    @property
    def prefactor(self) -> float:
        return signed_prefactor(self.alpha)

    @property
    def end(self) -> float:
        return self.a + self.T


@dataclass(frozen=True)
class DiffusiveSystem:
    """Transformed node sets and coefficients for one (problem, rule) pair.

    ``exponents`` concatenates W_minus and W_plus in that order; this is the
    layout solver states use.
    """

    fractional_part: float
    c: float
    w_minus: np.ndarray
    w_plus: np.ndarray

    @property
    def npoints(self) -> int:
        return len(self.w_plus)

    @cached_property
    def exponents(self) -> np.ndarray:
        w = np.concatenate([self.w_minus, self.w_plus])
        w.setflags(write=False)
        return w


def build_system(problem: DerivativeProblem, rule: QuadratureRule) -> DiffusiveSystem:
    """Assemble the diffusive system for ``problem`` at the nodes of ``rule``."""
    q = problem.fractional_part
    w_minus = -rule.nodes / q
    w_plus = rule.nodes / (1.0 - q)
    w_minus.setflags(write=False)
    w_plus.setflags(write=False)
    return DiffusiveSystem(fractional_part=q, c=problem.prefactor, w_minus=w_minus, w_plus=w_plus)


def fold_phi(
    system: DiffusiveSystem, phi_at_minus: float, phi_at_plus: float, w: float
) -> float:
    """Combine phi values at the two transformed arguments of a node w >= 0.

        e^w * ( phi(-w/q) / q  +  phi(w/(1-q)) / (1-q) )

    The e^w factor is materialized here, so this is meant for moderate w; the
    full quadrature folds e^w into the weights analytically (see steppers).
    """
    if w < 0.0:
        raise InvalidParameterError(f"node argument must be nonnegative, got {w}")
    combo = phi_at_minus / system.fractional_part + phi_at_plus / (1.0 - system.fractional_part)
    if combo == 0.0:
        return 0.0
    return math.copysign(math.exp(w + math.log(abs(combo))), combo)


@dataclass(frozen=True)
class StiffnessRow:
    k: int
    w: float
    log10_lipschitz: float
    exceeds_ulp_reciprocal: bool


@dataclass(frozen=True)
class StiffnessReport:
    """Per-node Lipschitz constants e^w of the auxiliary ODEs, in log form.

    Rows cover the W_minus block (all constants in (0, 1)) followed by the
    W_plus block, whose largest constant exp(x_max / (1 - q)) is reported as
    ``log_lipschitz_max`` / ``log10_lipschitz_max`` and can vastly exceed
    double range.
    """

    rows: tuple[StiffnessRow, ...]
    log_lipschitz_max: float
    log10_lipschitz_max: float
    any_stiff: bool = False


def stiffness_report(system: DiffusiveSystem) -> StiffnessReport:
    """Report every node's decay exponent and flag the numerically stiff ones."""
    log10e = 1.0 / math.log(10.0)
    rows = []
    for block in (system.w_minus, system.w_plus):
        for k, w in enumerate(block, start=1):
            w = float(w)
            rows.append(
                StiffnessRow(
                    k=k,
                    w=w,
                    log10_lipschitz=w * log10e,
                    exceeds_ulp_reciprocal=w > _STIFF_EXPONENT,
                )
            )
    ln_max = float(system.w_plus[-1])
    return StiffnessReport(
        rows=tuple(rows),
        log_lipschitz_max=ln_max,
        log10_lipschitz_max=ln_max * log10e,
        any_stiff=any(r.exceeds_ulp_reciprocal for r in rows),
    )


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing evaluation times t_0 < ... < t_N.

    ``uniform`` grids carry their step ``h``; non-uniform grids leave it None.
    The scheme itself runs on any grid (the stepping is one-step), but the
    a-priori ODE-error bound is only stated for uniform ones.
    """

    points: np.ndarray
    uniform: bool
    h: float | None = None

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or len(pts) < 2:
            raise InvalidParameterError("a grid needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise InvalidParameterError("grid points must be finite")
        steps = np.diff(pts)
        if np.any(steps <= 0.0):
            raise InvalidParameterError("grid points must be strictly increasing")
        if self.uniform:
            if self.h is None:
                raise InvalidParameterError("uniform grids must carry their step h")
            span = pts[-1] - pts[0]
            if np.max(np.abs(steps - self.h)) > 1e-12 * span:
                raise InvalidParameterError("grid marked uniform has non-uniform steps")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_steps(self) -> int:
        return len(self.points) - 1


def uniform_grid(a: float, T: float, n_steps: int) -> TimeGrid:
    """Uniform grid t_n = a + n h, h = T / n_steps."""
    if n_steps < 1:
        raise InvalidParameterError(f"need at least one step, got {n_steps}")
    points = a + (T / n_steps) * np.arange(n_steps + 1, dtype=float)
    points[-1] = a + T
    return TimeGrid(points=points, uniform=True, h=T / n_steps)


def graded_grid(a: float, T: float, n_steps: int, exponent: float = 2.0) -> TimeGrid:
    """Graded grid t_n = a + T (n / N)^exponent, clustered toward a for exponent > 1."""
    if n_steps < 1:
        raise InvalidParameterError(f"need at least one step, got {n_steps}")
    if not (math.isfinite(exponent) and exponent > 0.0):
        raise InvalidParameterError(f"grading exponent must be positive, got {exponent}")
    frac = np.arange(n_steps + 1, dtype=float) / n_steps
    points = a + T * frac**exponent
    points[-1] = a + T
    return TimeGrid(points=points, uniform=(exponent == 1.0), h=T / n_steps if exponent == 1.0 else None)
