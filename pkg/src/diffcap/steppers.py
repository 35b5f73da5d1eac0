"""A-stable one-step integration of the 2K auxiliary ODEs and the quadrature sum.

Each transformed node w carries the scalar linear ODE

    phi'(w, t) = -e^w phi(w, t) + c e^{w q} g(t),     phi(w, a) = 0,

with g the caller-supplied upper derivative.  The equations are linear with
constant coefficients, so the implicit backward-Euler and trapezoidal updates
are solved exactly by division; no iteration is involved.  All coefficients
are evaluated through log-space expressions because the W_plus exponents reach
several hundreds.

The derivative itself is the weighted sum over nodes, assembled from
ln a_k + x_k (the weights underflow and e^{x_k} overflows long before their
product stops being moderate).  One pass over the grid, state of 2K numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .diffusive import DerivativeProblem, DiffusiveSystem, TimeGrid, build_system
from .errors import EvaluationError, InvalidParameterError
from .quadrature import QuadratureRule, truncate_rule

BACKWARD_EULER = "backward-euler"
TRAPEZOIDAL = "trapezoidal"
METHODS = (BACKWARD_EULER, TRAPEZOIDAL)


@dataclass(frozen=True)
class SolverState:
    """Grid index plus the 2K phi values (W_minus block, then W_plus block)."""

    n: int
    phi: np.ndarray


def initial_state(system: DiffusiveSystem) -> SolverState:
    phi = np.zeros(2 * system.npoints)
    phi.setflags(write=False)
    return SolverState(n=0, phi=phi)


def _log_one_plus_h_exp(w: np.ndarray, h: float) -> np.ndarray:
    """ln(1 + h e^w) elementwise, without ever forming an overflowing e^w."""
    w = np.asarray(w, dtype=float)
    out = np.empty_like(w)
    neg = w <= 0.0
    out[neg] = np.log1p(h * np.exp(w[neg]))
    wp = w[~neg]
    if wp.size:
        r = np.exp(-wp) / h
        big = r <= 1.0
        vals = np.empty_like(wp)
        vals[big] = wp[big] + math.log(h) + np.log1p(r[big])
        # remaining case: h e^w < 1, representable as exp(w + ln h)
        vals[~big] = np.log1p(np.exp(wp[~big] + math.log(h)))
        out[~neg] = vals
    return out


def backward_euler_log_amplification(w, h: float):
    """ln of the backward-Euler amplification factor 1 / (1 + h e^w).

    Always finite and strictly negative, even where the factor itself
    underflows double precision.
    """
    if h <= 0.0:
        raise InvalidParameterError(f"step size must be positive, got {h}")
    return -_log_one_plus_h_exp(np.asarray(w, dtype=float), h)


def backward_euler_amplification(w, h: float):
    """Backward-Euler amplification factor, in (0, 1) for every h > 0 and real w.

    May underflow to 0.0 for h e^w beyond ~1e308; use the log form there.
    """
    return np.exp(backward_euler_log_amplification(w, h))


def trapezoidal_amplification(w, h: float):
    """Trapezoidal amplification (1 - h e^w / 2) / (1 + h e^w / 2) = -tanh(u/2).

    Bounded in (-1, 1] with the A-stability limit -1 as h e^w grows.
    """
    if h <= 0.0:
        raise InvalidParameterError(f"step size must be positive, got {h}")
    u = np.asarray(w, dtype=float) + math.log(0.5 * h)
    return -np.tanh(0.5 * u)


def _forcing_value(problem: DerivativeProblem, t: float) -> float:
    g = float(problem.d_upper(t))
    if not math.isfinite(g):
        raise EvaluationError(f"d_upper returned a non-finite value at t = {t}")
    return g


def backward_euler_step(
    state: SolverState,
    system: DiffusiveSystem,
    problem: DerivativeProblem,
    t_next: float,
    h: float,
) -> SolverState:
    """One implicit Euler step: phi <- (phi + h c e^{w q} g(t_next)) / (1 + h e^w)."""
    if not (math.isfinite(h) and h > 0.0):
        raise InvalidParameterError(f"step size must be positive, got {h}")
    g = _forcing_value(problem, t_next)
    w = system.exponents
    s = _log_one_plus_h_exp(w, h)
    decay = np.exp(-s)
    forcing_gain = np.exp(math.log(h) + system.fractional_part * w - s)
    phi = state.phi * decay + (system.c * g) * forcing_gain
    return SolverState(n=state.n + 1, phi=phi)


def trapezoidal_step(
    state: SolverState,
    system: DiffusiveSystem,
    problem: DerivativeProblem,
    t_next: float,
    h: float,
) -> SolverState:
    """One trapezoidal step, forcing averaged over both interval endpoints."""
    if not (math.isfinite(h) and h > 0.0):
        raise InvalidParameterError(f"step size must be positive, got {h}")
    g0 = _forcing_value(problem, t_next - h)
    g1 = _forcing_value(problem, t_next)
    w = system.exponents
    u = w + math.log(0.5 * h)
    amp = -np.tanh(0.5 * u)
    s = _log_one_plus_h_exp(w, 0.5 * h)
    forcing_gain = np.exp(math.log(0.5 * h) + system.fractional_part * w - s)
    phi = state.phi * amp + (system.c * (g0 + g1)) * forcing_gain
    return SolverState(n=state.n + 1, phi=phi)


_STEP_FUNCTIONS = {BACKWARD_EULER: backward_euler_step, TRAPEZOIDAL: trapezoidal_step}


def _check_grid(problem: DerivativeProblem, grid: TimeGrid) -> None:
    if abs(grid.points[0] - problem.a) > 1e-12 or abs(grid.points[-1] - problem.end) > 1e-12:
        raise InvalidParameterError(
            f"grid endpoints [{grid.points[0]}, {grid.points[-1]}] do not match the "
            f"problem interval [{problem.a}, {problem.end}]"
        )


def iter_solution(
    problem: DerivativeProblem,
    rule: QuadratureRule,
    grid: TimeGrid,
    method: str = BACKWARD_EULER,
    k_star: int | None = None,
) -> Iterator[SolverState]:
    """Yield the solver state at every grid index, starting from the zero state.

    Only one state is alive at a time, so a full sweep costs O(N K) time and
    O(K) memory regardless of the grid length.  ``k_star`` truncates the rule
    (and with it the ODE family) to its first k_star nodes.
    """
    if method not in _STEP_FUNCTIONS:
        raise InvalidParameterError(f"unknown method {method!r}, expected one of {METHODS}")
    _check_grid(problem, grid)
    if k_star is not None:
        rule = truncate_rule(rule, k_star)
    system = build_system(problem, rule)
    step = _STEP_FUNCTIONS[method]
    state = initial_state(system)
    yield state
    points = grid.points
    for n in range(1, len(points)):
        t_next = float(points[n])
        state = step(state, system, problem, t_next, t_next - float(points[n - 1]))
        yield state


def quadrature_coefficients(rule: QuadratureRule) -> np.ndarray:
    """a_k e^{x_k} for every node, via exp(ln a_k + x_k)."""
    return np.exp(rule.log_weights + rule.nodes)


def state_combination(system: DiffusiveSystem, state: SolverState) -> np.ndarray:
    """Per-node e^{-x_k} fold_phi values: phi(-x/q)/q + phi(x/(1-q))/(1-q)."""
    k = system.npoints
    return state.phi[:k] / system.fractional_part + state.phi[k:] / (1.0 - system.fractional_part)


def evaluate_derivative(
    problem: DerivativeProblem,
    rule: QuadratureRule,
    grid: TimeGrid,
    method: str = BACKWARD_EULER,
    k_star: int | None = None,
) -> np.ndarray:
    """Approximate the fractional derivative at every grid point.

    Returns N+1 values; the one at t_0 = a is exactly 0.  Each value is the
    Gauss-Laguerre sum over nodes of a_k e^{x_k} times the per-node state
    combination, with the a_k e^{x_k} products formed in log space.
    """
    if k_star is not None:
        rule = truncate_rule(rule, k_star)
    coef = quadrature_coefficients(rule)
    system = build_system(problem, rule)
    out = np.empty(len(grid.points))
    for state in iter_solution(problem, rule, grid, method=method):
        out[state.n] = coef @ state_combination(system, state)
    out[0] = 0.0
    return out
