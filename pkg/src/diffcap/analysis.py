"""Error decomposition, a-priori ODE bound, and empirical rate studies.

The total error of the scheme at a grid point splits exactly into a
quadrature part (how well the K-point rule integrates the folded integrand)
and an ODE part (how far the stepped phi values are from the true ones).
Both parts are measured here against the oracle module, the quadrature part
additionally against the high-accuracy diffusive integral, and the ODE part
against the a-priori constant

    C(K) = |sin(alpha pi)| / (2 pi) * e^{x_max q / (1-q)}
           * ( sup|g'| + 2 e^{x_max / (1-q)} sup|g| ),

which bounds |ode error| <= C(K) T h on uniform grids under backward Euler.
C(K) leaves double range already for moderate K, so it is carried in log10.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .diffusive import DerivativeProblem, TimeGrid, build_system, uniform_grid
from .errors import InsufficientDataError, InvalidParameterError
from .oracle import (
    _phi_integral,
    brute_force_caputo,
    reference_quadrature,
    require_d_upper_plus,
)
from .quadrature import QuadratureRule, gauss_laguerre_rule
from .steppers import (
    BACKWARD_EULER,
    iter_solution,
    quadrature_coefficients,
    state_combination,
)

_NORM_SAMPLES = 10001
_LOG10 = math.log(10.0)


@dataclass(frozen=True)
class ErrorDecomposition:
    """Total / quadrature / ODE error components at one grid index."""

    n: int
    r_total: float
    r_q: float
    r_ode: float
    oracle_tol: float


@dataclass(frozen=True)
class LogScaledValue:
    """Nonnegative scalar carried as log10, usable beyond double range."""

    log10: float

    @property
    def value(self) -> float:
        try:
            return 10.0**self.log10
        except OverflowError:
            return math.inf

    @property
    def mantissa(self) -> float:
        if math.isinf(self.log10):
            return 0.0 if self.log10 < 0 else math.inf
        return 10.0 ** (self.log10 - math.floor(self.log10))

    @property
    def exponent10(self) -> int:
        if math.isinf(self.log10):
            return 0
        return int(math.floor(self.log10))


def _exact_combination(
    problem: DerivativeProblem, rule: QuadratureRule, t: float, budget: float
) -> np.ndarray:
    """Per-node reference values of e^{-x_k} fold_phi(x_k, t).

    Node tolerances are split so the weighted sum over all nodes stays
    within ``budget``.
    """
    q = problem.fractional_part
    coef_log = rule.log_weights + rule.nodes
    split = math.log(budget) + math.log(min(q, 1.0 - q)) - math.log(4.0 * rule.npoints)
    out = np.empty(rule.npoints)
    for k, x in enumerate(rule.nodes):
        tol_k = max(math.exp(min(split - coef_log[k], math.log(1e6))), 1e-300)
        phi_minus = _phi_integral(problem, -x / q, t, tol_k)
        phi_plus = _phi_integral(problem, x / (1.0 - q), t, tol_k)
        out[k] = phi_minus / q + phi_plus / (1.0 - q)
    return out


def ode_error_profile(
    problem: DerivativeProblem,
    rule: QuadratureRule,
    grid: TimeGrid,
    method: str = BACKWARD_EULER,
    truth_tol: float = 1e-10,
) -> np.ndarray:
    """The ODE error component at every grid index (index 0 is exactly 0)."""
    coef = quadrature_coefficients(rule)
    system = build_system(problem, rule)
    out = np.empty(len(grid.points))
    for state in iter_solution(problem, rule, grid, method=method):
        if state.n == 0:
            out[0] = 0.0
            continue
        exact = _exact_combination(problem, rule, float(grid.points[state.n]), truth_tol)
        out[state.n] = coef @ (exact - state_combination(system, state))
    return out


def quadrature_error(
    problem: DerivativeProblem, rule: QuadratureRule, t: float, truth_tol: float = 1e-10
) -> float:
    """The quadrature error component at time t (independent of any grid)."""
    if t == problem.a:
        return 0.0
    truth = reference_quadrature(problem, t, truth_tol)
    coef = quadrature_coefficients(rule)
    return truth - float(coef @ _exact_combination(problem, rule, t, truth_tol))


def decompose_error(
    problem: DerivativeProblem,
    rule: QuadratureRule,
    grid: TimeGrid,
    method: str = BACKWARD_EULER,
    truth_tol: float = 1e-9,
) -> list[ErrorDecomposition]:
    """Per-grid-point (r_total, r_q, r_ode) against independent oracles.

    r_total measures the scheme against the defining Caputo integral,
    r_q against the diffusive integral, so the identity
    r_total = r_q + r_ode holds only up to the oracles' agreement
    (within 10 * truth_tol).
    """
    if not (1e-14 <= truth_tol <= 1e-8):
        raise InvalidParameterError(f"truth_tol must lie in [1e-14, 1e-8], got {truth_tol}")
    coef = quadrature_coefficients(rule)
    system = build_system(problem, rule)
    rows: list[ErrorDecomposition] = []
    for state in iter_solution(problem, rule, grid, method=method):
        n = state.n
        if n == 0:
            rows.append(ErrorDecomposition(0, 0.0, 0.0, 0.0, truth_tol))
            continue
        t = float(grid.points[n])
        scheme = float(coef @ state_combination(system, state))
        exact = _exact_combination(problem, rule, t, truth_tol)
        exact_sum = float(coef @ exact)
        rows.append(
            ErrorDecomposition(
                n=n,
                r_total=brute_force_caputo(problem, t, truth_tol) - scheme,
                r_q=reference_quadrature(problem, t, truth_tol) - exact_sum,
                r_ode=exact_sum - scheme,
                oracle_tol=truth_tol,
            )
        )
    return rows


def _sampled_sup(fn, a: float, T: float) -> float:
    ts = np.linspace(a, a + T, _NORM_SAMPLES)
    return float(max(abs(fn(float(t))) for t in ts))


def ode_error_constant(
    problem: DerivativeProblem,
    rule: QuadratureRule,
    d_upper_sup: float | None = None,
    d_upper_plus_sup: float | None = None,
) -> LogScaledValue:
    """The a-priori backward-Euler error constant C(K), in log10 form.

    Sup-norms are taken from the explicit arguments when given, otherwise
    estimated by sampling 10001 equispaced points (an estimate, not a
    certified bound).  Requires the problem to supply the next-higher
    derivative unless its sup-norm is passed in.
    """
    if d_upper_plus_sup is None:
        d_upper_plus_sup = _sampled_sup(require_d_upper_plus(problem), problem.a, problem.T)
    if d_upper_sup is None:
        d_upper_sup = _sampled_sup(problem.d_upper, problem.a, problem.T)
    if d_upper_sup == 0.0 and d_upper_plus_sup == 0.0:
        return LogScaledValue(log10=-math.inf)
    q = problem.fractional_part
    x_max = float(rule.nodes[-1])
    log_n1 = math.log(d_upper_plus_sup) if d_upper_plus_sup > 0.0 else -math.inf
    log_n0 = math.log(d_upper_sup) if d_upper_sup > 0.0 else -math.inf
    bracket = np.logaddexp(log_n1, math.log(2.0) + x_max / (1.0 - q) + log_n0)
    ln_c = (
        math.log(abs(math.sin(problem.alpha * math.pi)) / (2.0 * math.pi))
        + x_max * q / (1.0 - q)
        + float(bracket)
    )
    return LogScaledValue(log10=ln_c / _LOG10)


@dataclass(frozen=True)
class OdeBoundRow:
    n_steps: int
    h: float
    max_abs_r_ode: float
    bound: float
    holds: bool | None


@dataclass(frozen=True)
class OdeBoundReport:
    """Measured ODE errors against the bound C(K) T h on uniform grids.

    When C(K) leaves double range the report is inconclusive: measured
    errors and the log-space constant are still reported, but no pass/fail
    verdict is attached.
    """

    constant: LogScaledValue
    rows: tuple[OdeBoundRow, ...]
    conclusive: bool

    @property
    def all_hold(self) -> bool:
        return self.conclusive and all(r.holds for r in self.rows)


def verify_ode_error_bound(
    problem: DerivativeProblem,
    rule: QuadratureRule,
    n_list: Sequence[int],
    truth_tol: float = 1e-10,
    d_upper_sup: float | None = None,
    d_upper_plus_sup: float | None = None,
) -> OdeBoundReport:
    """Check max_n |r_ode| <= C(K) T h for each uniform grid size in n_list."""
    constant = ode_error_constant(
        problem, rule, d_upper_sup=d_upper_sup, d_upper_plus_sup=d_upper_plus_sup
    )
    conclusive = math.isfinite(constant.value)
    rows = []
    for n_steps in n_list:
        grid = uniform_grid(problem.a, problem.T, n_steps)
        profile = ode_error_profile(problem, rule, grid, method=BACKWARD_EULER, truth_tol=truth_tol)
        worst = float(np.max(np.abs(profile)))
        h = problem.T / n_steps
        bound = constant.value * problem.T * h if conclusive else math.inf
        rows.append(
            OdeBoundRow(
                n_steps=n_steps,
                h=h,
                max_abs_r_ode=worst,
                bound=bound,
                holds=(worst <= bound) if conclusive else None,
            )
        )
    return OdeBoundReport(constant=constant, rows=tuple(rows), conclusive=conclusive)


@dataclass(frozen=True)
class RateFit:
    """Least-squares slope of ln(err) against ln(x)."""

    xs: tuple[float, ...]
    errs: tuple[float, ...]
    slope: float
    r2: float


def fit_rate(xs: Sequence[float], errs: Sequence[float]) -> RateFit:
    """Fit a log-log rate through (xs, errs), dropping nonpositive errors.

    Machine-zero errors are dropped with a warning; fewer than three
    surviving points raise :class:`InsufficientDataError`.
    """
    xs = [float(x) for x in xs]
    errs = [float(e) for e in errs]
    if len(xs) != len(errs):
        raise InvalidParameterError("xs and errs must have the same length")
    diffs = np.diff(xs)
    if not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise InvalidParameterError("xs must be strictly monotone")
    kept_x, kept_e = [], []
    for x, e in zip(xs, errs):
        if e > 0.0:
            kept_x.append(x)
            kept_e.append(e)
        else:
            warnings.warn(f"dropping nonpositive error {e} at x = {x} from rate fit", stacklevel=2)
    if len(kept_x) < 3:
        raise InsufficientDataError(
            f"rate fit needs at least 3 positive-error points, {len(kept_x)} survived"
        )
    lx = np.log(kept_x)
    le = np.log(kept_e)
    slope, intercept = np.polyfit(lx, le, 1)
    residuals = le - (slope * lx + intercept)
    ss_res = float(np.sum(residuals**2))
    ss_tot = float(np.sum((le - np.mean(le)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else (1.0 if ss_res < 1e-28 else 0.0)
    return RateFit(xs=tuple(kept_x), errs=tuple(kept_e), slope=float(slope), r2=r2)


@dataclass(frozen=True)
class DecayStudy:
    """Quadrature errors over a node-count sweep, with local orders.

    ``local_orders`` holds (K, p_K) with p_K = log2(e_K / e_{2K}) for the
    doublings present in the sweep whose errors both sit above the
    oracle-noise floor.
    """

    points: tuple[tuple[int, float], ...]
    local_orders: tuple[tuple[int, float], ...]
    noise_floor: float


def quadrature_decay_study(
    problem: DerivativeProblem,
    t: float,
    k_list: Sequence[int],
    truth_tol: float = 1e-10,
) -> DecayStudy:
    """|r_q| at one time point for each node count in increasing ``k_list``."""
    k_list = [int(k) for k in k_list]
    if len(k_list) == 0 or any(b <= a for a, b in zip(k_list, k_list[1:])):
        raise InvalidParameterError("k_list must be nonempty and strictly increasing")
    errors: dict[int, float] = {}
    for k in k_list:
        rule = gauss_laguerre_rule(k)
        errors[k] = abs(quadrature_error(problem, rule, t, truth_tol))
    floor = 10.0 * truth_tol
    orders = []
    for k in k_list:
        if 2 * k in errors and errors[k] > floor and errors[2 * k] > floor:
            orders.append((k, math.log(errors[k] / errors[2 * k]) / math.log(2.0)))
    return DecayStudy(
        points=tuple((k, errors[k]) for k in k_list),
        local_orders=tuple(orders),
        noise_floor=floor,
    )
