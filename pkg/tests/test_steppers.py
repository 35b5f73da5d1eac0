import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from diffcap import (
    BACKWARD_EULER,
    TRAPEZOIDAL,
    DerivativeProblem,
    DiffusiveSystem,
    EvaluationError,
    InvalidParameterError,
    backward_euler_amplification,
    backward_euler_log_amplification,
    backward_euler_step,
    build_system,
    evaluate_derivative,
    gauss_laguerre_rule,
    graded_grid,
    initial_state,
    iter_solution,
    make_problem,
    signed_prefactor,
    trapezoidal_amplification,
    trapezoidal_step,
    uniform_grid,
)
from diffcap.steppers import SolverState


def _single_node_system(alpha: float, w: float) -> DiffusiveSystem:
    # both blocks pinned to the same exponent: handy for scalar-recurrence tests
    from diffcap.diffusive import fractional_part

    return DiffusiveSystem(
        fractional_part=fractional_part(alpha),
        c=signed_prefactor(alpha),
        w_minus=np.array([w]),
        w_plus=np.array([w]),
    )


def _constant_problem(value: float, T: float = 1e6) -> DerivativeProblem:
    return DerivativeProblem(alpha=0.5, a=0.0, T=T, d_upper=lambda t: value)


def test_backward_euler_pure_decay_half():
    # h e^w = 1 with zero forcing halves the state
    system = _single_node_system(0.5, 0.0)
    state = SolverState(n=0, phi=np.array([1.0, 1.0]))
    out = backward_euler_step(state, system, _constant_problem(0.0), 1.0, 1.0)
    assert out.phi == pytest.approx([0.5, 0.5], rel=1e-15)
    assert out.n == 1


def test_backward_euler_extreme_stiffness_damps_to_zero():
    system = _single_node_system(0.5, 800.0)
    state = SolverState(n=0, phi=np.array([3.0, -7.0]))
    out = backward_euler_step(state, system, _constant_problem(0.0), 1.0, 1.0)
    assert np.all(np.abs(out.phi) <= 1e-300)


@pytest.mark.parametrize("method", [BACKWARD_EULER, TRAPEZOIDAL])
@pytest.mark.parametrize("lam_h", [1e-3, 1.0, 1e3])
def test_constant_forcing_matches_closed_form(method, lam_h):
    h = 1.0
    w = math.log(lam_h / h)
    g = 1.37
    alpha = 0.5
    system = _single_node_system(alpha, w)
    problem = _constant_problem(g)
    step = backward_euler_step if method == BACKWARD_EULER else trapezoidal_step
    state = initial_state(system)
    n_steps = 1000
    for n in range(n_steps):
        state = step(state, system, problem, (n + 1) * h, h)
    lam = math.exp(w)
    b = system.c * math.exp(w * system.fractional_part) * g
    if method == BACKWARD_EULER:
        # phi_n = (b / lam) (1 - (1 + h lam)^{-n})
        expected = (b / lam) * (1.0 - math.exp(-n_steps * math.log1p(h * lam)))
    else:
        amp = (1.0 - h * lam / 2.0) / (1.0 + h * lam / 2.0)
        gain = h * b / (1.0 + h * lam / 2.0)
        expected = gain * (1.0 - amp**n_steps) / (1.0 - amp)
    assert state.phi[0] == pytest.approx(expected, rel=1e-13)
    assert state.phi[1] == pytest.approx(expected, rel=1e-13)


def test_trapezoidal_amplification_zero_at_two():
    assert trapezoidal_amplification(math.log(2.0), 1.0) == 0.0


def test_trapezoidal_amplification_tends_to_minus_one():
    assert trapezoidal_amplification(800.0, 1.0) == -1.0
    assert abs(trapezoidal_amplification(25.0, 1.0)) < 1.0


@given(
    st.floats(min_value=-50.0, max_value=750.0),
    st.floats(min_value=1e-6, max_value=1.0),
)
def test_backward_euler_is_a_stable(w, h):
    log_amp = float(backward_euler_log_amplification(w, h))
    assert math.isfinite(log_amp)
    assert log_amp < 0.0
    amp = float(backward_euler_amplification(w, h))
    assert 0.0 <= amp <= 1.0


def test_amplification_rejects_nonpositive_step():
    with pytest.raises(InvalidParameterError):
        backward_euler_amplification(1.0, 0.0)
    with pytest.raises(InvalidParameterError):
        trapezoidal_amplification(1.0, -1.0)


def test_bounded_forcing_respects_maximum_principle():
    rng = np.random.default_rng(42)
    alpha = 0.7
    system = build_system(
        DerivativeProblem(alpha=alpha, a=0.0, T=100.0, d_upper=lambda t: 0.0),
        gauss_laguerre_rule(8),
    )
    bound_m = 2.5
    forcing = {}

    def d_upper(t):
        return forcing.get(t, 0.0)

    problem = DerivativeProblem(alpha=alpha, a=0.0, T=100.0, d_upper=d_upper)
    limit = np.maximum(
        0.0, bound_m * abs(system.c) * np.exp(system.exponents * (system.fractional_part - 1.0))
    )
    state = initial_state(system)
    t = 0.0
    for _ in range(60):
        h = float(rng.uniform(0.01, 1.5))
        t += h
        forcing[t] = float(rng.uniform(-bound_m, bound_m))
        state = backward_euler_step(state, system, problem, t, h)
        assert np.all(np.abs(state.phi) <= limit * (1.0 + 1e-12))


def test_evaluate_derivative_is_linear_in_forcing():
    alpha = 0.5
    rule = gauss_laguerre_rule(12)
    grid = uniform_grid(0.0, 1.0, 40)
    g1 = lambda t: t * t  # noqa: E731
    g2 = lambda t: math.sin(3.0 * t)  # noqa: E731
    b1, b2 = 2.25, -0.75

    def problem(fn):
        return DerivativeProblem(alpha=alpha, a=0.0, T=1.0, d_upper=fn)

    out1 = evaluate_derivative(problem(g1), rule, grid)
    out2 = evaluate_derivative(problem(g2), rule, grid)
    combined = evaluate_derivative(
        problem(lambda t: b1 * g1(t) + b2 * g2(t)), rule, grid
    )
    expected = b1 * out1 + b2 * out2
    scale = float(np.max(np.abs(expected)))
    assert np.max(np.abs(combined - expected)) <= 1e-10 * scale


def test_zero_forcing_keeps_output_identically_zero():
    problem = DerivativeProblem(alpha=0.3, a=0.0, T=2.0, d_upper=lambda t: 0.0)
    values = evaluate_derivative(problem, gauss_laguerre_rule(10), uniform_grid(0.0, 2.0, 25))
    assert np.all(values == 0.0)


def test_first_output_is_exactly_zero():
    problem = make_problem("pow2", 0.5)
    values = evaluate_derivative(problem, gauss_laguerre_rule(10), uniform_grid(0.0, 1.0, 5))
    assert values[0] == 0.0


def test_extreme_stiffness_stays_finite():
    problem = make_problem("pow2", 0.9)
    values = evaluate_derivative(problem, gauss_laguerre_rule(60), uniform_grid(0.0, 1.0, 50))
    assert np.all(np.isfinite(values))


def test_end_to_end_accuracy_on_linear_function():
    problem = make_problem("pow1", 0.5)
    values = evaluate_derivative(
        problem, gauss_laguerre_rule(30), uniform_grid(0.0, 1.0, 2000)
    )
    assert values[-1] == pytest.approx(2.0 / math.sqrt(math.pi), abs=1e-4)


def test_graded_grid_is_supported():
    problem = make_problem("pow2", 0.5)
    grid = graded_grid(0.0, 1.0, 30, exponent=2.0)
    values = evaluate_derivative(problem, gauss_laguerre_rule(10), grid)
    assert values[0] == 0.0
    assert np.all(np.isfinite(values))


def test_trapezoidal_method_runs_end_to_end():
    problem = make_problem("pow1", 0.5)
    values = evaluate_derivative(
        problem, gauss_laguerre_rule(20), uniform_grid(0.0, 1.0, 400), method=TRAPEZOIDAL
    )
    assert values[-1] == pytest.approx(2.0 / math.sqrt(math.pi), abs=1e-3)


def test_truncation_reduces_state_size():
    problem = make_problem("pow2", 0.5)
    rule = gauss_laguerre_rule(10)
    grid = uniform_grid(0.0, 1.0, 4)
    sizes = {state.phi.shape for state in iter_solution(problem, rule, grid, k_star=6)}
    assert sizes == {(12,)}
    full = evaluate_derivative(problem, rule, grid)
    cut = evaluate_derivative(problem, rule, grid, k_star=6)
    assert cut.shape == full.shape
    assert not np.allclose(full[1:], cut[1:])


def test_state_is_two_k_numbers_independent_of_grid_length():
    problem = make_problem("pow1", 0.5)
    rule = gauss_laguerre_rule(7)
    for n_steps in (5, 50):
        grid = uniform_grid(0.0, 1.0, n_steps)
        count = 0
        for state in iter_solution(problem, rule, grid):
            assert state.phi.shape == (14,)
            count += 1
        assert count == n_steps + 1


def test_initial_state_is_exactly_zero():
    system = build_system(make_problem("pow2", 0.5), gauss_laguerre_rule(6))
    state = initial_state(system)
    assert state.n == 0
    assert np.all(state.phi == 0.0)


def test_step_rejects_nonpositive_step_size():
    system = _single_node_system(0.5, 0.0)
    state = initial_state(system)
    with pytest.raises(InvalidParameterError):
        backward_euler_step(state, system, _constant_problem(0.0), 1.0, 0.0)
    with pytest.raises(InvalidParameterError):
        trapezoidal_step(state, system, _constant_problem(0.0), 1.0, -0.5)


def test_non_finite_forcing_reports_offending_time():
    problem = DerivativeProblem(
        alpha=0.5, a=0.0, T=1.0, d_upper=lambda t: math.nan if t > 0.5 else 0.0
    )
    with pytest.raises(EvaluationError, match="0.75"):
        evaluate_derivative(problem, gauss_laguerre_rule(3), uniform_grid(0.0, 1.0, 4))


def test_unknown_method_rejected():
    problem = make_problem("pow1", 0.5)
    with pytest.raises(InvalidParameterError):
        evaluate_derivative(
            problem, gauss_laguerre_rule(3), uniform_grid(0.0, 1.0, 4), method="rk4"
        )


def test_grid_must_match_problem_interval():
    problem = make_problem("pow1", 0.5, a=0.0, T=1.0)
    with pytest.raises(InvalidParameterError):
        evaluate_derivative(problem, gauss_laguerre_rule(3), uniform_grid(0.0, 2.0, 4))
