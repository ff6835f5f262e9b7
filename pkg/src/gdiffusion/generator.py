"""The nonlinear infinitesimal generator and its small-time semigroup limit.

For a smooth test function f,

    Lf(x) = <grad f(x), b(x)>
            + G([ <grad f, h_lk + h_kl> + <hess f sigma_l, sigma_k> ]_{l,k})

which is also the limit of (E_t f(x) - f(x)) / t as t -> 0+.  Derivatives
come from the function's analytic callables when present, otherwise from
Richardson-extrapolated central differences.  The semigroup values for the
limit check are produced by the worst-case PDE solver by default; the Monte
Carlo route is available but its supremum bias is divided by small t, so it
is not the default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError
from .functions import TestFunction
from .gfunction import CovarianceSet, eval_G
from .pde import Grid, semigroup_value, solve, stability_bound
from .sde import CoefficientSet


def _fd_gradient(f: TestFunction, x: np.ndarray, step: float) -> np.ndarray:
    n = x.size
    out = np.empty(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        out[i] = (f.value(x + step * e) - f.value(x - step * e)) / (2.0 * step)
    return out


def _fd_hessian(f: TestFunction, x: np.ndarray, step: float) -> np.ndarray:
    n = x.size
    out = np.empty((n, n))
    fx = f.value(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = step
        out[i, i] = (f.value(x + ei) - 2.0 * fx + f.value(x - ei)) / step ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = step
            out[i, j] = out[j, i] = (
                f.value(x + ei + ej) - f.value(x + ei - ej)
                - f.value(x - ei + ej) + f.value(x - ei - ej)
            ) / (4.0 * step ** 2)
    return out


def _richardson(eval_at, step: float):
    """(4 A(h/2) - A(h)) / 3: one extrapolation of an O(h^2) approximation."""
    return (4.0 * eval_at(step / 2.0) - eval_at(step)) / 3.0


def derivatives(f: TestFunction, x, fd_step: float | None = None
                ) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and Hessian, analytic when supplied, else extrapolated FD."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    step = fd_step if fd_step is not None else 1e-4 * (1.0 + float(np.linalg.norm(x)))
    if f.grad is not None:
        grad = np.asarray(f.grad(x), dtype=float)
    else:
        grad = _richardson(lambda h: _fd_gradient(f, x, h), step)
    if f.hess is not None:
        hess = np.asarray(f.hess(x), dtype=float)
    else:
        hess = _richardson(lambda h: _fd_hessian(f, x, h), step)
    if not (np.all(np.isfinite(grad)) and np.all(np.isfinite(hess))):
        raise NonFiniteError(f"non-finite derivative estimate at x={x.tolist()}")
    return grad, (hess + hess.T) / 2.0


def generator_matrix(coeffs: CoefficientSet, t: float, x, grad: np.ndarray,
                     hess: np.ndarray) -> np.ndarray:
    """The d x d argument of G: <grad, h_lk + h_kl> + <hess sigma_l, sigma_k>."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = coeffs.d
    m = np.empty((d, d))
    sig = [coeffs.eval_sigma(l, t, x) for l in range(d)]
    for l in range(d):
        for k in range(d):
            h_sym = coeffs.eval_h(l, k, t, x) + coeffs.eval_h(k, l, t, x)
            m[l, k] = float(grad @ h_sym) + float(sig[l] @ hess @ sig[k])
    return (m + m.T) / 2.0


def generator_matrix_coordinate_form(coeffs: CoefficientSet, t: float, x,
                                     grad: np.ndarray, hess: np.ndarray) -> np.ndarray:
    """Same matrix assembled entrywise from coordinates, as a self-check:
    sum_i (h_lk + h_kl)_i d_i f + sum_{i,j} sigma_il sigma_jk d2_ij f."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = coeffs.d
    s = coeffs.sigma_matrix(t, x)  # (n, d)
    m = np.empty((d, d))
    for l in range(d):
        for k in range(d):
            h_sym = coeffs.eval_h(l, k, t, x) + coeffs.eval_h(k, l, t, x)
            first = sum(h_sym[i] * grad[i] for i in range(coeffs.n))
            second = sum(s[i, l] * s[j, k] * hess[i, j]
                         for i in range(coeffs.n) for j in range(coeffs.n))
            m[l, k] = first + second
    return (m + m.T) / 2.0


def eval_generator(coeffs: CoefficientSet, theta: CovarianceSet, f: TestFunction,
                   x, fd_step: float | None = None, t: float = 0.0) -> float:
    """Lf(x) = <grad f, b> + G(generator matrix)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    grad, hess = derivatives(f, x, fd_step)
    m = generator_matrix(coeffs, t, x, grad, hess)
    drift = float(grad @ coeffs.eval_b(t, x))
    return drift + eval_G(m, theta)


@dataclass(frozen=True)
class LimitRow:
    t: float
    quotient: float
    generator_value: float

    @property
    def residual(self) -> float:
        return abs(self.quotient - self.generator_value)


def generator_limit_check(coeffs: CoefficientSet, theta: CovarianceSet,
                          f: TestFunction, x, t_list, grid: Grid | None = None,
                          fd_step: float | None = None, method: str = "pde",
                          mc_options: dict | None = None) -> list[LimitRow]:
    """Table of ((E_t f(x) - f(x)) / t, Lf(x)) for each t in t_list.

    With method="pde" (default), E_t comes from one PDE solve up to
    max(t_list); the residual is expected to shrink as t decreases.  When no
    grid is given, a box around x wide enough to keep the trust region clear
    of the queries is used, with the time step snapped to divide every
    queried t.  method="mc" estimates E_t by the scenario supremum instead;
    its bias divided by small t makes it the non-default diagnostic route.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t_list = sorted(float(t) for t in t_list)
    if not t_list or t_list[0] <= 0:
        raise NonFiniteError("t_list must contain positive times")
    lf = eval_generator(coeffs, theta, f, x, fd_step)
    fx = float(f.value(x))

    if method == "mc":
        values = _mc_semigroup_values(coeffs, theta, f, x, t_list, mc_options or {})
        return [LimitRow(t=t, quotient=(v - fx) / t, generator_value=lf)
                for t, v in zip(t_list, values)]
    if method != "pde":
        raise NonFiniteError(f"unknown limit-check method {method!r}")

    if grid is None:
        grid = _default_limit_grid(coeffs, theta, x, t_list)
    sol = solve(coeffs, theta, f, grid)
    rows = []
    for t in t_list:
        quotient = (semigroup_value(sol, t, x) - fx) / t
        rows.append(LimitRow(t=t, quotient=quotient, generator_value=lf))
    return rows


def _mc_semigroup_values(coeffs: CoefficientSet, theta: CovarianceSet,
                         f: TestFunction, x: np.ndarray, t_list, options: dict
                         ) -> list[float]:
    from .scenario import VolatilityControl, estimate_sublinear_expectation
    from .sde import euler_march

    n_paths = int(options.get("n_paths", 20000))
    steps_per_t = int(options.get("n_steps", 64))
    seed = int(options.get("seed", 0))

    class Terminal:
        def __call__(self, path):
            states = euler_march(coeffs, x, path.times, path.dB, path.dQV)
            return float(f.value(states[-1]))

        def evaluate_batch(self, times, db, dqv):
            states = euler_march(coeffs, x, times, db, dqv)
            return f.value(states[..., -1, :])

    out = []
    for t in t_list:
        controls = [VolatilityControl.constant(m, steps_per_t)
                    for m in range(theta.n_generators)]
        est, _, _ = estimate_sublinear_expectation(
            Terminal(), theta, controls, n_paths, seed, t, steps_per_t)
        out.append(est)
    return out


def _gcd_float(values, quantum: float = 1e-9) -> float:
    ints = [int(round(v / quantum)) for v in values]
    g = ints[0]
    for v in ints[1:]:
        g = np.gcd(g, v)
    return g * quantum


def _default_limit_grid(coeffs: CoefficientSet, theta: CovarianceSet,
                        x: np.ndarray, t_list) -> Grid:
    t_max = max(t_list)
    # margin: trust radius plus room for the worst drift sweep
    probe_half = 1.0
    n = coeffs.n
    bounds = np.column_stack([x - probe_half, x + probe_half])
    probe = Grid.regular(bounds, [9] * n, horizon=t_max, n_levels=16)
    nodes = probe.nodes()
    s2 = 0.0
    if coeffs.has_sigma:
        s_arr = coeffs.sigma_matrix(0.0, nodes)
        gram = np.einsum("...id,...jd->...ij", s_arr, s_arr)
        s2 = float(np.max(np.linalg.eigvalsh(gram)))
    sigma2 = theta.sigma_upper_sq * max(1.0, s2)
    b_inf = float(np.max(np.abs(coeffs.eval_b(0.0, nodes)))) if coeffs.b is not None else 0.0
    half = 3.0 * np.sqrt(sigma2 * t_max) + b_inf * t_max + 1.0
    bounds = np.column_stack([x - half, x + half])
    counts = [321] * n if n == 1 else [81] * n
    grid0 = Grid.regular(bounds, counts, horizon=t_max, n_levels=16)
    dt_stable = stability_bound(coeffs, theta, grid0)
    # snap dt to divide every queried time so quotients use exact levels
    dt = _gcd_float(t_list)
    while dt > dt_stable:
        dt /= 2.0
    n_levels = int(round(t_max / dt))
    return Grid.regular(bounds, counts, horizon=t_max, n_levels=n_levels)


def limit_table_csv(rows: list[LimitRow], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,quotient,generator_value,residual\n")
        for row in rows:
            fh.write(f"{row.t!r},{row.quotient!r},{row.generator_value!r},{row.residual!r}\n")
