import numpy as np
import pytest

from gdiffusion.coefficients import build_coefficients, remark_counterexample_pair, shifted
from gdiffusion.errors import DimensionMismatchError, NonFiniteError
from gdiffusion.gfunction import CovarianceSet
from gdiffusion.scenario import VolatilityControl, build_gbm_path, sample_noise
from gdiffusion.sde import (
    CoefficientSet,
    euler_march,
    integrate,
    integrate_coupled,
    lipschitz_audit,
    pathwise_min_gap,
)

INTERVAL = CovarianceSet.from_interval(0.25, 1.0)
UNIT = CovarianceSet.from_interval(1.0, 1.0)


def unit_path(T=1.0, n_steps=64, seed=3, theta=UNIT, generator=0):
    noise = sample_noise(seed, T, n_steps, theta.dim)
    return build_gbm_path(noise, VolatilityControl.constant(generator, n_steps), theta)


def test_zero_coefficients_constant_path():
    coeffs = CoefficientSet(n=2, d=1)
    path = unit_path()
    out = integrate(coeffs, [1.5, -0.5], path)
    assert np.all(out.states == np.array([1.5, -0.5]))


def test_pure_drift_is_linear_in_time():
    coeffs = CoefficientSet(n=1, d=1, b=lambda t, x: np.ones(x.shape))
    path = unit_path(T=2.0, n_steps=128)
    out = integrate(coeffs, [0.25], path)
    assert np.allclose(out.states[:, 0], 0.25 + out.times, atol=1e-12)


def test_h_only_accumulates_quadratic_variation():
    coeffs = CoefficientSet(n=1, d=1, h=((lambda t, x: np.ones(x.shape),),))
    path = unit_path(theta=INTERVAL, generator=1, n_steps=50)
    out = integrate(coeffs, [2.0], path)
    qv = np.concatenate([[0.0], np.cumsum(path.dQV[:, 0, 0])])
    assert np.allclose(out.states[:, 0], 2.0 + qv, atol=1e-14)


def test_sigma_only_reproduces_driver():
    coeffs = CoefficientSet(n=1, d=1, sigma=(lambda t, x: np.ones(x.shape),))
    path = unit_path(n_steps=40)
    out = integrate(coeffs, [0.0], path)
    assert np.allclose(out.states[:, 0], path.cum_B[:, 0], atol=1e-14)


@pytest.mark.filterwarnings("ignore:overflow")
def test_nonfinite_abort_reports_step():
    coeffs = CoefficientSet(n=1, d=1, b=lambda t, x: x * 1e300)
    path = unit_path(n_steps=8)
    with pytest.raises(NonFiniteError) as err:
        integrate(coeffs, [1.0], path)
    assert "step" in str(err.value)


def test_dimension_mismatch():
    coeffs = CoefficientSet(n=2, d=1)
    path = unit_path()
    with pytest.raises(DimensionMismatchError):
        integrate(coeffs, [0.0], path)


def test_coupled_identical_systems_bitwise():
    coeffs = build_coefficients({
        "n": 2, "d": 1,
        "b": {"family": "offdiag-monotone"},
        "sigma": {"family": "constant", "matrix": [[1.0], [1.0]]},
    })
    path = unit_path()
    xs, ys = integrate_coupled(coeffs, coeffs, [0.1, 0.2], [0.1, 0.2], path)
    assert np.array_equal(xs.states, ys.states)
    gap, witness = pathwise_min_gap((xs, ys))
    assert gap == 0.0
    assert witness == (1, 0.0)


def test_coupled_shifted_drift_gap_is_time():
    base = CoefficientSet(n=2, d=1)
    up = CoefficientSet(n=2, d=1, b=shifted(None, 1.0))
    path = unit_path(T=1.0, n_steps=100)
    xs, ys = integrate_coupled(base, up, [0.0, 0.0], [0.0, 0.0], path)
    assert np.allclose(ys.states - xs.states, path.times[:, None], atol=1e-12)
    gap, witness = pathwise_min_gap((xs, ys))
    assert gap == 0.0 and witness == (1, 0.0)


def test_coupled_warns_on_unordered_start():
    coeffs = CoefficientSet(n=1, d=1)
    path = unit_path()
    with pytest.warns(UserWarning, match="counterexample"):
        integrate_coupled(coeffs, coeffs, [1.0], [0.0], path)


def test_remark_counterexample_low_volatility_gap():
    coeffs_x, coeffs_y = remark_counterexample_pair(0.25, 1.0)
    path = unit_path(T=1.0, n_steps=256, theta=INTERVAL, generator=0)
    xs, ys = integrate_coupled(coeffs_x, coeffs_y, [0.0, 0.0], [0.0, 0.0], path)
    gap, (comp, t_at) = pathwise_min_gap((xs, ys))
    # X_2 - Y_2 = ((1+0.25)/2 - 0.25) t = 0.375 t, so the min of Y - X is at T.
    assert comp == 2 and t_at == 1.0
    assert gap == pytest.approx(-0.375, abs=1e-12)


def test_strong_order_at_least_half():
    # Linear test system against the same Brownian path aggregated to
    # coarser grids; reference at 4x resolution.
    coeffs = CoefficientSet(n=1, d=1, b=lambda t, x: -x,
                            sigma=(lambda t, x: np.ones(x.shape),))
    n_fine = 512
    errors = []
    for n_coarse in (128, 256):
        factor = n_fine // n_coarse
        gaps = []
        for seed in range(40):
            fine = sample_noise(seed, 1.0, n_fine, 1)
            ref_path = build_gbm_path(fine, VolatilityControl.constant(0, n_fine), UNIT)
            ref = integrate(coeffs, [1.0], ref_path)
            dw = fine.increments.reshape(n_coarse, factor, 1).sum(axis=1)
            times = np.linspace(0.0, 1.0, n_coarse + 1)
            dqv = np.ones((n_coarse, 1, 1)) / n_coarse
            states = euler_march(coeffs, np.array([1.0]), times, dw, dqv)
            gaps.append((states[-1, 0] - ref.states[-1, 0]) ** 2)
        errors.append(np.sqrt(np.mean(gaps)))
    order = np.log2(errors[0] / errors[1])
    assert order >= 0.4


def test_permutation_equivariance_exact():
    perm = np.array([2, 0, 1])  # x -> x[perm]
    inv = np.argsort(perm)

    def drift(t, x):
        return np.stack([x[..., 1] * 0.5, np.tanh(x[..., 2]), x[..., 0] - 1.0], axis=-1)

    def drift_permuted(t, x):
        return drift(t, x[..., inv])[..., perm]

    sigma = (lambda t, x: np.ones(x.shape),)
    c1 = CoefficientSet(n=3, d=1, b=drift, sigma=sigma)
    c2 = CoefficientSet(n=3, d=1, b=drift_permuted, sigma=sigma)
    path = unit_path(n_steps=32, seed=11)
    x0 = np.array([0.3, -0.2, 0.9])
    out1 = integrate(c1, x0, path)
    out2 = integrate(c2, x0[perm], path)
    assert np.array_equal(out2.states, out1.states[:, perm])


def test_h_symmetry_audit_raises():
    def one(t, x):
        return np.ones(x.shape)

    def two(t, x):
        return 2.0 * np.ones(x.shape)

    with pytest.raises(DimensionMismatchError, match="h_symmetric"):
        CoefficientSet(n=1, d=2, h=((None, one), (two, None)))


def test_lipschitz_audit_warns():
    coeffs = CoefficientSet(n=1, d=1, b=lambda t, x: 3.0 * x, lipschitz=1.0)
    box = np.array([[-1.0, 1.0]])
    with pytest.warns(UserWarning, match="Lipschitz"):
        worst = lipschitz_audit(coeffs, box)
    assert worst > 2.0


def test_batched_march_matches_single_paths():
    coeffs = build_coefficients({
        "n": 2, "d": 1,
        "b": {"family": "offdiag-monotone"},
        "sigma": {"family": "constant", "matrix": [[0.5], [1.0]]},
    })
    n_steps = 16
    times = np.linspace(0.0, 1.0, n_steps + 1)
    control = VolatilityControl.bang_bang_cycle(0, 1, n_steps)
    paths = [build_gbm_path(sample_noise(5, 1.0, n_steps, 1, path_index=p), control, INTERVAL)
             for p in range(3)]
    db = np.stack([p.dB for p in paths])
    batch = euler_march(coeffs, np.array([0.1, 0.2]), times, db, paths[0].dQV)
    for p, path in enumerate(paths):
        single = integrate(coeffs, [0.1, 0.2], path)
        assert np.array_equal(batch[p], single.states)


def test_provenance_records_noise_seed():
    coeffs = CoefficientSet(n=1, d=1)
    noise = sample_noise(9, 1.0, 4, 1, path_index=2)
    path = build_gbm_path(noise, VolatilityControl.constant(0, 4), UNIT)
    out = integrate(coeffs, [0.0], path)
    assert out.provenance["noise_id"] == [9, 2]
    assert out.provenance["x0"] == [0.0]
