"""Reference noise, volatility controls, and scenario-wise Brownian paths.

A scenario is a pair (reference Wiener path, volatility control).  The
control selects one covariance generator per time step; the driven path has
increments ``dB_k = gamma_{m(k)} dW_k`` and accumulates quadratic covariation
``d<B^i,B^j>_k = (gamma gamma^T)_{ij} dt``.  Worst-case (sublinear)
expectations are estimated from below by maximizing Monte Carlo means over a
finite family of controls.

Noise streams follow a stream-split contract: the draw at (seed, path index,
step) is fixed, so regeneration is bit-identical and ensembles can be built
in any order or in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, EvaluationError, NonFiniteError
from .gfunction import CovarianceSet

POLICY_TAGS = ("constant", "random-switching", "bang-bang-cycle", "explicit")


def _rng_for_path(seed: int, path_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((int(seed), int(path_index)))))


@dataclass(frozen=True)
class NoisePath:
    """Increments of a reference Wiener path on a uniform grid.

    Fully determined by (seed, T, n_steps, dim, path_index); increments are
    i.i.d. N(0, dt) with dt = T / n_steps.
    """

    seed: int
    horizon: float
    n_steps: int
    dim: int
    path_index: int = 0
    increments: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.horizon <= 0 or self.n_steps < 1 or self.dim < 1:
            raise DimensionMismatchError(
                f"invalid noise shape: T={self.horizon}, n_steps={self.n_steps}, d={self.dim}"
            )
        rng = _rng_for_path(self.seed, self.path_index)
        dw = rng.standard_normal((self.n_steps, self.dim)) * np.sqrt(self.dt)
        dw.setflags(write=False)
        object.__setattr__(self, "increments", dw)

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_steps + 1)


def sample_noise(seed: int, T: float, n_steps: int, d: int, path_index: int = 0) -> NoisePath:
    """Deterministic reference noise; distinct (seed, path_index) give independent streams."""
    return NoisePath(seed=seed, horizon=float(T), n_steps=int(n_steps), dim=int(d),
                     path_index=int(path_index))


def noise_block(seed: int, T: float, n_steps: int, d: int, n_paths: int) -> np.ndarray:
    """Stack of reference increments, shape (n_paths, n_steps, d).

    Row p is bit-identical to ``sample_noise(seed, T, n_steps, d, p).increments``,
    so ensembles are reproducible path by path.
    """
    dt = float(T) / int(n_steps)
    out = np.empty((n_paths, n_steps, d))
    for p in range(n_paths):
        out[p] = _rng_for_path(seed, p).standard_normal((n_steps, d))
    out *= np.sqrt(dt)
    return out


@dataclass(frozen=True)
class VolatilityControl:
    """Piecewise-constant choice of covariance generator per time step."""

    schedule: np.ndarray
    policy: str = "explicit"
    label: str = ""

    def __post_init__(self) -> None:
        sched = np.asarray(self.schedule, dtype=np.int64)
        if sched.ndim != 1 or sched.size < 1:
            raise DimensionMismatchError("control schedule must be a nonempty 1-d index array")
        if np.min(sched) < 0:
            raise DimensionMismatchError("control schedule indices must be nonnegative")
        if self.policy not in POLICY_TAGS:
            raise DimensionMismatchError(f"unknown policy tag {self.policy!r}")
        sched.setflags(write=False)
        object.__setattr__(self, "schedule", sched)
        if not self.label:
            object.__setattr__(self, "label", f"{self.policy}[{sched[0]}..]")

    @property
    def n_steps(self) -> int:
        return self.schedule.size

    @classmethod
    def constant(cls, index: int, n_steps: int) -> "VolatilityControl":
        return cls(np.full(n_steps, index, dtype=np.int64), "constant", f"constant[{index}]")

    @classmethod
    def random_switching(cls, n_generators: int, n_steps: int, seed: int) -> "VolatilityControl":
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((int(seed), 0x5EED))))
        sched = rng.integers(0, n_generators, size=n_steps)
        return cls(sched, "random-switching", f"switching[seed={seed}]")

    @classmethod
    def bang_bang_cycle(cls, lo_index: int, hi_index: int, n_steps: int,
                        period: int | None = None) -> "VolatilityControl":
        """Alternate between two generators; default period splits the horizon in half."""
        period = n_steps if period is None else period
        k = np.arange(n_steps)
        sched = np.where((k % period) < (period + 1) // 2, lo_index, hi_index)
        return cls(sched.astype(np.int64), "bang-bang-cycle", f"bangbang[{lo_index},{hi_index}]")


def default_control_family(theta: CovarianceSet, n_steps: int, n_switching: int = 64,
                           seed: int = 0) -> list[VolatilityControl]:
    """Constant control per generator plus seeded random-switching schedules."""
    controls = [VolatilityControl.constant(m, n_steps) for m in range(theta.n_generators)]
    for j in range(n_switching):
        controls.append(
            VolatilityControl.random_switching(theta.n_generators, n_steps, seed * 1000003 + j)
        )
    return controls


def apply_control(dw: np.ndarray, control: VolatilityControl,
                  theta: CovarianceSet, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Map reference increments to (dB, dQV) under one control.

    dw may carry a leading batch dimension: (..., n_steps, d) -> dB of the
    same shape; dQV has shape (n_steps, d, d) and is path-independent.
    """
    sched = control.schedule
    if dw.shape[-2] != sched.size:
        raise DimensionMismatchError(
            f"control covers {sched.size} steps but noise has {dw.shape[-2]}"
        )
    if dw.shape[-1] != theta.dim:
        raise DimensionMismatchError(
            f"noise dim {dw.shape[-1]} does not match covariance set dim {theta.dim}"
        )
    if np.max(sched) >= theta.n_generators:
        raise DimensionMismatchError(
            f"schedule references generator {int(np.max(sched))} "
            f"but the set has only {theta.n_generators}"
        )
    gammas = np.stack(theta.generators)          # (M, d, d)
    covs = np.stack(theta.covariances)           # (M, d, d)
    gamma_per_step = gammas[sched]               # (n_steps, d, d)
    db = np.einsum("kij,...kj->...ki", gamma_per_step, dw)
    dqv = covs[sched] * dt                       # (n_steps, d, d)
    return db, dqv


@dataclass(frozen=True)
class GBrownianPath:
    """One scenario of the uncertain-volatility Brownian motion.

    dB : (n_steps, d) increments; dQV : (n_steps, d, d) quadratic covariation
    increments, each symmetric PSD.  Cumulative values are available at grid
    times through :meth:`B` and :meth:`QV`.  ``noise_id`` records the
    (seed, path_index) provenance when built from a :class:`NoisePath`.
    """

    times: np.ndarray
    dB: np.ndarray
    dQV: np.ndarray
    control: VolatilityControl
    noise_id: tuple = ()

    @property
    def n_steps(self) -> int:
        return self.dB.shape[0]

    @property
    def dim(self) -> int:
        return self.dB.shape[1]

    @property
    def cum_B(self) -> np.ndarray:
        out = np.zeros((self.n_steps + 1, self.dim))
        np.cumsum(self.dB, axis=0, out=out[1:])
        return out

    @property
    def cum_QV(self) -> np.ndarray:
        out = np.zeros((self.n_steps + 1, self.dim, self.dim))
        np.cumsum(self.dQV, axis=0, out=out[1:])
        return out

    def _level(self, t: float) -> int:
        k = int(round(t / (self.times[1] - self.times[0])))
        if not (0 <= k <= self.n_steps) or abs(self.times[k] - t) > 1e-9 * (1 + abs(t)):
            raise DimensionMismatchError(f"time {t} is not on the scenario grid")
        return k

    def B(self, t: float) -> np.ndarray:
        return self.cum_B[self._level(t)]

    def QV(self, t: float) -> np.ndarray:
        return self.cum_QV[self._level(t)]


def build_gbm_path(noise: NoisePath, control: VolatilityControl,
                   theta: CovarianceSet) -> GBrownianPath:
    """Realize one scenario: dB = gamma dW, dQV = gamma gamma^T dt."""
    db, dqv = apply_control(noise.increments, control, theta, noise.dt)
    return GBrownianPath(times=noise.times, dB=db, dQV=dqv, control=control,
                         noise_id=(noise.seed, noise.path_index))


def estimate_sublinear_expectation(functional, theta: CovarianceSet,
                                   controls: list[VolatilityControl],
                                   n_paths: int, seed: int, T: float, n_steps: int
                                   ) -> tuple[float, float, VolatilityControl]:
    """Maximize the Monte Carlo mean of a path functional over a control family.

    Returns (estimate, standard error at the argmax, maximizing control).
    The estimate is a LOWER bound estimate of the worst-case expectation:
    the true value is a supremum over all scenarios, here restricted to the
    supplied finite family.  Noise is shared across controls (it depends on
    (seed, path index) only), so enlarging the family can never decrease the
    estimate.

    ``functional`` maps a :class:`GBrownianPath` to a float; objects exposing
    ``evaluate_batch(times, dB, dQV)`` (dB batched over paths) are used
    vectorized instead.
    """
    if n_paths < 2:
        raise DimensionMismatchError("n_paths must be at least 2")
    if not controls:
        raise DimensionMismatchError("at least one control is required")
    dt = float(T) / int(n_steps)
    dw = noise_block(seed, T, n_steps, theta.dim, n_paths)
    times = np.linspace(0.0, float(T), int(n_steps) + 1)
    best = None
    for c_idx, control in enumerate(controls):
        db, dqv = apply_control(dw, control, theta, dt)
        if hasattr(functional, "evaluate_batch"):
            values = np.asarray(functional.evaluate_batch(times, db, dqv), dtype=float)
        else:
            values = np.empty(n_paths)
            for p in range(n_paths):
                path = GBrownianPath(times=times, dB=db[p], dQV=dqv, control=control)
                values[p] = functional(path)
        if not np.all(np.isfinite(values)):
            p_bad = int(np.argmin(np.isfinite(values)))
            raise EvaluationError(
                f"functional returned a non-finite value at control {c_idx} "
                f"({control.label}), path {p_bad}"
            )
        mean = float(np.mean(values))
        if best is None or mean > best[0]:
            se = float(np.std(values, ddof=1) / np.sqrt(n_paths))
            best = (mean, se, control)
    return best


class TerminalFunctional:
    """phi(B_T) for driver-level functionals, with a vectorized batch path."""

    def __init__(self, phi):
        self.phi = phi

    def __call__(self, path: GBrownianPath) -> float:
        return float(self.phi(path.cum_B[-1]))

    def evaluate_batch(self, times, db, dqv) -> np.ndarray:
        terminal = np.sum(db, axis=-2)  # (n_paths, d)
        return np.asarray([self.phi(b) for b in terminal], dtype=float)


class ScalarTerminalFunctional(TerminalFunctional):
    """phi applied elementwise to the terminal value of a 1-d driver."""

    def evaluate_batch(self, times, db, dqv) -> np.ndarray:
        terminal = np.sum(db, axis=-2)[..., 0]
        out = np.asarray(self.phi(terminal), dtype=float)
        if not np.all(np.isfinite(out)):
            raise NonFiniteError("functional produced non-finite values")
        return out
