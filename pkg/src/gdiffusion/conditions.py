"""Numerical certification / refutation of comparison and order hypotheses.

Each checker maximizes an inequality residual over the constrained domain
the hypothesis quantifies over (ordered pairs with one tied coordinate,
nonnegative directions, and so on).  Because the true quantifier ranges over
all of R^n, the search runs on a declared box with multi-start pattern-search
refinement: a reported violation is a genuine counterexample (the witness
re-evaluates exactly), while "satisfied-on-domain" is evidence, not proof.

Residual conventions (cX carries b, h; cY carries b_bar, h_bar; G is the
worst-case half-trace of the covariance set):

    pair residual  r_i(t, x, y) = b_i(t,x) - b_bar_i(t,y)
                                  + G(Hsym_i(t,x) - Hsym_bar_i(t,y))
    with (Hsym_i)_lk = (h_lk + h_kl)_i

    direction residual r(t, x, K) = <K, b_bar - b>(t,x)
                                    + G([<K, Hsym_bar_lk - Hsym_lk>](t,x))

Condition ids and their constraint/sign conventions:

    B1   r_i <= 0 over x <= y with x_i = y_i          (violation = r_i)
    C2   same as B1 with cY = cX
    C2'  r_i >= 0 over x >= y with x_i = y_i          (violation = -r_i)
    D2, D4   r_i >= 0 over x >= y with x_i = y_i      (violation = -r_i)
    D4'  r_i <= 0 over x <= y with x_i = y_i, roles of the two coefficient
         sets swapped inside the residual               (violation = r_i)
    D2'  direction residual with (b - b_bar, h - h_bar) >= 0 for K >= 0
    D5   direction residual with (b_bar - b, h_bar - h) <= 0 for K >= 0
    B2   sigma shared between the systems and (sigma_l)_k depending only
         on x_k (equality audit + dependency search)
    C1/D3  every product (sigma_l)_i (sigma_k)_j depends only on {x_i, x_j}
    D1   C1-style dependency plus the product equality audit between the
         two systems
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, EvaluationError
from .gfunction import CovarianceSet, eval_G
from .sde import CoefficientSet

PAIR_CONDITIONS = ("B1", "C2", "C2'", "D2", "D4", "D4'")
DIRECTION_CONDITIONS = ("D2'", "D5")
DEPENDENCY_CONDITIONS = ("B2", "C1", "D1", "D3")
ALL_CONDITIONS = PAIR_CONDITIONS + DIRECTION_CONDITIONS + DEPENDENCY_CONDITIONS


@dataclass(frozen=True)
class SearchDomain:
    """Box, time grid, and search budget for a violation search."""

    box: np.ndarray                      # (n, 2) rows [lo, hi]
    t_grid: tuple = (0.0,)
    n_samples: int = 512
    n_refine: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        box = np.asarray(self.box, dtype=float)
        if box.ndim != 2 or box.shape[1] != 2:
            raise DimensionMismatchError("box must be an (n, 2) array of [lo, hi] rows")
        if np.any(box[:, 0] >= box[:, 1]):
            raise DimensionMismatchError("box rows must satisfy lo < hi")
        if self.n_samples < 1:
            raise DimensionMismatchError("n_samples must be positive")
        box.setflags(write=False)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "t_grid", tuple(float(t) for t in self.t_grid))

    @property
    def dim(self) -> int:
        return self.box.shape[0]


@dataclass
class CheckReport:
    """Outcome of one hypothesis check.

    verdict is "violated" exactly when max_violation > tolerance; the witness
    carries the sample at which the maximum was attained and reproduces
    max_violation on re-evaluation.
    """

    condition: str
    max_violation: float
    witness: dict
    tolerance: float
    samples_evaluated: int
    box: list = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "violated" if self.max_violation > self.tolerance else "satisfied-on-domain"

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "verdict": self.verdict,
            "max_violation": self.max_violation,
            "witness": self.witness,
            "tolerance": self.tolerance,
            "samples_evaluated": self.samples_evaluated,
            "box": self.box,
        }


def _rng(seed, *tags) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((int(seed),) + tags)))


def _sym_h_component(c: CoefficientSet, i: int, t: float, x: np.ndarray) -> np.ndarray:
    """(h_lk + h_kl)_i as a d x d matrix at one point."""
    d = c.d
    m = np.empty((d, d))
    x = np.asarray(x, dtype=float)
    for l in range(d):
        for k in range(d):
            m[l, k] = c.eval_h(l, k, t, x)[..., i] + c.eval_h(k, l, t, x)[..., i]
    return m


def pair_residual(cX: CoefficientSet, cY: CoefficientSet, theta: CovarianceSet,
                  i: int, t: float, x, y) -> float:
    """r_i(t,x,y) = b_i(t,x) - b_bar_i(t,y) + G(Hsym_i(t,x) - Hsym_bar_i(t,y))."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    try:
        bx = float(cX.eval_b(t, x)[..., i])
        by = float(cY.eval_b(t, y)[..., i])
        m = _sym_h_component(cX, i, t, x) - _sym_h_component(cY, i, t, y)
    except Exception as exc:  # noqa: BLE001 - surfaced with the sample point
        raise EvaluationError(f"coefficient evaluation failed at t={t}, x={x.tolist()}, "
                              f"y={y.tolist()}: {exc}") from exc
    return bx - by + eval_G(m, theta)


def direction_residual(cX: CoefficientSet, cY: CoefficientSet, theta: CovarianceSet,
                       t: float, x, K, flip: bool) -> float:
    """<K, b_bar - b> + G([<K, Hsym_bar - Hsym>]) at x; flip swaps the roles.

    flip=False is the D5 orientation (cY minus cX); flip=True gives the D2'
    orientation (cX minus cY).
    """
    x = np.asarray(x, dtype=float)
    K = np.asarray(K, dtype=float)
    lo, hi = (cX, cY) if not flip else (cY, cX)
    try:
        drift = float(np.dot(K, hi.eval_b(t, x) - lo.eval_b(t, x)))
        d = cX.d
        m = np.empty((d, d))
        for l in range(d):
            for k in range(d):
                diff = (hi.eval_h(l, k, t, x) + hi.eval_h(k, l, t, x)
                        - lo.eval_h(l, k, t, x) - lo.eval_h(k, l, t, x))
                m[l, k] = float(np.dot(K, diff))
    except Exception as exc:  # noqa: BLE001
        raise EvaluationError(f"coefficient evaluation failed at t={t}, "
                              f"x={x.tolist()}: {exc}") from exc
    return drift + eval_G(m, theta)


def _pattern_search(objective, z0: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                    project, n_iters: int = 60) -> tuple[float, np.ndarray]:
    """Deterministic coordinate pattern search maximizing ``objective``.

    ``project`` restores feasibility exactly after every trial move, so
    constraint structure (ties, ordering) is never merely penalized.
    """
    z = project(np.clip(z0, lo, hi))
    best = objective(z)
    step = 0.25 * (hi - lo)
    for _ in range(n_iters):
        improved = False
        for c in range(z.size):
            for direction in (+1.0, -1.0):
                trial = z.copy()
                trial[c] = trial[c] + direction * step[c]
                trial = project(np.clip(trial, lo, hi))
                val = objective(trial)
                if val > best:
                    best, z, improved = val, trial, True
        if not improved:
            step *= 0.5
            if np.max(step) < 1e-9 * np.max(hi - lo):
                break
    return best, z


def _record_indices(values: list[float]) -> list[int]:
    """Indices of strict running maxima, in stream order.

    Records of a stream prefix are records of the full stream, which makes
    the refinement pool grow monotonically with the sample budget; combined
    with seeded extra restarts this keeps max_violation nondecreasing in
    both n_samples and n_refine.
    """
    out, best = [], -np.inf
    for idx, v in enumerate(values):
        if v > best:
            out.append(idx)
            best = v
    return out


def _search_pair_condition(condition: str, cX: CoefficientSet, cY: CoefficientSet,
                           theta: CovarianceSet, dom: SearchDomain,
                           tol_factor: float = 1e-8) -> CheckReport:
    """Shared search engine for B1 / C2 / C2' / D2 / D4 / D4'.

    Samples constrained pairs by drawing the free endpoint in the box and a
    dominated point tied at coordinate i, then refines the best candidates
    with pattern search over both endpoints.
    """
    n = cX.n
    if dom.dim != n:
        raise DimensionMismatchError(f"domain dim {dom.dim} != state dim {n}")
    lo, hi = dom.box[:, 0], dom.box[:, 1]

    # direction: +1 means the tied pair satisfies x <= y (B1-style);
    # sign: +1 means violation = residual (<= 0 required), -1 the reverse.
    direction = +1.0 if condition in ("B1", "C2", "D4'") else -1.0
    sign = +1.0 if condition in ("B1", "C2", "D4'") else -1.0
    swap_roles = condition == "D4'"

    def residual(i, t, x, y):
        if swap_roles:
            return pair_residual(cY, cX, theta, i, t, x, y)
        return pair_residual(cX, cY, theta, i, t, x, y)

    def violation(i, t, x, y):
        return sign * residual(i, t, x, y)

    def assemble(y_free, u, i):
        """Tied constrained pair from the free endpoint and mixing weights.

        The dominated point is x = lo + u * (y - lo) (or the mirror image for
        the x >= y orientation) with coordinate i tied exactly, so every
        sampled pair satisfies its constraint by construction.
        """
        if direction > 0:
            x = lo + u * (y_free - lo)
        else:
            x = y_free + u * (hi - y_free)
        x[i] = y_free[i]
        assert x[i] == y_free[i]
        assert np.all(x <= y_free) if direction > 0 else np.all(x >= y_free)
        return x, y_free

    def draw_pair(rng):
        return lo + (hi - lo) * rng.uniform(size=n), rng.uniform(size=n)

    candidates = []
    evaluated = 0
    for j in range(dom.n_samples):
        y_free, u = draw_pair(_rng(dom.seed, 1, j))
        for t in dom.t_grid:
            for i in range(n):
                x, y = assemble(y_free, u, i)
                v = violation(i, t, x, y)
                evaluated += 1
                candidates.append((v, i, t, x, y, y_free.copy(), u.copy()))

    starts = [candidates[r] for r in _record_indices([c[0] for c in candidates])]
    for r in range(dom.n_refine):
        y_free, u = draw_pair(_rng(dom.seed, 9, r))
        for t in dom.t_grid:
            for i in range(n):
                x, y = assemble(y_free, u, i)
                starts.append((violation(i, t, x, y), i, t, x, y, y_free, u))

    z_lo = np.concatenate([lo, np.zeros(n)])
    z_hi = np.concatenate([hi, np.ones(n)])

    best_idx = int(np.argmax([c[0] for c in candidates]))
    best_v, best = candidates[best_idx][0], candidates[best_idx]
    for v0, i, t, _, _, y_free, u in starts:
        z0 = np.concatenate([y_free, u])

        def objective(z, i=i, t=t):
            x, y = assemble(z[:n], z[n:], i)
            return violation(i, t, x, y)

        v_ref, z_ref = _pattern_search(objective, z0, z_lo, z_hi, lambda z: z)
        if v_ref > best_v:
            x, y = assemble(z_ref[:n], z_ref[n:], i)
            best_v, best = v_ref, (v_ref, i, t, x, y, None, None)

    _, i, t, x, y, _, _ = best
    scale = max(abs(c[0]) for c in candidates) + abs(best_v)
    tolerance = tol_factor * (1.0 + scale)
    witness = {"i": int(i), "t": float(t), "x": np.asarray(x).tolist(),
               "y": np.asarray(y).tolist(),
               "residual": float(residual(i, t, x, y))}
    return CheckReport(condition=condition, max_violation=float(best_v),
                       witness=witness, tolerance=tolerance,
                       samples_evaluated=evaluated, box=dom.box.tolist())


def check_B1(cX: CoefficientSet, cY: CoefficientSet, theta: CovarianceSet,
             dom: SearchDomain) -> CheckReport:
    """Drift/loading ordering over tied pairs x <= y with x_i = y_i."""
    return _search_pair_condition("B1", cX, cY, theta, dom)


def dependency_violation(func, coords, t: float, x, x_prime) -> float:
    """|func(t, x') - func(t, x)| for x' differing from x off ``coords`` only."""
    return abs(float(func(t, np.asarray(x_prime, dtype=float)))
               - float(func(t, np.asarray(x, dtype=float))))


def check_dependency(func, allowed_coords, dom: SearchDomain,
                     condition: str = "dependency", tol_factor: float = 1e-9
                     ) -> CheckReport:
    """Does ``func(t, x)`` depend only on the coordinates in ``allowed_coords``?

    Maximizes |func(t, x + delta) - func(t, x)| over perturbations supported
    off the allowed set.  ``allowed_coords`` uses 0-based indices.
    """
    n = dom.dim
    allowed = sorted(set(int(c) for c in allowed_coords))
    free = [c for c in range(n) if c not in allowed]
    lo, hi = dom.box[:, 0], dom.box[:, 1]

    def assemble(x, x_alt):
        x_prime = x_alt.copy()
        x_prime[allowed] = x[allowed]
        return x_prime

    def draw(rng):
        x = lo + (hi - lo) * rng.uniform(size=n)
        x_alt = lo + (hi - lo) * rng.uniform(size=n)
        return x, x_alt

    candidates = []
    evaluated = 0
    scale = 0.0
    for j in range(dom.n_samples):
        x, x_alt = draw(_rng(dom.seed, 2, j))
        x_prime = assemble(x, x_alt)
        for t in dom.t_grid:
            fx = float(func(t, x))
            v = abs(float(func(t, x_prime)) - fx)
            evaluated += 1
            scale = max(scale, abs(fx))
            candidates.append((v, t, x.copy(), x_alt.copy()))

    best_idx = int(np.argmax([c[0] for c in candidates]))
    best_v, best_t, best_x, best_alt = candidates[best_idx]
    if free:
        starts = [candidates[r] for r in _record_indices([c[0] for c in candidates])]
        for r in range(dom.n_refine):
            x, x_alt = draw(_rng(dom.seed, 10, r))
            for t in dom.t_grid:
                starts.append((dependency_violation(func, allowed, t, x, assemble(x, x_alt)),
                               t, x, x_alt))
        z_lo = np.concatenate([lo, lo])
        z_hi = np.concatenate([hi, hi])
        for v0, t, x0, alt0 in starts:
            z0 = np.concatenate([x0, alt0])

            def objective(z, t=t):
                x, x_alt = z[:n], z[n:]
                return dependency_violation(func, allowed, t, x, assemble(x, x_alt))

            v_ref, z_ref = _pattern_search(objective, z0, z_lo, z_hi, lambda z: z)
            if v_ref > best_v:
                best_v, best_t, best_x, best_alt = v_ref, t, z_ref[:n], z_ref[n:]

    x_prime = assemble(np.asarray(best_x), np.asarray(best_alt))
    witness = {"t": float(best_t), "x": np.asarray(best_x).tolist(),
               "x_prime": x_prime.tolist(), "allowed_coords": allowed}
    return CheckReport(condition=condition, max_violation=float(best_v),
                       witness=witness, tolerance=tol_factor * (1.0 + scale),
                       samples_evaluated=evaluated, box=dom.box.tolist())


def _merge_reports(condition: str, parts: list[tuple[dict, CheckReport]],
                   evaluated_extra: int = 0) -> CheckReport:
    worst_tag, worst = max(parts, key=lambda p: p[1].max_violation)
    witness = dict(worst.witness)
    witness.update(worst_tag)
    return CheckReport(
        condition=condition,
        max_violation=worst.max_violation,
        witness=witness,
        tolerance=worst.tolerance,
        samples_evaluated=sum(p[1].samples_evaluated for p in parts) + evaluated_extra,
        box=worst.box,
    )


def sigma_product(c: CoefficientSet, l: int, k: int, i: int, j: int):
    """The scalar map x -> (sigma_l)_i(x) * (sigma_k)_j(x)."""

    def func(t, x):
        return float(c.eval_sigma(l, t, x)[..., i] * c.eval_sigma(k, t, x)[..., j])

    return func


def check_C1(c: CoefficientSet, dom: SearchDomain, condition: str = "C1") -> CheckReport:
    """Every product (sigma_l)_i (sigma_k)_j depends only on {x_i, x_j}."""
    parts = []
    for l in range(c.d):
        for k in range(c.d):
            for i in range(c.n):
                for j in range(c.n):
                    rep = check_dependency(sigma_product(c, l, k, i, j), {i, j}, dom,
                                           condition=condition)
                    parts.append(({"l": l, "k": k, "i": i, "j": j}, rep))
    return _merge_reports(condition, parts)


def check_C_family(c: CoefficientSet, theta: CovarianceSet, dom: SearchDomain,
                   variant: str) -> CheckReport:
    """Monotonicity conditions: C1 (diffusion structure), C2 / C2' (drift and
    loadings against themselves over tied ordered pairs)."""
    if variant == "C1":
        return check_C1(c, dom)
    if variant in ("C2", "C2'"):
        return _search_pair_condition(variant, c, c, theta, dom)
    raise DimensionMismatchError(f"unknown C-variant {variant!r}")


def check_B2(cX: CoefficientSet, cY: CoefficientSet, dom: SearchDomain) -> CheckReport:
    """Shared diffusion with per-coordinate loadings.

    Audits (sigma_l)_k(x) == (sigma_bar_l)_k(x) on samples and searches for
    dependence of (sigma_l)_k on coordinates other than x_k.
    """
    parts = []
    n, d = cX.n, cX.d
    lo, hi = dom.box[:, 0], dom.box[:, 1]
    eq_violation, eq_witness, eq_scale = 0.0, None, 0.0
    evaluated = 0
    for j in range(min(dom.n_samples, 256)):
        rng = _rng(dom.seed, 3, j)
        x = lo + (hi - lo) * rng.uniform(size=n)
        for t in dom.t_grid:
            sx = cX.sigma_matrix(t, x)
            sy = cY.sigma_matrix(t, x)
            evaluated += 1
            eq_scale = max(eq_scale, float(np.max(np.abs(sx))))
            diff = float(np.max(np.abs(sx - sy)))
            if diff > eq_violation:
                flat = int(np.argmax(np.abs(sx - sy)))
                k, l = divmod(flat, d)
                eq_violation = diff
                eq_witness = {"t": float(t), "x": x.tolist(), "k": k, "l": l,
                              "kind": "sigma-shared"}
    eq_report = CheckReport(condition="B2", max_violation=eq_violation,
                            witness=eq_witness or {"kind": "sigma-shared"},
                            tolerance=1e-9 * (1.0 + eq_scale),
                            samples_evaluated=evaluated, box=dom.box.tolist())
    parts.append(({"kind": "sigma-shared"}, eq_report))

    for l in range(d):
        for k in range(n):
            def comp(t, x, l=l, k=k):
                return float(cX.eval_sigma(l, t, x)[..., k])

            rep = check_dependency(comp, {k}, dom, condition="B2")
            parts.append(({"l": l, "k": k, "kind": "sigma-dependency"}, rep))
    return _merge_reports("B2", parts)


def _search_direction_condition(condition: str, cX: CoefficientSet, cY: CoefficientSet,
                                theta: CovarianceSet, dom: SearchDomain,
                                n_directions: int = 128,
                                tol_factor: float = 1e-8) -> CheckReport:
    """D5 / D2': maximize the direction residual over x in the box and K on
    the nonnegative unit sphere.

    The residual is positively homogeneous in K, so unit directions suffice;
    the top candidates are refined jointly over (x, K).
    """
    n = cX.n
    flip = condition == "D2'"
    sign = -1.0 if condition == "D2'" else +1.0  # D2' requires residual >= 0
    lo, hi = dom.box[:, 0], dom.box[:, 1]

    def unit(K):
        norm = float(np.linalg.norm(K))
        return K / norm if norm > 1e-12 else None

    dir_rng = _rng(dom.seed, 4)
    directions = np.abs(dir_rng.standard_normal((n_directions, n)))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    # include the coordinate axes so componentwise violations are never missed
    directions = np.concatenate([np.eye(n), directions])

    def violation(t, x, K):
        return sign * direction_residual(cX, cY, theta, t, x, K, flip=flip)

    candidates = []
    evaluated = 0
    for j in range(dom.n_samples):
        rng = _rng(dom.seed, 5, j)
        x = lo + (hi - lo) * rng.uniform(size=n)
        for t in dom.t_grid:
            for K in directions:
                v = violation(t, x, K)
                evaluated += 1
                candidates.append((v, t, x.copy(), K.copy()))

    best_idx = int(np.argmax([c[0] for c in candidates]))
    best_v, best_t, best_x, best_K = candidates[best_idx]
    starts = [candidates[r] for r in _record_indices([c[0] for c in candidates])]
    for r in range(dom.n_refine):
        rng = _rng(dom.seed, 11, r)
        x = lo + (hi - lo) * rng.uniform(size=n)
        K = unit(np.abs(rng.standard_normal(n)))
        for t in dom.t_grid:
            starts.append((violation(t, x, K), t, x, K))

    z_lo = np.concatenate([lo, np.zeros(n)])
    z_hi = np.concatenate([hi, np.ones(n)])
    for v0, t, x0, K0 in starts:
        z0 = np.concatenate([x0, K0])

        def objective(z, t=t):
            K = unit(z[n:])
            if K is None:
                return -np.inf
            return violation(t, z[:n], K)

        v_ref, z_ref = _pattern_search(objective, z0, z_lo, z_hi, lambda z: z)
        K_ref = unit(z_ref[n:])
        if K_ref is not None and v_ref > best_v:
            best_v, best_t, best_x, best_K = v_ref, t, z_ref[:n], K_ref

    scale = max(abs(c[0]) for c in candidates) + abs(best_v)
    witness = {"t": float(best_t), "x": np.asarray(best_x).tolist(),
               "K": np.asarray(best_K).tolist(),
               "residual": float(direction_residual(cX, cY, theta, best_t, best_x,
                                                    best_K, flip=flip))}
    return CheckReport(condition=condition, max_violation=float(best_v),
                       witness=witness, tolerance=tol_factor * (1.0 + scale),
                       samples_evaluated=evaluated, box=dom.box.tolist())


def check_D1(cX: CoefficientSet, cY: CoefficientSet, dom: SearchDomain) -> CheckReport:
    """Product equality sigma_il sigma_jk == sigma_bar_il sigma_bar_jk plus
    the C1-style dependency requirement on the products."""
    parts = []
    n, d = cX.n, cX.d
    lo, hi = dom.box[:, 0], dom.box[:, 1]
    eq_violation, eq_witness, eq_scale, evaluated = 0.0, None, 0.0, 0
    for j in range(min(dom.n_samples, 256)):
        rng = _rng(dom.seed, 6, j)
        x = lo + (hi - lo) * rng.uniform(size=n)
        for t in dom.t_grid:
            sx = cX.sigma_matrix(t, x)  # (n, d)
            sy = cY.sigma_matrix(t, x)
            px = np.einsum("il,jk->iljk", sx, sx)
            py = np.einsum("il,jk->iljk", sy, sy)
            evaluated += 1
            eq_scale = max(eq_scale, float(np.max(np.abs(px))))
            diff = float(np.max(np.abs(px - py)))
            if diff > eq_violation:
                flat = int(np.argmax(np.abs(px - py)))
                idx = np.unravel_index(flat, px.shape)
                eq_violation = diff
                eq_witness = {"t": float(t), "x": x.tolist(),
                              "i": int(idx[0]), "l": int(idx[1]),
                              "j": int(idx[2]), "k": int(idx[3]),
                              "kind": "product-equality"}
    eq_report = CheckReport(condition="D1", max_violation=eq_violation,
                            witness=eq_witness or {"kind": "product-equality"},
                            tolerance=1e-9 * (1.0 + eq_scale),
                            samples_evaluated=evaluated, box=dom.box.tolist())
    parts.append(({"kind": "product-equality"}, eq_report))
    parts.append(({"kind": "product-dependency"}, check_C1(cX, dom, condition="D1")))
    return _merge_reports("D1", parts)


def check_D_family(cX: CoefficientSet, cY: CoefficientSet, theta: CovarianceSet,
                   dom: SearchDomain, variant: str) -> CheckReport:
    """Order-preservation conditions D1 .. D5 (see module docstring)."""
    if variant == "D1":
        return check_D1(cX, cY, dom)
    if variant == "D3":
        return check_C1(cX, dom, condition="D3")
    if variant in ("D2", "D4", "D4'"):
        return _search_pair_condition(variant, cX, cY, theta, dom)
    if variant in ("D2'", "D5"):
        return _search_direction_condition(variant, cX, cY, theta, dom)
    raise DimensionMismatchError(f"unknown D-variant {variant!r}")


def re_evaluate(report: CheckReport, cX: CoefficientSet, cY: CoefficientSet | None,
                theta: CovarianceSet) -> float:
    """Recompute the violation at a report's witness.

    Soundness contract: the returned value matches ``report.max_violation``
    to within 1e-12.
    """
    cY = cX if cY is None else cY
    w = report.witness
    cond = report.condition
    if cond in PAIR_CONDITIONS:
        sign = +1.0 if cond in ("B1", "C2", "D4'") else -1.0
        if cond == "D4'":
            return sign * pair_residual(cY, cX, theta, w["i"], w["t"], w["x"], w["y"])
        return sign * pair_residual(cX, cY, theta, w["i"], w["t"], w["x"], w["y"])
    if cond in DIRECTION_CONDITIONS:
        sign = -1.0 if cond == "D2'" else +1.0
        return sign * direction_residual(cX, cY, theta, w["t"], w["x"], w["K"],
                                         flip=(cond == "D2'"))
    kind = w.get("kind", "")
    if kind == "sigma-shared":
        x = np.asarray(w["x"], dtype=float)
        sx = cX.sigma_matrix(w["t"], x)
        sy = cY.sigma_matrix(w["t"], x)
        return abs(float(sx[w["k"], w["l"]] - sy[w["k"], w["l"]]))
    if kind == "sigma-dependency":
        def comp(t, x, l=w["l"], k=w["k"]):
            return float(cX.eval_sigma(l, t, x)[..., k])
        return dependency_violation(comp, w["allowed_coords"], w["t"], w["x"], w["x_prime"])
    if kind == "product-equality":
        x = np.asarray(w["x"], dtype=float)
        px = sigma_product(cX, w["l"], w["k"], w["i"], w["j"])(w["t"], x)
        py = sigma_product(cY, w["l"], w["k"], w["i"], w["j"])(w["t"], x)
        return abs(px - py)
    # product dependency (C1 / D1 / D3)
    func = sigma_product(cX, w["l"], w["k"], w["i"], w["j"])
    return dependency_violation(func, w["allowed_coords"], w["t"], w["x"], w["x_prime"])


def run_check(condition: str, cX: CoefficientSet, cY: CoefficientSet | None,
              theta: CovarianceSet, dom: SearchDomain) -> CheckReport:
    """Dispatch a named condition check; cY defaults to cX."""
    cY = cX if cY is None else cY
    if condition == "B1":
        return check_B1(cX, cY, theta, dom)
    if condition == "B2":
        return check_B2(cX, cY, dom)
    if condition in ("C1", "C2", "C2'"):
        return check_C_family(cX, theta, dom, condition)
    if condition in ("D1", "D2", "D2'", "D3", "D4", "D4'", "D5"):
        return check_D_family(cX, cY, theta, dom, condition)
    raise DimensionMismatchError(f"unknown condition {condition!r}")
