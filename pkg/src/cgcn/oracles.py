"""Independent reference computations used to validate the implementation.

Each suite builds its own reference from scalar arithmetic, dense
eigensolvers or exhaustive grids and compares it against the code under
test. Suites return :class:`OracleReport` rows; :func:`run_all` runs them
all with fixed seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .factorization import factorize_exact, nystrom
from .kernels import KernelSpec, build_kernel_matrix, eval_kernel
from .model import Readout
from .optim import NuclearBall, nuclear_budget, project_nuclear
from .synthetic import ring_path_task, ring_path_toy
from .trainer import TrainConfig, layer_designs, layer_objective_and_gradient, solve_layer, train_layerwise

SERIES_TOL = 1e-6
GRID_TOL = 2e-3
FD_TOL = 1e-4
OPTIMUM_RTOL = 1e-3
PSD_TOL = 1e-8
CONVEXITY_TOL = 1e-9


@dataclass(frozen=True)
class OracleReport:
    name: str
    cases: int
    max_deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_deviation <= self.tolerance)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: cases={self.cases} max_dev={self.max_deviation:.3e} tol={self.tolerance:.1e}"


# -- primitive oracles ---------------------------------------------------------


def mercer_series_ip(z, z2, terms: int) -> float:
    """Partial sum ``sum_{j < terms} 2^{-(j+1)} <z, z2>^j`` of the
    inverse-polynomial kernel's power series."""
    t = sum(float(a) * float(b) for a, b in zip(z, z2))
    total, power = 0.0, 1.0
    for j in range(terms):
        total += power / 2.0 ** (j + 1)
        power *= t
    return total


def _rot(angle):
    c, s = np.cos(angle), np.sin(angle)
    return c, s


def _grid_search(a, radius, thetas, phis, s1_values):
    """Best ``X = R(theta) diag(s1, s2) R(phi)^T`` on the given grids.

    ``s2`` is chosen in closed form for each ``s1``: the cost separates and
    the feasible interval for ``s2`` is ``|s2| <= radius - |s1|``.
    """
    ct, st = _rot(thetas[:, None])
    cp, sp = _rot(phis[None, :])
    # b = R(theta)^T A R(phi); only the diagonal couples to s
    u11, u12, u21, u22 = ct, -st, st, ct
    v11, v12, v21, v22 = cp, -sp, sp, cp
    a11, a12, a21, a22 = a[0, 0], a[0, 1], a[1, 0], a[1, 1]
    av11 = a11 * v11 + a12 * v21
    av12 = a11 * v12 + a12 * v22
    av21 = a21 * v11 + a22 * v21
    av22 = a21 * v12 + a22 * v22
    b11 = u11 * av11 + u21 * av21
    b22 = u12 * av12 + u22 * av22
    total = a11**2 + a12**2 + a21**2 + a22**2
    off = total - b11**2 - b22**2
    s1 = s1_values[None, None, :]
    room = np.maximum(radius - np.abs(s1), 0.0)
    s2 = np.clip(b22[..., None], -room, room)
    cost = off[..., None] + (s1 - b11[..., None]) ** 2 + (s2 - b22[..., None]) ** 2
    flat = int(np.argmin(cost))
    i, j, k = np.unravel_index(flat, cost.shape)
    return float(cost[i, j, k]), thetas[i], phis[j], float(s1_values[k]), float(s2[i, j, k])


def _compose(theta, phi, s1, s2) -> np.ndarray:
    ct, st = _rot(theta)
    cp, sp = _rot(phi)
    u = np.array([[ct, -st], [st, ct]])
    v = np.array([[cp, -sp], [sp, cp]])
    return u @ np.diag([s1, s2]) @ v.T


def brute_force_nuclear_projection(a, radius: float, step: float = 1e-3) -> np.ndarray:
    """Nearest point to a 2x2 matrix inside the nuclear ball by grid search.

    Rotation angles and the first singular value are searched on grids
    that end at spacing ``step``. A coarse pass over the full range picks
    a few candidates which are then refined locally.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (2, 2):
        raise ValueError("brute-force projection is 2x2 only")
    frob = math.sqrt(float((a * a).sum()))
    smax = min(radius, frob)
    if smax == 0.0:
        return np.zeros((2, 2))
    coarse = 0.05
    angles = np.arange(0.0, math.pi, coarse)
    s_coarse = np.linspace(-smax, smax, max(int(2 * smax / 0.01) + 1, 3))
    # keep several coarse candidates: one per theta row
    results = []
    for th in angles:
        results.append(_grid_search(a, radius, np.array([th]), angles, s_coarse))
    results.sort(key=lambda r: r[0])
    best = None
    for _, th, ph, s1, _ in results[:4]:
        thetas = th + np.arange(-coarse, coarse + step / 2, step)
        phis = ph + np.arange(-coarse, coarse + step / 2, step)
        s_lo, s_hi = max(s1 - 0.02, -smax), min(s1 + 0.02, smax)
        s_fine = np.arange(s_lo, s_hi + step / 2, step)
        cand = _grid_search(a, radius, thetas, phis, s_fine)
        if best is None or cand[0] < best[0]:
            best = cand
    _, th, ph, s1, s2 = best
    return _compose(th, ph, s1, s2)


def psd_check(k) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    k = np.asarray(k, dtype=np.float64)
    if k.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(k)[0])


def _unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    z = rng.standard_normal((n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


# -- suites --------------------------------------------------------------------


def mercer_suite(seed: int, cases: int = 100, terms: int = 60) -> OracleReport:
    """Truncated series vs the implemented inverse-polynomial kernel on
    vectors of norm at most 0.9."""
    rng = np.random.default_rng([seed, 1])
    spec = KernelSpec("inverse-polynomial")
    dev = 0.0
    for _ in range(cases):
        d = int(rng.integers(1, 8))
        z, z2 = _unit_rows(rng, 2, d) * rng.uniform(0, 0.9, size=(2, 1))
        dev = max(dev, abs(mercer_series_ip(z, z2, terms) - eval_kernel(spec, z, z2)))
    return OracleReport("mercer-series", cases, dev, SERIES_TOL)


def projection_suite(
    seed: int,
    cases: int = 50,
    project: Callable[[np.ndarray, NuclearBall], np.ndarray] = project_nuclear,
) -> OracleReport:
    """``project`` vs the grid-search projection on random 2x2 matrices."""
    rng = np.random.default_rng([seed, 2])
    dev = 0.0
    for _ in range(cases):
        a = rng.normal(scale=1.5, size=(2, 2))
        radius = float(rng.uniform(0.3, 3.0))
        ref = brute_force_nuclear_projection(a, radius)
        got = np.asarray(project(a, NuclearBall(radius)))
        dev = max(dev, float(np.abs(got - ref).max()))
    return OracleReport("nuclear-projection", cases, dev, GRID_TOL)


def psd_suite(seed: int, cases: int = 100) -> OracleReport:
    """Negative part of the smallest eigenvalue over random kernel matrices."""
    rng = np.random.default_rng([seed, 3])
    worst = 0.0
    for i in range(cases):
        spec = KernelSpec("inverse-polynomial") if i % 2 else KernelSpec("gaussian-rbf", float(rng.uniform(0.05, 2.0)))
        n, d = int(rng.integers(1, 21)), int(rng.integers(1, 6))
        worst = max(worst, -psd_check(build_kernel_matrix(spec, _unit_rows(rng, n, d))))
    return OracleReport("psd-sweep", cases, worst, PSD_TOL)


def _random_layer_problem(rng: np.random.Generator):
    m, d = int(rng.integers(3, 9)), int(rng.integers(2, 7))
    f_out, g = int(rng.integers(1, 5)), int(rng.integers(2, 4))
    pooled = rng.normal(scale=2.0, size=(m, d))
    labels = rng.integers(g, size=m)
    readout = Readout(rng.standard_normal((f_out, g)), rng.standard_normal(g))
    return pooled, labels, readout, (d, f_out)


def gradient_suite(seed: int, cases: int = 20, eps: float = 1e-5) -> OracleReport:
    """Closed-form gradient vs central differences of the layer objective.

    Relative error is taken entrywise against ``max(|g|, |fd|, 1e-6)``.
    """
    rng = np.random.default_rng([seed, 4])
    dev = 0.0
    for _ in range(cases):
        pooled, labels, readout, shape = _random_layer_problem(rng)
        a = rng.normal(scale=0.3, size=shape)
        res = layer_objective_and_gradient(a, pooled, labels, readout)
        fd = np.zeros(shape)
        for idx in np.ndindex(*shape):
            e = np.zeros(shape)
            e[idx] = eps
            hi = layer_objective_and_gradient(a + e, pooled, labels, readout).value
            lo = layer_objective_and_gradient(a - e, pooled, labels, readout).value
            fd[idx] = (hi - lo) / (2 * eps)
        fd_b = np.zeros_like(readout.bias)
        for i in range(len(fd_b)):
            e = np.zeros_like(fd_b)
            e[i] = eps
            hi = layer_objective_and_gradient(a, pooled, labels, Readout(readout.matrix, readout.bias + e)).value
            lo = layer_objective_and_gradient(a, pooled, labels, Readout(readout.matrix, readout.bias - e)).value
            fd_b[i] = (hi - lo) / (2 * eps)
        for g, f in ((res.grad, fd), (res.grad_bias, fd_b)):
            scale = np.maximum(np.maximum(np.abs(g), np.abs(f)), 1e-6)
            dev = max(dev, float((np.abs(g - f) / scale).max()))
    return OracleReport("gradient-fd", cases, dev, FD_TOL)


def _two_layer_designs(seed: int):
    ds = ring_path_task(24, seed)
    cfg = TrainConfig(hidden_widths=(4,), landmarks=8, epochs=3, seed=seed)
    model, _ = train_layerwise(ds, cfg)
    readouts = list(model.hidden_readouts) + [model.readout]
    return ds.labels, list(zip(layer_designs(model, ds), readouts))


def convexity_suite(seed: int, cases: int = 100) -> OracleReport:
    """Jensen gap ``J(lA + (1-l)B) - lJ(A) - (1-l)J(B)`` on every layer
    objective of a small trained two-layer model."""
    rng = np.random.default_rng([seed, 5])
    labels, layers = _two_layer_designs(seed)
    worst, n = -math.inf, 0
    for pooled, readout in layers:
        shape = (pooled.shape[1], readout.matrix.shape[0])
        scale = 3.0 / max(float(np.abs(pooled).max()), 1e-12)
        for _ in range(cases):
            a, b = rng.normal(scale=scale, size=(2, *shape))
            lam = float(rng.uniform())
            j = lambda x: layer_objective_and_gradient(x, pooled, labels, readout).value
            worst = max(worst, j(lam * a + (1 - lam) * b) - lam * j(a) - (1 - lam) * j(b))
            n += 1
    return OracleReport("convexity", n, max(worst, 0.0), CONVEXITY_TOL)


def budget_bound_draws(seed: int, cases: int = 200, radius: float = 1.0):
    """Filters with per-hop, per-output columns of l2 norm at most ``radius``.

    Each draw is laid out as ``F_in x (K+1) F_out`` (one column per hop and
    output feature). Returns ``(excess, adversarial_norm, adversarial_bound)``
    where ``excess`` is the largest ``||A||_* - bound`` over the constrained
    draws and the adversarial pair comes from a draw with columns of norm
    ``2 * radius``.
    """
    rng = np.random.default_rng([seed, 6])
    excess = -math.inf
    for i in range(cases):
        f_in, f_out, k = int(rng.integers(1, 7)), int(rng.integers(1, 7)), int(rng.integers(0, 4))
        cols = rng.standard_normal((f_in, (k + 1) * f_out))
        norms = np.linalg.norm(cols, axis=0)
        # half the draws sit exactly on the constraint boundary
        target = radius if i % 2 else radius * rng.uniform(size=cols.shape[1])
        a = cols / norms * target
        sv = np.linalg.svd(a, compute_uv=False)
        excess = max(excess, float(sv.sum()) - nuclear_budget(radius, f_in, f_out, k))
    f_in, f_out, k = 3, 2, 1
    cols = rng.standard_normal((f_in, (k + 1) * f_out))
    adv = cols / np.linalg.norm(cols, axis=0) * 2 * radius
    return excess, float(np.linalg.svd(adv, compute_uv=False).sum()), nuclear_budget(radius, f_in, f_out, k)


def budget_bound_suite(seed: int, cases: int = 200) -> OracleReport:
    excess, _, _ = budget_bound_draws(seed, cases)
    return OracleReport("budget-bound", cases, max(excess, 0.0), 1e-9)


def toy_layer_problem():
    """Pooled design and budget of the one-layer ring/path toy problem."""
    ds = ring_path_toy()
    cfg = TrainConfig(
        hidden_widths=(),
        shift_kind="normalized-laplacian",
        factorization="exact",
        optimizer="projected-gd",
        auto_step=True,
        epochs=1,
    )
    model, _ = train_layerwise(ds, cfg)
    return ds, cfg, layer_designs(model, ds)[0], model.layers[0].budget


def init_independence_suite(seed: int, epochs: int = 20000) -> OracleReport:
    """Relative gap between final objectives of two projected-gd runs from
    different random starts on the ring/path toy."""
    ds, cfg, pooled, budget = toy_layer_problem()
    cfg = replace(cfg, epochs=epochs)
    rng = np.random.default_rng([seed, 8])
    finals = []
    for _ in range(2):
        init = rng.standard_normal((pooled.shape[1], ds.num_classes))
        _, _, trace = solve_layer(pooled, ds.labels, np.eye(ds.num_classes), budget, cfg, init=init)
        finals.append(trace.objectives[-1])
    rel = abs(finals[0] - finals[1]) / max(abs(finals[0]), abs(finals[1]), 1e-12)
    return OracleReport("init-independence", 2, rel, OPTIMUM_RTOL)


def nystrom_errors(seed: int, n: int = 40, dim: int = 6, p_values=(5, 10, 20, 40), draws: int = 10, gamma: float = 0.2):
    """Mean relative Frobenius error of ``Q Q^T`` against the dense kernel
    matrix for each landmark count, averaged over ``draws`` landmark seeds."""
    rng = np.random.default_rng([seed, 9])
    spec = KernelSpec("gaussian-rbf", gamma)
    z = _unit_rows(rng, n, dim)
    diff = z[:, None, :] - z[None, :, :]
    k = np.exp(-gamma * (diff * diff).sum(axis=2))
    out = []
    for p in p_values:
        errs = []
        for s in range(draws):
            q = nystrom(spec, z, p, seed=[seed, s]).q_matrix
            errs.append(np.linalg.norm(k - q @ q.T) / np.linalg.norm(k))
        out.append(float(np.mean(errs)))
    return k, out


def nystrom_monotone_suite(seed: int) -> OracleReport:
    _, errs = nystrom_errors(seed)
    worst = max(b - a for a, b in zip(errs[:-1], errs[1:]))
    return OracleReport("nystrom-monotone", len(errs), max(worst, 0.0), 1e-12)


def nystrom_full_suite(seed: int) -> OracleReport:
    _, errs = nystrom_errors(seed, p_values=(40,), draws=3)
    return OracleReport("nystrom-full-rank", 3, errs[0], 1e-6)


def exact_reconstruction_suite(seed: int, cases: int = 20) -> OracleReport:
    """Relative Frobenius error of ``Q Q^T`` for exact factorizations."""
    rng = np.random.default_rng([seed, 10])
    dev = 0.0
    for i in range(cases):
        spec = KernelSpec("inverse-polynomial") if i % 2 else KernelSpec("gaussian-rbf")
        z = _unit_rows(rng, int(rng.integers(2, 30)), int(rng.integers(1, 6)))
        k = np.array([[eval_kernel(spec, a, b) for b in z] for a in z])
        q = factorize_exact(k).q_matrix
        dev = max(dev, float(np.linalg.norm(k - q @ q.T) / np.linalg.norm(k)))
    return OracleReport("exact-reconstruction", cases, dev, 1e-8)


SUITES: dict[str, Callable[[int], OracleReport]] = {
    "convexity": convexity_suite,
    "exact-reconstruction": exact_reconstruction_suite,
    "gradient-fd": gradient_suite,
    "init-independence": init_independence_suite,
    "budget-bound": budget_bound_suite,
    "mercer-series": mercer_suite,
    "nuclear-projection": projection_suite,
    "nystrom-full-rank": nystrom_full_suite,
    "nystrom-monotone": nystrom_monotone_suite,
    "psd-sweep": psd_suite,
}


def run_all(seed: int = 0) -> list[OracleReport]:
    """Run every suite with ``seed``; reports are sorted by name."""
    return sorted((suite(seed) for suite in SUITES.values()), key=lambda r: r.name)


def write_summary(reports, path) -> None:
    """One tab-separated line per report: name, pass flag, max deviation."""
    lines = [f"{r.name}\t{'pass' if r.passed else 'fail'}\t{r.max_deviation:.6e}" for r in reports]
    Path(path).write_text("\n".join(lines) + "\n")
