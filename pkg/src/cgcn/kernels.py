"""Kernel functions, kernel matrices and activation smoothness bounds.

Two kernels are supported on vectors in the unit l2 ball:

* inverse polynomial, ``k(z, z') = 1 / (2 - <z, z'>)``
* Gaussian RBF, ``k(z, z') = exp(-gamma * ||z - z'||^2)``
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

KERNEL_KINDS = ("inverse-polynomial", "gaussian-rbf")
DEFAULT_GAMMA = 0.2
# slack on the unit-ball precondition of the inverse polynomial kernel
NORM_SLACK = 1e-9


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "gaussian-rbf"
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian-rbf" and not self.gamma > 0:
            raise ValueError("gamma must be positive for the RBF kernel")


def _as_rows(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    return z.reshape(1, -1) if z.ndim == 1 else z


def _check_ball(spec: KernelSpec, *arrays: np.ndarray) -> None:
    if spec.kind != "inverse-polynomial":
        return
    for a in arrays:
        if a.size and np.max(np.linalg.norm(a, axis=1)) > 1.0 + NORM_SLACK:
            raise ValueError("inverse polynomial kernel requires inputs in the unit l2 ball")


def kernel_block(spec: KernelSpec, a, b) -> np.ndarray:
    """Kernel values between every row of ``a`` and every row of ``b``."""
    a, b = _as_rows(a), _as_rows(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    _check_ball(spec, a, b)
    if spec.kind == "inverse-polynomial":
        return 1.0 / (2.0 - a @ b.T)
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.exp(-spec.gamma * np.maximum(sq, 0.0))


def eval_kernel(spec: KernelSpec, z, z2) -> float:
    z = np.asarray(z, dtype=np.float64).ravel()
    z2 = np.asarray(z2, dtype=np.float64).ravel()
    if z.shape != z2.shape:
        raise ValueError(f"dimension mismatch: {z.shape} vs {z2.shape}")
    _check_ball(spec, z[None], z2[None])
    if spec.kind == "inverse-polynomial":
        return 1.0 / (2.0 - float(z @ z2))
    d = z - z2
    return math.exp(-spec.gamma * float(d @ d))


def build_kernel_matrix(spec: KernelSpec, vectors) -> np.ndarray:
    """Dense kernel matrix over ``vectors``, exactly symmetric."""
    v = _as_rows(vectors)
    k = kernel_block(spec, v, v)
    upper = np.triu(k)
    k = upper + np.triu(k, 1).T
    if spec.kind == "gaussian-rbf":
        np.fill_diagonal(k, 1.0)
    return k


def kernel_products_vector(spec: KernelSpec, z, landmarks) -> np.ndarray:
    """Kernel values of ``z`` against each landmark vector."""
    landmarks = np.asarray(landmarks, dtype=np.float64)
    if landmarks.size == 0:
        return np.zeros(0)
    return kernel_block(spec, np.asarray(z, dtype=np.float64).ravel(), landmarks)[0]


# -- activation smoothness ---------------------------------------------------

ACTIVATIONS = ("polynomial", "sinusoid", "erf", "smoothed-hinge")


@dataclass(frozen=True)
class ActivationKind:
    """A smooth activation. ``coefficients`` (Taylor coefficients) only
    apply to polynomials; if omitted the monomial ``t**degree`` is used."""

    name: str
    degree: int = 0
    coefficients: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.name not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.name!r}")
        if self.degree < 0:
            raise ValueError("polynomial degree must be >= 0")

    def taylor(self, terms: int = 80) -> np.ndarray:
        """First ``terms`` Taylor coefficients at 0."""
        a = np.zeros(terms)
        if self.name == "polynomial":
            coef = self.coefficients if self.coefficients is not None else (0.0,) * self.degree + (1.0,)
            a = np.zeros(max(terms, len(coef)))
            a[: len(coef)] = coef
        elif self.name == "sinusoid":
            for j in range(1, terms, 2):
                a[j] = (-1) ** ((j - 1) // 2) / math.factorial(j)
        elif self.name == "erf":
            for n in range((terms - 1) // 2 + 1):
                j = 2 * n + 1
                if j < terms:
                    a[j] = 2.0 / math.sqrt(math.pi) * (-1) ** n / (math.factorial(n) * j)
        else:
            # integral of (erf + 1) / 2 from -inf; value at 0 is 1 / (2 sqrt(pi))
            a[0] = 0.5 / math.sqrt(math.pi)
            if terms > 1:
                a[1] = 0.5
            for n in range(terms):
                j = 2 * n + 2
                if j >= terms:
                    break
                a[j] = (-1) ** n / (math.sqrt(math.pi) * math.factorial(n) * (2 * n + 1) * (2 * n + 2))
        return a


def _series_bound(weights, a: np.ndarray, t: float) -> float:
    total = 0.0
    try:
        for j, aj in enumerate(a):
            if aj != 0.0:
                total += weights(j) * aj * aj * t ** (2 * j)
    except OverflowError:
        return math.inf
    return math.sqrt(total)


def c_sigma_bound(act: ActivationKind, t: float, kernel_kind: str, gamma: float = DEFAULT_GAMMA) -> float:
    """Upper bound on the RKHS norm factor ``C_sigma(t)``.

    Sinusoid uses the closed-form bounds ``2 exp(t^2)`` (inverse polynomial)
    and ``exp(t^2 / (4 gamma) + gamma)`` (RBF). Polynomials, and erf /
    smoothed hinge under the inverse polynomial kernel, are evaluated from
    the defining series. erf and smoothed hinge are not contained in the RBF
    space and return ``inf``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if kernel_kind not in KERNEL_KINDS:
        raise ValueError(f"unknown kernel kind {kernel_kind!r}")
    rbf = kernel_kind == "gaussian-rbf"
    if rbf and not gamma > 0:
        raise ValueError("gamma must be positive for the RBF kernel")
    if act.name == "sinusoid":
        return math.exp(t * t / (4 * gamma) + gamma) if rbf else 2.0 * math.exp(t * t)
    if rbf and act.name in ("erf", "smoothed-hinge"):
        return math.inf
    if rbf:
        weights = lambda j: math.factorial(j) * math.exp(2 * gamma) / (2 * gamma) ** j  # noqa: E731
    else:
        weights = lambda j: 2.0 ** (j + 1)  # noqa: E731
    return _series_bound(weights, act.taylor(), t)
