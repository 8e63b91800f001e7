"""Kernel matrix factorization ``K ~= Q Q^T`` and the induced feature map.

Both the exact factorization and the Nystrom approximation keep a set of
*reference* vectors together with the SVD of the rows of ``Q`` belonging to
them. A query ``z`` is mapped to ``pinv(Q_ref) @ k(z, references)``; for the
exact factorization the references are all training vectors, for Nystrom
they are the sampled landmarks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import KernelSpec, build_kernel_matrix, kernel_block

EIG_CUTOFF = 1e-10
PINV_RCOND = 1e-10
NEG_EIG_TOL = 1e-8


@dataclass(frozen=True)
class FactorizedKernel:
    """Factor ``Q`` (may be ``None`` once only inference is needed), the
    reference vectors used by :func:`map_to_features`, and the stored SVD of
    ``Q_ref``.
    """

    spec: KernelSpec
    hop: int
    references: np.ndarray
    landmark_indices: np.ndarray
    u: np.ndarray
    sigma: np.ndarray
    vt: np.ndarray
    rcond: float = PINV_RCOND
    q_matrix: np.ndarray | None = None

    @property
    def width(self) -> int:
        return self.vt.shape[1]

    @property
    def input_dim(self) -> int:
        return self.references.shape[1]

    def pinv(self) -> np.ndarray:
        """Pseudo-inverse of ``Q_ref`` from the stored SVD, shape ``(P, R)``."""
        keep = self.sigma > self.rcond * (self.sigma[0] if self.sigma.size else 0.0)
        s_inv = np.zeros_like(self.sigma)
        s_inv[keep] = 1.0 / self.sigma[keep]
        return (self.vt.T * s_inv) @ self.u.T


def _svd_payload(q_ref: np.ndarray):
    if q_ref.shape[1] == 0:
        return np.zeros((q_ref.shape[0], 0)), np.zeros(0), np.zeros((0, 0))
    u, s, vt = np.linalg.svd(q_ref, full_matrices=False)
    return u, s, vt


def _psd_factor(k: np.ndarray) -> np.ndarray:
    """``Q`` with ``Q Q^T ~= k`` from a symmetric eigendecomposition."""
    lam, vec = np.linalg.eigh(k)
    top = lam[-1] if lam.size else 0.0
    scale = max(abs(top), 1.0) if lam.size else 1.0
    if lam.size and lam[0] < -NEG_EIG_TOL * scale:
        raise ValueError(f"kernel matrix is not PSD (min eigenvalue {lam[0]:.3e})")
    if top <= 0:
        return np.zeros((k.shape[0], 0)), np.zeros(0), vec[:, :0]
    keep = lam > EIG_CUTOFF * top
    lam, vec = lam[keep][::-1], vec[:, keep][:, ::-1]
    return vec * np.sqrt(lam), lam, vec


def factorize_exact(k_matrix: np.ndarray, spec: KernelSpec | None = None, vectors=None, hop: int = 0) -> FactorizedKernel:
    """Exact factorization of a full kernel matrix.

    Pass the ``vectors`` the matrix was built from to make the result usable
    with :func:`map_to_features`.
    """
    k = np.asarray(k_matrix, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError("kernel matrix must be square")
    if not np.allclose(k, k.T, rtol=0, atol=1e-12 * max(1.0, np.abs(k).max(initial=0.0))):
        raise ValueError("kernel matrix must be symmetric")
    q, _, _ = _psd_factor(k)
    u, s, vt = _svd_payload(q)
    refs = np.zeros((k.shape[0], 0)) if vectors is None else np.asarray(vectors, dtype=np.float64)
    return FactorizedKernel(
        spec if spec is not None else KernelSpec(),
        hop,
        refs,
        np.zeros(0, dtype=np.int64),
        u,
        s,
        vt,
        q_matrix=q,
    )


def factorize_vectors(spec: KernelSpec, vectors, hop: int = 0) -> FactorizedKernel:
    vectors = np.asarray(vectors, dtype=np.float64)
    return factorize_exact(build_kernel_matrix(spec, vectors), spec, vectors, hop)


def nystrom(spec: KernelSpec, vectors, p: int, seed=0, hop: int = 0) -> FactorizedKernel:
    """Nystrom factor ``Q = K_{N,p} K_{p,p}^{-1/2}`` from ``p`` uniformly
    sampled landmark rows.

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`.
    Only the ``N x p`` block of the kernel matrix is evaluated.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    n = vectors.shape[0]
    if not 1 <= p <= n:
        raise ValueError(f"landmark count {p} outside [1, {n}]")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=p, replace=False))
    landmarks = vectors[idx]
    k_pp = build_kernel_matrix(spec, landmarks)
    k_np = kernel_block(spec, vectors, landmarks)
    k_np[idx] = k_pp
    _, lam, vec = _psd_factor(k_pp)
    w = vec / np.sqrt(lam) if lam.size else vec
    q = k_np @ w
    u, s, vt = _svd_payload(q[idx])
    return FactorizedKernel(spec, hop, landmarks, idx.astype(np.int64), u, s, vt, q_matrix=q)


def map_to_features(fk: FactorizedKernel, z) -> np.ndarray:
    """Map one vector (1-D) or a batch of row vectors (2-D) to ``P`` kernel
    features."""
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    rows = z.reshape(1, -1) if single else z
    if rows.shape[1] != fk.input_dim:
        raise ValueError(f"feature dimension {rows.shape[1]} != {fk.input_dim}")
    if fk.width == 0 or fk.references.shape[0] == 0:
        out = np.zeros((rows.shape[0], fk.width))
    else:
        v = kernel_block(fk.spec, rows, fk.references)
        out = v @ fk.pinv().T
    return out[0] if single else out


def apply_pinv(fk: FactorizedKernel, v) -> np.ndarray:
    """``pinv(Q_ref) @ v`` for precomputed kernel products ``v``."""
    return fk.pinv() @ np.asarray(v, dtype=np.float64)
