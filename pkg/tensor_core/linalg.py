import logging
from functools import lru_cache
from typing import Tuple

import numpy as np

from config import EIG_CONFIG, ESTIMATOR_CONFIG
from errors import EigenError, ShapeError
from tensor_core.tensor import Tensor, as_tensor, make_result

logger = logging.getLogger(__name__)


@lru_cache(maxsize=16)
def _round_robin(n: int):
    """Disjoint (p, q) pairings covering every index pair once per sweep"""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(p, q) for p, q in pairs if p < n and q < n]
        if pairs:
            p, q = zip(*pairs)
            rounds.append((np.array(p), np.array(q)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _off_norm(a: np.ndarray) -> float:
    off = np.triu(a, k=1)
    return float(np.sqrt(2.0 * np.sum(off * off)))


def jacobi_eigh(s: np.ndarray, tolerance: float = EIG_CONFIG['tolerance'],
                max_sweeps: int = EIG_CONFIG['max_sweeps']) -> Tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigen-decomposition of a symmetric matrix.

    Each sweep visits every off-diagonal pair once, in round-robin order so
    that the rotations of one round touch disjoint rows and can be applied
    together. Returns eigenvalues ascending and the matching eigenvectors
    as columns.
    """
    a = np.array(s, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    target = tolerance * np.linalg.norm(a)
    if n == 1 or _off_norm(a) <= target:
        return _sorted(a, v)

    for sweep in range(max_sweeps):
        for p, q in _round_robin(n):
            apq = a[p, q]
            active = apq != 0.0
            if not np.any(active):
                continue
            safe = np.where(active, apq, 1.0)
            theta = (a[q, q] - a[p, p]) / (2.0 * safe)
            sign = np.where(theta >= 0, 1.0, -1.0)
            t = np.where(active, sign / (np.abs(theta) + np.hypot(theta, 1.0)), 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            sn = t * c

            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = ap * c - aq * sn
            a[:, q] = ap * sn + aq * c
            ap, aq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * ap - sn[:, None] * aq
            a[q, :] = sn[:, None] * ap + c[:, None] * aq
            a[p, q] = 0.0
            a[q, p] = 0.0

            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = vp * c - vq * sn
            v[:, q] = vp * sn + vq * c

        if _off_norm(a) <= target:
            logger.debug(f"Jacobi converged after {sweep + 1} sweeps (n={n})")
            return _sorted(a, v)

    raise EigenError(f"Jacobi did not converge in {max_sweeps} sweeps (n={n}, off={_off_norm(a):.3e})")


def _sorted(a: np.ndarray, v: np.ndarray):
    w = np.diag(a).copy()
    order = np.argsort(w, kind='stable')
    return w[order], v[:, order]


def symmetric_eig(s, jitter: float = ESTIMATOR_CONFIG['jitter']) -> Tuple[Tensor, np.ndarray]:
    """Eigenvalues (ascending, differentiable) and eigenvectors (constant) of a symmetric matrix.

    The jitter is added before decomposition and removed from the returned
    eigenvalues. dλ_k/dS = v_k v_kᵀ.
    """
    s = as_tensor(s)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ShapeError(f"symmetric_eig expects a square matrix, got {s.shape}")
    n = s.shape[0]
    if n > EIG_CONFIG['max_size']:
        raise ShapeError(f"symmetric_eig supports n <= {EIG_CONFIG['max_size']}, got {n}")
    asym = float(np.max(np.abs(s.data - s.data.T))) if n else 0.0
    if asym > EIG_CONFIG['symmetry_tolerance'] * max(1.0, float(np.max(np.abs(s.data)))):
        raise EigenError(f"matrix is not symmetric (max asymmetry {asym:.3e})")

    sym = 0.5 * (s.data + s.data.T) + jitter * np.eye(n)
    w, v = jacobi_eigh(sym)
    w = w - jitter

    def backward(g):
        return ((v * g[None, :]) @ v.T,)
    return make_result(w, (s,), backward, 'symmetric_eig'), v
