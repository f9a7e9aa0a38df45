"""Small dense Hermitian eigenproblems and the unitaries built from them.

Production propagation uses LAPACK (``numpy.linalg.eigh``), which handles
stacks of matrices in one call. ``jacobi_eigh`` is a self-contained cyclic
Jacobi solver kept as an independent cross-check of that path.
"""

from __future__ import annotations

import numpy as np

from .errors import NonConvergenceError

JACOBI_TOL = 1e-13


def hermitian_eigh(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of one Hermitian matrix or a stack ``(..., d, d)``."""
    try:
        return np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure on valid input
        raise NonConvergenceError(f"Hermitian eigensolver failed: {exc}") from exc


def evolution_operator(w: np.ndarray, v: np.ndarray, tau: float) -> np.ndarray:
    """exp(-i H tau) from eigenpairs ``(w, v)``; ``tau`` in units of 1/energy.

    Works for a single pair or stacks (``w``: ``(..., d)``, ``v``: ``(..., d, d)``).
    """
    phases = np.exp(-1j * w * tau)
    return (v * phases[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def ordered_product(unitaries: np.ndarray) -> np.ndarray:
    """Time-ordered product U[n-1] @ ... @ U[1] @ U[0] of a stack of matrices.

    Uses pairwise (tree) reduction so the work is a handful of batched matmuls.
    """
    us = np.asarray(unitaries)
    if us.shape[0] == 0:
        raise ValueError("empty product")
    while us.shape[0] > 1:
        if us.shape[0] % 2:
            eye = np.broadcast_to(np.eye(us.shape[-1], dtype=us.dtype), (1,) + us.shape[1:])
            us = np.concatenate([us, eye])
        us = us[1::2] @ us[0::2]
    return us[0]


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(np.abs(off) ** 2)))


def jacobi_eigh(
    h: np.ndarray,
    *,
    tol: float = JACOBI_TOL,
    max_sweeps: int = 60,
) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigensolver for a complex Hermitian matrix.

    Each (p, q) rotation first removes the phase of ``a[p, q]`` and then applies
    the real symmetric Jacobi rotation, so the combined 2x2 transform is unitary.
    Sweeps stop once the off-diagonal Frobenius norm drops below ``tol``.
    Returns ascending eigenvalues and the matching unitary eigenvector matrix.
    """
    a = np.array(h, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    d = a.shape[0]
    v = np.eye(d, dtype=complex)

    for _ in range(max_sweeps):
        if _off_norm(a) < tol:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                mag = abs(apq)
                if mag == 0.0:
                    continue
                phase = apq / mag
                theta = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                t = (1.0 if theta >= 0.0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # G = diag(1, conj(phase)) @ [[c, s], [-s, c]] acting on columns p, q
                g_pp, g_pq = c, s
                g_qp, g_qq = -s * np.conj(phase), c * np.conj(phase)

                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = col_p * g_pp + col_q * g_qp
                a[:, q] = col_p * g_pq + col_q * g_qq
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = np.conj(g_pp) * row_p + np.conj(g_qp) * row_q
                a[q, :] = np.conj(g_pq) * row_p + np.conj(g_qq) * row_q
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real

                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = vp * g_pp + vq * g_qp
                v[:, q] = vp * g_pq + vq * g_qq
    else:
        if _off_norm(a) >= tol:
            raise NonConvergenceError(f"Jacobi sweeps did not converge below {tol!r} in {max_sweeps} sweeps")

    w = np.diag(a).real
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]
