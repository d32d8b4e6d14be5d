"""Complex Hermitian matrix algebra used throughout the package.

Provides the isometric vectorization between m x m Hermitian matrices and
R^(m^2), the realification embedding into 2m x 2m real matrices, a Jacobi
eigensolver operating on that embedding, and orthonormal complement bases.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

_SQRT2 = np.sqrt(2.0)


def hermitize(x: np.ndarray) -> np.ndarray:
    """Return (X + X^H)/2, exactly conjugate-symmetric by construction."""
    x = np.asarray(x, dtype=complex)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {x.shape}")
    return 0.5 * (x + x.conj().T)


def check_hermitian(x: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Validate conjugate symmetry (within ``tol``) and return X as complex."""
    x = np.asarray(x, dtype=complex)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {x.shape}")
    err = np.max(np.abs(x - x.conj().T)) if x.size else 0.0
    bound = tol * max(1.0, float(np.linalg.norm(x)))
    if err > bound:
        raise ValueError(f"matrix is not Hermitian (asymmetry {err:.3e})")
    return x


def _offdiag_indices(m: int) -> tuple[np.ndarray, np.ndarray]:
    # row-major enumeration of index pairs (a, b) with a < b
    return np.triu_indices(m, k=1)


def cvec(x: np.ndarray) -> np.ndarray:
    """Map a Hermitian matrix to its real coordinate vector in R^(m^2).

    Ordering: the m diagonal entries, then sqrt(2)*Re of the strict upper
    triangle in row-major order, then -sqrt(2)*Im of the same entries. The
    map is a linear isometry: tr(XY) = cvec(X)^T cvec(Y) for Hermitian X, Y.
    """
    x = check_hermitian(x, tol=1e-12)
    m = x.shape[0]
    rows, cols = _offdiag_indices(m)
    upper = x[rows, cols]
    return np.concatenate(
        [x.diagonal().real, _SQRT2 * upper.real, -_SQRT2 * upper.imag]
    )


def cmat(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`cvec`; raises if len(v) is not a perfect square."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError("expected a 1-D real vector")
    m = int(round(np.sqrt(v.size)))
    if m * m != v.size or m < 1:
        raise ValueError(f"vector length {v.size} is not a perfect square")
    x = np.zeros((m, m), dtype=complex)
    np.fill_diagonal(x, v[:m])
    rows, cols = _offdiag_indices(m)
    t = (m * m - m) // 2
    upper = (v[m : m + t] - 1j * v[m + t :]) / _SQRT2
    x[rows, cols] = upper
    x[cols, rows] = upper.conj()
    return x


@lru_cache(maxsize=None)
def cvec_basis(m: int) -> np.ndarray:
    """Stack of the m^2 Hermitian basis matrices E_j = cmat(e_j)."""
    eye = np.eye(m * m)
    basis = np.stack([cmat(eye[j]) for j in range(m * m)])
    basis.setflags(write=False)
    return basis


def realify(a: np.ndarray) -> np.ndarray:
    """Embed a complex matrix as [[Re, -Im], [Im, Re]].

    The embedding satisfies det(A^) = |det A|^2, tr(A^B^) = 2 tr(AB),
    ||A^||_F = sqrt(2) ||A||_F, and preserves the semidefinite order.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise ValueError("expected a matrix")
    return np.block([[a.real, -a.imag], [a.imag, a.real]])


def _jacobi_symmetric(a: np.ndarray, tol_factor: float = 1e-12,
                      max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi diagonalization of a real symmetric matrix.

    Returns (eigenvalues, V) with A = V diag(w) V^T, unsorted. Sweeps stop
    once the off-diagonal Frobenius mass falls below tol_factor * ||A||_F.
    """
    a = a.copy()
    n = a.shape[0]
    v = np.eye(n)
    norm = np.linalg.norm(a)
    if norm == 0.0 or n == 1:
        return a.diagonal().copy(), v
    tol = tol_factor * norm
    # rotations below this size cannot move the off-diagonal mass past tol
    skip = tol / (n * n)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(a.diagonal()))
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) if theta != 0 else 1.0
                t /= abs(theta) + np.sqrt(theta * theta + 1.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp, rq = a[p].copy(), a[q].copy()
                a[p] = c * rp - s * rq
                a[q] = s * rp + c * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return a.diagonal().copy(), v


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    """Rotate a complex vector's global phase so its largest entry is real > 0."""
    idx = int(np.argmax(np.abs(vec)))
    pivot = vec[idx]
    mag = abs(pivot)
    if mag == 0.0:
        return vec
    return vec * (pivot.conj() / mag)


def herm_eig(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix via Jacobi on realify(X).

    Returns (w, V) with eigenvalues sorted descending and V unitary,
    X = V diag(w) V^H. Each eigenvector's phase is fixed so that its
    largest-magnitude entry is real and positive.
    """
    x = check_hermitian(x, tol=1e-10)
    m = x.shape[0]
    w2, u = _jacobi_symmetric(realify(x))
    order = np.argsort(-w2, kind="stable")
    w2 = w2[order]
    u = u[:, order]
    # realified eigenvalues come in pairs; recover one complex eigenvector
    # per pair via rank-revealing Gram-Schmidt inside each cluster
    scale = max(float(np.abs(w2).max()), 1.0)
    gap_tol = 1e-9 * scale
    eigvals: list[float] = []
    vecs: list[np.ndarray] = []
    i = 0
    n2 = 2 * m
    while i < n2:
        j = i + 1
        while j < n2 and (w2[i] - w2[j] <= gap_tol or (j - i) % 2 == 1):
            j += 1
        cluster = u[:, i:j]
        complex_block = cluster[:m, :] + 1j * cluster[m:, :]
        want = (j - i) // 2
        picked = _pivoted_orthonormalize(complex_block, want)
        lam = float(np.mean(w2[i:j]))
        for col in range(want):
            eigvals.append(lam)
            vecs.append(_fix_phase(picked[:, col]))
        i = j
    w = np.array(eigvals)
    v = np.column_stack(vecs)
    return w, v


def _pivoted_orthonormalize(cols: np.ndarray, want: int) -> np.ndarray:
    """Select ``want`` orthonormal columns from ``cols`` by greedy pivoting."""
    work = cols.astype(complex).copy()
    out = np.zeros((cols.shape[0], want), dtype=complex)
    for k in range(want):
        norms = np.linalg.norm(work, axis=0)
        pick = int(np.argmax(norms))
        q = work[:, pick] / norms[pick]
        out[:, k] = q
        work -= np.outer(q, q.conj() @ work)
    return out


def orthonormal_complement_basis(u: np.ndarray) -> np.ndarray:
    """Orthonormal basis V of the complement of span(U), U column-orthonormal.

    V satisfies V^T U = 0 and V^T V = I. Raises if U has no complement
    (k >= d) or if its columns are not orthonormal to 1e-8.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    d, k = u.shape
    if k >= d:
        raise ValueError(f"no orthogonal complement: {k} columns in dimension {d}")
    gram_err = np.max(np.abs(u.T @ u - np.eye(k)))
    if gram_err > 1e-8:
        raise ValueError(f"columns are not orthonormal (gram error {gram_err:.3e})")
    q, _ = np.linalg.qr(u, mode="complete")
    return q[:, k:]


def frob(x: np.ndarray) -> float:
    """Frobenius norm as a float."""
    return float(np.linalg.norm(x))
