"""
Dense linear algebra used by the design and stability checks.

``eig_sym`` is a cyclic Jacobi eigensolver with a deterministic rotation
order, so eigenvector ties are always broken the same way. Large matrices
are handed to LAPACK (``scipy.linalg.eigh``), which is also deterministic.
``hurwitz`` certifies stability by solving a Lyapunov equation and testing
the solution for positive definiteness.
"""

import logging
from typing import Optional, Tuple, Union, overload

import numpy as np
import scipy.linalg

from .errors import NotConverged, NotSymmetric, SingularLyapunov

logger = logging.getLogger(__name__)

JACOBI_MAX_DIM = 64
TIE_RTOL = 1e-10
TIE_RESIDUAL = 1e-4
KRONECKER_MAX_DIM = 40
SYMMETRY_TOL = 1e-12
JACOBI_TOL = 1e-12
MAX_SWEEPS = 100


def _check_symmetric(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if M.size and np.max(np.abs(M - M.T)) > SYMMETRY_TOL * scale:
        raise NotSymmetric("matrix is not symmetric within 1e-12")
    return M


def _jacobi(M: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Cyclic-by-row Jacobi sweeps; returns (diagonal, accumulated rotations)."""
    a = M.copy()
    n = a.shape[0]
    v = np.eye(n)
    norm = np.linalg.norm(a)
    if n < 2 or norm == 0.0:
        return np.diag(a).copy(), v

    for sweep in range(MAX_SWEEPS):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off < JACOBI_TOL * norm:
            logger.debug("jacobi converged after %d sweeps (n=%d)", sweep, n)
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if tau >= 0.0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau**2))
                c = 1.0 / np.sqrt(1.0 + t**2)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                a[:, [p, q]] = a[:, [p, q]] @ rot
                a[[p, q], :] = rot.T @ a[[p, q], :]
                a[p, q] = a[q, p] = 0.0
                v[:, [p, q]] = v[:, [p, q]] @ rot

    raise NotConverged(f"jacobi did not converge in {MAX_SWEEPS} sweeps")


def _canonical_vectors(values: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """
    Solver-independent eigenvectors.

    Inside a block of tied eigenvalues the basis is rebuilt by Gram-Schmidt
    over the projections of ``e_1, e_2, ...`` onto the eigenspace, in index
    order. Every column is then signed so its largest-magnitude entry is
    positive.
    """
    n = len(values)
    out = vecs.copy()
    scale = max(1.0, float(np.abs(values).max())) if n else 1.0
    k = 0
    while k < n:
        end = k + 1
        while end < n and values[end] - values[end - 1] <= TIE_RTOL * scale:
            end += 1
        if end - k > 1:
            block = vecs[:, k:end]
            P = block @ block.T
            basis: list = []
            for j in range(P.shape[0]):
                w = P[:, j].copy()
                for _ in range(2):
                    for b in basis:
                        w -= (b @ w) * b
                norm = np.linalg.norm(w)
                if norm > TIE_RESIDUAL:
                    basis.append(w / norm)
                if len(basis) == end - k:
                    break
            out[:, k:end] = np.column_stack(basis)
        k = end
    if out.size:
        lead = out[np.argmax(np.abs(out), axis=0), np.arange(out.shape[1])]
        out = out * np.where(lead < 0, -1.0, 1.0)
    return out


@overload
def eig_sym(M: np.ndarray) -> np.ndarray: ...


@overload
def eig_sym(
    M: np.ndarray, vectors: bool, method: Optional[str] = None
) -> Union[np.ndarray, Tuple[np.ndarray, np.ndarray]]: ...


def eig_sym(
    M: np.ndarray, vectors: bool = False, method: Optional[str] = None
) -> Union[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    """
    Eigenvalues (ascending) of a symmetric matrix, optionally with eigenvectors.

    Args:
        M: Symmetric matrix (symmetric within 1e-12 relative)
        vectors: Also return the eigenvectors as columns
        method: "jacobi", "lapack" or None to pick Jacobi for matrices up to
                ``JACOBI_MAX_DIM`` and LAPACK above

    Returns:
        Eigenvalues, or ``(eigenvalues, eigenvectors)`` when ``vectors`` is set

        Both methods return the same eigenvectors: eigenvalues within
        ``TIE_RTOL`` (relative) form a tie block whose basis is the
        Gram-Schmidt orthonormalization of the projected unit vectors
        ``e_1, e_2, ...``, and each vector is signed so that its largest
        entry is positive. ``top_eig`` therefore returns the last vector of
        that canonical block whichever solver ran.

    Raises:
        NotSymmetric: If ``M`` is not square and symmetric

    Examples:
        >>> eig_sym(np.array([[2.0, 1.0], [1.0, 2.0]]))
        array([1., 3.])
    """
    M = _check_symmetric(M)
    if method is None:
        method = "jacobi" if M.shape[0] <= JACOBI_MAX_DIM else "lapack"

    if method == "jacobi":
        diag, rot = _jacobi(M)
        order = np.argsort(diag, kind="stable")
        values, vecs = diag[order], rot[:, order]
    elif method == "lapack":
        values, vecs = scipy.linalg.eigh(M)
    else:
        raise ValueError(f"Unknown eigen method: {method}")

    if not vectors:
        return values
    return values, _canonical_vectors(values, vecs)


def top_eig(M: np.ndarray) -> Tuple[float, np.ndarray]:
    """Largest eigenvalue and a unit eigenvector for it."""
    values, vecs = eig_sym(M, vectors=True)
    return float(values[-1]), vecs[:, -1]


def solve_lyapunov(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """
    Solve ``A^T P + P A = -Q``.

    Small systems are solved through the Kronecker-vectorized linear system,
    larger ones with Bartels-Stewart (``scipy.linalg.solve_continuous_lyapunov``).

    Raises:
        SingularLyapunov: If two eigenvalues of ``A`` sum to zero, which makes
                          the Lyapunov operator singular
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = A.shape[0]

    eigs = np.linalg.eigvals(A)
    scale = max(1.0, float(np.max(np.abs(eigs)))) if n else 1.0
    pair_sums = np.abs(eigs[:, None] + eigs[None, :])
    if n and float(np.min(pair_sums)) < 1e-10 * scale:
        raise SingularLyapunov("Lyapunov operator is singular: eigenvalue pair sums to 0")

    if n <= KRONECKER_MAX_DIM:
        eye = np.eye(n)
        # vec(A^T P + P A) = (I (x) A^T + A^T (x) I) vec(P), column-major vec
        op = np.kron(eye, A.T) + np.kron(A.T, eye)
        p = np.linalg.solve(op, -Q.reshape(-1, order="F"))
        P = p.reshape((n, n), order="F")
    else:
        P = scipy.linalg.solve_continuous_lyapunov(A.T, -Q)
    return 0.5 * (P + P.T)


def hurwitz(M: np.ndarray) -> bool:
    """
    Decide whether every eigenvalue of ``M`` has negative real part.

    Solves ``M^T P + P M = -I`` and accepts iff ``P`` admits a Cholesky factor.

    Raises:
        SingularLyapunov: If the spectrum touches the imaginary axis so the
                          Lyapunov equation has no unique solution
    """
    M = np.asarray(M, dtype=float)
    P = solve_lyapunov(M, np.eye(M.shape[0]))
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        return False
    return True
