"""Dense real-matrix primitives shared by the model, bound, and prior code.

Two conventions are fixed here once and used everywhere else:

* singular values are stored in nonincreasing order;
* SVD factors are made unique by forcing the entry of largest magnitude in
  each left-singular column to be nonnegative, pushing the signs into V.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import as_generator

SYMMETRY_RTOL = 1e-10


def validate_matrix(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a float 2-D array, rejecting NaN/Inf entries."""
    out = np.asarray(m, dtype=float)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} has non-finite entries")
    return out


def validate_square(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    out = validate_matrix(m, name)
    if out.shape[0] != out.shape[1]:
        raise ValueError(f"{name} must be square, got shape {out.shape}")
    return out


def require_symmetric(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    out = validate_square(m, name)
    scale = 1.0 + np.max(np.abs(out))
    if np.max(np.abs(out - out.T)) > SYMMETRY_RTOL * scale:
        raise ValueError(f"{name} is not symmetric within tolerance")
    return out


@dataclass(frozen=True)
class SvdResult:
    """Factors of m = u @ diag(sigma) @ v.T with sigma nonincreasing."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.u @ (self.sigma[:, None] * self.v.T)


def _canonical_column_signs(u: np.ndarray, vt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Flip signs so the largest-magnitude entry of each column of u is >= 0."""
    u = u.copy()
    vt = vt.copy()
    for j in range(u.shape[1]):
        i = int(np.argmax(np.abs(u[:, j])))
        if u[i, j] < 0:
            u[:, j] = -u[:, j]
            vt[j, :] = -vt[j, :]
    return u, vt


def svd(m: np.ndarray) -> SvdResult:
    """Singular value decomposition of a square matrix with canonical signs."""
    m = validate_square(m, "svd input")
    try:
        u, s, vt = np.linalg.svd(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - pathological input
        raise np.linalg.LinAlgError(f"SVD failed to converge: {exc}") from exc
    u, vt = _canonical_column_signs(u, vt)
    return SvdResult(u=u, sigma=s, v=vt.T)


def schatten_norm(m: np.ndarray, p: float) -> float:
    """Schatten norm for p in {2, 4, inf}.

    p=2 is the Frobenius norm, p=inf the operator norm (largest singular
    value), p=4 the fourth root of the sum of fourth powers of singular
    values.
    """
    m = validate_matrix(m, "schatten input")
    if p == 2:
        return float(np.linalg.norm(m))
    if p == 4:
        s = np.linalg.svd(m, compute_uv=False)
        return float(np.sum(s**4) ** 0.25)
    if p == np.inf:
        if m.size == 0:
            return 0.0
        return float(np.linalg.norm(m, 2))
    raise ValueError(f"unsupported Schatten order {p!r}; use 2, 4 or inf")


def operator_norm(m: np.ndarray) -> float:
    """Largest singular value; accepts complex input."""
    return float(np.linalg.norm(m, 2))


def is_psd_dominated(a: np.ndarray, b: np.ndarray, tol: float = 0.0) -> bool:
    """True iff a <= b in the Loewner order, i.e. lambda_min(b - a) >= -tol."""
    a = require_symmetric(a, "a")
    b = require_symmetric(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = 0.5 * ((b - a) + (b - a).T)
    return bool(np.linalg.eigvalsh(diff)[0] >= -tol)


def sym_inv_sqrt(m: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Inverse square root of a symmetric positive definite matrix."""
    m = require_symmetric(m, "sym_inv_sqrt input")
    w, v = np.linalg.eigh(m)
    if w[0] <= rtol * max(w[-1], 0.0) or w[0] <= 0.0:
        raise ValueError(
            f"matrix is not positive definite: smallest eigenvalue {w[0]:.3e}"
        )
    r = (v / np.sqrt(w)) @ v.T
    return 0.5 * (r + r.T)


def haar_orthogonal(d: int, rng, *, canonical_signs: bool = True) -> np.ndarray:
    """Haar-distributed orthogonal matrix via QR with R-diagonal sign correction.

    With ``canonical_signs`` the column-sign uniqueness convention is applied
    on top (largest-magnitude entry of each column nonnegative), so the law is
    Haar modulo column signs; pass False for the plain Haar draw.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    g = as_generator(rng)
    q, r = np.linalg.qr(g.standard_normal((d, d)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs
    if canonical_signs:
        q, _ = _canonical_column_signs(q, np.zeros((d, d)))
    return q


def eig_sym(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix."""
    m = require_symmetric(m, "eig_sym input")
    w, v = np.linalg.eigh(m)
    return w, v
