"""Deterministic lower-bound quantities for the least-squares estimator.

Everything here is a pure function of the system (A, B, N): the expected
Gram matrix, the frequency-domain supremum that controls concentration, the
deviation rates built from it, the rate function with its three decay
regimes, the Cramer-Rao-type error bound, and the explicit bounds for
diagonalizable systems split into stable / limit-stable / unstable parts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .linalg import sym_inv_sqrt, validate_square
from .model import SystemParams, information_scalar

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class NotDiagonalizableError(ValueError):
    """Eigenvector basis too ill-conditioned for a reliable spectral split."""


@dataclass(frozen=True)
class BoundReport:
    """All deterministic bound quantities evaluated for one system."""

    psi: np.ndarray
    l_ab: float
    delta1: float
    delta2: float
    phi_value: float
    cr_matrix: np.ndarray
    mse_lower: float
    epsilon_used: float
    constant_used: float


@dataclass(frozen=True)
class SpectralSplit:
    """Eigen-decomposition of A with indices split by eigenvalue modulus."""

    s_basis: np.ndarray
    eigenvalues: np.ndarray
    stable_indices: tuple[int, ...]
    unstable_indices: tuple[int, ...]
    limit_indices: tuple[int, ...]
    b_tilde: np.ndarray
    tol: float


class LabUpperBound(NamedTuple):
    valid: bool
    value: float


class NoLimitBound(NamedTuple):
    n_min: int
    mse_lower: float


class WithLimitBound(NamedTuple):
    n_min: int
    delta_eps: float
    mse_lower: float


def psi(params: SystemParams) -> np.ndarray:
    """Expected Gram matrix: sum_{k=1}^{N-1} (N-k) A^{k-1} BB* A*^{k-1}."""
    out = np.zeros((params.d, params.d))
    c = params.b.copy()
    for k in range(1, params.n):
        out += (params.n - k) * (c @ c.T)
        c = params.a @ c
    return 0.5 * (out + out.T)


def _matrix_powers(a: np.ndarray, count: int) -> np.ndarray:
    """Stack A^0 .. A^{count-1}."""
    d = a.shape[0]
    powers = np.empty((count, d, d))
    powers[0] = np.eye(d)
    for k in range(1, count):
        powers[k] = a @ powers[k - 1]
    return powers


def _freq_norm_sq(
    w: np.ndarray, powers: np.ndarray, b: np.ndarray, s_values: np.ndarray
) -> np.ndarray:
    """Squared operator norm of W (sum_k A^k e^{j 2 pi k s}) B per frequency."""
    k = np.arange(powers.shape[0])
    phases = np.exp(2j * np.pi * np.outer(s_values, k))
    f = np.tensordot(phases, powers, axes=(1, 0))
    g = np.einsum("ab,mbc,cd->mad", w, f, b)
    return np.linalg.svd(g, compute_uv=False)[:, 0] ** 2


def _golden_max(fn, lo: float, hi: float, iters: int = 60) -> float:
    """Golden-section maximization with a fixed iteration count."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fn(d)
    return max(fc, fd)


def l_ab(params: SystemParams, grid_points: int = 4096) -> float:
    """Frequency supremum sup_s |Psi^{-1/2} (sum_{k=0}^{N-2} A^k e^{j2pi ks}) B|^2.

    Evaluated on a uniform grid of ``grid_points`` frequencies followed by one
    golden-section refinement around the grid argmax. The result is a lower
    approximation of the true supremum; the grid-convergence tests guard the
    resolution.
    """
    if grid_points < 64:
        raise ValueError(f"grid_points must be >= 64, got {grid_points}")
    psi_m = psi(params)
    w = sym_inv_sqrt(psi_m)
    powers = _matrix_powers(params.a, params.n - 1)
    grid = np.arange(grid_points) / grid_points
    vals = _freq_norm_sq(w, powers, params.b, grid)
    best = int(np.argmax(vals))
    step = 1.0 / grid_points

    def fn(s: float) -> float:
        return float(_freq_norm_sq(w, powers, params.b, np.array([s]))[0])

    refined = _golden_max(fn, grid[best] - step, grid[best] + step)
    return max(float(vals[best]), refined)


def delta1(params: SystemParams, t: float, l: float) -> float:
    """Deviation rate (d v t) L + (d v t)^{1/2} L^{1/2}."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if l < 0:
        raise ValueError(f"l must be >= 0, got {l}")
    lead = max(float(params.d), t)
    return lead * l + math.sqrt(lead) * math.sqrt(l)


def delta2(params: SystemParams, l: float) -> float:
    """Multiplication-process rate d * L."""
    if l < 0:
        raise ValueError(f"l must be >= 0, got {l}")
    return params.d * l


def phi(a: float, n: int) -> float:
    """Rate function with the three decay regimes.

    N/(1-a) + 1/(1-a)^2 on [0, 1); N(N-1)/2 at a = 1 (within 1e-12);
    a^N / (a-1)^2 above 1. Dominates geom_sum(a, n) everywhere.
    """
    if a < 0:
        raise ValueError(f"a must be >= 0, got {a}")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if abs(a - 1.0) <= 1e-12:
        return 0.5 * n * (n - 1)
    if a < 1.0:
        return n / (1.0 - a) + 1.0 / (1.0 - a) ** 2
    # numpy power saturates to inf instead of raising for huge a^N
    with np.errstate(over="ignore"):
        return float(np.float64(a) ** n) / (a - 1.0) ** 2


def geom_sum(a: float, n: int) -> float:
    """Exact sum_{i=0}^{N-2} (N-1-i) a^i by direct accumulation."""
    if a < 0:
        raise ValueError(f"a must be >= 0, got {a}")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    total = 0.0
    power = 1.0
    for i in range(n - 1):
        total += (n - 1 - i) * power
        power *= a
    return total


def geom_sum_lower(a: float, n: int, alpha: float) -> tuple[bool, float]:
    """Lower estimate (1-alpha) N / (1-a), valid once N >= 1/(alpha (1-a))."""
    if not 0.0 < a < 1.0:
        raise ValueError(f"a must be in (0, 1), got {a}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    valid = n >= 1.0 / (alpha * (1.0 - a))
    return valid, (1.0 - alpha) * n / (1.0 - a)


def _ramp_sum(x: float, n: int) -> float:
    """sum_{e=0}^{N-2} (e+1) x^e, the unstable-block weight sum."""
    total = 0.0
    power = 1.0
    for e in range(n - 1):
        total += (e + 1) * power
        power *= x
    return total


def cr_bound(
    params: SystemParams,
    epsilon: float,
    constant: float = 1.0,
    *,
    grid_points: int = 4096,
    delta_variant: str = "statement",
) -> BoundReport:
    """Cramer-Rao-type lower bound on the least-squares estimation error.

    cr_matrix = d^2 (1-eps)^2 / (1 + C Delta)^2 * BB* / information_scalar,
    and the scalar bound uses the rate function at |A|^2 operator norm:
    mse_lower = (1-eps)^2 / (1 + C Delta)^2 * d^2 / phi(|A|^2, N).

    ``constant`` is the unknown universal constant multiplying Delta; it is
    echoed in the report so no number masquerades as constant-free.
    ``delta_variant`` picks the argument of the deviation rate: "statement"
    uses t = log(L/eps), "proof" uses t = log(C d L / eps). Negative logs are
    clamped to zero.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    if constant <= 0:
        raise ValueError(f"constant must be > 0, got {constant}")
    if delta_variant not in ("statement", "proof"):
        raise ValueError(f"unknown delta_variant {delta_variant!r}")
    psi_m = psi(params)
    l_val = l_ab(params, grid_points)
    if delta_variant == "statement":
        t = math.log(l_val / epsilon) if l_val > 0 else 0.0
    else:
        t = math.log(constant * params.d * l_val / epsilon) if l_val > 0 else 0.0
    t = max(t, 0.0)
    d1 = delta1(params, t, l_val)
    d2 = delta2(params, l_val)
    info = information_scalar(params)
    d = params.d
    shrink = (1.0 - epsilon) ** 2 / (1.0 + constant * d1) ** 2
    cr_matrix = (d**2) * shrink * params.noise_cov() / info
    phi_value = phi(np.linalg.norm(params.a, 2) ** 2, params.n)
    mse_lower = shrink * d**2 / phi_value
    return BoundReport(
        psi=psi_m,
        l_ab=l_val,
        delta1=d1,
        delta2=d2,
        phi_value=phi_value,
        cr_matrix=0.5 * (cr_matrix + cr_matrix.T),
        mse_lower=mse_lower,
        epsilon_used=epsilon,
        constant_used=constant,
    )


def spectral_split(
    a: np.ndarray,
    tol: float,
    b: np.ndarray | None = None,
    *,
    cond_threshold: float = 1e8,
    recon_rtol: float = 1e-8,
) -> SpectralSplit:
    """Diagonalize A and classify eigenvalues by modulus against 1 +- tol.

    ``b`` is the noise-shaping matrix used to form b_tilde = S^{-1} B
    (identity when omitted). Raises NotDiagonalizableError when the
    eigenvector basis is too ill-conditioned or does not reconstruct A.
    """
    a = validate_square(a, "a")
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    d = a.shape[0]
    if b is None:
        b = np.eye(d)
    b = validate_square(b, "b")
    if b.shape != a.shape:
        raise ValueError(f"b must match a's shape {a.shape}, got {b.shape}")
    eigvals, basis = np.linalg.eig(a)
    sv = np.linalg.svd(basis, compute_uv=False)
    if sv[-1] <= 0 or sv[0] / sv[-1] > cond_threshold:
        raise NotDiagonalizableError(
            f"eigenvector basis condition number {sv[0] / max(sv[-1], 1e-300):.3e} "
            f"exceeds {cond_threshold:.1e}; matrix is not reliably diagonalizable"
        )
    recon = (basis * eigvals) @ np.linalg.inv(basis)
    rel = np.linalg.norm(recon - a) / (1.0 + np.linalg.norm(a))
    if rel > recon_rtol:
        raise NotDiagonalizableError(
            f"eigendecomposition reconstruction error {rel:.3e} exceeds {recon_rtol:.1e}"
        )
    moduli = np.abs(eigvals)
    stable = tuple(int(i) for i in np.flatnonzero(moduli < 1.0 - tol))
    unstable = tuple(int(i) for i in np.flatnonzero(moduli > 1.0 + tol))
    limit = tuple(
        int(i) for i in range(d) if i not in stable and i not in unstable
    )
    return SpectralSplit(
        s_basis=basis,
        eigenvalues=eigvals,
        stable_indices=stable,
        unstable_indices=unstable,
        limit_indices=limit,
        b_tilde=np.linalg.solve(basis, b.astype(complex)),
        tol=tol,
    )


def _cond(m: np.ndarray) -> float:
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[-1] <= 0:
        raise ValueError("b_tilde is singular; condition number undefined")
    return float(sv[0] / sv[-1])


def _block_moduli(split: SpectralSplit) -> dict[str, float]:
    """Operator norms and least singular values of the diagonal blocks.

    Under the diagonalizability assumption the split blocks are diagonal, so
    |A_u^{-1}| = 1/min|lam_u|, s_min(A_u^{-1}) = 1/max|lam_u|,
    |A_s| = max|lam_s|, s_min(A_s) = min|lam_s|.
    """
    moduli = np.abs(split.eigenvalues)
    out: dict[str, float] = {}
    if split.unstable_indices:
        lam_u = moduli[list(split.unstable_indices)]
        out["au_inv_norm"] = 1.0 / float(lam_u.min())
        out["au_inv_smin_sq"] = (1.0 / float(lam_u.max())) ** 2
    if split.stable_indices:
        lam_s = moduli[list(split.stable_indices)]
        out["as_norm"] = float(lam_s.max())
        out["as_smin_sq"] = float(lam_s.min()) ** 2
    return out


def _spectral_gap(blocks: dict[str, float]) -> float:
    """1 - max over present blocks of the off-circle operator norms (1 if none)."""
    norms = [v for k, v in blocks.items() if k in ("au_inv_norm", "as_norm")]
    return 1.0 - max(norms) if norms else 1.0


def lab_upper_bound(split: SpectralSplit, n: int, alpha: float) -> LabUpperBound:
    """Closed-form upper bound on l_ab from the spectral split.

    value = (r_u + r_s + 1)^2 cond(b_tilde)^2 / min(per-block weight sums),
    with r_u = 1/(1 - |A_u^{-1}|), r_s = 1/(1 - |A_s|) dropped for absent
    blocks. Present-block denominators: (1-alpha) N / (1 - s_min(A_s)^2) for
    the stable block, the exact ramp sum at s_min(A_u^{-1})^2 for the
    unstable block, and 1/3 for the limit block. Valid once
    N >= 1/(alpha (1 - max of the present s_min^2 terms)).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    blocks = _block_moduli(split)
    reciprocal = 0.0
    denominators: list[float] = []
    smin_terms: list[float] = []
    if "au_inv_norm" in blocks:
        reciprocal += 1.0 / (1.0 - blocks["au_inv_norm"])
        denominators.append(_ramp_sum(blocks["au_inv_smin_sq"], n))
        smin_terms.append(blocks["au_inv_smin_sq"])
    if "as_norm" in blocks:
        reciprocal += 1.0 / (1.0 - blocks["as_norm"])
        denominators.append((1.0 - alpha) * n / (1.0 - blocks["as_smin_sq"]))
        smin_terms.append(blocks["as_smin_sq"])
    if split.limit_indices:
        denominators.append(1.0 / 3.0)
    if smin_terms:
        valid = n >= 1.0 / (alpha * (1.0 - max(smin_terms)))
    else:
        valid = True
    value = (reciprocal + 1.0) ** 2 * _cond(split.b_tilde) ** 2 / min(denominators)
    return LabUpperBound(valid=valid, value=value)


def prop_bound_no_limit(
    params: SystemParams, split: SpectralSplit, epsilon: float
) -> NoLimitBound:
    """Sharp explicit bound when no eigenvalue sits near the unit circle.

    mse_lower = (1-eps)^2/(1+eps)^2 * d^2 / phi(|A|^2), valid once
    N >= (d v log(1/eps)) cond(b_tilde)^2 / (eps^2 gap).
    """
    if split.limit_indices:
        raise ValueError("system has a limit-stable part; use prop_bound_with_limit")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    blocks = _block_moduli(split)
    gap = _spectral_gap(blocks)
    n_min = math.ceil(
        max(params.d, math.log(1.0 / epsilon))
        * _cond(split.b_tilde) ** 2
        / (epsilon**2 * gap)
    )
    phi_value = phi(np.linalg.norm(params.a, 2) ** 2, params.n)
    mse_lower = (
        (1.0 - epsilon) ** 2 / (1.0 + epsilon) ** 2 * params.d**2 / phi_value
    )
    return NoLimitBound(n_min=n_min, mse_lower=mse_lower)


def prop_bound_with_limit(
    params: SystemParams, split: SpectralSplit, epsilon: float
) -> WithLimitBound:
    """Rate-optimal explicit bound in the presence of a limit-stable part.

    The leading constant is unknown; the value is reported with constant one
    and should be read as a rate statement only. For pure limit-stable
    systems the absent stable/unstable gap terms are taken as 1.
    """
    if not split.limit_indices:
        raise ValueError("system has no limit-stable part; use prop_bound_no_limit")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    blocks = _block_moduli(split)
    gap = _spectral_gap(blocks)
    cond_sq = _cond(split.b_tilde) ** 2
    delta_eps = max(params.d, math.log(cond_sq / (epsilon * gap))) * cond_sq / gap
    smin_terms = [
        blocks[k] for k in ("au_inv_smin_sq", "as_smin_sq") if k in blocks
    ]
    n_min = math.ceil(2.0 / (1.0 - max(smin_terms))) if smin_terms else 2
    phi_value = phi(np.linalg.norm(params.a, 2) ** 2, params.n)
    mse_lower = (1.0 - epsilon) ** 2 * (params.d / delta_eps) ** 2 / phi_value
    return WithLimitBound(n_min=n_min, delta_eps=delta_eps, mse_lower=mse_lower)
