"""Linear state recursion, least squares, score, and information matrix.

Index conventions, fixed once for every sum in this package:

* a trajectory stores states ``x_0 .. x_N`` (``N`` transitions) with
  ``x_0 = 0`` and optionally the driving noise ``e_0 .. e_{N-1}``, where
  ``x_{i+1} = A x_i + B e_i``;
* data-side sums (Gram statistics, least squares, score) run over
  ``i = 1..N`` pairing ``x_i`` with ``x_{i-1}``;
* expectation-side sums (information scalar, expected Gram) run over
  ``k = 1..N-1`` with weight ``N - k`` on the ``A^(k-1) B`` term — the
  ``x_0 = 0`` start removes one term from every expectation.

Off-by-one errors between these two families of sums are the main
correctness hazard here; all other modules reuse these helpers instead of
re-deriving index ranges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import validate_matrix, validate_square
from .rng import as_generator


class SingularCovarianceError(ValueError):
    """Sample covariance too ill-conditioned to invert.

    For genuine Gaussian data with N >= d+1 this happens with probability
    zero, so hitting it signals a degenerate trajectory or bad inputs.
    """


@dataclass(frozen=True)
class SystemParams:
    """Dynamics pair (A, B) with dimension d and sample horizon N."""

    a: np.ndarray
    b: np.ndarray
    n: int

    def __post_init__(self) -> None:
        # own copies: freezing must never make the caller's arrays read-only
        a = validate_square(self.a, "a").copy()
        b = validate_square(self.b, "b").copy()
        if a.shape != b.shape:
            raise ValueError(f"a and b must have equal size, got {a.shape} vs {b.shape}")
        smin = float(np.linalg.svd(b, compute_uv=False)[-1])
        if smin <= 1e-12:
            raise ValueError(f"b must be full rank, smallest singular value {smin:.3e}")
        if self.n < a.shape[0] + 1:
            raise ValueError(f"n must be >= d + 1 = {a.shape[0] + 1}, got {self.n}")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def d(self) -> int:
        return self.a.shape[0]

    def noise_cov(self) -> np.ndarray:
        """BB*, the one-step noise covariance."""
        return self.b @ self.b.T


@dataclass(frozen=True)
class Trajectory:
    """States x_0..x_N and, optionally, the noise e_0..e_{N-1} that drove them."""

    states: np.ndarray
    noise: np.ndarray | None = None

    def __post_init__(self) -> None:
        states = validate_matrix(self.states, "states").copy()
        if states.shape[0] < 2:
            raise ValueError("trajectory needs at least states x_0 and x_1")
        if np.any(states[0] != 0.0):
            raise ValueError("x_0 must be exactly zero")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)
        if self.noise is not None:
            noise = validate_matrix(self.noise, "noise").copy()
            if noise.shape != (states.shape[0] - 1, states.shape[1]):
                raise ValueError(
                    f"noise must have shape {(states.shape[0] - 1, states.shape[1])}, "
                    f"got {noise.shape}"
                )
            noise.setflags(write=False)
            object.__setattr__(self, "noise", noise)

    @property
    def n(self) -> int:
        return self.states.shape[0] - 1

    @property
    def d(self) -> int:
        return self.states.shape[1]


@dataclass(frozen=True)
class GramStatistics:
    """Natural statistics: gamma = sum x_i x_{i-1}^T, sigma = sum x_{i-1} x_{i-1}^T."""

    gamma: np.ndarray
    sigma: np.ndarray


def simulate_injected(params: SystemParams, noise: np.ndarray) -> Trajectory:
    """Run the recursion x_{i+1} = A x_i + B e_i with supplied noise rows e_i."""
    noise = validate_matrix(noise, "noise")
    if noise.shape != (params.n, params.d):
        raise ValueError(f"noise must have shape {(params.n, params.d)}, got {noise.shape}")
    states = np.zeros((params.n + 1, params.d))
    a, b = params.a, params.b
    for i in range(params.n):
        states[i + 1] = a @ states[i] + b @ noise[i]
    return Trajectory(states=states, noise=noise)


def simulate(params: SystemParams, rng, keep_noise: bool = False) -> Trajectory:
    """Simulate one trajectory with i.i.d. standard normal noise from ``rng``."""
    g = as_generator(rng)
    noise = g.standard_normal((params.n, params.d))
    traj = simulate_injected(params, noise)
    if keep_noise:
        return traj
    return Trajectory(states=traj.states)


def gram_stats(traj: Trajectory) -> GramStatistics:
    x_prev = traj.states[:-1]
    x_next = traj.states[1:]
    gamma = x_next.T @ x_prev
    sigma = x_prev.T @ x_prev
    return GramStatistics(gamma=gamma, sigma=0.5 * (sigma + sigma.T))


def least_squares(traj: Trajectory, rtol: float = 1e-12) -> np.ndarray:
    """Least-squares estimate gamma @ sigma^{-1} of the dynamics matrix.

    Raises SingularCovarianceError when the sample covariance has an
    eigenvalue below ``rtol`` times its largest one; the error is never
    papered over with a pseudo-inverse.
    """
    stats = gram_stats(traj)
    w = np.linalg.eigvalsh(stats.sigma)
    if w[0] <= rtol * max(w[-1], 0.0):
        raise SingularCovarianceError(
            f"sample covariance is singular (eigenvalue range {w[0]:.3e}..{w[-1]:.3e})"
        )
    return np.linalg.solve(stats.sigma, stats.gamma.T).T


def sensitivity(params: SystemParams, traj: Trajectory) -> np.ndarray:
    """Score of the log-likelihood in A: (BB*)^{-1} (gamma - A sigma).

    This form only needs states. When the trajectory was generated by
    ``params`` and carries its noise, it equals (B*)^{-1} sum e_{i-1} x_{i-1}^T
    up to roundoff.
    """
    stats = gram_stats(traj)
    return np.linalg.solve(params.noise_cov(), stats.gamma - params.a @ stats.sigma)


def information_scalar(params: SystemParams) -> float:
    """sum_{k=1}^{N-1} (N-k) |A^{k-1} B|_F^2, the scalar information weight."""
    total = 0.0
    c = params.b.copy()
    for k in range(1, params.n):
        total += (params.n - k) * float(np.sum(c * c))
        c = params.a @ c
    return total


def fisher_information(params: SystemParams) -> np.ndarray:
    """Closed-form information matrix: information_scalar(params) * (BB*)^{-1}."""
    bbt = params.noise_cov()
    inv = np.linalg.solve(bbt, np.eye(params.d))
    out = information_scalar(params) * inv
    return 0.5 * (out + out.T)


def log_likelihood(params: SystemParams, traj: Trajectory) -> float:
    """Log density of the trajectory in natural-parameter form.

    <eta(A), T(x)> - log Z(x) with the standard Gaussian partition; agrees
    with the sum of Gaussian transition log-densities.
    """
    if traj.n != params.n or traj.d != params.d:
        raise ValueError("trajectory does not match params dimensions")
    stats = gram_stats(traj)
    bbt = params.noise_cov()
    bbt_inv = np.linalg.solve(bbt, np.eye(params.d))
    x = traj.states[1:]
    inner = float(np.sum((bbt_inv @ params.a) * stats.gamma)) - 0.5 * float(
        np.sum((params.a.T @ bbt_inv @ params.a) * stats.sigma)
    )
    sign, logdet = np.linalg.slogdet(bbt)
    if sign <= 0:
        raise ValueError("BB* must be positive definite")
    log_z = 0.5 * params.n * (params.d * np.log(2.0 * np.pi) + logdet) + 0.5 * float(
        np.sum(x * (x @ bbt_inv.T))
    )
    return inner - log_z
