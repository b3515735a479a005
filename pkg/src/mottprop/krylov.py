"""Hermitian Lanczos: adaptive ``exp(-i tau B) v`` and extremal eigenpairs."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.linalg import eigh_tridiagonal

MatVec = Callable[[np.ndarray], np.ndarray]


class KrylovBreakdown(RuntimeError):
    """Lanczos did not reach the requested accuracy within ``m_max`` steps."""

    def __init__(self, message: str, best: np.ndarray, estimate: float, matvecs: int):
        super().__init__(message)
        self.best = best
        self.estimate = estimate
        self.matvecs = matvecs


class DegenerateGroundState(UserWarning):
    pass


@dataclass(frozen=True)
class KrylovConfig:
    tol: float = 1e-12
    m_max: int = 128
    reorthogonalize: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("Krylov tolerance must be positive")
        if self.m_max < 2:
            raise ValueError("m_max must be at least 2")


def _tridiag_exp_e1(alpha: np.ndarray, beta: np.ndarray, tau: float) -> np.ndarray:
    """``exp(-i tau T) e_1`` for the symmetric tridiagonal ``T``."""
    if len(alpha) == 1:
        return np.array([np.exp(-1j * tau * alpha[0])])
    evals, evecs = eigh_tridiagonal(alpha, beta)
    return evecs @ (np.exp(-1j * tau * evals) * evecs[0])


def _orthogonalize(w: np.ndarray, basis: np.ndarray) -> None:
    # two passes of classical Gram-Schmidt, in place
    for _ in range(2):
        w -= basis.T @ (basis.conj() @ w)


def expmv(apply_B: MatVec, tau: float, v: np.ndarray, cfg: KrylovConfig = KrylovConfig()):
    """Approximate ``exp(-i tau B) v`` for Hermitian ``B``.

    The Krylov dimension grows until the a-posteriori estimate
    ``beta_{m+1} |e_m^T exp(-i tau T_m) e_1| ||v||`` drops below
    ``cfg.tol * ||v||``.

    Returns
    -------
    w : ndarray
    matvecs : int
        Number of calls to ``apply_B``.

    Raises
    ------
    KrylovBreakdown
        If ``cfg.m_max`` iterations do not suffice; carries the best iterate.
    """
    v = np.asarray(v, dtype=complex)
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise ValueError("expmv needs a nonzero vector")
    if tau == 0.0:
        return v.copy(), 0

    n = v.shape[0]
    m_max = min(cfg.m_max, n)
    V = np.empty((m_max, n), dtype=complex)
    V[0] = v / nrm
    alpha = np.empty(m_max)
    beta = np.empty(m_max)
    matvecs = 0
    est = np.inf
    y = None
    for m in range(m_max):
        w = apply_B(V[m])
        matvecs += 1
        alpha[m] = np.vdot(V[m], w).real
        w = w - alpha[m] * V[m]
        if m > 0:
            w -= beta[m - 1] * V[m - 1]
        if cfg.reorthogonalize:
            _orthogonalize(w, V[: m + 1])
        beta[m] = np.linalg.norm(w)
        y = _tridiag_exp_e1(alpha[: m + 1], beta[:m], tau)
        est = beta[m] * abs(y[m])
        if est <= cfg.tol or m + 1 == n:
            return nrm * (y @ V[: m + 1]), matvecs
        if m + 1 < m_max:
            V[m + 1] = w / beta[m]

    best = nrm * (y @ V[:m_max])
    raise KrylovBreakdown(
        f"Lanczos exponential not converged after {m_max} iterations "
        f"(estimate {est:.3e} > tol {cfg.tol:.1e}, tau={tau:.4g})",
        best,
        est * nrm,
        matvecs,
    )


def lanczos_basis(apply_B: MatVec, v: np.ndarray, m: int, reorthogonalize: bool = True):
    """Plain ``m``-step Lanczos; returns the basis rows and ``(alpha, beta)``."""
    v = np.asarray(v, dtype=complex)
    n = v.shape[0]
    m = min(m, n)
    V = np.zeros((m, n), dtype=complex)
    V[0] = v / np.linalg.norm(v)
    alpha, beta = np.zeros(m), np.zeros(m)
    for k in range(m):
        w = apply_B(V[k])
        alpha[k] = np.vdot(V[k], w).real
        w = w - alpha[k] * V[k]
        if k > 0:
            w -= beta[k - 1] * V[k - 1]
        if reorthogonalize:
            _orthogonalize(w, V[: k + 1])
        beta[k] = np.linalg.norm(w)
        if k + 1 < m:
            if beta[k] == 0.0:
                return V[: k + 1], alpha[: k + 1], beta[: k + 1]
            V[k + 1] = w / beta[k]
    return V, alpha, beta


class GroundState(NamedTuple):
    energy: float
    vector: np.ndarray
    matvecs: int
    residual: float
    gap: float
    degenerate: bool


def _lowest_pair(apply_H, x, tol, m_max, max_restarts, deflate):
    """Restarted Lanczos for the lowest eigenpair in the complement of ``deflate``."""
    n = x.shape[0]
    matvecs = 0

    def op(u):
        nonlocal matvecs
        matvecs += 1
        if deflate is not None:
            u = u - deflate.T @ (deflate.conj() @ u)
            out = apply_H(u)
            return out - deflate.T @ (deflate.conj() @ out)
        return apply_H(u)

    if deflate is not None:
        x = x - deflate.T @ (deflate.conj() @ x)
    x = x / np.linalg.norm(x)
    energy, resid = np.nan, np.inf
    m_cap = min(m_max, n - (0 if deflate is None else deflate.shape[0]))
    for _ in range(max_restarts):
        V = np.empty((m_cap, n), dtype=complex)
        V[0] = x
        alpha, beta = np.empty(m_cap), np.empty(m_cap)
        for m in range(m_cap):
            w = op(V[m])
            alpha[m] = np.vdot(V[m], w).real
            w = w - alpha[m] * V[m]
            if m > 0:
                w -= beta[m - 1] * V[m - 1]
            _orthogonalize(w, V[: m + 1])
            if deflate is not None:
                w -= deflate.T @ (deflate.conj() @ w)
            beta[m] = np.linalg.norm(w)
            if m + 1 == m_cap or m % 5 == 4 or beta[m] < tol:
                evals, evecs = eigh_tridiagonal(alpha[: m + 1], beta[:m]) if m else (
                    alpha[:1], np.ones((1, 1)))
                if beta[m] * abs(evecs[m, 0]) <= 0.1 * tol or beta[m] < tol or m + 1 == m_cap:
                    break
            V[m + 1] = w / beta[m]
        x = evecs[:, 0] @ V[: m + 1]
        x /= np.linalg.norm(x)
        hx = op(x)
        energy = float(np.vdot(x, hx).real)
        resid = float(np.linalg.norm(hx - energy * x))
        if resid <= tol:
            break
    return energy, x, resid, matvecs


def ground_state(
    apply_H: MatVec,
    dim: int,
    tol: float = 1e-10,
    seed: int = 0,
    m_max: int = 80,
    max_restarts: int = 200,
    check_degeneracy: bool = True,
) -> GroundState:
    """Lowest eigenpair of a Hermitian operator by restarted Lanczos.

    The start vector is drawn from ``numpy.random.default_rng(seed)``. The
    returned vector is normalized and its largest component is made real
    positive, so results are reproducible.

    When ``check_degeneracy`` is set, a second Lanczos run in the orthogonal
    complement of the ground state estimates the next level; if it lies
    within ``10 * tol`` a :class:`DegenerateGroundState` warning is issued and
    ``degenerate`` is set in the result.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    if dim == 1:
        hx = apply_H(np.ones(1, dtype=complex))
        return GroundState(float(hx[0].real), np.ones(1, dtype=complex), 1, 0.0, np.inf, False)

    energy, psi, resid, mv = _lowest_pair(apply_H, x0, tol, m_max, max_restarts, None)
    k = np.argmax(np.abs(psi))
    psi = psi * (abs(psi[k]) / psi[k])
    psi /= np.linalg.norm(psi)

    gap, degenerate = np.inf, False
    if check_degeneracy and dim > 1:
        x1 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        e1, _, _, mv1 = _lowest_pair(apply_H, x1, tol, m_max, max_restarts, psi[None, :])
        mv += mv1
        gap = e1 - energy
        if gap <= 10 * tol:
            degenerate = True
            warnings.warn(
                f"ground state appears degenerate: E0={energy:.12g}, E1={e1:.12g}",
                DegenerateGroundState,
                stacklevel=2,
            )
    if resid > tol:
        warnings.warn(
            f"ground-state residual {resid:.2e} above tolerance {tol:.1e}", RuntimeWarning,
            stacklevel=2,
        )
    return GroundState(energy, psi, mv, resid, gap, degenerate)
