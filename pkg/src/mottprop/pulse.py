"""Logistic switch-on drive and the time-dependent generator ``A(t) = -i H(t)``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .hubbard import SparseOperator


def _logistic(x):
    """Overflow-safe ``1 / (1 + exp(-x))`` for scalars and arrays."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DriveProfile:
    """Switch ``g(t) = 1 - 1/(exp((t - t_switch)/width) + 1)``, rising from 0 to 1 around ``t_switch``."""

    t_switch: float
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"switch width must be positive, got {self.width}")

    def __call__(self, t):
        return g_eval(self, t)

    def derivative(self, order: int, t):
        return g_derivative(self, order, t)


def g_eval(profile: DriveProfile, t):
    return _logistic((np.asarray(t, dtype=float) - profile.t_switch) / profile.width)


def g_derivative(profile: DriveProfile, order: int, t):
    """Analytic ``g'`` or ``g''``.

    With ``s = g(t)``: ``g' = s(1-s)/width`` and ``g'' = s(1-s)(1-2s)/width**2``.
    """
    s = g_eval(profile, t)
    q = s * (1.0 - s)
    if order == 1:
        return q / profile.width
    if order == 2:
        return q * (1.0 - 2.0 * s) / profile.width**2
    raise ValueError(f"only derivative orders 1 and 2 are available, got {order}")


@dataclass
class Generator:
    """``A(t) = -i (H_stat + sum_b g_b(t) H_pot_b)`` with a matvec tally.

    Each driven term is a ``(DriveProfile, diagonal)`` pair; diagonals are
    kept as dense vectors so that applying them is a single elementwise
    product. Every operator-vector product (generator, Hermitian part, or a
    single diagonal) adds one to :attr:`matvecs`.
    """

    h_stat: SparseOperator
    drives: List[Tuple[DriveProfile, np.ndarray]] = field(default_factory=list)
    matvecs: int = 0

    def __post_init__(self):
        dim = self.h_stat.dim
        terms = []
        for profile, pot in self.drives:
            diag = pot.diagonal() if isinstance(pot, SparseOperator) else np.asarray(pot)
            if isinstance(pot, SparseOperator) and not pot.is_diagonal():
                raise ValueError("driven operators must be diagonal")
            diag = np.real_if_close(diag).astype(float)
            if diag.shape != (dim,):
                raise ValueError(f"potential of length {diag.shape} for dimension {dim}")
            terms.append((profile, diag))
        self.drives = terms
        self._stat = self.h_stat.matrix

    @classmethod
    def single(cls, h_stat: SparseOperator, h_pot, drive: DriveProfile) -> "Generator":
        return cls(h_stat, [(drive, h_pot)])

    @property
    def dim(self) -> int:
        return self.h_stat.dim

    @property
    def drive(self) -> DriveProfile | None:
        return self.drives[0][0] if self.drives else None

    def g_values(self, t: float) -> np.ndarray:
        return np.array([float(p(t)) for p, _ in self.drives])

    def _check(self, v: np.ndarray) -> None:
        if v.shape != (self.dim,):
            raise ValueError(f"vector of shape {v.shape} for operator dimension {self.dim}")

    def combination(self, w_stat: float, w_pot: Sequence[float], v: np.ndarray) -> np.ndarray:
        """``(w_stat H_stat + sum_b w_pot[b] H_pot_b) v`` as one counted matvec."""
        self._check(v)
        self.matvecs += 1
        out = self._stat @ v
        if w_stat != 1.0:
            out *= w_stat
        for w, (_, diag) in zip(w_pot, self.drives):
            if w != 0.0:
                out += (w * diag) * v
        return out

    def hermitian_apply(self, t: float, v: np.ndarray) -> np.ndarray:
        return self.combination(1.0, self.g_values(t), v)

    def apply(self, t: float, v: np.ndarray) -> np.ndarray:
        """``A(t) v = -i H(t) v``."""
        return -1j * self.hermitian_apply(t, v)

    def potential_apply(self, weights: Sequence[float], v: np.ndarray) -> np.ndarray:
        """``sum_b weights[b] H_pot_b v`` (diagonal scaling, one counted matvec)."""
        self._check(v)
        self.matvecs += 1
        out = np.zeros_like(v, dtype=complex)
        for w, (_, diag) in zip(weights, self.drives):
            if w != 0.0:
                out += (w * diag) * v
        return out

    def derivative_apply(self, order: int, t: float, v: np.ndarray) -> np.ndarray:
        """``A^(k)(t) v = -i sum_b g_b^(k)(t) H_pot_b v`` for ``k`` in {1, 2}."""
        weights = [float(p.derivative(order, t)) for p, _ in self.drives]
        return -1j * self.potential_apply(weights, v)

    def hermitian_matrix(self, t: float) -> np.ndarray:
        """Dense ``H(t)``; uncounted, for oracles on small systems."""
        h = self.h_stat.toarray()
        for p, diag in self.drives:
            h = h + float(p(t)) * np.diag(diag)
        return h

    def potential_matrix(self, weights: Sequence[float] | None = None) -> np.ndarray:
        weights = [1.0] * len(self.drives) if weights is None else weights
        d = np.zeros(self.dim)
        for w, (_, diag) in zip(weights, self.drives):
            d = d + w * diag
        return np.diag(d)


def generator_apply(gen: Generator, t: float, v: np.ndarray) -> np.ndarray:
    return gen.apply(t, v)


def generator_derivative_apply(gen: Generator, order: int, t: float, v: np.ndarray) -> np.ndarray:
    return gen.derivative_apply(order, t, v)
