"""Fock basis and sparse Hubbard Hamiltonians in second quantization.

Basis states are integer bit patterns over ``2 * n_sites`` spin-orbitals.
Orbital ``a = 2 * site + spin`` (spin 0 = up, 1 = down), and the
Jordan-Wigner sign of ``c_a`` is ``(-1)**(number of occupied orbitals < a)``.
Sites are 0-based throughout the code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

UP, DOWN = 0, 1

SpinLike = Union[int, str]


def spin_index(spin: SpinLike) -> int:
    if isinstance(spin, str):
        key = spin.lower()
        if key in ("up", "u", "↑"):
            return UP
        if key in ("down", "dn", "d", "↓"):
            return DOWN
        raise ValueError(f"unknown spin label {spin!r}")
    if spin in (UP, DOWN):
        return int(spin)
    raise ValueError(f"spin must be 0 (up) or 1 (down), got {spin!r}")


def orbital(site: int, spin: SpinLike) -> int:
    return 2 * site + spin_index(spin)


@dataclass(frozen=True)
class HubbardParams:
    """Single-band Hubbard model with local interaction.

    Attributes
    ----------
    n_sites : int
    hopping : (N, N) real symmetric array ``v_ij``; diagonal entries act as
        on-site energies.
    interaction : float
        On-site repulsion ``U >= 0``.
    site_potentials : (N,) real array ``V_i`` coupling to the drive.
    """

    n_sites: int
    hopping: np.ndarray
    interaction: float = 0.0
    site_potentials: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("n_sites must be positive")
        hop = np.asarray(self.hopping, dtype=float)
        if hop.shape != (self.n_sites, self.n_sites):
            raise ValueError(f"hopping must be {self.n_sites}x{self.n_sites}, got {hop.shape}")
        if not np.array_equal(hop, hop.T):
            raise ValueError("hopping matrix must be symmetric")
        if self.interaction < 0:
            raise ValueError("interaction U must be non-negative")
        pots = self.site_potentials
        pots = np.zeros(self.n_sites) if pots is None else np.asarray(pots, dtype=float)
        if pots.shape != (self.n_sites,):
            raise ValueError(f"site_potentials must have length {self.n_sites}")
        object.__setattr__(self, "hopping", hop)
        object.__setattr__(self, "site_potentials", pots)


def chain_hopping(n_sites: int, v: float, periodic: bool = False) -> np.ndarray:
    """Nearest-neighbour hopping matrix of a chain (open by default)."""
    hop = np.zeros((n_sites, n_sites))
    for i in range(n_sites - 1):
        hop[i, i + 1] = hop[i + 1, i] = v
    if periodic and n_sites > 2:
        hop[0, -1] = hop[-1, 0] = v
    return hop


@dataclass(frozen=True)
class FockBasis:
    """Sorted occupation bit patterns with an inverse index map."""

    n_sites: int
    sector: Optional[Tuple[int, int]]
    states: np.ndarray
    index_of: dict = field(repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def n_orbitals(self) -> int:
        return 2 * self.n_sites

    def index(self, pattern: int) -> int:
        return self.index_of[int(pattern)]

    def occupations(self, site: int, spin: SpinLike) -> np.ndarray:
        """0/1 occupation of orbital ``(site, spin)`` for every basis state."""
        self._check_site(site)
        return ((self.states >> orbital(site, spin)) & 1).astype(float)

    def _check_site(self, site: int) -> None:
        if not 0 <= site < self.n_sites:
            raise IndexError(f"site {site} out of range for {self.n_sites} sites")


def enumerate_basis(n_sites: int, sector: Optional[Tuple[int, int]] = None) -> FockBasis:
    """Enumerate the Fock basis, optionally restricted to ``(N_up, N_down)``.

    The full space has ``4**n_sites`` states; a sector has
    ``comb(n, N_up) * comb(n, N_down)``.
    """
    if n_sites < 1:
        raise ValueError("n_sites must be >= 1")
    if sector is None:
        states = np.arange(4**n_sites, dtype=np.int64)
    else:
        n_up, n_dn = (int(x) for x in sector)
        if not (0 <= n_up <= n_sites and 0 <= n_dn <= n_sites):
            raise ValueError(f"sector {sector} out of range for {n_sites} sites")
        up_masks = [_spin_mask(c, UP) for c in combinations(range(n_sites), n_up)]
        dn_masks = [_spin_mask(c, DOWN) for c in combinations(range(n_sites), n_dn)]
        states = np.array(sorted(u | d for u in up_masks for d in dn_masks), dtype=np.int64)
        assert len(states) == comb(n_sites, n_up) * comb(n_sites, n_dn)
        sector = (n_up, n_dn)
    index_of = {int(s): k for k, s in enumerate(states)}
    states.setflags(write=False)
    return FockBasis(n_sites, sector, states, index_of)


def _spin_mask(sites, spin: int) -> int:
    mask = 0
    for s in sites:
        mask |= 1 << (2 * s + spin)
    return mask


def _parity_below(pattern: int, a: int) -> int:
    return bin(pattern & ((1 << a) - 1)).count("1") & 1


def apply_hop(basis: FockBasis, i: int, j: int, spin: SpinLike, state_index: int):
    """Apply ``c†_{j,spin} c_{i,spin}`` to one basis state.

    Returns ``None`` when the result vanishes, otherwise
    ``(target_index, sign)``. For ``i == j`` this is the number operator.
    """
    basis._check_site(i)
    basis._check_site(j)
    s = spin_index(spin)
    pattern = int(basis.states[state_index])
    a, b = 2 * i + s, 2 * j + s
    if not (pattern >> a) & 1:
        return None
    if a == b:
        return state_index, 1
    if (pattern >> b) & 1:
        return None
    sign = _parity_below(pattern, a)
    pattern ^= 1 << a
    sign ^= _parity_below(pattern, b)
    pattern |= 1 << b
    target = basis.index_of.get(pattern)
    if target is None:
        # only possible for a basis that is not closed under hopping
        return None
    return target, -1 if sign else 1


def _hop_arrays(states: np.ndarray, a: int, b: int):
    """Vectorised ``c†_b c_a`` over all states: (mask, new_states, signs)."""
    occ_a = (states >> a) & 1
    occ_b = (states >> b) & 1
    ok = (occ_a == 1) & (occ_b == 0)
    src = states[ok]
    p1 = np.bitwise_count(src & ((1 << a) - 1)) & 1
    mid = src ^ (1 << a)
    p2 = np.bitwise_count(mid & ((1 << b) - 1)) & 1
    new = mid | (1 << b)
    signs = np.where((p1 ^ p2) == 1, -1.0, 1.0)
    return ok, new, signs


@dataclass(frozen=True)
class SparseOperator:
    """CSR matrix over a Fock basis, with canonical storage.

    Stored entries are deduplicated, sorted by column within each row and
    explicit zeros are dropped.
    """

    matrix: sp.csr_matrix
    hermitian: bool = False

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=complex)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def __matmul__(self, v):
        return self.matrix @ v

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def is_diagonal(self) -> bool:
        coo = self.matrix.tocoo()
        return bool(np.all(coo.row == coo.col))

    def is_exactly_hermitian(self) -> bool:
        """Entry-for-entry comparison with the explicit conjugate transpose."""
        m = self.matrix
        h = sp.csr_matrix(m.conj().T)
        h.sort_indices()
        return (
            np.array_equal(m.indptr, h.indptr)
            and np.array_equal(m.indices, h.indices)
            and np.array_equal(m.data, h.data)
        )


def assemble_static(params: HubbardParams, basis: FockBasis) -> SparseOperator:
    """``sum_ijσ v_ij c†_jσ c_iσ + U sum_i n_i↑ n_i↓`` as a Hermitian operator."""
    if basis.n_sites != params.n_sites:
        raise ValueError(
            f"basis has {basis.n_sites} sites but params have {params.n_sites}"
        )
    states = basis.states
    dim = len(states)
    rows, cols, vals = [], [], []

    diag = np.zeros(dim)
    for i in range(params.n_sites):
        n_up = (states >> (2 * i)) & 1
        n_dn = (states >> (2 * i + 1)) & 1
        diag += params.hopping[i, i] * (n_up + n_dn)
        diag += params.interaction * (n_up * n_dn)
    rows.append(np.arange(dim))
    cols.append(np.arange(dim))
    vals.append(diag)

    src_idx = np.arange(dim)
    lookup = _index_lookup(basis)
    for i in range(params.n_sites):
        for j in range(params.n_sites):
            v = params.hopping[i, j]
            if i == j or v == 0.0:
                continue
            for s in (UP, DOWN):
                ok, new, signs = _hop_arrays(states, 2 * i + s, 2 * j + s)
                target = lookup(new)
                keep = target >= 0
                # entry <target| c†_j c_i |source>
                rows.append(target[keep])
                cols.append(src_idx[ok][keep])
                vals.append(v * signs[keep])

    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    ).tocsr()
    return SparseOperator(mat, hermitian=True)


def _index_lookup(basis: FockBasis):
    states = basis.states

    def lookup(patterns: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(states, patterns)
        pos = np.minimum(pos, len(states) - 1)
        return np.where(states[pos] == patterns, pos, -1)

    return lookup


def potential_diagonal(site_potentials: Sequence[float], basis: FockBasis) -> np.ndarray:
    pots = np.asarray(site_potentials, dtype=float)
    if pots.shape != (basis.n_sites,):
        raise ValueError(
            f"expected {basis.n_sites} site potentials, got shape {pots.shape}"
        )
    diag = np.zeros(basis.dim)
    for i, vi in enumerate(pots):
        if vi != 0.0:
            total = ((basis.states >> (2 * i)) & 1) + ((basis.states >> (2 * i + 1)) & 1)
            diag += vi * total
    return diag


def assemble_potential(site_potentials: Sequence[float], basis: FockBasis) -> SparseOperator:
    """Diagonal operator ``sum_iσ V_i n_iσ``."""
    diag = potential_diagonal(site_potentials, basis)
    return SparseOperator(sp.diags(diag, format="csr"), hermitian=True)


def occupation_expectation(basis: FockBasis, psi: np.ndarray, i: int, spin: SpinLike) -> float:
    """Born-rule expectation ``<psi| n_iσ |psi>``."""
    psi = np.asarray(psi)
    if psi.shape != (basis.dim,):
        raise ValueError(f"state has shape {psi.shape}, basis dimension is {basis.dim}")
    occ = basis.occupations(i, spin)
    return float(np.dot(np.abs(psi) ** 2, occ))


def all_occupations(basis: FockBasis, psi: np.ndarray) -> np.ndarray:
    """(n_sites, 2) array of ``<n_iσ>``; column 0 is up, column 1 down."""
    weights = np.abs(np.asarray(psi)) ** 2
    bits = (basis.states[:, None] >> np.arange(basis.n_orbitals)[None, :]) & 1
    return (weights @ bits).reshape(basis.n_sites, 2)


def annihilation_matrix(basis: FockBasis, a: int) -> np.ndarray:
    """Dense ``c_a`` on a full (unrestricted) basis; used for algebra checks."""
    if basis.sector is not None:
        raise ValueError("annihilators leave a fixed sector; use the full basis")
    dim = basis.dim
    mat = np.zeros((dim, dim))
    for k, pattern in enumerate(basis.states):
        pattern = int(pattern)
        if (pattern >> a) & 1:
            target = basis.index_of[pattern ^ (1 << a)]
            mat[target, k] = -1.0 if _parity_below(pattern, a) else 1.0
    return mat


def occupation_observer(basis: FockBasis):
    """Callable ``psi -> [n_1↑, n_1↓, n_2↑, ...]`` with a ``names`` attribute.

    Names use 1-based site labels (``n1_up``, ``n1_dn``, ...).
    """

    def observe(psi: np.ndarray) -> np.ndarray:
        return all_occupations(basis, psi).ravel()

    observe.names = [f"n{i + 1}_{s}" for i in range(basis.n_sites) for s in ("up", "dn")]
    return observe
