"""Commutator-free Magnus-type integrators and their defect-based error estimate.

A scheme advances ``u' = A(t) u`` over ``[t, t + tau]`` as

    u_next = exp(Omega_J) ... exp(Omega_1) u,
    Omega_j = tau * sum_k a[j, k] A(t + c[k] tau).

Since ``A(t) = -i (H_stat + sum_b g_b(t) H_pot_b)``, each ``Omega_j`` is
``-i tau`` times a Hermitian combination of ``H_stat`` and the diagonal
potentials, which is handed to the Lanczos exponential matrix-free.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial, sqrt
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .krylov import KrylovConfig, expmv
from .pulse import Generator


class SchemeError(ValueError):
    pass


@dataclass(frozen=True)
class CFMScheme:
    name: str
    order: int
    c: tuple
    a: tuple

    def __post_init__(self):
        c = tuple(float(x) for x in self.c)
        a = tuple(tuple(float(x) for x in row) for row in self.a)
        if not a or any(len(row) != len(c) for row in a):
            raise SchemeError(f"scheme {self.name}: coefficient rows must each have K={len(c)} entries")
        if any(not 0.0 <= x <= 1.0 for x in c):
            raise SchemeError(f"scheme {self.name}: nodes must lie in [0, 1]")
        if self.order < 1:
            raise SchemeError("order must be positive")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "a", a)

    @property
    def J(self) -> int:
        return len(self.a)

    @property
    def K(self) -> int:
        return len(self.c)

    @property
    def p(self) -> int:
        return self.order

    def coeffs(self) -> np.ndarray:
        return np.array(self.a)

    def nodes(self) -> np.ndarray:
        return np.array(self.c)


def order_residuals(scheme: CFMScheme) -> tuple:
    """Residuals of the order-1 and order-2 conditions.

    ``r1 = |sum a_jk - 1|`` and ``r2 = |sum a_jk c_k - 1/2|``. Conditions for
    higher orders depend on the scheme structure and are only checked
    empirically (see :func:`empirical_order`).
    """
    a, c = scheme.coeffs(), scheme.nodes()
    r1 = abs(a.sum() - 1.0)
    r2 = abs((a @ c).sum() - 0.5)
    return float(r1), float(r2)


_S3 = sqrt(3.0)
_BUILTIN = {
    # exponential midpoint rule
    "CF2": CFMScheme("CF2", 2, (0.5,), ((1.0,),)),
    # two exponentials on the Gauss-Legendre nodes
    "CF4": CFMScheme(
        "CF4",
        4,
        (0.5 - _S3 / 6, 0.5 + _S3 / 6),
        ((0.25 + _S3 / 6, 0.25 - _S3 / 6), (0.25 - _S3 / 6, 0.25 + _S3 / 6)),
    ),
}


def builtin_scheme(name: str) -> CFMScheme:
    try:
        return _BUILTIN[name.upper()]
    except KeyError:
        raise SchemeError(f"unknown scheme {name!r}; built-in schemes: {sorted(_BUILTIN)}") from None


def builtin_names() -> List[str]:
    return sorted(_BUILTIN)


# -- scheme tables -----------------------------------------------------------

_REQUIRED = ("name", "order", "J", "K", "c", "a")
_TABLE_TOL = 1e-13


def _parse_number(tok: str) -> float:
    tok = tok.strip()
    if "/" in tok:
        try:
            return float(Fraction(tok))
        except (ValueError, ZeroDivisionError) as exc:
            raise SchemeError(f"bad rational literal {tok!r}") from exc
    try:
        return float(tok)
    except ValueError as exc:
        raise SchemeError(f"bad number {tok!r}") from exc


def _parse_row(text: str) -> List[float]:
    toks = [t for t in re.split(r"[,\s]+", text.strip()) if t]
    return [_parse_number(t) for t in toks]


def load_scheme_table(text: str) -> CFMScheme:
    """Parse a scheme table.

    Format: one ``key = value`` per line, ``#`` starts a comment. Keys are
    ``name``, ``order``, ``J``, ``K``, ``c`` (K numbers) and ``a`` (J rows of
    K numbers, rows separated by ``;``). Numbers are decimal or ``p/q``
    rationals, separated by whitespace or commas::

        name  = CF2
        order = 2
        J = 1
        K = 1
        c = 1/2
        a = 1
    """
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SchemeError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _REQUIRED:
            raise SchemeError(f"line {lineno}: unknown key {key!r}")
        if key in fields:
            raise SchemeError(f"line {lineno}: duplicate key {key!r}")
        fields[key] = value
    missing = [k for k in _REQUIRED if k not in fields]
    if missing:
        raise SchemeError(f"scheme table missing keys: {', '.join(missing)}")

    try:
        order, J, K = int(fields["order"]), int(fields["J"]), int(fields["K"])
    except ValueError as exc:
        raise SchemeError(f"order/J/K must be integers: {exc}") from exc
    c = _parse_row(fields["c"])
    rows = [_parse_row(r) for r in fields["a"].split(";") if r.strip()]
    if len(c) != K:
        raise SchemeError(f"c has {len(c)} entries, K = {K}")
    if len(rows) != J:
        raise SchemeError(f"a has {len(rows)} rows, J = {J}")
    for j, row in enumerate(rows, 1):
        if len(row) != K:
            raise SchemeError(f"row {j} of a has {len(row)} entries, K = {K} (ragged table)")

    scheme = CFMScheme(fields["name"], order, tuple(c), tuple(tuple(r) for r in rows))
    r1, r2 = order_residuals(scheme)
    if r1 > _TABLE_TOL:
        raise SchemeError(f"consistency condition violated: |sum a - 1| = {r1:.3e}")
    if order >= 2 and r2 > _TABLE_TOL:
        raise SchemeError(f"order-2 condition violated: |sum a c - 1/2| = {r2:.3e}")
    return scheme


def dump_scheme_table(scheme: CFMScheme) -> str:
    lines = [
        f"name = {scheme.name}",
        f"order = {scheme.order}",
        f"J = {scheme.J}",
        f"K = {scheme.K}",
        "c = " + " ".join(repr(x) for x in scheme.c),
        "a = " + " ; ".join(" ".join(repr(x) for x in row) for row in scheme.a),
    ]
    return "\n".join(lines) + "\n"


def resolve_scheme(name_or_path: str) -> CFMScheme:
    """Built-in name, or a path to a scheme table file."""
    if name_or_path.upper() in _BUILTIN:
        return builtin_scheme(name_or_path)
    try:
        with open(name_or_path) as fh:
            return load_scheme_table(fh.read())
    except OSError as exc:
        raise SchemeError(f"{name_or_path!r} is neither a built-in scheme nor a readable table: {exc}") from exc


# -- stepping ----------------------------------------------------------------


@dataclass
class StepResult:
    u_next: np.ndarray
    est: float = float("nan")
    matvecs: int = 0
    krylov_dims: List[int] = field(default_factory=list)
    stages: List[np.ndarray] = field(default_factory=list, repr=False)


class _Exponents:
    """Weights of ``Omega_j`` and of its tau-derivative for one step."""

    def __init__(self, scheme: CFMScheme, gen: Generator, t_n: float, tau: float):
        a, c = scheme.coeffs(), scheme.nodes()
        times = t_n + c * tau
        nb = len(gen.drives)
        g = np.array([[float(p(t)) for p, _ in gen.drives] for t in times]).reshape(len(c), nb)
        self.w_stat = a.sum(axis=1)
        self.w_pot = a @ g
        self.tau = tau
        if tau != 0.0:
            gp = np.array(
                [[float(p.derivative(1, t)) for p, _ in gen.drives] for t in times]
            ).reshape(len(c), nb)
            # Omega_j' - Omega_j / tau = -i tau sum_k a_jk c_k g'(t_k) H_pot
            self.w_slope = tau * (a @ (c[:, None] * gp))
        else:
            self.w_slope = np.zeros_like(self.w_pot)


def _hermitian_op(gen: Generator, w_stat: float, w_pot: np.ndarray):
    return lambda v: gen.combination(w_stat, w_pot, v)


def cfm_step(
    scheme: CFMScheme,
    gen: Generator,
    t_n: float,
    tau: float,
    u: np.ndarray,
    kcfg: KrylovConfig = KrylovConfig(),
) -> StepResult:
    """One step ``exp(Omega_J) ... exp(Omega_1) u`` (no error estimate)."""
    if tau < 0:
        raise ValueError("step size must be non-negative")
    ex = _Exponents(scheme, gen, t_n, tau)
    x = np.asarray(u, dtype=complex)
    stages = [x]
    dims = []
    for j in range(scheme.J):
        x, mv = expmv(_hermitian_op(gen, ex.w_stat[j], ex.w_pot[j]), tau, x, kcfg)
        dims.append(mv)
        stages.append(x)
    return StepResult(x, matvecs=sum(dims), krylov_dims=dims, stages=stages)


def _gamma_apply(gen: Generator, ex: _Exponents, j: int, v: np.ndarray, k_max: int) -> np.ndarray:
    """``dexp_{Omega_j}(Omega_j') v`` truncated after ``ad^k_max``.

    ``ad_Omega(Omega')`` equals ``ad_Omega(C)`` with the diagonal remainder
    ``C = Omega' - Omega / tau``, so the series is evaluated as
    ``sum_k 1/(k+1)! sum_i (-1)^i binom(k, i) Omega^(k-i) C Omega^i v``,
    grouped by powers of ``Omega`` and applied Horner-style.
    """
    tau = ex.tau
    w_stat, w_pot, w_slope = ex.w_stat[j], ex.w_pot[j], ex.w_slope[j]

    # Omega_j' v
    out = -1j * gen.combination(w_stat, w_pot + w_slope, v)
    if not np.any(w_slope):
        return out

    def omega(x):
        return -1j * tau * gen.combination(w_stat, w_pot, x)

    def cmat(x):
        return -1j * gen.potential_apply(w_slope, x)

    powers = [v]
    for _ in range(k_max):
        powers.append(omega(powers[-1]))
    xs = [cmat(p) for p in powers]
    acc = None
    for m in range(k_max, -1, -1):
        y = np.zeros_like(v, dtype=complex)
        for i in range(0, k_max - m + 1):
            k = m + i
            if k == 0:
                continue
            y += ((-1) ** i * comb(k, i) / factorial(k + 1)) * xs[i]
        acc = y if acc is None else y + omega(acc)
    return out + acc


def defect_estimate(
    scheme: CFMScheme,
    gen: Generator,
    t_n: float,
    tau: float,
    u: np.ndarray,
    u_next: np.ndarray,
    kcfg: KrylovConfig = KrylovConfig(),
    k_max: Optional[int] = None,
    stages: Optional[Sequence[np.ndarray]] = None,
) -> float:
    """Defect-based local error estimate ``|| tau/(p+1) * D(tau) ||``.

    ``D(tau) = d/dtau [S(tau) u] - A(t_n + tau) S(tau) u``, with the
    derivative of the exponential product expanded by the product rule and
    each factor's derivative written as ``dexp``. Pass ``stages`` from
    :func:`cfm_step` to reuse the intermediate vectors.
    """
    k_max = scheme.order if k_max is None else k_max
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if tau == 0.0:
        return 0.0
    ex = _Exponents(scheme, gen, t_n, tau)
    if stages is None:
        stages = cfm_step(scheme, gen, t_n, tau, u, kcfg).stages
    acc = None
    for j in range(scheme.J):
        if acc is not None:
            if np.any(acc):
                acc, _ = expmv(_hermitian_op(gen, ex.w_stat[j], ex.w_pot[j]), tau, acc, kcfg)
        gam = _gamma_apply(gen, ex, j, stages[j + 1], k_max)
        acc = gam if acc is None else acc + gam
    defect = acc - gen.apply(t_n + tau, np.asarray(u_next, dtype=complex))
    return float(tau / (scheme.order + 1) * np.linalg.norm(defect))


def step_with_estimate(
    scheme: CFMScheme,
    gen: Generator,
    t_n: float,
    tau: float,
    u: np.ndarray,
    kcfg: KrylovConfig = KrylovConfig(),
    k_max: Optional[int] = None,
) -> StepResult:
    before = gen.matvecs
    res = cfm_step(scheme, gen, t_n, tau, u, kcfg)
    res.est = defect_estimate(scheme, gen, t_n, tau, u, res.u_next, kcfg, k_max, res.stages)
    res.matvecs = gen.matvecs - before
    return res


# -- empirical order ---------------------------------------------------------


def reference_flow(gen: Generator, t_start: float, t_end: float, u: np.ndarray,
                   rtol: float = 1e-13, atol: float = 1e-15) -> np.ndarray:
    """High-accuracy Runge-Kutta (DOP853) solution of ``u' = A(t) u``.

    Independent of the exponential integrators; intended as an oracle for
    small systems.
    """
    if t_end == t_start:
        return np.asarray(u, dtype=complex).copy()
    sol = solve_ivp(
        lambda t, y: gen.apply(t, y),
        (t_start, t_end),
        np.asarray(u, dtype=complex),
        method="DOP853",
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise RuntimeError(f"reference solve failed: {sol.message}")
    return sol.y[:, -1]


def local_errors(
    scheme: CFMScheme,
    gen: Generator,
    t_n: float,
    u: np.ndarray,
    tau_list: Sequence[float],
    kcfg: KrylovConfig = KrylovConfig(),
    reference: Optional[Callable] = None,
) -> np.ndarray:
    """``||cfm_step(tau) - exact flow||`` for each ``tau``."""
    reference = reference or (lambda a, b, v: reference_flow(gen, a, b, v))
    errs = []
    for tau in tau_list:
        num = cfm_step(scheme, gen, t_n, tau, u, kcfg).u_next
        errs.append(np.linalg.norm(num - reference(t_n, t_n + tau, u)))
    return np.array(errs)


def fit_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x)), np.log(np.asarray(y)), 1)[0])


def empirical_order(
    scheme: CFMScheme,
    gen: Generator,
    t_n: float,
    u: np.ndarray,
    tau_list: Sequence[float],
    kcfg: KrylovConfig = KrylovConfig(),
    reference: Optional[Callable] = None,
) -> float:
    """Observed local order: slope of ``log ||L(tau)||`` vs ``log tau``.

    An order-``p`` scheme gives a slope near ``p + 1``. ``tau_list`` must be
    dyadic (each entry half the previous) with at least three entries.
    """
    taus = np.asarray(tau_list, dtype=float)
    if len(taus) < 3:
        raise ValueError("need at least three step sizes")
    if not np.allclose(taus[1:] / taus[:-1], 0.5, rtol=1e-12):
        raise ValueError("step sizes must halve successively")
    errs = local_errors(scheme, gen, t_n, u, taus, kcfg, reference)
    return fit_slope(taus, errs)
