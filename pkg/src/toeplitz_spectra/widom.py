"""Determinants of finite sections: Widom's formula and independent oracles.

For E off the degeneracy set,

    det(H_N - E) = sum_I G_I^{N+1} q_I,   G_I = (-1)^L det R prod_{i in I} 1/z_i,

where I runs over the L-element subsets of the 2L transfer eigenvalues and
``q_I`` is the determinant of the lower-left block of the projection onto
the eigenvectors labelled by I.
"""
from __future__ import annotations

import cmath
import itertools
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .errors import DegenerateEnergy, MiddleModuliEqual, OverflowRisk, SizeCapExceeded
from .model import BlockSymbol, finite_section
from .projections import q_moment
from .transfer import transfer_eigendata, transfer_matrix

EPS_DENOM = 1e-300
DENSE_LIMIT = 512
DIRECT_CAP = 4000
_LOG_MAX = math.log(np.finfo(float).max) - 1.0


@dataclass(frozen=True)
class LogDet:
    """A complex number stored as ``phase * exp(log_abs)``; ``log_abs`` is
    ``-inf`` for zero."""

    log_abs: float
    phase: complex

    @classmethod
    def from_complex(cls, x: complex) -> "LogDet":
        x = complex(x)
        if x == 0:
            return cls(-math.inf, 1.0 + 0j)
        return cls(math.log(abs(x)), x / abs(x))

    @property
    def value(self) -> complex:
        if self.log_abs == -math.inf:
            return 0j
        if self.log_abs > _LOG_MAX:
            raise OverflowRisk(f"|value| = exp({self.log_abs:.1f}) overflows")
        return self.phase * math.exp(self.log_abs)

    def __complex__(self) -> complex:
        return self.value

    def __abs__(self) -> float:
        return 0.0 if self.log_abs == -math.inf else math.exp(min(self.log_abs, _LOG_MAX))

    def rel_diff(self, other: "LogDet") -> float:
        """``|a - b| / (|a| + |b| + eps)`` evaluated without overflow."""
        m = max(self.log_abs, other.log_abs)
        if m == -math.inf:
            return 0.0
        a = self.phase * math.exp(self.log_abs - m) if self.log_abs > -math.inf else 0j
        b = other.phase * math.exp(other.log_abs - m) if other.log_abs > -math.inf else 0j
        eps = math.exp(min(math.log(EPS_DENOM) - m, 700.0))
        return abs(a - b) / (abs(a) + abs(b) + eps)


@dataclass(frozen=True)
class WidomTerm:
    """One summand: index set ``I`` (0-based labels), ``G_I`` and ``q_I``."""

    I: tuple
    G: complex
    q: complex
    log_G: complex  # log|G| + i arg G


@lru_cache(maxsize=None)
def index_sets(L: int) -> tuple:
    """All L-subsets of ``0..2L-1`` in colexicographic order."""
    combos = itertools.combinations(range(2 * L), L)
    return tuple(sorted(combos, key=lambda c: tuple(reversed(c))))


def widom_terms(H: BlockSymbol, E: complex) -> list:
    """All ``C(2L, L)`` Widom terms at ``E``, sorted by ``|G|`` descending
    (colex order among equal moduli)."""
    ed = transfer_eigendata(H, E)
    if ed.degenerate:
        raise DegenerateEnergy(f"repeated transfer eigenvalue at E={E}", E=E)
    L = H.L
    M = ed.basis
    Minv = np.linalg.inv(M)
    z = ed.eigenvalues
    logz = np.log(z)
    log_c = cmath.log((-1) ** L * H.det_R)
    terms = []
    for I in index_sets(L):
        idx = list(I)
        B = M[L:, idx] @ Minv[idx, :L]
        lg = log_c - complex(np.sum(logz[idx]))
        terms.append(WidomTerm(I, cmath.exp(lg), complex(np.linalg.det(B)), lg))
    terms.sort(key=lambda t: -t.log_G.real)
    return terms


def _projection_blocks(H: BlockSymbol, ed, I):
    L = H.L
    M = ed.basis
    Minv = np.linalg.inv(M)
    P = M[:, list(I)] @ Minv[list(I), :]
    return P[:L, :L], P[L:, :L], P[L:, L:]


def _log_sum(log_terms: list) -> LogDet:
    """Sum ``exp(w_k)`` for complex logs ``w_k`` with compensated summation."""
    log_terms = [w for w in log_terms if w.real > -math.inf]
    if not log_terms:
        return LogDet(-math.inf, 1 + 0j)
    m = max(w.real for w in log_terms)
    parts = [cmath.exp(w - m) for w in log_terms]
    s = complex(math.fsum(p.real for p in parts), math.fsum(p.imag for p in parts))
    if s == 0:
        return LogDet(-math.inf, 1 + 0j)
    return LogDet(m + math.log(abs(s)), s / abs(s))


def _clog(x: complex) -> complex:
    return cmath.log(x) if x != 0 else complex(-math.inf, 0.0)


def widom_det(H: BlockSymbol, E: complex, N: int, variant: str = "main",
              log: bool = False):
    """``det(H_N - E)`` from the sum over index sets.

    variant ``main`` sums ``G^{N+1} q_I``; ``variant2`` sums
    ``G^N det(1 - P_11)``; ``variant3`` sums
    ``det(-R T)^-1 G^{N+2} det(1 - P_22)``, where ``P`` is the projection
    onto ``I``.  With ``log=True`` a :class:`LogDet` is returned and no
    overflow check is made.
    """
    N = int(N)
    ed = transfer_eigendata(H, E)
    if ed.degenerate:
        raise DegenerateEnergy(f"repeated transfer eigenvalue at E={E}", E=E)
    L = H.L
    one = np.eye(L)
    log_c = cmath.log((-1) ** L * H.det_R)
    logz = np.log(ed.eigenvalues)
    logs = []
    if variant == "variant3":
        shift = -cmath.log(np.linalg.det(-H.R @ H.T))
    else:
        shift = 0j
    for I in index_sets(L):
        P11, P21, P22 = _projection_blocks(H, ed, I)
        lg = log_c - complex(np.sum(logz[list(I)]))
        if variant == "main":
            w = (N + 1) * lg + _clog(complex(np.linalg.det(P21)))
        elif variant == "variant2":
            w = N * lg + _clog(complex(np.linalg.det(one - P11)))
        elif variant == "variant3":
            w = (N + 2) * lg + _clog(complex(np.linalg.det(one - P22))) + shift
        else:
            raise ValueError(f"unknown variant {variant!r}")
        logs.append(w)
    out = _log_sum(logs)
    if log:
        return out
    if out.log_abs > _LOG_MAX:
        raise OverflowRisk(f"|det| = exp({out.log_abs:.1f}) exceeds the floating range; "
                           "use log=True", log_abs=out.log_abs)
    return out.value


def _banded_logdet(A: np.ndarray, bw: int) -> LogDet:
    n = A.shape[0]
    kl = ku = bw
    ab = np.zeros((2 * kl + ku + 1, n), dtype=complex)
    for d in range(-kl, ku + 1):
        diag = np.diagonal(A, d)
        row = kl + ku - d
        if d >= 0:
            ab[row, d:] = diag
        else:
            ab[row, :n + d] = diag
    lu, piv, info = lapack.zgbtrf(ab, kl, ku)
    if info < 0:
        raise ValueError(f"zgbtrf argument error {info}")
    diag = lu[kl + ku, :]
    swaps = int(np.sum(piv != np.arange(n)))
    return _product_logdet(diag, swaps)


def _product_logdet(diag: np.ndarray, swaps: int) -> LogDet:
    if np.any(diag == 0):
        return LogDet(-math.inf, 1 + 0j)
    la = float(math.fsum(np.log(np.abs(diag))))
    # phases from angles: diag / |diag| misbehaves for subnormal pivots
    ang = math.fsum(np.angle(diag)) + math.pi * (swaps % 2)
    return LogDet(la, complex(cmath.exp(1j * ang)))


def direct_det(H: BlockSymbol, E: complex, N: int, cap: int = DIRECT_CAP) -> LogDet:
    """Determinant of the assembled finite section ``H_N - E`` by LU with
    partial pivoting (banded storage above 512 rows).

    The section is first conjugated by ``diag(s^n)`` with
    ``s = (|det R| / |det T|)^(1/2L)``, which leaves the determinant unchanged
    but balances the pivots; unbalanced sections with N in the thousands
    otherwise produce pivots below the floating range.
    """
    n = int(N) * H.L
    if n > cap:
        raise SizeCapExceeded(f"N L = {n} exceeds the cap {cap}")
    s = (abs(H.det_R) / abs(H.det_T)) ** (1.0 / (2 * H.L))
    A = finite_section(H, N, s, E)
    if n <= DENSE_LIMIT:
        with warnings.catch_warnings():
            # an exactly singular section is a valid input with determinant 0
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
        swaps = int(np.sum(piv != np.arange(n)))
        return _product_logdet(np.diag(lu), swaps)
    return _banded_logdet(A, 2 * H.L - 1)


def transfer_det(H: BlockSymbol, E: complex, N: int) -> LogDet:
    """``det(H_N - E) = (-1)^{NL} det(T)^N det(top block of (T^E)^N [1; 0])``.

    The power is applied to an L-column frame that is re-orthonormalized by
    QR after every step; the triangular factors carry the magnitude.
    """
    L = H.L
    A = transfer_matrix(H, E)
    X = np.vstack([np.eye(L), np.zeros((L, L))]).astype(complex)
    log_abs = 0.0
    phase = 1 + 0j
    for _ in range(int(N)):
        X, Rf = np.linalg.qr(A @ X)
        d = np.diag(Rf)
        if np.any(d == 0):
            return LogDet(-math.inf, 1 + 0j)
        log_abs += float(np.sum(np.log(np.abs(d))))
        phase *= np.prod(d / np.abs(d))
    top = LogDet.from_complex(np.linalg.det(X[:L, :L]))
    lt = LogDet.from_complex(H.det_T)
    if top.log_abs == -math.inf:
        return top
    ph = phase * top.phase * lt.phase ** N * (-1) ** (N * L)
    return LogDet(log_abs + top.log_abs + N * lt.log_abs, complex(ph / abs(ph)))


# -- determinant identities for the lower moments ---------------------------------

@dataclass(frozen=True)
class QIdentityReport:
    """Three expressions that coincide at every E off Λ:

    ``det Q1``, ``det(1 - T Q0) / G`` and ``G det(Q2 R) / det(-R T)``,
    with all moments taken on a circle between ``|z_L|`` and ``|z_{L+1}|``.
    """

    E: complex
    s: float
    values: tuple
    discrepancy: float
    middle_gap: float
    near_lambda: bool


def q_identity_check(H: BlockSymbol, E: complex, s: Optional[float] = None,
                     gap_warn: float = 1e-3, method: Optional[str] = None) -> QIdentityReport:
    """Evaluate the three expressions for ``det Q1`` at ``E``.

    Moments come from contour quadrature, except near Λ (middle gap below
    ``gap_warn``) where the trapezoid rule would need too many nodes and the
    Schur projection is used instead; pass ``method`` to force a route.
    """
    ed = transfer_eigendata(H, E)
    L = H.L
    m = ed.moduli
    if not m[L] > m[L - 1] * (1 + 1e-12):
        raise MiddleModuliEqual(f"|z_L| = |z_L+1| at E={E}", E=E)
    s = float(ed.middle_radius if s is None else s)
    if not m[L - 1] < s < m[L]:
        raise ValueError("s must lie strictly between the middle moduli")
    if method is None:
        method = "schur" if ed.middle_gap < gap_warn else "contour"
    Q0, Q1, Q2 = (q_moment(H, E, s, j, method) for j in range(3))
    G0 = (-1) ** L * H.det_R / np.prod(ed.eigenvalues[:L])
    one = np.eye(L)
    v1 = complex(np.linalg.det(Q1))
    v2 = complex(np.linalg.det(one - H.T @ Q0)) / G0
    v3 = complex(G0 * np.linalg.det(Q2 @ H.R) / np.linalg.det(-H.R @ H.T))
    vals = (v1, v2, v3)
    scale = max(abs(v) for v in vals) + EPS_DENOM
    disc = max(abs(a - b) for a, b in itertools.combinations(vals, 2)) / scale
    return QIdentityReport(complex(E), s, vals, float(disc), ed.middle_gap,
                           ed.middle_gap < gap_warn)


# -- seeded cross-validation batch -------------------------------------------------

@dataclass(frozen=True)
class CrossCheck:
    case: int
    L: int
    N: int
    E: complex
    direct: complex
    values: dict
    discrepancy: float
    passed: bool


def random_instance(rng: np.random.Generator, L: int, min_gap: float = 1e-3):
    """Random symbol with Gaussian entries and an energy whose middle gap
    exceeds ``min_gap`` and which is off the degeneracy set."""
    from .model import new_block_symbol

    def cmat():
        return rng.normal(size=(L, L)) + 1j * rng.normal(size=(L, L))

    while True:
        try:
            H = new_block_symbol(L, cmat(), cmat(), cmat())
        except ValueError:
            continue
        for _ in range(50):
            E = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
            ed = transfer_eigendata(H, E)
            if ed.middle_gap > min_gap and not ed.degenerate:
                return H, E


def widom_crosscheck(seed: int, cases: int = 100, tol: float = 1e-6) -> list:
    """Compare the three Widom variants against :func:`direct_det` on
    seeded random instances (L in 1..3, N in 2..8)."""
    rng = np.random.default_rng(seed)
    out = []
    for case in range(cases):
        L = int(rng.integers(1, 4))
        N = int(rng.integers(2, 9))
        H, E = random_instance(rng, L)
        d = direct_det(H, E, N)
        vals = {v: widom_det(H, E, N, variant=v, log=True)
                for v in ("main", "variant2", "variant3")}
        disc = max(d.rel_diff(w) for w in vals.values())
        out.append(CrossCheck(case, L, N, E, d.value, {k: v.value for k, v in vals.items()},
                              float(disc), bool(disc <= tol)))
    return out
