"""Riesz projections of the transfer matrix and the moments Q^(j)_r.

Two independent routes are provided throughout: an eigendecomposition of
the transfer matrix, and trapezoidal quadrature of a resolvent on a
circle.  For a projection ``P`` onto eigenvalues inside ``|z| = r`` one has

    P = diag(T, 1) [[Q0, -Q1], [Q1, R^-1 - Q2]] diag(1, R)

with ``Q_j = (2 pi i)^-1 \\oint z^-j (H(z) - E)^-1 dz``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .errors import DegenerateEnergy, EigenvalueOnContour, QuadratureNotConverged
from .model import BlockSymbol, symbol_batch
from .transfer import TransferEigenData, transfer_eigendata, transfer_matrix

ON_CONTOUR_RTOL = 1e-9
MIN_NODES = 64
MAX_NODES = 4096
QUAD_RTOL = 1e-10
KERNEL_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class RieszData:
    """A Riesz projection of the transfer matrix.

    ``selector`` is either a radius (float) or a tuple of 0-based labels into
    the modulus-sorted eigenvalue list.
    """

    E: complex
    selector: Union[float, tuple]
    P: np.ndarray
    rank: int
    method: str

    @property
    def L(self) -> int:
        return self.P.shape[0] // 2

    def blocks(self):
        L = self.L
        P = self.P
        return P[:L, :L], P[:L, L:], P[L:, :L], P[L:, L:]


def _check_radius(ed: TransferEigenData, r: float):
    if not r > 0:
        raise ValueError("radius must be positive")
    d = np.min(np.abs(ed.moduli - r))
    if d < ON_CONTOUR_RTOL * r:
        raise EigenvalueOnContour(f"eigenvalue within {d:.3g} of the circle |z|={r}",
                                  E=ed.E, r=r)


def _eigen_projector(ed: TransferEigenData, mask: np.ndarray) -> np.ndarray:
    M = ed.basis
    # P = M[:, I] (M^-1)[I, :]; rows of M^-1 via a solve against the identity
    Minv = np.linalg.solve(M, np.eye(M.shape[0]))
    return M[:, mask] @ Minv[mask, :]


def schur_projector(A: np.ndarray, r: float) -> np.ndarray:
    """Spectral projector of ``A`` onto eigenvalues with ``|z| < r``.

    Uses an ordered Schur form and a Sylvester solve, so it stays accurate
    when eigenvalues inside (or outside) the circle nearly coincide.
    """
    Tm, Z, k = scipy.linalg.schur(A, output="complex", sort=lambda x: abs(x) < r)
    n = A.shape[0]
    if k == 0:
        return np.zeros((n, n), dtype=complex)
    if k == n:
        return np.eye(n, dtype=complex)
    T11, T12, T22 = Tm[:k, :k], Tm[:k, k:], Tm[k:, k:]
    X = scipy.linalg.solve_sylvester(T11, -T22, T12)
    Ph = np.zeros((n, n), dtype=complex)
    Ph[:k, :k] = np.eye(k)
    Ph[:k, k:] = X
    return Z @ Ph @ Z.conj().T


def _contour_projector(A: np.ndarray, r: float, nodes: int) -> np.ndarray:
    n = A.shape[0]
    z = r * np.exp(2j * np.pi * (np.arange(nodes) + 0.5) / nodes)
    res = np.linalg.inv(z[:, None, None] * np.eye(n) - A[None])
    return np.tensordot(z, res, axes=(0, 0)) / nodes


def _converge(fn, scale_fn=np.linalg.norm, nodes=None, what="quadrature"):
    """Double the node count until successive values agree to ``QUAD_RTOL``."""
    if nodes is not None:
        return fn(int(nodes)), int(nodes)
    m = MIN_NODES
    prev = fn(m)
    while m < MAX_NODES:
        m *= 2
        cur = fn(m)
        if np.linalg.norm(cur - prev) <= QUAD_RTOL * max(scale_fn(cur), 1.0):
            return cur, m
        prev = cur
    raise QuadratureNotConverged(f"{what} did not converge with {MAX_NODES} nodes")


def riesz_projection(H: BlockSymbol, E: complex, selector, method: str = "eigen",
                     nodes=None) -> RieszData:
    """Riesz projection of the transfer matrix at ``E``.

    Parameters
    ----------
    selector : float or sequence of int
        Radius ``r`` (projection onto eigenvalues with ``|z| < r``) or a set of
        0-based labels into the modulus-sorted eigenvalues.
    method : {"eigen", "contour", "schur"}
        ``contour`` is only available for a radius (or a label set of the
        form ``0..k-1`` separated in modulus from the rest).
    """
    ed = transfer_eigendata(H, E)
    n = 2 * H.L
    if np.isscalar(selector) and not isinstance(selector, (tuple, list)):
        r = float(selector)
        _check_radius(ed, r)
        inside = ed.moduli < r
        if method == "eigen":
            if ed.degenerate:
                P = schur_projector(ed.matrix, r)
            else:
                P = _eigen_projector(ed, inside)
        elif method == "schur":
            P = schur_projector(ed.matrix, r)
        elif method == "contour":
            P, _ = _converge(lambda m: _contour_projector(ed.matrix, r, m), nodes=nodes,
                             what="Riesz projection")
        else:
            raise ValueError(f"unknown method {method!r}")
        return RieszData(complex(E), r, P, int(inside.sum()), method)

    I = tuple(sorted(int(i) for i in selector))
    if any(i < 0 or i >= n for i in I) or len(set(I)) != len(I):
        raise ValueError(f"index set {I} is not a subset of 0..{n - 1}")
    mask = np.zeros(n, dtype=bool)
    mask[list(I)] = True
    if method == "eigen":
        if ed.degenerate:
            raise DegenerateEnergy(f"repeated transfer eigenvalue at E={E}", E=E)
        return RieszData(complex(E), I, _eigen_projector(ed, mask), len(I), "eigen")
    k = len(I)
    if I != tuple(range(k)) or k in (0, n):
        if k in (0, n):
            return RieszData(complex(E), I, np.eye(n, dtype=complex) * (k == n), k, method)
        raise ValueError("contour route needs a label set 0..k-1")
    m = ed.moduli
    if not m[k] > m[k - 1] * (1 + 1e-8):
        raise EigenvalueOnContour("label set is not separated in modulus", E=E)
    r = float(np.sqrt(m[k - 1] * m[k]))
    rd = riesz_projection(H, E, r, method=method, nodes=nodes)
    return RieszData(complex(E), I, rd.P, k, rd.method)


def riesz_by_index(H: BlockSymbol, E: complex, I: Sequence[int]) -> RieszData:
    """Eigen-route projection onto the eigenvectors with (0-based) labels in ``I``."""
    return riesz_projection(H, E, tuple(I), method="eigen")


def moments_from_projection(H: BlockSymbol, P: np.ndarray):
    """Recover ``(Q0, Q1, Q2)`` from a projection via the block identity."""
    L = H.L
    P11, P21, P22 = P[:L, :L], P[L:, :L], P[L:, L:]
    Q0 = np.linalg.solve(H.T, P11)
    Q1 = P21
    Q2 = (np.eye(L) - P22) @ H.R_inv
    return Q0, Q1, Q2


def _quad_moment(H: BlockSymbol, E: complex, r: float, j: int, nodes: int) -> np.ndarray:
    L = H.L
    z = r * np.exp(2j * np.pi * (np.arange(nodes) + 0.5) / nodes)
    res = np.linalg.inv(symbol_batch(H, z) - E * np.eye(L))
    return np.tensordot(z ** (1 - j), res, axes=(0, 0)) / nodes


def q_moment(H: BlockSymbol, E: complex, r: float, j: int, method: str = "contour",
             nodes=None) -> np.ndarray:
    """Moment ``Q^(j)_r(E) = (2 pi i)^-1 \\oint_{|z|=r} z^-j (H(z) - E)^-1 dz``.

    ``method="contour"`` applies the trapezoidal rule with node doubling
    from 64 up to 4096 until consecutive values agree to 1e-10 (relative);
    ``method="eigen"`` reads Q^(0..2) off the Riesz projection.
    """
    r = float(r)
    if method == "contour":
        ed = transfer_eigendata(H, E)
        _check_radius(ed, r)
        Q, _ = _converge(lambda m: _quad_moment(H, E, r, j, m), nodes=nodes,
                         what="moment quadrature")
        return Q
    if method in ("eigen", "schur"):
        if j not in (0, 1, 2):
            raise ValueError("the projection route yields j in {0, 1, 2} only")
        P = riesz_projection(H, E, r, method=method).P
        return moments_from_projection(H, P)[j]
    raise ValueError(f"unknown method {method!r}")


def q_moment_sequence(H: BlockSymbol, E: complex, r: float, j: int, node_counts) -> list:
    """Fixed-node quadrature values, for studying convergence."""
    return [_quad_moment(H, E, float(r), j, int(m)) for m in node_counts]


def kernel_dim(Q: np.ndarray, rtol: float = KERNEL_RTOL, scale: Optional[float] = None) -> int:
    """Number of singular values below ``rtol * max(sigma_max, scale)``.

    ``scale`` guards the case where ``Q`` vanishes altogether, when a purely
    relative cut would find no kernel.
    """
    sv = np.linalg.svd(Q, compute_uv=False)
    ref = max(float(sv[0]), float(scale or 0.0))
    if ref == 0:
        return Q.shape[0]
    return int(np.sum(sv < rtol * ref))


def first_moment_kernel_dim(H: BlockSymbol, E: complex, s: Optional[float] = None,
                            rtol: float = KERNEL_RTOL) -> int:
    """``dim Ker Q^(1)_s(E)``, with ``Q^(1)`` read off the Riesz projection.

    The cut is relative to ``||P|| / ||T||``, the natural size of the
    lower-left block of the projection ``P``.
    """
    ed = transfer_eigendata(H, E)
    s = ed.middle_radius if s is None else float(s)
    P = riesz_projection(H, E, s, method="schur").P
    L = H.L
    return kernel_dim(P[L:, :L], rtol, np.linalg.norm(P, 2) / np.linalg.norm(H.T, 2))


# -- q_I functions --------------------------------------------------------------

def q_index(H: BlockSymbol, E: complex, I: Sequence[int]) -> complex:
    """``q_I(E)``: determinant of the lower-left block of the projection onto ``I``."""
    P = riesz_by_index(H, E, I).P
    L = H.L
    return complex(np.linalg.det(P[L:, :L]))


def q_lower(H: BlockSymbol, E: complex, method: str = "schur") -> complex:
    """``q_{I_0}(E)`` for the lower half ``I_0`` of the sorted eigenvalues.

    Uses the projection onto the L eigenvalues of smallest modulus through a
    separating circle, which stays well defined on F away from the
    degeneracy set of the middle pair.
    """
    ed = transfer_eigendata(H, E)
    L = H.L
    m = ed.moduli
    if not m[L] > m[L - 1]:
        raise EigenvalueOnContour("middle moduli coincide", E=E)
    r = float(np.sqrt(m[L - 1] * m[L]))
    if method == "schur":
        P = schur_projector(ed.matrix, r)
    else:
        P = riesz_projection(H, E, r, method=method).P
    return complex(np.linalg.det(P[L:, :L]))


def q_lower_batch(H: BlockSymbol, energies, offset: int = 0, chunk: int = 20000,
                  cond_max: float = 1e8):
    """Vectorized ``q_I`` with ``I = {0..L-1}`` (``offset=0``) or ``I_1 =
    {0..L-2, L}`` (``offset=1``).

    Returns ``(q, scale)`` where ``scale`` is the Hadamard bound of the
    lower-left block, so ``|q| / scale`` measures how close ``q`` is to zero.
    Points with an ill-conditioned eigenbasis are recomputed by the Schur
    route (``offset=0``) or flagged with ``nan`` (``offset=1``).
    """
    from .transfer import transfer_batch

    E = np.asarray(energies, dtype=complex)
    flat = E.ravel()
    L = H.L
    q = np.empty(flat.size, dtype=complex)
    sc = np.empty(flat.size)
    labels = list(range(L)) if offset == 0 else list(range(L - 1)) + [L]
    for a in range(0, flat.size, chunk):
        A = transfer_batch(H, flat[a:a + chunk])
        w, M = np.linalg.eig(A)
        idx = np.argsort(np.abs(w), axis=-1, kind="stable")
        w = np.take_along_axis(w, idx, axis=-1)
        M = np.take_along_axis(M, idx[:, None, :], axis=-1)
        cond = np.linalg.cond(M)
        bad = ~np.isfinite(cond) | (cond > cond_max)
        Mi = np.linalg.inv(np.where(bad[:, None, None], np.eye(2 * L), M))
        B = M[:, L:, :][:, :, labels] @ Mi[:, labels, :][:, :, :L]
        qq = np.linalg.det(B)
        ss = np.prod(np.linalg.norm(B, axis=1), axis=-1)
        for i in np.flatnonzero(bad):
            if offset == 0:
                mod = np.abs(w[i])
                if mod[L] > mod[L - 1] * (1 + 1e-12):
                    P = schur_projector(A[i], float(np.sqrt(mod[L - 1] * mod[L])))
                    Bi = P[L:, :L]
                    qq[i] = np.linalg.det(Bi)
                    ss[i] = np.prod(np.linalg.norm(Bi, axis=0))
                    continue
            qq[i] = np.nan
            ss[i] = np.nan
        q[a:a + chunk] = qq
        sc[a:a + chunk] = ss
    return q.reshape(E.shape), sc.reshape(E.shape)


def complement_conjugator(H: BlockSymbol) -> np.ndarray:
    """The matrix ``[[0, T], [R^-1, 0]]`` relating a projection to its
    reflected complement."""
    L = H.L
    Z = np.zeros((L, L), dtype=complex)
    return np.block([[Z, H.T], [H.R_inv, Z]])


def transfer_resolvent(H: BlockSymbol, E: complex, z: complex) -> np.ndarray:
    """``(z - T^E)^-1`` computed directly (used in tests of the block formula)."""
    A = transfer_matrix(H, E)
    return np.linalg.inv(z * np.eye(A.shape[0]) - A)
