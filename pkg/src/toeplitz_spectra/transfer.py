"""Transfer matrices, their sorted eigendata and the degeneracy set F.

A sequence ``psi`` solves ``H psi = E psi`` iff
``(T psi_{n+1}, psi_n) = T^E (T psi_n, psi_{n-1})`` with the 2L x 2L
transfer matrix ``T^E = [[(E - V) T^-1, -R], [T^-1, 0]]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EigensolverFailure, IdenticallyZeroDiscriminant
from .model import BlockSymbol

TIE_RTOL = 1e-12
DEGENERACY_RTOL = 1e-8
# a defective (Jordan) eigenvalue is split by ~sqrt(eps) in floating point,
# which the pair gap alone misses; the eigenbasis condition number does not
DEGENERACY_COND = 1e7


def transfer_matrix(H: BlockSymbol, E: complex, variant: str = "plain") -> np.ndarray:
    """Transfer matrix at energy ``E``.

    ``variant`` is one of ``plain``, ``tilde`` (R and T exchanged), ``hat``
    (built from the adjoint coefficients) or ``inverse`` (closed-form
    inverse of the plain matrix).
    """
    L = H.L
    one = np.eye(L)
    Z = np.zeros((L, L), dtype=complex)
    if variant == "plain":
        Ti = H.T_inv
        return np.block([[(E * one - H.V) @ Ti, -H.R], [Ti, Z]])
    if variant == "tilde":
        Ri = H.R_inv
        return np.block([[(E * one - H.V) @ Ri, -H.T], [Ri, Z]])
    if variant == "hat":
        Rsi = H.R_inv.conj().T
        return np.block([[(E * one - H.V.conj().T) @ Rsi, -H.T.conj().T], [Rsi, Z]])
    if variant == "inverse":
        Ri = H.R_inv
        return np.block([[Z, H.T], [-Ri, Ri @ (E * one - H.V)]])
    raise ValueError(f"unknown transfer variant {variant!r}")


def transfer_batch(H: BlockSymbol, energies) -> np.ndarray:
    """Plain transfer matrices for an array of energies, shape ``(n, 2L, 2L)``."""
    E = np.asarray(energies, dtype=complex).ravel()
    L = H.L
    Ti = H.T_inv
    out = np.zeros((E.size, 2 * L, 2 * L), dtype=complex)
    out[:, :L, :L] = E[:, None, None] * Ti[None] - (H.V @ Ti)[None]
    out[:, :L, L:] = -H.R
    out[:, L:, :L] = Ti
    return out


def sort_order(z: np.ndarray) -> np.ndarray:
    """Indices sorting ``z`` by modulus; near-ties by ascending principal argument."""
    z = np.asarray(z)
    mod = np.abs(z)
    order = np.argsort(mod, kind="stable")
    order = list(order)
    # bubble within tie groups
    i = 0
    while i < len(order):
        j = i + 1
        while j < len(order) and mod[order[j]] - mod[order[i]] <= TIE_RTOL * max(mod[order[j]], 1e-300):
            j += 1
        if j - i > 1:
            order[i:j] = sorted(order[i:j], key=lambda k: np.angle(z[k]))
        i = j
    return np.array(order, dtype=int)


def sorted_eigvals_batch(A: np.ndarray) -> np.ndarray:
    """Eigenvalues of a stack of matrices, each row sorted by modulus.

    Ties are not broken by phase here; only moduli are used downstream.
    """
    try:
        w = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise EigensolverFailure(str(exc)) from None
    idx = np.argsort(np.abs(w), axis=-1, kind="stable")
    return np.take_along_axis(w, idx, axis=-1)


def middle_gaps(H: BlockSymbol, energies, chunk: int = 20000) -> np.ndarray:
    """Relative gap ``(|z_{L+1}| - |z_L|) / |z_{L+1}|`` for many energies."""
    E = np.asarray(energies, dtype=complex)
    flat = E.ravel()
    L = H.L
    out = np.empty(flat.size)
    for a in range(0, flat.size, chunk):
        mod = np.abs(sorted_eigvals_batch(transfer_batch(H, flat[a:a + chunk])))
        hi = mod[:, L]
        out[a:a + chunk] = (hi - mod[:, L - 1]) / np.maximum(hi, np.finfo(float).tiny)
    return out.reshape(E.shape)


@dataclass(frozen=True, eq=False)
class TransferEigenData:
    """Eigenvalues ``z_1, ..., z_2L`` of the transfer matrix sorted by modulus.

    ``basis`` holds the matching eigenvectors as columns.  ``degenerate`` is
    set when two eigenvalues are closer than ``1e-8 max|z|``, in which case
    ``basis`` need not be invertible.
    """

    E: complex
    eigenvalues: np.ndarray
    basis: np.ndarray
    middle_gap: float
    min_pair_gap: float
    degenerate: bool
    matrix: np.ndarray

    @property
    def L(self) -> int:
        return self.eigenvalues.size // 2

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.eigenvalues)

    @property
    def middle_radius(self) -> float:
        """Geometric mean of ``|z_L|`` and ``|z_{L+1}|``."""
        m = self.moduli
        return math.sqrt(m[self.L - 1] * m[self.L])

    def basis_inverse(self) -> np.ndarray:
        return np.linalg.inv(self.basis)


def transfer_eigendata(H: BlockSymbol, E: complex, variant: str = "plain") -> TransferEigenData:
    A = transfer_matrix(H, E, variant)
    try:
        w, M = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise EigensolverFailure(str(exc), E=E) from None
    if not np.all(np.isfinite(w)):
        raise EigensolverFailure("non-finite eigenvalues", E=E)
    order = sort_order(w)
    w, M = w[order], M[:, order]
    mod = np.abs(w)
    L = H.L
    gap = (mod[L] - mod[L - 1]) / max(mod[L], np.finfo(float).tiny)
    diff = np.abs(w[:, None] - w[None, :])
    diff[np.diag_indices_from(diff)] = np.inf
    mpg = float(diff.min())
    degen = mpg < DEGENERACY_RTOL * mod.max() or np.linalg.cond(M) > DEGENERACY_COND
    return TransferEigenData(complex(E), w, M, float(gap), mpg, bool(degen), A)


# -- degeneracy set F -----------------------------------------------------------

@dataclass(frozen=True)
class FPoint:
    """Energy with a repeated transfer eigenvalue ``z``; ``residual`` measures
    ``|p| + |dp/dz|`` relative to the size of the terms."""

    E: complex
    z: complex
    residual: float


class _CharPoly:
    """Bivariate polynomial ``p(z, E) = det(R + (V - E) z + T z^2)``.

    Stored as coefficients of ``(z / rz)^a (E / rE)^b``, recovered exactly
    (up to rounding) from samples on a torus by a 2-D FFT.
    """

    def __init__(self, H: BlockSymbol):
        L = H.L
        self.L = L
        dR, dT = abs(H.det_R), abs(H.det_T)
        self.rz = (dR / dT) ** (1.0 / (2 * L))
        self.rE = 1.0 + H.norm_estimate
        nz, nE = 2 * L + 1, L + 1
        wz = self.rz * np.exp(2j * np.pi * np.arange(nz) / nz)
        wE = self.rE * np.exp(2j * np.pi * np.arange(nE) / nE)
        Z, EE = np.meshgrid(wz, wE, indexing="ij")
        z = Z[..., None, None]
        M = H.R + (H.V - EE[..., None, None] * np.eye(L)) * z + H.T * z * z
        vals = np.linalg.det(M)
        self.c = np.fft.fft2(vals) / (nz * nE)   # c[a, b]

    def z_coeffs(self, E):
        """Coefficients in ``w = z / rz`` (ascending) at energy ``E``."""
        u = complex(E) / self.rE
        return self.c @ (u ** np.arange(self.c.shape[1]))

    def eval(self, z, E):
        """Return p, dp/dz, dp/dE, d2p/dz2, d2p/dzdE and the term scale."""
        w, u = complex(z) / self.rz, complex(E) / self.rE
        a = np.arange(self.c.shape[0])[:, None]
        b = np.arange(self.c.shape[1])[None, :]
        wa = w ** a
        ub = u ** b
        wa1 = np.where(a > 0, a * w ** np.maximum(a - 1, 0), 0)
        wa2 = np.where(a > 1, a * (a - 1) * w ** np.maximum(a - 2, 0), 0)
        ub1 = np.where(b > 0, b * u ** np.maximum(b - 1, 0), 0)
        c = self.c
        p = np.sum(c * wa * ub)
        pz = np.sum(c * wa1 * ub) / self.rz
        pE = np.sum(c * wa * ub1) / self.rE
        pzz = np.sum(c * wa2 * ub) / self.rz ** 2
        pzE = np.sum(c * wa1 * ub1) / (self.rz * self.rE)
        scale = np.sum(np.abs(c * wa * ub))
        scale_z = np.sum(np.abs(c * wa1 * ub)) / self.rz
        return p, pz, pE, pzz, pzE, scale, scale_z


def _sylvester(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Sylvester matrix of two polynomials given by descending coefficients."""
    m, n = f.size - 1, g.size - 1
    S = np.zeros((m + n, m + n), dtype=complex)
    for i in range(n):
        S[i, i:i + m + 1] = f
    for i in range(m):
        S[n + i, i:i + n + 1] = g
    return S


def discriminant_poly(H: BlockSymbol, nodes: Optional[int] = None):
    """Coefficients (ascending, in ``E / rho``) of ``Res_z(p_E, dp_E/dz)`` and ``rho``.

    Raises :class:`IdenticallyZeroDiscriminant` if every sample of the
    resultant is negligible compared to its Hadamard bound.
    """
    L = H.L
    cp = _CharPoly(H)
    deg = L * (4 * L - 1)
    n = nodes or deg + 1
    rho = 1.0 + H.norm_estimate
    Es = rho * np.exp(2j * np.pi * np.arange(n) / n)
    vals = np.empty(n, dtype=complex)
    bound = 0.0
    for k, E in enumerate(Es):
        f = cp.z_coeffs(E)[::-1]                        # descending in w
        g = np.polyder(f)
        S = _sylvester(f, g)
        vals[k] = np.linalg.det(S)
        bound = max(bound, float(np.prod(np.linalg.norm(S, axis=1))))
    if np.max(np.abs(vals)) <= 1e-11 * bound:
        raise IdenticallyZeroDiscriminant(
            "discriminant vanishes identically: every energy has a repeated transfer eigenvalue")
    coeffs = np.fft.fft(vals) / n
    return coeffs, rho, cp


def _newton_fpoint(cp: _CharPoly, z: complex, E: complex, iters: int = 60):
    """Newton's method on the system ``p = dp/dz = 0`` in the unknowns (z, E)."""
    best = None
    for _ in range(iters):
        p, pz, pE, pzz, pzE, sc, scz = cp.eval(z, E)
        res = abs(p) / sc + abs(pz) / max(scz, 1e-300)
        if best is None or res < best[2]:
            best = (z, E, res)
        J = np.array([[pz, pE], [pzz, pzE]])
        try:
            dz, dE = np.linalg.solve(J, -np.array([p, pz]))
        except np.linalg.LinAlgError:
            break
        z, E = z + dz, E + dE
        if abs(dz) <= 1e-15 * (1 + abs(z)) and abs(dE) <= 1e-15 * (1 + abs(E)):
            p, pz, *_rest, sc, scz = cp.eval(z, E)
            res = abs(p) / sc + abs(pz) / max(scz, 1e-300)
            if res < best[2]:
                best = (z, E, res)
            break
    return best


def discriminant_roots(H: BlockSymbol, region=None, residual_tol: float = 1e-8) -> list:
    """Energies in ``region`` where the transfer matrix has a repeated eigenvalue.

    ``region`` is ``(re_min, re_max, im_min, im_max)``; ``None`` means the
    whole plane.  The resultant of ``p_E`` and ``dp_E/dz`` is interpolated in
    ``E``, its roots taken from the companion matrix, and each root polished
    by Newton's method on ``p = dp/dz = 0``.  Returned points are sorted by
    real then imaginary part.
    """
    coeffs, rho, cp = discriminant_poly(H)
    c = coeffs.copy()
    cmax = np.max(np.abs(c))
    while c.size > 1 and abs(c[-1]) <= 1e-12 * cmax:
        c = c[:-1]
    if c.size <= 1:
        return []
    roots = np.roots(c[::-1]) * rho
    pad = 1e-6 * (1 + H.norm_estimate)
    cands = []
    for E0 in roots:
        if not np.isfinite(E0) or abs(E0) > 10 * rho:
            continue
        # starting z: closest pair of transfer eigenvalues
        w = np.linalg.eigvals(transfer_matrix(H, E0))
        d = np.abs(w[:, None] - w[None, :]) + np.diag(np.full(w.size, np.inf))
        i, j = np.unravel_index(np.argmin(d), d.shape)
        got = _newton_fpoint(cp, 0.5 * (w[i] + w[j]), complex(E0))
        if got is not None and got[2] <= residual_tol:
            cands.append(got)
    # Newton converges only linearly where its Jacobian is singular (a root
    # of multiplicity three, or two root pairs merging at once), so clusters
    # of nearby candidates are merged.
    cands.sort(key=lambda c: c[2])
    out: list[FPoint] = []
    for z, E, res in cands:
        if region is not None:
            x0, x1, y0, y1 = region
            if not (x0 - pad <= E.real <= x1 + pad and y0 - pad <= E.imag <= y1 + pad):
                continue
        if any(abs(E - q.E) <= 1e-5 * (1 + abs(E)) for q in out):
            continue
        out.append(FPoint(complex(E), complex(z), float(res)))
    out.sort(key=lambda q: (round(q.E.real, 9), round(q.E.imag, 9)))
    return out
