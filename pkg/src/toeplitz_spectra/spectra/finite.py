"""Finite sections: spectra, skin diagnostics and quasimodes on Λ."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from ..errors import EigensolverFailure, EmptyIntersection, SizeCapExceeded, ValidationError
from ..model import BlockSymbol, finite_section, scale_symbol
from ..transfer import transfer_eigendata

VECTOR_CAP = 2000
VALUE_CAP = 4000


@dataclass(frozen=True, eq=False)
class FiniteSpectrum:
    """Spectrum of the scaled N-block section ``H^s_N``.

    ``left_mass[k]`` is the weight of eigenvector k on blocks ``n < N // 2``
    and ``participation[k]`` the participation ratio over blocks divided by
    N (1 for an evenly spread vector, ``1/N`` for a single block).
    """

    N: int
    s: float
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None
    left_mass: Optional[np.ndarray] = None
    participation: Optional[np.ndarray] = None


def finite_spectrum(H: BlockSymbol, N: int, s: float = 1.0, want_vectors: bool = False,
                    method: str = "dense", vector_cap: int = VECTOR_CAP,
                    value_cap: int = VALUE_CAP) -> FiniteSpectrum:
    """Eigenvalues (and optionally eigenvectors) of ``H^s_N``, sorted by real,
    then imaginary part.

    ``method="dense"`` runs one dense eigensolve.  ``method="multiscale"``
    (eigenvalues only) is meant for strongly non-normal sections, see
    :func:`multiscale_eigenvalues`; ``s`` is then ignored.
    """
    N = int(N)
    n = N * H.L
    cap = vector_cap if want_vectors else value_cap
    if n > cap:
        raise SizeCapExceeded(f"N L = {n} exceeds the cap {cap}")
    if method == "multiscale":
        if want_vectors:
            raise ValidationError("the multiscale solver returns eigenvalues only")
        w = multiscale_eigenvalues(H, N)
        return FiniteSpectrum(N, 1.0, w[np.lexsort((w.imag, w.real))])
    if method != "dense":
        raise ValueError(f"unknown method {method!r}")
    A = finite_section(H, N, s)
    try:
        if want_vectors:
            w, X = np.linalg.eig(A)
        else:
            w, X = np.linalg.eigvals(A), None
    except np.linalg.LinAlgError as exc:
        raise EigensolverFailure(str(exc)) from None
    order = np.lexsort((w.imag, w.real))
    w = w[order]
    if X is None:
        return FiniteSpectrum(N, float(s), w)
    X = X[:, order]
    X = X / np.linalg.norm(X, axis=0)
    wts = np.sum(np.abs(X.reshape(N, H.L, -1)) ** 2, axis=1)  # (N, n)
    left = wts[: N // 2].sum(axis=0)
    pr = wts.sum(axis=0) ** 2 / np.sum(wts ** 2, axis=0) / N
    return FiniteSpectrum(N, float(s), w, X, left, pr)


def local_radius(H: BlockSymbol, energies) -> np.ndarray:
    """Geometric mean of the middle transfer moduli, ``sqrt(|z_L| |z_{L+1}|)``."""
    from ..transfer import sorted_eigvals_batch, transfer_batch

    E = np.asarray(energies, dtype=complex).ravel()
    m = np.abs(sorted_eigvals_batch(transfer_batch(H, E)))
    return np.sqrt(m[:, H.L - 1] * m[:, H.L])


def multiscale_eigenvalues(H: BlockSymbol, N: int, log_width: float = 0.1,
                           max_runs: int = 200) -> np.ndarray:
    """Eigenvalues of ``H_N`` computed accurately for non-normal sections.

    An eigenvalue E of ``H^s_N`` is well conditioned when ``s`` is close to
    the local radius ``rho(E)`` (its eigenvector then neither grows nor
    decays along the chain).  Dense solves are run at scales ``s_j`` spaced
    by ``exp(log_width)``; run j contributes the eigenvalues whose ``log rho``
    falls in its half-open window.  The windows partition the real line, so
    each eigenvalue is reported once; a count mismatch shifts the windows
    by half a step and retries.
    """
    N = int(N)
    n = N * H.L
    s0 = (abs(H.det_R) / abs(H.det_T)) ** (1.0 / (2 * H.L))
    w0 = np.linalg.eigvals(finite_section(H, N, s0))
    lr = np.log(local_radius(H, w0))
    lo, hi = float(lr.min()) - log_width, float(lr.max()) + log_width
    best = None
    for shift in (0.0, 0.5, 0.25, 0.75):
        centres = np.arange(lo + shift * log_width, hi + log_width, log_width)[:max_runs]
        edges = np.concatenate([[-np.inf], 0.5 * (centres[1:] + centres[:-1]), [np.inf]])
        parts = []
        for j, c in enumerate(centres):
            w = np.linalg.eigvals(finite_section(H, N, float(np.exp(c))))
            r = np.log(local_radius(H, w))
            parts.append(w[(r >= edges[j]) & (r < edges[j + 1])])
        out = np.concatenate(parts)
        if out.size == n:
            return out
        if best is None or abs(out.size - n) < abs(best.size - n):
            best = out
    raise EigensolverFailure(f"multiscale solve found {best.size} of {n} eigenvalues")


def attraction_distance(eigenvalues, cloud) -> float:
    """One-sided distance ``max_k min_c |lambda_k - c|`` from the eigenvalues
    to a point cloud."""
    pts = np.asarray(cloud, dtype=complex).ravel()
    if pts.size == 0:
        return math.inf
    tree = cKDTree(np.column_stack([pts.real, pts.imag]))
    ev = np.asarray(eigenvalues, dtype=complex).ravel()
    d, _ = tree.query(np.column_stack([ev.real, ev.imag]))
    return float(np.max(d))


@dataclass(frozen=True, eq=False)
class Quasimode:
    """Unit vector ``phi`` with small ``|(H^s_N - E) phi|``.

    ``constant`` is ``residual * sqrt(N)``, the fitted constant of the
    ``C / sqrt(N)`` law.
    """

    vector: np.ndarray
    residual: float
    s: float
    constant: float


def quasimode(H: BlockSymbol, E: complex, N: int, gap_tol: float = 1e-3,
              cut: float = 1e-6) -> Quasimode:
    """Build a quasimode at an energy ``E`` on Λ.

    After scaling the middle moduli to 1, a vector in the intersection of
    the non-expanding subspaces of the transfer matrix and of its inverse
    is propagated from the middle block to both ends of the section.  A
    direction counts as non-expanding if its modulus is below ``1 + cut``;
    the cut is loosened twice before :class:`EmptyIntersection` is raised.
    """
    N = int(N)
    if N < 4:
        raise ValidationError("quasimode needs N >= 4")
    ed = transfer_eigendata(H, E)
    if ed.middle_gap > gap_tol:
        raise ValidationError(f"E={E} is not on Λ (middle gap {ed.middle_gap:.3g})")
    L = H.L
    s = ed.middle_radius
    Hs = scale_symbol(H, s)
    M = ed.basis
    mod = ed.moduli / s

    def frame(cols):
        q, _ = np.linalg.qr(M[:, cols])
        return q

    phi, keep = None, None
    for c in (cut, 1e3 * cut, 1e-2):
        # non-expanding eigendirections of A and of its inverse
        down = np.flatnonzero(mod <= 1 + c)
        up = np.flatnonzero(mod >= 1 - c)
        if down.size + up.size <= 2 * L:
            continue
        B1, B2 = frame(down), frame(up)
        S = np.hstack([B1, -B2])
        v = np.linalg.svd(S)[2][-1].conj()
        if np.linalg.norm(S @ v) <= 1e-8:
            phi, keep = B1 @ v[: down.size], np.intersect1d(down, up)
            break
    if phi is None:
        raise EmptyIntersection("no common non-expanding direction found")
    # propagate in eigen-coordinates: powers of A itself would amplify
    # rounding errors along the strongly expanding directions
    coef = np.linalg.solve(M, phi)[keep]
    m = N // 2
    n = np.arange(N) - m
    zk = ed.eigenvalues[keep] / s
    psi = (M[L:, keep][None] * (coef * zk[None, :] ** n[:, None])[:, None, :]).sum(axis=-1)
    v = psi.ravel()
    v = v / np.linalg.norm(v)
    r = float(np.linalg.norm(finite_section(Hs, N, 1.0, E) @ v))
    return Quasimode(v, r, float(s), r * math.sqrt(N))
