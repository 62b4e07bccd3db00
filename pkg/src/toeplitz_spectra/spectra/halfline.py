"""Winding numbers, half-line kernels and chiral zero-mode certificates."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from ..errors import BreakpointHit, EigenvalueOnCircle, ZeroOnLambda
from ..model import BlockSymbol, chiral_split, symbol_batch
from ..projections import ON_CONTOUR_RTOL
from ..transfer import transfer_eigendata, transfer_matrix

RANK_RTOL = 1e-8


def _check_circle(moduli, s, E):
    d = np.min(np.abs(np.asarray(moduli) - s))
    if d < ON_CONTOUR_RTOL * s:
        raise EigenvalueOnCircle(f"transfer eigenvalue of modulus {s} at E={E}", E=E, s=s)


def winding_integral(H: BlockSymbol, E: complex, s: float = 1.0, nodes: int = 256,
                     max_nodes: int = 1 << 16):
    """Trapezoidal value of ``(2 pi i)^-1 \\oint d log det(H(s z) - E)`` over
    the unit circle.

    Returns ``(value, nodes)``; nodes are doubled until two consecutive
    values agree to 1e-9 (or ``max_nodes`` is reached).
    """
    L = H.L
    one = np.eye(L)

    def value(m):
        z = np.exp(2j * np.pi * (np.arange(m) + 0.5) / m)
        A = symbol_batch(H, s * z) - E * one
        dA = -H.R / (s * z[:, None, None]) + s * H.T * z[:, None, None]
        X = np.linalg.solve(A, dA)
        return np.trace(X, axis1=1, axis2=2).sum() / m

    m = nodes
    prev = value(m)
    while m < max_nodes:
        m *= 2
        cur = value(m)
        if abs(cur - prev) <= 1e-9:
            return complex(cur), m
        prev = cur
    return complex(prev), m


def winding(H: BlockSymbol, E: complex, s: float = 1.0, method: str = "count") -> int:
    """Winding number of ``det(H(s z) - E)`` around the unit circle.

    ``count`` returns ``-L + #{l : |z_l(E)| < s}``; ``integral`` rounds the
    contour integral of the logarithmic derivative.  Raises
    :class:`EigenvalueOnCircle` when a transfer eigenvalue has modulus s.
    """
    ed = transfer_eigendata(H, E)
    _check_circle(ed.moduli, s, E)
    if method == "count":
        return -H.L + int(np.sum(ed.moduli < s))
    if method == "integral":
        val, _ = winding_integral(H, E, s)
        w = int(round(val.real))
        if abs(val - w) > 0.1:
            raise EigenvalueOnCircle(f"winding integral {val} is not near an integer", E=E)
        return w
    raise ValueError(f"unknown method {method!r}")


def winding_defect(H: BlockSymbol, E: complex, s: float = 1.0) -> float:
    """Distance of the winding integral from the nearest integer."""
    val, _ = winding_integral(H, E, s)
    return float(abs(val - round(val.real)))


def _intersection_dim(A: np.ndarray, r: float, L: int) -> int:
    """``dim(span{eigenvectors of A with |z| < r} ∩ range [1; 0])``."""
    _, Z, k = scipy.linalg.schur(A, output="complex", sort=lambda x: abs(x) < r)
    if k == 0:
        return 0
    low = Z[L:, :k]
    sv = np.linalg.svd(low, compute_uv=False)
    rank = int(np.sum(sv > RANK_RTOL * max(1.0, sv[0] if sv.size else 0.0)))
    return k - rank


def halfline_kernel_dims(H: BlockSymbol, E: complex, s: Optional[float] = None):
    """Kernel dimensions ``(dim_right, dim_left)`` of the scaled half-line
    operators with Dirichlet boundary condition, minus ``E``.

    ``dim_right`` counts solutions decaying (relative to ``s^n``) to the right
    and vanishing at the boundary; ``dim_left`` does the same on the left
    half-line through the reflected (R and T exchanged) transfer matrix.
    ``s`` defaults to the geometric mean of the middle moduli.
    """
    ed = transfer_eigendata(H, E)
    if s is None:
        s = ed.middle_radius
    s = float(s)
    _check_circle(ed.moduli, s, E)
    L = H.L
    right = _intersection_dim(ed.matrix, s, L)
    left = _intersection_dim(transfer_matrix(H, E, "tilde"), 1.0 / s, L)
    return right, left


# -- chiral models ----------------------------------------------------------------

def sector_roots(H: BlockSymbol):
    """Roots of ``det(z H_plus(z))`` and ``det(z H_minus(z))``."""
    pair = chiral_split(H)
    return (np.linalg.eigvals(transfer_matrix(pair.H_plus, 0.0)),
            np.linalg.eigvals(transfer_matrix(pair.H_minus, 0.0)))


def _sector_windings(roots_p, roots_m, h: int, s: float):
    return (-h + int(np.sum(np.abs(roots_p) < s)), -h + int(np.sum(np.abs(roots_m) < s)))


def chiral_windings(H: BlockSymbol, s: float):
    """``(W_plus, W_minus)`` with ``W = -L/2 + #{roots with |z| < s}``."""
    rp, rm = sector_roots(H)
    s = float(s)
    mods = np.abs(np.concatenate([rp, rm]))
    if np.min(np.abs(mods - s)) < ON_CONTOUR_RTOL * s:
        raise BreakpointHit(f"s={s} equals a root modulus", s=s)
    return _sector_windings(rp, rm, H.L // 2, s)


@dataclass(frozen=True)
class ZeroModeCertificate:
    """A scale ``s`` at which ``W_plus(s) = -W_minus(s) != 0``; the whole
    open interval between adjacent breakpoints shares these windings."""

    s: float
    W_plus: int
    W_minus: int
    interval: tuple
    breakpoints: tuple


def zero_mode_certificate(H: BlockSymbol, gap_tol: float = 1e-6) -> Optional[ZeroModeCertificate]:
    """Search the scales between consecutive root moduli of the two chiral
    sectors for opposite nonzero windings; ``None`` if there is none."""
    ed = transfer_eigendata(H, 0.0)
    if ed.middle_gap <= gap_tol:
        raise ZeroOnLambda("E = 0 lies on the degeneracy set Λ", middle_gap=ed.middle_gap)
    rp, rm = sector_roots(H)
    b = np.unique(np.abs(np.concatenate([rp, rm])))
    # merge breakpoints equal up to rounding
    keep = [b[0]]
    for x in b[1:]:
        if x > keep[-1] * (1 + 1e-12):
            keep.append(x)
    b = np.array(keep)
    edges = [0.0] + list(b) + [math.inf]
    cands = [b[0] / 2] + [math.sqrt(b[i] * b[i + 1]) for i in range(b.size - 1)] + [b[-1] * 2]
    h = H.L // 2
    for i, s in enumerate(cands):
        wp, wm = _sector_windings(rp, rm, h, s)
        if wp != 0 and wp == -wm:
            return ZeroModeCertificate(float(s), wp, wm, (float(edges[i]), float(edges[i + 1])),
                                       tuple(float(x) for x in b))
    return None
