"""Numerical diagnostics of the standing hypotheses A to D on a window."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import IdenticallyZeroDiscriminant
from ..model import RCOND_THRESHOLD, BlockSymbol
from ..projections import q_lower_batch
from ..transfer import discriminant_roots, middle_gaps, sorted_eigvals_batch, transfer_batch
from .sets import LambdaCloud, lambda_scan

MAX_SAMPLES = 200
SEPARATION_RTOL = 1e-3      # relative modulus gap that counts as "strictly smaller"
VANISH_RTOL = 1e-8          # |q| below this fraction of its Hadamard bound counts as zero
C_PASS_FRACTION = 0.9
D_FAIL_FRACTION = 0.1
PERTURBATIONS = 8


@dataclass
class HypothesisReport:
    """Outcome of :func:`hypothesis_report`; ``to_dict`` gives a JSON-ready view.

    C and D are checked on at most ``MAX_SAMPLES`` Λ points away from the
    F-points.  ``interior_points`` counts grid points inside a
    two-dimensional part of Λ (where C fails by definition).
    ``distinct_RT_moduli`` records whether R and T each have eigenvalues of
    pairwise distinct modulus, which rules out a vanishing discriminant.
    """

    A_pass: bool
    rcond_R: float
    rcond_T: float
    B_pass: bool
    f_count: int
    C_pass: bool
    C_fraction: float
    C_samples: int
    interior_points: int
    D_pass: bool
    D_violation_fraction: float
    D_min_q0: float
    D_min_q1: float
    distinct_RT_moduli: bool
    notes: list = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return self.A_pass and self.B_pass and self.C_pass and self.D_pass

    def to_dict(self) -> dict:
        d = asdict(self)
        d["all_pass"] = self.all_pass
        return d


def _distinct_moduli(M: np.ndarray, rtol: float = 1e-8) -> bool:
    m = np.sort(np.abs(np.linalg.eigvals(M)))
    return bool(np.all(np.diff(m) > rtol * max(m[-1], 1e-300)))


def _interior_mask(lc: LambdaCloud) -> np.ndarray:
    """Grid points on Λ whose four grid neighbours are on Λ as well."""
    on = lc.grid_gaps <= lc.refine_tol
    inner = on.copy()
    inner[0, :] = inner[-1, :] = False
    inner[:, 0] = inner[:, -1] = False
    inner[1:-1, 1:-1] &= on[:-2, 1:-1] & on[2:, 1:-1] & on[1:-1, :-2] & on[1:-1, 2:]
    return inner


def _separated(H: BlockSymbol, E: np.ndarray) -> np.ndarray:
    """``|z_{L-1}| < |z_L|`` and ``|z_{L+1}| < |z_{L+2}|`` (where defined)."""
    L = H.L
    m = np.abs(sorted_eigvals_batch(transfer_batch(H, E)))
    ok = np.ones(E.size, dtype=bool)
    if L >= 2:
        ok &= m[:, L - 1] - m[:, L - 2] > SEPARATION_RTOL * m[:, L - 1]
        ok &= m[:, L + 1] - m[:, L] > SEPARATION_RTOL * m[:, L + 1]
    return ok


def hypothesis_report(H: BlockSymbol, window, resolution: float = 0.01,
                      lambda_cloud: LambdaCloud | None = None, threads=None) -> HypothesisReport:
    """Check hypotheses A to D numerically on ``window``.

    A: reciprocal condition numbers of R and T.  B: the discriminant is not
    identically zero (F-points in the window are counted).  C: sampled Λ
    points have the two middle moduli strictly separated from their
    neighbours, and Λ has no interior on the grid.  D: ``q_{I_0}`` and
    ``q_{I_1}`` do not vanish identically near the samples (checked at
    ``PERTURBATIONS`` points on a circle of radius ``resolution``).
    """
    notes = []
    A_pass = H.rcond_R > RCOND_THRESHOLD and H.rcond_T > RCOND_THRESHOLD

    try:
        f = discriminant_roots(H, tuple(window))
        B_pass = True
    except IdenticallyZeroDiscriminant:
        f, B_pass = [], False
        notes.append("discriminant vanishes identically")

    lc = lambda_cloud if lambda_cloud is not None else lambda_scan(H, window, resolution,
                                                                   threads=threads)
    res = lc.resolution
    inner = _interior_mask(lc)
    n_interior = int(inner.sum())
    if n_interior:
        notes.append(f"Λ has interior: {n_interior} grid points")

    pts = lc.points
    if f and pts.size:
        fE = np.array([p.E for p in f])
        far = np.min(np.abs(pts[:, None] - fE[None, :]), axis=1) > res
        pts = pts[far]
    if pts.size:
        # drop refined points that sit inside a thick part of Λ
        ring = pts[:, None] + res * np.exp(2j * np.pi * np.arange(PERTURBATIONS) / PERTURBATIONS)
        g = middle_gaps(H, ring.ravel()).reshape(ring.shape)
        pts = pts[~np.all(g <= lc.refine_tol, axis=1)]
    if pts.size > MAX_SAMPLES:
        pts = pts[np.linspace(0, pts.size - 1, MAX_SAMPLES).round().astype(int)]

    n = int(pts.size)
    if n:
        frac = float(np.mean(_separated(H, pts)))
    else:
        frac = 1.0
        notes.append("no Λ samples away from F in the window")
    C_pass = frac >= C_PASS_FRACTION and n_interior == 0

    min0 = min1 = float("inf")
    viol = 0.0
    if n:
        ring = pts[:, None] + res * np.exp(2j * np.pi * (np.arange(PERTURBATIONS) + 0.5)
                                           / PERTURBATIONS)
        counts = []
        for off in (0, 1):
            q, sc = q_lower_batch(H, ring.ravel(), offset=off)
            rel = (np.abs(q) / np.where(sc > 0, sc, 1.0)).reshape(ring.shape)
            known = np.isfinite(rel)
            counts.append(np.sum(known & (rel <= VANISH_RTOL), axis=1))
            if known.any():
                if off == 0:
                    min0 = float(np.min(rel[known]))
                else:
                    min1 = float(np.min(rel[known]))
        viol = float(np.mean((counts[0] >= 2) | (counts[1] >= 2)))
    D_pass = viol <= D_FAIL_FRACTION
    if n_interior:
        X, Y = np.meshgrid(lc.re, lc.im)
        Ei = (X + 1j * Y)[inner]
        Ei = Ei[np.linspace(0, Ei.size - 1, min(Ei.size, MAX_SAMPLES)).round().astype(int)]
        q, sc = q_lower_batch(H, Ei, offset=0)
        rel = np.abs(q) / np.where(sc > 0, sc, 1.0)
        if np.nanmean(rel <= VANISH_RTOL) > 0.5:
            D_pass = False
            notes.append("q_I0 vanishes on the interior of Λ")

    return HypothesisReport(
        A_pass=bool(A_pass), rcond_R=float(H.rcond_R), rcond_T=float(H.rcond_T),
        B_pass=bool(B_pass), f_count=len(f),
        C_pass=bool(C_pass), C_fraction=frac, C_samples=n, interior_points=n_interior,
        D_pass=bool(D_pass), D_violation_fraction=viol, D_min_q0=min0, D_min_q1=min1,
        distinct_RT_moduli=_distinct_moduli(H.T) and _distinct_moduli(H.R), notes=notes)
