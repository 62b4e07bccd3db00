"""Point clouds for Σ, Λ and F, the outlier set Γ, and the Brillouin zone."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from .._parallel import map_chunks
from ..errors import IdenticallyZeroDiscriminant, NonHolomorphicCellWarning
from ..model import BlockSymbol, symbol_batch
from ..projections import q_lower_batch
from ..transfer import discriminant_roots, middle_gaps, sorted_eigvals_batch, transfer_batch
from .halfline import halfline_kernel_dims

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


# -- Σ ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SigmaSamples:
    """Eigenvalues of ``H(s e^{ik})``; ``values[j]`` holds the L bands at ``k[j]``."""

    s: float
    k: np.ndarray
    values: np.ndarray

    @property
    def points(self) -> np.ndarray:
        return self.values.ravel()


def sigma_samples(H: BlockSymbol, s: float = 1.0, K: int = 512) -> SigmaSamples:
    """Sample Σ_s on a uniform grid of ``[-pi, pi)``; bands are continued
    between neighbouring k by nearest-neighbour matching."""
    K = int(K)
    if K < 2:
        raise ValueError("need at least two k-points")
    k = -np.pi + 2 * np.pi * np.arange(K) / K
    vals = np.linalg.eigvals(symbol_batch(H, s * np.exp(1j * k)))
    if H.L > 1:
        for j in range(1, K):
            cost = np.abs(vals[j - 1][:, None] - vals[j][None, :])
            _, col = linear_sum_assignment(cost)
            vals[j] = vals[j][col]
    return SigmaSamples(float(s), k, vals)


# -- Λ ---------------------------------------------------------------------------

def _grid(window, resolution):
    x0, x1, y0, y1 = (float(v) for v in window)
    if not (x1 > x0 and y1 > y0):
        raise ValueError("window must be nonempty")
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    nx = int(math.floor((x1 - x0) / resolution + 1e-9)) + 1
    ny = int(math.floor((y1 - y0) / resolution + 1e-9)) + 1
    return x0 + resolution * np.arange(nx), y0 + resolution * np.arange(ny)


@dataclass(frozen=True, eq=False)
class LambdaCloud:
    """Result of a Λ scan.

    ``points`` are refined Λ points (middle gap below ``refine_tol``)
    including the F-points that lie on Λ; ``f_points`` are all F-points in
    the window.  The raw grid (``re``, ``im``, ``grid_gaps``) is kept for
    diagnostics.
    """

    points: np.ndarray
    gaps: np.ndarray
    f_points: list
    window: tuple
    resolution: float
    tol: float
    refine_tol: float
    re: np.ndarray = field(repr=False)
    im: np.ndarray = field(repr=False)
    grid_gaps: np.ndarray = field(repr=False)
    f_status: str = "ok"

    @property
    def mask(self) -> np.ndarray:
        return self.grid_gaps <= self.tol

    def tree(self) -> Optional[cKDTree]:
        if self.points.size == 0:
            return None
        return cKDTree(np.column_stack([self.points.real, self.points.imag]))


def _golden_minimize(H, starts, direction, half_width, iters, threads):
    """Vectorized golden-section search of the middle gap along lines."""
    a = -half_width * np.ones(starts.size)
    b = half_width * np.ones(starts.size)

    def g(t):
        return map_chunks(lambda e: middle_gaps(H, e), starts + t * direction, threads)

    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    gc, gd = g(c), g(d)
    for _ in range(iters):
        left = gc < gd
        # the minimum lies in [a, d] if the left probe is lower, else in [c, b]
        a, b = np.where(left, a, c), np.where(left, d, b)
        c_new = np.where(left, b - GOLDEN * (b - a), d)
        d_new = np.where(left, c, a + GOLDEN * (b - a))
        gp = g(np.where(left, c_new, d_new))
        gc, gd = np.where(left, gp, gd), np.where(left, gc, gp)
        c, d = c_new, d_new
    t = 0.5 * (a + b)
    return starts + t * direction, g(t)


def lambda_scan(H: BlockSymbol, window, resolution: float = 0.01, tol: float = 0.02,
                refine_tol: float = 1e-4, iters: int = 40, with_f: bool = True,
                threads=None) -> LambdaCloud:
    """Scan a rectangle for energies whose middle transfer moduli coincide.

    Grid points with relative middle gap at most ``tol`` are refined by a
    golden-section minimization of the gap along the grid direction in
    which the gap varies fastest; points that reach ``refine_tol`` are kept.
    F-points on Λ (its arc endpoints and junctions) are added.
    """
    re, im = _grid(window, resolution)
    X, Y = np.meshgrid(re, im)
    E = (X + 1j * Y).ravel()
    G = map_chunks(lambda e: middle_gaps(H, e), E, threads).reshape(X.shape)
    marked = G <= tol
    Gp = np.pad(G, 1, mode="edge")
    dx = np.abs(Gp[1:-1, 2:] - Gp[1:-1, :-2])
    dy = np.abs(Gp[2:, 1:-1] - Gp[:-2, 1:-1])
    idx = np.flatnonzero(marked.ravel())
    starts = E[idx]
    direction = np.where(dx.ravel()[idx] >= dy.ravel()[idx], 1.0 + 0j, 1j)
    if idx.size:
        pts, gaps = _golden_minimize(H, starts, direction, resolution, iters, threads)
        ok = gaps <= refine_tol
        pts, gaps = pts[ok], gaps[ok]
    else:
        pts, gaps = np.zeros(0, complex), np.zeros(0)
    f_pts, status = [], "ok"
    if with_f:
        try:
            f_pts = discriminant_roots(H, tuple(window))
        except IdenticallyZeroDiscriminant:
            status = "identically_zero"
        if f_pts:
            fE = np.array([f.E for f in f_pts])
            fg = middle_gaps(H, fE)
            on = fg <= refine_tol
            pts = np.concatenate([pts, fE[on]])
            gaps = np.concatenate([gaps, fg[on]])
    # deduplicate on a fine lattice, deterministic order
    if pts.size:
        q = resolution / 20
        key = np.round(pts.real / q).astype(np.int64) * 1_000_003 + np.round(pts.imag / q).astype(np.int64)
        _, first = np.unique(key, return_index=True)
        pts, gaps = pts[first], gaps[first]
        order = np.lexsort((pts.imag, pts.real))
        pts, gaps = pts[order], gaps[order]
    return LambdaCloud(pts, gaps, f_pts, tuple(float(w) for w in window), float(resolution),
                       float(tol), float(refine_tol), re, im, G, status)


def brillouin(H: BlockSymbol, lambda_points) -> np.ndarray:
    """Middle transfer eigenvalues ``(z_L(E), z_{L+1}(E))`` at each Λ point,
    shape ``(n, 2)``."""
    E = np.asarray(lambda_points, dtype=complex).ravel()
    if E.size == 0:
        raise ValueError("no Λ points given")
    w = sorted_eigvals_batch(transfer_batch(H, E))
    L = H.L
    return w[:, L - 1:L + 1]


# -- Γ ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Outlier:
    """Zero of ``q_{I_0}`` off Λ with its multiplicity (winding of
    ``q_{I_0}`` around it) and the half-line side carrying the eigenvector."""

    E: complex
    multiplicity: int
    side: str
    residual: float
    dims: tuple


def _q(H, E, threads=None):
    return map_chunks(lambda e: q_lower_batch(H, e), np.asarray(E, complex).ravel(), threads)


def _cell_boundary(x0, x1, y0, y1, m):
    """m points per edge, counterclockwise, starting at the lower-left corner."""
    t = np.arange(m) / m
    bottom = (x0 + (x1 - x0) * t) + 1j * y0
    right = x1 + 1j * (y0 + (y1 - y0) * t)
    top = (x1 - (x1 - x0) * t) + 1j * y1
    left = x0 + 1j * (y1 - (y1 - y0) * t)
    return np.concatenate([bottom, right, top, left])


def _arg_count(q):
    """Winding of closed samples ``q`` (last row wraps to the first) and the
    largest phase step."""
    ph = np.angle(np.concatenate([q, q[:, :1]], axis=1))
    d = np.diff(ph, axis=1)
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return d.sum(axis=1) / (2 * np.pi), np.max(np.abs(d), axis=1)


def _newton(H, E0, mult, tol_abs, h_fd, max_iter=60):
    E = complex(E0)
    best = (E, math.inf)
    for _ in range(max_iter):
        vals = q_lower_batch(H, np.array([E, E + h_fd, E - h_fd]))[0]
        q0 = vals[0]
        if not np.isfinite(q0):
            break
        if abs(q0) < best[1]:
            best = (E, abs(q0))
        if abs(q0) <= tol_abs:
            break
        dq = (vals[1] - vals[2]) / (2 * h_fd)
        if dq == 0 or not np.isfinite(dq):
            break
        step = mult * q0 / dq
        E = E - step
        if abs(step) <= 1e-14 * (1 + abs(E)):
            q_end = q_lower_batch(H, np.array([E]))[0][0]
            if abs(q_end) < best[1]:
                best = (E, abs(q_end))
            break
    return best


def gamma_find(H: BlockSymbol, region, lambda_cloud: LambdaCloud,
               resolution: Optional[float] = None, max_depth: int = 3,
               edge_nodes: int = 6, threads=None) -> list:
    """Locate the outliers in ``region``: zeros of ``q_{I_0}`` away from Λ.

    Cells of size ``4 * resolution`` are scanned by the argument principle;
    cells within one resolution step of the Λ cloud or an F-point are
    subdivided up to ``max_depth`` times and then skipped.  Skipped cells
    inside Λ (where ``q_{I_0}`` is not holomorphic) or cells on whose
    boundary ``q_{I_0}`` vanishes raise a :class:`NonHolomorphicCellWarning`.
    """
    res = float(resolution or lambda_cloud.resolution)
    h = 4 * res
    x0, x1, y0, y1 = (float(v) for v in region)
    # shift the lattice by an irrational fraction so that symmetric points
    # such as E = 0 do not fall on cell edges
    off = GOLDEN * h
    nx = int(math.ceil((x1 - x0) / h + GOLDEN)) + 1
    ny = int(math.ceil((y1 - y0) / h + GOLDEN)) + 1
    gx = x0 - off + h * np.arange(nx + 1)
    gy = y0 - off + h * np.arange(ny + 1)
    cells = np.array([(gx[i], gx[i + 1], gy[j], gy[j + 1])
                      for j in range(ny) for i in range(nx)], dtype=float)

    blocked_pts = [lambda_cloud.points]
    if lambda_cloud.f_points:
        blocked_pts.append(np.array([f.E for f in lambda_cloud.f_points]))
    allb = np.concatenate(blocked_pts) if blocked_pts else np.zeros(0, complex)
    tree = cKDTree(np.column_stack([allb.real, allb.imag])) if allb.size else None

    found = []  # (E, mult, residual)
    n_interior = 0
    n_vanish = 0
    depth = 0
    while cells.size and depth <= max_depth + 4:
        cx = 0.5 * (cells[:, 0] + cells[:, 1])
        cy = 0.5 * (cells[:, 2] + cells[:, 3])
        hd = 0.5 * np.hypot(cells[:, 1] - cells[:, 0], cells[:, 3] - cells[:, 2])
        if tree is not None:
            near = np.array([len(x) > 0 for x in
                             tree.query_ball_point(np.column_stack([cx, cy]), hd + res)])
        else:
            near = np.zeros(len(cells), dtype=bool)
        touching = cells[near]
        free = cells[~near]
        nxt = []
        if touching.size:
            if depth == 0:
                n_interior += _count_interior(H, touching, lambda_cloud.refine_tol, threads)
            if depth < max_depth:
                nxt.append(_split(touching))
        if free.size:
            m = edge_nodes
            bnd = np.array([_cell_boundary(*c, m) for c in free])
            q, sc = _q(H, bnd.ravel(), threads)
            q = q.reshape(bnd.shape)
            sc = sc.reshape(bnd.shape)
            bad = ~np.all(np.isfinite(q), axis=1)
            vanish = np.any(np.abs(q) <= 1e-12 * np.nan_to_num(sc, nan=1.0), axis=1) & ~bad
            n_vanish += int(vanish.sum())
            ok = ~bad & ~vanish
            wind = np.zeros(len(free))
            jump = np.zeros(len(free))
            if ok.any():
                wind[ok], jump[ok] = _arg_count(q[ok])
            # resample cells whose phase is not resolved
            coarse = ok & (jump > np.pi / 2)
            for i in np.flatnonzero(coarse):
                mm = 8 * m
                qb, _ = _q(H, _cell_boundary(*free[i], mm))
                w, j = _arg_count(qb[None])
                wind[i], jump[i] = w[0], j[0]
            cnt = np.rint(wind).astype(int)
            unresolved = ok & ((np.abs(wind - cnt) > 0.1) | (jump > np.pi / 2))
            if unresolved.any():
                nxt.append(_split(free[unresolved]))
            hit = ok & ~unresolved & (cnt > 0)
            size = free[:, 1] - free[:, 0]
            for i in np.flatnonzero(hit):
                c = free[i]
                if cnt[i] == 1 or size[i] <= h / 32:
                    scale = float(np.median(np.abs(q[i])))
                    E, r = _newton(H, complex(0.5 * (c[0] + c[1]), 0.5 * (c[2] + c[3])),
                                   int(cnt[i]), 1e-10 * (1 + scale), 1e-6 * res)
                    found.append((E, int(cnt[i]), r, c))
                else:
                    nxt.append(_split(free[i:i + 1]))
        cells = np.concatenate(nxt) if nxt else np.zeros((0, 4))
        depth += 1
    if n_interior:
        warnings.warn(f"{n_interior} scan cells lie inside Λ, where q_I0 is not holomorphic; "
                      "they were skipped", NonHolomorphicCellWarning, stacklevel=2)
    if n_vanish:
        warnings.warn(f"q_I0 vanishes on the boundary of {n_vanish} scan cells; "
                      "they were skipped", NonHolomorphicCellWarning, stacklevel=2)

    out: list[Outlier] = []
    ltree = lambda_cloud.tree()
    for E, mult, r, c in sorted(found, key=lambda f: (f[0].real, f[0].imag)):
        pad = 0.5 * (c[1] - c[0])
        if not (c[0] - pad <= E.real <= c[1] + pad and c[2] - pad <= E.imag <= c[3] + pad):
            continue
        if not (x0 <= E.real <= x1 and y0 <= E.imag <= y1):
            continue
        if ltree is not None and ltree.query([E.real, E.imag])[0] < res:
            continue
        if any(abs(E - o.E) < res for o in out):
            continue
        dims = halfline_kernel_dims(H, E)
        side = {(True, True): "both", (True, False): "right",
                (False, True): "left"}.get((dims[0] > 0, dims[1] > 0), "none")
        out.append(Outlier(complex(E), mult, side, float(r), tuple(int(d) for d in dims)))
    return out


def _split(cells):
    x0, x1, y0, y1 = cells.T
    xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    return np.concatenate([
        np.column_stack([x0, xm, y0, ym]), np.column_stack([xm, x1, y0, ym]),
        np.column_stack([x0, xm, ym, y1]), np.column_stack([xm, x1, ym, y1])])


def _count_interior(H, cells, refine_tol, threads):
    """Number of cells whose corners and centre all lie on Λ."""
    pts = np.column_stack([
        cells[:, 0] + 1j * cells[:, 2], cells[:, 1] + 1j * cells[:, 2],
        cells[:, 0] + 1j * cells[:, 3], cells[:, 1] + 1j * cells[:, 3],
        0.5 * (cells[:, 0] + cells[:, 1]) + 0.5j * (cells[:, 2] + cells[:, 3])])
    g = map_chunks(lambda e: middle_gaps(H, e), pts.ravel(), threads).reshape(pts.shape)
    return int(np.sum(np.all(g <= refine_tol, axis=1)))


@dataclass(frozen=True, eq=False)
class SpectralSets:
    """Σ samples, the Λ cloud, F-points and outliers for one model."""

    sigma: Optional[SigmaSamples]
    lambda_points: np.ndarray
    lambda_gaps: np.ndarray
    f_points: list
    gamma: list

    def cloud(self) -> np.ndarray:
        """Λ ∪ Γ as one point array."""
        return np.concatenate([self.lambda_points, np.array([g.E for g in self.gamma], complex)])


def spectral_sets(H: BlockSymbol, window, resolution: float = 0.01, s: float = 1.0,
                  K: int = 512, threads=None) -> SpectralSets:
    lc = lambda_scan(H, window, resolution, threads=threads)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonHolomorphicCellWarning)
        gam = gamma_find(H, window, lc, threads=threads)
    return SpectralSets(sigma_samples(H, s, K), lc.points, lc.gaps, lc.f_points, gam)
