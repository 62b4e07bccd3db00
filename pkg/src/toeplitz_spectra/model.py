"""Block symbols of block-tridiagonal Laurent operators.

A translation-invariant operator acting on sequences of vectors in C^L via

    (H psi)_n = R psi_{n-1} + V psi_n + T psi_{n+1}

is encoded by the triple (R, V, T).  Its symbol is the matrix Laurent
polynomial ``H(z) = R/z + V + T z``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    ModelFileError,
    NonPositiveScale,
    NotChiral,
    OddBlockSize,
    SingularCoefficient,
    ZeroArgument,
    ZeroExtremeDiagonal,
)

#: Reciprocal condition number below which R or T counts as singular.
RCOND_THRESHOLD = 1e-12
#: Relative size of diagonal blocks tolerated by the chiral grading check.
CHIRAL_TOL = 1e-12


def _as_square(a, name: str, L: Optional[int] = None) -> np.ndarray:
    m = np.array(a, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be a square matrix, got shape {m.shape}")
    if L is not None and m.shape[0] != L:
        raise DimensionMismatch(f"{name} has size {m.shape[0]}, expected {L}")
    if not np.all(np.isfinite(m)):
        raise DimensionMismatch(f"{name} has non-finite entries")
    m.setflags(write=False)
    return m


def _rcond(m: np.ndarray) -> float:
    sv = np.linalg.svd(m, compute_uv=False)
    return float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0


@dataclass(frozen=True, eq=False)
class BlockSymbol:
    """Coefficients (R, V, T) of a block-tridiagonal Laurent operator.

    Use :func:`new_block_symbol` to build one; the constructor assumes the
    matrices were already validated.

    Attributes
    ----------
    R, V, T : (L, L) complex arrays, read-only
        Lower, diagonal and upper block coefficient.
    grading : int or None
        Size of the first chiral sector (always ``L // 2``) when the model
        is declared chiral.
    rcond_R, rcond_T : float
        Reciprocal condition numbers recorded at construction.
    """

    R: np.ndarray
    V: np.ndarray
    T: np.ndarray
    grading: Optional[int] = None
    rcond_R: float = field(default=1.0)
    rcond_T: float = field(default=1.0)

    @property
    def L(self) -> int:
        return self.R.shape[0]

    @cached_property
    def R_inv(self) -> np.ndarray:
        return np.linalg.inv(self.R)

    @cached_property
    def T_inv(self) -> np.ndarray:
        return np.linalg.inv(self.T)

    @cached_property
    def det_R(self) -> complex:
        return complex(np.linalg.det(self.R))

    @cached_property
    def det_T(self) -> complex:
        return complex(np.linalg.det(self.T))

    @cached_property
    def norm_estimate(self) -> float:
        """Upper bound ``|R| + |V| + |T|`` (spectral norms) for the operator norm."""
        return float(sum(np.linalg.norm(m, 2) for m in (self.R, self.V, self.T)))

    def __call__(self, z) -> np.ndarray:
        return symbol_at(self, z)

    @property
    def is_hermitian(self) -> bool:
        tol = 1e-12 * (1.0 + self.norm_estimate)
        return (np.linalg.norm(self.V - self.V.conj().T) <= tol
                and np.linalg.norm(self.R - self.T.conj().T) <= tol)

    def tilde(self) -> "BlockSymbol":
        """Reflected symbol ``H(1/z)``, i.e. R and T exchanged."""
        return BlockSymbol(self.T, self.V, self.R, self.grading, self.rcond_T, self.rcond_R)

    def adjoint(self) -> "BlockSymbol":
        """Symbol of the adjoint operator, ``T* / z + V* + R* z``."""
        return BlockSymbol(self.T.conj().T, self.V.conj().T, self.R.conj().T,
                           self.grading, self.rcond_T, self.rcond_R)

    def section(self, N: int, s: float = 1.0, E: complex = 0.0) -> np.ndarray:
        """Dense ``N L x N L`` finite section of the scaled operator minus ``E``."""
        return finite_section(self, N, s, E)

    def to_dict(self) -> dict:
        def enc(m):
            return [[[float(x.real), float(x.imag)] for x in row] for row in m]
        d = {"L": self.L, "R": enc(self.R), "V": enc(self.V), "T": enc(self.T)}
        if self.grading is not None:
            d["grading"] = self.grading
        return d


def new_block_symbol(L, R, V, T, grading: Optional[int] = None) -> BlockSymbol:
    """Validate ``(R, V, T)`` and return a :class:`BlockSymbol`.

    Scalars are accepted for ``L = 1``.  Raises :class:`SingularCoefficient`
    if R or T has reciprocal condition number at most ``RCOND_THRESHOLD``,
    and :class:`NotChiral` / :class:`OddBlockSize` if a declared grading
    does not hold.
    """
    L = int(L)
    if L < 1:
        raise DimensionMismatch("block size must be positive")
    R = _as_square(R, "R", L)
    V = _as_square(V, "V", L)
    T = _as_square(T, "T", L)
    rR, rT = _rcond(R), _rcond(T)
    for name, rc in (("R", rR), ("T", rT)):
        if not rc > RCOND_THRESHOLD:
            raise SingularCoefficient(f"{name} is singular (rcond={rc:.3g})", rcond=rc)
    sym = BlockSymbol(R, V, T, None, rR, rT)
    if grading is not None:
        if L % 2:
            raise OddBlockSize(f"chiral grading needs even L, got {L}")
        if int(grading) != L // 2:
            raise NotChiral(f"grading must split at L/2={L // 2}, got {grading}")
        _check_offdiagonal(sym)
        sym = BlockSymbol(R, V, T, L // 2, rR, rT)
    return sym


def lift_scalar_banded(coeffs: Sequence[complex]) -> BlockSymbol:
    """Block form of the scalar band operator ``(H psi)_l = sum_k t_k psi_{l-k}``.

    ``coeffs`` lists ``t_{-L}, ..., t_L``.  Grouping L consecutive sites into
    one block gives a lower-triangular-Toeplitz T, Toeplitz V and
    upper-triangular-Toeplitz R.
    """
    t = np.asarray(coeffs, dtype=complex).ravel()
    if t.size < 3 or t.size % 2 == 0:
        raise DimensionMismatch("need an odd number (>= 3) of band coefficients")
    L = t.size // 2
    if t[0] == 0 or t[-1] == 0:
        raise ZeroExtremeDiagonal("outermost band coefficients must be nonzero")

    def tk(k):  # t_k for |k| <= L, zero otherwise
        return t[k + L] if -L <= k <= L else 0.0

    i, j = np.indices((L, L))
    R = np.vectorize(lambda a, b: tk(L + a - b) if b >= a else 0.0, otypes=[complex])(i, j)
    V = np.vectorize(lambda a, b: tk(a - b), otypes=[complex])(i, j)
    T = np.vectorize(lambda a, b: tk(a - b - L) if a >= b else 0.0, otypes=[complex])(i, j)
    return new_block_symbol(L, R, V, T)


def scalar_band_section(coeffs: Sequence[complex], n: int) -> np.ndarray:
    """Dense ``n x n`` section of the scalar band operator with entries ``t_{l-k}``."""
    t = np.asarray(coeffs, dtype=complex).ravel()
    L = t.size // 2
    out = np.zeros((n, n), dtype=complex)
    for k in range(-L, L + 1):
        if abs(k) < n:
            idx = np.arange(max(0, k), min(n, n + k))
            out[idx, idx - k] = t[k + L]
    return out


def scale_symbol(H: BlockSymbol, s: float) -> BlockSymbol:
    """Symbol of ``z -> H(s z)``: coefficients ``(R/s, V, s T)``."""
    s = float(s)
    if not s > 0 or not np.isfinite(s):
        raise NonPositiveScale(f"scale must be positive, got {s}")
    if s == 1.0:
        return H
    R = H.R / s
    T = H.T * s
    R.setflags(write=False)
    T.setflags(write=False)
    return BlockSymbol(R, H.V, T, H.grading, H.rcond_R, H.rcond_T)


def symbol_at(H: BlockSymbol, z: complex, variant: str = "plain") -> np.ndarray:
    """Evaluate the symbol at ``z``.

    variant ``plain`` gives ``R/z + V + T z``, ``tilde`` gives ``H(1/z)`` and
    ``hat`` gives ``T*/z + V* + R* z``.
    """
    z = complex(z)
    if z == 0:
        raise ZeroArgument("symbol is undefined at z = 0")
    if variant == "plain":
        return H.R / z + H.V + H.T * z
    if variant == "tilde":
        return H.R * z + H.V + H.T / z
    if variant == "hat":
        return H.T.conj().T / z + H.V.conj().T + H.R.conj().T * z
    raise ValueError(f"unknown symbol variant {variant!r}")


def symbol_batch(H: BlockSymbol, z: np.ndarray) -> np.ndarray:
    """``H(z)`` for an array of points, shape ``z.shape + (L, L)``."""
    z = np.asarray(z, dtype=complex)[..., None, None]
    return H.R / z + H.V + H.T * z


def finite_section(H: BlockSymbol, N: int, s: float = 1.0, E: complex = 0.0) -> np.ndarray:
    """Dense matrix of ``H^s_N - E`` on N blocks (block (n, n+1) is ``s T``)."""
    N = int(N)
    if N < 1:
        raise DimensionMismatch("number of blocks must be positive")
    Hs = scale_symbol(H, s)
    L = H.L
    out = np.zeros((N * L, N * L), dtype=complex)
    blocks = out.reshape(N, L, N, L)
    n = np.arange(N)
    blocks[n, :, n, :] = Hs.V - E * np.eye(L)
    blocks[n[:-1], :, n[:-1] + 1, :] = Hs.T
    blocks[n[1:], :, n[1:] - 1, :] = Hs.R
    return out


# -- chiral structure ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ChiralPair:
    """Off-diagonal chiral sectors: ``H = [[0, H_plus], [H_minus, 0]]``."""

    H_plus: BlockSymbol
    H_minus: BlockSymbol

    def assemble(self) -> BlockSymbol:
        return reassemble(self)


def _check_offdiagonal(H: BlockSymbol) -> None:
    h = H.L // 2
    for name, m in (("R", H.R), ("V", H.V), ("T", H.T)):
        diag = np.hypot(np.linalg.norm(m[:h, :h]), np.linalg.norm(m[h:, h:]))
        off = np.hypot(np.linalg.norm(m[:h, h:]), np.linalg.norm(m[h:, :h]))
        if diag > CHIRAL_TOL * (off + 1.0):
            raise NotChiral(f"{name} has diagonal blocks of norm {diag:.3g}")


def chiral_split(H: BlockSymbol) -> ChiralPair:
    """Read off the chiral sectors ``H_plus`` (upper right) and ``H_minus``.

    The grading ``diag(1, -1)`` with blocks of size ``L/2`` is assumed;
    it is checked, not searched for.
    """
    if H.L % 2:
        raise OddBlockSize(f"chiral split needs even L, got {H.L}")
    _check_offdiagonal(H)
    h = H.L // 2
    plus = new_block_symbol(h, H.R[:h, h:], H.V[:h, h:], H.T[:h, h:])
    minus = new_block_symbol(h, H.R[h:, :h], H.V[h:, :h], H.T[h:, :h])
    return ChiralPair(plus, minus)


def reassemble(pair: ChiralPair) -> BlockSymbol:
    """Inverse of :func:`chiral_split`."""
    h = pair.H_plus.L

    def glue(a, b):
        z = np.zeros((h, h), dtype=complex)
        return np.block([[z, a], [b, z]])

    p, m = pair.H_plus, pair.H_minus
    return new_block_symbol(2 * h, glue(p.R, m.R), glue(p.V, m.V), glue(p.T, m.T),
                            grading=h)


# -- model files --------------------------------------------------------------

def _decode_matrix(data, L: int, name: str) -> np.ndarray:
    a = np.asarray(data, dtype=float)
    if a.shape[-1:] != (2,):
        raise ModelFileError(f"{name}: entries must be [re, im] pairs")
    c = a[..., 0] + 1j * a[..., 1]
    if c.size != L * L:
        raise ModelFileError(f"{name}: expected {L * L} entries, got {c.size}")
    return c.reshape(L, L)


def model_from_dict(d: dict) -> BlockSymbol:
    """Build a symbol from the JSON model schema (see ``docs/model_schema.md``)."""
    try:
        if "scalar_band" in d:
            band = np.asarray(d["scalar_band"], dtype=float)
            if band.ndim != 2 or band.shape[1] != 2:
                raise ModelFileError("scalar_band: entries must be [re, im] pairs")
            return lift_scalar_banded(band[:, 0] + 1j * band[:, 1])
        L = int(d["L"])
        mats = [_decode_matrix(d[k], L, k) for k in ("R", "V", "T")]
    except KeyError as exc:
        raise ModelFileError(f"missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelFileError):
            raise
        raise ModelFileError(f"malformed model: {exc}") from None
    return new_block_symbol(L, *mats, grading=d.get("grading"))


def load_model(path) -> BlockSymbol:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from None
    return model_from_dict(d)


def save_model(H: BlockSymbol, path) -> None:
    Path(path).write_text(json.dumps(H.to_dict(), indent=2) + "\n", encoding="utf-8")
