"""Property tests over randomly drawn symbols."""
import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from toeplitz_spectra import (
    direct_det,
    finite_section,
    lift_scalar_banded,
    new_block_symbol,
    scale_symbol,
    transfer_eigendata,
    transfer_matrix,
    widom_det,
)
from toeplitz_spectra.errors import SingularCoefficient
from toeplitz_spectra.model import ChiralPair, chiral_split, reassemble, scalar_band_section
from toeplitz_spectra.spectra import winding, winding_integral
from toeplitz_spectra.widom import LogDet

SETTINGS = settings(max_examples=40, deadline=None,
                    suppress_health_check=[HealthCheck.filter_too_much])

finite = st.floats(-2, 2, allow_nan=False, allow_infinity=False)
cplx = st.builds(complex, finite, finite)


@st.composite
def symbols(draw, L=None):
    L = draw(st.integers(1, 3)) if L is None else L
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)

    def cm():
        return rng.normal(size=(L, L)) + 1j * rng.normal(size=(L, L))

    try:
        return new_block_symbol(L, cm(), cm(), cm())
    except SingularCoefficient:
        assume(False)


@SETTINGS
@given(symbols(), cplx, st.floats(0.2, 5.0))
def test_scaling_conjugates_transfer_matrix(H, E, s):
    # eigenvalues of the scaled transfer matrix are those of the original over s
    z = transfer_eigendata(H, E).eigenvalues
    zs = transfer_eigendata(scale_symbol(H, s), E).eigenvalues
    np.testing.assert_allclose(np.sort_complex(zs), np.sort_complex(z / s),
                               rtol=1e-7, atol=1e-9 * np.abs(z).max())


@SETTINGS
@given(symbols(), cplx, st.floats(0.3, 3.0))
def test_scaling_preserves_section_spectrum(H, E, s):
    # H^s_N is a diagonal similarity of H_N, so determinants coincide
    N = 4
    a = np.linalg.det(finite_section(H, N, E=E))
    b = np.linalg.det(finite_section(H, N, s, E))
    assert abs(a - b) <= 1e-8 * max(1.0, abs(a))


@SETTINGS
@given(st.lists(cplx, min_size=3, max_size=7).filter(lambda t: len(t) % 2 == 1),
       st.integers(2, 6))
def test_lift_matches_scalar_band(t, N):
    assume(abs(t[0]) > 1e-2 and abs(t[-1]) > 1e-2)
    try:
        H = lift_scalar_banded(t)
    except SingularCoefficient:
        assume(False)
    np.testing.assert_array_equal(finite_section(H, N), scalar_band_section(t, N * H.L))


@SETTINGS
@given(symbols(), cplx)
def test_I_unitarity(H, E):
    L = H.L
    A = transfer_matrix(H, E)
    Ah = transfer_matrix(H, np.conj(E), "hat")
    I = np.block([[np.zeros((L, L)), -np.eye(L)], [np.eye(L), np.zeros((L, L))]])
    assert np.linalg.norm(Ah.conj().T @ I @ A - I) <= 1e-9 * np.linalg.norm(A) ** 2


@SETTINGS
@given(symbols(), cplx)
def test_eigenvalue_product(H, E):
    z = transfer_eigendata(H, E).eigenvalues
    ref = H.det_R / H.det_T
    assert abs(np.prod(z) - ref) <= 1e-8 * abs(ref)


@SETTINGS
@given(symbols(), cplx, st.integers(2, 7))
def test_widom_equals_direct(H, E, N):
    ed = transfer_eigendata(H, E)
    assume(ed.middle_gap > 1e-3 and not ed.degenerate)
    d = direct_det(H, E, N)
    assert d.rel_diff(widom_det(H, E, N, log=True)) < 1e-6


@SETTINGS
@given(symbols(), cplx)
def test_winding_routes_agree(H, E):
    ed = transfer_eigendata(H, E)
    assume(np.min(np.abs(ed.moduli - 1)) > 0.05)
    val, _ = winding_integral(H, E)
    assert abs(val - winding(H, E)) < 1e-6


@SETTINGS
@given(st.integers(0, 2 ** 32 - 1))
def test_chiral_round_trip(seed):
    rng = np.random.default_rng(seed)

    def sector():
        def c():
            return rng.normal(size=(1, 1)) + 1j * rng.normal(size=(1, 1))
        return new_block_symbol(1, c(), c(), c())

    H = reassemble(ChiralPair(sector(), sector()))
    pair = chiral_split(H)
    back = reassemble(pair)
    for a, b in ((back.R, H.R), (back.V, H.V), (back.T, H.T)):
        np.testing.assert_array_equal(a, b)
    ev = np.linalg.eigvals(finite_section(H, 5))
    d = np.abs(ev[:, None] + ev[None, :]).min(axis=1)
    assert d.max() < 1e-8 * max(1.0, np.abs(ev).max())


@given(st.floats(-700, 700), st.floats(-np.pi, np.pi))
def test_logdet_round_trip(la, ph):
    x = LogDet(la, complex(np.exp(1j * ph)))
    y = LogDet.from_complex(x.value)
    assert x.rel_diff(y) < 1e-12


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_logdet_rel_diff_symmetric(a, b):
    x, y = LogDet(a, 1 + 0j), LogDet(b, -1j)
    assert x.rel_diff(y) == pytest.approx(y.rel_diff(x))
    assert 0 <= x.rel_diff(y) <= 1 + 1e-12
