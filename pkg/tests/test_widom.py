import math

import numpy as np
import pytest

from conftest import random_symbol
from toeplitz_spectra import (
    direct_det,
    new_block_symbol,
    q_identity_check,
    transfer_det,
    widom_det,
    widom_terms,
)
from toeplitz_spectra.errors import DegenerateEnergy, MiddleModuliEqual, OverflowRisk, SizeCapExceeded
from toeplitz_spectra.model import finite_section
from toeplitz_spectra.projections import q_lower
from toeplitz_spectra.widom import LogDet, index_sets, random_instance, widom_crosscheck

VARIANTS = ("main", "variant2", "variant3")


def _tridiag_det(a, b, c, N):
    # three-term recurrence for a scalar tridiagonal Toeplitz determinant
    d0, d1 = 1.0, a
    for _ in range(N - 1):
        d0, d1 = d1, a * d1 - b * c * d0
    return d1


class TestIndexSets:
    def test_colex_order(self):
        assert index_sets(2) == ((0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3))

    def test_count(self):
        assert len(index_sets(3)) == 20

    def test_terms_sorted_by_modulus(self, rng):
        H = random_symbol(rng, 2)
        t = widom_terms(H, 0.3 + 0.1j)
        mods = [abs(x.G) for x in t]
        assert mods == sorted(mods, reverse=True)
        # the leading index set holds the L smallest transfer eigenvalues
        assert t[0].I == (0, 1)


class TestSmallCases:
    def test_laplacian_odd_section(self, lap):
        assert abs(widom_det(lap, 0.0, 3)) < 1e-12
        assert abs(direct_det(lap, 0.0, 3).value) < 1e-12 or direct_det(lap, 0.0, 3).log_abs < -30

    def test_hand_computed(self):
        # R=2, V=1, T=3: det [[0.5, 3], [2, 0.5]] = 0.25 - 6
        H = new_block_symbol(1, 2, 1, 3)
        for v in VARIANTS:
            assert widom_det(H, 0.5, 2, variant=v) == pytest.approx(-5.75, rel=1e-12)
        assert direct_det(H, 0.5, 2).value == pytest.approx(-5.75, rel=1e-14)
        assert transfer_det(H, 0.5, 2).value == pytest.approx(-5.75, rel=1e-12)

    @pytest.mark.parametrize("N", [1, 2, 5, 17])
    def test_recurrence_oracle(self, N):
        H = new_block_symbol(1, 2.0, 0.3 - 0.2j, 0.7 + 1.1j)
        E = 0.9 + 0.4j
        ref = _tridiag_det(0.3 - 0.2j - E, 0.7 + 1.1j, 2.0, N)
        for v in VARIANTS:
            assert abs(widom_det(H, E, N, variant=v) - ref) <= 1e-10 * abs(ref)


class TestAgreement:
    @pytest.mark.parametrize("L", [1, 2, 3])
    def test_variants_match_direct(self, rng, L):
        for _ in range(5):
            H, E = random_instance(rng, L)
            N = int(rng.integers(2, 9))
            d = direct_det(H, E, N)
            for v in VARIANTS:
                assert d.rel_diff(widom_det(H, E, N, variant=v, log=True)) < 1e-8

    def test_direct_routes(self, rng):
        # dense LU, banded LU and the transfer-matrix product are independent
        H = random_symbol(rng, 2)
        E = 0.2 - 0.4j
        N = 300  # NL = 600 crosses the banded threshold
        banded = direct_det(H, E, N)
        A = finite_section(H, N, E=E)
        sign, logabs = np.linalg.slogdet(A)
        assert banded.log_abs == pytest.approx(logabs, rel=1e-10)
        assert abs(banded.phase - sign) < 1e-8
        assert banded.rel_diff(transfer_det(H, E, N)) < 1e-8

    def test_large_N_log_mode(self, hn):
        E = 3.0 + 2.0j
        d = direct_det(hn, E, 1500)
        w = widom_det(hn, E, 1500, log=True)
        assert d.rel_diff(w) < 1e-8
        assert abs(d.log_abs - w.log_abs) < 1e-8 * abs(d.log_abs)

    def test_overflow_risk(self, hn):
        with pytest.raises(OverflowRisk):
            widom_det(hn, 40.0, 2000)
        assert isinstance(widom_det(hn, 40.0, 2000, log=True), LogDet)

    def test_degenerate_energy(self, lap):
        with pytest.raises(DegenerateEnergy):
            widom_det(lap, 2.0, 5)
        with pytest.raises(DegenerateEnergy):
            widom_terms(lap, -2.0)

    def test_direct_cap(self, hn):
        with pytest.raises(SizeCapExceeded):
            direct_det(hn, 0.0, 5000)

    def test_unknown_variant(self, hn):
        with pytest.raises(ValueError):
            widom_det(hn, 5.0, 3, variant="variant9")


class TestLogDet:
    def test_round_trip(self):
        x = -3.5 + 2j
        assert LogDet.from_complex(x).value == pytest.approx(x)
        assert LogDet.from_complex(0).value == 0

    def test_rel_diff_without_overflow(self):
        a = LogDet(2000.0, 1 + 0j)
        b = LogDet(2000.0 + 1e-12, 1 + 0j)
        assert a.rel_diff(b) < 1e-11
        assert a.rel_diff(LogDet(2000.0, -1 + 0j)) == pytest.approx(1.0)
        with pytest.raises(OverflowRisk):
            a.value


class TestQIdentity:
    def test_random(self, rng):
        for L in (1, 2, 3):
            H, E = random_instance(rng, L, min_gap=0.05)
            rep = q_identity_check(H, E)
            assert rep.discrepancy <= 1e-7
            assert not rep.near_lambda

    def test_hatano_nelson_closed_form(self, hn):
        R, V, T = 2.5, -0.1 + 0.2j, 0.5 + 1j
        E = 4.0 + 1.0j
        rep = q_identity_check(hn, E)
        w = -1 / ((E - V) * np.sqrt(1 - 4 * R * T / (E - V) ** 2))
        for v in rep.values:
            assert abs(v - w) < 1e-8 * abs(w)

    def test_first_moment_is_q_lower(self, rng):
        H, E = random_instance(rng, 2, min_gap=0.05)
        rep = q_identity_check(H, E)
        assert abs(rep.values[0] - q_lower(H, E)) < 1e-8 * max(1, abs(rep.values[0]))

    def test_on_lambda(self, lap):
        with pytest.raises(MiddleModuliEqual):
            q_identity_check(lap, 0.5)

    def test_near_lambda_flag(self, lap):
        rep = q_identity_check(lap, 0.5 + 5e-4j)
        assert rep.near_lambda

    def test_radius_validation(self, hn):
        with pytest.raises(ValueError):
            q_identity_check(hn, 4.0, s=1e6)


class TestLeadingTerm:
    def test_ratio_tends_to_q(self, rng):
        # det(H_N - E) / G_I0^{N+1} -> q_I0 as N grows, off Λ
        H, E = random_instance(rng, 2, min_gap=0.2)
        t = widom_terms(H, E)[0]
        q = t.q
        errs = []
        for N in (10, 20, 40):
            d = direct_det(H, E, N)
            ratio = d.phase * np.exp(d.log_abs - (N + 1) * t.log_G.real) \
                * np.exp(-1j * (N + 1) * t.log_G.imag)
            errs.append(abs(ratio - q))
        assert errs[1] < errs[0] and errs[2] < errs[1]


class TestCrossCheck:
    def test_seeded_batch(self):
        res = widom_crosscheck(7, cases=20)
        assert all(r.passed for r in res)
        assert [r.case for r in res] == list(range(20))

    def test_deterministic(self):
        a = widom_crosscheck(3, cases=5)
        b = widom_crosscheck(3, cases=5)
        assert [r.discrepancy for r in a] == [r.discrepancy for r in b]
        assert math.isfinite(a[0].discrepancy)


@pytest.mark.parametrize("R,T,E", [(3, 1, 0.5), (3, 0.2, 0.1), (5, 0.01, 0.0), (5, 0.01, 3.0)])
def test_direct_det_unbalanced_large_N(R, T, E):
    # pivots of the raw section leave the floating range; the balanced one does not
    H = new_block_symbol(1, R, 0, T)
    d = direct_det(H, E, 1500)
    assert d.rel_diff(transfer_det(H, E, 1500)) < 1e-8
    assert d.rel_diff(widom_det(H, E, 1500, log=True)) < 1e-8
