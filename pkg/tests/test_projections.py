import numpy as np
import pytest

from conftest import random_symbol
from toeplitz_spectra import q_moment, riesz_by_index, riesz_projection, transfer_eigendata
from toeplitz_spectra.errors import EigenvalueOnContour
from toeplitz_spectra.projections import (
    complement_conjugator,
    first_moment_kernel_dim,
    kernel_dim,
    moments_from_projection,
    q_index,
    q_lower,
    q_lower_batch,
    q_moment_sequence,
    schur_projector,
)
from toeplitz_spectra.spectra import halfline_kernel_dims

HN_R, HN_V, HN_T = 2.5, -0.1 + 0.2j, 0.5 + 1j


def _instance(rng, L=2):
    H = random_symbol(rng, L)
    for _ in range(100):
        E = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
        ed = transfer_eigendata(H, E)
        if ed.middle_gap > 0.05 and not ed.degenerate:
            return H, E, ed
    raise RuntimeError("no admissible energy")


class TestRiesz:
    def test_full_set_is_identity(self, rng):
        H, E, _ = _instance(rng)
        np.testing.assert_allclose(riesz_by_index(H, E, range(4)).P, np.eye(4), atol=1e-12)

    def test_complementary_sets(self, rng):
        H, E, _ = _instance(rng)
        P = riesz_by_index(H, E, (0, 2)).P + riesz_by_index(H, E, (1, 3)).P
        np.testing.assert_allclose(P, np.eye(4), atol=1e-9)

    def test_idempotent_and_commuting(self, rng):
        H, E, ed = _instance(rng, 3)
        P = riesz_projection(H, E, ed.middle_radius).P
        A = ed.matrix
        assert np.linalg.norm(P @ P - P) < 1e-10
        assert np.linalg.norm(P @ A - A @ P) < 1e-10 * np.linalg.norm(A)

    def test_methods_agree(self, rng):
        H, E, ed = _instance(rng, 3)
        r = ed.middle_radius
        P = riesz_projection(H, E, r, "eigen").P
        for m in ("contour", "schur"):
            np.testing.assert_allclose(riesz_projection(H, E, r, m).P, P, atol=1e-7)

    def test_index_set_matches_radius(self, rng):
        H, E, ed = _instance(rng)
        a = riesz_by_index(H, E, (0, 1)).P
        b = riesz_projection(H, E, ed.middle_radius).P
        np.testing.assert_allclose(a, b, atol=1e-9)
        c = riesz_projection(H, E, (0, 1), method="contour").P
        np.testing.assert_allclose(c, b, atol=1e-7)

    def test_lower_left_block_is_first_moment(self, rng):
        H, E, ed = _instance(rng)
        r = ed.middle_radius
        P = riesz_by_index(H, E, (0, 1)).P
        np.testing.assert_allclose(P[2:, :2], q_moment(H, E, r, 1), atol=1e-9)

    def test_complement_conjugation(self, rng):
        H, E, ed = _instance(rng)
        r = ed.middle_radius
        K = complement_conjugator(H)
        P = riesz_projection(H, E, r).P
        Pt = riesz_projection(H.tilde(), E, 1 / r).P
        np.testing.assert_allclose(np.eye(4) - P, K @ Pt @ np.linalg.inv(K), atol=1e-8)

    def test_on_contour(self, lap):
        with pytest.raises(EigenvalueOnContour):
            riesz_projection(lap, 0.5, 1.0)

    def test_schur_projector_rank(self, rng):
        A = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        r = np.median(np.abs(np.linalg.eigvals(A)))
        P = schur_projector(A, r)
        k = int(np.sum(np.abs(np.linalg.eigvals(A)) < r))
        assert round(np.trace(P).real) == k

    def test_bad_index_set(self, hn):
        with pytest.raises(ValueError):
            riesz_by_index(hn, 0.0, (0, 5))


class TestMoments:
    def test_contour_matches_projection(self, rng):
        H, E, ed = _instance(rng, 3)
        r = ed.middle_radius
        Q = moments_from_projection(H, riesz_projection(H, E, r).P)
        for j in range(3):
            np.testing.assert_allclose(q_moment(H, E, r, j), Q[j], atol=1e-8)
            np.testing.assert_allclose(q_moment(H, E, r, j, "schur"), Q[j], atol=1e-8)

    def test_inversion_symmetry(self, rng):
        H, E, ed = _instance(rng)
        r = ed.middle_radius
        for j in range(3):
            np.testing.assert_allclose(q_moment(H.tilde(), E, 1 / r, j),
                                       q_moment(H, E, r, 2 - j), atol=1e-9)

    def test_quadrature_converges_geometrically(self, rng):
        H = random_symbol(rng, 2)
        for _ in range(1000):
            E = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            ed = transfer_eigendata(H, E)
            if 0.05 < ed.middle_gap < 0.2:
                break
        r = ed.middle_radius
        seq = q_moment_sequence(H, E, r, 1, [16, 32, 64, 128])
        diffs = [np.linalg.norm(b - a) for a, b in zip(seq, seq[1:])]
        assert diffs[0] > diffs[1] > diffs[2]

    def test_higher_moments_need_contour(self, rng):
        H, E, ed = _instance(rng)
        with pytest.raises(ValueError):
            q_moment(H, E, ed.middle_radius, 3, method="eigen")
        q_moment(H, E, ed.middle_radius, 3)

    @pytest.mark.parametrize("E", [0.0, 1.0 + 0.5j, -0.5 - 0.3j])
    def test_hatano_nelson_inside_ellipse(self, hn, E):
        assert np.abs(q_moment(hn, E, 1.0, 1)).max() < 1e-12

    @pytest.mark.parametrize("E", [4.0, 3.5j, -3.0 - 2.0j, 1.0 + 3.0j])
    def test_hatano_nelson_outside_ellipse(self, hn, E):
        Q = q_moment(hn, E, 1.0, 1)[0, 0]
        d = (E - HN_V) ** 2 - 4 * HN_R * HN_T
        # the sign-free statement first, then the branch continuous from infinity
        assert abs(Q ** 2 - 1 / d) < 1e-8 * abs(1 / d)
        w = -1 / ((E - HN_V) * np.sqrt(1 - 4 * HN_R * HN_T / (E - HN_V) ** 2))
        assert abs(Q - w) < 1e-8 * abs(w)


class TestKernelDims:
    @pytest.mark.parametrize("E,dims", [(-0.1, (1, 0)), (0.2, (0, 1))])
    def test_selfadjoint_bound_states(self, selfadj, E, dims):
        ed = transfer_eigendata(selfadj, E)
        Q1 = q_moment(selfadj, E, ed.middle_radius, 1)
        assert halfline_kernel_dims(selfadj, E) == dims
        assert kernel_dim(Q1) == sum(dims)
        assert first_moment_kernel_dim(selfadj, E) == sum(dims)

    def test_ssh_zero_mode(self, ssh):
        ed = transfer_eigendata(ssh, 0.0)
        Q1 = q_moment(ssh, 0.0, ed.middle_radius, 1)
        assert np.abs(Q1).max() < 1e-12
        assert halfline_kernel_dims(ssh, 0.0) == (1, 1)
        assert first_moment_kernel_dim(ssh, 0.0) == 2
        assert kernel_dim(Q1, scale=1.0) == 2

    def test_generic_point_has_trivial_kernel(self, selfadj):
        assert first_moment_kernel_dim(selfadj, 0.05) == 0
        assert halfline_kernel_dims(selfadj, 0.05) == (0, 0)


class TestQFunctions:
    def test_routes_agree(self, rng):
        H, E, _ = _instance(rng, 3)
        a = q_index(H, E, (0, 1, 2))
        b = q_lower(H, E)
        c = q_lower(H, E, method="eigen")
        q, sc = q_lower_batch(H, np.array([E]))
        assert abs(a - b) < 1e-9 * max(1, abs(a))
        assert abs(a - c) < 1e-9 * max(1, abs(a))
        assert abs(q[0] - a) < 1e-9 * max(1, abs(a))
        assert sc[0] >= abs(q[0])

    def test_second_index_set(self, rng):
        H, E, _ = _instance(rng)
        q, _ = q_lower_batch(H, np.array([E]), offset=1)
        assert abs(q[0] - q_index(H, E, (0, 2))) < 1e-9

    def test_q_zero_at_outlier(self, selfadj):
        assert abs(q_lower(selfadj, 0.2)) < 1e-10
