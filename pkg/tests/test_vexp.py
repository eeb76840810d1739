"""Projection factors, b fields, expansion exponents, coverage partition."""

import math

import numpy as np
import pytest

import ghmlab as g
from ghmlab.errors import SingularPointError, TreeBudgetError
from ghmlab.vexp import b_mu_field, beta_mu_estimate, coverage_partition, eta


class TestEta:
    def test_identity_branch(self, identity_map):
        for v in ((1.0, 0.0), (0.0, 1.0), (math.sqrt(0.5), math.sqrt(0.5))):
            assert eta(identity_map, (0.3, 0.4), v) == pytest.approx(1.0, abs=1e-12)

    def test_diagonal_branch(self, diag_map):
        assert eta(diag_map, (0.3, 0.4), (1.0, 0.0)) == pytest.approx(2.0, abs=1e-12)
        assert eta(diag_map, (0.3, 0.4), (0.0, 1.0)) == pytest.approx(0.5, abs=1e-12)

    def test_slanted3_vertical_direction(self, slanted3):
        # branch 1 shear: transpose-differential formula in closed form
        alpha1 = math.atan(0.65) / 3 * (1.0 - 1e-12)
        expected = math.hypot(3 * math.tan(alpha1), 0.35)
        assert eta(slanted3, (0.1, 0.4), (0.0, 1.0)) == pytest.approx(expected, rel=1e-12)

    def test_matches_projection_maximization(self, slanted3):
        # definition-vs-formula equivalence: sup over unit w of <v, DF w>
        thetas = 2 * np.pi * np.arange(1000) / 1000
        W = np.stack([np.cos(thetas), np.sin(thetas)])
        rng = np.random.default_rng(3)
        for _ in range(10):
            z = rng.random(2) * 0.98 + 0.01
            phi = rng.random() * 2 * np.pi
            v = np.array([math.cos(phi), math.sin(phi)])
            idx, _ = slanted3.branch_index_scalar(z)
            D = slanted3.branches[idx].diff_at(*z)
            brute = float(np.max(v @ (D @ W)))
            assert abs(eta(slanted3, z, v) - brute) <= 1e-3

    def test_validation(self, diag_map):
        with pytest.raises(ValueError):
            eta(diag_map, (0.3, 0.4), (1.0, 1.0))
        with pytest.raises(SingularPointError):
            eta(diag_map, (1.5, 0.4), (1.0, 0.0))


class TestBField:
    def test_identity_is_one(self, identity_map):
        rep = b_mu_field(identity_map, 0.3, 16, 16)
        assert np.allclose(rep.field, 1.0, atol=1e-12)
        assert rep.sup_per_n[0] == pytest.approx(1.0, abs=1e-12)
        assert not rep.verdict  # beta = 1 is not strictly below 1

    def test_diagonal_hand_value(self, diag_map):
        # JF = 1, eta = 2 at v = (1, 0), mu = 1/2: b = 1/2
        rep = b_mu_field(diag_map, 0.5, 16, 16)
        covered = rep.field[:, 0][rep.field[:, 0] > 0]
        assert covered.size > 0
        assert np.allclose(covered, 0.5, atol=1e-12)

    def test_affine_homogeneity(self, diag_map):
        # b depends only on the direction, never on the base point
        rep = b_mu_field(diag_map, 0.25, 16, 16)
        covered = rep.field[rep.field[:, 0] > 0]
        assert np.all(np.ptp(covered, axis=0) <= 1e-12)

    def test_points_without_preimages_contribute_zero(self, diag_map):
        # the image strip is the lower half, so upper-half points carry b = 0
        rep = b_mu_field(diag_map, 0.25, 16, 16)
        uncovered = rep.base_points[:, 1] > 0.5 + 1e-9
        assert np.all(rep.field[uncovered] == 0.0)

    def test_validation(self, diag_map):
        with pytest.raises(ValueError):
            b_mu_field(diag_map, -0.1, 16, 16)
        with pytest.raises(ValueError):
            b_mu_field(diag_map, 0.25, 4, 16)


class TestBetaSequence:
    def test_identity_flat(self, identity_map):
        rep = beta_mu_estimate(identity_map, 0.4, 3, 16, 16)
        assert all(b == pytest.approx(1.0, abs=1e-12) for b in rep.beta_sequence)
        assert not rep.verdict

    def test_baker_hand_value(self, baker):
        # one preimage, JF = 1; the worst direction is vertical with
        # eta = 2^-n, so sup b = 2^(2 mu n) and beta_n = 2^(2 mu)
        mu = 0.45
        rep = beta_mu_estimate(baker, mu, 3, 16, 64)
        expected = 2.0 ** (2 * mu)
        assert rep.sup_per_n[0] == pytest.approx(expected, rel=1e-9)
        assert rep.sup_per_n[1] == pytest.approx(expected**2, rel=1e-9)
        assert rep.beta_sequence[0] == pytest.approx(expected, rel=1e-9)
        assert rep.monotone_within(1e-6)
        assert not rep.verdict

    def test_slanted3_submultiplicative_and_monotone(self, slanted3):
        rep = beta_mu_estimate(slanted3, 0.25, 3, 32, 32)
        assert rep.check_submultiplicative(1e-6)
        assert rep.monotone_within(1e-6)
        assert all(s > 0 for s in rep.sup_per_n)

    def test_generic_path_agrees_with_word_table(self, slanted3):
        from ghmlab.vexp import _angle_grid, _generic_point_field

        rep = beta_mu_estimate(slanted3, 0.25, 2, 16, 16)
        _, V = _angle_grid(16)
        rng = np.random.default_rng(1)
        idx = rng.integers(0, rep.base_points.shape[0], 5)
        for i in idx:
            z = rep.base_points[i]
            direct = _generic_point_field(slanted3, 0.25, z, V, 1)
            assert np.allclose(direct, rep.field[i], atol=1e-10)

    def test_tree_budget(self, slanted3):
        with pytest.raises(TreeBudgetError):
            beta_mu_estimate(slanted3, 0.25, 13, 16, 16)


class TestCoverage:
    def test_baker_tiling(self, baker):
        pieces = coverage_partition(baker, 32)
        assert len(pieces) == 2
        by_theta = {tuple(sorted(p.theta)): p for p in pieces}
        assert by_theta[(1,)].y_interval == pytest.approx((0.0, 0.5), abs=1e-12)
        assert by_theta[(2,)].y_interval == pytest.approx((0.5, 1.0), abs=1e-12)
        for p in pieces:
            assert p.x_interval == (0.0, 1.0)

    def test_synthetic_overlap_three_pieces(self):
        k, lam = 0.5, 1.5
        branches = [
            g.AffineBranch(
                id=1,
                domain=g.StripRegion.vertical_interval(0.0, 0.5),
                linear=[[2.0, 0.0], [0.0, 0.6]],
                offset=[0.0, 0.0],
            ),
            g.AffineBranch(
                id=2,
                domain=g.StripRegion.vertical_interval(0.5, 1.0),
                linear=[[2.0, 0.0], [0.0, 0.6]],
                offset=[-1.0, 0.4],
            ),
        ]
        ghm = g.GhmMap(branches, k=k, lam=lam)
        assert ghm.overlap_flag
        pieces = coverage_partition(ghm, 32)
        thetas = sorted(tuple(sorted(p.theta)) for p in pieces)
        assert thetas == [(1,), (1, 2), (2,)]
        by_theta = {tuple(sorted(p.theta)): p for p in pieces}
        assert by_theta[(1,)].y_interval == pytest.approx((0.0, 0.4), abs=1e-12)
        assert by_theta[(1, 2)].y_interval == pytest.approx((0.4, 0.6), abs=1e-12)
        assert by_theta[(2,)].y_interval == pytest.approx((0.6, 1.0), abs=1e-12)

    def test_slanted3_stable_under_refinement(self, slanted3):
        p128 = coverage_partition(slanted3, 128)
        p256 = coverage_partition(slanted3, 256)
        assert len(p128) == len(p256)
        assert {frozenset(p.theta) for p in p128} == {frozenset(p.theta) for p in p256}

    def test_column_invariants(self, slanted3):
        pieces = coverage_partition(slanted3, 64)
        assert len({frozenset(p.theta) for p in pieces}) <= 2**3 - 1
        assert all(p.theta for p in pieces)
        # pieces tile the x axis
        xs = sorted({p.x_interval[0] for p in pieces} | {p.x_interval[1] for p in pieces})
        assert xs[0] == 0.0 and xs[-1] == 1.0
        # within any column, piece intervals are pairwise disjoint
        for j in (0, 17, 40, 63):
            xc = (j + 0.5) / 64
            col = [p for p in pieces if p.x_interval[0] < xc < p.x_interval[1]]
            ivals = sorted(p.interval_at(xc) for p in col)
            for a, b in zip(ivals[:-1], ivals[1:], strict=True):
                assert a[1] <= b[0] + 1e-9

    def test_covered_length_matches_union(self, slanted3):
        # column-wise: total piece length equals the union of strip sections
        x_res = 64
        pieces = coverage_partition(slanted3, x_res)
        for j in (5, 31, 60):
            xc = (j + 0.5) / x_res
            col = [p for p in pieces if p.x_interval[0] < xc < p.x_interval[1]]
            piece_len = sum(hi - lo for lo, hi in (p.interval_at(xc) for p in col))
            ivals = sorted(
                (float(b.image.lower_at(xc)), float(b.image.upper_at(xc)))
                for b in slanted3.branches
            )
            covered, hi = 0.0, -1.0
            for lo, up in ivals:
                lo = max(lo, hi)
                if up > lo:
                    covered += up - lo
                hi = max(hi, up)
            assert piece_len == pytest.approx(covered, abs=1e-9)
