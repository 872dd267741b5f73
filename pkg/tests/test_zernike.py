"""Tests for the Fringe-indexed Zernike module."""

import itertools
import math

import numpy as np
import pytest

from aberrate.zernike import (
    ANGULAR_CONSTANT,
    ANGULAR_COSINE,
    ANGULAR_SINE,
    MAX_FRINGE,
    UnitDiskPoint,
    fringe_index,
    fringe_to_nm,
    radial,
    zernike_eval,
    zernike_field,
)


def oracle_radial(n, m, rho):
    """Term-by-term factorial sum, written independently of the module."""
    total = 0.0
    for s in range((n - m) // 2 + 1):
        num = (-1) ** s * math.factorial(n - s)
        den = (
            math.factorial(s)
            * math.factorial((n + m) // 2 - s)
            * math.factorial((n - m) // 2 - s)
        )
        total += num / den * rho ** (n - 2 * s)
    return total


def oracle_fringe_ordering():
    """Independent generator: sort (n, m) by (n + m, n), cosine before sine."""
    pairs = []
    for n in range(0, 13):
        for m in range(n % 2, n + 1, 2):
            pairs.append((n, m))
    pairs.sort(key=lambda p: (p[0] + p[1], p[0]))
    table = []
    for n, m in pairs:
        if m == 0:
            table.append((n, 0, ANGULAR_CONSTANT))
        else:
            table.append((n, m, ANGULAR_COSINE))
            table.append((n, m, ANGULAR_SINE))
    table = table[:36]
    table.append((12, 0, ANGULAR_CONSTANT))
    return table


class TestFringeIndexing:
    def test_named_low_orders(self):
        assert fringe_to_nm(1) == (0, 0, ANGULAR_CONSTANT)
        assert fringe_to_nm(4) == (2, 0, ANGULAR_CONSTANT)
        assert fringe_to_nm(5) == (2, 2, ANGULAR_COSINE)
        assert fringe_to_nm(6) == (2, 2, ANGULAR_SINE)
        assert fringe_to_nm(7) == (3, 1, ANGULAR_COSINE)
        assert fringe_to_nm(8) == (3, 1, ANGULAR_SINE)
        assert fringe_to_nm(9) == (4, 0, ANGULAR_CONSTANT)
        assert fringe_to_nm(10) == (3, 3, ANGULAR_COSINE)
        assert fringe_to_nm(11) == (3, 3, ANGULAR_SINE)

    def test_labels(self):
        assert fringe_index(1).label == "Piston"
        assert fringe_index(4).label == "Defocus"
        assert "Astigmatism" in fringe_index(5).label
        assert "Astigmatism" in fringe_index(6).label
        assert "Coma" in fringe_index(7).label
        assert "spherical" in fringe_index(9).label.lower()
        assert "Trefoil" in fringe_index(10).label
        assert "Trefoil" in fringe_index(11).label

    def test_full_table_matches_independent_ordering(self):
        oracle = oracle_fringe_ordering()
        for fringe in range(1, MAX_FRINGE + 1):
            assert fringe_to_nm(fringe) == oracle[fringe - 1]

    def test_bijection_and_invariants(self):
        seen = set()
        for fringe in range(1, MAX_FRINGE + 1):
            n, m, kind = fringe_to_nm(fringe)
            assert (n - m) % 2 == 0 and m <= n
            assert (kind == ANGULAR_CONSTANT) == (m == 0)
            seen.add((n, m, kind))
        assert len(seen) == MAX_FRINGE

    @pytest.mark.parametrize("bad", [0, -1, 38, 100])
    def test_out_of_range_rejected(self, bad):
        with pytest.raises(ValueError):
            fringe_to_nm(bad)

    def test_non_integer_rejected(self):
        with pytest.raises(ValueError):
            fringe_to_nm(4.5)


class TestRadial:
    def test_r00_is_one(self):
        assert radial(0, 0, 0.0) == 1.0
        assert radial(0, 0, 0.37) == 1.0
        assert radial(0, 0, 1.0) == 1.0

    def test_defocus_endpoints(self):
        # Oracle: 2*rho^2 - 1 from the term-by-term sum.
        assert radial(2, 0, 1.0) == pytest.approx(oracle_radial(2, 0, 1.0))
        assert radial(2, 0, 1.0) == 1.0
        assert radial(2, 0, 0.0) == pytest.approx(oracle_radial(2, 0, 0.0))
        assert radial(2, 0, 0.0) == -1.0

    def test_matches_oracle_everywhere(self):
        rng = np.random.default_rng(7)
        for fringe in range(1, MAX_FRINGE + 1):
            n, m, _ = fringe_to_nm(fringe)
            for rho in rng.random(20):
                assert radial(n, m, rho) == pytest.approx(
                    oracle_radial(n, m, rho), abs=1e-12
                )

    def test_unity_at_edge_exact(self):
        for fringe in range(1, MAX_FRINGE + 1):
            n, m, _ = fringe_to_nm(fringe)
            assert radial(n, m, 1.0) == 1.0

    def test_bounded_by_one(self):
        rng = np.random.default_rng(11)
        fringes = rng.integers(1, MAX_FRINGE + 1, size=10_000)
        rhos = rng.random(10_000)
        for fringe, rho in zip(fringes, rhos):
            n, m, _ = fringe_to_nm(int(fringe))
            assert abs(radial(n, m, rho)) <= 1.0 + 1e-12

    def test_invalid_parity_rejected(self):
        with pytest.raises(ValueError):
            radial(3, 0, 0.5)
        with pytest.raises(ValueError):
            radial(2, 3, 0.5)

    def test_rho_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            radial(2, 0, 1.5)


class TestEval:
    def test_defocus_independent_of_phi(self):
        values = {zernike_eval(4, UnitDiskPoint(0.6, phi)) for phi in (0, 1.1, 2.7, 5.5)}
        assert len(values) == 1

    def test_sine_astigmatism_zero_at_phi_zero(self):
        assert zernike_eval(6, UnitDiskPoint(0.7, 0.0)) == 0.0

    def test_cosine_astigmatism_edge(self):
        expected = oracle_radial(2, 2, 1.0) * math.cos(0.0)
        assert zernike_eval(5, UnitDiskPoint(1.0, 0.0)) == pytest.approx(expected)
        assert zernike_eval(5, UnitDiskPoint(1.0, 0.0)) == 1.0

    def test_phi_wraps(self):
        a = zernike_eval(7, UnitDiskPoint(0.5, 0.3))
        b = zernike_eval(7, UnitDiskPoint(0.5, 0.3 + 2 * math.pi))
        assert a == pytest.approx(b, abs=1e-12)
        assert UnitDiskPoint(0.5, -0.1).phi == pytest.approx(2 * math.pi - 0.1)

    def test_rho_validated(self):
        with pytest.raises(ValueError):
            UnitDiskPoint(1.2, 0.0)

    def test_deterministic(self):
        point = UnitDiskPoint(0.435, 2.11)
        values = {zernike_eval(fr, point) for fr in (9, 9, 9)}
        assert len(values) == 1

    def test_field_matches_pointwise(self):
        rng = np.random.default_rng(3)
        rho = rng.random(50)
        phi = rng.random(50) * 2 * math.pi
        for fringe in (4, 5, 6, 7, 10, 16):
            arr = zernike_field(fringe, rho, phi)
            for r, p, v in zip(rho, phi, arr):
                assert v == pytest.approx(zernike_eval(fringe, UnitDiskPoint(r, p)))


def test_discrete_orthogonality_low_orders():
    # Riemann midpoint sum over a modest polar grid; the 512^2 version runs
    # in the acceptance suite.
    n_r, n_t = 192, 192
    rho = (np.arange(n_r) + 0.5) / n_r
    phi = (np.arange(n_t) + 0.5) * 2 * math.pi / n_t
    rr, pp = np.meshgrid(rho, phi, indexing="ij")
    weight = rr / (n_r * n_t) * 2 * math.pi
    fields = {fr: zernike_field(fr, rr, pp) for fr in range(4, 12)}
    norms = {fr: math.sqrt(float((f * f * weight).sum())) for fr, f in fields.items()}
    for i, j in itertools.combinations(fields, 2):
        inner = float((fields[i] * fields[j] * weight).sum())
        assert abs(inner) < 1e-3 * norms[i] * norms[j]
