import itertools

import numpy as np
import pytest

from helpers import random_instance, random_matrix
from propdist.frobenius import (
    BipartiteUnitary,
    Ordering,
    block,
    embed,
    frob_distance,
    frob_distance_exact_tensor,
    frob_objective,
    gamma,
    swap_factors,
)
from propdist.matcore import (
    DimensionError,
    NotUnitaryError,
    haar_random_unitary,
    is_unitary,
    spectral_norm,
)

SF, BF = Ordering.SYSTEM_FIRST, Ordering.BATH_FIRST


class TestBipartiteUnitary:
    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            BipartiteUnitary(np.eye(6), 2, 2)

    def test_not_unitary(self):
        with pytest.raises(NotUnitaryError):
            BipartiteUnitary(np.diag([1, 1, 1, 2]), 2, 2)

    def test_tolerance_scales_with_dim(self):
        m = np.eye(4) * (1 + 5e-9)
        BipartiteUnitary(m, 2, 2)  # residual 2e-8 < 1e-8 * sqrt(4)
        with pytest.raises(NotUnitaryError):
            BipartiteUnitary(m, 2, 2, tol=1e-10)

    def test_ordering_parse(self):
        assert BipartiteUnitary(np.eye(2), 2, 1, "bath-first").ordering is BF
        assert Ordering.parse("system") is SF

    def test_immutable(self):
        u = BipartiteUnitary(np.eye(2), 2, 1)
        with pytest.raises(ValueError):
            u.matrix[0, 0] = 2


class TestBlock:
    def test_system_first_blocks(self, rng):
        g, phi = haar_random_unitary(3, rng), haar_random_unitary(2, rng)
        u = BipartiteUnitary(np.kron(g, phi), 3, 2, SF)
        for i, j in itertools.product(range(3), repeat=2):
            np.testing.assert_allclose(block(u, i, j), g[i, j] * phi, atol=1e-15)

    def test_bath_first_blocks(self, rng):
        g, phi = haar_random_unitary(2, rng), haar_random_unitary(3, rng)
        u = BipartiteUnitary(np.kron(phi, g), 2, 3, BF)
        for i, j in itertools.product(range(3), repeat=2):
            np.testing.assert_allclose(block(u, i, j), phi[i, j] * g, atol=1e-15)

    @pytest.mark.parametrize("ordering", [SF, BF])
    def test_reassembly(self, rng, ordering):
        u, _ = random_instance(rng, 3, 2, ordering)
        count, _ = u.block_grid()
        rows = [np.hstack([block(u, i, j) for j in range(count)]) for i in range(count)]
        np.testing.assert_array_equal(np.vstack(rows), u.matrix)

    def test_out_of_range(self):
        u = BipartiteUnitary(np.eye(4), 2, 2)
        with pytest.raises(IndexError):
            block(u, 2, 0)


class TestSwap:
    def test_kron_swap(self, rng):
        a, b = random_matrix((2, 2), rng), random_matrix((3, 3), rng)
        np.testing.assert_allclose(swap_factors(np.kron(a, b), 2, 3), np.kron(b, a))

    def test_round_trip(self, rng):
        m = random_matrix((6, 6), rng)
        np.testing.assert_array_equal(swap_factors(swap_factors(m, 2, 3), 3, 2), m)

    def test_reordered_round_trip(self, rng):
        u, _ = random_instance(rng, 2, 3)
        back = u.reordered().reordered()
        assert back.ordering is SF
        np.testing.assert_array_equal(back.matrix, u.matrix)


class TestGamma:
    def test_product_system_first(self, rng):
        g, phi = haar_random_unitary(3, rng), haar_random_unitary(2, rng)
        gm = gamma(BipartiteUnitary(np.kron(g, phi), 3, 2, SF), g)
        np.testing.assert_allclose(gm.gamma, 3 * phi, atol=1e-13)

    def test_product_bath_first(self, rng):
        g, phi = haar_random_unitary(2, rng), haar_random_unitary(3, rng)
        gm = gamma(BipartiteUnitary(np.kron(phi, g), 2, 3, BF), g)
        np.testing.assert_allclose(gm.gamma, 2 * phi, atol=1e-13)

    def test_system_first_index_loops(self, rng):
        u, g = random_instance(rng, 2, 2, SF)
        m = u.matrix
        expected = np.zeros((2, 2), complex)
        for i, j, a, b in itertools.product(range(2), repeat=4):
            expected[a, b] += np.conj(g[i, j]) * m[i * 2 + a, j * 2 + b]
        np.testing.assert_allclose(gamma(u, g).gamma, expected, atol=1e-14)

    def test_bath_first_trace_loops(self, rng):
        u, g = random_instance(rng, 2, 3, BF)
        expected = np.array(
            [[np.trace(g.conj().T @ block(u, i, j)) for j in range(3)] for i in range(3)]
        )
        np.testing.assert_allclose(gamma(u, g).gamma, expected, atol=1e-14)

    def test_gate_dimension_mismatch(self, rng):
        u, _ = random_instance(rng, 2, 2)
        with pytest.raises(DimensionError):
            gamma(u, np.eye(3))

    def test_gate_not_unitary(self, rng):
        u, _ = random_instance(rng, 2, 2)
        with pytest.raises(NotUnitaryError):
            gamma(u, np.diag([1.0, 0.5]))


class TestFrobDistance:
    @pytest.mark.parametrize("n_b", [1, 2, 3])
    @pytest.mark.parametrize("ordering", [SF, BF])
    def test_exact_product_is_zero(self, rng, n_b, ordering):
        g, phi = haar_random_unitary(2, rng), haar_random_unitary(n_b, rng)
        u = BipartiteUnitary(embed(g, phi, ordering), 2, n_b, ordering)
        rep = frob_distance(u, g)
        assert rep.distance <= 1e-12
        np.testing.assert_allclose(rep.phi_opt, phi, atol=1e-12)

    def test_phase_gate_value(self):
        u = BipartiteUnitary(np.diag([1, 1j]), 2, 1)
        rep = frob_distance(u, np.eye(2))
        assert rep.distance == pytest.approx(np.sqrt(1 - np.sqrt(2) / 2), abs=1e-12)
        assert rep.distance == pytest.approx(0.541196, abs=1e-6)
        # brute-force phase grid over the 1x1 unitary
        phis = np.exp(1j * np.linspace(0, 2 * np.pi, 10_001))
        grid = [np.linalg.norm(np.diag([1, 1j]) - p * np.eye(2)) / 2 for p in phis]
        assert min(grid) == pytest.approx(rep.distance, abs=1e-7)
        assert rep.distance <= min(grid) + 1e-15

    def test_beats_random_unitaries(self, rng):
        u, g = random_instance(rng, 2, 2)
        rep = frob_distance(u, g)
        samples = [frob_objective(u, g, haar_random_unitary(2, rng)) for _ in range(10_000)]
        assert rep.distance <= min(samples) + 1e-12
        assert frob_objective(u, g, rep.phi_opt) == pytest.approx(rep.distance, abs=1e-10)

    def test_closed_form_identity(self, rng):
        for n_s, n_b in [(2, 1), (2, 3), (3, 2), (4, 3)]:
            u, g = random_instance(rng, n_s, n_b)
            rep = frob_distance(u, g)
            assert rep.distance == pytest.approx(
                np.sqrt(1 - rep.gamma_trace_norm / (n_s * n_b)), abs=1e-12
            )
            assert is_unitary(rep.phi_opt, 1e-10)

    def test_closed_form_identity_near_zero(self, rng):
        # squared form: the square-root form is cancellation-limited near d = 0
        g, phi = haar_random_unitary(3, rng), haar_random_unitary(2, rng)
        u = BipartiteUnitary(np.kron(g, phi), 3, 2)
        rep = frob_distance(u, g)
        assert rep.distance**2 == pytest.approx(1 - rep.gamma_trace_norm / 6, abs=1e-12)

    def test_vanishing_gamma(self):
        x = np.array([[0, 1], [1, 0]])
        phi = haar_random_unitary(2, seed=1)
        u = BipartiteUnitary(np.kron(x, phi), 2, 2)
        rep = frob_distance(u, np.eye(2))
        assert rep.gamma_trace_norm == pytest.approx(0, abs=1e-15)
        assert rep.distance == pytest.approx(1.0)
        np.testing.assert_array_equal(rep.phi_opt, np.eye(2))

    def test_range_and_certificates(self):
        gen = np.random.default_rng(11)
        for _ in range(1000):
            n_s, n_b = int(gen.integers(2, 5)), int(gen.integers(1, 4))
            u, g = random_instance(gen, n_s, n_b, (SF, BF)[gen.integers(2)])
            rep = frob_distance(u, g)
            assert 0.0 <= rep.distance <= 1.0
            gm = rep.gamma.gamma
            assert np.trace(gm @ rep.phi_opt.conj().T).real == pytest.approx(
                rep.gamma_trace_norm, abs=1e-10
            )
            assert spectral_norm(gm) <= n_s + 1e-8

    def test_certificate_against_samples(self, rng):
        u, g = random_instance(rng, 3, 3)
        rep = frob_distance(u, g)
        gm = rep.gamma.gamma
        for _ in range(1000):
            phi = haar_random_unitary(3, rng)
            assert np.trace(gm @ phi.conj().T).real <= rep.gamma_trace_norm + 1e-10

    def test_global_phase_invariance(self, rng):
        u, g = random_instance(rng, 3, 2)
        for alpha in (0.3, 1.7, np.pi):
            v = BipartiteUnitary(np.exp(1j * alpha) * u.matrix, 3, 2)
            assert frob_distance(v, g).distance == pytest.approx(frob_distance(u, g).distance, abs=1e-12)

    def test_ordering_coherence(self, rng):
        a, b = haar_random_unitary(3, rng), haar_random_unitary(2, rng)
        g = haar_random_unitary(3, rng)
        d_sf = frob_distance(BipartiteUnitary(np.kron(a, b), 3, 2, SF), g).distance
        d_bf = frob_distance(BipartiteUnitary(np.kron(b, a), 3, 2, BF), g).distance
        assert d_sf == pytest.approx(d_bf, abs=1e-10)

    def test_ordering_coherence_entangled(self, rng):
        u, g = random_instance(rng, 2, 3)
        assert frob_distance(u.reordered(), g).distance == pytest.approx(
            frob_distance(u, g).distance, abs=1e-12
        )


class TestExactTensor:
    def test_same_gate(self, rng):
        g = haar_random_unitary(3, rng)
        assert frob_distance_exact_tensor(g, g) == pytest.approx(0, abs=1e-14)

    @pytest.mark.parametrize("phase", [0.1, 2.0, -2.9])
    def test_global_phase(self, rng, phase):
        g = haar_random_unitary(3, rng)
        assert frob_distance_exact_tensor(np.exp(1j * phase) * g, g) == pytest.approx(0, abs=1e-14)

    def test_matches_general_path(self, rng):
        for n_s, n_b in [(2, 2), (3, 2), (4, 3)]:
            u_s, g, u_b = (haar_random_unitary(n, rng) for n in (n_s, n_s, n_b))
            general = frob_distance(BipartiteUnitary(np.kron(u_s, u_b), n_s, n_b), g).distance
            assert frob_distance_exact_tensor(u_s, g) == pytest.approx(general, abs=1e-10)

    def test_closed_form(self, rng):
        u_s, g = haar_random_unitary(4, rng), haar_random_unitary(4, rng)
        expected = np.sqrt(1 - abs(np.trace(g.conj().T @ u_s)) / 4)
        assert frob_distance_exact_tensor(u_s, g) == pytest.approx(expected, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            frob_distance_exact_tensor(np.eye(2), np.eye(3))
