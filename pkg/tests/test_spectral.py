import numpy as np
import pytest
from scipy.linalg import expm

from helpers import random_hermitian, random_instance, random_matrix
from propdist.config import SolverConfig
from propdist.frobenius import BipartiteUnitary, embed, frob_distance
from propdist.matcore import haar_random_unitary, is_unitary, spectral_norm
from propdist.spectral import (
    project_contraction,
    relaxed_objective,
    relaxed_subgradient,
    solve_relaxed_phi,
    spec_distance,
    spec_objective,
)


def numeric_gradient(u, g, phi, h=1e-6):
    """Central differences along each real and imaginary coordinate."""
    out = np.zeros_like(phi)
    for idx in np.ndindex(phi.shape):
        for unit in (1.0, 1j):
            e = np.zeros_like(phi)
            e[idx] = unit
            d = (relaxed_objective(u, g, phi + h * e) - relaxed_objective(u, g, phi - h * e)) / (2 * h)
            out[idx] += d * unit
    return out


def disk_grid(n_r=100, n_t=100):
    r = np.sqrt(np.linspace(0, 1, n_r))
    t = np.linspace(0, 2 * np.pi, n_t, endpoint=False)
    return (r[:, None] * np.exp(1j * t)[None, :]).ravel()


def near_product(rng, n_s, n_b, eps):
    g, phi = haar_random_unitary(n_s, rng), haar_random_unitary(n_b, rng)
    h = random_hermitian(n_s * n_b, rng)
    h /= spectral_norm(h)
    return BipartiteUnitary(np.kron(g, phi) @ expm(1j * eps * h), n_s, n_b), g


class TestProjection:
    def test_contraction_unchanged(self, rng):
        m = random_matrix((3, 3), rng)
        m /= 2 * spectral_norm(m)
        np.testing.assert_allclose(project_contraction(m), m, atol=1e-14)

    def test_clips(self, rng):
        m = 5 * random_matrix((4, 4), rng)
        p = project_contraction(m)
        assert spectral_norm(p) <= 1 + 1e-12
        np.testing.assert_allclose(project_contraction(p), p, atol=1e-12)

    def test_unitary_is_fixed(self, rng):
        q = haar_random_unitary(3, rng)
        np.testing.assert_allclose(project_contraction(q), q, atol=1e-12)


class TestSubgradient:
    def test_matches_central_differences(self):
        gen = np.random.default_rng(31)
        checked = 0
        while checked < 20:
            n_s, n_b = int(gen.integers(2, 4)), int(gen.integers(1, 4))
            u, g = random_instance(gen, n_s, n_b, ("system_first", "bath_first")[checked % 2])
            phi = project_contraction(random_matrix((n_b, n_b), gen))
            value, grad, gap = relaxed_subgradient(u, g, phi)
            if gap <= 1e-6:
                continue
            assert value == pytest.approx(relaxed_objective(u, g, phi))
            fd = numeric_gradient(u, g, phi)
            assert np.linalg.norm(fd - grad) <= 1e-5 * np.linalg.norm(grad)
            checked += 1

    def test_value_is_top_singular(self, rng):
        u, g = random_instance(rng, 2, 2)
        phi = haar_random_unitary(2, rng)
        value, _, _ = relaxed_subgradient(u, g, phi)
        s = np.linalg.svd(u.matrix - np.kron(g, phi), compute_uv=False)
        assert value == pytest.approx(s[0])


class TestRelaxedSolver:
    @pytest.mark.parametrize("ordering", ["system_first", "bath_first"])
    def test_product_reaches_zero(self, rng, ordering):
        g, phi = haar_random_unitary(2, rng), haar_random_unitary(3, rng)
        u = BipartiteUnitary(embed(g, phi, ordering), 2, 3, ordering)
        sol = solve_relaxed_phi(u, g)
        assert sol.objective <= 1e-6
        np.testing.assert_allclose(sol.phi_bar, phi, atol=1e-6)

    def test_single_bath_level_against_disk_grid(self):
        gen = np.random.default_rng(5)
        pts = disk_grid()
        for _ in range(10):
            n_s = int(gen.integers(2, 4))
            u, g = random_instance(gen, n_s, 1)
            grid = min(np.linalg.norm(u.matrix - p * g, 2) for p in pts)
            sol = solve_relaxed_phi(u, g)
            assert sol.objective <= grid + 1e-6
            # grid spacing is about 0.06, so the grid cannot be much worse
            assert sol.objective >= grid - 0.05
            assert abs(sol.phi_bar[0, 0]) <= 1 + 1e-10

    def test_feasible_and_budget(self, rng):
        u, g = random_instance(rng, 3, 3)
        sol = solve_relaxed_phi(u, g, SolverConfig(max_iters=7, restarts=0))
        assert not sol.converged
        assert sol.iterations == 7
        assert spectral_norm(sol.phi_bar) <= 1 + 1e-10

    def test_deterministic(self, rng):
        u, g = random_instance(rng, 2, 2)
        a, b = solve_relaxed_phi(u, g), solve_relaxed_phi(u, g)
        np.testing.assert_array_equal(a.phi_bar, b.phi_bar)


class TestSpecDistance:
    @pytest.mark.parametrize("n_b", [1, 2, 3])
    def test_exact_product(self, rng, n_b):
        g, phi = haar_random_unitary(2, rng), haar_random_unitary(n_b, rng)
        rep = spec_distance(BipartiteUnitary(np.kron(g, phi), 2, n_b), g)
        assert rep.lower <= 1e-6
        assert rep.upper <= 1e-6

    def test_report_invariants(self):
        gen = np.random.default_rng(17)
        for _ in range(10):
            n_s, n_b = int(gen.integers(2, 4)), int(gen.integers(1, 4))
            u, g = random_instance(gen, n_s, n_b)
            rep = spec_distance(u, g)
            assert rep.lower <= rep.upper + 1e-9
            assert is_unitary(rep.phi_hat, 1e-10)
            assert spectral_norm(rep.phi_bar) <= 1 + 1e-10
            assert rep.upper == pytest.approx(spec_objective(u, g, rep.phi_hat), abs=1e-10)
            assert rep.lower == pytest.approx(spec_objective(u, g, rep.phi_bar), abs=1e-10)
            np.testing.assert_allclose(
                rep.phi_bar_singulars, np.linalg.svd(rep.phi_bar, compute_uv=False), atol=1e-12
            )

    def test_lower_below_sampled_unitaries(self, rng):
        u, g = random_instance(rng, 2, 3)
        rep = spec_distance(u, g)
        samples = [spec_objective(u, g, haar_random_unitary(3, rng)) for _ in range(1000)]
        assert rep.lower <= min(samples) + 1e-9

    def test_range(self):
        # Phi = 0 is feasible for the relaxation; the rounded bound is at most sqrt(2)
        gen = np.random.default_rng(23)
        for _ in range(10):
            u, g = random_instance(gen, 2, 2)
            rep = spec_distance(u, g)
            assert 0 <= rep.lower <= 1 / np.sqrt(2) + 1e-9
            assert rep.upper <= np.sqrt(2) + 1e-9

    def test_distance_can_exceed_one(self):
        w = np.exp(2j * np.pi / 3)
        u = BipartiteUnitary(np.diag([1, w, w * w]), 3, 1)
        rep = spec_distance(u, np.eye(3))
        # best unit phase sits on a root: the other two are sqrt(3) away
        grid = np.exp(1j * np.linspace(0, 2 * np.pi, 3001))
        d2 = min(spec_objective(u, np.eye(3), np.array([[p]])) for p in grid)
        assert d2 == pytest.approx(np.sqrt(3 / 2), abs=1e-12)
        assert rep.upper >= d2 - 1e-12
        assert rep.lower == pytest.approx(1 / np.sqrt(2), abs=1e-12)

    def test_near_product_gap(self):
        gen = np.random.default_rng(41)
        for _ in range(10):
            u, g = near_product(gen, 2, int(gen.integers(1, 4)), 0.01)
            rep = spec_distance(u, g)
            assert rep.phi_bar_singulars.min() >= 0.99
            assert -1e-12 <= rep.gap <= 0.05

    def test_cross_norm_sandwich(self):
        gen = np.random.default_rng(43)
        for _ in range(100):
            n_s, n_b = int(gen.integers(2, 4)), int(gen.integers(1, 4))
            u, g = random_instance(gen, n_s, n_b)
            rep = spec_distance(u, g, SolverConfig(max_iters=300, restarts=0))
            m = u.matrix - np.kron(g, rep.phi_hat)
            two, fro = spectral_norm(m), np.linalg.norm(m)
            assert two <= fro + 1e-12
            assert fro <= np.sqrt(n_s * n_b) * two + 1e-12
            assert frob_distance(u, g).distance <= rep.upper + 1e-12
