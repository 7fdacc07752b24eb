"""Shared random-instance generators for the test suite."""

import numpy as np

from propdist.frobenius import BipartiteUnitary
from propdist.matcore import haar_random_unitary

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def random_hermitian(n, rng):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (a + a.conj().T)


def random_matrix(shape, rng):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_instance(rng, n_s, n_b, ordering="system_first"):
    """Haar-random joint unitary and gate."""
    u = BipartiteUnitary(haar_random_unitary(n_s * n_b, rng), n_s, n_b, ordering)
    g = haar_random_unitary(n_s, rng)
    return u, g


def random_density(n, rng, rank=None):
    rank = rank or n
    a = random_matrix((n, rank), rng)
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def reduced_output(u, psi_b, psi_s):
    """Bath-traced output state from a full state-vector simulation."""
    n_s, n_b = u.n_s, u.n_b
    if u.ordering.value == "bath_first":
        out = (u.matrix @ np.kron(psi_b, psi_s)).reshape(n_b, n_s)
        return np.einsum("ba,bc->ac", out, out.conj())
    out = (u.matrix @ np.kron(psi_s, psi_b)).reshape(n_s, n_b)
    return out @ out.conj().T


PAULIS = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]])


def bloch_grid_min(products, points=100_000, zooms=12):
    """Minimum of ``sum_k |tr(A_k rho)|^2`` over qubit densities by grid search.

    A cubic lattice of about ``points`` Bloch vectors in the unit ball is
    refined repeatedly around the incumbent; lattice points outside the ball
    are pulled onto the sphere.
    """
    a = np.asarray(products)
    const = np.trace(a, axis1=1, axis2=2) / 2
    lin = np.einsum("kab,pba->kp", a, PAULIS) / 2

    def q(r):
        return np.sum(np.abs(const[None] + r @ lin.T) ** 2, axis=1)

    side = int(round((points / (np.pi / 6)) ** (1 / 3)))
    axis = np.linspace(-1, 1, side)
    r = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), -1).reshape(-1, 3)
    r = r[np.linalg.norm(r, axis=1) <= 1]
    vals = q(r)
    best = r[np.argmin(vals)]
    best_val = vals.min()
    h = axis[1] - axis[0]
    fine = np.linspace(-2, 2, 21)
    for _ in range(zooms):
        cand = best + h * np.stack(np.meshgrid(fine, fine, fine, indexing="ij"), -1).reshape(-1, 3)
        norms = np.linalg.norm(cand, axis=1)
        cand[norms > 1] /= norms[norms > 1, None]
        vals = q(cand)
        if vals.min() < best_val:
            best, best_val = cand[np.argmin(vals)], vals.min()
        h /= 5
    return float(best_val), best


def bloch_density(r):
    return 0.5 * (np.eye(2) + np.einsum("p,pab->ab", r, PAULIS))
