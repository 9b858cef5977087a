from itertools import product

import numpy as np
import pytest

from blochkit.errors import InconsistentSites, NeedDirections, TooLarge
from blochkit.geometry import AsymptoticParams
from blochkit.oracle import solve
from blochkit.potential import FourierPotential
from blochkit.resblock import (assemble_C, build_sites, r_lipschitz_probe, res_eigenvalues,
                               resonance_block, weyl_bound)

TWO_BEAM_X = np.array([0.55, 0.3])
P0 = AsymptoticParams(rho=1.0, block_a_radius=0.0)


@pytest.fixture
def beam(Z2):
    return FourierPotential.hermitian(Z2, {(1, 0): 0.1})[0]


def closed_form(C):
    m = 0.5 * (C[0, 0] + C[1, 1])
    r = np.sqrt((0.5 * (C[0, 0] - C[1, 1])) ** 2 + abs(C[0, 1]) ** 2)
    return np.array([m - r, m + r])


class TestTwoBeam:
    def test_sites(self, Z2):
        h = build_sites(TWO_BEAM_X, [(1, 0)], P0, Z2, b_vectors=[(0, 0), (-1, 0)])
        assert h.tolist() == [[0, 0], [-1, 0]]

    def test_matrix(self, beam):
        blk = resonance_block(TWO_BEAM_X, [(1, 0)], beam, P0, b_vectors=[(0, 0), (-1, 0)])
        assert np.allclose(blk.matrix, [[0.3925, 0.1], [0.1, 0.2925]], atol=1e-14)
        assert np.max(np.abs(blk.matrix - blk.matrix.conj().T)) < 1e-14
        assert blk.self_index == 0 and np.allclose(blk.sites[0], TWO_BEAM_X)

    def test_eigenvalues(self, beam):
        blk = resonance_block(TWO_BEAM_X, [(1, 0)], beam, P0, b_vectors=[(0, 0), (-1, 0)])
        assert blk.eigenvalues == pytest.approx(closed_form(blk.matrix.real), abs=1e-14)
        assert blk.eigenvalues == pytest.approx([0.23070, 0.45430], abs=1e-5)


class TestSites:
    def test_brute_force_count(self, Z2):
        P = AsymptoticParams(rho=10.0, block_a_radius=1.5, block_b_radius=3.2)
        x = np.array([7.1, -0.5])
        h = build_sites(x, [(0, 1)], P, Z2)
        ref = set()
        for n in range(-4, 5):
            b = np.array([0, n])
            if np.linalg.norm(b) >= 3.2:
                continue
            for a in product(range(-2, 3), repeat=2):
                if np.linalg.norm(a) < 1.5:
                    ref.add(tuple(b + np.array(a)))
        assert set(map(tuple, h)) == ref and len(h) == len(ref)
        assert tuple(h[0]) == (0, 0)
        r = np.linalg.norm(h, axis=1)
        assert np.all(np.diff(r) >= -1e-12)

    def test_errors(self, Z2):
        with pytest.raises(NeedDirections):
            build_sites([7.0, 0.0], [], P0, Z2)
        with pytest.raises(NeedDirections):
            build_sites([7.0, 0.0], [(1, 0), (2, 0)], P0, Z2)
        big = AsymptoticParams(rho=10.0, block_a_radius=30.0, site_cap=100)
        with pytest.raises(TooLarge):
            build_sites([7.0, 0.0], [(1, 0)], big, Z2)

    def test_inconsistent(self, beam):
        with pytest.raises(InconsistentSites):
            assemble_C(np.array([[0.0, 0.0], [0.5, 0.0]]), beam)


class TestSpectrum:
    def test_zero_potential_diagonal(self, zero_q):
        P = AsymptoticParams(rho=10.0, block_a_radius=1.5, block_b_radius=2.5)
        x = np.array([7.0, -0.5])
        blk = resonance_block(x, [(0, 1)], zero_q, P)
        diag = np.sort(np.einsum("ij,ij->i", blk.sites, blk.sites))
        assert blk.eigenvalues == pytest.approx(diag, abs=1e-10)

    def test_permutation_invariant(self, two_mode):
        P = AsymptoticParams(rho=10.0, block_a_radius=1.5, block_b_radius=2.5)
        x = np.array([7.0, -0.5])
        blk = resonance_block(x, [(0, 1)], two_mode, P)
        perm = np.random.default_rng(0).permutation(blk.size)
        C = assemble_C(blk.sites[perm], two_mode)
        assert res_eigenvalues(C)[0] == pytest.approx(blk.eigenvalues, abs=1e-10)

    def test_interlacing(self, two_mode):
        P = AsymptoticParams(rho=10.0, block_a_radius=1.5, block_b_radius=2.5)
        blk = resonance_block(np.array([7.0, -0.5]), [(0, 1)], two_mode, P)
        C = blk.matrix
        w_full = res_eigenvalues(C)[0]
        w_sub = res_eigenvalues(C[:-1, :-1])[0]
        assert np.all(w_full[:-1] <= w_sub + 1e-12) and np.all(w_sub <= w_full[1:] + 1e-12)

    def test_weyl(self, two_mode):
        P = AsymptoticParams(rho=10.0, block_a_radius=1.5, block_b_radius=2.5)
        x = np.array([7.0, -0.5])
        w0 = resonance_block(x, [(0, 1)], two_mode.scaled(0.0), P).eigenvalues
        for eps in (0.3, 1.0):
            w = resonance_block(x, [(0, 1)], two_mode.scaled(eps), P).eigenvalues
            assert np.max(np.abs(w - w0)) <= eps * two_mode.sup_bound + 1e-12

    def test_oracle_agreement(self, beam):
        x = np.array([-0.5, 7.3])
        P = AsymptoticParams(rho=10.0, block_a_radius=0.0)
        blk = resonance_block(x, [(1, 0)], beam, P, b_vectors=[(0, 0), (1, 0)])
        sp = solve(x, beam, (x @ x - 1, x @ x + 1), shift=x @ x)
        gap = 2.0  # distance to the next free levels x +- (2, 0)
        for lam in blk.eigenvalues:
            assert np.min(np.abs(sp.eigenvalues - lam)) < 10 * 0.1 ** 2 / gap


class TestLipschitz:
    def test_identity(self, beam):
        lhs, rhs, ok = r_lipschitz_probe([(1, 0)], P0, TWO_BEAM_X, TWO_BEAM_X, beam,
                                         b_vectors=[(0, 0), (-1, 0)])
        assert lhs == 0 and rhs == 0 and ok

    def test_perturbed(self, beam):
        P = AsymptoticParams(rho=10.0, block_a_radius=0.0)
        x = np.array([-0.5, 7.3])
        d = np.random.default_rng(2).normal(size=2)
        xp = x + 1e-3 * d / np.linalg.norm(d)
        lhs, rhs, ok = r_lipschitz_probe([(1, 0)], P, x, xp, beam, b_vectors=[(0, 0), (1, 0)])
        assert ok and lhs < rhs
        offs = np.array([[0, 0], [1, 0]])
        assert lhs <= weyl_bound(offs, beam.gamma, x, xp) + 1e-15

    def test_zero_potential(self, zero_q):
        P = AsymptoticParams(rho=10.0, block_a_radius=0.0)
        x = np.array([-0.5, 7.3])
        lhs, rhs, ok = r_lipschitz_probe([(1, 0)], P, x, x + [1e-3, 0], zero_q,
                                         b_vectors=[(0, 0), (1, 0)])
        assert ok
