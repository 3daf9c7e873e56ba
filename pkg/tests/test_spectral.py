import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import projections_for, realization
from oracles import dense_X1, full_measure, power_moments
from polyspec.errors import ArgumentError, NumericalError, SpecMismatchError
from polyspec.lattice import LatticeSpec
from polyspec.polycrystal import realize_indicators, uniform_orientations
from polyspec.spectral import (
    Pairing,
    bin_weights,
    eig_block,
    ensemble_spectral_function,
    frame_vector,
    measure_atoms,
    moments,
    realization_measure,
    reduced_block,
)


def block_measure(ind, which=Pairing.X1_GAMMA, j=1, k=1):
    P = projections_for(ind.spec.d, ind.spec.L)
    eig = eig_block(reduced_block(ind, P, which), which)
    return eig, measure_atoms(eig, ind, j, k)


class TestReducedBlock:
    def test_uniform_is_gamma_block(self):
        spec = LatticeSpec(2, 4, 2)
        ind = realize_indicators(uniform_orientations(spec))
        P = projections_for(2, 4)
        B = reduced_block(ind, P, Pairing.X1_GAMMA)
        assert np.allclose(B, P.Gamma[: spec.N1, : spec.N1], atol=1e-15)
        B2 = reduced_block(ind, P, Pairing.X2_GAMMA)
        assert np.allclose(B2, P.Gamma[spec.N1:, spec.N1:], atol=1e-15)

    @pytest.mark.parametrize("which", list(Pairing))
    @pytest.mark.parametrize("d,L,Lc", [(2, 3, 1), (3, 2, 1)])
    def test_eigenvalues_in_unit_interval(self, which, d, L, Lc):
        ind = realization(d, L, Lc, seed=2)
        eig, _ = block_measure(ind, which)
        raw = np.linalg.eigvalsh(reduced_block(ind, projections_for(d, L), which))
        assert raw.min() > -1e-10 and raw.max() < 1 + 1e-10
        expected = ind.spec.N1 if which.indicator == 1 else ind.spec.N2
        assert eig.block_size == expected

    @pytest.mark.parametrize("d,L,Lc", [(2, 4, 2), (2, 6, 3), (3, 2, 1)])
    def test_full_eig_is_block_eig_plus_zeros(self, d, L, Lc):
        ind = realization(d, L, Lc, seed=5)
        P = projections_for(d, L)
        X1 = dense_X1(ind)
        full = np.sort(np.linalg.eigvalsh(X1 @ P.Gamma @ X1))
        eig, _ = block_measure(ind)
        expected = np.sort(np.concatenate([eig.lambdas, np.zeros(ind.spec.N - ind.spec.N1)]))
        assert np.max(np.abs(full - expected)) < 1e-10

    def test_spec_mismatch(self):
        with pytest.raises(SpecMismatchError):
            reduced_block(realization(2, 4, 2), projections_for(2, 3), Pairing.X1_GAMMA)


class TestEigBlock:
    def test_diagonal(self):
        eig = eig_block(np.diag([0.2, 0.7]))
        assert np.allclose(eig.lambdas, [0.2, 0.7])
        assert np.allclose(np.abs(eig.W1), np.eye(2))

    def test_reconstruction_and_orthonormality(self):
        ind = realization(2, 6, 2, seed=1)
        B = reduced_block(ind, projections_for(2, 6), Pairing.X1_GAMMA)
        eig = eig_block(B, Pairing.X1_GAMMA)
        W = eig.W1
        assert np.max(np.abs(W @ np.diag(eig.lambdas) @ W.T - B)) < 1e-10
        assert np.max(np.abs(W.T @ W - np.eye(W.shape[1]))) < 1e-10
        assert np.all(np.diff(eig.lambdas) >= 0)

    def test_rejects_asymmetric(self):
        with pytest.raises(NumericalError):
            eig_block(np.array([[0.5, 0.1], [0.0, 0.5]]))

    def test_rejects_out_of_range(self):
        with pytest.raises(NumericalError):
            eig_block(np.diag([-0.1, 0.5]))
        with pytest.raises(NumericalError):
            eig_block(np.diag([0.5, 1.5]))

    def test_clamps_roundoff(self):
        eig = eig_block(np.diag([-1e-12, 1 + 1e-12]))
        assert eig.lambdas.tolist() == [0.0, 1.0]


class TestMeasureAtoms:
    def test_uniform_crystal(self):
        ind = realize_indicators(uniform_orientations(LatticeSpec(2, 4, 2)))
        _, m11 = block_measure(ind, j=1, k=1)
        assert abs(m11.mass - 1.0) < 1e-12
        # the axis field e1 is constant, so all its weight sits on lambda = 0
        assert abs(m11.weights[m11.lambdas < 1e-10].sum() - 1.0) < 1e-12
        _, m22 = block_measure(ind, j=2, k=2)
        assert np.all(m22.weights == 0)

    @pytest.mark.parametrize("d,L,Lc", [(2, 6, 2), (3, 4, 2)])
    def test_sum_rule(self, d, L, Lc):
        ind = realization(d, L, Lc, seed=4)
        for k in range(1, d + 1):
            _, m = block_measure(ind, j=k, k=k)
            direct = np.mean(ind.X1_blocks()[:, k - 1, k - 1])
            assert abs(m.mass - direct) < 1e-10
            assert np.all(m.weights >= 0)
            _, m2 = block_measure(ind, Pairing.X2_GAMMA, k, k)
            assert abs(m2.mass - (1 - direct)) < 1e-10

    def test_mass_is_cos_squared(self):
        ind = realization(2, 6, 2, seed=8)
        _, m = block_measure(ind)
        theta = ind.orientation.angles[ind.spec.crystallite_of_site(), 0]
        assert abs(m.mass - np.mean(np.cos(theta) ** 2)) < 1e-10

    def test_jk_symmetry(self):
        ind = realization(3, 4, 2, seed=6)
        eig, m12 = block_measure(ind, j=1, k=2)
        m21 = measure_atoms(eig, ind, 2, 1)
        assert np.array_equal(m12.weights, m21.weights)

    def test_frame_vector_bounds(self):
        ind = realization(2, 4, 2)
        with pytest.raises(ArgumentError):
            frame_vector(ind, Pairing.X1_GAMMA, 3)

    def test_requires_pairing(self):
        ind = realization(2, 4, 2)
        eig = eig_block(reduced_block(ind, projections_for(2, 4), "X1Gamma"))
        with pytest.raises(ArgumentError):
            measure_atoms(eig, ind, 1, 1)

    def test_provenance_is_sample_id(self):
        _, m = block_measure(realization(2, 4, 2, sample_id=7))
        assert m.provenance == 7


class TestAgainstFullMatrix:
    @pytest.mark.parametrize("d,L,Lc", [(2, 6, 2), (2, 4, 1), (3, 3, 1)])
    def test_moments_match_full_eig(self, d, L, Lc):
        ind = realization(d, L, Lc, seed=12)
        P = projections_for(d, L)
        for j, k in [(1, 1), (1, 2), (2, 2)]:
            _, m = block_measure(ind, j=j, k=k)
            lam, w = full_measure(ind, P.Gamma, j, k)
            full = (lam[None, :] ** np.arange(11)[:, None]) @ w
            assert np.max(np.abs(moments(m, 10) - full)) < 1e-10

    @pytest.mark.parametrize("d,L,Lc", [(2, 6, 3), (3, 2, 1)])
    def test_moments_match_matrix_powers(self, d, L, Lc):
        ind = realization(d, L, Lc, seed=13)
        P = projections_for(d, L)
        _, m = block_measure(ind, j=1, k=2)
        assert np.max(np.abs(moments(m, 6) - power_moments(ind, P.Gamma, 1, 2, 6))) < 1e-10

    def test_discarded_block_carries_no_mass(self):
        # eigenvectors R^T [0; e_i] of the complementary block
        ind = realization(2, 4, 2, seed=2)
        P = projections_for(2, 4)
        n1, N = ind.spec.N1, ind.spec.N
        X1 = dense_X1(ind)
        Q = ind.rotation_matrix().T.toarray()[:, n1:]
        assert np.max(np.abs(X1 @ P.Gamma @ X1 @ Q)) < 1e-12
        e1 = np.r_[np.ones(n1), np.zeros(N - n1)]
        w = (Q.T @ e1) * (Q.T @ (X1 @ e1)) / n1
        assert np.max(np.abs(w)) < 1e-12


class TestMoments:
    def test_zeroth_is_mass(self):
        _, m = block_measure(realization(2, 4, 2))
        assert abs(moments(m, 0)[0] - m.mass) < 1e-14

    def test_nonincreasing(self):
        _, m = block_measure(realization(2, 6, 2, seed=3))
        mu = moments(m, 12)
        assert np.all(np.diff(mu) <= 1e-15)

    def test_negative_order(self):
        _, m = block_measure(realization(2, 4, 2))
        with pytest.raises(ArgumentError):
            moments(m, -1)


class TestBinning:
    def test_single_bin_full_mass(self):
        spec = LatticeSpec(2, 4, 2)
        sf = ensemble_spectral_function(spec, 1, bins=1, projections=projections_for(2, 4))
        assert sf.values.shape == (1,)
        assert abs(sf.values[0] - sf.mass) < 1e-14

    def test_edges_convention(self):
        w = bin_weights([0.0, 0.25, 0.5, 1.0], [1, 2, 3, 4], 4)
        assert w.tolist() == [1, 2, 3, 4]
        assert bin_weights([0.2499999999], [1.0], 4).tolist() == [1, 0, 0, 0]

    def test_sum_rule_and_outputs(self, tmp_path):
        spec = LatticeSpec(2, 6, 2)
        sf = ensemble_spectral_function(spec, 6, bins=20, seed=3, projections=projections_for(2, 6))
        masses = [realization_measure(projections_for(2, 6), spec, 3, i).mass for i in range(6)]
        assert abs(sf.values.sum() - np.mean(masses)) < 1e-10
        assert abs(sf.mass - np.mean(masses)) < 1e-12
        sf.to_csv(tmp_path / "sf.csv")
        rows = list(csv.reader(open(tmp_path / "sf.csv")))
        assert rows[0] == ["bin_left", "bin_right", "value"] and len(rows) == 21
        rec = json.loads(sf.to_json())
        assert rec["schema"] == 1 and rec["samples"] == 6 and rec["metadata"]["seed"] == 3

    def test_parallel_is_bitwise_equal(self):
        spec = LatticeSpec(2, 6, 2)
        P = projections_for(2, 6)
        a = ensemble_spectral_function(spec, 8, bins=10, seed=1, projections=P, workers=1)
        b = ensemble_spectral_function(spec, 8, bins=10, seed=1, projections=P, workers=2)
        assert a.values.tobytes() == b.values.tobytes()

    def test_measure_csv(self, tmp_path):
        _, m = block_measure(realization(2, 4, 2))
        m.to_csv(tmp_path / "m.csv")
        rows = list(csv.reader(open(tmp_path / "m.csv")))
        assert rows[0] == ["lambda", "weight"] and len(rows) == 17
        assert float(rows[1][1]) == m.weights[0]


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), d=st.sampled_from([2, 3]))
def test_sum_rule_property(seed, d):
    ind = realization(d, 4, 2, seed=seed)
    for which in (Pairing.X1_GAMMA, Pairing.X1_UPSILON):
        _, m = block_measure(ind, which)
        assert abs(m.mass - np.mean(ind.X1_blocks()[:, 0, 0])) < 1e-10
        assert m.lambdas.min() >= 0 and m.lambdas.max() <= 1


@pytest.mark.parametrize("d,L,Lc", [(2, 12, 3), (3, 6, 2)])
def test_block_speedup_report(d, L, Lc):
    import time
    ind = realization(d, L, Lc, seed=5)
    P = projections_for(d, L)
    t0 = time.perf_counter()
    np.linalg.eigh(reduced_block(ind, P, Pairing.X1_GAMMA))
    t_block = time.perf_counter() - t0
    X1 = dense_X1(ind)
    t0 = time.perf_counter()
    np.linalg.eigh(X1 @ P.Gamma @ X1)
    t_full = time.perf_counter() - t0
    print(f"d={d} L={L}: block eigh {t_block:.3f} s, full eigh {t_full:.3f} s, "
          f"speedup {t_full / t_block:.1f}x")
    assert t_block > 0 and t_full > 0
