import numpy as np
import pytest

from dde.dense import NoiseModel, diagonalize, evolve_exact
from dde.errors import InvalidArgumentError
from dde.grid import (
    CorrelatorSet,
    TimeGrid,
    compute_grid_exact,
    compute_grid_trotter,
    count_grid_rotations,
    extrapolate_trotter,
    hermitian_fill,
    inject_shot_noise,
)
from dde.hamiltonians import build_heisenberg, single_site
from dde.pauli import PauliSum


@pytest.fixture(scope="module")
def problem():
    H = build_heisenberg(4, J=0.5, h=1.0, seed=2)
    spec = diagonalize(H)
    psi = spec.eigenvectors[:, [0, 3, 5]] @ np.array([0.8, 0.5, 0.33])
    psi /= np.linalg.norm(psi)
    O = single_site(4, 1, "Z") + PauliSum(4, [(0.4, "XXII")])
    return H, spec, psi, O


class TestTimeGrid:
    def test_points(self):
        g = TimeGrid(1.0, 0.25)
        assert g.n_times == 9
        np.testing.assert_allclose(g.times, np.linspace(-1, 1, 9))
        assert g.times[g.zero_index] == 0.0
        assert list(g.steps[:2]) == [-4, -3]

    @pytest.mark.parametrize("T,dt", [(1.0, 0.3), (1.0, 0.0), (-1.0, 0.5)])
    def test_invalid(self, T, dt):
        with pytest.raises(InvalidArgumentError):
            TimeGrid(T, dt)

    def test_nyquist(self, problem):
        spec = problem[1]
        spread = spec.energies[-1] - spec.energies[0]
        assert TimeGrid(10 * np.pi / spread, np.pi / spread).nyquist_ok(spec)
        assert not TimeGrid(20 * np.pi / spread, 2 * np.pi / spread).nyquist_ok(spec)


class TestExactGrid:
    def test_matches_brute_force(self, problem):
        H, spec, psi, O = problem
        g = TimeGrid(1.0, 0.25)
        states = evolve_exact(psi, spec, g.times)
        for dedup in (True, False):
            corr = compute_grid_exact(psi, spec, O, g, dedup=dedup)
            np.testing.assert_allclose(corr.B, states.conj().T @ states, atol=1e-12)
            np.testing.assert_allclose(corr.A, states.conj().T @ O.apply(states), atol=1e-12)
            assert corr.hermitian_error() == 0.0
            assert np.all(np.diag(corr.B) == 1.0)

    def test_commuting_observable_is_toeplitz(self, problem):
        H, spec, psi, _ = problem
        g = TimeGrid(1.0, 0.5)
        corr = compute_grid_exact(psi, spec, H, g)
        n = g.n_times
        for k in range(1, n):
            np.testing.assert_allclose(np.diag(corr.A, k), corr.A[0, k], atol=1e-12)

    def test_provenance(self, problem):
        H, spec, psi, O = problem
        corr = compute_grid_exact(psi, spec, O, TimeGrid(0.5, 0.5), seed=4)
        assert corr.backend == "exact" and corr.provenance["seed"] == 4

    def test_shape_check(self):
        with pytest.raises(InvalidArgumentError):
            CorrelatorSet(TimeGrid(0.5, 0.5), np.zeros((2, 2)), np.zeros((3, 3)))


class TestTrotterGrid:
    def test_converges_to_exact(self, problem):
        H, spec, psi, O = problem
        g = TimeGrid(1.0, 0.5)
        exact = compute_grid_exact(psi, spec, O, g)
        errs = [np.max(np.abs(compute_grid_trotter(psi, H, O, g, M).A - exact.A)) for M in (1, 2, 4)]
        assert errs[0] > errs[1] > errs[2]

    def test_dedup_agrees(self, problem):
        H, spec, psi, O = problem
        g = TimeGrid(1.0, 0.5)
        a = compute_grid_trotter(psi, H, O + H, g, 2, dedup=True)
        b = compute_grid_trotter(psi, H, O + H, g, 2, dedup=False)
        # the deduplicated grid uses circuits from the origin, equal up to Trotter error
        assert np.max(np.abs(a.A - b.A)) < 0.2
        assert a.provenance["M"] == 2

    def test_noisy_grid_is_seeded_and_hermitian(self, problem):
        H, spec, psi, O = problem
        g = TimeGrid(0.5, 0.5)
        kw = dict(noise=NoiseModel(0.02), seed=9, trajectories=4)
        a = compute_grid_trotter(psi, H, O, g, 1, **kw)
        b = compute_grid_trotter(psi, H, O, g, 1, **kw)
        np.testing.assert_array_equal(a.A, b.A)
        assert a.hermitian_error() == 0.0
        assert a.provenance["rotations"] > 0

    def test_rotation_budget(self, problem):
        H = problem[0]
        assert count_grid_rotations(TimeGrid(1.0, 0.5), H, 3) == 5 * H.n_terms * 3

    def test_extrapolation_reduces_error(self, problem):
        H, spec, psi, O = problem
        g = TimeGrid(1.0, 0.5)
        exact = compute_grid_exact(psi, spec, O, g)
        grids = [(M, compute_grid_trotter(psi, H, O, g, M)) for M in (2, 4, 8)]
        ext = extrapolate_trotter(grids)
        assert np.max(np.abs(ext.A - exact.A)) < np.max(np.abs(grids[-1][1].A - exact.A))
        assert "M" not in ext.provenance
        with pytest.raises(InvalidArgumentError):
            extrapolate_trotter(grids[:2])


class TestShotNoise:
    def test_statistics_and_structure(self, problem):
        H, spec, psi, O = problem
        corr = compute_grid_exact(psi, spec, O, TimeGrid(5.0, 0.5))
        noisy = inject_shot_noise(corr, 100, seed=1)
        assert noisy.hermitian_error() == 0.0
        assert np.all(np.diag(noisy.B) == 1.0)
        iu = np.triu_indices(corr.grid.n_times, 1)
        diff = (noisy.B - corr.B)[iu]
        assert np.std(diff.real) == pytest.approx(0.1, rel=0.15)
        again = inject_shot_noise(corr, 100, seed=1)
        np.testing.assert_array_equal(noisy.A, again.A)


def test_hermitian_fill():
    up = np.triu(np.arange(9).reshape(3, 3) + 1j)
    out = hermitian_fill(up)
    np.testing.assert_array_equal(out, out.conj().T)
