import numpy as np
import pytest
from sklearn.base import clone

from dde.engine import DdeConfig, run_dde
from dde.errors import InvalidArgumentError
from dde.estimators import CopyExtrapolator, DDEEstimator, VarianceShift
from dde.grid import TimeGrid, compute_grid_exact


@pytest.fixture(scope="module")
def corr(small_instance):
    inst = small_instance
    return compute_grid_exact(inst.initial, inst.spec, inst.O, TimeGrid(8.0, 0.5))


class TestDDEEstimator:
    def test_matches_run_dde(self, corr):
        est = DDEEstimator(n_copies=2, n_mc=2000, seed=5).fit(corr)
        ref = run_dde(corr, DdeConfig(n_copies=2, n_mc=2000, seed=5))
        assert est.value_ == ref.value

    def test_params_and_clone(self):
        est = DDEEstimator(n_copies=3, shift=0.5)
        assert est.get_params()["n_copies"] == 3
        assert clone(est).get_params() == est.get_params()
        assert est._config().shift_mode == "fixed"

    def test_rejects_non_grids(self):
        with pytest.raises(InvalidArgumentError):
            DDEEstimator().fit(np.zeros((3, 3)))


class TestVarianceShift:
    def test_fit_transform(self, corr):
        vs = VarianceShift(mode="origin")
        out = vs.fit_transform(corr)
        z = corr.grid.zero_index
        assert vs.c_ == pytest.approx(corr.A[z, z].real)
        np.testing.assert_allclose(out.A, corr.A - vs.c_ * corr.B)


class TestCopyExtrapolator:
    def test_fit_predict(self):
        n = np.arange(1, 6)
        y = 1.0 - 0.5 * 0.3 ** n
        model = CopyExtrapolator().fit(n, y)
        assert model.limit_ == pytest.approx(1.0, abs=1e-8)
        np.testing.assert_allclose(model.predict(n), y, atol=1e-8)
        assert model.score(n, y) == pytest.approx(1.0)
