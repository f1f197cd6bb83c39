import numpy as np
import pytest
from sklearn.base import clone

from gtmlab.estimators import BandIsolator, SNSDimensionEstimator, TraceMapTransformer


def test_params_round_trip():
    est = TraceMapTransformer(m=3, lam="0.2", level=2)
    assert est.get_params() == {"m": 3, "lam": "0.2", "level": 2, "precision": None}
    est.set_params(level=1)
    assert clone(est).level == 1


def test_transformer():
    tr = TraceMapTransformer(m=2, lam="1", level=1).fit()
    out = tr.transform(np.array([[1.0], [0.0]]))
    assert out.shape == (2, 4)
    # x_1 at t = 1 for m = 2, lambda = 1 is -2 (two-trace formula at the first level)
    assert out[0, 0] == pytest.approx(-2.0)
    assert list(tr.get_feature_names_out()) == ["x_1", "y_1", "dx_1", "dy_1"]
    with pytest.raises(ValueError):
        tr.transform(np.zeros((2, 2)))


def test_band_isolator():
    clf = BandIsolator(m=2, lam="0.1", level=2).fit()
    assert clf.n_bands_ == 16 and clf.bands_.shape == (16, 2)
    mids = clf.bands_.mean(axis=1)
    assert clf.predict(mids).all()
    assert not clf.predict(np.array([10.0, -10.0])).any()


def test_sns_estimator():
    est = SNSDimensionEstimator(m=2, lam="1", depth=4).fit()
    assert est.tree_.counts() == [1, 2, 4, 8]
    assert est.dimension_ >= est.bound_
    assert est.report_.empirical["branching"] == [2]
