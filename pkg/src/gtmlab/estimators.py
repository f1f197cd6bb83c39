"""scikit-learn style wrappers around the trace map, band isolation and SNS.

The energy ``t`` is the single input feature.  Everything is computed in
MPFR and handed back as float64 arrays; use the functional API when the
extra digits matter.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .bands import band_hierarchy, spectral_member
from .bounds import theorem_bound
from .precision import check_precision, default_precision, guard_bits, hp, tolerance, working_context
from .sns import build_sns, dim_lower_estimate, sns_stats
from .tracemap import ModelParams, trace_eval

__all__ = ["BandIsolator", "SNSDimensionEstimator", "TraceMapTransformer"]


def _energies(X):
    X = check_array(X, ensure_2d=False, dtype=np.float64)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature (the energy t), got {X.shape[1]}")
        X = X[:, 0]
    return X


class _ModelMixin:
    def _params(self):
        return ModelParams(self.m, self.lam)

    def _precision(self):
        return check_precision(self.precision or default_precision())


class TraceMapTransformer(_ModelMixin, TransformerMixin, BaseEstimator):
    """Map energies ``t`` to ``(x_n, y_n, x_n', y_n')``."""

    def __init__(self, m=2, lam="0.1", level=2, precision=None):
        self.m = m
        self.lam = lam
        self.level = level
        self.precision = precision

    def fit(self, X=None, y=None):
        self.params_ = self._params()
        if self.level < 0:
            raise ValueError("level must be >= 0")
        if X is not None:
            _energies(X)
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        ts = _energies(X)
        out = np.empty((len(ts), 4))
        with working_context(self._precision() + guard_bits(self.m, self.level)):
            for i, t in enumerate(ts):
                jet = trace_eval(self.params_, self.level, hp(float(t)))
                out[i] = float(jet.x), float(jet.y), float(jet.dx), float(jet.dy)
        return out

    def get_feature_names_out(self, input_features=None):
        n = self.level
        return np.array([f"x_{n}", f"y_{n}", f"dx_{n}", f"dy_{n}"], dtype=object)


class BandIsolator(_ModelMixin, ClassifierMixin, BaseEstimator):
    """Isolate the bands of ``sigma_n``; ``predict`` tells whether ``t`` lies in it."""

    def __init__(self, m=2, lam="0.1", level=2, precision=None):
        self.m = m
        self.lam = lam
        self.level = level
        self.precision = precision

    def fit(self, X=None, y=None):
        levels = band_hierarchy(self._params(), self.level, self._precision())
        self.band_set_ = levels[-1]
        self.hierarchy_ = levels
        self.n_bands_ = len(self.band_set_)
        self.bands_ = np.array([[float(b.lo), float(b.hi)] for b in self.band_set_])
        self.classes_ = np.array([False, True])
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "band_set_")
        ts = _energies(X)
        params = self.band_set_.params
        tol = tolerance(self.band_set_.precision)
        with working_context(self.band_set_.working_precision):
            return np.array([bool(spectral_member(trace_eval(params, self.level, hp(float(t))), tol))
                             for t in ts])


class SNSDimensionEstimator(_ModelMixin, BaseEstimator):
    """Build the SNS and estimate the dimension of its limit set.

    After ``fit``: ``tree_``, ``stats_``, ``dimension_`` (empirical
    estimate), ``bound_`` (closed-form lower bound) and ``report_``.
    """

    def __init__(self, m=2, lam="1", depth=4, root_index=0, precision=None):
        self.m = m
        self.lam = lam
        self.depth = depth
        self.root_index = root_index
        self.precision = precision

    def fit(self, X=None, y=None):
        self.tree_ = build_sns(self._params(), self.root_index, self.depth, self._precision())
        self.stats_ = sns_stats(self.tree_)
        self.dimension_ = dim_lower_estimate(self.tree_) if self.depth >= 3 else None
        report = theorem_bound(self.m)
        report.empirical = dict(self.stats_, dimension_estimate=self.dimension_)
        self.report_ = report
        self.bound_ = float(report.bound)
        return self
