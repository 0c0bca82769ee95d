"""scikit-learn style facade over the scheme optimizers."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .channel import ScenarioChannels
from .optimizer import OptimizerConfig, optimize
from .scenario import Scheme, ScenarioSpec, validate
from .snr import expected_snr, snr_db
from .solver import DEFAULT_MAX_ITER, DEFAULT_TOL_FEAS, DEFAULT_TOL_OBJ


class CoverageDesigner(BaseEstimator):
    """Designs MA positions and IRS reflections for worst-case coverage.

    ``fit`` takes a :class:`ScenarioSpec` in place of a feature matrix;
    ``predict`` maps receiver locations ``(n, 3)`` to expected SNR.

    Examples
    --------
    >>> from mairs.scenario import desk_scenario
    >>> est = CoverageDesigner(scheme="shared_ma_sta_irs").fit(desk_scenario())
    >>> round(est.score(), 1) > 0
    True
    """

    def __init__(self, scheme: str | None = None, eps: float = 1e-3, max_outer: int = 100,
                 tol_obj: float = DEFAULT_TOL_OBJ, tol_feas: float = DEFAULT_TOL_FEAS,
                 max_iter: int = DEFAULT_MAX_ITER, workers: int = 1):
        self.scheme = scheme
        self.eps = eps
        self.max_outer = max_outer
        self.tol_obj = tol_obj
        self.tol_feas = tol_feas
        self.max_iter = max_iter
        self.workers = workers

    def _config(self) -> OptimizerConfig:
        return OptimizerConfig(eps=self.eps, max_outer=self.max_outer, tol_obj=self.tol_obj,
                               tol_feas=self.tol_feas, max_iter=self.max_iter,
                               workers=self.workers)

    def fit(self, scenario: ScenarioSpec, y=None, init=None):
        problems = validate(scenario)
        if problems:
            raise ValueError("invalid scenario: " + "; ".join(problems))
        scheme = Scheme(self.scheme or scenario.scheme)
        self.scenario_ = scenario
        self.channels_ = ScenarioChannels(scenario)
        self.solution_ = optimize(scenario, scheme, self._config(), init, self.channels_)
        self.scheme_ = scheme
        self.layouts_ = self.solution_.layouts
        self.reflections_ = self.solution_.reflections
        self.worst_case_snr_ = self.solution_.worst_case_snr
        self.trace_ = self.solution_.trace
        return self

    def _area_index(self, area) -> int:
        ids = [a.id for a in self.scenario_.areas]
        if area not in ids:
            raise ValueError(f"unknown area id {area!r}")
        return ids.index(area)

    def predict(self, points, area=0) -> np.ndarray:
        """Expected SNR (linear) at ``points`` served with area ``area``'s configuration."""
        check_is_fitted(self, "solution_")
        pts = check_array(points, ensure_min_features=3)
        if pts.shape[1] != 3:
            raise ValueError("points must have three coordinates")
        j = self._area_index(area)
        target = self.scenario_.areas[j]
        pc = self.channels_.at_points(pts, target)
        return expected_snr(self.channels_, self.layouts_[j], self.reflections_[j], pc).total

    def score(self, X=None, y=None, area=0) -> float:
        """Worst-case expected SNR in dB.

        Without ``X`` this is the fitted objective over every area's candidate
        points; with ``X`` it is the minimum over those points served by ``area``.
        ``y`` is ignored.
        """
        check_is_fitted(self, "solution_")
        if X is None:
            return float(snr_db(self.worst_case_snr_))
        return float(snr_db(np.min(self.predict(X, area))))
