"""scikit-learn style wrappers around the event pipelines.

Events go in as a structured :data:`~evcorner.events.EVENT_DTYPE` array or
an ``(n, 3)``/``(n, 4)`` numeric array of ``t, x, y[, p]`` rows. ``fit``
only resolves the sensor geometry and polarity mode; every labeling call
then runs a fresh pipeline over the whole stream, so results never depend
on what was processed before.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .pipeline import DetectorConfig, Detector, PipelineState, Stage, run_stream, LabelCollector
from .validation import check_events, check_geometry

_CONFIG_PARAMS = DetectorConfig.field_names()


class _StreamEstimator(TransformerMixin, BaseEstimator):
    _detector = None

    def _config(self) -> DetectorConfig:
        return DetectorConfig(**{name: getattr(self, name) for name in _CONFIG_PARAMS})

    def fit(self, X, y=None):
        """Resolve geometry and polarity from ``X``; ``y`` is ignored.

        Returns
        -------
        self
        """
        events = check_events(X)
        self.geometry_ = check_geometry(self.geometry, events)
        self.has_polarity_ = bool(np.any(events["p"] != 0))
        self.config_ = self._config()
        self.detector_ = Detector(self._detector or self.detector)
        self.n_events_in_ = events.shape[0]
        return self

    def label(self, X):
        """Run the pipeline over ``X``.

        Returns
        -------
        stages : ndarray of int8
            :class:`~evcorner.pipeline.Stage` codes, one per event.
        scores : ndarray of float
            Harris scores, NaN where Harris did not run.
        """
        check_is_fitted(self, "config_")
        events = check_events(X, self.geometry_)
        state = PipelineState(self.geometry_, self.config_, self.detector_,
                              self.has_polarity_)
        sink = LabelCollector()
        self.summary_ = run_stream(state, events, sink)
        self.tgf_ = state.current_tgf
        _, stages, scores = sink.result()
        return stages, scores


class CornerDetector(_StreamEstimator):
    """Per-event corner labeling.

    Parameters
    ----------
    detector : {"se-harris", "esusan", "aed-eharris", "g-eharris"}
    geometry : SensorGeometry, "WxH" string, (width, height) or None
        None infers the smallest frame holding the fitted events.
    td_us, lam, s, refractory_period_us, g, g_noise, sobel_size,
    harris_threshold, k, sigma, aed_tau, aed_resolution, aed_max_ratio,
    n_l, surface, polarity
        See :class:`~evcorner.pipeline.DetectorConfig`.

    Attributes
    ----------
    geometry_ : SensorGeometry
    config_ : DetectorConfig
    summary_ : RunSummary
        Counts and timing of the last labeling call.
    tgf_ : float
        Adaptive threshold at the end of the last labeling call.
    """

    def __init__(self, detector="se-harris", geometry=None, td_us=10_000, lam=1.0, s=2,
                 refractory_period_us=0, g=(12, 20, 31), g_noise=(3, 5, 8),
                 sobel_size=7, harris_threshold=None, k=0.04, sigma=2.0,
                 aed_tau=1.0, aed_resolution=4096, aed_max_ratio=2.0, n_l=25,
                 surface="auto", polarity="auto"):
        self.detector = detector
        self.geometry = geometry
        self.td_us = td_us
        self.lam = lam
        self.s = s
        self.refractory_period_us = refractory_period_us
        self.g = g
        self.g_noise = g_noise
        self.sobel_size = sobel_size
        self.harris_threshold = harris_threshold
        self.k = k
        self.sigma = sigma
        self.aed_tau = aed_tau
        self.aed_resolution = aed_resolution
        self.aed_max_ratio = aed_max_ratio
        self.n_l = n_l
        self.surface = surface
        self.polarity = polarity

    def fit(self, X, y=None):
        if Detector(self.detector) is Detector.FILTER:
            raise ValueError("use GFFilter for filter-only runs")
        return super().fit(X, y)

    def predict(self, X):
        """Boolean mask of events labeled corner."""
        stages, _ = self.label(X)
        return stages == Stage.CORNER

    def decision_function(self, X):
        """Harris score per event (NaN where Harris did not run)."""
        return self.label(X)[1]

    def transform(self, X):
        """The corner events of ``X`` as a structured array."""
        events = check_events(X, self.geometry_)
        return events[self.predict(events)]


class GFFilter(_StreamEstimator):
    """Background-activity filter with the adaptive global threshold.

    ``predict`` marks signal events; ``transform`` keeps them.
    Only the filter-related parameters are exposed.
    """

    _detector = Detector.FILTER

    def __init__(self, geometry=None, td_us=10_000, lam=1.0, s=2, refractory_period_us=0):
        self.geometry = geometry
        self.td_us = td_us
        self.lam = lam
        self.s = s
        self.refractory_period_us = refractory_period_us

    def _config(self) -> DetectorConfig:
        return DetectorConfig(td_us=self.td_us, lam=self.lam, s=self.s,
                              refractory_period_us=self.refractory_period_us)

    def predict(self, X):
        stages, _ = self.label(X)
        return stages != Stage.NOISE

    def transform(self, X):
        events = check_events(X, self.geometry_)
        return events[self.predict(events)]
