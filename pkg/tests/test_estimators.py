import numpy as np
import pytest
from sklearn.base import clone

from evcorner.estimators import CornerDetector, GFFilter
from evcorner.events import SensorGeometry
from evcorner.pipeline import DetectorConfig, Stage, label_stream
from evcorner.synth import SceneSpec, ShapeSpec, generate

GEOM = SensorGeometry(64, 48)


@pytest.fixture(scope="module")
def stream():
    square = ShapeSpec(np.array([[10, 10], [26, 10], [26, 26], [10, 26]]), (80.0, 45.0))
    events, _ = generate(SceneSpec(GEOM, [square], duration=0.25, noise_rate=0.05,
                                   multiplicity=3, edge_width=1.5))
    return events


def test_params_and_clone():
    det = CornerDetector("esusan", geometry="64x48", lam=2.0)
    params = det.get_params()
    assert params["detector"] == "esusan" and params["lam"] == 2.0
    assert set(DetectorConfig.field_names()) <= set(params)
    twin = clone(det).set_params(lam=3.0)
    assert twin.lam == 3.0 and det.lam == 2.0


def test_predict_matches_pipeline(stream):
    det = CornerDetector("se-harris", geometry=GEOM).fit(stream)
    mask = det.predict(stream)
    _, stages, scores, summary = label_stream(stream, GEOM, "se-harris")
    np.testing.assert_array_equal(mask, stages == Stage.CORNER)
    np.testing.assert_array_equal(det.decision_function(stream), scores)
    assert det.summary_.corners == summary.corners == mask.sum()
    assert det.tgf_ > 0
    np.testing.assert_array_equal(det.transform(stream), stream[mask])


def test_fit_transform_and_inferred_geometry(stream):
    det = CornerDetector("esusan")
    out = det.fit_transform(stream)
    assert det.geometry_.width <= 64 and out.size > 0
    assert det.n_events_in_ == stream.size


def test_unfitted_and_filter_detector(stream):
    with pytest.raises(Exception, match="not fitted"):
        CornerDetector().predict(stream)
    with pytest.raises(ValueError, match="GFFilter"):
        CornerDetector("filter").fit(stream)


def test_gf_filter(stream):
    gf = GFFilter(geometry=GEOM).fit(stream)
    keep = gf.predict(stream)
    _, stages, _, _ = label_stream(stream, GEOM, "filter")
    np.testing.assert_array_equal(keep, stages != Stage.NOISE)
    assert 0 < keep.sum() < stream.size
    np.testing.assert_array_equal(gf.transform(stream), stream[keep])
    assert "detector" not in gf.get_params()


def test_accepts_plain_numeric_array(stream):
    plain = np.column_stack([stream[c].astype(np.int64) for c in ("t", "x", "y", "p")])
    det = CornerDetector("esusan", geometry=GEOM).fit(plain)
    np.testing.assert_array_equal(det.predict(plain), det.predict(stream))
