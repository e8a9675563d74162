from pathlib import Path

import pytest

from evcorner.config import KEYS, ConfigError, RunConfig
from evcorner.pipeline import DetectorConfig


def test_defaults_resolve_to_detector_defaults():
    cfg = RunConfig()
    assert cfg.detector == DetectorConfig()
    assert set(cfg.resolved()) == set(KEYS)


def test_parse_file_text():
    cfg = RunConfig.from_text("# comment\ntgf.lambda = 2\nesusan.g = [11, 19, 29]\n"
                              "harris.threshold = none  # auto\npipeline.surface = DOWN2\n")
    d = cfg.detector
    assert d.lam == 2.0 and d.g == (11, 19, 29) and d.harris_threshold is None
    assert d.surface == "down2"


@pytest.mark.parametrize("text, match", [
    ("tgf.bogus = 1\n", "unknown config key"),
    ("tgf.s = two\n", "bad value"),
    ("esusan.g = 1 2\n", "three integers"),
    ("tgf.lambda = 0.5\n", "lambda"),
    ("[section]\ntgf.s = 2\n", "sections"),
])
def test_bad_configs(text, match):
    with pytest.raises(ConfigError, match=match):
        RunConfig.from_text(text)


def test_overrides():
    base = RunConfig.from_text("tgf.s = 2\n", "base.cfg")
    cfg = base.with_overrides(["tgf.s=3", "harris.sobel_size = 5"])
    assert cfg.detector.s == 3 and cfg.detector.harris_params().score_threshold == 8
    assert cfg.source == "base.cfg with --set overrides"
    with pytest.raises(ConfigError, match="key=value"):
        base.with_overrides(["tgf.s"])


def test_hash_depends_on_effective_values_only():
    a = RunConfig()
    b = RunConfig.from_text("tgf.td_us = 10000\n")
    c = RunConfig.from_text("tgf.td_us = 20000\n")
    assert a.config_hash() == b.config_hash() != c.config_hash()
    assert len(a.config_hash()) == 16
    assert a.config_hash(extra=1) != a.config_hash()


def test_to_text_round_trip():
    cfg = RunConfig.from_text("esusan.g = 11 19 29\nharris.threshold = 20\n")
    back = RunConfig.from_text(cfg.to_text())
    assert back.detector == cfg.detector
    assert back.config_hash() == cfg.config_hash()


def test_shipped_config_loads():
    cfg = RunConfig.load(Path(__file__).parents[1] / "configs" / "shapes.cfg")
    assert cfg.detector == DetectorConfig(lam=1.0, surface="down2", polarity="merged")
