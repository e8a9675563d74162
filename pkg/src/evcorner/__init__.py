"""Asynchronous corner detection for event camera streams."""
from .config import ConfigError, RunConfig
from .esusan import (CornerClass, GeometricThresholds, KernelMasks, build_masks,
                     classify_corner, esusan_detect, usan_counts, usan_membership)
from .estimators import CornerDetector, GFFilter
from .evaluation import (CylinderParams, TrackParams, accuracy_cylinders, bench_report,
                         nn_track, reduction_rate, tpr)
from .events import (EVENT_DTYPE, Event, EventFormatError, LocalPatch, SensorGeometry,
                     TimeSurface, local_patch, make_events, read_events, sae_update,
                     write_events)
from .harris import (HarrisParams, aed_eharris_detect, g_eharris_detect, harris_matrix,
                     harris_score, sobel_kernels)
from .normalization import (AedLookupTable, NormalizedPatch, build_aed_table,
                            normalize_aed, normalize_binary, normalize_exp,
                            normalize_linear, normalize_minmax, normalize_sits,
                            normalize_sorted, normalize_time_window, sits_update)
from .pipeline import (Detector, DetectorConfig, EventLabel, PipelineState, RunSummary,
                       Stage, label_stream, process_event, run_stream)
from .synth import GroundTruth, SceneSpec, ShapeSpec, generate, parse_scene, shapes_scene
from .threshold import FilterGrid, RefractoryGrid, TgfState, gf_filter, refractory_filter, tgf_update

__version__ = "0.1.0"
