"""Multipath ghost-target identification for colocated MIMO radar."""

__version__ = "0.1.0"

from .array import ArrayGeometry, build_response, direct_matrix, example_sla, ula, virtual_matrix
from .cscd_h0 import EstimateH0, StopConfigH0, cscd_h0, omp_h0
from .cscd_h1 import EstimateH1, MixedAngleSet, StopConfigH1, cscd_h1, gomp_h1
from .estimators import DirectPathEstimator, GhostDetector, MixedPathEstimator
from .glrt import TheoryModel, detect, glrt_statistic, ideal_detect, pd, pfa, rho1_exact, threshold_for_pfa
from .scene import DirectPath, FirstOrderPair, Scene, synthesize, trial_rng

__all__ = [
    "ArrayGeometry", "DirectPath", "DirectPathEstimator", "EstimateH0", "EstimateH1", "FirstOrderPair",
    "GhostDetector", "MixedAngleSet", "MixedPathEstimator", "Scene", "StopConfigH0", "StopConfigH1",
    "TheoryModel", "build_response", "cscd_h0", "cscd_h1", "detect", "direct_matrix", "example_sla",
    "glrt_statistic", "gomp_h1", "ideal_detect", "omp_h0", "pd", "pfa", "rho1_exact", "synthesize",
    "threshold_for_pfa", "trial_rng", "ula", "virtual_matrix",
]
