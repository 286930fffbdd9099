"""Continuous-mode two-photon interference in feedback interferometers."""

__version__ = "0.1.0"

from .correlations import (DetectionEvent, ScanAxis, ScanResult, beat_scan, coincidence_eq4,
                           coincidence_general, hom_coincidence, joint_amplitude_matrix,
                           schmidt_number)
from .device import (DeviceSpec, Edge, Fig1Params, build_fig1_device, enumerate_histories,
                     fig1_detection_times, validate_device)
from .network import UnitaryMatrix, reck_decompose, reck_reconstruct
from .wavepacket import WavepacketParams, overlap, zeta

__all__ = [
    "DetectionEvent", "DeviceSpec", "Edge", "Fig1Params", "ScanAxis", "ScanResult", "UnitaryMatrix",
    "WavepacketParams", "beat_scan", "build_fig1_device", "coincidence_eq4", "coincidence_general",
    "enumerate_histories", "fig1_detection_times", "hom_coincidence", "joint_amplitude_matrix",
    "overlap", "reck_decompose", "reck_reconstruct", "schmidt_number", "validate_device", "zeta",
]
