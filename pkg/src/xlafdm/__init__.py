"""Multi-user XL-MIMO AFDM downlink: DAFT modem, delay-Doppler channels, subarray precoding."""

from .afdm import AfdmParams, DaftFrame, Domain, daft_matrix, demodulate, modulate
from .channel import DelayDopplerPath, PathSet, gen_paths, link_matrix, path_matrix, time_domain_oracle
from .harness import ExperimentConfig, Metric, Waveform, emit_csv, parse_config, preset, run_experiment
from .kernels import BACKEND
from .metrics import Modulation, ModulationSpec, Scenario, ber_trial, sinr, sum_rate
from .precoding import Algorithm, PrecodeConfig, Sampling, precode, precode_subarrays
from .xl_array import CorrelationSpec, PathConfig, SubarrayLayout, XlChannel, gen_xl_channel, received_decomposition

__all__ = [
    "AfdmParams", "DaftFrame", "Domain", "daft_matrix", "demodulate", "modulate",
    "DelayDopplerPath", "PathSet", "gen_paths", "link_matrix", "path_matrix", "time_domain_oracle",
    "ExperimentConfig", "Metric", "Waveform", "emit_csv", "parse_config", "preset", "run_experiment",
    "BACKEND", "Modulation", "ModulationSpec", "Scenario", "ber_trial", "sinr", "sum_rate",
    "Algorithm", "PrecodeConfig", "Sampling", "precode", "precode_subarrays",
    "CorrelationSpec", "PathConfig", "SubarrayLayout", "XlChannel", "gen_xl_channel", "received_decomposition",
]
