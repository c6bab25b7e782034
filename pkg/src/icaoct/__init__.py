"""Intensity-correlation OCT: simulation, FFT stacks, dispersion analytics
and a convolutional GVD-profile regressor."""

from .analytics import (DegenerateGeometryError, Peak, SegmentGeometry,
                        analyze_peaks, build_dispersion_map, decode_gvd,
                        effective_profile_two_interface, encode_gvd,
                        estimate_layer_gvd, ground_truth_profile, peak_fwhm,
                        profile_mae, remove_autocorr_peaks, segment_gvd_eq1,
                        segment_gvd_eq2b)
from .dataset import (DatasetCorruptionError, DatasetFormatError,
                      DatasetHeader, SamplerConfig, generate_dataset,
                      generate_example, load_dataset, read_dataset,
                      sample_object, write_dataset)
from .optics import (GVD_MAX, GVD_MIN, InvalidGridError, NoiseSpec,
                     ObjectModel, SpectralGrid, Spectrum, add_noise,
                     fringe_peak_amplitude, make_grid, measure_snr,
                     resample_to_grid, synthesize_spectrum)
from .regressor import (RegressorConfig, RegressorModel, TrainHistory,
                        TrainingDivergedError, forward, gradient_check,
                        init_model, load_checkpoint, predict,
                        save_checkpoint, train, train_step)
from .stack import autocorrelate, build_stack, fragment_slices, ica_ascan, standard_ascan

__version__ = "0.1.0"

__all__ = [
    "DegenerateGeometryError", "Peak", "SegmentGeometry", "analyze_peaks",
    "build_dispersion_map", "decode_gvd", "effective_profile_two_interface",
    "encode_gvd", "estimate_layer_gvd", "ground_truth_profile", "peak_fwhm",
    "profile_mae", "remove_autocorr_peaks", "segment_gvd_eq1", "segment_gvd_eq2b",
    "DatasetCorruptionError", "DatasetFormatError", "DatasetHeader",
    "SamplerConfig", "generate_dataset", "generate_example", "load_dataset",
    "read_dataset", "sample_object", "write_dataset",
    "GVD_MAX", "GVD_MIN", "InvalidGridError", "NoiseSpec", "ObjectModel",
    "SpectralGrid", "Spectrum", "add_noise", "fringe_peak_amplitude",
    "make_grid", "measure_snr", "resample_to_grid", "synthesize_spectrum",
    "RegressorConfig", "RegressorModel", "TrainHistory", "TrainingDivergedError",
    "forward", "gradient_check", "init_model", "load_checkpoint", "predict",
    "save_checkpoint", "train", "train_step",
    "autocorrelate", "build_stack", "fragment_slices", "ica_ascan", "standard_ascan",
]
