"""Finite-grid Gelfand-Shilov pseudo-differential calculus."""

from .calculus import (FourDField, compose_kernels, mollify, quant_transfer, sharp0, sharpA,
                       stft_covariance_check, stft_kernel_relation_check, trace_map,
                       transfer_symbol, triple_compose)
from .envelope import (EnvelopeModel, classify_field, classify_symbol, fit_envelope, kappa,
                       m_bounds_check, mixed_norm, weight_omega)
from .grid import (Grid, SampledFunction, fourier, make_grid, partial_fourier,
                   quadrature, sample, spectral_derivative)
from .quantize import (OperatorKernel, QuantMatrix, apply_op, kernel_from_symbol,
                       symbol_from_kernel, symbol_grid)
from .stft import STFTField, istft, moyal_check, stft, stft4
from .windows import GevreyParams, gaussian_window, gs_seminorm, hermite, hr_norm

__all__ = [
    "EnvelopeModel", "FourDField", "GevreyParams", "Grid", "OperatorKernel", "QuantMatrix",
    "STFTField", "SampledFunction", "apply_op", "classify_field", "classify_symbol",
    "compose_kernels", "fit_envelope", "fourier", "gaussian_window", "gs_seminorm", "hermite",
    "hr_norm", "istft", "kappa", "kernel_from_symbol", "m_bounds_check", "make_grid",
    "mixed_norm", "mollify", "moyal_check", "partial_fourier", "quadrature", "quant_transfer",
    "sample", "sharp0", "sharpA", "spectral_derivative", "stft", "stft4",
    "stft_covariance_check", "stft_kernel_relation_check", "symbol_from_kernel",
    "symbol_grid", "trace_map", "transfer_symbol", "triple_compose", "weight_omega",
]
