"""
Evaluation metrics and empirical certification.
"""

from .certification import (ProjectorEstimate, RecEstimate, SRecEstimate, all_pairs, check_npgd_bound,
                            dataset_pairs, estimate_projector_delta, estimate_rec, estimate_s_rec, npgd_error_bound,
                            range_pairs, speedup_ratio)
from .reconstruction import mse, mse_per_pixel, residual_error, snr_db
from .ssim import SsimConfig, mssim, mssim_batch, ssim, ssim_map

__all__ = [
    'ProjectorEstimate', 'RecEstimate', 'SRecEstimate', 'all_pairs', 'check_npgd_bound',
    'dataset_pairs', 'estimate_projector_delta', 'estimate_rec', 'estimate_s_rec', 'range_pairs',
    'npgd_error_bound', 'speedup_ratio',
    'mse', 'mse_per_pixel', 'residual_error', 'snr_db',
    'SsimConfig', 'mssim', 'mssim_batch', 'ssim', 'ssim_map',
]
