"""Volumetric displacement transfer of garments between body shapes."""

from .config import TransferConfig
from .estimator import GarmentTransfer, TransferReport, transfer_garment
from .grid import SparseDisplacementGrid, activate_band, sample_displacement

__all__ = ["GarmentTransfer", "SparseDisplacementGrid", "TransferConfig", "TransferReport",
           "activate_band", "sample_displacement", "transfer_garment"]
