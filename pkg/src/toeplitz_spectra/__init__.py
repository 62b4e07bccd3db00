"""Spectral analysis of block-tridiagonal Toeplitz operators and their
finite sections: transfer matrices, Riesz projections, Widom's
determinant formula and the limiting spectral sets."""
from .errors import NonHolomorphicCellWarning, NumericalError, SpectralError, ValidationError
from .model import (
    BlockSymbol,
    ChiralPair,
    chiral_split,
    finite_section,
    lift_scalar_banded,
    load_model,
    model_from_dict,
    new_block_symbol,
    reassemble,
    save_model,
    scale_symbol,
    symbol_at,
)
from .transfer import TransferEigenData, discriminant_roots, transfer_eigendata, transfer_matrix
from .projections import q_moment, riesz_by_index, riesz_projection
from .widom import direct_det, q_identity_check, transfer_det, widom_det, widom_terms

__version__ = "0.1.0"

__all__ = [
    "NonHolomorphicCellWarning", "NumericalError", "SpectralError", "ValidationError",
    "BlockSymbol", "ChiralPair", "chiral_split", "finite_section", "lift_scalar_banded",
    "load_model", "model_from_dict", "new_block_symbol", "reassemble", "save_model",
    "scale_symbol", "symbol_at",
    "TransferEigenData", "discriminant_roots", "transfer_eigendata", "transfer_matrix",
    "q_moment", "riesz_by_index", "riesz_projection",
    "direct_det", "q_identity_check", "transfer_det", "widom_det", "widom_terms",
]
