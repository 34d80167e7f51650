"""Observability, controllability and sensor placement for networks of LFT-parameterized subsystems."""
from .descriptor import (DescriptorReport, complete_controllability, complete_observability, infinity_condition,
                         regularity_check)
from .errors import (AssumptionViolated, ConsistencyError, IllConditioned, InvalidInput, InvalidModel,
                     InvalidParameter, LftNdsError, NotRegular, NotWellPosed, RefusedTooLarge, StructureMismatch,
                     UnsupportedByOracle)
from .io import load_model, loads_model, model_to_dict, save_model
from .kcf import ALL_OF_C, KcfDecomposition, kcf, lambda_singular_set, verify_kcf
from .model import (AugmentedSubsystem, LftSubsystem, NdsModel, augment, build_augmented_scm, dualize, lump,
                    rc_network, well_posed_nds, well_posed_subsystem)
from .numeric import DEFAULT_POLICY, TolerancePolicy, is_fcr, null_space_basis, rank_with_tolerance
from .pencil import CanonicalBlock, MatrixPencil, block_null_space, normal_rank
from .placement import (PlacementDiagnostics, canonical_cx, corollary1_check, minimal_sensor_search, theorem4_check,
                        theorem4_dual_check)
from .verify import (OutputKernel, VerificationReport, build_xy, m_pencil, output_kernel, pbh_oracle,
                     subsystem_reduced_pencil, verify_controllability, verify_observability)

__version__ = "0.1.0"

__all__ = [
    "ALL_OF_C",
    "AssumptionViolated",
    "AugmentedSubsystem",
    "CanonicalBlock",
    "ConsistencyError",
    "DEFAULT_POLICY",
    "DescriptorReport",
    "IllConditioned",
    "InvalidInput",
    "InvalidModel",
    "InvalidParameter",
    "KcfDecomposition",
    "LftNdsError",
    "LftSubsystem",
    "MatrixPencil",
    "NdsModel",
    "NotRegular",
    "NotWellPosed",
    "OutputKernel",
    "PlacementDiagnostics",
    "RefusedTooLarge",
    "StructureMismatch",
    "TolerancePolicy",
    "UnsupportedByOracle",
    "VerificationReport",
    "augment",
    "block_null_space",
    "build_augmented_scm",
    "build_xy",
    "canonical_cx",
    "complete_controllability",
    "complete_observability",
    "corollary1_check",
    "dualize",
    "infinity_condition",
    "is_fcr",
    "kcf",
    "lambda_singular_set",
    "load_model",
    "loads_model",
    "lump",
    "m_pencil",
    "minimal_sensor_search",
    "model_to_dict",
    "normal_rank",
    "null_space_basis",
    "output_kernel",
    "pbh_oracle",
    "rank_with_tolerance",
    "rc_network",
    "regularity_check",
    "save_model",
    "subsystem_reduced_pencil",
    "theorem4_check",
    "theorem4_dual_check",
    "verify_controllability",
    "verify_kcf",
    "verify_observability",
    "well_posed_nds",
    "well_posed_subsystem",
]
