"""Exact-arithmetic engine for correlation functions of a graded Fock module
and their sewing products on the sphere."""

from .fock import (
    GradedVector,
    ModeError,
    PairingError,
    dual_basis,
    enumerate_basis,
    mode_action,
    pair,
    partitions_of,
    translate,
    translate_adjoint,
    weight,
)
from .series import (
    DomainError,
    ExpansionDomain,
    MultiSeries,
    WrongRegionError,
    expand_binomial,
)
from .fields import (
    CutoffUnderflowError,
    derivation_check,
    gamma_apply,
    power_from_mode,
    mode_from_power,
)
from .correlators import (
    CorrelatorSpec,
    CorrelatorValue,
    Cutoffs,
    SpecError,
    UnderflowError,
    insertion_sum_C,
    insertion_sum_D,
    inverse_shuffles,
    matrix_element,
    permute,
    rational_form,
    rational_forms_agree,
    shuffle_sum,
)

__all__ = [name for name in dir() if not name.startswith("_")]
