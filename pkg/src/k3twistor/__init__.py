"""Supersingular K3 twistor theory at desk scale: exact arithmetic over
F_{p^m} and W_N(F_{p^m}), characteristic subspaces, twistor fibers, and
K3 and Mukai crystals with B-field twists."""

from .gfield import FieldError, FieldParams, FieldElement, field_create, frobenius
from .quadspace import QuadError, QuadSpace, build_standard, classify, witt_extend
from .charspace import CharError, CharSubspace, artin_invariant, random_strictly_characteristic, with_artin
from .twistor import TwistorContext, fiber_group, lift_K_B, line_census, project
from .padic import PrecisionError, WittRing, witt_ring
from .crystal import (CrystalError, K3Crystal, MukaiCrystal, TateModel, bfield_sample,
                      bfield_validate, char_from_crystal, compare_tate, crystal_from_char, ext_ns,
                      mukai_extend, ns_duality_check, tate_model, tate_module, twist, verify_k3)

__version__ = "0.1.0"
