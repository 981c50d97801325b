"""Stallings graphs, Feighn-Handel graph pairs and mapping tori of free group endomorphisms."""
from .errors import AlphabetMismatch, CapExceeded, FreeToriError, NotInjective, ParseError, PreconditionError
from .words import Endomorphism, Word, apply, compose, is_injective, iterate, parse_endomorphism
from .stallings import StallingsGraph, conjugate_into, fold, intersection, membership, pullback, subgroup_graph
from .graph_pair import GraphPair, check_theta, complement_factor, minimize, relative_rank, tighten
from .mapping_torus import (
    MappingTorus,
    MTElement,
    detect_sub_mapping_torus,
    euler_characteristic,
    normalize,
    subgroup_presentation,
)
from .one_relator import classify_one_relator, is_primitive, primitivity_rank

__version__ = "0.1.0"
