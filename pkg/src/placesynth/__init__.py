"""Placement-aware synthesis of hierarchical reduction programs."""

from .dsl import Form, FormKind, LoweredProgram, Program, ReductionInstruction, lower, parse_program, pretty_print
from .hierarchy import HierarchyKind, SynthesisHierarchy, build_hierarchy
from .placement import ParallelismMatrix, ParallelismSpec, enumerate_matrices
from .semantics import Collective, SemanticError, StateContext
from .simulator import Algo, CostModelConfig, CostReport, simulate
from .synthesizer import SynthesisConfig, SynthesisResult, synthesize
from .topology import LevelSpec, SystemModel, load_system, parse_system

__all__ = [
    "Algo", "Collective", "CostModelConfig", "CostReport", "Form", "FormKind", "HierarchyKind",
    "LevelSpec", "LoweredProgram", "ParallelismMatrix", "ParallelismSpec", "Program",
    "ReductionInstruction", "SemanticError", "StateContext", "SynthesisConfig", "SynthesisHierarchy",
    "SynthesisResult", "SystemModel", "build_hierarchy", "enumerate_matrices", "load_system", "lower",
    "parse_program", "parse_system", "pretty_print", "simulate", "synthesize",
]
