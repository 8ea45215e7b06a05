"""Numerical verification library for relativistic moment hierarchies.

Submodules:
    tensor_core         variance-tagged tensors and transformation laws
    observer_maps       observer transformations and Lorentz matrices
    frame_geometry      metrics, time vectors, dual frames, Christoffel symbols
    kinetic_moments     velocity moments of kinetic distributions
    moment_hierarchy    order-N divergence systems, Coriolis coefficients, reduction
    particle_dynamics   worldlines and the Dirac approximation
    fluid_closure       fluid rate tensor and diffusion flux
    divergence_checker  invariance of general divergence systems
    cli_runner          scenario-driven command line front end
"""
from . import (
    cli_runner,
    divergence_checker,
    errors,
    fields,
    fluid_closure,
    frame_geometry,
    kinetic_moments,
    moment_hierarchy,
    observer_maps,
    particle_dynamics,
    tensor_core,
)
from .errors import *  # noqa: F401,F403
from .tensor_core import CO, CONTRA, CheckReport, Direction, Tensor, transform

__version__ = "0.1.0"
