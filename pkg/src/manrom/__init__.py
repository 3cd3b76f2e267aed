"""Invariant-manifold reduced-order models for geometrically nonlinear
second-order mechanical systems.

The pipeline: a :class:`~manrom.tensors.SecondOrderModel` (mass, damping,
stiffness plus quadratic/cubic coupling tensors) is reduced onto the
invariant manifold tangent to a set of master modes by arbitrary-order
direct parametrisation (:func:`~manrom.parametrise.parametrise`, styles
``graph`` / ``cnf`` / ``rnf`` / ``frnf``), realified to a polynomial ROM in
real coordinates (:func:`~manrom.realify.realify`), and analysed with
time integration, harmonic-balance continuation, or multiple scales
(:mod:`manrom.romdyn`).
"""

__version__ = "0.1.0"

from ._kernels import using_numba
from .indices import resonance_set
from .models import build_model, coupled2dof, coupled2dof_folding, duffing, \
    vk_arch, vk_beam, vk_cantilever
from .parametrise import Parametrisation, ResonanceError, parametrise
from .realify import RealParametrisation, oscillator_form, \
    polar_single_mode, realify
from .romdyn import ContinuationCurve, DivergenceError, ReducedODE, \
    hbm_backbone, hbm_frf, integrate_full, integrate_reduced, \
    multiple_scales
from .spectral import orthogonality_residuals, solve_eigen, spectral_frame
from .tensors import CubTensor, ModelError, QuadTensor, SecondOrderModel, \
    load_model, save_model

__all__ = [
    "__version__", "using_numba",
    "SecondOrderModel", "QuadTensor", "CubTensor", "ModelError",
    "load_model", "save_model",
    "spectral_frame", "solve_eigen", "orthogonality_residuals",
    "resonance_set",
    "parametrise", "Parametrisation", "ResonanceError",
    "realify", "RealParametrisation", "polar_single_mode",
    "oscillator_form",
    "ReducedODE", "DivergenceError", "integrate_reduced", "integrate_full",
    "hbm_backbone", "hbm_frf", "multiple_scales", "ContinuationCurve",
    "duffing", "coupled2dof", "coupled2dof_folding",
    "vk_beam", "vk_arch", "vk_cantilever", "build_model",
]
