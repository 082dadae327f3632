"""Energy-optimal trajectory planning by direct collocation."""

from .nlp import NLPReport, nlp_minimize
from .solver import (CollocationSolution, gradient_check, mesh_refine, refine_until_stable,
                     smooth_guess, solve, solve_from)
from .transcription import BoundaryConditions, CollocationProblem, Transcription, transcribe

__all__ = ["BoundaryConditions", "CollocationProblem", "CollocationSolution", "NLPReport",
           "Transcription", "gradient_check", "mesh_refine", "nlp_minimize",
           "refine_until_stable", "smooth_guess", "solve", "solve_from", "transcribe"]
