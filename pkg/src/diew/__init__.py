"""Device-independent witnesses of genuine tripartite entanglement.

Modules: ``scenario`` (behaviors and correlators), ``quantum`` (states and
Born-rule behaviors), ``witness`` (I_n, Mermin and bounds), ``lhv`` (the
biseparable hidden-variable model), ``bisep_sdp`` (moment-matrix
relaxations of the biseparable set), ``polytope`` (local and Svetlichny
polytopes), ``search`` (angle optimisation) and ``cli``.
"""
from .scenario import Behavior, CorrelatorSet, Scenario
from .witness import WitnessCoefficients, build_In, evaluate, evaluate_behavior, mermin_witness

__all__ = ["Behavior", "CorrelatorSet", "Scenario", "WitnessCoefficients", "build_In", "evaluate",
           "evaluate_behavior", "mermin_witness"]
__version__ = "0.1.0"
