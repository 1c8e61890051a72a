"""Discrete density experiments for Newtonian Sobolev functions on GHS domains.

Grid domains are metric measure graphs; on them the package builds Whitney-type
covers, quasihyperbolic geodesics, estimates of the hypothesis constants, the
scale-m decomposition with its partition of unity, and the approximants ``u_m``.
"""
from .approx import convergence_experiment
from .decomp import DecompositionConfig, decompose
from .domains import DomainSpec, generate
from .ghs import ghs_report
from .mmgraph import MetricMeasureGraph, graph_from_json, load_graph
from .pou import build_pou, verify_pou
from .qhyp import qh_geodesic
from .whitney import build_cover, verify_cover

__version__ = "0.1.0"

__all__ = [
    "DecompositionConfig", "DomainSpec", "MetricMeasureGraph", "build_cover", "build_pou",
    "convergence_experiment", "decompose", "generate", "ghs_report", "graph_from_json",
    "load_graph", "qh_geodesic", "verify_cover", "verify_pou",
]
