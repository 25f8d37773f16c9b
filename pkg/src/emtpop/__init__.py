"""Phenotype-structured population models of the epithelial-mesenchymal transition.

Modules
-------
regulatory    miR-200/ZEB/SNAIL ODEs, epigenetic variant, SNAIL schedules
bifurcation   equilibria and their stability along SNAIL
reduction     one-dimensional reduced field and its calibration
integrate     adaptive Dormand-Prince integrator
particles     weighted-particle solver with Gaussian regularisation
entropy       entropy-coupled growth on the reduced axis
scenarios     named experiments and post-processing
config, cli   run descriptions and the ``emtpop`` command
"""
from .integrate import IntegrationError, IntegratorConfig, integrate
from .particles import DensityField, ParticleEnsemble, PopulationModel, Rescaling
from .reduction import ReducedAdvection, build_reduced

__version__ = "0.1.0"

__all__ = [
    "IntegrationError",
    "IntegratorConfig",
    "integrate",
    "DensityField",
    "ParticleEnsemble",
    "PopulationModel",
    "Rescaling",
    "ReducedAdvection",
    "build_reduced",
]
