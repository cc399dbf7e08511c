"""Diffusion and transport semigroups on networks with general boundary coupling."""

from .diffres import solve_resolvent, solve_resolvent_greiner
from .errors import (BranchCut, InconsistentRates, InvalidMu, NearSpectrum, NetsemiError,
                     NoContraction, NoConvergence, NotViolating, OutOfDomain,
                     SeriesDiverges, SinkPresent, ValidationError)
from .evolve import diffusion_step, euler_exponential, observables, transport_evolve
from .gridfn import Grid, NetworkState, PiecewiseLinear
from .netmodel import DiffusionCoupling, NetworkGraph, TransportCoupling
from .posit import (check_diffusion_positivity, check_transport_positivity,
                    diffusion_pmp_witness, transport_negativity_witness)
from .spectral import char_det_diffusion, char_det_transport, find_roots
from .transres import solve_resolvent_transport

__version__ = "0.1.0"
