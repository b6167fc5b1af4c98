"""
q-Hermite, big q-Hermite and Al-Salam--Chihara polynomials, their densities
and Poisson--Mehler type kernels, with a harness that checks each kernel
identity by computing both sides independently.

Modules
-------
qcore     q-numbers, Pochhammer symbols, truncation policy, exact oracles
families  polynomial families by recurrence, special cases at q = 0 and 1
connect   connection coefficients and the bounds derived from them
measures  generating function, weights and orthogonality densities
kernels   kernel series, closed products and inversion identities
verify    quadrature and the identity catalog
cli       command-line front end
"""
from __future__ import annotations

from .connect import *  # noqa: F401,F403
from .families import *  # noqa: F401,F403
from .kernels import *  # noqa: F401,F403
from .measures import *  # noqa: F401,F403
from .qcore import *  # noqa: F401,F403
from .verify import *  # noqa: F401,F403
from . import cli, connect, families, kernels, measures, qcore, verify

__version__ = "0.1.0"
