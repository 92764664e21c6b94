"""hazardlab: simulation and asymptotic verification for kernel-mixture
random hazard rates driven by completely random measures."""

__version__ = "0.1.0"

from . import asymptotics, conditions, crm, kernels, montecarlo  # noqa: F401,E402
