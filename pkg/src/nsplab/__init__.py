"""Pseudo-spectral laboratory for the compressible Navier-Stokes-Poisson system.

Modules map onto the pieces of the workflow:

    spectral    periodic grid, transforms, multipliers, Sobolev norms
    model       perturbation equations, closures, Poisson coupling
    symbol      per-wavenumber linear generator, propagators, radial norms
    integrator  ETD-RK4 / IMEX-CNAB2 time stepping, checkpoints
    energy      energy functionals, dissipation, identity residuals
    decay       power-law fits and theoretical decay exponents
    lemmas      numerical checks of the interpolation inequalities
    cli         the ``nsp`` command line runner
"""

__version__ = "0.1.0"
