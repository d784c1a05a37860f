"""Numerical verification of the interpolation formula for the Euler characteristic.

Modules: ``exterior`` (bi-forms), ``clifford`` (Clifford-module matrices and
supertraces), ``geometry`` (charts, curvature, frame data), ``integrand``
(alpha_j densities), ``quadrature``, ``evaluate`` (manifold integrals),
``morse`` (Poincare-Hopf, Morse-Bott, Gauss equation), ``oscillator`` (Mehler
kernel) and ``cli``.
"""

__version__ = "0.1.0"
