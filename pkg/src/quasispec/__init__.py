"""quasispec: numerics for quasiperiodic Schrodinger operators.

Transfer-matrix cocycles, Lyapunov-exponent estimation, rational-approximant
band spectra, and convergence experiments for the measure of the spectrum.
"""

__version__ = "0.1.0"
