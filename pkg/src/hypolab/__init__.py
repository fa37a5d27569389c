"""Heat kernels, spectra and functional inequalities on sub-Riemannian model spaces."""
__version__ = "0.1.0"
