"""
Sparse fixed-effects selection in linear mixed models by adaptive ridge
penalization of the profiled log-likelihood.
"""
__version__ = '0.1.0'
