"""particle sampling with preconditioned regularized Wasserstein proximals
"""
__version__ = '0.1.0'
