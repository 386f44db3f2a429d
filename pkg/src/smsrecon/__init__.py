"""Multiband MRI reconstruction toolkit.

Submodules: operators (measurement model), simulate (synthetic data),
grappa (k-space interpolation and band fill), diffusion (schedules and
denoisers), sampler (guided reverse diffusion), baselines (classical
solvers), metrics, data_io (file formats), config, cli.
"""

__version__ = "0.1.0"
