"""smtlab: a desk-scale numerical laboratory for rank-one matrix-tensor inference.

A planted signal on the sphere is observed through a noisy symmetric matrix
channel (variance delta2) and a noisy symmetric order-3 tensor channel
(variance delta3).  The package provides

* exact finite-N instances and energy/gradient evaluation (`smtlab.model`),
* Langevin and gradient-flow dynamics on the sphere (`smtlab.simulate`),
* the closed two-time correlation/response mean-field solver (`smtlab.dmft`),
* approximate message passing and its scalar state evolution (`smtlab.amp`),
* closed-form algorithmic threshold lines (`smtlab.theory`),
* a CLI that wires these into reproducible experiments (`smtlab.cli`).
"""

__version__ = "0.1.0"

from .model import ModelParams, Instance, generate_instance, hamiltonian, gradient, overlap

__all__ = [
    "ModelParams",
    "Instance",
    "generate_instance",
    "hamiltonian",
    "gradient",
    "overlap",
    "__version__",
]
