"""Quantum machine learning on brain connectivity networks.

Submodules: ``netdata`` (matrices, EVC), ``pca``, ``qsim`` (statevector
simulator), ``circuits`` (feature map, ansatz), ``optim`` (COBYLA), ``vqc``,
``kernel_svm``, ``stats``, ``synth``, ``pipeline`` and ``cli``.
"""

__version__ = "0.1.0"
