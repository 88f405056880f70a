"""SLAM infrastructure toolkit.

Subpackages and modules:

* :mod:`slamkit.transform` — SO3/SE3/SIM3 types and batch kernels
* :mod:`slamkit.config` — hierarchical parameter tree and argument parsing
* :mod:`slamkit.messenger` — typed intra-process publish/subscribe bus
* :mod:`slamkit.camera` — pinhole and field-of-view projection models
* :mod:`slamkit.mapping` — frames, landmarks, pose graph, observation graph
* :mod:`slamkit.estimator` — closed-form multi-view solvers with RANSAC
* :mod:`slamkit.optimizer` — Levenberg-Marquardt graph optimization
* :mod:`slamkit.vocabulary` — hierarchical bag-of-words vocabulary
* :mod:`slamkit.dataset` — dataset readers and the synthetic generator
* :mod:`slamkit.evaluation` — trajectory accuracy metrics and reports
* :mod:`slamkit.cli` — command-line harness
"""

from .errors import SlamkitError

__version__ = "0.1.0"

__all__ = ["SlamkitError", "__version__"]
