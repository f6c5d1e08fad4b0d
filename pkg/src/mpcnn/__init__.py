"""Synthetic GNSS correlator-output generation and multipath detection.

Subpackages and modules:

- ``correlator``: closed-form I/Q correlator-output model
- ``datagen``: labeled snapshot/tap-series dataset generation and storage
- ``nn``: minimal trainable neural-network engine (compiled + NumPy kernels)
- ``model``: the MultipathCNN detector built on top of ``nn``
- ``svm``: SMO-trained RBF-SVM benchmark detector
- ``harness``: experiment campaigns and result emission
- ``cli``: command-line front door
"""

__version__ = "0.1.0"
