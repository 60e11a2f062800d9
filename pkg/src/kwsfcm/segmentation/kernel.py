"""Kernel functions on scalar intensities.

gaussian_rbf: K(x, y) = exp(-(|x - y| ** a) ** b / sigma ** 2), in (0, 1] with K(x, x) = 1.
polynomial:   K(x, y) = (x * y + 1) ** p.

Both accept numpy arrays and broadcast. The kernel distance 1 - K(x, y) is what the clustering
objectives minimise; it is only guaranteed non-negative for gaussian_rbf.
"""

import numpy as np

from ..models.params import KernelKind, KernelParams


def kernel_eval(x, y, params: KernelParams):
    """Evaluate the kernel elementwise. Returns a float for scalar inputs."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if params.kind == KernelKind.POLYNOMIAL:
        result = (x * y + 1.0) ** params.p
    else:
        result = np.exp(-((np.abs(x - y) ** params.a) ** params.b) / params.sigma**2)
    return float(result) if result.ndim == 0 else result


def kernel_distance(x, y, params: KernelParams):
    """1 - K(x, y)."""
    return 1.0 - kernel_eval(x, y, params)
