# -*- coding: utf-8 -*-
"""Utility functions.
"""
import numpy as np


__all__ = ['make_rng', 'randn', 'finite_difference_gradient', 'axpy']


def make_rng(seed, *keys):
    """Create an independent random generator for (seed, keys).

    Streams are derived with :class:`numpy.random.SeedSequence`, so the same
    (seed, keys) always gives the same draws and different keys never share
    a stream.

    Args:
        seed (int): base seed.
        *keys (ints): stream identifiers, e.g. the iteration index.

    Returns:
        numpy.random.Generator.

    """
    entropy = [int(seed)] + [int(k) for k in keys]
    if any(e < 0 for e in entropy):
        raise ValueError('seed and keys must be nonnegative, got {}'.format(
            entropy))

    return np.random.default_rng(np.random.SeedSequence(entropy))


def randn(shape, scale=1, rng=None):
    """Create random Gaussian array.

    Args:
        shape (tuple of ints): Output shape.
        scale (float): Standard deviation.
        rng (None or numpy.random.Generator): random stream.

    Returns:
        array: Random Gaussian array.

    """
    if rng is None:
        rng = np.random.default_rng()

    return rng.normal(size=shape, scale=scale)


def finite_difference_gradient(f, x, step=1e-6):
    """Central finite-difference gradient of a scalar function.

    The step for coordinate i is ``step * (1 + |x_i|)``.

    Args:
        f (function): x -> scalar.
        x (array): point, 1-D.
        step (float): relative step.

    Returns:
        array: gradient estimate with the shape of x.

    """
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        h = step * (1 + abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (f(x + e) - f(x - e)) / (2 * h)

    return grad


def axpy(y, a, x):
    """Compute y = a * x + y.

    Args:
        y (array): Output array.
        a (scalar or array): Input scalar.
        x (array): Input array.

    """
    y += a * x
