"""Elementwise helpers usable inside point functions.

Point functions may be evaluated on whole tiles (numpy arrays) or compiled
into scalar loops, so branching must go through :func:`where` instead of
``if``.  The compiled backend substitutes scalar versions with the same
results.
"""

import numpy as np

__all__ = ["where", "maximum", "minimum", "absolute"]


def where(cond, a, b):
    return np.where(cond, a, b)


def maximum(a, b):
    return np.maximum(a, b)


def minimum(a, b):
    return np.minimum(a, b)


def absolute(a):
    return np.abs(a)
