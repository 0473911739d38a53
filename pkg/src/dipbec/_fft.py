"""Thin wrappers around :mod:`scipy.fft` that honour a process-wide thread count."""

import os

import scipy.fft as _sf

THREADS_ENV = "DIPBEC_THREADS"

_workers = None


def _default_workers():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return None
    try:
        n = int(value)
    except ValueError:
        return None
    return n if n > 0 else None


def set_threads(n):
    """Set the number of FFT worker threads (``None`` restores the default)."""
    global _workers
    if n is not None and n < 1:
        raise ValueError("thread count must be a positive integer")
    _workers = n


def workers():
    return _workers if _workers is not None else _default_workers()


def fftn(a):
    return _sf.fftn(a, workers=workers())


def ifftn(a):
    return _sf.ifftn(a, workers=workers())


def rfftn(a):
    return _sf.rfftn(a, workers=workers())


def irfftn(a, shape):
    return _sf.irfftn(a, s=shape, workers=workers())
