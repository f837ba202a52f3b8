"""Thin wrappers over :mod:`scipy.fft` with a process-wide worker count."""
import os

import scipy.fft as _sfft

_workers = int(os.environ.get("HALFFLOW_THREADS", "1") or 1)


def set_workers(k):
    global _workers
    _workers = max(int(k), 1)


def get_workers():
    return _workers


def rfftn(x, axes=None):
    return _sfft.rfftn(x, axes=axes, workers=_workers)


def irfftn(x, s, axes=None):
    return _sfft.irfftn(x, s=s, axes=axes, workers=_workers)


def fftn(x, axes=None, norm=None):
    return _sfft.fftn(x, axes=axes, norm=norm, workers=_workers)


def ifftn(x, axes=None, norm=None):
    return _sfft.ifftn(x, axes=axes, norm=norm, workers=_workers)
