"""Backend selection for the numerical inner loops.

The compiled module ``dpknock._ckernels`` is used when it was built at
install time. Setting ``DPKNOCK_PURE=1`` in the environment forces the
numpy fallback, which is also used automatically when the extension is
missing. Both backends expose the same four functions:

``knockoff_threshold(w, q, offset)``
    Smallest positive ``|w_j|`` whose estimated false discovery
    proportion is at most ``q``; ``inf`` when none qualifies.
``peel(scores, noise)``
    Iterated argmax of ``scores + noise[j]`` over surviving indices, one
    row of ``noise`` per round.
``sgd_pass(xb, y, lam, c, l2, r_beta)``
    One projected SGD pass over the rows of ``xb`` for ridge loss.
``hsic_columns(kc, cols, bandwidths)``
    V-statistic HSIC of each column of ``cols`` (Gaussian kernel, one
    bandwidth per column) against a response whose doubly-centred Gram
    matrix is ``kc``.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("DPKNOCK_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

knockoff_threshold = _impl.knockoff_threshold
peel = _impl.peel
sgd_pass = _impl.sgd_pass
hsic_columns = _impl.hsic_columns


def get_backend(name):
    """Return the kernel module for ``name`` ('python' or 'cython')."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
