"""Hot kernels with a compiled backend and a pure-Python fallback.

The compiled extension (``_fast``) is used when it imports; otherwise the
numpy implementation in ``_pure`` takes over.  Set ``METASELECT_BACKEND=pure``
to force the fallback.
"""
import logging
import os

from metaselect.kernels import _pure

logger = logging.getLogger(__name__)

_requested = os.environ.get("METASELECT_BACKEND", "auto").lower()

_compiled = None
if _requested != "pure":
    try:
        import metaselect.kernels._fast as _compiled
    except ImportError:  # extension not built
        if _requested == "fast":
            raise
        logger.debug("compiled kernels unavailable, using pure-Python fallback")

_impl = _compiled if _compiled is not None else _pure
BACKEND = "fast" if _compiled is not None else "pure"

build_tree = _impl.build_tree
tree_apply = _impl.tree_apply
rbf_solve = _impl.rbf_solve


def backends():
    """Map of available backend name to module, compiled first."""
    found = {}
    if _compiled is not None:
        found["fast"] = _compiled
    found["pure"] = _pure
    return found
