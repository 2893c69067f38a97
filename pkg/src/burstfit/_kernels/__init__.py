"""Hot numerical kernels with a compiled core and a pure-numpy fallback.

The compiled Cython extension is preferred when it imports cleanly; otherwise
the numpy implementation is used. Set ``BURSTFIT_BACKEND`` to ``compiled``,
``python`` or ``auto`` (default) to override the selection. Both backends
perform the same floating-point operations in the same order, so results
match bit for bit.
"""

import os

_requested = os.environ.get("BURSTFIT_BACKEND", "auto").lower()

if _requested not in ("auto", "compiled", "python"):
    raise ValueError(
        f"BURSTFIT_BACKEND={_requested!r} not understood "
        "(expected 'auto', 'compiled' or 'python')"
    )

if _requested == "python":
    from . import _fallback as _impl

    BACKEND = "python"
else:
    try:
        from . import _compiled as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        from . import _fallback as _impl

        BACKEND = "python"

monomial_matrix = _impl.monomial_matrix
legendre_matrix = _impl.legendre_matrix
sa_block = _impl.sa_block

__all__ = ["BACKEND", "monomial_matrix", "legendre_matrix", "sa_block"]
