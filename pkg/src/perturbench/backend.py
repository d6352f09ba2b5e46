"""Kernel backend selection.

The sliding-median, non-local-means and TV-denoising inner loops exist twice:
as a compiled Cython extension (perturbench._kernels) and as pure NumPy
(perturbench._kernels_np). The compiled version is picked when importable;
set PERTURBENCH_BACKEND=python or =compiled to force a choice. Both backends
implement the same algorithm with the same edge handling; see
benchmarks/bench_kernels.py for the speed comparison.
"""

from __future__ import annotations

import os

_choice = os.environ.get("PERTURBENCH_BACKEND", "auto")
if _choice not in ("auto", "compiled", "python"):
    raise RuntimeError(f"PERTURBENCH_BACKEND must be auto|compiled|python, got {_choice!r}")

if _choice == "python":
    from . import _kernels_np as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        from . import _kernels_np as _impl

        BACKEND = "python"

median_filter_2d = _impl.median_filter_2d
nlm_2d = _impl.nlm_2d
tv_chambolle_2d = _impl.tv_chambolle_2d


def get_backend() -> str:
    """Name of the active kernel backend ('compiled' or 'python')."""
    return BACKEND
