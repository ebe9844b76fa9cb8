"""Backend selection for the per-cell kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``MIXEDPIPE_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

python_backend = _kernels_py
compiled_backend = None

try:  # pragma: no cover - depends on the build
    from . import _kernels as compiled_backend  # type: ignore[no-redef]
except ImportError:
    compiled_backend = None

if compiled_backend is not None and os.environ.get("MIXEDPIPE_BACKEND", "").lower() != "python":
    backend = compiled_backend
else:
    backend = python_backend

BACKEND: str = backend.BACKEND
circle_alpha = backend.circle_alpha
section_state = backend.section_state
advance = backend.advance
