"""Select the compiled kernel core when available.

Set ``KBILINEAR_PURE=1`` to force the numpy fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
kernels = _kernels_py

if not os.environ.get("KBILINEAR_PURE"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        kernels = _ckernels
        BACKEND = "cython"

radial = kernels.radial
pairwise_distances = kernels.pairwise_distances
cross_kernel = kernels.cross_kernel
min_distances = kernels.min_distances
