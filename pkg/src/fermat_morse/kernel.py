"""Select the compiled kernel when available, else the numpy fallback.

Set ``FERMAT_MORSE_PURE=1`` to force the fallback.
"""

import os

from . import _kernel_py

BACKEND = "python"
_impl = _kernel_py
if os.environ.get("FERMAT_MORSE_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernel as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _kernel_py

field_jets = _impl.field_jets
metric_jet = _impl.metric_jet
metric_jet_many = _impl.metric_jet_many
local_geometry = _impl.local_geometry
rhs = _impl.rhs
integrate = _impl.integrate

MODE_GEODESIC = _kernel_py.MODE_GEODESIC
MODE_FERMAT_JACOBI = _kernel_py.MODE_FERMAT_JACOBI
MODE_SPACETIME_JACOBI = _kernel_py.MODE_SPACETIME_JACOBI
STATUS_OK = _kernel_py.STATUS_OK
state_size = _kernel_py.state_size
transition_state = _kernel_py.transition_state
