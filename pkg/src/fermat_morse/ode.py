"""Dense output for kernel trajectories.

The kernel integrator returns its accepted nodes together with the
right-hand side at each node.  Between nodes the state is reconstructed by
cubic Hermite interpolation.  A chart switch is stored as two nodes sharing
the same parameter value, so every interval of positive length lies in a
single chart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DenseTrajectory:
    s: np.ndarray        # (N,) nondecreasing node parameters
    y: np.ndarray        # (N, d) states
    f: np.ndarray        # (N, d) derivatives
    charts: np.ndarray   # (N,) chart id per node
    status: int = 0

    @property
    def s0(self) -> float:
        return float(self.s[0])

    @property
    def s1(self) -> float:
        return float(self.s[-1])

    def switch_indices(self) -> np.ndarray:
        """Indices ``i`` where node ``i+1`` repeats node ``i`` in another chart."""
        same = np.diff(self.s) == 0.0
        return np.nonzero(same & (np.diff(self.charts) != 0))[0]

    def _interval(self, t: float) -> int:
        i = int(np.searchsorted(self.s, t, side="right")) - 1
        return min(max(i, 0), len(self.s) - 2)

    def __call__(self, t):
        """Return ``(states, charts)`` at the parameters ``t`` (scalar or array)."""
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((ts.size, self.y.shape[1]))
        ch = np.empty(ts.size, dtype=np.int64)
        for k, tk in enumerate(ts):
            if len(self.s) == 1:
                out[k], ch[k] = self.y[0], self.charts[0]
                continue
            i = self._interval(tk)
            h = self.s[i + 1] - self.s[i]
            if h == 0.0:
                out[k], ch[k] = self.y[i + 1], self.charts[i + 1]
                continue
            u = (tk - self.s[i]) / h
            h00 = (1 + 2 * u) * (1 - u) ** 2
            h10 = u * (1 - u) ** 2
            h01 = u * u * (3 - 2 * u)
            h11 = u * u * (u - 1)
            out[k] = (h00 * self.y[i] + h10 * h * self.f[i]
                      + h01 * self.y[i + 1] + h11 * h * self.f[i + 1])
            ch[k] = self.charts[i + 1]
        if scalar:
            return out[0], int(ch[0])
        return out, ch

    def at_node(self, t: float, atol: float = 0.0):
        """Return the last stored node with parameter within ``atol`` of ``t``."""
        idx = np.nonzero(np.abs(self.s - t) <= atol)[0]
        if idx.size == 0:
            raise KeyError(f"no node at s={t}")
        i = int(idx[-1])
        return self.y[i], int(self.charts[i])
