"""Fused per-element loops for the tanh derivative streams (numba).

Same arithmetic as ``autodiff._tanh_streams`` / ``_tanh_streams_backward``,
done in one pass over memory instead of a dozen temporaries.
"""
from __future__ import annotations

try:
    from numba import njit
except ImportError:  # pragma: no cover - numpy fallback is used instead
    njit = None

AVAILABLE = njit is not None

if AVAILABLE:

    @njit(cache=True)
    def tanh_streams_fwd(Z, H):
        S, N, W = Z.shape
        for n in range(N):
            for j in range(W):
                hh = H[0, n, j]
                s = 1.0 - hh * hh
                if S > 1:
                    z1 = Z[1, n, j]
                    z2 = Z[2, n, j]
                    H[1, n, j] = s * z1
                    H[2, n, j] = s * z2
                    H[3, n, j] = s * Z[3, n, j]
                    if S > 4:
                        ds = -2.0 * hh * s
                        H[4, n, j] = s * Z[4, n, j] + ds * z1 * z1
                        H[5, n, j] = s * Z[5, n, j] + ds * z2 * z2

    @njit(cache=True)
    def tanh_streams_bwd(G, H, Z, GZ):
        S, N, W = G.shape
        for n in range(N):
            for j in range(W):
                hh = H[0, n, j]
                s = 1.0 - hh * hh
                g0 = G[0, n, j]
                if S == 1:
                    GZ[0, n, j] = g0 * s
                    continue
                ds = -2.0 * hh * s
                z1 = Z[1, n, j]
                z2 = Z[2, n, j]
                g1 = G[1, n, j]
                g2 = G[2, n, j]
                g3 = G[3, n, j]
                acc = g0 * s + ds * (g1 * z1 + g2 * z2 + g3 * Z[3, n, j])
                gz1 = g1 * s
                gz2 = g2 * s
                if S > 4:
                    d2s = -2.0 * s * s + 4.0 * hh * hh * s
                    g4 = G[4, n, j]
                    g5 = G[5, n, j]
                    acc += g4 * (ds * Z[4, n, j] + d2s * z1 * z1)
                    acc += g5 * (ds * Z[5, n, j] + d2s * z2 * z2)
                    gz1 += 2.0 * ds * z1 * g4
                    gz2 += 2.0 * ds * z2 * g5
                    GZ[4, n, j] = g4 * s
                    GZ[5, n, j] = g5 * s
                GZ[0, n, j] = acc
                GZ[1, n, j] = gz1
                GZ[2, n, j] = gz2
                GZ[3, n, j] = g3 * s
