"""Compiled inner loop of the BP solver."""

import numba


@numba.njit(cache=True)
def run_block(psi, nu, mu, nu_prev, iterations):
    """Run full iterations in place, copying ``nu`` into ``nu_prev`` before the last one.

    Row-major, two-pass per half iteration; every ``mu`` is computed from the
    old ``nu`` before any ``nu`` is refreshed. Denominators are at least one
    in exact arithmetic and are clamped there against cancellation.
    """
    n, m = psi.shape
    for k in range(iterations):
        if k == iterations - 1:
            nu_prev[:, :] = nu
        for i in range(n):
            s = 1.0
            for j in range(m):
                s += psi[i, j] * nu[i, j]
            for j in range(m):
                mu[i, j] = psi[i, j] / max(s - psi[i, j] * nu[i, j], 1.0)
        for j in range(m):
            s = 1.0
            for i in range(n):
                s += mu[i, j]
            for i in range(n):
                nu[i, j] = 1.0 / max(s - mu[i, j], 1.0)
