"""Compiled trajectory-stepping kernels.

Both kernels advance a batch of trajectories through M fixed steps and
write state snapshots at requested step indices.  Per-step operators are
passed as small lookup tables plus per-step index arrays so that constant
and piecewise-constant schedules stay cache-resident; sampled schedules
degenerate to one table entry per step.

Trajectories are independent (``prange`` over the batch) and each writes
only its own output rows, so results cannot depend on thread count.
"""

import numpy as np
from numba import njit, prange

# Unitary stepper: psi <- exp(a + sum_j b_j * dW_j) psi with a = -i H dt and
# b_j = -i B_j, evaluated by an adaptive Taylor series applied to the state.
# The step generator norm is O(|H| dt + |B| sqrt(dt)), so the series reaches
# machine precision in ~10 terms; the result matches an eigendecomposition
# exponential to roundoff and conserves the norm to the same accuracy.
_TAYLOR_MAX_TERMS = 40
_TAYLOR_CUTOFF = 1e-17


@njit(cache=True, parallel=True)
def unitary_batch(a_tab, a_idx, b_tab, b_idx, dws, psi0, record_steps, out):
    """a_tab: (Sa,d,d) = -i*H_seg*dt; a_idx: (M,); b_tab: (C,Sb,d,d) = -i*B_seg;
    b_idx: (C,M); dws: (N,M,C); psi0: (d,); record_steps: sorted (R,) in [0,M];
    out: (N,R,d)."""
    n_traj = dws.shape[0]
    n_steps = a_idx.shape[0]
    n_chan = b_tab.shape[0]
    dim = psi0.shape[0]
    n_rec = record_steps.shape[0]
    for n in prange(n_traj):
        psi = psi0.copy()
        m = np.empty((dim, dim), dtype=np.complex128)
        term = np.empty(dim, dtype=np.complex128)
        nxt = np.empty(dim, dtype=np.complex128)
        r = 0
        while r < n_rec and record_steps[r] == 0:
            for c in range(dim):
                out[n, r, c] = psi[c]
            r += 1
        for k in range(n_steps):
            ak = a_tab[a_idx[k]]
            for i in range(dim):
                for c in range(dim):
                    m[i, c] = ak[i, c]
            for j in range(n_chan):
                w = dws[n, k, j]
                bj = b_tab[j, b_idx[j, k]]
                for i in range(dim):
                    for c in range(dim):
                        m[i, c] += bj[i, c] * w
            for i in range(dim):
                term[i] = psi[i]
            for it in range(1, _TAYLOR_MAX_TERMS):
                tmax = 0.0
                for i in range(dim):
                    acc = 0.0 + 0.0j
                    for c in range(dim):
                        acc += m[i, c] * term[c]
                    nxt[i] = acc / it
                for i in range(dim):
                    term[i] = nxt[i]
                    psi[i] = psi[i] + nxt[i]
                    mag = abs(nxt[i].real) + abs(nxt[i].imag)
                    if mag > tmax:
                        tmax = mag
                if tmax < _TAYLOR_CUTOFF:
                    break
            while r < n_rec and record_steps[r] == k + 1:
                for c in range(dim):
                    out[n, r, c] = psi[c]
                r += 1


@njit(cache=True, parallel=True)
def euler_maruyama_batch(drift_tab, drift_idx, b_tab, b_idx, dws, psi0, record_steps, out):
    """Raw Ito update without renormalization.

    drift_tab: (Sd,d,d) = I - (i*H_seg + sum_j gamma_j^2/2 * I) * dt;
    remaining arguments as in ``unitary_batch`` (b tables premultiplied by -i).
    """
    n_traj = dws.shape[0]
    n_steps = drift_idx.shape[0]
    n_chan = b_tab.shape[0]
    dim = psi0.shape[0]
    n_rec = record_steps.shape[0]
    for n in prange(n_traj):
        psi = psi0.copy()
        nxt = np.empty(dim, dtype=np.complex128)
        r = 0
        while r < n_rec and record_steps[r] == 0:
            for c in range(dim):
                out[n, r, c] = psi[c]
            r += 1
        for k in range(n_steps):
            dk = drift_tab[drift_idx[k]]
            for i in range(dim):
                acc = 0.0 + 0.0j
                for c in range(dim):
                    acc += dk[i, c] * psi[c]
                nxt[i] = acc
            for j in range(n_chan):
                w = dws[n, k, j]
                bj = b_tab[j, b_idx[j, k]]
                for i in range(dim):
                    acc = 0.0 + 0.0j
                    for c in range(dim):
                        acc += bj[i, c] * psi[c]
                    nxt[i] += acc * w
            for i in range(dim):
                psi[i] = nxt[i]
            while r < n_rec and record_steps[r] == k + 1:
                for c in range(dim):
                    out[n, r, c] = psi[c]
                r += 1
