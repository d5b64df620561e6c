"""Compiled single-chain kernels.

State is a set of flat arrays so that numba can update it in place:
``adj`` (uint8, N x N), ``deg`` (int64, N), ``stats`` (int64, [t_e, t_c]),
``elist`` (int32, max edges x 2) with ``epos`` (int32, N x N, -1 if absent)
for O(1) uniform edge selection. Random numbers are supplied by the caller
as a ``(steps, 3)`` float array so that the stream is numpy's generator.
"""

import numpy as np
from numba import njit

METROPOLIS = 0
TNT = 1
GIBBS = 2

# kind of vertex by degree: 0 isolate, 1 pendant, 2 concurrent
_CLASS = np.array([[0, 3, 1], [3, 5, 4], [1, 4, 2]], dtype=np.int64)


@njit(cache=True, nogil=True)
def _toggle(adj, deg, stats, elist, epos, i, j):
    if adj[i, j]:
        adj[i, j] = 0
        adj[j, i] = 0
        deg[i] -= 1
        deg[j] -= 1
        if deg[i] == 1:
            stats[1] -= 1
        if deg[j] == 1:
            stats[1] -= 1
        k = epos[i, j]
        last = stats[0] - 1
        li = elist[last, 0]
        lj = elist[last, 1]
        elist[k, 0] = li
        elist[k, 1] = lj
        epos[li, lj] = k
        epos[lj, li] = k
        epos[i, j] = -1
        epos[j, i] = -1
        stats[0] -= 1
    else:
        adj[i, j] = 1
        adj[j, i] = 1
        deg[i] += 1
        deg[j] += 1
        if deg[i] == 2:
            stats[1] += 1
        if deg[j] == 2:
            stats[1] += 1
        k = stats[0]
        elist[k, 0] = i
        elist[k, 1] = j
        epos[i, j] = k
        epos[j, i] = k
        stats[0] += 1


@njit(cache=True, nogil=True)
def _propose(adj, deg, stats, elist, pair_i, pair_j, n_dyads, theta_e, theta_c, kind, u0, u1):
    """Pick a dyad; return ``(i, j, present, cls, log acceptance ratio)``.

    For Gibbs the last entry is instead the log-odds of the edge being present.
    """
    n_edges = stats[0]
    if kind == TNT and n_edges > 0 and u1 < 0.5:
        k = int(u0 * n_edges)
        i = elist[k, 0]
        j = elist[k, 1]
    else:
        d = int(u0 * n_dyads)
        i = pair_i[d]
        j = pair_j[d]
    present = adj[i, j]
    di = deg[i] - present
    dj = deg[j] - present
    cls = _CLASS[min(di, 2), min(dj, 2)]
    npend = 0
    if di == 1:
        npend += 1
    if dj == 1:
        npend += 1
    logit = theta_e + theta_c * npend
    if kind == GIBBS:
        return i, j, present, cls, logit
    logr = -logit if present else logit
    if kind == TNT:
        if present:
            q_fwd = 0.5 / n_edges + 0.5 / n_dyads
            q_rev = 1.0 / n_dyads if n_edges == 1 else 0.5 / n_dyads
        else:
            q_fwd = 1.0 / n_dyads if n_edges == 0 else 0.5 / n_dyads
            q_rev = 0.5 / (n_edges + 1) + 0.5 / n_dyads
        logr += np.log(q_rev / q_fwd)
    return i, j, present, cls, logr


@njit(cache=True, nogil=True)
def _decide(kind, present, value, u2):
    if kind == GIBBS:
        want = u2 * (1.0 + np.exp(-value)) < 1.0
        return want != (present == 1)
    return value >= 0.0 or u2 < np.exp(value)


@njit(cache=True, nogil=True)
def run_trace(
    adj, deg, stats, elist, epos, pair_i, pair_j, theta_e, theta_c, kind, u,
    step0, thin, trace, hist, code, dyad_index, on_time, since, prop, acc,
):
    """Advance ``len(u)`` steps.

    Every ``thin``-th global step appends ``(step, t_e, t_c)`` to ``trace``
    (rows written are returned). ``hist`` (empty to disable) counts visits
    per graph code, tracked in ``code[0]``. ``on_time``/``since`` accumulate
    per-dyad time spent present. ``prop``/``acc`` tally formation proposals
    and acceptances by dyad class. Returns ``(rows, accepted)``.
    """
    n_dyads = pair_i.shape[0]
    rows = 0
    accepted = 0
    track_hist = hist.shape[0] > 0
    track_time = on_time.shape[0] > 0
    for s in range(u.shape[0]):
        step = step0 + s
        i, j, present, cls, value = _propose(
            adj, deg, stats, elist, pair_i, pair_j, n_dyads, theta_e, theta_c, kind, u[s, 0], u[s, 1]
        )
        ok = _decide(kind, present, value, u[s, 2])
        if present == 0:
            prop[cls] += 1
            if ok:
                acc[cls] += 1
        if ok:
            accepted += 1
            d = dyad_index[i, j]
            if track_time:
                if present:
                    on_time[d] += step - since[d]
                else:
                    since[d] = step
            if track_hist:
                code[0] ^= np.int64(1) << d
            _toggle(adj, deg, stats, elist, epos, i, j)
        if track_hist:
            hist[code[0]] += 1
        if (step + 1) % thin == 0 and rows < trace.shape[0]:
            trace[rows, 0] = step + 1
            trace[rows, 1] = stats[0]
            trace[rows, 2] = stats[1]
            rows += 1
    return rows, accepted


@njit(cache=True, nogil=True)
def run_until(
    adj, deg, stats, elist, epos, pair_i, pair_j, theta_e, theta_c, kind, u,
    step0, tc_target, every, n_acc, records,
):
    """Advance until ``t_c >= tc_target``, ``u`` is exhausted or ``records`` is full.

    Every ``every``-th accepted toggle (counting across calls via
    ``n_acc[0]``) is written to ``records`` as
    ``(step, i, j, formed, class, t_c before)``. Returns
    ``(steps used, records written, reached)``.
    """
    n_dyads = pair_i.shape[0]
    written = 0
    if stats[1] >= tc_target:
        return 0, 0, True
    for s in range(u.shape[0]):
        i, j, present, cls, value = _propose(
            adj, deg, stats, elist, pair_i, pair_j, n_dyads, theta_e, theta_c, kind, u[s, 0], u[s, 1]
        )
        if not _decide(kind, present, value, u[s, 2]):
            continue
        n_acc[0] += 1
        if n_acc[0] % every == 0:
            records[written, 0] = step0 + s + 1
            records[written, 1] = i
            records[written, 2] = j
            records[written, 3] = 1 - present
            records[written, 4] = cls
            records[written, 5] = stats[1]
            written += 1
        _toggle(adj, deg, stats, elist, epos, i, j)
        if stats[1] >= tc_target:
            return s + 1, written, True
        if written == records.shape[0]:
            return s + 1, written, False
    return u.shape[0], written, False
