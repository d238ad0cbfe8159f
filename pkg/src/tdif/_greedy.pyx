# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled greedy selection kernel (see ``_greedy_py`` for the reference version)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, fabs

# utilities this close (relative) to the best one count as ties
DEF TIE_RTOL = 1e-12

cnp.import_array()


cdef inline void _scatter(const long long[::1] indptr, const long long[::1] indices,
                          const double[::1] data, long long j, double[::1] dense,
                          double[::1] mark, double value) noexcept nogil:
    cdef long long k
    for k in range(indptr[j], indptr[j + 1]):
        dense[indices[k]] = data[k] * value
        mark[indices[k]] = value


cdef void _update(const long long[::1] indptr, const long long[::1] indices,
                  const double[::1] data, const double[::1] norms, const double[::1] set_sizes,
                  const double[:, ::1] post, const double[:, ::1] log_post,
                  const long long[::1] active, long long n_active, long long j,
                  double[::1] dense, double[::1] mark, double[:, ::1] h, bint first) noexcept nogil:
    cdef long long a, i, k, z
    cdef long long n_topics = post.shape[1]
    cdef double dot, inter, denom, union_, cos, jac, kl, v
    for a in range(n_active):
        i = active[a]
        dot = 0.0
        inter = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            dot = dot + data[k] * dense[indices[k]]
            inter = inter + mark[indices[k]]
        denom = norms[i] * norms[j]
        if denom == 0.0:
            cos = 1.0
        else:
            cos = 1.0 - dot / denom
        if cos < 0.0:
            cos = 0.0
        elif cos > 1.0:
            cos = 1.0
        union_ = set_sizes[i] + set_sizes[j] - inter
        if union_ == 0.0:
            jac = 0.0
        else:
            jac = 1.0 - inter / union_
        kl = 0.0
        for z in range(n_topics):
            kl = kl + post[i, z] * (log_post[i, z] - log_post[j, z])
        if kl < 0.0:
            kl = 0.0
        v = kl / (1.0 + kl)
        if first:
            h[a, 0] = cos
            h[a, 1] = jac
            h[a, 2] = v
        else:
            if cos < h[a, 0]:
                h[a, 0] = cos
            if jac < h[a, 1]:
                h[a, 1] = jac
            if v < h[a, 2]:
                h[a, 2] = v


def greedy_kernel(indptr, indices, data, norms, set_sizes, post, log_post,
                  rel_utility, epochs, id_rank, candidates, anchors, omega_d, long long m):
    """Greedy argmax selection of ``m`` rows out of ``candidates``.

    Returns ``(selected_rows, utilities, utility_evaluations, pair_evaluations)``.
    """
    cdef const long long[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const long long[::1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef const double[::1] dt = np.ascontiguousarray(data, dtype=np.float64)
    cdef const double[::1] nm = np.ascontiguousarray(norms, dtype=np.float64)
    cdef const double[::1] ss = np.ascontiguousarray(set_sizes, dtype=np.float64)
    cdef const double[:, ::1] ps = np.ascontiguousarray(post, dtype=np.float64)
    cdef const double[:, ::1] lp = np.ascontiguousarray(log_post, dtype=np.float64)
    cdef const double[::1] rel = np.ascontiguousarray(rel_utility, dtype=np.float64)
    cdef const long long[::1] ep = np.ascontiguousarray(epochs, dtype=np.int64)
    cdef const long long[::1] ir = np.ascontiguousarray(id_rank, dtype=np.int64)
    cdef long long[::1] active = np.array(candidates, dtype=np.int64, copy=True).reshape(-1)
    cdef const long long[::1] anc = np.ascontiguousarray(anchors, dtype=np.int64).reshape(-1)
    cdef double w0 = omega_d[0], w1 = omega_d[1], w2 = omega_d[2]

    cdef long long n_terms = (int(np.max(indices)) + 1) if len(indices) else 1
    cdef double[::1] dense = np.zeros(n_terms)
    cdef double[::1] mark = np.zeros(n_terms)
    cdef long long n_active = active.shape[0]
    cdef double[:, ::1] h = np.zeros((max(n_active, 1), 3))
    cdef bint has_anchor = False
    cdef long long pair_evals = 0, evals = 0
    cdef long long a, t, step, best, row
    cdef double u, top, floor
    cdef double[::1] ub = np.zeros(max(n_active, 1))

    sel = np.empty(m if m > 0 else 0, dtype=np.int64)
    uts = np.empty(m if m > 0 else 0, dtype=np.float64)
    cdef long long[::1] sel_v = sel
    cdef double[::1] uts_v = uts
    cdef long long n_sel = 0

    with nogil:
        for t in range(anc.shape[0]):
            _scatter(ip, ix, dt, anc[t], dense, mark, 1.0)
            _update(ip, ix, dt, nm, ss, ps, lp, active, n_active, anc[t], dense, mark, h, not has_anchor)
            _scatter(ip, ix, dt, anc[t], dense, mark, 0.0)
            has_anchor = True
            pair_evals += n_active

        for step in range(m):
            if n_active == 0:
                break
            top = -INFINITY
            for a in range(n_active):
                u = rel[active[a]]
                if has_anchor:
                    u = u + h[a, 0] * w0 + h[a, 1] * w1 + h[a, 2] * w2
                ub[a] = u
                evals += 1
                if u > top:
                    top = u
            floor = top - TIE_RTOL * (fabs(top) if fabs(top) > 1.0 else 1.0)
            best = -1
            for a in range(n_active):
                if ub[a] < floor:
                    continue
                row = active[a]
                if best < 0 or ep[row] > ep[active[best]] or (ep[row] == ep[active[best]]
                                                               and ir[row] < ir[active[best]]):
                    best = a
            row = active[best]
            sel_v[n_sel] = row
            uts_v[n_sel] = ub[best]
            n_sel += 1
            # order-preserving removal keeps both kernels scanning rows identically
            for a in range(best, n_active - 1):
                active[a] = active[a + 1]
                h[a, 0] = h[a + 1, 0]
                h[a, 1] = h[a + 1, 1]
                h[a, 2] = h[a + 1, 2]
            n_active -= 1
            if n_active > 0:
                _scatter(ip, ix, dt, row, dense, mark, 1.0)
                _update(ip, ix, dt, nm, ss, ps, lp, active, n_active, row, dense, mark, h, not has_anchor)
                _scatter(ip, ix, dt, row, dense, mark, 0.0)
                pair_evals += n_active
            has_anchor = True

    return sel[:n_sel].astype(np.intp), uts[:n_sel].copy(), evals, pair_evals
