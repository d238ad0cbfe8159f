"""Pure-Python (numpy/scipy) greedy selection kernel.

Same contract and arithmetic order as the compiled ``_greedy`` module, so the
two agree bit-for-bit on selections.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

# utilities this close (relative) to the best one count as ties
TIE_RTOL = 1e-12


def _diversity(tfidf, binary, norms, set_sizes, post, log_post, rows, j, n_topics):
    out = np.empty((rows.size, 3))
    dot = tfidf[rows] @ tfidf[j].toarray().ravel()
    denom = norms[rows] * norms[j]
    zero = denom == 0
    cos = np.where(zero, 1.0, 1.0 - dot / np.where(zero, 1.0, denom))
    out[:, 0] = np.clip(cos, 0.0, 1.0)
    inter = binary[rows] @ binary[j].toarray().ravel()
    union = set_sizes[rows] + set_sizes[j] - inter
    empty = union == 0
    out[:, 1] = np.where(empty, 0.0, 1.0 - inter / np.where(empty, 1.0, union))
    kl = np.zeros(rows.size)
    for z in range(n_topics):
        kl += post[rows, z] * (log_post[rows, z] - log_post[j, z])
    kl = np.maximum(kl, 0.0)
    out[:, 2] = kl / (1.0 + kl)
    return out


def greedy_kernel(indptr, indices, data, norms, set_sizes, post, log_post,
                  rel_utility, epochs, id_rank, candidates, anchors, omega_d, m):
    """Greedy argmax selection of ``m`` rows out of ``candidates``.

    Returns ``(selected_rows, utilities, utility_evaluations, pair_evaluations)``.
    """
    n = norms.shape[0]
    n_terms = int(indices.max()) + 1 if indices.size else 0
    tfidf = sparse.csr_matrix((data, indices, indptr), shape=(n, n_terms))
    binary = sparse.csr_matrix((np.ones_like(data), indices, indptr), shape=(n, n_terms))
    n_topics = post.shape[1]
    w0, w1, w2 = (float(w) for w in omega_d)

    active = np.asarray(candidates, dtype=np.intp).copy()
    h = np.zeros((active.size, 3))
    has_anchor = False
    pair_evals = 0
    for a in anchors:
        div = _diversity(tfidf, binary, norms, set_sizes, post, log_post, active, int(a), n_topics)
        h = div if not has_anchor else np.minimum(h, div)
        has_anchor = True
        pair_evals += active.size

    selected, utilities = [], []
    evals = 0
    for _ in range(m):
        if active.size == 0:
            break
        u = rel_utility[active].copy()
        if has_anchor:
            u = u + h[:, 0] * w0 + h[:, 1] * w1 + h[:, 2] * w2
        evals += active.size
        top = u.max()
        tied = np.flatnonzero(u >= top - TIE_RTOL * (abs(top) if abs(top) > 1.0 else 1.0))
        if tied.size > 1:
            rows = active[tied]
            # newest first, then smallest doc_id rank
            order = np.lexsort((id_rank[rows], -epochs[rows]))
            pick = tied[order[0]]
        else:
            pick = tied[0]
        row = int(active[pick])
        selected.append(row)
        utilities.append(float(u[pick]))
        keep = np.ones(active.size, dtype=bool)
        keep[pick] = False
        active, h = active[keep], h[keep]
        if active.size:
            div = _diversity(tfidf, binary, norms, set_sizes, post, log_post, active, row, n_topics)
            h = div if not has_anchor else np.minimum(h, div)
            pair_evals += active.size
        has_anchor = True
    return np.asarray(selected, dtype=np.intp), np.asarray(utilities), evals, pair_evals
