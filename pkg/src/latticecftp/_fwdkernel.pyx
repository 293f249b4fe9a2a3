# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled inner loop for forward event replay on a flattened box.

Exactly mirrors latticecftp._fwd_py.apply_events; the two are interchangeable
and compared by tests and by benchmarks/bench_forward.py.
"""

import numpy as np

cimport numpy as cnp


def apply_events(cnp.int8_t[::1] state,
                 cnp.int64_t[::1] ev_sites,
                 cnp.int64_t[::1] ev_rules,
                 cnp.int64_t[:, ::1] nb_offsets,
                 cnp.int64_t[:, ::1] nb_weights,
                 cnp.int64_t[::1] nb_counts,
                 cnp.int8_t[::1] tables,
                 cnp.int64_t[::1] table_starts):
    """Apply the event sequence in place.

    state        flattened extended box, margin cells included and frozen
    ev_sites     flat index of each event's target (interior cells only)
    ev_rules     rule index per event
    nb_offsets   per rule, flat-index offsets of its neighborhood reads
    nb_weights   per rule, radix weights matching the table layout
    nb_counts    per rule, neighborhood size
    tables       concatenated radix lookup tables
    table_starts per rule, offset of its table in `tables`
    """
    cdef Py_ssize_t k, j, n = ev_sites.shape[0]
    cdef cnp.int64_t s, r, idx, cnt
    with nogil:
        for k in range(n):
            s = ev_sites[k]
            r = ev_rules[k]
            idx = table_starts[r]
            cnt = nb_counts[r]
            for j in range(cnt):
                idx += state[s + nb_offsets[r, j]] * nb_weights[r, j]
            state[s] = tables[idx]
