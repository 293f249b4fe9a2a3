"""Pure-Python twin of the compiled forward-replay kernel.

Semantics must match latticecftp._fwdkernel.apply_events exactly; the two
backends are compared element-for-element by the test suite.
"""

from __future__ import annotations


def apply_events(state, ev_sites, ev_rules, nb_offsets, nb_weights, nb_counts,
                 tables, table_starts):
    """Apply the event sequence in place on the flattened extended box."""
    st = state.tolist()
    sites = ev_sites.tolist()
    rules = ev_rules.tolist()
    offs = nb_offsets.tolist()
    ws = nb_weights.tolist()
    cnts = nb_counts.tolist()
    tab = tables.tolist()
    starts = table_starts.tolist()
    for s, r in zip(sites, rules):
        idx = starts[r]
        row_off = offs[r]
        row_w = ws[r]
        for j in range(cnts[r]):
            idx += st[s + row_off[j]] * row_w[j]
        st[s] = tab[idx]
    state[:] = st
