"""Curve datasets for the packet-size, throughput and protocol-comparison figures."""
from __future__ import annotations

import numpy as np

from .fbl_model import PcModel, make_channel
from .qapprox import (linear_opt_k, linear_throughput, quad_opt_k, quad_throughput)
from .throughput import (LinkSet, baf_relay_throughput, cc_throughput, nc_throughput,
                         optimize_k)

FIGURES = ("fig2", "fig3", "fig4a", "fig4b", "fig6a", "fig6b")

TRIPLE_A = (0.2, 0.35, 1.0)
TRIPLE_B = (0.2, 0.5, 1.0)
BLOCKLENGTHS = tuple(range(50, 2001, 50))
FIXED_N = 1000
BATCH_SIZES = (1, 2, 3, 4)


def _packet_size_rows(model):
    ch = make_channel(1.0)
    for n in BLOCKLENGTHS:
        k_star, u_star = optimize_k(n, ch, model)
        k_lin = linear_opt_k(n, ch)
        k_quad = quad_opt_k(n, ch)
        yield n, k_star, u_star, k_lin, linear_throughput(k_lin, n, ch), \
            k_quad, quad_throughput(k_quad, n, ch)


def figure_dataset(figure: str, model: PcModel = PcModel.SECOND):
    """Return ``(comments, header, rows)`` for one figure."""
    if figure not in FIGURES:
        raise ValueError(f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}")
    comments = [f"figure={figure}", f"model={PcModel(model).value}"]

    if figure in ("fig2", "fig3"):
        comments += ["snr=1", f"n={BLOCKLENGTHS[0]}:{BLOCKLENGTHS[-1]}:50",
                     "linear delta0=0.5 delta1=1.545", "quadratic theta0=0.5 theta1=2.35"]
        rows = list(_packet_size_rows(model))
        if figure == "fig2":
            header = ["n", "k_exhaustive", "k_linear", "k_quadratic"]
            return comments, header, [(r[0], r[1], r[3], r[5]) for r in rows]
        header = ["n", "u_exhaustive", "u_linear", "u_quadratic"]
        return comments, header, [(r[0], r[2], r[4], r[6]) for r in rows]

    triple = TRIPLE_A if figure.endswith("a") else TRIPLE_B
    links = LinkSet.from_snrs(*triple)
    comments += [f"snr_sd={triple[0]}", f"snr_sr={triple[1]}", f"snr_rd={triple[2]}",
                 f"n={FIXED_N}", f"k=1:{FIXED_N}:1"]
    k = np.arange(1, FIXED_N + 1)
    cols = [k, nc_throughput(k, FIXED_N, links, model), cc_throughput(k, FIXED_N, links, model)]
    header = ["k", "u_nc", "u_cc"]
    if figure.startswith("fig6"):
        comments.append("relay_arm=published")
        for L in BATCH_SIZES:
            cols.append(baf_relay_throughput(k, L, FIXED_N, links, model)[0])
            header.append(f"u_baf_L{L}")
    return comments, header, list(zip(*cols))
