"""Compiled slot loop for :mod:`fblmac.netsim`."""
import numba
import numpy as np

NC, CC, BAF_RELAY, BAF_SOURCE = 0, 1, 2, 3

# uniform columns, consumed in this order every slot
U_ARR_A, U_ARR_B, U_SCHED, U_SD, U_SR, U_RD = range(6)
N_DRAWS = 6

# state: queues, then counters
QA, QB, QAR, QBR = 0, 1, 2, 3
ARRIVED, DELIVERED, DELIVERED_MEASURED = 4, 5, 6
GRANT_A, GRANT_B, IDLE_A, IDLE_B = 7, 8, 9, 10
STATE_LEN = 11


@numba.njit(cache=True, nogil=True)
def run_chunk(u, t0, warmup, protocol, lam_a, lam_b, omega_a, L,
              p_sd, p_sr, p_rd, saturated, state, queue_sums, window_sums, window_len):
    """Advance the network through ``u.shape[0]`` slots.

    ``p_sd`` / ``p_sr`` are the source-link success probabilities for the
    payload the source actually sends; ``p_rd`` is for the relay payload.
    ``t0`` is the global index of the first slot in ``u``.  Post-warmup
    statistics go to ``queue_sums`` (per queue) and ``window_sums``
    (total backlog per window of ``window_len`` measured slots).
    """
    src_batch = L if protocol == BAF_SOURCE else 1
    relay_batch = L if protocol == BAF_RELAY else 1
    for i in range(u.shape[0]):
        t = t0 + i
        measured = t >= warmup

        if saturated or u[i, U_ARR_A] < lam_a:
            state[QA] += 1
            state[ARRIVED] += 1
        if saturated or u[i, U_ARR_B] < lam_b:
            state[QB] += 1
            state[ARRIVED] += 1

        if u[i, U_SCHED] < omega_a:
            src, rel = QA, QAR
            grant, idle = GRANT_A, IDLE_A
        else:
            src, rel = QB, QBR
            grant, idle = GRANT_B, IDLE_B

        delivered = 0
        if measured:
            state[grant] += 1
        if state[src] >= src_batch:
            if u[i, U_SD] < p_sd:
                state[src] -= src_batch
                delivered = src_batch
            elif protocol != NC and u[i, U_SR] < p_sr:
                state[src] -= src_batch
                state[rel] += src_batch
        else:
            if measured:
                state[idle] += 1
            if protocol != NC and state[rel] >= relay_batch:
                if u[i, U_RD] < p_rd:
                    state[rel] -= relay_batch
                    delivered = relay_batch

        state[DELIVERED] += delivered
        if measured:
            state[DELIVERED_MEASURED] += delivered
            backlog = state[QA] + state[QB] + state[QAR] + state[QBR]
            for q in range(4):
                queue_sums[q] += state[q]
            w = (t - warmup) // window_len
            if w < window_sums.shape[0]:
                window_sums[w] += backlog


def new_state():
    return np.zeros(STATE_LEN, dtype=np.int64)
