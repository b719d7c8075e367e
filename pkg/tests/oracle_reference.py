"""Independent scalar re-implementation of the drop cost.

Deliberately written with plain Python loops and the math module so it
shares no code path with the package's vectorized implementation. Used
by the objective tests and the acceptance suite as the reference.
"""

import math


def scalar_drop_cost(p_dbm, g_d2d_db, g_enb_db, p_max_w, q_max_w, c_p, c_if, noise_w):
    """Return (sum_throughput, ct_p, ct_if, total) for one drop.

    p_dbm: K x N nested lists (dBm); g_d2d_db: K x K (entry [i][j] is
    tx_i -> rx_j); g_enb_db: K x C; caps in watts.
    """
    k = len(p_dbm)
    n = len(p_dbm[0])
    c = len(g_enb_db[0])
    log2 = math.log(2.0)

    pw = [[10.0 ** ((p_dbm[i][j] - 30.0) / 10.0) for j in range(n)] for i in range(k)]
    gl = [[10.0 ** (g_d2d_db[i][j] / 10.0) for j in range(k)] for i in range(k)]
    ge = [[10.0 ** (g_enb_db[i][j] / 10.0) for j in range(c)] for i in range(k)]

    sum_t = 0.0
    for rx in range(k):
        for ch in range(n):
            signal = pw[rx][ch] * gl[rx][rx]
            interference = 0.0
            for tx in range(k):
                if tx != rx:
                    interference += pw[tx][ch] * gl[tx][rx]
            sum_t += math.log1p(signal / (interference + noise_w)) / log2

    ct_p = 0.0
    for tx in range(k):
        over = sum(pw[tx]) - p_max_w
        ct_p += math.log1p(max(over, 0.0) / p_max_w) / log2

    ct_if = 0.0
    for enb in range(c):
        for ch in range(n):
            agg = 0.0
            for tx in range(k):
                agg += pw[tx][ch] * ge[tx][enb]
            ct_if += math.log1p(max(agg - q_max_w, 0.0) / q_max_w) / log2

    total = -sum_t + c_if * ct_if + c_p * ct_p
    return sum_t, ct_p, ct_if, total
