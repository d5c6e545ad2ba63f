# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled slot loop. Semantics mirror _kernel_py.run_block statement
for statement; both consume the same slot-indexed random arrays, so the
two kernels produce identical trajectories and metrics.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF POL_SR = 0
DEF POL_MW = 1
DEF POL_GREEDY = 2
DEF POL_MWL1 = 3

DEF R_HOLDER = 0
DEF R_PKTS = 1
DEF R_INITSLOT = 2

DEF C_FAILED_SAT = 0
DEF C_INIT_TOTAL = 1
DEF C_INIT_AVAIL = 2
DEF C_EPOCHS = 3
DEF C_REC_N = 4


def run_block(ks, const unsigned char[::1] avail, const double[::1] u_pol,
              const double[::1] u_pkt, const double[::1] u_mob,
              long t0, long n):
    """Advance the simulation by n slots starting at global slot t0."""
    cdef long n_cells = ks.n_cells
    cdef long n_nodes = ks.n_nodes
    cdef long sat_idx = ks.sat_idx
    cdef int pol_kind = ks.pol_kind
    cdef int allow_idle = ks.allow_idle
    cdef long burn = ks.burn
    cdef double beta = ks.beta
    cdef double alpha_total = ks.alpha_total
    cdef int rec_on = ks.rec_on

    cdef const double[::1] alpha = ks.alpha
    cdef const double[::1] sqrt_alpha = ks.sqrt_alpha
    cdef const long[::1] kind = ks.kind
    cdef const long[::1] l = ks.l
    cdef const double[::1] p = ks.p
    cdef const double[::1] sqrt_p = ks.sqrt_p
    cdef const long[::1] home = ks.home
    cdef const long[::1] uav_slot = ks.uav_slot
    cdef const unsigned char[:, ::1] cov = ks.cov
    cdef const long[::1] nbr_indptr = ks.nbr_indptr
    cdef const long[::1] nbr_idx = ks.nbr_idx
    cdef const long[::1] route_indptr = ks.route_indptr
    cdef const long[::1] route_cells = ks.route_cells
    cdef const double[::1] mu_a = ks.mu_a
    cdef const double[::1] mu_u = ks.mu_u
    cdef const double[::1] nu = ks.nu
    cdef long[::1] b = ks.b
    cdef long[::1] seg_start = ks.seg_start
    cdef long[::1] cum_b = ks.cum_b
    cdef long[::1] last_complete = ks.last_complete
    cdef unsigned char[::1] snap = ks.snap
    cdef double[::1] debts = ks.debts
    cdef long[::1] regs = ks.regs
    cdef long[::1] uav_pos = ks.uav_pos
    cdef long[::1] uav_route_pos = ks.uav_route_pos
    cdef double[::1] peak_sum = ks.peak_sum
    cdef long[::1] peak_cnt = ks.peak_cnt
    cdef double[::1] w_sum = ks.w_sum
    cdef double[::1] s_sum = ks.s_sum
    cdef long[::1] d_cnt = ks.d_cnt
    cdef long[::1] y_cnt = ks.y_cnt
    cdef long[::1] ctr = ks.ctr
    cdef long[::1] rec_cell = ks.rec_cell
    cdef long[::1] rec_w = ks.rec_w
    cdef long[::1] rec_s = ks.rec_s
    cdef long[::1] rec_peak = ks.rec_peak

    cdef long holder = regs[R_HOLDER]
    cdef long pkts = regs[R_PKTS]
    cdef long init_slot = regs[R_INITSLOT]

    cdef long i, t, k, kk, m, kd, row, s, rl, rp, pos, deg, r
    cdef long s_now, wait, peak, s0
    cdef int m_avail
    cdef double u, acc, total_wa, best, score, cov_wa, cov_term
    cdef double a_m, wa, pk, xk
    cdef double NEG_INF = -np.inf

    for i in range(n):
        t = t0 + i
        m_avail = avail[i]

        # a held satellite channel breaks the moment availability drops
        if holder >= 0 and holder == sat_idx and m_avail == 0:
            if t >= burn:
                ctr[C_FAILED_SAT] += 1
            if pol_kind == POL_MW:
                for kk in range(n_nodes):
                    debts[kk] += nu[kk]
            holder = -1

        if holder < 0:
            # decision slot
            ctr[C_EPOCHS] += 1
            k = -1
            if pol_kind == POL_SR:
                u = u_pol[i]
                acc = 0.0
                if m_avail:
                    for kk in range(n_nodes):
                        acc += mu_a[kk]
                        if u < acc:
                            k = kk
                            break
                else:
                    for kk in range(n_nodes):
                        acc += mu_u[kk]
                        if u < acc:
                            k = kk
                            break
            else:
                total_wa = 0.0
                for m in range(n_cells):
                    total_wa += alpha[m] * (t + b[m])
                best = NEG_INF
                for kk in range(n_nodes):
                    if kk == sat_idx and m_avail == 0:
                        continue
                    kd = kind[kk]
                    cov_wa = 0.0
                    if pol_kind == POL_MW:
                        cov_term = 0.0
                        pk = p[kk]
                        if kd == 0:
                            m = home[kk]
                            a_m = <double> (t + b[m])
                            wa = alpha[m] * a_m
                            cov_wa = wa
                            cov_term = wa * (a_m + 2.0 - 2.0 / pk)
                        elif kd == 1:
                            row = uav_slot[kk] * n_cells + uav_pos[uav_slot[kk]]
                            for m in range(n_cells):
                                if cov[row, m]:
                                    a_m = <double> (t + b[m])
                                    wa = alpha[m] * a_m
                                    cov_wa += wa
                                    cov_term += wa * (a_m + 2.0 - 2.0 / pk)
                        else:
                            for m in range(n_cells):
                                a_m = <double> (t + b[m])
                                wa = alpha[m] * a_m
                                cov_wa += wa
                                cov_term += wa * (a_m + 2.0 - 2.0 / pk)
                        xk = debts[kk]
                        if xk < 0.0:
                            xk = 0.0
                        score = (beta * pk * xk + pk * cov_term
                                 - 2.0 * l[kk] * (total_wa - cov_wa)
                                 - l[kk] * (l[kk] + pk - 1.0) / pk * alpha_total)
                    elif pol_kind == POL_GREEDY:
                        if kd == 0:
                            m = home[kk]
                            cov_wa = alpha[m] * (t + b[m])
                        elif kd == 1:
                            row = uav_slot[kk] * n_cells + uav_pos[uav_slot[kk]]
                            for m in range(n_cells):
                                if cov[row, m]:
                                    cov_wa += alpha[m] * (t + b[m])
                        else:
                            cov_wa = total_wa
                        if cov_wa <= 0.0:
                            continue
                        score = cov_wa
                    else:  # POL_MWL1
                        if kd == 0:
                            m = home[kk]
                            cov_wa = sqrt_alpha[m] * (t + b[m])
                        elif kd == 1:
                            row = uav_slot[kk] * n_cells + uav_pos[uav_slot[kk]]
                            for m in range(n_cells):
                                if cov[row, m]:
                                    cov_wa += sqrt_alpha[m] * (t + b[m])
                        else:
                            for m in range(n_cells):
                                cov_wa += sqrt_alpha[m] * (t + b[m])
                        if cov_wa <= 0.0:
                            continue
                        score = sqrt_p[kk] * cov_wa
                    if score > best:
                        best = score
                        k = kk
                if pol_kind == POL_MW and allow_idle and k >= 0 and best < 0.0:
                    k = -1

            if k < 0:
                # idle epoch, one slot long
                if pol_kind == POL_MW:
                    for kk in range(n_nodes):
                        debts[kk] += nu[kk]
                continue

            # initiation: fresh update generated now, coverage snapshot
            holder = k
            pkts = l[k]
            init_slot = t
            if t >= burn:
                y_cnt[k] += 1
                ctr[C_INIT_TOTAL] += 1
                if m_avail:
                    ctr[C_INIT_AVAIL] += 1
            kd = kind[k]
            if kd == 0:
                for m in range(n_cells):
                    snap[m] = 0
                snap[home[k]] = 1
            elif kd == 1:
                row = uav_slot[k] * n_cells + uav_pos[uav_slot[k]]
                for m in range(n_cells):
                    snap[m] = cov[row, m]
            else:
                for m in range(n_cells):
                    snap[m] = 1

        # transmission attempt by the holder
        k = holder
        if u_pkt[i] < p[k]:
            pkts -= 1
            if pkts == 0:
                # update completed: reset covered cells to S_now + 1
                if t >= burn:
                    d_cnt[k] += 1
                if pol_kind == POL_MW:
                    for kk in range(n_nodes):
                        debts[kk] += nu[kk]
                    debts[k] -= 1.0
                s_now = t - init_slot + 1
                for m in range(n_cells):
                    if not snap[m]:
                        continue
                    if t >= burn:
                        wait = init_slot - last_complete[m] - 1
                        peak = t + b[m]
                        peak_sum[m] += peak
                        peak_cnt[m] += 1
                        w_sum[m] += wait
                        s_sum[m] += s_now
                        if rec_on:
                            r = ctr[C_REC_N]
                            rec_cell[r] = m
                            rec_w[r] = wait
                            rec_s[r] = s_now
                            rec_peak[r] = peak
                            ctr[C_REC_N] = r + 1
                    last_complete[m] = t
                    s0 = t + 1
                    if s0 > seg_start[m]:
                        cum_b[m] += b[m] * (s0 - seg_start[m])
                        seg_start[m] = s0
                    b[m] = s_now - t
                if kind[k] == 1:
                    s = uav_slot[k]
                    rl = route_indptr[s + 1] - route_indptr[s]
                    if rl > 0:
                        rp = (uav_route_pos[s] + 1) % rl
                        uav_route_pos[s] = rp
                        uav_pos[s] = route_cells[route_indptr[s] + rp]
                    else:
                        pos = uav_pos[s]
                        deg = nbr_indptr[pos + 1] - nbr_indptr[pos]
                        if deg > 0:
                            uav_pos[s] = nbr_idx[nbr_indptr[pos]
                                                 + <long> (u_mob[i] * deg)]
                holder = -1
        elif t == init_slot:
            # a failed first packet frees the channel immediately
            if pol_kind == POL_MW:
                for kk in range(n_nodes):
                    debts[kk] += nu[kk]
            holder = -1

    regs[R_HOLDER] = holder
    regs[R_PKTS] = pkts
    regs[R_INITSLOT] = init_slot
