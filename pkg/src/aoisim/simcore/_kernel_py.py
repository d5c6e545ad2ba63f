"""Pure-Python slot loop; the import-time fallback when the compiled
kernel is unavailable. Mirrors _kernel_cy.pyx statement for statement:
both read the same slot-indexed random arrays, so outcomes are
identical.
"""

from __future__ import annotations

POL_SR, POL_MW, POL_GREEDY, POL_MWL1 = 0, 1, 2, 3
R_HOLDER, R_PKTS, R_INITSLOT = 0, 1, 2
C_FAILED_SAT, C_INIT_TOTAL, C_INIT_AVAIL, C_EPOCHS, C_REC_N = 0, 1, 2, 3, 4

NEG_INF = float("-inf")


def run_block(ks, avail, u_pol, u_pkt, u_mob, t0, n):
    """Advance the simulation by n slots starting at global slot t0."""
    n_cells = ks.n_cells
    n_nodes = ks.n_nodes
    sat_idx = ks.sat_idx
    pol_kind = ks.pol_kind
    allow_idle = ks.allow_idle
    burn = ks.burn
    beta = ks.beta
    alpha_total = ks.alpha_total
    rec_on = ks.rec_on

    alpha = ks.alpha
    sqrt_alpha = ks.sqrt_alpha
    kind = ks.kind
    l = ks.l
    p = ks.p
    sqrt_p = ks.sqrt_p
    home = ks.home
    uav_slot = ks.uav_slot
    cov = ks.cov
    nbr_indptr = ks.nbr_indptr
    nbr_idx = ks.nbr_idx
    route_indptr = ks.route_indptr
    route_cells = ks.route_cells
    mu_a = ks.mu_a
    mu_u = ks.mu_u
    nu = ks.nu
    b = ks.b
    seg_start = ks.seg_start
    cum_b = ks.cum_b
    last_complete = ks.last_complete
    snap = ks.snap
    debts = ks.debts
    regs = ks.regs
    uav_pos = ks.uav_pos
    uav_route_pos = ks.uav_route_pos
    peak_sum = ks.peak_sum
    peak_cnt = ks.peak_cnt
    w_sum = ks.w_sum
    s_sum = ks.s_sum
    d_cnt = ks.d_cnt
    y_cnt = ks.y_cnt
    ctr = ks.ctr
    rec_cell = ks.rec_cell
    rec_w = ks.rec_w
    rec_s = ks.rec_s
    rec_peak = ks.rec_peak

    holder = int(regs[R_HOLDER])
    pkts = int(regs[R_PKTS])
    init_slot = int(regs[R_INITSLOT])

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
                table = mu_a if m_avail else mu_u
                u = u_pol[i]
                acc = 0.0
                for kk in range(n_nodes):
                    acc += table[kk]
                    if u < acc:
                        k = kk
                        break
            else:
                # score-based selection over current coverage
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
                            a_m = float(t + b[m])
                            wa = alpha[m] * a_m
                            cov_wa = wa
                            cov_term = wa * (a_m + 2.0 - 2.0 / pk)
                        elif kd == 1:
                            row = uav_slot[kk] * n_cells + uav_pos[uav_slot[kk]]
                            for m in range(n_cells):
                                if cov[row, m]:
                                    a_m = float(t + b[m])
                                    wa = alpha[m] * a_m
                                    cov_wa += wa
                                    cov_term += wa * (a_m + 2.0 - 2.0 / pk)
                        else:
                            for m in range(n_cells):
                                a_m = float(t + b[m])
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
            pkts = int(l[k])
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
                                                 + int(u_mob[i] * deg)]
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
