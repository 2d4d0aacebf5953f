"""Pure-Python reference kernels. Same signatures and results as _ckernels."""

import math

import numpy as np

# E-row modes
CHERNOFF, TRIVIAL, NO_B, DET = 0, 1, 2, 3

# float columns of the E state
EF_ZB, EF_ZA, EF_MA, EF_LA, EF_ASUM, EF_BSUM, EF_CENV = range(7)
# int columns of the E state
EI_MODE, EI_ZB, EI_ZA = range(3)
# float columns of a packing (Q or R) state; the int state is just the mode
PF_LOG, PF_L, PF_SUM, PF_RHS = range(4)

EVENT_TOL = 5e-10


def log_mix(p, z):
    """log(1 - p + p e^z) without cancellation."""
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return z
    a = math.log1p(-p)
    b = math.log(p) + z
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


class _Family:
    """Running log of prod(1 - h_i), with the h_i == 1 factors counted apart."""

    def __init__(self, terms):
        self.h = list(terms)
        self.zeros = 0
        self.total = 0.0
        for h in self.h:
            self._add(h, 1)

    def _add(self, h, sign):
        if h >= 1.0:
            self.zeros += sign
        else:
            self.total += sign * math.log1p(-h)

    def prod_with(self, changes):
        """Product after replacing h[i] by v for each (i, v) in changes."""
        zeros, total = self.zeros, self.total
        for i, v in changes:
            old = self.h[i]
            if old >= 1.0:
                zeros -= 1
            else:
                total -= math.log1p(-old)
            if v >= 1.0:
                zeros += 1
            else:
                total += math.log1p(-v)
        return 0.0 if zeros > 0 else math.exp(total)

    def commit(self, changes):
        for i, v in changes:
            self._add(self.h[i], -1)
            self.h[i] = v
            self._add(v, 1)

    def product(self):
        return 0.0 if self.zeros > 0 else math.exp(self.total)


def _e_term(Ef, Ei, i, envelope, y_done):
    mode = Ei[i, EI_MODE]
    if mode == DET:
        return 1.0 if Ef[i, EF_ASUM] > Ef[i, EF_BSUM] + EVENT_TOL else 0.0
    pa = 1.0 if Ei[i, EI_ZA] > 0 else -math.expm1(Ef[i, EF_ZA])
    if mode == NO_B:
        return min(1.0, pa)
    M = 1.0 if mode == TRIVIAL else math.exp(Ef[i, EF_MA])
    zb = 0.0 if Ei[i, EI_ZB] > 0 else math.exp(Ef[i, EF_ZB])
    C = Ef[i, EF_CENV] if (envelope and not y_done) else pa
    return min(1.0, zb * C + (1.0 - zb) * M)


def _p_term(Pf, Pi, i):
    if Pi[i] == DET:
        return 1.0 if Pf[i, PF_SUM] > Pf[i, PF_RHS] + EVENT_TOL else 0.0
    if Pi[i] == TRIVIAL:
        return 1.0
    return min(1.0, math.exp(Pf[i, PF_LOG]))


def derandomize_sweep(
    q, p,
    Bp, Bi, Bx, Vp, Vi, Vx, Ap, Ai, Ax, Up, Ui, Ux,
    c1, c2,
    Ef, Ei, Qf, Qi, Rf, Ri, obj,
    envelope, y_out, x_out, trace,
):
    """Fix y_1..y_k then x_1..x_m greedily, keeping the estimator below 1.

    The state arrays hold the root estimator in factorized log form and are
    updated in place. obj is [log of the objective term, log(1 - delta)].
    Each step tries value 1 and keeps it if the estimator stays below 1.
    trace[t] is the estimator after the t-th fixing; returns the final value.
    """
    n, d1, d2 = Ef.shape[0], Qf.shape[0], Rf.shape[0]
    k, m = q.shape[0], p.shape[0]
    y_done = k == 0
    fe = _Family([_e_term(Ef, Ei, i, envelope, y_done) for i in range(n)])
    fq = _Family([_p_term(Qf, Qi, i) for i in range(d1)])
    fr = _Family([_p_term(Rf, Ri, i) for i in range(d2)])
    lo = obj[1]

    def total(pe, pq, pr, obj_log):
        return 3.0 - pe - pq - pr + math.exp(obj_log)

    step = 0
    for t in range(k):
        qt = q[t]
        last = t == k - 1
        if qt <= 0.0:
            y_out[t] = 0
            if last:
                y_done = True
                fe.commit([(i, _e_term(Ef, Ei, i, envelope, True)) for i in range(n)])
            trace[step] = total(fe.product(), fq.product(), fr.product(), obj[0])
            step += 1
            continue
        b_rows = range(Bp[t], Bp[t + 1])
        v_rows = range(Vp[t], Vp[t + 1])
        # tentative y_t = 1
        saved_e = [(Bi[s], Ei[Bi[s], EI_ZB], Ef[Bi[s], EF_BSUM]) for s in b_rows]
        saved_r = [(Vi[s], Rf[Vi[s], PF_LOG], Rf[Vi[s], PF_SUM]) for s in v_rows]
        for s in b_rows:
            i = Bi[s]
            if qt < 1.0:
                Ei[i, EI_ZB] += 1
            Ef[i, EF_BSUM] += Bx[s]
        for s in v_rows:
            i = Vi[s]
            z = Vx[s] * Rf[i, PF_L]
            Rf[i, PF_LOG] += z - log_mix(qt, z)
            Rf[i, PF_SUM] += Vx[s]
        zo = c2[t] * lo
        obj1 = obj[0] + zo - log_mix(qt, zo)
        if last:
            e_changes = [(i, _e_term(Ef, Ei, i, envelope, True)) for i in range(n)]
        else:
            e_changes = [(Bi[s], _e_term(Ef, Ei, Bi[s], envelope, False)) for s in b_rows]
        r_changes = [(Vi[s], _p_term(Rf, Ri, Vi[s])) for s in v_rows]
        val1 = total(fe.prod_with(e_changes), fq.product(), fr.prod_with(r_changes), obj1)
        if val1 < 1.0:
            y_out[t] = 1
            obj[0] = obj1
        else:
            y_out[t] = 0
            for i, zc, bs in saved_e:
                Ei[i, EI_ZB] = zc
                Ef[i, EF_BSUM] = bs
            for i, lg, vs in saved_r:
                Rf[i, PF_LOG] = lg
                Rf[i, PF_SUM] = vs
            for s in b_rows:
                i = Bi[s]
                if qt < 1.0:
                    Ef[i, EF_ZB] -= math.log1p(-qt)
                else:
                    Ei[i, EI_ZB] -= 1
            for s in v_rows:
                i = Vi[s]
                Rf[i, PF_LOG] -= log_mix(qt, Vx[s] * Rf[i, PF_L])
            obj[0] -= log_mix(qt, zo)
            if last:
                e_changes = [(i, _e_term(Ef, Ei, i, envelope, True)) for i in range(n)]
            else:
                e_changes = [(Bi[s], _e_term(Ef, Ei, Bi[s], envelope, False)) for s in b_rows]
            r_changes = [(Vi[s], _p_term(Rf, Ri, Vi[s])) for s in v_rows]
        fe.commit(e_changes)
        fr.commit(r_changes)
        if last:
            y_done = True
        trace[step] = total(fe.product(), fq.product(), fr.product(), obj[0])
        step += 1

    for t in range(m):
        pt = p[t]
        if pt <= 0.0:
            x_out[t] = 0
            trace[step] = total(fe.product(), fq.product(), fr.product(), obj[0])
            step += 1
            continue
        a_rows = range(Ap[t], Ap[t + 1])
        u_rows = range(Up[t], Up[t + 1])
        saved_e = [(Ai[s], Ei[Ai[s], EI_ZA], Ef[Ai[s], EF_MA], Ef[Ai[s], EF_ASUM]) for s in a_rows]
        saved_q = [(Ui[s], Qf[Ui[s], PF_LOG], Qf[Ui[s], PF_SUM]) for s in u_rows]
        for s in a_rows:
            i = Ai[s]
            if pt < 1.0:
                Ei[i, EI_ZA] += 1
            z = Ax[s] * Ef[i, EF_LA]
            Ef[i, EF_MA] += z - log_mix(pt, z)
            Ef[i, EF_ASUM] += Ax[s]
        for s in u_rows:
            i = Ui[s]
            z = Ux[s] * Qf[i, PF_L]
            Qf[i, PF_LOG] += z - log_mix(pt, z)
            Qf[i, PF_SUM] += Ux[s]
        zo = c1[t] * lo
        obj1 = obj[0] + zo - log_mix(pt, zo)
        e_changes = [(Ai[s], _e_term(Ef, Ei, Ai[s], envelope, True)) for s in a_rows]
        q_changes = [(Ui[s], _p_term(Qf, Qi, Ui[s])) for s in u_rows]
        val1 = total(fe.prod_with(e_changes), fq.prod_with(q_changes), fr.product(), obj1)
        if val1 < 1.0:
            x_out[t] = 1
            obj[0] = obj1
        else:
            x_out[t] = 0
            for i, zc, ma, asum in saved_e:
                Ei[i, EI_ZA] = zc
                Ef[i, EF_MA] = ma
                Ef[i, EF_ASUM] = asum
            for i, lg, us in saved_q:
                Qf[i, PF_LOG] = lg
                Qf[i, PF_SUM] = us
            for s in a_rows:
                i = Ai[s]
                if pt < 1.0:
                    Ef[i, EF_ZA] -= math.log1p(-pt)
                else:
                    Ei[i, EI_ZA] -= 1
                Ef[i, EF_MA] -= log_mix(pt, Ax[s] * Ef[i, EF_LA])
            for s in u_rows:
                i = Ui[s]
                Qf[i, PF_LOG] -= log_mix(pt, Ux[s] * Qf[i, PF_L])
            obj[0] -= log_mix(pt, zo)
            e_changes = [(Ai[s], _e_term(Ef, Ei, Ai[s], envelope, True)) for s in a_rows]
            q_changes = [(Ui[s], _p_term(Qf, Qi, Ui[s])) for s in u_rows]
        fe.commit(e_changes)
        fq.commit(q_changes)
        trace[step] = total(fe.product(), fq.product(), fr.product(), obj[0])
        step += 1
    if k + m == 0:
        return total(fe.product(), fq.product(), fr.product(), obj[0])
    return trace[k + m - 1]


def _violated(rows_val, rhs, tol):
    return np.flatnonzero(rows_val > rhs + tol)


def _pick(rows, ptr, idx, z, cost):
    """Among z_j = 1 appearing in the given CSR rows, the j with smallest cost."""
    best, best_c = -1, math.inf
    for i in rows:
        for s in range(ptr[i], ptr[i + 1]):
            j = idx[s]
            if z[j] and (cost[j] < best_c or (cost[j] == best_c and j < best)):
                best, best_c = j, cost[j]
    return best


def greedy_repair(x, y, A_csr, A_csc, B_csr, B_csc, U_csr, U_csc, V_csr, V_csc, u, v, c1, c2, tol):
    """In-place greedy deletion; returns the number of variables zeroed."""
    from . import spmv

    ab = spmv(A_csr, x, len(A_csr[0]) - 1) - spmv(B_csr, y, len(B_csr[0]) - 1)
    us = spmv(U_csr, x, len(U_csr[0]) - 1)
    vs = spmv(V_csr, y, len(V_csr[0]) - 1)
    removed = 0
    while True:
        bad = _violated(vs, v, tol)
        if bad.size == 0:
            break
        j = _pick(bad, V_csr[0], V_csr[1], y, c2)
        y[j] = 0
        removed += 1
        for s in range(V_csc[0][j], V_csc[0][j + 1]):
            vs[V_csc[1][s]] -= V_csc[2][s]
        for s in range(B_csc[0][j], B_csc[0][j + 1]):
            ab[B_csc[1][s]] += B_csc[2][s]
    while True:
        bad_ab = _violated(ab, 0.0, tol)
        bad_u = _violated(us, u, tol)
        if bad_ab.size == 0 and bad_u.size == 0:
            break
        j1 = _pick(bad_ab, A_csr[0], A_csr[1], x, c1)
        j2 = _pick(bad_u, U_csr[0], U_csr[1], x, c1)
        if j1 < 0 or (j2 >= 0 and (c1[j2] < c1[j1] or (c1[j2] == c1[j1] and j2 < j1))):
            j1 = j2
        x[j1] = 0
        removed += 1
        for s in range(A_csc[0][j1], A_csc[0][j1 + 1]):
            ab[A_csc[1][s]] -= A_csc[2][s]
        for s in range(U_csc[0][j1], U_csc[0][j1 + 1]):
            us[U_csc[1][s]] -= U_csc[2][s]
    return removed
