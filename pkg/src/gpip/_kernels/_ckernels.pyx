# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Mirrors _pykernels exactly; see there for the semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, expm1, INFINITY

cnp.import_array()

cdef enum:
    CHERNOFF = 0
    TRIVIAL = 1
    NO_B = 2
    DET = 3

cdef enum:
    EF_ZB = 0
    EF_ZA = 1
    EF_MA = 2
    EF_LA = 3
    EF_ASUM = 4
    EF_BSUM = 5
    EF_CENV = 6

cdef enum:
    EI_MODE = 0
    EI_ZB = 1
    EI_ZA = 2

cdef enum:
    PF_LOG = 0
    PF_L = 1
    PF_SUM = 2
    PF_RHS = 3

cdef double EVENT_TOL = 5e-10


cdef inline double log_mix(double p, double z) noexcept nogil:
    cdef double a, b
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return z
    a = log1p(-p)
    b = log(p) + z
    if a > b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


def py_log_mix(double p, double z):
    return log_mix(p, z)


cdef struct Family:
    double *h
    long zeros
    double total


cdef inline void fam_add(Family *f, double h, int sign) noexcept nogil:
    if h >= 1.0:
        f.zeros += sign
    else:
        f.total += sign * log1p(-h)


cdef inline double fam_product(Family *f) noexcept nogil:
    if f.zeros > 0:
        return 0.0
    return exp(f.total)


cdef double fam_prod_with(Family *f, long *ci, double *cv, long nc) noexcept nogil:
    cdef long zeros = f.zeros
    cdef double total = f.total, old, v
    cdef long s
    for s in range(nc):
        old = f.h[ci[s]]
        if old >= 1.0:
            zeros -= 1
        else:
            total -= log1p(-old)
        v = cv[s]
        if v >= 1.0:
            zeros += 1
        else:
            total += log1p(-v)
    if zeros > 0:
        return 0.0
    return exp(total)


cdef void fam_commit(Family *f, long *ci, double *cv, long nc) noexcept nogil:
    cdef long s
    for s in range(nc):
        fam_add(f, f.h[ci[s]], -1)
        f.h[ci[s]] = cv[s]
        fam_add(f, cv[s], 1)


cdef inline double e_term(double[:, ::1] Ef, long[:, ::1] Ei, long i, bint envelope, bint y_done) noexcept nogil:
    cdef long mode = Ei[i, EI_MODE]
    cdef double pa, M, zb, C, h
    if mode == DET:
        return 1.0 if Ef[i, EF_ASUM] > Ef[i, EF_BSUM] + EVENT_TOL else 0.0
    pa = 1.0 if Ei[i, EI_ZA] > 0 else -expm1(Ef[i, EF_ZA])
    if mode == NO_B:
        return pa if pa < 1.0 else 1.0
    M = 1.0 if mode == TRIVIAL else exp(Ef[i, EF_MA])
    zb = 0.0 if Ei[i, EI_ZB] > 0 else exp(Ef[i, EF_ZB])
    C = Ef[i, EF_CENV] if (envelope and not y_done) else pa
    h = zb * C + (1.0 - zb) * M
    return h if h < 1.0 else 1.0


cdef inline double p_term(double[:, ::1] Pf, long[::1] Pi, long i) noexcept nogil:
    cdef double h
    if Pi[i] == DET:
        return 1.0 if Pf[i, PF_SUM] > Pf[i, PF_RHS] + EVENT_TOL else 0.0
    if Pi[i] == TRIVIAL:
        return 1.0
    h = exp(Pf[i, PF_LOG])
    return h if h < 1.0 else 1.0


cdef inline double total4(Family *fe, Family *fq, Family *fr, double obj_log) noexcept nogil:
    return 3.0 - fam_product(fe) - fam_product(fq) - fam_product(fr) + exp(obj_log)


def derandomize_sweep(
    const double[::1] q, const double[::1] p,
    const long[::1] Bp, const long[::1] Bi, const double[::1] Bx,
    const long[::1] Vp, const long[::1] Vi, const double[::1] Vx,
    const long[::1] Ap, const long[::1] Ai, const double[::1] Ax,
    const long[::1] Up, const long[::1] Ui, const double[::1] Ux,
    const double[::1] c1, const double[::1] c2,
    double[:, ::1] Ef, long[:, ::1] Ei,
    double[:, ::1] Qf, long[::1] Qi,
    double[:, ::1] Rf, long[::1] Ri,
    double[::1] obj,
    bint envelope,
    signed char[::1] y_out, signed char[::1] x_out, double[::1] trace,
):
    cdef long n = Ef.shape[0], d1 = Qf.shape[0], d2 = Rf.shape[0]
    cdef long k = q.shape[0], m = p.shape[0]
    cdef bint y_done = k == 0
    cdef long nmax = max(n, max(d1, d2)) + 1
    he_arr = np.empty(n + 1)
    hq_arr = np.empty(d1 + 1)
    hr_arr = np.empty(d2 + 1)
    cdef double[::1] he = he_arr, hq = hq_arr, hr = hr_arr
    ci_arr = np.empty(nmax, dtype=np.int64)
    cv_arr = np.empty(nmax)
    ci2_arr = np.empty(nmax, dtype=np.int64)
    cv2_arr = np.empty(nmax)
    # saved pre-fixing values of the touched rows
    sv_arr = np.empty((nmax, 5))
    cdef long[::1] ci = ci_arr, ci2 = ci2_arr
    cdef double[::1] cv = cv_arr, cv2 = cv2_arr
    cdef double[:, ::1] sv = sv_arr
    cdef Family fe, fq, fr
    cdef long i, s, t, step = 0, nc, nc2, lo_s, hi_s
    cdef double qt, pt, z, zo, obj1, val1, lo = obj[1]
    cdef bint last

    fe.h = &he[0]
    fe.zeros = 0
    fe.total = 0.0
    fq.h = &hq[0]
    fq.zeros = 0
    fq.total = 0.0
    fr.h = &hr[0]
    fr.zeros = 0
    fr.total = 0.0

    with nogil:
        for i in range(n):
            he[i] = e_term(Ef, Ei, i, envelope, y_done)
            fam_add(&fe, he[i], 1)
        for i in range(d1):
            hq[i] = p_term(Qf, Qi, i)
            fam_add(&fq, hq[i], 1)
        for i in range(d2):
            hr[i] = p_term(Rf, Ri, i)
            fam_add(&fr, hr[i], 1)

        for t in range(k):
            qt = q[t]
            last = t == k - 1
            if qt <= 0.0:
                y_out[t] = 0
                if last:
                    y_done = True
                    for i in range(n):
                        ci[i] = i
                        cv[i] = e_term(Ef, Ei, i, envelope, True)
                    fam_commit(&fe, &ci[0], &cv[0], n)
                trace[step] = total4(&fe, &fq, &fr, obj[0])
                step += 1
                continue
            lo_s = Bp[t]
            hi_s = Bp[t + 1]
            # tentative y_t = 1; E rows touched by B column t
            for s in range(lo_s, hi_s):
                i = Bi[s]
                sv[s - lo_s, 0] = <double>Ei[i, EI_ZB]
                sv[s - lo_s, 1] = Ef[i, EF_BSUM]
                if qt < 1.0:
                    Ei[i, EI_ZB] += 1
                Ef[i, EF_BSUM] += Bx[s]
            if last:
                nc = n
                for i in range(n):
                    ci[i] = i
                    cv[i] = e_term(Ef, Ei, i, envelope, True)
            else:
                nc = hi_s - lo_s
                for s in range(lo_s, hi_s):
                    ci[s - lo_s] = Bi[s]
                    cv[s - lo_s] = e_term(Ef, Ei, Bi[s], envelope, False)
            # R rows touched by V column t
            nc2 = Vp[t + 1] - Vp[t]
            for s in range(Vp[t], Vp[t + 1]):
                i = Vi[s]
                sv[s - Vp[t], 2] = Rf[i, PF_LOG]
                sv[s - Vp[t], 3] = Rf[i, PF_SUM]
                z = Vx[s] * Rf[i, PF_L]
                Rf[i, PF_LOG] += z - log_mix(qt, z)
                Rf[i, PF_SUM] += Vx[s]
                ci2[s - Vp[t]] = i
                cv2[s - Vp[t]] = p_term(Rf, Ri, i)
            zo = c2[t] * lo
            obj1 = obj[0] + zo - log_mix(qt, zo)
            val1 = 3.0 - fam_prod_with(&fe, &ci[0], &cv[0], nc) - fam_product(&fq) \
                - fam_prod_with(&fr, &ci2[0], &cv2[0], nc2) + exp(obj1)
            if val1 < 1.0:
                y_out[t] = 1
                obj[0] = obj1
            else:
                y_out[t] = 0
                for s in range(lo_s, hi_s):
                    i = Bi[s]
                    Ei[i, EI_ZB] = <long>sv[s - lo_s, 0]
                    Ef[i, EF_BSUM] = sv[s - lo_s, 1]
                for s in range(Vp[t], Vp[t + 1]):
                    i = Vi[s]
                    Rf[i, PF_LOG] = sv[s - Vp[t], 2]
                    Rf[i, PF_SUM] = sv[s - Vp[t], 3]
                for s in range(lo_s, hi_s):
                    i = Bi[s]
                    if qt < 1.0:
                        Ef[i, EF_ZB] -= log1p(-qt)
                    else:
                        Ei[i, EI_ZB] -= 1
                for s in range(Vp[t], Vp[t + 1]):
                    i = Vi[s]
                    Rf[i, PF_LOG] -= log_mix(qt, Vx[s] * Rf[i, PF_L])
                obj[0] -= log_mix(qt, zo)
                if last:
                    for i in range(n):
                        cv[i] = e_term(Ef, Ei, i, envelope, True)
                else:
                    for s in range(lo_s, hi_s):
                        cv[s - lo_s] = e_term(Ef, Ei, Bi[s], envelope, False)
                for s in range(Vp[t], Vp[t + 1]):
                    cv2[s - Vp[t]] = p_term(Rf, Ri, Vi[s])
            fam_commit(&fe, &ci[0], &cv[0], nc)
            fam_commit(&fr, &ci2[0], &cv2[0], nc2)
            if last:
                y_done = True
            trace[step] = total4(&fe, &fq, &fr, obj[0])
            step += 1

        for t in range(m):
            pt = p[t]
            if pt <= 0.0:
                x_out[t] = 0
                trace[step] = total4(&fe, &fq, &fr, obj[0])
                step += 1
                continue
            lo_s = Ap[t]
            hi_s = Ap[t + 1]
            nc = hi_s - lo_s
            for s in range(lo_s, hi_s):
                i = Ai[s]
                sv[s - lo_s, 0] = <double>Ei[i, EI_ZA]
                sv[s - lo_s, 1] = Ef[i, EF_MA]
                sv[s - lo_s, 4] = Ef[i, EF_ASUM]
                if pt < 1.0:
                    Ei[i, EI_ZA] += 1
                z = Ax[s] * Ef[i, EF_LA]
                Ef[i, EF_MA] += z - log_mix(pt, z)
                Ef[i, EF_ASUM] += Ax[s]
                ci[s - lo_s] = i
                cv[s - lo_s] = e_term(Ef, Ei, i, envelope, True)
            nc2 = Up[t + 1] - Up[t]
            for s in range(Up[t], Up[t + 1]):
                i = Ui[s]
                sv[s - Up[t], 2] = Qf[i, PF_LOG]
                sv[s - Up[t], 3] = Qf[i, PF_SUM]
                z = Ux[s] * Qf[i, PF_L]
                Qf[i, PF_LOG] += z - log_mix(pt, z)
                Qf[i, PF_SUM] += Ux[s]
                ci2[s - Up[t]] = i
                cv2[s - Up[t]] = p_term(Qf, Qi, i)
            zo = c1[t] * lo
            obj1 = obj[0] + zo - log_mix(pt, zo)
            val1 = 3.0 - fam_prod_with(&fe, &ci[0], &cv[0], nc) \
                - fam_prod_with(&fq, &ci2[0], &cv2[0], nc2) - fam_product(&fr) + exp(obj1)
            if val1 < 1.0:
                x_out[t] = 1
                obj[0] = obj1
            else:
                x_out[t] = 0
                for s in range(lo_s, hi_s):
                    i = Ai[s]
                    Ei[i, EI_ZA] = <long>sv[s - lo_s, 0]
                    Ef[i, EF_MA] = sv[s - lo_s, 1]
                    Ef[i, EF_ASUM] = sv[s - lo_s, 4]
                    if pt < 1.0:
                        Ef[i, EF_ZA] -= log1p(-pt)
                    else:
                        Ei[i, EI_ZA] -= 1
                    Ef[i, EF_MA] -= log_mix(pt, Ax[s] * Ef[i, EF_LA])
                    cv[s - lo_s] = e_term(Ef, Ei, i, envelope, True)
                for s in range(Up[t], Up[t + 1]):
                    i = Ui[s]
                    Qf[i, PF_LOG] = sv[s - Up[t], 2]
                    Qf[i, PF_SUM] = sv[s - Up[t], 3]
                    Qf[i, PF_LOG] -= log_mix(pt, Ux[s] * Qf[i, PF_L])
                    cv2[s - Up[t]] = p_term(Qf, Qi, i)
                obj[0] -= log_mix(pt, zo)
            fam_commit(&fe, &ci[0], &cv[0], nc)
            fam_commit(&fq, &ci2[0], &cv2[0], nc2)
            trace[step] = total4(&fe, &fq, &fr, obj[0])
            step += 1

    if k + m == 0:
        return total4(&fe, &fq, &fr, obj[0])
    return trace[k + m - 1]


cdef long pick(long[::1] rows, long nrows, const long[::1] ptr, const long[::1] idx,
               signed char[::1] z, const double[::1] cost) noexcept nogil:
    cdef long best = -1, r, i, s, j
    cdef double best_c = INFINITY
    for r in range(nrows):
        i = rows[r]
        for s in range(ptr[i], ptr[i + 1]):
            j = idx[s]
            if z[j] and (cost[j] < best_c or (cost[j] == best_c and j < best)):
                best = j
                best_c = cost[j]
    return best


cdef void csr_mv(const long[::1] ptr, const long[::1] idx, const double[::1] val, signed char[::1] z,
                 double sign, double[::1] out) noexcept nogil:
    cdef long i, s
    for i in range(ptr.shape[0] - 1):
        for s in range(ptr[i], ptr[i + 1]):
            if z[idx[s]]:
                out[i] += sign * val[s]


def greedy_repair(signed char[::1] x, signed char[::1] y,
                  A_csr, A_csc, B_csr, B_csc, U_csr, U_csc, V_csr, V_csc,
                  const double[::1] u, const double[::1] v, const double[::1] c1, const double[::1] c2,
                  double tol):
    cdef const long[::1] Arp = A_csr[0], Ari = A_csr[1], Acp = A_csc[0], Aci = A_csc[1]
    cdef const double[::1] Arx = A_csr[2], Acx = A_csc[2]
    cdef const long[::1] Brp = B_csr[0], Bri = B_csr[1], Bcp = B_csc[0], Bci = B_csc[1]
    cdef const double[::1] Brx = B_csr[2], Bcx = B_csc[2]
    cdef const long[::1] Urp = U_csr[0], Uri = U_csr[1], Ucp = U_csc[0], Uci = U_csc[1]
    cdef const double[::1] Urx = U_csr[2], Ucx = U_csc[2]
    cdef const long[::1] Vrp = V_csr[0], Vri = V_csr[1], Vcp = V_csc[0], Vci = V_csc[1]
    cdef const double[::1] Vrx = V_csr[2], Vcx = V_csc[2]
    cdef long n = Arp.shape[0] - 1, d1 = Urp.shape[0] - 1, d2 = Vrp.shape[0] - 1
    ab_arr = np.zeros(n)
    us_arr = np.zeros(d1)
    vs_arr = np.zeros(d2)
    bad1_arr = np.empty(max(n, 1), dtype=np.int64)
    bad2_arr = np.empty(max(max(d1, d2), 1), dtype=np.int64)
    cdef double[::1] ab = ab_arr, us = us_arr, vs = vs_arr
    cdef long[::1] bad1 = bad1_arr, bad2 = bad2_arr
    cdef long i, s, j, j2, nb1, nb2, removed = 0

    with nogil:
        csr_mv(Arp, Ari, Arx, x, 1.0, ab)
        csr_mv(Brp, Bri, Brx, y, -1.0, ab)
        csr_mv(Urp, Uri, Urx, x, 1.0, us)
        csr_mv(Vrp, Vri, Vrx, y, 1.0, vs)
        while True:
            nb2 = 0
            for i in range(d2):
                if vs[i] > v[i] + tol:
                    bad2[nb2] = i
                    nb2 += 1
            if nb2 == 0:
                break
            j = pick(bad2, nb2, Vrp, Vri, y, c2)
            y[j] = 0
            removed += 1
            for s in range(Vcp[j], Vcp[j + 1]):
                vs[Vci[s]] -= Vcx[s]
            for s in range(Bcp[j], Bcp[j + 1]):
                ab[Bci[s]] += Bcx[s]
        while True:
            nb1 = 0
            for i in range(n):
                if ab[i] > tol:
                    bad1[nb1] = i
                    nb1 += 1
            nb2 = 0
            for i in range(d1):
                if us[i] > u[i] + tol:
                    bad2[nb2] = i
                    nb2 += 1
            if nb1 == 0 and nb2 == 0:
                break
            j = pick(bad1, nb1, Arp, Ari, x, c1)
            j2 = pick(bad2, nb2, Urp, Uri, x, c1)
            if j < 0 or (j2 >= 0 and (c1[j2] < c1[j] or (c1[j2] == c1[j] and j2 < j))):
                j = j2
            x[j] = 0
            removed += 1
            for s in range(Acp[j], Acp[j + 1]):
                ab[Aci[s]] -= Acx[s]
            for s in range(Ucp[j], Ucp[j + 1]):
                us[Uci[s]] -= Ucx[s]
    return removed
