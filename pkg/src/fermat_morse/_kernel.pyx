# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled numerical core; mirrors :mod:`fermat_morse._kernel_py` exactly.

All per-point work happens on fixed-size C arrays (dimension at most 4,
flattened row-major with stride 4).
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, fabs, isfinite, pow
from libc.string cimport memset

cnp.import_array()

DEF NM = 4
DEF N2 = 16
DEF N3 = 64
DEF N4 = 256
DEF MAXSTATE = 64


cdef struct Prog:
    int mcode, n, nextra, nb, g0c, dc, bc
    int fd0, fd1, fd2
    double g0p[32]
    double dp[16]
    double bp[16]


cdef struct Jets:
    double G[N2]
    double dG[N3]
    double ddG[N4]
    double D[NM]
    double dD[N2]
    double ddD[N3]
    double b
    double db[NM]
    double ddb[N2]


cdef struct Geo:
    double al[N2]
    double ainv[N2]
    double dal[N3]
    double ddal[N4]
    double om[NM]
    double dom[N2]
    double ddom[N3]
    double gam[N3]
    double dgam[N4]
    double riem[N4]
    double eta[NM]
    double deta[N2]
    double bom[N2]
    double dbom[N3]


cdef inline int I2(int a, int b) noexcept nogil:
    return a * NM + b

cdef inline int I3(int a, int b, int c) noexcept nogil:
    return (a * NM + b) * NM + c

cdef inline int I4(int a, int b, int c, int d) noexcept nogil:
    return ((a * NM + b) * NM + c) * NM + d


cdef int load_prog(Prog* p, cnp.int64_t[::1] iprog, double[::1] g0p, double[::1] dp,
                   double[::1] bp) except -1:
    cdef int i
    p.mcode = <int>iprog[0]
    p.n = <int>iprog[1]
    p.nextra = <int>iprog[2]
    p.nb = p.n - p.nextra
    p.g0c = <int>iprog[3]
    p.dc = <int>iprog[4]
    p.bc = <int>iprog[5]
    p.fd0 = <int>iprog[6]
    p.fd1 = <int>iprog[7]
    p.fd2 = <int>iprog[8]
    if p.n > NM or p.n < 1:
        raise ValueError("dimension must be between 1 and 4")
    if g0p.shape[0] > 32 or dp.shape[0] > 16 or bp.shape[0] > 16:
        raise ValueError("too many field parameters")
    memset(p.g0p, 0, sizeof(p.g0p))
    memset(p.dp, 0, sizeof(p.dp))
    memset(p.bp, 0, sizeof(p.bp))
    for i in range(g0p.shape[0]):
        p.g0p[i] = g0p[i]
    for i in range(dp.shape[0]):
        p.dp[i] = dp[i]
    for i in range(bp.shape[0]):
        p.bp[i] = bp[i]
    return 0


# -- catalog ----------------------------------------------------------------

cdef void bump_jet(const double* x, int nb, double s, const double* c,
                   double* e, double* de, double* dde) noexcept nogil:
    cdef int l, m
    cdef double d[NM]
    cdef double r2 = 0.0
    for l in range(nb):
        d[l] = x[l] - c[l]
        r2 += d[l] * d[l]
    e[0] = exp(-r2 / (s * s))
    for l in range(nb):
        de[l] = -2.0 * d[l] / (s * s) * e[0]
        for m in range(nb):
            dde[I2(l, m)] = 4.0 * d[l] * d[m] / (s * s * s * s) * e[0]
        dde[I2(l, l)] -= 2.0 / (s * s) * e[0]


cdef void g0_jet(const Prog* p, const double* x, double* G, double* dG, double* ddG) noexcept nogil:
    cdef int nb = p.nb
    cdef int i, j, l, m
    cdef double f = 0.0, sq, f1, f2, rho2, e
    cdef double df[NM]
    cdef double ddf[N2]
    memset(G, 0, N2 * sizeof(double))
    memset(dG, 0, N3 * sizeof(double))
    memset(ddG, 0, N4 * sizeof(double))
    if p.g0c == 0:
        for i in range(nb):
            for j in range(nb):
                G[I2(i, j)] = p.g0p[i * nb + j]
        return
    if p.g0c == 1:
        bump_jet(x, nb, p.g0p[1], &p.g0p[2], &e, df, ddf)
        f = 1.0 + p.g0p[0] * e
        for l in range(nb):
            df[l] *= p.g0p[0]
            for m in range(nb):
                ddf[I2(l, m)] *= p.g0p[0]
    else:
        rho2 = p.g0p[0] * p.g0p[0]
        sq = 0.0
        for l in range(nb):
            sq += x[l] * x[l]
        f = 4.0 * rho2 / ((1.0 + sq) * (1.0 + sq))
        f1 = -8.0 * rho2 / ((1.0 + sq) * (1.0 + sq) * (1.0 + sq))
        f2 = 24.0 * rho2 / ((1.0 + sq) * (1.0 + sq) * (1.0 + sq) * (1.0 + sq))
        for l in range(nb):
            df[l] = 2.0 * x[l] * f1
            for m in range(nb):
                ddf[I2(l, m)] = 4.0 * x[l] * x[m] * f2
            ddf[I2(l, l)] += 2.0 * f1
    for i in range(nb):
        G[I2(i, i)] = f
        for l in range(nb):
            dG[I3(l, i, i)] = df[l]
            for m in range(nb):
                ddG[I4(l, m, i, i)] = ddf[I2(l, m)]


cdef void delta_jet(const Prog* p, const double* x, double* D, double* dD, double* ddD) noexcept nogil:
    cdef int nb = p.nb
    cdef int k, l, m
    cdef double e, amp, w
    cdef double de[NM]
    cdef double dde[N2]
    cdef double d[NM]
    cdef double u[NM]
    cdef double mat[N2]
    memset(D, 0, NM * sizeof(double))
    memset(dD, 0, N2 * sizeof(double))
    memset(ddD, 0, N3 * sizeof(double))
    if p.dc == 0:
        for k in range(nb):
            D[k] = p.dp[k]
        return
    if p.dc == 1:
        D[0] = -p.dp[0] * x[1]
        D[1] = p.dp[0] * x[0]
        dD[I2(1, 0)] = -p.dp[0]
        dD[I2(0, 1)] = p.dp[0]
        return
    amp = p.dp[0]
    w = p.dp[2]
    bump_jet(x, nb, p.dp[1], &p.dp[3], &e, de, dde)
    memset(mat, 0, N2 * sizeof(double))
    for k in range(nb):
        mat[I2(k, k)] = 1.0
        d[k] = x[k] - p.dp[3 + k]
    if w != 0.0:
        mat[I2(0, 1)] = -w
        mat[I2(1, 0)] = w
    for k in range(nb):
        u[k] = 0.0
        for l in range(nb):
            u[k] += mat[I2(k, l)] * d[l]
    for k in range(nb):
        D[k] = amp * e * u[k]
        for l in range(nb):
            dD[I2(l, k)] = amp * (de[l] * u[k] + e * mat[I2(k, l)])
            for m in range(nb):
                ddD[I3(l, m, k)] = amp * (dde[I2(l, m)] * u[k] + de[l] * mat[I2(k, m)]
                                          + de[m] * mat[I2(k, l)])


cdef void beta_jet(const Prog* p, int chart, const double* x, double* b, double* db,
                   double* ddb) noexcept nogil:
    cdef int nb = p.nb
    cdef int l, m
    cdef double e, q, sq, sign, z, z1, z2
    cdef double de[NM]
    cdef double dde[N2]
    memset(db, 0, NM * sizeof(double))
    memset(ddb, 0, N2 * sizeof(double))
    if p.bc == 0:
        b[0] = p.bp[0]
        return
    if p.bc == 1:
        bump_jet(x, nb, p.bp[1], &p.bp[2], &e, de, dde)
        q = 1.0 + p.bp[0] * e
        b[0] = 1.0 / q
        for l in range(nb):
            db[l] = -p.bp[0] * de[l] / (q * q)
        for l in range(nb):
            for m in range(nb):
                ddb[I2(l, m)] = (-p.bp[0] * dde[I2(l, m)] / (q * q)
                                 + 2.0 * p.bp[0] * de[l] * p.bp[0] * de[m] / (q * q * q))
        return
    sign = 1.0 if chart == 0 else -1.0
    sq = 0.0
    for l in range(nb):
        sq += x[l] * x[l]
    z = sign * (sq - 1.0) / (sq + 1.0)
    z1 = sign * 2.0 / ((sq + 1.0) * (sq + 1.0))
    z2 = -sign * 4.0 / ((sq + 1.0) * (sq + 1.0) * (sq + 1.0))
    b[0] = p.bp[0] + p.bp[1] * z
    for l in range(nb):
        db[l] = p.bp[1] * 2.0 * x[l] * z1
        for m in range(nb):
            ddb[I2(l, m)] = p.bp[1] * 4.0 * x[l] * x[m] * z2
        ddb[I2(l, l)] += p.bp[1] * 2.0 * z1


# value-only evaluation for the finite-difference mode: which = 0 g0, 1 delta, 2 beta
cdef void field_value(const Prog* p, int which, int chart, const double* x, double* out) noexcept nogil:
    cdef double t1[N3]
    cdef double t2[N4]
    if which == 0:
        g0_jet(p, x, out, t1, t2)
    elif which == 1:
        delta_jet(p, x, out, t1, t2)
    else:
        beta_jet(p, chart, x, out, t1, t2)


cdef void fd_jet(const Prog* p, int which, int chart, const double* x, int size,
                 double* val, double* grad, double* hess) noexcept nogil:
    """grad[l*size + a], hess[(l*NM + m)*size + a] by 4th-order central stencils."""
    cdef int nb = p.nb
    cdef int l, m, a, ia, ib
    cdef double w[4]
    cdef double off[4]
    cdef double xp[NM]
    cdef double tmp[N2]
    cdef double h, hl, hm
    w[0] = 1.0 / 12.0; w[1] = -8.0 / 12.0; w[2] = 8.0 / 12.0; w[3] = -1.0 / 12.0
    off[0] = -2.0; off[1] = -1.0; off[2] = 1.0; off[3] = 2.0
    field_value(p, which, chart, x, val)
    for l in range(nb):
        h = 1e-5 * (1.0 + fabs(x[l]))
        for a in range(size):
            grad[l * size + a] = 0.0
        for ia in range(4):
            for m in range(nb):
                xp[m] = x[m]
            xp[l] += off[ia] * h
            field_value(p, which, chart, xp, tmp)
            for a in range(size):
                grad[l * size + a] += w[ia] * tmp[a]
        for a in range(size):
            grad[l * size + a] /= h
    for l in range(nb):
        hl = 1e-3 * (1.0 + fabs(x[l]))
        for m in range(l, nb):
            hm = 1e-3 * (1.0 + fabs(x[m]))
            for a in range(size):
                hess[(l * NM + m) * size + a] = 0.0
            for ia in range(4):
                for ib in range(4):
                    for a in range(nb):
                        xp[a] = x[a]
                    xp[l] += off[ia] * hl
                    xp[m] += off[ib] * hm
                    field_value(p, which, chart, xp, tmp)
                    for a in range(size):
                        hess[(l * NM + m) * size + a] += w[ia] * w[ib] * tmp[a]
            for a in range(size):
                hess[(l * NM + m) * size + a] /= (hl * hm)
                hess[(m * NM + l) * size + a] = hess[(l * NM + m) * size + a]


cdef void compute_jets(const Prog* p, int chart, const double* x, Jets* J) noexcept nogil:
    cdef int n = p.n
    cdef int nb = p.nb
    cdef int i, j, l, m
    cdef double gval[N2]
    cdef double ggrad[NM * N2]
    cdef double ghess[N2 * N2]
    if p.fd0:
        fd_jet(p, 0, chart, x, N2, gval, ggrad, ghess)
        memset(J.dG, 0, N3 * sizeof(double))
        memset(J.ddG, 0, N4 * sizeof(double))
        for i in range(N2):
            J.G[i] = gval[i]
        for l in range(nb):
            for i in range(nb):
                for j in range(nb):
                    J.dG[I3(l, i, j)] = ggrad[l * N2 + I2(i, j)]
                    for m in range(nb):
                        J.ddG[I4(l, m, i, j)] = ghess[(l * NM + m) * N2 + I2(i, j)]
    else:
        g0_jet(p, x, J.G, J.dG, J.ddG)
    if p.fd1:
        fd_jet(p, 1, chart, x, NM, gval, ggrad, ghess)
        memset(J.dD, 0, N2 * sizeof(double))
        memset(J.ddD, 0, N3 * sizeof(double))
        for i in range(NM):
            J.D[i] = gval[i]
        for l in range(nb):
            for i in range(nb):
                J.dD[I2(l, i)] = ggrad[l * NM + i]
                for m in range(nb):
                    J.ddD[I3(l, m, i)] = ghess[(l * NM + m) * NM + i]
    else:
        delta_jet(p, x, J.D, J.dD, J.ddD)
    if p.fd2:
        fd_jet(p, 2, chart, x, 1, gval, ggrad, ghess)
        memset(J.db, 0, NM * sizeof(double))
        memset(J.ddb, 0, N2 * sizeof(double))
        J.b = gval[0]
        for l in range(nb):
            J.db[l] = ggrad[l]
            for m in range(nb):
                J.ddb[I2(l, m)] = ghess[l * NM + m]
    else:
        beta_jet(p, chart, x, &J.b, J.db, J.ddb)
    # flat trailing coordinates
    for i in range(nb, n):
        J.G[I2(i, i)] = 1.0
        J.D[i] = 0.0


# -- geometry -----------------------------------------------------------------

cdef int invert(int n, const double* a, double* out) noexcept nogil:
    cdef double m[N2]
    cdef int i, j, k, piv
    cdef double t, best
    for i in range(N2):
        m[i] = a[i]
        out[i] = 0.0
    for i in range(n):
        out[I2(i, i)] = 1.0
    for k in range(n):
        piv = k
        best = fabs(m[I2(k, k)])
        for i in range(k + 1, n):
            if fabs(m[I2(i, k)]) > best:
                best = fabs(m[I2(i, k)])
                piv = i
        if best == 0.0:
            return -1
        if piv != k:
            for j in range(n):
                t = m[I2(k, j)]; m[I2(k, j)] = m[I2(piv, j)]; m[I2(piv, j)] = t
                t = out[I2(k, j)]; out[I2(k, j)] = out[I2(piv, j)]; out[I2(piv, j)] = t
        t = m[I2(k, k)]
        for j in range(n):
            m[I2(k, j)] /= t
            out[I2(k, j)] /= t
        for i in range(n):
            if i != k:
                t = m[I2(i, k)]
                if t != 0.0:
                    for j in range(n):
                        m[I2(i, j)] -= t * m[I2(k, j)]
                        out[I2(i, j)] -= t * out[I2(k, j)]
    return 0


cdef void compute_metric(const Prog* p, int chart, const double* x, Geo* g) noexcept nogil:
    cdef Jets J
    cdef int n = p.n
    cdef int i, j, k, l, m
    cdef double b, b2, b3, acc
    cdef double gt[N2]
    cdef double dgt[N3]
    cdef double ddgt[N4]
    compute_jets(p, chart, x, &J)
    b = J.b
    b2 = b * b
    b3 = b2 * b
    for i in range(n):
        for j in range(n):
            gt[I2(i, j)] = J.G[I2(i, j)] / b
            for l in range(n):
                dgt[I3(l, i, j)] = J.dG[I3(l, i, j)] / b - J.db[l] * J.G[I2(i, j)] / b2
                for m in range(n):
                    ddgt[I4(l, m, i, j)] = (
                        J.ddG[I4(l, m, i, j)] / b
                        - (J.dG[I3(l, i, j)] * J.db[m] + J.dG[I3(m, i, j)] * J.db[l]) / b2
                        - J.ddb[I2(l, m)] * J.G[I2(i, j)] / b2
                        + 2.0 * J.db[l] * J.db[m] * J.G[I2(i, j)] / b3)
    for k in range(n):
        acc = 0.0
        for j in range(n):
            acc += gt[I2(k, j)] * J.D[j]
        g.om[k] = acc
        for l in range(n):
            acc = 0.0
            for j in range(n):
                acc += dgt[I3(l, k, j)] * J.D[j] + gt[I2(k, j)] * J.dD[I2(l, j)]
            g.dom[I2(l, k)] = acc
            for m in range(n):
                acc = 0.0
                for j in range(n):
                    acc += (ddgt[I4(l, m, k, j)] * J.D[j] + dgt[I3(l, k, j)] * J.dD[I2(m, j)]
                            + dgt[I3(m, k, j)] * J.dD[I2(l, j)] + gt[I2(k, j)] * J.ddD[I3(l, m, j)])
                g.ddom[I3(l, m, k)] = acc
    for k in range(n):
        for j in range(n):
            g.al[I2(k, j)] = gt[I2(k, j)] + g.om[k] * g.om[j]
            for l in range(n):
                g.dal[I3(l, k, j)] = (dgt[I3(l, k, j)] + g.dom[I2(l, k)] * g.om[j]
                                      + g.om[k] * g.dom[I2(l, j)])
                for m in range(n):
                    g.ddal[I4(l, m, k, j)] = (
                        ddgt[I4(l, m, k, j)] + g.ddom[I3(l, m, k)] * g.om[j]
                        + g.dom[I2(l, k)] * g.dom[I2(m, j)] + g.dom[I2(m, k)] * g.dom[I2(l, j)]
                        + g.om[k] * g.ddom[I3(l, m, j)])


cdef void compute_geometry(const Prog* p, int chart, const double* x, Geo* g, int full) noexcept nogil:
    """full=0: alpha, Gamma, Omega, eta; full=1 adds curvature and derivatives."""
    cdef int n = p.n
    cdef int i, j, k, l, m, q
    cdef double acc
    cdef double low[N3]
    cdef double dlow[N4]
    cdef double fm[N2]
    cdef double dfm[N3]
    cdef double tmp[N4]
    compute_metric(p, chart, x, g)
    invert(n, g.al, g.ainv)
    for l in range(n):
        for i in range(n):
            for j in range(n):
                low[I3(l, i, j)] = 0.5 * (g.dal[I3(i, l, j)] + g.dal[I3(j, l, i)] - g.dal[I3(l, i, j)])
    for k in range(n):
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for l in range(n):
                    acc += g.ainv[I2(k, l)] * low[I3(l, i, j)]
                g.gam[I3(k, i, j)] = acc
    for k in range(n):
        acc = 0.0
        for q in range(n):
            acc += g.ainv[I2(k, q)] * g.om[q]
        g.eta[k] = acc
    for k in range(n):
        for i in range(n):
            fm[I2(k, i)] = g.dom[I2(i, k)] - g.dom[I2(k, i)]
    for k in range(n):
        for i in range(n):
            acc = 0.0
            for q in range(n):
                acc += g.ainv[I2(k, q)] * fm[I2(q, i)]
            g.bom[I2(k, i)] = acc
    if not full:
        return
    # d eta
    for l in range(n):
        for q in range(n):
            acc = g.dom[I2(l, q)]
            for j in range(n):
                acc -= g.dal[I3(l, q, j)] * g.eta[j]
            tmp[q] = acc
        for k in range(n):
            acc = 0.0
            for q in range(n):
                acc += g.ainv[I2(k, q)] * tmp[q]
            g.deta[I2(l, k)] = acc
    # d Gamma
    for m in range(n):
        for l in range(n):
            for i in range(n):
                for j in range(n):
                    acc = 0.5 * (g.ddal[I4(m, i, l, j)] + g.ddal[I4(m, j, l, i)] - g.ddal[I4(m, l, i, j)])
                    for q in range(n):
                        acc -= g.dal[I3(m, l, q)] * g.gam[I3(q, i, j)]
                    dlow[I4(m, l, i, j)] = acc
    for m in range(n):
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    acc = 0.0
                    for l in range(n):
                        acc += g.ainv[I2(k, l)] * dlow[I4(m, l, i, j)]
                    g.dgam[I4(m, k, i, j)] = acc
    # curvature R^l_kij
    for l in range(n):
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    acc = g.dgam[I4(i, l, j, k)] - g.dgam[I4(j, l, i, k)]
                    for q in range(n):
                        acc += g.gam[I3(l, i, q)] * g.gam[I3(q, j, k)] - g.gam[I3(l, j, q)] * g.gam[I3(q, i, k)]
                    g.riem[I4(l, k, i, j)] = acc
    # d Omega
    for m in range(n):
        for k in range(n):
            for i in range(n):
                dfm[I3(m, k, i)] = g.ddom[I3(m, i, k)] - g.ddom[I3(m, k, i)]
    for m in range(n):
        for q in range(n):
            for i in range(n):
                acc = dfm[I3(m, q, i)]
                for j in range(n):
                    acc -= g.dal[I3(m, q, j)] * g.bom[I2(j, i)]
                tmp[I2(q, i)] = acc
        for k in range(n):
            for i in range(n):
                acc = 0.0
                for q in range(n):
                    acc += g.ainv[I2(k, q)] * tmp[I2(q, i)]
                g.dbom[I3(m, k, i)] = acc


# -- right-hand sides ----------------------------------------------------------

cdef int eval_rhs(const Prog* p, int mode, int chart, const double* y, int ncol,
                  const double* cc, double cz, double* out) noexcept nogil:
    cdef Geo g
    cdef int n = p.n
    cdef int i, j, k, l, m, q, c, oj, op, ow
    cdef double speed, cvel, acc, t
    cdef const double* x = y
    cdef const double* v = y + n
    cdef double av[NM]
    cdef double bv[NM]
    cdef double gv[N2]
    cdef double rvv[N2]
    cdef double nabm[N2]
    cdef double aeta[NM]
    compute_geometry(p, chart, x, &g, mode != 0)
    speed = 0.0
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += g.al[I2(i, j)] * v[j]
        av[i] = acc
        speed += acc * v[i]
    if speed <= 0.0:
        return -1
    speed = sqrt(speed)
    cvel = cz if mode == 2 else speed
    for k in range(n):
        acc = 0.0
        for j in range(n):
            acc += g.bom[I2(k, j)] * v[j]
        bv[k] = acc
    for k in range(n):
        out[k] = v[k]
        acc = 0.0
        for i in range(n):
            for j in range(n):
                acc += g.gam[I3(k, i, j)] * v[i] * v[j]
        out[n + k] = -acc - cvel * bv[k]
    if mode == 0:
        return 0
    oj = 2 * n
    op = oj + n * ncol
    ow = op + n * ncol
    for k in range(n):
        for j in range(n):
            acc = 0.0
            for i in range(n):
                acc += g.gam[I3(k, i, j)] * v[i]
            gv[I2(k, j)] = acc
    # R(., v)v as a matrix acting on J: rvv[l, i] = R^l_kij v^k v^j
    for l in range(n):
        for i in range(n):
            acc = 0.0
            for k in range(n):
                for j in range(n):
                    acc += g.riem[I4(l, k, i, j)] * v[k] * v[j]
            rvv[I2(l, i)] = acc
    # (nabla_{e_m} Omega)[v]: nabm[k, m]
    for k in range(n):
        for m in range(n):
            acc = 0.0
            for i in range(n):
                t = g.dbom[I3(m, k, i)]
                for q in range(n):
                    t += g.gam[I3(k, m, q)] * g.bom[I2(q, i)] - g.gam[I3(q, m, i)] * g.bom[I2(k, q)]
                acc += t * v[i]
            nabm[I2(k, m)] = acc
    if mode == 2:
        for k in range(n):
            acc = 0.0
            for j in range(n):
                acc += g.al[I2(k, j)] * g.eta[j]
            aeta[k] = acc
    for c in range(ncol):
        for k in range(n):
            acc = y[op + k * ncol + c]
            for j in range(n):
                acc -= gv[I2(k, j)] * y[oj + j * ncol + c]
            out[oj + k * ncol + c] = acc
            acc = 0.0
            for i in range(n):
                acc -= rvv[I2(k, i)] * y[oj + i * ncol + c]
                acc -= cvel * nabm[I2(k, i)] * y[oj + i * ncol + c]
                acc -= cvel * g.bom[I2(k, i)] * y[op + i * ncol + c]
                acc -= gv[I2(k, i)] * y[op + i * ncol + c]
            if mode == 1:
                acc -= bv[k] * cc[c] / speed
            else:
                acc -= bv[k] * cc[c]
            out[op + k * ncol + c] = acc
        if mode == 2:
            acc = cc[c]
            for k in range(n):
                acc += aeta[k] * y[op + k * ncol + c]
                # (nabla_J eta)^k
                t = 0.0
                for m in range(n):
                    t += g.deta[I2(m, k)] * y[oj + m * ncol + c]
                    for q in range(n):
                        t += g.gam[I3(k, m, q)] * g.eta[q] * y[oj + m * ncol + c]
                acc += av[k] * t
            out[ow + c] = acc
    return 0


cdef void switch_chart(int n, int ncol, int mode, double* y) noexcept nogil:
    cdef double x0 = y[0], x1 = y[1]
    cdef double r2 = x0 * x0 + x1 * x1
    cdef double j00, j01, j10, j11, a, b
    cdef int o, c, blk
    j00 = (r2 - 2.0 * x0 * x0) / (r2 * r2)
    j01 = (-2.0 * x0 * x1) / (r2 * r2)
    j10 = j01
    j11 = (r2 - 2.0 * x1 * x1) / (r2 * r2)
    y[0] = x0 / r2
    y[1] = x1 / r2
    a = y[n]; b = y[n + 1]
    y[n] = j00 * a + j01 * b
    y[n + 1] = j10 * a + j11 * b
    if mode == 0:
        return
    o = 2 * n
    for blk in range(2):
        for c in range(ncol):
            a = y[o + c]; b = y[o + ncol + c]
            y[o + c] = j00 * a + j01 * b
            y[o + ncol + c] = j10 * a + j11 * b
        o += n * ncol


# -- Python entry points ----------------------------------------------------------

def field_jets(cnp.int64_t[::1] iprog, double[::1] g0p, double[::1] dp, double[::1] bp,
               int chart, x):
    cdef Prog p
    cdef Jets J
    cdef double xx[NM]
    cdef int i, n
    load_prog(&p, iprog, g0p, dp, bp)
    n = p.n
    xa = np.asarray(x, dtype=float)
    for i in range(n):
        xx[i] = xa[i]
    compute_jets(&p, chart, xx, &J)
    G = np.array([J.G[i] for i in range(N2)]).reshape(NM, NM)[:n, :n].copy()
    dG = np.array([J.dG[i] for i in range(N3)]).reshape(NM, NM, NM)[:n, :n, :n].copy()
    ddG = np.array([J.ddG[i] for i in range(N4)]).reshape(NM, NM, NM, NM)[:n, :n, :n, :n].copy()
    D = np.array([J.D[i] for i in range(n)])
    dD = np.array([J.dD[i] for i in range(N2)]).reshape(NM, NM)[:n, :n].copy()
    ddD = np.array([J.ddD[i] for i in range(N3)]).reshape(NM, NM, NM)[:n, :n, :n].copy()
    db = np.array([J.db[i] for i in range(n)])
    ddb = np.array([J.ddb[i] for i in range(N2)]).reshape(NM, NM)[:n, :n].copy()
    return G, dG, ddG, D, dD, ddD, float(J.b), db, ddb


cdef object _arr(double* a, int size, int n, int rank):
    out = np.array([a[i] for i in range(size)]).reshape((NM,) * rank)
    return out[(slice(0, n),) * rank].copy()


def metric_jet(cnp.int64_t[::1] iprog, double[::1] g0p, double[::1] dp, double[::1] bp,
               int chart, x):
    cdef Prog p
    cdef Geo g
    cdef double xx[NM]
    cdef int i
    load_prog(&p, iprog, g0p, dp, bp)
    xa = np.asarray(x, dtype=float)
    for i in range(p.n):
        xx[i] = xa[i]
    compute_metric(&p, chart, xx, &g)
    n = p.n
    return (_arr(g.al, N2, n, 2), _arr(g.dal, N3, n, 3), _arr(g.ddal, N4, n, 4),
            _arr(g.om, NM, n, 1), _arr(g.dom, N2, n, 2), _arr(g.ddom, N3, n, 3))


def local_geometry(cnp.int64_t[::1] iprog, double[::1] g0p, double[::1] dp, double[::1] bp,
                   int chart, x):
    cdef Prog p
    cdef Geo g
    cdef double xx[NM]
    cdef int i
    load_prog(&p, iprog, g0p, dp, bp)
    xa = np.asarray(x, dtype=float)
    for i in range(p.n):
        xx[i] = xa[i]
    compute_geometry(&p, chart, xx, &g, 1)
    n = p.n
    return {
        "alpha": _arr(g.al, N2, n, 2),
        "alpha_inv": _arr(g.ainv, N2, n, 2),
        "dalpha": _arr(g.dal, N3, n, 3),
        "gamma": _arr(g.gam, N3, n, 3),
        "dgamma": _arr(g.dgam, N4, n, 4),
        "riemann": _arr(g.riem, N4, n, 4),
        "omega_form": _arr(g.om, NM, n, 1),
        "eta": _arr(g.eta, NM, n, 1),
        "deta": _arr(g.deta, N2, n, 2),
        "big_omega": _arr(g.bom, N2, n, 2),
        "dbig_omega": _arr(g.dbom, N3, n, 3),
    }


def rhs(cnp.int64_t[::1] iprog, double[::1] g0p, double[::1] dp, double[::1] bp,
        int mode, int chart, y, int ncol, colconst, double cz):
    cdef Prog p
    cdef double[::1] yy = np.ascontiguousarray(y, dtype=float)
    cdef double[::1] cc = np.ascontiguousarray(np.append(np.asarray(colconst, float), 0.0))
    out = np.empty(yy.shape[0])
    cdef double[::1] ov = out
    load_prog(&p, iprog, g0p, dp, bp)
    if eval_rhs(&p, mode, chart, &yy[0], ncol, &cc[0], cz, &ov[0]) != 0:
        out[:] = np.nan
    return out


def integrate(cnp.int64_t[::1] iprog, double[::1] g0p, double[::1] dp, double[::1] bp,
              int mode, int chart, y0, double s0, double s1, double rtol, double atol,
              int ncol, colconst, double cz, t_eval=None, int max_steps=200000):
    cdef Prog p
    load_prog(&p, iprog, g0p, dp, bp)
    cdef double[::1] cc = np.ascontiguousarray(np.append(np.asarray(colconst, float), 0.0))
    cdef double[::1] y = np.array(y0, dtype=float)
    cdef int dim = y.shape[0]
    if dim > MAXSTATE:
        raise ValueError("state too large")
    stops_list = [] if t_eval is None else sorted(float(t) for t in t_eval if s0 < t < s1)
    stops_list.append(float(s1))
    cdef double[::1] stops = np.array(stops_list, dtype=float)
    cdef int nstops = stops.shape[0]

    cdef int cap = 256
    s_out = np.empty(cap)
    y_out = np.empty((cap, dim))
    f_out = np.empty((cap, dim))
    c_out = np.empty(cap, dtype=np.int64)
    cdef double[::1] sv = s_out
    cdef double[:, ::1] yv = y_out
    cdef double[:, ::1] fv = f_out
    cdef cnp.int64_t[::1] cv = c_out
    cdef int count = 0

    cdef double k[7][MAXSTATE]
    cdef double ytmp[MAXSTATE]
    cdef double ynew[MAXSTATE]
    cdef double A[7][6]
    cdef double E[7]
    cdef int i, j, st, stop_idx = 0, steps = 0, status = 0, hit, ch = chart, bad
    cdef double s = s0, h, h_free, target, enorm, sc, err, d0, d1, fac, tiny, acc_v
    cdef int is_sphere = p.mcode == 2

    memset(A, 0, sizeof(A))
    A[1][0] = 1.0 / 5.0
    A[2][0] = 3.0 / 40.0; A[2][1] = 9.0 / 40.0
    A[3][0] = 44.0 / 45.0; A[3][1] = -56.0 / 15.0; A[3][2] = 32.0 / 9.0
    A[4][0] = 19372.0 / 6561.0; A[4][1] = -25360.0 / 2187.0; A[4][2] = 64448.0 / 6561.0
    A[4][3] = -212.0 / 729.0
    A[5][0] = 9017.0 / 3168.0; A[5][1] = -355.0 / 33.0; A[5][2] = 46732.0 / 5247.0
    A[5][3] = 49.0 / 176.0; A[5][4] = -5103.0 / 18656.0
    A[6][0] = 35.0 / 384.0; A[6][1] = 0.0; A[6][2] = 500.0 / 1113.0; A[6][3] = 125.0 / 192.0
    A[6][4] = -2187.0 / 6784.0; A[6][5] = 11.0 / 84.0
    E[0] = 71.0 / 57600.0; E[1] = 0.0; E[2] = -71.0 / 16695.0; E[3] = 71.0 / 1920.0
    E[4] = -17253.0 / 339200.0; E[5] = 22.0 / 525.0; E[6] = -1.0 / 40.0

    if eval_rhs(&p, mode, ch, &y[0], ncol, &cc[0], cz, k[0]) != 0:
        raise ValueError("zero velocity")

    # record the initial node
    sv[0] = s
    for i in range(dim):
        yv[0, i] = y[i]
        fv[0, i] = k[0][i]
    cv[0] = ch
    count = 1

    d0 = 0.0
    d1 = 0.0
    for i in range(dim):
        sc = atol + rtol * fabs(y[i])
        d0 += (y[i] / sc) * (y[i] / sc)
        d1 += (k[0][i] / sc) * (k[0][i] / sc)
    d0 = sqrt(d0 / dim)
    d1 = sqrt(d1 / dim)
    if d0 > 1e-5 and d1 > 1e-5:
        h = 0.01 * d0 / d1
    else:
        h = 1e-6
    if s1 - s0 > 0:
        h = min(h, 0.1 * (s1 - s0))
    h = max(h, 1e-10 * max(1.0, s1 - s0))

    while stop_idx < nstops:
        target = stops[stop_idx]
        if steps >= max_steps:
            status = 1
            break
        hit = 0
        h_free = h
        tiny = 1e-14 * max(1.0, fabs(target))
        if s + h >= target - tiny:
            h = target - s
            hit = 1
        if h < 1e-14 * max(1.0, fabs(s)):
            if target - s <= 1e-14 * max(1.0, fabs(s)):
                stop_idx += 1
                continue
            status = 2
            break
        bad = 0
        for st in range(1, 7):
            for i in range(dim):
                acc_v = y[i]
                for j in range(st):
                    if A[st][j] != 0.0:
                        acc_v = acc_v + h * A[st][j] * k[j][i]
                ytmp[i] = acc_v
            if eval_rhs(&p, mode, ch, ytmp, ncol, &cc[0], cz, k[st]) != 0:
                bad = 1
                break
        steps += 1
        if bad:
            h *= 0.2
            continue
        for i in range(dim):
            ynew[i] = ytmp[i]
        enorm = 0.0
        for i in range(dim):
            err = 0.0
            for j in range(7):
                err += E[j] * k[j][i]
            err *= h
            sc = atol + rtol * max(fabs(y[i]), fabs(ynew[i]))
            enorm += (err / sc) * (err / sc)
        enorm = sqrt(enorm / dim)
        if not isfinite(enorm):
            h *= 0.2
            continue
        if enorm <= 1.0:
            if hit:
                s = target
            else:
                s = s + h
            for i in range(dim):
                y[i] = ynew[i]
                k[0][i] = k[6][i]
            if count >= s_out.shape[0] - 2:
                s_out = np.concatenate([s_out, np.empty(s_out.shape[0])])
                y_out = np.concatenate([y_out, np.empty((y_out.shape[0], dim))])
                f_out = np.concatenate([f_out, np.empty((f_out.shape[0], dim))])
                c_out = np.concatenate([c_out, np.empty(c_out.shape[0], dtype=np.int64)])
                sv = s_out; yv = y_out; fv = f_out; cv = c_out
            sv[count] = s
            for i in range(dim):
                yv[count, i] = y[i]
                fv[count, i] = k[0][i]
            cv[count] = ch
            count += 1
            if hit:
                stop_idx += 1
            if is_sphere and y[0] * y[0] + y[1] * y[1] > 1.5 * 1.5:
                switch_chart(p.n, ncol, mode, &y[0])
                ch = 1 - ch
                eval_rhs(&p, mode, ch, &y[0], ncol, &cc[0], cz, k[0])
                sv[count] = s
                for i in range(dim):
                    yv[count, i] = y[i]
                    fv[count, i] = k[0][i]
                cv[count] = ch
                count += 1
            bad = 0
            for i in range(dim):
                if not isfinite(y[i]):
                    bad = 1
            if bad:
                status = 3
                break
            if enorm == 0.0:
                fac = 5.0
            else:
                fac = min(5.0, max(0.2, 0.9 * pow(enorm, -0.2)))
            if hit:
                h = max(h * fac, h_free)
            else:
                h = h * fac
        else:
            h *= max(0.2, 0.9 * pow(enorm, -0.2))
    return (s_out[:count].copy(), y_out[:count].copy(), f_out[:count].copy(),
            c_out[:count].copy(), status)


def metric_jet_many(cnp.int64_t[::1] iprog, double[::1] g0p, double[::1] dp, double[::1] bp,
                    charts, X, int order=2):
    cdef Prog p
    cdef Geo g
    cdef double xx[NM]
    cdef int i, r, a, b, c, d, n, N
    load_prog(&p, iprog, g0p, dp, bp)
    n = p.n
    cdef double[:, ::1] Xv = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
    cdef cnp.int64_t[::1] cv = np.ascontiguousarray(charts, dtype=np.int64)
    N = Xv.shape[0]
    al = np.empty((N, n, n)); om = np.empty((N, n))
    dal = np.empty((N, n, n, n)); dom = np.empty((N, n, n))
    ddal = np.empty((N, n, n, n, n)); ddom = np.empty((N, n, n, n))
    cdef double[:, :, ::1] alv = al
    cdef double[:, ::1] omv = om
    cdef double[:, :, :, ::1] dalv = dal
    cdef double[:, :, ::1] domv = dom
    cdef double[:, :, :, :, ::1] ddalv = ddal
    cdef double[:, :, :, ::1] ddomv = ddom
    for r in range(N):
        for i in range(n):
            xx[i] = Xv[r, i]
        compute_metric(&p, <int>cv[r], xx, &g)
        for a in range(n):
            omv[r, a] = g.om[a]
            for b in range(n):
                alv[r, a, b] = g.al[I2(a, b)]
                domv[r, a, b] = g.dom[I2(a, b)]
                for c in range(n):
                    dalv[r, a, b, c] = g.dal[I3(a, b, c)]
                    ddomv[r, a, b, c] = g.ddom[I3(a, b, c)]
                    for d in range(n):
                        ddalv[r, a, b, c, d] = g.ddal[I4(a, b, c, d)]
    if order == 0:
        return al, om
    if order == 1:
        return al, dal, om, dom
    return al, dal, ddal, om, dom, ddom
