"""Pure numpy implementation of the numerical core.

This is the fallback for :mod:`fermat_morse._kernel` and the reference it is
tested against.  Both expose the same functions with the same signatures:

``field_jets(iprog, g0p, dp, bp, chart, x)``
    g0, delta, beta with first and second partial derivatives.
``metric_jet(iprog, g0p, dp, bp, chart, x)``
    alpha and the drift one-form omega = g0~ delta, to second order.
``local_geometry(iprog, g0p, dp, bp, chart, x)``
    Christoffel symbols, curvature, eta, Omega and their derivatives.
``rhs(iprog, g0p, dp, bp, mode, chart, y, ncol, colconst, cz)``
    right-hand side of one of the geodesic / Jacobi systems.
``integrate(iprog, g0p, dp, bp, mode, chart, y0, s0, s1, rtol, atol, ncol,
colconst, cz, t_eval, max_steps)``
    Dormand-Prince 5(4) with chart switching; returns every accepted node.

Index conventions: ``d*[l, ...]`` is the partial derivative along ``x^l``;
``gamma[k, i, j]`` is Gamma^k_ij; ``riemann[l, k, i, j]`` is R^l_kij with
``R(X, Y)Z = R^l_kij Z^k X^i Y^j``; ``big_omega[k, i]`` is Omega^k_i.

Modes: 0 geodesic spray with pointwise alpha-speed; 1 geodesic plus the
Fermat Jacobi system (columns carry the constant alpha(x0)[v0, J'(0)]);
2 the lightlike-lift geodesic with fixed C_z plus the coupled (J, W) system
(columns carry C_JW).
"""

from __future__ import annotations

import numpy as np

MODE_GEODESIC, MODE_FERMAT_JACOBI, MODE_SPACETIME_JACOBI = 0, 1, 2
STATUS_OK, STATUS_MAX_STEPS, STATUS_UNDERFLOW, STATUS_DOMAIN = 0, 1, 2, 3
SWITCH_RADIUS = 1.5
FD_STEP_1 = 1e-5
FD_STEP_2 = 1e-3


# -- catalog values -------------------------------------------------------


def _bump(x, p, off):
    """Gaussian bump exp(-|x-c|^2/s^2) with its gradient and Hessian."""
    s = p[off + 1]
    c = p[off + 2: off + 2 + x.shape[0]]
    d = x - c
    e = np.exp(-(d @ d) / s**2)
    de = -2.0 * d / s**2 * e
    dde = (4.0 * np.outer(d, d) / s**4 - 2.0 * np.eye(x.shape[0]) / s**2) * e
    return e, de, dde, d


def _g0_jet(code, p, x):
    nb = x.shape[0]
    eye = np.eye(nb)
    if code == 0:
        return p.reshape(nb, nb).copy(), np.zeros((nb, nb, nb)), np.zeros((nb, nb, nb, nb))
    if code == 1:
        a = p[0]
        e, de, dde, _ = _bump(x, p, 0)
        f, df, ddf = 1.0 + a * e, a * de, a * dde
    else:
        rho2 = p[0] ** 2
        s = x @ x
        f = 4.0 * rho2 / (1.0 + s) ** 2
        f1 = -8.0 * rho2 / (1.0 + s) ** 3
        f2 = 24.0 * rho2 / (1.0 + s) ** 4
        df = 2.0 * x * f1
        ddf = 4.0 * np.outer(x, x) * f2 + 2.0 * f1 * eye
    return f * eye, np.einsum("l,ij->lij", df, eye), np.einsum("lm,ij->lmij", ddf, eye)


def _rot(nb):
    r = np.zeros((nb, nb))
    r[0, 1], r[1, 0] = -1.0, 1.0
    return r


def _delta_jet(code, p, x):
    nb = x.shape[0]
    if code == 0:
        return p.copy(), np.zeros((nb, nb)), np.zeros((nb, nb, nb))
    if code == 1:
        rot = p[0] * _rot(nb)
        # dD[l, k] = dD^k / dx^l
        return rot @ x, rot.T.copy(), np.zeros((nb, nb, nb))
    amp, w = p[0], p[2]
    s = p[1]
    c = p[3: 3 + nb]
    d = x - c
    e = np.exp(-(d @ d) / s**2)
    de = -2.0 * d / s**2 * e
    dde = (4.0 * np.outer(d, d) / s**4 - 2.0 * np.eye(nb) / s**2) * e
    mat = np.eye(nb) + (w * _rot(nb) if w else 0.0)
    u = mat @ d
    val = amp * e * u
    dval = amp * (np.outer(de, u) + e * mat.T)
    ddval = amp * (
        np.einsum("lm,k->lmk", dde, u)
        + np.einsum("l,km->lmk", de, mat)
        + np.einsum("m,kl->lmk", de, mat)
    )
    return val, dval, ddval


def _beta_jet(code, p, chart, x):
    nb = x.shape[0]
    if code == 0:
        return p[0], np.zeros(nb), np.zeros((nb, nb))
    if code == 1:
        a = p[0]
        e, de, dde, _ = _bump(x, p, 0)
        q = 1.0 + a * e
        val = 1.0 / q
        dq, ddq = a * de, a * dde
        return val, -dq / q**2, -ddq / q**2 + 2.0 * np.outer(dq, dq) / q**3
    b0, b1 = p[0], p[1]
    sign = 1.0 if chart == 0 else -1.0
    s = x @ x
    z = sign * (s - 1.0) / (s + 1.0)
    z1 = sign * 2.0 / (s + 1.0) ** 2
    z2 = -sign * 4.0 / (s + 1.0) ** 3
    dz = 2.0 * x * z1
    ddz = 4.0 * np.outer(x, x) * z2 + 2.0 * z1 * np.eye(nb)
    return b0 + b1 * z, b1 * dz, b1 * ddz


def _fd_jet(value, x):
    """Value, gradient and Hessian of ``value`` by 4th-order central differences."""
    nb = x.shape[0]
    f0 = np.asarray(value(x), dtype=float)
    w = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
    offs = np.array([-2.0, -1.0, 1.0, 2.0])
    grad = np.zeros((nb,) + f0.shape)
    for l in range(nb):
        h = FD_STEP_1 * (1.0 + abs(x[l]))
        acc = 0.0
        for wk, ok in zip(w, offs):
            xp = x.copy()
            xp[l] += ok * h
            acc = acc + wk * np.asarray(value(xp))
        grad[l] = acc / h
    hess = np.zeros((nb, nb) + f0.shape)
    for l in range(nb):
        hl = FD_STEP_2 * (1.0 + abs(x[l]))
        for m in range(l, nb):
            hm = FD_STEP_2 * (1.0 + abs(x[m]))
            acc = 0.0
            for wa, oa in zip(w, offs):
                for wb, ob in zip(w, offs):
                    xp = x.copy()
                    xp[l] += oa * hl
                    xp[m] += ob * hm
                    acc = acc + wa * wb * np.asarray(value(xp))
            hess[l, m] = acc / (hl * hm)
            hess[m, l] = hess[l, m]
    return f0, grad, hess


def field_jets(iprog, g0p, dp, bp, chart, x):
    """g0, delta, beta and their derivatives at ``x`` (full dimension)."""
    x = np.asarray(x, dtype=float)
    n = int(iprog[1])
    n_extra = int(iprog[2])
    nb = n - n_extra
    xb = x[:nb]
    g0c, dc, bc = int(iprog[3]), int(iprog[4]), int(iprog[5])
    if iprog[6]:
        G, dG, ddG = _fd_jet(lambda z: _g0_jet(g0c, g0p, z)[0], xb)
    else:
        G, dG, ddG = _g0_jet(g0c, g0p, xb)
    if iprog[7]:
        D, dD, ddD = _fd_jet(lambda z: _delta_jet(dc, dp, z)[0], xb)
    else:
        D, dD, ddD = _delta_jet(dc, dp, xb)
    if iprog[8]:
        b, db, ddb = _fd_jet(lambda z: _beta_jet(bc, bp, chart, z)[0], xb)
        b = float(b)
    else:
        b, db, ddb = _beta_jet(bc, bp, chart, xb)
    if n_extra:
        Gf = np.eye(n)
        Gf[:nb, :nb] = G
        dGf = np.zeros((n, n, n))
        dGf[:nb, :nb, :nb] = dG
        ddGf = np.zeros((n, n, n, n))
        ddGf[:nb, :nb, :nb, :nb] = ddG
        Df = np.zeros(n)
        Df[:nb] = D
        dDf = np.zeros((n, n))
        dDf[:nb, :nb] = dD
        ddDf = np.zeros((n, n, n))
        ddDf[:nb, :nb, :nb] = ddD
        dbf = np.zeros(n)
        dbf[:nb] = db
        ddbf = np.zeros((n, n))
        ddbf[:nb, :nb] = ddb
        return Gf, dGf, ddGf, Df, dDf, ddDf, float(b), dbf, ddbf
    return G, dG, ddG, D, dD, ddD, float(b), db, ddb


def metric_jet(iprog, g0p, dp, bp, chart, x):
    """Return ``(alpha, dalpha, ddalpha, omega, domega, ddomega)``."""
    G, dG, ddG, D, dD, ddD, b, db, ddb = field_jets(iprog, g0p, dp, bp, chart, x)
    gt = G / b
    dgt = dG / b - np.einsum("l,ij->lij", db, G) / b**2
    ddgt = (
        ddG / b
        - (np.einsum("lij,m->lmij", dG, db) + np.einsum("mij,l->lmij", dG, db)) / b**2
        - np.einsum("lm,ij->lmij", ddb, G) / b**2
        + 2.0 * np.einsum("l,m,ij->lmij", db, db, G) / b**3
    )
    om = gt @ D
    dom = np.einsum("lkj,j->lk", dgt, D) + np.einsum("kj,lj->lk", gt, dD)
    ddom = (
        np.einsum("lmkj,j->lmk", ddgt, D)
        + np.einsum("lkj,mj->lmk", dgt, dD)
        + np.einsum("mkj,lj->lmk", dgt, dD)
        + np.einsum("kj,lmj->lmk", gt, ddD)
    )
    al = gt + np.outer(om, om)
    dal = dgt + np.einsum("lk,j->lkj", dom, om) + np.einsum("k,lj->lkj", om, dom)
    ddal = (
        ddgt
        + np.einsum("lmk,j->lmkj", ddom, om)
        + np.einsum("lk,mj->lmkj", dom, dom)
        + np.einsum("mk,lj->lmkj", dom, dom)
        + np.einsum("k,lmj->lmkj", om, ddom)
    )
    return al, dal, ddal, om, dom, ddom


def local_geometry(iprog, g0p, dp, bp, chart, x):
    """Connection, curvature and drift quantities of alpha at ``x``."""
    al, dal, ddal, om, dom, ddom = metric_jet(iprog, g0p, dp, bp, chart, x)
    ainv = np.linalg.inv(al)
    # lowered Christoffel symbols Gamma_{l,ij} and their derivatives
    low = 0.5 * (np.einsum("ilj->lij", dal) + np.einsum("jli->lij", dal) - dal)
    gam = np.einsum("kl,lij->kij", ainv, low)
    dlow = 0.5 * (
        np.einsum("milj->mlij", ddal) + np.einsum("mjli->mlij", ddal) - ddal
    )
    dgam = np.einsum("kl,mlij->mkij", ainv, dlow - np.einsum("mlp,pij->mlij", dal, gam))
    riem = (
        np.einsum("iljk->lkij", dgam)
        - np.einsum("jlik->lkij", dgam)
        + np.einsum("lip,pjk->lkij", gam, gam)
        - np.einsum("ljp,pik->lkij", gam, gam)
    )
    eta = ainv @ om
    deta = np.einsum("kp,lp->lk", ainv, dom - np.einsum("lpq,q->lp", dal, eta))
    fmat = dom.T - dom  # F[k, i] = d_i omega_k - d_k omega_i
    dfmat = np.einsum("mik->mki", ddom) - ddom
    bom = ainv @ fmat
    dbom = np.einsum("kp,mpi->mki", ainv, dfmat - np.einsum("mpq,qi->mpi", dal, bom))
    return {
        "alpha": al,
        "alpha_inv": ainv,
        "dalpha": dal,
        "gamma": gam,
        "dgamma": dgam,
        "riemann": riem,
        "omega_form": om,
        "eta": eta,
        "deta": deta,
        "big_omega": bom,
        "dbig_omega": dbom,
    }


# -- right-hand sides -----------------------------------------------------


def _unpack(y, n, ncol, mode):
    x = y[:n]
    v = y[n: 2 * n]
    if mode == MODE_GEODESIC:
        return x, v, None, None, None
    o = 2 * n
    J = y[o: o + n * ncol].reshape(n, ncol)
    o += n * ncol
    P = y[o: o + n * ncol].reshape(n, ncol)
    o += n * ncol
    W = y[o: o + ncol] if mode == MODE_SPACETIME_JACOBI else None
    return x, v, J, P, W


def state_size(n, mode, ncol):
    if mode == MODE_GEODESIC:
        return 2 * n
    return 2 * n + 2 * n * ncol + (ncol if mode == MODE_SPACETIME_JACOBI else 0)


def rhs(iprog, g0p, dp, bp, mode, chart, y, ncol, colconst, cz):
    n = int(iprog[1])
    y = np.asarray(y, dtype=float)
    x, v, J, P, W = _unpack(y, n, ncol, mode)
    geo = local_geometry(iprog, g0p, dp, bp, chart, x)
    al, gam, bom = geo["alpha"], geo["gamma"], geo["big_omega"]
    speed = np.sqrt(v @ al @ v)
    c = cz if mode == MODE_SPACETIME_JACOBI else speed
    out = np.empty_like(y)
    out[:n] = v
    out[n: 2 * n] = -np.einsum("kij,i,j->k", gam, v, v) - c * (bom @ v)
    if mode == MODE_GEODESIC:
        return out
    colconst = np.asarray(colconst, dtype=float)
    riem, dbom = geo["riemann"], geo["dbig_omega"]
    gv = np.einsum("kij,i->kj", gam, v)
    dJ = P - gv @ J
    rjv = np.einsum("lkij,k,j,ic->lc", riem, v, v, J)
    # (nabla_J Omega)[v] for every column
    nab = (
        np.einsum("mki,i,mc->kc", dbom, v, J)
        + np.einsum("kmp,pi,i,mc->kc", gam, bom, v, J)
        - np.einsum("pmi,kp,i,mc->kc", gam, bom, v, J)
    )
    bv = bom @ v
    if mode == MODE_FERMAT_JACOBI:
        lin = np.outer(bv, colconst / speed)
    else:
        lin = np.outer(bv, colconst)
    dP = -rjv - lin - c * nab - c * (bom @ P) - gv @ P
    o = 2 * n
    out[o: o + n * ncol] = dJ.ravel()
    o += n * ncol
    out[o: o + n * ncol] = dP.ravel()
    o += n * ncol
    if mode == MODE_SPACETIME_JACOBI:
        eta, deta = geo["eta"], geo["deta"]
        nab_eta = deta.T @ J + np.einsum("kmp,p,mc->kc", gam, eta, J)
        out[o: o + ncol] = colconst + (al @ eta) @ P + (al @ v) @ nab_eta
    return out


def transition_state(iprog, y, ncol, mode):
    """Move a state vector to the other stereographic chart."""
    n = int(iprog[1])
    y = np.array(y, dtype=float)
    x = y[:2].copy()
    r2 = x @ x
    jac = (np.eye(2) * r2 - 2.0 * np.outer(x, x)) / r2**2
    y[:2] = x / r2
    y[n: n + 2] = jac @ y[n: n + 2]
    if mode != MODE_GEODESIC:
        o = 2 * n
        for _ in range(2):
            blk = y[o: o + n * ncol].reshape(n, ncol)
            blk[:2] = jac @ blk[:2]
            y[o: o + n * ncol] = blk.ravel()
            o += n * ncol
    return y


# -- Dormand-Prince 5(4) ----------------------------------------------------

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


def integrate(iprog, g0p, dp, bp, mode, chart, y0, s0, s1, rtol, atol, ncol,
              colconst, cz, t_eval=None, max_steps=200000):
    """Integrate from ``s0`` to ``s1`` (``s1 > s0``).

    Returns ``(s, y, f, charts, status)`` with one row per accepted node.  A
    chart switch duplicates the node: first in the old chart, then in the new.
    Nodes land exactly on every ``t_eval`` value inside ``[s0, s1]``.
    """
    is_sphere = int(iprog[0]) == 2
    colconst = np.asarray(colconst, dtype=float)

    def f(ch, yy):
        return rhs(iprog, g0p, dp, bp, mode, ch, yy, ncol, colconst, cz)

    stops = [] if t_eval is None else sorted(float(t) for t in t_eval if s0 < t < s1)
    stops.append(float(s1))
    y = np.array(y0, dtype=float)
    s = float(s0)
    ch = int(chart)
    k1 = f(ch, y)
    ss, ys, fs, cs = [s], [y.copy()], [k1.copy()], [ch]
    span = s1 - s0
    # initial step from the local time scale
    sc0 = atol + rtol * np.abs(y)
    d0 = np.sqrt(np.mean((y / sc0) ** 2))
    d1 = np.sqrt(np.mean((k1 / sc0) ** 2))
    h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
    h = min(h, span, 0.1 * span) if span > 0 else 0.0
    h = max(h, 1e-10 * max(1.0, span))
    status = STATUS_OK
    stop_idx = 0
    steps = 0
    while stop_idx < len(stops):
        target = stops[stop_idx]
        if steps >= max_steps:
            status = STATUS_MAX_STEPS
            break
        hit = False
        h_free = h
        if s + h >= target - 1e-14 * max(1.0, abs(target)):
            h = target - s
            hit = True
        if h < 1e-14 * max(1.0, abs(s)):
            if target - s <= 1e-14 * max(1.0, abs(s)):
                stop_idx += 1
                continue
            status = STATUS_UNDERFLOW
            break
        ks = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * kk for a, kk in zip(_A[i], ks) if a != 0.0)
            ks.append(f(ch, yi))
        ynew = yi  # stage 7 state equals the 5th-order solution
        err = h * sum(e * kk for e, kk in zip(_E, ks) if e != 0.0)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(ynew))
        enorm = np.sqrt(np.mean((err / sc) ** 2))
        steps += 1
        if not np.isfinite(enorm):
            h *= 0.2
            continue
        if enorm <= 1.0:
            s = target if hit else s + h
            y = ynew
            k1 = ks[6]
            ss.append(s); ys.append(y.copy()); fs.append(k1.copy()); cs.append(ch)
            if hit:
                stop_idx += 1
            if is_sphere and y[0] * y[0] + y[1] * y[1] > SWITCH_RADIUS**2:
                y = transition_state(iprog, y, ncol, mode)
                ch = 1 - ch
                k1 = f(ch, y)
                ss.append(s); ys.append(y.copy()); fs.append(k1.copy()); cs.append(ch)
            if not np.all(np.isfinite(y)):
                status = STATUS_DOMAIN
                break
            fac = 5.0 if enorm == 0 else min(5.0, max(0.2, 0.9 * enorm ** (-0.2)))
            h = max(h * fac, h_free) if hit else h * fac
        else:
            h *= max(0.2, 0.9 * enorm ** (-0.2))
    return (np.array(ss), np.array(ys), np.array(fs), np.array(cs, dtype=np.int64), status)


def metric_jet_many(iprog, g0p, dp, bp, charts, X, order=2):
    """Batched :func:`metric_jet` over the rows of ``X`` (one chart id per row).

    ``order`` 0 returns ``(alpha, omega)``; 1 adds first derivatives; 2 adds
    second derivatives, ordered as in :func:`metric_jet`.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    rows = [metric_jet(iprog, g0p, dp, bp, int(c), x) for c, x in zip(charts, X)]
    al, dal, ddal, om, dom, ddom = (np.array(t) for t in zip(*rows))
    if order == 0:
        return al, om
    if order == 1:
        return al, dal, om, dom
    return al, dal, ddal, om, dom, ddom
