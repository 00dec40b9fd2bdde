# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Scalar kernel for the 2-joint governed arm.

Mirror of the numpy reference path: identical formulas, per-stage governor
re-evaluation, identical log layout.  Kept free of the Python API in the
hot loop so a full 20 s run stays in the microsecond-per-step regime.
"""
from libc.math cimport cos, sin, exp, log, sqrt

DEF MAX_PTS = 128  # two links x 64 samples

# parameter vector layout (see _backend.pack_params)
DEF P_L1 = 0
DEF P_L2 = 1
DEF P_M1 = 2
DEF P_M2 = 3
DEF P_KP = 4
DEF P_KD = 8
DEF P_LAMKP = 12
DEF P_LSQ = 13
DEF P_OX = 14
DEF P_OY = 15
DEF P_R = 16
DEF P_BDIST = 17
DEF P_BH = 18
DEF P_ALPHA = 19
DEF P_GAIN = 20
DEF P_TX = 24
DEF P_TY = 25
DEF P_NK = 26
DEF P_TOL = 27
DEF P_ZOH = 28

DEF DEGENERATE_DIST = 1e-9
DEF DEGENERATE_NORMAL_SQ = 1e-18


cdef struct FieldEval:
    double dq1, dq2, dqd1, dqd2, rho1, rho2
    double H, delta, h_ss, V
    double slack, resid, gradnorm, offset


cdef int _clearance_terms(const double* p, double g1, double g2,
                          double* h_ss, double* gh1, double* gh2) nogil:
    """Soft clearance h(g) = softmin distance - R and its g-gradient."""
    cdef int nk = <int> p[P_NK]
    cdef double l1 = p[P_L1], l2 = p[P_L2]
    cdef double ox = p[P_OX], oy = p[P_OY]
    cdef double beta = p[P_BDIST]
    cdef double px[MAX_PTS]
    cdef double py[MAX_PTS]
    cdef double dist[MAX_PTS]
    cdef double c1 = cos(g1), s1 = sin(g1)
    cdef double c12 = cos(g1 + g2), s12 = sin(g1 + g2)
    cdef double j1x = l1 * c1, j1y = l1 * s1          # elbow
    cdef double sx2 = l2 * c12, sy2 = l2 * s12        # link-2 span
    cdef int i, j, npts = 2 * nk
    cdef double frac, dmin, dx, dy

    for j in range(nk):
        frac = (j + 1.0) / nk
        px[j] = frac * j1x
        py[j] = frac * j1y
        px[nk + j] = j1x + frac * sx2
        py[nk + j] = j1y + frac * sy2

    dmin = 1e300
    for i in range(npts):
        dx = px[i] - ox
        dy = py[i] - oy
        dist[i] = sqrt(dx * dx + dy * dy)
        if dist[i] < DEGENERATE_DIST:
            return -2
        if dist[i] < dmin:
            dmin = dist[i]

    cdef double z = 0.0
    cdef double w, u_x, u_y, rel_x, rel_y
    cdef double soft, acc1 = 0.0, acc2 = 0.0
    for i in range(npts):
        z += exp(-beta * (dist[i] - dmin))
    soft = dmin - log(z) / beta

    for i in range(npts):
        w = exp(-beta * (dist[i] - dmin)) / z
        u_x = (px[i] - ox) / dist[i]
        u_y = (py[i] - oy) / dist[i]
        # joint 1 sweeps every point about the origin
        acc1 += w * (-py[i] * u_x + px[i] * u_y)
        if i >= nk:
            # joint 2 sweeps link-2 points about the elbow
            rel_x = px[i] - j1x
            rel_y = py[i] - j1y
            acc2 += w * (-rel_y * u_x + rel_x * u_y)

    h_ss[0] = soft - p[P_R]
    gh1[0] = acc1
    gh2[0] = acc2
    return 0


cdef double _min_dist_at(const double* p, double q1, double q2) nogil:
    cdef int nk = <int> p[P_NK]
    cdef double l1 = p[P_L1], l2 = p[P_L2]
    cdef double ox = p[P_OX], oy = p[P_OY]
    cdef double c1 = cos(q1), s1 = sin(q1)
    cdef double c12 = cos(q1 + q2), s12 = sin(q1 + q2)
    cdef double j1x = l1 * c1, j1y = l1 * s1
    cdef double sx2 = l2 * c12, sy2 = l2 * s12
    cdef double frac, dx, dy, d, dmin = 1e300
    cdef int j
    for j in range(nk):
        frac = (j + 1.0) / nk
        dx = frac * j1x - ox
        dy = frac * j1y - oy
        d = sqrt(dx * dx + dy * dy)
        if d < dmin:
            dmin = d
        dx = j1x + frac * sx2 - ox
        dy = j1y + frac * sy2 - oy
        d = sqrt(dx * dx + dy * dy)
        if d < dmin:
            dmin = d
    return dmin


cdef int _field(const double* p, double q1, double q2, double qd1, double qd2,
                double g1, double g2, FieldEval* out) nogil:
    # --- rigid-body dynamics under the PD law -----------------------------
    cdef double l1 = p[P_L1], l2 = p[P_L2]
    cdef double m1 = p[P_M1], m2 = p[P_M2]
    cdef double c2 = cos(q2), s2 = sin(q2)
    cdef double m11 = (m1 + m2) * l1 * l1 + m2 * l2 * l2 + 2.0 * m2 * l1 * l2 * c2
    cdef double m12 = m2 * l2 * l2 + m2 * l1 * l2 * c2
    cdef double m22 = m2 * l2 * l2
    cdef double hcor = m2 * l1 * l2 * s2
    cdef double e1 = q1 - g1, e2 = q2 - g2
    cdef double tau1 = -(p[P_KP] * e1 + p[P_KP + 1] * e2) - (p[P_KD] * qd1 + p[P_KD + 1] * qd2)
    cdef double tau2 = -(p[P_KP + 2] * e1 + p[P_KP + 3] * e2) - (p[P_KD + 2] * qd1 + p[P_KD + 3] * qd2)
    cdef double rhs1 = tau1 - (-hcor * qd2 * qd1 - hcor * (qd1 + qd2) * qd2)
    cdef double rhs2 = tau2 - (hcor * qd1 * qd1)
    cdef double det = m11 * m22 - m12 * m12
    cdef double qdd1 = (m22 * rhs1 - m12 * rhs2) / det
    cdef double qdd2 = (m11 * rhs2 - m12 * rhs1) / det

    # --- barrier at (x, g) -------------------------------------------------
    cdef double h_ss = 0.0, gh1 = 0.0, gh2 = 0.0
    if _clearance_terms(p, g1, g2, &h_ss, &gh1, &gh2) != 0:
        return -2

    cdef double lam = p[P_LAMKP], lsq = p[P_LSQ]
    cdef double gamma, ggam1, ggam2
    if h_ss > 0.0:
        gamma = lam / (2.0 * lsq) * h_ss * h_ss
        ggam1 = lam / lsq * h_ss * gh1
        ggam2 = lam / lsq * h_ss * gh2
    else:
        gamma = 0.0
        ggam1 = 0.0
        ggam2 = 0.0

    cdef double v_el = 0.5 * (e1 * (p[P_KP] * e1 + p[P_KP + 1] * e2)
                              + e2 * (p[P_KP + 2] * e1 + p[P_KP + 3] * e2))
    cdef double v_kin = 0.5 * (qd1 * (m11 * qd1 + m12 * qd2)
                               + qd2 * (m12 * qd1 + m22 * qd2))
    cdef double vlyap = v_el + v_kin
    cdef double delta = gamma - vlyap
    # grad_g Delta = grad_g Gamma* + K_P (q - g)
    cdef double gd1 = ggam1 + (p[P_KP] * e1 + p[P_KP + 1] * e2)
    cdef double gd2 = ggam2 + (p[P_KP + 2] * e1 + p[P_KP + 3] * e2)

    cdef double beta_h = p[P_BH]
    cdef double mh = delta if delta < h_ss else h_ss
    cdef double ed = exp(-beta_h * (delta - mh))
    cdef double eh = exp(-beta_h * (h_ss - mh))
    cdef double zh = ed + eh
    cdef double hval = mh - log(zh) / beta_h
    cdef double wd = ed / zh, wh = eh / zh

    cdef double gH1 = wd * gd1 + wh * gh1
    cdef double gH2 = wd * gd2 + wh * gh2
    cdef double damp = (qd1 * (p[P_KD] * qd1 + p[P_KD + 1] * qd2)
                        + qd2 * (p[P_KD + 2] * qd1 + p[P_KD + 3] * qd2))
    cdef double flow = wd * damp
    cdef double b = flow + p[P_ALPHA] * hval
    cdef double a1 = -gH1, a2 = -gH2

    # --- governor: closed-form projected attraction ------------------------
    cdef double eg1 = g1 - p[P_TX], eg2 = g2 - p[P_TY]
    cdef double v1 = -(p[P_GAIN] * eg1 + p[P_GAIN + 1] * eg2)
    cdef double v2 = -(p[P_GAIN + 2] * eg1 + p[P_GAIN + 3] * eg2)
    cdef double nsq = a1 * a1 + a2 * a2
    cdef double viol = a1 * v1 + a2 * v2 - b
    cdef double rho1, rho2
    if nsq < DEGENERATE_NORMAL_SQ or viol <= 0.0:
        rho1 = v1
        rho2 = v2
    else:
        rho1 = v1 - (viol / nsq) * a1
        rho2 = v2 - (viol / nsq) * a2

    out.dq1 = qd1
    out.dq2 = qd2
    out.dqd1 = qdd1
    out.dqd2 = qdd2
    out.rho1 = rho1
    out.rho2 = rho2
    out.H = hval
    out.delta = delta
    out.h_ss = h_ss
    out.V = vlyap
    out.slack = b - (a1 * rho1 + a2 * rho2)
    out.resid = (rho1 * rho1 + rho2 * rho2) - (v1 * rho1 + v2 * rho2)
    out.gradnorm = sqrt(gH1 * gH1 + gH2 * gH2)
    out.offset = b
    return 0


cdef inline void _acc_stats(FieldEval* fe, double* st) nogil:
    if fe.H < st[0]:
        st[0] = fe.H
    if fe.slack < st[1]:
        st[1] = fe.slack
    if fe.resid > st[2]:
        st[2] = fe.resid
    if fe.H >= 0.0 and fe.offset < st[3]:
        st[3] = fe.offset
    st[4] += 1.0


def field_eval(double[::1] p, double[::1] y):
    """Single field evaluation (testing/benchmark hook).

    Returns (dy, diag) with diag = [H, delta, h_ss, V, slack, resid,
    gradnorm, offset]."""
    cdef FieldEval fe
    cdef int rc = _field(&p[0], y[0], y[1], y[2], y[3], y[4], y[5], &fe)
    if rc != 0:
        raise ValueError("degenerate geometry")
    import numpy as np
    dy = np.array([fe.dq1, fe.dq2, fe.dqd1, fe.dqd2, fe.rho1, fe.rho2])
    diag = np.array([fe.H, fe.delta, fe.h_ss, fe.V, fe.slack, fe.resid,
                     fe.gradnorm, fe.offset])
    return dy, diag


def run(double[::1] p, double[::1] y0, double dt, Py_ssize_t nsteps,
        double[:, ::1] out, double[::1] stats):
    """Integrate nsteps RK4 steps, logging every accepted state.

    Returns -1 on completion, -2 on degenerate geometry, else the index of
    the last valid log row when the barrier fell below -tol (the breach
    time/value are left in stats[5]/stats[6])."""
    cdef double y[6]
    cdef double ys[6]
    cdef double k1[6]
    cdef double k2[6]
    cdef double k3[6]
    cdef double k4[6]
    cdef double st[8]
    cdef FieldEval fe, fes
    cdef Py_ssize_t k
    cdef int i, rc
    cdef double t, tol = p[P_TOL]
    cdef bint zoh = p[P_ZOH] != 0.0
    cdef int status = -1

    for i in range(6):
        y[i] = y0[i]
    st[0] = 1e300
    st[1] = 1e300
    st[2] = -1e300
    st[3] = 1e300
    st[4] = 0.0
    st[5] = 0.0
    st[6] = 0.0
    st[7] = 0.0

    with nogil:
        for k in range(nsteps + 1):
            t = k * dt
            rc = _field(&p[0], y[0], y[1], y[2], y[3], y[4], y[5], &fe)
            if rc != 0:
                status = -2
                break
            _acc_stats(&fe, st)
            out[k, 0] = t
            for i in range(6):
                out[k, 1 + i] = y[i]
            out[k, 7] = fe.rho1
            out[k, 8] = fe.rho2
            out[k, 9] = fe.H
            out[k, 10] = fe.delta
            out[k, 11] = fe.h_ss
            out[k, 12] = fe.V
            out[k, 13] = _min_dist_at(&p[0], y[0], y[1])
            out[k, 14] = fe.slack
            out[k, 15] = fe.resid
            out[k, 16] = fe.gradnorm
            if fe.H < -tol:
                st[5] = t
                st[6] = fe.H
                status = <int> k
                break
            if k == nsteps:
                break

            k1[0] = fe.dq1; k1[1] = fe.dq2; k1[2] = fe.dqd1
            k1[3] = fe.dqd2; k1[4] = fe.rho1; k1[5] = fe.rho2

            if zoh:
                for i in range(6):
                    ys[i] = y[i] + 0.5 * dt * k1[i]
                rc = _field(&p[0], ys[0], ys[1], ys[2], ys[3], ys[4], ys[5], &fes)
                if rc != 0:
                    status = -2
                    break
                k2[0] = fes.dq1; k2[1] = fes.dq2; k2[2] = fes.dqd1
                k2[3] = fes.dqd2; k2[4] = fe.rho1; k2[5] = fe.rho2
                for i in range(6):
                    ys[i] = y[i] + 0.5 * dt * k2[i]
                rc = _field(&p[0], ys[0], ys[1], ys[2], ys[3], ys[4], ys[5], &fes)
                if rc != 0:
                    status = -2
                    break
                k3[0] = fes.dq1; k3[1] = fes.dq2; k3[2] = fes.dqd1
                k3[3] = fes.dqd2; k3[4] = fe.rho1; k3[5] = fe.rho2
                for i in range(6):
                    ys[i] = y[i] + dt * k3[i]
                rc = _field(&p[0], ys[0], ys[1], ys[2], ys[3], ys[4], ys[5], &fes)
                if rc != 0:
                    status = -2
                    break
                k4[0] = fes.dq1; k4[1] = fes.dq2; k4[2] = fes.dqd1
                k4[3] = fes.dqd2; k4[4] = fe.rho1; k4[5] = fe.rho2
            else:
                for i in range(6):
                    ys[i] = y[i] + 0.5 * dt * k1[i]
                rc = _field(&p[0], ys[0], ys[1], ys[2], ys[3], ys[4], ys[5], &fes)
                if rc != 0:
                    status = -2
                    break
                _acc_stats(&fes, st)
                if fes.H < -tol:
                    st[5] = t + 0.5 * dt
                    st[6] = fes.H
                    status = <int> k
                    break
                k2[0] = fes.dq1; k2[1] = fes.dq2; k2[2] = fes.dqd1
                k2[3] = fes.dqd2; k2[4] = fes.rho1; k2[5] = fes.rho2
                for i in range(6):
                    ys[i] = y[i] + 0.5 * dt * k2[i]
                rc = _field(&p[0], ys[0], ys[1], ys[2], ys[3], ys[4], ys[5], &fes)
                if rc != 0:
                    status = -2
                    break
                _acc_stats(&fes, st)
                if fes.H < -tol:
                    st[5] = t + 0.5 * dt
                    st[6] = fes.H
                    status = <int> k
                    break
                k3[0] = fes.dq1; k3[1] = fes.dq2; k3[2] = fes.dqd1
                k3[3] = fes.dqd2; k3[4] = fes.rho1; k3[5] = fes.rho2
                for i in range(6):
                    ys[i] = y[i] + dt * k3[i]
                rc = _field(&p[0], ys[0], ys[1], ys[2], ys[3], ys[4], ys[5], &fes)
                if rc != 0:
                    status = -2
                    break
                _acc_stats(&fes, st)
                if fes.H < -tol:
                    st[5] = t + dt
                    st[6] = fes.H
                    status = <int> k
                    break
                k4[0] = fes.dq1; k4[1] = fes.dq2; k4[2] = fes.dqd1
                k4[3] = fes.dqd2; k4[4] = fes.rho1; k4[5] = fes.rho2

            for i in range(6):
                y[i] = y[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])

    for i in range(8):
        stats[i] = st[i]
    return status
