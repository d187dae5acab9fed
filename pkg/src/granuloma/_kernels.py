"""Hot loops: compiled IMEX advancement kernels and the RK4 ODE oracle.

The per-field split loops below are deliberately flat: one pass filling the
upwind face fluxes, then one branch-free interior loop per field plus scalar
boundary updates.  Splitting keeps the working set per loop small enough for
LLVM to vectorize; a single fused loop over all ten arrays does not.  The
denominators (1 + dt*coef) are the frozen-coefficient implicit sinks that
make the update positivity-preserving under the CFL restriction.

Mirror-ghost Neumann boundaries reduce to one-sided differences at the walls
and zero face fluxes.
"""

import numba
import numpy as np


@numba.njit(cache=True, fastmath=True, nogil=True)
def advance_1d(u, v, w, z, nsteps, dt, h, beta, mu, f_sat):
    n = u.shape[0]
    ih = 1.0 / h
    ih2 = ih * ih
    izden = 1.0 / (1.0 + dt)
    Fu = np.zeros(n + 1)
    Fz = np.zeros(n + 1)
    un = np.empty(n)
    vn = np.empty(n)
    wn = np.empty(n)
    zn = np.empty(n)

    for _ in range(nsteps):
        for i in range(1, n):
            g = (v[i] - v[i - 1]) * ih
            Fu[i] = max(g, 0.0) * u[i - 1] + min(g, 0.0) * u[i]
            g = (w[i] - w[i - 1]) * ih
            Fz[i] = max(g, 0.0) * z[i - 1] + min(g, 0.0) * z[i]

        for i in range(1, n - 1):
            lap = (u[i - 1] - 2.0 * u[i] + u[i + 1]) * ih2
            un[i] = (u[i] + dt * (lap - (Fu[i + 1] - Fu[i]) * ih + beta)) \
                / (1.0 + dt * (v[i] + 1.0))
        un[0] = (u[0] + dt * ((u[1] - u[0]) * ih2 - Fu[1] * ih + beta)) \
            / (1.0 + dt * (v[0] + 1.0))
        un[n - 1] = (u[n - 1] + dt * ((u[n - 2] - u[n - 1]) * ih2
                                      + Fu[n - 1] * ih + beta)) \
            / (1.0 + dt * (v[n - 1] + 1.0))

        for i in range(1, n - 1):
            lap = (v[i - 1] - 2.0 * v[i] + v[i + 1]) * ih2
            vn[i] = (v[i] + dt * (lap + v[i] + mu * w[i])) / (1.0 + dt * u[i])
        vn[0] = (v[0] + dt * ((v[1] - v[0]) * ih2 + v[0] + mu * w[0])) \
            / (1.0 + dt * u[0])
        vn[n - 1] = (v[n - 1] + dt * ((v[n - 2] - v[n - 1]) * ih2
                                      + v[n - 1] + mu * w[n - 1])) \
            / (1.0 + dt * u[n - 1])

        for i in range(1, n - 1):
            lap = (w[i - 1] - 2.0 * w[i] + w[i + 1]) * ih2
            wn[i] = (w[i] + dt * (lap + u[i] * v[i])) \
                / (1.0 + dt * (z[i] + 1.0))
        wn[0] = (w[0] + dt * ((w[1] - w[0]) * ih2 + u[0] * v[0])) \
            / (1.0 + dt * (z[0] + 1.0))
        wn[n - 1] = (w[n - 1] + dt * ((w[n - 2] - w[n - 1]) * ih2
                                      + u[n - 1] * v[n - 1])) \
            / (1.0 + dt * (z[n - 1] + 1.0))

        for i in range(1, n - 1):
            lap = (z[i - 1] - 2.0 * z[i] + z[i + 1]) * ih2
            fw = w[i] / (1.0 + w[i]) if f_sat else w[i]
            zn[i] = (z[i] + dt * (lap - (Fz[i + 1] - Fz[i]) * ih
                                  + fw * z[i])) * izden
        fw = w[0] / (1.0 + w[0]) if f_sat else w[0]
        zn[0] = (z[0] + dt * ((z[1] - z[0]) * ih2 - Fz[1] * ih
                              + fw * z[0])) * izden
        fw = w[n - 1] / (1.0 + w[n - 1]) if f_sat else w[n - 1]
        zn[n - 1] = (z[n - 1] + dt * ((z[n - 2] - z[n - 1]) * ih2
                                      + Fz[n - 1] * ih + fw * z[n - 1])) * izden

        u, un = un, u
        v, vn = vn, v
        w, wn = wn, w
        z, zn = zn, z

    return u, v, w, z


@numba.njit(cache=True, fastmath=True, nogil=True)
def advance_2d(u, v, w, z, nsteps, dt, hx, hy, beta, mu, f_sat):
    n0, n1 = u.shape
    ihx = 1.0 / hx
    ihy = 1.0 / hy
    ihx2 = ihx * ihx
    ihy2 = ihy * ihy
    izden = 1.0 / (1.0 + dt)
    # face fluxes: Fux[i, j] sits on the x-face left of cell (i, j)
    Fux = np.zeros((n0 + 1, n1))
    Fuy = np.zeros((n0, n1 + 1))
    Fzx = np.zeros((n0 + 1, n1))
    Fzy = np.zeros((n0, n1 + 1))
    un = np.empty((n0, n1))
    vn = np.empty((n0, n1))
    wn = np.empty((n0, n1))
    zn = np.empty((n0, n1))

    for _ in range(nsteps):
        for i in range(1, n0):
            for j in range(n1):
                g = (v[i, j] - v[i - 1, j]) * ihx
                Fux[i, j] = max(g, 0.0) * u[i - 1, j] + min(g, 0.0) * u[i, j]
                g = (w[i, j] - w[i - 1, j]) * ihx
                Fzx[i, j] = max(g, 0.0) * z[i - 1, j] + min(g, 0.0) * z[i, j]
        for i in range(n0):
            for j in range(1, n1):
                g = (v[i, j] - v[i, j - 1]) * ihy
                Fuy[i, j] = max(g, 0.0) * u[i, j - 1] + min(g, 0.0) * u[i, j]
                g = (w[i, j] - w[i, j - 1]) * ihy
                Fzy[i, j] = max(g, 0.0) * z[i, j - 1] + min(g, 0.0) * z[i, j]

        # mirror ghosts via clamped neighbor indices
        for i in range(n0):
            im = i - 1 if i > 0 else 0
            ip = i + 1 if i < n0 - 1 else n0 - 1
            for j in range(n1):
                jm = j - 1 if j > 0 else 0
                jp = j + 1 if j < n1 - 1 else n1 - 1

                lap = (u[im, j] - 2.0 * u[i, j] + u[ip, j]) * ihx2 \
                    + (u[i, jm] - 2.0 * u[i, j] + u[i, jp]) * ihy2
                div = (Fux[i + 1, j] - Fux[i, j]) * ihx \
                    + (Fuy[i, j + 1] - Fuy[i, j]) * ihy
                un[i, j] = (u[i, j] + dt * (lap - div + beta)) \
                    / (1.0 + dt * (v[i, j] + 1.0))

                lap = (v[im, j] - 2.0 * v[i, j] + v[ip, j]) * ihx2 \
                    + (v[i, jm] - 2.0 * v[i, j] + v[i, jp]) * ihy2
                vn[i, j] = (v[i, j] + dt * (lap + v[i, j] + mu * w[i, j])) \
                    / (1.0 + dt * u[i, j])

                lap = (w[im, j] - 2.0 * w[i, j] + w[ip, j]) * ihx2 \
                    + (w[i, jm] - 2.0 * w[i, j] + w[i, jp]) * ihy2
                wn[i, j] = (w[i, j] + dt * (lap + u[i, j] * v[i, j])) \
                    / (1.0 + dt * (z[i, j] + 1.0))

                lap = (z[im, j] - 2.0 * z[i, j] + z[ip, j]) * ihx2 \
                    + (z[i, jm] - 2.0 * z[i, j] + z[i, jp]) * ihy2
                div = (Fzx[i + 1, j] - Fzx[i, j]) * ihx \
                    + (Fzy[i, j + 1] - Fzy[i, j]) * ihy
                fw = w[i, j] / (1.0 + w[i, j]) if f_sat else w[i, j]
                zn[i, j] = (z[i, j] + dt * (lap - div + fw * z[i, j])) * izden

        u, un = un, u
        v, vn = vn, v
        w, wn = wn, w
        z, zn = zn, z

    return u, v, w, z


@numba.njit(cache=True, fastmath=True)
def _ode_rhs(u, v, w, z, beta, mu, f_sat):
    fw = w / (1.0 + w) if f_sat else w
    return (-u * v - u + beta,
            v - u * v + mu * w,
            u * v - w * z - w,
            fw * z - z)


@numba.njit(cache=True, fastmath=True)
def ode_rk4(u0, v0, w0, z0, beta, mu, f_sat, dt, nsteps):
    us = np.empty(nsteps + 1)
    vs = np.empty(nsteps + 1)
    ws = np.empty(nsteps + 1)
    zs = np.empty(nsteps + 1)
    us[0], vs[0], ws[0], zs[0] = u0, v0, w0, z0
    u, v, w, z = u0, v0, w0, z0
    for k in range(nsteps):
        a1, b1, c1, d1 = _ode_rhs(u, v, w, z, beta, mu, f_sat)
        a2, b2, c2, d2 = _ode_rhs(u + 0.5 * dt * a1, v + 0.5 * dt * b1,
                                  w + 0.5 * dt * c1, z + 0.5 * dt * d1,
                                  beta, mu, f_sat)
        a3, b3, c3, d3 = _ode_rhs(u + 0.5 * dt * a2, v + 0.5 * dt * b2,
                                  w + 0.5 * dt * c2, z + 0.5 * dt * d2,
                                  beta, mu, f_sat)
        a4, b4, c4, d4 = _ode_rhs(u + dt * a3, v + dt * b3,
                                  w + dt * c3, z + dt * d3,
                                  beta, mu, f_sat)
        u += dt * (a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0
        v += dt * (b1 + 2.0 * b2 + 2.0 * b3 + b4) / 6.0
        w += dt * (c1 + 2.0 * c2 + 2.0 * c3 + c4) / 6.0
        z += dt * (d1 + 2.0 * d2 + 2.0 * d3 + d4) / 6.0
        us[k + 1], vs[k + 1], ws[k + 1], zs[k + 1] = u, v, w, z
    return us, vs, ws, zs
