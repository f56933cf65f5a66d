# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel: tape evaluation with dual numbers, pointwise Hamiltonian
maximization, and the fixed-step RK4 Hamiltonian flow.

Mirrors ``_pykernel`` operation for operation; keep the two in sync.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, exp, log, sqrt, fabs, floor, pow, fmod, isfinite, HUGE_VAL
from libc.stdlib cimport malloc, free

from ._tape import raise_status

cnp.import_array()

DEF CONST = 0
DEF OPX = 1
DEF OPU = 2
DEF NEG = 3
DEF SIN = 4
DEF COS = 5
DEF EXP = 6
DEF LOG = 7
DEF SQRT = 8
DEF ABS = 9
DEF ADD = 10
DEF SUB = 11
DEF MUL = 12
DEF DIV = 13
DEF POW = 14

DEF OK = 0
DEF ERR_LOG = 1
DEF ERR_SQRT = 2
DEF ERR_DIV = 3
DEF ERR_POW = 4
DEF ERR_SQRT_DERIV = 5
DEF ERR_POW_DERIV = 6
DEF ERR_UNBOUNDED = 7
DEF ERR_NONFINITE = 8

DEF REGION_UNCONSTRAINED = 0
DEF REGION_BOX = 1
DEF REGION_FINITE = 2

DEF TIE_TOL = 1e-10
DEF GRID_POINTS = 32
DEF UNCONSTRAINED_RADIUS = 10.0
DEF DIVERGENCE_BOUND = 1e8
DEF ASCENT_ITERATIONS = 500
DEF POLISH_ITERATIONS = 4
DEF FLATNESS_PROBE = 1e-3


cdef inline double _cpow(double a, double b) noexcept nogil:
    return pow(a, b)


cdef inline double* _ptr(double[::1] v) noexcept nogil:
    if v.shape[0] == 0:
        return NULL
    return &v[0]


cdef inline const double* _cptr(const double[::1] v) noexcept nogil:
    if v.shape[0] == 0:
        return NULL
    return &v[0]


cdef class Kernel:
    cdef readonly int n, r
    cdef int ntapes, depth, region_kind, npoints
    cdef bint affine
    cdef int* ops
    cdef int* args
    cdef int* starts
    cdef double* consts
    cdef double* vs
    cdef double* ds
    cdef double* lo
    cdef double* hi
    cdef double* points
    # scratch
    cdef double* su
    cdef double* sg
    cdef double* strial
    cdef double* sspacing
    cdef double* sglo
    cdef double* sghi
    cdef double* shs
    cdef double* sbase
    cdef double* sy
    cdef double* sk1
    cdef double* sk2
    cdef double* sk3
    cdef double* sk4
    cdef double* stmp
    cdef double* sustage

    backend = "compiled"

    def __cinit__(self, int n, int r, ops, args, starts, consts, int depth, int region_kind,
                  lo, hi, points, affine):
        cdef Py_ssize_t i
        cdef cnp.ndarray[cnp.int32_t, ndim=1] a_ops = np.ascontiguousarray(ops, dtype=np.int32)
        cdef cnp.ndarray[cnp.int32_t, ndim=1] a_args = np.ascontiguousarray(args, dtype=np.int32)
        cdef cnp.ndarray[cnp.int32_t, ndim=1] a_starts = np.ascontiguousarray(starts, dtype=np.int32)
        cdef cnp.ndarray[cnp.float64_t, ndim=1] a_consts = np.ascontiguousarray(consts, dtype=np.float64)
        cdef cnp.ndarray[cnp.float64_t, ndim=1] a_lo = np.ascontiguousarray(lo, dtype=np.float64).reshape(-1)
        cdef cnp.ndarray[cnp.float64_t, ndim=1] a_hi = np.ascontiguousarray(hi, dtype=np.float64).reshape(-1)
        cdef cnp.ndarray[cnp.float64_t, ndim=1] a_pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1)
        self.n = n
        self.r = r
        self.ntapes = a_starts.shape[0] - 1
        self.depth = depth if depth > 0 else 1
        self.region_kind = region_kind
        self.affine = bool(affine)
        self.npoints = a_pts.shape[0] // r if r > 0 else 0
        self.ops = <int*> malloc(max(a_ops.shape[0], 1) * sizeof(int))
        self.args = <int*> malloc(max(a_args.shape[0], 1) * sizeof(int))
        self.starts = <int*> malloc(a_starts.shape[0] * sizeof(int))
        self.consts = <double*> malloc(max(a_consts.shape[0], 1) * sizeof(double))
        self.vs = <double*> malloc(self.depth * sizeof(double))
        self.ds = <double*> malloc(self.depth * sizeof(double))
        self.lo = <double*> malloc(max(r, 1) * sizeof(double))
        self.hi = <double*> malloc(max(r, 1) * sizeof(double))
        self.points = <double*> malloc(max(a_pts.shape[0], 1) * sizeof(double))
        self.su = <double*> malloc(max(r, 1) * sizeof(double))
        self.sg = <double*> malloc(max(r, 1) * sizeof(double))
        self.strial = <double*> malloc(max(r, 1) * sizeof(double))
        self.sspacing = <double*> malloc(max(r, 1) * sizeof(double))
        self.sglo = <double*> malloc(max(r, 1) * sizeof(double))
        self.sghi = <double*> malloc(max(r, 1) * sizeof(double))
        self.sbase = <double*> malloc(max(r, 1) * sizeof(double))
        self.sustage = <double*> malloc(max(r, 1) * sizeof(double))
        self.shs = <double*> malloc(max(self.npoints, 1) * sizeof(double))
        self.sy = <double*> malloc(max(2 * n, 1) * sizeof(double))
        self.sk1 = <double*> malloc(max(2 * n, 1) * sizeof(double))
        self.sk2 = <double*> malloc(max(2 * n, 1) * sizeof(double))
        self.sk3 = <double*> malloc(max(2 * n, 1) * sizeof(double))
        self.sk4 = <double*> malloc(max(2 * n, 1) * sizeof(double))
        self.stmp = <double*> malloc(max(2 * n, 1) * sizeof(double))
        for i in range(a_ops.shape[0]):
            self.ops[i] = a_ops[i]
            self.args[i] = a_args[i]
        for i in range(a_starts.shape[0]):
            self.starts[i] = a_starts[i]
        for i in range(a_consts.shape[0]):
            self.consts[i] = a_consts[i]
        for i in range(a_lo.shape[0]):
            self.lo[i] = a_lo[i]
        for i in range(a_hi.shape[0]):
            self.hi[i] = a_hi[i]
        for i in range(a_pts.shape[0]):
            self.points[i] = a_pts[i]

    def __dealloc__(self):
        free(self.ops); free(self.args); free(self.starts); free(self.consts)
        free(self.vs); free(self.ds); free(self.lo); free(self.hi); free(self.points)
        free(self.su); free(self.sg); free(self.strial); free(self.sspacing)
        free(self.sglo); free(self.sghi); free(self.sbase); free(self.sustage); free(self.shs)
        free(self.sy); free(self.sk1); free(self.sk2); free(self.sk3); free(self.sk4); free(self.stmp)

    # -- tape evaluation ----------------------------------------------------

    cdef int run(self, int k, const double* x, const double* u, int seed_kind, int seed_idx,
                 double* out_v, double* out_d, int* nonsmooth) noexcept nogil:
        cdef int pc, op, a, sp = 0
        cdef double av, ad, bv, bd, rv, rd
        cdef double* vs = self.vs
        cdef double* ds = self.ds
        for pc in range(self.starts[k], self.starts[k + 1]):
            op = self.ops[pc]
            a = self.args[pc]
            if op == CONST:
                vs[sp] = self.consts[a]
                ds[sp] = 0.0
                sp += 1
            elif op == OPX:
                vs[sp] = x[a]
                ds[sp] = 1.0 if (seed_kind == 1 and seed_idx == a) else 0.0
                sp += 1
            elif op == OPU:
                vs[sp] = u[a]
                ds[sp] = 1.0 if (seed_kind == 2 and seed_idx == a) else 0.0
                sp += 1
            elif op < ADD:
                av = vs[sp - 1]
                ad = ds[sp - 1]
                if op == NEG:
                    rv = -av
                    rd = -ad
                elif op == SIN:
                    rv = sin(av)
                    rd = cos(av) * ad
                elif op == COS:
                    rv = cos(av)
                    rd = -sin(av) * ad
                elif op == EXP:
                    rv = exp(av)
                    rd = rv * ad
                elif op == LOG:
                    if not av > 0.0:
                        return ERR_LOG
                    rv = log(av)
                    rd = ad / av
                elif op == SQRT:
                    if av < 0.0:
                        return ERR_SQRT
                    rv = sqrt(av)
                    if ad != 0.0:
                        if rv == 0.0:
                            return ERR_SQRT_DERIV
                        rd = ad / (2.0 * rv)
                    else:
                        rd = 0.0
                else:
                    rv = fabs(av)
                    if av > 0.0:
                        rd = ad
                    elif av < 0.0:
                        rd = -ad
                    else:
                        rd = 0.0
                        if seed_kind != 0:
                            nonsmooth[0] = 1
                vs[sp - 1] = rv
                ds[sp - 1] = rd
            else:
                bv = vs[sp - 1]
                bd = ds[sp - 1]
                sp -= 1
                av = vs[sp - 1]
                ad = ds[sp - 1]
                if op == ADD:
                    rv = av + bv
                    rd = ad + bd
                elif op == SUB:
                    rv = av - bv
                    rd = ad - bd
                elif op == MUL:
                    rv = av * bv
                    rd = ad * bv + av * bd
                elif op == DIV:
                    if bv == 0.0:
                        return ERR_DIV
                    rv = av / bv
                    rd = (ad - rv * bd) / bv
                else:
                    if av < 0.0 and bv != floor(bv):
                        return ERR_POW
                    if av == 0.0 and bv < 0.0:
                        return ERR_DIV
                    rv = _cpow(av, bv)
                    rd = 0.0
                    if ad != 0.0 and bv != 0.0:
                        if av == 0.0 and bv < 1.0:
                            return ERR_POW_DERIV
                        rd = rd + bv * _cpow(av, bv - 1.0) * ad
                    if bd != 0.0:
                        if av > 0.0:
                            rd = rd + rv * log(av) * bd
                        elif not (av == 0.0 and bv > 0.0):
                            return ERR_POW_DERIV
                vs[sp - 1] = rv
                ds[sp - 1] = rd
        out_v[0] = vs[sp - 1]
        out_d[0] = ds[sp - 1]
        return OK

    cdef int ham(self, const double* x, const double* u, double psi0, const double* psi,
                 double* out) noexcept nogil:
        cdef double v, d, h
        cdef int i, st, ns = 0
        st = self.run(0, x, u, 0, -1, &v, &d, &ns)
        if st != OK:
            return st
        h = psi0 * v
        for i in range(self.n):
            st = self.run(i + 1, x, u, 0, -1, &v, &d, &ns)
            if st != OK:
                return st
            h = h + psi[i] * v
        out[0] = h
        return OK

    cdef int ham_dual(self, const double* x, const double* u, double psi0, const double* psi,
                      int kind, int idx, double* out_h, double* out_d) noexcept nogil:
        cdef double v, dv, h, d
        cdef int i, st, ns = 0
        st = self.run(0, x, u, kind, idx, &v, &dv, &ns)
        if st != OK:
            return st
        h = psi0 * v
        d = psi0 * dv
        for i in range(self.n):
            st = self.run(i + 1, x, u, kind, idx, &v, &dv, &ns)
            if st != OK:
                return st
            h = h + psi[i] * v
            d = d + psi[i] * dv
        out_h[0] = h
        out_d[0] = d
        return OK

    # -- maximality -----------------------------------------------------------

    cdef int maximize_c(self, const double* x, double psi0, const double* psi,
                        double* u, double* out_h, int* out_singular) noexcept nogil:
        cdef int r = self.r
        cdef int j, k, it, st, bi, accepted
        cdef int singular = 0
        cdef bint box = self.region_kind == REGION_BOX
        cdef double best, h, hc, ht, coef, width, gap, keep, cand, step, gj, gmax, t, big
        cdef double move, unorm, d, a, b, c, dd, fc, fd, invphi, e, gp, gm, curv, gc, delta, dummy
        cdef double* lo = self.lo
        cdef double* hi = self.hi
        cdef double* g = self.sg
        cdef double* trial = self.strial
        cdef double* spacing = self.sspacing
        cdef double* glo = self.sglo
        cdef double* ghi = self.sghi
        cdef int side

        if self.region_kind == REGION_FINITE:
            for k in range(self.npoints):
                st = self.ham(x, &self.points[k * r], psi0, psi, &self.shs[k])
                if st != OK:
                    return st
            best = -HUGE_VAL
            bi = 0
            for k in range(self.npoints):
                if self.shs[k] > best:
                    best = self.shs[k]
                    bi = k
            for k in range(self.npoints):
                if k != bi and self.shs[k] >= best - TIE_TOL:
                    singular = 1
            for j in range(r):
                u[j] = self.points[bi * r + j]
            out_h[0] = best
            out_singular[0] = singular
            return OK

        if box and self.affine:
            for j in range(r):
                u[j] = lo[j]
                self.sbase[j] = lo[j]
            for j in range(r):
                st = self.ham_dual(x, self.sbase, psi0, psi, 2, j, &dummy, &coef)
                if st != OK:
                    return st
                width = hi[j] - lo[j]
                gap = coef * width
                if width == 0.0:
                    u[j] = lo[j]
                elif gap > TIE_TOL:
                    u[j] = hi[j]
                elif gap < -TIE_TOL:
                    u[j] = lo[j]
                else:
                    u[j] = lo[j]
                    singular = 1
            st = self.ham(x, u, psi0, psi, out_h)
            out_singular[0] = singular
            return st

        for j in range(r):
            if box:
                u[j] = lo[j]
                glo[j] = lo[j]
                ghi[j] = hi[j]
            else:
                u[j] = 0.0
                glo[j] = -UNCONSTRAINED_RADIUS
                ghi[j] = UNCONSTRAINED_RADIUS
        st = self.ham(x, u, psi0, psi, &h)
        if st != OK:
            return st

        # coordinate grid seed
        for j in range(r):
            spacing[j] = (ghi[j] - glo[j]) / (GRID_POINTS - 1)
            keep = u[j]
            for k in range(GRID_POINTS):
                cand = ghi[j] if k == GRID_POINTS - 1 else glo[j] + k * spacing[j]
                u[j] = cand
                st = self.ham(x, u, psi0, psi, &hc)
                if st != OK:
                    return st
                if hc > h:
                    h = hc
                    keep = cand
            u[j] = keep

        # damped projected ascent
        step = 1.0
        for it in range(ASCENT_ITERATIONS):
            gmax = 0.0
            for j in range(r):
                st = self.ham_dual(x, u, psi0, psi, 2, j, &dummy, &gj)
                if st != OK:
                    return st
                if box and ((u[j] <= lo[j] and gj < 0.0) or (u[j] >= hi[j] and gj > 0.0)):
                    gj = 0.0
                g[j] = gj
                if fabs(gj) > gmax:
                    gmax = fabs(gj)
            if gmax == 0.0:
                break
            accepted = 0
            while step >= 1e-16:
                big = 0.0
                for j in range(r):
                    t = u[j] + step * g[j]
                    if box:
                        t = min(max(t, lo[j]), hi[j])
                    trial[j] = t
                    if fabs(t) > big:
                        big = fabs(t)
                if not box and big > DIVERGENCE_BOUND:
                    return ERR_UNBOUNDED
                st = self.ham(x, trial, psi0, psi, &ht)
                if st != OK:
                    return st
                if ht > h:
                    accepted = 1
                    break
                step = step * 0.5
            if not accepted:
                break
            move = 0.0
            unorm = 0.0
            for j in range(r):
                d = fabs(trial[j] - u[j])
                if d > move:
                    move = d
                u[j] = trial[j]
                if fabs(u[j]) > unorm:
                    unorm = fabs(u[j])
            h = ht
            step = step * 2.0
            if move <= 1e-13 * (1.0 + unorm):
                break

        # golden-section refinement per coordinate
        invphi = (sqrt(5.0) - 1.0) / 2.0
        for j in range(r):
            keep = u[j]
            a = keep - spacing[j]
            b = keep + spacing[j]
            if box:
                a = max(a, lo[j])
                b = min(b, hi[j])
            c = b - invphi * (b - a)
            dd = a + invphi * (b - a)
            u[j] = c
            st = self.ham(x, u, psi0, psi, &fc)
            if st != OK:
                return st
            u[j] = dd
            st = self.ham(x, u, psi0, psi, &fd)
            if st != OK:
                return st
            while b - a > TIE_TOL:
                if fc >= fd:
                    b = dd
                    dd = c
                    fd = fc
                    c = b - invphi * (b - a)
                    u[j] = c
                    st = self.ham(x, u, psi0, psi, &fc)
                else:
                    a = c
                    c = dd
                    fc = fd
                    dd = a + invphi * (b - a)
                    u[j] = dd
                    st = self.ham(x, u, psi0, psi, &fd)
                if st != OK:
                    return st
            u[j] = 0.5 * (a + b)
            st = self.ham(x, u, psi0, psi, &hc)
            if st != OK:
                return st
            if hc > h:
                h = hc
            else:
                u[j] = keep

        # Newton polish on the stationarity condition
        for j in range(r):
            for it in range(POLISH_ITERATIONS):
                st = self.ham_dual(x, u, psi0, psi, 2, j, &dummy, &gj)
                if st != OK:
                    return st
                if gj == 0.0:
                    break
                if box and ((u[j] <= lo[j] and gj < 0.0) or (u[j] >= hi[j] and gj > 0.0)):
                    break
                keep = u[j]
                e = 1e-6 * (1.0 + fabs(keep))
                u[j] = keep + e
                st = self.ham_dual(x, u, psi0, psi, 2, j, &dummy, &gp)
                if st != OK:
                    return st
                u[j] = keep - e
                st = self.ham_dual(x, u, psi0, psi, 2, j, &dummy, &gm)
                if st != OK:
                    return st
                curv = (gp - gm) / (2.0 * e)
                if not curv < 0.0:
                    u[j] = keep
                    break
                cand = keep - gj / curv
                if box:
                    cand = min(max(cand, lo[j]), hi[j])
                u[j] = cand
                st = self.ham_dual(x, u, psi0, psi, 2, j, &hc, &gc)
                if st != OK:
                    return st
                if fabs(gc) < fabs(gj) and hc >= h - 1e-12 * (1.0 + fabs(h)):
                    h = hc
                else:
                    u[j] = keep
                    break

        # flat directions mark a non-unique maximizer
        st = self.ham(x, u, psi0, psi, &h)
        if st != OK:
            return st
        for j in range(r):
            keep = u[j]
            delta = FLATNESS_PROBE * (1.0 + fabs(keep))
            for side in range(2):
                cand = keep - delta if side == 0 else keep + delta
                if box:
                    cand = min(max(cand, lo[j]), hi[j])
                if cand == keep:
                    continue
                u[j] = cand
                st = self.ham(x, u, psi0, psi, &hc)
                if st != OK:
                    return st
                if hc >= h - TIE_TOL:
                    singular = 1
            u[j] = keep
        out_h[0] = h
        out_singular[0] = singular
        return OK

    # -- Hamiltonian flow -----------------------------------------------------

    cdef int rhs_c(self, const double* y, double psi0, int have_u, double* u, double* out) noexcept nogil:
        cdef int n = self.n
        cdef int i, j, st, sing = 0, ns = 0
        cdef double h, v, d
        if not have_u:
            st = self.maximize_c(y, psi0, &y[n], u, &h, &sing)
            if st != OK:
                return st
        for i in range(n):
            st = self.run(i + 1, y, u, 0, -1, &v, &d, &ns)
            if st != OK:
                return st
            out[i] = v
        for j in range(n):
            st = self.ham_dual(y, u, psi0, &y[n], 1, j, &h, &d)
            if st != OK:
                return st
            out[n + j] = -d
        for i in range(2 * n):
            if not isfinite(out[i]):
                return ERR_NONFINITE
        return OK

    # -- Python-facing wrappers -----------------------------------------------

    def value(self, int k, x, u):
        cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
        cdef double v, d
        cdef int ns = 0
        cdef int st = self.run(k, _cptr(xv), _cptr(uv), 0, -1, &v, &d, &ns)
        raise_status(st)
        return v

    def dual(self, int k, x, u, int seed_kind, int seed_idx):
        cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
        cdef double v, d
        cdef int ns = 0
        cdef int st = self.run(k, _cptr(xv), _cptr(uv), seed_kind, seed_idx, &v, &d, &ns)
        raise_status(st)
        return v, d, bool(ns)

    def grad_x(self, int k, x, u):
        return self._grad(k, x, u, 1, self.n)

    def grad_u(self, int k, x, u):
        return self._grad(k, x, u, 2, self.r)

    def _grad(self, int k, x, u, int kind, int dim):
        cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
        out = np.zeros(dim)
        cdef double[::1] ov = out
        cdef double v, d
        cdef int j, st, ns = 0
        for j in range(dim):
            st = self.run(k, _cptr(xv), _cptr(uv), kind, j, &v, &d, &ns)
            raise_status(st)
            ov[j] = d
        return out, bool(ns)

    def hamiltonian(self, x, u, double psi0, psi):
        cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
        cdef const double[::1] pv = np.ascontiguousarray(psi, dtype=np.float64)
        cdef double h
        raise_status(self.ham(_cptr(xv), _cptr(uv), psi0, _cptr(pv), &h))
        return h

    def hamiltonian_many(self, X, U, double psi0, PSI):
        cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64).reshape(-1, self.n)
        cdef Py_ssize_t m = Xv.shape[0]
        cdef const double[:, ::1] Uv = np.ascontiguousarray(U, dtype=np.float64).reshape(m, self.r)
        cdef const double[:, ::1] Pv = np.ascontiguousarray(PSI, dtype=np.float64).reshape(m, self.n)
        out = np.empty(m)
        cdef double[::1] ov = out
        cdef Py_ssize_t k
        cdef int st = OK
        cdef double dummy = 0.0
        cdef const double* up
        with nogil:
            for k in range(m):
                up = &Uv[k, 0] if self.r > 0 else &dummy
                st = self.ham(&Xv[k, 0], up, psi0, &Pv[k, 0], &ov[k])
                if st != OK:
                    break
        raise_status(st)
        return out

    def partials(self, x, u, double psi0, psi):
        cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
        cdef const double[::1] pv = np.ascontiguousarray(psi, dtype=np.float64)
        dx = np.zeros(self.n)
        dpsi = np.zeros(self.n)
        cdef double[::1] dxv = dx
        cdef double[::1] dpv = dpsi
        cdef double h, d, v
        cdef int j, st, ns = 0
        for j in range(self.n):
            raise_status(self.ham_dual(_cptr(xv), _cptr(uv), psi0, _cptr(pv), 1, j, &h, &d))
            dxv[j] = d
        for j in range(self.n):
            raise_status(self.run(j + 1, _cptr(xv), _cptr(uv), 0, -1, &v, &d, &ns))
            dpv[j] = v
        return dx, dpsi

    def hamiltonian_grad_u(self, x, u, double psi0, psi):
        cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
        cdef const double[::1] pv = np.ascontiguousarray(psi, dtype=np.float64)
        out = np.zeros(self.r)
        cdef double[::1] ov = out
        cdef double h, d
        cdef int j
        for j in range(self.r):
            raise_status(self.ham_dual(_cptr(xv), _cptr(uv), psi0, _cptr(pv), 2, j, &h, &d))
            ov[j] = d
        return out

    def maximize(self, x, double psi0, psi):
        cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
        cdef const double[::1] pv = np.ascontiguousarray(psi, dtype=np.float64)
        out = np.zeros(self.r)
        cdef double[::1] ov = out
        cdef double h
        cdef int sing = 0
        cdef int st
        with nogil:
            st = self.maximize_c(_cptr(xv), psi0, _cptr(pv), _ptr(ov), &h, &sing)
        raise_status(st)
        return out, h, bool(sing)

    def rhs(self, x, psi, double psi0):
        cdef int n = self.n
        cdef int i
        for i in range(n):
            self.sy[i] = x[i]
            self.sy[n + i] = psi[i]
        cdef int st = self.rhs_c(self.sy, psi0, 0, self.sustage, self.stmp)
        raise_status(st)
        xdot = np.array([self.stmp[i] for i in range(n)])
        psidot = np.array([self.stmp[n + i] for i in range(n)])
        return xdot, psidot

    def rk4(self, x_a, psi_a, double psi0, double t0, double t1, int steps):
        cdef int n = self.n
        cdef int r = self.r
        cdef int m = 2 * n
        cdef int N = steps
        cdef double dt = (t1 - t0) / N
        cdef double half = 0.5 * dt
        cdef double sixth = dt / 6.0
        X = np.empty((N + 1, n))
        PSI = np.empty((N + 1, n))
        U = np.empty((N + 1, r))
        H = np.empty(N + 1)
        S = np.zeros(N + 1, dtype=np.uint8)
        cdef double[:, ::1] Xv = X
        cdef double[:, ::1] Pv = PSI
        cdef double[:, ::1] Uv = U
        cdef double[::1] Hv = H
        cdef unsigned char[::1] Sv = S
        cdef double* y = self.sy
        cdef double* k1 = self.sk1
        cdef double* k2 = self.sk2
        cdef double* k3 = self.sk3
        cdef double* k4 = self.sk4
        cdef double* tmp = self.stmp
        cdef double* u = self.su
        cdef double* us = self.sustage
        cdef double h
        cdef int i, k, sing, st = OK
        for i in range(n):
            y[i] = x_a[i]
            y[n + i] = psi_a[i]
        with nogil:
            for k in range(N + 1):
                sing = 0
                st = self.maximize_c(y, psi0, &y[n], u, &h, &sing)
                if st != OK:
                    break
                for i in range(n):
                    Xv[k, i] = y[i]
                    Pv[k, i] = y[n + i]
                for i in range(r):
                    Uv[k, i] = u[i]
                Hv[k] = h
                Sv[k] = sing
                if k == N:
                    break
                st = self.rhs_c(y, psi0, 1, u, k1)
                if st != OK:
                    break
                for i in range(m):
                    tmp[i] = y[i] + half * k1[i]
                st = self.rhs_c(tmp, psi0, 0, us, k2)
                if st != OK:
                    break
                for i in range(m):
                    tmp[i] = y[i] + half * k2[i]
                st = self.rhs_c(tmp, psi0, 0, us, k3)
                if st != OK:
                    break
                for i in range(m):
                    tmp[i] = y[i] + dt * k3[i]
                st = self.rhs_c(tmp, psi0, 0, us, k4)
                if st != OK:
                    break
                for i in range(m):
                    y[i] = y[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        raise_status(st)
        return X, U, PSI, H, S.astype(bool)

