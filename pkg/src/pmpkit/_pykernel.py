"""Pure-Python kernel; the reference the compiled kernel mirrors step for step.

Both kernels execute the same arithmetic in the same order, so results agree
bit for bit on the same libm.
"""

import math

import numpy as np

from . import _tape as T
from ._tape import raise_status

_INF = float("inf")


class _Status(Exception):
    def __init__(self, code):
        self.code = code


def _pow(a, b):
    try:
        return math.pow(a, b)
    except OverflowError:
        if a < 0 and math.fmod(b, 2.0) != 0.0:
            return -_INF
        return _INF


def _floats(v):
    return [float(t) for t in v]


def _exp(a):
    try:
        return math.exp(a)
    except OverflowError:
        return _INF


class Kernel:
    backend = "python"

    def __init__(self, n, r, ops, args, starts, consts, depth, region_kind, lo, hi, points, affine):
        self.n = int(n)
        self.r = int(r)
        self.tapes = []
        ops = [int(v) for v in ops]
        args = [int(v) for v in args]
        for k in range(len(starts) - 1):
            self.tapes.append(list(zip(ops[starts[k]:starts[k + 1]], args[starts[k]:starts[k + 1]])))
        self.consts = [float(c) for c in consts]
        self.region_kind = int(region_kind)
        self.lo = [float(v) for v in lo]
        self.hi = [float(v) for v in hi]
        pts = np.asarray(points, dtype=float)
        self.points = [[float(v) for v in row] for row in pts.reshape(-1, self.r)] if pts.size else []
        self.affine = bool(affine)

    # -- tape evaluation ----------------------------------------------------

    def _run(self, k, x, u, seed_kind=0, seed_idx=-1):
        """Return (value, derivative, nonsmooth) or raise _Status."""
        vs = []
        ds = []
        nonsmooth = False
        consts = self.consts
        for op, a in self.tapes[k]:
            if op == T.CONST:
                vs.append(consts[a])
                ds.append(0.0)
            elif op == T.X:
                vs.append(x[a])
                ds.append(1.0 if (seed_kind == 1 and seed_idx == a) else 0.0)
            elif op == T.U:
                vs.append(u[a])
                ds.append(1.0 if (seed_kind == 2 and seed_idx == a) else 0.0)
            elif op < T.ADD:
                av = vs[-1]
                ad = ds[-1]
                if op == T.NEG:
                    rv = -av
                    rd = -ad
                elif op == T.SIN:
                    rv = math.sin(av)
                    rd = math.cos(av) * ad
                elif op == T.COS:
                    rv = math.cos(av)
                    rd = -math.sin(av) * ad
                elif op == T.EXP:
                    rv = _exp(av)
                    rd = rv * ad
                elif op == T.LOG:
                    if not av > 0.0:
                        raise _Status(T.ERR_LOG)
                    rv = math.log(av)
                    rd = ad / av
                elif op == T.SQRT:
                    if av < 0.0:
                        raise _Status(T.ERR_SQRT)
                    rv = math.sqrt(av)
                    if ad != 0.0:
                        if rv == 0.0:
                            raise _Status(T.ERR_SQRT_DERIV)
                        rd = ad / (2.0 * rv)
                    else:
                        rd = 0.0
                else:  # ABS
                    rv = math.fabs(av)
                    if av > 0.0:
                        rd = ad
                    elif av < 0.0:
                        rd = -ad
                    else:
                        rd = 0.0
                        if seed_kind != 0:
                            nonsmooth = True
                vs[-1] = rv
                ds[-1] = rd
            else:
                bv = vs.pop()
                bd = ds.pop()
                av = vs[-1]
                ad = ds[-1]
                if op == T.ADD:
                    rv = av + bv
                    rd = ad + bd
                elif op == T.SUB:
                    rv = av - bv
                    rd = ad - bd
                elif op == T.MUL:
                    rv = av * bv
                    rd = ad * bv + av * bd
                elif op == T.DIV:
                    if bv == 0.0:
                        raise _Status(T.ERR_DIV)
                    rv = av / bv
                    rd = (ad - rv * bd) / bv
                else:  # POW
                    if av < 0.0 and bv != math.floor(bv):
                        raise _Status(T.ERR_POW)
                    if av == 0.0 and bv < 0.0:
                        raise _Status(T.ERR_DIV)
                    rv = _pow(av, bv)
                    rd = 0.0
                    if ad != 0.0 and bv != 0.0:
                        if av == 0.0 and bv < 1.0:
                            raise _Status(T.ERR_POW_DERIV)
                        rd = rd + bv * _pow(av, bv - 1.0) * ad
                    if bd != 0.0:
                        if av > 0.0:
                            rd = rd + rv * math.log(av) * bd
                        elif not (av == 0.0 and bv > 0.0):
                            raise _Status(T.ERR_POW_DERIV)
                vs[-1] = rv
                ds[-1] = rd
        return vs[-1], ds[-1], nonsmooth

    def value(self, k, x, u):
        try:
            return self._run(k, _floats(x), _floats(u))[0]
        except _Status as s:
            raise_status(s.code)

    def dual(self, k, x, u, seed_kind, seed_idx):
        try:
            return self._run(k, _floats(x), _floats(u), seed_kind, seed_idx)
        except _Status as s:
            raise_status(s.code)

    def grad_x(self, k, x, u):
        return self._grad(k, _floats(x), _floats(u), 1, self.n)

    def grad_u(self, k, x, u):
        return self._grad(k, _floats(x), _floats(u), 2, self.r)

    def _grad(self, k, x, u, kind, dim):
        out = np.zeros(dim)
        flag = False
        try:
            for j in range(dim):
                _, d, ns = self._run(k, x, u, kind, j)
                out[j] = d
                flag = flag or ns
        except _Status as s:
            raise_status(s.code)
        return out, flag

    # -- Hamiltonian ----------------------------------------------------------

    def _ham(self, x, u, psi0, psi):
        h = psi0 * self._run(0, x, u)[0]
        for i in range(self.n):
            h = h + psi[i] * self._run(i + 1, x, u)[0]
        return h

    def _ham_dual(self, x, u, psi0, psi, kind, idx):
        h, d, _ = self._run(0, x, u, kind, idx)
        h = psi0 * h
        d = psi0 * d
        for i in range(self.n):
            v, dv, _ = self._run(i + 1, x, u, kind, idx)
            h = h + psi[i] * v
            d = d + psi[i] * dv
        return h, d

    def hamiltonian(self, x, u, psi0, psi):
        try:
            return self._ham(_floats(x), _floats(u), float(psi0), _floats(psi))
        except _Status as s:
            raise_status(s.code)

    def hamiltonian_many(self, X, U, psi0, PSI):
        X = np.asarray(X, dtype=float)
        U = np.asarray(U, dtype=float).reshape(X.shape[0], self.r)
        PSI = np.asarray(PSI, dtype=float)
        psi0 = float(psi0)
        out = np.empty(X.shape[0])
        try:
            for k in range(X.shape[0]):
                out[k] = self._ham(_floats(X[k]), _floats(U[k]), psi0, _floats(PSI[k]))
        except _Status as s:
            raise_status(s.code)
        return out

    def partials(self, x, u, psi0, psi):
        x, u, psi = _floats(x), _floats(u), _floats(psi)
        psi0 = float(psi0)
        try:
            dx = np.array([self._ham_dual(x, u, psi0, psi, 1, j)[1] for j in range(self.n)])
            dpsi = np.array([self._run(i + 1, x, u)[0] for i in range(self.n)])
        except _Status as s:
            raise_status(s.code)
        return dx, dpsi

    def hamiltonian_grad_u(self, x, u, psi0, psi):
        x, u, psi = _floats(x), _floats(u), _floats(psi)
        try:
            return np.array([self._ham_dual(x, u, float(psi0), psi, 2, j)[1] for j in range(self.r)])
        except _Status as s:
            raise_status(s.code)

    # -- maximality -----------------------------------------------------------

    def _maximize(self, x, psi0, psi):
        r = self.r
        kind = self.region_kind
        singular = False
        if kind == T.REGION_FINITE:
            hs = [self._ham(x, p, psi0, psi) for p in self.points]
            best = -_INF
            bi = 0
            for k in range(len(hs)):
                if hs[k] > best:
                    best = hs[k]
                    bi = k
            for k in range(len(hs)):
                if k != bi and hs[k] >= best - T.TIE_TOL:
                    singular = True
            return list(self.points[bi]), best, singular

        lo, hi = self.lo, self.hi
        box = kind == T.REGION_BOX
        if box and self.affine:
            u = list(lo)
            base = list(lo)
            for j in range(r):
                coef = self._ham_dual(x, base, psi0, psi, 2, j)[1]
                width = hi[j] - lo[j]
                gap = coef * width
                if width == 0.0:
                    u[j] = lo[j]
                elif gap > T.TIE_TOL:
                    u[j] = hi[j]
                elif gap < -T.TIE_TOL:
                    u[j] = lo[j]
                else:
                    u[j] = lo[j]
                    singular = True
            return u, self._ham(x, u, psi0, psi), singular

        if box:
            u = list(lo)
            glo, ghi = lo, hi
        else:
            u = [0.0] * r
            glo = [-T.UNCONSTRAINED_RADIUS] * r
            ghi = [T.UNCONSTRAINED_RADIUS] * r
        h = self._ham(x, u, psi0, psi)

        # coordinate grid seed
        spacing = [0.0] * r
        for j in range(r):
            spacing[j] = (ghi[j] - glo[j]) / (T.GRID_POINTS - 1)
            keep = u[j]
            for k in range(T.GRID_POINTS):
                cand = ghi[j] if k == T.GRID_POINTS - 1 else glo[j] + k * spacing[j]
                u[j] = cand
                hc = self._ham(x, u, psi0, psi)
                if hc > h:
                    h = hc
                    keep = cand
            u[j] = keep

        # damped projected ascent
        step = 1.0
        g = [0.0] * r
        trial = [0.0] * r
        for _ in range(T.ASCENT_ITERATIONS):
            gmax = 0.0
            for j in range(r):
                gj = self._ham_dual(x, u, psi0, psi, 2, j)[1]
                if box and ((u[j] <= lo[j] and gj < 0.0) or (u[j] >= hi[j] and gj > 0.0)):
                    gj = 0.0
                g[j] = gj
                if math.fabs(gj) > gmax:
                    gmax = math.fabs(gj)
            if gmax == 0.0:
                break
            accepted = False
            while step >= 1e-16:
                big = 0.0
                for j in range(r):
                    t = u[j] + step * g[j]
                    if box:
                        t = min(max(t, lo[j]), hi[j])
                    trial[j] = t
                    if math.fabs(t) > big:
                        big = math.fabs(t)
                if not box and big > T.DIVERGENCE_BOUND:
                    raise _Status(T.ERR_UNBOUNDED)
                ht = self._ham(x, trial, psi0, psi)
                if ht > h:
                    accepted = True
                    break
                step = step * 0.5
            if not accepted:
                break
            move = 0.0
            unorm = 0.0
            for j in range(r):
                d = math.fabs(trial[j] - u[j])
                if d > move:
                    move = d
                u[j] = trial[j]
                if math.fabs(u[j]) > unorm:
                    unorm = math.fabs(u[j])
            h = ht
            step = step * 2.0
            if move <= 1e-13 * (1.0 + unorm):
                break

        # golden-section refinement per coordinate
        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        for j in range(r):
            keep = u[j]
            a = keep - spacing[j]
            b = keep + spacing[j]
            if box:
                a = max(a, lo[j])
                b = min(b, hi[j])
            c = b - invphi * (b - a)
            d = a + invphi * (b - a)
            u[j] = c
            fc = self._ham(x, u, psi0, psi)
            u[j] = d
            fd = self._ham(x, u, psi0, psi)
            while b - a > T.TIE_TOL:
                if fc >= fd:
                    b = d
                    d = c
                    fd = fc
                    c = b - invphi * (b - a)
                    u[j] = c
                    fc = self._ham(x, u, psi0, psi)
                else:
                    a = c
                    c = d
                    fc = fd
                    d = a + invphi * (b - a)
                    u[j] = d
                    fd = self._ham(x, u, psi0, psi)
            u[j] = 0.5 * (a + b)
            hc = self._ham(x, u, psi0, psi)
            if hc > h:
                h = hc
            else:
                u[j] = keep

        # Newton polish on the stationarity condition
        for j in range(r):
            for _ in range(T.POLISH_ITERATIONS):
                gj = self._ham_dual(x, u, psi0, psi, 2, j)[1]
                if gj == 0.0:
                    break
                if box and ((u[j] <= lo[j] and gj < 0.0) or (u[j] >= hi[j] and gj > 0.0)):
                    break
                keep = u[j]
                e = 1e-6 * (1.0 + math.fabs(keep))
                u[j] = keep + e
                gp = self._ham_dual(x, u, psi0, psi, 2, j)[1]
                u[j] = keep - e
                gm = self._ham_dual(x, u, psi0, psi, 2, j)[1]
                curv = (gp - gm) / (2.0 * e)
                if not curv < 0.0:
                    u[j] = keep
                    break
                cand = keep - gj / curv
                if box:
                    cand = min(max(cand, lo[j]), hi[j])
                u[j] = cand
                hc, gc = self._ham_dual(x, u, psi0, psi, 2, j)
                if math.fabs(gc) < math.fabs(gj) and hc >= h - 1e-12 * (1.0 + math.fabs(h)):
                    h = hc
                else:
                    u[j] = keep
                    break

        # flat directions mark a non-unique maximizer
        h = self._ham(x, u, psi0, psi)
        for j in range(r):
            keep = u[j]
            delta = T.FLATNESS_PROBE * (1.0 + math.fabs(keep))
            for cand in (keep - delta, keep + delta):
                if box:
                    cand = min(max(cand, lo[j]), hi[j])
                if cand == keep:
                    continue
                u[j] = cand
                if self._ham(x, u, psi0, psi) >= h - T.TIE_TOL:
                    singular = True
            u[j] = keep
        return u, h, singular

    def maximize(self, x, psi0, psi):
        try:
            u, h, singular = self._maximize(_floats(x), float(psi0), _floats(psi))
        except _Status as s:
            raise_status(s.code)
        return np.array(u, dtype=float), h, bool(singular)

    # -- Hamiltonian flow -----------------------------------------------------

    def _rhs(self, y, psi0, u=None):
        n = self.n
        x = y[:n]
        psi = y[n:]
        if u is None:
            u = self._maximize(x, psi0, psi)[0]
        out = [0.0] * (2 * n)
        for i in range(n):
            out[i] = self._run(i + 1, x, u)[0]
        for j in range(n):
            out[n + j] = -self._ham_dual(x, u, psi0, psi, 1, j)[1]
        for v in out:
            if not math.isfinite(v):
                raise _Status(T.ERR_NONFINITE)
        return out

    def rhs(self, x, psi, psi0):
        y = [float(v) for v in x] + [float(v) for v in psi]
        try:
            out = self._rhs(y, float(psi0))
        except _Status as s:
            raise_status(s.code)
        return np.array(out[: self.n]), np.array(out[self.n:])

    def rk4(self, x_a, psi_a, psi0, t0, t1, steps):
        n, r = self.n, self.r
        N = int(steps)
        psi0 = float(psi0)
        dt = (float(t1) - float(t0)) / N
        half = 0.5 * dt
        sixth = dt / 6.0
        X = np.empty((N + 1, n))
        PSI = np.empty((N + 1, n))
        U = np.empty((N + 1, r))
        H = np.empty(N + 1)
        S = np.zeros(N + 1, dtype=bool)
        y = [float(v) for v in x_a] + [float(v) for v in psi_a]
        m = 2 * n
        try:
            for k in range(N + 1):
                u, h, sing = self._maximize(y[:n], psi0, y[n:])
                X[k] = y[:n]
                PSI[k] = y[n:]
                U[k] = u
                H[k] = h
                S[k] = sing
                if k == N:
                    break
                k1 = self._rhs(y, psi0, u)
                k2 = self._rhs([y[i] + half * k1[i] for i in range(m)], psi0)
                k3 = self._rhs([y[i] + half * k2[i] for i in range(m)], psi0)
                k4 = self._rhs([y[i] + dt * k3[i] for i in range(m)], psi0)
                y = [y[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(m)]
        except _Status as s:
            raise_status(s.code)
        return X, U, PSI, H, S
