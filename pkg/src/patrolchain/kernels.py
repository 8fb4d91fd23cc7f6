"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Every kernel exists twice: ``_<name>_loops`` is written as explicit loops and
compiled with :func:`numba.njit`; ``_<name>_numpy`` computes the same thing with
vectorized numpy. The module-level names (``rt_forward``, ``dykstra``, ...)
point at whichever backend :mod:`patrolchain._backend` selected. Both versions
stay importable through :func:`get_kernel` so tests and the benchmark can
compare them directly.
"""
import numpy as np

from . import _backend

# ---------------------------------------------------------------------------
# First-passage-time recursion over integer travel times
# ---------------------------------------------------------------------------


def _rt_forward_loops(P, W, N):
    n = P.shape[0]
    F = np.zeros((N + 1, n, n))
    for k in range(1, N + 1):
        for i in range(n):
            for h in range(n):
                p = P[i, h]
                if p == 0.0:
                    continue
                w = W[i, h]
                if w == k:
                    F[k, i, h] += p
                src = k - w
                if src >= 1:
                    for j in range(n):
                        if j != h:
                            F[k, i, j] += p * F[src, h, j]
    return F


def _rt_forward_numpy(P, W, N):
    n = P.shape[0]
    F = np.zeros((N + 1, n, n))
    cols = np.arange(n)[None, :]
    offdiag = (1.0 - np.eye(n))[None, :, :]
    Wk = np.where(P > 0, W, N + 1)
    for k in range(1, N + 1):
        src = k - Wk
        src = np.where(src >= 1, src, 0)
        # F[0] is all zeros, so out-of-range delays gather nothing
        gathered = F[src, cols, :] * offdiag
        F[k] = P * (Wk == k) + np.einsum("ih,ihj->ij", P, gathered)
    return F


def _rt_entropy_loops(P, W, pi, N):
    # same recursion as _rt_forward_loops, keeping only a ring of wmax+1 slices
    n = P.shape[0]
    wmax = 1
    for i in range(n):
        for h in range(n):
            if P[i, h] != 0.0 and W[i, h] > wmax:
                wmax = W[i, h]
    depth = wmax + 1
    ring = np.zeros((depth, n, n))
    mass = np.zeros(n)
    value = 0.0
    for k in range(1, N + 1):
        cur = k % depth
        for i in range(n):
            for j in range(n):
                ring[cur, i, j] = 0.0
        for i in range(n):
            for h in range(n):
                p = P[i, h]
                if p == 0.0:
                    continue
                w = W[i, h]
                if w == k:
                    ring[cur, i, h] += p
                src = k - w
                if src >= 1:
                    s = src % depth
                    for j in range(n):
                        if j != h:
                            ring[cur, i, j] += p * ring[s, h, j]
        for i in range(n):
            f = ring[cur, i, i]
            mass[i] += f
            if f > 0.0:
                value -= pi[i] * f * np.log(f)
    return value, mass


def _rt_entropy_numpy(P, W, pi, N):
    n = P.shape[0]
    Wk = np.where(P > 0, W, 0)
    wmax = max(int(Wk.max()), 1)
    depth = wmax + 1
    ring = np.zeros((depth, n, n))
    cols = np.arange(n)[None, :]
    offdiag = (1.0 - np.eye(n))[None, :, :]
    mass = np.zeros(n)
    value = 0.0
    for k in range(1, N + 1):
        src = k - Wk
        valid = (src >= 1) & (P > 0)
        slot = np.where(valid, src % depth, 0)
        gathered = ring[slot, cols, :] * (valid[:, :, None] * offdiag)
        new = P * ((Wk == k) & (P > 0)) + np.einsum("ih,ihj->ij", P, gathered)
        ring[k % depth] = new
        f = np.diagonal(new)
        mass += f
        pos = f > 0
        value -= float(np.sum(pi[pos] * f[pos] * np.log(f[pos])))
    return value, mass


def _rt_gradient_loops(P, W, F, pi):
    """Adjoint sweep: gradient of the truncated return-time entropy."""
    N = F.shape[0] - 1
    n = P.shape[0]
    L = np.zeros((N + 1, n, n))
    for k in range(N, 0, -1):
        for h in range(n):
            for j in range(n):
                acc = 0.0
                if h == j:
                    f = F[k, h, h]
                    if f > 0.0:
                        acc = -pi[h] * (np.log(f) + 1.0)
                else:
                    for i in range(n):
                        p = P[i, h]
                        if p != 0.0:
                            dst = k + W[i, h]
                            if dst <= N:
                                acc += p * L[dst, i, j]
                L[k, h, j] = acc
    G = np.zeros((n, n))
    for u in range(n):
        for v in range(n):
            if P[u, v] == 0.0 and W[u, v] <= 0:
                continue
            w = W[u, v]
            g = 0.0
            if 1 <= w <= N:
                g += L[w, u, v]
            for j in range(n):
                if j == v:
                    continue
                for k in range(w + 1, N + 1):
                    g += L[k, u, j] * F[k - w, v, j]
            G[u, v] = g
    return G


def _rt_gradient_numpy(P, W, F, pi):
    N = F.shape[0] - 1
    n = P.shape[0]
    L = np.zeros((N + 2, n, n))
    rows = np.arange(n)[:, None]
    offdiag = 1.0 - np.eye(n)
    Wk = np.where(P > 0, W, N + 1)
    for k in range(N, 0, -1):
        dst = np.minimum(k + Wk, N + 1)
        gathered = L[dst, rows, :]  # [i, h, j]
        acc = np.einsum("ih,ihj->hj", P, gathered) * offdiag
        f = np.diagonal(F[k])
        pos = f > 0
        d = np.zeros(n)
        d[pos] = -pi[pos] * (np.log(f[pos]) + 1.0)
        acc[np.arange(n), np.arange(n)] = d
        L[k] = acc
    G = np.zeros((n, n))
    support = (P != 0.0) | (W > 0)
    for w in np.unique(W[support]):
        w = int(w)
        mask = support & (W == w)
        part = np.zeros((n, n))
        if 1 <= w <= N:
            part += L[w]
        if w < N:
            Ls = L[w + 1:N + 1]
            Fs = F[1:N + 1 - w]
            full = np.einsum("kuj,kvj->uv", Ls, Fs)
            same = np.einsum("kuv,kv->uv", Ls, np.diagonal(Fs, axis1=1, axis2=2))
            part += full - same
        G[mask] = part[mask]
    return G


# ---------------------------------------------------------------------------
# Dykstra projection onto {affine set} ∩ {x >= lower}
# ---------------------------------------------------------------------------


def _dykstra_loops(q, proj, offset, lower, tol, max_sweeps):
    m = q.shape[0]
    x = q.copy()
    p = np.zeros(m)
    r = np.zeros(m)
    t = np.empty(m)
    y = np.empty(m)
    for sweep in range(max_sweeps):
        for a in range(m):
            t[a] = x[a] + p[a]
        for a in range(m):
            s = offset[a]
            for b in range(m):
                s += proj[a, b] * t[b]
            y[a] = s
        diff = 0.0
        for a in range(m):
            p[a] = t[a] - y[a]
            z = y[a] + r[a]
            xn = z if z > lower[a] else lower[a]
            r[a] = z - xn
            # consecutive members of the alternating sequence x, y, x', ...
            d = max(abs(xn - x[a]), abs(xn - y[a]))
            if d > diff:
                diff = d
            x[a] = xn
        if diff <= tol:
            return x, sweep + 1, True
    return x, max_sweeps, False


def _dykstra_numpy(q, proj, offset, lower, tol, max_sweeps):
    x = q.copy()
    p = np.zeros_like(q)
    r = np.zeros_like(q)
    for sweep in range(max_sweeps):
        t = x + p
        y = proj @ t + offset
        p = t - y
        z = y + r
        xn = np.maximum(z, lower)
        r = z - xn
        diff = max(np.max(np.abs(xn - x)), np.max(np.abs(xn - y))) if x.size else 0.0
        x = xn
        if diff <= tol:
            return x, sweep + 1, True
    return x, max_sweeps, False


# ---------------------------------------------------------------------------
# Inverse maxentropic vector map: x <- x - (phi(x) - pi) / (2 eta)
# ---------------------------------------------------------------------------


def _maxent_loops(A, pi, x0, step, tol, max_iter):
    n = x0.shape[0]
    x = x0.copy()
    g = np.empty(n)
    res = 0.0
    for it in range(max_iter):
        res = 0.0
        for i in range(n):
            s = 0.0
            for j in range(n):
                s += A[i, j] * x[j]
            g[i] = x[i] * s - pi[i]
            if abs(g[i]) > res:
                res = abs(g[i])
        if res <= tol:
            return x, it, res
        for i in range(n):
            x[i] -= step * g[i]
    res = 0.0
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += A[i, j] * x[j]
        d = abs(x[i] * s - pi[i])
        if d > res:
            res = d
    return x, max_iter, res


def _maxent_numpy(A, pi, x0, step, tol, max_iter):
    x = x0.copy()
    for it in range(max_iter):
        g = x * (A @ x) - pi
        res = float(np.max(np.abs(g)))
        if res <= tol:
            return x, it, res
        x = x - step * g
    return x, max_iter, float(np.max(np.abs(x * (A @ x) - pi)))


# ---------------------------------------------------------------------------
# Inverse-CDF sampling of chain trajectories
# ---------------------------------------------------------------------------


def _walk_loops(cdf, start, u):
    steps = u.shape[0]
    n = cdf.shape[1]
    states = np.empty(steps + 1, dtype=np.int64)
    s = start
    states[0] = s
    for t in range(steps):
        x = u[t]
        lo = 0
        hi = n - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if cdf[s, mid] > x:
                hi = mid
            else:
                lo = mid + 1
        s = lo
        states[t + 1] = s
    return states


def _walk_numpy(cdf, start, u):
    states = np.empty(u.shape[0] + 1, dtype=np.int64)
    s = int(start)
    states[0] = s
    last = cdf.shape[1] - 1
    for t in range(u.shape[0]):
        s = min(int(np.searchsorted(cdf[s], u[t], side="right")), last)
        states[t + 1] = s
    return states


def _advance_loops(cdf, states, u):
    m = states.shape[0]
    n = cdf.shape[1]
    out = np.empty(m, dtype=np.int64)
    for a in range(m):
        s = states[a]
        x = u[a]
        lo = 0
        hi = n - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if cdf[s, mid] > x:
                hi = mid
            else:
                lo = mid + 1
        out[a] = lo
    return out


def _advance_numpy(cdf, states, u):
    nxt = np.sum(cdf[states] <= u[:, None], axis=1)
    return np.minimum(nxt, cdf.shape[1] - 1).astype(np.int64)


def _excursions_loops(states, clock, src, dst):
    T = states.shape[0]
    out = np.empty(T, dtype=np.int64)
    count = 0
    t = 0
    while True:
        while t < T and states[t] != src:
            t += 1
        if t >= T:
            break
        s = t
        t += 1
        while t < T and states[t] != dst:
            t += 1
        if t >= T:
            break
        out[count] = clock[t] - clock[s]
        count += 1
    return out[:count]


def _excursions_numpy(states, clock, src, dst):
    src_pos = np.flatnonzero(states == src)
    dst_pos = np.flatnonzero(states == dst)
    if src_pos.size == 0 or dst_pos.size == 0:
        return np.empty(0, dtype=np.int64)
    # hit[a]: first dst strictly after the a-th src visit
    hit_idx = np.searchsorted(dst_pos, src_pos, side="right")
    # restart[b]: first src at or after the b-th dst visit
    restart_idx = np.searchsorted(src_pos, dst_pos, side="left")
    out = []
    a = 0
    while a < src_pos.size and hit_idx[a] < dst_pos.size:
        b = hit_idx[a]
        out.append(clock[dst_pos[b]] - clock[src_pos[a]])
        a = restart_idx[b]
    return np.asarray(out, dtype=np.int64)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

_PAIRS = {
    "rt_forward": (_rt_forward_loops, _rt_forward_numpy),
    "rt_entropy": (_rt_entropy_loops, _rt_entropy_numpy),
    "rt_gradient": (_rt_gradient_loops, _rt_gradient_numpy),
    "dykstra": (_dykstra_loops, _dykstra_numpy),
    "maxent": (_maxent_loops, _maxent_numpy),
    "walk": (_walk_loops, _walk_numpy),
    "advance": (_advance_loops, _advance_numpy),
    "excursions": (_excursions_loops, _excursions_numpy),
}

_JITTED = {}

KERNEL_NAMES = tuple(_PAIRS)


def get_kernel(name, backend=None):
    """Return kernel ``name`` for ``backend`` ("numba" or "numpy").

    ``backend=None`` follows the process-wide selection.
    """
    if backend is None:
        backend = _backend.BACKEND
    loops, vectorized = _PAIRS[name]
    if backend == "numpy":
        return vectorized
    if backend != "numba":
        raise ValueError(f"unknown backend {backend!r}")
    if not _backend.NUMBA_AVAILABLE:
        raise RuntimeError("numba is not installed")
    if name not in _JITTED:
        _JITTED[name] = _backend.njit(loops)
    return _JITTED[name]


rt_forward = get_kernel("rt_forward")
rt_entropy = get_kernel("rt_entropy")
rt_gradient = get_kernel("rt_gradient")
dykstra = get_kernel("dykstra")
maxent = get_kernel("maxent")
walk = get_kernel("walk")
advance = get_kernel("advance")
excursions = get_kernel("excursions")
