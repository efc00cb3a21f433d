# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation engine.

Same draw protocol and results as ``ftlab._kernel_py``; see that module for the
protocol description.  The batch entry point releases the GIL for the whole
replication loop.
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint8_t, uint64_t, int64_t
from libc.stdlib cimport malloc, realloc, free
from libc.string cimport memcpy, memset

cnp.import_array()

cdef extern from *:
    """
    #include <stdint.h>
    static inline uint64_t ft_mul128(uint64_t a, uint64_t b, uint64_t *lo) {
        unsigned __int128 m = (unsigned __int128)a * (unsigned __int128)b;
        *lo = (uint64_t)m;
        return (uint64_t)(m >> 64);
    }
    """
    uint64_t ft_mul128(uint64_t a, uint64_t b, uint64_t *lo) nogil

ONEMAX = 0
LEADINGONES = 1
MST = 2
INIT_WORST = 0
INIT_UNIFORM = 1
INIT_GIVEN = 2
BACKEND = "cython"

DEF GOLDEN = 0x9E3779B97F4A7C15


cdef struct Rng:
    uint64_t s0, s1, s2, s3


cdef inline uint64_t _fmix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline void _seed(Rng* r, uint64_t seed) noexcept nogil:
    cdef uint64_t x = seed
    x += <uint64_t>GOLDEN
    r.s0 = _fmix(x)
    x += <uint64_t>GOLDEN
    r.s1 = _fmix(x)
    x += <uint64_t>GOLDEN
    r.s2 = _fmix(x)
    x += <uint64_t>GOLDEN
    r.s3 = _fmix(x)


cdef inline uint64_t _rotl(uint64_t x, int k) noexcept nogil:
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t _next(Rng* r) noexcept nogil:
    cdef uint64_t result = _rotl(r.s1 * 5, 7) * 9
    cdef uint64_t t = r.s1 << 17
    r.s2 ^= r.s0
    r.s3 ^= r.s1
    r.s1 ^= r.s2
    r.s0 ^= r.s3
    r.s2 ^= t
    r.s3 = _rotl(r.s3, 45)
    return result


cdef inline double _uniform(Rng* r) noexcept nogil:
    return <double>(_next(r) >> 11) * (1.0 / 9007199254740992.0)


cdef inline uint64_t _bounded(Rng* r, uint64_t n) noexcept nogil:
    cdef uint64_t low
    cdef uint64_t high = ft_mul128(_next(r), n, &low)
    cdef uint64_t threshold
    if low < n:
        threshold = (<uint64_t>0 - n) % n
        while low < threshold:
            high = ft_mul128(_next(r), n, &low)
    return high


cdef struct Ctx:
    int code
    int n
    int mu
    int lam
    int init_mode
    const double* cdf
    const uint8_t* init_bits
    int64_t max_evals
    int n_vertices
    const int64_t* eu
    const int64_t* ev
    const int64_t* ew
    int64_t penalty
    int* dsu
    uint8_t* pop
    uint8_t* newpop
    uint8_t* off
    int64_t* fit
    int64_t* newfit
    int64_t* offfit
    int* perm
    int* flipped
    int* order
    uint64_t* keys
    # recording
    int mode
    int64_t stop_value
    int64_t* rec_values
    int64_t* rec_evals
    Py_ssize_t rec_len
    Py_ssize_t rec_cap
    int rec_failed
    const int64_t* targets
    int n_targets
    int64_t* hit_row
    int t_idx


cdef int64_t _full(Ctx* c, const uint8_t* bits) noexcept nogil:
    cdef int i, u, v
    cdef int64_t value = 0, comps, weight
    if c.code == 0:
        for i in range(c.n):
            value += bits[i]
        return value
    if c.code == 1:
        i = 0
        while i < c.n and bits[i]:
            i += 1
        return i
    for i in range(c.n_vertices):
        c.dsu[i] = i
    comps = c.n_vertices
    weight = 0
    for i in range(c.n):
        if bits[i]:
            weight += c.ew[i]
            u = <int>c.eu[i]
            v = <int>c.ev[i]
            while c.dsu[u] != u:
                c.dsu[u] = c.dsu[c.dsu[u]]
                u = c.dsu[u]
            while c.dsu[v] != v:
                c.dsu[v] = c.dsu[c.dsu[v]]
                v = c.dsu[v]
            if u != v:
                c.dsu[u] = v
                comps -= 1
    return -((comps - 1) * c.penalty + weight)


cdef int64_t _child(Ctx* c, const uint8_t* bits, int64_t parent_value, int ell) noexcept nogil:
    cdef int t, pos, lowest
    cdef int64_t value
    if ell == 0:
        return parent_value
    if c.code == 0:
        value = parent_value
        for t in range(ell):
            if bits[c.flipped[t]]:
                value += 1
            else:
                value -= 1
        return value
    if c.code == 1:
        lowest = c.flipped[0]
        for t in range(1, ell):
            if c.flipped[t] < lowest:
                lowest = c.flipped[t]
        if lowest < parent_value:
            return lowest
        pos = <int>parent_value
        while pos < c.n and bits[pos]:
            pos += 1
        return pos
    return _full(c, bits)


cdef int _record(Ctx* c, int64_t value, int64_t evals) noexcept nogil:
    cdef Py_ssize_t cap
    cdef int64_t* a
    cdef int64_t* b
    if c.mode == 0:
        if c.rec_len == c.rec_cap:
            cap = c.rec_cap * 2
            a = <int64_t*>realloc(c.rec_values, cap * sizeof(int64_t))
            if a == NULL:
                c.rec_failed = 1
                return 1
            c.rec_values = a
            b = <int64_t*>realloc(c.rec_evals, cap * sizeof(int64_t))
            if b == NULL:
                c.rec_failed = 1
                return 1
            c.rec_evals = b
            c.rec_cap = cap
        c.rec_values[c.rec_len] = value
        c.rec_evals[c.rec_len] = evals
        c.rec_len += 1
        return value >= c.stop_value
    while c.t_idx < c.n_targets and value >= c.targets[c.t_idx]:
        c.hit_row[c.t_idx] = evals
        c.t_idx += 1
    return c.t_idx == c.n_targets


cdef inline bint _better(Ctx* c, int a, int b, const int64_t* allfit) noexcept nogil:
    cdef bint off_a = a >= c.mu
    cdef bint off_b = b >= c.mu
    if allfit[a] != allfit[b]:
        return allfit[a] > allfit[b]
    if off_a != off_b:
        return off_a
    if c.keys[a] != c.keys[b]:
        return c.keys[a] > c.keys[b]
    return a < b


cdef int64_t _simulate(Ctx* c, uint64_t seed, int* reached, int64_t* allfit) noexcept nogil:
    cdef Rng rng
    cdef int n = c.n, mu = c.mu, lam = c.lam
    cdef int i, j, t, r, pos, ell, total, cnt, a, k
    cdef int64_t evals = 0, value, best = 0
    cdef bint have_best = False
    cdef bint pair = mu == 1 and lam == 1
    cdef double u
    cdef uint8_t* row
    cdef uint8_t* tmp8
    cdef int64_t* tmp64
    _seed(&rng, seed)
    reached[0] = 0
    for i in range(n):
        c.perm[i] = i
    for i in range(mu):
        if evals >= c.max_evals:
            return evals
        row = c.pop + <Py_ssize_t>i * n
        if c.init_mode == 1:
            for j in range(n):
                row[j] = <uint8_t>(_next(&rng) >> 63)
        elif c.init_mode == 0:
            memset(row, 0, n)
        else:
            memcpy(row, c.init_bits, n)
        value = _full(c, row)
        evals += 1
        c.fit[i] = value
        if not have_best or value > best:
            have_best = True
            best = value
            if _record(c, value, evals):
                reached[0] = 1
                return evals
    while evals < c.max_evals:
        cnt = 0
        for i in range(lam):
            if evals >= c.max_evals:
                break
            if mu > 1:
                j = <int>_bounded(&rng, mu)
            else:
                j = 0
            u = _uniform(&rng)
            ell = 0
            while c.cdf[ell] <= u:
                ell += 1
            if pair:
                row = c.pop
            else:
                row = c.off + <Py_ssize_t>i * n
                memcpy(row, c.pop + <Py_ssize_t>j * n, n)
            for t in range(ell):
                r = t + <int>_bounded(&rng, n - t)
                pos = c.perm[r]
                c.perm[r] = c.perm[t]
                c.perm[t] = pos
                row[pos] ^= 1
                c.flipped[t] = pos
            value = _child(c, row, c.fit[j], ell)
            evals += 1
            c.offfit[i] = value
            cnt += 1
            if pair:
                if value >= c.fit[0]:
                    c.fit[0] = value
                else:
                    for t in range(ell):
                        row[c.flipped[t]] ^= 1
            if value > best:
                best = value
                if _record(c, value, evals):
                    reached[0] = 1
                    return evals
        if cnt < lam:
            break
        if pair:
            continue
        total = mu + lam
        for i in range(mu):
            allfit[i] = c.fit[i]
        for i in range(lam):
            allfit[mu + i] = c.offfit[i]
        for i in range(total):
            c.keys[i] = _next(&rng)
            c.order[i] = i
        for i in range(1, total):
            a = c.order[i]
            k = i - 1
            while k >= 0 and _better(c, a, c.order[k], allfit):
                c.order[k + 1] = c.order[k]
                k -= 1
            c.order[k + 1] = a
        for i in range(mu):
            a = c.order[i]
            if a < mu:
                memcpy(c.newpop + <Py_ssize_t>i * n, c.pop + <Py_ssize_t>a * n, n)
            else:
                memcpy(c.newpop + <Py_ssize_t>i * n, c.off + <Py_ssize_t>(a - mu) * n, n)
            c.newfit[i] = allfit[a]
        tmp8 = c.pop
        c.pop = c.newpop
        c.newpop = tmp8
        tmp64 = c.fit
        c.fit = c.newfit
        c.newfit = tmp64
    return evals


cdef int _alloc(Ctx* c) noexcept nogil:
    cdef Py_ssize_t n = c.n, mu = c.mu, lam = c.lam
    c.pop = <uint8_t*>malloc(mu * n + 1)
    c.newpop = <uint8_t*>malloc(mu * n + 1)
    c.off = <uint8_t*>malloc(lam * n + 1)
    c.fit = <int64_t*>malloc(mu * sizeof(int64_t))
    c.newfit = <int64_t*>malloc(mu * sizeof(int64_t))
    c.offfit = <int64_t*>malloc(lam * sizeof(int64_t))
    c.perm = <int*>malloc((n + 1) * sizeof(int))
    c.flipped = <int*>malloc((n + 1) * sizeof(int))
    c.order = <int*>malloc((mu + lam) * sizeof(int))
    c.keys = <uint64_t*>malloc((mu + lam) * sizeof(uint64_t))
    c.dsu = <int*>malloc((c.n_vertices + 1) * sizeof(int))
    c.rec_values = NULL
    c.rec_evals = NULL
    if (c.pop == NULL or c.newpop == NULL or c.off == NULL or c.fit == NULL or c.newfit == NULL
            or c.offfit == NULL or c.perm == NULL or c.flipped == NULL or c.order == NULL
            or c.keys == NULL or c.dsu == NULL):
        return 1
    return 0


cdef void _release(Ctx* c) noexcept nogil:
    free(c.pop)
    free(c.newpop)
    free(c.off)
    free(c.fit)
    free(c.newfit)
    free(c.offfit)
    free(c.perm)
    free(c.flipped)
    free(c.order)
    free(c.keys)
    free(c.dsu)
    free(c.rec_values)
    free(c.rec_evals)


cdef void _setup(Ctx* c, int code, int n, int mu, int lam, const double* cdf, int init_mode,
                 const uint8_t* init_bits, int64_t max_evals, const int64_t* eu, const int64_t* ev,
                 const int64_t* ew, int n_vertices, int64_t penalty) noexcept nogil:
    c.code = code
    c.n = n
    c.mu = mu
    c.lam = lam
    c.cdf = cdf
    c.init_mode = init_mode
    c.init_bits = init_bits
    c.max_evals = max_evals
    c.eu = eu
    c.ev = ev
    c.ew = ew
    c.n_vertices = n_vertices
    c.penalty = penalty
    c.rec_failed = 0
    c.rec_len = 0
    c.rec_cap = 0
    c.t_idx = 0


def _prepare(code, n, cdf, init_bits, eu, ev, ew):
    cdf_a = np.ascontiguousarray(cdf, dtype=np.float64)
    if cdf_a.shape[0] != n + 1 or cdf_a[n] != 1.0:
        raise ValueError("cdf must have n + 1 entries ending in 1.0")
    if init_bits is None:
        bits_a = np.zeros(n, dtype=np.uint8)
    else:
        bits_a = np.ascontiguousarray(init_bits, dtype=np.uint8)
        if bits_a.shape[0] != n:
            raise ValueError("init_bits must have length n")
    if code == 2:
        eu_a = np.ascontiguousarray(eu, dtype=np.int64)
        ev_a = np.ascontiguousarray(ev, dtype=np.int64)
        ew_a = np.ascontiguousarray(ew, dtype=np.int64)
    else:
        eu_a = ev_a = ew_a = np.zeros(1, dtype=np.int64)
    return cdf_a, bits_a, eu_a, ev_a, ew_a


def run_single(int code, int n, int mu, int lam, cdf, int init_mode, init_bits, int64_t max_evals,
               int64_t stop_value, uint64_t seed, eu=None, ev=None, ew=None, int n_vertices=0,
               int64_t penalty=0):
    """Trace of best-so-far improvements as ``(values, evals, used, reached)``."""
    cdef Ctx c
    cdef int reached = 0
    cdef int64_t used
    cdef const double[::1] cdf_v
    cdef const uint8_t[::1] bits_v
    cdef const int64_t[::1] eu_v, ev_v, ew_v
    cdef int64_t[::1] allfit_v
    cdf_a, bits_a, eu_a, ev_a, ew_a = _prepare(code, n, cdf, init_bits, eu, ev, ew)
    cdf_v = cdf_a
    bits_v = bits_a
    eu_v = eu_a
    ev_v = ev_a
    ew_v = ew_a
    allfit_v = np.zeros(mu + lam, dtype=np.int64)
    _setup(&c, code, n, mu, lam, &cdf_v[0], init_mode, &bits_v[0], max_evals,
           &eu_v[0], &ev_v[0], &ew_v[0], n_vertices, penalty)
    c.mode = 0
    c.stop_value = stop_value
    if _alloc(&c):
        _release(&c)
        raise MemoryError()
    c.rec_cap = 64
    c.rec_values = <int64_t*>malloc(c.rec_cap * sizeof(int64_t))
    c.rec_evals = <int64_t*>malloc(c.rec_cap * sizeof(int64_t))
    if c.rec_values == NULL or c.rec_evals == NULL:
        _release(&c)
        raise MemoryError()
    with nogil:
        used = _simulate(&c, seed, &reached, &allfit_v[0])
    if c.rec_failed:
        _release(&c)
        raise MemoryError()
    values = np.empty(c.rec_len, dtype=np.int64)
    counts = np.empty(c.rec_len, dtype=np.int64)
    cdef Py_ssize_t i
    for i in range(c.rec_len):
        values[i] = c.rec_values[i]
        counts[i] = c.rec_evals[i]
    _release(&c)
    return values, counts, int(used), bool(reached)


def run_batch(int code, int n, int mu, int lam, cdf, int init_mode, init_bits, int64_t max_evals,
              seeds, targets, eu=None, ev=None, ew=None, int n_vertices=0, int64_t penalty=0):
    """First-hitting evaluation counts, shape ``(len(seeds), len(targets))``; ``-1`` if censored."""
    cdef Ctx c
    cdef int reached = 0
    cdef Py_ssize_t r, n_runs
    cdef const double[::1] cdf_v
    cdef const uint8_t[::1] bits_v
    cdef const int64_t[::1] eu_v, ev_v, ew_v
    cdef const uint64_t[::1] seeds_v = np.ascontiguousarray(seeds, dtype=np.uint64)
    cdef const int64_t[::1] targets_v = np.ascontiguousarray(targets, dtype=np.int64)
    cdef int64_t[::1] allfit_v = np.zeros(mu + lam, dtype=np.int64)
    cdf_a, bits_a, eu_a, ev_a, ew_a = _prepare(code, n, cdf, init_bits, eu, ev, ew)
    cdf_v = cdf_a
    bits_v = bits_a
    eu_v = eu_a
    ev_v = ev_a
    ew_v = ew_a
    n_runs = seeds_v.shape[0]
    hits = np.full((n_runs, targets_v.shape[0]), -1, dtype=np.int64)
    cdef int64_t[:, ::1] hits_v = hits
    if n_runs == 0 or targets_v.shape[0] == 0:
        return hits
    _setup(&c, code, n, mu, lam, &cdf_v[0], init_mode, &bits_v[0], max_evals,
           &eu_v[0], &ev_v[0], &ew_v[0], n_vertices, penalty)
    c.mode = 1
    c.targets = &targets_v[0]
    c.n_targets = <int>targets_v.shape[0]
    if _alloc(&c):
        _release(&c)
        raise MemoryError()
    with nogil:
        for r in range(n_runs):
            c.hit_row = &hits_v[r, 0]
            c.t_idx = 0
            _simulate(&c, seeds_v[r], &reached, &allfit_v[0])
    _release(&c)
    return hits
