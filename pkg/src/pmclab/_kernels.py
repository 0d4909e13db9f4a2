"""Compiled inner loops: batched model scoring and the collapsed Gibbs sweep.

Both work on the sufficient statistics ``X'X``, ``X'y``, ``y'y`` only, so the
cost per model is independent of ``n``.
"""

import math

import numpy as np
from numba import njit

LOG_2PI = math.log(2.0 * math.pi)
LOG_2 = math.log(2.0)
S_CLAMP_REL = 1e-8

# status codes returned to Python; numba exceptions lose context
OK = 0
NOT_PD = 1
NEGATIVE_S = 2


@njit(cache=True)
def _clamp_s(s, yty):
    if s >= 0.0:
        return s, OK
    if s >= -S_CLAMP_REL * max(yty, 1.0):
        return 0.0, OK
    return s, NEGATIVE_S


@njit(cache=True)
def _cholesky_inplace(A, k):
    """Lower Cholesky factor of the leading k x k block of A, written into A."""
    for j in range(k):
        d = A[j, j]
        for m in range(j):
            d -= A[j, m] * A[j, m]
        if not d > 0.0:
            return False
        d = math.sqrt(d)
        A[j, j] = d
        for i in range(j + 1, k):
            v = A[i, j]
            for m in range(j):
                v -= A[i, m] * A[j, m]
            A[i, j] = v / d
    return True


@njit(cache=True)
def _score_one(idx, k, xtx, xty, yty, c, log_c, work, z):
    """(log det W, S, status) for the model whose columns are idx[:k]."""
    if k == 0:
        return 0.0, yty, OK
    for a in range(k):
        ia = idx[a]
        for b in range(a + 1):
            work[a, b] = xtx[ia, idx[b]]
        work[a, a] += 1.0 / c[ia]
    if not _cholesky_inplace(work, k):
        return 0.0, 0.0, NOT_PD
    logdet = 0.0
    for a in range(k):
        logdet += 2.0 * math.log(work[a, a]) + log_c[idx[a]]
    quad = 0.0
    for a in range(k):
        v = xty[idx[a]]
        for m in range(a):
            v -= work[a, m] * z[m]
        v /= work[a, a]
        z[a] = v
        quad += v * v
    s, status = _clamp_s(yty - quad, yty)
    return logdet, s, status


@njit(cache=True)
def score_states(states, xtx, xty, yty, c, log_c, n, nu, log_w, log_1mw):
    """Log scores, S and log det W for each row of the boolean ``states`` matrix.

    Returns ``(log_score, s, log_det_w, status)``; ``status`` is nonzero on the
    first failing row's code and the arrays are then incomplete.
    """
    m, p = states.shape
    out_score = np.empty(m)
    out_s = np.empty(m)
    out_ld = np.empty(m)
    idx = np.empty(p, dtype=np.int64)
    work = np.empty((p, p))
    z = np.empty(p)
    const = -0.5 * n * LOG_2PI
    half_df = 0.5 * (n + nu)
    for r in range(m):
        k = 0
        lp = 0.0
        for j in range(p):
            if states[r, j]:
                idx[k] = j
                k += 1
                lp += log_w[j]
            else:
                lp += log_1mw[j]
        ld, s, status = _score_one(idx, k, xtx, xty, yty, c, log_c, work, z)
        if status != OK:
            return out_score, out_s, out_ld, status
        out_ld[r] = ld
        out_s[r] = s
        if lp == -np.inf:
            out_score[r] = -np.inf
        else:
            out_score[r] = const - 0.5 * ld + lp + half_df * (LOG_2 - math.log1p(s))
    return out_score, out_s, out_ld, OK


@njit(cache=True)
def _logistic(d):
    if d >= 0.0:
        return 1.0 / (1.0 + math.exp(-d))
    e = math.exp(d)
    return e / (1.0 + e)


@njit(cache=True)
def _refactor(idx, k, xtx, xty, c, uinv, b, chol):
    """Rebuild U^-1, b = U^-1 X'y and the Cholesky factor of U from scratch.

    Returns (log det U, y'X U^-1 X'y, ok).
    """
    for a in range(k):
        ia = idx[a]
        for bb in range(a + 1):
            chol[a, bb] = xtx[ia, idx[bb]]
        chol[a, a] += 1.0 / c[ia]
    if not _cholesky_inplace(chol, k):
        return 0.0, 0.0, False
    logdet = 0.0
    for a in range(k):
        logdet += 2.0 * math.log(chol[a, a])
    # U^-1 column by column: solve L L' x = e_col
    tmp = np.empty(k)
    for col in range(k):
        for a in range(k):
            v = 1.0 if a == col else 0.0
            for m in range(a):
                v -= chol[a, m] * tmp[m]
            tmp[a] = v / chol[a, a]
        for a in range(k - 1, -1, -1):
            v = tmp[a]
            for m in range(a + 1, k):
                v -= chol[m, a] * uinv[m, col]
            uinv[a, col] = v / chol[a, a]
    quad = 0.0
    for a in range(k):
        v = 0.0
        for m in range(k):
            v += uinv[a, m] * xty[idx[m]]
        b[a] = v
        quad += v * xty[idx[a]]
    return logdet, quad, True


@njit(cache=True)
def gibbs_chain(xtx, xty, yty, c, log_c, n, nu, log_w, log_1mw, log_odds,
                init, uniforms, gamma_draws, normals, burnin, thin):
    """Systematic-scan collapsed Gibbs sampler over gamma with (sigma, beta) draws.

    ``uniforms`` (sweeps x p) drive the inclusion updates, ``gamma_draws``
    (sweeps,) are Gamma((n+nu)/2, 1) variates and ``normals`` (sweeps x p)
    standard normals; consuming pre-drawn streams keeps every chain
    reproducible from its seed alone.

    Returns ``(gammas, betas, sigmas, scores, status)``.
    """
    sweeps, p = uniforms.shape
    kept = (sweeps - burnin) // thin
    out_g = np.zeros((kept, p), dtype=np.bool_)
    out_b = np.zeros((kept, p))
    out_sig = np.empty(kept)
    out_sc = np.empty(kept)

    state = init.copy()
    idx = np.empty(p, dtype=np.int64)
    pos = np.full(p, -1, dtype=np.int64)
    uinv = np.zeros((p, p))
    chol = np.zeros((p, p))
    b = np.zeros(p)
    v = np.zeros(p)
    row = np.zeros(p)
    k = 0
    for j in range(p):
        if state[j]:
            idx[k] = j
            pos[j] = k
            k += 1
    logdet_u, quad, ok = _refactor(idx, k, xtx, xty, c, uinv, b, chol)
    if not ok:
        return out_g, out_b, out_sig, out_sc, NOT_PD

    half_df = 0.5 * (n + nu)
    const = -0.5 * n * LOG_2PI
    clamp_floor = -S_CLAMP_REL * max(yty, 1.0)
    rec = 0
    for t in range(sweeps):
        for j in range(p):
            if pos[j] >= 0:
                # j currently included: evaluate the model without it
                i = pos[j]
                dinv = uinv[i, i]
                ld_with = logdet_u
                q_with = quad
                ld_without = logdet_u + math.log(dinv)
                q_without = quad - b[i] * b[i] / dinv
                ldc_with = log_c[j]
            else:
                for a in range(k):
                    acc = 0.0
                    for m in range(k):
                        acc += uinv[a, m] * xtx[idx[m], j]
                    v[a] = acc
                d = 1.0 / c[j] + xtx[j, j]
                ub = 0.0
                for a in range(k):
                    d -= xtx[idx[a], j] * v[a]
                    ub += xtx[idx[a], j] * b[a]
                if not d > 0.0:
                    return out_g, out_b, out_sig, out_sc, NOT_PD
                r = xty[j] - ub
                ld_without = logdet_u
                q_without = quad
                ld_with = logdet_u + math.log(d)
                q_with = quad + r * r / d
                ldc_with = log_c[j]
            s_with = yty - q_with
            s_without = yty - q_without
            if s_with < 0.0:
                if s_with < clamp_floor:
                    return out_g, out_b, out_sig, out_sc, NEGATIVE_S
                s_with = 0.0
            if s_without < 0.0:
                if s_without < clamp_floor:
                    return out_g, out_b, out_sig, out_sc, NEGATIVE_S
                s_without = 0.0
            diff = (-0.5 * (ldc_with + ld_with - ld_without) + log_odds[j]
                    - half_df * (math.log1p(s_with) - math.log1p(s_without)))
            if log_odds[j] == np.inf:
                prob = 1.0
            elif log_odds[j] == -np.inf:
                prob = 0.0
            else:
                prob = _logistic(diff)
            include = uniforms[t, j] < prob
            if include and pos[j] < 0:
                # append j; v and d, r are from the inactive branch above
                for a in range(k):
                    for m in range(k):
                        uinv[a, m] += v[a] * v[m] / d
                    uinv[a, k] = -v[a] / d
                    uinv[k, a] = -v[a] / d
                uinv[k, k] = 1.0 / d
                for a in range(k):
                    b[a] -= v[a] * r / d
                b[k] = r / d
                idx[k] = j
                pos[j] = k
                k += 1
                logdet_u = ld_with
                quad = q_with
            elif not include and pos[j] >= 0:
                i = pos[j]
                last = k - 1
                if i != last:
                    # swap position i with the last active slot
                    moved = idx[last]
                    for a in range(k):
                        tmpv = uinv[a, i]
                        uinv[a, i] = uinv[a, last]
                        uinv[a, last] = tmpv
                    for a in range(k):
                        tmpv = uinv[i, a]
                        uinv[i, a] = uinv[last, a]
                        uinv[last, a] = tmpv
                    tmpv = b[i]
                    b[i] = b[last]
                    b[last] = tmpv
                    idx[i] = moved
                    pos[moved] = i
                dinv = uinv[last, last]
                for a in range(last):
                    row[a] = uinv[a, last]
                for a in range(last):
                    for m in range(last):
                        uinv[a, m] -= row[a] * row[m] / dinv
                    b[a] -= row[a] * b[last] / dinv
                pos[j] = -1
                k = last
                logdet_u = ld_without
                quad = q_without

        # fresh factorization once per sweep; removes update drift
        logdet_u, quad, ok = _refactor(idx, k, xtx, xty, c, uinv, b, chol)
        if not ok:
            return out_g, out_b, out_sig, out_sc, NOT_PD
        s = yty - quad
        if s < 0.0:
            if s < clamp_floor:
                return out_g, out_b, out_sig, out_sc, NEGATIVE_S
            s = 0.0
        if t >= burnin and (t - burnin) % thin == 0:
            tau = gamma_draws[t] / (0.5 * (1.0 + s))
            sigma = 1.0 / math.sqrt(tau)
            # beta_gamma = U^-1 X'y + sigma * L^-T z, so cov = sigma^2 U^-1
            for a in range(k - 1, -1, -1):
                acc = normals[t, a]
                for m in range(a + 1, k):
                    acc -= chol[m, a] * v[m]
                v[a] = acc / chol[a, a]
            lp = 0.0
            ldc = 0.0
            for j in range(p):
                if pos[j] >= 0:
                    lp += log_w[j]
                    ldc += log_c[j]
                    out_g[rec, j] = True
                else:
                    lp += log_1mw[j]
            for a in range(k):
                out_b[rec, idx[a]] = b[a] + sigma * v[a]
            out_sig[rec] = sigma
            out_sc[rec] = const - 0.5 * (ldc + logdet_u) + lp + half_df * (LOG_2 - math.log1p(s))
            rec += 1
    return out_g, out_b, out_sig, out_sc, OK
