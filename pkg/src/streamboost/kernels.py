"""Hot numeric kernels.

Everything here is written in the subset of numpy that numba's nopython mode
understands, so each function runs either compiled (default) or as ordinary
numpy code when ``STREAMBOOST_DISABLE_JIT=1``. Higher-level modules never
branch on which mode is active.

Loss kinds are passed as small integer codes (see ``LOSS_CODES``) because
numba cannot dispatch on strings or Python objects inside a loop.
"""
import numpy as np

from ._jit import njit

SQUARE = 0
L1 = 1
LOGISTIC = 2
HINGE = 3
MULTICLASS = 4
AXIS_L1 = 5  # 2|y[0]| + |y[1]|, the non-smooth two-coordinate loss used by the counterexample

LOSS_CODES = {
    "square": SQUARE,
    "l1": L1,
    "logistic_l2": LOGISTIC,
    "hinge_l2": HINGE,
    "multiclass_ce": MULTICLASS,
    "axis_l1": AXIS_L1,
}

DIVERGED_NONE = -1


# --------------------------------------------------------------------------
# losses
# --------------------------------------------------------------------------


@njit
def _softplus(a):
    # log(1 + exp(a)) without overflow
    if a > 0.0:
        return a + np.log1p(np.exp(-a))
    return np.log1p(np.exp(a))


@njit
def loss_value(kind, y, s, reg):
    m = y.shape[0]
    sq = 0.0
    for j in range(m):
        sq += y[j] * y[j]
    out = reg * sq
    if kind == SQUARE:
        for j in range(m):
            r = y[j] - s[j]
            out += r * r
    elif kind == L1:
        for j in range(m):
            out += abs(y[j] - s[j])
    elif kind == LOGISTIC:
        out += _softplus(-s[0] * y[0])
    elif kind == HINGE:
        out += max(0.0, 1.0 - s[0] * y[0])
    elif kind == MULTICLASS:
        top = y[0]
        for j in range(1, m):
            if y[j] > top:
                top = y[j]
        acc = 0.0
        for j in range(m):
            acc += np.exp(y[j] - top)
        lse = top + np.log(acc)
        mass = 0.0
        dot = 0.0
        for j in range(m):
            mass += s[j]
            dot += s[j] * y[j]
        out += mass * lse - dot
    elif kind == AXIS_L1:
        out += 2.0 * abs(y[0]) + abs(y[1])
    return out


@njit
def _zero_kink_sign(r):
    if r > 0.0:
        return 1.0
    if r < 0.0:
        return -1.0
    return 0.0


@njit
def loss_grad(kind, y, s, reg, out):
    """Write a (sub)gradient of ``loss_value`` at ``y`` into ``out``.

    At kinks the kinked term contributes zero slope.
    """
    m = y.shape[0]
    for j in range(m):
        out[j] = 2.0 * reg * y[j]
    if kind == SQUARE:
        for j in range(m):
            out[j] += 2.0 * (y[j] - s[j])
    elif kind == L1:
        for j in range(m):
            out[j] += _zero_kink_sign(y[j] - s[j])
    elif kind == LOGISTIC:
        uy = s[0] * y[0]
        if uy >= 0.0:
            e = np.exp(-uy)
            out[0] += -s[0] * e / (1.0 + e)
        else:
            out[0] += -s[0] / (1.0 + np.exp(uy))
    elif kind == HINGE:
        if s[0] * y[0] < 1.0:
            out[0] += -s[0]
    elif kind == MULTICLASS:
        top = y[0]
        for j in range(1, m):
            if y[j] > top:
                top = y[j]
        acc = 0.0
        for j in range(m):
            acc += np.exp(y[j] - top)
        mass = 0.0
        for j in range(m):
            mass += s[j]
        for j in range(m):
            out[j] += mass * np.exp(y[j] - top) / acc - s[j]
    elif kind == AXIS_L1:
        out[0] += 2.0 * _zero_kink_sign(y[0])
        out[1] += _zero_kink_sign(y[1])


@njit
def loss_values(kind, Y, S, reg):
    n = Y.shape[0]
    out = np.empty(n)
    for t in range(n):
        out[t] = loss_value(kind, Y[t], S[t], reg)
    return out


# --------------------------------------------------------------------------
# geometry
# --------------------------------------------------------------------------


@njit
def project_ball(y, radius, out):
    """Euclidean projection of ``y`` onto the ball of given radius."""
    nrm = np.sqrt(np.sum(y * y))
    if nrm > radius:
        out[:] = y * (radius / nrm)
    else:
        out[:] = y
    return out


@njit
def _shrink_frobenius(W, radius):
    if radius > 0.0:
        nrm = np.sqrt(np.sum(W * W))
        if nrm > radius:
            W *= radius / nrm


# --------------------------------------------------------------------------
# linear learners
# --------------------------------------------------------------------------


@njit
def ogd_square_step(W, xt, target, lr, radius):
    """One projected gradient step on ||W xt - target||^2 (in place)."""
    err = W @ xt - target
    W -= (2.0 * lr) * np.outer(err, xt)
    _shrink_frobenius(W, radius)


@njit
def ogd_square_pass(Xt, Y, W, n_seen, lr_c, lr_power, radius, preds):
    """Prequential OGD over rows of the design matrix ``Xt``; fills ``preds``."""
    for t in range(Xt.shape[0]):
        xt = Xt[t]
        h = W @ xt
        preds[t, :] = h
        lr = lr_c / (n_seen + t + 1.0) ** lr_power
        W -= (2.0 * lr) * np.outer(h - Y[t], xt)
        _shrink_frobenius(W, radius)


@njit
def sherman_morrison_update(P, xt):
    """P <- (P^-1 + xt xt^T)^-1 in place."""
    px = P @ xt
    denom = 1.0 + xt @ px
    P -= np.outer(px, px) / denom


# --------------------------------------------------------------------------
# fused streaming passes (all learners online-linear with shared settings)
# --------------------------------------------------------------------------


@njit
def sgb_smooth_linear_pass(X, S, kind, reg, W, Wsum, n_seen, eta, y0,
                           lr_c, lr_power, w_radius, guard,
                           stage_loss, preds, sq_err, sq_tgt, sq_pred):
    """Run the smooth streaming-boosting loop over ``X`` with linear learners.

    ``W`` has shape (N, m, p) where p = d + 1 when an intercept column is
    used. ``Wsum`` accumulates the pre-update parameters of every step (for
    the averaged predictor). Returns the offending row index if a partial sum
    exceeded ``guard`` in norm or became non-finite, else -1.
    """
    T, d = X.shape
    N, m, p = W.shape
    partial = np.empty((N + 1, m))
    H = np.empty((N, m))
    g = np.empty(m)
    xt = np.ones(p)
    for t in range(T):
        xt[:d] = X[t]
        partial[0, :] = y0
        for i in range(N):
            H[i, :] = W[i] @ xt
            partial[i + 1, :] = partial[i] - eta * H[i]
            nrm = np.sqrt(np.sum(partial[i + 1] * partial[i + 1]))
            if not nrm <= guard:
                return t
        for i in range(N + 1):
            stage_loss[t, i] = loss_value(kind, partial[i], S[t], reg)
        preds[t, :] = partial[N]
        lr = lr_c / (n_seen + t + 1.0) ** lr_power
        for i in range(N):
            loss_grad(kind, partial[i], S[t], reg, g)
            err = H[i] - g
            sq_err[t, i] = np.sum(err * err)
            sq_tgt[t, i] = np.sum(g * g)
            sq_pred[t, i] = np.sum(H[i] * H[i])
            Wsum[i] += W[i]
            W[i] -= (2.0 * lr) * np.outer(err, xt)
            _shrink_frobenius(W[i], w_radius)
    return DIVERGED_NONE


@njit
def sgb_residual_linear_pass(X, S, kind, reg, W, n_seen, etas, y0, radius,
                             denom, lr_c, lr_power, w_radius,
                             pred_loss, stage_loss, preds,
                             sq_err, sq_tgt, sq_pred, sq_resid, sq_grad):
    """Residual-projection streaming-boosting loop with linear learners.

    Learner i is trained toward (residual_{i-1} + subgradient_i); the
    residual then becomes that target minus the learner's pre-update output.
    Returns -1, or the row index where a non-finite value appeared.
    """
    T, d = X.shape
    N, m, p = W.shape
    partial = np.empty((N + 1, m))
    H = np.empty((N, m))
    g = np.empty(m)
    resid = np.empty(m)
    tgt = np.empty(m)
    step = np.empty(m)
    ypred = np.empty(m)
    xt = np.ones(p)
    for t in range(T):
        xt[:d] = X[t]
        project_ball(y0, radius, partial[0])
        for i in range(N):
            H[i, :] = W[i] @ xt
            step[:] = partial[i] - etas[i] * H[i]
            project_ball(step, radius, partial[i + 1])
        ypred[:] = 0.0
        for i in range(N + 1):
            ypred += partial[i]
        ypred /= denom
        if not np.all(np.isfinite(ypred)):
            return t
        preds[t, :] = ypred
        pred_loss[t] = loss_value(kind, ypred, S[t], reg)
        for i in range(N + 1):
            stage_loss[t, i] = loss_value(kind, partial[i], S[t], reg)
        lr = lr_c / (n_seen + t + 1.0) ** lr_power
        resid[:] = 0.0
        for i in range(N):
            loss_grad(kind, partial[i], S[t], reg, g)
            tgt[:] = resid + g
            err = H[i] - tgt
            sq_err[t, i] = np.sum(err * err)
            sq_tgt[t, i] = np.sum(tgt * tgt)
            sq_pred[t, i] = np.sum(H[i] * H[i])
            sq_grad[t, i] = np.sum(g * g)
            resid[:] = tgt - H[i]
            sq_resid[t, i] = np.sum(resid * resid)
            W[i] -= (2.0 * lr) * np.outer(err, xt)
            _shrink_frobenius(W[i], w_radius)
    return DIVERGED_NONE


# --------------------------------------------------------------------------
# CART regression trees (array representation)
# --------------------------------------------------------------------------


@njit
def _best_split(X, Y, seg, min_leaf):
    n = seg.shape[0]
    d = X.shape[1]
    m = Y.shape[1]
    total = np.zeros(m)
    for a in range(n):
        total += Y[seg[a]]
    base = np.sum(total * total) / n
    best_gain = 0.0
    best_feat = -1
    best_thr = 0.0
    xs = np.empty(n)
    left = np.empty(m)
    for f in range(d):
        for a in range(n):
            xs[a] = X[seg[a], f]
        order = np.argsort(xs, kind="mergesort")
        left[:] = 0.0
        for k in range(1, n):
            left += Y[seg[order[k - 1]]]
            if k < min_leaf or n - k < min_leaf:
                continue
            lo = xs[order[k - 1]]
            hi = xs[order[k]]
            if not lo < hi:
                continue
            right = total - left
            gain = np.sum(left * left) / k + np.sum(right * right) / (n - k) - base
            if gain > best_gain:
                best_gain = gain
                best_feat = f
                thr = lo + (hi - lo) * 0.5
                if thr >= hi:
                    thr = lo
                best_thr = thr
    return best_feat, best_thr, best_gain


@njit
def build_tree(X, Y, max_depth, min_leaf):
    """Greedy CART on squared error; returns flat node arrays.

    Node 0 is the root. ``left``/``right`` are -1 for leaves and ``value``
    holds the leaf (or node) mean of ``Y``.
    """
    n = X.shape[0]
    m = Y.shape[1]
    cap = 2 * n - 1
    if max_depth < 30:
        cap = min(cap, 2 ** (max_depth + 1) - 1)
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros((cap, m))

    idx = np.arange(n)
    scratch = np.empty(n, dtype=np.int64)
    st_node = np.empty(cap, dtype=np.int64)
    st_lo = np.empty(cap, dtype=np.int64)
    st_hi = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    top = 0
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = n
    st_depth[0] = 0
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = st_node[top]
        lo = st_lo[top]
        hi = st_hi[top]
        depth = st_depth[top]
        seg = idx[lo:hi]
        cnt = hi - lo
        acc = np.zeros(m)
        sq = 0.0
        for a in range(cnt):
            acc += Y[seg[a]]
            sq += np.sum(Y[seg[a]] * Y[seg[a]])
        value[node, :] = acc / cnt
        if depth >= max_depth or cnt < 2 * min_leaf or cnt < 2:
            continue
        feat, thr, gain = _best_split(X, Y, seg, min_leaf)
        if feat < 0 or gain <= 1e-12 * max(1.0, sq):
            continue
        nl = 0
        nr = 0
        for a in range(cnt):
            r = seg[a]
            if X[r, feat] <= thr:
                idx[lo + nl] = r
                nl += 1
            else:
                scratch[nr] = r
                nr += 1
        for a in range(nr):
            idx[lo + nl + a] = scratch[a]
        feature[node] = feat
        threshold[node] = thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        st_node[top] = n_nodes
        st_lo[top] = lo
        st_hi[top] = lo + nl
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = n_nodes + 1
        st_lo[top] = lo + nl
        st_hi[top] = hi
        st_depth[top] = depth + 1
        top += 1
        n_nodes += 2
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(),
            left[:n_nodes].copy(), right[:n_nodes].copy(), value[:n_nodes].copy())


@njit
def tree_predict_one(feature, threshold, left, right, value, x):
    node = 0
    while left[node] >= 0:
        if x[feature[node]] <= threshold[node]:
            node = left[node]
        else:
            node = right[node]
    return value[node]


@njit
def tree_predict(feature, threshold, left, right, value, X):
    n = X.shape[0]
    out = np.empty((n, value.shape[1]))
    for r in range(n):
        out[r, :] = tree_predict_one(feature, threshold, left, right, value, X[r])
    return out
