"""Per-slot sparse recovery over the shifted dictionary.

Complex LASSO by monotone FISTA (with function-value restart), followed by
best-K-term selection and an optional least-squares re-fit on the support.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebook import ShiftedDictionary
from .errors import ConfigError
from .tree_code import SlotCandidateList


@dataclass(frozen=True)
class LassoConfig:
    lambda_scale: float = 1.0
    max_iters: int = 3000
    tol: float = 1e-4
    debias: bool = True
    check_every: int = 5

    def __post_init__(self):
        for key in ("lambda_scale", "max_iters", "tol", "check_every"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"lasso.{key}", "must be positive")


@dataclass(frozen=True, eq=False)
class SparseEstimate:
    coefficients: np.ndarray
    objective: np.ndarray | float
    converged: np.ndarray | bool
    iterations: int
    kkt_residual: np.ndarray | float
    lam: float
    history: np.ndarray | None = None  # objective after every iteration


def soft_threshold(u: np.ndarray, thresh: float) -> np.ndarray:
    """Complex shrinkage: magnitudes reduced by ``thresh``, phases kept."""
    mag = np.abs(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(mag > thresh, 1.0 - thresh / mag, 0.0)
    return u * factor


def lasso_objective(residual: np.ndarray, x: np.ndarray, lam: float) -> np.ndarray:
    return 0.5 * np.sum(np.abs(residual) ** 2, axis=0) + lam * np.sum(np.abs(x), axis=0)


def kkt_residual(dictionary: ShiftedDictionary, y: np.ndarray, x: np.ndarray, lam: float):
    """Largest violation of the LASSO optimality conditions, per column.

    Off the support ``|<a_c, r>| <= lam``; on it ``<a_c, r> = lam * x_c/|x_c|``.
    """
    corr = dictionary.rmatvec(y - dictionary.matvec(x))
    return _kkt_from_corr(corr, x, lam, axis=0)


def _kkt_from_corr(corr, x, lam, axis):
    mag = np.abs(x)
    on = mag > 0
    sign = np.divide(x, mag, out=np.zeros_like(x), where=on)
    viol = np.where(on, np.abs(corr - lam * sign), np.maximum(np.abs(corr) - lam, 0.0))
    return viol.max(axis=axis)


def _sq_norm(a):
    f64 = np.float64
    return np.einsum("bi,bi->b", a.real, a.real, dtype=f64) + np.einsum("bi,bi->b", a.imag, a.imag, dtype=f64)


_L_RELAX = 0.9  # per-iteration shrink of the step-size estimate before backtracking


def _per_batch(idx, weights, per, b):
    return np.bincount(idx // per, weights, minlength=b)


def _scatter(union, idx, val):
    out = np.zeros(len(union), dtype=np.complex128)
    out[np.searchsorted(union, idx)] = val
    return out


def lasso_solve(dictionary: ShiftedDictionary, y, lam: float, config: LassoConfig | None = None,
                x0=None) -> SparseEstimate:
    """Minimize ``0.5 ||y - A x||^2 + lam ||x||_1`` over complex ``x``.

    ``y`` is one observation (length ``slot_len``) or a matrix whose columns
    are solved independently. A column has converged once its relative
    iterate change is below ``tol`` and its KKT residual is at most
    ``10 * tol * lam``. Columns that hit ``max_iters`` come back with
    ``converged`` False.

    Iterates are kept as (flat index, value) lists in the native layout:
    off the current support a coordinate survives the shrinkage step only
    if its gradient exceeds ``lam``, so each iteration touches the full
    coefficient space once, in the adjoint.
    """
    config = config or LassoConfig()
    y = np.asarray(y, dtype=np.complex128)
    if y.shape[0] != dictionary.shape[0]:
        raise ValueError(f"observation length {y.shape[0]} != slot length {dictionary.shape[0]}")
    if not np.all(np.isfinite(y)) or not np.isfinite(lam) or lam <= 0:
        raise ValueError("observations must be finite and lambda positive")
    single = y.ndim == 1
    Yt = np.ascontiguousarray(y[None, :] if single else y.T)  # (b, slot_len)
    b = Yt.shape[0]
    native_shape = (b, dictionary.n_shifts, dictionary.codebook.width)
    per = native_shape[1] * native_shape[2]
    size = b * per

    # per-column step 1/L by backtracking, from the column energy up to the global bound
    L_max = dictionary.lipschitz
    L_min = min(dictionary.column_energy, L_max)
    L = np.full(b, L_min)
    gain = dictionary.adjoint_gain
    g_cut = lam / gain
    kkt_tol = 10.0 * config.tol * lam
    buf = np.zeros(native_shape, dtype=np.complex128)
    sparse_cut = size // dictionary.codebook.n_rows

    def forward(idx, val):
        if len(idx) <= sparse_cut:
            return dictionary.forward_sparse(idx, val, b)
        dense = np.zeros(size, dtype=np.complex128)
        dense[idx] = val
        return dictionary.forward_native(dense.reshape(native_shape))

    def objective(Ax, idx, val):
        return 0.5 * _sq_norm(Ax - Yt) + lam * _per_batch(idx, np.abs(val), per, b)

    def kkt_of(idx, val, Ax):
        corr = dictionary.adjoint_unscaled(Yt - Ax, buf).reshape(-1)
        on = gain * corr[idx]
        corr[idx] = 0.0
        off = gain * np.abs(corr).reshape(b, -1).max(axis=1) - lam
        on_viol = np.abs(on - lam * val / np.abs(val))
        worst_on = np.zeros(b)
        np.maximum.at(worst_on, idx // per, on_viol)
        return np.maximum(np.maximum(off, 0.0), worst_on)

    if x0 is None:
        x_idx, x_val = np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.complex128)
    else:
        xn = dictionary.to_native(np.asarray(x0, dtype=np.complex128).reshape(dictionary.width, b)).reshape(-1)
        x_idx = np.flatnonzero(xn)
        x_val = xn[x_idx]
    Ax = forward(x_idx, x_val)
    Fx = objective(Ax, x_idx, x_val)
    v_idx, v_val, Av = x_idx, x_val, Ax
    t = np.ones(b)
    converged = np.zeros(b, dtype=bool)
    history = [Fx.copy()]

    it = 0
    for it in range(1, config.max_iters + 1):
        # gradient step and shrinkage, restricted to coordinates that can be nonzero
        R = Av - Yt
        fv = 0.5 * _sq_norm(R)
        G = dictionary.adjoint_unscaled(R, buf).reshape(-1)
        cand = np.union1d(np.flatnonzero(np.abs(G) > g_cut), v_idx)
        col = cand // per
        vc = _scatter(cand, v_idx, v_val)
        gc = gain * G[cand]
        L = np.maximum(L * _L_RELAX, L_min)
        while True:
            step = 1.0 / L[col]
            u = vc - step * gc
            mag = np.abs(u)
            keep = mag > lam * step
            zc = np.zeros_like(u)
            zc[keep] = u[keep] * (1.0 - lam * step[keep] / mag[keep])
            z_idx, z_val = cand[keep], zc[keep]
            Az = forward(z_idx, z_val)
            fz = 0.5 * _sq_norm(Az - Yt)
            d = zc - vc
            bound = (fv + _per_batch(cand, (gc.conj() * d).real, per, b)
                     + 0.5 * L * _per_batch(cand, np.abs(d) ** 2, per, b))
            short = (fz > bound + 1e-12 * (fv + 1.0)) & (L < L_max)
            if not short.any():
                break
            L = np.where(short, np.minimum(2.0 * L, L_max), L)
        Fz = fz + lam * _per_batch(z_idx, np.abs(z_val), per, b)

        # equality up to rounding counts as descent; otherwise a step at L_max can stall
        accept = Fz <= Fx + 1e-13 * np.abs(Fx)
        # a rejected step means the curvature estimate was too optimistic
        L = np.where(accept, L, np.minimum(2.0 * L / _L_RELAX, L_max))
        t_next = np.where(accept, 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t**2)), 1.0)
        mom = np.where(accept, (t - 1.0) / t_next, 0.0)
        if accept.all():
            xn_idx, xn_val, Axn = z_idx, z_val, Az
        else:
            # rejected columns keep x and restart momentum from it
            zk = accept[z_idx // per]
            xk = ~accept[x_idx // per]
            xn_idx = np.concatenate([z_idx[zk], x_idx[xk]])
            xn_val = np.concatenate([z_val[zk], x_val[xk]])
            order = np.argsort(xn_idx)
            xn_idx, xn_val = xn_idx[order], xn_val[order]
            Axn = np.where(accept[:, None], Az, Ax)
        union = np.union1d(xn_idx, x_idx)
        new_u = _scatter(union, xn_idx, xn_val)
        diff = new_u - _scatter(union, x_idx, x_val)
        v_idx, v_val = union, new_u + mom[union // per] * diff
        Av = Axn + mom[:, None] * (Axn - Ax)
        x_idx, x_val, Ax, Fx = xn_idx, xn_val, Axn, np.where(accept, Fz, Fx)
        t = t_next
        history.append(Fx.copy())

        if it % config.check_every == 0:
            delta = np.sqrt(_per_batch(union, np.abs(diff) ** 2, per, b))
            xnorm = np.sqrt(_per_batch(x_idx, np.abs(x_val) ** 2, per, b))
            if np.any((delta <= config.tol * np.maximum(xnorm, 1e-300)) & ~converged):
                converged = kkt_of(x_idx, x_val, Ax) <= kkt_tol
                if converged.all():
                    break

    kkt = kkt_of(x_idx, x_val, Ax)
    converged = kkt <= kkt_tol
    dense = np.zeros(size, dtype=np.complex128)
    dense[x_idx] = x_val
    coef = dictionary.from_native(dense.reshape(native_shape), single=single)
    hist = np.array(history)
    if single:
        return SparseEstimate(coef, float(Fx[0]), bool(converged[0]), it, float(kkt[0]), lam, hist[:, 0])
    return SparseEstimate(coef, Fx, converged, it, kkt, lam, hist)


def best_k_term(x, K: int) -> np.ndarray:
    """Keep the K largest-magnitude entries (lowest index wins ties)."""
    if K < 0:
        raise ValueError("K must be non-negative")
    x = np.asarray(x)
    out = np.zeros_like(x)
    if K == 0:
        return out
    order = np.argsort(-np.abs(x), kind="stable")[:K]
    out[order] = x[order]
    return out


def universal_lambda(dictionary: ShiftedDictionary, noise_std: float, lambda_scale: float) -> float:
    return lambda_scale * noise_std * np.sqrt(2.0 * np.log(dictionary.width))


def candidates_from_estimate(x, y_slot, dictionary: ShiftedDictionary, K: int, slot: int = 0,
                             debias: bool = True) -> SlotCandidateList:
    kept = best_k_term(x, K)
    support = np.flatnonzero(kept)
    coeffs = kept[support]
    if debias and len(support):
        A = dictionary.columns(support)
        coeffs, *_ = np.linalg.lstsq(A, y_slot, rcond=None)
    order = np.argsort(-np.abs(coeffs), kind="stable")
    support, coeffs = support[order], coeffs[order]
    values, delays = dictionary.unflatten(support)
    return SlotCandidateList(slot=slot, values=values, delays=delays, coeffs=coeffs)


def decode_slot(y_slot, dictionary: ShiftedDictionary, K: int, noise_std: float = 1.0,
                config: LassoConfig | None = None, slot: int = 0) -> SlotCandidateList:
    config = config or LassoConfig()
    lam = universal_lambda(dictionary, noise_std, config.lambda_scale)
    est = lasso_solve(dictionary, y_slot, lam, config)
    return candidates_from_estimate(est.coefficients, y_slot, dictionary, K, slot, config.debias)


def decode_slots(Y, dictionary: ShiftedDictionary, K: int, noise_std: float = 1.0,
                 config: LassoConfig | None = None):
    """Decode every column of ``Y`` (one per slot) with one batched solve.

    Returns ``(candidate lists, per-slot converged flags)``.
    """
    config = config or LassoConfig()
    lam = universal_lambda(dictionary, noise_std, config.lambda_scale)
    est = lasso_solve(dictionary, Y, lam, config)
    lists = [
        candidates_from_estimate(est.coefficients[:, i], Y[:, i], dictionary, K, i, config.debias)
        for i in range(Y.shape[1])
    ]
    return lists, np.asarray(est.converged)
