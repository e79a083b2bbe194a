"""Dense single-precision matrix kernels.

A "matrix" here is a 2-D, C-contiguous ``numpy.float32`` array with at least
one row and one column. The kernels are written as explicit loops with the
same nesting as the reference pseudocode (row-major, ascending inner index,
single-precision accumulator), compiled with numba. That keeps results
bit-reproducible and makes their cost proportional to the element count,
which the timing model relies on.
"""

import numba
import numpy as np

from .errors import DomainError, ShapeError

DTYPE = np.float32

# Sigmoid outputs are clipped into the open interval (0, 1).
_SIGMOID_LO = np.finfo(np.float32).tiny
_SIGMOID_HI = np.nextafter(np.float32(1.0), np.float32(0.0))


def matrix(values):
    """Coerce ``values`` to a validated float32 matrix.

    Scalars and 1-D sequences are rejected; use ``[[x]]`` or ``[row]``.
    """
    if (
        type(values) is np.ndarray
        and values.dtype == DTYPE
        and values.ndim == 2
        and values.flags.c_contiguous
        and values.size
    ):
        return values
    a = np.ascontiguousarray(values, dtype=DTYPE)
    if a.ndim != 2:
        raise ShapeError(f"matrix must be 2-D, got {a.ndim}-D shape {a.shape}")
    if a.shape[0] == 0 or a.shape[1] == 0:
        raise ShapeError(f"degenerate matrix shape {a.shape}")
    return a


def zeros(rows, cols):
    return matrix(np.zeros((rows, cols), dtype=DTYPE))


def _same_shape(a, b, op):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


@numba.njit(cache=True)
def _prod_mat(a, b):
    m, p = a.shape
    n = b.shape[1]
    c = np.empty((m, n), dtype=np.float32)
    for i in range(m):
        for j in range(n):
            acc = np.float32(0.0)
            for s in range(p):
                acc = acc + a[i, s] * b[s, j]
            c[i, j] = acc
    return c


@numba.njit(cache=True)
def _prod(a, b):
    rows, cols = a.shape
    c = np.empty((rows, cols), dtype=np.float32)
    for i in range(rows):
        for j in range(cols):
            c[i, j] = a[i, j] * b[i, j]
    return c


@numba.njit(cache=True)
def _dif(a, b):
    rows, cols = a.shape
    c = np.empty((rows, cols), dtype=np.float32)
    for i in range(rows):
        for j in range(cols):
            c[i, j] = a[i, j] - b[i, j]
    return c


@numba.njit(cache=True)
def _trace(a, b):
    rows, cols = a.shape
    acc = np.float32(0.0)
    for i in range(rows):
        for j in range(cols):
            acc = acc + a[i, j] * b[i, j]
    return acc


@numba.njit(cache=True)
def _activfun(y, lo, hi):
    rows, cols = y.shape
    out = np.empty((rows, cols), dtype=np.float32)
    one = np.float32(1.0)
    for i in range(rows):
        for j in range(cols):
            v = one / (one + np.exp(-y[i, j]))
            if v < lo:
                v = lo
            elif v > hi:
                v = hi
            out[i, j] = v
    return out


@numba.njit(cache=True)
def _augment(y):
    rows, cols = y.shape
    out = np.empty((rows + 1, cols), dtype=np.float32)
    for j in range(cols):
        out[0, j] = np.float32(-1.0)
    for i in range(rows):
        for j in range(cols):
            out[i + 1, j] = y[i, j]
    return out


@numba.njit(cache=True)
def _ffm(w, y_prev, sigmoid, lo, hi):
    # prodMat on the bias-augmented input, then activfun in one compiled call.
    z = _prod_mat(w, _augment(y_prev))
    if sigmoid:
        return _activfun(z, lo, hi)
    return z


@numba.njit(cache=True)
def _transpose(a):
    rows, cols = a.shape
    out = np.empty((cols, rows), dtype=np.float32)
    for i in range(rows):
        for j in range(cols):
            out[j, i] = a[i, j]
    return out


@numba.njit(cache=True)
def _update(w, dw_prev, g, y_prev, eta_over_n, alpha):
    step = _prod_mat(g, _transpose(_augment(y_prev)))
    rows, cols = w.shape
    dw = np.empty((rows, cols), dtype=np.float32)
    w_new = np.empty((rows, cols), dtype=np.float32)
    for i in range(rows):
        for j in range(cols):
            dw[i, j] = eta_over_n * step[i, j] + alpha * dw_prev[i, j]
            w_new[i, j] = w[i, j] + dw[i, j]
    return w_new, dw


@numba.njit(cache=True)
def _hidden_delta(w_next, g_next, y_hidden, sigmoid):
    back = _prod_mat(_transpose(w_next), g_next)
    rows, cols = y_hidden.shape
    out = np.empty((rows, cols), dtype=np.float32)
    one = np.float32(1.0)
    for i in range(rows):
        for j in range(cols):
            # Row 0 of ``back`` belongs to the bias input and is dropped.
            if sigmoid:
                out[i, j] = (y_hidden[i, j] * (one - y_hidden[i, j])) * back[i + 1, j]
            else:
                out[i, j] = back[i + 1, j]
    return out


@numba.njit(cache=True)
def _dactivfun(y):
    rows, cols = y.shape
    out = np.empty((rows, cols), dtype=np.float32)
    one = np.float32(1.0)
    for i in range(rows):
        for j in range(cols):
            out[i, j] = y[i, j] * (one - y[i, j])
    return out


def mat_product(a, b):
    """``C = A @ B`` accumulated in float32, ascending inner index."""
    a, b = matrix(a), matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"mat_product: cannot multiply {a.shape} by {b.shape}")
    return _prod_mat(a, b)


def hadamard(a, b):
    a, b = matrix(a), matrix(b)
    _same_shape(a, b, "hadamard")
    return _prod(a, b)


def mat_sub(a, b):
    a, b = matrix(a), matrix(b)
    _same_shape(a, b, "mat_sub")
    return _dif(a, b)


def trace_product(a, b):
    """Return ``trace(A.T @ B)`` in one pass, without forming the product.

    Both operands have the same shape; the sum runs over ``A[i][j] * B[i][j]``
    in row-major order with a float32 accumulator.
    """
    a, b = matrix(a), matrix(b)
    _same_shape(a, b, "trace_product")
    return np.float32(_trace(a, b))


def transpose(a):
    return _transpose(matrix(a))


def augment_bias(y):
    """Stack a row of -1 on top of ``y`` (the bias input of the next layer)."""
    return _augment(matrix(y))


def layer_forward(w, y_prev, sigmoid=True):
    """``phi(W @ augment_bias(Y))`` as one compiled call; shapes are checked."""
    w, y_prev = matrix(w), matrix(y_prev)
    if w.shape[1] != y_prev.shape[0] + 1:
        raise ShapeError(
            f"layer_forward: weights {w.shape} expect {w.shape[1] - 1} input rows, "
            f"got {y_prev.shape[0]}"
        )
    return _ffm(w, y_prev, sigmoid, _SIGMOID_LO, _SIGMOID_HI)


def sigmoid_apply(y):
    return _activfun(matrix(y), _SIGMOID_LO, _SIGMOID_HI)


def sigmoid_derivative_from_output(y_act):
    """Element-wise ``y * (1 - y)`` for already-activated outputs in [0, 1]."""
    y_act = matrix(y_act)
    if not np.all((y_act >= 0.0) & (y_act <= 1.0)):
        raise DomainError("sigmoid derivative expects activated outputs in [0, 1]")
    return _dactivfun(y_act)


def layer_update(w, dw_prev, g, y_prev, eta, alpha):
    """Momentum step ``dW = eta/N g [-1; Y].T + alpha dW_prev``; returns ``(W + dW, dW)``."""
    w, dw_prev, g, y_prev = matrix(w), matrix(dw_prev), matrix(g), matrix(y_prev)
    if w.shape != dw_prev.shape:
        raise ShapeError(f"layer_update: weights {w.shape} vs momentum {dw_prev.shape}")
    if g.shape != (w.shape[0], y_prev.shape[1]) or w.shape[1] != y_prev.shape[0] + 1:
        raise ShapeError(
            f"layer_update: gradient {g.shape} and input {y_prev.shape} "
            f"do not match weights {w.shape}"
        )
    n = y_prev.shape[1]
    return _update(w, dw_prev, g, y_prev, DTYPE(eta / n), DTYPE(alpha))


def layer_hidden_delta(w_next, g_next, y_hidden, sigmoid=True):
    """``phi'(Y) * (W_next.T @ g_next)`` with the bias row of the product dropped.

    ``y_hidden`` must be the activated output of the hidden layer.
    """
    w_next, g_next, y_hidden = matrix(w_next), matrix(g_next), matrix(y_hidden)
    if w_next.shape[0] != g_next.shape[0] or w_next.shape[1] != y_hidden.shape[0] + 1:
        raise ShapeError(
            f"layer_hidden_delta: weights {w_next.shape}, gradient {g_next.shape} "
            f"and hidden output {y_hidden.shape} are inconsistent"
        )
    if g_next.shape[1] != y_hidden.shape[1]:
        raise ShapeError("layer_hidden_delta: batch width mismatch")
    return _hidden_delta(w_next, g_next, y_hidden, sigmoid)
