"""Vectorized forward-mode automatic differentiation.

A :class:`Dual` carries a value array of shape ``S`` and a tangent array of
shape ``S + (n,)`` holding ``n`` directional derivatives at once.  The model
code (geometry, transmission, dynamics) is written against the free functions
in this module so the same source evaluates on floats, numpy arrays, or duals.
"""

from __future__ import annotations

import numpy as np


class Dual:
    __slots__ = ("val", "der")
    # numpy must defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, val, der):
        self.val = np.asarray(val, dtype=float)
        self.der = np.asarray(der, dtype=float)

    @classmethod
    def seed(cls, values: np.ndarray) -> list["Dual"]:
        """Independent variables from the last axis of ``values``.

        ``values`` has shape ``(..., n)``; component ``j`` is returned as a dual
        with tangent ``e_j``.
        """
        values = np.asarray(values, dtype=float)
        n = values.shape[-1]
        eye = np.eye(n)
        shape = values.shape[:-1] + (n,)
        return [cls(values[..., j], np.broadcast_to(eye[j], shape)) for j in range(n)]

    @property
    def shape(self):
        return self.val.shape

    @property
    def nder(self) -> int:
        return self.der.shape[-1]

    def __repr__(self):
        return f"Dual(val={self.val!r}, nder={self.nder})"

    def __getitem__(self, item):
        if not isinstance(item, tuple):
            item = (item,)
        return Dual(self.val[item], self.der[item + (slice(None),)])

    # ---- arithmetic -------------------------------------------------------
    def __neg__(self):
        return Dual(-self.val, -self.der)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.der + other.der)
        other = np.asarray(other, dtype=float)
        val = self.val + other
        return Dual(val, _bcast(self.der, val.shape))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.der - other.der)
        other = np.asarray(other, dtype=float)
        val = self.val - other
        return Dual(val, _bcast(self.der, val.shape))

    def __rsub__(self, other):
        other = np.asarray(other, dtype=float)
        val = other - self.val
        return Dual(val, _bcast(-self.der, val.shape))

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.val * other.val,
                self.der * other.val[..., None] + other.der * self.val[..., None],
            )
        other = np.asarray(other, dtype=float)
        return Dual(self.val * other, self.der * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.val
            val = self.val * inv
            return Dual(val, (self.der - other.der * val[..., None]) * inv[..., None])
        other = np.asarray(other, dtype=float)
        inv = 1.0 / other
        return Dual(self.val * inv, self.der * inv[..., None])

    def __rtruediv__(self, other):
        other = np.asarray(other, dtype=float)
        inv = 1.0 / self.val
        val = other * inv
        return Dual(val, -self.der * (val * inv)[..., None])

    def __pow__(self, p):
        if isinstance(p, Dual):
            raise TypeError("dual exponents are not supported")
        if p == 2:
            return self * self
        val = self.val**p
        return Dual(val, self.der * (p * self.val ** (p - 1))[..., None])

    # ---- elementary functions --------------------------------------------
    def _chain(self, val, dval):
        return Dual(val, self.der * np.asarray(dval)[..., None])

    def sqrt(self):
        val = np.sqrt(self.val)
        return self._chain(val, 0.5 / val)

    def tanh(self):
        val = np.tanh(self.val)
        return self._chain(val, 1.0 - val * val)

    def sin(self):
        return self._chain(np.sin(self.val), np.cos(self.val))

    def cos(self):
        return self._chain(np.cos(self.val), -np.sin(self.val))

    def exp(self):
        val = np.exp(self.val)
        return self._chain(val, val)


def _bcast(der, shape):
    if der.shape[:-1] == shape:
        return der
    return np.broadcast_to(der, shape + der.shape[-1:])


def sqrt(x):
    return x.sqrt() if isinstance(x, Dual) else np.sqrt(x)


def tanh(x):
    return x.tanh() if isinstance(x, Dual) else np.tanh(x)


def sin(x):
    return x.sin() if isinstance(x, Dual) else np.sin(x)


def cos(x):
    return x.cos() if isinstance(x, Dual) else np.cos(x)


def exp(x):
    return x.exp() if isinstance(x, Dual) else np.exp(x)


def value(x):
    """Primal part of ``x`` (identity for non-duals)."""
    return x.val if isinstance(x, Dual) else x


def stack(items, nder: int | None = None) -> Dual | np.ndarray:
    """Stack scalars-like items along a new last axis.

    Mixing duals and constants is allowed; constants get zero tangents.  With no
    dual among ``items`` a plain array is returned.
    """
    duals = [it for it in items if isinstance(it, Dual)]
    if not duals:
        return np.stack(np.broadcast_arrays(*[np.asarray(it, dtype=float) for it in items]), axis=-1)
    n = duals[0].nder if nder is None else nder
    shape = np.broadcast_shapes(*[np.shape(value(it)) for it in items])
    vals, ders = [], []
    for it in items:
        if isinstance(it, Dual):
            vals.append(np.broadcast_to(it.val, shape))
            ders.append(np.broadcast_to(it.der, shape + (n,)))
        else:
            vals.append(np.broadcast_to(np.asarray(it, dtype=float), shape))
            ders.append(np.zeros(shape + (n,)))
    return Dual(np.stack(vals, axis=-1), np.stack(ders, axis=-2))


def jacobian(fun, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Value and dense Jacobian of ``fun`` at a 1-D point ``x``.

    ``fun`` receives a list of dual scalars and must return a sequence of
    outputs (duals or constants).
    """
    x = np.asarray(x, dtype=float)
    args = Dual.seed(x)
    out = stack(list(fun(args)), nder=x.size)
    if isinstance(out, Dual):
        return out.val, out.der
    return out, np.zeros(out.shape + (x.size,))
