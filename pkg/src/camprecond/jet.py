"""Forward-mode dual numbers batched over cameras.

A :class:`Jet` carries values of shape ``(n,)`` and derivatives of shape
``(n, k)``: one scalar per camera plus its gradient with respect to that
camera's ``k`` residual parameters.  Plain ndarrays and floats mix freely with
jets; the module-level functions dispatch on type so the same parameterization
code evaluates either values alone or values with derivatives.
"""

from __future__ import annotations

import numpy as np


class Jet:
    __slots__ = ("v", "d")
    __array_ufunc__ = None  # ndarray (op) Jet defers to Jet's reflected ops

    def __init__(self, v, d):
        self.v = v
        self.d = d

    @classmethod
    def variables(cls, x: np.ndarray) -> list["Jet"]:
        """Seed one jet per column of ``x`` (shape ``(n, k)``)."""
        n, k = x.shape
        eye = np.eye(k)
        return [cls(x[:, j].copy(), np.broadcast_to(eye[j], (n, k)).copy()) for j in range(k)]

    def __add__(self, o):
        if isinstance(o, Jet):
            return Jet(self.v + o.v, self.d + o.d)
        return Jet(self.v + o, self.d)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Jet):
            return Jet(self.v - o.v, self.d - o.d)
        return Jet(self.v - o, self.d)

    def __rsub__(self, o):
        return Jet(o - self.v, -self.d)

    def __neg__(self):
        return Jet(-self.v, -self.d)

    def __mul__(self, o):
        if isinstance(o, Jet):
            return Jet(self.v * o.v, self.d * o.v[:, None] + o.d * self.v[:, None])
        o = np.asarray(o)
        return Jet(self.v * o, self.d * (o[:, None] if o.ndim else o))

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Jet):
            q = self.v / o.v
            return Jet(q, (self.d - o.d * q[:, None]) / o.v[:, None])
        o = np.asarray(o)
        return Jet(self.v / o, self.d / (o[:, None] if o.ndim else o))

    def __rtruediv__(self, o):
        q = o / self.v
        return Jet(q, -self.d * (q / self.v)[:, None])


def value(x):
    return x.v if isinstance(x, Jet) else x


def sin(x):
    if isinstance(x, Jet):
        return Jet(np.sin(x.v), x.d * np.cos(x.v)[:, None])
    return np.sin(x)


def cos(x):
    if isinstance(x, Jet):
        return Jet(np.cos(x.v), -x.d * np.sin(x.v)[:, None])
    return np.cos(x)


def exp(x):
    if isinstance(x, Jet):
        e = np.exp(x.v)
        return Jet(e, x.d * e[:, None])
    return np.exp(x)


def sqrt(x):
    if isinstance(x, Jet):
        s = np.sqrt(x.v)
        return Jet(s, x.d * (0.5 / s)[:, None])
    return np.sqrt(x)


def where(mask: np.ndarray, a, b):
    """Row-wise select between two jets or arrays."""
    if isinstance(a, Jet) or isinstance(b, Jet):
        n = len(mask)
        av, bv = value(a), value(b)
        ad = a.d if isinstance(a, Jet) else None
        bd = b.d if isinstance(b, Jet) else None
        k = (ad if ad is not None else bd).shape[1]
        ad = ad if ad is not None else np.zeros((n, k))
        bd = bd if bd is not None else np.zeros((n, k))
        return Jet(np.where(mask, av, bv), np.where(mask[:, None], ad, bd))
    return np.where(mask, a, b)


def pack(elements, n: int, k: int | None):
    """Stack scalar-likes into values ``(n, len)`` and derivatives ``(n, len, k)``."""
    vals = np.empty((n, len(elements)))
    ders = None if k is None else np.zeros((n, len(elements), k))
    for i, e in enumerate(elements):
        vals[:, i] = value(e)
        if ders is not None and isinstance(e, Jet):
            ders[:, i, :] = e.d
    return vals, ders
