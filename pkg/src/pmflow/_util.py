"""Small numeric helpers shared across modules.

Quintic smoothstep profiles (used for every cutoff function), a vectorized
bisection for monotone scalar equations evaluated on arrays, and shortest
round-trip float formatting for the CSV/JSON writers.
"""

import numpy as np

from .errors import NumericalError


def smoothstep(x, lo, hi):
    """C^2 quintic ramp: 0 for x <= lo, 1 for x >= hi.

    Parameters
    ----------
    x : array_like
    lo, hi : float
        Edges of the transition band, lo < hi.
    """
    t = (np.asarray(x, dtype=float) - lo) / (hi - lo)
    t = np.minimum(1.0, np.maximum(0.0, t))
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def smoothstep_d(x, lo, hi):
    """Derivative of :func:`smoothstep` with respect to x."""
    w = hi - lo
    t = np.clip((np.asarray(x, dtype=float) - lo) / w, 0.0, 1.0)
    return 30.0 * t * t * (t - 1.0) * (t - 1.0) / w


def smoothstep_d2(x, lo, hi):
    """Second derivative of :func:`smoothstep` with respect to x."""
    w = hi - lo
    t = np.clip((np.asarray(x, dtype=float) - lo) / w, 0.0, 1.0)
    return 60.0 * t * (t - 1.0) * (2.0 * t - 1.0) / (w * w)


def bisect_vec(f, lo, hi, iters=80):
    """Vectorized bisection for a sign-changing function on [lo, hi].

    Parameters
    ----------
    f : callable
        Maps an array of abscissae to an array of residuals.
    lo, hi : ndarray
        Bracket endpoints, f(lo) and f(hi) of opposite sign (checked).
    iters : int
        Number of halvings; 80 reaches machine precision on O(1) brackets.

    Returns
    -------
    ndarray
        Approximate roots, midpoints of the final brackets.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    flo = f(lo)
    fhi = f(hi)
    bad = flo * fhi > 0
    if np.any(bad):
        raise NumericalError(
            "bisection bracket does not change sign",
            count=int(np.count_nonzero(bad)),
            lo=lo[bad].ravel()[:5].tolist(),
            hi=hi[bad].ravel()[:5].tolist(),
        )
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        take_lo = (fm * flo) <= 0
        hi = np.where(take_lo, mid, hi)
        fhi = np.where(take_lo, fm, fhi)
        lo = np.where(take_lo, lo, mid)
        flo = np.where(take_lo, flo, fm)
    return 0.5 * (lo + hi)


def fmt_float(x):
    """Shortest decimal string that round-trips to the same float."""
    return repr(float(x))


def write_csv(path, header, columns):
    """Write columns of floats as a deterministic CSV file.

    '.' decimal separator, LF line endings, shortest round-trip formatting.
    `header` is a list of column names; extra comment lines may be prepended
    by the caller (they must already include the leading '#').
    """
    cols = [np.asarray(c, dtype=float) for c in columns]
    n = len(cols[0])
    lines = [",".join(header)]
    for i in range(n):
        lines.append(",".join(fmt_float(c[i]) for c in cols))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
