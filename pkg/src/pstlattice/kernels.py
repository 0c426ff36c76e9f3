"""Hot inner loops, each in a numba and a pure-numpy flavour.

The public names (``scan_intensity`` ...) resolve to the numba version unless
``PSTLATTICE_DISABLE_NUMBA`` is set; ``*_numpy`` / ``*_numba`` stay importable
so the two paths can be compared directly.
"""
import numpy as np

from ._accel import HAVE_NUMBA, JIT_OPTS, njit


# ---------------------------------------------------------------------------
# pure numpy
# ---------------------------------------------------------------------------

def scan_intensity_numpy(evals, weights, zs):
    """|sum_r w_r exp(-i lam_r z)|^2 for every z."""
    phases = np.exp(-1j * np.outer(zs, evals))
    return np.abs(phases @ weights) ** 2


def pair_correlation_numpy(a, b, sign):
    amp = np.outer(a, b)
    return np.abs(amp + sign * amp.T) ** 2


def phase_moments_numpy(a, b, phases):
    """First and second moments of I_n(phi) I_m(phi) over the given phases."""
    field = a[None, :] + np.exp(1j * phases)[:, None] * b[None, :]
    inten = np.abs(field) ** 2
    m = len(phases)
    first = inten.T @ inten / m
    sq = inten ** 2
    second = sq.T @ sq / m
    return 0.5 * (first + first.T), 0.5 * (second + second.T)


def batch_transfer_fidelity_numpy(couplings, detunings, z, src, dst):
    n_samples, n_bonds = couplings.shape
    n = n_bonds + 1
    h = np.zeros((n_samples, n, n))
    idx = np.arange(n_bonds)
    h[:, idx, idx + 1] = couplings
    h[:, idx + 1, idx] = couplings
    h[:, np.arange(n), np.arange(n)] = detunings
    w, v = np.linalg.eigh(h)
    amp = np.sum(v[:, dst, :] * v[:, src, :] * np.exp(-1j * w * z), axis=1)
    return np.abs(amp) ** 2


# ---------------------------------------------------------------------------
# numba
# ---------------------------------------------------------------------------

@njit(**JIT_OPTS)
def scan_intensity_numba(evals, weights, zs):
    out = np.empty(zs.shape[0])
    for k in range(zs.shape[0]):
        re = 0.0
        im = 0.0
        for r in range(evals.shape[0]):
            ph = -evals[r] * zs[k]
            c = np.cos(ph)
            s = np.sin(ph)
            w = weights[r]
            re += w.real * c - w.imag * s
            im += w.real * s + w.imag * c
        out[k] = re * re + im * im
    return out


@njit(**JIT_OPTS)
def pair_correlation_numba(a, b, sign):
    n = a.shape[0]
    out = np.empty((n, n))
    for m in range(n):
        for k in range(m, n):
            v = a[m] * b[k] + sign * (a[k] * b[m])
            g = v.real * v.real + v.imag * v.imag
            out[m, k] = g
            out[k, m] = g
    return out


@njit(**JIT_OPTS)
def phase_moments_numba(a, b, phases):
    n = a.shape[0]
    m = phases.shape[0]
    first = np.zeros((n, n))
    second = np.zeros((n, n))
    inten = np.empty(n)
    for k in range(m):
        e = np.exp(1j * phases[k])
        for p in range(n):
            f = a[p] + e * b[p]
            inten[p] = f.real * f.real + f.imag * f.imag
        for p in range(n):
            for q in range(p, n):
                x = inten[p] * inten[q]
                first[p, q] += x
                second[p, q] += x * x
    for p in range(n):
        for q in range(p, n):
            first[p, q] /= m
            second[p, q] /= m
            first[q, p] = first[p, q]
            second[q, p] = second[p, q]
    return first, second


@njit(**JIT_OPTS)
def _ql_two_rows(d, e, rows):
    """Implicit QL on a symmetric tridiagonal matrix, in place.

    ``d`` ends up holding the eigenvalues. Rotations are accumulated only into
    ``rows`` (two rows of the identity on entry), which then hold those rows of
    the eigenvector matrix. ``e[i]`` couples i and i+1 and ``e[-1]`` must be 0.
    Returns False if an eigenvalue fails to converge.
    """
    n = d.shape[0]
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) + dd == dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > 60:
                return False
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0.0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                for k in range(rows.shape[0]):
                    f = rows[k, i + 1]
                    rows[k, i + 1] = s * rows[k, i] + c * f
                    rows[k, i] = c * rows[k, i] - s * f
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return True


@njit(**JIT_OPTS)
def batch_transfer_fidelity_numba(couplings, detunings, z, src, dst):
    """Non-converged samples come back as NaN."""
    n_samples, n_bonds = couplings.shape
    n = n_bonds + 1
    out = np.empty(n_samples)
    d = np.empty(n)
    e = np.empty(n)
    rows = np.empty((2, n))
    for s in range(n_samples):
        d[:] = detunings
        e[:n_bonds] = couplings[s]
        e[n_bonds] = 0.0
        rows[:, :] = 0.0
        rows[0, src] = 1.0
        rows[1, dst] = 1.0
        if not _ql_two_rows(d, e, rows):
            out[s] = np.nan
            continue
        re = 0.0
        im = 0.0
        for r in range(n):
            c = rows[1, r] * rows[0, r]
            re += c * np.cos(d[r] * z)
            im -= c * np.sin(d[r] * z)
        out[s] = re * re + im * im
    return out


if HAVE_NUMBA:
    scan_intensity = scan_intensity_numba
    pair_correlation = pair_correlation_numba
    phase_moments = phase_moments_numba
    batch_transfer_fidelity = batch_transfer_fidelity_numba
else:
    scan_intensity = scan_intensity_numpy
    pair_correlation = pair_correlation_numpy
    phase_moments = phase_moments_numpy
    batch_transfer_fidelity = batch_transfer_fidelity_numpy
