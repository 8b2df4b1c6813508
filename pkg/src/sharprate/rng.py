"""Counter-based random numbers keyed by (seed, path index, draw index).

Uniforms come from the SplitMix64 output function applied to a per-path
Weyl sequence, so any draw can be produced without touching the others and a
batch is bit-identical however it is split into chunks.  Normals use the
Wichura AS241 (PPND16) rational approximation to the inverse normal CDF,
accurate to about 1e-16 relative over the open unit interval.
"""
from __future__ import annotations

import numpy as np

__all__ = ["splitmix64", "uniforms", "normal_quantile", "standard_normals"]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_PATH_SALT = np.uint64(0xD1B54A32D192ED03)
_MASK64 = (1 << 64) - 1


def splitmix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finaliser, vectorised over uint64 arrays (wrapping arithmetic)."""
    z = np.asarray(x, dtype=np.uint64).copy()
    with np.errstate(over="ignore"):
        z ^= z >> np.uint64(30)
        z *= _M1
        z ^= z >> np.uint64(27)
        z *= _M2
        z ^= z >> np.uint64(31)
    return z


def _path_states(seed: int, path_ids: np.ndarray) -> np.ndarray:
    seed_key = splitmix64(np.array([int(seed) & _MASK64], dtype=np.uint64))[0]
    with np.errstate(over="ignore"):
        mixed = splitmix64(path_ids.astype(np.uint64) * _PATH_SALT + _GOLDEN)
    return splitmix64(mixed ^ seed_key)


def uniforms(seed: int, path_ids, count: int) -> np.ndarray:
    """Uniforms in (0, 1), shape (len(path_ids), count).

    Entry [i, j] depends only on (seed, path_ids[i], j).
    """
    path_ids = np.asarray(path_ids, dtype=np.uint64).reshape(-1)
    base = _path_states(seed, path_ids)
    steps = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        state = base[:, None] + steps[None, :] * _GOLDEN
    bits = splitmix64(state) >> np.uint64(11)
    # (k + 1/2) 2^-53 never hits 0 or 1
    return (bits.astype(np.float64) + 0.5) * 2.0**-53


_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)


def _poly(coeffs, x):
    # Horner, in place to keep temporaries down on large batches
    out = np.full_like(x, coeffs[-1])
    for c in coeffs[-2::-1]:
        out *= x
        out += c
    return out


def normal_quantile(p) -> np.ndarray:
    """Inverse standard normal CDF for p in (0, 1) (AS241, PPND16)."""
    p = np.asarray(p, dtype=np.float64)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise ValueError("normal_quantile needs 0 < p < 1")
    q = p - 0.5
    out = np.empty_like(p)

    central = np.abs(q) <= 0.425
    if np.any(central):
        qc = q[central]
        r = qc * qc
        np.subtract(0.180625, r, out=r)
        num = _poly(_A, r)
        num *= qc
        num /= _poly(_B, r)
        out[central] = num

    tail = ~central
    if np.any(tail):
        qt = q[tail]
        r = np.sqrt(-np.log(np.where(qt < 0.0, p[tail], 1.0 - p[tail])))
        x = np.where(
            r <= 5.0,
            _poly(_C, r - 1.6) / _poly(_D, r - 1.6),
            _poly(_E, r - 5.0) / _poly(_F, r - 5.0),
        )
        out[tail] = np.where(qt < 0.0, -x, x)
    return out


def standard_normals(seed: int, path_ids, count: int) -> np.ndarray:
    """N(0, 1) draws, shape (len(path_ids), count), keyed like :func:`uniforms`."""
    return normal_quantile(uniforms(seed, path_ids, count))
