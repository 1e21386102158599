"""Generative model, Hamiltonian, gradient, and overlap.

A ground-truth vector x* uniform on the sphere ||x*||^2 = N is observed
through two noisy channels:

    Y_ijk...                     (i < j)        matrix channel
        Y_ij = x*_i x*_j / sqrt(N) + xi_ij,     xi_ij  ~ N(0, delta2)
    T_ijk                        (i < j < k)    tensor channel
        T_ijk = sqrt(2) x*_i x*_j x*_k / N + xi_ijk,  xi_ijk ~ N(0, delta3)

The energy of a configuration x on the sphere is

    H(x) = -1/(delta2 sqrt(N)) sum_{i<j} Y_ij x_i x_j
           -sqrt(2)/(delta3 N) sum_{i<j<k} T_ijk x_i x_j x_k

Storage layout
--------------
Only i<j (matrix) and i<j<k (tensor) noise entries are kept, in LAPACK
packed-upper column-major buffers so that the contractions run as single
BLAS ``spmv`` calls per leading index.  The rank-one spike parts are never
materialised; they are applied in closed form inside the contractions, so
observations are reproduced exactly as spike + stored noise.  The tensor
buffer is split by leading index i: slice i holds the pairs (j, k) with
i < j < k as the packed upper triangle (including a zeroed diagonal, which
pads j == k positions) of the (N-1-i) x (N-1-i) block.

Setting ``delta2`` or ``delta3`` to ``math.inf`` disables that channel: no
noise is drawn for it and the corresponding coupling 1/delta vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import blas as _blas

from .errors import ParameterError, ShapeError
from .kernel import KernelQ

_SQRT2 = math.sqrt(2.0)

#: spawn-key domain separating thermal/algorithm streams from instance streams
RNG_DOMAIN_THERMAL = 101

_DTYPES = {"float64": np.float64, "float32": np.float32, "float16": np.float16}


@dataclass(frozen=True)
class ModelParams:
    """Problem definition: size, channel variances, inverse temperature.

    ``beta = math.inf`` selects gradient flow / maximum likelihood.
    ``delta2`` or ``delta3`` may be ``math.inf`` to switch a channel off;
    instances then carry no noise for it.
    """

    n: int
    delta2: float
    delta3: float
    beta: float = 1.0

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 3:
            raise ParameterError(f"n must be an integer >= 3, got {self.n!r}")
        if not self.delta2 > 0:
            raise ParameterError(f"delta2 must be positive, got {self.delta2}")
        if not self.delta3 > 0:
            raise ParameterError(f"delta3 must be positive, got {self.delta3}")
        if not self.beta > 0:
            raise ParameterError(f"beta must be positive (inf allowed), got {self.beta}")

    @property
    def is_gradient_flow(self) -> bool:
        return math.isinf(self.beta)

    @property
    def kernel(self) -> KernelQ:
        return KernelQ(self.delta2, self.delta3)


# ---------------------------------------------------------------------------
# packed-upper (column-major, diagonal included) layout helpers
# ---------------------------------------------------------------------------

def packed_size(s: int) -> int:
    return s * (s + 1) // 2


def packed_index(r: int, c: int) -> int:
    """Flat index of entry (r, c), r <= c, in packed-upper column-major order."""
    return c * (c + 1) // 2 + r


def _packed_diag_indices(s: int) -> np.ndarray:
    c = np.arange(s, dtype=np.int64)
    return c * (c + 3) // 2


def _pack_sym(dense: np.ndarray) -> np.ndarray:
    """Pack the strict upper triangle of a square array; diagonal cells zeroed."""
    s = dense.shape[0]
    ap = np.empty(packed_size(s), dtype=dense.dtype)
    for c in range(s):
        base = c * (c + 1) // 2
        ap[base:base + c + 1] = dense[:c + 1, c]
    ap[_packed_diag_indices(s)] = 0
    return ap


def _unpack_sym(ap: np.ndarray, s: int) -> np.ndarray:
    """Inverse of :func:`_pack_sym`: dense symmetric array with zero diagonal."""
    out = np.zeros((s, s), dtype=np.float64)
    for c in range(s):
        base = c * (c + 1) // 2
        out[:c + 1, c] = ap[base:base + c + 1]
    out = out + out.T
    return out


def _spmv(ap: np.ndarray, x: np.ndarray) -> np.ndarray:
    """y = M @ x for a packed symmetric M (zero diagonal stored explicitly)."""
    s = x.shape[0]
    if ap.dtype == np.float64:
        return _blas.dspmv(s, 1.0, ap, x)
    buf = ap if ap.dtype == np.float32 else ap.astype(np.float32)
    return _blas.sspmv(s, 1.0, buf, np.asarray(x, dtype=np.float32))


# ---------------------------------------------------------------------------
# instance
# ---------------------------------------------------------------------------

class Instance:
    """One frozen draw of signal and observation noise.

    Immutable after creation; safe to share across workers.  ``y_noise`` is
    the packed matrix noise (empty when delta2 is inf).  ``t3_noise`` is one
    flat buffer holding all tensor slices back to back (empty when delta3 is
    inf); per-slice views are exposed via :attr:`t3_slices`.
    """

    def __init__(self, n, delta2, delta3, seed, dtype, signal, y_noise, t3_noise):
        self.n = int(n)
        self.delta2 = float(delta2)
        self.delta3 = float(delta3)
        self.seed = seed
        self.dtype = np.dtype(dtype)
        self.signal = np.asarray(signal, dtype=np.float64)
        self.y_noise = y_noise
        self.t3_noise = t3_noise
        nrm = self.signal @ self.signal
        if abs(nrm / self.n - 1.0) > 1e-12:
            raise ParameterError("signal must satisfy ||signal||^2 = n")
        self._t3_offsets = _t3_offsets(self.n) if t3_noise.size else None
        if self._t3_offsets is not None and t3_noise.size != self._t3_offsets[-1]:
            raise ShapeError("tensor noise buffer has the wrong length")
        if y_noise.size and y_noise.size != packed_size(self.n):
            raise ShapeError("matrix noise buffer has the wrong length")
        self._t3_slices = None

    @property
    def t3_slices(self):
        if self.t3_noise.size == 0:
            return []
        if self._t3_slices is None:
            off = self._t3_offsets
            self._t3_slices = [self.t3_noise[off[i]:off[i + 1]] for i in range(self.n - 2)]
        return self._t3_slices

    @property
    def has_matrix_noise(self) -> bool:
        return self.y_noise.size > 0

    @property
    def has_tensor_noise(self) -> bool:
        return self.t3_noise.size > 0

    @property
    def nbytes(self) -> int:
        return self.signal.nbytes + self.y_noise.nbytes + self.t3_noise.nbytes

    # -- observation accessors ---------------------------------------------

    def y_entry(self, i: int, j: int) -> float:
        """Observation Y_ij (i != j); symmetric in its indices."""
        if i == j:
            raise ParameterError("diagonal matrix entries are not part of the model")
        r, c = (i, j) if i < j else (j, i)
        spike = self.signal[r] * self.signal[c] / math.sqrt(self.n)
        noise = float(self.y_noise[packed_index(r, c)]) if self.has_matrix_noise else 0.0
        return spike + noise

    def t3_entry(self, i: int, j: int, k: int) -> float:
        """Observation T_ijk (distinct indices); fully symmetric."""
        a, b, c = sorted((i, j, k))
        if a == b or b == c:
            raise ParameterError("repeated tensor indices are not part of the model")
        spike = _SQRT2 * self.signal[a] * self.signal[b] * self.signal[c] / self.n
        if not self.has_tensor_noise:
            return spike
        off = self._t3_offsets[a]
        noise = float(self.t3_noise[off + packed_index(b - a - 1, c - a - 1)])
        return spike + noise

    def y_dense(self) -> np.ndarray:
        """Full symmetric observation matrix (zero diagonal); small n only."""
        spike = np.outer(self.signal, self.signal) / math.sqrt(self.n)
        np.fill_diagonal(spike, 0.0)
        if self.has_matrix_noise:
            spike += _unpack_sym(np.asarray(self.y_noise, dtype=np.float64), self.n)
        return spike

    def t3_dense(self) -> np.ndarray:
        """Full symmetric observation tensor; guarded to small n."""
        if self.n > 192:
            raise ParameterError("dense tensor reconstruction is limited to n <= 192")
        t = np.zeros((self.n, self.n, self.n))
        for i in range(self.n - 2):
            for j in range(i + 1, self.n - 1):
                for k in range(j + 1, self.n):
                    v = self.t3_entry(i, j, k)
                    t[i, j, k] = t[i, k, j] = t[j, i, k] = v
                    t[j, k, i] = t[k, i, j] = t[k, j, i] = v
        return t

    @classmethod
    def from_dense_observations(cls, signal, y, t3, delta2=1.0, delta3=1.0, seed=None):
        """Build an instance with prescribed dense observations (test/tool path).

        The stored noise is observation minus spike, so the packed
        representation reproduces ``y`` and ``t3`` exactly.
        """
        signal = np.asarray(signal, dtype=np.float64)
        n = signal.shape[0]
        y = np.asarray(y, dtype=np.float64)
        t3 = np.asarray(t3, dtype=np.float64)
        if y.shape != (n, n) or t3.shape != (n, n, n):
            raise ShapeError("dense observations must be (n,n) and (n,n,n)")
        spike_y = np.outer(signal, signal) / math.sqrt(n)
        y_noise = _pack_sym(y - spike_y)
        total = _t3_offsets(n)[-1]
        t3_noise = np.empty(total, dtype=np.float64)
        off = 0
        for i in range(n - 2):
            s = n - 1 - i
            block = t3[i, i + 1:, i + 1:] - (
                _SQRT2 / n) * signal[i] * np.outer(signal[i + 1:], signal[i + 1:])
            t3_noise[off:off + packed_size(s)] = _pack_sym(block)
            off += packed_size(s)
        return cls(n, delta2, delta3, seed, np.float64, signal, y_noise, t3_noise)


def _t3_offsets(n: int) -> np.ndarray:
    sizes = [packed_size(n - 1 - i) for i in range(n - 2)]
    return np.concatenate(([0], np.cumsum(sizes))).astype(np.int64)


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

def generate_instance(params: ModelParams, seed: int, dtype="float64") -> Instance:
    """Draw signal and observations; bit-exact for fixed (params, seed, dtype).

    Stream order (Philox counter RNG, one child SeedSequence per component):
    signal first, then matrix noise in packed-upper column-major order, then
    tensor noise slice by slice in increasing leading index, each slice in
    packed-upper column-major order.  Positions padding the j == k diagonal
    cells are drawn and zeroed.  ``dtype`` controls observation storage
    (float16/float32 trade precision for memory on large n); draws are made
    in float32 for the reduced-precision modes and in float64 otherwise.
    """
    if isinstance(dtype, str):
        if dtype not in _DTYPES:
            raise ParameterError(f"dtype must be one of {sorted(_DTYPES)}")
        dtype = _DTYPES[dtype]
    dtype = np.dtype(dtype)
    if dtype.name not in _DTYPES:
        raise ParameterError(f"dtype must be one of {sorted(_DTYPES)}")
    n = params.n
    root = np.random.SeedSequence(seed)
    ss_signal, ss_y, ss_t3 = root.spawn(3)

    g = np.random.Generator(np.random.Philox(ss_signal))
    v = g.standard_normal(n)
    signal = v * (math.sqrt(n) / np.linalg.norm(v))

    draw_dtype = np.float64 if dtype == np.float64 else np.float32

    if math.isinf(params.delta2):
        y_noise = np.empty(0, dtype=dtype)
    else:
        gy = np.random.Generator(np.random.Philox(ss_y))
        buf = gy.standard_normal(packed_size(n), dtype=draw_dtype)
        buf *= draw_dtype(math.sqrt(params.delta2))
        buf[_packed_diag_indices(n)] = 0
        y_noise = buf.astype(dtype, copy=False)

    if math.isinf(params.delta3):
        t3_noise = np.empty(0, dtype=dtype)
    else:
        offsets = _t3_offsets(n)
        t3_noise = np.empty(offsets[-1], dtype=dtype)
        children = ss_t3.spawn(n - 2)
        scale = draw_dtype(math.sqrt(params.delta3))
        for i in range(n - 2):
            s = n - 1 - i
            gt = np.random.Generator(np.random.Philox(children[i]))
            buf = gt.standard_normal(packed_size(s), dtype=draw_dtype)
            buf *= scale
            buf[_packed_diag_indices(s)] = 0
            t3_noise[offsets[i]:offsets[i + 1]] = buf

    return Instance(n, params.delta2, params.delta3, seed, dtype, signal, y_noise, t3_noise)


def thermal_rng(seed: int) -> np.random.Generator:
    """Algorithm-side RNG stream, independent of every instance stream."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(RNG_DOMAIN_THERMAL,))))


# ---------------------------------------------------------------------------
# contractions
# ---------------------------------------------------------------------------

def matrix_matvec(inst: Instance, x: np.ndarray) -> np.ndarray:
    """(Y_sym @ x)_i = sum_{j != i} Y_ij x_j, spike applied in closed form."""
    sig = inst.signal
    s1 = sig @ x
    out = (sig * s1 - (sig * sig) * x) / math.sqrt(inst.n)
    if inst.has_matrix_noise:
        out += _spmv(inst.y_noise, np.asarray(x, dtype=np.float64)
                     if inst.y_noise.dtype == np.float64 else x)
    return out


def tensor_pair_contract(inst: Instance, x: np.ndarray) -> np.ndarray:
    """c_i = sum_{j<k, j!=i, k!=i} T_ijk x_j x_k over the symmetrised tensor."""
    n = inst.n
    sig = inst.signal
    u = sig * x
    s1 = u.sum()
    s2 = u @ u
    c = (_SQRT2 / (2.0 * n)) * sig * ((s1 - u) ** 2 - (s2 - u * u))
    if not inst.has_tensor_noise:
        return c
    slices = inst.t3_slices
    if inst.t3_noise.dtype == np.float64:
        xw = np.asarray(x, dtype=np.float64)
    else:
        xw = np.asarray(x, dtype=np.float32)
    for i in range(n - 2):
        xs = xw[i + 1:]
        v = _spmv(slices[i], xs)
        c[i] += 0.5 * float(xs @ v)
        c[i + 1:] += x[i] * v
    return c


def _channel_coefs(inst: Instance, params: ModelParams):
    kern = params.kernel
    coef2 = kern.a2 / math.sqrt(inst.n)
    coef3 = _SQRT2 * kern.a3 / inst.n
    return coef2, coef3


def _check_config(inst: Instance, x: np.ndarray, norm_tol=1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (inst.n,):
        raise ShapeError(f"configuration has shape {x.shape}, expected ({inst.n},)")
    if abs(x @ x / inst.n - 1.0) > norm_tol:
        raise ParameterError("configuration violates the spherical constraint ||x||^2 = n")
    return x


def force_and_energy(inst: Instance, x: np.ndarray, params: ModelParams):
    """Return (-grad H, H) from a single pass over the observations."""
    coef2, coef3 = _channel_coefs(inst, params)
    force = np.zeros(inst.n)
    energy = 0.0
    if coef2 != 0.0:
        my = matrix_matvec(inst, x)
        force += coef2 * my
        energy -= coef2 * 0.5 * float(x @ my)
    if coef3 != 0.0:
        ct = tensor_pair_contract(inst, x)
        force += coef3 * ct
        energy -= coef3 * float(x @ ct) / 3.0
    return force, energy


def hamiltonian(inst: Instance, x: np.ndarray, params: ModelParams) -> float:
    """H(x); requires x on the sphere."""
    x = _check_config(inst, x)
    return force_and_energy(inst, x, params)[1]


def gradient(inst: Instance, x: np.ndarray, params: ModelParams) -> np.ndarray:
    """dH/dx_i; requires x on the sphere."""
    x = _check_config(inst, x)
    return -force_and_energy(inst, x, params)[0]


def overlap(x: np.ndarray, inst: Instance) -> float:
    """Normalised alignment with the ground truth, in [-1, 1] up to rounding."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (inst.n,):
        raise ShapeError(f"configuration has shape {x.shape}, expected ({inst.n},)")
    return float(x @ inst.signal) / inst.n


def project_to_sphere(x: np.ndarray) -> np.ndarray:
    """Rescale to ||x||^2 = n exactly (up to rounding)."""
    x = np.asarray(x, dtype=np.float64)
    return x * (math.sqrt(x.shape[0]) / np.linalg.norm(x))


def random_sphere_point(n: int, rng: np.random.Generator) -> np.ndarray:
    return project_to_sphere(rng.standard_normal(n))


def planted_sphere_point(inst: Instance, m0: float, rng: np.random.Generator) -> np.ndarray:
    """Point on the sphere with exact overlap m0 against the instance signal."""
    if not -1.0 < m0 < 1.0:
        raise ParameterError("planted overlap must lie in (-1, 1)")
    n = inst.n
    v = rng.standard_normal(n)
    v -= (v @ inst.signal / n) * inst.signal
    v *= math.sqrt(n) / np.linalg.norm(v)
    return m0 * inst.signal + math.sqrt(1.0 - m0 * m0) * v


# ---------------------------------------------------------------------------
# export / import (format documented in FORMAT.md, versioned)
# ---------------------------------------------------------------------------

INSTANCE_FORMAT_VERSION = 1


def save_instance(inst: Instance, path) -> None:
    np.savez(
        path,
        format_version=np.int64(INSTANCE_FORMAT_VERSION),
        n=np.int64(inst.n),
        delta2=np.float64(inst.delta2),
        delta3=np.float64(inst.delta3),
        seed=np.int64(-1 if inst.seed is None else inst.seed),
        dtype=np.bytes_(inst.dtype.name.encode()),
        signal=inst.signal,
        y_noise=inst.y_noise,
        t3_noise=inst.t3_noise,
    )


def load_instance(path) -> Instance:
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != INSTANCE_FORMAT_VERSION:
            raise ParameterError(f"unsupported instance format version {version}")
        seed = int(data["seed"])
        return Instance(
            int(data["n"]),
            float(data["delta2"]),
            float(data["delta3"]),
            None if seed == -1 else seed,
            np.dtype(bytes(data["dtype"]).decode()),
            data["signal"],
            data["y_noise"],
            data["t3_noise"],
        )
