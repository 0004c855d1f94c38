"""Twenty-four single-objective problem classes with seeded instances.

The classes follow the landscape archetypes of the noiseless BBOB suite
(same numbering and names) but use simplified closed forms: every base
function satisfies ``base(0) == 0`` and the oscillation/asymmetry warpings
of BBOB are left out.  An instance shifts the optimum to ``x_opt``, adds an
objective offset ``f_opt`` and, for most classes, applies an orthogonal
rotation, so that ``f(x) = base(R (x - x_opt)) + f_opt``.

Instance seeding
----------------
``(class_id, instance_id, dim)`` is packed into one 64-bit word::

    packed = (class_id << 56) | (dim << 32) | instance_id

and the instance RNG is ``SplitRng(mix64(packed + GAMMA))`` (see
:mod:`transopt.rng`).  Draw order is fixed: ``x_opt``, ``f_opt``, rotation,
then Gallagher peaks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, InputError, ShapeError
from .rng import GAMMA, MASK64, SplitRng, mix64

N_CLASSES = 24

SCHWEFEL_SHIFT = 420.9687462275036
SCHWEFEL_CONST = 418.9828872724339


class ClassInfo(NamedTuple):
    id: int
    name: str
    uses_rotation: bool


_NAMES = [
    "Sphere",
    "Ellipsoid",
    "Rastrigin",
    "Bueche-Rastrigin",
    "Linear Slope",
    "Attractive Sector",
    "Step Ellipsoid",
    "Rosenbrock",
    "Rosenbrock (rotated)",
    "Ellipsoid (rotated)",
    "Discus",
    "Bent Cigar",
    "Sharp Ridge",
    "Different Powers",
    "Rastrigin (rotated)",
    "Weierstrass",
    "Schaffers F7",
    "Schaffers F7 (ill-conditioned)",
    "Griewank-Rosenbrock",
    "Schwefel",
    "Gallagher 101 peaks",
    "Gallagher 21 peaks",
    "Katsuura",
    "Lunacek bi-Rastrigin",
]

UNROTATED = frozenset({1, 2, 3, 4, 5, 7, 8, 20})

_SUITE = tuple(ClassInfo(i + 1, name, (i + 1) not in UNROTATED) for i, name in enumerate(_NAMES))


def suite_table() -> list[ClassInfo]:
    return list(_SUITE)


def _check_class_id(value) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ConfigError(f"class_id must be an integer, got {value!r}")
    if not 1 <= int(value) <= N_CLASSES:
        raise ConfigError(f"class_id must be in 1..{N_CLASSES}, got {value}")
    return int(value)


@dataclass(frozen=True)
class InstanceSpec:
    class_id: int
    instance_id: int
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "class_id", _check_class_id(self.class_id))
        if isinstance(self.instance_id, bool) or not isinstance(self.instance_id, (int, np.integer)):
            raise ConfigError(f"instance_id must be an integer, got {self.instance_id!r}")
        if not 1 <= self.instance_id < 2**32:
            raise ConfigError(f"instance_id must be in 1..2**32-1, got {self.instance_id}")
        if isinstance(self.dim, bool) or not isinstance(self.dim, (int, np.integer)):
            raise ConfigError(f"dim must be an integer, got {self.dim!r}")
        if not 2 <= self.dim < 2**24:
            raise ConfigError(f"dim must be in 2..2**24-1, got {self.dim}")
        object.__setattr__(self, "instance_id", int(self.instance_id))
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def seed(self) -> int:
        packed = (self.class_id << 56) | (self.dim << 32) | self.instance_id
        return mix64((packed + GAMMA) & MASK64)


@dataclass(frozen=True)
class Peak:
    weight: float
    center: np.ndarray
    conditioning: np.ndarray


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A concrete transformed problem.

    Construct through :func:`make_instance`; building one directly is
    allowed (tests use it to pin ``x_opt``, ``f_opt`` and ``rotation``).
    """

    spec: InstanceSpec
    x_opt: np.ndarray
    f_opt: float
    rotation: np.ndarray
    peaks: tuple[Peak, ...] | None = None

    @property
    def class_id(self) -> int:
        return self.spec.class_id

    @property
    def dim(self) -> int:
        return self.spec.dim

    def __call__(self, x) -> float:
        return evaluate(self, x)


def make_instance(spec: InstanceSpec) -> ProblemInstance:
    if not isinstance(spec, InstanceSpec):
        spec = InstanceSpec(*spec)
    d, cid = spec.dim, spec.class_id
    rng = SplitRng(spec.seed)

    if cid == 5:
        x_opt = np.where(rng.uniform(d) < 0.5, -5.0, 5.0)
    else:
        x_opt = rng.uniform(d, -4.0, 4.0)
    f_opt = round(rng.uniform(None, -100.0, 100.0), 2)

    if cid in UNROTATED:
        rotation = np.eye(d)
    else:
        q, r = np.linalg.qr(rng.normal((d, d)))
        # sign fix makes the factorisation unique: diag(r) > 0
        rotation = q * np.where(np.diag(r) < 0, -1.0, 1.0)

    peaks = None
    if cid in (21, 22):
        n_peaks = 101 if cid == 21 else 21
        max_cond = 3.0 if cid == 21 else 6.0
        peaks = []
        for k in range(1, n_peaks + 1):
            if k == 1:
                weight, center = 10.0, np.zeros(d)
            else:
                weight = 1.1 + 8.0 * (k - 2) / (n_peaks - 2)
                center = rng.uniform(d, -4.9, 4.9)
            # per-peak condition number alpha spread over the axes as
            # alpha^(p_i / (d - 1)) for a random axis order p, scaled by alpha^(-1/4)
            alpha = 10.0 ** rng.uniform(None, 0.0, max_cond)
            spread = rng.permutation(d) / max(d - 1, 1)
            conditioning = alpha ** (spread - 0.25)
            peaks.append(Peak(weight, center, conditioning))
        peaks = tuple(peaks)

    return ProblemInstance(spec, x_opt, f_opt, rotation, peaks)


# base landscapes: z has shape [n, d], result shape [n]


def _ratio(d: int) -> np.ndarray:
    return np.arange(d) / (d - 1)


def _sphere(z):
    return np.sum(z * z, axis=1)


def _ellipsoid(z):
    c = 10.0 ** (6.0 * _ratio(z.shape[1]))
    return np.sum(c * z * z, axis=1)


def _rastrigin(z):
    d = z.shape[1]
    return 10.0 * (d - np.sum(np.cos(2.0 * np.pi * z), axis=1)) + np.sum(z * z, axis=1)


def _bueche_rastrigin(z):
    d = z.shape[1]
    s = 10.0 ** (0.5 * _ratio(d))
    odd = (np.arange(d) % 2 == 0)  # 1-based odd index
    s = np.where(odd & (z > 0), 10.0 * s, s)
    return _rastrigin(s * z)


def _attractive_sector(z, x_opt):
    w = np.where(z * x_opt > 0, 100.0, 1.0)
    return np.sum((w * z) ** 2, axis=1)


def _step_ellipsoid(z):
    c = 10.0 ** (6.0 * _ratio(z.shape[1]))
    return np.sum(c * np.floor(z + 0.5) ** 2, axis=1) + 1e-4 * np.sum(z * z, axis=1)


def _rosenbrock(z):
    u = z + 1.0
    return np.sum(100.0 * (u[:, :-1] ** 2 - u[:, 1:]) ** 2 + (u[:, :-1] - 1.0) ** 2, axis=1)


def _discus(z):
    return 1e6 * z[:, 0] ** 2 + np.sum(z[:, 1:] ** 2, axis=1)


def _bent_cigar(z):
    return z[:, 0] ** 2 + 1e6 * np.sum(z[:, 1:] ** 2, axis=1)


def _sharp_ridge(z):
    return z[:, 0] ** 2 + 100.0 * np.sqrt(np.sum(z[:, 1:] ** 2, axis=1))


def _different_powers(z):
    p = 2.0 + 4.0 * _ratio(z.shape[1])
    return np.sqrt(np.sum(np.abs(z) ** p, axis=1))


_WEIER_K = np.arange(12)
_WEIER_A = 0.5**_WEIER_K
_WEIER_B = 3.0**_WEIER_K
_WEIER_W0 = float(np.sum(_WEIER_A * np.cos(np.pi * _WEIER_B)))


def _weierstrass(z):
    v = 0.01 * z
    terms = _WEIER_A * np.cos(2.0 * np.pi * _WEIER_B * (v[..., None] + 0.5))
    return np.sum(terms, axis=(1, 2)) - z.shape[1] * _WEIER_W0


def _schaffers(z):
    d = z.shape[1]
    u = np.sqrt(z[:, :-1] ** 2 + z[:, 1:] ** 2)
    inner = np.sqrt(u) * (1.0 + np.sin(50.0 * u**0.2) ** 2)
    return (np.sum(inner, axis=1) / (d - 1)) ** 2


def _schaffers_ill(z):
    return _schaffers(z * 10.0 ** (3.0 * _ratio(z.shape[1])))


def _griewank_rosenbrock(z):
    d = z.shape[1]
    u = z + 1.0
    r = 100.0 * (u[:, :-1] ** 2 - u[:, 1:]) ** 2 + (u[:, :-1] - 1.0) ** 2
    return 10.0 / (d - 1) * np.sum(r / 4000.0 - np.cos(r), axis=1) + 10.0


def _schwefel(z):
    d = z.shape[1]
    v = 100.0 * z + SCHWEFEL_SHIFT
    return SCHWEFEL_CONST * d - np.sum(v * np.sin(np.sqrt(np.abs(v))), axis=1)


def _gallagher(z, peaks):
    d = z.shape[1]
    best = np.full(z.shape[0], -np.inf)
    for p in peaks:
        diff = z - p.center
        q = np.sum(p.conditioning * diff * diff, axis=1)
        best = np.maximum(best, p.weight * np.exp(-q / (2.0 * d)))
    return (10.0 - best) ** 2


_KATSUURA_POW = 2.0 ** np.arange(1, 33)


def _katsuura(z):
    d = z.shape[1]
    t = _KATSUURA_POW * z[..., None]
    inner = np.sum(np.abs(t - np.round(t)) / _KATSUURA_POW, axis=2)
    i = np.arange(1, d + 1)
    prod = np.prod((1.0 + i * inner) ** (10.0 / d**1.2), axis=1)
    return 10.0 / d**2 * (prod - 1.0)


def _lunacek(z):
    d = z.shape[1]
    mu0 = 2.5
    s = 1.0 - 1.0 / (2.0 * math.sqrt(d + 20) - 8.2)
    mu1 = -math.sqrt((mu0**2 - 1.0) / s)
    u = z + mu0
    a = np.sum((u - mu0) ** 2, axis=1)
    b = d + s * np.sum((u - mu1) ** 2, axis=1)
    return np.minimum(a, b) + 10.0 * (d - np.sum(np.cos(2.0 * np.pi * (u - mu0)), axis=1))


_BASE = {
    1: _sphere,
    2: _ellipsoid,
    3: _rastrigin,
    4: _bueche_rastrigin,
    7: _step_ellipsoid,
    8: _rosenbrock,
    9: _rosenbrock,
    10: _ellipsoid,
    11: _discus,
    12: _bent_cigar,
    13: _sharp_ridge,
    14: _different_powers,
    15: _rastrigin,
    16: _weierstrass,
    17: _schaffers,
    18: _schaffers_ill,
    19: _griewank_rosenbrock,
    20: _schwefel,
    23: _katsuura,
    24: _lunacek,
}


def _linear_slope(x, x_opt):
    d = x.shape[1]
    sign = np.sign(x_opt)
    s = sign * 10.0 ** _ratio(d)
    x_hat = np.where(sign * x < 5.0, x, x_opt)
    return np.sum(5.0 * np.abs(s) - s * x_hat, axis=1)


def evaluate_many(inst: ProblemInstance, x) -> np.ndarray:
    """Evaluate the instance on every row of an ``[n, dim]`` array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != inst.dim:
        raise ShapeError(f"expected points of shape [n, {inst.dim}], got {list(x.shape)}")
    if not np.all(np.isfinite(x)):
        raise InputError("evaluation points must be finite")
    cid = inst.class_id
    if cid == 5:
        base = _linear_slope(x, inst.x_opt)
    else:
        z = (x - inst.x_opt) @ inst.rotation.T
        if cid == 6:
            base = _attractive_sector(z, inst.x_opt)
        elif cid in (21, 22):
            base = _gallagher(z, inst.peaks)
        else:
            base = _BASE[cid](z)
    return base + inst.f_opt


def evaluate(inst: ProblemInstance, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (inst.dim,):
        raise ShapeError(f"expected a vector of length {inst.dim}, got shape {list(x.shape)}")
    return float(evaluate_many(inst, x[None, :])[0])
