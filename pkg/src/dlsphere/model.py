"""Synthetic dictionary-learning instances.

Random streams come from numpy's Philox4x64 counter-based generator keyed by
a ``SeedSequence(seed, spawn_key=substream)``. Given the same ``(seed,
substream)`` the stream is identical on every platform numpy supports, which
is what makes landscape and recovery experiments re-runnable bit for bit.
"""

from dataclasses import dataclass, field

import numpy as np

from dlsphere.errors import ContractViolation, ParameterError

_U64 = 2**64


def _check_seed(seed):
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise ParameterError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed < _U64:
        raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def make_rng(seed, *substream):
    """Philox generator for ``seed`` and an optional integer substream path."""
    seed = _check_seed(seed)
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in substream))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed, *substream):
    """Derive a 64-bit seed for an independent sub-experiment."""
    seed = _check_seed(seed)
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in substream))
    return int(ss.generate_state(1, np.uint64)[0])


def _check_theta(theta):
    theta = float(theta)
    if not 0.0 <= theta <= 1.0 or np.isnan(theta):
        raise ParameterError(f"theta must lie in [0, 1], got {theta}")
    return theta


def _check_dims(n, p):
    if int(n) != n or int(p) != p or n < 1 or p < 1:
        raise ParameterError(f"need integers n >= 1 and p >= 1, got n={n}, p={p}")
    return int(n), int(p)


# Off-diagonal mixing entries are N(0, sqrt(2)/20) with the second argument
# read as a variance, so the standard deviation is its square root.
DEFAULT_SIGMA_OFFDIAG = float(np.sqrt(np.sqrt(2.0) / 20.0))

VARIANTS = ("bg", "correlated_gaussian", "correlated_uniform", "independent_uniform")


@dataclass(frozen=True)
class CoefficientModel:
    """Distribution of the coefficient matrix.

    ``sigma_offdiag`` is the standard deviation of the off-diagonal entries
    of the symmetric mixing matrix used by the correlated variants; it is
    ignored by the independent ones.
    """

    variant: str
    theta: float
    sigma_offdiag: float = 0.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown coefficient model {self.variant!r}")
        _check_theta(self.theta)
        if not self.sigma_offdiag >= 0.0:
            raise ParameterError("sigma_offdiag must be >= 0")

    @classmethod
    def bg(cls, theta):
        return cls("bg", theta)

    @classmethod
    def correlated_gaussian(cls, theta, sigma_offdiag=DEFAULT_SIGMA_OFFDIAG):
        return cls("correlated_gaussian", theta, sigma_offdiag)

    @classmethod
    def correlated_uniform(cls, theta, sigma_offdiag=DEFAULT_SIGMA_OFFDIAG):
        return cls("correlated_uniform", theta, sigma_offdiag)

    @classmethod
    def independent_uniform(cls, theta):
        return cls("independent_uniform", theta)

    @property
    def correlated(self):
        return self.variant.startswith("correlated")

    def to_dict(self):
        return {"variant": self.variant, "theta": self.theta, "sigma_offdiag": self.sigma_offdiag}

    @classmethod
    def from_dict(cls, d):
        return cls(d["variant"], d["theta"], d.get("sigma_offdiag", 0.0))


def sample_bg(n, p, theta, seed):
    """Bernoulli-Gaussian matrix: entries ``Ber(theta) * N(0, 1)``, i.i.d."""
    n, p = _check_dims(n, p)
    theta = _check_theta(theta)
    rng = make_rng(seed)
    omega = rng.random((n, p)) < theta
    v = rng.standard_normal((n, p))
    return omega * v


def sample_independent_uniform(n, p, theta, seed):
    n, p = _check_dims(n, p)
    theta = _check_theta(theta)
    rng = make_rng(seed)
    omega = rng.random((n, p)) < theta
    w = rng.uniform(-0.5, 0.5, size=(n, p))
    return omega * w


def mixing_matrix(n, sigma_offdiag, seed):
    """Symmetric matrix with unit diagonal and i.i.d. N(0, sigma^2) off-diagonal."""
    sig = np.eye(n)
    if sigma_offdiag > 0 and n > 1:
        rng = make_rng(seed, 1)
        iu = np.triu_indices(n, k=1)
        sig[iu] = sigma_offdiag * rng.standard_normal(len(iu[0]))
        sig[(iu[1], iu[0])] = sig[iu]
    if not np.array_equal(sig, sig.T):
        raise ContractViolation("internal invariant violated: mixing matrix is not symmetric")
    return sig


def sample_correlated(n, p, model, seed):
    """Columns mixed by a symmetric Sigma, then masked: ``X = Omega * (Sigma @ V)``.

    ``V`` is standard normal (``correlated_gaussian``, so columns are
    ``N(0, Sigma^2)``) or ``Uniform[-0.5, 0.5]`` (``correlated_uniform``).
    With ``sigma_offdiag == 0`` the gaussian variant reproduces
    :func:`sample_bg` bit for bit. Independent variants are dispatched to
    their own samplers.
    """
    n, p = _check_dims(n, p)
    if model.variant == "bg":
        return sample_bg(n, p, model.theta, seed)
    if model.variant == "independent_uniform":
        return sample_independent_uniform(n, p, model.theta, seed)
    rng = make_rng(seed)
    omega = rng.random((n, p)) < model.theta
    if model.variant == "correlated_gaussian":
        base = rng.standard_normal((n, p))
    else:
        base = rng.uniform(-0.5, 0.5, size=(n, p))
    if model.sigma_offdiag > 0:
        base = mixing_matrix(n, model.sigma_offdiag, seed) @ base
    return omega * base


def sample_coefficients(n, p, model, seed):
    return sample_correlated(n, p, model, seed)


def haar_orthogonal(n, rng):
    """Haar-distributed orthogonal matrix: QR of a Gaussian, sign-corrected."""
    g = rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


DICTIONARY_KINDS = ("identity", "orthogonal", "conditioned")


def sample_dictionary(n, kind, seed, kappa=None):
    """Square dictionary of the given kind.

    ``conditioned`` returns ``U diag(s) V^T`` with Haar ``U, V`` and singular
    values geometrically spaced from ``kappa`` down to 1, so the condition
    number is exactly ``kappa`` up to rounding.
    """
    n, _ = _check_dims(n, 1)
    if kind == "identity":
        return np.eye(n)
    rng = make_rng(seed)
    if kind == "orthogonal":
        return haar_orthogonal(n, rng)
    if kind == "conditioned":
        if kappa is None or not kappa >= 1.0:
            raise ParameterError(f"conditioned dictionary needs kappa >= 1, got {kappa}")
        u = haar_orthogonal(n, rng)
        v = haar_orthogonal(n, rng)
        s = np.geomspace(float(kappa), 1.0, n)
        return (u * s) @ v.T
    raise ParameterError(f"unknown dictionary kind {kind!r}")


@dataclass
class Instance:
    """Observation ``y = a0 @ x0`` together with its generating factors."""

    a0: np.ndarray
    x0: np.ndarray
    y: np.ndarray
    theta: float
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.a0.shape[0]

    @property
    def p(self):
        return self.x0.shape[1]

    def validate(self):
        """Raise ``ContractViolation`` unless all instance invariants hold."""
        a0, x0, y = self.a0, self.x0, self.y
        if a0.shape[0] != a0.shape[1] or a0.shape[1] != x0.shape[0] or y.shape != (a0.shape[0], x0.shape[1]):
            raise ContractViolation("inconsistent instance shapes")
        bound = 4 * np.finfo(float).eps * a0.shape[1] * (np.abs(a0) @ np.abs(x0))
        if np.any(np.abs(y - a0 @ x0) > bound):
            raise ContractViolation("y differs from a0 @ x0")
        s = np.linalg.svd(a0, compute_uv=False)
        if not s[-1] > np.finfo(float).eps * s[0]:
            raise ContractViolation("a0 is singular")
        frac = np.count_nonzero(x0) / x0.size
        sd = np.sqrt(self.theta * (1 - self.theta) / x0.size)
        if abs(frac - self.theta) > 5 * sd + 1e-15:
            raise ContractViolation(
                f"nonzero fraction {frac:.5f} is more than 5 sd from theta={self.theta}"
            )
        return self

    def metadata(self):
        out = {"n": self.n, "p": self.p, "theta": self.theta, "seed": self.seed}
        out.update(self.meta)
        return out


def synthesize(a0, x0, theta=None, seed=0, meta=None):
    """Build and validate an ``Instance`` from given factors.

    When ``theta`` is omitted the empirical nonzero fraction of ``x0`` is
    recorded. Inputs are copied, never modified.
    """
    a0 = np.array(a0, dtype=float, copy=True)
    x0 = np.array(x0, dtype=float, copy=True)
    if a0.ndim != 2 or x0.ndim != 2 or a0.shape[1] != x0.shape[0]:
        raise ParameterError(f"dimension mismatch: a0 {a0.shape}, x0 {x0.shape}")
    if a0.shape[0] != a0.shape[1]:
        raise ParameterError("a0 must be square")
    if theta is None:
        theta = np.count_nonzero(x0) / x0.size
    inst = Instance(a0, x0, a0 @ x0, _check_theta(theta), _check_seed(seed), dict(meta or {}))
    return inst.validate()


def make_instance(n, p, theta, seed, dictionary="orthogonal", kappa=None, model=None):
    """Generate dictionary and coefficients from independent child streams of ``seed``."""
    model = model or CoefficientModel.bg(theta)
    if model.theta != theta:
        raise ParameterError("model.theta disagrees with theta")
    a0 = sample_dictionary(n, dictionary, child_seed(seed, 0), kappa=kappa)
    x0 = sample_coefficients(n, p, model, child_seed(seed, 1))
    meta = {"dictionary": dictionary, "kappa": kappa, "coefficient_model": model.to_dict()}
    return synthesize(a0, x0, theta=theta, seed=seed, meta=meta)
