"""Model coefficients and parameter-file I/O."""

import dataclasses
import json
from dataclasses import dataclass
from importlib import resources

__all__ = ["ModelParams", "paper_params", "load_params"]

# JSON field names; ``lambda`` is a Python keyword so the attribute is ``lam``.
_JSON_FIELDS = ("eta", "alpha", "delta", "beta", "gamma", "kappa", "lambda", "nu")


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the Burgers-Huxley equation with exponential memory.

    Parameters
    ----------
    eta : float
        Diffusion coefficient.
    alpha : float
        Advection coefficient.
    delta : int
        Nonlinearity degree.
    beta, gamma : float
        Reaction strength and threshold.
    kappa, lam : float
        Memory kernel scale and decay rate, kernel ``kappa * exp(-lam * t)``.
    nu : float
        Target decay rate (shift) used for feedback synthesis.

    Construction only rejects values that break the discretization
    (``eta, lam > 0``, nonnegative coefficients, ``0 <= gamma < 1``), so that
    degenerate limits such as ``kappa = 0`` or ``beta = 0`` stay usable.
    :meth:`check_physical` enforces the strict model ranges.
    """

    eta: float = 0.2
    alpha: float = 1.0
    delta: int = 1
    beta: float = 1.5
    gamma: float = 0.5
    kappa: float = 1.5
    lam: float = 3.0
    nu: float = 0.0

    def __post_init__(self):
        if isinstance(self.delta, bool) or int(self.delta) != self.delta or self.delta < 1:
            raise ValueError(f"delta must be a positive integer, got {self.delta!r}")
        object.__setattr__(self, "delta", int(self.delta))
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        for name in ("alpha", "beta", "kappa", "nu"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if not 0 <= self.gamma < 1:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")

    @property
    def nu0(self):
        """Accumulation point ``lam + kappa/eta`` of the slow eigenvalue branch."""
        return self.lam + self.kappa / self.eta

    @property
    def beta_gamma(self):
        return self.beta * self.gamma

    @property
    def effective_diffusion(self):
        """Diffusion of the stationary problem, ``eta + kappa/lam``."""
        return self.eta + self.kappa / self.lam

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def check_physical(self):
        """Raise ``ValueError`` unless every coefficient is in its strict model range."""
        for name in ("eta", "alpha", "beta", "kappa", "lam"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)}")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        return self

    def check_shift(self, steady=False):
        """Check the admissible decay rate: ``nu < nu0`` around zero, ``nu < lam`` otherwise."""
        bound = self.lam if steady else self.nu0
        if not self.nu < bound:
            which = "lambda" if steady else "nu0 = lambda + kappa/eta"
            raise ValueError(f"nu = {self.nu} must be below {which} = {bound}")
        return self

    def to_dict(self):
        return {
            "eta": self.eta, "alpha": self.alpha, "delta": self.delta, "beta": self.beta,
            "gamma": self.gamma, "kappa": self.kappa, "lambda": self.lam, "nu": self.nu,
        }

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - set(_JSON_FIELDS)
        if unknown:
            raise ValueError(f"unknown parameter fields: {sorted(unknown)}")
        kwargs = {("lam" if k == "lambda" else k): v for k, v in data.items()}
        return cls(**kwargs)


def paper_params(**changes):
    """The coefficient set of the reference experiments (``nu`` defaults to 0)."""
    data = json.loads(resources.files("memstab").joinpath("data/paper.json").read_text())
    return ModelParams.from_dict(data).replace(**changes)


def load_params(path):
    with open(path) as fh:
        return ModelParams.from_dict(json.load(fh))
