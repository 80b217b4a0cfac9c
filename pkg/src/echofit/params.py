"""Parameter containers for the catalogued models.

Each dataclass carries its values in the units its field names state
(kHz for linewidths and rates, microseconds or milliseconds or seconds
for times as suffixed).  Validation happens at construction; evaluation
code may therefore assume the invariants hold.
"""

from dataclasses import dataclass, asdict, fields

# Fit bounds for the box-constrained parameters.
X_BOUNDS = (0.3, 4.0)
EXPONENT_BOUNDS = (0.5, 3.0)
BETA_BOUNDS = (0.0, 2.0)


class ParamError(ValueError):
    """Raised when a parameter set violates its invariants."""


def _require(cond, msg):
    if not cond:
        raise ParamError(msg)


@dataclass(frozen=True)
class MimsParams:
    """Stretched-exponential echo decay: I(t12) = i0 * exp(-2*(2*t12/tm)^x).

    Attributes
    ----------
    i0 : float
        Zero-delay intensity scale, dimensionless, > 0.
    tm_us : float
        Phase-memory time in microseconds, > 0.
    x : float
        Stretch exponent, within the fit bounds [0.3, 4].
    """

    i0: float
    tm_us: float
    x: float

    def __post_init__(self):
        _require(self.i0 > 0, "i0 must be > 0")
        _require(self.tm_us > 0, "tm_us must be > 0")
        _require(X_BOUNDS[0] <= self.x <= X_BOUNDS[1],
                 f"x must lie in [{X_BOUNDS[0]}, {X_BOUNDS[1]}]")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class FieldModelParams:
    """Linewidth versus magnetic field: a decaying and a rising exponential
    term on top of a constant offset.

    All linewidth amplitudes are in kHz; g1 and g2 are dimensionless
    effective g-factors.  g1 > g2 is the canonical labeling of the two
    terms but is checked only at fit output, not at construction.
    """

    gamma0_khz: float
    alpha1_khz: float
    alpha2_khz: float
    g1: float
    g2: float

    def __post_init__(self):
        for f in fields(self):
            _require(getattr(self, f.name) >= 0, f"{f.name} must be >= 0")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class TempModelParams:
    """Linewidth versus temperature: constant floor plus amp * T^n."""

    floor_khz: float
    amp_khz: float
    exponent_n: float

    def __post_init__(self):
        _require(self.floor_khz >= 0, "floor_khz must be >= 0")
        _require(self.amp_khz >= 0, "amp_khz must be >= 0")
        _require(EXPONENT_BOUNDS[0] <= self.exponent_n <= EXPONENT_BOUNDS[1],
                 f"exponent_n must lie in [{EXPONENT_BOUNDS[0]}, {EXPONENT_BOUNDS[1]}]")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ThreeLevelParams:
    """Population factor parameters for the stimulated echo with a
    shelving sublevel.

    Attributes
    ----------
    i0 : float
        Intensity scale, > 0.
    t1_ms : float
        Excited-state lifetime in milliseconds, > 0.
    tz_s : float
        Shelving-sublevel lifetime in seconds, > 0.
    beta : float
        Branching ratio into the sublevel; beta/2 is a population
        fraction, so beta is bounded to [0, 2].
    """

    i0: float
    t1_ms: float
    tz_s: float
    beta: float

    def __post_init__(self):
        _require(self.i0 > 0, "i0 must be > 0")
        _require(self.t1_ms > 0, "t1_ms must be > 0")
        _require(self.tz_s > 0, "tz_s must be > 0")
        _require(BETA_BOUNDS[0] <= self.beta <= BETA_BOUNDS[1],
                 f"beta must lie in [{BETA_BOUNDS[0]}, {BETA_BOUNDS[1]}]")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class SpectralDiffusionParams:
    """Effective linewidth versus the two echo delays.

    gamma0_khz is the base linewidth, gamma_sd_khz and r_sd_khz the
    amplitude and rate of the flip-flop diffusion term, gamma_tls_khz the
    per-decade slow-relaxation slope.  t0_us is the reference timescale of
    the logarithmic term; it is fixed per dataset (the smallest waiting
    time) and is never a fit parameter.
    """

    gamma0_khz: float
    gamma_sd_khz: float
    r_sd_khz: float
    gamma_tls_khz: float
    t0_us: float

    def __post_init__(self):
        _require(self.gamma0_khz >= 0, "gamma0_khz must be >= 0")
        _require(self.gamma_sd_khz >= 0, "gamma_sd_khz must be >= 0")
        _require(self.r_sd_khz >= 0, "r_sd_khz must be >= 0")
        _require(self.gamma_tls_khz >= 0, "gamma_tls_khz must be >= 0")
        _require(self.t0_us > 0, "t0_us must be > 0")

    def to_dict(self):
        return asdict(self)
