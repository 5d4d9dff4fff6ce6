"""Physical constants, unit conversions, and machine parameter types.

All internal physics uses natural units with hbar = k_B = 1 and angular
frequency in rad/ns as the base dimension.  Laboratory units (GHz of
ordinary frequency, mK, pA, uV, aW) appear only at I/O boundaries through
the conversion helpers defined here, so none of the dynamical equations
carry unit factors.

Conversion summary (2018 CODATA exact constants):

* frequency: ``omega = TWO_PI_GHZ * f_GHz``  (rad/ns)
* temperature: ``T = MILLIKELVIN * T_mK``  (rad/ns, via k_B T / hbar)
* charge current: an expectation of 1 in units of e * rad/ns equals
  ``CURRENT_PA`` picoamperes
* energy flow: a rate of 1 (rad/ns)^2 equals ``POWER_AW`` attowatts
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

from .errors import ConfigError

HBAR_JS = 1.054571817e-34
KB_J_PER_K = 1.380649e-23
E_CHARGE_C = 1.602176634e-19

#: rad/ns per GHz of ordinary frequency
TWO_PI_GHZ = 2.0 * math.pi
#: rad/ns per millikelvin
MILLIKELVIN = KB_J_PER_K * 1e-3 / (HBAR_JS * 1e9)
#: pA per unit current expectation (e * rad/ns)
CURRENT_PA = E_CHARGE_C * 1e21
#: aW per unit energy flow ((rad/ns)^2, i.e. hbar * omega * rate)
POWER_AW = HBAR_JS * 1e36


def ghz_to_angular(f_ghz: float) -> float:
    """Ordinary frequency in GHz -> angular frequency in rad/ns."""
    return TWO_PI_GHZ * f_ghz


def angular_to_ghz(omega: float) -> float:
    return omega / TWO_PI_GHZ


def mk_to_natural(t_mk: float) -> float:
    """Temperature in mK -> natural units (rad/ns)."""
    return MILLIKELVIN * t_mk


def natural_to_mk(t_nat: float) -> float:
    return t_nat / MILLIKELVIN


def thermal_occupation(omega: float, temperature: float) -> float:
    """Bose-Einstein occupation of a mode at ``omega`` and ``temperature``.

    Both arguments are in natural units.  ``temperature = 0`` is accepted
    and returns 0; a non-positive ``omega`` is a domain error.
    """
    if omega <= 0.0:
        raise ValueError(f"mode frequency must be positive, got {omega}")
    if temperature < 0.0:
        raise ValueError(f"temperature must be non-negative, got {temperature}")
    if temperature == 0.0:
        return 0.0
    x = omega / temperature
    if x > 700.0:  # exp would overflow; occupation is indistinguishable from 0
        return 0.0
    return 1.0 / math.expm1(x)


@dataclass(frozen=True)
class MachineParams:
    """Machine parameters in natural units (rad/ns, dimensionless lambdas).

    ``omega_c``/``omega_h`` are the mode frequencies, ``kappa_c``/``kappa_h``
    the energy damping rates, ``e_j`` the junction coupling energy expressed
    as an angular frequency, and ``lambda_c``/``lambda_h`` the zero-point
    phase parameters of the two modes.
    """

    omega_c: float
    omega_h: float
    kappa_c: float
    kappa_h: float
    e_j: float
    lambda_c: float
    lambda_h: float

    def __post_init__(self):
        for name in ("omega_c", "omega_h", "kappa_c", "kappa_h"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        # e_j = 0 is the well-defined decoupled-oscillator limit
        if self.e_j < 0.0:
            raise ValueError("e_j must be non-negative")
        if self.omega_h <= self.omega_c:
            raise ValueError("omega_h must exceed omega_c")
        for name in ("lambda_c", "lambda_h"):
            lam = getattr(self, name)
            if not 0.0 < lam < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {lam}")

    @classmethod
    def from_ghz(cls, omega_c_ghz, omega_h_ghz, kappa_c_ghz, kappa_h_ghz,
                 ej_ghz, lambda_c, lambda_h) -> "MachineParams":
        return cls(
            omega_c=ghz_to_angular(omega_c_ghz),
            omega_h=ghz_to_angular(omega_h_ghz),
            kappa_c=ghz_to_angular(kappa_c_ghz),
            kappa_h=ghz_to_angular(kappa_h_ghz),
            e_j=ghz_to_angular(ej_ghz),
            lambda_c=lambda_c,
            lambda_h=lambda_h,
        )

    @property
    def frequency_ratio(self) -> float:
        """omega_h / omega_c, the lever arm of the estimator."""
        return self.omega_h / self.omega_c

    @property
    def bias_voltage(self) -> float:
        """Resonance bias voltage in volts (derived quantity)."""
        return resonance_voltage(self)

    @property
    def critical_current_pa(self) -> float:
        """Junction critical current 2 e E_J / hbar expressed in pA."""
        return 2.0 * self.e_j * CURRENT_PA


def carnot_hot_temperature(t_c: float, params: MachineParams) -> float:
    """Hot temperature at which all steady flows vanish: T_c * omega_h/omega_c.

    Unit-agnostic: the result carries the units of ``t_c``.
    """
    if t_c <= 0.0:
        raise ValueError("t_c must be positive")
    return t_c * params.omega_h / params.omega_c


def resonance_voltage(params: MachineParams) -> float:
    """Bias voltage (volts) selecting the resonant exchange process.

    V = hbar (omega_h - omega_c) / 2e, with omegas in rad/s.
    """
    d_omega = (params.omega_h - params.omega_c) * 1e9  # rad/ns -> rad/s
    if d_omega < 0.0:
        raise ValueError("omega_h must not be below omega_c")
    return HBAR_JS * d_omega / (2.0 * E_CHARGE_C)


@dataclass(frozen=True)
class BathState:
    """Bath temperatures (natural units) and their mode occupations."""

    t_c: float
    t_h: float
    n_c: float
    n_h: float

    @classmethod
    def from_temperatures(cls, params: MachineParams, t_c: float,
                          t_h: float) -> "BathState":
        return cls(
            t_c=t_c,
            t_h=t_h,
            n_c=thermal_occupation(params.omega_c, t_c),
            n_h=thermal_occupation(params.omega_h, t_h),
        )

    @classmethod
    def from_mk(cls, params: MachineParams, tc_mk: float,
                th_mk: float) -> "BathState":
        return cls.from_temperatures(params, mk_to_natural(tc_mk),
                                     mk_to_natural(th_mk))

    @classmethod
    def at_carnot(cls, params: MachineParams, t_c: float) -> "BathState":
        """Baths at the operating point where the occupations coincide."""
        return cls.from_temperatures(params, t_c,
                                     carnot_hot_temperature(t_c, params))


@dataclass(frozen=True)
class MeasurementNoise:
    """Instrument resolutions: current readings (pA), hot thermometer (mK)."""

    delta_i_pa: float
    delta_th_mk: float

    def __post_init__(self):
        if self.delta_i_pa < 0.0 or self.delta_th_mk < 0.0:
            raise ValueError("noise amplitudes must be non-negative")


# Flat key=value configuration file handling.  The bundled default file
# reproduces the realistic operating parameters used throughout the tests.

_CONFIG_KEYS = (
    "omega_c_ghz", "omega_h_ghz", "kappa_c_ghz", "kappa_h_ghz", "ej_ghz",
    "lambda_c", "lambda_h", "delta_i_pa", "delta_th_mk", "tc_mk",
    "g_fit_ratio",
)

_DEFAULTS = {
    "omega_c_ghz": 1.0,
    "omega_h_ghz": 8.5,
    "kappa_c_ghz": 0.06,
    "kappa_h_ghz": 0.06,
    "ej_ghz": 0.2,
    "lambda_c": 0.3,
    "lambda_h": 0.3,
    "delta_i_pa": 0.3,
    "delta_th_mk": 10.0,
    "tc_mk": 15.0,
    "g_fit_ratio": 0.125,
}


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration: machine, noise, default cold temperature."""

    params: MachineParams
    noise: MeasurementNoise
    tc_mk: float
    g_fit_ratio: float

    def as_dict(self) -> dict:
        """Flat key=value view, in the configuration-file vocabulary."""
        p = self.params
        return {
            "omega_c_ghz": angular_to_ghz(p.omega_c),
            "omega_h_ghz": angular_to_ghz(p.omega_h),
            "kappa_c_ghz": angular_to_ghz(p.kappa_c),
            "kappa_h_ghz": angular_to_ghz(p.kappa_h),
            "ej_ghz": angular_to_ghz(p.e_j),
            "lambda_c": p.lambda_c,
            "lambda_h": p.lambda_h,
            "delta_i_pa": self.noise.delta_i_pa,
            "delta_th_mk": self.noise.delta_th_mk,
            "tc_mk": self.tc_mk,
            "g_fit_ratio": self.g_fit_ratio,
        }


def _config_from_values(values: dict) -> RunConfig:
    params = MachineParams.from_ghz(
        values["omega_c_ghz"], values["omega_h_ghz"], values["kappa_c_ghz"],
        values["kappa_h_ghz"], values["ej_ghz"], values["lambda_c"],
        values["lambda_h"],
    )
    noise = MeasurementNoise(values["delta_i_pa"], values["delta_th_mk"])
    if values["tc_mk"] <= 0.0:
        raise ConfigError("tc_mk must be positive")
    if values["g_fit_ratio"] <= 0.0:
        raise ConfigError("g_fit_ratio must be positive")
    return RunConfig(params=params, noise=noise, tc_mk=values["tc_mk"],
                     g_fit_ratio=values["g_fit_ratio"])


def parse_config_text(text: str, source: str = "<string>") -> RunConfig:
    """Parse ``key = value`` lines; '#' starts a comment; unknown keys fail."""
    values = dict(_DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = float(value.strip())
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {value.strip()!r}") from exc
    try:
        return _config_from_values(values)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path: str) -> RunConfig:
    """Load a flat key=value configuration file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text, source=str(path))


def default_config() -> RunConfig:
    """Configuration of the bundled default file (realistic operating point)."""
    return _config_from_values(dict(_DEFAULTS))


def default_config_path() -> str:
    """Filesystem path of the bundled default configuration file."""
    return str(resources.files("qtherm").joinpath("data/default.cfg"))
