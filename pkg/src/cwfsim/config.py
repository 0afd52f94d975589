"""Run configuration: YAML in, validated + fully-defaulted RunConfig out.

Unknown keys are rejected (with their dotted path), every physical
quantity is range-checked, and the set of user-supplied paths is kept so
output manifests can tell defaults from choices.
"""

from __future__ import annotations

import copy
import io
from dataclasses import dataclass, field as dc_field

import yaml

PRESETS = ("rtd_iv", "graphene_collision", "klein", "custom")

SCHEMA_VERSION = 1

DEFAULTS: dict = {
    "preset": "rtd_iv",
    "seed": None,  # mandatory, no default
    "out_dir": None,
    "threads": 1,
    "time": {
        "dt_fs": None,  # None = derive from the phase-advance budget
        "total_ps": 5.0,
        "sample_stride": 50,
        "warmup_fraction": 0.2,
    },
    "grid": {"n": 1024, "box_length_nm": 768.0},
    "grid2d": {"shape": [512, 256], "lengths_nm": [1024.0, 768.0]},
    "device": {
        "barrier_height_ev": 0.5,
        "barrier_width_nm": 1.6,
        "well_width_nm": 2.4,
        "total_length_nm": 120.0,
        "fermi_level_ev": 0.15,
        "temperature_k": 300.0,
        "effective_mass_ratio": 0.067,
        "relative_permittivity": 12.9,
        "cross_section_nm2": 22500.0,
    },
    "bias": {"values_v": [0.0, 0.07, 0.14, 0.21, 0.28, 0.35, 0.42, 0.49, 0.56, 0.63]},
    "scattering": {"enabled": True, "kick_substeps": 1, "mechanisms": []},
    "electron_cap": 16,
    "absorber": {"strength_ev": 0.1, "margin_fraction": 0.1},
    "injection": {"sigma_nm": 40.0},
    "density_matrix": {"stride": 500, "dim": 256},
    "dirac": {
        "k0_per_m": 2.27e8,
        "sigma_nm": 40.0,
        "band_flip": False,
        "new_angle_deg": 45.0,
        "barrier_ev": 0.4,
        "barrier_width_nm": 200.0,
        "incidence_deg": 30.0,
        "scenario": "all",
        "dt_fs": 0.35,
        "pre_ps": 0.10,
        "post_ps": 0.16,
        "total_ps": 0.60,
        "approach_nm": 150.0,
    },
}

_MECHANISM_KEYS = {"kind", "rate_per_s", "phonon_energy_ev", "temperature_k"}
_MECHANISM_KINDS = ("acoustic_elastic", "impurity_elastic", "optical_emission", "optical_absorption")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    resolved: dict
    provided_keys: tuple

    def __getitem__(self, key):
        return self.resolved[key]

    @property
    def preset(self) -> str:
        return self.resolved["preset"]

    @property
    def seed(self) -> int:
        return self.resolved["seed"]

    def to_yaml(self) -> str:
        buf = io.StringIO()
        yaml.safe_dump(self.resolved, buf, sort_keys=True)
        return buf.getvalue()


def _merge(defaults: dict, user: dict, path: str, provided: list) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in user.items():
        here = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown configuration key '{here}'")
        if isinstance(defaults[key], dict) and key != "mechanisms":
            if not isinstance(val, dict):
                raise ConfigError(f"'{here}' must be a mapping")
            out[key] = _merge(defaults[key], val, here, provided)
        else:
            out[key] = val
            provided.append(here)
    return out


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _positive(cfg: dict, path: str, allow_zero: bool = False):
    node = cfg
    for part in path.split("."):
        node = node[part]
    ok = node >= 0 if allow_zero else node > 0
    _require(isinstance(node, (int, float)) and not isinstance(node, bool) and ok,
             f"'{path}' must be {'>= 0' if allow_zero else '> 0'}")


def _validate(cfg: dict):
    _require(cfg["preset"] in PRESETS, f"'preset' must be one of {PRESETS}")
    _require(isinstance(cfg["seed"], int) and not isinstance(cfg["seed"], bool) and cfg["seed"] >= 0,
             "'seed' is mandatory and must be a nonnegative integer")
    _require(isinstance(cfg["threads"], int) and cfg["threads"] >= 1, "'threads' must be an integer >= 1")
    for p in (
        "time.total_ps",
        "grid.n",
        "grid.box_length_nm",
        "device.barrier_height_ev",
        "device.barrier_width_nm",
        "device.well_width_nm",
        "device.total_length_nm",
        "device.temperature_k",
        "device.effective_mass_ratio",
        "device.relative_permittivity",
        "device.cross_section_nm2",
        "electron_cap",
        "absorber.strength_ev",
        "injection.sigma_nm",
        "scattering.kick_substeps",
        "dirac.k0_per_m",
        "dirac.sigma_nm",
        "dirac.barrier_ev",
        "dirac.barrier_width_nm",
        "dirac.dt_fs",
        "dirac.total_ps",
        "dirac.pre_ps",
        "dirac.post_ps",
        "dirac.approach_nm",
    ):
        _positive(cfg, p)
    for p in ("device.fermi_level_ev", "time.sample_stride", "density_matrix.stride"):
        _positive(cfg, p, allow_zero=True)
    if cfg["time"]["dt_fs"] is not None:
        _positive(cfg, "time.dt_fs")
    _require(0.0 <= cfg["time"]["warmup_fraction"] < 1.0, "'time.warmup_fraction' must lie in [0, 1)")
    _require(0.0 < cfg["absorber"]["margin_fraction"] < 0.5, "'absorber.margin_fraction' must lie in (0, 0.5)")
    wells = cfg["device"]
    _require(
        wells["well_width_nm"] + 2 * wells["barrier_width_nm"] < wells["total_length_nm"],
        "device: barriers and well must fit inside total_length_nm",
    )
    _require(
        wells["total_length_nm"] < cfg["grid"]["box_length_nm"],
        "device must fit inside the simulation box",
    )
    biases = cfg["bias"]["values_v"]
    _require(isinstance(biases, list) and len(biases) >= 1, "'bias.values_v' must be a nonempty list")
    _require(all(isinstance(b, (int, float)) and not isinstance(b, bool) for b in biases),
             "'bias.values_v' entries must be numbers")
    shape = cfg["grid2d"]["shape"]
    _require(isinstance(shape, list) and len(shape) == 2, "'grid2d.shape' must be [nx, ny]")
    _require(cfg["dirac"]["scenario"] in ("all", "normal", "oblique", "oblique_collision"),
             "'dirac.scenario' must be all|normal|oblique|oblique_collision")
    for i, m in enumerate(cfg["scattering"]["mechanisms"]):
        here = f"scattering.mechanisms[{i}]"
        _require(isinstance(m, dict), f"'{here}' must be a mapping")
        unknown = sorted(set(m) - _MECHANISM_KEYS)
        if unknown:
            raise ConfigError(f"unknown configuration key '{here}.{unknown[0]}'")
        _require(m.get("kind") in _MECHANISM_KINDS, f"'{here}.kind' must be one of {_MECHANISM_KINDS}")
        _require(isinstance(m.get("rate_per_s"), (int, float)) and m["rate_per_s"] >= 0,
                 f"'{here}.rate_per_s' must be >= 0")


def parse_config(text: str) -> RunConfig:
    try:
        user = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not well-formed YAML: {exc}") from exc
    if user is None:
        user = {}
    if not isinstance(user, dict):
        raise ConfigError("config document must be a mapping")
    provided: list = []
    resolved = _merge(DEFAULTS, user, "", provided)
    _validate(resolved)
    return RunConfig(resolved=resolved, provided_keys=tuple(sorted(provided)))


def parse_config_file(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
