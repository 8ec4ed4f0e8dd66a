"""Run configuration: schema, validation, canonical form and round-trip.

The configuration is a small key-value tree (YAML or JSON) with sections

    geometry:   profile (constant | steps | table), x1, x2
    bath:       l, r, z1
    transport:  D1, D2
    charge:     Q0                      (single point)
    potential:  V                       (single point)
    sweep:      parameter (Q0|theta|V) plus either values: [...] or
                start/stop/count with scale: linear|log
    oracle:     epsilons: [...], tolerance
    output:     path, format

Exactly one of {single point, sweep} may define each varying parameter.
Schema violations raise :class:`ConfigurationError` with the offending
field path in the message.
"""

import json
from dataclasses import dataclass

import numpy as np
import yaml

from .errors import ConfigurationError, DomainError, InvalidProfileError
from .geometry import build_geometry, profile_from_spec
from .reduced import BathConditions, Transport

SWEEP_PARAMETERS = ("Q0", "theta", "V")


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple

    def grid(self):
        return list(self.values)


@dataclass(frozen=True)
class OracleSpec:
    epsilons: tuple
    tolerance: float
    fields_out: str = None


@dataclass(frozen=True)
class OutputSpec:
    path: str = "-"
    format: str = "csv"


@dataclass(frozen=True)
class RunConfig:
    geometry: object
    bath: BathConditions
    transport: Transport
    q0: float
    v: float
    sweep: SweepSpec
    oracle: OracleSpec
    output: OutputSpec


def _get(mapping, key, path, required=True, default=None):
    if not isinstance(mapping, dict):
        raise ConfigurationError(f"{path}: expected a mapping")
    if key not in mapping:
        if required:
            raise ConfigurationError(f"{path}.{key}: missing required key")
        return default
    return mapping[key]


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _check_known_keys(mapping, known, path):
    extra = set(mapping) - set(known)
    if extra:
        raise ConfigurationError(f"{path}: unknown keys {sorted(extra)}")


def _parse_sweep(section):
    _check_known_keys(section, {"parameter", "values", "start", "stop", "count", "scale"}, "sweep")
    parameter = _get(section, "parameter", "sweep")
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigurationError(f"sweep.parameter: must be one of {SWEEP_PARAMETERS}, got {parameter!r}")
    if "values" in section:
        if any(k in section for k in ("start", "stop", "count")):
            raise ConfigurationError("sweep: give either values or start/stop/count, not both")
        values = tuple(_number(v, "sweep.values") for v in section["values"])
        if not values:
            raise ConfigurationError("sweep.values: must be non-empty")
        return SweepSpec(parameter=parameter, values=values)
    start = _number(_get(section, "start", "sweep"), "sweep.start")
    stop = _number(_get(section, "stop", "sweep"), "sweep.stop")
    count = _get(section, "count", "sweep")
    if not isinstance(count, int) or count < 1:
        raise ConfigurationError(f"sweep.count: expected a positive integer, got {count!r}")
    scale = section.get("scale", "linear")
    if scale == "linear":
        values = np.linspace(start, stop, count)
    elif scale == "log":
        if start <= 0.0 or stop <= 0.0:
            raise ConfigurationError("sweep: log scale requires positive start and stop")
        values = np.geomspace(start, stop, count)
    else:
        raise ConfigurationError(f"sweep.scale: must be 'linear' or 'log', got {scale!r}")
    return SweepSpec(parameter=parameter, values=tuple(float(v) for v in values))


def parse_config(mapping):
    """Validate a configuration mapping and build the typed run config."""
    if not isinstance(mapping, dict):
        raise ConfigurationError("config root must be a mapping")
    _check_known_keys(
        mapping,
        {"geometry", "bath", "transport", "charge", "potential", "sweep", "oracle", "output"},
        "config",
    )

    geo = _get(mapping, "geometry", "config")
    _check_known_keys(geo, {"profile", "x1", "x2"}, "geometry")
    try:
        profile = profile_from_spec(_get(geo, "profile", "geometry"))
        geometry = build_geometry(
            profile,
            _number(_get(geo, "x1", "geometry"), "geometry.x1"),
            _number(_get(geo, "x2", "geometry"), "geometry.x2"),
        )
    except (InvalidProfileError, ConfigurationError) as exc:
        raise ConfigurationError(f"geometry: {exc}") from exc

    bath_map = _get(mapping, "bath", "config")
    _check_known_keys(bath_map, {"l", "r", "z1"}, "bath")
    try:
        bath = BathConditions(
            l=_number(_get(bath_map, "l", "bath"), "bath.l"),
            r=_number(_get(bath_map, "r", "bath"), "bath.r"),
            z1=_number(bath_map.get("z1", 1.0), "bath.z1"),
        )
    except DomainError as exc:
        raise ConfigurationError(f"bath: {exc}") from exc

    tr_map = _get(mapping, "transport", "config")
    _check_known_keys(tr_map, {"D1", "D2"}, "transport")
    try:
        transport = Transport(
            D1=_number(_get(tr_map, "D1", "transport"), "transport.D1"),
            D2=_number(_get(tr_map, "D2", "transport"), "transport.D2"),
        )
    except DomainError as exc:
        raise ConfigurationError(f"transport: {exc}") from exc

    q0 = None
    if "charge" in mapping:
        _check_known_keys(mapping["charge"], {"Q0"}, "charge")
        q0 = _number(_get(mapping["charge"], "Q0", "charge"), "charge.Q0")
    v = None
    if "potential" in mapping:
        _check_known_keys(mapping["potential"], {"V"}, "potential")
        v = _number(_get(mapping["potential"], "V", "potential"), "potential.V")

    sweep = _parse_sweep(mapping["sweep"]) if "sweep" in mapping else None
    if sweep is not None:
        if sweep.parameter == "Q0" and q0 is not None:
            raise ConfigurationError("charge.Q0: conflicts with sweep over Q0; give exactly one")
        if sweep.parameter == "V" and v is not None:
            raise ConfigurationError("potential.V: conflicts with sweep over V; give exactly one")
        if sweep.parameter == "theta":
            bad = [t for t in sweep.values if not -1.0 < t < 1.0]
            if bad:
                raise ConfigurationError(f"sweep.values: theta values outside (-1, 1): {bad}")

    oracle = None
    if "oracle" in mapping:
        sec = mapping["oracle"]
        _check_known_keys(sec, {"epsilons", "tolerance", "fields_out"}, "oracle")
        eps = _get(sec, "epsilons", "oracle")
        if not isinstance(eps, list) or not eps:
            raise ConfigurationError("oracle.epsilons: expected a non-empty list")
        oracle = OracleSpec(
            epsilons=tuple(_number(e, "oracle.epsilons") for e in eps),
            tolerance=_number(sec.get("tolerance", 0.02), "oracle.tolerance"),
            fields_out=sec.get("fields_out"),
        )

    output = OutputSpec()
    if "output" in mapping:
        sec = mapping["output"]
        _check_known_keys(sec, {"path", "format"}, "output")
        fmt = sec.get("format", "csv")
        if fmt != "csv":
            raise ConfigurationError(f"output.format: only 'csv' is supported, got {fmt!r}")
        output = OutputSpec(path=str(sec.get("path", "-")), format=fmt)

    return RunConfig(
        geometry=geometry, bath=bath, transport=transport,
        q0=q0, v=v, sweep=sweep, oracle=oracle, output=output,
    )


def load_config(path):
    """Parse a YAML or JSON configuration file."""
    with open(path) as fh:
        text = fh.read()
    try:
        mapping = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: cannot parse config: {exc}") from exc
    return parse_config(mapping)


def canonical_mapping(config):
    """Normalized mapping equivalent to the parsed config (round-trip safe)."""
    out = {
        "geometry": {
            "profile": config.geometry.profile.spec(),
            "x1": config.geometry.x1,
            "x2": config.geometry.x2,
        },
        "bath": {"l": config.bath.l, "r": config.bath.r, "z1": config.bath.z1},
        "transport": {"D1": config.transport.D1, "D2": config.transport.D2},
    }
    if config.q0 is not None:
        out["charge"] = {"Q0": config.q0}
    if config.v is not None:
        out["potential"] = {"V": config.v}
    if config.sweep is not None:
        out["sweep"] = {"parameter": config.sweep.parameter, "values": list(config.sweep.values)}
    if config.oracle is not None:
        out["oracle"] = {
            "epsilons": list(config.oracle.epsilons),
            "tolerance": config.oracle.tolerance,
        }
        if config.oracle.fields_out is not None:
            out["oracle"]["fields_out"] = config.oracle.fields_out
    out["output"] = {"path": config.output.path, "format": config.output.format}
    return out


def serialize_config(config):
    """YAML text of the canonical mapping."""
    return yaml.safe_dump(canonical_mapping(config), sort_keys=False)


def config_json(config):
    """One-line JSON echo of the canonical mapping, for CSV metadata blocks."""
    return json.dumps(canonical_mapping(config), sort_keys=True, separators=(",", ":"))
