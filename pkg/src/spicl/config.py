"""Plain-text scenario configuration.

Sectioned key=value files (INI syntax) with numeric scalars, comma-separated
vectors and semicolon-separated matrix rows. Unknown sections or keys are
rejected by name; missing keys fall back to the bundled demo defaults.
"""

import configparser
import io

import numpy as np

from .errors import ConfigError
from .experiment import SimConfig, demo_config

_SCALAR = "scalar"
_INT = "int"
_VECTOR = "vector"          # comma-separated; a single value broadcasts to length p
_MATRIX = "matrix"          # semicolon-separated rows of comma-separated values
_PAIR = "pair"              # exactly two comma-separated values

# section -> key -> (SimConfig field, kind)
SCHEMA = {
    "plant": {
        "x0": ("x0", _VECTOR),
        "theta_true": ("theta_true", _VECTOR),
    },
    "controller": {
        "K": ("K", _MATRIX),
        "r_e": ("r_e", _SCALAR),
        "r": ("r", _SCALAR),
    },
    "estimator": {
        "theta_hat0": ("theta_hat0", _VECTOR),
        "Gamma": ("Gamma_diag", _VECTOR),
        "gamma": ("gamma", _SCALAR),
        "lambda": ("lam", _SCALAR),
        "r_theta": ("r_theta", _SCALAR),
        "epsilon": ("epsilon", _SCALAR),
    },
    "stack": {
        "n_slots": ("n_slots", _INT),
        "ybar": ("ybar", _SCALAR),
        "delta": ("delta", _SCALAR),
        "kappa": ("kappa", _SCALAR),
    },
    "simulation": {
        "h": ("h", _SCALAR),
        "t_final": ("t_final", _SCALAR),
        "T_window": ("T_window", _SCALAR),
        "decimate": ("decimate", _INT),
    },
    "metrics": {
        "sparsity_threshold": ("sparsity_threshold", _SCALAR),
        "metrics_window": ("metrics_window", _PAIR),
    },
}

# vector-valued fields that may be given as one broadcast scalar
_BROADCAST_P = {"theta_hat0", "Gamma_diag", "theta_true"}


def _parse_value(section, key, kind, raw):
    where = f"[{section}].{key}"
    try:
        if kind == _SCALAR:
            return float(raw)
        if kind == _INT:
            return int(raw)
        if kind == _PAIR:
            vals = [float(v) for v in raw.split(",")]
            if len(vals) != 2:
                raise ValueError("expected exactly two values")
            return (vals[0], vals[1])
        if kind == _VECTOR:
            vals = np.array([float(v) for v in raw.split(",")])
            return vals
        if kind == _MATRIX:
            rows = [[float(v) for v in row.split(",")]
                    for row in raw.split(";")]
            if len({len(r) for r in rows}) != 1:
                raise ValueError("matrix rows have unequal lengths")
            return np.array(rows)
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse '{raw}' ({exc})") from exc
    raise ConfigError(f"{where}: unhandled kind {kind}")


def _lookup(section, key):
    sec = SCHEMA.get(section)
    if sec is None:
        raise ConfigError(f"unknown section '[{section}]'")
    entry = sec.get(key)
    if entry is None:
        raise ConfigError(f"unknown key '{key}' in section '[{section}]'")
    return entry


def _apply(cfg_fields, section, key, raw):
    field_name, kind = _lookup(section, key)
    value = _parse_value(section, key, kind, raw)
    if kind == _VECTOR and field_name in _BROADCAST_P and value.size == 1:
        p = len(cfg_fields["theta_true"])
        value = np.full(p, float(value[0]))
    cfg_fields[field_name] = value


def load_config(path=None, overrides=()):
    """Build a SimConfig from an optional file plus 'section.key=value' overrides."""
    base = demo_config()
    fields = {name: getattr(base, name)
              for sec in SCHEMA.values() for name, _ in sec.values()}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str          # keep key case (K, T_window, Gamma)
        try:
            with open(path, "r", encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError:
            raise
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        for section in parser.sections():
            for key, _raw in parser.items(section):
                _lookup(section, key)     # reject unknown names up front
        # apply in schema order so theta_true fixes p before any broadcast
        for section, keys in SCHEMA.items():
            if not parser.has_section(section):
                continue
            for key in keys:
                if parser.has_option(section, key):
                    _apply(fields, section, key, parser.get(section, key))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form section.key=value")
        target, raw = item.split("=", 1)
        if "." not in target:
            raise ConfigError(f"override '{item}' needs a section.key target")
        section, key = target.split(".", 1)
        _apply(fields, section.strip(), key.strip(), raw.strip())
    cfg = demo_config(**fields)
    cfg.validate()
    return cfg


def _fmt_float(v):
    return repr(float(v))


def _fmt_value(kind, value):
    if kind == _SCALAR:
        return _fmt_float(value)
    if kind == _INT:
        return str(int(value))
    if kind == _PAIR:
        return ", ".join(_fmt_float(v) for v in value)
    if kind == _VECTOR:
        return ", ".join(_fmt_float(v) for v in np.asarray(value).ravel())
    if kind == _MATRIX:
        return "; ".join(", ".join(_fmt_float(v) for v in row)
                         for row in np.asarray(value))
    raise ValueError(kind)


def config_text(cfg: SimConfig):
    """Serialize a SimConfig back to the sectioned key=value format."""
    out = io.StringIO()
    for section, keys in SCHEMA.items():
        out.write(f"[{section}]\n")
        for key, (field_name, kind) in keys.items():
            value = getattr(cfg, field_name)
            if field_name == "metrics_window" and value is None:
                value = cfg.metrics_lo_hi
            out.write(f"{key} = {_fmt_value(kind, value)}\n")
        out.write("\n")
    return out.getvalue()
