"""Plain-text run configuration: key = value sections mirroring the module
layout, resolved into a BumpConfiguration plus numerical settings.

Every consumer receives the fully resolved parameter set, and reports echo
it back verbatim so a run can be reproduced from its own artifacts.
"""

from __future__ import annotations

import configparser
import dataclasses
import io

from . import geometry as geo

DEFAULT_TEXT = """\
[geometry]
ell = 8
m = 2.0
a1 = 1.0
a2 = 1.0
tau = 0.025
# 0 selects the upper endpoints of the admissible radius box
r = 0
rho = 0

[model]
p = 4.0
mu = 1.0
nu = 1.0
beta = -1.0
sigma1 = 0.5
sigma2 = 0.5
sigma_prime = 0.5
# 0 selects the smallest admissible smoothing index for ell
n_smooth = 0

[grid]
h = 0.25

[energy]
h = 0.25
n_line = 8
n_points = 3

[deadcore]
tol = 1e-10
"""

_INT_KEYS = {"ell", "n_smooth", "n_line", "n_points"}

_CONFIG_FIELDS = {f.name for f in dataclasses.fields(geo.BumpConfiguration)}

_KNOWN = {
    "geometry": {"ell", "m", "a1", "a2", "tau", "r", "rho", "theta"},
    "model": {"p", "mu", "nu", "beta", "sigma1", "sigma2", "sigma_prime",
              "n_smooth"},
    "grid": {"h"},
    "energy": {"h", "n_line", "n_points"},
    "deadcore": {"tol"},
}


def _convert(key: str, raw: str):
    try:
        return int(raw) if key in _INT_KEYS else float(raw)
    except ValueError:
        raise ValueError(f"value {raw!r} for key {key!r} is not a number")


def parse_settings(text: str) -> dict:
    """Section -> {key: number} from config text; unknown sections or keys
    are rejected so typos cannot silently fall back to defaults."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.read_string(text)
    settings = {}
    for section in cp.sections():
        if section not in _KNOWN:
            raise ValueError(f"unknown config section [{section}]")
        vals = {}
        for key, raw in cp.items(section):
            if key not in _KNOWN[section]:
                raise ValueError(
                    f"unknown key {key!r} in section [{section}]")
            vals[key] = _convert(key, raw)
        settings[section] = vals
    return settings


def load_settings(path: str | None = None) -> dict:
    """Settings from a config file, with the packaged defaults filled in for
    every key the file does not mention."""
    base = parse_settings(DEFAULT_TEXT)
    if path is not None:
        with open(path) as fh:
            user = parse_settings(fh.read())
        for section, vals in user.items():
            base[section].update(vals)
    return base


def build_configuration(settings: dict,
                        ell: int | None = None) -> geo.BumpConfiguration:
    """BumpConfiguration from the [geometry] and [model] sections; parameter
    bounds are enforced by the configuration type and surface as ValueError
    naming the offending field."""
    kwargs = {}
    for section in ("geometry", "model"):
        for key, val in settings.get(section, {}).items():
            if key in _CONFIG_FIELDS:
                kwargs[key] = val
    if ell is not None:
        kwargs["ell"] = ell
    kwargs["ell"] = int(kwargs.get("ell", 8))
    if "n_smooth" in kwargs:
        kwargs["n_smooth"] = int(kwargs["n_smooth"])
    return geo.BumpConfiguration(**kwargs)


def echo(config: geo.BumpConfiguration) -> dict:
    """Fully resolved parameter set (defaults applied) for report headers."""
    return dataclasses.asdict(config)


def settings_text(settings: dict) -> str:
    cp = configparser.ConfigParser()
    for section, vals in settings.items():
        cp[section] = {k: format(v, ".17g") if isinstance(v, float) else str(v)
                       for k, v in vals.items()}
    out = io.StringIO()
    cp.write(out)
    return out.getvalue()


def write_default(path: str) -> None:
    with open(path, "w") as fh:
        fh.write(DEFAULT_TEXT)
