"""Experiment configuration: sectioned key = value files plus CLI overrides.

Sections and keys::

    [geometry]
    kind = rectangle | rough | file
    nx, ny, Lx, Ly, ncoarse          # rectangle
    width_min, width_max, waviness, n_modes   # rough (plus nx, ny, Lx, ncoarse)
    path = mesh.txt                  # file
    label = geometry1                # optional tag used in reports

    [coefficient]
    kind = constant | loguniform | file
    value = 1.0                      # constant
    kappa_min, kappa_max, n_modes    # loguniform
    path = kappa.txt                 # file

    [test]
    case = test1 | test2 | custom
    p_in, p_out, source              # custom only

    [run]
    M = 1 2 4 8 12
    output_dir = out
    seed = 0
    workers = 1
    cache = true
    vtk = false
    plots = false
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .mesh import (
    MeshError,
    RoughChannelSpec,
    generate_rectangle,
    generate_rough_channel,
    load_mesh,
    make_coefficient,
)


class ConfigError(Exception):
    """Malformed or inconsistent experiment configuration."""


TEST_PRESETS = {
    "test1": {"p_in": 1.0, "p_out": 0.0, "source": 0.0},
    "test2": {"p_in": 0.0, "p_out": 0.0, "source": 1.0},
}


@dataclass
class ExperimentConfig:
    geometry: dict
    coefficient: dict
    test: dict
    M_values: list
    output_dir: Path
    seed: int = 0
    workers: int = 1
    use_cache: bool = True
    write_vtk: bool = False
    write_plots: bool = False

    @property
    def geometry_label(self):
        return self.geometry.get("label") or self.geometry["kind"]

    @property
    def test_label(self):
        return self.test["case"]


def _get(section, key, cast, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"missing key '{key}' in section [{section.name}]")
        return default
    try:
        raw = section[key]
        if cast is bool:
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        return cast(raw)
    except ValueError:
        raise ConfigError(
            f"bad value for '{key}' in section [{section.name}]: {section[key]!r}"
        ) from None


def parse_config(path, overrides=None):
    """Read a config file and apply ``section.key=value`` overrides."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    for item in overrides or []:
        try:
            dotted, value = item.split("=", 1)
            section, key = dotted.split(".", 1)
        except ValueError:
            raise ConfigError(
                f"override {item!r} is not of the form section.key=value"
            ) from None
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key.strip(), value.strip())
    return build_config(parser)


def build_config(parser):
    for name in ("geometry", "coefficient", "test", "run"):
        if not parser.has_section(name):
            raise ConfigError(f"missing section [{name}]")

    geo = parser["geometry"]
    kind = _get(geo, "kind", str, required=True)
    geometry = {"kind": kind, "label": _get(geo, "label", str)}
    if kind in ("rectangle", "rough"):
        geometry.update(
            nx=_get(geo, "nx", int, required=True),
            ny=_get(geo, "ny", int, required=True),
            Lx=_get(geo, "Lx", float, 1.0),
            ncoarse=_get(geo, "ncoarse", int, required=True),
        )
        if kind == "rectangle":
            geometry["Ly"] = _get(geo, "Ly", float, 0.1)
        else:
            geometry.update(
                width_min=_get(geo, "width_min", float, required=True),
                width_max=_get(geo, "width_max", float, required=True),
                waviness=_get(geo, "waviness", float, 1.0),
                n_modes=_get(geo, "n_modes", int, 5),
            )
    elif kind == "file":
        geometry["path"] = _get(geo, "path", str, required=True)
    else:
        raise ConfigError(f"unknown geometry kind {kind!r}")

    coeff_sec = parser["coefficient"]
    ckind = _get(coeff_sec, "kind", str, required=True)
    coefficient = {"kind": ckind}
    if ckind == "constant":
        coefficient["value"] = _get(coeff_sec, "value", float, 1.0)
    elif ckind == "loguniform":
        coefficient.update(
            kappa_min=_get(coeff_sec, "kappa_min", float, required=True),
            kappa_max=_get(coeff_sec, "kappa_max", float, required=True),
            n_modes=_get(coeff_sec, "n_modes", int, 24),
        )
    elif ckind == "file":
        coefficient["path"] = _get(coeff_sec, "path", str, required=True)
    else:
        raise ConfigError(f"unknown coefficient kind {ckind!r}")

    test_sec = parser["test"]
    case = _get(test_sec, "case", str, required=True)
    if case in TEST_PRESETS:
        test = {"case": case, **TEST_PRESETS[case]}
    elif case == "custom":
        test = {
            "case": case,
            "p_in": _get(test_sec, "p_in", float, required=True),
            "p_out": _get(test_sec, "p_out", float, required=True),
            "source": _get(test_sec, "source", float, 0.0),
        }
    else:
        raise ConfigError(f"unknown test case {case!r}")

    run = parser["run"]
    m_raw = _get(run, "M", str, required=True)
    try:
        m_values = [int(v) for v in m_raw.split()]
    except ValueError:
        raise ConfigError(f"bad M sweep {m_raw!r}") from None
    if not m_values or any(m < 1 for m in m_values):
        raise ConfigError("M sweep must contain positive integers")

    return ExperimentConfig(
        geometry=geometry,
        coefficient=coefficient,
        test=test,
        M_values=m_values,
        output_dir=Path(_get(run, "output_dir", str, "out")),
        seed=_get(run, "seed", int, 0),
        workers=_get(run, "workers", int, 1),
        use_cache=_get(run, "cache", bool, True),
        write_vtk=_get(run, "vtk", bool, False),
        write_plots=_get(run, "plots", bool, False),
    )


def build_geometry(cfg):
    """Instantiate ``(mesh, partition)`` from the geometry section."""
    geo = cfg.geometry
    try:
        if geo["kind"] == "rectangle":
            return generate_rectangle(
                geo["nx"], geo["ny"], geo["Lx"], geo["Ly"], geo["ncoarse"]
            )
        if geo["kind"] == "rough":
            spec = RoughChannelSpec(
                width_min=geo["width_min"],
                width_max=geo["width_max"],
                waviness=geo["waviness"],
                n_modes=geo["n_modes"],
            )
            return generate_rough_channel(
                geo["nx"], geo["ny"], geo["Lx"], spec, cfg.seed, geo["ncoarse"]
            )
        return load_mesh(geo["path"])
    except MeshError as exc:
        raise ConfigError(f"geometry: {exc}") from exc


def build_coefficient(cfg, mesh):
    spec = dict(cfg.coefficient)
    kind = spec.pop("kind")
    try:
        return make_coefficient(mesh, kind, seed=cfg.seed, **spec)
    except MeshError as exc:
        raise ConfigError(f"coefficient: {exc}") from exc
