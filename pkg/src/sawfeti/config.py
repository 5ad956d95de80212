"""Run configuration: YAML parsing, defaults and validation.

Lengths in the file are micrometers, frequencies Hertz, voltages Volts.
The drive frequency is deliberately a required field with no default.
"""

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import yaml

from .geometry import GeometrySpec, PROFILES
from .materials import MaterialSet, load_material
from .scaling import ScaleSet

MICRON = 1e-6

SOLVER_KINDS = ("auto", "dense", "double-newton")


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


def data_path(name):
    """Path of a packaged data file."""
    return Path(resources.files("sawfeti") / "data" / name)


def _resolve(path_str, base_dir):
    if str(path_str).startswith("builtin:"):
        return data_path(str(path_str).split(":", 1)[1])
    p = Path(path_str)
    return p if p.is_absolute() else base_dir / p


def modular_voltages(n_cells, j):
    """Voltage pattern |i - floor(N/2)| mod j over 1-based cell indices."""
    if j < 1:
        raise ConfigError("modular pattern needs j >= 1")
    c = n_cells // 2
    return [float(abs(i - c) % j) for i in range(1, n_cells + 1)]


@dataclass
class ProblemConfig:
    """Everything one end-to-end solve needs, in raw physical units."""

    substrate: MaterialSet
    electrode: MaterialSet
    geometry_um: GeometrySpec
    frequency_hz: float
    n_cells: int
    voltages: list
    scales: ScaleSet
    solver: str = "auto"
    eps_d: float = 1e-10
    eps_n: float = 1e-10
    iter_max: int = 50
    dense_threshold: int = 20000
    workers: int = 1

    def __post_init__(self):
        if self.n_cells < 1:
            raise ConfigError("need at least one cell (N >= 1)")
        if not self.frequency_hz > 0:
            raise ConfigError("frequency must be positive")
        if len(self.voltages) != self.n_cells:
            raise ConfigError(
                f"{len(self.voltages)} voltages for {self.n_cells} cells"
            )
        if self.solver not in SOLVER_KINDS:
            raise ConfigError(f"solver must be one of {SOLVER_KINDS}")
        if self.geometry_um.damping_profile not in PROFILES:
            raise ConfigError(
                f"unknown damping profile {self.geometry_um.damping_profile!r}"
            )
        for name in ("eps_d", "eps_n"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.iter_max < 1:
            raise ConfigError("iter_max must be at least 1")

    @property
    def omega(self):
        return 2.0 * math.pi * self.frequency_hz

    @property
    def geometry_m(self):
        return self.geometry_um.scaled(MICRON)


@dataclass
class RunConfig:
    """A parsed config file: one ProblemConfig per requested frequency."""

    problem: ProblemConfig
    frequencies_hz: list
    output_dir: Path = Path("out")
    sources: dict = field(default_factory=dict)

    def problems(self):
        for f in self.frequencies_hz:
            yield replace(self.problem, frequency_hz=f)


def _require(mapping, key, where):
    if key not in mapping:
        raise ConfigError(f"missing required field {key!r} in {where}")
    return mapping[key]


def load_run_config(path, solver=None, workers=None, output=None,
                    paper_verbatim_damping=False):
    """Parse a YAML run configuration; CLI flags override file values."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} is not a mapping")
    base = path.parent

    g = _require(raw, "geometry", "config")
    geometry_um = GeometrySpec(
        pitch=float(_require(g, "pitch_um", "geometry")),
        width=float(_require(g, "width_um", "geometry")),
        depth=float(_require(g, "substrate_depth_um", "geometry")),
        electrode_width=float(_require(g, "electrode_width_um", "geometry")),
        electrode_height=float(_require(g, "electrode_height_um", "geometry")),
        pml_thickness=float(_require(g, "pml_thickness_um", "geometry")),
        substrate_nodes=tuple(int(v) for v in _require(g, "substrate_nodes", "geometry")),
        electrode_nodes=tuple(int(v) for v in _require(g, "electrode_nodes", "geometry")),
        pml_nodes=int(_require(g, "pml_nodes", "geometry")),
        orders=tuple(int(v) for v in g.get("element_orders", (2, 1, 2))),
        damping_profile=(
            "paper-verbatim" if paper_verbatim_damping
            else g.get("damping_profile", "smooth-junction")
        ),
        damping_amplitude=float(g.get("damping_amplitude", 1.0)),
    )

    mats = _require(raw, "materials", "config")
    sub_path = _resolve(_require(mats, "substrate", "materials"), base)
    elec_path = _resolve(_require(mats, "electrode", "materials"), base)
    for p in (sub_path, elec_path):
        if not Path(p).exists():
            raise ConfigError(f"material file not found: {p}")
    substrate = load_material(sub_path)
    electrode = load_material(elec_path)
    if not substrate.is_piezoelectric:
        raise ConfigError("substrate material must carry a permittivity tensor")

    drive = _require(raw, "drive", "config")
    freq = _require(drive, "frequency_hz", "drive")
    frequencies = [float(f) for f in (freq if isinstance(freq, list) else [freq])]
    if not frequencies:
        raise ConfigError("drive.frequency_hz must not be empty")
    n_cells = int(_require(drive, "cells", "drive"))
    voltages = _require(drive, "voltages", "drive")
    if isinstance(voltages, dict):
        if voltages.get("pattern") != "modular":
            raise ConfigError("voltage pattern must be {'pattern': 'modular', 'j': int}")
        voltages = modular_voltages(n_cells, int(_require(voltages, "j", "voltages")))
    else:
        voltages = [float(v) for v in voltages]

    sc = raw.get("scales", {})
    scales = ScaleSet.from_references(
        c1=float(sc.get("c1", 1e10)),
        omega1=float(sc.get("omega1", 1e7)),
        rho1=float(sc.get("rho1", 1.0)),
    )

    so = raw.get("solver", {})
    problem = ProblemConfig(
        substrate=substrate,
        electrode=electrode,
        geometry_um=geometry_um,
        frequency_hz=frequencies[0],
        n_cells=n_cells,
        voltages=voltages,
        scales=scales,
        solver=solver if solver is not None else so.get("kind", "auto"),
        eps_d=float(so.get("eps_d", 1e-10)),
        eps_n=float(so.get("eps_n", 1e-10)),
        iter_max=int(so.get("iter_max", 50)),
        dense_threshold=int(so.get("dense_threshold", 20000)),
        workers=int(workers if workers is not None else raw.get("workers", 1)),
    )
    return RunConfig(
        problem=problem,
        frequencies_hz=frequencies,
        output_dir=Path(output if output is not None else raw.get("output", "out")),
        sources={"config": path, "substrate": sub_path, "electrode": elec_path},
    )
