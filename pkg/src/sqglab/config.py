"""Flat ``key = value`` run configuration with a documented default table."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .field import Grid
from .nonlocal_ops import HomogeneousProfile
from .symmetry import SymmetryGroup, parse_group


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text: str):
    return None if text.lower() in ("none", "") else float(text)


def _opt_int(text: str):
    return None if text.lower() in ("none", "") else int(text)


# key -> (parser, default, description)
SCHEMA: dict[str, tuple[Any, Any, str]] = {
    "grid.n": (int, 256, "points per axis (power of two >= 16)"),
    "grid.l": (float, 2 * math.pi, "half box side; the box is [-l, l)^2"),
    "solver.dt": (float, 0.01, "time step"),
    "solver.t_end": (float, 1.0, "final time"),
    "solver.scheme": (str, "etd2", "etd1 or etd2"),
    "solver.resymmetrize_every": (int, 0, "project onto the group every k steps (0 = never)"),
    "solver.group": (str, "rotation_reflection(3)", "rotation(m), rotation_reflection(m), radial or none"),
    "solver.mollify_delta": (_opt_float, None, "space-time mollification scale (approximate system)"),
    "solver.mollify_rho": (_opt_float, None, "cutoff radius in units of t (approximate system)"),
    "solver.lambda_dss": (_opt_float, None, "scaling factor for the DSS error diagnostic"),
    "data.kind": (str, "bump", "homogeneous, bump, ring, random_symmetric or file"),
    "data.profile": (str, "sin(3phi)", "angular profile for homogeneous data: sin(k phi), cos(k phi) or const"),
    "data.amplitude": (float, 1.0, "amplitude (sup norm for random data)"),
    "data.width": (float, 0.5, "bump / envelope width"),
    "data.seed": (_opt_int, None, "random seed (mandatory for random data)"),
    "data.file": (str, "", "snapshot file for kind = file"),
    "data.mollify_cells": (float, 2.0, "mollification of homogeneous data, in grid cells"),
    "norms.R0": (float, 1.0, "smallest ladder radius"),
    "norms.J": (_opt_int, None, "ladder length (default: fit 0.9 l)"),
    "norms.p": (float, 2.0, "ball-average exponent"),
    "norms.alpha": (float, 0.5, "Hoelder exponent"),
    "profile.n": (int, 256, "similarity grid points per axis"),
    "profile.L": (float, 8.0, "similarity box half side"),
    "profile.sponge_start": (float, 0.6, "fraction of L where the sponge begins"),
    "profile.sponge_full": (float, 0.95, "fraction of L where the sponge reaches full rate"),
    "profile.sponge_rate": (float, 5.0, "sponge relaxation rate"),
    "profile.s_max": (float, 20.0, "maximal pseudo-time"),
    "profile.tol_rel": (float, 1e-5, "residual tolerance relative to A"),
    "profile.disable_riesz": (_bool, False, "drop the velocity (linear similarity flow)"),
    "sweep.A_values": (_floats, (0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0), "amplitudes"),
    "sweep.group": (str, "rotation(3)", "constrained group"),
    "sweep.reference": (str, "rotation_reflection(3)", "reference group for the asymmetry indicator"),
    "sweep.seed_eps": (float, 1e-3, "reflection-antisymmetric seed, relative to A"),
    "stability.n": (int, 512, "physical grid points per axis"),
    "stability.l": (float, 64.0, "physical box half side"),
    "stability.dt": (float, 0.025, "physical time step"),
    "stability.t0": (float, 0.25, "first checkpoint"),
    "stability.n_checkpoints": (int, 5, "checkpoints t0 2^k"),
    "stability.R_list": (_floats, (0.5, 1.0, 2.0), "probe radii in units of t"),
    "stability.perturbation_amp": (float, 0.02, "symmetric bump amplitude"),
    "stability.perturbation_width": (float, 1.0, "compact bump radius"),
    "output.dir": (str, "out", "output directory"),
    "output.snapshot_every": (int, 10, "snapshot cadence in steps"),
    "output.formats": (str, "csv,sqgf", "csv and/or sqgf"),
}

_LINE = re.compile(r"^([A-Za-z_][\w]*(?:\.[A-Za-z_][\w]*)+)\s*=\s*(.*?)\s*$")
_PROFILE = re.compile(r"^(sin|cos)\((\d*)\s*\*?\s*phi\)$")


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {k: v[1] for k, v in SCHEMA.items()})

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def grid(self) -> Grid:
        return Grid(self["grid.n"], self["grid.l"])

    @property
    def group(self) -> SymmetryGroup | None:
        return _group(self["solver.group"])

    def profile(self, M: int = 256) -> HomogeneousProfile:
        return parse_profile(self["data.profile"], M)

    def as_text(self) -> str:
        out = []
        for k in SCHEMA:
            v = self.values[k]
            if isinstance(v, tuple):
                v = ", ".join(repr(x) for x in v)
            out.append(f"{k} = {v}")
        return "\n".join(out) + "\n"


def _group(text: str) -> SymmetryGroup | None:
    return None if text.strip().lower() == "none" else parse_group(text)


def parse_profile(text: str, M: int = 256) -> HomogeneousProfile:
    t = text.replace(" ", "").lower()
    if t == "const":
        return HomogeneousProfile(np.ones(M))
    m = _PROFILE.match(t)
    if not m:
        raise ValueError(f"unknown profile {text!r}")
    k = int(m.group(2) or 1)
    fn = np.sin if m.group(1) == "sin" else np.cos
    return HomogeneousProfile.from_function(lambda p: fn(k * p), M)


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines (``#`` starts a comment); report the first error with its line."""
    cfg = RunConfig()
    lines = {}
    for i, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        m = _LINE.match(body)
        if not m:
            raise ConfigError(f"expected 'key = value', got {body!r}", i)
        key, val = m.group(1), m.group(2)
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", i)
        parser = SCHEMA[key][0]
        try:
            cfg.values[key] = parser(val)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", i) from None
        lines[key] = i
    _validate(cfg, lines)
    return cfg


def _validate(cfg: RunConfig, lines: dict) -> None:
    def fail(key, msg):
        raise ConfigError(msg, lines.get(key))

    try:
        cfg.grid
    except ValueError as exc:
        fail("grid.n" if "n must" in str(exc) else "grid.l", str(exc))
    for key in ("profile.n", "stability.n"):
        n = cfg[key]
        if n < 16 or n & (n - 1):
            fail(key, f"{key} must be a power of two >= 16")
    for key in ("solver.dt", "solver.t_end", "profile.L", "stability.l", "stability.dt", "stability.t0"):
        if not cfg[key] > 0 and not (key == "solver.t_end" and cfg[key] == 0):
            fail(key, f"{key} must be positive")
    if cfg["solver.scheme"] not in ("etd1", "etd2"):
        fail("solver.scheme", "solver.scheme must be etd1 or etd2")
    for key in ("solver.group", "sweep.group", "sweep.reference"):
        try:
            _group(cfg[key])
        except ValueError as exc:
            fail(key, str(exc))
    kind = cfg["data.kind"]
    if kind not in ("homogeneous", "bump", "ring", "random_symmetric", "file"):
        fail("data.kind", f"unknown data.kind {kind!r}")
    if kind == "random_symmetric" and cfg["data.seed"] is None:
        fail("data.kind", "data.seed is mandatory for random data")
    if kind == "file" and not cfg["data.file"]:
        fail("data.kind", "data.file is mandatory for kind = file")
    try:
        parse_profile(cfg["data.profile"])
    except ValueError as exc:
        fail("data.profile", str(exc))
    md, mr = cfg["solver.mollify_delta"], cfg["solver.mollify_rho"]
    if (md is None) != (mr is None):
        fail("solver.mollify_delta", "mollify_delta and mollify_rho must be given together")
    if md is not None and not (0 < md <= 1 and mr >= 1):
        fail("solver.mollify_delta", "need 0 < mollify_delta <= 1 and mollify_rho >= 1")
    if not 0 < cfg["profile.sponge_start"] < cfg["profile.sponge_full"] < 1:
        fail("profile.sponge_start", "need 0 < profile.sponge_start < profile.sponge_full < 1")
    if cfg["norms.p"] < 1 or not 0 < cfg["norms.alpha"] < 1:
        fail("norms.p", "need norms.p >= 1 and 0 < norms.alpha < 1")
    A = cfg["sweep.A_values"]
    if any(b <= a for a, b in zip(A[:-1], A[1:])):
        fail("sweep.A_values", "sweep.A_values must increase strictly")
    fmts = {f.strip() for f in cfg["output.formats"].split(",") if f.strip()}
    if not fmts <= {"csv", "sqgf"}:
        fail("output.formats", "output.formats accepts csv and sqgf")
    if cfg["output.snapshot_every"] < 1:
        fail("output.snapshot_every", "output.snapshot_every must be >= 1")
