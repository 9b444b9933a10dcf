"""Command-line driver: configuration files and convergence studies.

Configuration grammar
---------------------
INI-style text read with :mod:`configparser`.  Sections and keys (all
optional; defaults in brackets)::

    [domain]
    kind = l_shape_with_hole        # | l_shape | square
    hole = -0.75 -0.75 -0.45 -0.45  # x0 y0 x1 y1 of the square hole

    [study]
    scheme = mixed                  # | galerkin
    scenario = mms                  # | physical | homogeneous
    levels = 1/16, 1/32, 1/64       # mesh sizes, strictly decreasing
    tau_factor = 2                  # tau = tau_factor * h
    tau =                           # fixed tau for every level (overrides the rule)
    T = 1
    element_order = 1               # 1: P2 / second-kind edges, 0: P1 / Whitney

    [model]
    eta = 1
    kappa = 1
    applied_field = 1               # H for the physical scenario

    [solver]
    newton_tol = 1e-10
    newton_maxit = 20
    linear_solver = splu            # | spsolve

    [output]
    dir = out
    deterministic = true
    errors = true
    energy = true
    vtk = false
    vtk_stride = 0                  # 0: final state only

Values may be fractions such as ``1/32``.  Unknown sections or keys are
rejected.  Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np

from .fe_spaces import FeSystem
from .mesh import DomainSpec, MeshError, build_domain

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


class ConfigError(ValueError):
    """Invalid configuration text or values."""


@dataclass
class RunConfig:
    domain: str = "l_shape_with_hole"
    hole: Tuple[float, float, float, float] = (-0.75, -0.75, -0.45, -0.45)
    scheme: str = "mixed"
    scenario: str = "mms"
    levels: Tuple[float, ...] = (1 / 16, 1 / 32, 1 / 64)
    tau_factor: float = 2.0
    tau: Optional[float] = None
    T: float = 1.0
    element_order: int = 1
    eta: float = 1.0
    kappa: float = 1.0
    applied_field: float = 1.0
    newton_tol: float = 1e-10
    newton_maxit: int = 20
    linear_solver: str = "splu"
    out_dir: str = "out"
    deterministic: bool = True
    errors: bool = True
    energy: bool = True
    vtk: bool = False
    vtk_stride: int = 0

    def tau_at(self, h: float) -> float:
        return self.tau if self.tau is not None else self.tau_factor * h

    def validate(self) -> "RunConfig":
        def bad(name, msg):
            raise ConfigError(f"{name}: {msg}")

        if self.domain not in ("l_shape_with_hole", "l_shape", "square"):
            bad("domain.kind", f"unknown domain {self.domain!r}")
        if self.scheme not in ("mixed", "galerkin"):
            bad("study.scheme", f"unknown scheme {self.scheme!r}")
        if self.scenario not in ("mms", "physical", "homogeneous"):
            bad("study.scenario", f"unknown scenario {self.scenario!r}")
        if not self.levels:
            bad("study.levels", "at least one level is required")
        if any(h <= 0 for h in self.levels):
            bad("study.levels", "mesh sizes must be positive")
        if any(b >= a for a, b in zip(self.levels, self.levels[1:])):
            bad("study.levels", "mesh sizes must be strictly decreasing")
        if self.element_order not in (0, 1):
            bad("study.element_order", "must be 0 or 1")
        if not (self.eta > 0):
            bad("model.eta", "must be positive")
        if not (self.kappa > 0):
            bad("model.kappa", "must be positive")
        if not (self.T > 0):
            bad("study.T", "must be positive")
        if self.tau is None and not self.tau_factor > 0:
            bad("study.tau_factor", "must be positive")
        for h in self.levels:
            tau = self.tau_at(h)
            if not tau > 0:
                bad("study.tau", "must be positive")
            if not tau < self.eta:
                bad("study.tau_factor" if self.tau is None else "study.tau",
                    f"tau = {tau:g} at h = {h:g} violates tau < eta = {self.eta:g}")
        if not (0 < self.newton_tol <= 1e-6):
            bad("solver.newton_tol", "must lie in (0, 1e-6]")
        if self.newton_maxit < 1:
            bad("solver.newton_maxit", "must be at least 1")
        if self.linear_solver not in ("splu", "spsolve"):
            bad("solver.linear_solver", f"unknown solver {self.linear_solver!r}")
        if self.vtk_stride < 0:
            bad("output.vtk_stride", "must be non-negative")
        if self.scheme == "galerkin" and self.scenario != "mms":
            bad("study.scenario", "the galerkin comparator only runs the mms scenario")
        if self.domain == "l_shape_with_hole":
            try:
                self.domain_spec(self.levels[0]).validate()
            except MeshError as exc:
                bad("domain.hole", str(exc))
        return self

    def domain_spec(self, h: float) -> DomainSpec:
        (x0, y0, x1, y1) = self.hole
        return DomainSpec(kind=self.domain, hole=((x0, y0), (x1, y1)), target_h=h)


# (section, key) -> (field name, kind)
_SCHEMA = {
    ("domain", "kind"): ("domain", "str"),
    ("domain", "hole"): ("hole", "hole"),
    ("study", "scheme"): ("scheme", "str"),
    ("study", "scenario"): ("scenario", "str"),
    ("study", "levels"): ("levels", "levels"),
    ("study", "tau_factor"): ("tau_factor", "float"),
    ("study", "tau"): ("tau", "optfloat"),
    ("study", "t"): ("T", "float"),
    ("study", "element_order"): ("element_order", "int"),
    ("model", "eta"): ("eta", "float"),
    ("model", "kappa"): ("kappa", "float"),
    ("model", "applied_field"): ("applied_field", "float"),
    ("solver", "newton_tol"): ("newton_tol", "float"),
    ("solver", "newton_maxit"): ("newton_maxit", "int"),
    ("solver", "linear_solver"): ("linear_solver", "str"),
    ("output", "dir"): ("out_dir", "str"),
    ("output", "deterministic"): ("deterministic", "bool"),
    ("output", "errors"): ("errors", "bool"),
    ("output", "energy"): ("energy", "bool"),
    ("output", "vtk"): ("vtk", "bool"),
    ("output", "vtk_stride"): ("vtk_stride", "int"),
}
_BOOLS = {"true": True, "yes": True, "on": True, "1": True,
          "false": False, "no": False, "off": False, "0": False}


def _number(text: str) -> float:
    return float(Fraction(text.strip()))


def _convert(kind: str, text: str):
    text = text.strip()
    if kind == "str":
        return text
    if kind == "float":
        return _number(text)
    if kind == "optfloat":
        return None if text == "" else _number(text)
    if kind == "int":
        return int(text)
    if kind == "bool":
        if text.lower() not in _BOOLS:
            raise ValueError(f"not a boolean: {text!r}")
        return _BOOLS[text.lower()]
    if kind == "levels":
        vals = tuple(_number(v) for v in text.replace(",", " ").split())
        if not vals:
            raise ValueError("empty list")
        return vals
    if kind == "hole":
        vals = tuple(_number(v) for v in text.replace(",", " ").split())
        if len(vals) != 4:
            raise ValueError("expected four numbers x0 y0 x1 y1")
        return vals
    raise AssertionError(kind)


def _key_lines(text: str) -> dict:
    """Map (section, key) to the 1-based line where the key is set."""
    out, section = {}, None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
        elif section is not None:
            for sep in ("=", ":"):
                if sep in line:
                    out.setdefault((section, line.split(sep, 1)[0].strip().lower()), i)
                    break
    return out


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                       interpolation=None, default_section="__none__")
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"line {exc.lineno}: key outside of any [section]") from None
    except configparser.ParsingError as exc:
        lines = ", ".join(str(n) for n, _ in exc.errors)
        raise ConfigError(f"line {lines}: malformed line") from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(f"line {exc.lineno}: {exc.message if hasattr(exc, 'message') else exc}") from None
    lines = _key_lines(text)
    values = {}
    sections = {s for s, _ in _SCHEMA}
    for section in parser.sections():
        if section.lower() not in sections:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            where = lines.get((section.lower(), key), "?")
            spec = _SCHEMA.get((section.lower(), key))
            if spec is None:
                raise ConfigError(f"line {where}: unknown key {key!r} in [{section}]")
            name, kind = spec
            try:
                values[name] = _convert(kind, raw)
            except (ValueError, ZeroDivisionError) as exc:
                raise ConfigError(f"line {where}: {section}.{key}: {exc}") from None
    return RunConfig(**values).validate()


def serialize_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config` (floats written with ``repr``)."""
    by_section = {}
    for (section, key), (name, kind) in _SCHEMA.items():
        v = getattr(cfg, name)
        if kind in ("levels", "hole"):
            text = " ".join(repr(float(x)) for x in v)
        elif kind == "bool":
            text = "true" if v else "false"
        elif kind == "optfloat":
            text = "" if v is None else repr(float(v))
        elif kind == "float":
            text = repr(float(v))
        else:
            text = str(v)
        by_section.setdefault(section, []).append(f"{'T' if key == 't' else key} = {text}")
    return "\n\n".join(f"[{s}]\n" + "\n".join(kv) for s, kv in by_section.items()) + "\n"


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------------------
# study


@dataclass
class LevelResult:
    level: int
    h: float
    tau: float
    errors: Optional[object] = None  # mms.ErrorRow
    energy: Optional[object] = None  # tdgl.EnergyTrace
    newton_max: int = 0
    gauge_defect: float = float("nan")
    psi_sup: float = float("nan")
    energy_margin: float = float("nan")


def _scenario(cfg: RunConfig):
    """(initial data, sources, exact solution or None)."""
    from .mms import ManufacturedSolution
    from .sources import UniformField, ZeroSources
    from .tdgl import InitialData

    if cfg.scenario == "mms":
        ex = ManufacturedSolution(cfg.eta, cfg.kappa)
        return ex.initial_data(), ex, ex
    if cfg.scenario == "physical":
        return InitialData(psi=lambda x, y: np.ones_like(x)), UniformField(cfg.applied_field), None
    # homogeneous: no field, no sources, a uniform subcritical order parameter
    return InitialData(psi=lambda x, y: np.full_like(x, 0.5)), ZeroSources(), None


def run_level(cfg: RunConfig, level: int) -> LevelResult:
    """Run one mesh level of a study and write its per-level files."""
    from .io import write_state_vtk
    from .tdgl import SolverConfig, SolverError, run

    h = cfg.levels[level]
    tau = cfg.tau_at(h)
    mesh = build_domain(cfg.domain_spec(h))
    fe = FeSystem(mesh, cfg.element_order)
    scfg = SolverConfig(cfg.eta, cfg.kappa, tau, cfg.T, cfg.newton_tol, cfg.newton_maxit,
                        cfg.linear_solver)
    initial, sources, exact = _scenario(cfg)
    res = LevelResult(level, mesh.h, tau)
    tag = f"{cfg.scheme}_level{level}"

    if cfg.scheme == "galerkin":
        from .baseline import galerkin_run

        traj = galerkin_run(fe, scfg, initial, sources, exact)
        res.errors = traj.errors
        res.newton_max = max(traj.newton_iterations, default=0)
        res.psi_sup = float(np.abs(traj.final.psi).max())
        return res

    def snapshot(new, old):
        if cfg.vtk and cfg.vtk_stride > 0 and new.n % cfg.vtk_stride == 0:
            write_state_vtk(os.path.join(cfg.out_dir, f"{tag}_step{new.n:05d}.vtk"), fe, new)

    traj = run(fe, scfg, initial, sources, energy=cfg.energy, callback=snapshot)
    if exact is not None:
        from .mms import error_norms

        res.errors = error_norms(fe, traj.final, exact, traj.final.t, tau)
    res.newton_max = max(traj.newton_iterations, default=0)
    res.gauge_defect = max(traj.gauge_defect, default=0.0)
    res.psi_sup = max(traj.psi_sup)
    if cfg.energy:
        res.energy = traj.energy
        traj.energy.write_csv(os.path.join(cfg.out_dir, f"energy_{tag}.csv"))
        if exact is None:
            margin = traj.energy.step_inequality_margin(tau, cfg.eta, cfg.kappa)
            res.energy_margin = float(margin.min(initial=np.inf))
            if res.energy_margin < 0:
                raise SolverError(
                    f"energy step inequality violated at level {level} "
                    f"(margin {res.energy_margin:.3e})"
                )
    if cfg.vtk:
        write_state_vtk(os.path.join(cfg.out_dir, f"{tag}_final.vtk"), fe, traj.final)
    return res


def run_study(cfg: RunConfig) -> List[LevelResult]:
    """Run every level and write the error table and a diagnostics table."""
    from .mms import ErrorTable

    cfg.validate()
    os.makedirs(cfg.out_dir, exist_ok=True)
    n = len(cfg.levels)
    if cfg.deterministic or n == 1:
        results = [run_level(cfg, i) for i in range(n)]
    else:
        with ProcessPoolExecutor(max_workers=min(n, os.cpu_count() or 1)) as pool:
            results = list(pool.map(run_level, [cfg] * n, range(n)))

    if cfg.errors and cfg.scenario == "mms":
        ErrorTable(cfg.scheme, [r.errors for r in results]).write_csv(
            os.path.join(cfg.out_dir, f"errors_{cfg.scheme}.csv"))
    with open(os.path.join(cfg.out_dir, f"diagnostics_{cfg.scheme}.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "h", "tau", "newton_max", "gauge_defect", "psi_sup", "energy_margin"])
        for r in results:
            w.writerow([r.level, f"{r.h:.12e}", f"{r.tau:.12e}", r.newton_max,
                        f"{r.gauge_defect:.6e}", f"{r.psi_sup:.12e}", f"{r.energy_margin:.6e}"])
    return results


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tdglfem", description="Ginzburg-Landau mixed FEM studies")
    p.add_argument("--config", metavar="PATH", help="INI configuration file")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides [output] dir)")
    p.add_argument("--deterministic", action="store_true",
                   help="run levels sequentially in one process")
    p.add_argument("--levels", type=int, metavar="N",
                   help="use the first N levels (extended by halving h if N exceeds the list)")
    p.add_argument("--scheme", choices=("mixed", "galerkin"))
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    from .tdgl import SolverError

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        changes = {}
        if args.out:
            changes["out_dir"] = args.out
        if args.deterministic:
            changes["deterministic"] = True
        if args.scheme:
            changes["scheme"] = args.scheme
        if args.levels is not None:
            if args.levels < 1:
                raise ConfigError("--levels must be at least 1")
            lv = list(cfg.levels[: args.levels])
            while len(lv) < args.levels:
                lv.append(lv[-1] / 2)
            changes["levels"] = tuple(lv)
        cfg = dataclasses.replace(cfg, **changes).validate()
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        results = run_study(cfg)
    except (SolverError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for r in results:
        line = f"level {r.level}: h = {r.h:.5g}, tau = {r.tau:.5g}, newton <= {r.newton_max}"
        if r.errors is not None:
            line += "  errors " + " ".join(f"{v:.3e}" for v in r.errors.values())
        print(line)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
