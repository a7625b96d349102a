"""Command-line front end: config ingestion, check orchestration, reports.

Commands map onto the library layers: ``elliptic-check`` exercises the
theta-function kernels, ``describe-algebra`` the root-system tables,
``commute-check`` the family of transfer operators, ``bethe-solve`` and
``eigen-check`` the Bethe ansatz layer, and ``full-verify`` chains all of
them.  Runs are deterministic for a fixed config and seed; reports can be
emitted as human-readable text, JSON lines (byte-stable) or CSV.
"""

from __future__ import annotations

import argparse
import cmath
import configparser
import csv
import hashlib
import io
import json
import math
import os
import re
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .bethe import BetheError, BetheSystem, root_multiplicities
from .elliptic import (
    EllipticError,
    ModularData,
    theta11,
    w_kernel,
    zeta11,
)
from .gaudin import (
    GaudinError,
    GaudinProblem,
    commutativity_residual,
    sample_regular_cartan,
    sample_spectral_points,
)
from .liealg import (
    LieAlgebraError,
    build_dual_verma,
    build_irrep,
    build_root_system,
    normalized_form,
)

TWO_PI_I = 2j * math.pi

COMMANDS = (
    "elliptic-check",
    "describe-algebra",
    "commute-check",
    "bethe-solve",
    "eigen-check",
    "full-verify",
)

FORMATS = ("human-text", "json-lines", "csv")


class ConfigError(ValueError):
    """Unusable configuration: parse failure or violated constraint."""


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

TOLERANCE_DEFAULTS = {
    "elliptic_identities": 1e-10,
    "pole_normalization": 1e-8,
    "jets": 1e-6,
    "commutator": 1e-8,
    "commutator_top_order": 1e-12,
    "structure": 1e-12,
    "eigen_residual": 1e-7,
}

SAMPLING_DEFAULTS = {
    "elliptic_points": 100,
    "jet_points": 5,
    "cartan_count": 5,
    "u_count": 5,
    "pair_count": 20,
    "box": 0.8,
    "pole_guard": 0.05,
    "sweep_points": 100,
}

BETHE_DEFAULTS = {
    "assignment": "auto",
    "n_seeds": 32,
    "newton_tol": 1e-12,
    "max_iter": 200,
    "max_solutions": 4,
}

_SECTION_KEYS = {
    "algebra": {"series", "rank"},
    "elliptic": {"tau"},
    "sites": None,  # validated separately (numbered keys)
    "bethe": set(BETHE_DEFAULTS),
    "tolerances": set(TOLERANCE_DEFAULTS),
    "sampling": set(SAMPLING_DEFAULTS),
    "rng": {"seed"},
}


def parse_complex(text: str) -> complex:
    """Parse ``a+bi`` style literals (plain reals and ``0.8i`` included)."""
    compact = re.sub(r"\s*([+-])\s*", r"\1", text.strip().lower())
    compact = re.sub(r"\s+i$", "i", compact)
    if not compact:
        raise ConfigError("empty complex literal")
    if re.search(r"\s", compact):
        raise ConfigError(f"invalid complex literal {text!r}")
    try:
        value = complex(compact.replace("i", "j"))
    except ValueError:
        raise ConfigError(
            f"invalid complex literal {text!r}; expected forms like "
            "1.5, -0.3i or 0.25+0.8i"
        ) from None
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise ConfigError(f"non-finite complex literal {text!r}")
    return value


def format_complex(z: complex) -> str:
    """Canonical ``a+bi`` rendering with full float precision."""
    z = complex(z)
    if z.imag == 0:
        return repr(z.real)
    sign = "+" if z.imag >= 0 else "-"
    return f"{z.real!r}{sign}{abs(z.imag)!r}i"


@dataclass
class SiteSpec:
    z: complex
    kind: str  # "irrep" | "dual_verma"
    weight: tuple  # coefficients in the fundamental-weight basis
    depth: int | None = None


@dataclass
class ExperimentConfig:
    path: str
    series: str = "A"
    rank: int = 1
    tau: complex | None = None
    sites: list = field(default_factory=list)
    bethe: dict | None = None
    tolerances: dict = field(default_factory=dict)
    sampling: dict = field(default_factory=dict)
    seed: int = 0

    def echo_lines(self):
        """Effective settings, defaults materialized, in a fixed order."""
        lines = [
            f"algebra.series = {self.series}",
            f"algebra.rank = {self.rank}",
        ]
        if self.tau is not None:
            lines.append(f"elliptic.tau = {format_complex(self.tau)}")
        if self.sites:
            lines.append(f"sites.count = {len(self.sites)}")
            for k, site in enumerate(self.sites, start=1):
                lines.append(f"sites.z_{k} = {format_complex(site.z)}")
                lines.append(f"sites.kind_{k} = {site.kind}")
                weight = ", ".join(format_complex(w) for w in site.weight)
                lines.append(f"sites.weight_{k} = {weight}")
                if site.depth is not None:
                    lines.append(f"sites.depth_{k} = {site.depth}")
        if self.bethe is not None:
            assignment = self.bethe["assignment"]
            if assignment != "auto":
                assignment = ", ".join(str(i) for i in assignment)
            lines.append(f"bethe.assignment = {assignment}")
            lines.append(f"bethe.n_seeds = {self.bethe['n_seeds']}")
            lines.append(f"bethe.newton_tol = {self.bethe['newton_tol']!r}")
            lines.append(f"bethe.max_iter = {self.bethe['max_iter']}")
            lines.append(
                f"bethe.max_solutions = {self.bethe['max_solutions']}"
            )
        for key in sorted(self.tolerances):
            lines.append(f"tolerances.{key} = {self.tolerances[key]!r}")
        for key in sorted(self.sampling):
            lines.append(f"sampling.{key} = {self.sampling[key]!r}")
        lines.append(f"rng.seed = {self.seed}")
        return lines


def _lattice_distance(a: complex, b: complex, tau: complex) -> float:
    """Distance between a and b modulo the lattice Z + Z*tau."""
    d = a - b
    # Reduce to the neighbourhood of the origin before scanning translates.
    n = round(d.imag / tau.imag)
    d -= n * tau
    d -= round(d.real)
    return min(
        abs(d - m - k * tau) for m in (-1, 0, 1) for k in (-1, 0, 1)
    )


def _parse_int(section: str, key: str, raw: str, minimum: int | None = None):
    try:
        value = int(raw.strip())
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not an integer") from None
    if minimum is not None and value < minimum:
        raise ConfigError(f"[{section}] {key} must be >= {minimum}, got {value}")
    return value


def _parse_float(section: str, key: str, raw: str) -> float:
    try:
        value = float(raw.strip())
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from None
    if not math.isfinite(value) or value <= 0:
        raise ConfigError(f"[{section}] {key} must be a positive finite number")
    return value


def _parse_sites(parser: configparser.ConfigParser, rank: int) -> list:
    section = parser["sites"]
    if "count" not in section:
        raise ConfigError("[sites] requires a count key")
    count = _parse_int("sites", "count", section["count"], minimum=1)
    allowed = {"count"}
    for k in range(1, count + 1):
        allowed.update({f"z_{k}", f"kind_{k}", f"weight_{k}", f"depth_{k}"})
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in section [sites]")
    sites = []
    for k in range(1, count + 1):
        for required in (f"z_{k}", f"kind_{k}", f"weight_{k}"):
            if required not in section:
                raise ConfigError(f"[sites] missing key {required}")
        z = parse_complex(section[f"z_{k}"])
        kind = section[f"kind_{k}"].strip()
        if kind not in ("irrep", "dual_verma"):
            raise ConfigError(
                f"[sites] kind_{k} must be irrep or dual_verma, got {kind!r}"
            )
        coeffs = [
            parse_complex(part)
            for part in section[f"weight_{k}"].split(",")
            if part.strip()
        ]
        if len(coeffs) != rank:
            raise ConfigError(
                f"[sites] weight_{k} needs {rank} fundamental-weight "
                f"coefficients, got {len(coeffs)}"
            )
        depth = None
        if kind == "irrep":
            if f"depth_{k}" in section:
                raise ConfigError(
                    f"[sites] depth_{k} is only meaningful for dual_verma sites"
                )
            ints = []
            for c in coeffs:
                n = round(c.real)
                if abs(c - n) > 1e-9 or n < 0:
                    raise ConfigError(
                        f"[sites] weight_{k} of an irrep site must be "
                        "non-negative integers"
                    )
                ints.append(n)
            coeffs = ints
        else:
            if f"depth_{k}" not in section:
                raise ConfigError(
                    f"[sites] dual_verma site {k} requires depth_{k}"
                )
            depth = _parse_int("sites", f"depth_{k}", section[f"depth_{k}"], 1)
        sites.append(SiteSpec(z=z, kind=kind, weight=tuple(coeffs), depth=depth))
    return sites


def _validate_bethe(cfg: ExperimentConfig) -> None:
    """Charge condition and module-kind requirements for Bethe workflows."""
    for k, site in enumerate(cfg.sites, start=1):
        if site.kind != "dual_verma":
            raise ConfigError(
                f"[bethe] requires dual_verma sites; site {k} is {site.kind}"
            )
    rs = build_root_system(cfg.series, cfg.rank)
    weights = [rs.weight_from_fundamental(site.weight) for site in cfg.sites]
    try:
        counts = root_multiplicities(rs, weights)
    except BetheError as exc:
        raise ConfigError(f"charge condition violated: {exc}") from None
    assignment = cfg.bethe["assignment"]
    if assignment != "auto":
        for i in assignment:
            if not 1 <= i <= cfg.rank:
                raise ConfigError(
                    f"[bethe] assignment label {i} outside 1..{cfg.rank}"
                )
        seen = [0] * cfg.rank
        for i in assignment:
            seen[i - 1] += 1
        if seen != [int(c) for c in counts]:
            raise ConfigError(
                "charge condition violated: assignment multiplicities "
                f"{seen} do not match the weight decomposition "
                f"{[int(c) for c in counts]}"
            )


def load_config(path: str) -> ExperimentConfig:
    """Parse and validate an experiment config, materializing defaults."""
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";")
    )
    try:
        with open(path, "r", encoding="utf-8") as handle:
            parser.read_file(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"parse error in {path!r}: {exc}") from None

    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        allowed = _SECTION_KEYS[section]
        if allowed is not None:
            for key in parser[section]:
                if key not in allowed:
                    raise ConfigError(
                        f"unknown key {key!r} in section [{section}]"
                    )

    cfg = ExperimentConfig(path=path)

    if parser.has_section("algebra"):
        algebra = parser["algebra"]
        cfg.series = algebra.get("series", "A").strip()
        if cfg.series != "A":
            raise ConfigError(
                f"unsupported algebra series {cfg.series!r}; only A is available"
            )
        cfg.rank = _parse_int("algebra", "rank", algebra.get("rank", "1"), 1)

    if parser.has_section("elliptic"):
        cfg.tau = parse_complex(parser["elliptic"].get("tau", "0.8i"))
        if cfg.tau.imag <= 0:
            raise ConfigError("elliptic.tau must have positive imaginary part")

    if parser.has_section("sites"):
        if cfg.tau is None:
            raise ConfigError("[sites] requires an [elliptic] section with tau")
        cfg.sites = _parse_sites(parser, cfg.rank)
        for a in range(len(cfg.sites)):
            for b in range(a + 1, len(cfg.sites)):
                dist = _lattice_distance(
                    cfg.sites[a].z, cfg.sites[b].z, cfg.tau
                )
                if dist < 1e-9:
                    raise ConfigError(
                        f"sites coincide mod lattice: z_{a + 1} = z_{b + 1}"
                    )

    if parser.has_section("bethe"):
        if not cfg.sites:
            raise ConfigError("[bethe] requires a [sites] section")
        section = parser["bethe"]
        bethe = dict(BETHE_DEFAULTS)
        if "assignment" in section:
            raw = section["assignment"].strip()
            if raw != "auto":
                try:
                    bethe["assignment"] = tuple(
                        int(part) for part in raw.replace(",", " ").split()
                    )
                except ValueError:
                    raise ConfigError(
                        f"[bethe] assignment = {raw!r}: expected 'auto' or "
                        "simple-root labels like '1, 1, 2'"
                    ) from None
        if "n_seeds" in section:
            bethe["n_seeds"] = _parse_int("bethe", "n_seeds", section["n_seeds"], 1)
        if "newton_tol" in section:
            bethe["newton_tol"] = _parse_float(
                "bethe", "newton_tol", section["newton_tol"]
            )
        if "max_iter" in section:
            bethe["max_iter"] = _parse_int("bethe", "max_iter", section["max_iter"], 1)
        if "max_solutions" in section:
            bethe["max_solutions"] = _parse_int(
                "bethe", "max_solutions", section["max_solutions"], 1
            )
        cfg.bethe = bethe
        _validate_bethe(cfg)

    cfg.tolerances = dict(TOLERANCE_DEFAULTS)
    if parser.has_section("tolerances"):
        for key, raw in parser["tolerances"].items():
            cfg.tolerances[key] = _parse_float("tolerances", key, raw)

    cfg.sampling = dict(SAMPLING_DEFAULTS)
    if parser.has_section("sampling"):
        for key, raw in parser["sampling"].items():
            if key in ("box", "pole_guard"):
                cfg.sampling[key] = _parse_float("sampling", key, raw)
            else:
                cfg.sampling[key] = _parse_int("sampling", key, raw, 1)

    if parser.has_section("rng"):
        cfg.seed = _parse_int("rng", "seed", parser["rng"].get("seed", "0"), 0)

    return cfg


# --------------------------------------------------------------------------
# report plumbing
# --------------------------------------------------------------------------


@dataclass
class CheckRecord:
    name: str
    instance: str
    residual: float
    tolerance: float
    passed: bool
    wall: float = 0.0
    note: str = ""


@dataclass
class Report:
    command: str
    instance: str
    echo_lines: list
    records: list = field(default_factory=list)
    sweep: list | None = None  # rows (u, Re tau_Psi, Im tau_Psi)

    @property
    def verdict(self) -> bool:
        return all(record.passed for record in self.records)

    def sorted_records(self):
        return sorted(self.records, key=lambda r: r.name)


def _instance_digest(cfg: ExperimentConfig, command: str, negative: bool) -> str:
    payload = "\n".join(
        [command, f"negative-control={negative}", *cfg.echo_lines()]
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


# --------------------------------------------------------------------------
# check runner
# --------------------------------------------------------------------------


def _pole_limit(f, steps=(1e-2, 3e-3, 1e-3, 3e-4)) -> complex:
    """Extrapolate h*f(h) to h = 0 (Neville, simple pole at the origin)."""
    hs = list(steps)
    g = [h * f(h) for h in hs]
    for j in range(1, len(hs)):
        for i in range(len(hs) - j):
            g[i] = g[i + 1] + (g[i + 1] - g[i]) * hs[i + j] / (hs[i] - hs[i + j])
    return g[0]


def _fd1(f, x: complex, h: float = 1e-5) -> complex:
    return (f(x + h) - f(x - h)) / (2 * h)


def _fd2(f, x: complex, h: float = 1e-4) -> complex:
    return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h)


def _rel(value: complex, reference: complex, floor: float = 1e-30) -> float:
    return abs(value - reference) / max(abs(reference), floor)


class CheckRunner:
    """Executes the per-command check stages against one config."""

    def __init__(self, cfg: ExperimentConfig, command: str, negative: bool):
        self.cfg = cfg
        self.command = command
        self.negative = negative
        self.rng = np.random.default_rng(cfg.seed)
        self.report = Report(
            command=command,
            instance=_instance_digest(cfg, command, negative),
            echo_lines=cfg.echo_lines(),
        )
        self._rs = None
        self._md = None
        self._problem = None
        self._system = None
        self._solutions = None

    # -- shared lazy builders ------------------------------------------------

    @property
    def rs(self):
        if self._rs is None:
            self._rs = build_root_system(self.cfg.series, self.cfg.rank)
        return self._rs

    @property
    def md(self):
        if self._md is None:
            if self.cfg.tau is None:
                raise ConfigError(
                    f"command {self.command} requires an [elliptic] section"
                )
            self._md = ModularData(self.cfg.tau)
        return self._md

    @property
    def problem(self):
        if self._problem is None:
            if not self.cfg.sites:
                raise ConfigError(
                    f"command {self.command} requires a [sites] section"
                )
            modules = []
            for site in self.cfg.sites:
                lam = self.rs.weight_from_fundamental(site.weight)
                if site.kind == "irrep":
                    modules.append(build_irrep(self.rs, lam))
                else:
                    modules.append(build_dual_verma(self.rs, lam, site.depth))
            self._problem = GaudinProblem(
                self.rs,
                self.md,
                [site.z for site in self.cfg.sites],
                modules,
                pole_guard=min(self.cfg.sampling["pole_guard"], 1e-2),
            )
        return self._problem

    @property
    def system(self):
        if self._system is None:
            if self.cfg.bethe is None:
                raise ConfigError(
                    f"command {self.command} requires a [bethe] section"
                )
            assignment = self.cfg.bethe["assignment"]
            self._system = BetheSystem(
                self.problem,
                assignment=None if assignment == "auto" else tuple(
                    i - 1 for i in assignment
                ),
            )
        return self._system

    # -- record helpers -------------------------------------------------------

    def _record(self, name, residual, tolerance, wall, note="", passed=None):
        residual = float(residual)
        if passed is None:
            passed = residual <= tolerance
        self.report.records.append(
            CheckRecord(
                name=name,
                instance=self.report.instance,
                residual=residual,
                tolerance=float(tolerance),
                passed=bool(passed),
                wall=wall,
                note=note,
            )
        )

    def _stage(self, name, fn):
        """Run one stage; failures become failing records, not aborts."""
        start = time.perf_counter()
        try:
            fn(start)
        except ConfigError:
            raise
        except (EllipticError, LieAlgebraError, GaudinError, BetheError,
                ValueError, ArithmeticError) as exc:
            self._record(
                f"{name}/error",
                math.inf,
                0.0,
                time.perf_counter() - start,
                note=f"{type(exc).__name__}: {exc}",
                passed=False,
            )

    # -- sampling helpers ------------------------------------------------------

    def _cell_points(self, count: int):
        """Points x + y*tau with x, y uniform away from the cell boundary."""
        guard = self.cfg.sampling["pole_guard"]
        lo, hi = max(guard, 0.05), 1 - max(guard, 0.05)
        xs = self.rng.uniform(lo, hi, size=count)
        ys = self.rng.uniform(lo, hi, size=count)
        return [complex(x) + complex(y) * self.md.tau for x, y in zip(xs, ys)]

    # -- stages ----------------------------------------------------------------

    def stage_elliptic(self, start):
        md = self.md
        tol_id = self.cfg.tolerances["elliptic_identities"]
        tol_pole = self.cfg.tolerances["pole_normalization"]
        tol_jets = self.cfg.tolerances["jets"]
        n = self.cfg.sampling["elliptic_points"]
        zs = self._cell_points(n)
        cs = self._cell_points(n)

        worst = {
            "theta-period-1": 0.0,
            "theta-period-tau": 0.0,
            "zeta-period-1": 0.0,
            "zeta-period-tau": 0.0,
            "w-period-1": 0.0,
            "w-period-tau": 0.0,
        }
        for z, c in zip(zs, cs):
            th = theta11(z, md).value
            worst["theta-period-1"] = max(
                worst["theta-period-1"], _rel(theta11(z + 1, md).value, -th)
            )
            factor = -cmath.exp(-1j * math.pi * md.tau - TWO_PI_I * z)
            worst["theta-period-tau"] = max(
                worst["theta-period-tau"],
                _rel(theta11(z + md.tau, md).value, factor * th),
            )
            ze = zeta11(z, md).value
            worst["zeta-period-1"] = max(
                worst["zeta-period-1"], _rel(zeta11(z + 1, md).value, ze)
            )
            worst["zeta-period-tau"] = max(
                worst["zeta-period-tau"],
                abs(zeta11(z + md.tau, md).value - (ze - TWO_PI_I))
                / abs(TWO_PI_I),
            )
            wv = w_kernel(c, z, md).value
            worst["w-period-1"] = max(
                worst["w-period-1"], _rel(w_kernel(c, z + 1, md).value, wv)
            )
            worst["w-period-tau"] = max(
                worst["w-period-tau"],
                _rel(
                    w_kernel(c, z + md.tau, md).value,
                    cmath.exp(TWO_PI_I * c) * wv,
                ),
            )
        for key in sorted(worst):
            self._record(
                f"elliptic/{key}",
                worst[key],
                tol_id,
                time.perf_counter() - start,
                note=f"max over {n} points",
            )

        # Pole normalizations: z*zeta -> 1, z*w_c(z) -> 1, c*w_c(z) -> -1,
        # each extrapolated to the pole through a decreasing step sequence.
        c0 = cs[0]
        pole_res = max(
            abs(_pole_limit(lambda h: zeta11(h, md).value) - 1),
            abs(_pole_limit(lambda h: w_kernel(c0, h, md).value) - 1),
            abs(_pole_limit(lambda h: w_kernel(h, zs[0], md).value) + 1),
        )
        self._record(
            "elliptic/pole-normalization",
            pole_res,
            tol_pole,
            time.perf_counter() - start,
            note="z*zeta(z)->1, z*w_c(z)->1, c*w_c(z)->-1 extrapolated",
        )

        jet_res = 0.0
        for z, c in zip(zs[: self.cfg.sampling["jet_points"]], cs):
            jz = zeta11(z, md, order=2)
            jet_res = max(
                jet_res,
                _rel(jz.deriv((1,)), _fd1(lambda x: zeta11(x, md).value, z)),
                _rel(jz.deriv((2,)), _fd2(lambda x: zeta11(x, md).value, z)),
            )
            jw = w_kernel(c, z, md, order_c=2, order_z=2)
            jet_res = max(
                jet_res,
                _rel(
                    jw.deriv((1, 0)),
                    _fd1(lambda x: w_kernel(x, z, md).value, c),
                ),
                _rel(
                    jw.deriv((0, 1)),
                    _fd1(lambda x: w_kernel(c, x, md).value, z),
                ),
                _rel(
                    jw.deriv((1, 1)),
                    _fd1(
                        lambda x: _fd1(
                            lambda y: w_kernel(x, y, md).value, z
                        ),
                        c,
                    ),
                ),
                _rel(
                    jw.deriv((2, 0)),
                    _fd2(lambda x: w_kernel(x, z, md).value, c),
                ),
                _rel(
                    jw.deriv((0, 2)),
                    _fd2(lambda x: w_kernel(c, x, md).value, z),
                ),
            )
        self._record(
            "elliptic/jets-vs-finite-differences",
            jet_res,
            tol_jets,
            time.perf_counter() - start,
            note=f"zeta and w jets at {self.cfg.sampling['jet_points']} points",
        )

    def stage_algebra(self, start):
        rs = self.rs
        tol = self.cfg.tolerances["structure"]
        ortho = 0.0
        for r in range(rs.rank):
            for s in range(rs.rank):
                val = normalized_form(rs.h_ortho[r], rs.h_ortho[s], rs)
                ortho = max(ortho, abs(val - (1.0 if r == s else 0.0)))
        self._record(
            "algebra/cartan-orthonormal",
            ortho,
            tol,
            time.perf_counter() - start,
            note="normalized invariant form on the orthonormal Cartan basis",
        )
        rho_res = float(
            np.max(
                np.abs(rs.rho - 0.5 * np.sum(np.asarray(rs.positive_roots), axis=0))
            )
        )
        self._record(
            "algebra/rho-half-sum",
            rho_res,
            tol,
            time.perf_counter() - start,
            note="rho equals half the sum of positive roots",
        )
        dim_res = abs(rs.dim_g - (rs.rank + 2 * rs.n_positive))
        self._record(
            "algebra/dimension-count",
            float(dim_res),
            0.5,
            time.perf_counter() - start,
            note=(
                f"series {rs.series} rank {rs.rank}: dim {rs.dim_g}, "
                f"{rs.n_positive} positive roots"
            ),
        )

    def stage_commute(self, start):
        problem = self.problem
        tol = self.cfg.tolerances["commutator"]
        tol_top = self.cfg.tolerances["commutator_top_order"]
        sampling = self.cfg.sampling
        h_points = sample_regular_cartan(
            self.rs,
            self.md,
            self.rng,
            sampling["cartan_count"],
            box=sampling["box"],
            guard=sampling["pole_guard"],
        )
        n_pairs = sampling["pair_count"]
        us = sample_spectral_points(
            self.md,
            problem.positions,
            self.rng,
            2 * n_pairs + 1,
            guard=sampling["pole_guard"],
        )
        same = commutativity_residual(problem, us[0], us[0], h_points)
        self._record(
            "commute/same-point",
            same["max_rel"],
            tol,
            time.perf_counter() - start,
            note="u' = u, trivially commuting",
        )
        worst = 0.0
        worst_top = 0.0
        for k in range(n_pairs):
            res = commutativity_residual(
                problem, us[1 + 2 * k], us[2 + 2 * k], h_points
            )
            worst = max(worst, res["max_rel"])
            worst_top = max(
                worst_top, res["max_abs_order3"], res["max_abs_order4"]
            )
        self._record(
            "commute/distinct-points",
            worst,
            tol,
            time.perf_counter() - start,
            note=f"max over {n_pairs} spectral-parameter pairs",
        )
        self._record(
            "commute/top-order-coefficients",
            worst_top,
            tol_top,
            time.perf_counter() - start,
            note="order-3 and order-4 coefficients of the commutator",
        )

    def stage_bethe(self, start):
        system = self.system
        bcfg = self.cfg.bethe
        if system.M == 0:
            self._solutions = [np.zeros(0, dtype=complex)]
            self._record(
                "bethe/root-residual-00",
                0.0,
                bcfg["newton_tol"],
                time.perf_counter() - start,
                note="no Bethe roots required (zero total charge)",
            )
            return
        sols = system.solve(
            n_seeds=bcfg["n_seeds"],
            tol=bcfg["newton_tol"],
            max_iter=bcfg["max_iter"],
            guard=self.cfg.sampling["pole_guard"],
        )
        if not sols:
            self._solutions = []
            self._record(
                "bethe/no-solution",
                math.inf,
                bcfg["newton_tol"],
                time.perf_counter() - start,
                note=f"no Bethe roots found from {bcfg['n_seeds']} seeds",
                passed=False,
            )
            return
        self._solutions = [sol.t for sol in sols[: bcfg["max_solutions"]]]
        for idx, sol in enumerate(sols[: bcfg["max_solutions"]]):
            roots = ", ".join(format_complex(t) for t in sol.t)
            self._record(
                f"bethe/root-residual-{idx:02d}",
                sol.residual,
                bcfg["newton_tol"],
                time.perf_counter() - start,
                note=f"t = ({roots}); {sol.iterations} Newton steps",
            )

    def stage_eigen(self, start):
        system = self.system
        if self._solutions is None:
            self.stage_bethe(start)
        if not self._solutions:
            return  # bethe stage already recorded the failure
        tol = self.cfg.tolerances["eigen_residual"]
        sampling = self.cfg.sampling
        for idx, t in enumerate(self._solutions):
            roots = np.array(t, dtype=complex)
            note = ""
            if self.negative:
                if roots.size == 0:
                    raise ConfigError(
                        "--negative-control requires at least one Bethe root"
                    )
                roots = roots.copy()
                roots[0] += 1e-3
                note = "roots deliberately perturbed by 1e-3 (negative control)"
            h_points = sample_regular_cartan(
                self.rs,
                self.md,
                self.rng,
                sampling["cartan_count"],
                box=sampling["box"],
                guard=sampling["pole_guard"],
            )
            avoid = list(self.problem.positions) + list(roots)
            u_points = sample_spectral_points(
                self.md,
                avoid,
                self.rng,
                sampling["u_count"],
                guard=sampling["pole_guard"],
            )
            result = system.verify_eigenvector(roots, h_points, u_points)
            if result["status"] == "inconclusive":
                self._record(
                    f"eigen/residual-{idx:02d}",
                    0.0,
                    tol,
                    time.perf_counter() - start,
                    note="inconclusive: eigenvector vanished at all samples",
                )
                continue
            self._record(
                f"eigen/residual-{idx:02d}",
                result["max_rel"],
                tol,
                time.perf_counter() - start,
                note=note
                or (
                    f"max over {sampling['cartan_count']} Cartan x "
                    f"{sampling['u_count']} spectral samples"
                ),
            )
        self._build_sweep()

    def _build_sweep(self):
        """Eigenvalue sweep over a monotone grid of spectral parameters."""
        if not self._solutions:
            return
        t = np.array(self._solutions[0], dtype=complex)
        n = self.cfg.sampling["sweep_points"]
        guard = self.cfg.sampling["pole_guard"]
        poles = list(self.problem.positions) + list(t)
        tau = self.md.tau
        offset = None
        for step in range(40):
            y = 0.29 + 0.017 * step
            candidate = [
                complex((k + 0.5) / n) + y * tau for k in range(n)
            ]
            if all(
                min(_lattice_distance(u, p, tau) for p in poles) >= guard
                for u in candidate
            ):
                offset = candidate
                break
        if offset is None:
            return
        rows = []
        for u in offset:
            value = self.system.eigenvalue(t, u)
            rows.append((u, value.real, value.imag))
        self.report.sweep = rows

    # -- dispatch ---------------------------------------------------------------

    def run(self) -> Report:
        stages = {
            "elliptic-check": [("elliptic", self.stage_elliptic)],
            "describe-algebra": [("algebra", self.stage_algebra)],
            "commute-check": [("commute", self.stage_commute)],
            "bethe-solve": [("bethe", self.stage_bethe)],
            "eigen-check": [("bethe", self.stage_bethe), ("eigen", self.stage_eigen)],
        }
        if self.command in stages:
            plan = stages[self.command]
        else:  # full-verify
            plan = [
                ("elliptic", self.stage_elliptic),
                ("algebra", self.stage_algebra),
            ]
            if self.cfg.sites:
                plan.append(("commute", self.stage_commute))
            if self.cfg.bethe is not None:
                plan.append(("bethe", self.stage_bethe))
                plan.append(("eigen", self.stage_eigen))
        # Touch required inputs up front so misconfigurations surface as
        # config errors (exit 2) rather than failing check records.
        needs_sites = any(name in ("commute", "bethe", "eigen") for name, _ in plan)
        needs_bethe = any(name in ("bethe", "eigen") for name, _ in plan)
        if self.command != "full-verify":
            if self.command == "elliptic-check":
                _ = self.md
            if needs_sites:
                _ = self.problem
            if needs_bethe:
                _ = self.system
        if self.negative and not needs_bethe:
            raise ConfigError(
                "--negative-control only applies to eigen-check or full-verify "
                "with a [bethe] section"
            )
        for _, fn in plan:
            self._stage(_, fn)
        return self.report


def run(command: str, cfg: ExperimentConfig, negative_control: bool = False) -> Report:
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    return CheckRunner(cfg, command, negative_control).run()


# --------------------------------------------------------------------------
# emission
# --------------------------------------------------------------------------


def render_text(report: Report) -> str:
    out = io.StringIO()
    out.write(f"ellgaudin {report.command}\n")
    out.write(f"instance {report.instance}\n")
    out.write("config:\n")
    for line in report.echo_lines:
        out.write(f"  {line}\n")
    out.write("checks:\n")
    records = report.sorted_records()
    if not records:
        out.write("  (none)\n")
    for rec in records:
        status = "PASS" if rec.passed else "FAIL"
        out.write(
            f"  {status} {rec.name}  residual={rec.residual:.3e}  "
            f"tolerance={rec.tolerance:.3e}  wall={rec.wall:.2f}s\n"
        )
        if rec.note:
            out.write(f"       {rec.note}\n")
    n_pass = sum(1 for rec in records if rec.passed)
    verdict = "PASS" if report.verdict else "FAIL"
    out.write(f"verdict: {verdict} ({n_pass}/{len(records)} checks)\n")
    return out.getvalue()


def render_jsonl(report: Report) -> str:
    """One record per check; wall time excluded so output is byte-stable."""
    lines = []
    for rec in report.sorted_records():
        lines.append(
            json.dumps(
                {
                    "instance": rec.instance,
                    "name": rec.name,
                    "note": rec.note,
                    "pass": rec.passed,
                    "residual": rec.residual,
                    "tolerance": rec.tolerance,
                },
                sort_keys=True,
                separators=(",", ":"),
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def render_csv(report: Report) -> str:
    out = io.StringIO()
    writer = csv.writer(out, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
    writer.writerow(["name", "instance", "residual", "tolerance", "pass", "note"])
    for rec in report.sorted_records():
        writer.writerow(
            [
                rec.name,
                rec.instance,
                repr(rec.residual),
                repr(rec.tolerance),
                "true" if rec.passed else "false",
                rec.note,
            ]
        )
    return out.getvalue()


def render_sweep_csv(report: Report) -> str:
    out = io.StringIO()
    writer = csv.writer(out, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
    writer.writerow(["u", "re_tau_psi", "im_tau_psi"])
    for u, re_val, im_val in report.sweep or []:
        writer.writerow([format_complex(u), repr(re_val), repr(im_val)])
    return out.getvalue()


def emit(report: Report, fmt: str, out_dir: str | None = None) -> dict:
    """Render the report; returns {filename: content} ('' means stdout)."""
    if fmt == "human-text":
        files = {"report.txt": render_text(report)}
    elif fmt == "json-lines":
        files = {"report.jsonl": render_jsonl(report)}
    elif fmt == "csv":
        files = {"report.csv": render_csv(report)}
        if report.sweep is not None:
            files["sweep.csv"] = render_sweep_csv(report)
    else:
        raise ConfigError(f"unknown format {fmt!r}")
    if out_dir is None:
        return files
    os.makedirs(out_dir, exist_ok=True)
    for name, content in files.items():
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as handle:
            handle.write(content)
    return files


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ellgaudin",
        description=(
            "Verification workflows for elliptic Gaudin transfer operators "
            "and their Bethe eigenvectors."
        ),
    )
    parser.add_argument("command", choices=COMMANDS, help="workflow to run")
    parser.add_argument(
        "--config", required=True, help="path to the experiment config file"
    )
    parser.add_argument(
        "--format",
        choices=FORMATS,
        default="human-text",
        help="report format (default: human-text)",
    )
    parser.add_argument(
        "--out",
        default=None,
        help="directory for report files (default: print to stdout)",
    )
    parser.add_argument(
        "--seed", type=int, default=None, help="override the config rng seed"
    )
    parser.add_argument(
        "--negative-control",
        action="store_true",
        help="perturb the Bethe roots so the eigenvector check must fail",
    )
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be a non-negative integer")
            cfg.seed = args.seed
        report = run(args.command, cfg, negative_control=args.negative_control)
        files = emit(report, args.format, args.out)
    except ConfigError as exc:
        print(f"ellgaudin: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ellgaudin: cannot write output: {exc}", file=sys.stderr)
        return 2
    if args.out is None:
        sys.stdout.write("\n".join(files.values()))
    else:
        names = ", ".join(sorted(files))
        print(f"wrote {names} to {args.out}")
    return 0 if report.verdict else 1


if __name__ == "__main__":
    sys.exit(main())
