"""Scenario documents: JSON text -> validated, fully resolved run description.

Every field has a default except ``initial_data``.  Validation collects all
violations before failing, and unknown keys are errors.  ``Scenario.to_dict``
writes the resolved document, which parses back to an equal ``Scenario``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields

from .grid import Cylinder, VelocityGrid
from .holder import DEFAULT_BUDGET
from .profiles import compact_bump, maxwellian, maxwellian_mixture
from .solver import DRIFTS, SCHEMES, STENCIL_ORDERS, SolverConfig
from .coefficients import PATHS

INITIAL_KINDS = ("maxwellian", "maxwellian_mixture", "compact_bump")


class ScenarioError(ValueError):
    """Raised with the full list of violations in ``errors``."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid scenario:\n" + "\n".join(f"  - {e}" for e in self.errors))


@dataclass(frozen=True)
class GridSpec:
    n: int = 33
    L: float = 8.0


@dataclass(frozen=True)
class MonitorSpec:
    q: float = 4.0
    ball_center: tuple = (0.0, 0.0, 0.0)
    ball_radius: float = 2.0
    alpha: float = 0.5
    cylinder: Cylinder | None = None
    snapshot_stride: int = 10
    sample_budget: int = DEFAULT_BUDGET
    seed: int = 0
    verdict: bool = True
    s0_bound: float | None = None


@dataclass(frozen=True)
class Scenario:
    initial_data: dict
    grid: GridSpec
    solver: SolverConfig
    monitors: MonitorSpec

    def velocity_grid(self) -> VelocityGrid:
        return VelocityGrid(self.grid.n, self.grid.L)

    def initial_field(self):
        g = self.velocity_grid()
        d = self.initial_data
        if d["kind"] == "maxwellian":
            return maxwellian(g, d["mass"], d["temperature"], d["mean"])
        if d["kind"] == "maxwellian_mixture":
            return maxwellian_mixture(g, d["components"])
        return compact_bump(g, d["center"], d["radius"], d["height"], d["power"])

    def outer_cylinder(self) -> Cylinder:
        m = self.monitors
        return Cylinder(0.0, self.solver.t_final, m.ball_center, m.ball_radius)

    def inner_cylinder(self) -> Cylinder:
        """The configured cylinder, or the default one inside the outer cylinder."""
        m = self.monitors
        if m.cylinder is not None:
            return m.cylinder
        t = self.solver.t_final
        return Cylinder(0.2 * t, t, m.ball_center, 0.75 * m.ball_radius)

    def to_dict(self) -> dict:
        mon = asdict(self.monitors)
        mon["ball"] = {"center": list(mon.pop("ball_center")), "radius": mon.pop("ball_radius")}
        mon["cylinder"] = None if self.monitors.cylinder is None else self.monitors.cylinder.to_dict()
        return {
            "initial_data": _plain(self.initial_data),
            "grid": asdict(self.grid),
            "solver": asdict(self.solver),
            "monitors": mon,
        }


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


# -- validation helpers --------------------------------------------------------

class _Collector:
    def __init__(self):
        self.errors = []

    def section(self, doc, path, allowed):
        if doc is None:
            return {}
        if not isinstance(doc, dict):
            self.errors.append(f"{path}: expected an object")
            return {}
        for key in doc:
            if key not in allowed:
                self.errors.append(f"{path}.{key}: unknown key")
        return doc

    def number(self, doc, key, path, default, check=None, why="", integer=False):
        if key not in doc:
            return default
        v = doc[key]
        ok_type = isinstance(v, int) if integer else isinstance(v, (int, float))
        if isinstance(v, bool) or not ok_type or (not integer and not math.isfinite(v)):
            self.errors.append(f"{path}.{key}: expected {'an integer' if integer else 'a finite number'}, got {v!r}")
            return default
        if check is not None and not check(v):
            self.errors.append(f"{path}.{key}: {why} (got {v!r})")
            return default
        return int(v) if integer else float(v)

    def choice(self, doc, key, path, default, options):
        if key not in doc:
            return default
        if doc[key] not in options:
            self.errors.append(f"{path}.{key}: must be one of {list(options)}, got {doc[key]!r}")
            return default
        return doc[key]

    def boolean(self, doc, key, path, default):
        if key not in doc:
            return default
        if not isinstance(doc[key], bool):
            self.errors.append(f"{path}.{key}: expected true or false")
            return default
        return doc[key]

    def vec3(self, doc, key, path, default):
        if key not in doc:
            return default
        v = doc[key]
        if (
            not isinstance(v, (list, tuple)) or len(v) != 3
            or any(isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x) for x in v)
        ):
            self.errors.append(f"{path}.{key}: expected three finite numbers")
            return default
        return tuple(float(x) for x in v)


_positive = (lambda v: v > 0, "must be positive")


def _initial(c: _Collector, doc):
    path = "initial_data"
    if doc is None:
        c.errors.append(f"{path}: required")
        return None
    if not isinstance(doc, dict) or doc.get("kind") not in INITIAL_KINDS:
        c.errors.append(f"{path}.kind: must be one of {list(INITIAL_KINDS)}")
        return None
    kind = doc["kind"]
    if kind == "maxwellian":
        c.section(doc, path, {"kind", "mass", "temperature", "mean"})
        return {"kind": kind, **_maxwellian_params(c, doc, path)}
    if kind == "maxwellian_mixture":
        c.section(doc, path, {"kind", "components"})
        comps = doc.get("components")
        if not isinstance(comps, list) or not comps:
            c.errors.append(f"{path}.components: expected a nonempty list")
            return None
        out = []
        for i, comp in enumerate(comps):
            p = f"{path}.components[{i}]"
            comp = c.section(comp, p, {"mass", "temperature", "mean"})
            out.append(_maxwellian_params(c, comp, p))
        return {"kind": kind, "components": out}
    c.section(doc, path, {"kind", "center", "radius", "height", "power"})
    return {
        "kind": kind,
        "center": list(c.vec3(doc, "center", path, (0.0, 0.0, 0.0))),
        "radius": c.number(doc, "radius", path, 1.0, *_positive),
        "height": c.number(doc, "height", path, 1.0, *_positive),
        "power": c.number(doc, "power", path, 3, lambda v: v >= 1, "must be >= 1", integer=True),
    }


def _maxwellian_params(c, doc, path):
    return {
        "mass": c.number(doc, "mass", path, 1.0, *_positive),
        "temperature": c.number(doc, "temperature", path, 1.0, *_positive),
        "mean": list(c.vec3(doc, "mean", path, (0.0, 0.0, 0.0))),
    }


def _cylinder(c: _Collector, doc, path):
    if doc is None:
        return None
    doc = c.section(doc, path, {"t_start", "t_end", "center", "radius"})
    for key in ("t_start", "t_end", "radius"):
        if key not in doc:
            c.errors.append(f"{path}.{key}: required")
    try:
        return Cylinder(
            c.number(doc, "t_start", path, 0.0),
            c.number(doc, "t_end", path, 1.0),
            c.vec3(doc, "center", path, (0.0, 0.0, 0.0)),
            c.number(doc, "radius", path, 1.0),
        )
    except ValueError as exc:
        c.errors.append(f"{path}: {exc}")
        return None


def snapshot_times(solver: SolverConfig, stride: int) -> list:
    """Nominal times at which :func:`landau.solver.run` stores snapshots."""
    n = solver.n_steps
    return [k * solver.dt for k in range(n + 1) if k % stride == 0 or k == n]


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a JSON scenario document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"not valid JSON: {exc}"]) from None
    return scenario_from_dict(doc)


def scenario_from_dict(doc) -> Scenario:
    c = _Collector()
    doc = c.section(doc, "scenario", {"initial_data", "grid", "solver", "monitors"})
    initial = _initial(c, doc.get("initial_data"))

    g = c.section(doc.get("grid"), "grid", {"n", "L"})
    n = c.number(g, "n", "grid", 33, lambda v: v >= 9 and v % 2 == 1, "must be odd and >= 9", integer=True)
    L = c.number(g, "L", "grid", 8.0, *_positive)
    grid = GridSpec(n, L)

    s = c.section(doc.get("solver"), "solver", {f.name for f in fields(SolverConfig)})
    d = SolverConfig()
    solver_kw = dict(
        dt=c.number(s, "dt", "solver", d.dt, *_positive),
        t_final=c.number(s, "t_final", "solver", d.t_final, *_positive),
        scheme=c.choice(s, "scheme", "solver", d.scheme, SCHEMES),
        linear_tol=c.number(s, "linear_tol", "solver", d.linear_tol, lambda v: 0 < v <= 1e-4, "must lie in (0, 1e-4]"),
        coefficient_path=c.choice(s, "coefficient_path", "solver", d.coefficient_path, PATHS),
        boundary=c.choice(s, "boundary", "solver", d.boundary, ("zero_flux",)),
        picard=c.boolean(s, "picard", "solver", d.picard),
        blowup_factor=c.number(s, "blowup_factor", "solver", d.blowup_factor, lambda v: v > 1, "must exceed 1"),
        stencil_order=c.choice(s, "stencil_order", "solver", d.stencil_order, STENCIL_ORDERS),
        drift=c.choice(s, "drift", "solver", d.drift, DRIFTS),
        workers=c.number(s, "workers", "solver", d.workers, lambda v: v >= 1, "must be >= 1", integer=True),
    )
    solver = SolverConfig(**solver_kw)

    m = c.section(
        doc.get("monitors"),
        "monitors",
        {"q", "ball", "alpha", "cylinder", "snapshot_stride", "sample_budget", "seed", "verdict", "s0_bound"},
    )
    ball = c.section(m.get("ball"), "monitors.ball", {"center", "radius"})
    verdict = c.boolean(m, "verdict", "monitors", True)
    q = c.number(m, "q", "monitors", 4.0, lambda v: v >= 1, "must be >= 1")
    if verdict and not q > 3:
        c.errors.append(f"monitors.q: the regularity verdict requires q > 3 (got {q!r})")
    s0_bound = m.get("s0_bound")
    if s0_bound is not None:
        s0_bound = c.number(m, "s0_bound", "monitors", None, *_positive)
    mon = MonitorSpec(
        q=q,
        ball_center=c.vec3(ball, "center", "monitors.ball", (0.0, 0.0, 0.0)),
        ball_radius=c.number(ball, "radius", "monitors.ball", 2.0, *_positive),
        alpha=c.number(m, "alpha", "monitors", 0.5, lambda v: 0 < v < 1, "must lie in (0, 1)"),
        cylinder=_cylinder(c, m.get("cylinder"), "monitors.cylinder"),
        snapshot_stride=c.number(m, "snapshot_stride", "monitors", 10, lambda v: v >= 1, "must be >= 1", integer=True),
        sample_budget=c.number(m, "sample_budget", "monitors", DEFAULT_BUDGET, lambda v: v >= 0, "must be >= 0", integer=True),
        seed=c.number(m, "seed", "monitors", 0, lambda v: v >= 0, "must be >= 0", integer=True),
        verdict=verdict,
        s0_bound=s0_bound,
    )

    # geometry against the grid cube
    vg = VelocityGrid(n, L)
    if not vg.contains_ball(mon.ball_center, mon.ball_radius):
        c.errors.append(f"monitors.ball: ball of radius {mon.ball_radius} at {list(mon.ball_center)} leaves the cube [-{L}, {L}]^3")
    elif not vg.ball_mask(mon.ball_center, mon.ball_radius).any():
        c.errors.append("monitors.ball: contains no grid node")
    if mon.cylinder is not None:
        cyl = mon.cylinder
        if not cyl.fits(vg):
            c.errors.append("monitors.cylinder: ball leaves the grid cube")
        if math.dist(cyl.center, mon.ball_center) + cyl.radius >= mon.ball_radius:
            c.errors.append("monitors.cylinder: ball must lie strictly inside monitors.ball")
        if not (0.0 < cyl.t_start and cyl.t_end <= solver.t_final):
            c.errors.append("monitors.cylinder: time interval must lie in (0, solver.t_final]")
    if mon.verdict and not c.errors:
        sc = Scenario(initial, grid, solver, mon)
        cyl = sc.inner_cylinder()
        if not vg.ball_mask(cyl.center, cyl.radius).any():
            c.errors.append("monitors.cylinder: ball contains no grid node")
        times = snapshot_times(solver, mon.snapshot_stride)
        if not any(cyl.t_start <= t <= cyl.t_end * (1 + 1e-12) for t in times):
            c.errors.append("monitors.cylinder: no snapshot falls inside its time interval; lower snapshot_stride")
    if initial is not None and initial["kind"] == "compact_bump":
        if not vg.contains_ball(initial["center"], initial["radius"]):
            c.errors.append("initial_data: bump support leaves the grid cube")
    if c.errors:
        raise ScenarioError(c.errors)
    return Scenario(initial, grid, solver, mon)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
