"""Scenario configs, map-sequence assembly, and the batch pipeline.

A scenario names the composition style (fixed map, random draws inside a
neighborhood, curve driving, or smooth sine perturbations), the initial
densities, grid, horizon, and seed.  Runs are deterministic given the
config: all randomness flows through one seeded PCG64 generator consumed
in a fixed order (phi, psi, then map draws).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import bounds as bnd
from .coupling import (BlockPlan, CertificateViolation, certify, fit_decay,
                       run_coupled, write_decay_json)
from .covering import CoveringReport, positivity_horizon
from .curves import curve_from_dict
from .density import Density
from .maps import (PiecewiseMap, analyze, map_from_dict, neighborhood_distance,
                   sine_map)

SCHEMA_VERSION = 1
REDRAW_LIMIT = 100
N_MAX_CAP = 10 ** 4

EXIT_OK = 0
EXIT_CERTIFICATE = 1
EXIT_CONFIG = 2


class ScenarioError(ValueError):
    """Configuration or assembly problem; maps to exit code 2."""


KINDS = ("fixed-map", "neighborhood", "curve-driven", "smooth")


@dataclass
class Scenario:
    name: str
    kind: str
    grid: int
    n_max: int
    seed: int
    phi: dict
    psi: dict
    family: dict = field(default_factory=dict)
    curve: dict = field(default_factory=dict)
    eps: float | None = None
    eps_loc: float = 0.1
    a_star: float | None = None
    mesh: float | str | None = None
    mesh_override: bool = False
    probes: int = 9
    kappa_mode: str = "theoretical"

    @classmethod
    def from_dict(cls, cfg: dict) -> "Scenario":
        if cfg.get("schema") != SCHEMA_VERSION:
            raise ScenarioError(f"config schema must be {SCHEMA_VERSION}")
        body = {k: v for k, v in cfg.items() if k != "schema"}
        required = ("name", "kind", "grid", "n_max", "seed", "phi", "psi")
        for key in required:
            if key not in body:
                raise ScenarioError(f"missing scenario field {key!r}")
        try:
            sc = cls(**body)
        except TypeError as exc:
            raise ScenarioError(str(exc)) from exc
        if sc.kind not in KINDS:
            raise ScenarioError(f"unknown scenario kind {sc.kind!r}")
        if sc.grid < 2 or (sc.grid & (sc.grid - 1)) != 0:
            raise ScenarioError("grid must be a power of two")
        if sc.kind == "smooth" and sc.grid > 2 ** 14:
            raise ScenarioError("smooth scenarios cap the grid at 2^14 "
                                "(ratio-cone checks are quadratic)")
        if sc.n_max == "auto":
            if sc.kind != "curve-driven":
                raise ScenarioError("n_max 'auto' is only for curve scenarios")
        elif not (isinstance(sc.n_max, int) and 1 <= sc.n_max <= N_MAX_CAP):
            raise ScenarioError(f"n_max must lie in [1, {N_MAX_CAP}]")
        return sc

    def as_dict(self) -> dict:
        out = {"schema": SCHEMA_VERSION}
        out.update({
            "name": self.name, "kind": self.kind, "grid": self.grid,
            "n_max": self.n_max, "seed": self.seed, "phi": self.phi,
            "psi": self.psi, "family": self.family, "curve": self.curve,
            "eps": self.eps, "eps_loc": self.eps_loc, "a_star": self.a_star,
            "mesh": self.mesh, "mesh_override": self.mesh_override,
            "probes": self.probes, "kappa_mode": self.kappa_mode,
        })
        return out


def build_density(spec: dict, G: int, rng: np.random.Generator) -> Density:
    preset = spec.get("preset", "uniform")
    if preset == "uniform":
        return Density.uniform(G)
    if preset == "sine":
        return Density.sine(G, spec.get("k", 1), spec.get("amplitude", 0.5))
    if preset == "cosine":
        return Density.cosine(G, spec.get("k", 1), spec.get("amplitude", 0.4))
    if preset == "step":
        return Density.step(G, spec["levels"])
    if preset == "random-bv":
        return Density.random_bv(G, spec["a"], rng)
    if preset == "sine-step":
        # sine wave plus zero-mean plateau noise drawn from the scenario rng
        base = Density.sine(G, spec.get("k", 1), spec.get("amplitude", 0.5))
        pieces = spec.get("pieces", 8)
        amp = spec.get("step_amp", 0.3)
        levels = rng.uniform(-1.0, 1.0, pieces)
        idx = (np.arange(G) * pieces) // G
        noise = levels[idx] - levels.mean()
        samples = np.maximum(base.samples + amp * noise, 0.0)
        return Density.from_samples(samples)
    raise ScenarioError(f"unknown density preset {preset!r}")


def draw_two_slope_wrap(fam: dict, rng: np.random.Generator) -> PiecewiseMap:
    """Random two-branch wrap map: split point in fam['split'], slopes in
    fam['slopes'], random second-branch offset.  With the default ranges
    the family has inf-expansion 2.5 and variation coefficient sup 4."""
    from .maps import BranchSpec

    s_lo, s_hi = fam.get("slopes", (2.5, 3.5))
    p_lo, p_hi = fam.get("split", (0.5, 0.8))
    p = float(rng.uniform(p_lo, p_hi))
    s1 = float(rng.uniform(s_lo, s_hi))
    s2 = float(rng.uniform(s_lo, s_hi))
    c2 = float(rng.uniform(0.0, 1.0))
    return PiecewiseMap((BranchSpec(0.0, p, s1),
                         BranchSpec(p, 1.0, s2, c2)))


def two_slope_wrap_family_bounds(fam: dict | None = None) -> bnd.FamilyBounds:
    """Closed-form uniform bounds over the wrap family's parameter box."""
    fam = fam or {}
    s_lo, s_hi = fam.get("slopes", (2.5, 3.5))
    p_lo, p_hi = fam.get("split", (0.5, 0.8))
    shortest = min(1.0 - p_hi, p_lo)
    return bnd.FamilyBounds(lambda0=s_lo, A0=2.0 * (1.0 / s_lo) / shortest,
                            M0=s_hi, C1=0.0, sup_d2=0.0)


def build_sequence(scenario: Scenario,
                   rng: np.random.Generator) -> list[PiecewiseMap]:
    """Assemble the map sequence for the scenario (deterministic given the
    generator state)."""
    n = scenario.n_max
    fam = scenario.family
    kind = scenario.kind
    if kind == "fixed-map":
        g = map_from_dict(fam["map"])
        return [g] * n
    if kind == "neighborhood":
        g = map_from_dict(fam["base"])
        eps = scenario.eps
        if eps is None:
            raise ScenarioError("neighborhood scenarios need eps")
        amp_max = fam.get("amp_max", 0.003)
        slope = fam.get("slope", 3.0)
        slope_jitter = fam.get("slope_jitter", 0.0)
        marks = tuple(fam.get("marks", (0.0, 0.5)))
        maps = []
        for _ in range(n):
            for attempt in range(REDRAW_LIMIT + 1):
                a = float(rng.uniform(-amp_max, amp_max))
                s = slope + float(rng.uniform(-slope_jitter, slope_jitter))
                cand = sine_map(s, a, 0.0, marks)
                if neighborhood_distance(cand, g) <= eps:
                    maps.append(cand)
                    break
            else:
                raise ScenarioError(
                    f"no admissible draw within {REDRAW_LIMIT} attempts")
        return maps
    if kind == "curve-driven":
        curve = curve_from_dict(scenario.curve)
        delta = scenario.curve.get("resolved_mesh")
        if delta is None:
            raise ScenarioError("curve mesh not resolved; use run_scenario")
        ts = [min(curve.a + (i + 1) * delta, curve.b) for i in range(n)]
        return [curve(t) for t in ts]
    if kind == "smooth":
        slope = fam.get("slope", 2.0)
        amp_max = fam.get("amp_max", 0.05)
        marks = tuple(fam.get("marks", (0.0, 0.5)))
        draws = rng.uniform(-amp_max, amp_max, n)
        return [sine_map(slope, float(a), 0.0, marks) for a in draws]
    raise ScenarioError(f"unknown scenario kind {kind!r}")


def _piecewise_constants(scenario: Scenario, g: PiecewiseMap,
                         eps_pad: float) -> tuple[bnd.BoundsReport, CoveringReport]:
    fam = bnd.family_bounds([g], eps_pad=eps_pad)
    a_star = scenario.a_star or bnd.default_a_star(fam)
    eps = scenario.eps if scenario.eps is not None else 0.0
    cov = positivity_horizon(g, a_star, eps)
    kappa = cov.kappa_eps
    tau = bnd.tau_piecewise(a_star / (1.0 - kappa), a_star, fam.lambda0, fam.A0)
    block = cov.n0 + tau
    report = bnd.BoundsReport(
        mode="piecewise", lambda0=fam.lambda0, A0=fam.A0, M0_family=fam.M0,
        C1=fam.C1, C0=None, L_star=None, a_star=a_star, tau=tau, kappa=kappa,
        block=block, Lambda=bnd.lambda_local(kappa, block), eps=eps,
        fraction=1.0)
    return report, cov


def _smooth_constants(scenario: Scenario) -> bnd.BoundsReport:
    fam_cfg = scenario.family
    slope = fam_cfg.get("slope", 2.0)
    amp = fam_cfg.get("amp_max", 0.05)
    marks = tuple(fam_cfg.get("marks", (0.0, 0.5)))
    extremes = [sine_map(slope, a, 0.0, marks) for a in (-amp, 0.0, amp)]
    fam = bnd.family_bounds(extremes)
    C0 = max(bnd.distortion_constant(fam.C1, fam.lambda0), bnd.C0_FLOOR)
    L_star = bnd.cone_parameter(C0)
    kappa = bnd.smooth_positivity_floor(L_star, scenario.eps_loc)
    block = bnd.tau_smooth(2.0 * L_star, fam.lambda0, C0)
    block = max(block, 1)
    return bnd.BoundsReport(
        mode="smooth", lambda0=fam.lambda0, A0=None, M0_family=fam.M0,
        C1=fam.C1, C0=C0, L_star=L_star, a_star=None, tau=block, kappa=kappa,
        block=block, Lambda=bnd.lambda_local(0.5 * kappa, block),
        eps_loc=scenario.eps_loc, fraction=0.5)


@dataclass
class RunResult:
    exit_code: int
    message: str
    artifacts: dict
    ledger: object = None
    fit: object = None
    certificate: object = None
    bounds: object = None
    covering: object = None
    curve_cover: object = None


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def resolve_curve_plan(scenario: Scenario):
    """Compute the curve cover (refining probes until the half-windows
    cover) and the resolved mesh; raises ScenarioError on violations."""
    curve = curve_from_dict(scenario.curve)
    grid = list(np.linspace(curve.a, curve.b, max(2, scenario.probes)))
    eps_rule = None
    if scenario.eps is not None:
        eps_rule = lambda t: scenario.eps  # noqa: E731
    cover = None
    for _ in range(64):
        cover = bnd.delta0_of_curve(curve, grid, scenario.a_star, eps_rule)
        if cover.covered:
            break
        grid.append(cover.uncovered_at)
        grid = sorted(set(grid))
    if cover is None or not cover.covered:
        raise ScenarioError("curve half-windows failed to cover the interval")
    mesh = scenario.mesh
    if mesh in (None, "auto"):
        mesh = cover.delta0
    mesh = float(mesh)
    if mesh > cover.delta0 and not scenario.mesh_override:
        raise ScenarioError(
            f"mesh {mesh} exceeds the certified delta0 {cover.delta0}; "
            "set mesh_override to acknowledge the guarantee is void")
    return curve, cover, mesh


def run_scenario(scenario: Scenario, out_dir) -> RunResult:
    """Full pipeline: constants, covering, map sequence, coupled run,
    decay fit, and certification, all written to out_dir.

    Exit codes: 0 success, 1 certificate violation, 2 configuration error.
    """
    os.makedirs(out_dir, exist_ok=True)
    artifacts = {}
    try:
        rng = np.random.Generator(np.random.PCG64(scenario.seed))
        phi = build_density(scenario.phi, scenario.grid, rng)
        psi = build_density(scenario.psi, scenario.grid, rng)
        covering = None
        curve_cover = None
        plan = None
        if scenario.kind == "smooth":
            mode = "smooth"
            report = _smooth_constants(scenario)
        elif scenario.kind == "curve-driven":
            mode = "piecewise"
            curve, curve_cover, mesh = resolve_curve_plan(scenario)
            scenario.curve["resolved_mesh"] = mesh
            if scenario.n_max == "auto":
                scenario.n_max = min(
                    math.ceil((curve.b - curve.a) / mesh), N_MAX_CAP)
            binding = min(
                (curve_cover.probes[j] for j in curve_cover.selected),
                key=lambda p: p.alpha / (2.0 * p.n_block))
            covering = binding.covering
            fam = curve_cover.family
            block = binding.n_block
            report = bnd.BoundsReport(
                mode="piecewise", lambda0=fam.lambda0, A0=fam.A0,
                M0_family=fam.M0, C1=fam.C1, C0=None, L_star=None,
                a_star=curve_cover.a_star, tau=binding.tau,
                kappa=binding.kappa, block=block,
                Lambda=bnd.lambda_local(binding.kappa, block),
                delta0=curve_cover.delta0, eps=binding.eps, fraction=1.0)
            ts = [min(curve.a + (i + 1) * mesh, curve.b)
                  for i in range(scenario.n_max)]

            def plan(step_index: int) -> BlockPlan:
                t = ts[min(step_index, len(ts) - 1)]
                p = curve_cover.anchor_for(t)
                return BlockPlan(kappa=p.kappa, n0=p.covering.n0, tau=p.tau,
                                 anchor="t=%.6f" % p.t)
        else:
            mode = "piecewise"
            key = "map" if scenario.kind == "fixed-map" else "base"
            if key not in scenario.family:
                raise ScenarioError(f"{scenario.kind} scenario needs family.{key}")
            g = map_from_dict(scenario.family[key])
            pad = scenario.eps if scenario.kind == "neighborhood" else 0.0
            if pad is None:
                raise ScenarioError("neighborhood scenarios need eps")
            report, covering = _piecewise_constants(scenario, g, pad)

        maps = build_sequence(scenario, rng)
        ledger = run_coupled(maps, phi, psi, mode, bounds=report, plan=plan,
                             kappa_mode=scenario.kappa_mode)
        fit = fit_decay(ledger.distances())
        cert = certify(ledger)

        led_path = os.path.join(out_dir, "ledger.csv")
        ledger.to_csv(led_path)
        artifacts["ledger"] = led_path
        bpath = os.path.join(out_dir, "bounds.json")
        report.to_json(bpath)
        artifacts["bounds"] = bpath
        if covering is not None:
            cpath = os.path.join(out_dir, "covering.json")
            covering.to_json(cpath)
            artifacts["covering"] = cpath
        if curve_cover is not None:
            qpath = os.path.join(out_dir, "curve_plan.json")
            _write_json(qpath, curve_cover.as_dict())
            artifacts["curve_plan"] = qpath
        dpath = os.path.join(out_dir, "decay.json")
        write_decay_json(fit, dpath)
        artifacts["decay"] = dpath
        xpath = os.path.join(out_dir, "certificate.json")
        _write_json(xpath, cert.as_dict())
        artifacts["certificate"] = xpath
        spath = os.path.join(out_dir, "scenario.json")
        _write_json(spath, scenario.as_dict())
        artifacts["scenario"] = spath

        if not cert.passed:
            return RunResult(EXIT_CERTIFICATE, "envelope violated", artifacts,
                             ledger, fit, cert, report, covering, curve_cover)
        return RunResult(EXIT_OK, "ok", artifacts, ledger, fit, cert, report,
                         covering, curve_cover)
    except CertificateViolation as exc:
        _write_json(os.path.join(out_dir, "certificate.json"),
                    {"passed": False, "error": str(exc), "block": exc.block})
        return RunResult(EXIT_CERTIFICATE, str(exc), artifacts)
    except (ScenarioError, ValueError) as exc:
        return RunResult(EXIT_CONFIG, str(exc), artifacts)


def run_absorption(cfg: dict) -> dict:
    """Absorption suite: the scheduled time tau from the family constants,
    then seeded random-sequence runs checking that the variation has
    entered the cone (with 5% headroom) after tau steps."""
    from .transfer import push_sequence

    fam_cfg = cfg.get("family", {})
    fam = two_slope_wrap_family_bounds(fam_cfg)
    a = cfg["a"]
    a_star = cfg["a_star"]
    tau = bnd.tau_piecewise(a, a_star, fam.lambda0, fam.A0)
    G = cfg.get("grid", 2 ** 13)
    seeds = cfg.get("seeds", 20)
    seed0 = cfg.get("seed", 0)
    headroom = cfg.get("headroom", 0.05)
    results = []
    worst = 0.0
    for s in range(seeds):
        rng = np.random.Generator(np.random.PCG64(seed0 + s))
        phi = Density.random_bv(G, a, rng)
        maps = [draw_two_slope_wrap(fam_cfg, rng) for _ in range(tau)]
        final = push_sequence(maps, phi)[-1] if tau > 0 else phi
        v = final.variation()
        worst = max(worst, v)
        results.append({"seed": seed0 + s, "initial_variation": phi.variation(),
                        "final_variation": v})
    passed = worst <= a_star * (1.0 + headroom)
    return {"tau": tau, "lambda0": fam.lambda0, "A0": fam.A0, "a": a,
            "a_star": a_star, "worst_final_variation": worst,
            "passed": passed, "runs": results}


def run_variation_suite(cfg: dict) -> dict:
    """Empirical variation-inequality sweep: seeded rough densities pushed
    through the configured maps must respect
    2/lambda * V(phi) + A + 0.02*(1 + V(phi))."""
    from .transfer import push

    map_specs = cfg.get("maps") or [
        {"form": "doubling"}, {"form": "slope25"},
        {"form": "slope3-two-branch"}, {"form": "two-slope-wrap"}]
    maps = [map_from_dict(ms) for ms in map_specs]
    G = cfg.get("grid", 2 ** 14)
    count = cfg.get("count", 100)
    var_max = cfg.get("var_max", 50.0)
    seed0 = cfg.get("seed", 0)
    slack_lin = cfg.get("slack", 0.02)
    violations = []
    max_margin = -math.inf
    for s in range(count):
        rng = np.random.Generator(np.random.PCG64(seed0 + s))
        phi = Density.random_bv(G, var_max, rng)
        v0 = phi.variation()
        for mi, m in enumerate(maps):
            an = analyze(m)
            allowed = (2.0 / an.lambda_min) * v0 + an.A + slack_lin * (1.0 + v0)
            got = push(m, phi).variation()
            margin = got - allowed
            max_margin = max(max_margin, margin)
            if margin > 0:
                violations.append({"seed": seed0 + s, "map": mi,
                                   "variation": got, "allowed": allowed})
    return {"count": count, "maps": len(maps), "violations": violations,
            "max_margin": max_margin, "passed": not violations}


def load_config(path) -> list[Scenario]:
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    if "scenarios" in cfg:
        schema = cfg.get("schema")
        out = []
        for body in cfg["scenarios"]:
            body = dict(body)
            body.setdefault("schema", schema)
            out.append(Scenario.from_dict(body))
        return out
    return [Scenario.from_dict(cfg)]
