"""Scenario documents and the calibration pipeline behind the CLI.

A document names attributes with priors and radii, a goal over them, an
advantage bound and a mechanism.  ``calibrate`` turns it into a plain-dict
report that serialises canonically, so identical documents always give
byte-identical JSON.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from advcal import bridge as br
from advcal.composition import BudgetVector, partition_budget, regime_norm, SEQUENTIAL, PARALLEL
from advcal.engine import DEFAULT_GRID, EpsilonResult, epsilon_one_sided, epsilon_two_sided
from advcal.errors import AdvcalError, InvalidArgumentError
from advcal.multivariate import (
    AND,
    OR,
    SensitiveItem,
    SensitiveSet,
    and_event_epsilon,
    or_event_epsilon,
    scan_multivariate,
    window_choices,
)
from advcal.noise import GENCAUCHY, LAPLACE, MechanismSpec
from advcal.oracle import (
    GRID_SLACK,
    DiscreteScenario,
    discretize_continuous,
    indicator_scenario,
    max_advantage,
)
from advcal.priors import (
    DiscretePmf,
    Normal,
    UniformContinuous,
    WorstCase,
    worst_case_location,
    worst_discrete_prior,
)
from advcal import engine

SCHEMA = "advcal/1"
MAX_ENUMERATED = 10000


class ScenarioError(InvalidArgumentError):
    pass


@dataclass(frozen=True)
class Attribute:
    name: str
    prior: Any
    r: float
    R: float
    t: Any = None
    discretize: Optional[Dict[str, Any]] = None

    @property
    def exact(self) -> bool:
        return isinstance(self.prior, DiscretePmf) and self.r == 0


@dataclass(frozen=True)
class Goal:
    combinator: str
    names: Tuple[str, ...]

    def label(self) -> str:
        if len(self.names) == 1:
            return self.names[0]
        return f"{self.combinator}({','.join(self.names)})"


@dataclass(frozen=True)
class ScenarioDoc:
    name: str
    attributes: Dict[str, Attribute]
    goals: Tuple[Goal, ...]
    delta: float
    norm_p: Any
    mechanism: Dict[str, Any]
    sensitivity: float
    count: int
    regime: str
    window: Tuple[str, Optional[float]]
    bridge: Optional[Dict[str, Any]]


def _num(x: Any, what: str) -> float:
    if isinstance(x, str) and x in ("inf", "Infinity"):
        return math.inf
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ScenarioError(f"{what} must be a number, got {x!r}")
    return float(x)


def parse_prior(spec: Dict[str, Any]) -> Any:
    kind = spec.get("kind")
    try:
        if kind == "uniform":
            return UniformContinuous(_num(spec["R"], "uniform R"), _num(spec.get("low", 0.0), "low"))
        if kind == "normal":
            R = spec.get("R")
            return Normal(_num(spec["mu"], "mu"), _num(spec["sigma"], "sigma"),
                          None if R is None else _num(R, "normal R"))
        if kind == "discrete":
            return DiscretePmf([(label, _num(m, "mass")) for label, m in spec["points"]])
        if kind == "worst":
            return WorstCase(_num(spec.get("q", 1.0), "q"))
    except KeyError as exc:
        raise ScenarioError(f"prior of kind {kind!r} is missing field {exc}") from None
    raise ScenarioError(f"unknown prior kind {kind!r}")


def parse_window(w: Any) -> Tuple[str, Optional[float]]:
    """``auto``, ``{"fixed": a}``, ``{"scan": N}`` or the strings ``fixed:a`` / ``scan:N``."""
    if w is None or w == "auto":
        return "auto", None
    if isinstance(w, str):
        kind, _, val = w.partition(":")
        if kind not in ("fixed", "scan") or not val:
            raise ScenarioError(f"window must be auto, fixed:a or scan:N, got {w!r}")
        try:
            return kind, float(val)
        except ValueError:
            raise ScenarioError(f"bad window value {val!r}") from None
    if isinstance(w, dict) and len(w) == 1:
        (kind, val), = w.items()
        if kind in ("fixed", "scan"):
            return kind, _num(val, f"window {kind}")
    raise ScenarioError(f"window must be auto, fixed:a or scan:N, got {w!r}")


def _parse_goal(node: Any, names: Sequence[str]) -> Goal:
    if isinstance(node, str):
        parts, comb = [node], AND
    elif isinstance(node, dict) and len(node) == 1 and next(iter(node)) in (AND, OR):
        comb, parts = next(iter(node.items()))
        if not isinstance(parts, list) or not parts or not all(isinstance(p, str) for p in parts):
            raise ScenarioError(f"an {comb} node takes a non-empty list of attribute names")
    else:
        raise ScenarioError(f"cannot parse goal {node!r}")
    for p in parts:
        if p not in names:
            raise ScenarioError(f"goal references undeclared attribute {p!r}")
    if len(set(parts)) != len(parts):
        raise ScenarioError("goal repeats an attribute")
    return Goal(comb, tuple(parts))


def parse_doc(data: Dict[str, Any]) -> ScenarioDoc:
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    if data.get("version") != SCHEMA:
        raise ScenarioError(f"unsupported schema version {data.get('version')!r}; expected {SCHEMA!r}")
    attrs: Dict[str, Attribute] = {}
    for spec in data.get("attributes") or []:
        name = spec.get("name")
        if not isinstance(name, str) or name in attrs:
            raise ScenarioError(f"attribute names must be unique strings, got {name!r}")
        prior = parse_prior(spec.get("prior") or {})
        r = _num(spec.get("r", 0.0), f"{name}.r")
        R = _num(spec["R"], f"{name}.R") if "R" in spec else float(getattr(prior, "extent", 1.0))
        if r < 0 or not R > 0:
            raise ScenarioError(f"{name}: need r >= 0 and R > 0")
        attrs[name] = Attribute(name, prior, r, R, spec.get("t"), spec.get("discretize"))
    if not attrs:
        raise ScenarioError("scenario declares no attributes")
    goal = data.get("goal")
    if goal is None:
        raise ScenarioError("scenario has no goal")
    nodes = goal if isinstance(goal, list) else [goal]
    goals = tuple(_parse_goal(n, list(attrs)) for n in nodes)
    for g in goals:
        worst = [n for n in g.names if isinstance(attrs[n].prior, WorstCase)]
        if worst and len(g.names) > 1:
            raise ScenarioError("a worst-case prior attribute must form its own set")
    delta = _num(data.get("delta"), "delta")
    if not 0.0 < delta < 1.0:
        raise ScenarioError(f"delta must lie in (0, 1), got {delta}")
    norm_p = data.get("norm_p", "inf")
    if norm_p not in (1, 2, "inf"):
        raise ScenarioError(f"norm_p must be 1, 2 or 'inf', got {norm_p!r}")
    mech = data.get("mechanism", {"kind": LAPLACE})
    if isinstance(mech, str):
        mech = {"kind": mech}
    if mech.get("kind") not in (LAPLACE, GENCAUCHY):
        raise ScenarioError(f"mechanism must be laplace or gencauchy, got {mech.get('kind')!r}")
    sens = _num(data.get("sensitivity", 1.0), "sensitivity")
    if not sens > 0:
        raise ScenarioError("sensitivity must be positive")
    outputs = data.get("outputs") or {}
    count = outputs.get("count", 1)
    regime = outputs.get("regime", SEQUENTIAL)
    if not isinstance(count, int) or count < 1 or regime not in (SEQUENTIAL, PARALLEL):
        raise ScenarioError("outputs needs a positive integer count and regime sequential|parallel")
    return ScenarioDoc(
        str(data.get("name", "scenario")), attrs, goals, delta, norm_p, dict(mech), sens,
        count, regime, parse_window(data.get("window")), data.get("bridge"),
    )


def load_doc(path: str) -> ScenarioDoc:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from None
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from None
    return parse_doc(data)


# ---- calibration -------------------------------------------------------


def _event_mass(doc: ScenarioDoc, goal: Goal, labels: Sequence[Any]) -> float:
    ms = [doc.attributes[n].prior.mass(t) for n, t in zip(goal.names, labels)]
    if goal.combinator == AND:
        return math.prod(ms)
    return 1.0 - math.prod(1.0 - m for m in ms)


def _candidates(doc: ScenarioDoc, goal: Goal) -> List[Tuple[Any, ...]]:
    choices = []
    for n in goal.names:
        a = doc.attributes[n]
        choices.append([a.t] if a.t is not None else list(a.prior.labels))
    if math.prod(len(c) for c in choices) > MAX_ENUMERATED:
        raise ScenarioError(f"{goal.label()}: too many candidate targets to enumerate")
    return list(itertools.product(*choices))


def _exact_set(doc: ScenarioDoc, goal: Goal) -> Dict[str, Any]:
    """Exact guesses over finite attributes: every pair of inputs is one unit apart."""
    cands = _candidates(doc, goal)
    masses = {c: _event_mass(doc, goal, c) for c in cands}
    positive = [m for m in masses.values() if m > 0]
    p_l, p_r = worst_discrete_prior(positive, doc.delta)
    evaluated = [m for m in (p_l, p_r) if m is not None]
    results = [epsilon_two_sided(m, doc.delta, 1.0) for m in evaluated]
    res = min(results, key=lambda r: r.epsilon)
    worst_mass = evaluated[results.index(res)]
    worst_target = min((c for c in cands if masses[c] == worst_mass), key=repr)
    return {
        "kind": "exact",
        "result": res,
        "p": worst_mass,
        "q": 1.0,
        "a": 1.0,
        "candidates": [m for m in (p_l, p_r)],
        "worst_target": list(worst_target),
        "windows": [1.0] * len(goal.names),
        "notes": [],
    }


def _locations(doc: ScenarioDoc, goal: Goal) -> List[Any]:
    ts = []
    for n in goal.names:
        a = doc.attributes[n]
        if a.t is not None:
            ts.append(a.t)
        else:
            try:
                ts.append(worst_case_location(a.prior, a.r, doc.delta))
            except AdvcalError:
                raise ScenarioError(f"{n}: no worst-case location for this prior; give t") from None
    return ts


def _metric_set(doc: ScenarioDoc, goal: Goal, window: Tuple[str, Optional[float]]) -> Dict[str, Any]:
    ts = _locations(doc, goal)
    items = tuple(
        SensitiveItem(n, t, doc.attributes[n].r, doc.attributes[n].prior, doc.attributes[n].R)
        for n, t in zip(goal.names, ts)
    )
    S = SensitiveSet(items, goal.combinator)
    mode, val = window
    notes: List[str] = []
    out: Dict[str, Any] = {"kind": "metric", "targets": ts, "window_mode": mode}
    if mode == "fixed":
        a = float(val)
        if any(a <= it.r for it in items):
            raise ScenarioError(f"fixed window {a} must exceed every radius")
        a_i = window_choices(S, a)
        if goal.combinator == AND or len(items) == 1:
            res = and_event_epsilon(S, doc.delta, a_i, two_sided=True)
        else:
            res, _ = or_event_epsilon(S, doc.delta, a_i, two_sided=True)
    else:
        N = int(val) if mode == "scan" else DEFAULT_GRID
        if N < 1:
            raise ScenarioError("scan grid needs at least one point")
        res = scan_multivariate(S, doc.delta, N, two_sided=True)
        a_i = window_choices(S, res.a)
    out.update(result=res, p=res.p, q=res.q, a=res.a, windows=a_i)
    if len(items) == 1:
        it = items[0]
        out["smallest_feasible_window"] = engine.smallest_feasible_window(it.prior, it.t, it.r, doc.delta, it.R)
    if res.log_arg is not None:
        out["log_argument"] = res.log_arg
        out["ln_argument_magnitude"] = abs(res.log_arg)
    if not res.feasible:
        msg = f"no positive epsilon at window a={res.a:.6g}: the logarithm argument exceeds 1"
        if math.isfinite(res.p) and math.isfinite(res.q):
            msg += f" (p/q = {res.p / res.q:.6g} >= delta + p = {doc.delta + res.p:.6g})"
        notes.append(msg)
        sfw = out.get("smallest_feasible_window")
        if sfw is not None:
            notes.append(f"smallest feasible window is a = {sfw:.10g}; try --window scan:N")
        elif mode == "fixed":
            notes.append("try --window scan:N")
    elif math.isfinite(res.epsilon):
        out["epsilon_times_window"] = res.epsilon * res.a
    out["notes"] = notes
    return out


def _worst_set(doc: ScenarioDoc, goal: Goal, window: Tuple[str, Optional[float]]) -> Dict[str, Any]:
    attr = doc.attributes[goal.names[0]]
    p, q = attr.prior.masses(doc.delta)
    a = float(window[1]) if window[0] == "fixed" else 1.0
    res = epsilon_two_sided(p, doc.delta, a) if q >= 1.0 else epsilon_one_sided(p, q, doc.delta, a)
    return {"kind": "worst", "result": res, "p": p, "q": q, "a": a, "windows": [a], "notes": []}


def _noise(doc: ScenarioDoc, eps: float) -> Tuple[Optional[float], float]:
    """Per-output epsilon and noise scale after splitting over the outputs."""
    if not eps > 0:
        return None, math.inf
    per = partition_budget(eps, doc.count, doc.regime)[0] if math.isfinite(eps) else math.inf
    if math.isinf(per):
        return per, 0.0
    if doc.mechanism["kind"] == LAPLACE:
        return per, doc.sensitivity / per
    gamma = float(doc.mechanism.get("gamma", 4.0))
    beta = float(doc.mechanism.get("beta", 0.0))
    try:
        m = MechanismSpec.gencauchy(per, doc.sensitivity, gamma, beta)
    except InvalidArgumentError:
        return per, math.inf
    return per, m.scale


def calibrate_goal(doc: ScenarioDoc, goal: Goal, window=None) -> Dict[str, Any]:
    window = window or doc.window
    attrs = [doc.attributes[n] for n in goal.names]
    if isinstance(attrs[0].prior, WorstCase):
        out = _worst_set(doc, goal, window)
    elif all(a.exact for a in attrs):
        out = _exact_set(doc, goal)
    elif any(a.exact for a in attrs):
        raise ScenarioError(f"{goal.label()}: cannot mix exact-guess and radius attributes in one set")
    else:
        out = _metric_set(doc, goal, window)
    res: EpsilonResult = out["result"]
    per, scale = _noise(doc, res.epsilon if res.feasible else -1.0)
    out.update(
        goal=goal.label(),
        combinator=goal.combinator,
        epsilon=res.epsilon,
        feasible=res.feasible,
        vacuous=res.vacuous,
        side=res.side,
        per_output_epsilon=per,
        noise_scale=scale,
    )
    if res.detail and res.feasible:
        out["notes"].append(res.detail)
    return out


def calibrate(doc: ScenarioDoc, window=None) -> Dict[str, Any]:
    sets = [calibrate_goal(doc, g, window) for g in doc.goals]
    feasible = all(s["feasible"] for s in sets)
    # protecting each set separately: the largest noise covers all of them
    eps = min(s["epsilon"] for s in sets)
    noise = max(s["noise_scale"] for s in sets)
    per, _ = _noise(doc, eps if feasible else -1.0)
    report = {
        "scenario": doc.name,
        "schema": SCHEMA,
        "delta": doc.delta,
        "norm_p": doc.norm_p,
        "mechanism": doc.mechanism["kind"],
        "sensitivity": doc.sensitivity,
        "window": doc.window[0] if window is None else window[0],
        "outputs": {"count": doc.count, "regime": doc.regime, "per_output_epsilon": per},
        "sets": [_public(s) for s in sets],
        "epsilon": eps,
        "noise_scale": noise,
        "feasible": feasible,
    }
    if feasible and doc.count > 1 and per is not None and math.isfinite(per):
        report["outputs"]["composed_epsilon"] = BudgetVector(
            partition_budget(eps, doc.count, doc.regime), regime_norm(doc.regime)
        ).total()
    return report


def _public(s: Dict[str, Any]) -> Dict[str, Any]:
    out = {k: v for k, v in s.items() if k != "result"}
    if "worst_target" in out:
        out["worst_target"] = [str(x) for x in out["worst_target"]]
    if "targets" in out:
        out["targets"] = [x if isinstance(x, (int, float)) else str(x) for x in out["targets"]]
    return out


# ---- verification ------------------------------------------------------


def _exact_oracle(doc: ScenarioDoc, goal: Goal, eps: float) -> Dict[str, Any]:
    names = goal.names
    labels = [doc.attributes[n].prior.labels for n in names]
    points = []
    for combo in itertools.product(*labels):
        m = math.prod(doc.attributes[n].prior.mass(x) for n, x in zip(names, combo))
        points.append((combo, m))
    total = math.fsum(m for _, m in points)
    points = [(c, m / total) for c, m in points]
    points[-1] = (points[-1][0], 1.0 - math.fsum(m for _, m in points[:-1]))
    mech = MechanismSpec(LAPLACE, 1.0 / eps)
    worst = 0.0
    for target in _candidates(doc, goal):
        if goal.combinator == AND:
            tset = {target}
        else:
            tset = {c for c, _ in points if any(x == t for x, t in zip(c, target))}
        if len(tset) == len(points):
            continue
        rep = max_advantage(indicator_scenario(points, tset, mech))
        worst = max(worst, rep.max_advantage)
    return {"max_advantage": worst, "discretization_error": 0.0}


def _metric_oracle(doc: ScenarioDoc, goal: Goal, s: Dict[str, Any], eps: float) -> Dict[str, Any]:
    if len(goal.names) != 1:
        raise ScenarioError(f"{goal.label()}: the oracle checks single-attribute windows only")
    attr = doc.attributes[goal.names[0]]
    hints = attr.discretize
    if not hints:
        raise ScenarioError(
            f"{attr.name}: continuous prior without discretize hints; add "
            '"discretize": {"bins": N, "range": [lo, hi]} to the attribute'
        )
    lo, hi = (float(x) for x in hints["range"])
    disc = discretize_continuous(attr.prior, int(hints.get("bins", 200)), lo, hi)
    t, r, a = float(s["targets"][0]), attr.r, float(s["a"])
    # the guarantee covers the window only: keep it, squeeze the outside mass onto it
    inside = [(x, m) for x, m in disc.points if abs(x - t) <= a]
    target = {x for x, _ in inside if abs(x - t) <= r}
    p = math.fsum(m for x, m in inside if x in target)
    rest = math.fsum(m for x, m in inside if x not in target)
    if not target or rest <= 0:
        raise ScenarioError(f"{attr.name}: discretisation too coarse for radius {r}")
    pts = [(x, m if x in target else m * (1.0 - p) / rest) for x, m in inside]
    pts[-1] = (pts[-1][0], 1.0 - math.fsum(m for _, m in pts[:-1]))
    scen = DiscreteScenario(tuple(pts), lambda x: x, target, MechanismSpec(LAPLACE, 1.0 / eps))
    rep = max_advantage(scen)
    return {"max_advantage": rep.max_advantage, "discretization_error": disc.max_bin_mass}


def verify(doc: ScenarioDoc, epsilon: Optional[float] = None, report: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Check each set with the brute-force attacker at the calibrated (or given) epsilon."""
    report = report or calibrate(doc)
    out_sets = []
    for g, s in zip(doc.goals, report["sets"]):
        eps = s["epsilon"] if epsilon is None else float(epsilon)
        entry: Dict[str, Any] = {"goal": g.label(), "epsilon": eps}
        if math.isinf(eps) and eps > 0:
            entry.update(max_advantage=0.0, verdict="PASS", note="vacuous bound")
        elif not eps > 0:
            entry.update(verdict="FAIL", note="no positive epsilon to verify")
        elif s["kind"] == "worst":
            raise ScenarioError(f"{g.label()}: a worst-case prior has no concrete inputs to verify")
        else:
            if s["kind"] == "exact":
                res = _exact_oracle(doc, g, eps)
            else:
                res = _metric_oracle(doc, g, s, eps)
            ok = res["max_advantage"] <= doc.delta + GRID_SLACK
            entry.update(res, verdict="PASS" if ok else "FAIL")
        out_sets.append(entry)
    verdict = "PASS" if all(e["verdict"] == "PASS" for e in out_sets) else "FAIL"
    return {"verdict": verdict, "slack": GRID_SLACK, "delta": doc.delta, "sets": out_sets}


# ---- bridge -------------------------------------------------------------


def run_bridge(doc: ScenarioDoc) -> Dict[str, Any]:
    spec = doc.bridge
    if not spec:
        raise ScenarioError("scenario has no bridge section")
    direction = spec.get("direction")
    report = calibrate(doc)
    worst = min(report["sets"], key=lambda s: s["epsilon"])
    p = _num(spec.get("p", worst["p"]), "bridge p")
    q = _num(spec.get("q", worst["q"]), "bridge q")
    out: Dict[str, Any] = {"direction": direction, "p": p, "q": q}
    if direction in ("dp-to-ga-fixed-delta", "dp-to-ga-fixed-eps"):
        eps = _num(spec["epsilon"], "bridge epsilon")
        delta = _num(spec.get("delta", 0.0), "bridge delta")
        c_t = _num(spec.get("c_t", 0.0), "bridge c_t")
        scale = _num(spec.get("scale", doc.sensitivity / eps if eps > 0 else math.inf), "bridge scale")
        if doc.mechanism["kind"] == LAPLACE:
            mech = MechanismSpec(LAPLACE, scale, c_t=c_t)
        else:
            mech = MechanismSpec(GENCAUCHY, scale, gamma=float(doc.mechanism.get("gamma", 4.0)), c_t=c_t)
        if direction == "dp-to-ga-fixed-delta":
            bp = br.dp_to_ga_fixed_delta(eps, delta, p, q, mech, _num(spec["delta_prime"], "delta_prime"))
        else:
            bp = br.dp_to_ga_fixed_eps(eps, delta, p, q, mech, _num(spec["eps_prime"], "eps_prime"))
        out["params"] = _params(bp)
    elif direction == "ga-to-dp-probabilistic":
        res = br.ga_to_dp_probabilistic(_num(spec["delta_shared"], "delta_shared"), p, doc.delta, q, worst["a"])
        out["params"] = {"eps": res.eps, "delta": res.delta, "vacuous": res.vacuous, "status": br.OK}
    elif direction == "ga-to-dp-approximate-laplace":
        c_t = _num(spec["c_t"], "c_t")
        C = _num(spec.get("C", "inf"), "C")
        kwargs = {}
        if "b_start" in spec:
            kwargs["b_start"] = _num(spec["b_start"], "b_start")
        res = br.ga_to_dp_approximate_laplace(doc.delta, p, q, c_t, C, **kwargs)
        out["params"] = _params(res.params)
        out.update(noise_level=res.noise_level, baseline_noise=res.baseline_noise,
                   beta=res.beta, C_used=res.C_used, posterior_bound=res.posterior_bound)
    else:
        raise ScenarioError(f"unknown bridge direction {direction!r}")
    return out


def _params(bp: br.BridgeParams) -> Dict[str, Any]:
    return {k: getattr(bp, k) for k in bp.__dataclass_fields__}


# ---- serialisation ------------------------------------------------------


def _canon(x: Any) -> Any:
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float("%.12g" % x)
    if isinstance(x, int):
        return x
    if isinstance(x, dict):
        return {str(k): _canon(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_canon(v) for v in x]
    return str(x)


def to_json(obj: Any) -> str:
    """Canonical JSON: sorted keys, 12 significant digits, non-finite values as strings."""
    return json.dumps(_canon(obj), sort_keys=True, indent=2) + "\n"
