"""Experiment configuration: flat ``key = value`` files with ``[section]`` headers."""

from __future__ import annotations

import ast
import configparser
import math
import operator
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..geometry import InvalidCurveError, PolarCurve, sample_polar_boundary


class ConfigError(ValueError):
    """Invalid, incomplete or unreadable configuration."""


_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.USub: operator.neg, ast.UAdd: operator.pos}


def parse_number(text: str) -> float:
    """Arithmetic on literals and ``pi`` only, e.g. ``3*pi/2``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"not a number: {text!r}")

    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except SyntaxError:
        raise ConfigError(f"not a number: {text!r}") from None


def _floats(text: str, sep: str = ",") -> list[float]:
    return [parse_number(t) for t in text.split(sep) if t.strip()]


def _harmonics(text: str) -> tuple[tuple[int, float, float], ...]:
    """``k:a:b; k:a:b`` -> ((k, a, b), ...), radius term a cos(k t) + b sin(k t)."""
    out = []
    for item in text.split(";"):
        if not item.strip():
            continue
        parts = item.split(":")
        if len(parts) != 3:
            raise ConfigError(f"harmonic must be k:a:b, got {item!r}")
        out.append((int(parse_number(parts[0])), parse_number(parts[1]), parse_number(parts[2])))
    return tuple(out)


def _curve(kind: str, values: dict, where: str) -> PolarCurve | None:
    if kind == "none":
        return None
    if kind == "trig-polar":
        return PolarCurve.trig(parse_number(values.get("base", "1")), _harmonics(values.get("harmonics", "")))
    if kind == "circle":
        c = _floats(values.get("center", "0,0"))
        return PolarCurve.circle(c, parse_number(values["radius"]))
    if kind == "disk-union":
        circles = []
        for item in values.get("circles", "").split(";"):
            if item.strip():
                x, y, r = _floats(item)
                circles.append(PolarCurve.circle((x, y), r))
        if not circles:
            raise ConfigError(f"{where}.circles is empty")
        return PolarCurve.disk_union(circles)
    raise ConfigError(f"unknown {where}.kind {kind!r}")


@dataclass
class ReconstructionConfig:
    domain: PolarCurve
    obstacle: PolarCurve | None
    domain_segments: int = 100
    obstacle_segments: int | None = None
    gamma_ranges: list[tuple[float, float]] = field(default_factory=list)  # empty: whole boundary
    data_kind: str = "g1"
    T: float = 1.0
    delta: float = 0.0
    seed: int = 0
    h_inv: float = 2 * math.pi / 100
    h_fwd: float = 2 * math.pi / 150
    n_time: int = 70
    epsilon: float = 0.01
    M: int = 20
    f: float = 20.0
    window: tuple[float, float] | None = None
    init_center: tuple[float, float] = (0.0, 0.0)
    init_radius: float = 0.8
    stop_tol: float | None = None
    max_iter: int = 20
    out_dir: Path = Path("out")
    source: str = ""

    @property
    def stop_tolerance(self) -> float:
        return self.h_inv / 2 if self.stop_tol is None else self.stop_tol

    @property
    def velocity_window(self) -> tuple[float, float]:
        return (0.0, self.T / 2) if self.window is None else self.window

    def echo(self) -> dict:
        d = asdict(self)
        d["out_dir"] = str(self.out_dir)
        return d

    def validate(self) -> None:
        try:
            self.domain.validate()
            if self.obstacle is not None:
                self.obstacle.validate()
        except InvalidCurveError as exc:
            raise ConfigError(str(exc)) from None
        if self.data_kind not in ("g1", "g2"):
            raise ConfigError(f"data.kind must be g1 or g2, got {self.data_kind!r}")
        checks = [
            (self.T > 0, "data.T must be positive"),
            (self.delta >= 0, "data.delta must be nonnegative"),
            (self.h_inv > 0 and self.h_fwd > 0, "mesh sizes must be positive"),
            (self.n_time >= 1, "mesh.n_time must be >= 1"),
            (self.epsilon > 0, "qr.epsilon must be positive"),
            (self.M >= 0, "qr.M must be >= 0"),
            (self.max_iter >= 1, "stop.max_iter must be >= 1"),
            (self.init_radius > 0, "init.radius must be positive"),
            (self.domain_segments >= 3, "domain.segments must be >= 3"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        ratio = max(self.h_inv, self.h_fwd) / min(self.h_inv, self.h_fwd)
        if ratio < 1.4:
            raise ConfigError(f"forward and inversion mesh sizes must differ by a factor >= 1.4 (got {ratio:.3f})")
        w = self.velocity_window
        if len(w) != 2 or len(self.init_center) != 2:
            raise ConfigError("levelset.window and init.center need exactly two numbers")
        if not (0 <= w[0] < w[1] <= self.T):
            raise ConfigError(f"levelset.window {w} not inside [0, T]")
        for a, b in self.gamma_ranges:
            if not (0 <= a < b <= 2 * math.pi + 1e-12):
                raise ConfigError(f"gamma range ({a}, {b}) not inside [0, 2 pi)")
        # initial guess: strictly inside D and containing the true obstacle
        theta = np.linspace(0, 2 * np.pi, 720, endpoint=False)
        circle = np.column_stack([self.init_center[0] + self.init_radius * np.cos(theta),
                                  self.init_center[1] + self.init_radius * np.sin(theta)])
        if not all(self.domain.contains(p) for p in circle):
            raise ConfigError("initial guess is not strictly inside the domain")
        if self.obstacle is not None:
            for comp in sample_polar_boundary(self.obstacle, 360) if self.obstacle.kind == "disk-union" \
                    else [sample_polar_boundary(self.obstacle, 360)]:
                r = np.hypot(*(comp.vertices - np.asarray(self.init_center)).T)
                if r.max() >= self.init_radius:
                    raise ConfigError("initial guess does not contain the true obstacle")


# section -> allowed keys
_CURVE_KEYS = {"kind", "base", "harmonics", "center", "radius", "circles", "segments"}
_KEYS = {
    "domain": _CURVE_KEYS,
    "obstacle": _CURVE_KEYS,
    "gamma": {"ranges"},
    "data": {"kind", "T", "delta", "seed"},
    "mesh": {"h_inv", "h_fwd", "n_time"},
    "qr": {"epsilon", "M"},
    "levelset": {"f", "window"},
    "init": {"center", "radius"},
    "stop": {"tol", "max_iter"},
    "out": {"dir"},
}


def _read_parser(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    cp.optionxform = str  # keys are case sensitive ("T", "M")
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return cp


def _apply_overrides(cp: configparser.ConfigParser, overrides) -> None:
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, value = item.split("=", 1)
        if "." not in key:
            raise ConfigError(f"override key must be section.name, got {key!r}")
        sec, name = key.strip().split(".", 1)
        if not cp.has_section(sec):
            cp.add_section(sec)
        cp.set(sec, name, value.strip())


def load_config(path, overrides=()) -> ReconstructionConfig:
    cp = _read_parser(path)
    _apply_overrides(cp, overrides)
    for sec in cp.sections():
        if sec not in _KEYS:
            raise ConfigError(f"unknown section [{sec}]")
        for key in cp[sec]:
            if key not in _KEYS[sec]:
                raise ConfigError(f"unknown key {sec}.{key}")
    s = {sec: dict(cp[sec]) for sec in cp.sections()}
    get = lambda sec, key, default=None: s.get(sec, {}).get(key, default)  # noqa: E731
    try:
        dom = s.get("domain", {})
        domain = _curve(dom.get("kind", "trig-polar"), dom, "domain")
        if domain is None:
            raise ConfigError("domain.kind cannot be none")
        obs = s.get("obstacle", {})
        obstacle = _curve(obs.get("kind", "none"), obs, "obstacle")
        ranges_text = get("gamma", "ranges", "full").strip()
        ranges = []
        if ranges_text != "full":
            for item in ranges_text.split(","):
                a, b = item.split(":")
                ranges.append((parse_number(a), parse_number(b)))
        window = get("levelset", "window")
        cfg = ReconstructionConfig(
            domain=domain,
            obstacle=obstacle,
            domain_segments=int(parse_number(dom.get("segments", "100"))),
            obstacle_segments=int(parse_number(obs["segments"])) if "segments" in obs else None,
            gamma_ranges=ranges,
            data_kind=get("data", "kind", "g1").strip(),
            T=parse_number(get("data", "T", "1")),
            delta=parse_number(get("data", "delta", "0")),
            seed=int(parse_number(get("data", "seed", "0"))),
            h_inv=parse_number(get("mesh", "h_inv", "2*pi/100")),
            h_fwd=parse_number(get("mesh", "h_fwd", "2*pi/150")),
            n_time=int(parse_number(get("mesh", "n_time", "70"))),
            epsilon=parse_number(get("qr", "epsilon", "0.01")),
            M=int(parse_number(get("qr", "M", "20"))),
            f=parse_number(get("levelset", "f", "20")),
            window=tuple(_floats(window)) if window else None,
            init_center=tuple(_floats(get("init", "center", "0,0"))),
            init_radius=parse_number(get("init", "radius", "0.8")),
            stop_tol=parse_number(get("stop", "tol")) if get("stop", "tol") else None,
            max_iter=int(parse_number(get("stop", "max_iter", "20"))),
            out_dir=Path(get("out", "dir", "out")),
            source=str(path),
        )
    except (KeyError, ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad value in {path}: {exc}") from None
    cfg.validate()
    return cfg
