"""Line-oriented run configuration: ``section.key = value`` with ``#`` comments."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields, replace

import numpy as np

from .dynamics import ModelParams
from .errors import ConfigError
from .reference import CONSTANT_MODES, m_of_alpha
from .spectral import make_grid

COMMANDS = ("simulate", "picard", "regularity", "validate")
DATA_KINDS = ("cazenave_naumkin", "traveling_wave", "one_sided", "file")
SCHEMES = ("etdrk4", "strang")


@dataclass(frozen=True)
class RunConfig:
    command: str = "validate"
    n: int = 1024
    L: float = 32.0 * math.pi
    alpha: float = 0.5
    sign: int = 1
    s: int | None = None
    lam: float = 0.1
    delta: float = 1.0
    T: float = 1.0
    dt: float = 1e-4
    slice_count: int = 64
    scheme: str = "etdrk4"
    data: str = "cazenave_naumkin"
    data_lambda: float = 0.1
    theta: float = 0.0
    phi: str = "none"
    c: float = 1.0
    constant_mode: str = "ode_derived"
    x0: float = 5.0
    data_s: int = 4
    data_l: int = 2
    c_k: float = 0.01
    path: str = ""
    v: float = 1.0
    eps_prime: float = 1.0
    R: float = 6.0
    max_iter: int = 60
    rtol: float = 1e-9
    auto_T: bool = False
    out: str = "out"
    seed: int = 0

    @property
    def m(self):
        return m_of_alpha(self.alpha)

    def model_params(self):
        return ModelParams(alpha=self.alpha, sign=self.sign, s=self.s, lam=self.lam, delta=self.delta)

    def grid(self):
        return make_grid(self.n, self.L)


# config key -> (RunConfig field, type)
KEYS = {
    "run.command": ("command", str),
    "run.seed": ("seed", int),
    "grid.n": ("n", int),
    "grid.L": ("L", float),
    "model.alpha": ("alpha", float),
    "model.sign": ("sign", int),
    "model.s": ("s", int),
    "model.lambda": ("lam", float),
    "model.delta": ("delta", float),
    "time.T": ("T", float),
    "time.dt": ("dt", float),
    "time.slice_count": ("slice_count", int),
    "time.scheme": ("scheme", str),
    "data.kind": ("data", str),
    "data.lambda": ("data_lambda", float),
    "data.theta": ("theta", float),
    "data.phi": ("phi", str),
    "data.c": ("c", float),
    "data.constant_mode": ("constant_mode", str),
    "data.x0": ("x0", float),
    "data.s": ("data_s", int),
    "data.l": ("data_l", int),
    "data.c_k": ("c_k", float),
    "data.path": ("path", str),
    "regularity.v": ("v", float),
    "regularity.eps_prime": ("eps_prime", float),
    "regularity.R": ("R", float),
    "picard.max_iter": ("max_iter", int),
    "picard.rtol": ("rtol", float),
    "picard.auto_T": ("auto_T", bool),
    "output.dir": ("out", str),
}
FIELD_KEYS = {f: k for k, (f, _) in KEYS.items()}

REQUIRED = {
    "simulate": ("model.alpha", "time.T", "time.dt", "data.kind"),
    "picard": ("model.alpha", "time.T", "data.kind"),
    "regularity": ("model.alpha", "time.T", "time.dt"),
    "validate": (),
}

_LINE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\.([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")
_PI = re.compile(r"^([-+]?[0-9.eE+-]*)\s*\*?\s*pi$")


def _parse_float(text):
    m = _PI.match(text)
    if m:
        coef = m.group(1)
        return (float(coef) if coef not in ("", "+", "-") else float(coef + "1")) * math.pi
    return float(text)


def _parse_value(text, kind):
    if kind is bool:
        low = text.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if kind is int:
        if not re.fullmatch(r"[-+]?\d+", text):
            raise ValueError(f"expected an integer, got {text!r}")
        return int(text)
    if kind is float:
        value = _parse_float(text)
        if not math.isfinite(value):
            raise ValueError(f"expected a finite number, got {text!r}")
        return value
    if len(text) >= 2 and text[0] == text[-1] == '"':
        return text[1:-1]
    return text


def parse_config(text, command=None):
    """Parse and validate a configuration document.

    ``command`` (from the command line) takes effect when the document has no
    ``run.command``; a conflicting value is an error.
    """
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise ConfigError(f"expected 'section.key = value', got {raw.strip()!r}", line=lineno)
        key = f"{m.group(1)}.{m.group(2)}"
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        field_name, kind = KEYS[key]
        if field_name in values:
            raise ConfigError(f"duplicate key {key!r}", line=lineno)
        try:
            values[field_name] = _parse_value(m.group(3), kind)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", line=lineno) from None
        lines[field_name] = lineno
    if command is not None:
        if "command" in values and values["command"] != command:
            raise ConfigError(
                f"run.command = {values['command']!r} conflicts with subcommand {command!r}",
                line=lines["command"],
            )
        values["command"] = command
    cmd = values.get("command")
    if cmd is None:
        needs = "; ".join(f"{c}: {', '.join(REQUIRED[c]) or 'nothing else'}" for c in COMMANDS)
        raise ConfigError(f"missing required key run.command (one of {', '.join(COMMANDS)}); then {needs}")
    if cmd not in COMMANDS:
        raise ConfigError(f"run.command must be one of {COMMANDS}, got {cmd!r}", line=lines.get("command"))
    missing = [k for k in REQUIRED[cmd] if KEYS[k][0] not in values]
    if missing:
        raise ConfigError(f"missing required keys for {cmd}: {', '.join(missing)}")
    cfg = RunConfig(**values)
    return validate_config(cfg, lines)


def validate_config(cfg, lines=None):
    """Re-check module preconditions; returns cfg with derived values resolved."""
    lines = lines or {}

    def fail(field_name, message):
        raise ConfigError(f"{FIELD_KEYS.get(field_name, field_name)}: {message}", line=lines.get(field_name))

    def check(field_name, func):
        try:
            return func()
        except ConfigError as exc:
            fail(field_name, exc.message)
        except ValueError as exc:
            fail(field_name, str(exc))

    check("n", lambda: make_grid(cfg.n, cfg.L))
    check("alpha", lambda: m_of_alpha(cfg.alpha))
    if cfg.sign not in (1, -1):
        fail("sign", "must be +1 or -1")
    if cfg.s is not None and cfg.s < 2 * cfg.m + 4:
        fail("s", f"must be >= 2m + 4 = {2 * cfg.m + 4}")
    if not cfg.lam > 0:
        fail("lam", "must be positive")
    if not cfg.delta > 0:
        fail("delta", "must be positive")
    cfg = replace(cfg, s=cfg.model_params().s)
    if cfg.scheme not in SCHEMES:
        fail("scheme", f"must be one of {SCHEMES}")
    if cfg.data not in DATA_KINDS:
        fail("data", f"must be one of {DATA_KINDS}")
    if not cfg.T > 0:
        fail("T", "must be positive")
    if not cfg.dt > 0:
        fail("dt", "must be positive")
    if cfg.slice_count < 1:
        fail("slice_count", "must be at least 1")
    if cfg.command in ("simulate", "regularity"):
        steps = cfg.T / cfg.slice_count / cfg.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps) or round(steps) < 1:
            fail("dt", f"must divide T / slice_count = {cfg.T / cfg.slice_count:g}")
    if cfg.seed < 0 or cfg.seed >= 2**64:
        fail("seed", "must be an unsigned 64-bit integer")
    if cfg.data == "cazenave_naumkin":
        if not cfg.data_lambda > 0:
            fail("data_lambda", "must be positive")
        check("phi", lambda: parse_phi_spec(cfg.phi))
    if cfg.data == "traveling_wave":
        if not cfg.c > 0:
            fail("c", "must be positive")
        if cfg.constant_mode not in CONSTANT_MODES:
            fail("constant_mode", f"must be one of {CONSTANT_MODES}")
    if cfg.data == "one_sided" or cfg.command == "regularity":
        if cfg.data_s + cfg.data_l + 1 > cfg.n // 4:
            fail("data_s", f"order s + l + 1 exceeds n/4 = {cfg.n // 4}")
        if cfg.data_l < 1:
            fail("data_l", "must be a positive integer")
    if cfg.data == "file" and not cfg.path:
        fail("path", "data.kind = file needs data.path")
    if cfg.command == "regularity":
        if not cfg.v > 0:
            fail("v", "must be positive")
        if not cfg.eps_prime > 0:
            fail("eps_prime", "must be positive")
        if not cfg.R > cfg.eps_prime:
            fail("R", "must exceed eps_prime")
    if cfg.max_iter < 1:
        fail("max_iter", "must be at least 1")
    if not cfg.rtol > 0:
        fail("rtol", "must be positive")
    return cfg


def parse_phi_spec(spec):
    """``none``, ``gaussian:<a>`` (a lam e^{-x^2}) or ``random:<a>`` (seeded, ||<x>^m phi||_inf = a lam)."""
    spec = spec.strip()
    if spec == "none":
        return ("none", 0.0)
    kind, _, amp = spec.partition(":")
    if kind not in ("gaussian", "random") or not amp:
        raise ConfigError(f"phi spec must be none, gaussian:<a> or random:<a>, got {spec!r}")
    try:
        a = float(amp)
    except ValueError:
        raise ConfigError(f"phi amplitude must be a number, got {amp!r}") from None
    if not 0.0 <= a <= 1.0:
        raise ConfigError(f"phi amplitude must lie in [0, 1] so that ||<x>^m phi||_inf <= lambda, got {a}")
    return (kind, a)


def build_phi(spec, grid, lam, m, seed):
    from .spectral import Field

    kind, a = parse_phi_spec(spec)
    if kind == "none":
        return None
    if kind == "gaussian":
        return Field(grid, a * lam * np.exp(-grid.x**2), True)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(grid.n)
    # Smooth the noise with a Gaussian Fourier filter, then normalise the weighted sup.
    g = np.fft.ifft(np.fft.fft(noise) * np.exp(-(grid.k**2))).real
    g = g / np.max(np.abs(g))
    return Field(grid, a * lam * g * grid.bracket(-m), True)


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(cfg):
    """Render every field; parse_config(format_config(cfg)) == cfg."""
    out = [f"# derived: model.m = {cfg.m}"]
    for key, (field_name, _) in KEYS.items():
        out.append(f"{key} = {_format_value(getattr(cfg, field_name))}")
    return "\n".join(out) + "\n"


def config_dict(cfg):
    d = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    d["m"] = cfg.m
    return d
