"""Configuration management for kwsfcm.

Two layers:
- Config: environment-level settings (home directory for logs, thread cap), loaded by
  load_config() from CLI arguments, environment variables and defaults.
  Default home is ./.kwsfcm (relative to the current working directory); it can be overridden
  with the --home CLI flag or the KWSFCM_HOME environment variable. Precedence: CLI flag > env
  var > default. KWSFCM_THREADS caps parallelism (default: CPU count).
- RunConfig: everything one command needs (algorithm, parameter sets, paths, replications).
  Settings arrive as flat `key = value` strings from a config file and from CLI flags; CLI flags
  win over the file, the file wins over built-in defaults. RunConfig.items() echoes the
  effective configuration into every artifact.
"""

import math
import os
import sys
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from dotenv import load_dotenv
from loguru import logger

from .params import (
    Algorithm,
    ClusterParams,
    EqfParams,
    InitMode,
    InvalidParameter,
    KernelKind,
    KernelParams,
    NoiseKind,
    NoiseSpec,
    SusanParams,
    WeightMode,
)


@dataclass
class Config:
    """Environment-level configuration. All kwsfcm housekeeping data lives under `home`."""

    home: Path
    threads: int = 1

    @property
    def logs_dir(self) -> Path:
        """Directory for application logs."""
        return self.home / "logs"


def _threads_from_env() -> int:
    default = os.cpu_count() or 1
    raw = os.environ.get("KWSFCM_THREADS")
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning(f"Ignoring KWSFCM_THREADS={raw!r}; using {default}")
        return default


def load_config(args: list[str] | None = None) -> Config:
    """Load configuration from CLI args, environment, or defaults.

    Precedence: CLI flag > env var > default (./.kwsfcm)
    """
    load_dotenv()

    if args is None:
        args = sys.argv[1:]

    # Check CLI argument: --home /path/to/home
    home_path: Path | None = None
    for i, arg in enumerate(args):
        if arg == "--home" and i + 1 < len(args):
            home_path = Path(args[i + 1])
            break
        if arg.startswith("--home="):
            home_path = Path(arg.removeprefix("--home="))
            break

    # Check environment variable: KWSFCM_HOME
    if home_path is None:
        env_home = os.environ.get("KWSFCM_HOME")
        if env_home:
            home_path = Path(env_home)

    if home_path is None:
        home_path = Path("./.kwsfcm")

    cfg = Config(home=home_path.resolve(), threads=_threads_from_env())
    cfg.logs_dir.mkdir(parents=True, exist_ok=True, mode=0o700)
    return cfg


CONFIG: Config | None = None


def get_config() -> Config:
    """Returns the global CONFIG instance, loading it on first use."""
    global CONFIG
    if CONFIG is None:
        CONFIG = load_config()
    return CONFIG


class UnknownKey(InvalidParameter):
    """Raised for a configuration key that names no setting."""


def _float(text: str) -> float:
    # Fractions such as 1/16 are accepted wherever a float is.
    return float(Fraction(text.strip())) if "/" in text else float(text)


def _optional_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "auto", "none") else _float(text)


def _bool(text: str) -> bool:
    match text.strip().lower():
        case "1" | "true" | "yes" | "on":
            return True
        case "0" | "false" | "no" | "off":
            return False
    raise ValueError(f"not a boolean: {text!r}")


def _log_base(text: str) -> float:
    return math.e if text.strip().lower() == "e" else _float(text)


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(sorted({int(part) for part in text.split(",") if part.strip()}))


# key -> (section, field, parser)
SETTINGS: dict[str, tuple[str, str, Callable[[str], object]]] = {
    "algo": ("run", "algorithm", Algorithm),
    "c": ("cluster", "c", int),
    "m": ("cluster", "m", _float),
    "alpha": ("cluster", "alpha", _float),
    "epsilon": ("cluster", "epsilon", _float),
    "max_iter": ("cluster", "max_iter", int),
    "init": ("cluster", "init", InitMode),
    "seed": ("cluster", "seed", int),
    "kernel.kind": ("kernel", "kind", KernelKind),
    "kernel.sigma": ("kernel", "sigma", _float),
    "kernel.a": ("kernel", "a", _float),
    "kernel.b": ("kernel", "b", _float),
    "kernel.degree": ("kernel", "p", int),
    "susan.t": ("susan", "t", _optional_float),
    "susan.min_ratio": ("susan", "min_ratio", _float),
    "susan.max_dev": ("susan", "max_dev", _float),
    "susan.exponent": ("susan", "exponent", int),
    "susan.weights": ("susan", "weights", WeightMode),
    "noise.kind": ("noise", "kind", NoiseKind),
    "noise.level": ("noise", "level", _float),
    "noise.seed": ("noise", "seed", int),
    "eqf.n": ("eqf", "n", int),
    "eqf.alpha": ("eqf", "alpha_k", _float),
    "eqf.gamma": ("eqf", "gamma", _float),
    "eqf.th": ("eqf", "th", _float),
    "eqf.levels": ("eqf", "levels", int),
    "entropy.base": ("run", "entropy_base", _log_base),
    "runs": ("run", "runs", int),
    "damping": ("run", "damping", _bool),
    "snapshot_at": ("run", "snapshot_at", _int_list),
}


def read_config_file(path: Path) -> dict[str, str]:
    """Parse a flat `key = value` file. `#` starts a comment; blank lines are ignored."""
    settings: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise InvalidParameter(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        settings[key.strip()] = value.strip()
    logger.debug(f"Read {len(settings)} setting(s) from {path}")
    return settings


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs to run, with its parameter sets already validated."""

    algorithm: Algorithm = Algorithm.KWSFCM
    cluster: ClusterParams = field(default_factory=ClusterParams)
    kernel: KernelParams = field(default_factory=KernelParams)
    susan: SusanParams = field(default_factory=SusanParams)
    noise: NoiseSpec | None = None
    eqf: EqfParams = field(default_factory=EqfParams)
    input: Path | None = None
    output: Path | None = None
    reference: Path | None = None
    runs: int = 1
    workers: int = 1
    damping: bool = True
    snapshot_at: tuple[int, ...] = ()
    entropy_base: float = math.e

    def __post_init__(self) -> None:
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if self.runs < 1:
            raise InvalidParameter(f"runs must be at least 1, got {self.runs}")
        if self.workers < 1:
            raise InvalidParameter(f"workers must be at least 1, got {self.workers}")
        if any(i < 1 for i in self.snapshot_at):
            raise InvalidParameter(f"snapshot_at iterations must be positive, got {self.snapshot_at}")
        if not (self.entropy_base > 0 and self.entropy_base != 1):
            raise InvalidParameter(f"entropy.base must be positive and not 1, got {self.entropy_base}")
        for name in ("input", "output", "reference"):
            value = getattr(self, name)
            if value is not None and not str(value):
                raise InvalidParameter(f"{name} path must not be empty")

    def with_settings(self, settings: Mapping[str, str]) -> RunConfig:
        """Apply `key = value` settings on top of this configuration."""
        sections: dict[str, dict[str, object]] = {}
        for key, text in settings.items():
            if key not in SETTINGS:
                raise UnknownKey(f"Unknown setting {key!r}")
            section, name, parse = SETTINGS[key]
            try:
                value = parse(text)
            except (ValueError, ZeroDivisionError) as e:
                raise InvalidParameter(f"{key}: cannot parse {text!r} ({e})") from e
            sections.setdefault(section, {})[name] = value
        updated = {
            "cluster": replace(self.cluster, **sections.get("cluster", {})),
            "kernel": replace(self.kernel, **sections.get("kernel", {})),
            "susan": replace(self.susan, **sections.get("susan", {})),
            "eqf": replace(self.eqf, **sections.get("eqf", {})),
        }
        if "noise" in sections:
            updated["noise"] = replace(self.noise or NoiseSpec(), **sections["noise"])
        return replace(self, **updated, **sections.get("run", {}))

    def items(self) -> list[tuple[str, object]]:
        """Effective configuration as ordered (key, value) pairs."""
        c, k, s, q = self.cluster, self.kernel, self.susan, self.eqf
        items: list[tuple[str, object]] = [
            ("algo", str(self.algorithm)),
            ("c", c.c),
            ("m", c.m),
            ("alpha", c.alpha),
            ("epsilon", c.epsilon),
            ("max_iter", c.max_iter),
            ("init", str(c.init)),
            ("seed", c.seed),
            ("kernel.kind", str(k.kind)),
            ("kernel.sigma", k.sigma),
            ("kernel.a", k.a),
            ("kernel.b", k.b),
            ("kernel.degree", k.p),
            ("susan.t", "auto" if s.t is None else s.t),
            ("susan.min_ratio", s.min_ratio),
            ("susan.max_dev", s.max_dev),
            ("susan.exponent", s.exponent),
            ("susan.weights", str(s.weights)),
        ]
        if self.noise is not None:
            items += [
                ("noise.kind", str(self.noise.kind)),
                ("noise.level", self.noise.level),
                ("noise.seed", self.noise.seed),
            ]
        items += [
            ("eqf.n", q.n),
            ("eqf.alpha", q.alpha_k),
            ("eqf.gamma", q.gamma),
            ("eqf.th", q.th),
            ("eqf.levels", q.levels),
            ("entropy.base", "e" if self.entropy_base == math.e else self.entropy_base),
            ("runs", self.runs),
            ("damping", self.damping),
            ("snapshot_at", list(self.snapshot_at)),
        ]
        if self.input is not None:
            items.append(("input", self.input.name))
        return items
