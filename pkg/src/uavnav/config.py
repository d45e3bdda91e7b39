"""INI run configuration with sections env / noise / filter / ppo / sweep.

Keys are the dataclass field names; nested reward constants use dotted keys
(``reward.r_success``), as do the filter parameters (``lpf.cutoff_rad_s``,
``kalman.q``, ``kalman.r``). Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field
from pathlib import Path

from .env import EnvConfig, RewardParams
from .evaluate import SweepSpec
from .filters import FilterConfig
from .noise import NoiseSpec, compose
from .ppo import PpoConfig


class ConfigError(ValueError):
    pass


_FILTER_KEYS = {"kind": "kind", "lpf.cutoff_rad_s": "lpf_cutoff_rad_s", "kalman.q": "kalman_q",
                "kalman.r": "kalman_r", "kalman.p0": "kalman_p0"}
_NOISE_KEYS = ("mu", "sigma", "injected_mu", "injected_sigma")
_SWEEP_KEYS = ("kind", "mu_min", "mu_max", "mu_step", "sigma_min", "sigma_max", "sigma_step", "denoisers",
               "episodes_per_cell", "seed", "deterministic")


@dataclass
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    injected: NoiseSpec = field(default_factory=NoiseSpec)
    filter: FilterConfig = field(default_factory=FilterConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    sweep: SweepSpec = field(default_factory=lambda: SweepSpec.preset("unbiased"))

    @property
    def effective_noise(self) -> NoiseSpec:
        """Sensor noise with the injected noise added on top."""
        return compose(self.noise, self.injected)


def _convert(raw: str, default, where: str):
    text = raw.strip()
    try:
        if text.lower() == "none" and (default is None or isinstance(default, float)):
            return None
        if isinstance(default, bool):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float) or default is None:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r}") from None


def _fields_defaults(cls) -> dict:
    inst = cls()
    return {f.name: getattr(inst, f.name) for f in dataclasses.fields(cls)}


def _section(cp, name):
    return dict(cp.items(name)) if cp.has_section(name) else {}


def _build_env(items: dict) -> EnvConfig:
    defaults = _fields_defaults(EnvConfig)
    defaults["obstacle_y_sigma"] = None
    rdefaults = _fields_defaults(RewardParams)
    kw, rkw = {}, {}
    for key, raw in items.items():
        if key.startswith("reward."):
            sub = key[len("reward."):]
            if sub not in rdefaults:
                raise ConfigError(f"[env] unknown key {key!r}")
            rkw[sub] = _convert(raw, rdefaults[sub], f"[env] {key}")
        elif key in defaults and key != "reward":
            kw[key] = _convert(raw, defaults[key], f"[env] {key}")
        else:
            raise ConfigError(f"[env] unknown key {key!r}")
    try:
        return EnvConfig(**kw, reward=RewardParams(**rkw))
    except ValueError as e:
        raise ConfigError(f"[env] {e}") from None


def _build_simple(cls, items: dict, section: str, rename: dict | None = None):
    defaults = _fields_defaults(cls)
    kw = {}
    for key, raw in items.items():
        name = rename.get(key) if rename is not None else key
        if name not in defaults:
            raise ConfigError(f"[{section}] unknown key {key!r}")
        kw[name] = _convert(raw, defaults[name], f"[{section}] {key}")
    try:
        return cls(**kw)
    except ValueError as e:
        raise ConfigError(f"[{section}] {e}") from None


def _build_sweep(items: dict) -> SweepSpec:
    for key in items:
        if key not in _SWEEP_KEYS:
            raise ConfigError(f"[sweep] unknown key {key!r}")
    kind = items.get("kind", "unbiased").strip()
    try:
        base = SweepSpec.preset(kind)
        kw = {}
        for axis in ("mu", "sigma"):
            lo, hi, step = getattr(base, axis)
            kw[axis] = (float(items.get(f"{axis}_min", lo)), float(items.get(f"{axis}_max", hi)),
                        float(items.get(f"{axis}_step", step)))
        if "denoisers" in items:
            kw["denoisers"] = tuple(d.strip() for d in items["denoisers"].split(",") if d.strip())
        if "episodes_per_cell" in items:
            kw["episodes_per_cell"] = int(items["episodes_per_cell"])
        if "seed" in items:
            kw["seed"] = int(items["seed"])
        if "deterministic" in items:
            kw["deterministic"] = _convert(items["deterministic"], True, "[sweep] deterministic")
        return SweepSpec.preset(kind, **kw)
    except ValueError as e:
        raise ConfigError(f"[sweep] {e}") from None


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"{source}: {e}") from None
    known = {"env", "noise", "filter", "ppo", "sweep"}
    for name in cp.sections():
        if name not in known:
            raise ConfigError(f"{source}: unknown section [{name}]")

    noise_items = _section(cp, "noise")
    for key in noise_items:
        if key not in _NOISE_KEYS:
            raise ConfigError(f"[noise] unknown key {key!r}")
    try:
        nf = {k: float(v) for k, v in noise_items.items()}
        noise = NoiseSpec(nf.get("mu", 0.0), nf.get("sigma", 0.0))
        injected = NoiseSpec(nf.get("injected_mu", 0.0), nf.get("injected_sigma", 0.0))
    except ValueError as e:
        raise ConfigError(f"[noise] {e}") from None

    return RunConfig(
        env=_build_env(_section(cp, "env")),
        noise=noise,
        injected=injected,
        filter=_build_simple(FilterConfig, _section(cp, "filter"), "filter", _FILTER_KEYS),
        ppo=_build_simple(PpoConfig, _section(cp, "ppo"), "ppo"),
        sweep=_build_sweep(_section(cp, "sweep")),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror or e}") from None
    return parse_config(text, str(path))


def _fmt(v) -> str:
    if v is None:
        return "none"
    if hasattr(v, "value"):
        return str(v.value)
    return repr(v) if isinstance(v, float) else str(v)


def dump_config(cfg: RunConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    env_items = {}
    for f in dataclasses.fields(EnvConfig):
        if f.name == "reward":
            for rf in dataclasses.fields(RewardParams):
                env_items[f"reward.{rf.name}"] = _fmt(getattr(cfg.env.reward, rf.name))
        else:
            env_items[f.name] = _fmt(getattr(cfg.env, f.name))
    cp["env"] = env_items
    cp["noise"] = {"mu": _fmt(cfg.noise.mu), "sigma": _fmt(cfg.noise.sigma),
                   "injected_mu": _fmt(cfg.injected.mu), "injected_sigma": _fmt(cfg.injected.sigma)}
    cp["filter"] = {key: _fmt(getattr(cfg.filter, name)) for key, name in _FILTER_KEYS.items()}
    cp["ppo"] = {f.name: _fmt(getattr(cfg.ppo, f.name)) for f in dataclasses.fields(PpoConfig)}
    s = cfg.sweep
    cp["sweep"] = {
        "kind": s.kind, "mu_min": _fmt(s.mu[0]), "mu_max": _fmt(s.mu[1]), "mu_step": _fmt(s.mu[2]),
        "sigma_min": _fmt(s.sigma[0]), "sigma_max": _fmt(s.sigma[1]), "sigma_step": _fmt(s.sigma[2]),
        "denoisers": ",".join(s.denoisers), "episodes_per_cell": str(s.episodes_per_cell),
        "seed": str(s.seed), "deterministic": str(s.deterministic).lower(),
    }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
