"""Run configuration: packaged defaults, an optional JSON file, environment
variables for the cipher constants, then command-line overrides."""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .chaos import ChaoticParams
from .codec import CodecConfig
from .errors import ConfigError, IdmarkError
from .manipulations import FAMILIES, ManipulationSpec, preset

CHAOS_ENV = {"x0": "IDMARK_X0", "r": "IDMARK_R", "p": "IDMARK_P", "q": "IDMARK_Q"}
PATH_KEYS = ("embeddings", "corpus", "model", "registry")


def default_document() -> dict:
    text = resources.files("idmark").joinpath("default_config.json").read_text()
    return json.loads(text)


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key not in ("swap_betas",):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def sub_seed(master: int, *counters: int) -> int:
    """Independent 32-bit seed for one (image, manipulation, ...) slot."""
    return int(np.random.SeedSequence([master, *counters]).generate_state(1)[0])


@dataclass
class RunConfig:
    watermark_length: int = 128
    cutoff: float = 0.5
    master_seed: int = 0
    threshold: float = 0.75
    codec: CodecConfig = field(default_factory=CodecConfig)
    preset: str = "regular"
    presets: dict = field(default_factory=dict)
    swap_beta: float = 0.05
    swap_betas: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)
    chaos: dict = field(default_factory=dict, repr=False)

    def chaotic_params(self, length: int | None = None) -> ChaoticParams:
        try:
            return ChaoticParams(
                x0=float(self.chaos["x0"]), r=float(self.chaos["r"]),
                p=int(self.chaos["p"]), q=int(self.chaos["q"]),
                length=int(length or self.watermark_length),
            )
        except KeyError as exc:
            raise ConfigError(f"chaotic parameter {exc} is not set") from None

    def path(self, key: str, required: bool = True) -> Path | None:
        value = self.paths.get(key)
        if value is None:
            if required:
                raise ConfigError(f"no {key} path configured (use --{key} or the config file)")
            return None
        return Path(value)

    def preset_specs(self, difficulty: str, seed: int = 0) -> list[ManipulationSpec]:
        return preset(difficulty, self.presets, seed)

    def public_dict(self) -> dict:
        """Settings safe to write into reports; the cipher constants are omitted."""
        return {
            "watermark_length": self.watermark_length,
            "cutoff": self.cutoff,
            "master_seed": self.master_seed,
            "threshold": self.threshold,
            "codec": self.codec.to_dict(),
            "preset": self.preset,
            "swap_beta": self.swap_beta,
        }


def load_config(path: str | Path | None = None, overrides: dict | None = None,
                environ: dict | None = None) -> RunConfig:
    doc = default_document()
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        doc = _merge(doc, user)
    environ = os.environ if environ is None else environ
    for key, var in CHAOS_ENV.items():
        if environ.get(var):
            doc["chaos"][key] = environ[var]
    if overrides:
        doc = _merge(doc, overrides)

    try:
        presets = {name: {kind: tuple(v) for kind, v in table.items()}
                   for name, table in doc["presets"].items()}
        for name, table in presets.items():
            if set(table) != set(FAMILIES):
                raise ConfigError(f"preset {name!r} must define exactly {list(FAMILIES)}")
        cfg = RunConfig(
            watermark_length=int(doc["watermark_length"]),
            cutoff=float(doc["cutoff"]),
            master_seed=int(doc["master_seed"]),
            threshold=float(doc["threshold"]),
            codec=CodecConfig.from_dict(doc["codec"]),
            preset=str(doc["preset"]),
            presets=presets,
            swap_beta=float(doc["swap_beta"]),
            swap_betas={str(k): float(v) for k, v in doc["swap_betas"].items()},
            paths={k: doc.get("paths", {}).get(k) for k in PATH_KEYS},
            chaos=dict(doc["chaos"]),
        )
        if cfg.preset not in cfg.presets:
            raise ConfigError(f"preset {cfg.preset!r} is not defined")
        for name in cfg.presets:
            cfg.preset_specs(name)  # validates every parameter tuple
    except KeyError as exc:
        raise ConfigError(f"config is missing {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    except IdmarkError as exc:
        raise ConfigError(str(exc)) from None
    return cfg
