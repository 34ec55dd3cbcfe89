"""Experiment configuration: a single INI-style file with nested sections.

Every constant of the reference experiment appears as a named default, so an
empty file reproduces it; any key can be overridden.  Sections:

    [experiment]  dims, methods, replications, base_seed, workers
    [problem]     lambda_reg, box_half_width, trunc, sub_block
    [minibatch]   m, K
    [vr]          q0, m1, m, K
    [disfom]      rho_hat_minibatch, rho_hat_vr
    [spider]      eta_scale
    [smd]         subproblem_tol, max_inner
    [race]        dims, trials, rho_hat, box_bound, alpha,
                  time_multiple_box, time_multiple_l1box
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

__all__ = ["ConfigError", "BenchConfig", "load_config", "validate_config", "KNOWN_METHODS"]

# Frozen method order; indices feed the seed derivation, so the order is part
# of the reproducibility contract.
KNOWN_METHODS = (
    "DISFOM_minibatch",
    "DISFOM_vr",
    "SGD",
    "SPIDER",
    "SMD_minibatch",
    "SMD_vr",
)


class ConfigError(ValueError):
    """Invalid or unparsable experiment configuration."""


@dataclass
class BenchConfig:
    # [experiment]
    dims: tuple[int, ...] = (128, 256, 512, 1024, 2048, 4096, 8192, 16384)
    methods: tuple[str, ...] = KNOWN_METHODS
    replications: int = 3
    base_seed: int = 20240601
    workers: int = 1
    # [problem]
    lambda_reg: float = 2.5
    box_half_width: float = 3.0
    trunc: float = 3.0
    sub_block: int = 100
    # [minibatch]
    mb_m: int = 1000
    mb_K: int = 300
    # [vr]
    vr_q0: int = 9
    vr_m1: int = 1000
    vr_m: int = 100
    vr_K: int = 1350
    # [disfom]
    rho_hat_minibatch: float = 2.0
    rho_hat_vr: float = 128.0
    # [spider]
    spider_eta_scale: float = 0.1
    # [smd]
    smd_subproblem_tol: float = 1e-8
    smd_max_inner: int = 200_000
    # [race]
    race_dims: tuple[int, ...] = (64, 128, 256, 512, 1024, 2048, 4096, 8192)
    race_trials: int = 10
    race_rho_hat: float = 1.0
    race_box_bound: float = 20.0
    race_alpha: float = 10.0
    race_time_multiple_box: float = 100.0
    race_time_multiple_l1box: float = 10.0
    problems: list[str] = field(default_factory=list)  # validation messages

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name == "problems":
                continue
            val = getattr(self, f.name)
            out[f.name] = list(val) if isinstance(val, tuple) else val
        return out


_SECTION_KEYS = {
    ("experiment", "dims"): ("dims", "int_list"),
    ("experiment", "methods"): ("methods", "str_list"),
    ("experiment", "replications"): ("replications", "int"),
    ("experiment", "base_seed"): ("base_seed", "int"),
    ("experiment", "workers"): ("workers", "int"),
    ("problem", "lambda_reg"): ("lambda_reg", "float"),
    ("problem", "box_half_width"): ("box_half_width", "float"),
    ("problem", "trunc"): ("trunc", "float"),
    ("problem", "sub_block"): ("sub_block", "int"),
    ("minibatch", "m"): ("mb_m", "int"),
    ("minibatch", "k"): ("mb_K", "int"),
    ("vr", "q0"): ("vr_q0", "int"),
    ("vr", "m1"): ("vr_m1", "int"),
    ("vr", "m"): ("vr_m", "int"),
    ("vr", "k"): ("vr_K", "int"),
    ("disfom", "rho_hat_minibatch"): ("rho_hat_minibatch", "float"),
    ("disfom", "rho_hat_vr"): ("rho_hat_vr", "float"),
    ("spider", "eta_scale"): ("spider_eta_scale", "float"),
    ("smd", "subproblem_tol"): ("smd_subproblem_tol", "float"),
    ("smd", "max_inner"): ("smd_max_inner", "int"),
    ("race", "dims"): ("race_dims", "int_list"),
    ("race", "trials"): ("race_trials", "int"),
    ("race", "rho_hat"): ("race_rho_hat", "float"),
    ("race", "box_bound"): ("race_box_bound", "float"),
    ("race", "alpha"): ("race_alpha", "float"),
    ("race", "time_multiple_box"): ("race_time_multiple_box", "float"),
    ("race", "time_multiple_l1box"): ("race_time_multiple_l1box", "float"),
}


def _parse_value(raw: str, kind: str):
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "int_list":
        return tuple(int(tok.strip()) for tok in raw.split(",") if tok.strip())
    if kind == "str_list":
        return tuple(tok.strip() for tok in raw.split(",") if tok.strip())
    raise AssertionError(kind)


def load_config(path: str | None) -> BenchConfig:
    """Parse an INI config into a BenchConfig; None means all defaults.

    Unknown sections or keys are errors, not silently ignored.
    """
    cfg = BenchConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found or unreadable: {path}")
    for section in parser.sections():
        for key, raw in parser.items(section):
            lookup = (section.lower(), key.lower())
            if lookup not in _SECTION_KEYS:
                raise ConfigError(f"unknown config key [{section}] {key}")
            attr, kind = _SECTION_KEYS[lookup]
            try:
                setattr(cfg, attr, _parse_value(raw, kind))
            except ValueError as exc:
                raise ConfigError(f"bad value for [{section}] {key}: {raw!r}") from exc
    return cfg


def validate_config(cfg: BenchConfig) -> list[str]:
    """Return a list of validation problems (empty when the config is usable)."""
    errs: list[str] = []
    if not cfg.dims:
        errs.append("dims must be nonempty")
    if any(d < cfg.sub_block for d in cfg.dims):
        errs.append(f"all dims must be >= sub_block ({cfg.sub_block})")
    if cfg.replications < 1:
        errs.append("replications must be >= 1")
    if cfg.workers < 1:
        errs.append("workers must be >= 1")
    unknown = [m for m in cfg.methods if m not in KNOWN_METHODS]
    if unknown:
        errs.append(f"unknown methods: {', '.join(unknown)}")
    if not cfg.methods:
        errs.append("methods must be nonempty")
    for name in ("mb_m", "mb_K", "vr_q0", "vr_m1", "vr_m", "vr_K", "race_trials"):
        if getattr(cfg, name) < 1:
            errs.append(f"{name} must be >= 1")
    for name in (
        "lambda_reg", "box_half_width", "trunc", "rho_hat_minibatch", "rho_hat_vr",
        "spider_eta_scale", "smd_subproblem_tol", "race_rho_hat", "race_box_bound",
        "race_alpha", "race_time_multiple_box", "race_time_multiple_l1box",
    ):
        if getattr(cfg, name) <= 0:
            errs.append(f"{name} must be positive")
    # The mirror-descent step constant needs lambda/2 above the truncated
    # variance; reject configs where it is not, rather than fall back.
    if any(m.startswith("SMD") for m in cfg.methods):
        from ..problems import sigma_sq_trunc_normal

        if cfg.trunc > 0 and cfg.lambda_reg > 0:
            if cfg.lambda_reg / 2.0 <= sigma_sq_trunc_normal(cfg.trunc):
                errs.append(
                    "SMD requires lambda_reg / 2 > truncated-normal variance"
                )
    return errs
