"""Experiment configuration: a flat key = value text format.

Grammar: one ``key = value`` pair per line; blank lines and text after
``#`` are ignored. Integer lists are comma-separated (``3,5,7``) or
inclusive ranges ``start:stop:step``. ``auto`` marks data-dependent
defaults (mapping dimension n-1, KPCA gamma 1/dim, dimension sweep grid
n down to n-40). `render_config` emits every key, so an echoed config
reparses to an identical object.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .errors import ConfigError
from .mapping import GamParams
from .stiefel import CgOptions

KNOWN_CLASSIFIERS = ("svm", "1nn", "3nn", "5nn", "ldc", "qdc", "tree")
KNOWN_DR_METHODS = ("pca", "lda", "kpca", "mfa")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_path: str = ""
    dataset_format: str = "csv"  # csv | hsb
    seed: int = 0
    trials: int = 10
    train_per_class: int = 10
    standardize: bool = False
    output_dir: str = "runs/out"
    plots: bool = True
    # mapping
    neighbors_within: int = 9
    neighbors_between: int = 9
    target_dim: int | None = None  # auto: n - 1
    restarts: int = 3
    cg_max_iters: int = 500
    cg_grad_tol: float = 1e-6
    cg_armijo_c1: float = 1e-4
    cg_backtrack_factor: float = 0.5
    cg_max_backtracks: int = 50
    cg_initial_step: float = 1.0
    # evaluation
    classifiers: tuple[str, ...] = KNOWN_CLASSIFIERS
    svm_c: float = 1.0
    dr_methods: tuple[str, ...] = KNOWN_DR_METHODS
    dr_dims: tuple[int, ...] = (20, 25, 30, 35, 40, 45, 50, 55, 60)
    kpca_gamma: float | None = None  # auto: 1 / input dim
    mfa_k1: int = 9
    mfa_k2: int = 9
    # sweeps
    neighbor_grid: tuple[int, ...] = (3, 5, 7, 9, 11, 13)
    dimension_grid: tuple[int, ...] | None = None  # auto: n, n-1, ..., n-40
    train_size_grid: tuple[int, ...] = (5, 8, 10, 15, 20)

    def gam_params(self, seed: int) -> GamParams:
        return GamParams(
            n_within=self.neighbors_within,
            n_between=self.neighbors_between,
            target_dim=self.target_dim,
            restarts=self.restarts,
            seed=seed,
            cg=CgOptions(
                max_iters=self.cg_max_iters,
                grad_tol=self.cg_grad_tol,
                armijo_c1=self.cg_armijo_c1,
                backtrack_factor=self.cg_backtrack_factor,
                max_backtracks=self.cg_max_backtracks,
                initial_step=self.cg_initial_step,
            ),
        )

    def resolve(self, input_dim: int) -> "ExperimentConfig":
        """Fill data-dependent defaults that are fixed once the dataset is known."""
        target = self.target_dim if self.target_dim is not None else input_dim - 1
        grid = self.dimension_grid
        if grid is None:
            grid = tuple(range(input_dim, max(input_dim - 40, 1) - 1, -1))
        return replace(self, target_dim=target, dimension_grid=grid)


_KEY_TO_FIELD = {
    "dataset.path": "dataset_path",
    "dataset.format": "dataset_format",
    "seed": "seed",
    "trials": "trials",
    "split.train_per_class": "train_per_class",
    "standardize": "standardize",
    "output": "output_dir",
    "plots": "plots",
    "map.neighbors_within": "neighbors_within",
    "map.neighbors_between": "neighbors_between",
    "map.target_dim": "target_dim",
    "map.restarts": "restarts",
    "cg.max_iters": "cg_max_iters",
    "cg.grad_tol": "cg_grad_tol",
    "cg.armijo_c1": "cg_armijo_c1",
    "cg.backtrack_factor": "cg_backtrack_factor",
    "cg.max_backtracks": "cg_max_backtracks",
    "cg.initial_step": "cg_initial_step",
    "classifiers": "classifiers",
    "svm.c": "svm_c",
    "dr.methods": "dr_methods",
    "dr.dims": "dr_dims",
    "kpca.gamma": "kpca_gamma",
    "mfa.k1": "mfa_k1",
    "mfa.k2": "mfa_k2",
    "sweep.neighbors": "neighbor_grid",
    "sweep.dims": "dimension_grid",
    "sweep.train_sizes": "train_size_grid",
}
_FIELD_TO_KEY = {v: k for k, v in _KEY_TO_FIELD.items()}


def _parse_int_list(value: str, key: str) -> tuple[int, ...]:
    value = value.strip()
    if ":" in value:
        parts = value.split(":")
        if len(parts) != 3:
            raise ConfigError(f"{key}: ranges are start:stop:step, got {value!r}")
        try:
            start, stop, step = (int(v) for v in parts)
        except ValueError:
            raise ConfigError(f"{key}: non-integer range bound in {value!r}") from None
        if step == 0:
            raise ConfigError(f"{key}: zero step")
        sign = 1 if step > 0 else -1
        return tuple(range(start, stop + sign, step))
    try:
        return tuple(int(v) for v in value.split(","))
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated integers, got {value!r}") from None


def _parse_value(field_name: str, value: str, key: str):
    if field_name in ("dataset_path", "output_dir"):
        return value
    if field_name == "dataset_format":
        if value not in ("csv", "hsb"):
            raise ConfigError(f"{key}: format must be csv or hsb")
        return value
    if field_name in ("standardize", "plots"):
        if value not in ("true", "false"):
            raise ConfigError(f"{key}: expected true or false")
        return value == "true"
    if field_name in ("target_dim",):
        return None if value == "auto" else _parse_scalar(int, value, key)
    if field_name == "kpca_gamma":
        return None if value == "auto" else _parse_scalar(float, value, key)
    if field_name == "dimension_grid":
        return None if value == "auto" else _parse_int_list(value, key)
    if field_name == "classifiers":
        names = tuple(v.strip() for v in value.split(","))
        bad = [v for v in names if v not in KNOWN_CLASSIFIERS]
        if bad:
            raise ConfigError(f"{key}: unknown classifiers {bad}; known: {KNOWN_CLASSIFIERS}")
        return names
    if field_name == "dr_methods":
        names = tuple(v.strip() for v in value.split(","))
        bad = [v for v in names if v not in KNOWN_DR_METHODS]
        if bad:
            raise ConfigError(f"{key}: unknown DR methods {bad}; known: {KNOWN_DR_METHODS}")
        return names
    if field_name in ("dr_dims", "neighbor_grid", "train_size_grid"):
        return _parse_int_list(value, key)
    if field_name in ("seed", "trials", "train_per_class", "neighbors_within",
                      "neighbors_between", "restarts", "cg_max_iters",
                      "cg_max_backtracks", "mfa_k1", "mfa_k2"):
        return _parse_scalar(int, value, key)
    return _parse_scalar(float, value, key)


def _parse_scalar(kind, value: str, key: str):
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}") from None


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in _KEY_TO_FIELD:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        field_name = _KEY_TO_FIELD[key]
        if field_name in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[field_name] = _parse_value(field_name, value, key)
    cfg = ExperimentConfig(**values)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.trials < 1:
        raise ConfigError("trials must be >= 1")
    if cfg.train_per_class < 1:
        raise ConfigError("split.train_per_class must be >= 1")
    if cfg.seed < 0:
        raise ConfigError("seed must be non-negative")
    for name, grid in (
        ("classifiers", cfg.classifiers),
        ("dr.methods", cfg.dr_methods),
        ("dr.dims", cfg.dr_dims),
        ("sweep.neighbors", cfg.neighbor_grid),
        ("sweep.train_sizes", cfg.train_size_grid),
    ):
        if len(grid) == 0:
            raise ConfigError(f"{name} must not be empty")
    if cfg.dimension_grid is not None and len(cfg.dimension_grid) == 0:
        raise ConfigError("sweep.dims must not be empty")
    if cfg.svm_c <= 0:
        raise ConfigError("svm.c must be positive")
    if cfg.kpca_gamma is not None and cfg.kpca_gamma <= 0:
        raise ConfigError("kpca.gamma must be positive")
    # exercised so bad optimizer/mapping numbers fail at parse time
    cfg.gam_params(seed=cfg.seed)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def _render_value(field_name: str, value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_config(cfg: ExperimentConfig) -> str:
    lines = ["# gamap experiment configuration (all keys explicit)"]
    for f in fields(ExperimentConfig):
        lines.append(f"{_FIELD_TO_KEY[f.name]} = {_render_value(f.name, getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"
