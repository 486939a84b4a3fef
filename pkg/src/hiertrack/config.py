"""Tracker configuration and the flat key=value config file grammar.

Files hold one `dotted.key = value` pair per line; `#` starts a comment.
The same grammar is used for scene descriptions and bridge manifests, so
the parser lives here and is shared.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import InputError
from .kalman import KalmanNoise


def parse_kv_text(text: str, source: str = "<string>") -> dict[str, str]:
    """Parse `key = value` lines into a flat string mapping."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise InputError(f"{source}:{lineno}: empty key")
        out[key] = value.strip()
    return out


def parse_kv_file(path: str | Path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    return parse_kv_text(text, source=str(path))


@dataclass(frozen=True)
class Config:
    """All tracker knobs. Defaults match the documented calibration."""

    alpha: float = 0.25       # coarse motion weight
    beta: float = 0.25        # fine motion weight
    tau: float = 0.5          # escalation trigger: max coarse s_conf below tau
    n_points: int = 16        # FPS sample size per proposal
    pt_frames: int = 8        # historical frames the point tracker spans
    rbf_level: float = 0.5    # soft mask binarization level
    sigma_scale: float = 0.1  # RBF sigma = sigma_scale * proposal box diagonal
    theta_iou: float = 0.7    # memory admission: mask confidence gate
    theta_motion: float = 0.5  # memory admission: coarse motion gate
    theta_dist: float = 0.04  # distinctiveness, fraction of image diagonal
    n_sm: int = 6             # short-term capacity
    n_lm: int = 8             # long-term capacity
    k_sm: int = 1             # short-term interval gate
    k_lm: int = 5             # long-term interval gate
    visibility_floor: float = 0.3
    kf_update_floor: float = 0.3
    track_noise: float = 0.5  # oracle tracker jitter std, px
    seed: int = 0             # nonzero: overrides the scene's noise seed
    kf: KalmanNoise = field(default_factory=KalmanNoise)

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta > 1.0:
            raise InputError(
                f"need alpha, beta >= 0 and alpha+beta <= 1, "
                f"got alpha={self.alpha}, beta={self.beta}"
            )
        if not 0.0 <= self.tau <= 1.0:
            raise InputError(f"tau must lie in [0, 1], got {self.tau}")
        for name in ("n_points", "pt_frames", "n_sm", "n_lm", "k_sm", "k_lm"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be >= 1, got {getattr(self, name)}")

    @classmethod
    def from_mapping(cls, kv: dict[str, str]) -> "Config":
        """Build from flat keys; kf.* keys fill the noise block."""
        plain = {f.name: f.type for f in fields(cls) if f.name != "kf"}
        kwargs: dict[str, object] = {}
        kf_kwargs: dict[str, float] = {}
        for key, value in kv.items():
            if key.startswith("kf."):
                sub = key[3:]
                if sub not in {f.name for f in fields(KalmanNoise)}:
                    raise InputError(f"unknown config key {key!r}")
                kf_kwargs[sub] = float(value)
            elif key in plain:
                caster = int if plain[key] in ("int", int) else float
                kwargs[key] = caster(value)
            else:
                raise InputError(f"unknown config key {key!r}")
        if kf_kwargs:
            kwargs["kf"] = KalmanNoise(**kf_kwargs)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "Config":
        return cls.from_mapping(parse_kv_file(path))

    def with_overrides(self, kv: dict[str, str]) -> "Config":
        """Apply CLI-style key=value overrides on top of this config."""
        merged = {**self.to_mapping(), **kv}
        return Config.from_mapping(merged)

    def to_mapping(self) -> dict[str, str]:
        out: dict[str, str] = {}
        for f in fields(self):
            if f.name == "kf":
                for kf_field in fields(KalmanNoise):
                    out[f"kf.{kf_field.name}"] = repr(getattr(self.kf, kf_field.name))
            else:
                out[f.name] = repr(getattr(self, f.name))
        return out

    def replace(self, **kwargs) -> "Config":
        return replace(self, **kwargs)
