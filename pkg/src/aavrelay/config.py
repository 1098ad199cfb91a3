"""Configuration dataclasses and the INI-style experiment config format.

Every tunable of the simulator and trainer lives in one of the frozen
dataclasses below.  A config file is plain ``key = value`` text grouped in
sections (parsed with :mod:`configparser`); an empty file yields the full
default parameter set.  Unknown sections or keys are rejected, and invariant
violations raise :class:`ConfigError` naming the offending ``section.key``.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field, fields
from typing import Tuple


class ConfigError(ValueError):
    """Raised for unknown keys, bad types, or invariant violations."""


@dataclass(frozen=True)
class WorldConfig:
    """Scenario geometry, fleet size, and kinematic limits (SI units)."""

    x_min: float = 0.0
    x_max: float = 400.0
    y_min: float = 0.0
    y_max: float = 400.0
    aav_altitude: float = 15.0
    bs_position: Tuple[float, float, float] = (2000.0, 2000.0, 0.0)
    n_sn: int = 60
    n_aav: int = 4
    d_min: float = 1.0
    v_max: float = 30.0
    cluster_count: int = 5
    cluster_spread: float = 25.0
    comm_radius: float = 100.0
    sn_transmit_power: float = 0.1
    aav_transmit_power: float = 0.5
    data_volume_min: float = 1.0e5
    data_volume_max: float = 4.0e5

    def validate(self) -> None:
        if not self.x_min < self.x_max:
            raise ConfigError("world.x_min must be < world.x_max")
        if not self.y_min < self.y_max:
            raise ConfigError("world.y_min must be < world.y_max")
        if self.aav_altitude <= 0:
            raise ConfigError("world.aav_altitude must be > 0")
        if self.d_min <= 0:
            raise ConfigError("world.d_min must be > 0")
        if self.v_max <= 0:
            raise ConfigError("world.v_max must be > 0")
        if self.n_aav < 1:
            raise ConfigError("world.n_aav must be >= 1")
        if self.n_sn < 1:
            raise ConfigError("world.n_sn must be >= 1")
        if self.cluster_count < 1:
            raise ConfigError("world.cluster_count must be >= 1")
        if self.cluster_spread <= 0:
            raise ConfigError("world.cluster_spread must be > 0")
        if self.comm_radius <= 0:
            raise ConfigError("world.comm_radius must be > 0")
        if self.sn_transmit_power <= 0:
            raise ConfigError("world.sn_transmit_power must be > 0")
        if self.aav_transmit_power <= 0:
            raise ConfigError("world.aav_transmit_power must be > 0")
        if not 0 < self.data_volume_min <= self.data_volume_max:
            raise ConfigError("world.data_volume_min must be in (0, data_volume_max]")


@dataclass(frozen=True)
class ChannelParams:
    """Radio-link constants.  dB-valued fields carry a ``_db`` suffix."""

    sigmoid_a: float = 5.18
    sigmoid_b: float = 0.43
    carrier_frequency: float = 2.0e9
    eta_los_db: float = 1.0
    eta_nlos_db: float = 20.0
    rho0: float = 1.0e-4          # A2A reference gain at 1 m, linear
    alpha_a2a: float = 2.0
    alpha_a2g: float = 2.0
    g0: float = 1.0e-4            # A2G reference gain at 1 m, linear
    noise_psd_dbm_hz: float = -174.0
    total_bandwidth: float = 1.0e6
    per_sn_bandwidth: float = 180.0e3
    per_aav_bandwidth: float = 1.0e6

    def validate(self) -> None:
        for key in ("total_bandwidth", "per_sn_bandwidth", "per_aav_bandwidth"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"channel.{key} must be > 0")
        if self.alpha_a2a < 2 or self.alpha_a2g < 2:
            raise ConfigError("channel.alpha_* path-loss exponents must be >= 2")
        if not 0 <= self.eta_los_db <= self.eta_nlos_db:
            raise ConfigError("channel requires 0 <= eta_los_db <= eta_nlos_db")
        if self.carrier_frequency <= 0:
            raise ConfigError("channel.carrier_frequency must be > 0")
        if self.rho0 <= 0 or self.g0 <= 0:
            raise ConfigError("channel.rho0 and channel.g0 must be > 0")


@dataclass(frozen=True)
class EnergyParams:
    """Rotary-wing propulsion-power constants."""

    p0: float = 199.4
    p1: float = 88.66
    u_tip: float = 120.0
    v0_induced: float = 4.03
    d0_drag: float = 0.6
    air_density: float = 1.225
    rotor_solidity: float = 0.05
    rotor_disc_area: float = 0.503

    def validate(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ConfigError(f"energy.{f.name} must be > 0")


@dataclass(frozen=True)
class EnvConfig:
    """Episode shape, reward weights, and slot timing."""

    task: str = "forwarding"      # forwarding | point_goal
    episode_length: int = 100
    seq_len: int = 4
    rho1: float = 1.0             # AoI weight (ages normalized by episode_length)
    rho2: float = 1.0e-3          # energy weight, per joule
    rho3: float = 0.1             # coverage weight, per covered SN
    oob_penalty: float = 1.0      # per recorded violation
    delta_move: float = 0.3       # seconds of each 1 s slot spent moving
    fixed_topology: bool = True
    world_seed: int = 0

    def validate(self) -> None:
        if self.task not in ("forwarding", "point_goal"):
            raise ConfigError("env.task must be 'forwarding' or 'point_goal'")
        if self.episode_length < 1:
            raise ConfigError("env.episode_length must be >= 1")
        if self.seq_len < 1:
            raise ConfigError("env.seq_len must be >= 1")
        for key in ("rho1", "rho2", "rho3", "oob_penalty"):
            if getattr(self, key) < 0:
                raise ConfigError(f"env.{key} must be >= 0")
        if not 0 <= self.delta_move < 1:
            raise ConfigError("env.delta_move must lie in [0, 1)")


@dataclass(frozen=True)
class SacConfig:
    """SAC-TLS trainer hyperparameters and ablation switches."""

    gamma: float = 0.99
    tau: float = 0.005
    lr_actor: float = 3.0e-4
    lr_critic: float = 3.0e-4
    lr_alpha: float = 3.0e-4
    batch_size: int = 256
    update_every: int = 1         # env steps between update triggers
    updates_per_trigger: int = 1  # K
    warmup_steps: int = 1000
    seq_len: int = 4
    target_entropy: float = 0.0   # 0.0 means auto: -action_dim
    buffer_capacity: int = 100_000
    episodes: int = 4500
    hidden_dim: int = 128
    trunk_dims: Tuple[int, ...] = (256, 256)
    se_reduction: int = 4
    ln_eps: float = 1.0e-5
    init_alpha: float = 0.2
    use_seq: bool = True
    use_lngru: bool = True
    use_se: bool = True
    dtype: str = "float64"        # float64 | float32
    checkpoint_every: int = 0     # episodes between checkpoints; 0 = final only

    def validate(self) -> None:
        if not 0 < self.gamma < 1:
            raise ConfigError("sac.gamma must lie in (0, 1)")
        if not 0 < self.tau <= 1:
            raise ConfigError("sac.tau must lie in (0, 1]")
        if self.batch_size < 1:
            raise ConfigError("sac.batch_size must be >= 1")
        if self.update_every < 1 or self.updates_per_trigger < 1:
            raise ConfigError("sac.update_every and sac.updates_per_trigger must be >= 1")
        if self.seq_len < 1:
            raise ConfigError("sac.seq_len must be >= 1")
        if self.buffer_capacity < 1:
            raise ConfigError("sac.buffer_capacity must be >= 1")
        if self.hidden_dim < 1 or any(d < 1 for d in self.trunk_dims):
            raise ConfigError("sac.hidden_dim and sac.trunk_dims must be >= 1")
        if self.se_reduction < 1:
            raise ConfigError("sac.se_reduction must be >= 1")
        if self.dtype not in ("float64", "float32"):
            raise ConfigError("sac.dtype must be 'float64' or 'float32'")
        if self.init_alpha <= 0:
            raise ConfigError("sac.init_alpha must be > 0")
        if self.checkpoint_every < 0:
            raise ConfigError("sac.checkpoint_every must be >= 0")


@dataclass(frozen=True)
class PruneConfig:
    """Structured-pruning sweep grid."""

    ratios: Tuple[float, ...] = (0.80, 0.85, 0.90, 0.93)
    lg_lambdas: Tuple[float, ...] = (-8.0, -7.5, -7.0, -6.5, -6.0, -5.5, -5.0)
    finetune_episodes: int = 50
    eval_episodes: int = 10

    def validate(self) -> None:
        if not self.ratios or not all(0 < r < 1 for r in self.ratios):
            raise ConfigError("prune.ratios must all lie in (0, 1)")
        if not self.lg_lambdas:
            raise ConfigError("prune.lg_lambdas must be non-empty")
        if self.finetune_episodes < 0 or self.eval_episodes < 1:
            raise ConfigError("prune.finetune_episodes/eval_episodes out of range")


@dataclass(frozen=True)
class ExperimentConfig:
    """The full config tree: one section per component."""

    world: WorldConfig = field(default_factory=WorldConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    energy: EnergyParams = field(default_factory=EnergyParams)
    env: EnvConfig = field(default_factory=EnvConfig)
    sac: SacConfig = field(default_factory=SacConfig)
    prune: PruneConfig = field(default_factory=PruneConfig)

    def validate(self) -> None:
        for f in fields(self):
            getattr(self, f.name).validate()

    def replace(self, section: str, **updates) -> "ExperimentConfig":
        """Return a copy with ``updates`` applied to one section."""
        new_section = dataclasses.replace(getattr(self, section), **updates)
        cfg = dataclasses.replace(self, **{section: new_section})
        cfg.validate()
        return cfg


_SECTIONS = ("world", "channel", "energy", "env", "sac", "prune")


def _parse_value(raw: str, target_type, path: str):
    raw = raw.strip()
    try:
        if target_type is bool:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        if target_type is str:
            return raw
        # Tuple[...] fields: comma-separated scalars.
        origin = getattr(target_type, "__origin__", None)
        if origin is tuple:
            elem = target_type.__args__[0]
            parts = [p for p in (s.strip() for s in raw.split(",")) if p]
            return tuple(elem(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad value for {path}: {exc}") from None
    raise ConfigError(f"unsupported field type at {path}")


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str) -> ExperimentConfig:
    """Parse config text; missing keys fall back to defaults."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    cfg = ExperimentConfig()
    sections = {}
    for name in _SECTIONS:
        sections[name] = getattr(cfg, name)

    for section_name in parser.sections():
        if section_name not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section_name}]")
        section_obj = sections[section_name]
        field_types = {f.name: f.type for f in fields(section_obj)}
        resolved = _resolve_types(type(section_obj))
        updates = {}
        for key, raw in parser.items(section_name):
            if key not in field_types:
                raise ConfigError(f"unknown config key {section_name}.{key}")
            updates[key] = _parse_value(raw, resolved[key], f"{section_name}.{key}")
        sections[section_name] = dataclasses.replace(section_obj, **updates)

    result = ExperimentConfig(**sections)
    result.validate()
    return result


def _resolve_types(cls) -> dict:
    """Map field name -> concrete type object (handles string annotations)."""
    import typing

    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in fields(cls)}


def serialize_config(cfg: ExperimentConfig) -> str:
    """Emit the full config tree as canonical key = value text."""
    out = io.StringIO()
    for section_name in _SECTIONS:
        section = getattr(cfg, section_name)
        out.write(f"[{section_name}]\n")
        for f in fields(section):
            out.write(f"{f.name} = {_format_value(getattr(section, f.name))}\n")
        out.write("\n")
    return out.getvalue()


def load_config(path: str) -> ExperimentConfig:
    """Read and validate a config file (empty file = all defaults)."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
