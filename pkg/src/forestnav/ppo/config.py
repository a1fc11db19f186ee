from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_range: float = 0.2
    learning_rate: float = 3e-4
    n_epochs: int = 10
    minibatch_size: int = 64
    n_steps: int = 2048  # rollout length T per env
    n_envs: int = 8
    vf_coef: float = 0.5
    ent_coef: float = 0.0
    max_grad_norm: float = 0.5
    total_steps: int = 2_000_000
    policy_hidden: tuple[int, ...] = (128, 128)
    value_hidden: tuple[int, ...] = (256, 256)
    init_log_std: float = -0.5
    log_std_bounds: tuple[float, float] = (-5.0, 2.0)
    adam_eps: float = 1e-5
    dtype: str = "float64"
    normalize_obs: bool = False
    normalize_reward: bool = False
    checkpoint_every: int = 10  # updates
    stats_window: int = 100  # episodes behind the metrics columns

    def __post_init__(self) -> None:
        object.__setattr__(self, "policy_hidden", tuple(int(h) for h in self.policy_hidden))
        object.__setattr__(self, "value_hidden", tuple(int(h) for h in self.value_hidden))
        object.__setattr__(self, "log_std_bounds", tuple(float(v) for v in self.log_std_bounds))
        for name in ("gamma", "gae_lambda"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"ppo.{name} must lie in [0, 1], got {getattr(self, name)}")
        if not self.clip_range > 0:
            raise ValueError(f"ppo.clip_range must be positive, got {self.clip_range}")
        if self.learning_rate < 0:
            raise ValueError(f"ppo.learning_rate must be >= 0, got {self.learning_rate}")
        for name in ("n_epochs", "minibatch_size", "n_steps", "n_envs", "checkpoint_every", "stats_window"):
            if getattr(self, name) < 1:
                raise ValueError(f"ppo.{name} must be a positive integer, got {getattr(self, name)}")
        if self.total_steps < 0:
            raise ValueError(f"ppo.total_steps must be >= 0, got {self.total_steps}")
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"ppo.dtype must be 'float64' or 'float32', got {self.dtype!r}")
        if any(h < 1 for h in self.policy_hidden + self.value_hidden):
            raise ValueError("hidden layer widths must be positive")
        lo, hi = self.log_std_bounds
        if lo > hi:
            raise ValueError(f"ppo.log_std_bounds must be ordered, got {[lo, hi]}")

    @property
    def batch_size(self) -> int:
        return self.n_steps * self.n_envs

    @property
    def n_updates(self) -> int:
        return self.total_steps // self.batch_size
