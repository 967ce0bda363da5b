"""Clipped-surrogate policy-gradient training loop.

Rollouts are fixed-length (horizon steps) and episodes carry over
across rollout boundaries in one persistent environment. Training runs
whole rollouts, each followed by several shuffled minibatch epochs,
until the episode quota is met, so the quota can overshoot by less
than one rollout. Generalized advantage estimates are computed in
float64 and normalized per rollout.

Cancellation is cooperative: checked at the top of each rollout and
again between collection and the update. Episodes already handed to
the sink stay; the model keeps any updates applied so far.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .engine import Episode, SimEnv, SimParams, default_episode_id
from .errors import Cancelled
from .kernels import gae_scan
from .net import adam_update, AdamState, ppo_loss_and_grads, sample_action


@dataclass
class TrainHyper:
    gamma: float = 0.99
    lam: float = 0.95
    clip_eps: float = 0.2
    epochs: int = 4
    minibatch: int = 64
    horizon: int = 1024
    lr: float = 2.5e-4
    ent_coef: float = 0.01
    vf_coef: float = 0.5
    max_grad_norm: float = 0.5

    def validate(self):
        if not (0.0 < self.gamma <= 1.0 and 0.0 < self.lam <= 1.0):
            raise ValueError("gamma and lam must be in (0, 1]")
        if self.horizon <= 0 or self.minibatch <= 0:
            raise ValueError("horizon and minibatch must be positive")
        if self.horizon % self.minibatch != 0:
            raise ValueError(
                f"horizon {self.horizon} must be divisible by minibatch {self.minibatch}"
            )


def compute_gae(rewards, values, dones, bootstrap_value, gamma, lam):
    """Advantages and returns over a rollout; done flags stop bootstrapping."""
    return gae_scan(rewards, values, dones, bootstrap_value, gamma, lam)


def normalize_advantages(adv, eps=1e-8):
    adv = np.asarray(adv, dtype=np.float64)
    return (adv - adv.mean()) / (adv.std() + eps)


@dataclass
class EpisodeStat:
    ordinal: int
    id: str
    seed: int
    total_reward: float
    steps: int
    outcome: str


@dataclass
class UpdateStat:
    rollout: int
    total: float
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float


@dataclass
class TrainSummary:
    episodes: list = field(default_factory=list)
    updates: list = field(default_factory=list)
    total_steps: int = 0
    wall_seconds: float = 0.0

    def rewards(self):
        return [e.total_reward for e in self.episodes]

    def to_csv(self):
        lines = ["episode,total_reward,steps,outcome"]
        for e in self.episodes:
            lines.append(f"{e.ordinal},{e.total_reward!r},{e.steps},{e.outcome}")
        return "\n".join(lines) + "\n"


def _is_cancelled(cancel_signal):
    if cancel_signal is None:
        return False
    if callable(cancel_signal):
        return bool(cancel_signal())
    return bool(cancel_signal.is_set())


class RolloutBuffer:
    """Parallel arrays over one horizon of transitions."""

    def __init__(self, horizon, obs_shape):
        self.obs = np.zeros((horizon,) + obs_shape, dtype=np.float32)
        self.actions = np.zeros(horizon, dtype=np.int64)
        self.logp = np.zeros(horizon, dtype=np.float64)
        self.values = np.zeros(horizon, dtype=np.float64)
        self.rewards = np.zeros(horizon, dtype=np.float64)
        self.dones = np.zeros(horizon, dtype=np.float64)
        self.bootstrap = 0.0


class RolloutCollector:
    """Samples transitions from one persistent environment.

    Episodes span rollout boundaries: a rollout that ends mid-episode
    leaves the environment where it stood, and the next rollout
    continues that same episode. Per-episode action RNGs are seeded
    from the master RNG so a whole run is a function of one seed.
    """

    def __init__(self, env, net, master_rng, episode_sink=None):
        self.env = env
        self.net = net
        self.master = master_rng
        self.sink = episode_sink
        self.episodes_done = 0
        self._begin_episode()

    def _begin_episode(self):
        self.ep_seed = int(self.master.integers(0, 2**31 - 1))
        self.action_rng = np.random.default_rng(self.ep_seed)
        self.env.reset(self.ep_seed)
        self.ep_records = []

    def collect(self, buf):
        """Fill the buffer completely; returns stats of episodes that
        finished inside this rollout, in completion order."""
        horizon = buf.rewards.shape[0]
        finished = []
        for i in range(horizon):
            obs = self.env.observation()
            logits, value = self.net.forward(obs)
            action, logp = sample_action(logits, self.action_rng)
            result = self.env.step(action)
            rec = result.record
            buf.obs[i] = obs
            buf.actions[i] = action
            buf.logp[i] = logp
            buf.values[i] = value
            buf.rewards[i] = rec.reward
            buf.dones[i] = 1.0 if result.outcome is not None else 0.0
            self.ep_records.append(rec)
            if result.outcome is not None:
                self.episodes_done += 1
                episode = Episode(
                    id=f"ep-{self.episodes_done:06d}",
                    track_id=self.env.track.id,
                    seed=self.ep_seed,
                    steps=self.ep_records,
                    total_reward=math.fsum(r.reward for r in self.ep_records),
                    outcome=result.outcome,
                    endpoint=self.ep_records[-1].state.position,
                )
                finished.append(
                    EpisodeStat(
                        ordinal=self.episodes_done,
                        id=episode.id,
                        seed=self.ep_seed,
                        total_reward=episode.total_reward,
                        steps=len(self.ep_records),
                        outcome=episode.outcome,
                    )
                )
                if self.sink is not None:
                    self.sink(episode, self.episodes_done)
                self._begin_episode()
        if buf.dones[horizon - 1] > 0:
            buf.bootstrap = 0.0
        else:
            _, buf.bootstrap = self.net.forward(self.env.observation())
        return finished


def collect_rollout(env, net, horizon, master_rng, episode_sink=None):
    """One-shot rollout collection; returns the filled buffer."""
    collector = RolloutCollector(env, net, master_rng, episode_sink)
    buf = RolloutBuffer(horizon, env.observation().shape)
    collector.collect(buf)
    return buf


def train(model, track, n_episodes, hyper=None, params=None, episode_sink=None,
          cancel_signal=None, seed=0):
    """Train the model in place until >= n_episodes episodes have run.

    Returns (model, summary). episode_sink(episode, ordinal) fires as
    each episode finishes during collection, before the update that
    follows. A cancel raises Cancelled carrying the number of episodes
    already sunk; the model keeps updates applied so far.
    """
    hyper = hyper if hyper is not None else TrainHyper()
    hyper.validate()
    params = params if params is not None else SimParams()
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")

    started = time.monotonic()
    net = model.net
    master = np.random.default_rng(int(seed))
    env = SimEnv(track, params)
    adam = AdamState()
    summary = TrainSummary()
    collector = RolloutCollector(env, net, master, episode_sink)
    buf = RolloutBuffer(hyper.horizon, env.observation().shape)

    def _finish(cancelled):
        model.trained_episodes += collector.episodes_done
        summary.wall_seconds = time.monotonic() - started
        if cancelled:
            raise Cancelled("training cancelled",
                            episodes_completed=collector.episodes_done)

    rollout_idx = 0
    while collector.episodes_done < n_episodes:
        if _is_cancelled(cancel_signal):
            _finish(cancelled=True)
        finished = collector.collect(buf)
        summary.episodes.extend(finished)
        summary.total_steps += hyper.horizon

        if _is_cancelled(cancel_signal):
            _finish(cancelled=True)

        adv, rets = compute_gae(
            buf.rewards, buf.values, buf.dones, buf.bootstrap, hyper.gamma, hyper.lam
        )
        adv = normalize_advantages(adv)

        update_rng = np.random.default_rng(int(master.integers(0, 2**31 - 1)))
        last_stats = None
        for _epoch in range(hyper.epochs):
            perm = update_rng.permutation(hyper.horizon)
            for start in range(0, hyper.horizon, hyper.minibatch):
                idx = perm[start:start + hyper.minibatch]
                stats, grads = ppo_loss_and_grads(
                    net,
                    buf.obs[idx],
                    buf.actions[idx],
                    buf.logp[idx],
                    adv[idx],
                    rets[idx],
                    clip_eps=hyper.clip_eps,
                    vf_coef=hyper.vf_coef,
                    ent_coef=hyper.ent_coef,
                )
                adam_update(
                    net.params, grads, adam, hyper.lr,
                    max_grad_norm=hyper.max_grad_norm,
                )
                last_stats = stats
        rollout_idx += 1
        summary.updates.append(
            UpdateStat(
                rollout=rollout_idx,
                total=last_stats.total,
                policy_loss=last_stats.policy_loss,
                value_loss=last_stats.value_loss,
                entropy=last_stats.entropy,
                clip_fraction=last_stats.clip_fraction,
            )
        )

    _finish(cancelled=False)
    return model, summary


def greedy_episode(model, track, seed, params=None):
    """One argmax-policy evaluation episode."""
    from .engine import run_episode

    return run_episode(model.net, track, seed, mode="test", params=params,
                       episode_id=default_episode_id(track, seed))
