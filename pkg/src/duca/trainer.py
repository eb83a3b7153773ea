"""Training loop, evaluation, ablations, and the turn-signal probe.

One training step: collect a fixed-size batch of episodes with the current
policy, compute advantages with the selected method, then take several
plain-gradient-descent epochs on the clipped surrogate (policy) and the
squared error of whichever value heads the method trains. The KL penalty
is anchored to the frozen initial policy. Old log-probs are the ones
recorded at collection time, so the first epoch of each step starts at
ratio 1.

Episode seeding: episode i of step s has global index g = s * episodes_per
step + i, seed = base_seed XOR g, and persona (base_seed + g) % n_personas.
Workers only fan out rollouts; results are aggregated in submission order,
so outputs are identical for any worker count.

Methods
-------
duca         dual-stream GAE, per-horizon whitening, weighted fusion;
             trains both value heads on discounted reward-to-go targets.
naive_sum    single undiscounted GAE over the summed reward stream with
             the turn head as its critic; jointly whitened.
group_norm   critic-free: per-persona-group standardized episode return
             broadcast to every turn; value heads untouched (their losses
             are logged as 0.0).
single_turn  naive pipeline on one-turn truncated rollouts; the truncated
             episode's own terminal reward (conversion is then nearly
             impossible, violations still count) is the only session term.
"""

from __future__ import annotations

import csv
import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from statistics import median

import numpy as np

from . import _kernels, advantage, metrics
from .config import ExperimentConfig, PpoParams
from .env import ACTION_COUNT, ACTION_NAMES, Environment
from .errors import EmptyInput, UnknownMethod
from .policy import PolicyModel
from .trajectory import Trajectory

CSV_HEADER = ("step", "cvr", "compliance", "avg_turns", "mean_r_turn",
              "mean_a_total_abs", "policy_loss", "v_turn_loss",
              "v_session_loss")

EVAL_SEED_OFFSET = 1_000_003
DEFAULT_SEEDS = (1, 2, 3, 4, 5)
DEFAULT_EVAL_EPISODES = 256


class Method(enum.Enum):
    DUCA = "duca"
    NAIVE_SUM = "naive_sum"
    GROUP_NORM = "group_norm"
    SINGLE_TURN = "single_turn"


METHOD_NAMES = tuple(m.value for m in Method)


def parse_method(name: str) -> Method:
    try:
        return Method(name)
    except ValueError:
        raise UnknownMethod(
            f"unknown method {name!r}; expected one of {', '.join(METHOD_NAMES)}"
        ) from None


@dataclass(frozen=True)
class TrainStepRecord:
    step: int
    cvr: float
    compliance: float
    avg_turns: float
    mean_r_turn: float
    mean_a_total_abs: float
    policy_loss: float
    v_turn_loss: float
    v_session_loss: float

    def as_row(self) -> tuple:
        return (self.step, self.cvr, self.compliance, self.avg_turns,
                self.mean_r_turn, self.mean_a_total_abs, self.policy_loss,
                self.v_turn_loss, self.v_session_loss)


@dataclass
class TrainResult:
    method: Method
    config: ExperimentConfig
    model: PolicyModel
    records: list[TrainStepRecord]


@dataclass(frozen=True)
class EvalResult:
    seed: int
    report: metrics.MetricsReport
    trajectories: tuple[Trajectory, ...]


def episode_seed(base_seed: int, global_index: int) -> int:
    return base_seed ^ global_index


def _collect(env: Environment, model: PolicyModel, jobs, workers: int,
             greedy: bool) -> list[Trajectory]:
    if workers <= 1:
        return [env.rollout(model, persona, seed, greedy=greedy)
                for persona, seed in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(env.rollout, model, persona, seed, greedy)
                   for persona, seed in jobs]
        return [f.result() for f in futures]


def collect_batch(env: Environment, model: PolicyModel,
                  config: ExperimentConfig, step_index: int,
                  workers: int = 1, greedy: bool = False) -> list[Trajectory]:
    personas = env.personas
    n = len(personas)
    jobs = []
    for i in range(config.ppo.episodes_per_step):
        g = step_index * config.ppo.episodes_per_step + i
        jobs.append((personas[(config.seed + g) % n],
                     episode_seed(config.seed, g)))
    return _collect(env, model, jobs, workers, greedy)


def _flatten(batch: list[Trajectory]):
    x = np.concatenate([traj.feature_matrix() for traj in batch])
    actions = np.array(
        [ACTION_NAMES.index(tr.action) for traj in batch for tr in traj.turns],
        dtype=np.int64,
    )
    old_logp = np.array(
        [tr.log_prob for traj in batch for tr in traj.turns],
        dtype=np.float64,
    )
    return x, actions, old_logp


def _discounted_to_go(rewards: np.ndarray, gamma: float) -> np.ndarray:
    # GAE against a zero baseline with lambda 1 is exactly the discounted
    # reward-to-go
    zeros = np.zeros(len(rewards), dtype=np.float64)
    return _kernels.gae(rewards, zeros, gamma, 1.0)


def method_advantages(method: Method, batch: list[Trajectory],
                      model: PolicyModel, config: ExperimentConfig):
    """Advantage vector and value-head targets for one collected batch.

    Returns (a_total, turn_targets or None, session_targets or None); a
    None target means the method does not train that head.
    """
    if not batch:
        raise EmptyInput("cannot compute advantages for an empty batch")
    gae_params = config.gae
    hian = config.hian
    if method == Method.DUCA:
        adv = advantage.duca_advantages(batch, model, gae_params, hian)
        turn_targets = np.concatenate([
            _discounted_to_go(traj.turn_rewards(), gae_params.gamma_turn)
            for traj in batch
        ])
        session_targets = np.concatenate([
            _discounted_to_go(traj.session_stream(), gae_params.gamma_session)
            for traj in batch
        ])
        return adv.a_total, turn_targets, session_targets
    if method in (Method.NAIVE_SUM, Method.SINGLE_TURN):
        a_total = advantage.naive_advantages(batch, model.value_turn,
                                             gae_params, hian.epsilon_norm)
        turn_targets = np.concatenate([
            _discounted_to_go(traj.turn_rewards() + traj.session_stream(),
                              gae_params.gamma_session)
            for traj in batch
        ])
        return a_total, turn_targets, None
    if method == Method.GROUP_NORM:
        return advantage.group_advantages(batch, hian.epsilon_norm), None, None
    raise UnknownMethod(f"unknown method: {method}")


def train(config: ExperimentConfig, method: Method | str = Method.DUCA,
          workers: int = 1, progress=None) -> TrainResult:
    if isinstance(method, str):
        method = parse_method(method)
    env = Environment.from_config(config)
    rollout_env = env.with_t_max(1) if method == Method.SINGLE_TURN else env
    model = PolicyModel.zeros(config.feature_dim, ACTION_COUNT)
    reference = model.clone()
    ppo = config.ppo
    records: list[TrainStepRecord] = []
    for step_index in range(ppo.max_steps):
        batch = collect_batch(rollout_env, model, config, step_index, workers)
        x, actions, old_logp = _flatten(batch)
        ref_logp = reference.batch_log_probs(x, actions)
        a_total, turn_targets, session_targets = method_advantages(
            method, batch, model, config)
        policy_loss = 0.0
        v_turn_loss = 0.0
        v_session_loss = 0.0
        for _ in range(ppo.epochs_per_batch):
            policy_loss, grad = model.ppo_loss_and_grad(
                x, actions, old_logp, ref_logp, a_total, ppo)
            if turn_targets is not None:
                v_turn_loss, gw_t, gb_t = model.value_loss_and_grad(
                    x, turn_targets, "turn")
            if session_targets is not None:
                v_session_loss, gw_s, gb_s = model.value_loss_and_grad(
                    x, session_targets, "session")
            model.apply_policy_grad(grad, ppo.learning_rate)
            if turn_targets is not None:
                model.apply_value_grad("turn", gw_t, gb_t, ppo.learning_rate)
            if session_targets is not None:
                model.apply_value_grad("session", gw_s, gb_s,
                                       ppo.learning_rate)
        report = metrics.compute_report(batch)
        record = TrainStepRecord(
            step=step_index,
            cvr=report.cvr,
            compliance=report.compliance,
            avg_turns=report.avg_turns,
            mean_r_turn=report.mean_turn_reward,
            mean_a_total_abs=float(np.mean(np.abs(a_total))),
            policy_loss=policy_loss,
            v_turn_loss=v_turn_loss,
            v_session_loss=v_session_loss,
        )
        records.append(record)
        if progress is not None:
            progress(record)
    return TrainResult(method=method, config=config, model=model,
                       records=records)


def write_curve_csv(path, records: list[TrainStepRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for record in records:
            writer.writerow(record.as_row())


def read_curve_csv(path) -> list[TrainStepRecord]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise EmptyInput(f"unexpected curve header in {path}")
        out = []
        for row in reader:
            out.append(TrainStepRecord(
                step=int(row[0]), cvr=float(row[1]), compliance=float(row[2]),
                avg_turns=float(row[3]), mean_r_turn=float(row[4]),
                mean_a_total_abs=float(row[5]), policy_loss=float(row[6]),
                v_turn_loss=float(row[7]), v_session_loss=float(row[8]),
            ))
        return out


def evaluate(model: PolicyModel, config: ExperimentConfig, episodes: int,
             seed: int, workers: int = 1) -> EvalResult:
    """Greedy-policy evaluation on freshly seeded episodes."""
    if episodes < 1:
        raise EmptyInput("evaluation needs at least one episode")
    env = Environment.from_config(config)
    personas = env.personas
    n = len(personas)
    jobs = [(personas[(seed + i) % n], episode_seed(seed, i))
            for i in range(episodes)]
    trajectories = _collect(env, model, jobs, workers, greedy=True)
    return EvalResult(seed=seed,
                      report=metrics.compute_report(trajectories),
                      trajectories=tuple(trajectories))


@dataclass(frozen=True)
class AblationRun:
    method: Method
    seed: int
    eval_seed: int
    report: metrics.MetricsReport


@dataclass
class AblationResult:
    runs: list[AblationRun]

    def method_runs(self, method: Method) -> list[AblationRun]:
        return [r for r in self.runs if r.method == method]

    def median_metric(self, method: Method, name: str) -> float:
        values = [getattr(r.report, name) for r in self.method_runs(method)]
        if not values:
            raise EmptyInput(f"no runs for method {method.value}")
        return float(median(values))

    def summary_rows(self) -> list[tuple]:
        rows = []
        seen = []
        for run in self.runs:
            if run.method not in seen:
                seen.append(run.method)
        for method in seen:
            rows.append((
                method.value,
                self.median_metric(method, "cvr"),
                self.median_metric(method, "compliance"),
                self.median_metric(method, "avg_turns"),
            ))
        return rows


_RUN_FIELDS = ("cvr", "compliance", "avg_turns", "mean_turn_reward",
               "mean_session_reward", "intra_repetition", "inter_repetition",
               "repeat_action_rate", "filler_rate", "over_promise_rate",
               "positive_transfer_rate")


def run_ablation(config: ExperimentConfig, methods=None, seeds=DEFAULT_SEEDS,
                 workers: int = 1, out_dir=None,
                 eval_episodes: int = DEFAULT_EVAL_EPISODES,
                 progress=None) -> AblationResult:
    """Train every (method, seed) pair, evaluate each on a held-out seed,
    and write curves plus summary tables under out_dir."""
    if methods is None:
        methods = list(Method)
    methods = [parse_method(m) if isinstance(m, str) else m for m in methods]
    seeds = list(seeds)
    if not methods or not seeds:
        raise EmptyInput("ablation needs at least one method and one seed")
    out_dir = config.output_dir if out_dir is None else out_dir
    os.makedirs(out_dir, exist_ok=True)
    runs: list[AblationRun] = []
    for method in methods:
        for seed in seeds:
            run_config = replace(config, seed=seed)
            result = train(run_config, method, workers)
            tag = f"{method.value}_seed{seed}"
            write_curve_csv(os.path.join(out_dir, f"curve_{tag}.csv"),
                            result.records)
            result.model.save(os.path.join(out_dir, f"model_{tag}.txt"))
            eval_seed = seed + EVAL_SEED_OFFSET
            ev = evaluate(result.model, config, eval_episodes, eval_seed,
                          workers)
            runs.append(AblationRun(method=method, seed=seed,
                                    eval_seed=eval_seed, report=ev.report))
            if progress is not None:
                progress(runs[-1])
    ablation = AblationResult(runs=runs)
    with open(os.path.join(out_dir, "ablation_runs.csv"), "w",
              encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("method", "seed", "eval_seed") + _RUN_FIELDS)
        for run in ablation.runs:
            writer.writerow((run.method.value, run.seed, run.eval_seed)
                            + tuple(getattr(run.report, f) for f in _RUN_FIELDS))
    with open(os.path.join(out_dir, "ablation_summary.csv"), "w",
              encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("method", "cvr", "compliance", "avg_turn"))
        for row in ablation.summary_rows():
            writer.writerow(row)
    return ablation


def turn_signal_gradient_ratio(config: ExperimentConfig, seed: int,
                               workers: int = 1) -> float:
    """Empirical turn-signal suppression at step 0.

    Collects one step-0 batch with a fresh zero policy, splits each
    method's advantage into its turn-stream contribution under the
    UNMODIFIED batch's normalization statistics (zeroing the session
    stream under frozen stats), and compares the surrogate gradient norms:
    ||g_naive_turn|| / ||g_duca_turn||. The KL term is excluded; both
    gradients are taken at the collection policy, where the surrogate
    gradient is the plain policy gradient of the contribution.
    """
    env = Environment.from_config(config)
    model = PolicyModel.zeros(config.feature_dim, ACTION_COUNT)
    probe_config = replace(config, seed=seed)
    batch = collect_batch(env, model, probe_config, 0, workers)
    x, actions, old_logp = _flatten(batch)
    probe_ppo = replace(config.ppo, kl_coef=0.0)

    naive_turn = advantage.naive_turn_contribution(
        batch, model.value_turn, config.gae, config.hian.epsilon_norm)
    duca_turn = advantage.duca_turn_contribution(
        batch, model, config.gae, config.hian)

    def grad_norm(adv_vec: np.ndarray) -> float:
        _, grad = model.ppo_loss_and_grad(x, actions, old_logp, old_logp,
                                          adv_vec, probe_ppo)
        return float(np.sqrt(np.sum(grad.w ** 2) + np.sum(grad.b ** 2)))

    return grad_norm(naive_turn) / grad_norm(duca_turn)
