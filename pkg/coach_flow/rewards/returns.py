import numpy as np

from coach_flow.exceptions import ContractViolationError
from coach_flow.model.episode import Trajectory
from coach_flow.model.rewards import DiscountMode, RewardWeights


def discounted_process_sums(process_rewards: np.ndarray, gamma: float, mode: DiscountMode) -> np.ndarray:
    """
    Per-step sums over tau >= t of the process rewards, weighted by gamma^(T - tau) when
    `mode` is as_written and by gamma^(tau - t) when standard.
    """
    length = len(process_rewards)
    sums = np.zeros(length)
    if mode == DiscountMode.AS_WRITTEN:
        weighted = gamma ** np.arange(length - 1, -1, -1, dtype=np.float64) * process_rewards
        running = 0.0
        for t in range(length - 1, -1, -1):
            running += weighted[t]
            sums[t] = running
    else:
        running = 0.0
        for t in range(length - 1, -1, -1):
            running = process_rewards[t] + gamma * running
            sums[t] = running
    return sums


def compute_returns(trajectory: Trajectory, weights: RewardWeights) -> list[float]:
    """
    Weighted Monte Carlo return targets R_t = omega_p * (discounted process rewards from t on)
    + omega_o * r_o, for every step of a complete trajectory.

    :raises ContractViolationError: when the trajectory is incomplete or lacks rewards
    """
    if not trajectory.done or trajectory.r_o is None:
        raise ContractViolationError(f"trajectory of task {trajectory.task_id} has no outcome reward")
    if any(step.r_p is None for step in trajectory.steps):
        raise ContractViolationError(f"trajectory of task {trajectory.task_id} misses process rewards")

    process_rewards = np.array([step.r_p for step in trajectory.steps], dtype=np.float64)
    sums = discounted_process_sums(process_rewards, weights.gamma, weights.discount_mode)
    return (weights.omega_p * sums + weights.omega_o * trajectory.r_o).tolist()


def assign_returns(trajectory: Trajectory, weights: RewardWeights) -> Trajectory:
    for step, target in zip(trajectory.steps, compute_returns(trajectory, weights)):
        step.ret = target
    return trajectory
