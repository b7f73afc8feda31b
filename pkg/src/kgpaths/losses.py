"""Training-support mathematics: contrastive and verifier losses, total-loss
aggregation, episode reward, and the loss-weight annealing schedule.

Pure functions only; no optimizers or gradients live here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_CLAMP = 1e-12


@dataclass(frozen=True)
class LossWeights:
    lambda_nce: float = 1.0
    lambda_ver: float = 1.0
    lambda_reg: float = 0.0
    lambda_align: float = 1.0
    lambda_max: float = 1.0
    tau_e: float = 1.0

    def __post_init__(self):
        for name in ("lambda_nce", "lambda_ver", "lambda_reg",
                     "lambda_align", "lambda_max"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.tau_e <= 0:
            raise ValueError("tau_e must be > 0")


def infonce(positive_sim: float, negative_sims: list[float],
            temperature: float = 1.0) -> float:
    """-log( e^{pos/t} / (e^{pos/t} + sum e^{neg/t}) )."""
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    if not negative_sims:
        raise ValueError("at least one negative similarity required")
    # log-sum-exp against overflow
    terms = [positive_sim / temperature] + [s / temperature for s in negative_sims]
    peak = max(terms)
    lse = peak + math.log(sum(math.exp(t - peak) for t in terms))
    return lse - positive_sim / temperature


def bce(prediction: float, label: int) -> float:
    """Binary cross-entropy with predictions clamped away from {0, 1}."""
    if label not in (0, 1):
        raise ValueError("label must be 0 or 1")
    p = min(max(prediction, _CLAMP), 1.0 - _CLAMP)
    return -(label * math.log(p) + (1 - label) * math.log(1.0 - p))


def total_loss(components: dict[str, float], weights: LossWeights) -> float:
    """ans + l_nce*nce + l_ver*ver + l_reg*reg + l_align*align."""
    for value in components.values():
        if not math.isfinite(value):
            raise ValueError("loss components must be finite")
    return (
        components.get("ans", 0.0)
        + weights.lambda_nce * components.get("nce", 0.0)
        + weights.lambda_ver * components.get("ver", 0.0)
        + weights.lambda_reg * components.get("reg", 0.0)
        + weights.lambda_align * components.get("align", 0.0)
    )


def rl_reward(f1: float, edits: int, edit_budget: int, beta_edit: float,
              halluc_flag: int, gamma_hall: float) -> float:
    """f1 - beta*(edits/budget) - gamma*halluc_flag.

    The hallucination penalty is a 0/1 flag: 1 iff the predicted answer
    entity is absent from the final subgraph.
    """
    if edit_budget <= 0:
        raise ValueError("edit_budget must be > 0")
    if halluc_flag not in (0, 1):
        raise ValueError("halluc_flag must be 0 or 1")
    return f1 - beta_edit * (edits / edit_budget) - gamma_hall * halluc_flag


def anneal(epoch: float, lambda_max: float, tau_e: float) -> float:
    """Ramp a loss weight from 0 toward lambda_max: l_max*(1 - e^{-e/tau})."""
    if tau_e <= 0:
        raise ValueError("tau_e must be > 0")
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return lambda_max * (1.0 - math.exp(-epoch / tau_e))


def pi_map_ce(predicted_dist: list[float], oracle_action: int) -> float:
    """Cross-entropy of a predicted edit-action distribution against the
    oracle action; zero probabilities are clamped."""
    total = sum(predicted_dist)
    if not math.isclose(total, 1.0, abs_tol=1e-6):
        raise ValueError(f"distribution sums to {total}, expected 1")
    if not 0 <= oracle_action < len(predicted_dist):
        raise ValueError("oracle_action out of range")
    return -math.log(max(predicted_dist[oracle_action], _CLAMP))
