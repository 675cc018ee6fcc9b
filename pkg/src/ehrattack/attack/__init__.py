"""Black-box attacks on survival predictions over coded visit sequences."""
from .greedy import AttackConfig, AttackResult, KeptAction, LogEntry, Termination, greedy_attack
from .population import (DSAResult, GreedyStrategy, RandomStrategy, dsa_attack,
                         random_attack)
from .scoring import (AttackContext, Direction, ScoredAction, composite_score,
                      score_candidates, select_replacement)

__all__ = [
    "AttackConfig", "AttackContext", "AttackResult", "DSAResult", "Direction",
    "GreedyStrategy", "KeptAction", "LogEntry", "RandomStrategy", "ScoredAction",
    "Termination", "composite_score", "dsa_attack", "greedy_attack", "random_attack",
    "score_candidates", "select_replacement",
]
