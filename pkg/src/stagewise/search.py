"""Iterative stage-deepening search.

One iteration: deepen every stage of the current network A by the growth
step to form a temporary network T, score both, and adopt the extra depth
only in stages whose score strictly improved. The adopted network becomes
the next iteration's input. With n iterations at most 2n+1 distinct
descriptors are ever evaluated (A, one T per iteration, one mixed candidate
per iteration), and the evaluator cache makes repeats free.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .arch import Architecture, deepen, from_json_dict
from .errors import SearchAbortedError, SearchError, StagewiseError
from .evaluators import EvalBudget, Evaluator
from .importance import (
    ScorerParams,
    StageScores,
    default_params,
    stage_scores,
)

ROLE_INITIAL = "initial"
ROLE_TEMPORARY = "temporary"
ROLE_CANDIDATE = "candidate"


def default_growth_step(kind_variant: str) -> int:
    """Growth step defaults: 2 modules for residual kinds, 1 for cells."""
    return 1 if kind_variant == "cell" else 2


@dataclass(frozen=True)
class SearchConfig:
    iterations: int
    delta: int
    initial: Architecture
    criterion: str
    budget: EvalBudget
    scorer_params: ScorerParams | None = None
    score_seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise SearchError(f"iterations must be >= 1, got {self.iterations}")
        if self.delta < 1:
            raise SearchError(f"growth step must be >= 1, got {self.delta}")

    def resolved_params(self) -> ScorerParams:
        return (
            self.scorer_params
            if self.scorer_params is not None
            else default_params(self.criterion)
        )


@dataclass(frozen=True)
class LedgerRecord:
    iteration: int
    role: str
    architecture: Architecture
    scores: StageScores
    metrics: dict
    cache_hit: bool

    def to_json_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "role": self.role,
            "architecture": self.architecture.to_json_dict(),
            "architecture_id": self.architecture.id,
            "scores": {
                "criterion": self.scores.criterion,
                "alpha": list(self.scores.alpha),
            },
            "metrics": self.metrics,
            "cache_hit": self.cache_hit,
        }


@dataclass
class SearchLedger:
    records: list[LedgerRecord]
    metadata: dict

    def distinct_evaluated(self) -> int:
        return len({r.architecture.id for r in self.records})

    def candidates(self) -> list[LedgerRecord]:
        return [r for r in self.records if r.role == ROLE_CANDIDATE]

    def final_architecture(self) -> Architecture:
        candidates = self.candidates()
        if candidates:
            return candidates[-1].architecture
        if self.records:
            return self.records[0].architecture
        raise SearchError("empty ledger")

    def to_json_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "distinct_evaluations": self.distinct_evaluated(),
            "records": [r.to_json_dict() for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "SearchLedger":
        obj = json.loads(Path(path).read_text())
        records = []
        for raw in obj["records"]:
            records.append(
                LedgerRecord(
                    iteration=raw["iteration"],
                    role=raw["role"],
                    architecture=from_json_dict(raw["architecture"]),
                    scores=StageScores(
                        alpha=tuple(raw["scores"]["alpha"]),
                        criterion=raw["scores"]["criterion"],
                    ),
                    metrics=raw["metrics"],
                    cache_hit=raw["cache_hit"],
                )
            )
        return cls(records=records, metadata=obj.get("metadata", {}))


def compare_stage_scores(
    a_scores: StageScores, t_scores: StageScores
) -> tuple[bool, ...]:
    """Per-stage update mask: True where the deepened network scored strictly higher.

    Ties keep the stage shallow.
    """
    if a_scores.criterion != t_scores.criterion:
        raise SearchError(
            f"criterion mismatch: {a_scores.criterion} vs {t_scores.criterion}"
        )
    if len(a_scores.alpha) != len(t_scores.alpha):
        raise SearchError(
            f"stage count mismatch: {len(a_scores.alpha)} vs {len(t_scores.alpha)}"
        )
    return tuple(t > a for a, t in zip(a_scores.alpha, t_scores.alpha))


class _Run:
    def __init__(self, cfg: SearchConfig, ev: Evaluator, checkpoint_path):
        self.cfg = cfg
        self.ev = ev
        self.checkpoint_path = Path(checkpoint_path) if checkpoint_path else None
        metadata = {
            "iterations": cfg.iterations,
            "delta": cfg.delta,
            "criterion": cfg.criterion,
            "initial_id": cfg.initial.id,
        }
        if cfg.criterion == "il_fs":
            metadata["criterion_note"] = (
                "surrogate: equal-frequency token quantization + Fisher relevance"
            )
        self.ledger = SearchLedger(records=[], metadata=metadata)

    def _checkpoint(self) -> None:
        if self.checkpoint_path is not None:
            self.checkpoint_path.parent.mkdir(parents=True, exist_ok=True)
            self.ledger.save(self.checkpoint_path)

    def _evaluate(self, a: Architecture, iteration: int, role: str) -> LedgerRecord:
        try:
            result = self.ev.evaluate(a, self.cfg.budget)
        except StagewiseError as exc:
            self._checkpoint()
            raise SearchAbortedError(
                f"evaluator failed on {role} of iteration {iteration} "
                f"(descriptor {a.id}): {exc}",
                ledger=self.ledger,
            ) from exc
        scores = stage_scores(
            result.features,
            self.cfg.criterion,
            self.cfg.resolved_params(),
            seed=self.cfg.score_seed,
        )
        record = LedgerRecord(
            iteration=iteration,
            role=role,
            architecture=a,
            scores=scores,
            metrics=result.metrics,
            cache_hit=result.cache_hit,
        )
        self.ledger.records.append(record)
        self._checkpoint()
        return record

    def resume_point(self, prior: SearchLedger) -> tuple[Architecture, StageScores, int]:
        """Restore loop state from a checkpoint ledger.

        Completed iterations are kept verbatim; a half-finished iteration
        (temporary recorded, candidate missing) is redone from its start,
        which costs nothing thanks to the evaluator cache.
        """
        if not prior.records or prior.records[0].role != ROLE_INITIAL:
            raise SearchError("checkpoint has no initial record; cannot resume")
        self.ledger.records = list(prior.records)
        last_complete = max(
            (r.iteration for r in self.ledger.records if r.role == ROLE_CANDIDATE),
            default=0,
        )
        self.ledger.records = [
            r for r in self.ledger.records if r.iteration <= last_complete
        ]
        anchor = self.ledger.records[-1]
        return anchor.architecture, anchor.scores, last_complete + 1

    def run(self, resume_from: SearchLedger | None = None) -> SearchLedger:
        cfg = self.cfg
        if resume_from is not None:
            current, current_scores, start = self.resume_point(resume_from)
            self._checkpoint()
        else:
            record = self._evaluate(cfg.initial, 0, ROLE_INITIAL)
            current, current_scores, start = record.architecture, record.scores, 1
        grow_all = (cfg.delta,) * current.num_stages
        for k in range(start, cfg.iterations + 1):
            temporary = deepen(current, grow_all)
            t_record = self._evaluate(temporary, k, ROLE_TEMPORARY)
            mask = compare_stage_scores(current_scores, t_record.scores)
            candidate = deepen(
                current, tuple(cfg.delta if hit else 0 for hit in mask)
            )
            c_record = self._evaluate(candidate, k, ROLE_CANDIDATE)
            current, current_scores = candidate, c_record.scores
        return self.ledger


def run_search(
    cfg: SearchConfig,
    ev: Evaluator,
    checkpoint_path=None,
    resume_from: SearchLedger | None = None,
) -> SearchLedger:
    """Execute the full search; see the module docstring for the loop shape.

    ``checkpoint_path`` gets a fresh ledger snapshot after every evaluation.
    Pass a previously checkpointed ledger as ``resume_from`` to continue an
    aborted run.
    """
    return _Run(cfg, ev, checkpoint_path).run(resume_from)
