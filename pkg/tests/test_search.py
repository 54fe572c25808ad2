import json

import pytest

import stagewise as sw
from stagewise.errors import SearchAbortedError, SearchError
from stagewise.importance import StageScores
from stagewise.search import ROLE_CANDIDATE, ROLE_INITIAL, ROLE_TEMPORARY


def make_config(iterations=5, m0=6, delta=2, criterion="pls"):
    return sw.SearchConfig(
        iterations=iterations,
        delta=delta,
        initial=sw.default_low_resolution(m0),
        criterion=criterion,
        budget=sw.EvalBudget(epochs=1),
    )


# ---------------------------------------------------------------------------
# compare_stage_scores


def test_compare_elementwise_strict():
    a = StageScores(alpha=(1.0, 2.0, 3.0), criterion="pls")
    t = StageScores(alpha=(2.0, 2.0, 4.0), criterion="pls")
    assert sw.compare_stage_scores(a, t) == (True, False, True)


def test_compare_identical_scores_all_false():
    a = StageScores(alpha=(1.0, 2.0), criterion="pls")
    assert sw.compare_stage_scores(a, a) == (False, False)


def test_compare_all_greater_all_true():
    a = StageScores(alpha=(1.0, 2.0, 3.0), criterion="inf_fs")
    t = StageScores(alpha=(1.5, 2.5, 3.5), criterion="inf_fs")
    assert sw.compare_stage_scores(a, t) == (True, True, True)


def test_compare_rejects_mismatches():
    a = StageScores(alpha=(1.0, 2.0), criterion="pls")
    with pytest.raises(SearchError, match="criterion"):
        sw.compare_stage_scores(a, StageScores(alpha=(1.0, 2.0), criterion="inf_fs"))
    with pytest.raises(SearchError, match="stage count"):
        sw.compare_stage_scores(a, StageScores(alpha=(1.0,), criterion="pls"))


# ---------------------------------------------------------------------------
# run_search against planted oracles


def test_planted_recovery_only_stage2(planted_stage2_profile):
    ledger = sw.run_search(
        make_config(), sw.SyntheticEvaluator(planted_stage2_profile(0))
    )
    assert ledger.final_architecture().module_counts == (6, 16, 6)
    assert ledger.distinct_evaluated() == 11  # 2n+1 with n=5


def test_no_benefit_fixed_point(planted_stage2_profile):
    profile = sw.PlantedProfile(
        stages=tuple(sw.PlantedStage(ceiling=1, gain=0.0) for _ in range(3)), seed=0
    )
    ledger = sw.run_search(make_config(iterations=3), sw.SyntheticEvaluator(profile))
    assert ledger.final_architecture().module_counts == (6, 6, 6)
    for record in ledger.candidates():
        assert record.architecture.module_counts == (6, 6, 6)
    # A is evaluated once; T = deepen(A) is the same descriptor every
    # iteration, so caching leaves just two distinct evaluations.
    assert ledger.distinct_evaluated() == 2
    cache_hits = [r.cache_hit for r in ledger.records]
    assert cache_hits[0] is False and cache_hits[1] is False
    assert all(cache_hits[2:])


@pytest.mark.parametrize("seed", range(5))
def test_all_benefit_adopts_every_stage(seed, all_benefit_profile):
    ledger = sw.run_search(
        make_config(iterations=2), sw.SyntheticEvaluator(all_benefit_profile(seed))
    )
    assert ledger.final_architecture().module_counts == (10, 10, 10)


def test_budget_bound_2n_plus_1(planted_stage2_profile, all_benefit_profile):
    for iterations in (1, 3, 5):
        for profile in (planted_stage2_profile(0), all_benefit_profile(0)):
            ledger = sw.run_search(
                make_config(iterations=iterations), sw.SyntheticEvaluator(profile)
            )
            assert ledger.distinct_evaluated() <= 2 * iterations + 1


def test_total_depth_non_decreasing_and_steps_in_0_delta(planted_stage2_profile):
    ledger = sw.run_search(
        make_config(), sw.SyntheticEvaluator(planted_stage2_profile(1))
    )
    chain = [ledger.records[0].architecture] + [
        r.architecture for r in ledger.candidates()
    ]
    for before, after in zip(chain, chain[1:]):
        assert sum(after.module_counts) >= sum(before.module_counts)
        for m_before, m_after in zip(before.module_counts, after.module_counts):
            assert m_after - m_before in (0, 2)


def test_candidate_chains_into_next_iteration(planted_stage2_profile):
    ledger = sw.run_search(
        make_config(iterations=3), sw.SyntheticEvaluator(planted_stage2_profile(0))
    )
    by_iteration = {}
    for r in ledger.records:
        by_iteration.setdefault(r.iteration, {})[r.role] = r
    for k in (1, 2):
        candidate = by_iteration[k][ROLE_CANDIDATE].architecture
        next_temp = by_iteration[k + 1][ROLE_TEMPORARY].architecture
        assert next_temp == sw.deepen(candidate, (2, 2, 2))


def test_ledger_roles_and_record_counts(planted_stage2_profile):
    n = 4
    ledger = sw.run_search(
        make_config(iterations=n), sw.SyntheticEvaluator(planted_stage2_profile(0))
    )
    assert len(ledger.records) == 1 + 2 * n
    assert ledger.records[0].role == ROLE_INITIAL
    roles = [r.role for r in ledger.records[1:]]
    assert roles == [ROLE_TEMPORARY, ROLE_CANDIDATE] * n


def test_depth_independent_evaluator_is_fixed_point():
    # When stage scores do not react to depth at all, no stage is ever
    # deepened and the initial network is returned unchanged.
    profile = sw.PlantedProfile(
        stages=tuple(sw.PlantedStage(ceiling=1, gain=0.7) for _ in range(3)), seed=3
    )
    ledger = sw.run_search(make_config(iterations=4), sw.SyntheticEvaluator(profile))
    assert ledger.final_architecture() == sw.default_low_resolution(6)


def test_search_determinism_byte_identical(planted_stage2_profile, tmp_path):
    outs = []
    for run in range(2):
        ledger = sw.run_search(
            make_config(), sw.SyntheticEvaluator(planted_stage2_profile(7))
        )
        path = tmp_path / f"ledger_{run}.json"
        ledger.save(path)
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_ledger_save_load_round_trip(planted_stage2_profile, tmp_path):
    ledger = sw.run_search(
        make_config(iterations=2), sw.SyntheticEvaluator(planted_stage2_profile(0))
    )
    path = tmp_path / "ledger.json"
    ledger.save(path)
    loaded = sw.SearchLedger.load(path)
    assert loaded.to_json() == ledger.to_json()
    assert loaded.final_architecture() == ledger.final_architecture()


class FlakyEvaluator:
    """Delegates to a synthetic evaluator but fails on the Nth call."""

    def __init__(self, profile, fail_on_call):
        self.inner = sw.SyntheticEvaluator(profile)
        self.calls = 0
        self.fail_on_call = fail_on_call

    def evaluate(self, a, budget):
        self.calls += 1
        if self.calls == self.fail_on_call:
            raise sw.StagewiseError("injected evaluator failure")
        return self.inner.evaluate(a, budget)


def test_evaluator_failure_aborts_with_ledger_and_checkpoint(
    planted_stage2_profile, tmp_path
):
    checkpoint = tmp_path / "checkpoint.json"
    profile = planted_stage2_profile(0)
    with pytest.raises(SearchAbortedError) as err:
        sw.run_search(
            make_config(),
            FlakyEvaluator(profile, fail_on_call=4),  # temporary of iteration 2
            checkpoint_path=checkpoint,
        )
    partial = err.value.ledger
    assert partial is not None
    assert len(partial.records) == 3  # initial + iteration 1 complete
    assert checkpoint.exists()
    on_disk = sw.SearchLedger.load(checkpoint)
    assert on_disk.to_json() == partial.to_json()


def test_resume_completes_interrupted_run(planted_stage2_profile, tmp_path):
    checkpoint = tmp_path / "checkpoint.json"
    profile = planted_stage2_profile(0)
    with pytest.raises(SearchAbortedError):
        sw.run_search(
            make_config(),
            FlakyEvaluator(profile, fail_on_call=6),
            checkpoint_path=checkpoint,
        )
    resumed = sw.run_search(
        make_config(),
        sw.SyntheticEvaluator(profile),
        checkpoint_path=checkpoint,
        resume_from=sw.SearchLedger.load(checkpoint),
    )
    uninterrupted = sw.run_search(make_config(), sw.SyntheticEvaluator(profile))
    assert resumed.to_json() == uninterrupted.to_json()


def test_resume_mid_iteration_redoes_partial_iteration(
    planted_stage2_profile, tmp_path
):
    checkpoint = tmp_path / "checkpoint.json"
    profile = planted_stage2_profile(2)
    with pytest.raises(SearchAbortedError):
        sw.run_search(
            make_config(iterations=3),
            FlakyEvaluator(profile, fail_on_call=5),  # candidate of iteration 2
            checkpoint_path=checkpoint,
        )
    prior = sw.SearchLedger.load(checkpoint)
    assert prior.records[-1].role == ROLE_TEMPORARY  # half-finished iteration
    resumed = sw.run_search(
        make_config(iterations=3),
        sw.SyntheticEvaluator(profile),
        checkpoint_path=checkpoint,
        resume_from=prior,
    )
    uninterrupted = sw.run_search(
        make_config(iterations=3), sw.SyntheticEvaluator(profile)
    )
    assert resumed.to_json() == uninterrupted.to_json()


def test_checkpoint_written_after_every_evaluation(planted_stage2_profile, tmp_path):
    checkpoint = tmp_path / "checkpoint.json"
    ledger = sw.run_search(
        make_config(iterations=1),
        sw.SyntheticEvaluator(planted_stage2_profile(0)),
        checkpoint_path=checkpoint,
    )
    final = json.loads(checkpoint.read_text())
    assert final == ledger.to_json_dict()


def test_config_validation():
    with pytest.raises(SearchError):
        make_config(iterations=0)
    with pytest.raises(SearchError):
        make_config(delta=0)


def test_default_growth_step():
    assert sw.default_growth_step("residual_basic") == 2
    assert sw.default_growth_step("residual_bottleneck") == 2
    assert sw.default_growth_step("cell") == 1
