"""Cost model: exact integer MAC accounting, per-event and closed form."""

import pytest

from conftest import make_rng
from latentrl.accounting import (
    EVENTS,
    CostLedger,
    FlopModel,
    closed_form_total,
    flops_post_freeze_per_iter,
    flops_pre_freeze_per_iter,
    one_time_freeze_cost,
)


def per_iter_oracle(e, m, b, f, bw, k, n):
    """Independent per-iteration costs, summed pass by pass in plain ints.

    Returns (full_network_iter, frozen_iter) including the action forward.
    """
    passes_full = []
    passes_frozen = []
    for _ in range(f):                      # forward passes over the batch
        passes_full.append(b * (e + m))
        passes_frozen.append(b * m)
    for _ in range(bw):                     # backward costs twice the forward
        passes_full.append(2 * b * (e + m))
        passes_frozen.append(2 * b * m)
    passes_full.append(e + m)               # acting on the current observation
    passes_frozen.append(e + m)
    passes_frozen.append(e * k * n)         # encoding the new observation K times
    return sum(passes_full), sum(passes_frozen)


def test_worked_per_iteration_costs():
    model = FlopModel(encoder_macs=1000, head_macs=100, batch=32)
    assert flops_pre_freeze_per_iter(model) == 141_900
    assert flops_post_freeze_per_iter(model) == 14_900


def test_catch_network_event_amounts():
    # conv(2->4,k3,s3) + conv(4->8,k3,s2,p1) + dense(128->32) on 24x24 input,
    # head 32->32->3: encoder 13312 MACs, head 1120 MACs
    model = FlopModel(encoder_macs=13312, head_macs=1120, batch=32)
    ledger = CostLedger(model, freeze_step=12000, image_capacity=30000)
    assert ledger._amount("action_forward") == 14_432
    assert ledger._amount("pre_update") == 1_847_296
    assert ledger._amount("post_update") == 156_672
    assert ledger._amount("conversion") == 13312 * 12000


def test_per_iteration_costs_many_random_models():
    rng = make_rng(123)
    for _ in range(20):
        e = int(rng.integers(1, 100_000))
        m = int(rng.integers(1, 10_000))
        b = int(rng.integers(1, 256))
        f = int(rng.integers(1, 4))
        bw = int(rng.integers(1, 3))
        k = int(rng.integers(1, 5))
        n = int(rng.integers(1, 3))
        model = FlopModel(e, m, b, forwards=f, backwards=bw, k=k, n=n)
        full_iter, frozen_iter = per_iter_oracle(e, m, b, f, bw, k, n)
        assert flops_pre_freeze_per_iter(model) == full_iter
        assert flops_post_freeze_per_iter(model) == frozen_iter
        # the ledger splits the action pass out as its own event
        ledger = CostLedger(model, freeze_step=1, image_capacity=1)
        assert ledger._amount("pre_update") + ledger._amount("action_forward") == full_iter
        assert (ledger._amount("post_update")
                + ledger._amount("action_forward")) == frozen_iter


def test_one_time_freeze_cost_takes_min_of_steps_and_capacity():
    assert one_time_freeze_cost(1000, 1, 1, 5000, 10_000) == 5_000_000
    assert one_time_freeze_cost(1000, 2, 3, 10_000, 4000) == 24_000_000
    assert one_time_freeze_cost(1000, 1, 1, 0, 500) == 0
    with pytest.raises(ValueError):
        one_time_freeze_cost(-1, 1, 1, 10, 10)


def test_ledger_breakdown_and_counts_stay_consistent():
    model = FlopModel(encoder_macs=700, head_macs=90, batch=8, k=2)
    ledger = CostLedger(model, freeze_step=40, image_capacity=100)
    rng = make_rng(7)
    for _ in range(500):
        ledger.record(EVENTS[int(rng.integers(len(EVENTS)))])
    assert ledger.total_macs == sum(ledger.breakdown.values())
    for event in EVENTS:
        assert ledger.breakdown[event] == ledger.counts[event] * ledger._amount(event)
    assert sum(ledger.counts.values()) == 500


def test_conversion_event_requires_freeze_context():
    ledger = CostLedger(FlopModel(100, 10, 4))
    with pytest.raises(ValueError):
        ledger.record("conversion")
    with pytest.raises(ValueError):
        ledger.record("warp_drive")
    assert ledger.total_macs == 0  # failed records must not charge anything


def test_note_bytes_appends_samples():
    ledger = CostLedger(FlopModel(100, 10, 4))
    ledger.note_bytes(10, 4096)
    ledger.note_bytes(20, 8192)
    assert ledger.bytes_samples == [(10, 4096), (20, 8192)]


def simulate_run_total(model, total_steps, initial_steps, freeze_step,
                       image_capacity, mode, updates_per_step=1):
    """Replay the training loop's event schedule step by step.

    Mirrors the engine: random warmup actions are free, the agent acts from
    step initial_steps+1 on, conversion happens when the step counter hits the
    freeze step, and every charged step runs updates_per_step updates (full
    network before the freeze, head-only from the freeze step on).
    """
    ledger = CostLedger(model, freeze_step if mode == "seer" else None,
                        image_capacity=image_capacity)
    for t in range(1, total_steps + 1):
        if t > initial_steps:
            ledger.record("action_forward")
        if mode == "seer" and t == freeze_step:
            ledger.record("conversion")
        if t > initial_steps:
            for _ in range(updates_per_step):
                if mode == "seer" and t >= freeze_step:
                    ledger.record("post_update")
                else:
                    ledger.record("pre_update")
    return ledger.total_macs


def test_closed_form_total_matches_simulated_schedule():
    rng = make_rng(2024)
    cases = []
    for _ in range(20):
        total = int(rng.integers(50, 500))
        initial = int(rng.integers(1, 40))
        freeze = int(rng.integers(initial, total + 100))  # may exceed the run
        cap = int(rng.integers(1, 400))
        ups = int(rng.integers(1, 3))
        cases.append((total, initial, freeze, cap, ups))
    cases.append((300, 20, 20, 50, 1))    # freeze on the first charged step
    cases.append((300, 20, 300, 50, 1))   # freeze on the final step
    cases.append((300, 20, 301, 50, 1))   # freeze just past the end
    for total, initial, freeze, cap, ups in cases:
        model = FlopModel(encoder_macs=int(rng.integers(10, 5000)),
                          head_macs=int(rng.integers(1, 500)),
                          batch=int(rng.integers(1, 64)),
                          k=int(rng.integers(1, 4)))
        for mode in ("baseline", "seer"):
            expect = simulate_run_total(model, total, initial, freeze, cap, mode, ups)
            got = closed_form_total(model, total, initial, freeze, cap, mode, ups)
            assert got == expect, (mode, total, initial, freeze, cap, ups)


def test_closed_form_handles_degenerate_freeze_at_zero():
    model = FlopModel(1000, 100, 16)
    # freezing before any data exists costs nothing to convert and makes
    # every update a head-only update
    total = closed_form_total(model, 100, 10, 0, 500, "seer")
    post = (16 * 2 + 2 * 16) * 100 + 1000
    assert total == 90 * (1100 + post)
