"""Closed-form compute accounting for the training loop.

Costs are exact integer multiply-add (MAC) counts. One forward pass through
the encoder costs E, through the head M; a backward pass costs twice the
corresponding forward. Per training iteration with batch b, F forward passes
and B backward passes:

    full-network phase:  b*F*(E+M) + 2*b*B*(E+M) + (E+M)
    frozen phase:        b*F*M     + 2*b*B*M     + (E+M) + E*K*N

The trailing (E+M) is the action-selection forward and E*K*N is the cost of
encoding the K augmented latents of each new observation. Converting the
buffer at the freeze step is a one-time cost of E*K*N*min(freeze_step, C)
with C the image-mode transition capacity.

The ledger records the action pass as its own event so that runs with a
different updates-per-step ratio stay exact; with one update per step the
per-iteration sums above are reproduced exactly.
"""

from dataclasses import dataclass, field

EVENTS = ("action_forward", "pre_update", "post_update", "conversion")


@dataclass(frozen=True)
class FlopModel:
    encoder_macs: int           # E
    head_macs: int              # M
    batch: int                  # b
    forwards: int = 2           # F: forward passes per update
    backwards: int = 1          # B: backward passes per update
    k: int = 1                  # augmentations per observation
    n: int = 1                  # encoder count (1 for Q-learning)


def flops_pre_freeze_per_iter(model):
    em = model.encoder_macs + model.head_macs
    return model.batch * model.forwards * em + 2 * model.batch * model.backwards * em + em


def flops_post_freeze_per_iter(model):
    m = model.head_macs
    em = model.encoder_macs + m
    return (model.batch * model.forwards * m + 2 * model.batch * model.backwards * m
            + em + model.encoder_macs * model.k * model.n)


def one_time_freeze_cost(encoder_macs, k, n, freeze_step, image_capacity):
    if min(encoder_macs, k, n, freeze_step, image_capacity) < 0:
        raise ValueError("cost inputs must be non-negative")
    return encoder_macs * k * n * min(freeze_step, image_capacity)


class CostLedger:
    """Cumulative MAC counter with a per-event breakdown.

    Event amounts (see module docstring for the per-iteration identities):
      action_forward: E + M
      pre_update:     b*F*(E+M) + 2*b*B*(E+M)
      post_update:    b*F*M + 2*b*B*M + E*K*N
      conversion:     E*K*N*min(freeze_step, image_capacity)
    """

    def __init__(self, model, freeze_step=None, image_capacity=None):
        self.model = model
        self.freeze_step = freeze_step
        self.image_capacity = image_capacity
        self.total_macs = 0
        self.breakdown = {e: 0 for e in EVENTS}
        self.counts = {e: 0 for e in EVENTS}
        self.bytes_samples = []

    def _amount(self, event):
        m = self.model
        em = m.encoder_macs + m.head_macs
        if event == "action_forward":
            return em
        if event == "pre_update":
            return m.batch * m.forwards * em + 2 * m.batch * m.backwards * em
        if event == "post_update":
            return (m.batch * m.forwards * m.head_macs
                    + 2 * m.batch * m.backwards * m.head_macs
                    + m.encoder_macs * m.k * m.n)
        if event == "conversion":
            if self.freeze_step is None or self.image_capacity is None:
                raise ValueError("conversion cost needs freeze_step and image_capacity")
            return one_time_freeze_cost(m.encoder_macs, m.k, m.n,
                                        self.freeze_step, self.image_capacity)
        raise ValueError(f"unknown ledger event {event!r}")

    def record(self, event):
        amount = self._amount(event)
        self.total_macs += amount
        self.breakdown[event] += amount
        self.counts[event] += 1

    def note_bytes(self, step, nbytes):
        self.bytes_samples.append((step, nbytes))


def closed_form_total(model, total_steps, initial_steps, freeze_step, image_capacity,
                      mode, updates_per_step=1):
    """Exact ledger total for a standard run (one push per step, updates from
    step initial_steps+1 on, freeze/convert at freeze_step in non-baseline mode)."""
    t, i = total_steps, initial_steps
    actions = max(0, t - i)
    total = actions * (model.encoder_macs + model.head_macs)
    pre_amount = (model.batch * model.forwards + 2 * model.batch * model.backwards) \
        * (model.encoder_macs + model.head_macs)
    post_amount = (model.batch * model.forwards + 2 * model.batch * model.backwards) \
        * model.head_macs + model.encoder_macs * model.k * model.n
    if mode == "baseline":
        total += max(0, t - i) * updates_per_step * pre_amount
        return total
    f = freeze_step
    pre_n = max(0, min(f - 1, t) - i)
    post_n = max(0, t - max(f, i + 1) + 1)
    total += updates_per_step * (pre_n * pre_amount + post_n * post_amount)
    if t >= f:
        total += one_time_freeze_cost(model.encoder_macs, model.k, model.n, f, image_capacity)
    return total
