"""Request and response schemas for the HTTP service.

Requests validate flag-level constraints (ranges, choices, required fields);
the physical content of states and measurements is validated by the core
parsers so the service and the command line share one validation path and one
set of entry-indexed error messages.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

StateJson = dict
PovmJson = dict


class _StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BellRequest(_StrictModel):
    protocol: Literal["rounds", "steiner"]
    x: float = Field(ge=0.0, lt=1.0)
    y: float = Field(ge=0.0, lt=1.0)
    trials: int = Field(ge=1)
    seed: int = Field(ge=0, lt=2**64)
    k_code: str = "unary"
    round_cap: int | None = Field(default=None, ge=1)
    workers: int | None = Field(default=None, ge=1)


class TeleportRequest(_StrictModel):
    state: StateJson
    povm: PovmJson
    trials: int = Field(ge=1)
    seed: int = Field(ge=0, lt=2**64)
    round_cap: int | None = Field(default=None, ge=1)
    workers: int | None = Field(default=None, ge=1)


class EntangledRequest(_StrictModel):
    alice_povm: PovmJson
    bob_povm: PovmJson
    trials: int = Field(ge=1)
    seed: int = Field(ge=0, lt=2**64)
    round_cap: int | None = Field(default=None, ge=1)
    workers: int | None = Field(default=None, ge=1)


class MiBoundRequest(_StrictModel):
    mc_samples: int | None = Field(default=None, ge=1)
    seed: int | None = Field(default=None, ge=0, lt=2**64)


class MiAuditRequest(_StrictModel):
    protocol: Literal["rounds", "entangled", "teleport"]
    trials: int = Field(ge=1000)
    seed: int = Field(ge=0, lt=2**64)
    x: float | None = Field(default=None, ge=0.0, lt=1.0)
    y: float | None = Field(default=None, ge=0.0, lt=1.0)
    alice_povm: PovmJson | None = None
    bob_povm: PovmJson | None = None
    workers: int | None = Field(default=None, ge=1)


class NeQuantumRequest(_StrictModel):
    n: int = Field(ge=1)
    x: int | None = Field(default=None, ge=0)
    y: int | None = Field(default=None, ge=0)
    exhaustive: bool = False


class NeWrapRequest(_StrictModel):
    protocol: Literal["rounds", "steiner"]
    n: int = Field(ge=1)
    x: int = Field(ge=0)
    y: int = Field(ge=0)
    trials: int = Field(ge=1)
    seed: int = Field(ge=0, lt=2**64)
    workers: int | None = Field(default=None, ge=1)


class NeCoverRequest(_StrictModel):
    n: int = Field(ge=1, le=3)


class OutcomeCell(BaseModel):
    count: int
    frequency: float
    oracle: float


class AgreementBlock(BaseModel):
    pr_equal: float
    oracle: float
    within_3sigma: bool


class CommunicationBlock(BaseModel):
    forward_mean: float
    forward_max: int
    backward_mean: float
    backward_max: int


class RoundsBlock(BaseModel):
    mean: float
    max: int
    histogram: dict[str, int]


class Chi2Block(BaseModel):
    statistic: float | None
    p_value: float
    dof: int


class StatsReport(BaseModel):
    """Full Monte Carlo report; `config` plus `seed` fully determine a re-run."""

    command: str
    version: str
    config: dict
    outcomes: dict[str, OutcomeCell]
    agreement: AgreementBlock | None = None
    communication: CommunicationBlock
    rounds: RoundsBlock
    chi2: Chi2Block


class McBlock(BaseModel):
    samples: int
    seed: int
    mean: float
    standard_error: float
    sigma_from_quadrature: float


class MiBoundReply(BaseModel):
    command: str
    version: str
    quadrature: float
    closed_form: float
    abs_error: float
    monte_carlo: McBlock | None = None


class MiBlock(BaseModel):
    value: float
    standard_error: float
    degenerate: bool


class MiAuditReply(BaseModel):
    command: str
    version: str
    config: dict
    protocol: str
    trials: int
    mi: MiBlock
    mean_forward: float
    mean_backward: float
    slack: float
    bound: float
    satisfied: bool


class NeQuantumReply(BaseModel):
    command: str
    version: str
    n: int
    x: int | None = None
    y: int | None = None
    probability: float | None = None
    projector_route: float | None = None
    not_equal: int | None = None
    checked_pairs: int | None = None
    all_consistent: bool | None = None


class NeWrapReply(BaseModel):
    command: str
    version: str
    config: dict
    pr_one: float
    oracle: float
    equal_inputs: bool
    false_positives: int | None
    communication: CommunicationBlock


class NeCoverReply(BaseModel):
    command: str
    version: str
    n: int
    size: int
    matches_antichain_bound: bool
    rectangles: list[list[list[int]]]


class HealthReply(BaseModel):
    status: Literal["ok"]
    version: str
