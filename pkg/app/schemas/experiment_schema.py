# app/schemas/experiment_schema.py

"""
Experiment Config Schemas
-------------------------

Versioned JSON document describing one experiment: the gossip matrix, the
test problem, the step schedule and the run parameters. Unknown keys are
rejected everywhere so that a typo never silently falls back to a default.
"""

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.schedule import ScheduleKind, StepSchedule


class StrictModel(BaseModel):
    """Base for config sections; unknown keys are errors."""

    model_config = ConfigDict(extra="forbid")


class GossipSpec(StrictModel):
    """
    Gossip matrix, either explicit or produced by a named generator.

    :param matrix: Explicit row-stochastic matrix.
    :type matrix: List[List[float]] | None

    :param generator: Generator name.
    :type generator: str | None

    :param M: Number of nodes for the generator.
    :type M: int | None

    :param seed: Seed of ``random_primitive``.
    :type seed: int

    :param density: Extra-edge probability of ``random_primitive``.
    :type density: float
    """

    matrix: Optional[List[List[float]]] = None
    generator: Optional[Literal["complete", "lazy_ring", "random_primitive"]] = None
    M: Optional[int] = Field(None, ge=1)
    seed: int = 0
    density: float = Field(0.5, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _one_source(self) -> "GossipSpec":
        if (self.matrix is None) == (self.generator is None):
            raise ValueError("exactly one of 'matrix' and 'generator' is required")
        if self.generator is not None and self.M is None:
            raise ValueError("'M' is required with a generator")
        return self


class RegionSpec(StrictModel):
    """
    Entry region B′: a box (lower, upper) or a ball (center, radius).

    A ball without a center is placed at the problem's equilibrium.
    """

    kind: Literal["box", "ball"]
    lower: Optional[List[float]] = None
    upper: Optional[List[float]] = None
    center: Optional[List[float]] = None
    radius: Optional[float] = Field(None, gt=0.0)

    @model_validator(mode="after")
    def _complete(self) -> "RegionSpec":
        if self.kind == "box" and (self.lower is None or self.upper is None):
            raise ValueError("a box needs 'lower' and 'upper'")
        if self.kind == "ball" and self.radius is None:
            raise ValueError("a ball needs 'radius'")
        return self


class ProblemSpec(StrictModel):
    """
    Test problem selection and parameters.

    :param kind: "linear" (h^i(x) = θ_i − x) or "double_well" (h^i(x) = x − x³ + c_i).
    :param theta: Node targets θ_i (linear), one row per node.
    :param offsets: Node offsets c_i (double well), one row per node.
    :param beta: Noise amplitude β.
    :param epsilon: Level ε of A^ε.
    :param region: Entry region B′; a default per problem kind when omitted.
    :param initial: Initial iterate X(0); every row at the centre of B′ when omitted.
    :param well: Equilibrium selector of the double well.
    :param max_V: Override of max V over B′ used by τ.
    :param grid_resolution: Grid points per axis.
    :param h_max: Largest ODE step.
    """

    kind: Literal["linear", "double_well"]
    theta: Optional[List[List[float]]] = None
    offsets: Optional[List[List[float]]] = None
    beta: float = Field(0.1, ge=0.0)
    epsilon: float = Field(..., gt=0.0)
    region: Optional[RegionSpec] = None
    initial: Optional[List[List[float]]] = None
    well: float = 1.0
    max_V: Optional[float] = Field(None, ge=0.0)
    grid_resolution: int = Field(33, ge=3, le=401)
    h_max: float = Field(1e-3, gt=0.0)

    @model_validator(mode="after")
    def _parameters(self) -> "ProblemSpec":
        if self.kind == "linear" and self.theta is None:
            raise ValueError("the linear problem needs 'theta'")
        if self.kind == "double_well" and self.offsets is None:
            raise ValueError("the double well problem needs 'offsets'")
        return self


class ScheduleSpec(StrictModel):
    """Step schedule parameters (see ``StepSchedule``)."""

    kind: ScheduleKind = "harmonic"
    gamma: float = Field(1.0, gt=0.0)
    scale: float = Field(1.0, gt=0.0)
    shift: float = Field(1.0, gt=0.0)
    value: float = Field(0.1, ge=0.0)
    table: List[float] = Field(default_factory=list)
    c: float = Field(1.0, ge=1.0)
    C_star: Optional[float] = Field(None, gt=0.0)

    @model_validator(mode="after")
    def _table(self) -> "ScheduleSpec":
        if self.kind == "table" and not self.table:
            raise ValueError("a table schedule needs a non-empty 'table'")
        return self

    def to_schedule(self) -> StepSchedule:
        return StepSchedule(
            kind=self.kind,
            gamma=self.gamma,
            scale=self.scale,
            shift=self.shift,
            value=self.value,
            table=tuple(self.table),
            c=self.c,
            C_star=self.C_star,
        )


class BoundSpec(StrictModel):
    """
    n0 sweep of the bound command.

    :param n0_values: Entry indices to tabulate.
    :param delta_tilde_scale: Multiplier applied to δ̃ (sensitivity studies).
    """

    n0_values: List[int] = Field(default_factory=lambda: list(range(10, 101, 10)))
    delta_tilde_scale: float = Field(1.0, gt=0.0)


class ExperimentConfig(StrictModel):
    """
    Complete experiment description.

    :param schema_version: Must be 1.
    :param name: Label used in reports.
    :param T_prime: Target epoch length T′.
    :param n0: Entry index of the trapping experiment.
    :param horizon: Iterations simulated by simulate/track and scanned by validate.
    :param trap_horizon: Iterations of the trapping experiment; derived when omitted.
    :param replicas: Number of replicas.
    :param master_seed: Master seed; replica i uses master_seed ^ i.
    :param boundedness_cap: Norm cap; settings default when omitted.
    :param workers: Worker pool size; settings default when omitted.
    :param D: Override of the exponent constant.
    :param output_dir: Base output directory; settings default when omitted.
    """

    schema_version: Literal[1]
    name: str = "experiment"
    gossip: GossipSpec
    problem: ProblemSpec
    schedule: ScheduleSpec = Field(default_factory=ScheduleSpec)
    T_prime: float = Field(1.0, gt=0.0)
    n0: int = Field(0, ge=0)
    horizon: int = Field(10_000, ge=1)
    trap_horizon: Optional[int] = Field(None, ge=1)
    replicas: int = Field(10, ge=1)
    master_seed: int = Field(0, ge=0, lt=2 ** 64)
    boundedness_cap: Optional[float] = Field(None, ge=0.0)
    workers: Optional[int] = Field(None, ge=0)
    D: Optional[float] = Field(None, gt=0.0)
    bound: BoundSpec = Field(default_factory=BoundSpec)
    output_dir: Optional[str] = None

    @model_validator(mode="after")
    def _ordering(self) -> "ExperimentConfig":
        if self.horizon <= self.n0:
            raise ValueError("horizon must exceed n0")
        if self.trap_horizon is not None and self.trap_horizon <= self.n0:
            raise ValueError("trap_horizon must exceed n0")
        return self

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Copy with CLI overrides applied (None values are ignored) and re-validated."""
        data = self.model_dump()
        data.update({key: value for key, value in overrides.items() if value is not None})
        return ExperimentConfig.model_validate(data)

