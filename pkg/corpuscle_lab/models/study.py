import json
from pathlib import Path
from typing import Any, List, Literal

import yaml
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    field_validator,
    model_validator,
)

from corpuscle_lab.errors import ConfigError, CorpuscleError
from corpuscle_lab.models.constants import PhysicalConstants
from corpuscle_lab.physics.concentration import ConcentrationSchedule
from corpuscle_lab.physics.fields import AnalyticPotentials
from corpuscle_lab.physics.polynomial import MAX_SCALAR_DEGREE, MAX_VECTOR_DEGREE, PolyScalarField, PolyVectorField

Vector3 = tuple[float, float, float]
PolynomialDoc = dict[str, Any]

SEED_LIMIT = 2 ** 64


def _scalar(doc: PolynomialDoc, max_degree: int, what: str) -> PolyScalarField:
    try:
        field = PolyScalarField.from_dict(doc)
    except CorpuscleError as exc:
        raise ValueError(str(exc)) from exc
    if field.degree > max_degree:
        raise ValueError(f"{what} has spatial degree {field.degree}, at most {max_degree} is supported")
    return field


class PotentialsConfig(BaseModel):
    """phi and the three components of A as polynomial field documents."""

    phi: PolynomialDoc = Field(default_factory=lambda: {"terms": []})
    A: List[PolynomialDoc] = Field(default_factory=lambda: [{"terms": []}] * 3)

    @field_validator("phi")
    @classmethod
    def check_phi(cls, doc: PolynomialDoc) -> PolynomialDoc:
        _scalar(doc, MAX_VECTOR_DEGREE, "phi")
        return doc

    @field_validator("A")
    @classmethod
    def check_A(cls, docs: List[PolynomialDoc]) -> List[PolynomialDoc]:
        if len(docs) != 3:
            raise ValueError(f"A needs exactly 3 component documents, got {len(docs)}")
        for axis, doc in enumerate(docs):
            _scalar(doc, MAX_VECTOR_DEGREE, f"A[{axis}]")
        return docs

    def build(self, c: float) -> AnalyticPotentials:
        phi = PolyScalarField.from_dict(self.phi)
        A = PolyVectorField.from_list(self.A)
        return AnalyticPotentials(phi, A, c)


class ProfileConfig(BaseModel):
    name: Literal["gaussian", "sech", "algebraic"] = "gaussian"
    params: dict[str, float] = Field(default_factory=dict)
    # Eigenvalue; the profile is asserted to solve the shifted ground-state equation
    lam: float = 0.0

    @model_validator(mode="after")
    def check_params(self) -> "ProfileConfig":
        if self.name == "algebraic" and self.params.get("p", 0.0) <= 0:
            raise ValueError("algebraic profile needs a positive exponent params.p")
        return self


class ScheduleConfig(BaseModel):
    """a_n = a0 n^-alpha and R_n = R0 n^-beta over the listed indices."""

    a0: PositiveFloat = 0.02
    R0: PositiveFloat = 0.5
    alpha: PositiveFloat = 5.0
    beta: PositiveFloat = 1.0
    n_values: List[PositiveInt] = Field(default_factory=lambda: [1, 2, 3, 4, 5, 6])

    @model_validator(mode="after")
    def check_schedule(self) -> "ScheduleConfig":
        try:
            self.build()
        except ConfigError as exc:
            raise ValueError(str(exc)) from exc
        return self

    def build(self) -> ConcentrationSchedule:
        return ConcentrationSchedule.power_law(self.a0, self.R0, self.alpha, self.beta, self.n_values)


class InitialState(BaseModel):
    r0: Vector3 = (0.0, 0.0, 0.0)
    v0: Vector3 = (0.0, 0.0, 0.0)
    t0: float = 0.0
    t1: float = 1.0
    step: PositiveFloat = 1e-3

    @model_validator(mode="after")
    def check_span(self) -> "InitialState":
        if not self.t1 > self.t0:
            raise ValueError(f"t1 must exceed t0, got [{self.t0}, {self.t1}]")
        return self


class SamplingConfig(BaseModel):
    """Random (t, x) points for the pointwise residual commands."""

    a: PositiveFloat = 0.1
    # per sample time
    points: PositiveInt = 32
    radius: PositiveFloat = 3.0  # in units of a
    times: PositiveInt = 5


class OutputConfig(BaseModel):
    directory: str = "out"
    summary: bool = True


class StudyConfig(BaseModel):
    constants: PhysicalConstants = Field(default_factory=PhysicalConstants)
    potentials: PotentialsConfig = Field(default_factory=PotentialsConfig)
    P3: PolynomialDoc | None = None
    profile: ProfileConfig = Field(default_factory=ProfileConfig)
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    initial_state: InitialState = Field(default_factory=InitialState)
    time_samples: PositiveInt = 11
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    seed: NonNegativeInt = 0

    model_config = ConfigDict(extra="forbid")

    @field_validator("P3")
    @classmethod
    def check_P3(cls, doc: PolynomialDoc | None) -> PolynomialDoc | None:
        if doc is None:
            return None
        field = _scalar(doc, MAX_SCALAR_DEGREE, "P3")
        if any(sum(deg) not in (3, 4) for deg in field.terms):
            raise ValueError("P3 may contain only monomials of degree 3 (and optionally 4)")
        if any(field.origin) or any(field.velocity):
            raise ValueError("P3 is trajectory-relative and must have zero origin and velocity")
        return doc

    @field_validator("seed")
    @classmethod
    def check_seed(cls, seed: int) -> int:
        if seed >= SEED_LIMIT:
            raise ValueError("seed must fit in 64 unsigned bits")
        return seed

    @field_validator("time_samples")
    @classmethod
    def check_time_samples(cls, samples: int) -> int:
        if samples < 3 or samples % 2 == 0:
            raise ValueError(f"time_samples must be odd and >= 3, got {samples}")
        return samples

    def build_potentials(self) -> AnalyticPotentials:
        return self.potentials.build(self.constants.c)

    def build_P3(self) -> PolyScalarField | None:
        return PolyScalarField.from_dict(self.P3) if self.P3 is not None else None

    @classmethod
    def from_document(cls, doc: Any, source: str = "<document>") -> "StudyConfig":
        try:
            return cls.model_validate(doc)
        except ValidationError as exc:
            raise ConfigError({
                "message": f"Invalid study config {source}",
                "errors": [
                    {"loc": ".".join(str(part) for part in err["loc"]), "msg": err["msg"]}
                    for err in exc.errors()
                ],
            }) from exc

    @classmethod
    def load(cls, path: str | Path) -> "StudyConfig":
        """Read a study config from JSON, or YAML when the suffix says so."""
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"Cannot read config {path}: {exc}") from exc
        try:
            if path.suffix.lower() in (".yaml", ".yml"):
                doc = yaml.safe_load(text)
            else:
                doc = json.loads(text)
        except (json.JSONDecodeError, yaml.YAMLError) as exc:
            raise ConfigError(f"Config {path} is not well-formed: {exc}") from exc
        return cls.from_document(doc, str(path))
