import math
from fractions import Fraction
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from gibbs_occ.weights import parse_number

JsonNumber = Union[int, float, str, None]


def json_number(value: Any) -> JsonNumber:
    """Rationals as "p/q" strings, floats unchanged, infinities as null."""
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, int):
        return value
    if isinstance(value, Fraction):
        return str(value) if value.denominator != 1 else int(value)
    value = float(value)
    if not math.isfinite(value):
        return None
    return value


def parse_json_number(value: JsonNumber) -> Union[Fraction, float, None]:
    if value is None:
        return None
    if isinstance(value, str):
        return parse_number(value)
    if isinstance(value, int):
        return Fraction(value)
    return float(value)


class RunConfig(BaseModel):
    """Arguments shared by every command, checked for consistency."""
    family: str = Field(..., description="Family identifier, e.g. logseries or negbin:alpha=1/2")
    star: bool = Field(default=False, description="Star-limit command (gamma) rather than finite n (theta)")
    theta: Optional[str] = Field(default=None, description="Scale parameter of finite-n laws")
    gamma: Optional[str] = Field(default=None, description="Diversity parameter of star-limit laws")
    n: Optional[int] = Field(default=None, ge=1, description="Number of boxes (species)")
    k: Optional[int] = Field(default=None, ge=0, description="Sample size")
    mode: Literal["log", "exact"] = "log"
    format: Literal["csv", "json"] = "json"
    seed: int = 0
    runs: int = Field(default=10_000, ge=1)

    @model_validator(mode="after")
    def check_parameters(self) -> "RunConfig":
        if self.star and self.theta is not None:
            raise ValueError("theta is not used by star-limit commands; give gamma")
        if not self.star and self.gamma is not None:
            raise ValueError("gamma is only used by star-limit commands; give theta")
        return self

    @property
    def exact(self) -> bool:
        return self.mode == "exact"

    def number(self, text: Optional[str]) -> Union[Fraction, float, None]:
        if text is None:
            return None
        value = parse_number(text)
        return value if self.exact else float(value)


class PmfRow(BaseModel):
    value: Union[int, List[int]]
    probability: JsonNumber


class PmfTable(BaseModel):
    """A probability table as emitted by ``pmf``."""
    kind: str
    family: str
    parameters: Dict[str, JsonNumber] = Field(default_factory=dict)
    exact: bool = False
    rows: List[PmfRow]

    @field_validator("rows")
    @classmethod
    def check_rows(cls, v: List[PmfRow]) -> List[PmfRow]:
        for row in v:
            p = parse_json_number(row.probability)
            if p is None or p < 0:
                raise ValueError(f"invalid probability {row.probability!r}")
        return v

    def total(self) -> Union[Fraction, float]:
        values = [parse_json_number(row.probability) for row in self.rows]
        if self.exact:
            return sum(values, Fraction(0))
        return math.fsum(float(v) for v in values)

    def check_normalized(self, tolerance: float = 1e-10) -> bool:
        total = self.total()
        if self.exact:
            return total == 1
        return abs(total - 1.0) <= tolerance


class MomentOut(BaseModel):
    kind: str
    family: str
    parameters: Dict[str, Union[JsonNumber, List[int]]] = Field(default_factory=dict)
    value: JsonNumber
    exact: bool = False


class EstimateOut(BaseModel):
    """An estimate; sentinels carry a null value and a boundary tag."""
    target: Literal["n", "gamma"]
    method: str
    value: JsonNumber
    boundary: Optional[str] = None
    residual: Optional[float] = None
    diagnostics: Dict[str, Any] = Field(default_factory=dict)


class BiasedEstimateOut(BaseModel):
    statistic: str
    estimate: float
    se: float
    ess: float
    unweighted: float
    truncation_bound: float
    runs: int
    cutoff: float
    finite_activity: bool = False
    target: Optional[float] = None


class SubordinatorOut(BaseModel):
    gamma: float
    cutoff: float
    count: int
    total: float
    truncation_bound: float
    finite_activity: bool
    jumps: List[float]


class ErrorOut(BaseModel):
    error: str
    message: str
    details: Optional[Dict[str, str]] = None


class PmfRequest(BaseModel):
    """Request body of /api/pmf/{kind}."""
    family: str = Field(..., description="Family identifier")
    theta: Optional[str] = Field(default=None, description="Scale parameter (finite-n laws)")
    gamma: Optional[str] = Field(default=None, description="Diversity parameter (star-limit laws)")
    n: Optional[int] = Field(default=None, ge=1)
    k: int = Field(..., ge=0)
    m: Optional[int] = Field(default=None, ge=1, description="Partial-sum length")
    counts: Optional[List[int]] = Field(default=None, description="Occupancy vector for joint laws")
    aff: Optional[List[int]] = Field(default=None, description="Frequency-of-frequencies vector")
    exact: bool = False


class EstimateRequest(BaseModel):
    """Request body of /api/estimate/{target}."""
    family: str = Field(..., description="Family identifier")
    theta: Optional[str] = Field(default=None, description="Known scale parameter when estimating n")
    k: int = Field(..., ge=1, description="Sample size")
    P: int = Field(..., ge=1, description="Observed number of distinct species")
    method: Literal["mle", "ratio", "approx"] = "mle"
    exact: bool = False
