"""JSON scenario files and deterministic JSON output."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import InvalidParameter
from .markov import GeneratorConstants
from .model import DEFAULT_DELTA, Configuration, CostFunction
from .spectral import AttackDefenseStructure, generate_structure, load_structure

SCENARIO_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class StructureEntry(_Strict):
    """Exactly one of ``lambda1``, ``edge_list`` or ``generator``."""

    lambda1: Optional[float] = Field(default=None, ge=0)
    edge_list: Optional[str] = None
    generator: Optional[Literal["complete", "star", "path", "erdos_renyi"]] = None
    params: dict = Field(default_factory=dict)
    seed: Optional[int] = None
    directed: bool = False

    @model_validator(mode="after")
    def _one_source(self):
        given = [x is not None for x in (self.lambda1, self.edge_list, self.generator)]
        if sum(given) != 1:
            raise ValueError("give exactly one of lambda1, edge_list, generator")
        return self


class ConfigEntry(_Strict):
    id: int
    beta: float = Field(gt=0, le=1)
    gamma: float = Field(gt=0, le=1)
    structure: StructureEntry


class CostEntry(_Strict):
    kind: Literal["affine", "quadratic_shifted", "sqrt_shifted", "table"]
    slope: Optional[float] = None
    intercept: Optional[float] = None
    scale: Optional[float] = None
    shift: Optional[float] = None
    points: Optional[list[tuple[float, float]]] = None

    def build(self) -> CostFunction:
        need = {"affine": ("slope", "intercept"), "table": ("points",)}.get(self.kind, ("scale", "shift"))
        missing = [k for k in need if getattr(self, k) is None]
        if missing:
            raise InvalidParameter(f"cost.{missing[0]}: required for kind '{self.kind}'")
        if self.kind == "table":
            return CostFunction.table(self.points)
        return CostFunction(self.kind, tuple(getattr(self, k) for k in need))


class ConstantsEntry(_Strict):
    a: float = 0.8
    b: float = 1.5
    c: float = 2.4


class SimulationSettings(_Strict):
    dt: Optional[float] = Field(default=None, gt=0)
    horizon: float = Field(default=100.0, ge=0)
    seed: int = 0
    initial_infection: float = Field(default=0.5, ge=0, le=1)
    resolution: float = Field(default=1.0, gt=0)
    eps: float = Field(default=1e-4, gt=0)
    window: Optional[float] = Field(default=None, gt=0)
    record_every: int = Field(default=10, ge=1)


class Scenario(_Strict):
    version: Literal[1]
    mode: Literal["params", "structures"] = "params"
    delta: float = Field(default=DEFAULT_DELTA, ge=0)
    pi1: Optional[float] = Field(default=None, ge=0, le=1)
    cost: Optional[CostEntry] = None
    shape: Literal["convex", "concave", "none"] = "none"
    constants: ConstantsEntry = Field(default_factory=ConstantsEntry)
    configurations: list[ConfigEntry] = Field(min_length=1)
    simulation: SimulationSettings = Field(default_factory=SimulationSettings)

    @model_validator(mode="after")
    def _unique_ids(self):
        ids = [c.id for c in self.configurations]
        if len(set(ids)) != len(ids):
            raise ValueError("configuration ids must be unique")
        return self

    # filled in by load_scenario
    _base: Path = Path(".")

    def generator_constants(self) -> GeneratorConstants:
        k = self.constants
        return GeneratorConstants(k.a, k.b, k.c, self.delta, 1)

    def cost_function(self) -> CostFunction | None:
        return None if self.cost is None else self.cost.build()

    def build_configs(self) -> list[Configuration]:
        cache: dict = {}
        out = []
        for k, c in enumerate(self.configurations):
            s = c.structure
            if s.lambda1 is not None:
                source = float(s.lambda1)
            else:
                # Identical recipes share one structure object (and its cached lambda1).
                key = s.model_dump_json()
                if key not in cache:
                    cache[key] = self._build_structure(s, f"configurations.{k}.structure")
                source = cache[key]
            out.append(Configuration(c.id, c.beta, c.gamma, source))
        return out

    def _build_structure(self, s: StructureEntry, where: str) -> AttackDefenseStructure:
        if s.edge_list is not None:
            path = (self._base / s.edge_list)
            if not path.is_file():
                raise InvalidParameter(f"{where}.edge_list: file not found: {path}")
            return load_structure(path.read_text(), directed=s.directed)
        try:
            return generate_structure(s.generator, s.params, seed=s.seed)
        except InvalidParameter as exc:
            raise InvalidParameter(f"{where}: {exc}") from None


def _format_pydantic(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def parse_scenario(data: dict, base: Path | str = ".") -> Scenario:
    try:
        sc = Scenario.model_validate(data)
    except ValidationError as exc:
        raise InvalidParameter(_format_pydantic(exc)) from None
    sc._base = Path(base)
    return sc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise InvalidParameter(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InvalidParameter(f"{path}: invalid JSON ({exc})") from None
    return parse_scenario(data, path.parent)


# -- deterministic JSON ---------------------------------------------------------

def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int) and not isinstance(obj, bool):
        return str(obj)
    if isinstance(obj, float) or hasattr(obj, "dtype"):
        x = float(obj)
        if x.is_integer() and hasattr(obj, "dtype") and obj.dtype.kind in "iu":
            return str(int(x))
        if not math.isfinite(x):
            return json.dumps(str(x))
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"
