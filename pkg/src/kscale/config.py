"""Run configuration: defaults, JSON config file, flag overrides.

Precedence is flags over config file over defaults. The resolved
configuration has a stable hash that every output embeds, together with
the seed, so a run can be tied back to exactly what produced it.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ValidationError
from .ingest import sample_path
from .units import YearConvention

_CONVENTIONS = {"civil365": YearConvention.CIVIL_365, "julian": YearConvention.JULIAN}


@dataclass
class RunConfig:
    """Resolved inputs and knobs for one CLI invocation."""

    panel: str = ""
    scenario: str = ""
    ratio: str = ""
    out: str = "out"
    seed: int = 0
    year_convention: str = "civil365"
    trees: int = 500
    mtry: int | None = None
    min_leaf: int = 2
    max_depth: int | None = None
    holdout: float = 0.2
    p_max: int = 3
    d_max: int = 2
    q_max: int = 3
    table_years: list[int] = field(default_factory=lambda: list(range(2025, 2061, 5)))
    fusion_pivot_year: int = 2060
    fusion_horizon_year: int = 2100
    fusion_growth: float = 0.01417
    baseline_growth: float = 0.00346
    jobs: int = 1

    def __post_init__(self):
        if not self.panel:
            self.panel = str(sample_path("panel.csv"))
        if not self.scenario:
            self.scenario = str(sample_path("scenario.csv"))
        if not self.ratio:
            self.ratio = str(sample_path("ratio.csv"))
        if self.year_convention not in _CONVENTIONS:
            raise ValidationError(f"year convention must be one of "
                                  f"{sorted(_CONVENTIONS)}, got {self.year_convention!r}")

    @property
    def convention(self) -> YearConvention:
        return _CONVENTIONS[self.year_convention]

    def config_hash(self) -> str:
        """Hash of the result-defining configuration.

        Where outputs go (``out``) and how many threads build trees
        (``jobs``) cannot change any computed value, so they are excluded:
        runs that must produce identical results hash identically.
        """
        doc = asdict(self)
        doc.pop("out")
        doc.pop("jobs")
        canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def load_config(config_path: str | None, overrides: dict) -> RunConfig:
    """Merge defaults, an optional JSON config file, and explicit flags."""
    values: dict = {}
    if config_path:
        path = Path(config_path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ValidationError(f"{path}: cannot read config ({exc})") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise ValidationError(f"{path}: config must be a JSON object")
        known = set(RunConfig.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ValidationError(f"{path}: unknown config key(s): {sorted(unknown)}")
        values.update(doc)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)
