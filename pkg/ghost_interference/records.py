from dataclasses import dataclass, asdict, field
from typing import Any, Dict, List
import json, math

from .duality import PATTERN_SOURCES, DualitySample

RECORD_VERSION = "0.1"

REQUIRED_KEYS = {"D", "V2", "bound_lhs", "margin", "pattern_source", "meta"}

@dataclass
class DualityRecord:
    D: float
    V2: float
    bound_lhs: float
    margin: float
    pattern_source: str      # analytic | pattern | oracle
    meta: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_sample(cls, sample: DualitySample, **meta) -> "DualityRecord":
        r = sample.report
        meta.setdefault("overlaps", [round(g, 15) for g in sample.detector.overlaps()])
        meta.setdefault("two_slit", r.two_slit)
        if sample.sides is not None:
            meta.setdefault("V2_plus", sample.sides[0])
            meta.setdefault("V2_minus", sample.sides[1])
        return cls(r.distinguishability, r.visibility, r.bound_lhs, r.margin, sample.pattern_source, meta)

    def to_json(self) -> str:
        rec = asdict(self)
        rec["meta"]["record_version"] = RECORD_VERSION
        return json.dumps(rec, ensure_ascii=False, sort_keys=True)

def _number(obj, key):
    v = obj[key]
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)

def validate_line(obj, line_no):
    if not isinstance(obj, dict):
        return f"Line {line_no}: record is not an object"
    missing = REQUIRED_KEYS - set(obj.keys())
    if missing:
        return f"Line {line_no}: missing keys {sorted(missing)}"
    for key in ("D", "V2", "bound_lhs", "margin"):
        if not _number(obj, key):
            return f"Line {line_no}: {key} is not a finite number"
    for key in ("D", "V2"):
        if not -1e-9 <= obj[key] <= 1 + 1e-9:
            return f"Line {line_no}: {key}={obj[key]} outside [0, 1]"
    if abs(obj["margin"] - (1.0 - obj["bound_lhs"])) > 1e-12:
        return f"Line {line_no}: margin != 1 - bound_lhs"
    if obj["pattern_source"] not in PATTERN_SOURCES:
        return f"Line {line_no}: unknown pattern_source {obj['pattern_source']!r}"
    if not isinstance(obj["meta"], dict):
        return f"Line {line_no}: meta is not an object"
    return None

def validate_file(path: str) -> List[str]:
    errors = []
    with open(path, "r", encoding="utf-8") as f:
        for i, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except Exception as e:
                errors.append(f"Line {i}: JSON parse error {e}")
                continue
            msg = validate_line(obj, i)
            if msg:
                errors.append(msg)
    return errors
