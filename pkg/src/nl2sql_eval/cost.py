"""Dollar-cost estimation from token usage.

Prompt tokens price at a blend of cache-hit and cache-miss rates (default
half each); completion tokens price at the completion rate. All arithmetic
is exact over rationals; prices come from a user-supplied pricing file,
never from hardcoded provider numbers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

__all__ = [
    "PricingError",
    "PricingModel",
    "PricingFile",
    "load_pricing",
    "estimate_cost",
    "split_token_total",
]


class PricingError(ValueError):
    """Bad pricing input: negative price, malformed file, unknown model."""


def _to_fraction(value: Any, name: str) -> Fraction:
    try:
        if isinstance(value, bool):
            raise TypeError
        if isinstance(value, int):
            return Fraction(value)
        if isinstance(value, float):
            return Fraction(str(value))  # repr round-trips the intended decimal
        if isinstance(value, str):
            return Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError):
        pass
    raise PricingError(f"{name}: cannot interpret {value!r} as an exact number")


@dataclass(frozen=True)
class PricingModel:
    """Per-token prices for one model, in the pricing file's currency."""

    name: str
    price_prompt_cache_hit: Fraction
    price_prompt_cache_miss: Fraction
    price_completion: Fraction
    cache_hit_fraction: Fraction = Fraction(1, 2)

    def __post_init__(self) -> None:
        for field_name in ("price_prompt_cache_hit", "price_prompt_cache_miss", "price_completion"):
            if getattr(self, field_name) < 0:
                raise PricingError(f"{self.name}: {field_name} must be non-negative")
        if not 0 <= self.cache_hit_fraction <= 1:
            raise PricingError(f"{self.name}: cache_hit_fraction must be in [0, 1]")


@dataclass(frozen=True)
class PricingFile:
    currency: str
    models: Mapping[str, PricingModel]

    def model(self, name: str) -> PricingModel:
        if name not in self.models:
            raise PricingError(
                f"model {name!r} not in pricing file (have: {sorted(self.models)})"
            )
        return self.models[name]


def load_pricing(path: str | Path) -> PricingFile:
    """Read a pricing file: currency plus a list of per-model price entries."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise PricingError(f"cannot read pricing file {path}: {exc}") from exc
    if not isinstance(doc, dict) or "models" not in doc:
        raise PricingError(f"pricing file {path} must be an object with a 'models' list")
    models: dict[str, PricingModel] = {}
    for entry in doc["models"]:
        name = entry.get("name")
        if not name:
            raise PricingError(f"pricing file {path}: model entry missing name")
        models[name] = PricingModel(
            name=name,
            price_prompt_cache_hit=_to_fraction(entry.get("prompt_cache_hit"), f"{name}.prompt_cache_hit"),
            price_prompt_cache_miss=_to_fraction(entry.get("prompt_cache_miss"), f"{name}.prompt_cache_miss"),
            price_completion=_to_fraction(entry.get("completion"), f"{name}.completion"),
            cache_hit_fraction=_to_fraction(entry.get("cache_hit_fraction", "1/2"), f"{name}.cache_hit_fraction"),
        )
    return PricingFile(currency=str(doc.get("currency", "USD")), models=models)


def estimate_cost(
    prompt_tokens: int | Fraction,
    completion_tokens: int | Fraction,
    pricing: PricingModel,
) -> Fraction:
    """Blended prompt price times prompt tokens, plus completion cost.

    cost = prompt * (h * p_hit + (1 - h) * p_miss) + completion * p_out,
    where h is the configured cache-hit fraction.
    """
    if prompt_tokens < 0 or completion_tokens < 0:
        raise PricingError("token counts must be non-negative")
    h = pricing.cache_hit_fraction
    blended = h * pricing.price_prompt_cache_hit + (1 - h) * pricing.price_prompt_cache_miss
    return prompt_tokens * blended + completion_tokens * pricing.price_completion


def split_token_total(
    total_tokens: int, prompt_share: Fraction = Fraction(4, 5)
) -> tuple[Fraction, Fraction]:
    """Fallback prompt/completion split for records carrying only a total.

    Costs computed through this path are flagged "estimated-split" upstream.
    """
    if total_tokens < 0:
        raise PricingError("token total must be non-negative")
    if not 0 <= prompt_share <= 1:
        raise PricingError("prompt_share must be in [0, 1]")
    prompt = total_tokens * prompt_share
    return prompt, total_tokens - prompt
