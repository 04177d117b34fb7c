"""Prompt template banks for textual class descriptors.

A template is a string with exactly one "[c]" placeholder that gets
replaced by the class name verbatim. Three banks ship with the package:

* ``baseline`` - the single generic photo prompt.
* ``multiple`` - 44 templates: the three retail-specific ones plus 41
  photo-style entries adapted from the public CLIP zero-shot template
  collection (placeholder swapped, wording kept).
* ``selected`` - the short hand-picked ensemble used as the default
  "best prompts" configuration.

Custom banks load from JSON files of the form {"name": ..., "templates":
[...]}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import BadTemplateError
from .store import ClassCatalog

PLACEHOLDER = "[c]"

BASELINE_TEMPLATE = "A photo of a [c]"

RETAIL_TEMPLATES = (
    BASELINE_TEMPLATE,
    "A cropped photo of a [c]",
    "A centered photo of a [c] consumer product",
)

_CLIP_STYLE_TEMPLATES = (
    "a bad photo of a [c].",
    "a photo of many [c].",
    "a photo of the hard to see [c].",
    "a low resolution photo of the [c].",
    "a bad photo of the [c].",
    "a cropped photo of the [c].",
    "a bright photo of a [c].",
    "a photo of a clean [c].",
    "a photo of a dirty [c].",
    "a dark photo of the [c].",
    "a photo of my [c].",
    "a photo of the cool [c].",
    "a close-up photo of a [c].",
    "a black and white photo of the [c].",
    "a pixelated photo of the [c].",
    "a bright photo of the [c].",
    "a photo of the dirty [c].",
    "a jpeg corrupted photo of a [c].",
    "a blurry photo of the [c].",
    "a photo of the [c].",
    "a good photo of the [c].",
    "a photo of one [c].",
    "a close-up photo of the [c].",
    "a low resolution photo of a [c].",
    "a photo of the clean [c].",
    "a photo of a large [c].",
    "a photo of a nice [c].",
    "a photo of a weird [c].",
    "a blurry photo of a [c].",
    "a pixelated photo of a [c].",
    "itap of the [c].",
    "a jpeg corrupted photo of the [c].",
    "a good photo of a [c].",
    "a photo of the nice [c].",
    "a photo of the small [c].",
    "a photo of the weird [c].",
    "a photo of the large [c].",
    "a black and white photo of a [c].",
    "a dark photo of a [c].",
    "itap of a [c].",
    "a photo of a cool [c].",
)

MULTIPLE_TEMPLATES = RETAIL_TEMPLATES + _CLIP_STYLE_TEMPLATES

SELECTED_TEMPLATES = RETAIL_TEMPLATES

BANK_NAMES = ("baseline", "multiple", "selected", "custom")


def check_template(pattern: str) -> str:
    if pattern.count(PLACEHOLDER) != 1:
        raise BadTemplateError(
            f"template must contain exactly one {PLACEHOLDER!r} placeholder: {pattern!r}"
        )
    return pattern


@dataclass(frozen=True)
class TemplateBank:
    name: str
    templates: tuple[str, ...]

    def __post_init__(self):
        if self.name not in BANK_NAMES:
            raise BadTemplateError(f"bank name must be one of {BANK_NAMES}, got {self.name!r}")
        if not self.templates:
            raise BadTemplateError("a template bank cannot be empty")
        for t in self.templates:
            check_template(t)
        if self.name == "baseline" and len(self.templates) != 1:
            raise BadTemplateError("the baseline bank holds exactly one template")
        if self.name == "multiple" and len(self.templates) != 44:
            raise BadTemplateError(
                f"the multiple bank holds exactly 44 templates, got {len(self.templates)}"
            )

    def __len__(self) -> int:
        return len(self.templates)


def baseline_bank() -> TemplateBank:
    return TemplateBank("baseline", (BASELINE_TEMPLATE,))


def multiple_bank() -> TemplateBank:
    return TemplateBank("multiple", MULTIPLE_TEMPLATES)


def selected_bank() -> TemplateBank:
    return TemplateBank("selected", SELECTED_TEMPLATES)


def bank_by_name(name: str) -> TemplateBank:
    builders = {"baseline": baseline_bank, "multiple": multiple_bank, "selected": selected_bank}
    if name not in builders:
        raise BadTemplateError(f"unknown built-in bank {name!r}")
    return builders[name]()


def load_bank(path) -> TemplateBank:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return TemplateBank(str(obj["name"]), tuple(str(t) for t in obj["templates"]))


def save_bank(bank: TemplateBank, path) -> None:
    Path(path).write_text(
        json.dumps({"name": bank.name, "templates": list(bank.templates)}, indent=2) + "\n",
        encoding="utf-8",
    )


def expand_templates(bank: TemplateBank, catalog: ClassCatalog) -> dict[int, list[str]]:
    """Per class (catalog order): every template with "[c]" replaced verbatim."""
    return {
        class_id: [t.replace(PLACEHOLDER, name) for t in bank.templates]
        for class_id, name in enumerate(catalog.names)
    }
