"""Prompt construction for the three-stage rule-parsing pipeline.

Stage 1 extracts a draft scenario representation from a traffic rule, stage 2
asks the model to check and revise its own draft, stage 3 aligns stray tokens
with the element catalog one at a time. Templates are deterministic: same
inputs, same bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .catalog import SUBCOMPONENTS, CatalogError, ElementCatalog
from .dsl import ScenarioRep, serialize_scenario

ROLE_SETTING = (
    "You are a test expert for autonomous driving systems. Your task is to "
    "generate specific test scenario representations from given traffic rules."
)

# shown to the model before the element lists; describes the document format
DSL_DEFINITION = """\
A test scenario representation is a plain-text document with four top-level
sections, written with 2-space indentation and lowercase element tokens:

environment:
  weather: <weather element or none>
  time: <time element or none>
road_network:
  road_type: <road type element or none>
  road_marker: <road marker element or none>
  traffic_signs: [<traffic sign elements, comma separated, or empty>]
actors:
  ego:
    type: <actor type element>
    behavior: <behavior element>
    position:
      reference: <position reference element or none>
      relation: <position relation element or none>
  npc_actors: <[] if there are none, otherwise a dashed list>
    - type: <actor type element>
      behavior: <behavior element>
      position:
        reference: <position reference element, may be ego vehicle>
        relation: <position relation element>
oracle:
  longitudinal: [<longitudinal oracle elements for the ego vehicle>]
  lateral: [<lateral oracle elements for the ego vehicle>]

Use the token none for anything the traffic rule does not constrain. Lists
use the inline [a, b] form and may be empty ([]). Output nothing except the
document."""

VALIDATION_QUESTION = (
    "Are the elements in the generated scenario description consistent with "
    "the input traffic rule? If not, correct the inconsistencies and output "
    "the revised scenario representation."
)

VALIDATION_OUTPUT_INSTRUCTION = (
    "Output the full revised scenario representation document."
)

REASK_INSTRUCTION = "Output only the scenario representation document."


@dataclass(frozen=True)
class PromptMessage:
    role: str  # system | user | assistant
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"bad message role: {self.role!r}")
        if not self.content:
            raise ValueError("empty message content")


def render_element_lists(catalog: ElementCatalog) -> str:
    """One block per subcomponent, catalog order preserved."""
    parts = []
    for sub in SUBCOMPONENTS:
        tokens = catalog.tokens(sub)
        body = "\n".join(f"- {t}" for t in tokens) if tokens else "(none)"
        parts.append(f"{sub}:\n{body}")
    return "\n\n".join(parts)


def build_extraction_prompt(
    rule: str, catalog: ElementCatalog, example: tuple[str, ScenarioRep]
) -> list[PromptMessage]:
    example_rule, example_rep = example
    user = (
        "Below is the definition of a domain-specific language to represent "
        "test scenarios for autonomous driving systems:\n"
        f"{DSL_DEFINITION}\n\n"
        "Below are the lists of commonly used elements for each subcomponent. "
        "When creating the scenario representation, consider the following "
        "elements first for each subcomponent. If no element can describe the "
        "close meaning, create a new element by yourself.\n"
        f"{render_element_lists(catalog)}\n\n"
        "Below is an example of an input traffic rule and the corresponding "
        "scenario representation:\n"
        f"Traffic rule: {example_rule}\n"
        "Scenario representation:\n"
        f"{serialize_scenario(example_rep)}\n"
        "Based on the above descriptions and examples, convert the following "
        "traffic rule to corresponding scenario representation:\n"
        f"{rule}"
    )
    return [
        PromptMessage("system", ROLE_SETTING),
        PromptMessage("user", user),
    ]


def build_validation_prompt(draft: ScenarioRep) -> list[PromptMessage]:
    """Follow-up question about the draft already present in the transcript.

    The draft argument is only checked for well-formedness (it must serialize
    and re-parse); the text sent does not repeat it.
    """
    from .dsl import parse_scenario_text  # local import, avoids cycle at module load

    parse_scenario_text(serialize_scenario(draft))
    return [
        PromptMessage("user", f"{VALIDATION_QUESTION} {VALIDATION_OUTPUT_INSTRUCTION}")
    ]


def build_alignment_prompt(
    token: str, subcomponent: str, catalog: ElementCatalog
) -> list[PromptMessage]:
    if subcomponent not in SUBCOMPONENTS:
        raise CatalogError(f"unknown subcomponent: {subcomponent!r}")
    tokens = catalog.tokens(subcomponent)
    listing = "\n".join(f"- {t}" for t in tokens) if tokens else "(none)"
    content = (
        f"For each element {{{token}}} of the subcomponent {{{subcomponent}}}, "
        "find out an element with the closest meaning to your output element "
        "from the following element list. If all elements in the element list "
        "do not express a similar meaning as your output element, keep your "
        "output element as the answer.\n"
        f"{listing}"
    )
    return [PromptMessage("user", content)]
