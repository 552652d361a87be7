"""Three-stage parsing of a natural-language traffic rule into a scenario
representation: draft extraction, self-check revision, then token alignment
against the element catalog.

Every model exchange is appended to one running transcript, which makes the
whole session replayable from recorded fixtures and hashable for audit.
"""

from __future__ import annotations

import re
import textwrap
import warnings
from dataclasses import dataclass

from .backends import ChatBackend
from .catalog import ElementCatalog, normalize_token
from .dsl import (
    Address,
    DslError,
    EmptyOracleWarning,
    ScenarioRep,
    parse_scenario_text,
    replace_token,
    serialize_scenario,
    validate_scenario,
)
from .prompts import (
    REASK_INSTRUCTION,
    PromptMessage,
    build_alignment_prompt,
    build_extraction_prompt,
    build_validation_prompt,
)


class ExtractionUnparseable(Exception):
    """No parseable document came back, even after re-asks."""

    def __init__(self, rule: str, attempts: int):
        self.rule = rule
        self.attempts = attempts
        super().__init__(
            f"no parseable scenario document after {attempts} attempt(s) "
            f"for rule: {rule[:80]!r}"
        )


_FENCE = re.compile(r"```[^\n]*\n(.*?)```", re.S)


def _try_parse(block: str) -> ScenarioRep | None:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyOracleWarning)
        try:
            return parse_scenario_text(block)
        except DslError:
            return None


def _candidate_blocks(text: str):
    for m in _FENCE.finditer(text):
        yield m.group(1)
    lines = text.splitlines()
    for i, ln in enumerate(lines):
        if ln.strip().startswith("environment:"):
            tail = lines[i:]
            yield "\n".join(tail)
            # variant truncated at the first prose-looking line, for responses
            # that explain themselves after the document
            for j in range(1, len(tail)):
                s = tail[j].strip()
                looks_like_doc = (
                    not s
                    or tail[j].startswith(" ")
                    or s.startswith(("-", "#"))
                    or ":" in s
                )
                if not looks_like_doc:
                    yield "\n".join(tail[:j])
                    break
    yield text


def extract_document(response: str) -> str | None:
    """Pull the scenario document out of a chat response.

    Tries fenced blocks, then everything from an `environment:` line on, then
    the raw text. Among parseable candidates the longest wins; returns the
    canonical serialization of the parsed document, or None.
    """
    best: tuple[int, str] | None = None
    for raw in _candidate_blocks(response):
        block = textwrap.dedent(raw)
        rep = _try_parse(block)
        if rep is not None and (best is None or len(block) > best[0]):
            best = (len(block), serialize_scenario(rep))
    return best[1] if best else None


# ---------------------------------------------------------------------------
# alignment

def _levenshtein(a: str, b: str) -> int:
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def edit_similarity(a: str, b: str) -> float:
    ka, kb = normalize_token(a), normalize_token(b)
    if not ka and not kb:
        return 1.0
    return 1.0 - _levenshtein(ka, kb) / max(len(ka), len(kb))


def align_token_locally(
    token: str, candidates: tuple[str, ...], threshold: float = 0.75
) -> str:
    """Offline fallback for stage 3: nearest catalog token by edit similarity.

    Returns the best candidate whose similarity reaches the threshold,
    otherwise the token unchanged. Equal scores pick the earlier candidate.
    """
    best: tuple[float, str] | None = None
    for cand in candidates:
        score = edit_similarity(token, cand)
        if score >= threshold and (best is None or score > best[0]):
            best = (score, cand)
    return best[1] if best else token


_WORD = re.compile(r"[a-z0-9]+")


def interpret_alignment_response(
    response: str, subcomponent: str, catalog: ElementCatalog, original: str
) -> str:
    """Map a free-text alignment answer onto a catalog token.

    Preference order: the whole answer names a catalog token; the answer
    contains exactly one as a phrase (longest, then catalog order); otherwise
    the original token is kept, which is also what an explicit "keep your
    output element" style answer falls through to.
    """
    cleaned = response.strip().strip("`'\".").strip()
    tokens = catalog.tokens(subcomponent)
    norm_tokens = [normalize_token(t) for t in tokens]
    if normalize_token(cleaned) == normalize_token(original):
        return original
    if normalize_token(cleaned) in norm_tokens:
        return tokens[norm_tokens.index(normalize_token(cleaned))]
    words = _WORD.findall(response.lower())
    text = " " + " ".join(words) + " "
    hits = [
        (len(nt), -i, tokens[i])
        for i, nt in enumerate(norm_tokens)
        if f" {nt} " in text
    ]
    if hits:
        hits.sort(reverse=True)
        return hits[0][2]
    return original


# ---------------------------------------------------------------------------
# the pipeline

@dataclass(frozen=True)
class Alignment:
    path: str
    subcomponent: str
    original: str
    aligned: str


@dataclass(frozen=True)
class ParseSession:
    rule: str
    backend_id: str
    draft: ScenarioRep
    validated: ScenarioRep
    aligned: ScenarioRep
    transcript: tuple[PromptMessage, ...]
    alignments: tuple[Alignment, ...]
    reasks_used: int

    def to_jsonable(self) -> dict:
        return {
            "rule": self.rule,
            "backend": self.backend_id,
            "reasks_used": self.reasks_used,
            "messages": [
                {"role": m.role, "content": m.content} for m in self.transcript
            ],
            "documents": {
                "draft": serialize_scenario(self.draft),
                "validated": serialize_scenario(self.validated),
                "aligned": serialize_scenario(self.aligned),
            },
            "alignments": [
                {
                    "path": a.path,
                    "subcomponent": a.subcomponent,
                    "original": a.original,
                    "aligned": a.aligned,
                }
                for a in self.alignments
            ],
        }


def parse_rule(
    rule: str,
    backend: ChatBackend,
    catalog: ElementCatalog,
    example: tuple[str, ScenarioRep],
    max_reasks: int = 2,
    local_alignment: bool = False,
) -> ParseSession:
    """Run the full pipeline for one rule.

    `max_reasks` bounds how many times, across the whole session, an
    unparseable response may be answered with a repeat-the-document nudge.
    With `local_alignment` stage 3 runs offline by edit similarity instead of
    asking the backend.
    """
    transcript: list[PromptMessage] = list(build_extraction_prompt(rule, catalog, example))
    budget = {"left": max_reasks, "attempts": 0}

    def ask_for_document() -> str:
        response = backend.complete(transcript)
        transcript.append(PromptMessage("assistant", response))
        budget["attempts"] += 1
        doc = extract_document(response)
        while doc is None and budget["left"] > 0:
            budget["left"] -= 1
            transcript.append(PromptMessage("user", REASK_INSTRUCTION))
            response = backend.complete(transcript)
            transcript.append(PromptMessage("assistant", response))
            budget["attempts"] += 1
            doc = extract_document(response)
        if doc is None:
            raise ExtractionUnparseable(rule, budget["attempts"])
        return doc

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyOracleWarning)
        draft = parse_scenario_text(ask_for_document())

        transcript.extend(build_validation_prompt(draft))
        validated = parse_scenario_text(ask_for_document())

        report = validate_scenario(validated, catalog)
        replacements: list[tuple[Address, str]] = []
        alignments: list[Alignment] = []
        for entry in report.novel():
            candidates = catalog.tokens(entry.subcomponent)
            if not candidates:
                continue  # nothing to align against, keep the novel token
            if local_alignment:
                new_token = align_token_locally(entry.token, candidates)
            else:
                transcript.extend(
                    build_alignment_prompt(entry.token, entry.subcomponent, catalog)
                )
                response = backend.complete(transcript)
                transcript.append(PromptMessage("assistant", response))
                new_token = interpret_alignment_response(
                    response, entry.subcomponent, catalog, entry.token
                )
            if normalize_token(new_token) != normalize_token(entry.token):
                replacements.append((entry.address, new_token))
                alignments.append(
                    Alignment(entry.path, entry.subcomponent, entry.token, new_token)
                )

        aligned = validated
        # apply in reverse document order: replacing a list element can merge
        # it into an earlier duplicate, which would shift later indices
        for address, new_token in reversed(replacements):
            aligned = replace_token(aligned, address, new_token)

        # the result must still be a well-formed document
        assert parse_scenario_text(serialize_scenario(aligned)) == aligned

    return ParseSession(
        rule=rule,
        backend_id=backend.backend_id,
        draft=draft,
        validated=validated,
        aligned=aligned,
        transcript=tuple(transcript),
        alignments=tuple(alignments),
        reasks_used=max_reasks - budget["left"],
    )


def load_default_example() -> tuple[str, ScenarioRep]:
    """The packaged one-shot (rule, representation) pair used in extraction
    prompts when the caller supplies none."""
    from importlib import resources

    data = resources.files("rulescene") / "data"
    rule = (data / "example_rule.txt").read_text("utf-8").strip()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyOracleWarning)
        rep = parse_scenario_text((data / "example_rep.txt").read_text("utf-8"))
    return rule, rep
