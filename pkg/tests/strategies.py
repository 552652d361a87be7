"""Random scenario-representation builders shared by the property tests.

Two entry points: `random_rep(rng, catalog)` builds a catalog-valid
representation from a plain `random.Random`, for cheap bulk generation;
`reps(catalog)` is the hypothesis strategy wrapping the same shape.
"""

from __future__ import annotations

import random

import hypothesis.strategies as st

from rulescene.dsl import Actor, Environment, Oracle, Position, RoadNetwork, ScenarioRep

SENTINEL = "none"


def _pick(rng: random.Random, tokens, p_none: float = 0.3) -> str:
    if rng.random() < p_none:
        return SENTINEL
    return rng.choice(tokens)


def random_rep(rng: random.Random, catalog) -> ScenarioRep:
    def toks(sub):
        return list(catalog.tokens(sub))

    def actor(ego: bool = False) -> Actor:
        refs = toks("position reference")
        if ego:
            # the ego cannot be positioned relative to itself
            refs = [t for t in refs if t != "ego vehicle"]
        return Actor(
            type=_pick(rng, toks("actor type"), 0.1),
            behavior=_pick(rng, toks("behavior"), 0.1),
            position=Position(
                reference=_pick(rng, refs),
                relation=_pick(rng, toks("position relation")),
            ),
        )

    signs = rng.sample(toks("traffic sign"), rng.randint(0, 3))
    lon = rng.sample(toks("longitudinal oracle"), rng.randint(0, 2))
    lat = rng.sample(toks("lateral oracle"), rng.randint(0, 1))
    return ScenarioRep(
        environment=Environment(
            weather=_pick(rng, toks("weather")), time=_pick(rng, toks("time"))
        ),
        road_network=RoadNetwork(
            road_type=_pick(rng, toks("road type")),
            road_marker=_pick(rng, toks("road marker")),
            traffic_signs=tuple(signs),
        ),
        ego=actor(ego=True),
        npc_actors=tuple(actor() for _ in range(rng.randint(0, 3))),
        oracle=Oracle(longitudinal=tuple(lon), lateral=tuple(lat)),
    )


def reps(catalog) -> st.SearchStrategy[ScenarioRep]:
    return st.builds(
        lambda seed: random_rep(random.Random(seed), catalog),
        st.integers(min_value=0, max_value=2**48),
    )
