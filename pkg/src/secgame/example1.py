"""The 20-node network-value example.

Four critical nodes (1-4) of a 20-node network become targets 0-3. Both
players are limited to the strategies {1}, {2}, {3}, {1,2} and {3,4} (node
labels). Benefits are network-value decrements with val = sum of squared
component sizes. The graph is a reconstruction consistent with the values
quoted in the text (400, 325, and singleton benefits 39/39/75/75); the pair
values depend on that reconstruction.
"""
from __future__ import annotations

from importlib import resources

import numpy as np

from .model import (
    AdditiveSetFunction,
    AttackerSpace,
    GameInstance,
    SetFunction,
    adjacency,
    mask_of,
    network_value,
    network_value_benefits,
    parse_edge_list,
    zero_sum_complete,
)
from .oracles import Explicit
from .verify import NormalForm, brute_minimax, direct_payoff

N_TARGETS = 4
NODE_OF_TARGET = (1, 2, 3, 4)
STRATEGY_NODES = ((1,), (2,), (3,), (1, 2), (3, 4))
PUBLISHED_PROBS = {"additive": (0.34, 0.66), "true": (0.63, 0.37)}


def edge_text() -> str:
    return resources.files("secgame").joinpath("data/example1.edges").read_text()


def graph():
    return adjacency(parse_edge_list(edge_text()), 20)


def node_mask(target_mask: int) -> int:
    return mask_of(NODE_OF_TARGET[i] for i in range(N_TARGETS) if target_mask >> i & 1)


def target_mask(nodes) -> int:
    return mask_of(NODE_OF_TARGET.index(v) for v in nodes)


def strategies() -> list[int]:
    return [target_mask(s) for s in STRATEGY_NODES]


def true_benefits(budget: int = 2) -> SetFunction:
    """Network-value benefit of every target set of size <= budget."""
    adj = graph()
    space = AttackerSpace(N_TARGETS, budget)
    nodes = network_value_benefits(adj, [node_mask(m) for m in space if m])
    return SetFunction({m: nodes(node_mask(m)) for m in space if m})


def game(true_values: bool = False, budget: int = 2) -> GameInstance:
    """Zero-sum game on the four targets; attacker loss is 0."""
    if true_values:
        b = true_benefits(budget)
        zero = SetFunction({})
    else:
        f = true_benefits(1)
        b = AdditiveSetFunction(tuple(f(1 << i) for i in range(N_TARGETS)))
        zero = AdditiveSetFunction((0.0,) * N_TARGETS)
    profile = zero_sum_complete(b, zero, N_TARGETS, budget)
    return GameInstance(AttackerSpace(N_TARGETS, budget), Explicit(N_TARGETS, tuple(strategies())), profile)


def restricted_normal_form(g: GameInstance) -> NormalForm:
    """The 5x5 game where the attacker is also limited to the listed strategies."""
    s = strategies()
    M_a = np.array([[direct_payoff(A, D, g.utilities, "attacker") for D in s] for A in s])
    M_d = np.array([[direct_payoff(A, D, g.utilities, "defender") for D in s] for A in s])
    return NormalForm(s, s, M_a, M_d)


def pair_probabilities(true_values: bool) -> tuple[float, float]:
    """Defender probabilities on {1,2} and {3,4} in the restricted 5x5 minimax."""
    _, _, q = brute_minimax(restricted_normal_form(game(true_values)))
    return q.get(target_mask((1, 2)), 0.0), q.get(target_mask((3, 4)), 0.0)


def network_values() -> dict[str, int]:
    adj = graph()
    return {"full": network_value(adj), "without_node_3": network_value(adj, 1 << 3)}


def spec_doc(true_values: bool = False, budget: int = 2) -> dict:
    """Game-spec document for the example, as read by the CLI."""
    s = [sorted(NODE_OF_TARGET.index(v) for v in nodes) for nodes in STRATEGY_NODES]
    doc = {"n": N_TARGETS, "attacker_budget": budget, "zero_sum": True,
           "defender_system": {"type": "explicit", "sets": s}}
    if true_values:
        b = true_benefits(budget)
        doc["utilities"] = {"sparse": [{"set": [i for i in range(N_TARGETS) if m >> i & 1], "b_a": v}
                                       for m, v in sorted(b.entries.items())]}
    else:
        f = true_benefits(1)
        doc["utilities"] = {"additive": {"benefit_attacker": [f(1 << i) for i in range(N_TARGETS)],
                                         "loss_attacker": [0] * N_TARGETS}}
    return doc
