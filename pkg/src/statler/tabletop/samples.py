"""Hand-built sample evaluation episodes, one per domain.

These builders produce the JSON fixtures shipped in ``statler/data/fixtures``;
``tests/test_episodes.py`` checks the files stay in sync with this code.
"""

from __future__ import annotations

from fractions import Fraction

from .episodes import Episode, EpisodeBuilder
from .knowledge import weight_expr
from .sim import CLEAN, DIRTY, EnvState

DISINFECTION_INIT = """\
# state = {
#     "objects": ["green block", "white block", "black block", "blue block", "pink block", "red block", "orange bowl", "silver bowl", "disinfector"],
#     "relations": [],
#     "disinfector": {"contains": []},
#     "green block": {},
#     "white block": {},
#     "black block": {},
#     "blue block": {},
#     "pink block": {},
#     "red block": {},
#     "orange bowl": {},
#     "silver bowl": {}
# }"""

WEIGHT_INIT = """\
# state = {
#     "objects": ["green block", "orange block", "white block", "black block", "transparent bowl", "green bowl"],
#     "relations": [],
#     "green block": {},
#     "orange block": {},
#     "white block": {},
#     "black block": {},
#     "transparent bowl": {},
#     "green bowl": {},
# }"""


def sample_disinfection() -> Episode:
    blocks = ["green block", "white block", "black block", "blue block", "pink block", "red block"]
    env = EnvState.initial(blocks, ["orange bowl", "silver bowl"], disinfector=True,
                           cleanliness={"red block": DIRTY, "pink block": CLEAN})
    b = EpisodeBuilder("disinfection", env, episode_id="sample_disinfection",
                       init_state_text=DISINFECTION_INIT)
    b.add("the red block is dirty.", 'update_wm("the red block is dirty.")',
          noop=True, learn_status=["red block"])
    b.add("the pink block is clean.", 'update_wm("the pink block is clean.")',
          noop=True, learn_status=["pink block"])
    b.add("Put the pink block in the disinfector",
          'put_first_on_second("pink block", "disinfector")\n'
          'update_wm("Put the pink block in the disinfector. the pink block becomes clean.")')
    b.add("Put the red block in the orange bowl",
          'put_first_on_second("red block", "orange bowl")\n'
          'update_wm("Put the red block in the orange bowl.")')
    b.add("Put all the dirty blocks on the table.",
          'put_first_on_second("red block", "table")\n'
          'update_wm("Put the red block on the table.")', temporal=True)
    b.add("Put all the clean blocks on the table.",
          'put_first_on_second("pink block", "table")\n'
          'update_wm("Put the pink block on the table.")', temporal=True)
    b.add("Put the red block on the pink block",
          'put_first_on_second("red block", "pink block")\n'
          'update_wm("Put the red block on the pink block. the pink block becomes dirty.")')
    b.add("Put the red block in the orange bowl",
          'put_first_on_second("red block", "orange bowl")\n'
          'update_wm("Put the red block in the orange bowl.")')
    b.add("Put the red block on the table.",
          'put_first_on_second("red block", "table")\n'
          'update_wm("Put the red block on the table.")')
    b.add("Put the pink block on the red block",
          'put_first_on_second("pink block", "red block")\n'
          'update_wm("Put the pink block on the red block.")')
    # the pink block sits on the red block, so it has to move first
    b.add("Put the red block and the pink block in the disinfector",
          'put_first_on_second("pink block", "disinfector")\n'
          'put_first_on_second("red block", "disinfector")\n'
          'update_wm("Put the red block and the pink block in the disinfector. '
          'the red block and the pink block become clean.")')
    b.add("Put all the clean blocks on the table.",
          'put_first_on_second("red block", "table")\n'
          'put_first_on_second("pink block", "table")\n'
          'update_wm("Put the red block and the pink block on the table.")', temporal=True)
    return b.build()


def _weight_episode(domain: str, episode_id: str) -> Episode:
    blocks = ["green block", "orange block", "white block", "black block"]
    weights = {"green block": Fraction(4), "white block": Fraction(4),
               "black block": Fraction(2), "orange block": Fraction(2)}
    env = EnvState.initial(blocks, ["transparent bowl", "green bowl"], weights=weights)
    b = EpisodeBuilder(domain, env, episode_id=episode_id, init_state_text=WEIGHT_INIT)
    q = "The green block has the same weight as the white block"
    b.add(q, f'update_wm("{q}")', noop=True,
          learn_weight=("green block", weight_expr("white block", "same")))
    q = "The white block is twice the weight of the black block"
    b.add(q, f'update_wm("{q}")', noop=True,
          learn_weight=("white block", weight_expr("black block", "twice")))
    q = "The orange block is half the weight of the green block"
    b.add(q, f'update_wm("{q}")', noop=True,
          learn_weight=("orange block", weight_expr("green block", "half")))
    b.add("Put the orange block in the transparent bowl",
          'put_first_on_second("orange block", "transparent bowl")\n'
          'update_wm("Put the orange block in the transparent bowl.")')
    b.add("Put the blocks in the green bowl so that their total weight becomes identical "
          "to what is in the transparent bowl",
          'put_first_on_second("black block", "green bowl")\n'
          'update_wm("Put the black block in the green bowl.")', temporal=True)
    return b.build()


def sample_weight() -> Episode:
    return _weight_episode("weight", "sample_weight")


def sample_pick_place() -> Episode:
    # the published pick-and-place sample repeats the weight episode verbatim
    return _weight_episode("pick_place", "sample_pick_place")


SAMPLE_BUILDERS = {
    "sample_disinfection": sample_disinfection,
    "sample_weight": sample_weight,
    "sample_pick_place": sample_pick_place,
}
