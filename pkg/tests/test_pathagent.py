import json

import pytest

from affnav import scene as S
from affnav.geometry import PixelPoint, Pose2D, ViewDirection, WorldPoint
from affnav.lowplan import CandidateEntry, CandidateSet, PlannedPath
from affnav.pathagent import (
    STOP,
    Decision,
    History,
    OracleAgentConfig,
    candidate_digest,
    decide_oracle,
    parse_decision,
    truncate_thought,
    update_history,
)


def entry(gid, x, y, view=ViewDirection.FRONT):
    return CandidateEntry(
        global_id=gid,
        path=PlannedPath(1, (1,), view),
        pixel_chain=(PixelPoint(10, 10),),
        world_polyline=(WorldPoint(x, y, 0),),
    )


def test_decide_oracle_stops_inside_radius(empty_scene):
    cs = CandidateSet((entry(1, 5.0, 5.0),))
    d = decide_oracle(cs, Pose2D(4, 4, 0), WorldPoint(4.5, 4.0, 0), empty_scene, S.AgentBody())
    assert d.is_stop


def test_decide_oracle_picks_geodesic_argmin(empty_scene):
    goal = WorldPoint(7.0, 4.0, 0)
    cs = CandidateSet((entry(1, 4.5, 6.0), entry(2, 6.0, 4.0), entry(3, 4.0, 2.0)))
    d = decide_oracle(cs, Pose2D(2, 4, 0), goal, empty_scene, S.AgentBody())
    assert d.action == 2


def test_decide_oracle_tie_breaks_to_lower_id(empty_scene):
    goal = WorldPoint(4.0, 7.0, 0)
    cs = CandidateSet((entry(1, 3.0, 5.0), entry(2, 3.0, 5.0)))
    d = decide_oracle(cs, Pose2D(4, 2, 0), goal, empty_scene, S.AgentBody())
    assert d.action == 1


def test_decide_oracle_empty_set_stops(empty_scene):
    d = decide_oracle(CandidateSet(), Pose2D(1, 1, 0), WorldPoint(7, 7, 0),
                      empty_scene, S.AgentBody())
    assert d.is_stop


def test_decide_oracle_revisit_filter_breaks_ping_pong(empty_scene):
    goal = WorldPoint(7.0, 7.0, 0)
    pose = Pose2D(5.0, 5.0, 0)
    # candidate 1 returns to an already-visited spot and does not improve the
    # geodesic over standing still; candidate 2 is worse by geodesic than 1
    # but unexplored
    back = entry(1, 3.0, 3.0)
    side = entry(2, 2.0, 2.5)
    cs = CandidateSet((back, side))
    plain = decide_oracle(cs, pose, goal, empty_scene, S.AgentBody())
    assert plain.action == 1
    filtered = decide_oracle(
        cs, pose, goal, empty_scene, S.AgentBody(), visited=((3.0, 3.1),)
    )
    assert filtered.action == 2


def test_decide_oracle_revisit_allows_improving_backtrack(empty_scene):
    goal = WorldPoint(7.0, 7.0, 0)
    pose = Pose2D(2.0, 2.0, 0)
    # the only candidate revisits a previous position but clearly improves
    cs = CandidateSet((entry(1, 5.0, 5.0),))
    d = decide_oracle(cs, pose, goal, empty_scene, S.AgentBody(), visited=((5.0, 5.0),))
    assert d.action == 1


def test_decide_oracle_falls_back_when_everything_filtered(empty_scene):
    goal = WorldPoint(7.0, 7.0, 0)
    pose = Pose2D(6.9, 6.9, 0)  # already close, but outside the 1.0 stop radius? no: inside
    pose = Pose2D(2.0, 2.0, 0)
    cs = CandidateSet((entry(1, 2.1, 2.1),))
    d = decide_oracle(
        cs, pose, goal, empty_scene, S.AgentBody(),
        OracleAgentConfig(), visited=((2.1, 2.1),),
    )
    assert d.action == 1  # plain argmin fallback, never an invalid action


def test_truncate_thought_word_boundary():
    text = "alpha beta " * 40
    cut = truncate_thought(text, limit=50)
    assert len(cut) <= 50
    assert not cut.endswith(" ")
    assert cut == truncate_thought(cut, limit=50)
    assert truncate_thought("short") == "short"


def test_history_render_and_update():
    h = History()
    assert "first step" in h.render()
    h = update_history(h, Decision("going deep", 3), WorldPoint(1, 2, 0), ViewDirection.LEFT)
    h = update_history(h, Decision("done", STOP), None)
    text = h.render()
    assert "followed path 3 (left view)" in text
    assert "stopped" in text
    assert h.entries[0].step == 0 and h.entries[1].step == 1
    assert h.entries[0].endpoint == (1, 2)


def test_parse_decision_valid_and_invalid():
    d = parse_decision(json.dumps({"thought": "t", "action": 2}), {1, 2})
    assert d.action == 2 and d.thought == "t"
    d = parse_decision('{"thought": "t", "action": "Stop"}', {1})
    assert d.is_stop
    with pytest.raises(ValueError):
        parse_decision('{"thought": "t", "action": 9}', {1, 2})
    with pytest.raises(ValueError):
        parse_decision('{"thought": "t", "action": "maybe"}', {1})
    with pytest.raises(ValueError):
        parse_decision("no json here", {1})


def test_candidate_digest_contents():
    cs = CandidateSet((entry(1, 3.0, 4.0),))
    text = candidate_digest(cs, Pose2D(3.0, 2.0, 0))
    assert "path 1" in text and "front view" in text
    assert "2.0 m" in text  # range
    assert "+90 deg" in text  # bearing straight left of heading 0
    assert candidate_digest(CandidateSet(), Pose2D(0, 0, 0)).startswith("(no candidate")
