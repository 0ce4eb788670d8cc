import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from visjit.graph import (
    DuplicateNodeId,
    GraphDiff,
    MalformedPatch,
    count_nodes,
    diff_graphs,
    dump_patch,
    iter_flat,
    parse_patch,
)

TWO_NODES = (
    '{"patcher":{"boxes":[{"box":{"id":"obj-1","maxclass":"toggle"}},'
    '{"box":{"id":"obj-2","maxclass":"print"}}],'
    '"lines":[{"patchline":{"source":["obj-1",0],"destination":["obj-2",0]}}]}}'
)


def patch(boxes, lines=()):
    return json.dumps({
        "patcher": {
            "boxes": [{"box": b} for b in boxes],
            "lines": [{"patchline": {"source": [s, sp], "destination": [d, dp]}} for s, sp, d, dp in lines],
        }
    })


class TestParsePatch:
    def test_minimal_graph(self):
        g = parse_patch(TWO_NODES)
        assert [n.id for n in g.nodes] == ["obj-1", "obj-2"]
        assert [n.class_name for n in g.nodes] == ["toggle", "print"]
        assert len(g.edges) == 1
        e = g.edges[0]
        assert (e.source_id, e.source_port, e.dest_id, e.dest_port) == ("obj-1", 0, "obj-2", 0)

    def test_empty_patcher(self):
        g = parse_patch('{"patcher":{"boxes":[],"lines":[]}}')
        assert g.nodes == () and g.edges == ()

    def test_bytes_input(self):
        assert count_nodes(parse_patch(TWO_NODES.encode())) == 2

    @pytest.mark.parametrize(
        "doc",
        [
            '{"notpatcher":{}}',
            "not json at all",
            "[1, 2]",
            '{"patcher": []}',
            '{"patcher":{"boxes":[{"box":{"maxclass":"toggle"}}],"lines":[]}}',
            '{"patcher":{"boxes":[{"nobox":{}}],"lines":[]}}',
        ],
    )
    def test_malformed(self, doc):
        with pytest.raises(MalformedPatch):
            parse_patch(doc)

    def test_dangling_edge(self):
        with pytest.raises(MalformedPatch):
            parse_patch(patch([{"id": "obj-1", "maxclass": "toggle"}], [("obj-1", 0, "obj-9", 0)]))

    def test_bad_position(self):
        with pytest.raises(MalformedPatch):
            parse_patch(patch([{"id": "obj-1", "maxclass": "toggle", "patching_rect": [1, 2, "x", 4]}]))

    def test_duplicate_ids(self):
        with pytest.raises(DuplicateNodeId):
            parse_patch(patch([{"id": "obj-1", "maxclass": "a"}, {"id": "obj-1", "maxclass": "b"}]))

    def test_same_id_in_different_levels_is_fine(self):
        sub = {"boxes": [{"box": {"id": "obj-1", "maxclass": "inlet"}}], "lines": []}
        g = parse_patch(patch([{"id": "obj-1", "maxclass": "newobj", "patcher": sub}]))
        assert [q for q, _ in iter_flat(g)] == ["obj-1", "obj-1/obj-1"]

    def test_position_and_attributes(self):
        g = parse_patch(patch([{"id": "obj-1", "maxclass": "newobj", "text": "+ 1", "patching_rect": [1.0, 2, 3, 4]}]))
        node = g.nodes[0]
        assert node.position == (1, 2, 3, 4)
        assert dict(node.attributes) == {"text": "+ 1"}


class TestCountNodes:
    def test_empty(self):
        assert count_nodes(parse_patch('{"patcher":{"boxes":[],"lines":[]}}')) == 0

    def test_flat(self):
        assert count_nodes(parse_patch(TWO_NODES)) == 2

    def test_nested_subpatcher(self):
        sub = {"boxes": [{"box": {"id": f"obj-{i}", "maxclass": "newobj"}} for i in range(3)], "lines": []}
        g = parse_patch(patch([{"id": "a", "maxclass": "toggle"}, {"id": "b", "maxclass": "newobj", "patcher": sub}]))
        assert count_nodes(g) == 5


class TestDiffGraphs:
    def test_identical(self):
        g = parse_patch(TWO_NODES)
        d = diff_graphs(g, g)
        assert d.added == d.modified == d.deleted == frozenset()
        assert d.nodes_before == 2

    def test_all_added(self):
        d = diff_graphs(parse_patch(patch([])), parse_patch(TWO_NODES))
        assert d.added == {"obj-1", "obj-2"} and not d.deleted and not d.modified

    def test_text_change_vs_move(self):
        old = patch([
            {"id": "obj-1", "maxclass": "newobj", "text": "+ 1", "patching_rect": [0, 0, 40, 20]},
            {"id": "obj-2", "maxclass": "toggle", "patching_rect": [0, 50, 20, 20]},
        ])
        new = patch([
            {"id": "obj-1", "maxclass": "newobj", "text": "+ 2", "patching_rect": [0, 0, 40, 20]},
            {"id": "obj-2", "maxclass": "toggle", "patching_rect": [90, 50, 20, 20]},
        ])
        d = diff_graphs(parse_patch(old), parse_patch(new))
        assert d.modified == {"obj-1"} and not d.added and not d.deleted
        d_pos = diff_graphs(parse_patch(old), parse_patch(new), count_position_changes=True)
        assert d_pos.modified == {"obj-1", "obj-2"}

    def test_integral_float_equals_int(self):
        a = patch([{"id": "o", "maxclass": "flonum", "value": 2}])
        b = patch([{"id": "o", "maxclass": "flonum", "value": 2.0}])
        assert diff_graphs(parse_patch(a), parse_patch(b)).changed == 0

    def test_subpatcher_child_change_marks_parent(self):
        def doc(text):
            sub = {"boxes": [{"box": {"id": "obj-1", "maxclass": "newobj", "text": text}}], "lines": []}
            return parse_patch(patch([{"id": "p", "maxclass": "newobj", "patcher": sub}]))

        d = diff_graphs(doc("a"), doc("b"))
        assert d.modified == {"p", "p/obj-1"}

    def test_rewired_edge_marks_nothing_at_top_level(self):
        boxes = [{"id": "a", "maxclass": "t"}, {"id": "b", "maxclass": "t"}]
        d = diff_graphs(parse_patch(patch(boxes, [("a", 0, "b", 0)])), parse_patch(patch(boxes)))
        assert d.changed == 0

    def test_roundtrip_dict(self):
        d = GraphDiff(frozenset({"a"}), frozenset({"b"}), frozenset(), 3)
        assert GraphDiff.from_dict(d.to_dict()) == d


# -- properties over random graphs -----------------------------------------------

_classes = st.sampled_from(["newobj", "toggle", "message", "number", "comment"])
_attr_values = st.one_of(
    st.integers(-5, 5),
    st.floats(-10, 10, allow_nan=False, allow_infinity=False),
    st.text(alphabet="abc +-~0123456789", max_size=8),
    st.lists(st.integers(0, 3), max_size=3),
    st.dictionaries(st.sampled_from(["x", "y"]), st.integers(0, 3), max_size=2),
)


@st.composite
def patcher_docs(draw, depth=0):
    n = draw(st.integers(0, 6))
    ids = [f"obj-{i}" for i in draw(st.lists(st.integers(1, 20), min_size=n, max_size=n, unique=True))]
    boxes = []
    for node_id in ids:
        b = {"id": node_id, "maxclass": draw(_classes)}
        b.update(draw(st.dictionaries(st.sampled_from(["text", "varname", "args", "style"]), _attr_values, max_size=3)))
        if draw(st.booleans()):
            b["patching_rect"] = [draw(st.integers(0, 300)), draw(st.integers(0, 300)), 40, 20]
        if depth == 0 and draw(st.integers(0, 4)) == 0:
            b["patcher"] = draw(patcher_docs(depth=1))["patcher"]
        boxes.append({"box": b})
    lines = []
    if ids:
        for _ in range(draw(st.integers(0, 4))):
            lines.append({"patchline": {
                "source": [draw(st.sampled_from(ids)), draw(st.integers(0, 2))],
                "destination": [draw(st.sampled_from(ids)), draw(st.integers(0, 2))],
            }})
    return {"patcher": {"boxes": boxes, "lines": lines}}


def _flat_attrs(g):
    return {q: (n.class_name, dict(n.attributes), n.position) for q, n in iter_flat(g)}


class TestGraphProperties:
    @settings(max_examples=150, deadline=None)
    @given(patcher_docs())
    def test_roundtrip(self, doc):
        g = parse_patch(json.dumps(doc))
        g2 = parse_patch(dump_patch(g))
        assert _flat_attrs(g) == _flat_attrs(g2)
        assert set(g.edges) == set(g2.edges)
        assert g == g2

    @settings(max_examples=150, deadline=None)
    @given(patcher_docs())
    def test_self_diff_empty(self, doc):
        g = parse_patch(json.dumps(doc))
        assert diff_graphs(g, g).changed == 0

    @settings(max_examples=150, deadline=None)
    @given(patcher_docs(), patcher_docs())
    def test_added_deleted_antisymmetry(self, a, b):
        ga, gb = parse_patch(json.dumps(a)), parse_patch(json.dumps(b))
        forward, backward = diff_graphs(ga, gb), diff_graphs(gb, ga)
        assert forward.added == backward.deleted
        assert forward.deleted == backward.added
        assert forward.modified == backward.modified

    @settings(max_examples=150, deadline=None)
    @given(patcher_docs(), patcher_docs())
    def test_node_count_balance(self, a, b):
        ga, gb = parse_patch(json.dumps(a)), parse_patch(json.dumps(b))
        d = diff_graphs(ga, gb)
        assert count_nodes(gb) == count_nodes(ga) + len(d.added) - len(d.deleted)
        assert d.nodes_before == count_nodes(ga)
