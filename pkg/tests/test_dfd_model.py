"""
Tests for the DFD model: DSL parsing, validation and the Mermaid and summary backends.
"""

import random

import pytest

from src.dfd_model import (
    DataFlow,
    Dfd,
    DfdNode,
    NodeKind,
    Severity,
    TrustBoundary,
    crossing_flows,
    emit_mermaid,
    parse_dfd,
    serialize_dsl,
    summarize_dfd,
    validate_dfd,
)
from src.errors import DfdSyntaxError, DuplicateIdError, EmptyDiagramError, PreconditionViolated, UnknownReferenceError
from tests.conftest import FIXTURES_DIR, UC1_DIR, read_golden
from tests.generators import random_dfd


@pytest.fixture
def uc1_dfd():
    return parse_dfd((UC1_DIR / "model.dfd").read_text(encoding="utf-8"))


def test_parse_dfd_camera_to_edge():
    """
    Tests that a minimal camera-to-edge document parses into two nodes and one flow.
    """
    # --- Arrange ---
    text = (
        'entity camera "Camera Sensor"\n'
        'process edge "Edge Device Data Processor"\n'
        'flow f1 camera -> edge "raw video frames"\n'
    )

    # --- Act ---
    dfd = parse_dfd(text)

    # --- Assert ---
    assert dfd.nodes == (
        DfdNode("camera", "Camera Sensor", NodeKind.EXTERNAL_ENTITY),
        DfdNode("edge", "Edge Device Data Processor", NodeKind.PROCESS),
    )
    assert dfd.flows == (DataFlow("f1", "camera", "edge", "raw video frames"),)
    assert dfd.boundaries == ()


def test_parse_dfd_keeps_quoted_hash_and_escapes():
    """
    Tests that `#` inside quotes is not a comment and that escaped quotes are unescaped.
    """
    # --- Act ---
    dfd = parse_dfd('store db "Line #3 \\"archive\\"" # trailing comment\n')

    # --- Assert ---
    assert dfd.nodes[0].name == 'Line #3 "archive"'
    assert dfd.nodes[0].kind is NodeKind.DATA_STORE


@pytest.mark.parametrize("text, error", [
    # Test case 1: Nothing but comments and blank lines
    ("# only a comment\n\n", EmptyDiagramError),

    # Test case 2: The same node id declared twice
    ('process p1 "A"\nprocess p1 "B"\n', DuplicateIdError),

    # Test case 3: Flow to an undeclared node
    ('process p1 "A"\nflow f1 p1 -> ghost "data"\n', UnknownReferenceError),

    # Test case 4: Boundary listing an undeclared node
    ('process p1 "A"\nboundary b1 "Zone" { p1 ghost }\n', UnknownReferenceError),

    # Test case 5: Unknown keyword
    ('actor p1 "A"\n', DfdSyntaxError),

    # Test case 6: Identifier with an uppercase letter
    ('process P1 "A"\n', DfdSyntaxError),
])
def test_parse_dfd_errors(text, error):
    """
    Tests that malformed documents raise the matching load error.
    """
    with pytest.raises(error):
        parse_dfd(text)


def test_parse_dfd_reports_duplicate_id_and_line():
    """
    Tests that DuplicateId names the id and syntax errors carry the 1-based line number.
    """
    # --- Act & Assert ---
    with pytest.raises(DuplicateIdError) as duplicate:
        parse_dfd('process p1 "A"\nprocess p1 "B"\n')
    assert duplicate.value.element_id == "p1"

    with pytest.raises(DfdSyntaxError) as syntax:
        parse_dfd('process p1 "A"\n\nflow f1 p1 => p1 "x"\n')
    assert syntax.value.line == 3


def test_validate_dfd_uc1_is_clean(uc1_dfd):
    """
    Tests that the UC1 diagram, where every flow touches a process, has no findings.
    """
    assert validate_dfd(uc1_dfd) == []


def test_validate_dfd_flow_without_process_is_warning():
    """
    Tests that an entity-to-store flow yields exactly one D2 warning.
    """
    # --- Arrange ---
    dfd = parse_dfd('entity badge "Badge Reader"\nstore log "Access Log"\nflow f1 badge -> log "badge scans"\n')

    # --- Act ---
    findings = validate_dfd(dfd)

    # --- Assert ---
    assert [(d.severity, d.code, d.subject) for d in findings] == [(Severity.WARNING, "D2", "f1")]


def test_validate_dfd_node_in_two_boundaries_is_error():
    """
    Tests that a node listed in two boundaries yields exactly one D4 error.
    """
    # --- Arrange ---
    dfd = parse_dfd(
        'process edge "Edge"\nentity cloud "Cloud"\n'
        'boundary a "Zone A" { edge }\nboundary b "Zone B" { edge cloud }\n'
    )

    # --- Act ---
    findings = validate_dfd(dfd)

    # --- Assert ---
    assert [(d.severity, d.code, d.subject) for d in findings] == [(Severity.ERROR, "D4", "edge")]


def test_validate_dfd_undeclared_references_and_self_loop():
    """
    Tests D1, D3 and D5 on a diagram built in code, since the parser rejects undeclared ids.
    """
    # --- Arrange ---
    dfd = Dfd(
        nodes=(DfdNode("edge", "Edge", NodeKind.PROCESS),),
        flows=(DataFlow("f1", "edge", "ghost", "data"), DataFlow("f2", "edge", "edge", "loop")),
        boundaries=(TrustBoundary("b1", "Zone", ("edge", "phantom")),),
    )

    # --- Act ---
    codes = [(d.code, d.subject) for d in validate_dfd(dfd)]

    # --- Assert ---
    assert codes == [("D1", "f1"), ("D5", "f2"), ("D3", "b1")]


def test_diagnostic_format():
    """
    Tests the `SEVERITY CODE subject: message` line format.
    """
    # --- Arrange ---
    dfd = parse_dfd('entity a "A"\nentity b "B"\nflow f1 a -> b "data"\n')

    # --- Act ---
    line = validate_dfd(dfd)[0].format()

    # --- Assert ---
    assert line == "WARNING D2 f1: neither endpoint of this flow is a process"


def test_emit_mermaid_uc1_matches_golden(uc1_dfd):
    """
    Tests that the UC1 diagram emits the golden Mermaid text byte for byte.
    """
    assert emit_mermaid(uc1_dfd) == read_golden("uc1.mmd")


@pytest.mark.parametrize("name", ["single_node", "boundary_only"])
def test_emit_mermaid_edge_cases_match_golden(name):
    """
    Tests the single-node and boundary-only diagrams against their goldens.
    """
    # --- Arrange ---
    dfd = parse_dfd((FIXTURES_DIR / "dfd" / f"{name}.dfd").read_text(encoding="utf-8"))

    # --- Act & Assert ---
    assert emit_mermaid(dfd) == read_golden(f"{name}.mmd")


def test_emit_mermaid_single_process_literal():
    """
    Tests the exact single-process emission.
    """
    dfd = Dfd(nodes=(DfdNode("edge", "Edge Device Data Processor", NodeKind.PROCESS),))
    assert emit_mermaid(dfd) == 'flowchart LR\n  edge(("Edge Device Data Processor"))\n'


def test_emit_mermaid_escapes_quotes():
    """
    Tests that double quotes in names cannot break out of the Mermaid label.
    """
    dfd = parse_dfd('store db "The \\"main\\" archive"\n')
    assert emit_mermaid(dfd) == 'flowchart LR\n  db[("The #quot;main#quot; archive")]\n'


def test_emit_mermaid_refuses_invalid_diagram():
    """
    Tests that a diagram with a D1 error raises PreconditionViolated.
    """
    # --- Arrange ---
    dfd = Dfd(
        nodes=(DfdNode("edge", "Edge", NodeKind.PROCESS),),
        flows=(DataFlow("f1", "edge", "ghost", "data"),),
    )

    # --- Act & Assert ---
    with pytest.raises(PreconditionViolated):
        emit_mermaid(dfd)


def test_crossing_flows(uc1_dfd):
    """
    Tests that only the flow leaving the shop floor crosses a boundary, and that
    a diagram without boundaries has no crossing flows.
    """
    # --- Act & Assert ---
    assert crossing_flows(uc1_dfd) == ["f2"]
    no_boundaries = Dfd(nodes=uc1_dfd.nodes, flows=uc1_dfd.flows)
    assert crossing_flows(no_boundaries) == []


def test_summarize_dfd_uc1_matches_golden(uc1_dfd):
    """
    Tests that the UC1 summary matches the golden text and names the crossing flow.
    """
    # --- Act ---
    summary = summarize_dfd(uc1_dfd)

    # --- Assert ---
    assert summary == read_golden("uc1_summary.txt")
    assert "Flow f2 (Edge Device Data Processor to Cloud Platform) crosses a trust boundary." in summary


def test_summarize_dfd_single_process():
    """
    Tests the counts sentence for a single process with no flows.
    """
    dfd = Dfd(nodes=(DfdNode("edge", "Edge Device Data Processor", NodeKind.PROCESS),))
    assert summarize_dfd(dfd) == (
        "The diagram has 0 external entities, 1 process and 0 data stores.\n"
        "It has 0 data flows.\n"
        "No trust boundaries are defined.\n"
        "No data flow crosses a trust boundary.\n"
    )


def test_serialize_dsl_uc1_round_trip(uc1_dfd):
    """
    Tests that writing the UC1 diagram and reading it back gives the same diagram.
    """
    assert parse_dfd(serialize_dsl(uc1_dfd)) == uc1_dfd


@pytest.mark.parametrize("name", [
    # Test case 1: Unicode line separator
    "Edge\u2028Processor",

    # Test case 2: Newline and carriage return
    "Edge\nProcessor\r",

    # Test case 3: Vertical tab, form feed, file separator and next line
    "Edge\x0b\x0c\x1c\x85Processor",

    # Test case 4: A literal backslash-u sequence
    "Edge \\u0041 Processor",
])
def test_serialize_dsl_escapes_line_breaking_characters(name):
    """
    Tests that names containing characters Python treats as line breaks survive
    serialize_dsl and parse_dfd, and stay on one line of Mermaid.
    """
    # --- Arrange ---
    dfd = Dfd(nodes=(DfdNode("edge", name, NodeKind.PROCESS),))

    # --- Act ---
    text = serialize_dsl(dfd)

    # --- Assert ---
    assert text.count("\n") == 1
    assert len(text.splitlines()) == 1
    assert parse_dfd(text) == dfd
    assert len(emit_mermaid(dfd).splitlines()) == 2


def test_parse_dfd_decodes_escapes_and_crlf():
    """
    Tests the \\n, \\t and \\uXXXX escapes and Windows line endings.
    """
    # --- Act ---
    dfd = parse_dfd('process edge "Line\\none\\tTab \\u00e9"\r\nentity cam "Cam"\r\n')

    # --- Assert ---
    assert dfd.nodes[0].name == "Line\none\tTab \u00e9"
    assert dfd.nodes[1].name == "Cam"


@pytest.mark.parametrize("seed", range(100))
def test_random_dfd_properties(seed):
    """
    Tests on random valid diagrams that the DSL round-trips, the backends are
    deterministic, Mermaid keeps flow order, and crossing_flows matches a brute-force
    membership comparison.
    """
    # --- Arrange ---
    rng = random.Random(seed)
    dfd = random_dfd(rng)
    assert [d for d in validate_dfd(dfd) if d.is_error] == []

    # --- Act ---
    reparsed = parse_dfd(serialize_dsl(dfd))
    mermaid = emit_mermaid(dfd)

    # --- Assert ---
    assert reparsed == dfd
    assert mermaid == emit_mermaid(reparsed)
    assert summarize_dfd(dfd) == summarize_dfd(reparsed)

    edge_lines = [line for line in mermaid.splitlines() if "-->" in line]
    assert [line.split()[0] for line in edge_lines] == [f.source for f in dfd.flows]

    owner = {}
    for boundary in dfd.boundaries:
        for member in boundary.members:
            owner.setdefault(member, boundary.id)
    expected = [f.id for f in dfd.flows if owner.get(f.source) != owner.get(f.target)]
    assert crossing_flows(dfd) == expected
