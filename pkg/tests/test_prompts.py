"""
Tests for prompt assembly and completion parsing.
"""

import pytest

from src.errors import MissingSlotError, UnclosedScratchpadError
from src.prompts import (
    EASYREQ_TEMPLATE,
    STRIDE_HANDLER_TEMPLATE,
    PromptTemplate,
    build_prompt,
    extract_items,
    extract_part,
    strip_scratchpad,
)


@pytest.fixture
def one_slot_template():
    return PromptTemplate(
        agent="demo",
        role="You are a helpful reviewer.",
        instructions="Explain the requirement.",
        context_slots=("requirement",),
        constraints="Use short sentences.",
        examples=(("input text", "output text"),),
        scratchpad_steps=("Read it", "Explain it"),
    )


def test_build_prompt_wraps_slot_once(one_slot_template):
    """
    Tests that a slot value appears exactly once, wrapped in its tag, with the role as system text.
    """
    # --- Act ---
    request = build_prompt(one_slot_template, {"requirement": "Detect errors"})

    # --- Assert ---
    assert request.system_text == "You are a helpful reviewer."
    assert request.user_text.count("<requirement>\nDetect errors\n</requirement>") == 1
    assert request.user_text.count("Detect errors") == 1
    assert request.temperature == 0.0
    assert request.max_output_tokens == 2048


def test_build_prompt_section_order(one_slot_template):
    """
    Tests the order: instructions, slots, constraints, scratchpad steps, examples.
    """
    # --- Act ---
    text = build_prompt(one_slot_template, {"requirement": "Detect errors"}).user_text

    # --- Assert ---
    offsets = [
        text.index("Explain the requirement."),
        text.index("<requirement>"),
        text.index("Use short sentences."),
        text.index("1. Read it"),
        text.index("<scratchpad>[Your analysis here]</scratchpad>"),
        text.index("<examples>"),
    ]
    assert offsets == sorted(offsets)


def test_build_prompt_is_deterministic(one_slot_template):
    """
    Tests that the same inputs always build the same request.
    """
    slots = {"requirement": "Detect errors"}
    assert build_prompt(one_slot_template, slots) == build_prompt(one_slot_template, slots)


def test_build_prompt_missing_slot(one_slot_template):
    """
    Tests that an unfilled slot raises MissingSlot with its name.
    """
    with pytest.raises(MissingSlotError) as error:
        build_prompt(one_slot_template, {})
    assert error.value.slot == "requirement"


def test_easyreq_scratchpad_steps_numbered():
    """
    Tests that the requirement simplifier lists its four scratchpad steps as a numbered list.
    """
    # --- Act ---
    text = build_prompt(EASYREQ_TEMPLATE, {"use_case": "{}", "requirements": "[]"}).user_text

    # --- Assert ---
    assert "1. Identify the core purpose of the technical requirement" in text
    assert "4. " in text
    assert "5. " not in text


def test_stride_template_requests_extended_reasoning():
    """
    Tests that only the threat explainer asks for extended reasoning.
    """
    assert STRIDE_HANDLER_TEMPLATE.extended_reasoning is True
    assert EASYREQ_TEMPLATE.extended_reasoning is False


@pytest.mark.parametrize("kwargs", [
    # Test case 1: Blank role
    {"role": " ", "instructions": "Do it.", "context_slots": ()},

    # Test case 2: Slot declared twice
    {"role": "Role", "instructions": "Do it.", "context_slots": ("a", "a")},
])
def test_prompt_template_invariants(kwargs):
    """
    Tests that templates need a role and instructions, and unique slot names.
    """
    with pytest.raises(ValueError):
        PromptTemplate(agent="demo", **kwargs)


@pytest.mark.parametrize("raw, body, scratchpad", [
    # Test case 1: Notes before the answer
    ("<scratchpad>notes</scratchpad>Final.", "Final.", "notes"),

    # Test case 2: No scratchpad at all
    ("  Final only.  ", "Final only.", None),

    # Test case 3: Two blocks around the answer
    ("<scratchpad>a</scratchpad>Final.<scratchpad>b</scratchpad>", "Final.", "a\n\nb"),

    # Test case 4: A stray closing tag is dropped
    ("Final.</scratchpad>", "Final.", None),

    # Test case 5: A block nested inside another keeps the outer block's tail out of the body
    ("<scratchpad>a<scratchpad>b</scratchpad>SECRET</scratchpad>Final.", "Final.",
     "a<scratchpad>b</scratchpad>SECRET"),

    # Test case 6: Text between two nested blocks stays in the scratchpad
    ("Start <scratchpad><scratchpad>x</scratchpad>y<scratchpad>z</scratchpad></scratchpad>end.",
     "Start end.", "<scratchpad>x</scratchpad>y<scratchpad>z</scratchpad>"),
])
def test_strip_scratchpad(raw, body, scratchpad):
    """
    Tests that every scratchpad block is moved out of the body.
    """
    # --- Act ---
    output = strip_scratchpad(raw)

    # --- Assert ---
    assert output.body == body
    assert output.scratchpad == scratchpad
    assert output.raw == raw
    assert "scratchpad>" not in output.body


@pytest.mark.parametrize("raw", [
    # Test case 1: A single open tag
    "<scratchpad>oops",

    # Test case 2: A nested block closes but the outer one does not
    "<scratchpad>a<scratchpad>b</scratchpad>SECRET Final.",
])
def test_strip_scratchpad_unclosed(raw):
    """
    Tests that an opening tag without a closing tag is a shape error.
    """
    with pytest.raises(UnclosedScratchpadError):
        strip_scratchpad(raw)


def test_extract_part_and_items():
    """
    Tests tag extraction: empty parts count as missing and items are keyed by id.
    """
    # --- Arrange ---
    body = (
        "<what> A risk. </what><why></why>"
        '<item id="r1"><plain_text>One</plain_text></item>'
        '<item id="r2"><plain_text>Two</plain_text></item>'
    )

    # --- Act & Assert ---
    assert extract_part(body, "what") == "A risk."
    assert extract_part(body, "why") is None
    assert extract_part(body, "how") is None
    items = extract_items(body)
    assert list(items) == ["r1", "r2"]
    assert extract_part(items["r2"], "plain_text") == "Two"
