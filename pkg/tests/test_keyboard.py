from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hearth.catalog import default_catalog
from hearth.errors import InvalidInsertionPointError, ParseError, StaleOptionError
from hearth.keyboard import (
    STATE_FILTERED,
    CompletionOption,
    Draft,
    InsertionPoint,
    apply_option,
    current_point,
    delete_at,
    options,
)
from hearth.language.grammar import derive_grammar
from hearth.language.parser import analyze_prefix
from hearth.language.render import render
from hearth.registry import AVAILABLE, MISSING

from strategies import programs, registries


def brute_force_continuations(draft: Draft, grammar) -> set[str]:
    """Independent oracle: try every terminal, full re-parse from scratch."""
    valid = set()
    base = draft.text()
    for key in sorted(grammar.terminals):
        term = grammar.terminals[key]
        candidate = (base + " " + term.representative_text()).strip()
        try:
            analysis = analyze_prefix(candidate, grammar)
        except ParseError:
            continue
        if analysis.tokens and analysis.tokens[-1].terminal_key == key:
            valid.add(key)
    return valid


def _draft(grammar, snapshot, *texts) -> Draft:
    draft = Draft()
    for text in texts:
        point = current_point(draft, grammar)
        opts = options(draft, point, snapshot, grammar=grammar)
        matching = [o for o in opts if o.token.text == text]
        if matching:
            draft, _ = apply_option(draft, point, matching[0], snapshot, grammar=grammar)
            continue
        free = [o for o in opts if o.free_text]
        assert free, f"{text!r} not offered; offered: {[o.token.text for o in opts]}"
        draft, _ = apply_option(draft, point, free[0], snapshot, grammar=grammar, text=text)
    return draft


def test_empty_draft_offers_exactly_program_header(registry):
    g = derive_grammar(registry.snapshot())
    opts = options(Draft(), current_point(Draft(), g), registry.snapshot(), grammar=g)
    assert [o.token.text for o in opts] == ["program"]
    assert opts[0].category == "keyword"


def test_options_after_each_time_match_brute_force(catalog):
    from hearth.registry import DeviceDescriptor, Registry

    reg = Registry(catalog)
    reg.register_device(
        DeviceDescriptor(id="lamp-blue", kind="lamp", display_name="blue-lamp", location="bedroom"),
        {"power": "off", "color": "blue"},
    )
    reg.register_device(
        DeviceDescriptor(id="cube", kind="domicube", display_name="DomiCube", location="salon"),
        {"face": 1, "battery": 50},
    )
    g = derive_grammar(reg.snapshot())
    snap = reg.snapshot()
    draft = _draft(g, snap, "program", "Evening", "each time")
    opts = options(draft, current_point(draft, g), snap, grammar=g)
    assert {o.token.text for o in opts} == {"the blue-lamp", "the DomiCube", "all"}
    # and "all" continues into exactly the two kinds
    draft2, _ = apply_option(
        draft, current_point(draft, g), [o for o in opts if o.token.text == "all"][0], snap, grammar=g
    )
    kinds = options(draft2, current_point(draft2, g), snap, grammar=g)
    assert {o.token.text for o in kinds} == {"lamp", "domicube"}
    assert brute_force_continuations(draft, g) == {o.token.terminal_key for o in opts}


def test_unregistered_device_disappears_from_options(registry):
    g = derive_grammar(registry.snapshot())
    snap = registry.snapshot()
    draft = _draft(g, snap, "program", "Evening", "each time")
    texts = {o.token.text for o in options(draft, current_point(draft, g), snap, grammar=g)}
    assert "the blue-lamp" in texts

    registry.unregister_device("lamp-blue")
    g2 = derive_grammar(registry.snapshot())
    snap2 = registry.snapshot()
    texts2 = {o.token.text for o in options(draft, current_point(draft, g2), snap2, grammar=g2)}
    assert "the blue-lamp" not in texts2


def test_apply_option_advances_to_event_options_of_kind(registry):
    g = derive_grammar(registry.snapshot())
    snap = registry.snapshot()
    draft = _draft(g, snap, "program", "Evening", "each time", "the DomiCube")
    opts = options(draft, current_point(draft, g), snap, grammar=g)
    # continuation oracle: only DomiCube events are legal here
    assert {o.token.text for o in opts} == {"shows face", "reports battery"}
    assert brute_force_continuations(draft, g) == {o.token.terminal_key for o in opts}


def test_stale_option_rejected_after_registry_mutation(registry):
    g = derive_grammar(registry.snapshot())
    snap = registry.snapshot()
    draft = _draft(g, snap, "program", "Evening", "each time")
    point = current_point(draft, g)
    opt = options(draft, point, snap, grammar=g)[0]
    registry.unregister_device("cube")
    g2 = derive_grammar(registry.snapshot())
    with pytest.raises(StaleOptionError):
        apply_option(draft, point, opt, registry.snapshot(), grammar=g2)


def test_free_text_option_accepts_custom_value(registry):
    g = derive_grammar(registry.snapshot())
    snap = registry.snapshot()
    draft = _draft(g, snap, "program")
    point = current_point(draft, g)
    name_opt = [o for o in options(draft, point, snap, grammar=g) if o.free_text][0]
    new_draft, next_point = apply_option(draft, point, name_opt, snap, grammar=g, text="Evening")
    assert new_draft.tokens[-1].text == "Evening"
    assert next_point.token_index == 2
    with pytest.raises(ValueError):
        apply_option(draft, point, name_opt, snap, grammar=g, text="two words")


def test_state_filtered_tagging(registry):
    # blue-lamp is off: "switch off" would not change it, so it is grayed
    g = derive_grammar(registry.snapshot())
    snap = registry.snapshot()
    draft = _draft(g, snap, "program", "Hush", "switch off")
    opts = options(draft, current_point(draft, g), snap, grammar=g)
    by_text = {o.token.text: o for o in opts if o.category == "device"}
    assert by_text["the blue-lamp"].availability == STATE_FILTERED
    assert by_text["the desk-lamp"].availability == "available"  # currently on
    assert by_text["the tv-plug"].availability == "available"


def test_delete_truncates_dependents(registry):
    g = derive_grammar(registry.snapshot())
    snap = registry.snapshot()
    draft = _draft(g, snap, "program", "Evening", "each time", "the DomiCube", "shows face")
    # delete the selector: the event (which depended on the kind) goes too
    point = InsertionPoint(token_index=3)
    new_draft, new_point = delete_at(draft, point, snap, grammar=g)
    assert [t.text for t in new_draft.tokens] == ["program", "Evening", "each time"]
    assert new_point.token_index == 3
    # the remaining draft still accepts continuations
    assert options(new_draft, new_point, snap, grammar=g)


def test_delete_on_empty_draft_is_noop(registry):
    g = derive_grammar(registry.snapshot())
    snap = registry.snapshot()
    draft, point = delete_at(Draft(), InsertionPoint(token_index=0), snap, grammar=g)
    assert draft.tokens == ()
    assert point.token_index == 0


def test_delete_header_clears_draft(registry):
    g = derive_grammar(registry.snapshot())
    snap = registry.snapshot()
    draft = _draft(g, snap, "program", "Evening")
    new_draft, _ = delete_at(draft, InsertionPoint(token_index=0), snap, grammar=g)
    assert new_draft.tokens == ()


def test_drafts_may_be_rule_deleted_below_save_validity(registry):
    # deleting the last rule leaves "program X": invalid to SAVE, fine to edit
    g = derive_grammar(registry.snapshot())
    snap = registry.snapshot()
    draft = _draft(g, snap, "program", "Evening", "each time", "the DomiCube")
    new_draft, point = delete_at(draft, InsertionPoint(token_index=2), snap, grammar=g)
    assert [t.text for t in new_draft.tokens] == ["program", "Evening"]
    assert options(new_draft, point, snap, grammar=g)


def test_invalid_insertion_point_rejected(registry):
    g = derive_grammar(registry.snapshot())
    snap = registry.snapshot()
    draft = _draft(g, snap, "program", "Evening")
    with pytest.raises(InvalidInsertionPointError):
        options(draft, InsertionPoint(token_index=1), snap, grammar=g)
    with pytest.raises(InvalidInsertionPointError):
        delete_at(draft, InsertionPoint(token_index=7), snap, grammar=g)


def test_insertion_point_context_names_enclosing_constructs(registry):
    g = derive_grammar(registry.snapshot())
    snap = registry.snapshot()
    draft = _draft(g, snap, "program", "Evening", "each time")
    point = current_point(draft, g)
    assert point.context[0] == "PROGRAM"
    assert any(c.startswith("RULE") for c in point.context)


@settings(max_examples=120, deadline=None)
@given(data=st.data())
def test_soundness_completeness_and_no_missing_devices(data):
    catalog = default_catalog()
    reg = data.draw(registries(catalog))
    snap = reg.snapshot()
    known = [("helper", "helper")]
    program = data.draw(programs(snap, known_programs=["helper"]))
    grammar = derive_grammar(snap, known_programs=known + [("generated", "generated")])
    sentence = render(program, grammar)
    cut = data.draw(st.integers(0, len(sentence)))
    draft = Draft(tokens=sentence[:cut])

    point = current_point(draft, grammar)
    offered = options(draft, point, snap, grammar=grammar)

    # soundness: every option, applied, re-parses as a prefix
    for opt in offered:
        new_draft, _ = apply_option(draft, point, opt, snap, grammar=grammar)
        analyze_prefix(new_draft.text(), grammar)

    # completeness: offered == brute-force valid continuations
    assert {o.token.terminal_key for o in offered} == brute_force_continuations(draft, grammar)

    # no option ever names a Missing device
    missing = {d.id for d in snap.descriptors if d.availability == MISSING}
    for opt in offered:
        if opt.category == "device":
            assert opt.token.value not in missing

    # deterministic ordering
    again = options(draft, point, snap, grammar=grammar)
    assert [o.token.terminal_key for o in again] == [o.token.terminal_key for o in offered]


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_edit_monotonicity(data):
    catalog = default_catalog()
    reg = data.draw(registries(catalog, max_devices=6))
    snap = reg.snapshot()
    grammar = derive_grammar(snap)
    draft = Draft()
    for _ in range(data.draw(st.integers(1, 8))):
        point = current_point(draft, grammar)
        offered = options(draft, point, snap, grammar=grammar)
        if not offered:
            break
        opt = data.draw(st.sampled_from(offered))
        new_draft, _ = apply_option(draft, point, opt, snap, grammar=grammar)
        assert len(new_draft.tokens) == len(draft.tokens) + 1
        draft = new_draft
    if draft.tokens:
        idx = data.draw(st.integers(0, len(draft.tokens) - 1))
        smaller, _ = delete_at(draft, InsertionPoint(token_index=idx), snap, grammar=grammar)
        assert len(smaller.tokens) < len(draft.tokens)
