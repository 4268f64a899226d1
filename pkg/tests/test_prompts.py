"""Prompt construction: wording, example selection, plans, and probes."""

from __future__ import annotations

import json

import pytest

from gesturelab.corpus import GestureCategory
from gesturelab.errors import (
    InsufficientExamplesError,
    MissingGestureLabelError,
    ParseError,
    UnknownTargetError,
)
from gesturelab.prompts import (
    ExampleOrdering,
    ExamplePlan,
    ProbeKind,
    PromptTemplates,
    SpecLevel,
    build_fewshot,
    build_probe,
    build_zeroshot,
    render_label,
)


def test_spec_level_parse():
    assert SpecLevel.parse(" Category ") is SpecLevel.CATEGORY
    assert SpecLevel.parse("semantic-only") is SpecLevel.SEMANTIC_ONLY
    with pytest.raises(ParseError):
        SpecLevel.parse("vague")


def test_render_label_all_levels(mini_corpus):
    sweep = mini_corpus.get("tour-003")
    assert render_label(sweep, SpecLevel.CATEGORY) == "sweep"
    assert render_label(sweep, SpecLevel.PHYSICAL) == "sweep with palm facing down"
    assert render_label(sweep, SpecLevel.SEMANTIC_GESTURE) == "negative sweep"
    assert render_label(sweep, SpecLevel.SEMANTIC_ONLY) == "negative"
    span = mini_corpus.get("tour-001")
    assert render_label(span, SpecLevel.PHYSICAL) == "span"


def test_fewshot_parts_and_rendering(mini_corpus):
    bundle = build_fewshot(
        mini_corpus, "tour-006", SpecLevel.CATEGORY, ExamplePlan.per_category(1)
    )
    assert bundle.context_part == mini_corpus.context_statement
    assert len(bundle.example_parts) == 3
    first = mini_corpus.get("tour-001")
    assert bundle.example_parts[0] == (
        f'He said "{first.segment_text}" When he said "{first.trigger_phrase}", '
        'he used the following gesture: "span".'
    )
    target = mini_corpus.get("tour-006")
    assert bundle.target_part == (
        f'He said "{target.segment_text}" When he said "{target.trigger_phrase}", '
        "he used the following gesture: "
    )
    assert bundle.target_part.endswith(": ")
    assert bundle.rendered == "\n\n".join(
        [bundle.context_part, *bundle.example_parts, bundle.target_part]
    )


def test_fewshot_excludes_target_and_respects_corpus_order(reference_corpus):
    bundle = build_fewshot(
        reference_corpus, "dnc-001", SpecLevel.CATEGORY, ExamplePlan.per_category(2)
    )
    assert "dnc-001" not in bundle.example_ids
    # first two non-target annotations of each category, still in corpus order
    assert bundle.example_ids == (
        "dnc-002",
        "dnc-003",
        "dnc-004",
        "dnc-005",
        "dnc-007",
        "dnc-008",
    )


def test_fewshot_k_sizes(reference_corpus):
    for k, expected in ((2, 6), (4, 12), (6, 18)):
        bundle = build_fewshot(
            reference_corpus,
            "dnc-010",
            SpecLevel.CATEGORY,
            ExamplePlan.per_category(k),
        )
        assert len(bundle.example_parts) == expected


def test_leave_one_out_uses_all_other_annotations(reference_corpus):
    bundle = build_fewshot(
        reference_corpus, "dnc-005", SpecLevel.CATEGORY, ExamplePlan.leave_one_out()
    )
    assert len(bundle.example_ids) == 36
    assert set(bundle.example_ids) == {
        a.id for a in reference_corpus.annotations if a.id != "dnc-005"
    }


def test_seeded_shuffle_is_deterministic_and_seed_sensitive(reference_corpus):
    plan_a = ExamplePlan.per_category(2, seed=7, ordering=ExampleOrdering.SEEDED_SHUFFLE)
    plan_b = ExamplePlan.per_category(2, seed=7, ordering=ExampleOrdering.SEEDED_SHUFFLE)
    plan_c = ExamplePlan.per_category(2, seed=8, ordering=ExampleOrdering.SEEDED_SHUFFLE)
    one = build_fewshot(reference_corpus, "dnc-001", SpecLevel.CATEGORY, plan_a)
    two = build_fewshot(reference_corpus, "dnc-001", SpecLevel.CATEGORY, plan_b)
    three = build_fewshot(reference_corpus, "dnc-001", SpecLevel.CATEGORY, plan_c)
    assert one.rendered == two.rendered
    assert one.example_ids != three.example_ids


def test_labels_follow_spec_level(reference_corpus):
    bundle = build_fewshot(
        reference_corpus,
        "dnc-024",
        SpecLevel.SEMANTIC_GESTURE,
        ExamplePlan.per_category(2),
    )
    first_example_id = bundle.example_ids[0]
    ann = reference_corpus.get(first_example_id)
    assert f'"{ann.semantic_gesture}"' in bundle.example_parts[0]


def test_unknown_target_raises(mini_corpus):
    with pytest.raises(UnknownTargetError, match="tour-999"):
        build_fewshot(
            mini_corpus, "tour-999", SpecLevel.CATEGORY, ExamplePlan.per_category(1)
        )
    with pytest.raises(UnknownTargetError):
        build_zeroshot(mini_corpus, "tour-999")


def test_insufficient_examples_names_categories(mini_corpus):
    # mini corpus has two annotations per category, so removing the target
    # leaves its own category one short of k=2
    with pytest.raises(InsufficientExamplesError, match="span"):
        build_fewshot(
            mini_corpus, "tour-001", SpecLevel.CATEGORY, ExamplePlan.per_category(2)
        )


def test_k_applies_only_to_categories_in_the_pool(mini_corpus):
    # a corpus slice without containers: asking for k=1 must succeed with
    # examples from the categories that do exist
    spans_and_sweeps = [a for a in mini_corpus.annotations if a.category is not GestureCategory.CONTAINER]
    from gesturelab.corpus import Corpus

    corpus = Corpus(
        annotations=tuple(spans_and_sweeps),
        context_statement=mini_corpus.context_statement,
        name="slice",
        version="1",
    )
    bundle = build_fewshot(
        corpus, spans_and_sweeps[0].id, SpecLevel.CATEGORY, ExamplePlan.per_category(1)
    )
    assert len(bundle.example_ids) == 2


def test_plan_argument_validation():
    with pytest.raises(ValueError):
        ExamplePlan.per_category(0)
    with pytest.raises(ValueError):
        ExamplePlan(mode=ExamplePlan.leave_one_out().mode, k=3)


def test_zeroshot_has_no_examples_and_asks_directly(mini_corpus):
    bundle = build_zeroshot(mini_corpus, "tour-003")
    assert bundle.example_parts == ()
    target = mini_corpus.get("tour-003")
    assert bundle.rendered == (
        f"{mini_corpus.context_statement}\n\n"
        f'He said "{target.segment_text}" When he said "{target.trigger_phrase}", '
        "what gesture did he use?"
    )


def test_explain_and_next_probes_require_label():
    with pytest.raises(MissingGestureLabelError):
        build_probe(ProbeKind.EXPLAIN_GESTURE, context="c", utterance="u")
    bundle = build_probe(
        ProbeKind.EXPLAIN_GESTURE,
        context="A clinician is describing a treatment plan.",
        utterance='"all the options"',
        gesture_label="container",
    )
    assert bundle.rendered == (
        "A clinician is describing a treatment plan. "
        'She used a container gesture when she said "all the options".'
    )
    nxt = build_probe(
        ProbeKind.NEXT_GESTURE,
        context="A clinician is describing a treatment plan.",
        utterance="we will weigh them one by one",
        gesture_label="container",
    )
    assert nxt.rendered.endswith("after the container gesture.")


def test_visualize_probe_is_context_plus_question():
    bundle = build_probe(ProbeKind.VISUALIZE, context="She spread her hands apart.")
    assert bundle.rendered == (
        "She spread her hands apart.\n\nCan you visualize it in some way?"
    )


def test_opaque_label_completion_renders_bare_pairs():
    bundle = build_probe(
        ProbeKind.OPAQUE_LABEL_COMPLETION,
        context="Label the final line.",
        utterance="a really big idea",
        examples=(
            ("from start to finish", "lcg"),
            ("not a normal time", "ng"),
        ),
    )
    assert bundle.rendered == (
        "Label the final line.\n\n"
        "from start to finish lcg\n\n"
        "not a normal time ng\n\n"
        "a really big idea"
    )


def test_template_override_file(tmp_path, mini_corpus):
    override = tmp_path / "templates.json"
    override.write_text(
        json.dumps({"zeroshot": "For {trigger} in {segment}: which gesture?"}),
        encoding="utf-8",
    )
    templates = PromptTemplates.from_file(override)
    bundle = build_zeroshot(mini_corpus, "tour-001", templates)
    assert bundle.target_part.startswith("For from start to finish in")
    override.write_text(json.dumps({"bogus": "x"}), encoding="utf-8")
    with pytest.raises(ParseError, match="unknown template"):
        PromptTemplates.from_file(override)
