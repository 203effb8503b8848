import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_config, make_record

from vizforge.errors import (
    EdgeError,
    MalformedGenerationError,
    PlanningError,
    PreconditionError,
    SnippetError,
)
from vizforge.gateway import StubGateway
from vizforge.synthesis import (
    evolve,
    parse_sections,
    plan_tasks,
    recontextualize,
    reverse_instruct,
    sample_snippet,
    translate,
)

EDGES = [("animation", "mathematica"), ("scientific-pl", "mathematica")]


@pytest.fixture
def stub():
    return StubGateway()


class TestParseSections:
    def test_round_trip(self):
        text = "[Problem Description]\ndo the thing\n[Code Solution]\n```python\nx = 1\n```"
        instruction, code = parse_sections(text)
        assert instruction == "do the thing"
        assert code == "x = 1"

    def test_unfenced_code_accepted(self):
        text = "[Problem Description]\np\n[Code Solution]\nx = 2"
        assert parse_sections(text) == ("p", "x = 2")

    def test_missing_marker_rejected(self):
        with pytest.raises(MalformedGenerationError):
            parse_sections("just prose, no sections")

    def test_reordered_markers_rejected(self):
        with pytest.raises(MalformedGenerationError):
            parse_sections("[Code Solution]\nx\n[Problem Description]\np")


class TestPlanTasks:
    def test_only_marked_cells(self, tmp_path):
        config = make_config(tmp_path)
        records = [make_record("mathematica", code="x\n" * 20, instruction="do")]
        tasks = plan_tasks(config, records)
        strategies = {t.strategy for t in tasks}
        # mathematica row: evolution + reverse + translation, never recontextualization
        assert "recontextualization" not in strategies
        assert strategies <= {
            "guided_evolution",
            "reverse_instruction",
            "bidirectional_translation",
        }

    def test_empty_records(self, tmp_path):
        assert plan_tasks(make_config(tmp_path), []) == []

    def test_unknown_source_type_is_planning_error(self, tmp_path):
        config = make_config(tmp_path)
        bad = make_record()
        bad.source_type = "unknown"
        with pytest.raises(PlanningError):
            plan_tasks(config, [bad])

    def test_deterministic_given_seed(self, tmp_path):
        config = make_config(tmp_path)
        records = [make_record(instruction=f"t{i}", code=f"c{i}") for i in range(10)]
        a = [t.task_id for t in plan_tasks(config, records)]
        b = [t.task_id for t in plan_tasks(config, records)]
        assert a == b

    def test_quota_respected(self, tmp_path):
        config = make_config(tmp_path)
        config.matrix["matplotlib"].quota = 3
        records = [make_record(instruction=f"t{i}", code=f"c{i}") for i in range(10)]
        tasks = plan_tasks(config, records)
        per_cell = {}
        for t in tasks:
            per_cell[t.strategy] = per_cell.get(t.strategy, 0) + 1
        assert all(v <= 3 for v in per_cell.values())


class TestEvolve:
    def test_lineage_contract(self, stub):
        seed = make_record()
        draft = evolve(stub, seed, "bar chart")
        assert draft.lineage.parents == [seed.record_id]
        assert draft.lineage.concept == "bar chart"
        assert draft.lineage.strategy == "guided_evolution"
        assert draft.lineage.generation_depth == 1

    def test_feedback_reaches_rendered_prompt(self, stub):
        seen = {}

        def spy(request):
            seen["prompt"] = stub.render(request.template_id, request.variables)
            return "[Problem Description]\np\n[Code Solution]\nx=1"

        g = StubGateway(canned={"evolve": spy})
        evolve(g, make_record(), "bar chart", feedback="NameError line 3")
        assert "NameError line 3" in seen["prompt"]

    def test_code_only_seed_rejected(self, stub):
        with pytest.raises(PreconditionError):
            evolve(stub, make_record(fmt="CodeOnly"), "bar chart")

    def test_empty_concept_rejected(self, stub):
        with pytest.raises(PreconditionError):
            evolve(stub, make_record(), "")

    def test_malformed_output_rejected(self):
        g = StubGateway(canned={"evolve": "no sections here"})
        with pytest.raises(MalformedGenerationError):
            evolve(g, make_record(), "bar chart")


class TestRecontextualize:
    def test_code_preserved_byte_identical(self, stub):
        seed = make_record(code="x = 1\ny = x + 1\n")
        draft = recontextualize(stub, seed)
        assert draft.code == seed.code
        assert draft.instruction != seed.instruction

    def test_modified_code_overwritten_and_logged(self, caplog):
        g = StubGateway(
            canned={
                "recontextualize": "[Problem Description]\nnew text\n[Code Solution]\nTAMPERED"
            }
        )
        seed = make_record(code="original")
        with caplog.at_level("WARNING"):
            draft = recontextualize(g, seed)
        assert draft.code == "original"
        assert "overwriting" in caplog.text

    def test_echoed_instruction_rejected_as_noop(self):
        seed = make_record(instruction="same words")
        g = StubGateway(
            canned={
                "recontextualize": "[Problem Description]\nsame words\n[Code Solution]\n"
                + seed.code
            }
        )
        with pytest.raises(MalformedGenerationError):
            recontextualize(g, seed)

    def test_code_only_seed_rejected(self, stub):
        with pytest.raises(PreconditionError):
            recontextualize(stub, make_record(fmt="CodeOnly"))

    @settings(max_examples=30, deadline=None)
    @given(code=st.text(min_size=1, max_size=200))
    def test_property_code_always_preserved(self, code):
        seed = make_record(code=code)
        draft = recontextualize(StubGateway(), seed)
        assert draft.code == seed.code


class TestSampleSnippet:
    def test_k_equals_all_nonblank_lines(self):
        code = "a\n\nb\nc\n"
        snippet, span = sample_snippet(code, 3, rng_seed=0)
        assert snippet == "a\nb\nc"
        assert span == (1, 4)

    def test_deterministic_for_seed(self):
        code = "\n".join(f"line{i}" for i in range(50))
        assert sample_snippet(code, 5, 42) == sample_snippet(code, 5, 42)
        spans = {sample_snippet(code, 5, s)[1] for s in range(20)}
        assert len(spans) > 1

    def test_k_too_large(self):
        with pytest.raises(SnippetError):
            sample_snippet("a\nb\n", 3, 0)

    def test_k_below_one(self):
        with pytest.raises(PreconditionError):
            sample_snippet("a\nb\n", 0, 0)


class TestReverseInstruct:
    def test_snippet_span_recorded(self, stub):
        ref = make_record(fmt="CodeOnly", code="\n".join(f"l{i}" for i in range(30)))
        draft = reverse_instruct(stub, ref, k=5, rng_seed=3)
        span = draft.strategy_metadata["snippet_span"]
        assert span[1] - span[0] + 1 >= 5
        assert draft.lineage.strategy == "reverse_instruction"
        assert draft.lineage.parents == [ref.record_id]

    def test_deterministic(self, stub):
        ref = make_record(fmt="CodeOnly", code="\n".join(f"l{i}" for i in range(30)))
        a = reverse_instruct(stub, ref, 5, 11)
        b = reverse_instruct(stub, ref, 5, 11)
        assert a.strategy_metadata == b.strategy_metadata
        assert a.instruction == b.instruction


class TestTranslate:
    def test_reverse_edge_accepted(self, stub):
        seed = make_record("mathematica", code="f[x]", instruction="plot f")
        # only (animation -> mathematica) is configured; reverse direction works
        draft = translate(stub, seed, "animation", EDGES)
        assert draft.source_type == "animation"
        assert draft.lineage.parents == [seed.record_id]
        assert draft.lineage.strategy == "bidirectional_translation"

    def test_unconfigured_edge_rejected(self, stub):
        seed = make_record("svg", code="<svg/>", instruction="draw")
        with pytest.raises(EdgeError):
            translate(stub, seed, "algorithm", EDGES)

    def test_code_only_seed_rejected(self, stub):
        seed = make_record("animation", fmt="CodeOnly", code="x")
        with pytest.raises(PreconditionError):
            translate(stub, seed, "mathematica", EDGES)
