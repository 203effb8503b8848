import json

import pytest

from vizforge.errors import (
    GatewayUnavailableError,
    JudgeFormatError,
    PreconditionError,
    TemplateError,
)
from vizforge.gateway import (
    Gateway,
    GatewayRequest,
    StubGateway,
    TransportError,
    _parse_and_validate,
)


class FlakyGateway(Gateway):
    def __init__(self, failures, **kw):
        super().__init__(**kw)
        self.failures = failures
        self.calls = 0

    def _call(self, prompt, request):
        self.calls += 1
        if self.calls <= self.failures:
            raise TransportError("503")
        return "ok"


def req(template_id="evolve", **variables):
    defaults = {"instruction": "i", "code": "c", "concept": "k", "feedback": ""}
    defaults.update(variables)
    return GatewayRequest(role="synthesizer", template_id=template_id, variables=defaults)


class TestComplete:
    def test_stub_is_deterministic(self):
        g = StubGateway()
        assert g.complete(req()) == g.complete(req())
        assert g.complete(req(concept="a")) != g.complete(req(concept="b"))

    def test_missing_placeholder_is_template_error(self):
        g = StubGateway()
        bad = GatewayRequest(role="synthesizer", template_id="evolve", variables={"code": "c"})
        with pytest.raises(TemplateError):
            g.complete(bad)

    def test_unknown_template(self):
        with pytest.raises(TemplateError):
            StubGateway().complete(
                GatewayRequest(role="synthesizer", template_id="does_not_exist")
            )

    def test_retries_exhausted(self):
        g = FlakyGateway(failures=3, retries=2)
        with pytest.raises(GatewayUnavailableError):
            g.complete(req())

    def test_transient_failure_recovers(self):
        g = FlakyGateway(failures=2, retries=2)
        assert g.complete(req()) == "ok"

    def test_vision_judge_needs_attachments(self):
        r = GatewayRequest(role="vision_judge", template_id="judge_edit", variables={"instruction": "x"})
        with pytest.raises(PreconditionError):
            StubGateway().complete(r)

    def test_call_log_has_attribution_quadruples(self, tmp_path):
        log = tmp_path / "calls.jsonl"
        g = StubGateway(call_log=log, run_id="run-1")
        g.complete(req(), task_id="t-1")
        g.complete(req(concept="other"), task_id="t-2")
        entries = [json.loads(l) for l in log.read_text().splitlines()]
        assert len(entries) == 2
        for e in entries:
            assert e["run_id"] == "run-1"
            assert e["task_id"]
            assert len(e["request_hash"]) == 64
            assert len(e["response_hash"]) == 64


SCHEMA = {
    "code_similarity": {"score": "int:1:5", "reasoning": "str"},
    "instruction_alignment": {"score": "int:1:5", "reasoning": "str"},
}


class TestStructuredParsing:
    def test_valid_single_line(self):
        text = '{"code_similarity":{"score":4,"reasoning":"r"},"instruction_alignment":{"score":5,"reasoning":"r"}}'
        obj = _parse_and_validate(text, SCHEMA, strict_mode=True)
        assert obj["code_similarity"]["score"] == 4

    def test_fenced_json_tolerated_only_when_lenient(self):
        fenced = (
            "```json\n"
            '{"code_similarity":{"score":4,"reasoning":"r"},"instruction_alignment":{"score":5,"reasoning":"r"}}\n'
            "```"
        )
        obj = _parse_and_validate(fenced, SCHEMA, strict_mode=False)
        assert obj["instruction_alignment"]["score"] == 5
        with pytest.raises(JudgeFormatError):
            _parse_and_validate(fenced, SCHEMA, strict_mode=True)

    def test_out_of_range_score_rejected(self):
        text = '{"code_similarity":{"score":6,"reasoning":"r"},"instruction_alignment":{"score":5,"reasoning":"r"}}'
        with pytest.raises(JudgeFormatError):
            _parse_and_validate(text, SCHEMA, strict_mode=True)
        text0 = text.replace('"score":6', '"score":0')
        with pytest.raises(JudgeFormatError):
            _parse_and_validate(text0, SCHEMA, strict_mode=True)

    def test_numeric_strings_coerced(self):
        text = '{"code_similarity":{"score":"3","reasoning":"r"},"instruction_alignment":{"score":"5","reasoning":"r"}}'
        obj = _parse_and_validate(text, SCHEMA, strict_mode=False)
        assert obj["code_similarity"]["score"] == 3

    def test_missing_key_rejected(self):
        with pytest.raises(JudgeFormatError):
            _parse_and_validate('{"code_similarity":{"score":3,"reasoning":"r"}}', SCHEMA, False)


class TestJudgeStructured:
    def test_reask_then_persistent_failure(self):
        g = StubGateway(canned={"judge_bench": '{"bad": 1}'})
        r = GatewayRequest(
            role="text_judge",
            template_id="judge_bench",
            variables={"instruction": "i", "reference_code": "a", "generated_code": "b"},
        )
        with pytest.raises(JudgeFormatError):
            g.judge_structured(r, SCHEMA, strict_mode=True)

    def test_reask_salvages_transient_drift(self):
        responses = iter(
            [
                "sorry, here it is:\nnot json",
                '{"code_similarity":{"score":2,"reasoning":"r"},"instruction_alignment":{"score":3,"reasoning":"r"}}',
            ]
        )
        g = StubGateway(canned={"judge_bench": lambda request: next(responses)})
        r = GatewayRequest(
            role="text_judge",
            template_id="judge_bench",
            variables={"instruction": "i", "reference_code": "a", "generated_code": "b"},
        )
        obj = g.judge_structured(r, SCHEMA, strict_mode=True)
        assert obj["code_similarity"]["score"] == 2

    def test_stub_judge_output_parses(self):
        g = StubGateway()
        r = GatewayRequest(
            role="text_judge",
            template_id="judge_bench",
            variables={"instruction": "i", "reference_code": "a", "generated_code": "b"},
        )
        obj = g.judge_structured(r, SCHEMA, strict_mode=True)
        assert 1 <= obj["code_similarity"]["score"] <= 5
