import json
import socket

import httpx
import pytest

from conftest import PINNED
from mahedkit.corpus import GoldLabels, Record
from mahedkit.errors import ContractViolation, InputError, LabelParseError, MissingFixtureError, TransportError
from mahedkit.gateway import (TEMPLATES, HttpChatTransport, LlmPredictor, PredictorSpec, RawResponse,
                              RecordingTransport, ReplayTransport, SafetyAdapter, classify, interpret_safety_payload,
                              parse_label, render, safety_adapter_flag)


TEXT = Record("t1", "نص تجريبي", None, GoldLabels(task1="hope"))
MEME = Record("m1", "كلام الميم", "/tmp/meme.png", GoldLabels(meme_hate="hateful"))


def write_fixture(path, rows):
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")
    return path


def test_template_checksums_pinned():
    derived = {k: t.checksum for k, t in TEMPLATES.items() if t.paper_derived}
    assert derived == PINNED
    assert not TEMPLATES["hope_or_not"].paper_derived
    assert all(t.expected_labels for t in TEMPLATES.values())


def test_template_fragments():
    assert 'Text: "<your text here>"' in TEMPLATES["offensive_yes_no"].body
    assert "Final Answer: {hate/no hate}" in TEMPLATES["meme_prompt1"].body
    assert "no_hate" in TEMPLATES["meme_prompt3"].body
    assert "confidence" in TEMPLATES["emotion_12"].body


def test_render_substitutes_placeholder():
    payload = render("offensive_yes_no", Record("x1", "x", None, GoldLabels(emotion="joy", offensive="no")))
    assert 'Text: "x"' in payload["user"]
    assert payload["system"] is None and payload["image"] is None


def test_render_system_prompt_style():
    payload = render("task1_3class", TEXT)
    assert payload["system"] == TEMPLATES["task1_3class"].body
    assert payload["user"] == TEXT.text
    meme = render("meme_prompt2", MEME)
    assert meme["image"] == "/tmp/meme.png" and meme["user"] == MEME.text


def test_render_needs_image_and_is_stable():
    with pytest.raises(InputError):
        render("meme_prompt3", TEXT)
    assert render("emotion_12", TEXT) == render("emotion_12", TEXT)


@pytest.mark.parametrize("text,template,label,method", [
    ("yes", "offensive_yes_no", "yes", "exact"),
    ("  No.\n", "offensive_yes_no", "no", "exact"),
    ("Final Answer: {no hate}", "meme_prompt1", "not_hateful", "final_answer_extraction"),
    ("Analysis: {...}\nFinal Answer: {'hate'}", "meme_prompt2", "hateful", "final_answer_extraction"),
    ("no_hate", "meme_prompt3", "not_hateful", "exact"),
    ("**Not_applicable**", "task1_3class", "not_applicable", "exact"),
    ("The text is best described as: hope", "task1_3class", "hope", "normalized_match"),
    ("confidence", "emotion_12", "trust", "exact"),
    ("Answer: not_hate", "hate_not_hate", "not_hate", "normalized_match"),
    ("I said hate before.\nFinal Answer: {no hate}", "meme_prompt1", "not_hateful", "final_answer_extraction"),
])
def test_parse_examples(text, template, label, method):
    parsed = parse_label(RawResponse(text), TEMPLATES[template])
    assert (parsed.label, parsed.parse_method) == (label, method)
    assert parsed.label in TEMPLATES[template].expected_labels


@pytest.mark.parametrize("text,template", [
    ("It is both hate and no hate", "meme_prompt3"),
    ("", "offensive_yes_no"),
    ("I cannot decide", "task1_3class"),
    ("joy and anger", "emotion_12"),
])
def test_parse_errors_carry_raw_text(text, template):
    with pytest.raises(LabelParseError) as info:
        parse_label(text, template)
    assert info.value.raw_text == text


def test_replay_lookup_and_missing_key(tmp_path):
    path = write_fixture(tmp_path / "f.jsonl", [{"template": "meme_prompt3", "record_id": "m1", "response": "hate"}])
    spec = PredictorSpec(kind="replay", model_name="m", template_id="meme_prompt3", fixture_path=str(path))
    assert classify(MEME, spec).label == "hateful"
    with pytest.raises(MissingFixtureError):
        classify(Record("m2", "t", "/tmp/x.png", GoldLabels(meme_hate="hateful")), spec)


def test_spec_invariants():
    with pytest.raises(ValueError):
        PredictorSpec(kind="remote_chat", model_name="m", template_id="task1_3class")
    with pytest.raises(ValueError):
        PredictorSpec(kind="replay", model_name="m", template_id="task1_3class")
    with pytest.raises(ValueError):
        PredictorSpec(kind="replay", model_name="m", template_id="nope", fixture_path="x")


def chat_server(answers, seen):
    def handler(request):
        body = json.loads(request.content)
        seen.append(body)
        text = answers[body["messages"][-1]["content"] if isinstance(body["messages"][-1]["content"], str)
                       else body["messages"][-1]["content"][0]["text"]]
        return httpx.Response(200, json={"choices": [{"message": {"content": text}}]})
    return httpx.Client(transport=httpx.MockTransport(handler))


def test_record_then_replay_round_trip(tmp_path):
    records = [Record(f"r{i}", f"text {i}", None, GoldLabels(task1="hope")) for i in range(6)]
    answers = {r.text: a for r, a in zip(records, ["hope", "Hate.", "not_applicable", "**hope**", "hate", "Answer: hope"])}
    seen = []
    live = HttpChatTransport("http://llm.test/v1/chat/completions", "model-a", client=chat_server(answers, seen),
                             backoff=0.0)
    spec = PredictorSpec(kind="remote_chat", model_name="model-a", template_id="task1_3class",
                         endpoint="http://llm.test/v1/chat/completions")
    fixture = tmp_path / "rec.jsonl"
    recorded = [LlmPredictor(spec, RecordingTransport(live, fixture))(r).label for r in records]
    assert len(seen) == 6 and seen[0]["model"] == "model-a"
    replay = ReplayTransport(fixture)
    replayed = [LlmPredictor(spec, replay)(r).label for r in records]
    assert replayed == recorded == ["hope", "hate", "not_applicable", "hope", "hate", "hope"]
    assert replay.requests == 6 and len(seen) == 6


def test_http_retries_and_gives_up():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(500)

    t = HttpChatTransport("http://llm.test/v1", "m", client=httpx.Client(transport=httpx.MockTransport(handler)),
                          backoff=0.0)
    with pytest.raises(TransportError):
        t.send(render("task1_3class", TEXT))
    assert len(calls) == 3


def test_http_bearer_from_env(monkeypatch):
    seen = []

    def handler(request):
        seen.append(request.headers.get("authorization"))
        return httpx.Response(200, json={"choices": [{"message": {"content": "hope"}}]})

    monkeypatch.setenv("LLM_KEY", "k-123")
    t = HttpChatTransport("http://llm.test/v1", "m", client=httpx.Client(transport=httpx.MockTransport(handler)),
                          api_key_env="LLM_KEY")
    assert t.send(render("task1_3class", TEXT)).text == "hope"
    assert seen == ["Bearer k-123"]


def test_replay_makes_no_network_calls(tmp_path, monkeypatch, fixtures_dir):
    def forbidden(*a, **k):
        raise AssertionError("network access during replay")

    monkeypatch.setattr(socket, "create_connection", forbidden)
    monkeypatch.setattr(socket.socket, "connect", forbidden)
    path = fixtures_dir / "replay" / "task3_meme_prompt3.jsonl"
    transport = ReplayTransport(path)
    spec = PredictorSpec(kind="replay", model_name="m", template_id="meme_prompt3", fixture_path=str(path))
    first = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
    rec = Record(first["record_id"], "t", "/tmp/x.png", GoldLabels(meme_hate="hateful"))
    LlmPredictor(spec, transport)(rec)
    assert transport.requests == 1


@pytest.mark.parametrize("payload,policy,expected", [
    ({"flagged": True, "categories": {"hate": True}}, "hate_only", "flagged_hate"),
    ({"flagged": True, "categories": {"violence": True, "hate": False}}, "hate_only", "not_flagged"),
    ({"flagged": False}, "hate_only", "not_flagged"),
    ({"flagged": True, "categories": {"violence": True, "hate": False}}, "any_flag", "flagged_hate"),
    ({"results": [{"flagged": True, "categories": {"hate/threatening": True}}]}, "hate_only", "flagged_hate"),
    ("safe", "hate_only", "not_flagged"),
    ("unsafe\nS10", "hate_only", "flagged_hate"),
    ("unsafe\nS1,S2", "hate_only", "not_flagged"),
    ("unsafe\nS1", "any_flag", "flagged_hate"),
])
def test_safety_payloads(payload, policy, expected):
    assert interpret_safety_payload(payload, policy) == expected


@pytest.mark.parametrize("payload", [[1, 2], {"categories": {}}, {"flagged": "yes"}, "maybe", {"results": []}])
def test_malformed_safety_payload(payload):
    with pytest.raises(ContractViolation):
        interpret_safety_payload(payload)


def test_safety_adapter_replay(tmp_path):
    path = write_fixture(tmp_path / "s.jsonl", [
        {"template": "safety", "record_id": "m1", "response": json.dumps({"flagged": True, "categories": {"hate": True}})},
    ])
    spec = PredictorSpec(kind="replay", model_name="guard", template_id="safety", fixture_path=str(path))
    assert safety_adapter_flag(MEME, spec) == "flagged_hate"
    assert SafetyAdapter(spec, policy="any_flag").flag(MEME) == "flagged_hate"
