"""Prompt templates and the label vocabulary each one can produce."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from ..corpus import EMOTION_LABELS, Record
from ..errors import InputError

PLACEHOLDER = "<your text here>"


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str
    expected_labels: frozenset
    # surface form (as normalized by parsing.normalize) -> label
    surface_forms: dict = field(hash=False)
    needs_image: bool = False
    paper_derived: bool = True

    def __post_init__(self):
        if not self.expected_labels:
            raise ValueError("expected_labels must be non-empty")
        stray = set(self.surface_forms.values()) - set(self.expected_labels)
        if stray:
            raise ValueError(f"surface forms map to unknown labels {stray}")

    @property
    def checksum(self) -> str:
        return hashlib.sha256(self.body.encode("utf-8")).hexdigest()


TASK1_BODY = "Classify each text into one of the three categories 'hope','hate',or 'not_applicable'"

OFFENSIVE_BODY = """\
You are an expert in offensive language detection.
Carefully read the input text and determine whether it is offensive.
Respond with only one word, either "yes" if the text is offensive, or "no" if it is not.
Text: "<your text here>"
Answer:"""

HATE_TEXT_BODY = "Classify each text into one of the two categories 'hate', or 'not_hate'"

EMOTION_BODY = """\
You are an expert in fine-grained emotion classification.
Given a short piece of text, your task is to classify the **dominant emotion** expressed in the text.
Use **only one word** from the following list of predefined emotion categories:

[anger, disgust, neutral, love, joy, anticipation, optimism, sadness, confidence, pessimism, surprise, fear]
Carefully read the input and select the most appropriate emotion based on the **overall tone, context, and word choice**.
If multiple emotions are expressed, choose the one that is **most central** to the message.
Respond with only one word, exactly as listed.
Text: "<your text here>"
Answer:"""

MEME_PROMPT1_BODY = """\
You're an expert Arabic social media hate content analyst. Your goal is to flag any content that is derogatory, disparaging, promotes negative stereotypes, incites any form of harm (even humorously), or contributes to a hostile environment.
Provide the following for analysis:
Meme Description (Visuals): Detailed text description of all visual elements (characters, symbols, actions, etc.).
Meme Text (Arabic & English): Exact Arabic text and its literal English translation. Include any emojis/symbols.
Context: Explain who is targeted (individuals, groups, professions, etc.), relevant current events, cultural/historical references, and any known slang/derogatory terms.
User Intent (if known): Any information on the creator/sharer's likely purpose.
Analysis: {Your detailed reasoning, explaining how visuals, text, and context contribute to hate.
Focus on dehumanization, negative stereotypes, incitement (even if satirical), hostile environment creation, contempt, ridicule, disgust, targeting based on role, disparaging language (ableism, body shaming, etc.), and normalization of problematic behavior.}
Final Answer: {hate/no hate}"""

MEME_PROMPT2_BODY = """\
You are a hate speech analyst evaluating Arabic social media memes.
Your goal is to flag hate speech, including implicit hate masked as humor or political discourse.
Hate includes:
Stereotyping or mocking a group based on ethnicity, nationality, gender, religion, or identity Jokes or memes that promote harmful generalizations
Political content that blames or dehumanizes a people, not just a government or policy
However, you must not flag:
Political critique focused on leadership, government, or policy (not people)
Cultural observations or satire without negative generalization
Your analysis must:
Describe the image and interpret the Arabic text
Explain whether it includes group-based bias or stereotypes
End with:
Analysis: {your reasoning}
Final Answer: {'hate' or 'no hate'}"""

MEME_PROMPT3_BODY = """\
You are a hate speech analyst evaluating Arabic social media memes.
Your goal is to classify meme into hate or no_hate"""

# second-stage hope rescue; phrased like the hate/not_hate prompt
HOPE_OR_NOT_BODY = "Classify each text into one of the two categories 'hope', or 'not_applicable'"

_MEME_SURFACES = {
    "hate": "hateful", "hateful": "hateful",
    "no hate": "not_hateful", "not hate": "not_hateful",
    "not hateful": "not_hateful", "non hateful": "not_hateful",
}

TEMPLATES = {
    t.id: t for t in (
        PromptTemplate(
            "task1_3class", TASK1_BODY, frozenset({"hope", "hate", "not_applicable"}),
            {"hope": "hope", "hate": "hate", "not applicable": "not_applicable"},
        ),
        PromptTemplate(
            "offensive_yes_no", OFFENSIVE_BODY, frozenset({"yes", "no"}),
            {"yes": "yes", "no": "no"},
        ),
        PromptTemplate(
            "hate_not_hate", HATE_TEXT_BODY, frozenset({"hate", "not_hate"}),
            {"hate": "hate", "not hate": "not_hate"},
        ),
        PromptTemplate(
            "emotion_12", EMOTION_BODY, frozenset(EMOTION_LABELS),
            {**{e: e for e in EMOTION_LABELS}, "confidence": "trust"},
        ),
        PromptTemplate("meme_prompt1", MEME_PROMPT1_BODY, frozenset({"hateful", "not_hateful"}),
                       _MEME_SURFACES, needs_image=True),
        PromptTemplate("meme_prompt2", MEME_PROMPT2_BODY, frozenset({"hateful", "not_hateful"}),
                       _MEME_SURFACES, needs_image=True),
        PromptTemplate("meme_prompt3", MEME_PROMPT3_BODY, frozenset({"hateful", "not_hateful"}),
                       _MEME_SURFACES, needs_image=True),
        PromptTemplate(
            "hope_or_not", HOPE_OR_NOT_BODY, frozenset({"hope", "not_applicable"}),
            {"hope": "hope", "not applicable": "not_applicable", "not hope": "not_applicable"},
            paper_derived=False,
        ),
    )
}


def get_template(template_id: str) -> PromptTemplate:
    try:
        return TEMPLATES[template_id]
    except KeyError:
        raise ValueError(f"unknown template {template_id!r}; known: {', '.join(TEMPLATES)}") from None


def render(template: PromptTemplate | str, record: Record) -> dict:
    """Build the request payload for ``record``.

    Templates with a ``<your text here>`` slot become one user message;
    the others are sent as the system message with the text as the user
    message. Meme templates attach the image reference.
    """
    if isinstance(template, str):
        template = get_template(template)
    if not record.text:
        raise InputError(f"record {record.id!r} has no text for template {template.id}")
    if template.needs_image and not record.image_ref:
        raise InputError(f"template {template.id} needs an image; record {record.id!r} has none")
    if PLACEHOLDER in template.body:
        system, user = None, template.body.replace(PLACEHOLDER, record.text)
    else:
        system, user = template.body, record.text
    return {
        "template": template.id,
        "record_id": record.id,
        "system": system,
        "user": user,
        "image": record.image_ref if template.needs_image else None,
    }


def payload_bytes(payload: dict) -> bytes:
    return json.dumps(payload, ensure_ascii=False, sort_keys=True).encode("utf-8")
