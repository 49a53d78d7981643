"""Boundary to the completion service, plus a deterministic offline stub.

Builds task prompts, calls a pluggable transport (HTTP, or record/replay
from a fixture file), validates completions against each task's predicate
grammar, and renders bot responses from predicates. Raw completions are
never evaluated as rules: only whitelisted predicate names with
vocabulary-checked arguments ever reach a program.
"""

from __future__ import annotations

import hashlib
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence, Union

import requests

from .algebra import AlgebraProblem, parse_facts
from .concierge import (
    ATTRIBUTES,
    DETAIL_FIELDS,
    END_PREDICATE,
    Ask,
    BotAction,
    Close,
    ConversationState,
    ExtractedPredicate,
    Fail,
)
from .errors import DataError, ExtractionError, TransportError
from .quarel import QrelForm, parse_logical_form

TASKS = ("quarel", "algebra", "concierge-extract", "concierge-respond")

GREETING = "Hi, what can I assist you with?"

Predicates = Union[QrelForm, AlgebraProblem, tuple[ExtractedPredicate, ...]]


# --- concierge predicate grammar ------------------------------------------------

_PREDICATE_WHITELIST = ATTRIBUTES + DETAIL_FIELDS + ("prefer", END_PREDICATE)

_VALUE_SYNONYMS = {
    "priceRange": {
        "cheap": "cheap", "low": "cheap", "inexpensive": "cheap",
        "moderate": "moderate", "average": "moderate", "medium": "moderate",
        "high": "high", "expensive": "high", "pricey": "high", "premium": "high",
    },
    "customerRating": {
        "low": "low", "bad": "low",
        "average": "average", "mixed": "average", "medium": "average",
        "high": "high", "top": "high", "excellent": "high",
    },
    "typeToEat": {
        "restaurant": "restaurant",
        "coffee shop": "coffee shop", "cafe": "coffee shop", "coffeehouse": "coffee shop",
        "pub": "pub", "bar": "pub",
    },
    "familyFriendly": {
        "yes": "yes", "kid-friendly": "yes", "family-friendly": "yes",
        "no": "no",
    },
}

_DONT_CARE = {"any", "anything", "don't care", "dont care", "don't mind", "no preference"}

_PREDICATE_RE = re.compile(r"([A-Za-z][A-Za-z-]*)\(")


def canonical_value(attribute: str, raw: str) -> str:
    """Map an extractor value onto the closed vocabulary; DataError if unknown."""
    value = raw.strip()
    lowered = value.lower()
    if lowered in ("query",):
        return "query"
    if lowered in _DONT_CARE:
        return "any"
    if attribute in _VALUE_SYNONYMS:
        mapped = _VALUE_SYNONYMS[attribute].get(lowered)
        if mapped is None:
            raise DataError(f"value {raw!r} is not in the {attribute} vocabulary")
        return mapped
    if attribute in ("cuisine", "prefer"):
        return lowered
    return value  # restaurant-name, address, phoneNumber keep their text


def parse_concierge_predicates(text: str) -> tuple[ExtractedPredicate, ...]:
    """Parse ``name(arg)``/``name([a, b])`` lists with vocabulary validation."""
    stripped = text.strip().rstrip(".")
    if not stripped:
        raise DataError("empty predicate text")
    predicates: list[ExtractedPredicate] = []
    pos = 0
    while pos < len(stripped):
        m = _PREDICATE_RE.search(stripped, pos)
        if m is None:
            if stripped[pos:].strip(" ,"):
                raise DataError(f"cannot parse predicates at {stripped[pos:]!r}")
            break
        name = m.group(1)
        if name not in _PREDICATE_WHITELIST:
            raise DataError(f"predicate {name!r} is not in the vocabulary")
        depth = 1
        i = m.end()
        while i < len(stripped) and depth:
            if stripped[i] == "(":
                depth += 1
            elif stripped[i] == ")":
                depth -= 1
            i += 1
        if depth:
            raise DataError(f"unbalanced parentheses in {stripped!r}")
        inner = stripped[m.end() : i - 1].strip()
        is_list = inner.startswith("[") and inner.endswith("]")
        raw_values = [v.strip() for v in (inner[1:-1] if is_list else inner).split(",")]
        raw_values = [v for v in raw_values if v]
        if not raw_values:
            raise DataError(f"predicate {name} has no arguments")
        if name == END_PREDICATE:
            predicates.append(ExtractedPredicate(name, ("now",)))
        else:
            values = tuple(canonical_value(name, v) for v in raw_values)
            predicates.append(ExtractedPredicate(name, values, is_list or len(values) > 1))
        pos = i
    if not predicates:
        raise DataError(f"no predicates in {text!r}")
    return tuple(predicates)


def serialize_concierge_predicates(predicates: Sequence[ExtractedPredicate]) -> str:
    return ", ".join(p.text() for p in predicates)


# --- prompt templates ------------------------------------------------------------


@dataclass(frozen=True)
class PromptTemplate:
    task: str
    context_examples: tuple[tuple[str, str], ...] = ()
    separator: str = "\n\n##\n\n"
    stop_token: str = "<EOS>"

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.task == "quarel":
            if self.separator != "\n\n##\n\n" or self.stop_token != "<EOS>":
                raise ValueError("quarel templates use separator '\\n\\n##\\n\\n' and stop '<EOS>'")
        if self.task == "concierge-extract":
            if len(self.context_examples) < 11:
                raise ValueError("concierge extraction needs at least 11 context examples")
            names: set[str] = set()
            for _inp, out in self.context_examples:
                for predicate in parse_concierge_predicates(out):
                    names.add(predicate.name)
            missing = set(_PREDICATE_WHITELIST) - {END_PREDICATE} - names
            if missing:
                raise ValueError(f"context examples never show: {sorted(missing)}")


def quarel_input(question: str, world1: str, world2: str) -> str:
    return f"{question}\nworld1: {world1}\nworld2: {world2}"


def concierge_input(sentence: str) -> str:
    return f"Sentence: {sentence}"


def build_prompt(t: PromptTemplate, input_text: str) -> str:
    """Join context examples and the formatted input, byte-deterministically."""
    parts: list[str] = []
    for example_input, example_output in t.context_examples:
        parts.append(example_input + t.separator + example_output + " " + t.stop_token + "\n\n")
    parts.append(input_text + t.separator)
    return "".join(parts)


_CONCIERGE_EXTRACT_EXAMPLES: tuple[tuple[str, str], ...] = tuple(
    (concierge_input(sentence), output)
    for sentence, output in (
        (
            "Fitzbillies coffee shop provides a kid-friendly venue for Chinese food "
            "at an average price point in the riverside area. It is highly rated by customers.",
            "restaurant-name(Fitzbillies), typeToEat(coffee shop), cuisine(Chinese), "
            "priceRange(moderate), customerRating(high), familyFriendly(yes)",
        ),
        (
            "Can you find a place for food at a low price? Both English and French "
            "cuisine is fine for me.",
            "restaurant-name(query), cuisine([English, French]), priceRange(cheap)",
        ),
        (
            "Can you help me find a place for food with curry? I don't want a pricey one.",
            "restaurant-name(query), prefer(curry), priceRange([cheap, moderate])",
        ),
        ("No, I don't mind the rating.", "customerRating(any)"),
        ("A normal restaurant.", "typeToEat(restaurant)"),
        ("No. Just for myself.", "familyFriendly(no)"),
        (
            "How about one with a high price? But it should be then at least above "
            "average quality.",
            "priceRange(high), customerRating([average, high])",
        ),
        ("Yes, that's what I need! Tell me where it is.", "address(query)"),
        ("What is their phone number?", "phoneNumber(query)"),
        (
            "I want a family-friendly pub with moderate prices.",
            "typeToEat(pub), priceRange(moderate), familyFriendly(yes)",
        ),
        (
            "I'd like a cheap Japanese restaurant, a low customer rating is fine.",
            "typeToEat(restaurant), cuisine(Japanese), priceRange(cheap), customerRating(low)",
        ),
        (
            "Tell me the address and phone number of The Rice Boat.",
            "restaurant-name(The Rice Boat), address(query), phoneNumber(query)",
        ),
    )
)

_CONCIERGE_RESPOND_EXAMPLES: tuple[tuple[str, str], ...] = (
    ("action(fail)", "Unfortunately, we cannot provide the results to your request."),
    (
        "action(ask), attribute(customerRating)",
        "Are you looking for a place with a specific customer rating?",
    ),
    (
        "action(recommend), restaurant-name(The Rice Boat), cuisine(Thai), priceRange(high), "
        "customerRating(average), familyFriendly(no), address(901 Bangkok Road)",
        "The Rice Boat, located on 901 Bangkok Road, has an average customer rating and "
        "offers Thai cuisine at a high price. Unfortunately, it is not suitable for children.",
    ),
    ("action(close)", "It's no problem, I'm happy to assist."),
)

_ALGEBRA_EXAMPLES: tuple[tuple[str, str], ...] = (
    (
        "Joan found 70 seashells on the beach. Joan gave Sam some of her seashells. "
        "Joan has 27 seashells left. How many seashells did Joan give to Sam?",
        "has(joan,70,0,k). transfer(joan,sam,X,1,q). has(joan,27,2,k).",
    ),
    (
        "Sam had 5 apples. Joan gave Sam 3 apples. How many apples does Sam have now?",
        "has(sam,5,0,k). transfer(joan,sam,3,1,k). has(sam,X,2,q).",
    ),
    (
        "Joan has 2 books. Sam has 3 books. How many books do they have in total?",
        "has(joan,2,0,k). has(sam,3,1,k). total(both,X,2,q).",
    ),
)


def default_template(task: str) -> PromptTemplate:
    if task == "quarel":
        return PromptTemplate("quarel")
    if task == "algebra":
        return PromptTemplate("algebra", _ALGEBRA_EXAMPLES, separator="\nPredicates: ")
    if task == "concierge-extract":
        return PromptTemplate(
            "concierge-extract", _CONCIERGE_EXTRACT_EXAMPLES, separator="\nPredicates: "
        )
    if task == "concierge-respond":
        return PromptTemplate(
            "concierge-respond", _CONCIERGE_RESPOND_EXAMPLES, separator="\nResponse: "
        )
    raise ValueError(f"unknown task {task!r}")


# --- transports -------------------------------------------------------------------


@dataclass
class ExtractorConfig:
    mode: str = "stub"  # llm | stub | gold
    endpoint: str = ""
    model_id: str = ""
    api_key_env: str = "STAR_API_KEY"
    temperature: float = 0.0
    max_retries: int = 3
    timeout: float = 30.0
    max_tokens: int = 256
    completion_path: str = "choices.0.text"
    max_requests_per_minute: float | None = None
    request_fields: dict[str, str] = field(
        default_factory=lambda: {
            "model": "model",
            "prompt": "prompt",
            "stop": "stop",
            "temperature": "temperature",
            "max_tokens": "max_tokens",
        }
    )

    def validate(self) -> None:
        if self.mode not in ("llm", "stub", "gold"):
            raise DataError(f"unknown extractor mode {self.mode!r}")
        if self.mode == "llm":
            if not self.endpoint:
                raise DataError("llm mode needs an endpoint")
            if not os.environ.get(self.api_key_env):
                raise DataError(f"llm mode needs the {self.api_key_env} environment variable")


def request_hash(cfg: ExtractorConfig, prompt: str, stop: str) -> str:
    payload = "\x1f".join([cfg.model_id, stop, repr(cfg.temperature), prompt])
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Transport(Protocol):
    def complete(self, cfg: ExtractorConfig, prompt: str, stop: str) -> str: ...


class HttpTransport:
    """Plain completion POST; field names and the completion path come from config."""

    def __init__(self) -> None:
        self._last_request: dict[str, float] = {}
        self._lock = threading.Lock()

    def _throttle(self, cfg: ExtractorConfig) -> None:
        if not cfg.max_requests_per_minute:
            return
        interval = 60.0 / cfg.max_requests_per_minute
        with self._lock:
            now = time.monotonic()
            wait = self._last_request.get(cfg.endpoint, -interval) + interval - now
            if wait > 0:
                time.sleep(wait)
                now = time.monotonic()
            self._last_request[cfg.endpoint] = now

    def complete(self, cfg: ExtractorConfig, prompt: str, stop: str) -> str:
        self._throttle(cfg)
        payload = {
            cfg.request_fields["model"]: cfg.model_id,
            cfg.request_fields["prompt"]: prompt,
            cfg.request_fields["stop"]: stop,
            cfg.request_fields["temperature"]: cfg.temperature,
            cfg.request_fields["max_tokens"]: cfg.max_tokens,
        }
        headers = {}
        key = os.environ.get(cfg.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            response = requests.post(cfg.endpoint, json=payload, headers=headers, timeout=cfg.timeout)
            response.raise_for_status()
            data = response.json()
        except requests.RequestException as exc:
            raise TransportError(f"completion request failed: {exc}") from exc
        node = data
        try:
            for step in cfg.completion_path.split("."):
                node = node[int(step)] if step.isdigit() else node[step]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"no completion at {cfg.completion_path!r}") from exc
        if not isinstance(node, str):
            raise TransportError("completion is not text")
        return node


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def _unescape(text: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(text):
        if text[i] == "\\" and i + 1 < len(text):
            out.append({"n": "\n", "t": "\t", "\\": "\\"}.get(text[i + 1], text[i + 1]))
            i += 2
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


class ReplayTransport:
    """Serve completions from an ordered (request hash, completion) fixture."""

    def __init__(self, path: str | Path) -> None:
        self.entries: list[tuple[str, str]] = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            digest, completion = line.split("\t", 1)
            self.entries.append((digest, _unescape(completion)))
        self.cursor = 0

    def complete(self, cfg: ExtractorConfig, prompt: str, stop: str) -> str:
        if self.cursor >= len(self.entries):
            raise TransportError("replay fixture exhausted")
        digest, completion = self.entries[self.cursor]
        expected = request_hash(cfg, prompt, stop)
        if digest != expected:
            raise TransportError(f"replay mismatch: fixture {digest[:12]}, request {expected[:12]}")
        self.cursor += 1
        return completion


class RecordingTransport:
    """Wrap a transport and append every exchange to a replay fixture."""

    def __init__(self, inner: Transport, path: str | Path) -> None:
        self.inner = inner
        self.path = Path(path)

    def complete(self, cfg: ExtractorConfig, prompt: str, stop: str) -> str:
        completion = self.inner.complete(cfg, prompt, stop)
        with open(self.path, "a", encoding="utf-8") as handle:
            handle.write(f"{request_hash(cfg, prompt, stop)}\t{_escape(completion)}\n")
        return completion


# --- stub extraction ---------------------------------------------------------------

_QREL_STUB_RE = re.compile(r"(\w+) is (higher|lower) in (world[12])", re.IGNORECASE)

_CUISINES = (
    "indian", "thai", "chinese", "mexican", "english", "french", "italian", "japanese",
)

_PREFERENCE_WORDS = ("curry", "spicy")


def _stub_quarel(input_text: str) -> str:
    triples = _QREL_STUB_RE.findall(input_text)
    if len(triples) < 3:
        raise ExtractionError(f"cannot read a comparison question from {input_text!r}")
    obs, opt_a, opt_b = triples[0], triples[1], triples[2]

    def atom(t: tuple[str, str, str]) -> str:
        # property names are camelCase in the table; only value/world fold
        return f"qrel({t[0]}, {t[1].lower()}, {t[2].lower()})"

    return f"{atom(obs)} -> {atom(opt_a)} ; {atom(opt_b)}"


def _stub_concierge(input_text: str) -> str:
    text = input_text
    if text.startswith("Sentence: "):
        text = text[len("Sentence: ") :]
    lowered = text.lower()
    found: dict[str, str] = {}

    if re.search(r"\b(thank|thanks|bye|goodbye)\b", lowered):
        return f"{END_PREDICATE}(now)"

    if re.search(r"\b(find|looking for|recommend|place for food|place to eat|help me)\b", lowered):
        found["restaurant-name"] = "query"
    name_match = re.search(
        r"(?:of |at )?((?:[A-Z][\w']*\s)+)(?=coffee shop|restaurant|pub)", text
    )
    if name_match:
        candidate = name_match.group(1).strip()
        if candidate.lower() not in ("a", "the", "a normal", "any"):
            found["restaurant-name"] = candidate
    lookup = re.search(r"(?:of|at|about)\s+((?:The\s)?(?:[A-Z][\w']*\s?)+)[.?!]?$", text)
    if lookup and "restaurant-name" not in found:
        found["restaurant-name"] = lookup.group(1).strip().rstrip(".?!")

    prefers = [w for w in _PREFERENCE_WORDS if re.search(rf"\b{w}\b", lowered)]
    if prefers:
        found["prefer"] = ", ".join(prefers)

    if "coffee shop" in lowered or "cafe" in lowered:
        found["typeToEat"] = "coffee shop"
    elif re.search(r"\bpub\b|\bbar\b", lowered):
        found["typeToEat"] = "pub"
    elif re.search(r"\brestaurant\b", lowered):
        found["typeToEat"] = "restaurant"

    cuisines = [c for c in _CUISINES if re.search(rf"\b{c}\b", lowered)]
    if cuisines:
        found["cuisine"] = ", ".join(c.title() for c in cuisines)

    if re.search(r"(don'?t|do not|not?).{0,24}(pricey|expensive|premium|high price)", lowered):
        found["priceRange"] = "[cheap, moderate]"
    elif re.search(r"high(er)? price|pricey|expensive|premium|high cost", lowered):
        found["priceRange"] = "high"
    elif re.search(r"low(er)? price|cheap|inexpensive", lowered):
        found["priceRange"] = "cheap"
    elif re.search(r"average price|moderate|medium price", lowered):
        found["priceRange"] = "moderate"

    if re.search(r"(don'?t (mind|care)|any).{0,16}(rating|quality)", lowered):
        found["customerRating"] = "any"
    elif re.search(r"(at least |above )average (quality|rating)", lowered):
        found["customerRating"] = "[average, high]"
    elif re.search(r"high(ly)? rat|top rat|high quality|excellent", lowered):
        found["customerRating"] = "high"
    elif re.search(r"average rating|mixed (feedback|review)", lowered):
        found["customerRating"] = "average"
    elif re.search(r"low (customer )?rating|poorly rated", lowered):
        found["customerRating"] = "low"

    if re.search(
        r"not (kid|family)|no kids|just for myself|by myself|alone|not suitable for (kids|children)",
        lowered,
    ):
        found["familyFriendly"] = "no"
    elif re.search(r"kid-friendly|family.friendly|with my (kids|children|family)|for (the |my )?family", lowered):
        found["familyFriendly"] = "yes"

    if re.search(r"where (it is|is it)|\baddress\b|\blocated\b|\blocation\b", lowered):
        found["address"] = "query"
    if re.search(r"phone|call them|telephone", lowered):
        found["phoneNumber"] = "query"

    order = ("restaurant-name", "prefer", "typeToEat", "cuisine", "priceRange",
             "customerRating", "familyFriendly", "address", "phoneNumber")
    parts = []
    for name in order:
        if name in found:
            value = found[name]
            parts.append(f"{name}({value})")
    if not parts:
        raise ExtractionError(f"no predicates recognized in {text!r}")
    return ", ".join(parts)


_ALGEBRA_PATTERNS: tuple[tuple[str, str], ...] = (
    (r"(\w+) (?:received|was given) (\d+) \w+ from (\w+)", "receive"),
    (r"(\w+) gave (\w+) (\d+)", "transfer_k"),
    (r"(\w+) gave (\w+) some", "transfer_q"),
    (r"(\w+) (?:found|has|had|have|collected|bought|got) (\d+)", "has"),
    (r"how many \w+ did (\w+) give(?: to)? (\w+)", "ask_transfer"),
    (r"how many \w+ (?:do|does) (?:they|\w+ and \w+) have (?:in total|together|altogether)", "ask_total"),
    (r"how many \w+ (?:do|does) (\w+)(?: \w+)* have", "ask_has"),
)


def _stub_algebra(input_text: str) -> str:
    sentences = [s.strip() for s in re.split(r"[.?!]+", input_text) if s.strip()]
    facts: list[str] = []
    timestamp = 0
    pending_query: str | None = None

    def entity(name: str) -> str:
        return name.lower()

    for sentence in sentences:
        lowered = sentence.lower()
        for pattern, kind in _ALGEBRA_PATTERNS:
            m = re.search(pattern, lowered)
            if m is None:
                continue
            if kind == "receive":
                to, amount, frm = m.groups()
                facts.append(f"transfer({entity(frm)},{entity(to)},{amount},{timestamp},k).")
                timestamp += 1
            elif kind == "transfer_k":
                frm, to, amount = m.groups()
                facts.append(f"transfer({entity(frm)},{entity(to)},{amount},{timestamp},k).")
                timestamp += 1
            elif kind == "transfer_q":
                frm, to = m.groups()
                facts.append(f"transfer({entity(frm)},{entity(to)},X,{timestamp},q).")
                timestamp += 1
            elif kind == "has":
                who, amount = m.groups()
                facts.append(f"has({entity(who)},{amount},{timestamp},k).")
                timestamp += 1
            elif kind == "ask_transfer":
                frm, to = m.groups()
                if not any(",q)" in f and f.startswith("transfer") for f in facts):
                    pending_query = f"transfer({entity(frm)},{entity(to)},X,{{t}},q)."
            elif kind == "ask_total":
                if not any(",q)" in f for f in facts):
                    pending_query = "total(both,X,{t},q)."
            elif kind == "ask_has":
                who = m.group(1)
                if not any(",q)" in f for f in facts):
                    pending_query = f"has({entity(who)},X,{{t}},q)."
            break
    if pending_query and not any(",q)" in f for f in facts):
        facts.append(pending_query.format(t=timestamp))
    if not facts:
        raise ExtractionError(f"no algebra facts recognized in {input_text!r}")
    return " ".join(facts)


def stub_extract(task: str, input_text: str) -> str:
    if task == "quarel":
        return _stub_quarel(input_text)
    if task == "concierge-extract":
        return _stub_concierge(input_text)
    if task == "algebra":
        return _stub_algebra(input_text)
    raise ValueError(f"no stub extractor for task {task!r}")


# --- extraction pipeline --------------------------------------------------------------


@dataclass(frozen=True)
class PredicateBundle:
    task: str
    predicates: Predicates
    raw_completion: str


def parse_task_predicates(task: str, text: str) -> Predicates:
    if task == "quarel":
        return parse_logical_form(text)
    if task == "algebra":
        return parse_facts(text)
    if task == "concierge-extract":
        return parse_concierge_predicates(text)
    raise ValueError(f"task {task!r} has no predicate grammar")


def serialize_bundle(bundle: PredicateBundle) -> str:
    if isinstance(bundle.predicates, QrelForm):
        return bundle.predicates.text()
    if isinstance(bundle.predicates, AlgebraProblem):
        return bundle.predicates.text()
    return serialize_concierge_predicates(bundle.predicates)


def extract_predicates(
    cfg: ExtractorConfig,
    t: PromptTemplate,
    input_text: str,
    transport: Transport | None = None,
) -> PredicateBundle:
    """Produce validated predicates from text per the configured mode.

    llm mode truncates the completion at the stop token and retries on
    validation failure up to ``max_retries``; stub mode runs the rule-based
    extractor; gold mode parses the input as predicate text directly.
    """
    cfg.validate()
    task = t.task
    if cfg.mode == "gold":
        return PredicateBundle(task, parse_task_predicates(task, input_text), input_text)
    if cfg.mode == "stub":
        raw = stub_extract(task, input_text)
        return PredicateBundle(task, parse_task_predicates(task, raw), raw)
    transport = transport or HttpTransport()
    prompt = build_prompt(t, input_text)
    last_error: Exception | None = None
    last_raw: str | None = None
    for _attempt in range(max(1, cfg.max_retries)):
        try:
            completion = transport.complete(cfg, prompt, t.stop_token)
        except TransportError as exc:
            last_error = exc
            continue
        raw = completion.split(t.stop_token)[0].strip()
        last_raw = raw
        try:
            return PredicateBundle(task, parse_task_predicates(task, raw), raw)
        except DataError as exc:
            last_error = exc
            continue
    if isinstance(last_error, TransportError) and last_raw is None:
        raise last_error
    raise ExtractionError(
        f"no valid completion after {cfg.max_retries} attempts: {last_error}",
        raw_completion=last_raw,
    )


# --- response generation ----------------------------------------------------------------

ASK_TEXTS = {
    "typeToEat": "What kind of restaurant would you like to visit?",
    "cuisine": "What type of cuisine would you like?",
    "priceRange": "What is your desired price range for the place?",
    "customerRating": "Are you looking for a place with a specific customer rating?",
    "familyFriendly": "Would you like somewhere family-friendly for tonight?",
}

FAIL_TEXT = "Unfortunately, we cannot provide the results to your request."
CLOSE_TEXT = "It's no problem, I'm happy to assist."


def action_predicates(action: BotAction, state: ConversationState) -> tuple[ExtractedPredicate, ...]:
    """Express a bot action as predicates for the response generator."""
    if isinstance(action, Ask):
        return (
            ExtractedPredicate("action", ("ask",)),
            ExtractedPredicate("attribute", (action.attribute,)),
        )
    if isinstance(action, Fail):
        return (ExtractedPredicate("action", ("fail",)),)
    if isinstance(action, Close):
        return (ExtractedPredicate("action", ("close",)),)
    record = action.records[0]
    out = [
        ExtractedPredicate("action", ("recommend",)),
        ExtractedPredicate("restaurant-name", (record.name,)),
        ExtractedPredicate("cuisine", (record.cuisine,)),
        ExtractedPredicate("priceRange", (record.priceRange,)),
        ExtractedPredicate("customerRating", (record.customerRating,)),
        ExtractedPredicate("familyFriendly", (record.familyFriendly,)),
        ExtractedPredicate("address", (record.address,)),
    ]
    if "phoneNumber" in state.detail_requests:
        out.append(ExtractedPredicate("phoneNumber", (record.phoneNumber,)))
    if len(action.records) > 1:
        out.append(ExtractedPredicate("matches", (str(len(action.records)),)))
    return tuple(out)


def respond_stub(action: BotAction, state: ConversationState) -> str:
    """Deterministic response templates, one per action kind."""
    if isinstance(action, Ask):
        return ASK_TEXTS[action.attribute]
    if isinstance(action, Fail):
        return FAIL_TEXT
    if isinstance(action, Close):
        return CLOSE_TEXT
    record = action.records[0]
    family = (
        "It is family-friendly."
        if record.familyFriendly == "yes"
        else "Unfortunately, it is not suitable for children."
    )
    text = (
        f"{record.name}, located on {record.address}, has a {record.customerRating} "
        f"customer rating and offers {record.cuisine} cuisine at a {record.priceRange} "
        f"price. {family}"
    )
    if "phoneNumber" in state.detail_requests:
        text += f" You can call {record.phoneNumber}."
    if len(action.records) > 1:
        text += f" {len(action.records) - 1} other place(s) also match your request."
    return text


def generate_text(
    cfg: ExtractorConfig,
    t: PromptTemplate,
    predicates: PredicateBundle,
    transport: Transport | None = None,
) -> str:
    """Render response predicates to English (template stub, or the model)."""
    if t.task != "concierge-respond":
        raise ValueError("generate_text is for the concierge-respond task")
    assert isinstance(predicates.predicates, tuple)
    if cfg.mode in ("stub", "gold"):
        raise ValueError("generate_text in stub mode goes through respond_stub")
    transport = transport or HttpTransport()
    prompt = build_prompt(t, serialize_concierge_predicates(predicates.predicates))
    completion = transport.complete(cfg, prompt, t.stop_token)
    return completion.split(t.stop_token)[0].strip()


def make_responder(cfg: ExtractorConfig, transport: Transport | None = None):
    """A RespondFn for chat sessions honoring the configured mode."""
    if cfg.mode != "llm":
        return respond_stub
    template = default_template("concierge-respond")

    def respond(action: BotAction, state: ConversationState) -> str:
        bundle = PredicateBundle(
            "concierge-respond", action_predicates(action, state), ""
        )
        try:
            return generate_text(cfg, template, bundle, transport)
        except TransportError:
            return respond_stub(action, state)

    return respond


def make_extractor(cfg: ExtractorConfig, task: str, transport: Transport | None = None):
    """An ExtractFn for chat sessions: text -> validated predicates."""
    template = default_template(task)

    def extract(text: str) -> tuple[ExtractedPredicate, ...]:
        bundle = extract_predicates(cfg, template, text, transport)
        assert isinstance(bundle.predicates, tuple)
        return bundle.predicates

    return extract


# --- scoring -----------------------------------------------------------------------------


def _canonical_units(bundle: PredicateBundle) -> list[tuple]:
    p = bundle.predicates
    if isinstance(p, QrelForm):
        return [
            ("obs", p.observation.property, p.observation.value, p.observation.world),
            ("conc", p.option_a.property, p.option_a.value, p.option_a.world),
            ("conc", p.option_b.property, p.option_b.value, p.option_b.world),
        ]
    if isinstance(p, AlgebraProblem):
        return [
            (f.kind, f.entities, str(f.quantity), f.timestamp, f.flag) for f in p.facts
        ]
    units = []
    for predicate in p:
        values = tuple(v.lower() for v in predicate.values)
        units.append((predicate.name, frozenset(values) if predicate.is_list else values))
    return units


def score_extraction(pred: PredicateBundle, gold: PredicateBundle) -> float:
    """1.0 on canonical multiset equality, else the fraction of gold matched."""
    if pred.task != gold.task:
        raise DataError(f"task mismatch: {pred.task} vs {gold.task}")
    pred_units = _canonical_units(pred)
    gold_units = _canonical_units(gold)
    if sorted(map(repr, pred_units)) == sorted(map(repr, gold_units)):
        return 1.0
    if not gold_units:
        return 1.0 if not pred_units else 0.0
    remaining = list(pred_units)
    matched = 0
    for unit in gold_units:
        if unit in remaining:
            remaining.remove(unit)
            matched += 1
    return matched / len(gold_units)
