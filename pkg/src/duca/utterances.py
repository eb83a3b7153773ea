"""Token templates for agent actions and customer replies.

A template is a sequence of parts; each part is either a fixed token or a
tuple of interchangeable tokens. Realization picks a variant uniformly,
then one token per choice slot, all from the episode RNG. Each scripted
action kind has a single template whose canonical form (every slot at
choice 0) matches the corresponding line of the bundled script library
verbatim; lexical jitter moves realizations around the script-similarity
gate, so mild paraphrase usually passes while near-verbatim delivery does
not. Filler and over-promise lines are off-script by construction.

The repeat-script action has no template: it emits a library line
verbatim (see the environment's rollout). The whole corpus (templates
plus library) stays within a 256-token vocabulary.
"""

from __future__ import annotations

Part = str | tuple[str, ...]
Template = tuple[Part, ...]


def _t(*parts: Part) -> Template:
    return tuple(parts)


AGENT_TEMPLATES: dict[str, tuple[Template, ...]] = {
    "greet": (
        _t(("hello", "hi"), "thank", "you", ("so", "very"),
           ("much", "really"), "for", ("taking", "accepting"), "my",
           ("call", "chat"), ("today", "now"), "i", "am",
           ("reaching", "calling"), ("out", "over"), "from", "acme"),
    ),
    "pitch_feature": (
        _t("our", ("plan", "offer"), ("gives", "makes"), "you",
           ("automatic", "instant"), ("reports", "summaries"), "live",
           ("alerts", "updates"), "and", ("simple", "clean"), "dashboards",
           "in", "one", ("place", "screen"), "every", ("week", "month")),
    ),
    "address_objection": (
        _t("i", ("completely", "totally"), ("understand", "hear"), "that",
           ("concern", "worry"), "many", ("customers", "clients"),
           ("felt", "shared"), "the", "same", "and", ("found", "saw"),
           "real", ("value", "benefit"), "within", ("days", "weeks")),
    ),
    "offer_discount": (
        _t(("because", "since"), "you", "are", ("speaking", "talking"),
           "with", "me", ("today", "now"), "i", ("can", "could"),
           ("apply", "unlock"), "a", ("special", "limited"),
           ("twenty", "fifteen"), "percent", ("discount", "saving"), "now"),
    ),
    "ask_close": (
        _t(("shall", "should"), "we", ("go", "move"), ("ahead", "forward"),
           "and", ("set", "sign"), "up", "your", ("account", "profile"),
           ("right", "just"), "now", "it", "only", ("takes", "needs"), "a",
           ("moment", "minute")),
    ),
    "filler": (
        _t("so", ("yeah", "um"), "anyway", "as", "i", "was", "saying",
           "let", "me", ("just", "quickly"), "see", "my",
           ("notes", "numbers"), "here"),
        _t("right", "um", "where", "was", "i", "give", "me", "one",
           ("second", "moment"), "please", "okay"),
    ),
    "over_promise": (
        _t("i", "can", "promise", "you", "this", "plan", "will",
           ("double", "grow"), "your", "savings", "in", ("twenty", "ten"),
           "days", ("guaranteed", "included"), "with", "full", "refund"),
        _t("trust", "me", "you", "will", "never", "regret", "this", "and",
           "it", ("truly", "genuinely"), "pays", "for", "itself", "results",
           "guaranteed", "forever"),
    ),
}

USER_TEMPLATES: dict[str, tuple[Template, ...]] = {
    "neutral": (
        _t("okay", "i", "am", "listening", "go", "on"),
        _t("hmm", "alright", "tell", "me", "more", "then"),
    ),
    "interested": (
        _t("that", "sounds", "truly", "useful", "tell", "me", "more"),
        _t("interesting", "how", "does", "that", "work", "exactly"),
    ),
    "objecting": (
        _t("this", "seems", "too", "expensive", "for", "our", "small",
           "team"),
        _t("i", "do", "not", "think", "we", "need", "this", "now"),
    ),
    "annoyed": (
        _t("please", "just", "get", "to", "the", "point", "already"),
        _t("you", "just", "said", "that", "again", "please", "stop"),
    ),
    "ready_to_buy": (
        _t("alright", "i", "think", "we", "can", "proceed", "today"),
        _t("okay", "that", "works", "for", "me", "lets", "proceed"),
    ),
    "converted": (
        _t("great", "sign", "me", "up", "right", "now", "please"),
        _t("perfect", "send", "me", "the", "papers", "today"),
    ),
    "hangup": (
        _t("i", "have", "to", "go", "goodbye"),
        _t("sorry", "i", "have", "to", "move", "on", "bye", "now"),
    ),
}

VOCABULARY_BUDGET = 256


def realize(templates: tuple[Template, ...], rng) -> tuple[str, ...]:
    """Draw a variant, then one token per choice slot."""
    variant = templates[int(rng.integers(len(templates)))]
    tokens = []
    for part in variant:
        if isinstance(part, str):
            tokens.append(part)
        else:
            tokens.append(part[int(rng.integers(len(part)))])
    return tuple(tokens)


def realize_agent(kind_name: str, rng) -> tuple[str, ...]:
    return realize(AGENT_TEMPLATES[kind_name], rng)


def realize_user(category: str, rng) -> tuple[str, ...]:
    return realize(USER_TEMPLATES[category], rng)


def canonical(kind_name: str) -> tuple[str, ...]:
    """Variant 0 with every slot at choice 0."""
    tokens = []
    for part in AGENT_TEMPLATES[kind_name][0]:
        tokens.append(part if isinstance(part, str) else part[0])
    return tuple(tokens)


def vocabulary() -> set[str]:
    """Every distinct token any template can emit."""
    vocab: set[str] = set()
    for templates in list(AGENT_TEMPLATES.values()) + list(USER_TEMPLATES.values()):
        for template in templates:
            for part in template:
                if isinstance(part, str):
                    vocab.add(part)
                else:
                    vocab.update(part)
    return vocab
